use crate::error::{Error, Result};

/// Sorted, duplicate-free set of global indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn new(mut indices: Vec<usize>) -> IndexSet {
        indices.sort_unstable();
        indices.dedup();
        IndexSet { indices }
    }

    /// `start..end`
    pub fn range(start: usize, end: usize) -> IndexSet {
        IndexSet { indices: (start..end).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Concatenation of sets listed in increasing order.
    pub fn concat(sets: &[&IndexSet]) -> IndexSet {
        IndexSet::new(sets.iter().flat_map(|s| s.indices.iter().copied()).collect())
    }

    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }

    pub fn scatter(&self, sub: &[f64], x: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(sub) {
            x[i] = v;
        }
    }

    /// Positions of `self`'s indices shifted so that field sets line up
    /// with a local numbering starting at `base`.
    pub fn shifted(&self, base: usize) -> IndexSet {
        IndexSet { indices: self.indices.iter().map(|&i| i - base).collect() }
    }
}

/// Ids of the fields whose concatenation (in field order) equals `query`.
/// Comparison is by value and runs in time linear in the total size.
pub fn match_fields(query: &IndexSet, fields: &[IndexSet]) -> Result<Vec<usize>> {
    let q = query.indices();
    if q.is_empty() {
        return Err(Error::NoFieldMatch);
    }
    let mut pos = 0;
    let mut out = Vec::new();
    for (f, set) in fields.iter().enumerate() {
        let s = set.indices();
        if pos >= q.len() || s.is_empty() || q[pos] != s[0] {
            continue;
        }
        if q.len() - pos < s.len() || q[pos..pos + s.len()] != *s {
            return Err(Error::NoFieldMatch);
        }
        out.push(f);
        pos += s.len();
    }
    if pos != q.len() {
        return Err(Error::NoFieldMatch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields() -> Vec<IndexSet> {
        vec![IndexSet::range(0, 8), IndexSet::range(8, 12), IndexSet::range(12, 20)]
    }

    #[test]
    fn matches_trailing_pair() {
        assert_eq!(match_fields(&IndexSet::range(8, 20), &fields()).unwrap(), vec![1, 2]);
    }

    #[test]
    fn matches_everything() {
        assert_eq!(match_fields(&IndexSet::range(0, 20), &fields()).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_misaligned() {
        assert!(matches!(match_fields(&IndexSet::range(2, 5), &fields()), Err(Error::NoFieldMatch)));
        assert!(match_fields(&IndexSet::range(0, 10), &fields()).is_err());
        assert!(match_fields(&IndexSet::default(), &fields()).is_err());
    }

    #[test]
    fn non_adjacent_fields() {
        let q = IndexSet::concat(&[&IndexSet::range(0, 8), &IndexSet::range(12, 20)]);
        assert_eq!(match_fields(&q, &fields()).unwrap(), vec![0, 2]);
    }

    #[test]
    fn new_sorts_and_dedups() {
        assert_eq!(IndexSet::new(vec![3, 1, 3, 2]).indices(), &[1, 2, 3]);
    }
}
