//! Direct solver for sparse matrices: reverse Cuthill–McKee reordering
//! followed by banded Gaussian elimination with partial pivoting.
//!
//! Row `i` of the working matrix stores columns `i - kl ..= i + kl + ku`;
//! pivoting can push fill up to `kl` columns past the original upper band.

use std::collections::VecDeque;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee ordering of the symmetrised pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            let j = j as usize;
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut levels = vec![0usize; n];

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: repeat BFS from the farthest, lowest-degree node
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..4 {
            let (far, d) = farthest(&adj, &degree, start, &visited, &mut levels);
            if d <= depth {
                break;
            }
            depth = d;
            start = far;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn farthest(adj: &[Vec<usize>], degree: &[usize], start: usize, done: &[bool], level: &mut [usize]) -> (usize, usize) {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    level[start] = 0;
    let mut best = (start, 0usize);
    while let Some(v) = queue.pop_front() {
        let l = level[v];
        if l > best.1 || (l == best.1 && degree[v] < degree[best.0]) {
            best = (v, l);
        }
        for &w in &adj[v] {
            if !seen[w] && !done[w] {
                seen[w] = true;
                level[w] = l + 1;
                queue.push_back(w);
            }
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<BandLu> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch { expected: n, got: a.ncols() });
        }
        let perm = rcm_ordering(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &j in a.row(i).0 {
                let (pi, pj) = (inv[i], inv[j as usize]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            let pi = inv[i];
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let pj = inv[*c as usize];
                band[pi * width + (pj + kl - pi)] = *v;
            }
        }
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut lu = BandLu { n, kl, ku, width, perm, band, pivots: vec![0; n] };
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let tiny = f64::EPSILON * scale * 1e-3;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.band[self.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            // negated so a NaN pivot fails too
            if !(best > tiny) {
                return Err(Error::ZeroPivot { row: self.perm[k] });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.at(k, k)];
            for i in k + 1..=last_row {
                let ik = self.at(i, k);
                let l = self.band[ik] / pivot;
                self.band[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let (src, dst) = (self.at(k, k + 1), self.at(i, k + 1));
                let len = last_col - k;
                for t in 0..len {
                    self.band[dst + t] -= l * self.band[src + t];
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Bytes held by the factorisation.
    pub fn memory_footprint(&self) -> usize {
        8 * self.band.len() + 8 * (self.perm.len() + self.pivots.len())
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            y.swap(k, p);
            let yk = y[k];
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                y[i] -= self.band[self.at(i, k)] * yk;
            }
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.band[self.at(k, j)] * y[j];
            }
            y[k] = s / self.band[self.at(k, k)];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }

    /// Solve with the transposed matrix.
    pub fn solve_transpose(&self, b: &[f64], x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let mut s = y[k];
            for i in k.saturating_sub(kl + ku)..k {
                s -= self.band[self.at(i, k)] * y[i];
            }
            y[k] = s / self.band[self.at(k, k)];
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                s -= self.band[self.at(i, k)] * y[i];
            }
            y[k] = s;
            y.swap(k, self.pivots[k]);
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}
