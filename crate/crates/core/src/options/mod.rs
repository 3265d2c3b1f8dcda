//! Prefixed options database and the factory that builds solver trees from it.
//!
//! Syntax: `-key value` pairs, a key directly followed by another key is a
//! boolean flag, `-prefix_push <seg>` / `-prefix_pop` scope subsequent keys,
//! and `#` starts a comment in files. Keys are case-folded to lowercase.
//!
//! The PETSc/Firedrake spelling used in published solver listings is accepted
//! and rewritten on the fly (see [`translate`]).

mod factory;

use std::collections::HashSet;
use std::path::Path;
use std::sync::Mutex;

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub use factory::{build_ksp, build_pc, help_text, BuildCtx};

#[derive(Debug, Default)]
pub struct OptionsDb {
    entries: IndexMap<String, String>,
    used: Mutex<HashSet<String>>,
}

impl Clone for OptionsDb {
    fn clone(&self) -> Self {
        OptionsDb { entries: self.entries.clone(), used: Mutex::new(self.used.lock().expect("poisoned").clone()) }
    }
}

impl PartialEq for OptionsDb {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

fn is_key_token(tok: &str) -> bool {
    let mut chars = tok.chars();
    chars.next() == Some('-') && chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
}

fn validate_key(key: &str) -> Result<()> {
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
        return Err(Error::Options { key: key.to_string(), msg: "keys may only contain [a-z0-9_]".into() });
    }
    Ok(())
}

/// Rewrite one option from the PETSc/Firedrake dialect into ours. Returns
/// `None` for options that only make sense there (`-pc_type python`).
///
/// | foreign | ours |
/// |---|---|
/// | `pc_type python` + `pc_python_type firedrake.AssembledPC` | `pc_type assembled` |
/// | `pc_python_type firedrake.PCDPC` | `pc_type pcd` |
/// | `pc_python_type firedrake.MassInvPC` | `pc_type mass` |
/// | `pc_python_type ssc.SSC` | `pc_type schwarz` |
/// | `ssc_pc_composite_type` | `schwarz_composite_type` |
/// | `ssc_sub_0_pc_patch_*`, `ssc_sub_0_sub_*` | `schwarz_patch_*` |
/// | `ssc_sub_1_lo_*` | `schwarz_coarse_*` |
/// | trailing `,` on a value | dropped |
pub fn translate(key: &str, value: &str) -> Option<(String, String)> {
    let value = value.trim_end_matches(',');
    if key.ends_with("pc_type") && value == "python" {
        return None;
    }
    let mut key = key
        .replace("ssc_sub_0_pc_patch_", "schwarz_patch_")
        .replace("ssc_sub_0_sub_", "schwarz_patch_")
        .replace("ssc_sub_1_lo_", "schwarz_coarse_")
        .replace("ssc_pc_composite_type", "schwarz_composite_type");
    let mut value = value.to_string();
    if let Some(stem) = key.strip_suffix("pc_python_type") {
        key = format!("{stem}pc_type");
        value = match value.as_str() {
            "firedrake.AssembledPC" => "assembled",
            "firedrake.PCDPC" => "pcd",
            "firedrake.MassInvPC" => "mass",
            "ssc.SSC" => "schwarz",
            other => other,
        }
        .to_string();
    }
    Some((key, value))
}

impl OptionsDb {
    pub fn new() -> OptionsDb {
        OptionsDb::default()
    }

    /// Parse command-line style tokens.
    pub fn parse_args<I, S>(tokens: I) -> Result<OptionsDb>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut db = OptionsDb::new();
        db.extend_args(tokens)?;
        Ok(db)
    }

    /// Parse an options file: the same tokens, whitespace separated, `#` comments.
    pub fn parse_str(text: &str) -> Result<OptionsDb> {
        let tokens: Vec<&str> =
            text.lines().map(|l| l.split_once('#').map_or(l, |(a, _)| a)).flat_map(str::split_whitespace).collect();
        OptionsDb::parse_args(tokens)
    }

    pub fn parse_file(path: &Path) -> Result<OptionsDb> {
        OptionsDb::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Add tokens on top of the current contents (later keys win).
    pub fn extend_args<I, S>(&mut self, tokens: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.as_ref().to_string()).collect();
        let mut stack: Vec<String> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let tok = &tokens[i];
            if !is_key_token(tok) {
                return Err(Error::Options { key: tok.clone(), msg: "expected `-key`".into() });
            }
            let key = tok[1..].to_lowercase();
            let value = match tokens.get(i + 1) {
                Some(next) if !is_key_token(next) => {
                    i += 2;
                    Some(next.clone())
                }
                _ => {
                    i += 1;
                    None
                }
            };
            match key.as_str() {
                "prefix_push" => {
                    let seg = value.ok_or_else(|| Error::Options { key: key.clone(), msg: "needs a prefix".into() })?;
                    let seg = seg.to_lowercase();
                    validate_key(&seg)?;
                    stack.push(seg);
                }
                "prefix_pop" => {
                    if stack.pop().is_none() {
                        return Err(Error::UnbalancedPrefix);
                    }
                }
                _ => {
                    validate_key(&key)?;
                    let full = format!("{}{key}", stack.concat());
                    if let Some((k, v)) = translate(&full, value.as_deref().unwrap_or("true")) {
                        self.set(&k, &v);
                    }
                }
            }
        }
        if !stack.is_empty() {
            return Err(Error::Options {
                key: "prefix_push".into(),
                msg: format!("unbalanced: `{}` still pushed at end of input", stack.concat()),
            });
        }
        Ok(())
    }

    /// Later entries of `other` overwrite ours.
    pub fn merge(&mut self, other: &OptionsDb) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_lowercase(), value.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(&key.to_ascii_lowercase())
    }

    /// Whether any key starts with `prefix`. Does not mark anything used.
    pub fn has_prefix(&self, prefix: &str) -> bool {
        let prefix = prefix.to_ascii_lowercase();
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    /// Raw value of a full key (case-insensitive); marks it used.
    pub fn get(&self, key: &str) -> Option<&str> {
        let key = key.to_ascii_lowercase();
        let v = self.entries.get(&key)?;
        self.used.lock().expect("poisoned").insert(key);
        Some(v)
    }

    /// Mark every key starting with `prefix` as consumed.
    pub fn consume_prefix(&self, prefix: &str) {
        let prefix = prefix.to_ascii_lowercase();
        let mut used = self.used.lock().expect("poisoned");
        for k in self.entries.keys().filter(|k| k.starts_with(&prefix)) {
            used.insert(k.clone());
        }
    }

    fn typed<T>(&self, prefix: &str, name: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        let key = format!("{prefix}{name}");
        match self.get(&key) {
            None => Ok(None),
            Some(raw) => parse(raw)
                .map(Some)
                .ok_or_else(|| Error::Options { key, msg: format!("`{raw}` is not a valid {what}") }),
        }
    }

    pub fn get_string(&self, prefix: &str, name: &str, default: &str) -> String {
        self.get(&format!("{prefix}{name}")).unwrap_or(default).to_string()
    }

    pub fn get_int(&self, prefix: &str, name: &str, default: usize) -> Result<usize> {
        Ok(self.typed(prefix, name, "non-negative integer", |s| s.parse().ok())?.unwrap_or(default))
    }

    pub fn get_real(&self, prefix: &str, name: &str, default: f64) -> Result<f64> {
        Ok(self.typed(prefix, name, "real number", |s| s.parse().ok())?.unwrap_or(default))
    }

    pub fn get_bool(&self, prefix: &str, name: &str, default: bool) -> Result<bool> {
        Ok(self.typed(prefix, name, "boolean", parse_bool)?.unwrap_or(default))
    }

    /// One of `choices`, else an error listing them.
    pub fn get_enum(&self, prefix: &str, name: &str, choices: &[&str], default: &str) -> Result<String> {
        let key = format!("{prefix}{name}");
        match self.get(&key) {
            None => Ok(default.to_string()),
            Some(v) => {
                let v = v.to_lowercase();
                if choices.contains(&v.as_str()) {
                    Ok(v)
                } else {
                    Err(Error::Options { key, msg: format!("`{v}` is not one of {}", choices.join(", ")) })
                }
            }
        }
    }

    /// Comma separated integers, e.g. `0,1`.
    pub fn get_usize_list(&self, prefix: &str, name: &str) -> Result<Option<Vec<usize>>> {
        self.typed(prefix, name, "comma separated list of integers", |s| {
            s.split(',').filter(|t| !t.is_empty()).map(|t| t.trim().parse().ok()).collect()
        })
    }

    /// Keys nobody asked for, in insertion order.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.lock().expect("poisoned");
        self.entries.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }

    pub fn clear_usage(&self) {
        self.used.lock().expect("poisoned").clear();
    }

    /// One `-key value` per line; `parse_str(render())` reproduces the db.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push('-');
            s.push_str(k);
            s.push(' ');
            s.push_str(v);
            s.push('\n');
        }
        s
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(db: &OptionsDb) -> Vec<(String, String)> {
        db.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
        p.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn key_value_pairs() {
        let db = OptionsDb::parse_args(["-ksp_type", "cg", "-ksp_rtol", "1e-8"]).unwrap();
        assert_eq!(entries(&db), pairs(&[("ksp_type", "cg"), ("ksp_rtol", "1e-8")]));
    }

    #[test]
    fn prefix_push_and_pop() {
        let db = OptionsDb::parse_args(["-prefix_push", "a_", "-x", "1", "-prefix_pop", "-x", "2"]).unwrap();
        assert_eq!(entries(&db), pairs(&[("a_x", "1"), ("x", "2")]));
    }

    #[test]
    fn nested_prefixes_concatenate() {
        let db = OptionsDb::parse_args([
            "-prefix_push",
            "a_",
            "-prefix_push",
            "a_",
            "-k",
            "v",
            "-prefix_pop",
            "-prefix_pop",
        ])
        .unwrap();
        assert_eq!(entries(&db), pairs(&[("a_a_k", "v")]));
    }

    #[test]
    fn flags_take_true() {
        let db = OptionsDb::parse_args(["-flag", "-k", "v", "-last"]).unwrap();
        assert_eq!(entries(&db), pairs(&[("flag", "true"), ("k", "v"), ("last", "true")]));
    }

    #[test]
    fn negative_numbers_are_values() {
        let db = OptionsDb::parse_args(["-shift", "-1.5"]).unwrap();
        assert_eq!(db.get_real("", "shift", 0.0).unwrap(), -1.5);
    }

    #[test]
    fn unbalanced_pop_is_an_error() {
        assert!(matches!(OptionsDb::parse_args(["-prefix_pop"]), Err(Error::UnbalancedPrefix)));
        assert!(OptionsDb::parse_args(["-prefix_push", "a_", "-x", "1"]).is_err());
    }

    #[test]
    fn malformed_keys_rejected() {
        assert!(OptionsDb::parse_args(["-bad.key", "1"]).is_err());
        assert!(OptionsDb::parse_args(["stray"]).is_err());
    }

    #[test]
    fn typed_getters() {
        let db =
            OptionsDb::parse_args(["-pcd_Mp_ksp_max_it", "2", "-tol", "1e-4", "-flag", "True", "-f", "0,1"]).unwrap();
        assert_eq!(db.get_int("pcd_mp_", "ksp_max_it", 7).unwrap(), 2);
        assert_eq!(db.get_int("pcd_mp_", "missing", 7).unwrap(), 7);
        assert_eq!(db.get_real("", "tol", 0.0).unwrap(), 1e-4);
        assert!(db.get_bool("", "flag", false).unwrap());
        assert_eq!(db.get_usize_list("", "f").unwrap(), Some(vec![0, 1]));
        let err = db.get_int("", "tol", 0).unwrap_err();
        assert!(err.to_string().contains("-tol"));
    }

    #[test]
    fn usage_tracking() {
        let db = OptionsDb::parse_args(["-a", "1", "-b", "2"]).unwrap();
        db.get("a");
        assert_eq!(db.unused(), vec!["b".to_string()]);
    }

    #[test]
    fn file_syntax_with_comments() {
        let db = OptionsDb::parse_str("# solver\n-ksp_type gmres  # outer\n\n-ksp_rtol 1e-4,\n").unwrap();
        assert_eq!(entries(&db), pairs(&[("ksp_type", "gmres"), ("ksp_rtol", "1e-4")]));
    }

    #[test]
    fn foreign_dialect_is_translated() {
        let db = OptionsDb::parse_args([
            "-pc_type",
            "python",
            "-pc_python_type",
            "ssc.SSC",
            "-ssc_sub_0_pc_patch_save_operators",
            "True",
            "-ssc_sub_0_sub_pc_type",
            "lu",
            "-ssc_sub_1_lo_pc_type",
            "telescope",
            "-prefix_push",
            "fieldsplit_1_",
            "-pc_type",
            "python",
            "-pc_python_type",
            "firedrake.PCDPC",
            "-prefix_pop",
        ])
        .unwrap();
        assert_eq!(
            entries(&db),
            pairs(&[
                ("pc_type", "schwarz"),
                ("schwarz_patch_save_operators", "True"),
                ("schwarz_patch_pc_type", "lu"),
                ("schwarz_coarse_pc_type", "telescope"),
                ("fieldsplit_1_pc_type", "pcd"),
            ])
        );
    }

    #[test]
    fn render_round_trip() {
        let db = OptionsDb::parse_args(["-a_b", "1", "-flag", "-x", "0,1"]).unwrap();
        assert_eq!(OptionsDb::parse_str(&db.render()).unwrap(), db);
    }
}
