//! JSON algebra files: `{"name": str, "dim": int, "entries": [[i, j, k, coeff], ...]}`.
//!
//! Products with the unit `e0` are implicit. A file may still list an entry
//! with `i == 0` or `j == 0`; that replaces the implicit product for the pair,
//! which is how tables violating the unit law are expressed.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StructureConstants;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraFile {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl AlgebraFile {
    pub fn into_algebra(self) -> Result<StructureConstants> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        let mut overridden = BTreeSet::new();
        for &(i, j, k, coeff) in &self.entries {
            if i >= n || j >= n || k >= n {
                return Err(Error::Validation(format!(
                    "entry [{i}, {j}, {k}, {coeff}] has an index outside 0..{n}"
                )));
            }
            if !seen.insert((i, j, k)) {
                return Err(Error::Validation(format!(
                    "entry [{i}, {j}, {k}, _] appears more than once"
                )));
            }
            if i == 0 || j == 0 {
                overridden.insert((i, j));
            }
        }

        let mut tensor = vec![0.0; n * n * n];
        for j in 0..n {
            tensor[j * n + j] = 1.0;
            tensor[j * n * n + j] = 1.0;
        }
        for &(i, j) in &overridden {
            tensor[(i * n + j) * n..(i * n + j + 1) * n].fill(0.0);
        }
        for &(i, j, k, coeff) in &self.entries {
            tensor[(i * n + j) * n + k] = coeff;
        }
        StructureConstants::from_tensor(n, tensor, self.name)
    }

    pub fn from_algebra(alg: &StructureConstants) -> Self {
        let n = alg.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let product = alg.basis_product(i, j);
                if i == 0 || j == 0 {
                    let implied = if i == 0 { j } else { i };
                    let is_unit = product
                        .iter()
                        .enumerate()
                        .all(|(k, &c)| c == if k == implied { 1.0 } else { 0.0 });
                    if is_unit {
                        continue;
                    }
                    if product.iter().all(|&c| c == 0.0) {
                        // Explicit zero product still needs one entry to clear the default.
                        entries.push((i, j, implied, 0.0));
                        continue;
                    }
                }
                for (k, &c) in product.iter().enumerate() {
                    if c != 0.0 {
                        entries.push((i, j, k, c));
                    }
                }
            }
        }
        Self {
            name: alg.name().map(str::to_string),
            dim: n,
            entries,
        }
    }

    /// Pretty output with one entry per line, sorted by `(i, j, k)`.
    pub fn to_json(&self) -> String {
        let mut entries = self.entries.clone();
        entries.sort_by_key(|&(i, j, k, _)| (i, j, k));
        let name = serde_json::to_string(self.name.as_deref().unwrap_or("unnamed"))
            .expect("strings always serialize");
        let mut out = format!(
            "{{\n  \"name\": {name},\n  \"dim\": {},\n  \"entries\": [",
            self.dim
        );
        for (idx, (i, j, k, c)) in entries.iter().enumerate() {
            let coeff = serde_json::to_string(c).expect("coefficients are finite");
            let sep = if idx + 1 == entries.len() { "" } else { "," };
            let _ = write!(out, "\n    [{i}, {j}, {k}, {coeff}]{sep}");
        }
        if !entries.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("]\n}\n");
        out
    }
}

impl StructureConstants {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: AlgebraFile =
            serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("algebra file: {e}")))?;
        file.into_algebra()
    }

    pub fn to_json(&self) -> String {
        AlgebraFile::from_algebra(self).to_json()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json().as_bytes())
    }
}
