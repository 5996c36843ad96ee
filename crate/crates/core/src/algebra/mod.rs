//! Finite-dimensional real algebras described by structure constants.
//!
//! An algebra of dimension `n` has basis `e_0 .. e_{n-1}` with `e_0` the
//! multiplicative unit. The product of two basis elements is the linear
//! combination `e_i * e_j = sum_k A[i][j][k] e_k`, so the whole algebra is
//! captured by the rank-3 tensor `A`, stored densely.

mod cayley_dickson;
mod io;
mod predefined;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub use cayley_dickson::cayley_dickson;
pub use io::AlgebraFile;
pub use predefined::{predefined, PREDEFINED_NAMES};

/// Tolerance used by the property predicates when comparing products.
const LAW_TOLERANCE: f64 = 1e-12;

/// The multiplication tensor of an `n`-dimensional algebra.
///
/// Immutable after construction. Equality compares the dimension and the
/// tensor entries; the name is a label only.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    dim: usize,
    // Flattened (i, j, k) row-major: index = (i * n + j) * n + k.
    tensor: Vec<f64>,
    name: Option<String>,
}

impl PartialEq for StructureConstants {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.tensor == other.tensor
    }
}

/// Coordinates of an algebra element in the basis `{e_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    coeffs: Vec<f64>,
}

impl AlgebraElement {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// The basis element `e_index` of a `dim`-dimensional algebra.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[index] = 1.0;
        Self { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for AlgebraElement {
    fn from(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs)
    }
}

/// Sparse description of the non-unit basis products.
///
/// Maps `(i, j)` to the terms `(k, A_ijk)` of `e_i * e_j`. Pairs involving
/// `e_0` are implied by the unit law and may not be listed; any other pair
/// that is absent multiplies to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraEntryMap {
    dim: usize,
    entries: BTreeMap<(usize, usize), Vec<(usize, f64)>>,
}

impl AlgebraEntryMap {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Sets the product `e_i * e_j`, replacing any previous terms for the pair.
    pub fn insert(&mut self, i: usize, j: usize, terms: Vec<(usize, f64)>) -> &mut Self {
        self.entries.insert((i, j), terms);
        self
    }

    /// Builder form of [`insert`](Self::insert) for the single-term case.
    pub fn with(mut self, i: usize, j: usize, k: usize, coeff: f64) -> Self {
        self.entries.entry((i, j)).or_default().push((k, coeff));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<(usize, f64)>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.contains_key(&(i, j))
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        for (&(i, j), terms) in &self.entries {
            if i >= n || j >= n {
                return Err(Error::Validation(format!(
                    "entry ({i},{j}) has an index outside 0..{n}"
                )));
            }
            if i == 0 || j == 0 {
                return Err(Error::Validation(format!(
                    "entry ({i},{j}) redefines a product with the unit e0"
                )));
            }
            let mut seen = vec![false; n];
            for &(k, _) in terms {
                if k >= n {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) -> ({k}, _) has an index outside 0..{n}"
                    )));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) lists e{k} more than once"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim(
                "matrix-vector product",
                format!("matrix has {} columns, vector has {}", self.cols, x.len()),
            ));
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl StructureConstants {
    /// Wraps a raw `(dim, dim, dim)` tensor without enforcing the unit law.
    ///
    /// Use [`check_unit`](Self::check_unit) to test user-supplied tables.
    pub fn from_tensor(dim: usize, tensor: Vec<f64>, name: Option<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        if tensor.len() != dim * dim * dim {
            return Err(Error::Validation(format!(
                "tensor has {} entries, expected {dim}^3 = {}",
                tensor.len(),
                dim * dim * dim
            )));
        }
        if let Some(pos) = tensor.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "tensor entry {pos} is not finite"
            )));
        }
        Ok(Self { dim, tensor, name })
    }

    /// Builds the tensor from the non-unit products, filling in the unit rows.
    /// Unlisted non-unit pairs multiply to zero.
    pub fn from_entries(entries: &AlgebraEntryMap) -> Result<Self> {
        entries.validate()?;
        let n = entries.dim;
        let mut tensor = unit_tensor(n);
        for (&(i, j), terms) in &entries.entries {
            for &(k, coeff) in terms {
                tensor[(i * n + j) * n + k] = coeff;
            }
        }
        Self::from_tensor(n, tensor, None)
    }

    /// Like [`from_entries`](Self::from_entries) but rejects tables that leave
    /// any non-unit product undefined.
    pub fn from_entries_strict(entries: &AlgebraEntryMap) -> Result<Self> {
        let n = entries.dim;
        for i in 1..n {
            for j in 1..n {
                if !entries.contains(i, j) {
                    return Err(Error::Validation(format!(
                        "strict mode: product e{i}*e{j} is not defined"
                    )));
                }
            }
        }
        Self::from_entries(entries)
    }

    /// The non-unit products as an entry map, omitting zero coefficients.
    pub fn to_entries(&self) -> AlgebraEntryMap {
        let n = self.dim;
        let mut map = AlgebraEntryMap::new(n);
        for i in 1..n {
            for j in 1..n {
                let terms: Vec<(usize, f64)> = (0..n)
                    .map(|k| (k, self.get(i, j, k)))
                    .filter(|&(_, c)| c != 0.0)
                    .collect();
                if !terms.is_empty() {
                    map.insert(i, j, terms);
                }
            }
        }
        map
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// `A_ijk`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.tensor[(i * self.dim + j) * self.dim + k]
    }

    /// The flattened tensor, index `(i * n + j) * n + k`.
    pub fn tensor(&self) -> &[f64] {
        &self.tensor
    }

    /// The product `e_i * e_j` as a coefficient slice.
    pub fn basis_product(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.dim + j) * self.dim;
        &self.tensor[start..start + self.dim]
    }

    /// `z_k = sum_{i,j} x_i y_j A_ijk`.
    pub fn mult(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        self.mult_slices(&x.coeffs, &y.coeffs)
            .map(AlgebraElement::new)
    }

    pub fn mult_slices(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        if x.len() != n || y.len() != n {
            return Err(Error::dim(
                "algebra product",
                format!(
                    "operands have lengths {} and {}, algebra dimension is {n}",
                    x.len(),
                    y.len()
                ),
            ));
        }
        let mut z = vec![0.0; n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                let s = xi * yj;
                for (zk, a) in z.iter_mut().zip(self.basis_product(i, j)) {
                    *zk += s * a;
                }
            }
        }
        Ok(z)
    }

    /// The matrix of `x -> w * x`: `L[k][j] = sum_i w_i A_ijk`.
    pub fn left_matrix(&self, w: &AlgebraElement) -> Result<Matrix> {
        self.left_matrix_slice(&w.coeffs)
    }

    pub fn left_matrix_slice(&self, w: &[f64]) -> Result<Matrix> {
        let n = self.dim;
        if w.len() != n {
            return Err(Error::dim(
                "left multiplication matrix",
                format!("element has length {}, algebra dimension is {n}", w.len()),
            ));
        }
        let mut m = Matrix::zeros(n, n);
        for (i, &wi) in w.iter().enumerate() {
            for j in 0..n {
                for (k, a) in self.basis_product(i, j).iter().enumerate() {
                    m.data[k * n + j] += wi * a;
                }
            }
        }
        Ok(m)
    }

    /// `e_0 * e_j = e_j * e_0 = e_j` for every `j`, compared exactly.
    pub fn check_unit(&self) -> bool {
        let n = self.dim;
        (0..n).all(|j| {
            (0..n).all(|k| {
                let delta = if j == k { 1.0 } else { 0.0 };
                self.get(0, j, k) == delta && self.get(j, 0, k) == delta
            })
        })
    }

    /// `(e_i e_j) e_k = e_i (e_j e_k)` over all basis triples.
    pub fn check_associative(&self) -> bool {
        let n = self.dim;
        iproduct3(n).all(|(i, j, k)| is_zero(&self.basis_associator(i, j, k)))
    }

    /// `e_i e_j = e_j e_i` over all basis pairs.
    pub fn check_commutative(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            (0..n).all(|j| {
                self.basis_product(i, j)
                    .iter()
                    .zip(self.basis_product(j, i))
                    .all(|(a, b)| (a - b).abs() <= LAW_TOLERANCE)
            })
        })
    }

    /// Left and right alternative laws, `(xx)y = x(xy)` and `(yx)x = y(xx)`.
    ///
    /// Checked through the linearised form: the associator is antisymmetric in
    /// its first two and in its last two arguments over all basis triples. This
    /// covers the basis-pair identities and is equivalent to the laws holding
    /// for every element.
    pub fn check_alternative(&self) -> bool {
        let n = self.dim;
        iproduct3(n).all(|(i, j, k)| {
            let a = self.basis_associator(i, j, k);
            let left = self.basis_associator(j, i, k);
            let right = self.basis_associator(i, k, j);
            a.iter()
                .zip(&left)
                .all(|(x, y)| (x + y).abs() <= LAW_TOLERANCE)
                && a.iter()
                    .zip(&right)
                    .all(|(x, y)| (x + y).abs() <= LAW_TOLERANCE)
        })
    }

    /// `(e_i e_j) e_k - e_i (e_j e_k)`.
    fn basis_associator(&self, i: usize, j: usize, k: usize) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for l in 0..n {
            let left = self.get(i, j, l);
            let right = self.get(j, k, l);
            for (m, o) in out.iter_mut().enumerate() {
                *o += left * self.get(l, k, m) - right * self.get(i, l, m);
            }
        }
        out
    }
}

impl fmt::Display for StructureConstants {
    /// The multiplication table, one row per left factor.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim;
        let cells: Vec<Vec<String>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| format_combination(self.basis_product(i, j)))
                    .collect()
            })
            .collect();
        let width = cells
            .iter()
            .flatten()
            .map(String::len)
            .chain((0..n).map(|j| format!("e{j}").len()))
            .max()
            .unwrap_or(1);
        let label = format!("e{}", n.saturating_sub(1)).len();
        write!(f, "{:>label$} |", "*")?;
        for j in 0..n {
            write!(f, " {:>width$}", format!("e{j}"))?;
        }
        writeln!(f)?;
        writeln!(f, "{}", "-".repeat(label + 2 + n * (width + 1)))?;
        for (i, row) in cells.iter().enumerate() {
            write!(f, "{:>label$} |", format!("e{i}"))?;
            for cell in row {
                write!(f, " {cell:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Renders a coefficient vector as a signed basis combination, e.g. `-e0` or
/// `e1 + 2e3`. The zero vector renders as `0`.
pub fn format_combination(coeffs: &[f64]) -> String {
    let mut out = String::new();
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let magnitude = c.abs();
        if out.is_empty() {
            if c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        if magnitude != 1.0 {
            out.push_str(&format!("{magnitude}"));
        }
        out.push_str(&format!("e{k}"));
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn unit_tensor(n: usize) -> Vec<f64> {
    let mut tensor = vec![0.0; n * n * n];
    for j in 0..n {
        tensor[j * n + j] = 1.0; // (0, j, j)
        tensor[(j * n) * n + j] = 1.0; // (j, 0, j)
    }
    tensor
}

fn iproduct3(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |i| (0..n).flat_map(move |j| (0..n).map(move |k| (i, j, k))))
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| x.abs() <= LAW_TOLERANCE)
}
