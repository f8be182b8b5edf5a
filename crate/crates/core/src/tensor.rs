//! Labelled multi-subsystem operators.
//!
//! A [`LabeledOperator`] is a dense complex square matrix together with an
//! ordered list of named subsystems. The first subsystem is the most
//! significant tensor factor of the row/column index. States, Choi matrices,
//! POVM elements and process matrices all use this one carrier.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Eigenvalues below this are treated as exact zeros in entropies.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Tolerated negativity / trace deviation for something to count as a state.
pub const STATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subsystem {
    pub name: String,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }
}

/// Shorthand for building a label list: `systems(&[("A", 2), ("B", 3)])`.
pub fn systems(layout: &[(&str, usize)]) -> Vec<Subsystem> {
    layout.iter().map(|&(n, d)| Subsystem::new(n, d)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    systems: Vec<Subsystem>,
    matrix: CMatrix,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Flat offsets (in the full space) of every multi-index over `subset`,
/// enumerated with the first entry of `subset` most significant.
fn subset_offsets(dims: &[usize], strides: &[usize], subset: &[usize]) -> Vec<usize> {
    let mut offs = vec![0usize];
    for &k in subset {
        let mut next = Vec::with_capacity(offs.len() * dims[k]);
        for &o in &offs {
            for i in 0..dims[k] {
                next.push(o + i * strides[k]);
            }
        }
        offs = next;
    }
    offs
}

impl LabeledOperator {
    pub fn new(systems: Vec<Subsystem>, matrix: CMatrix) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &systems {
            if s.dim == 0 {
                return Err(Error::ZeroDimension(s.name.clone()));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(Error::DuplicateLabel(s.name.clone()));
            }
        }
        let side: usize = systems.iter().map(|s| s.dim).product();
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected: side,
            });
        }
        Ok(Self { systems, matrix })
    }

    /// A 1x1 operator with no subsystems.
    pub fn scalar(value: C64) -> Self {
        Self {
            systems: Vec::new(),
            matrix: CMatrix::from_element(1, 1, value),
        }
    }

    pub fn identity(systems: Vec<Subsystem>) -> Result<Self> {
        let side = systems.iter().map(|s| s.dim).product();
        Self::new(systems, CMatrix::identity(side, side))
    }

    /// The normalised identity `1/d`.
    pub fn maximally_mixed(systems: Vec<Subsystem>) -> Result<Self> {
        let mut op = Self::identity(systems)?;
        let side = op.side() as f64;
        op.matrix /= C64::new(side, 0.0);
        Ok(op)
    }

    /// `|psi><psi|` for an (unnormalised) vector `psi`.
    pub fn projector(systems: Vec<Subsystem>, psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self::new(systems, &v * v.adjoint())
    }

    /// `|k><k|` on a single subsystem.
    pub fn basis_projector(name: &str, dim: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = C64::new(1.0, 0.0);
        Self {
            systems: vec![Subsystem::new(name, dim)],
            matrix: m,
        }
    }

    pub fn systems(&self) -> &[Subsystem] {
        &self.systems
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.dim).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.name == name)
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        self.position(name)
            .map(|p| self.systems[p].dim)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let p = self
                .position(n)
                .ok_or_else(|| Error::UnknownLabel(n.to_string()))?;
            if out.contains(&p) {
                return Err(Error::DuplicateLabel(n.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: &self.matrix * C64::new(factor, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Renames subsystems; names absent from `renames` are kept.
    pub fn relabeled(&self, renames: &[(&str, &str)]) -> Result<Self> {
        let systems = self
            .systems
            .iter()
            .map(|s| {
                let name = renames
                    .iter()
                    .find(|(from, _)| *from == s.name)
                    .map(|(_, to)| to.to_string())
                    .unwrap_or_else(|| s.name.clone());
                Subsystem::new(name, s.dim)
            })
            .collect();
        Self::new(systems, self.matrix.clone())
    }

    /// Kronecker product; labels of `other` are appended.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        for s in &other.systems {
            if self.has_label(&s.name) {
                return Err(Error::DuplicateLabel(s.name.clone()));
            }
        }
        let mut systems = self.systems.clone();
        systems.extend(other.systems.iter().cloned());
        Ok(Self {
            systems,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Re-indexes the matrix so that the label order matches `new_order`.
    pub fn permute(&self, new_order: &[&str]) -> Result<Self> {
        let not_perm = || Error::NotAPermutation(new_order.iter().map(|s| s.to_string()).collect());
        if new_order.len() != self.systems.len() {
            return Err(not_perm());
        }
        let perm = self.positions(new_order).map_err(|_| not_perm())?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let dims = self.dims();
        let old_index = subset_offsets(&dims, &strides(&dims), &perm);
        let n = self.side();
        let matrix = CMatrix::from_fn(n, n, |i, j| self.matrix[(old_index[i], old_index[j])]);
        let systems = perm.iter().map(|&p| self.systems[p].clone()).collect();
        Ok(Self { systems, matrix })
    }

    /// Permutes `other` into this operator's label order.
    pub fn align(&self, other: &Self) -> Result<Self> {
        if other.systems.len() != self.systems.len() {
            return Err(Error::LabelMismatch(format!(
                "{:?} vs {:?}",
                self.names(),
                other.names()
            )));
        }
        for s in &self.systems {
            match other.position(&s.name) {
                Some(p) if other.systems[p].dim == s.dim => {}
                Some(_) => {
                    return Err(Error::DimMismatch(format!("subsystem `{}`", s.name)));
                }
                None => return Err(Error::LabelMismatch(format!("missing `{}`", s.name))),
            }
        }
        other.permute(&self.names())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let o = self.align(other)?;
        Ok(Self {
            systems: self.systems.clone(),
            matrix: &self.matrix + o.matrix,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let o = self.align(other)?;
        Ok(Self {
            systems: self.systems.clone(),
            matrix: &self.matrix - o.matrix,
        })
    }

    /// Frobenius norm of `self - other` after label alignment.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.matrix.norm())
    }

    fn split(&self, over: &[&str]) -> Result<(Vec<usize>, Vec<usize>)> {
        let traced = self.positions(over)?;
        let kept = (0..self.systems.len())
            .filter(|k| !traced.contains(k))
            .collect();
        Ok((kept, traced))
    }

    pub fn partial_trace(&self, over: &[&str]) -> Result<Self> {
        let (kept, traced) = self.split(over)?;
        let dims = self.dims();
        let st = strides(&dims);
        let keep_offs = subset_offsets(&dims, &st, &kept);
        let tr_offs = subset_offsets(&dims, &st, &traced);
        let n = keep_offs.len();
        let matrix = CMatrix::from_fn(n, n, |a, b| {
            tr_offs
                .iter()
                .map(|&t| self.matrix[(keep_offs[a] + t, keep_offs[b] + t)])
                .sum()
        });
        let systems = kept.iter().map(|&k| self.systems[k].clone()).collect();
        Ok(Self { systems, matrix })
    }

    pub fn partial_transpose(&self, over: &[&str]) -> Result<Self> {
        let (kept, traced) = self.split(over)?;
        let dims = self.dims();
        let st = strides(&dims);
        let keep_offs = subset_offsets(&dims, &st, &kept);
        let tr_offs = subset_offsets(&dims, &st, &traced);
        let n = self.side();
        let mut rest = vec![0; n];
        let mut part = vec![0; n];
        for &a in &keep_offs {
            for &t in &tr_offs {
                rest[a + t] = a;
                part[a + t] = t;
            }
        }
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            self.matrix[(rest[i] + part[j], rest[j] + part[i])]
        });
        Ok(Self {
            systems: self.systems.clone(),
            matrix,
        })
    }

    /// `1_x/d_x ⊗ tr_x(self)`, kept in this operator's label order.
    pub fn trace_and_replace(&self, over: &[&str]) -> Result<Self> {
        let (kept, traced) = self.split(over)?;
        let dims = self.dims();
        let st = strides(&dims);
        let keep_offs = subset_offsets(&dims, &st, &kept);
        let tr_offs = subset_offsets(&dims, &st, &traced);
        let d_traced = tr_offs.len() as f64;
        let n = self.side();
        let mut keep_idx = vec![0; n];
        let mut tr_idx = vec![0; n];
        for (ai, &a) in keep_offs.iter().enumerate() {
            for (ti, &t) in tr_offs.iter().enumerate() {
                keep_idx[a + t] = ai;
                tr_idx[a + t] = ti;
            }
        }
        let reduced = self.partial_trace(over)?.matrix / C64::new(d_traced, 0.0);
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            if tr_idx[i] == tr_idx[j] {
                reduced[(keep_idx[i], keep_idx[j])]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Self {
            systems: self.systems.clone(),
            matrix,
        })
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// True iff the Hermitian part has no eigenvalue below `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Frobenius norm of the anti-Hermitian part.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm() / 2.0
    }

    /// Checks Hermiticity, positivity and unit trace within [`STATE_TOL`].
    pub fn check_state(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > STATE_TOL {
            return Err(Error::NotAState(format!("anti-Hermitian part {defect:.3e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::NotAState(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -STATE_TOL {
            return Err(Error::NotAState(format!("eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// Von Neumann entropy in bits.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        self.check_state()?;
        Ok(entropy_of_spectrum(&self.eigenvalues()))
    }
}

/// Ascending eigenvalues of `(m + m†)/2`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[(0, 0)].re];
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `-Σ λ log2 λ` with eigenvalues below [`EIGEN_FLOOR`] dropped.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    let s: f64 = eigenvalues
        .iter()
        .filter(|&&l| l > EIGEN_FLOOR)
        .map(|&l| -l * l.log2())
        .sum();
    s.max(0.0)
}

/// Entropy of a density matrix without state validation.
pub fn entropy_unchecked(m: &CMatrix) -> f64 {
    entropy_of_spectrum(&hermitian_eigenvalues(m))
}

impl fmt::Display for LabeledOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self
            .systems
            .iter()
            .map(|s| format!("{}({})", s.name, s.dim))
            .collect();
        writeln!(f, "[{}]", labels.join(", "))?;
        for i in 0..self.side() {
            let row: Vec<String> = (0..self.side())
                .map(|j| {
                    let z = self.matrix[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    systems: Vec<Subsystem>,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for LabeledOperator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.side();
        let matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let z = self.matrix[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        OperatorJson {
            systems: self.systems.clone(),
            matrix,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabeledOperator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = OperatorJson::deserialize(deserializer)?;
        let n = raw.matrix.len();
        if raw.matrix.iter().any(|row| row.len() != n) {
            return Err(serde::de::Error::custom("matrix rows must all have the same length as the row count"));
        }
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = raw.matrix[i][j];
            C64::new(re, im)
        });
        LabeledOperator::new(raw.systems, matrix).map_err(serde::de::Error::custom)
    }
}
