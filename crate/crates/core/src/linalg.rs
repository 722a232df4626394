//! Dense complex matrices and the strided kernels that embed small operators
//! into an n-qubit register.
//!
//! Qubit 0 is the most significant bit of a computational-basis index, so for
//! n qubits qubit `q` lives at bit position `n - 1 - q`. A k-qubit operator
//! acting on `targets` uses the same convention locally: `targets[0]` is the
//! most significant bit of the operator's row/column index.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(invalid(format!(
                "matrix data has {} entries, expected {}",
                data.len(),
                dim * dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(invalid("matrix rows must form a square matrix"));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let owned: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        let refs: Vec<&[C64]> = owned.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&refs)
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = e;
        }
        m
    }

    /// `|v><w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Result<Self> {
        if v.len() != w.len() {
            return Err(invalid("outer product of vectors with different lengths"));
        }
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for (r, vr) in v.iter().enumerate() {
            for (c, wc) in w.iter().enumerate() {
                m.data[r * dim + c] = vr * wc.conj();
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * d..(k + 1) * d];
                let dst = &mut out.data[r * d..(r + 1) * d];
                for (x, &b) in dst.iter_mut().zip(orow) {
                    *x += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                out.data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(other, -1.0);
        out
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut out = Self::zeros(d);
        for ra in 0..da {
            for ca in 0..da {
                let a = self.data[ra * da + ca];
                if a == ZERO {
                    continue;
                }
                for rb in 0..db {
                    for cb in 0..db {
                        out.data[(ra * db + rb) * d + ca * db + cb] = a * other.data[rb * db + cb];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut err: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                err = err.max((self.data[r * d + c] - self.data[c * d + r].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint()
            .matmul(self)
            .max_abs_diff(&Self::identity(self.dim))
            <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let m = nalgebra::DMatrix::<C64>::from_row_slice(d, d, &self.data);
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut eig: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eig
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim;
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..d)
                .map(|r| self.data[r * d..(r + 1) * d].iter().map(f).collect())
                .collect()
        };
        MatrixRepr {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        let dim = repr.re.len();
        if repr.im.len() != dim
            || repr.re.iter().chain(&repr.im).any(|row| row.len() != dim)
        {
            return Err(serde::de::Error::custom(
                "matrix `re` and `im` must be square arrays of equal size",
            ));
        }
        let data = repr
            .re
            .iter()
            .flatten()
            .zip(repr.im.iter().flatten())
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        Ok(CMatrix { dim, data })
    }
}

/// Single-qubit Pauli matrix for `'I' | 'X' | 'Y' | 'Z'`.
pub fn pauli(letter: char) -> CMatrix {
    let rows: [[C64; 2]; 2] = match letter {
        'I' => [[ONE, ZERO], [ZERO, ONE]],
        'X' => [[ZERO, ONE], [ONE, ZERO]],
        'Y' => [[ZERO, -I], [I, ZERO]],
        'Z' => [[ONE, ZERO], [ZERO, -ONE]],
        other => panic!("not a Pauli letter: {other}"),
    };
    CMatrix::from_rows(&[&rows[0], &rows[1]]).expect("2x2")
}

/// Tensor product of Pauli letters, first letter on the most significant qubit.
pub fn pauli_string_matrix(letters: &str) -> CMatrix {
    letters
        .chars()
        .map(pauli)
        .reduce(|acc, p| acc.kron(&p))
        .unwrap_or_else(|| CMatrix::identity(1))
}

#[inline]
pub(crate) fn bit_of(n: usize, q: usize) -> usize {
    1usize << (n - 1 - q)
}

/// Bit mask of `targets` and the register offsets of every local index.
pub(crate) fn target_layout(n: usize, targets: &[usize]) -> (usize, Vec<usize>) {
    let k = targets.len();
    let mut mask = 0;
    for &t in targets {
        mask |= bit_of(n, t);
    }
    let offsets = (0..1usize << k)
        .map(|j| {
            targets
                .iter()
                .enumerate()
                .filter(|(idx, _)| j & (1 << (k - 1 - idx)) != 0)
                .map(|(_, &t)| bit_of(n, t))
                .sum()
        })
        .collect();
    (mask, offsets)
}

/// Checks that every target is a distinct index below `n`.
pub fn check_targets(n: usize, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(invalid(format!(
                "qubit index {t} out of range for {n}-qubit register"
            )));
        }
        if targets[..i].contains(&t) {
            return Err(invalid(format!("repeated qubit index {t}")));
        }
    }
    Ok(())
}

/// `m <- U m` with `U` embedded on `targets` of an n-qubit register.
pub fn apply_left(m: &mut CMatrix, n: usize, u: &CMatrix, targets: &[usize]) {
    let d = m.dim;
    let (mask, offsets) = target_layout(n, targets);
    let k = offsets.len();
    debug_assert_eq!(u.dim, k);
    let mut rows = vec![ZERO; k * d];
    for base in (0..d).filter(|b| b & mask == 0) {
        for (j, &off) in offsets.iter().enumerate() {
            rows[j * d..(j + 1) * d].copy_from_slice(&m.data[(base + off) * d..(base + off + 1) * d]);
        }
        for (i, &off) in offsets.iter().enumerate() {
            let dst = &mut m.data[(base + off) * d..(base + off + 1) * d];
            dst.fill(ZERO);
            for j in 0..k {
                let uij = u.data[i * k + j];
                if uij == ZERO {
                    continue;
                }
                for (x, &y) in dst.iter_mut().zip(&rows[j * d..(j + 1) * d]) {
                    *x += uij * y;
                }
            }
        }
    }
}

/// `m <- m U†` with `U` embedded on `targets`.
pub fn apply_right_adjoint(m: &mut CMatrix, n: usize, u: &CMatrix, targets: &[usize]) {
    let d = m.dim;
    let (mask, offsets) = target_layout(n, targets);
    let k = offsets.len();
    let mut w = vec![ZERO; k];
    let bases: Vec<usize> = (0..d).filter(|b| b & mask == 0).collect();
    for r in 0..d {
        let row = &mut m.data[r * d..(r + 1) * d];
        for &base in &bases {
            for (j, &off) in offsets.iter().enumerate() {
                w[j] = row[base + off];
            }
            for (i, &off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for j in 0..k {
                    acc += w[j] * u.data[i * k + j].conj();
                }
                row[base + off] = acc;
            }
        }
    }
}

/// `m <- U m U†`.
pub fn conjugate(m: &mut CMatrix, n: usize, u: &CMatrix, targets: &[usize]) {
    apply_left(m, n, u, targets);
    apply_right_adjoint(m, n, u, targets);
}

/// `Σ_i K_i m K_i†` for a Kraus list on `targets`.
pub fn kraus_sum(m: &CMatrix, n: usize, ops: &[CMatrix], targets: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.dim);
    for k in ops {
        let mut term = m.clone();
        conjugate(&mut term, n, k, targets);
        out.add_assign_scaled(&term, 1.0);
    }
    out
}

/// `(1-λ) m + λ (I_T / 2^k) ⊗ Tr_T(m)` on the target subset `T`.
pub fn depolarize_subset(m: &CMatrix, n: usize, targets: &[usize], lambda: f64) -> CMatrix {
    let d = m.dim;
    let (mask, offsets) = target_layout(n, targets);
    let k = offsets.len() as f64;
    let mut out = m.scale_real(1.0 - lambda);
    if lambda == 0.0 {
        return out;
    }
    // Entries with matching target bits receive the traced block.
    for r0 in (0..d).filter(|b| b & mask == 0) {
        for c0 in (0..d).filter(|b| b & mask == 0) {
            let traced: C64 = offsets.iter().map(|&o| m.data[(r0 + o) * d + c0 + o]).sum();
            let add = traced * (lambda / k);
            for &o in &offsets {
                out.data[(r0 + o) * d + c0 + o] += add;
            }
        }
    }
    out
}

/// Reduced matrix on `keep`, in the listed order.
pub fn partial_trace(m: &CMatrix, n: usize, keep: &[usize]) -> CMatrix {
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let (_, keep_off) = target_layout(n, keep);
    let (_, tr_off) = target_layout(n, &traced);
    let dk = keep_off.len();
    let d = m.dim;
    let mut out = CMatrix::zeros(dk);
    for (a, &oa) in keep_off.iter().enumerate() {
        for (b, &ob) in keep_off.iter().enumerate() {
            let s: C64 = tr_off.iter().map(|&t| m.data[(oa + t) * d + ob + t]).sum();
            out.data[a * dk + b] = s;
        }
    }
    out
}

/// Zeroes every row and column whose bit on `qubit` differs from `outcome`.
pub fn project_z(m: &mut CMatrix, n: usize, qubit: usize, outcome: u8) {
    let d = m.dim;
    let bit = bit_of(n, qubit);
    let keep = |i: usize| ((i & bit != 0) as u8) == outcome;
    for r in 0..d {
        let row_keep = keep(r);
        for c in 0..d {
            if !(row_keep && keep(c)) {
                m.data[r * d + c] = ZERO;
            }
        }
    }
}
