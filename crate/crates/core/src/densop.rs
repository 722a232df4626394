//! Multi-qubit density operators, unitaries and projectors.
//!
//! Qubit 0 is the most significant bit of the basis index. `bell_state(n)`
//! is pair-major: pair `k` occupies qubits `2k` and `2k + 1`.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};

pub const MAX_QUBITS: usize = 12;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_FLOOR: f64 = -1e-9;
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validated constructor: Hermitian, unit trace and positive semidefinite.
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(n_qubits, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Checks only the shape. Used on the output of trace-preserving maps.
    pub(crate) fn from_matrix_unchecked(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(invalid(format!(
                "register of {n_qubits} qubits outside supported range 1..={MAX_QUBITS}"
            )));
        }
        if matrix.dim() != 1 << n_qubits {
            return Err(invalid(format!(
                "matrix dimension {} does not match {n_qubits} qubits",
                matrix.dim()
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(invalid(format!("density operator not Hermitian (error {herm:e})")));
        }
        let tr = self.matrix.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(invalid(format!("density operator trace {tr} != 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < PSD_FLOOR {
            return Err(invalid(format!(
                "density operator not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    pub fn computational(n_qubits: usize, index: usize) -> Result<Self> {
        let d = 1usize << n_qubits;
        if index >= d {
            return Err(invalid(format!("basis index {index} out of range")));
        }
        let mut m = CMatrix::zeros(d);
        m.set(index, index, ONE);
        Self::from_matrix_unchecked(n_qubits, m)
    }

    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        Self::computational(n_qubits, 0)
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let d = 1usize << n_qubits;
        Self::from_matrix_unchecked(n_qubits, CMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    /// `|ψ><ψ|` for a normalized state vector.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let d = amplitudes.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(invalid("state vector length must be a power of two >= 2"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(invalid(format!("state vector norm {norm} != 1")));
        }
        Self::from_matrix_unchecked(d.trailing_zeros() as usize, CMatrix::outer(amplitudes, amplitudes)?)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.hermitian_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `self ⊗ other`, with `other` on the higher qubit indices.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Self::from_matrix_unchecked(
            self.n_qubits + other.n_qubits,
            self.matrix.kron(&other.matrix),
        )
    }

    /// Convex combination `Σ w_i ρ_i`; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid("empty mixture"))?;
        let n = first.1.n_qubits;
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, r)| *w < 0.0 || r.n_qubits != n) || (total - 1.0).abs() > TRACE_TOL {
            return Err(invalid("mixture weights must be nonnegative, sum to 1, on equal registers"));
        }
        let mut m = CMatrix::zeros(1 << n);
        for (w, r) in parts {
            m.add_assign_scaled(&r.matrix, *w);
        }
        Self::from_matrix_unchecked(n, m)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// Unitary acting on an ordered list of target qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOp {
    matrix: CMatrix,
    targets: Vec<usize>,
}

impl UnitaryOp {
    pub fn new(matrix: CMatrix, targets: Vec<usize>) -> Result<Self> {
        if matrix.dim() != 1 << targets.len() {
            return Err(invalid(format!(
                "unitary of dimension {} cannot act on {} qubits",
                matrix.dim(),
                targets.len()
            )));
        }
        linalg::check_targets(usize::MAX >> 1, &targets)?;
        if !matrix.is_unitary(UNITARY_TOL) {
            return Err(invalid("matrix is not unitary within 1e-12"));
        }
        Ok(Self { matrix, targets })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn n_qubits_acted(&self) -> usize {
        self.targets.len()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
        }
    }

    /// Full `2^n x 2^n` matrix of this operator inside an n-qubit register.
    pub fn embed(&self, n: usize) -> Result<CMatrix> {
        linalg::check_targets(n, &self.targets)?;
        let mut m = CMatrix::identity(1 << n);
        linalg::apply_left(&mut m, n, &self.matrix, &self.targets);
        Ok(m)
    }

    pub fn hadamard(q: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::fixed(CMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap(), vec![q])
    }

    /// `S = diag(1, i)`.
    pub fn s(q: usize) -> Self {
        Self::fixed(CMatrix::diag(&[ONE, linalg::I]), vec![q])
    }

    pub fn sdg(q: usize) -> Self {
        Self::fixed(CMatrix::diag(&[ONE, -linalg::I]), vec![q])
    }

    pub fn pauli(letter: char, q: usize) -> Self {
        Self::fixed(linalg::pauli(letter), vec![q])
    }

    /// `|0><0| ⊗ I + |1><1| ⊗ X` with control first.
    pub fn cnot(control: usize, target: usize) -> Self {
        let m = CMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        Self::fixed(m, vec![control, target])
    }

    pub fn swap(a: usize, b: usize) -> Self {
        let m = CMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        Self::fixed(m, vec![a, b])
    }

    /// `diag(1, 1, 1, e^{iθ})`.
    pub fn cphase(theta: f64, a: usize, b: usize) -> Self {
        Self::fixed(
            CMatrix::diag(&[ONE, ONE, ONE, C64::from_polar(1.0, theta)]),
            vec![a, b],
        )
    }

    fn fixed(matrix: CMatrix, targets: Vec<usize>) -> Self {
        debug_assert!(matrix.is_unitary(UNITARY_TOL));
        Self { matrix, targets }
    }
}

/// Idempotent Hermitian operator on an ordered list of target qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    matrix: CMatrix,
    targets: Vec<usize>,
}

impl Projector {
    pub fn new(matrix: CMatrix, targets: Vec<usize>) -> Result<Self> {
        if matrix.dim() != 1 << targets.len() {
            return Err(invalid("projector dimension does not match its targets"));
        }
        linalg::check_targets(usize::MAX >> 1, &targets)?;
        if !matrix.is_hermitian(UNITARY_TOL)
            || matrix.matmul(&matrix).max_abs_diff(&matrix) > UNITARY_TOL
        {
            return Err(invalid("matrix is not an orthogonal projector within 1e-12"));
        }
        Ok(Self { matrix, targets })
    }

    /// `|00><00| + |11><11|` on a pair: the two Z outcomes agree.
    pub fn agreement(a: usize, b: usize) -> Self {
        Self {
            matrix: CMatrix::diag(&[ONE, ZERO, ZERO, ONE]),
            targets: vec![a, b],
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Unnormalized `P m P` on an n-qubit register.
    pub fn sandwich(&self, m: &CMatrix, n: usize) -> Result<CMatrix> {
        linalg::check_targets(n, &self.targets)?;
        let mut out = m.clone();
        linalg::conjugate(&mut out, n, &self.matrix, &self.targets);
        Ok(out)
    }
}

/// φ^⊗n_pairs with pair `k` on qubits `(2k, 2k+1)`.
pub fn bell_state(n_pairs: usize) -> Result<DensityOperator> {
    if n_pairs == 0 {
        return Err(invalid("bell_state needs at least one pair"));
    }
    let pairs: Vec<(usize, usize)> = (0..n_pairs).map(|k| (2 * k, 2 * k + 1)).collect();
    bell_pairs(2 * n_pairs, &pairs)
}

/// Register of `n_qubits` holding φ on each listed pair, |0> elsewhere.
pub fn bell_pairs(n_qubits: usize, pairs: &[(usize, usize)]) -> Result<DensityOperator> {
    let flat: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    linalg::check_targets(n_qubits, &flat)?;
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(invalid(format!("unsupported register size {n_qubits}")));
    }
    let d = 1usize << n_qubits;
    let amp = C64::new((0.5f64).powf(pairs.len() as f64 / 2.0), 0.0);
    let mut psi = vec![ZERO; d];
    for pattern in 0..1usize << pairs.len() {
        let mut idx = 0;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if pattern & (1 << k) != 0 {
                idx |= linalg::bit_of(n_qubits, a) | linalg::bit_of(n_qubits, b);
            }
        }
        psi[idx] = amp;
    }
    DensityOperator::pure(&psi)
}

pub fn apply_unitary(rho: &DensityOperator, u: &UnitaryOp) -> Result<DensityOperator> {
    let n = rho.n_qubits;
    linalg::check_targets(n, &u.targets)?;
    let mut m = rho.matrix.clone();
    linalg::conjugate(&mut m, n, &u.matrix, &u.targets);
    DensityOperator::from_matrix_unchecked(n, m)
}

pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return Err(invalid("partial_trace must keep at least one qubit"));
    }
    linalg::check_targets(rho.n_qubits, keep)?;
    DensityOperator::from_matrix_unchecked(
        keep.len(),
        linalg::partial_trace(&rho.matrix, rho.n_qubits, keep),
    )
}

/// `Tr(O ρ)` for a Hermitian observable `O` on `targets`.
pub fn expectation(rho: &DensityOperator, obs: &CMatrix, targets: &[usize]) -> Result<f64> {
    if obs.dim() != 1 << targets.len() {
        return Err(invalid("observable dimension does not match its targets"));
    }
    if !obs.is_hermitian(HERMITIAN_TOL) {
        return Err(invalid("observable is not Hermitian"));
    }
    let reduced = partial_trace(rho, targets)?;
    Ok(obs.matmul(&reduced.matrix).trace().re)
}

/// `<φ|ρ_ab|φ>` on the reduced state of the pair.
pub fn bell_fidelity(rho: &DensityOperator, pair: (usize, usize)) -> Result<f64> {
    if pair.0 == pair.1 {
        return Err(invalid("bell_fidelity pair indices must differ"));
    }
    let r = partial_trace(rho, &[pair.0, pair.1])?;
    let m = r.matrix();
    let f = 0.5 * (m.get(0, 0) + m.get(0, 3) + m.get(3, 0) + m.get(3, 3)).re;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli_string_matrix;
    use proptest::prelude::*;

    fn random_state(n: usize, seed: u64) -> DensityOperator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        // Mixture of a few random pure states.
        let mut m = CMatrix::zeros(d);
        let weights: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for w in weights {
            let v: Vec<C64> = (0..d).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let v: Vec<C64> = v.iter().map(|a| a / norm).collect();
            m.add_assign_scaled(&CMatrix::outer(&v, &v).unwrap(), w / total);
        }
        DensityOperator::new(n, m).unwrap()
    }

    #[test]
    fn bell_state_one_pair_entries() {
        let phi = bell_state(1).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if (r == 0 || r == 3) && (c == 0 || c == 3) { 0.5 } else { 0.0 };
                assert!((phi.matrix().get(r, c).re - expect).abs() < 1e-15);
            }
        }
        assert!((bell_fidelity(&phi, (0, 1)).unwrap() - 1.0).abs() < 1e-15);
        assert!((bell_state(2).unwrap().trace() - 1.0).abs() < 1e-15);
        assert!(bell_state(0).is_err());
    }

    #[test]
    fn bell_prep_from_zero() {
        let rho = DensityOperator::zero_state(2).unwrap();
        let after_cnot = apply_unitary(&rho, &UnitaryOp::cnot(0, 1)).unwrap();
        assert!(after_cnot.max_abs_diff(&rho) < 1e-15);
        let h = apply_unitary(&rho, &UnitaryOp::hadamard(0)).unwrap();
        let bell = apply_unitary(&h, &UnitaryOp::cnot(0, 1)).unwrap();
        assert!(bell.max_abs_diff(&bell_state(1).unwrap()) < 1e-15);
        let flipped = apply_unitary(&bell, &UnitaryOp::pauli('X', 0)).unwrap();
        assert!(bell_fidelity(&flipped, (0, 1)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn apply_unitary_rejects_bad_index() {
        let rho = DensityOperator::zero_state(2).unwrap();
        assert!(apply_unitary(&rho, &UnitaryOp::cnot(0, 2)).is_err());
    }

    #[test]
    fn partial_traces() {
        let phi = bell_state(1).unwrap();
        let half = partial_trace(&phi, &[0]).unwrap();
        assert!(half.max_abs_diff(&DensityOperator::maximally_mixed(1).unwrap()) < 1e-15);
        let two = bell_state(2).unwrap();
        let cross = partial_trace(&two, &[0, 2]).unwrap();
        assert!(cross.max_abs_diff(&DensityOperator::maximally_mixed(2).unwrap()) < 1e-15);
        let a = random_state(2, 3);
        let b = random_state(1, 4);
        let ab = a.tensor(&b).unwrap();
        assert!(partial_trace(&ab, &[0, 1]).unwrap().max_abs_diff(&a) < 1e-14);
        assert!(partial_trace(&ab, &[]).is_err());
    }

    #[test]
    fn expectations_on_bell_state() {
        let phi = bell_state(1).unwrap();
        let zz = expectation(&phi, &pauli_string_matrix("ZZ"), &[0, 1]).unwrap();
        let yy = expectation(&phi, &pauli_string_matrix("YY"), &[0, 1]).unwrap();
        assert!((zz - 1.0).abs() < 1e-15);
        assert!((yy + 1.0).abs() < 1e-15);
        let mixed = DensityOperator::maximally_mixed(2).unwrap();
        assert!(expectation(&mixed, &pauli_string_matrix("ZZ"), &[0, 1]).unwrap().abs() < 1e-15);
        let non_herm = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(expectation(&phi, &non_herm, &[0]).is_err());
    }

    #[test]
    fn fidelity_of_maximally_mixed_pair() {
        let mixed = DensityOperator::maximally_mixed(2).unwrap();
        assert!((bell_fidelity(&mixed, (0, 1)).unwrap() - 0.25).abs() < 1e-15);
        assert!(bell_fidelity(&mixed, (1, 1)).is_err());
    }

    #[test]
    fn validation_rejects_unphysical() {
        let m = CMatrix::diag(&[C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]);
        assert!(DensityOperator::new(1, m).is_err());
        let m = CMatrix::diag(&[C64::new(0.5, 0.0), C64::new(0.4, 0.0)]);
        assert!(DensityOperator::new(1, m).is_err());
        assert!(UnitaryOp::new(CMatrix::diag(&[ONE, C64::new(0.5, 0.0)]), vec![0]).is_err());
        assert!(Projector::new(CMatrix::diag(&[ONE, C64::new(0.5, 0.0)]), vec![0]).is_err());
        let p = Projector::agreement(0, 1);
        assert!(Projector::new(p.matrix().clone(), vec![0, 1]).is_ok());
    }

    fn random_two_qubit_unitary(seed: u64) -> UnitaryOp {
        // Product of fixed gates with random rotation phases.
        let mut m = CMatrix::identity(4);
        let mut x = seed;
        for _ in 0..6 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1);
            let theta = (x >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
            let gates = [
                UnitaryOp::hadamard(0).embed(2).unwrap(),
                UnitaryOp::cphase(theta, 0, 1).embed(2).unwrap(),
                UnitaryOp::hadamard(1).embed(2).unwrap(),
                UnitaryOp::cnot(1, 0).embed(2).unwrap(),
            ];
            for g in gates {
                m = g.matmul(&m);
            }
        }
        UnitaryOp::new(m, vec![0, 1]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn unitary_preserves_spectrum(seed in any::<u64>()) {
            let rho = random_state(2, seed);
            let u = random_two_qubit_unitary(seed ^ 0x5555);
            let out = apply_unitary(&rho, &u).unwrap();
            out.validate().unwrap();
            for (a, b) in rho.eigenvalues().iter().zip(out.eigenvalues()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn unitary_on_discarded_qubits_is_invisible(seed in any::<u64>()) {
            let rho = random_state(4, seed);
            let u = random_two_qubit_unitary(seed.rotate_left(7));
            let u = UnitaryOp::new(u.matrix().clone(), vec![3, 1]).unwrap();
            let before = partial_trace(&rho, &[0, 2]).unwrap();
            let after = partial_trace(&apply_unitary(&rho, &u).unwrap(), &[0, 2]).unwrap();
            prop_assert!(before.max_abs_diff(&after) < 1e-10);
        }

        #[test]
        fn fidelity_symmetric_in_pair_order(seed in any::<u64>()) {
            let rho = random_state(3, seed);
            let f01 = bell_fidelity(&rho, (0, 2)).unwrap();
            let f10 = bell_fidelity(&rho, (2, 0)).unwrap();
            prop_assert!((f01 - f10).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f01));
        }
    }
}
