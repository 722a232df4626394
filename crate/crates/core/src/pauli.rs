//! Pauli strings in the symplectic picture and their Clifford conjugation.
//!
//! A string is `i^phase · X^x Z^z` with bit `q` of `x`/`z` referring to qubit `q`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, CMatrix};

pub const MAX_PAULI_QUBITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    pub n: usize,
    pub x: u32,
    pub z: u32,
    /// Power of `i` in front of `X^x Z^z`, mod 4.
    pub phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_PAULI_QUBITS);
        Self { n, x: 0, z: 0, phase: 0 }
    }

    /// Hermitian Pauli with the given letter on `q` (Y carries its own `i`).
    pub fn single(n: usize, q: usize, letter: char) -> Result<Self> {
        let mut p = Self::identity(n);
        p.set_letter(q, letter)?;
        Ok(p)
    }

    /// Parses one letter per qubit, e.g. `"XIZY"`, with an optional leading
    /// `-`, `i` or `-i`.
    pub fn parse(s: &str) -> Result<Self> {
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let n = body.chars().count();
        if n == 0 || n > MAX_PAULI_QUBITS {
            return Err(invalid(format!("Pauli string `{s}` has unsupported length")));
        }
        let mut p = Self::identity(n);
        for (q, c) in body.chars().enumerate() {
            p.set_letter(q, c)?;
        }
        p.phase = (p.phase + phase) % 4;
        Ok(p)
    }

    fn set_letter(&mut self, q: usize, letter: char) -> Result<()> {
        if q >= self.n {
            return Err(invalid(format!("qubit {q} outside {}-qubit Pauli", self.n)));
        }
        let bit = 1u32 << q;
        // Clear the old letter (and its Y phase) first.
        if self.x & bit != 0 && self.z & bit != 0 {
            self.phase = (self.phase + 3) % 4;
        }
        self.x &= !bit;
        self.z &= !bit;
        match letter {
            'I' => {}
            'X' => self.x |= bit,
            'Z' => self.z |= bit,
            'Y' => {
                self.x |= bit;
                self.z |= bit;
                self.phase = (self.phase + 1) % 4;
            }
            other => return Err(invalid(format!("unknown Pauli letter `{other}`"))),
        }
        Ok(())
    }

    pub fn letter(&self, q: usize) -> char {
        let bit = 1u32 << q;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => 'I',
            (true, false) => 'X',
            (false, true) => 'Z',
            (true, true) => 'Y',
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Sign of the string relative to the Hermitian product of its letters:
    /// `i^s` with `s = phase - #Y`.
    pub fn letter_phase(&self) -> u8 {
        let ys = (self.x & self.z).count_ones() as u8;
        (self.phase + 4 - ys % 4) % 4
    }

    pub fn commutes(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        // Z^z1 X^x2 = (-1)^{z1·x2} X^x2 Z^z1
        let swaps = (self.z & other.x).count_ones() as u8;
        Self {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: (self.phase + other.phase + 2 * (swaps % 2)) % 4,
        }
    }

    /// Restriction to `qubits` as a new string on those qubits, in order.
    /// Drops the phase.
    pub fn restrict(&self, qubits: &[usize]) -> Self {
        let mut out = Self::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            out.x |= ((self.x >> q) & 1) << i;
            out.z |= ((self.z >> q) & 1) << i;
        }
        out
    }

    pub fn to_matrix(&self) -> CMatrix {
        let letters: String = (0..self.n)
            .map(|q| match (self.x >> q & 1, self.z >> q & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            })
            .collect();
        let ys = (self.x & self.z).count_ones() as u8;
        // X Z = -i Y per qubit
        let k = (self.phase + 3 * (ys % 4)) % 4;
        let ph = [linalg::ONE, linalg::I, -linalg::ONE, -linalg::I][k as usize];
        linalg::pauli_string_matrix(&letters).scale(ph)
    }

    /// Compact form listing non-identity letters with indices, e.g. `X2Y3`.
    pub fn indexed(&self) -> String {
        let s: String = (0..self.n)
            .filter(|&q| self.letter(q) != 'I')
            .map(|q| format!("{}{q}", self.letter(q)))
            .collect();
        if s.is_empty() {
            "I".to_string()
        } else {
            s
        }
    }

    fn bits(&self, q: usize) -> (u32, u32) {
        ((self.x >> q) & 1, (self.z >> q) & 1)
    }

    fn set_bits(&mut self, q: usize, x: u32, z: u32) {
        let m = !(1u32 << q);
        self.x = (self.x & m) | (x << q);
        self.z = (self.z & m) | (z << q);
    }

    fn add_phase(&mut self, k: u32) {
        self.phase = ((self.phase as u32 + k) % 4) as u8;
    }

    // Conjugation `P -> U P U†` for each Clifford generator.

    pub fn conj_h(&mut self, q: usize) {
        let (x, z) = self.bits(q);
        self.set_bits(q, z, x);
        self.add_phase(2 * (x & z));
    }

    pub fn conj_s(&mut self, q: usize) {
        let (x, z) = self.bits(q);
        self.set_bits(q, x, z ^ x);
        self.add_phase(x);
    }

    pub fn conj_sdg(&mut self, q: usize) {
        let (x, z) = self.bits(q);
        self.set_bits(q, x, z ^ x);
        self.add_phase(3 * x);
    }

    pub fn conj_x(&mut self, q: usize) {
        let (_, z) = self.bits(q);
        self.add_phase(2 * z);
    }

    /// With `X^x Z^z` ordering the CNOT image needs no phase correction.
    pub fn conj_cnot(&mut self, control: usize, target: usize) {
        let (xc, zc) = self.bits(control);
        let (xt, zt) = self.bits(target);
        self.set_bits(target, xt ^ xc, zt);
        self.set_bits(control, xc, zc ^ zt);
    }

    pub fn conj_swap(&mut self, a: usize, b: usize) {
        let (xa, za) = self.bits(a);
        let (xb, zb) = self.bits(b);
        self.set_bits(a, xb, zb);
        self.set_bits(b, xa, za);
    }

    pub fn conj_cz(&mut self, a: usize, b: usize) {
        self.conj_h(b);
        self.conj_cnot(a, b);
        self.conj_h(b);
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = ["", "i", "-", "-i"][self.letter_phase() as usize];
        let body: String = (0..self.n).map(|q| self.letter(q)).collect();
        write!(f, "{sign}{body}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densop::UnitaryOp;
    use proptest::prelude::*;

    fn conj_dense(p: &PauliString, u: &UnitaryOp) -> CMatrix {
        let u = u.embed(p.n).unwrap();
        u.matmul(&p.to_matrix()).matmul(&u.adjoint())
    }

    fn all_two_qubit() -> Vec<PauliString> {
        let mut out = Vec::new();
        for x in 0..4u32 {
            for z in 0..4u32 {
                for phase in 0..4u8 {
                    out.push(PauliString { n: 2, x, z, phase });
                }
            }
        }
        out
    }

    #[test]
    fn parse_and_matrix() {
        let p = PauliString::parse("XY").unwrap();
        let m = linalg::pauli('X').kron(&linalg::pauli('Y'));
        assert!(p.to_matrix().max_abs_diff(&m) < 1e-15);
        assert_eq!(p.to_string(), "XY");
        assert_eq!(PauliString::parse("-iZ").unwrap().to_string(), "-iZ");
        assert_eq!(PauliString::parse("IXIY").unwrap().indexed(), "X1Y3");
        assert!(PauliString::parse("XQ").is_err());
    }

    #[test]
    fn multiplication_matches_matrices() {
        for a in all_two_qubit() {
            for b in all_two_qubit().into_iter().step_by(3) {
                let prod = a.mul(&b).to_matrix();
                let dense = a.to_matrix().matmul(&b.to_matrix());
                assert!(prod.max_abs_diff(&dense) < 1e-14, "{a} * {b}");
                let am = a.to_matrix();
                let bm = b.to_matrix();
                let comm = am.matmul(&bm).max_abs_diff(&bm.matmul(&am)) < 1e-14;
                assert_eq!(a.commutes(&b), comm);
            }
        }
    }

    #[test]
    fn clifford_conjugation_matches_matrices() {
        for p in all_two_qubit() {
            let cases: Vec<(PauliString, UnitaryOp)> = vec![
                ({ let mut q = p; q.conj_h(0); q }, UnitaryOp::hadamard(0)),
                ({ let mut q = p; q.conj_h(1); q }, UnitaryOp::hadamard(1)),
                ({ let mut q = p; q.conj_s(1); q }, UnitaryOp::s(1)),
                ({ let mut q = p; q.conj_sdg(0); q }, UnitaryOp::sdg(0)),
                ({ let mut q = p; q.conj_x(1); q }, UnitaryOp::pauli('X', 1)),
                ({ let mut q = p; q.conj_cnot(0, 1); q }, UnitaryOp::cnot(0, 1)),
                ({ let mut q = p; q.conj_cnot(1, 0); q }, UnitaryOp::cnot(1, 0)),
                ({ let mut q = p; q.conj_swap(0, 1); q }, UnitaryOp::swap(0, 1)),
                (
                    { let mut q = p; q.conj_cz(0, 1); q },
                    UnitaryOp::cphase(std::f64::consts::PI, 0, 1),
                ),
            ];
            for (i, (img, u)) in cases.iter().enumerate() {
                assert!(img.to_matrix().max_abs_diff(&conj_dense(&p, u)) < 1e-12, "case {i} on {p}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn restricted_letters_agree(x in 0u32..64, z in 0u32..64) {
            let p = PauliString { n: 6, x, z, phase: 0 };
            let r = p.restrict(&[4, 1]);
            prop_assert_eq!(r.letter(0), p.letter(4));
            prop_assert_eq!(r.letter(1), p.letter(1));
        }

        #[test]
        fn conjugation_preserves_commutation(
            ax in 0u32..16, az in 0u32..16, bx in 0u32..16, bz in 0u32..16,
            ops in proptest::collection::vec((0u8..4, 0usize..4, 0usize..4), 0..12),
        ) {
            let mut a = PauliString { n: 4, x: ax, z: az, phase: 0 };
            let mut b = PauliString { n: 4, x: bx, z: bz, phase: 0 };
            let before = a.commutes(&b);
            for (kind, q, r) in ops {
                for p in [&mut a, &mut b] {
                    match kind {
                        0 => p.conj_h(q),
                        1 => p.conj_s(q),
                        2 if q != r => p.conj_cnot(q, r),
                        _ => p.conj_swap(q, r),
                    }
                }
            }
            prop_assert_eq!(a.commutes(&b), before);
        }
    }
}
