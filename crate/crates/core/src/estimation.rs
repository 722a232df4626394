//! Bell fidelity from ZZ, XX and YY readout statistics.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densop::{expectation, partial_trace, DensityOperator, UnitaryOp};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, pauli_string_matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairBasis {
    ZZ,
    XX,
    YY,
}

impl PairBasis {
    pub const ALL: [PairBasis; 3] = [PairBasis::ZZ, PairBasis::XX, PairBasis::YY];

    fn letters(self) -> &'static str {
        match self {
            PairBasis::ZZ => "ZZ",
            PairBasis::XX => "XX",
            PairBasis::YY => "YY",
        }
    }

    /// Single-qubit rotation taking this basis to Z (applied in order).
    fn rotation(self, q: usize) -> Vec<UnitaryOp> {
        match self {
            PairBasis::ZZ => vec![],
            PairBasis::XX => vec![UnitaryOp::hadamard(q)],
            PairBasis::YY => vec![UnitaryOp::sdg(q), UnitaryOp::hadamard(q)],
        }
    }
}

impl fmt::Display for PairBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letters())
    }
}

impl FromStr for PairBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ZZ" => Ok(PairBasis::ZZ),
            "XX" => Ok(PairBasis::XX),
            "YY" => Ok(PairBasis::YY),
            other => Err(Error::Parse(format!("unknown basis `{other}`"))),
        }
    }
}

/// `⟨φ|ρ|φ⟩ = (1 + ⟨ZZ⟩ + ⟨XX⟩ - ⟨YY⟩) / 4` on `pair`.
pub fn direct_fidelity_exact(rho: &DensityOperator, pair: (usize, usize)) -> Result<f64> {
    direct_fidelity_noisy(rho, pair, 0.0, 0.0)
}

/// Expected value of the estimator when each qubit's readout flips with
/// probability `m_a`, `m_b`: every correlator shrinks by `(1-2m_a)(1-2m_b)`.
pub fn direct_fidelity_noisy(rho: &DensityOperator, pair: (usize, usize), m_a: f64, m_b: f64) -> Result<f64> {
    for m in [m_a, m_b] {
        if !(0.0..=1.0).contains(&m) {
            return Err(invalid(format!("measurement error {m} outside [0, 1]")));
        }
    }
    let c = (1.0 - 2.0 * m_a) * (1.0 - 2.0 * m_b);
    let t = [pair.0, pair.1];
    let zz = expectation(rho, &pauli_string_matrix("ZZ"), &t)?;
    let xx = expectation(rho, &pauli_string_matrix("XX"), &t)?;
    let yy = expectation(rho, &pauli_string_matrix("YY"), &t)?;
    Ok((1.0 + c * (zz + xx - yy)) / 4.0)
}

/// Exact outcome distribution over `00, 01, 10, 11` for a noisy pair readout.
pub fn outcome_probabilities(
    rho: &DensityOperator,
    pair: (usize, usize),
    basis: PairBasis,
    meas_error: f64,
) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&meas_error) {
        return Err(invalid(format!("measurement error {meas_error} outside [0, 1]")));
    }
    let red = partial_trace(rho, &[pair.0, pair.1])?;
    let mut m = red.into_matrix();
    for q in 0..2 {
        for u in basis.rotation(q) {
            linalg::conjugate(&mut m, 2, u.matrix(), &[q]);
        }
    }
    let ideal: Vec<f64> = (0..4).map(|i| m.get(i, i).re.max(0.0)).collect();
    let mut out = [0.0; 4];
    for (i, &pi) in ideal.iter().enumerate() {
        for (flip, w) in [(0, (1.0 - meas_error).powi(2)), (1, meas_error * (1.0 - meas_error)), (2, meas_error * (1.0 - meas_error)), (3, meas_error * meas_error)] {
            out[i ^ flip] += pi * w;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub basis: PairBasis,
    /// Counts of `00, 01, 10, 11`.
    pub counts: [u64; 4],
    pub shots: u64,
}

impl CountsTable {
    pub fn new(basis: PairBasis, counts: [u64; 4]) -> Self {
        Self {
            basis,
            counts,
            shots: counts.iter().sum(),
        }
    }

    /// Fraction of shots with equal bits.
    pub fn agreement(&self) -> f64 {
        (self.counts[0] + self.counts[3]) as f64 / self.shots as f64
    }
}

/// Draws `shots` readouts by inverse-CDF sampling of the exact distribution.
pub fn sample_counts(
    rho: &DensityOperator,
    pair: (usize, usize),
    basis: PairBasis,
    shots: u64,
    meas_error: f64,
    seed: u64,
) -> Result<CountsTable> {
    if shots == 0 {
        return Err(invalid("shots must be positive"));
    }
    let probs = outcome_probabilities(rho, pair, basis, meas_error)?;
    let total: f64 = probs.iter().sum();
    let mut cdf = [0.0; 4];
    let mut acc = 0.0;
    for (c, p) in cdf.iter_mut().zip(probs) {
        acc += p / total;
        *c = acc;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 4];
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let idx = cdf.iter().position(|&c| u < c).unwrap_or(3);
        counts[idx] += 1;
    }
    Ok(CountsTable { basis, counts, shots })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub f_hat: f64,
    pub std_error: f64,
    pub shots_per_basis: u64,
}

pub fn estimate_from_counts(zz: &CountsTable, xx: &CountsTable, yy: &CountsTable) -> Result<FidelityEstimate> {
    for (t, b) in [(zz, PairBasis::ZZ), (xx, PairBasis::XX), (yy, PairBasis::YY)] {
        if t.basis != b {
            return Err(invalid(format!("expected a {b} table, got {}", t.basis)));
        }
        if t.shots == 0 || t.counts.iter().sum::<u64>() != t.shots {
            return Err(invalid(format!("{b} table has inconsistent or zero shots")));
        }
    }
    let corr = |t: &CountsTable| 2.0 * t.agreement() - 1.0;
    let var = |t: &CountsTable| {
        let s = t.agreement();
        4.0 * s * (1.0 - s) / t.shots as f64
    };
    let f_hat = (1.0 + corr(zz) + corr(xx) - corr(yy)) / 4.0;
    let std_error = (var(zz) + var(xx) + var(yy)).sqrt() / 4.0;
    Ok(FidelityEstimate {
        f_hat,
        std_error,
        shots_per_basis: zz.shots.min(xx.shots).min(yy.shots),
    })
}

/// Samples all three bases with seeds `seed`, `seed + 1`, `seed + 2`.
pub fn estimate_sampled(
    rho: &DensityOperator,
    pair: (usize, usize),
    shots: u64,
    meas_error: f64,
    seed: u64,
) -> Result<FidelityEstimate> {
    let t: Vec<CountsTable> = PairBasis::ALL
        .iter()
        .enumerate()
        .map(|(i, &b)| sample_counts(rho, pair, b, shots, meas_error, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    estimate_from_counts(&t[0], &t[1], &t[2])
}

const OUTCOMES: [&str; 4] = ["00", "01", "10", "11"];

pub fn write_counts_csv(out: &mut impl Write, tables: &[CountsTable]) -> Result<()> {
    writeln!(out, "basis,outcome,count,shots")?;
    for t in tables {
        for (o, c) in OUTCOMES.iter().zip(t.counts) {
            writeln!(out, "{},{o},{c},{}", t.basis, t.shots)?;
        }
    }
    Ok(())
}

pub fn read_counts_csv(input: impl BufRead) -> Result<Vec<CountsTable>> {
    let mut tables: Vec<CountsTable> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("counts CSV line {}: `{line}`", lineno + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let basis: PairBasis = f[0].parse()?;
        let idx = OUTCOMES.iter().position(|o| *o == f[1]).ok_or_else(bad)?;
        let count: u64 = f[2].parse().map_err(|_| bad())?;
        let shots: u64 = f[3].parse().map_err(|_| bad())?;
        match tables.iter_mut().find(|t| t.basis == basis) {
            Some(t) => {
                if t.shots != shots {
                    return Err(bad());
                }
                t.counts[idx] = count;
            }
            None => {
                let mut counts = [0; 4];
                counts[idx] = count;
                tables.push(CountsTable { basis, counts, shots });
            }
        }
    }
    for t in &tables {
        if t.counts.iter().sum::<u64>() != t.shots {
            return Err(Error::Parse(format!("{} counts do not sum to shots", t.basis)));
        }
    }
    Ok(tables)
}
