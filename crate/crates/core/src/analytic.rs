//! Closed-form distillation results and exact enumeration of Pauli errors
//! through Clifford check circuits.

use serde::{Deserialize, Serialize};

use crate::channels::PauliChannelParams;
use crate::circuit::{Basis, CircuitElement, Gate};
use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::pauli::PauliString;
use crate::protocols::{ProtocolName, ProtocolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResult {
    pub f_b: f64,
    pub f_a: f64,
    pub p_s: f64,
}

impl AnalyticResult {
    pub fn improves(&self) -> bool {
        self.f_a > self.f_b
    }
}

fn check_range(name: &str, x: f64, max: f64) -> Result<()> {
    if (0.0..=max).contains(&x) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} outside [0, {max}]")))
    }
}

/// Z-recurrence on pairs with one-sided bit flips `p` and `q`.
pub fn recurrence_bitflip(p: f64, q: f64) -> Result<AnalyticResult> {
    check_range("p", p, 0.5)?;
    check_range("q", q, 0.5)?;
    let p_s = (1.0 - p) * (1.0 - q) + p * q;
    Ok(AnalyticResult {
        f_b: (1.0 - p).max(1.0 - q),
        f_a: (1.0 - p) * (1.0 - q) / p_s,
        p_s,
    })
}

/// Z-recurrence on pairs with one-sided depolarizing noise `p` and `q`.
pub fn z2b_local_depol(p: f64, q: f64) -> Result<AnalyticResult> {
    check_range("p", p, 1.0)?;
    check_range("q", q, 1.0)?;
    let p_s = (1.0 - 2.0 * p / 3.0) * (1.0 - 2.0 * q / 3.0) + 4.0 * p * q / 9.0;
    Ok(AnalyticResult {
        f_b: (1.0 - p).max(1.0 - q),
        f_a: ((1.0 - p) * (1.0 - q) + p * q / 9.0) / p_s,
        p_s,
    })
}

/// Three-pair protocol with pairs 1 and 3 depolarized by `p`, pair 2 by `q`.
pub fn zx3b_local_depol(p: f64, q: f64) -> Result<AnalyticResult> {
    check_range("p", p, 1.0)?;
    check_range("q", q, 1.0)?;
    let p_s = p * p / 9.0 * (8.0 - 32.0 * q / 3.0) + p / 3.0 * (20.0 * q / 3.0 - 5.0) + 1.0 - q;
    let num = p * p * (1.0 - 28.0 * q / 27.0) + p * (19.0 * q / 9.0 - 2.0) + 1.0 - q;
    Ok(AnalyticResult {
        f_b: (1.0 - p).max(1.0 - q),
        f_a: num / p_s,
        p_s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalResult {
    pub p_g: f64,
    pub f_g: f64,
    pub f_b: f64,
    pub r: f64,
}

/// Perfect pairs hit by `n`-pair global depolarizing noise, then distilled.
pub fn global_depol_distill(protocol: ProtocolName, lambda: f64) -> Result<GlobalResult> {
    check_range("lambda", lambda, 1.0)?;
    let n = match protocol {
        ProtocolName::Z2B | ProtocolName::X2B => 2,
        ProtocolName::ZX3B => 3,
        ProtocolName::General => {
            return Err(Error::UnsupportedProtocol("global closed form needs a fixed protocol".into()))
        }
    };
    // Noiseless acceptance and fidelity of these protocols are both 1.
    let p_g = (1.0 - lambda) + lambda / f64::from(1u32 << (n - 1));
    let f_g = ((1.0 - lambda) + lambda / f64::from(1u32 << (n + 1))) / p_g;
    let f_b = 1.0 - 0.75 * lambda;
    Ok(GlobalResult { p_g, f_g, f_b, r: f_g / f_b })
}

/// One accepted error pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptedErrorRow {
    /// Error on the B halves before the check circuit.
    pub error: PauliString,
    /// Product such as `p_x q_I r_z`.
    pub monomial: String,
    pub probability: f64,
    /// Net single-qubit Pauli on the kept pair, carried to its B half.
    pub residual: char,
}

impl AcceptedErrorRow {
    pub fn error_label(&self) -> String {
        self.error.indexed()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub rows: Vec<AcceptedErrorRow>,
    /// Qubit the residual refers to.
    pub residual_qubit: usize,
    pub p_s: f64,
    pub f_a: f64,
    /// Accepted plus rejected probability; 1 up to rounding.
    pub total_probability: f64,
}

impl Enumeration {
    pub fn residual_label(&self, row: &AcceptedErrorRow) -> String {
        if row.residual == 'I' {
            "I".to_string()
        } else {
            format!("{}{}", row.residual, self.residual_qubit)
        }
    }
}

const SYMBOLS: [char; 3] = ['p', 'q', 'r'];
const SUBSCRIPTS: [&str; 4] = ["I", "x", "y", "z"];
const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

fn symbol(pair: usize) -> String {
    SYMBOLS
        .get(pair)
        .map(|c| c.to_string())
        .unwrap_or_else(|| format!("s{pair}"))
}

/// Pushes a Pauli through the check circuit. Returns the flipped measurement
/// labels and the final frame.
fn propagate(spec: &ProtocolSpec, mut err: PauliString) -> Result<(Vec<(String, u8)>, PauliString)> {
    let n = spec.n_qubits();
    let mut flips = Vec::new();
    for el in &spec.circuit.elements {
        match el {
            CircuitElement::Gate { gate, targets } => match *gate {
                Gate::H => err.conj_h(targets[0]),
                Gate::S => err.conj_s(targets[0]),
                Gate::Sdg => err.conj_sdg(targets[0]),
                Gate::X => err.conj_x(targets[0]),
                Gate::Cnot => err.conj_cnot(targets[0], targets[1]),
                Gate::Swap => err.conj_swap(targets[0], targets[1]),
                Gate::CPhase { theta } => {
                    use std::f64::consts::PI;
                    let wrapped = theta.rem_euclid(2.0 * PI);
                    let trivial = wrapped < 1e-12 || 2.0 * PI - wrapped < 1e-12;
                    if (wrapped - PI).abs() < 1e-12 {
                        err.conj_cz(targets[0], targets[1]);
                    } else if !trivial {
                        return Err(Error::UnsupportedProtocol(format!(
                            "CPhase({theta}) is not Clifford"
                        )));
                    }
                }
            },
            CircuitElement::Measure { qubit, basis, label } => {
                let letter = match basis {
                    Basis::Z => 'Z',
                    Basis::X => 'X',
                    Basis::Y => 'Y',
                };
                let m = PauliString::single(n, *qubit, letter)?;
                flips.push((label.clone(), u8::from(!err.commutes(&m))));
            }
            CircuitElement::Barrier { .. } | CircuitElement::Delay { .. } => {}
            CircuitElement::Channel { .. } => {
                return Err(Error::UnsupportedProtocol(
                    "enumeration needs a channel-free check circuit".into(),
                ))
            }
        }
    }
    Ok((flips, err))
}

/// Enumerates every Pauli pattern on the B halves (one channel per pair),
/// returning the accepted ones with their effect on the kept pair.
pub fn enumerate_accepted(spec: &ProtocolSpec, channels: &[PauliChannelParams]) -> Result<Enumeration> {
    enumerate_accepted_with(spec, channels, Execution::Parallel)
}

pub fn enumerate_accepted_with(
    spec: &ProtocolSpec,
    channels: &[PauliChannelParams],
    exec: Execution,
) -> Result<Enumeration> {
    spec.validate()?;
    let k = spec.n_pairs;
    if channels.len() != k {
        return Err(invalid(format!("{k} pair channels needed, got {}", channels.len())));
    }
    for c in channels {
        c.validate()?;
    }
    let n = spec.n_qubits();
    let (ka, kb) = spec.kept_pair;
    let results = par::map_range(exec, 1usize << (2 * k), |code| -> Result<(bool, AcceptedErrorRow)> {
        let mut err = PauliString::identity(n);
        let mut prob = 1.0;
        let mut mono = Vec::with_capacity(k);
        for (pair, &(_, b)) in spec.pairs.iter().enumerate() {
            let idx = (code >> (2 * (k - 1 - pair))) & 3;
            err = err.mul(&PauliString::single(n, b, LETTERS[idx])?);
            prob *= channels[pair].by_index(idx);
            mono.push(format!("{}_{}", symbol(pair), SUBSCRIPTS[idx]));
        }
        let (flips, frame) = propagate(spec, err)?;
        let accepted = spec
            .rule
            .accepts_with(|l| flips.iter().find(|(x, _)| x == l).map_or(0, |(_, f)| *f));
        // P ⊗ Q on φ equals I ⊗ QP up to phase.
        let on_pair = frame.restrict(&[ka, kb]);
        let x = (on_pair.x & 1) ^ (on_pair.x >> 1);
        let z = (on_pair.z & 1) ^ (on_pair.z >> 1);
        let residual = PauliString { n: 1, x, z, phase: 0 }.letter(0);
        let row = AcceptedErrorRow {
            error: err,
            monomial: mono.join(" "),
            probability: prob,
            residual,
        };
        Ok((accepted, row))
    });
    let mut rows = Vec::new();
    let mut rejected = 0.0;
    for r in results {
        let (accepted, row) = r?;
        if accepted {
            rows.push(row);
        } else {
            rejected += row.probability;
        }
    }
    let p_s: f64 = rows.iter().map(|r| r.probability).sum();
    let good: f64 = rows.iter().filter(|r| r.residual == 'I').map(|r| r.probability).sum();
    Ok(Enumeration {
        residual_qubit: kb,
        f_a: if p_s > 0.0 { good / p_s } else { f64::NAN },
        total_probability: p_s + rejected,
        p_s,
        rows,
    })
}

/// Midpoint grid over `(start, stop)` with `steps` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for GridSpec {
    /// Centers `0.0025, 0.0075, …, 0.4975`.
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 0.5,
            steps: 100,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / self.steps as f64;
        (0..self.steps).map(|i| self.start + (i as f64 + 0.5) * h).collect()
    }
}

/// Fraction of `(p, q)` grid points where `F_a > F_b`.
pub fn improvement_region(
    f: impl Fn(f64, f64) -> Result<AnalyticResult> + Sync + Send,
    grid: &GridSpec,
) -> Result<f64> {
    if grid.steps == 0 || !(grid.stop > grid.start) {
        return Err(invalid("empty improvement grid"));
    }
    let pts = grid.points();
    let rows = par::map(Execution::Parallel, &pts, |&p| -> Result<usize> {
        let mut c = 0;
        for &q in &pts {
            if f(p, q)?.improves() {
                c += 1;
            }
        }
        Ok(c)
    });
    let mut hits = 0;
    for r in rows {
        hits += r?;
    }
    Ok(hits as f64 / (pts.len() * pts.len()) as f64)
}

/// Closed form associated with a protocol under local depolarizing noise.
pub fn local_depol_formula(protocol: ProtocolName) -> Result<fn(f64, f64) -> Result<AnalyticResult>> {
    match protocol {
        ProtocolName::Z2B | ProtocolName::X2B => Ok(z2b_local_depol),
        ProtocolName::ZX3B => Ok(zx3b_local_depol),
        ProtocolName::General => Err(Error::UnsupportedProtocol("no closed form for `general`".into())),
    }
}
