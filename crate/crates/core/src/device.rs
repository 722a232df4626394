//! Calibrated device noise: T1/T2 idling, ZZ crosstalk, staggered echoes and
//! mirror-Clifford twirling.
//!
//! Calibration files are JSON:
//!
//! ```json
//! {
//!   "qubits": [{"id": 0, "t1_us": 257.944, "t2_us": 323.573, "meas_error": 0.0065}],
//!   "edges": [{"q1": 0, "q2": 1, "zz_rate_hz": -52860.4, "gate_error": 0.00775153}],
//!   "meas_delay_us": 1.24,
//!   "cnot_duration_us": 0.0
//! }
//! ```
//!
//! `cnot_duration_us` is optional. Circuits built here act on logical qubits
//! `0..chain.len()`, with logical `i` sitting on device qubit `chain[i]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::global_depol_distill;
use crate::channels::{damping_dephasing, gp_from_t1t2, DampingDephasingParams};
use crate::circuit::{
    execute_exact, postselect, Circuit, CircuitElement, Coherence, EdgeError, Gate, NoisyExecutionConfig,
};
use crate::densop::{bell_pairs, partial_trace, DensityOperator};
use crate::error::{config, invalid, Error, Result};
use crate::estimation::direct_fidelity_noisy;
use crate::par::{self, Execution};
use crate::protocols::{err_decrease, ProtocolName, ProtocolSpec, SwapDecomposition};
use crate::sweep::SweepRow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitCalibration {
    pub id: usize,
    pub t1_us: f64,
    pub t2_us: f64,
    pub meas_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCalibration {
    pub q1: usize,
    pub q2: usize,
    /// Signed ZZ rate ω in Hz.
    pub zz_rate_hz: f64,
    pub gate_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceCalibration {
    pub qubits: Vec<QubitCalibration>,
    pub edges: Vec<EdgeCalibration>,
    pub meas_delay_us: f64,
    /// Idle time charged to every chain qubit after each CNOT.
    #[serde(default)]
    pub cnot_duration_us: f64,
}

impl DeviceCalibration {
    pub fn from_json(text: &str) -> Result<Self> {
        let calib: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("calibration: {e}")))?;
        calib.validate()?;
        Ok(calib)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |field: String, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(config(field, format!("{x} is not a probability")))
            }
        };
        let mut seen = BTreeMap::new();
        for (i, q) in self.qubits.iter().enumerate() {
            if seen.insert(q.id, i).is_some() {
                return Err(config(format!("qubits[{i}].id"), format!("duplicate qubit {}", q.id)));
            }
            if !(q.t1_us > 0.0) {
                return Err(config(format!("qubits[{i}].t1_us"), format!("T1 = {} must be positive", q.t1_us)));
            }
            if !(q.t2_us > 0.0) || q.t2_us > 2.0 * q.t1_us {
                return Err(config(
                    format!("qubits[{i}].t2_us"),
                    format!("need 0 < T2 <= 2 T1, got T2 = {} with T1 = {}", q.t2_us, q.t1_us),
                ));
            }
            prob(format!("qubits[{i}].meas_error"), q.meas_error)?;
        }
        for (i, e) in self.edges.iter().enumerate() {
            for (name, q) in [("q1", e.q1), ("q2", e.q2)] {
                if !seen.contains_key(&q) {
                    return Err(config(format!("edges[{i}].{name}"), format!("unknown qubit {q}")));
                }
            }
            if e.q1 == e.q2 {
                return Err(config(format!("edges[{i}]"), "edge joins a qubit to itself"));
            }
            if !e.zz_rate_hz.is_finite() {
                return Err(config(format!("edges[{i}].zz_rate_hz"), "must be finite"));
            }
            prob(format!("edges[{i}].gate_error"), e.gate_error)?;
        }
        if !(self.meas_delay_us >= 0.0) {
            return Err(config("meas_delay_us", "must be >= 0"));
        }
        if !(self.cnot_duration_us >= 0.0) {
            return Err(config("cnot_duration_us", "must be >= 0"));
        }
        Ok(())
    }

    pub fn qubit(&self, id: usize) -> Result<&QubitCalibration> {
        self.qubits
            .iter()
            .find(|q| q.id == id)
            .ok_or_else(|| config("qubits", format!("qubit {id} not calibrated")))
    }

    /// Edge lookup regardless of orientation.
    pub fn edge(&self, a: usize, b: usize) -> Result<&EdgeCalibration> {
        self.edges
            .iter()
            .find(|e| (e.q1 == a && e.q2 == b) || (e.q1 == b && e.q2 == a))
            .ok_or_else(|| config("edges", format!("no calibrated edge between {a} and {b}")))
    }

    /// Same calibration with T1 = T2 = ∞ (no idle decay).
    pub fn with_ideal_coherence(&self) -> Self {
        let mut c = self.clone();
        for q in &mut c.qubits {
            q.t1_us = f64::INFINITY;
            q.t2_us = f64::INFINITY;
        }
        c
    }

    /// Executor noise for a chain: edge gate errors, readout errors and
    /// coherence keyed by logical index.
    pub fn execution_config(&self, chain: &[usize]) -> Result<NoisyExecutionConfig> {
        let mut cfg = NoisyExecutionConfig::noiseless();
        for (i, &q) in chain.iter().enumerate() {
            let qc = self.qubit(q)?;
            cfg.qubit_meas_error.insert(i, qc.meas_error);
            cfg.coherence.insert(
                i,
                Coherence {
                    t1_us: qc.t1_us,
                    t2_us: qc.t2_us,
                },
            );
        }
        for i in 0..chain.len() {
            for j in i + 1..chain.len() {
                if let Ok(e) = self.edge(chain[i], chain[j]) {
                    cfg.edge_gate_error.push(EdgeError {
                        a: i,
                        b: j,
                        error: e.gate_error,
                    });
                }
            }
        }
        Ok(cfg)
    }
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<DeviceCalibration> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    DeviceCalibration::from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_calibration(calib: &DeviceCalibration, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, calib.to_json() + "\n")?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdMode {
    #[default]
    None,
    Staggered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdleSpec {
    pub n_segments: usize,
    /// Total idle time; each segment lasts `delay_us / n_segments`.
    pub delay_us: f64,
    pub dd_mode: DdMode,
    pub zz_enabled: bool,
}

impl Default for IdleSpec {
    fn default() -> Self {
        Self {
            n_segments: 16,
            delay_us: 0.0,
            dd_mode: DdMode::Staggered,
            zz_enabled: true,
        }
    }
}

impl IdleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(config("n_segments", "must be >= 1"));
        }
        if self.dd_mode == DdMode::Staggered && self.n_segments % 4 != 0 {
            return Err(config("n_segments", "staggered DD needs a multiple of 4 segments"));
        }
        if !(self.delay_us >= 0.0) || !self.delay_us.is_finite() {
            return Err(config("delay_us", format!("{} must be finite and >= 0", self.delay_us)));
        }
        Ok(())
    }
}

/// Segmented idle evolution on a chain. Each segment applies T1/T2 decay,
/// then the ZZ phase `2π ω δt/n` per edge as a CPhase. With staggered DD,
/// even chain positions get X after segments n/2 and n, odd ones after n/4
/// and 3n/4, which cancels every Z and ZZ phase exactly.
pub fn idle_sequence(chain: &[usize], spec: &IdleSpec, calib: &DeviceCalibration) -> Result<Vec<CircuitElement>> {
    spec.validate()?;
    let n = spec.n_segments;
    let seg = spec.delay_us / n as f64;
    let decay: Vec<DampingDephasingParams> = chain
        .iter()
        .map(|&q| {
            let c = calib.qubit(q)?;
            gp_from_t1t2(seg, c.t1_us, c.t2_us)
        })
        .collect::<Result<_>>()?;
    let zz: Vec<f64> = chain
        .windows(2)
        .map(|w| calib.edge(w[0], w[1]).map(|e| 2.0 * PI * e.zz_rate_hz * seg * 1e-6))
        .collect::<Result<_>>()?;
    let mut els = Vec::new();
    if spec.delay_us == 0.0 {
        return Ok(els);
    }
    for k in 1..=n {
        for (i, gp) in decay.iter().enumerate() {
            if gp.g > 0.0 || gp.p > 0.0 {
                els.push(CircuitElement::channel(damping_dephasing(*gp)?.on(&[i])?));
            }
        }
        if spec.zz_enabled {
            for (j, &theta) in zz.iter().enumerate() {
                els.push(CircuitElement::gate(Gate::CPhase { theta }, &[j, j + 1]));
            }
        }
        if spec.dd_mode == DdMode::Staggered {
            for i in 0..chain.len() {
                let pulse = if i % 2 == 0 {
                    k == n / 2 || k == n
                } else {
                    k == n / 4 || k == 3 * n / 4
                };
                if pulse {
                    els.push(CircuitElement::gate(Gate::X, &[i]));
                }
            }
        }
    }
    Ok(els)
}

/// Options shared by every delay point of an idle experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdleExperiment {
    pub idle: IdleSpec,
    pub swap: SwapDecomposition,
}

impl Default for IdleExperiment {
    fn default() -> Self {
        Self {
            idle: IdleSpec::default(),
            swap: SwapDecomposition::ThreeCnots,
        }
    }
}

fn swap_stage(n_pairs: usize) -> Vec<(usize, usize)> {
    if n_pairs == 2 {
        vec![(1, 2)]
    } else {
        vec![(1, 2), (3, 4), (2, 3)]
    }
}

fn push_gate(els: &mut Vec<CircuitElement>, el: CircuitElement, calib: &DeviceCalibration, n: usize) {
    let two_qubit = matches!(&el, CircuitElement::Gate { targets, .. } if targets.len() == 2);
    els.push(el);
    if two_qubit && calib.cnot_duration_us > 0.0 {
        els.push(CircuitElement::Delay {
            duration_us: calib.cnot_duration_us,
            qubits: (0..n).collect(),
        });
    }
}

/// Prep, swap, idle and check circuit for one delay. Barrier `t2` marks the
/// end of the idle stage; measurement-delay decay precedes the readouts.
pub fn idle_distill_circuit(
    proto: &ProtocolSpec,
    chain: &[usize],
    calib: &DeviceCalibration,
    exp: &IdleExperiment,
) -> Result<Circuit> {
    let n = proto.n_qubits();
    if chain.len() != n {
        return Err(invalid(format!("chain has {} qubits, {} needs {n}", chain.len(), proto.name)));
    }
    if proto.name == ProtocolName::General {
        return Err(Error::UnsupportedProtocol("general protocols have no idle layout".into()));
    }
    let mut els = Vec::new();
    for k in 0..proto.n_pairs {
        els.push(CircuitElement::h(2 * k));
        push_gate(&mut els, CircuitElement::cnot(2 * k, 2 * k + 1), calib, n);
    }
    els.push(CircuitElement::barrier("t0"));
    for (a, b) in swap_stage(proto.n_pairs) {
        match exp.swap {
            SwapDecomposition::ThreeCnots => {
                for (c, t) in [(a, b), (b, a), (a, b)] {
                    push_gate(&mut els, CircuitElement::cnot(c, t), calib, n);
                }
            }
            SwapDecomposition::SingleGate => push_gate(&mut els, CircuitElement::swap(a, b), calib, n),
        }
    }
    els.push(CircuitElement::barrier("t1"));
    els.extend(idle_sequence(chain, &exp.idle, calib)?);
    els.push(CircuitElement::barrier("t2"));
    let mut delayed = false;
    for el in &proto.circuit.elements {
        if matches!(el, CircuitElement::Measure { .. }) && !delayed {
            delayed = true;
            els.push(CircuitElement::Delay {
                duration_us: calib.meas_delay_us,
                qubits: (0..n).collect(),
            });
        }
        push_gate(&mut els, el.clone(), calib, n);
    }
    Circuit::new(n, els)
}

fn meas_delay(rho: &DensityOperator, chain: &[usize], calib: &DeviceCalibration) -> Result<DensityOperator> {
    let n = rho.n_qubits();
    let mut m = rho.matrix().clone();
    for (i, &q) in chain.iter().enumerate() {
        let c = calib.qubit(q)?;
        let ch = damping_dephasing(gp_from_t1t2(calib.meas_delay_us, c.t1_us, c.t2_us)?)?.on(&[i])?;
        m = ch.apply_matrix(&m, n)?;
    }
    DensityOperator::new(n, m)
}

fn pair_fidelity(rho: &DensityOperator, pair: (usize, usize), chain: &[usize], calib: &DeviceCalibration) -> Result<f64> {
    let ma = calib.qubit(chain[pair.0])?.meas_error;
    let mb = calib.qubit(chain[pair.1])?.meas_error;
    direct_fidelity_noisy(rho, pair, ma, mb)
}

/// One delay point: the control run's pair fidelities (measured in place of
/// the checks) and the distilled result. Fidelities are the exact expected
/// values of the direct estimator under readout error.
pub fn idle_distill_point(
    proto: &ProtocolSpec,
    chain: &[usize],
    calib: &DeviceCalibration,
    exp: &IdleExperiment,
) -> Result<SweepRow> {
    let circuit = idle_distill_circuit(proto, chain, calib, exp)?;
    let cfg = calib.execution_config(chain)?;
    let n = circuit.n_qubits;
    let res = execute_exact(&circuit, &DensityOperator::zero_state(n)?, &cfg)?;
    let t2 = res.snapshot("t2").expect("idle barrier");
    let control = meas_delay(t2, chain, calib)?;
    let f_pairs = proto
        .pairs
        .iter()
        .map(|&p| pair_fidelity(&control, p, chain, calib))
        .collect::<Result<Vec<_>>>()?;
    let f_b = f_pairs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut row = SweepRow::new(exp.idle.delay_us, f_pairs, f_b);
    match postselect(&res, &proto.rule) {
        Ok((p, kept)) => {
            let (a, b) = proto.kept_pair;
            let pair = partial_trace(&kept, &[a, b])?;
            let ma = calib.qubit(chain[a])?.meas_error;
            let mb = calib.qubit(chain[b])?.meas_error;
            row.set_distilled(p, direct_fidelity_noisy(&pair, (0, 1), ma, mb)?);
        }
        Err(Error::NothingAccepted(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Runs [`idle_distill_point`] for every delay in `delays_us`.
pub fn idle_distill_experiment(
    protocol: ProtocolName,
    chain: &[usize],
    calib: &DeviceCalibration,
    delays_us: &[f64],
    exp: &IdleExperiment,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    calib.validate()?;
    let proto = protocol.build()?;
    par::map(exec, delays_us, |&d| {
        let mut e = *exp;
        e.idle.delay_us = d;
        idle_distill_point(&proto, chain, calib, &e)
    })
    .into_iter()
    .collect()
}

/// Qubits spanned by mirror-Clifford layers.
pub const TWIRL_QUBITS: usize = 4;
/// Generator word length of one random Clifford layer.
pub const LAYER_LENGTH: usize = 20;

fn random_layer(rng: &mut ChaCha8Rng) -> Vec<CircuitElement> {
    // H and S on each qubit, CNOT both ways on each chain edge.
    let n_gen = 2 * TWIRL_QUBITS + 2 * (TWIRL_QUBITS - 1);
    (0..LAYER_LENGTH)
        .map(|_| {
            let g = rng.gen_range(0..n_gen);
            if g < TWIRL_QUBITS {
                CircuitElement::h(g)
            } else if g < 2 * TWIRL_QUBITS {
                CircuitElement::gate(Gate::S, &[g - TWIRL_QUBITS])
            } else {
                let e = g - 2 * TWIRL_QUBITS;
                let (a, b) = (e / 2, e / 2 + 1);
                if e % 2 == 0 {
                    CircuitElement::cnot(a, b)
                } else {
                    CircuitElement::cnot(b, a)
                }
            }
        })
        .collect()
}

fn inverse_gate(el: &CircuitElement) -> CircuitElement {
    match el {
        CircuitElement::Gate { gate: Gate::S, targets } => CircuitElement::gate(Gate::Sdg, targets),
        CircuitElement::Gate { gate: Gate::Sdg, targets } => CircuitElement::gate(Gate::S, targets),
        other => other.clone(),
    }
}

/// `k` random Clifford layers on a 4-qubit chain followed by their exact
/// inverse in mirrored order.
pub fn mirror_clifford_layers(k: usize, seed: u64) -> Vec<CircuitElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forward: Vec<CircuitElement> = (0..k).flat_map(|_| random_layer(&mut rng)).collect();
    let mut out = forward.clone();
    out.extend(forward.iter().rev().map(inverse_gate));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwirlPoint {
    pub k: usize,
    pub f_b: f64,
    pub f_a: f64,
    pub p_accept: f64,
    pub r: f64,
    /// Ratio predicted by global depolarizing noise with the same `F_b`.
    pub r_theory: f64,
}

/// Seed-averaged Z2B performance after mirror-Clifford layers carrying
/// two-qubit gate error `gate_error`. Pairs sit on (0,2) and (1,3); the
/// checks themselves are noiseless.
pub fn twirl_experiment(
    ks: &[usize],
    n_seeds: usize,
    gate_error: f64,
    exec: Execution,
) -> Result<Vec<TwirlPoint>> {
    if n_seeds == 0 {
        return Err(invalid("need at least one seed"));
    }
    let proto = ProtocolName::Z2B.build()?;
    let init = bell_pairs(TWIRL_QUBITS, &proto.pairs)?;
    let noisy = NoisyExecutionConfig::uniform(gate_error, 0.0)?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let states = par::map_range(exec, n_seeds, |s| -> Result<DensityOperator> {
            let c = Circuit::new(TWIRL_QUBITS, mirror_clifford_layers(k, s as u64))?;
            Ok(execute_exact(&c, &init, &noisy)?.unconditional())
        });
        let states = states.into_iter().collect::<Result<Vec<_>>>()?;
        let w = 1.0 / n_seeds as f64;
        let parts: Vec<(f64, &DensityOperator)> = states.iter().map(|s| (w, s)).collect();
        let avg = DensityOperator::mixture(&parts)?;
        let f_b = proto
            .pairs
            .iter()
            .map(|&p| crate::densop::bell_fidelity(&avg, p))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let res = execute_exact(&proto.circuit, &avg, &NoisyExecutionConfig::noiseless())?;
        let (p, kept) = postselect(&res, &proto.rule)?;
        let f_a = crate::densop::bell_fidelity(&kept, proto.kept_pair)?;
        let lambda = (4.0 * (1.0 - f_b) / 3.0).clamp(0.0, 1.0);
        out.push(TwirlPoint {
            k,
            f_b,
            f_a,
            p_accept: p,
            r: f_a / f_b,
            r_theory: global_depol_distill(ProtocolName::Z2B, lambda)?.r,
        });
    }
    Ok(out)
}

/// `err_decrease` of a row, when defined.
pub fn row_err_decrease(row: &SweepRow) -> Option<f64> {
    row.f_a.and_then(|fa| err_decrease(fa, row.f_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densop::bell_fidelity;

    fn toy(t1: f64, t2: f64, zz: f64) -> DeviceCalibration {
        DeviceCalibration {
            qubits: (0..4)
                .map(|id| QubitCalibration {
                    id,
                    t1_us: t1,
                    t2_us: t2,
                    meas_error: 0.0,
                })
                .collect(),
            edges: (0..3)
                .map(|q| EdgeCalibration {
                    q1: q,
                    q2: q + 1,
                    zz_rate_hz: zz,
                    gate_error: 0.0,
                })
                .collect(),
            meas_delay_us: 0.0,
            cnot_duration_us: 0.0,
        }
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut c = toy(100.0, 150.0, 0.0);
        c.qubits[2].t2_us = 250.0;
        match c.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "qubits[2].t2_us"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"qubits": [{"id": 0, "t1_us": 1.0, "meas_error": 0.0}], "edges": [], "meas_delay_us": 0}"#;
        let msg = DeviceCalibration::from_json(bad).unwrap_err().to_string();
        assert!(msg.contains("t2_us"), "{msg}");
        let mut c = toy(100.0, 150.0, 0.0);
        c.edges[0].q2 = 9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_delay_is_empty() {
        let spec = IdleSpec {
            delay_us: 0.0,
            zz_enabled: false,
            dd_mode: DdMode::None,
            ..IdleSpec::default()
        };
        assert!(idle_sequence(&[0, 1], &spec, &toy(100.0, 100.0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn single_segment_decay() {
        let spec = IdleSpec {
            n_segments: 1,
            delay_us: 100.0,
            dd_mode: DdMode::None,
            zz_enabled: false,
        };
        let els = idle_sequence(&[0], &spec, &toy(100.0, 100.0, 0.0)).unwrap();
        assert_eq!(els.len(), 1);
        match &els[0] {
            CircuitElement::Channel { channel } => match channel.kind {
                crate::channels::ChannelKind::DampingDephasing { g, p } => {
                    assert!((g - 0.632121).abs() < 1e-6 && (p - 0.196735).abs() < 1e-6);
                }
                ref k => panic!("{k:?}"),
            },
            other => panic!("{other:?}"),
        }
        let mut spec = spec;
        spec.n_segments = 3;
        spec.dd_mode = DdMode::Staggered;
        assert!(idle_sequence(&[0], &spec, &toy(100.0, 100.0, 0.0)).is_err());
    }

    #[test]
    fn staggered_echo_cancels_zz() {
        let calib = toy(f64::INFINITY, f64::INFINITY, -52860.4);
        let pairs = [(0, 2), (1, 3)];
        let rho = bell_pairs(4, &pairs).unwrap();
        for delay in [3.0, 17.0, 100.0] {
            let spec = IdleSpec {
                delay_us: delay,
                ..IdleSpec::default()
            };
            let c = Circuit::new(4, idle_sequence(&[0, 1, 2, 3], &spec, &calib).unwrap()).unwrap();
            let out = execute_exact(&c, &rho, &NoisyExecutionConfig::noiseless()).unwrap().unconditional();
            assert!(out.max_abs_diff(&rho) < 1e-10);
        }
    }

    #[test]
    fn mirror_layers_are_identity() {
        assert!(mirror_clifford_layers(0, 3).is_empty());
        let proto = ProtocolName::Z2B.build().unwrap();
        let rho = bell_pairs(4, &proto.pairs).unwrap();
        for seed in 0..5 {
            let c = Circuit::new(4, mirror_clifford_layers(3, seed)).unwrap();
            let out = execute_exact(&c, &rho, &NoisyExecutionConfig::noiseless()).unwrap().unconditional();
            assert!(out.max_abs_diff(&rho) < 1e-12);
        }
        assert_ne!(mirror_clifford_layers(2, 1), mirror_clifford_layers(2, 2));
    }

    #[test]
    fn perfect_device_distills_perfectly() {
        let calib = toy(f64::INFINITY, f64::INFINITY, 0.0);
        for (proto, chain) in [(ProtocolName::Z2B, vec![0, 1, 2, 3]), (ProtocolName::X2B, vec![0, 1, 2, 3])] {
            let rows = idle_distill_experiment(proto, &chain, &calib, &[0.0, 50.0], &IdleExperiment::default(), Execution::Sequential).unwrap();
            for r in rows {
                assert!((r.f_a.unwrap() - 1.0).abs() < 1e-12);
                assert!((r.p_accept - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelities_use_pair_layout() {
        let calib = toy(100.0, 100.0, 0.0);
        let exp = IdleExperiment {
            idle: IdleSpec {
                delay_us: 20.0,
                ..IdleSpec::default()
            },
            ..IdleExperiment::default()
        };
        let proto = ProtocolName::Z2B.build().unwrap();
        let c = idle_distill_circuit(&proto, &[0, 1, 2, 3], &calib, &exp).unwrap();
        let res = execute_exact(&c, &DensityOperator::zero_state(4).unwrap(), &calib.execution_config(&[0, 1, 2, 3]).unwrap()).unwrap();
        let t2 = res.snapshot("t2").unwrap();
        assert!(bell_fidelity(t2, (0, 2)).unwrap() < 1.0);
        assert!(bell_fidelity(t2, (0, 2)).unwrap() > 0.5);
    }
}
