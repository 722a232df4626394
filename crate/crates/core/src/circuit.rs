//! Gate sequences with interleaved channels, exact branching execution and
//! post-selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::{self, damping_dephasing, gp_from_t1t2, KrausChannel, PauliChannelParams};
use crate::densop::{DensityOperator, UnitaryOp};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};

/// Acceptance below this is reported as nothing accepted.
pub const MIN_ACCEPT: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Gate {
    H,
    S,
    Sdg,
    X,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "SWAP")]
    Swap,
    /// `diag(1, 1, 1, e^{iθ})`, θ in radians.
    CPhase { theta: f64 },
}

impl Gate {
    pub fn arity(&self) -> usize {
        match self {
            Gate::H | Gate::S | Gate::Sdg | Gate::X => 1,
            Gate::Cnot | Gate::Swap | Gate::CPhase { .. } => 2,
        }
    }

    /// Unitary on `targets`; for CNOT the control comes first.
    pub fn unitary(&self, targets: &[usize]) -> UnitaryOp {
        match *self {
            Gate::H => UnitaryOp::hadamard(targets[0]),
            Gate::S => UnitaryOp::s(targets[0]),
            Gate::Sdg => UnitaryOp::sdg(targets[0]),
            Gate::X => UnitaryOp::pauli('X', targets[0]),
            Gate::Cnot => UnitaryOp::cnot(targets[0], targets[1]),
            Gate::Swap => UnitaryOp::swap(targets[0], targets[1]),
            Gate::CPhase { theta } => UnitaryOp::cphase(theta, targets[0], targets[1]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CircuitElement {
    Gate {
        #[serde(flatten)]
        gate: Gate,
        targets: Vec<usize>,
    },
    Channel {
        #[serde(flatten)]
        channel: KrausChannel,
    },
    /// Idle period; decoheres the listed qubits when T1/T2 are configured.
    Delay { duration_us: f64, qubits: Vec<usize> },
    Measure {
        qubit: usize,
        basis: Basis,
        label: String,
    },
    Barrier { label: String },
}

impl CircuitElement {
    pub fn gate(gate: Gate, targets: &[usize]) -> Self {
        CircuitElement::Gate {
            gate,
            targets: targets.to_vec(),
        }
    }

    pub fn h(q: usize) -> Self {
        Self::gate(Gate::H, &[q])
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::gate(Gate::Cnot, &[control, target])
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Self::gate(Gate::Swap, &[a, b])
    }

    pub fn channel(channel: KrausChannel) -> Self {
        CircuitElement::Channel { channel }
    }

    pub fn measure(qubit: usize, basis: Basis, label: &str) -> Self {
        CircuitElement::Measure {
            qubit,
            basis,
            label: label.to_string(),
        }
    }

    pub fn barrier(label: &str) -> Self {
        CircuitElement::Barrier {
            label: label.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub elements: Vec<CircuitElement>,
}

impl Circuit {
    pub fn new(n_qubits: usize, elements: Vec<CircuitElement>) -> Result<Self> {
        let c = Self { n_qubits, elements };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        let mut labels = Vec::new();
        for (idx, el) in self.elements.iter().enumerate() {
            let ctx = |e: Error| invalid(format!("element {idx}: {e}"));
            match el {
                CircuitElement::Gate { gate, targets } => {
                    if targets.len() != gate.arity() {
                        return Err(ctx(invalid(format!(
                            "{gate:?} needs {} target(s), got {}",
                            gate.arity(),
                            targets.len()
                        ))));
                    }
                    if let Gate::CPhase { theta } = gate {
                        if !theta.is_finite() {
                            return Err(ctx(invalid("CPhase angle must be finite")));
                        }
                    }
                    linalg::check_targets(n, targets).map_err(ctx)?;
                }
                CircuitElement::Channel { channel } => {
                    linalg::check_targets(n, &channel.targets).map_err(ctx)?;
                }
                CircuitElement::Delay { duration_us, qubits } => {
                    if !(*duration_us >= 0.0) || !duration_us.is_finite() {
                        return Err(ctx(invalid("delay duration must be finite and >= 0")));
                    }
                    linalg::check_targets(n, qubits).map_err(ctx)?;
                }
                CircuitElement::Measure { qubit, label, .. } => {
                    linalg::check_targets(n, &[*qubit]).map_err(ctx)?;
                    if labels.contains(label) {
                        return Err(ctx(invalid(format!("measurement label `{label}` repeated"))));
                    }
                    labels.push(label.clone());
                }
                CircuitElement::Barrier { .. } => {}
            }
        }
        Ok(())
    }

    /// Measured labels in circuit order.
    pub fn measured_labels(&self) -> Vec<String> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                CircuitElement::Measure { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect()
    }

    /// Parses either `{"n_qubits": .., "elements": [..]}` or a bare element
    /// list, whose register size is then inferred from the highest index.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Form {
            Full(Circuit),
            Bare(Vec<CircuitElement>),
        }
        let form: Form = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let c = match form {
            Form::Full(c) => c,
            Form::Bare(elements) => {
                let max = elements
                    .iter()
                    .flat_map(|e| match e {
                        CircuitElement::Gate { targets, .. } => targets.clone(),
                        CircuitElement::Channel { channel } => channel.targets.clone(),
                        CircuitElement::Delay { qubits, .. } => qubits.clone(),
                        CircuitElement::Measure { qubit, .. } => vec![*qubit],
                        CircuitElement::Barrier { .. } => vec![],
                    })
                    .max()
                    .ok_or_else(|| invalid("circuit touches no qubits"))?;
                Circuit {
                    n_qubits: max + 1,
                    elements,
                }
            }
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub t1_us: f64,
    pub t2_us: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeError {
    pub a: usize,
    pub b: usize,
    pub error: f64,
}

/// Noise applied by the executor on top of the explicit circuit channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisyExecutionConfig {
    /// λ of the two-qubit global depolarizing channel after each 2-qubit gate.
    pub gate_error: f64,
    /// Bit-flip probability before each measurement.
    pub meas_error: f64,
    pub gate_noise: bool,
    pub meas_noise: bool,
    /// Per-edge overrides of `gate_error` (unordered pairs).
    pub edge_gate_error: Vec<EdgeError>,
    /// Per-qubit overrides of `meas_error`.
    pub qubit_meas_error: BTreeMap<usize, f64>,
    /// Enables T1/T2 decay during `Delay` elements on the listed qubits.
    pub coherence: BTreeMap<usize, Coherence>,
    /// Whether CPhase gates receive gate noise (it models idle evolution).
    pub cphase_noise: bool,
}

impl Default for NoisyExecutionConfig {
    fn default() -> Self {
        Self {
            gate_error: 0.0,
            meas_error: 0.0,
            gate_noise: true,
            meas_noise: true,
            edge_gate_error: Vec::new(),
            qubit_meas_error: BTreeMap::new(),
            coherence: BTreeMap::new(),
            cphase_noise: false,
        }
    }
}

impl NoisyExecutionConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn uniform(gate_error: f64, meas_error: f64) -> Result<Self> {
        let cfg = Self {
            gate_error,
            meas_error,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {x} outside [0, 1]")))
            }
        };
        prob("gate_error", self.gate_error)?;
        prob("meas_error", self.meas_error)?;
        for e in &self.edge_gate_error {
            prob("edge gate error", e.error)?;
        }
        for &m in self.qubit_meas_error.values() {
            prob("qubit meas error", m)?;
        }
        Ok(())
    }

    fn gate_lambda(&self, a: usize, b: usize) -> f64 {
        if !self.gate_noise {
            return 0.0;
        }
        self.edge_gate_error
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map_or(self.gate_error, |e| e.error)
    }

    fn meas_flip(&self, q: usize) -> f64 {
        if !self.meas_noise {
            return 0.0;
        }
        self.qubit_meas_error.get(&q).copied().unwrap_or(self.meas_error)
    }
}

/// One leaf of the outcome tree. `matrix` is unnormalized; its trace is the
/// branch probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub outcomes: Vec<u8>,
    pub matrix: CMatrix,
}

impl Branch {
    pub fn probability(&self) -> f64 {
        self.matrix.trace().re
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub labels: Vec<String>,
    /// Joint outcome (ordered like `labels`) and its probability.
    pub joint: Vec<(Vec<u8>, f64)>,
}

impl MeasurementRecord {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `[P(0), P(1)]` for one label.
    pub fn marginal(&self, label: &str) -> Result<[f64; 2]> {
        let idx = self
            .label_index(label)
            .ok_or_else(|| invalid(format!("unknown measurement label `{label}`")))?;
        let mut out = [0.0; 2];
        for (o, p) in &self.joint {
            out[o[idx] as usize] += p;
        }
        Ok(out)
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().map(|(_, p)| p).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub state: DensityOperator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionResult {
    pub n_qubits: usize,
    pub branches: Vec<Branch>,
    pub record: MeasurementRecord,
    /// Unconditional state at each barrier, in circuit order.
    pub snapshots: Vec<Snapshot>,
}

impl ExecutionResult {
    pub fn snapshot(&self, label: &str) -> Option<&DensityOperator> {
        self.snapshots.iter().find(|s| s.label == label).map(|s| &s.state)
    }

    /// State conditioned on branch `idx`; `None` for zero-probability branches.
    pub fn conditional_state(&self, idx: usize) -> Option<DensityOperator> {
        let b = &self.branches[idx];
        let p = b.probability();
        if p <= 0.0 {
            return None;
        }
        DensityOperator::from_matrix_unchecked(self.n_qubits, b.matrix.scale_real(1.0 / p)).ok()
    }

    pub fn unconditional(&self) -> DensityOperator {
        let m = sum_branches(&self.branches, self.n_qubits);
        DensityOperator::from_matrix_unchecked(self.n_qubits, m).expect("register shape")
    }
}

fn sum_branches(branches: &[Branch], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(1 << n);
    for b in branches {
        m.add_assign_scaled(&b.matrix, 1.0);
    }
    m
}

/// Runs the circuit keeping the full outcome tree. Ideal gates are followed
/// by gate noise on 2-qubit gates; measurement noise precedes each readout.
pub fn execute_exact(
    circuit: &Circuit,
    init: &DensityOperator,
    cfg: &NoisyExecutionConfig,
) -> Result<ExecutionResult> {
    circuit.validate()?;
    cfg.validate()?;
    let n = circuit.n_qubits;
    if init.n_qubits() != n {
        return Err(invalid(format!(
            "initial state has {} qubits, circuit needs {n}",
            init.n_qubits()
        )));
    }
    let mut branches = vec![Branch {
        outcomes: Vec::new(),
        matrix: init.matrix().clone(),
    }];
    let mut snapshots = Vec::new();
    let for_each = |branches: &mut Vec<Branch>, f: &dyn Fn(&CMatrix) -> CMatrix| {
        for b in branches.iter_mut() {
            b.matrix = f(&b.matrix);
        }
    };
    for el in &circuit.elements {
        match el {
            CircuitElement::Gate { gate, targets } => {
                let u = gate.unitary(targets);
                for b in branches.iter_mut() {
                    linalg::conjugate(&mut b.matrix, n, u.matrix(), targets);
                }
                let noisy = gate.arity() == 2 && (cfg.cphase_noise || !matches!(gate, Gate::CPhase { .. }));
                if noisy {
                    let lambda = cfg.gate_lambda(targets[0], targets[1]);
                    if lambda > 0.0 {
                        for_each(&mut branches, &|m| linalg::depolarize_subset(m, n, targets, lambda));
                    }
                }
            }
            CircuitElement::Channel { channel } => {
                for b in branches.iter_mut() {
                    b.matrix = channel.apply_matrix(&b.matrix, n)?;
                }
            }
            CircuitElement::Delay { duration_us, qubits } => {
                if *duration_us == 0.0 {
                    continue;
                }
                for &q in qubits {
                    if let Some(c) = cfg.coherence.get(&q) {
                        let ch = damping_dephasing(gp_from_t1t2(*duration_us, c.t1_us, c.t2_us)?)?.on(&[q])?;
                        for b in branches.iter_mut() {
                            b.matrix = ch.apply_matrix(&b.matrix, n)?;
                        }
                    }
                }
            }
            CircuitElement::Measure { qubit, basis, .. } => {
                let q = *qubit;
                let rotation: Vec<UnitaryOp> = match basis {
                    Basis::Z => vec![],
                    Basis::X => vec![UnitaryOp::hadamard(q)],
                    Basis::Y => vec![UnitaryOp::sdg(q), UnitaryOp::hadamard(q)],
                };
                for b in branches.iter_mut() {
                    for u in &rotation {
                        linalg::conjugate(&mut b.matrix, n, u.matrix(), &[q]);
                    }
                }
                let flip = cfg.meas_flip(q);
                if flip > 0.0 {
                    let ch = channels::pauli_channel(PauliChannelParams::bit_flip(flip)?)?.on(&[q])?;
                    for b in branches.iter_mut() {
                        b.matrix = ch.apply_matrix(&b.matrix, n)?;
                    }
                }
                let mut next = Vec::with_capacity(branches.len() * 2);
                for b in branches {
                    for outcome in 0..2u8 {
                        let mut m = b.matrix.clone();
                        linalg::project_z(&mut m, n, q, outcome);
                        for u in rotation.iter().rev() {
                            let ud = u.adjoint();
                            linalg::conjugate(&mut m, n, ud.matrix(), &[q]);
                        }
                        let mut outcomes = b.outcomes.clone();
                        outcomes.push(outcome);
                        next.push(Branch { outcomes, matrix: m });
                    }
                }
                branches = next;
            }
            CircuitElement::Barrier { label } => {
                let m = sum_branches(&branches, n);
                snapshots.push(Snapshot {
                    label: label.clone(),
                    state: DensityOperator::from_matrix_unchecked(n, m)?,
                });
            }
        }
    }
    let record = MeasurementRecord {
        labels: circuit.measured_labels(),
        joint: branches.iter().map(|b| (b.outcomes.clone(), b.probability())).collect(),
    };
    Ok(ExecutionResult {
        n_qubits: n,
        branches,
        record,
        snapshots,
    })
}

/// Classical parity check: the XOR of `left` outcomes equals that of `right`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityCheck {
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl ParityCheck {
    pub fn equal(a: &str, b: &str) -> Self {
        Self {
            left: vec![a.to_string()],
            right: vec![b.to_string()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementRule {
    AcceptAll,
    /// Accept when every check holds.
    Parity(Vec<ParityCheck>),
}

impl AgreementRule {
    pub fn labels(&self) -> Vec<&str> {
        match self {
            AgreementRule::AcceptAll => vec![],
            AgreementRule::Parity(checks) => checks
                .iter()
                .flat_map(|c| c.left.iter().chain(&c.right))
                .map(String::as_str)
                .collect(),
        }
    }

    /// Evaluates the rule on per-label bits given by `bit(label)`.
    pub fn accepts_with(&self, bit: impl Fn(&str) -> u8) -> bool {
        match self {
            AgreementRule::AcceptAll => true,
            AgreementRule::Parity(checks) => checks.iter().all(|c| {
                let l = c.left.iter().fold(0, |acc, s| acc ^ bit(s));
                let r = c.right.iter().fold(0, |acc, s| acc ^ bit(s));
                l == r
            }),
        }
    }
}

/// Probability of acceptance and the renormalized accepted mixture.
pub fn postselect(result: &ExecutionResult, rule: &AgreementRule) -> Result<(f64, DensityOperator)> {
    let labels = &result.record.labels;
    let mut index = BTreeMap::new();
    for l in rule.labels() {
        let i = labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| invalid(format!("rule references unmeasured label `{l}`")))?;
        index.insert(l.to_string(), i);
    }
    let n = result.n_qubits;
    let mut acc = CMatrix::zeros(1 << n);
    for b in &result.branches {
        if rule.accepts_with(|l| b.outcomes[index[l]]) {
            acc.add_assign_scaled(&b.matrix, 1.0);
        }
    }
    let p = acc.trace().re;
    if !(p >= MIN_ACCEPT) {
        return Err(Error::NothingAccepted(p.max(0.0)));
    }
    Ok((p, DensityOperator::from_matrix_unchecked(n, acc.scale_real(1.0 / p))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{bit_flip, depolarizing_local};
    use crate::densop::bell_fidelity;

    fn bell_prep() -> Vec<CircuitElement> {
        vec![CircuitElement::h(0), CircuitElement::cnot(0, 1)]
    }

    #[test]
    fn bell_measurement_noiseless() {
        let mut els = bell_prep();
        els.push(CircuitElement::measure(0, Basis::Z, "a"));
        els.push(CircuitElement::measure(1, Basis::Z, "b"));
        let c = Circuit::new(2, els).unwrap();
        let res = execute_exact(&c, &DensityOperator::zero_state(2).unwrap(), &NoisyExecutionConfig::noiseless()).unwrap();
        let probs: Vec<f64> = res.record.joint.iter().map(|(_, p)| *p).collect();
        assert!((probs[0] - 0.5).abs() < 1e-14 && probs[1].abs() < 1e-14);
        assert!(probs[2].abs() < 1e-14 && (probs[3] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bell_measurement_with_readout_error() {
        let mut els = bell_prep();
        els.push(CircuitElement::measure(0, Basis::Z, "a"));
        els.push(CircuitElement::measure(1, Basis::Z, "b"));
        let c = Circuit::new(2, els).unwrap();
        let cfg = NoisyExecutionConfig::uniform(0.0, 0.1).unwrap();
        let res = execute_exact(&c, &DensityOperator::zero_state(2).unwrap(), &cfg).unwrap();
        let agree: f64 = res
            .record
            .joint
            .iter()
            .filter(|(o, _)| o[0] == o[1])
            .map(|(_, p)| p)
            .sum();
        // brute force over the four flip patterns
        let mut expect = 0.0;
        for fa in 0..2 {
            for fb in 0..2 {
                let w = if fa == 1 { 0.1 } else { 0.9 } * if fb == 1 { 0.1 } else { 0.9 };
                if fa == fb {
                    expect += w;
                }
            }
        }
        assert!((agree - expect).abs() < 1e-14);
        assert!((agree - 0.82).abs() < 1e-14);
        assert!((res.record.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_cnot_on_zero_state() {
        let c = Circuit::new(2, vec![CircuitElement::cnot(0, 1)]).unwrap();
        let cfg = NoisyExecutionConfig::uniform(0.2, 0.0).unwrap();
        let res = execute_exact(&c, &DensityOperator::zero_state(2).unwrap(), &cfg).unwrap();
        let out = res.unconditional();
        assert!((out.matrix().get(0, 0).re - (0.8 + 0.2 / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn x_and_y_basis_measurements() {
        // |+> in X gives 0; S|+> = |+i> in Y gives 0.
        let c = Circuit::new(
            2,
            vec![
                CircuitElement::h(0),
                CircuitElement::h(1),
                CircuitElement::gate(Gate::S, &[1]),
                CircuitElement::measure(0, Basis::X, "x"),
                CircuitElement::measure(1, Basis::Y, "y"),
            ],
        )
        .unwrap();
        let res = execute_exact(&c, &DensityOperator::zero_state(2).unwrap(), &NoisyExecutionConfig::noiseless()).unwrap();
        assert!((res.record.marginal("x").unwrap()[0] - 1.0).abs() < 1e-14);
        assert!((res.record.marginal("y").unwrap()[0] - 1.0).abs() < 1e-14);
        // post-measurement state is rotated back into the measured eigenstate
        let st = res.conditional_state(0).unwrap();
        let plus = DensityOperator::pure(&[
            num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let red = crate::densop::partial_trace(&st, &[0]).unwrap();
        assert!(red.max_abs_diff(&plus) < 1e-14);
    }

    #[test]
    fn probabilities_sum_to_one_under_noise() {
        let els = vec![
            CircuitElement::h(0),
            CircuitElement::cnot(0, 1),
            CircuitElement::cnot(1, 2),
            CircuitElement::channel(depolarizing_local(0.3).unwrap().on(&[2]).unwrap()),
            CircuitElement::measure(0, Basis::X, "a"),
            CircuitElement::measure(1, Basis::Y, "b"),
            CircuitElement::measure(2, Basis::Z, "c"),
        ];
        let c = Circuit::new(3, els).unwrap();
        let cfg = NoisyExecutionConfig::uniform(0.07, 0.2).unwrap();
        let res = execute_exact(&c, &DensityOperator::zero_state(3).unwrap(), &cfg).unwrap();
        assert_eq!(res.record.joint.len(), 8);
        assert!((res.record.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn barriers_and_zero_delays_are_inert() {
        let base = vec![
            CircuitElement::h(0),
            CircuitElement::cnot(0, 1),
            CircuitElement::measure(1, Basis::Z, "m"),
        ];
        let mut padded = Vec::new();
        for el in &base {
            padded.push(CircuitElement::barrier("b"));
            padded.push(CircuitElement::Delay {
                duration_us: 0.0,
                qubits: vec![0, 1],
            });
            padded.push(el.clone());
        }
        let mut cfg = NoisyExecutionConfig::uniform(0.1, 0.1).unwrap();
        cfg.coherence.insert(0, Coherence { t1_us: 10.0, t2_us: 5.0 });
        let init = DensityOperator::zero_state(2).unwrap();
        let a = execute_exact(&Circuit::new(2, base).unwrap(), &init, &cfg).unwrap();
        let b = execute_exact(&Circuit::new(2, padded).unwrap(), &init, &cfg).unwrap();
        assert_eq!(a.branches, b.branches);
        assert_eq!(b.snapshots.len(), 3);
    }

    #[test]
    fn delay_applies_configured_decay() {
        let c = Circuit::new(
            1,
            vec![
                CircuitElement::gate(Gate::X, &[0]),
                CircuitElement::Delay {
                    duration_us: 50.0,
                    qubits: vec![0],
                },
            ],
        )
        .unwrap();
        let mut cfg = NoisyExecutionConfig::noiseless();
        let init = DensityOperator::zero_state(1).unwrap();
        let out = execute_exact(&c, &init, &cfg).unwrap().unconditional();
        assert!((out.matrix().get(1, 1).re - 1.0).abs() < 1e-15);
        cfg.coherence.insert(0, Coherence { t1_us: 100.0, t2_us: 100.0 });
        let out = execute_exact(&c, &init, &cfg).unwrap().unconditional();
        assert!((out.matrix().get(1, 1).re - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn postselect_examples() {
        // Z parity check of two Bell pairs (0,2),(1,3) with an X error on qubit 2.
        let mut els = vec![
            CircuitElement::h(0),
            CircuitElement::cnot(0, 2),
            CircuitElement::h(1),
            CircuitElement::cnot(1, 3),
        ];
        let checks = vec![
            CircuitElement::cnot(0, 1),
            CircuitElement::cnot(2, 3),
            CircuitElement::measure(1, Basis::Z, "i"),
            CircuitElement::measure(3, Basis::Z, "j"),
        ];
        let rule = AgreementRule::Parity(vec![ParityCheck::equal("i", "j")]);
        let init = DensityOperator::zero_state(4).unwrap();
        let clean = Circuit::new(4, [els.clone(), checks.clone()].concat()).unwrap();
        let res = execute_exact(&clean, &init, &NoisyExecutionConfig::noiseless()).unwrap();
        let (p, kept) = postselect(&res, &rule).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
        let kept = crate::densop::partial_trace(&kept, &[0, 2]).unwrap();
        assert!((bell_fidelity(&kept, (0, 1)).unwrap() - 1.0).abs() < 1e-14);

        let (p_all, all) = postselect(&res, &AgreementRule::AcceptAll).unwrap();
        assert!((p_all - 1.0).abs() < 1e-14);
        assert!(all.max_abs_diff(&res.unconditional()) < 1e-15);

        els.push(CircuitElement::gate(Gate::X, &[2]));
        let bad = Circuit::new(4, [els, checks].concat()).unwrap();
        let res = execute_exact(&bad, &init, &NoisyExecutionConfig::noiseless()).unwrap();
        assert!(matches!(postselect(&res, &rule), Err(Error::NothingAccepted(_))));
        let unknown = AgreementRule::Parity(vec![ParityCheck::equal("i", "zz")]);
        assert!(postselect(&res, &unknown).is_err());
    }

    #[test]
    fn malformed_circuits_rejected() {
        assert!(Circuit::new(2, vec![CircuitElement::cnot(0, 0)]).is_err());
        assert!(Circuit::new(2, vec![CircuitElement::h(2)]).is_err());
        assert!(Circuit::new(2, vec![CircuitElement::gate(Gate::Cnot, &[0])]).is_err());
        assert!(Circuit::new(
            2,
            vec![
                CircuitElement::measure(0, Basis::Z, "a"),
                CircuitElement::measure(1, Basis::Z, "a")
            ]
        )
        .is_err());
        let c = Circuit::new(2, bell_prep()).unwrap();
        assert!(execute_exact(&c, &DensityOperator::zero_state(3).unwrap(), &NoisyExecutionConfig::noiseless()).is_err());
    }

    #[test]
    fn json_round_trip_and_bare_list() {
        let c = Circuit::new(
            3,
            vec![
                CircuitElement::h(0),
                CircuitElement::gate(Gate::CPhase { theta: 0.25 }, &[0, 1]),
                CircuitElement::channel(bit_flip(0.1).unwrap().on(&[2]).unwrap()),
                CircuitElement::Delay {
                    duration_us: 1.5,
                    qubits: vec![1],
                },
                CircuitElement::measure(2, Basis::X, "m"),
                CircuitElement::barrier("t0"),
            ],
        )
        .unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(Circuit::from_json(&s).unwrap(), c);
        let bare = r#"[{"type":"gate","name":"H","targets":[0]},
                       {"type":"gate","name":"CNOT","targets":[0,1]},
                       {"type":"measure","qubit":1,"basis":"Z","label":"m"}]"#;
        let c = Circuit::from_json(bare).unwrap();
        assert_eq!(c.n_qubits, 2);
        assert_eq!(c.elements[1], CircuitElement::cnot(0, 1));
        assert!(Circuit::from_json(r#"[{"type":"gate","name":"T","targets":[0]}]"#).is_err());
    }
}
