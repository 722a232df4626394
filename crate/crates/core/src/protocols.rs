//! Two- and three-pair distillation circuits and the noisy pipeline that
//! prepares, separates and degrades the pairs before checking them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::{bit_flip, depolarizing_global, depolarizing_local, KrausChannel};
use crate::circuit::{
    execute_exact, postselect, AgreementRule, Basis, Circuit, CircuitElement, NoisyExecutionConfig,
    ParityCheck,
};
use crate::densop::{
    bell_fidelity, bell_pairs, partial_trace, DensityOperator, Projector, UnitaryOp,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolName {
    Z2B,
    X2B,
    ZX3B,
    General,
}

impl ProtocolName {
    pub fn n_pairs(self) -> Option<usize> {
        match self {
            ProtocolName::Z2B | ProtocolName::X2B => Some(2),
            ProtocolName::ZX3B => Some(3),
            ProtocolName::General => None,
        }
    }

    pub fn build(self) -> Result<ProtocolSpec> {
        match self {
            ProtocolName::Z2B => Ok(build_z2b()),
            ProtocolName::X2B => Ok(build_x2b()),
            ProtocolName::ZX3B => Ok(build_zx3b()),
            ProtocolName::General => Err(Error::UnsupportedProtocol(
                "`general` has no fixed circuit".into(),
            )),
        }
    }
}

impl fmt::Display for ProtocolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtocolName::Z2B => "z2b",
            ProtocolName::X2B => "x2b",
            ProtocolName::ZX3B => "zx3b",
            ProtocolName::General => "general",
        };
        f.write_str(s)
    }
}

impl FromStr for ProtocolName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z2b" => Ok(ProtocolName::Z2B),
            "x2b" => Ok(ProtocolName::X2B),
            "zx3b" => Ok(ProtocolName::ZX3B),
            "general" => Ok(ProtocolName::General),
            other => Err(Error::UnsupportedProtocol(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Check stage of a protocol acting on `n_pairs` Bell pairs. Pair `k` sits on
/// `pairs[k] = (k, n_pairs + k)`: all A halves first, then all B halves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: ProtocolName,
    pub n_pairs: usize,
    pub pairs: Vec<(usize, usize)>,
    pub circuit: Circuit,
    pub rule: AgreementRule,
    pub kept_pair: (usize, usize),
}

impl ProtocolSpec {
    pub fn n_qubits(&self) -> usize {
        2 * self.n_pairs
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.name.n_pairs() {
            if n != self.n_pairs {
                return Err(invalid(format!("{} needs {n} pairs", self.name)));
            }
        }
        self.circuit.validate()?;
        let measured: Vec<usize> = self
            .circuit
            .elements
            .iter()
            .filter_map(|e| match e {
                CircuitElement::Measure { qubit, .. } => Some(*qubit),
                _ => None,
            })
            .collect();
        let (a, b) = self.kept_pair;
        if measured.contains(&a) || measured.contains(&b) {
            return Err(invalid("kept pair must not be measured"));
        }
        Ok(())
    }
}

fn layout(n_pairs: usize) -> Vec<(usize, usize)> {
    (0..n_pairs).map(|k| (k, n_pairs + k)).collect()
}

/// Z-parity check across pairs (0,2) and (1,3); keeps (0,2) when `i = j`.
pub fn build_z2b() -> ProtocolSpec {
    let elements = vec![
        CircuitElement::cnot(0, 1),
        CircuitElement::cnot(2, 3),
        CircuitElement::measure(1, Basis::Z, "i"),
        CircuitElement::measure(3, Basis::Z, "j"),
    ];
    ProtocolSpec {
        name: ProtocolName::Z2B,
        n_pairs: 2,
        pairs: layout(2),
        circuit: Circuit::new(4, elements).expect("fixed circuit"),
        rule: AgreementRule::Parity(vec![ParityCheck::equal("i", "j")]),
        kept_pair: (0, 2),
    }
}

/// X-parity counterpart of [`build_z2b`] with reversed CNOTs.
pub fn build_x2b() -> ProtocolSpec {
    let elements = vec![
        CircuitElement::cnot(1, 0),
        CircuitElement::cnot(3, 2),
        CircuitElement::measure(1, Basis::X, "i"),
        CircuitElement::measure(3, Basis::X, "j"),
    ];
    ProtocolSpec {
        name: ProtocolName::X2B,
        n_pairs: 2,
        pairs: layout(2),
        circuit: Circuit::new(4, elements).expect("fixed circuit"),
        rule: AgreementRule::Parity(vec![ParityCheck::equal("i", "j")]),
        kept_pair: (0, 2),
    }
}

/// Three pairs (0,3), (1,4), (2,5). Qubits 1/4 read `ZZZ` on each side and
/// qubits 2/5 read `IXX`; keeps (0,3) when both parities agree.
pub fn build_zx3b() -> ProtocolSpec {
    let elements = vec![
        CircuitElement::cnot(0, 1),
        CircuitElement::cnot(2, 1),
        CircuitElement::cnot(3, 4),
        CircuitElement::cnot(5, 4),
        CircuitElement::measure(1, Basis::Z, "i"),
        CircuitElement::measure(2, Basis::X, "k"),
        CircuitElement::measure(4, Basis::Z, "j"),
        CircuitElement::measure(5, Basis::X, "l"),
    ];
    ProtocolSpec {
        name: ProtocolName::ZX3B,
        n_pairs: 3,
        pairs: layout(3),
        circuit: Circuit::new(6, elements).expect("fixed circuit"),
        rule: AgreementRule::Parity(vec![ParityCheck::equal("i", "j"), ParityCheck::equal("k", "l")]),
        kept_pair: (0, 3),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillOutcome {
    pub p_accept: f64,
    pub rho_out: DensityOperator,
    pub f_after: f64,
    pub f_before_max: f64,
    pub ratio: f64,
    /// Percentage decrease in infidelity; `None` when `f_before_max = 1`.
    pub err_decrease: Option<f64>,
}

impl DistillOutcome {
    fn new(p_accept: f64, rho_out: DensityOperator, f_before_max: f64) -> Result<Self> {
        let f_after = bell_fidelity(&rho_out, (0, 1))?;
        Ok(Self {
            p_accept,
            rho_out,
            f_after,
            f_before_max,
            ratio: f_after / f_before_max,
            err_decrease: err_decrease(f_after, f_before_max),
        })
    }
}

/// `100 (F_a - F_b) / (1 - F_b)`.
pub fn err_decrease(f_after: f64, f_before: f64) -> Option<f64> {
    (f_before < 1.0).then(|| 100.0 * (f_after - f_before) / (1.0 - f_before))
}

fn max_pair_fidelity(rho: &DensityOperator, pairs: &[(usize, usize)]) -> Result<f64> {
    pairs
        .iter()
        .map(|&p| bell_fidelity(rho, p))
        .try_fold(f64::NEG_INFINITY, |acc, f| f.map(|f| acc.max(f)))
}

/// Runs the check stage on Bell pairs degraded by `input_noise`.
pub fn run_protocol(
    spec: &ProtocolSpec,
    input_noise: &[KrausChannel],
    cfg: &NoisyExecutionConfig,
) -> Result<DistillOutcome> {
    spec.validate()?;
    let n = spec.n_qubits();
    let mut rho = bell_pairs(n, &spec.pairs)?;
    for ch in input_noise {
        rho = crate::channels::apply_channel(&rho, ch)?;
    }
    let f_b = max_pair_fidelity(&rho, &spec.pairs)?;
    let res = execute_exact(&spec.circuit, &rho, cfg)?;
    let (p, kept) = postselect(&res, &spec.rule)?;
    let (a, b) = spec.kept_pair;
    DistillOutcome::new(p, partial_trace(&kept, &[a, b])?, f_b)
}

/// Post-selected operation `ρ' = Tr_{i≠kept}(T U ρ U† T†) / p_a` with `T`
/// projecting every other pair `(i, n+i)` onto agreeing Z outcomes.
pub fn general_distill(
    rho: &DensityOperator,
    u: &UnitaryOp,
    kept: usize,
) -> Result<(f64, DensityOperator, f64)> {
    let total = rho.n_qubits();
    if total % 2 != 0 {
        return Err(invalid("general distillation needs an even register"));
    }
    let n = total / 2;
    if kept >= n {
        return Err(invalid(format!("kept pair {kept} out of range for {n} pairs")));
    }
    linalg::check_targets(total, u.targets())?;
    let mut m = rho.matrix().clone();
    linalg::conjugate(&mut m, total, u.matrix(), u.targets());
    for i in (0..n).filter(|&i| i != kept) {
        m = Projector::agreement(i, n + i).sandwich(&m, total)?;
    }
    let p_a = m.trace().re;
    if !(p_a >= crate::circuit::MIN_ACCEPT) {
        return Err(Error::NothingAccepted(p_a.max(0.0)));
    }
    let reduced: CMatrix = linalg::partial_trace(&m, total, &[kept, n + kept]).scale_real(1.0 / p_a);
    let out = DensityOperator::from_matrix_unchecked(2, reduced)?;
    let f = bell_fidelity(&out, (0, 1))?;
    Ok((p_a, out, f))
}

/// How SWAPs in the pipeline are realised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapDecomposition {
    /// Three CNOTs, each followed by gate noise.
    #[default]
    ThreeCnots,
    /// One SWAP followed by a single gate-noise channel.
    SingleGate,
}

/// Noise acting on the pairs. Local kinds act on a fixed set of qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Bitflip,
    LocalDepol,
    GlobalDepol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub protocol: ProtocolName,
    pub family: NoiseFamily,
    /// Strength of the extra noise on one half of pair 1 (and pair 3).
    pub asymmetry: f64,
    /// Waiting-noise strength (`q` or `λ`).
    pub waiting: f64,
    pub swap: SwapDecomposition,
}

fn one_qubit_channel(family: NoiseFamily, x: f64, q: usize) -> Result<KrausChannel> {
    match family {
        NoiseFamily::Bitflip => bit_flip(x)?.on(&[q]),
        NoiseFamily::LocalDepol | NoiseFamily::GlobalDepol => depolarizing_local(x)?.on(&[q]),
    }
}

/// Prepares adjacent pairs from `|0…0>`, adds asymmetry noise, reorders the
/// halves with swaps, applies waiting noise and finally the check stage.
/// Barriers `t0`, `t1`, `t2` mark the three stage boundaries.
pub fn build_pipeline(spec: &PipelineSpec) -> Result<(Circuit, ProtocolSpec)> {
    let proto = spec.protocol.build()?;
    let n = proto.n_qubits();
    let mut els = Vec::new();
    for k in 0..proto.n_pairs {
        els.push(CircuitElement::h(2 * k));
        els.push(CircuitElement::cnot(2 * k, 2 * k + 1));
    }
    let (asym_qubits, swaps, wait_qubits): (Vec<usize>, Vec<(usize, usize)>, Vec<usize>) =
        if proto.n_pairs == 2 {
            (vec![0], vec![(1, 2)], vec![1, 2])
        } else {
            (vec![0, 4], vec![(1, 2), (3, 4), (2, 3)], vec![3, 4, 5])
        };
    if spec.asymmetry > 0.0 {
        for &q in &asym_qubits {
            els.push(CircuitElement::channel(one_qubit_channel(spec.family, spec.asymmetry, q)?));
        }
    }
    els.push(CircuitElement::barrier("t0"));
    for &(a, b) in &swaps {
        match spec.swap {
            SwapDecomposition::ThreeCnots => {
                els.push(CircuitElement::cnot(a, b));
                els.push(CircuitElement::cnot(b, a));
                els.push(CircuitElement::cnot(a, b));
            }
            SwapDecomposition::SingleGate => els.push(CircuitElement::swap(a, b)),
        }
    }
    els.push(CircuitElement::barrier("t1"));
    match spec.family {
        NoiseFamily::GlobalDepol => {
            els.push(CircuitElement::channel(depolarizing_global(spec.waiting, n)?));
        }
        family => {
            for &q in &wait_qubits {
                els.push(CircuitElement::channel(one_qubit_channel(family, spec.waiting, q)?));
            }
        }
    }
    els.push(CircuitElement::barrier("t2"));
    els.extend(proto.circuit.elements.iter().cloned());
    Ok((Circuit::new(n, els)?, proto))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    /// Fidelities of the freshly prepared pairs at `t0`.
    pub f_initial: Vec<f64>,
    pub outcome: DistillOutcome,
}

pub fn run_pipeline(spec: &PipelineSpec, cfg: &NoisyExecutionConfig) -> Result<PipelineOutcome> {
    let (circuit, proto) = build_pipeline(spec)?;
    let n = circuit.n_qubits;
    let res = execute_exact(&circuit, &DensityOperator::zero_state(n)?, cfg)?;
    let t0 = res.snapshot("t0").expect("pipeline barrier");
    let f_initial = (0..proto.n_pairs)
        .map(|k| bell_fidelity(t0, (2 * k, 2 * k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let t2 = res.snapshot("t2").expect("pipeline barrier");
    let f_b = max_pair_fidelity(t2, &proto.pairs)?;
    let (p, kept) = postselect(&res, &proto.rule)?;
    let (a, b) = proto.kept_pair;
    Ok(PipelineOutcome {
        f_initial,
        outcome: DistillOutcome::new(p, partial_trace(&kept, &[a, b])?, f_b)?,
    })
}
