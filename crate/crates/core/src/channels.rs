//! Quantum channels as Kraus operator lists bound to target qubits.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::densop::DensityOperator;
use crate::error::{invalid, Result};
use crate::linalg::{self, pauli, pauli_string_matrix, CMatrix, ONE};

pub const COMPLETENESS_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-12;

fn check_prob(name: &str, x: f64, max: f64) -> Result<()> {
    if !(0.0..=max).contains(&x) || x.is_nan() {
        return Err(invalid(format!("{name} = {x} outside [0, {max}]")));
    }
    Ok(())
}

/// Probabilities of I, X, Y, Z in a single-qubit Pauli channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliChannelParams {
    pub p_i: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PauliChannelParams {
    pub fn new(p_i: f64, p_x: f64, p_y: f64, p_z: f64) -> Result<Self> {
        let params = Self { p_i, p_x, p_y, p_z };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_I", self.p_i), ("p_x", self.p_x), ("p_y", self.p_y), ("p_z", self.p_z)] {
            if v < 0.0 || v.is_nan() {
                return Err(invalid(format!("Pauli probability {name} = {v} is negative")));
            }
        }
        let total = self.p_i + self.p_x + self.p_y + self.p_z;
        if (total - 1.0).abs() > PROB_TOL {
            return Err(invalid(format!("Pauli probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    /// `(1-p, p/3, p/3, p/3)`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        Self::new(1.0 - p, p / 3.0, p / 3.0, p / 3.0)
    }

    pub fn bit_flip(q: f64) -> Result<Self> {
        Self::new(1.0 - q, q, 0.0, 0.0)
    }

    pub fn phase_flip(q: f64) -> Result<Self> {
        Self::new(1.0 - q, 0.0, 0.0, q)
    }

    /// Probability indexed by Pauli letter index (0=I, 1=X, 2=Y, 3=Z).
    pub fn by_index(&self, idx: usize) -> f64 {
        [self.p_i, self.p_x, self.p_y, self.p_z][idx]
    }
}

/// Damping probability `g` and dephasing probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingDephasingParams {
    pub g: f64,
    pub p: f64,
}

impl DampingDephasingParams {
    pub fn new(g: f64, p: f64) -> Result<Self> {
        check_prob("damping g", g, 1.0)?;
        check_prob("dephasing p", p, 0.5)?;
        Ok(Self { g, p })
    }
}

/// `g = 1 - e^{-t/T1}`, `p = (1 - e^{-t(1/T2 - 1/(2 T1))}) / 2`. Times in µs;
/// infinite `T1`/`T2` are allowed and mean no decay of that kind.
pub fn gp_from_t1t2(t: f64, t1: f64, t2: f64) -> Result<DampingDephasingParams> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("idle duration t = {t} must be finite and >= 0")));
    }
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(invalid(format!("T1 = {t1} and T2 = {t2} must be positive")));
    }
    if t2 > 2.0 * t1 {
        return Err(invalid(format!("T2 = {t2} exceeds 2*T1 = {}", 2.0 * t1)));
    }
    let g = -(-t / t1).exp_m1();
    let rate = (1.0 / t2 - 1.0 / (2.0 * t1)).max(0.0);
    let p = -0.5 * (-t * rate).exp_m1();
    DampingDephasingParams::new(g, p)
}

/// What a channel is; the Kraus list is derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    BitFlip { q: f64 },
    Depolarizing { p: f64 },
    /// n-qubit depolarizing over all targets.
    GlobalDepolarizing { lambda: f64 },
    DampingDephasing { g: f64, p: f64 },
    Pauli(PauliChannelParams),
    Kraus { ops: Vec<CMatrix> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausChannel {
    pub targets: Vec<usize>,
    #[serde(flatten)]
    pub kind: ChannelKind,
}

impl KrausChannel {
    /// Validates parameters and, for explicit Kraus lists, completeness.
    pub fn new(kind: ChannelKind, targets: Vec<usize>) -> Result<Self> {
        let arity = match &kind {
            ChannelKind::GlobalDepolarizing { .. } => None,
            ChannelKind::Kraus { ops } => {
                let d = ops.first().map(CMatrix::dim).ok_or_else(|| invalid("empty Kraus list"))?;
                if !d.is_power_of_two() || ops.iter().any(|k| k.dim() != d) {
                    return Err(invalid("Kraus operators must share a power-of-two dimension"));
                }
                Some(d.trailing_zeros() as usize)
            }
            _ => Some(1),
        };
        match arity {
            Some(k) if targets.len() != k => {
                return Err(invalid(format!(
                    "channel acts on {k} qubit(s) but {} targets were given",
                    targets.len()
                )))
            }
            None if targets.is_empty() => return Err(invalid("channel needs at least one target")),
            _ => {}
        }
        linalg::check_targets(usize::MAX >> 1, &targets)?;
        match &kind {
            ChannelKind::BitFlip { q } => check_prob("bit-flip q", *q, 0.5)?,
            ChannelKind::Depolarizing { p } => check_prob("depolarizing p", *p, 1.0)?,
            ChannelKind::GlobalDepolarizing { lambda } => check_prob("lambda", *lambda, 1.0)?,
            ChannelKind::DampingDephasing { g, p } => {
                DampingDephasingParams::new(*g, *p)?;
            }
            ChannelKind::Pauli(params) => params.validate()?,
            ChannelKind::Kraus { .. } => {}
        }
        let ch = Self { targets, kind };
        let err = ch.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(invalid(format!("Kraus operators not complete (error {err:e})")));
        }
        Ok(ch)
    }

    /// Same channel, rebound to other qubits.
    pub fn on(&self, targets: &[usize]) -> Result<Self> {
        Self::new(self.kind.clone(), targets.to_vec())
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }

    pub fn kraus_ops(&self) -> Vec<CMatrix> {
        let sqrt = |x: f64| C64::new(x.max(0.0).sqrt(), 0.0);
        match &self.kind {
            ChannelKind::BitFlip { q } => vec![
                pauli('I').scale(sqrt(1.0 - q)),
                pauli('X').scale(sqrt(*q)),
            ],
            ChannelKind::Depolarizing { p } => {
                let params = PauliChannelParams {
                    p_i: 1.0 - p,
                    p_x: p / 3.0,
                    p_y: p / 3.0,
                    p_z: p / 3.0,
                };
                pauli_kraus(&params)
            }
            ChannelKind::Pauli(params) => pauli_kraus(params),
            ChannelKind::GlobalDepolarizing { lambda } => {
                let k = self.targets.len();
                let count = 1usize << (2 * k);
                let w = lambda / count as f64;
                (0..count)
                    .map(|idx| {
                        let letters: String = (0..k)
                            .map(|q| ['I', 'X', 'Y', 'Z'][(idx >> (2 * (k - 1 - q))) & 3])
                            .collect();
                        let weight = if idx == 0 { 1.0 - lambda + w } else { w };
                        pauli_string_matrix(&letters).scale(sqrt(weight))
                    })
                    .collect()
            }
            ChannelKind::DampingDephasing { g, p } => {
                let s = (1.0 - g).sqrt();
                let o0 = CMatrix::diag(&[ONE, C64::new(s, 0.0)]).scale(sqrt(1.0 - p));
                let mut o1 = CMatrix::zeros(2);
                o1.set(0, 1, sqrt(*g));
                let o2 = CMatrix::diag(&[ONE, C64::new(-s, 0.0)]).scale(sqrt(*p));
                vec![o0, o1, o2]
            }
            ChannelKind::Kraus { ops } => ops.clone(),
        }
    }

    /// `max |Σ K†K - I|`.
    pub fn completeness_error(&self) -> f64 {
        let ops = self.kraus_ops();
        let d = ops[0].dim();
        let mut sum = CMatrix::zeros(d);
        for k in &ops {
            sum.add_assign_scaled(&k.adjoint().matmul(k), 1.0);
        }
        sum.max_abs_diff(&CMatrix::identity(d))
    }

    /// Applies the channel to an arbitrary (possibly unnormalized) register matrix.
    pub fn apply_matrix(&self, m: &CMatrix, n: usize) -> Result<CMatrix> {
        linalg::check_targets(n, &self.targets)?;
        Ok(match &self.kind {
            ChannelKind::GlobalDepolarizing { lambda } => {
                linalg::depolarize_subset(m, n, &self.targets, *lambda)
            }
            ChannelKind::Depolarizing { p } => {
                linalg::depolarize_subset(m, n, &self.targets, 4.0 * p / 3.0)
            }
            _ => linalg::kraus_sum(m, n, &self.kraus_ops(), &self.targets),
        })
    }

    /// Applies the literal Kraus sum, bypassing the closed-form shortcuts.
    pub fn apply_matrix_kraus(&self, m: &CMatrix, n: usize) -> Result<CMatrix> {
        linalg::check_targets(n, &self.targets)?;
        Ok(linalg::kraus_sum(m, n, &self.kraus_ops(), &self.targets))
    }

    /// Matrix `S` with `vec(E(X)) = S vec(X)` on the channel's own qubits
    /// (row-major vectorisation).
    pub fn process_matrix(&self) -> CMatrix {
        let k = self.targets.len();
        let local: Vec<usize> = (0..k).collect();
        let local_ch = Self {
            targets: local,
            kind: self.kind.clone(),
        };
        process_matrix_of(k, |m| local_ch.apply_matrix(m, k).expect("local targets"))
    }
}

/// Process matrix of any linear map on k qubits.
pub fn process_matrix_of(k: usize, map: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let d = 1 << k;
    let mut s = CMatrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut e = CMatrix::zeros(d);
            e.set(i, j, ONE);
            let out = map(&e);
            for r in 0..d {
                for c in 0..d {
                    s.set(r * d + c, i * d + j, out.get(r, c));
                }
            }
        }
    }
    s
}

fn pauli_kraus(params: &PauliChannelParams) -> Vec<CMatrix> {
    ['I', 'X', 'Y', 'Z']
        .iter()
        .enumerate()
        .map(|(i, &l)| pauli(l).scale(C64::new(params.by_index(i).max(0.0).sqrt(), 0.0)))
        .collect()
}

/// `D_q(ρ) = (1-q) ρ + q XρX`, `0 ≤ q ≤ 1/2`.
pub fn bit_flip(q: f64) -> Result<KrausChannel> {
    KrausChannel::new(ChannelKind::BitFlip { q }, vec![0])
}

/// `Λ_p(ρ) = (1-p) ρ + p/3 (XρX + YρY + ZρZ)`.
pub fn depolarizing_local(p: f64) -> Result<KrausChannel> {
    KrausChannel::new(ChannelKind::Depolarizing { p }, vec![0])
}

/// `N_λ(ρ) = (1-λ) ρ + λ Tr(ρ) I/2^n` on qubits `0..n`.
pub fn depolarizing_global(lambda: f64, n: usize) -> Result<KrausChannel> {
    if n == 0 {
        return Err(invalid("global depolarizing channel needs n >= 1"));
    }
    KrausChannel::new(ChannelKind::GlobalDepolarizing { lambda }, (0..n).collect())
}

pub fn damping_dephasing(params: DampingDephasingParams) -> Result<KrausChannel> {
    KrausChannel::new(
        ChannelKind::DampingDephasing {
            g: params.g,
            p: params.p,
        },
        vec![0],
    )
}

pub fn pauli_channel(params: PauliChannelParams) -> Result<KrausChannel> {
    KrausChannel::new(ChannelKind::Pauli(params), vec![0])
}

pub fn identity_channel() -> KrausChannel {
    KrausChannel {
        targets: vec![0],
        kind: ChannelKind::Pauli(PauliChannelParams {
            p_i: 1.0,
            p_x: 0.0,
            p_y: 0.0,
            p_z: 0.0,
        }),
    }
}

pub fn apply_channel(rho: &DensityOperator, ch: &KrausChannel) -> Result<DensityOperator> {
    let n = rho.n_qubits();
    let m = ch.apply_matrix(rho.matrix(), n)?;
    DensityOperator::from_matrix_unchecked(n, m)
}

/// Bloch vector `(x, y, z)` of a single-qubit state.
pub fn bloch_vector(rho: &DensityOperator) -> Result<[f64; 3]> {
    if rho.n_qubits() != 1 {
        return Err(invalid("Bloch vector needs a single-qubit state"));
    }
    let m = rho.matrix();
    Ok([2.0 * m.get(0, 1).re, -2.0 * m.get(0, 1).im, (m.get(0, 0) - m.get(1, 1)).re])
}

/// Single-qubit state with the given Bloch vector.
pub fn from_bloch(r: [f64; 3]) -> Result<DensityOperator> {
    let [x, y, z] = r;
    let m = CMatrix::from_rows(&[
        &[C64::new((1.0 + z) / 2.0, 0.0), C64::new(x / 2.0, -y / 2.0)],
        &[C64::new(x / 2.0, y / 2.0), C64::new((1.0 - z) / 2.0, 0.0)],
    ])?;
    DensityOperator::new(1, m)
}
