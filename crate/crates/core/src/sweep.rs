//! Parameter sweeps over waiting noise or idle delay, producing CSV rows.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{execute_exact, postselect, NoisyExecutionConfig};
use crate::densop::{bell_fidelity, partial_trace, DensityOperator};
use crate::device::{idle_distill_experiment, load_calibration, DdMode, IdleExperiment, IdleSpec};
use crate::error::{config, Error, Result};
use crate::estimation::estimate_sampled;
use crate::par::{self, Execution};
use crate::protocols::{build_pipeline, err_decrease, NoiseFamily, PipelineSpec, ProtocolName, SwapDecomposition};

pub const CSV_VERSION_LINE: &str = "# distillery-csv v1";
pub const CSV_HEADER: &str = "sweep_value,F1,F2,F3,F_b,F_a,p_accept,r,eps_d";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    /// Pair fidelities: right after preparation for noise-family sweeps,
    /// from the no-distillation control at readout for idle sweeps.
    pub f_pairs: Vec<f64>,
    pub f_b: f64,
    /// `None` when nothing was accepted.
    pub f_a: Option<f64>,
    pub p_accept: f64,
    pub r: Option<f64>,
    pub eps_d: Option<f64>,
}

impl SweepRow {
    pub fn new(sweep_value: f64, f_pairs: Vec<f64>, f_b: f64) -> Self {
        Self {
            sweep_value,
            f_pairs,
            f_b,
            f_a: None,
            p_accept: 0.0,
            r: None,
            eps_d: None,
        }
    }

    pub fn set_distilled(&mut self, p_accept: f64, f_a: f64) {
        self.p_accept = p_accept;
        self.f_a = Some(f_a);
        self.r = Some(f_a / self.f_b);
        self.eps_d = err_decrease(f_a, self.f_b);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bitflip,
    LocalDepol,
    GlobalDepol,
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Local waiting-noise strength.
    Q,
    /// Global depolarizing λ.
    Lambda,
    /// Idle delay in µs.
    Delay,
}

/// Either an explicit list or `points` evenly spaced values in `[start, stop]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: SweepVariable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl SweepAxis {
    pub fn range(variable: SweepVariable, start: f64, stop: f64, points: usize) -> Self {
        Self {
            variable,
            values: None,
            start: Some(start),
            stop: Some(stop),
            points: Some(points),
        }
    }

    pub fn list(variable: SweepVariable, values: Vec<f64>) -> Self {
        Self {
            variable,
            values: Some(values),
            start: None,
            stop: None,
            points: None,
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let grid = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            },
            _ => {
                return Err(config("sweep", "give either `values` or all of `start`, `stop`, `points`"));
            }
        };
        if grid.is_empty() {
            return Err(config("sweep", "grid is empty"));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(config("sweep", "grid values must be finite"));
        }
        let up = grid.windows(2).all(|w| w[1] > w[0]);
        let down = grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(config("sweep", "grid must be strictly monotone"));
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdleConfig {
    /// Calibration JSON; relative paths resolve against the config file.
    pub calibration: PathBuf,
    /// Device qubits hosting logical qubits `0..`.
    pub chain: Vec<usize>,
    #[serde(default = "default_segments")]
    pub n_segments: usize,
    #[serde(default = "default_dd")]
    pub dd_mode: DdMode,
    #[serde(default = "default_true")]
    pub zz_enabled: bool,
    /// Replace T1 and T2 by infinity.
    #[serde(default)]
    pub ideal_coherence: bool,
}

fn default_segments() -> usize {
    IdleSpec::default().n_segments
}

fn default_dd() -> DdMode {
    DdMode::Staggered
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub protocol: ProtocolName,
    pub noise_family: Family,
    /// Extra noise parameter on one half of pair 1 (and pair 3).
    #[serde(default)]
    pub asymmetry_p: f64,
    /// Target `F1 / F2` at preparation; overrides `asymmetry_p` when set.
    #[serde(default)]
    pub asymmetry_ratio: Option<f64>,
    #[serde(default)]
    pub gate_error: f64,
    #[serde(default)]
    pub meas_error: f64,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub swap_decomposition: SwapDecomposition,
    #[serde(default)]
    pub seed: u64,
    /// Estimate fidelities from this many shots per basis instead of
    /// reporting exact values.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub idle: Option<IdleConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("sweep config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(idle) = &mut cfg.idle {
            if idle.calibration.is_relative() {
                idle.calibration = base.join(&idle.calibration);
            }
        }
        Ok(cfg)
    }

    /// Pretty JSON with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |field: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(config(field, format!("{x} is not a probability")))
            }
        };
        if self.protocol == ProtocolName::General {
            return Err(config("protocol", "sweeps need z2b, x2b or zx3b"));
        }
        prob("gate_error", self.gate_error)?;
        prob("meas_error", self.meas_error)?;
        prob("asymmetry_p", self.asymmetry_p)?;
        if let Some(r) = self.asymmetry_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(config("asymmetry_ratio", format!("{r} must lie in (0, 1]")));
            }
            if self.asymmetry_p != 0.0 {
                return Err(config("asymmetry_ratio", "set either asymmetry_p or asymmetry_ratio"));
            }
        }
        if self.shots == Some(0) {
            return Err(config("shots", "must be positive"));
        }
        let grid = self.sweep.grid()?;
        let expected = match self.noise_family {
            Family::Bitflip | Family::LocalDepol => SweepVariable::Q,
            Family::GlobalDepol => SweepVariable::Lambda,
            Family::Idle => SweepVariable::Delay,
        };
        if self.sweep.variable != expected {
            return Err(config(
                "sweep.variable",
                format!("{:?} noise sweeps `{expected:?}`", self.noise_family).to_lowercase(),
            ));
        }
        let (lo, hi) = match self.noise_family {
            Family::Bitflip => (0.0, 0.5),
            Family::LocalDepol | Family::GlobalDepol => (0.0, 1.0),
            Family::Idle => (0.0, f64::INFINITY),
        };
        if let Some(x) = grid.iter().find(|&&x| x < lo || x > hi) {
            return Err(config("sweep", format!("value {x} outside [{lo}, {hi}]")));
        }
        if self.noise_family == Family::Bitflip && self.asymmetry_p > 0.5 {
            return Err(config("asymmetry_p", "bit-flip probability must be <= 0.5"));
        }
        match (&self.idle, self.noise_family) {
            (Some(idle), Family::Idle) => {
                let n = self.protocol.n_pairs().unwrap_or(0) * 2;
                if idle.chain.len() != n {
                    return Err(config("idle.chain", format!("{} needs {n} qubits", self.protocol)));
                }
                let spec = IdleSpec {
                    n_segments: idle.n_segments,
                    delay_us: 0.0,
                    dd_mode: idle.dd_mode,
                    zz_enabled: idle.zz_enabled,
                };
                spec.validate().map_err(|_| config("idle.n_segments", "staggered DD needs a positive multiple of 4"))?;
                if self.gate_error != 0.0 || self.meas_error != 0.0 || self.asymmetry_p != 0.0 || self.asymmetry_ratio.is_some() {
                    return Err(config("noise_family", "idle sweeps take gate and readout errors from the calibration"));
                }
            }
            (None, Family::Idle) => return Err(config("idle", "idle sweeps need an `idle` section")),
            (Some(_), _) => return Err(config("idle", "only the idle family takes an `idle` section")),
            (None, _) => {}
        }
        Ok(())
    }

    fn family(&self) -> NoiseFamily {
        match self.noise_family {
            Family::Bitflip => NoiseFamily::Bitflip,
            Family::LocalDepol => NoiseFamily::LocalDepol,
            _ => NoiseFamily::GlobalDepol,
        }
    }

    fn pipeline(&self, asymmetry: f64, waiting: f64) -> PipelineSpec {
        PipelineSpec {
            protocol: self.protocol,
            family: self.family(),
            asymmetry,
            waiting,
            swap: self.swap_decomposition,
        }
    }

    fn exec_config(&self) -> Result<NoisyExecutionConfig> {
        NoisyExecutionConfig::uniform(self.gate_error, self.meas_error)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub n_pairs: usize,
    /// Asymmetry parameter actually used.
    pub asymmetry_p: f64,
    pub rows: Vec<SweepRow>,
}

/// `F1 / F2` of the freshly prepared pairs at barrier `t0`.
pub fn initial_ratio(cfg: &SweepConfig, asymmetry: f64) -> Result<f64> {
    let (circuit, _) = build_pipeline(&cfg.pipeline(asymmetry, 0.0))?;
    let res = execute_exact(&circuit, &DensityOperator::zero_state(circuit.n_qubits)?, &cfg.exec_config()?)?;
    let t0 = res.snapshot("t0").expect("pipeline barrier");
    Ok(bell_fidelity(t0, (0, 1))? / bell_fidelity(t0, (2, 3))?)
}

/// Bisects the asymmetry parameter until the simulated `F1 / F2` at `t0`
/// equals `target` (tolerance 1e-6 in the parameter).
pub fn solve_asymmetry(cfg: &SweepConfig, target: f64) -> Result<f64> {
    let hi_limit = if cfg.noise_family == Family::Bitflip { 0.5 } else { 0.75 };
    let f = |p: f64| initial_ratio(cfg, p).map(|r| r - target);
    let (mut lo, mut hi) = (0.0, hi_limit);
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(config("asymmetry_ratio", format!("ratio {target} is not reachable")));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn fidelity(rho: &DensityOperator, pair: (usize, usize), cfg: &SweepConfig, salt: u64) -> Result<f64> {
    match cfg.shots {
        None => bell_fidelity(rho, pair),
        Some(shots) => Ok(estimate_sampled(rho, pair, shots, 0.0, cfg.seed.wrapping_add(salt))?.f_hat),
    }
}

fn pipeline_row(cfg: &SweepConfig, asymmetry: f64, x: f64, index: usize) -> Result<SweepRow> {
    let (circuit, proto) = build_pipeline(&cfg.pipeline(asymmetry, x))?;
    let res = execute_exact(&circuit, &DensityOperator::zero_state(circuit.n_qubits)?, &cfg.exec_config()?)?;
    let t0 = res.snapshot("t0").expect("pipeline barrier");
    let t2 = res.snapshot("t2").expect("pipeline barrier");
    // Distinct seeds per grid point and per estimated pair.
    let salt = |k: usize| (index as u64) * 64 + 3 * k as u64;
    let f_pairs = (0..proto.n_pairs)
        .map(|k| fidelity(t0, (2 * k, 2 * k + 1), cfg, salt(k)))
        .collect::<Result<Vec<_>>>()?;
    let f_b = proto
        .pairs
        .iter()
        .enumerate()
        .map(|(k, &p)| fidelity(t2, p, cfg, salt(proto.n_pairs + k)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut row = SweepRow::new(x, f_pairs, f_b);
    match postselect(&res, &proto.rule) {
        Ok((p, kept)) => {
            let (a, b) = proto.kept_pair;
            let pair = partial_trace(&kept, &[a, b])?;
            row.set_distilled(p, fidelity(&pair, (0, 1), cfg, salt(2 * proto.n_pairs))?);
        }
        Err(Error::NothingAccepted(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(row)
}

pub fn run_sweep(cfg: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = cfg.sweep.grid()?;
    let n_pairs = cfg.protocol.n_pairs().expect("validated protocol");
    if let Some(idle) = &cfg.idle {
        let mut calib = load_calibration(&idle.calibration)?;
        if idle.ideal_coherence {
            calib = calib.with_ideal_coherence();
        }
        let exp = IdleExperiment {
            idle: IdleSpec {
                n_segments: idle.n_segments,
                delay_us: 0.0,
                dd_mode: idle.dd_mode,
                zz_enabled: idle.zz_enabled,
            },
            swap: cfg.swap_decomposition,
        };
        let rows = idle_distill_experiment(cfg.protocol, &idle.chain, &calib, &grid, &exp, exec)?;
        return Ok(SweepResult {
            n_pairs,
            asymmetry_p: 0.0,
            rows,
        });
    }
    let asymmetry = match cfg.asymmetry_ratio {
        Some(target) => solve_asymmetry(cfg, target)?,
        None => cfg.asymmetry_p,
    };
    let indexed: Vec<(usize, f64)> = grid.into_iter().enumerate().collect();
    let rows = par::map(exec, &indexed, |&(i, x)| pipeline_row(cfg, asymmetry, x, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        n_pairs,
        asymmetry_p: asymmetry,
        rows,
    })
}

fn num(x: f64) -> String {
    format!("{x:.12}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv(out: &mut impl Write, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let f = |k: usize| opt(row.f_pairs.get(k).copied());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(row.sweep_value),
            f(0),
            f(1),
            f(2),
            num(row.f_b),
            opt(row.f_a),
            num(row.p_accept),
            opt(row.r),
            opt(row.eps_d)
        )?;
    }
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{recurrence_bitflip, z2b_local_depol};

    fn base(family: Family, variable: SweepVariable) -> SweepConfig {
        SweepConfig {
            protocol: ProtocolName::Z2B,
            noise_family: family,
            asymmetry_p: 0.0,
            asymmetry_ratio: None,
            gate_error: 0.0,
            meas_error: 0.0,
            sweep: SweepAxis::range(variable, 0.0, 0.4, 9),
            swap_decomposition: SwapDecomposition::ThreeCnots,
            seed: 0,
            shots: None,
            idle: None,
            output: None,
        }
    }

    #[test]
    fn noiseless_sweeps_match_closed_forms() {
        let cfg = base(Family::LocalDepol, SweepVariable::Q);
        let res = run_sweep(&cfg, Execution::Sequential).unwrap();
        for row in &res.rows {
            let q = row.sweep_value;
            let a = z2b_local_depol(q, q).unwrap();
            assert!((row.p_accept - a.p_s).abs() < 1e-10);
            assert!((row.f_a.unwrap() - a.f_a).abs() < 1e-10);
        }
        let mut cfg = base(Family::Bitflip, SweepVariable::Q);
        cfg.asymmetry_p = 0.05;
        for row in run_sweep(&cfg, Execution::Parallel).unwrap().rows {
            let q = row.sweep_value;
            let a = recurrence_bitflip(0.05 + q - 0.1 * q, q).unwrap();
            assert!((row.f_a.unwrap() - a.f_a).abs() < 1e-10);
            assert!((row.r.unwrap() - row.f_a.unwrap() / row.f_b).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetry_bisection_hits_target() {
        let mut cfg = base(Family::LocalDepol, SweepVariable::Q);
        cfg.gate_error = 0.01;
        cfg.meas_error = 0.01;
        let p = solve_asymmetry(&cfg, 0.975).unwrap();
        assert!((initial_ratio(&cfg, p).unwrap() - 0.975).abs() < 1e-5);
        assert!(solve_asymmetry(&cfg, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = base(Family::GlobalDepol, SweepVariable::Q);
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "sweep.variable"));
        cfg.sweep = SweepAxis::list(SweepVariable::Lambda, vec![0.1, 0.1]);
        assert!(cfg.validate().is_err());
        cfg.sweep = SweepAxis::list(SweepVariable::Lambda, vec![]);
        assert!(cfg.validate().is_err());
        cfg.sweep = SweepAxis::list(SweepVariable::Lambda, vec![0.1, 0.2]);
        cfg.validate().unwrap();
        cfg.gate_error = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "gate_error"));
        let text = r#"{"protocol": "z2b", "noise_family": "bitflip", "sweep": {"variable": "q", "values": [0.1]}, "bogus": 1}"#;
        assert!(SweepConfig::from_json(text).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn csv_layout() {
        let mut accepted = SweepRow::new(0.1, vec![0.9, 0.8], 0.9);
        accepted.set_distilled(0.5, 0.95);
        let rejected = SweepRow::new(0.2, vec![0.5, 0.5], 0.5);
        let text = csv_string(&[accepted, rejected]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_VERSION_LINE);
        assert_eq!(lines[1], CSV_HEADER);
        assert!(lines[2].starts_with("0.100000000000,0.900000000000,0.800000000000,,0.900000000000,0.950000000000,"));
        assert!(lines[3].ends_with(",0.500000000000,,0.000000000000,,"));
    }

    #[test]
    fn sampled_sweeps_are_deterministic() {
        let mut cfg = base(Family::LocalDepol, SweepVariable::Q);
        cfg.shots = Some(2000);
        cfg.seed = 11;
        let a = csv_string(&run_sweep(&cfg, Execution::Parallel).unwrap().rows);
        let b = csv_string(&run_sweep(&cfg, Execution::Sequential).unwrap().rows);
        assert_eq!(a, b);
    }
}
