use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use distillery::analytic::{
    enumerate_accepted, global_depol_distill, local_depol_formula, recurrence_bitflip, AnalyticResult,
};
use distillery::channels::PauliChannelParams;
use distillery::circuit::{execute_exact, Circuit, NoisyExecutionConfig};
use distillery::densop::{bell_fidelity, DensityOperator};
use distillery::device::{idle_distill_experiment, load_calibration, DdMode, DeviceCalibration, IdleExperiment, IdleSpec};
use distillery::protocols::{ProtocolName, SwapDecomposition};
use distillery::sweep::{csv_string, run_sweep, SweepConfig};
use distillery::{Error, Execution};

#[derive(Parser)]
#[command(name = "distillery", version, about = "Bell-pair distillation simulator")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep from a JSON config and write CSV.
    Sweep(SweepArgs),
    /// Evaluate a closed-form result.
    Analytic(AnalyticArgs),
    /// List the accepted error patterns of a protocol as CSV.
    Enumerate(EnumerateArgs),
    /// Idle-noise distillation on a calibrated device chain.
    SimulateIdle(IdleArgs),
    /// Check a sweep config, calibration or circuit file.
    ValidateConfig(ValidateArgs),
    /// Execute a circuit JSON from |0…0> and report outcome probabilities.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the config with all defaults filled in and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyticNoise {
    Bitflip,
    LocalDepol,
    GlobalDepol,
}

#[derive(Args)]
struct AnalyticArgs {
    protocol: ProtocolName,
    #[arg(long, value_enum)]
    noise: AnalyticNoise,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EnumerateArgs {
    protocol: ProtocolName,
    /// Depolarizing strength per pair for the probability column.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    p: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct IdleArgs {
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    protocol: ProtocolName,
    /// Comma-separated device qubits.
    #[arg(long, value_delimiter = ',', required = true)]
    chain: Vec<usize>,
    /// `start:stop:step` in µs or a comma-separated list.
    #[arg(long, default_value = "0:200:25")]
    delays: String,
    #[arg(long, value_enum, default_value = "staggered")]
    dd: DdArg,
    #[arg(long, value_enum, default_value = "on")]
    zz: Toggle,
    #[arg(long, value_enum, default_value = "three-cnots")]
    swap: SwapArg,
    #[arg(long, default_value_t = 16)]
    segments: usize,
    /// Treat T1 and T2 as infinite.
    #[arg(long)]
    ideal_coherence: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DdArg {
    None,
    Staggered,
}

#[derive(Clone, Copy, ValueEnum)]
enum SwapArg {
    ThreeCnots,
    SingleGate,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    gate_error: f64,
    #[arg(long, default_value_t = 0.0)]
    meas_error: f64,
}

/// Failure class, mapped to the exit code.
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn config(e: impl ToString) -> Self {
        Failure::Config(e.to_string())
    }

    fn runtime(e: impl ToString) -> Self {
        Failure::Runtime(e.to_string())
    }

    /// Input-shaped errors count as configuration errors.
    fn classify(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Config { .. } | Error::Parse(_) | Error::UnsupportedProtocol(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out.filter(|p| *p != Path::new("-")) {
        Some(path) => fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(Failure::runtime),
    }
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let mut cfg = SweepConfig::load(&args.config).map_err(|e| match e {
        Error::Io(io) => Failure::config(format!("{}: {io}", args.config.display())),
        other => Failure::classify(other),
    })?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.print_config {
        return emit(None, &(cfg.to_json() + "\n"));
    }
    let res = run_sweep(&cfg, Execution::Parallel).map_err(Failure::classify)?;
    let out = args.out.or_else(|| cfg.output.clone());
    emit(out.as_deref(), &csv_string(&res.rows))
}

fn print_analytic(json_mode: bool, value: serde_json::Value) -> CliResult {
    let text = if json_mode {
        value.to_string()
    } else {
        value
            .as_object()
            .expect("object")
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    emit(None, &(text + "\n"))
}

fn analytic_json(r: &AnalyticResult) -> serde_json::Value {
    json!({ "p_s": r.p_s, "F_a": r.f_a, "F_b": r.f_b })
}

fn cmd_analytic(args: AnalyticArgs) -> CliResult {
    let value = match args.noise {
        AnalyticNoise::Bitflip => {
            if args.protocol != ProtocolName::Z2B {
                return Err(Failure::config("bit-flip closed form exists for z2b only"));
            }
            analytic_json(&recurrence_bitflip(args.p, args.q).map_err(Failure::classify)?)
        }
        AnalyticNoise::LocalDepol => {
            let f = local_depol_formula(args.protocol).map_err(Failure::classify)?;
            analytic_json(&f(args.p, args.q).map_err(Failure::classify)?)
        }
        AnalyticNoise::GlobalDepol => {
            let g = global_depol_distill(args.protocol, args.lambda).map_err(Failure::classify)?;
            json!({ "p_G": g.p_g, "F_G": g.f_g, "F_b": g.f_b, "r": g.r })
        }
    };
    print_analytic(args.json, value)
}

fn cmd_enumerate(args: EnumerateArgs) -> CliResult {
    let spec = args.protocol.build().map_err(Failure::classify)?;
    let ps = match args.p.len() {
        1 => vec![args.p[0]; spec.n_pairs],
        n if n == spec.n_pairs => args.p.clone(),
        n => return Err(Failure::config(format!("--p takes 1 or {} values, got {n}", spec.n_pairs))),
    };
    let channels = ps
        .iter()
        .map(|&p| PauliChannelParams::depolarizing(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::classify)?;
    let en = enumerate_accepted(&spec, &channels).map_err(Failure::classify)?;
    let mut text = String::from("error,monomial,residual,probability\n");
    for row in &en.rows {
        text += &format!("{},{},{},{}\n", row.error_label(), row.monomial, en.residual_label(row), row.probability);
    }
    emit(args.out.as_deref(), &text)
}

fn parse_delays(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::config(format!("--delays: cannot parse `{s}`"));
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
    }
}

fn cmd_simulate_idle(args: IdleArgs) -> CliResult {
    let mut calib: DeviceCalibration = load_calibration(&args.calibration).map_err(|e| match e {
        Error::Io(io) => Failure::config(format!("{}: {io}", args.calibration.display())),
        other => Failure::classify(other),
    })?;
    if args.ideal_coherence {
        calib = calib.with_ideal_coherence();
    }
    let delays = parse_delays(&args.delays)?;
    let exp = IdleExperiment {
        idle: IdleSpec {
            n_segments: args.segments,
            delay_us: 0.0,
            dd_mode: match args.dd {
                DdArg::None => DdMode::None,
                DdArg::Staggered => DdMode::Staggered,
            },
            zz_enabled: matches!(args.zz, Toggle::On),
        },
        swap: match args.swap {
            SwapArg::ThreeCnots => SwapDecomposition::ThreeCnots,
            SwapArg::SingleGate => SwapDecomposition::SingleGate,
        },
    };
    exp.idle.validate().map_err(Failure::classify)?;
    let rows = idle_distill_experiment(args.protocol, &args.chain, &calib, &delays, &exp, Execution::Parallel)
        .map_err(Failure::classify)?;
    emit(args.out.as_deref(), &csv_string(&rows))
}

fn cmd_validate(args: ValidateArgs) -> CliResult {
    let path = &args.config;
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let kind = if value.is_array() || value.get("elements").is_some() {
        Circuit::from_json(&text).map_err(Failure::classify)?;
        "circuit"
    } else if value.get("qubits").is_some() {
        DeviceCalibration::from_json(&text).map_err(Failure::classify)?;
        "calibration"
    } else {
        SweepConfig::load(path).map_err(Failure::classify)?;
        "sweep config"
    };
    emit(None, &format!("{}: valid {kind}\n", path.display()))
}

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let text = fs::read_to_string(&args.circuit)
        .map_err(|e| Failure::config(format!("{}: {e}", args.circuit.display())))?;
    let circuit = Circuit::from_json(&text).map_err(Failure::classify)?;
    let cfg = NoisyExecutionConfig::uniform(args.gate_error, args.meas_error).map_err(Failure::classify)?;
    let init = DensityOperator::zero_state(circuit.n_qubits).map_err(Failure::classify)?;
    let res = execute_exact(&circuit, &init, &cfg).map_err(Failure::runtime)?;
    let outcomes: Vec<_> = res
        .record
        .joint
        .iter()
        .map(|(bits, p)| {
            let s: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
            json!({ "bits": s, "probability": p })
        })
        .collect();
    let snapshots: Vec<_> = res
        .snapshots
        .iter()
        .map(|s| json!({ "label": s.label, "purity": s.state.purity() }))
        .collect();
    let fin = res.unconditional();
    let pairs: Vec<_> = (0..circuit.n_qubits)
        .flat_map(|a| (a + 1..circuit.n_qubits).map(move |b| (a, b)))
        .map(|(a, b)| json!({ "pair": [a, b], "fidelity": bell_fidelity(&fin, (a, b)).unwrap_or(f64::NAN) }))
        .collect();
    let value = json!({
        "labels": res.record.labels,
        "outcomes": outcomes,
        "snapshots": snapshots,
        "final_purity": fin.purity(),
        "final_bell_fidelities": pairs,
    });
    emit(None, &(serde_json::to_string_pretty(&value).map_err(Failure::runtime)? + "\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = distillery::par::set_jobs(jobs) {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analytic(a) => cmd_analytic(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::SimulateIdle(a) => cmd_simulate_idle(a),
        Command::ValidateConfig(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
