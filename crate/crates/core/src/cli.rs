//! The `qonline` command line: experiment subcommands plus the pure bound
//! calculators. Exit codes: 0 pass, 1 usage/validation error, 2 bound
//! violation.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::harness::{
    run_experiment, write_outputs, Adversary, ExperimentConfig, ExperimentKind,
};
use crate::learn::{mistake_bound, theoretical_regret_bound, Variant};
use crate::loss::{FeedbackMode, LossKind};

#[derive(Parser)]
#[command(
    name = "qonline",
    about = "Online learning of n-qubit quantum states: learners, bounds, verifiers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a regret-minimization experiment against a hidden state.
    Regret(ExperimentArgs),
    /// Run a realizable mistake-bound experiment with the filtered learner.
    Mistake(ExperimentArgs),
    /// Run the postselection learner over a random measurement stream.
    Postselect(ExperimentArgs),
    /// Check the quantum union bound over seeded random instances.
    UnionBound(ExperimentArgs),
    /// Run the MMW adversary against random or fixture random-access codes.
    Rac(ExperimentArgs),
    /// Print theoretical bounds without running anything.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config file; other flags are ignored when present.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Number of qubits.
    #[arg(long)]
    n: Option<usize>,

    /// Horizon: iterations for learners, instances for union-bound,
    /// codes for rac.
    #[arg(long = "T")]
    t: Option<u64>,

    /// RNG seed; identical seeds reproduce runs byte for byte.
    #[arg(long)]
    seed: Option<u64>,

    /// Learner variant (rftl | mmw).
    #[arg(long, value_enum)]
    variant: Option<CliVariant>,

    /// Loss kind (l1 | l2).
    #[arg(long, value_enum)]
    loss: Option<CliLoss>,

    /// Feedback channel (exact | noisy-interval | bernoulli).
    #[arg(long, value_enum)]
    feedback: Option<CliFeedback>,

    /// Noise width for noisy-interval feedback.
    #[arg(long)]
    feedback_epsilon: Option<f64>,

    /// Accuracy parameter epsilon.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Learning-rate override (defaults come from the theorems).
    #[arg(long)]
    eta: Option<f64>,

    /// Registers (postselect), measurements per instance (union-bound),
    /// or bits per code (rac).
    #[arg(long)]
    k: Option<usize>,

    /// Adversary (random | adaptive-max-loss | fixture).
    #[arg(long, value_enum)]
    adversary: Option<CliAdversary>,

    /// Output base path; writes <out>.csv and <out>.json.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Fixture file (measurement stream or rac code).
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Learner variant (rftl | mmw).
    #[arg(long, value_enum)]
    variant: CliVariant,

    /// Number of qubits.
    #[arg(long)]
    n: usize,

    /// Horizon for the regret bound.
    #[arg(long = "T")]
    t: u64,

    /// Lipschitz constant.
    #[arg(long = "L", default_value_t = 1.0)]
    lipschitz: f64,

    /// Also print the mistake bound for this epsilon.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Also print the serial-encoding capacity for this margin.
    #[arg(long)]
    serial_epsilon: Option<f64>,

    /// With --rac-p: check the random-access-code bound for k bits.
    #[arg(long)]
    rac_k: Option<usize>,

    /// Worst-case decoding error for --rac-k.
    #[arg(long)]
    rac_p: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliVariant {
    Rftl,
    Mmw,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Variant {
        match v {
            CliVariant::Rftl => Variant::Rftl,
            CliVariant::Mmw => Variant::Mmw,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliLoss {
    L1,
    L2,
}

impl From<CliLoss> for LossKind {
    fn from(v: CliLoss) -> LossKind {
        match v {
            CliLoss::L1 => LossKind::L1,
            CliLoss::L2 => LossKind::L2,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliFeedback {
    Exact,
    NoisyInterval,
    Bernoulli,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliAdversary {
    Random,
    AdaptiveMaxLoss,
    Fixture,
}

impl From<CliAdversary> for Adversary {
    fn from(v: CliAdversary) -> Adversary {
        match v {
            CliAdversary::Random => Adversary::Random,
            CliAdversary::AdaptiveMaxLoss => Adversary::AdaptiveMaxLoss,
            CliAdversary::Fixture => Adversary::Fixture,
        }
    }
}

fn build_config(kind: ExperimentKind, args: &ExperimentArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        let cfg = ExperimentConfig::from_json_file(path)?;
        if cfg.kind != kind {
            return Err(crate::Error::InvalidConfig(format!(
                "config kind {} does not match the {} subcommand",
                cfg.kind, kind
            )));
        }
        return Ok(cfg);
    }
    let missing = |what: &str| crate::Error::InvalidConfig(format!("--{what} is required"));
    let feedback = match args.feedback {
        None => None,
        Some(CliFeedback::Exact) => Some(FeedbackMode::Exact),
        Some(CliFeedback::Bernoulli) => Some(FeedbackMode::Bernoulli),
        Some(CliFeedback::NoisyInterval) => Some(FeedbackMode::NoisyInterval {
            epsilon: args
                .feedback_epsilon
                .ok_or_else(|| missing("feedback-epsilon"))?,
        }),
    };
    Ok(ExperimentConfig {
        kind,
        n: args.n.ok_or_else(|| missing("n"))?,
        t: args.t.ok_or_else(|| missing("T"))?,
        seed: args.seed.ok_or_else(|| missing("seed"))?,
        variant: args.variant.map(Into::into),
        loss: args.loss.map(Into::into),
        feedback,
        epsilon: args.epsilon,
        eta: args.eta,
        k: args.k,
        adversary: args.adversary.map(Into::into),
        out: args.out.clone(),
        fixture: args.fixture.clone(),
    })
}

fn run(kind: ExperimentKind, args: &ExperimentArgs) -> Result<bool> {
    let cfg = build_config(kind, args)?;
    let output = run_experiment(&cfg)?;
    write_outputs(&cfg, &output)?;
    println!("{}", serde_json::to_string_pretty(&output.summary)?);
    Ok(output.summary.pass())
}

fn print_bounds(args: &BoundsArgs) -> Result<()> {
    let variant: Variant = args.variant.into();
    let bound = theoretical_regret_bound(variant, args.t, args.n, args.lipschitz);
    println!("regret_bound {bound:.6}");
    if let Some(epsilon) = args.epsilon {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(crate::Error::EpsilonOutOfRange { epsilon });
        }
        let mb = mistake_bound(variant, args.n, epsilon);
        println!("mistake_bound {mb:.6}");
    }
    if let Some(epsilon) = args.serial_epsilon {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(crate::Error::EpsilonOutOfRange { epsilon });
        }
        let k_max = crate::bounds::serial_encoding_max_bits(args.n, epsilon);
        println!("serial_encoding_max_bits {k_max:.6}");
    }
    if let (Some(k), Some(p)) = (args.rac_k, args.rac_p) {
        if !(0.0..=0.5).contains(&p) {
            return Err(crate::Error::BadProbability { value: p });
        }
        let ok = crate::bounds::rac_bound_check(args.n, k, p);
        println!("rac_bound_ok {ok}");
    }
    Ok(())
}

/// Parse argv, run the requested subcommand, and map the outcome to an exit
/// code: 0 pass, 1 usage or validation error, 2 bound violation.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, outcome) = match &cli.command {
        Command::Regret(args) => ("regret", run(ExperimentKind::Regret, args)),
        Command::Mistake(args) => ("mistake", run(ExperimentKind::Mistake, args)),
        Command::Postselect(args) => ("postselect", run(ExperimentKind::Postselect, args)),
        Command::UnionBound(args) => ("union-bound", run(ExperimentKind::UnionBound, args)),
        Command::Rac(args) => ("rac", run(ExperimentKind::Rac, args)),
        Command::Bounds(args) => ("bounds", print_bounds(args).map(|()| true)),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            let mut cmd = <Cli as clap::CommandFactory>::command();
            if let Some(sub) = cmd.find_subcommand_mut(name) {
                eprintln!("{}", sub.render_usage());
                eprintln!("run `qonline {name} --help` for details");
            }
            1
        }
    }
}
