//! Argument parsing and command dispatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tsproc_core::algebra::mats;
use tsproc_core::distributions::{check_order_compatibility, joint_from_process};
use tsproc_core::inequalities::{
    self, classical_bound_oracle, Direction, EvalOptions, Game, Order, SettingConvention,
    DEFAULT_STRATEGY_CAP,
};
use tsproc_core::operations::{
    build_bob_gated, build_measure_prepare_z, identity_operation, random_physical_operation,
    validate_physical, GatedPreparation, OperationFamily,
};
use tsproc_core::processes::{
    build_inequivalence_w, build_qtf, classify, trivial_process, validate_process,
    ConstraintMode, ProcessFamily, A_I, B_I,
};
use tsproc_core::LabeledOperator;

use crate::artifact::{self, Artifact};
use crate::demos::{self, DemoConfig};
use crate::report::Report;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "tsproc", version, about = "Time-symmetric process matrices: validation, classification, simulation and causal games")]
pub struct Cli {
    /// Indent the JSON report.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Tolerance for every constraint residual.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Add the wall time to the report, which makes it non-deterministic.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an operation family or a process family.
    Validate {
        #[arg(long, conflicts_with = "process", required_unless_present = "process")]
        op: Option<PathBuf>,
        #[arg(long)]
        process: Option<PathBuf>,
        /// Constraint set for processes: general, no_post, no_pre or isolated.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Smallest class (ISO, TF, TB, TS) consistent with a process.
    Classify {
        #[arg(long)]
        process: PathBuf,
    },
    /// Outcome table of a process with two operation families.
    Simulate {
        #[arg(long)]
        process: PathBuf,
        #[arg(long = "op-a")]
        op_a: PathBuf,
        #[arg(long = "op-b")]
        op_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an outcome table on a causal game.
    Inequality {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, value_enum)]
        game: GameArg,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[arg(long)]
        u: Option<usize>,
        #[arg(long)]
        v: Option<usize>,
        #[arg(long, value_enum, default_value_t = ConventionArg::Alternating)]
        convention: ConventionArg,
    },
    /// Classical bound by enumerating deterministic strategies.
    Oracle {
        #[arg(long, value_enum)]
        game: GameArg,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Alice's setting alphabet; defaults to 1 for gyni and 2 for lgyni.
        #[arg(long = "n-alpha")]
        n_alpha: Option<usize>,
        #[arg(long = "n-beta")]
        n_beta: Option<usize>,
        #[arg(long, value_enum, default_value_t = ConventionArg::Alternating)]
        convention: ConventionArg,
        #[arg(long, default_value_t = DEFAULT_STRATEGY_CAP)]
        cap: u128,
    },
    /// Run a worked example.
    Demo {
        #[arg(value_enum)]
        name: DemoArg,
    },
    /// Write a built-in family as an artifact file.
    Build {
        #[arg(value_enum)]
        target: BuildTarget,
        #[arg(long)]
        out: PathBuf,
        /// Weight of the post-selected term for `inequivalence`.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        /// Control state for `qtf`.
        #[arg(long, value_enum, default_value_t = ControlArg::Plus)]
        control: ControlArg,
        /// Alphabets for `random-operation`.
        #[arg(long, default_value_t = 2)]
        incomes: usize,
        #[arg(long, default_value_t = 2)]
        outcomes: usize,
        /// Party label for single-party targets.
        #[arg(long, default_value = "A")]
        party: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GameArg {
    Gyni,
    Lgyni,
}

impl From<GameArg> for Game {
    fn from(g: GameArg) -> Self {
        match g {
            GameArg::Gyni => Game::Gyni,
            GameArg::Lgyni => Game::Lgyni,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Backward => Direction::Backward,
        }
    }
}

/// Gate assignment when only one party has a setting.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    /// The holder guesses on setting 1, the neighbour on setting 0.
    Alternating,
    /// The missing setting is 1.
    MissingIsOne,
}

impl From<ConventionArg> for SettingConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Alternating => SettingConvention::AlternatingGuesser,
            ConventionArg::MissingIsOne => SettingConvention::MissingSettingIsOne,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DemoArg {
    Ocb,
    ReversedOcb,
    Timeflip,
    Inequivalence,
    TfToTs,
    /// Also accepted as `appendix-b`.
    #[value(alias = "appendix-b")]
    ProbabilityRule,
}

impl DemoArg {
    fn name(self) -> &'static str {
        match self {
            DemoArg::Ocb => "ocb",
            DemoArg::ReversedOcb => "reversed-ocb",
            DemoArg::Timeflip => "timeflip",
            DemoArg::Inequivalence => "inequivalence",
            DemoArg::TfToTs => "tf-to-ts",
            DemoArg::ProbabilityRule => "probability-rule",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ControlArg {
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
    Plus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BuildTarget {
    Ocb,
    ReversedOcb,
    OcbAlice,
    OcbBob,
    ReversedOcbAlice,
    ReversedOcbBob,
    Trivial,
    Inequivalence,
    Qtf,
    MeasurePrepareZ,
    BobGated,
    Identity,
    RandomOperation,
}

fn load_process(path: &Path) -> Result<ProcessFamily, CliError> {
    match artifact::load(path)? {
        Artifact::Process(w) => Ok(w),
        other => Err(wrong_kind(path, "process", &other)),
    }
}

fn load_operation(path: &Path) -> Result<OperationFamily, CliError> {
    match artifact::load(path)? {
        Artifact::Operation(op) => Ok(op),
        other => Err(wrong_kind(path, "operation", &other)),
    }
}

fn wrong_kind(path: &Path, expected: &str, got: &Artifact) -> CliError {
    CliError::Schema {
        path: path.display().to_string(),
        message: format!("expected a {expected} artifact, found {}", got.kind()),
    }
}

fn parse_mode(mode: Option<&str>) -> Result<ConstraintMode, CliError> {
    match mode {
        None => Ok(ConstraintMode::General),
        Some(m) => ConstraintMode::parse(m).ok_or_else(|| {
            let names: Vec<_> = ConstraintMode::ALL.iter().map(|m| m.name()).collect();
            CliError::Usage(format!("unknown mode `{m}` (expected one of {})", names.join(", ")))
        }),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the report. Parse failures and `--help` come back as clap errors.
pub fn run(argv: &[String]) -> Result<(Cli, Result<Report, CliError>), clap::Error> {
    let cli = Cli::try_parse_from(argv)?;
    let start = Instant::now();
    let mut report = Report::new(argv.iter().skip(1).cloned().collect());
    let outcome = execute(&cli, &mut report).map(|()| {
        if cli.timing {
            report.wall_time_s = Some(start.elapsed().as_secs_f64());
        }
        report
    });
    Ok((cli, outcome))
}

fn execute(cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    if !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be a finite non-negative number, got {}", cli.tol)));
    }
    let tol = cli.tol;
    match &cli.command {
        Command::Validate { op, process, mode } => match (op, process) {
            (Some(path), None) => {
                if mode.is_some() {
                    return Err(CliError::Usage("--mode applies to processes only".into()));
                }
                let op = load_operation(path)?;
                report.passed = report.add_validation("operation", &validate_physical(&op, tol)?);
            }
            (None, Some(path)) => {
                let mode = parse_mode(mode.as_deref())?;
                let w = load_process(path)?;
                report.passed = report.add_validation("process", &validate_process(&w, mode, tol)?);
            }
            _ => return Err(CliError::Usage("give exactly one of --op or --process".into())),
        },
        Command::Classify { process } => {
            let w = load_process(process)?;
            let general = validate_process(&w, ConstraintMode::General, tol)?;
            report.add_validation("process", &general);
            let class = classify(&w, tol)?;
            report.detail("class", class.class.name());
            report.detail("requires_preselection", class.requires_preselection);
            report.detail("requires_postselection", class.requires_postselection);
            report.detail("preselection_present", w.preselection_present());
            report.detail("postselection_present", w.postselection_present());
            // a class is only meaningful for a valid process
            report.passed = general.passed();
        }
        Command::Simulate { process, op_a, op_b, out } => {
            let w = load_process(process)?;
            let a = load_operation(op_a)?;
            let b = load_operation(op_b)?;
            let d = joint_from_process(&w, &a, &b)?;
            artifact::save(&Artifact::Distribution(d.clone()), out, cli.pretty)?;
            report.value("normalization-error", d.normalization_error());
            report.value("min-entry", d.min_entry());
            report.value("max-entry", d.max_entry());
            let orders = check_order_compatibility(&d, tol)?;
            for c in &orders.checks {
                report.value(format!("order/{}", c.condition.name()), c.residual);
            }
            report.detail("out", out.display().to_string());
            report.passed = d.is_valid(tol);
        }
        Command::Inequality { dist, game, direction, u, v, convention } => {
            let d = match artifact::load(dist)? {
                Artifact::Distribution(d) => d,
                other => return Err(wrong_kind(dist, "distribution", &other)),
            };
            let opts = EvalOptions { u: *u, v: *v, convention: (*convention).into() };
            let r = inequalities::evaluate(&d, (*game).into(), (*direction).into(), &opts)?;
            let name = format!("{}/{}", r.game, r.direction);
            report.value(name.clone(), r.value);
            report.value(format!("{name}/bound"), r.bound);
            report.detail("violated", r.violated);
            // the inequality holding is a pass; a violation exits with 1
            report.passed = !r.violated;
        }
        Command::Oracle { game, direction, n_alpha, n_beta, convention, cap } => {
            let game: Game = (*game).into();
            let default = match game {
                Game::Gyni => 1,
                Game::Lgyni => 2,
            };
            let (na, nb) = (n_alpha.unwrap_or(default), n_beta.unwrap_or(default));
            let r = classical_bound_oracle(game, (*direction).into(), na, nb, (*convention).into(), *cap)?;
            report.value("bound", r.bound);
            report.value("wins", r.wins as f64);
            report.value("rounds", r.rounds as f64);
            report.value("strategies", r.strategies as f64);
            let order = match r.best.order {
                Order::AliceFirst => "A<=B",
                Order::BobFirst => "B<=A",
            };
            report.detail(
                "best-strategy",
                json!({ "order": order, "f": r.best.f, "g": r.best.g, "n_alpha": na, "n_beta": nb }),
            );
        }
        Command::Demo { name } => {
            demos::run(name.name(), DemoConfig { seed: cli.seed, tol }, report)?;
        }
        Command::Build { target, out, weight, control, incomes, outcomes, party } => {
            let a = build(*target, *weight, *control, *incomes, *outcomes, party, cli.seed)?;
            artifact::save(&a, out, cli.pretty)?;
            report.detail("kind", a.kind());
            report.detail("out", out.display().to_string());
        }
    }
    Ok(())
}

fn build(
    target: BuildTarget,
    weight: f64,
    control: ControlArg,
    incomes: usize,
    outcomes: usize,
    party: &str,
    seed: u64,
) -> Result<Artifact, CliError> {
    use BuildTarget as T;
    Ok(match target {
        T::Ocb => Artifact::Process(demos::ocb_experiment()?.0),
        T::ReversedOcb => Artifact::Process(demos::reversed_ocb_experiment()?.0),
        T::OcbAlice => Artifact::Operation(demos::ocb_experiment()?.1),
        T::OcbBob => Artifact::Operation(demos::ocb_experiment()?.2),
        T::ReversedOcbAlice => Artifact::Operation(demos::reversed_ocb_experiment()?.1),
        T::ReversedOcbBob => Artifact::Operation(demos::reversed_ocb_experiment()?.2),
        T::Trivial => Artifact::Process(trivial_process(2, 2)?),
        T::Inequivalence => Artifact::Process(build_inequivalence_w(weight)?),
        T::Qtf => {
            let c = match control {
                ControlArg::Zero => mats::ket_bra(0, 0, 2),
                ControlArg::One => mats::ket_bra(1, 1, 2),
                ControlArg::Plus => mats::half_plus(&mats::pauli_x(), 1.0),
            };
            let rho = LabeledOperator::single(A_I, mats::ket_bra(0, 0, 2))?
                .tensor(&LabeledOperator::single(B_I, c)?)?;
            Artifact::Process(build_qtf(&rho, None)?)
        }
        T::MeasurePrepareZ => Artifact::Operation(build_measure_prepare_z(party)?),
        T::BobGated => Artifact::Operation(build_bob_gated(party, GatedPreparation::MaximallyMixed)?),
        T::Identity => Artifact::Operation(identity_operation(party, 2)?),
        T::RandomOperation => Artifact::Operation(random_physical_operation(party, 2, incomes, outcomes, seed)?),
    })
}
