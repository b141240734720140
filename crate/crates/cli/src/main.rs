//! `privbounds`: bounds, sweeps, mechanisms and oracle checks for a joint
//! distribution stored as JSON (`{"p_xy": [[...], ...]}`, rows indexed by X).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use privacy_bounds::bounds::{bound_report, thresholds, write_csv};
use privacy_bounds::geometry::{compute_m, enumerate_omega1, omega_candidates};
use privacy_bounds::info::{conditional_entropy, entropy, mutual_information, Direction};
use privacy_bounds::lp::{build_lp, lower_bound_with};
use privacy_bounds::mechanisms::{efrl_construct, frl_construct, verify_mechanism};
use privacy_bounds::oracle::{sandwich_check, OracleBudget};
use privacy_bounds::{Criterion, Error, Joint, LogBase};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Validate,
    Measures,
    Bounds,
    Sweep,
    Mechanism,
    OracleVerify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

impl CriterionArg {
    fn criteria(self) -> Vec<Criterion> {
        match self {
            CriterionArg::One => vec![Criterion::One],
            CriterionArg::Two => vec![Criterion::Two],
            CriterionArg::Both => vec![Criterion::One, Criterion::Two],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaseArg {
    Bits,
    Nats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Construct {
    Lp,
    Frl,
    Efrl,
}

/// Privacy-utility bounds under per-letter l1 leakage constraints.
#[derive(Debug, Parser)]
#[command(name = "privbounds", version, allow_negative_numbers = true)]
struct RunConfig {
    /// Joint distribution JSON.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    command: Command,
    /// Single leakage budget.
    #[arg(long, conflicts_with_all = ["eps_start", "eps_stop"])]
    eps: Option<f64>,
    #[arg(long)]
    eps_start: Option<f64>,
    #[arg(long)]
    eps_stop: Option<f64>,
    #[arg(long, default_value_t = 50)]
    eps_count: usize,
    #[arg(long, value_enum, default_value = "both")]
    criterion: CriterionArg,
    #[arg(long, value_enum, default_value = "bits")]
    base: BaseArg,
    /// Seed for the oracle's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent (required for `sweep`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the mechanism LP in CPLEX LP format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Write every candidate index set with its status as JSON.
    #[arg(long)]
    dump_omega: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lp")]
    construct: Construct,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
    Sandwich,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::from(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(
                Error::Infeasible
                | Error::Unbounded
                | Error::NoFeasiblePoint
                | Error::InfeasiblePoint { .. }
                | Error::EmptyOmega1
                | Error::RegimeViolation { .. }
                | Error::BisectionFailure { .. },
            ) => 2,
            Failure::Core(_) | Failure::Usage(_) => 1,
            Failure::Sandwich => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => format!("{e:?}: {e}"),
            Failure::Usage(m) => m.clone(),
            Failure::Sandwich => "sandwich check failed".into(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load(config: &RunConfig) -> Outcome<Joint> {
    let text = fs::read_to_string(&config.input)?;
    let base = match config.base {
        BaseArg::Bits => LogBase::Bits,
        BaseArg::Nats => LogBase::Nats,
    };
    Ok(Joint::from_json(&text)?.with_log_base(base))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect()
}

/// The explicit ε, the explicit grid, or the default figure grid: 0 to
/// 1.2·ε₂ for criterion 2, 0 to 0.05 for criterion 1, the wider of the
/// two for both.
fn eps_grid(config: &RunConfig, joint: &Joint) -> Outcome<Vec<f64>> {
    if config.eps_count == 0 {
        return Err(Failure::Usage("--eps-count must be at least 1".into()));
    }
    let grid = match (config.eps, config.eps_start, config.eps_stop) {
        (Some(e), _, _) => vec![e],
        (None, Some(a), Some(b)) => {
            if b < a {
                return Err(Failure::Usage(
                    "--eps-stop must not be below --eps-start".into(),
                ));
            }
            linspace(a, b, config.eps_count)
        }
        (None, None, None) => {
            let e2 = thresholds(joint).epsilon2;
            let stop2 = e2.map(|e| 1.2 * e);
            let stop = match config.criterion {
                CriterionArg::One => 0.05,
                CriterionArg::Two => stop2.ok_or(Error::EmptyOmega1)?,
                CriterionArg::Both => stop2.map_or(0.05, |s| s.max(0.05)),
            };
            linspace(0.0, stop, config.eps_count)
        }
        _ => {
            return Err(Failure::Usage(
                "--eps-start and --eps-stop go together".into(),
            ))
        }
    };
    if grid.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Failure::Usage(
            "eps values must be finite and nonnegative".into(),
        ));
    }
    Ok(grid)
}

fn single_eps(config: &RunConfig) -> Outcome<f64> {
    match config.eps {
        Some(e) if e.is_finite() && e >= 0.0 => Ok(e),
        Some(e) => Err(Failure::Usage(format!(
            "eps must be finite and nonnegative, got {e}"
        ))),
        None => Err(Failure::Usage("this command needs --eps".into())),
    }
}

fn validate(joint: &Joint, config: &RunConfig) -> Outcome<()> {
    let doc = json!({
        "x_size": joint.x_size(),
        "y_size": joint.y_size(),
        "full_row_rank": joint.is_full_row_rank(),
        "x_smaller_than_y": joint.has_strictly_smaller_x(),
        "x_is_function_of_y": joint.x_is_function_of_y(),
        "polytope_support": joint.require_polytope_support().is_ok(),
    });
    emit(config.out.as_deref(), &pretty(&doc))
}

fn measures(joint: &Joint, config: &RunConfig) -> Outcome<()> {
    let base = joint.log_base();
    let doc = json!({
        "log_base": format!("{base:?}").to_lowercase(),
        "h_x": entropy(joint.p_x(), base),
        "h_y": entropy(joint.p_y(), base),
        "h_x_given_y": conditional_entropy(joint, Direction::XGivenY),
        "h_y_given_x": conditional_entropy(joint, Direction::YGivenX),
        "mutual_information": mutual_information(joint),
        "min_p_x": joint.min_p_x(),
        "thresholds": thresholds(joint),
    });
    emit(config.out.as_deref(), &pretty(&doc))
}

fn bounds(joint: &Joint, config: &RunConfig) -> Outcome<()> {
    let grid = eps_grid(config, joint)?;
    let reports = bound_report(joint, &grid)?;
    let doc = serde_json::to_value(&reports).expect("reports serialize");
    emit(config.out.as_deref(), &pretty(&doc))
}

fn sweep(joint: &Joint, config: &RunConfig) -> Outcome<()> {
    let out = config
        .out
        .as_deref()
        .ok_or_else(|| Failure::Usage("sweep needs --out".into()))?;
    let grid = eps_grid(config, joint)?;
    let reports = bound_report(joint, &grid)?;
    write_csv(&reports, fs::File::create(out)?)?;
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".thresholds.json");
    let doc = serde_json::to_value(thresholds(joint)).expect("thresholds serialize");
    fs::write(PathBuf::from(sidecar), pretty(&doc))?;
    Ok(())
}

fn dump_geometry(joint: &Joint, config: &RunConfig, eps: f64, criterion: Criterion) -> Outcome<()> {
    if config.dump_lp.is_none() && config.dump_omega.is_none() {
        return Ok(());
    }
    let m = compute_m(joint)?;
    if let Some(path) = &config.dump_omega {
        let candidates = omega_candidates(&m, joint.p_y());
        fs::write(
            path,
            pretty(&serde_json::to_value(&candidates).expect("candidates serialize")),
        )?;
    }
    if let Some(path) = &config.dump_lp {
        let omega1 = enumerate_omega1(&m, joint.p_y())?;
        let problem = build_lp(joint, eps, criterion, &omega1)?;
        fs::write(path, problem.program.to_lp_format())?;
    }
    Ok(())
}

fn mechanism(joint: &Joint, config: &RunConfig) -> Outcome<()> {
    let eps = single_eps(config)?;
    let doc = match config.construct {
        Construct::Lp => {
            let criterion = match config.criterion {
                CriterionArg::One => Criterion::One,
                CriterionArg::Two => Criterion::Two,
                CriterionArg::Both => {
                    return Err(Failure::Usage(
                        "--construct lp needs --criterion 1 or 2".into(),
                    ))
                }
            };
            dump_geometry(joint, config, eps, criterion)?;
            let m = compute_m(joint)?;
            let omega1 = enumerate_omega1(&m, joint.p_y())?;
            let (utility, designed) = lower_bound_with(joint, eps, criterion, &omega1)?;
            let report = verify_mechanism(&designed.mechanism, joint, criterion, eps)?;
            json!({
                "construct": "lp",
                "criterion": criterion,
                "eps": eps,
                "utility": utility,
                "approx_value": designed.approx_value,
                "linearized_conditional_entropy": designed.linearized_conditional_entropy,
                "exact_conditional_entropy": designed.exact_conditional_entropy,
                "letters": designed.letters.iter().map(|l| json!({
                    "omega": l.omega,
                    "p_u": l.p_u,
                    "posterior": l.posterior,
                    "j": l.j.as_slice(),
                })).collect::<Vec<_>>(),
                "mechanism": designed.mechanism.to_document(),
                "verification": report,
            })
        }
        Construct::Frl => {
            let frl = frl_construct(joint);
            let report = verify_mechanism(&frl.mechanism, joint, Criterion::One, eps)?;
            json!({
                "construct": "frl",
                "eps": eps,
                "u_alphabet_size": frl.u_alphabet_size,
                "masses": frl.masses,
                "reconstruction": frl.reconstruction,
                "mechanism": frl.mechanism.to_document(),
                "verification": report,
            })
        }
        Construct::Efrl => {
            let (m, diagnostics) = efrl_construct(joint, eps)?;
            let report = verify_mechanism(&m, joint, Criterion::One, eps)?;
            json!({
                "construct": "efrl",
                "eps": eps,
                "diagnostics": diagnostics,
                "mechanism": m.to_document(),
                "verification": report,
            })
        }
    };
    emit(config.out.as_deref(), &pretty(&doc))
}

fn oracle_verify(joint: &Joint, config: &RunConfig) -> Outcome<()> {
    let grid = eps_grid(config, joint)?;
    let budget = OracleBudget {
        seed: config.seed,
        ..OracleBudget::default()
    };
    let mut reports = Vec::new();
    let mut pass = true;
    for c in config.criterion.criteria() {
        let rep = sandwich_check(joint, &grid, c, &budget)?;
        eprint!("{}", rep.to_table());
        pass &= rep.pass;
        reports.push(rep);
    }
    let doc = serde_json::to_value(&reports).expect("sandwich reports serialize");
    emit(config.out.as_deref(), &pretty(&doc))?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Sandwich)
    }
}

fn run(config: &RunConfig) -> Outcome<()> {
    let joint = load(config)?;
    match config.command {
        Command::Validate => validate(&joint, config),
        Command::Measures => measures(&joint, config),
        Command::Bounds => bounds(&joint, config),
        Command::Sweep => sweep(&joint, config),
        Command::Mechanism => mechanism(&joint, config),
        Command::OracleVerify => oracle_verify(&joint, config),
    }
}

fn main() -> ExitCode {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("privbounds: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
