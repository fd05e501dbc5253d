//! `blowup-stability`: slope stability of pulled-back bundles on blow-ups.
//!
//! Exit codes: 0 stable / interior / converged, 10 semistable / boundary,
//! 20 unstable / outside / divergent, 30 inconclusive (two-term mode),
//! 2 invalid input, 1 runtime failure.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blowup_core::cone::{cone_position, moment_weight, weight_vectors, DualGenerator, Position};
use blowup_core::doc::{load_instance, sweep_csv, DocError, LoadedInstance, Mode, Report};
use blowup_core::eps::{format_rational, parse_rational, Rational};
use blowup_core::moment::sweep::{eps_sweep, geometric_schedule, SweepOptions};
use blowup_core::moment::{flow_feasibility, solve_moment_map, MomentProblem, SolveOutcome, SolverOptions};
use blowup_core::par::{self, Execution};
use blowup_core::slope::{decide_stability, two_term_decide, StabilityKind, SubsheafIndex, TwoTermVerdict};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Signed;

const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SEMISTABLE: u8 = 10;
const EXIT_UNSTABLE: u8 = 20;
const EXIT_INCONCLUSIVE: u8 = 30;

#[derive(Parser)]
#[command(
    name = "blowup-stability",
    version,
    about = "Slope stability of pullbacks to blow-ups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide stability for all small ε > 0.
    Decide {
        instance: PathBuf,
        /// Defaults to the document's `options.mode`, else `full`.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        format: Format,
    },
    /// Weight cone, dual-cone generators and the position of the moment weight.
    Cone {
        instance: PathBuf,
        #[command(flatten)]
        format: Format,
    },
    /// Solve the moment-map equation at one ε.
    Solve {
        instance: PathBuf,
        /// Rational ε > 0, e.g. `1/10`.
        #[arg(long, value_parser = rational_arg)]
        eps: Rational,
        #[arg(long, default_value_t = SolverOptions::default().tol)]
        tol: f64,
        #[command(flatten)]
        format: Format,
    },
    /// Solve along a geometric schedule of ε values.
    Sweep {
        instance: PathBuf,
        #[arg(long, value_parser = rational_arg, default_value = "1/10")]
        eps_start: Rational,
        #[arg(long, value_parser = rational_arg, default_value = "1/2")]
        eps_factor: Rational,
        /// Number of rows.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Write the table as CSV to this path (`-` for stdout).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, default_value_t = SolverOptions::default().tol)]
        tol: f64,
    },
    /// Check an instance document without deciding anything.
    Validate { instance: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    TwoTerm,
}

#[derive(Args, Clone, Copy)]
#[group(multiple = false)]
struct Format {
    /// Machine-readable report (default).
    #[arg(long)]
    json: bool,
    /// Human-readable summary.
    #[arg(long)]
    text: bool,
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(e: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    fn internal(e: impl ToString) -> Self {
        Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        }
    }
}

impl From<DocError> for Failure {
    fn from(e: DocError) -> Self {
        Failure::input(e)
    }
}

fn read_source(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(Failure::input)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path, require_connected: bool) -> Result<LoadedInstance, Failure> {
    Ok(load_instance(&read_source(path)?, require_connected)?)
}

fn set(s: &SubsheafIndex) -> String {
    let items: Vec<String> = s.one_based().iter().map(ToString::to_string).collect();
    format!("{{{}}}", items.join(","))
}

fn vector(v: &[Rational]) -> String {
    let items: Vec<String> = v.iter().map(format_rational).collect();
    format!("({})", items.join(", "))
}

fn emit(report: &Report, text: Option<String>, format: Format) {
    match text {
        Some(t) if format.text => print!("{t}"),
        _ => print!("{}", report.to_json()),
    }
}

fn kind_code(kind: StabilityKind) -> u8 {
    match kind {
        StabilityKind::Stable => 0,
        StabilityKind::Semistable => EXIT_SEMISTABLE,
        StabilityKind::Unstable => EXIT_UNSTABLE,
    }
}

fn position_code(p: Position) -> u8 {
    match p {
        Position::Interior => 0,
        Position::Boundary => EXIT_SEMISTABLE,
        Position::Outside => EXIT_UNSTABLE,
    }
}

fn decide(path: &Path, mode: Option<ModeArg>, format: Format) -> Result<u8, Failure> {
    let loaded = load(path, true)?;
    let mode = match (mode, loaded.mode) {
        (Some(ModeArg::TwoTerm), _) | (None, Mode::TwoTerm) => Mode::TwoTerm,
        _ => Mode::Full,
    };
    let inst = &loaded.instance;
    if mode == Mode::TwoTerm {
        let v = two_term_decide(inst).map_err(Failure::input)?;
        let (text, code) = match &v {
            TwoTermVerdict::Stable => ("verdict: Stable (two-term)\n".to_string(), 0),
            TwoTermVerdict::Inconclusive { failing } => (
                format!("verdict: Inconclusive (two-term)\nfailing subsheaf: {}\n", set(failing)),
                EXIT_INCONCLUSIVE,
            ),
        };
        emit(&Report::two_term(&v), Some(text), format);
        return Ok(code);
    }
    let v = decide_stability(inst);
    let mut text = format!("verdict: {}\n", v.kind);
    match &v.epsilon_threshold {
        Some(iv) => {
            let _ = writeln!(
                text,
                "valid for 0 < ε < {} (first root in [{}, {}])",
                format_rational(&iv.lo),
                format_rational(&iv.lo),
                format_rational(&iv.hi)
            );
        }
        None => text.push_str("valid for 0 < ε ≤ 1\n"),
    }
    if let Some(w) = &v.witness {
        let _ = writeln!(text, "witness: {}", set(w));
    }
    emit(&Report::decide(&v), Some(text), format);
    Ok(kind_code(v.kind))
}

fn generator_line(g: &DualGenerator) -> String {
    format!(
        "I- = {}  I+ = {}  v = {}",
        set(&g.minus),
        set(&g.plus),
        vector(&g.coords)
    )
}

fn cone(path: &Path, format: Format) -> Result<u8, Failure> {
    let loaded = load(path, false)?;
    let inst = &loaded.instance;
    let cp = cone_position(inst).map_err(Failure::input)?;
    let weights: Vec<Vec<i64>> = weight_vectors(inst).into_iter().map(|w| w.coords).collect();
    let mw = moment_weight(inst);
    let mut text = format!("weights: {}\ngenerators:\n", weights.len());
    for g in &cp.generators {
        let _ = writeln!(text, "  {}", generator_line(g));
    }
    let _ = writeln!(text, "position: {:?}", cp.position);
    if let Some(c) = &cp.certificate {
        let _ = writeln!(text, "certificate: {}", generator_line(c));
    }
    emit(&Report::cone(weights, mw.w, &cp), Some(text), format);
    Ok(position_code(cp.position))
}

fn solve(path: &Path, eps: &Rational, tol: f64, format: Format) -> Result<u8, Failure> {
    if !eps.is_positive() {
        return Err(Failure::input(format!(
            "ε must be positive, got {}",
            format_rational(eps)
        )));
    }
    let loaded = load(path, true)?;
    let prob = MomentProblem::from_instance(&loaded.instance, eps, loaded.b0_sq.as_deref()).map_err(Failure::input)?;
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    let out = solve_moment_map(&prob, &opts).map_err(Failure::internal)?;
    let flow = flow_feasibility(&prob);
    let sol = out.solution();
    let mut text = format!(
        "status: {:?}\nresidual: {:.3e}\nb_norm: {:.6e}\nnewton iterations: {}\n",
        out.position(),
        sol.residual,
        sol.b_norm,
        sol.iterations
    );
    let _ = writeln!(text, "t: {:?}", sol.t);
    if let SolveOutcome::Boundary(e) | SolveOutcome::Divergent(e) = &out {
        if let Some(c) = &e.certificate {
            let _ = writeln!(text, "certificate: {}", generator_line(c));
        }
        let _ = writeln!(text, "direction: {:?}", e.direction);
    }
    let _ = writeln!(text, "exact flow: {:?}", flow.position());
    emit(&Report::solve(eps, &out, &flow), Some(text), format);
    Ok(position_code(out.position()))
}

struct SweepArgs {
    eps_start: Rational,
    eps_factor: Rational,
    steps: usize,
    csv: Option<PathBuf>,
    jobs: usize,
    tol: f64,
}

fn sweep(path: &Path, a: SweepArgs) -> Result<u8, Failure> {
    if !a.eps_start.is_positive() || !a.eps_factor.is_positive() {
        return Err(Failure::input("--eps-start and --eps-factor must be positive"));
    }
    let loaded = load(path, true)?;
    let schedule = geometric_schedule(&a.eps_start, &a.eps_factor, a.steps);
    let opts = SweepOptions {
        solver: SolverOptions {
            tol: a.tol,
            ..SolverOptions::default()
        },
        b0_sq: loaded.b0_sq.clone(),
        exec: if a.jobs == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let rows = par::with_jobs(a.jobs, || eps_sweep(&loaded.instance, &schedule, &opts));
    match &a.csv {
        Some(p) if p == Path::new("-") => print!("{}", sweep_csv(&rows)),
        Some(p) => {
            fs::write(p, sweep_csv(&rows))
                .map_err(|e| Failure::internal(format!("cannot write {}: {e}", p.display())))?;
            print!("{}", Report::sweep(&rows).to_json());
        }
        None => print!("{}", Report::sweep(&rows).to_json()),
    }
    Ok(0)
}

fn validate(path: &Path) -> Result<u8, Failure> {
    let loaded = load(path, true)?;
    let inst = &loaded.instance;
    println!(
        "ok: n = {}, m = {}, {} components, {} edges",
        inst.ambient().n(),
        inst.ambient().m(),
        inst.len(),
        inst.quiver().len()
    );
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Decide { instance, mode, format } => decide(&instance, mode, format),
        Command::Cone { instance, format } => cone(&instance, format),
        Command::Solve {
            instance,
            eps,
            tol,
            format,
        } => solve(&instance, &eps, tol, format),
        Command::Sweep {
            instance,
            eps_start,
            eps_factor,
            steps,
            csv,
            jobs,
            tol,
        } => sweep(
            &instance,
            SweepArgs {
                eps_start,
                eps_factor,
                steps,
                csv,
                jobs,
                tol,
            },
        ),
        Command::Validate { instance } => validate(&instance),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
