//! Command-line front end: single solves, target sweeps, ABP against BA
//! benchmarks, analytic oracle tables and sample ingestion.
//!
//! Exit codes: 0 success, 1 infeasible target, 2 numerical failure,
//! 3 I/O, parse or validation error (including usage errors).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::ba::{ba_adaptive, DEFAULT_CURVE_TOL};
use crate::diagnostics::{kkt_residual, write_trajectory_csv};
use crate::error::{IbError, Result};
use crate::ingest::{bin_samples, load_problem, save_problem, SampleTable};
use crate::oracles::{bernoulli_problem, gaussian_problem, AnalyticCurve};
use crate::plot;
use crate::prob::IbProblem;
use crate::solver::{hat_i, solve_ir, solve_ri, Mode, SolveReport, SolverConfig, SolverState};

/// Environment variable bounding the sweep/bench worker pool.
pub const THREADS_ENV: &str = "IB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "ib-abp", version, about = "Information bottleneck curves by alternating Bregman projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// R(I): minimal I(T;X) subject to I(T;Y) ≥ target.
    SolveRi {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        target_i: f64,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// I(R): maximal I(T;Y) subject to I(T;X) ≤ target.
    SolveIr {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        target_r: f64,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Solve a strictly increasing list of targets and write one CSV row each.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value = "ri")]
        mode: ModeArg,
        #[command(flatten)]
        targets: TargetArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Information-plane plot of the achieved points.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write 0 in the wall_time_ms column and omit the timestamp so repeated
        /// runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// ABP against adaptive Blahut–Arimoto on the same relevance targets.
    Bench {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        targets: TargetArgs,
        #[arg(long, default_value_t = DEFAULT_CURVE_TOL)]
        curve_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Tabulate the analytic R(I) curve of a built-in model.
    Oracle {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, default_value_t = 0.15)]
        e: f64,
        #[arg(long, default_value_t = 1.0)]
        snr: f64,
        /// lo:hi:count, inclusive.
        #[arg(long, value_parser = parse_grid)]
        i_grid: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bin a labelled sample CSV into a problem file.
    Ingest {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        unit: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[arg(long, value_enum, conflicts_with = "problem")]
    model: Option<Model>,
    /// Problem JSON file (`{"p": [..], "s": [[..]]}`).
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    e: f64,
    #[arg(long, default_value_t = 1.0)]
    snr: f64,
    #[arg(long, default_value_t = 10.0)]
    half_width: f64,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Bottleneck cardinality; defaults to the size of the X alphabet.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 3000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    objective_tol: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the trajectories from the JSON report.
    #[arg(long)]
    no_trajectories: bool,
    /// iteration,objective,residual,lambda rows.
    #[arg(long)]
    trajectory_csv: Option<PathBuf>,
    /// Log-scale plot of the residual trajectory.
    #[arg(long)]
    residual_svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    targets: Option<Vec<f64>>,
    /// lo:hi:count, inclusive.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Bernoulli,
    Gaussian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Ri,
    Ir,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Grid {
    lo: f64,
    hi: f64,
    count: usize,
}

impl Grid {
    fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lo + step * i as f64).collect()
    }
}

fn parse_grid(text: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(format!("expected lo:hi:count, got '{text}'"));
    };
    let lo: f64 = lo.parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    let count: usize = count.parse().map_err(|_| format!("bad count '{count}'"))?;
    if count == 0 || !(hi >= lo) || (count == 1 && hi != lo) {
        return Err(format!("empty or reversed grid '{text}'"));
    }
    Ok(Grid { lo, hi, count })
}

impl TargetArgs {
    fn resolve(&self) -> Result<Vec<f64>> {
        let targets = match (&self.targets, &self.grid) {
            (Some(t), _) => t.clone(),
            (None, Some(g)) => g.points(),
            (None, None) => unreachable!("clap enforces one target source"),
        };
        if let Some(w) = targets.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(IbError::Domain(format!(
                "targets must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(targets)
    }
}

struct Source {
    problem: IbProblem,
    curve: Option<AnalyticCurve>,
    label: String,
}

impl ProblemArgs {
    fn load(&self) -> Result<Source> {
        match (&self.problem, self.model) {
            (Some(path), _) => Ok(Source {
                problem: load_problem(path)?,
                curve: None,
                label: format!("file={}", path.display()),
            }),
            (None, Some(Model::Bernoulli)) => Ok(Source {
                problem: bernoulli_problem(self.e)?,
                curve: Some(AnalyticCurve::Bernoulli { e: self.e }),
                label: format!("bernoulli e={}", self.e),
            }),
            (None, Some(Model::Gaussian)) => Ok(Source {
                problem: gaussian_problem(self.snr, self.half_width, self.m, self.k)?,
                curve: Some(AnalyticCurve::Gaussian { snr: self.snr }),
                label: format!(
                    "gaussian snr={} L={} M={} K={}",
                    self.snr, self.half_width, self.m, self.k
                ),
            }),
            (None, None) => Err(IbError::Domain("one of --model or --problem is required".into())),
        }
    }
}

impl SolverArgs {
    fn config(&self, problem: &IbProblem) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            max_iter: self.max_iter,
            objective_tol: self.objective_tol,
            ..SolverConfig::new(self.n.unwrap_or(problem.m()), self.seed)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| IbError::io(path, e))?))
}

fn emit(path: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = open_out(p)?;
            f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| IbError::io(p, e))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| IbError::io("<stdout>", e)),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| IbError::Domain(format!("{THREADS_ENV}='{v}' is not a positive integer")))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| IbError::NumericalFailure(format!("worker pool: {e}")))
}

fn stamp(no_timing: bool) -> String {
    if no_timing {
        String::new()
    } else {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!(" generated_unix={secs}")
    }
}

fn write_report(report: &SolveReport, args: &ReportArgs, stdout: &mut dyn Write) -> Result<()> {
    let limit = args.no_trajectories.then_some(0);
    emit(args.out.as_deref(), stdout, &(report.to_json(limit) + "\n"))?;
    if let Some(path) = &args.trajectory_csv {
        write_trajectory_csv(report, open_out(path)?)?;
    }
    if let Some(path) = &args.residual_svg {
        let svg = plot::residual_trajectories(&[("residual".into(), report.residual_trajectory.clone())]);
        emit(Some(path), stdout, &svg)?;
    }
    Ok(())
}

fn check_feasible(problem: &IbProblem, mode: Mode, targets: &[f64]) -> Result<()> {
    if mode == Mode::Ri {
        let limit = problem.mutual_information();
        if let Some(&t) = targets.iter().find(|&&t| t > limit * (1.0 + 1e-9)) {
            return Err(IbError::InfeasibleTarget { target: t, limit });
        }
    }
    if let Some(&t) = targets.iter().find(|&&t| !(t >= 0.0)) {
        return Err(IbError::Domain(format!("target {t} must be non-negative")));
    }
    Ok(())
}

fn csv_writer(path: Option<&Path>, stdout: &mut dyn Write, body: Vec<u8>, meta: String) -> Result<()> {
    let mut text = meta.into_bytes();
    text.extend(body);
    emit(path, stdout, &String::from_utf8(text).expect("csv is utf-8"))
}

fn csv_error(e: csv::Error) -> IbError {
    IbError::Parse { context: "csv output".into(), message: e.to_string() }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    problem_args: &ProblemArgs,
    solver_args: &SolverArgs,
    mode: Mode,
    targets: &[f64],
    out: Option<&Path>,
    svg: Option<&Path>,
    no_timing: bool,
    stdout: &mut dyn Write,
) -> Result<()> {
    let source = problem_args.load()?;
    let cfg = solver_args.config(&source.problem)?;
    check_feasible(&source.problem, mode, targets)?;
    let problem = &source.problem;
    let reports: Vec<Result<SolveReport>> = thread_pool()?.install(|| {
        targets
            .par_iter()
            .map(|&t| match mode {
                Mode::Ri => solve_ri(problem, t, &cfg),
                Mode::Ir => solve_ir(problem, t, &cfg),
            })
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "target", "value", "i_tx", "i_ty", "lambda", "iterations", "converged", "residual", "wall_time_ms",
    ])
    .map_err(csv_error)?;
    for r in &reports {
        let ms = if no_timing { 0.0 } else { r.wall_time_ms };
        wtr.write_record([
            r.target.to_string(),
            r.value.to_string(),
            r.i_tx.to_string(),
            r.i_ty.to_string(),
            r.lambda.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.final_residual.to_string(),
            format!("{ms:.3}"),
        ])
        .map_err(csv_error)?;
    }
    let body = wtr.into_inner().map_err(|e| IbError::io("csv buffer", e.into_error()))?;
    let meta = format!(
        "# ib-abp sweep mode={mode:?} {} n={} seed={}{}\n",
        source.label,
        cfg.cardinality_n,
        cfg.rng_seed,
        stamp(no_timing)
    );
    csv_writer(out, stdout, body, meta)?;

    if let Some(path) = svg {
        let points: Vec<(f64, f64)> = reports.iter().map(|r| (r.i_ty, r.i_tx)).collect();
        let analytic = source.curve.and_then(|c| {
            let cap = c.max_information().ok()?;
            (0..=200)
                .map(|i| {
                    let x = cap * i as f64 / 200.0 * (1.0 - 1e-9);
                    c.eval(x).ok().map(|y| (x, y))
                })
                .collect::<Option<Vec<_>>>()
        });
        emit(Some(path), stdout, &plot::information_plane(&points, analytic.as_deref()))?;
    }
    Ok(())
}

struct BenchRow {
    algorithm: &'static str,
    target: f64,
    value: f64,
    i_tx: f64,
    i_ty: f64,
    iterations: usize,
    trials: usize,
    residual: f64,
    wall_time_ms: f64,
}

fn bench_target(problem: &IbProblem, target: f64, curve_tol: f64, cfg: &SolverConfig) -> Result<[BenchRow; 2]> {
    let abp = solve_ri(problem, target, cfg)?;
    let started = Instant::now();
    let ba = ba_adaptive(problem, target, curve_tol, cfg)?;
    let ba_ms = started.elapsed().as_secs_f64() * 1e3;
    let state = SolverState::from_encoder(ba.point.w.clone(), problem, ba.point.beta, cfg.log_floor)?;
    let ba_residual = kkt_residual(&state, problem, hat_i(target, problem.q()));
    Ok([
        BenchRow {
            algorithm: "ABP",
            target,
            value: abp.value,
            i_tx: abp.i_tx,
            i_ty: abp.i_ty,
            iterations: abp.iterations,
            trials: 1,
            residual: abp.final_residual,
            wall_time_ms: abp.wall_time_ms,
        },
        BenchRow {
            algorithm: "BA",
            target,
            value: ba.point.i_tx,
            i_tx: ba.point.i_tx,
            i_ty: ba.point.i_ty,
            iterations: ba.inner_iterations,
            trials: ba.trials,
            residual: ba_residual,
            wall_time_ms: ba_ms,
        },
    ])
}

fn bench(
    problem_args: &ProblemArgs,
    solver_args: &SolverArgs,
    targets: &[f64],
    curve_tol: f64,
    out: Option<&Path>,
    no_timing: bool,
    stdout: &mut dyn Write,
) -> Result<()> {
    let source = problem_args.load()?;
    let cfg = solver_args.config(&source.problem)?;
    let problem = &source.problem;
    let limit = problem.mutual_information();
    if let Some(&t) = targets.iter().find(|&&t| t >= limit) {
        return Err(IbError::InfeasibleTarget { target: t, limit });
    }
    let rows: Vec<Result<[BenchRow; 2]>> = thread_pool()?
        .install(|| targets.par_iter().map(|&t| bench_target(problem, t, curve_tol, &cfg)).collect());
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "algorithm", "target", "value", "i_tx", "i_ty", "iterations", "trials", "residual", "wall_time_ms",
    ])
    .map_err(csv_error)?;
    for row in rows.iter().flatten() {
        let ms = if no_timing { 0.0 } else { row.wall_time_ms };
        wtr.write_record([
            row.algorithm.to_string(),
            row.target.to_string(),
            row.value.to_string(),
            row.i_tx.to_string(),
            row.i_ty.to_string(),
            row.iterations.to_string(),
            row.trials.to_string(),
            row.residual.to_string(),
            format!("{ms:.3}"),
        ])
        .map_err(csv_error)?;
    }
    let body = wtr.into_inner().map_err(|e| IbError::io("csv buffer", e.into_error()))?;
    let meta = format!(
        "# ib-abp bench {} n={} seed={} curve_tol={curve_tol}{}\n",
        source.label,
        cfg.cardinality_n,
        cfg.rng_seed,
        stamp(no_timing)
    );
    csv_writer(out, stdout, body, meta)
}

fn oracle(model: Model, e: f64, snr: f64, grid: Grid, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let curve = match model {
        Model::Bernoulli => AnalyticCurve::Bernoulli { e },
        Model::Gaussian => AnalyticCurve::Gaussian { snr },
    };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["i", "r"]).map_err(csv_error)?;
    for i in grid.points() {
        let r = curve.eval(i)?;
        wtr.write_record([i.to_string(), r.to_string()]).map_err(csv_error)?;
    }
    let body = wtr.into_inner().map_err(|e| IbError::io("csv buffer", e.into_error()))?;
    emit(out, stdout, &String::from_utf8(body).expect("csv is utf-8"))
}

fn ingest(samples: &Path, unit: f64, out: &Path, stdout: &mut dyn Write) -> Result<()> {
    let table = SampleTable::read_csv(samples)?;
    let binned = bin_samples(&table, unit)?;
    save_problem(&binned.problem, out)?;
    writeln!(
        stdout,
        "{} samples -> {} occupied bins, {} labels, I(X;Y) = {:.6} nats",
        table.len(),
        binned.problem.m(),
        binned.problem.k(),
        binned.problem.mutual_information()
    )
    .map_err(|e| IbError::io("<stdout>", e))
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::SolveRi { problem, solver, target_i, report } => {
            let source = problem.load()?;
            let cfg = solver.config(&source.problem)?;
            write_report(&solve_ri(&source.problem, target_i, &cfg)?, &report, stdout)
        }
        Command::SolveIr { problem, solver, target_r, report } => {
            let source = problem.load()?;
            let cfg = solver.config(&source.problem)?;
            write_report(&solve_ir(&source.problem, target_r, &cfg)?, &report, stdout)
        }
        Command::Sweep { problem, solver, mode, targets, out, svg, no_timing } => {
            let mode = match mode {
                ModeArg::Ri => Mode::Ri,
                ModeArg::Ir => Mode::Ir,
            };
            let targets = targets.resolve()?;
            sweep(&problem, &solver, mode, &targets, out.as_deref(), svg.as_deref(), no_timing, stdout)
        }
        Command::Bench { problem, solver, targets, curve_tol, out, no_timing } => {
            let targets = targets.resolve()?;
            bench(&problem, &solver, &targets, curve_tol, out.as_deref(), no_timing, stdout)
        }
        Command::Oracle { model, e, snr, i_grid, out } => oracle(model, e, snr, i_grid, out.as_deref(), stdout),
        Command::Ingest { samples, unit, out } => ingest(&samples, unit, &out, stdout),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("ib-abp").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.04:0.20:5").unwrap();
        assert_eq!(g.points().len(), 5);
        assert!((g.points()[4] - 0.20).abs() < 1e-15);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert_eq!(parse_grid("0.5:0.5:1").unwrap().points(), vec![0.5]);
    }

    #[test]
    fn usage_errors_exit_3_and_help_exits_0() {
        let (code, _, err) = run_args(&["solve-ri", "--bogus"]);
        assert_eq!(code, 3);
        assert!(err.contains("--bogus"));
        assert_eq!(run_args(&["--help"]).0, 0);
        assert_eq!(run_args(&[]).0, 3);
    }

    #[test]
    fn solve_ri_to_stdout() {
        let (code, out, _) =
            run_args(&["solve-ri", "--model", "bernoulli", "--e", "0.15", "--target-i", "0.062566", "--no-trajectories"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["value"].as_f64().unwrap() - 0.130812).abs() < 5e-4);
        assert_eq!(v["objective_trajectory"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn infeasible_exits_1() {
        let (code, _, err) = run_args(&["solve-ri", "--model", "bernoulli", "--target-i", "0.5"]);
        assert_eq!(code, 1, "{err}");
        let (code, _, _) = run_args(&["sweep", "--model", "bernoulli", "--targets", "0.1,0.5"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn sweep_rejects_unsorted_targets() {
        let (code, _, err) = run_args(&["sweep", "--model", "bernoulli", "--targets", "0.1,0.05"]);
        assert_eq!(code, 3);
        assert!(err.contains("strictly increasing"));
    }

    #[test]
    fn oracle_to_stdout() {
        let (code, out, _) = run_args(&["oracle", "--model", "bernoulli", "--e", "0.15", "--i-grid", "0:0.2:3"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 4);
        assert_eq!(out.lines().next(), Some("i,r"));
    }
}
