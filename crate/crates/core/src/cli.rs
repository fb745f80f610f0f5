//! Command-line front end.
//!
//! Every subcommand reads a flat configuration (see [`crate::config`]) from
//! `--config`, applies `--set key=value` overrides, and writes CSV or field
//! files under `--out` (default: the `output_dir` key, else `.`). Each output
//! file starts with `#` lines echoing the effective configuration.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::blowup::{analyze, MassReport};
use crate::bubbles::{default_center, geometric_family, verify_expansions, DEFAULT_R0};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field_io::{fmt_f64, read_field, write_field};
use crate::minimax::{continuation, mountain_pass, SolveRecord, SolverConfig};
use crate::model::Parameters;
use crate::region::{ipmu_holds, membership, triangles, RegionSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_FIELD_FORMAT: i32 = 65;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(
    name = "sinh-poisson",
    version,
    about = "Asymmetric sinh-Poisson mean-field solver on flat tori"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First nonzero Laplace eigenvalue of the torus.
    Mu1,
    /// Admissible-region triangles and membership of given points.
    Region {
        /// Parameter point `lambda1,lambda2` (repeatable).
        #[arg(long = "point", value_parser = parse_point)]
        points: Vec<(f64, f64)>,
    },
    /// Bubble-family energy expansions over a geometric ε sequence.
    BubbleScan,
    /// Mountain-pass solve at the configured parameters.
    Solve,
    /// Parameter sweep towards `end_lambda1`, `end_lambda2`, `end_gamma`.
    Sweep,
    /// Blow-up mass diagnostics for a stored field.
    Analyze {
        /// Field file to analyze.
        #[arg(long)]
        field: PathBuf,
    },
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lambda1,lambda2, got {s:?}"))?;
    let x: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let y: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((x, y))
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::FieldFormat(_) => EXIT_FIELD_FORMAT,
        Error::Stagnation(_) | Error::GeometryFailure(_) => EXIT_SOLVER,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_PRECONDITION,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status. Human-readable summaries go to `stdout`, diagnostics to
/// `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.str_or("output_dir", ".")));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn header(command: &str, cfg: &RunConfig) -> Vec<String> {
    let mut lines = vec![format!("sinh-poisson {command}")];
    lines.extend(cfg.echo());
    lines
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_header(out: &mut dyn Write, lines: &[String]) -> Result<()> {
    for l in lines {
        writeln!(out, "# {l}")?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Mu1 => cmd_mu1(&cfg, stdout),
        Command::Region { points } => cmd_region(&cfg, points, stdout),
        Command::BubbleScan => cmd_bubble_scan(cli, &cfg, stdout),
        Command::Solve => cmd_solve(cli, &cfg, stdout),
        Command::Sweep => cmd_sweep(cli, &cfg, stdout),
        Command::Analyze { field } => cmd_analyze(cli, &cfg, field, stdout),
    }
}

fn cmd_mu1(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let grid = cfg.grid()?;
    let mu1 = grid.mu1();
    let product = mu1 * grid.volume();
    write_header(stdout, &header("mu1", cfg))?;
    writeln!(stdout, "quantity,value")?;
    writeln!(stdout, "mu1,{}", fmt_f64(mu1))?;
    writeln!(stdout, "mu1_times_area,{}", fmt_f64(product))?;
    let gammas = if cfg.has("gamma") {
        vec![cfg.gamma()?]
    } else {
        vec![0.1, 0.5, 1.0]
    };
    for g in gammas {
        writeln!(
            stdout,
            "eigenvalue_window(gamma={g}),{}",
            ipmu_holds(g, product)
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_region(cfg: &RunConfig, points: &[(f64, f64)], stdout: &mut dyn Write) -> Result<i32> {
    let grid = cfg.grid()?;
    let spec = RegionSpec::new(cfg.gamma()?, grid.mu1() * grid.volume())?;
    write_header(stdout, &header("region", cfg))?;
    writeln!(stdout, "triangle,vertex,lambda1,lambda2")?;
    let (t1, t2) = triangles(&spec);
    for (name, t) in [("T1", t1), ("T2", t2)] {
        for (i, (x, y)) in t.vertices.iter().enumerate() {
            writeln!(stdout, "{name},{i},{},{}", fmt_f64(*x), fmt_f64(*y))?;
        }
    }
    if !points.is_empty() {
        writeln!(
            stdout,
            "lambda1,lambda2,nonnegative,supercritical,lambda1_nonresonant,lambda2_nonresonant,below_eigenvalue,verdict"
        )?;
    }
    for &(l1, l2) in points {
        let m = membership(&spec, l1, l2);
        writeln!(
            stdout,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(l1),
            fmt_f64(l2),
            m.nonnegative,
            m.supercritical,
            m.lambda1_nonresonant,
            m.lambda2_nonresonant,
            m.below_eigenvalue,
            if m.inside() { "inside" } else { "outside" }
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_bubble_scan(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let grid = cfg.grid()?;
    let p = cfg.parameters(grid.volume())?;
    let family = geometric_family(
        cfg.f64_or("scan_eps_start", 0.125)?,
        cfg.f64_or("scan_eps_ratio", 0.5)?,
        cfg.usize_or("scan_count", 5)?,
        default_center(&grid),
        cfg.f64_or("r0", DEFAULT_R0)?,
        &grid,
    )?;
    let report = verify_expansions(&family, &grid, &p)?;
    let path = out_dir(cli, cfg)?.join("bubble_scan.csv");
    let mut out = create(&path)?;
    write_header(&mut out, &header("bubble-scan", cfg))?;
    writeln!(
        out,
        "eps,dirichlet,logIntExp,logIntExpNegGamma,J_v,J_negv_over_gamma"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.eps),
            fmt_f64(r.dirichlet),
            fmt_f64(r.log_int_exp),
            fmt_f64(r.log_int_exp_neg_gamma),
            fmt_f64(r.j_v),
            fmt_f64(r.j_negv_over_gamma)
        )?;
    }
    for (name, fit) in report.fits() {
        let line = format!(
            "slope {name} fitted={} expected={} error={}",
            fmt_f64(fit.slope),
            fmt_f64(fit.expected),
            fmt_f64(fit.error())
        );
        writeln!(out, "# {line}")?;
        writeln!(stdout, "{line}")?;
    }
    writeln!(
        out,
        "# core_unresolved={} slope_drift={}",
        report.core_unresolved, report.slope_drift
    )?;
    out.flush()?;
    writeln!(stdout, "wrote {}", path.display())?;
    Ok(EXIT_OK)
}

const SOLVE_COLUMNS: &str = "lambda1,lambda2,gamma,J,residual,iters,supnorm,dirichlet_norm";

fn solve_row(r: &SolveRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        fmt_f64(r.parameters.lambda1()),
        fmt_f64(r.parameters.lambda2()),
        fmt_f64(r.parameters.gamma()),
        fmt_f64(r.j_value),
        fmt_f64(r.residual_norm),
        r.iterations,
        fmt_f64(r.sup_norm),
        fmt_f64(r.dirichlet_norm)
    )
}

fn write_record(dir: &Path, stem: &str, head: &[String], r: &SolveRecord) -> Result<()> {
    let mut csv = create(&dir.join(format!("{stem}.csv")))?;
    write_header(&mut csv, head)?;
    writeln!(csv, "# converged={} sweeps={}", r.converged, r.sweeps)?;
    writeln!(csv, "{SOLVE_COLUMNS}")?;
    writeln!(csv, "{}", solve_row(r))?;
    csv.flush()?;
    let mut comments = head.to_vec();
    comments.push(format!(
        "lambda1={} lambda2={} gamma={}",
        fmt_f64(r.parameters.lambda1()),
        fmt_f64(r.parameters.lambda2()),
        fmt_f64(r.parameters.gamma())
    ));
    let mut field = create(&dir.join(format!("{stem}_field.txt")))?;
    write_field(&mut field, &r.field, &comments)?;
    field.flush()?;
    Ok(())
}

fn cmd_solve(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let grid = cfg.grid()?;
    let p = cfg.parameters(grid.volume())?;
    let solver = cfg.solver()?;
    let dir = out_dir(cli, cfg)?;
    let head = header("solve", cfg);
    let (record, code) = match mountain_pass(&p, &grid, &solver) {
        Ok(r) => (r, EXIT_OK),
        Err(Error::Stagnation(r)) => (*r, EXIT_SOLVER),
        Err(e) => return Err(e),
    };
    let mut csv = create(&dir.join("solve.csv"))?;
    write_header(&mut csv, &head)?;
    writeln!(
        csv,
        "# converged={} sweeps={}",
        record.converged, record.sweeps
    )?;
    writeln!(csv, "{SOLVE_COLUMNS}")?;
    writeln!(csv, "{}", solve_row(&record))?;
    csv.flush()?;
    let mut field = create(&dir.join("field.txt"))?;
    write_field(&mut field, &record.field, &head)?;
    field.flush()?;
    writeln!(stdout, "{SOLVE_COLUMNS}")?;
    writeln!(stdout, "{}", solve_row(&record))?;
    if code != EXIT_OK {
        writeln!(stdout, "newton did not converge; last iterate written")?;
    }
    Ok(code)
}

fn sweep_points(
    start: &Parameters,
    end: &Parameters,
    steps: usize,
    volume: f64,
) -> Result<Vec<Parameters>> {
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps.max(1) as f64;
            let mix = |a: f64, b: f64| if i == steps { b } else { a + t * (b - a) };
            Parameters::new(
                mix(start.lambda1(), end.lambda1()),
                mix(start.lambda2(), end.lambda2()),
                mix(start.gamma(), end.gamma()),
                volume,
            )
        })
        .collect()
}

fn independent_sweep(
    points: &[Parameters],
    grid: &crate::torus::Grid,
    solver: &SolverConfig,
    workers: usize,
) -> Result<Vec<std::result::Result<SolveRecord, String>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|p| match mountain_pass(p, grid, solver) {
                Ok(r) => Ok(r),
                Err(Error::Stagnation(r)) => Ok(*r),
                Err(e) => Err(e.to_string()),
            })
            .collect()
    }))
}

fn cmd_sweep(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let grid = cfg.grid()?;
    let start = cfg.parameters(grid.volume())?;
    let end = cfg.end_parameters(&start, grid.volume())?;
    let steps = cfg.usize_or("steps", 10)?;
    let solver = cfg.solver()?;
    let analysis = cfg.analysis()?;
    let dir = out_dir(cli, cfg)?;
    let head = header("sweep", cfg);

    let outcomes: Vec<std::result::Result<SolveRecord, String>> =
        match cfg.str_or("sweep_mode", "continuation") {
            "continuation" => continuation(&start, &end, steps, &grid, &solver)?
                .into_iter()
                .map(Ok)
                .collect(),
            "independent" => {
                let points = sweep_points(&start, &end, steps, grid.volume())?;
                let workers = cfg
                    .usize_or("workers", rayon::current_num_threads())?
                    .max(1);
                independent_sweep(&points, &grid, &solver, workers)?
            }
            other => {
                return Err(Error::Config(format!(
                    "sweep_mode must be continuation or independent, got {other:?}"
                )))
            }
        };

    let mut manifest = create(&dir.join("manifest.csv"))?;
    write_header(&mut manifest, &head)?;
    writeln!(
        manifest,
        "step,{SOLVE_COLUMNS},converged,dominant_px,dominant_py,dominant_m1,dominant_m2,file"
    )?;
    let mut all_converged = true;
    for (i, outcome) in outcomes.iter().enumerate() {
        let stem = format!("step_{i:03}");
        match outcome {
            Ok(r) => {
                all_converged &= r.converged;
                write_record(&dir, &stem, &head, r)?;
                let report = analyze(&r.field, &r.parameters, &analysis)?;
                let dom = dominant_columns(&report);
                writeln!(
                    manifest,
                    "{i},{},{},{dom},{stem}",
                    solve_row(r),
                    r.converged
                )?;
            }
            Err(msg) => {
                all_converged = false;
                writeln!(manifest, "# step {i} failed: {msg}")?;
            }
        }
    }
    manifest.flush()?;
    writeln!(
        stdout,
        "wrote {} records to {}",
        outcomes.len(),
        dir.join("manifest.csv").display()
    )?;
    Ok(if all_converged { EXIT_OK } else { EXIT_SOLVER })
}

fn dominant_columns(report: &MassReport) -> String {
    match report.dominant() {
        Some(c) => format!(
            "{},{},{},{}",
            fmt_f64(c.candidate.point.x),
            fmt_f64(c.candidate.point.y),
            fmt_f64(c.m1),
            fmt_f64(c.m2)
        ),
        None => "nan,nan,nan,nan".into(),
    }
}

fn cmd_analyze(
    cli: &Cli,
    cfg: &RunConfig,
    field_path: &Path,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let file = File::open(field_path)?;
    let field = read_field(BufReader::new(file)).map_err(|e| match e {
        Error::Io(_) | Error::FieldFormat(_) => e,
        other => Error::FieldFormat(other.to_string()),
    })?;
    let grid = field.grid().clone();
    let p = cfg.parameters(grid.volume())?;
    let analysis = cfg.analysis()?;
    let report = analyze(&field, &p, &analysis)?;

    let path = out_dir(cli, cfg)?.join("analyze.csv");
    let mut out = create(&path)?;
    let mut head = header("analyze", cfg);
    head.push(format!(
        "field grid nx={} ny={} Lx={} Ly={}",
        grid.nx(),
        grid.ny(),
        fmt_f64(grid.lx()),
        fmt_f64(grid.ly())
    ));
    write_header(&mut out, &head)?;
    writeln!(
        out,
        "px,py,species,contrast,radius,m1,m2,identquad_residual,m1_bound,m2_bound,sum_bound"
    )?;
    for c in &report.candidates {
        writeln!(
            out,
            "{},{},{:?},{},{},{},{},{},{},{},{}",
            fmt_f64(c.candidate.point.x),
            fmt_f64(c.candidate.point.y),
            c.candidate.species,
            fmt_f64(c.candidate.contrast),
            fmt_f64(c.radius),
            fmt_f64(c.m1),
            fmt_f64(c.m2),
            fmt_f64(c.identity.residual),
            c.identity.m1_bound,
            c.identity.m2_bound,
            c.identity.sum_bound
        )?;
    }
    let totals = format!(
        "totals m1={} m2={} remainder1={} remainder2={}",
        fmt_f64(report.totals.0),
        fmt_f64(report.totals.1),
        fmt_f64(report.remainder.0),
        fmt_f64(report.remainder.1)
    );
    writeln!(out, "# {totals}")?;
    out.flush()?;
    writeln!(stdout, "{} candidate(s); {totals}", report.candidates.len())?;
    Ok(EXIT_OK)
}
