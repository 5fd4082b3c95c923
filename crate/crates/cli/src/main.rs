//! `miskrige`: designs, kernel evaluation, kriging fits, convergence studies,
//! rate fits and plots from the command line.

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use miskrige::analysis::{self, fit_rate, RateFit};
use miskrige::experiments::{run_study, ExperimentError, StudyConfig};
use miskrige::functions::{TargetFunction, TargetSpec};
use miskrige::geometry::{make_design, DesignKind, DesignSet, Point, Region};
use miskrige::kernels::{Kernel, KernelSpec};
use miskrige::kriging::{self, KrigingError};

#[derive(Parser)]
#[command(name = "miskrige", version, about = "Kriging under kernel misspecification: designs, fits and convergence studies")]
struct Cli {
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a design and report its fill distance, separation radius and mesh ratio.
    Design(DesignArgs),
    /// Evaluate a kernel at pairs of points.
    KernelEval(KernelEvalArgs),
    /// Fit a kriging interpolant and write mean and variance along a grid.
    Krige(KrigeArgs),
    /// Run a convergence study from a JSON config.
    Study(StudyArgs),
    /// Fit a log-log convergence rate to a rows CSV.
    Rates(RatesArgs),
    /// Draw a log-log convergence chart from a rows CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RegionArgs {
    /// Lower corner of Ω, comma separated.
    #[arg(long, default_value = "0")]
    lower: String,
    /// Upper corner of Ω, comma separated.
    #[arg(long, default_value = "1")]
    upper: String,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    region: RegionArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points per axis for the fill distance.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelEvalArgs {
    /// Kernel spec as JSON, or @path to a JSON file.
    #[arg(long)]
    kernel: String,
    /// First arguments: comma separated scalars.
    #[arg(long, conflicts_with = "points")]
    x: Option<String>,
    /// Second arguments; defaults to the first.
    #[arg(long)]
    y: Option<String>,
    /// Design CSV whose points are used for both arguments.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Write the wavelet scaling function and wavelet tables to this CSV.
    #[arg(long)]
    wavelet_table: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KrigeArgs {
    #[arg(long)]
    kernel: String,
    /// Design CSV with columns x0[,x1].
    #[arg(long)]
    design: PathBuf,
    /// Target spec as JSON or @path; observations are its values at the design.
    #[arg(long, conflicts_with = "values")]
    target: Option<String>,
    /// CSV with one column of observations.
    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
    #[command(flatten)]
    region: RegionArgs,
    /// Prediction grid size over Ω (one-dimensional designs).
    #[arg(long, default_value_t = 101)]
    predict: usize,
    /// Trace CSV with columns x, mean, variance.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    rows: PathBuf,
    /// Error column to fit; all of l2 and linf that are present by default.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    rows: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    title: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    predicted_l2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    predicted_linf: Option<f64>,
}

enum Failure {
    Invalid(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Numerical(m) => m,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn from_kriging(e: KrigingError) -> Failure {
    match e {
        KrigingError::InvalidNugget(_) | KrigingError::LengthMismatch { .. } => invalid(e),
        _ => Failure::Numerical(e.to_string()),
    }
}

fn from_experiment(e: ExperimentError) -> Failure {
    if e.is_numerical() {
        Failure::Numerical(e.to_string())
    } else {
        invalid(e)
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

/// Inline JSON, or the contents of a file given as @path.
fn json_arg(arg: &str) -> CliResult<String> {
    match arg.strip_prefix('@') {
        Some(path) => read_text(Path::new(path)),
        None => Ok(arg.to_string()),
    }
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("{what}: '{t}' is not a number")))
        })
        .collect()
}

fn region_from(args: &RegionArgs, d: Option<usize>) -> CliResult<Region> {
    let mut lower = parse_list(&args.lower, "--lower")?;
    let mut upper = parse_list(&args.upper, "--upper")?;
    if let Some(d) = d {
        if lower.len() == 1 && d > 1 {
            lower = vec![lower[0]; d];
        }
        if upper.len() == 1 && d > 1 {
            upper = vec![upper[0]; d];
        }
    }
    if lower.len() != upper.len() {
        return Err(invalid("--lower and --upper must have the same number of coordinates"));
    }
    Region::new(lower.clone(), upper.clone(), lower, upper).map_err(invalid)
}

fn read_points(path: &Path) -> CliResult<Vec<Point>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let coords = record
            .iter()
            .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("{}: '{t}' is not a number", path.display()))))
            .collect::<CliResult<Vec<f64>>>()?;
        points.push(Point::new(coords));
    }
    if points.is_empty() {
        return Err(invalid(format!("{} has no points", path.display())));
    }
    Ok(points)
}

fn cmd_design(a: DesignArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    let kind: DesignKind = a.kind.parse().map_err(invalid)?;
    let region = region_from(&a.region, None)?;
    let mut design = make_design(kind, a.n, &region, a.seed).map_err(invalid)?;
    if let Some(m) = a.resolution {
        design = DesignSet::with_resolution(region, design.points().to_vec(), m).map_err(invalid)?;
    }
    write_text(&a.out, &design.to_csv())?;
    let out = json!({
        "n": design.len(),
        "d": design.dim(),
        "h": design.fill_distance(),
        "q": design.separation_radius(),
        "rho": design.mesh_ratio(),
    });
    println!("{out}");
    Ok(())
}

fn cmd_kernel_eval(a: KernelEvalArgs) -> CliResult<()> {
    let spec: KernelSpec = serde_json::from_str(&json_arg(&a.kernel)?).map_err(invalid)?;
    let kernel = Kernel::new(spec).map_err(invalid)?;
    if let Some(path) = &a.wavelet_table {
        let w = kernel
            .as_wavelet()
            .ok_or_else(|| invalid("--wavelet-table needs a wavelet kernel"))?;
        write_text(path, &w.table().to_csv())?;
    }
    let (xs, ys): (Vec<Point>, Vec<Point>) = match (&a.points, &a.x) {
        (Some(p), _) => {
            let pts = read_points(p)?;
            (pts.clone(), pts)
        }
        (None, Some(x)) => {
            let xs: Vec<Point> = parse_list(x, "--x")?.into_iter().map(Point::scalar).collect();
            let ys = match &a.y {
                Some(y) => parse_list(y, "--y")?.into_iter().map(Point::scalar).collect(),
                None => xs.clone(),
            };
            (xs, ys)
        }
        (None, None) => {
            if a.wavelet_table.is_some() {
                return Ok(());
            }
            return Err(invalid("give --x or --points"));
        }
    };
    let d = kernel.dim();
    let mut out = String::new();
    let names = |p: &str| (0..d).map(|i| if d == 1 { p.to_string() } else { format!("{p}{i}") }).collect::<Vec<_>>();
    out.push_str(&[names("x"), names("y"), vec!["value".to_string()]].concat().join(","));
    out.push('\n');
    for x in &xs {
        for y in &ys {
            let v = kernel.try_eval(&x.coords, &y.coords).map_err(invalid)?;
            let coords: Vec<String> = x.coords.iter().chain(&y.coords).map(|c| format!("{c:.16e}")).collect();
            out.push_str(&format!("{},{v:.16e}\n", coords.join(",")));
        }
    }
    match &a.out {
        Some(p) => write_text(p, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn cmd_krige(a: KrigeArgs) -> CliResult<()> {
    let spec: KernelSpec = serde_json::from_str(&json_arg(&a.kernel)?).map_err(invalid)?;
    let kernel = Kernel::new(spec).map_err(invalid)?;
    let points = read_points(&a.design)?;
    let region = region_from(&a.region, Some(points[0].dim()))?;
    let design = DesignSet::new(region.clone(), points).map_err(invalid)?;
    for p in design.points() {
        kernel.check_arg(&p.coords).map_err(invalid)?;
    }
    let target = match &a.target {
        Some(t) => {
            let spec: TargetSpec = serde_json::from_str(&json_arg(t)?).map_err(invalid)?;
            Some(TargetFunction::new(&spec).map_err(invalid)?)
        }
        None => None,
    };
    let y: Vec<f64> = match (&target, &a.values) {
        (Some(t), _) => design.points().iter().map(|p| t.eval(&p.coords)).collect(),
        (None, Some(path)) => read_points(path)?.into_iter().map(|p| p.coords[0]).collect(),
        (None, None) => return Err(invalid("give --target or --values")),
    };
    let model = kriging::fit(&kernel, &design, &y, a.nugget).map_err(from_kriging)?;
    let mut summary = json!({
        "n": design.len(),
        "nugget": a.nugget,
        "h": design.fill_distance(),
        "q": design.separation_radius(),
        "rho": design.mesh_ratio(),
        "relative_residual": model.relative_residual(),
        "rkhs_norm_sq": model.rkhs_norm_sq(),
        "sigma_min": model.sigma_min().map_err(from_kriging)?,
    });
    if let Some(t) = &target {
        let mean = model.mean_evaluator();
        let d = design.dim();
        let l2 = analysis::l2_error(|x| t.eval(x), |x| mean.eval(x), &region, analysis::default_quadrature(d))
            .map_err(invalid)?;
        let linf = analysis::linf_error(|x| t.eval(x), |x| mean.eval(x), &region, if d == 1 { 10_000 } else { 200 })
            .map_err(invalid)?;
        summary["l2"] = json!(l2);
        summary["linf"] = json!(linf);
    }
    if let Some(path) = &a.out {
        if design.dim() != 1 {
            return Err(invalid("prediction traces are written for one-dimensional designs only"));
        }
        if a.predict < 2 {
            return Err(invalid("--predict must be at least 2"));
        }
        let (lo, hi) = (region.lower[0], region.upper[0]);
        let xs: Vec<f64> = (0..a.predict).map(|i| lo + (hi - lo) * i as f64 / (a.predict - 1) as f64).collect();
        write_text(path, &model.prediction_trace_csv(&xs).map_err(from_kriging)?)?;
    }
    println!("{summary}");
    Ok(())
}

fn cmd_study(a: StudyArgs) -> CliResult<()> {
    let cfg = StudyConfig::from_json(&read_text(&a.config)?).map_err(from_experiment)?;
    cfg.validate().map_err(from_experiment)?;
    let result = run_study(&cfg).map_err(from_experiment)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| invalid(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let summary = result.summary_json();
    write_text(&a.out_dir.join("rows.csv"), &result.rows_csv())?;
    write_text(&a.out_dir.join("summary.json"), &format!("{:#}\n", summary))?;
    let pts = |f: fn(&miskrige::experiments::StudyRow) -> f64| {
        result.rows.iter().map(|r| (r.n as f64, f(r))).collect::<Vec<_>>()
    };
    let chart = svg::render(
        &format!("{} study", result.study.tag()),
        &[
            svg::Series {
                label: "L2 error",
                color: "#1f77b4",
                points: pts(|r| r.l2),
                fit: Some(&result.l2_fit),
                predicted: Some(result.predicted_l2_slope),
            },
            svg::Series {
                label: "Linf error",
                color: "#d62728",
                points: pts(|r| r.linf),
                fit: Some(&result.linf_fit),
                predicted: Some(result.predicted_linf_slope),
            },
        ],
    );
    write_text(&a.out_dir.join("plot.svg"), &chart)?;
    println!("{summary}");
    Ok(())
}

/// (n, error) pairs for each requested error column of a rows CSV.
fn read_rows(path: &Path, columns: &[&str], require_all: bool) -> CliResult<Vec<(String, Vec<(f64, f64)>)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| invalid(format!("{}: {e}", path.display())))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let n_col = find("n").ok_or_else(|| invalid(format!("{} has no 'n' column", path.display())))?;
    let mut cols = Vec::new();
    for &c in columns {
        match find(c) {
            Some(i) => cols.push((c.to_string(), i)),
            None if require_all => return Err(invalid(format!("{} has no '{c}' column", path.display()))),
            None => {}
        }
    }
    if cols.is_empty() {
        return Err(invalid(format!("{} has none of the columns {}", path.display(), columns.join(", "))));
    }
    let mut out: Vec<(String, Vec<(f64, f64)>)> = cols.iter().map(|(c, _)| (c.clone(), Vec::new())).collect();
    for record in reader.records() {
        let record = record.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let num = |i: usize| -> CliResult<f64> {
            let t = record.get(i).unwrap_or("").trim();
            t.parse::<f64>().map_err(|_| invalid(format!("{}: '{t}' is not a number", path.display())))
        };
        let n = num(n_col)?;
        for (k, (_, i)) in cols.iter().enumerate() {
            out[k].1.push((n, num(*i)?));
        }
    }
    if out[0].1.is_empty() {
        return Err(invalid(format!("{} has no rows", path.display())));
    }
    Ok(out)
}

fn fit_json(column: &str, fit: &RateFit) -> serde_json::Value {
    json!({
        "column": column,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r2": fit.r_squared,
        "points": fit.points.len(),
        "excluded": fit.excluded.len(),
    })
}

fn cmd_rates(a: RatesArgs) -> CliResult<()> {
    let wanted: Vec<&str> = match &a.column {
        Some(c) => vec![c.as_str()],
        None => vec!["l2", "linf"],
    };
    let series = read_rows(&a.rows, &wanted, a.column.is_some())?;
    let mut fits = Vec::new();
    for (name, pts) in &series {
        let fit = fit_rate(pts).map_err(invalid)?;
        fits.push(fit_json(name, &fit));
    }
    println!("{}", serde_json::Value::Array(fits));
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> CliResult<()> {
    let series = read_rows(&a.rows, &["l2", "linf"], false)?;
    let fits = series
        .iter()
        .map(|(_, pts)| fit_rate(pts).map_err(invalid))
        .collect::<CliResult<Vec<_>>>()?;
    let palette = ["#1f77b4", "#d62728"];
    let drawn: Vec<svg::Series> = series
        .iter()
        .zip(&fits)
        .enumerate()
        .map(|(k, ((name, pts), fit))| svg::Series {
            label: if name == "l2" { "L2 error" } else { "Linf error" },
            color: palette[k % palette.len()],
            points: pts.clone(),
            fit: Some(fit),
            predicted: if name == "l2" { a.predicted_l2 } else { a.predicted_linf },
        })
        .collect();
    let title = a.title.clone().unwrap_or_else(|| "convergence".into());
    write_text(&a.out, &svg::render(&title, &drawn))?;
    let out: Vec<serde_json::Value> = series.iter().zip(&fits).map(|((n, _), f)| fit_json(n, f)).collect();
    println!("{}", serde_json::Value::Array(out));
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("MISKRIGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| invalid(format!("MISKRIGE_THREADS must be a nonnegative integer (got '{v}')")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(invalid)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Design(a) => cmd_design(a),
        Command::KernelEval(a) => cmd_kernel_eval(a),
        Command::Krige(a) => cmd_krige(a),
        Command::Study(a) => cmd_study(a),
        Command::Rates(a) => cmd_rates(a),
        Command::Plot(a) => cmd_plot(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
