//! `shortloop`: batch computation of correction profiles, pointwise kernels,
//! boundary-layer profiles and scaling studies, with CSV output.

use clap::{Args, Parser, Subcommand, ValueEnum};
use shortloop::airy_model::{airy_kernel_exact, build_profile, kernel2d_exact, CorrectionProfile};
use shortloop::boundary::{
    halfspace_kernel_exact, predict_near_boundary, upsilon_asymptotic, upsilon_asymptotic_constants,
    upsilon_flat, upsilon_robin, weyl_validity_threshold, BoundaryCondition, BoundaryModel,
};
use shortloop::config::{OracleKind, OracleSection, StudyConfig};
use shortloop::csv_out::{write_atomic, write_csv, Cell};
use shortloop::eigen::{halfline_kernel, EndCondition};
use shortloop::pointwise::{predict_pointwise, PotentialModel, Predictor};
use shortloop::selftest::run_selftest;
use shortloop::special::{global_table, unit_ball_volume};
use shortloop::verify::{run_scaling_study, turning_point_oracle, ScalingReport};
use shortloop::Error;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_USAGE: u8 = 1;
const EXIT_DEGRADED: u8 = 2;
const EXIT_STUDY: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "shortloop", version, about = "Pointwise spectral asymptotics near turning points and boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the correction profile Q_d(t) with its asymptotic forms.
    Qtable(QtableArgs),
    /// Predicted and exact diagonal kernel e(x, x, τ) along a line of points.
    Kernel(KernelArgs),
    /// Boundary-layer profile Υ(r) of the flat half-space.
    BoundaryProfile(ProfileArgs),
    /// Run a scaling study from a config file.
    Study(StudyArgs),
    /// Run the reduced invariant suites of every module.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct QtableArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tmin: f64,
    #[arg(long)]
    tmax: f64,
    /// Number of rows, including both ends.
    #[arg(long, default_value_t = 400)]
    steps: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelFlag {
    /// V = −x₁, with the closed-form oracle.
    Airy,
    /// A potential given by --potential.
    Potential,
    /// Flat half-space −h²Δ with a boundary condition at x₁ = 0.
    Boundary,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ConditionFlag {
    Dirichlet,
    Neumann,
    Robin,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, value_enum)]
    model: ModelFlag,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    h: f64,
    /// Spectral level; 0 for potentials and 1 for boundary models by default.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xmin: f64,
    #[arg(long, allow_negative_numbers = true)]
    xmax: f64,
    #[arg(long, default_value_t = 41)]
    points: usize,
    /// Potential expression in x (or x1, x2).
    #[arg(long, allow_hyphen_values = true)]
    potential: Option<String>,
    #[arg(long, value_enum)]
    condition: Option<ConditionFlag>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Compute the oracle column with the eigensolver where no closed form
    /// exists (one-dimensional potentials and Robin half-lines).
    #[arg(long)]
    eigensolver: bool,
    /// Box length of the eigensolver oracle.
    #[arg(long, default_value_t = 30.0)]
    length: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = ConditionFlag::Dirichlet)]
    condition: ConditionFlag,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    rmin: f64,
    #[arg(long)]
    rmax: f64,
    #[arg(long, default_value_t = 400)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for the report files instead of the config's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Test hook: run against an Airy table with perturbed anchor values.
    #[arg(long, hide = true)]
    corrupt_table: bool,
}

/// A command failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Degraded { .. } => EXIT_DEGRADED,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Qtable(a) => cmd_qtable(&a),
        Command::Kernel(a) => cmd_kernel(&a),
        Command::BoundaryProfile(a) => cmd_boundary_profile(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Selftest(a) => cmd_selftest(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// `steps` points from lo to hi inclusive.
fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

fn check_range(name: &str, lo: f64, hi: f64, steps: usize) -> Outcome {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(usage(format!("{name} range must be finite")));
    }
    if !(lo < hi) {
        return Err(usage(format!("{name} range [{lo}, {hi}] is empty or inverted")));
    }
    if steps < 2 {
        return Err(usage("need at least 2 steps"));
    }
    Ok(())
}

fn cmd_qtable(a: &QtableArgs) -> Outcome {
    check_range("t", a.tmin, a.tmax, a.steps)?;
    let ts = linspace(a.tmin, a.tmax, a.steps);
    let profile: CorrectionProfile = build_profile(a.dim, &ts, a.tol)?;
    let rows: Vec<Vec<Cell>> = profile
        .rows()
        .iter()
        .map(|r| r.iter().map(|&v| Cell::Num(v)).collect())
        .collect();
    write_csv(&a.out, &CorrectionProfile::COLUMNS, &rows)?;
    Ok(())
}

fn condition(flag: Option<ConditionFlag>, beta: Option<f64>) -> Result<BoundaryCondition, Failure> {
    match (flag, beta) {
        (None, _) => Err(usage("boundary models need --condition")),
        (Some(ConditionFlag::Dirichlet), None) => Ok(BoundaryCondition::Dirichlet),
        (Some(ConditionFlag::Neumann), None) => Ok(BoundaryCondition::Neumann),
        (Some(ConditionFlag::Robin), Some(b)) => Ok(BoundaryCondition::Robin(b)),
        (Some(ConditionFlag::Robin), None) => Err(usage("--condition robin needs --beta")),
        (Some(_), Some(_)) => Err(usage("--beta applies to --condition robin only")),
    }
}

const KERNEL_COLUMNS: [&str; 9] = [
    "x", "h", "weyl", "correction", "total", "oracle", "abs_error", "bound", "regime",
];

fn cmd_kernel(a: &KernelArgs) -> Outcome {
    check_range("x", a.xmin, a.xmax, a.points)?;
    if !(a.h > 0.0 && a.h <= 1.0) {
        return Err(usage(format!("--h {} outside (0, 1]", a.h)));
    }
    if !(1..=2).contains(&a.dim) {
        return Err(usage(format!("--dim {} not in {{1, 2}}", a.dim)));
    }
    let xs = linspace(a.xmin, a.xmax, a.points);
    match a.model {
        ModelFlag::Boundary => kernel_boundary(a, &xs),
        ModelFlag::Airy | ModelFlag::Potential => kernel_potential(a, &xs),
    }
}

fn kernel_potential(a: &KernelArgs, xs: &[f64]) -> Outcome {
    if a.condition.is_some() || a.beta.is_some() {
        return Err(usage("--condition and --beta apply to --model boundary only"));
    }
    let model = match (a.model, &a.potential) {
        (ModelFlag::Airy, None) => PotentialModel::airy(a.dim)?,
        (ModelFlag::Airy, Some(_)) => return Err(usage("--model airy takes no --potential")),
        (_, Some(p)) => {
            let span = 1e3f64.max(2.0 * a.xmin.abs().max(a.xmax.abs()));
            PotentialModel::new(a.dim, p, vec![(-span, span); a.dim])?
        }
        (_, None) => return Err(usage("--model potential needs --potential")),
    };
    let tau = a.tau.unwrap_or(0.0);
    let point = |x: f64| {
        let mut p = vec![0.0; a.dim];
        p[0] = x;
        p
    };
    let oracle: Vec<f64> = match a.model {
        ModelFlag::Airy => xs
            .iter()
            .map(|&x| match a.dim {
                1 => airy_kernel_exact(a.h, x, tau),
                _ => kernel2d_exact(a.h, x, tau, 1e-10),
            })
            .collect::<Result<_, _>>()?,
        _ if a.eigensolver && a.dim == 1 => {
            let opts = OracleSection {
                kind: OracleKind::Eigensolver,
                length: Some(a.length),
                points_per_wavelength: None,
                richardson: None,
                tol: None,
            };
            let mid = 0.5 * (a.xmin + a.xmax);
            turning_point_oracle(&model, a.h, tau, mid, xs, &opts)?
        }
        _ if a.eigensolver => return Err(usage("the eigensolver oracle is one-dimensional")),
        _ => vec![f64::NAN; xs.len()],
    };
    let mut rows = Vec::with_capacity(xs.len());
    for (&x, o) in xs.iter().zip(oracle) {
        let p = predict_pointwise(&model, &point(x), tau, a.h, Predictor::WeylPlusCorrection)?;
        rows.push(vec![
            Cell::Num(x),
            Cell::Num(a.h),
            Cell::Num(p.weyl),
            Cell::Num(p.correction),
            Cell::Num(p.total),
            Cell::Num(o),
            Cell::Num((o - p.total).abs()),
            Cell::Num(p.bound),
            Cell::Text(p.regime.label().to_string()),
        ]);
    }
    write_csv(&a.out, &KERNEL_COLUMNS, &rows)?;
    Ok(())
}

fn kernel_boundary(a: &KernelArgs, xs: &[f64]) -> Outcome {
    if a.potential.is_some() {
        return Err(usage("--potential does not apply to --model boundary"));
    }
    if a.xmin < 0.0 {
        return Err(usage("boundary models live on x1 >= 0"));
    }
    let cond = condition(a.condition, a.beta)?;
    let bm = BoundaryModel::new(a.dim, cond)?;
    let tau = a.tau.unwrap_or(1.0);
    let oracle: Vec<f64> = match cond {
        BoundaryCondition::Robin(beta) if a.eigensolver => {
            if a.dim != 1 {
                return Err(usage("the eigensolver oracle is one-dimensional"));
            }
            halfline_kernel(a.h, tau, EndCondition::Robin(beta), a.length, xs)?
        }
        BoundaryCondition::Robin(_) => vec![f64::NAN; xs.len()],
        _ => xs
            .iter()
            .map(|&x| halfspace_kernel_exact(&bm, a.h, x, tau))
            .collect::<Result<_, _>>()?,
    };
    let threshold = weyl_validity_threshold(a.dim, a.h)?;
    let scale = a.h.powi(-(a.dim as i32)) * tau.powf(a.dim as f64 / 2.0);
    let mut header = KERNEL_COLUMNS.to_vec();
    header.push("upsilon");
    let mut rows = Vec::with_capacity(xs.len());
    for (&x, o) in xs.iter().zip(oracle) {
        let p = predict_near_boundary(&bm, a.h, x, tau, 1e-10)?;
        let regime = if x >= threshold { "weyl-valid" } else { "boundary-layer" };
        rows.push(vec![
            Cell::Num(x),
            Cell::Num(a.h),
            Cell::Num(p.weyl),
            Cell::Num(p.correction),
            Cell::Num(p.total),
            Cell::Num(o),
            Cell::Num((o - p.total).abs()),
            Cell::Num(p.bound),
            Cell::Text(regime.to_string()),
            Cell::Num(p.correction / scale),
        ]);
    }
    write_csv(&a.out, &header, &rows)?;
    Ok(())
}

fn cmd_boundary_profile(a: &ProfileArgs) -> Outcome {
    check_range("r", a.rmin, a.rmax, a.steps)?;
    if a.rmin < 0.0 {
        return Err(usage("r must be nonnegative"));
    }
    let cond = condition(Some(a.condition), a.beta)?;
    let bm = BoundaryModel::new(a.dim, cond)?;
    let d = a.dim;
    let exponent = (d as f64 + 1.0) / 2.0;
    // |Υ| ≤ |Υ(0)| everywhere; the leading term gives the decay.
    let at_zero = (2.0 * PI).powi(-(d as i32)) * unit_ball_volume(d)?;
    let amplitude = if d == 1 { 1.0 / (2.0 * PI) } else { upsilon_asymptotic_constants(d).0 };
    let mut rows = Vec::with_capacity(a.steps);
    for r in linspace(a.rmin, a.rmax, a.steps) {
        let (value, asym) = match cond {
            BoundaryCondition::Robin(_) => (upsilon_robin(&bm, r, 1e-10)?, f64::NAN),
            _ => {
                let v = upsilon_flat(&bm, r)?;
                let asym = if d == 1 {
                    // The leading term is the whole profile.
                    if r > 0.0 { v } else { f64::NAN }
                } else if r >= 5.0 {
                    upsilon_asymptotic(&bm, r)?
                } else {
                    f64::NAN
                };
                (v, asym)
            }
        };
        let envelope = if r > 0.0 { at_zero.min(amplitude * r.powf(-exponent)) } else { at_zero };
        rows.push(vec![Cell::Num(r), Cell::Num(value), Cell::Num(asym), Cell::Num(envelope)]);
    }
    write_csv(&a.out, &["r", "upsilon", "upsilon_asym", "envelope_bound"], &rows)?;
    Ok(())
}

fn resolve(config: &Path, out_dir: Option<&Path>, name: &str) -> PathBuf {
    let file = Path::new(name);
    match out_dir {
        Some(dir) => dir.join(file.file_name().unwrap_or(file.as_os_str())),
        None => config.parent().unwrap_or(Path::new(".")).join(file),
    }
}

fn cmd_study(a: &StudyArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| usage(format!("cannot read {}: {e}", a.config.display())))?;
    let cfg = StudyConfig::parse(&text).map_err(|e| usage(format!("{}: {e}", a.config.display())))?;
    let start = Instant::now();
    let report: ScalingReport = run_scaling_study(&cfg)?;
    let summary = report.summary();
    print!("{summary}");
    println!("  elapsed {:.1} s", start.elapsed().as_secs_f64());
    if let Some(csv) = &cfg.output.csv {
        let path = resolve(&a.config, a.out_dir.as_deref(), csv);
        write_csv(&path, &ScalingReport::CSV_COLUMNS, &report.csv_rows())?;
    }
    if let Some(txt) = &cfg.output.summary {
        let path = resolve(&a.config, a.out_dir.as_deref(), txt);
        write_atomic(&path, summary.as_bytes())?;
    }
    if report.verdict {
        Ok(())
    } else if report.degraded {
        Err(Failure { code: EXIT_DEGRADED, message: format!("study {} degraded", report.study_id) })
    } else {
        Err(Failure { code: EXIT_STUDY, message: format!("study {} failed", report.study_id) })
    }
}

fn cmd_selftest(a: &SelftestArgs) -> Outcome {
    let corrupted;
    let table = if a.corrupt_table {
        corrupted = global_table().perturbed(1e-3);
        &corrupted
    } else {
        global_table()
    };
    let start = Instant::now();
    let results = run_selftest(table);
    let mut failed = Vec::new();
    for r in &results {
        let word = if r.passed { "PASS" } else { "FAIL" };
        println!("{word} {:<18} {:>8.3} s  {}", r.name, r.elapsed.as_secs_f64(), r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_SELFTEST,
            message: format!("failing suites: {}", failed.join(", ")),
        })
    }
}
