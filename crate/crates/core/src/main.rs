use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ghost_spectra::calibration::{
    calibrate, john_asymptotics, BlockKernel, ContourSpec, CorrectionKernel, JohnAsymptotics, LssCalibration,
    Polynomial, SignConvention, SphericalKernel,
};
use ghost_spectra::ghost::GammaBlockParams;
use ghost_spectra::harness::{
    run_phase, run_power, run_size, run_validate, svg, with_pool, AlternativeSpec, ExperimentConfig, ExperimentKind,
    ModelEntry, NRule, PhaseSpec, ResultTable, ValidateOptions, FULL_REPS,
};
use ghost_spectra::models::BlockModelConfig;
use ghost_spectra::mp::DiscreteLaw;
use ghost_spectra::spectral::covariance_stats;
use ghost_spectra::sphericity::{calibrate_all, JohnReport};
use ghost_spectra::{Error, Mat, Result};

#[derive(Parser)]
#[command(
    name = "ghost-spectra",
    version,
    about = "Fourth-order corrected spectral statistics and John's test"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "GHOST_SPECTRA_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Use 10^4 replicates.
    #[arg(long, conflicts_with = "reps")]
    full: bool,
    /// Write SVG charts next to the CSV (requires --out).
    #[arg(long, requires = "out")]
    plots: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    MomentMatched,
    ContourLiteral,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical size of John's test under the three calibrations.
    Size(RunArgs),
    /// Size-adjusted power against diag(a, .., a, 1, .., 1).
    Power(RunArgs),
    /// Variance of tr S^2 across the phase grid.
    Phase(RunArgs),
    /// Mean and covariance approximants for polynomial test functions.
    Calibrate {
        /// Aspect ratio p/n; derived from --model and --p when absent.
        #[arg(long)]
        c: Option<f64>,
        /// Excess-energy parameter for the spherical kernel.
        #[arg(long, conflicts_with = "model", allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// Test function: x, x2, x^3 or coefficients like 0,1,1.
        #[arg(long, default_value = "x")]
        f: Polynomial,
        /// Second test function for the covariance; defaults to f.
        #[arg(long)]
        g: Option<Polynomial>,
        /// Preset model M1..M6; uses its block kernel and exact gamma.
        #[arg(long, requires = "p")]
        model: Option<String>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, value_enum, default_value = "moment-matched")]
        sign: SignArg,
    },
    /// John's test on a data matrix (rows are observations).
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        no_header: bool,
        /// Rows are variables instead.
        #[arg(long)]
        transpose: bool,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
    },
    /// Run the oracle suite; exits 1 if any check fails.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "GHOST_SPECTRA_THREADS")]
        threads: Option<usize>,
        /// Also write the checks as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_config(kind: ExperimentKind) -> ExperimentConfig {
    let models = |names: &[&str]| names.iter().map(|n| ModelEntry::preset(n)).collect();
    let mut cfg = ExperimentConfig {
        kind: Some(kind),
        models: Vec::new(),
        p_grid: vec![200],
        n_rule: NRule::default(),
        reps: 2000,
        level: 0.05,
        seed: 42,
        threads: None,
        alternative: None,
        phase: None,
    };
    match kind {
        ExperimentKind::Size => {
            cfg.models = models(&BlockModelConfig::PRESETS);
        }
        ExperimentKind::Power => {
            cfg.models = models(&["M2", "M4"]);
            cfg.alternative = Some(AlternativeSpec {
                fraction: 0.2,
                a_grid: vec![1.0, 1.1, 1.2, 1.3, 1.4, 1.5],
            });
        }
        ExperimentKind::Phase => {
            cfg.p_grid = vec![100, 200, 400, 800];
            cfg.n_rule = NRule { factor: 2.0 };
            cfg.reps = 3000;
            cfg.phase = Some(PhaseSpec {
                alpha: 1.0,
                tau: 1.0,
                delta_grid: vec![1.4, 1.0, 0.5],
            });
        }
        _ => {}
    }
    cfg
}

fn load_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => default_config(kind),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(l) = args.level {
        cfg.level = l;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if args.full {
        cfg.reps = FULL_REPS;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate_for(kind)?;
    Ok(cfg)
}

/// Print a line, treating a closed pipe as success.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run_experiment(kind: ExperimentKind, args: &RunArgs) -> Result<()> {
    let cfg = load_config(kind, args)?;
    let table: ResultTable = with_pool(cfg.threads, || match kind {
        ExperimentKind::Size => run_size(&cfg),
        ExperimentKind::Power => run_power(&cfg),
        _ => run_phase(&cfg),
    })??;
    write_output(args.out.as_deref(), table.to_csv_string()?.as_bytes())?;
    if let (true, Some(out)) = (args.plots, &args.out) {
        let dir = out.parent().unwrap_or(Path::new("."));
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        for (name, chart) in svg::charts_for(&table) {
            fs::write(dir.join(format!("{stem}_{name}")), chart)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrateOutput {
    f: String,
    g: String,
    n: usize,
    sign: SignConvention,
    #[serde(flatten)]
    calibration: LssCalibration,
    #[serde(skip_serializing_if = "Option::is_none")]
    john: Option<JohnAsymptotics>,
}

#[allow(clippy::too_many_arguments)]
fn run_calibrate(
    c: Option<f64>,
    gamma: Option<f64>,
    n: Option<usize>,
    f: Polynomial,
    g: Option<Polynomial>,
    model: Option<String>,
    p: Option<usize>,
    sign: SignArg,
) -> Result<()> {
    let sign = match sign {
        SignArg::MomentMatched => SignConvention::MomentMatched,
        SignArg::ContourLiteral => SignConvention::ContourLiteral,
    };
    let g = g.unwrap_or_else(|| f.clone());
    let (c, n, law, kernel, p): (f64, usize, DiscreteLaw, Box<dyn CorrectionKernel>, Option<usize>) = match model {
        Some(name) => {
            let p = p.expect("clap enforces --p");
            let n = match (n, c) {
                (Some(n), _) => n,
                (None, Some(c)) => (p as f64 / c).round() as usize,
                (None, None) => NRule::default().n_for(p),
            };
            let cfg = ModelEntry::preset(&name).build(p, n)?;
            let params = GammaBlockParams::from_config(&cfg)?;
            let diag = cfg.population_diag();
            let law = DiscreteLaw::from_diagonal(&diag)?;
            (cfg.c_n(), n, law, Box::new(BlockKernel::new(&params, &diag)?), Some(p))
        }
        None => {
            let n = n.ok_or_else(|| Error::InvalidArgument("--n is required without --model".into()))?;
            let c = match (c, p) {
                (Some(c), _) => c,
                (None, Some(p)) => p as f64 / n as f64,
                (None, None) => return Err(Error::InvalidArgument("give --c or --p".into())),
            };
            let gamma = gamma.unwrap_or(0.0);
            let p = p.or_else(|| {
                let pf = c * n as f64;
                (pf.fract() == 0.0 && pf >= 1.0).then_some(pf as usize)
            });
            (
                c,
                n,
                DiscreteLaw::point_mass(1.0),
                Box::new(SphericalKernel::new(gamma)),
                p,
            )
        }
    };
    let contour = ContourSpec::around(c, &law);
    let calibration = calibrate(&f, &g, c, &law, kernel.as_ref(), n, &contour, sign)?;
    let john = p.map(|p| john_asymptotics(p, calibration.gamma_used));
    let out = CalibrateOutput {
        f: f.to_string(),
        g: g.to_string(),
        n,
        sign,
        calibration,
        john,
    };
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

#[derive(Serialize)]
struct TestOutput {
    #[serde(flatten)]
    report: JohnReport,
    level: f64,
    reject_gaussian: bool,
    reject_wy: Option<bool>,
    reject_corrected: bool,
}

fn read_matrix(path: &Path, header: bool, transpose: bool) -> Result<Mat<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or(Error::NonFinite { row: i, col: j })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let width = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidArgument(
            "data must be a nonempty rectangular table".into(),
        ));
    }
    // Observations become columns.
    Ok(if transpose {
        Mat::from_fn(rows.len(), width, |i, j| rows[i][j])
    } else {
        Mat::from_fn(width, rows.len(), |i, j| rows[j][i])
    })
}

fn run_test(data: &Path, header: bool, transpose: bool, level: f64) -> Result<()> {
    let crit = ghost_spectra::sphericity::two_sided_critical_value(level)?;
    let x = read_matrix(data, header, transpose)?;
    let sample = covariance_stats(x.as_ref(), false)?;
    let report = calibrate_all(&sample, Some(x.as_ref()))?;
    let out = TestOutput {
        level,
        reject_gaussian: report.z_gaussian.abs() > crit,
        reject_wy: report.z_wy.map(|z| z.abs() > crit),
        reject_corrected: report.z_corrected.abs() > crit,
        report,
    };
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

fn run_validate_cmd(seed: Option<u64>, threads: Option<usize>, out: Option<&Path>) -> Result<bool> {
    let mut opts = ValidateOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let checks = with_pool(threads, || run_validate(&opts))??;
    for c in &checks {
        emit(&c.line())?;
    }
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&checks)?)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Size(a) => run_experiment(ExperimentKind::Size, &a).map(|_| true),
        Command::Power(a) => run_experiment(ExperimentKind::Power, &a).map(|_| true),
        Command::Phase(a) => run_experiment(ExperimentKind::Phase, &a).map(|_| true),
        Command::Calibrate {
            c,
            gamma,
            n,
            f,
            g,
            model,
            p,
            sign,
        } => run_calibrate(c, gamma, n, f, g, model, p, sign).map(|_| true),
        Command::Test {
            data,
            no_header,
            transpose,
            level,
        } => run_test(&data, !no_header, transpose, level).map(|_| true),
        Command::Validate { seed, threads, out } => run_validate_cmd(seed, threads, out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
