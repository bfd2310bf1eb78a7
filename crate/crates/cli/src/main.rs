use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manakov_core::eigen::{asymptotic_residuals, eigenvalues_in_window, NEWTON_TOL};
use manakov_core::io::{self, Metadata};
use manakov_core::multipliers::UNIMODULAR_BAND;
use manakov_core::quasimomentum::{herglotz_asymptotic, q0_integral, q_profile, HerglotzFit, Q0Integral};
use manakov_core::spectrum::{scan, sheet_count, ENDPOINT_TOL, FREE_NORM};
use manakov_core::verify::{verify, VerifyOptions};
use manakov_core::zs::{extract_rank_one, zs_gaps, zs_q0};
use manakov_core::{Diagnostic, Error, Potential, SpectralScan, StepPotential};

#[derive(Parser)]
#[command(name = "manakov", version, about = "Floquet spectra of periodic Manakov operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Potential: a JSON file or an inline JSON object.
    #[arg(long, global = true)]
    potential: Option<String>,
    /// Number of canonical steps M (overrides the potential's own).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Window {
    /// Real interval `a,b`.
    #[arg(long, value_delimiter = ',', default_values_t = [-10.0, 10.0], allow_hyphen_values = true)]
    interval: Vec<f64>,
    /// Grid step (at most 0.05).
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the real axis into bands and gaps.
    Scan {
        #[command(flatten)]
        window: Window,
    },
    /// 2-periodic eigenvalues for indices n in a window.
    Eigen {
        /// Index window `n_min,n_max`.
        #[arg(long, value_delimiter = ',', default_values_t = [-5i64, 5], allow_hyphen_values = true)]
        window: Vec<i64>,
    },
    /// Run the identity suite and print a pass/fail matrix.
    Verify {
        #[arg(long, default_value_t = 64)]
        complex_points: usize,
        #[arg(long, default_value_t = 400)]
        real_points: usize,
    },
    /// Quasimomentum profile and the trace constant Q0.
    Qmomentum {
        #[command(flatten)]
        window: Window,
        /// Points on the imaginary axis for the Herglotz fit.
        #[arg(long, value_delimiter = ',', default_values_t = [20.0, 30.0, 40.0, 60.0, 80.0])]
        nu: Vec<f64>,
        /// Scale factors for the s^2 table; empty disables it.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        scales: Vec<f64>,
    },
    /// Decide between a 2- and a 3-sheeted Riemann surface.
    Sheets {
        #[command(flatten)]
        window: Window,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_potential(c: &Common) -> Result<Potential, Failure> {
    let spec = c.potential.as_deref().ok_or_else(|| Failure::Config("--potential is required".into()))?;
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        std::fs::read_to_string(spec).map_err(|e| Failure::Config(format!("{spec}: {e}")))?
    };
    let p = Potential::from_json(&text)?;
    Ok(match c.resolution {
        Some(m) => p.with_resolution(m)?,
        None => p,
    })
}

fn interval(w: &Window) -> Result<(f64, f64), Failure> {
    if w.interval.len() != 2 {
        return Err(Failure::Config("--interval takes two values a,b".into()));
    }
    let (a, b) = (w.interval[0], w.interval[1]);
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Failure::Config(format!("empty interval [{a}, {b}]")));
    }
    if !(w.step > 0.0) {
        return Err(Failure::Config(format!("step must be positive, got {}", w.step)));
    }
    Ok((a, b))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the main table in the requested format. In CSV mode the metadata,
/// diagnostics and `extra` go to `<out>.meta.json`, or to stderr without `--out`.
fn emit<R: Serialize, X: Serialize>(
    c: &Common,
    meta: &Metadata,
    rows: &[R],
    extra: &X,
    diagnostics: &[Diagnostic],
) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Full<'a, R: Serialize, X: Serialize> {
        rows: &'a [R],
        #[serde(flatten)]
        extra: &'a X,
    }
    match c.format {
        Format::Json => {
            let doc = io::json_document(meta, &Full { rows, extra }, diagnostics)?;
            match &c.out {
                Some(p) => write(p, &doc),
                None => {
                    print!("{doc}");
                    Ok(())
                }
            }
        }
        Format::Csv => {
            let table = io::csv_table(rows)?;
            let doc = io::json_document(meta, extra, diagnostics)?;
            match &c.out {
                Some(p) => {
                    write(p, &table)?;
                    write(&sidecar(p), &doc)
                }
                None => {
                    print!("{table}");
                    if !diagnostics.is_empty() {
                        eprint!("{doc}");
                    }
                    Ok(())
                }
            }
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let c = &cli.common;
    let pot = load_potential(c)?;
    let steps = pot.canonicalize();
    match &cli.command {
        Command::Scan { window } => {
            let (a, b) = interval(window)?;
            let s = scan(&steps, a, b, window.step)?;
            let meta = Metadata::new("scan", &pot, &scan_tolerances());
            #[derive(Serialize)]
            struct Extra {
                gaps: Vec<io::GapRow>,
                kissing: Vec<manakov_core::spectrum::KissingPoint>,
            }
            let extra = Extra { gaps: io::gap_rows(&s)?, kissing: s.kissing.clone() };
            emit(c, &meta, &io::scan_rows(&s)?, &extra, &s.diagnostics)?;
        }
        Command::Eigen { window } => {
            if window.len() != 2 {
                return Err(Failure::Config("--window takes two values n_min,n_max".into()));
            }
            let (n0, n1) = (window[0], window[1]);
            if n0 > n1 {
                return Err(Failure::Config(format!("empty window [{n0}, {n1}]")));
            }
            let table = eigenvalues_in_window(&steps, n0, n1)?;
            let asym = asymptotic_residuals(&table, &steps);
            let meta = Metadata::new("eigen", &pot, &[("newton", NEWTON_TOL), ("residual", 1e-9)]);
            #[derive(Serialize)]
            struct Extra<'a> {
                counts: &'a [(i64, Option<i64>)],
                decay_rate: Option<f64>,
            }
            let extra = Extra { counts: &table.counts, decay_rate: asym.decay_rate };
            emit(c, &meta, &io::eigen_rows(&table, Some(&asym))?, &extra, &table.diagnostics)?;
        }
        Command::Verify { complex_points, real_points } => {
            let opts = VerifyOptions { complex_points: *complex_points, real_points: *real_points, corrupt: None };
            let report = verify(&steps, &opts)?;
            let tols: Vec<(&str, f64)> = report.checks.iter().map(|k| (k.name, k.tol)).collect();
            let meta = Metadata::new("verify", &pot, &tols);
            print!("{}", io::check_matrix(&report));
            if c.out.is_some() {
                emit(c, &meta, &io::check_rows(&report), &serde_json::json!({}), &[])?;
            }
            if !report.passed() {
                eprintln!("failed: {}", report.failed().join(", "));
                return Ok(ExitCode::from(3));
            }
        }
        Command::Qmomentum { window, nu, scales } => {
            let (a, b) = interval(window)?;
            let s = scan(&steps, a, b, window.step)?;
            let profile = q_profile(&steps, &s)?;
            let mut diagnostics = s.diagnostics.clone();
            let report = q0_report(&pot, &steps, &s, nu, scales, window, &mut diagnostics)?;
            let meta = Metadata::new("qmomentum", &pot, &[("quadrature", 1e-10), ("window_fraction", 0.01)]);
            emit(c, &meta, &io::q_rows(&profile)?, &report, &diagnostics)?;
        }
        Command::Sheets { window } => {
            let (a, b) = interval(window)?;
            let s = scan(&steps, a, b, window.step)?;
            let verdict = sheet_count(&steps, &s)?;
            let meta = Metadata::new("sheets", &pot, &scan_tolerances());
            emit(c, &meta, &[io::sheet_row(&verdict)?], &serde_json::json!({}), &s.diagnostics)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn scan_tolerances() -> [(&'static str, f64); 2] {
    [("endpoint", ENDPOINT_TOL), ("unimodular_band", UNIMODULAR_BAND)]
}

#[derive(Serialize)]
struct ScalingRow {
    s: f64,
    q0_integral: Option<f64>,
    q0_herglotz: Option<f64>,
    /// `Q0(s v) / s^2` from the gap integral.
    q0_over_s2: Option<f64>,
}

#[derive(Serialize)]
struct RankOneRow {
    q_zs: f64,
    two_thirds_q_zs: f64,
    q0: f64,
    relative_difference: f64,
}

#[derive(Serialize)]
struct Q0Report {
    norm_sq: f64,
    integral: Option<Q0Integral>,
    herglotz: Option<HerglotzFit>,
    ratio_integral: Option<f64>,
    ratio_herglotz: Option<f64>,
    /// `|Q0_integral - Q0_herglotz| / max(|.|)`.
    agreement: Option<f64>,
    scaling: Vec<ScalingRow>,
    rank_one: Option<RankOneRow>,
}

fn q0_pair(
    steps: &StepPotential,
    s: &SpectralScan,
    nu: &[f64],
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<(Option<Q0Integral>, Option<HerglotzFit>), Failure> {
    let integral = match q0_integral(steps, s) {
        Ok(q) => Some(q),
        Err(e @ Error::WindowTooSmall { .. }) => {
            diagnostics.push(Diagnostic::new("window-too-small", None, e.to_string()));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let herglotz = match herglotz_asymptotic(steps, nu) {
        Ok(h) => Some(h),
        Err(e) if e.is_config() => return Err(e.into()),
        Err(e) => {
            diagnostics.push(Diagnostic::new("herglotz", None, e.to_string()));
            None
        }
    };
    Ok((integral, herglotz))
}

fn q0_report(
    pot: &Potential,
    steps: &StepPotential,
    s: &SpectralScan,
    nu: &[f64],
    scales: &[f64],
    window: &Window,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Q0Report, Failure> {
    let norm = steps.moments().norm();
    let norm_sq = norm * norm;
    let (integral, herglotz) = q0_pair(steps, s, nu, diagnostics)?;
    let free = norm < FREE_NORM;
    let ratio = |q: f64| (!free).then(|| q / norm_sq);
    let qi = integral.as_ref().map(|q| q.value);
    let qh = herglotz.as_ref().map(|h| h.q0);
    let agreement = match (qi, qh) {
        (Some(x), Some(y)) if x.abs().max(y.abs()) > 0.0 => Some((x - y).abs() / x.abs().max(y.abs())),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };

    let mut scaling = Vec::new();
    for &k in scales {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Failure::Config(format!("scale factors must be positive, got {k}")));
        }
        let ps = pot.scaled(k).canonicalize();
        let (a, b) = (window.interval[0], window.interval[1]);
        let ss = scan(&ps, a, b, window.step)?;
        let mut local = ss.diagnostics.clone();
        let (i, h) = q0_pair(&ps, &ss, nu, &mut local)?;
        diagnostics.extend(local.into_iter().map(|mut d| {
            d.message = format!("s = {k}: {}", d.message);
            d
        }));
        let qi = i.map(|q| q.value);
        scaling.push(ScalingRow { s: k, q0_integral: qi, q0_herglotz: h.map(|h| h.q0), q0_over_s2: qi.map(|q| q / (k * k)) });
    }

    let rank_one = if !free && steps.is_rank_one(steps.default_rank_one_tol()) {
        let (_, u) = extract_rank_one(steps)?;
        let (a, b) = (window.interval[0], window.interval[1]);
        let q_zs = zs_q0(&u, &zs_gaps(&u, a, b, window.step));
        qi.map(|q0| RankOneRow {
            q_zs,
            two_thirds_q_zs: 2.0 * q_zs / 3.0,
            q0,
            relative_difference: (q0 - 2.0 * q_zs / 3.0).abs() / q0.abs().max(f64::MIN_POSITIVE),
        })
    } else {
        None
    };

    Ok(Q0Report {
        norm_sq,
        ratio_integral: qi.and_then(ratio),
        ratio_herglotz: qh.and_then(ratio),
        integral,
        herglotz,
        agreement,
        scaling,
        rank_one,
    })
}
