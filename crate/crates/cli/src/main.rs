//! `fano-ep` command-line frontend.

mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fano_ep::constants::{
    DEFAULT_ENERGY_POINTS, DEFAULT_F_REF, DEFAULT_TRAJECTORY_POINTS, STATIONARY_THRESHOLD,
};
use fano_ep::epfinder::{scan_seeds, select_physical, EpError, ExceptionalPoint};
use fano_ep::model::ModelError;
use fano_ep::reduction::{
    eigen_trajectory, ep_of_effective, reduce_to_two_level, trajectories_to_csv, EffectiveEp,
    EffectiveModel, EpKind, Gauge, ReductionError, Trajectory, TrajectorySource,
};
use fano_ep::scattering::{cross_section_scan, scan_to_csv, CrossSectionSample, ScanOptions, ScatteringError};
use fano_ep::timedomain::{default_settle_time, stationary_residual, TimeDomainError};
use fano_ep::{OscillatorParams, C64};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ep(#[from] EpError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    TimeDomain(#[from] TimeDomainError),
    #[error("no exceptional point in f [{f_min}, {f_max}], g [{g_min}, {g_max}]")]
    NoEp { f_min: f64, f_max: f64, g_min: f64, g_max: f64 },
    #[error("stationary residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Read { .. } | CliError::Write { .. } => "io",
            CliError::Model(ModelError::Schema(_))
            | CliError::Ep(EpError::Params(ModelError::Schema(_)))
            | CliError::Reduction(ReductionError::Params(ModelError::Schema(_))) => "schema",
            CliError::Model(ModelError::InvalidParams(_))
            | CliError::Ep(EpError::Params(ModelError::InvalidParams(_)))
            | CliError::Reduction(ReductionError::Params(ModelError::InvalidParams(_)))
            | CliError::TimeDomain(TimeDomainError::Params(ModelError::InvalidParams(_))) => "invalid-params",
            CliError::TimeDomain(TimeDomainError::StepSize { .. } | TimeDomainError::InvalidTime(_))
            | CliError::Scattering(ScatteringError::InvalidGrid(_)) => "usage",
            CliError::ResidualTooLarge { .. } => "threshold",
            _ => "numerical",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "usage" | "io" | "schema" | "invalid-params" => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fano-ep", version, about = "Exceptional points and Fano-like cross sections of two coupled oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Locate the exceptional point in (f, g) and print it as JSON.
    FindEp {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Project onto the effective two-level model and print it as JSON.
    Reduce {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        reduction: ReductionArgs,
    },
    /// Cross-section scan over real energies, as CSV.
    CrossSection {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Absolute coupling at which to evaluate T.
        #[arg(long, conflicts_with = "f_offset", allow_hyphen_values = true)]
        f: Option<f64>,
        /// Coupling relative to the reduced model's exceptional point.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        f_offset: f64,
        #[arg(long, default_value_t = 2.5, allow_hyphen_values = true)]
        e_min: f64,
        #[arg(long, default_value_t = 3.3, allow_hyphen_values = true)]
        e_max: f64,
        #[arg(long, default_value_t = DEFAULT_ENERGY_POINTS)]
        points: usize,
        /// Add the energy-independent term v to T.
        #[arg(long)]
        include_background: bool,
        /// Overall factor applied to every T element.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        scale: f64,
        /// Also write a two-panel SVG plot to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Eigenfrequency trajectories of the full and reduced models, as CSV.
    Trajectory {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        reduction: ReductionArgs,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        f_min: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        f_max: f64,
        #[arg(long, default_value_t = DEFAULT_TRAJECTORY_POINTS)]
        points: usize,
        /// Also write a complex-plane SVG plot to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Integrate the equations of motion and compare with the stationary state.
    VerifyStationary {
        #[command(flatten)]
        io: IoArgs,
        /// Drive frequency (real).
        #[arg(long)]
        omega_drive: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Defaults to 40 e-folding times of the slowest transient.
        #[arg(long)]
        t_settle: Option<f64>,
        #[arg(long, default_value_t = STATIONARY_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Args, Debug)]
struct IoArgs {
    /// JSON parameter file.
    #[arg(long)]
    params: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    scan_f_min: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    scan_f_max: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    scan_g_min: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    scan_g_max: f64,
    #[arg(long, default_value_t = 21)]
    scan_grid: usize,
}

#[derive(Args, Debug)]
struct ReductionArgs {
    /// Coupling at which the two-level projection is built.
    #[arg(long, default_value_t = DEFAULT_F_REF, allow_hyphen_values = true)]
    f_ref: f64,
    #[arg(long, value_enum, default_value_t = GaugeArg::SymmetricDelta)]
    gauge: GaugeArg,
    /// Use g from the parameter file instead of the solved g_EP.
    #[arg(long)]
    keep_g: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GaugeArg {
    SymmetricDelta,
    AsProjected,
}

impl From<GaugeArg> for Gauge {
    fn from(g: GaugeArg) -> Self {
        match g {
            GaugeArg::SymmetricDelta => Gauge::SymmetricDelta,
            GaugeArg::AsProjected => Gauge::AsProjected,
        }
    }
}

fn require_finite(pairs: &[(&str, f64)]) -> Result<(), CliError> {
    for (name, v) in pairs {
        if !v.is_finite() {
            return Err(CliError::Usage(format!("--{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

fn load_params(path: &Path) -> Result<OscillatorParams, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(OscillatorParams::from_json(&text)?)
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn solve_ep(params: &OscillatorParams, scan: &ScanArgs) -> Result<ExceptionalPoint, CliError> {
    require_finite(&[
        ("scan-f-min", scan.scan_f_min),
        ("scan-f-max", scan.scan_f_max),
        ("scan-g-min", scan.scan_g_min),
        ("scan-g-max", scan.scan_g_max),
    ])?;
    let eps = scan_seeds(
        params,
        (scan.scan_f_min, scan.scan_f_max),
        (scan.scan_g_min, scan.scan_g_max),
        scan.scan_grid,
    )?;
    select_physical(&eps).ok_or(CliError::NoEp {
        f_min: scan.scan_f_min,
        f_max: scan.scan_f_max,
        g_min: scan.scan_g_min,
        g_max: scan.scan_g_max,
    })
}

struct Reduced {
    ep: ExceptionalPoint,
    params: OscillatorParams,
    model: EffectiveModel,
    effective_eps: Vec<EffectiveEp>,
}

impl Reduced {
    /// Reduced-model EP closest to the full-problem EP.
    fn nearest_ep(&self) -> Option<&EffectiveEp> {
        let d = |e: &EffectiveEp| (e.f_ep - self.ep.f_ep).norm();
        self.effective_eps.iter().min_by(|a, b| d(a).total_cmp(&d(b)))
    }
}

fn reduce(params: &OscillatorParams, scan: &ScanArgs, args: &ReductionArgs) -> Result<Reduced, CliError> {
    require_finite(&[("f-ref", args.f_ref)])?;
    let ep = solve_ep(params, scan)?;
    let params = if args.keep_g { *params } else { params.with_coupling(params.f, ep.g_ep) };
    let model = reduce_to_two_level(&params, args.f_ref, args.gauge.into())?;
    let effective_eps = ep_of_effective(&model)?;
    Ok(Reduced {
        ep,
        params,
        model,
        effective_eps,
    })
}

fn complex_json(z: C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn run_find_ep(io: &IoArgs, scan: &ScanArgs) -> Result<(), CliError> {
    let params = load_params(&io.params)?;
    let ep = solve_ep(&params, scan)?;
    let v = json!({
        "omega_ep_re": ep.omega_ep.re,
        "omega_ep_im": ep.omega_ep.im,
        "f_ep": ep.f_ep,
        "g_ep": ep.g_ep,
        "residual": ep.residual,
        "physical": ep.physical,
    });
    emit(&io.output, &to_json_text(&v))
}

fn run_reduce(io: &IoArgs, scan: &ScanArgs, args: &ReductionArgs) -> Result<(), CliError> {
    let params = load_params(&io.params)?;
    let r = reduce(&params, scan, args)?;
    let (h0, v) = (&r.model.h0, &r.model.v);
    let mut entries = serde_json::Map::new();
    for (name, m) in [("h0", h0), ("v", v)] {
        for i in 0..2 {
            for j in 0..2 {
                entries.insert(format!("{name}_{}{}", i + 1, j + 1), complex_json(m[(i, j)]));
            }
        }
    }
    let eps: Vec<Value> = r
        .effective_eps
        .iter()
        .map(|e| {
            json!({
                "f_ep": complex_json(e.f_ep),
                "omega_ep": complex_json(e.omega_ep),
                "kind": match e.kind {
                    EpKind::Exceptional => "exceptional",
                    EpKind::Diabolic => "diabolic",
                },
            })
        })
        .collect();
    let out = json!({
        "gauge": r.model.gauge.as_str(),
        "f_ref": r.model.f_ref,
        "g": r.params.g,
        "matrices": Value::Object(entries),
        "effective_eps": eps,
    });
    emit(&io.output, &to_json_text(&out))
}

#[allow(clippy::too_many_arguments)]
fn run_cross_section(
    io: &IoArgs,
    scan: &ScanArgs,
    args: &ReductionArgs,
    f: Option<f64>,
    f_offset: f64,
    e_min: f64,
    e_max: f64,
    points: usize,
    include_background: bool,
    scale: f64,
    svg_path: &Option<PathBuf>,
) -> Result<(), CliError> {
    require_finite(&[("f-offset", f_offset), ("e-min", e_min), ("e-max", e_max), ("scale", scale)])?;
    if let Some(f) = f {
        require_finite(&[("f", f)])?;
    }
    let params = load_params(&io.params)?;
    let r = reduce(&params, scan, args)?;
    let f_eval = match f {
        Some(f) => C64::new(f, 0.0),
        None => {
            let ep = r
                .nearest_ep()
                .ok_or(ReductionError::DegenerateFamily)?;
            ep.f_ep + f_offset
        }
    };
    let opts = ScanOptions {
        include_background,
        scale,
    };
    let samples = cross_section_scan(&r.model, f_eval, e_min, e_max, points, opts)?;
    emit(&io.output, &scan_to_csv(&samples))?;
    if let Some(path) = svg_path {
        write_file(path, &cross_section_svg(&samples, f_eval))?;
    }
    Ok(())
}

fn cross_section_svg(samples: &[CrossSectionSample], f: C64) -> String {
    let pick = |g: fn(&CrossSectionSample) -> f64| samples.iter().map(|s| (s.e, g(s))).collect::<Vec<_>>();
    let title = format!("|T22|², f = {:.6}{:+.2e}i", f.re, f.im);
    svg::render(&[
        svg::Panel {
            title: &title,
            x_label: "E",
            y_label: "|T22|²",
            series: vec![svg::Series {
                label: "|T22|²",
                color: "#1f4e9c",
                points: pick(|s| s.t22_sq),
                dashed: false,
            }],
            markers: vec![],
        },
        svg::Panel {
            title: "pole contributions",
            x_label: "E",
            y_label: "T22 terms",
            series: vec![
                svg::Series {
                    label: "first-order pole",
                    color: "#2a8a3e",
                    points: pick(|s| s.pole1_22_sq),
                    dashed: true,
                },
                svg::Series {
                    label: "second-order pole",
                    color: "#b8860b",
                    points: pick(|s| s.pole2_22_sq),
                    dashed: true,
                },
                svg::Series {
                    label: "interference",
                    color: "#c0392b",
                    points: pick(|s| s.interference_22),
                    dashed: false,
                },
            ],
            markers: vec![],
        },
    ])
}

fn run_trajectory(
    io: &IoArgs,
    scan: &ScanArgs,
    args: &ReductionArgs,
    f_min: f64,
    f_max: f64,
    points: usize,
    svg_path: &Option<PathBuf>,
) -> Result<(), CliError> {
    require_finite(&[("f-min", f_min), ("f-max", f_max)])?;
    if !(f_min < f_max) || points < 2 {
        return Err(CliError::Usage(format!(
            "need f-min < f-max and at least 2 points, got [{f_min}, {f_max}] with {points}"
        )));
    }
    let params = load_params(&io.params)?;
    let r = reduce(&params, scan, args)?;
    let full = eigen_trajectory(TrajectorySource::Full(&r.params), f_min, f_max, points)?;
    let reduced = eigen_trajectory(TrajectorySource::Reduced(&r.model), f_min, f_max, points)?;
    emit(&io.output, &trajectories_to_csv(&[full.clone(), reduced.clone()]))?;
    if let Some(path) = svg_path {
        write_file(path, &trajectory_svg(&full, &reduced))?;
    }
    Ok(())
}

fn trajectory_svg(full: &Trajectory, reduced: &Trajectory) -> String {
    let plane = |b: &[C64]| b.iter().map(|z| (z.re, z.im)).collect::<Vec<_>>();
    let mut markers = Vec::new();
    if let (Some(a), Some(b)) = (full.branch_a.first(), full.branch_b.first()) {
        markers.push(svg::Marker { x: a.re, y: a.im, color: "#d62728" });
        markers.push(svg::Marker { x: b.re, y: b.im, color: "#2ca02c" });
    }
    svg::render(&[svg::Panel {
        title: "eigenfrequencies in the complex plane",
        x_label: "Re ω",
        y_label: "Im ω",
        series: vec![
            svg::Series {
                label: "full, branch a",
                color: "#d62728",
                points: plane(&full.branch_a),
                dashed: false,
            },
            svg::Series {
                label: "full, branch b",
                color: "#2ca02c",
                points: plane(&full.branch_b),
                dashed: false,
            },
            svg::Series {
                label: "reduced, branch a",
                color: "#7f0000",
                points: plane(&reduced.branch_a),
                dashed: true,
            },
            svg::Series {
                label: "reduced, branch b",
                color: "#004d00",
                points: plane(&reduced.branch_b),
                dashed: true,
            },
        ],
        markers,
    }])
}

fn run_verify_stationary(
    io: &IoArgs,
    omega_drive: f64,
    dt: f64,
    t_settle: Option<f64>,
    threshold: f64,
) -> Result<(), CliError> {
    require_finite(&[("omega-drive", omega_drive), ("dt", dt), ("threshold", threshold)])?;
    let params = load_params(&io.params)?;
    let t_settle = match t_settle {
        Some(t) => t,
        None => default_settle_time(&params)?,
    };
    let residual = stationary_residual(&params, omega_drive, t_settle, dt)?;
    let v = json!({
        "omega_drive": omega_drive,
        "t_settle": t_settle,
        "dt": dt,
        "residual": residual,
        "threshold": threshold,
        "pass": residual <= threshold,
    });
    emit(&io.output, &to_json_text(&v))?;
    if residual > threshold {
        return Err(CliError::ResidualTooLarge { residual, threshold });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::FindEp { io, scan } => run_find_ep(&io, &scan),
        Command::Reduce { io, scan, reduction } => run_reduce(&io, &scan, &reduction),
        Command::CrossSection {
            io,
            scan,
            reduction,
            f,
            f_offset,
            e_min,
            e_max,
            points,
            include_background,
            scale,
            svg,
        } => run_cross_section(
            &io,
            &scan,
            &reduction,
            f,
            f_offset,
            e_min,
            e_max,
            points,
            include_background,
            scale,
            &svg,
        ),
        Command::Trajectory {
            io,
            scan,
            reduction,
            f_min,
            f_max,
            points,
            svg,
        } => run_trajectory(&io, &scan, &reduction, f_min, f_max, points, &svg),
        Command::VerifyStationary {
            io,
            omega_drive,
            dt,
            t_settle,
            threshold,
        } => run_verify_stationary(&io, omega_drive, dt, t_settle, threshold),
    }
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", error_line("usage", e.kind().as_str().unwrap_or("invalid arguments")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::from(e.exit_code())
        }
    }
}
