//! The `mot` command line: law tabulation, sampling, the area Monte Carlo
//! comparison, map construction and the analytic verification suite.
//!
//! Every artifact is written atomically (temporary file, then rename) and gets
//! a `<artifact>.meta.json` sidecar recording the configuration, seed, wall time
//! and toolkit version.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::area::{self, AreaLaw};
use crate::bm::{self, Path2D};
use crate::cone::{self, BoundaryPoint, ConePoint, Side};
use crate::error::{Error, Result};
use crate::excursion::{self, ExcursionConfig};
use crate::matedcrt::{self, GraphFormat};
use crate::params::GammaParams;
use crate::processes;
use crate::rng::RngStream;
use crate::specfun;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const ENV_OUT_DIR: &str = "MOT_OUT_DIR";
pub const ENV_THREADS: &str = "MOT_THREADS";

/// Parses `gamma` as a decimal or one of the literals `sqrt2`, `sqrt8over3`.
pub fn parse_gamma(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "sqrt2" => Ok(std::f64::consts::SQRT_2),
        "sqrt8over3" => Ok((8.0f64 / 3.0).sqrt()),
        other => other.parse::<f64>().map_err(|e| format!("invalid gamma {other:?}: {e}")),
    }
}

/// A grid `lo:hi:steps` of `steps + 1` equally spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.lo + (self.hi - self.lo) * k as f64 / self.steps as f64).collect()
    }
}

pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be lo:hi:steps, got {s:?}"));
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("grid lo: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("grid hi: {e}"))?;
    let steps: usize = parts[2].parse().map_err(|e| format!("grid steps: {e}"))?;
    if steps == 0 || !(hi > lo) {
        return Err(format!("grid needs hi > lo and steps >= 1, got {s:?}"));
    }
    Ok(Grid { lo, hi, steps })
}

#[derive(Debug, Parser)]
#[command(name = "mot", version, about = "Brownian cone excursions, quantum-disk area laws and mated-CRT maps")]
pub struct Cli {
    /// Worker threads (default: available parallelism, or MOT_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a closed-form law on a grid.
    Laws(LawsArgs),
    /// Draw sample paths.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Compare approximate-excursion durations with the area law.
    AreaMc(AreaMcArgs),
    /// Build a mated-CRT map from an (L, R) path.
    Map(MapArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GammaArgs {
    #[arg(long, value_parser = parse_gamma)]
    pub gamma: f64,
    /// The covariance constant `a`.
    #[arg(long = "a", default_value_t = 1.0)]
    pub a_const: f64,
}

impl GammaArgs {
    fn params(&self) -> Result<GammaParams> {
        GammaParams::new(self.gamma, self.a_const)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// Density of the time-t position in `r` at fixed `--phi`, `--t`.
    TimeT,
    /// Exit density given `z = (--r, --phi)` in the signed boundary coordinate.
    ExitPoint,
    /// Survival of the vertex-to-u excursion in `t` at `|u| = --dist`.
    Survival,
    /// Area density and distribution function in `t`.
    Area,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LawsArgs {
    #[arg(long, value_enum)]
    pub which: LawKind,
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[arg(long, value_parser = parse_grid)]
    pub grid: Grid,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dist: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SampleCommand {
    /// Approximate boundary-to-boundary excursions in (L, R) coordinates.
    Excursion(SampleExcursionArgs),
    /// Field-average processes.
    FieldAverage(FieldAverageArgs),
    /// Correlated Brownian motion (L, R) from the origin.
    Bm(SampleBmArgs),
    /// Two-sided wedge boundary-length process.
    WedgeBoundary(WedgeBoundaryArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleExcursionArgs {
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ConditioningArg::HTransform)]
    pub conditioning: ConditioningArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningArg {
    HTransform,
    Rejection,
}

impl From<ConditioningArg> for excursion::Conditioning {
    fn from(c: ConditioningArg) -> Self {
        match c {
            ConditioningArg::HTransform => excursion::Conditioning::HTransform,
            ConditioningArg::Rejection => excursion::Conditioning::Rejection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Thick wedge; needs `--alpha < Q`.
    Wedge,
    /// Quantum disk conditioned on its supremum; needs `--beta > 0`.
    Disk,
    /// Thin-wedge bead; needs `Q < --alpha < Q + gamma`.
    Bead,
    /// Quantum disk as a log-Bessel excursion; needs `gamma > 2/sqrt(3)`.
    DiskBessel,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FieldAverageArgs {
    #[arg(long, value_enum)]
    pub kind: FieldKind,
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Steps on each side of `s = 0` (wedge, disk).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleBmArgs {
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WedgeBoundaryArgs {
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub n_fwd: usize,
    #[arg(long)]
    pub n_bwd: usize,
    #[arg(long, default_value_t = 4.0)]
    pub horizon_factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AreaMcArgs {
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 1 if the KS distance reaches this value.
    #[arg(long)]
    pub max_ks: Option<f64>,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    /// Input path CSV with header `t,L,R`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub cell_size: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Also write the degree histogram to `<out>.degrees.csv`.
    #[arg(long)]
    pub stats: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Analytic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifySuiteArgs {
    #[arg(long, value_enum, default_value_t = Suite::Analytic)]
    pub suite: Suite,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub suite: VerifySuiteArgs,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a single verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (value - expected).abs() < tolerance;
        Self { name: name.into(), value, expected, tolerance, pass }
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self { name: format!("{}: {err}", name.into()), value: f64::NAN, expected: f64::NAN, tolerance: 0.0, pass: false }
    }
}

fn gamma_grid() -> Vec<GammaParams> {
    [0.8, std::f64::consts::SQRT_2, 1.8].iter().map(|&g| GammaParams::new(g, 1.0).expect("valid gamma")).collect()
}

/// Closed forms against quadrature, and exact-constant identities.
pub fn analytic_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: String, r: Result<Check>| match r {
        Ok(c) => out.push(c),
        Err(e) => out.push(Check::failed(name, &e)),
    };
    for s in [0.25, 0.5, 1.0, 2.0, 10.0] {
        let name = format!("residue integral s={s}");
        push(name.clone(), (|| {
            let quad = specfun::integrate_1d(|phi| specfun::residue_integrand(s, phi), 0.0, std::f64::consts::PI, 1e-12)?;
            Ok(Check::new(name, quad.value, specfun::residue_integral(s)?, 1e-8))
        })());
    }
    for p in gamma_grid() {
        for t in [0.5, 1.0, 2.0] {
            let name = format!("time-t density mass gamma={:.6} t={t}", p.gamma);
            push(name.clone(), (|| {
                let m = specfun::integrate_polar_sector(|r, phi| cone::time_t_pdf(&p, ConePoint::new(r, phi), t).unwrap_or(f64::NAN), p.theta, 1e-9)?;
                Ok(Check::new(name, m.value, 1.0, 1e-6))
            })());
        }
        for (r, frac) in [(1.0, 0.5), (0.3, 0.2), (2.5, 0.85)] {
            let name = format!("exit density mass gamma={:.6} z=({r},{frac} theta)", p.gamma);
            let z = ConePoint::new(r, frac * p.theta);
            push(name.clone(), (|| {
                let mut total = 0.0;
                for side in [Side::AngleZero, Side::AngleTheta] {
                    total += specfun::integrate_1d(
                        |d| cone::exit_point_pdf_given_z(&p, z, BoundaryPoint::new(d, side)).unwrap_or(f64::NAN),
                        0.0,
                        f64::INFINITY,
                        1e-10,
                    )?
                    .value;
                }
                Ok(Check::new(name, total, 1.0, 1e-6))
            })());
        }
    }
    let p = GammaParams::sqrt2();
    let u = BoundaryPoint::new(1.0, Side::AngleZero);
    push("survival t=1e-4".into(), cone::cone_survival(&p, u, 1e-4).map(|v| Check::new("survival t=1e-4", v, 1.0, 1e-3)));
    push(
        "survival t=1/2".into(),
        cone::cone_survival(&p, u, 0.5).map(|v| Check::new("survival t=1/2", v, 1.0 - 2.0 / std::f64::consts::E, 1e-12)),
    );
    push(
        "time-t density value".into(),
        cone::time_t_pdf(&p, ConePoint::new(1.0, std::f64::consts::FRAC_PI_4), 1.0)
            .map(|v| Check::new("time-t density value", v, 0.5 * (-0.5f64).exp(), 1e-12)),
    );
    push(
        "exit density value".into(),
        cone::exit_point_pdf_given_z(&p, ConePoint::new(1.0, std::f64::consts::FRAC_PI_4), u)
            .map(|v| Check::new("exit density value", v, std::f64::consts::FRAC_1_PI, 1e-12)),
    );
    let law = AreaLaw::new(&p);
    push("area pdf(1)".into(), law.pdf(1.0).map(|v| Check::new("area pdf(1)", v, (-0.5f64).exp() / 4.0, 1e-12)));
    push("area cdf(1/2)".into(), law.cdf(0.5).map(|v| Check::new("area cdf(1/2)", v, 2.0 / std::f64::consts::E, 1e-12)));
    for p in gamma_grid() {
        let lam = p.lambda_exp;
        push(String::new(), Ok(Check::new(
            format!("c6 gamma={:.6}", p.gamma),
            cone::survival_constant(&p).ln(),
            -lam * std::f64::consts::LN_2 - libm::lgamma(1.0 + lam),
            1e-12,
        )));
        let law = AreaLaw::new(&p);
        push(String::new(), Ok(Check::new(
            format!("area normalizer gamma={:.6}", p.gamma),
            AreaLaw::ln_paper_constant(&p),
            law.ln_inverse_gamma_norm(),
            1e-12,
        )));
        let ub = BoundaryPoint::disk_endpoint(&p);
        for t in [0.3, 1.0, 3.0] {
            let name = format!("survival derivative gamma={:.6} t={t}", p.gamma);
            push(name.clone(), (|| {
                let h = 1e-5 * t;
                let fd = -(cone::cone_survival(&p, ub, t + h)? - cone::cone_survival(&p, ub, t - h)?) / (2.0 * h);
                let pdf = law.pdf(t)?;
                Ok(Check::new(name, fd / pdf, 1.0, 1e-6))
            })());
            let name = format!("cdf + survival gamma={:.6} t={t}", p.gamma);
            push(name.clone(), (|| Ok(Check::new(name, law.cdf(t)? + cone::cone_survival(&p, ub, t)?, 1.0, 1e-10)))());
        }
    }
    out
}

/// Resolves relative output paths against `MOT_OUT_DIR` when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(ENV_OUT_DIR) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Sidecar path for an artifact: `<artifact>.meta.json`.
pub fn meta_path(artifact: &Path) -> PathBuf {
    with_suffix(artifact, ".meta.json")
}

struct Artifacts {
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new() -> Self {
        Self { written: Vec::new() }
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn finish(self, primary: &Path, command: &str, config: Value, seed: Option<u64>, started: Instant) -> Result<()> {
        let meta = json!({
            "command": command,
            "config": config,
            "seed": seed,
            "artifacts": self.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "toolkit_version": VERSION,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
        });
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        write_atomic(&meta_path(primary), text.as_bytes())
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn run_laws(a: &LawsArgs) -> Result<()> {
    let started = Instant::now();
    let p = a.gamma.params()?;
    let grid = a.grid.points();
    let mut csv = String::new();
    match a.which {
        LawKind::Area => {
            let law = AreaLaw::new(&p);
            csv.push_str("t,pdf,cdf\n");
            for t in grid {
                csv.push_str(&format!("{},{},{}\n", bm::fmt_sig17(t), bm::fmt_sig17(law.pdf(t)?), bm::fmt_sig17(law.cdf(t)?)));
            }
        }
        LawKind::TimeT => {
            let phi = a.phi.unwrap_or(p.theta / 2.0);
            let t = a.t.unwrap_or(1.0);
            csv.push_str("input,value\n");
            for r in grid {
                let v = cone::time_t_pdf(&p, ConePoint::new(r, phi), t)?;
                csv.push_str(&format!("{},{}\n", bm::fmt_sig17(r), bm::fmt_sig17(v)));
            }
        }
        LawKind::ExitPoint => {
            let z = ConePoint::new(a.r.unwrap_or(1.0), a.phi.unwrap_or(p.theta / 2.0));
            csv.push_str("input,value\n");
            for s in grid {
                if s == 0.0 {
                    return Err(Error::Parameter("exit-point grid must avoid the vertex s = 0".into()));
                }
                let v = cone::exit_point_pdf_given_z(&p, z, BoundaryPoint::from_signed(s))?;
                csv.push_str(&format!("{},{}\n", bm::fmt_sig17(s), bm::fmt_sig17(v)));
            }
        }
        LawKind::Survival => {
            let dist = a.dist.unwrap_or_else(|| BoundaryPoint::disk_endpoint(&p).dist);
            let u = BoundaryPoint::new(dist, Side::AngleZero);
            csv.push_str("input,value\n");
            for t in grid {
                csv.push_str(&format!("{},{}\n", bm::fmt_sig17(t), bm::fmt_sig17(cone::cone_survival(&p, u, t)?)));
            }
        }
    }
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    arts.write(&out, csv.as_bytes())?;
    arts.finish(&out, "laws", serde_json::to_value(a)?, None, started)
}

/// JSON summary written next to sampled excursions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionSummary {
    pub n: usize,
    pub acceptance_rate: f64,
    pub durations: Vec<f64>,
}

pub fn summary_path(out: &Path) -> PathBuf {
    with_suffix(out, ".summary.json")
}

fn run_sample_excursion(a: &SampleExcursionArgs) -> Result<()> {
    let started = Instant::now();
    let p = a.gamma.params()?;
    if a.n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let cfg = ExcursionConfig { conditioning: a.conditioning.into(), ..ExcursionConfig::new(a.delta, a.c, a.dt) };
    let batch = excursion::sample_excursions(&p, &cfg, a.n, &RngStream::new(a.seed, 0))?;
    let paths: Vec<Path2D> = batch.samples.iter().filter_map(|s| s.lr_path.clone()).collect();
    let mut csv = String::new();
    for (i, path) in paths.iter().enumerate() {
        if i > 0 {
            csv.push('\n');
        }
        csv.push_str(&path.to_csv());
    }
    let summary = ExcursionSummary { n: batch.samples.len(), acceptance_rate: batch.acceptance_rate(), durations: batch.durations() };
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    arts.write(&out, csv.as_bytes())?;
    arts.write(&summary_path(&out), pretty(&summary)?.as_bytes())?;
    arts.finish(&out, "sample excursion", serde_json::to_value(a)?, Some(a.seed), started)
}

fn run_field_average(a: &FieldAverageArgs) -> Result<()> {
    let started = Instant::now();
    let p = a.gamma.params()?;
    let mut rng = RngStream::new(a.seed, 0).rng();
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Parameter(format!("--{name} is required for this kind")));
    let process = match a.kind {
        FieldKind::Wedge => processes::sample_thick_wedge_average(&p, need(a.alpha, "alpha")?, a.dt, a.n, a.n, &mut rng)?,
        FieldKind::Disk => processes::sample_disk_conditioned_average(&p, need(a.beta, "beta")?, a.dt, a.n, &mut rng)?,
        FieldKind::Bead => processes::sample_bead_average(&p, need(a.alpha, "alpha")?, a.dt, &mut rng)?,
        FieldKind::DiskBessel => processes::sample_disk_average(&p, a.dt, &mut rng)?,
    };
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    arts.write(&out, process.to_csv().as_bytes())?;
    arts.finish(&out, "sample field-average", serde_json::to_value(a)?, Some(a.seed), started)
}

fn run_sample_bm(a: &SampleBmArgs) -> Result<()> {
    let started = Instant::now();
    let p = a.gamma.params()?;
    let path = bm::sample_correlated_bm(&p, a.dt, a.n, (0.0, 0.0), &mut RngStream::new(a.seed, 0).rng())?;
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    arts.write(&out, path.to_csv().as_bytes())?;
    arts.finish(&out, "sample bm", serde_json::to_value(a)?, Some(a.seed), started)
}

fn run_wedge_boundary(a: &WedgeBoundaryArgs) -> Result<()> {
    let started = Instant::now();
    let p = a.gamma.params()?;
    let path = bm::sample_wedge_boundary_process(&p, a.dt, a.n_fwd, a.n_bwd, a.horizon_factor, &mut RngStream::new(a.seed, 0).rng())?;
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    arts.write(&out, path.to_csv().as_bytes())?;
    arts.finish(&out, "sample wedge-boundary", serde_json::to_value(a)?, Some(a.seed), started)
}

/// Raised when an acceptance threshold is missed; maps to exit status 1.
fn acceptance_failure(message: String) -> Error {
    Error::Sampling { message, attempts: 0, acceptance_rate: f64::NAN }
}

fn run_area_mc(a: &AreaMcArgs) -> Result<()> {
    let started = Instant::now();
    let p = a.gamma.params()?;
    check_positive("dt", a.dt)?;
    let report = area::mc_area_comparison(&p, a.delta, a.c, a.dt, a.n, &RngStream::new(a.seed, 0))?;
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    arts.write(&out, pretty(&report)?.as_bytes())?;
    arts.finish(&out, "area-mc", serde_json::to_value(a)?, Some(a.seed), started)?;
    match a.max_ks {
        Some(limit) if !(report.ks < limit) => Err(acceptance_failure(format!("ks {} >= {limit}", report.ks))),
        _ => Ok(()),
    }
}

fn run_map(a: &MapArgs) -> Result<()> {
    let started = Instant::now();
    check_positive("cell-size", a.cell_size)?;
    let text = fs::read_to_string(&a.input).map_err(|e| Error::Input(format!("{}: {e}", a.input.display())))?;
    let path = Path2D::from_csv(&text)?;
    let cells = matedcrt::CellPath::from_path(&path, a.cell_size)?;
    let g = matedcrt::mark_boundary_cells(&cells, &matedcrt::build_fast_cells(&cells))?;
    let format = match a.format {
        FormatArg::Csv => GraphFormat::Csv,
        FormatArg::Json => GraphFormat::Json,
    };
    let out = resolve_out(&a.out);
    let mut arts = Artifacts::new();
    let mut body = g.export(format);
    if format == GraphFormat::Json {
        body.push('\n');
    }
    arts.write(&out, body.as_bytes())?;
    if a.stats {
        arts.write(&with_suffix(&out, ".degrees.csv"), g.degree_histogram_csv().as_bytes())?;
    }
    arts.finish(&out, "map", serde_json::to_value(a)?, None, started)
}

/// Report of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

fn run_verify(a: &VerifyArgs) -> Result<()> {
    let started = Instant::now();
    let checks = analytic_suite();
    for c in &checks {
        println!("{} {} (value {}, expected {}, tolerance {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.expected, c.tolerance);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = VerifyReport { suite: a.suite.suite, passed: checks.len() - failed, failed, checks };
    if let Some(out) = &a.out {
        let out = resolve_out(out);
        let mut arts = Artifacts::new();
        arts.write(&out, pretty(&report)?.as_bytes())?;
        arts.finish(&out, "verify", serde_json::to_value(a)?, None, started)?;
    }
    if failed > 0 {
        return Err(acceptance_failure(format!("{failed} analytic checks failed")));
    }
    Ok(())
}

/// Exit status for an error: 2 for invalid input or parameters, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) | Error::Input(_) | Error::Domain(_) => 2,
        _ => 1,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Parameter(_) => "parameter",
        Error::Domain(_) => "domain",
        Error::Quadrature { .. } => "quadrature",
        Error::Sampling { .. } => "sampling",
        Error::Budget { .. } => "budget",
        Error::Input(_) => "input",
        Error::Io(_) => "io",
    }
}

/// The single-line JSON error record printed on stderr.
pub fn error_line(err: &Error) -> String {
    json!({ "error": error_kind(err), "message": err.to_string() }).to_string()
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Laws(a) => run_laws(a),
        Command::Sample(SampleCommand::Excursion(a)) => run_sample_excursion(a),
        Command::Sample(SampleCommand::FieldAverage(a)) => run_field_average(a),
        Command::Sample(SampleCommand::Bm(a)) => run_sample_bm(a),
        Command::Sample(SampleCommand::WedgeBoundary(a)) => run_wedge_boundary(a),
        Command::AreaMc(a) => run_area_mc(a),
        Command::Map(a) => run_map(a),
        Command::Verify(a) => run_verify(a),
    }
}

fn thread_count(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| std::env::var(ENV_THREADS).ok().and_then(|s| s.parse().ok())).filter(|&n| n > 0)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(&cli) {
        builder = builder.num_threads(n);
    }
    let result = match builder.build() {
        Ok(pool) => pool.install(|| execute(&cli)),
        Err(e) => Err(Error::Parameter(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_literals() {
        assert_eq!(parse_gamma("sqrt2").unwrap(), std::f64::consts::SQRT_2);
        assert!((parse_gamma("sqrt8over3").unwrap().powi(2) - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(parse_gamma("1.25").unwrap(), 1.25);
        assert!(parse_gamma("two").is_err());
    }

    #[test]
    fn grids() {
        let g = parse_grid("0.5:1.5:4").unwrap();
        assert_eq!(g.points(), vec![0.5, 0.75, 1.0, 1.25, 1.5]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn analytic_suite_passes() {
        let checks = analytic_suite();
        assert!(checks.len() > 40);
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["mot", "--bogus"]), 2);
        assert_eq!(run(["mot", "laws", "--which", "area"]), 2);
        assert_eq!(run(["mot", "laws", "--which", "area", "--gamma", "3", "--grid", "0.1:1:3", "--out", "/nonexistent/x.csv"]), 2);
    }

    #[test]
    fn error_line_is_single_line_json() {
        let line = error_line(&Error::Parameter("bad\nvalue".into()));
        assert!(!line.contains('\n'));
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"], "parameter");
    }
}
