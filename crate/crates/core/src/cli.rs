//! Command-line front end. Every data file is written together with a
//! `<file>.manifest.json` holding the resolved configuration, its fingerprint
//! and the arguments, so identical manifests reproduce identical data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::baseline::{baseline_error_curve, baseline_shots_to_reach, SinglePixelSpec, WidthConvention};
use crate::config::{RunConfig, SystemConfig, PRESET_NAMES};
use crate::detector::Undershoot;
use crate::error::{Error, Result};
use crate::exact::{coherent_click_distribution, total_variation};
use crate::inference::{
    credible_interval, interval_to_energy, posterior_multi, relative_error_curve, Estimator, DEFAULT_LEVEL,
};
use crate::matrix::{build_matrix, load_matrix, save_matrix, Method, ResponseMatrix, Support};
use crate::mc::{simulate_batch, PulseSource};
use crate::multiplexer::{validate_timing, Transmission};

pub const THREADS_ENV: &str = "BINFLUX_THREADS";

#[derive(Debug, Parser)]
#[command(name = "binflux", version, about = "Time-multiplexed photon-number-resolving detector toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the built-in configurations as JSON.
    Presets(PresetsArgs),
    /// Monte Carlo click-count histogram for one pulse source.
    Simulate(SimulateArgs),
    /// Build and save a response matrix.
    Matrix(MatrixArgs),
    /// Posterior over mu for one or more observed click counts.
    Infer(InferArgs),
    /// Multiplexed versus single-pixel relative error against shot count.
    Compare(CompareArgs),
    /// Grids over mu, click counts or shot counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SystemArgs {
    /// Built-in configuration (conventional16, rapid32).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the single-photon detection efficiency.
    #[arg(long)]
    pub efficiency: Option<f64>,
    /// Override the bin-averaged multiplexer loss (dB).
    #[arg(long)]
    pub loss_db: Option<f64>,
    /// Override dark-count probabilities per gate, `APD0,APD1`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub dark: Option<Vec<f64>>,
    /// Disable the undershoot model.
    #[arg(long, conflicts_with = "p_miss_next")]
    pub no_undershoot: bool,
    /// Use the mechanistic undershoot model with this miss probability.
    #[arg(long)]
    pub p_miss_next: Option<f64>,
}

impl SystemArgs {
    fn base(&self) -> Result<Option<RunConfig>> {
        let rc = match (&self.preset, &self.config) {
            (Some(name), _) => RunConfig::from_system(SystemConfig::preset(name)?),
            (None, Some(path)) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: e.line(),
                    msg: e.to_string(),
                })?
            }
            (None, None) => return Ok(None),
        };
        Ok(Some(rc))
    }

    fn apply(&self, mut rc: RunConfig) -> Result<RunConfig> {
        let det = &mut rc.system.detector;
        if let Some(e) = self.efficiency {
            det.efficiency = e;
            if let Undershoot::GlobalEfficiency { .. } = det.undershoot {
                det.undershoot = Undershoot::None;
            }
        }
        if let Some(d) = &self.dark {
            det.dark_prob_per_gate = [d[0], d[1]];
        }
        if self.no_undershoot {
            det.undershoot = Undershoot::None;
        }
        if let Some(p) = self.p_miss_next {
            det.undershoot = Undershoot::Mechanistic { p_miss_next: p };
        }
        if let Some(l) = self.loss_db {
            rc.system.multiplexer.transmission = Transmission::Uniform { avg_loss_db: l };
        }
        rc.validate()?;
        Ok(rc)
    }

    /// Resolve to a run configuration; `--preset` or `--config` is required.
    pub fn resolve(&self) -> Result<RunConfig> {
        let rc = self.base()?.ok_or_else(|| Error::Input("one of --preset or --config is required".into()))?;
        self.apply(rc)
    }

    fn resolve_or(&self, fallback: Option<RunConfig>) -> Result<RunConfig> {
        match self.base()?.or(fallback) {
            Some(rc) => self.apply(rc),
            None => Err(Error::Input("one of --preset or --config is required".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

fn format_of(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or(if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Format::Json
    } else {
        Format::Csv
    })
}

#[derive(Debug, Args, Serialize)]
pub struct PresetsArgs {
    /// Print only this preset.
    pub name: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Coherent pulse with this mean photon number.
    #[arg(long, conflicts_with = "fock")]
    pub mu: Option<f64>,
    /// Fock state with this exact photon number.
    #[arg(long)]
    pub fock: Option<u64>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write every shot's click pattern to `<output>.records.csv`.
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub mu_max: Option<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MethodArg,
    /// Shots per row for `--method mc`.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Compute only these rows and interpolate the rest, e.g. `10,50,100,200,400`.
    #[arg(long, value_delimiter = ',')]
    pub support: Option<Vec<usize>>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    /// Response matrix file (CSV or JSON).
    #[arg(short, long)]
    pub matrix: PathBuf,
    /// Configuration the matrix was built from. Defaults to the one recorded
    /// in the matrix manifest.
    #[command(flatten)]
    pub system: SystemArgs,
    /// Single-shot click count.
    #[arg(long, conflicts_with = "obs", required_unless_present = "obs")]
    pub n: Option<usize>,
    /// File with one click count per line.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Total-variation tolerance of the mu_max stability rule.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    /// Wavelength in metres for the energy conversion.
    #[arg(long, default_value_t = 1550e-9)]
    pub wavelength: f64,
    /// Accept a matrix whose fingerprint does not match the configuration.
    #[arg(long)]
    pub force: bool,
    /// Also write the full posterior as CSV `mu,probability`.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Write the JSON summary here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = 500)]
    pub max_shots: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mu_max: Option<usize>,
    /// Relative error at which shot counts are compared.
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    /// Width convention of the single-pixel column.
    #[arg(long, value_enum, default_value = "full")]
    pub baseline_width: WidthArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthArg {
    Half,
    Full,
}

impl From<WidthArg> for WidthConvention {
    fn from(w: WidthArg) -> Self {
        match w {
            WidthArg::Half => WidthConvention::HalfWidth,
            WidthArg::Full => WidthConvention::FullWidth,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Click statistics per mu: exact mean and mode, optional MC comparison.
    Mu,
    /// Single-shot mode and credible interval per click count.
    SingleShot,
    /// Mode and interval after each prefix of an observation series.
    Trajectory,
    /// Median multi-shot relative error per mu against shot count.
    Shots,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// mu grid for `mu` and `shots` sweeps.
    #[arg(long, value_delimiter = ',')]
    pub mu_list: Option<Vec<f64>>,
    /// Observation series for `trajectory`.
    #[arg(long, value_delimiter = ',')]
    pub obs: Option<Vec<usize>>,
    #[arg(long)]
    pub mu_max: Option<usize>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long, default_value_t = 300)]
    pub max_shots: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    #[arg(long, default_value_t = 1550e-9)]
    pub wavelength: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets(a) => run_presets(&a),
        Command::Simulate(a) => run_simulate(&a),
        Command::Matrix(a) => run_matrix(&a),
        Command::Infer(a) => run_infer(&a),
        Command::Compare(a) => run_compare(&a),
        Command::Sweep(a) => run_sweep(&a),
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(output: &Path, command: &str, args: &impl Serialize, rc: &RunConfig, results: Value) -> Result<()> {
    let manifest = json!({
        "tool": "binflux",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "arguments": args,
        "config": rc,
        "fingerprint": rc.system.fingerprint(),
        "output": output.file_name().map(|f| f.to_string_lossy().into_owned()),
        "results": results,
    });
    fs::write(manifest_path(output), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

// A closed pipe (`binflux presets | head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read_manifest_config(data: &Path) -> Option<RunConfig> {
    let text = fs::read_to_string(manifest_path(data)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    serde_json::from_value(v.get("config")?.clone()).ok()
}

fn seed_of(flag: Option<u64>, rc: &RunConfig) -> Result<u64> {
    flag.or(rc.seed).ok_or_else(|| Error::Input("--seed is required for Monte Carlo runs".into()))
}

fn run_presets(a: &PresetsArgs) -> Result<()> {
    let names: Vec<&str> = match &a.name {
        Some(n) => vec![n.as_str()],
        None => PRESET_NAMES.to_vec(),
    };
    let mut out = serde_json::Map::new();
    for name in names {
        let cfg = SystemConfig::preset(name)?;
        let w = cfg.bin_weights()?;
        let timing = validate_timing(&w, cfg.detector.deadtime, cfg.guard());
        out.insert(
            name.to_string(),
            json!({ "config": cfg, "fingerprint": cfg.fingerprint(), "bins": cfg.bins(), "timing": timing }),
        );
    }
    stdout(&(serde_json::to_string_pretty(&Value::Object(out))? + "\n"))
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let mut rc = a.system.resolve()?;
    let source = match (a.mu, a.fock, rc.source) {
        (Some(mu), _, _) => PulseSource::Coherent { mu },
        (None, Some(n), _) => PulseSource::Fock { n_photons: n },
        (None, None, Some(s)) => s,
        (None, None, None) => return Err(Error::Input("one of --mu or --fock is required".into())),
    };
    let seed = seed_of(a.seed, &rc)?;
    let shots = a.shots.unwrap_or(rc.shots);
    rc.source = Some(source);
    rc.seed = Some(seed);
    rc.shots = shots;
    rc.validate()?;

    let weights = rc.system.bin_weights()?;
    let batch = simulate_batch(&source, &weights, &rc.system.detector, shots, seed, a.records)?;
    let hist = &batch.histogram;
    let probs = hist.probabilities();
    match format_of(&a.output, a.format) {
        Format::Csv => {
            let mut s = String::from("n,count,probability\n");
            for (n, (c, p)) in hist.counts.iter().zip(&probs).enumerate() {
                writeln!(s, "{n},{c},{p:.16e}").unwrap();
            }
            fs::write(&a.output, s)?;
        }
        Format::Json => {
            let doc = json!({
                "source": source,
                "shots": shots,
                "seed": seed,
                "fingerprint": rc.system.fingerprint(),
                "counts": hist.counts,
                "probabilities": probs,
            });
            fs::write(&a.output, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
    }
    if let Some(records) = &batch.records {
        let mut s = String::from("shot_index,n,pattern\n");
        for r in records {
            let bits: String = r.pattern.iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(s, "{},{},{bits}", r.shot_index, r.n).unwrap();
        }
        let mut path = a.output.as_os_str().to_owned();
        path.push(".records.csv");
        fs::write(PathBuf::from(path), s)?;
    }
    write_manifest(&a.output, "simulate", a, &rc, json!({ "mean_clicks": hist.mean() }))
}

fn build_from(
    rc: &RunConfig,
    mu_max: usize,
    method: MethodArg,
    shots: Option<u64>,
    seed: Option<u64>,
    support: Option<&Vec<usize>>,
) -> Result<ResponseMatrix> {
    let method = match method {
        MethodArg::Exact => Method::Exact,
        MethodArg::Mc => Method::MonteCarlo { shots: shots.unwrap_or(rc.shots), seed: seed_of(seed, rc)? },
    };
    let support = support.map_or(Support::All, |p| Support::Points(p.clone()));
    build_matrix(&rc.system, mu_max, method, support)
}

fn run_matrix(a: &MatrixArgs) -> Result<()> {
    let mut rc = a.system.resolve()?;
    if let Some(m) = a.mu_max {
        rc.mu_max = m;
    }
    if let Some(s) = a.seed {
        rc.seed = Some(s);
    }
    if let Some(s) = a.shots {
        rc.shots = s;
    }
    rc.validate()?;
    let m = build_from(&rc, rc.mu_max, a.method, a.shots, a.seed, a.support.as_ref())?;
    save_matrix(&m, &a.output)?;
    write_manifest(
        &a.output,
        "matrix",
        a,
        &rc,
        json!({ "method": m.method.to_string(), "support_points": m.support_points().len(), "max_normalization_error": m.max_normalization_error() }),
    )
}

fn read_observations(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected a click count: {e}"),
            })
        })
        .collect()
}

fn run_infer(a: &InferArgs) -> Result<()> {
    let m = load_matrix(&a.matrix)?;
    let mut rc = a.system.resolve_or(read_manifest_config(&a.matrix))?;
    if let Some(t) = a.tolerance {
        rc.stability_tolerance = t;
    }
    rc.mu_max = m.mu_max;
    rc.validate()?;
    if let Err(e) = m.verify_fingerprint(&rc.system) {
        if !a.force {
            return Err(e);
        }
        eprintln!("warning: {e}; continuing because of --force");
    }
    let observations = match (a.n, &a.obs) {
        (Some(n), _) => vec![n],
        (None, Some(path)) => read_observations(path)?,
        (None, None) => unreachable!("clap requires --n or --obs"),
    };
    let est = Estimator::new(&rc.system, m, rc.stability_tolerance)?;
    let post = est.multi(&observations)?;
    let ci = credible_interval(&post, a.level);
    let summary = json!({
        "observations": observations,
        "mode": ci.mode,
        "lo": ci.lo,
        "hi": ci.hi,
        "mass": ci.mass,
        "level": ci.level,
        "width": ci.width(),
        "energy_J": interval_to_energy(ci.width() as f64, a.wavelength),
        "wavelength_m": a.wavelength,
        "mu_max": est.matrix.mu_max,
        "max_admissible_n": est.max_admissible_n,
    });
    if let Some(path) = &a.posterior {
        let mut s = String::from("mu,probability\n");
        for (mu, p) in post.probs.iter().enumerate() {
            writeln!(s, "{mu},{p:.16e}").unwrap();
        }
        fs::write(path, s)?;
    }
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    match &a.output {
        Some(path) => {
            fs::write(path, text)?;
            write_manifest(path, "infer", a, &rc, Value::Null)?;
        }
        None => stdout(&text)?,
    }
    Ok(())
}

fn estimator_for(rc: &RunConfig, mu_max: usize, seed: u64) -> Result<Estimator> {
    let method = if rc.system.detector.is_mechanistic() { MethodArg::Mc } else { MethodArg::Exact };
    let m = build_from(rc, mu_max, method, None, Some(seed), None)?;
    Estimator::new(&rc.system, m, rc.stability_tolerance)
}

fn run_compare(a: &CompareArgs) -> Result<()> {
    let mut rc = a.system.resolve()?;
    let seed = seed_of(a.seed, &rc)?;
    rc.seed = Some(seed);
    if let Some(m) = a.mu_max {
        rc.mu_max = m;
    }
    rc.validate()?;
    let est = estimator_for(&rc, rc.mu_max, seed)?;
    let curve = relative_error_curve(&rc.system, &est, a.mu, a.max_shots, a.trials, seed, DEFAULT_LEVEL)?;
    let sp = SinglePixelSpec::tuned(rc.system.detector.efficiency, a.mu, 0.5)?;
    let baseline = baseline_error_curve(a.mu, &sp, a.max_shots, a.baseline_width.into())?;

    let mut s = String::from("shots,rel_err_multiplexed,rel_err_single_pixel\n");
    for (k, (m, b)) in curve.median.iter().zip(&baseline).enumerate() {
        writeln!(s, "{},{m:.16e},{b:.16e}", k + 1).unwrap();
    }
    fs::write(&a.output, s)?;

    let multiplexed = curve.median_shots_to_reach(a.threshold);
    let half = baseline_shots_to_reach(a.mu, &sp, a.threshold, WidthConvention::HalfWidth)?;
    let full = baseline_shots_to_reach(a.mu, &sp, a.threshold, WidthConvention::FullWidth)?;
    let results = json!({
        "threshold": a.threshold,
        "multiplexed_median_shots": multiplexed,
        "single_pixel_shots_half_width": half,
        "single_pixel_shots_full_width": full,
        "ratio_half_width": multiplexed.map(|m| half as f64 / m),
        "ratio_full_width": multiplexed.map(|m| full as f64 / m),
        "max_admissible_n": est.max_admissible_n,
    });
    eprintln!("{}", serde_json::to_string_pretty(&results)?);
    write_manifest(&a.output, "compare", a, &rc, results)
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let mut rc = a.system.resolve()?;
    if let Some(m) = a.mu_max {
        rc.mu_max = m;
    }
    if let Some(s) = a.seed {
        rc.seed = Some(s);
    }
    rc.validate()?;
    let mut s = String::new();
    match a.kind {
        SweepKind::Mu => {
            let grid = a.mu_list.clone().unwrap_or_else(|| (0..=rc.mu_max).step_by(10).map(|m| m as f64).collect());
            let weights = rc.system.bin_weights()?;
            s.push_str("mu,mean_exact,mode_exact,mean_mc,mode_mc,tv_mc_exact\n");
            for mu in grid {
                let exact = coherent_click_distribution(mu, &weights, &rc.system.detector)?;
                write!(s, "{mu},{:.10},{}", exact.mean(), exact.mode()).unwrap();
                if let Some(seed) = rc.seed {
                    let shots = a.shots.unwrap_or(rc.shots);
                    let src = PulseSource::Coherent { mu };
                    let h = simulate_batch(&src, &weights, &rc.system.detector, shots, seed, false)?.histogram;
                    let p = h.probabilities();
                    let mode = crate::exact::argmax(&p);
                    writeln!(s, ",{:.10},{mode},{:.10}", h.mean(), total_variation(&p, &exact.probs)).unwrap();
                } else {
                    s.push_str(",,,\n");
                }
            }
        }
        SweepKind::SingleShot => {
            let est = estimator_for(&rc, rc.mu_max, rc.seed.unwrap_or(0))?;
            let n_max = est.max_admissible_n.unwrap_or(0);
            s.push_str("n,mode,lo,hi,width,mass,energy_J\n");
            for n in 0..=n_max {
                let ci = credible_interval(&est.single(n)?, a.level);
                let e = interval_to_energy(ci.width() as f64, a.wavelength);
                writeln!(s, "{n},{},{},{},{},{:.6},{e:.6e}", ci.mode, ci.lo, ci.hi, ci.width(), ci.mass).unwrap();
            }
        }
        SweepKind::Trajectory => {
            let obs = a.obs.clone().ok_or_else(|| Error::Input("--obs is required for a trajectory sweep".into()))?;
            let est = estimator_for(&rc, rc.mu_max, rc.seed.unwrap_or(0))?;
            for &n in &obs {
                est.check(n)?;
            }
            s.push_str("k,n,mode,lo,hi,width\n");
            for k in 1..=obs.len() {
                let ci = credible_interval(&posterior_multi(&est.matrix, &obs[..k])?, a.level);
                writeln!(s, "{k},{},{},{},{},{}", obs[k - 1], ci.mode, ci.lo, ci.hi, ci.width()).unwrap();
            }
        }
        SweepKind::Shots => {
            let seed = seed_of(a.seed, &rc)?;
            let grid = a.mu_list.clone().unwrap_or_else(|| vec![10.0, 50.0, 100.0]);
            let est = estimator_for(&rc, rc.mu_max, seed)?;
            let curves = grid
                .iter()
                .map(|&mu| relative_error_curve(&rc.system, &est, mu, a.max_shots, a.trials, seed, a.level))
                .collect::<Result<Vec<_>>>()?;
            s.push_str("shots");
            for mu in &grid {
                write!(s, ",rel_err_mu{mu}").unwrap();
            }
            s.push('\n');
            for k in 0..a.max_shots {
                write!(s, "{}", k + 1).unwrap();
                for c in &curves {
                    write!(s, ",{:.16e}", c.median[k]).unwrap();
                }
                s.push('\n');
            }
        }
    }
    fs::write(&a.output, s)?;
    write_manifest(&a.output, "sweep", a, &rc, Value::Null)
}
