//! Commands behind the `confdim` binary: space generation, dimension
//! estimation, convergence experiments and hyperbolicity reports.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use confdim::annulus::{compute_scale_constants, ModulusCurve, Truncation};
use confdim::convergence::{run_semicontinuity_experiment, ExperimentConfig};
use confdim::dimension::{estimate_for_space, DimensionConfig, DimensionEstimate};
use confdim::fmt::round_sig;
use confdim::hyperbolic::{
    four_point_delta, four_point_delta_sampled, product_inequality_violations, HyperbolicityReport, TreeSpace,
    EXHAUSTIVE_MAX,
};
use confdim::modulus::AdjacencyRule;
use confdim::spaces::{generate, QssCertificate, SpaceDescriptor};
use confdim::{FiniteMetricSpace, SpaceDocument};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RESOLUTION: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "confdim", version, about = "Conformal dimension of finite metric spaces via annulus moduli")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a finite approximation from a space descriptor.
    Generate {
        /// Descriptor JSON, inline or as a file path.
        input: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the conformal dimension of a space.
    Dimension {
        /// Descriptor, generated space, space document or tree, inline or as a file path.
        input: String,
        #[command(flatten)]
        options: DimensionOptions,
        #[command(flatten)]
        output: OutputOptions,
    },
    /// Run a semicontinuity experiment along a sequence of spaces.
    Converge {
        /// Experiment JSON `{"sequence": [...], "limit": ..., "dimension": {...}}`.
        experiment: String,
        #[command(flatten)]
        options: DimensionOptions,
        #[command(flatten)]
        output: OutputOptions,
    },
    /// Four-point hyperbolicity constant of a space.
    Hyperbolicity {
        input: String,
        /// Scan a random subsample of this many points.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Adjacency {
    Surrogate,
    Witness,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Dimension settings. Unset flags fall back to `--config`, then to the
/// defaults `base 10, λ 10, L1 3, L2 4`.
#[derive(Clone, Debug, Default, Args)]
pub struct DimensionOptions {
    /// Dimension configuration JSON (file path or inline).
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub base: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "L1")]
    pub l1: Option<f64>,
    #[arg(long = "L2")]
    pub l2: Option<f64>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Supremum over outer levels `0..=imax`.
    #[arg(long, conflicts_with = "use_n0")]
    pub imax: Option<usize>,
    /// Supremum over outer levels `0..=n0` with `n0` from `--L0` and `--rho0`
    /// (or the space's certificate).
    #[arg(long)]
    pub use_n0: bool,
    #[arg(long = "L0", requires = "use_n0")]
    pub l0: Option<f64>,
    #[arg(long, requires = "use_n0")]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub k_first: Option<usize>,
    #[arg(long)]
    pub k_last: Option<usize>,
    #[arg(long)]
    pub p_lo: Option<f64>,
    #[arg(long)]
    pub p_hi: Option<f64>,
    #[arg(long)]
    pub p_tol: Option<f64>,
    #[arg(long)]
    pub decay_eps: Option<f64>,
    #[arg(long)]
    pub k_tail: Option<usize>,
    /// Tail log-slope band of the decay rule.
    #[arg(long)]
    pub slope_band: Option<f64>,
    #[arg(long, value_enum)]
    pub adjacency: Option<Adjacency>,
    /// Relative optimality gap of each modulus solve.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct OutputOptions {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (a directory for `converge --format csv`); stdout if unset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: message.into() }
    }
}

impl From<confdim::Error> for Failure {
    fn from(e: confdim::Error) -> Self {
        let code = match e {
            confdim::Error::InvalidInput(_) | confdim::Error::Json(_) => EXIT_INVALID,
            confdim::Error::InsufficientResolution(_) | confdim::Error::Budget(_) | confdim::Error::TooLarge(_) => {
                EXIT_RESOLUTION
            }
        };
        Self { code, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

/// Files produced by a command. `inconclusive` maps to exit code 4.
#[derive(Debug, Default)]
pub struct Report {
    /// Main document; written to `--out` or stdout.
    pub body: String,
    /// Additional `(file name, contents)` pairs, written next to the main
    /// document.
    pub extra: Vec<(String, String)>,
    pub inconclusive: bool,
}

impl DimensionOptions {
    /// Merges flags over `base` (the `--config` file, or the defaults).
    pub fn resolve(&self, base: Option<DimensionConfig>, certificate: Option<&QssCertificate>) -> CmdResult<DimensionConfig> {
        let mut c = match (&self.config, base) {
            (Some(src), _) => serde_json::from_str(&read_input(src)?)?,
            (None, Some(b)) => b,
            (None, None) => DimensionConfig::default(),
        };
        set(&mut c.base, self.base);
        set(&mut c.curve.lambda, self.lambda);
        set(&mut c.curve.l1, self.l1);
        set(&mut c.curve.l2, self.l2);
        set(&mut c.curve.tol, self.tol);
        set(&mut c.k_first, self.k_first);
        set(&mut c.p_lo, self.p_lo);
        set(&mut c.p_hi, self.p_hi);
        set(&mut c.p_tol, self.p_tol);
        set(&mut c.decay.eps_decay, self.decay_eps);
        set(&mut c.decay.k_tail, self.k_tail);
        if self.kmax.is_some() {
            c.k_max = self.kmax;
        }
        if self.k_last.is_some() {
            c.k_last = self.k_last;
        }
        if self.slope_band.is_some() {
            c.decay.slope_band = self.slope_band;
        }
        if let Some(a) = self.adjacency {
            c.curve.rule = match a {
                Adjacency::Surrogate => AdjacencyRule::DistanceSurrogate,
                Adjacency::Witness => AdjacencyRule::WitnessPoint,
            };
        }
        if let Some(i_max) = self.imax {
            c.truncation = Truncation::Full { i_max };
        }
        if self.use_n0 {
            let (l0, rho0) = match (self.l0, self.rho0, certificate) {
                (Some(l0), Some(rho0), _) => (l0, rho0),
                (l0, rho0, Some(cert)) => (l0.unwrap_or(cert.l0), rho0.unwrap_or(cert.rho0)),
                _ => return Err(Failure::invalid("--use-n0 needs --L0 and --rho0 or a certified space")),
            };
            let n0 = compute_scale_constants(l0, rho0, c.base)?.n0;
            c.truncation = Truncation::Truncated { n0 };
        }
        c.validate()?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Inline JSON (starting with `{`) or the contents of a file.
pub fn read_input(arg: &str) -> CmdResult<String> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg).map_err(|e| Failure::invalid(format!("cannot read {arg}: {e}")))
}

/// Document written by `generate`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratedDocument {
    pub descriptor: SpaceDescriptor,
    pub points: usize,
    pub hausdorff_dimension: Option<f64>,
    pub certificate: Option<QssCertificate>,
    pub space: SpaceDocument,
}

/// A space read from any accepted input form.
pub struct LoadedSpace {
    pub space: FiniteMetricSpace,
    pub descriptor: Option<SpaceDescriptor>,
    pub certificate: Option<QssCertificate>,
}

/// Accepts a descriptor, a generated document, a tree `{"edges", "root"}`
/// (path metric on all vertices) or a plain space document.
pub fn load_space(text: &str) -> CmdResult<LoadedSpace> {
    let v: Value = serde_json::from_str(text)?;
    let obj = v.as_object().ok_or_else(|| Failure::invalid("expected a JSON object"))?;
    if obj.contains_key("kind") {
        let d = SpaceDescriptor::from_json(text)?;
        let g = generate(&d)?;
        return Ok(LoadedSpace { space: g.space, descriptor: Some(d), certificate: g.certificate });
    }
    if obj.contains_key("space") {
        let doc: GeneratedDocument = serde_json::from_value(v)?;
        let space = FiniteMetricSpace::from_document(doc.space)?;
        return Ok(LoadedSpace { space, descriptor: Some(doc.descriptor), certificate: doc.certificate });
    }
    if obj.contains_key("edges") {
        let tree = TreeSpace::from_json(text)?;
        return Ok(LoadedSpace { space: tree.to_metric_space(None)?, descriptor: None, certificate: None });
    }
    let space = FiniteMetricSpace::from_json(text)?;
    Ok(LoadedSpace { space, descriptor: None, certificate: None })
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> CmdResult<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CmdResult<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Failure::invalid("--threads must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::invalid(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn cmd_generate(input: &str) -> CmdResult<Report> {
    let d = SpaceDescriptor::from_json(&read_input(input)?)?;
    let g = generate(&d)?;
    let doc = GeneratedDocument {
        descriptor: d,
        points: g.space.len(),
        hausdorff_dimension: g.hausdorff_dimension,
        certificate: g.certificate,
        space: g.space.to_document(),
    };
    Ok(Report { body: to_json(&doc)?, ..Report::default() })
}

#[derive(Serialize)]
struct DimensionDocument<'a> {
    descriptor: Option<&'a SpaceDescriptor>,
    points: usize,
    diameter: f64,
    resolution_floor: f64,
    estimate: &'a DimensionEstimate,
}

fn curves_csv<'a>(curves: impl Iterator<Item = &'a ModulusCurve>) -> String {
    let mut out = String::from(ModulusCurve::CSV_HEADER);
    out.push('\n');
    for c in curves {
        for row in c.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

fn unresolved(e: &DimensionEstimate) -> bool {
    e.inconclusive || e.vanishes_witness.is_none()
}

pub fn cmd_dimension(input: &str, options: &DimensionOptions, format: Format) -> CmdResult<Report> {
    let loaded = load_space(&read_input(input)?)?;
    let config = options.resolve(None, loaded.certificate.as_ref())?;
    let estimate = with_threads(options.threads, || estimate_for_space(&loaded.space, &config))??;
    let body = match format {
        Format::Json => to_json(&DimensionDocument {
            descriptor: loaded.descriptor.as_ref(),
            points: loaded.space.len(),
            diameter: loaded.space.diameter(),
            resolution_floor: loaded.space.resolution_floor(),
            estimate: &estimate,
        })?,
        Format::Csv => curves_csv(estimate.probes.iter().map(|q| &q.curve)),
    };
    Ok(Report { body, extra: Vec::new(), inconclusive: unresolved(&estimate) })
}

pub fn cmd_converge(input: &str, options: &DimensionOptions, format: Format) -> CmdResult<Report> {
    let text = read_input(input)?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)?;
    config.dimension = options.resolve(Some(config.dimension.clone()), None)?;
    let experiment = with_threads(options.threads, || run_semicontinuity_experiment(&config))??;
    let inconclusive = experiment.estimates.iter().chain(std::iter::once(&experiment.limit_estimate)).any(unresolved);
    let mut report = Report { body: to_json(&experiment)?, extra: Vec::new(), inconclusive };
    if format == Format::Csv {
        for (i, e) in experiment.estimates.iter().enumerate() {
            report.extra.push((format!("curves_{i}.csv"), curves_csv(e.probes.iter().map(|q| &q.curve))));
        }
        report
            .extra
            .push(("curves_limit.csv".into(), curves_csv(experiment.limit_estimate.probes.iter().map(|q| &q.curve))));
    }
    Ok(report)
}

#[derive(Serialize)]
struct HyperbolicityDocument {
    #[serde(flatten)]
    report: HyperbolicityReport,
    /// Quadruples violating the Gromov-product form of the inequality at the
    /// computed `δ`; only counted for exhaustive scans.
    product_inequality_violations: Option<usize>,
}

pub fn cmd_hyperbolicity(input: &str, sample: Option<usize>, seed: u64, threads: Option<usize>) -> CmdResult<Report> {
    let loaded = load_space(&read_input(input)?)?;
    let space = &loaded.space;
    let doc = with_threads(threads, || -> CmdResult<HyperbolicityDocument> {
        let report = match sample {
            None if space.len() <= EXHAUSTIVE_MAX => four_point_delta(space)?,
            m => four_point_delta_sampled(space, m.unwrap_or(EXHAUSTIVE_MAX), seed)?,
        };
        let violations = report.exhaustive.then(|| product_inequality_violations(space, report.delta, 1e-12));
        Ok(HyperbolicityDocument { report, product_inequality_violations: violations })
    })??;
    Ok(Report { body: to_json(&doc)?, ..Report::default() })
}

fn write_report(report: &Report, out: Option<&Path>, directory: bool) -> CmdResult<()> {
    let io = |p: &Path, e: std::io::Error| Failure::invalid(format!("cannot write {}: {e}", p.display()));
    match out {
        None => {
            print!("{}", report.body);
            if !report.extra.is_empty() {
                return Err(Failure::invalid("CSV output of this command needs --out"));
            }
        }
        Some(path) if directory => {
            fs::create_dir_all(path).map_err(|e| io(path, e))?;
            let main = path.join("experiment.json");
            fs::write(&main, &report.body).map_err(|e| io(&main, e))?;
            for (name, text) in &report.extra {
                let p = path.join(name);
                fs::write(&p, text).map_err(|e| io(&p, e))?;
            }
        }
        Some(path) => fs::write(path, &report.body).map_err(|e| io(path, e))?,
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (result, out, directory) = match &cli.command {
        Command::Generate { input, out } => (cmd_generate(input), out.clone(), false),
        Command::Dimension { input, options, output } => {
            (cmd_dimension(input, options, output.format), output.out.clone(), false)
        }
        Command::Converge { experiment, options, output } => {
            (cmd_converge(experiment, options, output.format), output.out.clone(), output.format == Format::Csv)
        }
        Command::Hyperbolicity { input, sample, seed, threads, out } => {
            (cmd_hyperbolicity(input, *sample, *seed, *threads), out.clone(), false)
        }
    };
    let outcome = result.and_then(|report| write_report(&report, out.as_deref(), directory).map(|_| report));
    match outcome {
        Ok(report) if report.inconclusive => {
            eprintln!("confdim: the dimension bracket is inconclusive");
            EXIT_INCONCLUSIVE
        }
        Ok(_) => EXIT_OK,
        Err(f) => {
            eprintln!("confdim: {}", f.message);
            f.code
        }
    }
}
