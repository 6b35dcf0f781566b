use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sg_extrema::decimation::{constants, phi_branch, psi_inverse, BranchWord, Series, Sign};
use sg_extrema::eigenfunction::{EigenFn, GridHeader, ValueGrid};
use sg_extrema::extrema::{count_discrete, count_exact, CountReport, ExtremaOptions};
use sg_extrema::gasket::{BoundaryKind, GasketGraph, MAX_LEVEL};
use sg_extrema::oracle::{crosscheck_csv, crosscheck_decimation, sample_series, DiscreteSpectrum};
use sg_extrema::projective::{project, RP2Point};
use sg_extrema::regions::{classify_triple, polylines_csv};
use sg_extrema::spectrum::{enumerate_spectrum, spectrum_csv};
use sg_extrema::verify::{self, Suite, VerifyConfig};

/// Environment variable naming the directory for relative output paths.
const OUT_DIR_VAR: &str = "SGX_OUT_DIR";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sg_extrema::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// Verification ran and failed; the report is already printed.
    #[error("verification failed")]
    Failed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use sg_extrema::Error as E;
        match self {
            CliError::Failed => 1,
            CliError::Usage(_) => 2,
            CliError::Core(E::Domain { .. } | E::TrailingMinus | E::LevelTooLarge { .. } | E::Invalid(_)) => 2,
            CliError::Core(E::ForbiddenValue { .. } | E::NoSuchEigenvalue(_)) => 2,
            CliError::Csv(_) | CliError::Json(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    D,
    N,
}

impl From<Kind> for BoundaryKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::D => BoundaryKind::Dirichlet,
            Kind::N => BoundaryKind::Neumann,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
struct RunConfig {
    psi_tol: f64,
    region_tol: f64,
    eig_tol: f64,
    tie_tol: f64,
    depth_cap: usize,
    max_level: usize,
    rng_seed: u64,
    format: Format,
    strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            psi_tol: 1e-13,
            region_tol: 1e-9,
            eig_tol: 1e-8,
            tie_tol: 1e-12,
            depth_cap: 64,
            max_level: 12,
            rng_seed: VerifyConfig::default().seed,
            format: Format::Csv,
            strict: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| CliError::Usage(format!("bad value for {key}: {v:?}")))
}

impl RunConfig {
    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    fn apply(&mut self, text: &str) -> CliResult<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "psi_tol" => self.psi_tol = parse_value(k, v)?,
                "region_tol" => self.region_tol = parse_value(k, v)?,
                "eig_tol" => self.eig_tol = parse_value(k, v)?,
                "tie_tol" => self.tie_tol = parse_value(k, v)?,
                "depth_cap" => self.depth_cap = parse_value(k, v)?,
                "max_level" => self.max_level = parse_value(k, v)?,
                "rng_seed" => self.rng_seed = parse_value(k, v)?,
                "strict" => self.strict = parse_value(k, v)?,
                "format" => {
                    self.format = Format::from_str(v, true).map_err(|_| CliError::Usage(format!("bad format {v:?}")))?
                }
                _ => return Err(CliError::Usage(format!("unknown config key {k:?}"))),
            }
        }
        self.validate()
    }

    fn validate(&self) -> CliResult<()> {
        let tols = [self.psi_tol, self.region_tol, self.eig_tol, self.tie_tol];
        if tols.iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        if self.max_level > MAX_LEVEL {
            return Err(CliError::Usage(format!("max_level must be at most {MAX_LEVEL}")));
        }
        Ok(())
    }

    fn extrema(&self) -> ExtremaOptions {
        ExtremaOptions {
            region_tol: self.region_tol,
            tie_tol: self.tie_tol,
            depth_cap: self.depth_cap,
            max_level: self.max_level,
            strict: self.strict,
        }
    }

    fn verify(&self) -> VerifyConfig {
        VerifyConfig { seed: self.rng_seed, eig_tol: self.eig_tol, psi_tol: self.psi_tol, extrema: self.extrema() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgx", version, about = "Eigenfunctions and their extrema on the Sierpinski gasket")]
struct Cli {
    /// key=value file overriding the default run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format; overrides the config file.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues up to a bound with their series data.
    Spectrum {
        #[arg(long)]
        kind: Kind,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dense spectrum of the level-m graph Laplacian.
    Oracle {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        kind: Kind,
        /// Compare with the decimation prediction.
        #[arg(long)]
        crosscheck: bool,
        /// Emit the graph's edge list instead.
        #[arg(long)]
        edges: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes an eigenfunction on V_level as a grid CSV.
    Eigenfn {
        /// D2, D5, D6, N0, N5, N6, N6p or generic.
        #[arg(long, default_value = "generic")]
        series: String,
        /// Birth level of a named series.
        #[arg(long, default_value_t = 1)]
        m0: usize,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        eps: String,
        /// Boundary values for a generic function.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Option<Vec<f64>>,
        /// Level-0 decimation value of a generic function.
        #[arg(long)]
        lambda0: Option<f64>,
        /// Eigenvalue of a generic function below the first Dirichlet eigenvalue.
        #[arg(long, conflicts_with = "lambda0")]
        lambda: Option<f64>,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Counts the extreme sets of a grid written by `eigenfn`.
    Extrema {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "exact")]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Region of the boundary data of an eigenfunction.
    Classify {
        /// Eigenvalue, or `small` for half the first Dirichlet eigenvalue.
        #[arg(long, conflicts_with = "alpha")]
        lambda: Option<String>,
        /// Level-0 decimation value directly.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<f64>,
        /// Emit the region outlines as CSV.
        #[arg(long)]
        polylines: bool,
    },
    /// Runs a verification suite and prints its JSON report.
    Verify {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: sg_extrema::Error| e.to_string())
}

fn output_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            let p = output_path(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn to_triple(a: &[f64]) -> CliResult<[f64; 3]> {
    a.try_into().map_err(|_| CliError::Usage("--a takes three comma-separated values".into()))
}

/// Reads a grid: a `# {json}` header line, then `c1,c2,c3,value` rows.
fn read_grid(path: &Path) -> CliResult<ValueGrid> {
    let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header_json = first
        .strip_prefix('#')
        .ok_or_else(|| CliError::Usage("grid file must start with a '# {json}' header".into()))?;
    let header: GridHeader = serde_json::from_str(header_json.trim())?;
    let mut rest = String::new();
    reader.read_to_string(&mut rest)?;
    let mut rows = Vec::new();
    for rec in csv::Reader::from_reader(rest.as_bytes()).deserialize() {
        let (c1, c2, c3, v): (u32, u32, u32, f64) = rec?;
        rows.push(([c1, c2, c3], v));
    }
    Ok(ValueGrid::from_rows(header, &rows)?)
}

fn report_csv(rep: &CountReport) -> String {
    let mut out = String::from("kind,locus_type,word_or_vertex,value\n");
    for s in &rep.sets {
        out.push_str(&format!("{},{},{},{:e}\n", s.kind, s.locus.type_name(), s.locus.label(), s.value));
    }
    out
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply(&fs::read_to_string(path)?)?;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    match cli.command {
        Command::Spectrum { kind, max, out } => {
            let entries = enumerate_spectrum(kind.into(), max)?;
            let text = match cfg.format {
                Format::Csv => spectrum_csv(&entries),
                Format::Json => pretty(&entries)?,
            };
            emit(&text, out.as_deref())
        }
        Command::Oracle { level, kind, crosscheck, edges, out } => {
            let text = if edges {
                GasketGraph::build(level)?.edge_list_csv()
            } else if crosscheck {
                let rows = crosscheck_decimation(level, kind.into(), cfg.eig_tol)?;
                let ok = rows.iter().all(|r| r.matched);
                let text = match cfg.format {
                    Format::Csv => crosscheck_csv(&rows),
                    Format::Json => pretty(&rows)?,
                };
                emit(&text, out.as_deref())?;
                return if ok { Ok(()) } else { Err(CliError::Failed) };
            } else {
                let spec = DiscreteSpectrum::compute(level, kind.into())?;
                let pairs = spec.multiset();
                match cfg.format {
                    Format::Csv => {
                        let mut s = String::from("level,kind,lambda_m,multiplicity\n");
                        for (v, m) in pairs {
                            s.push_str(&format!("{level},{},{v:.12},{m}\n", BoundaryKind::from(kind)));
                        }
                        s
                    }
                    Format::Json => pretty(&json!({"level": level, "kind": BoundaryKind::from(kind).to_string(), "pairs": pairs}))?,
                }
            };
            emit(&text, out.as_deref())
        }
        Command::Eigenfn { series, m0, eps, a, lambda0, lambda, level, out } => {
            if level > cfg.max_level {
                return Err(CliError::Usage(format!("level {level} exceeds max_level {}", cfg.max_level)));
            }
            let series: Series = series.parse()?;
            let eps: BranchWord = eps.parse()?;
            let f = if series == Series::Generic {
                let a = to_triple(a.as_deref().ok_or_else(|| CliError::Usage("generic functions need --a".into()))?)?;
                match (lambda0, lambda) {
                    (Some(l0), _) => EigenFn::u_eps(l0, eps, a)?,
                    (None, Some(l)) if eps.is_empty() => EigenFn::small(l, a)?,
                    (None, Some(_)) => return Err(CliError::Usage("--lambda takes no branch word; use --lambda0".into())),
                    (None, None) => return Err(CliError::Usage("generic functions need --lambda0 or --lambda".into())),
                }
            } else {
                if a.is_some() {
                    return Err(CliError::Usage("named series are sampled from their eigenspace; drop --a".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                sample_series(series, m0, eps, &mut rng)?
            };
            emit(&f.extend(level)?.to_csv(), Some(&out))
        }
        Command::Extrema { input, method, out } => {
            let grid = read_grid(&input)?;
            let rep = match method {
                Method::Exact => count_exact(&grid.to_eigenfn()?, &cfg.extrema())?,
                Method::Discrete => count_discrete(&grid, cfg.tie_tol),
            };
            let text = match cfg.format {
                Format::Csv => report_csv(&rep),
                Format::Json => pretty(&rep.to_json())?,
            };
            emit(&text, out.as_deref())
        }
        Command::Classify { lambda, alpha, a, polylines } => {
            let a = to_triple(&a)?;
            let alpha = match (alpha, lambda.as_deref()) {
                (Some(x), _) => x,
                (None, Some("small")) => psi_inverse(constants().lambda1_dirichlet / 2.0)?,
                (None, Some(s)) => psi_inverse(parse_value("--lambda", s)?)?,
                (None, None) => return Err(CliError::Usage("classify needs --lambda or --alpha".into())),
            };
            if polylines {
                return emit(&polylines_csv(alpha, phi_branch(Sign::Minus, alpha)?), None);
            }
            let c = classify_triple(alpha, a, cfg.region_tol)?;
            let tau: Value = match project(a) {
                RP2Point::Affine(x) => json!(x),
                RP2Point::Infinite(d) => json!({"infinite": d}),
            };
            let class = serde_json::to_value(c.class)?;
            let text = match cfg.format {
                Format::Csv => {
                    let (t1, t2) = match project(a) {
                        RP2Point::Affine(x) => (x[0].to_string(), x[1].to_string()),
                        RP2Point::Infinite(d) => (format!("inf:{}", d[0]), format!("inf:{}", d[1])),
                    };
                    format!(
                        "alpha,class,tau1,tau2,near_boundary\n{alpha},{},{t1},{t2},{}\n",
                        class_label(&class),
                        c.near_boundary
                    )
                }
                Format::Json => pretty(&json!({
                    "alpha": alpha,
                    "class": class_label(&class),
                    "tau": tau,
                    "near_boundary": c.near_boundary,
                    "near_median": c.near_median,
                }))?,
            };
            emit(&text, None)
        }
        Command::Verify { suite, out } => {
            let report = verify::run(suite, &cfg.verify())?;
            emit(&pretty(&report)?, out.as_deref())?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Failed)
            }
        }
    }
}

/// `Theta`, `SegmentL(12)`, `SubTriangleG(2)` and so on.
fn class_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Object(m) => m
            .iter()
            .next()
            .map(|(k, x)| match x {
                Value::String(s) => format!("{k}({s})"),
                other => format!("{k}({other})"),
            })
            .unwrap_or_default(),
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("sgx: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
