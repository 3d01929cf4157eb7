//! Batch command-line front end for the `inverseq` solvers.
//!
//! Subcommands:
//!
//! * `forward`   — simulate the boundary response of a potential; writes
//!   `r.csv` and `w-kernel.csv`.
//! * `invert`    — recover the potential from a response CSV; writes
//!   `q_hat.csv` and `diagnostics.json`.
//! * `spectral`  — Dirichlet eigenvalue/weight pairs, m-function samples,
//!   and the spectral reconstruction of the connecting kernel; writes
//!   `spectral.csv`, `m.csv`, and `ct_spectral.csv`.
//! * `roundtrip` — forward then invert, with an `error_report.json`.
//! * `compare`   — run several inversion methods on one response and
//!   tabulate their per-node disagreement in `disagreement.csv`.
//!
//! Configuration comes from a JSON file (`--config`) with flag overrides;
//! the resolved configuration is hashed (SHA-256) and the hash is stamped
//! into every output file — as a `# config-hash: ...` comment in CSVs and
//! as a `config_hash` field in JSON reports — so artifacts can be traced
//! to the exact run that produced them. Identical configurations produce
//! bit-identical outputs.
//!
//! Exit codes: 0 success, 2 bad configuration, 3 solver failure,
//! 4 positivity violation under `--strict-positivity`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use inverseq::forward::response_from_kernel;
use inverseq::gl::{gl_classical_solve, gl_local_solve, relabel_connecting};
use inverseq::remling::{remling_solve, RemlingVariant};
use inverseq::simon::simon_from_response;
use inverseq::spectral::ct_from_sigma;
use inverseq::{
    build_connecting_kernel, dirichlet_eigs, io, m_function, recover_q_bc, solve_goursat_picard,
    PotentialSample, ResponseSample, UniformGrid,
};

// ---------------------------------------------------------------------------
// configuration

#[derive(Parser)]
#[command(name = "inverseq", version, about = "Forward and inverse solvers for -d^2/dx^2 + q(x) on the half line, driven from boundary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the boundary response r(t) of a potential
    Forward(Flags),
    /// Recover the potential from a response CSV
    Invert(Flags),
    /// Eigenvalue/weight pairs, m-function, spectral connecting kernel
    Spectral(Flags),
    /// Forward simulation followed by inversion, with an error report
    Roundtrip(Flags),
    /// Run several inversion methods on one response and compare them
    Compare(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward(_) => "forward",
            Command::Invert(_) => "invert",
            Command::Spectral(_) => "spectral",
            Command::Roundtrip(_) => "roundtrip",
            Command::Compare(_) => "compare",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Forward(f)
            | Command::Invert(f)
            | Command::Spectral(f)
            | Command::Roundtrip(f)
            | Command::Compare(f) => f,
        }
    }
}

#[derive(Args, Default)]
struct Flags {
    /// Potential: a CSV path (header `x,q`) or a builtin:
    /// `zero`, `const:<c>`, `sine` (sin(pi x) + 0.5), `step` (1 on [0, L/2])
    #[arg(long)]
    potential: Option<String>,

    /// Response CSV (header `t,value`, sampled on [0, 2T])
    #[arg(long)]
    response: Option<PathBuf>,

    /// Length of the potential interval (builtin potentials only)
    #[arg(long = "L")]
    l: Option<f64>,

    /// Recovery/simulation horizon; must be a grid node, T <= L
    #[arg(long = "T")]
    t: Option<f64>,

    /// Number of potential grid nodes on [0, L]
    #[arg(long)]
    n: Option<usize>,

    /// Truncation tolerance of the characteristic-kernel series
    #[arg(long)]
    tol: Option<f64>,

    /// Inversion method: bc | remling | gl | gl-classical | simon
    /// (comma-separated list of at least two for `compare`)
    #[arg(long)]
    method: Option<String>,

    /// Number of eigenvalue/weight pairs for the spectral subcommand
    #[arg(long = "n-max")]
    n_max: Option<usize>,

    /// Smallest m-function sample point k
    #[arg(long = "k-min")]
    k_min: Option<f64>,

    /// Largest m-function sample point k
    #[arg(long = "k-max")]
    k_max: Option<f64>,

    /// Number of m-function sample points
    #[arg(long = "k-count")]
    k_count: Option<usize>,

    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Exit with code 4 if the quadratic form I + c^T is not positive
    #[arg(long)]
    strict_positivity: bool,

    /// JSON configuration file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fields accepted in a JSON configuration file. Flags override these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    potential: Option<String>,
    response: Option<PathBuf>,
    #[serde(rename = "L")]
    l: Option<f64>,
    #[serde(rename = "T")]
    t: Option<f64>,
    n: Option<usize>,
    tol: Option<f64>,
    method: Option<String>,
    n_max: Option<usize>,
    k_min: Option<f64>,
    k_max: Option<f64>,
    k_count: Option<usize>,
    out: Option<PathBuf>,
    strict_positivity: Option<bool>,
}

/// Fully resolved run configuration; its canonical JSON serialization is
/// what the config hash digests.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: String,
    potential: Option<String>,
    response: Option<String>,
    #[serde(rename = "L")]
    l: Option<f64>,
    #[serde(rename = "T")]
    t: f64,
    n: usize,
    tol: f64,
    method: String,
    n_max: usize,
    k_min: f64,
    k_max: f64,
    k_count: usize,
    out: String,
    strict_positivity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Bc,
    Remling,
    Gl,
    GlClassical,
    Simon,
}

impl Method {
    fn parse(s: &str) -> Result<Method, CliError> {
        match s {
            "bc" => Ok(Method::Bc),
            "remling" => Ok(Method::Remling),
            "gl" => Ok(Method::Gl),
            "gl-classical" => Ok(Method::GlClassical),
            "simon" => Ok(Method::Simon),
            other => Err(CliError::Config(format!(
                "unknown method `{other}` (expected bc | remling | gl | gl-classical | simon)"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Method::Bc => "bc",
            Method::Remling => "remling",
            Method::Gl => "gl",
            Method::GlClassical => "gl-classical",
            Method::Simon => "simon",
        }
    }
}

// ---------------------------------------------------------------------------
// errors and exit codes

#[derive(Debug)]
enum CliError {
    /// Unusable configuration or input file: exit 2.
    Config(String),
    /// A solver reported failure: exit 3.
    Solver(inverseq::Error),
    /// Strict positivity requested and violated: exit 4.
    Positivity { min_eig: f64 },
}

impl From<inverseq::Error> for CliError {
    fn from(e: inverseq::Error) -> Self {
        CliError::Solver(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "bad configuration: {msg}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Positivity { min_eig } => write!(
                f,
                "positivity violation: smallest eigenvalue of I + c^T is {min_eig:.6e}"
            ),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Positivity { .. } => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
// configuration resolution

/// One resolved scalar: flag wins over file wins over default.
fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

struct Resolved {
    config: RunConfig,
    hash: String,
    response_path: Option<PathBuf>,
    out_dir: PathBuf,
    methods: Vec<Method>,
}

fn resolve(command: &Command) -> Result<Resolved, CliError> {
    let flags = command.flags();
    let file: FileConfig = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let potential = flags.potential.clone().or_else(|| file.potential.clone());
    let response_path = flags.response.clone().or_else(|| file.response.clone());
    let l = flags.l.or(file.l);
    let t = flags.t.or(file.t);
    let n = pick(&flags.n, &file.n, 201);
    let tol = pick(&flags.tol, &file.tol, 1e-10);
    let method = pick(&flags.method, &file.method, "bc".to_string());
    let n_max = pick(&flags.n_max, &file.n_max, 200);
    let k_min = pick(&flags.k_min, &file.k_min, 1.0);
    let k_max = pick(&flags.k_max, &file.k_max, 12.0);
    let k_count = pick(&flags.k_count, &file.k_count, 23);
    let out_dir = pick(&flags.out, &file.out, PathBuf::from("out"));
    let strict_positivity = flags.strict_positivity || file.strict_positivity.unwrap_or(false);

    let needs_potential = matches!(
        command,
        Command::Forward(_) | Command::Spectral(_) | Command::Roundtrip(_)
    );
    if needs_potential && potential.is_none() {
        return Err(CliError::Config(format!(
            "`{}` needs --potential",
            command.name()
        )));
    }
    let uses_response = matches!(command, Command::Invert(_) | Command::Compare(_));
    if matches!(command, Command::Invert(_)) && response_path.is_none() {
        return Err(CliError::Config("`invert` needs --response".into()));
    }
    if matches!(command, Command::Compare(_)) && response_path.is_none() && potential.is_none() {
        return Err(CliError::Config(
            "`compare` needs --response or --potential".into(),
        ));
    }
    if !uses_response && response_path.is_some() {
        return Err(CliError::Config(format!(
            "`{}` does not take --response",
            command.name()
        )));
    }

    // Resolve L, the grid size, and T. A CSV potential fixes L and n from
    // its own grid; builtins use the configured values.
    let (l_resolved, n_resolved) = match &potential {
        Some(spec) if !is_builtin(spec) => {
            let q = io::read_potential_csv(spec)
                .map_err(|e| CliError::Config(format!("potential file {spec}: {e}")))?;
            if let Some(l_cfg) = l {
                if (l_cfg - q.grid().length()).abs() > 1e-9 {
                    return Err(CliError::Config(format!(
                        "--L {} disagrees with the potential file (length {})",
                        l_cfg,
                        q.grid().length()
                    )));
                }
            }
            (Some(q.grid().length()), q.grid().n_points())
        }
        Some(_) => {
            let l_val = l.unwrap_or(1.0);
            if !(l_val.is_finite() && l_val > 0.0) {
                return Err(CliError::Config(format!("L must be positive, got {l_val}")));
            }
            (Some(l_val), n)
        }
        None => (None, n),
    };
    if n_resolved < 3 {
        return Err(CliError::Config(format!(
            "need at least 3 grid nodes, got {n_resolved}"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Config(format!("tol must be positive, got {tol}")));
    }

    // T defaults to L when a potential fixes one; `invert`/`compare` on a
    // response file default to the horizon stored in the file (resolved
    // later, once the file is read; 0 stands for "use the data horizon").
    let t_resolved = match t {
        Some(v) => {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("T must be positive, got {v}")));
            }
            if let Some(l_val) = l_resolved {
                if v > l_val + 1e-9 {
                    return Err(CliError::Config(format!("T = {v} exceeds L = {l_val}")));
                }
            }
            v
        }
        None => l_resolved.unwrap_or(0.0),
    };

    let methods: Vec<Method> = method
        .split(',')
        .map(|s| Method::parse(s.trim()))
        .collect::<Result<_, _>>()?;
    match command {
        Command::Compare(_) if methods.len() < 2 => {
            return Err(CliError::Config(
                "`compare` needs at least two comma-separated methods".into(),
            ));
        }
        Command::Invert(_) | Command::Roundtrip(_) if methods.len() != 1 => {
            return Err(CliError::Config(format!(
                "`{}` takes exactly one method",
                command.name()
            )));
        }
        _ => {}
    }

    if matches!(command, Command::Spectral(_)) {
        if n_max < 1 {
            return Err(CliError::Config("n-max must be at least 1".into()));
        }
        if !(k_min.is_finite() && k_max.is_finite() && k_min > 0.0 && k_max >= k_min) {
            return Err(CliError::Config(format!(
                "need 0 < k-min <= k-max, got [{k_min}, {k_max}]"
            )));
        }
        if k_count < 2 {
            return Err(CliError::Config("k-count must be at least 2".into()));
        }
    }

    let config = RunConfig {
        command: command.name().to_string(),
        potential,
        response: response_path
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned()),
        l: l_resolved,
        t: t_resolved,
        n: n_resolved,
        tol,
        method,
        n_max,
        k_min,
        k_max,
        k_count,
        out: out_dir.to_string_lossy().into_owned(),
        strict_positivity,
    };
    let json = serde_json::to_string(&config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let hash = hasher
        .finalize()
        .iter()
        .fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    Ok(Resolved {
        config,
        hash,
        response_path,
        out_dir,
        methods,
    })
}

fn is_builtin(spec: &str) -> bool {
    spec == "zero" || spec == "sine" || spec == "step" || spec.starts_with("const:")
}

fn load_potential(spec: &str, l: f64, n: usize) -> Result<PotentialSample, CliError> {
    if !is_builtin(spec) {
        return io::read_potential_csv(spec)
            .map_err(|e| CliError::Config(format!("potential file {spec}: {e}")));
    }
    let grid = UniformGrid::new(n, l).map_err(CliError::Solver)?;
    let sample = if spec == "zero" {
        PotentialSample::constant(grid, 0.0)
    } else if spec == "sine" {
        PotentialSample::from_fn(grid, |x| (std::f64::consts::PI * x).sin() + 0.5)
    } else if spec == "step" {
        let half = l / 2.0;
        PotentialSample::from_fn(grid, |x| if x <= half + 1e-12 { 1.0 } else { 0.0 })
    } else {
        let c: f64 = spec["const:".len()..]
            .parse()
            .map_err(|e| CliError::Config(format!("bad constant in `{spec}`: {e}")))?;
        if !c.is_finite() {
            return Err(CliError::Config(format!("bad constant in `{spec}`")));
        }
        PotentialSample::constant(grid, c)
    };
    sample.map_err(CliError::Solver)
}

// ---------------------------------------------------------------------------
// command drivers

fn run(command: &Command) -> Result<(), CliError> {
    let rc = resolve(command)?;
    match command {
        Command::Forward(_) => cmd_forward(&rc),
        Command::Invert(_) => cmd_invert(&rc),
        Command::Spectral(_) => cmd_spectral(&rc),
        Command::Roundtrip(_) => cmd_roundtrip(&rc),
        Command::Compare(_) => cmd_compare(&rc),
    }
}

fn header_comments(rc: &Resolved, extra: &[&str]) -> Vec<String> {
    let mut out = vec![format!("config-hash: {}", rc.hash)];
    out.extend(extra.iter().map(|s| s.to_string()));
    out
}

fn simulate(rc: &Resolved) -> Result<(PotentialSample, ResponseSample), CliError> {
    let cfg = &rc.config;
    let spec = cfg.potential.as_deref().expect("validated");
    let q = load_potential(spec, cfg.l.unwrap_or(1.0), cfg.n)?;
    q.grid()
        .index_of(cfg.t)
        .map_err(|e| CliError::Config(format!("T = {} is not a potential grid node: {e}", cfg.t)))?;
    let v = solve_goursat_picard(&q, cfg.t, cfg.tol)?;
    let r = response_from_kernel(&v, &q)?;
    Ok((q, r))
}

fn cmd_forward(rc: &Resolved) -> Result<(), CliError> {
    let cfg = &rc.config;
    let spec = cfg.potential.as_deref().expect("validated");
    let q = load_potential(spec, cfg.l.unwrap_or(1.0), cfg.n)?;
    q.grid()
        .index_of(cfg.t)
        .map_err(|e| CliError::Config(format!("T = {} is not a potential grid node: {e}", cfg.t)))?;
    let v = solve_goursat_picard(&q, cfg.t, cfg.tol)?;
    let w = v.to_wave()?;
    let r = response_from_kernel(&v, &q)?;

    io::write_series_csv(
        rc.out_dir.join("r.csv"),
        ["t", "value"],
        r.grid(),
        r.values(),
        &header_comments(rc, &["boundary response r(t) on [0, 2T]"]),
    )?;
    io::write_matrix_csv(
        rc.out_dir.join("w-kernel.csv"),
        w.grid(),
        w.grid(),
        w.values(),
        &header_comments(
            rc,
            &["wave kernel w(x, t), row x, column t; zero below the diagonal x > t"],
        ),
    )?;
    Ok(())
}

/// Outcome of one inversion method in a uniform shape.
struct Inversion {
    grid: UniformGrid,
    q_values: Vec<f64>,
    /// Largest linear-solve residual, when the method reports one.
    residual: Option<f64>,
    /// Node indices where the method could not produce a value (NaN in
    /// `q_values`).
    gaps: Vec<usize>,
}

fn run_method(method: Method, r: &ResponseSample) -> Result<Inversion, CliError> {
    let t_max = r.horizon();
    let inv = match method {
        Method::Bc => {
            let rec = recover_q_bc(r, t_max)?;
            Inversion {
                grid: rec.grid,
                q_values: rec.q_values,
                residual: Some(rec.residual),
                gaps: rec.gaps,
            }
        }
        Method::Remling => {
            let rec = remling_solve(r, t_max, RemlingVariant::Y)?;
            Inversion {
                grid: rec.grid,
                q_values: rec.q_values,
                residual: Some(rec.residual),
                gaps: rec.gaps,
            }
        }
        Method::Gl => {
            let ck = build_connecting_kernel(r)?;
            let rec = gl_local_solve(&ck)?;
            let gaps = nan_indices(&rec.q_values);
            Inversion {
                grid: ck.grid().clone(),
                q_values: rec.q_values,
                residual: Some(rec.residual),
                gaps,
            }
        }
        Method::GlClassical => {
            let ck = build_connecting_kernel(r)?;
            let rec = gl_classical_solve(&relabel_connecting(&ck), ck.grid())?;
            let gaps = nan_indices(&rec.q_values);
            Inversion {
                grid: rec.grid,
                q_values: rec.q_values,
                residual: Some(rec.residual),
                gaps,
            }
        }
        Method::Simon => {
            let q = simon_from_response(r)?;
            let gaps = nan_indices(q.values());
            Inversion {
                grid: q.grid().clone(),
                q_values: q.values().to_vec(),
                residual: None,
                gaps,
            }
        }
    };
    Ok(inv)
}

fn nan_indices(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_nan())
        .map(|(i, _)| i)
        .collect()
}

fn load_response(rc: &Resolved) -> Result<ResponseSample, CliError> {
    let path = rc.response_path.as_ref().expect("validated");
    let (grid, values) = io::read_series_csv(path)
        .map_err(|e| CliError::Config(format!("response file {}: {e}", path.display())))?;
    let data_t = grid.length() / 2.0;
    let r = ResponseSample::new(data_t, values).map_err(CliError::Solver)?;
    let want_t = rc.config.t;
    if want_t == 0.0 || (want_t - data_t).abs() <= 1e-9 {
        return Ok(r);
    }
    if want_t > data_t + 1e-9 {
        return Err(CliError::Config(format!(
            "response covers [0, {}], cannot invert with T = {want_t}",
            2.0 * data_t
        )));
    }
    // restrict to [0, 2T]; 2T must land on an even node so T stays a node
    // of the half grid
    let idx = grid
        .index_of(2.0 * want_t)
        .map_err(|e| CliError::Config(format!("2T = {} is not a response node: {e}", 2.0 * want_t)))?;
    if idx % 2 != 0 {
        return Err(CliError::Config(format!(
            "T = {want_t} is not a node of the half grid of the response"
        )));
    }
    ResponseSample::new(want_t, r.values()[..=idx].to_vec()).map_err(CliError::Solver)
}

/// Positivity gate shared by every inversion path: report the smallest
/// eigenvalue of I + c^T and fail (exit 4) in strict mode if it is not
/// positive.
fn positivity_gate(
    rc: &Resolved,
    r: &ResponseSample,
) -> Result<inverseq::PositivityReport, CliError> {
    let ck = build_connecting_kernel(r)?;
    let report = ck.positivity_margin();
    if rc.config.strict_positivity && !report.positive {
        return Err(CliError::Positivity {
            min_eig: report.min_eig,
        });
    }
    Ok(report)
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
    method: &'a str,
    positivity: PositivityJson,
    /// Largest linear-solve residual; absent for marching methods.
    residual: Option<f64>,
    /// Node indices with no recovered value.
    gaps: &'a [usize],
    n_nodes: usize,
}

#[derive(Serialize)]
struct PositivityJson {
    min_eig: f64,
    positive: bool,
    n: usize,
}

impl From<inverseq::PositivityReport> for PositivityJson {
    fn from(p: inverseq::PositivityReport) -> Self {
        PositivityJson {
            min_eig: p.min_eig,
            positive: p.positive,
            n: p.n,
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path).map_err(inverseq::Error::from)?);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Solver(inverseq::Error::Numeric(e.to_string())))?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::Solver(e.into()))
}

fn cmd_invert(rc: &Resolved) -> Result<(), CliError> {
    let r = load_response(rc)?;
    let positivity = positivity_gate(rc, &r)?;
    let method = rc.methods[0];
    let inv = run_method(method, &r)?;

    io::write_series_csv(
        rc.out_dir.join("q_hat.csv"),
        ["x", "q"],
        &inv.grid,
        &inv.q_values,
        &header_comments(
            rc,
            &[&format!(
                "recovered potential, method {}; NaN marks gap nodes",
                method.name()
            )],
        ),
    )?;
    write_json(
        &rc.out_dir.join("diagnostics.json"),
        &Diagnostics {
            config_hash: &rc.hash,
            config: &rc.config,
            method: method.name(),
            positivity: positivity.into(),
            residual: inv.residual,
            gaps: &inv.gaps,
            n_nodes: inv.q_values.len(),
        },
    )
}

fn cmd_spectral(rc: &Resolved) -> Result<(), CliError> {
    let cfg = &rc.config;
    let spec = cfg.potential.as_deref().expect("validated");
    let q = load_potential(spec, cfg.l.unwrap_or(1.0), cfg.n)?;
    let length = q.grid().length();
    let sd = dirichlet_eigs(&q, length, cfg.n_max)?;

    let mut out = BufWriter::new(
        File::create(rc.out_dir.join("spectral.csv")).map_err(inverseq::Error::from)?,
    );
    (|| -> std::io::Result<()> {
        writeln!(out, "# config-hash: {}", rc.hash)?;
        writeln!(
            out,
            "# Dirichlet eigenvalue/weight pairs on [0, L] next to the q = 0 reference pairs"
        )?;
        writeln!(out, "n,lambda,alpha,lambda0,alpha0")?;
        for i in 0..sd.n_max() {
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                sd.lambdas[i],
                sd.alphas[i],
                sd.lambdas0[i],
                sd.alphas0[i]
            )?;
        }
        Ok(())
    })()
    .map_err(|e| CliError::Solver(e.into()))?;

    let k_values: Vec<f64> = (0..cfg.k_count)
        .map(|i| {
            cfg.k_min + (cfg.k_max - cfg.k_min) * i as f64 / (cfg.k_count - 1) as f64
        })
        .collect();
    let m = m_function(&q, length, &k_values)?;
    let mut out =
        BufWriter::new(File::create(rc.out_dir.join("m.csv")).map_err(inverseq::Error::from)?);
    (|| -> std::io::Result<()> {
        writeln!(out, "# config-hash: {}", rc.hash)?;
        writeln!(out, "# Titchmarsh-Weyl samples m(-k^2)")?;
        writeln!(out, "k,m")?;
        for (k, mv) in m.k_values.iter().zip(&m.m_values) {
            writeln!(out, "{k},{mv}")?;
        }
        Ok(())
    })()
    .map_err(|e| CliError::Solver(e.into()))?;

    let ck = ct_from_sigma(&sd, cfg.t, cfg.n)?;
    io::write_matrix_csv(
        rc.out_dir.join("ct_spectral.csv"),
        ck.grid(),
        ck.grid(),
        ck.values(),
        &header_comments(
            rc,
            &[&format!(
                "connecting kernel c(s, tau) from the first {} eigenvalue/weight pairs",
                cfg.n_max
            )],
        ),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
    method: &'a str,
    /// Errors over all comparable nodes (gap nodes excluded).
    l_inf_abs: f64,
    l2_abs: f64,
    /// Same errors relative to the true potential's norms; absent when the
    /// true potential is identically zero.
    l_inf_rel: Option<f64>,
    l2_rel: Option<f64>,
    /// Same errors restricted to x >= 0.05 T, away from the one-sided
    /// stencils at the left edge.
    l_inf_abs_interior: f64,
    l_inf_rel_interior: Option<f64>,
    n_gap_nodes: usize,
}

fn cmd_roundtrip(rc: &Resolved) -> Result<(), CliError> {
    let (q, r) = simulate(rc)?;
    io::write_series_csv(
        rc.out_dir.join("r.csv"),
        ["t", "value"],
        r.grid(),
        r.values(),
        &header_comments(rc, &["boundary response r(t) on [0, 2T]"]),
    )?;

    let positivity = positivity_gate(rc, &r)?;
    let method = rc.methods[0];
    let inv = run_method(method, &r)?;
    io::write_series_csv(
        rc.out_dir.join("q_hat.csv"),
        ["x", "q"],
        &inv.grid,
        &inv.q_values,
        &header_comments(
            rc,
            &[&format!(
                "recovered potential, method {}; NaN marks gap nodes",
                method.name()
            )],
        ),
    )?;
    write_json(
        &rc.out_dir.join("diagnostics.json"),
        &Diagnostics {
            config_hash: &rc.hash,
            config: &rc.config,
            method: method.name(),
            positivity: positivity.into(),
            residual: inv.residual,
            gaps: &inv.gaps,
            n_nodes: inv.q_values.len(),
        },
    )?;

    // error norms of q_hat against the true potential on the recovery grid
    let h = inv.grid.step();
    let interior_lo = 0.05 * rc.config.t;
    let mut sup = 0.0f64;
    let mut sup_int = 0.0f64;
    let mut sum_sq = 0.0;
    let mut ref_sup = 0.0f64;
    let mut ref_sum_sq = 0.0;
    let mut ref_sup_int = 0.0f64;
    let mut gap_count = 0usize;
    for (i, &v) in inv.q_values.iter().enumerate() {
        let x = inv.grid.node(i);
        let truth = q.eval(x);
        if v.is_nan() {
            gap_count += 1;
            continue;
        }
        let d = (v - truth).abs();
        sup = sup.max(d);
        sum_sq += d * d * h;
        ref_sup = ref_sup.max(truth.abs());
        ref_sum_sq += truth * truth * h;
        if x >= interior_lo {
            sup_int = sup_int.max(d);
            ref_sup_int = ref_sup_int.max(truth.abs());
        }
    }
    let rel = |num: f64, den: f64| if den > 1e-12 { Some(num / den) } else { None };
    write_json(
        &rc.out_dir.join("error_report.json"),
        &ErrorReport {
            config_hash: &rc.hash,
            config: &rc.config,
            method: method.name(),
            l_inf_abs: sup,
            l2_abs: sum_sq.sqrt(),
            l_inf_rel: rel(sup, ref_sup),
            l2_rel: rel(sum_sq.sqrt(), ref_sum_sq.sqrt()),
            l_inf_abs_interior: sup_int,
            l_inf_rel_interior: rel(sup_int, ref_sup_int),
            n_gap_nodes: gap_count,
        },
    )
}

fn cmd_compare(rc: &Resolved) -> Result<(), CliError> {
    let r = match &rc.response_path {
        Some(_) => load_response(rc)?,
        None => simulate(rc)?.1,
    };
    positivity_gate(rc, &r)?;

    let mut inversions = Vec::new();
    for &m in &rc.methods {
        inversions.push((m, run_method(m, &r)?));
    }
    let n = inversions[0].1.q_values.len();
    for (m, inv) in &inversions {
        if inv.q_values.len() != n {
            return Err(CliError::Solver(inverseq::Error::Contract(format!(
                "method {} recovered {} nodes, expected {n}",
                m.name(),
                inv.q_values.len()
            ))));
        }
    }

    let grid = inversions[0].1.grid.clone();
    let mut out = BufWriter::new(
        File::create(rc.out_dir.join("disagreement.csv")).map_err(inverseq::Error::from)?,
    );
    (|| -> std::io::Result<()> {
        writeln!(out, "# config-hash: {}", rc.hash)?;
        writeln!(
            out,
            "# per-node recoveries and the largest pairwise gap; NaN marks gap nodes"
        )?;
        write!(out, "x")?;
        for (m, _) in &inversions {
            write!(out, ",q_{}", m.name().replace('-', "_"))?;
        }
        writeln!(out, ",max_disagreement")?;
        for i in 0..n {
            write!(out, "{}", grid.node(i))?;
            let vals: Vec<f64> = inversions.iter().map(|(_, inv)| inv.q_values[i]).collect();
            for v in &vals {
                write!(out, ",{v}")?;
            }
            let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
            let spread = if finite.len() >= 2 {
                let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            } else {
                f64::NAN
            };
            writeln!(out, ",{spread}")?;
        }
        Ok(())
    })()
    .map_err(|e| CliError::Solver(e.into()))?;
    Ok(())
}
