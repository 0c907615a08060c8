//! Command-line front end. Exit codes: 0 pass, 1 verification failure,
//! 2 usage or parse error, 3 numeric failure.

use crate::approx::{classify_smoothness, pyramid_norms, single_pyramid, ClassifyOptions};
use crate::digraph::{
    build_directed_pair, frame_check, levels_to_cover, tau_pyramid, to_complex, DirectedPair, FRAME_SLACK,
};
use crate::error::{Error, Result};
use crate::filters::{make_filter, LowPassFilter};
use crate::io::{self, FilterConfig, Loaded, DEGENERATE_TOL};
use crate::jacobi::{build_circle_system, build_hemisphere_disc_pair, disc_eval, verify_jacobi_ultra, PairConfig};
use crate::system::{build_undirected_system, AdmissibleSystem, FunctionSamples, LaplacianKind, UndirectedOptions};
use crate::tauber::{measure_from_system, verify_localization, LocalizationStatus};
use crate::twosys::{
    joint_lift, landmark_connection, tensor_lift, ConnectionMatrix, JointEigenRule, LiftOptions, LiftReport,
};
use crate::VERSION;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "diffharm",
    version,
    about = "Spectral analysis, smoothness estimates and lifting on data-defined spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON job configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub builtin: Option<Builtin>,
    /// Grid size for builtin systems.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub filter_order: Option<u32>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Number of modes (largest frequency for the circle).
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Dyadic depth J.
    #[arg(long, global = true)]
    pub levels: Option<u32>,
    /// Norm exponent: 1, 2 or inf.
    #[arg(long, global = true)]
    pub p: Option<String>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Circle,
    JacobiPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Localization,
    Frame,
    Jacobi,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftMode {
    Tensor,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianArg {
    Combinatorial,
    RandomWalk,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a system or directed pair and write it as JSON.
    Build {
        /// Point cloud CSV (undirected Gaussian-kernel system).
        #[arg(long)]
        points: Option<PathBuf>,
        /// Dense weight matrix CSV (directed pair).
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Edge list CSV `src,dst,weight` (directed pair).
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long, value_enum)]
        laplacian: Option<LaplacianArg>,
    },
    /// Dyadic pyramid, frame check and smoothness estimate of a function.
    Analyze {
        /// System or pair JSON; `--builtin circle` works instead.
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long)]
        function: PathBuf,
    },
    /// Lift a function from system 2 to system 1.
    Lift {
        #[arg(long)]
        sys1: Option<PathBuf>,
        #[arg(long)]
        sys2: Option<PathBuf>,
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[arg(long)]
        connection: Option<PathBuf>,
        /// Samples on system 2; the Jacobi builtin has a default band-limited function.
        #[arg(long)]
        function: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<LiftMode>,
    },
    /// Run a numerical verification and exit 1 if it fails.
    Verify {
        #[arg(value_enum)]
        target: Target,
    },
}

/// Job parameters read from `--config`; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub filter: Option<FilterConfig>,
    pub builtin: Option<Builtin>,
    pub n: Option<usize>,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub levels: Option<u32>,
    pub p: Option<PSpec>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub functions_per_trial: Option<usize>,
    pub rate_exponent: Option<f64>,
    pub mode: Option<LiftMode>,
    pub laplacian: Option<LaplacianArg>,
    /// Hemisphere/disc grid and truncation for the Jacobi builtin.
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
    pub j_max: Option<usize>,
    pub m_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PSpec {
    Number(f64),
    Text(String),
}

fn parse_p(spec: &PSpec) -> Result<f64> {
    let p = match spec {
        PSpec::Number(v) => *v,
        PSpec::Text(s) => match s.trim() {
            "inf" | "infinity" | "Inf" => f64::INFINITY,
            t => t.parse().map_err(|_| Error::InvalidArgument(format!("--p {t:?}: expected 1, 2 or inf")))?,
        },
    };
    if p == 1.0 || p == 2.0 || p.is_infinite() {
        Ok(p)
    } else {
        Err(Error::InvalidArgument(format!("p = {p}: expected 1, 2 or inf")))
    }
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// Config file merged with flag overrides.
#[derive(Debug, Clone)]
struct Job {
    cfg: JobConfig,
    out: Option<PathBuf>,
}

impl Job {
    fn load(common: &Common) -> Result<Self> {
        let mut cfg: JobConfig = match &common.config {
            Some(path) => io::from_json(&std::fs::read_to_string(path)?)?,
            None => JobConfig::default(),
        };
        if let Some(s) = common.filter_order {
            cfg.filter = Some(FilterConfig { order: s, profile: crate::filters::Profile::SmoothedPolynomial });
        }
        macro_rules! over {
            ($($f:ident),*) => { $( if common.$f.is_some() { cfg.$f = common.$f.clone(); } )* };
        }
        over!(builtin, n, epsilon, k, levels, tol, seed, trials);
        if let Some(p) = &common.p {
            cfg.p = Some(PSpec::Text(p.clone()));
        }
        if let Some(p) = &cfg.p {
            parse_p(p)?;
        }
        Ok(Self { cfg, out: common.out.clone() })
    }

    fn filter(&self) -> Result<LowPassFilter> {
        match &self.cfg.filter {
            Some(f) => f.build(),
            None => make_filter(4),
        }
    }

    fn p(&self) -> Result<f64> {
        self.cfg.p.as_ref().map_or(Ok(2.0), parse_p)
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn echo(&self) -> Value {
        let mut v = serde_json::to_value(&self.cfg).unwrap_or(Value::Null);
        if let (Some(obj), Ok(p)) = (v.as_object_mut(), self.p()) {
            obj.insert("p".into(), json!(p_label(p)));
            obj.retain(|_, x| !x.is_null());
        }
        v
    }

    fn out_path(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Ok(Some(dir.join(name)))
            }
            None => Ok(None),
        }
    }

    fn circle(&self, default_n: usize, default_k: usize) -> Result<AdmissibleSystem> {
        build_circle_system(self.cfg.n.unwrap_or(default_n), self.cfg.k.unwrap_or(default_k))
    }

    fn pair_config(&self) -> PairConfig {
        let d = PairConfig::default();
        PairConfig {
            n_theta: self.cfg.n_theta.or(self.cfg.n).unwrap_or(d.n_theta),
            n_phi: self.cfg.n_phi.or(self.cfg.n).unwrap_or(d.n_phi),
            j_max: self.cfg.j_max.or(self.cfg.k).unwrap_or(d.j_max),
            m_max: self.cfg.m_max.or(self.cfg.k).unwrap_or(d.m_max),
            spectrum: d.spectrum,
        }
    }
}

#[derive(Debug, Serialize)]
struct Report {
    version: &'static str,
    command: String,
    status: String,
    config: Value,
    tolerances: BTreeMap<String, f64>,
    seed: Option<u64>,
    files: Vec<String>,
    result: Value,
}

struct Outcome {
    code: i32,
    report: Report,
}

fn report(
    job: &Job,
    command: &str,
    status: &str,
    tolerances: &[(&str, f64)],
    seed: Option<u64>,
    files: Vec<String>,
    result: Value,
) -> Report {
    Report {
        version: VERSION,
        command: command.into(),
        status: status.into(),
        config: job.echo(),
        tolerances: tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        seed,
        files,
        result,
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::InsufficientLevels { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. The JSON report goes to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            match serde_json::to_string_pretty(&out.report) {
                Ok(text) => println!("{text}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_NUMERIC;
                }
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let job = Job::load(&cli.common)?;
    let out = match &cli.command {
        Command::Build { points, matrix, edges, laplacian } => {
            cmd_build(&job, points.as_deref(), matrix.as_deref(), edges.as_deref(), laplacian.or(job.cfg.laplacian))?
        }
        Command::Analyze { system, function } => cmd_analyze(&job, system.as_deref(), function)?,
        Command::Lift { sys1, sys2, landmarks, connection, function, mode } => cmd_lift(
            &job,
            LiftInputs {
                sys1: sys1.as_deref(),
                sys2: sys2.as_deref(),
                landmarks: landmarks.as_deref(),
                connection: connection.as_deref(),
                function: function.as_deref(),
                mode: mode.or(job.cfg.mode),
            },
        )?,
        Command::Verify { target } => cmd_verify(&job, *target)?,
    };
    if let Some(path) = job.out_path("report.json")? {
        io::write_json(&path, &out.report)?;
    }
    Ok(out)
}

fn system_summary(sys: &AdmissibleSystem) -> Value {
    let l = sys.eigenvalues();
    json!({
        "n": sys.len(),
        "k": sys.num_modes(),
        "lambda_min": l.first(),
        "lambda_max": l.last(),
        "orthonormality_residual": sys.orthonormality_residual(),
        "provenance": sys.provenance(),
    })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_build(
    job: &Job,
    points: Option<&Path>,
    matrix: Option<&Path>,
    edges: Option<&Path>,
    laplacian: Option<LaplacianArg>,
) -> Result<Outcome> {
    let given =
        [points.is_some(), matrix.is_some(), edges.is_some(), job.cfg.builtin.is_some()].iter().filter(|b| **b).count();
    if given != 1 {
        return Err(Error::InvalidArgument("build needs exactly one of --points, --matrix, --edges, --builtin".into()));
    }
    let mut files = Vec::new();
    let result = if let Some(path) = points {
        let cloud = io::read_points_csv(path)?;
        let kind = match laplacian {
            Some(LaplacianArg::RandomWalk) => LaplacianKind::RandomWalk,
            _ => LaplacianKind::Combinatorial,
        };
        let k = job.cfg.k.unwrap_or(cloud.points.len().min(20));
        let sys = build_undirected_system(
            &cloud.points,
            job.cfg.epsilon.unwrap_or(0.1),
            k,
            &UndirectedOptions { laplacian: kind, weights: cloud.weights },
        )?;
        if let Some(out) = job.out_path("system.json")? {
            io::write_system(&out, &sys)?;
            files.push(display(&out));
        }
        json!({ "kind": "system", "system": system_summary(&sys) })
    } else if matrix.is_some() || edges.is_some() {
        let w = match (matrix, edges) {
            (Some(m), _) => io::read_matrix_csv(m)?,
            (_, Some(e)) => io::read_edge_list_csv(e, job.cfg.n)?,
            _ => unreachable!("checked above"),
        };
        let k = job.cfg.k.unwrap_or(w.nrows());
        let pair = build_directed_pair(&to_complex(&w), k)?;
        if let Some(out) = job.out_path("pair.json")? {
            std::fs::write(&out, io::pair_to_json(&pair)?)?;
            files.push(display(&out));
        }
        json!({
            "kind": "pair",
            "base": system_summary(&pair.base),
            "dual": system_summary(&pair.dual),
            "undirected_degenerate": pair.is_degenerate(DEGENERATE_TOL),
            "non_unique_isometry": pair.non_unique_isometry,
        })
    } else {
        match job.cfg.builtin.expect("checked above") {
            Builtin::Circle => {
                let sys = job.circle(256, 50)?;
                if let Some(out) = job.out_path("system.json")? {
                    io::write_system(&out, &sys)?;
                    files.push(display(&out));
                }
                json!({ "kind": "system", "system": system_summary(&sys) })
            }
            Builtin::JacobiPair => {
                let pair = build_hemisphere_disc_pair(job.pair_config())?;
                for (name, sys) in [("hemisphere.json", &pair.hemisphere), ("disc.json", &pair.disc)] {
                    if let Some(out) = job.out_path(name)? {
                        io::write_system(&out, sys)?;
                        files.push(display(&out));
                    }
                }
                for (name, a) in [("synthesis.json", &pair.synthesis), ("lifting.json", &pair.lifting)] {
                    if let Some(out) = job.out_path(name)? {
                        std::fs::write(&out, io::connection_to_json(a)?)?;
                        files.push(display(&out));
                    }
                }
                json!({
                    "kind": "jacobi-pair",
                    "hemisphere": system_summary(&pair.hemisphere),
                    "disc": system_summary(&pair.disc),
                    "synthesis_residual": pair.synthesis_residual(),
                })
            }
        }
    };
    Ok(Outcome { code: EXIT_PASS, report: report(job, "build", "ok", &[], None, files, result) })
}

fn cmd_analyze(job: &Job, system: Option<&Path>, function: &Path) -> Result<Outcome> {
    let loaded = match (system, job.cfg.builtin) {
        (Some(path), _) => io::read_system_or_pair(path)?,
        (None, Some(Builtin::Circle)) => Loaded::System(job.circle(256, 50)?),
        _ => return Err(Error::InvalidArgument("analyze needs --system FILE or --builtin circle".into())),
    };
    let f = io::read_function_csv(function)?;
    let h = job.filter()?;
    let p = job.p()?;
    let sys_for_norms = match &loaded {
        Loaded::System(s) => s,
        Loaded::Pair(pair) => &pair.base,
    };
    let lmax = sys_for_norms.eigenvalues().last().copied().unwrap_or(0.0);
    let levels = job.cfg.levels.unwrap_or_else(|| levels_to_cover(lmax));
    let (taus, frame) = match &loaded {
        Loaded::System(s) => (single_pyramid(s, &h, levels, &f)?, None),
        Loaded::Pair(pair) => (tau_pyramid(pair, &h, levels, &f)?, Some(frame_check(pair, &h, &f)?)),
    };
    let norms = pyramid_norms(sys_for_norms, &taus, p)?;

    let mut files = Vec::new();
    if let Some(out) = job.out_path("pyramid.csv")? {
        io::write_pyramid_csv(&out, &taus)?;
        files.push(display(&out));
    }
    let (status, smoothness) = match classify_smoothness(&norms, p, &ClassifyOptions::default()) {
        Ok(r) => (
            "ok",
            json!({
                "gamma_hat": r.gamma_hat,
                "residual": r.residual,
                "per_level_norms": r.per_level_norms,
                "levels_used": r.levels_used,
                "p": p_label(p),
                "surrogate": false,
                "band_limited": r.band_limited,
            }),
        ),
        Err(Error::InsufficientLevels { usable }) => (
            "insufficient levels",
            json!({
                "gamma_hat": null,
                "per_level_norms": norms.entries(),
                "p": p_label(p),
                "surrogate": false,
                "usable_levels": usable,
            }),
        ),
        Err(e) => return Err(e),
    };
    if let Some(out) = job.out_path("smoothness.json")? {
        io::write_json(&out, &smoothness)?;
        files.push(display(&out));
    }
    let result = json!({ "levels": levels, "smoothness": smoothness, "frame": frame });
    let tol = [("noise_floor", crate::approx::NOISE_FLOOR), ("frame_slack", FRAME_SLACK)];
    Ok(Outcome { code: EXIT_PASS, report: report(job, "analyze", status, &tol, None, files, result) })
}

struct LiftInputs<'a> {
    sys1: Option<&'a Path>,
    sys2: Option<&'a Path>,
    landmarks: Option<&'a Path>,
    connection: Option<&'a Path>,
    function: Option<&'a Path>,
    mode: Option<LiftMode>,
}

fn lift_json(r: &LiftReport) -> Value {
    let mut v = serde_json::to_value(r).unwrap_or(Value::Null);
    if let Some(obj) = v.as_object_mut() {
        obj.insert("p".into(), json!(p_label(r.p)));
    }
    v
}

/// Band-limited test function on the disc grid.
pub fn default_disc_function(theta: &[f64], phi: &[f64]) -> FunctionSamples {
    let mut v = Vec::with_capacity(theta.len() * phi.len());
    for t in theta {
        for p in phi {
            v.push(
                disc_eval(0, 0, *t, *p)
                    + disc_eval(1, 1, *t, *p) * 0.5
                    + disc_eval(2, -2, *t, *p) * Complex64::new(0.0, 0.25),
            );
        }
    }
    FunctionSamples::from_vec(v)
}

fn cmd_lift(job: &Job, inp: LiftInputs<'_>) -> Result<Outcome> {
    let h = job.filter()?;
    let tol = job.cfg.tol.unwrap_or(1e-8);
    let opts = LiftOptions { p: job.p()?, rate_exponent: job.cfg.rate_exponent.unwrap_or(0.0) };
    let mut files = Vec::new();

    let (report_value, lifted) = if job.cfg.builtin == Some(Builtin::JacobiPair) && inp.sys1.is_none() {
        let pair = build_hemisphere_disc_pair(job.pair_config())?;
        let f = match inp.function {
            Some(path) => io::read_function_csv(path)?,
            None => default_disc_function(&pair.theta, &pair.phi),
        };
        let lmax = pair.lifting.entries().iter().filter_map(|e| e.ell).fold(0.0, f64::max);
        // one level past full coverage, so a band-limited input shows a zero last increment
        let levels = job.cfg.levels.unwrap_or_else(|| levels_to_cover(lmax) + 1);
        let r = joint_lift(&pair.hemisphere, &pair.disc, &pair.lifting, &h, &f, levels, tol, &opts)?;
        // the grids coincide point for point, so the pointwise lift is f itself
        let err = (&r.lift - &f).iter().map(|z| z.norm()).fold(0.0, f64::max);
        (json!({ "mode": "joint", "lift": lift_json(&r), "pointwise_lift_error": err }), r.lift)
    } else {
        let (Some(p1), Some(p2)) = (inp.sys1, inp.sys2) else {
            return Err(Error::InvalidArgument("lift needs --sys1 and --sys2, or --builtin jacobi-pair".into()));
        };
        let sys1 = io::read_system(p1)?;
        let sys2 = io::read_system(p2)?;
        let f = match inp.function {
            Some(path) => io::read_function_csv(path)?,
            None => return Err(Error::InvalidArgument("lift needs --function".into())),
        };
        let (conn, default_mode): (ConnectionMatrix, LiftMode) = match (inp.landmarks, inp.connection) {
            (Some(l), None) => {
                let lm = io::read_landmarks_csv(l)?;
                (landmark_connection(&sys1, &sys2, &lm, JointEigenRule::Max)?, LiftMode::Tensor)
            }
            (None, Some(c)) => {
                let text = std::fs::read_to_string(c)?;
                (io::connection_from_json(&text, sys1.num_modes(), sys2.num_modes())?, LiftMode::Joint)
            }
            _ => return Err(Error::InvalidArgument("lift needs exactly one of --landmarks, --connection".into())),
        };
        let mode = inp.mode.unwrap_or(default_mode);
        let lmax =
            sys1.eigenvalues().last().copied().unwrap_or(0.0).max(sys2.eigenvalues().last().copied().unwrap_or(0.0));
        let levels = job.cfg.levels.unwrap_or_else(|| levels_to_cover(lmax) + 1);
        let r = match mode {
            LiftMode::Tensor => tensor_lift(&sys1, &sys2, &conn, &h, &f, levels, tol, &opts)?,
            LiftMode::Joint => joint_lift(&sys1, &sys2, &conn, &h, &f, levels, tol, &opts)?,
        };
        (json!({ "mode": mode, "lift": lift_json(&r) }), r.lift)
    };
    if let Some(out) = job.out_path("lift.csv")? {
        io::write_function_csv(&out, &lifted)?;
        files.push(display(&out));
    }
    let converged = report_value["lift"]["converged"].as_bool().unwrap_or(false);
    let status = if converged { "converged" } else { "not converged" };
    let mut value = report_value;
    value["samples"] = json!(lifted.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
    Ok(Outcome { code: EXIT_PASS, report: report(job, "lift", status, &[("increment_tol", tol)], None, files, value) })
}

fn cmd_verify(job: &Job, target: Target) -> Result<Outcome> {
    let (pass, tolerances, seed, result): (bool, Vec<(&str, f64)>, Option<u64>, Value) = match target {
        Target::Jacobi => verify_jacobi(job)?,
        Target::Frame => verify_frame(job)?,
        Target::Localization => verify_localization_cmd(job)?,
        Target::Gaussian => verify_gaussian(job)?,
    };
    let status = if pass { "pass" } else { "fail" };
    let code = if pass { EXIT_PASS } else { EXIT_FAIL };
    let mut files = Vec::new();
    if let Some(out) = job.out_path("verification.json")? {
        io::write_json(&out, &result)?;
        files.push(display(&out));
    }
    Ok(Outcome {
        code,
        report: report(job, &format!("verify {target:?}").to_lowercase(), status, &tolerances, seed, files, result),
    })
}

type Verified = (bool, Vec<(&'static str, f64)>, Option<u64>, Value);

fn verify_jacobi(job: &Job) -> Result<Verified> {
    let tol = job.cfg.tol.unwrap_or(1e-10);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for alpha in [0.0, 1.0, 2.0, 3.0] {
        for j in 0..=20 {
            for i in 0..50 {
                let theta = PI / 2.0 * (i as f64 + 0.5) / 50.0;
                worst = worst.max(verify_jacobi_ultra(alpha, j, theta)?.abs_diff);
                count += 1;
            }
        }
    }
    let mut pass = worst < tol;
    let mut result = json!({ "identity_checks": count, "max_abs_diff": worst });
    let mut tols = vec![("identity", tol)];
    if job.cfg.builtin == Some(Builtin::JacobiPair) {
        let pair = build_hemisphere_disc_pair(job.pair_config())?;
        let r = pair.synthesis_residual();
        pass &= r < 1e-8;
        result["synthesis_residual"] = json!(r);
        tols.push(("synthesis", 1e-8));
    }
    Ok((pass, tols, None, result))
}

/// Random nonnegative directed weight matrix with about 30% zero entries.
pub fn random_directed_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::from_fn(n, n, |_, _| if rng.gen::<f64>() < 0.3 { 0.0 } else { rng.gen::<f64>() });
    if w.iter().all(|v| *v == 0.0) {
        w[(0, n - 1)] = 1.0;
    }
    w
}

fn random_function(rng: &mut ChaCha8Rng, n: usize) -> FunctionSamples {
    FunctionSamples::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn verify_frame(job: &Job) -> Result<Verified> {
    let seed = job.seed();
    let trials = job.cfg.trials.unwrap_or(100);
    let per = job.cfg.functions_per_trial.unwrap_or(20);
    let h = job.filter()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut worst_upper: f64 = 0.0;
    let mut worst_lower: f64 = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.gen_range(4..=40);
        let pair: DirectedPair = build_directed_pair(&to_complex(&random_directed_matrix(&mut rng, n)), n)?;
        for _ in 0..per {
            let f = random_function(&mut rng, n);
            let fc = frame_check(&pair, &h, &f)?;
            if !(fc.lower_ok && fc.upper_ok) {
                violations += 1;
            }
            if fc.sum_sq > 0.0 {
                worst_upper = worst_upper.max(fc.full_energy / fc.sum_sq);
                worst_lower = worst_lower.min(fc.full_energy / fc.sum_sq);
            }
        }
    }
    let result = json!({
        "trials": trials,
        "functions_per_trial": per,
        "violations": violations,
        "min_energy_ratio": worst_lower,
        "max_energy_ratio": worst_upper,
    });
    Ok((violations == 0, vec![("frame_slack", FRAME_SLACK)], Some(seed), result))
}

fn verify_localization_cmd(job: &Job) -> Result<Verified> {
    if job.cfg.builtin == Some(Builtin::JacobiPair) {
        return Err(Error::InvalidArgument("localization runs on the circle builtin".into()));
    }
    let sys = job.circle(512, 128)?;
    let h = job.filter()?;
    let s = h.smoothness_order();
    let tol = job.cfg.tol.unwrap_or(0.75);
    let n_pts = sys.len();
    let (i, j) = (0, n_pts / 4);
    let r = sys.distance(i, j);
    let mu = measure_from_system(&sys, i, j)?;
    let grid: Vec<f64> = (0..24).map(|m| 4.0 / r * 16f64.powf(m as f64 / 23.0)).collect();
    let rep = verify_localization(&mu, &h, 1.0, s.min(64), r, &grid, tol)?;
    let pass = rep.status == LocalizationStatus::Pass;
    Ok((pass, vec![("slope", tol)], None, serde_json::to_value(&rep).unwrap_or(Value::Null)))
}

fn verify_gaussian(job: &Job) -> Result<Verified> {
    let tol = job.cfg.tol.unwrap_or(1e-9);
    let sys = job.circle(256, 64)?;
    let t_grid: Vec<f64> = (0..8).map(|m| 0.01 * 100f64.powf(m as f64 / 7.0)).collect();
    let fit = sys.estimate_gaussian_bound(&t_grid)?;
    // the circle heat kernel diagonal behaves like t^{-1/2}
    let q_ok = (fit.q_hat - 1.0).abs() <= 0.25;
    let pass = fit.max_violation <= tol && q_ok && fit.c2_hat.is_some_and(|c| c > 0.0);
    let result = json!({ "fit": fit, "t_grid": t_grid, "expected_q": 1.0 });
    Ok((pass, vec![("violation", tol), ("q", 0.25)], None, result))
}
