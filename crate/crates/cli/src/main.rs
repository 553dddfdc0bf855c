//! Command-line front end: spectrum generation, the encode/count/estimate
//! pipeline, and the identity verification suite, all file-based and
//! reproducible. Every command writes a run manifest; `--replay` re-runs a
//! recorded invocation.
//!
//! Exit codes: 0 success, 2 usage, 3 validation failure, 4 numerical
//! failure.

// validation uses `!(x > 0.0)` so that NaN inputs fail closed
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgeweyl::counting::{check_composition, count_edge, smoothed_curve, MollifierSpec};
use edgeweyl::encoding::{encode, EncodingRule, PerturbationSpec, SlowVariation};
use edgeweyl::estimation::{envelope_constant, estimate_k, estimate_weyl};
use edgeweyl::io::{
    read_json, read_spectrum_csv, write_counting_csv, write_encoded_csv, write_json,
    write_spectrum_csv, EncodingManifest, SpectrumManifest,
};
use edgeweyl::krein::realize_encoded;
use edgeweyl::spectra::{
    ball3_spectrum, berger_spectrum, lens_spectrum, sphere_spectrum, synthetic_spectrum,
    torus_spectrum, RemainderModel, SpectralMeasure, SyntheticWeyl,
};
use edgeweyl::transforms::{edge_heat, edge_zeta, heat_trace, zeta};
use edgeweyl::log_spaced;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "edgeweyl", version, about = "Edge-variable Weyl asymptotics toolkit")]
struct Cli {
    /// Re-run a recorded invocation from its run manifest.
    #[arg(long, global = true, value_name = "MANIFEST")]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Generate a model spectrum and write it as CSV plus a JSON manifest.
    Spectrum(SpectrumArgs),
    /// Encode a spectrum, sample the counting curve, and estimate (d, gamma).
    Pipeline(PipelineArgs),
    /// Run the exact-identity and realization checks; nonzero exit on failure.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Geometry {
    S3,
    Sd,
    Torus2,
    Torusd,
    Berger,
    Lens,
    Ball3,
    Synthetic,
}

#[derive(Args, Clone)]
struct GeometryArgs {
    #[arg(long, value_enum)]
    geometry: Option<Geometry>,
    /// Spectrum truncation.
    #[arg(long, default_value_t = 1e4)]
    lambda_max: f64,
    /// Dimension (sd, synthetic).
    #[arg(long)]
    d: Option<u32>,
    /// Whitespace-separated Gram matrix file, one row per line (torusd).
    #[arg(long)]
    gram: Option<PathBuf>,
    /// Berger deformation parameter.
    #[arg(long)]
    k: Option<f64>,
    /// Lens order p.
    #[arg(long)]
    p: Option<u32>,
    /// Lens twist q.
    #[arg(long)]
    q: Option<u32>,
    /// Synthetic Weyl constant gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// Synthetic remainder model.
    #[arg(long, value_enum, default_value_t = RemainderKind::None)]
    remainder: RemainderKind,
    #[arg(long, default_value_t = 1.0)]
    remainder_coeff: f64,
    #[arg(long, default_value_t = 0.5)]
    remainder_exponent: f64,
    #[arg(long, default_value_t = 0.1)]
    remainder_amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RemainderKind {
    None,
    Powerlaw,
    Jitter,
}

#[derive(Args, Clone)]
struct SpectrumArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Output CSV path; the metadata manifest goes to `<stem>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleKind {
    Affine,
    Poly,
    Perturbed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Logdistortion,
    Iterlog,
    Slowfactor,
    Boundedoffset,
    Sublog,
    Oscbv,
    Subpower,
}

#[derive(Args, Clone)]
struct RuleArgs {
    #[arg(long, value_enum, default_value_t = RuleKind::Affine)]
    rule: RuleKind,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Polynomial-type exponent.
    #[arg(long)]
    k: Option<f64>,
    /// Polynomial-type slope.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Perturbation family.
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Bounded-offset constant.
    #[arg(long)]
    c: Option<f64>,
    /// Sublinear power exponent.
    #[arg(long)]
    q_exp: Option<f64>,
    /// Slow-factor log exponent (slowfactor, oscbv).
    #[arg(long, default_value_t = -1.0)]
    l_alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    theta_amp: f64,
    #[arg(long, default_value_t = 1.0)]
    theta_rate: f64,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Input spectrum CSV (metadata manifest looked up at `<stem>.json`).
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    rule: RuleArgs,
    /// Fit window `LO:HI` in the edge variable; defaults to the top decade.
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 1.0)]
    h0: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Dimension override when the manifest is absent.
    #[arg(long)]
    d: Option<u32>,
    /// Output prefix; defaults to the input stem.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    /// Spectrum CSV to verify; a model geometry is generated otherwise.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Number of random composition-identity probes.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// Also run the string-realization round trip.
    #[arg(long)]
    krein: bool,
    #[arg(long, default_value_t = 6)]
    n_keep: usize,
    /// Report path.
    #[arg(long, default_value_t = String::from("edgeweyl-verify.json"))]
    out: String,
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    params: BTreeMap<String, String>,
    input_files: Vec<String>,
    output_files: Vec<String>,
    seed: u64,
    tool_version: String,
    timestamp: String,
    argv: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, argv: &[String], seed: u64) -> Self {
        let mut params = BTreeMap::new();
        let mut it = argv.iter().peekable();
        while let Some(tok) = it.next() {
            if let Some(name) = tok.strip_prefix("--") {
                let val = match it.peek() {
                    Some(next) if !next.starts_with("--") => it.next().unwrap().clone(),
                    _ => "true".to_string(),
                };
                params.insert(name.to_string(), val);
            }
        }
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".to_string());
        Self {
            command: command.to_string(),
            params,
            input_files: Vec::new(),
            output_files: Vec::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            argv: argv.to_vec(),
        }
    }
}

enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

fn classify(err: edgeweyl::Error) -> CliError {
    use edgeweyl::Error as E;
    match err {
        E::InvalidParameter(_)
        | E::MonotonicityViolation { .. }
        | E::Domain(_)
        | E::Parse(_)
        | E::LatticeCapExceeded { .. }
        | E::NonAffineRule
        | E::UnsupportedFamily
        | E::InsufficientData(_)
        | E::Io(_) => CliError::Validation(err.to_string()),
        E::RootFinding { .. }
        | E::BracketFailure { .. }
        | E::IllConditioned(_)
        | E::DegenerateResidual
        | E::Breakdown { .. }
        | E::QdPositivity { .. }
        | E::UncontrolledTail { .. } => CliError::Numerical(err.to_string()),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    let result = match (&cli.replay, &cli.command) {
        (Some(path), _) => replay(path),
        (None, Some(cmd)) => dispatch(cmd, &argv),
        (None, None) => Err(CliError::Validation(
            "a subcommand or --replay is required (see --help)".to_string(),
        )),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn replay(path: &Path) -> Result<(), CliError> {
    let manifest: RunManifest = read_json(path).map_err(classify)?;
    if manifest.argv.iter().any(|a| a == "--replay") {
        return Err(CliError::Validation("recursive --replay is not allowed".into()));
    }
    let mut full = vec!["edgeweyl".to_string()];
    full.extend(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(&full)
        .map_err(|e| CliError::Validation(format!("manifest argv does not parse: {e}")))?;
    match cli.command {
        Some(cmd) => dispatch(&cmd, &manifest.argv),
        None => Err(CliError::Validation("manifest has no subcommand".into())),
    }
}

fn dispatch(cmd: &Command, argv: &[String]) -> Result<(), CliError> {
    match cmd {
        Command::Spectrum(args) => cmd_spectrum(args, argv),
        Command::Pipeline(args) => cmd_pipeline(args, argv),
        Command::Verify(args) => cmd_verify(args, argv),
    }
}

fn generate(args: &GeometryArgs) -> Result<(SpectralMeasure, String), CliError> {
    let need = |opt: Option<f64>, name: &str| {
        opt.ok_or_else(|| CliError::Validation(format!("--{name} is required for this geometry")))
    };
    let lm = args.lambda_max;
    let geometry = args
        .geometry
        .ok_or_else(|| CliError::Validation("--geometry is required".into()))?;
    let (sm, generator) = match geometry {
        Geometry::S3 => (sphere_spectrum(3, lm).map_err(classify)?, "sphere"),
        Geometry::Sd => {
            let d = args
                .d
                .ok_or_else(|| CliError::Validation("--d is required for sd".into()))?;
            (sphere_spectrum(d, lm).map_err(classify)?, "sphere")
        }
        Geometry::Torus2 => {
            let gram = DMatrix::identity(2, 2);
            (torus_spectrum(&gram, lm).map_err(classify)?, "torus")
        }
        Geometry::Torusd => {
            let path = args
                .gram
                .as_ref()
                .ok_or_else(|| CliError::Validation("--gram FILE is required for torusd".into()))?;
            let gram = load_gram(path)?;
            (torus_spectrum(&gram, lm).map_err(classify)?, "torus")
        }
        Geometry::Berger => {
            let k = need(args.k, "k")?;
            (berger_spectrum(k, lm).map_err(classify)?, "berger")
        }
        Geometry::Lens => {
            let p = args.p.ok_or_else(|| CliError::Validation("--p is required".into()))?;
            let q = args.q.ok_or_else(|| CliError::Validation("--q is required".into()))?;
            (lens_spectrum(p, q, lm).map_err(classify)?, "lens")
        }
        Geometry::Ball3 => (ball3_spectrum(lm).map_err(classify)?, "ball3"),
        Geometry::Synthetic => {
            let d = args
                .d
                .ok_or_else(|| CliError::Validation("--d is required for synthetic".into()))?;
            let gamma = need(args.gamma, "gamma")?;
            let remainder = match args.remainder {
                RemainderKind::None => RemainderModel::None,
                RemainderKind::Powerlaw => RemainderModel::PowerLaw {
                    coeff: args.remainder_coeff,
                    exponent: args.remainder_exponent,
                },
                RemainderKind::Jitter => {
                    RemainderModel::JitterUniform { amplitude: args.remainder_amplitude }
                }
            };
            let spec = SyntheticWeyl { d, gamma, remainder, seed: args.seed };
            (synthetic_spectrum(&spec, lm).map_err(classify)?, "synthetic")
        }
    };
    Ok((sm, generator.to_string()))
}

fn load_gram(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| CliError::Validation(format!("bad gram entry '{t}'")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Validation("gram file must be a square matrix".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn cmd_spectrum(args: &SpectrumArgs, argv: &[String]) -> Result<(), CliError> {
    let (sm, generator) = generate(&args.geometry)?;
    let out = &args.out;
    let file = File::create(out).map_err(|e| CliError::Validation(e.to_string()))?;
    write_spectrum_csv(BufWriter::new(file), &sm).map_err(classify)?;

    let mut manifest = RunManifest::new("spectrum", argv, args.geometry.seed);
    let meta_path = out.with_extension("json");
    let params = manifest.params.clone();
    let meta = SpectrumManifest::from_measure(&sm, &generator, params, Some(args.geometry.seed));
    write_json(&meta_path, &meta).map_err(classify)?;

    manifest.output_files =
        vec![out.display().to_string(), meta_path.display().to_string()];
    let run_path = run_manifest_path(out);
    write_json(&run_path, &manifest).map_err(classify)?;
    println!(
        "wrote {} ({} atoms, total weight {}), {}, {}",
        out.display(),
        sm.len(),
        sm.total_weight(),
        meta_path.display(),
        run_path.display()
    );
    Ok(())
}

fn run_manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    out.with_file_name(format!("{stem}.run.json"))
}

fn build_rule(args: &RuleArgs) -> Result<EncodingRule, CliError> {
    let eps = args.epsilon;
    let rule = match args.rule {
        RuleKind::Affine => EncodingRule::affine(eps),
        RuleKind::Poly => {
            let k = args
                .k
                .ok_or_else(|| CliError::Validation("--k is required for --rule poly".into()))?;
            EncodingRule::PolyType {
                a: PI,
                b: args.b,
                k,
                l: SlowVariation::Const { ell_inf: 1.0 },
            }
        }
        RuleKind::Perturbed => {
            let family = args.family.ok_or_else(|| {
                CliError::Validation("--family is required for --rule perturbed".into())
            })?;
            let delta = match family {
                Family::Logdistortion => {
                    PerturbationSpec::LogDistortion { alpha: args.alpha.unwrap_or(1.0) }
                }
                Family::Iterlog => PerturbationSpec::IterLog {
                    alpha: args.alpha.unwrap_or(1.0),
                    beta: args.beta.unwrap_or(1.0),
                },
                Family::Slowfactor => PerturbationSpec::SlowFactor {
                    l: SlowVariation::LogPower { alpha: args.l_alpha },
                },
                Family::Boundedoffset => {
                    PerturbationSpec::BoundedOffset { c: args.c.unwrap_or(2.0) }
                }
                Family::Sublog => PerturbationSpec::SubLog { beta: args.beta.unwrap_or(0.5) },
                Family::Oscbv => PerturbationSpec::OscBV {
                    l: SlowVariation::LogPower { alpha: args.l_alpha },
                    theta_amp: args.theta_amp,
                    theta_rate: args.theta_rate,
                },
                Family::Subpower => PerturbationSpec::SubPower { q: args.q_exp.unwrap_or(0.5) },
            };
            EncodingRule::Perturbed { epsilon: eps, delta }
        }
    };
    rule.validate().map_err(classify)?;
    Ok(rule)
}

fn parse_window(spec: &Option<String>) -> Result<Option<(f64, f64)>, CliError> {
    let Some(text) = spec else { return Ok(None) };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::Validation(format!("--window expects LO:HI, got '{text}'")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Validation(format!("bad window bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Validation(format!("bad window bound '{}'", parts[1])))?;
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Validation(format!("window must satisfy 0 < LO < HI, got {text}")));
    }
    Ok(Some((lo, hi)))
}

/// Estimate record emitted by `pipeline`.
#[derive(Debug, Serialize)]
struct EstimateJson {
    alpha_hat: f64,
    d_hat: f64,
    gamma_hat: f64,
    window: (f64, f64),
    r_squared: f64,
    epsilon: f64,
    rule: EncodingRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_hat: Option<f64>,
    #[serde(rename = "envelope_K", skip_serializing_if = "Option::is_none")]
    envelope_k: Option<f64>,
}

fn load_measure(path: &Path) -> Result<(SpectralMeasure, Vec<String>), CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let meta_path = path.with_extension("json");
    let mut inputs = vec![path.display().to_string()];
    let manifest: Option<SpectrumManifest> = if meta_path.exists() {
        inputs.push(meta_path.display().to_string());
        Some(read_json(&meta_path).map_err(classify)?)
    } else {
        None
    };
    let sm = read_spectrum_csv(file, manifest.as_ref()).map_err(classify)?;
    Ok((sm, inputs))
}

fn cmd_pipeline(args: &PipelineArgs, argv: &[String]) -> Result<(), CliError> {
    let (sm, inputs) = load_measure(&args.input)?;
    let rule = build_rule(&args.rule)?;
    let em = encode(&sm, &rule).map_err(classify)?;

    let y_max = em
        .edge_distances()
        .into_iter()
        .fold(0.0f64, f64::max);
    if !(y_max > 0.0) {
        return Err(CliError::Validation("encoded measure has no positive edge distance".into()));
    }
    let window = parse_window(&args.window)?.unwrap_or((y_max / 10.0, y_max));
    let moll = MollifierSpec::new(args.h0, args.theta).map_err(classify)?;
    let grid = log_spaced(window.0, window.1, args.points.max(8));
    let curve = smoothed_curve(&em, &grid, moll).map_err(classify)?;
    let est = estimate_weyl(&curve, args.rule.epsilon, window).map_err(classify)?;

    let k_hat = match rule {
        EncodingRule::PolyType { .. } => {
            let d = sm.dimension.or(args.d).ok_or_else(|| {
                CliError::Validation(
                    "k estimation needs the dimension (manifest or --d)".into(),
                )
            })?;
            Some(estimate_k(&curve, d, window).map_err(classify)?.k_hat)
        }
        _ => None,
    };
    let envelope_k = match rule {
        EncodingRule::Perturbed { .. } => {
            Some(envelope_constant(&rule, em.edge, &grid).map_err(classify)?)
        }
        _ => None,
    };

    let prefix: PathBuf = args.out.clone().unwrap_or_else(|| args.input.with_extension(""));
    let encoded_path = PathBuf::from(format!("{}.encoded.csv", prefix.display()));
    let encoding_meta_path = PathBuf::from(format!("{}.encoding.json", prefix.display()));
    let counting_path = PathBuf::from(format!("{}.counting.csv", prefix.display()));
    let estimate_path = PathBuf::from(format!("{}.estimate.json", prefix.display()));
    let file = File::create(&encoded_path).map_err(|e| CliError::Validation(e.to_string()))?;
    write_encoded_csv(BufWriter::new(file), &em).map_err(classify)?;
    write_json(
        &encoding_meta_path,
        &EncodingManifest {
            rule,
            edge: em.edge,
            source_label: em.source.label.clone(),
            above_edge: em.above_edge,
        },
    )
    .map_err(classify)?;
    let file = File::create(&counting_path).map_err(|e| CliError::Validation(e.to_string()))?;
    write_counting_csv(BufWriter::new(file), &curve).map_err(classify)?;
    let record = EstimateJson {
        alpha_hat: est.slope.alpha_hat,
        d_hat: est.d_hat,
        gamma_hat: est.gamma_hat,
        window,
        r_squared: est.slope.r_squared,
        epsilon: args.rule.epsilon,
        rule,
        k_hat,
        envelope_k,
    };
    write_json(&estimate_path, &record).map_err(classify)?;

    let mut manifest = RunManifest::new("pipeline", argv, 0);
    manifest.input_files = inputs;
    manifest.output_files = vec![
        encoded_path.display().to_string(),
        encoding_meta_path.display().to_string(),
        counting_path.display().to_string(),
        estimate_path.display().to_string(),
    ];
    let run_path = PathBuf::from(format!("{}.pipeline.run.json", prefix.display()));
    write_json(&run_path, &manifest).map_err(classify)?;
    println!(
        "d_hat = {:.4}, gamma_hat = {:.4}{} -> {}, {}",
        est.d_hat,
        est.gamma_hat,
        k_hat.map(|k| format!(", k_hat = {k:.4}")).unwrap_or_default(),
        counting_path.display(),
        estimate_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckResult {
    name: String,
    status: String,
    residual: f64,
    detail: String,
}

#[derive(Debug, Serialize)]
struct StringJson {
    coefficients: Vec<f64>,
    match_residual: f64,
    n_atoms: usize,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    checks: Vec<CheckResult>,
    pass: bool,
}

fn cmd_verify(args: &VerifyArgs, argv: &[String]) -> Result<(), CliError> {
    let (sm, inputs) = match &args.input {
        Some(path) => load_measure(path)?,
        None => {
            let mut geometry = args.geometry.clone();
            geometry.geometry = geometry.geometry.or(Some(Geometry::S3));
            let (sm, _) = generate(&geometry)?;
            (sm, Vec::new())
        }
    };
    let eps = args.epsilon;
    let em = encode(&sm, &EncodingRule::affine(eps)).map_err(classify)?;
    let mut checks: Vec<CheckResult> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(args.geometry.seed);

    // exact composition identity on random C
    let c_lo = PI - eps * sm.lambda_max * 1.05 - 1.0;
    let grid: Vec<f64> = (0..args.grid.max(1)).map(|_| rng.random_range(c_lo..PI)).collect();
    let comp = check_composition(&sm, &em, &grid).map_err(classify)?;
    checks.push(CheckResult {
        name: "composition_identity".into(),
        status: if comp.pass { "pass" } else { "fail" }.into(),
        residual: comp.max_abs_discrepancy,
        detail: format!("{} random probes", comp.n_grid),
    });

    // eps-collapse across eps/2, eps, 2eps
    let ems: Vec<_> = [0.5 * eps, eps, 2.0 * eps]
        .iter()
        .map(|&e| encode(&sm, &EncodingRule::affine(e)).map_err(classify))
        .collect::<Result<_, _>>()?;
    let mut collapse_worst = 0.0f64;
    for _ in 0..200 {
        let lambda: f64 = rng.random_range(0.0..sm.lambda_max * 1.05);
        let counts: Vec<f64> =
            ems.iter().map(|em2: &_| count_edge(em2, PI - em2.epsilon() * lambda)).collect();
        collapse_worst = collapse_worst
            .max((counts[0] - counts[1]).abs())
            .max((counts[1] - counts[2]).abs());
    }
    checks.push(CheckResult {
        name: "epsilon_collapse".into(),
        status: if collapse_worst == 0.0 { "pass" } else { "fail" }.into(),
        residual: collapse_worst,
        detail: "200 matched probes across eps/2, eps, 2eps".into(),
    });

    // heat transfer identity
    let mut heat_worst = 0.0f64;
    for s in log_spaced(1e-3, 1.0, 50) {
        let lhs = edge_heat(&em, s).map_err(classify)?.theta;
        let rhs = heat_trace(&sm, eps * s).map_err(classify)?.theta;
        heat_worst = heat_worst.max((lhs - rhs).abs() / rhs.abs());
    }
    checks.push(CheckResult {
        name: "heat_transfer".into(),
        status: if heat_worst <= 1e-12 { "pass" } else { "fail" }.into(),
        residual: heat_worst,
        detail: "50 log-spaced s values".into(),
    });

    // zeta transfer identity (needs dimension metadata)
    match sm.dimension {
        Some(d) => {
            let mut zeta_worst = 0.0f64;
            let u_lo = d as f64 / 2.0 + 0.1;
            for u in log_spaced(u_lo, u_lo + 3.0, 50) {
                let lhs = edge_zeta(&em, u).map_err(classify)?;
                let rhs = eps.powf(-u) * zeta(&sm, u, None).map_err(classify)?.value;
                zeta_worst = zeta_worst.max((lhs - rhs).abs() / rhs.abs());
            }
            checks.push(CheckResult {
                name: "zeta_transfer".into(),
                status: if zeta_worst <= 1e-12 { "pass" } else { "fail" }.into(),
                residual: zeta_worst,
                detail: "50 log-spaced u values".into(),
            });
        }
        None => checks.push(CheckResult {
            name: "zeta_transfer".into(),
            status: "skipped".into(),
            residual: 0.0,
            detail: "dimension metadata unavailable".into(),
        }),
    }

    let mut string_path: Option<PathBuf> = None;
    if args.krein {
        match realize_encoded(&em, args.n_keep) {
            Ok((string, report)) => {
                let ok = report.match_residual <= 1e-8 && report.roundtrip_residual <= 1e-9;
                let path = PathBuf::from(&args.out).with_extension("string.json");
                write_json(&path, &StringJson {
                    coefficients: string.coefficients().to_vec(),
                    match_residual: report.match_residual,
                    n_atoms: report.n_atoms,
                })
                .map_err(classify)?;
                string_path = Some(path);
                checks.push(CheckResult {
                    name: "krein_realization".into(),
                    status: if ok { "pass" } else { "fail" }.into(),
                    residual: report.match_residual,
                    detail: format!(
                        "n_keep = {}, roundtrip = {:.3e}",
                        report.n_atoms, report.roundtrip_residual
                    ),
                });
            }
            Err(e) => checks.push(CheckResult {
                name: "krein_realization".into(),
                status: "fail".into(),
                residual: f64::NAN,
                detail: e.to_string(),
            }),
        }
    }

    let pass = checks.iter().all(|c| c.status != "fail");
    for c in &checks {
        println!("{}: {} (residual {:.3e}; {})", c.name, c.status, c.residual, c.detail);
    }
    let report = VerifyReport { checks, pass };
    let out = PathBuf::from(&args.out);
    write_json(&out, &report).map_err(classify)?;
    let mut manifest = RunManifest::new("verify", argv, args.geometry.seed);
    manifest.input_files = inputs;
    manifest.output_files = vec![out.display().to_string()];
    if let Some(p) = string_path {
        manifest.output_files.push(p.display().to_string());
    }
    write_json(&run_manifest_path(&out), &manifest).map_err(classify)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical("one or more identities failed".into()))
    }
}
