//! Command-line front end for the fredkit toolkit.
//!
//! Every subcommand prints one JSON envelope to stdout:
//!
//! ```json
//! { "toolkit": "fredkit", "version": "...", "command": "...",
//!   "seed": 7, "config": { ... }, "result": { ... } }
//! ```
//!
//! with the effective configuration echoed verbatim so reports are
//! reproducible and diffable. Exit codes: 0 success, 2 verification
//! mismatch, 3 input error, 4 numerical-certification failure.

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use fredkit::audit::{audit_homotopy, AuditConfig};
use fredkit::classifier::{cobordant, FramedClassSymbolic};
use fredkit::error::Error as FkError;
use fredkit::intersection::{
    eta, write_sigma_min_grid, EtaConfig, OperatorFamily, ParamDomain,
};
use fredkit::invariants::{coherence_sign, tau, CoherenceConfig, SigmaConfig};
use fredkit::maps::{BlockShiftMap, HomotopyRecord};
use fredkit::models::{
    coherence_orientations, coherence_path, coherence_stabilizer, collapse_homotopy,
    constant_family, doubled_family, norm_square_disk_family, pencil_family,
    product_homotopy, sweep_homotopy, ModelCorpus,
};
use fredkit::poly::PolynomialCore;
use fredkit::suite::{verify_models, SuiteConfig};
use fredkit::trace::{write_circle_csv, TraceConfig};
use nalgebra::DVector;
use serde::Serialize;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fredkit", version, about = "Invariants of index-one block-shift maps")]
struct Cli {
    /// Seed for every randomized sampling step (echoed into the report).
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recompute every model value and compare; exit 2 on any mismatch.
    VerifyModels(VerifyModelsArgs),
    /// Intersection parity of an operator family against the rank-drop
    /// stratum over its parameter domain.
    Eta(EtaArgs),
    /// Circle invariants of the preimage circles of a map over a value.
    Sigma(MapArgs),
    /// Parity of sigma = 0 circles of a map over a value.
    Tau(MapArgs),
    /// Orientation-coherence sign along the model operator path.
    Orient(OrientArgs),
    /// Audit a model homotopy: folds, degenerate circles, count changes.
    Audit(AuditArgs),
    /// Decide cobordism of two JSON class descriptors.
    Classify(ClassifyArgs),
}

#[derive(Args)]
struct VerifyModelsArgs {
    /// Override the transversality tolerance of every intersection count.
    #[arg(long)]
    tol_trans: Option<f64>,
    /// Flip the sign of one monomial of the folded model map before
    /// verifying — a sensitivity self-test that must make the run fail.
    #[arg(long)]
    mutate_h_sign: bool,
}

#[derive(Args)]
struct EtaArgs {
    /// Family: pencil | doubled | constant | norm-square-disk.
    #[arg(long)]
    model: String,
    /// Override the parameter domain: disk:R | rect:x0,x1,y0,y1 | annulus.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    tol_trans: Option<f64>,
    #[arg(long)]
    initial_grid: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Write the sigma_min field over the domain bounding box as CSV.
    #[arg(long)]
    dump_field: Option<PathBuf>,
    /// Grid resolution of the field dump.
    #[arg(long, default_value_t = 128)]
    field_grid: usize,
}

#[derive(Args)]
struct MapArgs {
    /// Map: norm-square | hopf | folded-hopf.
    #[arg(long, conflicts_with = "map_file")]
    model: Option<String>,
    /// JSON polynomial core {"p":…,"q":…,"components":[[{"exps":…,"coef":…},…],…]}.
    #[arg(long)]
    map_file: Option<PathBuf>,
    /// Target value: "eK" for a basis vector or a comma list "0,0,1".
    #[arg(long)]
    value: String,
    /// Write each traced circle to PREFIX-<i>.csv.
    #[arg(long)]
    dump_circles: Option<String>,
}

#[derive(Args)]
struct OrientArgs {
    #[arg(long)]
    steps: Option<usize>,
    /// Negate the reference orientation at the start of the path.
    #[arg(long)]
    flip_start: bool,
    /// Negate the reference orientation at the end of the path.
    #[arg(long)]
    flip_end: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Homotopy: product | collapse | sweep.
    #[arg(long)]
    model: String,
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    bisect_tol: Option<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Path to a JSON descriptor {"label":…, "spin":…, "circles":[…]} for each side.
    a: PathBuf,
    b: PathBuf,
}

#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    toolkit: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: C,
    result: R,
}

fn emit<C: Serialize, R: Serialize>(command: &'static str, seed: u64, config: C, result: R) {
    let envelope = Envelope {
        toolkit: "fredkit",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config,
        result,
    };
    println!("{}", serde_json::to_string_pretty(&envelope).expect("report serialization"));
}

fn error_kind(e: &FkError) -> &'static str {
    match e {
        FkError::AmbiguousRank { .. } => "AmbiguousRank",
        FkError::ShapeError(_) => "ShapeError",
        FkError::StabilizationFailed(_) => "StabilizationFailed",
        FkError::OutsideChart(_) => "OutsideChart",
        FkError::BoundaryNotSurjective { .. } => "BoundaryNotSurjective",
        FkError::CorankTooHigh { .. } => "CorankTooHigh",
        FkError::NonIsolatedZeros(_) => "NonIsolatedZeros",
        FkError::NotRegular(_) => "NotRegular",
        FkError::EscapedBox(_) => "EscapedBox",
        FkError::NoConvergence { .. } => "NoConvergence",
        FkError::NotRegularValue(_) => "NotRegularValue",
        FkError::FrameCollapse(_) => "FrameCollapse",
        FkError::IllegalMove(_) => "IllegalMove",
        FkError::InconsistentSpin(_) => "InconsistentSpin",
        FkError::InvalidInput(_) => "InvalidInput",
    }
}

fn exit_code_for(e: &FkError) -> u8 {
    match e {
        FkError::InvalidInput(_)
        | FkError::ShapeError(_)
        | FkError::IllegalMove(_)
        | FkError::InconsistentSpin(_) => 3,
        _ => 4,
    }
}

/// Serialize a failure in the same envelope shape, with the error's name.
fn emit_error(command: &'static str, seed: u64, e: &FkError) -> u8 {
    #[derive(Serialize)]
    struct ErrorBody {
        kind: &'static str,
        message: String,
    }
    #[derive(Serialize)]
    struct ErrorEnvelope {
        toolkit: &'static str,
        version: &'static str,
        command: &'static str,
        seed: u64,
        config: (),
        result: (),
        error: ErrorBody,
    }
    let envelope = ErrorEnvelope {
        toolkit: "fredkit",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config: (),
        result: (),
        error: ErrorBody { kind: error_kind(e), message: e.to_string() },
    };
    println!("{}", serde_json::to_string_pretty(&envelope).unwrap());
    exit_code_for(e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let seed = cli.seed;
    let code = match cli.command {
        Command::VerifyModels(args) => cmd_verify_models(seed, args),
        Command::Eta(args) => cmd_eta(seed, args).unwrap_or_else(|e| emit_error("eta", seed, &e)),
        Command::Sigma(args) => {
            cmd_sigma_tau("sigma", seed, args).unwrap_or_else(|e| emit_error("sigma", seed, &e))
        }
        Command::Tau(args) => {
            cmd_sigma_tau("tau", seed, args).unwrap_or_else(|e| emit_error("tau", seed, &e))
        }
        Command::Orient(args) => {
            cmd_orient(seed, args).unwrap_or_else(|e| emit_error("orient", seed, &e))
        }
        Command::Audit(args) => {
            cmd_audit(seed, args).unwrap_or_else(|e| emit_error("audit", seed, &e))
        }
        Command::Classify(args) => {
            cmd_classify(seed, args).unwrap_or_else(|e| emit_error("classify", seed, &e))
        }
    };
    ExitCode::from(code)
}

// ---------------------------------------------------------------------------
// verify-models
// ---------------------------------------------------------------------------

fn cmd_verify_models(seed: u64, args: VerifyModelsArgs) -> u8 {
    let mut cfg = SuiteConfig::default();
    if let Some(t) = args.tol_trans {
        cfg.eta.tol_trans = t;
        cfg.sigma.eta.tol_trans = t;
    }
    cfg.audit.rng_seed = seed;
    cfg.sigma.perturb_seeds = perturb_seeds(seed);
    let report = if args.mutate_h_sign {
        let mut corpus = ModelCorpus::standard();
        let mut core = corpus.h.core().clone();
        core.components[0][0].coef = -core.components[0][0].coef;
        match BlockShiftMap::new(core) {
            Ok(h) => corpus.h = h,
            Err(e) => return emit_error("verify-models", seed, &e),
        }
        fredkit::suite::verify_models_on(&corpus, &cfg)
    } else {
        verify_models(&cfg)
    };
    let code = if report.all_passed { 0 } else { 2 };
    emit("verify-models", seed, &cfg, &report);
    code
}

fn perturb_seeds(seed: u64) -> Vec<u64> {
    vec![seed, seed.wrapping_add(101), seed.wrapping_add(202)]
}

// ---------------------------------------------------------------------------
// eta
// ---------------------------------------------------------------------------

fn family_by_name(name: &str) -> Result<OperatorFamily, FkError> {
    match name {
        "pencil" => Ok(pencil_family()),
        "doubled" => Ok(doubled_family()),
        "constant" => Ok(constant_family()),
        "norm-square-disk" => Ok(norm_square_disk_family()),
        other => Err(FkError::InvalidInput(format!(
            "unknown family {other:?}; expected pencil | doubled | constant | norm-square-disk"
        ))),
    }
}

fn parse_domain(text: &str) -> Result<ParamDomain, FkError> {
    let bad = |t: &str| {
        FkError::InvalidInput(format!(
            "bad domain {t:?}; expected disk:R | rect:x0,x1,y0,y1 | annulus"
        ))
    };
    let domain = if text == "annulus" {
        ParamDomain::Annulus
    } else if let Some(r) = text.strip_prefix("disk:") {
        ParamDomain::Disk { radius: r.parse().map_err(|_| bad(text))? }
    } else if let Some(rest) = text.strip_prefix("rect:") {
        let parts: Vec<f64> =
            rest.split(',').map(|s| s.parse().map_err(|_| bad(text))).collect::<Result<_, _>>()?;
        if parts.len() != 4 {
            return Err(bad(text));
        }
        ParamDomain::Rectangle { x0: parts[0], x1: parts[1], y0: parts[2], y1: parts[3] }
    } else {
        return Err(bad(text));
    };
    domain.validate()?;
    Ok(domain)
}

fn cmd_eta(seed: u64, args: EtaArgs) -> Result<u8, FkError> {
    let mut family = family_by_name(&args.model)?;
    if let Some(d) = &args.domain {
        family.domain = parse_domain(d)?;
    }
    let mut cfg = EtaConfig::default();
    if let Some(t) = args.tol_trans {
        cfg.tol_trans = t;
    }
    if let Some(g) = args.initial_grid {
        cfg.initial_grid = g;
    }
    if let Some(d) = args.max_depth {
        cfg.max_depth = d;
    }
    if let Some(path) = &args.dump_field {
        if args.field_grid < 2 {
            return Err(FkError::InvalidInput("field grid needs at least 2 nodes".into()));
        }
        let mut file = fs::File::create(path).map_err(|e| {
            FkError::InvalidInput(format!("cannot write {}: {e}", path.display()))
        })?;
        write_sigma_min_grid(&family, args.field_grid, &mut file).map_err(|e| {
            FkError::InvalidInput(format!("cannot write {}: {e}", path.display()))
        })?;
    }
    let cert = eta(&family, &cfg)?;
    #[derive(Serialize)]
    struct EtaResult {
        eta: u8,
        certificate: fredkit::intersection::EtaCertificate,
    }
    emit("eta", seed, &cfg, EtaResult { eta: cert.value, certificate: cert });
    Ok(0)
}

// ---------------------------------------------------------------------------
// sigma / tau
// ---------------------------------------------------------------------------

fn map_by_name(name: &str) -> Result<BlockShiftMap, FkError> {
    let corpus = ModelCorpus::standard();
    match name {
        "norm-square" => Ok(corpus.f),
        "hopf" => Ok(corpus.g),
        "folded-hopf" => Ok(corpus.h),
        other => Err(FkError::InvalidInput(format!(
            "unknown map {other:?}; expected norm-square | hopf | folded-hopf"
        ))),
    }
}

fn load_map(args: &MapArgs) -> Result<BlockShiftMap, FkError> {
    match (&args.model, &args.map_file) {
        (Some(name), None) => map_by_name(name),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| {
                FkError::InvalidInput(format!("cannot read {}: {e}", path.display()))
            })?;
            let core: PolynomialCore = serde_json::from_str(&text)
                .map_err(|e| FkError::InvalidInput(format!("map JSON: {e}")))?;
            core.validate()?;
            BlockShiftMap::new(core)
        }
        _ => Err(FkError::InvalidInput("pass exactly one of --model or --map-file".into())),
    }
}

fn parse_value(q: usize, text: &str) -> Result<DVector<f64>, FkError> {
    if let Some(k) = text.strip_prefix('e') {
        if let Ok(k) = k.parse::<usize>() {
            if k == 0 || k > q {
                return Err(FkError::InvalidInput(format!(
                    "basis vector e{k} out of range for target dimension {q}"
                )));
            }
            let mut v = DVector::zeros(q);
            v[k - 1] = 1.0;
            return Ok(v);
        }
    }
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            FkError::InvalidInput(format!("bad value {text:?}; expected eK or a comma list"))
        })?;
    if parts.len() != q {
        return Err(FkError::InvalidInput(format!(
            "value has {} entries, map target has dimension {q}",
            parts.len()
        )));
    }
    Ok(DVector::from_vec(parts))
}

#[derive(Serialize)]
struct CircleReport {
    barycenter: Vec<f64>,
    samples: usize,
    regularity_margin: f64,
    sigma: u8,
    cap_used: String,
    perturbed: bool,
    caps_refused: usize,
}

fn cmd_sigma_tau(command: &'static str, seed: u64, args: MapArgs) -> Result<u8, FkError> {
    let map = load_map(&args)?;
    let target = parse_value(map.q(), &args.value)?;
    let trace_cfg = TraceConfig::default();
    let mut sigma_cfg = SigmaConfig::default();
    sigma_cfg.perturb_seeds = perturb_seeds(seed);
    let res = tau(&map, &target, &trace_cfg, &sigma_cfg)?;

    if let Some(prefix) = &args.dump_circles {
        for (i, circle) in res.trace.circles.iter().enumerate() {
            let path = format!("{prefix}-{i}.csv");
            let mut file = fs::File::create(&path).map_err(|e| {
                FkError::InvalidInput(format!("cannot write {path}: {e}"))
            })?;
            write_circle_csv(circle, &mut file)
                .map_err(|e| FkError::InvalidInput(format!("cannot write {path}: {e}")))?;
        }
    }

    let circles: Vec<CircleReport> = res
        .trace
        .circles
        .iter()
        .zip(&res.sigmas)
        .map(|(c, s)| CircleReport {
            barycenter: c.barycenter().iter().copied().collect(),
            samples: c.samples.len(),
            regularity_margin: c.regularity_margin,
            sigma: s.value,
            cap_used: s.cap_used.clone(),
            perturbed: s.perturbed,
            caps_refused: s.attempts.len(),
        })
        .collect();

    #[derive(Serialize)]
    struct Config<'a> {
        trace: &'a TraceConfig,
        sigma: &'a SigmaConfig,
    }
    let config = Config { trace: &trace_cfg, sigma: &sigma_cfg };
    match command {
        "tau" => {
            #[derive(Serialize)]
            struct TauOut {
                tau: u8,
                circles: Vec<CircleReport>,
                warnings: Vec<String>,
            }
            emit(
                "tau",
                seed,
                config,
                TauOut { tau: res.value, circles, warnings: res.trace.warnings.clone() },
            );
        }
        _ => {
            #[derive(Serialize)]
            struct SigmaOut {
                circles: Vec<CircleReport>,
                warnings: Vec<String>,
            }
            emit("sigma", seed, config, SigmaOut { circles, warnings: res.trace.warnings.clone() });
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// orient
// ---------------------------------------------------------------------------

fn cmd_orient(seed: u64, args: OrientArgs) -> Result<u8, FkError> {
    let mut cfg = CoherenceConfig::default();
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    let (mut start, mut end) = coherence_orientations();
    if args.flip_start {
        start = -start;
    }
    if args.flip_end {
        end = -end;
    }
    let res = coherence_sign(&coherence_path(), &coherence_stabilizer, &start, &end, &cfg)?;
    emit("orient", seed, &cfg, &res);
    Ok(0)
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

fn record_by_name(name: &str) -> Result<HomotopyRecord, FkError> {
    match name {
        "product" => Ok(product_homotopy()),
        "collapse" => Ok(collapse_homotopy()),
        "sweep" => Ok(sweep_homotopy()),
        other => Err(FkError::InvalidInput(format!(
            "unknown homotopy {other:?}; expected product | collapse | sweep"
        ))),
    }
}

fn cmd_audit(seed: u64, args: AuditArgs) -> Result<u8, FkError> {
    let record = record_by_name(&args.model)?;
    let mut cfg = AuditConfig::default();
    cfg.rng_seed = seed;
    if let Some(s) = args.slices {
        cfg.slices = s;
    }
    if let Some(b) = args.bisect_tol {
        cfg.bisect_tol = b;
    }
    let report = audit_homotopy(&record, &cfg)?;
    emit("audit", seed, &cfg, &report);
    Ok(0)
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn cmd_classify(seed: u64, args: ClassifyArgs) -> Result<u8, FkError> {
    let read = |path: &PathBuf| -> Result<FramedClassSymbolic, FkError> {
        let text = fs::read_to_string(path)
            .map_err(|e| FkError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        FramedClassSymbolic::from_json(&text)
    };
    let a = read(&args.a)?;
    let b = read(&args.b)?;
    let answer = cobordant(&a, &b)?;
    #[derive(Serialize)]
    struct ClassifyOut {
        a: FramedClassSymbolic,
        b: FramedClassSymbolic,
        normal_form_a: fredkit::classifier::NormalForm,
        normal_form_b: fredkit::classifier::NormalForm,
        cobordant: bool,
    }
    let out = ClassifyOut {
        normal_form_a: a.normal_form(),
        normal_form_b: b.normal_form(),
        a,
        b,
        cobordant: answer,
    };
    emit("classify", seed, serde_json::json!({}), out);
    Ok(0)
}
