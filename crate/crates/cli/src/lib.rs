//! `qbd`: invariant distributions, verification reports, figure data and a
//! truncation oracle for block-tridiagonal chains, driven either by a weight
//! parameter triple `(α, β, k)` or by a JSON model file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qbd_potential::golden::{figure_rows, golden_model, golden_norms};
use qbd_potential::invariant::potential_identity_residuals;
use qbd_potential::tolerances;
use qbd_potential::{
    brute_force_invariant, check_symmetry_conditions, classify, compare_with_oracle, invariant_vector,
    potential_coefficients, read_model, reconstruct, stationarity_residual, BlockTridiagonal, Classification,
    FamilyError, FamilyParams, InvariantVector, Kind, Level, Mat, ModelError, ModelFileError, MomentScalar, MopError,
    PotentialSequence, Rational, Scalar, Uniqueness,
};

/// Largest relative error accepted between `π` and the truncation oracle.
pub const ORACLE_REL: f64 = 5e-2;

/// Levels compared against the oracle when more are available.
const ORACLE_LEVELS: usize = 5;

#[derive(Debug, Parser)]
#[command(
    name = "qbd",
    version,
    about = "Invariant distributions of quasi-birth-and-death processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit the invariant vector level by level.
    Invariant(RunArgs),
    /// Run the invariant checks and report pass/fail per check.
    Verify(RunArgs),
    /// Emit plot data: the components of `Π_n e` for every level.
    Figure(RunArgs),
    /// Compare the invariant vector with the stationary vector of a lumped truncation.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Weight exponent at 0 (integer, decimal or p/q).
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Weight exponent at 1.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Weight parameter, 0 < k < beta + 1.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// JSON model file instead of a parameter triple.
    #[arg(long, conflicts_with_all = ["alpha", "beta", "k"])]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value_t = Backend::Auto)]
    pub backend: Backend,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Float verification tolerance.
    #[arg(long, env = "QBD_FLOAT_TOL", default_value_t = tolerances::VERIFY_DEFAULT, hide = true)]
    pub float_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Highest level to compute.
    #[arg(long, default_value_t = 40)]
    pub levels: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Highest level compared.
    #[arg(long, default_value_t = ORACLE_LEVELS)]
    pub levels: usize,
    /// Truncation level L of the lumped chain.
    #[arg(long, default_value_t = 200)]
    pub truncation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// Exact when alpha and beta are nonnegative integers (always for model files), float otherwise.
    Auto,
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0} of {1} checks failed")]
    ChecksFailed(usize, usize),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 success, 1 check or validation failure, 2 usage error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Csv(_) => 2,
            CliError::Model(_) | CliError::Validation(_) | CliError::ChecksFailed(..) => 1,
        }
    }
}

fn family_error(e: FamilyError, exact: bool) -> CliError {
    match e {
        FamilyError::Range | FamilyError::Point => CliError::Usage(e.to_string()),
        FamilyError::Model(_) | FamilyError::Mop(MopError::Model(_)) => {
            let drift = matches!(
                e,
                FamilyError::Model(ModelError::RowSum { .. })
                    | FamilyError::Mop(MopError::Model(ModelError::RowSum { .. }))
            );
            let mut msg = e.to_string();
            if drift && !exact {
                msg.push_str(
                    " (float row sums can drift past the 1e-12 tolerance beyond about 20 levels; lower --levels)",
                );
            }
            CliError::Model(msg)
        }
        _ => CliError::Validation(e.to_string()),
    }
}

fn file_error(e: ModelFileError) -> CliError {
    match e {
        ModelFileError::Model(m) => CliError::Model(format!("invalid model: {m}")),
        other => CliError::Usage(other.to_string()),
    }
}

/// Scalars the CLI can print.
pub trait Emit: MomentScalar {
    /// `value` followed by `numerator, denominator` on the exact backend.
    fn cells(&self) -> Vec<String>;
    fn json(&self) -> Value;
}

impl Emit for Rational {
    fn cells(&self) -> Vec<String> {
        vec![self.to_string(), self.numer().to_string(), self.denom().to_string()]
    }

    fn json(&self) -> Value {
        Value::String(self.to_string())
    }
}

impl Emit for f64 {
    fn cells(&self) -> Vec<String> {
        vec![self.to_string()]
    }

    fn json(&self) -> Value {
        serde_json::Number::from_f64(*self).map_or(Value::Null, Value::Number)
    }
}

#[derive(Debug, Clone)]
enum Resolved {
    Params { alpha: String, beta: String, k: String },
    File(PathBuf),
}

impl Resolved {
    fn from_source(src: &Source) -> Result<Self, CliError> {
        if let Some(path) = &src.model {
            return Ok(Resolved::File(path.clone()));
        }
        match (&src.alpha, &src.beta, &src.k) {
            (Some(a), Some(b), Some(k)) => Ok(Resolved::Params {
                alpha: a.clone(),
                beta: b.clone(),
                k: k.clone(),
            }),
            (None, None, None) => Ok(Resolved::Params {
                alpha: "0".into(),
                beta: "0".into(),
                k: "1/2".into(),
            }),
            _ => Err(CliError::Usage("give all of --alpha, --beta, --k, or --model".into())),
        }
    }

    fn params<T: Scalar>(&self) -> Result<Option<FamilyParams<T>>, CliError> {
        let Resolved::Params { alpha, beta, k } = self else {
            return Ok(None);
        };
        let parse = |name: &str, s: &str| T::parse_literal(s).map_err(|e| CliError::Usage(format!("--{name}: {e}")));
        let p = FamilyParams::new(parse("alpha", alpha)?, parse("beta", beta)?, parse("k", k)?)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Some(p))
    }
}

fn resolve_backend(requested: Backend, src: &Resolved) -> Result<Backend, CliError> {
    let exact_ok = match src.params::<Rational>() {
        Ok(Some(p)) => p.alpha.as_nonneg_integer().is_some() && p.beta.as_nonneg_integer().is_some(),
        Ok(None) => true,
        Err(e) => return Err(e),
    };
    match requested {
        Backend::Auto if exact_ok => Ok(Backend::Exact),
        Backend::Auto => Ok(Backend::Float),
        Backend::Exact if !exact_ok => Err(CliError::Usage(
            "the exact backend needs nonnegative integer alpha and beta (x^alpha is not rational otherwise); \
             use --backend float"
                .into(),
        )),
        other => Ok(other),
    }
}

/// A model with its seed, plus what is known about where it came from.
struct Run<T> {
    model: BlockTridiagonal<T>,
    pi0: Mat<T>,
    norms: Option<Vec<Mat<T>>>,
    classification: Option<Classification>,
    golden: bool,
}

/// Loads a model with at least `count` levels. `closed_form` allows the
/// golden closed forms to stand in for the pipeline.
fn load<T: Emit>(src: &Resolved, count: usize, closed_form: bool) -> Result<Run<T>, CliError> {
    match src {
        Resolved::File(path) => {
            let f = read_model::<T>(path).map_err(file_error)?;
            if f.model.len() < count {
                return Err(CliError::Usage(format!(
                    "{} has {} levels; this run needs {count}",
                    path.display(),
                    f.model.len()
                )));
            }
            Ok(Run {
                model: f.model,
                pi0: f.pi0,
                norms: None,
                classification: None,
                golden: false,
            })
        }
        Resolved::Params { .. } => {
            let p = src.params::<T>()?.expect("parameter source");
            let classification = Some(classify(&p));
            if p.is_golden() && closed_form {
                let model = golden_model::<T>(count).map_err(|e| CliError::Model(e.to_string()))?;
                let pi0 = golden_norms::<T>(0)
                    .inverse()
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                return Ok(Run {
                    model,
                    pi0,
                    norms: Some((0..count).map(golden_norms).collect()),
                    classification,
                    golden: true,
                });
            }
            let rec = reconstruct(&p, count.saturating_sub(1)).map_err(|e| family_error(e, T::EXACT))?;
            Ok(Run {
                model: rec.model,
                pi0: rec.pi0,
                norms: Some(rec.normalized.norms),
                classification,
                golden: p.is_golden(),
            })
        }
    }
}

fn potentials<T: Scalar>(run: &Run<T>, levels: usize) -> Result<(PotentialSequence<T>, InvariantVector<T>), CliError> {
    let ps = potential_coefficients(&run.model, &run.pi0, levels).map_err(|e| CliError::Validation(e.to_string()))?;
    let pi = invariant_vector(&ps).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((ps, pi))
}

fn classification_label(c: Option<Classification>) -> String {
    match c {
        Some(c) => {
            let u = match c.uniqueness {
                Uniqueness::Unique => "unique up to scale",
                Uniqueness::Unknown => "uniqueness unknown",
            };
            format!("{}; {u}", c.recurrence)
        }
        None => "classification unknown for model files".into(),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Usage(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Invariant(args) => dispatch(&args.common, |src, exact| {
            if exact {
                cmd_invariant::<Rational>(src, &args)
            } else {
                cmd_invariant::<f64>(src, &args)
            }
        }),
        Command::Verify(args) => dispatch(&args.common, |src, exact| {
            if exact {
                cmd_verify::<Rational>(src, &args)
            } else {
                cmd_verify::<f64>(src, &args)
            }
        }),
        Command::Figure(args) => dispatch(&args.common, |src, exact| {
            if exact {
                cmd_figure::<Rational>(src, &args)
            } else {
                cmd_figure::<f64>(src, &args)
            }
        }),
        Command::Oracle(args) => dispatch(&args.common, |src, exact| {
            if exact {
                cmd_oracle::<Rational>(src, &args)
            } else {
                cmd_oracle::<f64>(src, &args)
            }
        }),
    }
}

fn dispatch(common: &Common, f: impl FnOnce(&Resolved, bool) -> Result<(), CliError>) -> Result<(), CliError> {
    let src = Resolved::from_source(&common.source)?;
    let backend = resolve_backend(common.backend, &src)?;
    f(&src, backend == Backend::Exact)
}

fn cmd_invariant<T: Emit>(src: &Resolved, args: &RunArgs) -> Result<(), CliError> {
    let run = load::<T>(src, args.levels + 1, false)?;
    let (_, pi) = potentials(&run, args.levels)?;
    let label = classification_label(run.classification);
    let mut out = open_out(args.common.out.as_deref())?;
    match args.common.format {
        Format::Csv => {
            writeln!(out, "# {label}")?;
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["level", "phase", "value"];
            if T::EXACT {
                header.extend(["numerator", "denominator"]);
            }
            w.write_record(&header)?;
            for (n, block) in pi.blocks().iter().enumerate() {
                for (j, v) in block.iter().enumerate() {
                    let mut rec = vec![n.to_string(), (j + 1).to_string()];
                    rec.extend(v.cells());
                    w.write_record(&rec)?;
                }
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = pi
                .blocks()
                .iter()
                .enumerate()
                .flat_map(|(n, block)| {
                    block.iter().enumerate().map(move |(j, v)| {
                        let mut row = json!({"level": n, "phase": j + 1, "value": v.json()});
                        if T::EXACT {
                            let cells = v.cells();
                            row["numerator"] = Value::String(cells[1].clone());
                            row["denominator"] = Value::String(cells[2].clone());
                        }
                        row
                    })
                })
                .collect();
            let doc = json!({
                "backend": if T::EXACT { "exact" } else { "float" },
                "classification": run.classification,
                "label": label,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn skip(name: &'static str, detail: impl Into<String>) -> Check {
    Check {
        name,
        status: Status::Skip,
        detail: detail.into(),
    }
}

const CHECK_NAMES: [&str; 5] = [
    "stochasticity",
    "symmetry conditions",
    "norm identities",
    "stationarity",
    "oracle",
];

fn residual_text<T: Scalar>(r: &T) -> String {
    if T::EXACT && r.is_zero() {
        "0 (exact)".into()
    } else {
        format!("{:.3e}", r.to_f64())
    }
}

fn max_of<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |m, v| if v > m { v } else { m })
}

/// `|r| ≤ tol · scale` on floats, `r = 0` on the exact backend.
fn within<T: Scalar>(r: &T, scale: f64, tol: f64) -> bool {
    if T::EXACT {
        r.is_zero()
    } else {
        r.to_f64() <= tol * scale.max(1.0)
    }
}

fn stochasticity<T: Scalar>(model: &BlockTridiagonal<T>, levels: usize) -> Check {
    let target = match model.kind() {
        Kind::Discrete => T::one(),
        Kind::Continuous => T::zero(),
    };
    let dev = max_of((0..=levels).filter(|&n| model.has_a(n)).flat_map(|n| {
        let mut total = model.b(n) + model.a(n);
        if n > 0 {
            total = &total + model.c(n);
        }
        total
            .row_sums()
            .into_iter()
            .map(|s| (s - target.clone()).abs())
            .collect::<Vec<_>>()
    }));
    let detail = if T::EXACT {
        format!("row sums exact on levels 0..{levels}")
    } else {
        format!("max row-sum deviation {} on levels 0..{levels}", residual_text(&dev))
    };
    check("stochasticity", true, detail)
}

fn norm_identities<T: Scalar>(run: &Run<T>, levels: usize, tol: f64) -> Check {
    let Some(norms) = &run.norms else {
        return skip("norm identities", "model file carries no orthogonality norms");
    };
    let m = &run.model;
    let mut worst = T::zero();
    let mut scale = 1.0f64;
    for n in 0..=levels.min(norms.len() - 1) {
        let h = &norms[n];
        scale = scale.max(h.max_abs().to_f64());
        let r = (m.b(n) * h).max_abs_diff(&(h * &m.b(n).transpose()));
        if r > worst {
            worst = r;
        }
        if n + 1 < norms.len() && n < levels {
            let r = (m.a(n) * &norms[n + 1]).max_abs_diff(&(h * &m.c(n + 1).transpose()));
            if r > worst {
                worst = r;
            }
        }
    }
    let ok = within(&worst, scale, tol);
    check(
        "norm identities",
        ok,
        format!(
            "B_n‖Q_n‖² = ‖Q_n‖²B_nᵀ, A_n‖Q_(n+1)‖² = ‖Q_n‖²C_(n+1)ᵀ; max residual {}",
            residual_text(&worst)
        ),
    )
}

fn to_f64_model<T: Scalar>(model: &BlockTridiagonal<T>, count: usize) -> Result<BlockTridiagonal<f64>, CliError> {
    let conv = |m: &Mat<T>| m.map(|v| v.to_f64());
    let levels = (0..count)
        .map(|n| {
            Level::new(
                conv(model.b(n)),
                model.has_a(n).then(|| conv(model.a(n))),
                (n > 0).then(|| conv(model.c(n))),
            )
        })
        .collect();
    BlockTridiagonal::new(model.phases(), model.kind(), levels).map_err(|e| CliError::Model(e.to_string()))
}

struct OracleRun {
    compared: usize,
    pi: Vec<Vec<f64>>,
    rescaled: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
    max: f64,
}

fn oracle_compare<T: Scalar>(
    model: &BlockTridiagonal<T>,
    pi: &InvariantVector<T>,
    truncation: usize,
    compared: usize,
) -> Result<OracleRun, CliError> {
    let fm = to_f64_model(model, truncation + 1)?;
    let oracle = brute_force_invariant(&fm, truncation).map_err(|e| CliError::Validation(e.to_string()))?;
    let pi_f = qbd_potential::LevelVector::new(
        pi.blocks()
            .iter()
            .map(|b| b.iter().map(Scalar::to_f64).collect())
            .collect(),
    );
    let cmp = compare_with_oracle(&pi_f, &oracle, compared).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(OracleRun {
        compared,
        pi: pi_f.blocks[..compared].to_vec(),
        rescaled: cmp.rescaled,
        errors: cmp.relative_errors,
        max: cmp.max_relative_error,
    })
}

fn cmd_verify<T: Emit>(src: &Resolved, args: &RunArgs) -> Result<(), CliError> {
    let levels = args.levels;
    let tol = args.common.float_tol;
    let checks = match load::<T>(src, levels + 1, false) {
        Err(CliError::Model(msg)) => {
            let mut checks = vec![check("stochasticity", false, msg)];
            checks.extend(CHECK_NAMES[1..].iter().map(|n| skip(n, "model rejected")));
            checks
        }
        Err(e) => return Err(e),
        Ok(run) => verify_run(&run, levels, tol),
    };
    let mut out = open_out(args.common.out.as_deref())?;
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    match args.common.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["check", "status", "detail"])?;
            for c in &checks {
                w.write_record([c.name, c.status.label(), &c.detail])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "backend": if T::EXACT { "exact" } else { "float" },
                "levels": levels,
                "passed": failed == 0,
                "checks": checks.iter().map(|c| json!({
                    "name": c.name, "status": c.status.label(), "detail": c.detail,
                })).collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed, checks.len()));
    }
    Ok(())
}

fn verify_run<T: Emit>(run: &Run<T>, levels: usize, tol: f64) -> Vec<Check> {
    let mut checks = vec![stochasticity(&run.model, levels)];
    let (ps, pi) = match potentials(run, levels) {
        Ok(v) => v,
        Err(e) => {
            checks.push(check("symmetry conditions", false, e.to_string()));
            checks.extend(CHECK_NAMES[2..].iter().map(|n| skip(n, "no potential coefficients")));
            return checks;
        }
    };
    let report = check_symmetry_conditions(&run.model, &ps);
    let mut worst = 0.0f64;
    for l in &report.levels {
        let here = ps.get(l.level).max_abs().to_f64();
        worst = worst.max(l.diagonal.to_f64() / here.max(1.0));
        if let Some(off) = &l.off_diagonal {
            let next = ps.get(l.level + 1).max_abs().to_f64();
            worst = worst.max(off.to_f64() / here.max(next).max(1.0));
        }
    }
    let identities = max_of(potential_identity_residuals(&run.model, &ps));
    let scale = ps.iter().map(|m| m.max_abs().to_f64()).fold(1.0, f64::max);
    let ok = if T::EXACT {
        report.max_residual().is_zero() && identities.is_zero()
    } else {
        worst <= tol && identities.to_f64() <= tol * scale
    };
    let detail = if T::EXACT {
        residual_text(&report.max_residual())
    } else {
        format!("{worst:.3e} (relative to Π_n)")
    };
    checks.push(check(
        "symmetry conditions",
        ok,
        format!("Π_nB_n = B_nᵀΠ_n, Π_nA_n = C_(n+1)ᵀΠ_(n+1); max residual {detail}"),
    ));
    checks.push(norm_identities(run, levels, tol));

    let scale = pi.blocks().iter().flatten().map(Scalar::to_f64).fold(0.0, f64::max);
    let residual = stationarity_residual(&run.model, pi.as_level_vector(), levels).map(|r| max_of(r));
    checks.push(match residual {
        Ok(r) => check(
            "stationarity",
            within(&r, scale, tol),
            format!(
                "max residual {} on levels 0..{}",
                residual_text(&r),
                levels.saturating_sub(1)
            ),
        ),
        Err(e) => check("stationarity", false, e.to_string()),
    });

    checks.push(if run.model.kind() != Kind::Discrete {
        skip("oracle", "truncation oracle needs a discrete-time model")
    } else if levels < 2 || !run.model.has_a(levels) {
        skip("oracle", format!("no lumped truncation at level {levels}"))
    } else {
        let compared = (ORACLE_LEVELS + 1).min(levels + 1);
        match oracle_compare(&run.model, &pi, levels, compared) {
            Ok(o) => check(
                "oracle",
                o.max < ORACLE_REL,
                format!(
                    "max relative error {:.3e} on levels 0..{} at truncation L = {levels}",
                    o.max,
                    o.compared - 1
                ),
            ),
            Err(e) => check("oracle", false, e.to_string()),
        }
    });
    checks
}

fn cmd_figure<T: Emit>(src: &Resolved, args: &RunArgs) -> Result<(), CliError> {
    let golden = matches!(src.params::<T>()?, Some(p) if p.is_golden());
    let (phases, rows): (usize, Vec<(usize, Vec<T>)>) = if golden {
        let rows = figure_rows::<T>(args.levels)
            .into_iter()
            .map(|(n, a, b)| (n, vec![a, b]))
            .collect();
        (2, rows)
    } else {
        let run = load::<T>(src, args.levels + 1, false)?;
        let (_, pi) = potentials(&run, args.levels)?;
        let rows = pi.blocks().iter().cloned().enumerate().collect();
        (run.model.phases(), rows)
    };
    let names: Vec<String> = (1..=phases).map(|j| format!("pi{j}")).collect();
    let mut out = open_out(args.common.out.as_deref())?;
    match args.common.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["n".to_string()];
            header.extend(names.iter().cloned());
            w.write_record(&header)?;
            for (n, vals) in &rows {
                let mut rec = vec![n.to_string()];
                rec.extend(vals.iter().map(|v| v.cells().swap_remove(0)));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(n, vals)| {
                    let mut row = serde_json::Map::new();
                    row.insert("n".into(), json!(n));
                    for (name, v) in names.iter().zip(vals) {
                        row.insert(name.clone(), v.json());
                    }
                    Value::Object(row)
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &json!({ "rows": rows })).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_oracle<T: Emit>(src: &Resolved, args: &OracleArgs) -> Result<(), CliError> {
    let l = args.truncation;
    if l < 2 {
        return Err(CliError::Usage(format!("--truncation must be at least 2, got {l}")));
    }
    if args.levels > l {
        return Err(CliError::Usage(format!(
            "--levels {} exceeds --truncation {l}",
            args.levels
        )));
    }
    let run = load::<T>(src, l + 1, true)?;
    if run.model.kind() != Kind::Discrete {
        return Err(CliError::Usage(
            "the truncation oracle needs a discrete-time model".into(),
        ));
    }
    if !run.model.has_a(l) {
        return Err(CliError::Usage(format!("level {l} has no A block to lump")));
    }
    let (_, pi) = potentials(&run, args.levels)?;
    let o = oracle_compare(&run.model, &pi, l, args.levels + 1)?;
    let source = if run.golden { "closed form" } else { "pipeline" };
    let mut out = open_out(args.common.out.as_deref())?;
    match args.common.format {
        Format::Csv => {
            writeln!(out, "# truncation L = {l}; max relative error {:e}", o.max)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["level", "phase", "pi", "oracle", "relative_error"])?;
            for n in 0..o.compared {
                for j in 0..o.pi[n].len() {
                    w.write_record([
                        n.to_string(),
                        (j + 1).to_string(),
                        o.pi[n][j].to_string(),
                        o.rescaled[n][j].to_string(),
                        o.errors[n][j].to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = (0..o.compared)
                .flat_map(|n| {
                    let o = &o;
                    (0..o.pi[n].len()).map(move |j| {
                        json!({
                            "level": n, "phase": j + 1, "pi": o.pi[n][j],
                            "oracle": o.rescaled[n][j], "relative_error": o.errors[n][j],
                        })
                    })
                })
                .collect();
            let doc = json!({
                "truncation": l,
                "model": source,
                "max_relative_error": o.max,
                "passed": o.max < ORACLE_REL,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if o.max >= ORACLE_REL {
        return Err(CliError::Validation(format!(
            "oracle disagrees: max relative error {:e} ≥ {ORACLE_REL:e}",
            o.max
        )));
    }
    Ok(())
}
