//! The `lamperti-kit` command line.
//!
//! Spec files hold the model; flags hold run parameters. Verify commands also
//! take `--request file.json`, whose fields are overridden by any flag given.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::io::{read_map_path, read_mssmp_path, write_atomic, write_map_path, write_mssmp_path};
use crate::lamperti::{agglomerate_spec, forward_transform, inverse_transform, project_path, Partition};
use crate::model::{validate_spec, MapSpec, Violation};
use crate::reference::{example_chain_scaling, example_drift_scaling, example_jumping_spider, ExampleConfig};
use crate::sampler::{sample_map_path, SimConfig};
use crate::spectral::{classify, ClassifyOptions};
use crate::verify::{
    verify_agglomeration, verify_lifetime, verify_lln, verify_scaling, AgglomerationRequest, LifetimeRequest,
    LlnRequest, ScalingRequest, TestReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_TEST_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const THREADS_ENV: &str = "LAMPERTI_KIT_THREADS";

/// Comma-separated numbers, e.g. `1,-0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lamperti-kit", version, about = "Markov additive processes and their Lamperti time changes")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one MAP path.
    SimulateMap(SimulateMap),
    /// Sample a MAP path and write its Lamperti transform.
    SimulateMssmp(SimulateMssmp),
    /// Lamperti transform of a stored MAP path.
    Transform(Transform),
    /// Recover the MAP path from a stored mssMp path.
    InverseTransform(InverseTransform),
    /// Lifetime and limit verdicts from the matrix exponent.
    Classify(Classify),
    /// Agglomerate a spec, or project a stored mssMp path, over a partition.
    Agglomerate(Agglomerate),
    VerifyScaling(VerifyScaling),
    VerifyAgglomeration(VerifyAgglomeration),
    VerifyLln(VerifyLln),
    VerifyLifetime(VerifyLifetime),
    /// Generate a path of one of the closed-form examples.
    Example(Example),
}

#[derive(Debug, Args)]
struct MapRun {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    replication: u64,
    #[arg(long, default_value_t = 0)]
    start_state: usize,
    #[arg(long, allow_hyphen_values = true)]
    start_xi: Option<List>,
}

#[derive(Debug, Args)]
struct SimulateMap {
    #[command(flatten)]
    run: MapRun,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateMssmp {
    #[command(flatten)]
    run: MapRun,
    /// Defaults to the spec's alpha.
    #[arg(long)]
    alpha: Option<List>,
    /// Also keep the underlying MAP path.
    #[arg(long)]
    map_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Transform {
    #[arg(long)]
    map_path: PathBuf,
    #[arg(long)]
    alpha: List,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InverseTransform {
    #[arg(long)]
    mssmp_path: PathBuf,
    /// Defaults to the alpha recorded with the path.
    #[arg(long)]
    alpha: Option<List>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Classify {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    alpha: Option<List>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Agglomerate {
    #[arg(long, required_unless_present = "mssmp_path", conflicts_with = "mssmp_path")]
    config: Option<PathBuf>,
    #[arg(long)]
    mssmp_path: Option<PathBuf>,
    /// Blocks of 0-based coordinates, e.g. `0,1;2`.
    #[arg(long)]
    partition: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyCommon {
    #[arg(long)]
    config: PathBuf,
    /// JSON request; flags override its fields.
    #[arg(long)]
    request: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Output directory for report.json, records.csv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-path records as CSV.
    #[arg(long)]
    summary_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyScaling {
    #[command(flatten)]
    common: VerifyCommon,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<List>,
    #[arg(long)]
    c: Option<List>,
    /// Observation times.
    #[arg(long = "t")]
    times: Option<List>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    map_horizon: Option<f64>,
    #[arg(long)]
    max_doublings: Option<u32>,
}

#[derive(Debug, Args)]
struct VerifyAgglomeration {
    #[command(flatten)]
    common: VerifyCommon,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t")]
    times: Option<List>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyLln {
    #[command(flatten)]
    common: VerifyCommon,
    #[arg(long)]
    alpha: Option<List>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyLifetime {
    #[command(flatten)]
    common: VerifyCommon,
    #[arg(long)]
    alpha: Option<List>,
    #[arg(long)]
    horizons: Option<List>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleKind {
    ChainScaling,
    DriftScaling,
    JumpingSpider,
}

#[derive(Debug, Args)]
struct Example {
    #[arg(long, value_enum)]
    kind: ExampleKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<List>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replication: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub duration_seconds: f64,
    pub argv: Vec<String>,
}

/// Where the manifest for a set of outputs goes: `manifest.json` inside an
/// output directory, `<stem>.manifest.json` next to a single output file.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.with_file_name(format!("{stem}.manifest.json"))
    }
}

struct Run {
    command: &'static str,
    argv: Vec<String>,
    started: Instant,
    config: Option<PathBuf>,
    parameters: Value,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn finish(mut self, out: &Path, is_dir: bool) -> Result<()> {
        let path = manifest_path(out, is_dir);
        self.outputs.push(path.clone());
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            parameters: self.parameters,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            argv: self.argv,
        };
        write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let argv = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run_for(command: &'static str, argv: Vec<String>) -> Run {
    Run {
        command,
        argv,
        started: Instant::now(),
        config: None,
        parameters: Value::Null,
        seed: None,
        outputs: Vec::new(),
    }
}

fn dispatch(command: Command, argv: Vec<String>) -> Result<i32> {
    match command {
        Command::SimulateMap(a) => {
            let mut run = run_for("simulate-map", argv);
            let (spec, cfg) = map_run(&a.run, &mut run)?;
            let path = sample_map_path(&spec, &cfg)?;
            run.outputs.extend(write_map_path(&path, &a.out)?);
            run.finish(&a.out, false)?;
            Ok(EXIT_OK)
        }
        Command::SimulateMssmp(a) => {
            let mut run = run_for("simulate-mssmp", argv);
            let (spec, cfg) = map_run(&a.run, &mut run)?;
            let alpha = a.alpha.map_or_else(|| spec.alpha.clone(), |l| l.0);
            run.parameters["alpha"] = json!(alpha);
            let path = sample_map_path(&spec, &cfg)?;
            let x = forward_transform(&path, &alpha)?;
            if let Some(m) = &a.map_out {
                run.outputs.extend(write_map_path(&path, m)?);
            }
            run.outputs.extend(write_mssmp_path(&x, &a.out)?);
            run.finish(&a.out, false)?;
            Ok(EXIT_OK)
        }
        Command::Transform(a) => {
            let mut run = run_for("transform", argv);
            run.parameters = json!({ "map_path": a.map_path, "alpha": a.alpha.0 });
            let path = read_map_path(&a.map_path)?;
            let x = forward_transform(&path, &a.alpha.0)?;
            run.outputs.extend(write_mssmp_path(&x, &a.out)?);
            run.finish(&a.out, false)?;
            Ok(EXIT_OK)
        }
        Command::InverseTransform(a) => {
            let mut run = run_for("inverse-transform", argv);
            let x = read_mssmp_path(&a.mssmp_path)?;
            let alpha = a.alpha.map_or_else(|| x.alpha.clone(), |l| l.0);
            run.parameters = json!({ "mssmp_path": a.mssmp_path, "alpha": alpha });
            let path = inverse_transform(&x, &alpha)?;
            run.outputs.extend(write_map_path(&path, &a.out)?);
            run.finish(&a.out, false)?;
            Ok(EXIT_OK)
        }
        Command::Classify(a) => {
            let mut run = run_for("classify", argv);
            let spec = load_spec(&a.config)?;
            let alpha = a.alpha.map_or_else(|| spec.alpha.clone(), |l| l.0);
            let mut opts = ClassifyOptions { step: a.step, ..Default::default() };
            if let Some(t) = a.tol {
                opts.tol = t;
            }
            let report = classify(&spec, &alpha, &opts)?;
            let text = serde_json::to_string_pretty(&report)?;
            emit(&text);
            if let Some(out) = &a.out {
                run.config = Some(a.config.clone());
                run.parameters = json!({ "alpha": alpha, "tol": opts.tol, "step": opts.step });
                write_atomic(out, text.as_bytes())?;
                run.outputs.push(out.clone());
                run.finish(out, false)?;
            }
            Ok(EXIT_OK)
        }
        Command::Agglomerate(a) => agglomerate(a, argv),
        Command::VerifyScaling(a) => {
            let mut run = run_for("verify-scaling", argv);
            let mut fields = vec![
                ("x", a.x.map(|l| json!(l.0))),
                ("c", a.c.map(|l| json!(l.0))),
                ("times", a.times.map(|l| json!(l.0))),
                ("level", a.level.map(|v| json!(v))),
                ("sim.dt", a.dt.map(|v| json!(v))),
                ("sim.map_horizon", a.map_horizon.map(|v| json!(v))),
                ("sim.max_doublings", a.max_doublings.map(|v| json!(v))),
            ];
            fields.push(("sim.threads", a.common.threads.map(|v| json!(v))));
            let (spec, req): (_, ScalingRequest) = verify_setup(&a.common, fields, &mut run)?;
            let report = verify_scaling(&spec, &req)?;
            finish_verify(report, &a.common, run)
        }
        Command::VerifyAgglomeration(a) => {
            let mut run = run_for("verify-agglomeration", argv);
            let spec = load_spec(&a.common.config)?;
            let partition = match &a.partition {
                Some(p) => Some(json!(Partition::parse(p, spec.dimension())?.blocks())),
                None => None,
            };
            let fields = vec![
                ("partition", partition),
                ("horizon", a.horizon.map(|v| json!(v))),
                ("dt", a.dt.map(|v| json!(v))),
                ("times", a.times.map(|l| json!(l.0))),
                ("level", a.level.map(|v| json!(v))),
                ("tolerance", a.tolerance.map(|v| json!(v))),
                ("threads", a.common.threads.map(|v| json!(v))),
            ];
            let (spec, req): (_, AgglomerationRequest) = verify_setup(&a.common, fields, &mut run)?;
            let report = verify_agglomeration(&spec, &req)?;
            finish_verify(report, &a.common, run)
        }
        Command::VerifyLln(a) => {
            let mut run = run_for("verify-lln", argv);
            let fields = vec![
                ("alpha", a.alpha.map(|l| json!(l.0))),
                ("horizon", a.horizon.map(|v| json!(v))),
                ("dt", a.dt.map(|v| json!(v))),
                ("threads", a.common.threads.map(|v| json!(v))),
            ];
            let (spec, req): (_, LlnRequest) = verify_setup(&a.common, fields, &mut run)?;
            let report = verify_lln(&spec, &req)?;
            finish_verify(report, &a.common, run)
        }
        Command::VerifyLifetime(a) => {
            let mut run = run_for("verify-lifetime", argv);
            let fields = vec![
                ("alpha", a.alpha.map(|l| json!(l.0))),
                ("horizons", a.horizons.map(|l| json!(l.0))),
                ("dt", a.dt.map(|v| json!(v))),
                ("tol", a.tol.map(|v| json!(v))),
                ("threads", a.common.threads.map(|v| json!(v))),
            ];
            let (spec, req): (_, LifetimeRequest) = verify_setup(&a.common, fields, &mut run)?;
            let report = verify_lifetime(&spec, &req)?;
            finish_verify(report, &a.common, run)
        }
        Command::Example(a) => {
            let mut run = run_for("example", argv);
            let mut doc = read_json(&a.config)?;
            let seed = resolve_seed(a.seed.or_else(|| doc.get("seed").and_then(Value::as_u64)));
            let fields = [
                ("x", a.x.map(|l| json!(l.0))),
                ("horizon", a.horizon.map(|v| json!(v))),
                ("dt", a.dt.map(|v| json!(v))),
                ("seed", Some(json!(seed))),
                ("replication", a.replication.map(|v| json!(v))),
            ];
            overlay(&mut doc, fields)?;
            let cfg: ExampleConfig = from_value(doc.clone(), &a.config)?;
            let x = match a.kind {
                ExampleKind::ChainScaling => example_chain_scaling(&cfg)?,
                ExampleKind::DriftScaling => example_drift_scaling(&cfg)?,
                ExampleKind::JumpingSpider => example_jumping_spider(&cfg)?,
            };
            run.config = Some(a.config);
            run.seed = Some(seed);
            run.parameters = json!({ "kind": a.kind, "example": doc });
            run.outputs.extend(write_mssmp_path(&x, &a.out)?);
            run.finish(&a.out, false)?;
            Ok(EXIT_OK)
        }
    }
}

fn map_run(a: &MapRun, run: &mut Run) -> Result<(MapSpec, SimConfig)> {
    let spec = load_spec(&a.config)?;
    let seed = resolve_seed(a.seed);
    let cfg = SimConfig::new(a.horizon, a.dt, seed)
        .replication(a.replication)
        .start(a.start_state, a.start_xi.as_ref().map_or_else(Vec::new, |l| l.0.clone()));
    run.config = Some(a.config.clone());
    run.seed = Some(seed);
    run.parameters = serde_json::to_value(&cfg)?;
    Ok((spec, cfg))
}

fn agglomerate(a: Agglomerate, argv: Vec<String>) -> Result<i32> {
    let mut run = run_for("agglomerate", argv);
    if let Some(config) = &a.config {
        let spec = load_spec(config)?;
        let partition = Partition::parse(&a.partition, spec.dimension())?;
        let out = agglomerate_spec(&spec, &partition)?;
        let text = out.to_json()?;
        match &a.out {
            Some(path) => {
                run.config = Some(config.clone());
                run.parameters = json!({ "partition": partition });
                write_atomic(path, text.as_bytes())?;
                run.outputs.push(path.clone());
                run.finish(path, false)?;
            }
            None => emit(&text),
        }
        return Ok(EXIT_OK);
    }
    let source = a.mssmp_path.expect("clap enforces one of --config / --mssmp-path");
    let out = a
        .out
        .ok_or_else(|| Error::Config("--out is required with --mssmp-path".into()))?;
    let x = read_mssmp_path(&source)?;
    let partition = Partition::parse(&a.partition, x.dim())?;
    let y = project_path(&x, &partition)?;
    run.parameters = json!({ "mssmp_path": source, "partition": partition });
    run.outputs.extend(write_mssmp_path(&y, &out)?);
    run.finish(&out, false)?;
    Ok(EXIT_OK)
}

fn verify_setup<T: DeserializeOwned + Serialize>(
    common: &VerifyCommon,
    mut fields: Vec<(&str, Option<Value>)>,
    run: &mut Run,
) -> Result<(MapSpec, T)> {
    let spec = load_spec(&common.config)?;
    let mut doc = match &common.request {
        Some(p) => read_json(p)?,
        None => Value::Object(Map::new()),
    };
    let seed = resolve_seed(common.seed.or_else(|| doc.get("seed").and_then(Value::as_u64)));
    fields.push(("seed", Some(json!(seed))));
    fields.push(("paths", common.paths.map(|v| json!(v))));
    overlay(&mut doc, fields)?;
    let source = common.request.as_deref().unwrap_or(Path::new("command-line flags"));
    let req: T = from_value(doc, source)?;
    run.config = Some(common.config.clone());
    run.seed = Some(seed);
    run.parameters = serde_json::to_value(&req)?;
    Ok((spec, req))
}

fn finish_verify(report: TestReport, common: &VerifyCommon, mut run: Run) -> Result<i32> {
    let text = serde_json::to_string_pretty(&report)?;
    emit(&text);
    if let Some(path) = &common.summary_csv {
        let mut buf = Vec::new();
        report.write_records_csv(&mut buf)?;
        write_atomic(path, &buf)?;
        run.outputs.push(path.clone());
    }
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        let report_path = dir.join("report.json");
        write_atomic(&report_path, text.as_bytes())?;
        run.outputs.push(report_path);
        let records = dir.join("records.csv");
        let mut buf = Vec::new();
        report.write_records_csv(&mut buf)?;
        write_atomic(&records, &buf)?;
        run.outputs.push(records);
        run.finish(dir, true)?;
    } else if let Some(path) = &common.summary_csv {
        run.finish(path, false)?;
    }
    Ok(match (&report.error, report.passed) {
        (Some(e), _) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
        (None, Some(false)) => EXIT_TEST_FAILED,
        (None, None) => {
            eprintln!("note: no prediction to test; see report notes");
            EXIT_OK
        }
        (None, Some(true)) => EXIT_OK,
    })
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

/// A fresh seed when none is given; printed so the run can be repeated.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

/// Sets dotted keys (`sim.dt`) on a JSON object; `None` leaves a key alone.
fn overlay<'a>(doc: &mut Value, fields: impl IntoIterator<Item = (&'a str, Option<Value>)>) -> Result<()> {
    for (key, value) in fields {
        let Some(value) = value else { continue };
        let mut node = &mut *doc;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("cannot set `{key}`: parent is not an object")))?;
            if parts.peek().is_none() {
                obj.insert(part.to_string(), value);
                break;
            }
            node = obj.entry(part).or_insert_with(|| Value::Object(Map::new()));
        }
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn from_value<T: DeserializeOwned>(doc: Value, source: &Path) -> Result<T> {
    serde_json::from_value(doc).map_err(|e| Error::Config(format!("{}: {e}", source.display())))
}

/// Reads and validates a spec file. Violations carry the line of the JSON
/// element they refer to.
pub fn load_spec(path: &Path) -> Result<MapSpec> {
    let text = read_text(path)?;
    let spec: MapSpec = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let violations = validate_spec(&spec);
    if violations.is_empty() {
        return Ok(spec);
    }
    Err(Error::Spec(
        violations
            .into_iter()
            .map(|v| {
                let line = violation_line(&text, &v);
                Violation {
                    message: match line {
                        Some(l) => format!("{} ({}:{l})", v.message, path.display()),
                        None => format!("{} ({})", v.message, path.display()),
                    },
                    ..v
                }
            })
            .collect(),
    ))
}

/// Any JSON config: an example config, a verify request or a spec.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Line of the top-level key for `v.field`, refined to the array element the
/// message names (`row 2`, `block 1`, `state 0`, `entry (i,j)`).
fn violation_line(text: &str, v: &Violation) -> Option<usize> {
    let key = top_level_key(text, &v.field)?;
    let index = ["row ", "block ", "state ", "entry ("]
        .iter()
        .find_map(|p| leading_index(&v.message, p));
    let pos = match index {
        Some(k) => array_element(text, key, k).unwrap_or(key),
        None => key,
    };
    Some(text[..pos].bytes().filter(|b| *b == b'\n').count() + 1)
}

fn leading_index(message: &str, prefix: &str) -> Option<usize> {
    let rest = &message[message.find(prefix)? + prefix.len()..];
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Byte offset of `"key"` used as a key of the outermost object.
fn top_level_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let bytes = text.as_bytes();
    let mut depth = 0i32;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth -= 1,
            b'"' => {
                if depth == 1 && text[i..].starts_with(&needle) {
                    let after = text[i + needle.len()..].trim_start();
                    if after.starts_with(':') {
                        return Some(i);
                    }
                }
                i = skip_string(bytes, i);
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn skip_string(bytes: &[u8], start: usize) -> usize {
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return i + 1,
            _ => i += 1,
        }
    }
    i
}

/// Byte offset of element `k` of the array that is the value at `key_pos`.
fn array_element(text: &str, key_pos: usize, k: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut i = key_pos + text[key_pos..].find(':')? + 1;
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    if bytes.get(i) != Some(&b'[') {
        return None;
    }
    let mut depth = 0i32;
    let mut seen = 0usize;
    let mut expecting = true;
    while i < bytes.len() {
        let b = bytes[i];
        if depth == 1 && expecting && !b.is_ascii_whitespace() && b != b']' {
            if seen == k {
                return Some(i);
            }
            seen += 1;
            expecting = false;
        }
        match b {
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return None;
                }
            }
            b',' if depth == 1 => expecting = true,
            b'"' => {
                i = skip_string(bytes, i);
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    None
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleKind::ChainScaling => "chain-scaling",
            ExampleKind::DriftScaling => "drift-scaling",
            ExampleKind::JumpingSpider => "jumping-spider",
        })
    }
}
