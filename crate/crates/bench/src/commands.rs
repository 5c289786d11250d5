//! The five CLI verbs. Every verb computes in memory first and only then
//! writes its artifacts, so a failing run leaves no partial output behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sfs_core::drift::DriftSpec;
use sfs_core::math::RngStream;
use sfs_core::metrics::{self, ModeReport, MAX_EXACT_W2};
use sfs_core::samplers::{run_ensemble, with_threads, SampleBatch, SamplerSpec};
use sfs_core::targets::{GaussianMixture, Target, TargetConfig, TargetKind, Temperature};

use crate::config::{self, Experiment, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{emit_csv, fmt_f64, histogram, read_samples_csv, samples_table, write_json, Table};

/// Stream ids reserved for randomness outside the chains (chains use `0..n`).
const REFERENCE_STREAM: u64 = u64::MAX;
const PROJECTION_STREAM: u64 = u64::MAX - 1;

pub const DEFAULT_OUT: &str = "sfs-out";

/// What a verb printed and wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

enum Artifact {
    Csv(Table),
    Json(Value),
}

/// Writes every artifact under `dir`; on failure removes what was written.
fn commit(dir: &Path, artifacts: Vec<(String, Artifact)>) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, art) in artifacts {
        let path = dir.join(name);
        let res = match &art {
            Artifact::Csv(t) => emit_csv(t, &path),
            Artifact::Json(v) => write_json(v, &path),
        };
        if let Err(e) = res {
            let _ = fs::remove_file(&path);
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// The run configuration as recorded in artifacts. Output location and worker
/// count do not influence results and are left out so that artifacts are
/// byte-identical across them.
fn recorded_config(cfg: &RunConfig) -> Value {
    let mut c = cfg.clone();
    c.out = None;
    c.threads = None;
    to_json(&c)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact types serialize")
}

fn listing(files: &[PathBuf]) -> String {
    files.iter().map(|p| format!("wrote {}\n", p.display())).collect()
}

/// Empirical W2 as used in reports: the exact 1-d formula when `d = 1`,
/// sliced W2 otherwise.
fn report_w2(a: &[f64], b: &[f64], dim: usize, projections: usize, seed: u64) -> CliResult<(f64, &'static str)> {
    if dim == 1 {
        Ok((metrics::w2_1d(a, b)?, "1d"))
    } else {
        let stream = RngStream::new(seed, PROJECTION_STREAM);
        Ok((metrics::sliced_w2(a, b, dim, projections, &stream)?, "sliced"))
    }
}

/// Mode capture for a mixture target. An explicit radius must satisfy the
/// non-overlap condition; the default `3 σ_max √d` is capped just below half
/// the smallest center separation when the components sit too close.
fn mode_report(gmm: &GaussianMixture, samples: &[f64], radius: Option<f64>) -> CliResult<(ModeReport, bool)> {
    let centers = gmm.means();
    if let Some(r) = radius {
        return Ok((metrics::mode_weights(samples, gmm.dim(), centers, r)?, false));
    }
    let mut r = metrics::default_capture_radius(gmm);
    let min_sep = centers
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            centers[..i]
                .iter()
                .map(move |b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
        })
        .fold(f64::INFINITY, f64::min);
    let capped = r >= 0.5 * min_sep;
    if capped {
        r = 0.45 * min_sep;
    }
    Ok((metrics::mode_weights(samples, gmm.dim(), centers, r)?, capped))
}

fn run_batch(spec: &SamplerSpec, target: &Target, cfg: &RunConfig) -> CliResult<SampleBatch> {
    with_threads(cfg.threads, || run_ensemble(spec, target, cfg.chains, cfg.seed))?.map_err(CliError::from)
}

fn iid_reference(target: &Target, n: usize, seed: u64) -> Option<Vec<f64>> {
    // the regularized potential is no longer the plain mixture
    if target.rho() != 0.0 {
        return None;
    }
    target.mixture().map(|g| g.sample(n, &RngStream::new(seed, REFERENCE_STREAM)))
}

const REFERENCE_NOTE: &str = "the true law is not available empirically; W2 is measured against an \
    equally sized i.i.d. draw from the mixture";

pub fn cmd_sample(cfg: &RunConfig) -> CliResult<Outcome> {
    let target = config::build_target(cfg)?;
    let spec = config::variants(cfg, &target)?.remove(0);
    let batch = run_batch(&spec, &target, cfg)?;
    let d = batch.dim;

    let mut artifacts = vec![("samples.csv".to_string(), Artifact::Csv(samples_table(&batch.samples, d)))];
    for j in 0..d {
        artifacts.push((
            format!("hist_dim_{j}.csv"),
            Artifact::Csv(histogram(&batch.column(j), cfg.histogram_bins)),
        ));
    }
    if matches!(target.kind(), TargetKind::Ring { .. }) {
        let radii: Vec<f64> = batch.rows().map(|r| r[0].hypot(r[1])).collect();
        artifacts.push(("hist_radius.csv".into(), Artifact::Csv(histogram(&radii, cfg.histogram_bins))));
    }

    let mut meta = json!({
        "config": recorded_config(cfg),
        "batch": to_json(&batch.meta),
        "sampler": to_json(&spec),
    });
    if let Some(gmm) = target.mixture() {
        let (report, capped) = mode_report(gmm, &batch.samples, cfg.capture_radius)?;
        meta["modes"] = to_json(&report);
        meta["capture_radius_capped"] = json!(capped);
    }
    if let Some(reference) = iid_reference(&target, batch.len(), cfg.seed) {
        let (w2, method) = report_w2(&batch.samples, &reference, d, cfg.projections, cfg.seed)?;
        meta["w2_to_target"] = json!({ "value": w2, "method": method, "note": REFERENCE_NOTE });
    }
    artifacts.push(("meta.json".into(), Artifact::Json(meta)));

    let files = commit(&out_dir(cfg), artifacts)?;
    Ok(Outcome {
        stdout: listing(&files),
        files,
    })
}

pub fn cmd_convergence(cfg: &RunConfig) -> CliResult<Outcome> {
    let target = config::build_target(cfg)?;
    let sfs = config::convergence_sfs(cfg, &target)?;
    let c = &cfg.convergence;
    let report = with_threads(cfg.threads, || {
        metrics::strong_error_curve(&target, &sfs, &c.h_list, c.ref_level, cfg.chains, cfg.seed)
    })??;

    let mut rates = Table::new(["h", "rmse"]);
    for (h, e) in report.h.iter().zip(&report.rmse) {
        rates.push(vec![fmt_f64(*h), fmt_f64(*e)]);
    }
    let [lo, hi] = c.slope_band;
    let verdict = match (report.exact, report.slope()) {
        (true, _) => Ok(()),
        (false, Some(s)) if (lo..=hi).contains(&s) => Ok(()),
        (false, Some(s)) => Err(format!("fitted slope {s} is outside [{lo}, {hi}]")),
        (false, None) => Err("fewer than three nonzero RMSE values; no slope could be fitted".to_string()),
    };
    let mut doc = to_json(&report);
    doc["slope"] = json!(report.slope());
    doc["slope_band"] = json!(c.slope_band);
    doc["pass"] = json!(verdict.is_ok());
    doc["note"] = json!(
        "strong error of coupled paths against the finest grid replaces the distance to the true law"
    );
    let files = commit(
        &out_dir(cfg),
        vec![
            ("rates.csv".into(), Artifact::Csv(rates)),
            ("report.json".into(), Artifact::Json(doc)),
        ],
    )?;
    verdict.map_err(CliError::Acceptance)?;
    let slope = match report.slope() {
        Some(s) if !report.exact => format!("slope {s}\n"),
        _ => "exact: every RMSE is zero\n".to_string(),
    };
    Ok(Outcome {
        stdout: slope + &listing(&files),
        files,
    })
}

/// Unique, filesystem-safe variant labels.
fn labels(specs: &[SamplerSpec]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    specs
        .iter()
        .map(|s| {
            let base = s.label();
            let k = seen.entry(base.clone()).or_insert(0);
            *k += 1;
            if *k == 1 {
                base
            } else {
                format!("{base}_{k}")
            }
        })
        .collect()
}

pub fn cmd_compare(cfg: &RunConfig) -> CliResult<Outcome> {
    let target = config::build_target(cfg)?;
    let specs = config::variants(cfg, &target)?;
    let names = labels(&specs);

    let mut batches = Vec::new();
    let mut failures = Vec::new();
    for (spec, name) in specs.iter().zip(&names) {
        match run_batch(spec, &target, cfg) {
            Ok(b) => batches.push(b),
            Err(e) => failures.push(e.to_string().replacen("error[", &format!("{name}: ["), 1)),
        }
    }
    if !failures.is_empty() {
        let msg = format!("{} of {} variants failed: {}", failures.len(), specs.len(), failures.join("; "));
        return Err(if failures.iter().any(|f| f.contains("[divergence]")) {
            CliError::Divergence(msg)
        } else {
            CliError::Config(msg)
        });
    }
    let d = target.dim();

    let mut artifacts = Vec::new();
    for (b, name) in batches.iter().zip(&names) {
        artifacts.push((format!("samples_{name}.csv"), Artifact::Csv(samples_table(&b.samples, d))));
    }

    let mut modes = Table::new(["variant", "mode", "weight"]);
    let mut mode_reports = Vec::new();
    let mut capped_any = false;
    if let Some(gmm) = target.mixture() {
        for (b, name) in batches.iter().zip(&names) {
            let (r, capped) = mode_report(gmm, &b.samples, cfg.capture_radius)?;
            capped_any |= capped;
            for (k, w) in r.weights.iter().enumerate() {
                modes.push(vec![name.clone(), k.to_string(), fmt_f64(*w)]);
            }
            modes.push(vec![name.clone(), "unassigned".into(), fmt_f64(r.unassigned)]);
            mode_reports.push(Some(r));
        }
    } else {
        mode_reports.resize(batches.len(), None);
    }
    artifacts.push(("modes.csv".into(), Artifact::Csv(modes)));

    let mut w2 = Table::new(["variant_a", "variant_b", "w2"]);
    let mut method = "1d";
    for i in 0..batches.len() {
        for j in i + 1..batches.len() {
            let (v, m) = report_w2(&batches[i].samples, &batches[j].samples, d, cfg.projections, cfg.seed)?;
            method = m;
            w2.push(vec![names[i].clone(), names[j].clone(), fmt_f64(v)]);
        }
    }
    let reference = iid_reference(&target, cfg.chains, cfg.seed);
    if let Some(r) = &reference {
        for (b, name) in batches.iter().zip(&names) {
            let (v, _) = report_w2(&b.samples, r, d, cfg.projections, cfg.seed)?;
            w2.push(vec![name.clone(), "target".into(), fmt_f64(v)]);
        }
    }
    artifacts.push(("w2.csv".into(), Artifact::Csv(w2)));

    let variants: Vec<Value> = batches
        .iter()
        .zip(&names)
        .zip(specs.iter().zip(&mode_reports))
        .map(|((b, name), (spec, modes))| {
            json!({ "label": name, "sampler": to_json(spec), "batch": to_json(&b.meta), "modes": to_json(modes) })
        })
        .collect();
    let mut summary = json!({
        "config": recorded_config(cfg),
        "target": target.id(),
        "variants": variants,
        "w2_method": method,
        "capture_radius_capped": capped_any,
    });
    if reference.is_some() {
        summary["w2_target_note"] = json!(REFERENCE_NOTE);
    }
    artifacts.push(("summary.json".into(), Artifact::Json(summary)));

    let files = commit(&out_dir(cfg), artifacts)?;
    Ok(Outcome {
        stdout: listing(&files),
        files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W2Method {
    Exact,
    Sliced,
    OneD,
}

impl W2Method {
    pub fn name(self) -> &'static str {
        match self {
            W2Method::Exact => "exact",
            W2Method::Sliced => "sliced",
            W2Method::OneD => "1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2Args {
    pub a: PathBuf,
    pub b: PathBuf,
    /// `None`: 1d for scalar data, exact up to the size limit, sliced beyond.
    pub method: Option<W2Method>,
    pub projections: usize,
    pub seed: u64,
    pub json: bool,
    pub out: Option<PathBuf>,
}

pub fn cmd_w2(args: &W2Args) -> CliResult<Outcome> {
    let (da, a) = read_samples_csv(&args.a)?;
    let (db, b) = read_samples_csv(&args.b)?;
    if da != db {
        return Err(CliError::Config(format!(
            "dimension mismatch: {} has {da} columns, {} has {db}",
            args.a.display(),
            args.b.display()
        )));
    }
    let (na, nb) = (a.len() / da, b.len() / db);
    let method = args.method.unwrap_or(if da == 1 {
        W2Method::OneD
    } else if na == nb && na <= MAX_EXACT_W2 {
        W2Method::Exact
    } else {
        W2Method::Sliced
    });
    let value = match method {
        W2Method::OneD if da != 1 => {
            return Err(CliError::Config(format!("method 1d needs one-dimensional samples, got d = {da}")))
        }
        W2Method::OneD => metrics::w2_1d(&a, &b)?,
        W2Method::Exact => metrics::w2_exact_smalln(&a, &b, da)?,
        W2Method::Sliced => {
            if args.projections == 0 {
                return Err(CliError::Config("--projections must be at least 1".into()));
            }
            metrics::sliced_w2(&a, &b, da, args.projections, &RngStream::new(args.seed, PROJECTION_STREAM))?
        }
    };
    let mut doc = json!({
        "w2": value,
        "method": method.name(),
        "dim": da,
        "n_a": na,
        "n_b": nb,
        "a": args.a.display().to_string(),
        "b": args.b.display().to_string(),
    });
    if method == W2Method::Sliced {
        doc["projections"] = json!(args.projections);
        doc["seed"] = json!(args.seed);
    }
    let mut stdout = if args.json {
        serde_json::to_string(&doc).expect("json value") + "\n"
    } else {
        fmt_f64(value) + "\n"
    };
    let mut files = Vec::new();
    if let Some(dir) = &args.out {
        files = commit(dir, vec![("w2.json".into(), Artifact::Json(doc))])?;
        if !args.json {
            stdout += &listing(&files);
        }
    }
    Ok(Outcome { stdout, files })
}

/// Input document of `drift-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftQuery {
    pub target: TargetConfig,
    #[serde(default = "one")]
    pub beta: f64,
    pub x: Vec<f64>,
    pub t: f64,
    /// `exact`, `stein_mc`, `grad_mc` or `quadrature`.
    pub variant: String,
    #[serde(default)]
    pub pool_size: Option<usize>,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

pub fn drift_check(query: &DriftQuery, default_seed: u64) -> CliResult<Vec<f64>> {
    let target = query
        .target
        .build()
        .map_err(|e| CliError::Config(format!("at `target`: {e}")))?;
    if query.x.len() != target.dim() {
        return Err(CliError::Config(format!(
            "`x` has {} entries, the target has dimension {}",
            query.x.len(),
            target.dim()
        )));
    }
    let beta = Temperature::new(query.beta)?;
    let mut spec = config::parse_drift_name(&query.variant, query.pool_size.unwrap_or(sfs_core::drift::DEFAULT_POOL_SIZE))?;
    match &mut spec {
        DriftSpec::SteinMc { antithetic, .. } | DriftSpec::GradMc { antithetic, .. } => *antithetic = query.antithetic,
        DriftSpec::Quadrature { nodes } => *nodes = query.nodes.unwrap_or(*nodes),
        DriftSpec::GmmExact => {}
    }
    let stream = RngStream::new(query.seed.unwrap_or(default_seed), 0).child(sfs_core::samplers::TAG_POOL);
    let drift = spec.build(&target, beta, &stream)?;
    Ok(drift.eval_vec(&query.x, query.t)?)
}

/// Reads the query from `path` (`-` for stdin) and prints the drift vector.
pub fn cmd_drift_check(path: &Path, default_seed: u64) -> CliResult<Outcome> {
    let text = if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin())?
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
    };
    let mut de = serde_json::Deserializer::from_str(&text);
    let query: DriftQuery = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
    let v = drift_check(&query, default_seed)?;
    Ok(Outcome {
        stdout: serde_json::to_string(&v).expect("finite drift") + "\n",
        files: Vec::new(),
    })
}

pub fn run_experiment(cfg: &RunConfig) -> CliResult<Outcome> {
    match cfg.experiment {
        Some(Experiment::Sample) => cmd_sample(cfg),
        Some(Experiment::Convergence) => cmd_convergence(cfg),
        Some(Experiment::Compare) => cmd_compare(cfg),
        None => Err(CliError::Config("no experiment kind".into())),
    }
}
