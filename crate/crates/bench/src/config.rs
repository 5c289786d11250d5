//! Run configuration: JSON schema, defaults, flag overrides and validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfs_core::drift::{DriftSpec, DEFAULT_POOL_SIZE};
use sfs_core::samplers::{LangevinConfig, MomentumInit, SamplerSpec, SfsConfig, DEFAULT_FRICTION};
use sfs_core::targets::{Target, TargetConfig, Temperature};

use crate::error::{CliError, CliResult};

pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_CHAINS: usize = 2000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_LANGEVIN_HORIZON: f64 = 10.0;
pub const DEFAULT_BINS: usize = 60;
pub const DESK_HIGHDIM: usize = 10;
pub const FULL_HIGHDIM: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sample,
    Convergence,
    Compare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Convergence => "convergence",
            Experiment::Compare => "compare",
        }
    }
}

/// Langevin parameters; unset fields fall back to the run-level values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinChoice {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<MomentumInit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerChoice {
    Sfs {
        /// Defaults to the closed form for mixtures and to the Stein Monte
        /// Carlo drift with the run's pool size otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<DriftSpec>,
        /// Unset: the run's `betas` sweep, or `beta`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Ula(LangevinChoice),
    UldEuler(LangevinChoice),
    Baoab(LangevinChoice),
}

impl SamplerChoice {
    pub fn sfs() -> Self {
        SamplerChoice::Sfs { drift: None, beta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSettings {
    #[serde(default = "default_h_list")]
    pub h_list: Vec<f64>,
    #[serde(default = "default_ref_level")]
    pub ref_level: u32,
    #[serde(default = "default_slope_band")]
    pub slope_band: [f64; 2],
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            h_list: default_h_list(),
            ref_level: default_ref_level(),
            slope_band: default_slope_band(),
        }
    }
}

fn default_h_list() -> Vec<f64> {
    (5..=9).map(|k| (-(k as f64)).exp2()).collect()
}
fn default_ref_level() -> u32 {
    12
}
fn default_slope_band() -> [f64; 2] {
    [0.85, 1.15]
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_pool() -> usize {
    DEFAULT_POOL_SIZE
}
fn default_friction() -> f64 {
    DEFAULT_FRICTION
}
fn default_horizon() -> f64 {
    DEFAULT_LANGEVIN_HORIZON
}
fn default_chains() -> usize {
    DEFAULT_CHAINS
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_projections() -> usize {
    sfs_core::metrics::DEFAULT_PROJECTIONS
}

/// A fully materialized run. SFS always integrates over `[0, 1]`; Langevin
/// baselines run to `langevin_horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub target: TargetConfig,
    #[serde(default)]
    pub samplers: Vec<SamplerChoice>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub betas: Vec<f64>,
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_friction")]
    pub friction: f64,
    #[serde(default = "default_horizon")]
    pub langevin_horizon: f64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Full dimension (30) for the high-dimensional presets instead of 10.
    #[serde(default)]
    pub full: bool,
    #[serde(default)]
    pub convergence: ConvergenceSettings,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_projections")]
    pub projections: usize,
    /// Mode capture radius; defaults to `3 σ_max √d` of the mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_radius: Option<f64>,
}

impl RunConfig {
    /// Defaults around a target.
    pub fn for_target(target: TargetConfig) -> Self {
        serde_json::from_value(serde_json::json!({ "target": target })).expect("defaults are valid")
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub target_preset: Option<String>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub beta: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub steps: Option<usize>,
    pub pool_size: Option<usize>,
    pub drift: Option<String>,
    pub full: bool,
}

/// Reads `path` (if any), applies `overrides` and validates the result for
/// `experiment`.
pub fn load_config(path: Option<&Path>, overrides: &Overrides, experiment: Experiment) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => parse_file(p)?,
        None => match &overrides.target_preset {
            Some(_) => RunConfig::for_target(TargetConfig::Example64),
            None => {
                return Err(CliError::Config(
                    "no target: pass --config <file> or --target <preset>".into(),
                ))
            }
        },
    };
    apply(&mut cfg, overrides)?;
    match cfg.experiment {
        Some(e) if e != experiment => {
            return Err(CliError::Config(format!(
                "config declares experiment `{}` but the `{}` command was run",
                e.name(),
                experiment.name()
            )))
        }
        _ => cfg.experiment = Some(experiment),
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// Parses a config document. A target given as `{"file": "..."}` is read
/// relative to the config's directory.
pub fn parse_file(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_str(&text, base).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_str(text: &str, base: &Path) -> CliResult<RunConfig> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    if let Some(file) = value
        .get("target")
        .and_then(|t| t.as_object())
        .filter(|o| o.len() == 1)
        .and_then(|o| o.get("file"))
        .and_then(|f| f.as_str())
    {
        let p = base.join(file);
        let inner = fs::read_to_string(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        let target: serde_json::Value = serde_json::from_str(&inner)
            .map_err(|e| CliError::Config(format!("target file {}: invalid JSON: {e}", p.display())))?;
        value["target"] = target;
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

fn apply(cfg: &mut RunConfig, o: &Overrides) -> CliResult<()> {
    if o.h.is_some() && o.steps.is_some() {
        return Err(CliError::Config("--h and --steps are mutually exclusive".into()));
    }
    if let Some(name) = &o.target_preset {
        cfg.target = TargetConfig::Preset {
            name: name.clone(),
            dim: None,
        };
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.chains {
        cfg.chains = v;
    }
    if let Some(v) = &o.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = o.threads {
        cfg.threads = Some(v);
    }
    if let Some(v) = o.beta {
        cfg.beta = v;
    }
    if let Some(v) = &o.betas {
        cfg.betas = v.clone();
    }
    if let Some(v) = o.h {
        cfg.h = v;
    }
    if let Some(n) = o.steps {
        if n == 0 {
            return Err(CliError::Config("--steps must be at least 1".into()));
        }
        cfg.h = 1.0 / n as f64;
    }
    if let Some(v) = o.pool_size {
        cfg.pool_size = v;
    }
    if let Some(name) = &o.drift {
        let spec = parse_drift_name(name, cfg.pool_size)?;
        if cfg.samplers.is_empty() {
            cfg.samplers.push(SamplerChoice::sfs());
        }
        for s in &mut cfg.samplers {
            if let SamplerChoice::Sfs { drift, .. } = s {
                *drift = Some(spec);
            }
        }
    }
    cfg.full |= o.full;
    Ok(())
}

pub fn parse_drift_name(name: &str, pool_size: usize) -> CliResult<DriftSpec> {
    Ok(match name {
        "exact" | "gmm_exact" => DriftSpec::GmmExact,
        "stein" | "stein_mc" => DriftSpec::SteinMc {
            pool_size,
            antithetic: false,
        },
        "grad" | "grad_mc" => DriftSpec::GradMc {
            pool_size,
            antithetic: false,
        },
        "quadrature" => DriftSpec::Quadrature {
            nodes: sfs_core::drift::DEFAULT_QUADRATURE_NODES,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown drift `{other}` (expected exact, stein_mc, grad_mc or quadrature)"
            )))
        }
    })
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

/// Checks every numeric range and builds every sampler once, before any
/// computation starts.
pub fn validate(cfg: &RunConfig) -> CliResult<()> {
    positive("beta", cfg.beta)?;
    for b in &cfg.betas {
        positive("betas", *b)?;
    }
    positive("h", cfg.h)?;
    positive("friction", cfg.friction)?;
    positive("langevin_horizon", cfg.langevin_horizon)?;
    if cfg.chains == 0 {
        return Err(CliError::Config("`chains` must be at least 1".into()));
    }
    if cfg.pool_size < 2 {
        return Err(CliError::Config(format!("`pool_size` must be at least 2, got {}", cfg.pool_size)));
    }
    if cfg.histogram_bins == 0 || cfg.projections == 0 {
        return Err(CliError::Config("`histogram_bins` and `projections` must be at least 1".into()));
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(CliError::Config("`threads` must be at least 1".into()));
        }
    }
    if let Some(r) = cfg.capture_radius {
        positive("capture_radius", r)?;
    }
    let target = build_target(cfg)?;
    let variants = variants(cfg, &target)?;
    match cfg.experiment {
        Some(Experiment::Sample) if variants.len() != 1 => Err(CliError::Config(format!(
            "`sample` runs exactly one sampler, the config yields {}",
            variants.len()
        ))),
        Some(Experiment::Compare) if variants.len() < 2 => Err(CliError::Config(
            "`compare` needs at least two samplers or two temperatures".into(),
        )),
        Some(Experiment::Convergence) => {
            let c = &cfg.convergence;
            if c.ref_level > sfs_core::math::brownian::MAX_LEVEL {
                return Err(CliError::Config(format!(
                    "`convergence.ref_level` must be at most {}",
                    sfs_core::math::brownian::MAX_LEVEL
                )));
            }
            if !(c.slope_band[0] < c.slope_band[1]) {
                return Err(CliError::Config("`convergence.slope_band` must be increasing".into()));
            }
            for h in &c.h_list {
                let k = -h.log2();
                if !(k.fract() == 0.0 && k >= 0.0 && k <= c.ref_level as f64) {
                    return Err(CliError::Config(format!(
                        "`convergence.h_list`: {h} is not a dyadic step 2^-k with k ≤ {}",
                        c.ref_level
                    )));
                }
            }
            if c.h_list.is_empty() {
                return Err(CliError::Config("`convergence.h_list` is empty".into()));
            }
            convergence_sfs(cfg, &target).map(|_| ())
        }
        _ => Ok(()),
    }
}

pub fn build_target(cfg: &RunConfig) -> CliResult<Target> {
    let tc = match &cfg.target {
        TargetConfig::Preset { name, dim: None } if name.starts_with("gmm_highdim") => TargetConfig::Preset {
            name: name.clone(),
            dim: Some(if cfg.full { FULL_HIGHDIM } else { DESK_HIGHDIM }),
        },
        other => other.clone(),
    };
    tc.build().map_err(|e| CliError::Config(format!("at `target`: {e}")))
}

fn temperature(v: f64) -> CliResult<Temperature> {
    Temperature::new(v).map_err(CliError::from)
}

/// Closed-form drift for mixtures, the Stein Monte Carlo estimator otherwise.
fn default_drift(cfg: &RunConfig, target: &Target) -> DriftSpec {
    if target.mixture().is_some() {
        DriftSpec::GmmExact
    } else {
        DriftSpec::SteinMc {
            pool_size: cfg.pool_size,
            antithetic: false,
        }
    }
}

fn langevin(cfg: &RunConfig, c: &LangevinChoice, target: &Target) -> CliResult<LangevinConfig> {
    let lc = LangevinConfig {
        step: c.h.unwrap_or(cfg.h),
        horizon: c.horizon.unwrap_or(cfg.langevin_horizon),
        friction: c.friction.unwrap_or(cfg.friction),
        x0: c.x0.clone(),
        momentum: c.momentum.unwrap_or_default(),
        record_path: false,
    };
    lc.validate()?;
    if let Some(x0) = &lc.x0 {
        if x0.len() != target.dim() {
            return Err(CliError::Config(format!(
                "`x0` has {} entries, the target has dimension {}",
                x0.len(),
                target.dim()
            )));
        }
    }
    if !target.has_gradient() {
        return Err(CliError::Config(format!(
            "Langevin samplers need ∇V, which target `{}` does not provide",
            target.id()
        )));
    }
    Ok(lc)
}

/// Expands the sampler list (default: one SFS for `sample`, SFS against the
/// two Langevin Euler schemes for `compare`) into concrete specs, one SFS
/// variant per temperature of the sweep.
pub fn variants(cfg: &RunConfig, target: &Target) -> CliResult<Vec<SamplerSpec>> {
    let choices = if cfg.samplers.is_empty() {
        match cfg.experiment {
            Some(Experiment::Compare) if cfg.betas.len() < 2 => vec![
                SamplerChoice::sfs(),
                SamplerChoice::Ula(LangevinChoice::default()),
                SamplerChoice::UldEuler(LangevinChoice::default()),
            ],
            _ => vec![SamplerChoice::sfs()],
        }
    } else {
        cfg.samplers.clone()
    };
    let mut out = Vec::new();
    for c in &choices {
        match c {
            SamplerChoice::Sfs { drift, beta } => {
                let betas = match (beta, cfg.betas.is_empty()) {
                    (Some(b), _) => vec![*b],
                    (None, false) => cfg.betas.clone(),
                    (None, true) => vec![cfg.beta],
                };
                for b in betas {
                    let sfs = SfsConfig::from_step(cfg.h, temperature(b)?, drift.unwrap_or_else(|| default_drift(cfg, target)))
                        .map_err(|e| CliError::Config(format!("SFS needs 1/h to be a whole number: {e}")))?;
                    // building once surfaces unsupported drift/target pairs early
                    sfs.drift.build(target, sfs.beta, &sfs_core::math::RngStream::new(0, 0))?;
                    out.push(SamplerSpec::Sfs(sfs));
                }
            }
            SamplerChoice::Ula(l) => out.push(SamplerSpec::Ula(langevin(cfg, l, target)?)),
            SamplerChoice::UldEuler(l) => out.push(SamplerSpec::UldEuler(langevin(cfg, l, target)?)),
            SamplerChoice::Baoab(l) => out.push(SamplerSpec::Baoab(langevin(cfg, l, target)?)),
        }
    }
    Ok(out)
}

/// The SFS configuration driving a convergence study.
pub fn convergence_sfs(cfg: &RunConfig, target: &Target) -> CliResult<SfsConfig> {
    let (drift, beta) = match cfg.samplers.iter().find(|s| matches!(s, SamplerChoice::Sfs { .. })) {
        Some(SamplerChoice::Sfs { drift, beta }) => (*drift, beta.unwrap_or(cfg.beta)),
        _ => (None, cfg.beta),
    };
    let drift = drift.unwrap_or_else(|| default_drift(cfg, target));
    let sfs = SfsConfig::new(1, temperature(beta)?, drift)?;
    sfs.drift.build(target, sfs.beta, &sfs_core::math::RngStream::new(0, 0))?;
    Ok(sfs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"target": {"kind": "gaussian_mixture", "weights": [0.5, 0.5],
        "means": [[-1.0], [1.0]], "covs": [[[0.8]], [[0.8]]]}}"#;

    #[test]
    fn defaults_are_materialized() {
        let cfg = parse_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.pool_size, 200);
        assert_eq!(cfg.h, 1e-3);
        assert_eq!(cfg.chains, 2000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.friction, 1.0);
        assert_eq!(cfg.convergence.h_list, vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0]);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, MINIMAL).unwrap();
        let o = Overrides {
            beta: Some(2.0),
            ..Default::default()
        };
        let cfg = load_config(Some(&p), &o, Experiment::Sample).unwrap();
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.experiment, Some(Experiment::Sample));
    }

    #[test]
    fn missing_field_is_named() {
        let doc = r#"{"target": {"kind": "gaussian_mixture", "means": [[0.0]], "covs": [[[1.0]]]}}"#;
        let err = parse_str(doc, Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("weights") && msg.contains("target"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        let doc = r#"{"target": {"kind": "ring"}, "chains": "many"}"#;
        assert!(parse_str(doc, Path::new(".")).unwrap_err().to_string().contains("chains"));
    }

    #[test]
    fn conflicting_and_invalid_values() {
        let o = Overrides {
            target_preset: Some("ring".into()),
            h: Some(0.01),
            steps: Some(100),
            ..Default::default()
        };
        assert!(load_config(None, &o, Experiment::Sample).is_err());
        let o = Overrides {
            target_preset: Some("ring".into()),
            h: Some(0.3),
            ..Default::default()
        };
        assert!(load_config(None, &o, Experiment::Sample).is_err());
        let o = Overrides {
            target_preset: Some("gmm1d_sep6".into()),
            beta: Some(-1.0),
            ..Default::default()
        };
        assert!(load_config(None, &o, Experiment::Sample).is_err());
        assert!(load_config(None, &Overrides::default(), Experiment::Sample).is_err());
        let o = Overrides {
            target_preset: Some("gmm1d_sep6".into()),
            ..Default::default()
        };
        // a lone SFS cannot be compared with itself
        let mut cfg = load_config(None, &o, Experiment::Sample).unwrap();
        cfg.experiment = Some(Experiment::Compare);
        cfg.samplers = vec![SamplerChoice::sfs()];
        assert!(validate(&cfg).is_err());
        cfg.betas = vec![1.0, 2.0];
        assert!(validate(&cfg).is_ok());
    }

    #[test]
    fn experiment_must_match_command() {
        let doc = format!("{{\"experiment\": \"compare\", {}", &MINIMAL.trim_start()[1..]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, doc).unwrap();
        assert!(load_config(Some(&p), &Overrides::default(), Experiment::Sample).is_err());
        assert!(load_config(Some(&p), &Overrides::default(), Experiment::Compare).is_ok());
    }

    #[test]
    fn target_file_reference() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("ring.json"), r#"{"kind": "ring", "r0": 3.0}"#).unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, r#"{"target": {"file": "ring.json"}, "chains": 5}"#).unwrap();
        let cfg = load_config(Some(&p), &Overrides::default(), Experiment::Sample).unwrap();
        assert_eq!(cfg.target, TargetConfig::Ring { r0: 3.0, sigma: 0.2 });
        fs::write(&p, r#"{"target": {"file": "missing.json"}}"#).unwrap();
        assert_eq!(load_config(Some(&p), &Overrides::default(), Experiment::Sample).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn round_trip() {
        let doc = r#"{"target": {"kind": "preset", "name": "gmm2d_k8"}, "betas": [1.0, 2.0, 5.0],
            "samplers": [{"sampler": "sfs", "drift": {"variant": "stein_mc", "pool_size": 64}},
                         {"sampler": "baoab", "friction": 2.0, "momentum": "stationary"}],
            "h": 0.0078125, "capture_radius": 1.5, "convergence": {"ref_level": 10}}"#;
        let cfg = parse_str(doc, Path::new(".")).unwrap();
        let again = parse_str(&serde_json::to_string(&cfg).unwrap(), Path::new(".")).unwrap();
        assert_eq!(cfg, again);
        let target = build_target(&cfg).unwrap();
        let mut c = cfg.clone();
        c.experiment = Some(Experiment::Compare);
        assert_eq!(variants(&c, &target).unwrap().len(), 4);
    }

    #[test]
    fn full_flag_restores_full_dimension() {
        let mut cfg = RunConfig::for_target(TargetConfig::Preset {
            name: "gmm_highdim".into(),
            dim: None,
        });
        assert_eq!(build_target(&cfg).unwrap().dim(), 10);
        cfg.full = true;
        assert_eq!(build_target(&cfg).unwrap().dim(), 30);
    }
}
