//! TOML run configuration with exhaustive validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use srd_core::checker::{ConditionId, EnvelopeId};
use srd_core::ensemble::{q0, EnsembleConfig, InitialData, Setup};
use srd_core::model::{build_model, ModelParams, ReactionModel};
use srd_core::noise::{build_from_spec, DiffusionTensor, NoiseSpec};
use srd_core::sampling::StateBox;
use srd_core::solver::SolverConfig;
use srd_core::torus::Grid;

fn default_output() -> PathBuf {
    PathBuf::from("srd-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Write snapshot binaries from `run`.
    #[serde(default)]
    pub snapshots: bool,
    pub grid: GridConfig,
    pub model: ModelParams,
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depcheck: Option<DepcheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gronwall: Option<GronwallConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    /// Parabolicity constants, one per component or a single shared value.
    pub nu: Vec<f64>,
    /// Full `d x d` matrices per component; `nu_i I` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Vec<f64>>>>,
}

fn default_zeta() -> f64 {
    2.0
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub condition: ConditionId,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Half-width of `[-w, w]^ell`, or width of `[0, w]^ell` when `nonnegative`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub nonnegative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights_alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi2: Option<f64>,
}

impl CheckConfig {
    pub fn state_box(&self, ell: usize) -> srd_core::Result<StateBox> {
        match (&self.lo, &self.hi) {
            (Some(lo), Some(hi)) => StateBox::new(lo.clone(), hi.clone()),
            _ => {
                let w = self.half_width.unwrap_or(50.0);
                if self.nonnegative {
                    StateBox::nonnegative(ell, w)
                } else {
                    StateBox::symmetric(ell, w)
                }
            }
        }
    }
}

fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepcheckConfig {
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// Distance norm exponent; `q0` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
}

fn default_gronwall_paths() -> usize {
    10_000
}

fn default_gronwall_dt() -> f64 {
    1e-3
}

fn default_slack() -> f64 {
    srd_core::gronwall::DEFAULT_SLACK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallConfig {
    #[serde(default = "default_gronwall_paths")]
    pub n_paths: usize,
    #[serde(default = "default_gronwall_dt")]
    pub dt: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

impl Default for GronwallConfig {
    fn default() -> Self {
        Self {
            n_paths: default_gronwall_paths(),
            dt: default_gronwall_dt(),
            slack: default_slack(),
        }
    }
}

fn default_functional() -> String {
    "sup_lzeta".into()
}

fn default_levels() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    #[serde(default = "default_functional")]
    pub functional: String,
    /// Explicit levels; a geometric grid of `levels` values otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            functional: default_functional(),
            gammas: Vec::new(),
            levels: default_levels(),
        }
    }
}

/// One validation problem with its source location.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub location: String,
    pub message: String,
}

/// Every problem found in a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {}: {}", issue.location, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const TOP_KEYS: &[&str] = &[
    "seed", "output", "snapshots", "grid", "model", "diffusion", "noise", "solver", "initial", "ensemble", "check",
    "depcheck", "gronwall", "tail",
];

fn section_keys(section: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    Some(match section {
        "grid" => (&["dim", "n"], &["dim", "n"]),
        "diffusion" => (&["nu", "matrix"], &["nu"]),
        "noise" => (
            &["n_modes", "alpha", "amplitude", "divergence_free", "per_component_scale", "calibrate_nu0"],
            &[],
        ),
        "solver" => (
            &[
                "dt",
                "t_end",
                "scheme",
                "blowup_threshold",
                "dealias",
                "record_every",
                "zeta",
                "ito_correction",
                "keep_snapshots",
            ],
            &["dt", "t_end"],
        ),
        "ensemble" => (&["n_paths", "base_seed", "zeta0", "tol_pos"], &["n_paths"]),
        "check" => (
            &[
                "condition",
                "zeta",
                "half_width",
                "nonnegative",
                "lo",
                "hi",
                "samples",
                "epsilon",
                "weights_alpha",
                "envelope",
                "psi2",
            ],
            &["condition"],
        ),
        "depcheck" => (&["deltas", "norm_q", "n_paths"], &[]),
        "gronwall" => (&["n_paths", "dt", "slack"], &[]),
        "tail" => (&["functional", "gammas", "levels"], &[]),
        _ => return None,
    })
}

fn model_keys(name: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    Some(match name {
        "allen_cahn" => (&["theta"], &[]),
        "lotka_volterra" => (&["lambda", "chi", "sigma", "fraction"], &["lambda", "chi"]),
        "symbiotic_lv" => (&["lambda", "chi", "sigma"], &["lambda", "chi"]),
        "brusselator" => (
            &["alpha", "beta", "sigma", "fraction", "envelope", "envelope_epsilon", "positive"],
            &["alpha", "beta"],
        ),
        "gray_scott" => (&["gamma", "eta", "sigma"], &["gamma", "eta"]),
        "sir" => (&["r", "sigma"], &["r"]),
        "coagulation" => (&["ell", "sigma"], &["ell"]),
        "polynomial" => (&["f", "theta", "g_power", "h"], &["f"]),
        _ => return None,
    })
}

fn initial_keys(kind: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    Some(match kind {
        "constant" => (&["value"], &["value"]),
        "sine" => (&["amplitude", "offset", "mode"], &["amplitude"]),
        _ => return None,
    })
}

/// Maps `section.key` to `file:line` by scanning the source text.
struct Locator<'a> {
    origin: String,
    text: &'a str,
}

impl Locator<'_> {
    fn find(&self, section: Option<&str>, key: Option<&str>) -> String {
        let mut current: Option<String> = None;
        let mut section_line = None;
        for (no, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
                if section == Some(name.as_str()) && section_line.is_none() {
                    section_line = Some(no + 1);
                }
                current = Some(name);
                continue;
            }
            if let Some(k) = key {
                let same_section = match section {
                    Some(s) => current.as_deref() == Some(s),
                    None => current.is_none(),
                };
                let matches_key = line
                    .strip_prefix(k)
                    .is_some_and(|rest| rest.trim_start().starts_with('='));
                if same_section && matches_key {
                    return format!("{}:{}", self.origin, no + 1);
                }
            }
        }
        match section_line {
            Some(l) => format!("{}:{}", self.origin, l),
            None => self.origin.clone(),
        }
    }
}

struct Issues<'a> {
    loc: Locator<'a>,
    list: Vec<ConfigIssue>,
}

impl Issues<'_> {
    fn push(&mut self, section: Option<&str>, key: Option<&str>, message: impl Into<String>) {
        let location = self.loc.find(section, key);
        let label = match (section, key) {
            (Some(s), Some(k)) => format!("[{s}] {k}: "),
            (Some(s), None) => format!("[{s}]: "),
            (None, Some(k)) => format!("{k}: "),
            (None, None) => String::new(),
        };
        self.list.push(ConfigIssue {
            location,
            message: format!("{label}{}", message.into()),
        });
    }
}

fn check_table(issues: &mut Issues, section: &str, table: &toml::Table, allowed: &[&str], required: &[&str], tag: Option<&str>) {
    for key in table.keys() {
        if Some(key.as_str()) != tag && !allowed.contains(&key.as_str()) {
            issues.push(Some(section), Some(key), "unknown key");
        }
    }
    for key in required {
        if !table.contains_key(*key) {
            issues.push(Some(section), None, format!("missing required field `{key}`"));
        }
    }
}

/// Structural pass: unknown keys and missing fields in every section.
fn scan_keys(issues: &mut Issues, root: &toml::Table) {
    for key in root.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            issues.push(None, Some(key), "unknown key");
        }
    }
    for required in ["grid", "model", "diffusion"] {
        if !root.contains_key(required) {
            issues.push(None, None, format!("missing required section [{required}]"));
        }
    }
    for (name, value) in root {
        let Some(table) = value.as_table() else {
            if section_keys(name).is_some() || name == "model" || name == "initial" {
                issues.push(None, Some(name), "expected a table");
            }
            continue;
        };
        if let Some((allowed, required)) = section_keys(name) {
            check_table(issues, name, table, allowed, required, None);
        } else if name == "model" {
            match table.get("name").and_then(|v| v.as_str()) {
                Some(model) => match model_keys(model) {
                    Some((allowed, required)) => check_table(issues, name, table, allowed, required, Some("name")),
                    None => issues.push(Some("model"), Some("name"), format!("unknown model '{model}'")),
                },
                None => issues.push(Some("model"), None, "missing required field `name`"),
            }
        } else if name == "initial" {
            match table.get("kind").and_then(|v| v.as_str()) {
                Some(kind) => match initial_keys(kind) {
                    Some((allowed, required)) => check_table(issues, name, table, allowed, required, Some("kind")),
                    None => issues.push(Some("initial"), Some("kind"), format!("unknown initial data '{kind}'")),
                },
                None => issues.push(Some("initial"), None, "missing required field `kind`"),
            }
        }
    }
}

/// Typed pass: each section is decoded on its own so that every section reports.
fn decode_sections(issues: &mut Issues, root: &toml::Table) {
    fn try_section<T: serde::de::DeserializeOwned>(issues: &mut Issues, root: &toml::Table, name: &str) {
        if let Some(v) = root.get(name) {
            if let Err(e) = v.clone().try_into::<T>() {
                issues.push(Some(name), None, e.message().to_string());
            }
        }
    }
    try_section::<GridConfig>(issues, root, "grid");
    try_section::<ModelParams>(issues, root, "model");
    try_section::<DiffusionConfig>(issues, root, "diffusion");
    try_section::<NoiseSpec>(issues, root, "noise");
    try_section::<SolverConfig>(issues, root, "solver");
    try_section::<InitialData>(issues, root, "initial");
    try_section::<EnsembleConfig>(issues, root, "ensemble");
    try_section::<CheckConfig>(issues, root, "check");
    try_section::<DepcheckConfig>(issues, root, "depcheck");
    try_section::<GronwallConfig>(issues, root, "gronwall");
    try_section::<TailConfig>(issues, root, "tail");
    for key in ["seed", "output", "snapshots"] {
        if let Some(v) = root.get(key) {
            let ok = match key {
                "seed" => v.as_integer().is_some_and(|i| i >= 0),
                "output" => v.is_str(),
                _ => v.is_bool(),
            };
            if !ok {
                issues.push(None, Some(key), "invalid value");
            }
        }
    }
}

/// Semantic pass: cross-block consistency of `ell`, `d` and `h`.
fn cross_check(issues: &mut Issues, cfg: &RunConfig) {
    let g = cfg.grid;
    if !(1..=3).contains(&g.dim) {
        issues.push(Some("grid"), Some("dim"), format!("dimension must be 1, 2 or 3 (got {})", g.dim));
    }
    if g.n < 4 || !g.n.is_power_of_two() {
        issues.push(Some("grid"), Some("n"), format!("points per axis must be a power of two >= 4 (got {})", g.n));
    }
    let ell = cfg.model.ell();
    match build_model(cfg.model.clone()) {
        Ok(model) => {
            if let ModelParams::Polynomial { f, h: Some(h), .. } = &cfg.model {
                let degree = f.iter().rposition(|c| *c != 0.0).unwrap_or(0) as f64;
                if *h < degree {
                    issues.push(
                        Some("model"),
                        Some("h"),
                        format!("growth exponent {h} is below the drift degree {degree}"),
                    );
                }
            }
            if let Some(ens) = &cfg.ensemble {
                let q = q0(g.dim.clamp(1, 3), model.growth_h());
                if let Some(z0) = ens.zeta0 {
                    if z0 < q {
                        issues.push(Some("ensemble"), Some("zeta0"), format!("zeta0 = {z0} is below q0 = {q}"));
                    }
                }
                if ens.n_paths < 2 {
                    issues.push(Some("ensemble"), Some("n_paths"), "at least two paths are required");
                }
            }
        }
        Err(e) => issues.push(Some("model"), None, e.to_string()),
    }
    let nu = &cfg.diffusion.nu;
    if nu.len() != 1 && nu.len() != ell {
        issues.push(
            Some("diffusion"),
            Some("nu"),
            format!("expected 1 or {ell} values for {ell} components (got {})", nu.len()),
        );
    }
    if nu.iter().any(|v| !(*v > 0.0)) {
        issues.push(Some("diffusion"), Some("nu"), "parabolicity constants must be positive");
    }
    if let Some(m) = &cfg.diffusion.matrix {
        if m.len() != ell || m.iter().any(|a| a.len() != g.dim || a.iter().any(|r| r.len() != g.dim)) {
            issues.push(
                Some("diffusion"),
                Some("matrix"),
                format!("expected {ell} matrices of size {0} x {0}", g.dim),
            );
        }
    }
    let scales = &cfg.noise.per_component_scale;
    if !scales.is_empty() && scales.len() != ell {
        issues.push(
            Some("noise"),
            Some("per_component_scale"),
            format!("expected {ell} values (got {})", scales.len()),
        );
    }
    if let Some(solver) = &cfg.solver {
        if let Err(e) = solver.validate() {
            issues.push(Some("solver"), None, e.to_string());
        }
    }
    if let (Some(init), Ok(grid)) = (&cfg.initial, Grid::new(g.dim, g.n)) {
        if let Err(e) = init.build(grid, ell) {
            issues.push(Some("initial"), None, e.to_string());
        }
    }
    if let Some(check) = &cfg.check {
        if let Err(e) = check.state_box(ell) {
            issues.push(Some("check"), None, e.to_string());
        }
        if check.condition == ConditionId::GrowthEnvelope && check.envelope.is_none() {
            issues.push(Some("check"), Some("envelope"), "growth_envelope needs an envelope");
        }
        if check.condition == ConditionId::Random && check.psi2.is_none() {
            issues.push(Some("check"), Some("psi2"), "random coercivity needs psi2");
        }
    }
    if let Some(dep) = &cfg.depcheck {
        if dep.deltas.is_empty() {
            issues.push(Some("depcheck"), Some("deltas"), "at least one delta is required");
        }
    }
}

/// Parses and validates configuration text; `origin` labels locations.
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, ConfigErrors> {
    let mut issues = Issues {
        loc: Locator {
            origin: origin.to_string(),
            text,
        },
        list: Vec::new(),
    };
    let root: toml::Table = match toml::from_str(text) {
        Ok(t) => t,
        Err(e) => {
            let location = match e.span() {
                Some(span) => format!("{origin}:{}", text[..span.start].lines().count().max(1)),
                None => origin.to_string(),
            };
            return Err(ConfigErrors(vec![ConfigIssue {
                location,
                message: e.message().to_string(),
            }]));
        }
    };
    scan_keys(&mut issues, &root);
    decode_sections(&mut issues, &root);
    if !issues.list.is_empty() {
        return Err(ConfigErrors(issues.list));
    }
    let cfg: RunConfig = match toml::Value::Table(root).try_into() {
        Ok(c) => c,
        Err(e) => {
            issues.push(None, None, e.message().to_string());
            return Err(ConfigErrors(issues.list));
        }
    };
    cross_check(&mut issues, &cfg);
    if issues.list.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(issues.list))
    }
}

pub fn parse_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(parse_config_str(&text, &path.display().to_string())?)
}

impl RunConfig {
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = self.to_toml().unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> srd_core::Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n)
    }

    pub fn diffusion(&self) -> srd_core::Result<DiffusionTensor> {
        let ell = self.model.ell();
        let nu: Vec<f64> = (0..ell)
            .map(|i| if self.diffusion.nu.len() == 1 { self.diffusion.nu[0] } else { self.diffusion.nu[i] })
            .collect();
        match &self.diffusion.matrix {
            None => DiffusionTensor::isotropic(self.grid.dim, &nu),
            Some(ms) => {
                let a = ms
                    .iter()
                    .map(|m| {
                        let mut out = [[0.0; 3]; 3];
                        for (j, row) in m.iter().enumerate() {
                            for (k, v) in row.iter().enumerate() {
                                out[j][k] = *v;
                            }
                        }
                        out
                    })
                    .collect();
                DiffusionTensor::new(self.grid.dim, a, nu)
            }
        }
    }

    pub fn setup(&self) -> anyhow::Result<Setup> {
        let grid = self.grid()?;
        let model = build_model(self.model.clone())?;
        let noise = build_from_spec(grid, &self.noise, model.ell())?;
        let a = self.diffusion()?;
        let init = self
            .initial
            .clone()
            .ok_or_else(|| anyhow::anyhow!("the [initial] section is required for simulations"))?;
        let u0 = init.build(grid, model.ell())?;
        Ok(Setup::new(model, noise, a, u0)?)
    }

    pub fn solver(&self) -> anyhow::Result<SolverConfig> {
        self.solver
            .clone()
            .ok_or_else(|| anyhow::anyhow!("the [solver] section is required for simulations"))
    }

    pub fn ensemble(&self) -> anyhow::Result<EnsembleConfig> {
        let mut e = self
            .ensemble
            .clone()
            .ok_or_else(|| anyhow::anyhow!("the [ensemble] section is required"))?;
        if self.ensemble.as_ref().is_some_and(|e| e.base_seed == 0) {
            e.base_seed = self.seed;
        }
        Ok(e)
    }
}
