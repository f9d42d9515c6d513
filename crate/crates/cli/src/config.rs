//! Experiment configuration: schema, loading and validation.
//!
//! A config has five tables: `action`, `lattice`, `sampler`, `analysis` and
//! `output`. Unknown keys are rejected everywhere.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};

use pathgeom::lattice::FKind;
use pathgeom::sampler::chain_seed;
use pathgeom::{ActionSpec, LatticeConfig, Potential, SamplerParams};
use serde::{Deserialize, Serialize};

/// Smallest positive γ run without `--allow-small-gamma`.
pub const SMALL_GAMMA: f64 = 0.3;
/// Cutoff applied to bounded f-modified series that have no cutoff and no box.
pub const DEFAULT_CUTOFF: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub action: ActionBlock,
    pub lattice: LatticeBlock,
    pub sampler: SamplerBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBlock {
    #[serde(default)]
    pub potential: PotentialName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    pub series: Vec<SeriesSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialName {
    #[default]
    Free,
    Harmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Naive,
    SubDiffusive,
    FModified,
    /// Independent uniform positions in a box; histogram runs only.
    UniformReference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FName {
    Identity,
    Gamma,
    Tanh,
    Sin,
}

/// One curve of an experiment. Lattice keys given here override the `lattice` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_width: Option<f64>,
}

impl SeriesSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            label: None,
            g: None,
            xi: None,
            alpha: None,
            f: None,
            gamma: None,
            width: None,
            n_sites: None,
            cutoff: None,
            box_width: None,
        }
    }

    pub fn naive() -> Self {
        Self::new(Variant::Naive)
    }

    pub fn sub_diffusive(xi: f64, alpha: f64) -> Self {
        Self {
            xi: Some(xi),
            alpha: Some(alpha),
            ..Self::new(Variant::SubDiffusive)
        }
    }

    pub fn gamma(gamma: f64) -> Self {
        Self {
            f: Some(FName::Gamma),
            gamma: Some(gamma),
            ..Self::new(Variant::FModified)
        }
    }

    pub fn f(f: FName) -> Self {
        Self {
            f: Some(f),
            ..Self::new(Variant::FModified)
        }
    }

    pub fn uniform(width: f64) -> Self {
        Self {
            width: Some(width),
            ..Self::new(Variant::UniformReference)
        }
    }

    pub fn with_sites(mut self, n: &[usize]) -> Self {
        self.n_sites = Some(n.to_vec());
        self
    }

    pub fn with_cutoff(mut self, l: f64) -> Self {
        self.cutoff = Some(l);
        self
    }

    pub fn with_box(mut self, w: f64) -> Self {
        self.box_width = Some(w);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub n_sites: Vec<usize>,
    #[serde(default = "one")]
    pub total_time: f64,
    #[serde(default)]
    pub left_endpoint: f64,
    #[serde(default)]
    pub right_endpoint: f64,
    /// Leaves the last site unpinned; `right_endpoint` is then ignored.
    #[serde(default)]
    pub free_end: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_width: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    #[serde(default = "two")]
    pub chains: usize,
    /// Defaults to 0.5 for bounded f and 0 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_width: Option<f64>,
    #[serde(default = "half")]
    pub target_acceptance: f64,
}

fn two() -> usize {
    2
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Power-law fit of `⟨L⟩` against N for every series.
    #[serde(default = "yes")]
    pub fit: bool,
    /// Jaggedness histograms for every (series, N) cell.
    #[serde(default)]
    pub histogram: bool,
    /// Keep the last measured path of the first chain of every cell.
    #[serde(default)]
    pub sample_paths: bool,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            fit: true,
            histogram: false,
            sample_paths: false,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// log-log `⟨L⟩` against N, one line per series.
    LengthScaling,
    /// Fitted `d_f` against α, grouped by ξ, with the theory curves.
    DfVsAlpha,
    /// Fitted β against γ.
    BetaVsGamma,
    Jaggedness,
    Paths,
}

impl Figure {
    pub fn file_stem(&self) -> &'static str {
        match self {
            Figure::LengthScaling => "length_scaling",
            Figure::DfVsAlpha => "df_vs_alpha",
            Figure::BetaVsGamma => "beta_vs_gamma",
            Figure::Jaggedness => "jaggedness",
            Figure::Paths => "paths",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub figures: Vec<Figure>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            experiment: default_experiment(),
            directory: default_directory(),
            formats: default_formats(),
            figures: Vec::new(),
        }
    }
}

fn default_experiment() -> String {
    "custom".into()
}

fn default_directory() -> PathBuf {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Svg]
}

/// A validation failure tied to a config field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(field: impl Into<String>, message: impl fmt::Display) -> Result<T, ConfigError> {
    Err(ConfigError {
        field: field.into(),
        message: message.to_string(),
    })
}

/// What a series samples.
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesKind {
    Chain(ActionSpec),
    Uniform { width: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedSeries {
    pub label: String,
    pub spec: SeriesSpec,
    pub kind: SeriesKind,
    pub n_sites: Vec<usize>,
    /// Lattice at the first N; other N keep the total time.
    pub lattice: LatticeConfig,
    pub params: SamplerParams,
    pub chains: usize,
}

impl ResolvedSeries {
    pub fn lattice_at(&self, n: usize) -> LatticeConfig {
        LatticeConfig {
            n_sites: n,
            spacing: self.lattice.total_time() / n as f64,
            ..self.lattice.clone()
        }
    }
}

/// A validated experiment. `config` has every default made explicit, so writing it
/// back out reproduces the run.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub series: Vec<ResolvedSeries>,
    pub figures: Vec<Figure>,
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(field, format!("must be positive and finite, got {v}"))
    }
}

fn require(field: String, v: Option<f64>, variant: &str) -> Result<f64, ConfigError> {
    match v {
        Some(x) => Ok(x),
        None => err(field, format!("required for variant {variant}")),
    }
}

fn series_label(s: &SeriesSpec) -> String {
    if let Some(l) = &s.label {
        return l.clone();
    }
    match s.variant {
        Variant::Naive => "naive".into(),
        Variant::SubDiffusive => format!("xi={} alpha={}", s.xi.unwrap_or(0.0), s.alpha.unwrap_or(0.0)),
        Variant::FModified => match s.f {
            Some(FName::Gamma) => format!("gamma={}", s.gamma.unwrap_or(0.0)),
            Some(FName::Tanh) => "tanh".into(),
            Some(FName::Sin) => "sin".into(),
            Some(FName::Identity) => "identity".into(),
            None => "f".into(),
        },
        Variant::UniformReference => "uniform".into(),
    }
}

fn check_unused(field: &str, s: &SeriesSpec) -> Result<(), ConfigError> {
    let variant = match s.variant {
        Variant::Naive => "naive",
        Variant::SubDiffusive => "sub-diffusive",
        Variant::FModified => "f-modified",
        Variant::UniformReference => "uniform-reference",
    };
    let used: &[&str] = match s.variant {
        Variant::Naive => &[],
        Variant::SubDiffusive => &["g", "xi", "alpha"],
        Variant::FModified => &["f", "gamma"],
        Variant::UniformReference => &["width"],
    };
    let given = [
        ("g", s.g.is_some()),
        ("xi", s.xi.is_some()),
        ("alpha", s.alpha.is_some()),
        ("f", s.f.is_some()),
        ("gamma", s.gamma.is_some()),
        ("width", s.width.is_some()),
    ];
    for (name, present) in given {
        if present && !used.contains(&name) {
            return err(
                format!("{field}.{name}"),
                format!("does not apply to variant {variant}"),
            );
        }
    }
    Ok(())
}

fn potential(block: &ActionBlock) -> Result<Potential, ConfigError> {
    match (block.potential, block.omega) {
        (PotentialName::Free, None) => Ok(Potential::Free),
        (PotentialName::Free, Some(_)) => err("action.omega", "only applies to the harmonic potential"),
        (PotentialName::Harmonic, Some(w)) => Ok(Potential::Harmonic {
            omega: positive("action.omega", w)?,
        }),
        (PotentialName::Harmonic, None) => err("action.omega", "required for the harmonic potential"),
    }
}

fn resolve_kind(
    field: &str,
    s: &SeriesSpec,
    pot: Potential,
    allow_small_gamma: bool,
) -> Result<SeriesKind, ConfigError> {
    check_unused(field, s)?;
    let spec = match s.variant {
        Variant::Naive => ActionSpec::naive(),
        Variant::SubDiffusive => {
            let g = s.g.unwrap_or(1.0);
            let xi = require(format!("{field}.xi"), s.xi, "sub-diffusive")?;
            let alpha = require(format!("{field}.alpha"), s.alpha, "sub-diffusive")?;
            ActionSpec::sub_diffusive(g, xi, alpha).or_else(|e| err(field, e))?
        }
        Variant::FModified => {
            let kind = match s.f {
                None => return err(format!("{field}.f"), "required for variant f-modified"),
                Some(FName::Identity) | Some(FName::Tanh) | Some(FName::Sin) if s.gamma.is_some() => {
                    return err(format!("{field}.gamma"), "only applies to f = \"gamma\"");
                }
                Some(FName::Identity) => FKind::Identity,
                Some(FName::Tanh) => FKind::Tanh,
                Some(FName::Sin) => FKind::Sin,
                Some(FName::Gamma) => {
                    let gamma = require(format!("{field}.gamma"), s.gamma, "f-modified with f = \"gamma\"")?;
                    if gamma > 0.0 && gamma < SMALL_GAMMA && !allow_small_gamma {
                        return err(
                            format!("{field}.gamma"),
                            format!(
                                "gamma = {gamma} < {SMALL_GAMMA} needs very large lattices; pass --allow-small-gamma to run it"
                            ),
                        );
                    }
                    FKind::Gamma(gamma)
                }
            };
            ActionSpec::f_modified(kind).or_else(|e| err(format!("{field}.gamma"), e))?
        }
        Variant::UniformReference => {
            let w = require(format!("{field}.width"), s.width, "uniform-reference")?;
            return Ok(SeriesKind::Uniform {
                width: positive(&format!("{field}.width"), w)?,
            });
        }
    };
    Ok(SeriesKind::Chain(spec.with_potential(pot)))
}

fn check_sites(field: &str, n: &[usize]) -> Result<(), ConfigError> {
    if n.is_empty() {
        return err(field, "needs at least one site count");
    }
    if n.iter().any(|&k| k < 2) {
        return err(field, "site counts must be at least 2");
    }
    if n.windows(2).any(|w| w[1] <= w[0]) {
        return err(field, "site counts must be strictly increasing");
    }
    Ok(())
}

/// Validates a config against every module contract without running anything.
pub fn resolve(cfg: &ExperimentConfig, allow_small_gamma: bool) -> Result<Resolved, ConfigError> {
    let pot = potential(&cfg.action)?;
    if cfg.action.series.is_empty() {
        return err("action.series", "needs at least one series");
    }
    check_sites("lattice.n_sites", &cfg.lattice.n_sites)?;
    positive("lattice.total_time", cfg.lattice.total_time)?;
    let sb = &cfg.sampler;
    if sb.chains == 0 {
        return err("sampler.chains", "must be at least 1");
    }
    let base_params = SamplerParams {
        n_sweeps: sb.sweeps,
        burn_in: sb.burn_in,
        thinning: sb.thinning,
        local_width: sb.local_width,
        jump_probability: sb.jump_probability.unwrap_or(0.0),
        seed: sb.seed,
        target_acceptance: sb.target_acceptance,
    };
    base_params.validate().or_else(|e| err("sampler", e))?;
    if sb.seed > i64::MAX as u64 {
        return err("sampler.seed", "must be at most 2^63 - 1 so the manifest can store it");
    }
    let records = (sb.sweeps / sb.thinning) as usize;
    if records < pathgeom::observables::MIN_BLOCKING_SAMPLES {
        return err(
            "sampler.sweeps",
            format!(
                "sweeps / thinning = {records} measurements per chain, blocking needs at least {}",
                pathgeom::observables::MIN_BLOCKING_SAMPLES
            ),
        );
    }
    let an = &cfg.analysis;
    if !(an.fit || an.histogram || an.sample_paths) {
        return err("analysis", "nothing to do: enable fit, histogram or sample_paths");
    }
    if cfg.output.formats.is_empty() {
        return err("output.formats", "needs at least one format");
    }
    if cfg.output.experiment.is_empty()
        || !cfg
            .output
            .experiment
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    {
        return err("output.experiment", "use letters, digits, '-' and '_' only");
    }

    let mut config = cfg.clone();
    let mut series = Vec::with_capacity(cfg.action.series.len());
    for (i, s) in cfg.action.series.iter().enumerate() {
        let field = format!("action.series[{i}]");
        let kind = resolve_kind(&field, s, pot, allow_small_gamma)?;
        let n_sites = s.n_sites.clone().unwrap_or_else(|| cfg.lattice.n_sites.clone());
        check_sites(&format!("{field}.n_sites"), &n_sites)?;
        let mut spec_out = s.clone();
        let mut cutoff = s.cutoff.or(cfg.lattice.cutoff);
        let box_width = s.box_width.or(cfg.lattice.box_width);
        if let SeriesKind::Chain(spec) = &kind {
            if spec.is_bounded() && cutoff.is_none() && box_width.is_none() {
                cutoff = Some(DEFAULT_CUTOFF);
                spec_out.cutoff = Some(DEFAULT_CUTOFF);
            }
        }
        let mut lattice = LatticeConfig::new(n_sites[0], cfg.lattice.total_time).or_else(|e| err("lattice", e))?;
        lattice.left_endpoint = cfg.lattice.left_endpoint;
        lattice.right_endpoint = if cfg.lattice.free_end {
            None
        } else {
            Some(cfg.lattice.right_endpoint)
        };
        if let Some(l) = cutoff {
            lattice = lattice.with_cutoff(l).or_else(|e| err(format!("{field}.cutoff"), e))?;
        }
        if let Some(w) = box_width {
            lattice = lattice.with_box(w).or_else(|e| err(format!("{field}.box_width"), e))?;
        }
        for &n in &n_sites {
            LatticeConfig {
                n_sites: n,
                spacing: cfg.lattice.total_time / n as f64,
                ..lattice.clone()
            }
            .validate()
            .or_else(|e| err(format!("{field}.n_sites"), e))?;
        }
        let jump = match (&kind, sb.jump_probability) {
            (_, Some(p)) => p,
            (SeriesKind::Chain(spec), None) => SamplerParams::for_action(spec).jump_probability,
            (SeriesKind::Uniform { .. }, None) => 0.0,
        };
        let params = SamplerParams {
            jump_probability: jump,
            seed: chain_seed(sb.seed, i as u64),
            ..base_params.clone()
        };
        params.validate().or_else(|e| err("sampler.jump_probability", e))?;
        match &kind {
            SeriesKind::Uniform { .. } if an.fit || an.sample_paths => {
                return err(
                    &field,
                    "uniform-reference series only take part in histogram runs (set analysis.fit = false)",
                );
            }
            _ => {}
        }
        if an.fit && n_sites.len() < 4 {
            return err(
                format!("{field}.n_sites"),
                format!("a power-law fit needs at least 4 site counts, got {}", n_sites.len()),
            );
        }
        if an.histogram {
            let paths = records * sb.chains;
            if matches!(kind, SeriesKind::Chain(_)) && paths < pathgeom::observables::MIN_HISTOGRAM_PATHS {
                return err(
                    "sampler",
                    format!(
                        "histograms need at least {} paths, this run records {paths}",
                        pathgeom::observables::MIN_HISTOGRAM_PATHS
                    ),
                );
            }
        }
        config.action.series[i] = spec_out.clone();
        series.push(ResolvedSeries {
            label: series_label(s),
            spec: spec_out,
            kind,
            n_sites,
            lattice,
            params,
            chains: sb.chains,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for (i, s) in series.iter().enumerate() {
        if !seen.insert(s.label.clone()) {
            return err(
                format!("action.series[{i}].label"),
                format!("duplicate series label {:?}", s.label),
            );
        }
    }

    let figures = if cfg.output.figures.is_empty() {
        default_figures(an)
    } else {
        cfg.output.figures.clone()
    };
    for (i, fig) in figures.iter().enumerate() {
        let needs = match fig {
            Figure::LengthScaling | Figure::DfVsAlpha | Figure::BetaVsGamma => an.fit,
            Figure::Jaggedness => an.histogram,
            Figure::Paths => an.sample_paths,
        };
        if !needs {
            return err(
                format!("output.figures[{i}]"),
                format!("{} needs the matching analysis switch", fig.file_stem()),
            );
        }
        if *fig == Figure::DfVsAlpha && series.iter().any(|s| s.spec.variant != Variant::SubDiffusive) {
            return err(
                format!("output.figures[{i}]"),
                "df-vs-alpha needs sub-diffusive series only",
            );
        }
        if *fig == Figure::BetaVsGamma
            && series
                .iter()
                .any(|s| !(s.spec.variant == Variant::FModified && s.spec.f == Some(FName::Gamma)))
        {
            return err(format!("output.figures[{i}]"), "beta-vs-gamma needs gamma series only");
        }
    }
    config.output.figures = figures.clone();
    config.sampler.jump_probability = sb.jump_probability;
    Ok(Resolved {
        config,
        series,
        figures,
    })
}

fn default_figures(an: &AnalysisBlock) -> Vec<Figure> {
    let mut out = Vec::new();
    if an.fit {
        out.push(Figure::LengthScaling);
    }
    if an.histogram {
        out.push(Figure::Jaggedness);
    }
    if an.sample_paths {
        out.push(Figure::Paths);
    }
    out
}

/// Parses a config, or the `config` table of a run manifest.
pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
    let value: toml::Table = text.parse()?;
    if value.contains_key("run") && value.contains_key("config") {
        let table = value["config"].clone();
        return Ok(ExperimentConfig::deserialize(table)?);
    }
    Ok(toml::from_str(text)?)
}

pub fn load(path: &FsPath) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Like [`load`], but also returns the `allow_small_gamma` flag recorded in a run manifest.
pub fn load_with_flags(path: &FsPath) -> anyhow::Result<(ExperimentConfig, bool)> {
    let cfg = load(path)?;
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table = text.parse()?;
    let flag = table
        .get("run")
        .and_then(|r| r.get("allow_small_gamma"))
        .and_then(|v| v.as_bool())
        .unwrap_or(false);
    Ok((cfg, flag))
}

pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesKind::Chain(spec) => write!(f, "{spec}"),
            SeriesKind::Uniform { width } => write!(f, "uniform(width={width})"),
        }
    }
}
