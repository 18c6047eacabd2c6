//! Experiment configuration: JSON, unknown keys rejected, semantic checks
//! applied before anything runs.

use std::path::Path;

use anyhow::{bail, Context};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must equal the schema version this binary understands.
    pub schema_version: u32,
    /// Label used for the default output directory.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Default artifact directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub experiment: Experiment,
    #[serde(default)]
    pub numerics: Numerics,
    /// Thresholds on summary scalars; the exit status is 0 only if all hold.
    #[serde(default)]
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    /// Explicit per-mode truncation; the amplitude-based default otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    /// Added to every mode's truncation (the `--dims-bump` flag adds more).
    pub dims_bump: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_step: None, dims: None, dims_bump: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Check {
    /// Name of a summary scalar.
    pub scalar: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    BerryCurve(BerryCurve),
    BellInit(BellInit),
    Switchoff(Switchoff),
    Rotation(Rotation),
    Multimode(Multimode),
    Properties(Properties),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::BerryCurve(_) => "berry_curve",
            Experiment::BellInit(_) => "bell_init",
            Experiment::Switchoff(_) => "switchoff",
            Experiment::Rotation(_) => "rotation",
            Experiment::Multimode(_) => "multimode",
            Experiment::Properties(_) => "properties",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BellName {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum SignName {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ParityName {
    Even,
    Odd,
}

fn one() -> f64 {
    1.0
}

fn unit_kerr() -> [f64; 2] {
    [1.0, 1.0]
}

fn two() -> usize {
    2
}

fn pi() -> f64 {
    std::f64::consts::PI
}

fn phi_plus() -> BellName {
    BellName::PhiPlus
}

/// Closed-form Berry-phase difference against `|α|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BerryCurve {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub points: usize,
    #[serde(default = "two")]
    pub loops: usize,
    /// Phase whose crossing is reported as `root_alpha`.
    #[serde(default = "pi")]
    pub target_phase: f64,
}

/// Ramp from Fock states to a Bell cat, swept over `alpha_f × k12_tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BellInit {
    #[serde(default = "phi_plus")]
    pub bell: BellName,
    #[serde(default = "unit_kerr")]
    pub kerr: [f64; 2],
    #[serde(default = "one")]
    pub cross_kerr: f64,
    pub alpha_f: Vec<f64>,
    /// Ramp durations in units of `1/K12`.
    pub k12_tau: Vec<f64>,
    #[serde(default = "default_stagger")]
    pub stagger: f64,
}

fn default_stagger() -> f64 {
    catforge::protocol::DEFAULT_STAGGER
}

/// Prepared Bell state, mixing drive stepped off, cross-Kerr ramped off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Switchoff {
    #[serde(default = "phi_plus")]
    pub bell: BellName,
    /// `α₁ = α₂`, real.
    pub alpha: f64,
    #[serde(default = "unit_kerr")]
    pub kerr: [f64; 2],
    #[serde(default = "one")]
    pub cross_kerr: f64,
    /// Switch-off durations in units of `1/K12`.
    pub k12_tau_off: Vec<f64>,
}

/// Drive-phase rotation of mode 1; single-mode when `alpha2` is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Rotation {
    /// One run per value.
    pub alpha1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default = "unit_kerr")]
    pub kerr: [f64; 2],
    /// Coupling during the rotation; 0 means detached modes.
    #[serde(default)]
    pub cross_kerr: f64,
    #[serde(default)]
    pub track_coupler: bool,
    #[serde(default = "two")]
    pub loops: usize,
    /// Duration of one loop of the drive phase, in units of `1/K`.
    pub period: f64,
    /// Uniformly spaced rows of the trajectory table.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Frames>,
}

fn default_samples() -> usize {
    100
}

/// Phase-space snapshots: Wigner (single mode) or Bell projection (two modes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Frames {
    /// Evenly spaced over the run, both ends included.
    pub count: usize,
    pub half_width: f64,
    pub points: usize,
}

/// Sequential appending into a multi-mode cat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Multimode {
    pub alphas: Vec<f64>,
    pub sigma: Vec<SignName>,
    pub parity: ParityName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_kerr: Option<Vec<f64>>,
    /// Ramp time of each stage, in units of `1/K`.
    pub tau: f64,
}

/// Fast invariant blocks; bounds are set through `checks`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Properties {
    /// Amplitude used by the eigenstate and propagation blocks.
    pub alpha: f64,
    /// Truncation of the eigenstate-residual block.
    pub dim: usize,
}

impl Default for Properties {
    fn default() -> Self {
        Self { alpha: 1.5, dim: 40 }
    }
}

fn positive(name: &str, v: f64) -> anyhow::Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

fn non_empty<T>(name: &str, v: &[T]) -> anyhow::Result<()> {
    if v.is_empty() {
        bail!("{name} must not be empty");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version);
        }
        if self.name.trim().is_empty() {
            bail!("name must not be empty");
        }
        let n = &self.numerics;
        positive("numerics.rel_tol", n.rel_tol)?;
        positive("numerics.abs_tol", n.abs_tol)?;
        if let Some(h) = n.max_step {
            positive("numerics.max_step", h)?;
        }
        if let Some(d) = &n.dims {
            if d.iter().any(|&d| d < 2) {
                bail!("numerics.dims entries must be ≥ 2");
            }
            if let Some(m) = self.n_modes() {
                if d.len() != m {
                    bail!("numerics.dims has {} entries, the experiment has {m} modes", d.len());
                }
            }
        }
        for c in &self.checks {
            if c.min.is_none() && c.max.is_none() {
                bail!("check on {:?} needs min or max", c.scalar);
            }
        }
        match &self.experiment {
            Experiment::BerryCurve(b) => {
                positive("alpha_min", b.alpha_min)?;
                if !(b.alpha_max > b.alpha_min) {
                    bail!("alpha_max must exceed alpha_min");
                }
                if b.points < 2 {
                    bail!("points must be ≥ 2");
                }
                if b.loops == 0 || b.loops % 2 == 1 {
                    bail!("loops must be even and positive, got {}", b.loops);
                }
            }
            Experiment::BellInit(b) => {
                b.kerr.iter().try_for_each(|&k| positive("kerr", k))?;
                positive("cross_kerr", b.cross_kerr)?;
                non_empty("alpha_f", &b.alpha_f)?;
                non_empty("k12_tau", &b.k12_tau)?;
                b.alpha_f.iter().try_for_each(|&a| positive("alpha_f", a))?;
                b.k12_tau.iter().try_for_each(|&t| positive("k12_tau", t))?;
                if !(0.0..1.0).contains(&b.stagger) {
                    bail!("stagger must lie in [0, 1)");
                }
            }
            Experiment::Switchoff(s) => {
                positive("alpha", s.alpha)?;
                s.kerr.iter().try_for_each(|&k| positive("kerr", k))?;
                positive("cross_kerr", s.cross_kerr)?;
                non_empty("k12_tau_off", &s.k12_tau_off)?;
                if s.k12_tau_off.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    bail!("k12_tau_off values must be ≥ 0");
                }
            }
            Experiment::Rotation(r) => {
                non_empty("alpha1", &r.alpha1)?;
                r.alpha1.iter().try_for_each(|&a| positive("alpha1", a))?;
                if let Some(a) = r.alpha2 {
                    positive("alpha2", a)?;
                }
                r.kerr.iter().try_for_each(|&k| positive("kerr", k))?;
                if !(r.cross_kerr >= 0.0) {
                    bail!("cross_kerr must be ≥ 0");
                }
                if r.alpha2.is_none() && (r.cross_kerr != 0.0 || r.track_coupler) {
                    bail!("cross_kerr and track_coupler need a second mode (alpha2)");
                }
                if r.loops == 0 || r.loops % 2 == 1 {
                    bail!("loops must be even and positive, got {}", r.loops);
                }
                positive("period", r.period)?;
                if r.samples < 2 {
                    bail!("samples must be ≥ 2");
                }
                if let Some(f) = &r.frames {
                    if f.count < 1 || f.points < 2 {
                        bail!("frames need count ≥ 1 and points ≥ 2");
                    }
                    positive("frames.half_width", f.half_width)?;
                }
            }
            Experiment::Multimode(m) => {
                let n = m.alphas.len();
                if n < 2 {
                    bail!("multimode needs at least two modes");
                }
                m.alphas.iter().try_for_each(|&a| positive("alphas", a))?;
                if m.sigma.len() != n {
                    bail!("sigma has {} entries, alphas has {n}", m.sigma.len());
                }
                if let Some(k) = &m.kerr {
                    if k.len() != n {
                        bail!("kerr has {} entries, alphas has {n}", k.len());
                    }
                    k.iter().try_for_each(|&k| positive("kerr", k))?;
                }
                if let Some(k) = &m.cross_kerr {
                    if k.len() != n - 1 {
                        bail!("cross_kerr needs {} entries, got {}", n - 1, k.len());
                    }
                    k.iter().try_for_each(|&k| positive("cross_kerr", k))?;
                }
                positive("tau", m.tau)?;
            }
            Experiment::Properties(p) => {
                positive("alpha", p.alpha)?;
                if p.dim < 8 {
                    bail!("dim must be ≥ 8");
                }
            }
        }
        Ok(())
    }

    /// Mode count, when fixed by the experiment.
    pub fn n_modes(&self) -> Option<usize> {
        match &self.experiment {
            Experiment::BellInit(_) | Experiment::Switchoff(_) => Some(2),
            Experiment::Rotation(r) => Some(if r.alpha2.is_some() { 2 } else { 1 }),
            Experiment::Multimode(m) => Some(m.alphas.len()),
            Experiment::BerryCurve(_) | Experiment::Properties(_) => None,
        }
    }
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4", include_str!("../presets/fig4.json")),
    ("fig5_top", include_str!("../presets/fig5_top.json")),
    ("fig5_bottom", include_str!("../presets/fig5_bottom.json")),
    ("fig6", include_str!("../presets/fig6.json")),
    ("figS1", include_str!("../presets/figS1.json")),
    ("multimode", include_str!("../presets/multimode.json")),
    ("props", include_str!("../presets/props.json")),
];

pub fn schema_json() -> String {
    let schema = schemars::schema_for!(ExperimentConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}

/// Resolves a preset name or a file path; returns the config and its source.
pub fn load(arg: &str) -> anyhow::Result<(ExperimentConfig, String)> {
    if let Some((name, text)) = PRESETS.iter().find(|(n, _)| *n == arg) {
        let cfg = ExperimentConfig::from_json(text).with_context(|| format!("preset {name}"))?;
        return Ok((cfg, format!("preset:{name}")));
    }
    let path = Path::new(arg);
    if !path.exists() {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        bail!("{arg:?} is neither a preset ({}) nor an existing file", names.join(", "));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = ExperimentConfig::from_json(&text).with_context(|| format!("config {}", path.display()))?;
    Ok((cfg, format!("file:{}", path.display())))
}
