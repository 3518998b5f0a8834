//! Run configuration: TOML files, presets and flag overrides.
//!
//! Resolution order, lowest to highest: built-in defaults, preset, config
//! file, command-line flags. Layers are merged key by key on the TOML tree, so
//! a preset only supplies keys the file leaves out.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use stoch_euler::dynamics::{Diffusion, SchemeConfig};
use stoch_euler::ensemble::EnsembleConfig;
use stoch_euler::gas::{ConservedField, GasLaw, Grid};
use stoch_euler::noise::{sw_topography_modes, NoiseModel};
use toml::{Table, Value};

use crate::error::CliError;

pub const PRESETS: [&str; 5] = ["test1", "test2", "test3", "test4", "custom"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Normalized { gamma: f64 },
    ShallowWater { gravity: f64 },
}

impl Default for LawSpec {
    fn default() -> Self {
        LawSpec::ShallowWater { gravity: 2.0 }
    }
}

impl LawSpec {
    pub fn build(&self) -> Result<GasLaw, CliError> {
        Ok(match *self {
            LawSpec::Normalized { gamma } => GasLaw::normalized(gamma)?,
            LawSpec::ShallowWater { gravity } => GasLaw::shallow_water(gravity)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSpec {
    pub kappa: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    /// Modes `σ_k` for `k = 1..=sigma.len()`, each with a sine and a cosine wave.
    ShallowWaterTopography {
        sigma: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        localization: Option<LocalizationSpec>,
    },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::ShallowWaterTopography { sigma: vec![1.0; 5], localization: None }
    }
}

impl NoiseSpec {
    pub fn build(&self, law: &GasLaw) -> Result<NoiseModel, CliError> {
        match self {
            NoiseSpec::Zero => Ok(NoiseModel::zero()),
            NoiseSpec::ShallowWaterTopography { sigma, localization } => {
                let g = law.gravity().ok_or_else(|| {
                    CliError::Config("shallow_water_topography noise needs a shallow_water law".into())
                })?;
                let model = sw_topography_modes(g, sigma, sigma.len())?;
                Ok(match localization {
                    Some(l) => model.localize(law, l.kappa, l.margin)?,
                    None => model,
                })
            }
        }
    }

    /// `Σ σ_k²`.
    pub fn sigma_l2_squared(&self) -> f64 {
        match self {
            NoiseSpec::Zero => 0.0,
            NoiseSpec::ShallowWaterTopography { sigma, .. } => sigma.iter().map(|s| s * s).sum(),
        }
    }
}

/// Initial depth and velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Uniform { depth: f64, velocity: f64 },
    /// `u = left` on `(0, split)`, `right` on `(split, 1)`.
    Piecewise { depth: f64, left: f64, right: f64, split: f64 },
    /// `u = mean + amplitude·sin(2π·wavenumber·x)`.
    Sine { depth: f64, mean: f64, amplitude: f64, wavenumber: u32 },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Uniform { depth: 1.0, velocity: 0.0 }
    }
}

impl InitialSpec {
    pub fn build(&self, n_cells: usize) -> Result<ConservedField, CliError> {
        let grid = Grid::new(n_cells)?;
        let x = grid.centers();
        let (depth, u): (f64, Vec<f64>) = match *self {
            InitialSpec::Uniform { depth, velocity } => (depth, vec![velocity; n_cells]),
            InitialSpec::Piecewise { depth, left, right, split } => {
                (depth, x.iter().map(|&x| if x < split { left } else { right }).collect())
            }
            InitialSpec::Sine { depth, mean, amplitude, wavenumber } => (
                depth,
                x.iter()
                    .map(|&x| mean + amplitude * (2.0 * std::f64::consts::PI * wavenumber as f64 * x).sin())
                    .collect(),
            ),
        };
        if !(depth >= 0.0) {
            return Err(CliError::Config(format!("initial depth must be >= 0, got {depth}")));
        }
        Ok(ConservedField::from_primitive(vec![depth; n_cells], &u)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Must fit in a TOML integer, i.e. below 2⁶³.
    pub master_seed: u64,
    pub n_realizations: u32,
    pub horizon: f64,
    pub n_cells: usize,
    /// Steps of length τ between CSV rows.
    pub output_stride: usize,
    pub output_dir: PathBuf,
    pub emit_snapshots: bool,
    /// Number of realizations whose states are stored when snapshots are on.
    pub snapshot_realizations: u32,
    pub law: LawSpec,
    pub scheme: SchemeConfig,
    pub noise: NoiseSpec,
    pub initial: InitialSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            master_seed: 1,
            n_realizations: 16,
            horizon: 1.0,
            n_cells: 256,
            output_stride: 20,
            output_dir: PathBuf::from("out"),
            emit_snapshots: false,
            snapshot_realizations: 4,
            law: LawSpec::default(),
            scheme: SchemeConfig { diffusion: Diffusion::Lattice, ..Default::default() },
            noise: NoiseSpec::default(),
            initial: InitialSpec::default(),
        }
    }
}

/// Experiment presets. `custom` carries only the defaults.
pub fn load_preset(id: &str) -> Result<RunConfig, CliError> {
    let initial = match id {
        "test1" => InitialSpec::Piecewise { depth: 1.0, left: 1.0, right: 0.0, split: 0.5 },
        "test2" => InitialSpec::Uniform { depth: 1.0, velocity: 0.5 },
        "test3" => InitialSpec::Uniform { depth: 1.0, velocity: 0.0 },
        "test4" => InitialSpec::Piecewise { depth: 1.0, left: -0.5, right: 0.5, split: 0.5 },
        "custom" => return Ok(RunConfig { preset: Some("custom".into()), ..Default::default() }),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(RunConfig {
        preset: Some(id.into()),
        n_realizations: 256,
        horizon: 10.0,
        n_cells: 256,
        law: LawSpec::ShallowWater { gravity: 2.0 },
        scheme: SchemeConfig {
            epsilon: 1e-3,
            tau: 1e-3,
            diffusion: Diffusion::Lattice,
            ..Default::default()
        },
        noise: NoiseSpec::ShallowWaterTopography { sigma: vec![1.0; 5], localization: None },
        initial,
        ..Default::default()
    })
}

fn to_table(cfg: &RunConfig) -> Result<Table, CliError> {
    match Value::try_from(cfg) {
        Ok(Value::Table(t)) => Ok(t),
        Ok(_) => unreachable!("config serializes to a table"),
        Err(e) => Err(CliError::Config(format!("cannot serialize config: {e}"))),
    }
}

/// Overlays `top` onto `base`, recursing into tables. A tagged section whose
/// tag changes is replaced whole, since its other keys no longer apply.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => {
                let retagged = ["mode", "kind"]
                    .iter()
                    .any(|tag| t.get(*tag).is_some_and(|new| b.get(*tag) != Some(new)));
                if retagged {
                    *b = t;
                } else {
                    merge(b, t);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Config(format!("config parse error: {e}")))
}

/// Resolves defaults ← preset ← file ← flags into a validated config.
pub fn resolve(file: Option<Table>, flags: Table) -> Result<RunConfig, CliError> {
    let preset = flags
        .get("preset")
        .or_else(|| file.as_ref().and_then(|f| f.get("preset")))
        .map(|v| {
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| CliError::Config("`preset` must be a string".into()))
        })
        .transpose()?;
    let mut table = match &preset {
        Some(id) => to_table(&load_preset(id)?)?,
        None => Table::new(),
    };
    if let Some(f) = file {
        merge(&mut table, f);
    }
    merge(&mut table, flags);
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.preset {
            if !PRESETS.contains(&p.as_str()) {
                return Err(CliError::Config(format!("unknown preset `{p}`")));
            }
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(CliError::Config("master_seed must be below 2^63".into()));
        }
        self.ensemble_config().map(|_| ())
    }

    pub fn ensemble_config(&self) -> Result<EnsembleConfig, CliError> {
        let law = self.law.build()?;
        let cfg = EnsembleConfig {
            n_realizations: self.n_realizations,
            first_realization: 0,
            master_seed: self.master_seed,
            horizon: self.horizon,
            output_stride: self.output_stride,
            scheme: self.scheme.clone(),
            noise: self.noise.build(&law)?,
            law,
            initial: self.initial.build(self.n_cells)?,
            snapshot_realizations: if self.emit_snapshots { self.snapshot_realizations } else { 0 },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrals(cfg: &RunConfig) -> (f64, f64) {
        let f = cfg.initial.build(cfg.n_cells).unwrap();
        let dx = 1.0 / cfg.n_cells as f64;
        (f.total_mass(dx), f.total_momentum(dx))
    }

    #[test]
    fn preset_integrals() {
        let (h2, q2) = integrals(&load_preset("test2").unwrap());
        assert!((h2 - 1.0).abs() < 1e-14 && (q2 - 0.5).abs() < 1e-14);
        let (h1, q1) = integrals(&load_preset("test1").unwrap());
        assert!((h1 - h2).abs() < 1e-14 && (q1 - 0.5).abs() < 1e-14);
        let (_, q3) = integrals(&load_preset("test3").unwrap());
        assert_eq!(q3, 0.0);
        let (_, q4) = integrals(&load_preset("test4").unwrap());
        assert!(q4.abs() < 1e-14);
        assert!(load_preset("test5").is_err());
    }

    #[test]
    fn round_trip() {
        for id in PRESETS {
            let cfg = load_preset(id).unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        }
        let mut cfg = load_preset("test3").unwrap();
        cfg.noise = NoiseSpec::ShallowWaterTopography {
            sigma: vec![0.1, 0.2],
            localization: Some(LocalizationSpec { kappa: 4.0, margin: 0.5 }),
        };
        cfg.scheme.kappa_bound = Some(8.0);
        cfg.law = LawSpec::ShallowWater { gravity: 9.81 };
        cfg.initial = InitialSpec::Sine { depth: 2.0, mean: 0.1, amplitude: 0.3, wavenumber: 2 };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn preset_fills_only_unset_keys() {
        let file = parse_table(
            "preset = \"test1\"\nn_realizations = 8\n[scheme]\nepsilon = 0.01\n",
        )
        .unwrap();
        let cfg = resolve(Some(file), Table::new()).unwrap();
        assert_eq!(cfg.n_realizations, 8);
        assert_eq!(cfg.scheme.epsilon, 0.01);
        assert_eq!(cfg.scheme.tau, 1e-3);
        assert_eq!(cfg.horizon, 10.0);
        assert_eq!(cfg.initial, load_preset("test1").unwrap().initial);
    }

    #[test]
    fn flags_override_file() {
        let file = parse_table("preset = \"test3\"\nmaster_seed = 5\n").unwrap();
        let mut flags = Table::new();
        flags.insert("master_seed".into(), Value::Integer(9));
        flags.insert("preset".into(), Value::String("test2".into()));
        let cfg = resolve(Some(file), flags).unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.preset.as_deref(), Some("test2"));
        assert_eq!(cfg.initial, InitialSpec::Uniform { depth: 1.0, velocity: 0.5 });
    }

    #[test]
    fn retagging_replaces_section() {
        let file = parse_table(
            "preset = \"test1\"\n[initial]\nkind = \"uniform\"\ndepth = 2.0\nvelocity = 0.0\n",
        )
        .unwrap();
        let cfg = resolve(Some(file), Table::new()).unwrap();
        assert_eq!(cfg.initial, InitialSpec::Uniform { depth: 2.0, velocity: 0.0 });
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "n_realizations = 0",
            "horizon = 0.0015",
            "[scheme]\ntau = -1.0",
            "unknown_key = 1",
            "preset = \"nope\"",
            "[law]\nmode = \"normalized\"\ngamma = 2.0",
            "[noise]\nkind = \"shallow_water_topography\"\nsigma = [1.0]\nextra = 2",
        ] {
            let r = resolve(Some(parse_table(text).unwrap()), Table::new());
            assert!(matches!(r, Err(CliError::Config(_))), "{text}: {r:?}");
        }
        assert!(parse_table("n_cells = ").is_err());
    }
}
