//! Scenario configuration (TOML) and its validation.
//!
//! The schema is documented in `docs/config.md`. Complex numbers are
//! written as `[re, im]` pairs; tensors as 3×3 nested arrays of pairs.

use std::f64::consts::PI;

use emkm_core::emcore::{CMat3, CVec3, MediumParams, Point3, C64};
use emkm_core::imaging::DeltaRule;
use emkm_core::scene::{
    make_band, make_disk_array, make_square_array, ArrayGeometry, Dipole, FrequencyBand, ImagingGrid, Scatterer,
    DEFAULT_N_FREQ,
};
use serde::{Deserialize, Serialize};

/// Current configuration schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Complex = [f64; 2];
pub type Tensor = [[Complex; 3]; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub medium: MediumConfig,
    pub array: ArrayConfig,
    pub band: BandConfig,
    pub scene: SceneConfig,
    pub grid: Vec<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub c: f64,
    pub mu: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        let m = MediumParams::default();
        Self { c: m.c, mu: m.mu }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayConfig {
    /// `side` meters, `n × n` elements.
    Square { side: f64, n: usize },
    /// `radius` meters on an `n_r × n_theta` polar grid.
    Disk { radius: f64, n_r: usize, n_theta: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    /// Central frequency (Hz).
    pub f0: f64,
    /// Bandwidth `B/2π` (Hz).
    pub bandwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_freq: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleConfig {
    pub position: Point3,
    pub polarization: [Complex; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererConfig {
    pub position: Point3,
    pub polarizability: Tensor,
}

/// Cube of identical scatterers on a regular lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedConfig {
    pub center: Point3,
    pub side: f64,
    pub spacing: f64,
    pub polarizability: Tensor,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipoles: Option<Vec<DipoleConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatterers: Option<Vec<ScattererConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extended: Option<ExtendedConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridShape {
    /// Axis-aligned plane centred on `center`; spacing defaults to λ₀/8
    /// in cross-range and λ₀/16 in range.
    Plane {
        center: Point3,
        normal: Axis,
        n: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<[f64; 2]>,
    },
    /// `n` points from `start` in increments of `step`.
    Line {
        start: Point3,
        step: Point3,
        n: usize,
    },
    /// Box with `n` points per axis (x, y, z), first point at `origin`.
    Volume {
        origin: Point3,
        n: [usize; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<[f64; 3]>,
    },
    Points {
        points: Vec<Point3>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Used as the file stem of this grid's products.
    pub name: String,
    #[serde(flatten)]
    pub shape: GridShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    Crossrange,
    Full3x3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    pub mode: RecoveryMode,
    #[serde(default)]
    pub delta: DeltaRule,
    /// A run fails with a numerical error when a larger fraction of grid
    /// points has a singular system.
    #[serde(default = "default_singular_fraction")]
    pub max_singular_fraction: f64,
}

fn default_singular_fraction() -> f64 {
    0.5
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            mode: RecoveryMode::Crossrange,
            delta: DeltaRule::default(),
            max_singular_fraction: default_singular_fraction(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveSolver {
    /// `scene` without noise, `dense` with noise.
    #[default]
    Auto,
    /// Synthesize and image the full response matrix.
    Dense,
    /// Image through the point-spread factorization (noise-free only).
    Scene,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub active: ActiveSolver,
    /// Upper bound on the dense response matrix storage (bytes).
    #[serde(default = "default_dense_limit")]
    pub max_dense_bytes: u64,
}

fn default_dense_limit() -> u64 {
    2 << 30
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            active: ActiveSolver::Auto,
            max_dense_bytes: default_dense_limit(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    Image,
    Recovery,
    Profiles,
    Ellipses,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    Text,
    Binary,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub products: Vec<Product>,
    pub format: GridFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "emkm-out".into(),
            products: vec![
                Product::Image,
                Product::Recovery,
                Product::Profiles,
                Product::Ellipses,
                Product::Report,
            ],
            format: GridFormat::Both,
        }
    }
}

/// The scene after validation.
#[derive(Clone, Debug, PartialEq)]
pub enum Scene {
    Passive(Vec<Dipole>),
    Active(Vec<Scatterer>),
}

/// Fully constructed objects of a validated configuration.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub medium: MediumParams,
    pub array: ArrayGeometry,
    pub band: FrequencyBand,
    pub scene: Scene,
    pub grids: Vec<(String, ImagingGrid)>,
}

fn c64(v: Complex) -> C64 {
    C64::new(v[0], v[1])
}

fn tensor(t: &Tensor) -> CMat3 {
    CMat3(t.map(|row| row.map(c64)))
}

/// Regular lattice of scatterers filling a cube. Each axis carries
/// `⌊side/spacing⌋ + 1` points spaced by `spacing`, centred on the cube
/// centre, all sharing the configured tensor.
pub fn expand_extended(block: &ExtendedConfig) -> Result<Vec<Scatterer>, ConfigError> {
    if !(block.side.is_finite() && block.side > 0.0) {
        return Err(ConfigError::new("scene.extended.side", "must be > 0"));
    }
    if !(block.spacing.is_finite() && block.spacing > 0.0 && block.spacing <= block.side) {
        return Err(ConfigError::new(
            "scene.extended.spacing",
            "must satisfy 0 < spacing <= side",
        ));
    }
    // tolerate rounding in side/spacing ratios such as 0.625/0.03125
    let m = (block.side / block.spacing * (1.0 + 1e-12)).floor() as usize;
    let alpha = tensor(&block.polarizability);
    let offset = |i: usize| (i as f64 - m as f64 / 2.0) * block.spacing;
    let mut out = Vec::with_capacity((m + 1).pow(3));
    for iz in 0..=m {
        for iy in 0..=m {
            for ix in 0..=m {
                let p = [
                    block.center[0] + offset(ix),
                    block.center[1] + offset(iy),
                    block.center[2] + offset(iz),
                ];
                out.push(
                    Scatterer::new(p, alpha)
                        .map_err(|e| ConfigError::new("scene.extended.polarizability", e.to_string()))?,
                );
            }
        }
    }
    Ok(out)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("line {}", text[..s.start].lines().count().max(1)))
                .unwrap_or_else(|| "<document>".into());
            ConfigError::new(field, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn wavelength0(&self) -> f64 {
        self.medium.c / self.band.f0
    }

    pub fn is_passive(&self) -> bool {
        self.scene.dipoles.is_some()
    }

    /// Validates every field and builds the scene objects.
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let medium =
            MediumParams::new(self.medium.c, self.medium.mu).map_err(|e| ConfigError::new("medium", e.to_string()))?;
        let array = match self.array {
            ArrayConfig::Square { side, n } => make_square_array(side, n),
            ArrayConfig::Disk { radius, n_r, n_theta } => make_disk_array(radius, n_r, n_theta),
        }
        .map_err(|e| ConfigError::new("array", e.to_string()))?;
        let n_freq = self
            .band
            .n_freq
            .unwrap_or(if self.band.bandwidth == 0.0 { 1 } else { DEFAULT_N_FREQ });
        let band = make_band(self.band.f0, self.band.bandwidth, n_freq)
            .map_err(|e| ConfigError::new("band", e.to_string()))?;

        let present = [
            self.scene.dipoles.is_some(),
            self.scene.scatterers.is_some(),
            self.scene.extended.is_some(),
        ];
        if present.iter().filter(|&&p| p).count() != 1 {
            return Err(ConfigError::new(
                "scene",
                "exactly one of `dipoles`, `scatterers`, `extended` must be present",
            ));
        }
        let scene = if let Some(dipoles) = &self.scene.dipoles {
            let list = dipoles
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let field = format!("scene.dipoles[{i}]");
                    if !(d.position[2] > 0.0) {
                        return Err(ConfigError::new(field, "dipole must lie above the array plane (z > 0)"));
                    }
                    Dipole::new(d.position, CVec3(d.polarization.map(c64)))
                        .map_err(|e| ConfigError::new(field, e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Scene::Passive(list)
        } else if let Some(scat) = &self.scene.scatterers {
            let list = scat
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let field = format!("scene.scatterers[{i}]");
                    if !(s.position[2] > 0.0) {
                        return Err(ConfigError::new(
                            field,
                            "scatterer must lie above the array plane (z > 0)",
                        ));
                    }
                    Scatterer::new(s.position, tensor(&s.polarizability))
                        .map_err(|e| ConfigError::new(field, e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Scene::Active(list)
        } else {
            let block = self.scene.extended.as_ref().expect("checked above");
            let list = expand_extended(block)?;
            if list.iter().any(|s| !(s.position[2] > 0.0)) {
                return Err(ConfigError::new(
                    "scene.extended.center",
                    "cube crosses the array plane",
                ));
            }
            Scene::Active(list)
        };

        if self.recovery.mode == RecoveryMode::Full3x3 && !matches!(scene, Scene::Passive(_)) {
            return Err(ConfigError::new(
                "recovery.mode",
                "`full3x3` is only valid for passive scenes",
            ));
        }
        if !(0.0..=1.0).contains(&self.recovery.max_singular_fraction) {
            return Err(ConfigError::new("recovery.max_singular_fraction", "must lie in [0, 1]"));
        }
        self.recovery
            .delta
            .resolve(1.0)
            .map_err(|e| ConfigError::new("recovery.delta", e.to_string()))?;
        if let Some(noise) = &self.noise {
            if !noise.snr_db.is_finite() {
                return Err(ConfigError::new("noise.snr_db", "must be finite"));
            }
        }
        if matches!(scene, Scene::Active(_)) {
            let dense = match self.solver.active {
                ActiveSolver::Dense => true,
                ActiveSolver::Scene => {
                    if self.noise.is_some() {
                        return Err(ConfigError::new(
                            "solver.active",
                            "`scene` imaging cannot include noise; use `dense` or `auto`",
                        ));
                    }
                    false
                }
                ActiveSolver::Auto => self.noise.is_some(),
            };
            if dense {
                let n3 = 3 * array.len() as u64;
                let bytes = n3 * n3 * band.len() as u64 * 16;
                if bytes > self.solver.max_dense_bytes {
                    return Err(ConfigError::new(
                        "solver.max_dense_bytes",
                        format!("dense response needs {bytes} bytes; reduce the array or n_freq"),
                    ));
                }
            }
        }

        if self.grid.is_empty() {
            return Err(ConfigError::new("grid", "at least one grid is required"));
        }
        let lambda0 = self.wavelength0();
        let mut grids = Vec::with_capacity(self.grid.len());
        for (i, g) in self.grid.iter().enumerate() {
            let field = format!("grid[{i}]");
            if g.name.is_empty()
                || !g
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(ConfigError::new(
                    format!("{field}.name"),
                    "use letters, digits, `_` or `-`",
                ));
            }
            if grids.iter().any(|(n, _)| n == &g.name) {
                return Err(ConfigError::new(format!("{field}.name"), "duplicate grid name"));
            }
            let grid = match &g.shape {
                GridShape::Plane { center, normal, n, h } => {
                    let default_h = |axis: usize| if axis == 2 { lambda0 / 16.0 } else { lambda0 / 8.0 };
                    let in_plane: Vec<usize> = (0..3).filter(|&c| c != normal.index()).collect();
                    let h = h.unwrap_or([default_h(in_plane[0]), default_h(in_plane[1])]);
                    ImagingGrid::plane(*center, normal.index(), *n, h)
                }
                GridShape::Line { start, step, n } => ImagingGrid::line(*start, *step, *n),
                GridShape::Volume { origin, n, h } => {
                    let h = h.unwrap_or([lambda0 / 8.0, lambda0 / 8.0, lambda0 / 16.0]);
                    let axes = [2usize, 1, 0]
                        .iter()
                        .map(|&c| {
                            let mut step = [0.0; 3];
                            step[c] = h[c];
                            emkm_core::scene::GridAxis { step, count: n[c] }
                        })
                        .collect();
                    ImagingGrid::new(*origin, axes)
                }
                GridShape::Points { points } => ImagingGrid::from_points(points.clone()),
            }
            .map_err(|e| ConfigError::new(field.clone(), e.to_string()))?;
            grid.check_off_array_plane()
                .map_err(|e| ConfigError::new(field.clone(), e.to_string()))?;
            grids.push((g.name.clone(), grid));
        }
        let output_dir = &self.outputs.directory;
        if output_dir.is_empty() {
            return Err(ConfigError::new("outputs.directory", "must not be empty"));
        }
        Ok(Scenario {
            medium,
            array,
            band,
            scene,
            grids,
        })
    }
}

/// Reference wavelength of the bundled configs: f₀ = 2.4 GHz,
/// λ₀ = 0.125 m.
pub fn reference_wavelength() -> f64 {
    2.0 * PI * 3.0e8 / (2.0 * PI * 2.4e9)
}
