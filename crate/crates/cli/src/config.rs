//! TOML run configuration. Every section is optional; missing fields take defaults.

use hyperdamp::damping::{Bump, DampingField, DampingPreset};
use hyperdamp::geometry::Complex;
use hyperdamp::mesh::MAX_REFINEMENT;
use hyperdamp::wave::{EvolveOptions, InitialData, Integrator};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub damping: DampingConfig,
    pub spectrum: SpectrumConfig,
    pub resolvent: ResolventConfig,
    pub wave: WaveConfig,
    pub flow: FlowConfig,
    pub words: WordsConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub refinement: i64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { refinement: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

/// Exactly one of `preset`, `constant` or `bumps`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampingConfig {
    pub preset: Option<DampingPreset>,
    pub constant: Option<f64>,
    pub bumps: Option<Vec<BumpConfig>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Defaults to minus the trusted bound of the mesh.
    pub re_min: Option<f64>,
    /// Defaults to the trusted bound of the mesh.
    pub re_max: Option<f64>,
    pub count: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            re_min: None,
            re_max: None,
            count: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub points: usize,
    pub im: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self {
            re_min: 0.5,
            re_max: 6.0,
            points: 221,
            im: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    SingleMode,
    LowPass,
    PointBump,
    QepMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub integrator: Integrator,
    pub initial: InitialKind,
    pub seed: u64,
    pub lambda_cut: f64,
    pub mode_index: usize,
    pub bump_center: [f64; 2],
    pub bump_width: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_final: 40.0,
            stride: 5,
            integrator: Integrator::AverageAcceleration,
            initial: InitialKind::LowPass,
            seed: 7,
            lambda_cut: 20.0,
            mode_index: 1,
            bump_center: [0.0, 0.0],
            bump_width: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub radial: usize,
    pub angular: usize,
    pub directions: usize,
    pub t_grid: Vec<f64>,
    pub control_length: f64,
    pub threshold: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            radial: 2,
            angular: 8,
            directions: 8,
            t_grid: vec![2.5, 5.0, 10.0, 15.0, 20.0],
            control_length: 10.0,
            threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordsConfig {
    pub rho: f64,
    pub alpha: f64,
    pub kmin: u32,
    pub kmax: u32,
}

impl Default for WordsConfig {
    fn default() -> Self {
        Self {
            rho: 0.9,
            alpha: 1.0 / 16.0,
            kmin: 4,
            kmax: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
    Txt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "hyperdamp-out".into(),
            formats: vec![Format::Csv, Format::Json, Format::Svg, Format::Txt],
        }
    }
}

/// Validation failures, each prefixed by the offending field path.
#[derive(Debug, Default)]
pub struct Problems(pub Vec<String>);

impl Problems {
    fn require(&mut self, ok: bool, path: &str, msg: impl std::fmt::Display) {
        if !ok {
            self.0.push(format!("{path}: {msg}"));
        }
    }

    fn finite_positive(&mut self, v: f64, path: &str) {
        self.require(v.is_finite() && v > 0.0, path, format_args!("must be positive and finite (got {v})"));
    }

    fn unit_interval(&mut self, v: f64, path: &str) {
        self.require(v > 0.0 && v < 1.0, path, format_args!("must lie in (0, 1) (got {v})"));
    }

    fn in_disk(&mut self, c: [f64; 2], path: &str) {
        let ok = c.iter().all(|x| x.is_finite()) && c[0].hypot(c[1]) < 1.0;
        self.require(ok, path, format_args!("must lie inside the unit disk (got {c:?})"));
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Checks every field against the preconditions of the operations that consume it.
    pub fn validate(&self) -> Result<(), Problems> {
        let mut p = Problems::default();
        let r = self.surface.refinement;
        p.require(
            (0..=MAX_REFINEMENT as i64).contains(&r),
            "surface.refinement",
            format_args!("must be in 0..={MAX_REFINEMENT} (got {r})"),
        );

        let d = &self.damping;
        let chosen = [d.preset.is_some(), d.constant.is_some(), d.bumps.is_some()]
            .iter()
            .filter(|x| **x)
            .count();
        p.require(chosen <= 1, "damping", "set at most one of preset, constant, bumps");
        if let Some(v) = d.constant {
            p.require(v.is_finite() && v >= 0.0, "damping.constant", format_args!("must be nonnegative (got {v})"));
        }
        if let Some(bumps) = &d.bumps {
            p.require(!bumps.is_empty(), "damping.bumps", "must not be empty");
            for (i, b) in bumps.iter().enumerate() {
                p.in_disk(b.center, &format!("damping.bumps[{i}].center"));
                p.finite_positive(b.radius, &format!("damping.bumps[{i}].radius"));
                p.require(
                    b.height.is_finite() && b.height >= 0.0,
                    &format!("damping.bumps[{i}].height"),
                    format_args!("must be nonnegative (got {})", b.height),
                );
            }
        }
        if p.0.is_empty() {
            if let Err(e) = self.damping_field() {
                p.0.push(format!("damping: {e}"));
            }
        }

        let s = &self.spectrum;
        p.require(s.count > 0, "spectrum.count", "must be positive");
        if let (Some(lo), Some(hi)) = (s.re_min, s.re_max) {
            p.require(lo < hi, "spectrum.re_min", format_args!("must be below spectrum.re_max ({lo} ≥ {hi})"));
        }
        for (v, path) in [(s.re_min, "spectrum.re_min"), (s.re_max, "spectrum.re_max")] {
            if let Some(v) = v {
                p.require(v.is_finite(), path, "must be finite");
            }
        }

        let rv = &self.resolvent;
        p.require(rv.re_min < rv.re_max, "resolvent.re_min", "must be below resolvent.re_max");
        p.require(rv.points >= 3, "resolvent.points", format_args!("must be at least 3 (got {})", rv.points));
        p.require(rv.im.is_finite(), "resolvent.im", "must be finite");

        let w = &self.wave;
        p.finite_positive(w.dt, "wave.dt");
        p.require(w.t_final.is_finite() && w.t_final >= 0.0, "wave.t_final", format_args!("must be nonnegative (got {})", w.t_final));
        p.require(w.stride > 0, "wave.stride", "must be positive");
        match w.initial {
            InitialKind::LowPass => p.finite_positive(w.lambda_cut, "wave.lambda_cut"),
            InitialKind::PointBump => {
                p.in_disk(w.bump_center, "wave.bump_center");
                p.finite_positive(w.bump_width, "wave.bump_width");
            }
            InitialKind::SingleMode | InitialKind::QepMode => {}
        }

        let f = &self.flow;
        p.require(!f.t_grid.is_empty(), "flow.t_grid", "must not be empty");
        for (i, t) in f.t_grid.iter().enumerate() {
            p.finite_positive(*t, &format!("flow.t_grid[{i}]"));
        }
        p.require(
            f.t_grid.windows(2).all(|w| w[1] > w[0]),
            "flow.t_grid",
            "must be strictly increasing",
        );
        p.require(
            f.t_grid.iter().copied().fold(0.0, f64::max) >= 20.0,
            "flow.t_grid",
            "must reach T = 20 for the asymptotic estimates",
        );
        p.require(f.radial > 0 && f.angular > 0 && f.directions > 0, "flow", "radial, angular and directions must be positive");
        p.finite_positive(f.control_length, "flow.control_length");
        p.finite_positive(f.threshold, "flow.threshold");

        let wd = &self.words;
        p.unit_interval(wd.rho, "words.rho");
        p.unit_interval(wd.alpha, "words.alpha");
        p.require(
            wd.kmin >= 1 && wd.kmin <= wd.kmax && wd.kmax <= 1000,
            "words.kmin",
            format_args!("need 1 ≤ kmin ≤ kmax ≤ 1000 (got {}..{})", wd.kmin, wd.kmax),
        );

        p.require(!self.output.directory.is_empty(), "output.directory", "must not be empty");
        if p.0.is_empty() {
            Ok(())
        } else {
            Err(p)
        }
    }

    pub fn refinement(&self) -> usize {
        self.surface.refinement as usize
    }

    pub fn damping_field(&self) -> hyperdamp::Result<DampingField> {
        let d = &self.damping;
        if let Some(v) = d.constant {
            return DampingField::constant(v);
        }
        if let Some(bumps) = &d.bumps {
            return DampingField::bump_sum(
                bumps
                    .iter()
                    .map(|b| Bump {
                        center: Complex::new(b.center[0], b.center[1]),
                        radius: b.radius,
                        height: b.height,
                    })
                    .collect(),
            );
        }
        d.preset.unwrap_or(DampingPreset::SingleBump).field()
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let w = &self.wave;
        EvolveOptions {
            dt: w.dt,
            t_final: w.t_final,
            stride: w.stride,
            integrator: w.integrator,
        }
    }

    pub fn initial_data(&self) -> InitialData {
        let w = &self.wave;
        match w.initial {
            InitialKind::SingleMode => InitialData::SingleMode { index: w.mode_index },
            InitialKind::LowPass => InitialData::LowPass {
                lambda_cut: w.lambda_cut,
                seed: w.seed,
            },
            InitialKind::PointBump => InitialData::PointBump {
                center: w.bump_center,
                width: w.bump_width,
            },
            InitialKind::QepMode => InitialData::QepMode { index: w.mode_index },
        }
    }
}
