//! Experiment configuration: one TOML file, every section optional, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, Method};
use crate::channel::{db_to_linear, dbm_to_watts, RadioParams};
use crate::error::{Error, Result};
use crate::link::{BeamLimits, LinkParams};
use crate::linalg::Vec3;
use crate::localization::LocalizationParams;
use crate::optimizer::OptimizerConfig;
use crate::oracles::OracleSettings;
use crate::scenario::{LinearPass, MotionNoise, NodeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Method x velocity x power matrix.
    #[default]
    Sweep,
    /// Average SE against a fixed data length, pilots held fixed.
    TdCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub antenna_gain: f64,
    pub beta0_db: f64,
    pub noise_dbm: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub effective_bandwidth_hz: f64,
    /// Squared baseband-carrier correlation.
    pub chi_sq: f64,
    pub kappa: f64,
    pub symbol_period_s: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let r = RadioParams::default();
        RadioSection {
            antenna_gain: r.antenna_gain,
            beta0_db: -80.0,
            noise_dbm: -110.0,
            carrier_hz: r.carrier_hz,
            bandwidth_hz: r.bandwidth_hz,
            effective_bandwidth_hz: r.effective_bandwidth_hz,
            chi_sq: 0.32,
            kappa: r.kappa,
            symbol_period_s: r.symbol_period,
        }
    }
}

impl RadioSection {
    pub fn resolve(&self) -> Result<RadioParams> {
        if !(self.chi_sq >= 0.0) {
            return Err(Error::Config(format!("radio.chi_sq must be >= 0, got {}", self.chi_sq)));
        }
        let r = RadioParams {
            antenna_gain: self.antenna_gain,
            beta0: db_to_linear(self.beta0_db),
            noise_power: dbm_to_watts(self.noise_dbm),
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            effective_bandwidth_hz: self.effective_bandwidth_hz,
            chi: self.chi_sq.sqrt(),
            kappa: self.kappa,
            symbol_period: self.symbol_period_s,
        };
        r.validate().map_err(|e| Error::Config(format!("[radio] {e}")))?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub gamma_th_db: f64,
    pub td_cap_symbols: u32,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            gamma_th_db: 3.0,
            td_cap_symbols: LinkParams::default().td_cap_symbols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    pub min_deg: f64,
    pub max_deg: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        BeamSection {
            min_deg: 5.0,
            max_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationSection {
    pub array_factor: f64,
    pub elevation_scale: f64,
    pub azimuth_scale: f64,
    pub conf_scale: f64,
    pub prior_std_m: f64,
    pub uav_sigma_m: [f64; 3],
    pub gn_sigma_m: [f64; 3],
}

impl Default for LocalizationSection {
    fn default() -> Self {
        let l = LocalizationParams::default();
        LocalizationSection {
            array_factor: l.array_factor,
            elevation_scale: l.elevation_scale,
            azimuth_scale: l.azimuth_scale,
            conf_scale: l.conf_scale,
            prior_std_m: l.prior_std,
            uav_sigma_m: l.uav_noise.sigmas(),
            gn_sigma_m: l.gn_noise.sigmas(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Scenario box, m.
    pub area_m: [f64; 3],
    pub uav_start_m: [f64; 3],
    pub gn_m: [f64; 3],
    /// UAV direction of travel; the ground node is static.
    pub heading: [f64; 3],
    /// Spacing of consecutive frames along the pass, symbols.
    pub frame_period_symbols: u32,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            area_m: [1000.0, 200.0, 100.0],
            uav_start_m: [0.0, 100.0, 100.0],
            gn_m: [100.0, 100.0, 0.0],
            heading: [1.0, 0.0, 0.0],
            frame_period_symbols: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdSweepSection {
    pub pilots: u32,
    pub data_min: u32,
    pub data_max: u32,
}

impl Default for TdSweepSection {
    fn default() -> Self {
        TdSweepSection {
            pilots: 5,
            data_min: 1,
            data_max: 200,
        }
    }
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentFile {
    pub name: String,
    pub description: String,
    pub kind: ExperimentKind,
    pub methods: Vec<Method>,
    pub velocities_mps: Vec<f64>,
    pub p_max_w: Vec<f64>,
    pub frames: usize,
    pub seed: u64,
    pub radio: RadioSection,
    pub link: LinkSection,
    pub beam: BeamSection,
    pub localization: LocalizationSection,
    pub geometry: GeometrySection,
    pub optimizer: OptimizerConfig,
    pub baselines: BaselineConfig,
    pub td_sweep: TdSweepSection,
    pub validate: OracleSettings,
}

impl Default for ExperimentFile {
    fn default() -> Self {
        ExperimentFile {
            name: "experiment".into(),
            description: String::new(),
            kind: ExperimentKind::Sweep,
            methods: vec![Method::Proposed],
            velocities_mps: vec![50.0],
            p_max_w: vec![4.0],
            frames: 100,
            seed: 1,
            radio: RadioSection::default(),
            link: LinkSection::default(),
            beam: BeamSection::default(),
            localization: LocalizationSection::default(),
            geometry: GeometrySection::default(),
            optimizer: OptimizerConfig::default(),
            baselines: BaselineConfig::default(),
            td_sweep: TdSweepSection::default(),
            validate: OracleSettings::default(),
        }
    }
}

/// Validated configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub methods: Vec<Method>,
    pub velocities: Vec<f64>,
    pub p_max: Vec<f64>,
    pub frames: usize,
    pub seed: u64,
    pub radio: RadioParams,
    pub link: LinkParams,
    pub beam: BeamLimits,
    pub localization: LocalizationParams,
    pub geometry: GeometrySection,
    pub optimizer: OptimizerConfig,
    pub baselines: BaselineConfig,
    pub td_sweep: TdSweepSection,
    pub oracles: OracleSettings,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let cfg = |section: &str, e: Error| Error::Config(format!("[{section}] {e}"));
        let radio = self.radio.resolve()?;
        let link = LinkParams {
            gamma_th: db_to_linear(self.link.gamma_th_db),
            td_cap_symbols: self.link.td_cap_symbols,
        };
        link.validate().map_err(|e| cfg("link", e))?;
        let beam = BeamLimits {
            min: self.beam.min_deg.to_radians(),
            max: self.beam.max_deg.to_radians(),
        };
        beam.validate().map_err(|e| cfg("beam", e))?;
        let l = &self.localization;
        let noise = |s: [f64; 3]| MotionNoise::new(s[0], s[1], s[2]);
        let localization = LocalizationParams {
            array_factor: l.array_factor,
            elevation_scale: l.elevation_scale,
            azimuth_scale: l.azimuth_scale,
            conf_scale: l.conf_scale,
            prior_std: l.prior_std_m,
            uav_noise: noise(l.uav_sigma_m).map_err(|e| cfg("localization", e))?,
            gn_noise: noise(l.gn_sigma_m).map_err(|e| cfg("localization", e))?,
        };
        localization.validate().map_err(|e| cfg("localization", e))?;
        self.optimizer.validate().map_err(|e| cfg("optimizer", e))?;
        self.baselines.validate().map_err(|e| cfg("baselines", e))?;
        if let Some(b) = self.baselines.fixed_beamwidth {
            if !beam.contains(b) {
                return Err(Error::Config(format!(
                    "[baselines] fixed_beamwidth {b} rad lies outside the beam limits"
                )));
            }
        }

        let g = &self.geometry;
        for (label, p) in [("uav_start_m", g.uav_start_m), ("gn_m", g.gn_m)] {
            if p.iter().zip(g.area_m).any(|(x, hi)| !(*x >= 0.0 && *x <= hi)) {
                return Err(Error::Config(format!(
                    "[geometry] {label} {p:?} lies outside the scenario box {:?}",
                    g.area_m
                )));
            }
        }
        if !(g.uav_start_m[2] > g.gn_m[2]) {
            return Err(Error::Config("[geometry] the UAV must fly above the ground node".into()));
        }
        if Vec3(g.heading).norm() == 0.0 {
            return Err(Error::Config("[geometry] heading must be non-zero".into()));
        }
        if g.frame_period_symbols == 0 {
            return Err(Error::Config("[geometry] frame_period_symbols must be >= 1".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be >= 1".into()));
        }
        if let Some(v) = self.velocities_mps.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("velocities_mps entries must be >= 0, got {v}")));
        }
        if let Some(p) = self.p_max_w.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::Config(format!("p_max_w entries must be > 0, got {p}")));
        }
        let t = &self.td_sweep;
        if t.pilots == 0 || t.data_min == 0 || t.data_min > t.data_max {
            return Err(Error::Config(
                "[td_sweep] needs pilots >= 1 and 1 <= data_min <= data_max".into(),
            ));
        }
        if self.validate.mc_trials == 0 {
            return Err(Error::Config("[validate] mc_trials must be >= 1".into()));
        }

        Ok(ExperimentConfig {
            name: self.name.clone(),
            kind: self.kind,
            methods: self.methods.clone(),
            velocities: self.velocities_mps.clone(),
            p_max: self.p_max_w.clone(),
            frames: self.frames,
            seed: self.seed,
            radio,
            link,
            beam,
            localization,
            geometry: self.geometry,
            optimizer: self.optimizer,
            baselines: self.baselines,
            td_sweep: self.td_sweep,
            oracles: self.validate,
        })
    }
}

impl ExperimentConfig {
    /// Straight pass with the UAV moving at `speed` along the heading.
    pub fn pass(&self, speed: f64) -> LinearPass {
        let g = &self.geometry;
        let heading = Vec3(g.heading);
        LinearPass::new(
            NodeState::new(Vec3(g.uav_start_m), heading.scale(speed / heading.norm())),
            NodeState::stationary(Vec3(g.gn_m)),
        )
    }
}
