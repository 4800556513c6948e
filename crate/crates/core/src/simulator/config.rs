//! Scenario configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! trials = 200
//! tower_processing_delay = 0.0
//!
//! [mobile]
//! x = 120.0
//! y = -45.0
//! z = 0.0
//!
//! [timing]
//! alpha = 0.0
//! mode = "round_trip"
//! clock_resolution = 1e-9
//!
//! [towers]
//! layout = "hex"
//! center = { x = 0.0, y = 0.0, z = 0.0 }
//! radius = 3000.0
//! rings = 1
//!
//! [placement]       # only used by Monte Carlo sweeps
//! radius = 2500.0
//! ```
//!
//! Explicit towers use `layout = "explicit"` with a `[[towers.sites]]` array
//! of `{ id, position = { x, y, z } }` tables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{hex_cell_layout, GeometryError, Point3, TowerSite};
use crate::timing::TimingModel;
use crate::trilateration::ZConvention;

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase", deny_unknown_fields)]
pub enum TowerLayout {
    Hex { center: Point3, radius: f64, rings: u32 },
    Explicit { sites: Vec<TowerSite> },
}

impl TowerLayout {
    pub fn sites(&self) -> Result<Vec<TowerSite>, GeometryError> {
        match self {
            Self::Hex { center, radius, rings } => hex_cell_layout(*center, *radius, *rings),
            Self::Explicit { sites } => Ok(sites.clone()),
        }
    }
}

/// Region from which Monte Carlo trials draw the mobile position: uniform in
/// a horizontal disk around the mobile's configured position, with `z`
/// uniform in `[z_min, z_max]` relative to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub radius: f64,
    #[serde(default)]
    pub z_min: f64,
    #[serde(default)]
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: u32,
    /// Fixed tower-side handling delay added to every acknowledgement, s.
    #[serde(default)]
    pub tower_processing_delay: f64,
    /// Probability that any single packet is dropped. Zero reproduces the
    /// loss-free protocol.
    #[serde(default)]
    pub loss_probability: f64,
    /// Time at which the mobile broadcasts its requests, s.
    #[serde(default)]
    pub start_time: f64,
    #[serde(default)]
    pub z_convention: ZConvention,
    #[serde(default = "default_mobile_id")]
    pub mobile_id: u32,
    pub mobile: Point3,
    #[serde(default)]
    pub timing: TimingModel,
    pub towers: TowerLayout,
    #[serde(default)]
    pub placement: Option<Placement>,
}

fn one() -> u32 {
    1
}

fn default_mobile_id() -> u32 {
    1
}

impl ScenarioConfig {
    pub fn new(towers: TowerLayout, mobile: Point3, timing: TimingModel) -> Self {
        Self {
            seed: 0,
            trials: 1,
            tower_processing_delay: 0.0,
            loss_probability: 0.0,
            start_time: 0.0,
            z_convention: ZConvention::default(),
            mobile_id: default_mobile_id(),
            mobile,
            timing,
            towers,
            placement: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML rendering; comments and layout of the source are not
    /// preserved.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checks every structural requirement and returns the tower list.
    pub fn validate(&self) -> Result<Vec<TowerSite>, SimError> {
        let invalid = |m: String| Err(SimError::InvalidConfig(m));
        let towers = self.towers.sites().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if towers.len() < 3 {
            return invalid(format!("need at least 3 towers, got {}", towers.len()));
        }
        let mut ids = BTreeSet::new();
        for t in &towers {
            if !ids.insert(t.id) {
                return invalid(format!("duplicate tower id {}", t.id));
            }
            if !t.position.is_finite() {
                return invalid(format!("tower {} has a non-finite position", t.id));
            }
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if !self.mobile.is_finite() {
            return invalid("mobile position must be finite".into());
        }
        self.timing.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if !(self.tower_processing_delay >= 0.0) || !self.tower_processing_delay.is_finite() {
            return invalid("tower_processing_delay must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.loss_probability) {
            return invalid("loss_probability must lie in [0, 1)".into());
        }
        if !(self.start_time >= 0.0) || !self.start_time.is_finite() {
            return invalid("start_time must be non-negative".into());
        }
        if let Some(p) = &self.placement {
            if !(p.radius >= 0.0) || !p.radius.is_finite() || !(p.z_min <= p.z_max) {
                return invalid("placement needs radius >= 0 and z_min <= z_max".into());
            }
        }
        Ok(towers)
    }
}
