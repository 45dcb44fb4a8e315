//! Device deployment on an annulus around the gateway and large-scale
//! channel gains (pathloss and log-normal shadowing).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of one device relative to the gateway at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    /// Distance to the gateway in meters.
    pub radius: f64,
    /// Angle in radians, in `[0, 2π)`.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub positions: Vec<Polar>,
}

impl Deployment {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Drops `m` devices uniformly over the area of the annulus `r_min ≤ r ≤ r_max`.
pub fn deploy_nodes<R: Rng + ?Sized>(
    m: usize,
    r_min: f64,
    r_max: f64,
    rng: &mut R,
) -> Result<Deployment> {
    if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
        return Err(Error::Config(format!(
            "annulus radii must satisfy 0 < r_min < r_max (got r_min = {r_min}, r_max = {r_max})"
        )));
    }
    if m == 0 {
        return Err(Error::Config("device count must be at least 1".into()));
    }
    let (a, b) = (r_min * r_min, r_max * r_max);
    let positions = (0..m)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let radius = (a + u * (b - a)).sqrt().clamp(r_min, r_max);
            Polar {
                radius,
                angle: 2.0 * PI * v,
            }
        })
        .collect();
    Ok(Deployment { positions })
}

/// Propagation environment of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Urban microcell street canyon.
    #[serde(alias = "outdoor_umi")]
    Outdoor,
    /// Indoor hotspot (office).
    #[serde(alias = "indoor_inh")]
    Indoor,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Outdoor => "outdoor",
            Scenario::Indoor => "indoor",
        }
    }

    /// Default closed-form pathloss for the scenario.
    pub fn pathloss_model(self) -> PathlossModel {
        match self {
            Scenario::Outdoor => PathlossModel::UMI_STREET_CANYON_NLOS,
            Scenario::Indoor => PathlossModel::INH_OFFICE_NLOS,
        }
    }
}

/// Log-distance pathloss of the form
/// `PL = intercept + distance_slope·log10(d/m) + frequency_slope·log10(f/GHz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossModel {
    pub intercept_db: f64,
    pub distance_slope: f64,
    pub frequency_slope: f64,
}

impl PathlossModel {
    /// TR 38.901 UMi street canyon, NLOS branch.
    pub const UMI_STREET_CANYON_NLOS: PathlossModel = PathlossModel {
        intercept_db: 22.4,
        distance_slope: 35.3,
        frequency_slope: 21.3,
    };
    /// TR 38.901 InH office, NLOS branch.
    pub const INH_OFFICE_NLOS: PathlossModel = PathlossModel {
        intercept_db: 17.30,
        distance_slope: 38.3,
        frequency_slope: 24.9,
    };

    pub fn loss_db(&self, distance_m: f64, carrier_ghz: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::Domain(format!(
                "pathloss distance must be positive (got {distance_m} m)"
            )));
        }
        if !(carrier_ghz > 0.0) {
            return Err(Error::Domain(format!(
                "carrier frequency must be positive (got {carrier_ghz} GHz)"
            )));
        }
        Ok(self.intercept_db
            + self.distance_slope * distance_m.log10()
            + self.frequency_slope * carrier_ghz.log10())
    }
}

/// Pathloss in dB for the default model of `scenario`.
pub fn pathloss_db(scenario: Scenario, distance_m: f64, carrier_ghz: f64) -> Result<f64> {
    scenario.pathloss_model().loss_db(distance_m, carrier_ghz)
}

/// Gaussian shadowing sample in dB.
pub fn draw_shadowing<R: Rng + ?Sized>(mean_db: f64, variance_db2: f64, rng: &mut R) -> Result<f64> {
    if !(variance_db2 >= 0.0) {
        return Err(Error::Domain(format!(
            "shadowing variance must be non-negative (got {variance_db2} dB^2)"
        )));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean_db + variance_db2.sqrt() * z)
}

/// Large-scale part of a link: pathloss plus shadowing, both losses in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleGain {
    pub pathloss_db: f64,
    pub shadowing_db: f64,
}

impl LargeScaleGain {
    pub fn total_loss_db(&self) -> f64 {
        self.pathloss_db + self.shadowing_db
    }

    /// Linear power gain `10^(-(PL+SH)/10)`.
    pub fn power_gain(&self) -> f64 {
        10f64.powf(-self.total_loss_db() / 10.0)
    }

    /// Linear amplitude gain `10^(-(PL+SH)/20)`.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(-self.total_loss_db() / 20.0)
    }
}
