//! Conversion between microwave drive power and spin-frequency modulation
//! amplitude for a resonator with a given power conversion factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hz, to_hz};

/// Electron gyromagnetic ratio, Hz per mT.
pub const GYROMAGNETIC_HZ_PER_MT: f64 = 28e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConversionUnits {
    /// Field per root watt, mT/√W.
    Mt,
    /// Modulation frequency per root watt, Hz/√W.
    Hz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub conversion_factor: f64,
    pub units: ConversionUnits,
    /// Hz per mT; only used with [`ConversionUnits::Mt`].
    pub gyromagnetic: f64,
    /// Drive power, W.
    pub power: f64,
}

impl PowerSpec {
    pub fn new(conversion_factor: f64, units: ConversionUnits) -> Self {
        PowerSpec {
            conversion_factor,
            units,
            gyromagnetic: GYROMAGNETIC_HZ_PER_MT,
            power: 0.0,
        }
    }

    pub fn with_power(mut self, watts: f64) -> Self {
        self.power = watts;
        self
    }

    /// Modulation amplitude per root watt, Hz/√W.
    pub fn hz_per_root_watt(&self) -> f64 {
        match self.units {
            ConversionUnits::Mt => self.conversion_factor * self.gyromagnetic,
            ConversionUnits::Hz => self.conversion_factor,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.conversion_factor >= 0.0) {
            return Err(Error::param("conversion_factor", "must be non-negative"));
        }
        if !(self.gyromagnetic >= 0.0) {
            return Err(Error::param("gyromagnetic", "must be non-negative"));
        }
        Ok(())
    }
}

/// Λ (rad/s) produced by `spec.power`.
pub fn modulation_amplitude_from_power(spec: &PowerSpec) -> Result<f64> {
    spec.validate()?;
    if !(spec.power >= 0.0) {
        return Err(Error::param("power", format!("must be non-negative, got {}", spec.power)));
    }
    Ok(hz(spec.hz_per_root_watt() * spec.power.sqrt()))
}

/// Power (W) needed for a modulation amplitude `target_lambda` (rad/s).
pub fn required_power(target_lambda: f64, spec: &PowerSpec) -> Result<f64> {
    spec.validate()?;
    let per_root_watt = spec.hz_per_root_watt();
    if !(per_root_watt > 0.0) {
        return Err(Error::param("conversion_factor", "must be positive"));
    }
    if !(target_lambda >= 0.0) {
        return Err(Error::param("lambda", "must be non-negative"));
    }
    Ok((to_hz(target_lambda) / per_root_watt).powi(2))
}
