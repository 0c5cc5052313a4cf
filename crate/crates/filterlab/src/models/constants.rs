//! Physical constants, loaded from the documented key-value text file
//! embedded at `crates/filterlab/constants.txt`.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const EMBEDDED: &str = include_str!("../../constants.txt");

/// Every physical parameter the models consume.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConstants {
    pub mu_moon: f64,
    pub mu_earth: f64,
    pub earth_moon_distance: f64,
    pub lunar_radius: f64,
    pub arcsec_rad: f64,
    pub nrho_table1_state: [f64; 6],
    pub nrho_period: f64,
    pub nrho_cr3bp_state: [f64; 6],
    pub nrho_cr3bp_period: f64,
    pub lorenz_sigma: f64,
    pub lorenz_rho: f64,
    pub lorenz_beta: f64,
    pub lorenz_dt: f64,
    pub lorenz_r: f64,
}

impl PhysicalConstants {
    /// Circular angular rate of the Earth-Moon pair about their barycenter.
    pub fn earth_moon_rate(&self) -> f64 {
        ((self.mu_earth + self.mu_moon) / self.earth_moon_distance.powi(3)).sqrt()
    }

    /// Parses the key-value constants format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: HashMap<&str, Vec<f64>> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("constants line {}: missing '='", lineno + 1))
            })?;
            let values = value
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidConfig(format!(
                            "constants line {}: bad number {:?}",
                            lineno + 1,
                            v.trim()
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            map.insert(key.trim(), values);
        }

        let scalar = |key: &str| -> Result<f64> {
            map.get(key)
                .filter(|v| v.len() == 1)
                .map(|v| v[0])
                .ok_or_else(|| Error::InvalidConfig(format!("constants: missing scalar {key}")))
        };
        let state6 = |key: &str| -> Result<[f64; 6]> {
            let v = map
                .get(key)
                .filter(|v| v.len() == 6)
                .ok_or_else(|| Error::InvalidConfig(format!("constants: missing 6-vector {key}")))?;
            Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
        };

        Ok(Self {
            mu_moon: scalar("mu_moon")?,
            mu_earth: scalar("mu_earth")?,
            earth_moon_distance: scalar("earth_moon_distance")?,
            lunar_radius: scalar("lunar_radius")?,
            arcsec_rad: scalar("arcsec_rad")?,
            nrho_table1_state: state6("nrho_table1_state")?,
            nrho_period: scalar("nrho_period")?,
            nrho_cr3bp_state: state6("nrho_cr3bp_state")?,
            nrho_cr3bp_period: scalar("nrho_cr3bp_period")?,
            lorenz_sigma: scalar("lorenz_sigma")?,
            lorenz_rho: scalar("lorenz_rho")?,
            lorenz_beta: scalar("lorenz_beta")?,
            lorenz_dt: scalar("lorenz_dt")?,
            lorenz_r: scalar("lorenz_r")?,
        })
    }

    /// The embedded defaults.
    pub fn default_set() -> &'static PhysicalConstants {
        static CONSTANTS: OnceLock<PhysicalConstants> = OnceLock::new();
        CONSTANTS.get_or_init(|| {
            PhysicalConstants::parse(EMBEDDED).expect("embedded constants file parses")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn embedded_constants_parse() {
        let c = PhysicalConstants::default_set();
        assert_abs_diff_eq!(c.mu_moon, 4.9048695e12, epsilon = 0.0);
        assert_abs_diff_eq!(c.lorenz_beta, 8.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(c.arcsec_rad, std::f64::consts::PI / 648000.0, epsilon = 1e-20);
        assert!(c.earth_moon_rate() > 2.6e-6 && c.earth_moon_rate() < 2.7e-6);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        assert!(PhysicalConstants::parse("mu_moon 4e12").is_err());
        assert!(PhysicalConstants::parse("mu_moon = abc").is_err());
    }
}
