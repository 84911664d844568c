//! First-order radio energy model.
//!
//! Transmit cost per bit is an electronics term plus an amplifier term that
//! grows with d^2 (free space) below the crossover distance and d^4
//! (multipath) above it. Receive cost is electronics only. A separate
//! single-exponent amplifier form gives the distance beyond which relaying
//! through a midpoint node is cheaper than a direct hop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioModelParams {
    /// Transmit electronics, J/bit.
    pub e_t_elec: f64,
    /// Receive electronics, J/bit.
    pub e_r_elec: f64,
    /// Free-space amplifier, J/bit/m^2.
    pub eps_fs: f64,
    /// Multipath amplifier, J/bit/m^4.
    pub eps_mp: f64,
    /// Amplifier coefficient of the single-exponent form, J/bit/m^alpha.
    pub eps_amp: f64,
    /// Path-loss exponent of the single-exponent form.
    pub alpha_pl: f64,
    /// Crossover distance. `None` places it where both branches agree.
    pub d0: Option<f64>,
}

impl Default for RadioModelParams {
    fn default() -> Self {
        Self {
            e_t_elec: 50e-9,
            e_r_elec: 50e-9,
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
            eps_amp: 100e-12,
            alpha_pl: 2.0,
            d0: None,
        }
    }
}

impl RadioModelParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("e_t_elec", self.e_t_elec),
            ("e_r_elec", self.e_r_elec),
            ("eps_fs", self.eps_fs),
            ("eps_mp", self.eps_mp),
            ("eps_amp", self.eps_amp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("radio.{name} = {v}: must be > 0"));
            }
        }
        if !(self.alpha_pl > 1.0 && self.alpha_pl.is_finite()) {
            out.push(format!("radio.alpha_pl = {}: must be > 1", self.alpha_pl));
        }
        if let Some(d0) = self.d0 {
            if !(d0 > 0.0 && d0.is_finite()) {
                out.push(format!("radio.d0 = {d0}: must be > 0"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Crossover between the free-space and multipath branches.
    pub fn crossover(&self) -> f64 {
        self.d0.unwrap_or_else(|| (self.eps_fs / self.eps_mp).sqrt())
    }
}

pub fn tx_energy_per_bit(d: f64, params: &RadioModelParams) -> Result<f64> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::arg("d", d, "distance must be finite and >= 0"));
    }
    params.validate()?;
    Ok(if d < params.crossover() {
        params.e_t_elec + params.eps_fs * d * d
    } else {
        params.e_t_elec + params.eps_mp * d.powi(4)
    })
}

pub fn rx_energy_per_bit(params: &RadioModelParams) -> Result<f64> {
    params.validate()?;
    Ok(params.e_r_elec)
}

/// Distance above which an intermediate relay saves energy.
pub fn relay_threshold(params: &RadioModelParams) -> Result<f64> {
    let a = params.alpha_pl;
    let shrink = 1.0 - 2f64.powf(1.0 - a);
    if !(a > 1.0) || !(shrink > 0.0) {
        return Err(Error::arg("alpha_pl", a, "path-loss exponent must be > 1"));
    }
    params.validate()?;
    Ok(((params.e_t_elec + params.e_r_elec) / (shrink * params.eps_amp)).powf(1.0 / a))
}

/// Per-bit transmit cost under the single-exponent amplifier form.
pub fn amp_tx_energy_per_bit(d: f64, params: &RadioModelParams) -> f64 {
    params.e_t_elec + params.eps_amp * d.powf(params.alpha_pl)
}

/// Direct hop over `d`: one transmission, one reception.
pub fn one_hop_cost(d: f64, params: &RadioModelParams) -> f64 {
    amp_tx_energy_per_bit(d, params) + params.e_r_elec
}

/// Two equal hops through a midpoint relay.
pub fn two_hop_cost(d: f64, params: &RadioModelParams) -> f64 {
    2.0 * amp_tx_energy_per_bit(d / 2.0, params) + 2.0 * params.e_r_elec
}

/// Energy to send one packet of `bits` over `d` meters.
pub fn packet_tx_energy(bits: f64, d: f64, params: &RadioModelParams) -> Result<f64> {
    Ok(bits * tx_energy_per_bit(d, params)?)
}
