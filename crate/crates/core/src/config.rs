//! Scalar system parameters shared by every experiment.

use crate::error::{Error, Result};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.381e-23;
/// Standard noise temperature (K).
pub const NOISE_TEMPERATURE_K: f64 = 290.0;

/// Which normalized power multiplies the signal and interference terms of the
/// uplink SINR expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SinrPower {
    /// Pilot SNR, as the closed-form SINR is usually printed.
    #[default]
    Pilot,
    /// Uplink data SNR.
    Uplink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of single-antenna access points (L).
    pub n_aps: usize,
    /// Number of single-antenna users (K).
    pub n_users: usize,
    /// Pilot length in symbols.
    pub tau: usize,
    /// Side of the square deployment area (m).
    pub side_m: f64,
    /// Lower path-loss breakpoint (m).
    pub d0_m: f64,
    /// Upper path-loss breakpoint (m).
    pub d1_m: f64,
    pub carrier_mhz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub h_ap_m: f64,
    pub h_ue_m: f64,
    /// Log-normal shadowing standard deviation (dB).
    pub sigma_sh_db: f64,
    pub p_pilot_w: f64,
    pub p_uplink_w: f64,
    /// Coherence frame length in symbols (T).
    pub frame_len: usize,
    /// Per-user power control coefficients; empty means full power for all.
    pub eta: Vec<f64>,
    /// Overrides the path-loss constant when set.
    pub pathloss_const_db: Option<f64>,
    /// Apply shadowing at every distance instead of only beyond `d1_m`.
    pub shadowing_everywhere: bool,
    pub sinr_power: SinrPower,
    /// Uplink share of the frame in the net-throughput formula.
    pub duplex_factor: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_aps: 40,
            n_users: 20,
            tau: 10,
            side_m: 1000.0,
            d0_m: 10.0,
            d1_m: 50.0,
            carrier_mhz: 1900.0,
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            h_ap_m: 15.0,
            h_ue_m: 1.65,
            sigma_sh_db: 8.0,
            p_pilot_w: 0.1,
            p_uplink_w: 0.1,
            frame_len: 200,
            eta: Vec::new(),
            pathloss_const_db: None,
            shadowing_everywhere: false,
            sinr_power: SinrPower::Pilot,
            duplex_factor: 0.5,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_aps < 1 {
            return bad("n_aps must be >= 1".into());
        }
        if self.n_users < 1 {
            return bad("n_users must be >= 1".into());
        }
        if self.tau < 1 || self.tau > self.frame_len {
            return bad(format!(
                "tau must satisfy 1 <= tau <= frame_len (tau = {}, frame_len = {})",
                self.tau, self.frame_len
            ));
        }
        if !(self.d0_m > 0.0 && self.d0_m < self.d1_m && self.d1_m < self.side_m) {
            return bad(format!(
                "breakpoints must satisfy 0 < d0 < d1 < side (d0 = {}, d1 = {}, side = {})",
                self.d0_m, self.d1_m, self.side_m
            ));
        }
        for (name, v) in [
            ("p_pilot_w", self.p_pilot_w),
            ("p_uplink_w", self.p_uplink_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_mhz", self.carrier_mhz),
            ("h_ap_m", self.h_ap_m),
            ("h_ue_m", self.h_ue_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite (got {v})"));
            }
        }
        if !(self.sigma_sh_db >= 0.0 && self.sigma_sh_db.is_finite()) {
            return bad(format!("sigma_sh_db must be >= 0 (got {})", self.sigma_sh_db));
        }
        if !self.noise_figure_db.is_finite() {
            return bad("noise_figure_db must be finite".into());
        }
        if !(self.duplex_factor > 0.0 && self.duplex_factor <= 1.0) {
            return bad(format!("duplex_factor must lie in (0, 1] (got {})", self.duplex_factor));
        }
        if !self.eta.is_empty() {
            if self.eta.len() != self.n_users {
                return bad(format!(
                    "eta has {} entries but n_users = {}",
                    self.eta.len(),
                    self.n_users
                ));
            }
            if let Some(e) = self.eta.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
                return bad(format!("eta entries must lie in (0, 1] (got {e})"));
            }
        }
        Ok(())
    }

    /// Power control coefficient of user `k`.
    pub fn eta_k(&self, k: usize) -> f64 {
        self.eta.get(k).copied().unwrap_or(1.0)
    }

    /// Receiver noise power `B * k_B * T0 * NF` in watts.
    pub fn noise_power_w(&self) -> f64 {
        self.bandwidth_hz * BOLTZMANN * NOISE_TEMPERATURE_K * 10f64.powf(self.noise_figure_db / 10.0)
    }

    /// Normalized pilot SNR (transmit power over noise power).
    pub fn rho_pilot(&self) -> f64 {
        self.p_pilot_w / self.noise_power_w()
    }

    /// Normalized uplink data SNR.
    pub fn rho_uplink(&self) -> f64 {
        self.p_uplink_w / self.noise_power_w()
    }

    /// SNR used by the signal and interference terms of the SINR.
    pub fn rho_sinr(&self) -> f64 {
        match self.sinr_power {
            SinrPower::Pilot => self.rho_pilot(),
            SinrPower::Uplink => self.rho_uplink(),
        }
    }

    /// COST-231 Hata constant for the configured carrier and antenna heights.
    ///
    /// The formula is stated for distances in kilometres; the path-loss law in
    /// [`crate::sysmodel::path_loss_db`] takes metres, so the default constant
    /// subtracts `35 * log10(1000) = 105 dB` to keep the same attenuation.
    pub fn cost231_constant_db(&self) -> f64 {
        let lf = self.carrier_mhz.log10();
        46.3 + 33.9 * lf - 13.82 * self.h_ap_m.log10() - (1.1 * lf - 0.7) * self.h_ue_m
            + (1.56 * lf - 0.8)
    }

    /// Path-loss constant applied to distances in metres.
    pub fn pathloss_const_db(&self) -> f64 {
        self.pathloss_const_db
            .unwrap_or_else(|| self.cost231_constant_db() - 105.0)
    }

    /// Copy with a different user count; explicit `eta` is resized with ones.
    pub fn with_users(&self, n_users: usize) -> Self {
        let mut c = self.clone();
        c.n_users = n_users;
        if !c.eta.is_empty() {
            c.eta.resize(n_users, 1.0);
        }
        c
    }
}
