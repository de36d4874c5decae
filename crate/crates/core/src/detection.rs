//! Uplink data detection and the BER harness.
//!
//! The received block at the APs is `y = H x + w` with `w ~ CN(0, sigma^2 I)`.
//! Column `k` of `H` is `sqrt(rho_u eta_k)` times the (true or estimated)
//! channel of user `k`. Estimation error is carried per entry in
//! [`EffectiveChannel::est_err_var`] and enters every detector that models the
//! noise covariance through `C = diag(sigma^2 + D_l)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};
use crate::metrics::{estimate_channels, EstimationStats};
use crate::pilots::{assign_random, make_basis, BasisFlavor};
use crate::seed::trial_rng;
use crate::sysmodel::{complex_normal, draw_channel, draw_drop};
use crate::{CMatrix, CVector, Complex64, RMatrix, SystemConfig};

/// Largest exhaustive search accepted by [`map_oracle`].
pub const MAP_SEARCH_CAP: u128 = 1_000_000;

/// Gray-mapped QPSK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    energy: f64,
}

impl Constellation {
    pub fn qpsk(energy: f64) -> Result<Self> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::Domain(format!("symbol energy must be positive (got {energy})")));
        }
        Ok(Self { energy })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Per-axis amplitude `sqrt(E_S / 2)`.
    pub fn amplitude(&self) -> f64 {
        (self.energy / 2.0).sqrt()
    }

    /// Points indexed by the bit pair `b0 b1`: bit 0 selects the sign of the
    /// real part and bit 1 the sign of the imaginary part (0 is positive).
    pub fn points(&self) -> [Complex64; 4] {
        let a = self.amplitude();
        [Complex64::new(a, a), Complex64::new(a, -a), Complex64::new(-a, a), Complex64::new(-a, -a)]
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if !bits.len().is_multiple_of(2) {
            return Err(Error::Domain(format!("odd bit count {}", bits.len())));
        }
        let p = self.points();
        Ok(bits.chunks_exact(2).map(|b| p[(2 * (b[0] & 1) + (b[1] & 1)) as usize]).collect())
    }

    /// Nearest-point decisions.
    pub fn slice(&self, x: Complex64) -> Complex64 {
        let a = self.amplitude();
        Complex64::new(if x.re >= 0.0 { a } else { -a }, if x.im >= 0.0 { a } else { -a })
    }

    pub fn demodulate(&self, symbols: &[Complex64]) -> Vec<u8> {
        symbols.iter().flat_map(|x| [u8::from(x.re < 0.0), u8::from(x.im < 0.0)]).collect()
    }

    /// Posterior mean and variance of a symbol observed as `x + CN(0, var)`
    /// with value `obs`.
    pub fn denoise(&self, obs: Complex64, var: f64) -> (Complex64, f64) {
        let a = self.amplitude();
        let m = Complex64::new(a * (2.0 * a * obs.re / var).tanh(), a * (2.0 * a * obs.im / var).tanh());
        (m, (self.energy - m.norm_sqr()).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub h: CMatrix,
    pub noise_var: f64,
    /// Residual error variance of each entry of `h` (zero for perfect CSI).
    pub est_err_var: RMatrix,
}

impl EffectiveChannel {
    pub fn perfect(h: CMatrix, noise_var: f64) -> Result<Self> {
        let (l, k) = h.shape();
        Self::new(h, noise_var, RMatrix::zeros(l, k))
    }

    pub fn new(h: CMatrix, noise_var: f64, est_err_var: RMatrix) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::Domain(format!("noise variance must be positive (got {noise_var})")));
        }
        if est_err_var.shape() != h.shape() {
            return Err(shape_err(h.shape(), est_err_var.shape()));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
            || est_err_var.iter().any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Domain("channel entries must be finite".into()));
        }
        Ok(Self { h, noise_var, est_err_var })
    }

    /// Channel from estimates: column `k` is `sqrt(rho_u eta_k) g_hat_k`, and
    /// the residual variances are scaled the same way.
    pub fn from_estimate(g_hat: &CMatrix, stats: &EstimationStats, rho_u: f64, eta: &[f64]) -> Result<Self> {
        let amp = |k: usize| rho_u * eta.get(k).copied().unwrap_or(1.0);
        let mut h = g_hat.clone();
        let mut err = stats.err_var.clone();
        for k in 0..h.ncols() {
            h.column_mut(k).scale_mut(amp(k).sqrt());
            err.column_mut(k).scale_mut(amp(k));
        }
        Self::new(h, 1.0, err)
    }

    pub fn n_aps(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }

    /// `sigma^2 + D_l` with `D_l = sum_k est_err_var[l, k]`.
    pub fn noise_per_ap(&self) -> Vec<f64> {
        (0..self.n_aps()).map(|l| self.noise_var + self.est_err_var.row(l).sum()).collect()
    }

    fn check_y(&self, y: &CVector) -> Result<()> {
        if y.len() != self.n_aps() {
            return Err(shape_err((self.n_aps(), 1), (y.len(), 1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub x_hat: Vec<Complex64>,
    pub hard: Vec<Complex64>,
    pub bits: Vec<u8>,
}

impl DetectionResult {
    fn from_soft(x_hat: Vec<Complex64>, c: &Constellation) -> Self {
        let hard: Vec<Complex64> = x_hat.iter().map(|&x| c.slice(x)).collect();
        let bits = c.demodulate(&hard);
        Self { x_hat, hard, bits }
    }
}

/// Matched-filter statistic `sum_l conj(g_hat_lk) y_l / norm_k`.
///
/// `norm_k` is typically `sqrt(rho_u eta_k) sum_l gamma_lk`, see
/// [`mr_normalization`].
pub fn mr_combine(g_hat: &CMatrix, y: &CVector, norm: &[f64], c: &Constellation) -> Result<DetectionResult> {
    if y.len() != g_hat.nrows() {
        return Err(shape_err((g_hat.nrows(), 1), (y.len(), 1)));
    }
    if norm.len() != g_hat.ncols() {
        return Err(shape_err((g_hat.ncols(), 1), (norm.len(), 1)));
    }
    let r = g_hat.ad_mul(y);
    Ok(DetectionResult::from_soft(r.iter().zip(norm).map(|(v, n)| v / n).collect(), c))
}

pub fn mr_normalization(gamma: &RMatrix, rho_u: f64, eta: &[f64]) -> Vec<f64> {
    (0..gamma.ncols())
        .map(|k| (rho_u * eta.get(k).copied().unwrap_or(1.0)).sqrt() * gamma.column(k).sum())
        .collect()
}

/// Whitened Gram and matched output: `H^H C^-1 H` and `H^H C^-1 y`.
fn whitened(ch: &EffectiveChannel, y: &CVector) -> (CMatrix, CVector) {
    let w: Vec<f64> = ch.noise_per_ap().iter().map(|v| 1.0 / v).collect();
    let hw = CMatrix::from_fn(ch.n_aps(), ch.n_users(), |l, k| ch.h[(l, k)] * w[l]);
    (hw.ad_mul(&ch.h), hw.ad_mul(y))
}

/// Solves the Hermitian positive definite system `a x = b`.
fn hpd_solve(a: CMatrix, b: &CVector) -> Result<CVector> {
    a.cholesky().map(|c| c.solve(b)).ok_or(Error::Singular)
}

/// Linear MMSE estimate `(H^H C^-1 H + I / E_S)^-1 H^H C^-1 y`.
///
/// With perfect CSI `C = sigma^2 I` and this equals
/// `(H^H H + sigma^2 / E_S I)^-1 H^H y`.
pub fn lmmse_detect(ch: &EffectiveChannel, y: &CVector, c: &Constellation) -> Result<DetectionResult> {
    ch.check_y(y)?;
    let (mut a, b) = whitened(ch, y);
    for k in 0..ch.n_users() {
        a[(k, k)] += 1.0 / c.energy();
    }
    let x = hpd_solve(a, &b)?;
    Ok(DetectionResult::from_soft(x.iter().copied().collect(), c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpConfig {
    pub iterations: usize,
    /// Weight of the new site parameters in the damped update.
    pub damping: f64,
    pub var_floor: f64,
}

impl Default for EpConfig {
    fn default() -> Self {
        Self { iterations: 10, damping: 0.7, var_floor: 1e-8 }
    }
}

/// Expectation propagation with Gaussian sites `exp(-lambda |x|^2 + 2 Re(conj(gamma) x))`.
///
/// Each iteration forms the Gaussian posterior (observation module), removes
/// the site of every symbol to get its cavity, matches the moments of the
/// QPSK-constrained cavity (estimation module) and refreshes the sites with
/// damping. Sites start uninformative (`lambda = 1 / E_S`, `gamma = 0`), so
/// one iteration returns the LMMSE estimate. The output is the posterior mean
/// of the last observation module.
pub fn ep_detect(ch: &EffectiveChannel, y: &CVector, c: &Constellation, cfg: &EpConfig) -> Result<DetectionResult> {
    ch.check_y(y)?;
    if cfg.iterations < 1 || !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidConfig("EP needs >= 1 iteration and damping in (0, 1]".into()));
    }
    let k_count = ch.n_users();
    let (gram, mf) = whitened(ch, y);
    let mut lambda = vec![1.0 / c.energy(); k_count];
    let mut gamma = vec![Complex64::new(0.0, 0.0); k_count];
    let mut mu = CVector::zeros(k_count);
    for t in 0..cfg.iterations {
        let mut a = gram.clone();
        for k in 0..k_count {
            a[(k, k)] += lambda[k];
        }
        let chol = a.cholesky().ok_or(Error::Singular)?;
        let sigma = chol.inverse();
        mu = &sigma * (&mf + DVector::from_column_slice(&gamma));
        if t + 1 == cfg.iterations {
            break;
        }
        for k in 0..k_count {
            let s = sigma[(k, k)].re;
            let h2 = s / (1.0 - s * lambda[k]);
            if !(h2 > 0.0 && h2.is_finite()) {
                continue;
            }
            let t_k = (mu[k] / s - gamma[k]) * h2;
            let (pm, pv) = c.denoise(t_k, h2);
            let pv = pv.max(cfg.var_floor);
            let new_lambda = 1.0 / pv - 1.0 / h2;
            if new_lambda <= 0.0 {
                continue;
            }
            let new_gamma = pm / pv - t_k / h2;
            lambda[k] = cfg.damping * new_lambda + (1.0 - cfg.damping) * lambda[k];
            gamma[k] = new_gamma * cfg.damping + gamma[k] * (1.0 - cfg.damping);
        }
    }
    Ok(DetectionResult::from_soft(mu.iter().copied().collect(), c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GabpConfig {
    pub iterations: usize,
    /// Weight of the fresh denoiser output in the damped update.
    pub damping: f64,
    pub var_floor: f64,
}

impl Default for GabpConfig {
    fn default() -> Self {
        Self { iterations: 20, damping: 0.5, var_floor: 1e-12 }
    }
}

/// Per-edge soft replicas and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GabpState {
    pub x_hat: CMatrix,
    pub var: RMatrix,
    pub iteration: usize,
}

impl GabpState {
    pub fn new(n_aps: usize, n_users: usize, c: &Constellation) -> Self {
        Self {
            x_hat: CMatrix::zeros(n_aps, n_users),
            var: RMatrix::from_element(n_aps, n_users, c.energy()),
            iteration: 0,
        }
    }
}

/// Soft interference cancellation outputs for every edge.
struct SicOutput {
    r: CMatrix,
    var: RMatrix,
}

fn gabp_sic(ch: &EffectiveChannel, y: &CVector, noise: &[f64], st: &GabpState, floor: f64) -> SicOutput {
    let (l_count, k_count) = (ch.n_aps(), ch.n_users());
    let mut r = CMatrix::zeros(l_count, k_count);
    let mut var = RMatrix::zeros(l_count, k_count);
    for l in 0..l_count {
        let mut total = Complex64::new(0.0, 0.0);
        let mut total_var = 0.0;
        for e in 0..k_count {
            let h = ch.h[(l, e)];
            total += h * st.x_hat[(l, e)];
            total_var += h.norm_sqr() * st.var[(l, e)];
        }
        for k in 0..k_count {
            let h = ch.h[(l, k)];
            r[(l, k)] = y[l] - total + h * st.x_hat[(l, k)];
            var[(l, k)] = (total_var - h.norm_sqr() * st.var[(l, k)] + noise[l]).max(floor);
        }
    }
    SicOutput { r, var }
}

/// One GaBP iteration: cancellation, extrinsic beliefs, denoising and damping.
/// Returns the cancellation outputs used in this iteration.
fn gabp_iterate(
    ch: &EffectiveChannel,
    y: &CVector,
    noise: &[f64],
    c: &Constellation,
    cfg: &GabpConfig,
    st: &mut GabpState,
) -> SicOutput {
    let sic = gabp_sic(ch, y, noise, st, cfg.var_floor);
    for k in 0..ch.n_users() {
        let mut prec = 0.0;
        let mut num = Complex64::new(0.0, 0.0);
        for l in 0..ch.n_aps() {
            let h = ch.h[(l, k)];
            prec += h.norm_sqr() / sic.var[(l, k)];
            num += h.conj() * sic.r[(l, k)] / sic.var[(l, k)];
        }
        for l in 0..ch.n_aps() {
            let h = ch.h[(l, k)];
            let p = prec - h.norm_sqr() / sic.var[(l, k)];
            let (xd, vd) = if p > 0.0 {
                let m = (num - h.conj() * sic.r[(l, k)] / sic.var[(l, k)]) / p;
                c.denoise(m, 1.0 / p)
            } else {
                (Complex64::new(0.0, 0.0), c.energy())
            };
            let b = cfg.damping;
            st.x_hat[(l, k)] = xd * b + st.x_hat[(l, k)] * (1.0 - b);
            st.var[(l, k)] = (b * vd + (1.0 - b) * st.var[(l, k)]).max(cfg.var_floor);
        }
    }
    st.iteration += 1;
    sic
}

/// Gaussian belief propagation over the AP-user factor graph.
///
/// After the last iteration, each user's estimate is the precision-weighted
/// combination of all AP observations from the final cancellation step.
pub fn gabp_detect(ch: &EffectiveChannel, y: &CVector, c: &Constellation, cfg: &GabpConfig) -> Result<DetectionResult> {
    Ok(gabp_detect_with_state(ch, y, c, cfg)?.0)
}

pub fn gabp_detect_with_state(
    ch: &EffectiveChannel,
    y: &CVector,
    c: &Constellation,
    cfg: &GabpConfig,
) -> Result<(DetectionResult, GabpState)> {
    ch.check_y(y)?;
    if cfg.iterations < 1 || !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidConfig("GaBP needs >= 1 iteration and damping in (0, 1]".into()));
    }
    let noise = ch.noise_per_ap();
    let mut st = GabpState::new(ch.n_aps(), ch.n_users(), c);
    let mut sic = None;
    for _ in 0..cfg.iterations {
        sic = Some(gabp_iterate(ch, y, &noise, c, cfg, &mut st));
    }
    let sic = sic.expect("at least one iteration");
    let x_hat = (0..ch.n_users())
        .map(|k| {
            let mut prec = 0.0;
            let mut num = Complex64::new(0.0, 0.0);
            for l in 0..ch.n_aps() {
                let h = ch.h[(l, k)];
                prec += h.norm_sqr() / sic.var[(l, k)];
                num += h.conj() * sic.r[(l, k)] / sic.var[(l, k)];
            }
            if prec > 0.0 {
                num / prec
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok((DetectionResult::from_soft(x_hat, c), st))
}

/// Exhaustive minimization of `|y - H x|^2` over all symbol vectors.
pub fn map_oracle(ch: &EffectiveChannel, y: &CVector, c: &Constellation) -> Result<DetectionResult> {
    ch.check_y(y)?;
    let k_count = ch.n_users();
    let size = 4u128.checked_pow(k_count as u32).unwrap_or(u128::MAX);
    if size > MAP_SEARCH_CAP {
        return Err(Error::SearchSpaceTooLarge { size, cap: MAP_SEARCH_CAP });
    }
    let pts = c.points();
    let mut idx = vec![0usize; k_count];
    let mut best = (f64::INFINITY, idx.clone());
    for _ in 0..size {
        let cost: f64 = (0..ch.n_aps())
            .map(|l| {
                let s: Complex64 = (0..k_count).map(|k| ch.h[(l, k)] * pts[idx[k]]).sum();
                (y[l] - s).norm_sqr()
            })
            .sum();
        if cost < best.0 {
            best = (cost, idx.clone());
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < 4 {
                break;
            }
            *d = 0;
        }
    }
    Ok(DetectionResult::from_soft(best.1.iter().map(|&i| pts[i]).collect(), c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Mr,
    Lmmse,
    Ep,
    Gabp,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Mr, Scheme::Lmmse, Scheme::Ep, Scheme::Gabp];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Mr => "mr",
            Scheme::Lmmse => "lmmse",
            Scheme::Ep => "ep",
            Scheme::Gabp => "gabp",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown detector '{s}' (expected mr, lmmse, ep or gabp)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsiMode {
    /// Detectors use MMSE estimates from a pilot phase with random assignment.
    #[default]
    Estimated,
    Perfect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerScenario {
    /// Geometry, user count, pilot length and power control.
    pub system: SystemConfig,
    pub csi: CsiMode,
    /// Average per-link received SNR in dB.
    pub snr_db: Vec<f64>,
    /// Independent network drops per SNR point.
    pub drops: usize,
    /// Symbol vectors sent per drop (channel fixed within a drop).
    pub symbols_per_drop: usize,
    pub energy: f64,
    pub ep: EpConfig,
    pub gabp: GabpConfig,
}

impl BerScenario {
    pub fn new(system: SystemConfig, csi: CsiMode, snr_db: Vec<f64>) -> Self {
        Self {
            system,
            csi,
            snr_db,
            drops: 50,
            symbols_per_drop: 100,
            energy: 1.0,
            ep: EpConfig::default(),
            gabp: GabpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits_counted: u64,
}

/// Runs one detector on one received vector.
pub fn detect(
    scheme: Scheme,
    ch: &EffectiveChannel,
    y: &CVector,
    mr_norm: &[f64],
    c: &Constellation,
    scenario: &BerScenario,
) -> Result<DetectionResult> {
    match scheme {
        Scheme::Mr => {
            // The matched filter works on the unscaled estimates; the scale
            // is folded into `mr_norm`.
            mr_combine(&ch.h, y, mr_norm, c)
        }
        Scheme::Lmmse => lmmse_detect(ch, y, c),
        Scheme::Ep => ep_detect(ch, y, c, &scenario.ep),
        Scheme::Gabp => gabp_detect(ch, y, c, &scenario.gabp),
    }
}

/// Bit errors of every scheme for one drop at one SNR.
fn ber_drop(
    schemes: &[Scheme],
    scenario: &BerScenario,
    snr_db: f64,
    master_seed: u64,
    drop: usize,
) -> Result<Vec<u64>> {
    let sys = &scenario.system;
    let c = Constellation::qpsk(scenario.energy)?;
    // The same stream is used at every SNR point so that the curves share
    // geometry, fading and noise shapes.
    let mut rng = trial_rng(master_seed, drop as u64);
    let d = draw_drop(sys, &mut rng)?;
    let mean_beta = d.beta.as_matrix().mean();
    let beta = d.beta.scaled(1.0 / mean_beta)?;
    let rho = 10f64.powf(snr_db / 10.0);
    let chan = draw_channel(&beta, &mut rng);
    let eta: Vec<f64> = (0..sys.n_users).map(|k| sys.eta_k(k)).collect();

    // Actual channel seen by the data.
    let mut h_true = chan.g.clone();
    for (mut col, e) in h_true.column_iter_mut().zip(&eta) {
        col.scale_mut((rho * e).sqrt());
    }

    let (ch, mr_norm) = match scenario.csi {
        CsiMode::Perfect => {
            let ch = EffectiveChannel::perfect(h_true.clone(), 1.0)?;
            let norm: Vec<f64> = (0..sys.n_users).map(|k| (rho * eta[k]) * beta.as_matrix().column(k).sum()).collect();
            (ch, norm)
        }
        CsiMode::Estimated => {
            let basis = make_basis(sys.tau, BasisFlavor::RandomUnitary, &mut rng);
            let pilots = assign_random(&basis, sys.n_users, &mut rng);
            let est = estimate_channels(pilots.matrix(), &beta, &chan, rho, &mut rng)?;
            let ch = EffectiveChannel::from_estimate(&est.g_hat, &est.stats, rho, &eta)?;
            let norm: Vec<f64> = mr_normalization(&est.stats.gamma, rho, &eta).iter().map(|n| n * (rho).sqrt()).collect();
            (ch, norm)
        }
    };
    let mut errors = vec![0u64; schemes.len()];
    let pts = c.points();
    for _ in 0..scenario.symbols_per_drop {
        let idx: Vec<usize> = (0..sys.n_users).map(|_| rng.random_range(0..4)).collect();
        let x = CVector::from_iterator(sys.n_users, idx.iter().map(|&i| pts[i]));
        let noise = CVector::from_fn(ch.n_aps(), |_, _| complex_normal(&mut rng));
        let y = &h_true * &x + noise;
        let sent = c.demodulate(x.as_slice());
        for (s, err) in schemes.iter().zip(errors.iter_mut()) {
            let r = detect(*s, &ch, &y, &mr_norm, &c, scenario)?;
            *err += sent.iter().zip(&r.bits).filter(|(a, b)| a != b).count() as u64;
        }
    }
    Ok(errors)
}

/// BER of each scheme at each SNR point, deterministic in `master_seed`.
///
/// Drops run in parallel; counts are merged in drop order.
pub fn ber_experiment(schemes: &[Scheme], scenario: &BerScenario, master_seed: u64) -> Result<Vec<BerRecord>> {
    scenario.system.validate()?;
    if scenario.drops < 1 || scenario.symbols_per_drop < 1 || scenario.snr_db.is_empty() {
        return Err(Error::InvalidConfig("BER scenario needs drops, symbols and SNR points".into()));
    }
    let bits_per_drop = (2 * scenario.system.n_users * scenario.symbols_per_drop) as u64;
    let mut out = Vec::new();
    for &snr in &scenario.snr_db {
        let per_drop: Vec<Vec<u64>> = (0..scenario.drops)
            .into_par_iter()
            .map(|d| ber_drop(schemes, scenario, snr, master_seed, d))
            .collect::<Result<_>>()?;
        let bits = bits_per_drop * scenario.drops as u64;
        for (i, &s) in schemes.iter().enumerate() {
            let e: u64 = per_drop.iter().map(|v| v[i]).sum();
            out.push(BerRecord { snr_db: snr, scheme: s, ber: e as f64 / bits as f64, bit_errors: e, bits_counted: bits });
        }
    }
    Ok(out)
}
