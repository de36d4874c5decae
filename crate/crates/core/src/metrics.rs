//! MMSE channel-estimation statistics, uplink SINR, rates and net throughput.
//!
//! Everything here depends on the pilots only through the squared Gram
//! magnitudes `|f_k^H f_k'|^2`, so pilot matrices of either kind (and
//! unconstrained matrices used by gradient checks) go through the same code.

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{shape_err, Result};
use crate::pilots::PilotMatrix;
use crate::sysmodel::{complex_normal, BetaMatrix, ChannelRealization};
use crate::{CMatrix, Complex64, RMatrix};

/// Normalized SNRs entering the estimation statistics and the SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrParams {
    /// Pilot SNR used by the MMSE estimator.
    pub pilot: f64,
    /// SNR multiplying the signal and interference terms of the SINR.
    pub sinr: f64,
}

impl SnrParams {
    pub fn uniform(rho: f64) -> Self {
        Self { pilot: rho, sinr: rho }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self { pilot: cfg.rho_pilot(), sinr: cfg.rho_sinr() }
    }
}

/// `F^H F` for an arbitrary `tau x K` matrix.
pub fn gram(f: &CMatrix) -> CMatrix {
    f.ad_mul(f)
}

pub fn pilot_gram(f: &PilotMatrix) -> CMatrix {
    gram(f.matrix())
}

/// Elementwise `|G|^2` of the pilot Gram matrix.
pub fn gram_sq(f: &CMatrix) -> RMatrix {
    gram(f).map(|z| z.norm_sqr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    /// MMSE coefficients `c`, `L x K`.
    pub c: RMatrix,
    /// Estimate powers `gamma = E|g_hat|^2`, `L x K`.
    pub gamma: RMatrix,
    /// Residual variances `beta - gamma`.
    pub err_var: RMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub stats: EstimationStats,
    /// MMSE channel estimates `g_hat = c * (f_k^H y_p)`, `L x K`.
    pub g_hat: CMatrix,
}

/// Intermediate quantities of the SINR expression, shared with the gradient.
#[derive(Debug, Clone)]
pub(crate) struct SinrTerms {
    /// `|f_k^H f_k'|^2`.
    pub s: RMatrix,
    /// Estimator denominators `rho_p sum_k' beta_lk' S_kk' + tau`, `L x K`.
    pub den: RMatrix,
    pub gamma: RMatrix,
    /// `P_kk' = sum_l gamma_lk beta_lk' / beta_lk`, `K x K`.
    pub p: RMatrix,
    /// Per-user `sum_l gamma_lk`.
    pub gamma_sum: Vec<f64>,
    pub num: Vec<f64>,
    pub den_sinr: Vec<f64>,
}

impl SinrTerms {
    pub fn compute(s: RMatrix, beta: &BetaMatrix, tau: usize, snr: SnrParams) -> Self {
        let b = beta.as_matrix();
        let (l, k) = (b.nrows(), b.ncols());
        let tau = tau as f64;
        let rp = snr.pilot;
        let rho = snr.sinr;

        // den[l, k] = rho_p * sum_k' beta[l, k'] * S[k, k'] + tau  ==  rho_p * (beta * S^T) + tau
        let den = (b * s.transpose()).map(|v| rp * v + tau);
        let gamma = RMatrix::from_fn(l, k, |ll, kk| tau * tau * rp * b[(ll, kk)].powi(2) / den[(ll, kk)]);
        let ratio = gamma.component_div(b);
        // P = ratio^T * beta
        let p = ratio.tr_mul(b);
        let gamma_sum: Vec<f64> = (0..k).map(|kk| gamma.column(kk).sum()).collect();
        let beta_row_sum: Vec<f64> = (0..l).map(|ll| b.row(ll).sum()).collect();

        let mut num = vec![0.0; k];
        let mut den_sinr = vec![0.0; k];
        for kk in 0..k {
            num[kk] = rho * gamma_sum[kk].powi(2);
            let d1: f64 = (0..k)
                .filter(|&kp| kp != kk)
                .map(|kp| p[(kk, kp)].powi(2) * s[(kk, kp)])
                .sum::<f64>()
                * rho;
            let d2 = rho * (0..l).map(|ll| gamma[(ll, kk)] * beta_row_sum[ll]).sum::<f64>();
            let d3 = gamma_sum[kk];
            den_sinr[kk] = d1 + d2 + d3;
        }
        Self { s, den, gamma, p, gamma_sum, num, den_sinr }
    }

    pub fn sinr(&self) -> Vec<f64> {
        self.num.iter().zip(&self.den_sinr).map(|(n, d)| n / d).collect()
    }
}

fn check_shapes(f: &CMatrix, beta: &BetaMatrix) -> Result<()> {
    if f.ncols() != beta.n_users() {
        return Err(shape_err((f.nrows(), beta.n_users()), f.shape()));
    }
    Ok(())
}

/// MMSE coefficients and estimate powers for pilot matrix `f`.
pub fn estimation_stats(f: &CMatrix, beta: &BetaMatrix, rho_p: f64) -> Result<EstimationStats> {
    check_shapes(f, beta)?;
    let tau = f.nrows() as f64;
    let b = beta.as_matrix();
    let den = (b * gram_sq(f).transpose()).map(|v| rho_p * v + tau);
    let c = RMatrix::from_fn(b.nrows(), b.ncols(), |l, k| tau * rho_p.sqrt() * b[(l, k)] / den[(l, k)]);
    let gamma =
        RMatrix::from_fn(b.nrows(), b.ncols(), |l, k| tau * tau * rho_p * b[(l, k)].powi(2) / den[(l, k)]);
    let err_var = b - &gamma;
    Ok(EstimationStats { c, gamma, err_var })
}

/// Simulates the pilot phase and returns MMSE channel estimates.
///
/// User `k` transmits `f_k`; AP `l` receives `y_l = sqrt(rho_p) sum_k g_lk f_k + n_l`
/// and correlates with `f_k^H`, so users whose pilots overlap contaminate each
/// other's estimates through `f_k^H f_k'`.
pub fn estimate_channels<R: Rng + ?Sized>(
    f: &CMatrix,
    beta: &BetaMatrix,
    channel: &ChannelRealization,
    rho_p: f64,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    check_shapes(f, beta)?;
    if channel.g.shape() != beta.as_matrix().shape() {
        return Err(shape_err(beta.as_matrix().shape(), channel.g.shape()));
    }
    let stats = estimation_stats(f, beta, rho_p)?;
    let (tau, l) = (f.nrows(), beta.n_aps());
    let sq = Complex64::from(rho_p.sqrt());
    // Y is tau x L: column l is the received pilot block at AP l.
    let noise = CMatrix::from_fn(tau, l, |_, _| complex_normal(rng));
    let y = f * channel.g.transpose() * sq + noise;
    // y_check[l, k] = f_k^H y_l  ==  (F^H Y)^T
    let y_check = f.ad_mul(&y).transpose();
    let g_hat = y_check.zip_map(&stats.c, |y, c| y * c);
    Ok(ChannelEstimate { stats, g_hat })
}

/// Per-user uplink SINR of the closed-form expression.
pub fn sinr_per_user(f: &CMatrix, beta: &BetaMatrix, snr: SnrParams) -> Result<Vec<f64>> {
    check_shapes(f, beta)?;
    Ok(SinrTerms::compute(gram_sq(f), beta, f.nrows(), snr).sinr())
}

/// Same as [`sinr_per_user`] but from precomputed `|f_k^H f_k'|^2`.
pub fn sinr_from_gram_sq(s: &RMatrix, beta: &BetaMatrix, tau: usize, snr: SnrParams) -> Vec<f64> {
    SinrTerms::compute(s.clone(), beta, tau, snr).sinr()
}

/// Sum over users of `log2(1 + SINR_k)` in bit/s/Hz.
pub fn sum_rate(f: &CMatrix, beta: &BetaMatrix, snr: SnrParams) -> Result<f64> {
    Ok(sinr_per_user(f, beta, snr)?.iter().map(|s| (1.0 + s).log2()).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    /// Achievable rate per user (bit/s/Hz).
    pub rate_bits: Vec<f64>,
    /// Net throughput per user (bit/s) after pilot overhead and duplex split.
    pub net_bps: Vec<f64>,
}

impl RateReport {
    pub fn from_sinr(sinr: Vec<f64>, tau: usize, cfg: &SystemConfig) -> Self {
        let rate_bits: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
        let factor = net_throughput_factor(tau, cfg);
        let net_bps = rate_bits.iter().map(|r| factor * r).collect();
        Self { sinr, rate_bits, net_bps }
    }

    pub fn sum_rate_bits(&self) -> f64 {
        self.rate_bits.iter().sum()
    }

    pub fn sum_net_bps(&self) -> f64 {
        self.net_bps.iter().sum()
    }
}

/// `B * (1 - tau/T) * duplex_factor`.
pub fn net_throughput_factor(tau: usize, cfg: &SystemConfig) -> f64 {
    cfg.bandwidth_hz * (1.0 - tau as f64 / cfg.frame_len as f64) * cfg.duplex_factor
}

pub fn rates(f: &CMatrix, beta: &BetaMatrix, cfg: &SystemConfig) -> Result<RateReport> {
    let sinr = sinr_per_user(f, beta, SnrParams::from_config(cfg))?;
    Ok(RateReport::from_sinr(sinr, f.nrows(), cfg))
}
