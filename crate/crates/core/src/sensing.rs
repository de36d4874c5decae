//! Sensing metrics of pilot sequences: autocorrelation, sidelobe profiles and
//! matched-filter range profiles.
//!
//! Optimized pilots have unit-modulus entries that are read as frequency-domain
//! values; the transmitted sequence is their unitary inverse DFT, which has a
//! flat power spectrum and hence an ideal periodic autocorrelation.

use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::pilots::{PilotKind, PilotMatrix};
use crate::sysmodel::complex_normal;
use crate::Complex64;

pub const SPEED_OF_LIGHT: f64 = 3e8;

fn fft_in_place(x: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(x.len()) } else { planner.plan_fft_forward(x.len()) };
    fft.process(x);
}

/// Unitary DFT, `X_f = N^-1/2 sum_n x_n exp(-j 2 pi f n / N)`.
pub fn unitary_dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut v = x.to_vec();
    fft_in_place(&mut v, false);
    let s = 1.0 / (x.len() as f64).sqrt();
    v.iter().map(|z| z * s).collect()
}

pub fn unitary_idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut v = x.to_vec();
    fft_in_place(&mut v, true);
    let s = 1.0 / (x.len() as f64).sqrt();
    v.iter().map(|z| z * s).collect()
}

/// Transmitted time-domain sequence of user `k`.
pub fn time_domain_pilot(f: &PilotMatrix, k: usize) -> Result<Vec<Complex64>> {
    if k >= f.n_users() {
        return Err(Error::Domain(format!("user {k} out of range (K = {})", f.n_users())));
    }
    let col = f.column(k);
    Ok(match f.kind() {
        PilotKind::UnimodularEntries => unitary_idft(&col),
        PilotKind::OrthonormalAssigned => col,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcfMode {
    #[default]
    Aperiodic,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfProfile {
    /// Lags `-(N-1) ..= N-1`.
    pub lags: Vec<i64>,
    pub values: Vec<Complex64>,
    pub mode: AcfMode,
}

impl AcfProfile {
    pub fn len(&self) -> usize {
        self.lags.len().div_ceil(2)
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn at(&self, lag: i64) -> Complex64 {
        self.values[(lag + self.len() as i64 - 1) as usize]
    }

    pub fn peak(&self) -> f64 {
        self.at(0).re
    }
}

/// `r_k = sum_n conj(x_n) x_{n+k}`; periodic mode wraps the index.
pub fn acf(x: &[Complex64], mode: AcfMode) -> Result<AcfProfile> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Domain("empty sequence".into()));
    }
    let positive: Vec<Complex64> = (0..n)
        .map(|k| match mode {
            AcfMode::Aperiodic => (0..n - k).map(|i| x[i].conj() * x[i + k]).sum(),
            AcfMode::Periodic => (0..n).map(|i| x[i].conj() * x[(i + k) % n]).sum(),
        })
        .collect();
    let mut lags = Vec::with_capacity(2 * n - 1);
    let mut values = Vec::with_capacity(2 * n - 1);
    for k in (1..n).rev() {
        lags.push(-(k as i64));
        values.push(positive[k].conj());
    }
    for (k, v) in positive.into_iter().enumerate() {
        lags.push(k as i64);
        values.push(v);
    }
    Ok(AcfProfile { lags, values, mode })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidelobeProfile {
    pub lags: Vec<i64>,
    /// `20 log10` of the mean normalized magnitude `|r_k| / r_0`.
    pub level_db: Vec<f64>,
}

impl SidelobeProfile {
    pub fn at(&self, lag: i64) -> f64 {
        let n = (self.lags.len() as i64 + 1) / 2;
        self.level_db[(lag + n - 1) as usize]
    }

    /// Highest level over nonzero lags.
    pub fn peak_sidelobe_db(&self) -> f64 {
        self.lags
            .iter()
            .zip(&self.level_db)
            .filter(|(l, _)| **l != 0)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Averages `|r_k| / r_0` over equal-length sequences and converts to dB.
pub fn sidelobe_profile_db(sequences: &[Vec<Complex64>], mode: AcfMode) -> Result<SidelobeProfile> {
    let first = sequences.first().ok_or_else(|| Error::Domain("no sequences".into()))?;
    let n = first.len();
    let mut acc = vec![0.0; 2 * n - 1];
    let mut lags = Vec::new();
    for s in sequences {
        if s.len() != n {
            return Err(Error::Domain("sequences must share one length".into()));
        }
        let p = acf(s, mode)?;
        let r0 = p.peak();
        if !(r0 > 0.0) {
            return Err(Error::Domain("all-zero sequence".into()));
        }
        for (a, v) in acc.iter_mut().zip(&p.values) {
            *a += v.norm() / r0;
        }
        lags = p.lags;
    }
    let m = sequences.len() as f64;
    Ok(SidelobeProfile { lags, level_db: acc.iter().map(|a| 20.0 * (a / m).log10()).collect() })
}

/// Circular delay by `d` samples (possibly fractional) as a linear phase over
/// signed frequencies `-N/2 ..= N/2 - 1`.
pub fn fractional_delay(x: &[Complex64], d: f64) -> Result<Vec<Complex64>> {
    if !d.is_finite() {
        return Err(Error::Domain(format!("delay must be finite (got {d})")));
    }
    let n = x.len();
    let mut v = x.to_vec();
    fft_in_place(&mut v, false);
    for (f, z) in v.iter_mut().enumerate() {
        let fs = if f < n.div_ceil(2) { f as f64 } else { f as f64 - n as f64 };
        *z *= Complex64::from_polar(1.0 / n as f64, -std::f64::consts::TAU * fs * d / n as f64);
    }
    fft_in_place(&mut v, true);
    Ok(v)
}

/// Circular cross-correlation `z_m = sum_n conj(p_n) e_{n+m}`.
pub fn circular_xcorr(pilot: &[Complex64], echo: &[Complex64]) -> Vec<Complex64> {
    let n = pilot.len();
    (0..n).map(|m| (0..n).map(|i| pilot[i].conj() * echo[(i + m) % n]).sum()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub range_m: f64,
    pub amplitude: Complex64,
}

impl Target {
    pub fn unit(range_m: f64) -> Self {
        Self { range_m, amplitude: Complex64::new(1.0, 0.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeScene {
    pub targets: Vec<Target>,
    /// Pilot power over noise power per sample; `None` means noiseless.
    pub snr_db: Option<f64>,
    pub pilot: Vec<Complex64>,
    pub bandwidth_hz: f64,
}

impl RangeScene {
    /// Range bin width `c / (2 B)`.
    pub fn resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn max_range_m(&self) -> f64 {
        self.pilot.len() as f64 * self.resolution_m()
    }

    fn validate(&self) -> Result<()> {
        if self.pilot.len() < 2 {
            return Err(Error::Domain("pilot must have at least 2 samples".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Domain("bandwidth must be positive".into()));
        }
        for t in &self.targets {
            if !(t.range_m >= 0.0 && t.range_m < self.max_range_m()) {
                return Err(Error::Domain(format!(
                    "target at {} m outside the unambiguous window [0, {}) m",
                    t.range_m,
                    self.max_range_m()
                )));
            }
        }
        Ok(())
    }

    /// Noise-free echo.
    pub fn echo(&self) -> Result<Vec<Complex64>> {
        self.validate()?;
        let mut e = vec![Complex64::new(0.0, 0.0); self.pilot.len()];
        for t in &self.targets {
            let d = fractional_delay(&self.pilot, t.range_m / self.resolution_m())?;
            for (a, b) in e.iter_mut().zip(d) {
                *a += b * t.amplitude;
            }
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub range_m: Vec<f64>,
    /// Matched-filter magnitude normalized to its peak, in dB.
    pub magnitude_db: Vec<f64>,
}

impl RangeProfile {
    /// Ranges of the `count` strongest detections, strongest first.
    ///
    /// Greedy non-maximum suppression: each pick masks its two neighbouring
    /// bins, so a target straddling two bins is reported once while a second
    /// target one cell further away is still found even when it only forms a
    /// shoulder on the first.
    pub fn peaks(&self, count: usize) -> Vec<f64> {
        let n = self.magnitude_db.len();
        let m = &self.magnitude_db;
        let mut free = vec![true; n];
        let mut out = Vec::new();
        while out.len() < count {
            let Some(i) = (0..n).filter(|&i| free[i]).max_by(|&a, &b| m[a].total_cmp(&m[b]).then(b.cmp(&a))) else {
                break;
            };
            out.push(self.range_m[i]);
            for j in [(i + n - 1) % n, i, (i + 1) % n] {
                free[j] = false;
            }
        }
        out
    }
}

/// Matched-filter range profile of a scene with additive white noise.
pub fn range_profile<R: Rng + ?Sized>(scene: &RangeScene, rng: &mut R) -> Result<RangeProfile> {
    let mut e = scene.echo()?;
    if let Some(snr) = scene.snr_db {
        let p = scene.pilot.iter().map(|z| z.norm_sqr()).sum::<f64>() / scene.pilot.len() as f64;
        let sd = (p / 10f64.powf(snr / 10.0)).sqrt();
        for z in e.iter_mut() {
            *z += complex_normal(rng) * sd;
        }
    }
    let z = circular_xcorr(&scene.pilot, &e);
    let peak = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let res = scene.resolution_m();
    Ok(RangeProfile {
        range_m: (0..z.len()).map(|m| m as f64 * res).collect(),
        magnitude_db: z.iter().map(|v| 20.0 * (v.norm() / peak).max(1e-300).log10()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use crate::CMatrix;
    use rand::SeedableRng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_seq(n: usize, rng: &mut SimRng) -> Vec<Complex64> {
        (0..n).map(|_| complex_normal(rng)).collect()
    }

    fn unimodular_spectrum(n: usize, rng: &mut SimRng) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)).collect()
    }

    #[test]
    fn flat_spectrum_gives_impulse() {
        let x = unitary_idft(&[cx(1.0, 0.0); 4]);
        assert!((x[0] - cx(2.0, 0.0)).norm() < 1e-12);
        assert!(x[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn time_domain_pilot_preserves_norm_and_gram() {
        let mut rng = SimRng::seed_from_u64(1);
        let f = CMatrix::from_fn(8, 5, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU));
        let p = PilotMatrix::unimodular(f.clone()).unwrap();
        let t: Vec<Vec<Complex64>> = (0..5).map(|k| time_domain_pilot(&p, k).unwrap()).collect();
        for s in &t {
            assert!((s.iter().map(|z| z.norm_sqr()).sum::<f64>() - 8.0).abs() < 1e-10);
        }
        for a in 0..5 {
            for b in 0..5 {
                let g_f: Complex64 = f.column(a).iter().zip(f.column(b).iter()).map(|(x, y)| x.conj() * y).sum();
                let g_t: Complex64 = t[a].iter().zip(&t[b]).map(|(x, y)| x.conj() * y).sum();
                assert!((g_f.norm() - g_t.norm()).abs() < 1e-10);
            }
        }
        assert!(time_domain_pilot(&p, 5).is_err());
        let basis = crate::pilots::make_basis(4, crate::pilots::BasisFlavor::RandomUnitary, &mut rng);
        let a = crate::pilots::assign_round_robin(&basis, 3);
        assert_eq!(time_domain_pilot(&a, 1).unwrap(), a.column(1));
    }

    #[test]
    fn sinr_is_identical_across_the_bridge() {
        let mut rng = SimRng::seed_from_u64(2);
        let f = CMatrix::from_fn(6, 4, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU));
        let p = PilotMatrix::unimodular(f.clone()).unwrap();
        let t = CMatrix::from_fn(6, 4, |i, k| time_domain_pilot(&p, k).unwrap()[i]);
        let beta = crate::sysmodel::BetaMatrix::from_fn(5, 4, |l, k| 1.0 + (l * 4 + k) as f64 * 0.1).unwrap();
        let snr = crate::metrics::SnrParams::uniform(3.0);
        let a = crate::metrics::sinr_per_user(&f, &beta, snr).unwrap();
        let b = crate::metrics::sinr_per_user(&t, &beta, snr).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn aperiodic_acf_of_ones() {
        let p = acf(&[cx(1.0, 0.0); 4], AcfMode::Aperiodic).unwrap();
        for (k, v) in [4.0, 3.0, 2.0, 1.0].iter().enumerate() {
            assert!((p.at(k as i64) - cx(*v, 0.0)).norm() < 1e-15);
            assert!((p.at(-(k as i64)) - cx(*v, 0.0)).norm() < 1e-15);
        }
        assert_eq!(p.lags, vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn acf_symmetry_and_peak() {
        let mut rng = SimRng::seed_from_u64(3);
        for mode in [AcfMode::Aperiodic, AcfMode::Periodic] {
            let x = random_seq(9, &mut rng);
            let p = acf(&x, mode).unwrap();
            for k in 0..9 {
                assert!((p.at(-k) - p.at(k).conj()).norm() < 1e-12);
            }
            let e: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            assert!((p.at(0) - cx(e, 0.0)).norm() < 1e-12);
        }
        assert!(acf(&[], AcfMode::Periodic).is_err());
    }

    #[test]
    fn unimodular_spectrum_has_ideal_periodic_acf() {
        let mut rng = SimRng::seed_from_u64(4);
        for n in [2, 7, 10, 64] {
            let x = unitary_idft(&unimodular_spectrum(n, &mut rng));
            let p = acf(&x, AcfMode::Periodic).unwrap();
            assert!((p.peak() - n as f64).abs() < 1e-9);
            for k in 1..n as i64 {
                assert!(p.at(k).norm() <= 1e-9 * p.peak());
            }
        }
    }

    #[test]
    fn periodic_acf_matches_power_spectrum_route() {
        let mut rng = SimRng::seed_from_u64(5);
        let x = random_seq(12, &mut rng);
        let p = acf(&x, AcfMode::Periodic).unwrap();
        // r_k = sum_f |X_f|^2 exp(j 2 pi f k / N) with the unitary DFT.
        let spec: Vec<Complex64> = unitary_dft(&x).iter().map(|z| cx(z.norm_sqr(), 0.0)).collect();
        let r = unitary_idft(&spec);
        for k in 0..12 {
            assert!((p.at(k as i64) - r[k] * (12f64).sqrt()).norm() < 1e-10);
        }
    }

    #[test]
    fn sidelobe_profile_normalization() {
        let mut rng = SimRng::seed_from_u64(6);
        let seqs: Vec<Vec<Complex64>> = (0..20).map(|_| random_seq(10, &mut rng)).collect();
        let p = sidelobe_profile_db(&seqs, AcfMode::Aperiodic).unwrap();
        assert!(p.at(0).abs() < 1e-12);
        for k in 1..10 {
            assert!((p.at(k) - p.at(-k)).abs() < 1e-12);
            assert!(p.at(k) < 0.0);
        }
        assert!(sidelobe_profile_db(&[], AcfMode::Aperiodic).is_err());
    }

    #[test]
    fn fractional_delay_identities() {
        let mut rng = SimRng::seed_from_u64(7);
        for n in [8, 9] {
            let x = random_seq(n, &mut rng);
            let d0 = fractional_delay(&x, 0.0).unwrap();
            assert!(d0.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-12));
            for s in [1usize, 3] {
                let d = fractional_delay(&x, s as f64).unwrap();
                for i in 0..n {
                    assert!((d[(i + s) % n] - x[i]).norm() < 1e-10);
                }
            }
            let half = fractional_delay(&fractional_delay(&x, 0.5).unwrap(), 0.5).unwrap();
            let one = fractional_delay(&x, 1.0).unwrap();
            assert!(half.iter().zip(&one).all(|(a, b)| (a - b).norm() < 1e-10));
            let e0: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let e1: f64 = fractional_delay(&x, 2.3).unwrap().iter().map(|z| z.norm_sqr()).sum();
            assert!((e0 - e1).abs() < 1e-10);
        }
        assert!(fractional_delay(&[cx(1.0, 0.0)], f64::NAN).is_err());
    }

    fn scene(pilot: Vec<Complex64>, ranges: &[f64], snr: Option<f64>) -> RangeScene {
        RangeScene { targets: ranges.iter().map(|&r| Target::unit(r)).collect(), snr_db: snr, pilot, bandwidth_hz: 20e6 }
    }

    #[test]
    fn single_target_at_zero_peaks_at_lag_zero() {
        let mut rng = SimRng::seed_from_u64(8);
        let pilot = unitary_idft(&unimodular_spectrum(16, &mut rng));
        let sc = scene(pilot, &[0.0], None);
        assert!((sc.resolution_m() - 7.5).abs() < 1e-12);
        let p = range_profile(&sc, &mut rng).unwrap();
        assert_eq!(p.peaks(1), vec![0.0]);
        assert!(p.magnitude_db[0].abs() < 1e-12);
    }

    #[test]
    fn integer_delay_peaks_at_true_bin() {
        let mut rng = SimRng::seed_from_u64(9);
        let pilot = random_seq(32, &mut rng);
        for bin in [1usize, 5, 20] {
            let sc = scene(pilot.clone(), &[bin as f64 * 7.5], None);
            let p = range_profile(&sc, &mut rng).unwrap();
            assert_eq!(p.peaks(1), vec![bin as f64 * 7.5]);
        }
    }

    #[test]
    fn fractional_delay_response_matches_dense_oracle() {
        // With a flat spectrum, the matched-filter output at lag m is the
        // band-limited kernel sum_f exp(j 2 pi f (m - d) / N) over the signed
        // frequency grid, which is evaluated here by a direct sum.
        let mut rng = SimRng::seed_from_u64(10);
        let n = 16;
        let pilot = unitary_idft(&unimodular_spectrum(n, &mut rng));
        let d = 3.4;
        let sc = scene(pilot.clone(), &[d * 7.5], None);
        let z = circular_xcorr(&pilot, &sc.echo().unwrap());
        for (m, zm) in z.iter().enumerate() {
            let k: Complex64 = (0..n)
                .map(|f| {
                    let fs = if f < n / 2 { f as f64 } else { f as f64 - n as f64 };
                    Complex64::from_polar(1.0, std::f64::consts::TAU * fs * (m as f64 - d) / n as f64)
                })
                .sum();
            assert!((zm.norm() - k.norm()).abs() < 1e-9, "lag {m}");
        }
        let mag: Vec<f64> = z.iter().map(|v| v.norm()).collect();
        assert!(mag[3] > mag[2] && mag[4] > mag[5]);
        assert!(mag[3] > mag[4]);
    }

    #[test]
    fn rejects_targets_outside_window() {
        let mut rng = SimRng::seed_from_u64(11);
        let sc = scene(random_seq(4, &mut rng), &[30.0], None);
        assert!(range_profile(&sc, &mut rng).is_err());
        let sc = scene(vec![cx(1.0, 0.0)], &[0.0], None);
        assert!(range_profile(&sc, &mut rng).is_err());
    }

    #[test]
    fn two_targets_resolved_with_ideal_pilot() {
        let mut rng = SimRng::seed_from_u64(12);
        let pilot = unitary_idft(&unimodular_spectrum(64, &mut rng));
        let sc = scene(pilot, &[8.0, 19.0], Some(20.0));
        let p = range_profile(&sc, &mut rng).unwrap();
        let mut pk = p.peaks(2);
        pk.sort_by(f64::total_cmp);
        assert!((pk[0] - 8.0).abs() <= 7.5 && (pk[1] - 19.0).abs() <= 7.5, "{pk:?}");
    }
}
