//! Fixtures shared by the criterion benches.

use cfmimo_core::detection::{Constellation, EffectiveChannel};
use cfmimo_core::manifold::ManifoldPoint;
use cfmimo_core::metrics::SnrParams;
use cfmimo_core::seed::trial_rng;
use cfmimo_core::sysmodel::{complex_normal, draw_drop, BetaMatrix};
use cfmimo_core::{CMatrix, CVector, RMatrix, SystemConfig};
use rand::Rng;

pub struct DetectionFixture {
    pub channel: EffectiveChannel,
    pub y: CVector,
    pub constellation: Constellation,
}

/// `l x k` Rayleigh channel with small estimation-error variances and one
/// received QPSK vector at unit noise.
pub fn detection_fixture(l: usize, k: usize, seed: u64) -> DetectionFixture {
    let mut rng = trial_rng(seed, 0);
    let c = Constellation::qpsk(1.0).expect("unit energy");
    let h = CMatrix::from_fn(l, k, |_, _| complex_normal(&mut rng) * 2.0);
    let err = RMatrix::from_fn(l, k, |_, _| rng.random_range(0.0..0.05));
    let channel = EffectiveChannel::new(h, 1.0, err).expect("finite channel");
    let pts = c.points();
    let x = CVector::from_fn(k, |_, _| pts[rng.random_range(0..4)]);
    let y = &channel.h * &x + CVector::from_fn(l, |_, _| complex_normal(&mut rng));
    DetectionFixture { channel, y, constellation: c }
}

pub struct DesignFixture {
    pub beta: BetaMatrix,
    pub point: ManifoldPoint,
    pub snr: SnrParams,
    pub tau: usize,
}

pub fn design_fixture(l: usize, k: usize, tau: usize, seed: u64) -> DesignFixture {
    let sys = SystemConfig { n_aps: l, n_users: k, tau, ..SystemConfig::default() };
    let mut rng = trial_rng(seed, 1);
    let d = draw_drop(&sys, &mut rng).expect("valid config");
    DesignFixture { beta: d.beta, point: ManifoldPoint::random(tau, k, &mut rng), snr: SnrParams::from_config(&sys), tau }
}
