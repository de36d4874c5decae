//! Network geometry, large-scale fading and Rayleigh channel draws.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::{CMatrix, Complex64, RMatrix};

/// Planar position in metres.
pub type Position = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    pub ap_xy: Vec<Position>,
    pub ue_xy: Vec<Position>,
}

/// Large-scale fading coefficients, `L x K`, linear power gain.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaMatrix(RMatrix);

impl BetaMatrix {
    /// Wraps a matrix after checking every entry is positive and finite.
    pub fn new(beta: RMatrix) -> Result<Self> {
        if beta.nrows() == 0 || beta.ncols() == 0 {
            return Err(Error::Domain("beta matrix must be non-empty".into()));
        }
        if let Some(v) = beta.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("beta entries must be positive and finite (got {v})")));
        }
        Ok(Self(beta))
    }

    pub fn from_fn(n_aps: usize, n_users: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n_aps, n_users, f))
    }

    pub fn n_aps(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &RMatrix {
        &self.0
    }

    /// Same coefficients scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.0 * c)
    }

    /// Keeps only the listed user columns, in order.
    pub fn select_users(&self, users: &[usize]) -> Result<Self> {
        Self::new(self.0.select_columns(users))
    }
}

impl std::ops::Index<(usize, usize)> for BetaMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Small-scale channel realization `g = sqrt(beta) * h`, `L x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMatrix,
}

pub fn place_network<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> NetworkGeometry {
    let d = cfg.side_m;
    let mut draw = |n: usize| -> Vec<Position> {
        (0..n).map(|_| [rng.random::<f64>() * d, rng.random::<f64>() * d]).collect()
    };
    let ap_xy = draw(cfg.n_aps);
    let ue_xy = draw(cfg.n_users);
    NetworkGeometry { ap_xy, ue_xy }
}

/// Torus distance between an AP at `a` and a user at `b`, including the
/// antenna height difference.
pub fn wrapped_distance(a: Position, b: Position, cfg: &SystemConfig) -> f64 {
    let side = cfg.side_m;
    let wrap = |u: f64, v: f64| {
        let d = (u - v).abs();
        d.min(side - d)
    };
    let dx = wrap(a[0], b[0]);
    let dy = wrap(a[1], b[1]);
    let dh = cfg.h_ap_m - cfg.h_ue_m;
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// Three-slope path loss in dB (negative: a gain).
pub fn path_loss_db(d: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive and finite (got {d})")));
    }
    let l = cfg.pathloss_const_db();
    let pl = if d > cfg.d1_m {
        -l - 35.0 * d.log10()
    } else if d > cfg.d0_m {
        -l - 15.0 * cfg.d1_m.log10() - 20.0 * d.log10()
    } else {
        -l - 15.0 * cfg.d1_m.log10() - 20.0 * cfg.d0_m.log10()
    };
    Ok(pl)
}

pub fn path_loss_linear(d: f64, cfg: &SystemConfig) -> Result<f64> {
    Ok(10f64.powf(path_loss_db(d, cfg)? / 10.0))
}

pub fn large_scale_fading<R: Rng + ?Sized>(
    geom: &NetworkGeometry,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<BetaMatrix> {
    let (l, k) = (geom.ap_xy.len(), geom.ue_xy.len());
    let mut beta = DMatrix::zeros(l, k);
    // Column-major order so the stream consumption is fixed.
    for kk in 0..k {
        for ll in 0..l {
            let d = wrapped_distance(geom.ap_xy[ll], geom.ue_xy[kk], cfg);
            let z: f64 = StandardNormal.sample(rng);
            let shadow_db = if cfg.shadowing_everywhere || d > cfg.d1_m {
                cfg.sigma_sh_db * z
            } else {
                0.0
            };
            beta[(ll, kk)] = 10f64.powf((path_loss_db(d, cfg)? + shadow_db) / 10.0);
        }
    }
    BetaMatrix::new(beta)
}

/// One `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn draw_channel<R: Rng + ?Sized>(beta: &BetaMatrix, rng: &mut R) -> ChannelRealization {
    let b = beta.as_matrix();
    let mut g = CMatrix::zeros(b.nrows(), b.ncols());
    for kk in 0..b.ncols() {
        for ll in 0..b.nrows() {
            g[(ll, kk)] = complex_normal(rng) * b[(ll, kk)].sqrt();
        }
    }
    ChannelRealization { g }
}

/// Geometry, large-scale fading and one channel realization for a drop.
#[derive(Debug, Clone)]
pub struct Drop {
    pub geometry: NetworkGeometry,
    pub beta: BetaMatrix,
}

pub fn draw_drop<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Drop> {
    let geometry = place_network(cfg, rng);
    let beta = large_scale_fading(&geometry, cfg, rng)?;
    Ok(Drop { geometry, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    fn cfg() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn placement_is_deterministic_and_sized() {
        let c = SystemConfig { n_aps: 1, n_users: 1, ..cfg() };
        let a = place_network(&c, &mut SimRng::seed_from_u64(3));
        let b = place_network(&c, &mut SimRng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_eq!((a.ap_xy.len(), a.ue_xy.len()), (1, 1));
    }

    #[test]
    fn placement_is_uniform_on_the_square() {
        let c = SystemConfig { n_aps: 100_000, n_users: 0, ..cfg() };
        let g = place_network(&c, &mut SimRng::seed_from_u64(11));
        for axis in 0..2 {
            let mean = g.ap_xy.iter().map(|p| p[axis]).sum::<f64>() / 1e5;
            assert!((mean - 500.0).abs() < 5.0, "axis {axis}: {mean}");
        }
        assert!(g.ap_xy.iter().flatten().all(|&v| (0.0..1000.0).contains(&v)));
    }

    #[test]
    fn wrap_makes_corners_adjacent() {
        let c = cfg();
        let dh = 15.0 - 1.65;
        let d = wrapped_distance([0.0, 0.0], [999.0, 999.0], &c);
        assert!((d - (2.0_f64 + dh * dh).sqrt()).abs() < 1e-9);
        let same = wrapped_distance([123.0, 456.0], [123.0, 456.0], &c);
        assert!((same - 13.35).abs() < 1e-12);
    }

    #[test]
    fn wrapped_is_at_most_direct_and_is_a_torus_metric() {
        let c = SystemConfig { h_ap_m: 1.0, h_ue_m: 1.0, ..cfg() };
        let mut rng = SimRng::seed_from_u64(5);
        let pt = |rng: &mut SimRng| [rng.random::<f64>() * 1000.0, rng.random::<f64>() * 1000.0];
        for _ in 0..2000 {
            let (a, b, q) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            let direct = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let w = wrapped_distance(a, b, &c);
            assert!(w <= direct + 1e-9);
            assert!((w - wrapped_distance(b, a, &c)).abs() < 1e-12);
            assert!(w <= wrapped_distance(a, q, &c) + wrapped_distance(q, b, &c) + 1e-9);
            // Brute force over the nine translated copies.
            let mut best = f64::INFINITY;
            for sx in [-1000.0, 0.0, 1000.0] {
                for sy in [-1000.0, 0.0, 1000.0] {
                    best = best.min(((a[0] - b[0] - sx).powi(2) + (a[1] - b[1] - sy).powi(2)).sqrt());
                }
            }
            assert!((w - best).abs() < 1e-9);
        }
    }

    #[test]
    fn path_loss_branches() {
        let c = cfg();
        let l = c.pathloss_const_db();
        let plateau = -l - 15.0 * 50f64.log10() - 20.0 * 10f64.log10();
        for d in [0.5, 5.0, 10.0] {
            assert!((path_loss_db(d, &c).unwrap() - plateau).abs() < 1e-12);
        }
        assert!((path_loss_db(1000.0, &c).unwrap() - (-l - 105.0)).abs() < 1e-12);
        let at_d1 = -l - 15.0 * 50f64.log10() - 20.0 * 50f64.log10();
        assert!((path_loss_db(50.0, &c).unwrap() - at_d1).abs() < 1e-12);
        let past_d1 = -l - 35.0 * 50.0001f64.log10();
        assert!((path_loss_db(50.0001, &c).unwrap() - past_d1).abs() < 1e-12);
        assert!(path_loss_db(0.0, &c).is_err());
        assert!(path_loss_db(-3.0, &c).is_err());
    }

    #[test]
    fn path_loss_is_non_increasing() {
        let c = cfg();
        let mut prev = f64::INFINITY;
        for i in 1..20_000 {
            let d = i as f64 * 0.1;
            let v = path_loss_linear(d, &c).unwrap();
            assert!(v <= prev, "d = {d}");
            prev = v;
        }
    }

    #[test]
    fn no_shadowing_gives_pure_path_loss() {
        let c = SystemConfig { sigma_sh_db: 0.0, n_aps: 5, n_users: 4, ..cfg() };
        let mut rng = SimRng::seed_from_u64(1);
        let g = place_network(&c, &mut rng);
        let beta = large_scale_fading(&g, &c, &mut rng).unwrap();
        for l in 0..5 {
            for k in 0..4 {
                let pl = path_loss_linear(wrapped_distance(g.ap_xy[l], g.ue_xy[k], &c), &c).unwrap();
                assert!((beta[(l, k)] / pl - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shadowing_moments() {
        let c = SystemConfig { n_aps: 1, n_users: 100_000, ..cfg() };
        // Every user at the same point 300 m away (beyond d1).
        let geom = NetworkGeometry { ap_xy: vec![[0.0, 0.0]], ue_xy: vec![[300.0, 0.0]; 100_000] };
        let beta = large_scale_fading(&geom, &c, &mut SimRng::seed_from_u64(9)).unwrap();
        let pl = path_loss_linear(wrapped_distance([0.0, 0.0], [300.0, 0.0], &c), &c).unwrap();
        let db: Vec<f64> = beta.as_matrix().iter().map(|b| 10.0 * (b / pl).log10()).collect();
        let n = db.len() as f64;
        let mean = db.iter().sum::<f64>() / n;
        let std = (db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.1, "{mean}");
        assert!((std - 8.0).abs() < 0.1, "{std}");
    }

    #[test]
    fn shadowing_disabled_inside_d1_unless_requested() {
        let geom = NetworkGeometry { ap_xy: vec![[0.0, 0.0]], ue_xy: vec![[5.0, 0.0]] };
        let c = cfg();
        let pl = path_loss_linear(wrapped_distance([0.0, 0.0], [5.0, 0.0], &c), &c).unwrap();
        let b = large_scale_fading(&geom, &c, &mut SimRng::seed_from_u64(2)).unwrap();
        assert!((b[(0, 0)] / pl - 1.0).abs() < 1e-12);
        let every = SystemConfig { shadowing_everywhere: true, ..cfg() };
        let b2 = large_scale_fading(&geom, &every, &mut SimRng::seed_from_u64(2)).unwrap();
        assert!((b2[(0, 0)] / pl - 1.0).abs() > 1e-6);
    }

    #[test]
    fn channel_second_moment_matches_beta() {
        let beta = BetaMatrix::from_fn(1, 1, |_, _| 3.5e-9).unwrap();
        let mut rng = SimRng::seed_from_u64(4);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| draw_channel(&beta, &mut rng).g[(0, 0)].norm_sqr() / 3.5e-9)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        let a = draw_channel(&beta, &mut SimRng::seed_from_u64(8));
        let b = draw_channel(&beta, &mut SimRng::seed_from_u64(8));
        assert_eq!(a, b);
    }

    #[test]
    fn beta_rejects_nonpositive() {
        assert!(BetaMatrix::from_fn(2, 2, |l, _| l as f64).is_err());
        assert!(BetaMatrix::from_fn(1, 1, |_, _| f64::NAN).is_err());
    }

    #[test]
    fn normalized_snrs_are_positive() {
        let c = cfg();
        assert!(c.rho_pilot() > 0.0 && c.rho_uplink() > 0.0);
    }
}
