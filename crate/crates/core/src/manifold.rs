//! Pilot design on the complex circle manifold.
//!
//! Points are `tau x K` matrices with unit-modulus entries. The tangent space
//! at `X` holds matrices `Z` with `Re(conj(X_ik) Z_ik) = 0` entrywise, the
//! metric is `Re Tr(U^H V)` and the retraction renormalizes `X + Z` entrywise.
//! The sum rate is maximized with Riemannian conjugate-gradient ascent and an
//! Armijo backtracking line search.

use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::metrics::{gram, SinrTerms, SnrParams};
use crate::pilots::PilotMatrix;
use crate::sysmodel::BetaMatrix;
use crate::{CMatrix, Complex64, RMatrix};

/// Entry modulus tolerance for manifold points.
pub const MANIFOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint(CMatrix);

impl ManifoldPoint {
    pub fn new(x: CMatrix) -> Result<Self> {
        if let Some(z) = x.iter().find(|z| (z.norm() - 1.0).abs() > MANIFOLD_TOL) {
            return Err(Error::Domain(format!("entry modulus {} is not 1", z.norm())));
        }
        Ok(Self(x))
    }

    /// Entries `exp(j theta)` with `theta` uniform on `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(tau: usize, n_users: usize, rng: &mut R) -> Self {
        Self(CMatrix::from_fn(tau, n_users, |_, _| {
            Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
        }))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_pilots(self) -> PilotMatrix {
        PilotMatrix::unimodular(self.0).expect("manifold points are unimodular")
    }
}

/// Tangent vector; the anchor point is implied by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDirection(CMatrix);

impl TangentDirection {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    fn scaled(&self, a: f64) -> CMatrix {
        &self.0 * Complex64::from(a)
    }
}

/// `R_X(Z) = (X + Z) / |X + Z|`, entrywise.
pub fn retract(x: &ManifoldPoint, z: &CMatrix) -> Result<ManifoldPoint> {
    if x.0.shape() != z.shape() {
        return Err(shape_err(x.0.shape(), z.shape()));
    }
    let mut out = &x.0 + z;
    for c in 0..out.ncols() {
        for r in 0..out.nrows() {
            let v = out[(r, c)];
            let n = v.norm();
            if n == 0.0 {
                return Err(Error::DegenerateRetraction { row: r, col: c });
            }
            out[(r, c)] = v / n;
        }
    }
    Ok(ManifoldPoint(out))
}

/// Removes the radial component of `u` at every entry: `U - Re(conj(X) U) X`.
pub fn project_tangent(x: &ManifoldPoint, u: &CMatrix) -> TangentDirection {
    TangentDirection(x.0.zip_map(u, |xi, ui| ui - xi * (xi.conj() * ui).re))
}

/// `Re Tr(U^H V)`.
pub fn metric(u: &CMatrix, v: &CMatrix) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Wirtinger gradient `2 df/dF*` of the sum rate (bit/s/Hz) at an arbitrary
/// (not necessarily unimodular) pilot matrix.
///
/// The rate of user `k` depends on the pilots only through row `k` of
/// `S = |F^H F|^2`, so the gradient is assembled as `2 F ((W + W^T) o A)` with
/// `A = F^H F` and `W[k, k'] = dR_k / dS[k, k']`. Both the estimate powers and
/// the coherent contamination term contribute to `W`.
pub fn euclidean_gradient(f: &CMatrix, beta: &BetaMatrix, snr: SnrParams) -> Result<CMatrix> {
    if f.ncols() != beta.n_users() {
        return Err(shape_err((f.nrows(), beta.n_users()), f.shape()));
    }
    let a = gram(f);
    let s = a.map(|z| z.norm_sqr());
    let t = SinrTerms::compute(s, beta, f.nrows(), snr);
    let b = beta.as_matrix();
    let (l_count, k_count) = (b.nrows(), b.ncols());
    let rho = snr.sinr;
    let ln2 = std::f64::consts::LN_2;

    // Q[k, k'] = P[k, k'] S[k, k'] off the diagonal.
    let mut q = t.p.component_mul(&t.s);
    q.fill_diagonal(0.0);
    // cross[l, k] = sum_{k' != k} P[k, k'] S[k, k'] beta[l, k']
    let cross = b * q.transpose();
    let beta_row_sum: Vec<f64> = (0..l_count).map(|l| b.row(l).sum()).collect();

    let mut v = RMatrix::zeros(l_count, k_count);
    let mut u = vec![0.0; k_count];
    for k in 0..k_count {
        let (n, d) = (t.num[k], t.den_sinr[k]);
        u[k] = 1.0 / (ln2 * (1.0 + n / d));
        let dn = 2.0 * rho * t.gamma_sum[k];
        for l in 0..l_count {
            let dd = 2.0 * rho * cross[(l, k)] / b[(l, k)] + rho * beta_row_sum[l] + 1.0;
            let dsinr_dgamma = dn / d - n / (d * d) * dd;
            v[(l, k)] = dsinr_dgamma * t.gamma[(l, k)] * snr.pilot / t.den[(l, k)];
        }
    }
    // W = diag(u) * (-(V^T beta) - direct contamination part)
    let mut w = -(v.tr_mul(b));
    for k in 0..k_count {
        let coef = t.num[k] / t.den_sinr[k].powi(2) * rho;
        for kp in 0..k_count {
            if kp != k {
                w[(k, kp)] -= coef * t.p[(k, kp)].powi(2);
            }
            w[(k, kp)] *= u[k];
        }
    }
    let sym = &w + w.transpose();
    let m = a.zip_map(&sym, |aij, wij| aij * wij);
    Ok(f * m * Complex64::from(2.0))
}

pub fn riemannian_gradient(x: &ManifoldPoint, beta: &BetaMatrix, snr: SnrParams) -> Result<TangentDirection> {
    Ok(project_tangent(x, &euclidean_gradient(&x.0, beta, snr)?))
}

/// Central finite differences of `objective` along every real and imaginary
/// coordinate, returned as `d/dRe + j d/dIm` (equal to `2 df/dF*`).
pub fn fd_gradient(objective: impl Fn(&CMatrix) -> f64, f: &CMatrix, step: f64) -> CMatrix {
    let mut g = CMatrix::zeros(f.nrows(), f.ncols());
    let mut probe = f.clone();
    for c in 0..f.ncols() {
        for r in 0..f.nrows() {
            let orig = probe[(r, c)];
            let mut part = [0.0; 2];
            for (i, dir) in [Complex64::new(step, 0.0), Complex64::new(0.0, step)].into_iter().enumerate() {
                probe[(r, c)] = orig + dir;
                let up = objective(&probe);
                probe[(r, c)] = orig - dir;
                let down = objective(&probe);
                part[i] = (up - down) / (2.0 * step);
            }
            probe[(r, c)] = orig;
            g[(r, c)] = Complex64::new(part[0], part[1]);
        }
    }
    g
}

/// Finite-difference gradient of the unconstrained sum rate; a test oracle.
pub fn fd_gradient_oracle(f: &CMatrix, beta: &BetaMatrix, snr: SnrParams, step: f64) -> Result<CMatrix> {
    if !(1e-8..=1e-4).contains(&step) {
        return Err(Error::Domain(format!("finite-difference step {step} outside [1e-8, 1e-4]")));
    }
    if f.ncols() != beta.n_users() {
        return Err(shape_err((f.nrows(), beta.n_users()), f.shape()));
    }
    let tau = f.nrows();
    Ok(fd_gradient(
        |p| {
            crate::metrics::sinr_from_gram_sq(&p.ad_mul(p).map(|z| z.norm_sqr()), beta, tau, snr)
                .iter()
                .map(|s| (1.0 + s).log2())
                .sum()
        },
        f,
        step,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoConfig {
    pub initial_step: f64,
    /// Backtracking factor in (0, 1).
    pub contraction: f64,
    pub sufficient_increase: f64,
    /// Number of contractions tried after the initial step.
    pub max_backtracks: u32,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self { initial_step: 1.0, contraction: 0.5, sufficient_increase: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoStep {
    /// Accepted step, or 0 when no trial satisfied the condition.
    pub step: f64,
    /// Accepted point and its objective value.
    pub accepted: Option<(ManifoldPoint, f64)>,
    pub trials: u32,
}

impl ArmijoStep {
    pub fn stalled(&self) -> bool {
        self.accepted.is_none()
    }
}

/// Largest `initial_step * contraction^m` with
/// `f(R_X(a Z)) >= f(X) + c * a * slope`, where `slope = <grad f(X), Z>`.
pub fn armijo_step(
    x: &ManifoldPoint,
    dir: &TangentDirection,
    f0: f64,
    slope: f64,
    objective: impl Fn(&ManifoldPoint) -> f64,
    cfg: &ArmijoConfig,
) -> ArmijoStep {
    let mut alpha = cfg.initial_step;
    for m in 0..=cfg.max_backtracks {
        if let Ok(cand) = retract(x, &dir.scaled(alpha)) {
            let v = objective(&cand);
            if v >= f0 + cfg.sufficient_increase * alpha * slope {
                return ArmijoStep { step: alpha, accepted: Some((cand, v)), trials: m + 1 };
            }
        }
        alpha *= cfg.contraction;
    }
    ArmijoStep { step: 0.0, accepted: None, trials: cfg.max_backtracks + 1 }
}

/// Conjugate coefficient rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CgRule {
    /// `max(0, <G+, G+ - T(G)> / <G, G>)`. Usually reaches a higher
    /// objective, but zigzags on sharp ridges and often runs to `max_iter`.
    PolakRibiere,
    /// `max(0, <G+, G+ - T(Xi)> / <G, G>)`, with the previous direction in
    /// place of the previous gradient.
    #[default]
    DirectionDifference,
    /// Plain Riemannian gradient ascent.
    SteepestAscent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Stop once the relative objective increase of an iteration is at most this.
    pub eps: f64,
    pub max_iter: usize,
    pub armijo: ArmijoConfig,
    pub cg_rule: CgRule,
    /// Step for finite-difference checks.
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { eps: 1e-6, max_iter: 500, armijo: ArmijoConfig::default(), cg_rule: CgRule::default(), fd_step: 1e-6 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(self.eps > 0.0) || self.max_iter < 1 {
            return Err(Error::InvalidConfig("eps must be > 0 and max_iter >= 1".into()));
        }
        if !(a.contraction > 0.0 && a.contraction < 1.0) || !(a.initial_step > 0.0) {
            return Err(Error::InvalidConfig("armijo contraction must lie in (0, 1), initial step > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative objective increase fell below `eps`.
    Converged,
    /// Riemannian gradient vanished.
    ZeroGradient,
    /// Line search found no admissible step.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub pilots: PilotMatrix,
    /// Sum rate (bit/s/Hz) at the start and after every accepted iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_grad_norm: f64,
    pub initial_grad_norm: f64,
    /// Iterations where the direction was reset to the gradient.
    pub resets: usize,
}

impl OptimizeOutcome {
    pub fn final_objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

/// Riemannian conjugate-gradient ascent of the sum rate.
///
/// Vectors are transported by projection onto the new tangent space, the
/// conjugate coefficient follows [`CgRule`], and the direction falls back to
/// the gradient whenever it is not an ascent direction.
pub fn optimize_pilots<R: Rng + ?Sized>(
    beta: &BetaMatrix,
    tau: usize,
    snr: SnrParams,
    cfg: &OptimizerConfig,
    init: Option<ManifoldPoint>,
    rng: &mut R,
) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    let k_count = beta.n_users();
    let mut x = match init {
        Some(p) => {
            if p.0.shape() != (tau, k_count) {
                return Err(shape_err((tau, k_count), p.0.shape()));
            }
            p
        }
        None => ManifoldPoint::random(tau, k_count, rng),
    };
    let objective = |p: &ManifoldPoint| -> f64 {
        crate::metrics::sinr_from_gram_sq(&p.0.ad_mul(&p.0).map(|z| z.norm_sqr()), beta, tau, snr)
            .iter()
            .map(|s| (1.0 + s).log2())
            .sum()
    };

    let mut fx = objective(&x);
    let mut grad = riemannian_gradient(&x, beta, snr)?;
    let initial_grad_norm = grad.norm_sq().sqrt();
    let mut dir = grad.clone();
    let mut trace = vec![fx];
    let mut stop = StopReason::MaxIterations;
    let mut resets = 0;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        if grad.norm_sq() <= 1e-28 {
            stop = StopReason::ZeroGradient;
            break;
        }
        if metric(&grad.0, &dir.0) <= 0.0 {
            dir = grad.clone();
            resets += 1;
        }
        let slope = metric(&grad.0, &dir.0);
        let ls = armijo_step(&x, &dir, fx, slope, objective, &cfg.armijo);
        let Some((x_new, f_new)) = ls.accepted else {
            stop = StopReason::Stalled;
            break;
        };
        iterations += 1;
        let grad_new = riemannian_gradient(&x_new, beta, snr)?;
        let grad_new_t = project_tangent(&x_new, &grad_new.0);
        let dir_t = project_tangent(&x_new, &dir.0);
        let denom = grad.norm_sq();
        let cg = match cfg.cg_rule {
            CgRule::PolakRibiere => {
                let diff = &grad_new_t.0 - project_tangent(&x_new, &grad.0).0;
                (metric(&grad_new_t.0, &diff) / denom).max(0.0)
            }
            CgRule::DirectionDifference => {
                let diff = &grad_new_t.0 - &dir_t.0;
                (metric(&grad_new_t.0, &diff) / denom).max(0.0)
            }
            CgRule::SteepestAscent => 0.0,
        };
        dir = TangentDirection(&grad_new.0 + &dir_t.0 * Complex64::from(cg));

        let increase = f_new - fx;
        trace.push(f_new);
        x = x_new;
        fx = f_new;
        grad = grad_new;
        if increase <= cfg.eps * fx.abs().max(f64::MIN_POSITIVE) {
            stop = StopReason::Converged;
            break;
        }
    }
    let final_grad_norm = grad.norm_sq().sqrt();
    Ok(OptimizeOutcome {
        pilots: x.into_pilots(),
        trace,
        iterations,
        stop,
        final_grad_norm,
        initial_grad_norm,
        resets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(r: usize, k: usize, rng: &mut SimRng) -> CMatrix {
        CMatrix::from_fn(r, k, |_, _| crate::sysmodel::complex_normal(rng))
    }

    #[test]
    fn retraction_basics() {
        let mut rng = SimRng::seed_from_u64(1);
        let x = ManifoldPoint::random(3, 4, &mut rng);
        assert_eq!(retract(&x, &CMatrix::zeros(3, 4)).unwrap(), x);
        let one = ManifoldPoint::new(CMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap();
        let r = retract(&one, &CMatrix::from_element(1, 1, c(0.0, 1.0))).unwrap();
        assert!((r.matrix()[(0, 0)] - c(1.0, 1.0) / 2f64.sqrt()).norm() < 1e-15);
        let bad = retract(&one, &CMatrix::from_element(1, 1, c(-1.0, 0.0)));
        assert_eq!(bad, Err(Error::DegenerateRetraction { row: 0, col: 0 }));
    }

    #[test]
    fn retraction_is_second_order_for_tangent_steps() {
        let mut rng = SimRng::seed_from_u64(2);
        let x = ManifoldPoint::random(4, 3, &mut rng);
        let z = project_tangent(&x, &random_matrix(4, 3, &mut rng));
        let err = |t: f64| {
            let step = z.matrix() * c(t, 0.0);
            (retract(&x, &step).unwrap().matrix() - (x.matrix() + &step)).norm()
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!((e1 / e2 - 4.0).abs() < 0.05, "ratio {}", e1 / e2);
    }

    #[test]
    fn projection_properties() {
        let mut rng = SimRng::seed_from_u64(3);
        let x = ManifoldPoint::random(5, 4, &mut rng);
        assert!(project_tangent(&x, x.matrix()).norm_sq() < 1e-24);
        let jx = x.matrix() * c(0.0, 1.0);
        assert!((project_tangent(&x, &jx).matrix() - &jx).norm() < 1e-14);
        for _ in 0..20 {
            let u = random_matrix(5, 4, &mut rng);
            let p = project_tangent(&x, &u);
            let pp = project_tangent(&x, p.matrix());
            assert!((pp.matrix() - p.matrix()).norm() < 1e-12);
            for (xi, zi) in x.matrix().iter().zip(p.matrix().iter()) {
                assert!((xi.conj() * zi).re.abs() < 1e-9);
            }
            let v = project_tangent(&x, &random_matrix(5, 4, &mut rng));
            assert!(metric(&(&u - p.matrix()), v.matrix()).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_properties() {
        let x = ManifoldPoint::new(CMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap();
        let u = project_tangent(&x, &CMatrix::from_element(1, 1, c(0.0, 1.0)));
        assert!((metric(u.matrix(), u.matrix()) - 1.0).abs() < 1e-15);
        let mut rng = SimRng::seed_from_u64(4);
        for _ in 0..20 {
            let a = random_matrix(3, 3, &mut rng);
            let b = random_matrix(3, 3, &mut rng);
            assert!((metric(&a, &b) - metric(&b, &a)).abs() < 1e-12);
            assert!((metric(&a, &a) - a.norm_squared()).abs() < 1e-12);
        }
    }

    fn instance(tau: usize, k: usize, l: usize, seed: u64) -> (CMatrix, BetaMatrix, SnrParams) {
        let mut rng = SimRng::seed_from_u64(seed);
        let cfg = crate::SystemConfig::default();
        let base = 1.0 / cfg.rho_pilot();
        let beta = BetaMatrix::from_fn(l, k, |_, _| base * 10f64.powf(rng.random::<f64>() * 3.0 - 1.0)).unwrap();
        let f = ManifoldPoint::random(tau, k, &mut rng).0;
        (f, beta, SnrParams::from_config(&cfg))
    }

    fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn fd_oracle_is_exact_for_linear_functionals() {
        let mut rng = SimRng::seed_from_u64(5);
        let a = random_matrix(3, 2, &mut rng);
        let f = random_matrix(3, 2, &mut rng);
        let g = fd_gradient(|p| metric(&a, p), &f, 1e-5);
        assert!((g - a).norm() < 1e-8);
    }

    #[test]
    fn fd_oracle_converges_at_second_order() {
        let (f, beta, snr) = instance(3, 2, 4, 6);
        let exact = euclidean_gradient(&f, &beta, snr).unwrap();
        let e1 = (fd_gradient_oracle(&f, &beta, snr, 1e-3).err().map(|_| ()).is_some(), ());
        assert!(e1.0, "step outside the allowed range must be rejected");
        let big = fd_gradient(|p| crate::metrics::sum_rate(p, &beta, snr).unwrap(), &f, 2e-2);
        let half = fd_gradient(|p| crate::metrics::sum_rate(p, &beta, snr).unwrap(), &f, 1e-2);
        let ratio = (&big - &exact).norm() / (&half - &exact).norm();
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn single_user_gradient_matches_fd() {
        let (f, beta, snr) = instance(4, 1, 3, 7);
        let g = euclidean_gradient(&f, &beta, snr).unwrap();
        let fd = fd_gradient_oracle(&f, &beta, snr, 1e-6).unwrap();
        assert!(rel_err(&g, &fd) < 1e-5, "{}", rel_err(&g, &fd));
    }

    #[test]
    fn multi_user_gradient_matches_fd() {
        let (f, beta, snr) = instance(2, 3, 2, 8);
        let g = euclidean_gradient(&f, &beta, snr).unwrap();
        let fd = fd_gradient_oracle(&f, &beta, snr, 1e-6).unwrap();
        assert!(rel_err(&g, &fd) < 1e-4, "{}", rel_err(&g, &fd));
    }

    #[test]
    fn gradient_under_scaled_beta_matches_fd() {
        let (f, beta, snr) = instance(3, 4, 5, 9);
        let beta2 = beta.scaled(2.0).unwrap();
        let g = euclidean_gradient(&f, &beta2, snr).unwrap();
        let fd = fd_gradient_oracle(&f, &beta2, snr, 1e-6).unwrap();
        assert!(rel_err(&g, &fd) < 1e-4);
        assert!(rel_err(&g, &euclidean_gradient(&f, &beta, snr).unwrap()) > 1e-6);
    }

    #[test]
    fn riemannian_gradient_is_an_ascent_direction() {
        let (f, beta, snr) = instance(4, 6, 8, 10);
        let x = ManifoldPoint::new(f).unwrap();
        let g = riemannian_gradient(&x, &beta, snr).unwrap();
        for (xi, gi) in x.matrix().iter().zip(g.matrix().iter()) {
            assert!((xi.conj() * gi).re.abs() < 1e-9 * g.norm_sq().sqrt().max(1.0));
        }
        let obj = |t: f64| {
            let p = retract(&x, &(g.matrix() * c(t, 0.0))).unwrap();
            crate::metrics::sum_rate(p.matrix(), &beta, snr).unwrap()
        };
        let h = 1e-6;
        let dd = (obj(h) - obj(-h)) / (2.0 * h);
        assert!(dd > 0.0);
        assert!((dd / g.norm_sq() - 1.0).abs() < 1e-4, "{dd} vs {}", g.norm_sq());
    }

    #[test]
    fn armijo_on_single_circle_entry() {
        // f(x) = -|x - 1|^2 on the unit circle: maximized at x = 1.
        let x = ManifoldPoint::new(CMatrix::from_element(1, 1, Complex64::from_polar(1.0, 2.0))).unwrap();
        let obj = |p: &ManifoldPoint| -(p.matrix()[(0, 0)] - c(1.0, 0.0)).norm_sqr();
        let egrad = (x.matrix() - CMatrix::from_element(1, 1, c(1.0, 0.0))) * c(-2.0, 0.0);
        let g = project_tangent(&x, &egrad);
        let slope = metric(g.matrix(), g.matrix());
        let cfg = ArmijoConfig::default();
        let res = armijo_step(&x, &g, obj(&x), slope, obj, &cfg);
        let (p, v) = res.accepted.clone().unwrap();
        assert!(v >= obj(&x) + cfg.sufficient_increase * res.step * slope);
        assert!((obj(&p) - v).abs() < 1e-15);
        let k = (res.step.log2()).round();
        assert!((res.step - 2f64.powf(k)).abs() < 1e-15);
    }

    #[test]
    fn armijo_reports_stall_for_descent_direction() {
        let x = ManifoldPoint::new(CMatrix::from_element(1, 1, Complex64::from_polar(1.0, 2.0))).unwrap();
        let obj = |p: &ManifoldPoint| -(p.matrix()[(0, 0)] - c(1.0, 0.0)).norm_sqr();
        let egrad = (x.matrix() - CMatrix::from_element(1, 1, c(1.0, 0.0))) * c(2.0, 0.0);
        let d = project_tangent(&x, &egrad);
        let res = armijo_step(&x, &d, obj(&x), 1.0, obj, &ArmijoConfig::default());
        assert!(res.stalled());
        assert_eq!(res.step, 0.0);
    }

    #[test]
    fn optimizer_trace_and_init_bookkeeping() {
        let (f, beta, snr) = instance(4, 6, 8, 11);
        let init = ManifoldPoint::new(f.clone()).unwrap();
        let start = crate::metrics::sum_rate(&f, &beta, snr).unwrap();
        let out = optimize_pilots(&beta, 4, snr, &OptimizerConfig::default(), Some(init), &mut SimRng::seed_from_u64(0))
            .unwrap();
        assert!((out.trace[0] - start).abs() < 1e-12);
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(out.final_objective() >= start);
        for z in out.pilots.matrix().iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn converged_gradient_is_small() {
        let (_, beta, snr) = instance(3, 5, 8, 12);
        let cfg = OptimizerConfig { eps: 1e-12, max_iter: 3000, ..Default::default() };
        let out = optimize_pilots(&beta, 3, snr, &cfg, None, &mut SimRng::seed_from_u64(1)).unwrap();
        assert!(
            out.final_grad_norm <= 1e-3 * out.initial_grad_norm,
            "{} vs {} ({:?})",
            out.final_grad_norm,
            out.initial_grad_norm,
            out.stop
        );
    }

    #[test]
    fn objective_is_invariant_to_column_phases() {
        let (f, beta, snr) = instance(4, 5, 6, 13);
        let mut rng = SimRng::seed_from_u64(14);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(5, |_, _| {
            Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
        }));
        let a = crate::metrics::sum_rate(&f, &beta, snr).unwrap();
        let b = crate::metrics::sum_rate(&(&f * d), &beta, snr).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }
}
