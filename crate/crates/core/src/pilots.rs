//! Pilot matrices, orthonormal bases and the discrete assignment baselines.

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::metrics::SnrParams;
use crate::sysmodel::{complex_normal, BetaMatrix};
use crate::{CMatrix, Complex64};

/// Tolerance used when validating unit-modulus entries and column norms.
pub const UNIMODULAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotKind {
    /// Every entry has unit modulus.
    UnimodularEntries,
    /// Columns are taken from an orthonormal basis (scaled by `sqrt(tau)`).
    OrthonormalAssigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    f: CMatrix,
    kind: PilotKind,
    assignment: Option<Vec<usize>>,
}

impl PilotMatrix {
    /// Validates that every entry of `f` lies on the unit circle.
    pub fn unimodular(f: CMatrix) -> Result<Self> {
        if let Some((i, z)) = f.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > UNIMODULAR_TOL) {
            return Err(Error::Domain(format!(
                "entry {} has modulus {} (expected 1)",
                i,
                z.norm()
            )));
        }
        Ok(Self { f, kind: PilotKind::UnimodularEntries, assignment: None })
    }

    /// Builds the pilot matrix whose column `k` is basis column `assignment[k]`.
    pub fn from_assignment(basis: &PilotBasis, assignment: Vec<usize>) -> Result<Self> {
        let tau = basis.tau();
        if let Some(&p) = assignment.iter().find(|&&p| p >= tau) {
            return Err(Error::Domain(format!("pilot index {p} out of range for tau = {tau}")));
        }
        let f = CMatrix::from_fn(tau, assignment.len(), |i, k| basis.b[(i, assignment[k])]);
        Ok(Self { f, kind: PilotKind::OrthonormalAssigned, assignment: Some(assignment) })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.f
    }

    pub fn into_matrix(self) -> CMatrix {
        self.f
    }

    pub fn kind(&self) -> PilotKind {
        self.kind
    }

    pub fn assignment(&self) -> Option<&[usize]> {
        self.assignment.as_deref()
    }

    pub fn tau(&self) -> usize {
        self.f.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.f.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<Complex64> {
        self.f.column(k).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisFlavor {
    /// Haar-random unitary, scaled by `sqrt(tau)`.
    #[default]
    RandomUnitary,
    /// DFT matrix `exp(-j 2 pi i k / tau)`; its entries are unimodular.
    Dft,
}

/// `tau x tau` matrix with orthogonal columns of squared norm `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBasis {
    b: CMatrix,
    flavor: BasisFlavor,
}

impl PilotBasis {
    pub fn tau(&self) -> usize {
        self.b.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.b
    }

    pub fn flavor(&self) -> BasisFlavor {
        self.flavor
    }
}

pub fn make_basis<R: Rng + ?Sized>(tau: usize, flavor: BasisFlavor, rng: &mut R) -> PilotBasis {
    let scale = (tau as f64).sqrt();
    let b = match flavor {
        BasisFlavor::Dft => CMatrix::from_fn(tau, tau, |i, k| {
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((i * k) % tau) as f64 / tau as f64)
        }),
        BasisFlavor::RandomUnitary => {
            let g = CMatrix::from_fn(tau, tau, |_, _| complex_normal(rng));
            let qr = g.qr();
            let (mut q, r) = (qr.q(), qr.r());
            // Rotate each column by the phase of R's diagonal so Q is Haar distributed.
            for k in 0..tau {
                let d = r[(k, k)];
                let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
                for i in 0..tau {
                    q[(i, k)] *= ph;
                }
            }
            q * Complex64::from(scale)
        }
    };
    PilotBasis { b, flavor }
}

/// User `k` gets basis column `k mod tau`.
pub fn assign_round_robin(basis: &PilotBasis, n_users: usize) -> PilotMatrix {
    let tau = basis.tau();
    PilotMatrix::from_assignment(basis, (0..n_users).map(|k| k % tau).collect())
        .expect("round robin indices are in range")
}

/// Each user draws a basis column uniformly at random (with replacement).
pub fn assign_random<R: Rng + ?Sized>(basis: &PilotBasis, n_users: usize, rng: &mut R) -> PilotMatrix {
    let tau = basis.tau();
    let a = (0..n_users).map(|_| rng.random_range(0..tau)).collect();
    PilotMatrix::from_assignment(basis, a).expect("random indices are in range")
}

/// Sum-rate evaluation for orthonormal assignments.
///
/// Users on different pilots do not interact in the SINR, so the sum rate is
/// the sum of independent per-pilot group contributions and a single-user move
/// only touches two groups.
#[derive(Debug, Clone)]
pub struct AssignmentEvaluator<'a> {
    beta: &'a BetaMatrix,
    tau: usize,
    snr: SnrParams,
    beta_row_sum: Vec<f64>,
}

impl<'a> AssignmentEvaluator<'a> {
    pub fn new(beta: &'a BetaMatrix, tau: usize, snr: SnrParams) -> Self {
        let b = beta.as_matrix();
        let beta_row_sum = (0..b.nrows()).map(|l| b.row(l).sum()).collect();
        Self { beta, tau, snr, beta_row_sum }
    }

    /// Per-user rates of the users sharing one pilot, in the order given.
    pub fn group_rates(&self, members: &[usize]) -> Vec<f64> {
        let b = self.beta.as_matrix();
        let l_count = b.nrows();
        let tau = self.tau as f64;
        let (rp, rho) = (self.snr.pilot, self.snr.sinr);
        let t2 = tau * tau;
        // Shared estimator denominator per AP.
        let den: Vec<f64> = (0..l_count)
            .map(|l| rp * t2 * members.iter().map(|&k| b[(l, k)]).sum::<f64>() + tau)
            .collect();
        members
            .iter()
            .map(|&k| {
                let gamma: Vec<f64> = (0..l_count).map(|l| t2 * rp * b[(l, k)].powi(2) / den[l]).collect();
                let gsum: f64 = gamma.iter().sum();
                let num = rho * gsum * gsum;
                let d1: f64 = members
                    .iter()
                    .filter(|&&kp| kp != k)
                    .map(|&kp| {
                        let p: f64 = (0..l_count).map(|l| gamma[l] * b[(l, kp)] / b[(l, k)]).sum();
                        p * p * t2
                    })
                    .sum::<f64>()
                    * rho;
                let d2 = rho * (0..l_count).map(|l| gamma[l] * self.beta_row_sum[l]).sum::<f64>();
                (1.0 + num / (d1 + d2 + gsum)).log2()
            })
            .collect()
    }

    pub fn group_sum(&self, members: &[usize]) -> f64 {
        if members.is_empty() {
            0.0
        } else {
            self.group_rates(members).iter().sum()
        }
    }

    pub fn groups(&self, assignment: &[usize]) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.tau];
        for (k, &p) in assignment.iter().enumerate() {
            groups[p].push(k);
        }
        groups
    }

    pub fn user_rates(&self, assignment: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; assignment.len()];
        for members in self.groups(assignment) {
            for (k, r) in members.iter().zip(self.group_rates(&members)) {
                out[*k] = r;
            }
        }
        out
    }

    pub fn sum_rate(&self, assignment: &[usize]) -> f64 {
        self.groups(assignment).iter().map(|g| self.group_sum(g)).sum()
    }
}

/// Greedy reassignment of the worst user, starting from round robin.
///
/// Each round the user with the lowest rate moves to the pilot whose current
/// sharers have the least total large-scale gain (ties keep the current pilot,
/// then the lowest index). The best assignment seen is returned.
pub fn assign_greedy(basis: &PilotBasis, beta: &BetaMatrix, cfg: &SystemConfig, n_iter: usize) -> PilotMatrix {
    let tau = basis.tau();
    let k_count = beta.n_users();
    let eval = AssignmentEvaluator::new(beta, tau, SnrParams::from_config(cfg));
    let b = beta.as_matrix();
    let col_sum: Vec<f64> = (0..k_count).map(|k| b.column(k).sum()).collect();

    let mut assignment: Vec<usize> = (0..k_count).map(|k| k % tau).collect();
    let mut best = assignment.clone();
    let mut best_rate = eval.sum_rate(&assignment);
    for _ in 0..n_iter {
        let rates = eval.user_rates(&assignment);
        let worst = argmin(&rates);
        let contamination = |p: usize| -> f64 {
            (0..k_count)
                .filter(|&kp| kp != worst && assignment[kp] == p)
                .map(|kp| col_sum[kp])
                .sum()
        };
        let current = assignment[worst];
        let mut choice = current;
        let mut choice_c = contamination(current);
        for p in 0..tau {
            let c = contamination(p);
            if c < choice_c {
                choice = p;
                choice_c = c;
            }
        }
        assignment[worst] = choice;
        let r = eval.sum_rate(&assignment);
        if r > best_rate {
            best_rate = r;
            best = assignment.clone();
        }
    }
    PilotMatrix::from_assignment(basis, best).expect("greedy indices are in range")
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TabuConfig {
    /// Iterations a reverse move stays forbidden; `None` uses `ceil(K / 4)`.
    /// Zero turns the search into steepest ascent that stops at a local optimum.
    pub tenure: Option<usize>,
    /// `None` uses `100 * K`.
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TabuOutcome {
    pub pilots: PilotMatrix,
    pub best_sum_rate: f64,
    /// Sum rate after every accepted move (the starting point first).
    pub trace: Vec<f64>,
}

/// Tabu search over single-user pilot reassignments maximizing the sum rate.
pub fn assign_tabu(basis: &PilotBasis, beta: &BetaMatrix, cfg: &SystemConfig, tabu: TabuConfig) -> PilotMatrix {
    tabu_search(basis, beta, SnrParams::from_config(cfg), tabu).pilots
}

pub fn tabu_search(basis: &PilotBasis, beta: &BetaMatrix, snr: SnrParams, tabu: TabuConfig) -> TabuOutcome {
    let tau = basis.tau();
    let k_count = beta.n_users();
    let tenure = tabu.tenure.unwrap_or(k_count.div_ceil(4));
    let max_iter = tabu.max_iter.unwrap_or(100 * k_count);
    let eval = AssignmentEvaluator::new(beta, tau, snr);

    let mut assignment: Vec<usize> = (0..k_count).map(|k| k % tau).collect();
    let mut groups = eval.groups(&assignment);
    let mut group_val: Vec<f64> = groups.iter().map(|g| eval.group_sum(g)).collect();
    let mut current: f64 = group_val.iter().sum();
    let mut best = assignment.clone();
    let mut best_rate = current;
    let mut trace = vec![current];
    // tabu_until[k][p]: iteration before which moving user k to pilot p is forbidden.
    let mut tabu_until = vec![vec![0usize; tau]; k_count];

    for it in 0..max_iter {
        let mut chosen: Option<(usize, usize, f64, f64, f64)> = None;
        for k in 0..k_count {
            let from = assignment[k];
            let without: Vec<usize> = groups[from].iter().copied().filter(|&u| u != k).collect();
            let v_from = eval.group_sum(&without);
            for to in 0..tau {
                if to == from {
                    continue;
                }
                let mut with = groups[to].clone();
                with.push(k);
                let v_to = eval.group_sum(&with);
                let cand = current - group_val[from] - group_val[to] + v_from + v_to;
                let is_tabu = tenure > 0 && it < tabu_until[k][to];
                if is_tabu && cand <= best_rate {
                    continue;
                }
                if chosen.is_none_or(|c| cand > c.2) {
                    chosen = Some((k, to, cand, v_from, v_to));
                }
            }
        }
        let Some((k, to, cand, v_from, v_to)) = chosen else { break };
        if tenure == 0 && cand <= current {
            break;
        }
        let from = assignment[k];
        groups[from].retain(|&u| u != k);
        groups[to].push(k);
        group_val[from] = v_from;
        group_val[to] = v_to;
        assignment[k] = to;
        current = cand;
        trace.push(current);
        if tenure > 0 {
            tabu_until[k][from] = it + 1 + tenure;
        }
        if current > best_rate {
            best_rate = current;
            best = assignment.clone();
        }
    }
    let pilots = PilotMatrix::from_assignment(basis, best).expect("tabu indices are in range");
    TabuOutcome { pilots, best_sum_rate: best_rate, trace }
}

/// Every assignment of `n_users` users to `tau` pilots (for small brute-force checks).
pub fn all_assignments(tau: usize, n_users: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = tau.pow(n_users as u32);
    (0..total).map(move |mut idx| {
        let mut a = vec![0; n_users];
        for slot in a.iter_mut() {
            *slot = idx % tau;
            idx /= tau;
        }
        a
    })
}
