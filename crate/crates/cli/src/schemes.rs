//! Pilot schemes compared by the rate and sensing experiments.

use std::fmt;
use std::str::FromStr;

use cfmimo_core::manifold::{optimize_pilots, OptimizerConfig};
use cfmimo_core::metrics::SnrParams;
use cfmimo_core::pilots::{
    assign_greedy, assign_random, assign_round_robin, assign_tabu, make_basis, BasisFlavor, PilotMatrix, TabuConfig,
};
use cfmimo_core::sysmodel::BetaMatrix;
use cfmimo_core::{Result, SystemConfig};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PilotScheme {
    /// Manifold-optimized unimodular pilots.
    Proposed,
    Greedy,
    Tabu,
    /// Random assignment from a random orthonormal basis.
    Random,
    RoundRobin,
    /// Random assignment from the DFT basis.
    Dft,
}

impl PilotScheme {
    pub const ALL: [PilotScheme; 6] = [
        PilotScheme::Proposed,
        PilotScheme::Greedy,
        PilotScheme::Tabu,
        PilotScheme::Random,
        PilotScheme::RoundRobin,
        PilotScheme::Dft,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PilotScheme::Proposed => "proposed",
            PilotScheme::Greedy => "greedy",
            PilotScheme::Tabu => "tabu",
            PilotScheme::Random => "random",
            PilotScheme::RoundRobin => "round_robin",
            PilotScheme::Dft => "dft",
        }
    }

    /// Stream index of the scheme's random draws within a trial; fixed per
    /// scheme so results do not depend on which other schemes run.
    pub fn stage(&self) -> u64 {
        1 + Self::ALL.iter().position(|s| s == self).expect("listed") as u64
    }
}

impl fmt::Display for PilotScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PilotScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            format!("unknown pilot scheme '{s}' (expected proposed, greedy, tabu, random, round_robin or dft)")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub optimizer: OptimizerConfig,
    /// Greedy passes; `None` uses the number of users.
    pub greedy_iter: Option<usize>,
    pub tabu: TabuConfig,
}

pub fn design_pilots<R: Rng + ?Sized>(
    scheme: PilotScheme,
    beta: &BetaMatrix,
    cfg: &SystemConfig,
    p: &DesignParams,
    rng: &mut R,
) -> Result<PilotMatrix> {
    let k = beta.n_users();
    Ok(match scheme {
        PilotScheme::Proposed => {
            optimize_pilots(beta, cfg.tau, SnrParams::from_config(cfg), &p.optimizer, None, rng)?.pilots
        }
        PilotScheme::Dft => assign_random(&make_basis(cfg.tau, BasisFlavor::Dft, rng), k, rng),
        _ => {
            let basis = make_basis(cfg.tau, BasisFlavor::RandomUnitary, rng);
            match scheme {
                PilotScheme::Greedy => assign_greedy(&basis, beta, cfg, p.greedy_iter.unwrap_or(k)),
                PilotScheme::Tabu => assign_tabu(&basis, beta, cfg, p.tabu),
                PilotScheme::Random => assign_random(&basis, k, rng),
                _ => assign_round_robin(&basis, k),
            }
        }
    })
}
