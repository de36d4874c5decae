//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Unknown keys are rejected. See `docs/config.md` for the key
//! reference.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cfmimo_core::detection::{CsiMode, EpConfig, GabpConfig, Scheme};
use cfmimo_core::manifold::{CgRule, OptimizerConfig};
use cfmimo_core::sensing::AcfMode;
use cfmimo_core::{SinrPower, SystemConfig};

use crate::schemes::PilotScheme;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Design,
    RatesCdf,
    MedianVsTau,
    MedianVsK,
    BerSweep,
    BerVsRatio,
    AcfProfile,
    RangeProfile,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Design,
        ExperimentKind::RatesCdf,
        ExperimentKind::MedianVsTau,
        ExperimentKind::MedianVsK,
        ExperimentKind::BerSweep,
        ExperimentKind::BerVsRatio,
        ExperimentKind::AcfProfile,
        ExperimentKind::RangeProfile,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Design => "design",
            ExperimentKind::RatesCdf => "rates_cdf",
            ExperimentKind::MedianVsTau => "median_vs_tau",
            ExperimentKind::MedianVsK => "median_vs_k",
            ExperimentKind::BerSweep => "ber_sweep",
            ExperimentKind::BerVsRatio => "ber_vs_ratio",
            ExperimentKind::AcfProfile => "acf_profile",
            ExperimentKind::RangeProfile => "range_profile",
        }
    }

    fn uses_detectors(&self) -> bool {
        matches!(self, ExperimentKind::BerSweep | ExperimentKind::BerVsRatio)
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub system: SystemConfig,
    pub trials: usize,
    pub seed: u64,
    /// Pilot schemes or detectors, depending on `kind`; empty selects the
    /// defaults of the kind.
    pub schemes: Vec<String>,
    pub out: Option<PathBuf>,
    /// Pilot lengths for `median_vs_tau`, user counts for `median_vs_k`.
    pub sweep: Vec<usize>,
    /// SNR grid for `ber_sweep`.
    pub snr_db: Vec<f64>,
    /// `(tau, K)` pairs for `ber_vs_ratio`.
    pub ber_pairs: Vec<(usize, usize)>,
    /// Fixed SNR of `ber_vs_ratio`.
    pub ratio_snr_db: f64,
    pub csi: CsiMode,
    pub symbols_per_drop: usize,
    pub optimizer: OptimizerConfig,
    /// `None` uses K.
    pub greedy_iter: Option<usize>,
    pub tabu_tenure: Option<usize>,
    pub tabu_max_iter: Option<usize>,
    pub gabp: GabpConfig,
    pub ep: EpConfig,
    pub acf_mode: AcfMode,
    pub range_tau: usize,
    pub range_targets_m: Vec<f64>,
    pub range_snr_db: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::RatesCdf,
            system: SystemConfig::default(),
            trials: 10,
            seed: 1,
            schemes: Vec::new(),
            out: None,
            sweep: Vec::new(),
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            ber_pairs: vec![(10, 10), (10, 20), (10, 30), (10, 40)],
            ratio_snr_db: 20.0,
            csi: CsiMode::Estimated,
            symbols_per_drop: 100,
            optimizer: OptimizerConfig::default(),
            greedy_iter: None,
            tabu_tenure: None,
            tabu_max_iter: None,
            gabp: GabpConfig::default(),
            ep: EpConfig::default(),
            acf_mode: AcfMode::Aperiodic,
            range_tau: 64,
            range_targets_m: vec![8.0, 19.0],
            range_snr_db: 20.0,
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("'{v}': {e}"))
}

fn parse_opt<T: FromStr>(v: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{v}' is not true or false")),
    }
}

fn parse_pairs(v: &str) -> Result<Vec<(usize, usize)>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| format!("'{p}' is not tau:k"))?;
            Ok((parse_num(a.trim())?, parse_num(b.trim())?))
        })
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), ToString::to_string)
}

impl ExperimentSpec {
    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let s = &mut self.system;
        match key {
            "kind" => self.kind = v.parse()?,
            "trials" => self.trials = parse_num(v)?,
            "seed" => self.seed = parse_num(v)?,
            "schemes" => self.schemes = parse_list(v)?,
            "out" => self.out = (!v.is_empty()).then(|| PathBuf::from(v)),
            "sweep" => self.sweep = parse_list(v)?,
            "snr_db" => self.snr_db = parse_list(v)?,
            "ber_pairs" => self.ber_pairs = parse_pairs(v)?,
            "ratio_snr_db" => self.ratio_snr_db = parse_num(v)?,
            "csi" => {
                self.csi = match v {
                    "estimated" => CsiMode::Estimated,
                    "perfect" => CsiMode::Perfect,
                    _ => return Err(format!("csi must be estimated or perfect (got '{v}')")),
                }
            }
            "symbols_per_drop" => self.symbols_per_drop = parse_num(v)?,
            "opt_eps" => self.optimizer.eps = parse_num(v)?,
            "opt_max_iter" => self.optimizer.max_iter = parse_num(v)?,
            "opt_initial_step" => self.optimizer.armijo.initial_step = parse_num(v)?,
            "opt_contraction" => self.optimizer.armijo.contraction = parse_num(v)?,
            "opt_sufficient_increase" => self.optimizer.armijo.sufficient_increase = parse_num(v)?,
            "opt_max_backtracks" => self.optimizer.armijo.max_backtracks = parse_num(v)?,
            "cg_rule" => {
                self.optimizer.cg_rule = match v {
                    "polak_ribiere" => CgRule::PolakRibiere,
                    "direction_difference" => CgRule::DirectionDifference,
                    "steepest" => CgRule::SteepestAscent,
                    _ => return Err(format!("unknown cg_rule '{v}'")),
                }
            }
            "greedy_iter" => self.greedy_iter = parse_opt(v)?,
            "tabu_tenure" => self.tabu_tenure = parse_opt(v)?,
            "tabu_max_iter" => self.tabu_max_iter = parse_opt(v)?,
            "gabp_iterations" => self.gabp.iterations = parse_num(v)?,
            "gabp_damping" => self.gabp.damping = parse_num(v)?,
            "ep_iterations" => self.ep.iterations = parse_num(v)?,
            "ep_damping" => self.ep.damping = parse_num(v)?,
            "acf_mode" => {
                self.acf_mode = match v {
                    "aperiodic" => AcfMode::Aperiodic,
                    "periodic" => AcfMode::Periodic,
                    _ => return Err(format!("acf_mode must be aperiodic or periodic (got '{v}')")),
                }
            }
            "range_tau" => self.range_tau = parse_num(v)?,
            "range_targets_m" => self.range_targets_m = parse_list(v)?,
            "range_snr_db" => self.range_snr_db = parse_num(v)?,
            "n_aps" => s.n_aps = parse_num(v)?,
            "n_users" => s.n_users = parse_num(v)?,
            "tau" => s.tau = parse_num(v)?,
            "side_m" => s.side_m = parse_num(v)?,
            "d0_m" => s.d0_m = parse_num(v)?,
            "d1_m" => s.d1_m = parse_num(v)?,
            "carrier_mhz" => s.carrier_mhz = parse_num(v)?,
            "bandwidth_hz" => s.bandwidth_hz = parse_num(v)?,
            "noise_figure_db" => s.noise_figure_db = parse_num(v)?,
            "h_ap_m" => s.h_ap_m = parse_num(v)?,
            "h_ue_m" => s.h_ue_m = parse_num(v)?,
            "sigma_sh_db" => s.sigma_sh_db = parse_num(v)?,
            "p_pilot_w" => s.p_pilot_w = parse_num(v)?,
            "p_uplink_w" => s.p_uplink_w = parse_num(v)?,
            "frame_len" => s.frame_len = parse_num(v)?,
            "eta" => s.eta = parse_list(v)?,
            "pathloss_const_db" => s.pathloss_const_db = parse_opt(v)?,
            "shadowing_everywhere" => s.shadowing_everywhere = parse_bool(v)?,
            "sinr_power" => {
                s.sinr_power = match v {
                    "pilot" => SinrPower::Pilot,
                    "uplink" => SinrPower::Uplink,
                    _ => return Err(format!("sinr_power must be pilot or uplink (got '{v}')")),
                }
            }
            "duplex_factor" => s.duplex_factor = parse_num(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CliError::Config { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected 'key = value'".into()))?;
            spec.set(k.trim(), v.trim()).map_err(err)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Invalid(m));
        self.system.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        self.optimizer.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.symbols_per_drop < 1 {
            return bad("symbols_per_drop must be >= 1".into());
        }
        match self.kind {
            ExperimentKind::MedianVsTau => {
                if self.sweep.is_empty() {
                    return bad("median_vs_tau needs a non-empty sweep of pilot lengths".into());
                }
                if let Some(t) = self.sweep.iter().find(|&&t| t < 1 || t > self.system.frame_len) {
                    return bad(format!("swept tau {t} outside [1, frame_len]"));
                }
            }
            ExperimentKind::MedianVsK => {
                if self.sweep.is_empty() || self.sweep.contains(&0) {
                    return bad("median_vs_k needs a non-empty sweep of positive user counts".into());
                }
            }
            ExperimentKind::BerSweep if self.snr_db.is_empty() => {
                return bad("ber_sweep needs a non-empty snr_db grid".into());
            }
            ExperimentKind::BerVsRatio => {
                if self.ber_pairs.is_empty() {
                    return bad("ber_vs_ratio needs ber_pairs".into());
                }
                if let Some(p) = self.ber_pairs.iter().find(|p| p.0 < 1 || p.1 < 1 || p.0 > self.system.frame_len) {
                    return bad(format!("invalid pair {}:{}", p.0, p.1));
                }
            }
            ExperimentKind::RangeProfile if self.range_tau < 2 => {
                return bad("range_tau must be >= 2".into());
            }
            _ => {}
        }
        for s in &self.schemes {
            if self.kind.uses_detectors() {
                s.parse::<Scheme>().map_err(|e| CliError::Invalid(e.to_string()))?;
            } else {
                s.parse::<PilotScheme>().map_err(CliError::Invalid)?;
            }
        }
        Ok(())
    }

    /// Configuration text that [`ExperimentSpec::parse`] maps back to `self`.
    pub fn emit(&self) -> String {
        let s = &self.system;
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("kind", self.kind.name().into());
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        kv("schemes", self.schemes.join(", "));
        kv("out", self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        kv("sweep", join(&self.sweep));
        kv("snr_db", join(&self.snr_db));
        kv("ber_pairs", self.ber_pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(", "));
        kv("ratio_snr_db", self.ratio_snr_db.to_string());
        kv("csi", if self.csi == CsiMode::Perfect { "perfect" } else { "estimated" }.into());
        kv("symbols_per_drop", self.symbols_per_drop.to_string());
        kv("opt_eps", self.optimizer.eps.to_string());
        kv("opt_max_iter", self.optimizer.max_iter.to_string());
        kv("opt_initial_step", self.optimizer.armijo.initial_step.to_string());
        kv("opt_contraction", self.optimizer.armijo.contraction.to_string());
        kv("opt_sufficient_increase", self.optimizer.armijo.sufficient_increase.to_string());
        kv("opt_max_backtracks", self.optimizer.armijo.max_backtracks.to_string());
        kv(
            "cg_rule",
            match self.optimizer.cg_rule {
                CgRule::PolakRibiere => "polak_ribiere",
                CgRule::DirectionDifference => "direction_difference",
                CgRule::SteepestAscent => "steepest",
            }
            .into(),
        );
        kv("greedy_iter", opt_str(&self.greedy_iter));
        kv("tabu_tenure", opt_str(&self.tabu_tenure));
        kv("tabu_max_iter", opt_str(&self.tabu_max_iter));
        kv("gabp_iterations", self.gabp.iterations.to_string());
        kv("gabp_damping", self.gabp.damping.to_string());
        kv("ep_iterations", self.ep.iterations.to_string());
        kv("ep_damping", self.ep.damping.to_string());
        kv("acf_mode", if self.acf_mode == AcfMode::Periodic { "periodic" } else { "aperiodic" }.into());
        kv("range_tau", self.range_tau.to_string());
        kv("range_targets_m", join(&self.range_targets_m));
        kv("range_snr_db", self.range_snr_db.to_string());
        kv("n_aps", s.n_aps.to_string());
        kv("n_users", s.n_users.to_string());
        kv("tau", s.tau.to_string());
        kv("side_m", s.side_m.to_string());
        kv("d0_m", s.d0_m.to_string());
        kv("d1_m", s.d1_m.to_string());
        kv("carrier_mhz", s.carrier_mhz.to_string());
        kv("bandwidth_hz", s.bandwidth_hz.to_string());
        kv("noise_figure_db", s.noise_figure_db.to_string());
        kv("h_ap_m", s.h_ap_m.to_string());
        kv("h_ue_m", s.h_ue_m.to_string());
        kv("sigma_sh_db", s.sigma_sh_db.to_string());
        kv("p_pilot_w", s.p_pilot_w.to_string());
        kv("p_uplink_w", s.p_uplink_w.to_string());
        kv("frame_len", s.frame_len.to_string());
        kv("eta", join(&s.eta));
        kv("pathloss_const_db", opt_str(&s.pathloss_const_db));
        kv("shadowing_everywhere", s.shadowing_everywhere.to_string());
        kv("sinr_power", if s.sinr_power == SinrPower::Uplink { "uplink" } else { "pilot" }.into());
        kv("duplex_factor", s.duplex_factor.to_string());
        o
    }
}
