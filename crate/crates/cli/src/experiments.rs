//! Experiment pipelines. Each returns a [`Table`] that is written as CSV.
//!
//! Trials draw from `stage_rng(seed, trial, stage)`: stage 0 is the network
//! drop and every pilot scheme has its own stage, so a scheme's output does
//! not depend on the other schemes in the run. Trials run in parallel and are
//! merged in trial order.

use std::io::Write;

use cfmimo_core::detection::{ber_experiment, BerScenario, Scheme};
use cfmimo_core::metrics::rates;
use cfmimo_core::pilots::TabuConfig;
use cfmimo_core::seed::stage_rng;
use cfmimo_core::sensing::{range_profile, sidelobe_profile_db, time_domain_pilot, RangeScene, Target};
use cfmimo_core::sysmodel::draw_drop;
use cfmimo_core::{Complex64, SystemConfig};
use rayon::prelude::*;

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::schemes::{design_pilots, DesignParams, PilotScheme};
use crate::CliError;

/// Stream used for range-profile noise.
const NOISE_STAGE: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Schema tag written in the trailing `schema` column, e.g. `rates.v1`.
    pub schema: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(schema: &'static str, header: &[&'static str]) -> Self {
        Self { schema, header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let csv_err = |e: csv::Error| CliError::Io(e.to_string());
        let mut head = self.header.clone();
        head.push("schema");
        out.write_record(&head).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record(r.iter().map(String::as_str).chain([self.schema])).map_err(csv_err)?;
        }
        out.flush().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn design_params(spec: &ExperimentSpec) -> DesignParams {
    DesignParams {
        optimizer: spec.optimizer,
        greedy_iter: spec.greedy_iter,
        tabu: TabuConfig { tenure: spec.tabu_tenure, max_iter: spec.tabu_max_iter },
    }
}

fn pilot_schemes(spec: &ExperimentSpec, default: &[PilotScheme]) -> Result<Vec<PilotScheme>, CliError> {
    if spec.schemes.is_empty() {
        return Ok(default.to_vec());
    }
    spec.schemes.iter().map(|s| s.parse().map_err(CliError::Invalid)).collect()
}

fn detectors(spec: &ExperimentSpec) -> Result<Vec<Scheme>, CliError> {
    if spec.schemes.is_empty() {
        return Ok(Scheme::ALL.to_vec());
    }
    spec.schemes.iter().map(|s| s.parse().map_err(CliError::from)).collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Table, CliError> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Design => design_trace(spec),
        ExperimentKind::RatesCdf => rates_cdf(spec),
        ExperimentKind::MedianVsTau | ExperimentKind::MedianVsK => median_sweep(spec),
        ExperimentKind::BerSweep => ber_sweep(spec),
        ExperimentKind::BerVsRatio => ber_vs_ratio(spec),
        ExperimentKind::AcfProfile => acf_profile(spec),
        ExperimentKind::RangeProfile => range(spec),
    }
}

/// Objective trace of the optimizer, one drop per trial.
pub fn design_trace(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let p = design_params(spec);
    let traces: Vec<Vec<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let d = draw_drop(&spec.system, &mut stage_rng(spec.seed, t as u64, 0))?;
            let mut rng = stage_rng(spec.seed, t as u64, PilotScheme::Proposed.stage());
            let out = cfmimo_core::manifold::optimize_pilots(
                &d.beta,
                spec.system.tau,
                cfmimo_core::metrics::SnrParams::from_config(&spec.system),
                &p.optimizer,
                None,
                &mut rng,
            )?;
            Ok(out.trace)
        })
        .collect::<Result<_, cfmimo_core::Error>>()?;
    let mut t = Table::new("design.v1", &["trial", "iteration", "objective_bits"]);
    for (trial, tr) in traces.iter().enumerate() {
        for (i, v) in tr.iter().enumerate() {
            t.push(vec![trial.to_string(), i.to_string(), v.to_string()]);
        }
    }
    Ok(t)
}

/// Per-user rates of every scheme in one trial: `(rate_bits, net_bps)` per user.
fn trial_rates(
    cfg: &SystemConfig,
    schemes: &[PilotScheme],
    p: &DesignParams,
    seed: u64,
    trial: u64,
) -> cfmimo_core::Result<Vec<Vec<(f64, f64)>>> {
    let d = draw_drop(cfg, &mut stage_rng(seed, trial, 0))?;
    schemes
        .iter()
        .map(|s| {
            let f = design_pilots(*s, &d.beta, cfg, p, &mut stage_rng(seed, trial, s.stage()))?;
            let r = rates(f.matrix(), &d.beta, cfg)?;
            Ok(r.rate_bits.iter().copied().zip(r.net_bps.iter().copied()).collect())
        })
        .collect()
}

const RATE_SCHEMES: [PilotScheme; 4] = [PilotScheme::Proposed, PilotScheme::Greedy, PilotScheme::Tabu, PilotScheme::Random];

pub fn rates_cdf(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let schemes = pilot_schemes(spec, &RATE_SCHEMES)?;
    let p = design_params(spec);
    let per_trial: Vec<_> = (0..spec.trials)
        .into_par_iter()
        .map(|t| trial_rates(&spec.system, &schemes, &p, spec.seed, t as u64))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("rates.v1", &["trial", "user", "scheme", "rate_bits", "net_bps"]);
    for (trial, per_scheme) in per_trial.iter().enumerate() {
        for (s, users) in schemes.iter().zip(per_scheme) {
            for (k, (r, n)) in users.iter().enumerate() {
                t.push(vec![trial.to_string(), k.to_string(), s.to_string(), r.to_string(), n.to_string()]);
            }
        }
    }
    Ok(t)
}

/// Median of a non-empty sample; the mean of the two middle values for even sizes.
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn median_sweep(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let schemes = pilot_schemes(spec, &RATE_SCHEMES)?;
    let p = design_params(spec);
    let (param, by_tau) = match spec.kind {
        ExperimentKind::MedianVsTau => ("tau", true),
        _ => ("k", false),
    };
    let mut t = Table::new("median.v1", &["param", "value", "scheme", "median_rate_bits", "median_net_bps"]);
    for &v in &spec.sweep {
        let cfg = if by_tau { SystemConfig { tau: v, ..spec.system.clone() } } else { spec.system.with_users(v) };
        cfg.validate()?;
        let per_trial: Vec<_> = (0..spec.trials)
            .into_par_iter()
            .map(|t| trial_rates(&cfg, &schemes, &p, spec.seed, t as u64))
            .collect::<Result<_, _>>()?;
        for (i, s) in schemes.iter().enumerate() {
            let mut r: Vec<f64> = per_trial.iter().flat_map(|x| x[i].iter().map(|u| u.0)).collect();
            let mut n: Vec<f64> = per_trial.iter().flat_map(|x| x[i].iter().map(|u| u.1)).collect();
            t.push(vec![
                param.into(),
                v.to_string(),
                s.to_string(),
                median(&mut r).to_string(),
                median(&mut n).to_string(),
            ]);
        }
    }
    Ok(t)
}

fn scenario(spec: &ExperimentSpec, system: SystemConfig, snr_db: Vec<f64>) -> BerScenario {
    BerScenario {
        drops: spec.trials,
        symbols_per_drop: spec.symbols_per_drop,
        ep: spec.ep,
        gabp: spec.gabp,
        ..BerScenario::new(system, spec.csi, snr_db)
    }
}

pub fn ber_sweep(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let sc = scenario(spec, spec.system.clone(), spec.snr_db.clone());
    let recs = ber_experiment(&detectors(spec)?, &sc, spec.seed)?;
    let mut t = Table::new("ber.v1", &["snr_db", "scheme", "ber", "bits_counted"]);
    for r in recs {
        t.push(vec![r.snr_db.to_string(), r.scheme.to_string(), r.ber.to_string(), r.bits_counted.to_string()]);
    }
    Ok(t)
}

pub fn ber_vs_ratio(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let schemes = detectors(spec)?;
    let mut t = Table::new("ber_ratio.v1", &["tau", "k", "scheme", "ber", "bits_counted"]);
    for &(tau, k) in &spec.ber_pairs {
        let sys = SystemConfig { tau, ..spec.system.with_users(k) };
        let sc = scenario(spec, sys, vec![spec.ratio_snr_db]);
        for r in ber_experiment(&schemes, &sc, spec.seed)? {
            t.push(vec![tau.to_string(), k.to_string(), r.scheme.to_string(), r.ber.to_string(), r.bits_counted.to_string()]);
        }
    }
    Ok(t)
}

/// Time-domain sequence of user 0 for `trials` independent drops.
pub fn pilot_sequences(
    spec: &ExperimentSpec,
    cfg: &SystemConfig,
    scheme: PilotScheme,
    count: usize,
) -> Result<Vec<Vec<Complex64>>, CliError> {
    let p = design_params(spec);
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let d = draw_drop(cfg, &mut stage_rng(spec.seed, i as u64, 0))?;
            let f = design_pilots(scheme, &d.beta, cfg, &p, &mut stage_rng(spec.seed, i as u64, scheme.stage()))?;
            time_domain_pilot(&f, 0)
        })
        .collect::<cfmimo_core::Result<_>>()?)
}

pub fn acf_profile(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let schemes = pilot_schemes(spec, &[PilotScheme::Proposed, PilotScheme::Random])?;
    let mut t = Table::new("acf.v1", &["lag", "scheme", "level_db"]);
    for s in schemes {
        let seqs = pilot_sequences(spec, &spec.system, s, spec.trials)?;
        let prof = sidelobe_profile_db(&seqs, spec.acf_mode)?;
        for (lag, v) in prof.lags.iter().zip(&prof.level_db) {
            t.push(vec![lag.to_string(), s.to_string(), v.to_string()]);
        }
    }
    Ok(t)
}

/// Range profile averaged over `trials` noise draws; the pilot comes from
/// the trial-0 drop with pilot length `range_tau`.
pub fn range(spec: &ExperimentSpec) -> Result<Table, CliError> {
    let schemes = pilot_schemes(spec, &[PilotScheme::Proposed])?;
    let cfg = SystemConfig { tau: spec.range_tau, ..spec.system.clone() };
    cfg.validate()?;
    let mut t = Table::new("range.v1", &["range_m", "scheme", "magnitude_db"]);
    for s in schemes {
        let pilot = pilot_sequences(spec, &cfg, s, 1)?.remove(0);
        let scene = RangeScene {
            targets: spec.range_targets_m.iter().map(|&r| Target::unit(r)).collect(),
            snr_db: Some(spec.range_snr_db),
            pilot,
            bandwidth_hz: cfg.bandwidth_hz,
        };
        let profiles: Vec<_> = (0..spec.trials)
            .into_par_iter()
            .map(|i| range_profile(&scene, &mut stage_rng(spec.seed, i as u64, NOISE_STAGE)))
            .collect::<cfmimo_core::Result<_>>()?;
        let n = profiles[0].range_m.len();
        let mean: Vec<f64> = (0..n)
            .map(|j| profiles.iter().map(|p| 10f64.powf(p.magnitude_db[j] / 20.0)).sum::<f64>() / profiles.len() as f64)
            .collect();
        let peak = mean.iter().copied().fold(0.0, f64::max);
        for (r, m) in profiles[0].range_m.iter().zip(&mean) {
            t.push(vec![r.to_string(), s.to_string(), (20.0 * (m / peak).log10()).to_string()]);
        }
    }
    Ok(t)
}
