//! Monte Carlo sweeps over mobile placements.
//!
//! Trial `i` draws its mobile position from a ChaCha8 stream keyed by
//! `(seed, i)`, so results depend only on the configuration and trial index
//! and not on how rayon schedules the trials.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{distance, Point3};
use crate::trilateration::LocationFix;

use super::{run_scenario, ScenarioConfig, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u32,
    pub truth: Point3,
    pub fix: LocationFix,
    /// Euclidean position error, m.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub trials: Vec<TrialResult>,
    pub mean_error: f64,
    pub median_error: f64,
    pub max_error: f64,
    pub clamped: usize,
}

impl SweepSummary {
    fn from_trials(trials: Vec<TrialResult>) -> Self {
        let mut errors: Vec<f64> = trials.iter().map(|t| t.error).collect();
        errors.sort_by(f64::total_cmp);
        let n = errors.len();
        let median_error = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            errors[n / 2]
        } else {
            0.5 * (errors[n / 2 - 1] + errors[n / 2])
        };
        Self {
            mean_error: errors.iter().sum::<f64>() / n as f64,
            median_error,
            max_error: errors.last().copied().unwrap_or(f64::NAN),
            clamped: trials.iter().filter(|t| t.fix.clamped).count(),
            trials,
        }
    }

    /// `trial,true_x,true_y,true_z,est_x,est_y,est_z,error_m,clamped`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,true_x,true_y,true_z,est_x,est_y,est_z,error_m,clamped\n");
        for t in &self.trials {
            let (a, b) = (t.truth, t.fix.position);
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.9},{}",
                t.trial, a.x, a.y, a.z, b.x, b.y, b.z, t.error, t.fix.clamped
            );
        }
        out
    }
}

/// The scenario for one trial. Without a placement section the configured
/// mobile position is used unchanged.
pub fn trial_config(config: &ScenarioConfig, trial: u32) -> ScenarioConfig {
    let mut cfg = config.clone();
    cfg.trials = 1;
    if let Some(p) = config.placement {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u64::from(trial));
        let r = p.radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        let dz = if p.z_max > p.z_min { rng.random_range(p.z_min..p.z_max) } else { p.z_min };
        cfg.mobile = config.mobile + Point3::new(r * theta.cos(), r * theta.sin(), dz);
    }
    cfg
}

/// Runs `config.trials` independent trials in parallel.
pub fn run_trials(config: &ScenarioConfig) -> Result<SweepSummary, SimError> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let cfg = trial_config(config, i);
            let out = run_scenario(&cfg)?;
            Ok(TrialResult {
                trial: i,
                truth: cfg.mobile,
                error: distance(out.fix.position, cfg.mobile),
                fix: out.fix,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SweepSummary::from_trials(trials))
}

/// Repeats [`run_trials`] at each clock resolution, geometry and seed fixed.
pub fn resolution_sweep(
    config: &ScenarioConfig,
    resolutions: &[f64],
) -> Result<Vec<(f64, SweepSummary)>, SimError> {
    resolutions
        .iter()
        .map(|&res| {
            let mut cfg = config.clone();
            cfg.timing.clock_resolution = res;
            run_trials(&cfg).map(|s| (res, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{Placement, TowerLayout};
    use crate::timing::TimingModel;

    fn config(trials: u32) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(
            TowerLayout::Hex { center: Point3::ORIGIN, radius: 3000.0, rings: 1 },
            Point3::ORIGIN,
            TimingModel::default(),
        );
        cfg.trials = trials;
        cfg.seed = 42;
        cfg.placement = Some(Placement { radius: 2500.0, z_min: 0.0, z_max: 0.0 });
        cfg
    }

    #[test]
    fn trial_positions_depend_only_on_seed_and_index() {
        let cfg = config(10);
        let a = trial_config(&cfg, 3).mobile;
        let b = trial_config(&cfg, 3).mobile;
        assert_eq!(a, b);
        assert_ne!(a, trial_config(&cfg, 4).mobile);
        assert!(distance(a, Point3::ORIGIN) <= 2500.0);
    }

    #[test]
    fn exact_clock_recovers_every_trial() {
        let s = run_trials(&config(50)).unwrap();
        assert_eq!(s.trials.len(), 50);
        assert!(s.max_error < 1e-6, "max error {}", s.max_error);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let cfg = config(40);
        let par = run_trials(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let seq = pool.install(|| run_trials(&cfg)).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.to_csv(), seq.to_csv());
    }

    #[test]
    fn coarser_clock_is_worse() {
        let sweep = resolution_sweep(&config(60), &[0.0, 1e-8, 1e-7]).unwrap();
        assert!(sweep[0].1.mean_error < sweep[1].1.mean_error);
        assert!(sweep[1].1.mean_error < sweep[2].1.mean_error);
    }
}
