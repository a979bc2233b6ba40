//! Deterministic parallel trial execution and binomial estimates.

use std::fmt;
use std::ops::RangeInclusive;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitflip;
use crate::c4c6::{simulate_round, BasisMode, CodeFamily, TeleportationRound, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::gkp::{sigma_to_db, NoiseParams};
use crate::Decoder;

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;

/// Trials handed to one rayon task.
const CHUNK: u64 = 1024;

/// Random stream of trial `trial_index`. Depends on nothing else, so the
/// result of a run does not depend on how trials are spread over workers.
pub fn derive_stream(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Bitflip,
    C4c6,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Bitflip => "bitflip",
            Experiment::C4c6 => "c4c6",
        }
    }

    /// Name of the code written to the `code` column.
    pub fn code_name(self) -> &'static str {
        match self {
            Experiment::Bitflip => "bitflip3",
            Experiment::C4c6 => "c4c6",
        }
    }

    /// Trial count used when the plan does not override it.
    pub fn default_trials(self, level: u8) -> u64 {
        match (self, level) {
            (Experiment::Bitflip, _) => 1_000_000,
            (Experiment::C4c6, 1..=3) => 100_000,
            (Experiment::C4c6, _) => 10_000,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderChoice {
    Analog,
    Digital,
    Both,
}

impl DecoderChoice {
    pub fn decoders(self) -> &'static [Decoder] {
        match self {
            DecoderChoice::Analog => &[Decoder::Analog],
            DecoderChoice::Digital => &[Decoder::Digital],
            DecoderChoice::Both => &Decoder::BOTH,
        }
    }
}

impl From<Decoder> for DecoderChoice {
    fn from(d: Decoder) -> Self {
        match d {
            Decoder::Analog => DecoderChoice::Analog,
            Decoder::Digital => DecoderChoice::Digital,
        }
    }
}

impl FromStr for DecoderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(DecoderChoice::Both),
            other => other.parse::<Decoder>().map(DecoderChoice::from),
        }
    }
}

/// A validated grid of (sigma, level, decoder) cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    experiment: Experiment,
    decoders: DecoderChoice,
    sigmas: Vec<NoiseParams>,
    levels: RangeInclusive<u8>,
    trials: Option<u64>,
    master_seed: u64,
}

impl TrialPlan {
    /// `levels` is ignored for the bit-flip experiment. `trials = None`
    /// picks [`Experiment::default_trials`] per cell.
    pub fn new(
        experiment: Experiment,
        decoders: DecoderChoice,
        sigmas: Vec<f64>,
        levels: RangeInclusive<u8>,
        trials: Option<u64>,
        master_seed: u64,
    ) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidParameter("sigma grid is empty".into()));
        }
        let sigmas = sigmas
            .into_iter()
            .map(NoiseParams::new)
            .collect::<Result<Vec<_>>>()?;
        if let Some(w) = sigmas.windows(2).find(|w| w[1].sigma() <= w[0].sigma()) {
            return Err(Error::InvalidParameter(format!(
                "sigma grid must be strictly increasing ({} then {})",
                w[0].sigma(),
                w[1].sigma()
            )));
        }
        if trials == Some(0) {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        let levels = match experiment {
            Experiment::Bitflip => 1..=1,
            Experiment::C4c6 => {
                let (lo, hi) = (*levels.start(), *levels.end());
                if lo < 1 || hi > MAX_LEVEL || lo > hi {
                    return Err(Error::InvalidParameter(format!(
                        "levels {lo}:{hi} not within 1:{MAX_LEVEL}"
                    )));
                }
                levels
            }
        };
        Ok(Self {
            experiment,
            decoders,
            sigmas,
            levels,
            trials,
            master_seed,
        })
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trials_for(&self, level: u8) -> u64 {
        self.trials
            .unwrap_or_else(|| self.experiment.default_trials(level))
    }

    /// Cells in output order: sigma, then level, then decoder.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.sigmas.iter().flat_map(move |&params| {
            self.levels.clone().flat_map(move |level| {
                self.decoders.decoders().iter().map(move |&decoder| Cell {
                    params,
                    level,
                    decoder,
                })
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub params: NoiseParams,
    pub level: u8,
    pub decoder: Decoder,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sigma={} level={} decoder={}",
            self.params.sigma(),
            self.level,
            self.decoder
        )
    }
}

/// Failure count of one cell and its 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub experiment: Experiment,
    pub decoder: Decoder,
    pub code: String,
    pub level: u8,
    pub basis_mode: BasisMode,
    pub sigma: f64,
    pub squeezing_db: f64,
    pub trials: u64,
    pub failures: u64,
    pub p_fail: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl Estimate {
    /// Binomial standard error of `p_fail` around `p`.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval for `failures` out of `trials`.
pub fn wilson_interval(failures: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(
        trials > 0 && failures <= trials,
        "need 0 <= failures <= trials, trials > 0"
    );
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if failures == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let hi = if failures == trials {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (lo, hi)
}

/// Counts failures of `trials` trials in index order. The count is an
/// integer sum, so it is identical for any split of the work.
fn count_failures<const K: usize, F>(trials: u64, trial: F) -> [u64; K]
where
    F: Fn(u64) -> [bool; K] + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [0u64; K];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                for (a, failed) in acc.iter_mut().zip(trial(t)) {
                    *a += u64::from(failed);
                }
            }
            acc
        })
        .reduce(
            || [0; K],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn guarded<T>(cell: &Cell, f: impl FnOnce() -> T) -> Result<T> {
    catch_unwind(AssertUnwindSafe(f)).map_err(|payload| {
        let message = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "trial panicked".into());
        Error::CellFailed {
            cell: cell.to_string(),
            message,
        }
    })
}

fn estimate(
    plan: &TrialPlan,
    cell: &Cell,
    basis_mode: BasisMode,
    trials: u64,
    failures: u64,
) -> Estimate {
    let (ci_low, ci_high) = wilson_interval(failures, trials, Z_95);
    let sigma = cell.params.sigma();
    Estimate {
        experiment: plan.experiment,
        decoder: cell.decoder,
        code: plan.experiment.code_name().to_string(),
        level: cell.level,
        basis_mode,
        sigma,
        squeezing_db: sigma_to_db(sigma),
        trials,
        failures,
        p_fail: failures as f64 / trials as f64,
        ci_low,
        ci_high,
        seed: plan.master_seed,
    }
}

fn run_cell(plan: &TrialPlan, cell: &Cell, family: &CodeFamily) -> Result<Vec<Estimate>> {
    let trials = plan.trials_for(cell.level);
    let seed = plan.master_seed;
    match plan.experiment {
        Experiment::Bitflip => {
            let [failures] = guarded(cell, || {
                count_failures(trials, |t| {
                    [bitflip::run_trial(
                        cell.params,
                        &mut derive_stream(seed, t),
                        cell.decoder,
                    )]
                })
            })?;
            Ok(vec![estimate(
                plan,
                cell,
                BasisMode::PerBasis,
                trials,
                failures,
            )])
        }
        Experiment::C4c6 => {
            let round = TeleportationRound::new(cell.level, cell.params.sigma(), cell.decoder)?;
            let counts = guarded(cell, || {
                count_failures(trials, |t| {
                    let o = simulate_round(&round, family, &mut derive_stream(seed, t));
                    BasisMode::ALL.map(|m| o.failed(m))
                })
            })?;
            Ok(BasisMode::ALL
                .iter()
                .zip(counts)
                .map(|(&m, failures)| estimate(plan, cell, m, trials, failures))
                .collect())
        }
    }
}

/// Runs every cell of `plan` on a pool of `workers` threads.
///
/// Each cell yields one estimate (bit-flip) or a per-basis and a combined
/// estimate (C4/C6). A cell whose trials panic is reported as an error and
/// the remaining cells still run. Decoders within a sigma and level share
/// trial streams, so their counts are paired.
pub fn run_plan(plan: &TrialPlan, workers: usize) -> Vec<Result<Estimate>> {
    run_plan_with(plan, &CodeFamily::default(), workers)
}

/// [`run_plan`] with a caller-supplied C4/C6 code family.
pub fn run_plan_with(
    plan: &TrialPlan,
    family: &CodeFamily,
    workers: usize,
) -> Vec<Result<Estimate>> {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => return vec![Err(Error::Io(format!("cannot start worker pool: {e}")))],
    };
    pool.install(|| {
        plan.cells()
            .flat_map(|cell| match run_cell(plan, &cell, family) {
                Ok(rows) => rows.into_iter().map(Ok).collect(),
                Err(e) => vec![Err(e)],
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_depend_only_on_seed_and_index() {
        let a: u64 = derive_stream(5, 17).random();
        let b: u64 = derive_stream(5, 17).random();
        assert_eq!(a, b);
        let c: u64 = derive_stream(5, 18).random();
        let d: u64 = derive_stream(6, 17).random();
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn wilson_closed_form() {
        let (lo, hi) = wilson_interval(0, 1000, Z_95);
        assert_eq!(lo, 0.0);
        assert!((hi - 3.8416 / 1003.8416).abs() < 1e-12, "{hi}");
        let (lo, hi) = wilson_interval(1000, 1000, Z_95);
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0);
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!((hi - 0.596_170_171_409_852_8).abs() < 1e-12, "{hi}");
    }

    #[test]
    fn wilson_coverage() {
        let mut rng = derive_stream(2024, 0);
        let reps = 1000;
        let covered = (0..reps)
            .filter(|_| {
                let k = (0..1000).filter(|_| rng.random::<f64>() < 0.1).count() as u64;
                let (lo, hi) = wilson_interval(k, 1000, Z_95);
                lo <= 0.1 && 0.1 <= hi
            })
            .count();
        assert!(covered >= 930, "{covered}");
    }

    #[test]
    fn plan_validation() {
        let ok = |s: Vec<f64>| {
            TrialPlan::new(
                Experiment::Bitflip,
                DecoderChoice::Both,
                s,
                1..=1,
                Some(10),
                1,
            )
        };
        assert!(ok(vec![]).is_err());
        assert!(ok(vec![0.3, 0.3]).is_err());
        assert!(ok(vec![0.4, 0.3]).is_err());
        assert!(ok(vec![-0.1]).is_err());
        assert!(ok(vec![0.3, 0.4]).is_ok());
        assert!(TrialPlan::new(
            Experiment::Bitflip,
            DecoderChoice::Both,
            vec![0.3],
            1..=1,
            Some(0),
            1
        )
        .is_err());
        let c4 = |l| {
            TrialPlan::new(
                Experiment::C4c6,
                DecoderChoice::Analog,
                vec![0.3],
                l,
                None,
                1,
            )
        };
        assert!(c4(1..=9).is_err());
        assert!(c4(0..=2).is_err());
        let plan = c4(1..=5).unwrap();
        assert_eq!(plan.trials_for(3), 100_000);
        assert_eq!(plan.trials_for(4), 10_000);
        assert_eq!(plan.cells().count(), 5);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let plan = TrialPlan::new(
            Experiment::C4c6,
            DecoderChoice::Both,
            vec![0.45, 0.55],
            1..=2,
            Some(3000),
            9,
        )
        .unwrap();
        let one: Vec<_> = run_plan(&plan, 1).into_iter().map(Result::unwrap).collect();
        let eight: Vec<_> = run_plan(&plan, 8).into_iter().map(Result::unwrap).collect();
        assert_eq!(one.len(), 2 * 2 * 2 * 2);
        assert_eq!(one, eight);
    }

    #[test]
    fn paired_bitflip_comparison() {
        let plan = TrialPlan::new(
            Experiment::Bitflip,
            DecoderChoice::Both,
            vec![0.4],
            1..=1,
            Some(100_000),
            4,
        )
        .unwrap();
        let rows: Vec<_> = run_plan(&plan, 2).into_iter().map(Result::unwrap).collect();
        assert_eq!(rows[0].decoder, Decoder::Analog);
        assert!(
            rows[0].failures < rows[1].failures,
            "{} vs {}",
            rows[0].failures,
            rows[1].failures
        );
        for r in &rows {
            assert!(r.ci_low <= r.p_fail && r.p_fail <= r.ci_high);
        }
    }

    #[test]
    fn panicking_cell_is_reported() {
        let cell = Cell {
            params: NoiseParams::new(0.3).unwrap(),
            level: 1,
            decoder: Decoder::Analog,
        };
        let err = guarded(&cell, || {
            count_failures(5000, |t| {
                [if t == 4321 {
                    panic!("boom at {t}")
                } else {
                    false
                }]
            })
        })
        .unwrap_err();
        match err {
            Error::CellFailed { message, .. } => assert!(message.contains("boom at 4321")),
            other => panic!("unexpected {other:?}"),
        }
        let ok = guarded(&cell, || count_failures(5000, |t| [t % 10 == 0]));
        assert_eq!(ok, Ok([500]));
    }
}
