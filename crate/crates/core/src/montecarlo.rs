//! Trial orchestration: bisection search for the per-trial critical loss
//! rate, reproducible parallel trial batches, and probability sweeps.
//!
//! Each trial owns an independent rng stream derived from (master seed,
//! trial index), so batches are bit-identical for any thread count and
//! aggregation order never matters.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{check, Method};
use crate::color::Color;
use crate::lattice::{Geometry, Lattice, Variant};
use crate::reconstruction::{
    reconstruct, reconstruct_with, sample_losses, sample_losses_from_uniforms, LossSet,
    ReconstructionRecord, UniformTwin,
};

/// Per-qubit uniforms drawn once per trial. The loss set at rate p is
/// {i : u_i < p}, so the sets at two rates are nested: p <= p' implies
/// set(p) is a subset of set(p'). This makes the bisection's halting rule
/// (loss count unchanged between rounds) meaningful: equal counts at
/// nested rates mean the two loss sets are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCoupling {
    pub uniforms: Vec<f64>,
}

impl QuantileCoupling {
    pub fn draw<R: Rng>(n: usize, rng: &mut R) -> Self {
        QuantileCoupling {
            uniforms: (0..n).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    /// Number of qubits lost at rate `p`.
    pub fn count_at(&self, p: f64) -> usize {
        self.uniforms.iter().filter(|&&u| u < p).count()
    }

    pub fn losses_at(&self, lat: &Lattice, p: f64) -> LossSet {
        sample_losses_from_uniforms(lat, p, &self.uniforms)
    }
}

/// Whether twin choices are drawn fresh from the trial stream every
/// bisection round, or replayed from the same stream state each round so
/// that one loss set always reconstructs identically within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwinRedraw {
    PerRound,
    Frozen,
}

impl Default for TwinRedraw {
    fn default() -> Self {
        TwinRedraw::PerRound
    }
}

impl std::fmt::Display for TwinRedraw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TwinRedraw::PerRound => "per-round",
            TwinRedraw::Frozen => "frozen",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for TwinRedraw {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "per-round" | "perround" | "redraw" => Ok(TwinRedraw::PerRound),
            "frozen" | "freeze" => Ok(TwinRedraw::Frozen),
            other => Err(format!(
                "unknown twin policy '{other}' (expected per-round|frozen)"
            )),
        }
    }
}

/// Safety bound on bisection rounds; the halting rule fires long before
/// this on any real lattice (the step shrinks below the spacing of the
/// coupled uniforms after about log2(n) rounds).
pub const MAX_BISECTION_ROUNDS: usize = 64;

/// Result of one bisection trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Final rate: the first whose coupled loss count matched the
    /// previous round's.
    pub p_critical: f64,
    /// Remaining fraction of the last reconstruction performed; its loss
    /// set equals the one at `p_critical` under the trial's coupling.
    pub fraction_remaining: f64,
    /// Rounds entered, including the halting one.
    pub rounds: usize,
    /// Coupled loss count at `p_critical`.
    pub loss_count: usize,
}

/// Bisect the critical rate on a pre-drawn coupling. Starts at rate 1/2
/// with step 1/4; each round reconstructs the coupled loss set at the
/// current rate, runs `survives`, and moves the rate up on survival or
/// down on failure, halving the step. Halts when the coupled loss count
/// is unchanged between two successive rounds, checked before
/// reconstructing.
///
/// Two tripwires run every round: coupled loss counts must be ordered
/// like their rates, and no surviving rate may exceed a failing one. The
/// rate walk guarantees both when the coupling nests and each rate is
/// visited once, so a firing means a bug in the coupling or the checks.
pub fn bisect_coupled<R, F>(
    lat: &Lattice,
    coupling: &QuantileCoupling,
    redraw: TwinRedraw,
    rng: &mut R,
    mut survives: F,
) -> TrialOutcome
where
    R: Rng + Clone,
    F: FnMut(&Lattice, &ReconstructionRecord) -> bool,
{
    let twin_base = rng.clone();
    let mut p = 0.5_f64;
    let mut step = 0.25_f64;
    let mut prev: Option<(f64, usize)> = None;
    let mut max_survive = f64::NEG_INFINITY;
    let mut min_fail = f64::INFINITY;
    let mut last_fraction = 1.0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let count = coupling.count_at(p);
        if let Some((p0, c0)) = prev {
            if p > p0 {
                assert!(count >= c0, "coupling not nested: {c0} losses at {p0}, {count} at {p}");
            } else {
                assert!(count <= c0, "coupling not nested: {c0} losses at {p0}, {count} at {p}");
            }
            if count == c0 || rounds > MAX_BISECTION_ROUNDS {
                assert!((0.0..=1.0).contains(&p));
                return TrialOutcome {
                    p_critical: p,
                    fraction_remaining: last_fraction,
                    rounds,
                    loss_count: count,
                };
            }
        }
        let losses = coupling.losses_at(lat, p);
        let record = match redraw {
            TwinRedraw::PerRound => reconstruct_with(lat, &losses, &mut UniformTwin(&mut *rng)),
            TwinRedraw::Frozen => reconstruct(lat, &losses, twin_base.clone()),
        };
        let ok = survives(lat, &record);
        if ok {
            assert!(p < min_fail, "survival at rate {p} above a failure at {min_fail}");
            max_survive = max_survive.max(p);
        } else {
            assert!(p > max_survive, "failure at rate {p} below a survival at {max_survive}");
            min_fail = min_fail.min(p);
        }
        last_fraction = record.remaining_fraction;
        prev = Some((p, count));
        p = if ok { p + step } else { p - step };
        step *= 0.5;
    }
}

/// One full trial with a caller-supplied survival predicate: draws the
/// coupling from `rng`, then bisects.
pub fn sample_critical_rate_with<R, F>(
    lat: &Lattice,
    redraw: TwinRedraw,
    rng: &mut R,
    survives: F,
) -> TrialOutcome
where
    R: Rng + Clone,
    F: FnMut(&Lattice, &ReconstructionRecord) -> bool,
{
    let coupling = QuantileCoupling::draw(lat.n_qubits(), rng);
    bisect_coupled(lat, &coupling, redraw, rng, survives)
}

/// One full trial of the given method and color.
pub fn sample_trial<R: Rng + Clone>(
    lat: &Lattice,
    method: Method,
    color: Color,
    redraw: TwinRedraw,
    rng: &mut R,
) -> TrialOutcome {
    sample_critical_rate_with(lat, redraw, rng, |l, rec| {
        check(l, rec, method, color).survives
    })
}

/// Critical rate of one trial under the default per-round twin policy.
pub fn sample_critical_rate<R: Rng + Clone>(
    lat: &Lattice,
    method: Method,
    color: Color,
    rng: &mut R,
) -> f64 {
    sample_trial(lat, method, color, TwinRedraw::PerRound, rng).p_critical
}

/// The rng stream owned by one work item: every stream of one master
/// seed is independent, and identical (master, stream) always replays
/// the same draws.
pub fn trial_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// One row of a threshold distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSample {
    pub trial: u64,
    /// Master seed; (seed, trial) fully determines the trial's stream.
    pub seed: u64,
    pub p_critical: f64,
    pub fraction_remaining: f64,
}

/// Empirical distribution of per-trial critical rates at one distance:
/// the histogram whose mean is p_c(d) and whose width is Delta(d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDistribution {
    pub geometry: Geometry,
    pub variant: Variant,
    pub distance: usize,
    pub method: Method,
    pub color: Color,
    pub master_seed: u64,
    pub twin_redraw: TwinRedraw,
    /// In trial order, one entry per trial.
    pub samples: Vec<TrialSample>,
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (zero for a single sample),
/// accumulated in trial order so reruns are bit-identical.
fn stats(samples: &[TrialSample]) -> (f64, f64) {
    let t = samples.len();
    let mean = samples.iter().map(|s| s.p_critical).sum::<f64>() / t as f64;
    if t < 2 {
        return (mean, 0.0);
    }
    let var = samples
        .iter()
        .map(|s| (s.p_critical - mean).powi(2))
        .sum::<f64>()
        / (t - 1) as f64;
    (mean, var.sqrt())
}

impl ThresholdDistribution {
    /// Recompute (mean, std) from the samples; must equal the stored
    /// values exactly.
    pub fn recompute(&self) -> (f64, f64) {
        stats(&self.samples)
    }

    /// Standard error of the mean, the weight fits should use.
    pub fn mean_error(&self) -> f64 {
        self.std / (self.samples.len() as f64).sqrt()
    }
}

/// Default trial count per distance.
pub const DEFAULT_TRIALS: usize = 1000;

/// T independent bisection trials. Trial t draws from stream t of the
/// master seed, so the batch is reproducible for any parallelism degree;
/// samples come back in trial order regardless of completion order.
pub fn run_trials(
    lat: &Lattice,
    method: Method,
    color: Color,
    trials: usize,
    master_seed: u64,
    redraw: TwinRedraw,
) -> ThresholdDistribution {
    assert!(trials >= 1, "need at least one trial");
    let samples: Vec<TrialSample> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t);
            let out = sample_trial(lat, method, color, redraw, &mut rng);
            TrialSample {
                trial: t,
                seed: master_seed,
                p_critical: out.p_critical,
                fraction_remaining: out.fraction_remaining,
            }
        })
        .collect();
    let (mean, std) = stats(&samples);
    ThresholdDistribution {
        geometry: lat.geometry,
        variant: lat.variant,
        distance: lat.distance,
        method,
        color,
        master_seed,
        twin_redraw: redraw,
        samples,
        mean,
        std,
    }
}

/// One point of a survival-probability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub survivals: usize,
    pub trials: usize,
    pub frequency: f64,
    /// Binomial error sqrt(f(1-f)/n).
    pub error: f64,
}

/// Survival probability vs loss rate for one (method, color).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub geometry: Geometry,
    pub variant: Variant,
    pub distance: usize,
    pub method: Method,
    pub color: Color,
    pub master_seed: u64,
    pub points: Vec<SweepPoint>,
}

/// Survival frequency at each grid rate, with independent loss draws per
/// point. Grid point i, trial t uses stream i*trials + t.
pub fn sweep_probability(
    lat: &Lattice,
    method: Method,
    color: Color,
    grid: &[f64],
    trials: usize,
    master_seed: u64,
) -> SweepCurve {
    assert!(trials >= 1, "need at least one trial");
    for &p in grid {
        assert!((0.0..=1.0).contains(&p), "grid rate {p} outside [0,1]");
    }
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let survivals = (0..trials as u64)
                .into_par_iter()
                .filter(|&t| {
                    let mut rng = trial_rng(master_seed, i as u64 * trials as u64 + t);
                    let losses = sample_losses(lat, p, &mut rng);
                    let record = reconstruct(lat, &losses, rng);
                    check(lat, &record, method, color).survives
                })
                .count();
            let f = survivals as f64 / trials as f64;
            SweepPoint {
                p,
                survivals,
                trials,
                frequency: f,
                error: (f * (1.0 - f) / trials as f64).sqrt(),
            }
        })
        .collect();
    SweepCurve {
        geometry: lat.geometry,
        variant: lat.variant,
        distance: lat.distance,
        method,
        color,
        master_seed,
        points,
    }
}

/// Mean remaining fraction at the per-trial critical points of one
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionStat {
    pub distance: usize,
    pub method: Method,
    pub color: Color,
    pub mean: f64,
    /// Standard error of the mean.
    pub error: f64,
    pub trials: usize,
}

/// Per-distance mean fraction of qubits left at the trial's critical
/// point, one entry per input distribution.
pub fn remaining_fraction_stats(dists: &[ThresholdDistribution]) -> Vec<FractionStat> {
    dists
        .iter()
        .map(|d| {
            let t = d.samples.len();
            let mean = d.samples.iter().map(|s| s.fraction_remaining).sum::<f64>() / t as f64;
            let var = if t < 2 {
                0.0
            } else {
                d.samples
                    .iter()
                    .map(|s| (s.fraction_remaining - mean).powi(2))
                    .sum::<f64>()
                    / (t - 1) as f64
            };
            FractionStat {
                distance: d.distance,
                method: d.method,
                color: d.color,
                mean,
                error: (var / t as f64).sqrt(),
                trials: t,
            }
        })
        .collect()
}

/// Mean remaining fraction over independent reconstructions at one fixed
/// loss rate, with its standard error.
pub fn fraction_at_rate(lat: &Lattice, p: f64, trials: usize, master_seed: u64) -> (f64, f64) {
    assert!(trials >= 1, "need at least one trial");
    let fractions: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t);
            let losses = sample_losses(lat, p, &mut rng);
            reconstruct(lat, &losses, rng).remaining_fraction
        })
        .collect();
    let mean = fractions.iter().sum::<f64>() / trials as f64;
    let var = if trials < 2 {
        0.0
    } else {
        fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    };
    (mean, (var / trials as f64).sqrt())
}

/// CSV rows for a batch of distributions, one row per trial:
/// geometry,variant,distance,method,color,trial,seed,p_critical,fraction_remaining
pub fn write_csv<W: std::io::Write>(
    dists: &[ThresholdDistribution],
    w: W,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "geometry",
        "variant",
        "distance",
        "method",
        "color",
        "trial",
        "seed",
        "p_critical",
        "fraction_remaining",
    ])?;
    for d in dists {
        for s in &d.samples {
            out.write_record([
                d.geometry.to_string(),
                d.variant.to_string(),
                d.distance.to_string(),
                d.method.to_string(),
                d.color.letter().to_string(),
                s.trial.to_string(),
                s.seed.to_string(),
                s.p_critical.to_string(),
                s.fraction_remaining.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// JSON summary keyed by distance: {"8": {"mean": .., "std": .., "trials": ..}, ..}.
pub fn summary_json(dists: &[ThresholdDistribution]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for d in dists {
        map.insert(
            d.distance.to_string(),
            serde_json::json!({
                "mean": d.mean,
                "std": d.std,
                "trials": d.samples.len(),
            }),
        );
    }
    serde_json::Value::Object(map)
}
