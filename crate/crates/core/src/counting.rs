//! Statistical emulation of the counting experiment: Poissonian totals
//! split multinomially over detection channels, detector-efficiency
//! correction, and Monte Carlo propagation of counting noise and
//! wave-plate angle errors into the K correlators.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};

use crate::error::Error;
use crate::givens::{compose_rotations, decompose_rotation, PlaneRotation};
use crate::linalg::UnitaryMatrix;
use crate::measurement::{MeasurementModel, OutcomeDistribution, ValueAssignment};
use crate::protocol::{
    correlator, dichotomic_assignment, k3, k3_stages, k4, k4_stages, k_joints, k_report,
    undisturbed_distribution, CorrelatorReport, JointDistribution, KCombination,
};
use crate::rng::derive_stream;
use crate::state::{PureState, QuantumState};

const LANE_SAMPLE: u64 = 1;
const LANE_COUNTING: u64 = 2;
const LANE_ANGLE: u64 = 3;

/// Counting budget and Monte Carlo size for the noise emulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingConfig {
    /// Expected coincidences per parameter point, split equally across
    /// the point's measurement settings.
    pub total_counts: f64,
    /// Monte Carlo repetitions.
    pub repeats: usize,
    pub seed: u64,
}

impl CountingConfig {
    pub fn new(total_counts: f64, repeats: usize, seed: u64) -> Result<Self, Error> {
        if !total_counts.is_finite() || total_counts < 1.0 {
            return Err(Error::InvalidConfig {
                reason: format!("total_counts must be a finite value >= 1, got {total_counts}"),
            });
        }
        if repeats < 2 {
            return Err(Error::InvalidConfig {
                reason: format!("repeats must be >= 2 for a spread estimate, got {repeats}"),
            });
        }
        Ok(Self {
            total_counts,
            repeats,
            seed,
        })
    }
}

/// Per-channel detection efficiencies in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyModel {
    efficiencies: Vec<f64>,
}

impl EfficiencyModel {
    pub fn new(efficiencies: Vec<f64>) -> Result<Self, Error> {
        if efficiencies.is_empty()
            || efficiencies
                .iter()
                .any(|e| !e.is_finite() || *e <= 0.0 || *e > 1.0)
        {
            return Err(Error::InvalidEfficiency);
        }
        Ok(Self { efficiencies })
    }

    /// Unit efficiency on every channel; correction with this model is
    /// plain normalization.
    pub fn uniform(n_channels: usize) -> Self {
        Self {
            efficiencies: vec![1.0; n_channels],
        }
    }

    pub fn efficiencies(&self) -> &[f64] {
        &self.efficiencies
    }
}

/// Wave-plate angle-error model: each plate's setting carries a Gaussian
/// error, and a half-wave plate rotates polarization by twice its
/// physical angle.
///
/// A stage realized with more plates than its decomposition has rotation
/// angles accumulates proportionally more variance; each rotation angle
/// absorbs an equal share, scaling its standard deviation by
/// `sqrt(plates / rotations)`. By default the plate count per stage
/// equals the decomposition's rotation count, so each rotation angle is
/// perturbed by exactly `sigma_degrees * doubling` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleErrorModel {
    sigma_degrees: f64,
    doubling: f64,
    plates_per_unitary: Option<usize>,
}

impl AngleErrorModel {
    pub fn new(sigma_degrees: f64) -> Result<Self, Error> {
        if !sigma_degrees.is_finite() || sigma_degrees < 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("sigma_degrees must be finite and >= 0, got {sigma_degrees}"),
            });
        }
        Ok(Self {
            sigma_degrees,
            doubling: 2.0,
            plates_per_unitary: None,
        })
    }

    pub fn with_doubling(mut self, doubling: f64) -> Result<Self, Error> {
        if !doubling.is_finite() || doubling <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("doubling factor must be finite and > 0, got {doubling}"),
            });
        }
        self.doubling = doubling;
        Ok(self)
    }

    pub fn with_plates_per_unitary(mut self, plates: usize) -> Result<Self, Error> {
        if plates < 1 {
            return Err(Error::InvalidConfig {
                reason: "plates_per_unitary must be >= 1".into(),
            });
        }
        self.plates_per_unitary = Some(plates);
        Ok(self)
    }

    pub fn sigma_degrees(&self) -> f64 {
        self.sigma_degrees
    }

    pub fn doubling(&self) -> f64 {
        self.doubling
    }

    pub fn plates_per_unitary(&self) -> Option<usize> {
        self.plates_per_unitary
    }

    /// Standard deviation, in radians, applied to each of a stage's
    /// `n_rotations` rotation angles.
    pub fn rotation_sigma(&self, n_rotations: usize) -> f64 {
        assert!(n_rotations >= 1);
        let plates = self.plates_per_unitary.unwrap_or(n_rotations) as f64;
        self.sigma_degrees.to_radians() * self.doubling * (plates / n_rotations as f64).sqrt()
    }
}

/// Mean, sample standard deviation, and sample count of a Monte Carlo
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
}

/// Welford accumulator; numerically stable and order-independent in
/// distribution.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn summary(&self) -> MonteCarloSummary {
        assert!(self.n >= 2, "spread needs at least two samples");
        MonteCarloSummary {
            mean: self.mean,
            std: (self.m2 / (self.n - 1) as f64).sqrt(),
            samples: self.n,
        }
    }
}

/// A parameter point of one of the two fixed three-level protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KPoint {
    K3 { theta: f64, phi: f64 },
    K4 { theta3: f64, phi3: f64 },
}

impl KPoint {
    pub fn combination(&self) -> KCombination {
        match self {
            KPoint::K3 { .. } => KCombination::K3,
            KPoint::K4 { .. } => KCombination::K4,
        }
    }

    pub fn stages(&self) -> Vec<UnitaryMatrix> {
        match *self {
            KPoint::K3 { theta, phi } => k3_stages(theta, phi).to_vec(),
            KPoint::K4 { theta3, phi3 } => k4_stages(theta3, phi3).to_vec(),
        }
    }

    /// Noise-free evaluation of the point.
    pub fn exact_report(&self) -> CorrelatorReport {
        match *self {
            KPoint::K3 { theta, phi } => k3(theta, phi),
            KPoint::K4 { theta3, phi3 } => k4(theta3, phi3),
        }
    }
}

/// One counting record for a measurement setting: the event total is
/// Poisson with mean `config.total_counts` and is split multinomially by
/// the outcome distribution. Deterministic per `(config.seed,
/// setting_index)`; distinct settings draw from decorrelated streams.
pub fn sample_counts(
    dist: &OutcomeDistribution,
    config: &CountingConfig,
    setting_index: u64,
) -> Vec<u64> {
    let mut rng = derive_stream(config.seed, LANE_SAMPLE, setting_index);
    sample_counts_with(dist, config.total_counts, &mut rng)
}

fn sample_counts_with<R: Rng + ?Sized>(
    dist: &OutcomeDistribution,
    expected_total: f64,
    rng: &mut R,
) -> Vec<u64> {
    let total = Poisson::new(expected_total)
        .expect("expected total is validated positive")
        .sample(rng) as u64;
    multinomial(dist.probabilities(), total, rng)
}

/// Multinomial split by sequential binomial conditioning.
fn multinomial<R: Rng + ?Sized>(probabilities: &[f64], total: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining = total;
    let mut mass_left = 1.0;
    for (k, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probabilities.len() {
            counts[k] = remaining;
            break;
        }
        let conditional = if mass_left > 1e-12 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let n = if conditional >= 1.0 {
            remaining
        } else if conditional <= 0.0 {
            0
        } else {
            Binomial::new(remaining, conditional)
                .expect("conditional probability is clamped to [0, 1]")
                .sample(rng)
        };
        counts[k] = n;
        remaining -= n;
        mass_left -= p;
    }
    counts
}

/// Fair-sampling efficiency correction: `p_n = (c_n / eta_n) / sum_m (c_m
/// / eta_m)`. With uniform efficiencies this is plain normalization,
/// bit for bit. The returned distribution carries positional labels.
pub fn efficiency_correct(
    raw_counts: &[u64],
    eff: &EfficiencyModel,
) -> Result<OutcomeDistribution, Error> {
    assert_eq!(
        raw_counts.len(),
        eff.efficiencies().len(),
        "count vector and efficiency model disagree on channel count"
    );
    if raw_counts.iter().all(|&c| c == 0) {
        return Err(Error::AllCountsZero);
    }
    let corrected: Vec<f64> = raw_counts
        .iter()
        .zip(eff.efficiencies())
        .map(|(&c, &eta)| c as f64 / eta)
        .collect();
    let total: f64 = corrected.iter().sum();
    let probabilities: Vec<f64> = corrected.iter().map(|c| c / total).collect();
    let labels = (0..raw_counts.len()).map(|k| k.to_string()).collect();
    OutcomeDistribution::new(labels, probabilities)
}

/// The sampling template of one correlator pair's runs.
struct PairPlan {
    sign: f64,
    slot_i: usize,
    slot_j: usize,
    /// Detected-channel distribution of each single-open blocking run,
    /// extended by the absorbed remainder.
    blocking: Vec<OutcomeDistribution>,
    /// The unblocked reference run's distribution at the detection slot.
    reference: OutcomeDistribution,
    joint_labels: Vec<String>,
}

fn pair_plans(point: &KPoint, meas: &MeasurementModel) -> Vec<PairPlan> {
    let stages = point.stages();
    let initial = QuantumState::Pure(PureState::basis(3, 2));
    let m = meas.n_outcomes();
    k_joints(&initial, &stages, Some(2), meas, point.combination())
        .into_iter()
        .map(|(_, sign, joint)| {
            let (i, j) = joint.slots();
            let blocking = (0..m)
                .map(|open| {
                    let mut probs: Vec<f64> =
                        (0..m).map(|mj| joint.probability(open, mj)).collect();
                    let detected: f64 = probs.iter().sum();
                    probs.push((1.0 - detected).max(0.0));
                    let mut labels = meas.labels().to_vec();
                    labels.push("absorbed".to_string());
                    OutcomeDistribution::new(labels, probs)
                        .expect("joint row plus remainder is a distribution")
                })
                .collect();
            let reference = undisturbed_distribution(&initial, &stages, meas, j);
            PairPlan {
                sign,
                slot_i: i,
                slot_j: j,
                blocking,
                reference,
                joint_labels: meas.labels().to_vec(),
            }
        })
        .collect()
}

/// Estimates the pair's correlator from one round of sampled runs:
/// blocking-run cell counts, efficiency-corrected and normalized across
/// the pair's runs, reassembled into a joint, then contracted with the
/// value assignment. A round with no detected events estimates 0.
fn sampled_correlator<R: Rng + ?Sized>(
    plan: &PairPlan,
    assignment: &ValueAssignment,
    per_run_counts: f64,
    rng: &mut R,
) -> f64 {
    let m = plan.joint_labels.len();
    let mut cells = vec![0u64; m * m];
    for (open, dist) in plan.blocking.iter().enumerate() {
        let counts = sample_counts_with(dist, per_run_counts, rng);
        for m_j in 0..m {
            cells[open * m + m_j] = counts[m_j];
        }
    }
    // The unblocked reference run consumes its share of the budget; its
    // counts do not enter the cross-run normalized estimator.
    let _reference = sample_counts_with(&plan.reference, per_run_counts, rng);
    match efficiency_correct(&cells, &EfficiencyModel::uniform(m * m)) {
        Ok(estimated) => {
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|mi| (0..m).map(|mj| estimated.probability(mi * m + mj)).collect())
                .collect();
            let joint =
                JointDistribution::new(plan.slot_i, plan.slot_j, plan.joint_labels.clone(), rows)
                    .expect("normalized counts form a joint distribution");
            let c = correlator(&joint, assignment).expect("assignment covers measured slots");
            debug_assert!(c.abs() <= 1.0 + 1e-9);
            c
        }
        Err(_) => 0.0,
    }
}

/// Monte Carlo distribution of the K estimator under finite counting
/// statistics.
///
/// Run plan per repeat: every correlator pair gets one single-open
/// blocking run per channel plus one unblocked reference run, and the
/// aggregate budget `config.total_counts` is split equally across all
/// runs of the point (16 for the four-time combination, 12 for the
/// three-time one). Per-repeat streams derive from `(config.seed, repeat
/// index)`.
pub fn k_with_counting_noise(point: &KPoint, config: &CountingConfig) -> MonteCarloSummary {
    let meas = MeasurementModel::basis(3);
    let assignment = dichotomic_assignment(point.combination().n_slots());
    let plans = pair_plans(point, &meas);
    let runs_per_pair = meas.n_outcomes() + 1;
    let per_run = config.total_counts / (plans.len() * runs_per_pair) as f64;

    let mut acc = Welford::default();
    for repeat in 0..config.repeats {
        let mut rng = derive_stream(config.seed, LANE_COUNTING, repeat as u64);
        let k_hat: f64 = plans
            .iter()
            .map(|plan| plan.sign * sampled_correlator(plan, &assignment, per_run, &mut rng))
            .sum();
        acc.push(k_hat);
    }
    acc.summary()
}

/// K and closure-correlator statistics under wave-plate angle errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleErrorSummary {
    pub k: MonteCarloSummary,
    /// The correlator between the final slot and slot 1 (`C41` for the
    /// four-time protocol, `C31` for the three-time one), which measures
    /// how exactly the perturbed evolution closes.
    pub c_final: MonteCarloSummary,
}

/// Monte Carlo distribution of K under Gaussian wave-plate angle errors:
/// each stage is decomposed into plane rotations, every rotation angle is
/// perturbed independently per [`AngleErrorModel::rotation_sigma`], and
/// the protocol is re-evaluated exactly with the rebuilt stages.
pub fn k_with_angle_errors(
    point: &KPoint,
    model: &AngleErrorModel,
    repeats: usize,
    seed: u64,
) -> AngleErrorSummary {
    assert!(repeats >= 2, "spread needs at least two repeats");
    let combination = point.combination();
    let stages = point.stages();
    let meas = MeasurementModel::basis(3);
    let initial = QuantumState::Pure(PureState::basis(3, 2));
    let assignment = dichotomic_assignment(combination.n_slots());
    let dim = meas.dim();
    let decomposed: Vec<Vec<PlaneRotation>> = stages
        .iter()
        .map(|s| decompose_rotation(s).expect("protocol stages are real rotations"))
        .collect();
    let noise: Vec<Option<Normal<f64>>> = decomposed
        .iter()
        .map(|rotations| {
            let sigma = model.rotation_sigma(rotations.len());
            (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma is finite and positive"))
        })
        .collect();
    let final_pair = match combination {
        KCombination::K3 => (3, 1),
        KCombination::K4 => (4, 1),
    };

    let mut k_acc = Welford::default();
    let mut c_acc = Welford::default();
    for repeat in 0..repeats {
        let mut rng = derive_stream(seed, LANE_ANGLE, repeat as u64);
        let perturbed: Vec<UnitaryMatrix> = decomposed
            .iter()
            .zip(&noise)
            .map(|(rotations, dist)| {
                let jittered: Vec<PlaneRotation> = rotations
                    .iter()
                    .map(|g| PlaneRotation {
                        plane: g.plane,
                        angle: g.angle + dist.map_or(0.0, |d| d.sample(&mut rng)),
                    })
                    .collect();
                compose_rotations(dim, &jittered)
            })
            .collect();
        let report = k_report(&initial, &perturbed, Some(2), &meas, &assignment, combination);
        k_acc.push(report.k_value);
        c_acc.push(report.correlator(final_pair.0, final_pair.1));
    }
    AngleErrorSummary {
        k: k_acc.summary(),
        c_final: c_acc.summary(),
    }
}
