//! Projective measurement statistics and the state-update channels built
//! from them.
//!
//! A [`MeasurementModel`] is a complete set of mutually orthogonal
//! projectors. On top of it sit four channels:
//!
//! - [`outcome_distribution`]: Born probabilities `p(m) = Tr(P_m rho)`.
//! - [`collapse`]: the Lueders update `P rho P / Tr(P rho)`, with a tagged
//!   [`Branch::Impossible`] result for probability-zero outcomes.
//! - [`dephase`]: blind measurement, `rho -> sum_m P_m rho P_m`.
//! - [`negative_measurement`]: ideal negative measurement, realized by
//!   blocking all channels but one and post-selecting on downstream
//!   detection; statistically identical to collapse onto the open channel.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::linalg::{cr, ComplexMatrix};
use crate::state::{DensityMatrix, QuantumState};

/// Tolerance for projector idempotence, orthogonality, and completeness.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Probabilities smaller than this in magnitude are treated as exact zeros
/// before normalization, suppressing floating-point noise in correlators.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Tolerance on the total probability of a distribution.
pub const DISTRIBUTION_TOL: f64 = 1e-9;

/// Complete set of M mutually orthogonal projectors with outcome labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    dim: usize,
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl MeasurementModel {
    /// Validates idempotence, pairwise orthogonality, and completeness
    /// (sum equals the identity), all within [`PROJECTOR_TOL`].
    pub fn new(projectors: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self, Error> {
        if projectors.is_empty() {
            return Err(Error::InvalidProjectors {
                reason: "no projectors given".into(),
            });
        }
        if projectors.len() != labels.len() {
            return Err(Error::InvalidProjectors {
                reason: format!(
                    "{} projectors but {} labels",
                    projectors.len(),
                    labels.len()
                ),
            });
        }
        let dim = projectors[0].nrows();
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for (k, p) in projectors.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::InvalidProjectors {
                    reason: format!("projector {k} has wrong dimensions"),
                });
            }
            if (p - p.adjoint()).norm() > PROJECTOR_TOL {
                return Err(Error::InvalidProjectors {
                    reason: format!("projector {k} is not Hermitian"),
                });
            }
            if (p * p - p).norm() > PROJECTOR_TOL {
                return Err(Error::InvalidProjectors {
                    reason: format!("projector {k} is not idempotent"),
                });
            }
            for (l, q) in projectors.iter().enumerate().take(k) {
                if (p * q).norm() > PROJECTOR_TOL {
                    return Err(Error::InvalidProjectors {
                        reason: format!("projectors {l} and {k} are not orthogonal"),
                    });
                }
            }
            sum += p;
        }
        if (&sum - ComplexMatrix::identity(dim, dim)).norm() > PROJECTOR_TOL {
            return Err(Error::InvalidProjectors {
                reason: "projectors do not sum to the identity".into(),
            });
        }
        Ok(Self {
            dim,
            projectors,
            labels,
        })
    }

    /// The standard basis measurement: N rank-1 projectors labeled
    /// `A, B, C, ...`.
    pub fn basis(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= 26, "basis labels support 1..=26 levels");
        let projectors = (0..dim)
            .map(|k| {
                let mut p = ComplexMatrix::zeros(dim, dim);
                p[(k, k)] = cr(1.0);
                p
            })
            .collect();
        let labels = (0..dim)
            .map(|k| char::from(b'A' + k as u8).to_string())
            .collect();
        Self {
            dim,
            projectors,
            labels,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outcomes(&self) -> usize {
        self.projectors.len()
    }

    pub fn projector(&self, outcome: usize) -> &ComplexMatrix {
        &self.projectors[outcome]
    }

    pub fn label(&self, outcome: usize) -> &str {
        &self.labels[outcome]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Per-slot mapping from outcome index to a dichotomic value. Each slot
/// must use values drawn entirely from {-1,+1} or entirely from {0,1}
/// (the indicator variant used by the witness-form inequality).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueAssignment {
    slots: BTreeMap<usize, Vec<f64>>,
}

impl ValueAssignment {
    pub fn new() -> Self {
        Self {
            slots: BTreeMap::new(),
        }
    }

    /// Adds (or replaces) the value table for one time slot.
    pub fn with_slot(mut self, slot: usize, values: Vec<f64>) -> Result<Self, Error> {
        let plus_minus = values.iter().all(|&v| v == 1.0 || v == -1.0);
        let indicator = values.iter().all(|&v| v == 1.0 || v == 0.0);
        if values.is_empty() || (!plus_minus && !indicator) {
            return Err(Error::InvalidAssignmentValues { slot });
        }
        self.slots.insert(slot, values);
        Ok(self)
    }

    /// The same outcome labeling applied to every listed slot.
    pub fn shared(slots: &[usize], pattern: &[f64]) -> Result<Self, Error> {
        let mut assignment = Self::new();
        for &slot in slots {
            assignment = assignment.with_slot(slot, pattern.to_vec())?;
        }
        Ok(assignment)
    }

    pub fn covers(&self, slot: usize) -> bool {
        self.slots.contains_key(&slot)
    }

    pub fn value(&self, slot: usize, outcome: usize) -> Result<f64, Error> {
        let values = self
            .slots
            .get(&slot)
            .ok_or(Error::MissingAssignmentSlot { slot })?;
        values
            .get(outcome)
            .copied()
            .ok_or(Error::MissingAssignmentSlot { slot })
    }
}

impl Default for ValueAssignment {
    fn default() -> Self {
        Self::new()
    }
}

/// Probabilities per outcome, clamped and validated to sum to 1 within
/// [`DISTRIBUTION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self, Error> {
        assert_eq!(labels.len(), probabilities.len());
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p))
            || (sum - 1.0).abs() > DISTRIBUTION_TOL
        {
            return Err(Error::InvalidDistribution { sum });
        }
        Ok(Self {
            labels,
            probabilities,
        })
    }

    pub fn n_outcomes(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probability(&self, outcome: usize) -> f64 {
        self.probabilities[outcome]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Channels occluded at one measurement time. At least one channel must
/// stay open.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockingPattern {
    blocked: Vec<bool>,
}

impl BlockingPattern {
    /// `blocked[k]` occludes outcome `k`. Rejects the all-blocked pattern.
    pub fn new(blocked: Vec<bool>) -> Result<Self, Error> {
        if blocked.iter().all(|&b| b) {
            return Err(Error::AllChannelsBlocked);
        }
        Ok(Self { blocked })
    }

    /// Blocks every channel except `open`.
    pub fn single_open(n_outcomes: usize, open: usize) -> Self {
        assert!(open < n_outcomes);
        Self {
            blocked: (0..n_outcomes).map(|k| k != open).collect(),
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_blocked(&self, outcome: usize) -> bool {
        self.blocked[outcome]
    }

    pub fn open_channels(&self) -> Vec<usize> {
        (0..self.blocked.len())
            .filter(|&k| !self.blocked[k])
            .collect()
    }
}

/// Result of a conditioning operation: either a realized branch with its
/// probability and post-measurement state, or an impossible branch whose
/// weight is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    Realized {
        probability: f64,
        state: DensityMatrix,
    },
    Impossible,
}

impl Branch {
    pub fn probability(&self) -> f64 {
        match self {
            Branch::Realized { probability, .. } => *probability,
            Branch::Impossible => 0.0,
        }
    }
}

/// Born probabilities `p(m) = Tr(P_m rho)`. Values within
/// [`PROBABILITY_FLOOR`] of zero are clamped to exactly zero, then the
/// vector is renormalized.
pub fn outcome_distribution(
    state: &QuantumState,
    meas: &MeasurementModel,
) -> OutcomeDistribution {
    assert_eq!(
        state.dim(),
        meas.dim(),
        "state dimension {} does not match measurement dimension {}",
        state.dim(),
        meas.dim()
    );
    let rho = state.to_density();
    let mut probs: Vec<f64> = (0..meas.n_outcomes())
        .map(|k| (meas.projector(k) * rho.matrix()).trace().re)
        .collect();
    for p in probs.iter_mut() {
        if p.abs() < PROBABILITY_FLOOR {
            *p = 0.0;
        }
        debug_assert!(*p >= 0.0, "probability {p} below the clamp floor");
        *p = p.max(0.0);
    }
    let sum: f64 = probs.iter().sum();
    debug_assert!((sum - 1.0).abs() <= DISTRIBUTION_TOL, "total probability {sum}");
    for p in probs.iter_mut() {
        *p /= sum;
    }
    OutcomeDistribution::new(meas.labels().to_vec(), probs)
        .expect("clamped and renormalized Born probabilities form a distribution")
}

/// Lueders update for one outcome. The reported probability is exactly the
/// corresponding [`outcome_distribution`] entry; a zero-probability outcome
/// yields [`Branch::Impossible`].
pub fn collapse(state: &QuantumState, meas: &MeasurementModel, outcome: usize) -> Branch {
    assert!(outcome < meas.n_outcomes(), "outcome {outcome} out of range");
    let dist = outcome_distribution(state, meas);
    let probability = dist.probability(outcome);
    if probability == 0.0 {
        return Branch::Impossible;
    }
    let rho = state.to_density();
    let p = meas.projector(outcome);
    let projected = p * rho.matrix() * p;
    let trace = projected.trace().re;
    let normalized = projected * cr(1.0 / trace);
    // Dividing by a near-floor probability amplifies the asymmetric part
    // of the rounding noise; symmetrizing is exact for the true state.
    let state = DensityMatrix::from_checked((&normalized + normalized.adjoint()) * cr(0.5));
    Branch::Realized { probability, state }
}

/// Blind measurement: measure but discard the outcome,
/// `rho -> sum_m P_m rho P_m`. Kills coherences between outcome subspaces
/// while preserving the trace.
pub fn dephase(state: &QuantumState, meas: &MeasurementModel) -> DensityMatrix {
    assert_eq!(state.dim(), meas.dim());
    let rho = state.to_density();
    let mut out = ComplexMatrix::zeros(meas.dim(), meas.dim());
    for k in 0..meas.n_outcomes() {
        let p = meas.projector(k);
        out += p * rho.matrix() * p;
    }
    DensityMatrix::from_checked(out)
}

/// Ideal negative measurement: all channels except one are blocked, and a
/// later detection post-selects on the open channel having been taken.
/// Statistically identical to [`collapse`] onto the open channel.
pub fn negative_measurement(
    state: &QuantumState,
    meas: &MeasurementModel,
    pattern: &BlockingPattern,
) -> Result<Branch, Error> {
    assert_eq!(pattern.n_outcomes(), meas.n_outcomes());
    let open = pattern.open_channels();
    if open.len() != 1 {
        return Err(Error::NotSingleOpenChannel { open: open.len() });
    }
    Ok(collapse(state, meas, open[0]))
}
