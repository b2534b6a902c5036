//! Two-point Leggett-Garg protocols and the derived quantities: the
//! three- and four-time correlators K3 and K4, closed-form cross-checks,
//! and the no-signalling-in-time witness.
//!
//! Protocol semantics follow the experimental procedure: every correlator
//! `C_ij` comes from its own run in which only slots `i` and `j` interact
//! with the system (two-point semantics). Slot 1 may coincide with state
//! preparation, in which case it carries a deterministic outcome and the
//! dictated value +1 instead of a projector.
//!
//! Time slots are numbered from 1 throughout the public API, matching the
//! `C_21`-style correlator names.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::linalg::{make_unitary, EvolutionParams, UnitaryMatrix};
use crate::measurement::{
    collapse, dephase, negative_measurement, outcome_distribution, BlockingPattern, Branch,
    MeasurementModel, ValueAssignment,
};
use crate::state::{DensityMatrix, PureState, QuantumState};

/// Tolerance for the equality of direct and blocking-reconstructed joints.
pub const BLOCKING_EQUIVALENCE_TOL: f64 = 1e-10;
/// Tolerance on the total probability of a joint distribution.
pub const JOINT_TOTAL_TOL: f64 = 1e-9;

/// What happens to the system at one time slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotMode {
    /// The slot coincides with state preparation: the outcome is the
    /// prepared basis state, read off without a measurement, and the
    /// slot's value is dictated to be +1.
    Preparation { outcome: usize },
    /// Projective measurement with readout.
    Projective,
    /// Projective statistics reconstructed from single-open blocking runs
    /// (ideal negative measurement). Numerically identical to
    /// [`SlotMode::Projective`]; kept distinct so run plans can record how
    /// a slot is realized.
    Blocking,
    /// Measurement without readout: pure dephasing.
    Blind,
    /// No interaction at this time.
    Unmeasured,
}

/// A full protocol configuration: initial state, the unitaries between
/// consecutive time slots, what happens at each slot, and the value
/// assignment used by correlators.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    initial_state: QuantumState,
    unitaries: Vec<UnitaryMatrix>,
    slots: Vec<SlotMode>,
    measurement: MeasurementModel,
    assignment: ValueAssignment,
}

impl ProtocolSpec {
    /// Validates shape (one unitary per slot gap, consistent dimensions)
    /// and the preparation convention: a [`SlotMode::Preparation`] slot is
    /// only allowed at slot 1 and requires the initial state to be the
    /// corresponding basis state.
    pub fn new(
        initial_state: QuantumState,
        unitaries: Vec<UnitaryMatrix>,
        slots: Vec<SlotMode>,
        measurement: MeasurementModel,
        assignment: ValueAssignment,
    ) -> Result<Self, Error> {
        let n_slots = slots.len();
        if n_slots < 2 || unitaries.len() != n_slots - 1 {
            return Err(Error::WrongUnitaryCount {
                slots: n_slots,
                expected: n_slots.saturating_sub(1),
                got: unitaries.len(),
            });
        }
        let dim = initial_state.dim();
        if measurement.dim() != dim || unitaries.iter().any(|u| u.dim() != dim) {
            return Err(Error::InvalidConfig {
                reason: "state, unitaries, and measurement dimensions disagree".into(),
            });
        }
        for (k, mode) in slots.iter().enumerate() {
            if let SlotMode::Preparation { outcome } = mode {
                if k != 0 {
                    return Err(Error::InvalidConfig {
                        reason: format!("preparation mode at slot {}, only slot 1 allowed", k + 1),
                    });
                }
                if *outcome >= measurement.n_outcomes() {
                    return Err(Error::InvalidConfig {
                        reason: format!("preparation outcome {outcome} out of range"),
                    });
                }
                let prep = PureState::basis(dim, *outcome).to_density();
                let distance = (initial_state.to_density().matrix() - prep.matrix()).norm();
                if distance > 1e-10 {
                    return Err(Error::PreparationMismatch { outcome: *outcome });
                }
            }
        }
        Ok(Self {
            initial_state,
            unitaries,
            slots,
            measurement,
            assignment,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn dim(&self) -> usize {
        self.initial_state.dim()
    }

    /// Mode of a 1-based slot.
    pub fn mode(&self, slot: usize) -> SlotMode {
        self.slots[slot - 1]
    }

    /// Unitary applied between slots `k` and `k+1` (1-based `k`).
    pub fn unitary(&self, k: usize) -> &UnitaryMatrix {
        &self.unitaries[k - 1]
    }

    pub fn initial_state(&self) -> &QuantumState {
        &self.initial_state
    }

    pub fn measurement(&self) -> &MeasurementModel {
        &self.measurement
    }

    pub fn assignment(&self) -> &ValueAssignment {
        &self.assignment
    }

    /// Panics unless `(i, j)` is a valid two-point run: `i < j`, both
    /// readable, and no other slot interacting with the system.
    fn assert_two_point(&self, i: usize, j: usize) {
        assert!(
            i >= 1 && j <= self.n_slots() && i < j,
            "invalid slot pair ({i}, {j}) for {} slots",
            self.n_slots()
        );
        assert!(
            matches!(
                self.mode(i),
                SlotMode::Preparation { .. } | SlotMode::Projective | SlotMode::Blocking
            ),
            "slot {i} is not readable in this protocol"
        );
        assert!(
            matches!(self.mode(j), SlotMode::Projective | SlotMode::Blocking),
            "slot {j} is not a terminal detection slot"
        );
        for s in 1..=self.n_slots() {
            if s != i && s != j {
                let passive = matches!(self.mode(s), SlotMode::Unmeasured)
                    || (s == 1 && matches!(self.mode(1), SlotMode::Preparation { .. }));
                assert!(
                    passive,
                    "slot {s} interacts with the system; two-point runs measure only ({i}, {j})"
                );
            }
        }
    }

    /// Density matrix immediately before the given 1-based slot, assuming
    /// no interaction at the slots passed through.
    fn state_before(&self, slot: usize) -> DensityMatrix {
        let mut rho = self.initial_state.to_density();
        for s in 1..slot {
            rho = rho.evolve(self.unitary(s));
        }
        rho
    }
}

/// Joint outcome probabilities `P_ij(m_i, m_j)` for one two-point run.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    slot_i: usize,
    slot_j: usize,
    labels: Vec<String>,
    probabilities: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(
        slot_i: usize,
        slot_j: usize,
        labels: Vec<String>,
        probabilities: Vec<Vec<f64>>,
    ) -> Result<Self, Error> {
        let mut total = 0.0;
        for row in &probabilities {
            assert_eq!(row.len(), labels.len());
            for &p in row {
                if !(0.0..=1.0 + 1e-9).contains(&p) {
                    return Err(Error::InvalidDistribution { sum: p });
                }
                total += p;
            }
        }
        if (total - 1.0).abs() > JOINT_TOTAL_TOL {
            return Err(Error::InvalidDistribution { sum: total });
        }
        Ok(Self {
            slot_i,
            slot_j,
            labels,
            probabilities,
        })
    }

    /// The 1-based slot pair `(i, j)` this joint refers to.
    pub fn slots(&self) -> (usize, usize) {
        (self.slot_i, self.slot_j)
    }

    pub fn n_outcomes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probability(&self, m_i: usize, m_j: usize) -> f64 {
        self.probabilities[m_i][m_j]
    }

    /// Marginal distribution over the earlier slot's outcomes.
    pub fn marginal_i(&self) -> Vec<f64> {
        self.probabilities
            .iter()
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Marginal distribution over the later slot's outcomes.
    pub fn marginal_j(&self) -> Vec<f64> {
        let m = self.n_outcomes();
        (0..m)
            .map(|j| self.probabilities.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// Largest entrywise difference to another joint over the same pair.
    pub fn max_deviation(&self, other: &JointDistribution) -> f64 {
        assert_eq!(self.slots(), other.slots());
        let m = self.n_outcomes();
        let mut max: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                max = max.max((self.probability(i, j) - other.probability(i, j)).abs());
            }
        }
        max
    }
}

/// Branches over the outcomes of slot `i`: `(outcome, probability, state)`.
fn slot_branches(
    spec: &ProtocolSpec,
    i: usize,
    rho: DensityMatrix,
    force_blocking: bool,
) -> Vec<(usize, f64, DensityMatrix)> {
    let meas = spec.measurement();
    let state = QuantumState::Mixed(rho);
    let mode = spec.mode(i);
    if !force_blocking {
        if let SlotMode::Preparation { outcome } = mode {
            return vec![(outcome, 1.0, state.to_density())];
        }
    }
    (0..meas.n_outcomes())
        .filter_map(|m| {
            let branch = match (mode, force_blocking) {
                (SlotMode::Blocking, _) | (_, true) => {
                    let pattern = BlockingPattern::single_open(meas.n_outcomes(), m);
                    negative_measurement(&state, meas, &pattern)
                        .expect("single-open pattern is always valid")
                }
                _ => collapse(&state, meas, m),
            };
            match branch {
                Branch::Realized { probability, state } => Some((m, probability, state)),
                Branch::Impossible => None,
            }
        })
        .collect()
}

fn joint_from_branches(spec: &ProtocolSpec, i: usize, j: usize, force_blocking: bool) -> JointDistribution {
    spec.assert_two_point(i, j);
    let m = spec.measurement().n_outcomes();
    let mut probabilities = vec![vec![0.0; m]; m];
    for (m_i, p_i, state) in slot_branches(spec, i, spec.state_before(i), force_blocking) {
        let mut evolved = state;
        for s in i..j {
            evolved = evolved.evolve(spec.unitary(s));
        }
        let dist = outcome_distribution(&QuantumState::Mixed(evolved), spec.measurement());
        for m_j in 0..m {
            probabilities[m_i][m_j] = p_i * dist.probability(m_j);
        }
    }
    JointDistribution::new(i, j, spec.measurement().labels().to_vec(), probabilities)
        .expect("branch weights and Born probabilities form a joint distribution")
}

/// Joint distribution of a two-point run: evolve to slot `i`, read it
/// (deterministically for a preparation slot, by collapse otherwise),
/// evolve to slot `j`, and read the Born probabilities there.
pub fn joint_distribution(spec: &ProtocolSpec, i: usize, j: usize) -> JointDistribution {
    joint_from_branches(spec, i, j, false)
}

/// Same joint assembled the way the experiment does it: M single-open
/// blocking runs at slot `i`, each measured at slot `j`. Equals
/// [`joint_distribution`] within [`BLOCKING_EQUIVALENCE_TOL`]; runs whose
/// open channel has probability zero contribute zero rows.
pub fn joint_via_blocking(spec: &ProtocolSpec, i: usize, j: usize) -> JointDistribution {
    joint_from_branches(spec, i, j, true)
}

/// Two-time correlator `<Q(t_i) Q(t_j)> = sum q(m_i) q(m_j) P_ij(m_i, m_j)`.
pub fn correlator(joint: &JointDistribution, assignment: &ValueAssignment) -> Result<f64, Error> {
    let (i, j) = joint.slots();
    let m = joint.n_outcomes();
    let mut acc = 0.0;
    for m_i in 0..m {
        let q_i = assignment.value(i, m_i)?;
        for m_j in 0..m {
            let q_j = assignment.value(j, m_j)?;
            acc += q_i * q_j * joint.probability(m_i, m_j);
        }
    }
    Ok(acc)
}

/// Which linear combination of two-time correlators a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KCombination {
    /// `K3 = C21 + C32 - C31`
    K3,
    /// `K4 = C21 + C32 + C34 - C41`
    K4,
}

impl KCombination {
    /// The correlator keys and signs of the combination, in formula order.
    pub fn terms(self) -> &'static [((usize, usize), f64)] {
        match self {
            KCombination::K3 => &[((2, 1), 1.0), ((3, 2), 1.0), ((3, 1), -1.0)],
            KCombination::K4 => &[
                ((2, 1), 1.0),
                ((3, 2), 1.0),
                ((3, 4), 1.0),
                ((4, 1), -1.0),
            ],
        }
    }

    pub fn n_slots(self) -> usize {
        match self {
            KCombination::K3 => 3,
            KCombination::K4 => 4,
        }
    }
}

/// Correlators, K value, and optional witness for one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorReport {
    pub combination: KCombination,
    /// Keyed in formula order, e.g. `(2,1)` for `C21` and `(3,4)` for `C34`.
    pub correlators: BTreeMap<(usize, usize), f64>,
    pub k_value: f64,
    pub witness: Option<f64>,
}

impl CorrelatorReport {
    /// `C_ij` regardless of key order. Panics if the pair is not present.
    pub fn correlator(&self, i: usize, j: usize) -> f64 {
        self.correlators
            .get(&(i, j))
            .or_else(|| self.correlators.get(&(j, i)))
            .copied()
            .unwrap_or_else(|| panic!("no correlator for pair ({i}, {j})"))
    }

    /// Recomputes the K value from the stored correlators; equals
    /// `k_value` by construction.
    pub fn recompute_k(&self) -> f64 {
        self.combination
            .terms()
            .iter()
            .map(|&((i, j), sign)| sign * self.correlator(i, j))
            .sum()
    }
}

/// Exact joint distribution of each two-point run of a K combination, in
/// formula order together with the term's sign. This is the run plan the
/// counting emulation samples from.
///
/// `prep_outcome` selects the slot-1 convention: `Some(m)` makes slot 1 a
/// preparation slot with dictated value +1 (the assignment still needs an
/// entry for slot 1, normally all +1); `None` measures slot 1 projectively
/// like any other slot.
pub fn k_joints(
    initial_state: &QuantumState,
    stages: &[UnitaryMatrix],
    prep_outcome: Option<usize>,
    measurement: &MeasurementModel,
    combination: KCombination,
) -> Vec<((usize, usize), f64, JointDistribution)> {
    let n_slots = combination.n_slots();
    assert_eq!(
        stages.len(),
        n_slots - 1,
        "{:?} needs {} stage unitaries",
        combination,
        n_slots - 1
    );
    combination
        .terms()
        .iter()
        .map(|&((a, b), sign)| {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            let slots: Vec<SlotMode> = (1..=n_slots)
                .map(|s| {
                    if s == 1 {
                        match prep_outcome {
                            Some(outcome) => SlotMode::Preparation { outcome },
                            None if s == i => SlotMode::Projective,
                            None => SlotMode::Unmeasured,
                        }
                    } else if s == i || s == j {
                        SlotMode::Projective
                    } else {
                        SlotMode::Unmeasured
                    }
                })
                .collect();
            let spec = ProtocolSpec::new(
                initial_state.clone(),
                stages.to_vec(),
                slots,
                measurement.clone(),
                ValueAssignment::new(),
            )
            .expect("k_joints builds a well-formed protocol");
            ((a, b), sign, joint_distribution(&spec, i, j))
        })
        .collect()
}

/// Evaluates a K combination from its two-point runs, one per correlator.
/// See [`k_joints`] for the slot-1 convention.
pub fn k_report(
    initial_state: &QuantumState,
    stages: &[UnitaryMatrix],
    prep_outcome: Option<usize>,
    measurement: &MeasurementModel,
    assignment: &ValueAssignment,
    combination: KCombination,
) -> CorrelatorReport {
    let mut correlators = BTreeMap::new();
    let mut k_value = 0.0;
    for ((a, b), sign, joint) in k_joints(initial_state, stages, prep_outcome, measurement, combination)
    {
        let c = correlator(&joint, assignment).expect("assignment covers measured slots");
        debug_assert!(c.abs() <= 1.0 + 1e-9, "correlator C{a}{b} = {c} out of range");
        correlators.insert((a, b), c);
        k_value += sign * c;
    }
    CorrelatorReport {
        combination,
        correlators,
        k_value,
        witness: None,
    }
}

/// Outcome distribution at 1-based slot `j` when nothing interacts with
/// the system before it: the undisturbed single-time statistics.
pub fn undisturbed_distribution(
    initial_state: &QuantumState,
    stages: &[UnitaryMatrix],
    measurement: &MeasurementModel,
    j: usize,
) -> crate::measurement::OutcomeDistribution {
    assert!(j >= 1 && j <= stages.len() + 1, "slot {j} out of range");
    let mut rho = initial_state.to_density();
    for stage in &stages[..j - 1] {
        rho = rho.evolve(stage);
    }
    outcome_distribution(&QuantumState::Mixed(rho), measurement)
}

/// The four-time protocol's stage unitaries: the first stage is fixed at
/// `(theta, phi) = (pi/2, 0)`, the third is free, and the middle stage is
/// chosen so the unmeasured evolution composes to the identity.
pub fn k4_stages(theta3: f64, phi3: f64) -> [UnitaryMatrix; 3] {
    let u1 = make_unitary(EvolutionParams {
        theta: std::f64::consts::FRAC_PI_2,
        phi: 0.0,
    });
    let u3 = make_unitary(EvolutionParams {
        theta: theta3,
        phi: phi3,
    });
    let u2 = u3.dagger().compose(&u1.dagger());
    [u1, u2, u3]
}

/// The three-outcome protocols' value assignment: outcomes A and B map to
/// +1, C to -1, at every measured slot; slot 1 carries the dictated +1.
pub fn dichotomic_assignment(n_slots: usize) -> ValueAssignment {
    let mut assignment = ValueAssignment::new()
        .with_slot(1, vec![1.0; 3])
        .expect("constant +1 is a valid slot assignment");
    for slot in 2..=n_slots {
        assignment = assignment
            .with_slot(slot, vec![1.0, 1.0, -1.0])
            .expect("A,B -> +1, C -> -1 is a valid slot assignment");
    }
    assignment
}

/// Four-time correlator `K4 = C21 + C32 + C34 - C41` for the three-level
/// protocol: preparation in the third basis state, stages from
/// [`k4_stages`], outcomes A and B valued +1 and C valued -1.
pub fn k4(theta3: f64, phi3: f64) -> CorrelatorReport {
    let initial = QuantumState::Pure(PureState::basis(3, 2));
    let stages = k4_stages(theta3, phi3);
    let meas = MeasurementModel::basis(3);
    let assignment = dichotomic_assignment(4);
    k_report(
        &initial,
        &stages,
        Some(2),
        &meas,
        &assignment,
        KCombination::K4,
    )
}

/// The three-time protocol's stages: one free rotation followed by its
/// inverse, so the unmeasured evolution returns to the start.
pub fn k3_stages(theta: f64, phi: f64) -> [UnitaryMatrix; 2] {
    let u1 = make_unitary(EvolutionParams { theta, phi });
    let u2 = u1.dagger();
    [u1, u2]
}

/// Three-time correlator `K3 = C21 + C32 - C31` for the three-level
/// protocol with stages from [`k3_stages`].
pub fn k3(theta: f64, phi: f64) -> CorrelatorReport {
    let initial = QuantumState::Pure(PureState::basis(3, 2));
    let stages = k3_stages(theta, phi);
    let meas = MeasurementModel::basis(3);
    let assignment = dichotomic_assignment(3);
    k_report(
        &initial,
        &stages,
        Some(2),
        &meas,
        &assignment,
        KCombination::K3,
    )
}

/// Printed closed form for `C21` in the three-time protocol; cross-check
/// only, the simulation is authoritative.
pub fn closed_form_c21(theta: f64, phi: f64) -> f64 {
    theta.sin().powi(2) - theta.cos().powi(2) * (2.0 * phi).cos()
}

/// Printed closed form for `C32` in the three-time protocol; cross-check
/// only, the simulation is authoritative.
pub fn closed_form_c32(theta: f64, phi: f64) -> f64 {
    (2.0 * theta).cos()
        * (theta.sin().powi(2)
            + theta.cos().powi(2) * (phi.cos().powi(4) - phi.sin().powi(4)))
}

/// Printed closed form for `K4(theta3, phi3)`, evaluated verbatim.
///
/// Known to disagree with the simulated protocol: at `(pi/2, pi/4)` it
/// gives 15/4 where the simulation (and the protocol's stated maximum)
/// give 3. Recorded as printed; use [`closed_form_k4_deviations`] to locate
/// the disagreements. The simulation is the source of truth.
pub fn closed_form_k4(theta3: f64, phi3: f64) -> f64 {
    (9.0 + 2.0 * (2.0 * theta3).cos() * (4.0 * phi3).cos()
        - 2.0 * (4.0 * phi3).cos()
        - 2.0 * (2.0 * theta3).cos())
        / 4.0
}

/// One grid point where the printed K4 closed form disagrees with the
/// simulated protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormDeviation {
    pub theta3: f64,
    pub phi3: f64,
    pub simulated: f64,
    pub closed_form: f64,
    pub deviation: f64,
}

/// Compares the simulated K4 against the printed closed form over a grid
/// and reports every point deviating by more than `tolerance`.
pub fn closed_form_k4_deviations(
    thetas: &[f64],
    phis: &[f64],
    tolerance: f64,
) -> Vec<ClosedFormDeviation> {
    let mut flagged = Vec::new();
    for &theta3 in thetas {
        for &phi3 in phis {
            let simulated = k4(theta3, phi3).k_value;
            let closed_form = closed_form_k4(theta3, phi3);
            let deviation = (simulated - closed_form).abs();
            if deviation > tolerance {
                flagged.push(ClosedFormDeviation {
                    theta3,
                    phi3,
                    simulated,
                    closed_form,
                    deviation,
                });
            }
        }
    }
    flagged
}

/// Witness evaluation detail for one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub theta: f64,
    pub phi: f64,
    /// Probability of outcome C at t3 with nothing happening at t2.
    pub p_no_measurement: f64,
    /// The same probability with a measurement at t2, summed over its
    /// outcomes.
    pub p_with_measurement: f64,
    /// `W = p_no_measurement - p_with_measurement`.
    pub witness: f64,
    /// The printed witness-form LGI value `K3W = 1 + W`.
    pub k3_witness: f64,
}

/// No-signalling-in-time witness in the three-time geometry: the change a
/// t2 measurement induces in the t3 outcome-C probability. The t3-only
/// run composes the two stages to the identity, so `p_no_measurement` is 1
/// for every parameter choice.
pub fn witness_report(theta: f64, phi: f64) -> WitnessReport {
    let stages = k3_stages(theta, phi);
    let meas = MeasurementModel::basis(3);
    let prep = PureState::basis(3, 2);

    let no_meas_state = prep.evolve(&stages[0]).evolve(&stages[1]);
    let p_no = outcome_distribution(&QuantumState::Pure(no_meas_state), &meas).probability(2);

    let spec = ProtocolSpec::new(
        QuantumState::Pure(prep),
        stages.to_vec(),
        vec![
            SlotMode::Preparation { outcome: 2 },
            SlotMode::Projective,
            SlotMode::Projective,
        ],
        meas.clone(),
        ValueAssignment::new(),
    )
    .expect("witness protocol is well-formed");
    let joint = joint_distribution(&spec, 2, 3);
    let p_with: f64 = (0..3).map(|m2| joint.probability(m2, 2)).sum();

    let witness = p_no - p_with;
    WitnessReport {
        theta,
        phi,
        p_no_measurement: p_no,
        p_with_measurement: p_with,
        witness,
        k3_witness: 1.0 + witness,
    }
}

/// `W(theta, phi)`; see [`witness_report`].
pub fn witness(theta: f64, phi: f64) -> f64 {
    witness_report(theta, phi).witness
}

/// Witness computed through the dephasing channel instead of two runs:
/// dephase at t2 and compare the t3 outcome-C probability against the
/// undisturbed run. Agrees with [`witness`] within 1e-10.
pub fn witness_via_dephasing(theta: f64, phi: f64) -> f64 {
    let stages = k3_stages(theta, phi);
    let meas = MeasurementModel::basis(3);
    let prep = PureState::basis(3, 2);

    let undisturbed = prep.evolve(&stages[0]).evolve(&stages[1]);
    let p_no = outcome_distribution(&QuantumState::Pure(undisturbed), &meas).probability(2);

    let dephased = dephase(&QuantumState::Pure(prep.evolve(&stages[0])), &meas).evolve(&stages[1]);
    let p_with = outcome_distribution(&QuantumState::Mixed(dephased), &meas).probability(2);

    p_no - p_with
}

/// The post-t2 state of the witness protocol's measured run: evolve the
/// preparation one stage, then dephase. At the witness maximum this is
/// the maximally mixed state.
pub fn witness_dephased_state(theta: f64, phi: f64) -> DensityMatrix {
    let stages = k3_stages(theta, phi);
    let meas = MeasurementModel::basis(3);
    let prep = PureState::basis(3, 2);
    dephase(&QuantumState::Pure(prep.evolve(&stages[0])), &meas)
}

/// The printed witness-form LGI, `K3W = 1 + W`.
pub fn k3_witness(theta: f64, phi: f64) -> f64 {
    witness_report(theta, phi).k3_witness
}

/// The witness-form LGI assembled from correlators instead of the printed
/// formula: blind values (+1 everywhere) at t2 and the indicator value
/// `q(m3) = 1` iff `m3 = C` at t3, substituted into the K3 combination.
///
/// The printed formula and this substitution disagree on the sign of the
/// witness term; both satisfy `|K3W - 1| = |W|`, which is what the tests
/// pin down. See [`k3_witness`] for the printed convention.
pub fn k3_witness_via_correlators(theta: f64, phi: f64) -> f64 {
    let initial = QuantumState::Pure(PureState::basis(3, 2));
    let stages = k3_stages(theta, phi);
    let meas = MeasurementModel::basis(3);
    let assignment = ValueAssignment::new()
        .with_slot(1, vec![1.0; 3])
        .and_then(|a| a.with_slot(2, vec![1.0; 3]))
        .and_then(|a| a.with_slot(3, vec![0.0, 0.0, 1.0]))
        .expect("witness assignment is valid");
    let report = k_report(
        &initial,
        &stages,
        Some(2),
        &meas,
        &assignment,
        KCombination::K3,
    );
    report.k_value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unitary;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn k4_pair_12_is_deterministic_at_the_maximum() {
        let stages = k4_stages(FRAC_PI_2, FRAC_PI_4);
        let spec = ProtocolSpec::new(
            QuantumState::Pure(PureState::basis(3, 2)),
            stages.to_vec(),
            vec![
                SlotMode::Preparation { outcome: 2 },
                SlotMode::Projective,
                SlotMode::Unmeasured,
                SlotMode::Unmeasured,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        )
        .unwrap();
        let joint = joint_distribution(&spec, 1, 2);
        // The first stage maps the preparation onto outcome A.
        assert!((joint.probability(2, 0) - 1.0).abs() <= 1e-12);
        let off: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| (i, j) != (2, 0))
            .map(|(i, j)| joint.probability(i, j))
            .sum();
        assert!(off <= 1e-12);
    }

    #[test]
    fn k4_pair_23_splits_evenly_at_the_maximum() {
        let stages = k4_stages(FRAC_PI_2, FRAC_PI_4);
        let spec = ProtocolSpec::new(
            QuantumState::Pure(PureState::basis(3, 2)),
            stages.to_vec(),
            vec![
                SlotMode::Preparation { outcome: 2 },
                SlotMode::Projective,
                SlotMode::Projective,
                SlotMode::Unmeasured,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        )
        .unwrap();
        let joint = joint_distribution(&spec, 2, 3);
        assert!((joint.probability(0, 0) - 0.5).abs() <= 1e-12);
        assert!((joint.probability(0, 1) - 0.5).abs() <= 1e-12);
        let rest: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| (i, j) != (0, 0) && (i, j) != (0, 1))
            .map(|(i, j)| joint.probability(i, j))
            .sum();
        assert!(rest <= 1e-12);
    }

    #[test]
    fn identity_evolution_keeps_the_preparation() {
        let spec = ProtocolSpec::new(
            QuantumState::Pure(PureState::basis(3, 2)),
            k3_stages(0.0, 0.0).to_vec(),
            vec![
                SlotMode::Preparation { outcome: 2 },
                SlotMode::Projective,
                SlotMode::Projective,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        )
        .unwrap();
        let joint = joint_distribution(&spec, 2, 3);
        assert!((joint.probability(2, 2) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn correlator_examples() {
        // Deterministic P(C,C) = 1 with q(C) = -1 at both slots.
        let joint = JointDistribution::new(
            2,
            3,
            vec!["A".into(), "B".into(), "C".into()],
            vec![
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let assignment = ValueAssignment::shared(&[2, 3], &[1.0, 1.0, -1.0]).unwrap();
        assert_eq!(correlator(&joint, &assignment).unwrap(), 1.0);

        // Missing slot entry is reported, not defaulted.
        let partial = ValueAssignment::new().with_slot(2, vec![1.0; 3]).unwrap();
        assert!(matches!(
            correlator(&joint, &partial),
            Err(Error::MissingAssignmentSlot { slot: 3 })
        ));
    }

    #[test]
    fn k4_components_at_the_maximum() {
        let report = k4(FRAC_PI_2, FRAC_PI_4);
        assert!((report.correlator(2, 1) - 1.0).abs() <= 1e-12);
        assert!((report.correlator(3, 2) - 1.0).abs() <= 1e-12);
        assert!(report.correlator(3, 4).abs() <= 1e-12);
        assert!((report.correlator(4, 1) + 1.0).abs() <= 1e-12);
        assert!((report.k_value - 3.0).abs() <= 1e-12);
        assert_eq!(report.recompute_k(), report.k_value);
    }

    #[test]
    fn k3_at_identity_point() {
        let report = k3(0.0, 0.0);
        assert!((report.correlator(2, 1) + 1.0).abs() <= 1e-12);
        assert!((report.correlator(3, 2) - 1.0).abs() <= 1e-12);
        assert!((report.correlator(3, 1) + 1.0).abs() <= 1e-12);
        assert!((report.k_value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn k3_maximum_and_c31_pinned() {
        assert!((k3(FRAC_PI_4, FRAC_PI_2).k_value - 2.0).abs() <= 1e-12);
        for &(theta, phi) in &[(0.3, 1.1), (2.0, 0.4), (1.2, 2.9), (FRAC_PI_4, FRAC_PI_2)] {
            let report = k3(theta, phi);
            assert!(
                (report.correlator(3, 1) + 1.0).abs() <= 1e-12,
                "C31 must be -1 at ({theta}, {phi})"
            );
        }
    }

    #[test]
    fn closed_forms_match_simulation_on_samples() {
        for &(theta, phi) in &[
            (0.0, 0.0),
            (FRAC_PI_4, FRAC_PI_2),
            (0.7, 0.3),
            (1.9, 2.4),
            (2.8, 1.0),
        ] {
            let report = k3(theta, phi);
            assert!(
                (report.correlator(2, 1) - closed_form_c21(theta, phi)).abs() <= 1e-12,
                "C21 mismatch at ({theta}, {phi})"
            );
            assert!(
                (report.correlator(3, 2) - closed_form_c32(theta, phi)).abs() <= 1e-12,
                "C32 mismatch at ({theta}, {phi})"
            );
        }
        assert!((closed_form_c21(FRAC_PI_4, FRAC_PI_2) - 1.0).abs() <= 1e-15);
        assert!(closed_form_c32(FRAC_PI_4, FRAC_PI_2).abs() <= 1e-15);
        assert!((closed_form_c21(0.0, 0.0) + 1.0).abs() <= 1e-15);
    }

    #[test]
    fn printed_k4_form_disagrees_with_simulation_at_the_maximum() {
        assert!((closed_form_k4(FRAC_PI_2, FRAC_PI_4) - 3.75).abs() <= 1e-12);
        let flagged = closed_form_k4_deviations(&[FRAC_PI_2], &[FRAC_PI_4], 1e-6);
        assert_eq!(flagged.len(), 1);
        assert!((flagged[0].simulated - 3.0).abs() <= 1e-9);
        assert!((flagged[0].closed_form - 3.75).abs() <= 1e-12);
    }

    #[test]
    fn printed_k4_form_has_the_stated_periods() {
        for &(t, p) in &[(0.3, 0.9), (1.4, 2.2), (2.6, 0.1)] {
            assert!((closed_form_k4(t, p) - closed_form_k4(t + PI, p)).abs() <= 1e-12);
            assert!((closed_form_k4(t, p) - closed_form_k4(t, p + FRAC_PI_2)).abs() <= 1e-12);
        }
    }

    #[test]
    fn blocking_route_equals_direct_route() {
        let stages = k4_stages(1.2, 0.7);
        let spec = ProtocolSpec::new(
            QuantumState::Pure(PureState::basis(3, 2)),
            stages.to_vec(),
            vec![
                SlotMode::Preparation { outcome: 2 },
                SlotMode::Projective,
                SlotMode::Unmeasured,
                SlotMode::Projective,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        )
        .unwrap();
        let direct = joint_distribution(&spec, 2, 4);
        let blocked = joint_via_blocking(&spec, 2, 4);
        assert!(direct.max_deviation(&blocked) <= BLOCKING_EQUIVALENCE_TOL);
    }

    #[test]
    fn pair_24_marginal_reproduces_pair_12_marginal() {
        // Summing the later slot out of P_42 leaves the t2 distribution
        // of the pair-(1,2) run.
        for &(theta3, phi3) in &[(FRAC_PI_2, FRAC_PI_4), (0.8, 2.1), (2.4, 1.3)] {
            let stages = k4_stages(theta3, phi3);
            let initial = QuantumState::Pure(PureState::basis(3, 2));
            let meas = MeasurementModel::basis(3);
            let spec_24 = ProtocolSpec::new(
                initial.clone(),
                stages.to_vec(),
                vec![
                    SlotMode::Preparation { outcome: 2 },
                    SlotMode::Projective,
                    SlotMode::Unmeasured,
                    SlotMode::Projective,
                ],
                meas.clone(),
                ValueAssignment::new(),
            )
            .unwrap();
            let spec_12 = ProtocolSpec::new(
                initial.clone(),
                stages.to_vec(),
                vec![
                    SlotMode::Preparation { outcome: 2 },
                    SlotMode::Projective,
                    SlotMode::Unmeasured,
                    SlotMode::Unmeasured,
                ],
                meas.clone(),
                ValueAssignment::new(),
            )
            .unwrap();
            let p42 = joint_via_blocking(&spec_24, 2, 4);
            let p12 = joint_distribution(&spec_12, 1, 2);
            let marginal_t2 = p42.marginal_i();
            let expected = p12.marginal_j();
            for m in 0..3 {
                assert!(
                    (marginal_t2[m] - expected[m]).abs() <= 1e-10,
                    "t2 marginal mismatch at outcome {m}"
                );
            }
        }
    }

    #[test]
    fn witness_values_at_reference_points() {
        let theta_star = (2.0_f64 / 3.0).sqrt().acos();

        let report = witness_report(theta_star, FRAC_PI_4);
        assert!((report.witness - 2.0 / 3.0).abs() <= 1e-12);
        assert!((report.p_no_measurement - 1.0).abs() <= 1e-12);
        assert!((report.p_with_measurement - 1.0 / 3.0).abs() <= 1e-12);
        assert!((report.k3_witness - 5.0 / 3.0).abs() <= 1e-12);

        assert!(witness(0.0, 0.0).abs() <= 1e-12);
        assert!((k3_witness(0.0, 0.0) - 1.0).abs() <= 1e-12);
        assert!((witness(PI - theta_star, FRAC_PI_4) - 2.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn witness_routes_agree() {
        for i in 0..15 {
            for j in 0..15 {
                let theta = i as f64 * PI / 14.0;
                let phi = j as f64 * PI / 14.0;
                let two_run = witness(theta, phi);
                let channel = witness_via_dephasing(theta, phi);
                assert!(
                    (two_run - channel).abs() <= 1e-10,
                    "witness routes disagree at ({theta}, {phi})"
                );
            }
        }
    }

    #[test]
    fn dephased_state_at_witness_maximum_is_maximally_mixed() {
        let theta_star = (2.0_f64 / 3.0).sqrt().acos();
        let state = witness_dephased_state(theta_star, FRAC_PI_4);
        let mixed = DensityMatrix::maximally_mixed(3);
        assert!((state.matrix() - mixed.matrix()).norm() <= 1e-10);
    }

    #[test]
    fn witness_correlator_route_matches_magnitude_relation() {
        for i in 0..12 {
            for j in 0..12 {
                let theta = i as f64 * PI / 11.0;
                let phi = j as f64 * PI / 11.0;
                let w = witness(theta, phi);
                let printed = k3_witness(theta, phi);
                let substituted = k3_witness_via_correlators(theta, phi);
                assert!(((printed - 1.0).abs() - w.abs()).abs() <= 1e-15);
                assert!(
                    ((substituted - 1.0).abs() - w.abs()).abs() <= 1e-12,
                    "substituted K3W magnitude off at ({theta}, {phi})"
                );
            }
        }
    }

    #[test]
    fn k_bounds_hold_on_a_coarse_grid() {
        for i in 0..=24 {
            for j in 0..=24 {
                let a = i as f64 * PI / 24.0;
                let b = j as f64 * PI / 24.0;
                let r3 = k3(a, b);
                assert!(r3.k_value <= 2.0 + 1e-9);
                let r4 = k4(a, b);
                assert!(r4.k_value <= 3.0 + 1e-9);
                for c in r3.correlators.values().chain(r4.correlators.values()) {
                    assert!(c.abs() <= 1.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn superposition_joint_example() {
        // A state with amplitudes (-1/sqrt2, 1/sqrt2, 0) measured twice
        // with an identity stage in between: diagonal joint, half/half.
        let v = crate::linalg::ComplexVector::from_vec(vec![
            crate::linalg::cr(-H),
            crate::linalg::cr(H),
            crate::linalg::cr(0.0),
        ]);
        let spec = ProtocolSpec::new(
            QuantumState::Pure(PureState::new(v).unwrap()),
            vec![UnitaryMatrix::identity(3), UnitaryMatrix::identity(3)],
            vec![
                SlotMode::Projective,
                SlotMode::Projective,
                SlotMode::Unmeasured,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        )
        .unwrap();
        let joint = joint_distribution(&spec, 1, 2);
        assert!((joint.probability(0, 0) - 0.5).abs() <= 1e-12);
        assert!((joint.probability(1, 1) - 0.5).abs() <= 1e-12);
        assert!(joint.probability(0, 1).abs() <= 1e-15);
    }

    #[test]
    fn joint_marginals_match_single_time_distributions() {
        let u1 = random_unitary(3, 31);
        let u2 = random_unitary(3, 32);
        let spec = ProtocolSpec::new(
            QuantumState::Mixed(DensityMatrix::maximally_mixed(3)),
            vec![u1.clone(), u2],
            vec![
                SlotMode::Projective,
                SlotMode::Unmeasured,
                SlotMode::Projective,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        )
        .unwrap();
        let joint = joint_distribution(&spec, 1, 3);
        let meas = MeasurementModel::basis(3);
        // Marginal over the later slot equals the slot-1 distribution.
        let direct = outcome_distribution(
            &QuantumState::Mixed(DensityMatrix::maximally_mixed(3)),
            &meas,
        );
        for m in 0..3 {
            assert!((joint.marginal_i()[m] - direct.probability(m)).abs() <= 1e-9);
        }
        let total: f64 = joint.marginal_j().iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn preparation_requires_matching_initial_state() {
        let result = ProtocolSpec::new(
            QuantumState::Pure(PureState::basis(3, 0)),
            k3_stages(0.5, 0.5).to_vec(),
            vec![
                SlotMode::Preparation { outcome: 2 },
                SlotMode::Projective,
                SlotMode::Projective,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        );
        assert!(matches!(result, Err(Error::PreparationMismatch { outcome: 2 })));
    }

    #[test]
    fn unitary_count_is_validated() {
        let result = ProtocolSpec::new(
            QuantumState::Pure(PureState::basis(3, 2)),
            vec![UnitaryMatrix::identity(3)],
            vec![
                SlotMode::Projective,
                SlotMode::Projective,
                SlotMode::Projective,
            ],
            MeasurementModel::basis(3),
            ValueAssignment::new(),
        );
        assert!(matches!(result, Err(Error::WrongUnitaryCount { .. })));
    }
}
