//! Derivative-free maximization of the K combinations over evolution
//! unitaries, dichotomic outcome labelings, and (optionally) preparation
//! states, for N-level systems measured in a fixed basis.
//!
//! Unitaries are parameterized as `exp(iH)` with `H` Hermitian assembled
//! from an unconstrained real vector, so the simplex search never leaves
//! the manifold. Labelings are searched exhaustively: one shared by the
//! later slots, and in unconstrained mode an independent one for slot 1
//! (constrained mode dictates +1 there instead). The continuous
//! parameters per labeling combination by multi-start Nelder-Mead.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Error;
use crate::linalg::{c, cr, exp_i_hermitian, ComplexMatrix, ComplexVector, UnitaryMatrix};
use crate::measurement::{MeasurementModel, ValueAssignment};
use crate::protocol::{k_report, CorrelatorReport, KCombination};
use crate::rng::derive_stream;
use crate::state::{PureState, QuantumState};

const LANE_OPTIMIZER: u64 = 4;

/// A reported optimum must reproduce through a fresh protocol evaluation
/// within this tolerance.
pub const VERIFICATION_TOL: f64 = 1e-9;
const SIMPLEX_DIAMETER_TOL: f64 = 1e-8;
const SIMPLEX_SPREAD_TOL: f64 = 1e-10;
const INITIAL_STEP: f64 = 0.35;
const POLISH_STEP: f64 = 1e-3;

/// Restart count and per-restart iteration cap of the local search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimizerBudget {
    pub restarts: usize,
    pub iterations: usize,
}

impl OptimizerBudget {
    pub fn new(restarts: usize, iterations: usize) -> Result<Self, Error> {
        if restarts < 1 || iterations < 1 {
            return Err(Error::InvalidConfig {
                reason: format!("budget must be at least 1x1, got {restarts}x{iterations}"),
            });
        }
        Ok(Self {
            restarts,
            iterations,
        })
    }
}

impl Default for OptimizerBudget {
    /// Generous for up to three stage unitaries of up to 16 parameters.
    fn default() -> Self {
        Self {
            restarts: 64,
            iterations: 2000,
        }
    }
}

/// The maximization problem: system size, number of time slots, and
/// whether the first slot coincides with state preparation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    n_levels: usize,
    n_times: usize,
    constrained: bool,
    budget: OptimizerBudget,
    seed: u64,
    target: Option<f64>,
}

impl SearchSpace {
    pub fn new(n_levels: usize, n_times: usize, constrained: bool) -> Result<Self, Error> {
        if n_levels < 2 {
            return Err(Error::InvalidConfig {
                reason: format!("need at least two levels, got {n_levels}"),
            });
        }
        if n_times != 3 && n_times != 4 {
            return Err(Error::InvalidConfig {
                reason: format!("n_times must be 3 or 4, got {n_times}"),
            });
        }
        Ok(Self {
            n_levels,
            n_times,
            constrained,
            budget: OptimizerBudget::default(),
            seed: 0,
            target: None,
        })
    }

    pub fn with_budget(mut self, budget: OptimizerBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// A known optimum; the result flags when the search stays below it.
    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// The measurement resolves every level: M = N.
    pub fn n_outcomes(&self) -> usize {
        self.n_levels
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn constrained(&self) -> bool {
        self.constrained
    }

    pub fn budget(&self) -> OptimizerBudget {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn target(&self) -> Option<f64> {
        self.target
    }

    pub fn combination(&self) -> KCombination {
        match self.n_times {
            3 => KCombination::K3,
            _ => KCombination::K4,
        }
    }

    pub fn n_stages(&self) -> usize {
        self.n_times - 1
    }

    /// Parameter vector length: N^2 reals per stage unitary, plus
    /// 2(N - 1) preparation parameters in unconstrained mode.
    pub fn param_len(&self) -> usize {
        let prep = if self.constrained {
            0
        } else {
            2 * (self.n_levels - 1)
        };
        self.n_stages() * self.n_levels * self.n_levels + prep
    }
}

/// Outcome of a [`maximize`] run.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_k: f64,
    /// The flattened parameter vector at the optimum; decode with
    /// [`evaluate`].
    pub parameters: Vec<f64>,
    /// The winning dichotomic labeling, one value per outcome, shared by
    /// slots 2..n_times.
    pub pattern: Vec<f64>,
    /// The winning slot-1 labeling, searched independently of `pattern`
    /// in unconstrained mode; `None` when the slot is the dictated +1.
    pub first_pattern: Option<Vec<f64>>,
    /// The slot-keyed form of the labelings actually used by the
    /// protocol.
    pub assignment: ValueAssignment,
    /// The optimized preparation (unconstrained mode only; constrained
    /// mode pins the preparation to the highest basis state).
    pub prep_state: Option<PureState>,
    /// Best value of each restart, flattened over labelings in
    /// enumeration order.
    pub trace: Vec<f64>,
    /// Whether a fresh evaluation of `parameters` reproduced `best_k`
    /// within [`VERIFICATION_TOL`].
    pub verified: bool,
    /// Whether a declared target remained unreached within the budget.
    pub below_target: bool,
}

/// All non-constant dichotomic labelings of `n_outcomes` outcomes, in a
/// fixed enumeration order. Sign-flipped pairs are both present: against
/// a dictated +1 at slot 1 they are inequivalent, and no silent
/// reduction is applied elsewhere either.
pub fn enumerate_assignments(n_outcomes: usize) -> Vec<Vec<f64>> {
    assert!((2..=20).contains(&n_outcomes), "assignment enumeration is exponential in outcomes");
    (1..(1u64 << n_outcomes) - 1)
        .map(|bits| {
            (0..n_outcomes)
                .map(|k| if bits >> k & 1 == 1 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

/// The slot-keyed assignment for a labeling choice: slot 1 is the
/// dictated +1 in constrained mode and otherwise `first` (falling back
/// to the shared labeling); slots 2..n carry the shared labeling.
pub fn slot_assignment(
    space: &SearchSpace,
    first: Option<&[f64]>,
    shared: &[f64],
) -> ValueAssignment {
    let m = space.n_outcomes();
    assert_eq!(shared.len(), m, "labeling length must match outcome count");
    let first = if space.constrained {
        vec![1.0; m]
    } else {
        first.unwrap_or(shared).to_vec()
    };
    let mut assignment = ValueAssignment::new()
        .with_slot(1, first)
        .expect("labelings are validated +/-1 patterns");
    for slot in 2..=space.n_times {
        assignment = assignment
            .with_slot(slot, shared.to_vec())
            .expect("labelings are validated +/-1 patterns");
    }
    assignment
}

/// Hermitian generator from `n^2` reals: the first `n` fill the diagonal,
/// the rest fill the upper triangle row-major as (re, im) pairs.
fn hermitian_from_params(n: usize, v: &[f64]) -> ComplexMatrix {
    debug_assert_eq!(v.len(), n * n);
    let mut h = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        h[(k, k)] = cr(v[k]);
    }
    let mut t = n;
    for i in 0..n {
        for j in i + 1..n {
            h[(i, j)] = c(v[t], v[t + 1]);
            h[(j, i)] = c(v[t], -v[t + 1]);
            t += 2;
        }
    }
    h
}

/// Pure state from `2(n-1)` reals: hyperspherical magnitude angles
/// followed by the phases of components 1..n-1 (component 0 is real,
/// fixing the global phase). Normalized by construction.
fn prep_from_params(n: usize, v: &[f64]) -> PureState {
    debug_assert_eq!(v.len(), 2 * (n - 1));
    let (angles, phases) = v.split_at(n - 1);
    let mut amplitudes = Vec::with_capacity(n);
    let mut radial = 1.0;
    for k in 0..n - 1 {
        let (s, cos_k) = angles[k].sin_cos();
        let phase = if k == 0 { 0.0 } else { phases[k - 1] };
        amplitudes.push(c(phase.cos(), phase.sin()) * cr(radial * cos_k));
        radial *= s;
    }
    let last_phase = phases[n - 2];
    amplitudes.push(c(last_phase.cos(), last_phase.sin()) * cr(radial));
    PureState::new(ComplexVector::from_vec(amplitudes))
        .expect("hyperspherical amplitudes are normalized")
}

fn decode(
    space: &SearchSpace,
    params: &[f64],
) -> (QuantumState, Vec<UnitaryMatrix>, Option<usize>) {
    let n = space.n_levels;
    let per_stage = n * n;
    let stages: Vec<UnitaryMatrix> = (0..space.n_stages())
        .map(|s| exp_i_hermitian(&hermitian_from_params(n, &params[s * per_stage..(s + 1) * per_stage])))
        .collect();
    if space.constrained {
        (
            QuantumState::Pure(PureState::basis(n, n - 1)),
            stages,
            Some(n - 1),
        )
    } else {
        (
            QuantumState::Pure(prep_from_params(n, &params[space.n_stages() * per_stage..])),
            stages,
            None,
        )
    }
}

/// Full protocol evaluation of a parameter vector under a slot-keyed
/// assignment; build one with [`slot_assignment`].
pub fn evaluate(
    space: &SearchSpace,
    assignment: &ValueAssignment,
    params: &[f64],
) -> Result<CorrelatorReport, Error> {
    if params.len() != space.param_len() {
        return Err(Error::WrongParameterLength {
            expected: space.param_len(),
            got: params.len(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFiniteEntries);
    }
    for slot in 1..=space.n_times {
        if !assignment.covers(slot) {
            return Err(Error::MissingAssignmentSlot { slot });
        }
    }
    let meas = MeasurementModel::basis(space.n_levels);
    let (initial, stages, prep_outcome) = decode(space, params);
    Ok(k_report(
        &initial,
        &stages,
        prep_outcome,
        &meas,
        assignment,
        space.combination(),
    ))
}

/// The K value of a parameter vector under an assignment; the quantity
/// [`maximize`] searches over.
pub fn objective(
    space: &SearchSpace,
    assignment: &ValueAssignment,
    params: &[f64],
) -> Result<f64, Error> {
    evaluate(space, assignment, params).map(|report| report.k_value)
}

struct Candidate {
    k: f64,
    params: Vec<f64>,
    first: Option<Vec<f64>>,
    pattern: Vec<f64>,
}

/// Exhaustive search over labeling combinations (slot-1 labeling when
/// unconstrained, times the shared later-slot labeling) combined with
/// multi-start Nelder-Mead over the continuous parameters.
///
/// Deterministic for a fixed seed: every (combination, restart) cell
/// owns a derived stream, the last restart of each combination polishes
/// that combination's incumbent, and ties keep the earliest cell.
pub fn maximize(space: &SearchSpace) -> OptimizationResult {
    let patterns = enumerate_assignments(space.n_outcomes());
    let firsts: Vec<Option<&Vec<f64>>> = if space.constrained {
        vec![None]
    } else {
        patterns.iter().map(Some).collect()
    };
    let budget = space.budget;
    let dim = space.param_len();
    let meas = MeasurementModel::basis(space.n_levels);
    let mut trace = Vec::with_capacity(firsts.len() * patterns.len() * budget.restarts);
    let mut best: Option<Candidate> = None;

    for (f_idx, first) in firsts.iter().enumerate() {
        for (p_idx, pattern) in patterns.iter().enumerate() {
            let combo = f_idx * patterns.len() + p_idx;
            let assignment = slot_assignment(space, first.map(|f| f.as_slice()), pattern);
            let cost = |x: &[f64]| {
                let (initial, stages, prep_outcome) = decode(space, x);
                -k_report(
                    &initial,
                    &stages,
                    prep_outcome,
                    &meas,
                    &assignment,
                    space.combination(),
                )
                .k_value
            };
            let mut incumbent: Option<(f64, Vec<f64>)> = None;
            for restart in 0..budget.restarts {
                let mut rng = derive_stream(
                    space.seed,
                    LANE_OPTIMIZER,
                    (combo * budget.restarts + restart) as u64,
                );
                let polish = restart + 1 == budget.restarts && budget.restarts > 1;
                let (x0, step) = match (&incumbent, polish) {
                    (Some((_, x)), true) => (x.clone(), POLISH_STEP),
                    _ => (
                        (0..dim).map(|_| rng.random_range(-PI..PI)).collect(),
                        INITIAL_STEP,
                    ),
                };
                let (x, neg_k) = nelder_mead(&cost, x0, step, budget.iterations);
                let k = -neg_k;
                trace.push(k);
                if incumbent.as_ref().map_or(true, |(ik, _)| k > *ik) {
                    incumbent = Some((k, x.clone()));
                }
                if best.as_ref().map_or(true, |b| k > b.k) {
                    best = Some(Candidate {
                        k,
                        params: x,
                        first: first.map(|f| f.to_vec()),
                        pattern: pattern.clone(),
                    });
                }
            }
        }
    }

    let best = best.expect("budget guarantees at least one restart");
    let assignment = slot_assignment(space, best.first.as_deref(), &best.pattern);
    let report =
        evaluate(space, &assignment, &best.params).expect("winning parameters decode by construction");
    let verified = (report.k_value - best.k).abs() <= VERIFICATION_TOL;
    let below_target = space.target.is_some_and(|t| best.k < t - VERIFICATION_TOL);
    let prep_state = (!space.constrained).then(|| {
        let n = space.n_levels;
        prep_from_params(n, &best.params[space.n_stages() * n * n..])
    });
    OptimizationResult {
        best_k: best.k,
        parameters: best.params,
        assignment,
        pattern: best.pattern,
        first_pattern: best.first,
        prep_state,
        trace,
        verified,
        below_target,
    }
}

/// Standard Nelder-Mead minimization (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2). Stops on the iteration cap, a simplex
/// diameter below 1e-8, or a value spread below 1e-10.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    cost: &F,
    x0: Vec<f64>,
    step: f64,
    max_iterations: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = cost(&x0);
    simplex.push((x0.clone(), f0));
    for k in 0..dim {
        let mut x = x0.clone();
        x[k] += step;
        let f = cost(&x);
        simplex.push((x, f));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("objective values are finite"));
    };
    order(&mut simplex);

    for _ in 0..max_iterations {
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = simplex[dim].1 - simplex[0].1;
        if diameter < SIMPLEX_DIAMETER_TOL || spread < SIMPLEX_SPREAD_TOL {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let blend = |a: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(&cv, &wv)| cv + a * (cv - wv))
                .collect()
        };

        let reflected = blend(1.0);
        let f_reflected = cost(&reflected);
        if f_reflected < simplex[0].1 {
            let expanded = blend(2.0);
            let f_expanded = cost(&expanded);
            simplex[dim] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
        } else if f_reflected < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_reflected);
        } else {
            let (contracted, f_contracted) = if f_reflected < worst.1 {
                let x = blend(0.5);
                let f = cost(&x);
                (x, f)
            } else {
                let x = blend(-0.5);
                let f = cost(&x);
                (x, f)
            };
            if f_contracted < worst.1.min(f_reflected) {
                simplex[dim] = (contracted, f_contracted);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for (xv, av) in vertex.0.iter_mut().zip(&anchor) {
                        *xv = av + 0.5 * (*xv - av);
                    }
                    vertex.1 = cost(&vertex.0);
                }
            }
        }
        order(&mut simplex);
    }
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::k4_stages;
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn assignment_enumeration_is_exhaustive_and_ordered() {
        assert_eq!(
            enumerate_assignments(2),
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]]
        );
        let three = enumerate_assignments(3);
        assert_eq!(three.len(), 6);
        assert!(three.contains(&vec![1.0, 1.0, -1.0]));
        assert!(three
            .iter()
            .all(|p| p.iter().any(|&q| q > 0.0) && p.iter().any(|&q| q < 0.0)));
    }

    #[test]
    fn zero_parameters_give_the_identity_protocol() {
        let space = SearchSpace::new(3, 3, true).unwrap();
        let params = vec![0.0; space.param_len()];
        let assignment = slot_assignment(&space, None, &[1.0, 1.0, -1.0]);
        let k = objective(&space, &assignment, &params).unwrap();
        assert!((k - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn wrong_parameter_length_is_reported() {
        let space = SearchSpace::new(3, 4, true).unwrap();
        let assignment = slot_assignment(&space, None, &[1.0, 1.0, -1.0]);
        assert!(matches!(
            objective(&space, &assignment, &[0.0; 5]),
            Err(Error::WrongParameterLength { expected: 27, got: 5 })
        ));
        assert!(matches!(
            objective(&space, &assignment, &vec![f64::NAN; 27]),
            Err(Error::NonFiniteEntries)
        ));
        let short = ValueAssignment::shared(&[1, 2, 3], &[1.0, 1.0, -1.0]).unwrap();
        assert!(matches!(
            objective(&space, &short, &[0.0; 27]),
            Err(Error::MissingAssignmentSlot { slot: 4 })
        ));
    }

    #[test]
    fn global_phase_on_a_stage_does_not_move_the_objective() {
        let space = SearchSpace::new(3, 3, true).unwrap();
        let assignment = slot_assignment(&space, None, &[1.0, -1.0, -1.0]);
        let mut rng = derive_stream(5, 99, 0);
        let params: Vec<f64> = (0..space.param_len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let base = objective(&space, &assignment, &params).unwrap();
        let mut shifted = params.clone();
        for k in 0..3 {
            shifted[k] += 0.7;
        }
        let moved = objective(&space, &assignment, &shifted).unwrap();
        assert!((base - moved).abs() <= 1e-12);
    }

    /// Generator parameters whose `exp(iH)` reproduces a given real
    /// special-orthogonal 3x3 stage, via the axis-angle logarithm.
    fn so3_params(u: &UnitaryMatrix) -> Vec<f64> {
        let r = DMatrix::<f64>::from_fn(3, 3, |i, j| u.matrix()[(i, j)].re);
        let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        let axis = if angle < 1e-12 {
            [0.0; 3]
        } else if PI - angle < 1e-6 {
            // R = exp(pi K): axis magnitudes from the diagonal of
            // (R + I)/2, signs fixed against the largest component.
            let b = |i: usize, j: usize| (r[(i, j)] + if i == j { 1.0 } else { 0.0 }) / 2.0;
            let mags = [b(0, 0).max(0.0).sqrt(), b(1, 1).max(0.0).sqrt(), b(2, 2).max(0.0).sqrt()];
            let lead = (0..3).max_by(|&a, &b2| mags[a].total_cmp(&mags[b2])).unwrap();
            let mut axis = [0.0; 3];
            for k in 0..3 {
                axis[k] = if k == lead { mags[lead] } else { b(lead, k) / mags[lead] };
            }
            axis
        } else {
            let s = 2.0 * angle.sin();
            [
                (r[(2, 1)] - r[(1, 2)]) / s,
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(1, 0)] - r[(0, 1)]) / s,
            ]
        };
        // A = angle * skew(axis); H = -iA; parameter layout stores im
        // parts of the upper triangle, so im(H[i][j]) = -A[i][j].
        let a01 = -angle * axis[2];
        let a02 = angle * axis[1];
        let a12 = -angle * axis[0];
        let params = vec![0.0, 0.0, 0.0, 0.0, -a01, 0.0, -a02, 0.0, -a12];
        let rebuilt = exp_i_hermitian(&hermitian_from_params(3, &params));
        assert!(
            (rebuilt.matrix() - u.matrix()).norm() <= 1e-9,
            "axis-angle logarithm drifted"
        );
        params
    }

    #[test]
    fn objective_reproduces_the_protocol_maximum() {
        let space = SearchSpace::new(3, 4, true).unwrap();
        let params: Vec<f64> = k4_stages(FRAC_PI_2, FRAC_PI_4)
            .iter()
            .flat_map(|u| so3_params(u))
            .collect();
        let assignment = slot_assignment(&space, None, &[1.0, 1.0, -1.0]);
        let k = objective(&space, &assignment, &params).unwrap();
        assert!((k - 3.0).abs() <= 1e-9, "objective gave {k}");
    }

    #[test]
    fn prep_parameterization_is_normalized_and_covers_basis_states() {
        let state = prep_from_params(3, &[0.0, 0.0, 0.0, 0.0]);
        assert!((state.amplitudes()[0].re - 1.0).abs() <= 1e-12);
        let state = prep_from_params(3, &[FRAC_PI_2, FRAC_PI_2, 0.0, 0.0]);
        assert!((state.amplitudes()[2].re - 1.0).abs() <= 1e-12);
        let mut rng = derive_stream(8, 98, 1);
        for _ in 0..50 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-PI..PI)).collect();
            let state = prep_from_params(3, &v);
            let norm: f64 = state.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_level_search_reaches_the_dichotomic_bound() {
        let space = SearchSpace::new(2, 3, true)
            .unwrap()
            .with_budget(OptimizerBudget::new(12, 600).unwrap())
            .with_seed(1)
            .with_target(1.5);
        let result = maximize(&space);
        assert!(
            (result.best_k - 1.5).abs() <= 1e-4,
            "best {}",
            result.best_k
        );
        assert!(result.verified);
        assert!(!result.below_target);
        assert_eq!(result.trace.len(), 2 * 12);
        assert!(result.prep_state.is_none());
    }

    #[test]
    fn maximize_is_deterministic_per_seed() {
        let budget = OptimizerBudget::new(4, 200).unwrap();
        let space = SearchSpace::new(2, 3, false)
            .unwrap()
            .with_budget(budget)
            .with_seed(9);
        let a = maximize(&space);
        let b = maximize(&space);
        assert_eq!(a.best_k, b.best_k);
        assert_eq!(a.parameters, b.parameters);
        assert_eq!(a.pattern, b.pattern);
        assert_eq!(a.first_pattern, b.first_pattern);
        assert!(a.prep_state.is_some());
    }

    #[test]
    fn slot_one_labeling_is_searched_independently() {
        let budget = OptimizerBudget::new(2, 80).unwrap();
        let space = SearchSpace::new(2, 3, false).unwrap().with_budget(budget);
        let result = maximize(&space);
        // Unconstrained: 2 slot-1 labelings x 2 shared labelings.
        assert_eq!(result.trace.len(), 4 * 2);
        let first = result.first_pattern.as_ref().expect("unconstrained slot 1");
        for outcome in 0..2 {
            assert_eq!(result.assignment.value(1, outcome).unwrap(), first[outcome]);
            assert_eq!(
                result.assignment.value(2, outcome).unwrap(),
                result.pattern[outcome]
            );
        }

        let constrained = SearchSpace::new(2, 3, true).unwrap().with_budget(budget);
        let result = maximize(&constrained);
        assert_eq!(result.trace.len(), 2 * 2);
        assert!(result.first_pattern.is_none());
        for outcome in 0..2 {
            assert_eq!(result.assignment.value(1, outcome).unwrap(), 1.0);
        }
    }

    #[test]
    fn unreachable_target_is_flagged() {
        let space = SearchSpace::new(2, 3, true)
            .unwrap()
            .with_budget(OptimizerBudget::new(2, 100).unwrap())
            .with_target(10.0);
        let result = maximize(&space);
        assert!(result.below_target);
        assert!(result.best_k < 10.0);
    }

    #[test]
    fn search_space_validation() {
        assert!(SearchSpace::new(1, 3, true).is_err());
        assert!(SearchSpace::new(3, 5, true).is_err());
        assert!(OptimizerBudget::new(0, 100).is_err());
        assert!(OptimizerBudget::new(100, 0).is_err());
    }
}
