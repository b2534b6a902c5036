//! Command implementations: each builds the metadata entries and typed
//! rows of its output table.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

use lgsim_core::counting::{
    k_with_angle_errors, k_with_counting_noise, AngleErrorModel, CountingConfig, KPoint,
    MonteCarloSummary,
};
use lgsim_core::optimizer::{maximize, OptimizerBudget, SearchSpace};
use lgsim_core::protocol::{closed_form_k4, k3, k4, witness_report};
use rayon::prelude::*;

use crate::grid::{apply_overrides, GridSpec};
use crate::output::Cell;

pub type Metadata = Vec<(String, String)>;
pub type Rows = Vec<Vec<Cell>>;

fn grid_echo(name: &str, spec: &GridSpec) -> (String, String) {
    (format!("grid {name}"), spec.echo())
}

/// Four-time sweep: rows ordered theta3-major, phi3-minor.
pub fn sweep_k4(
    overrides: &[String],
    degrees: bool,
) -> Result<(Metadata, Vec<&'static str>, Rows), String> {
    let mut grids = BTreeMap::from([
        ("phi3", GridSpec::range(0.0, PI, 121)),
        (
            "theta3",
            GridSpec::List(vec![FRAC_PI_6, PI / 3.0, FRAC_PI_2]),
        ),
    ]);
    apply_overrides(&mut grids, overrides, degrees)?;
    let metadata = vec![
        grid_echo("phi3", &grids["phi3"]),
        grid_echo("theta3", &grids["theta3"]),
    ];
    let points: Vec<(f64, f64)> = grids["theta3"]
        .values()
        .into_iter()
        .flat_map(|theta3| {
            grids["phi3"]
                .values()
                .into_iter()
                .map(move |phi3| (theta3, phi3))
        })
        .collect();
    let rows = points
        .par_iter()
        .map(|&(theta3, phi3)| {
            let report = k4(theta3, phi3);
            vec![
                Cell::Num(phi3),
                Cell::Num(theta3),
                Cell::Num(report.correlator(2, 1)),
                Cell::Num(report.correlator(3, 2)),
                Cell::Num(report.correlator(3, 4)),
                Cell::Num(report.correlator(4, 1)),
                Cell::Num(report.k_value),
                Cell::Num(closed_form_k4(theta3, phi3)),
            ]
        })
        .collect();
    Ok((
        metadata,
        vec![
            "phi3",
            "theta3",
            "c21",
            "c32",
            "c34",
            "c41",
            "k4",
            "k4_closed_form",
        ],
        rows,
    ))
}

/// Three-time sweep: rows ordered theta-major, phi-minor.
pub fn sweep_k3(
    overrides: &[String],
    degrees: bool,
) -> Result<(Metadata, Vec<&'static str>, Rows), String> {
    let (metadata, points) = theta_phi_grid(overrides, degrees)?;
    let rows = points
        .par_iter()
        .map(|&(theta, phi)| {
            let report = k3(theta, phi);
            vec![
                Cell::Num(theta),
                Cell::Num(phi),
                Cell::Num(report.correlator(2, 1)),
                Cell::Num(report.correlator(3, 2)),
                Cell::Num(report.correlator(3, 1)),
                Cell::Num(report.k_value),
            ]
        })
        .collect();
    Ok((
        metadata,
        vec!["theta", "phi", "c21", "c32", "c31", "k3"],
        rows,
    ))
}

/// Witness sweep over the same (theta, phi) grid as the three-time case.
pub fn sweep_witness(
    overrides: &[String],
    degrees: bool,
) -> Result<(Metadata, Vec<&'static str>, Rows), String> {
    let (metadata, points) = theta_phi_grid(overrides, degrees)?;
    let rows = points
        .par_iter()
        .map(|&(theta, phi)| {
            let report = witness_report(theta, phi);
            vec![
                Cell::Num(theta),
                Cell::Num(phi),
                Cell::Num(report.p_no_measurement),
                Cell::Num(report.p_with_measurement),
                Cell::Num(report.witness),
                Cell::Num(report.k3_witness),
            ]
        })
        .collect();
    Ok((
        metadata,
        vec!["theta", "phi", "p3_no_meas", "p3_with_meas", "w", "k3w"],
        rows,
    ))
}

fn theta_phi_grid(
    overrides: &[String],
    degrees: bool,
) -> Result<(Metadata, Vec<(f64, f64)>), String> {
    let mut grids = BTreeMap::from([
        ("theta", GridSpec::range(0.0, PI, 121)),
        ("phi", GridSpec::range(0.0, PI, 121)),
    ]);
    apply_overrides(&mut grids, overrides, degrees)?;
    let metadata = vec![
        grid_echo("theta", &grids["theta"]),
        grid_echo("phi", &grids["phi"]),
    ];
    let points = grids["theta"]
        .values()
        .into_iter()
        .flat_map(|theta| {
            grids["phi"]
                .values()
                .into_iter()
                .map(move |phi| (theta, phi))
        })
        .collect();
    Ok((metadata, points))
}

pub fn parse_budget(text: &str) -> Result<OptimizerBudget, String> {
    let (restarts, iterations) = text
        .split_once(':')
        .ok_or_else(|| format!("budget `{text}` is not RESTARTS:ITERATIONS"))?;
    let restarts: usize = restarts
        .parse()
        .map_err(|_| format!("restart count `{restarts}` is not a positive integer"))?;
    let iterations: usize = iterations
        .parse()
        .map_err(|_| format!("iteration cap `{iterations}` is not a positive integer"))?;
    OptimizerBudget::new(restarts, iterations).map_err(|e| e.to_string())
}

fn labeling_text(values: impl Iterator<Item = f64>) -> String {
    values.map(|q| if q > 0.0 { '+' } else { '-' }).collect()
}

pub fn optimize(
    levels: usize,
    times: usize,
    constrained: bool,
    budget: OptimizerBudget,
    seed: u64,
) -> Result<(Metadata, Vec<&'static str>, Rows), String> {
    let space = SearchSpace::new(levels, times, constrained)
        .map_err(|e| e.to_string())?
        .with_budget(budget)
        .with_seed(seed);
    let result = maximize(&space);
    let metadata = vec![(
        "budget".to_string(),
        format!("{}:{}", budget.restarts, budget.iterations),
    )];
    let slot1 = labeling_text(
        (0..levels).map(|outcome| result.assignment.value(1, outcome).expect("slot 1 covered")),
    );
    let shared = labeling_text(result.pattern.iter().copied());
    let row = vec![
        Cell::Int(levels as u64),
        Cell::Int(times as u64),
        Cell::Bool(constrained),
        Cell::Num(result.best_k),
        Cell::Bool(result.verified),
        Cell::Text(slot1),
        Cell::Text(shared),
    ];
    Ok((
        metadata,
        vec![
            "levels",
            "times",
            "constrained",
            "best_k",
            "verified",
            "slot1_labeling",
            "shared_labeling",
        ],
        vec![row],
    ))
}

/// Error-model summaries at the two protocol maxima: counting noise and
/// wave-plate angle noise, one metric per row.
pub fn noise(
    counts: f64,
    repeats: usize,
    plate_sigma: f64,
    plates: Option<usize>,
    seed: u64,
) -> Result<(Metadata, Vec<&'static str>, Rows), String> {
    let k4_point = KPoint::K4 {
        theta3: FRAC_PI_2,
        phi3: FRAC_PI_4,
    };
    let k3_point = KPoint::K3 {
        theta: FRAC_PI_4,
        phi: FRAC_PI_2,
    };
    let config = CountingConfig::new(counts, repeats, seed).map_err(|e| e.to_string())?;
    let mut model = AngleErrorModel::new(plate_sigma).map_err(|e| e.to_string())?;
    if let Some(n) = plates {
        model = model.with_plates_per_unitary(n).map_err(|e| e.to_string())?;
    }

    let metadata = vec![
        ("counts".to_string(), counts.to_string()),
        ("repeats".to_string(), repeats.to_string()),
        ("plate_sigma_degrees".to_string(), plate_sigma.to_string()),
        (
            "plates_per_unitary".to_string(),
            plates.map_or("rotation count".to_string(), |n| n.to_string()),
        ),
    ];

    let k4_counting = k_with_counting_noise(&k4_point, &config);
    let k3_counting = k_with_counting_noise(&k3_point, &config);
    let k4_angle = k_with_angle_errors(&k4_point, &model, repeats, seed);
    let k3_angle = k_with_angle_errors(&k3_point, &model, repeats, seed);

    let row = |metric: &str, summary: &MonteCarloSummary| {
        vec![
            Cell::Text(metric.to_string()),
            Cell::Num(summary.mean),
            Cell::Num(summary.std),
            Cell::Int(summary.samples as u64),
        ]
    };
    let rows = vec![
        row("k4_counting", &k4_counting),
        row("k3_counting", &k3_counting),
        row("k4_angle", &k4_angle.k),
        row("c41_angle", &k4_angle.c_final),
        row("k3_angle", &k3_angle.k),
        row("c31_angle", &k3_angle.c_final),
    ];
    Ok((metadata, vec!["metric", "mean", "std", "samples"], rows))
}
