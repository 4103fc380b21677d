//! Error norms, invariant drift traces, convergence-order estimation, and the
//! timing harness.
//!
//! Norms follow the discrete L² convention over the interval endpoints,
//! L²(H) = (Δt Σ_{i≥1} [H(t_i) − H(0)]²)^{1/2} and
//! L²(u) = (Δt Σ_{i≥1} ‖u_i − u_ref(t_i)‖²)^{1/2},
//! and orders are log₂ of the error ratio under step halving.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::cdc::{cdc_integrate, CdcConfig};
use crate::error::{Error, Result};
use crate::integrators::{integrate_fixed_sampled, reference_solve, NewtonConfig};
use crate::models::{InvariantObservable, ModelBundle};
use crate::quadratic::State;
use crate::trajectory::Trajectory;

/// Relative slack when checking trajectory spacings against a nominal dt.
const SPACING_REL_TOL: f64 = 1e-9;

/// Drift H(u(t_i)) − H(u(t_0)) along a trajectory; the first entry is zero.
pub fn invariant_trace(traj: &Trajectory, obs: &InvariantObservable) -> Result<Vec<f64>> {
    let first = traj
        .first()
        .ok_or_else(|| Error::GridMismatch("empty trajectory".into()))?;
    let h0 = obs.eval(&first.u)?;
    traj.states().map(|u| Ok(obs.eval(u)? - h0)).collect()
}

fn check_spacing(traj: &Trajectory, dt: f64) -> Result<()> {
    if traj.len() < 2 {
        return Err(Error::GridMismatch(
            "trajectory must hold at least two records".into(),
        ));
    }
    let times: Vec<f64> = traj.times().collect();
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > SPACING_REL_TOL * dt {
            return Err(Error::GridMismatch(format!(
                "record spacing {} does not match dt = {dt}",
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}

/// L²(H) drift norm of an invariant along a trajectory sampled at spacing dt.
pub fn l2_invariant_error(traj: &Trajectory, obs: &InvariantObservable, dt: f64) -> Result<f64> {
    check_spacing(traj, dt)?;
    let trace = invariant_trace(traj, obs)?;
    let sum: f64 = trace.iter().skip(1).map(|d| d * d).sum();
    Ok((dt * sum).sqrt())
}

/// L²(u) solution-error norm against a reference trajectory on the same grid.
pub fn l2_solution_error(traj: &Trajectory, reference: &Trajectory, dt: f64) -> Result<f64> {
    check_spacing(traj, dt)?;
    if traj.len() != reference.len() {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} records, reference has {}",
            traj.len(),
            reference.len()
        )));
    }
    for (a, b) in traj.times().zip(reference.times()) {
        if (a - b).abs() > SPACING_REL_TOL * dt.max(a.abs()) {
            return Err(Error::GridMismatch(format!(
                "time grids differ: {a} vs {b}"
            )));
        }
    }
    let sum: f64 = traj
        .states()
        .zip(reference.states())
        .skip(1)
        .map(|(u, r)| (u - r).norm_squared())
        .sum();
    Ok((dt * sum).sqrt())
}

/// Convergence order log₂(err_coarse / err_fine) for a halved step.
pub fn convergence_order(err_coarse: f64, err_fine: f64) -> Result<f64> {
    for value in [err_coarse, err_fine] {
        if !(value > 0.0) {
            return Err(Error::NonPositiveError { value });
        }
    }
    Ok((err_coarse / err_fine).log2())
}

/// One (S, n) configuration of a convergence study, with its coarsest step.
#[derive(Clone, Copy, Debug)]
pub struct StudyCell {
    pub corrections: usize,
    pub nodes: usize,
    pub dt0: f64,
}

/// Study controls shared by all cells.
#[derive(Clone, Debug)]
pub struct StudyOptions {
    /// Final time of every run.
    pub t_end: f64,
    /// Stop refining once L²(u) falls to this level.
    pub target: f64,
    /// Tolerance of the reference solver.
    pub reference_tol: f64,
    /// Cap on the number of halvings per cell.
    pub max_levels: usize,
    /// Errors shrinking by less than this factor count as round-off saturation.
    pub saturation_factor: f64,
    pub newton: NewtonConfig,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            target: 1e-10,
            reference_tol: 1e-13,
            max_levels: 8,
            saturation_factor: 1.2,
            newton: NewtonConfig::default(),
        }
    }
}

/// Errors and timing of one run of a study cell.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub l2_u: f64,
    pub l2_h1: f64,
    pub l2_h2: f64,
    pub wall: Duration,
}

/// Orders between two adjacent rows, one per error column.
#[derive(Clone, Copy, Debug)]
pub struct OrderRow {
    pub u: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Per-cell study result: dt-halving rows and the orders between them.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub cell: StudyCell,
    pub rows: Vec<ConvergenceRow>,
    /// orders[i] relates rows[i] and rows[i+1].
    pub orders: Vec<OrderRow>,
    /// Wall-time ratio against the uncorrected baseline, when benchmarked.
    pub speedup: Option<f64>,
    saturation_factor: f64,
}

impl ConvergenceReport {
    /// The order of the finest halving pair still above the round-off floor
    /// for the given column, i.e. whose errors shrank by at least the
    /// saturation factor.
    pub fn measured_order(&self, column: ErrorColumn) -> Option<f64> {
        self.rows
            .windows(2)
            .zip(&self.orders)
            .rev()
            .find(|(pair, _)| {
                let (coarse, fine) = (column.of(&pair[0]), column.of(&pair[1]));
                fine > 0.0 && coarse / fine >= self.saturation_factor
            })
            .map(|(_, order)| column.of_order(order))
    }
}

/// Selects one of the three error columns of a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorColumn {
    Solution,
    H1,
    H2,
}

impl ErrorColumn {
    fn of(&self, row: &ConvergenceRow) -> f64 {
        match self {
            ErrorColumn::Solution => row.l2_u,
            ErrorColumn::H1 => row.l2_h1,
            ErrorColumn::H2 => row.l2_h2,
        }
    }

    fn of_order(&self, order: &OrderRow) -> f64 {
        match self {
            ErrorColumn::Solution => order.u,
            ErrorColumn::H1 => order.h1,
            ErrorColumn::H2 => order.h2,
        }
    }
}

/// Runs a dt-halving study for every cell. Cells run in parallel on the
/// current rayon pool; each cell is sequential.
///
/// The coarsest step of a cell is snapped to t_end / round(t_end / dt0) so
/// that every level has an integer interval count, and halving then doubles
/// the count exactly. Every cell runs at least two levels (an order needs a
/// pair) and stops once L²(u) reaches the target or saturates.
pub fn convergence_study(
    model: &ModelBundle,
    u0: &State,
    cells: &[StudyCell],
    opts: &StudyOptions,
) -> Result<Vec<ConvergenceReport>> {
    cells
        .par_iter()
        .map(|cell| {
            run_cell(model, u0, cell, opts).map_err(|e| Error::CellFailed {
                corrections: cell.corrections,
                nodes: cell.nodes,
                dt0: cell.dt0,
                source: Box::new(e),
            })
        })
        .collect()
}

fn run_cell(
    model: &ModelBundle,
    u0: &State,
    cell: &StudyCell,
    opts: &StudyOptions,
) -> Result<ConvergenceReport> {
    if !(cell.dt0 > 0.0) || !(opts.t_end > 0.0) {
        return Err(Error::Config(format!(
            "study cell needs positive dt0 and t_end, got {} and {}",
            cell.dt0, opts.t_end
        )));
    }
    let j0 = (opts.t_end / cell.dt0).round().max(1.0) as usize;
    let mut intervals = j0;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut orders: Vec<OrderRow> = Vec::new();

    loop {
        let dt = opts.t_end / intervals as f64;
        let cfg = CdcConfig {
            dt,
            t_end: opts.t_end,
            corrections: cell.corrections,
            nodes_per_interval: cell.nodes,
            newton: opts.newton,
        };
        let started = Instant::now();
        let traj = cdc_integrate(&model.system, u0, &cfg)?;
        let wall = started.elapsed();
        let times: Vec<f64> = traj.times().collect();
        let reference = reference_solve(&model.system, u0, &times, opts.reference_tol)?;
        let row = ConvergenceRow {
            dt,
            l2_u: l2_solution_error(&traj, &reference, dt)?,
            l2_h1: l2_invariant_error(&traj, &model.h1, dt)?,
            l2_h2: l2_invariant_error(&traj, &model.h2, dt)?,
            wall,
        };
        if let Some(prev) = rows.last() {
            orders.push(OrderRow {
                u: convergence_order(prev.l2_u, row.l2_u).unwrap_or(f64::NAN),
                h1: convergence_order(prev.l2_h1, row.l2_h1).unwrap_or(f64::NAN),
                h2: convergence_order(prev.l2_h2, row.l2_h2).unwrap_or(f64::NAN),
            });
        }
        rows.push(row);

        if rows.len() >= 2 {
            let prev = rows[rows.len() - 2].l2_u;
            let cur = rows[rows.len() - 1].l2_u;
            let saturated = !(cur > 0.0) || prev / cur < opts.saturation_factor;
            if cur <= opts.target || saturated || rows.len() >= opts.max_levels {
                break;
            }
        }
        intervals *= 2;
    }

    Ok(ConvergenceReport {
        cell: *cell,
        rows,
        orders,
        speedup: None,
        saturation_factor: opts.saturation_factor,
    })
}

/// Outcome of the matched-accuracy wall-time comparison.
#[derive(Clone, Copy, Debug)]
pub struct SpeedupReport {
    /// baseline wall time / corrected wall time. Machine-dependent.
    pub ratio: f64,
    pub cdc_dt: f64,
    pub cdc_error: f64,
    pub cdc_wall: Duration,
    pub baseline_substeps: usize,
    pub baseline_error: f64,
    pub baseline_wall: Duration,
}

fn median_wall_of<T>(runs: usize, mut task: impl FnMut() -> Result<T>) -> Result<Duration> {
    let mut walls = Vec::with_capacity(runs);
    for _ in 0..runs {
        let started = Instant::now();
        task()?;
        walls.push(started.elapsed());
    }
    walls.sort();
    Ok(walls[walls.len() / 2])
}

/// Compares a deferred-correction run against plain Kahan at the step needed
/// to reach the same accuracy target, both measured with the L²(u) norm on
/// the endpoint grid of the corrected run. Wall times are medians of five
/// sequential runs.
pub fn speedup_bench(
    model: &ModelBundle,
    u0: &State,
    cfg: &CdcConfig,
    target: f64,
    reference_tol: f64,
) -> Result<SpeedupReport> {
    let intervals = cfg.intervals()?;
    let traj = cdc_integrate(&model.system, u0, cfg)?;
    let times: Vec<f64> = traj.times().collect();
    let reference = reference_solve(&model.system, u0, &times, reference_tol)?;
    let cdc_error = l2_solution_error(&traj, &reference, cfg.dt)?;
    if cdc_error > target {
        return Err(Error::TargetUnreachable {
            target,
            reason: format!(
                "corrected run reached only L2(u) = {cdc_error:.3e} at dt = {}",
                cfg.dt
            ),
        });
    }
    drop(traj);
    let cdc_wall = median_wall_of(5, || cdc_integrate(&model.system, u0, cfg))?;

    // Plain Kahan, recorded on the same endpoint grid: predict the substep
    // count from the order-2 error model, then verify and refine.
    let max_substeps = 1usize << 26;
    let mut substeps = 1usize;
    let mut baseline_error;
    loop {
        let run = integrate_fixed_sampled(&model.system, u0, cfg.dt, intervals, substeps)?;
        baseline_error = l2_solution_error(&run, &reference, cfg.dt)?;
        if baseline_error <= target {
            break;
        }
        if substeps >= max_substeps {
            return Err(Error::TargetUnreachable {
                target,
                reason: format!(
                    "plain Kahan still at L2(u) = {baseline_error:.3e} with {substeps} substeps"
                ),
            });
        }
        let factor = (baseline_error / target).sqrt() * 1.1;
        let predicted = (substeps as f64 * factor).ceil() as usize;
        substeps = predicted.max(substeps + 1).min(max_substeps);
    }
    let baseline_wall = median_wall_of(5, || {
        integrate_fixed_sampled(&model.system, u0, cfg.dt, intervals, substeps)
    })?;

    Ok(SpeedupReport {
        ratio: baseline_wall.as_secs_f64() / cdc_wall.as_secs_f64(),
        cdc_dt: cfg.dt,
        cdc_error,
        cdc_wall,
        baseline_substeps: substeps,
        baseline_error,
        baseline_wall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_lv2, lv2_benchmark_initial};
    use crate::quadratic::state;
    use crate::trajectory::{StepRecord, TrajectoryMeta};
    use approx::assert_abs_diff_eq;

    fn constant_drift_trajectory(drift: f64, dt: f64, steps: usize) -> Trajectory {
        // lv2 H1 drift is exactly `drift` from the second record on
        let mut traj = Trajectory::new(TrajectoryMeta::default());
        let base = [0.3, 0.3, 0.4];
        traj.push(StepRecord {
            t: 0.0,
            u: state(&base),
        })
        .unwrap();
        for k in 1..=steps {
            traj.push(StepRecord {
                t: k as f64 * dt,
                u: state(&[base[0] + drift, base[1], base[2]]),
            })
            .unwrap();
        }
        traj
    }

    #[test]
    fn trace_of_constant_trajectory_is_zero() {
        let traj = constant_drift_trajectory(0.0, 0.1, 10);
        let m = build_lv2();
        let trace = invariant_trace(&traj, &m.h1).unwrap();
        assert_eq!(trace.len(), 11);
        assert!(trace.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn constant_drift_norm_is_d_times_sqrt_t() {
        let m = build_lv2();
        let d = 3e-4;
        // J = 1000 steps of dt = 0.1: T = 100
        let traj = constant_drift_trajectory(d, 0.1, 1000);
        let err = l2_invariant_error(&traj, &m.h1, 0.1).unwrap();
        assert_abs_diff_eq!(err, d * 10.0, epsilon = 1e-13);
        // doubling the drift doubles the norm
        let twice = l2_invariant_error(&constant_drift_trajectory(2.0 * d, 0.1, 1000), &m.h1, 0.1)
            .unwrap();
        assert_abs_diff_eq!(twice, 2.0 * err, epsilon = 1e-13);
    }

    #[test]
    fn spacing_mismatch_is_rejected() {
        let m = build_lv2();
        let traj = constant_drift_trajectory(0.0, 0.1, 10);
        assert!(matches!(
            l2_invariant_error(&traj, &m.h1, 0.2),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn solution_error_of_identical_trajectories_is_zero() {
        let traj = constant_drift_trajectory(0.0, 0.1, 10);
        assert_eq!(l2_solution_error(&traj, &traj, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn single_offset_contributes_norm_times_sqrt_dt() {
        let dt = 0.25;
        let reference = constant_drift_trajectory(0.0, dt, 8);
        let mut traj = constant_drift_trajectory(0.0, dt, 8);
        // displace one interior record by v
        let v = state(&[3e-3, -4e-3, 0.0]);
        let mut records: Vec<StepRecord> = traj.records().to_vec();
        records[5].u += &v;
        traj = Trajectory::new(TrajectoryMeta::default());
        for r in records {
            traj.push(r).unwrap();
        }
        let err = l2_solution_error(&traj, &reference, dt).unwrap();
        assert_abs_diff_eq!(err, 5e-3 * dt.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn permuting_state_indices_consistently_preserves_the_norm() {
        let dt = 0.5;
        let make = |swap: bool| {
            let mut traj = Trajectory::new(TrajectoryMeta::default());
            for k in 0..=4 {
                let a = 0.1 * k as f64;
                let u = if swap {
                    state(&[0.4, a, 1.0 - a])
                } else {
                    state(&[a, 0.4, 1.0 - a])
                };
                traj.push(StepRecord { t: k as f64 * dt, u }).unwrap();
            }
            traj
        };
        let base = constant_drift_trajectory(0.0, dt, 4);
        let base_swapped = {
            let mut traj = Trajectory::new(TrajectoryMeta::default());
            for r in base.records() {
                let u = state(&[r.u[1], r.u[0], r.u[2]]);
                traj.push(StepRecord { t: r.t, u }).unwrap();
            }
            traj
        };
        let e1 = l2_solution_error(&make(false), &base, dt).unwrap();
        let e2 = l2_solution_error(&make(true), &base_swapped, dt).unwrap();
        assert_abs_diff_eq!(e1, e2, epsilon = 1e-15);
    }

    #[test]
    fn order_reference_values() {
        assert_abs_diff_eq!(convergence_order(1e-2, 2.5e-3).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(convergence_order(0.37, 0.37).unwrap(), 0.0);
        assert!(convergence_order(0.0, 1.0).is_err());
        assert!(convergence_order(1.0, -2.0).is_err());
    }

    #[test]
    fn manufactured_power_law_orders_are_exact() {
        for p in [2.0, 4.5, 11.0] {
            let c = 0.37;
            let dt0: f64 = 0.1;
            let e0 = c * dt0.powf(p);
            let e1 = c * (dt0 / 2.0).powf(p);
            assert_abs_diff_eq!(convergence_order(e0, e1).unwrap(), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn study_is_deterministic_and_snaps_dt() {
        let m = build_lv2();
        let u0 = lv2_benchmark_initial();
        let cells = [StudyCell {
            corrections: 1,
            nodes: 5,
            dt0: 0.3, // 5 / 0.3 is not an integer; snaps to 5/17
        }];
        let opts = StudyOptions {
            t_end: 5.0,
            target: 1e-8,
            max_levels: 3,
            ..StudyOptions::default()
        };
        let a = convergence_study(&m, &u0, &cells, &opts).unwrap();
        let b = convergence_study(&m, &u0, &cells, &opts).unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].rows.len() >= 2);
        assert_abs_diff_eq!(a[0].rows[0].dt, 5.0 / 17.0, epsilon = 1e-15);
        for (ra, rb) in a[0].rows.iter().zip(&b[0].rows) {
            assert_eq!(ra.l2_u, rb.l2_u);
            assert_eq!(ra.l2_h1, rb.l2_h1);
            assert_eq!(ra.l2_h2, rb.l2_h2);
        }
    }

    #[test]
    fn study_orders_match_the_base_method() {
        // S = 0, n = 2 is plain Kahan: expect order ~2 on the reversible model
        let m = build_lv2();
        let u0 = lv2_benchmark_initial();
        let cells = [StudyCell {
            corrections: 0,
            nodes: 2,
            dt0: 0.1,
        }];
        let opts = StudyOptions {
            t_end: 10.0,
            target: 1e-9,
            max_levels: 4,
            ..StudyOptions::default()
        };
        let report = &convergence_study(&m, &u0, &cells, &opts).unwrap()[0];
        let order = report.measured_order(ErrorColumn::Solution).unwrap();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }
}
