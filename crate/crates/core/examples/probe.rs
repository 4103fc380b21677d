//! Scratch probe for the study harness (temporary).

use kahan_cdc_core::analysis::{
    convergence_study, invariant_trace, l2_solution_error, ErrorColumn, StudyCell, StudyOptions,
};
use kahan_cdc_core::integrators::{integrate_fixed, reference_solve};
use kahan_cdc_core::cdc::{cdc_integrate, CdcConfig};
use kahan_cdc_core::models::{lv1_benchmark, lv1_benchmark_initial};

fn main() {
    let model = lv1_benchmark();
    let u0 = lv1_benchmark_initial();

    // ---- criterion 5 candidate: sequences ending at the table dt ----
    let cells = [
        (StudyCell { corrections: 1, nodes: 5, dt0: 0.08 }, 4.48),
        (StudyCell { corrections: 2, nodes: 7, dt0: 0.4 }, 6.78),
        (StudyCell { corrections: 3, nodes: 9, dt0: 1.2 }, 8.53),
        (StudyCell { corrections: 4, nodes: 11, dt0: 2.0 }, 11.03),
    ];
    let opts = StudyOptions {
        max_levels: 4,
        ..StudyOptions::default()
    };
    let t0 = std::time::Instant::now();
    let bare: Vec<StudyCell> = cells.iter().map(|(c, _)| *c).collect();
    let reports = convergence_study(&model, &u0, &bare, &opts).unwrap();
    println!("criterion-5 study wall: {:?}", t0.elapsed());
    for (r, (_, table)) in reports.iter().zip(&cells) {
        println!("cell S={} n={} (table {table})", r.cell.corrections, r.cell.nodes);
        for (i, row) in r.rows.iter().enumerate() {
            print!(
                "  dt={:.5e}  u={:.3e} H1={:.3e} H2={:.3e}",
                row.dt, row.l2_u, row.l2_h1, row.l2_h2
            );
            if i > 0 {
                let o = &r.orders[i - 1];
                print!("  | orders u={:.2} H1={:.2} H2={:.2}", o.u, o.h1, o.h2);
            }
            println!();
        }
        println!(
            "  measured: u={:?} H1={:?} H2={:?}",
            r.measured_order(ErrorColumn::Solution),
            r.measured_order(ErrorColumn::H1),
            r.measured_order(ErrorColumn::H2),
        );
    }

    // ---- criterion 6 candidate: dt0 = 0.2, target 5e-9 ----
    let cells6 = [
        StudyCell { corrections: 1, nodes: 5, dt0: 0.2 },
        StudyCell { corrections: 1, nodes: 7, dt0: 0.2 },
        StudyCell { corrections: 2, nodes: 5, dt0: 0.2 },
        StudyCell { corrections: 2, nodes: 7, dt0: 0.2 },
    ];
    let opts6 = StudyOptions {
        target: 5e-9,
        ..StudyOptions::default()
    };
    let t0 = std::time::Instant::now();
    let reports = convergence_study(&model, &u0, &cells6, &opts6).unwrap();
    println!("\ncriterion-6 study wall: {:?}", t0.elapsed());
    for r in &reports {
        let bound = (2 * r.cell.corrections + 2).min(r.cell.nodes - 1) as f64 - 0.5;
        println!(
            "cell S={} n={}: measured u {:?} (bound {bound})",
            r.cell.corrections,
            r.cell.nodes,
            r.measured_order(ErrorColumn::Solution)
        );
        for (i, row) in r.rows.iter().enumerate() {
            print!("  dt={:.5e}  u={:.3e}", row.dt, row.l2_u);
            if i > 0 {
                print!("  order {:.2}", r.orders[i - 1].u);
            }
            println!();
        }
    }

    // ---- criterion 2: plain Kahan order, T = 10 ----
    let t0 = std::time::Instant::now();
    let mut errs = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        let steps = (10.0_f64 / dt).round() as usize;
        let traj = integrate_fixed(&model.system, &u0, dt, steps).unwrap();
        let times: Vec<f64> = traj.times().collect();
        let reference = reference_solve(&model.system, &u0, &times, 1e-13).unwrap();
        errs.push(l2_solution_error(&traj, &reference, dt).unwrap());
    }
    println!(
        "\ncriterion-2 errors {errs:?} orders {:.3} {:.3} (wall {:?})",
        (errs[0] / errs[1]).log2(),
        (errs[1] / errs[2]).log2(),
        t0.elapsed()
    );

    // ---- criterion 4: drift comparison at dt = 0.01, T = 100 ----
    let t0 = std::time::Instant::now();
    let max_drift = |trace: &[f64]| trace.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let plain = integrate_fixed(&model.system, &u0, 0.01, 10_000).unwrap();
    let plain_h1 = max_drift(&invariant_trace(&plain, &model.h1).unwrap());
    let plain_h2 = max_drift(&invariant_trace(&plain, &model.h2).unwrap());
    let fine = integrate_fixed(&model.system, &u0, 0.001, 100_000).unwrap();
    let fine_h1 = max_drift(&invariant_trace(&fine, &model.h1).unwrap());
    let fine_h2 = max_drift(&invariant_trace(&fine, &model.h2).unwrap());
    let cdc = cdc_integrate(&model.system, &u0, &CdcConfig::new(0.01, 100.0, 1)).unwrap();
    let cdc_h1 = max_drift(&invariant_trace(&cdc, &model.h1).unwrap());
    let cdc_h2 = max_drift(&invariant_trace(&cdc, &model.h2).unwrap());
    println!(
        "\ncriterion-4 (wall {:?}):\n  plain dt=0.01: H1 {plain_h1:.3e} H2 {plain_h2:.3e}\n  plain dt=0.001: H1 {fine_h1:.3e} H2 {fine_h2:.3e}\n  cdc S=1 dt=0.01: H1 {cdc_h1:.3e} H2 {cdc_h2:.3e}\n  ratios: H1 {:.1} H2 {:.1}",
        t0.elapsed(),
        plain_h1 / cdc_h1,
        plain_h2 / cdc_h2,
    );
    let min_traj = plain.states().map(|u| u.min()).fold(f64::INFINITY, f64::min);
    let max_traj = plain.states().map(|u| u.max()).fold(0.0f64, f64::max);
    println!("  plain trajectory bounds: [{min_traj:.4}, {max_traj:.4}]");
}
