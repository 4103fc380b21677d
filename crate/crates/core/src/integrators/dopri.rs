//! Adaptive embedded Runge-Kutta 5(4) pair (Dormand-Prince coefficients) used
//! as the numerical reference for error norms. Steps land exactly on each
//! requested output time; local error is controlled by a mixed
//! absolute/relative criterion with PI step-size control.

use crate::error::{Error, Result};
use crate::quadratic::{QuadraticSystem, State};
use crate::trajectory::{StepRecord, Trajectory, TrajectoryMeta};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK_MAX: f64 = 5.0; // step may shrink by at most this factor
const FAC_GROW_MAX: f64 = 0.1; // reciprocal: step may grow by at most 10x

/// Solves the system from `u0` at `t_out[0]`, producing states at every entry
/// of `t_out`. `tol` is used as both the absolute and the relative tolerance
/// and must lie in [1e-14, 1e-6].
pub fn reference_solve(
    sys: &QuadraticSystem,
    u0: &State,
    t_out: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(Error::Config(format!(
            "reference tolerance must lie in [1e-14, 1e-6], got {tol}"
        )));
    }
    if t_out.is_empty() {
        return Err(Error::Config("at least one output time is required".into()));
    }
    if t_out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("output times must increase strictly".into()));
    }
    let m = sys.dim();
    if u0.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: u0.len(),
        });
    }

    let nominal_dt = if t_out.len() > 1 { t_out[1] - t_out[0] } else { 0.0 };
    let meta = TrajectoryMeta {
        method: "dopri5".into(),
        dt: nominal_dt,
        corrections: None,
        nodes: None,
    };
    let mut traj = Trajectory::with_capacity(meta, t_out.len());
    let mut t = t_out[0];
    let mut y = u0.clone();
    traj.push(StepRecord { t, u: y.clone() })?;
    if t_out.len() == 1 {
        return Ok(traj);
    }

    let span = t_out[t_out.len() - 1] - t_out[0];
    let h_min = 1e-14 * span;
    let mut k: Vec<State> = vec![State::zeros(m); 7];
    k[0] = sys.field(&y)?;
    let mut h = initial_step(sys, &y, &k[0], tol)?.min(span);
    let mut fac_old: f64 = 1e-4;
    let mut rejected = false;

    for &target in &t_out[1..] {
        while t < target {
            let h_eff = h.min(target - t);
            if h_eff < h_min {
                return Err(Error::StepUnderflow { t, h: h_eff });
            }

            // stages 2..7; stage 7 evaluates at the candidate solution (FSAL)
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().take(s).enumerate() {
                    if A[s][j] != 0.0 {
                        ys += kj * (h_eff * A[s][j]);
                    }
                }
                let _ = C[s]; // autonomous field: stage times are not needed
                k[s] = sys.field(&ys)?;
            }
            let mut y_new = y.clone();
            for (j, kj) in k.iter().take(6).enumerate() {
                if A[6][j] != 0.0 {
                    y_new += kj * (h_eff * A[6][j]);
                }
            }
            k[6] = sys.field(&y_new)?;

            // scaled RMS error of the embedded difference
            let mut err_sq = 0.0;
            for i in 0..m {
                let e_i: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h_eff;
                let sc = tol + tol * y[i].abs().max(y_new[i].abs());
                err_sq += (e_i / sc) * (e_i / sc);
            }
            let err = (err_sq / m as f64).sqrt();
            if !err.is_finite() {
                rejected = true;
                h = h_eff / FAC_SHRINK_MAX;
                continue;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                let fac = (fac11 / fac_old.powf(BETA) / SAFETY)
                    .clamp(FAC_GROW_MAX, FAC_SHRINK_MAX);
                fac_old = err.max(1e-4);
                t = if h_eff < h { target } else { t + h_eff };
                std::mem::swap(&mut y, &mut y_new);
                k[0] = k[6].clone();
                let mut h_new = h_eff / fac;
                if rejected {
                    h_new = h_new.min(h_eff);
                }
                rejected = false;
                h = h_new;
            } else {
                rejected = true;
                h = h_eff / (fac11 / SAFETY).min(FAC_SHRINK_MAX);
            }
        }
        t = target;
        traj.push(StepRecord { t, u: y.clone() })?;
    }
    Ok(traj)
}

/// Standard starting-step heuristic from the scale of y, f(y), and an Euler
/// probe of the second derivative.
fn initial_step(sys: &QuadraticSystem, y0: &State, f0: &State, tol: f64) -> Result<f64> {
    let m = y0.len() as f64;
    let sc = |y: &State, i: usize| tol + tol * y[i].abs();
    let rms = |v: &State, base: &State| {
        (v.iter()
            .enumerate()
            .map(|(i, x)| (x / sc(base, i)).powi(2))
            .sum::<f64>()
            / m)
            .sqrt()
    };
    let d0 = rms(y0, y0);
    let d1 = rms(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = y0 + f0 * h0;
    let f1 = sys.field(&y1)?;
    let d2 = rms(&(f1 - f0), y0) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_lv2, lv2_benchmark_initial};
    use crate::quadratic::state;
    use nalgebra::DMatrix;

    #[test]
    fn zero_field_stays_constant() {
        let sys = QuadraticSystem::lotka_volterra(&[0.0; 3], &DMatrix::zeros(3, 3)).unwrap();
        let u0 = state(&[0.4, 1.0, 2.5]);
        let t_out: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let traj = reference_solve(&sys, &u0, &t_out, 1e-10).unwrap();
        assert_eq!(traj.len(), 11);
        for rec in traj.records() {
            assert_eq!(rec.u, u0);
        }
    }

    #[test]
    fn tolerance_domain_is_enforced() {
        let sys = build_lv2().system;
        let u0 = lv2_benchmark_initial();
        assert!(reference_solve(&sys, &u0, &[0.0, 1.0], 1e-5).is_err());
        assert!(reference_solve(&sys, &u0, &[0.0, 1.0], 1e-15).is_err());
        assert!(reference_solve(&sys, &u0, &[1.0, 1.0], 1e-10).is_err());
        assert!(reference_solve(&sys, &u0, &[], 1e-10).is_err());
    }

    #[test]
    fn invariant_drift_stays_small_at_tight_tolerance() {
        let m = build_lv2();
        let u0 = lv2_benchmark_initial();
        let t_out: Vec<f64> = (0..=1000).map(|i| 0.1 * i as f64).collect();
        let traj = reference_solve(&m.system, &u0, &t_out, 1e-13).unwrap();
        let h0 = m.h2.eval(&u0).unwrap();
        let drift = traj
            .states()
            .map(|u| (m.h2.eval(u).unwrap() - h0).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-10, "H2 drift {drift}");
    }

    #[test]
    fn tightening_tolerance_refines_the_solution() {
        let sys = build_lv2().system;
        let u0 = lv2_benchmark_initial();
        let t_out = [0.0, 2.5, 5.0, 7.5, 10.0];
        let anchor = reference_solve(&sys, &u0, &t_out, 1e-13).unwrap();
        let discrepancy = |tol: f64| {
            let run = reference_solve(&sys, &u0, &t_out, tol).unwrap();
            run.states()
                .zip(anchor.states())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let coarse = discrepancy(1e-7);
        let fine = discrepancy(1e-9);
        assert!(
            fine < coarse,
            "refinement failed: tol 1e-7 -> {coarse}, tol 1e-9 -> {fine}"
        );
    }
}
