//! One-step methods: Kahan's linearly-implicit method for autonomous quadratic
//! systems, the implicit midpoint rule for non-autonomous error systems, and a
//! fixed-step driver.

mod dopri;

pub use dopri::reference_solve;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadratic::{QuadraticSystem, State};
use crate::trajectory::{StepRecord, Trajectory, TrajectoryMeta};

/// Condition-estimate ceiling above which a linear solve is treated as failed.
pub const MAX_CONDITION: f64 = 1e14;

/// Controls for the Newton iterations inside implicit steps.
#[derive(Clone, Copy, Debug)]
pub struct NewtonConfig {
    /// Absolute residual norm at which the iteration is converged.
    pub abs_tol: f64,
    /// Iteration cap.
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            max_iters: 25,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "Newton tolerance must be positive, got {}",
                self.abs_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("Newton iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One step of Kahan's method in its linearly-implicit Rosenbrock form:
/// solve (I − dt/2 f'(u)) ũ = dt f(u) and return u + ũ.
///
/// The result satisfies the defining polarized relation
/// (u⁺ − u)/dt = Q(u, u⁺) + ½ B (u + u⁺) up to round-off.
pub fn kahan_step(sys: &QuadraticSystem, u: &State, dt: f64) -> Result<State> {
    if !(dt != 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("step size must be nonzero and finite, got {dt}")));
    }
    let m = sys.dim();
    let f = sys.field(u)?;
    let jac = sys.jacobian(u)?;
    let a = DMatrix::identity(m, m) - jac * (0.5 * dt);
    let singular = |cond: f64| Error::SingularStep {
        dt,
        cond,
        state: u.iter().copied().collect(),
    };
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let cond = norm_inf(&a) * norm_inf(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(singular(cond));
    }
    let delta = lu
        .solve(&(f * dt))
        .ok_or_else(|| singular(f64::INFINITY))?;
    Ok(u + delta)
}

/// One step of Kahan's method written as the implicit Runge-Kutta relation
/// (u⁺ − u)/dt = −½ f(u) + 2 f((u + u⁺)/2) − ½ f(u⁺), solved by Newton.
///
/// On quadratic fields this is algebraically the same method as
/// [`kahan_step`]; it is kept as an independent cross-check route.
pub fn kahan_step_rk_form(
    sys: &QuadraticSystem,
    u: &State,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<State> {
    cfg.validate()?;
    let m = sys.dim();
    let f_u = sys.field(u)?;
    let residual = |v: &State| -> Result<State> {
        let mid = (u + v) * 0.5;
        let rhs = &f_u * -0.5 + sys.field(&mid)? * 2.0 - sys.field(v)? * 0.5;
        Ok(v - u - rhs * dt)
    };
    let jacobian = |v: &State| -> Result<DMatrix<f64>> {
        let mid = (u + v) * 0.5;
        let j = sys.jacobian(&mid)? - sys.jacobian(v)? * 0.5;
        Ok(DMatrix::identity(m, m) - j * dt)
    };
    newton_solve(u.clone(), residual, jacobian, cfg)
}

/// One step of the implicit midpoint rule for a non-autonomous system,
/// e⁺ = e + dt · rhs(t + dt/2, (e + e⁺)/2), solved by full Newton with the
/// supplied analytic Jacobian and initial guess e⁺ = e.
pub fn midpoint_step<F, J>(
    rhs: F,
    rhs_jac: J,
    t: f64,
    e: &State,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<State>
where
    F: Fn(f64, &State) -> Result<State>,
    J: Fn(f64, &State) -> Result<DMatrix<f64>>,
{
    cfg.validate()?;
    let m = e.len();
    let t_mid = t + 0.5 * dt;
    let residual = |v: &State| -> Result<State> {
        let mid = (e + v) * 0.5;
        Ok(v - e - rhs(t_mid, &mid)? * dt)
    };
    let jacobian = |v: &State| -> Result<DMatrix<f64>> {
        let mid = (e + v) * 0.5;
        Ok(DMatrix::identity(m, m) - rhs_jac(t_mid, &mid)? * (0.5 * dt))
    };
    newton_solve(e.clone(), residual, jacobian, cfg)
}

fn newton_solve<R, J>(initial: State, residual: R, jacobian: J, cfg: &NewtonConfig) -> Result<State>
where
    R: Fn(&State) -> Result<State>,
    J: Fn(&State) -> Result<DMatrix<f64>>,
{
    let mut v = initial;
    let mut g = residual(&v)?;
    let mut g_norm = g.norm();
    for iter in 0..cfg.max_iters {
        if g_norm <= cfg.abs_tol {
            return Ok(v);
        }
        let lu = jacobian(&v)?.lu();
        let delta = lu.solve(&g).ok_or(Error::NewtonDiverged {
            iters: iter,
            residual: g_norm,
        })?;
        v -= delta;
        g = residual(&v)?;
        g_norm = g.norm();
        if !g_norm.is_finite() {
            return Err(Error::NewtonDiverged {
                iters: iter + 1,
                residual: g_norm,
            });
        }
    }
    if g_norm <= cfg.abs_tol {
        Ok(v)
    } else {
        Err(Error::NewtonDiverged {
            iters: cfg.max_iters,
            residual: g_norm,
        })
    }
}

/// Integrates with Kahan's method at a fixed step, recording every step.
pub fn integrate_fixed(
    sys: &QuadraticSystem,
    u0: &State,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    integrate_fixed_sampled(sys, u0, dt, steps, 1)
}

/// Integrates with Kahan's method using `substeps` internal steps per record,
/// so the trajectory holds `records + 1` entries spaced `dt_record` apart.
///
/// The internal step is dt_record / substeps. Used to measure a fine run on a
/// coarse comparison grid.
pub fn integrate_fixed_sampled(
    sys: &QuadraticSystem,
    u0: &State,
    dt_record: f64,
    records: usize,
    substeps: usize,
) -> Result<Trajectory> {
    if !(dt_record > 0.0) {
        return Err(Error::Config(format!(
            "record spacing must be positive, got {dt_record}"
        )));
    }
    if records == 0 {
        return Err(Error::Config("step count must be at least 1".into()));
    }
    if substeps == 0 {
        return Err(Error::Config("substep count must be at least 1".into()));
    }
    let dt = dt_record / substeps as f64;
    let meta = TrajectoryMeta {
        method: "kahan".into(),
        dt: dt_record,
        corrections: None,
        nodes: None,
    };
    let mut traj = Trajectory::with_capacity(meta, records + 1);
    let mut u = u0.clone();
    traj.push(StepRecord { t: 0.0, u: u.clone() })?;
    for k in 0..records {
        for s in 0..substeps {
            u = kahan_step(sys, &u, dt).map_err(|e| Error::StepFailed {
                index: k * substeps + s,
                source: Box::new(e),
            })?;
        }
        traj.push(StepRecord {
            t: (k + 1) as f64 * dt_record,
            u: u.clone(),
        })?;
    }
    Ok(traj)
}
