//! Structure-preserving integration of ODEs with quadratic vector fields.
//!
//! The crate provides Kahan's linearly-implicit one-step method together with
//! a classical deferred correction (CDC) driver that raises its order by two
//! per correction sweep, plus the machinery needed to study both: the two
//! standard 3D bi-Hamiltonian Lotka-Volterra models with their invariants and
//! Poisson matrices, an adaptive embedded Runge-Kutta 5(4) reference solver,
//! discrete L² error norms, and a convergence/timing harness.
//!
//! # Layout
//!
//! - [`quadratic`] — quadratic vector fields f(u) = Q(u) + B u: evaluation,
//!   analytic Jacobian, polarized bilinear form.
//! - [`models`] — the two Lotka-Volterra models, Hamiltonians, Poisson
//!   matrices, and the structural-identity residuals.
//! - [`integrators`] — Kahan steps (Rosenbrock and implicit Runge-Kutta
//!   forms), the implicit midpoint rule, a fixed-step driver, and the
//!   adaptive reference solver.
//! - [`cdc`] — per-interval node grids, barycentric Lagrange interpolation
//!   and differentiation, correction sweeps, and the corrected propagation
//!   loop.
//! - [`analysis`] — L² norms, invariant traces, convergence-order studies,
//!   and the matched-accuracy speedup benchmark.
//!
//! # Example
//!
//! ```
//! use kahan_cdc_core::cdc::{cdc_integrate, CdcConfig};
//! use kahan_cdc_core::models::{build_lv2, lv2_benchmark_initial};
//!
//! let model = build_lv2();
//! let cfg = CdcConfig::new(0.1, 10.0, 1); // dt, T, one correction (n = 5)
//! let traj = cdc_integrate(&model.system, &lv2_benchmark_initial(), &cfg).unwrap();
//! assert_eq!(traj.len(), 101);
//! let h1 = traj.states().map(|u| model.h1.eval(u).unwrap());
//! ```

pub mod analysis;
pub mod cdc;
pub mod error;
pub mod integrators;
pub mod models;
pub mod quadratic;
pub mod trajectory;

pub use error::{Error, Result};
pub use quadratic::{state, QuadraticSystem, State};
pub use trajectory::{StepRecord, Trajectory, TrajectoryMeta};
