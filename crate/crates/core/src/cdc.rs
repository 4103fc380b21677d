//! Classical deferred correction on uniform per-interval node grids.
//!
//! Each interval [t_j, t_{j+1}] carries n uniform nodes. A provisional
//! solution is produced by Kahan's method stepping node to node; each
//! correction sweep then integrates the error system
//!
//!   e' = f(e + U(t)) − U'(t),   e(t_j) = 0,
//!
//! with the implicit midpoint rule, where U is the barycentric Lagrange
//! interpolant of the current node values, and adds the resulting error
//! approximations to the node values. With S sweeps and n nodes the expected
//! order is min{2S + 2, n − 1}.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrators::{kahan_step, midpoint_step, NewtonConfig};
use crate::quadratic::{QuadraticSystem, State};
use crate::trajectory::{StepRecord, Trajectory, TrajectoryMeta};

/// Relative slack when testing that the interval count T/Δt is an integer.
const GRID_REL_TOL: f64 = 1e-9;

/// Barycentric weights w_k = 1 / Π_{i≠k} (t_k − t_i) of distinct nodes.
pub fn barycentric_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n < 2 {
        return Err(Error::Config("at least two nodes are required".into()));
    }
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let mut prod = 1.0;
        for i in 0..n {
            if i == k {
                continue;
            }
            let d = nodes[k] - nodes[i];
            if d == 0.0 {
                return Err(Error::DuplicateNodes {
                    i: k.min(i),
                    j: k.max(i),
                    t: nodes[k],
                });
            }
            prod *= d;
        }
        weights.push(1.0 / prod);
    }
    Ok(weights)
}

/// Differentiation matrix of the Lagrange interpolant on the nodes:
/// D_kj = (w_j / w_k) / (t_k − t_j) for k ≠ j, rows summing to zero.
fn differentiation_matrix(nodes: &[f64], weights: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut d = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j == k {
                continue;
            }
            let v = (weights[j] / weights[k]) / (nodes[k] - nodes[j]);
            d[(k, j)] = v;
            diag -= v;
        }
        d[(k, k)] = diag;
    }
    d
}

/// Uniform node grid over one interval, with precomputed barycentric weights
/// and differentiation matrix.
#[derive(Clone, Debug)]
pub struct NodeGrid {
    t_start: f64,
    t_end: f64,
    spacing: f64,
    nodes: Vec<f64>,
    bary_w: Vec<f64>,
    diff: DMatrix<f64>,
}

impl NodeGrid {
    /// n uniform nodes including both endpoints.
    pub fn uniform(t_start: f64, t_end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "node count must be at least 2, got {n}"
            )));
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Config(format!(
                "invalid interval [{t_start}, {t_end}]"
            )));
        }
        let span = t_end - t_start;
        let spacing = span / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| t_start + span * (i as f64 / (n - 1) as f64))
            .collect();
        nodes[0] = t_start;
        nodes[n - 1] = t_end;
        let bary_w = barycentric_weights(&nodes)?;
        let diff = differentiation_matrix(&nodes, &bary_w);
        Ok(Self {
            t_start,
            t_end,
            spacing,
            nodes,
            bary_w,
            diff,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Node spacing (t_end − t_start)/(n − 1).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn bary_weights(&self) -> &[f64] {
        &self.bary_w
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    fn check_inside(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * (self.t_end - self.t_start);
        if t < self.t_start - slack || t > self.t_end + slack {
            return Err(Error::OutOfInterval {
                t,
                start: self.t_start,
                end: self.t_end,
            });
        }
        Ok(())
    }
}

/// Node values of one interval together with their grid: the discrete solution
/// U_j = (u_{j,1}, …, u_{j,n}) and its polynomial interpolant.
#[derive(Clone, Debug)]
pub struct NodeSolution {
    grid: NodeGrid,
    values: Vec<State>,
}

impl NodeSolution {
    pub fn new(grid: NodeGrid, values: Vec<State>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if values
            .iter()
            .any(|v| !v.iter().all(|x| x.is_finite()))
        {
            return Err(Error::NonFinite {
                context: "node values",
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &NodeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[State] {
        &self.values
    }

    /// Evaluates the interpolant U(t) in barycentric form. An exact node hit
    /// returns the stored value unchanged.
    pub fn interp_eval(&self, t: f64) -> Result<State> {
        self.grid.check_inside(t)?;
        if let Some(k) = self.node_index(t) {
            return Ok(self.values[k].clone());
        }
        let m = self.values[0].len();
        let mut num = State::zeros(m);
        let mut den = 0.0;
        for (k, value) in self.values.iter().enumerate() {
            let s = self.grid.bary_w[k] / (t - self.grid.nodes[k]);
            num += value * s;
            den += s;
        }
        Ok(num / den)
    }

    /// Evaluates the derivative U'(t): via the differentiation matrix at node
    /// points, and by barycentric differentiation elsewhere.
    pub fn interp_deriv(&self, t: f64) -> Result<State> {
        self.grid.check_inside(t)?;
        let m = self.values[0].len();
        if let Some(k) = self.node_index(t) {
            let mut out = State::zeros(m);
            for (j, value) in self.values.iter().enumerate() {
                let d = self.grid.diff[(k, j)];
                if d != 0.0 {
                    out += value * d;
                }
            }
            return Ok(out);
        }
        let n = self.grid.len();
        let mut s = Vec::with_capacity(n);
        let mut num = State::zeros(m);
        let mut den = 0.0;
        for k in 0..n {
            let sk = self.grid.bary_w[k] / (t - self.grid.nodes[k]);
            num += &self.values[k] * sk;
            den += sk;
            s.push(sk);
        }
        let p = num / den;
        // p'(t) = Σ_k s_k (p − u_k)/(t − t_k) / Σ_k s_k
        let mut dnum = State::zeros(m);
        for k in 0..n {
            dnum += (&p - &self.values[k]) * (s[k] / (t - self.grid.nodes[k]));
        }
        Ok(dnum / den)
    }

    /// Index of the node matching t, treating near-coincidence (relative to
    /// the interval length) as a hit to keep the barycentric formulas away from
    /// degenerate denominators.
    fn node_index(&self, t: f64) -> Option<usize> {
        let tiny = 1e-13 * (self.grid.t_end - self.grid.t_start);
        self.grid
            .nodes
            .iter()
            .position(|&tk| t == tk || (t - tk).abs() < tiny)
    }
}

/// Configuration of one deferred-correction run over [0, T].
#[derive(Clone, Copy, Debug)]
pub struct CdcConfig {
    /// Interval length Δt; T/Δt must be an integer.
    pub dt: f64,
    /// Final time T.
    pub t_end: f64,
    /// Correction sweeps S per interval.
    pub corrections: usize,
    /// Nodes per interval; defaults to 2S + 3.
    pub nodes_per_interval: usize,
    pub newton: NewtonConfig,
}

impl CdcConfig {
    /// Configuration with the default node count n = 2S + 3.
    pub fn new(dt: f64, t_end: f64, corrections: usize) -> Self {
        Self {
            dt,
            t_end,
            corrections,
            nodes_per_interval: 2 * corrections + 3,
            newton: NewtonConfig::default(),
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes_per_interval = nodes;
        self
    }

    pub fn with_newton(mut self, newton: NewtonConfig) -> Self {
        self.newton = newton;
        self
    }

    /// Validates the configuration and returns the interval count J.
    pub fn intervals(&self) -> Result<usize> {
        self.newton.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "interval length must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {}",
                self.t_end
            )));
        }
        if self.nodes_per_interval < 2 {
            return Err(Error::Config(format!(
                "nodes per interval must be at least 2, got {}",
                self.nodes_per_interval
            )));
        }
        let ratio = self.t_end / self.dt;
        let j = ratio.round();
        if j < 1.0 || (ratio - j).abs() > GRID_REL_TOL * ratio {
            return Err(Error::Config(format!(
                "final time {} is not an integer multiple of dt {}",
                self.t_end, self.dt
            )));
        }
        Ok(j as usize)
    }
}

/// One correction sweep: integrates the error system of `prev` node to node
/// with the implicit midpoint rule (zero initial error), and returns the
/// updated node values U + E.
///
/// The right-hand side is f(e + U(t)) − U'(t); its Jacobian in e is
/// f'(e + U(t)) since the interpolant terms do not depend on e.
pub fn cdc_sweep(
    sys: &QuadraticSystem,
    prev: &NodeSolution,
    newton: &NewtonConfig,
) -> Result<NodeSolution> {
    let grid = prev.grid();
    let n = grid.len();
    let m = prev.values()[0].len();
    let rhs = |t: f64, e: &State| -> Result<State> {
        let u = prev.interp_eval(t)?;
        let du = prev.interp_deriv(t)?;
        Ok(sys.field(&(e + u))? - du)
    };
    let rhs_jac =
        |t: f64, e: &State| -> Result<DMatrix<f64>> { sys.jacobian(&(e + prev.interp_eval(t)?)) };

    let mut errors = Vec::with_capacity(n);
    errors.push(State::zeros(m));
    for i in 0..n - 1 {
        let next = midpoint_step(
            &rhs,
            &rhs_jac,
            grid.nodes()[i],
            &errors[i],
            grid.spacing(),
            newton,
        )
        .map_err(|e| Error::NodeFailed {
            node: i + 1,
            source: Box::new(e),
        })?;
        errors.push(next);
    }
    let values = prev
        .values()
        .iter()
        .zip(&errors)
        .map(|(u, e)| u + e)
        .collect();
    NodeSolution::new(grid.clone(), values)
}

/// Deferred-correction integration over [0, T]: per interval, a provisional
/// Kahan solve on the nodes followed by S correction sweeps; the last node
/// value of the corrected solution seeds the next interval. Records the
/// interval endpoints.
pub fn cdc_integrate(sys: &QuadraticSystem, u0: &State, cfg: &CdcConfig) -> Result<Trajectory> {
    let j_count = cfg.intervals()?;
    let n = cfg.nodes_per_interval;
    let meta = TrajectoryMeta {
        method: "kahan-cdc".into(),
        dt: cfg.dt,
        corrections: Some(cfg.corrections),
        nodes: Some(n),
    };
    let mut traj = Trajectory::with_capacity(meta, j_count + 1);
    let mut u = u0.clone();
    traj.push(StepRecord { t: 0.0, u: u.clone() })?;

    for j in 0..j_count {
        let t0 = j as f64 * cfg.dt;
        let t1 = (j + 1) as f64 * cfg.dt;
        let solved = (|| -> Result<State> {
            let grid = NodeGrid::uniform(t0, t1, n)?;
            let h = grid.spacing();
            let mut values = Vec::with_capacity(n);
            values.push(u.clone());
            for i in 0..n - 1 {
                let next = kahan_step(sys, &values[i], h).map_err(|e| Error::NodeFailed {
                    node: i + 1,
                    source: Box::new(e),
                })?;
                values.push(next);
            }
            let mut solution = NodeSolution::new(grid, values)?;
            for _ in 0..cfg.corrections {
                solution = cdc_sweep(sys, &solution, &cfg.newton)?;
            }
            Ok(solution
                .values()
                .last()
                .expect("grid has at least two nodes")
                .clone())
        })()
        .map_err(|e| Error::IntervalFailed {
            interval: j,
            source: Box::new(e),
        })?;
        u = solved;
        traj.push(StepRecord { t: t1, u: u.clone() })?;
    }
    Ok(traj)
}
