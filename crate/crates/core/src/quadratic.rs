//! Autonomous ODEs with quadratic right-hand side f(u) = Q(u) + B u.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// State of the ODE system; the length is the system dimension.
pub type State = DVector<f64>;

/// Convenience constructor for a [`State`] from a slice.
pub fn state(components: &[f64]) -> State {
    State::from_row_slice(components)
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// A vector field f(u) = Q(u) + B u with Q homogeneous quadratic.
///
/// The quadratic part is stored per component as a symmetric matrix G_i so
/// that Q_i(u) = uᵀ G_i u. The same tensors drive field evaluation, the
/// analytic Jacobian, and the polarized bilinear form
/// Q(x, y) = ½ (Q(x + y) − Q(x) − Q(y)), which contracts to Q_i(x, y) = xᵀ G_i y.
///
/// Values are immutable after construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct QuadraticSystem {
    dim: usize,
    quad: Vec<DMatrix<f64>>,
    linear: DMatrix<f64>,
}

impl QuadraticSystem {
    /// Builds a system from per-component quadratic matrices and the linear part.
    ///
    /// The matrices are symmetrized on construction, so callers may pass any
    /// G_i with uᵀ G_i u = Q_i(u).
    pub fn new(quad: Vec<DMatrix<f64>>, linear: DMatrix<f64>) -> Result<Self> {
        let dim = quad.len();
        if dim == 0 {
            return Err(Error::Config("system dimension must be at least 1".into()));
        }
        check_dim(dim, linear.nrows())?;
        check_dim(dim, linear.ncols())?;
        let quad = quad
            .into_iter()
            .map(|g| {
                check_dim(dim, g.nrows())?;
                check_dim(dim, g.ncols())?;
                Ok((&g + g.transpose()) * 0.5)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, quad, linear })
    }

    /// Builds the quadratic form of a Lotka-Volterra system
    /// u̇_i = u_i (r_i + Σ_j a_{ij} u_j).
    ///
    /// The quadratic tensor is stored symmetrized,
    /// q_{ijk} = ½ (δ_{ij} a_{ik} + δ_{ik} a_{ij}), and B = diag(r).
    pub fn lotka_volterra(rates: &[f64], interaction: &DMatrix<f64>) -> Result<Self> {
        let dim = rates.len();
        check_dim(dim, interaction.nrows())?;
        check_dim(dim, interaction.ncols())?;
        let quad = (0..dim)
            .map(|i| {
                DMatrix::from_fn(dim, dim, |j, k| {
                    let mut g = 0.0;
                    if j == i {
                        g += 0.5 * interaction[(i, k)];
                    }
                    if k == i {
                        g += 0.5 * interaction[(i, j)];
                    }
                    g
                })
            })
            .collect();
        let linear = DMatrix::from_diagonal(&DVector::from_row_slice(rates));
        Self::new(quad, linear)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The symmetric matrix G_i of the i-th component of Q.
    pub fn quad_matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.quad[i]
    }

    /// The linear part B.
    pub fn linear_part(&self) -> &DMatrix<f64> {
        &self.linear
    }

    /// Evaluates f(u) = Q(u) + B u.
    pub fn field(&self, u: &State) -> Result<State> {
        check_dim(self.dim, u.len())?;
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "field evaluation input",
            });
        }
        let mut f = &self.linear * u;
        for (i, g) in self.quad.iter().enumerate() {
            f[i] += u.dot(&(g * u));
        }
        Ok(f)
    }

    /// Evaluates the Jacobian f'(u), with entries 2 (G_i u)_j + b_{ij}.
    pub fn jacobian(&self, u: &State) -> Result<DMatrix<f64>> {
        check_dim(self.dim, u.len())?;
        let mut jac = self.linear.clone();
        for (i, g) in self.quad.iter().enumerate() {
            let row = g * u;
            for j in 0..self.dim {
                jac[(i, j)] += 2.0 * row[j];
            }
        }
        Ok(jac)
    }

    /// Evaluates the polarized bilinear form Q(x, y) = ½ (Q(x+y) − Q(x) − Q(y))
    /// by contraction with the symmetrized tensor, Q_i(x, y) = xᵀ G_i y.
    pub fn polarize(&self, x: &State, y: &State) -> Result<State> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        let components = self.quad.iter().map(|g| x.dot(&(g * y)));
        Ok(State::from_iterator(self.dim, components))
    }
}
