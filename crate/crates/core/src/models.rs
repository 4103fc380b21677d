//! The two 3D bi-Hamiltonian Lotka-Volterra models, their Hamiltonians and
//! Poisson matrices.
//!
//! Both models satisfy u̇ = J₁ ∇H₂ = J₂ ∇H₁ with H₁ a Casimir of J₁ and H₂ a
//! Casimir of J₂; [`ModelBundle::structure_residuals`] measures all four
//! identities pointwise.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadratic::{state, QuadraticSystem, State};

/// Tolerance for the algebraic parameter constraints of the first model.
pub const PARAM_TOL: f64 = 1e-12;

/// Coefficients of the first model,
/// u̇₁ = u₁(c u₂ + u₃ + λ), u̇₂ = u₂(u₁ + a u₃ + μ), u̇₃ = u₃(b u₁ + u₂ + ν),
/// subject to a b c = −1 and ν = μ b − λ a b.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lv1Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl Lv1Params {
    /// Validates the two algebraic constraints to [`PARAM_TOL`].
    ///
    /// All six values are supplied by the caller and checked, rather than
    /// deriving ν from the others.
    pub fn new(a: f64, b: f64, c: f64, lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        let abc = a * b * c;
        if (abc + 1.0).abs() > PARAM_TOL {
            return Err(Error::Constraint(format!(
                "require a*b*c = -1, got a*b*c = {abc}"
            )));
        }
        let nu_expected = mu * b - lambda * a * b;
        if (nu - nu_expected).abs() > PARAM_TOL {
            return Err(Error::Constraint(format!(
                "require nu = mu*b - lambda*a*b = {nu_expected}, got nu = {nu}"
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            lambda,
            mu,
            nu,
        })
    }
}

/// A conserved quantity with closed-form value and gradient.
pub struct InvariantObservable {
    label: &'static str,
    eval: Box<dyn Fn(&State) -> Result<f64> + Send + Sync>,
    grad: Box<dyn Fn(&State) -> Result<State> + Send + Sync>,
}

impl InvariantObservable {
    pub fn label(&self) -> &'static str {
        self.label
    }

    pub fn eval(&self, u: &State) -> Result<f64> {
        (self.eval)(u)
    }

    pub fn grad(&self, u: &State) -> Result<State> {
        (self.grad)(u)
    }
}

type PoissonMap = Box<dyn Fn(&State) -> DMatrix<f64> + Send + Sync>;

/// A quadratic system together with its two invariants and Poisson matrices.
pub struct ModelBundle {
    pub name: &'static str,
    pub system: QuadraticSystem,
    pub h1: InvariantObservable,
    pub h2: InvariantObservable,
    j1: PoissonMap,
    j2: PoissonMap,
}

/// Residual norms of the four structural identities at one state.
#[derive(Clone, Copy, Debug)]
pub struct StructureResiduals {
    /// ‖J₁ ∇H₁‖ — H₁ is a Casimir of J₁.
    pub casimir_h1: f64,
    /// ‖J₂ ∇H₂‖ — H₂ is a Casimir of J₂.
    pub casimir_h2: f64,
    /// ‖J₁ ∇H₂ − f‖.
    pub field_via_j1: f64,
    /// ‖J₂ ∇H₁ − f‖.
    pub field_via_j2: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        self.casimir_h1
            .max(self.casimir_h2)
            .max(self.field_via_j1)
            .max(self.field_via_j2)
    }
}

impl ModelBundle {
    /// The Poisson matrix J₁ at u.
    pub fn j1(&self, u: &State) -> DMatrix<f64> {
        (self.j1)(u)
    }

    /// The Poisson matrix J₂ at u.
    pub fn j2(&self, u: &State) -> DMatrix<f64> {
        (self.j2)(u)
    }

    /// Evaluates the four identity residuals at a strictly positive state.
    pub fn structure_residuals(&self, u: &State) -> Result<StructureResiduals> {
        require_positive(u)?;
        let f = self.system.field(u)?;
        let g1 = self.h1.grad(u)?;
        let g2 = self.h2.grad(u)?;
        let j1 = self.j1(u);
        let j2 = self.j2(u);
        Ok(StructureResiduals {
            casimir_h1: (&j1 * &g1).norm(),
            casimir_h2: (&j2 * &g2).norm(),
            field_via_j1: (j1 * g2 - &f).norm(),
            field_via_j2: (j2 * g1 - f).norm(),
        })
    }
}

fn require_positive(u: &State) -> Result<()> {
    for (index, &value) in u.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositive { index, value });
        }
    }
    Ok(())
}

fn require_positive_at(u: &State, indices: &[usize]) -> Result<()> {
    for &index in indices {
        let value = u[index];
        if !(value > 0.0) {
            return Err(Error::NonPositive { index, value });
        }
    }
    Ok(())
}

fn check_dim3(u: &State) -> Result<()> {
    if u.len() == 3 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: 3,
            actual: u.len(),
        })
    }
}

/// Skew matrix from the three independent upper-triangle entries.
fn skew3(p: f64, q: f64, r: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, p, q, -p, 0.0, r, -q, -r, 0.0])
}

/// Builds the first bi-Hamiltonian model from validated parameters.
///
/// H₁ = a b ln u₁ − b ln u₂ + ln u₃ and
/// H₂ = a b u₁ + u₂ − a u₃ + ν ln u₂ − μ ln u₃.
pub fn build_lv1(p: Lv1Params) -> Result<ModelBundle> {
    let Lv1Params {
        a,
        b,
        c,
        lambda,
        mu,
        nu,
    } = p;
    let interaction = DMatrix::from_row_slice(3, 3, &[0.0, c, 1.0, 1.0, 0.0, a, b, 1.0, 0.0]);
    let system = QuadraticSystem::lotka_volterra(&[lambda, mu, nu], &interaction)?;

    let h1 = InvariantObservable {
        label: "H1",
        eval: Box::new(move |u| {
            check_dim3(u)?;
            require_positive(u)?;
            Ok(a * b * u[0].ln() - b * u[1].ln() + u[2].ln())
        }),
        grad: Box::new(move |u| {
            check_dim3(u)?;
            require_positive(u)?;
            Ok(state(&[a * b / u[0], -b / u[1], 1.0 / u[2]]))
        }),
    };
    let h2 = InvariantObservable {
        label: "H2",
        eval: Box::new(move |u| {
            check_dim3(u)?;
            require_positive_at(u, &[1, 2])?;
            Ok(a * b * u[0] + u[1] - a * u[2] + nu * u[1].ln() - mu * u[2].ln())
        }),
        grad: Box::new(move |u| {
            check_dim3(u)?;
            require_positive_at(u, &[1, 2])?;
            Ok(state(&[a * b, 1.0 + nu / u[1], -a - mu / u[2]]))
        }),
    };

    let j1: PoissonMap = Box::new(move |u| {
        skew3(c * u[0] * u[1], b * c * u[0] * u[2], -u[1] * u[2])
    });
    let j2: PoissonMap = Box::new(move |u| {
        skew3(
            c * u[0] * u[1] * (a * u[2] + mu),
            c * u[0] * u[2] * (u[1] + nu),
            u[0] * u[1] * u[2],
        )
    });

    Ok(ModelBundle {
        name: "lv1",
        system,
        h1,
        h2,
        j1,
        j2,
    })
}

/// Builds the reversible circulant model
/// u̇₁ = u₁(u₂ − u₃), u̇₂ = u₂(u₃ − u₁), u̇₃ = u₃(u₁ − u₂),
/// with H₁ = u₁ + u₂ + u₃ and H₂ = u₁ u₂ u₃.
pub fn build_lv2() -> ModelBundle {
    let interaction =
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0]);
    let system = QuadraticSystem::lotka_volterra(&[0.0; 3], &interaction)
        .expect("fixed 3x3 coefficients are consistent");

    let h1 = InvariantObservable {
        label: "H1",
        eval: Box::new(|u| {
            check_dim3(u)?;
            Ok(u[0] + u[1] + u[2])
        }),
        grad: Box::new(|u| {
            check_dim3(u)?;
            Ok(state(&[1.0, 1.0, 1.0]))
        }),
    };
    let h2 = InvariantObservable {
        label: "H2",
        eval: Box::new(|u| {
            check_dim3(u)?;
            Ok(u[0] * u[1] * u[2])
        }),
        grad: Box::new(|u| {
            check_dim3(u)?;
            Ok(state(&[u[1] * u[2], u[0] * u[2], u[0] * u[1]]))
        }),
    };

    let j1: PoissonMap = Box::new(|_| skew3(-1.0, 1.0, -1.0));
    let j2: PoissonMap = Box::new(|u| skew3(u[0] * u[1], -u[0] * u[2], u[1] * u[2]));

    ModelBundle {
        name: "lv2",
        system,
        h1,
        h2,
        j1,
        j2,
    }
}

/// Parameters of the standard benchmark configuration of the first model.
pub fn lv1_benchmark_params() -> Lv1Params {
    Lv1Params::new(-1.0, -1.0, -1.0, 0.0, 1.0, -1.0)
        .expect("benchmark parameters satisfy the constraints")
}

/// The first model at its benchmark parameters.
pub fn lv1_benchmark() -> ModelBundle {
    build_lv1(lv1_benchmark_params()).expect("benchmark parameters are valid")
}

/// Benchmark initial condition for the first model.
pub fn lv1_benchmark_initial() -> State {
    state(&[1.0, 1.9, 0.5])
}

/// Benchmark initial condition for the reversible model.
pub fn lv2_benchmark_initial() -> State {
    state(&[0.3, 0.3, 0.4])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_positive(rng: &mut impl Rng) -> State {
        state(&[
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
        ])
    }

    #[test]
    fn benchmark_params_are_accepted() {
        let p = lv1_benchmark_params();
        assert_eq!(p.a * p.b * p.c, -1.0);
        assert_eq!(p.nu, p.mu * p.b - p.lambda * p.a * p.b);
    }

    #[test]
    fn abc_constraint_is_enforced() {
        assert!(matches!(
            Lv1Params::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn nu_constraint_is_enforced() {
        // abc = -1 holds but nu should be -1
        assert!(matches!(
            Lv1Params::new(-1.0, -1.0, -1.0, 0.0, 1.0, 0.5),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn lv1_invariants_reference_values() {
        let m = lv1_benchmark();
        let u = lv1_benchmark_initial();
        // ab = 1, b = -1: H1 = ln u1 + ln u2 + ln u3 = ln 0.95
        assert_abs_diff_eq!(
            m.h1.eval(&u).unwrap(),
            -0.051293294387550536,
            epsilon = 1e-15
        );
        // H2 = u1 + u2 + u3 - ln u2 - ln u3
        assert_abs_diff_eq!(m.h2.eval(&u).unwrap(), 3.4512932943875505, epsilon = 1e-14);
        assert_abs_diff_eq!(
            m.h1.eval(&state(&[1.0, 1.0, 1.0])).unwrap(),
            0.0,
            epsilon = 0.0
        );
    }

    #[test]
    fn lv2_invariants_reference_values() {
        let m = build_lv2();
        let u = lv2_benchmark_initial();
        assert_abs_diff_eq!(m.h1.eval(&u).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.h2.eval(&u).unwrap(), 0.036, epsilon = 1e-15);
        assert_eq!(m.h2.eval(&state(&[1.0, 1.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn log_terms_reject_non_positive_input() {
        let m = lv1_benchmark();
        assert!(matches!(
            m.h1.eval(&state(&[0.0, 1.0, 1.0])),
            Err(Error::NonPositive { index: 0, .. })
        ));
        assert!(m.h1.grad(&state(&[1.0, -1.0, 1.0])).is_err());
        // H2 has logs only in u2, u3
        assert!(m.h2.eval(&state(&[-1.0, 1.0, 1.0])).is_ok());
        assert!(m.h2.eval(&state(&[1.0, 0.0, 1.0])).is_err());
        // the reversible model has no logs at all
        let lv2 = build_lv2();
        assert!(lv2.h2.eval(&state(&[0.5, -1.0, 2.0])).is_ok());
    }

    #[test]
    fn poisson_matrices_are_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [lv1_benchmark(), build_lv2()] {
            for _ in 0..20 {
                let u = random_positive(&mut rng);
                for j in [m.j1(&u), m.j2(&u)] {
                    assert_eq!((&j + j.transpose()).norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn structure_residuals_at_reference_points() {
        let lv2 = build_lv2();
        let r = lv2
            .structure_residuals(&lv2_benchmark_initial())
            .unwrap();
        assert!(r.max() <= 1e-14, "lv2 residuals {r:?}");

        let lv1 = lv1_benchmark();
        let r = lv1
            .structure_residuals(&lv1_benchmark_initial())
            .unwrap();
        assert!(r.max() <= 1e-12, "lv1 residuals {r:?}");
    }

    #[test]
    fn structure_residuals_hold_at_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [lv1_benchmark(), build_lv2()] {
            for _ in 0..1000 {
                let u = random_positive(&mut rng);
                let r = m.structure_residuals(&u).unwrap();
                assert!(r.max() <= 1e-12, "{} residuals {r:?} at {u:?}", m.name);
            }
        }
    }

    #[test]
    fn structure_residuals_require_positive_state() {
        let m = build_lv2();
        assert!(matches!(
            m.structure_residuals(&state(&[0.3, 0.0, 0.4])),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn lv2_is_a_nambu_system() {
        // f = ∇H1 × ∇H2
        let m = build_lv2();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let u = random_positive(&mut rng);
            let g1 = m.h1.grad(&u).unwrap();
            let g2 = m.h2.grad(&u).unwrap();
            let cross = state(&[
                g1[1] * g2[2] - g1[2] * g2[1],
                g1[2] * g2[0] - g1[0] * g2[2],
                g1[0] * g2[1] - g1[1] * g2[0],
            ]);
            let f = m.system.field(&u).unwrap();
            assert!((cross - f).norm() <= 1e-12);
        }
    }

    #[test]
    fn lv2_field_is_divergence_free() {
        let m = build_lv2();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let u = random_positive(&mut rng);
            let jac = m.system.jacobian(&u).unwrap();
            assert!(jac.trace().abs() <= 1e-14);
        }
    }

    #[test]
    fn lv2_is_reversible() {
        // rho = diag(-1,-1,-1): rho f(u) + f(rho u) = 0
        let m = build_lv2();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let u = random_positive(&mut rng);
            let f = m.system.field(&u).unwrap();
            let f_neg = m.system.field(&(-&u)).unwrap();
            assert!((-&f + f_neg).norm() <= 1e-14);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-6;
        for m in [lv1_benchmark(), build_lv2()] {
            for obs in [&m.h1, &m.h2] {
                for _ in 0..50 {
                    let u = random_positive(&mut rng);
                    let grad = obs.grad(&u).unwrap();
                    let mut fd = state(&[0.0, 0.0, 0.0]);
                    for j in 0..3 {
                        let mut up = u.clone();
                        let mut dn = u.clone();
                        up[j] += h;
                        dn[j] -= h;
                        fd[j] = (obs.eval(&up).unwrap() - obs.eval(&dn).unwrap()) / (2.0 * h);
                    }
                    let rel = (&grad - fd).norm() / grad.norm().max(1.0);
                    assert!(rel <= 1e-6, "{} {} gradient off by {rel}", m.name, obs.label());
                }
            }
        }
    }
}
