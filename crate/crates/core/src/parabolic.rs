//! Implicit Euler (dG(0) in time, P1 in space) state and adjoint solvers on
//! the fixed horizon `[0, 1]`, for a physical horizon `T`.
//!
//! State: `(M + τ_j T (A + αM)) ζ_j = M ζ_{j-1} + τ_j T C v_j`, `ζ_0 = Π y0`.
//! Adjoint: `(M + τ_j T (A + αM)) φ_j = M φ_{j+1}`, `φ_{N+1}` the terminal datum.
//! `M`, `A` act on interior nodes; `C` maps all-node controls to interior
//! test functionals.

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, l2_norm_space, l2_project_with};
use crate::field::{NodeScope, SpaceTimeField};
use crate::linalg::{SpdSolver, DEFAULT_FACTOR_CAP};
use crate::mesh::{Mesh, TimeGrid};
use crate::problem::ProblemSpec;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

#[derive(Debug, Clone)]
pub struct Discretization<R> {
    pub mesh: Mesh<R>,
    pub grid: TimeGrid<R>,
    pub mass_all: SparseSymMatrix<R>,
    pub mass_int: SparseSymMatrix<R>,
    pub stiffness_int: SparseSymMatrix<R>,
    /// Interior rows of `mass_all`.
    pub coupling: CsrMatrix<R>,
    /// Largest Cholesky factor (in stored entries) before falling back to CG.
    pub factor_cap: usize,
}

impl<R: Real> Discretization<R> {
    pub fn new(mesh: Mesh<R>, grid: TimeGrid<R>) -> Result<Self> {
        let mass_all = assemble_mass(&mesh);
        let stiffness_all = assemble_stiffness(&mesh);
        let mass_int = mass_all.restrict(&mesh.interior_nodes, &mesh.interior_index);
        let stiffness_int = stiffness_all.restrict(&mesh.interior_nodes, &mesh.interior_index);
        let all_map: Vec<Option<usize>> = (0..mesh.num_nodes()).map(Some).collect();
        let coupling = mass_all.select(&mesh.interior_nodes, &all_map, mesh.num_nodes());
        Ok(Discretization {
            mesh,
            grid,
            mass_all,
            mass_int,
            stiffness_int,
            coupling,
            factor_cap: DEFAULT_FACTOR_CAP,
        })
    }

    pub fn uniform(n_div: usize, n_steps: usize) -> Result<Self> {
        Self::new(crate::mesh::build_uniform_mesh(n_div)?, crate::mesh::build_uniform_timegrid(n_steps)?)
    }

    pub fn n_interior(&self) -> usize {
        self.mesh.num_interior()
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    /// `ζ_{h,0}`: interior L² projection of `y0`.
    pub fn project_y0(&self, spec: &ProblemSpec<R>) -> Vec<R> {
        self.project_interior(|x| spec.y0.eval(x))
    }

    /// `Π y_Ω` on interior nodes.
    pub fn project_target(&self, spec: &ProblemSpec<R>) -> Vec<R> {
        self.project_interior(|x| spec.y_target.eval(x))
    }

    fn project_interior(&self, f: impl Fn([R; 2]) -> R) -> Vec<R> {
        l2_project_with(&f, &self.mesh, &self.mass_all, NodeScope::InteriorNodes)
            .expect("interior mass matrix is SPD")
    }

    pub fn zero_control(&self) -> SpaceTimeField<R> {
        SpaceTimeField::zeros(self.grid.clone(), NodeScope::AllNodes, self.n_nodes())
    }

    pub fn zero_interior_field(&self) -> SpaceTimeField<R> {
        SpaceTimeField::zeros(self.grid.clone(), NodeScope::InteriorNodes, self.n_interior())
    }

    /// `M`-norm of an interior vector.
    pub fn norm_int(&self, c: &[R]) -> R {
        l2_norm_space(c, &self.mass_int).expect("mass matrix is SPD")
    }
}

/// Factorized step matrices `M + τ_j T (A + αM)` for one horizon.
#[derive(Debug, Clone)]
pub struct StepOperator<R> {
    pub horizon: R,
    pub alpha: R,
    solvers: Vec<SpdSolver<R>>,
    /// `step_solver[j]` indexes `solvers`; equal steps share a factor.
    step_solver: Vec<usize>,
}

impl<R: Real> StepOperator<R> {
    pub fn new(horizon: R, alpha: R, disc: &Discretization<R>) -> Result<Self> {
        if !(horizon > R::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidHorizon(horizon.to_f64_lossy()));
        }
        let mut distinct: Vec<R> = Vec::new();
        let mut solvers = Vec::new();
        let mut step_solver = Vec::with_capacity(disc.n_steps());
        for &tau in &disc.grid.tau {
            let k = match distinct.iter().position(|&t| t == tau) {
                Some(k) => k,
                None => {
                    let scale = tau * horizon;
                    let reaction = disc.mass_int.linear_combination(R::one() + scale * alpha, &disc.stiffness_int, scale);
                    solvers.push(SpdSolver::new(reaction, disc.factor_cap)?);
                    distinct.push(tau);
                    distinct.len() - 1
                }
            };
            step_solver.push(k);
        }
        Ok(StepOperator { horizon, alpha, solvers, step_solver })
    }

    /// Solves `K_j x = b` in place.
    pub fn solve_step(&self, j: usize, b: &mut [R]) -> Result<()> {
        self.solvers[self.step_solver[j]].solve_in_place(b)
    }

    /// Forward sweep `K_j ζ_j = M ζ_{j-1} + src_j`, `ζ_0 = initial`.
    ///
    /// `source(j, buf)` adds the source of step `j` into `buf`;
    /// `visit(j, ζ_j)` sees every new slice. Returns `ζ_N`.
    pub fn forward(
        &self,
        disc: &Discretization<R>,
        initial: &[R],
        mut source: impl FnMut(usize, &mut [R]),
        mut visit: impl FnMut(usize, &[R]),
    ) -> Result<Vec<R>> {
        let mut prev = initial.to_vec();
        let mut rhs = vec![R::zero(); prev.len()];
        for j in 0..disc.n_steps() {
            disc.mass_int.mul_vec_into(&prev, &mut rhs);
            source(j, &mut rhs);
            self.solve_step(j, &mut rhs)?;
            visit(j, &rhs);
            std::mem::swap(&mut prev, &mut rhs);
        }
        Ok(prev)
    }

    /// Backward sweep `K_j φ_j = M φ_{j+1} + src_j` for `j = N, ..., 1`, with
    /// `φ_{N+1} = terminal`. Returns `φ_1`.
    pub fn backward(
        &self,
        disc: &Discretization<R>,
        terminal: &[R],
        mut source: impl FnMut(usize, &mut [R]),
        mut visit: impl FnMut(usize, &[R]),
    ) -> Result<Vec<R>> {
        let mut next = terminal.to_vec();
        let mut rhs = vec![R::zero(); next.len()];
        for j in (0..disc.n_steps()).rev() {
            disc.mass_int.mul_vec_into(&next, &mut rhs);
            source(j, &mut rhs);
            self.solve_step(j, &mut rhs)?;
            visit(j, &rhs);
            std::mem::swap(&mut next, &mut rhs);
        }
        Ok(next)
    }

    /// Adds `τ_j T C v` to `buf`.
    pub fn add_control_source(&self, disc: &Discretization<R>, j: usize, v: &[R], buf: &mut [R]) {
        let scale = disc.grid.tau[j] * self.horizon;
        for (i, b) in buf.iter_mut().enumerate() {
            let mut s = R::zero();
            for (k, m) in disc.coupling.row(i) {
                s += m * v[k];
            }
            *b += scale * s;
        }
    }
}

/// Discrete state: initial slice and the `N_τ` computed slices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<R> {
    pub initial: Vec<R>,
    pub field: SpaceTimeField<R>,
}

fn check_control<R: Real>(v: &SpaceTimeField<R>, disc: &Discretization<R>) -> Result<()> {
    if v.n_steps() != disc.n_steps() {
        return Err(Error::DimensionMismatch { expected: disc.n_steps(), got: v.n_steps() });
    }
    if v.scope != NodeScope::AllNodes || v.n_nodes != disc.n_nodes() {
        return Err(Error::DimensionMismatch { expected: disc.n_nodes(), got: v.n_nodes });
    }
    Ok(())
}

/// Forward solve with a prepared operator and explicit initial slice.
pub fn solve_state_with<R: Real>(
    op: &StepOperator<R>,
    v: &SpaceTimeField<R>,
    initial: &[R],
    disc: &Discretization<R>,
) -> Result<StateTrajectory<R>> {
    check_control(v, disc)?;
    let mut field = disc.zero_interior_field();
    op.forward(
        disc,
        initial,
        |j, buf| op.add_control_source(disc, j, v.step(j), buf),
        |j, z| field.step_mut(j).copy_from_slice(z),
    )?;
    Ok(StateTrajectory { initial: initial.to_vec(), field })
}

/// Discrete state for horizon `T` and control `v` (bounds are not enforced).
pub fn solve_state<R: Real>(
    horizon: R,
    v: &SpaceTimeField<R>,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
) -> Result<StateTrajectory<R>> {
    let op = StepOperator::new(horizon, spec.alpha, disc)?;
    solve_state_with(&op, v, &disc.project_y0(spec), disc)
}

/// Adjoint slices `φ_1..φ_N` for the terminal datum `φ_{N+1} = terminal`.
pub fn solve_adjoint_with<R: Real>(
    op: &StepOperator<R>,
    terminal: &[R],
    disc: &Discretization<R>,
) -> Result<SpaceTimeField<R>> {
    if terminal.len() != disc.n_interior() {
        return Err(Error::DimensionMismatch { expected: disc.n_interior(), got: terminal.len() });
    }
    let mut field = disc.zero_interior_field();
    op.backward(disc, terminal, |_, _| {}, |j, p| field.step_mut(j).copy_from_slice(p))?;
    Ok(field)
}

pub fn solve_adjoint<R: Real>(
    horizon: R,
    terminal: &[R],
    disc: &Discretization<R>,
    alpha: R,
) -> Result<SpaceTimeField<R>> {
    let op = StepOperator::new(horizon, alpha, disc)?;
    solve_adjoint_with(&op, terminal, disc)
}

/// `ζ_σ(1)`, the last computed slice.
pub fn terminal_value<R: Real>(state: &SpaceTimeField<R>) -> Vec<R> {
    assert!(state.n_steps() > 0, "state has no time slices");
    state.step(state.n_steps() - 1).to_vec()
}

/// `H(ζ) = ½‖ζ - Π y_Ω‖²_M - λ²/2`.
pub fn constraint_value<R: Real>(terminal: &[R], spec: &ProblemSpec<R>, disc: &Discretization<R>) -> R {
    let target = disc.project_target(spec);
    let diff: Vec<R> = terminal.iter().zip(&target).map(|(&a, &b)| a - b).collect();
    let half = R::lit(0.5);
    half * disc.mass_int.quadratic_form(&diff) - half * spec.lambda * spec.lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example(n_div: usize, m: usize) -> (Discretization<f64>, ProblemSpec<f64>) {
        (Discretization::uniform(n_div, m).unwrap(), ProblemSpec::paper_example())
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let (disc, mut spec) = example(4, 3);
        spec.y0 = crate::functions::DataFunction::Zero;
        let st = solve_state(0.5, &disc.zero_control(), &spec, &disc).unwrap();
        assert!(st.field.as_slice().iter().all(|&z| z == 0.0));
        assert!(terminal_value(&st.field).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn single_node_scalar_step() {
        let (disc, mut spec) = example(2, 1);
        spec.y0 = crate::functions::DataFunction::Zero;
        spec.alpha = 0.0;
        let t = 0.7;
        let v = SpaceTimeField::constant(disc.grid.clone(), NodeScope::AllNodes, 9, 1.0);
        let st = solve_state(t, &v, &spec, &disc).unwrap();
        let m = disc.mass_int.get(0, 0);
        let a = disc.stiffness_int.get(0, 0);
        let c: f64 = disc.coupling.row(0).map(|(_, x)| x).sum();
        assert_relative_eq!(st.field.step(0)[0], t * c / (m + t * a), epsilon = 1e-14);
    }

    #[test]
    fn free_decay_is_monotone() {
        let (disc, spec) = example(8, 10);
        for t in [0.01, 0.3, 5.0] {
            let st = solve_state(t, &disc.zero_control(), &spec, &disc).unwrap();
            let mut prev = disc.norm_int(&st.initial);
            for z in st.field.steps() {
                let n = disc.norm_int(z);
                assert!(n <= prev + 1e-14);
                prev = n;
            }
        }
    }

    #[test]
    fn invalid_horizon() {
        let (disc, spec) = example(3, 2);
        assert!(matches!(solve_state(0.0, &disc.zero_control(), &spec, &disc), Err(Error::InvalidHorizon(_))));
        assert!(matches!(solve_adjoint(-1.0, &[0.0; 4], &disc, 0.0), Err(Error::InvalidHorizon(_))));
    }

    #[test]
    fn zero_terminal_gives_zero_adjoint() {
        let (disc, _) = example(4, 3);
        let phi = solve_adjoint(0.3, &[0.0; 9], &disc, 0.2).unwrap();
        assert!(phi.as_slice().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn constraint_value_examples() {
        let (disc, spec) = example(4, 1);
        let target = disc.project_target(&spec);
        assert_relative_eq!(constraint_value(&target, &spec, &disc), -0.005, epsilon = 1e-15);
        // a field at distance exactly λ
        let ones = vec![1.0; disc.n_interior()];
        let scale = spec.lambda / disc.norm_int(&ones);
        let on_sphere: Vec<f64> = ones.iter().map(|v| v * scale).collect();
        assert!(constraint_value(&on_sphere, &spec, &disc).abs() < 1e-15);
    }
}
