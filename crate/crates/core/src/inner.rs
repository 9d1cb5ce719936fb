//! Fixed-horizon distance minimization
//! `min ½‖ζ_σ(1; T, v) - Π y_Ω‖²_M` over `a <= v <= b`.
//!
//! The reduced objective is a convex quadratic in the control coefficients.
//! It is minimized by conditional gradient steps (the linear minimization
//! over the box returns a bang-bang vertex) with exact line search,
//! interleaved with projected-gradient steps once conditional-gradient steps
//! stop reaching their vertex. Only terminal states are carried between
//! iterations; the full state and adjoint are recomputed once at the end.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{NodeScope, SpaceTimeField};
use crate::parabolic::{solve_adjoint_with, solve_state_with, Discretization, StateTrajectory, StepOperator};
use crate::problem::ProblemSpec;
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerOptions<R> {
    /// Bound on the certified suboptimality of the reduced objective.
    pub tol: R,
    /// Cap on conditional-gradient steps.
    pub max_cg_steps: usize,
    /// Interleave projected-gradient steps when conditional-gradient steps stall.
    pub polish: bool,
    pub max_pg_steps: usize,
}

impl<R: Real> Default for InnerOptions<R> {
    fn default() -> Self {
        InnerOptions { tol: R::lit(1e-9), max_cg_steps: 200, polish: true, max_pg_steps: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolveResult<R> {
    pub horizon: R,
    pub v_opt: SpaceTimeField<R>,
    pub state: StateTrajectory<R>,
    /// Adjoint with terminal datum `ζ_N - Π y_Ω` (no multiplier scaling).
    pub adjoint: SpaceTimeField<R>,
    /// `ζ_N - Π y_Ω`.
    pub terminal_residual: Vec<R>,
    /// `‖ζ_N - Π y_Ω‖_M`
    pub distance: R,
    /// `distance - λ`
    pub delta: R,
    /// Conditional-gradient duality gap at `v_opt`.
    pub gap: R,
    pub cg_steps: usize,
    pub pg_steps: usize,
    pub converged: bool,
    /// Reduced objective before each accepted step and at the end.
    pub objective_history: Vec<R>,
}

impl<R: Real> InnerSolveResult<R> {
    pub fn objective(&self) -> R {
        R::lit(0.5) * self.distance * self.distance
    }
}

/// Gradient functional of step `j`: `τ_j T Cᵀ φ_j`, written into `out`.
fn gradient_functional<R: Real>(disc: &Discretization<R>, horizon: R, j: usize, phi: &[R], out: &mut [R]) {
    disc.coupling.mul_transpose_vec_into(phi, out);
    let scale = disc.grid.tau[j] * horizon;
    out.iter_mut().for_each(|g| *g *= scale);
}

/// Exact gradient of `v ↦ ½‖ζ_σ(1; T, v) - Π y_Ω‖²_M` with respect to the
/// control coefficients.
pub fn reduced_gradient<R: Real>(
    horizon: R,
    v: &SpaceTimeField<R>,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
) -> Result<SpaceTimeField<R>> {
    let op = StepOperator::new(horizon, spec.alpha, disc)?;
    let state = solve_state_with(&op, v, &disc.project_y0(spec), disc)?;
    let target = disc.project_target(spec);
    let residual = sub(state.field.step(disc.n_steps() - 1), &target);
    let mut grad = disc.zero_control();
    op.backward(disc, &residual, |_, _| {}, |j, phi| gradient_functional(disc, horizon, j, phi, grad.step_mut(j)))?;
    Ok(grad)
}

fn sub<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

fn initial_control<R: Real>(spec: &ProblemSpec<R>, disc: &Discretization<R>) -> SpaceTimeField<R> {
    SpaceTimeField::constant(disc.grid.clone(), NodeScope::AllNodes, disc.n_nodes(), spec.clip(R::zero()))
}

/// Minimum-distance control for horizon `T`, starting from `v0 = Π_[a,b](0)`.
pub fn solve_inner<R: Real>(
    horizon: R,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    opts: &InnerOptions<R>,
) -> Result<InnerSolveResult<R>> {
    solve_inner_from(horizon, spec, disc, opts, None)
}

/// As [`solve_inner`], warm-started from a feasible control `warm`.
pub fn solve_inner_from<R: Real>(
    horizon: R,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    opts: &InnerOptions<R>,
    warm: Option<&SpaceTimeField<R>>,
) -> Result<InnerSolveResult<R>> {
    let op = StepOperator::new(horizon, spec.alpha, disc)?;
    let z0 = disc.project_y0(spec);
    let target = disc.project_target(spec);
    let n_nodes = disc.n_nodes();
    let (a, b) = (spec.a, spec.b);
    let half = R::lit(0.5);

    let mut v = match warm {
        Some(w) => w.map(|x| spec.clip(x)),
        None => initial_control(spec, disc),
    };
    let zero_initial = vec![R::zero(); disc.n_interior()];
    let mut residual = {
        let terminal = op.forward(disc, &z0, |j, buf| op.add_control_source(disc, j, v.step(j), buf), |_, _| {})?;
        sub(&terminal, &target)
    };

    let mut direction = disc.zero_control();
    let mut grad = vec![R::zero(); n_nodes];
    let mut history = Vec::new();
    let (mut cg_steps, mut pg_steps) = (0usize, 0usize);
    let mut use_pg = false;
    // inverse curvature along the last direction, in the L²(Q₁) metric
    let mut pg_step_length: Option<R> = None;
    let mut gap;
    let converged;

    loop {
        let objective = half * disc.mass_int.quadratic_form(&residual);
        history.push(objective);

        // Gradient, vertex and duality gap in one backward sweep; the search
        // direction of the step chosen below is written into `direction`.
        let take_pg = use_pg && opts.polish && pg_steps < opts.max_pg_steps;
        let eta = pg_step_length.unwrap_or(R::one());
        gap = R::zero();
        let mut slope = R::zero();
        op.backward(
            disc,
            &residual,
            |_, _| {},
            |j, phi| {
                gradient_functional(disc, horizon, j, phi, &mut grad);
                let vj = v.step(j);
                let dj = direction.step_mut(j);
                let riesz_scale = eta * horizon;
                let ext = disc.mesh.extend_by_zero(phi);
                for k in 0..n_nodes {
                    let g = grad[k];
                    let vertex = if g > R::zero() {
                        a
                    } else if g < R::zero() {
                        b
                    } else {
                        vj[k]
                    };
                    gap += g * (vj[k] - vertex);
                    dj[k] = if take_pg {
                        // L² Riesz representative of the gradient is T φ_j
                        spec.clip(vj[k] - riesz_scale * ext[k]) - vj[k]
                    } else {
                        vertex - vj[k]
                    };
                    slope += g * dj[k];
                }
            },
        )?;

        if gap <= opts.tol || objective <= opts.tol {
            converged = true;
            break;
        }
        if cg_steps >= opts.max_cg_steps {
            converged = false;
            break;
        }

        // S d: terminal response to the direction, zero initial state
        let response = op.forward(
            disc,
            &zero_initial,
            |j, buf| op.add_control_source(disc, j, direction.step(j), buf),
            |_, _| {},
        )?;
        let curvature = disc.mass_int.quadratic_form(&response);
        if !(curvature > R::zero()) || !(slope < R::zero()) {
            if take_pg {
                use_pg = false;
                pg_steps += 1;
                continue;
            }
            converged = false;
            break;
        }
        let gamma = (-slope / curvature).min(R::one());
        for (vk, &dk) in v.as_mut_slice().iter_mut().zip(direction.as_slice()) {
            *vk = (*vk + gamma * dk).max(a).min(b);
        }
        for (r, &s) in residual.iter_mut().zip(&response) {
            *r += gamma * s;
        }
        let d_norm_sq: R = direction
            .steps()
            .zip(&disc.grid.tau)
            .map(|(d, &tau)| tau * disc.mass_all.quadratic_form(d))
            .sum();
        if d_norm_sq > R::zero() {
            pg_step_length = Some(d_norm_sq / curvature);
        }
        if take_pg {
            pg_steps += 1;
            use_pg = false;
        } else {
            cg_steps += 1;
            // a full step reached the vertex; otherwise alternate with a PG step
            use_pg = gamma < R::one();
        }
    }

    let state = solve_state_with(&op, &v, &z0, disc)?;
    let terminal_residual = sub(state.field.step(disc.n_steps() - 1), &target);
    let adjoint = solve_adjoint_with(&op, &terminal_residual, disc)?;
    let distance = disc.norm_int(&terminal_residual);
    history.push(half * distance * distance);
    Ok(InnerSolveResult {
        horizon,
        v_opt: v,
        state,
        adjoint,
        terminal_residual,
        distance,
        delta: distance - spec.lambda,
        gap,
        cg_steps,
        pg_steps,
        converged,
        objective_history: history,
    })
}

/// `δ(T) = min_v ‖ζ_σ(1; T, v) - Π y_Ω‖_M - λ`.
pub fn delta<R: Real>(horizon: R, spec: &ProblemSpec<R>, disc: &Discretization<R>, opts: &InnerOptions<R>) -> Result<R> {
    Ok(solve_inner(horizon, spec, disc, opts)?.delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<R> {
    pub horizon: R,
    pub delta: R,
    pub converged: bool,
    pub cg_steps: usize,
}

/// `count` equispaced horizons on `[t_start, t_end]` with their `δ(T)`.
/// Points are independent solves, evaluated on the current rayon pool.
pub fn value_function_sweep<R: Real>(
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    opts: &InnerOptions<R>,
    t_start: R,
    t_end: R,
    count: usize,
) -> Result<Vec<SweepPoint<R>>> {
    if count < 2 || !(t_start > R::zero()) || !(t_end > t_start) {
        return Err(crate::error::Error::InvalidArgument(format!(
            "sweep needs 0 < t_start < t_end and count >= 2, got [{t_start}, {t_end}] x {count}"
        )));
    }
    let step = (t_end - t_start) / R::from_usize_lossy(count - 1);
    (0..count)
        .into_par_iter()
        .map(|k| {
            let t = if k + 1 == count { t_end } else { t_start + step * R::from_usize_lossy(k) };
            let r = solve_inner(t, spec, disc, opts)?;
            Ok(SweepPoint { horizon: t, delta: r.delta, converged: r.converged, cg_steps: r.cg_steps })
        })
        .collect()
}

/// Gradient functionals of a solved inner problem, recomputed from its adjoint.
pub fn gradient_from_adjoint<R: Real>(result: &InnerSolveResult<R>, disc: &Discretization<R>) -> SpaceTimeField<R> {
    let mut grad = disc.zero_control();
    for j in 0..disc.n_steps() {
        gradient_functional(disc, result.horizon, j, result.adjoint.step(j), grad.step_mut(j));
    }
    grad
}

/// Count of coefficients with `|g| > threshold` whose value is not the
/// bound selected by the sign of `g`.
pub fn bang_bang_violations<R: Real>(
    v: &SpaceTimeField<R>,
    grad: &SpaceTimeField<R>,
    spec: &ProblemSpec<R>,
    threshold: R,
) -> usize {
    v.as_slice()
        .iter()
        .zip(grad.as_slice())
        .filter(|(&vk, &g)| (g > threshold && vk != spec.a) || (g < -threshold && vk != spec.b))
        .count()
}

/// `Σ_j τ_j d_jᵀ M d_j`, the squared L²(Q₁) norm of an all-node field.
pub fn control_norm_sq<R: Real>(d: &SpaceTimeField<R>, disc: &Discretization<R>) -> R {
    d.steps().zip(&disc.grid.tau).map(|(dj, &tau)| tau * disc.mass_all.quadratic_form(dj)).sum()
}

/// Euclidean inner product of two fields' coefficients.
pub fn coefficient_dot<R: Real>(x: &SpaceTimeField<R>, y: &SpaceTimeField<R>) -> R {
    dot(x.as_slice(), y.as_slice())
}
