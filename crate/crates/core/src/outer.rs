//! Optimal time as the root of the value function `δ(T)`, multiplier
//! recovery for the discrete first-order system and an empirical
//! quadratic-growth check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{NodeScope, SpaceTimeField};
use crate::inner::{
    bang_bang_violations, control_norm_sq, gradient_from_adjoint, solve_inner_from, InnerOptions, InnerSolveResult,
};
use crate::linalg::SpdSolver;
use crate::parabolic::{constraint_value, solve_state_with, Discretization, StepOperator};
use crate::problem::ProblemSpec;
use crate::scalar::{max_abs, Real};

/// Distances below this make the value-function derivative undefined.
const MIN_DISTANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterOptions<R> {
    pub t_init: R,
    pub t_max: R,
    /// Root tolerance on `|δ(T)|`.
    pub tol_t: R,
    pub max_newton: usize,
    /// Use a central difference of `δ` when the adjoint derivative is unavailable.
    pub fd_fallback: bool,
}

impl<R: Real> Default for OuterOptions<R> {
    fn default() -> Self {
        OuterOptions { t_init: R::lit(0.1), t_max: R::one(), tol_t: R::lit(1e-10), max_newton: 50, fd_fallback: true }
    }
}

impl<R: Real> OuterOptions<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_init > R::zero() && self.t_init <= self.t_max) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < t_init <= t_max, got t_init = {}, t_max = {}",
                self.t_init, self.t_max
            )));
        }
        if !(self.tol_t > R::zero()) {
            return Err(Error::InvalidArgument("tol_t must be positive".into()));
        }
        Ok(())
    }
}

/// Multipliers of the discrete first-order system and its residuals.
#[derive(Debug, Clone)]
pub struct KktBundle<R> {
    pub mu: R,
    /// `φ_σ = -μ φ̂`, with `φ̂` the adjoint for terminal datum `ζ_N - Π y_Ω`.
    pub adjoint: SpaceTimeField<R>,
    /// `e_σ = T φ_σ`, recovered from the gradient functionals by mass solves.
    pub e_field: SpaceTimeField<R>,
    /// Relative residual of the backward equations and terminal condition.
    pub residual_adjoint: R,
    /// `max |e - T φ|`
    pub residual_v: R,
    /// `|Σ_j {τ_j a(ζ_j, φ_j) + τ_j ((α ζ_j - v_j), φ_j)} + 1|`
    pub residual_t: R,
    /// `|H(ζ_σ(1))|`
    pub residual_complementarity: R,
    /// Coefficients whose bound disagrees with the gradient sign.
    pub sign_violations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport<R> {
    pub t_opt: R,
    pub newton_steps: usize,
    pub total_cg_steps: usize,
    pub total_pg_steps: usize,
    pub delta_history: Vec<(R, R)>,
    pub newton_increments: Vec<R>,
    pub kkt: KktBundle<R>,
    pub inner: InnerSolveResult<R>,
}

/// `Σ_j τ_j [φ_jᵀ A ζ_j + α φ_jᵀ M ζ_j - φ_jᵀ C v_j]` for any adjoint `phi`.
pub fn horizon_functional<R: Real>(
    phi: &SpaceTimeField<R>,
    state: &SpaceTimeField<R>,
    v: &SpaceTimeField<R>,
    alpha: R,
    disc: &Discretization<R>,
) -> R {
    let mut total = R::zero();
    for j in 0..disc.n_steps() {
        let (p, z) = (phi.step(j), state.step(j));
        let a = disc.stiffness_int.bilinear(p, z);
        let m = disc.mass_int.bilinear(p, z);
        let c = disc.coupling.bilinear(p, v.step(j));
        total += disc.grid.tau[j] * (a + alpha * m - c);
    }
    total
}

/// `δ'(T)` by the envelope theorem, from a solved inner problem at `T`.
///
/// With `φ̂` the adjoint for terminal datum `ζ_N - Π y_Ω`,
/// `d/dT ½ dist² = -Σ_j τ_j [φ̂ᵀ A ζ + α φ̂ᵀ M ζ - φ̂ᵀ C v]`, so
/// `δ' = -(that functional) / dist`.
pub fn delta_derivative<R: Real>(inner: &InnerSolveResult<R>, disc: &Discretization<R>, spec: &ProblemSpec<R>) -> Result<R> {
    if !(inner.distance > R::lit(MIN_DISTANCE)) {
        return Err(Error::DegenerateDerivative(inner.distance.to_f64_lossy()));
    }
    let functional = horizon_functional(&inner.adjoint, &inner.state.field, &inner.v_opt, spec.alpha, disc);
    Ok(-functional / inner.distance)
}

/// Safeguarded Newton iteration on `δ(T) = 0`.
pub fn find_optimal_time<R: Real>(
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    opts: &OuterOptions<R>,
    inner_opts: &InnerOptions<R>,
) -> Result<SolveReport<R>> {
    opts.validate()?;
    spec.check_gate(disc)?;

    let mut history = Vec::new();
    let mut increments = Vec::new();
    let (mut total_cg, mut total_pg) = (0usize, 0usize);
    // bracket: δ(lo) > 0, δ(hi) <= 0
    let mut lo: Option<R> = None;
    let mut hi: Option<R> = None;
    let mut warm: Option<SpaceTimeField<R>> = None;
    let mut t = opts.t_init;
    let mut best: Option<InnerSolveResult<R>> = None;

    for step in 0..=opts.max_newton {
        let inner = solve_inner_from(t, spec, disc, inner_opts, warm.as_ref())?;
        total_cg += inner.cg_steps;
        total_pg += inner.pg_steps;
        let d = inner.delta;
        history.push((t, d));
        log::debug!("outer step {step}: T = {t}, delta = {d:e}, cg = {}", inner.cg_steps);

        if d > R::zero() {
            lo = Some(lo.map_or(t, |l: R| l.max(t)));
        } else {
            hi = Some(hi.map_or(t, |h: R| h.min(t)));
        }
        let is_best = best.as_ref().is_none_or(|b| d.abs() < b.delta.abs());

        if d.abs() <= opts.tol_t {
            let kkt = recover_multipliers(&inner, disc, spec)?;
            return Ok(SolveReport {
                t_opt: t,
                newton_steps: step,
                total_cg_steps: total_cg,
                total_pg_steps: total_pg,
                delta_history: history,
                newton_increments: increments,
                kkt,
                inner,
            });
        }
        if step == opts.max_newton {
            if is_best {
                best = Some(inner);
            }
            break;
        }

        if d > R::zero() && t >= opts.t_max {
            return Err(Error::InfeasibleHorizon { t_max: opts.t_max.to_f64_lossy(), delta: d.to_f64_lossy() });
        }

        let slope = match delta_derivative(&inner, disc, spec) {
            Ok(s) if s < R::zero() && s.is_finite() => Some(s),
            _ if opts.fd_fallback => fd_derivative(t, spec, disc, inner_opts, &inner)?.filter(|s| *s < R::zero()),
            _ => None,
        };
        let newton = slope.map(|s| t - d / s);
        let inside = |x: R| lo.map_or(x > R::zero(), |l| x > l) && hi.is_none_or(|h| x < h);
        let next = match (newton, lo, hi) {
            (Some(x), _, _) if inside(x) && x <= opts.t_max => x,
            (_, Some(l), Some(h)) => (l + h) * R::lit(0.5),
            // no upper end yet: expand toward t_max
            (_, Some(l), None) => (l + l).min(opts.t_max),
            // no lower end yet: contract toward zero
            (_, None, Some(h)) => h * R::lit(0.5),
            (_, None, None) => unreachable!("every evaluation sets one end of the bracket"),
        };
        if let (Some(l), Some(h)) = (lo, hi) {
            if h - l <= R::epsilon() * h {
                if is_best {
                    best = Some(inner);
                }
                break;
            }
        }
        increments.push(next - t);
        warm = Some(inner.v_opt.clone());
        if is_best {
            best = Some(inner);
        }
        t = next;
    }

    let best = best.expect("at least one evaluation");
    Err(Error::NonConvergence {
        steps: opts.max_newton,
        best_t: best.horizon.to_f64_lossy(),
        best_delta: best.delta.to_f64_lossy(),
    })
}

fn fd_derivative<R: Real>(
    t: R,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    inner_opts: &InnerOptions<R>,
    at: &InnerSolveResult<R>,
) -> Result<Option<R>> {
    let s = t * R::lit(1e-6);
    let plus = solve_inner_from(t + s, spec, disc, inner_opts, Some(&at.v_opt))?;
    let minus = solve_inner_from(t - s, spec, disc, inner_opts, Some(&at.v_opt))?;
    let slope = (plus.delta - minus.delta) / (s + s);
    Ok(slope.is_finite().then_some(slope))
}

/// Multipliers `(μ, φ, e)` at a root and the residuals of the discrete
/// first-order system.
pub fn recover_multipliers<R: Real>(
    inner: &InnerSolveResult<R>,
    disc: &Discretization<R>,
    spec: &ProblemSpec<R>,
) -> Result<KktBundle<R>> {
    let horizon = inner.horizon;
    let unit = horizon_functional(&inner.adjoint, &inner.state.field, &inner.v_opt, spec.alpha, disc);
    if !(unit > R::zero()) {
        return Err(Error::SignInconsistency(unit.to_f64_lossy()));
    }
    let mu = R::one() / unit;
    let adjoint = inner.adjoint.map(|p| -mu * p);
    let terminal: Vec<R> = inner.terminal_residual.iter().map(|&r| -mu * r).collect();

    // (i) K_j φ_j = M φ_{j+1}, φ_{N+1} = -μ (ζ_N - Π y_Ω)
    let k_matrix = disc
        .mass_int
        .linear_combination(R::one() + disc.grid.tau[0] * horizon * spec.alpha, &disc.stiffness_int, disc.grid.tau[0] * horizon);
    let mut residual_adjoint = R::zero();
    for j in 0..disc.n_steps() {
        let next = if j + 1 < disc.n_steps() { adjoint.step(j + 1) } else { &terminal[..] };
        let k_j = if disc.grid.tau[j] == disc.grid.tau[0] {
            k_matrix.clone()
        } else {
            let s = disc.grid.tau[j] * horizon;
            disc.mass_int.linear_combination(R::one() + s * spec.alpha, &disc.stiffness_int, s)
        };
        let lhs = k_j.mul_vec(adjoint.step(j));
        let rhs = disc.mass_int.mul_vec(next);
        let diff: Vec<R> = lhs.iter().zip(&rhs).map(|(&x, &y)| x - y).collect();
        let scale = max_abs(&rhs).max(R::min_positive_value());
        residual_adjoint = residual_adjoint.max(max_abs(&diff) / scale);
    }

    // (ii) e from the gradient functionals: interior rows of τ_j T Cᵀ φ̂_j equal
    // τ_j T M φ̂_j, so e_j = -μ M⁻¹ (g_j)_int / τ_j
    let grad = gradient_from_adjoint(inner, disc);
    let mass_solver = SpdSolver::new(disc.mass_int.clone(), disc.factor_cap)?;
    let mut e_int = disc.zero_interior_field();
    let mut residual_v = R::zero();
    for j in 0..disc.n_steps() {
        let mut e = disc.mesh.restrict(grad.step(j));
        mass_solver.solve_in_place(&mut e)?;
        let scale = -mu / disc.grid.tau[j];
        e.iter_mut().for_each(|x| *x *= scale);
        for (ek, &pk) in e.iter().zip(adjoint.step(j)) {
            residual_v = residual_v.max((*ek - horizon * pk).abs());
        }
        e_int.step_mut(j).copy_from_slice(&e);
    }
    let e_field = e_int.to_all_nodes(&disc.mesh);

    // (iii)
    let scaled = horizon_functional(&adjoint, &inner.state.field, &inner.v_opt, spec.alpha, disc);
    let residual_t = (scaled + R::one()).abs();

    // (iv)
    let h = constraint_value(inner.state.field.step(disc.n_steps() - 1), spec, disc);
    let sign_violations = bang_bang_violations(&inner.v_opt, &grad, spec, R::lit(10.0) * InnerOptions::<R>::default().tol);

    Ok(KktBundle {
        mu,
        adjoint,
        e_field,
        residual_adjoint,
        residual_v,
        residual_t,
        residual_complementarity: h.abs(),
        sign_violations,
    })
}

/// Smallest horizon in `(0, t_max]` at which the state driven by `v`
/// satisfies the terminal constraint, or `None` if there is none on the
/// scan grid.
pub fn first_feasible_time<R: Real>(
    v: &SpaceTimeField<R>,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    t_max: R,
    tol: R,
) -> Result<Option<R>> {
    const SCAN: usize = 200;
    let z0 = disc.project_y0(spec);
    let h_at = |t: R| -> Result<R> {
        let op = StepOperator::new(t, spec.alpha, disc)?;
        let st = solve_state_with(&op, v, &z0, disc)?;
        Ok(constraint_value(st.field.step(disc.n_steps() - 1), spec, disc))
    };
    let dt = t_max / R::from_usize_lossy(SCAN);
    let mut prev = R::zero();
    for k in 1..=SCAN {
        let t = dt * R::from_usize_lossy(k);
        if h_at(t)? <= R::zero() {
            let (mut a, mut b) = (prev, t);
            while b - a > tol {
                let mid = (a + b) * R::lit(0.5);
                if mid > R::zero() && h_at(mid)? <= R::zero() {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return Ok(Some(b));
        }
        prev = t;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample<R> {
    pub index: usize,
    /// `None` when no feasible horizon exists up to `t_max` (censored).
    pub t_first: Option<R>,
    /// `‖v - v*‖²_{L²(Q₁)}`
    pub control_dist_sq: R,
    /// `2 (T(v) - T*) / (‖v - v*‖² + (T(v) - T*)²)`
    pub ratio: Option<R>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheckSummary<R> {
    pub t_opt: R,
    pub samples: Vec<GrowthSample<R>>,
    pub censored: usize,
    /// Minimal ratio over uncensored samples: empirical growth constant.
    pub kappa_lower: Option<R>,
    /// Every uncensored sample has `T(v) >= T* - tol_t`.
    pub all_above: bool,
}

/// Growth sample for a given control.
pub fn growth_sample<R: Real>(
    index: usize,
    v: &SpaceTimeField<R>,
    report: &SolveReport<R>,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    t_max: R,
    tol: R,
) -> Result<GrowthSample<R>> {
    let diff = SpaceTimeField::from_steps(
        disc.grid.clone(),
        NodeScope::AllNodes,
        v.steps()
            .zip(report.inner.v_opt.steps())
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x - y).collect())
            .collect(),
    );
    let control_dist_sq = control_norm_sq(&diff, disc);
    let t_first = first_feasible_time(v, spec, disc, t_max, tol)?;
    let ratio = t_first.and_then(|tf| {
        let dt = tf - report.t_opt;
        let denom = control_dist_sq + dt * dt;
        (denom > R::zero() && control_dist_sq > R::zero()).then(|| R::lit(2.0) * dt / denom)
    });
    Ok(GrowthSample { index, t_first, control_dist_sq, ratio })
}

/// Samples uniformly random box controls and records their first feasible
/// horizons against `T*`.
pub fn growth_check<R: Real>(
    report: &SolveReport<R>,
    spec: &ProblemSpec<R>,
    disc: &Discretization<R>,
    samples: usize,
    rng_seed: u64,
    outer: &OuterOptions<R>,
) -> Result<GrowthCheckSummary<R>> {
    let bisection_tol = outer.tol_t.max(R::lit(1e-12));
    let results: Vec<Result<GrowthSample<R>>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(index as u64));
            let mut v = disc.zero_control();
            let (a, b) = (spec.a.to_f64_lossy(), spec.b.to_f64_lossy());
            v.as_mut_slice().iter_mut().for_each(|x| *x = R::lit(rng.gen_range(a..=b)));
            growth_sample(index, &v, report, spec, disc, outer.t_max, bisection_tol)
        })
        .collect();
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let censored = samples.iter().filter(|s| s.t_first.is_none()).count();
    let kappa_lower = samples.iter().filter_map(|s| s.ratio).fold(None, |m: Option<R>, r| Some(m.map_or(r, |m| m.min(r))));
    let all_above = samples
        .iter()
        .filter_map(|s| s.t_first)
        .all(|tf| tf >= report.t_opt - outer.tol_t);
    Ok(GrowthCheckSummary { t_opt: report.t_opt, samples, censored, kappa_lower, all_above })
}
