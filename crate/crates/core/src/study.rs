//! Refinement studies: optimal-time errors against a reference solve with
//! experimental orders of convergence, and manufactured-solution studies
//! of the state discretization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{interval_mean, l2_project_with, load_vector, nodal_averages};
use crate::field::NodeScope;
use crate::functions::Manufactured;
use crate::inner::InnerOptions;
use crate::outer::{find_optimal_time, OuterOptions};
use crate::parabolic::{Discretization, StepOperator};
use crate::problem::ProblemSpec;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMode {
    TimeRefinement,
    SpaceRefinement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig<R> {
    pub mode: StudyMode,
    /// `(M, n_div)` per row.
    pub sequence: Vec<(usize, usize)>,
    /// `(M_ref, n_div_ref)`.
    pub reference: (usize, usize),
    pub spec: ProblemSpec<R>,
    pub outer: OuterOptions<R>,
    pub inner: InnerOptions<R>,
    /// Previously computed reference time for `reference`; solved when absent.
    #[serde(default)]
    pub reference_time: Option<R>,
}

impl<R: Real> StudyConfig<R> {
    pub fn validate(&self) -> Result<()> {
        let (m_ref, n_ref) = self.reference;
        for &(m, n) in &self.sequence {
            let finer = match self.mode {
                StudyMode::TimeRefinement => m_ref > m,
                StudyMode::SpaceRefinement => n_ref > n,
            };
            if !finer {
                return Err(Error::InvalidArgument(format!(
                    "reference ({m_ref}, {n_ref}) is not finer than row ({m}, {n}) in the refined dimension"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocRow<R> {
    pub m: usize,
    /// Node count `(n_div + 1)²`.
    pub n: usize,
    pub t_sigma: R,
    pub abs_error: R,
    pub eoc: Option<R>,
    pub newton_steps: usize,
    pub cg_steps: usize,
    /// Inner solve at the root met its tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome<R> {
    pub mode: StudyMode,
    pub t_ref: R,
    pub rows: Vec<EocRow<R>>,
    /// Least-squares slope of `log abs_error` against `log` mesh size.
    pub fitted_slope: Option<R>,
}

/// Mesh size used by the EOC formulas: `τ = 1/M` or `h = √2 / (√N - 1)`.
pub fn refinement_size<R: Real>(mode: StudyMode, m: usize, n_nodes: usize) -> R {
    match mode {
        StudyMode::TimeRefinement => R::one() / R::from_usize_lossy(m),
        StudyMode::SpaceRefinement => R::SQRT_2() / (R::from_usize_lossy(n_nodes).sqrt() - R::one()),
    }
}

/// Pairwise orders `(log e_{i+1} - log e_i) / (log s_{i+1} - log s_i)`.
pub fn pairwise_eoc<R: Real>(sizes: &[R], errors: &[R]) -> Vec<R> {
    sizes
        .windows(2)
        .zip(errors.windows(2))
        .map(|(s, e)| (e[1].ln() - e[0].ln()) / (s[1].ln() - s[0].ln()))
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope<R: Real>(x: &[R], y: &[R]) -> Option<R> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = R::from_usize_lossy(x.len());
    let lx: Vec<R> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<R> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().copied().sum::<R>() / n;
    let my = ly.iter().copied().sum::<R>() / n;
    let sxy: R = lx.iter().zip(&ly).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: R = lx.iter().map(|&a| (a - mx) * (a - mx)).sum();
    (sxx > R::zero()).then(|| sxy / sxx)
}

/// Solves the reference and each row; rows are independent and run on the
/// current rayon pool, output order follows `cfg.sequence`.
pub fn run_study<R: Real>(cfg: &StudyConfig<R>) -> Result<StudyOutcome<R>> {
    cfg.validate()?;
    let t_ref = match cfg.reference_time {
        Some(t) => t,
        None => {
            let (m, n) = cfg.reference;
            let disc = Discretization::uniform(n, m)?;
            find_optimal_time(&cfg.spec, &disc, &cfg.outer, &cfg.inner)
                .map_err(|e| Error::StudyRow { row: usize::MAX, m, n_div: n, source: Box::new(e) })?
                .t_opt
        }
    };

    let solved: Vec<Result<EocRow<R>>> = cfg
        .sequence
        .par_iter()
        .enumerate()
        .map(|(row, &(m, n_div))| {
            let wrap = |e: Error| Error::StudyRow { row, m, n_div, source: Box::new(e) };
            let disc = Discretization::uniform(n_div, m).map_err(wrap)?;
            let report = find_optimal_time(&cfg.spec, &disc, &cfg.outer, &cfg.inner).map_err(wrap)?;
            Ok(EocRow {
                m,
                n: disc.n_nodes(),
                t_sigma: report.t_opt,
                abs_error: (report.t_opt - t_ref).abs(),
                eoc: None,
                newton_steps: report.newton_steps,
                cg_steps: report.total_cg_steps,
                converged: report.inner.converged,
            })
        })
        .collect();
    let mut rows = solved.into_iter().collect::<Result<Vec<_>>>()?;

    let sizes: Vec<R> = rows.iter().map(|r| refinement_size(cfg.mode, r.m, r.n)).collect();
    let errors: Vec<R> = rows.iter().map(|r| r.abs_error).collect();
    for (row, eoc) in rows.iter_mut().skip(1).zip(pairwise_eoc(&sizes, &errors)) {
        row.eoc = Some(eoc);
    }
    Ok(StudyOutcome { mode: cfg.mode, t_ref, rows, fitted_slope: loglog_slope(&sizes, &errors) })
}

/// Number of rows whose error exceeds the previous row's.
pub fn monotonicity_violations<R: Real>(rows: &[EocRow<R>]) -> usize {
    rows.windows(2).filter(|w| w[1].abs_error > w[0].abs_error).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStudyConfig<R> {
    /// `(M, n_div)` per level, coarse to fine.
    pub levels: Vec<(usize, usize)>,
    pub horizon: R,
    pub alpha: R,
    pub manufactured: Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateErrorRow<R> {
    pub m: usize,
    pub n_div: usize,
    pub tau: R,
    pub h: R,
    /// `‖ζ - ζ_σ‖_{L²(Q₁)}`
    pub l2_error: R,
    /// `max_i |ζ(x_i, 1) - ζ_σ(1)_i|` over interior nodes.
    pub terminal_sup_error: R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStudyOutcome<R> {
    pub rows: Vec<StateErrorRow<R>>,
    pub slope_tau: Option<R>,
    pub slope_h: Option<R>,
}

/// Discrete state error for one level. The source `I_σ v` is formed from
/// the separable structure of the manufactured control and the L²(Q₁) error
/// is integrated exactly in time, so no space-time field is stored.
pub fn state_error<R: Real>(
    m: usize,
    n_div: usize,
    horizon: R,
    alpha: R,
    mf: Manufactured,
) -> Result<StateErrorRow<R>> {
    let disc = Discretization::uniform(n_div, m)?;
    let op = StepOperator::new(horizon, alpha, &disc)?;
    let space = |x: [R; 2]| mf.space_profile(x);
    // v = w(x) (1/T + (2π² + α) s) for the sine-sine family; the spatial
    // factor of I_σ v is the nodal average of w
    let w_avg = nodal_averages(space, &disc.mesh, &disc.mass_all);
    let w_load = disc.mesh.restrict(&load_vector(&disc.mesh, space));
    let w_norm_sq = mf.space_profile_sq_norm::<R>();
    let initial: Vec<R> = l2_project_with(&space, &disc.mesh, &disc.mass_all, NodeScope::InteriorNodes)?
        .into_iter()
        .map(|c| c * mf.time_profile(R::zero()))
        .collect();
    let probe = [R::lit(0.5), R::lit(0.5)];
    let w_probe = mf.space_profile(probe);

    let mut source_buf = vec![R::zero(); disc.n_nodes()];
    let mut err_sq = R::zero();
    let terminal = op.forward(
        &disc,
        &initial,
        |j, buf| {
            let q_mean = if w_probe == R::zero() {
                R::zero()
            } else {
                interval_mean(|s| mf.control(probe, s, horizon, alpha) / w_probe, &disc.grid, j)
            };
            for (sb, &w) in source_buf.iter_mut().zip(&w_avg) {
                *sb = q_mean * w;
            }
            op.add_control_source(&disc, j, &source_buf, buf);
        },
        |j, z| {
            let (s0, s1, tau) = (disc.grid.t[j], disc.grid.t[j + 1], disc.grid.tau[j]);
            let cross: R = z.iter().zip(&w_load).map(|(&a, &b)| a * b).sum();
            let e = tau * disc.mass_int.quadratic_form(z) - R::lit(2.0) * cross * mf.time_profile_integral(s0, s1)
                + w_norm_sq * mf.time_profile_sq_integral(s0, s1);
            err_sq += e;
        },
    )?;
    let g1 = mf.time_profile(R::one());
    let terminal_sup_error = disc
        .mesh
        .interior_nodes
        .iter()
        .zip(&terminal)
        .map(|(&node, &z)| (g1 * mf.space_profile(disc.mesh.nodes[node]) - z).abs())
        .fold(R::zero(), R::max);
    Ok(StateErrorRow {
        m,
        n_div,
        tau: disc.grid.tau_max(),
        h: disc.mesh.h,
        l2_error: err_sq.max(R::zero()).sqrt(),
        terminal_sup_error,
    })
}

/// Manufactured-solution errors on each level with fitted slopes against
/// `τ` (over levels that change `M`) and `h` (over levels that change `n_div`).
pub fn state_error_study<R: Real>(cfg: &StateStudyConfig<R>) -> Result<StateStudyOutcome<R>> {
    let rows: Vec<StateErrorRow<R>> = cfg
        .levels
        .par_iter()
        .map(|&(m, n)| state_error(m, n, cfg.horizon, cfg.alpha, cfg.manufactured))
        .collect::<Result<_>>()?;
    let fit = |key: fn(&StateErrorRow<R>) -> R| {
        let distinct = rows.windows(2).all(|w| key(&w[0]) != key(&w[1]));
        if !distinct || rows.iter().any(|r| !(r.l2_error > R::zero())) {
            return None;
        }
        let x: Vec<R> = rows.iter().map(key).collect();
        let y: Vec<R> = rows.iter().map(|r| r.l2_error).collect();
        loglog_slope(&x, &y)
    };
    let slope_tau = fit(|r| r.tau);
    let slope_h = fit(|r| r.h);
    Ok(StateStudyOutcome { rows, slope_tau, slope_h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eoc_formulas() {
        // errors halving with τ halving: order one
        let sizes = [0.1, 0.05, 0.025];
        let errors = [1.0, 0.5, 0.25];
        for e in pairwise_eoc(&sizes, &errors) {
            assert_relative_eq!(e, 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(loglog_slope(&sizes, &[4.0, 1.0, 0.25]).unwrap(), 2.0, epsilon = 1e-12);
        assert!(loglog_slope(&[0.1], &[1.0]).is_none());
        assert_relative_eq!(refinement_size::<f64>(StudyMode::SpaceRefinement, 0, 4225), 2f64.sqrt() / 64.0);
        assert_relative_eq!(refinement_size::<f64>(StudyMode::TimeRefinement, 20, 0), 0.05);
    }

    #[test]
    fn reference_must_be_finer() {
        let cfg = StudyConfig {
            mode: StudyMode::TimeRefinement,
            sequence: vec![(20, 8), (40, 8)],
            reference: (40, 8),
            spec: ProblemSpec::<f64>::paper_example(),
            outer: OuterOptions::default(),
            inner: InnerOptions::default(),
            reference_time: None,
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_row_study_has_no_eoc() {
        let cfg = StudyConfig {
            mode: StudyMode::TimeRefinement,
            sequence: vec![(10, 6)],
            reference: (40, 6),
            spec: ProblemSpec::<f64>::paper_example(),
            outer: OuterOptions::default(),
            inner: InnerOptions::default(),
            reference_time: None,
        };
        let out = run_study(&cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].eoc.is_none());
        assert!(out.rows[0].abs_error > 0.0);
        assert_eq!(out.rows[0].n, 49);
    }

    #[test]
    fn zero_manufactured_solution_has_zero_error() {
        let cfg = StateStudyConfig {
            levels: vec![(2, 3), (4, 6)],
            horizon: 0.5,
            alpha: 0.2,
            manufactured: Manufactured::Zero,
        };
        let out = state_error_study(&cfg).unwrap();
        for r in &out.rows {
            assert_eq!(r.l2_error, 0.0);
            assert_eq!(r.terminal_sup_error, 0.0);
        }
        assert!(out.slope_h.is_none());
    }
}
