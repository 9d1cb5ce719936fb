//! Back-transformation of fixed-horizon solutions `(T, ζ, v)` on `[0, 1]`
//! to physical time `t = T s`, recovery of the mixed control
//! `w = u - α y`, the constant right-extension of a state and a sup-norm
//! distance between extended states.

use crate::error::{Error, Result};
use crate::field::{NodeScope, SpaceTimeField};
use crate::mesh::{Mesh, TimeGrid};
use crate::problem::ProblemSpec;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSolution<R> {
    pub horizon: R,
    /// State on `[0, T]`, interior nodes.
    pub y: SpaceTimeField<R>,
    /// Control `u = w + α y` on `[0, T]`, all nodes.
    pub u: SpaceTimeField<R>,
    /// Mixed control `w = u - α y`, all nodes (`w = u` on the boundary).
    pub w: SpaceTimeField<R>,
    /// Fixed-horizon grid the fields were computed on.
    pub fixed_grid: TimeGrid<R>,
}

pub fn to_physical<R: Real>(
    horizon: R,
    state: &SpaceTimeField<R>,
    control: &SpaceTimeField<R>,
    alpha: R,
    mesh: &Mesh<R>,
) -> Result<PhysicalSolution<R>> {
    if !(horizon > R::zero()) {
        return Err(Error::InvalidHorizon(horizon.to_f64_lossy()));
    }
    if state.n_steps() != control.n_steps() {
        return Err(Error::DimensionMismatch { expected: control.n_steps(), got: state.n_steps() });
    }
    let y = state.rescale_time(horizon);
    let u = control.rescale_time(horizon);
    let y_all = state.to_all_nodes(mesh);
    let mut w = u.clone();
    for (wk, &yk) in w.as_mut_slice().iter_mut().zip(y_all.as_slice()) {
        *wk -= alpha * yk;
    }
    Ok(PhysicalSolution { horizon, y, u, w, fixed_grid: state.time_grid.clone() })
}

impl<R: Real> PhysicalSolution<R> {
    /// Fields back on the fixed horizon: `(ζ, v)`.
    pub fn to_fixed_horizon(&self) -> (SpaceTimeField<R>, SpaceTimeField<R>) {
        let mut zeta = self.y.clone();
        zeta.time_grid = self.fixed_grid.clone();
        let mut v = self.u.clone();
        v.time_grid = self.fixed_grid.clone();
        (zeta, v)
    }

    /// Largest violation of `a <= w + α y <= b` over interior coefficients.
    pub fn mixed_bound_violation(&self, spec: &ProblemSpec<R>, mesh: &Mesh<R>) -> R {
        let mut worst = R::zero();
        for j in 0..self.y.n_steps() {
            let (y, w) = (self.y.step(j), self.w.step(j));
            for (k, &node) in mesh.interior_nodes.iter().enumerate() {
                let u = w[node] + spec.alpha * y[k];
                worst = worst.max(spec.a - u).max(u - spec.b);
            }
        }
        worst
    }
}

/// `y_e(t)`: the slice containing `t` for `t <= T`, the final slice beyond.
/// `t = 0` maps to the first slice.
pub fn extend_right<R: Real>(y: &SpaceTimeField<R>, t_query: R) -> Vec<R> {
    let horizon = *y.time_grid.t.last().expect("non-empty grid");
    let j = if t_query >= horizon { y.n_steps() - 1 } else { y.time_grid.interval_of(t_query) };
    y.step(j).to_vec()
}

/// `max_{t, x} |y1_e(x, t) - y2_e(x, t)|` over probe times in
/// `[0, max(T1, T2)]`: `probe_count` uniform probes, both grids' slice
/// midpoints and the endpoints. Both fields are evaluated at the nodes of
/// `eval_mesh` (take the finer mesh when the two are nested).
pub fn sup_distance_extended<R: Real>(
    y1: (&SpaceTimeField<R>, &Mesh<R>),
    y2: (&SpaceTimeField<R>, &Mesh<R>),
    eval_mesh: &Mesh<R>,
    probe_count: usize,
) -> Result<R> {
    if probe_count < 2 {
        return Err(Error::InvalidArgument("probe_count must be at least 2".into()));
    }
    let t1 = *y1.0.time_grid.t.last().unwrap();
    let t2 = *y2.0.time_grid.t.last().unwrap();
    let t_end = t1.max(t2);
    let mut probes: Vec<R> = (0..probe_count)
        .map(|k| t_end * R::from_usize_lossy(k) / R::from_usize_lossy(probe_count - 1))
        .collect();
    for g in [&y1.0.time_grid, &y2.0.time_grid] {
        probes.extend((0..g.n_steps).map(|j| g.midpoint(j)));
    }
    let all1 = y1.0.to_all_nodes(y1.1);
    let all2 = y2.0.to_all_nodes(y2.1);
    let mut worst = R::zero();
    for &t in &probes {
        let s1 = extend_right(&all1, t);
        let s2 = extend_right(&all2, t);
        for &x in &eval_mesh.nodes {
            worst = worst.max((y1.1.eval_p1(&s1, x) - y2.1.eval_p1(&s2, x)).abs());
        }
    }
    Ok(worst)
}

/// Interior field on `[0, T]` from per-step vectors (test and report helper).
pub fn interior_field<R: Real>(grid: TimeGrid<R>, steps: Vec<Vec<R>>) -> SpaceTimeField<R> {
    SpaceTimeField::from_steps(grid, NodeScope::InteriorNodes, steps)
}
