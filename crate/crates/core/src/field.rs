//! Piecewise-constant-in-time, P1-in-space fields.

use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, TimeGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeScope {
    AllNodes,
    InteriorNodes,
}

impl NodeScope {
    pub fn len<R: Real>(self, mesh: &Mesh<R>) -> usize {
        match self {
            NodeScope::AllNodes => mesh.num_nodes(),
            NodeScope::InteriorNodes => mesh.num_interior(),
        }
    }
}

/// `sum_j f_j chi_j` with `f_j` a nodal vector; slice `j` (0-based) lives on
/// the interval `(t_j, t_{j+1}]` of `time_grid`.
///
/// Knots in `time_grid` may be scaled to a physical horizon `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<R> {
    pub time_grid: TimeGrid<R>,
    pub scope: NodeScope,
    pub n_nodes: usize,
    data: Vec<R>,
}

impl<R: Real> SpaceTimeField<R> {
    pub fn zeros(time_grid: TimeGrid<R>, scope: NodeScope, n_nodes: usize) -> Self {
        Self::constant(time_grid, scope, n_nodes, R::zero())
    }

    pub fn constant(time_grid: TimeGrid<R>, scope: NodeScope, n_nodes: usize, value: R) -> Self {
        let len = time_grid.n_steps * n_nodes;
        SpaceTimeField { time_grid, scope, n_nodes, data: vec![value; len] }
    }

    pub fn from_steps(time_grid: TimeGrid<R>, scope: NodeScope, steps: Vec<Vec<R>>) -> Self {
        assert_eq!(steps.len(), time_grid.n_steps, "one nodal vector per interval");
        let n_nodes = steps.first().map_or(0, Vec::len);
        assert!(steps.iter().all(|s| s.len() == n_nodes));
        let data = steps.into_iter().flatten().collect();
        SpaceTimeField { time_grid, scope, n_nodes, data }
    }

    pub fn n_steps(&self) -> usize {
        self.time_grid.n_steps
    }

    pub fn step(&self, j: usize) -> &[R] {
        &self.data[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    pub fn step_mut(&mut self, j: usize) -> &mut [R] {
        &mut self.data[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    pub fn as_slice(&self) -> &[R] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn steps(&self) -> impl Iterator<Item = &[R]> {
        self.data.chunks(self.n_nodes.max(1)).take(self.n_steps())
    }

    /// Same coefficients with time knots multiplied by `factor`.
    pub fn rescale_time(&self, factor: R) -> Self {
        let mut out = self.clone();
        out.time_grid.tau.iter_mut().for_each(|t| *t *= factor);
        out.time_grid.t.iter_mut().for_each(|t| *t *= factor);
        out
    }

    /// Coefficient-wise map.
    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// All-node version of an interior field (zeros on the boundary).
    pub fn to_all_nodes(&self, mesh: &Mesh<R>) -> Self {
        match self.scope {
            NodeScope::AllNodes => self.clone(),
            NodeScope::InteriorNodes => {
                let steps = self.steps().map(|s| mesh.extend_by_zero(s)).collect();
                Self::from_steps(self.time_grid.clone(), NodeScope::AllNodes, steps)
            }
        }
    }

    /// Point evaluation at `(x, s)`, with `s` in the (possibly scaled) grid's range.
    pub fn eval(&self, mesh: &Mesh<R>, x: [R; 2], s: R) -> R {
        let j = self.time_grid.interval_of(s);
        match self.scope {
            NodeScope::AllNodes => mesh.eval_p1(self.step(j), x),
            NodeScope::InteriorNodes => mesh.eval_p1(&mesh.extend_by_zero(self.step(j)), x),
        }
    }
}
