//! Uniform triangulation of the unit square and uniform partitions of `[0, 1]`.
//!
//! Nodes are numbered lexicographically by `(x2, x1)`: node `(ix, iy)` has
//! index `iy * (n_div + 1) + ix`. Every sub-square is split along its
//! lower-left to upper-right diagonal.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<R> {
    pub n_div: usize,
    pub nodes: Vec<[R; 2]>,
    /// Counterclockwise node triples.
    pub elements: Vec<[usize; 3]>,
    pub boundary_mask: Vec<bool>,
    /// `interior_index[i]` is the interior-only index of node `i`, if any.
    pub interior_index: Vec<Option<usize>>,
    /// Inverse of `interior_index`.
    pub interior_nodes: Vec<usize>,
    /// Maximal element diameter.
    pub h: R,
}

/// Builds the uniform right-triangle mesh with `n_div` subdivisions per side.
pub fn build_uniform_mesh<R: Real>(n_div: usize) -> Result<Mesh<R>> {
    if n_div < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_div = {n_div}: at least 2 subdivisions are needed for an interior node"
        )));
    }
    let np = n_div + 1;
    let step = R::one() / R::from_usize_lossy(n_div);
    let mut nodes = Vec::with_capacity(np * np);
    let mut boundary_mask = Vec::with_capacity(np * np);
    for iy in 0..np {
        for ix in 0..np {
            // exact 0 and 1 at the ends
            let x = if ix == n_div { R::one() } else { R::from_usize_lossy(ix) * step };
            let y = if iy == n_div { R::one() } else { R::from_usize_lossy(iy) * step };
            nodes.push([x, y]);
            boundary_mask.push(ix == 0 || iy == 0 || ix == n_div || iy == n_div);
        }
    }

    let mut elements = Vec::with_capacity(2 * n_div * n_div);
    for iy in 0..n_div {
        for ix in 0..n_div {
            let p00 = iy * np + ix;
            let p10 = p00 + 1;
            let p01 = p00 + np;
            let p11 = p01 + 1;
            elements.push([p00, p10, p11]);
            elements.push([p00, p11, p01]);
        }
    }

    let mut interior_index = vec![None; np * np];
    let mut interior_nodes = Vec::with_capacity((n_div - 1) * (n_div - 1));
    for (i, &on_boundary) in boundary_mask.iter().enumerate() {
        if !on_boundary {
            interior_index[i] = Some(interior_nodes.len());
            interior_nodes.push(i);
        }
    }

    Ok(Mesh {
        n_div,
        nodes,
        elements,
        boundary_mask,
        interior_index,
        interior_nodes,
        h: R::SQRT_2() / R::from_usize_lossy(n_div),
    })
}

impl<R: Real> Mesh<R> {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Signed area of element `k` (positive for counterclockwise triples).
    pub fn signed_area(&self, k: usize) -> R {
        let [a, b, c] = self.elements[k].map(|i| self.nodes[i]);
        let half = R::lit(0.5);
        half * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Element containing `x` together with the barycentric coordinates of `x`.
    /// Points outside the closed square are clamped onto it.
    pub fn locate(&self, x: [R; 2]) -> (usize, [R; 3]) {
        let n = self.n_div;
        let nf = R::from_usize_lossy(n);
        let clamp = |v: R| v.max(R::zero()).min(R::one());
        let (sx, sy) = (clamp(x[0]) * nf, clamp(x[1]) * nf);
        let ix = sx.floor().to_usize().unwrap_or(0).min(n - 1);
        let iy = sy.floor().to_usize().unwrap_or(0).min(n - 1);
        let lx = sx - R::from_usize_lossy(ix);
        let ly = sy - R::from_usize_lossy(iy);
        let square = 2 * (iy * n + ix);
        if lx >= ly {
            // lower triangle (p00, p10, p11)
            (square, [R::one() - lx, lx - ly, ly])
        } else {
            // upper triangle (p00, p11, p01)
            (square + 1, [R::one() - ly, lx, ly - lx])
        }
    }

    /// Evaluates the P1 function with nodal values `values` at `x`.
    pub fn eval_p1(&self, values: &[R], x: [R; 2]) -> R {
        let (k, bary) = self.locate(x);
        let el = self.elements[k];
        bary[0] * values[el[0]] + bary[1] * values[el[1]] + bary[2] * values[el[2]]
    }

    /// Extends an interior-scope vector by zeros at boundary nodes.
    pub fn extend_by_zero(&self, interior: &[R]) -> Vec<R> {
        let mut out = vec![R::zero(); self.num_nodes()];
        for (&node, &v) in self.interior_nodes.iter().zip(interior) {
            out[node] = v;
        }
        out
    }

    /// Restricts an all-node vector to the interior nodes.
    pub fn restrict(&self, all: &[R]) -> Vec<R> {
        self.interior_nodes.iter().map(|&i| all[i]).collect()
    }
}

/// Partition `0 = t_0 < ... < t_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<R> {
    pub n_steps: usize,
    pub tau: Vec<R>,
    pub t: Vec<R>,
}

pub fn build_uniform_timegrid<R: Real>(n_steps: usize) -> Result<TimeGrid<R>> {
    if n_steps < 1 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let n = R::from_usize_lossy(n_steps);
    let tau = vec![R::one() / n; n_steps];
    let t = (0..=n_steps)
        .map(|j| if j == n_steps { R::one() } else { R::from_usize_lossy(j) / n })
        .collect();
    Ok(TimeGrid { n_steps, tau, t })
}

impl<R: Real> TimeGrid<R> {
    /// Maximal step `tau`.
    pub fn tau_max(&self) -> R {
        self.tau.iter().fold(R::zero(), |m, &t| m.max(t))
    }

    /// Index `j` (0-based) of the interval `(t_j, t_{j+1}]` containing `s`;
    /// `s <= 0` maps to the first interval and `s >= 1` to the last.
    pub fn interval_of(&self, s: R) -> usize {
        match self.t[1..].iter().position(|&tj| s <= tj) {
            Some(j) => j,
            None => self.n_steps - 1,
        }
    }

    pub fn midpoint(&self, j: usize) -> R {
        (self.t[j] + self.t[j + 1]) * R::lit(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn counts_for_two_divisions() {
        let m = build_uniform_mesh::<f64>(2).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_interior(), 1);
        assert_eq!(m.num_elements(), 8);
        assert_relative_eq!(m.h, 2f64.sqrt() / 2.0);
        assert_eq!(m.interior_nodes, vec![4]);
    }

    #[test]
    fn node_count_at_64_divisions() {
        let m = build_uniform_mesh::<f64>(64).unwrap();
        assert_eq!(m.num_nodes(), 4225);
        assert_eq!(m.num_interior(), 63 * 63);
    }

    #[test]
    fn rejects_single_division() {
        assert!(matches!(build_uniform_mesh::<f64>(1), Err(Error::InvalidArgument(_))));
        assert!(build_uniform_mesh::<f64>(0).is_err());
    }

    #[test]
    fn areas_positive_and_sum_to_one() {
        for n in [2, 3, 4, 7] {
            let m = build_uniform_mesh::<f64>(n).unwrap();
            let expected = 1.0 / (2.0 * (n * n) as f64);
            let mut total = 0.0;
            for k in 0..m.num_elements() {
                let a = m.signed_area(k);
                assert_relative_eq!(a, expected, epsilon = 1e-15);
                total += a;
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn boundary_mask_matches_coordinates() {
        let m = build_uniform_mesh::<f64>(5).unwrap();
        for (p, &b) in m.nodes.iter().zip(&m.boundary_mask) {
            let on = p.iter().any(|&c| c == 0.0 || c == 1.0);
            assert_eq!(on, b);
        }
        // bijection onto 0..N_I
        let mut seen = vec![false; m.num_interior()];
        for (i, idx) in m.interior_index.iter().enumerate() {
            match idx {
                Some(k) => {
                    assert!(!m.boundary_mask[i]);
                    assert!(!seen[*k]);
                    seen[*k] = true;
                }
                None => assert!(m.boundary_mask[i]),
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn locate_reproduces_linear_functions() {
        let m = build_uniform_mesh::<f64>(4).unwrap();
        let vals: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 0.5).collect();
        for &x in &[[0.1, 0.2], [0.33, 0.91], [0.0, 0.0], [1.0, 1.0], [0.875, 0.125]] {
            assert_relative_eq!(m.eval_p1(&vals, x), 2.0 * x[0] - 3.0 * x[1] + 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn timegrid_examples() {
        let g = build_uniform_timegrid::<f64>(20).unwrap();
        assert_relative_eq!(g.tau_max(), 0.05);
        assert_eq!(g.t[0], 0.0);
        assert_eq!(g.t[20], 1.0);
        let one = build_uniform_timegrid::<f64>(1).unwrap();
        assert_eq!(one.t, vec![0.0, 1.0]);
        let three = build_uniform_timegrid::<f64>(3).unwrap();
        assert_relative_eq!(three.tau.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        // uniform: every tau_j equals tau exactly
        assert!(three.tau.iter().all(|&t| t == three.tau_max()));
        assert!(build_uniform_timegrid::<f64>(0).is_err());
    }

    #[test]
    fn interval_lookup() {
        let g = build_uniform_timegrid::<f64>(4).unwrap();
        assert_eq!(g.interval_of(0.0), 0);
        assert_eq!(g.interval_of(0.25), 0);
        assert_eq!(g.interval_of(0.26), 1);
        assert_eq!(g.interval_of(1.0), 3);
        assert_eq!(g.interval_of(7.0), 3);
    }

    #[test]
    fn f32_mesh() {
        let m = build_uniform_mesh::<f32>(3).unwrap();
        assert_eq!(m.num_interior(), 4);
        assert!((m.h - 2f32.sqrt() / 3.0).abs() < 1e-7);
    }
}
