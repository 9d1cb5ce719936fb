//! P1 assembly, L² projection, space-time quasi-interpolation and discrete norms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{NodeScope, SpaceTimeField};
use crate::linalg::{EnvelopeCholesky, SpdSolver, DEFAULT_FACTOR_CAP};
use crate::mesh::{Mesh, TimeGrid};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

/// Symmetric degree-4 rule on a triangle: barycentric points and weights
/// (weights sum to one and are scaled by the element area).
pub fn triangle_rule_deg4<R: Real>() -> [([R; 3], R); 6] {
    let (a1, b1, w1) = (0.445948490915965, 0.108103018168070, 0.223381589678011);
    let (a2, b2, w2) = (0.091576213509771, 0.816847572980459, 0.109951743655322);
    let p = |x: f64, y: f64, z: f64, w: f64| ([R::lit(x), R::lit(y), R::lit(z)], R::lit(w));
    [
        p(b1, a1, a1, w1),
        p(a1, b1, a1, w1),
        p(a1, a1, b1, w1),
        p(b2, a2, a2, w2),
        p(a2, b2, a2, w2),
        p(a2, a2, b2, w2),
    ]
}

/// Three-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss3_unit<R: Real>() -> [(R, R); 3] {
    let d = (0.6f64).sqrt() / 2.0;
    [
        (R::lit(0.5 - d), R::lit(5.0 / 18.0)),
        (R::lit(0.5), R::lit(8.0 / 18.0)),
        (R::lit(0.5 + d), R::lit(5.0 / 18.0)),
    ]
}

/// Element mass matrix `A/12 [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn element_mass<R: Real>(area: R) -> [[R; 3]; 3] {
    let d = area / R::lit(6.0);
    let o = area / R::lit(12.0);
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Element stiffness `∫ ∇λ_a · ∇λ_b` for the triangle with vertices `p`.
pub fn element_stiffness<R: Real>(p: [[R; 2]; 3]) -> [[R; 3]; 3] {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // ∇λ_a = (y_b - y_c, x_c - x_b) / (2A) with (a, b, c) cyclic
    let grad = |a: usize| {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        [(p[b][1] - p[c][1]) / area2, (p[c][0] - p[b][0]) / area2]
    };
    let g = [grad(0), grad(1), grad(2)];
    let area = area2 * R::lit(0.5);
    let mut k = [[R::zero(); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

fn deterministic_reduction() -> bool {
    std::env::var("TOTC_DETERMINISTIC").map(|v| v != "0").unwrap_or(true)
}

fn assemble<R: Real>(mesh: &Mesh<R>, local: impl Fn(usize) -> [[R; 3]; 3] + Sync) -> SparseSymMatrix<R> {
    let n = mesh.num_nodes();
    let element_triplets = |k: usize| {
        let el = mesh.elements[k];
        let m = local(k);
        let mut t = Vec::with_capacity(9);
        for a in 0..3 {
            for b in 0..3 {
                t.push((el[a], el[b], m[a][b]));
            }
        }
        t
    };
    let triplets: Vec<(usize, usize, R)> = if deterministic_reduction() {
        (0..mesh.num_elements()).flat_map(element_triplets).collect()
    } else {
        (0..mesh.num_elements()).into_par_iter().flat_map_iter(element_triplets).collect()
    };
    SparseSymMatrix::new(CsrMatrix::from_triplets(n, n, triplets)).expect("element matrices are symmetric")
}

/// Consistent P1 mass matrix on all nodes.
pub fn assemble_mass<R: Real>(mesh: &Mesh<R>) -> SparseSymMatrix<R> {
    assemble(mesh, |k| element_mass(mesh.signed_area(k)))
}

/// P1 stiffness matrix on all nodes.
pub fn assemble_stiffness<R: Real>(mesh: &Mesh<R>) -> SparseSymMatrix<R> {
    assemble(mesh, |k| element_stiffness(mesh.elements[k].map(|i| mesh.nodes[i])))
}

/// `b_i = ∫ f e_i dx` over all nodes, by the degree-4 rule.
pub fn load_vector<R: Real>(mesh: &Mesh<R>, f: impl Fn([R; 2]) -> R) -> Vec<R> {
    let rule = triangle_rule_deg4::<R>();
    let mut b = vec![R::zero(); mesh.num_nodes()];
    for (k, el) in mesh.elements.iter().enumerate() {
        let area = mesh.signed_area(k);
        let p = el.map(|i| mesh.nodes[i]);
        for (bary, w) in &rule {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let fx = f(x) * *w * area;
            for a in 0..3 {
                b[el[a]] += fx * bary[a];
            }
        }
    }
    b
}

/// Mass matrix and load restricted to `scope`.
fn scoped_system<R: Real>(
    mesh: &Mesh<R>,
    mass: &SparseSymMatrix<R>,
    load: &[R],
    scope: NodeScope,
) -> (SparseSymMatrix<R>, Vec<R>) {
    match scope {
        NodeScope::AllNodes => (mass.clone(), load.to_vec()),
        NodeScope::InteriorNodes => (mass.restrict(&mesh.interior_nodes, &mesh.interior_index), mesh.restrict(load)),
    }
}

/// L² projection of `f` onto P1 functions on `scope`.
pub fn l2_project<R: Real>(f: impl Fn([R; 2]) -> R, mesh: &Mesh<R>, scope: NodeScope) -> Result<Vec<R>> {
    let mass = assemble_mass(mesh);
    l2_project_with(&f, mesh, &mass, scope)
}

/// As [`l2_project`], reusing an assembled all-node mass matrix.
pub fn l2_project_with<R: Real>(
    f: &impl Fn([R; 2]) -> R,
    mesh: &Mesh<R>,
    mass_all: &SparseSymMatrix<R>,
    scope: NodeScope,
) -> Result<Vec<R>> {
    let load = load_vector(mesh, f);
    let (m, mut c) = scoped_system(mesh, mass_all, &load, scope);
    SpdSolver::new(m, DEFAULT_FACTOR_CAP)?.solve_in_place(&mut c)?;
    Ok(c)
}

/// `zᵀ (M c - b)` for the projection system on `scope`; zero up to round-off
/// for the projected `c`.
pub fn galerkin_residual<R: Real>(
    f: &impl Fn([R; 2]) -> R,
    mesh: &Mesh<R>,
    mass_all: &SparseSymMatrix<R>,
    scope: NodeScope,
    c: &[R],
) -> Vec<R> {
    let load = load_vector(mesh, f);
    let (m, b) = scoped_system(mesh, mass_all, &load, scope);
    let mut r = m.mul_vec(c);
    r.iter_mut().zip(&b).for_each(|(ri, &bi)| *ri -= bi);
    r
}

/// `√(cᵀ M c)`.
pub fn l2_norm_space<R: Real>(c: &[R], m: &SparseSymMatrix<R>) -> Result<R> {
    if c.len() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: c.len() });
    }
    let q = m.quadratic_form(c);
    if q < R::lit(-1e-14) {
        return Err(Error::MatrixNotPsd(q.to_f64_lossy()));
    }
    Ok(q.max(R::zero()).sqrt())
}

/// `I_σ v`: coefficient `(i, j)` is `∫_{I_j} ∫_Ω v e_i / (τ_j ∫_Ω e_i)`.
pub fn quasi_interpolate<R: Real>(
    v: impl Fn([R; 2], R) -> R,
    mesh: &Mesh<R>,
    grid: &TimeGrid<R>,
) -> SpaceTimeField<R> {
    let weights = assemble_mass(mesh).row_sums();
    let time_rule = gauss3_unit::<R>();
    let mut out = SpaceTimeField::zeros(grid.clone(), NodeScope::AllNodes, mesh.num_nodes());
    for j in 0..grid.n_steps {
        let (t0, tau) = (grid.t[j], grid.tau[j]);
        let mut acc = vec![R::zero(); mesh.num_nodes()];
        for &(s, w) in &time_rule {
            let sq = t0 + s * tau;
            let b = load_vector(mesh, |x| v(x, sq));
            for (a, bi) in acc.iter_mut().zip(b) {
                *a += w * bi;
            }
        }
        // the τ_j of the time integral cancels the 1/τ_j
        for ((o, a), wi) in out.step_mut(j).iter_mut().zip(acc).zip(&weights) {
            *o = a / *wi;
        }
    }
    out
}

/// Spatial factor of `I_σ` for a separable `v(x, s) = w(x) q(s)`:
/// `∫ w e_i / ∫ e_i` per node.
pub fn nodal_averages<R: Real>(w: impl Fn([R; 2]) -> R, mesh: &Mesh<R>, mass_all: &SparseSymMatrix<R>) -> Vec<R> {
    let b = load_vector(mesh, w);
    b.iter().zip(mass_all.row_sums()).map(|(&bi, wi)| bi / wi).collect()
}

/// Temporal factor of `I_σ` for a separable `v(x, s) = w(x) q(s)`:
/// the mean of `q` over interval `j`.
pub fn interval_mean<R: Real>(q: impl Fn(R) -> R, grid: &TimeGrid<R>, j: usize) -> R {
    gauss3_unit::<R>().iter().map(|&(s, w)| w * q(grid.t[j] + s * grid.tau[j])).sum()
}

/// `I_σ` applied to a discrete field living on `field_mesh` (any uniform
/// mesh) onto `mesh` and `grid`.
pub fn quasi_interpolate_field<R: Real>(
    field: &SpaceTimeField<R>,
    field_mesh: &Mesh<R>,
    mesh: &Mesh<R>,
    grid: &TimeGrid<R>,
) -> SpaceTimeField<R> {
    let all = field.to_all_nodes(field_mesh);
    quasi_interpolate(|x, s| field_mesh.eval_p1(all.step(all.time_grid.interval_of(s)), x), mesh, grid)
}

/// `‖f‖²_{L²(Q₁)}` for a space-time field, using the matching mass matrix.
pub fn l2_norm_space_time_sq<R: Real>(field: &SpaceTimeField<R>, m: &SparseSymMatrix<R>) -> R {
    field
        .steps()
        .zip(&field.time_grid.tau)
        .map(|(c, &tau)| tau * m.quadratic_form(c))
        .sum()
}

/// Smallest eigenvalue bound helper: `true` if `m` admits a Cholesky factor.
pub fn is_positive_definite<R: Real>(m: &SparseSymMatrix<R>) -> bool {
    EnvelopeCholesky::factor(m).is_ok()
}
