//! Linear finite element assembly for the convection-diffusion forms
//! `a(u,v) = ∫ (A∇u)·∇v + (b·∇u) v + c u v` and `b(u,v) = ∫ m u v`,
//! residual functionals for the defect-correction steps, and transfers
//! between nested meshes.
//!
//! All coefficients are constant, so every element integral has a closed
//! form: element gradients are constant and `∫_T v = |T|(v1+v2+v3)/3` is
//! exact for linear `v`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, VertexOrigin};
use crate::sparse::SparseMatrix;

const ABSENT: u32 = u32::MAX;

/// Constant coefficients of the operator `-div(A grad u) + b·grad u + c u`
/// with spectral weight `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemCoeffs {
    pub diffusion: [[f64; 2]; 2],
    pub convection: [f64; 2],
    pub reaction: f64,
    pub weight: f64,
}

impl ProblemCoeffs {
    /// `-Δu + b·∇u = λ u`: identity diffusion, no reaction, unit weight.
    pub fn convection_diffusion(b: [f64; 2]) -> ProblemCoeffs {
        ProblemCoeffs {
            diffusion: [[1.0, 0.0], [0.0, 1.0]],
            convection: b,
            reaction: 0.0,
            weight: 1.0,
        }
    }

    pub fn laplacian() -> ProblemCoeffs {
        ProblemCoeffs::convection_diffusion([0.0, 0.0])
    }

    /// Uniform strong ellipticity via the smallest eigenvalue of the
    /// symmetric part of the diffusion matrix, and positivity of the weight.
    pub fn validate(&self) -> Result<()> {
        let s11 = self.diffusion[0][0];
        let s22 = self.diffusion[1][1];
        let s12 = 0.5 * (self.diffusion[0][1] + self.diffusion[1][0]);
        let mean = 0.5 * (s11 + s22);
        let disc = (0.5 * (s11 - s22)).hypot(s12);
        let lambda_min = mean - disc;
        if lambda_min.is_nan() || lambda_min <= 0.0 {
            return Err(Error::Coefficient(format!(
                "diffusion matrix is not uniformly elliptic (min symmetric eigenvalue {lambda_min})"
            )));
        }
        if self.weight.is_nan() || self.weight <= 0.0 {
            return Err(Error::Coefficient(format!(
                "weight m = {} is not bounded below by a positive constant",
                self.weight
            )));
        }
        Ok(())
    }
}

/// Piecewise-linear finite element function: nodal values on a mesh with
/// zeros at every Dirichlet vertex.
#[derive(Clone)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FeFunction {
    /// Scatters a vector of unknowns into nodal values (zero on Dirichlet
    /// vertices).
    pub fn from_unknowns(mesh: Arc<Mesh>, x: &[f64]) -> FeFunction {
        assert_eq!(x.len(), mesh.n_unknowns());
        let mut values = vec![0.0; mesh.n_vertices()];
        for (v, &d) in mesh.dof_map().iter().enumerate() {
            if d != ABSENT {
                values[v] = x[d as usize];
            }
        }
        FeFunction { mesh, values }
    }

    /// Wraps nodal values, checking the Dirichlet-zero invariant.
    pub fn from_nodal(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<FeFunction> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::SizeMismatch(format!(
                "{} nodal values for a mesh with {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        for (v, &d) in mesh.dirichlet().iter().enumerate() {
            if d && values[v] != 0.0 {
                return Err(Error::Config(format!(
                    "nonzero value {} at Dirichlet vertex {v}",
                    values[v]
                )));
            }
        }
        Ok(FeFunction { mesh, values })
    }

    pub fn zero(mesh: Arc<Mesh>) -> FeFunction {
        let n = mesh.n_vertices();
        FeFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Gathers the unknown (non-Dirichlet) entries.
    pub fn unknowns(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.mesh.n_unknowns()];
        for (v, &d) in self.mesh.dof_map().iter().enumerate() {
            if d != ABSENT {
                x[d as usize] = self.values[v];
            }
        }
        x
    }

    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        self.mesh.eval_linear(&self.values, x, y)
    }
}

struct ElementGeometry {
    area: f64,
    /// Gradients of the three nodal basis functions.
    grads: [[f64; 2]; 3],
}

fn element_geometry(p: [[f64; 2]; 3]) -> ElementGeometry {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    debug_assert!(det > 0.0, "triangle must be counter-clockwise");
    ElementGeometry {
        area: 0.5 * det,
        grads: [
            [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
            [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
            [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
        ],
    }
}

fn tri_coords(mesh: &Mesh, tri: [u32; 3]) -> [[f64; 2]; 3] {
    [
        mesh.vertices()[tri[0] as usize],
        mesh.vertices()[tri[1] as usize],
        mesh.vertices()[tri[2] as usize],
    ]
}

/// Exact `(a_T(u, v), b_T(u, v))` on one triangle for linear `u`, `v` given
/// by their vertex values.
pub fn element_forms(p: [[f64; 2]; 3], u: [f64; 3], v: [f64; 3], c: &ProblemCoeffs) -> (f64, f64) {
    let g = element_geometry(p);
    let gu = [
        u[0] * g.grads[0][0] + u[1] * g.grads[1][0] + u[2] * g.grads[2][0],
        u[0] * g.grads[0][1] + u[1] * g.grads[1][1] + u[2] * g.grads[2][1],
    ];
    let gv = [
        v[0] * g.grads[0][0] + v[1] * g.grads[1][0] + v[2] * g.grads[2][0],
        v[0] * g.grads[0][1] + v[1] * g.grads[1][1] + v[2] * g.grads[2][1],
    ];
    let mut diff = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            diff += c.diffusion[i][j] * gu[i] * gv[j];
        }
    }
    let su = u[0] + u[1] + u[2];
    let sv = v[0] + v[1] + v[2];
    let mass = g.area / 12.0 * (su * sv + u[0] * v[0] + u[1] * v[1] + u[2] * v[2]);
    let conv = (c.convection[0] * gu[0] + c.convection[1] * gu[1]) * g.area * sv / 3.0;
    let a = g.area * diff + conv + c.reaction * mass;
    (a, c.weight * mass)
}

/// Exact `(a(u, v), b(u, v))` over a whole mesh for nodal value arrays
/// (Dirichlet vertices included). Independent of the matrix route.
pub fn forms_on_mesh(mesh: &Mesh, u_all: &[f64], v_all: &[f64], c: &ProblemCoeffs) -> (f64, f64) {
    assert_eq!(u_all.len(), mesh.n_vertices());
    assert_eq!(v_all.len(), mesh.n_vertices());
    let mut a = 0.0;
    let mut b = 0.0;
    for &tri in mesh.triangles() {
        let u = [
            u_all[tri[0] as usize],
            u_all[tri[1] as usize],
            u_all[tri[2] as usize],
        ];
        let v = [
            v_all[tri[0] as usize],
            v_all[tri[1] as usize],
            v_all[tri[2] as usize],
        ];
        let (ea, eb) = element_forms(tri_coords(mesh, tri), u, v, c);
        a += ea;
        b += eb;
    }
    (a, b)
}

fn assemble_pair_internal(mesh: &Mesh, c: &ProblemCoeffs) -> (SparseMatrix, SparseMatrix) {
    let nv = mesh.n_vertices();
    let mut ta = Vec::with_capacity(9 * mesh.triangles().len());
    let mut tb = Vec::with_capacity(9 * mesh.triangles().len());
    for &tri in mesh.triangles() {
        let g = element_geometry(tri_coords(mesh, tri));
        // test i (row), trial j (column): entry a(phi_j, phi_i)
        for i in 0..3 {
            for j in 0..3 {
                let mut diff = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        diff += c.diffusion[p][q] * g.grads[j][p] * g.grads[i][q];
                    }
                }
                let conv = (c.convection[0] * g.grads[j][0] + c.convection[1] * g.grads[j][1])
                    * g.area
                    / 3.0;
                let mass = g.area / 12.0 * if i == j { 2.0 } else { 1.0 };
                ta.push((tri[i], tri[j], g.area * diff + conv + c.reaction * mass));
                tb.push((tri[i], tri[j], c.weight * mass));
            }
        }
    }
    (
        SparseMatrix::from_triplets(nv, nv, ta),
        SparseMatrix::from_triplets(nv, nv, tb),
    )
}

fn restrict_to_unknowns(mesh: &Mesh, m: &SparseMatrix) -> SparseMatrix {
    let n = mesh.n_unknowns();
    m.restrict(mesh.dof_map(), n, mesh.dof_map(), n)
}

/// Stiffness-plus-convection matrix over the interior unknowns:
/// `A[k,l] = a(phi_l, phi_k)`.
pub fn assemble_a(mesh: &Mesh, c: &ProblemCoeffs) -> Result<SparseMatrix> {
    c.validate()?;
    let (a, _) = assemble_pair_internal(mesh, c);
    Ok(restrict_to_unknowns(mesh, &a))
}

/// Weighted mass matrix over the interior unknowns.
pub fn assemble_b(mesh: &Mesh, c: &ProblemCoeffs) -> Result<SparseMatrix> {
    c.validate()?;
    let (_, b) = assemble_pair_internal(mesh, c);
    Ok(restrict_to_unknowns(mesh, &b))
}

/// Both interior matrices in one assembly pass.
pub fn assemble_pair(mesh: &Mesh, c: &ProblemCoeffs) -> Result<(SparseMatrix, SparseMatrix)> {
    c.validate()?;
    let (a, b) = assemble_pair_internal(mesh, c);
    Ok((
        restrict_to_unknowns(mesh, &a),
        restrict_to_unknowns(mesh, &b),
    ))
}

/// Full-vertex (boundary-extended) matrices, used by functional assembly
/// and by conservation tests.
pub fn assemble_pair_full(mesh: &Mesh, c: &ProblemCoeffs) -> Result<(SparseMatrix, SparseMatrix)> {
    c.validate()?;
    Ok(assemble_pair_internal(mesh, c))
}

/// The pure convection part over interior unknowns; for constant `b` and
/// eliminated Dirichlet values it is exactly skew-symmetric.
pub fn assemble_convection(mesh: &Mesh, b: [f64; 2]) -> SparseMatrix {
    let nv = mesh.n_vertices();
    let mut t = Vec::with_capacity(9 * mesh.triangles().len());
    for &tri in mesh.triangles() {
        let g = element_geometry(tri_coords(mesh, tri));
        for i in 0..3 {
            for j in 0..3 {
                let conv = (b[0] * g.grads[j][0] + b[1] * g.grads[j][1]) * g.area / 3.0;
                t.push((tri[i], tri[j], conv));
            }
        }
    }
    let full = SparseMatrix::from_triplets(nv, nv, t);
    restrict_to_unknowns(mesh, &full)
}

/// Residual functional of the primal defect equation on `target`:
/// `F[k] = λ b(g, φ_k) − a(g, φ_k)` for each interior basis function, with
/// `g` given as nodal values on all `target` vertices (ring values included).
pub fn functional_from_nodal(
    target: &Mesh,
    g_all: &[f64],
    lambda: f64,
    c: &ProblemCoeffs,
) -> Vec<f64> {
    assert_eq!(g_all.len(), target.n_vertices());
    let mut f = vec![0.0; target.n_unknowns()];
    let dof = target.dof_map();
    for &tri in target.triangles() {
        let g = element_geometry(tri_coords(target, tri));
        let u = [
            g_all[tri[0] as usize],
            g_all[tri[1] as usize],
            g_all[tri[2] as usize],
        ];
        let gu = [
            u[0] * g.grads[0][0] + u[1] * g.grads[1][0] + u[2] * g.grads[2][0],
            u[0] * g.grads[0][1] + u[1] * g.grads[1][1] + u[2] * g.grads[2][1],
        ];
        // (A ∇g) appears against each test gradient
        let adg = [
            c.diffusion[0][0] * gu[0] + c.diffusion[1][0] * gu[1],
            c.diffusion[0][1] * gu[0] + c.diffusion[1][1] * gu[1],
        ];
        let bdg = (c.convection[0] * gu[0] + c.convection[1] * gu[1]) * g.area / 3.0;
        let su = u[0] + u[1] + u[2];
        for i in 0..3 {
            let k = dof[tri[i] as usize];
            if k == ABSENT {
                continue;
            }
            let du = adg[0] * g.grads[i][0] + adg[1] * g.grads[i][1];
            let mass_row = g.area / 12.0 * (su + u[i]);
            let a_val = g.area * du + bdg + c.reaction * mass_row;
            let b_val = c.weight * mass_row;
            f[k as usize] += lambda * b_val - a_val;
        }
    }
    f
}

/// Adjoint residual functional: `F*[k] = λ b(φ_k, g) − a(φ_k, g)` (the form
/// arguments transposed; for real data the resulting system matrix is Aᵀ).
pub fn adjoint_functional_from_nodal(
    target: &Mesh,
    g_all: &[f64],
    lambda: f64,
    c: &ProblemCoeffs,
) -> Vec<f64> {
    assert_eq!(g_all.len(), target.n_vertices());
    let mut f = vec![0.0; target.n_unknowns()];
    let dof = target.dof_map();
    for &tri in target.triangles() {
        let g = element_geometry(tri_coords(target, tri));
        let u = [
            g_all[tri[0] as usize],
            g_all[tri[1] as usize],
            g_all[tri[2] as usize],
        ];
        let gu = [
            u[0] * g.grads[0][0] + u[1] * g.grads[1][0] + u[2] * g.grads[2][0],
            u[0] * g.grads[0][1] + u[1] * g.grads[1][1] + u[2] * g.grads[2][1],
        ];
        let su = u[0] + u[1] + u[2];
        for i in 0..3 {
            let k = dof[tri[i] as usize];
            if k == ABSENT {
                continue;
            }
            // trial = phi_i, test = g
            let mut diff = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    diff += c.diffusion[p][q] * g.grads[i][p] * gu[q];
                }
            }
            let conv =
                (c.convection[0] * g.grads[i][0] + c.convection[1] * g.grads[i][1]) * g.area * su
                    / 3.0;
            let mass_row = g.area / 12.0 * (su + u[i]);
            let a_val = g.area * diff + conv + c.reaction * mass_row;
            let b_val = c.weight * mass_row;
            f[k as usize] += lambda * b_val - a_val;
        }
    }
    f
}

/// Interpolates nodal values from a coarse mesh onto a nested finer (or
/// equal) mesh of the same region. Exact for piecewise-linear data.
pub(crate) fn interpolate_nested(coarse: &Mesh, values: &[f64], fine: &Mesh) -> Result<Vec<f64>> {
    if coarse.region() != fine.region() {
        return Err(Error::Transfer(
            "meshes discretize different regions".into(),
        ));
    }
    let ratio = coarse.spacing() / fine.spacing();
    if ratio.is_nan() || ratio < 1.0 || (ratio.log2() - ratio.log2().round()).abs() > 1e-12 {
        return Err(Error::Transfer(format!(
            "fine mesh (step {}) is not a dyadic refinement of the coarse mesh (step {})",
            fine.spacing(),
            coarse.spacing()
        )));
    }
    // provenance fast path for a direct refinement
    if ratio == 2.0 {
        if let Some(origins) = fine.vertex_origin() {
            if origins.len() == fine.n_vertices() {
                let vals = origins
                    .iter()
                    .map(|o| match *o {
                        VertexOrigin::Vertex(v) => values[v as usize],
                        VertexOrigin::EdgeMid(a, b) => {
                            0.5 * (values[a as usize] + values[b as usize])
                        }
                    })
                    .collect();
                return Ok(vals);
            }
        }
    }
    fine.vertices()
        .iter()
        .map(|v| {
            coarse
                .eval_linear(values, v[0], v[1])
                .ok_or_else(|| Error::Transfer(format!("vertex {v:?} outside the coarse mesh")))
        })
        .collect()
}

/// Nodal interpolation of `g` onto a nested refinement; exact because the
/// linear interpolant of a piecewise-linear function on a nested mesh
/// reproduces it.
pub fn prolongate(g: &FeFunction, fine: &Arc<Mesh>) -> Result<FeFunction> {
    let values = interpolate_nested(g.mesh(), g.values(), fine)?;
    FeFunction::from_nodal(fine.clone(), values)
}

/// Residual functional `F[k] = λ b(g, φ_k) − a(g, φ_k)` of a composite
/// iterate on a local target mesh: `g` is interpolated exactly onto the
/// target (ring values included, they couple into the right-hand side but
/// are not unknowns) and integrated element by element.
pub fn assemble_functional(
    target: &Mesh,
    g: &crate::composite::CompositeFunction,
    lambda: f64,
    c: &ProblemCoeffs,
) -> Result<Vec<f64>> {
    let g_all = g.restrict_to(target)?;
    Ok(functional_from_nodal(target, &g_all, lambda, c))
}

/// As [`assemble_functional`] with the form arguments transposed:
/// `F*[k] = λ b(φ_k, g) − a(φ_k, g)`, driving the adjoint correction.
pub fn adjoint_functional(
    target: &Mesh,
    g: &crate::composite::CompositeFunction,
    lambda: f64,
    c: &ProblemCoeffs,
) -> Result<Vec<f64>> {
    let g_all = g.restrict_to(target)?;
    Ok(adjoint_functional_from_nodal(target, &g_all, lambda, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, refine_uniform, DomainSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs(b: [f64; 2]) -> ProblemCoeffs {
        ProblemCoeffs::convection_diffusion(b)
    }

    #[test]
    fn ellipticity_validation() {
        assert!(coeffs([0.0, 3.0]).validate().is_ok());
        let mut bad = coeffs([0.0, 0.0]);
        bad.diffusion = [[1.0, 3.0], [3.0, 1.0]];
        assert!(matches!(bad.validate(), Err(Error::Coefficient(_))));
        let mut badw = coeffs([0.0, 0.0]);
        badw.weight = 0.0;
        assert!(matches!(badw.validate(), Err(Error::Coefficient(_))));
    }

    #[test]
    fn laplacian_matrix_is_symmetric_positive_definite() {
        let m = build_mesh(&DomainSpec::LShape, 8).unwrap();
        let a = assemble_a(&m, &coeffs([0.0, 0.0])).unwrap();
        let n = a.n_rows();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                assert_eq!(v, a.get(c as usize, i), "A[{i},{c}] asymmetric");
            }
        }
        // the real quadratic form sees only the symmetric part, so it stays
        // positive under constant convection as well
        for b in [[0.0, 0.0], [0.0, 10.0]] {
            let a = assemble_a(&m, &coeffs(b)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let ax = a.matvec(&x);
                let q: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
                assert!(q > 0.0, "b = {b:?}");
            }
        }
    }

    #[test]
    fn convection_part_is_skew_symmetric() {
        for b in [[1.0, 1.0], [0.0, 3.0], [0.0, 10.0]] {
            let m = build_mesh(&DomainSpec::Slit, 16).unwrap();
            let c = assemble_convection(&m, b);
            let ct = c.transpose();
            let s = c.add_scaled(&ct, 1.0);
            assert!(s.max_abs() <= 1e-12, "b={b:?}: |C+C^T| = {}", s.max_abs());
        }
    }

    #[test]
    fn rows_of_a_annihilate_constants_when_reaction_vanishes() {
        let m = build_mesh(&DomainSpec::Square { half: 1.0 }, 4).unwrap();
        let (a_full, _) = assemble_pair_full(&m, &coeffs([2.0, -1.0])).unwrap();
        let ones = vec![1.0; m.n_vertices()];
        for (k, v) in a_full.matvec(&ones).iter().enumerate() {
            assert!(v.abs() < 1e-13, "row {k} sum = {v}");
        }
    }

    #[test]
    fn mass_sums_to_weighted_domain_area() {
        let c = ProblemCoeffs {
            weight: 2.5,
            ..coeffs([0.0, 3.0])
        };
        let m = build_mesh(&DomainSpec::LShape, 16).unwrap();
        let (_, b_full) = assemble_pair_full(&m, &c).unwrap();
        let ones = vec![1.0; m.n_vertices()];
        let total: f64 = b_full.matvec(&ones).iter().sum();
        assert!((total - 2.5 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn mass_matrix_is_positive_definite_by_dense_factorization() {
        // Cholesky succeeds iff the matrix is SPD; mesh kept under 200
        // unknowns
        let m = build_mesh(&DomainSpec::Slit, 6).unwrap();
        assert!(m.n_unknowns() <= 200);
        let b = assemble_b(&m, &coeffs([0.0, 0.0])).unwrap();
        let mut d = b.to_dense();
        let n = b.n_rows();
        for k in 0..n {
            for j in 0..k {
                let s: f64 = (0..j).map(|i| d[k][i] * d[j][i]).sum();
                d[k][j] = (d[k][j] - s) / d[j][j];
            }
            let s: f64 = (0..k).map(|i| d[k][i] * d[k][i]).sum();
            let diag = d[k][k] - s;
            assert!(diag > 0.0, "pivot {k} of the mass Cholesky is {diag}");
            d[k][k] = diag.sqrt();
        }
    }

    #[test]
    fn unit_right_triangle_mass_diagonal() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for i in 0..3 {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            let (_, b) = element_forms(p, e, e, &coeffs([0.0, 0.0]));
            assert!((b - 1.0 / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_form_matches_elementwise_integral() {
        let m = Arc::new(build_mesh(&DomainSpec::LShape, 8).unwrap());
        let c = ProblemCoeffs {
            reaction: 0.7,
            ..coeffs([1.5, -2.0])
        };
        let (a, b) = assemble_pair(&m, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let xu: Vec<f64> = (0..m.n_unknowns())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let xv: Vec<f64> = (0..m.n_unknowns())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let fu = FeFunction::from_unknowns(m.clone(), &xu);
            let fv = FeFunction::from_unknowns(m.clone(), &xv);
            let (ai, bi) = forms_on_mesh(&m, fu.values(), fv.values(), &c);
            let am: f64 = xv.iter().zip(a.matvec(&xu)).map(|(v, au)| v * au).sum();
            let bm: f64 = xv.iter().zip(b.matvec(&xu)).map(|(v, bu)| v * bu).sum();
            assert!((ai - am).abs() <= 1e-12 * am.abs().max(1.0));
            assert!((bi - bm).abs() <= 1e-12 * bm.abs().max(1.0));
        }
    }

    #[test]
    fn functionals_match_matrix_route() {
        let m = build_mesh(&DomainSpec::LShape, 8).unwrap();
        let c = coeffs([0.0, 3.0]);
        let lambda = 4.2;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // nodal data with nonzero ring values, as in a defect-correction step
        let g: Vec<f64> = (0..m.n_vertices())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let (a_full, b_full) = assemble_pair_full(&m, &c).unwrap();
        let want_rows = |vals: Vec<f64>| -> Vec<f64> {
            m.dof_map()
                .iter()
                .enumerate()
                .filter(|(_, &d)| d != u32::MAX)
                .map(|(v, _)| vals[v])
                .collect()
        };
        let bg = b_full.matvec(&g);
        let ag = a_full.matvec(&g);
        let want: Vec<f64> = bg.iter().zip(&ag).map(|(b, a)| lambda * b - a).collect();
        let got = functional_from_nodal(&m, &g, lambda, &c);
        for (g1, w) in got.iter().zip(want_rows(want)) {
            assert!((g1 - w).abs() < 1e-12);
        }

        let btg = b_full.matvec_transpose(&g);
        let atg = a_full.matvec_transpose(&g);
        let want_t: Vec<f64> = btg.iter().zip(&atg).map(|(b, a)| lambda * b - a).collect();
        let got_t = adjoint_functional_from_nodal(&m, &g, lambda, &c);
        for (g1, w) in got_t.iter().zip(want_rows(want_t)) {
            assert!((g1 - w).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_functional_coincides_with_primal_when_symmetric() {
        let m = build_mesh(&DomainSpec::Slit, 8).unwrap();
        let c = coeffs([0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g: Vec<f64> = (0..m.n_vertices())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let f = functional_from_nodal(&m, &g, 2.0, &c);
        let fa = adjoint_functional_from_nodal(&m, &g, 2.0, &c);
        for (a, b) in f.iter().zip(&fa) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_data_gives_zero_functional() {
        let m = build_mesh(&DomainSpec::LShape, 4).unwrap();
        let g = vec![0.0; m.n_vertices()];
        let f = functional_from_nodal(&m, &g, 0.0, &coeffs([1.0, 1.0]));
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prolongation_is_exact_on_nested_refinement() {
        let coarse = Arc::new(build_mesh(&DomainSpec::LShape, 8).unwrap());
        let fine = Arc::new(refine_uniform(&coarse));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..coarse.n_unknowns())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let g = FeFunction::from_unknowns(coarse.clone(), &x);
        let gf = prolongate(&g, &fine).unwrap();
        // coarse vertices keep their values
        for (v, val) in coarse.vertices().iter().zip(g.values()) {
            let fv = fine.vertex_at(v[0], v[1]).unwrap();
            assert_eq!(gf.values()[fv as usize], *val);
        }
        // the integral is conserved under exact interpolation
        let c = coeffs([0.0, 0.0]);
        let ones_c = vec![1.0; coarse.n_vertices()];
        let ones_f = vec![1.0; fine.n_vertices()];
        let (_, int_c) = forms_on_mesh(&coarse, g.values(), &ones_c, &c);
        let (_, int_f) = forms_on_mesh(&fine, gf.values(), &ones_f, &c);
        assert!((int_c - int_f).abs() < 1e-12);
        // restriction back to the coarse mesh is the identity
        let back = interpolate_nested(&fine, gf.values(), &fine).unwrap();
        assert_eq!(back, gf.values());
    }

    #[test]
    fn interpolation_of_ones_is_ones_and_two_level_jumps_work() {
        let m0 = build_mesh(&DomainSpec::Slit, 4).unwrap();
        let m2 = build_mesh(&DomainSpec::Slit, 16).unwrap();
        let ones = vec![1.0; m0.n_vertices()];
        let up = interpolate_nested(&m0, &ones, &m2).unwrap();
        assert!(up.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn prolongation_rejects_non_nested_meshes() {
        let a = Arc::new(build_mesh(&DomainSpec::LShape, 8).unwrap());
        let b = Arc::new(build_mesh(&DomainSpec::Slit, 16).unwrap());
        let g = FeFunction::zero(a.clone());
        assert!(matches!(prolongate(&g, &b), Err(Error::Transfer(_))));
        let coarser = Arc::new(build_mesh(&DomainSpec::LShape, 4).unwrap());
        assert!(matches!(prolongate(&g, &coarser), Err(Error::Transfer(_))));
    }

    #[test]
    fn fe_function_rejects_nonzero_dirichlet_values() {
        let m = Arc::new(build_mesh(&DomainSpec::Square { half: 1.0 }, 2).unwrap());
        let mut vals = vec![0.0; m.n_vertices()];
        vals[0] = 1.0; // a corner vertex
        assert!(FeFunction::from_nodal(m, vals).is_err());
    }
}
