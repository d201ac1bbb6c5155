//! Composite approximations: a globally defined base function plus a stack
//! of local corrections supported on nested subdomains. The multilevel
//! iterates `u^{w,h_i}` live here.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{element_forms, FeFunction, ProblemCoeffs};
use crate::mesh::{CompositePartition, Mesh, SubdomainSpec};

/// Base function plus ordered local corrections; the value at a point is
/// the base value plus every correction whose subdomain contains the point.
#[derive(Clone)]
pub struct CompositeFunction {
    pub base: FeFunction,
    pub corrections: Vec<(SubdomainSpec, FeFunction)>,
}

impl CompositeFunction {
    pub fn new(base: FeFunction) -> CompositeFunction {
        CompositeFunction {
            base,
            corrections: Vec::new(),
        }
    }

    /// Appends a correction. Its values must vanish on the subdomain
    /// boundary (its mesh's Dirichlet ring), which `FeFunction` guarantees
    /// for functions built from local unknowns.
    pub fn push_correction(&mut self, sub: SubdomainSpec, e: FeFunction) {
        self.corrections.push((sub, e));
    }

    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        let mut v = self.base.eval(x, y)?;
        for (sub, e) in &self.corrections {
            if sub.region().contains_closure(x, y) {
                v += e.eval(x, y)?;
            }
        }
        Some(v)
    }

    /// Values of the composite at every vertex of `target` (ring and
    /// boundary vertices included). Exact when `target` is nested within
    /// the constituent meshes wherever they overlap.
    pub fn restrict_to(&self, target: &Mesh) -> Result<Vec<f64>> {
        target
            .vertices()
            .iter()
            .map(|p| {
                self.eval(p[0], p[1])
                    .ok_or_else(|| Error::Transfer(format!("composite not evaluable at {:?}", p)))
            })
            .collect()
    }
}

/// Exact `(a(u, v), b(u, v))` over the whole domain for two composite
/// functions, summed cell-by-cell over a composite partition. Both
/// arguments are single linear polynomials on every partition cell, so the
/// closed-form element integrals are exact.
pub fn pair_forms_on_partition(
    u: &CompositeFunction,
    v: &CompositeFunction,
    part: &CompositePartition,
    c: &ProblemCoeffs,
) -> Result<(f64, f64)> {
    let n_sources = part.corrections.len() + 1;
    let mut u_vals: Vec<Option<Vec<f64>>> = vec![None; n_sources];
    let mut v_vals: Vec<Option<Vec<f64>>> = vec![None; n_sources];
    let mut a_total = 0.0;
    let mut b_total = 0.0;
    for &(src, t) in &part.cells {
        let mesh: &Arc<Mesh> = part.mesh(src);
        let uv = match &u_vals[src as usize] {
            Some(v) => v,
            None => {
                u_vals[src as usize] = Some(u.restrict_to(mesh)?);
                u_vals[src as usize].as_ref().unwrap()
            }
        };
        let vv = match &v_vals[src as usize] {
            Some(v) => v,
            None => {
                v_vals[src as usize] = Some(v.restrict_to(mesh)?);
                v_vals[src as usize].as_ref().unwrap()
            }
        };
        let tri = mesh.triangles()[t as usize];
        let p = [
            mesh.vertices()[tri[0] as usize],
            mesh.vertices()[tri[1] as usize],
            mesh.vertices()[tri[2] as usize],
        ];
        let ue = [
            uv[tri[0] as usize],
            uv[tri[1] as usize],
            uv[tri[2] as usize],
        ];
        let ve = [
            vv[tri[0] as usize],
            vv[tri[1] as usize],
            vv[tri[2] as usize],
        ];
        let (ea, eb) = element_forms(p, ue, ve, c);
        a_total += ea;
        b_total += eb;
    }
    Ok((a_total, b_total))
}
