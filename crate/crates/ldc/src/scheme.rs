//! The three-level and multilevel local defect-correction schemes, their
//! symmetric and parallel (multi-subdomain) variants, schedule planning and
//! eigenfunction error reports.
//!
//! One level of the multilevel scheme solves, on each locally refined
//! subdomain mesh, the residual equation
//! `a(e, v) = λ b(u, v) − a(u, v)` (and its transposed adjoint analogue)
//! against the current composite iterate `u`, appends the correction, and
//! re-evaluates the generalized Rayleigh quotient over the composite
//! partition.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::composite::CompositeFunction;
use crate::eigen::{self, EigenResult};
use crate::error::{Error, Result};
use crate::fem::{self, FeFunction, ProblemCoeffs};
use crate::mesh::{
    build_mesh, composite_partition, extract_submesh, refine_uniform, unknowns_for, DomainSpec,
    Mesh, Region, SubdomainKind, SubdomainSpec,
};
use crate::sparse::factorize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeMode {
    /// Steps 1-2 only: coarse eigensolve plus one mesoscopic correction.
    TwoGrid,
    /// One local defect-correction level.
    ThreeLevel,
    /// Nested local corrections on finer and finer subdomain meshes.
    Multilevel,
    /// Per-level lists of disjoint correction subdomains (boundary layers
    /// plus the near-origin region), primal and adjoint lists differing.
    Parallel,
    /// Adjoint computations dropped; quotients use the primal iterate twice.
    Symmetric,
}

/// Exact rational rate parameter, e.g. `s = 2/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: i64,
    pub den: i64,
}

impl Frac {
    pub const fn new(num: i64, den: i64) -> Frac {
        Frac { num, den }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Convergence-rate symbols of the schedule condition
/// `w^r = O(H^{r+s-1+gamma})`.
#[derive(Debug, Clone, Copy)]
pub struct RateParams {
    pub r: u32,
    pub s: Frac,
    pub s2: Frac,
    pub gamma1: Frac,
    pub gamma2: Frac,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub eigen: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eigen: 1e-10 }
    }
}

/// Full run plan: grids, per-level correction subdomains, rate parameters
/// and mode.
#[derive(Clone)]
pub struct SchemeConfig {
    pub domain: DomainSpec,
    pub coeffs: ProblemCoeffs,
    /// H = 1/coarse_n.
    pub coarse_n: u32,
    /// w = 1/meso_n.
    pub meso_n: u32,
    pub levels: usize,
    /// Per level (outer index = level-1), the primal correction subdomains.
    pub primal_subdomains: Vec<Vec<SubdomainSpec>>,
    /// Adjoint correction subdomains; may differ from the primal list.
    pub adjoint_subdomains: Vec<Vec<SubdomainSpec>>,
    pub rates: RateParams,
    pub mode: SchemeMode,
    pub tolerances: Tolerances,
    /// Largest single system allowed, in unknowns.
    pub dof_budget: Option<usize>,
    pub lambda_ref: Option<f64>,
    /// Only ascent 1 is supported; anything else is rejected.
    pub ascent: usize,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        if self.ascent != 1 {
            return Err(Error::Ascent(format!(
                "ascent {} (generalized eigenspace bases are not implemented)",
                self.ascent
            )));
        }
        if self.coarse_n < 2 {
            return Err(Error::Config(format!(
                "coarse grid n={} < 2",
                self.coarse_n
            )));
        }
        if !self.meso_n.is_multiple_of(self.coarse_n)
            || !(self.meso_n / self.coarse_n).is_power_of_two()
        {
            return Err(Error::Config(format!(
                "mesoscopic grid 1/{} is not a dyadic refinement of 1/{}",
                self.meso_n, self.coarse_n
            )));
        }
        if self.primal_subdomains.len() != self.levels {
            return Err(Error::Config(format!(
                "{} primal subdomain levels for {} levels",
                self.primal_subdomains.len(),
                self.levels
            )));
        }
        if self.mode != SchemeMode::Symmetric && self.adjoint_subdomains.len() != self.levels {
            return Err(Error::Config(format!(
                "{} adjoint subdomain levels for {} levels",
                self.adjoint_subdomains.len(),
                self.levels
            )));
        }
        for (idx, level) in self.primal_subdomains.iter().enumerate() {
            if level.is_empty() || level.iter().any(|s| s.level != idx + 1) {
                return Err(Error::Config(format!(
                    "primal subdomain list at level {} is empty or mislabeled",
                    idx + 1
                )));
            }
        }
        if self.mode == SchemeMode::ThreeLevel && self.levels != 1 {
            return Err(Error::Config(format!(
                "three-level scheme has exactly one correction level, got {}",
                self.levels
            )));
        }
        if self.mode == SchemeMode::TwoGrid && self.levels != 0 {
            return Err(Error::Config(
                "two-grid scheme has no correction levels".into(),
            ));
        }
        if let Some(budget) = self.dof_budget {
            let peak = self.peak_unknowns()?;
            if peak > budget {
                return Err(Error::Budget(format!(
                    "largest planned system has {peak} unknowns, budget is {budget}"
                )));
            }
        }
        Ok(())
    }

    /// Largest single linear system the plan will factorize.
    pub fn peak_unknowns(&self) -> Result<usize> {
        let mut peak = unknowns_for(self.domain.region(), 1.0 / self.meso_n as f64)?;
        for (idx, level) in self.primal_subdomains.iter().enumerate() {
            let h = 1.0 / (self.meso_n as f64 * (1u64 << (idx + 1)) as f64);
            for sub in level.iter().chain(
                self.adjoint_subdomains
                    .get(idx)
                    .map(|v| v.as_slice())
                    .unwrap_or(&[])
                    .iter(),
            ) {
                peak = peak.max(unknowns_for(sub.region(), h)?);
            }
        }
        Ok(peak)
    }
}

fn canonical_subdomain(domain: &DomainSpec, level: usize) -> Result<SubdomainSpec> {
    let scale = 0.5_f64.powi(level as i32);
    let kind = match domain {
        DomainSpec::LShape => SubdomainKind::ScaledLShape { scale },
        DomainSpec::Slit => SubdomainKind::ScaledSlit { scale },
        _ => {
            return Err(Error::Config(
                "canonical correction subdomains exist only for the L-shape and slit domains"
                    .into(),
            ))
        }
    };
    Ok(SubdomainSpec { kind, level })
}

fn meso_exponent(coarse_n: u32, r: u32, s: Frac, gamma: Frac) -> Result<u32> {
    if !coarse_n.is_power_of_two() || coarse_n < 2 {
        return Err(Error::Config(format!("H = 1/{coarse_n} is not dyadic")));
    }
    if s.den <= 0 || gamma.den <= 0 || r == 0 {
        return Err(Error::Config(
            "rate parameters must have positive denominators".into(),
        ));
    }
    let p = coarse_n.trailing_zeros() as i64;
    // (r + s - 1 + gamma) / r as a fraction
    let num =
        (r as i64) * s.den * gamma.den + s.num * gamma.den + gamma.num * s.den - s.den * gamma.den;
    let den = (r as i64) * s.den * gamma.den;
    if num <= 0 {
        return Err(Error::Config("schedule exponent is not positive".into()));
    }
    let floor = (p * num) / den;
    let q = floor.max(p + 1);
    if q > 30 {
        return Err(Error::Config(format!(
            "mesoscopic grid exponent {q} too large"
        )));
    }
    Ok(q as u32)
}

/// Plans the plain multilevel schedule: `w` is the dyadic rounding of
/// `H^{(r+s-1+gamma)/r}` capped at `H/2`, `h_i = w/2^i`, and the canonical
/// nested subdomains at scale `2^{-i}` serve both the primal and the
/// adjoint corrections.
pub fn plan_schedule(
    domain: DomainSpec,
    coarse_n: u32,
    levels: usize,
    s: Frac,
    gamma: Frac,
    r: u32,
    dof_budget: Option<usize>,
) -> Result<SchemeConfig> {
    if levels < 1 {
        return Err(Error::Config(
            "a correction schedule needs at least one level".into(),
        ));
    }
    let q = meso_exponent(coarse_n, r, s, gamma)?;
    let subs: Vec<Vec<SubdomainSpec>> = (1..=levels)
        .map(|i| canonical_subdomain(&domain, i).map(|s| vec![s]))
        .collect::<Result<_>>()?;
    let cfg = SchemeConfig {
        domain,
        coeffs: ProblemCoeffs::laplacian(),
        coarse_n,
        meso_n: 1 << q,
        levels,
        primal_subdomains: subs.clone(),
        adjoint_subdomains: subs,
        rates: RateParams {
            r,
            s,
            s2: s,
            gamma1: gamma,
            gamma2: gamma,
        },
        mode: SchemeMode::Multilevel,
        tolerances: Tolerances::default(),
        dof_budget,
        lambda_ref: None,
        ascent: 1,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Plans the parallel variant: at level `i` the primal corrections run on
/// the near-origin region and the top boundary layer, the adjoint
/// corrections on the near-origin region and the bottom boundary layer(s).
pub fn plan_parallel_schedule(
    domain: DomainSpec,
    coarse_n: u32,
    levels: usize,
    s: Frac,
    gamma: Frac,
    r: u32,
    dof_budget: Option<usize>,
) -> Result<SchemeConfig> {
    let mut cfg = plan_schedule(domain, coarse_n, levels, s, gamma, r, None)?;
    let mut primal = Vec::with_capacity(levels);
    let mut adjoint = Vec::with_capacity(levels);
    for i in 1..=levels {
        let two = 0.5_f64.powi(i as i32);
        let top = SubdomainSpec {
            kind: SubdomainKind::Rect {
                x0: -0.5_f64.powi(i as i32 - 1),
                x1: 0.5_f64.powi(i as i32 - 1),
                y0: 1.0 - two,
                y1: 1.0,
            },
            level: i,
        };
        let bottom = |center: f64| SubdomainSpec {
            kind: SubdomainKind::Rect {
                x0: center - two,
                x1: center + two,
                y0: -1.0,
                y1: -1.0 + two,
            },
            level: i,
        };
        match domain {
            DomainSpec::LShape => {
                let near = SubdomainSpec {
                    kind: SubdomainKind::ScaledLShape {
                        scale: 0.5_f64.powi(i as i32 + 1),
                    },
                    level: i,
                };
                primal.push(vec![near, top]);
                adjoint.push(vec![near, bottom(-0.5)]);
            }
            DomainSpec::Slit => {
                let near = SubdomainSpec {
                    kind: SubdomainKind::ScaledSlit { scale: two },
                    level: i,
                };
                primal.push(vec![near, top]);
                adjoint.push(vec![near, bottom(0.5), bottom(-0.5)]);
            }
            _ => {
                return Err(Error::Config(
                    "the parallel variant is defined for the L-shape and slit domains".into(),
                ))
            }
        }
    }
    cfg.primal_subdomains = primal;
    cfg.adjoint_subdomains = adjoint;
    cfg.mode = SchemeMode::Parallel;
    cfg.dof_budget = dof_budget;
    cfg.validate()?;
    Ok(cfg)
}

/// Reference eigenvalues of the benchmark problems (the high-accuracy
/// approximations quoted with the experiments, matched to the convection
/// vector through the shift identity `λ(b) = λ(0) + |b|²/4`).
pub fn reference_lambda(domain: &DomainSpec, b: [f64; 2]) -> Option<f64> {
    match (domain, b) {
        (DomainSpec::LShape, [0.0, 3.0]) => Some(11.8897),
        (DomainSpec::LShape, [1.0, 1.0]) => Some(10.1397),
        (DomainSpec::LShape, [0.0, 10.0]) => Some(34.6397),
        (DomainSpec::Slit, [0.0, 3.0]) => Some(10.621),
        (DomainSpec::Slit, [1.0, 1.0]) => Some(8.871),
        (DomainSpec::Slit, [0.0, 10.0]) => Some(33.371),
        _ => None,
    }
}

/// Result of one correction level.
#[derive(Debug, Clone)]
pub struct LevelReport {
    pub level: usize,
    pub lambda: f64,
    /// Unknowns of the level's local spaces (summed over subdomains).
    pub local_dof: usize,
    pub error_vs_ref: Option<f64>,
    pub wall_time: Duration,
}

/// Full scheme output: the eigenvalue chain, the composite eigenpair and
/// run metadata.
#[derive(Clone)]
pub struct RunReport {
    pub mode: SchemeMode,
    pub dof_h: usize,
    pub dof_w: usize,
    pub lambda_h: f64,
    pub lambda_w: f64,
    pub levels: Vec<LevelReport>,
    pub primal: CompositeFunction,
    pub adjoint: Option<CompositeFunction>,
    pub coarse: EigenResult,
    /// Fill-reducing ordering used by every factorization in the run.
    pub ordering: &'static str,
}

impl RunReport {
    /// λ_H, λ^w, λ^{w,h_1}, ..., λ^{w,h_l}.
    pub fn lambda_chain(&self) -> Vec<f64> {
        let mut v = vec![self.lambda_h, self.lambda_w];
        v.extend(self.levels.iter().map(|l| l.lambda));
        v
    }
}

fn region_covers(parent: &Region, child: &Region) -> bool {
    let (cx0, cx1, cy0, cy1) = child.bbox();
    match (parent, child) {
        (Region::LShape { half: a }, Region::LShape { half: b })
        | (Region::Slit { half: a }, Region::Slit { half: b }) => b <= a,
        (Region::LShape { .. }, Region::Rect { .. }) => {
            [(cx0, cy0), (cx1, cy0), (cx0, cy1), (cx1, cy1)]
                .iter()
                .all(|&(x, y)| parent.contains_closure(x, y))
        }
        (Region::Slit { half }, Region::Rect { .. }) => {
            cx0 >= -half
                && cx1 <= *half
                && cy0 >= -half
                && cy1 <= *half
                && !(cx0 < 0.0 && cx1 > 0.0 && cy0 < 0.0)
        }
        _ => {
            let (px0, px1, py0, py1) = parent.bbox();
            cx0 >= px0 && cx1 <= px1 && cy0 >= py0 && cy1 <= py1
        }
    }
}

struct LevelSolve {
    sub: SubdomainSpec,
    mesh: Arc<Mesh>,
    primal_correction: Option<FeFunction>,
    adjoint_correction: Option<FeFunction>,
}

/// Step 1: solve the coarse primal and adjoint eigenproblems (the adjoint
/// is skipped in symmetric mode) with positive pairing.
pub fn step1_coarse(cfg: &SchemeConfig) -> Result<EigenResult> {
    let coarse_mesh = Arc::new(build_mesh(&cfg.domain, cfg.coarse_n)?);
    let (a_h, b_h) = fem::assemble_pair(&coarse_mesh, &cfg.coeffs)?;
    eigen::solve_pair(
        &coarse_mesh,
        &a_h,
        &b_h,
        cfg.tolerances.eigen,
        cfg.mode != SchemeMode::Symmetric,
    )
}

/// Scheme state after step 2, advanced level by level by [`local_correct`].
pub struct SchemeState {
    pub meso_mesh: Arc<Mesh>,
    pub primal: CompositeFunction,
    pub adjoint: Option<CompositeFunction>,
    /// λ^w from the mesoscopic solves.
    pub lambda_w: f64,
    /// λ^{w,h_i} of the last completed level (λ^w before any).
    pub lambda: f64,
    /// Completed correction levels.
    pub level: usize,
    partition_entries: Vec<(SubdomainSpec, Arc<Mesh>)>,
    prev_meshes: Vec<(SubdomainSpec, Arc<Mesh>)>,
}

/// Step 2: one linear solve per eigenvector on the mesoscopic grid,
/// `a(u^w, v) = λ_H b(u_H, v)` and the transposed adjoint problem, then the
/// generalized Rayleigh quotient λ^w.
pub fn step2_meso(cfg: &SchemeConfig, coarse: &EigenResult) -> Result<SchemeState> {
    let coarse_mesh = coarse.u.mesh();
    let refinements = (cfg.meso_n / cfg.coarse_n).trailing_zeros();
    let meso_mesh = if refinements == 0 {
        Arc::new(build_mesh(&cfg.domain, cfg.meso_n)?)
    } else {
        let mut m = refine_uniform(coarse_mesh);
        for _ in 1..refinements {
            m = refine_uniform(&m);
        }
        Arc::new(m)
    };
    let (a_w, b_w) = fem::assemble_pair(&meso_mesh, &cfg.coeffs)?;
    let fact_w = factorize(&a_w)?;
    let u_h_on_w = fem::prolongate(&coarse.u, &meso_mesh)?;
    let rhs: Vec<f64> = b_w
        .matvec(&u_h_on_w.unknowns())
        .iter()
        .map(|v| coarse.lambda * v)
        .collect();
    let u_w = fact_w.solve(&rhs)?;
    let primal = CompositeFunction::new(FeFunction::from_unknowns(meso_mesh.clone(), &u_w));
    let adjoint = if cfg.mode != SchemeMode::Symmetric {
        let us_on_w = fem::prolongate(&coarse.u_star, &meso_mesh)?;
        let rhs_star: Vec<f64> = b_w
            .matvec(&us_on_w.unknowns())
            .iter()
            .map(|v| coarse.lambda * v)
            .collect();
        let u_ws = fact_w.solve_transpose(&rhs_star)?;
        Some(CompositeFunction::new(FeFunction::from_unknowns(
            meso_mesh.clone(),
            &u_ws,
        )))
    } else {
        None
    };
    drop(fact_w);

    let part0 = composite_partition(meso_mesh.clone(), &[])?;
    let lambda_w = eigen::rayleigh_quotient(
        &primal,
        adjoint.as_ref().unwrap_or(&primal),
        &part0,
        &cfg.coeffs,
    )?;
    Ok(SchemeState {
        meso_mesh,
        primal,
        adjoint,
        lambda_w,
        lambda: lambda_w,
        level: 0,
        partition_entries: Vec::new(),
        prev_meshes: Vec::new(),
    })
}

/// Steps 5-6 for one level: solve the residual equations on every level
/// subdomain (primal and adjoint lists may differ), append the corrections
/// to the composite iterates, and re-evaluate the quotient λ^{w,h_i}.
///
/// Subdomain solves within one level are independent (all are driven by the
/// level-(i-1) state) and run concurrently.
pub fn local_correct(cfg: &SchemeConfig, state: &mut SchemeState) -> Result<LevelReport> {
    let started = Instant::now();
    let i = state.level + 1;
    if i > cfg.levels {
        return Err(Error::Config(format!(
            "level {i} beyond the configured {} levels",
            cfg.levels
        )));
    }
    let with_adjoint = cfg.mode != SchemeMode::Symmetric;
    let mut entries: Vec<(SubdomainSpec, bool, bool)> = Vec::new();
    for s in &cfg.primal_subdomains[i - 1] {
        entries.push((*s, true, false));
    }
    if with_adjoint {
        for s in &cfg.adjoint_subdomains[i - 1] {
            if let Some(e) = entries.iter_mut().find(|(r, _, _)| r.kind == s.kind) {
                e.2 = true;
            } else {
                entries.push((*s, false, true));
            }
        }
    }

    let lambda_prev = state.lambda;
    let primal_prev = &state.primal;
    let adjoint_prev = &state.adjoint;
    let meso_mesh = &state.meso_mesh;
    let prev_meshes = &state.prev_meshes;
    let solves: Vec<LevelSolve> = entries
        .par_iter()
        .map(|&(sub, is_primal, is_adjoint)| -> Result<LevelSolve> {
            let parent = if i == 1 {
                meso_mesh
            } else {
                prev_meshes
                    .iter()
                    .find(|(p, _)| region_covers(&p.region(), &sub.region()))
                    .map(|(_, m)| m)
                    .ok_or_else(|| {
                        Error::Config(format!("no level-{} subdomain hosts {:?}", i - 1, sub.kind))
                    })?
            };
            let (local_coarse, _) = extract_submesh(parent, &sub)?;
            let local = Arc::new(refine_uniform(&local_coarse));
            let a_loc = fem::assemble_a(&local, &cfg.coeffs)?;
            let fact = factorize(&a_loc)?;
            let primal_correction = if is_primal {
                let f = fem::assemble_functional(&local, primal_prev, lambda_prev, &cfg.coeffs)?;
                Some(FeFunction::from_unknowns(local.clone(), &fact.solve(&f)?))
            } else {
                None
            };
            let adjoint_correction = if is_adjoint {
                let g = adjoint_prev
                    .as_ref()
                    .expect("adjoint state exists in nonsymmetric modes");
                let f = fem::adjoint_functional(&local, g, lambda_prev, &cfg.coeffs)?;
                Some(FeFunction::from_unknowns(
                    local.clone(),
                    &fact.solve_transpose(&f)?,
                ))
            } else {
                None
            };
            Ok(LevelSolve {
                sub,
                mesh: local,
                primal_correction,
                adjoint_correction,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut local_dof = 0;
    let mut new_prev = Vec::with_capacity(solves.len());
    for s in solves {
        local_dof += s.mesh.n_unknowns();
        if let Some(e) = s.primal_correction {
            state.primal.push_correction(s.sub, e);
        }
        if let Some(e) = s.adjoint_correction {
            state
                .adjoint
                .as_mut()
                .expect("adjoint state exists in nonsymmetric modes")
                .push_correction(s.sub, e);
        }
        state.partition_entries.push((s.sub, s.mesh.clone()));
        new_prev.push((s.sub, s.mesh));
    }
    state.prev_meshes = new_prev;

    let part = composite_partition(state.meso_mesh.clone(), &state.partition_entries)?;
    let lambda_i = eigen::rayleigh_quotient(
        &state.primal,
        state.adjoint.as_ref().unwrap_or(&state.primal),
        &part,
        &cfg.coeffs,
    )
    .map_err(|e| Error::Config(format!("level {i}: {e}")))?;
    state.lambda = lambda_i;
    state.level = i;
    Ok(LevelReport {
        level: i,
        lambda: lambda_i,
        local_dof,
        error_vs_ref: cfg.lambda_ref.map(|lr| (lambda_i - lr).abs()),
        wall_time: started.elapsed(),
    })
}

/// Executes the configured scheme start to finish: coarse eigensolve,
/// mesoscopic correction, then one [`local_correct`] per level.
pub fn run(cfg: &SchemeConfig) -> Result<RunReport> {
    cfg.validate()?;
    let coarse = step1_coarse(cfg)?;
    let dof_h = coarse.u.mesh().n_unknowns();
    let mut state = step2_meso(cfg, &coarse)?;
    let mut reports = Vec::with_capacity(cfg.levels);
    for _ in 0..cfg.levels {
        reports.push(local_correct(cfg, &mut state)?);
    }
    Ok(RunReport {
        mode: cfg.mode,
        dof_h,
        dof_w: state.meso_mesh.n_unknowns(),
        lambda_h: coarse.lambda,
        lambda_w: state.lambda_w,
        levels: reports,
        primal: state.primal,
        adjoint: state.adjoint,
        coarse,
        ordering: crate::sparse::ORDERING,
    })
}

/// Eigenfunction error norms of a composite iterate against a reference
/// eigenfunction on a globally finer nested mesh.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    /// `‖·‖₁` over the domain minus the closure of the excluded region.
    pub h1_outside: f64,
}

/// Measures `state − reference` in L2 and H1 over the whole domain and in
/// H1 outside the closure of `excluded`. The reference is normalized to
/// unit L2 norm and sign-aligned with the state before differencing.
pub fn error_report(
    state: &CompositeFunction,
    reference: &FeFunction,
    excluded: &SubdomainSpec,
    c: &ProblemCoeffs,
) -> Result<ErrorNorms> {
    let ref_mesh = reference.mesh();
    let mut spacings = vec![state.base.mesh().spacing()];
    spacings.extend(state.corrections.iter().map(|(_, e)| e.mesh().spacing()));
    for sp in spacings {
        let ratio = sp / ref_mesh.spacing();
        if ratio < 1.0 - 1e-12 || (ratio.log2() - ratio.log2().round()).abs() > 1e-12 {
            return Err(Error::Transfer(format!(
                "reference mesh (step {}) is not nested above a state mesh (step {sp})",
                ref_mesh.spacing()
            )));
        }
    }
    let state_vals = state.restrict_to(ref_mesh)?;
    let (_, ref_norm2) = fem::forms_on_mesh(ref_mesh, reference.values(), reference.values(), c);
    let (_, inner) = fem::forms_on_mesh(ref_mesh, reference.values(), &state_vals, c);
    let scale = inner.signum() / ref_norm2.sqrt();
    let diff: Vec<f64> = state_vals
        .iter()
        .zip(reference.values())
        .map(|(s, r)| s - scale * r)
        .collect();

    let seminorm_coeffs = ProblemCoeffs::laplacian();
    let mut l2_sq = 0.0;
    let mut h1_semi_sq = 0.0;
    let mut l2_out_sq = 0.0;
    let mut h1_semi_out_sq = 0.0;
    let excluded_region = excluded.region();
    for &tri in ref_mesh.triangles() {
        let p = [
            ref_mesh.vertices()[tri[0] as usize],
            ref_mesh.vertices()[tri[1] as usize],
            ref_mesh.vertices()[tri[2] as usize],
        ];
        let d = [
            diff[tri[0] as usize],
            diff[tri[1] as usize],
            diff[tri[2] as usize],
        ];
        let (semi, mass) = fem::element_forms(p, d, d, &seminorm_coeffs);
        l2_sq += mass;
        h1_semi_sq += semi;
        let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
        let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
        if !excluded_region.contains_closure(cx, cy) {
            l2_out_sq += mass;
            h1_semi_out_sq += semi;
        }
    }
    Ok(ErrorNorms {
        l2: l2_sq.sqrt(),
        h1: (l2_sq + h1_semi_sq).sqrt(),
        h1_outside: (l2_out_sq + h1_semi_out_sq).sqrt(),
    })
}

/// `log2(e_i / e_{i+1})` for successive errors (one order per halving).
pub fn convergence_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Empirical eigenvalue convergence order from the last three values of a
/// monotone eigenvalue chain, via the ratio of successive differences.
/// Independent of any reference eigenvalue.
pub fn empirical_order(lambdas: &[f64]) -> Option<f64> {
    if lambdas.len() < 3 {
        return None;
    }
    let n = lambdas.len();
    let d1 = lambdas[n - 3] - lambdas[n - 2];
    let d2 = lambdas[n - 2] - lambdas[n - 1];
    if d2 == 0.0 || d1 / d2 <= 0.0 {
        return None;
    }
    Some((d1 / d2).log2())
}
