//! Measurements behind the verification suites. Every function builds its
//! own grids and seeded random inputs and returns raw numbers; pass/fail
//! thresholds live with the callers.

use crate::bundle::{
    boundary_operator_t, coulomb_curvature, coulomb_gauge_fix, horizontal_project, verify_bct,
    verify_smooth1, GaugeFixConfig, HorizontalForm,
};
use crate::error::{Error, Result};
use crate::forms::{conductor_project, covariant_codiff, covariant_d, FormField};
use crate::geometry::{DomainGrid, Face, MetricFamily, MetricSpec};
use crate::holonomy::{curvature_holonomy_study, fitted_slope, horizontal_lift, ConnectionLoop, CurvatureStudy, LiftConfig};
use crate::lie::Algebra;
use crate::solver::ConnectionState;
use crate::span::{
    boundary_realize, bump_raw, decompose_gauge_element, interior_span, smooth_step, CubeChart, Profile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{E, PI};
use std::sync::Arc;

/// `(N_lat, N_norm)`.
pub type Resolution = (usize, usize);

/// Metric and debug switches shared by the studies of one run.
#[derive(Clone, Debug)]
pub struct Setup {
    pub metric: MetricSpec,
    pub flip_tau: bool,
}

impl Setup {
    pub fn new(metric: MetricSpec) -> Setup {
        Setup { metric, flip_tau: false }
    }

    pub fn grid(&self, res: Resolution) -> Result<Arc<DomainGrid>> {
        DomainGrid::build_with(self.metric.clone(), res.0, res.1, self.flip_tau)
    }

    /// Same switches on a warped metric: this one if it is warped, else `φ = x₃`.
    pub fn warped(&self) -> Setup {
        let metric = match self.metric.family {
            MetricFamily::Warped { .. } => self.metric.clone(),
            _ => MetricSpec::warped_linear(),
        };
        Setup { metric, flip_tau: self.flip_tau }
    }

    pub fn flat(&self) -> Setup {
        Setup { metric: MetricSpec::flat(), flip_tau: self.flip_tau }
    }
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Which grid spacing a convergence table is plotted against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Lateral,
    Normal,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n_lat: usize,
    pub n_norm: usize,
    pub h: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub name: String,
    pub spacing: Spacing,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log residual` against `log h`.
    pub fitted_order: f64,
}

#[derive(Serialize)]
struct CsvRow {
    n_lat: usize,
    n_norm: usize,
    h: f64,
    residual: f64,
    fitted_order: f64,
}

impl ConvergenceTable {
    pub fn new(name: &str, spacing: Spacing, res: &[Resolution], residuals: &[f64]) -> ConvergenceTable {
        let rows: Vec<ConvergenceRow> = res
            .iter()
            .zip(residuals)
            .map(|(&(n_lat, n_norm), &residual)| {
                let h = match spacing {
                    Spacing::Lateral => 1.0 / n_lat as f64,
                    Spacing::Normal => 1.0 / (n_norm - 1) as f64,
                };
                ConvergenceRow { n_lat, n_norm, h, residual }
            })
            .collect();
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let fitted_order = fitted_slope(&h, residuals);
        ConvergenceTable { name: name.to_string(), spacing, rows, fitted_order }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            let row = CsvRow { n_lat: r.n_lat, n_norm: r.n_norm, h: r.h, residual: r.residual, fitted_order: self.fitted_order };
            w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Random conductor field from a few low modes: lateral wave numbers in
/// `{−1, 0, 1}`, `sin(mπx₃)` (`m ≤ 2`) on the components with a trace.
///
/// 0-forms use six single-component modes; 1-forms three modes per component
/// and coefficient, with `cos(mπx₃ + φ)` on the normal component.
pub fn low_mode_field<R: Rng>(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, degree: usize, rng: &mut R) -> Result<FormField> {
    let dim = alg.dim();
    match degree {
        0 => {
            let modes: Vec<(f64, f64, f64, f64, usize, f64)> = (0..6)
                .map(|_| {
                    (
                        rng.gen_range(-1i32..=1) as f64,
                        rng.gen_range(-1i32..=1) as f64,
                        rng.gen_range(1i32..=2) as f64,
                        rng.gen_range(0.0..2.0 * PI),
                        rng.gen_range(0..dim),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect();
            FormField::from_fn(grid, alg, 0, |x, _, o| {
                for &(p, q, m, ph, c, a) in &modes {
                    o[c] += a * (m * PI * x[2]).sin() * (2.0 * PI * (p * x[0] + q * x[1]) + ph).cos();
                }
            })
        }
        1 => {
            let modes: Vec<(f64, f64, f64, f64, f64)> = (0..3 * dim * 3)
                .map(|_| {
                    (
                        rng.gen_range(-1i32..=1) as f64,
                        rng.gen_range(-1i32..=1) as f64,
                        rng.gen_range(1i32..=2) as f64,
                        rng.gen_range(0.0..2.0 * PI),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect();
            let f = FormField::from_fn(grid, alg, 1, |x, c, o| {
                for (a, out) in o.iter_mut().enumerate() {
                    for m in 0..3 {
                        let (p, q, kz, ph, amp) = modes[(c * dim + a) * 3 + m];
                        let lat = (2.0 * PI * (p * x[0] + q * x[1]) + ph).cos();
                        let nor = if c < 2 { (kz * PI * x[2]).sin() } else { (kz * PI * x[2] + ph).cos() };
                        *out += amp * lat * nor;
                    }
                }
            })?;
            Ok(conductor_project(&f))
        }
        d => Err(Error::Degree(d)),
    }
}

/// Small random conductor connection form with `‖η‖ = amp`.
fn small_eta(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, amp: f64, r: &mut ChaCha8Rng) -> Result<FormField> {
    let e = conductor_project(&FormField::random_smooth(grid, alg, 1, r, true)?);
    let n = e.norm();
    Ok(e.scale(amp / n))
}

/// Largest `|⟨d_A u, v⟩ − ⟨u, d*_A v⟩| / (‖u‖‖v‖)` over random conductor `u`
/// and arbitrary `v`, cycling through degrees 0 and 1, flat and warped
/// metrics, and flat and curved connections.
pub fn stokes_defect(res: Resolution, trials: usize, seed: u64) -> Result<f64> {
    let alg = Algebra::su2();
    let grids = [DomainGrid::build(MetricSpec::flat(), res.0, res.1)?, DomainGrid::build(MetricSpec::warped_linear(), res.0, res.1)?];
    let mut r = rng(seed, 1);
    let etas = [small_eta(&grids[0], &alg, 0.5, &mut r)?, small_eta(&grids[1], &alg, 0.5, &mut r)?];
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let fam = t % 2;
        let p = (t / 2) % 2;
        let eta = if (t / 4) % 2 == 1 { Some(&etas[fam]) } else { None };
        let g = &grids[fam];
        let u = conductor_project(&FormField::random_smooth(g, &alg, p, &mut r, false)?);
        let v = FormField::random_smooth(g, &alg, p + 1, &mut r, false)?;
        let lhs = covariant_d(eta, &u)?.inner(&v)?;
        let rhs = u.inner(&covariant_codiff(eta, &v)?)?;
        worst = worst.max((lhs - rhs).abs() / (u.norm() * v.norm()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenCheck {
    /// Largest `‖Δ_A G_A f − f‖ / ‖f‖` (interior nodes).
    pub max_relative_residual: f64,
    pub max_iterations: usize,
    pub solves: usize,
}

/// `Δ_A G_A f = f` for random sources at a random small connection.
pub fn green_random(setup: &Setup, res: Resolution, count: usize, seed: u64) -> Result<GreenCheck> {
    let alg = Algebra::su2();
    let g = setup.grid(res)?;
    let mut r = rng(seed, 2);
    let a = ConnectionState::new(small_eta(&g, &alg, 0.3, &mut r)?)?;
    let mut out = GreenCheck { max_relative_residual: 0.0, max_iterations: 0, solves: 0 };
    for _ in 0..count {
        let f = conductor_project(&FormField::random_smooth(&g, &alg, 0, &mut r, true)?);
        let (u, rep) = a.green(&f)?;
        let res = conductor_project(&a.laplacian(&u)?.sub(&f)?).norm() / f.norm();
        out.max_relative_residual = out.max_relative_residual.max(res);
        out.max_iterations = out.max_iterations.max(rep.iterations);
        out.solves += 1;
    }
    Ok(out)
}

/// `max |G₀(π² sin(πx₃) e1) − sin(πx₃) e1|` on the flat slab, with `h_norm`.
pub fn green_analytic(res: Resolution) -> Result<(f64, f64)> {
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), res.0, res.1)?;
    let a = ConnectionState::flat(&g, &alg);
    let f = FormField::scalar_times(&g, &alg, &[1.0, 0.0, 0.0], |x| PI * PI * (PI * x[2]).sin());
    let (u, _) = a.green(&f)?;
    Ok((u.sub(&f.scale(1.0 / (PI * PI)))?.sup_norm(), g.h_norm))
}

/// Analytic Green errors over several resolutions.
pub fn laplacian_study(res: &[Resolution]) -> Result<ConvergenceTable> {
    let errs = res.iter().map(|&r| green_analytic(r).map(|e| e.0)).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::new("green-analytic", Spacing::Normal, res, &errs))
}

/// Inverse-power estimate of the sharp Poincaré constant on the flat slab.
pub fn poincare_constant(res: Resolution, seed: u64) -> Result<f64> {
    let g = DomainGrid::build(MetricSpec::flat(), res.0, res.1)?;
    let a = ConnectionState::flat(&g, &Algebra::su2());
    a.poincare_sharp(&mut rng(seed, 3), 30)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectorCheck {
    /// `‖P(Pω) − Pω‖ / ‖ω‖`.
    pub idempotence: f64,
    /// `‖d*_A Pω‖ / ‖ω‖`.
    pub divergence: f64,
    /// `|⟨Pω, d_A γ⟩| / (‖ω‖‖γ‖)`.
    pub orthogonality: f64,
}

pub fn projector_trials(setup: &Setup, res: Resolution, trials: usize, seed: u64) -> Result<ProjectorCheck> {
    let alg = Algebra::su2();
    let g = setup.grid(res)?;
    let mut r = rng(seed, 4);
    let a = ConnectionState::new(small_eta(&g, &alg, 0.2, &mut r)?)?;
    let mut out = ProjectorCheck { idempotence: 0.0, divergence: 0.0, orthogonality: 0.0 };
    for _ in 0..trials {
        let w = conductor_project(&FormField::random_smooth(&g, &alg, 1, &mut r, true)?);
        let gamma = conductor_project(&FormField::random_smooth(&g, &alg, 0, &mut r, true)?);
        let p = horizontal_project(&a, &w)?;
        let pp = horizontal_project(&a, p.form())?;
        let wn = w.norm();
        out.idempotence = out.idempotence.max(pp.form().sub(p.form())?.norm() / wn);
        out.divergence = out.divergence.max(conductor_project(&a.d_star(p.form())?).norm() / wn);
        let ip = p.form().inner(&a.d(&gamma)?)?.abs();
        out.orthogonality = out.orthogonality.max(ip / (wn * gamma.norm()));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeFixCheck {
    pub max_iterations: usize,
    pub max_residual: f64,
    /// `‖d*((A + d_Aγ)·g − A)‖ / ‖γ‖` for the pure-vertical perturbation.
    pub vertical_ratio: f64,
    pub vertical_iterations: usize,
}

/// Newton gauge fixing at the flat connection for random small perturbations
/// and one pure-vertical perturbation.
pub fn gauge_fix_trials(setup: &Setup, res: Resolution, count: usize, seed: u64) -> Result<GaugeFixCheck> {
    let alg = Algebra::su2();
    let g = setup.grid(res)?;
    let a = ConnectionState::flat(&g, &alg);
    let cfg = GaugeFixConfig::default();
    let mut r = rng(seed, 5);
    let limit = 0.02 * g.volume().sqrt();
    let mut out = GaugeFixCheck { max_iterations: 0, max_residual: 0.0, vertical_ratio: 0.0, vertical_iterations: 0 };
    for _ in 0..count {
        let amp = r.gen_range(0.2..1.0) * limit;
        let eta = small_eta(&g, &alg, amp, &mut r)?;
        let (_, rep) = coulomb_gauge_fix(&a, &eta, &cfg)?;
        out.max_iterations = out.max_iterations.max(rep.iterations);
        out.max_residual = out.max_residual.max(rep.residual);
    }
    let gamma = conductor_project(&FormField::random_smooth(&g, &alg, 0, &mut r, true)?);
    let gamma = gamma.scale(limit / a.d(&gamma)?.norm());
    let (_, rep) = coulomb_gauge_fix(&a, &a.d(&gamma)?, &cfg)?;
    out.vertical_ratio = rep.residual / gamma.norm();
    out.vertical_iterations = rep.iterations;
    Ok(out)
}

fn horizontal_pair(a: &ConnectionState, seed: u64, stream: u64) -> Result<(HorizontalForm, HorizontalForm)> {
    let mut r = rng(seed, stream);
    let x = horizontal_project(a, &low_mode_field(a.grid(), a.algebra(), 1, &mut r)?)?;
    let y = horizontal_project(a, &low_mode_field(a.grid(), a.algebra(), 1, &mut r)?)?;
    Ok((x, y))
}

/// Residual of `d[α·β](ν) + 2τ[α·β]` for projected low-mode pairs at the
/// flat connection, per resolution (the fields are the same functions).
pub fn bct_study(setup: &Setup, res: &[Resolution], seed: u64) -> Result<ConvergenceTable> {
    let alg = Algebra::su2();
    let mut errs = Vec::new();
    for &rr in res {
        let a = ConnectionState::flat(&setup.grid(rr)?, &alg);
        let (x, y) = horizontal_pair(&a, seed, 6)?;
        errs.push(verify_bct(&a, &x, &y)?.residual);
    }
    Ok(ConvergenceTable::new("bct-residual", Spacing::Normal, res, &errs))
}

/// The bct residual for a constructed pair whose wedge-dot vanishes on a
/// layer of width 0.3 at both faces (it should be zero up to roundoff).
///
/// The bracket is supported in `0.4 ≤ x₃ ≤ 0.6`; `N_norm` is refined
/// (`N → 2N − 1`) until the one-sided normal stencil, which reaches eight
/// spacings into the slab, stays clear of it.
pub fn bct_vanishing(setup: &Setup, res: Resolution) -> Result<f64> {
    let alg = Algebra::su2();
    let mut n_norm = res.1;
    while 8.0 / (n_norm - 1) as f64 >= 0.4 {
        n_norm = 2 * n_norm - 1;
    }
    let g = setup.grid((res.0, n_norm))?;
    let a = ConnectionState::flat(&g, &alg);
    let chart = CubeChart::interior([0.0, 0.0, 0.3], [1.0, 1.0, 0.4])?;
    let psi = |x: [f64; 3]| {
        let b = |t: f64| bump_raw((t - 0.5) / 0.2) * E;
        0.05 * b(x[0]) * b(x[1]) * bump_raw((x[2] - 0.5) / 0.1) * E
    };
    let cert = crate::span::interior_realize(&g, &alg, &chart, Profile::Analytic(&psi), &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])?;
    let t = &cert.terms[0];
    let x = HorizontalForm::certify(&a, t.alpha.to_dense(&g, &alg)?)?;
    let y = HorizontalForm::certify(&a, t.beta.to_dense(&g, &alg)?)?;
    Ok(verify_bct(&a, &x, &y)?.residual)
}

/// `‖T_A(𝓡_A(α,β))‖_∞` per resolution for `pairs` projected low-mode pairs.
pub fn kernel_study(setup: &Setup, res: &[Resolution], pairs: usize, seed: u64) -> Result<Vec<ConvergenceTable>> {
    let alg = Algebra::su2();
    let grids = res.iter().map(|&r| setup.grid(r)).collect::<Result<Vec<_>>>()?;
    (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut errs = Vec::new();
            for g in &grids {
                let a = ConnectionState::flat(g, &alg);
                let (x, y) = horizontal_pair(&a, seed, 100 + p as u64)?;
                let curv = coulomb_curvature(&a, &x, &y)?;
                errs.push(boundary_operator_t(&a, &curv)?.sup());
            }
            Ok(ConvergenceTable::new(&format!("t-curvature-{p}"), Spacing::Normal, res, &errs))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationCheck {
    pub n_lat: usize,
    pub n_norm: usize,
    pub h: f64,
    pub error: f64,
    pub divergence: f64,
    pub terms: usize,
}

/// Realizes a smooth interior 𝔨-valued field (all components) over the
/// automatic interior cover on the flat slab.
pub fn interior_realization(res: Resolution) -> Result<RealizationCheck> {
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), res.0, res.1)?;
    let env = |z: f64| bump_raw((z - 0.5) / 0.2);
    let psi = FormField::from_fn(&g, &alg, 0, |x, _, o| {
        let l = 2.0 * PI;
        o[0] = 0.05 * env(x[2]) * (l * x[0]).cos();
        o[1] = 0.05 * env(x[2]) * (l * x[1]).sin();
        o[2] = 0.05 * env(x[2]) * (l * (x[0] + x[1])).cos();
    })?;
    let c = interior_span(&psi, None)?;
    Ok(RealizationCheck {
        n_lat: res.0,
        n_norm: res.1,
        h: g.h_lat.max(g.h_norm),
        error: c.reconstruction_error,
        divergence: c.divergence_residual,
        terms: c.terms.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryRealizationStudy {
    pub table: ConvergenceTable,
    /// Largest tangential face trace of the constructed forms.
    pub cbc_trace: f64,
    pub divergence: f64,
    pub compatibility: f64,
}

/// Boundary-chart realization of `ψ = f·cutoff·exp(−2τy₃)` at both faces of
/// a warped slab.
pub fn boundary_realization(setup: &Setup, res: &[Resolution]) -> Result<BoundaryRealizationStudy> {
    let alg = Algebra::su2();
    let mut errs = Vec::new();
    let (mut trace, mut div, mut compat): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &rr in res {
        let g = setup.grid(rr)?;
        let mut worst: f64 = 0.0;
        for face in Face::BOTH {
            let chart = CubeChart::boundary(face, [0.1, 0.3], [1.0, 1.0], 1.0)?;
            let tau = g.tau_at(face, 0, 0);
            let psi = move |x: [f64; 3]| {
                let y = if face == Face::F0 { x[2] } else { 1.0 - x[2] };
                let b = |t: f64| bump_raw((t - 0.5) / 0.2) * E;
                let t = chart.local(x).map(|t| b(t[0]) * b(t[1])).unwrap_or(0.0);
                0.05 * t * (1.0 - smooth_step((y - 0.3) / 0.25)) * (-2.0 * tau * y).exp()
            };
            let c = boundary_realize(&g, &alg, &chart, Profile::Analytic(&psi), &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], None)?;
            worst = worst.max(c.reconstruction_error);
            trace = trace.max(c.cbc_trace);
            div = div.max(c.divergence_residual);
            compat = compat.max(c.compatibility);
        }
        errs.push(worst);
    }
    Ok(BoundaryRealizationStudy {
        table: ConvergenceTable::new("lbo-reconstruction", Spacing::Lateral, res, &errs),
        cbc_trace: trace,
        divergence: div,
        compatibility: compat,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Smooth1Study {
    pub table: ConvergenceTable,
    /// Relative defect of the Δ-of-bracket expansion, per resolution.
    pub expansion_defect: Vec<f64>,
    /// `max ‖T₀ gᵢ‖_∞` of the inputs, per resolution.
    pub input_t0: Vec<f64>,
}

/// Bracket identity for `T₀` with inputs `gᵢ = G₀ wᵢ`, where the sources
/// have vanishing normal derivative at the faces (so `T₀ gᵢ → 0`).
pub fn smooth1_study(res: &[Resolution]) -> Result<Smooth1Study> {
    let alg = Algebra::su2();
    let (mut errs, mut exp, mut t0) = (Vec::new(), Vec::new(), Vec::new());
    for &rr in res {
        let g = DomainGrid::build(MetricSpec::flat(), rr.0, rr.1)?;
        let a = ConnectionState::flat(&g, &alg);
        let w1 = FormField::from_fn(&g, &alg, 0, |x, _, o| {
            o[0] = (PI * x[2]).cos() * (2.0 * PI * x[0]).cos();
            o[1] = 0.5 * (2.0 * PI * x[2]).cos();
        })?;
        let w2 = FormField::from_fn(&g, &alg, 0, |x, _, o| {
            o[2] = (PI * x[2]).cos() + 0.3 * (2.0 * PI * x[1]).sin();
            o[0] = 0.4 * (2.0 * PI * x[2]).cos() * (2.0 * PI * (x[0] + x[1])).cos();
        })?;
        let (g1, _) = a.green(&w1)?;
        let (g2, _) = a.green(&w2)?;
        let r = verify_smooth1(&a, &g1, &g2, 1.0)?;
        errs.push(r.residual);
        exp.push(r.expansion_defect);
        t0.push(r.input_t0[0].max(r.input_t0[1]));
    }
    Ok(Smooth1Study { table: ConvergenceTable::new("smooth1-residual", Spacing::Normal, res, &errs), expansion_defect: exp, input_t0: t0 })
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineRow {
    pub field: usize,
    pub n_lat: usize,
    pub n_norm: usize,
    pub t0_residual: f64,
    pub kernel_residual: f64,
    pub reconstruction_error: f64,
    pub total_residual: f64,
    pub terms: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineStudy {
    pub rows: Vec<PipelineRow>,
    /// Total residual per field.
    pub tables: Vec<ConvergenceTable>,
}

/// Full decompositions of `fields` random low-mode conductor 0-forms.
pub fn pipeline_study(res: &[Resolution], fields: usize, seed: u64) -> Result<PipelineStudy> {
    let alg = Algebra::su2();
    let grids = res.iter().map(|&r| DomainGrid::build(MetricSpec::flat(), r.0, r.1)).collect::<Result<Vec<_>>>()?;
    let per: Vec<Result<Vec<PipelineRow>>> = (0..fields)
        .into_par_iter()
        .map(|k| {
            grids
                .iter()
                .map(|g| {
                    let f = low_mode_field(g, &alg, 0, &mut rng(seed, 200 + k as u64))?;
                    let d = decompose_gauge_element(&f)?;
                    Ok(PipelineRow {
                        field: k,
                        n_lat: g.n_lat,
                        n_norm: g.n_norm,
                        t0_residual: d.boundary_layer.t0_residual,
                        kernel_residual: d.kernel_residual,
                        reconstruction_error: d.reconstruction_error,
                        total_residual: d.total_residual,
                        terms: d.layers.iter().map(|l| l.terms.len()).sum(),
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut tables = Vec::new();
    for (k, r) in per.into_iter().enumerate() {
        let r = r?;
        let totals: Vec<f64> = r.iter().map(|x| x.total_residual).collect();
        tables.push(ConvergenceTable::new(&format!("decompose-total-{k}"), Spacing::Lateral, res, &totals));
        rows.extend(r);
    }
    Ok(PipelineStudy { rows, tables })
}

/// `max |u − π e1|` over both faces for `u = T₀ g`, `g = G₀(sin(πx₃) e1)`,
/// as computed by the decomposition; with `h_norm`.
pub fn pipeline_analytic(res: Resolution) -> Result<(f64, f64)> {
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), res.0, res.1)?;
    let a = ConnectionState::flat(&g, &alg);
    let src = FormField::scalar_times(&g, &alg, &[1.0, 0.0, 0.0], |x| (PI * x[2]).sin());
    let (f, _) = a.green(&src)?;
    let d = decompose_gauge_element(&f)?;
    let mut e: f64 = 0.0;
    for face in Face::BOTH {
        for v in d.u.face(face).values.chunks(3) {
            e = e.max((v[0] - PI).abs()).max(v[1].abs()).max(v[2].abs());
        }
    }
    Ok((e, g.h_norm))
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyCheck {
    pub study: CurvatureStudy,
    /// `‖log g‖` after a retraced segment.
    pub retrace: f64,
    pub face_defect: f64,
    pub solves: usize,
}

/// Small-square holonomy against `−2G[α·β]` for random unit horizontal
/// forms at the flat connection, plus a retraced loop.
pub fn holonomy_check(res: Resolution, eps: &[f64], cfg: &LiftConfig, seed: u64) -> Result<HolonomyCheck> {
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), res.0, res.1)?;
    let a = ConnectionState::flat(&g, &alg);
    let mut r = rng(seed, 7);
    let mut unit = || -> Result<HorizontalForm> {
        let w = conductor_project(&FormField::random_smooth(&g, &alg, 1, &mut r, true)?);
        let n = w.norm();
        horizontal_project(&a, &w.scale(1.0 / n))
    };
    let x = unit()?;
    let y = unit()?;
    let study = curvature_holonomy_study(&a, &x, &y, eps, cfg)?;
    let back = ConnectionLoop::retrace(&a.eta_field(), x.form(), eps[0], 4)?;
    let lift = horizontal_lift(&back, cfg)?;
    Ok(HolonomyCheck {
        study,
        retrace: lift.g_end.log()?.norm(),
        face_defect: lift.g_end.face_defect(),
        solves: lift.solves.len(),
    })
}
