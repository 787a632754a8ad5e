//! Gauge action, Coulomb gauge fixing, the horizontal projector, Coulomb
//! curvature, the boundary operator `T_A` and the boundary identities.

use crate::error::{Error, Result};
use crate::forms::{self, conductor_project, extrapolate_faces, wedge_dot, FormField};
use crate::geometry::{BoundaryField, DomainGrid, Face};
use crate::lie::{expm, logm, Algebra, CMat};
use crate::solver::{ConnectionState, SolveReport};
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Relative `‖d*_A α‖ / ‖α‖` below which a 1-form counts as horizontal.
pub const HORIZONTAL_TOL: f64 = 1e-8;

/// A group-valued field, one unitary matrix per node.
#[derive(Clone, Debug)]
pub struct GaugeTransform {
    grid: Arc<DomainGrid>,
    alg: Arc<Algebra>,
    n: usize,
    /// `2n²` reals per node: row-major `(re, im)` matrix entries.
    data: Vec<f64>,
}

impl GaugeTransform {
    pub fn identity(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>) -> GaugeTransform {
        let n = alg.matrix_size();
        let id = CMat::identity(n, n);
        let mut g = GaugeTransform { grid: grid.clone(), alg: alg.clone(), n, data: vec![0.0; grid.nodes() * 2 * n * n] };
        for node in 0..grid.nodes() {
            g.set(node, &id);
        }
        g
    }

    /// Nodewise `exp(X)` of a 0-form.
    pub fn exp(x: &FormField) -> Result<GaugeTransform> {
        if x.degree() != 0 {
            return Err(Error::Degree(x.degree()));
        }
        let mut g = GaugeTransform::identity(x.grid(), x.algebra());
        let alg = x.algebra().clone();
        for node in 0..x.grid().nodes() {
            let c = x.at(0, node);
            if c.iter().any(|v| *v != 0.0) {
                g.set(node, &expm(&alg.matrix(c)));
            }
        }
        Ok(g)
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.alg
    }

    pub fn matrix_size(&self) -> usize {
        self.n
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn from_raw(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, data: Vec<f64>) -> Result<GaugeTransform> {
        let n = alg.matrix_size();
        if data.len() != grid.nodes() * 2 * n * n {
            return Err(Error::Shape("gauge transform data has the wrong length".into()));
        }
        Ok(GaugeTransform { grid: grid.clone(), alg: alg.clone(), n, data })
    }

    pub fn mat(&self, node: usize) -> CMat {
        let s = node * 2 * self.n * self.n;
        CMat::from_fn(self.n, self.n, |r, c| {
            let k = s + 2 * (r * self.n + c);
            Complex64::new(self.data[k], self.data[k + 1])
        })
    }

    pub fn set(&mut self, node: usize, m: &CMat) {
        let s = node * 2 * self.n * self.n;
        for r in 0..self.n {
            for c in 0..self.n {
                let k = s + 2 * (r * self.n + c);
                self.data[k] = m[(r, c)].re;
                self.data[k + 1] = m[(r, c)].im;
            }
        }
    }

    pub fn inverse(&self) -> GaugeTransform {
        let mut out = self.clone();
        for node in 0..self.grid.nodes() {
            out.set(node, &self.mat(node).adjoint());
        }
        out
    }

    /// Nodewise product `self · other`.
    pub fn mul(&self, other: &GaugeTransform) -> Result<GaugeTransform> {
        if !Arc::ptr_eq(&self.grid, &other.grid) {
            return Err(Error::Shape("gauge transforms on different grids".into()));
        }
        let mut out = self.clone();
        for node in 0..self.grid.nodes() {
            out.set(node, &(self.mat(node) * other.mat(node)));
        }
        Ok(out)
    }

    /// Nodewise principal logarithm.
    pub fn log(&self) -> Result<FormField> {
        let mut x = FormField::zeros(&self.grid, &self.alg, 0)?;
        for node in 0..self.grid.nodes() {
            let l = logm(&self.mat(node))?;
            let l = (&l - l.adjoint()) * Complex64::new(0.5, 0.0);
            let c = self.alg.project(&l);
            x.at_mut(0, node).copy_from_slice(&c);
        }
        Ok(x)
    }

    /// Largest entrywise distance from the identity on the two faces.
    pub fn face_defect(&self) -> f64 {
        let g = &self.grid;
        let id = CMat::identity(self.n, self.n);
        let mut m: f64 = 0.0;
        for face in Face::BOTH {
            for i in 0..g.n_lat {
                for j in 0..g.n_lat {
                    let node = g.inward_node(face, i, j, 0);
                    m = m.max((self.mat(node) - &id).iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
        }
        m
    }

    pub fn is_conductor(&self, tol: f64) -> bool {
        self.face_defect() <= tol
    }

    /// Largest entrywise distance from the identity over all nodes.
    pub fn distance_to_identity(&self) -> f64 {
        let id = CMat::identity(self.n, self.n);
        (0..self.grid.nodes())
            .map(|node| (self.mat(node) - &id).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Largest `‖gᴴg − I‖` entry over nodes.
    pub fn unitarity_defect(&self) -> f64 {
        let id = CMat::identity(self.n, self.n);
        (0..self.grid.nodes())
            .map(|node| {
                let m = self.mat(node);
                (m.adjoint() * &m - &id).iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// `g⁻¹ dg + Ad(g⁻¹) η`, with `dg` from the grid stencils, as a 1-form.
pub fn transform_form(g: &GaugeTransform, eta: &FormField) -> Result<FormField> {
    if eta.degree() != 1 {
        return Err(Error::Degree(eta.degree()));
    }
    let grid = g.grid.clone();
    let alg = g.alg.clone();
    let dim = alg.dim();
    let nn = grid.nodes();
    let block = 2 * g.n * g.n;
    let mut dg = vec![vec![0.0; nn * block]; 3];
    for (axis, d) in dg.iter_mut().enumerate() {
        forms::d_axis(&grid, axis, block, &g.data, d);
    }
    let mut out = FormField::zeros(&grid, &alg, 1)?;
    let mut tmp = vec![0.0; dim];
    for node in 0..nn {
        let m = g.mat(node);
        let mi = m.adjoint();
        let ad = alg.ad_matrix(&mi);
        for i in 0..3 {
            let di = CMat::from_fn(g.n, g.n, |r, c| {
                let k = node * block + 2 * (r * g.n + c);
                Complex64::new(dg[i][k], dg[i][k + 1])
            });
            let mc = if di.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                vec![0.0; dim]
            } else {
                alg.project(&(&mi * di))
            };
            let e = eta.at(i, node);
            for a in 0..dim {
                tmp[a] = mc[a] + (0..dim).map(|b| ad[a * dim + b] * e[b]).sum::<f64>();
            }
            out.at_mut(i, node).copy_from_slice(&tmp);
        }
    }
    Ok(out)
}

/// The gauge action `A·g`.
pub fn gauge_act(a: &ConnectionState, g: &GaugeTransform) -> Result<ConnectionState> {
    let defect = g.face_defect();
    if defect > 1e-12 {
        return Err(Error::Validation(format!("gauge transform is not the identity on the faces ({defect:.2e})")));
    }
    let eta = transform_form(g, &a.eta_field())?;
    let mut out = ConnectionState::new(conductor_project(&eta))?;
    out.config = a.config;
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeFixReport {
    pub iterations: usize,
    /// `‖d*_A((A+η)·g − A)‖` after the last step.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub last_solve: Option<SolveReport>,
}

#[derive(Clone, Copy, Debug)]
pub struct GaugeFixConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Allowed `‖η‖` as a multiple of `vol^{1/2}`.
    pub smallness: f64,
}

impl Default for GaugeFixConfig {
    fn default() -> Self {
        GaugeFixConfig { tolerance: 1e-9, max_iterations: 50, smallness: 0.1 }
    }
}

/// L² norm over interior nodes of a 0-form (face slots of `d*` are not part of the equation).
pub fn interior_norm(f: &FormField) -> f64 {
    conductor_project(f).norm()
}

/// `(A+η)·g − A` for `g = exp(X)`.
pub fn gauge_difference(a: &ConnectionState, eta: &FormField, g: &GaugeTransform) -> Result<FormField> {
    let total = a.eta_field().add(eta)?;
    let moved = transform_form(g, &total)?;
    moved.sub(&a.eta_field())
}

/// Newton iteration for `X` with `d*_A((A+η)·exp(X) − A) = 0`, using `G_A` as
/// the approximate inverse of the linearization.
pub fn coulomb_gauge_fix(
    a: &ConnectionState,
    eta: &FormField,
    cfg: &GaugeFixConfig,
) -> Result<(GaugeTransform, GaugeFixReport)> {
    let defect = eta.conductor_defect();
    if defect > 1e-12 {
        return Err(Error::Validation(format!("perturbation is not conductor ({defect:.2e})")));
    }
    let limit = cfg.smallness * a.grid().volume().sqrt();
    if eta.norm() > limit {
        return Err(Error::Validation(format!("perturbation norm {:.3e} exceeds {limit:.3e}", eta.norm())));
    }
    let mut x = FormField::zeros(a.grid(), a.algebra(), 0)?;
    let mut g = GaugeTransform::identity(a.grid(), a.algebra());
    let mut history = Vec::new();
    let mut last = None;
    for it in 0..=cfg.max_iterations {
        let f = a.d_star(&gauge_difference(a, eta, &g)?)?;
        let f = conductor_project(&f);
        let r = f.norm();
        history.push(r);
        if r <= cfg.tolerance {
            return Ok((g, GaugeFixReport { iterations: it, residual: r, residual_history: history, last_solve: last }));
        }
        if it == cfg.max_iterations || !r.is_finite() {
            break;
        }
        let (step, rep) = a.green(&f)?;
        last = Some(rep);
        x.axpy(-1.0, &step)?;
        g = GaugeTransform::exp(&x)?;
    }
    Err(Error::GaugeFix { iterations: cfg.max_iterations, residual: *history.last().unwrap_or(&f64::NAN) })
}

/// A conductor 1-form certified to satisfy `d*_A α ≈ 0`.
#[derive(Clone, Debug)]
pub struct HorizontalForm {
    form: FormField,
    /// `‖d*_A α‖ / ‖α‖` at certification.
    pub residual: f64,
}

impl HorizontalForm {
    /// Checks the conductor condition and `‖d*_A α‖ ≤ HORIZONTAL_TOL·‖α‖`.
    pub fn certify(a: &ConnectionState, form: FormField) -> Result<HorizontalForm> {
        let residual = horizontal_residual(a, &form)?;
        if residual > HORIZONTAL_TOL {
            return Err(Error::Validation(format!("form is not horizontal (relative d* residual {residual:.2e})")));
        }
        Ok(HorizontalForm { form, residual })
    }

    pub fn form(&self) -> &FormField {
        &self.form
    }

    pub fn into_form(self) -> FormField {
        self.form
    }
}

/// `‖d*_A α‖ / ‖α‖` over interior nodes; fails for non-conductor input.
pub fn horizontal_residual(a: &ConnectionState, form: &FormField) -> Result<f64> {
    if form.degree() != 1 {
        return Err(Error::Degree(form.degree()));
    }
    let defect = form.conductor_defect();
    if defect > 1e-12 {
        return Err(Error::Validation(format!("form is not conductor ({defect:.2e})")));
    }
    let n = form.norm();
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(interior_norm(&a.d_star(form)?) / n)
}

/// `P_A ω = ω − d_A G_A d*_A ω`.
pub fn horizontal_project(a: &ConnectionState, omega: &FormField) -> Result<HorizontalForm> {
    if omega.degree() != 1 {
        return Err(Error::Degree(omega.degree()));
    }
    let defect = omega.conductor_defect();
    if defect > 1e-12 {
        return Err(Error::Validation(format!("input is not conductor ({defect:.2e})")));
    }
    let div = a.d_star(omega)?;
    let (u, _) = a.green(&div)?;
    let mut p = omega.clone();
    p.axpy(-1.0, &a.d(&u)?)?;
    let residual = horizontal_residual(a, &p)?;
    Ok(HorizontalForm { form: p, residual })
}

/// `𝓡_A(α, β) = −2 G_A([α·β])`.
pub fn coulomb_curvature(a: &ConnectionState, alpha: &HorizontalForm, beta: &HorizontalForm) -> Result<FormField> {
    for f in [alpha, beta] {
        let r = horizontal_residual(a, &f.form)?;
        if r > HORIZONTAL_TOL {
            return Err(Error::Validation(format!("input is not horizontal at this connection ({r:.2e})")));
        }
    }
    let w = wedge_dot(&alpha.form, &beta.form)?;
    let (u, _) = a.green(&w)?;
    Ok(u.scale(-2.0))
}

/// Per-face values of a boundary quantity and their combined sup norm.
#[derive(Clone, Debug)]
pub struct FacePair {
    pub f0: BoundaryField,
    pub f1: BoundaryField,
}

impl FacePair {
    pub fn face(&self, face: Face) -> &BoundaryField {
        match face {
            Face::F0 => &self.f0,
            Face::F1 => &self.f1,
        }
    }

    /// Sup over both faces of the per-node coefficient norm.
    pub fn sup(&self) -> f64 {
        self.f0.sup_node_norm().max(self.f1.sup_node_norm())
    }

    pub fn sub(&self, other: &FacePair) -> Result<FacePair> {
        Ok(FacePair { f0: self.f0.sub(&other.f0)?, f1: self.f1.sub(&other.f1)? })
    }

    pub fn zeros(n_lat: usize, dim: usize) -> FacePair {
        FacePair { f0: BoundaryField::zeros(Face::F0, n_lat, dim), f1: BoundaryField::zeros(Face::F1, n_lat, dim) }
    }
}

/// `d_A u(ν) = ∂_ν u + [η(ν), u]` at face nodes of a 0-form.
pub fn covariant_normal_derivative(a: &ConnectionState, u: &FormField, face: Face) -> Result<BoundaryField> {
    let grid = a.grid();
    let alg = a.algebra();
    let mut d = u.normal_derivative(face);
    if let Some(eta) = a.eta() {
        let s = face.inward_sign();
        for i in 0..grid.n_lat {
            for j in 0..grid.n_lat {
                let node = grid.inward_node(face, i, j, 0);
                let en: Vec<f64> = eta.at(2, node).iter().map(|v| s * v).collect();
                let dst = (i * grid.n_lat + j) * alg.dim();
                alg.bracket_acc(1.0, &en, u.at(0, node), &mut d.values[dst..dst + alg.dim()]);
            }
        }
    }
    Ok(d)
}

/// `u + c·τ·v` on face nodes (`v` a 0-form sampled at the face).
fn add_tau_term(grid: &DomainGrid, out: &mut BoundaryField, c: f64, v: &FormField) {
    let dim = v.dim();
    for i in 0..grid.n_lat {
        for j in 0..grid.n_lat {
            let node = grid.inward_node(out.face, i, j, 0);
            let t = grid.tau_at(out.face, i, j);
            let dst = (i * grid.n_lat + j) * dim;
            for a in 0..dim {
                out.values[dst + a] += c * t * v.at(0, node)[a];
            }
        }
    }
}

/// `Δ_A f` with face values extrapolated from the interior.
pub fn laplacian_with_traces(a: &ConnectionState, f: &FormField) -> Result<FormField> {
    let mut w = a.laplacian(f)?;
    let dim = w.dim();
    extrapolate_faces(a.grid(), dim, w.comp_mut(0));
    Ok(w)
}

/// `T_A f = d_A(Δ_A f)(ν) + 2τ Δ_A f` on both faces.
pub fn boundary_operator_t(a: &ConnectionState, f: &FormField) -> Result<FacePair> {
    if f.degree() != 0 {
        return Err(Error::Degree(f.degree()));
    }
    let defect = f.conductor_defect();
    if defect > 1e-12 {
        return Err(Error::Validation(format!("T_A needs a conductor 0-form ({defect:.2e})")));
    }
    let w = laplacian_with_traces(a, f)?;
    let mut faces = Vec::new();
    for face in Face::BOTH {
        let mut t = covariant_normal_derivative(a, &w, face)?;
        add_tau_term(a.grid(), &mut t, 2.0, &w);
        faces.push(t);
    }
    let f1 = faces.pop().expect("two faces");
    let f0 = faces.pop().expect("two faces");
    Ok(FacePair { f0, f1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct BctReport {
    /// `‖d_A[α·β](ν) + 2τ[α·β]‖_∞` per face.
    pub residual_f0: f64,
    pub residual_f1: f64,
    pub residual: f64,
    /// Same with `+[d*_A α, β(ν)] + [α(ν), d*_A β]` added.
    pub general_residual: f64,
    /// `‖[α·β]‖_∞` on the faces, for scale.
    pub face_scale: f64,
}

/// Residual of the boundary identity for certified horizontal conductor forms.
pub fn verify_bct(a: &ConnectionState, alpha: &HorizontalForm, beta: &HorizontalForm) -> Result<BctReport> {
    verify_bct_general(a, &alpha.form, &beta.form)
}

/// Boundary identity residuals for arbitrary conductor 1-forms.
pub fn verify_bct_general(a: &ConnectionState, alpha: &FormField, beta: &FormField) -> Result<BctReport> {
    for f in [alpha, beta] {
        let defect = f.conductor_defect();
        if defect > 1e-12 {
            return Err(Error::Validation(format!("form is not conductor ({defect:.2e})")));
        }
    }
    let grid = a.grid();
    let alg = a.algebra();
    let dim = alg.dim();
    let w = wedge_dot(alpha, beta)?;
    let da = a.d_star(alpha)?;
    let db = a.d_star(beta)?;
    let mut res = [0.0; 2];
    let mut gen: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (fi, face) in Face::BOTH.into_iter().enumerate() {
        let mut t = covariant_normal_derivative(a, &w, face)?;
        add_tau_term(grid, &mut t, 2.0, &w);
        res[fi] = t.sup_node_norm();
        let s = face.inward_sign();
        for i in 0..grid.n_lat {
            for j in 0..grid.n_lat {
                let node = grid.inward_node(face, i, j, 0);
                let bn: Vec<f64> = beta.at(2, node).iter().map(|v| s * v).collect();
                let an: Vec<f64> = alpha.at(2, node).iter().map(|v| s * v).collect();
                let dst = (i * grid.n_lat + j) * dim;
                let o = &mut t.values[dst..dst + dim];
                alg.bracket_acc(1.0, da.at(0, node), &bn, o);
                alg.bracket_acc(1.0, &an, db.at(0, node), o);
                scale = scale.max(w.at(0, node).iter().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
        gen = gen.max(t.sup_node_norm());
    }
    Ok(BctReport { residual_f0: res[0], residual_f1: res[1], residual: res[0].max(res[1]), general_residual: gen, face_scale: scale })
}

#[derive(Clone, Debug, Serialize)]
pub struct Smooth1Report {
    /// Sup over faces of `d(Δ[g₁,g₂])(ν) + 2τΔ[g₁,g₂] − 3[Δg₁, dg₂(ν)] − 3[dg₁(ν), Δg₂]`.
    pub residual: f64,
    /// Relative sup over interior nodes of `Δ[g₁,g₂] − ([Δg₁,g₂] + [g₁,Δg₂] − 2[dg₁·dg₂])`.
    pub expansion_defect: f64,
    /// `‖T₀ gᵢ‖_∞` of the inputs.
    pub input_t0: [f64; 2],
}

/// Checks the bracket identity for `T₀` on a flat connection.
///
/// `t0_tol` bounds `‖T₀ gᵢ‖_∞ / ‖Δgᵢ‖_∞` for the inputs.
pub fn verify_smooth1(a: &ConnectionState, g1: &FormField, g2: &FormField, t0_tol: f64) -> Result<Smooth1Report> {
    if !a.is_flat() {
        return Err(Error::Validation("the bracket identity is stated for the flat connection".into()));
    }
    let grid = a.grid();
    let mut input_t0 = [0.0; 2];
    let mut lap = Vec::new();
    for (k, g) in [g1, g2].into_iter().enumerate() {
        let t = boundary_operator_t(a, g)?.sup();
        let l = laplacian_with_traces(a, g)?;
        let scale = l.sup_norm().max(f64::MIN_POSITIVE);
        input_t0[k] = t;
        if t > t0_tol * scale {
            return Err(Error::Validation(format!("input {} has T0 residual {t:.3e}", k + 1)));
        }
        lap.push(l);
    }
    let br = forms::bracket0(g1, g2)?;
    let lbr = laplacian_with_traces(a, &br)?;
    let mut worst: f64 = 0.0;
    for face in Face::BOTH {
        let mut t = covariant_normal_derivative(a, &lbr, face)?;
        add_tau_term(grid, &mut t, 2.0, &lbr);
        let dg1 = g1.normal_derivative(face);
        let dg2 = g2.normal_derivative(face);
        let alg = a.algebra();
        let dim = alg.dim();
        for i in 0..grid.n_lat {
            for j in 0..grid.n_lat {
                let node = grid.inward_node(face, i, j, 0);
                let dst = (i * grid.n_lat + j) * dim;
                let o = &mut t.values[dst..dst + dim];
                alg.bracket_acc(-3.0, lap[0].at(0, node), dg2.at(i, j), o);
                alg.bracket_acc(-3.0, dg1.at(i, j), lap[1].at(0, node), o);
            }
        }
        worst = worst.max(t.sup_node_norm());
    }
    // expansion of Δ of a bracket
    let mut exp = forms::bracket0(&lap[0], g2)?;
    exp.axpy(1.0, &forms::bracket0(g1, &lap[1])?)?;
    exp.axpy(-2.0, &wedge_dot(&forms::exterior_d(g1)?, &forms::exterior_d(g2)?)?)?;
    let diff = conductor_project(&lbr.sub(&exp)?);
    let scale = conductor_project(&lbr).sup_norm().max(f64::MIN_POSITIVE);
    Ok(Smooth1Report { residual: worst, expansion_defect: diff.sup_norm() / scale, input_t0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup(spec: MetricSpec, nl: usize, nn: usize) -> (Arc<DomainGrid>, Arc<Algebra>) {
        (DomainGrid::build(spec, nl, nn).unwrap(), Algebra::su2())
    }

    fn random_conductor(g: &Arc<DomainGrid>, alg: &Arc<Algebra>, p: usize, seed: u64) -> FormField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FormField::random_smooth(g, alg, p, &mut rng, true).unwrap()
    }

    #[test]
    fn identity_gauge_leaves_connection_unchanged() {
        let (g, alg) = setup(MetricSpec::warped_linear(), 8, 9);
        let eta = random_conductor(&g, &alg, 1, 1).scale(0.2);
        let a = ConnectionState::new(eta.clone()).unwrap();
        let b = gauge_act(&a, &GaugeTransform::identity(&g, &alg)).unwrap();
        assert!(b.eta().unwrap().sub(&eta).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn pure_gauge_from_flat() {
        let (g, alg) = setup(MetricSpec::flat(), 8, 9);
        let x = random_conductor(&g, &alg, 0, 2).scale(0.3);
        let gt = GaugeTransform::exp(&x).unwrap();
        let b = gauge_act(&ConnectionState::flat(&g, &alg), &gt).unwrap();
        // direct substitution: exp(−X)·d(exp X) with the same stencils
        let block = 8;
        let mut d = vec![0.0; g.nodes() * block];
        for i in 0..3 {
            crate::forms::d_axis(&g, i, block, gt.raw(), &mut d);
            for node in 0..g.nodes() {
                let di = CMat::from_fn(2, 2, |r, c| Complex64::new(d[node * 8 + 2 * (r * 2 + c)], d[node * 8 + 2 * (r * 2 + c) + 1]));
                let want = alg.project(&(expm(&alg.matrix(x.at(0, node)).scale(-1.0)) * di));
                for a in 0..3 {
                    assert!((b.eta().unwrap().at(i, node)[a] - want[a]).abs() < 1e-12);
                }
            }
        }
        assert!(matches!(
            gauge_act(&ConnectionState::flat(&g, &alg), &GaugeTransform::exp(&FormField::scalar_times(&g, &alg, &[1.0, 0.0, 0.0], |_| 0.5)).unwrap()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn action_composition_and_inverse() {
        // (A·g)·h = A·(gh) holds up to the Leibniz defect of the stencils
        let alg = Algebra::su2();
        let mut e_comp = Vec::new();
        let mut e_inv = Vec::new();
        let mut e_all = Vec::new();
        for (nl, nn) in [(8, 9), (16, 17), (32, 33)] {
            let g = DomainGrid::build(MetricSpec::flat(), nl, nn).unwrap();
            let eta = FormField::from_fn(&g, &alg, 1, |x, c, o| {
                if c == 2 {
                    o[0] = 0.2 * (2.0 * PI * x[0]).cos();
                } else {
                    o[1] = 0.1 * (PI * x[2]).sin() * (2.0 * PI * x[1]).sin();
                }
            })
            .unwrap();
            let a = ConnectionState::new(eta.clone()).unwrap();
            let x = FormField::from_fn(&g, &alg, 0, |p, _, o| {
                o[0] = 0.4 * (PI * p[2]).sin() * (2.0 * PI * p[0]).cos();
                o[2] = 0.3 * (PI * p[2]).sin();
            })
            .unwrap();
            let y = FormField::from_fn(&g, &alg, 0, |p, _, o| o[1] = 0.5 * (PI * p[2]).sin() * (2.0 * PI * p[1]).sin()).unwrap();
            let (gx, gy) = (GaugeTransform::exp(&x).unwrap(), GaugeTransform::exp(&y).unwrap());
            let lhs = gauge_act(&gauge_act(&a, &gx).unwrap(), &gy).unwrap();
            let rhs = gauge_act(&a, &gx.mul(&gy).unwrap()).unwrap();
            let dc = lhs.eta().unwrap().sub(rhs.eta().unwrap()).unwrap();
            e_comp.push(dc.sup_norm_interior(2));
            e_all.push(dc.sup_norm());
            let back = gauge_act(&gauge_act(&a, &gx).unwrap(), &gx.inverse()).unwrap();
            e_inv.push(back.eta().unwrap().sub(&eta).unwrap().sup_norm_interior(2));
        }
        // the inverse is exact: g·D(gᴴ) + D(g)·gᴴ is Hermitian and projects to zero
        assert!(e_inv.iter().all(|e| *e < 1e-12), "{e_inv:?}");
        // composition: second order away from the faces, first order through the boundary rows
        assert!((e_comp[1] / e_comp[2]).log2() > 1.8, "{e_comp:?}");
        assert!((e_all[1] / e_all[2]).log2() > 0.9, "{e_all:?}");
    }

    #[test]
    fn free_action_under_perturbation() {
        let (g, alg) = setup(MetricSpec::flat(), 8, 17);
        let a = ConnectionState::flat(&g, &alg);
        let x = random_conductor(&g, &alg, 0, 3);
        for eps in [1e-2, 1e-4, 1e-6] {
            let gt = GaugeTransform::exp(&x.scale(eps)).unwrap();
            let moved = gauge_act(&a, &gt).unwrap();
            let de = moved.eta().unwrap().sup_norm();
            // ‖g − e‖ is controlled by ‖η′ − η‖ (Poincaré on the conductor subspace)
            assert!(gt.distance_to_identity() <= 2.0 * de + 1e-14, "{eps} {de}");
        }
    }

    #[test]
    fn gauge_fix_examples() {
        let (g, alg) = setup(MetricSpec::flat(), 8, 17);
        let a = ConnectionState::flat(&g, &alg);
        let cfg = GaugeFixConfig::default();
        let (gt, rep) = coulomb_gauge_fix(&a, &FormField::zeros(&g, &alg, 1).unwrap(), &cfg).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(gt.distance_to_identity(), 0.0);
        // already horizontal
        let w = random_conductor(&g, &alg, 1, 4);
        let h = horizontal_project(&a, &w.scale(0.05 / w.norm())).unwrap();
        let (gt, _) = coulomb_gauge_fix(&a, h.form(), &cfg).unwrap();
        assert!(gt.distance_to_identity() < 1e-9);
        // pure vertical
        let gamma = random_conductor(&g, &alg, 0, 5);
        let gamma = gamma.scale(0.05 / a.d(&gamma).unwrap().norm());
        let eta = a.d(&gamma).unwrap();
        let (gt, rep) = coulomb_gauge_fix(&a, &eta, &cfg).unwrap();
        assert!(rep.residual <= 1e-6 * gamma.norm());
        assert!(rep.iterations <= 10);
        assert!(gt.is_conductor(1e-12));
        // too large
        let big = random_conductor(&g, &alg, 1, 6).scale(10.0);
        assert!(matches!(coulomb_gauge_fix(&a, &big, &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn gauge_fix_at_curved_connection() {
        let (g, alg) = setup(MetricSpec::warped_linear(), 8, 17);
        let a = ConnectionState::new(random_conductor(&g, &alg, 1, 7).scale(0.1)).unwrap();
        let eta = random_conductor(&g, &alg, 1, 8).scale(0.02);
        let (gt, rep) = coulomb_gauge_fix(&a, &eta, &GaugeFixConfig::default()).unwrap();
        assert!(rep.residual <= 1e-9 && rep.iterations <= 10, "{rep:?}");
        let diff = gauge_difference(&a, &eta, &gt).unwrap();
        assert!(interior_norm(&a.d_star(&diff).unwrap()) <= 1e-9);
    }

    #[test]
    fn projector_properties() {
        let (g, alg) = setup(MetricSpec::warped_linear(), 8, 13);
        let a = ConnectionState::new(random_conductor(&g, &alg, 1, 9).scale(0.2)).unwrap();
        let w = random_conductor(&g, &alg, 1, 10);
        let p = horizontal_project(&a, &w).unwrap();
        let pp = horizontal_project(&a, p.form()).unwrap();
        assert!(pp.form().sub(p.form()).unwrap().norm() <= 1e-8 * w.norm());
        assert!(p.residual * p.form().norm() <= 1e-8 * w.norm());
        let gamma = random_conductor(&g, &alg, 0, 11);
        let dg = a.d(&gamma).unwrap();
        assert!(p.form().inner(&dg).unwrap().abs() <= 1e-8 * w.norm() * gamma.norm());
        let pv = horizontal_project(&a, &dg).unwrap();
        assert!(pv.form().norm() <= 1e-8 * dg.norm());
        assert!(matches!(
            horizontal_project(&a, &FormField::from_fn(&g, &alg, 1, |_, _, o| o[0] = 1.0).unwrap()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn equivariance_defect_is_second_order() {
        // P_{A·g}(Ad(g⁻¹)ω) − Ad(g⁻¹)(P_A ω) vanishes only up to the Leibniz defect
        let alg = Algebra::su2();
        let mut errs = Vec::new();
        for (nl, nn) in [(8, 9), (16, 17), (32, 33)] {
            let g = DomainGrid::build(MetricSpec::flat(), nl, nn).unwrap();
            let a = ConnectionState::flat(&g, &alg);
            let x = FormField::from_fn(&g, &alg, 0, |p, _, o| {
                o[0] = 0.5 * (PI * p[2]).sin() * (2.0 * PI * p[0]).cos();
                o[1] = 0.3 * (PI * p[2]).sin();
            })
            .unwrap();
            let gt = GaugeTransform::exp(&x).unwrap();
            let w = FormField::from_fn(&g, &alg, 1, |p, c, o| {
                let s = (PI * p[2]).sin();
                match c {
                    0 => o[2] = s * (2.0 * PI * p[1]).sin(),
                    1 => o[0] = s * (2.0 * PI * p[0]).cos(),
                    _ => o[1] = (PI * p[2]).cos() * (2.0 * PI * p[0]).sin(),
                }
            })
            .unwrap();
            let ag = gauge_act(&a, &gt).unwrap();
            let ad = |f: &FormField| -> FormField {
                let zero = FormField::zeros(&g, &alg, 1).unwrap();
                let pure = transform_form(&gt, &zero).unwrap();
                transform_form(&gt, f).unwrap().sub(&pure).unwrap()
            };
            let lhs = horizontal_project(&ag, &ad(&w)).unwrap();
            let rhs = ad(horizontal_project(&a, &w).unwrap().form());
            errs.push(lhs.form().sub(&rhs).unwrap().norm() / w.norm());
        }
        assert!((errs[1] / errs[2]).log2() > 1.7, "{errs:?}");
    }

    #[test]
    fn curvature_antisymmetry() {
        let (g, alg) = setup(MetricSpec::flat(), 8, 13);
        let a = ConnectionState::flat(&g, &alg);
        let x = horizontal_project(&a, &random_conductor(&g, &alg, 1, 12)).unwrap();
        let y = horizontal_project(&a, &random_conductor(&g, &alg, 1, 13)).unwrap();
        assert_eq!(coulomb_curvature(&a, &x, &x).unwrap().sup_norm(), 0.0);
        let s = coulomb_curvature(&a, &x, &y).unwrap().add(&coulomb_curvature(&a, &y, &x).unwrap()).unwrap();
        assert!(s.sup_norm() <= 1e-12);
        let raw = HorizontalForm { form: random_conductor(&g, &alg, 1, 14), residual: 0.0 };
        assert!(matches!(coulomb_curvature(&a, &raw, &y), Err(Error::Validation(_))));
    }

    #[test]
    fn t_operator_examples() {
        let alg = Algebra::su2();
        let mut errs = Vec::new();
        for nn in [33, 65] {
            let g = DomainGrid::build(MetricSpec::flat(), 8, nn).unwrap();
            let a = ConnectionState::flat(&g, &alg);
            let src = FormField::scalar_times(&g, &alg, &[1.0, 0.0, 0.0], |x| (PI * x[2]).sin());
            let (f, _) = a.green(&src).unwrap();
            let t = boundary_operator_t(&a, &f).unwrap();
            let mut e: f64 = 0.0;
            for face in Face::BOTH {
                for v in t.face(face).values.chunks(3) {
                    e = e.max((v[0] - PI).abs()).max(v[1].abs()).max(v[2].abs());
                }
            }
            errs.push(e);
        }
        assert!(errs[1] <= 5.0 / 64.0 / 64.0, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 2.0, "{errs:?}");
        // interior-supported Laplacian: both terms vanish on the faces
        let g = DomainGrid::build(MetricSpec::warped_linear(), 8, 33).unwrap();
        let a = ConnectionState::flat(&g, &alg);
        let bump = FormField::scalar_times(&g, &alg, &[0.0, 1.0, 0.0], |x| {
            let t = (x[2] - 0.5) / 0.2;
            if t.abs() < 1.0 {
                (1.0 - t * t).powi(4)
            } else {
                0.0
            }
        });
        let (f, _) = a.green(&bump).unwrap();
        assert!(boundary_operator_t(&a, &f).unwrap().sup() < 1e-8);
    }

    #[test]
    fn t_operator_warped_one_dimensional() {
        // 1D oracle: for lateral-constant w = Δf, T f = w'(0) + 2τ w(0) with τ = ±2
        let alg = Algebra::su2();
        let mut errs = Vec::new();
        for nn in [17, 33, 65] {
            let g = DomainGrid::build(MetricSpec::warped_linear(), 8, nn).unwrap();
            let a = ConnectionState::flat(&g, &alg);
            let w = |z: f64| (PI * z).cos() + z * z;
            let src = FormField::scalar_times(&g, &alg, &[0.0, 0.0, 1.0], |x| w(x[2]));
            let (f, _) = a.green(&src).unwrap();
            let t = boundary_operator_t(&a, &f).unwrap();
            let want0 = 0.0 + 2.0 * 2.0 * w(0.0);
            let want1 = -(-PI * (PI * 1.0f64).sin() + 2.0) + 2.0 * (-2.0) * w(1.0);
            let e0 = t.f0.values.chunks(3).map(|v| (v[2] - want0).abs()).fold(0.0, f64::max);
            let e1 = t.f1.values.chunks(3).map(|v| (v[2] - want1).abs()).fold(0.0, f64::max);
            errs.push(e0.max(e1));
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 0.9, "{errs:?}");
    }

    #[test]
    fn t_operator_linearity() {
        let (g, alg) = setup(MetricSpec::warped_linear(), 8, 17);
        let a = ConnectionState::new(random_conductor(&g, &alg, 1, 15).scale(0.2)).unwrap();
        let f = random_conductor(&g, &alg, 0, 16);
        let h = random_conductor(&g, &alg, 0, 17);
        let mut comb = f.scale(2.0);
        comb.axpy(-0.5, &h).unwrap();
        let lhs = boundary_operator_t(&a, &comb).unwrap();
        let tf = boundary_operator_t(&a, &f).unwrap();
        let th = boundary_operator_t(&a, &h).unwrap();
        for face in Face::BOTH {
            let (l, x, y) = (lhs.face(face), tf.face(face), th.face(face));
            for k in 0..l.values.len() {
                let want = 2.0 * x.values[k] - 0.5 * y.values[k];
                assert!((l.values[k] - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn bct_zero_beta_and_general_form() {
        let (g, alg) = setup(MetricSpec::warped_linear(), 8, 17);
        let a = ConnectionState::flat(&g, &alg);
        let x = horizontal_project(&a, &random_conductor(&g, &alg, 1, 18)).unwrap();
        let zero = HorizontalForm::certify(&a, FormField::zeros(&g, &alg, 1).unwrap()).unwrap();
        let r = verify_bct(&a, &x, &zero).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.general_residual, 0.0);
    }
}
