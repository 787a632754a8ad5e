//! Realizing 0-forms as sums `Σ[αᵢ·βᵢ]` of divergence-free 1-forms, the
//! boundary-data layer built from brackets of Green solutions, and the full
//! two-layer decomposition of a conductor 0-form. Flat base connection.

use crate::bundle::{boundary_operator_t, laplacian_with_traces, FacePair};
use crate::error::{Error, Result};
use crate::forms::{bracket0, codifferential, conductor_project, hodge_star_1to2, wedge_dot, FormField};
use crate::geometry::{DomainGrid, Face};
use crate::lie::Algebra;
use crate::solver::{hopf_normal_derivative, scalar_green, ConnectionState, SolveReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// Plateau parameters `j, k, i, c, d, l` as fractions of a chart side.
pub const FRACTIONS: [f64; 6] = [0.02, 0.04, 0.16, 0.20, 0.80, 0.84];

/// Number of lateral chart positions per axis in the periodic covers.
pub const LATERAL_POSITIONS: usize = 6;

/// `exp(−1/(1−s²))` on `(−1, 1)`, zero outside.
pub fn bump_raw(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `∫_{-1}^{1} exp(−1/(1−s²)) ds`.
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| simpson(bump_raw, -1.0, 1.0, 20_000))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for m in 1..n {
        s += if m % 2 == 1 { 4.0 } else { 2.0 } * f(a + m as f64 * h);
    }
    s * h / 3.0
}

/// Smooth step: 0 for `u ≤ 0`, 1 for `u ≥ 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Cutoffs on an interval `(a, b)` with `a < j < k < i < c < d < l < b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub a: f64,
    pub b: f64,
    pub j: f64,
    pub k: f64,
    pub i: f64,
    pub c: f64,
    pub d: f64,
    pub l: f64,
}

impl BumpProfile {
    pub fn new(a: f64, b: f64) -> Result<BumpProfile> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!("empty interval ({a}, {b})")));
        }
        let at = |f: f64| a + f * (b - a);
        let [j, k, i, c, d, l] = FRACTIONS.map(at);
        Ok(BumpProfile { a, b, j, k, i, c, d, l })
    }

    /// Unit-mass bump supported in `(k, i)`.
    pub fn eta(&self, t: f64) -> f64 {
        let half = 0.5 * (self.i - self.k);
        bump_raw((t - 0.5 * (self.i + self.k)) / half) / (bump_mass() * half)
    }

    /// `∫ η` by composite Simpson with `n` intervals.
    pub fn eta_integral(&self, n: usize) -> f64 {
        simpson(|t| self.eta(t), self.k, self.i, n)
    }

    /// 1 on `[c, d]`, 0 outside `(i, l)`.
    pub fn plateau(&self, t: f64) -> f64 {
        if t <= self.i || t >= self.l {
            0.0
        } else if t < self.c {
            smooth_step((t - self.i) / (self.c - self.i))
        } else if t <= self.d {
            1.0
        } else {
            smooth_step((self.l - t) / (self.l - self.d))
        }
    }

    /// 1 on `[a, d]`, 0 from `l` on (the cutoff that stays flat at a face).
    pub fn face_plateau(&self, t: f64) -> f64 {
        if t <= self.d {
            1.0
        } else {
            self.plateau(t)
        }
    }

    /// `t` on `[c, d]`, compactly supported in `(i, l)`.
    pub fn coordinate(&self, t: f64) -> f64 {
        t * self.plateau(t)
    }

    /// Bump with peak 1 supported in the open plateau `(c, d)`.
    pub fn inner_bump(&self, t: f64) -> f64 {
        let half = 0.5 * (self.d - self.c);
        bump_raw((t - 0.5 * (self.c + self.d)) / half) * std::f64::consts::E
    }
}

/// A coordinate box. Lateral axes are periodic; for boundary charts the third
/// local coordinate is the distance to `face` and `side[2]` is the depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeChart {
    pub origin: [f64; 3],
    pub side: [f64; 3],
    pub face: Option<Face>,
}

impl CubeChart {
    pub fn interior(origin: [f64; 3], side: [f64; 3]) -> Result<CubeChart> {
        check_lateral(&side)?;
        if !(side[2] > 0.0) || origin[2] + FRACTIONS[2] * side[2] <= 0.0 || origin[2] + FRACTIONS[5] * side[2] >= 1.0 {
            return Err(Error::Domain(format!("interior chart {origin:?}+{side:?} reaches a face")));
        }
        Ok(CubeChart { origin, side, face: None })
    }

    pub fn boundary(face: Face, origin: [f64; 2], side: [f64; 2], depth: f64) -> Result<CubeChart> {
        let side = [side[0], side[1], depth];
        check_lateral(&side)?;
        if !(depth > 0.0) || depth > 1.0 {
            return Err(Error::Domain(format!("chart depth {depth} outside (0, 1]")));
        }
        Ok(CubeChart { origin: [origin[0], origin[1], 0.0], side, face: Some(face) })
    }

    pub fn profiles(&self) -> [BumpProfile; 3] {
        [0, 1, 2].map(|a| BumpProfile::new(0.0, self.side[a]).expect("validated side"))
    }

    /// Local coordinate along one axis, `None` outside the chart.
    pub fn local_axis(&self, axis: usize, v: f64) -> Option<f64> {
        let t = if axis < 2 {
            let mut t = (v - self.origin[axis]).rem_euclid(1.0);
            if t > 1.0 - 1e-12 {
                t = 0.0;
            }
            t
        } else {
            match self.face {
                None => v - self.origin[2],
                Some(Face::F0) => v,
                Some(Face::F1) => 1.0 - v,
            }
        };
        (t >= 0.0 && t <= self.side[axis]).then_some(t)
    }

    pub fn local(&self, x: [f64; 3]) -> Option<[f64; 3]> {
        Some([self.local_axis(0, x[0])?, self.local_axis(1, x[1])?, self.local_axis(2, x[2])?])
    }

    /// Weight used to build partitions of unity: supported in the plateau
    /// (interior axes) or in `[0, d)` and identically 1 on `[0, c]` (normal
    /// axis of a boundary chart).
    pub fn pu_weight(&self, x: [f64; 3]) -> f64 {
        let Some(t) = self.local(x) else { return 0.0 };
        let p = self.profiles();
        let normal = match self.face {
            None => p[2].inner_bump(t[2]),
            Some(_) => 1.0 - smooth_step((t[2] - p[2].c) / (p[2].d - p[2].c)),
        };
        p[0].inner_bump(t[0]) * p[1].inner_bump(t[1]) * normal
    }

    /// Whether `x` lies where a target may be nonzero (open plateau, or
    /// `[0, d)` along the normal of a boundary chart).
    pub fn in_plateau(&self, x: [f64; 3]) -> bool {
        let Some(t) = self.local(x) else { return false };
        let p = self.profiles();
        let lat = (0..2).all(|a| t[a] > p[a].c && t[a] < p[a].d);
        let nor = match self.face {
            None => t[2] > p[2].c && t[2] < p[2].d,
            Some(_) => t[2] < p[2].d,
        };
        lat && nor
    }
}

fn check_lateral(side: &[f64; 3]) -> Result<()> {
    if side[..2].iter().any(|s| !(*s > 0.0) || *s > 1.0) {
        return Err(Error::Domain(format!("lateral chart sides {:?} outside (0, 1]", &side[..2])));
    }
    Ok(())
}

/// A scalar profile: an analytic function or node values.
#[derive(Clone, Copy)]
pub enum Profile<'a> {
    Analytic(&'a (dyn Fn([f64; 3]) -> f64 + Sync)),
    Nodal(&'a [f64]),
}

/// Nonzero nodes of a form, for compact storage of construction terms.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactForm {
    pub degree: usize,
    pub nodes: Vec<u32>,
    /// `ncomp · dim` values per stored node, component-major.
    pub values: Vec<f64>,
}

impl CompactForm {
    pub fn from_dense(f: &FormField) -> CompactForm {
        let (nc, dim) = (f.ncomp(), f.dim());
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for n in 0..f.grid().nodes() {
            if (0..nc).any(|c| f.at(c, n).iter().any(|v| *v != 0.0)) {
                nodes.push(n as u32);
                for c in 0..nc {
                    values.extend_from_slice(f.at(c, n));
                }
            }
        }
        let _ = dim;
        CompactForm { degree: f.degree(), nodes, values }
    }

    pub fn to_dense(&self, grid: &Arc<DomainGrid>, alg: &Arc<Algebra>) -> Result<FormField> {
        let mut f = FormField::zeros(grid, alg, self.degree)?;
        let (nc, dim) = (f.ncomp(), f.dim());
        if self.values.len() != self.nodes.len() * nc * dim {
            return Err(Error::Shape("compact form has inconsistent lengths".into()));
        }
        for (s, &n) in self.nodes.iter().enumerate() {
            if n as usize >= grid.nodes() {
                return Err(Error::Shape(format!("node {n} outside the grid")));
            }
            for c in 0..nc {
                let src = &self.values[(s * nc + c) * dim..(s * nc + c + 1) * dim];
                f.at_mut(c, n as usize).copy_from_slice(src);
            }
        }
        Ok(f)
    }
}

#[derive(Clone, Debug)]
pub struct SpanTerm {
    pub alpha: CompactForm,
    pub beta: CompactForm,
    pub chart: CubeChart,
    /// Coefficients of `A` and `B`.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SpanCertificate {
    pub target: FormField,
    pub terms: Vec<SpanTerm>,
    /// `‖Σ[αᵢ·βᵢ] − target‖_∞`.
    pub reconstruction_error: f64,
    /// Largest `‖d*αᵢ‖_∞`, `‖d*βᵢ‖_∞` over interior nodes.
    pub divergence_residual: f64,
    /// Whether the boundary variant was used (forms carry CBC).
    pub cbc: bool,
    /// Largest tangential face trace of the stored forms.
    pub cbc_trace: f64,
    /// Same before the constrained face slots were set (extrapolated values).
    pub cbc_trace_raw: f64,
    /// Largest `|F|` past the plateau before it was set to zero.
    pub support_tail: f64,
    /// Boundary compatibility defect `‖dψ(ν) + 2τψ‖_∞` (boundary variant).
    pub compatibility: f64,
}

impl SpanCertificate {
    fn empty(target: FormField, cbc: bool) -> SpanCertificate {
        SpanCertificate {
            target,
            terms: Vec::new(),
            reconstruction_error: 0.0,
            divergence_residual: 0.0,
            cbc,
            cbc_trace: 0.0,
            cbc_trace_raw: 0.0,
            support_tail: 0.0,
            compatibility: 0.0,
        }
    }

    /// `Σ[αᵢ·βᵢ]` in term order.
    pub fn sum(&self) -> Result<FormField> {
        let grid = self.target.grid();
        let alg = self.target.algebra();
        let mut s = FormField::zeros(grid, alg, 0)?;
        for t in &self.terms {
            let a = t.alpha.to_dense(grid, alg)?;
            let b = t.beta.to_dense(grid, alg)?;
            s.axpy(1.0, &wedge_dot(&a, &b)?)?;
        }
        Ok(s)
    }

    /// Recomputes the reconstruction error from the stored forms.
    pub fn recheck(&self) -> Result<f64> {
        Ok(self.sum()?.sub(&self.target)?.sup_norm())
    }

    /// Recomputes the divergence residual from the stored forms.
    pub fn recheck_divergence(&self) -> Result<f64> {
        let grid = self.target.grid();
        let alg = self.target.algebra();
        let mut m: f64 = 0.0;
        for t in &self.terms {
            for f in [&t.alpha, &t.beta] {
                m = m.max(divergence(&f.to_dense(grid, alg)?)?);
            }
        }
        Ok(m)
    }
}

fn divergence(f: &FormField) -> Result<f64> {
    Ok(conductor_project(&codifferential(f)?).sup_norm())
}

/// Per-line antiderivative data of one construction.
pub(crate) struct Antiderivative {
    /// `F` at nodes.
    pub f: Vec<f64>,
    /// `h = a²ψ − I η` at nodes.
    pub h: Vec<f64>,
    pub tail: f64,
}

/// `F(y₁, y₂, y₃) = ∫ h ds` along the second axis, one grid line at a time.
///
/// Analytic profiles use Simpson per cell with the midpoint value; nodal
/// profiles use the trapezoid rule. `η` enters through the same rule,
/// normalized by its discrete mass, so `F` returns to zero after the plateau.
pub(crate) fn antiderivative(grid: &DomainGrid, chart: &CubeChart, psi: Profile) -> Result<Antiderivative> {
    let p = chart.profiles();
    let (nl, nz) = (grid.n_lat, grid.n_norm);
    let h = grid.h_lat;
    let mut out = Antiderivative { f: vec![0.0; grid.nodes()], h: vec![0.0; grid.nodes()], tail: 0.0 };
    let node_s = |n: usize| -> f64 {
        let v = match psi {
            Profile::Analytic(f) => f(grid.coords(n)),
            Profile::Nodal(v) => v[n],
        };
        let a = grid.a(n);
        a * a * v
    };
    // support of the target
    for n in 0..grid.nodes() {
        let s = node_s(n);
        if s != 0.0 && !chart.in_plateau(grid.coords(n)) {
            return Err(Error::Support(format!("target is nonzero at {:?}, outside the chart plateau", grid.coords(n))));
        }
    }
    let j0 = ((chart.origin[1] / h).ceil() as i64).rem_euclid(nl as i64) as usize;
    let t0 = j0 as f64 * h - chart.origin[1];
    let t0 = t0 - (t0 / 1.0).floor();
    let t0 = if t0 > 1.0 - 1e-12 { 0.0 } else { t0 };
    for i in 0..nl {
        let Some(t1) = chart.local_axis(0, i as f64 * h) else { continue };
        if !(t1 > p[0].c && t1 < p[0].d) {
            continue;
        }
        for k in 0..nz {
            let x3 = k as f64 * grid.h_norm;
            let Some(t3) = chart.local_axis(2, x3) else { continue };
            let inside = match chart.face {
                None => t3 > p[2].c && t3 < p[2].d,
                Some(_) => t3 < p[2].d,
            };
            if !inside {
                continue;
            }
            let nodes: Vec<usize> = (0..nl).map(|m| grid.node(i, (j0 + m) % nl, k)).collect();
            let ts: Vec<f64> = (0..nl).map(|m| t0 + m as f64 * h).collect();
            let s: Vec<f64> = nodes.iter().map(|&n| node_s(n)).collect();
            let e: Vec<f64> = ts.iter().map(|&t| p[1].eta(t)).collect();
            let mut qs = vec![0.0; nl - 1];
            let mut qe = vec![0.0; nl - 1];
            for m in 0..nl - 1 {
                match psi {
                    Profile::Analytic(f) => {
                        let mut x = grid.coords(nodes[m]);
                        x[1] += 0.5 * h;
                        let a = grid.spec.volume_factor(x);
                        let mid = a * a * f(x);
                        qs[m] = h / 6.0 * (s[m] + 4.0 * mid + s[m + 1]);
                        qe[m] = h / 6.0 * (e[m] + 4.0 * p[1].eta(ts[m] + 0.5 * h) + e[m + 1]);
                    }
                    Profile::Nodal(_) => {
                        qs[m] = 0.5 * h * (s[m] + s[m + 1]);
                        qe[m] = 0.5 * h * (e[m] + e[m + 1]);
                    }
                }
            }
            let total: f64 = qs.iter().sum();
            if total == 0.0 && s.iter().all(|v| *v == 0.0) {
                continue;
            }
            let mass: f64 = qe.iter().sum();
            if !(mass > 0.0) {
                return Err(Error::Resolution(format!("normalizing bump of the chart is not resolved by h = {h}")));
            }
            let r = total / mass;
            let mut acc = 0.0;
            for m in 0..nl {
                out.h[nodes[m]] = s[m] - r * e[m];
                if m > 0 {
                    acc += qs[m - 1] - r * qe[m - 1];
                }
                if ts[m] >= p[1].d {
                    out.tail = out.tail.max(acc.abs());
                    out.f[nodes[m]] = 0.0;
                } else {
                    out.f[nodes[m]] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// `G = φ(y₁) v(y₂) v₃(y₃)` at nodes.
pub(crate) fn companion(grid: &DomainGrid, chart: &CubeChart) -> Vec<f64> {
    let p = chart.profiles();
    (0..grid.nodes())
        .map(|n| match chart.local(grid.coords(n)) {
            None => 0.0,
            Some(t) => {
                let v3 = match chart.face {
                    None => p[2].plateau(t[2]),
                    Some(_) => p[2].face_plateau(t[2]),
                };
                p[0].coordinate(t[0]) * p[1].plateau(t[1]) * v3
            }
        })
        .collect()
}

struct RawTerm {
    term: SpanTerm,
    div: f64,
    trace: f64,
    trace_raw: f64,
    tail: f64,
}

fn build_term(
    grid: &Arc<DomainGrid>,
    alg: &Arc<Algebra>,
    chart: &CubeChart,
    psi: Profile,
    a: &[f64],
    b: &[f64],
) -> Result<RawTerm> {
    let ad = antiderivative(grid, chart, psi)?;
    let g = companion(grid, chart);
    let nn = grid.nodes();
    let mut t1 = FormField::zeros(grid, alg, 1)?;
    let mut t2 = FormField::zeros(grid, alg, 1)?;
    for n in 0..nn {
        if ad.f[n] != 0.0 {
            for (o, x) in t1.at_mut(0, n).iter_mut().zip(a) {
                *o = -ad.f[n] * x;
            }
        }
        if g[n] != 0.0 {
            for (o, x) in t2.at_mut(1, n).iter_mut().zip(b) {
                *o = g[n] * x;
            }
        }
    }
    // α = d*ω₁, ω₁ = −F·A *dy₁;  β = d*ω₂, ω₂ = G·B *dy₂
    let alpha_raw = codifferential(&hodge_star_1to2(&t1)?)?;
    let beta_raw = codifferential(&hodge_star_1to2(&t2)?)?;
    let trace_raw = alpha_raw.conductor_defect().max(beta_raw.conductor_defect());
    let alpha = conductor_project(&alpha_raw);
    let beta = conductor_project(&beta_raw);
    let div = divergence(&alpha)?.max(divergence(&beta)?);
    let trace = alpha.conductor_defect().max(beta.conductor_defect());
    Ok(RawTerm {
        term: SpanTerm {
            alpha: CompactForm::from_dense(&alpha),
            beta: CompactForm::from_dense(&beta),
            chart: *chart,
            left: a.to_vec(),
            right: b.to_vec(),
        },
        div,
        trace,
        trace_raw,
        tail: ad.tail,
    })
}

fn bracket_coeffs(alg: &Algebra, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; alg.dim()];
    alg.bracket_into(a, b, &mut c);
    c
}

fn assemble(target: FormField, raws: Vec<RawTerm>, cbc: bool, compatibility: f64) -> Result<SpanCertificate> {
    let mut cert = SpanCertificate::empty(target, cbc);
    cert.compatibility = compatibility;
    for r in raws {
        cert.divergence_residual = cert.divergence_residual.max(r.div);
        cert.cbc_trace = cert.cbc_trace.max(r.trace);
        cert.cbc_trace_raw = cert.cbc_trace_raw.max(r.trace_raw);
        cert.support_tail = cert.support_tail.max(r.tail);
        cert.terms.push(r.term);
    }
    cert.reconstruction_error = cert.recheck()?;
    Ok(cert)
}

fn target_field(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, psi: Profile, elem: &[f64]) -> FormField {
    match psi {
        Profile::Analytic(f) => FormField::scalar_times(grid, alg, elem, f),
        Profile::Nodal(v) => FormField::scalar_times(grid, alg, elem, |_| 0.0).pipe_nodal(v, elem),
    }
}

trait PipeNodal {
    fn pipe_nodal(self, v: &[f64], elem: &[f64]) -> FormField;
}

impl PipeNodal for FormField {
    fn pipe_nodal(mut self, v: &[f64], elem: &[f64]) -> FormField {
        for (n, s) in v.iter().enumerate() {
            for (o, e) in self.at_mut(0, n).iter_mut().zip(elem) {
                *o = s * e;
            }
        }
        self
    }
}

/// One-term realization of `ψ·[A, B]` on an interior chart.
pub fn interior_realize(
    grid: &Arc<DomainGrid>,
    alg: &Arc<Algebra>,
    chart: &CubeChart,
    psi: Profile,
    a: &[f64],
    b: &[f64],
) -> Result<SpanCertificate> {
    if chart.face.is_some() {
        return Err(Error::Validation("interior_realize needs an interior chart".into()));
    }
    let margin = 2.0 * grid.h_norm;
    let lo = chart.origin[2] + FRACTIONS[2] * chart.side[2];
    let hi = chart.origin[2] + FRACTIONS[5] * chart.side[2];
    if lo < margin || hi > 1.0 - margin {
        return Err(Error::Support(format!("chart support ({lo:.3}, {hi:.3}) is within two cells of a face")));
    }
    let target = target_field(grid, alg, psi, &bracket_coeffs(alg, a, b));
    let raw = build_term(grid, alg, chart, psi, a, b)?;
    assemble(target, vec![raw], false, 0.0)
}

/// `‖dψ(ν) + 2τψ‖_∞` on the chart's face.
pub fn compatibility_defect(grid: &DomainGrid, face: Face, psi: Profile) -> f64 {
    let mut m: f64 = 0.0;
    match psi {
        Profile::Nodal(v) => {
            let d = grid.normal_derivative(v, 1, face);
            for i in 0..grid.n_lat {
                for j in 0..grid.n_lat {
                    let n = grid.inward_node(face, i, j, 0);
                    m = m.max((d.at(i, j)[0] + 2.0 * grid.tau_at(face, i, j) * v[n]).abs());
                }
            }
        }
        Profile::Analytic(f) => {
            let eps = 1e-3;
            let s = face.inward_sign();
            for i in 0..grid.n_lat {
                for j in 0..grid.n_lat {
                    let x = grid.coords(grid.inward_node(face, i, j, 0));
                    let at = |q: f64| f([x[0], x[1], x[2] + s * q * eps]);
                    let d = (-25.0 * at(0.0) + 48.0 * at(1.0) - 36.0 * at(2.0) + 16.0 * at(3.0) - 3.0 * at(4.0)) / (12.0 * eps);
                    m = m.max((d + 2.0 * grid.tau_at(face, i, j) * at(0.0)).abs());
                }
            }
        }
    }
    m
}

/// One-term realization of `ψ·[A, B]` on a boundary chart, with CBC forms.
///
/// `compat_tol` bounds `‖dψ(ν) + 2τψ‖_∞ / (1 + ‖ψ‖_∞)`; `None` skips the
/// check and only records the defect.
pub fn boundary_realize(
    grid: &Arc<DomainGrid>,
    alg: &Arc<Algebra>,
    chart: &CubeChart,
    psi: Profile,
    a: &[f64],
    b: &[f64],
    compat_tol: Option<f64>,
) -> Result<SpanCertificate> {
    let Some(face) = chart.face else {
        return Err(Error::Validation("boundary_realize needs a boundary chart".into()));
    };
    let compat = compatibility_defect(grid, face, psi);
    if let Some(tol) = compat_tol {
        let sup = match psi {
            Profile::Nodal(v) => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Profile::Analytic(f) => (0..grid.nodes()).map(|n| f(grid.coords(n)).abs()).fold(0.0, f64::max),
        };
        if compat > tol * (1.0 + sup) {
            return Err(Error::Compatibility(format!("dψ(ν) + 2τψ = {compat:.3e} on {}", face.label())));
        }
    }
    let target = target_field(grid, alg, psi, &bracket_coeffs(alg, a, b));
    let raw = build_term(grid, alg, chart, psi, a, b)?;
    assemble(target, vec![raw], true, compat)
}

/// Nodal partition of unity `λ_k = χ_k / Σχ` for a cover.
pub fn partition_of_unity(grid: &DomainGrid, cover: &[CubeChart]) -> Vec<Vec<f64>> {
    let nn = grid.nodes();
    let w: Vec<Vec<f64>> = cover.iter().map(|c| (0..nn).map(|n| c.pu_weight(grid.coords(n))).collect()).collect();
    let mut total = vec![0.0; nn];
    for wk in &w {
        for (t, v) in total.iter_mut().zip(wk) {
            *t += v;
        }
    }
    w.into_iter()
        .map(|wk| wk.iter().zip(&total).map(|(v, t)| if *t > 0.0 { v / t } else { 0.0 }).collect())
        .collect()
}

/// Analytic `λ_k(x)` for the same cover.
pub fn partition_value(cover: &[CubeChart], k: usize, x: [f64; 3]) -> f64 {
    let total: f64 = cover.iter().map(|c| c.pu_weight(x)).sum();
    if total > 0.0 {
        cover[k].pu_weight(x) / total
    } else {
        0.0
    }
}

/// Largest `|dλ_k(ν)|` on the faces (one-sided five-point difference of the analytic partition).
pub fn partition_normal_defect(grid: &DomainGrid, cover: &[CubeChart]) -> f64 {
    let eps = 1e-3;
    let mut m: f64 = 0.0;
    for face in Face::BOTH {
        let s = face.inward_sign();
        for i in 0..grid.n_lat {
            for j in 0..grid.n_lat {
                let x = grid.coords(grid.inward_node(face, i, j, 0));
                for k in 0..cover.len() {
                    let at = |q: f64| partition_value(cover, k, [x[0], x[1], x[2] + s * q * eps]);
                    let d = (-25.0 * at(0.0) + 48.0 * at(1.0) - 36.0 * at(2.0) + 16.0 * at(3.0) - 3.0 * at(4.0)) / (12.0 * eps);
                    m = m.max(d.abs());
                }
            }
        }
    }
    m
}

fn lateral_origins() -> Vec<[f64; 2]> {
    let n = LATERAL_POSITIONS;
    let mut v = Vec::new();
    for a in 0..n {
        for b in 0..n {
            v.push([a as f64 / n as f64, b as f64 / n as f64]);
        }
    }
    v
}

/// Interior charts of lateral side 1 whose plateaus cover `[z_lo, z_hi]` along `x₃`.
pub fn interior_cover(grid: &DomainGrid, z_lo: f64, z_hi: f64) -> Result<Vec<CubeChart>> {
    let margin = 2.0 * grid.h_norm;
    let [_, _, fi, _, _, fl] = FRACTIONS;
    // largest normal side keeping the support (i, l)·side inside the margins
    let side_at = |z: f64| -> f64 { 0.5f64.min(0.95 * (z - margin) / (0.5 - fi)).min(0.95 * (1.0 - margin - z) / (fl - 0.5)) };
    let mut centers = Vec::new();
    let mut z = z_lo;
    loop {
        let s = side_at(z);
        if !(s > 0.0) {
            return Err(Error::Support(format!("no interior chart fits around x3 = {z:.3}")));
        }
        centers.push((z, s));
        if z >= z_hi {
            break;
        }
        z = (z + 0.2 * s).min(z_hi);
    }
    let mut cover = Vec::new();
    for o in lateral_origins() {
        for &(zc, s) in &centers {
            cover.push(CubeChart::interior([o[0], o[1], zc - 0.5 * s], [1.0, 1.0, s])?);
        }
    }
    Ok(cover)
}

fn nodal_support_range(psi: &FormField) -> Option<(f64, f64)> {
    let g = psi.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in 0..g.nodes() {
        if psi.at(0, n).iter().any(|v| *v != 0.0) {
            let z = g.coords(n)[2];
            lo = lo.min(z);
            hi = hi.max(z);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Jobs `(chart, ψ, A, B)` for one cover and target, in deterministic order.
fn cover_jobs(psi: &FormField, cover: &[CubeChart]) -> Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let g = psi.grid();
    let alg = psi.algebra();
    let dim = alg.dim();
    let lam = partition_of_unity(g, cover);
    let mut jobs = Vec::new();
    for (k, lk) in lam.iter().enumerate() {
        for c in 0..dim {
            let comp: Vec<f64> = (0..g.nodes()).map(|n| lk[n] * psi.at(0, n)[c]).collect();
            if comp.iter().all(|v| *v == 0.0) {
                continue;
            }
            for &(coef, l, r) in alg.commutator_table(c) {
                let mut a = vec![0.0; dim];
                a[l] = 1.0;
                let mut b = vec![0.0; dim];
                b[r] = 1.0;
                jobs.push((k, comp.iter().map(|v| coef * v).collect(), a, b));
            }
        }
    }
    jobs
}

/// Realizes an interior-supported 0-form over a cover of interior charts.
///
/// With `cover = None` a periodic cover adapted to the support along `x₃` is used.
pub fn interior_span(psi: &FormField, cover: Option<&[CubeChart]>) -> Result<SpanCertificate> {
    if psi.degree() != 0 {
        return Err(Error::Degree(psi.degree()));
    }
    let g = psi.grid().clone();
    let alg = psi.algebra().clone();
    if !alg.is_semisimple() {
        return Err(Error::Validation(format!("{} is not semisimple", alg.name())));
    }
    for n in 0..g.nodes() {
        let k = g.ijk(n).2;
        if (k <= 2 || k + 3 >= g.n_norm) && psi.at(0, n).iter().any(|v| *v != 0.0) {
            return Err(Error::Support("target does not vanish within two cells of the faces".into()));
        }
    }
    let Some((lo, hi)) = nodal_support_range(psi) else {
        return Ok(SpanCertificate::empty(psi.clone(), false));
    };
    let auto;
    let cover = match cover {
        Some(c) => c,
        None => {
            auto = interior_cover(&g, lo, hi)?;
            &auto[..]
        }
    };
    if let Some(c) = cover.iter().find(|c| c.face.is_some()) {
        return Err(Error::Validation(format!("interior cover contains a boundary chart {c:?}")));
    }
    check_covered(psi, cover)?;
    let jobs = cover_jobs(psi, cover);
    let raws: Vec<Result<RawTerm>> = jobs
        .par_iter()
        .map(|(k, v, a, b)| {
            let chart = &cover[*k];
            let margin = 2.0 * g.h_norm;
            if chart.origin[2] + FRACTIONS[2] * chart.side[2] < margin
                || chart.origin[2] + FRACTIONS[5] * chart.side[2] > 1.0 - margin
            {
                return Err(Error::Support("chart support is within two cells of a face".into()));
            }
            build_term(&g, &alg, chart, Profile::Nodal(v), a, b)
        })
        .collect();
    let raws = raws.into_iter().collect::<Result<Vec<_>>>()?;
    assemble(psi.clone(), raws, false, 0.0)
}

fn check_covered(psi: &FormField, cover: &[CubeChart]) -> Result<()> {
    let g = psi.grid();
    for n in 0..g.nodes() {
        if psi.at(0, n).iter().any(|v| *v != 0.0) {
            let x = g.coords(n);
            if !cover.iter().any(|c| c.pu_weight(x) > 0.0) {
                return Err(Error::Support(format!("target nonzero at {x:?} outside every chart plateau")));
            }
        }
    }
    Ok(())
}

/// A bracket chain `[[A, B], C]` with `coef·[[e_a, e_b], e_c] = e_target`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Chain {
    pub target: usize,
    pub coef: f64,
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

/// Chains expressing each basis element as double brackets.
pub fn chains(alg: &Algebra) -> Vec<Chain> {
    let mut out = Vec::new();
    for t in 0..alg.dim() {
        for &(c1, l, r) in alg.commutator_table(t) {
            for &(c2, a, b) in alg.commutator_table(l) {
                out.push(Chain { target: t, coef: c1 * c2, a, b, c: r });
            }
        }
    }
    out
}

/// Output of the boundary-data layer: `f = Σ[gᵢ, hᵢ]` with `T₀ f ≈ F`.
#[derive(Clone, Debug)]
pub struct BoundaryLayer {
    pub terms: Vec<(FormField, FormField)>,
    pub chains: Vec<Chain>,
    pub f: FormField,
    /// `‖T₀(Σ[gᵢ,hᵢ]) − F‖_∞`.
    pub t0_residual: f64,
    /// Smallest `d(Gφ)(ν)` over both faces.
    pub hopf_min: f64,
    pub solves: Vec<SolveReport>,
}

pub const HOPF_HALF_WIDTH: f64 = 0.2;

/// Face-layer cutoff of the boundary-data construction: 1 for distances up
/// to the first value, 0 from the second.
pub const FACE_LAYER: [f64; 2] = [0.25, 0.5];

/// Interior source `φ ≥ 0` used for the `h` factors.
pub fn hopf_source(grid: &DomainGrid) -> Vec<f64> {
    (0..grid.nodes()).map(|n| bump_raw((grid.coords(n)[2] - 0.5) / HOPF_HALF_WIDTH)).collect()
}

/// Builds `g`, `h` with `T₀(Σ[gᵢ,hᵢ]) = F` for 𝔨-valued boundary data `F`.
pub fn realize_boundary_data(
    grid: &Arc<DomainGrid>,
    alg: &Arc<Algebra>,
    data: &FacePair,
    hopf_margin: f64,
) -> Result<BoundaryLayer> {
    let dim = alg.dim();
    if data.f0.dim != dim || data.f1.dim != dim || data.f0.n_lat != grid.n_lat {
        return Err(Error::Shape("boundary data does not match the grid".into()));
    }
    if !alg.is_semisimple() {
        return Err(Error::Validation(format!("{} is not semisimple", alg.name())));
    }
    let flat = ConnectionState::flat(grid, alg);
    if data.sup() == 0.0 {
        return Ok(BoundaryLayer {
            terms: Vec::new(),
            chains: Vec::new(),
            f: FormField::zeros(grid, alg, 0)?,
            t0_residual: 0.0,
            hopf_min: f64::NAN,
            solves: Vec::new(),
        });
    }
    let phi = hopf_source(grid);
    let (gphi, rep) = scalar_green(grid, &phi)?;
    let mut solves = vec![rep];
    let d0 = hopf_normal_derivative(grid, &gphi, Face::F0, hopf_margin)?;
    let d1 = hopf_normal_derivative(grid, &gphi, Face::F1, hopf_margin)?;
    let hopf_min = d0.min().min(d1.min());
    // ≡ 1 near the face, vanishing before the support of φ
    let ext = |y: f64| 1.0 - smooth_step((y - FACE_LAYER[0]) / (FACE_LAYER[1] - FACE_LAYER[0]));
    let mut terms = Vec::new();
    let mut used = Vec::new();
    let mut f = FormField::zeros(grid, alg, 0)?;
    for ch in chains(alg) {
        let comp_zero = [&data.f0, &data.f1].iter().all(|b| b.values.chunks(dim).all(|v| v[ch.target] == 0.0));
        if comp_zero {
            continue;
        }
        let mut ab = vec![0.0; dim];
        let (mut ea, mut eb) = (vec![0.0; dim], vec![0.0; dim]);
        ea[ch.a] = 1.0;
        eb[ch.b] = 1.0;
        alg.bracket_into(&ea, &eb, &mut ab);
        let mut src = FormField::zeros(grid, alg, 0)?;
        for n in 0..grid.nodes() {
            let (i, j, k) = grid.ijk(n);
            let x3 = grid.coords(n)[2];
            let mut s = 0.0;
            for (face, bf, dn) in [(Face::F0, &data.f0, &d0), (Face::F1, &data.f1, &d1)] {
                let y = match face {
                    Face::F0 => x3,
                    Face::F1 => 1.0 - x3,
                };
                let e = ext(y);
                if e == 0.0 {
                    continue;
                }
                let fk = ch.coef * bf.at(i, j)[ch.target] / (3.0 * dn.at(i, j)[0]);
                s += fk * e * (-2.0 * grid.tau_at(face, i, j) * y).exp();
            }
            let _ = k;
            if s != 0.0 {
                for (o, v) in src.at_mut(0, n).iter_mut().zip(&ab) {
                    *o = s * v;
                }
            }
        }
        let (g, rep) = flat.green(&src)?;
        solves.push(rep);
        let mut ec = vec![0.0; dim];
        ec[ch.c] = 1.0;
        let mut h = FormField::zeros(grid, alg, 0)?;
        for (n, v) in gphi.iter().enumerate() {
            h.at_mut(0, n)[ch.c] = *v;
        }
        f.axpy(1.0, &bracket0(&g, &h)?)?;
        terms.push((g, h));
        used.push(ch);
    }
    let t = boundary_operator_t(&flat, &f)?;
    let t0_residual = t.sub(data)?.sup();
    Ok(BoundaryLayer { terms, chains: used, f, t0_residual, hopf_min, solves })
}

/// Both layers of the decomposition of a conductor 0-form.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub u: FacePair,
    pub boundary_layer: BoundaryLayer,
    /// `‖T₀(g − f)‖_∞`.
    pub kernel_residual: f64,
    /// `w = Δ(g − f)`.
    pub w: FormField,
    /// Span certificates: face `F0`, face `F1`, interior.
    pub layers: Vec<SpanCertificate>,
    /// `‖Σ_all[αᵢ·βᵢ] − w‖_∞` over non-face nodes.
    pub reconstruction_error: f64,
    /// `t0_residual + reconstruction_error`.
    pub total_residual: f64,
    /// `‖Δg‖_∞` over non-face nodes, for scale.
    pub scale: f64,
    /// `max |dλ_k(ν)|` of the partition of unity.
    pub partition_defect: f64,
}

/// The periodic cover used for full decompositions: per lateral position one
/// chart at each face (depth 1) and one interior chart.
pub fn decomposition_cover() -> Result<Vec<CubeChart>> {
    let mut cover = Vec::new();
    for face in Face::BOTH {
        for o in lateral_origins() {
            cover.push(CubeChart::boundary(face, o, [1.0, 1.0], 1.0)?);
        }
    }
    for o in lateral_origins() {
        cover.push(CubeChart::interior([o[0], o[1], 0.0], [1.0, 1.0, 1.0])?);
    }
    Ok(cover)
}

/// Relative size of `T₀ g` below which the boundary layer is skipped.
pub const KERNEL_TOL: f64 = 1e-8;

/// Splits `g = f + (g − f)` with `T₀(g − f) ≈ 0` and realizes `Δ(g − f)` as
/// a sum of wedge-dot products.
pub fn decompose_gauge_element(g: &FormField) -> Result<Decomposition> {
    if g.degree() != 0 {
        return Err(Error::Degree(g.degree()));
    }
    let grid = g.grid().clone();
    let alg = g.algebra().clone();
    let flat = ConnectionState::flat(&grid, &alg);
    let lap = laplacian_with_traces(&flat, g).map_err(|e| e.at_stage("laplacian"))?;
    let scale = conductor_project(&lap).sup_norm();
    let mut u = boundary_operator_t(&flat, g).map_err(|e| e.at_stage("T0"))?;
    if u.sup() <= KERNEL_TOL * scale.max(f64::MIN_POSITIVE) {
        u = FacePair::zeros(grid.n_lat, alg.dim());
    }
    let layer = realize_boundary_data(&grid, &alg, &u, 1e-3).map_err(|e| e.at_stage("boundary data"))?;
    let rest = g.sub(&layer.f)?;
    let kernel_residual = boundary_operator_t(&flat, &rest).map_err(|e| e.at_stage("T0 kernel"))?.sup();
    let w = laplacian_with_traces(&flat, &rest).map_err(|e| e.at_stage("laplacian"))?;

    // solver noise near the faces does not call for the boundary variant
    let noise = KERNEL_TOL * scale;
    let near_face = (0..grid.nodes()).any(|n| {
        let k = grid.ijk(n).2;
        (k <= 2 || k + 3 >= grid.n_norm) && w.at(0, n).iter().any(|v| v.abs() > noise)
    });
    let mut layers = Vec::new();
    let mut partition_defect = 0.0;
    if near_face {
        let cover = decomposition_cover()?;
        partition_defect = partition_normal_defect(&grid, &cover[..]);
        let jobs = cover_jobs(&w, &cover);
        let raws: Vec<(usize, Result<RawTerm>)> = jobs
            .par_iter()
            .map(|(k, v, a, b)| {
                let chart = &cover[*k];
                let group = match chart.face {
                    Some(Face::F0) => 0,
                    Some(Face::F1) => 1,
                    None => 2,
                };
                (group, build_term(&grid, &alg, chart, Profile::Nodal(v), a, b))
            })
            .collect();
        let mut groups: [Vec<RawTerm>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (gi, r) in raws {
            let stage = ["boundary span F0", "boundary span F1", "interior span"][gi];
            groups[gi].push(r.map_err(|e| e.at_stage(stage))?);
        }
        let lam = partition_of_unity(&grid, &cover);
        for (gi, raw) in groups.into_iter().enumerate() {
            // the target of each layer is its share of w
            let mut target = FormField::zeros(&grid, &alg, 0)?;
            for (k, chart) in cover.iter().enumerate() {
                let belongs = match chart.face {
                    Some(Face::F0) => gi == 0,
                    Some(Face::F1) => gi == 1,
                    None => gi == 2,
                };
                if belongs {
                    for n in 0..grid.nodes() {
                        if lam[k][n] != 0.0 {
                            let wn: Vec<f64> = w.at(0, n).iter().map(|v| v * lam[k][n]).collect();
                            for (o, x) in target.at_mut(0, n).iter_mut().zip(wn) {
                                *o += x;
                            }
                        }
                    }
                }
            }
            let compat = if gi < 2 {
                let face = if gi == 0 { Face::F0 } else { Face::F1 };
                (0..alg.dim())
                    .map(|c| {
                        let comp: Vec<f64> = (0..grid.nodes()).map(|n| target.at(0, n)[c]).collect();
                        compatibility_defect(&grid, face, Profile::Nodal(&comp))
                    })
                    .fold(0.0, f64::max)
            } else {
                0.0
            };
            layers.push(assemble(target, raw, gi < 2, compat)?);
        }
    } else {
        let mut inner = w.clone();
        for n in 0..grid.nodes() {
            let k = grid.ijk(n).2;
            if k <= 2 || k + 3 >= grid.n_norm {
                inner.at_mut(0, n).fill(0.0);
            }
        }
        let cert = interior_span(&inner, None).map_err(|e| e.at_stage("interior span"))?;
        layers.push(cert);
    }
    let mut total = FormField::zeros(&grid, &alg, 0)?;
    for l in &layers {
        total.axpy(1.0, &l.sum()?)?;
    }
    let reconstruction_error = conductor_project(&total.sub(&w)?).sup_norm();
    Ok(Decomposition {
        total_residual: layer.t0_residual + reconstruction_error,
        u,
        boundary_layer: layer,
        kernel_residual,
        w,
        layers,
        reconstruction_error,
        scale,
        partition_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricSpec;
    use std::f64::consts::PI;

    fn flat(nl: usize, nn: usize) -> (Arc<DomainGrid>, Arc<Algebra>) {
        (DomainGrid::build(MetricSpec::flat(), nl, nn).unwrap(), Algebra::su2())
    }

    fn e(k: usize) -> Vec<f64> {
        let mut v = vec![0.0; 3];
        v[k] = 1.0;
        v
    }

    /// Separable bump centred in the plateau of the unit interior chart.
    fn plateau_bump(x: [f64; 3]) -> f64 {
        let b = |t: f64| bump_raw((t - 0.5) / 0.2);
        0.05 * b(x[0]) * b(x[1]) * b(x[2]) * std::f64::consts::E.powi(3)
    }

    fn unit_chart() -> CubeChart {
        CubeChart::interior([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn bump_profile_properties() {
        let p = BumpProfile::new(0.2, 1.2).unwrap();
        assert!((p.eta_integral(4000) - 1.0).abs() < 1e-10);
        assert!(p.eta(p.k) == 0.0 && p.eta(p.i) == 0.0 && p.eta(0.5 * (p.k + p.i)) > 0.0);
        assert_eq!(p.plateau(p.c), 1.0);
        assert_eq!(p.plateau(p.i), 0.0);
        assert_eq!(p.plateau(p.l), 0.0);
        assert!((p.coordinate(0.7) - 0.7).abs() < 1e-15);
        let order = [p.a, p.j, p.k, p.i, p.c, p.d, p.l, p.b];
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert!(BumpProfile::new(1.0, 1.0).is_err());
    }

    #[test]
    fn zero_target_gives_zero_term() {
        let (g, alg) = flat(16, 17);
        let zero = |_: [f64; 3]| 0.0;
        let c = interior_realize(&g, &alg, &unit_chart(), Profile::Analytic(&zero), &e(0), &e(1)).unwrap();
        assert_eq!(c.terms.len(), 1);
        assert!(c.terms[0].alpha.nodes.is_empty() && c.terms[0].beta.nodes.len() > 0);
        assert_eq!(c.reconstruction_error, 0.0);
    }

    #[test]
    fn antiderivative_case_properties() {
        // h-properties of the construction, checked nodewise
        let (g, _) = flat(32, 33);
        let chart = unit_chart();
        let p = chart.profiles();
        let ad = antiderivative(&g, &chart, Profile::Analytic(&plateau_bump)).unwrap();
        let mut int_max: f64 = 0.0;
        for n in 0..g.nodes() {
            let x = g.coords(n);
            let t = chart.local(x).unwrap();
            let s = plateau_bump(x);
            // p2: h = ψ on the plateau; p3/p5: support; p6: zero on (i, c)
            if (0..3).all(|a| t[a] >= p[a].c && t[a] <= p[a].d) {
                assert!((ad.h[n] - s).abs() < 1e-14);
            }
            if !(t[0] > p[0].c && t[0] < p[0].d && t[2] > p[2].c && t[2] < p[2].d) || t[1] <= p[1].j || t[1] >= p[1].d {
                assert_eq!(ad.h[n], 0.0);
                assert_eq!(ad.f[n], 0.0);
            }
            if t[1] > p[1].i && t[1] < p[1].c {
                assert_eq!(ad.h[n], 0.0);
            }
            int_max = int_max.max(ad.f[n].abs());
        }
        // p4 via the tail of F after the plateau
        assert!(ad.tail < 1e-15 * int_max.max(1.0), "{}", ad.tail);
        // Θ = h·G_x = ψ nodewise with the analytic G_x
        let gx = |x: [f64; 3]| {
            let t = chart.local(x).unwrap();
            let dphi = if t[0] >= p[0].c && t[0] <= p[0].d { 1.0 } else { f64::NAN };
            dphi * p[1].plateau(t[1]) * p[2].plateau(t[2])
        };
        let mut worst: f64 = 0.0;
        for n in 0..g.nodes() {
            if ad.h[n] != 0.0 {
                let th = ad.h[n] * gx(g.coords(n));
                worst = worst.max((th - plateau_bump(g.coords(n))).abs());
            }
        }
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn interior_realize_second_order() {
        let alg = Algebra::su2();
        let mut errs = Vec::new();
        for nl in [16, 32] {
            let g = DomainGrid::build(MetricSpec::flat(), nl, nl + 1).unwrap();
            let c = interior_realize(&g, &alg, &unit_chart(), Profile::Analytic(&plateau_bump), &e(0), &e(1)).unwrap();
            assert!(c.divergence_residual <= 1e-10, "{}", c.divergence_residual);
            assert!(c.reconstruction_error <= 10.0 * g.h_lat * g.h_lat, "{}", c.reconstruction_error);
            assert_eq!(c.recheck().unwrap(), c.reconstruction_error);
            errs.push(c.reconstruction_error);
        }
        assert!((errs[0] / errs[1]).log2() > 1.5, "{errs:?}");
    }

    #[test]
    fn interior_realize_rejects_bad_support() {
        let (g, alg) = flat(16, 17);
        let wide = |x: [f64; 3]| (PI * x[2]).sin();
        assert!(matches!(
            interior_realize(&g, &alg, &unit_chart(), Profile::Analytic(&wide), &e(0), &e(1)),
            Err(Error::Support(_))
        ));
        let low = CubeChart::interior([0.0, 0.0, -0.15], [1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            interior_realize(&g, &alg, &low, Profile::Analytic(&plateau_bump), &e(0), &e(1)),
            Err(Error::Support(_))
        ));
    }

    #[test]
    fn boundary_realize_flat_and_warped() {
        let alg = Algebra::su2();
        // flat: lateral bump × cutoff constant near the face
        let g = DomainGrid::build(MetricSpec::flat(), 16, 17).unwrap();
        let chart = CubeChart::boundary(Face::F0, [0.0, 0.0], [1.0, 1.0], 1.0).unwrap();
        let psi = |x: [f64; 3]| {
            let b = |t: f64| bump_raw((t - 0.5) / 0.2) * std::f64::consts::E;
            0.05 * b(x[0]) * b(x[1]) * (1.0 - smooth_step((x[2] - 0.3) / 0.25))
        };
        let c = boundary_realize(&g, &alg, &chart, Profile::Analytic(&psi), &e(1), &e(2), Some(1e-8)).unwrap();
        assert!(c.cbc_trace <= 1e-12, "{}", c.cbc_trace);
        assert!(c.divergence_residual <= 1e-10);
        assert!(c.reconstruction_error <= 10.0 * g.h_lat * g.h_lat, "{}", c.reconstruction_error);
        // violated compatibility
        let bad = |x: [f64; 3]| psi(x) * (1.0 + x[2]);
        assert!(matches!(
            boundary_realize(&g, &alg, &chart, Profile::Analytic(&bad), &e(1), &e(2), Some(1e-8)),
            Err(Error::Compatibility(_))
        ));
        // warped: ψ = f·cutoff·exp(−2τ y₃) at both faces
        let mut errs = Vec::new();
        for nl in [16, 32] {
            let g = DomainGrid::build(MetricSpec::warped_linear(), nl, nl + 1).unwrap();
            let mut worst: f64 = 0.0;
            for face in Face::BOTH {
                let chart = CubeChart::boundary(face, [0.1, 0.3], [1.0, 1.0], 1.0).unwrap();
                let tau = g.tau_at(face, 0, 0);
                let psi = move |x: [f64; 3]| {
                    let y = if face == Face::F0 { x[2] } else { 1.0 - x[2] };
                    let b = |t: f64| bump_raw((t - 0.5) / 0.2) * std::f64::consts::E;
                    let t = chart.local(x).map(|t| b(t[0]) * b(t[1])).unwrap_or(0.0);
                    0.05 * t * (1.0 - smooth_step((y - 0.3) / 0.25)) * (-2.0 * tau * y).exp()
                };
                let c = boundary_realize(&g, &alg, &chart, Profile::Analytic(&psi), &e(2), &e(0), Some(1e-8)).unwrap();
                assert!(c.cbc_trace <= 1e-12);
                assert!(c.divergence_residual <= 1e-10);
                worst = worst.max(c.reconstruction_error);
            }
            errs.push(worst);
        }
        assert!((errs[0] / errs[1]).log2() > 0.9, "{errs:?}");
    }

    #[test]
    fn interior_span_cases() {
        let (g, alg) = flat(16, 17);
        // single chart: matches interior_realize on nodal data
        let psi = FormField::scalar_times(&g, &alg, &e(2), plateau_bump);
        let one = interior_span(&psi, Some(&[unit_chart()])).unwrap();
        assert_eq!(one.terms.len(), 1);
        let nodal: Vec<f64> = (0..g.nodes()).map(|n| plateau_bump(g.coords(n))).collect();
        let direct = interior_realize(&g, &alg, &unit_chart(), Profile::Nodal(&nodal), &e(0), &e(1)).unwrap();
        assert_eq!(one.reconstruction_error, direct.reconstruction_error);
        // two disjoint bumps on two charts
        let shifted = CubeChart::interior([0.5, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        let second = |x: [f64; 3]| plateau_bump([x[0] - 0.5, x[1], x[2]]);
        let two = FormField::scalar_times(&g, &alg, &e(2), |x| plateau_bump(x) + second(x));
        let c2 = interior_span(&two, Some(&[unit_chart(), shifted])).unwrap();
        assert_eq!(c2.terms.len(), 2);
        let other = interior_span(&FormField::scalar_times(&g, &alg, &e(2), second), Some(&[shifted])).unwrap();
        assert!(c2.reconstruction_error <= one.reconstruction_error + other.reconstruction_error + 1e-15);
        // face support rejected
        let bad = FormField::scalar_times(&g, &alg, &e(0), |x| x[2] * (1.0 - x[2]));
        assert!(matches!(interior_span(&bad, None), Err(Error::Support(_))));
    }

    #[test]
    fn interior_span_random_field() {
        let alg = Algebra::su2();
        let mut errs = Vec::new();
        for nl in [16, 32] {
            let g = DomainGrid::build(MetricSpec::flat(), nl, nl + 1).unwrap();
            let env = |z: f64| bump_raw((z - 0.5) / 0.2);
            let psi = FormField::from_fn(&g, &alg, 0, |x, _, o| {
                let l = 2.0 * PI;
                o[0] = 0.05 * env(x[2]) * (l * x[0]).cos();
                o[1] = 0.05 * env(x[2]) * (l * x[1]).sin();
                o[2] = 0.05 * env(x[2]) * (l * (x[0] + x[1])).cos();
            })
            .unwrap();
            let c = interior_span(&psi, None).unwrap();
            let charts = c.terms.iter().map(|t| t.chart).fold(Vec::new(), |mut v: Vec<CubeChart>, ch| {
                if !v.contains(&ch) {
                    v.push(ch);
                }
                v
            });
            assert_eq!(c.terms.len(), charts.len() * 3);
            assert!(c.divergence_residual <= 1e-10);
            errs.push(c.reconstruction_error);
        }
        assert!((errs[0] / errs[1]).log2() > 1.5, "{errs:?}");
    }

    #[test]
    fn chain_decomposition_reconstructs_basis() {
        let alg = Algebra::su2();
        for ch in chains(&alg) {
            let mut ab = vec![0.0; 3];
            alg.bracket_into(&e(ch.a), &e(ch.b), &mut ab);
            let mut v = vec![0.0; 3];
            alg.bracket_into(&ab, &e(ch.c), &mut v);
            for (k, x) in v.iter().enumerate() {
                let want = if k == ch.target { 1.0 } else { 0.0 };
                assert!((ch.coef * x - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn boundary_data_examples() {
        let (g, alg) = flat(16, 17);
        let zero = FacePair::zeros(16, 3);
        assert!(realize_boundary_data(&g, &alg, &zero, 1e-3).unwrap().terms.is_empty());
        let mut errs = Vec::new();
        for nl in [16, 32] {
            let g = DomainGrid::build(MetricSpec::flat(), nl, nl + 1).unwrap();
            // constant on F0, zero on F1
            let mut data = FacePair::zeros(nl, 3);
            for v in data.f0.values.chunks_mut(3) {
                v[2] = 0.7;
            }
            let layer = realize_boundary_data(&g, &alg, &data, 1e-3).unwrap();
            assert_eq!(layer.terms.len(), 1);
            assert!(layer.t0_residual <= 10.0 * g.h_norm, "{}", layer.t0_residual);
            // lateral mode
            let mut data = FacePair::zeros(nl, 3);
            for face in Face::BOTH {
                let bf = if face == Face::F0 { &mut data.f0 } else { &mut data.f1 };
                for i in 0..nl {
                    for j in 0..nl {
                        bf.values[(i * nl + j) * 3] = (2.0 * PI * i as f64 / nl as f64).cos();
                    }
                }
            }
            errs.push(realize_boundary_data(&g, &alg, &data, 1e-3).unwrap().t0_residual);
        }
        assert!((errs[0] / errs[1]).log2() > 0.9, "{errs:?}");
        assert!(matches!(realize_boundary_data(&g, &alg, &FacePair::zeros(16, 3).tap(), 10.0), Err(Error::Degeneracy(_))));
    }

    trait Tap {
        fn tap(self) -> FacePair;
    }
    impl Tap for FacePair {
        fn tap(mut self) -> FacePair {
            self.f0.values[0] = 1.0;
            self
        }
    }

    #[test]
    fn compact_form_round_trip() {
        let (g, alg) = flat(8, 9);
        let f = FormField::from_fn(&g, &alg, 1, |x, c, o| {
            if x[0] < 0.3 {
                o[c] = x[1] + 1.0;
            }
        })
        .unwrap();
        let c = CompactForm::from_dense(&f);
        assert!(c.nodes.len() < g.nodes());
        assert_eq!(c.to_dense(&g, &alg).unwrap().data(), f.data());
    }

    #[test]
    fn decomposition_interior_case() {
        let (g, alg) = flat(16, 33);
        let src = FormField::scalar_times(&g, &alg, &e(1), |x| {
            bump_raw((x[2] - 0.5) / 0.15) * (2.0 * PI * x[0]).cos()
        });
        let (gg, _) = ConnectionState::flat(&g, &alg).green(&src).unwrap();
        let d = decompose_gauge_element(&gg).unwrap();
        assert!(d.boundary_layer.terms.is_empty());
        assert_eq!(d.layers.len(), 1);
        assert!(!d.layers[0].cbc);
    }

    #[test]
    fn decomposition_cover_is_boundary_flat() {
        let (g, _) = flat(16, 17);
        let cover = decomposition_cover().unwrap();
        assert!(partition_normal_defect(&g, &cover) <= 1e-10);
        let lam = partition_of_unity(&g, &cover);
        for n in 0..g.nodes() {
            let s: f64 = lam.iter().map(|l| l[n]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
