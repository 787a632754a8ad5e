//! Grid-sampled Lie-algebra-valued 0-, 1- and 2-forms and the discrete
//! operators acting on them.
//!
//! All degrees are collocated at nodes. Storage is
//! `data[(comp * nodes + node) * dim + a]` with `dim` the algebra dimension;
//! 1-forms carry components `(α₁, α₂, α₃)` and 2-forms components along
//! `(dx₂∧dx₃, dx₃∧dx₁, dx₁∧dx₂)`.
//!
//! The first derivative along `x₃` is the summation-by-parts operator: central
//! differences inside, first-order one-sided rows at the faces. With trapezoid
//! weights this makes `d*` (the transposed stencil) the exact adjoint of `d`.
//! Output slots of `d*` that are never paired with a conductor field (face
//! values of 0-forms, tangential face components of 1-forms) are filled by
//! cubic extrapolation from nodes of the same parity.

use crate::error::{Error, Result};
use crate::geometry::{cofactor3, DomainGrid, Face};
use crate::lie::Algebra;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone)]
pub struct FormField {
    degree: usize,
    grid: Arc<DomainGrid>,
    alg: Arc<Algebra>,
    data: Vec<f64>,
}

impl std::fmt::Debug for FormField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FormField(p={}, {:?}, {})", self.degree, self.grid, self.alg.name())
    }
}

pub fn ncomp(degree: usize) -> usize {
    if degree == 0 {
        1
    } else {
        3
    }
}

impl FormField {
    pub fn zeros(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, degree: usize) -> Result<FormField> {
        if degree > 2 {
            return Err(Error::Degree(degree));
        }
        let len = ncomp(degree) * grid.nodes() * alg.dim();
        Ok(FormField { degree, grid: grid.clone(), alg: alg.clone(), data: vec![0.0; len] })
    }

    pub fn from_data(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, degree: usize, data: Vec<f64>) -> Result<FormField> {
        if degree > 2 {
            return Err(Error::Degree(degree));
        }
        let len = ncomp(degree) * grid.nodes() * alg.dim();
        if data.len() != len {
            return Err(Error::Shape(format!("expected {len} values, got {}", data.len())));
        }
        Ok(FormField { degree, grid: grid.clone(), alg: alg.clone(), data })
    }

    /// Samples `f(x, comp, out)`, which writes the coefficients of component `comp` at `x`.
    pub fn from_fn<F>(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, degree: usize, f: F) -> Result<FormField>
    where
        F: Fn([f64; 3], usize, &mut [f64]),
    {
        let mut u = FormField::zeros(grid, alg, degree)?;
        let dim = alg.dim();
        let nn = grid.nodes();
        for c in 0..ncomp(degree) {
            for n in 0..nn {
                let x = grid.coords(n);
                let s = (c * nn + n) * dim;
                f(x, c, &mut u.data[s..s + dim]);
            }
        }
        Ok(u)
    }

    /// Real scalar profile times a fixed algebra element, as a 0-form.
    pub fn scalar_times<F>(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>, elem: &[f64], f: F) -> FormField
    where
        F: Fn([f64; 3]) -> f64,
    {
        FormField::from_fn(grid, alg, 0, |x, _, out| {
            let s = f(x);
            for (o, e) in out.iter_mut().zip(elem) {
                *o = s * e;
            }
        })
        .expect("degree 0")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.alg
    }

    pub fn dim(&self) -> usize {
        self.alg.dim()
    }

    pub fn ncomp(&self) -> usize {
        ncomp(self.degree)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let len = self.grid.nodes() * self.dim();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.grid.nodes() * self.dim();
        &mut self.data[c * len..(c + 1) * len]
    }

    pub fn at(&self, c: usize, n: usize) -> &[f64] {
        let dim = self.dim();
        let s = (c * self.grid.nodes() + n) * dim;
        &self.data[s..s + dim]
    }

    pub fn at_mut(&mut self, c: usize, n: usize) -> &mut [f64] {
        let dim = self.dim();
        let s = (c * self.grid.nodes() + n) * dim;
        &mut self.data[s..s + dim]
    }

    pub fn check_same(&self, other: &FormField) -> Result<()> {
        if self.degree != other.degree || self.data.len() != other.data.len() || !Arc::ptr_eq(&self.grid, &other.grid)
        {
            return Err(Error::Shape(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    fn check_grid(&self, other: &FormField) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) || self.dim() != other.dim() {
            return Err(Error::Shape(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &FormField) -> Result<FormField> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> FormField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= s);
        out
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &FormField) -> Result<()> {
        self.check_same(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
        Ok(())
    }

    /// Weighted L² inner product with the trace form and induced metric.
    pub fn inner(&self, other: &FormField) -> Result<f64> {
        self.check_same(other)?;
        let g = &self.grid;
        let alg = &self.alg;
        let nn = g.nodes();
        let mut total = 0.0;
        for n in 0..nn {
            let mut s = 0.0;
            match self.degree {
                0 => s = alg.inner(self.at(0, n), other.at(0, n)),
                1 => {
                    let gi = g.inv_metric(n);
                    for i in 0..3 {
                        for j in 0..3 {
                            if gi[i][j] != 0.0 {
                                s += gi[i][j] * alg.inner(self.at(i, n), other.at(j, n));
                            }
                        }
                    }
                }
                _ => {
                    let m = g.metric(n);
                    let a2 = g.a(n) * g.a(n);
                    for i in 0..3 {
                        for j in 0..3 {
                            if m[i][j] != 0.0 {
                                s += m[i][j] / a2 * alg.inner(self.at(i, n), other.at(j, n));
                            }
                        }
                    }
                }
            }
            total += g.wa(n) * s;
        }
        Ok(total)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same field").max(0.0).sqrt()
    }

    /// Largest Euclidean coefficient norm over nodes and components.
    pub fn sup_norm(&self) -> f64 {
        self.data.chunks(self.dim()).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    /// Largest coefficient norm over nodes at least `margin` nodes from both faces.
    pub fn sup_norm_interior(&self, margin: usize) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for c in 0..self.ncomp() {
            for n in 0..g.nodes() {
                let k = g.ijk(n).2;
                if k < margin || k + margin >= g.n_norm {
                    continue;
                }
                m = m.max(self.at(c, n).iter().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
        m
    }

    /// Face values of a 0-form.
    pub fn restrict(&self, face: Face) -> crate::geometry::BoundaryField {
        self.grid.restrict(self.comp(0), self.dim(), face)
    }

    /// Inward normal derivative of a 0-form at a face.
    pub fn normal_derivative(&self, face: Face) -> crate::geometry::BoundaryField {
        self.grid.normal_derivative(self.comp(0), self.dim(), face)
    }

    /// Largest tangential-trace value (see [`conductor_project`]).
    pub fn conductor_defect(&self) -> f64 {
        let g = &self.grid;
        let comps: &[usize] = match self.degree {
            0 => &[0],
            1 => &[0, 1],
            _ => &[2],
        };
        let mut m: f64 = 0.0;
        for &c in comps {
            for face in Face::BOTH {
                for i in 0..g.n_lat {
                    for j in 0..g.n_lat {
                        let n = g.inward_node(face, i, j, 0);
                        for v in self.at(c, n) {
                            m = m.max(v.abs());
                        }
                    }
                }
            }
        }
        m
    }

    pub fn is_conductor(&self, tol: f64) -> bool {
        self.conductor_defect() <= tol
    }

    /// Random smooth field built from a few low Fourier modes. With
    /// `conductor`, the tangential trace vanishes identically.
    pub fn random_smooth<R: Rng>(
        grid: &Arc<DomainGrid>,
        alg: &Arc<Algebra>,
        degree: usize,
        rng: &mut R,
        conductor: bool,
    ) -> Result<FormField> {
        let dim = alg.dim();
        let nc = ncomp(degree);
        let modes = 3;
        // (p, q, m, phase, amplitude) per component and coefficient
        let mut table = Vec::new();
        for _ in 0..nc * dim * modes {
            table.push((
                rng.gen_range(-2i32..=2) as f64,
                rng.gen_range(-2i32..=2) as f64,
                rng.gen_range(1i32..=3) as f64,
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(-1.0..1.0),
            ));
        }
        FormField::from_fn(grid, alg, degree, |x, c, out| {
            let vanish = conductor
                && match degree {
                    0 => true,
                    1 => c < 2,
                    _ => c == 2,
                };
            for (a, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for m in 0..modes {
                    let (p, q, kz, ph, amp) = table[(c * dim + a) * modes + m];
                    let lat = (2.0 * PI * (p * x[0] + q * x[1]) + ph).cos();
                    let nor = if vanish { (kz * PI * x[2]).sin() } else { (kz * PI * x[2] + ph).cos() };
                    s += amp * lat * nor;
                }
                *o = s;
            }
        })
    }
}

// ---------------------------------------------------------------------------
// stencil kernels on node arrays with `dim` values per node

/// `out = D_axis u`.
pub(crate) fn d_axis(g: &DomainGrid, axis: usize, dim: usize, u: &[f64], out: &mut [f64]) {
    let (nl, nz) = (g.n_lat, g.n_norm);
    let col = nz * dim;
    match axis {
        0 | 1 => {
            let c = 0.5 / g.h_lat;
            for i in 0..nl {
                for j in 0..nl {
                    let (p, m) = if axis == 0 {
                        (((i + 1) % nl) * nl + j, ((i + nl - 1) % nl) * nl + j)
                    } else {
                        (i * nl + (j + 1) % nl, i * nl + (j + nl - 1) % nl)
                    };
                    let dst = (i * nl + j) * col;
                    let (p, m) = (p * col, m * col);
                    for t in 0..col {
                        out[dst + t] = c * (u[p + t] - u[m + t]);
                    }
                }
            }
        }
        _ => {
            let h = g.h_norm;
            let c = 0.5 / h;
            for cc in 0..nl * nl {
                let b = cc * col;
                for a in 0..dim {
                    out[b + a] = (u[b + dim + a] - u[b + a]) / h;
                    let top = b + (nz - 1) * dim + a;
                    out[top] = (u[top] - u[top - dim]) / h;
                }
                for t in dim..(nz - 1) * dim {
                    out[b + t] = c * (u[b + t + dim] - u[b + t - dim]);
                }
            }
        }
    }
}

/// `out += s · D_axisᵀ u`.
pub(crate) fn dt_axis_acc(g: &DomainGrid, axis: usize, dim: usize, s: f64, u: &[f64], out: &mut [f64]) {
    let (nl, nz) = (g.n_lat, g.n_norm);
    let col = nz * dim;
    match axis {
        0 | 1 => {
            // periodic central difference is antisymmetric
            let c = -0.5 * s / g.h_lat;
            for i in 0..nl {
                for j in 0..nl {
                    let (p, m) = if axis == 0 {
                        (((i + 1) % nl) * nl + j, ((i + nl - 1) % nl) * nl + j)
                    } else {
                        (i * nl + (j + 1) % nl, i * nl + (j + nl - 1) % nl)
                    };
                    let dst = (i * nl + j) * col;
                    let (p, m) = (p * col, m * col);
                    for t in 0..col {
                        out[dst + t] += c * (u[p + t] - u[m + t]);
                    }
                }
            }
        }
        _ => {
            let h = g.h_norm;
            let c = 0.5 * s / h;
            let e = s / h;
            for cc in 0..nl * nl {
                let b = cc * col;
                for a in 0..dim {
                    let at = |k: usize| b + k * dim + a;
                    // row 0: (u1 - u0)/h
                    out[at(0)] -= e * u[at(0)];
                    out[at(1)] += e * u[at(0)];
                    // row N-1: (u_{N-1} - u_{N-2})/h
                    out[at(nz - 1)] += e * u[at(nz - 1)];
                    out[at(nz - 2)] -= e * u[at(nz - 1)];
                    for r in 1..nz - 1 {
                        out[at(r + 1)] += c * u[at(r)];
                        out[at(r - 1)] -= c * u[at(r)];
                    }
                }
            }
        }
    }
}

/// Overwrites face values of a node array by the same-parity cubic
/// extrapolation `f₀ = 4f₂ − 6f₄ + 4f₆ − f₈`.
pub(crate) fn extrapolate_faces(g: &DomainGrid, dim: usize, u: &mut [f64]) {
    for face in Face::BOTH {
        for i in 0..g.n_lat {
            for j in 0..g.n_lat {
                let n: [usize; 5] = [0, 2, 4, 6, 8].map(|s| g.inward_node(face, i, j, s));
                for a in 0..dim {
                    let f = |m: usize| u[n[m] * dim + a];
                    u[n[0] * dim + a] = 4.0 * f(1) - 6.0 * f(2) + 4.0 * f(3) - f(4);
                }
            }
        }
    }
}

fn zero_faces(g: &DomainGrid, dim: usize, u: &mut [f64]) {
    for face in Face::BOTH {
        for i in 0..g.n_lat {
            for j in 0..g.n_lat {
                let n = g.inward_node(face, i, j, 0);
                u[n * dim..n * dim + dim].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// operators

/// Exterior derivative of a 0- or 1-form.
pub fn exterior_d(u: &FormField) -> Result<FormField> {
    let g = u.grid.clone();
    let dim = u.dim();
    match u.degree {
        0 => {
            let mut out = FormField::zeros(&g, &u.alg, 1)?;
            for axis in 0..3 {
                d_axis(&g, axis, dim, u.comp(0), out.comp_mut(axis));
            }
            Ok(out)
        }
        1 => {
            let mut out = FormField::zeros(&g, &u.alg, 2)?;
            let len = g.nodes() * dim;
            let mut tmp = vec![0.0; len];
            // (dα)_{23} = D2α3 − D3α2, (dα)_{31} = D3α1 − D1α3, (dα)_{12} = D1α2 − D2α1
            for (c, (pa, pc, ma, mc)) in [(1, 2, 2, 1), (2, 0, 0, 2), (0, 1, 1, 0)].into_iter().enumerate() {
                d_axis(&g, pa, dim, u.comp(pc), &mut tmp);
                out.comp_mut(c).copy_from_slice(&tmp);
                d_axis(&g, ma, dim, u.comp(mc), &mut tmp);
                out.comp_mut(c).iter_mut().zip(&tmp).for_each(|(o, t)| *o -= t);
            }
            Ok(out)
        }
        p => Err(Error::Degree(p)),
    }
}

/// Codifferential, the weighted adjoint of [`exterior_d`].
pub fn codifferential(v: &FormField) -> Result<FormField> {
    covariant_codiff(None, v)
}

/// `d_A u = du + [η, u]` for 0-forms and `dα + [η∧α]` for 1-forms.
pub fn covariant_d(eta: Option<&FormField>, u: &FormField) -> Result<FormField> {
    let mut out = exterior_d(u)?;
    let Some(eta) = eta else { return Ok(out) };
    check_connection(eta, u)?;
    let alg = u.alg.clone();
    let nn = u.grid.nodes();
    match u.degree {
        0 => {
            for i in 0..3 {
                for n in 0..nn {
                    let (e, f) = (eta.at(i, n).to_vec(), u.at(0, n).to_vec());
                    alg.bracket_acc(1.0, &e, &f, out.at_mut(i, n));
                }
            }
        }
        _ => {
            for (c, (p, q)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
                for n in 0..nn {
                    let (ep, eq) = (eta.at(p, n).to_vec(), eta.at(q, n).to_vec());
                    let (up, uq) = (u.at(p, n).to_vec(), u.at(q, n).to_vec());
                    let o = out.at_mut(c, n);
                    alg.bracket_acc(1.0, &ep, &uq, o);
                    alg.bracket_acc(-1.0, &eq, &up, o);
                }
            }
        }
    }
    Ok(out)
}

fn check_connection(eta: &FormField, u: &FormField) -> Result<()> {
    if eta.degree != 1 {
        return Err(Error::Degree(eta.degree));
    }
    eta.check_grid(u)
}

/// `d*_A`, the weighted adjoint of [`covariant_d`] on conductor fields.
pub fn covariant_codiff(eta: Option<&FormField>, v: &FormField) -> Result<FormField> {
    if let Some(e) = eta {
        check_connection(e, v)?;
    }
    let g = v.grid.clone();
    let alg = v.alg.clone();
    let dim = alg.dim();
    let nn = g.nodes();
    let len = nn * dim;
    match v.degree {
        1 => {
            let mut out = FormField::zeros(&g, &alg, 0)?;
            let mut q = vec![0.0; len];
            for i in 0..3 {
                for n in 0..nn {
                    let gi = g.inv_metric(n);
                    let wa = g.wa(n);
                    for a in 0..dim {
                        let mut s = 0.0;
                        for j in 0..3 {
                            s += gi[i][j] * v.data[(j * nn + n) * dim + a];
                        }
                        q[n * dim + a] = wa * s;
                    }
                }
                dt_axis_acc(&g, i, dim, 1.0, &q, out.comp_mut(0));
            }
            let o = out.comp_mut(0);
            for n in 0..nn {
                let wa = g.wa(n);
                o[n * dim..n * dim + dim].iter_mut().for_each(|x| *x /= wa);
            }
            extrapolate_faces(&g, dim, o);
            if let Some(eta) = eta {
                let wd = wedge_dot(eta, v)?;
                out.axpy(-1.0, &wd)?;
            }
            Ok(out)
        }
        2 => {
            let mut out = FormField::zeros(&g, &alg, 1)?;
            // Q_I = w (g W)_I / a
            let mut qf = FormField::zeros(&g, &alg, 2)?;
            for n in 0..nn {
                let m = g.metric(n);
                let s = g.weight(n) / g.a(n);
                for i in 0..3 {
                    for a in 0..dim {
                        let mut t = 0.0;
                        for j in 0..3 {
                            t += m[i][j] * v.data[(j * nn + n) * dim + a];
                        }
                        qf.data[(i * nn + n) * dim + a] = s * t;
                    }
                }
            }
            // R1 = D3ᵀQ2 − D2ᵀQ3, R2 = D1ᵀQ3 − D3ᵀQ1, R3 = D2ᵀQ1 − D1ᵀQ2
            let mut r = FormField::zeros(&g, &alg, 1)?;
            for (c, (pa, pc, ma, mc)) in [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)].into_iter().enumerate() {
                dt_axis_acc(&g, pa, dim, 1.0, qf.comp(pc), r.comp_mut(c));
                dt_axis_acc(&g, ma, dim, -1.0, qf.comp(mc), r.comp_mut(c));
            }
            if let Some(eta) = eta {
                // S1 = [η2,Q3] − [η3,Q2], S2 = [η3,Q1] − [η1,Q3], S3 = [η1,Q2] − [η2,Q1]
                for (c, (p, q)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
                    for n in 0..nn {
                        let (ep, eq) = (eta.at(p, n).to_vec(), eta.at(q, n).to_vec());
                        let (qp, qq) = (qf.at(p, n).to_vec(), qf.at(q, n).to_vec());
                        let o = r.at_mut(c, n);
                        alg.bracket_acc(1.0, &ep, &qq, o);
                        alg.bracket_acc(-1.0, &eq, &qp, o);
                    }
                }
            }
            for n in 0..nn {
                let m = g.metric(n);
                let wa = g.wa(n);
                for l in 0..3 {
                    for a in 0..dim {
                        let mut t = 0.0;
                        for j in 0..3 {
                            t += m[l][j] * r.data[(j * nn + n) * dim + a];
                        }
                        out.data[(l * nn + n) * dim + a] = t / wa;
                    }
                }
            }
            // tangential face slots: extrapolate
            for c in 0..2 {
                let comp = out.comp_mut(c);
                extrapolate_faces(&g, dim, comp);
            }
            Ok(out)
        }
        p => Err(Error::Degree(p)),
    }
}

/// `[α·β] = Σ gⁱʲ [α_i, β_j]` nodewise.
pub fn wedge_dot(alpha: &FormField, beta: &FormField) -> Result<FormField> {
    if alpha.degree != 1 || beta.degree != 1 {
        return Err(Error::Degree(if alpha.degree != 1 { alpha.degree } else { beta.degree }));
    }
    alpha.check_grid(beta)?;
    let g = &alpha.grid;
    let alg = &alpha.alg;
    let nn = g.nodes();
    let dim = alg.dim();
    let mut out = FormField::zeros(g, alg, 0)?;
    let mut m = vec![0.0; dim * dim];
    for n in 0..nn {
        let gi = g.inv_metric(n);
        // M_ab = Σ gⁱʲ α_iᵃ β_jᵇ, summed so that swapping α and β transposes M exactly
        for a in 0..dim {
            for b in 0..dim {
                let mut s = 0.0;
                for i in 0..3 {
                    s += gi[i][i] * (alpha.at(i, n)[a] * beta.at(i, n)[b]);
                    for j in i + 1..3 {
                        if gi[i][j] != 0.0 {
                            s += gi[i][j] * (alpha.at(i, n)[a] * beta.at(j, n)[b] + alpha.at(j, n)[a] * beta.at(i, n)[b]);
                        }
                    }
                }
                m[a * dim + b] = s;
            }
        }
        alg.contract_antisymmetric(&m, out.at_mut(0, n));
    }
    Ok(out)
}

/// `[α, φ]` componentwise for a form `α` of any degree and a 0-form `φ`.
pub fn bracket_form(alpha: &FormField, phi: &FormField) -> Result<FormField> {
    if phi.degree != 0 {
        return Err(Error::Degree(phi.degree));
    }
    alpha.check_grid(phi)?;
    let nn = alpha.grid.nodes();
    let mut out = FormField::zeros(&alpha.grid, &alpha.alg, alpha.degree)?;
    for c in 0..alpha.ncomp() {
        for n in 0..nn {
            let (a, f) = (alpha.at(c, n).to_vec(), phi.at(0, n).to_vec());
            alpha.alg.bracket_into(&a, &f, out.at_mut(c, n));
        }
    }
    Ok(out)
}

/// `[f, h]` nodewise for 0-forms.
pub fn bracket0(f: &FormField, h: &FormField) -> Result<FormField> {
    if f.degree != 0 {
        return Err(Error::Degree(f.degree));
    }
    bracket_form(f, h)
}

/// `Δ_A f = d*_A d_A f`; face values are extrapolated.
pub fn laplacian(eta: Option<&FormField>, f: &FormField) -> Result<FormField> {
    if f.degree != 0 {
        return Err(Error::Degree(f.degree));
    }
    covariant_codiff(eta, &covariant_d(eta, f)?)
}

/// The expansion `Δf + [d*η, f] − [η·[η, f]] − 2[η·df]` of the covariant
/// Laplacian around the flat connection, evaluated term by term.
pub fn laplacian_expansion(eta: &FormField, f: &FormField) -> Result<FormField> {
    let mut out = laplacian(None, f)?;
    out.axpy(1.0, &bracket0(&codifferential(eta)?, f)?)?;
    out.axpy(-1.0, &wedge_dot(eta, &bracket_form(eta, f)?)?)?;
    out.axpy(-2.0, &wedge_dot(eta, &exterior_d(f)?)?)?;
    Ok(out)
}

/// `*: Ω¹ → Ω²`, `W = a g⁻¹ α`.
pub fn hodge_star_1to2(alpha: &FormField) -> Result<FormField> {
    if alpha.degree != 1 {
        return Err(Error::Degree(alpha.degree));
    }
    let g = &alpha.grid;
    let nn = g.nodes();
    let dim = alpha.dim();
    let mut out = FormField::zeros(g, &alpha.alg, 2)?;
    for n in 0..nn {
        let gi = g.inv_metric(n);
        let a = g.a(n);
        for i in 0..3 {
            for d in 0..dim {
                let mut s = 0.0;
                for j in 0..3 {
                    s += gi[i][j] * alpha.data[(j * nn + n) * dim + d];
                }
                out.data[(i * nn + n) * dim + d] = a * s;
            }
        }
    }
    Ok(out)
}

/// `*: Ω² → Ω¹`, the inverse of [`hodge_star_1to2`] written with the minor
/// identity `g = a² cof(g⁻¹)`, so `α = a cof(g⁻¹) W`.
pub fn hodge_star_2to1(v: &FormField) -> Result<FormField> {
    if v.degree != 2 {
        return Err(Error::Degree(v.degree));
    }
    let g = &v.grid;
    let nn = g.nodes();
    let dim = v.dim();
    let mut out = FormField::zeros(g, &v.alg, 1)?;
    for n in 0..nn {
        let c = cofactor3(g.inv_metric(n));
        let a = g.a(n);
        for i in 0..3 {
            for d in 0..dim {
                let mut s = 0.0;
                for j in 0..3 {
                    s += c[i][j] * v.data[(j * nn + n) * dim + d];
                }
                out.data[(i * nn + n) * dim + d] = a * s;
            }
        }
    }
    Ok(out)
}

/// Zeroes the tangential trace: face values of 0-forms, `α₁, α₂` of 1-forms
/// and the `dx₁∧dx₂` component of 2-forms.
pub fn conductor_project(u: &FormField) -> FormField {
    let mut out = u.clone();
    let dim = u.dim();
    let g = u.grid.clone();
    let comps: &[usize] = match u.degree {
        0 => &[0],
        1 => &[0, 1],
        _ => &[2],
    };
    for &c in comps {
        zero_faces(&g, dim, out.comp_mut(c));
    }
    out
}
