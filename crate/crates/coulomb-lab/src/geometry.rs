//! The slab `T² × [0, 1]` with a normal-adapted metric, sampled at grid nodes.
//!
//! Nodes are indexed `(i, j, k)` with `i, j` periodic lateral indices and `k`
//! the normal index; the flat node index is `(i * n_lat + j) * n_norm + k`, so
//! columns along `x₃` are contiguous.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

pub type Mat3 = [[f64; 3]; 3];
pub type MetricFn = Arc<dyn Fn([f64; 3]) -> Mat3 + Send + Sync>;

const ADAPT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum MetricFamily {
    Flat,
    /// `g = diag(e^{2φ}, e^{2φ}, 1)` with `φ(x₃) = Σ c_k x₃^k`.
    Warped { phi: Vec<f64> },
    Custom(String),
}

/// Analytic metric callback plus an optional callback for `∂g/∂x₃`.
#[derive(Clone)]
pub struct MetricSpec {
    pub family: MetricFamily,
    metric: MetricFn,
    normal_derivative: Option<MetricFn>,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpec")
            .field("family", &self.family)
            .field("analytic_derivative", &self.normal_derivative.is_some())
            .finish()
    }
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * t + ck)
}

fn poly_deriv(c: &[f64], t: f64) -> f64 {
    c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, ck)| acc * t + k as f64 * ck)
}

impl MetricSpec {
    pub fn flat() -> MetricSpec {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        MetricSpec {
            family: MetricFamily::Flat,
            metric: Arc::new(move |_| id),
            normal_derivative: Some(Arc::new(|_| [[0.0; 3]; 3])),
        }
    }

    pub fn warped(phi: Vec<f64>) -> MetricSpec {
        let p1 = phi.clone();
        let p2 = phi.clone();
        MetricSpec {
            family: MetricFamily::Warped { phi },
            metric: Arc::new(move |x| {
                let e = (2.0 * poly(&p1, x[2])).exp();
                [[e, 0.0, 0.0], [0.0, e, 0.0], [0.0, 0.0, 1.0]]
            }),
            normal_derivative: Some(Arc::new(move |x| {
                let e = 2.0 * poly_deriv(&p2, x[2]) * (2.0 * poly(&p2, x[2])).exp();
                [[e, 0.0, 0.0], [0.0, e, 0.0], [0.0, 0.0, 0.0]]
            })),
        }
    }

    /// The warped family with `φ(x₃) = x₃`.
    pub fn warped_linear() -> MetricSpec {
        MetricSpec::warped(vec![0.0, 1.0])
    }

    pub fn custom(name: &str, metric: MetricFn, normal_derivative: Option<MetricFn>) -> MetricSpec {
        MetricSpec { family: MetricFamily::Custom(name.to_string()), metric, normal_derivative }
    }

    pub fn eval(&self, x: [f64; 3]) -> Mat3 {
        (self.metric)(x)
    }

    pub fn eval_normal_derivative(&self, x: [f64; 3]) -> Option<Mat3> {
        self.normal_derivative.as_ref().map(|d| d(x))
    }

    /// `a = √det g` from the analytic callback.
    pub fn volume_factor(&self, x: [f64; 3]) -> f64 {
        det3(&self.eval(x)).sqrt()
    }
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cofactor matrix (transpose of the adjugate); for symmetric input it is symmetric.
pub fn cofactor3(m: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            c[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
        }
    }
    c
}

pub fn inv3(m: &Mat3) -> Mat3 {
    let c = cofactor3(m);
    let d = det3(m);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = c[j][i] / d;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Face {
    F0,
    F1,
}

impl Face {
    pub const BOTH: [Face; 2] = [Face::F0, Face::F1];

    /// `+1` when the inward normal points along `+x₃`.
    pub fn inward_sign(self) -> f64 {
        match self {
            Face::F0 => 1.0,
            Face::F1 => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::F0 => "F0",
            Face::F1 => "F1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TauMethod {
    /// `½ tr(g⁻¹ ∂₃g)` from the analytic derivative callback.
    Analytic,
    /// `∂₃ det(h) / (2 det h)` for the lateral block `h`.
    LateralDeterminant,
    /// One-sided three-point difference of the sampled `a`.
    FiniteDifference,
}

/// Real or Lie-algebra-valued values on the lateral nodes of one face.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    pub face: Face,
    pub n_lat: usize,
    /// Values per node (1 for real fields, the algebra dimension otherwise).
    pub dim: usize,
    pub values: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(face: Face, n_lat: usize, dim: usize) -> BoundaryField {
        BoundaryField { face, n_lat, dim, values: vec![0.0; n_lat * n_lat * dim] }
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let s = (i * self.n_lat + j) * self.dim;
        &self.values[s..s + self.dim]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest per-node Euclidean coefficient norm.
    pub fn sup_node_norm(&self) -> f64 {
        self.values
            .chunks(self.dim)
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sub(&self, other: &BoundaryField) -> Result<BoundaryField> {
        if self.values.len() != other.values.len() {
            return Err(Error::Shape("boundary fields differ in size".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(BoundaryField { values, ..self.clone() })
    }
}

/// Discretized slab with cached metric tensors and quadrature weights.
pub struct DomainGrid {
    pub spec: MetricSpec,
    pub n_lat: usize,
    pub n_norm: usize,
    pub h_lat: f64,
    pub h_norm: f64,
    g: Vec<Mat3>,
    ginv: Vec<Mat3>,
    a: Vec<f64>,
    w: Vec<f64>,
    wa: Vec<f64>,
    tau: [Vec<f64>; 2],
    tau_sign: f64,
}

impl fmt::Debug for DomainGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DomainGrid({:?}, {}x{}x{})", self.spec.family, self.n_lat, self.n_lat, self.n_norm)
    }
}

impl DomainGrid {
    pub fn build(spec: MetricSpec, n_lat: usize, n_norm: usize) -> Result<Arc<DomainGrid>> {
        Self::build_with(spec, n_lat, n_norm, false)
    }

    /// Same as [`DomainGrid::build`]; `flip_tau` negates the cached mean
    /// curvature and exists only to exercise failure paths of the suites.
    pub fn build_with(spec: MetricSpec, n_lat: usize, n_norm: usize, flip_tau: bool) -> Result<Arc<DomainGrid>> {
        if n_lat < 8 || n_norm < 9 {
            return Err(Error::Resolution(format!("need N_lat >= 8 and N_norm >= 9, got {n_lat} and {n_norm}")));
        }
        let h_lat = 1.0 / n_lat as f64;
        let h_norm = 1.0 / (n_norm - 1) as f64;
        let nodes = n_lat * n_lat * n_norm;
        let mut g = Vec::with_capacity(nodes);
        let mut ginv = Vec::with_capacity(nodes);
        let mut a = Vec::with_capacity(nodes);
        let mut w = Vec::with_capacity(nodes);
        for i in 0..n_lat {
            for j in 0..n_lat {
                for k in 0..n_norm {
                    let x = [i as f64 * h_lat, j as f64 * h_lat, k as f64 * h_norm];
                    let m = spec.eval(x);
                    check_metric(&m, x)?;
                    let d = det3(&m);
                    g.push(m);
                    ginv.push(inv3(&m));
                    a.push(d.sqrt());
                    let wn = if k == 0 || k == n_norm - 1 { 0.5 * h_norm } else { h_norm };
                    w.push(h_lat * h_lat * wn);
                }
            }
        }
        let wa = w.iter().zip(&a).map(|(w, a)| w * a).collect();
        let mut grid = DomainGrid {
            spec,
            n_lat,
            n_norm,
            h_lat,
            h_norm,
            g,
            ginv,
            a,
            w,
            wa,
            tau: [Vec::new(), Vec::new()],
            tau_sign: if flip_tau { -1.0 } else { 1.0 },
        };
        let method =
            if grid.spec.normal_derivative.is_some() { TauMethod::Analytic } else { TauMethod::FiniteDifference };
        for face in Face::BOTH {
            let t = grid.tau_with(face, method).values;
            grid.tau[face_slot(face)] = t;
        }
        Ok(Arc::new(grid))
    }

    pub fn nodes(&self) -> usize {
        self.n_lat * self.n_lat * self.n_norm
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_lat + j) * self.n_norm + k
    }

    #[inline]
    pub fn ijk(&self, n: usize) -> (usize, usize, usize) {
        let k = n % self.n_norm;
        let c = n / self.n_norm;
        (c / self.n_lat, c % self.n_lat, k)
    }

    pub fn coords(&self, n: usize) -> [f64; 3] {
        let (i, j, k) = self.ijk(n);
        [i as f64 * self.h_lat, j as f64 * self.h_lat, k as f64 * self.h_norm]
    }

    #[inline]
    pub fn is_face_node(&self, n: usize) -> bool {
        let k = n % self.n_norm;
        k == 0 || k == self.n_norm - 1
    }

    pub fn face_k(&self, face: Face) -> usize {
        match face {
            Face::F0 => 0,
            Face::F1 => self.n_norm - 1,
        }
    }

    /// Node index `steps` nodes inward from the face node above lateral node `(i, j)`.
    #[inline]
    pub fn inward_node(&self, face: Face, i: usize, j: usize, steps: usize) -> usize {
        match face {
            Face::F0 => self.node(i, j, steps),
            Face::F1 => self.node(i, j, self.n_norm - 1 - steps),
        }
    }

    #[inline]
    pub fn metric(&self, n: usize) -> &Mat3 {
        &self.g[n]
    }

    #[inline]
    pub fn inv_metric(&self, n: usize) -> &Mat3 {
        &self.ginv[n]
    }

    #[inline]
    pub fn a(&self, n: usize) -> f64 {
        self.a[n]
    }

    #[inline]
    pub fn weight(&self, n: usize) -> f64 {
        self.w[n]
    }

    /// Quadrature weight times volume factor.
    #[inline]
    pub fn wa(&self, n: usize) -> f64 {
        self.wa[n]
    }

    pub fn is_flat(&self) -> bool {
        self.spec.family == MetricFamily::Flat
    }

    /// `Σ w a`, the discrete volume.
    pub fn volume(&self) -> f64 {
        self.wa.iter().sum()
    }

    /// Mean-curvature function `τ` on a face (as cached at build time).
    pub fn tau(&self, face: Face) -> BoundaryField {
        let values = self.tau[face_slot(face)].iter().map(|t| self.tau_sign * t).collect();
        BoundaryField { face, n_lat: self.n_lat, dim: 1, values }
    }

    #[inline]
    pub fn tau_at(&self, face: Face, i: usize, j: usize) -> f64 {
        self.tau_sign * self.tau[face_slot(face)][i * self.n_lat + j]
    }

    /// `H = τ / 2`.
    pub fn mean_curvature(&self, face: Face) -> BoundaryField {
        let mut t = self.tau(face);
        t.values.iter_mut().for_each(|v| *v *= 0.5);
        t
    }

    /// `τ` by an explicit evaluation path (ignores the debug sign flip).
    pub fn tau_with(&self, face: Face, method: TauMethod) -> BoundaryField {
        let mut out = BoundaryField::zeros(face, self.n_lat, 1);
        let s = face.inward_sign();
        for i in 0..self.n_lat {
            for j in 0..self.n_lat {
                let n = self.inward_node(face, i, j, 0);
                let x = self.coords(n);
                let v = match method {
                    TauMethod::Analytic | TauMethod::LateralDeterminant => {
                        let dg = self.metric_normal_derivative(x);
                        let g = &self.g[n];
                        if method == TauMethod::Analytic {
                            let gi = &self.ginv[n];
                            let mut tr = 0.0;
                            for p in 0..3 {
                                for q in 0..3 {
                                    tr += gi[p][q] * dg[q][p];
                                }
                            }
                            s * 0.5 * tr
                        } else {
                            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
                            let ddet = dg[0][0] * g[1][1] + g[0][0] * dg[1][1] - dg[0][1] * g[1][0] - g[0][1] * dg[1][0];
                            s * ddet / (2.0 * det)
                        }
                    }
                    TauMethod::FiniteDifference => {
                        let a0 = self.a[n];
                        let a1 = self.a[self.inward_node(face, i, j, 1)];
                        let a2 = self.a[self.inward_node(face, i, j, 2)];
                        one_sided(a0, a1, a2, self.h_norm) / a0
                    }
                };
                out.values[i * self.n_lat + j] = v;
            }
        }
        out
    }

    fn metric_normal_derivative(&self, x: [f64; 3]) -> Mat3 {
        if let Some(d) = self.spec.eval_normal_derivative(x) {
            return d;
        }
        // fourth-order central difference of the callback, one-sided near faces
        let e = 1e-4;
        let f = |t: f64| self.spec.eval([x[0], x[1], t]);
        let mut out = [[0.0; 3]; 3];
        let (s0, s1, s2, s3, s4) = (f(x[2]), f(x[2] + e), f(x[2] + 2.0 * e), f(x[2] - e), f(x[2] - 2.0 * e));
        for p in 0..3 {
            for q in 0..3 {
                out[p][q] = if x[2] < 2.0 * e {
                    (-3.0 * s0[p][q] + 4.0 * s1[p][q] - s2[p][q]) / (2.0 * e)
                } else if x[2] > 1.0 - 2.0 * e {
                    (3.0 * s0[p][q] - 4.0 * s3[p][q] + s4[p][q]) / (2.0 * e)
                } else {
                    (8.0 * (s1[p][q] - s3[p][q]) - (s2[p][q] - s4[p][q])) / (12.0 * e)
                };
            }
        }
        out
    }

    /// Face values of a node field with `dim` values per node.
    pub fn restrict(&self, u: &[f64], dim: usize, face: Face) -> BoundaryField {
        let mut out = BoundaryField::zeros(face, self.n_lat, dim);
        for i in 0..self.n_lat {
            for j in 0..self.n_lat {
                let n = self.inward_node(face, i, j, 0);
                let dst = (i * self.n_lat + j) * dim;
                out.values[dst..dst + dim].copy_from_slice(&u[n * dim..n * dim + dim]);
            }
        }
        out
    }

    /// Derivative along the inward normal at face nodes.
    ///
    /// Uses the nodes `2..=7` steps inward. The face value and the first
    /// inward node are skipped: the boundary rows of the difference operator
    /// make a discrete Laplacian inaccurate there. Solutions of the wide
    /// Laplacian carry a small odd/even split near the faces, so the weights
    /// are exact for cubics and annihilate `(−1)^k (c₀ + c₁k)`.
    pub fn normal_derivative(&self, u: &[f64], dim: usize, face: Face) -> BoundaryField {
        self.apply_normal_stencil(u, dim, face, &NORMAL_STENCIL, 48.0)
    }

    fn apply_normal_stencil(&self, u: &[f64], dim: usize, face: Face, w: &[f64; 6], scale: f64) -> BoundaryField {
        let mut out = BoundaryField::zeros(face, self.n_lat, dim);
        let c = 1.0 / (scale * self.h_norm);
        for i in 0..self.n_lat {
            for j in 0..self.n_lat {
                let n: [usize; 6] = [2, 3, 4, 5, 6, 7].map(|s| self.inward_node(face, i, j, s));
                let dst = (i * self.n_lat + j) * dim;
                for d in 0..dim {
                    let mut s = 0.0;
                    for (m, w) in w.iter().enumerate() {
                        s += w * u[n[m] * dim + d];
                    }
                    out.values[dst + d] = c * s;
                }
            }
        }
        out
    }
}

/// One-sided first derivative from inward nodes 2..7, scaled by 48.
const NORMAL_STENCIL: [f64; 6] = [-145.0, 79.0, 278.0, -170.0, -133.0, 91.0];

fn one_sided(a0: f64, a1: f64, a2: f64, h: f64) -> f64 {
    (-3.0 * a0 + 4.0 * a1 - a2) / (2.0 * h)
}

fn face_slot(face: Face) -> usize {
    match face {
        Face::F0 => 0,
        Face::F1 => 1,
    }
}

fn check_metric(m: &Mat3, x: [f64; 3]) -> Result<()> {
    for p in 0..3 {
        for q in 0..3 {
            if (m[p][q] - m[q][p]).abs() > ADAPT_TOL {
                return Err(Error::Geometry(format!("metric not symmetric at {x:?}")));
            }
        }
    }
    if m[0][2].abs() > ADAPT_TOL || m[1][2].abs() > ADAPT_TOL || (m[2][2] - 1.0).abs() > ADAPT_TOL {
        return Err(Error::Geometry(format!("metric not normal-adapted at {x:?}")));
    }
    if !(m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[0][1] > 0.0) {
        return Err(Error::Geometry(format!("metric not positive-definite at {x:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sheared() -> MetricSpec {
        use std::f64::consts::PI;
        let m: MetricFn = Arc::new(|x| {
            let g11 = 1.0 + 0.3 * x[2] + 0.1 * (2.0 * PI * x[0]).sin();
            let g22 = 1.2 + 0.2 * x[2] * x[2];
            let g12 = 0.15 * x[2] * (2.0 * PI * x[1]).cos();
            [[g11, g12, 0.0], [g12, g22, 0.0], [0.0, 0.0, 1.0]]
        });
        MetricSpec::custom("sheared", m, None)
    }

    #[test]
    fn flat_grid_is_identity() {
        let g = DomainGrid::build(MetricSpec::flat(), 16, 17).unwrap();
        for n in 0..g.nodes() {
            assert_eq!(g.a(n), 1.0);
            assert_eq!(*g.inv_metric(n), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        }
        assert!((g.volume() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn warped_volume_factor() {
        let g = DomainGrid::build(MetricSpec::warped_linear(), 16, 17).unwrap();
        for n in 0..g.nodes() {
            let x = g.coords(n);
            assert!((g.a(n) - (2.0 * x[2]).exp()).abs() < 1e-12 * g.a(n));
            let gi = g.inv_metric(n);
            let m = g.metric(n);
            for p in 0..3 {
                for q in 0..3 {
                    let s: f64 = (0..3).map(|r| gi[p][r] * m[r][q]).sum();
                    assert!((s - if p == q { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn volume_converges_second_order() {
        let exact = ((2.0f64).exp() - 1.0) / 2.0;
        let e: Vec<f64> = [9, 17, 33]
            .iter()
            .map(|&nn| (DomainGrid::build(MetricSpec::warped_linear(), 8, nn).unwrap().volume() - exact).abs())
            .collect();
        assert!((e[0] / e[1]).log2() > 1.9 && (e[1] / e[2]).log2() > 1.9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(DomainGrid::build(MetricSpec::flat(), 4, 3), Err(Error::Resolution(_))));
        let tilted: MetricFn = Arc::new(|_| [[1.0, 0.0, 0.1], [0.0, 1.0, 0.0], [0.1, 0.0, 1.0]]);
        assert!(matches!(
            DomainGrid::build(MetricSpec::custom("tilted", tilted, None), 8, 9),
            Err(Error::Geometry(_))
        ));
        let neg: MetricFn = Arc::new(|_| [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(DomainGrid::build(MetricSpec::custom("neg", neg, None), 8, 9), Err(Error::Geometry(_))));
    }

    #[test]
    fn tau_examples() {
        let flat = DomainGrid::build(MetricSpec::flat(), 8, 9).unwrap();
        assert!(flat.tau(Face::F0).sup_norm() == 0.0 && flat.tau(Face::F1).sup_norm() == 0.0);
        let g = DomainGrid::build(MetricSpec::warped_linear(), 16, 17).unwrap();
        assert!(g.tau(Face::F0).values.iter().all(|t| (t - 2.0).abs() < 1e-12));
        assert!(g.tau(Face::F1).values.iter().all(|t| (t + 2.0).abs() < 1e-12));
        assert!(g.mean_curvature(Face::F0).values.iter().all(|t| (t - 1.0).abs() < 1e-12));
        let flipped = DomainGrid::build_with(MetricSpec::warped_linear(), 8, 9, true).unwrap();
        assert!((flipped.tau_at(Face::F0, 0, 0) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn tau_paths_agree() {
        for spec in [MetricSpec::warped(vec![0.0, 0.7, -0.4]), sheared()] {
            let g = DomainGrid::build(spec, 8, 9).unwrap();
            for face in Face::BOTH {
                let a = g.tau_with(face, TauMethod::Analytic);
                let b = g.tau_with(face, TauMethod::LateralDeterminant);
                assert!(a.sub(&b).unwrap().sup_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tau_finite_difference_second_order() {
        let spec = MetricSpec::warped(vec![0.0, 0.7, -0.4, 0.3]);
        let err: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&nn| {
                let g = DomainGrid::build(spec.clone(), 8, nn).unwrap();
                Face::BOTH
                    .iter()
                    .map(|&f| {
                        g.tau_with(f, TauMethod::FiniteDifference).sub(&g.tau_with(f, TauMethod::Analytic)).unwrap().sup_norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in err.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{err:?}");
        }
    }

    #[test]
    fn restriction_and_normal_derivative() {
        use std::f64::consts::PI;
        let g = DomainGrid::build(MetricSpec::flat(), 8, 33).unwrap();
        let lin: Vec<f64> = (0..g.nodes()).map(|n| g.coords(n)[2]).collect();
        assert!(g.restrict(&lin, 1, Face::F0).sup_norm() == 0.0);
        assert!(g.normal_derivative(&lin, 1, Face::F0).values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let c = vec![2.5; g.nodes()];
        assert!(g.restrict(&c, 1, Face::F1).values.iter().all(|v| *v == 2.5));
        assert!(g.normal_derivative(&c, 1, Face::F1).sup_norm() < 1e-12);
        let s: Vec<f64> = (0..g.nodes()).map(|n| (PI * g.coords(n)[2]).sin()).collect();
        let d = g.normal_derivative(&s, 1, Face::F1);
        let h = g.h_norm;
        assert!(d.values.iter().all(|v| (v - PI).abs() < 5.0 * h * h * PI.powi(3)));
    }
}
