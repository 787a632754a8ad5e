//! Green operator of the covariant Laplacian on conductor 0-forms.
//!
//! `Δ_A` restricted to interior nodes is self-adjoint for the weights `w·a`,
//! so CG runs on the symmetric system `(w a Δ_A) u = w a f`, matrix-free,
//! with a Jacobi preconditioner taken from the flat part of the operator.

use crate::error::{Error, Result};
use crate::forms::{self, FormField};
use crate::geometry::{BoundaryField, DomainGrid, Face};
use crate::lie::Algebra;
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub tolerance: f64,
    pub breakdown: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    /// `None` means `20·√(unknowns)`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: DEFAULT_TOL, max_iterations: None }
    }
}

/// A connection `∇₀ + η` with `η` a conductor 1-form, plus solver settings.
#[derive(Clone, Debug)]
pub struct ConnectionState {
    grid: Arc<DomainGrid>,
    alg: Arc<Algebra>,
    eta: Option<FormField>,
    pub config: SolverConfig,
    diag: Arc<Vec<f64>>,
}

impl ConnectionState {
    pub fn flat(grid: &Arc<DomainGrid>, alg: &Arc<Algebra>) -> ConnectionState {
        ConnectionState {
            grid: grid.clone(),
            alg: alg.clone(),
            eta: None,
            config: SolverConfig::default(),
            diag: Arc::new(jacobi_diagonal(grid)),
        }
    }

    /// Connection with form `η`; `η` must satisfy the conductor condition.
    pub fn new(eta: FormField) -> Result<ConnectionState> {
        if eta.degree() != 1 {
            return Err(Error::Degree(eta.degree()));
        }
        let defect = eta.conductor_defect();
        if defect > 1e-12 {
            return Err(Error::Validation(format!("connection form is not conductor (trace {defect:.2e})")));
        }
        let mut c = ConnectionState::flat(eta.grid(), eta.algebra());
        c.eta = Some(eta);
        Ok(c)
    }

    pub fn with_tolerance(mut self, tol: f64) -> ConnectionState {
        self.config.tolerance = tol;
        self
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.alg
    }

    pub fn eta(&self) -> Option<&FormField> {
        self.eta.as_ref()
    }

    /// `η` as a field (zero for the flat connection).
    pub fn eta_field(&self) -> FormField {
        match &self.eta {
            Some(e) => e.clone(),
            None => FormField::zeros(&self.grid, &self.alg, 1).expect("degree 1"),
        }
    }

    pub fn is_flat(&self) -> bool {
        self.eta.is_none()
    }

    pub fn d(&self, u: &FormField) -> Result<FormField> {
        forms::covariant_d(self.eta.as_ref(), u)
    }

    pub fn d_star(&self, v: &FormField) -> Result<FormField> {
        forms::covariant_codiff(self.eta.as_ref(), v)
    }

    pub fn laplacian(&self, f: &FormField) -> Result<FormField> {
        forms::laplacian(self.eta.as_ref(), f)
    }

    /// `G_A f`: the conductor solution of `Δ_A u = f` at interior nodes.
    pub fn green(&self, f: &FormField) -> Result<(FormField, SolveReport)> {
        self.green_from(f, None)
    }

    /// [`ConnectionState::green`] with an initial guess.
    pub fn green_from(&self, f: &FormField, guess: Option<&FormField>) -> Result<(FormField, SolveReport)> {
        if f.degree() != 0 {
            return Err(Error::Degree(f.degree()));
        }
        if !Arc::ptr_eq(f.grid(), &self.grid) || f.dim() != self.alg.dim() {
            return Err(Error::Shape("field and connection live on different grids".into()));
        }
        let g = &self.grid;
        let dim = self.alg.dim();
        let nn = g.nodes();
        let mut b = f.clone();
        zero_faces_scaled(g, dim, b.data_mut(), true);
        let unknowns = (nn - 2 * g.n_lat * g.n_lat) * dim;
        let max_it = self.config.max_iterations.unwrap_or((20.0 * (unknowns as f64).sqrt()).ceil() as usize);
        let tol = self.config.tolerance;

        let wnorm = |r: &[f64]| -> f64 {
            let mut s = 0.0;
            for n in 0..nn {
                let wa = g.wa(n);
                for a in 0..dim {
                    let v = r[n * dim + a];
                    s += v * v / wa;
                }
            }
            s.sqrt()
        };
        let bnorm = wnorm(b.data());
        let mut x = match guess {
            Some(x0) => forms::conductor_project(x0),
            None => FormField::zeros(g, &self.alg, 0)?,
        };
        if bnorm == 0.0 {
            return Ok((
                FormField::zeros(g, &self.alg, 0)?,
                SolveReport { iterations: 0, final_residual: 0.0, tolerance: tol, breakdown: false },
            ));
        }
        let mut r = b.clone();
        if guess.is_some() {
            let ax = self.apply(&x)?;
            r.axpy(-1.0, &ax)?;
        }
        let mut res = wnorm(r.data()) / bnorm;
        let mut z = r.clone();
        self.precondition(z.data_mut());
        let mut p = z.clone();
        let mut rz = dot(r.data(), z.data());
        let mut it = 0;
        while res > tol && it < max_it {
            let ap = self.apply(&p)?;
            let pap = dot(p.data(), ap.data());
            if pap <= 0.0 || !pap.is_finite() {
                let rep = SolveReport { iterations: it, final_residual: res, tolerance: tol, breakdown: true };
                return Err(Error::Solver(rep));
            }
            let alpha = rz / pap;
            x.axpy(alpha, &p)?;
            r.axpy(-alpha, &ap)?;
            it += 1;
            res = wnorm(r.data()) / bnorm;
            if res <= tol {
                break;
            }
            z.data_mut().copy_from_slice(r.data());
            self.precondition(z.data_mut());
            let rz_new = dot(r.data(), z.data());
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.data_mut().iter_mut().zip(z.data()) {
                *pi = zi + beta * *pi;
            }
        }
        let rep = SolveReport { iterations: it, final_residual: res, tolerance: tol, breakdown: false };
        if res > tol {
            return Err(Error::Solver(rep));
        }
        Ok((x, rep))
    }

    /// `w a Δ_A x` at interior nodes, zero on faces.
    fn apply(&self, x: &FormField) -> Result<FormField> {
        let mut y = self.laplacian(x)?;
        zero_faces_scaled(&self.grid, self.alg.dim(), y.data_mut(), true);
        Ok(y)
    }

    fn precondition(&self, r: &mut [f64]) {
        let dim = self.alg.dim();
        for (n, d) in self.diag.iter().enumerate() {
            let s = if *d > 0.0 { 1.0 / d } else { 0.0 };
            r[n * dim..n * dim + dim].iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Largest `|⟨Δ_A u, v⟩ − ⟨u, Δ_A v⟩| / (‖Δ_A u‖‖v‖)` over random conductor probes.
    pub fn symmetry_defect<R: Rng>(&self, rng: &mut R, probes: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let u = FormField::random_smooth(&self.grid, &self.alg, 0, rng, true)?;
            let v = FormField::random_smooth(&self.grid, &self.alg, 0, rng, true)?;
            let (lu, lv) = (self.laplacian(&u)?, self.laplacian(&v)?);
            let d = (lu.inner(&v)? - u.inner(&lv)?).abs() / (lu.norm() * v.norm());
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Sharp Poincaré constant `1/√λ_min(Δ_A)` by inverse power iteration.
    pub fn poincare_sharp<R: Rng>(&self, rng: &mut R, iterations: usize) -> Result<f64> {
        let mut x = FormField::random_smooth(&self.grid, &self.alg, 0, rng, true)?;
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let nrm = x.norm();
            x = x.scale(1.0 / nrm);
            let (y, _) = self.green(&x)?;
            lambda = x.inner(&x)? / x.inner(&y)?;
            x = y;
        }
        let nrm = x.norm();
        x = x.scale(1.0 / nrm);
        let rq = x.inner(&self.laplacian(&x)?)?;
        if rq > 0.0 {
            lambda = rq;
        }
        Ok(1.0 / lambda.sqrt())
    }

    /// Largest `‖f‖ / ‖d_A f‖` over random smooth conductor 0-forms.
    pub fn poincare_estimate<R: Rng>(&self, rng: &mut R, samples: usize) -> Result<f64> {
        if samples == 0 {
            return Err(Error::Validation("need at least one sample".into()));
        }
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let f = FormField::random_smooth(&self.grid, &self.alg, 0, rng, true)?;
            best = best.max(f.norm() / self.d(&f)?.norm());
        }
        Ok(best)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zeroes face values and, with `scale`, multiplies interior values by `w a`.
fn zero_faces_scaled(g: &DomainGrid, dim: usize, u: &mut [f64], scale: bool) {
    for n in 0..g.nodes() {
        let s = if g.is_face_node(n) {
            0.0
        } else if scale {
            g.wa(n)
        } else {
            1.0
        };
        u[n * dim..n * dim + dim].iter_mut().for_each(|v| *v *= s);
    }
}

/// Diagonal of `Σ_i D_iᵀ (w a gⁱⁱ) D_i` at interior nodes.
fn jacobi_diagonal(g: &DomainGrid) -> Vec<f64> {
    let (nl, nz) = (g.n_lat, g.n_norm);
    let c = |n: usize, i: usize| g.wa(n) * g.inv_metric(n)[i][i];
    let hl2 = 4.0 * g.h_lat * g.h_lat;
    let h = g.h_norm;
    let mut diag = vec![0.0; g.nodes()];
    for i in 0..nl {
        for j in 0..nl {
            for k in 1..nz - 1 {
                let n = g.node(i, j, k);
                let mut s = (c(g.node((i + 1) % nl, j, k), 0) + c(g.node((i + nl - 1) % nl, j, k), 0)) / hl2;
                s += (c(g.node(i, (j + 1) % nl, k), 1) + c(g.node(i, (j + nl - 1) % nl, k), 1)) / hl2;
                let lo = if k == 1 { 1.0 / h } else { 0.5 / h };
                let hi = if k + 1 == nz - 1 { 1.0 / h } else { 0.5 / h };
                s += c(g.node(i, j, k - 1), 2) * lo * lo + c(g.node(i, j, k + 1), 2) * hi * hi;
                diag[n] = s;
            }
        }
    }
    diag
}

/// Green operator of the flat scalar Laplacian applied to a real function
/// with `φ ≥ 0`, `φ ≢ 0`.
pub fn scalar_green(grid: &Arc<DomainGrid>, phi: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    if phi.len() != grid.nodes() {
        return Err(Error::Shape(format!("expected {} values, got {}", grid.nodes(), phi.len())));
    }
    if phi.iter().any(|v| *v < 0.0) {
        return Err(Error::Validation("scalar Green operator needs a non-negative source".into()));
    }
    if phi.iter().enumerate().all(|(n, v)| *v == 0.0 || grid.is_face_node(n)) {
        return Err(Error::Validation("source vanishes identically".into()));
    }
    let line = Algebra::real_line();
    let f = FormField::from_data(grid, &line, 0, phi.to_vec())?;
    let (u, rep) = ConnectionState::flat(grid, &line).green(&f)?;
    Ok((u.into_data(), rep))
}

/// Inward normal derivative of `Gφ` on a face; every value must exceed `margin`.
pub fn hopf_normal_derivative(grid: &DomainGrid, gphi: &[f64], face: Face, margin: f64) -> Result<BoundaryField> {
    let d = grid.normal_derivative(gphi, 1, face);
    let m = d.min();
    if m <= margin {
        return Err(Error::Degeneracy(format!("normal derivative on {} has minimum {m:.3e}", face.label())));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::conductor_project;
    use crate::geometry::MetricSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small_eta(g: &Arc<DomainGrid>, alg: &Arc<Algebra>, amp: f64) -> FormField {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let e = FormField::random_smooth(g, alg, 1, &mut rng, true).unwrap();
        conductor_project(&e).scale(amp)
    }

    #[test]
    fn analytic_eigenfunction_solve() {
        let alg = Algebra::su2();
        let mut errs = Vec::new();
        for (nl, nn) in [(8, 17), (8, 33)] {
            let g = DomainGrid::build(MetricSpec::flat(), nl, nn).unwrap();
            let a = ConnectionState::flat(&g, &alg);
            let f = FormField::scalar_times(&g, &alg, &[1.0, 0.0, 0.0], |x| PI * PI * (PI * x[2]).sin());
            let (u, rep) = a.green(&f).unwrap();
            assert!(rep.final_residual <= 1e-10);
            let want = f.scale(1.0 / (PI * PI));
            let e = u.sub(&want).unwrap().sup_norm();
            assert!(e <= 5.0 * g.h_norm * g.h_norm, "{e}");
            errs.push(e);
        }
        assert!((errs[0] / errs[1]).log2() >= 1.9);
    }

    #[test]
    fn zero_source_gives_zero() {
        let alg = Algebra::su2();
        let g = DomainGrid::build(MetricSpec::flat(), 8, 9).unwrap();
        let (u, rep) = ConnectionState::flat(&g, &alg).green(&FormField::zeros(&g, &alg, 0).unwrap()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(u.sup_norm(), 0.0);
    }

    #[test]
    fn round_trip_and_self_adjoint() {
        let alg = Algebra::su2();
        let g = DomainGrid::build(MetricSpec::warped_linear(), 8, 13).unwrap();
        let a = ConnectionState::new(small_eta(&g, &alg, 0.3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut fs = Vec::new();
        for _ in 0..3 {
            let data = (0..g.nodes() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = conductor_project(&FormField::from_data(&g, &alg, 0, data).unwrap());
            let (u, _) = a.green(&f).unwrap();
            let back = conductor_project(&a.laplacian(&u).unwrap());
            assert!(back.sub(&f).unwrap().norm() <= 1e-9 * f.norm());
            assert!(u.conductor_defect() == 0.0);
            fs.push((f, u));
        }
        let (f, gf) = &fs[0];
        let (h, gh) = &fs[1];
        assert!((gf.inner(h).unwrap() - f.inner(gh).unwrap()).abs() <= 1e-9 * f.norm() * h.norm());
        assert!(a.symmetry_defect(&mut rng, 3).unwrap() < 1e-10);
    }

    #[test]
    fn energy_identity() {
        let alg = Algebra::su2();
        let g = DomainGrid::build(MetricSpec::warped_linear(), 8, 11).unwrap();
        let a = ConnectionState::new(small_eta(&g, &alg, 0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = FormField::random_smooth(&g, &alg, 0, &mut rng, true).unwrap();
        let lhs = f.inner(&a.laplacian(&f).unwrap()).unwrap();
        let rhs = a.d(&f).unwrap().norm().powi(2);
        assert!((lhs - rhs).abs() <= 1e-11 * rhs);
    }

    #[test]
    fn non_conductor_connection_rejected() {
        let alg = Algebra::su2();
        let g = DomainGrid::build(MetricSpec::flat(), 8, 9).unwrap();
        let e = FormField::from_fn(&g, &alg, 1, |_, c, o| if c == 0 { o[0] = 1.0 }).unwrap();
        assert!(matches!(ConnectionState::new(e), Err(Error::Validation(_))));
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let alg = Algebra::su2();
        let g = DomainGrid::build(MetricSpec::flat(), 8, 17).unwrap();
        let mut a = ConnectionState::flat(&g, &alg);
        a.config.max_iterations = Some(2);
        let f = FormField::scalar_times(&g, &alg, &[1.0, 0.0, 0.0], |x| x[0] * (PI * x[2]).sin());
        match a.green(&f) {
            Err(Error::Solver(rep)) => assert_eq!(rep.iterations, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn poincare_constant() {
        let alg = Algebra::su2();
        let g = DomainGrid::build(MetricSpec::flat(), 8, 33).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let flat = ConnectionState::flat(&g, &alg);
        let c = flat.poincare_sharp(&mut rng, 30).unwrap();
        assert!((c * PI - 1.0).abs() < 0.02, "{c}");
        let est = flat.poincare_estimate(&mut rng, 20).unwrap();
        assert!(est <= c * (1.0 + 1e-9));
        let bent = ConnectionState::new(small_eta(&g, &alg, 0.05)).unwrap();
        let cb = bent.poincare_sharp(&mut rng, 30).unwrap();
        assert!(cb.is_finite() && (cb / c - 1.0).abs() < 0.1);
    }

    #[test]
    fn scalar_green_positive_and_hopf() {
        let g = DomainGrid::build(MetricSpec::flat(), 8, 33).unwrap();
        let bump: Vec<f64> = (0..g.nodes())
            .map(|n| {
                let z = g.coords(n)[2];
                let t = (z - 0.5) / 0.25;
                if t.abs() < 1.0 {
                    (1.0 - t * t).powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        let (u, _) = scalar_green(&g, &bump).unwrap();
        assert!((0..g.nodes()).filter(|n| !g.is_face_node(*n)).all(|n| u[n] > 0.0));
        assert!(matches!(scalar_green(&g, &vec![0.0; g.nodes()]), Err(Error::Validation(_))));
        let neg: Vec<f64> = bump.iter().map(|v| -v).collect();
        assert!(matches!(scalar_green(&g, &neg), Err(Error::Validation(_))));

        let src: Vec<f64> = (0..g.nodes()).map(|n| PI * PI * (PI * g.coords(n)[2]).sin()).collect();
        let (s, _) = scalar_green(&g, &src).unwrap();
        for face in Face::BOTH {
            let d = hopf_normal_derivative(&g, &s, face, 0.0).unwrap();
            assert!(d.values.iter().all(|v| (v - PI).abs() < 0.05), "{:?}", d.min());
        }
        let tiny: Vec<f64> = s.iter().map(|v| v * 1e-14).collect();
        assert!(matches!(hopf_normal_derivative(&g, &tiny, Face::F0, 1e-12), Err(Error::Degeneracy(_))));
    }
}
