//! Horizontal lifts of loops of connections and the small-loop comparison
//! between holonomy and the Coulomb curvature.

use crate::bundle::{coulomb_curvature, transform_form, GaugeTransform, HorizontalForm};
use crate::error::{Error, Result};
use crate::forms::FormField;
use crate::solver::{ConnectionState, SolveReport};
use rayon::prelude::*;
use serde::Serialize;

/// A closed, piecewise-linear loop `t ↦ η(t)` of conductor connection forms.
#[derive(Clone, Debug)]
pub struct ConnectionLoop {
    times: Vec<f64>,
    samples: Vec<FormField>,
}

pub const MIN_SAMPLES: usize = 8;
pub const CLOSURE_TOL: f64 = 1e-12;

impl ConnectionLoop {
    pub fn new(times: Vec<f64>, samples: Vec<FormField>) -> Result<ConnectionLoop> {
        if times.len() != samples.len() {
            return Err(Error::Shape(format!("{} times for {} samples", times.len(), samples.len())));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(Error::Validation(format!("a loop needs at least {MIN_SAMPLES} samples, got {}", samples.len())));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("loop times must increase from 0 to 1".into()));
        }
        for s in &samples {
            if s.degree() != 1 {
                return Err(Error::Degree(s.degree()));
            }
            samples[0].check_same(s)?;
            let d = s.conductor_defect();
            if d > 1e-12 {
                return Err(Error::Validation(format!("loop sample is not conductor (trace {d:.2e})")));
            }
        }
        let gap = samples.last().unwrap().sub(&samples[0])?.sup_norm();
        if gap > CLOSURE_TOL {
            return Err(Error::Validation(format!("loop is not closed (gap {gap:.2e})")));
        }
        Ok(ConnectionLoop { times, samples })
    }

    /// Constant loop at `eta`.
    pub fn constant(eta: &FormField, samples: usize) -> Result<ConnectionLoop> {
        let times = (0..samples).map(|k| k as f64 / (samples - 1) as f64).collect();
        ConnectionLoop::new(times, vec![eta.clone(); samples])
    }

    /// Polygon through `corners` (closed back to the first), each side split
    /// into `per_side` segments of equal parameter length.
    pub fn polygon(corners: &[FormField], per_side: usize) -> Result<ConnectionLoop> {
        if corners.is_empty() || per_side == 0 {
            return Err(Error::Validation("polygon needs corners and at least one segment per side".into()));
        }
        let m = corners.len() * per_side;
        let mut times = Vec::with_capacity(m + 1);
        let mut samples = Vec::with_capacity(m + 1);
        for (c, a) in corners.iter().enumerate() {
            let b = &corners[(c + 1) % corners.len()];
            for s in 0..per_side {
                let u = s as f64 / per_side as f64;
                let mut p = a.scale(1.0 - u);
                p.axpy(u, b)?;
                times.push((c * per_side + s) as f64 / m as f64);
                samples.push(p);
            }
        }
        times.push(1.0);
        samples.push(corners[0].clone());
        ConnectionLoop::new(times, samples)
    }

    /// Square `η₀ + ε(sα + uβ)`, `(s, u)` running `(0,0) → (1,0) → (1,1) → (0,1)`.
    pub fn square(eta0: &FormField, alpha: &FormField, beta: &FormField, eps: f64, per_side: usize) -> Result<ConnectionLoop> {
        let at = |s: f64, u: f64| -> Result<FormField> {
            let mut p = eta0.clone();
            p.axpy(eps * s, alpha)?;
            p.axpy(eps * u, beta)?;
            Ok(p)
        };
        ConnectionLoop::polygon(&[at(0.0, 0.0)?, at(1.0, 0.0)?, at(1.0, 1.0)?, at(0.0, 1.0)?], per_side)
    }

    /// Out along `η₀ + sεα` and back.
    pub fn retrace(eta0: &FormField, alpha: &FormField, eps: f64, per_side: usize) -> Result<ConnectionLoop> {
        let mut far = eta0.clone();
        far.axpy(eps, alpha)?;
        ConnectionLoop::polygon(&[eta0.clone(), far], per_side)
    }

    /// The same loop traversed backwards.
    pub fn reversed(&self) -> ConnectionLoop {
        let times = self.times.iter().rev().map(|t| 1.0 - t).collect();
        let samples = self.samples.iter().rev().cloned().collect();
        ConnectionLoop { times, samples }
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[FormField] {
        &self.samples
    }

    /// `η(t)` on segment `seg`.
    fn value(&self, seg: usize, t: f64) -> Result<FormField> {
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        let u = (t - t0) / (t1 - t0);
        let mut p = self.samples[seg].scale(1.0 - u);
        p.axpy(u, &self.samples[seg + 1])?;
        Ok(p)
    }

    /// `η′` on segment `seg`.
    fn tangent(&self, seg: usize) -> Result<FormField> {
        let dt = self.times[seg + 1] - self.times[seg];
        Ok(self.samples[seg + 1].sub(&self.samples[seg])?.scale(1.0 / dt))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LiftConfig {
    pub steps: usize,
    pub cg_tolerance: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig { steps: 64, cg_tolerance: 1e-11 }
    }
}

pub const INTEGRATOR: &str = "rkmk4";

#[derive(Clone, Debug)]
pub struct HolonomyResult {
    pub g_end: GaugeTransform,
    /// `‖G_Ã d*_Ã(Ã_{n+1} − Ã_n)‖ / Δt` per step, with `Ã` taken at the step start.
    pub vertical_residuals: Vec<f64>,
    pub steps: usize,
    pub integrator: &'static str,
    pub solves: Vec<SolveReport>,
}

/// `Ad(g⁻¹) ω` nodewise.
pub fn adjoint_inverse(g: &GaugeTransform, w: &FormField) -> Result<FormField> {
    let alg = g.algebra();
    let dim = alg.dim();
    let mut out = w.clone();
    let mut tmp = vec![0.0; dim];
    for n in 0..g.grid().nodes() {
        let m = g.mat(n).adjoint();
        let ad = alg.ad_matrix(&m);
        for c in 0..w.ncomp() {
            let x = w.at(c, n);
            if x.iter().all(|v| *v == 0.0) {
                continue;
            }
            for a in 0..dim {
                tmp[a] = (0..dim).map(|b| ad[a * dim + b] * x[b]).sum();
            }
            out.at_mut(c, n).copy_from_slice(&tmp);
        }
    }
    Ok(out)
}

/// Right-trivialized velocity `γ = g⁻¹g′ = −G_Ã d*_Ã(Ad(g⁻¹)η′)`.
fn velocity(g: &GaugeTransform, eta: &FormField, deta: &FormField, tol: f64) -> Result<(FormField, SolveReport)> {
    let a = ConnectionState::new(transform_form(g, eta)?)?.with_tolerance(tol);
    let r = a.d_star(&adjoint_inverse(g, deta)?)?;
    let (x, rep) = a.green(&r)?;
    Ok((x.scale(-1.0), rep))
}

/// `dexp⁻¹_{−Θ}(k)` truncated after the second-order term (the right-trivialized
/// form: `g = g₀ exp Θ`, `g′ = gγ` gives `Θ′ = dexp⁻¹_{−Θ} γ`).
fn dexpinv(theta: &FormField, k: &FormField) -> Result<FormField> {
    let alg = theta.algebra();
    let dim = alg.dim();
    let mut out = k.clone();
    let mut b1 = vec![0.0; dim];
    let mut b2 = vec![0.0; dim];
    for n in 0..theta.grid().nodes() {
        let t = theta.at(0, n);
        if t.iter().all(|v| *v == 0.0) {
            continue;
        }
        alg.bracket_into(t, k.at(0, n), &mut b1);
        alg.bracket_into(t, &b1, &mut b2);
        for (a, o) in out.at_mut(0, n).iter_mut().enumerate() {
            *o += 0.5 * b1[a] + b2[a] / 12.0;
        }
    }
    Ok(out)
}

fn exp_right(g: &GaugeTransform, x: &FormField) -> Result<GaugeTransform> {
    g.mul(&GaugeTransform::exp(x)?)
}

/// Integrates `g′ = gγ` along the loop with a fourth-order Munthe-Kaas
/// Runge–Kutta scheme; `g_end` is the holonomy.
pub fn horizontal_lift(lp: &ConnectionLoop, cfg: &LiftConfig) -> Result<HolonomyResult> {
    let segs = lp.segments();
    if cfg.steps == 0 || cfg.steps % segs != 0 {
        return Err(Error::Validation(format!("{} steps do not align with {segs} loop segments", cfg.steps)));
    }
    let per = cfg.steps / segs;
    let eta0 = &lp.samples[0];
    let mut g = GaugeTransform::identity(eta0.grid(), eta0.algebra());
    let mut residuals = Vec::with_capacity(cfg.steps);
    let mut solves = Vec::with_capacity(4 * cfg.steps);
    let tol = cfg.cg_tolerance;
    for seg in 0..segs {
        let deta = lp.tangent(seg)?;
        let (t0, t1) = (lp.times[seg], lp.times[seg + 1]);
        let h = (t1 - t0) / per as f64;
        for s in 0..per {
            let step = seg * per + s;
            let lift = |e: Error| Error::Lift { step, source: Box::new(e) };
            let t = t0 + s as f64 * h;
            let eta_a = lp.value(seg, t).map_err(lift)?;
            let eta_m = lp.value(seg, t + 0.5 * h).map_err(lift)?;
            let eta_b = lp.value(seg, t + h).map_err(lift)?;
            let mut run = || -> Result<GaugeTransform> {
                let (k1, r1) = velocity(&g, &eta_a, &deta, tol)?;
                let th2 = k1.scale(0.5 * h);
                let (f2, r2) = velocity(&exp_right(&g, &th2)?, &eta_m, &deta, tol)?;
                let k2 = dexpinv(&th2, &f2)?;
                let th3 = k2.scale(0.5 * h);
                let (f3, r3) = velocity(&exp_right(&g, &th3)?, &eta_m, &deta, tol)?;
                let k3 = dexpinv(&th3, &f3)?;
                let th4 = k3.scale(h);
                let (f4, r4) = velocity(&exp_right(&g, &th4)?, &eta_b, &deta, tol)?;
                let k4 = dexpinv(&th4, &f4)?;
                let mut theta = k1.scale(h / 6.0);
                theta.axpy(h / 3.0, &k2)?;
                theta.axpy(h / 3.0, &k3)?;
                theta.axpy(h / 6.0, &k4)?;
                solves.extend([r1, r2, r3, r4]);
                exp_right(&g, &theta)
            };
            let next = run().map_err(lift)?;
            residuals.push(vertical_residual(&g, &next, &eta_a, &eta_b, h, tol).map_err(lift)?);
            g = next;
        }
    }
    Ok(HolonomyResult { g_end: g, vertical_residuals: residuals, steps: cfg.steps, integrator: INTEGRATOR, solves })
}

/// Connection-form size of the chord `Ã_{n+1} − Ã_n`, per unit time.
fn vertical_residual(g0: &GaugeTransform, g1: &GaugeTransform, e0: &FormField, e1: &FormField, h: f64, tol: f64) -> Result<f64> {
    let a0 = transform_form(g0, e0)?;
    let a1 = transform_form(g1, e1)?;
    let a = ConnectionState::new(a0.clone())?.with_tolerance(tol);
    let chord = a1.sub(&a0)?;
    let (w, _) = a.green(&a.d_star(&chord)?)?;
    Ok(w.norm() / h)
}

/// One row of a curvature/holonomy comparison.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub eps: f64,
    /// `‖log(g_hol)/ε² − 𝓡_A(α,β)‖ / ‖𝓡_A(α,β)‖` (absolute when `𝓡 = 0`).
    pub coeff_error: f64,
    pub fitted_order: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureStudy {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log(coeff_error)` against `log ε`.
    pub fitted_order: f64,
    pub curvature_norm: f64,
    pub relative: bool,
    pub max_vertical_residual: f64,
}

impl CurvatureStudy {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Least-squares slope of `log y` against `log x` over the positive entries.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Lifts the square of side `ε` spanned by `α, β` at `A` for each `ε` and
/// compares `log(g_hol)/ε²` with `𝓡_A(α,β) = −2G_A[α·β]`.
///
/// The square is traversed `β` first; with the right-trivialized lift this
/// is the orientation for which the holonomy is `exp(+ε²𝓡)`.
pub fn curvature_holonomy_study(
    a: &ConnectionState,
    alpha: &HorizontalForm,
    beta: &HorizontalForm,
    eps_list: &[f64],
    cfg: &LiftConfig,
) -> Result<CurvatureStudy> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Validation("eps values must be positive".into()));
    }
    let curv = coulomb_curvature(a, alpha, beta)?;
    let cn = curv.norm();
    let relative = cn > 0.0;
    let eta0 = a.eta_field();
    let per_side = 2;
    let out: Vec<Result<(f64, f64)>> = eps_list
        .par_iter()
        .map(|&eps| {
            let lp = ConnectionLoop::square(&eta0, beta.form(), alpha.form(), eps, per_side)?;
            let res = horizontal_lift(&lp, cfg)?;
            let coeff = res.g_end.log()?.scale(1.0 / (eps * eps));
            let err = coeff.sub(&curv)?.norm();
            let vmax = res.vertical_residuals.iter().fold(0.0f64, |m, v| m.max(*v));
            Ok((if relative { err / cn } else { err }, vmax))
        })
        .collect();
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    let errs: Vec<f64> = out.iter().map(|p| p.0).collect();
    let fitted = fitted_slope(eps_list, &errs);
    let rows = eps_list
        .iter()
        .zip(&errs)
        .map(|(&eps, &coeff_error)| StudyRow { eps, coeff_error, fitted_order: fitted })
        .collect();
    Ok(CurvatureStudy {
        rows,
        fitted_order: fitted,
        curvature_norm: cn,
        relative,
        max_vertical_residual: out.iter().fold(0.0f64, |m, p| m.max(p.1)),
    })
}
