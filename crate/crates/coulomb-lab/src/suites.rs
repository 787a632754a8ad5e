//! Named verification suites. Each suite is tied to one statement and
//! reports checks with identifiers `<suite>/<invariant>`.
//!
//! `verify` runs at the smallest configured resolution; checks that need a
//! trend refine `N_norm` once (`N → 2N − 1`). `converge` runs the
//! convergence studies over all configured resolutions and skips suites that
//! have none.

use crate::config::RunConfig;
use crate::error::Result;
use crate::holonomy::LiftConfig;
use crate::report::{Check, SuiteReport};
use crate::study::{self, ConvergenceTable, Resolution, Setup, Spacing};
use crate::forms::FormField;
use crate::geometry::DomainGrid;
use crate::lie::Algebra;
use crate::span::decompose_gauge_element;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

pub const SUITES: [&str; 12] = [
    "lemma-stokes",
    "prop-greenexist",
    "prop-spprop",
    "thm-bigpb",
    "prop-lc",
    "lemma-bct",
    "cor-kernel",
    "lemma-noboundary",
    "lemma-lbo",
    "lemma-smooth1",
    "thm-mainthm",
    "cor-holonomy",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Verify,
    Converge,
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub setup: Setup,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig) -> Context<'a> {
        Context { config, setup: Setup { metric: config.metric.spec(), flip_tau: config.debug.flip_tau } }
    }

    fn base(&self) -> Resolution {
        self.config.resolutions()[0]
    }

    /// The smallest resolution and its `N_norm` refinement.
    fn pair(&self) -> Vec<Resolution> {
        let r = self.base();
        vec![r, (r.0, 2 * r.1 - 1)]
    }

    fn ladder(&self, mode: Mode) -> Vec<Resolution> {
        match mode {
            Mode::Verify => self.pair(),
            Mode::Converge => self.config.resolutions(),
        }
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn lift_config(&self) -> LiftConfig {
        LiftConfig { steps: self.config.holonomy.steps, cg_tolerance: self.config.holonomy.cg_tolerance }
    }
}

fn id(suite: &str, what: &str) -> String {
    format!("{suite}/{what}")
}

fn order_check(rep: &mut SuiteReport, what: &str, t: &ConvergenceTable, bound: f64) {
    rep.push(Check::at_least(id(&rep.name.clone(), what), t.fitted_order, bound));
}

pub fn run_suite(name: &str, ctx: &Context, mode: Mode) -> SuiteReport {
    let mut rep = SuiteReport::new(name);
    if let Err(e) = body(name, ctx, mode, &mut rep) {
        rep.fail(&e);
    }
    rep
}

/// Runs the selected suites in the worker pool; results keep suite order.
pub fn run_suites(config: &RunConfig, mode: Mode) -> (Vec<SuiteReport>, BTreeMap<String, f64>) {
    let ctx = Context::new(config);
    let out: Vec<(SuiteReport, f64)> = config
        .selected_suites()
        .par_iter()
        .map(|s| {
            let t = Instant::now();
            let r = run_suite(s, &ctx, mode);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();
    let times = out.iter().map(|(r, t)| (r.name.clone(), *t)).collect();
    (out.into_iter().map(|p| p.0).collect(), times)
}

fn body(name: &str, ctx: &Context, mode: Mode, rep: &mut SuiteReport) -> Result<()> {
    let tol = &ctx.config.tolerances;
    let seed = ctx.seed();
    let base = ctx.base();
    let converge = mode == Mode::Converge;
    match name {
        "lemma-stokes" => {
            if converge {
                rep.skipped = true;
                return Ok(());
            }
            let v = study::stokes_defect(base, 100, seed)?;
            rep.push(Check::at_most(id(name, "adjointness"), v, tol.stokes));
        }
        "prop-greenexist" => {
            if converge {
                let t = study::laplacian_study(&ctx.config.resolutions())?;
                order_check(rep, "order", &t, tol.interior_order);
                rep.tables.push(t);
                return Ok(());
            }
            let g = study::green_random(&ctx.setup, base, 20, seed)?;
            rep.solver.solves += g.solves;
            rep.solver.max_iterations = rep.solver.max_iterations.max(g.max_iterations);
            rep.push(Check::at_most(id(name, "residual"), g.max_relative_residual, tol.green));
            let (e, h) = study::green_analytic(base)?;
            rep.push(Check::at_most(id(name, "analytic"), e, tol.green_analytic_factor * h * h));
        }
        "prop-spprop" => {
            if converge {
                rep.skipped = true;
                return Ok(());
            }
            let c = study::poincare_constant(base, seed)?;
            rep.push(Check::info(id(name, "sharp-constant"), c));
            rep.push(Check::at_most(id(name, "relative-to-inverse-pi"), (c * PI - 1.0).abs(), tol.poincare_relative));
        }
        "thm-bigpb" => {
            if converge {
                rep.skipped = true;
                return Ok(());
            }
            let p = study::projector_trials(&ctx.setup, base, 50, seed)?;
            rep.solver.solves += 150;
            rep.push(Check::at_most(id(name, "idempotence"), p.idempotence, tol.projector));
            rep.push(Check::at_most(id(name, "divergence"), p.divergence, tol.projector));
            rep.push(Check::at_most(id(name, "orthogonality"), p.orthogonality, tol.projector));
        }
        "prop-lc" => {
            if converge {
                rep.skipped = true;
                return Ok(());
            }
            let g = study::gauge_fix_trials(&ctx.setup, base, 20, seed)?;
            rep.push(Check::at_most(id(name, "newton-iterations"), g.max_iterations as f64, tol.gauge_fix_iterations as f64));
            rep.push(Check::at_most(id(name, "residual"), g.max_residual, tol.gauge_fix_residual));
            rep.push(Check::at_most(id(name, "vertical-return"), g.vertical_ratio, tol.vertical));
        }
        "lemma-bct" => {
            let w = ctx.setup.warped();
            let v = study::bct_vanishing(&w, base)?;
            rep.push(Check::at_most(id(name, "vanishing-near-faces"), v, tol.bct_vanishing));
            let t = study::bct_study(&w, &ctx.ladder(mode), seed)?;
            order_check(rep, "order", &t, tol.boundary_order);
            rep.tables.push(t);
        }
        "cor-kernel" => {
            let tables = study::kernel_study(&ctx.setup.warped(), &ctx.ladder(mode), 10, seed)?;
            let worst = tables.iter().map(|t| t.fitted_order).fold(f64::INFINITY, f64::min);
            rep.push(Check::at_least(id(name, "min-order"), worst, tol.boundary_order));
            rep.tables.extend(tables);
        }
        "lemma-noboundary" => {
            let res = if converge { ctx.config.resolutions() } else { vec![base] };
            let mut errs = Vec::new();
            for r in &res {
                let c = study::interior_realization(*r)?;
                let tag = format!("{}x{}", r.0, r.1);
                rep.push(Check::at_most(id(name, &format!("reconstruction-{tag}")), c.error, tol.interior_factor * c.h * c.h));
                rep.push(Check::at_most(id(name, &format!("divergence-{tag}")), c.divergence, tol.divergence));
                errs.push(c.error);
            }
            if converge {
                let t = ConvergenceTable::new("interior-reconstruction", Spacing::Lateral, &res, &errs);
                rep.push(Check::info(id(name, "order"), t.fitted_order));
                rep.tables.push(t);
            }
        }
        "lemma-lbo" => {
            let w = ctx.setup.warped();
            let res = if converge { ctx.config.resolutions() } else { vec![base] };
            let s = study::boundary_realization(&w, &res)?;
            rep.push(Check::at_most(id(name, "cbc-trace"), s.cbc_trace, tol.cbc_trace));
            rep.push(Check::at_most(id(name, "divergence"), s.divergence, tol.divergence));
            rep.push(Check::info(id(name, "compatibility"), s.compatibility));
            if converge {
                order_check(rep, "order", &s.table, tol.boundary_order);
            } else {
                rep.push(Check::info(id(name, "reconstruction"), s.table.rows[0].residual));
            }
            rep.tables.push(s.table);
        }
        "lemma-smooth1" => {
            let s = study::smooth1_study(&ctx.ladder(mode))?;
            order_check(rep, "order", &s.table, tol.boundary_order);
            for (r, e) in s.table.rows.iter().zip(&s.expansion_defect) {
                rep.push(Check::info(id(name, &format!("expansion-defect-{}x{}", r.n_lat, r.n_norm)), *e));
            }
            rep.tables.push(s.table);
        }
        "thm-mainthm" => {
            let pair = ctx.pair();
            let (e, h) = study::pipeline_analytic(pair[1])?;
            rep.push(Check::at_most(id(name, "analytic-boundary-data"), e, tol.green_analytic_factor * h * h));
            if converge {
                let s = study::pipeline_study(&ctx.config.resolutions(), ctx.config.decompose_fields, seed)?;
                let worst = s.tables.iter().map(|t| t.fitted_order).fold(f64::INFINITY, f64::min);
                rep.push(Check::at_least(id(name, "min-order"), worst, tol.boundary_order));
                rep.tables.extend(s.tables);
            } else {
                let g = DomainGrid::build(crate::geometry::MetricSpec::flat(), base.0, base.1)?;
                let zero = decompose_gauge_element(&FormField::zeros(&g, &Algebra::su2(), 0)?)?;
                let terms: usize = zero.layers.iter().map(|l| l.terms.len()).sum();
                rep.push(Check::at_most(id(name, "zero-field-terms"), terms as f64, 0.0));
                let s = study::pipeline_study(&[base], 1, seed)?;
                let r = &s.rows[0];
                rep.push(Check::info(id(name, "total-residual"), r.total_residual));
                rep.push(Check::info(id(name, "kernel-residual"), r.kernel_residual));
            }
        }
        "cor-holonomy" => {
            let h = &ctx.config.holonomy;
            let c = study::holonomy_check((h.grid[0], h.grid[1]), &h.eps, &ctx.lift_config(), seed)?;
            rep.solver.solves += c.solves;
            let last = c.study.rows.last().map(|r| r.coeff_error).unwrap_or(f64::NAN);
            rep.push(Check::at_most(id(name, "coefficient-error"), last, tol.holonomy_coefficient));
            if c.study.rows.len() >= 2 {
                rep.push(Check::at_least(id(name, "eps-order"), c.study.fitted_order, tol.boundary_order));
            }
            rep.push(Check::at_most(id(name, "retrace"), c.retrace, tol.retrace));
            rep.push(Check::at_most(id(name, "conductor"), c.face_defect, 1e-10));
            rep.push(Check::info(id(name, "vertical-residual"), c.study.max_vertical_residual));
            rep.files.push(("holonomy.csv".into(), c.study.to_csv()?));
        }
        other => unreachable!("suite {other} is validated by the config"),
    }
    Ok(())
}
