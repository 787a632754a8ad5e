//! Dirichlet Green operator: the eigenfunction sin(πx₃)e1 and a convergence
//! table under N_norm refinement.

use coulomb_lab::forms::FormField;
use coulomb_lab::geometry::{DomainGrid, MetricSpec};
use coulomb_lab::lie::Algebra;
use coulomb_lab::solver::ConnectionState;
use coulomb_lab::study;
use std::f64::consts::PI;

fn main() -> coulomb_lab::Result<()> {
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), 8, 33)?;
    let a = ConnectionState::flat(&g, &alg);
    let f = FormField::from_fn(&g, &alg, 0, |x, _, o| o[0] = PI * PI * (PI * x[2]).sin())?;
    let (u, rep) = a.green(&f)?;
    let exact = f.scale(1.0 / (PI * PI));
    println!("{} CG iterations, residual {:.2e}", rep.iterations, rep.final_residual);
    println!("max error {:.3e}", u.sub(&exact)?.sup_norm());

    let t = study::laplacian_study(&[(8, 17), (8, 33), (8, 65)])?;
    print!("{}", t.to_csv()?);
    Ok(())
}
