//! Horizontal lift around small squares in the Coulomb slice; the holonomy
//! over ε² approaches the curvature.

use coulomb_lab::bundle::horizontal_project;
use coulomb_lab::forms::{conductor_project, FormField};
use coulomb_lab::geometry::{DomainGrid, MetricSpec};
use coulomb_lab::holonomy::{curvature_holonomy_study, LiftConfig};
use coulomb_lab::lie::Algebra;
use coulomb_lab::solver::ConnectionState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> coulomb_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), 8, 9)?;
    let a = ConnectionState::flat(&g, &alg);
    let mut unit = || -> coulomb_lab::Result<_> {
        let w = conductor_project(&FormField::random_smooth(&g, &alg, 1, &mut rng, true)?);
        horizontal_project(&a, &w.scale(1.0 / w.norm()))
    };
    let x = unit()?;
    let y = unit()?;
    let s = curvature_holonomy_study(&a, &x, &y, &[0.2, 0.1, 0.05], &LiftConfig { steps: 32, ..Default::default() })?;
    print!("{}", s.to_csv()?);
    println!("|R| = {:.4e}, max vertical residual {:.2e}", s.curvature_norm, s.max_vertical_residual);
    Ok(())
}
