//! Horizontal projection and Newton gauge fixing back onto the Coulomb slice.

use coulomb_lab::bundle::{coulomb_gauge_fix, horizontal_project, horizontal_residual, GaugeFixConfig};
use coulomb_lab::forms::{conductor_project, FormField};
use coulomb_lab::geometry::{DomainGrid, MetricSpec};
use coulomb_lab::lie::Algebra;
use coulomb_lab::solver::ConnectionState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> coulomb_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::warped_linear(), 8, 17)?;
    let a = ConnectionState::flat(&g, &alg);

    let w = conductor_project(&FormField::random_smooth(&g, &alg, 1, &mut rng, true)?);
    let p = horizontal_project(&a, &w)?;
    println!("|d* w| = {:.3e}  |d* P w| = {:.3e}", horizontal_residual(&a, &w)?, horizontal_residual(&a, p.form())?);

    let eta = w.scale(0.01 * g.volume().sqrt() / w.norm());
    let (gt, rep) = coulomb_gauge_fix(&a, &eta, &GaugeFixConfig::default())?;
    println!("gauge fix: {} iterations", rep.iterations);
    for (i, r) in rep.residual_history.iter().enumerate() {
        println!("  {i}: {r:.3e}");
    }
    println!("|g - 1| = {:.3e}, face defect {:.1e}", gt.distance_to_identity(), gt.face_defect());
    Ok(())
}
