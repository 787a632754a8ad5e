//! Covariant d, d* and the wedge-dot on a warped slab, with a direct check
//! of the summation-by-parts identity.

use coulomb_lab::forms::{conductor_project, wedge_dot, FormField};
use coulomb_lab::geometry::{DomainGrid, MetricSpec};
use coulomb_lab::lie::Algebra;
use coulomb_lab::solver::ConnectionState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> coulomb_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::warped_linear(), 8, 17)?;
    let eta = conductor_project(&FormField::random_smooth(&g, &alg, 1, &mut rng, true)?).scale(0.3);
    let a = ConnectionState::new(eta)?;

    for degree in [0, 1] {
        let u = conductor_project(&FormField::random_smooth(&g, &alg, degree, &mut rng, true)?);
        let v = FormField::random_smooth(&g, &alg, degree + 1, &mut rng, false)?;
        let lhs = a.d(&u)?.inner(&v)?;
        let rhs = u.inner(&a.d_star(&v)?)?;
        println!("degree {degree}: <d u, v> = {lhs:+.12}  <u, d* v> = {rhs:+.12}");
    }

    let x = FormField::random_smooth(&g, &alg, 1, &mut rng, true)?;
    let y = FormField::random_smooth(&g, &alg, 1, &mut rng, true)?;
    let w = wedge_dot(&x, &y)?;
    let w2 = wedge_dot(&y, &x)?;
    println!("|[x.y] + [y.x]| = {:.2e}", w.add(&w2)?.sup_norm());
    Ok(())
}
