//! The boundary identity d[α·β](ν) + 2τ[α·β] = 0 for horizontal pairs, and the
//! trace operator T applied to the Coulomb curvature.

use coulomb_lab::bundle::{boundary_operator_t, coulomb_curvature, horizontal_project, verify_bct};
use coulomb_lab::geometry::{DomainGrid, MetricSpec};
use coulomb_lab::lie::Algebra;
use coulomb_lab::solver::ConnectionState;
use coulomb_lab::study;

fn main() -> coulomb_lab::Result<()> {
    let alg = Algebra::su2();
    for n_norm in [17, 33, 65] {
        let g = DomainGrid::build(MetricSpec::warped_linear(), 8, n_norm)?;
        let a = ConnectionState::flat(&g, &alg);
        let mut r = study::rng(0, 6);
        let x = horizontal_project(&a, &study::low_mode_field(&g, &alg, 1, &mut r)?)?;
        let y = horizontal_project(&a, &study::low_mode_field(&g, &alg, 1, &mut r)?)?;
        let bct = verify_bct(&a, &x, &y)?;
        let t = boundary_operator_t(&a, &coulomb_curvature(&a, &x, &y)?)?;
        println!(
            "N_norm {n_norm:>3}: bct residual {:.3e} (face scale {:.3e}), |T R| {:.3e}",
            bct.residual,
            bct.face_scale,
            t.sup()
        );
    }
    Ok(())
}
