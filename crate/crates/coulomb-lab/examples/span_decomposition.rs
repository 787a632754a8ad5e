//! Decompose a gauge element into boundary data and bracket terms, then write
//! the certificate, reload it and recheck it.

use coulomb_lab::geometry::{DomainGrid, MetricSpec};
use coulomb_lab::io;
use coulomb_lab::lie::Algebra;
use coulomb_lab::span::decompose_gauge_element;
use coulomb_lab::study;

fn main() -> coulomb_lab::Result<()> {
    let alg = Algebra::su2();
    let g = DomainGrid::build(MetricSpec::flat(), 8, 33)?;
    let f = study::low_mode_field(&g, &alg, 0, &mut study::rng(0, 200))?;
    let d = decompose_gauge_element(&f)?;
    println!("|u| = {:.3e}  t0 residual {:.3e}  kernel residual {:.3e}", d.u.sup(), d.boundary_layer.t0_residual, d.kernel_residual);
    for (i, l) in d.layers.iter().enumerate() {
        println!("layer {i}: {} terms, cbc {}, reconstruction {:.3e}", l.terms.len(), l.cbc, l.reconstruction_error);
    }
    println!("total residual {:.3e} against |Δg| {:.3e}", d.total_residual, d.scale);

    let path = std::env::temp_dir().join("coulomb-lab-example-certificate.bin");
    io::save_certificate(&path, &d)?;
    let v = io::load_certificate(&path)?.reverify()?;
    println!("reloaded: reconstruction {:.3e}, bitwise identical {}", v.reconstruction_error, v.exact);
    std::fs::remove_file(&path)?;
    Ok(())
}
