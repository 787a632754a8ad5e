//! Slab grids with flat and warped metrics; the face mean curvature τ.

use coulomb_lab::geometry::{DomainGrid, Face, MetricSpec};

fn main() -> coulomb_lab::Result<()> {
    for spec in [MetricSpec::flat(), MetricSpec::warped(vec![0.0, 0.5, 0.25])] {
        let g = DomainGrid::build(spec, 8, 17)?;
        println!("{:?}", g.spec);
        println!("  nodes {}  h_lat {:.4}  h_norm {:.4}  volume {:.6}", g.nodes(), g.h_lat, g.h_norm, g.volume());
        for face in Face::BOTH {
            let t = g.tau(face);
            println!("  tau on {}: min {:+.6}  sup {:.6}", face.label(), t.min(), t.sup_norm());
        }
    }
    Ok(())
}
