//! su(2) basics: brackets, the adjoint action, exp/log and writing an
//! element as a sum of brackets.

use coulomb_lab::lie::Algebra;

fn main() -> coulomb_lab::Result<()> {
    let alg = Algebra::su2();
    println!("algebra {} dim {} semisimple {}", alg.name(), alg.dim(), alg.is_semisimple());

    let (e1, e2, e3) = (alg.basis(0), alg.basis(1), alg.basis(2));
    let b = e1.bracket(&e2)?;
    println!("[e1, e2] = {:?}  (e3 = {:?})", alg.coeffs(&b), alg.coeffs(&e3));

    let x = alg.element(&[0.3, -0.2, 0.5]);
    let g = x.exp();
    let back = g.log()?;
    println!("|log exp x - x| = {:.2e}", back.add(&x.scale(-1.0)).norm());

    let y = g.adjoint_action(&e1)?;
    println!("|Ad_g e1| = {:.6}  |e1| = {:.6}", y.norm(), e1.norm());

    let dec = alg.commutator_decompose(&x)?;
    let r = dec.reconstruct(alg.matrix_size());
    println!("{} bracket terms, reconstruction error {:.2e}", dec.terms.len(), r.add(&x.scale(-1.0)).norm());
    Ok(())
}
