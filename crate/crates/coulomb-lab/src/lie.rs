//! Compact matrix Lie algebras and groups.
//!
//! An [`Algebra`] is described by a basis of anti-Hermitian matrices. Everything
//! else (structure constants, trace Gram matrix, commutator table) is derived
//! from that basis, so other compact groups can be added by supplying a basis.
//! Field code works on real coefficient vectors in this basis; [`LieElement`]
//! and [`GroupElement`] are the matrix-level view.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

pub type CMat = DMatrix<Complex64>;

const INVARIANT_TOL: f64 = 1e-12;

/// Structure data of a matrix Lie algebra.
#[derive(Debug)]
pub struct Algebra {
    name: String,
    n: usize,
    basis: Vec<CMat>,
    /// Nonzero structure constants `(a, b, c, f)` with `[e_a, e_b] = Σ_c f e_c`.
    structure: Vec<(usize, usize, usize, f64)>,
    gram: Vec<f64>,
    gram_inv: Vec<f64>,
    table: Vec<Vec<(f64, usize, usize)>>,
    semisimple: bool,
    traceless: bool,
}

impl Algebra {
    /// su(2) with basis `e_k = -(i/2) σ_k`, so `[e1, e2] = e3` cyclically.
    pub fn su2() -> Arc<Algebra> {
        let z = Complex64::new(0.0, 0.0);
        let h = |re: f64, im: f64| Complex64::new(re, im);
        let e1 = CMat::from_row_slice(2, 2, &[z, h(0.0, -0.5), h(0.0, -0.5), z]);
        let e2 = CMat::from_row_slice(2, 2, &[z, h(-0.5, 0.0), h(0.5, 0.0), z]);
        let e3 = CMat::from_row_slice(2, 2, &[h(0.0, -0.5), z, z, h(0.0, 0.5)]);
        Arc::new(Algebra::from_basis("su2", vec![e1, e2, e3]).expect("su(2) basis is valid"))
    }

    /// u(1) with basis `i`; used as the carrier for real scalar fields.
    pub fn real_line() -> Arc<Algebra> {
        let b = CMat::from_row_slice(1, 1, &[Complex64::new(0.0, 1.0)]);
        Arc::new(Algebra::from_basis("u1", vec![b]).expect("u(1) basis is valid"))
    }

    /// Builds the descriptor from anti-Hermitian basis matrices. The algebra is
    /// flagged semisimple when every basis element is a combination of brackets.
    pub fn from_basis(name: &str, basis: Vec<CMat>) -> Result<Algebra> {
        let dim = basis.len();
        if dim == 0 {
            return Err(Error::Shape("empty basis".into()));
        }
        let n = basis[0].nrows();
        for b in &basis {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::Shape("basis matrices differ in size".into()));
            }
            check_anti_hermitian(b)?;
        }
        let mut gram = vec![0.0; dim * dim];
        for a in 0..dim {
            for b in 0..dim {
                gram[a * dim + b] = trace_inner_mat(&basis[a], &basis[b]);
            }
        }
        let g = DMatrix::from_row_slice(dim, dim, &gram);
        let ginv = g
            .try_inverse()
            .ok_or_else(|| Error::Validation("basis is linearly dependent".into()))?;
        let gram_inv: Vec<f64> = (0..dim * dim).map(|k| ginv[(k / dim, k % dim)]).collect();
        let traceless = basis.iter().all(|b| b.trace().norm() < INVARIANT_TOL);

        let mut alg = Algebra {
            name: name.to_string(),
            n,
            basis,
            structure: Vec::new(),
            gram,
            gram_inv,
            table: Vec::new(),
            semisimple: false,
            traceless,
        };
        for a in 0..dim {
            for b in 0..dim {
                let m = commutator(&alg.basis[a], &alg.basis[b]);
                let c = alg.project(&m);
                for (k, v) in c.iter().enumerate() {
                    if v.abs() > 1e-15 {
                        alg.structure.push((a, b, k, *v));
                    }
                }
            }
        }
        alg.table = alg.build_table();
        alg.semisimple = alg.table.iter().all(|t| !t.is_empty());
        Ok(alg)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of basis elements.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Matrix size.
    pub fn matrix_size(&self) -> usize {
        self.n
    }

    pub fn is_semisimple(&self) -> bool {
        self.semisimple
    }

    pub fn basis(&self, k: usize) -> LieElement {
        LieElement { mat: self.basis[k].clone() }
    }

    /// Trace Gram matrix entry `tr(e_a^* e_b)`.
    pub fn gram(&self, a: usize, b: usize) -> f64 {
        self.gram[a * self.dim() + b]
    }

    /// Coefficients of a matrix in the basis (orthogonal projection under the trace form).
    pub fn project(&self, m: &CMat) -> Vec<f64> {
        let dim = self.dim();
        let rhs: Vec<f64> = self.basis.iter().map(|b| trace_inner_mat(b, m)).collect();
        (0..dim)
            .map(|a| (0..dim).map(|b| self.gram_inv[a * dim + b] * rhs[b]).sum())
            .collect()
    }

    pub fn matrix(&self, coeffs: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for (c, b) in coeffs.iter().zip(&self.basis) {
            if *c != 0.0 {
                m += b * Complex64::new(*c, 0.0);
            }
        }
        m
    }

    pub fn element(&self, coeffs: &[f64]) -> LieElement {
        LieElement { mat: self.matrix(coeffs) }
    }

    pub fn coeffs(&self, x: &LieElement) -> Vec<f64> {
        self.project(&x.mat)
    }

    /// `out = [x, y]` on coefficient vectors.
    #[inline]
    pub fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.bracket_acc(1.0, x, y, out);
    }

    /// `out += s·[x, y]` on coefficient vectors.
    #[inline]
    pub fn bracket_acc(&self, s: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        for &(a, b, c, f) in &self.structure {
            out[c] += s * f * x[a] * y[b];
        }
    }

    /// `out = Σ_{a<b} f_ab^c (m_ab − m_ba)` for a `dim × dim` array `m`, i.e.
    /// the bracket contraction of an (un-antisymmetrized) tensor product.
    pub fn contract_antisymmetric(&self, m: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(a, b, c, f) in &self.structure {
            if a < b {
                out[c] += f * (m[a * dim + b] - m[b * dim + a]);
            }
        }
    }

    /// Trace inner product of coefficient vectors.
    #[inline]
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let dim = self.dim();
        let mut s = 0.0;
        for a in 0..dim {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..dim {
                s += x[a] * self.gram[a * dim + b] * y[b];
            }
        }
        s
    }

    /// Real matrix of `Ad(g)` in the basis, column `b` holding the coefficients of `g e_b g⁻¹`.
    pub fn ad_matrix(&self, g: &CMat) -> Vec<f64> {
        let dim = self.dim();
        let gi = g.adjoint();
        let mut out = vec![0.0; dim * dim];
        for b in 0..dim {
            let m = g * &self.basis[b] * &gi;
            let c = self.project(&m);
            for a in 0..dim {
                out[a * dim + b] = c[a];
            }
        }
        out
    }

    /// Writes `x` as `Σ coefficient·[left, right]` using the basis commutator table.
    pub fn commutator_decompose(&self, x: &LieElement) -> Result<BasisDecomposition> {
        if x.mat.nrows() != self.n {
            return Err(Error::Shape(format!("{}x{} element in {}", x.mat.nrows(), x.mat.ncols(), self.name)));
        }
        if !self.semisimple {
            return Err(Error::Validation(format!("{} is not semisimple", self.name)));
        }
        let c = self.coeffs(x);
        let mut terms = Vec::new();
        for (k, ck) in c.iter().enumerate() {
            if *ck == 0.0 {
                continue;
            }
            for &(s, a, b) in &self.table[k] {
                terms.push(BracketTerm { coefficient: ck * s, left: self.basis(a), right: self.basis(b) });
            }
        }
        Ok(BasisDecomposition { terms })
    }

    /// Same decomposition on a coefficient vector, returned as basis indices.
    pub fn commutator_table(&self, k: usize) -> &[(f64, usize, usize)] {
        &self.table[k]
    }

    fn build_table(&self) -> Vec<Vec<(f64, usize, usize)>> {
        let dim = self.dim();
        let mut table = vec![Vec::new(); dim];
        for (c, entry) in table.iter_mut().enumerate() {
            // Prefer a single bracket, searching pairs in cyclic order starting after c.
            'search: for da in 1..=dim {
                let a = (c + da) % dim;
                for db in 1..=dim {
                    let b = (a + db) % dim;
                    if a == b {
                        continue;
                    }
                    let v = self.bracket_coeffs(a, b);
                    let off: f64 = v.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, x)| x.abs()).sum();
                    if off < 1e-14 && v[c].abs() > 1e-12 {
                        entry.push((1.0 / v[c], a, b));
                        break 'search;
                    }
                }
            }
        }
        table
    }

    fn bracket_coeffs(&self, a: usize, b: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for &(i, j, c, f) in &self.structure {
            if i == a && j == b {
                v[c] += f;
            }
        }
        v
    }

    pub fn is_traceless(&self) -> bool {
        self.traceless
    }
}

/// Element of the Lie algebra, stored as an anti-Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LieElement {
    pub mat: CMat,
}

/// Element of the group, stored as a unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub mat: CMat,
}

#[derive(Clone, Debug)]
pub struct BracketTerm {
    pub coefficient: f64,
    pub left: LieElement,
    pub right: LieElement,
}

/// Terms whose bracket sum reproduces a target element.
#[derive(Clone, Debug, Default)]
pub struct BasisDecomposition {
    pub terms: Vec<BracketTerm>,
}

impl BasisDecomposition {
    pub fn reconstruct(&self, n: usize) -> LieElement {
        let mut m = CMat::zeros(n, n);
        for t in &self.terms {
            m += commutator(&t.left.mat, &t.right.mat) * Complex64::new(t.coefficient, 0.0);
        }
        LieElement { mat: m }
    }
}

fn check_anti_hermitian(m: &CMat) -> Result<()> {
    let r = (m + m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if r > INVARIANT_TOL {
        return Err(Error::Validation(format!("matrix is not anti-Hermitian (residual {r:.2e})")));
    }
    Ok(())
}

fn commutator(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

fn trace_inner_mat(x: &CMat, y: &CMat) -> f64 {
    (x.adjoint() * y).trace().re
}

fn same_shape(x: &CMat, y: &CMat) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    Ok(())
}

impl LieElement {
    pub fn new(mat: CMat) -> Result<LieElement> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Shape("non-square matrix".into()));
        }
        check_anti_hermitian(&mat)?;
        Ok(LieElement { mat })
    }

    pub fn zero(n: usize) -> LieElement {
        LieElement { mat: CMat::zeros(n, n) }
    }

    pub fn bracket(&self, other: &LieElement) -> Result<LieElement> {
        same_shape(&self.mat, &other.mat)?;
        Ok(LieElement { mat: commutator(&self.mat, &other.mat) })
    }

    /// `tr(x^* y)`.
    pub fn trace_inner(&self, other: &LieElement) -> Result<f64> {
        same_shape(&self.mat, &other.mat)?;
        Ok(trace_inner_mat(&self.mat, &other.mat))
    }

    pub fn norm(&self) -> f64 {
        trace_inner_mat(&self.mat, &self.mat).sqrt()
    }

    pub fn scale(&self, s: f64) -> LieElement {
        LieElement { mat: &self.mat * Complex64::new(s, 0.0) }
    }

    pub fn add(&self, other: &LieElement) -> LieElement {
        LieElement { mat: &self.mat + &other.mat }
    }

    pub fn exp(&self) -> GroupElement {
        GroupElement { mat: expm(&self.mat) }
    }
}

impl GroupElement {
    pub fn new(mat: CMat) -> Result<GroupElement> {
        let g = GroupElement { mat };
        g.check_unitary()?;
        Ok(g)
    }

    pub fn identity(n: usize) -> GroupElement {
        GroupElement { mat: CMat::identity(n, n) }
    }

    pub fn check_unitary(&self) -> Result<()> {
        let n = self.mat.nrows();
        if self.mat.ncols() != n {
            return Err(Error::Shape("non-square matrix".into()));
        }
        let r = (self.mat.adjoint() * &self.mat - CMat::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if r > INVARIANT_TOL {
            return Err(Error::Validation(format!("matrix is not unitary (residual {r:.2e})")));
        }
        Ok(())
    }

    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        GroupElement { mat: &self.mat * &other.mat }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { mat: self.mat.adjoint() }
    }

    /// `g x g⁻¹`.
    pub fn adjoint_action(&self, x: &LieElement) -> Result<LieElement> {
        same_shape(&self.mat, &x.mat)?;
        self.check_unitary()?;
        Ok(LieElement { mat: &self.mat * &x.mat * self.mat.adjoint() })
    }

    /// Operator-norm distance to the identity.
    pub fn distance_to_identity(&self) -> f64 {
        let n = self.mat.nrows();
        op_norm(&(&self.mat - CMat::identity(n, n)))
    }

    /// Principal logarithm, defined for `‖g − e‖_op < 1`.
    pub fn log(&self) -> Result<LieElement> {
        let mut l = logm(&self.mat)?;
        l = (&l - l.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(LieElement { mat: l })
    }
}

pub fn op_norm(m: &CMat) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

fn norm1(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of the truncated Taylor series.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let nrm = norm1(m);
    let mut s = 0;
    if nrm > 0.25 {
        s = (nrm / 0.25).log2().ceil() as i32;
    }
    let a = m * Complex64::new(0.5f64.powi(s), 0.0);
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=30 {
        term = &term * &a * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if norm1(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Matrix logarithm by inverse scaling and squaring (Denman–Beavers square roots).
pub fn logm(g: &CMat) -> Result<CMat> {
    let n = g.nrows();
    let id = CMat::identity(n, n);
    let dist = op_norm(&(g - &id));
    if dist >= 1.0 {
        return Err(Error::Domain(format!("log needs ||g - e|| < 1, got {dist:.4}")));
    }
    let mut y = g.clone();
    let mut k = 0;
    while norm1(&(&y - &id)) > 0.05 && k < 40 {
        y = sqrtm(&y)?;
        k += 1;
    }
    let z = &y - &id;
    let mut sum = CMat::zeros(n, n);
    let mut pow = id.clone();
    for j in 1..=60 {
        pow = &pow * &z;
        let t = &pow * Complex64::new(if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64, 0.0);
        sum += &t;
        if norm1(&t) < 1e-18 {
            break;
        }
    }
    Ok(sum * Complex64::new(2f64.powi(k), 0.0))
}

fn sqrtm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = CMat::identity(n, n);
    for _ in 0..60 {
        let yi = y.clone().try_inverse().ok_or_else(|| Error::Domain("singular matrix in sqrt".into()))?;
        let zi = z.clone().try_inverse().ok_or_else(|| Error::Domain("singular matrix in sqrt".into()))?;
        let yn = (&y + zi) * Complex64::new(0.5, 0.0);
        let zn = (&z + yi) * Complex64::new(0.5, 0.0);
        let delta = norm1(&(&yn - &y));
        y = yn;
        z = zn;
        if delta < 1e-16 {
            break;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli(k: usize) -> CMat {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match k {
            1 => CMat::from_row_slice(2, 2, &[z, o, o, z]),
            2 => CMat::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    fn oracle_e(k: usize) -> CMat {
        pauli(k) * Complex64::new(0.0, -0.5)
    }

    fn max_abs(m: &CMat) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_element(alg: &Algebra, rng: &mut ChaCha8Rng, scale: f64) -> LieElement {
        let c: Vec<f64> = (0..alg.dim()).map(|_| rng.gen_range(-scale..scale)).collect();
        alg.element(&c)
    }

    #[test]
    fn basis_matches_pauli_construction() {
        let alg = Algebra::su2();
        for k in 0..3 {
            assert!(max_abs(&(alg.basis(k).mat - oracle_e(k + 1))) < 1e-15);
        }
        assert!(alg.is_semisimple() && alg.is_traceless());
    }

    #[test]
    fn bracket_table() {
        let alg = Algebra::su2();
        let (e1, e2, e3) = (alg.basis(0), alg.basis(1), alg.basis(2));
        // oracle: direct products of the Pauli-built matrices
        let want = &oracle_e(1) * &oracle_e(2) - &oracle_e(2) * &oracle_e(1);
        assert!(max_abs(&(e1.bracket(&e2).unwrap().mat - &want)) < 1e-15);
        assert!(max_abs(&(want - &e3.mat)) < 1e-15);
        assert!(max_abs(&e1.bracket(&e1).unwrap().mat) == 0.0);
        assert!(max_abs(&(e2.bracket(&e1).unwrap().mat + &e3.mat)) < 1e-15);
        let big = LieElement::zero(3);
        assert!(matches!(e1.bracket(&big), Err(Error::Shape(_))));
    }

    #[test]
    fn trace_inner_values() {
        let alg = Algebra::su2();
        let (e1, e2) = (alg.basis(0), alg.basis(1));
        let oracle = (oracle_e(1).adjoint() * oracle_e(1)).trace().re;
        assert!((oracle - 0.5).abs() < 1e-15);
        assert!((e1.trace_inner(&e1).unwrap() - 0.5).abs() < 1e-15);
        let cross = (oracle_e(1).adjoint() * oracle_e(2)).trace().re;
        assert!(cross.abs() < 1e-15 && e1.trace_inner(&e2).unwrap().abs() < 1e-15);
        assert_eq!(LieElement::zero(2).trace_inner(&e2).unwrap(), 0.0);
    }

    #[test]
    fn coefficient_bracket_matches_matrix_bracket() {
        let alg = Algebra::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random_element(&alg, &mut rng, 1.0);
            let y = random_element(&alg, &mut rng, 1.0);
            let (cx, cy) = (alg.coeffs(&x), alg.coeffs(&y));
            let mut out = vec![0.0; 3];
            alg.bracket_into(&cx, &cy, &mut out);
            let m = x.bracket(&y).unwrap();
            assert!(max_abs(&(alg.matrix(&out) - &m.mat)) < 1e-14);
            assert!((alg.inner(&cx, &cy) - x.trace_inner(&y).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_action_examples() {
        let alg = Algebra::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_element(&alg, &mut rng, 1.0);
        let e = GroupElement::identity(2);
        assert_eq!(e.adjoint_action(&x).unwrap(), x);
        let e3 = alg.basis(2);
        let g = e3.scale(0.7).exp();
        assert!(max_abs(&(g.adjoint_action(&e3).unwrap().mat - &e3.mat)) < 1e-14);
        let bad = GroupElement { mat: CMat::identity(2, 2) * Complex64::new(1.1, 0.0) };
        assert!(matches!(bad.adjoint_action(&x), Err(Error::Validation(_))));
    }

    #[test]
    fn exp_log_examples() {
        let alg = Algebra::su2();
        assert!(max_abs(&(LieElement::zero(2).exp().mat - CMat::identity(2, 2))) == 0.0);
        let x = alg.basis(0).scale(0.3);
        let back = x.exp().log().unwrap();
        assert!(max_abs(&(back.mat - &x.mat)) < 1e-10);
        let far = alg.basis(0).scale(3.0).exp();
        assert!(matches!(far.log(), Err(Error::Domain(_))));
    }

    #[test]
    fn exp_matches_closed_form() {
        // closed form for su(2): exp(θ n·e) = cos(θ/2) I − i sin(θ/2) n·σ
        let alg = Algebra::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let th = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let ns = (pauli(1) * Complex64::new(c[0] / th, 0.0)
                + pauli(2) * Complex64::new(c[1] / th, 0.0)
                + pauli(3) * Complex64::new(c[2] / th, 0.0))
                * Complex64::new(0.0, -(th / 2.0).sin());
            let want = CMat::identity(2, 2) * Complex64::new((th / 2.0).cos(), 0.0) + ns;
            let g = alg.element(&c).exp();
            assert!(max_abs(&(g.mat.clone() - want)) < 1e-13);
            g.check_unitary().unwrap();
            assert!((g.mat.determinant() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_decomposition_examples() {
        let alg = Algebra::su2();
        let d = alg.commutator_decompose(&alg.basis(2)).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].coefficient, 1.0);
        assert_eq!(d.terms[0].left, alg.basis(0));
        assert_eq!(d.terms[0].right, alg.basis(1));
        assert!(alg.commutator_decompose(&LieElement::zero(2)).unwrap().terms.is_empty());
        let x = alg.element(&[2.0, 1.0, 0.0]);
        let d = alg.commutator_decompose(&x).unwrap();
        let got: Vec<(f64, LieElement, LieElement)> =
            d.terms.iter().map(|t| (t.coefficient, t.left.clone(), t.right.clone())).collect();
        assert_eq!(
            got,
            vec![(2.0, alg.basis(1), alg.basis(2)), (1.0, alg.basis(2), alg.basis(0))]
        );
        assert!(max_abs(&(d.reconstruct(2).mat - &x.mat)) < 1e-12);
    }

    #[test]
    fn abelian_algebra_is_not_semisimple() {
        let u1 = CMat::from_row_slice(1, 1, &[Complex64::new(0.0, 1.0)]);
        let alg = Algebra::from_basis("u1", vec![u1]).unwrap();
        assert!(!alg.is_semisimple());
        assert!(alg.commutator_decompose(&alg.basis(0)).is_err());
    }

    #[test]
    fn ad_exp_equals_exp_ad() {
        // Ad(exp x) e_b against the matrix exponential of ad(x) in the basis
        let alg = Algebra::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let g = alg.element(&c).exp();
            let ad = alg.ad_matrix(&g.mat);
            let mut adx = DMatrix::<f64>::zeros(3, 3);
            for b in 0..3 {
                let mut e = [0.0; 3];
                e[b] = 1.0;
                let mut out = [0.0; 3];
                alg.bracket_into(&c, &e, &mut out);
                for a in 0..3 {
                    adx[(a, b)] = out[a];
                }
            }
            let ex = adx.exp();
            for a in 0..3 {
                for b in 0..3 {
                    assert!((ex[(a, b)] - ad[a * 3 + b]).abs() < 1e-10);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn coeffs() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-2.0f64..2.0, 3)
        }

        proptest! {
            #[test]
            fn jacobi(x in coeffs(), y in coeffs(), z in coeffs()) {
                let alg = Algebra::su2();
                let br = |u: &[f64], v: &[f64]| { let mut o = vec![0.0; 3]; alg.bracket_into(u, v, &mut o); o };
                let t1 = br(&x, &br(&y, &z));
                let t2 = br(&y, &br(&z, &x));
                let t3 = br(&z, &br(&x, &y));
                for k in 0..3 { prop_assert!((t1[k] + t2[k] + t3[k]).abs() < 1e-12); }
            }

            #[test]
            fn bracket_is_skew_adjoint(x in coeffs(), f in coeffs(), b in coeffs()) {
                let alg = Algebra::su2();
                let mut xf = vec![0.0; 3];
                let mut xb = vec![0.0; 3];
                alg.bracket_into(&x, &f, &mut xf);
                alg.bracket_into(&x, &b, &mut xb);
                prop_assert!((alg.inner(&xf, &b) + alg.inner(&f, &xb)).abs() < 1e-12);
            }

            #[test]
            fn adjoint_action_is_isometry(g in coeffs(), x in coeffs(), y in coeffs()) {
                let alg = Algebra::su2();
                let g = alg.element(&g).exp();
                let (x, y) = (alg.element(&x), alg.element(&y));
                let lhs = g.adjoint_action(&x).unwrap().trace_inner(&g.adjoint_action(&y).unwrap()).unwrap();
                prop_assert!((lhs - x.trace_inner(&y).unwrap()).abs() < 1e-12);
            }

            #[test]
            fn exp_is_unitary(x in proptest::collection::vec(-0.5f64..0.5, 3)) {
                let alg = Algebra::su2();
                let g = alg.element(&x).exp();
                prop_assert!(g.check_unitary().is_ok());
                let back = g.log().unwrap();
                prop_assert!(max_abs(&(back.mat - alg.matrix(&x))) < 1e-10);
            }
        }
    }
}
