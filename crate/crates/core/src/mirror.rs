//! Positive Hermitian matrices over a weighted finite point set, with metric
//! `Σ_p w_p tr(H_p⁻¹ ξ_p H_p⁻¹ η_p)`.
//!
//! The curvature quadruple is
//! `(R(ξ,η)ζ,λ) = -¼ Σ_p w_p tr([A,B][C,D])` with `A = H⁻¹ξ`, `B = H⁻¹η`,
//! `C = H⁻¹ζ`, `D = H⁻¹λ`. Writing the last commutator as `[D,C]` flips the
//! sign and makes every sectional curvature nonnegative; the Levi-Civita
//! oracle [`herm_fd_riemann`] picks the ordering used here. Both values are
//! available.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Planes with `Gram < DEGENERACY * (ξ,ξ)(η,η)` are rejected.
pub const DEGENERACY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermBase {
    weights: Vec<f64>,
}

impl HermBase {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::ShapeMismatch(
                "weights must be positive and non-empty".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn single() -> Self {
        Self { weights: vec![1.0] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint())
        .iter()
        .fold(0.0, |acc, z| acc.max(z.norm()))
}

fn check_square(ms: &[CMatrix]) -> Result<usize> {
    let size = ms.first().map(|m| m.nrows()).unwrap_or(0);
    if size == 0 || ms.iter().any(|m| m.nrows() != size || m.ncols() != size) {
        return Err(Error::ShapeMismatch(
            "matrices must be square and of equal size".into(),
        ));
    }
    Ok(size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermPoint {
    base: HermBase,
    matrices: Vec<CMatrix>,
    inverses: Vec<CMatrix>,
}

impl HermPoint {
    pub fn new(base: HermBase, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != base.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} matrices for {} base points",
                matrices.len(),
                base.len()
            )));
        }
        check_square(&matrices)?;
        let mut inverses = Vec::with_capacity(matrices.len());
        for (p, m) in matrices.iter().enumerate() {
            let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
            if hermitian_defect(m) > HERMITIAN_TOLERANCE * scale {
                return Err(Error::NotPositiveDefinite(format!(
                    "matrix {p} is not Hermitian"
                )));
            }
            let lowest = m.clone().symmetric_eigenvalues().min();
            if !(lowest > 0.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "matrix {p} has eigenvalue {lowest}"
                )));
            }
            let inverse = m
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::NotPositiveDefinite(format!("matrix {p} is singular")))?;
            inverses.push(inverse);
        }
        Ok(Self {
            base,
            matrices,
            inverses,
        })
    }

    /// `H_p = I` at every base point.
    pub fn identity(base: HermBase, size: usize) -> Self {
        let matrices = vec![CMatrix::identity(size, size); base.len()];
        Self {
            base,
            inverses: matrices.clone(),
            matrices,
        }
    }

    pub fn base(&self) -> &HermBase {
        &self.base
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn size(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// `H + s ξ`.
    pub fn shifted(&self, xi: &HermTangent, s: f64) -> Result<Self> {
        self.check(xi)?;
        let matrices = self
            .matrices
            .iter()
            .zip(&xi.matrices)
            .map(|(h, x)| h + x * Complex64::new(s, 0.0))
            .collect();
        Self::new(self.base.clone(), matrices)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let matrices = self
            .matrices
            .iter()
            .map(|h| h * Complex64::new(c, 0.0))
            .collect();
        Self::new(self.base.clone(), matrices)
    }

    fn check(&self, t: &HermTangent) -> Result<()> {
        if t.matrices.len() != self.matrices.len() || t.size() != self.size() {
            return Err(Error::ShapeMismatch(
                "tangent does not match the base point".into(),
            ));
        }
        Ok(())
    }

    /// `H_p⁻¹ ξ_p` at every base point.
    fn lower(&self, t: &HermTangent) -> Vec<CMatrix> {
        self.inverses
            .iter()
            .zip(&t.matrices)
            .map(|(inv, x)| inv * x)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermTangent {
    matrices: Vec<CMatrix>,
}

impl HermTangent {
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        check_square(&matrices)?;
        for (p, m) in matrices.iter().enumerate() {
            let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
            if hermitian_defect(m) > HERMITIAN_TOLERANCE * scale {
                return Err(Error::ShapeMismatch(format!(
                    "tangent matrix {p} is not Hermitian"
                )));
            }
        }
        Ok(Self { matrices })
    }

    pub fn single(m: CMatrix) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn size(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrices: self
                .matrices
                .iter()
                .map(|m| m * Complex64::new(c, 0.0))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            matrices: self
                .matrices
                .iter()
                .zip(&other.matrices)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn from_coordinates(points: usize, size: usize, coords: &[f64]) -> Self {
        let per = size * size;
        let matrices = (0..points)
            .map(|p| {
                coords[p * per..(p + 1) * per]
                    .iter()
                    .enumerate()
                    .fold(CMatrix::zeros(size, size), |acc, (a, &c)| {
                        acc + herm_basis(size, a) * Complex64::new(c, 0.0)
                    })
            })
            .collect();
        Self { matrices }
    }
}

/// Hermitian matrix with entries drawn uniformly from `[-scale, scale]`.
pub fn random_hermitian<R: rand::Rng>(rng: &mut R, size: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(size, size);
    for j in 0..size {
        m[(j, j)] = Complex64::new(rng.gen_range(-scale..=scale), 0.0);
        for k in j + 1..size {
            let z = Complex64::new(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale));
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    m
}

pub fn random_tangent<R: rand::Rng>(rng: &mut R, points: usize, size: usize) -> HermTangent {
    HermTangent {
        matrices: (0..points)
            .map(|_| random_hermitian(rng, size, 1.0))
            .collect(),
    }
}

/// `A A* + I / 2` per point, for a random `A`.
pub fn random_point<R: rand::Rng>(rng: &mut R, base: HermBase, size: usize) -> HermPoint {
    let matrices = (0..base.len())
        .map(|_| {
            let a = random_hermitian(rng, size, 1.0);
            &a * a.adjoint() + CMatrix::identity(size, size) * Complex64::new(0.5, 0.0)
        })
        .collect();
    HermPoint::new(base, matrices).expect("A A* + I/2 is positive definite")
}

/// Pauli matrices, for tests and examples.
pub fn pauli(which: char) -> CMatrix {
    let (z, o, i) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    match which {
        'x' => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'y' => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'z' => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => CMatrix::identity(2, 2),
    }
}

/// Real basis of `Herm(N)`: `E_jj`, then `E_jk + E_kj` and `i(E_jk - E_kj)` for `j < k`.
fn herm_basis(size: usize, a: usize) -> CMatrix {
    let mut m = CMatrix::zeros(size, size);
    if a < size {
        m[(a, a)] = Complex64::new(1.0, 0.0);
        return m;
    }
    let mut idx = size;
    for j in 0..size {
        for k in j + 1..size {
            if a == idx {
                m[(j, k)] = Complex64::new(1.0, 0.0);
                m[(k, j)] = Complex64::new(1.0, 0.0);
                return m;
            }
            if a == idx + 1 {
                m[(j, k)] = Complex64::new(0.0, 1.0);
                m[(k, j)] = Complex64::new(0.0, -1.0);
                return m;
            }
            idx += 2;
        }
    }
    unreachable!("basis index {a} out of range for size {size}")
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    (a * b).trace()
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn herm_inner(h: &HermPoint, xi: &HermTangent, eta: &HermTangent) -> Result<f64> {
    h.check(xi)?;
    h.check(eta)?;
    let (a, b) = (h.lower(xi), h.lower(eta));
    Ok(h.base
        .weights
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(w, (a, b))| w * trace_product(a, b).re)
        .sum())
}

fn quad(h: &HermPoint, t: [&HermTangent; 4], literal: bool) -> Result<f64> {
    for x in t {
        h.check(x)?;
    }
    let [a, b, c, d] = t.map(|x| h.lower(x));
    let mut total = 0.0;
    for (p, w) in h.base.weights.iter().enumerate() {
        let first = commutator(&a[p], &b[p]);
        let second = if literal {
            commutator(&d[p], &c[p])
        } else {
            commutator(&c[p], &d[p])
        };
        total += w * trace_product(&first, &second).re;
    }
    Ok(-0.25 * total)
}

/// `(R(ξ,η)ζ,λ) = -¼ Σ w tr([H⁻¹ξ,H⁻¹η][H⁻¹ζ,H⁻¹λ])`.
pub fn herm_curvature_quad(
    h: &HermPoint,
    xi: &HermTangent,
    eta: &HermTangent,
    zeta: &HermTangent,
    lambda: &HermTangent,
) -> Result<f64> {
    quad(h, [xi, eta, zeta, lambda], false)
}

/// The ordering `[H⁻¹λ,H⁻¹ζ]` in the second commutator.
pub fn herm_curvature_quad_literal(
    h: &HermPoint,
    xi: &HermTangent,
    eta: &HermTangent,
    zeta: &HermTangent,
    lambda: &HermTangent,
) -> Result<f64> {
    quad(h, [xi, eta, zeta, lambda], true)
}

fn gram(h: &HermPoint, xi: &HermTangent, eta: &HermTangent) -> Result<f64> {
    let xx = herm_inner(h, xi, xi)?;
    let yy = herm_inner(h, eta, eta)?;
    let xy = herm_inner(h, xi, eta)?;
    let gram = xx * yy - xy * xy;
    let threshold = DEGENERACY * xx * yy;
    if !(gram > threshold) {
        return Err(Error::DegeneratePlane { gram, threshold });
    }
    Ok(gram)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermSectional {
    pub corrected: f64,
    pub literal: f64,
}

pub fn herm_sectional(h: &HermPoint, xi: &HermTangent, eta: &HermTangent) -> Result<f64> {
    Ok(herm_sectional_both(h, xi, eta)?.corrected)
}

pub fn herm_sectional_both(
    h: &HermPoint,
    xi: &HermTangent,
    eta: &HermTangent,
) -> Result<HermSectional> {
    let g = gram(h, xi, eta)?;
    Ok(HermSectional {
        corrected: herm_curvature_quad(h, xi, eta, eta, xi)? / g,
        literal: herm_curvature_quad_literal(h, xi, eta, eta, xi)? / g,
    })
}

/// Levi-Civita curvature of the metric in the affine chart, all derivatives by
/// central differences of step `delta`.
struct FdChart<'a> {
    h: &'a HermPoint,
    delta: f64,
    basis: Vec<HermTangent>,
}

impl<'a> FdChart<'a> {
    fn new(h: &'a HermPoint, delta: f64) -> Self {
        let (points, size) = (h.base.len(), h.size());
        let dim = points * size * size;
        let basis = (0..dim)
            .map(|a| {
                let mut e = vec![0.0; dim];
                e[a] = 1.0;
                HermTangent::from_coordinates(points, size, &e)
            })
            .collect();
        Self { h, delta, basis }
    }

    fn metric_at(&self, at: &HermPoint, a: &HermTangent, b: &HermTangent) -> Result<f64> {
        herm_inner(at, a, b)
    }

    /// `∂_c g(a,b)` at `at`.
    fn dmetric(
        &self,
        at: &HermPoint,
        c: &HermTangent,
        a: &HermTangent,
        b: &HermTangent,
    ) -> Result<f64> {
        let plus = at.shifted(c, self.delta)?;
        let minus = at.shifted(c, -self.delta)?;
        Ok((self.metric_at(&plus, a, b)? - self.metric_at(&minus, a, b)?) / (2.0 * self.delta))
    }

    /// `Γ(a,b)` at `at`, as coordinates in `basis`.
    fn christoffel(
        &self,
        at: &HermPoint,
        a: &HermTangent,
        b: &HermTangent,
    ) -> Result<DVector<f64>> {
        let dim = self.basis.len();
        let mut g = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for (r, er) in self.basis.iter().enumerate() {
            for (s, es) in self.basis.iter().enumerate().skip(r) {
                let v = self.metric_at(at, er, es)?;
                g[(r, s)] = v;
                g[(s, r)] = v;
            }
            rhs[r] = 0.5
                * (self.dmetric(at, a, b, er)? + self.dmetric(at, b, a, er)?
                    - self.dmetric(at, er, a, b)?);
        }
        g.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::NotPositiveDefinite("metric Gram matrix".into()))
    }

    fn tangent(&self, coords: &DVector<f64>) -> HermTangent {
        HermTangent::from_coordinates(self.h.base.len(), self.h.size(), coords.as_slice())
    }

    /// `R(x,y)z = ∂_x Γ(y,z) - ∂_y Γ(x,z) + Γ(x,Γ(y,z)) - Γ(y,Γ(x,z))`.
    fn riemann(&self, x: &HermTangent, y: &HermTangent, z: &HermTangent) -> Result<HermTangent> {
        let h = self.h;
        let d = self.delta;
        let dx = (self.christoffel(&h.shifted(x, d)?, y, z)?
            - self.christoffel(&h.shifted(x, -d)?, y, z)?)
            / (2.0 * d);
        let dy = (self.christoffel(&h.shifted(y, d)?, x, z)?
            - self.christoffel(&h.shifted(y, -d)?, x, z)?)
            / (2.0 * d);
        let gyz = self.tangent(&self.christoffel(h, y, z)?);
        let gxz = self.tangent(&self.christoffel(h, x, z)?);
        let coords = dx - dy + self.christoffel(h, x, &gyz)? - self.christoffel(h, y, &gxz)?;
        Ok(self.tangent(&coords))
    }
}

/// `(R(ξ,η)ζ,λ)` of the Levi-Civita connection, by finite differences.
pub fn herm_fd_riemann(
    h: &HermPoint,
    xi: &HermTangent,
    eta: &HermTangent,
    zeta: &HermTangent,
    lambda: &HermTangent,
    delta: f64,
) -> Result<f64> {
    for t in [xi, eta, zeta, lambda] {
        h.check(t)?;
    }
    let chart = FdChart::new(h, delta);
    herm_inner(h, &chart.riemann(xi, eta, zeta)?, lambda)
}

pub fn herm_fd_sectional(
    h: &HermPoint,
    xi: &HermTangent,
    eta: &HermTangent,
    delta: f64,
) -> Result<f64> {
    let g = gram(h, xi, eta)?;
    Ok(herm_fd_riemann(h, xi, eta, eta, xi, delta)? / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn at_identity() -> HermPoint {
        HermPoint::identity(HermBase::single(), 2)
    }

    fn t(m: CMatrix) -> HermTangent {
        HermTangent::single(m).unwrap()
    }

    fn real(rows: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(
            rows,
            rows,
            &v.iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn inner_spot_values() {
        let h = at_identity();
        let (x, y) = (t(pauli('x')), t(pauli('y')));
        assert_abs_diff_eq!(herm_inner(&h, &x, &x).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(herm_inner(&h, &x, &y).unwrap(), 0.0, epsilon = 1e-15);
        let h = HermPoint::new(HermBase::single(), vec![real(2, &[2.0, 0.0, 0.0, 1.0])]).unwrap();
        let e = t(real(2, &[1.0, 0.0, 0.0, 0.0]));
        assert_abs_diff_eq!(herm_inner(&h, &e, &e).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn pauli_sectional_both_orderings() {
        let h = at_identity();
        let s = herm_sectional_both(&h, &t(pauli('x')), &t(pauli('y'))).unwrap();
        assert_abs_diff_eq!(s.corrected, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.literal, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn fd_oracle_fixes_the_sign() {
        let h = at_identity();
        let k = herm_fd_sectional(&h, &t(pauli('x')), &t(pauli('y')), 1e-3).unwrap();
        assert!((k + 0.5).abs() < 1e-4, "{k}");
    }

    #[test]
    fn fd_oracle_matches_quadruple_off_identity() {
        let h = HermPoint::new(
            HermBase::new(vec![0.7, 1.3]).unwrap(),
            vec![
                real(2, &[2.0, 0.3, 0.3, 1.0]),
                CMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        Complex64::new(1.5, 0.0),
                        Complex64::new(0.2, 0.4),
                        Complex64::new(0.2, -0.4),
                        Complex64::new(0.8, 0.0),
                    ],
                ),
            ],
        )
        .unwrap();
        let mk = |a: CMatrix, b: CMatrix| HermTangent::new(vec![a, b]).unwrap();
        let x = mk(pauli('x'), pauli('z'));
        let y = mk(pauli('y'), pauli('x'));
        let z = mk(pauli('z'), pauli('y') * Complex64::new(0.5, 0.0));
        let l = mk(real(2, &[0.3, 1.0, 1.0, -0.2]), pauli('x'));
        let fd = herm_fd_riemann(&h, &x, &y, &z, &l, 1e-3).unwrap();
        let closed = herm_curvature_quad(&h, &x, &y, &z, &l).unwrap();
        assert!(
            (fd - closed).abs() < 1e-5 * closed.abs().max(1.0),
            "{fd} vs {closed}"
        );
    }

    #[test]
    fn random_pairs_nonpositive_and_scale_invariant() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for size in [2, 3] {
            let base = HermBase::new(vec![0.5, 1.0, 2.0]).unwrap();
            let h = random_point(&mut rng, base, size);
            let x = random_tangent(&mut rng, 3, size);
            let y = random_tangent(&mut rng, 3, size);
            let k = herm_sectional(&h, &x, &y).unwrap();
            assert!(k < 0.0);
            let scaled =
                herm_sectional(&h.scaled(3.0).unwrap(), &x.scaled(3.0), &y.scaled(3.0)).unwrap();
            assert!((k - scaled).abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_pair_is_flat() {
        let h = at_identity();
        let a = t(real(2, &[1.0, 0.0, 0.0, 0.0]));
        let b = t(real(2, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(herm_sectional(&h, &a, &b).unwrap(), 0.0);
        assert!(herm_fd_riemann(&h, &a, &b, &b, &a, 1e-3).unwrap().abs() < 1e-8);
    }

    #[test]
    fn antisymmetry_and_errors() {
        let h = at_identity();
        let (x, y, z) = (t(pauli('x')), t(pauli('y')), t(pauli('z')));
        let q = herm_curvature_quad(&h, &x, &y, &z, &x).unwrap();
        assert_abs_diff_eq!(
            q,
            -herm_curvature_quad(&h, &y, &x, &z, &x).unwrap(),
            epsilon = 1e-15
        );
        assert!(matches!(
            herm_sectional(&h, &x, &x.scaled(2.0)),
            Err(Error::DegeneratePlane { .. })
        ));
        let three = HermTangent::single(CMatrix::identity(3, 3)).unwrap();
        assert!(matches!(
            herm_inner(&h, &x, &three),
            Err(Error::ShapeMismatch(_))
        ));
        let bad = HermPoint::new(HermBase::single(), vec![real(2, &[1.0, 0.0, 0.0, -1.0])]);
        assert!(matches!(bad, Err(Error::NotPositiveDefinite(_))));
        assert!(HermTangent::single(real(2, &[0.0, 1.0, 0.0, 0.0])).is_err());
        assert!(HermBase::new(vec![1.0, 0.0]).is_err());
    }
}
