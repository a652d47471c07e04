//! Minimal exterior algebra on `R^m` with complex coefficients.
//!
//! A form is a sparse sum of coefficients times basis monomials
//! `e^{i_1} ∧ … ∧ e^{i_k}` with `i_1 < … < i_k`, keyed by bitmask.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    dim: usize,
    terms: BTreeMap<u32, Complex64>,
}

fn indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// Sign of the permutation sorting the concatenation of two disjoint sorted index sets.
fn merge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0;
    for j in indices(b) {
        swaps += (a >> (j + 1)).count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Form {
    pub fn zero(dim: usize) -> Self {
        assert!(dim <= 32);
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// The constant 0-form `c`.
    pub fn scalar(dim: usize, c: Complex64) -> Self {
        let mut f = Self::zero(dim);
        f.terms.insert(0, c);
        f
    }

    /// The 1-form `Σ coeffs[i] e^i`.
    pub fn one_form(coeffs: &[Complex64]) -> Self {
        let mut f = Self::zero(coeffs.len());
        for (i, &c) in coeffs.iter().enumerate() {
            if c != Complex64::new(0.0, 0.0) {
                f.terms.insert(1 << i, c);
            }
        }
        f
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); dim];
        c[i] = Complex64::new(1.0, 0.0);
        Self::one_form(&c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        let mut out = Form::zero(self.dim);
        for (&ma, &ca) in &self.terms {
            for (&mb, &cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let c = ca * cb * merge_sign(ma, mb);
                *out.terms.entry(ma | mb).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        out.terms.retain(|_, c| c.norm() != 0.0);
        out
    }

    pub fn scale(&self, c: Complex64) -> Form {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Form) -> Form {
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            *out.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out
    }

    pub fn conj(&self) -> Form {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn re(&self) -> Form {
        let mut out = self.clone();
        out.terms
            .values_mut()
            .for_each(|v| *v = Complex64::new(v.re, 0.0));
        out
    }

    pub fn im(&self) -> Form {
        let mut out = self.clone();
        out.terms
            .values_mut()
            .for_each(|v| *v = Complex64::new(v.im, 0.0));
        out
    }

    /// Interior product `i_v`.
    pub fn interior(&self, v: &[f64]) -> Form {
        assert_eq!(v.len(), self.dim);
        let mut out = Form::zero(self.dim);
        for (&m, &c) in &self.terms {
            for (r, i) in indices(m).into_iter().enumerate() {
                if v[i] == 0.0 {
                    continue;
                }
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                *out.terms
                    .entry(m & !(1 << i))
                    .or_insert(Complex64::new(0.0, 0.0)) += c * v[i] * sign;
            }
        }
        out
    }

    /// Evaluates a k-form on k vectors.
    pub fn eval(&self, vectors: &[Vec<f64>]) -> Complex64 {
        let k = vectors.len();
        let mut total = Complex64::new(0.0, 0.0);
        for (&m, &c) in &self.terms {
            if m.count_ones() as usize != k {
                continue;
            }
            let idx = indices(m);
            let mat = DMatrix::from_fn(k, k, |r, col| vectors[col][idx[r]]);
            total += c * mat.determinant();
        }
        total
    }

    /// Pullback along a linear map given by the images of the source basis vectors.
    pub fn pullback(&self, images: &[Vec<f64>], degree: usize) -> Form {
        let m = images.len();
        let mut out = Form::zero(m);
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != degree {
                continue;
            }
            let vs: Vec<Vec<f64>> = indices(mask)
                .into_iter()
                .map(|i| images[i].clone())
                .collect();
            let c = self.eval(&vs);
            if c.norm() != 0.0 {
                out.terms.insert(mask, c);
            }
        }
        out
    }

    /// Coefficient of `e^0 ∧ … ∧ e^{m-1}`.
    pub fn top_coefficient(&self) -> Complex64 {
        let full = if self.dim == 32 {
            u32::MAX
        } else {
            (1u32 << self.dim) - 1
        };
        self.terms
            .get(&full)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn wedge_is_antisymmetric() {
        let a = Form::basis(3, 0);
        let b = Form::basis(3, 2);
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        let frame = [vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(ab.eval(&frame), c(1.0));
        assert_eq!(ab.add(&ba).eval(&frame), c(0.0));
        assert_eq!(a.wedge(&a).terms.len(), 0);
    }

    #[test]
    fn eval_matches_determinant() {
        let vol = Form::basis(2, 0).wedge(&Form::basis(2, 1));
        let v = vol.eval(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(v, c(-2.0));
    }

    #[test]
    fn interior_of_volume() {
        let vol = Form::basis(3, 0)
            .wedge(&Form::basis(3, 1))
            .wedge(&Form::basis(3, 2));
        let i1 = vol.interior(&[0.0, 1.0, 0.0]);
        // i_{e1}(e0∧e1∧e2) = -e0∧e2
        assert_eq!(
            i1.eval(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]),
            c(-1.0)
        );
    }

    #[test]
    fn pullback_of_area_form() {
        let vol = Form::basis(2, 0).wedge(&Form::basis(2, 1));
        let pb = vol.pullback(&[vec![2.0, 0.0], vec![1.0, 3.0]], 2);
        assert_eq!(pb.top_coefficient(), c(6.0));
    }
}
