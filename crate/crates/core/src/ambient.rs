//! The ambient almost Calabi-Yau model `X = T*T^n` with coordinates `(x, y)`.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * `ω = Σ dy_j ∧ dx_j`
//! * `J ∂_{x_j} = -∂_{y_j}`, so `z_j = x_j - i y_j` is holomorphic
//! * `Ω = e^{g(z)} dz_1 ∧ … ∧ dz_n` with twist `g(z) = ε e^{iκ z_1}`, `κ = 2πm/P`
//! * Hamiltonian vector fields solve `i_ξ ω = dH`
//! * the base is oriented by `dx_1 ∧ … ∧ dx_n`
//!
//! Tangent vectors of `X` are `2n`-vectors `(v_x, v_y)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::Form;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl AmbientPoint {
    pub fn new(x: impl Into<Vec<f64>>, y: impl Into<Vec<f64>>) -> Self {
        Self {
            x: x.into(),
            y: y.into(),
        }
    }

    /// Point on the zero section over `x`.
    pub fn on_zero_section(x: &[f64]) -> Self {
        Self {
            x: x.to_vec(),
            y: vec![0.0; x.len()],
        }
    }
}

/// Sign and orientation choices, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionRecord {
    pub symplectic_form: String,
    pub complex_structure: String,
    pub holomorphic_coordinate: String,
    pub volume_form: String,
    pub hamiltonian: String,
    pub base_orientation: String,
    pub laplacian: String,
    pub curvature: String,
}

impl Default for ConventionRecord {
    fn default() -> Self {
        Self {
            symplectic_form: "omega = sum_j dy_j ^ dx_j".into(),
            complex_structure: "J d/dx_j = -d/dy_j".into(),
            holomorphic_coordinate: "z_j = x_j - i y_j".into(),
            volume_form: "Omega = exp(eps * exp(i kappa z_1)) dz_1 ^ ... ^ dz_n".into(),
            hamiltonian: "i_xi omega = dH".into(),
            base_orientation: "dx_1 ^ ... ^ dx_n".into(),
            laplacian: "nonnegative: Delta h = -div grad h".into(),
            curvature: "R(h,k)l = D_h D_k l - D_k D_h l, K(h,k) = (R(h,k)k,h)/Gram".into(),
        }
    }
}

/// Ambient structure `(X, ω, J, Ω)`; flat `ω`, `J` and metric, twisted `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmostCyModel {
    pub n: usize,
    pub period: f64,
    pub twist_amplitude: f64,
    pub twist_mode: u32,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl AlmostCyModel {
    pub fn new(n: usize, period: f64, twist_amplitude: f64, twist_mode: u32) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidModel(format!("dimension {n} not in 1..=3")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidModel(format!(
                "period must be positive, got {period}"
            )));
        }
        if !(0.0..1.0).contains(&twist_amplitude) {
            return Err(Error::InvalidModel(format!(
                "twist amplitude must lie in [0, 1), got {twist_amplitude}"
            )));
        }
        if twist_mode == 0 {
            return Err(Error::InvalidModel("twist mode must be positive".into()));
        }
        Ok(Self {
            n,
            period,
            twist_amplitude,
            twist_mode,
        })
    }

    /// Flat Calabi-Yau model on `(R/2πZ)^n`.
    pub fn flat(n: usize) -> Self {
        Self::new(n, 2.0 * PI, 0.0, 1).expect("valid flat model")
    }

    /// Twisted model on `(R/2πZ)^n`.
    pub fn twisted(n: usize, amplitude: f64, mode: u32) -> Result<Self> {
        Self::new(n, 2.0 * PI, amplitude, mode)
    }

    pub fn is_flat(&self) -> bool {
        self.twist_amplitude == 0.0
    }

    pub fn kappa(&self) -> f64 {
        2.0 * PI * self.twist_mode as f64 / self.period
    }

    pub fn conventions(&self) -> ConventionRecord {
        ConventionRecord::default()
    }

    fn check(&self, p: &AmbientPoint) {
        assert_eq!(p.x.len(), self.n, "point dimension");
        assert_eq!(p.y.len(), self.n, "point dimension");
    }

    /// Coefficient matrix `ω_ab = ω(e_a, e_b)` in the frame `(∂_x, ∂_y)`.
    pub fn omega_coefficient(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut w = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            // dy_j ∧ dx_j (∂_y, ∂_x) = 1
            w[(n + j, j)] = 1.0;
            w[(j, n + j)] = -1.0;
        }
        w
    }

    pub fn symplectic_form(&self) -> Form {
        let n = self.n;
        (0..n).fold(Form::zero(2 * n), |acc, j| {
            acc.add(&Form::basis(2 * n, n + j).wedge(&Form::basis(2 * n, j)))
        })
    }

    pub fn omega(&self, u: &[f64], v: &[f64]) -> f64 {
        let w = self.omega_coefficient();
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        (u.transpose() * w * v)[(0, 0)]
    }

    pub fn apply_j(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            // J∂_x = -∂_y, J∂_y = ∂_x
            out[n + j] -= v[j];
            out[j] += v[n + j];
        }
        out
    }

    /// `g(u, v) = ω(u, J v)`.
    pub fn metric(&self, u: &[f64], v: &[f64]) -> f64 {
        self.omega(u, &self.apply_j(v))
    }

    pub fn metric_matrix(&self) -> DMatrix<f64> {
        let m = 2 * self.n;
        DMatrix::from_fn(m, m, |a, b| {
            let mut ea = vec![0.0; m];
            let mut eb = vec![0.0; m];
            ea[a] = 1.0;
            eb[b] = 1.0;
            self.metric(&ea, &eb)
        })
    }

    /// Vector field `ξ` with `i_ξ ω = dH` for the covector `dH`.
    pub fn hamiltonian_vector(&self, dh: &[f64]) -> Vec<f64> {
        let wt = self.omega_coefficient().transpose();
        let rhs = DVector::from_column_slice(dh);
        let sol = wt.lu().solve(&rhs).expect("ω is nondegenerate");
        sol.iter().copied().collect()
    }

    /// Ambient gradient of the covector `dH` with respect to `g`.
    pub fn gradient(&self, dh: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(dh);
        let sol = self
            .metric_matrix()
            .lu()
            .solve(&rhs)
            .expect("g is nondegenerate");
        sol.iter().copied().collect()
    }

    /// Twist `g(z) = ε e^{iκ z_1}` with `z_1 = x_1 - i y_1`.
    pub fn eval_twist(&self, p: &AmbientPoint) -> Complex64 {
        self.check(p);
        if self.is_flat() {
            return c(0.0, 0.0);
        }
        let z1 = c(p.x[0], -p.y[0]);
        self.twist_amplitude * (c(0.0, self.kappa()) * z1).exp()
    }

    /// `c(p)` with `Ω = c(p) dz_1 ∧ … ∧ dz_n`.
    pub fn eval_omega_density(&self, p: &AmbientPoint) -> Complex64 {
        self.eval_twist(p).exp()
    }

    /// Closed form `ρ = exp(2 Re g / n)`.
    pub fn rho(&self, p: &AmbientPoint) -> f64 {
        (2.0 * self.eval_twist(p).re / self.n as f64).exp()
    }

    /// `dz_j` as 1-forms on `R^{2n}`.
    fn dz(&self) -> Vec<Form> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let mut coeffs = vec![c(0.0, 0.0); 2 * n];
                coeffs[j] = c(1.0, 0.0);
                coeffs[n + j] = c(0.0, -1.0);
                Form::one_form(&coeffs)
            })
            .collect()
    }

    pub fn holomorphic_volume_form(&self, p: &AmbientPoint) -> Form {
        let n = self.n;
        let dz = self.dz();
        let top = dz.iter().skip(1).fold(dz[0].clone(), |acc, f| acc.wedge(f));
        debug_assert_eq!(top.dim(), 2 * n);
        top.scale(self.eval_omega_density(p))
    }

    /// `ρ` from `ρ^n ω^n/n! = (-1)^{n(n-1)/2} (i/2)^n Ω ∧ Ω̄`, both sides
    /// evaluated on the frame `(∂_{x_1}, …, ∂_{x_n}, ∂_{y_1}, …, ∂_{y_n})`.
    pub fn eval_rho(&self, p: &AmbientPoint) -> Result<f64> {
        self.check(p);
        let n = self.n;
        let m = 2 * n;
        let frame: Vec<Vec<f64>> = (0..m)
            .map(|a| {
                let mut e = vec![0.0; m];
                e[a] = 1.0;
                e
            })
            .collect();
        let omega = self.symplectic_form();
        let mut omega_n = Form::scalar(m, c(1.0, 0.0));
        let mut factorial = 1.0;
        for k in 1..=n {
            omega_n = omega_n.wedge(&omega);
            factorial *= k as f64;
        }
        let lhs_unit = omega_n.eval(&frame).re / factorial;
        let vol = self.holomorphic_volume_form(p);
        let sign = if (n * (n - 1) / 2).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let prefactor = c(0.0, 0.5).powu(n as u32) * sign;
        let rhs = vol.wedge(&vol.conj()).eval(&frame) * prefactor;
        let ratio = rhs / lhs_unit;
        let tol = 1e-12 * ratio.norm().max(1.0);
        if !(ratio.re > 0.0) || ratio.im.abs() > tol {
            return Err(Error::NonPositiveDensity { value: ratio.re });
        }
        Ok(ratio.re.powf(1.0 / n as f64))
    }

    /// `Ω_p(v_1, …, v_n) = e^{g} det[dz_j(v_k)]`.
    pub fn eval_volume_form(&self, p: &AmbientPoint, vectors: &[Vec<f64>]) -> Complex64 {
        let n = self.n;
        assert_eq!(vectors.len(), n);
        let mat = nalgebra::DMatrix::from_fn(n, n, |j, k| c(vectors[k][j], -vectors[k][n + j]));
        self.eval_omega_density(p) * mat.determinant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(m: usize, a: usize) -> Vec<f64> {
        let mut e = vec![0.0; m];
        e[a] = 1.0;
        e
    }

    #[test]
    fn symplectic_conventions() {
        let m1 = AlmostCyModel::flat(1);
        assert_eq!(m1.omega(&[0.0, 1.0], &[1.0, 0.0]), 1.0);
        let m2 = AlmostCyModel::flat(2);
        assert_eq!(m2.omega(&unit(4, 0), &unit(4, 1)), 0.0);
        let v = [0.3, -1.2, 0.7, 2.0];
        assert_eq!(m2.omega(&v, &v), 0.0);
        // the wedge-built form agrees with the coefficient matrix
        let w = m2.symplectic_form();
        for a in 0..4 {
            for b in 0..4 {
                let lhs = w.eval(&[unit(4, a), unit(4, b)]).re;
                assert_eq!(lhs, m2.omega_coefficient()[(a, b)]);
            }
        }
    }

    #[test]
    fn metric_is_identity_and_j_squares_to_minus_one() {
        for n in 1..=3 {
            let m = AlmostCyModel::flat(n);
            let g = m.metric_matrix();
            assert_eq!(g, DMatrix::identity(2 * n, 2 * n));
            let v: Vec<f64> = (0..2 * n).map(|i| i as f64 - 1.5).collect();
            let jj = m.apply_j(&m.apply_j(&v));
            for (a, b) in jj.iter().zip(&v) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn dz_is_complex_linear() {
        let m = AlmostCyModel::flat(2);
        let p = AmbientPoint::new([0.1, 0.2], [0.0, 0.0]);
        let v = vec![0.4, -0.3, 1.1, 0.2];
        let w = vec![-0.7, 0.5, 0.3, 0.9];
        let base = m.eval_volume_form(&p, &[v.clone(), w.clone()]);
        let jv = m.apply_j(&v);
        let rotated = m.eval_volume_form(&p, &[jv, w]);
        assert!((rotated - base * c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn hamiltonian_field_of_base_function_is_vertical() {
        let m = AlmostCyModel::flat(2);
        // dH = ∂_1 h dx_1 + ∂_2 h dx_2
        let dh = [0.3, -0.8, 0.0, 0.0];
        let xi = m.hamiltonian_vector(&dh);
        assert_eq!(xi, vec![0.0, 0.0, 0.3, -0.8]);
        // ξ = -J ∇H
        let grad = m.gradient(&dh);
        let minus_j: Vec<f64> = m.apply_j(&grad).iter().map(|v| -v).collect();
        assert_eq!(xi, minus_j);
    }

    #[test]
    fn twist_values() {
        let flat = AlmostCyModel::flat(2);
        assert_eq!(
            flat.eval_twist(&AmbientPoint::new([1.0, 2.0], [0.5, 0.1])),
            c(0.0, 0.0)
        );
        let m = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let g0 = m.eval_twist(&AmbientPoint::new([0.0, 0.0], [0.0, 0.0]));
        assert_abs_diff_eq!(g0.re, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g0.im, 0.0, epsilon = 1e-15);
        let gq = m.eval_twist(&AmbientPoint::new([PI / 2.0, 0.0], [0.0, 0.0]));
        assert_abs_diff_eq!(gq.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gq.im, 0.1, epsilon = 1e-15);
        let cq = m.eval_omega_density(&AmbientPoint::new([PI / 2.0, 0.0], [0.0, 0.0]));
        assert!((cq - c(0.0, 0.1).exp()).norm() < 1e-15);
    }

    #[test]
    fn rho_defining_relation() {
        for n in 1..=3 {
            let flat = AlmostCyModel::flat(n);
            let p = AmbientPoint::new(vec![0.3; n], vec![-0.2; n]);
            assert_abs_diff_eq!(flat.eval_rho(&p).unwrap(), 1.0, epsilon = 1e-14);
        }
        let m = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let p = AmbientPoint::new([0.0, 0.0], [0.0, 0.0]);
        assert_abs_diff_eq!(m.eval_rho(&p).unwrap(), 0.1f64.exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(m.eval_rho(&p).unwrap(), 1.1051709180756477, epsilon = 1e-14);
    }

    #[test]
    fn rho_tends_to_one_deep_in_negative_fiber() {
        let m = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let p = AmbientPoint::new([0.3, 0.0], [-40.0, 0.0]);
        assert_abs_diff_eq!(m.rho(&p), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.eval_rho(&p).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn density_modulus_is_rho_power() {
        let m = AlmostCyModel::twisted(3, 0.3, 2).unwrap();
        for i in 0..20 {
            let t = i as f64 * 0.37;
            let p = AmbientPoint::new([t, 1.0 - t, 0.2], [0.1 * t.sin(), 0.4, -0.3]);
            let lhs = m.eval_omega_density(&p).norm();
            let rhs = m.eval_rho(&p).unwrap().powf(1.5);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(AlmostCyModel::new(2, 2.0 * PI, 1.0, 1).is_err());
        assert!(AlmostCyModel::new(2, 2.0 * PI, 0.1, 0).is_err());
        assert!(AlmostCyModel::new(4, 2.0 * PI, 0.1, 1).is_err());
    }
}
