//! Geometry of a positive Lagrangian `Γ = graph(dφ)` over the base torus.
//!
//! Every Γ-level quantity is a function of the base coordinate `x`, with Γ
//! identified with the base through the projection. The embedding is
//! `f(x) = (x, ∇φ(x))`, so `df(∂_a) = ∂_{x_a} + Σ_b φ_ab ∂_{y_b}` and the
//! induced metric is `g = I + (Hess φ)^2`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ambient::{AlmostCyModel, AmbientPoint};
use crate::error::{Error, Result};
use crate::torus::{PeriodicGrid, ScalarField, TensorField, TrigPolynomial};

#[derive(Debug, Clone)]
pub struct GraphLagrangian {
    model: AlmostCyModel,
    phi: ScalarField,
    grad_phi: Vec<ScalarField>,
    hessian: TensorField,
    metric: TensorField,
    inverse_metric: TensorField,
    sqrt_det: ScalarField,
    density: Vec<Complex64>,
    theta: ScalarField,
    rho: ScalarField,
    /// `Γ^c_ab`, one symmetric tensor per upper index `c`.
    christoffel: OnceLock<Vec<TensorField>>,
}

/// A normalized function on Γ representing the tangent vector `dh`.
#[derive(Debug, Clone)]
pub struct TangentFunction<'g> {
    gamma: &'g GraphLagrangian,
    h: ScalarField,
}

impl<'g> TangentFunction<'g> {
    pub fn gamma(&self) -> &'g GraphLagrangian {
        self.gamma
    }

    pub fn field(&self) -> &ScalarField {
        &self.h
    }

    pub fn into_field(self) -> ScalarField {
        self.h
    }

    fn same_gamma(&self, other: &TangentFunction<'_>) -> Result<()> {
        if std::ptr::eq(self.gamma, other.gamma) {
            Ok(())
        } else {
            Err(Error::GammaMismatch)
        }
    }
}

impl GraphLagrangian {
    pub fn build(model: &AlmostCyModel, phi: ScalarField) -> Result<Self> {
        let grid = phi.grid().clone();
        if grid.dim() != model.n || grid.period() != model.period {
            return Err(Error::InvalidGrid(format!(
                "grid (n = {}, P = {}) does not match model (n = {}, P = {})",
                grid.dim(),
                grid.period(),
                model.n,
                model.period
            )));
        }
        let n = model.n;
        let grad_phi = phi.gradient();
        let hessian = TensorField::symmetric(&grid, |a, b| grad_phi[b].partial(a));

        let len = grid.len();
        let mut metric_vals = vec![vec![0.0; len]; n * n];
        let mut inverse_vals = vec![vec![0.0; len]; n * n];
        let mut sqrt_det = vec![0.0; len];
        let mut density = Vec::with_capacity(len);
        let mut theta = vec![0.0; len];
        let mut rho = vec![0.0; len];
        let mut worst: Option<(usize, f64)> = None;

        for i in 0..len {
            let hess = DMatrix::from_fn(n, n, |a, b| hessian.at(a, b, i));
            let g = DMatrix::identity(n, n) + &hess * &hess;
            let ginv = g
                .clone()
                .try_inverse()
                .expect("I + H^2 is positive definite");
            for a in 0..n {
                for b in 0..n {
                    metric_vals[a * n + b][i] = g[(a, b)];
                    inverse_vals[a * n + b][i] = ginv[(a, b)];
                }
            }
            sqrt_det[i] = g.determinant().sqrt();

            let x = grid.coords(i);
            let y: Vec<f64> = grad_phi.iter().map(|d| d.values()[i]).collect();
            let p = AmbientPoint::new(x, y);
            let images: Vec<Vec<f64>> = (0..n)
                .map(|a| {
                    let mut v = vec![0.0; 2 * n];
                    v[a] = 1.0;
                    for b in 0..n {
                        v[n + b] = hess[(b, a)];
                    }
                    v
                })
                .collect();
            let c = model.eval_volume_form(&p, &images);
            density.push(c);
            rho[i] = model.rho(&p);
            let cos = c.re / c.norm();
            if worst.is_none_or(|(_, m)| cos < m) {
                worst = Some((i, cos));
            }
            theta[i] = c.im.atan2(c.re);
        }

        if let Some((index, margin)) = worst {
            if margin <= 0.0 {
                return Err(Error::NotPositive {
                    index,
                    point: grid.coords(index),
                    margin,
                });
            }
        }

        let to_tensor = |vals: Vec<Vec<f64>>| {
            TensorField::symmetric(&grid, |a, b| {
                ScalarField::from_values(&grid, vals[a * n + b].clone()).expect("finite")
            })
        };
        let metric = to_tensor(metric_vals);
        let inverse_metric = to_tensor(inverse_vals);

        Ok(Self {
            model: *model,
            phi,
            grad_phi,
            hessian,
            metric,
            inverse_metric,
            sqrt_det: ScalarField::from_values(&grid, sqrt_det)?,
            density,
            theta: ScalarField::from_values(&grid, theta)?,
            rho: ScalarField::from_values(&grid, rho)?,
            christoffel: OnceLock::new(),
        })
    }

    pub fn from_potential(
        model: &AlmostCyModel,
        grid: &PeriodicGrid,
        potential: &TrigPolynomial,
    ) -> Result<Self> {
        Self::build(model, potential.sample(grid)?)
    }

    /// Zero section of `model` on `grid`.
    pub fn zero_section(model: &AlmostCyModel, grid: &PeriodicGrid) -> Result<Self> {
        Self::build(model, ScalarField::zeros(grid))
    }

    pub fn model(&self) -> &AlmostCyModel {
        &self.model
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.phi.grid()
    }

    pub fn dim(&self) -> usize {
        self.model.n
    }

    pub fn potential(&self) -> &ScalarField {
        &self.phi
    }

    pub fn grad_potential(&self) -> &[ScalarField] {
        &self.grad_phi
    }

    pub fn hessian_potential(&self) -> &TensorField {
        &self.hessian
    }

    pub fn metric(&self) -> &TensorField {
        &self.metric
    }

    pub fn inverse_metric(&self) -> &TensorField {
        &self.inverse_metric
    }

    /// Christoffel symbols of the induced metric, computed on first use.
    pub fn christoffel(&self) -> &[TensorField] {
        self.christoffel.get_or_init(|| {
            let n = self.dim();
            let grid = self.grid();
            // ∂_d g_ab
            let dmetric: Vec<Vec<ScalarField>> = (0..n * n)
                .map(|ab| {
                    (0..n)
                        .map(|d| self.metric.get(ab / n, ab % n).partial(d))
                        .collect()
                })
                .collect();
            (0..n)
                .map(|c| {
                    TensorField::symmetric(grid, |a, b| {
                        let mut acc = ScalarField::zeros(grid);
                        for d in 0..n {
                            let bracket = &(&dmetric[b * n + d][a] + &dmetric[a * n + d][b])
                                - &dmetric[a * n + b][d];
                            acc = &acc + &(self.inverse_metric.get(c, d) * &bracket);
                        }
                        acc.scale(0.5)
                    })
                })
                .collect()
        })
    }

    pub fn sqrt_det(&self) -> &ScalarField {
        &self.sqrt_det
    }

    /// Pulled-back density `c` with `f*Ω = c dx_1 ∧ … ∧ dx_n`.
    pub fn density(&self) -> &[Complex64] {
        &self.density
    }

    pub fn theta(&self) -> &ScalarField {
        &self.theta
    }

    /// `ρ` restricted to Γ.
    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    /// Ambient point `f(x)` of sample `i`.
    pub fn ambient_point(&self, i: usize) -> AmbientPoint {
        AmbientPoint::new(
            self.grid().coords(i),
            self.grad_phi
                .iter()
                .map(|d| d.values()[i])
                .collect::<Vec<_>>(),
        )
    }

    /// Images `df(∂_a)` at sample `i`.
    pub fn tangent_frame(&self, i: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|a| {
                let mut v = vec![0.0; 2 * n];
                v[a] = 1.0;
                for b in 0..n {
                    v[n + b] = self.hessian.at(b, a, i);
                }
                v
            })
            .collect()
    }

    /// `min cos θ` over the grid.
    pub fn positivity_margin(&self) -> f64 {
        self.theta.map(f64::cos).min()
    }

    /// `ρ^{n/2}`.
    pub fn rho_half_power(&self) -> ScalarField {
        let e = self.dim() as f64 / 2.0;
        self.rho.map(|r| r.powf(e))
    }

    /// Density of `Re Ω|_Γ` against `dx`: `cos θ ρ^{n/2} √det g`.
    pub fn re_omega_weight(&self) -> ScalarField {
        let c = self.theta.map(f64::cos);
        &(&c * &self.rho_half_power()) * &self.sqrt_det
    }

    /// Max relative residual of `f*Ω = e^{iθ} ρ^{n/2} √det g dx`.
    pub fn lagang_residual(&self) -> f64 {
        let e = self.dim() as f64 / 2.0;
        self.density
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let th = self.theta.values()[i];
                let rhs = Complex64::from_polar(
                    self.rho.values()[i].powf(e) * self.sqrt_det.values()[i],
                    th,
                );
                (c - rhs).norm() / c.norm()
            })
            .fold(0.0, f64::max)
    }

    /// Max of `| |det(I - i Hess φ)| - √det(I + (Hess φ)^2) |` over the grid.
    pub fn determinant_consistency(&self) -> f64 {
        let n = self.dim();
        (0..self.grid().len())
            .map(|i| {
                let m = DMatrix::from_fn(n, n, |a, b| {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    Complex64::new(delta, -self.hessian.at(a, b, i))
                });
                (m.determinant().norm() - self.sqrt_det.values()[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `∫_Γ f k Re Ω` for arbitrary (not necessarily normalized) functions.
    pub fn pairing(&self, f: &ScalarField, k: &ScalarField) -> f64 {
        (&(f * k) * &self.re_omega_weight()).integrate()
    }

    /// Projects `f` onto `H_Γ` by subtracting `∫ f Re Ω / ∫ Re Ω`.
    pub fn normalize(&self, f: &ScalarField) -> TangentFunction<'_> {
        let w = self.re_omega_weight();
        let c = (f * &w).integrate() / w.integrate();
        TangentFunction {
            gamma: self,
            h: f.add_constant(-c),
        }
    }

    pub fn tangent(&self, p: &TrigPolynomial) -> Result<TangentFunction<'_>> {
        Ok(self.normalize(&p.sample(self.grid())?))
    }

    pub fn inner(&self, h: &TangentFunction<'_>, k: &TangentFunction<'_>) -> Result<f64> {
        h.same_gamma(k)?;
        if !std::ptr::eq(h.gamma, self) {
            return Err(Error::GammaMismatch);
        }
        Ok(self.pairing(&h.h, &k.h))
    }

    /// `∇f` with components `g^{ab} ∂_b f`, from the differential `df`.
    pub fn raise(&self, df: &[ScalarField]) -> Vec<ScalarField> {
        let n = self.dim();
        (0..n)
            .map(|a| {
                (0..n).fold(ScalarField::zeros(self.grid()), |acc, b| {
                    &acc + &(self.inverse_metric.get(a, b) * &df[b])
                })
            })
            .collect()
    }

    pub fn gradient(&self, f: &ScalarField) -> Vec<ScalarField> {
        self.raise(&f.gradient())
    }

    /// `g^{ab} α_a β_b` for covector fields.
    pub fn cometric(&self, alpha: &[ScalarField], beta: &[ScalarField]) -> ScalarField {
        self.inverse_metric.contract(alpha, beta)
    }

    /// `⟨dh, dk⟩` pointwise.
    pub fn grad_inner_fields(&self, h: &ScalarField, k: &ScalarField) -> ScalarField {
        self.cometric(&h.gradient(), &k.gradient())
    }

    pub fn grad_inner(
        &self,
        h: &TangentFunction<'_>,
        k: &TangentFunction<'_>,
    ) -> Result<ScalarField> {
        h.same_gamma(k)?;
        Ok(self.grad_inner_fields(&h.h, &k.h))
    }

    /// Nonnegative Laplace-Beltrami operator `-(det g)^{-1/2} ∂_a(√det g g^{ab} ∂_b h)`.
    pub fn laplace_beltrami(&self, h: &ScalarField) -> ScalarField {
        let grad = self.gradient(h);
        let n = self.dim();
        let div = (0..n).fold(ScalarField::zeros(self.grid()), |acc, a| {
            &acc + &(&self.sqrt_det * &grad[a]).partial(a)
        });
        div.zip_map(&self.sqrt_det, |d, s| -d / s)
    }

    /// Covariant Hessian `∂_a∂_b h - Γ^c_ab ∂_c h` of the induced metric.
    pub fn covariant_hessian(&self, h: &ScalarField) -> TensorField {
        let dh = h.gradient();
        let n = self.dim();
        let christoffel = self.christoffel();
        TensorField::symmetric(self.grid(), |a, b| {
            let second = dh[b].partial(a);
            (0..n).fold(second, |acc, c| &acc - &(christoffel[c].get(a, b) * &dh[c]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Phase;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::standard(n, if n == 1 { 128 } else { 64 }).unwrap()
    }

    fn field(g: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        ScalarField::from_fn(g, f)
    }

    #[test]
    fn flat_zero_section_is_trivial() {
        let g = grid(2);
        let gamma = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        assert_eq!(gamma.theta().max_abs(), 0.0);
        assert_abs_diff_eq!(gamma.rho().min(), 1.0);
        assert_eq!(gamma.sqrt_det().min(), 1.0);
        assert_eq!(gamma.metric().at(0, 1, 5), 0.0);
        assert_eq!(gamma.positivity_margin(), 1.0);
    }

    #[test]
    fn twisted_zero_section_angle_and_rho() {
        let g = grid(2);
        let model = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let gamma = GraphLagrangian::zero_section(&model, &g).unwrap();
        let theta = field(&g, |x| 0.1 * x[0].sin());
        let rho = field(&g, |x| (0.1 * x[0].cos()).exp());
        assert!((gamma.theta() - &theta).max_abs() < 1e-15);
        assert!((gamma.rho() - &rho).max_abs() < 1e-15);
        // pulled-back density equals the ambient density on the zero section
        for i in (0..g.len()).step_by(97) {
            let c = model.eval_omega_density(&AmbientPoint::on_zero_section(&g.coords(i)));
            assert!((gamma.density()[i] - c).norm() < 1e-15);
        }
        assert!(gamma.lagang_residual() < 1e-14);
    }

    #[test]
    fn one_dimensional_angle() {
        let g = grid(1);
        let a = 0.3;
        let phi = field(&g, |x| a * x[0].cos());
        let gamma = GraphLagrangian::build(&AlmostCyModel::flat(1), phi).unwrap();
        // φ'' = -a cos x, det(1 - iφ'') = 1 + i a cos x
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            let expected = (a * x.cos()).atan();
            assert_abs_diff_eq!(gamma.theta().values()[i], expected, epsilon = 1e-12);
        }
        assert!(gamma.lagang_residual() < 1e-12);
    }

    #[test]
    fn generic_graph_invariants() {
        let g = grid(2);
        for model in [
            AlmostCyModel::flat(2),
            AlmostCyModel::twisted(2, 0.1, 1).unwrap(),
        ] {
            let phi = TrigPolynomial::single(0.2, [1, 1], Phase::Cos);
            let gamma = GraphLagrangian::from_potential(&model, &g, &phi).unwrap();
            assert!(gamma.lagang_residual() < 1e-10);
            assert!(gamma.determinant_consistency() < 1e-12);
            assert!(gamma.hessian_potential().asymmetry() == 0.0);
            assert!(gamma.positivity_margin() > 0.5);
        }
    }

    #[test]
    fn steep_potential_is_not_positive() {
        let g = grid(2);
        let phi = TrigPolynomial::single(3.0, [1, 0], Phase::Cos).plus(TrigPolynomial::single(
            3.0,
            [0, 1],
            Phase::Cos,
        ));
        match GraphLagrangian::from_potential(&AlmostCyModel::flat(2), &g, &phi) {
            Err(Error::NotPositive { margin, point, .. }) => {
                assert!(margin <= 0.0);
                assert_eq!(point.len(), 2);
            }
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn normalization() {
        let g = grid(2);
        let flat = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let c1 = TrigPolynomial::cos([1, 0]).sample(&g).unwrap();
        let h = flat.normalize(&c1);
        assert!((h.field() - &c1).max_abs() < 1e-15);
        let one = flat.normalize(&ScalarField::constant(&g, 1.0));
        assert!(one.field().max_abs() < 1e-14);

        let model = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let tw = GraphLagrangian::zero_section(&model, &g).unwrap();
        let h = tw.normalize(&c1);
        // quadrature oracle on a fine 1D grid (x2 integrates out)
        let m = 4096;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m {
            let x = 2.0 * PI * i as f64 / m as f64;
            let w = (0.1 * x.cos()).exp() * (0.1 * x.sin()).cos();
            num += x.cos() * w;
            den += w;
        }
        let shift = num / den;
        assert!(shift.abs() > 1e-3);
        assert_abs_diff_eq!(
            c1.values()[0] - h.field().values()[0],
            shift,
            epsilon = 1e-13
        );
        assert!(tw.pairing(h.field(), &ScalarField::constant(&g, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn inner_products() {
        let g = grid(2);
        let flat = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let h = flat.tangent(&TrigPolynomial::cos([1, 0])).unwrap();
        let k = flat.tangent(&TrigPolynomial::cos([0, 1])).unwrap();
        assert_abs_diff_eq!(flat.inner(&h, &h).unwrap(), 2.0 * PI * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(flat.inner(&h, &k).unwrap(), 0.0, epsilon = 1e-12);

        let model = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let tw = GraphLagrangian::zero_section(&model, &g).unwrap();
        let c1 = TrigPolynomial::cos([1, 0]).sample(&g).unwrap();
        // raw pairing of cos x1 with itself, against a fine quadrature oracle
        let m = 4096;
        let mut acc = 0.0;
        for i in 0..m {
            let x = 2.0 * PI * i as f64 / m as f64;
            acc += x.cos().powi(2) * (0.1 * x.cos()).exp() * (0.1 * x.sin()).cos();
        }
        let oracle = acc * 2.0 * PI / m as f64 * 2.0 * PI;
        assert_abs_diff_eq!(tw.pairing(&c1, &c1), oracle, epsilon = 1e-11);

        let other = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let k2 = other.tangent(&TrigPolynomial::cos([0, 1])).unwrap();
        assert!(matches!(flat.inner(&h, &k2), Err(Error::GammaMismatch)));
    }

    #[test]
    fn gradient_pairings() {
        let g = grid(2);
        let flat = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let h = flat.tangent(&TrigPolynomial::cos([1, 0])).unwrap();
        let k = flat.tangent(&TrigPolynomial::cos([0, 1])).unwrap();
        let hh = flat.grad_inner(&h, &h).unwrap();
        let expected = field(&g, |x| x[0].sin().powi(2));
        assert!((&hh - &expected).max_abs() < 1e-13);
        assert!(flat.grad_inner(&h, &k).unwrap().max_abs() < 1e-13);

        // n = 1: ⟨dh, dh⟩ = (h')^2 / (1 + φ''^2)
        let g1 = grid(1);
        let a = 0.2;
        let gamma = GraphLagrangian::build(&AlmostCyModel::flat(1), field(&g1, |x| a * x[0].cos()))
            .unwrap();
        let h = field(&g1, |x| (2.0 * x[0]).sin());
        let lhs = gamma.grad_inner_fields(&h, &h);
        let rhs = field(&g1, |x| {
            (2.0 * (2.0 * x[0]).cos()).powi(2) / (1.0 + (a * x[0].cos()).powi(2))
        });
        assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_conventions() {
        let g = grid(2);
        let flat = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let c1 = TrigPolynomial::cos([1, 0]).sample(&g).unwrap();
        assert!((&flat.laplace_beltrami(&c1) - &c1).max_abs() < 1e-12);
        assert!(
            flat.laplace_beltrami(&ScalarField::constant(&g, 2.0))
                .max_abs()
                < 1e-13
        );
    }

    #[test]
    fn laplacian_integration_by_parts_at_generic_graph() {
        let g = grid(2);
        let model = AlmostCyModel::twisted(2, 0.1, 1).unwrap();
        let phi = TrigPolynomial::single(0.2, [1, 1], Phase::Cos).plus(TrigPolynomial::single(
            0.1,
            [0, 2],
            Phase::Sin,
        ));
        let gamma = GraphLagrangian::from_potential(&model, &g, &phi).unwrap();
        let h = TrigPolynomial::single(0.7, [1, 2], Phase::Sin)
            .plus(TrigPolynomial::single(-0.4, [3, 0], Phase::Cos))
            .sample(&g)
            .unwrap();
        let k = TrigPolynomial::single(1.1, [2, -1], Phase::Cos)
            .sample(&g)
            .unwrap();
        let lhs = (&(&gamma.laplace_beltrami(&h) * &k) * gamma.sqrt_det()).integrate();
        let rhs = (&gamma.grad_inner_fields(&h, &k) * gamma.sqrt_det()).integrate();
        assert!(
            (lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn covariant_hessian_properties() {
        let g = PeriodicGrid::standard(2, 128).unwrap();
        let flat = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let h = TrigPolynomial::single(1.0, [1, 1], Phase::Sin)
            .sample(&g)
            .unwrap();
        let hess = flat.covariant_hessian(&h);
        let plain = h.partial(0).partial(1);
        assert!((hess.get(0, 1) - &plain).max_abs() < 1e-12);

        let phi = TrigPolynomial::single(0.2, [1, 1], Phase::Cos).plus(TrigPolynomial::single(
            0.15,
            [2, 0],
            Phase::Sin,
        ));
        let gamma = GraphLagrangian::from_potential(&AlmostCyModel::flat(2), &g, &phi).unwrap();
        let hess = gamma.covariant_hessian(&h);
        assert!(hess.is_symmetric());
        assert!(hess.asymmetry() <= 1e-12);
        let trace = gamma.inverse_metric().contract_pairs(&hess);
        let lap = gamma.laplace_beltrami(&h);
        let err = (&(-&trace) - &lap).max_abs();
        assert!(err < 1e-8, "trace identity error {err:e}");
    }
}
