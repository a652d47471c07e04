//! The Levi-Civita connection of the isotopy-class metric in the graph chart.
//!
//! Deformations are vertical: moving `graph(dφ)` with velocity `dh` is the
//! flow of `H = h∘π`, whose Hamiltonian vector field is `(0, ∇h)`. In the
//! graph parametrization `f(x) = (x, ∇φ(x))` the Christoffel datum is the base
//! vector field `w` with `i_w Re Ω̃ = -i_u Re Ω`, and
//! `D/dt h_t = ∂_t h_t + w·h_t`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::ambient::AlmostCyModel;
use crate::error::{Error, Result};
use crate::graph::GraphLagrangian;
use crate::torus::ScalarField;

/// Below this ratio `|Re Ω̃| / |Ω̃|` the w-field solve is refused.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Deformation of Γ by the vertical field of `h∘π`.
#[derive(Debug, Clone)]
pub struct VerticalDeformation<'g> {
    pub gamma: &'g GraphLagrangian,
    pub h: ScalarField,
}

impl<'g> VerticalDeformation<'g> {
    pub fn new(gamma: &'g GraphLagrangian, h: ScalarField) -> Self {
        Self { gamma, h }
    }

    pub fn w_field(&self) -> Result<Vec<ScalarField>> {
        w_field(self.gamma, &self.h)
    }
}

/// `dH` of `H = h∘π` as a covector on `R^{2n}`.
fn lift_differential(dh: &[f64]) -> Vec<f64> {
    let n = dh.len();
    let mut out = vec![0.0; 2 * n];
    out[..n].copy_from_slice(dh);
    out
}

fn without(frame: &[Vec<f64>], skip: usize) -> Vec<Vec<f64>> {
    frame
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != skip)
        .map(|(_, v)| v.clone())
        .collect()
}

fn with_first(first: &[f64], rest: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    std::iter::once(first.to_vec()).chain(rest).collect()
}

fn check_density(gamma: &GraphLagrangian, i: usize, c: Complex64) -> Result<()> {
    if c.re.abs() < SINGULAR_TOLERANCE * c.norm() || c.re <= 0.0 {
        return Err(Error::SingularDensity {
            index: i,
            value: c.re,
        });
    }
    debug_assert!(i < gamma.grid().len());
    Ok(())
}

/// Solves `i_w Re Ω̃ = -f*(i_u Re Ω)` pointwise for the base field `w`,
/// where `u = (0, ∇h)` is the Hamiltonian field of `h∘π`.
///
/// Both sides are `(n-1)`-forms on the base, compared on the frames
/// `(∂_1, …, ∂̂_a, …, ∂_n)`; this gives an `n × n` linear system per point.
pub fn w_field(gamma: &GraphLagrangian, h: &ScalarField) -> Result<Vec<ScalarField>> {
    let model = gamma.model();
    let n = gamma.dim();
    let grid = gamma.grid();
    let dh = h.gradient();
    let len = grid.len();
    let mut out = vec![vec![0.0; len]; n];
    for i in 0..len {
        let c = gamma.density()[i];
        check_density(gamma, i, c)?;
        let p = gamma.ambient_point(i);
        let frame = gamma.tangent_frame(i);
        let cov: Vec<f64> = dh.iter().map(|d| d.values()[i]).collect();
        let u = model.hamiltonian_vector(&lift_differential(&cov));
        let mut mat = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for a in 0..n {
            let rest = without(&frame, a);
            for b in 0..n {
                mat[(a, b)] = model
                    .eval_volume_form(&p, &with_first(&frame[b], rest.clone()))
                    .re;
            }
            rhs[a] = -model.eval_volume_form(&p, &with_first(&u, rest)).re;
        }
        let w = mat.lu().solve(&rhs).ok_or(Error::SingularDensity {
            index: i,
            value: c.re,
        })?;
        for a in 0..n {
            out[a][i] = w[a];
        }
    }
    out.into_iter()
        .map(|v| ScalarField::from_values(grid, v))
        .collect()
}

/// Directional derivative `w·f = w^a ∂_a f`.
pub fn directional(w: &[ScalarField], f: &ScalarField) -> ScalarField {
    let df = f.gradient();
    w.iter()
        .zip(&df)
        .fold(ScalarField::zeros(f.grid()), |acc, (wa, da)| {
            &acc + &(wa * da)
        })
}

/// `D_{h^j} h^k` at Γ in the quotient form
/// `-(d h^k ∧ f*(i_{∇H^j} Im Ω)) / Re Ω̃`, with `∇H^j` the ambient gradient of `h^j∘π`.
pub fn cov_deriv_quotient(
    gamma: &GraphLagrangian,
    hj: &ScalarField,
    hk: &ScalarField,
) -> Result<ScalarField> {
    let model = gamma.model();
    let n = gamma.dim();
    let grid = gamma.grid();
    let dj = hj.gradient();
    let dk = hk.gradient();
    let mut out = vec![0.0; grid.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let c = gamma.density()[i];
        check_density(gamma, i, c)?;
        let p = gamma.ambient_point(i);
        let frame = gamma.tangent_frame(i);
        let cov: Vec<f64> = dj.iter().map(|d| d.values()[i]).collect();
        let grad_h = model.gradient(&lift_differential(&cov));
        let re_top = model.eval_volume_form(&p, &frame).re;
        // (dh^k ∧ β)(∂_1, …, ∂_n) = Σ_a (-1)^a ∂_a h^k β(∂_1, …, ∂̂_a, …, ∂_n)
        let mut top = 0.0;
        for a in 0..n {
            let beta = model
                .eval_volume_form(&p, &with_first(&grad_h, without(&frame, a)))
                .im;
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            top += sign * dk[a].values()[i] * beta;
        }
        *slot = -top / re_top;
    }
    ScalarField::from_values(grid, out)
}

/// Multi-parameter family `graph(d(φ + Σ t_i h_i))` generated by the
/// commuting flows of `h_i∘π`.
#[derive(Debug, Clone)]
pub struct CoordinateFamily {
    pub model: AlmostCyModel,
    pub base: ScalarField,
    pub directions: Vec<ScalarField>,
}

impl CoordinateFamily {
    pub fn new(model: AlmostCyModel, base: ScalarField, directions: Vec<ScalarField>) -> Self {
        Self {
            model,
            base,
            directions,
        }
    }

    pub fn potential_at(&self, t: &[f64]) -> ScalarField {
        assert_eq!(t.len(), self.directions.len());
        self.directions
            .iter()
            .zip(t)
            .fold(self.base.clone(), |acc, (h, &ti)| &acc + &h.scale(ti))
    }

    pub fn gamma_at(&self, t: &[f64]) -> Result<GraphLagrangian> {
        GraphLagrangian::build(&self.model, self.potential_at(t))
    }

    /// `D_{h^j} h^k` at parameter `t`, using the w-field of direction `j`.
    pub fn cov_deriv_coordinate(&self, t: &[f64], j: usize, k: usize) -> Result<ScalarField> {
        let gamma = self.gamma_at(t)?;
        let w = w_field(&gamma, &self.directions[j])?;
        Ok(directional(&w, &self.directions[k]))
    }

    /// `D_{h^j} h^k` at parameter `t` via the quotient formula.
    pub fn cov_deriv_quotient(&self, t: &[f64], j: usize, k: usize) -> Result<ScalarField> {
        let gamma = self.gamma_at(t)?;
        cov_deriv_quotient(&gamma, &self.directions[j], &self.directions[k])
    }
}

/// A time-sampled path of graph Lagrangians.
#[derive(Debug, Clone)]
pub struct LagrangianPath {
    model: AlmostCyModel,
    times: Vec<f64>,
    potentials: Vec<ScalarField>,
    velocities: Option<Vec<ScalarField>>,
}

impl LagrangianPath {
    /// Samples at strictly increasing `times`; each must be positive.
    pub fn sampled(
        model: AlmostCyModel,
        times: Vec<f64>,
        potentials: Vec<ScalarField>,
        velocities: Option<Vec<ScalarField>>,
    ) -> Result<Self> {
        if times.len() != potentials.len()
            || velocities.as_ref().is_some_and(|v| v.len() != times.len())
        {
            return Err(Error::ShapeMismatch(
                "path samples and times differ in length".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ShapeMismatch(
                "path times must increase strictly".into(),
            ));
        }
        for (t, phi) in times.iter().zip(&potentials) {
            GraphLagrangian::build(&model, phi.clone())
                .map_err(|e| Error::positivity_lost(*t, e))?;
        }
        Ok(Self {
            model,
            times,
            potentials,
            velocities,
        })
    }

    /// `φ_t = φ + t p` sampled at `times`, with exact velocity `p`.
    pub fn linear(
        model: AlmostCyModel,
        base: &ScalarField,
        velocity: &ScalarField,
        times: Vec<f64>,
    ) -> Result<Self> {
        let potentials = times.iter().map(|&t| base + &velocity.scale(t)).collect();
        let velocities = Some(vec![velocity.clone(); times.len()]);
        Self::sampled(model, times, potentials, velocities)
    }

    pub fn model(&self) -> &AlmostCyModel {
        &self.model
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn potentials(&self) -> &[ScalarField] {
        &self.potentials
    }

    pub fn velocities(&self) -> Option<&[ScalarField]> {
        self.velocities.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn gamma_at(&self, index: usize) -> Result<GraphLagrangian> {
        GraphLagrangian::build(&self.model, self.potentials[index].clone())
    }

    /// Index of the sample at time `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let scale = self.times.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * scale)
    }

    fn interior_index(&self, t: f64) -> Result<usize> {
        match self.index_of(t) {
            Some(i) if i > 0 && i + 1 < self.len() => Ok(i),
            _ => Err(Error::InsufficientSamples { t }),
        }
    }

    /// `φ̇_t`: exact when known, central difference otherwise.
    pub fn velocity_at(&self, t: f64) -> Result<ScalarField> {
        if let (Some(v), Some(i)) = (&self.velocities, self.index_of(t)) {
            return Ok(v[i].clone());
        }
        let i = self.interior_index(t)?;
        Ok(central_difference(&self.potentials, &self.times, i))
    }
}

fn central_difference(samples: &[ScalarField], times: &[f64], i: usize) -> ScalarField {
    let dt = times[i + 1] - times[i - 1];
    (&samples[i + 1] - &samples[i - 1]).scale(1.0 / dt)
}

/// `D/dt h_t = ∂_t h_t + w(Γ_t, φ̇_t)·h_t`, with `∂_t` a central difference.
pub fn cov_deriv_along_path(
    path: &LagrangianPath,
    h: &[ScalarField],
    t: f64,
) -> Result<ScalarField> {
    if h.len() != path.len() {
        return Err(Error::ShapeMismatch(
            "field samples do not match the path's time grid".into(),
        ));
    }
    let i = path.interior_index(t)?;
    let gamma = path.gamma_at(i)?;
    let w = w_field(&gamma, &path.velocity_at(t)?)?;
    let dh_dt = central_difference(h, path.times(), i);
    Ok(&dh_dt + &directional(&w, &h[i]))
}

#[derive(Debug, Clone, Copy)]
pub struct GeodesicOptions {
    /// Largest relative change of `(φ̇, φ̇)` accepted in one step.
    pub max_step_drift: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            max_step_drift: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Geodesic {
    pub path: LagrangianPath,
    /// `(φ̇_t, φ̇_t)` at every sample.
    pub energies: Vec<f64>,
}

impl Geodesic {
    pub fn max_relative_drift(&self) -> f64 {
        let e0 = self.energies[0];
        if e0 == 0.0 {
            return self.energies.iter().fold(0.0, |m, e| m.max(e.abs()));
        }
        self.energies
            .iter()
            .fold(0.0, |m, e| m.max((e - e0).abs() / e0.abs()))
    }

    pub fn final_potential(&self) -> &ScalarField {
        self.path.potentials().last().expect("non-empty path")
    }

    pub fn final_velocity(&self) -> &ScalarField {
        self.path
            .velocities()
            .and_then(|v| v.last())
            .expect("geodesic records velocities")
    }
}

fn acceleration(model: &AlmostCyModel, phi: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    let gamma = GraphLagrangian::build(model, phi.clone())?;
    let w = w_field(&gamma, v)?;
    Ok(-&directional(&w, v))
}

fn gauge(phi: &ScalarField) -> ScalarField {
    phi.add_constant(-phi.mean())
}

/// Integrates `D/dt φ̇ = 0`, i.e. `φ̈ = -w(φ, φ̇)·φ̇`, with classical RK4.
///
/// Potentials are kept mean-zero; velocities are renormalized in `H_Γ` after
/// every step.
pub fn geodesic_shoot(
    gamma0: &GraphLagrangian,
    h0: &ScalarField,
    total_time: f64,
    steps: usize,
    options: GeodesicOptions,
) -> Result<Geodesic> {
    if steps == 0 {
        return Err(Error::ShapeMismatch(
            "geodesic needs at least one step".into(),
        ));
    }
    let model = *gamma0.model();
    let dt = total_time / steps as f64;
    let mut phi = gauge(gamma0.potential());
    let mut v = gamma0.normalize(h0).into_field();
    let mut energy = gamma0.pairing(&v, &v);

    let mut times = vec![0.0];
    let mut potentials = vec![phi.clone()];
    let mut velocities = vec![v.clone()];
    let mut energies = vec![energy];

    for step in 0..steps {
        let t = step as f64 * dt;
        let lost = |e: Error| {
            if e.is_positivity() {
                Error::positivity_lost(t, e)
            } else {
                e
            }
        };
        let a1 = acceleration(&model, &phi, &v).map_err(lost)?;
        let (p2, v2) = (&phi + &v.scale(0.5 * dt), &v + &a1.scale(0.5 * dt));
        let a2 = acceleration(&model, &p2, &v2).map_err(lost)?;
        let (p3, v3) = (&phi + &v2.scale(0.5 * dt), &v + &a2.scale(0.5 * dt));
        let a3 = acceleration(&model, &p3, &v3).map_err(lost)?;
        let (p4, v4) = (&phi + &v3.scale(dt), &v + &a3.scale(dt));
        let a4 = acceleration(&model, &p4, &v4).map_err(lost)?;

        let dphi = &(&(&v + &v2.scale(2.0)) + &v3.scale(2.0)) + &v4;
        let dv = &(&(&a1 + &a2.scale(2.0)) + &a3.scale(2.0)) + &a4;
        let next_phi = gauge(&(&phi + &dphi.scale(dt / 6.0)));
        let next_t = (step + 1) as f64 * dt;
        let gamma = GraphLagrangian::build(&model, next_phi.clone())
            .map_err(|e| Error::positivity_lost(next_t, e))?;
        let next_v = gamma.normalize(&(&v + &dv.scale(dt / 6.0))).into_field();
        let next_energy = gamma.pairing(&next_v, &next_v);
        let drift = if energy > 0.0 {
            (next_energy - energy).abs() / energy
        } else {
            next_energy
        };
        if drift > options.max_step_drift {
            return Err(Error::StepRejected {
                t: next_t,
                drift,
                threshold: options.max_step_drift,
            });
        }
        phi = next_phi;
        v = next_v;
        energy = next_energy;
        times.push(next_t);
        potentials.push(phi.clone());
        velocities.push(v.clone());
        energies.push(energy);
    }

    let path = LagrangianPath {
        model,
        times,
        potentials,
        velocities: Some(velocities),
    };
    Ok(Geodesic { path, energies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{PeriodicGrid, Phase, TrigPolynomial};

    fn grid() -> PeriodicGrid {
        PeriodicGrid::standard(2, 32).unwrap()
    }

    fn sample(p: TrigPolynomial, g: &PeriodicGrid) -> ScalarField {
        p.sample(g).unwrap()
    }

    fn twisted() -> AlmostCyModel {
        AlmostCyModel::twisted(2, 0.1, 1).unwrap()
    }

    #[test]
    fn w_vanishes_on_flat_zero_section() {
        let g = grid();
        let gamma = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let h = sample(TrigPolynomial::cos([1, 2]), &g);
        for wa in w_field(&gamma, &h).unwrap() {
            assert!(wa.max_abs() < 1e-15);
        }
    }

    #[test]
    fn w_on_twisted_zero_section_is_minus_tan_theta_grad() {
        let g = grid();
        let gamma = GraphLagrangian::zero_section(&twisted(), &g).unwrap();
        let h = sample(
            TrigPolynomial::single(0.8, [1, 1], Phase::Sin).plus(TrigPolynomial::single(
                0.3,
                [0, 2],
                Phase::Cos,
            )),
            &g,
        );
        let w = w_field(&gamma, &h).unwrap();
        let tan = ScalarField::from_fn(&g, |x| (0.1 * x[0].sin()).tan());
        for (a, wa) in w.iter().enumerate() {
            let expected = -&(&tan * &h.partial(a));
            assert!((wa - &expected).max_abs() < 1e-13);
        }
    }

    #[test]
    fn w_is_linear_and_vanishes_for_zero() {
        let g = grid();
        let phi = sample(TrigPolynomial::single(0.2, [1, 1], Phase::Cos), &g);
        let gamma = GraphLagrangian::build(&twisted(), phi).unwrap();
        let h = sample(TrigPolynomial::cos([1, 0]), &g);
        let k = sample(TrigPolynomial::sin([1, 2]), &g);
        for wa in w_field(&gamma, &ScalarField::zeros(&g)).unwrap() {
            assert_eq!(wa.max_abs(), 0.0);
        }
        let combo = &h.scale(2.0) + &k.scale(-0.5);
        let wh = w_field(&gamma, &h).unwrap();
        let wk = w_field(&gamma, &k).unwrap();
        let wc = w_field(&gamma, &combo).unwrap();
        for a in 0..2 {
            let lin = &wh[a].scale(2.0) + &wk[a].scale(-0.5);
            assert!((&wc[a] - &lin).max_abs() < 1e-13);
        }
    }

    #[test]
    fn quotient_matches_w_field_route() {
        let g = grid();
        let phi = sample(TrigPolynomial::single(0.2, [1, 1], Phase::Cos), &g);
        for model in [AlmostCyModel::flat(2), twisted()] {
            let gamma = GraphLagrangian::build(&model, phi.clone()).unwrap();
            let hj = sample(
                TrigPolynomial::cos([1, 0]).plus(TrigPolynomial::sin([1, 1])),
                &g,
            );
            let hk = sample(TrigPolynomial::single(0.5, [0, 2], Phase::Cos), &g);
            let via_w = directional(&w_field(&gamma, &hj).unwrap(), &hk);
            let via_q = cov_deriv_quotient(&gamma, &hj, &hk).unwrap();
            assert!((&via_w - &via_q).max_abs() < 1e-12);
        }
    }

    #[test]
    fn coordinate_derivative_on_zero_sections() {
        let g = grid();
        let h = sample(TrigPolynomial::cos([1, 0]), &g);
        let k = sample(TrigPolynomial::cos([1, 1]), &g);
        let flat = CoordinateFamily::new(
            AlmostCyModel::flat(2),
            ScalarField::zeros(&g),
            vec![h.clone(), k.clone()],
        );
        assert!(
            flat.cov_deriv_coordinate(&[0.0, 0.0], 0, 1)
                .unwrap()
                .max_abs()
                < 1e-15
        );

        let tw = CoordinateFamily::new(
            twisted(),
            ScalarField::zeros(&g),
            vec![h.clone(), k.clone()],
        );
        let d = tw.cov_deriv_quotient(&[0.0, 0.0], 0, 1).unwrap();
        let tan = ScalarField::from_fn(&g, |x| (0.1 * x[0].sin()).tan());
        let grads = &(&h.partial(0) * &k.partial(0)) + &(&h.partial(1) * &k.partial(1));
        let expected = -&(&tan * &grads);
        assert!((&d - &expected).max_abs() < 1e-13);
    }

    #[test]
    fn torsion_free_at_generic_parameters() {
        let g = grid();
        let fam = CoordinateFamily::new(
            twisted(),
            sample(TrigPolynomial::single(0.2, [1, 1], Phase::Cos), &g),
            vec![
                sample(TrigPolynomial::single(0.5, [1, 0], Phase::Sin), &g),
                sample(TrigPolynomial::single(0.4, [1, -1], Phase::Cos), &g),
            ],
        );
        for t in [[0.0, 0.0], [0.05, -0.03]] {
            let djk = fam.cov_deriv_quotient(&t, 0, 1).unwrap();
            let dkj = fam.cov_deriv_quotient(&t, 1, 0).unwrap();
            assert!((&djk - &dkj).max_abs() < 1e-12);
        }
    }

    #[test]
    fn path_derivative_errors_and_constant_path() {
        let g = grid();
        let model = AlmostCyModel::flat(2);
        let zero = ScalarField::zeros(&g);
        let path = LagrangianPath::linear(model, &zero, &zero, vec![-0.1, 0.0, 0.1]).unwrap();
        let h = vec![sample(TrigPolynomial::cos([1, 0]), &g); 3];
        assert!(cov_deriv_along_path(&path, &h, 0.0).unwrap().max_abs() < 1e-15);
        assert!(matches!(
            cov_deriv_along_path(&path, &h, 0.1),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn zero_initial_velocity_gives_constant_path() {
        let g = grid();
        let gamma = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let geo = geodesic_shoot(
            &gamma,
            &ScalarField::zeros(&g),
            0.1,
            5,
            GeodesicOptions::default(),
        )
        .unwrap();
        assert!(geo.final_potential().max_abs() < 1e-15);
        assert_eq!(geo.path.len(), 6);
    }

    #[test]
    fn steep_shot_loses_positivity() {
        let g = grid();
        let gamma = GraphLagrangian::zero_section(&AlmostCyModel::flat(2), &g).unwrap();
        let h0 = sample(
            TrigPolynomial::single(1.0, [3, 0], Phase::Cos).plus(TrigPolynomial::single(
                1.0,
                [0, 3],
                Phase::Cos,
            )),
            &g,
        );
        let res = geodesic_shoot(
            &gamma,
            &h0,
            2.0,
            20,
            GeodesicOptions {
                max_step_drift: 1.0,
            },
        );
        assert!(matches!(res, Err(Error::PositivityLost { .. })), "{res:?}");
    }
}
