//! Curvature of the isotopy-class metric: the pointwise tensor `R(h,k)l`,
//! the integrated quadruple form, sectional curvature and flat families.
//!
//! `R(h,k)l = D_h D_k l - D_k D_h l` and `K(h,k) = (R(h,k)k, h) / Gram(h,k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphLagrangian, TangentFunction};
use crate::torus::ScalarField;

/// Default lower bound on `min cos θ` for curvature evaluation.
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 1e-2;

/// Planes with `Gram < DEGENERACY * (h,h)(k,k)` are rejected.
pub const DEGENERACY: f64 = 1e-10;

fn check_margin(gamma: &GraphLagrangian, threshold: f64) -> Result<f64> {
    let margin = gamma.positivity_margin();
    if margin <= threshold {
        return Err(Error::MarginTooSmall { margin, threshold });
    }
    Ok(margin)
}

fn same_gamma(gamma: &GraphLagrangian, fs: &[&TangentFunction<'_>]) -> Result<()> {
    if fs.iter().all(|f| std::ptr::eq(f.gamma(), gamma)) {
        Ok(())
    } else {
        Err(Error::GammaMismatch)
    }
}

/// `R(h,k)l` as a raw function on Γ, with its `H_Γ` residual.
#[derive(Debug, Clone)]
pub struct RiemannField {
    pub field: ScalarField,
    /// `∫ R Re Ω`; zero iff the output already lies in `H_Γ`.
    pub mean_residual: f64,
    pub margin: f64,
}

/// Assembles `R(h,k)l` pointwise:
///
/// ```text
/// -sec²θ [ P(h)⟨dk,dl⟩ - P(k)⟨dh,dl⟩ ]
///   + sec²θ ( Hess k(∇h,∇l) - Hess h(∇k,∇l) )
///   + tanθ sec²θ ( ⟨∇h,∇θ⟩⟨∇k,∇l⟩ - ⟨∇k,∇θ⟩⟨∇h,∇l⟩ )
/// ```
///
/// with `P(f) = Δf - (n/2ρ)⟨df,dρ⟩` and `Δ` the nonnegative Laplacian.
pub fn riemann_field_raw(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
) -> ScalarField {
    let n = gamma.dim() as f64;
    let theta = gamma.theta();
    let rho = gamma.rho();
    let sec2 = theta.map(|t| 1.0 / t.cos().powi(2));
    let tan = theta.map(f64::tan);

    let dh = h.gradient();
    let dk = k.gradient();
    let dl = l.gradient();
    let drho = rho.gradient();
    let dtheta = theta.gradient();

    let pair = |a: &[ScalarField], b: &[ScalarField]| gamma.cometric(a, b);
    let reduced_laplacian = |f: &ScalarField, df: &[ScalarField]| {
        let rho_term = pair(df, &drho).zip_map(rho, |v, r| n / (2.0 * r) * v);
        &gamma.laplace_beltrami(f) - &rho_term
    };

    let kl = pair(&dk, &dl);
    let hl = pair(&dh, &dl);
    let first = &(&reduced_laplacian(h, &dh) * &kl) - &(&reduced_laplacian(k, &dk) * &hl);

    let grad_h = gamma.raise(&dh);
    let grad_k = gamma.raise(&dk);
    let grad_l = gamma.raise(&dl);
    let second = &gamma.covariant_hessian(k).contract(&grad_h, &grad_l)
        - &gamma.covariant_hessian(h).contract(&grad_k, &grad_l);

    let third = &(&pair(&dh, &dtheta) * &kl) - &(&pair(&dk, &dtheta) * &hl);

    let bracket = &(&second - &first) + &(&tan * &third);
    &sec2 * &bracket
}

pub fn riemann_field(
    gamma: &GraphLagrangian,
    h: &TangentFunction<'_>,
    k: &TangentFunction<'_>,
    l: &TangentFunction<'_>,
) -> Result<RiemannField> {
    riemann_field_with_margin(gamma, h, k, l, DEFAULT_MARGIN_THRESHOLD)
}

pub fn riemann_field_with_margin(
    gamma: &GraphLagrangian,
    h: &TangentFunction<'_>,
    k: &TangentFunction<'_>,
    l: &TangentFunction<'_>,
    threshold: f64,
) -> Result<RiemannField> {
    same_gamma(gamma, &[h, k, l])?;
    let margin = check_margin(gamma, threshold)?;
    let field = riemann_field_raw(gamma, h.field(), k.field(), l.field());
    let mean_residual = gamma.pairing(&field, &ScalarField::constant(gamma.grid(), 1.0));
    Ok(RiemannField {
        field,
        mean_residual,
        margin,
    })
}

/// `sec θ ρ^{n/2} √det g`, the weight of the quadruple form.
fn quad_weight(gamma: &GraphLagrangian) -> ScalarField {
    let sec = gamma.theta().map(|t| 1.0 / t.cos());
    &(&sec * &gamma.rho_half_power()) * gamma.sqrt_det()
}

/// `-∫ sec θ [⟨dh,dm⟩⟨dk,dl⟩ - ⟨dh,dl⟩⟨dk,dm⟩] ρ^{n/2} vol`.
pub fn riemann_quad_raw(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
    m: &ScalarField,
) -> f64 {
    let (dh, dk, dl, dm) = (h.gradient(), k.gradient(), l.gradient(), m.gradient());
    let pair = |a: &[ScalarField], b: &[ScalarField]| gamma.cometric(a, b);
    let integrand = &(&pair(&dh, &dm) * &pair(&dk, &dl)) - &(&pair(&dh, &dl) * &pair(&dk, &dm));
    -(&integrand * &quad_weight(gamma)).integrate()
}

/// Natural magnitude `∫ sec θ |dh||dk||dl||dm| ρ^{n/2} vol` of a quadruple,
/// used to express quadrature errors relative to the size of the integrand.
pub fn riemann_quad_scale(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
    m: &ScalarField,
) -> f64 {
    let norm = |f: &ScalarField| gamma.grad_inner_fields(f, f).map(|v| v.max(0.0).sqrt());
    let product = &(&norm(h) * &norm(k)) * &(&norm(l) * &norm(m));
    (&product * &quad_weight(gamma)).integrate()
}

pub fn riemann_quad(
    gamma: &GraphLagrangian,
    h: &TangentFunction<'_>,
    k: &TangentFunction<'_>,
    l: &TangentFunction<'_>,
    m: &TangentFunction<'_>,
) -> Result<f64> {
    same_gamma(gamma, &[h, k, l, m])?;
    check_margin(gamma, DEFAULT_MARGIN_THRESHOLD)?;
    Ok(riemann_quad_raw(
        gamma,
        h.field(),
        k.field(),
        l.field(),
        m.field(),
    ))
}

/// `(R(h,k)l, m)` computed from the pointwise tensor.
pub fn riemann_pairing(
    gamma: &GraphLagrangian,
    h: &TangentFunction<'_>,
    k: &TangentFunction<'_>,
    l: &TangentFunction<'_>,
    m: &TangentFunction<'_>,
) -> Result<f64> {
    same_gamma(gamma, &[m])?;
    let r = riemann_field(gamma, h, k, l)?;
    Ok(gamma.pairing(&r.field, m.field()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sectional {
    pub value: f64,
    pub numerator: f64,
    pub gram: f64,
}

pub fn sectional(
    gamma: &GraphLagrangian,
    h: &TangentFunction<'_>,
    k: &TangentFunction<'_>,
) -> Result<Sectional> {
    same_gamma(gamma, &[h, k])?;
    check_margin(gamma, DEFAULT_MARGIN_THRESHOLD)?;
    let hh = gamma.inner(h, h)?;
    let kk = gamma.inner(k, k)?;
    let hk = gamma.inner(h, k)?;
    let gram = hh * kk - hk * hk;
    let threshold = DEGENERACY * hh * kk;
    if !(gram > threshold) {
        return Err(Error::DegeneratePlane { gram, threshold });
    }
    let numerator = riemann_quad_raw(gamma, h.field(), k.field(), k.field(), h.field());
    Ok(Sectional {
        value: numerator / gram,
        numerator,
        gram,
    })
}

/// Polynomial reparametrization `a(s) = Σ_i c_i s^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparametrization {
    pub name: String,
    pub coefficients: Vec<f64>,
}

impl Reparametrization {
    pub fn new(name: impl Into<String>, coefficients: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            coefficients,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * s + c)
    }

    /// `s`, `s²`, `s³ - s`.
    pub fn standard_family() -> Vec<Self> {
        vec![
            Self::new("s", vec![0.0, 1.0]),
            Self::new("s^2", vec![0.0, 0.0, 1.0]),
            Self::new("s^3 - s", vec![0.0, -1.0, 0.0, 1.0]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatPair {
    pub first: String,
    pub second: String,
    pub sectional: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatFamilyReport {
    pub pairs: Vec<FlatPair>,
    pub max_abs_sectional: f64,
}

impl FlatFamilyReport {
    pub fn is_vacuous(&self) -> bool {
        self.pairs.iter().all(|p| p.sectional.is_none())
    }
}

/// Sectional curvatures over all pairs from `{normalize(a_i ∘ l)}`.
pub fn flat_family_check(
    gamma: &GraphLagrangian,
    l: &ScalarField,
    reparams: &[Reparametrization],
) -> Result<FlatFamilyReport> {
    let members: Vec<TangentFunction<'_>> = reparams
        .iter()
        .map(|a| gamma.normalize(&l.map(|s| a.eval(s))))
        .collect();
    let mut pairs = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let (first, second) = (reparams[i].name.clone(), reparams[j].name.clone());
            match sectional(gamma, &members[i], &members[j]) {
                Ok(s) => {
                    worst = worst.max(s.value.abs());
                    pairs.push(FlatPair {
                        first,
                        second,
                        sectional: Some(s.value),
                        note: None,
                    });
                }
                Err(e @ Error::DegeneratePlane { .. }) => pairs.push(FlatPair {
                    first,
                    second,
                    sectional: None,
                    note: Some(e.to_string()),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(FlatFamilyReport {
        pairs,
        max_abs_sectional: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub inputs: Vec<String>,
    pub r_field: Vec<f64>,
    pub r_field_max_abs: f64,
    pub quad_r3: Option<f64>,
    pub quad_r4: Option<f64>,
    pub sectional: Option<f64>,
    pub mean_zero_residual: f64,
    pub positivity_margin: f64,
}

/// Runs the pointwise tensor and, when `m` is given, both quadruple routes.
pub fn curvature_report(
    gamma: &GraphLagrangian,
    names: &[String],
    h: &TangentFunction<'_>,
    k: &TangentFunction<'_>,
    l: &TangentFunction<'_>,
    m: Option<&TangentFunction<'_>>,
) -> Result<CurvatureReport> {
    let r = riemann_field(gamma, h, k, l)?;
    let (quad_r3, quad_r4) = match m {
        Some(m) => {
            same_gamma(gamma, &[m])?;
            (
                Some(gamma.pairing(&r.field, m.field())),
                Some(riemann_quad(gamma, h, k, l, m)?),
            )
        }
        None => (None, None),
    };
    let sectional = match (m, l) {
        (Some(m), l) if m.field() == h.field() && l.field() == k.field() => {
            sectional(gamma, h, k).ok().map(|s| s.value)
        }
        _ => None,
    };
    Ok(CurvatureReport {
        inputs: names.to_vec(),
        r_field_max_abs: r.field.max_abs(),
        r_field: r.field.into_values(),
        quad_r3,
        quad_r4,
        sectional,
        mean_zero_residual: r.mean_residual,
        positivity_margin: r.margin,
    })
}
