//! Independent checks tying closed-form expressions to finite differences
//! and integral identities.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ambient::AlmostCyModel;
use crate::connection::{
    cov_deriv_along_path, cov_deriv_quotient, directional, w_field, CoordinateFamily,
    LagrangianPath,
};
use crate::curvature::{
    flat_family_check, riemann_field_raw, riemann_quad_raw, riemann_quad_scale, sectional,
    Reparametrization,
};
use crate::error::{Error, Result};
use crate::graph::{GraphLagrangian, TangentFunction};
use crate::torus::{PeriodicGrid, Phase, ScalarField, TrigPolynomial, TrigTerm};

/// Which of the two recorded errors decides `pass`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub judged_on: ErrorKind,
    pub pass: bool,
    pub params: BTreeMap<String, Value>,
}

impl CheckResult {
    pub fn new(
        name: impl Into<String>,
        abs_error: f64,
        scale: f64,
        tolerance: f64,
        judged_on: ErrorKind,
    ) -> Self {
        let rel_error = if scale > 0.0 {
            abs_error / scale
        } else {
            abs_error
        };
        let measured = match judged_on {
            ErrorKind::Absolute => abs_error,
            ErrorKind::Relative => rel_error,
        };
        Self {
            name: name.into(),
            abs_error,
            rel_error,
            tolerance,
            judged_on,
            pass: measured <= tolerance,
            params: BTreeMap::new(),
        }
    }

    pub fn error(&self) -> f64 {
        match self.judged_on {
            ErrorKind::Absolute => self.abs_error,
            ErrorKind::Relative => self.rel_error,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Re-judges the check against a new tolerance.
    pub fn retolerate(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.error() <= tolerance;
        self
    }

    /// Marks the check failed, recording why in `params`.
    fn fail_with(mut self, reason: &str) -> Self {
        self.pass = false;
        self.params.insert("failure".into(), reason.into());
        self
    }
}

fn model_params(model: &AlmostCyModel) -> Value {
    json!({
        "n": model.n,
        "period": model.period,
        "twist_amplitude": model.twist_amplitude,
        "twist_mode": model.twist_mode,
    })
}

/// Removes the `H_Γ` mean so fields defined modulo constants compare.
fn gauge_fixed(gamma: &GraphLagrangian, f: &ScalarField) -> ScalarField {
    gamma.normalize(f).into_field()
}

fn build_shifted(
    model: &AlmostCyModel,
    base: &ScalarField,
    direction: &ScalarField,
    s: f64,
) -> Result<GraphLagrangian> {
    GraphLagrangian::build(model, base + &direction.scale(s)).map_err(|e| {
        if e.is_positivity() {
            Error::positivity_lost(s, e)
        } else {
            e
        }
    })
}

/// `dθ/dt` along `graph(t dh)` against `Δh - (n/2ρ)⟨dρ,dh⟩`.
pub fn check_dtheta(
    gamma: &GraphLagrangian,
    h: &TangentFunction<'_>,
    delta: f64,
) -> Result<CheckResult> {
    if gamma.potential().max_abs() != 0.0 {
        return Err(Error::Config(
            "the angle-derivative check needs a zero section".into(),
        ));
    }
    if !std::ptr::eq(h.gamma(), gamma) {
        return Err(Error::GammaMismatch);
    }
    let model = gamma.model();
    let n = gamma.dim() as f64;
    let h = h.field();
    let plus = build_shifted(model, gamma.potential(), h, delta)?;
    let minus = build_shifted(model, gamma.potential(), h, -delta)?;
    let fd = (plus.theta() - minus.theta()).scale(0.5 / delta);

    let rho = gamma.rho();
    let rho_term = gamma
        .cometric(&rho.gradient(), &h.gradient())
        .zip_map(rho, |v, r| n / (2.0 * r) * v);
    let closed = &gamma.laplace_beltrami(h) - &rho_term;
    let err = (&fd - &closed).max_abs();
    Ok(
        CheckResult::new("dtheta", err, closed.max_abs(), 1e-6, ErrorKind::Absolute)
            .with("delta", delta)
            .with("grid", gamma.grid().points())
            .with("model", model_params(model))
            .with("rho_term_max_abs", rho_term.max_abs()),
    )
}

/// Product rule `d/dt(h,k) = (Dh/dt,k) + (h,Dk/dt)` at time `t`, using the
/// pairing `∫ f g Re Ω` on the raw samples.
pub fn check_metric_compat(
    path: &LagrangianPath,
    h: &[ScalarField],
    k: &[ScalarField],
    t: f64,
) -> Result<CheckResult> {
    let i = path.index_of(t).ok_or(Error::InsufficientSamples { t })?;
    if i == 0 || i + 1 >= path.len() || h.len() != path.len() || k.len() != path.len() {
        return Err(Error::InsufficientSamples { t });
    }
    let times = path.times();
    let pair_at = |j: usize| -> Result<f64> {
        let gamma = path
            .gamma_at(j)
            .map_err(|e| Error::positivity_lost(times[j], e))?;
        Ok(gamma.pairing(&h[j], &k[j]))
    };
    let lhs = (pair_at(i + 1)? - pair_at(i - 1)?) / (times[i + 1] - times[i - 1]);
    let gamma = path.gamma_at(i)?;
    let dh = cov_deriv_along_path(path, h, t)?;
    let dk = cov_deriv_along_path(path, k, t)?;
    let rhs = gamma.pairing(&dh, &k[i]) + gamma.pairing(&h[i], &dk);
    let scale = lhs.abs().max(rhs.abs());
    Ok(CheckResult::new(
        "metric_compat",
        (lhs - rhs).abs(),
        scale,
        1e-5,
        ErrorKind::Absolute,
    )
    .with("delta", times[i + 1] - times[i])
    .with("grid", gamma.grid().points())
    .with("model", model_params(path.model()))
    .with("derivative", lhs))
}

/// `max |D_{h^j} h^k - D_{h^k} h^j|` at parameter `t` of a coordinate family.
pub fn check_torsion_free(
    family: &CoordinateFamily,
    t: &[f64],
    j: usize,
    k: usize,
) -> Result<CheckResult> {
    let jk = family.cov_deriv_quotient(t, j, k)?;
    let kj = family.cov_deriv_quotient(t, k, j)?;
    let err = (&jk - &kj).max_abs();
    Ok(
        CheckResult::new("torsion_free", err, jk.max_abs(), 1e-9, ErrorKind::Absolute)
            .with("grid", family.base.grid().points())
            .with("model", model_params(&family.model)),
    )
}

/// `D_h D_k l` at Γ: `∂_s (D_k l)(φ + s h)` by central difference plus
/// `w_h·(D_k l)`.
pub fn nested_cov_deriv(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
    delta: f64,
) -> Result<ScalarField> {
    let model = gamma.model();
    let phi = gamma.potential();
    let plus = build_shifted(model, phi, h, delta)?;
    let minus = build_shifted(model, phi, h, -delta)?;
    let ds =
        (&cov_deriv_quotient(&plus, k, l)? - &cov_deriv_quotient(&minus, k, l)?).scale(0.5 / delta);
    let center = cov_deriv_quotient(gamma, k, l)?;
    let w = w_field(gamma, h)?;
    Ok(&ds + &directional(&w, &center))
}

/// `D_h D_k l - D_k D_h l` assembled by nested finite differences.
pub fn fd_riemann(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
    delta: f64,
) -> Result<ScalarField> {
    Ok(&nested_cov_deriv(gamma, h, k, l, delta)? - &nested_cov_deriv(gamma, k, h, l, delta)?)
}

/// Richardson window for `err(δ) / err(δ/2)`.
pub const RICHARDSON_WINDOW: (f64, f64) = (3.5, 4.5);

/// Below this the `δ/2` error is treated as roundoff and the ratio is not judged.
pub const RICHARDSON_FLOOR: f64 = 1e-11;

fn richardson(check: CheckResult, err: f64, err_half: f64) -> CheckResult {
    let ratio = if err_half > 0.0 {
        err / err_half
    } else {
        f64::INFINITY
    };
    let judged = err_half > RICHARDSON_FLOOR;
    let in_window = ratio >= RICHARDSON_WINDOW.0 && ratio <= RICHARDSON_WINDOW.1;
    let check = check
        .with("error_half_delta", err_half)
        .with(
            "richardson_ratio",
            if ratio.is_finite() {
                json!(ratio)
            } else {
                Value::Null
            },
        )
        .with("richardson_judged", judged);
    if judged && !in_window {
        check.fail_with("richardson ratio outside window")
    } else {
        check
    }
}

/// Nested-FD curvature against the pointwise tensor, compared in `H_Γ`.
pub fn check_r3_vs_fd(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
    delta: f64,
) -> Result<CheckResult> {
    let exact = gauge_fixed(gamma, &riemann_field_raw(gamma, h, k, l));
    let err_at = |d: f64| -> Result<f64> {
        let fd = gauge_fixed(gamma, &fd_riemann(gamma, h, k, l, d)?);
        Ok((&fd - &exact).max_abs())
    };
    let err = err_at(delta)?;
    let err_half = err_at(0.5 * delta)?;
    let check = CheckResult::new("r3_vs_fd", err, exact.max_abs(), 1e-4, ErrorKind::Absolute)
        .with("delta", delta)
        .with("grid", gamma.grid().points())
        .with("model", model_params(gamma.model()));
    Ok(richardson(check, err, err_half))
}

/// At the flat zero section, `D_i D_j h^k` against
/// `-⟨dh^k,dh^j⟩Δh^i - Hess h^i(∇h^j,∇h^k)`, compared in `H_Γ`.
pub fn check_dijk_zero_section(
    gamma: &GraphLagrangian,
    i: &ScalarField,
    j: &ScalarField,
    k: &ScalarField,
    delta: f64,
) -> Result<CheckResult> {
    if !gamma.model().is_flat() || gamma.potential().max_abs() != 0.0 {
        return Err(Error::Config(
            "the reduced formula holds at the flat zero section".into(),
        ));
    }
    let closed = {
        let jk = gamma.grad_inner_fields(k, j);
        let first = &jk * &gamma.laplace_beltrami(i);
        let hess = gamma
            .covariant_hessian(i)
            .contract(&gamma.gradient(j), &gamma.gradient(k));
        -&(&first + &hess)
    };
    let exact = gauge_fixed(gamma, &closed);
    let err_at = |d: f64| -> Result<f64> {
        let fd = gauge_fixed(gamma, &nested_cov_deriv(gamma, i, j, k, d)?);
        Ok((&fd - &exact).max_abs())
    };
    let err = err_at(delta)?;
    let err_half = err_at(0.5 * delta)?;
    let check = CheckResult::new(
        "dijk_zero_section",
        err,
        exact.max_abs(),
        1e-4,
        ErrorKind::Absolute,
    )
    .with("delta", delta)
    .with("grid", gamma.grid().points());
    Ok(richardson(check, err, err_half))
}

/// `|(R(h,k)l, m) - r4| / max(|r4|, ∫ sec θ |dh||dk||dl||dm| ρ^{n/2} vol)`.
pub fn check_pairing_identity(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
    l: &ScalarField,
    m: &ScalarField,
) -> CheckResult {
    let r3 = gamma.pairing(&riemann_field_raw(gamma, h, k, l), m);
    let r4 = riemann_quad_raw(gamma, h, k, l, m);
    let scale = r4.abs().max(riemann_quad_scale(gamma, h, k, l, m));
    CheckResult::new(
        "r3_vs_r4",
        (r3 - r4).abs(),
        scale,
        1e-6,
        ErrorKind::Relative,
    )
    .with("r3", r3)
    .with("r4", r4)
    .with("grid", gamma.grid().points())
    .with("model", model_params(gamma.model()))
}

/// Sectional curvature sign: the error is the positive part of `K`.
pub fn check_nonpositive(
    gamma: &GraphLagrangian,
    h: &ScalarField,
    k: &ScalarField,
) -> Result<CheckResult> {
    let (h, k) = (gamma.normalize(h), gamma.normalize(k));
    let s = sectional(gamma, &h, &k)?;
    Ok(CheckResult::new(
        "sectional_nonpositive",
        s.value.max(0.0),
        1.0,
        1e-10,
        ErrorKind::Absolute,
    )
    .with("sectional", s.value)
    .with("model", model_params(gamma.model())))
}

pub fn check_flat_family(gamma: &GraphLagrangian, l: &ScalarField) -> Result<CheckResult> {
    let report = flat_family_check(gamma, l, &Reparametrization::standard_family())?;
    let check = CheckResult::new(
        "flat_family",
        report.max_abs_sectional,
        1.0,
        1e-8,
        ErrorKind::Absolute,
    )
    .with("model", model_params(gamma.model()))
    .with(
        "pairs",
        serde_json::to_value(&report.pairs).unwrap_or(Value::Null),
    );
    Ok(if report.is_vacuous() {
        check.fail_with("no admissible pairs")
    } else {
        check
    })
}

/// Seeded generator of band-limited test inputs.
#[derive(Debug, Clone)]
pub struct TrigSampler {
    rng: ChaCha8Rng,
    dim: usize,
    max_mode: i64,
}

impl TrigSampler {
    pub fn new(seed: u64, dim: usize, max_mode: i64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim,
            max_mode,
        }
    }

    fn wavevector(&mut self) -> Vec<i64> {
        loop {
            let k: Vec<i64> = (0..self.dim)
                .map(|_| self.rng.gen_range(-self.max_mode..=self.max_mode))
                .collect();
            if k.iter().any(|&c| c != 0) {
                return k;
            }
        }
    }

    /// `terms` modes with coefficients uniform in `[-amplitude, amplitude]`.
    pub fn polynomial(&mut self, terms: usize, amplitude: f64) -> TrigPolynomial {
        let terms = (0..terms)
            .map(|_| {
                let c = self.rng.gen_range(-amplitude..=amplitude);
                let phase = if self.rng.gen_bool(0.5) {
                    Phase::Cos
                } else {
                    Phase::Sin
                };
                TrigTerm::new(c, self.wavevector(), phase)
            })
            .collect();
        TrigPolynomial::new(terms)
    }

    /// A base potential with `Σ |c| |k|² = budget`, which bounds the Hessian
    /// and so the angle of the graph.
    pub fn potential(&mut self, terms: usize, budget: f64) -> TrigPolynomial {
        let p = self.polynomial(terms, 1.0);
        let weight: f64 = p
            .terms
            .iter()
            .map(|t| {
                t.coefficient.abs() * t.wavevector.iter().map(|&k| (k * k) as f64).sum::<f64>()
            })
            .sum();
        if weight == 0.0 {
            p
        } else {
            p.scaled(budget / weight)
        }
    }

    pub fn field(&mut self, grid: &PeriodicGrid, terms: usize, amplitude: f64) -> ScalarField {
        self.polynomial(terms, amplitude)
            .sample(grid)
            .expect("modes stay below the band limit")
    }

    /// A tangent direction on the scale of `cos x1`: `Σ |c| |k|² = 1`.
    pub fn tangent(&mut self, grid: &PeriodicGrid, terms: usize) -> ScalarField {
        self.potential(terms, 1.0)
            .sample(grid)
            .expect("modes stay below the band limit")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub grid_points: usize,
    pub twist_amplitude: f64,
    pub twist_mode: u32,
    pub pairing_quadruples: usize,
    pub fd_triples: usize,
    pub sectional_pairs: usize,
    pub fd_delta: f64,
    pub dtheta_delta: f64,
    pub metric_delta: f64,
    /// Replaces every tolerance when set.
    pub tolerance_override: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid_points: 64,
            twist_amplitude: 0.1,
            twist_mode: 1,
            pairing_quadruples: 5,
            fd_triples: 2,
            sectional_pairs: 5,
            fd_delta: 1e-3,
            dtheta_delta: 1e-4,
            metric_delta: 1e-3,
            tolerance_override: None,
        }
    }
}

/// A named base Lagrangian of the suite.
#[derive(Debug, Clone)]
pub struct BasePoint {
    pub name: String,
    pub model: AlmostCyModel,
    pub potential: ScalarField,
}

impl BasePoint {
    pub fn gamma(&self) -> Result<GraphLagrangian> {
        GraphLagrangian::build(&self.model, self.potential.clone())
    }
}

/// Flat and twisted zero sections and `graph(d(0.2 cos(x1+x2)))` in both models.
pub fn standard_bases(grid: &PeriodicGrid, twisted: AlmostCyModel) -> Vec<BasePoint> {
    let flat = AlmostCyModel::flat(grid.dim());
    let zero = ScalarField::zeros(grid);
    let mut wave = vec![1i64; grid.dim()];
    wave.truncate(2);
    wave.resize(grid.dim(), 0);
    let generic = TrigPolynomial::single(0.2, wave, Phase::Cos)
        .sample(grid)
        .expect("mode 1");
    vec![
        BasePoint {
            name: "flat_zero".into(),
            model: flat,
            potential: zero.clone(),
        },
        BasePoint {
            name: "twisted_zero".into(),
            model: twisted,
            potential: zero,
        },
        BasePoint {
            name: "flat_generic".into(),
            model: flat,
            potential: generic.clone(),
        },
        BasePoint {
            name: "twisted_generic".into(),
            model: twisted,
            potential: generic,
        },
    ]
}

enum Job {
    Dtheta {
        base: usize,
        h: ScalarField,
    },
    MetricCompat {
        base: usize,
        velocity: ScalarField,
        h: ScalarField,
        k: ScalarField,
    },
    Torsion {
        base: usize,
        j: ScalarField,
        k: ScalarField,
    },
    R3Fd {
        base: usize,
        h: ScalarField,
        k: ScalarField,
        l: ScalarField,
    },
    Dijk {
        i: ScalarField,
        j: ScalarField,
        k: ScalarField,
    },
    Pairing {
        base: usize,
        fields: [ScalarField; 4],
    },
    Sectional {
        base: usize,
        h: ScalarField,
        k: ScalarField,
    },
    Flat {
        base: usize,
        l: ScalarField,
    },
}

fn run_job(job: &Job, bases: &[BasePoint], cfg: &SuiteConfig) -> Result<CheckResult> {
    let gamma_of = |b: usize| bases[b].gamma();
    let label = |r: CheckResult, b: usize| r.with("base", bases[b].name.clone());
    match job {
        Job::Dtheta { base, h } => {
            let gamma = gamma_of(*base)?;
            let h = gamma.normalize(h);
            Ok(label(check_dtheta(&gamma, &h, cfg.dtheta_delta)?, *base))
        }
        Job::MetricCompat {
            base,
            velocity,
            h,
            k,
        } => {
            let b = &bases[*base];
            let d = cfg.metric_delta;
            let path = LagrangianPath::linear(b.model, &b.potential, velocity, vec![-d, 0.0, d])?;
            let hs = vec![h.clone(); 3];
            let ks: Vec<ScalarField> = [-d, 0.0, d]
                .iter()
                .map(|&t| k + &h.scale(0.5 * t))
                .collect();
            Ok(label(check_metric_compat(&path, &hs, &ks, 0.0)?, *base))
        }
        Job::Torsion { base, j, k } => {
            let b = &bases[*base];
            let family =
                CoordinateFamily::new(b.model, b.potential.clone(), vec![j.clone(), k.clone()]);
            Ok(label(
                check_torsion_free(&family, &[0.0, 0.0], 0, 1)?,
                *base,
            ))
        }
        Job::R3Fd { base, h, k, l } => {
            let gamma = gamma_of(*base)?;
            Ok(label(check_r3_vs_fd(&gamma, h, k, l, cfg.fd_delta)?, *base))
        }
        Job::Dijk { i, j, k } => {
            let gamma = gamma_of(0)?;
            Ok(label(
                check_dijk_zero_section(&gamma, i, j, k, cfg.fd_delta)?,
                0,
            ))
        }
        Job::Pairing {
            base,
            fields: [h, k, l, m],
        } => {
            let gamma = gamma_of(*base)?;
            Ok(label(check_pairing_identity(&gamma, h, k, l, m), *base))
        }
        Job::Sectional { base, h, k } => {
            let gamma = gamma_of(*base)?;
            Ok(label(check_nonpositive(&gamma, h, k)?, *base))
        }
        Job::Flat { base, l } => {
            let gamma = gamma_of(*base)?;
            Ok(label(check_flat_family(&gamma, l)?, *base))
        }
    }
}

fn job_name(job: &Job) -> &'static str {
    match job {
        Job::Dtheta { .. } => "dtheta",
        Job::MetricCompat { .. } => "metric_compat",
        Job::Torsion { .. } => "torsion_free",
        Job::R3Fd { .. } => "r3_vs_fd",
        Job::Dijk { .. } => "dijk_zero_section",
        Job::Pairing { .. } => "r3_vs_r4",
        Job::Sectional { .. } => "sectional_nonpositive",
        Job::Flat { .. } => "flat_family",
    }
}

/// Runs every check on the standard base points of a two-dimensional torus.
///
/// Inputs are drawn up front from the seed, so results do not depend on
/// thread scheduling. A check that errors is reported as failed.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let grid = PeriodicGrid::standard(2, cfg.grid_points)?;
    let twisted = AlmostCyModel::twisted(2, cfg.twist_amplitude, cfg.twist_mode)?;
    let bases = standard_bases(&grid, twisted);
    let mut rng = TrigSampler::new(cfg.seed, 2, 3);
    let cos = |k: [i64; 2]| TrigPolynomial::cos(k).sample(&grid).expect("mode 1");

    let mut jobs = Vec::new();
    for base in [0, 1] {
        jobs.push(Job::Dtheta {
            base,
            h: cos([1, 0]),
        });
        jobs.push(Job::Dtheta {
            base,
            h: rng.tangent(&grid, 3),
        });
    }
    jobs.push(Job::Dijk {
        i: cos([1, 0]),
        j: cos([0, 1]),
        k: cos([0, 1]),
    });
    for base in 0..bases.len() {
        jobs.push(Job::MetricCompat {
            base,
            velocity: rng.potential(3, 0.2).sample(&grid)?,
            h: rng.tangent(&grid, 3),
            k: rng.tangent(&grid, 3),
        });
        jobs.push(Job::Torsion {
            base,
            j: rng.tangent(&grid, 3),
            k: rng.tangent(&grid, 3),
        });
        for _ in 0..cfg.fd_triples {
            let [h, k, l] = std::array::from_fn(|_| rng.tangent(&grid, 3));
            jobs.push(Job::R3Fd { base, h, k, l });
        }
        for _ in 0..cfg.pairing_quadruples {
            let fields = std::array::from_fn(|_| rng.tangent(&grid, 3));
            jobs.push(Job::Pairing { base, fields });
        }
        for _ in 0..cfg.sectional_pairs {
            jobs.push(Job::Sectional {
                base,
                h: rng.tangent(&grid, 3),
                k: rng.tangent(&grid, 3),
            });
        }
    }
    let l = TrigPolynomial::cos([1, 0])
        .plus(TrigPolynomial::single(0.5, [0, 1], Phase::Cos))
        .sample(&grid)?;
    jobs.push(Job::Flat {
        base: 0,
        l: l.clone(),
    });
    jobs.push(Job::Flat { base: 1, l });

    let results = jobs
        .par_iter()
        .map(|job| {
            let result = run_job(job, &bases, cfg).unwrap_or_else(|e| {
                CheckResult::new(job_name(job), f64::INFINITY, 1.0, 0.0, ErrorKind::Absolute)
                    .fail_with(&e.to_string())
            });
            match cfg.tolerance_override {
                Some(t) => result.retolerate(t),
                None => result,
            }
        })
        .collect();
    Ok(results)
}
