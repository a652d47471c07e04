//! JSON-configured experiment driver behind the `laglab` binary.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ambient::{AlmostCyModel, ConventionRecord};
use crate::connection::{geodesic_shoot, GeodesicOptions};
use crate::curvature::{curvature_report, sectional};
use crate::error::{Error, Result};
use crate::graph::GraphLagrangian;
use crate::mirror::{
    herm_fd_sectional, herm_inner, herm_sectional, herm_sectional_both, random_tangent, CMatrix,
    HermBase, HermPoint, HermTangent,
};
use crate::torus::{PeriodicGrid, ScalarField, TrigPolynomial};
use crate::validation::{run_suite, CheckResult, SuiteConfig};

pub const SCHEMA: &str = "laglab-report";
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_POSITIVITY: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    #[serde(default = "two_pi")]
    pub period: f64,
    #[serde(default)]
    pub twist_amplitude: f64,
    #[serde(default = "one")]
    pub twist_mode: u32,
}

fn two_pi() -> f64 {
    2.0 * PI
}

fn one() -> u32 {
    1
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            n: 2,
            period: two_pi(),
            twist_amplitude: 0.0,
            twist_mode: 1,
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<AlmostCyModel> {
        AlmostCyModel::new(self.n, self.period, self.twist_amplitude, self.twist_mode)
    }
}

fn default_grid() -> usize {
    64
}

fn default_delta() -> f64 {
    1e-3
}

fn default_drift() -> f64 {
    GeodesicOptions::default().max_step_drift
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.re.len();
        let im = self.im.clone().unwrap_or_else(|| vec![vec![0.0; n]; n]);
        if n == 0 || im.len() != n || self.re.iter().chain(&im).any(|row| row.len() != n) {
            return Err(Error::Config(
                "matrix must be square with matching re/im parts".into(),
            ));
        }
        Ok(CMatrix::from_fn(n, n, |j, k| {
            Complex64::new(self.re[j][k], im[j][k])
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorJob {
    #[serde(default = "unit_weights")]
    pub weights: Vec<f64>,
    /// One matrix per base point; the identity when absent.
    #[serde(default)]
    pub base: Option<Vec<MatrixSpec>>,
    pub xi: Vec<MatrixSpec>,
    pub eta: Vec<MatrixSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "fd_tolerance")]
    pub fd_tolerance: f64,
    #[serde(default)]
    pub random_pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn unit_weights() -> Vec<f64> {
    vec![1.0]
}

fn fd_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Job {
    Curvature {
        h: String,
        k: String,
        l: String,
        #[serde(default)]
        m: Option<String>,
    },
    Sectional {
        h: String,
        k: String,
    },
    Scan {
        /// Defaults to every named function.
        #[serde(default)]
        functions: Option<Vec<String>>,
        #[serde(default)]
        csv: Option<PathBuf>,
    },
    Geodesic {
        h0: String,
        time: f64,
        steps: usize,
        #[serde(default)]
        reverse: bool,
        #[serde(default = "default_drift")]
        max_step_drift: f64,
    },
    Validate(SuiteConfig),
    Mirror(MirrorJob),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Curvature { .. } => "curvature",
            Job::Sectional { .. } => "sectional",
            Job::Scan { .. } => "scan",
            Job::Geodesic { .. } => "geodesic",
            Job::Validate(_) => "validate",
            Job::Mirror(_) => "mirror",
        }
    }

    fn references(&self) -> Vec<&str> {
        match self {
            Job::Curvature { h, k, l, m } => {
                let mut r = vec![h.as_str(), k.as_str(), l.as_str()];
                r.extend(m.as_deref());
                r
            }
            Job::Sectional { h, k } => vec![h, k],
            Job::Scan {
                functions: Some(f), ..
            } => f.iter().map(String::as_str).collect(),
            Job::Geodesic { h0, .. } => vec![h0],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub potential: TrigPolynomial,
    #[serde(default)]
    pub functions: BTreeMap<String, TrigPolynomial>,
    pub job: Job,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Adds wall-clock timing to the report, which then is no longer reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.model.n, self.grid, self.model.period)
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> Result<()> {
        if matches!(self.job, Job::Mirror(_) | Job::Validate(_)) {
            return Ok(());
        }
        self.model.build()?;
        let grid = self.grid()?;
        self.potential.check_band_limit(&grid)?;
        for (name, f) in &self.functions {
            f.check_band_limit(&grid)
                .map_err(|e| Error::Config(format!("function '{name}': {e}")))?;
        }
        for name in self.job.references() {
            if !self.functions.contains_key(name) {
                return Err(Error::Config(format!("unknown function '{name}'")));
            }
        }
        Ok(())
    }

    fn sample(&self, name: &str, grid: &PeriodicGrid) -> Result<ScalarField> {
        self.functions
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown function '{name}'")))?
            .sample(grid)
    }
}

fn describe_poly(p: &TrigPolynomial) -> String {
    if p.terms.is_empty() {
        return "0".into();
    }
    p.terms
        .iter()
        .map(|t| {
            format!(
                "{}·{}({:?}·x)",
                t.coefficient,
                serde_json::to_value(t.phase)
                    .unwrap_or_default()
                    .as_str()
                    .unwrap_or("?"),
                t.wavevector
            )
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Human-readable plan of an experiment, after validation.
pub fn describe(config: &ExperimentConfig) -> Result<String> {
    config.validate()?;
    let mut out = String::new();
    let m = &config.model;
    out.push_str(&format!("job: {}\n", config.job.name()));
    if !matches!(config.job, Job::Mirror(_) | Job::Validate(_)) {
        out.push_str(&format!(
            "model: n = {}, period = {}, twist ε = {}, mode = {}\n",
            m.n, m.period, m.twist_amplitude, m.twist_mode
        ));
        out.push_str(&format!("grid: {}^{}\n", config.grid, m.n));
        out.push_str(&format!(
            "potential: {}\n",
            describe_poly(&config.potential)
        ));
        for (name, f) in &config.functions {
            out.push_str(&format!("function {name}: {}\n", describe_poly(f)));
        }
    }
    match &config.job {
        Job::Curvature { h, k, l, m } => {
            out.push_str(&format!("compute R({h},{k}){l}"));
            if let Some(m) = m {
                out.push_str(&format!(" and its pairing with {m} by both routes"));
            }
            out.push('\n');
        }
        Job::Sectional { h, k } => out.push_str(&format!("compute K({h},{k})\n")),
        Job::Scan { functions, .. } => {
            let n = functions.as_ref().map_or(config.functions.len(), Vec::len);
            out.push_str(&format!(
                "scan K over {} pairs\n",
                n * n.saturating_sub(1) / 2
            ));
        }
        Job::Geodesic {
            h0,
            time,
            steps,
            reverse,
            ..
        } => out.push_str(&format!(
            "shoot geodesic from {h0} for T = {time} in {steps} steps{}\n",
            if *reverse { ", then back" } else { "" }
        )),
        Job::Validate(s) => out.push_str(&format!(
            "validation suite: seed {}, grid {}^2, twist ε = {}\n",
            s.seed, s.grid_points, s.twist_amplitude
        )),
        Job::Mirror(j) => out.push_str(&format!(
            "mirror model: {} base points, δ = {}, {} random pairs\n",
            j.weights.len(),
            j.delta,
            j.random_pairs
        )),
    }
    if let Some(p) = &config.output {
        out.push_str(&format!("output: {}\n", p.display()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub crate_version: String,
    pub conventions: ConventionRecord,
    pub config: ExperimentConfig,
    pub results: Value,
    /// False when any check of the job failed.
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_seconds: Option<f64>,
}

/// A finished run: the report plus any table it produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub pair_id: usize,
    pub h_name: String,
    pub k_name: String,
    pub sectional: Option<f64>,
    pub margin: f64,
}

pub fn scan_csv(rows: &[ScanRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair_id", "h_name", "k_name", "sectional", "margin"])
        .map_err(|e| Error::Config(e.to_string()))?;
    for r in rows {
        let k = r.sectional.map(|v| format!("{v:e}")).unwrap_or_default();
        w.write_record([
            r.pair_id.to_string(),
            r.h_name.clone(),
            r.k_name.clone(),
            k,
            format!("{:e}", r.margin),
        ])
        .map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn run_scan(
    config: &ExperimentConfig,
    gamma: &GraphLagrangian,
    names: &[String],
) -> Result<Vec<ScanRow>> {
    let grid = gamma.grid();
    let fields = names
        .iter()
        .map(|n| config.sample(n, grid))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..names.len())
        .flat_map(|i| (i + 1..names.len()).map(move |j| (i, j)))
        .collect();
    let margin = gamma.positivity_margin();
    pairs
        .par_iter()
        .enumerate()
        .map(|(id, &(i, j))| {
            let (h, k) = (gamma.normalize(&fields[i]), gamma.normalize(&fields[j]));
            let value = match sectional(gamma, &h, &k) {
                Ok(s) => Some(s.value),
                Err(Error::DegeneratePlane { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(ScanRow {
                pair_id: id,
                h_name: names[i].clone(),
                k_name: names[j].clone(),
                sectional: value,
                margin,
            })
        })
        .collect()
}

fn herm_tangent(specs: &[MatrixSpec]) -> Result<HermTangent> {
    HermTangent::new(
        specs
            .iter()
            .map(MatrixSpec::to_matrix)
            .collect::<Result<_>>()?,
    )
}

/// The mirror job: inner products, both sectional orderings, the Levi-Civita
/// oracle, and optionally random-pair sign statistics.
pub fn run_mirror(job: &MirrorJob) -> Result<(Value, bool)> {
    let base = HermBase::new(job.weights.clone())?;
    let xi = herm_tangent(&job.xi)?;
    let eta = herm_tangent(&job.eta)?;
    let h = match &job.base {
        Some(specs) => HermPoint::new(
            base.clone(),
            specs
                .iter()
                .map(MatrixSpec::to_matrix)
                .collect::<Result<_>>()?,
        )?,
        None => HermPoint::identity(base.clone(), xi.size()),
    };
    let both = herm_sectional_both(&h, &xi, &eta)?;
    let fd = herm_fd_sectional(&h, &xi, &eta, job.delta)?;
    let agrees = (both.corrected - fd).abs() <= job.fd_tolerance;
    let sign_agrees = both.corrected.signum() == fd.signum() || fd.abs() <= job.fd_tolerance;

    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut max_random = f64::NEG_INFINITY;
    for _ in 0..job.random_pairs {
        let a = random_tangent(&mut rng, base.len(), h.size());
        let b = random_tangent(&mut rng, base.len(), h.size());
        max_random = max_random.max(herm_sectional(&h, &a, &b)?);
    }
    let random_ok = job.random_pairs == 0 || max_random <= 1e-12;
    let results = json!({
        "inner": {
            "xi_xi": herm_inner(&h, &xi, &xi)?,
            "xi_eta": herm_inner(&h, &xi, &eta)?,
            "eta_eta": herm_inner(&h, &eta, &eta)?,
        },
        "sectional": both.corrected,
        "sectional_literal_ordering": both.literal,
        "sectional_fd_oracle": fd,
        "fd_delta": job.delta,
        "fd_agrees": agrees,
        "sign_agrees": sign_agrees,
        "random_pairs": job.random_pairs,
        "random_max_sectional": if job.random_pairs > 0 { json!(max_random) } else { Value::Null },
    });
    Ok((results, agrees && sign_agrees && random_ok))
}

fn run_job(config: &ExperimentConfig) -> Result<(Value, bool, Option<String>)> {
    if let Job::Validate(suite) = &config.job {
        let results = run_suite(suite)?;
        let pass = results.iter().all(|r| r.pass);
        return Ok((suite_value(&results), pass, None));
    }
    if let Job::Mirror(job) = &config.job {
        let (v, pass) = run_mirror(job)?;
        return Ok((v, pass, None));
    }
    let model = config.model.build()?;
    let grid = config.grid()?;
    let gamma = GraphLagrangian::from_potential(&model, &grid, &config.potential)?;
    let field = |name: &str| config.sample(name, &grid);
    match &config.job {
        Job::Curvature { h, k, l, m } => {
            let mut names = vec![h.clone(), k.clone(), l.clone()];
            names.extend(m.clone());
            let tangents: Vec<_> = names
                .iter()
                .map(|n| field(n).map(|f| gamma.normalize(&f)))
                .collect::<Result<_>>()?;
            let report = curvature_report(
                &gamma,
                &names,
                &tangents[0],
                &tangents[1],
                &tangents[2],
                tangents.get(3),
            )?;
            Ok((
                serde_json::to_value(report).expect("serializable"),
                true,
                None,
            ))
        }
        Job::Sectional { h, k } => {
            let (h, k) = (gamma.normalize(&field(h)?), gamma.normalize(&field(k)?));
            let s = sectional(&gamma, &h, &k)?;
            let v = json!({
                "sectional": s.value,
                "numerator": s.numerator,
                "gram": s.gram,
                "positivity_margin": gamma.positivity_margin(),
            });
            Ok((v, true, None))
        }
        Job::Scan { functions, .. } => {
            let names: Vec<String> = functions
                .clone()
                .unwrap_or_else(|| config.functions.keys().cloned().collect());
            let rows = run_scan(config, &gamma, &names)?;
            let csv = scan_csv(&rows)?;
            Ok((json!({ "rows": rows }), true, Some(csv)))
        }
        Job::Geodesic {
            h0,
            time,
            steps,
            reverse,
            max_step_drift,
        } => {
            let options = GeodesicOptions {
                max_step_drift: *max_step_drift,
            };
            let geo = geodesic_shoot(&gamma, &field(h0)?, *time, *steps, options)?;
            let mut v = json!({
                "times": geo.path.times(),
                "energies": geo.energies,
                "max_relative_drift": geo.max_relative_drift(),
                "final_potential": geo.final_potential().values(),
            });
            if *reverse {
                let end = GraphLagrangian::build(&model, geo.final_potential().clone())?;
                let back = geodesic_shoot(&end, &-geo.final_velocity(), *time, *steps, options)?;
                let start = gamma.potential().add_constant(-gamma.potential().mean());
                v["return_error"] = json!((back.final_potential() - &start).max_abs());
            }
            Ok((v, true, None))
        }
        Job::Validate(_) | Job::Mirror(_) => unreachable!("handled above"),
    }
}

fn suite_value(results: &[CheckResult]) -> Value {
    json!({
        "checks": results,
        "passed": results.iter().filter(|r| r.pass).count(),
        "total": results.len(),
    })
}

/// Runs the configured job and assembles the report.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    let start = Instant::now();
    let (results, pass, csv) = run_job(config)?;
    let conventions = config
        .model
        .build()
        .map(|m| m.conventions())
        .unwrap_or_default();
    let report = Report {
        schema: SCHEMA.into(),
        version: SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        conventions,
        config: config.clone(),
        results,
        pass,
        timing_seconds: config.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(Outcome { report, csv })
}

/// Where the scan table goes: the job's `csv` path, else the report path with
/// a `.csv` extension.
pub fn csv_path(config: &ExperimentConfig) -> Option<PathBuf> {
    match &config.job {
        Job::Scan { csv: Some(p), .. } => Some(p.clone()),
        Job::Scan { csv: None, .. } => config.output.as_ref().map(|o| o.with_extension("csv")),
        _ => None,
    }
}

/// Writes the report and any table; returns the report JSON when no output
/// path is configured.
pub fn write_outcome(config: &ExperimentConfig, outcome: &Outcome) -> Result<Option<String>> {
    let text = serde_json::to_string_pretty(&outcome.report).expect("serializable") + "\n";
    if let (Some(csv), Some(path)) = (&outcome.csv, csv_path(config)) {
        std::fs::write(path, csv)?;
    }
    match &config.output {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::BandLimitExceeded { .. }
        | Error::InvalidModel(_)
        | Error::ShapeMismatch(_) => EXIT_CONFIG,
        e if e.is_positivity() => EXIT_POSITIVITY,
        Error::MarginTooSmall { .. } => EXIT_POSITIVITY,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sectional_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "model": {"n": 2},
                "grid": 32,
                "functions": {
                    "a": [{"coefficient": 1.0, "wavevector": [1, 0], "phase": "cos"}],
                    "b": [{"coefficient": 1.0, "wavevector": [0, 1], "phase": "cos"}]
                },
                "job": {"kind": "sectional", "h": "a", "k": "b"}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn sectional_job() {
        let out = run(&sectional_config()).unwrap();
        let k = out.report.results["sectional"].as_f64().unwrap();
        assert!((k + 0.025330295910584444).abs() < 1e-9);
        assert_eq!(out.report.schema, SCHEMA);
        assert!(out.report.timing_seconds.is_none());
    }

    #[test]
    fn describe_and_errors() {
        let plan = describe(&sectional_config()).unwrap();
        assert!(plan.contains("K(a,b)"));
        let bad = r#"{"job": {"kind": "dance"}}"#;
        assert!(matches!(
            ExperimentConfig::from_json(bad),
            Err(Error::Config(_))
        ));
        let mut c = sectional_config();
        c.functions
            .insert("wide".into(), TrigPolynomial::cos([9, 0]));
        let e = describe(&c).unwrap_err();
        assert!(e.to_string().contains("wide"), "{e}");
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let mut c = sectional_config();
        c.job = Job::Sectional {
            h: "a".into(),
            k: "missing".into(),
        };
        assert!(matches!(describe(&c), Err(Error::Config(_))));
    }

    #[test]
    fn scan_table() {
        let mut c = sectional_config();
        c.functions.insert("c".into(), TrigPolynomial::sin([1, 1]));
        c.job = Job::Scan {
            functions: None,
            csv: None,
        };
        let out = run(&c).unwrap();
        let csv = out.csv.unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "pair_id,h_name,k_name,sectional,margin"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn mirror_job_reports_both_orderings() {
        let job: MirrorJob = serde_json::from_str(
            r#"{"xi": [{"re": [[0,1],[1,0]]}],
                "eta": [{"re": [[0,0],[0,0]], "im": [[0,-1],[1,0]]}],
                "random_pairs": 10}"#,
        )
        .unwrap();
        let (v, pass) = run_mirror(&job).unwrap();
        assert!(pass);
        assert!((v["sectional"].as_f64().unwrap() + 0.5).abs() < 1e-12);
        assert!((v["sectional_literal_ordering"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}
