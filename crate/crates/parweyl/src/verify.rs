//! The verification suite: config ingestion, seeded sampling, execution of
//! every structural check over a metric field, and canonical JSON reports.
//!
//! Determinism contract: identical config and seed produce byte-identical
//! report files. Sampling happens once, before any check runs, so disabling
//! checks never changes the residuals of the remaining ones. Reports carry
//! no timing data (timings go to stdout); floats are serialized with 17
//! significant digits and object keys are sorted.

use crate::chart::{jet_relative_deviation, ChartSpec, MetricField};
use crate::curvature::{
    codazzi_residual, curvature_bundle, first_bianchi_residual, pair_symmetry_residual,
    riemann_fd_oracle, trace_residual, CurvatureBundle,
};
use crate::expr::{Expr, PiecewisePoly, Poly};
use crate::families::{
    build_d1_metric, build_d2_metric, surface_grid, D1FamilySpec, D2FamilySpec,
    SurfaceConnectionSpec,
};
use crate::geodesic::{fmap_spec_for_profile, pullback_residual};
use crate::linalg::{self, at};
use crate::olszak::{
    curvature_form_omega, olszak_fiber, parallelism_check, ricci_omega_consistency,
    spanning_image_check, weyl_rank, DistributionBasis, OlszakError,
};
use crate::tensor::{signature, valued_wedge, DenseTensor, Variance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use thiserror::Error;

/// Name and version of the sampling PRNG, recorded in every report.
pub const PRNG_NAME: &str = "ChaCha8 (rand_chacha 0.3, gen_range f64)";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("io failure: {0}")]
    IoFailure(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
pub struct PieceConfig {
    /// Closed interval this piece covers; pieces must be contiguous.
    pub breakpoints: [f64; 2],
    /// Ascending-degree polynomial coefficients.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TermConfig {
    pub powers: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SurfaceParams {
    /// Keys "kij" with k, i, j ∈ {1, 2}: polynomial Γ^k_ij.
    #[serde(default)]
    pub gamma_coeffs: BTreeMap<String, Vec<TermConfig>>,
    /// Polynomial α_12.
    pub alpha: Vec<TermConfig>,
    /// Keys "11", "12", "22": polynomial T^jk.
    #[serde(rename = "T")]
    pub t_upper: BTreeMap<String, Vec<TermConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FamilyParams {
    D1 {
        n: usize,
        gram: Vec<f64>,
        f: Vec<PieceConfig>,
        #[serde(rename = "A")]
        a_op: Vec<f64>,
        domain: Option<Vec<[f64; 2]>>,
    },
    D2 {
        n: usize,
        epsilon: f64,
        surface: SurfaceParams,
        #[serde(rename = "gramV", default)]
        gram_v: Vec<f64>,
        domain: Option<Vec<[f64; 2]>>,
    },
    Custom {
        n: usize,
        /// Keys "ij" (0-based, i ≤ j), polynomial components.
        components: BTreeMap<String, Vec<TermConfig>>,
        domain: Vec<[f64; 2]>,
        expected_d: Option<usize>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct PullbackConfig {
    pub base_point: Vec<f64>,
    pub t_values: Vec<f64>,
    pub s_values: Vec<f64>,
    /// Direction in the abstract fiber factor; grid ψ = value · direction.
    pub psi_dir: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub fd_step: f64,
    pub ode_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct VerificationConfig {
    pub family: String,
    pub params: FamilyParams,
    pub samples: usize,
    #[serde(rename = "box")]
    pub sample_box: Vec<[f64; 2]>,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub report_path: Option<String>,
    #[serde(default)]
    pub pullback: Option<PullbackConfig>,
}

fn poly_from_terms(terms: &[TermConfig], nvars: usize, field: &str) -> Result<Poly, ConfigError> {
    for t in terms {
        if t.powers.len() != nvars {
            return Err(invalid(field, format!("term powers must have length {nvars}")));
        }
    }
    let mut p = Poly::zero(nvars);
    for t in terms {
        p = p.add(&Poly { nvars, terms: vec![(t.powers.clone(), t.coeff)] });
    }
    Ok(p)
}

fn profile_from_pieces(pieces: &[PieceConfig]) -> Result<PiecewisePoly, ConfigError> {
    if pieces.is_empty() {
        return Err(invalid("params.f", "at least one piece required"));
    }
    for w in pieces.windows(2) {
        if (w[0].breakpoints[1] - w[1].breakpoints[0]).abs() > 1e-12 {
            return Err(invalid("params.f", "pieces must be contiguous"));
        }
    }
    let breakpoints: Vec<f64> = pieces.iter().skip(1).map(|p| p.breakpoints[0]).collect();
    let pw = PiecewisePoly {
        breakpoints,
        pieces: pieces.iter().map(|p| p.coefficients.clone()).collect(),
    };
    pw.validate().map_err(|e| invalid("params.f", e))?;
    Ok(pw)
}

impl VerificationConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: VerificationConfig =
            serde_json::from_str(text).map_err(|e| invalid("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples < 1 {
            return Err(invalid("samples", "must be at least 1"));
        }
        match self.family.as_str() {
            "d1" | "d2" | "custom" => {}
            other => return Err(invalid("family", format!("unknown family `{other}`"))),
        }
        let matches = matches!(
            (self.family.as_str(), &self.params),
            ("d1", FamilyParams::D1 { .. })
                | ("d2", FamilyParams::D2 { .. })
                | ("custom", FamilyParams::Custom { .. })
        );
        if !matches {
            return Err(invalid("params", "params do not match the declared family"));
        }
        for &[lo, hi] in &self.sample_box {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid("box", "each interval must be nonempty and finite"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Family data resolved from the config
// ---------------------------------------------------------------------------

pub enum FamilyData {
    D1(D1FamilySpec),
    D2(D2FamilySpec),
    Custom { expected_d: Option<usize> },
}

pub struct SuiteContext {
    pub field: MetricField,
    pub family: FamilyData,
    pub points: Vec<Vec<f64>>,
}

fn default_domain(n: usize) -> Vec<(f64, f64)> {
    vec![(-1.0, 1.0); n]
}

fn domain_from(opt: &Option<Vec<[f64; 2]>>, n: usize) -> Result<Vec<(f64, f64)>, ConfigError> {
    match opt {
        None => Ok(default_domain(n)),
        Some(d) => {
            if d.len() != n {
                return Err(invalid("params.domain", format!("expected {n} intervals")));
            }
            Ok(d.iter().map(|&[a, b]| (a, b)).collect())
        }
    }
}

pub fn build_context(config: &VerificationConfig) -> Result<SuiteContext, ConfigError> {
    let (field, family) = match &config.params {
        FamilyParams::D1 { n, gram, f, a_op, domain } => {
            let spec = D1FamilySpec {
                n: *n,
                gram: gram.clone(),
                profile: profile_from_pieces(f)?,
                op: a_op.clone(),
                domain: domain_from(domain, *n)?,
            };
            let field =
                build_d1_metric(&spec).map_err(|e| invalid("params", e.to_string()))?;
            (field, FamilyData::D1(spec))
        }
        FamilyParams::D2 { n, epsilon, surface, gram_v, domain } => {
            let mut gamma = vec![Poly::zero(2); 6];
            for (key, terms) in &surface.gamma_coeffs {
                let bytes: Vec<usize> = key
                    .chars()
                    .map(|c| c.to_digit(10).map(|d| d as usize))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| invalid("params.surface.gamma_coeffs", "keys are kij digits"))?;
                if bytes.len() != 3 || bytes.iter().any(|&d| d < 1 || d > 2) {
                    return Err(invalid(
                        "params.surface.gamma_coeffs",
                        "keys must be three digits in {1,2}",
                    ));
                }
                let p = poly_from_terms(terms, 2, "params.surface.gamma_coeffs")?;
                let (k, i, j) = (bytes[0] - 1, bytes[1] - 1, bytes[2] - 1);
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                gamma[k * 3 + a + b] = p;
            }
            let alpha = poly_from_terms(&surface.alpha, 2, "params.surface.alpha")?;
            let mut t_upper = [Poly::zero(2), Poly::zero(2), Poly::zero(2)];
            for (key, terms) in &surface.t_upper {
                let slot = match key.as_str() {
                    "11" => 0,
                    "12" | "21" => 1,
                    "22" => 2,
                    _ => return Err(invalid("params.surface.T", "keys are 11, 12, 22")),
                };
                t_upper[slot] = poly_from_terms(terms, 2, "params.surface.T")?;
            }
            let spec = D2FamilySpec {
                surface: SurfaceConnectionSpec { gamma, area: alpha, t_upper, epsilon: *epsilon },
                n: *n,
                gram_v: gram_v.clone(),
                domain: domain_from(domain, *n)?,
            };
            let field =
                build_d2_metric(&spec).map_err(|e| invalid("params", e.to_string()))?;
            (field, FamilyData::D2(spec))
        }
        FamilyParams::Custom { n, components, domain, expected_d } => {
            let dom: Vec<(f64, f64)> = domain.iter().map(|&[a, b]| (a, b)).collect();
            let chart = ChartSpec::new(dom, (0..*n).map(|i| format!("x{i}")).collect())
                .map_err(|e| invalid("params.domain", e.to_string()))?;
            let mut comp_map: BTreeMap<(usize, usize), Poly> = BTreeMap::new();
            for (key, terms) in components {
                let parts: Vec<usize> = key
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().ok())
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| invalid("params.components", "keys are \"i,j\" 0-based"))?;
                if parts.len() != 2 || parts[0] >= *n || parts[1] >= *n {
                    return Err(invalid("params.components", "component index out of range"));
                }
                let p = poly_from_terms(terms, *n, "params.components")?;
                let (i, j) = (parts[0].min(parts[1]), parts[0].max(parts[1]));
                comp_map.insert((i, j), p);
            }
            let field = MetricField::from_fn(chart, |i, j| match comp_map.get(&(i, j)) {
                Some(p) => Expr::Polynomial(p.clone()),
                None => Expr::Const(0.0),
            })
            .map_err(|e| invalid("params.components", e.to_string()))?;
            (field, FamilyData::Custom { expected_d: *expected_d })
        }
    };
    // sample box must sit strictly inside the chart domain
    if config.sample_box.len() != field.dim() {
        return Err(invalid("box", format!("expected {} intervals", field.dim())));
    }
    for (&[lo, hi], &(dlo, dhi)) in config.sample_box.iter().zip(&field.chart.domain) {
        if lo < dlo || hi > dhi {
            return Err(invalid("box", "sample box must lie inside the chart domain"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let points: Vec<Vec<f64>> = (0..config.samples)
        .map(|_| {
            config
                .sample_box
                .iter()
                .map(|&[lo, hi]| rng.gen_range(lo..hi))
                .collect()
        })
        .collect();
    Ok(SuiteContext { field, family, points })
}

// ---------------------------------------------------------------------------
// Check results and report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub anchor: String,
    pub points: usize,
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_point: Option<Vec<f64>>,
    pub verdict: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config_echo: Value,
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
}

impl Report {
    pub fn to_value(&self) -> Value {
        let engine = json!({
            "curvature_convention":
                "R(u,v) = nabla_v nabla_u - nabla_u nabla_v + nabla_[u,v]; mixed R[j][k][l][s]",
            "ricci_contraction": "rho_jl = R_jkl^k (second lower slot against the upper slot)",
            "schouten": "sigma = rho - s/(2n-2) g",
            "weyl": "W = R - (n-2)^{-1} (g wedge sigma)",
            "valued_wedge": "(a^b)_ijkl = a_ik b_jl - a_jk b_il - a_il b_jk + a_jl b_ik",
            "rank_rel_threshold": crate::olszak::RANK_REL_THRESHOLD,
            "degeneracy_rel_threshold": crate::chart::DEGENERACY_REL_THRESHOLD,
            "prng": PRNG_NAME,
        });
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), json!(c.name));
                m.insert("anchor".into(), json!(c.anchor));
                m.insert("points".into(), json!(c.points));
                m.insert(
                    "max_residual".into(),
                    match c.max_residual {
                        Some(r) if r.is_finite() => json!(r),
                        _ => Value::Null,
                    },
                );
                m.insert("tolerance".into(), json!(c.tolerance));
                m.insert("pass".into(), json!(c.pass));
                m.insert(
                    "worst_point".into(),
                    match &c.worst_point {
                        Some(p) => json!(p),
                        None => Value::Null,
                    },
                );
                if let Some(v) = &c.verdict {
                    m.insert("verdict".into(), json!(v));
                }
                if let Some(e) = &c.error {
                    m.insert("error".into(), json!(e));
                }
                Value::Object(m)
            })
            .collect();
        json!({
            "config": self.config_echo,
            "engine": engine,
            "checks": checks,
            "overall_pass": self.overall_pass,
        })
    }

    /// Canonical JSON: sorted keys, floats with 17 significant digits.
    pub fn canonical_json(&self) -> String {
        let mut out = String::new();
        write_canonical(&self.to_value(), &mut out);
        out.push('\n');
        out
    }
}

pub fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().expect("number is f64");
                out.push_str(&format!("{f:.16e}"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's default map is a BTreeMap: iteration is sorted
            out.push('{');
            for (i, (k, val)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_canonical(val, out);
            }
            out.push('}');
        }
    }
}

/// Write the canonical report to a file.
pub fn emit_report(report: &Report, path: &std::path::Path) -> Result<(), ConfigError> {
    std::fs::write(path, report.canonical_json())
        .map_err(|e| ConfigError::IoFailure(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// The checks
// ---------------------------------------------------------------------------

struct PointData {
    point: Vec<f64>,
    bundle: Result<CurvatureBundle<f64>, String>,
    fiber: Result<DistributionBasis<f64>, String>,
    rank: Result<usize, String>,
}

fn collect_point_data(ctx: &SuiteContext) -> Vec<PointData> {
    ctx.points
        .iter()
        .map(|p| {
            let bundle = ctx
                .field
                .evaluate_jet(p, 3)
                .map_err(|e| e.to_string())
                .and_then(|jet| curvature_bundle(&jet).map_err(|e| e.to_string()));
            let (fiber, rank) = match &bundle {
                Ok(b) => (
                    olszak_fiber(b).map_err(|e| e.to_string()),
                    weyl_rank(b).map_err(|e| e.to_string()),
                ),
                Err(e) => (Err(e.clone()), Err(e.clone())),
            };
            PointData { point: p.clone(), bundle, fiber, rank }
        })
        .collect()
}

/// Fold a per-point residual over all points, tracking the worst point.
fn fold_residual(
    data: &[PointData],
    mut f: impl FnMut(&PointData) -> Result<f64, String>,
) -> Result<(f64, Option<Vec<f64>>), String> {
    let mut worst = 0.0f64;
    let mut worst_point = None;
    for pd in data {
        let r = f(pd)?;
        if r >= worst {
            worst = r;
            worst_point = Some(pd.point.clone());
        }
    }
    Ok((worst, worst_point))
}

fn bundle_of(pd: &PointData) -> Result<&CurvatureBundle<f64>, String> {
    pd.bundle.as_ref().map_err(|e| e.clone())
}

fn fiber_of(pd: &PointData) -> Result<&DistributionBasis<f64>, String> {
    pd.fiber.as_ref().map_err(|e| e.clone())
}

/// Orthogonal complement of the fiber under g: kernel of the rows g·u_i.
fn fiber_complement(bundle: &CurvatureBundle<f64>, fiber: &DistributionBasis<f64>) -> Vec<Vec<f64>> {
    let n = bundle.n;
    let d = fiber.d;
    if d == 0 || d >= n {
        return Vec::new();
    }
    let mut rows = vec![0.0; d * n];
    for (r, u) in fiber.basis.iter().enumerate() {
        for c in 0..n {
            for s in 0..n {
                rows[at(n, r, c)] += bundle.g[at(n, c, s)] * u[s];
            }
        }
    }
    let dec = linalg::svd(&rows, d, n);
    (d..n)
        .map(|c| (0..n).map(|r| dec.v[at(n, r, c)]).collect())
        .collect()
}

fn expected_d(family: &FamilyData) -> Option<usize> {
    match family {
        FamilyData::D1(_) => Some(1),
        FamilyData::D2(_) => Some(2),
        FamilyData::Custom { expected_d } => *expected_d,
    }
}

fn expected_signature(family: &FamilyData) -> Option<(usize, usize)> {
    match family {
        FamilyData::D1(spec) => {
            let m = spec.n - 2;
            let sig = signature(&spec.gram, m);
            Some((1 + sig.negative, 1 + sig.positive))
        }
        FamilyData::D2(spec) => {
            let mv = spec.n - 4;
            if mv == 0 {
                return Some((2, 2));
            }
            let sig = signature(&spec.gram_v, mv);
            Some((2 + sig.negative, 2 + sig.positive))
        }
        FamilyData::Custom { .. } => None,
    }
}

/// Expected local-symmetry verdict derived from the family parameters.
fn expected_local_symmetry(family: &FamilyData, t_box: (f64, f64)) -> Option<&'static str> {
    match family {
        FamilyData::D1(spec) => {
            let pw = &spec.profile;
            let mut has_const_region = false;
            let mut has_varying_region = false;
            let mut edges = vec![t_box.0];
            for &b in &pw.breakpoints {
                if b > t_box.0 && b < t_box.1 {
                    edges.push(b);
                }
            }
            edges.push(t_box.1);
            for w in edges.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let idx = pw.breakpoints.iter().filter(|&&b| b <= mid).count();
                let constant = pw.pieces[idx].iter().skip(1).all(|&c| c == 0.0);
                if constant {
                    has_const_region = true;
                } else {
                    has_varying_region = true;
                }
            }
            Some(match (has_const_region, has_varying_region) {
                (true, false) => "symmetric",
                (false, true) => "nonsymmetric",
                (true, true) => "mixed",
                (false, false) => "symmetric",
            })
        }
        FamilyData::D2(spec) => {
            let grid = surface_grid(spec.domain[0], spec.domain[1]);
            if spec.surface.nabla_ricci_max(&grid) < 1e-12 {
                Some("symmetric")
            } else {
                Some("nonsymmetric")
            }
        }
        FamilyData::Custom { .. } => None,
    }
}

struct CheckOutcome {
    max_residual: Option<f64>,
    worst_point: Option<Vec<f64>>,
    verdict: Option<String>,
    error: Option<String>,
    pass_override: Option<bool>,
}

impl CheckOutcome {
    fn residual(r: f64, p: Option<Vec<f64>>) -> Self {
        CheckOutcome {
            max_residual: Some(r),
            worst_point: p,
            verdict: None,
            error: None,
            pass_override: None,
        }
    }

    fn error(msg: String) -> Self {
        CheckOutcome {
            max_residual: None,
            worst_point: None,
            verdict: None,
            error: Some(msg),
            pass_override: Some(false),
        }
    }
}

/// Static check catalog: name, claim anchor, default tolerance.
pub const CHECK_CATALOG: &[(&str, &str, f64)] = &[
    ("signature", "sign pattern (end of Section 3 / Section 4)", 0.0),
    ("riemann_symmetries", "Eq. (cur)", 1e-10),
    ("first_bianchi", "Eq. (cur)", 1e-10),
    ("weyl_symmetries", "Eq. (wer)", 1e-10),
    ("weyl_trace_free", "Eq. (wer)", 1e-9),
    ("nabla_weyl", "Theorem 3.1 / Theorem 4.1", 1e-8),
    ("div_weyl", "Section 5, div W = 0", 1e-8),
    ("codazzi_nabla_ricci", "Section 5, nabla rho totally symmetric", 1e-8),
    ("scalar_zero", "Lemma 2.2(c)", 1e-10),
    ("ricci_decomposition", "Lemma 2.2(c)", 1e-9),
    ("olszak_dimension", "Lemma 2.1(i)", 0.0),
    ("weyl_rank_consistency", "Lemma 2.1(iii)", 0.0),
    ("spanning_image", "Lemma 2.1(iv)", 1e-9),
    ("fiber_nullity", "Lemma 2.2(a)", 1e-9),
    ("ricci_image_in_fiber", "Lemma 2.2(b)", 1e-8),
    ("weyl_fiber_annihilation", "Lemma 2.2(d)", 1e-9),
    ("complement_curvature", "Lemma 2.2(e)", 1e-9),
    ("parallelism", "Section 2, parallel subbundle", 1e-6),
    ("omega_flat", "Lemma 2.2(f) / Eq. (ruo)", 1e-8),
    ("ricci_omega_trace", "Appendix II, rho u = -Omega u", 1e-9),
    ("rho_form", "Section 5 (f)", 1e-9),
    ("eq_ruv", "Eq. (ruv)", 1e-9),
    ("local_symmetry", "Theorem 3.1 / Theorem 4.1 / Remark 4.1", 0.0),
    ("fiber_rescaling", "Lemma 2.1(i)", 0.0),
    ("divergence_equation", "Section 3, divergence equation", 1e-8),
    ("projective_flatness", "Section 3, projectively flat", 1e-8),
    ("area_form_parallel", "Section 3, parallel area form", 1e-9),
    ("oracle_jet", "invented - artifact plumbing", 1e-5),
    ("oracle_curvature", "invented - artifact plumbing", 1e-5),
    ("pullback", "Lemma 5.1", 1e-5),
];

/// Default check set per family; `pullback` is opt-in (expensive).
pub fn default_checks(family: &FamilyData) -> Vec<&'static str> {
    let generic = [
        "riemann_symmetries",
        "first_bianchi",
        "weyl_symmetries",
        "weyl_trace_free",
        "nabla_weyl",
        "oracle_jet",
        "oracle_curvature",
    ];
    let shared_family = [
        "signature",
        "div_weyl",
        "codazzi_nabla_ricci",
        "scalar_zero",
        "ricci_decomposition",
        "olszak_dimension",
        "weyl_rank_consistency",
        "fiber_nullity",
        "ricci_image_in_fiber",
        "weyl_fiber_annihilation",
        "complement_curvature",
        "parallelism",
        "local_symmetry",
        "fiber_rescaling",
    ];
    match family {
        FamilyData::D1(_) => generic
            .into_iter()
            .chain(shared_family)
            .chain(["omega_flat", "ricci_omega_trace", "rho_form", "eq_ruv"])
            .collect(),
        FamilyData::D2(_) => generic
            .into_iter()
            .chain(shared_family)
            .chain(["spanning_image", "divergence_equation", "projective_flatness", "area_form_parallel"])
            .collect(),
        FamilyData::Custom { expected_d } => {
            let mut v: Vec<&'static str> = generic.into_iter().collect();
            if expected_d.is_some() {
                v.push("olszak_dimension");
            }
            v
        }
    }
}

fn run_check(
    name: &str,
    ctx: &SuiteContext,
    data: &[PointData],
    config: &VerificationConfig,
) -> CheckOutcome {
    let result: Result<CheckOutcome, String> = (|| {
        match name {
            "signature" => {
                let expected = expected_signature(&ctx.family)
                    .ok_or_else(|| "no expected signature for this family".to_string())?;
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let sig = signature(&b.g, b.n);
                    let bad = (sig.negative != expected.0) as usize
                        + (sig.positive != expected.1) as usize
                        + (sig.zero != 0) as usize;
                    Ok(bad as f64)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "riemann_symmetries" => {
                let (r, p) =
                    fold_residual(data, |pd| Ok(pair_symmetry_residual(&bundle_of(pd)?.riemann)))?;
                Ok(CheckOutcome::residual(r, p))
            }
            "weyl_symmetries" => {
                let (r, p) =
                    fold_residual(data, |pd| Ok(pair_symmetry_residual(&bundle_of(pd)?.weyl)))?;
                Ok(CheckOutcome::residual(r, p))
            }
            "first_bianchi" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    Ok(first_bianchi_residual(&b.riemann).max(first_bianchi_residual(&b.weyl)))
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "weyl_trace_free" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    Ok(trace_residual(&b.weyl, &b.ginv, b.riemann.max_abs()))
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "nabla_weyl" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let scale = b.weyl.max_abs().max(b.riemann.max_abs()).max(1e-300);
                    Ok(b.nabla_weyl.max_abs() / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "div_weyl" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let scale = b.weyl.max_abs().max(1e-300);
                    Ok(b.div_weyl().max_abs() / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "codazzi_nabla_ricci" => {
                let (r, p) = fold_residual(data, |pd| Ok(codazzi_residual(&bundle_of(pd)?.nabla_ricci)))?;
                Ok(CheckOutcome::residual(r, p))
            }
            "scalar_zero" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let scale = b.ricci.max_abs().max(b.riemann.max_abs()).max(1e-300);
                    Ok(b.scalar.abs() / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "ricci_decomposition" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let n = b.n;
                    let gt = DenseTensor {
                        dim: n,
                        variance: vec![Variance::Covariant; 2],
                        data: b.g.clone(),
                    };
                    let grho = valued_wedge(&gt, &b.ricci).map_err(|e| e.to_string())?;
                    let rebuilt = b
                        .weyl
                        .add(&grho.scale(1.0 / (n as f64 - 2.0)))
                        .map_err(|e| e.to_string())?;
                    let diff = rebuilt.sub(&b.riemann).map_err(|e| e.to_string())?;
                    Ok(diff.max_abs() / b.riemann.max_abs().max(1e-300))
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "olszak_dimension" => {
                let expect = expected_d(&ctx.family)
                    .ok_or_else(|| "no expected fiber dimension".to_string())?;
                let (r, p) = fold_residual(data, |pd| {
                    let f = fiber_of(pd)?;
                    let n = ctx.field.dim();
                    let member = f.d == 0 || f.d == 1 || f.d == 2 || f.d == n;
                    Ok((f.d as f64 - expect as f64).abs() + if member { 0.0 } else { 1.0 })
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "weyl_rank_consistency" => {
                let (r, p) = fold_residual(data, |pd| {
                    let f = fiber_of(pd)?;
                    let rank = pd.rank.as_ref().map_err(|e| e.clone())?;
                    let consistent = (f.d == 2) == (*rank == 1);
                    Ok(if consistent { 0.0 } else { 1.0 })
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "spanning_image" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    let (resid, rank) = spanning_image_check(b, f).map_err(|e| e.to_string())?;
                    Ok(resid + if rank == 2 { 0.0 } else { 1.0 })
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "fiber_nullity" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    if f.d == 1 || f.d == 2 {
                        Ok(f.gram_max_abs() / linalg::max_abs(&b.g).max(1e-300))
                    } else {
                        Ok(0.0)
                    }
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "ricci_image_in_fiber" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    let n = b.n;
                    if f.d >= n {
                        return Ok(0.0);
                    }
                    let rho_scale = b.ricci.max_abs();
                    if rho_scale == 0.0 {
                        return Ok(0.0);
                    }
                    // endomorphism columns: (g⁻¹ρ) e_l, misfit judged
                    // against the largest column so rounding-noise columns
                    // of a nonzero ρ cannot dominate
                    let bmat = f.column_matrix(n);
                    let cols: Vec<Vec<f64>> = (0..n)
                        .map(|l| {
                            let mut col = vec![0.0; n];
                            for r_ in 0..n {
                                for m in 0..n {
                                    col[r_] += b.ginv[at(n, r_, m)] * b.ricci.get(&[m, l]);
                                }
                            }
                            col
                        })
                        .collect();
                    let scale = cols
                        .iter()
                        .map(|c| linalg::max_abs(c))
                        .fold(0.0f64, f64::max)
                        .max(1e-300);
                    let mut worst = 0.0f64;
                    for col in &cols {
                        let coeff = linalg::lstsq(&bmat, col, n, f.d, 1e-12);
                        for r_ in 0..n {
                            let mut fit = 0.0;
                            for c in 0..f.d {
                                fit += bmat[at(f.d, r_, c)] * coeff[c];
                            }
                            worst = worst.max((col[r_] - fit).abs() / scale);
                        }
                    }
                    Ok(worst)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "weyl_fiber_annihilation" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    let n = b.n;
                    if f.d >= n {
                        return Ok(0.0);
                    }
                    let scale = b.weyl.max_abs().max(1e-300);
                    let mut worst = 0.0f64;
                    for u in &f.basis {
                        for j in 0..n {
                            for k in 0..n {
                                for l in 0..n {
                                    let mut acc = 0.0;
                                    for i in 0..n {
                                        acc += b.weyl.get(&[i, j, k, l]) * u[i];
                                    }
                                    worst = worst.max(acc.abs());
                                }
                            }
                        }
                    }
                    Ok(worst / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "complement_curvature" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    let n = b.n;
                    let comp = fiber_complement(b, f);
                    let scale = b.riemann.max_abs().max(1e-300);
                    let mut worst = 0.0f64;
                    for v in &comp {
                        for vp in &comp {
                            for k in 0..n {
                                for l in 0..n {
                                    let mut acc = 0.0;
                                    for i in 0..n {
                                        for j in 0..n {
                                            acc += b.riemann.get(&[i, j, k, l]) * v[i] * vp[j];
                                        }
                                    }
                                    worst = worst.max(acc.abs());
                                }
                            }
                        }
                    }
                    Ok(worst / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "parallelism" => {
                let step = 1e-4;
                let subset: Vec<Vec<f64>> =
                    ctx.points.iter().take(10).cloned().collect();
                let angle =
                    parallelism_check(&ctx.field, &subset, step).map_err(|e| e.to_string())?;
                Ok(CheckOutcome::residual(angle, None))
            }
            "omega_flat" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    if f.d != 1 {
                        return Err(format!("fiber dimension {} (need 1)", f.d));
                    }
                    match curvature_form_omega(b, &f.basis[0]) {
                        Ok(omega) => {
                            let scale = b.riemann.max_abs().max(1e-300);
                            Ok(omega.residual.max(linalg::max_abs(&omega.omega) / scale))
                        }
                        Err(OlszakError::IdentityNotSatisfied(r)) => Ok(r.max(1.0)),
                        Err(e) => Err(e.to_string()),
                    }
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "ricci_omega_trace" => {
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let f = fiber_of(pd)?;
                    if f.d != 1 {
                        return Err(format!("fiber dimension {} (need 1)", f.d));
                    }
                    let omega =
                        curvature_form_omega(b, &f.basis[0]).map_err(|e| e.to_string())?;
                    Ok(ricci_omega_consistency(b, &omega, &f.basis[0]))
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "rho_form" => {
                let spec = match &ctx.family {
                    FamilyData::D1(s) => s,
                    _ => return Err("rho_form applies to the d1 family".into()),
                };
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let n = b.n;
                    let f_val = spec.profile.eval(pd.point[0]);
                    let expected = (2.0 - n as f64) * f_val;
                    let scale = b.riemann.max_abs().max(1e-300);
                    let mut worst = 0.0f64;
                    for j in 0..n {
                        for l in 0..n {
                            let model = if j == 0 && l == 0 { expected } else { 0.0 };
                            worst = worst.max((b.ricci.get(&[j, l]) - model).abs());
                        }
                    }
                    Ok(worst / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "eq_ruv" => {
                let spec = match &ctx.family {
                    FamilyData::D1(s) => s,
                    _ => return Err("eq_ruv applies to the d1 family".into()),
                };
                let pairing = spec.pairing();
                let m = spec.n - 2;
                let (r, p) = fold_residual(data, |pd| {
                    let b = bundle_of(pd)?;
                    let n = b.n;
                    // u = g⁻¹ dt; D-perp is spanned by ∂_s and the ψ-directions
                    let u: Vec<f64> = (0..n).map(|r_| b.ginv[at(n, r_, 0)]).collect();
                    let f_val = spec.profile.eval(pd.point[0]);
                    let scale = b.riemann.max_abs().max(1e-300);
                    let mut worst = 0.0f64;
                    for up in 0..n {
                        // g(u', u) = (g u)_{up} = dt_{up}
                        let g_up_u = if up == 0 { 1.0 } else { 0.0 };
                        for v in 1..n {
                            for vp in 1..n {
                                let g_v_vp = b.g[at(n, v, vp)];
                                let a_pair = if v >= 2 && vp >= 2 {
                                    pairing[at(m, v - 2, vp - 2)]
                                } else {
                                    0.0
                                };
                                let coeff = (f_val * g_v_vp + a_pair) * g_up_u;
                                for s in 0..n {
                                    let lhs = b.riemann_mixed.get(&[up, v, vp, s]);
                                    let rhs = coeff * u[s];
                                    worst = worst.max((lhs - rhs).abs());
                                }
                            }
                        }
                    }
                    Ok(worst / scale)
                })?;
                Ok(CheckOutcome::residual(r, p))
            }
            "local_symmetry" => {
                let t_box = (config.sample_box[0][0], config.sample_box[0][1]);
                let expected = expected_local_symmetry(&ctx.family, t_box)
                    .ok_or_else(|| "no expected verdict for this family".to_string())?;
                let tol_sym = 1e-9;
                let tol_nonsym = 1e-4;
                let mut max_rel = 0.0f64;
                let mut min_rel = f64::INFINITY;
                let mut worst_point = None;
                for pd in data {
                    let b = bundle_of(pd).map_err(|e| e)?;
                    let rel = b.nabla_riemann.max_abs() / b.riemann.max_abs().max(1e-300);
                    if rel >= max_rel {
                        max_rel = rel;
                        worst_point = Some(pd.point.clone());
                    }
                    min_rel = min_rel.min(rel);
                }
                let observed = if max_rel < tol_sym {
                    "symmetric"
                } else if matches!(ctx.family, FamilyData::D1(_))
                    && min_rel < tol_sym
                    && max_rel > tol_nonsym
                {
                    "mixed"
                } else if max_rel > tol_nonsym {
                    "nonsymmetric"
                } else {
                    "indeterminate"
                };
                let verdict = format!(
                    "{observed} (max |nabla R|/|R| = {max_rel:.3e}, min = {min_rel:.3e}; expected {expected})"
                );
                Ok(CheckOutcome {
                    max_residual: Some(if observed == expected { 0.0 } else { 1.0 }),
                    worst_point,
                    verdict: Some(verdict),
                    error: None,
                    pass_override: None,
                })
            }
            "fiber_rescaling" => {
                let subset = data.iter().take(5);
                let mut mismatches = 0.0;
                let mut worst_point = None;
                for pd in subset {
                    let f = fiber_of(pd)?;
                    for c in [1e-2, 1e2] {
                        let scaled = ctx.field.scaled(c);
                        let jet = scaled.evaluate_jet(&pd.point, 3).map_err(|e| e.to_string())?;
                        let b = curvature_bundle(&jet).map_err(|e| e.to_string())?;
                        let f2 = olszak_fiber(&b).map_err(|e| e.to_string())?;
                        if f2.d != f.d {
                            mismatches += 1.0;
                            worst_point = Some(pd.point.clone());
                        }
                    }
                }
                Ok(CheckOutcome::residual(mismatches, worst_point))
            }
            "divergence_equation" => {
                let spec = match &ctx.family {
                    FamilyData::D2(s) => s,
                    _ => return Err("divergence_equation applies to the d2 family".into()),
                };
                let grid = surface_grid(
                    (config.sample_box[0][0], config.sample_box[0][1]),
                    (config.sample_box[1][0], config.sample_box[1][1]),
                );
                Ok(CheckOutcome::residual(spec.surface.divergence_residual(&grid), None))
            }
            "projective_flatness" => {
                let spec = match &ctx.family {
                    FamilyData::D2(s) => s,
                    _ => return Err("projective_flatness applies to the d2 family".into()),
                };
                let grid = surface_grid(
                    (config.sample_box[0][0], config.sample_box[0][1]),
                    (config.sample_box[1][0], config.sample_box[1][1]),
                );
                let r = spec
                    .surface
                    .projective_flatness_residual(&grid)
                    .map_err(|e| e.to_string())?;
                Ok(CheckOutcome::residual(r, None))
            }
            "area_form_parallel" => {
                let spec = match &ctx.family {
                    FamilyData::D2(s) => s,
                    _ => return Err("area_form_parallel applies to the d2 family".into()),
                };
                let grid = surface_grid(
                    (config.sample_box[0][0], config.sample_box[0][1]),
                    (config.sample_box[1][0], config.sample_box[1][1]),
                );
                Ok(CheckOutcome::residual(spec.surface.area_parallel_residual(&grid), None))
            }
            "oracle_jet" => {
                let step = 1e-3;
                let mut worst = 0.0f64;
                let mut worst_point = None;
                let mut used = 0usize;
                for pd in data.iter() {
                    if used >= 50 {
                        break;
                    }
                    if !ctx.field.stencil_clear_of_breakpoints(&pd.point, step) {
                        continue;
                    }
                    if !ctx.field.chart.contains(&pd.point, 2.5 * step) {
                        continue;
                    }
                    used += 1;
                    let exact =
                        ctx.field.evaluate_jet(&pd.point, 3).map_err(|e| e.to_string())?;
                    let fd = ctx
                        .field
                        .finite_difference_jet(&pd.point, 3, step)
                        .map_err(|e| e.to_string())?;
                    let dev = jet_relative_deviation(&exact, &fd);
                    if dev >= worst {
                        worst = dev;
                        worst_point = Some(pd.point.clone());
                    }
                }
                if used == 0 {
                    return Err("no stencil-clear sample points for the jet oracle".into());
                }
                Ok(CheckOutcome::residual(worst, worst_point))
            }
            "oracle_curvature" => {
                let step = 1e-3;
                let mut worst = 0.0f64;
                let mut worst_point = None;
                let mut used = 0usize;
                for pd in data.iter() {
                    if used >= 50 {
                        break;
                    }
                    if !ctx.field.stencil_clear_of_breakpoints(&pd.point, step) {
                        continue;
                    }
                    if !ctx.field.chart.contains(&pd.point, 2.5 * step) {
                        continue;
                    }
                    let b = bundle_of(pd)?;
                    used += 1;
                    let oracle = riemann_fd_oracle(
                        |p| ctx.field.values(p),
                        b.n,
                        &pd.point,
                        step,
                    )
                    .ok_or_else(|| "finite-difference oracle failed".to_string())?;
                    let scale = b.riemann_mixed.max_abs().max(1e-300);
                    let mut dev = 0.0f64;
                    for (x, y) in b.riemann_mixed.data.iter().zip(&oracle.data) {
                        dev = dev.max((x - y).abs() / scale);
                    }
                    if dev >= worst {
                        worst = dev;
                        worst_point = Some(pd.point.clone());
                    }
                }
                if used == 0 {
                    return Err("no stencil-clear sample points for the curvature oracle".into());
                }
                Ok(CheckOutcome::residual(worst, worst_point))
            }
            "pullback" => {
                let spec = match &ctx.family {
                    FamilyData::D1(s) => s,
                    _ => return Err("pullback applies to the d1 family".into()),
                };
                let pb = config
                    .pullback
                    .as_ref()
                    .ok_or_else(|| "pullback section missing from config".to_string())?;
                let data = run_pullback(spec, &ctx.field, pb).map_err(|e| e.to_string())?;
                Ok(CheckOutcome {
                    max_residual: Some(data.max_residual),
                    worst_point: Some(data.worst_point),
                    verdict: None,
                    error: None,
                    pass_override: None,
                })
            }
            other => Err(format!("unknown check `{other}`")),
        }
    })();
    match result {
        Ok(outcome) => outcome,
        Err(msg) => CheckOutcome::error(msg),
    }
}

/// Run the Lemma 5.1 pullback on a product grid described by the config.
pub fn run_pullback(
    spec: &D1FamilySpec,
    field: &MetricField,
    pb: &PullbackConfig,
) -> Result<crate::geodesic::PullbackData, String> {
    let n = spec.n;
    let m = n - 2;
    if pb.base_point.len() != n {
        return Err(format!("base_point must have {n} coordinates"));
    }
    if pb.psi_dir.len() != m {
        return Err(format!("psi_dir must have {m} entries"));
    }
    let jet = field.evaluate_jet(&pb.base_point, 3).map_err(|e| e.to_string())?;
    let bundle = curvature_bundle(&jet).map_err(|e| e.to_string())?;
    let mut grid: Vec<Vec<f64>> = Vec::new();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for &t in &pb.t_values {
        for &s in &pb.s_values {
            for &c in &pb.psi_values {
                let mut q = vec![t, s];
                for a in 0..m {
                    q.push(c * pb.psi_dir[a]);
                }
                for (i, &x) in q.iter().enumerate() {
                    lo[i] = lo[i].min(x);
                    hi[i] = hi[i].max(x);
                }
                grid.push(q);
            }
        }
    }
    let margin = 10.0 * pb.fd_step;
    let param_box: Vec<(f64, f64)> =
        (0..n).map(|i| (lo[i] - margin, hi[i] + margin)).collect();
    let fspec = fmap_spec_for_profile(
        field,
        &spec.gram,
        spec.profile.clone(),
        &bundle.weyl,
        pb.base_point.clone(),
        param_box,
    )
    .map_err(|e| e.to_string())?;
    pullback_residual(&fspec, field, &grid, pb.fd_step, pb.ode_tol).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Suite driver
// ---------------------------------------------------------------------------

fn catalog_entry(name: &str) -> Option<(&'static str, &'static str, f64)> {
    CHECK_CATALOG.iter().copied().find(|(n, _, _)| *n == name)
}

/// Execute the configured checks; never panics on check errors (they become
/// failed results).
pub fn run_suite(config: &VerificationConfig) -> Result<Report, ConfigError> {
    run_suite_timed(config).map(|(report, _)| report)
}

/// Like [`run_suite`], additionally reporting wall-clock seconds per check.
/// Timings are returned out of band and never enter the report, which must
/// stay byte-identical across runs.
pub fn run_suite_timed(
    config: &VerificationConfig,
) -> Result<(Report, Vec<f64>), ConfigError> {
    config.validate()?;
    let ctx = build_context(config)?;
    let data = collect_point_data(&ctx);
    let enabled: Vec<String> = match &config.checks {
        Some(list) => {
            for name in list {
                if catalog_entry(name).is_none() {
                    return Err(invalid("checks", format!("unknown check `{name}`")));
                }
            }
            list.clone()
        }
        None => default_checks(&ctx.family).into_iter().map(String::from).collect(),
    };
    let mut results = Vec::with_capacity(enabled.len());
    let mut timings = Vec::with_capacity(enabled.len());
    for name in &enabled {
        let (cname, anchor, default_tol) = catalog_entry(name).expect("validated above");
        let tolerance = config.tolerances.get(cname).copied().unwrap_or(default_tol);
        let started = std::time::Instant::now();
        let outcome = run_check(cname, &ctx, &data, config);
        timings.push(started.elapsed().as_secs_f64());
        let pass = match outcome.pass_override {
            Some(p) => p,
            None => outcome.max_residual.map(|r| r <= tolerance).unwrap_or(false),
        };
        results.push(CheckResult {
            name: cname.to_string(),
            anchor: anchor.to_string(),
            points: ctx.points.len(),
            max_residual: outcome.max_residual,
            tolerance,
            pass,
            worst_point: outcome.worst_point,
            verdict: outcome.verdict,
            error: outcome.error,
        });
    }
    let overall_pass = results.iter().all(|c| c.pass);
    Ok((Report { config_echo: config_echo(config), checks: results, overall_pass }, timings))
}

/// Echo of the resolved configuration (the parsed values, with defaults
/// made explicit), rebuilt as a JSON value for the report.
fn config_echo(config: &VerificationConfig) -> Value {
    let mut m = Map::new();
    m.insert("family".into(), json!(config.family));
    m.insert("samples".into(), json!(config.samples));
    m.insert("seed".into(), json!(config.seed));
    m.insert(
        "box".into(),
        json!(config.sample_box.iter().map(|&[a, b]| vec![a, b]).collect::<Vec<_>>()),
    );
    let tols: Map<String, Value> = config
        .tolerances
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    m.insert("tolerances".into(), Value::Object(tols));
    m.insert(
        "checks".into(),
        match &config.checks {
            Some(c) => json!(c),
            None => Value::String("default".into()),
        },
    );
    // the output path is not an input of the verification and stays out
    Value::Object(m)
}
