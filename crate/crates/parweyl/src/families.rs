//! Builders and validators for the two explicit metric families.
//!
//! The null-line family lives on coordinates (t, s, ψ¹..ψ^{n-2}) and has
//! `g_tt = f(t)⟨ψ,ψ⟩ + ⟨Aψ,ψ⟩`, `g_ts = 1/2` (symmetric-product
//! convention for `dt ds`), and the constant block ⟨,⟩ on the ψ-directions.
//!
//! The cotangent family starts from a projectively flat torsion-free
//! surface connection with a parallel area form; the Riemann extension
//! pairs verticals with projected vectors and makes horizontal lifts null,
//! which forces `h = 2 dx^j dp_j − 2 p_l Γ^l_jk dx^j dx^k`. The full metric
//! subtracts `2τ` (the area-form conjugate of a tensor solving the
//! divergence equation) and `θ(v)·ρ` of the surface connection.
//!
//! Every nontrivial surface fixture is re-validated at load time by the
//! residual operations in this module; nothing is trusted from the
//! constructor alone.

use crate::chart::{ChartSpec, MetricField};
use crate::expr::{Expr, PiecewisePoly, Poly};
use crate::linalg::{self, at};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("family invariant violated: {invariant} (residual {residual:.3e})")]
    SpecInvariantViolated { invariant: String, residual: f64 },
    #[error("surface connection is not equiaffine: max |∇α| = {0:.3e}")]
    NotEquiaffine(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{0}")]
    Chart(String),
}

fn invariant(name: &str, residual: f64) -> FamilyError {
    FamilyError::SpecInvariantViolated { invariant: name.to_string(), residual }
}

// ---------------------------------------------------------------------------
// d = 1 family
// ---------------------------------------------------------------------------

/// Parameters of the null-line family on I×R×V.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct D1FamilySpec {
    /// Total dimension, at least 4.
    pub n: usize,
    /// Inner product ⟨,⟩ on the (n−2)-dimensional factor, row-major.
    pub gram: Vec<f64>,
    /// The univariate profile f(t), piecewise polynomial with C³ joins.
    pub profile: PiecewisePoly,
    /// Nonzero traceless operator A, self-adjoint relative to ⟨,⟩.
    pub op: Vec<f64>,
    /// Chart domain for (t, s, ψ).
    pub domain: Vec<(f64, f64)>,
}

/// Diagnostics of the operator invariants (trace-free, self-adjoint,
/// nonzero) reported by [`validate_operator`].
#[derive(Debug, Clone)]
pub struct OperatorDiagnostics {
    pub trace: f64,
    /// Asymmetry of gram·A relative to its scale.
    pub self_adjointness_residual: f64,
    pub norm: f64,
    /// Rank of gram·A; the fiber computation degenerates on rank 1.
    pub pairing_rank: usize,
    pub pass: bool,
}

/// Check that `op` is nonzero, traceless, and self-adjoint w.r.t. `gram`.
pub fn validate_operator(op: &[f64], gram: &[f64]) -> Result<OperatorDiagnostics, FamilyError> {
    let m2 = op.len();
    let m = (m2 as f64).sqrt().round() as usize;
    if m * m != m2 || gram.len() != m2 {
        return Err(FamilyError::ShapeMismatch(format!(
            "operator and inner product must be square of equal size, got {} and {}",
            op.len(),
            gram.len()
        )));
    }
    let norm = linalg::max_abs(op);
    let trace: f64 = (0..m).map(|i| op[at(m, i, i)]).sum();
    let b = linalg::matmul(gram, op, m, m, m);
    let bscale = linalg::max_abs(&b).max(f64::MIN_POSITIVE);
    let mut asym: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            asym = asym.max((b[at(m, i, j)] - b[at(m, j, i)]).abs());
        }
    }
    let dec = linalg::svd(&b, m, m);
    let rank = linalg::rank_with_threshold(&dec.s, 1e-10, 1.0).rank;
    let diag = OperatorDiagnostics {
        trace,
        self_adjointness_residual: asym / bscale,
        norm,
        pairing_rank: rank,
        pass: norm > 0.0 && trace.abs() <= 1e-10 * norm.max(1.0) && asym / bscale <= 1e-10,
    };
    Ok(diag)
}

impl D1FamilySpec {
    pub fn validate(&self) -> Result<(), FamilyError> {
        if self.n < 4 {
            return Err(invariant("dimension n >= 4", self.n as f64));
        }
        let m = self.n - 2;
        if self.gram.len() != m * m || self.op.len() != m * m {
            return Err(FamilyError::ShapeMismatch(format!(
                "gram and op must be {m}×{m}"
            )));
        }
        if self.domain.len() != self.n {
            return Err(FamilyError::ShapeMismatch("domain must have n intervals".into()));
        }
        let gscale = linalg::max_abs(&self.gram).max(f64::MIN_POSITIVE);
        let mut gasym: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                gasym = gasym.max((self.gram[at(m, i, j)] - self.gram[at(m, j, i)]).abs());
            }
        }
        if gasym > 1e-12 * gscale {
            return Err(invariant("gram symmetric", gasym / gscale));
        }
        let d = linalg::det(&self.gram, m).abs();
        if d < 1e-12 * gscale.powi(m as i32) {
            return Err(invariant("gram nondegenerate", d));
        }
        let diag = validate_operator(&self.op, &self.gram)?;
        if diag.norm == 0.0 {
            return Err(invariant("operator nonzero", 0.0));
        }
        if diag.trace.abs() > 1e-10 * diag.norm.max(1.0) {
            return Err(invariant("operator traceless", diag.trace.abs()));
        }
        if diag.self_adjointness_residual > 1e-10 {
            return Err(invariant(
                "operator self-adjoint relative to gram",
                diag.self_adjointness_residual,
            ));
        }
        self.profile
            .validate()
            .map_err(|e| invariant(&format!("profile C³: {e}"), f64::NAN))?;
        Ok(())
    }

    /// The symmetric pairing `B = gram·A`, the quadratic form of the
    /// operator part of `g_tt`.
    pub fn pairing(&self) -> Vec<f64> {
        let m = self.n - 2;
        linalg::matmul(&self.gram, &self.op, m, m, m)
    }
}

/// Quadratic form Σ b_ab ψ^a ψ^b as a polynomial in the chart coordinates
/// (ψ^a is coordinate `offset + a`).
fn quadratic_form_poly(b: &[f64], m: usize, nvars: usize, offset: usize) -> Poly {
    let mut p = Poly::zero(nvars);
    for a in 0..m {
        for c in 0..m {
            if b[at(m, a, c)] == 0.0 {
                continue;
            }
            let term = Poly::coord(nvars, offset + a)
                .mul(&Poly::coord(nvars, offset + c))
                .scale(b[at(m, a, c)]);
            p = p.add(&term);
        }
    }
    p
}

/// Build the null-line family metric field.
pub fn build_d1_metric(spec: &D1FamilySpec) -> Result<MetricField, FamilyError> {
    spec.validate()?;
    let n = spec.n;
    let m = n - 2;
    let mut labels = vec!["t".to_string(), "s".to_string()];
    for a in 0..m {
        labels.push(format!("psi{}", a + 1));
    }
    let chart = ChartSpec::new(spec.domain.clone(), labels)
        .map_err(|e| FamilyError::Chart(e.to_string()))?;
    let gram_quad = quadratic_form_poly(&spec.gram, m, n, 2);
    let pairing_quad = quadratic_form_poly(&spec.pairing(), m, n, 2);
    let profile = spec.profile.clone();
    let gram = spec.gram.clone();
    MetricField::from_fn(chart, move |i, j| match (i, j) {
        (0, 0) => Expr::Piecewise { var: 0, pw: profile.clone() }
            .mul(Expr::Polynomial(gram_quad.clone()))
            .add(Expr::Polynomial(pairing_quad.clone())),
        (0, 1) => Expr::Const(0.5),
        (a, b) if a >= 2 && b >= 2 => Expr::Const(gram[at(m, a - 2, b - 2)]),
        _ => Expr::Const(0.0),
    })
    .map_err(|e| FamilyError::Chart(e.to_string()))
}

/// Closed-form value of `g_tt` at a point of the d=1 chart.
pub fn d1_g_tt(spec: &D1FamilySpec, t: f64, psi: &[f64]) -> f64 {
    let m = spec.n - 2;
    let b = spec.pairing();
    let mut gram_q = 0.0;
    let mut pair_q = 0.0;
    for a in 0..m {
        for c in 0..m {
            gram_q += spec.gram[at(m, a, c)] * psi[a] * psi[c];
            pair_q += b[at(m, a, c)] * psi[a] * psi[c];
        }
    }
    spec.profile.eval(t) * gram_q + pair_q
}

/// Draw a random admissible operator: nonzero, traceless, self-adjoint
/// w.r.t. `gram`, with full pairing rank (the degenerate rank-one stratum
/// is excluded because the fiber dimension jumps there).
pub fn random_admissible_op(gram: &[f64], m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let ginv = linalg::invert(gram, m).expect("gram must be invertible");
    loop {
        let mut sym = vec![0.0f64; m * m];
        for i in 0..m {
            for j in i..m {
                let v: f64 = rng.gen_range(-1.0..1.0);
                sym[at(m, i, j)] = v;
                sym[at(m, j, i)] = v;
            }
        }
        let a0 = linalg::matmul(&ginv, &sym, m, m, m);
        let tr: f64 = (0..m).map(|i| a0[at(m, i, i)]).sum();
        let mut a = a0;
        for i in 0..m {
            a[at(m, i, i)] -= tr / m as f64;
        }
        if let Ok(diag) = validate_operator(&a, gram) {
            if diag.pass && diag.pairing_rank >= 2 {
                return a;
            }
        }
    }
}

/// Canonical d=1 fixture: identity gram, diagonal traceless operator.
pub fn d1_fixture(n: usize, profile: PiecewisePoly) -> D1FamilySpec {
    let m = n - 2;
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        gram[at(m, i, i)] = 1.0;
    }
    let mut op = vec![0.0; m * m];
    // traceless diagonal with full-rank pairing: spread ±(1, 0.5, ...)
    for i in 0..m {
        let magnitude = 1.0 / (1.0 + (i / 2) as f64);
        op[at(m, i, i)] = if i % 2 == 0 { magnitude } else { -magnitude };
    }
    if m % 2 == 1 {
        // odd count: rebalance the trace onto the last two entries
        let tr: f64 = (0..m).map(|i| op[at(m, i, i)]).sum();
        op[at(m, m - 1, m - 1)] -= tr;
    }
    D1FamilySpec { n, gram, profile, op, domain: vec![(-1.0, 1.0); n] }
}

// ---------------------------------------------------------------------------
// Surface connections (the d = 2 family input)
// ---------------------------------------------------------------------------

/// A torsion-free connection on a 2-dimensional chart with an area form and
/// a twice-contravariant symmetric tensor, all polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceConnectionSpec {
    /// Christoffel symbols `gamma[k][i][j]`, polynomials in (x¹, x²);
    /// stored for i ≤ j (torsion-free by construction).
    pub gamma: Vec<Poly>,
    /// The component α_12 of the area form (α_21 = −α_12).
    pub area: Poly,
    /// Upper components T^11, T^12, T^22.
    pub t_upper: [Poly; 3],
    pub epsilon: f64,
}

fn tri2(k: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // pairs (0,0), (0,1), (1,1) per upper index k
    k * 3 + a + b
}

impl SurfaceConnectionSpec {
    pub fn flat(area: Poly, t_upper: [Poly; 3], epsilon: f64) -> Self {
        SurfaceConnectionSpec {
            gamma: vec![Poly::zero(2); 6],
            area,
            t_upper,
            epsilon,
        }
    }

    #[inline]
    pub fn gamma_at(&self, k: usize, i: usize, j: usize) -> &Poly {
        &self.gamma[tri2(k, i, j)]
    }

    pub fn set_gamma(&mut self, k: usize, i: usize, j: usize, p: Poly) {
        self.gamma[tri2(k, i, j)] = p;
    }

    pub fn t_at(&self, i: usize, j: usize) -> &Poly {
        match (i, j) {
            (0, 0) => &self.t_upper[0],
            (1, 1) => &self.t_upper[2],
            _ => &self.t_upper[1],
        }
    }

    /// Mixed curvature `R[j][k][l][s]` of the connection, exact polynomials.
    pub fn curvature_polys(&self) -> Vec<Poly> {
        let mut out = Vec::with_capacity(16);
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    for s in 0..2 {
                        let mut acc = self
                            .gamma_at(s, j, l)
                            .derivative(k)
                            .sub(&self.gamma_at(s, k, l).derivative(j));
                        for m in 0..2 {
                            acc = acc.add(&self.gamma_at(m, j, l).mul(self.gamma_at(s, k, m)));
                            acc = acc.sub(&self.gamma_at(m, k, l).mul(self.gamma_at(s, j, m)));
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    /// Ricci tensor `ρ[j][l] = R[j][k][l][k]` as polynomials.
    pub fn ricci_polys(&self) -> Vec<Poly> {
        let r = self.curvature_polys();
        let rat = |j: usize, k: usize, l: usize, s: usize| &r[((j * 2 + k) * 2 + l) * 2 + s];
        let mut out = Vec::with_capacity(4);
        for j in 0..2 {
            for l in 0..2 {
                out.push(rat(j, 0, l, 0).add(rat(j, 1, l, 1)));
            }
        }
        out
    }

    /// Covariant derivative of the Ricci tensor: `(∇_j ρ)[k][l]`, index
    /// order (j, k, l).
    pub fn nabla_ricci_polys(&self) -> Vec<Poly> {
        let rho = self.ricci_polys();
        let rat = |k: usize, l: usize| &rho[k * 2 + l];
        let mut out = Vec::with_capacity(8);
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut acc = rat(k, l).derivative(j);
                    for m in 0..2 {
                        acc = acc.sub(&self.gamma_at(m, j, k).mul(rat(m, l)));
                        acc = acc.sub(&self.gamma_at(m, j, l).mul(rat(k, m)));
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    /// `∇_j α_12` as polynomials (j = 0, 1).
    pub fn nabla_area_polys(&self) -> [Poly; 2] {
        let trace = |j: usize| self.gamma_at(0, j, 0).add(self.gamma_at(1, j, 1));
        [
            self.area.derivative(0).sub(&trace(0).mul(&self.area)),
            self.area.derivative(1).sub(&trace(1).mul(&self.area)),
        ]
    }

    /// Max |∇α| over sample points; equiaffinity diagnostic.
    pub fn area_parallel_residual(&self, points: &[[f64; 2]]) -> f64 {
        let na = self.nabla_area_polys();
        points
            .iter()
            .flat_map(|p| na.iter().map(move |q| q.eval(p).abs()))
            .fold(0.0, f64::max)
    }

    /// Projective flatness residual: deviation of ∇ρ from total symmetry.
    /// Errors with `NotEquiaffine` when the area form is not parallel.
    pub fn projective_flatness_residual(&self, points: &[[f64; 2]]) -> Result<f64, FamilyError> {
        let area_res = self.area_parallel_residual(points);
        if area_res > 1e-9 {
            return Err(FamilyError::NotEquiaffine(area_res));
        }
        let nr = self.nabla_ricci_polys();
        let nat = |j: usize, k: usize, l: usize| &nr[(j * 2 + k) * 2 + l];
        let mut worst: f64 = 0.0;
        for p in points {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = nat(j, k, l).eval(p) - nat(k, j, l).eval(p);
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Residual of the divergence equation
    /// `div(div T) + (ρ, T) − ε`, max over sample points.
    pub fn divergence_residual(&self, points: &[[f64; 2]]) -> f64 {
        let rho = self.ricci_polys();
        // S^j = ∇_k T^{jk} = ∂_k T^jk + Γ^j_km T^mk + Γ^k_km T^jm
        let mut s_vec: Vec<Poly> = Vec::with_capacity(2);
        for j in 0..2 {
            let mut acc = Poly::zero(2);
            for k in 0..2 {
                acc = acc.add(&self.t_at(j, k).derivative(k));
                for m in 0..2 {
                    acc = acc.add(&self.gamma_at(j, k, m).mul(self.t_at(m, k)));
                    acc = acc.add(&self.gamma_at(k, k, m).mul(self.t_at(j, m)));
                }
            }
            s_vec.push(acc);
        }
        // div S = ∂_j S^j + Γ^j_jm S^m
        let mut div2 = s_vec[0].derivative(0).add(&s_vec[1].derivative(1));
        for m in 0..2 {
            for j in 0..2 {
                div2 = div2.add(&self.gamma_at(j, j, m).mul(&s_vec[m]));
            }
        }
        let mut pairing = Poly::zero(2);
        for j in 0..2 {
            for k in 0..2 {
                pairing = pairing.add(&rho[j * 2 + k].mul(self.t_at(j, k)));
            }
        }
        let residual_poly = div2.add(&pairing).sub(&Poly::constant(2, self.epsilon));
        points
            .iter()
            .map(|p| residual_poly.eval(p).abs())
            .fold(0.0, f64::max)
    }

    /// Max |∇ρ| over sample points; zero exactly when ρ is parallel.
    pub fn nabla_ricci_max(&self, points: &[[f64; 2]]) -> f64 {
        let nr = self.nabla_ricci_polys();
        points
            .iter()
            .flat_map(|p| nr.iter().map(move |q| q.eval(p).abs()))
            .fold(0.0, f64::max)
    }

    /// Full admissibility validation on a sample grid.
    pub fn validate(&self, points: &[[f64; 2]]) -> Result<(), FamilyError> {
        if self.epsilon != 1.0 && self.epsilon != -1.0 {
            return Err(invariant("epsilon ∈ {−1, +1}", self.epsilon));
        }
        for p in points {
            if self.area.eval(p).abs() < 1e-12 {
                return Err(invariant("area form nonzero on domain", 0.0));
            }
        }
        let area_res = self.area_parallel_residual(points);
        if area_res > 1e-9 {
            return Err(invariant("area form parallel", area_res));
        }
        let pf = self.projective_flatness_residual(points)?;
        if pf > 1e-8 {
            return Err(invariant("projectively flat", pf));
        }
        let dv = self.divergence_residual(points);
        if dv > 1e-8 {
            return Err(invariant("divergence equation", dv));
        }
        // equiaffine torsion-free connections have symmetric Ricci
        let rho = self.ricci_polys();
        let asym = rho[1].sub(&rho[2]);
        for p in points {
            if asym.eval(p).abs() > 1e-10 {
                return Err(invariant("Ricci symmetric", asym.eval(p).abs()));
            }
        }
        Ok(())
    }
}

/// Default 5×5 validation grid over a surface box.
pub fn surface_grid(xr: (f64, f64), yr: (f64, f64)) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(25);
    for i in 0..5 {
        for j in 0..5 {
            let fx = 0.1 + 0.8 * (i as f64) / 4.0;
            let fy = 0.1 + 0.8 * (j as f64) / 4.0;
            out.push([
                xr.0 + fx * (xr.1 - xr.0),
                yr.0 + fy * (yr.1 - yr.0),
            ]);
        }
    }
    out
}

/// `τ_jk = α_jl α_km T^lm` for a 2-dimensional area form; returns the
/// upper-triangular components (τ_11, τ_12, τ_22), symmetric by
/// construction.
pub fn tau_from_t(t_upper: &[Poly; 3], area: &Poly) -> Result<[Poly; 3], FamilyError> {
    for p in t_upper.iter().chain(std::iter::once(area)) {
        if p.nvars != 2 {
            return Err(FamilyError::ShapeMismatch(
                "surface tensors must be polynomials in 2 variables".into(),
            ));
        }
    }
    let a2 = area.mul(area);
    Ok([
        a2.mul(&t_upper[2]),          // τ_11 = α_12 α_12 T^22
        a2.mul(&t_upper[1]).scale(-1.0), // τ_12 = α_12 α_21 T^21
        a2.mul(&t_upper[0]),          // τ_22 = α_21 α_21 T^11
    ])
}

/// Riemann extension of the surface connection: the neutral metric on the
/// 4-dimensional chart (x¹, x², p₁, p₂) that makes verticals and
/// horizontal lifts null and pairs verticals with projected vectors.
pub fn riemann_extension(
    surface: &SurfaceConnectionSpec,
    domain: Vec<(f64, f64)>,
) -> Result<MetricField, FamilyError> {
    if domain.len() != 4 {
        return Err(FamilyError::ShapeMismatch("riemann extension chart is 4-dimensional".into()));
    }
    let labels = vec!["x1".into(), "x2".into(), "p1".into(), "p2".into()];
    let chart = ChartSpec::new(domain, labels).map_err(|e| FamilyError::Chart(e.to_string()))?;
    let nvars = 4;
    let hxx = |i: usize, j: usize| -> Poly {
        let mut acc = Poly::zero(nvars);
        for l in 0..2 {
            let g = surface.gamma_at(l, i, j).embed(nvars);
            acc = acc.add(&g.mul(&Poly::coord(nvars, 2 + l)).scale(-2.0));
        }
        acc
    };
    MetricField::from_fn(chart, move |i, j| match (i, j) {
        (0, 2) | (1, 3) => Expr::Const(1.0),
        (a, b) if a < 2 && b < 2 => Expr::Polynomial(hxx(a, b)),
        _ => Expr::Const(0.0),
    })
    .map_err(|e| FamilyError::Chart(e.to_string()))
}

// ---------------------------------------------------------------------------
// d = 2 family
// ---------------------------------------------------------------------------

/// Parameters of the cotangent family on T*Σ × V.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct D2FamilySpec {
    pub surface: SurfaceConnectionSpec,
    /// Total dimension, 4 + dim V.
    pub n: usize,
    /// Inner product on V, row-major (n−4)²; empty when n = 4.
    pub gram_v: Vec<f64>,
    /// Chart domain for (x¹, x², p₁, p₂, v¹..).
    pub domain: Vec<(f64, f64)>,
}

impl D2FamilySpec {
    pub fn validate(&self) -> Result<(), FamilyError> {
        if self.n < 4 {
            return Err(invariant("dimension n >= 4", self.n as f64));
        }
        let mv = self.n - 4;
        if self.gram_v.len() != mv * mv {
            return Err(FamilyError::ShapeMismatch(format!(
                "gram_v must be {mv}×{mv} (n − 4 = {mv})"
            )));
        }
        if self.domain.len() != self.n {
            return Err(FamilyError::ShapeMismatch("domain must have n intervals".into()));
        }
        if mv > 0 {
            let scale = linalg::max_abs(&self.gram_v).max(f64::MIN_POSITIVE);
            let d = linalg::det(&self.gram_v, mv).abs();
            if d < 1e-12 * scale.powi(mv as i32) {
                return Err(invariant("gram_v nondegenerate", d));
            }
        }
        let grid = surface_grid(self.domain[0], self.domain[1]);
        self.surface.validate(&grid)
    }
}

/// Build the cotangent family metric field on (x¹, x², p₁, p₂, v¹..).
pub fn build_d2_metric(spec: &D2FamilySpec) -> Result<MetricField, FamilyError> {
    spec.validate()?;
    let n = spec.n;
    let mv = n - 4;
    let mut labels = vec!["x1".to_string(), "x2".to_string(), "p1".into(), "p2".into()];
    for a in 0..mv {
        labels.push(format!("v{}", a + 1));
    }
    let chart = ChartSpec::new(spec.domain.clone(), labels)
        .map_err(|e| FamilyError::Chart(e.to_string()))?;
    let tau = tau_from_t(&spec.surface.t_upper, &spec.surface.area)?;
    let tau_at = |i: usize, j: usize| -> &Poly {
        match (i, j) {
            (0, 0) => &tau[0],
            (1, 1) => &tau[2],
            _ => &tau[1],
        }
    };
    let rho = spec.surface.ricci_polys();
    let theta = quadratic_form_poly(&spec.gram_v, mv, n, 4);
    let surface = spec.surface.clone();
    let gram_v = spec.gram_v.clone();
    MetricField::from_fn(chart, move |i, j| match (i, j) {
        (a, b) if a < 2 && b < 2 => {
            // h-part −2 p_l Γ^l_ab, minus 2τ_ab, minus θ(v) ρ_ab
            let mut comp = Poly::zero(n);
            for l in 0..2 {
                let g = surface.gamma_at(l, a, b).embed(n);
                comp = comp.add(&g.mul(&Poly::coord(n, 2 + l)).scale(-2.0));
            }
            comp = comp.add(&tau_at(a, b).embed(n).scale(-2.0));
            let rho_ab = rho[a * 2 + b].embed(n);
            comp = comp.sub(&theta.mul(&rho_ab));
            Expr::Polynomial(comp)
        }
        (0, 2) | (1, 3) => Expr::Const(1.0),
        (a, b) if a >= 4 && b >= 4 => Expr::Const(gram_v[at(mv, a - 4, b - 4)]),
        _ => Expr::Const(0.0),
    })
    .map_err(|e| FamilyError::Chart(e.to_string()))
}

/// Flat-connection fixture: Γ = 0, ε = 1, T^11 = (x¹)²/2.
pub fn d2_flat_fixture(n: usize) -> D2FamilySpec {
    let mut t11 = Poly::coord(2, 0);
    t11 = t11.mul(&t11).scale(0.5);
    let surface = SurfaceConnectionSpec::flat(
        Poly::constant(2, 1.0),
        [t11, Poly::zero(2), Poly::zero(2)],
        1.0,
    );
    d2_spec_with_surface(n, surface)
}

/// Curved projectively flat fixture with parallel Ricci tensor:
/// Γ²₁₁ = x², T^11 = 1/2, ε = 1 (the surface Ricci is dx¹⊗dx¹).
pub fn d2_nonflat_symmetric_fixture(n: usize) -> D2FamilySpec {
    let mut surface = SurfaceConnectionSpec::flat(
        Poly::constant(2, 1.0),
        [Poly::constant(2, 0.5), Poly::zero(2), Poly::zero(2)],
        1.0,
    );
    surface.set_gamma(1, 0, 0, Poly::coord(2, 1));
    d2_spec_with_surface(n, surface)
}

/// Curved projectively flat fixture with non-parallel Ricci tensor:
/// Γ²₁₁ = x¹x², T^22 = (x²)²/2, ε = 1 (the surface Ricci is x¹ dx¹⊗dx¹).
pub fn d2_nonflat_nonsymmetric_fixture(n: usize) -> D2FamilySpec {
    let mut t22 = Poly::coord(2, 1);
    t22 = t22.mul(&t22).scale(0.5);
    let mut surface = SurfaceConnectionSpec::flat(
        Poly::constant(2, 1.0),
        [Poly::zero(2), Poly::zero(2), t22],
        1.0,
    );
    surface.set_gamma(1, 0, 0, Poly::coord(2, 0).mul(&Poly::coord(2, 1)));
    d2_spec_with_surface(n, surface)
}

fn d2_spec_with_surface(n: usize, surface: SurfaceConnectionSpec) -> D2FamilySpec {
    let mv = n - 4;
    let mut gram_v = vec![0.0; mv * mv];
    for i in 0..mv {
        gram_v[at(mv, i, i)] = 1.0;
    }
    D2FamilySpec { surface, n, gram_v, domain: vec![(-1.0, 1.0); n] }
}

impl Poly {
    /// Reinterpret in a larger variable set (extra variables unused).
    pub fn embed(&self, nvars: usize) -> Poly {
        assert!(nvars >= self.nvars);
        Poly {
            nvars,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| {
                    let mut q = p.clone();
                    q.resize(nvars, 0);
                    (q, *c)
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::signature;

    fn grid() -> Vec<[f64; 2]> {
        surface_grid((-1.0, 1.0), (-1.0, 1.0))
    }

    #[test]
    fn operator_validation_examples() {
        let id2 = vec![1.0, 0.0, 0.0, 1.0];
        let diag = validate_operator(&[1.0, 0.0, 0.0, -1.0], &id2).unwrap();
        assert!(diag.pass);
        assert_eq!(diag.pairing_rank, 2);
        let diag = validate_operator(&id2, &id2).unwrap();
        assert!(!diag.pass); // trace 2
        let diag = validate_operator(&[0.0; 4], &id2).unwrap();
        assert!(!diag.pass); // zero operator
    }

    #[test]
    fn d1_metric_components_match_closed_form() {
        let spec = d1_fixture(4, PiecewisePoly::constant(0.0));
        let field = build_d1_metric(&spec).unwrap();
        // ψ = (1, 0): g_tt = ⟨Aψ,ψ⟩ = 1 (A = diag(1,−1), f ≡ 0)
        let g = field.values(&[0.3f64, 0.1, 1.0, 0.0]);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[1] - 0.5).abs() < 1e-15);
        assert!((g[4 * 2 + 2] - 1.0).abs() < 1e-15);
        // ψ = 0 slice: g_tt vanishes (quadratic with no constant term)
        let g0 = field.values(&[0.5f64, -0.2, 0.0, 0.0]);
        assert_eq!(g0[0], 0.0);
        assert!((d1_g_tt(&spec, 0.3, &[1.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn d1_signature_is_one_minus_gram_one_plus() {
        let spec = d1_fixture(5, PiecewisePoly::single(vec![0.0, 1.0]));
        let field = build_d1_metric(&spec).unwrap();
        let g = field.values(&[0.4f64, 0.2, 0.7, -0.3, 0.5]);
        let sig = signature(&g, 5);
        // gram = identity on 3 directions: pattern (1 negative, 4 positive)
        assert_eq!((sig.negative, sig.zero, sig.positive), (1, 0, 4));
    }

    #[test]
    fn d1_rejects_bad_operators() {
        let mut spec = d1_fixture(4, PiecewisePoly::constant(1.0));
        spec.op = vec![1.0, 0.0, 0.0, 1.0]; // identity: trace 2
        let err = build_d1_metric(&spec).unwrap_err();
        assert!(matches!(err, FamilyError::SpecInvariantViolated { .. }));
        let mut spec = d1_fixture(4, PiecewisePoly::constant(1.0));
        spec.op = vec![0.0; 4];
        assert!(build_d1_metric(&spec).is_err());
    }

    #[test]
    fn random_operators_are_admissible() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let gram = vec![1.0, 0.0, 0.0, -1.0];
        for _ in 0..5 {
            let op = random_admissible_op(&gram, 2, &mut rng);
            let diag = validate_operator(&op, &gram).unwrap();
            assert!(diag.pass && diag.pairing_rank == 2);
        }
    }

    #[test]
    fn tau_from_t_flips_indices() {
        // T = e1⊙e1 with the standard area form: τ = e²⊗e².
        let t = [Poly::constant(2, 1.0), Poly::zero(2), Poly::zero(2)];
        let tau = tau_from_t(&t, &Poly::constant(2, 1.0)).unwrap();
        assert!(tau[0].is_zero());
        assert!(tau[1].is_zero());
        assert_eq!(tau[2].eval(&[0.0f64, 0.0]), 1.0);
        // τ symmetric by construction; T = 0 gives τ = 0.
        let z = tau_from_t(&[Poly::zero(2), Poly::zero(2), Poly::zero(2)], &Poly::constant(2, 1.0))
            .unwrap();
        assert!(z.iter().all(|p| p.is_zero()));
    }

    #[test]
    fn riemann_extension_nullity_and_pairing() {
        // Nonflat connection: vertical vectors and horizontal lifts null,
        // pairing h(ζ, w) = ζ(dπ w) at sample points.
        let fixture = d2_nonflat_symmetric_fixture(4);
        let field = riemann_extension(&fixture.surface, vec![(-1.0, 1.0); 4]).unwrap();
        for pt in [[0.3f64, -0.2, 0.5, 0.7], [0.1, 0.9, -0.4, 0.2]] {
            let g = field.values(&pt);
            // verticals null
            for a in 2..4 {
                for b in 2..4 {
                    assert_eq!(g[a * 4 + b], 0.0);
                }
            }
            // horizontal lifts: X^h = ∂_j + p_l Γ^l_jk ∂_{p_k}
            let gamma = |l: usize, jj: usize, kk: usize| fixture.surface.gamma_at(l, jj, kk).eval(&[pt[0], pt[1]]);
            let lift = |j: usize| -> [f64; 4] {
                let mut v = [0.0; 4];
                v[j] = 1.0;
                for k in 0..2 {
                    v[2 + k] = pt[2] * gamma(0, j, k) + pt[3] * gamma(1, j, k);
                }
                v
            };
            for j in 0..2 {
                for k in 0..2 {
                    let (a, b) = (lift(j), lift(k));
                    let mut h = 0.0;
                    for r in 0..4 {
                        for c in 0..4 {
                            h += g[r * 4 + c] * a[r] * b[c];
                        }
                    }
                    assert!(h.abs() < 1e-12, "horizontal lift not null: {h}");
                }
            }
            // pairing: h(dp_j-direction, w) = w^j
            let w = [0.3, -0.8, 0.25, 0.6];
            for j in 0..2 {
                let mut h = 0.0;
                for c in 0..4 {
                    h += g[(2 + j) * 4 + c] * w[c];
                }
                assert!((h - w[j]).abs() < 1e-12);
            }
        }
        // flat connection: constant components, neutral signature (2,2)
        let flat = d2_flat_fixture(4);
        let hf = riemann_extension(&SurfaceConnectionSpec::flat(
            flat.surface.area.clone(),
            flat.surface.t_upper.clone(),
            1.0,
        ), vec![(-1.0, 1.0); 4])
        .unwrap();
        let g = hf.values(&[0.0f64, 0.0, 0.0, 0.0]);
        let sig = signature(&g, 4);
        assert_eq!((sig.negative, sig.zero, sig.positive), (2, 0, 2));
    }

    #[test]
    fn divergence_residual_examples() {
        // flat connection, ε = 1, T^11 = (x¹)²/2: residual 0
        let fx = d2_flat_fixture(4);
        assert!(fx.surface.divergence_residual(&grid()) < 1e-14);
        // flat connection, T = 0: residual ≡ |−ε| = 1
        let zero_t = SurfaceConnectionSpec::flat(
            Poly::constant(2, 1.0),
            [Poly::zero(2), Poly::zero(2), Poly::zero(2)],
            1.0,
        );
        assert!((zero_t.divergence_residual(&grid()) - 1.0).abs() < 1e-14);
        // curved fixtures were constructed to solve the equation exactly
        assert!(d2_nonflat_symmetric_fixture(4).surface.divergence_residual(&grid()) < 1e-14);
        assert!(d2_nonflat_nonsymmetric_fixture(4).surface.divergence_residual(&grid()) < 1e-14);
    }

    #[test]
    fn projective_flatness_accepts_fixtures_and_rejects_non_equiaffine() {
        let g = grid();
        for fx in [
            d2_flat_fixture(4),
            d2_nonflat_symmetric_fixture(4),
            d2_nonflat_nonsymmetric_fixture(4),
        ] {
            assert!(fx.surface.projective_flatness_residual(&g).unwrap() < 1e-14);
        }
        // Γ¹₁₁ = x² has a non-closed trace 1-form: no parallel area form.
        let mut bad = SurfaceConnectionSpec::flat(
            Poly::constant(2, 1.0),
            [Poly::zero(2), Poly::zero(2), Poly::zero(2)],
            1.0,
        );
        bad.set_gamma(0, 0, 0, Poly::coord(2, 1));
        assert!(matches!(
            bad.projective_flatness_residual(&g),
            Err(FamilyError::NotEquiaffine(_))
        ));
    }

    #[test]
    fn surface_ricci_matches_hand_computation() {
        // Γ²₁₁ = x¹x²: ρ = x¹ dx¹⊗dx¹, ∇ρ = dx¹⊗dx¹⊗dx¹ (total symmetric).
        let fx = d2_nonflat_nonsymmetric_fixture(4);
        let rho = fx.surface.ricci_polys();
        assert_eq!(rho[0].eval(&[0.7f64, -0.3]), 0.7);
        assert!(rho[1].is_zero() && rho[2].is_zero() && rho[3].is_zero());
        assert!(fx.surface.nabla_ricci_max(&grid()) > 0.9);
        let sym_fx = d2_nonflat_symmetric_fixture(4);
        assert_eq!(sym_fx.surface.nabla_ricci_max(&grid()), 0.0);
    }

    #[test]
    fn d2_metric_assembles_expected_components() {
        // Flat fixture, n = 4: g_x²x² = −2τ_22 = −(x¹)², unit dx/dp pairing.
        let spec = d2_flat_fixture(4);
        let field = build_d2_metric(&spec).unwrap();
        let pt = [0.7f64, -0.3, 0.2, 0.4];
        let g = field.values(&pt);
        assert!((g[1 * 4 + 1] + 0.49).abs() < 1e-15);
        assert_eq!(g[0 * 4 + 2], 1.0);
        assert_eq!(g[1 * 4 + 3], 1.0);
        assert_eq!(g[0], 0.0);
        let sig = signature(&g, 4);
        assert_eq!((sig.negative, sig.positive), (2, 2));
    }

    #[test]
    fn d1_engine_curvature_matches_closed_form() {
        // Hand derivation for g = (f⟨ψ,ψ⟩+⟨Aψ,ψ⟩) dt² + dt ds + ⟨,⟩:
        // the only nonzero Christoffels are Γ^s_tt = ∂_t g_tt,
        // Γ^s_tψa = ∂_ψa g_tt, Γ^ψc_tt = −½ γ^{cb} ∂_ψb g_tt, and the only
        // nonzero mixed curvature components (up to symmetries) are
        // R_{t ψa t}^{ψc} = −(f δ + A)^c_a and R_{t ψa ψb}^s = 2(fγ+B)_ab.
        use crate::curvature::{christoffel, curvature_bundle, riemann};
        let spec = d1_fixture(4, PiecewisePoly::single(vec![0.0, 1.0]));
        let field = build_d1_metric(&spec).unwrap();
        let (t, psi) = (0.35f64, [0.6, -0.4]);
        let p = vec![t, 0.2, psi[0], psi[1]];
        let jet = field.evaluate_jet(&p, 3).unwrap();
        let conn = christoffel(&jet).unwrap();
        let m = 2;
        let b = spec.pairing();
        let f_val = t;
        let kappa_t: f64 = psi.iter().map(|x| x * x).sum::<f64>(); // f' ⟨ψ,ψ⟩ with f' = 1
        assert!((conn.at(1, 0, 0) - kappa_t).abs() < 1e-14);
        for a in 0..m {
            let kappa_a: f64 = (0..m)
                .map(|c| 2.0 * (f_val * spec.gram[at(m, a, c)] + b[at(m, a, c)]) * psi[c])
                .sum();
            assert!((conn.at(1, 0, 2 + a) - kappa_a).abs() < 1e-14);
            assert!((conn.at(2 + a, 0, 0) + 0.5 * kappa_a).abs() < 1e-14);
        }
        // pattern check: everything else vanishes
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let expected_nonzero = (k == 1 && i == 0 && j == 0)
                        || (k == 1 && ((i == 0 && j >= 2) || (j == 0 && i >= 2)))
                        || (k >= 2 && i == 0 && j == 0);
                    if !expected_nonzero {
                        assert!(conn.at(k, i, j).abs() < 1e-14, "Γ^{k}_{i}{j} unexpected");
                    }
                }
            }
        }
        let (mixed, _) = riemann(&conn, &jet.g).unwrap();
        for a in 0..m {
            for c in 0..m {
                let expect = -(f_val * if a == c { 1.0 } else { 0.0 } + spec.op[at(m, c, a)]);
                assert!((mixed.get(&[0, 2 + a, 0, 2 + c]) - expect).abs() < 1e-13);
                let expect_s = 2.0 * (f_val * spec.gram[at(m, a, c)] + b[at(m, a, c)]);
                assert!((mixed.get(&[0, 2 + a, 2 + c, 1]) - expect_s).abs() < 1e-13);
            }
        }
        // Ricci: ρ = (2−n) f dt⊗dt and zero scalar curvature
        let bundle = curvature_bundle(&jet).unwrap();
        assert!((bundle.ricci.get(&[0, 0]) - (2.0 - 4.0) * f_val).abs() < 1e-13);
        assert!(bundle.scalar.abs() < 1e-13);
    }

    #[test]
    fn d2_metric_with_v_factor_carries_theta_rho_term() {
        let spec = d2_nonflat_symmetric_fixture(5);
        let field = build_d2_metric(&spec).unwrap();
        let pt = [0.2f64, 0.3, -0.1, 0.5, 0.8];
        let g = field.values(&pt);
        // ρ_11 = 1, θ(v) = v², h_11 = −2 p₂ Γ²₁₁ = −2 p₂ x²:
        let expect = -2.0 * pt[3] * pt[1] - 2.0 * 0.0 - pt[4] * pt[4] * 1.0;
        assert!((g[0] - expect).abs() < 1e-14);
        assert_eq!(g[4 * 5 + 4], 1.0);
    }
}
