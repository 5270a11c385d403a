//! The Olszak distribution: the parallel subbundle of vectors whose metric
//! dual wedge-divides every 2-form in the image of the Weyl operator.
//!
//! Pointwise the defining condition is a finite linear system: the image
//! 2-forms are spanned by `W(e_i, e_j, ·, ·)` over coordinate pairs, and a
//! 1-form ξ divides a 2-form Ω exactly when `ξ∧Ω = 0`. The fiber is the
//! kernel of the stacked system, pulled back to vectors through `g⁻¹`.
//! Its dimension `d` is the central discrete invariant; ambiguous numerical
//! rank is a hard error, never silently resolved.

use crate::chart::MetricField;
use crate::curvature::{curvature_bundle, CurvatureBundle};
use crate::linalg::{self, at};
use crate::scalar::Real;
use crate::tensor::{pair_basis, two_form_operator, wedge_divisibility_system};
use thiserror::Error;

/// Relative singular-value cutoff for every rank decision here.
pub const RANK_REL_THRESHOLD: f64 = 1e-8;
/// Singular values within this factor of the cutoff make a rank ambiguous.
pub const RANK_AMBIGUITY_WINDOW: f64 = 100.0;
/// Weyl tensors below this fraction of the Riemann scale count as zero
/// (conformally flat), giving `d = n`.
pub const WEYL_ZERO_REL_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OlszakError {
    #[error(
        "numerical rank ambiguous: candidate dimensions {low} and {high} \
         (singular values {values:?})"
    )]
    RankDeficiencyAmbiguous { low: usize, high: usize, values: Vec<f64> },
    #[error("operation requires a 2-dimensional fiber, found d = {0}")]
    PreconditionD2(usize),
    #[error("curvature endomorphism identity not satisfied: residual {0:.3e}")]
    IdentityNotSatisfied(f64),
    #[error("fiber dimension jumps from {here} to {there} between neighboring points")]
    FiberDimensionJump { here: usize, there: usize },
    #[error("Olszak fiber needs dimension ≥ 4, got {0}")]
    DimensionTooSmall(usize),
    #[error("zero vector supplied")]
    ZeroVector,
    #[error("{0}")]
    Upstream(String),
}

/// Spanning vectors of the Olszak fiber at a point.
#[derive(Debug, Clone)]
pub struct DistributionBasis<T> {
    pub point: Vec<T>,
    pub d: usize,
    /// `d` contravariant vectors, rows of length `n`, unit Euclidean norm.
    pub basis: Vec<Vec<T>>,
    /// Gram matrix of the basis under `g` (d×d, row-major); nullity
    /// diagnostics for `d ∈ {1, 2}`.
    pub gram: Vec<T>,
}

impl<T: Real> DistributionBasis<T> {
    pub fn gram_max_abs(&self) -> T {
        linalg::max_abs(&self.gram)
    }

    /// Basis vectors as an `n×d` column matrix.
    pub fn column_matrix(&self, n: usize) -> Vec<T> {
        let d = self.d;
        let mut out = vec![T::zero(); n * d];
        for (c, v) in self.basis.iter().enumerate() {
            for r in 0..n {
                out[at(d, r, c)] = v[r];
            }
        }
        out
    }
}

/// The 2-form Ω with `R(·,·)u = Ω ⊗ u`, fitted in least squares.
#[derive(Debug, Clone)]
pub struct OmegaForm<T> {
    pub point: Vec<T>,
    /// Antisymmetric (0,2) components, n×n row-major.
    pub omega: Vec<T>,
    /// Fit residual relative to max |R|.
    pub residual: T,
}

fn image_two_forms<T: Real>(bundle: &CurvatureBundle<T>) -> Vec<Vec<T>> {
    let n = bundle.n;
    let w_scale = bundle.weyl.max_abs();
    let mut forms = Vec::new();
    for (i, j) in pair_basis(n) {
        let mut form = vec![T::zero(); n * n];
        let mut scale = T::zero();
        for k in 0..n {
            for l in 0..n {
                let v = bundle.weyl.get(&[i, j, k, l]);
                form[k * n + l] = v;
                scale = scale.max(v.abs());
            }
        }
        if scale > T::of(1e-13) * w_scale {
            // normalize each form so the rank decision is scale-free
            for x in form.iter_mut() {
                *x = *x / scale;
            }
            forms.push(form);
        }
    }
    forms
}

fn decide_rank<T: Real>(singular_values: &[T]) -> Result<usize, OlszakError> {
    let sv: Vec<T> = singular_values.to_vec();
    let decision =
        linalg::rank_with_threshold(&sv, T::of(RANK_REL_THRESHOLD), T::of(RANK_AMBIGUITY_WINDOW));
    if let Some((low, high)) = decision.ambiguous {
        return Err(OlszakError::RankDeficiencyAmbiguous {
            low,
            high,
            values: sv.iter().map(|s| s.to_f64().unwrap_or(f64::NAN)).collect(),
        });
    }
    Ok(decision.rank)
}

/// Compute the Olszak fiber at the bundle's point.
pub fn olszak_fiber<T: Real>(
    bundle: &CurvatureBundle<T>,
) -> Result<DistributionBasis<T>, OlszakError> {
    let n = bundle.n;
    if n < 4 {
        return Err(OlszakError::DimensionTooSmall(n));
    }
    let w_scale = bundle.weyl.max_abs();
    let r_scale = bundle.riemann.max_abs();
    if w_scale <= T::of(WEYL_ZERO_REL_THRESHOLD) * r_scale || w_scale == T::zero() {
        // Conformally flat: every 1-form divides the zero form, d = n.
        let basis: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|r| if r == i { T::one() } else { T::zero() }).collect())
            .collect();
        let gram = bundle.g.clone();
        return Ok(DistributionBasis { point: bundle.point.clone(), d: n, basis, gram });
    }
    let forms = image_two_forms(bundle);
    let sys = wedge_divisibility_system(&forms, n)
        .map_err(|e| OlszakError::Upstream(e.to_string()))?;
    let rows = sys.len() / n;
    let dec = linalg::svd(&sys, rows, n);
    let rank = decide_rank(&dec.s)?;
    let d = n - rank;
    // Kernel 1-forms sit in the trailing right singular vectors; translate
    // to vectors through g⁻¹ and normalize.
    let mut basis = Vec::with_capacity(d);
    for c in rank..n {
        let xi: Vec<T> = (0..n).map(|r| dec.v[at(n, r, c)]).collect();
        let mut u = vec![T::zero(); n];
        for r in 0..n {
            for s in 0..n {
                u[r] = u[r] + bundle.ginv[at(n, r, s)] * xi[s];
            }
        }
        let norm: T = u.iter().map(|&x| x * x).sum::<T>().sqrt();
        for x in u.iter_mut() {
            *x = *x / norm;
        }
        basis.push(u);
    }
    let mut gram = vec![T::zero(); d * d];
    for (a, ua) in basis.iter().enumerate() {
        for (b, ub) in basis.iter().enumerate() {
            let mut acc = T::zero();
            for r in 0..n {
                for s in 0..n {
                    acc = acc + bundle.g[at(n, r, s)] * ua[r] * ub[s];
                }
            }
            gram[at(d, a, b)] = acc;
        }
    }
    Ok(DistributionBasis { point: bundle.point.clone(), d, basis, gram })
}

/// Numerical rank of the Weyl tensor as an operator on 2-forms.
pub fn weyl_rank<T: Real>(bundle: &CurvatureBundle<T>) -> Result<usize, OlszakError> {
    let n = bundle.n;
    if n < 4 {
        return Err(OlszakError::DimensionTooSmall(n));
    }
    let op = two_form_operator(&bundle.weyl, &bundle.ginv)
        .map_err(|e| OlszakError::Upstream(e.to_string()))?;
    let np = n * (n - 1) / 2;
    let dec = linalg::svd(&op, np, np);
    decide_rank(&dec.s)
}

/// For `d = 2`: how well the vectors `W(u,v)v'` span the fiber.
/// Returns (max distance of the generated vectors from the fiber span,
/// relative to the largest generator; rank of the generator collection).
pub fn spanning_image_check<T: Real>(
    bundle: &CurvatureBundle<T>,
    basis: &DistributionBasis<T>,
) -> Result<(T, usize), OlszakError> {
    if basis.d != 2 {
        return Err(OlszakError::PreconditionD2(basis.d));
    }
    let n = bundle.n;
    let wm = bundle.weyl_mixed();
    let mut vectors: Vec<Vec<T>> = Vec::new();
    let mut scale = T::zero();
    for u in 0..n {
        for v in 0..n {
            for vp in 0..n {
                let w: Vec<T> = (0..n).map(|s| wm.get(&[u, v, vp, s])).collect();
                let norm = linalg::max_abs(&w);
                scale = scale.max(norm);
                vectors.push(w);
            }
        }
    }
    // Rank of the collection.
    let rows = vectors.len();
    let mut stack = vec![T::zero(); rows * n];
    for (r, w) in vectors.iter().enumerate() {
        for c in 0..n {
            stack[at(n, r, c)] = w[c] / scale.max(T::min_positive_value());
        }
    }
    let dec = linalg::svd(&stack, rows, n);
    let rank = decide_rank(&dec.s)?;
    // Distance of each generator from span(basis), in least squares.
    let bmat = basis.column_matrix(n);
    let mut worst = T::zero();
    for w in &vectors {
        let coeff = linalg::lstsq(&bmat, w, n, basis.d, T::of(1e-12));
        let mut resid = T::zero();
        for r in 0..n {
            let mut fit = T::zero();
            for c in 0..basis.d {
                fit = fit + bmat[at(basis.d, r, c)] * coeff[c];
            }
            resid = resid.max((w[r] - fit).abs());
        }
        worst = worst.max(resid);
    }
    Ok((worst / scale.max(T::min_positive_value()), rank))
}

/// Least-squares Ω for the identity `u^l R_jkl^s = Ω_jk u^s`; accepted when
/// the residual stays below 1e-8 relative to max |R|.
pub fn curvature_form_omega<T: Real>(
    bundle: &CurvatureBundle<T>,
    u: &[T],
) -> Result<OmegaForm<T>, OlszakError> {
    let n = bundle.n;
    let u_norm2: T = u.iter().map(|&x| x * x).sum();
    if u_norm2 == T::zero() {
        return Err(OlszakError::ZeroVector);
    }
    // m[j][k][s] = u^l R_jkl^s
    let mut m = vec![T::zero(); n * n * n];
    for j in 0..n {
        for k in 0..n {
            for s in 0..n {
                let mut acc = T::zero();
                for l in 0..n {
                    acc = acc + bundle.riemann_mixed.get(&[j, k, l, s]) * u[l];
                }
                m[(j * n + k) * n + s] = acc;
            }
        }
    }
    let mut omega = vec![T::zero(); n * n];
    for j in 0..n {
        for k in 0..n {
            let mut dot = T::zero();
            for s in 0..n {
                dot = dot + m[(j * n + k) * n + s] * u[s];
            }
            omega[j * n + k] = dot / u_norm2;
        }
    }
    // enforce exact antisymmetry of the fit
    for j in 0..n {
        for k in (j + 1)..n {
            let v = T::of(0.5) * (omega[j * n + k] - omega[k * n + j]);
            omega[j * n + k] = v;
            omega[k * n + j] = -v;
        }
        omega[j * n + j] = T::zero();
    }
    let r_scale = bundle.riemann.max_abs().max(T::min_positive_value());
    let u_scale = linalg::max_abs(u);
    let mut resid = T::zero();
    for j in 0..n {
        for k in 0..n {
            for s in 0..n {
                let v = m[(j * n + k) * n + s] - omega[j * n + k] * u[s];
                resid = resid.max(v.abs());
            }
        }
    }
    let residual = resid / (r_scale * u_scale.max(T::min_positive_value()));
    if residual > T::of(1e-8) {
        return Err(OlszakError::IdentityNotSatisfied(residual.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(OmegaForm { point: bundle.point.clone(), omega, residual })
}

/// Residual of the contraction identity `ρu = −Ωu` for an accepted Ω,
/// relative to max(|ρ|·|u|, |Ω|·|u|) (absolute when both vanish).
pub fn ricci_omega_consistency<T: Real>(
    bundle: &CurvatureBundle<T>,
    omega: &OmegaForm<T>,
    u: &[T],
) -> T {
    let n = bundle.n;
    let mut worst = T::zero();
    for j in 0..n {
        let mut rho_u = T::zero();
        let mut omega_u = T::zero();
        for l in 0..n {
            rho_u = rho_u + bundle.ricci.get(&[j, l]) * u[l];
            omega_u = omega_u + omega.omega[l * n + j] * u[l];
        }
        // identity: (ρu)_j = Ω_jk u^k = -(Ωu)_j with (Ωu)_j = Ω_kj u^k
        worst = worst.max((rho_u + omega_u).abs());
    }
    let scale = (bundle.ricci.max_abs().max(linalg::max_abs(&omega.omega))
        * linalg::max_abs(u))
    .max(T::min_positive_value());
    let abs_floor = bundle.riemann.max_abs() * linalg::max_abs(u);
    if abs_floor == T::zero() {
        return worst;
    }
    worst / scale.max(abs_floor * T::of(1e-6))
}

/// Discrete parallelism test: transport the fiber basis one explicit Euler
/// step along each coordinate direction and measure the largest principal
/// angle against the fiber computed at the displaced point.
pub fn parallelism_check<T: Real>(
    field: &MetricField,
    points: &[Vec<T>],
    step: T,
) -> Result<T, OlszakError> {
    let n = field.dim();
    let mut worst = T::zero();
    for point in points {
        let jet = field
            .evaluate_jet(point, 3)
            .map_err(|e| OlszakError::Upstream(e.to_string()))?;
        let bundle = curvature_bundle(&jet).map_err(|e| OlszakError::Upstream(e.to_string()))?;
        let fiber = olszak_fiber(&bundle)?;
        for m in 0..n {
            for sign in [T::one(), -T::one()] {
                let mut displaced = point.clone();
                displaced[m] = displaced[m] + sign * step;
                if !field.chart.contains(&displaced, 0.0) {
                    continue;
                }
                let jet2 = field
                    .evaluate_jet(&displaced, 3)
                    .map_err(|e| OlszakError::Upstream(e.to_string()))?;
                let bundle2 =
                    curvature_bundle(&jet2).map_err(|e| OlszakError::Upstream(e.to_string()))?;
                let fiber2 = olszak_fiber(&bundle2)?;
                if fiber2.d != fiber.d {
                    return Err(OlszakError::FiberDimensionJump {
                        here: fiber.d,
                        there: fiber2.d,
                    });
                }
                // Explicit Euler covariant transport of each basis vector.
                let transported: Vec<Vec<T>> = fiber
                    .basis
                    .iter()
                    .map(|b| {
                        (0..n)
                            .map(|k| {
                                let mut corr = T::zero();
                                for j in 0..n {
                                    corr = corr + bundle.conn.at(k, m, j) * b[j];
                                }
                                b[k] - sign * step * corr
                            })
                            .collect()
                    })
                    .collect();
                let d = fiber.d;
                let mut a = vec![T::zero(); n * d];
                let mut bmat = vec![T::zero(); n * d];
                for c in 0..d {
                    for r in 0..n {
                        a[at(d, r, c)] = transported[c][r];
                        bmat[at(d, r, c)] = fiber2.basis[c][r];
                    }
                }
                if let Some(angle) = linalg::max_principal_angle(&a, &bmat, n, d) {
                    worst = worst.max(angle);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartSpec, MetricField};
    use crate::expr::Expr;

    fn flat_field(n: usize) -> MetricField {
        let chart = ChartSpec::new(
            vec![(-2.0, 2.0); n],
            (0..n).map(|i| format!("x{i}")).collect(),
        )
        .unwrap();
        MetricField::from_fn(chart, |i, j| {
            Expr::Const(if i == j { if i == 0 { -1.0 } else { 1.0 } } else { 0.0 })
        })
        .unwrap()
    }

    #[test]
    fn flat_metric_has_full_fiber_and_rank_zero() {
        let field = flat_field(4);
        let jet = field.evaluate_jet(&[0.0f64; 4], 3).unwrap();
        let bundle = curvature_bundle(&jet).unwrap();
        let fiber = olszak_fiber(&bundle).unwrap();
        assert_eq!(fiber.d, 4);
        assert_eq!(weyl_rank(&bundle).unwrap(), 0);
    }

    #[test]
    fn omega_vanishes_on_flat_metric() {
        let field = flat_field(4);
        let jet = field.evaluate_jet(&[0.1f64, 0.0, 0.0, 0.0], 3).unwrap();
        let bundle = curvature_bundle(&jet).unwrap();
        let omega = curvature_form_omega(&bundle, &[0.0, 1.0, 0.5, 0.0]).unwrap();
        assert_eq!(linalg::max_abs(&omega.omega), 0.0);
        assert_eq!(omega.residual, 0.0);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let field = flat_field(4);
        let jet = field.evaluate_jet(&[0.0f64; 4], 3).unwrap();
        let bundle = curvature_bundle(&jet).unwrap();
        assert!(matches!(
            curvature_form_omega(&bundle, &[0.0; 4]),
            Err(OlszakError::ZeroVector)
        ));
    }

    #[test]
    fn spanning_check_requires_d_two() {
        let field = flat_field(4);
        let jet = field.evaluate_jet(&[0.0f64; 4], 3).unwrap();
        let bundle = curvature_bundle(&jet).unwrap();
        let fiber = olszak_fiber(&bundle).unwrap();
        assert!(matches!(
            spanning_image_check(&bundle, &fiber),
            Err(OlszakError::PreconditionD2(4))
        ));
    }

    #[test]
    fn parallelism_is_exact_on_flat_space() {
        let field = flat_field(4);
        let pts = vec![vec![0.0f64; 4], vec![0.3, -0.2, 0.1, 0.0]];
        let angle = parallelism_check(&field, &pts, 1e-4).unwrap();
        assert!(angle < 1e-12);
    }

    #[test]
    fn discrete_transport_residual_decays_with_the_step() {
        // A curvilinear chart of the null-line family obtained through the
        // substitution x_t = y0, x_s = y1, x_psi1 = y2 + 0.3 y0² y1,
        // x_psi2 = y3. The fiber direction becomes (0, 1, -0.3 y0², 0):
        // nonlinear in the coordinates, so exact transport along the y0
        // direction is quadratic in the step and the explicit-Euler defect
        // against the displaced fiber is a genuine higher-order quantity;
        // its decay under step refinement guards the parallelism check
        // against false positives.
        use crate::expr::{Expr, Poly};
        let chart = ChartSpec::new(
            vec![(-2.0, 2.0); 4],
            vec!["y0".into(), "y1".into(), "y2".into(), "y3".into()],
        )
        .unwrap();
        let y0 = Poly::coord(4, 0);
        let y1 = Poly::coord(4, 1);
        let y0sq = y0.mul(&y0);
        let psi1 = Poly::coord(4, 2).add(&y0sq.mul(&y1).scale(0.3));
        let psi2 = Poly::coord(4, 3);
        let q_gram = psi1.mul(&psi1).add(&psi2.mul(&psi2));
        let q_op = psi1.mul(&psi1).sub(&psi2.mul(&psi2));
        let kappa = y0.mul(&q_gram).add(&q_op);
        // dpsi1 = dy2 + 0.6 y0 y1 dy0 + 0.3 y0² dy1, so the pullback is
        // kappa dy0² + dy0 dy1 + dpsi1² + dy3² expanded in y-coordinates.
        let a0 = y0.mul(&y1).scale(0.6); // dpsi1 coefficient on dy0
        let a1 = y0sq.scale(0.3); // dpsi1 coefficient on dy1
        let field = MetricField::from_fn(chart, |i, j| match (i, j) {
            (0, 0) => Expr::Polynomial(kappa.add(&a0.mul(&a0))),
            (0, 1) => Expr::Const(0.5).add(Expr::Polynomial(a0.mul(&a1))),
            (0, 2) => Expr::Polynomial(a0.clone()),
            (1, 1) => Expr::Polynomial(a1.mul(&a1)),
            (1, 2) => Expr::Polynomial(a1.clone()),
            (2, 2) => Expr::Const(1.0),
            (3, 3) => Expr::Const(1.0),
            _ => Expr::Const(0.0),
        })
        .unwrap();
        let pts = vec![vec![0.4f64, 0.3, 0.5, -0.4]];
        // sanity: still a one-dimensional fiber, aligned with (0,1,-0.3 y0,0)
        let jet = field.evaluate_jet(&pts[0], 3).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let fiber = olszak_fiber(&b).unwrap();
        assert_eq!(fiber.d, 1);
        let u = &fiber.basis[0];
        assert!((u[2] / u[1] + 0.3 * pts[0][0] * pts[0][0]).abs() < 1e-10);
        let mut angles = Vec::new();
        for step in [4e-4f64, 2e-4, 1e-4] {
            let a = parallelism_check(&field, &pts, step).unwrap();
            assert!(a < 0.01 * step, "angle {a:.3e} must stay below linear budget");
            angles.push(a);
        }
        assert!(angles[0] > 1e-12, "curvilinear chart must produce a measurable residual");
        assert!(angles[0] / angles[1] > 1.8, "decay too slow: {angles:?}");
        assert!(angles[1] / angles[2] > 1.8, "decay too slow: {angles:?}");
    }

    #[test]
    fn null_line_family_has_weyl_rank_at_least_two() {
        let spec = crate::families::d1_fixture(
            4,
            crate::expr::PiecewisePoly::single(vec![0.0, 1.0]),
        );
        let field = crate::families::build_d1_metric(&spec).unwrap();
        let jet = field.evaluate_jet(&[0.3f64, 0.2, 0.6, -0.1], 3).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let fiber = olszak_fiber(&b).unwrap();
        let rank = weyl_rank(&b).unwrap();
        assert_eq!(fiber.d, 1);
        assert!(rank >= 2, "rank {rank} (d = 2 iff rank 1)");
    }
}
