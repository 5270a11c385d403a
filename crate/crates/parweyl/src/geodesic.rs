//! Geodesic flow: adaptive integration, parallel transport, the exponential
//! map, and the normal-form map built from them (base null geodesic,
//! transported frame, exponential in the fiber direction), together with a
//! finite-difference pullback of the metric through that map.
//!
//! The integrator is Dormand–Prince 5(4) with a proportional step
//! controller. Accepted steps are stored with endpoint derivatives, so any
//! parameter value can be queried through cubic Hermite interpolation; the
//! transport equation runs over that dense output.

use crate::chart::MetricField;
use crate::curvature::christoffel_values;
use crate::expr::PiecewisePoly;
use crate::linalg::{self, at};
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("trajectory left the chart domain near parameter {param}")]
    LeftDomain { param: f64 },
    #[error("step size underflow at parameter {param}")]
    StepSizeUnderflow { param: f64 },
    #[error("finite-difference stencil leaves the configured parameter box")]
    StencilOutsideBox,
    #[error("map spec invariant violated: {0} (residual {1:.3e})")]
    SpecInvariant(String, f64),
    #[error("{0}")]
    Upstream(String),
}

/// Position and contravariant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState<T> {
    pub pos: Vec<T>,
    pub vel: Vec<T>,
}

#[derive(Debug, Clone)]
struct HermiteStep<T> {
    ta: T,
    tb: T,
    ya: Vec<T>,
    yb: Vec<T>,
    fa: Vec<T>,
    fb: Vec<T>,
}

/// Dense output of one integration: accepted steps with cubic Hermite
/// interpolation in between.
#[derive(Debug, Clone)]
pub struct DenseCurve<T> {
    steps: Vec<HermiteStep<T>>,
    pub t0: T,
    pub t1: T,
}

impl<T: Real> DenseCurve<T> {
    pub fn eval(&self, t: T) -> Vec<T> {
        if self.steps.is_empty() {
            return Vec::new();
        }
        let forward = self.t1 >= self.t0;
        let mut chosen = &self.steps[0];
        for s in &self.steps {
            let inside = if forward { t >= s.ta } else { t <= s.ta };
            if inside {
                chosen = s;
            }
        }
        let h = chosen.tb - chosen.ta;
        if h == T::zero() {
            return chosen.ya.clone();
        }
        let theta = (t - chosen.ta) / h;
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = T::of(2.0) * t3 - T::of(3.0) * t2 + T::one();
        let h10 = t3 - T::of(2.0) * t2 + theta;
        let h01 = -T::of(2.0) * t3 + T::of(3.0) * t2;
        let h11 = t3 - t2;
        chosen
            .ya
            .iter()
            .zip(&chosen.yb)
            .zip(chosen.fa.iter().zip(&chosen.fb))
            .map(|((&ya, &yb), (&fa, &fb))| h00 * ya + h10 * h * fa + h01 * yb + h11 * h * fb)
            .collect()
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince 5(4) over a generic right-hand side.
pub fn integrate_adaptive<T: Real>(
    rhs: &dyn Fn(T, &[T]) -> Result<Vec<T>, GeodesicError>,
    t0: T,
    t1: T,
    y0: Vec<T>,
    tol: T,
) -> Result<(Vec<T>, DenseCurve<T>), GeodesicError> {
    let span = t1 - t0;
    if span == T::zero() {
        let f0 = rhs(t0, &y0)?;
        let steps = vec![HermiteStep {
            ta: t0,
            tb: t0,
            ya: y0.clone(),
            yb: y0.clone(),
            fa: f0.clone(),
            fb: f0,
        }];
        return Ok((y0, DenseCurve { steps, t0, t1 }));
    }
    let dir = if span > T::zero() { T::one() } else { -T::one() };
    let mut h = span / T::of(64.0);
    let h_min = span.abs() * T::of(1e-14);
    // Step cap: dense output is cubic Hermite, whose interpolation error
    // grows like h⁴; keeping h below span/64 keeps interpolated transport
    // within the 10·tol budget.
    let h_cap = span.abs() / T::of(64.0);
    let mut t = t0;
    let mut y = y0;
    let mut f_now = rhs(t, &y)?;
    let mut steps: Vec<HermiteStep<T>> = Vec::new();
    let mut k: Vec<Vec<T>> = vec![Vec::new(); 7];
    let dim = y.len();
    let mut guard = 0usize;
    loop {
        guard += 1;
        if guard > 1_000_000 {
            return Err(GeodesicError::StepSizeUnderflow {
                param: t.to_f64().unwrap_or(f64::NAN),
            });
        }
        // done when the remaining span is at rounding scale
        if (t1 - t) * dir <= h_min {
            break;
        }
        if (t + h - t1) * dir > T::zero() {
            h = t1 - t;
        }
        k[0] = f_now.clone();
        let mut failed = false;
        for stage in 1..7 {
            let mut ys = y.clone();
            for (prev, kprev) in k.iter().enumerate().take(stage) {
                let coeff = if stage < 6 { A[stage - 1][prev] } else { B5[prev] };
                if coeff == 0.0 {
                    continue;
                }
                let c = T::of(coeff) * h;
                for i in 0..dim {
                    ys[i] = ys[i] + c * kprev[i];
                }
            }
            let ts = if stage < 6 {
                t + h * T::of(A[stage - 1].iter().sum::<f64>())
            } else {
                t + h
            };
            match rhs(ts, &ys) {
                Ok(f) => k[stage] = f,
                Err(GeodesicError::LeftDomain { .. }) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            // shrink toward the boundary; give up below the minimum step
            h = h * T::of(0.5);
            if h.abs() < h_min {
                return Err(GeodesicError::LeftDomain {
                    param: t.to_f64().unwrap_or(f64::NAN),
                });
            }
            continue;
        }
        let mut y5 = y.clone();
        let mut err = T::zero();
        for i in 0..dim {
            let mut acc5 = T::zero();
            let mut acc4 = T::zero();
            for stage in 0..7 {
                acc5 = acc5 + T::of(B5[stage]) * k[stage][i];
                acc4 = acc4 + T::of(B4[stage]) * k[stage][i];
            }
            y5[i] = y[i] + h * acc5;
            let scale = tol + tol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (acc5 - acc4)).abs() / scale);
        }
        if err <= T::one() {
            let f_next = match rhs(t + h, &y5) {
                Ok(f) => f,
                Err(GeodesicError::LeftDomain { .. }) => {
                    h = h * T::of(0.5);
                    if h.abs() < h_min {
                        return Err(GeodesicError::LeftDomain {
                            param: t.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            steps.push(HermiteStep {
                ta: t,
                tb: t + h,
                ya: y.clone(),
                yb: y5.clone(),
                fa: k[0].clone(),
                fb: f_next.clone(),
            });
            t = t + h;
            y = y5;
            f_now = f_next;
        }
        let factor = if err == T::zero() {
            T::of(5.0)
        } else {
            (T::of(0.9) * err.powf(-T::of(0.2))).min(T::of(5.0)).max(T::of(0.2))
        };
        h = h * factor;
        if h.abs() > h_cap {
            h = h_cap * dir;
        }
        // underflow only matters while work remains and the step shrank
        if h.abs() < h_min && err > T::one() {
            return Err(GeodesicError::StepSizeUnderflow {
                param: t.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok((y, DenseCurve { steps, t0, t1 }))
}

/// Fixed-mesh Dormand–Prince: `n_steps` uniform steps, no step control.
/// The normal-form map differentiates trajectories by finite differences;
/// a frozen mesh keeps the discretization error a smooth function of the
/// initial data, so it cancels in the differences (an adaptive mesh flips
/// its accept/reject pattern between stencil points and the error does not
/// cancel).
pub fn integrate_fixed<T: Real>(
    rhs: &dyn Fn(T, &[T]) -> Result<Vec<T>, GeodesicError>,
    t0: T,
    t1: T,
    y0: Vec<T>,
    n_steps: usize,
) -> Result<(Vec<T>, DenseCurve<T>), GeodesicError> {
    let span = t1 - t0;
    if span == T::zero() || n_steps == 0 {
        let f0 = rhs(t0, &y0)?;
        let steps = vec![HermiteStep {
            ta: t0,
            tb: t0,
            ya: y0.clone(),
            yb: y0.clone(),
            fa: f0.clone(),
            fb: f0,
        }];
        return Ok((y0, DenseCurve { steps, t0, t1 }));
    }
    let h = span / T::of_usize(n_steps);
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0;
    let mut f_now = rhs(t, &y)?;
    let mut steps = Vec::with_capacity(n_steps);
    let mut k: Vec<Vec<T>> = vec![Vec::new(); 7];
    for step_idx in 0..n_steps {
        k[0] = f_now.clone();
        for stage in 1..7 {
            let mut ys = y.clone();
            for (prev, kprev) in k.iter().enumerate().take(stage) {
                let coeff = if stage < 6 { A[stage - 1][prev] } else { B5[prev] };
                if coeff == 0.0 {
                    continue;
                }
                let c = T::of(coeff) * h;
                for i in 0..dim {
                    ys[i] = ys[i] + c * kprev[i];
                }
            }
            let ts = if stage < 6 {
                t + h * T::of(A[stage - 1].iter().sum::<f64>())
            } else {
                t + h
            };
            k[stage] = rhs(ts, &ys)?;
        }
        let mut y_next = y.clone();
        for i in 0..dim {
            let mut acc = T::zero();
            for stage in 0..7 {
                acc = acc + T::of(B5[stage]) * k[stage][i];
            }
            y_next[i] = y[i] + h * acc;
        }
        let t_next = t0 + span * T::of_usize(step_idx + 1) / T::of_usize(n_steps);
        let f_next = rhs(t_next, &y_next)?;
        steps.push(HermiteStep {
            ta: t,
            tb: t_next,
            ya: y.clone(),
            yb: y_next.clone(),
            fa: k[0].clone(),
            fb: f_next.clone(),
        });
        t = t_next;
        y = y_next;
        f_now = f_next;
    }
    Ok((y, DenseCurve { steps, t0, t1 }))
}

fn christoffel_at<T: Real>(field: &MetricField, pos: &[T]) -> Result<Vec<T>, GeodesicError> {
    let jet = field.evaluate_jet(pos, 1).map_err(|e| match e {
        crate::chart::ChartError::PointOutsideDomain { .. } => {
            GeodesicError::LeftDomain { param: f64::NAN }
        }
        other => GeodesicError::Upstream(other.to_string()),
    })?;
    christoffel_values(&jet.g, &jet.dg, jet.n)
        .ok_or_else(|| GeodesicError::Upstream("degenerate metric along trajectory".into()))
}

/// Solve the geodesic equation `ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0` up to `param`.
pub fn integrate_geodesic<T: Real>(
    field: &MetricField,
    state0: &GeodesicState<T>,
    param: T,
    tol: T,
) -> Result<(GeodesicState<T>, DenseCurve<T>), GeodesicError> {
    let n = field.dim();
    let mut y0 = state0.pos.clone();
    y0.extend_from_slice(&state0.vel);
    let rhs = |t: T, y: &[T]| -> Result<Vec<T>, GeodesicError> {
        let _ = t;
        let gamma = christoffel_at(field, &y[..n])?;
        let mut out = vec![T::zero(); 2 * n];
        out[..n].copy_from_slice(&y[n..]);
        for kk in 0..n {
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    acc = acc + gamma[(kk * n + i) * n + j] * y[n + i] * y[n + j];
                }
            }
            out[n + kk] = -acc;
        }
        Ok(out)
    };
    let (y_end, dense) = integrate_adaptive(&rhs, T::zero(), param, y0, tol)?;
    Ok((
        GeodesicState { pos: y_end[..n].to_vec(), vel: y_end[n..].to_vec() },
        dense,
    ))
}

/// Parallel-transport a stack of vectors along a stored geodesic:
/// `ẇ^k + Γ^k_ij ẋ^i w^j = 0` with x, ẋ interpolated from the dense output.
/// Input and output are concatenations of `count` n-vectors.
pub fn parallel_transport_many<T: Real>(
    field: &MetricField,
    curve: &DenseCurve<T>,
    w0: Vec<T>,
    count: usize,
    tol: T,
) -> Result<(Vec<T>, DenseCurve<T>), GeodesicError> {
    let n = field.dim();
    assert_eq!(w0.len(), count * n);
    let rhs = |t: T, w: &[T]| -> Result<Vec<T>, GeodesicError> {
        let state = curve.eval(t);
        let gamma = christoffel_at(field, &state[..n])?;
        let vel = &state[n..2 * n];
        let mut out = vec![T::zero(); count * n];
        for c in 0..count {
            for kk in 0..n {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        acc = acc + gamma[(kk * n + i) * n + j] * vel[i] * w[c * n + j];
                    }
                }
                out[c * n + kk] = -acc;
            }
        }
        Ok(out)
    };
    integrate_adaptive(&rhs, curve.t0, curve.t1, w0, tol)
}

/// Transport of a single vector; returns the transported vector as a
/// function of the curve parameter (dense output).
pub fn parallel_transport<T: Real>(
    field: &MetricField,
    curve: &DenseCurve<T>,
    w0: &[T],
    tol: T,
) -> Result<(Vec<T>, DenseCurve<T>), GeodesicError> {
    parallel_transport_many(field, curve, w0.to_vec(), 1, tol)
}

/// Endpoint of the geodesic with initial data (x, v) at parameter 1.
pub fn exponential_map<T: Real>(
    field: &MetricField,
    x: &[T],
    v: &[T],
    tol: T,
) -> Result<Vec<T>, GeodesicError> {
    let state = GeodesicState { pos: x.to_vec(), vel: v.to_vec() };
    let (end, _) = integrate_geodesic(field, &state, T::one(), tol)?;
    Ok(end.pos)
}

/// Data for the normal-form map: base point, null initial velocity paired
/// to the spanning field, the complement frame, and the identification of
/// the abstract fiber factor with that frame.
#[derive(Debug, Clone)]
pub struct FMapSpec<T> {
    pub base: Vec<T>,
    /// ẋ(0): null, with g(ẋ(0), u) = 1.
    pub vel0: Vec<T>,
    /// Value at the base of the parallel field spanning the fiber,
    /// normalized so its metric dual is the coordinate differential dt.
    pub u0: Vec<T>,
    /// n×m matrix: abstract fiber coordinates → tangent vectors in the
    /// complement of span{ẋ(0), u}. Isometric for `gram`.
    pub v_embed: Vec<T>,
    /// m×m symmetric pairing read off the Weyl tensor at the base:
    /// the operator part of the tt-profile through this identification.
    pub pairing_eff: Vec<T>,
    /// m×m inner product of the abstract factor.
    pub gram: Vec<T>,
    /// Profile f(t) of the family (for the model metric).
    pub profile: PiecewisePoly,
    /// Box of admissible (t, s, ψ) parameters.
    pub param_box: Vec<(f64, f64)>,
}

impl<T: Real> FMapSpec<T> {
    /// Model tt-component: f(t)·⟨ψ,ψ⟩ + pairing(ψ,ψ).
    pub fn model_tt(&self, t: T, psi: &[T]) -> T {
        let m = psi.len();
        let mut q_gram = T::zero();
        let mut q_pair = T::zero();
        for a in 0..m {
            for b in 0..m {
                q_gram = q_gram + self.gram[at(m, a, b)] * psi[a] * psi[b];
                q_pair = q_pair + self.pairing_eff[at(m, a, b)] * psi[a] * psi[b];
            }
        }
        self.profile.eval(t) * q_gram + q_pair
    }

    /// Model metric matrix at (t, s, ψ): tt-profile, dt·ds = 1/2 pairing,
    /// constant fiber block.
    pub fn model_metric(&self, t: T, psi: &[T]) -> Vec<T> {
        let m = psi.len();
        let n = m + 2;
        let mut g = vec![T::zero(); n * n];
        g[0] = self.model_tt(t, psi);
        g[at(n, 0, 1)] = T::of(0.5);
        g[at(n, 1, 0)] = T::of(0.5);
        for a in 0..m {
            for b in 0..m {
                g[at(n, 2 + a, 2 + b)] = self.gram[at(m, a, b)];
            }
        }
        g
    }

    fn check_in_box(&self, q: &[T]) -> Result<(), GeodesicError> {
        for (x, &(lo, hi)) in q.iter().zip(&self.param_box) {
            if *x < T::of(lo) || *x > T::of(hi) {
                return Err(GeodesicError::StencilOutsideBox);
            }
        }
        Ok(())
    }
}

fn metric_pair<T: Real>(g: &[T], n: usize, a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            acc = acc + g[at(n, i, j)] * a[i] * b[j];
        }
    }
    acc
}

/// Build an [`FMapSpec`] for a metric whose fiber-spanning parallel field
/// is dual to the first coordinate differential (as in the null-line
/// family charts): `u = g⁻¹ dt`, `ẋ(0) = ∂_t − (g_tt/2)·u`.
pub fn fmap_spec_for_profile<T: Real>(
    field: &MetricField,
    gram: &[f64],
    profile: PiecewisePoly,
    weyl: &crate::tensor::DenseTensor<T>,
    base: Vec<T>,
    param_box: Vec<(f64, f64)>,
) -> Result<FMapSpec<T>, GeodesicError> {
    let n = field.dim();
    let m = n - 2;
    let g = field.values(&base);
    let ginv = linalg::invert(&g, n)
        .ok_or_else(|| GeodesicError::Upstream("degenerate metric at base point".into()))?;
    // u = g⁻¹ dt (dt is the first coordinate differential)
    let u0: Vec<T> = (0..n).map(|r| ginv[at(n, r, 0)]).collect();
    // w = ∂_t has g(w, u) = dt(∂_t) = 1; make it null
    let mut vel0 = vec![T::zero(); n];
    vel0[0] = T::one();
    let g_ww = metric_pair(&g, n, &vel0, &vel0);
    let half = T::of(0.5);
    for r in 0..n {
        vel0[r] = vel0[r] - half * g_ww * u0[r];
    }
    let null_resid = metric_pair(&g, n, &vel0, &vel0).abs();
    if null_resid > T::of(1e-10) {
        return Err(GeodesicError::SpecInvariant(
            "initial velocity null".into(),
            null_resid.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let pair_resid = (metric_pair(&g, n, &vel0, &u0) - T::one()).abs();
    if pair_resid > T::of(1e-10) {
        return Err(GeodesicError::SpecInvariant(
            "g(velocity, spanning field) = 1".into(),
            pair_resid.to_f64().unwrap_or(f64::NAN),
        ));
    }
    // Complement of P = span{vel0, u0}: kernel of the two metric-dual rows.
    let mut rows = vec![T::zero(); 2 * n];
    for c in 0..n {
        let mut acc_v = T::zero();
        let mut acc_u = T::zero();
        for r in 0..n {
            acc_v = acc_v + g[at(n, c, r)] * vel0[r];
            acc_u = acc_u + g[at(n, c, r)] * u0[r];
        }
        rows[at(n, 0, c)] = acc_v;
        rows[at(n, 1, c)] = acc_u;
    }
    let dec = linalg::svd(&rows, 2, n);
    let mut basis = vec![T::zero(); n * m];
    for c in 0..m {
        for r in 0..n {
            basis[at(m, r, c)] = dec.v[at(n, r, 2 + c)];
        }
    }
    // Gram of the complement under g and signature-matched identification
    // with the abstract inner product.
    let mut gw = vec![T::zero(); m * m];
    for a in 0..m {
        for b in 0..m {
            let va: Vec<T> = (0..n).map(|r| basis[at(m, r, a)]).collect();
            let vb: Vec<T> = (0..n).map(|r| basis[at(m, r, b)]).collect();
            gw[at(m, a, b)] = metric_pair(&g, n, &va, &vb);
        }
    }
    let gram_t: Vec<T> = gram.iter().map(|&x| T::of(x)).collect();
    let map = isometry_between(&gram_t, &gw, m).ok_or_else(|| {
        GeodesicError::SpecInvariant("fiber identification isometric".into(), f64::NAN)
    })?;
    // v_embed = basis · map : abstract coordinates → tangent vectors
    let v_embed = linalg::matmul(&basis, &map, n, m, m);
    // Isometry check: Eᵀ g E = gram
    let mut worst = T::zero();
    for a in 0..m {
        for b in 0..m {
            let ea: Vec<T> = (0..n).map(|r| v_embed[at(m, r, a)]).collect();
            let eb: Vec<T> = (0..n).map(|r| v_embed[at(m, r, b)]).collect();
            worst = worst.max((metric_pair(&g, n, &ea, &eb) - gram_t[at(m, a, b)]).abs());
        }
    }
    if worst > T::of(1e-9) {
        return Err(GeodesicError::SpecInvariant(
            "fiber identification isometric".into(),
            worst.to_f64().unwrap_or(f64::NAN),
        ));
    }
    // Effective pairing from the Weyl tensor: Ŵ_ab = W(vel0, E_a, E_b, vel0).
    let mut pairing_eff = vec![T::zero(); m * m];
    for a in 0..m {
        for b in 0..m {
            let ea: Vec<T> = (0..n).map(|r| v_embed[at(m, r, a)]).collect();
            let eb: Vec<T> = (0..n).map(|r| v_embed[at(m, r, b)]).collect();
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    for kk in 0..n {
                        for l in 0..n {
                            acc = acc
                                + weyl.get(&[i, j, kk, l])
                                    * vel0[i]
                                    * ea[j]
                                    * eb[kk]
                                    * vel0[l];
                        }
                    }
                }
            }
            pairing_eff[at(m, a, b)] = acc;
        }
    }
    Ok(FMapSpec { base, vel0, u0, v_embed, pairing_eff, gram: gram_t, profile, param_box })
}

/// Signature-matched congruence: returns M with Mᵀ·B·M = A (both symmetric,
/// same signature), or None when the signatures differ.
fn isometry_between<T: Real>(a: &[T], b: &[T], m: usize) -> Option<Vec<T>> {
    let factor = |mat: &[T]| -> Option<(Vec<T>, usize)> {
        let (vals, vecs) = linalg::sym_eigen(mat, m);
        let mut pos = 0usize;
        let mut s = vec![T::zero(); m * m];
        for c in 0..m {
            if vals[c] == T::zero() {
                return None;
            }
            if vals[c] > T::zero() {
                pos += 1;
            }
            let scale = vals[c].abs().sqrt().recip();
            for r in 0..m {
                s[at(m, r, c)] = vecs[at(m, r, c)] * scale;
            }
        }
        Some((s, pos))
    };
    // Sᵀ·mat·S = diag(signs), eigenvalues sorted descending so the sign
    // patterns line up whenever the signatures agree.
    let (sa, pos_a) = factor(a)?;
    let (sb, pos_b) = factor(b)?;
    if pos_a != pos_b {
        return None;
    }
    let sa_inv = linalg::invert(&sa, m)?;
    Some(linalg::matmul(&sb, &sa_inv, m, m, m))
}

/// The normal-form map: geodesic to parameter t along the base null
/// geodesic, parallel transport of the embedded fiber vector and the
/// spanning field, then the exponential of `ψ̃(t) + (s/2)·u`.
pub fn f_map<T: Real>(
    spec: &FMapSpec<T>,
    field: &MetricField,
    t: T,
    s: T,
    psi: &[T],
    tol: T,
) -> Result<Vec<T>, GeodesicError> {
    let n = field.dim();
    let m = psi.len();
    let mut q = vec![t, s];
    q.extend_from_slice(psi);
    spec.check_in_box(&q)?;
    // Nominal mesh width from the tolerance (fifth-order method); frozen
    // per span so stencil evaluations share their discretization error.
    let h_nominal = T::of(0.4) * tol.powf(T::of(0.2));
    let steps_for = |span: T| -> usize {
        let raw = (span.abs() / h_nominal).to_f64().unwrap_or(1.0).ceil() as usize;
        raw.clamp(8, 4096)
    };
    let geo_rhs = |_: T, y: &[T]| -> Result<Vec<T>, GeodesicError> {
        let gamma = christoffel_at(field, &y[..n])?;
        let mut out = vec![T::zero(); 2 * n];
        out[..n].copy_from_slice(&y[n..]);
        for kk in 0..n {
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    acc = acc + gamma[(kk * n + i) * n + j] * y[n + i] * y[n + j];
                }
            }
            out[n + kk] = -acc;
        }
        Ok(out)
    };
    let mut y0 = spec.base.clone();
    y0.extend_from_slice(&spec.vel0);
    let (base_end, curve) = integrate_fixed(&geo_rhs, T::zero(), t, y0, steps_for(t))?;
    // ψ̃(0) = embed(ψ), transported together with u along the base geodesic.
    let mut w0 = vec![T::zero(); 2 * n];
    for r in 0..n {
        for c in 0..m {
            w0[r] = w0[r] + spec.v_embed[at(m, r, c)] * psi[c];
        }
        w0[n + r] = spec.u0[r];
    }
    let transport_rhs = |tau: T, w: &[T]| -> Result<Vec<T>, GeodesicError> {
        let state = curve.eval(tau);
        let gamma = christoffel_at(field, &state[..n])?;
        let vel = &state[n..2 * n];
        let mut out = vec![T::zero(); 2 * n];
        for c in 0..2 {
            for kk in 0..n {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        acc = acc + gamma[(kk * n + i) * n + j] * vel[i] * w[c * n + j];
                    }
                }
                out[c * n + kk] = -acc;
            }
        }
        Ok(out)
    };
    let (w_end, _) = integrate_fixed(&transport_rhs, T::zero(), t, w0, steps_for(t))?;
    let half = T::of(0.5);
    let v: Vec<T> = (0..n).map(|r| w_end[r] + half * s * w_end[n + r]).collect();
    let mut y_exp = base_end[..n].to_vec();
    y_exp.extend_from_slice(&v);
    let (exp_end, _) = integrate_fixed(&geo_rhs, T::zero(), T::one(), y_exp, steps_for(T::one()))?;
    Ok(exp_end[..n].to_vec())
}

/// Pullback of the metric through the normal-form map on a parameter grid,
/// compared against the model `f(t)⟨ψ,ψ⟩+pairing dt² + dt ds + ⟨,⟩`.
#[derive(Debug, Clone)]
pub struct PullbackData {
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub per_point: Vec<(Vec<f64>, f64)>,
}

pub fn pullback_residual<T: Real>(
    spec: &FMapSpec<T>,
    field: &MetricField,
    grid: &[Vec<T>],
    fd_step: T,
    tol: T,
) -> Result<PullbackData, GeodesicError> {
    let n = field.dim();
    let mut per_point = Vec::with_capacity(grid.len());
    let mut max_residual = 0.0f64;
    let mut worst_point = Vec::new();
    for q in grid {
        // stencil must stay inside the parameter box
        for a in 0..n {
            for sign in [T::one(), -T::one()] {
                let mut qs = q.clone();
                qs[a] = qs[a] + sign * fd_step;
                spec.check_in_box(&qs)?;
            }
        }
        let center = f_map(spec, field, q[0], q[1], &q[2..], tol)?;
        let mut jac = vec![T::zero(); n * n]; // column a = ∂F/∂q_a
        for a in 0..n {
            let mut qp = q.clone();
            qp[a] = qp[a] + fd_step;
            let mut qm = q.clone();
            qm[a] = qm[a] - fd_step;
            let fp = f_map(spec, field, qp[0], qp[1], &qp[2..], tol)?;
            let fm = f_map(spec, field, qm[0], qm[1], &qm[2..], tol)?;
            for r in 0..n {
                jac[at(n, r, a)] = (fp[r] - fm[r]) / (T::of(2.0) * fd_step);
            }
        }
        let g_here = field.values(&center);
        let mut pullback = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = T::zero();
                for r in 0..n {
                    for c in 0..n {
                        acc = acc + g_here[at(n, r, c)] * jac[at(n, r, a)] * jac[at(n, c, b)];
                    }
                }
                pullback[at(n, a, b)] = acc;
            }
        }
        let model = spec.model_metric(q[0], &q[2..]);
        let mut resid = T::zero();
        for i in 0..n * n {
            resid = resid.max((pullback[i] - model[i]).abs());
        }
        let resid_f = resid.to_f64().unwrap_or(f64::NAN);
        let qf: Vec<f64> = q.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
        if resid_f > max_residual {
            max_residual = resid_f;
            worst_point = qf.clone();
        }
        per_point.push((qf, resid_f));
    }
    Ok(PullbackData { max_residual, worst_point, per_point })
}
