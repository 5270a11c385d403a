//! Coordinate charts and metric fields with exact third-order jets.
//!
//! [`MetricField`] holds one closed-form component expression per unordered
//! index pair on an axis-aligned box chart. [`MetricField::evaluate_jet`]
//! produces a [`MetricJet`]: the components and all partial derivatives to
//! order 3, exact to rounding via truncated-Taylor propagation.
//! [`finite_difference_jet`] is the independent oracle for the same data,
//! built from plain value evaluations and central-difference stencils.

use crate::expr::Expr;
use crate::jet::Jet;
use crate::linalg;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scale-aware nondegeneracy guard: |det g| must exceed this times
/// (max |g_ij|)^n.
pub const DEGENERACY_REL_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("point {point:?} lies outside the open chart domain")]
    PointOutsideDomain { point: Vec<f64> },
    #[error("metric degenerate at evaluation point: |det g| = {det:.3e} < {threshold:.3e}")]
    DegenerateMetric { det: f64, threshold: f64 },
    #[error("jet order {0} unsupported (maximum is 3)")]
    JetOrderUnsupported(usize),
    #[error("finite-difference stencil of half-width {halfwidth} leaves the chart domain")]
    StencilOutsideDomain { halfwidth: f64 },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
}

/// Axis-aligned box chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub dim: usize,
    /// Closed coordinate intervals, one per axis.
    pub domain: Vec<(f64, f64)>,
    /// Coordinate labels, for reporting only.
    pub labels: Vec<String>,
}

impl ChartSpec {
    pub fn new(domain: Vec<(f64, f64)>, labels: Vec<String>) -> Result<Self, ChartError> {
        let dim = domain.len();
        let spec = ChartSpec { dim, domain, labels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        if self.dim < 2 {
            return Err(ChartError::InvalidChart("chart dimension must be at least 2".into()));
        }
        if self.labels.len() != self.dim {
            return Err(ChartError::InvalidChart("one label per coordinate required".into()));
        }
        for &(lo, hi) in &self.domain {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ChartError::InvalidChart(format!(
                    "domain interval [{lo}, {hi}] is empty or not finite"
                )));
            }
        }
        Ok(())
    }

    /// Strict interior membership, with an optional safety margin.
    pub fn contains<T: Real>(&self, point: &[T], margin: f64) -> bool {
        point.len() == self.dim
            && point.iter().zip(&self.domain).all(|(&x, &(lo, hi))| {
                x > T::of(lo + margin) && x < T::of(hi - margin)
            })
    }
}

/// Metric components and partial derivatives to `order` at a point.
///
/// Index conventions: `dg[(i,j,k)] = ∂_k g_ij`, `d2g[(i,j,k,l)] = ∂_k ∂_l g_ij`,
/// `d3g[(i,j,k,l,m)] = ∂_k ∂_l ∂_m g_ij`. Blocks above `order` are zero.
#[derive(Debug, Clone)]
pub struct MetricJet<T> {
    pub n: usize,
    pub order: usize,
    pub point: Vec<T>,
    pub g: Vec<T>,
    pub dg: Vec<T>,
    pub d2g: Vec<T>,
    pub d3g: Vec<T>,
}

impl<T: Real> MetricJet<T> {
    pub fn zeroed(n: usize, order: usize, point: Vec<T>) -> Self {
        MetricJet {
            n,
            order,
            point,
            g: vec![T::zero(); n * n],
            dg: vec![T::zero(); n * n * n],
            d2g: vec![T::zero(); n * n * n * n],
            d3g: vec![T::zero(); n * n * n * n * n],
        }
    }

    #[inline]
    pub fn g_at(&self, i: usize, j: usize) -> T {
        self.g[i * self.n + j]
    }

    #[inline]
    pub fn dg_at(&self, i: usize, j: usize, k: usize) -> T {
        self.dg[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn d2g_at(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.d2g[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn d3g_at(&self, i: usize, j: usize, k: usize, l: usize, m: usize) -> T {
        self.d3g[(((i * self.n + j) * self.n + k) * self.n + l) * self.n + m]
    }

    /// Rebuild the component jets (used by the curvature pipeline).
    pub fn component_jet(&self, i: usize, j: usize) -> Jet<T> {
        let n = self.n;
        let mut jet = Jet::constant(n, self.order, self.g_at(i, j));
        if self.order >= 1 {
            for k in 0..n {
                jet.d1[k] = self.dg_at(i, j, k);
            }
        }
        if self.order >= 2 {
            for k in 0..n {
                for l in 0..n {
                    jet.d2[k * n + l] = self.d2g_at(i, j, k, l);
                }
            }
        }
        if self.order >= 3 {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        jet.d3[(k * n + l) * n + m] = self.d3g_at(i, j, k, l, m);
                    }
                }
            }
        }
        jet
    }

    /// Largest |entry| per derivative block, for relative comparisons.
    pub fn block_scales(&self) -> [T; 4] {
        [
            linalg::max_abs(&self.g),
            linalg::max_abs(&self.dg),
            linalg::max_abs(&self.d2g),
            linalg::max_abs(&self.d3g),
        ]
    }

    fn store(&mut self, i: usize, j: usize, jet: &Jet<T>) {
        let n = self.n;
        self.g[i * n + j] = jet.v;
        if self.order >= 1 {
            for k in 0..n {
                self.dg[(i * n + j) * n + k] = jet.d1[k];
            }
        }
        if self.order >= 2 {
            for k in 0..n {
                for l in 0..n {
                    self.d2g[((i * n + j) * n + k) * n + l] = jet.d2[k * n + l];
                }
            }
        }
        if self.order >= 3 {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        self.d3g[(((i * n + j) * n + k) * n + l) * n + m] =
                            jet.d3[(k * n + l) * n + m];
                    }
                }
            }
        }
    }
}

/// A metric field: one component expression per unordered index pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricField {
    pub chart: ChartSpec,
    /// Upper-triangular components, row-major over pairs (i ≤ j).
    comps: Vec<Expr>,
}

fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl MetricField {
    pub fn new(chart: ChartSpec, comps: Vec<Expr>) -> Result<Self, ChartError> {
        chart.validate()?;
        let n = chart.dim;
        if comps.len() != n * (n + 1) / 2 {
            return Err(ChartError::InvalidChart(format!(
                "expected {} components for dimension {n}, got {}",
                n * (n + 1) / 2,
                comps.len()
            )));
        }
        Ok(MetricField { chart, comps })
    }

    /// Build from a closure over ordered pairs (i ≤ j).
    pub fn from_fn(
        chart: ChartSpec,
        mut f: impl FnMut(usize, usize) -> Expr,
    ) -> Result<Self, ChartError> {
        let n = chart.dim;
        let mut comps = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                comps.push(f(i, j));
            }
        }
        MetricField::new(chart, comps)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.comps[tri_index(self.chart.dim, i, j)]
    }

    /// A copy of the field with `extra` added to component (i, j).
    pub fn perturb_component(&self, i: usize, j: usize, extra: Expr) -> MetricField {
        let mut comps = self.comps.clone();
        let idx = tri_index(self.chart.dim, i, j);
        comps[idx] = comps[idx].clone().add(extra);
        MetricField { chart: self.chart.clone(), comps }
    }

    /// A copy of the field with all components scaled by `c` (g → c·g).
    pub fn scaled(&self, c: f64) -> MetricField {
        MetricField {
            chart: self.chart.clone(),
            comps: self
                .comps
                .iter()
                .map(|e| Expr::Const(c).mul(e.clone()))
                .collect(),
        }
    }

    /// All piecewise joins of all components, as (coordinate, value) pairs.
    pub fn breakpoints(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for e in &self.comps {
            e.collect_breakpoints(&mut out);
        }
        out
    }

    /// Plain component matrix at a point (no domain check; row-major n×n).
    pub fn values<T: Real>(&self, point: &[T]) -> Vec<T> {
        let n = self.chart.dim;
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.component(i, j).eval(point);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }

    /// Exact jet of the metric at an interior point.
    pub fn evaluate_jet<T: Real>(
        &self,
        point: &[T],
        order: usize,
    ) -> Result<MetricJet<T>, ChartError> {
        if order > 3 {
            return Err(ChartError::JetOrderUnsupported(order));
        }
        if !self.chart.contains(point, 0.0) {
            return Err(ChartError::PointOutsideDomain {
                point: point.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
        let n = self.chart.dim;
        let mut out = MetricJet::zeroed(n, order, point.to_vec());
        for i in 0..n {
            for j in i..n {
                let jet = self.component(i, j).eval_jet(n, point, order);
                out.store(i, j, &jet);
                if i != j {
                    out.store(j, i, &jet);
                }
            }
        }
        check_nondegenerate(&out.g, n)?;
        Ok(out)
    }

    /// Central-difference jet: the independent oracle for `evaluate_jet`.
    pub fn finite_difference_jet<T: Real>(
        &self,
        point: &[T],
        order: usize,
        step: T,
    ) -> Result<MetricJet<T>, ChartError> {
        if order > 3 {
            return Err(ChartError::JetOrderUnsupported(order));
        }
        if !self.chart.contains(point, 0.0) {
            return Err(ChartError::PointOutsideDomain {
                point: point.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
        let halfwidth = T::of(2.0) * step;
        if !self.chart.contains(point, halfwidth.to_f64().unwrap_or(f64::INFINITY).abs()) {
            return Err(ChartError::StencilOutsideDomain {
                halfwidth: halfwidth.to_f64().unwrap_or(f64::NAN),
            });
        }
        let jet = fd_metric_jet(|p| self.values(p), self.chart.dim, point, order, step);
        check_nondegenerate(&jet.g, self.chart.dim)?;
        Ok(jet)
    }

    /// True when no finite-difference sample within `2*step` of `point`
    /// crosses a piecewise join (where higher derivatives may jump).
    pub fn stencil_clear_of_breakpoints<T: Real>(&self, point: &[T], step: T) -> bool {
        let margin = T::of(2.5) * step;
        self.breakpoints().iter().all(|&(var, b)| {
            (point[var] - T::of(b)).abs() > margin
        })
    }
}

pub fn check_nondegenerate<T: Real>(g: &[T], n: usize) -> Result<(), ChartError> {
    let scale = linalg::max_abs(g).max(T::min_positive_value());
    let mut threshold = T::of(DEGENERACY_REL_THRESHOLD);
    for _ in 0..n {
        threshold = threshold * scale;
    }
    let d = linalg::det(g, n);
    if d.abs() < threshold {
        return Err(ChartError::DegenerateMetric {
            det: d.abs().to_f64().unwrap_or(0.0),
            threshold: threshold.to_f64().unwrap_or(0.0),
        });
    }
    Ok(())
}

/// Central-difference metric jet from any component evaluator (row-major
/// n×n values). This is what keeps the oracle independent of the Taylor
/// path: only plain evaluations enter.
pub fn fd_metric_jet<T: Real>(
    eval: impl Fn(&[T]) -> Vec<T>,
    n: usize,
    point: &[T],
    order: usize,
    step: T,
) -> MetricJet<T> {
    let h = step;
    let shifted = |offsets: &[(usize, i32)]| -> Vec<T> {
        let mut p = point.to_vec();
        for &(axis, mult) in offsets {
            p[axis] = p[axis] + T::of(mult as f64) * h;
        }
        eval(&p)
    };
    let mut out = MetricJet::zeroed(n, order, point.to_vec());
    out.g = eval(point);
    if order == 0 {
        return out;
    }
    let base = out.g.clone();
    let two = T::of(2.0);
    let idx = |i: usize, j: usize| i * n + j;

    for k in 0..n {
        let plus = shifted(&[(k, 1)]);
        let minus = shifted(&[(k, -1)]);
        for i in 0..n {
            for j in 0..n {
                out.dg[(idx(i, j)) * n + k] = (plus[idx(i, j)] - minus[idx(i, j)]) / (two * h);
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.d2g[((idx(i, j)) * n + k) * n + k] =
                        (plus[idx(i, j)] - two * base[idx(i, j)] + minus[idx(i, j)]) / (h * h);
                }
            }
        }
    }
    if order >= 2 {
        for k in 0..n {
            for l in (k + 1)..n {
                let pp = shifted(&[(k, 1), (l, 1)]);
                let pm = shifted(&[(k, 1), (l, -1)]);
                let mp = shifted(&[(k, -1), (l, 1)]);
                let mm = shifted(&[(k, -1), (l, -1)]);
                for i in 0..n {
                    for j in 0..n {
                        let v = (pp[idx(i, j)] - pm[idx(i, j)] - mp[idx(i, j)]
                            + mm[idx(i, j)])
                            / (T::of(4.0) * h * h);
                        out.d2g[((idx(i, j)) * n + k) * n + l] = v;
                        out.d2g[((idx(i, j)) * n + l) * n + k] = v;
                    }
                }
            }
        }
    }
    if order >= 3 {
        let h3 = h * h * h;
        let mut d3 = vec![T::zero(); n * n * n * n * n];
        let set3 = |d3: &mut Vec<T>, i: usize, j: usize, k: usize, l: usize, m: usize, v: T| {
            // total symmetry in the derivative indices
            let perms = [[k, l, m], [k, m, l], [l, k, m], [l, m, k], [m, k, l], [m, l, k]];
            for p in perms {
                d3[(((idx(i, j)) * n + p[0]) * n + p[1]) * n + p[2]] = v;
            }
        };
        for k in 0..n {
            let p2 = shifted(&[(k, 2)]);
            let p1 = shifted(&[(k, 1)]);
            let m1 = shifted(&[(k, -1)]);
            let m2 = shifted(&[(k, -2)]);
            for i in 0..n {
                for j in 0..n {
                    let v = (p2[idx(i, j)] - two * p1[idx(i, j)] + two * m1[idx(i, j)]
                        - m2[idx(i, j)])
                        / (two * h3);
                    set3(&mut d3, i, j, k, k, k, v);
                }
            }
        }
        for k in 0..n {
            for l in 0..n {
                if l == k {
                    continue;
                }
                // ∂_k ∂_k ∂_l: second difference in k nested in first difference in l
                let ppl = shifted(&[(k, 1), (l, 1)]);
                let zpl = shifted(&[(l, 1)]);
                let mpl = shifted(&[(k, -1), (l, 1)]);
                let pml = shifted(&[(k, 1), (l, -1)]);
                let zml = shifted(&[(l, -1)]);
                let mml = shifted(&[(k, -1), (l, -1)]);
                for i in 0..n {
                    for j in 0..n {
                        let a = ppl[idx(i, j)] - two * zpl[idx(i, j)] + mpl[idx(i, j)];
                        let b = pml[idx(i, j)] - two * zml[idx(i, j)] + mml[idx(i, j)];
                        let v = (a - b) / (two * h3);
                        set3(&mut d3, i, j, k, k, l, v);
                    }
                }
            }
        }
        for k in 0..n {
            for l in (k + 1)..n {
                for m in (l + 1)..n {
                    let mut acc = vec![T::zero(); n * n];
                    for sk in [1i32, -1] {
                        for sl in [1i32, -1] {
                            for sm in [1i32, -1] {
                                let sample = shifted(&[(k, sk), (l, sl), (m, sm)]);
                                let sign = T::of((sk * sl * sm) as f64);
                                for e in 0..n * n {
                                    acc[e] = acc[e] + sign * sample[e];
                                }
                            }
                        }
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let v = acc[idx(i, j)] / (T::of(8.0) * h3);
                            set3(&mut d3, i, j, k, l, m, v);
                        }
                    }
                }
            }
        }
        out.d3g = d3;
    }
    out
}

/// Worst relative deviation between two jets, per derivative block, scaled
/// by the max-|entry| of the corresponding block. Blocks that vanish (or
/// nearly vanish) in both jets are scaled by the metric magnitude instead,
/// so finite-difference cancellation noise on an exactly-zero block is
/// judged against the size of the function, not against itself.
pub fn jet_relative_deviation<T: Real>(a: &MetricJet<T>, b: &MetricJet<T>) -> T {
    let g_scale = linalg::max_abs(&a.g).max(linalg::max_abs(&b.g)).max(T::one());
    let mut worst = T::zero();
    let blocks: [(&[T], &[T]); 4] =
        [(&a.g, &b.g), (&a.dg, &b.dg), (&a.d2g, &b.d2g), (&a.d3g, &b.d3g)];
    for (xa, xb) in blocks {
        let denom = linalg::max_abs(xa).max(linalg::max_abs(xb)).max(g_scale);
        for (u, v) in xa.iter().zip(xb) {
            worst = worst.max((*u - *v).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{PiecewisePoly, Poly};

    fn polar_field() -> MetricField {
        // dr² + r² dθ² on r ∈ [1, 3], θ ∈ [-1, 1]
        let chart = ChartSpec::new(
            vec![(1.0, 3.0), (-1.0, 1.0)],
            vec!["r".into(), "theta".into()],
        )
        .unwrap();
        MetricField::from_fn(chart, |i, j| match (i, j) {
            (0, 0) => Expr::Const(1.0),
            (1, 1) => Expr::PowInt(Box::new(Expr::Coord(0)), 2),
            _ => Expr::Const(0.0),
        })
        .unwrap()
    }

    pub fn flat_lorentz_field(n: usize) -> MetricField {
        let chart = ChartSpec::new(
            vec![(-2.0, 2.0); n],
            (0..n).map(|i| format!("x{i}")).collect(),
        )
        .unwrap();
        MetricField::from_fn(chart, |i, j| {
            if i == j {
                Expr::Const(if i == 0 { -1.0 } else { 1.0 })
            } else {
                Expr::Const(0.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn flat_metric_has_zero_derivatives() {
        let field = flat_lorentz_field(4);
        let jet = field.evaluate_jet(&[0.1f64, 0.2, -0.3, 0.4], 3).unwrap();
        assert_eq!(linalg::max_abs(&jet.dg), 0.0);
        assert_eq!(linalg::max_abs(&jet.d2g), 0.0);
        assert_eq!(linalg::max_abs(&jet.d3g), 0.0);
        assert_eq!(jet.g_at(0, 0), -1.0);
        assert_eq!(jet.g_at(2, 2), 1.0);
    }

    #[test]
    fn polar_jet_matches_hand_derivatives() {
        let field = polar_field();
        let jet = field.evaluate_jet(&[2.0f64, 0.0], 3).unwrap();
        assert_eq!(jet.g_at(0, 0), 1.0);
        assert_eq!(jet.g_at(1, 1), 4.0);
        assert_eq!(jet.dg_at(1, 1, 0), 4.0);
        assert_eq!(jet.d2g_at(1, 1, 0, 0), 2.0);
        assert_eq!(jet.d3g_at(1, 1, 0, 0, 0), 0.0);
        assert_eq!(jet.dg_at(0, 0, 0), 0.0);
    }

    #[test]
    fn fd_oracle_agrees_with_exact_jet() {
        let field = polar_field();
        let point = [2.0f64, 0.25];
        let exact = field.evaluate_jet(&point, 3).unwrap();
        let fd = field.finite_difference_jet(&point, 3, 1e-3).unwrap();
        assert!(jet_relative_deviation(&exact, &fd) < 1e-6);
    }

    #[test]
    fn fd_oracle_on_flat_metric_is_below_step_squared() {
        let field = flat_lorentz_field(4);
        let fd = field.finite_difference_jet(&[0.0f64; 4], 3, 1e-3).unwrap();
        for block in [&fd.dg, &fd.d2g, &fd.d3g] {
            assert!(linalg::max_abs(block) < 1e-6);
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let chart =
            ChartSpec::new(vec![(-1.0, 1.0); 2], vec!["x".into(), "y".into()]).unwrap();
        let field = MetricField::from_fn(chart, |i, j| match (i, j) {
            (0, 0) => Expr::Coord(0), // vanishes at x = 0
            (1, 1) => Expr::Const(1.0),
            _ => Expr::Const(0.0),
        })
        .unwrap();
        let err = field.evaluate_jet(&[0.0f64, 0.0], 2).unwrap_err();
        assert!(matches!(err, ChartError::DegenerateMetric { .. }));
    }

    #[test]
    fn outside_domain_and_bad_order_are_rejected() {
        let field = polar_field();
        assert!(matches!(
            field.evaluate_jet(&[0.5f64, 0.0], 2),
            Err(ChartError::PointOutsideDomain { .. })
        ));
        assert!(matches!(
            field.evaluate_jet(&[2.0f64, 0.0], 4),
            Err(ChartError::JetOrderUnsupported(4))
        ));
        assert!(matches!(
            field.finite_difference_jet(&[1.0005f64, 0.0], 2, 1e-3),
            Err(ChartError::StencilOutsideDomain { .. })
        ));
    }

    #[test]
    fn piecewise_joins_match_to_order_three() {
        // One component carries max(0, t)⁴-style smoothing; jets from both
        // sides of the join must agree to order 3.
        let chart =
            ChartSpec::new(vec![(-1.0, 1.0); 2], vec!["t".into(), "y".into()]).unwrap();
        let pw = PiecewisePoly {
            breakpoints: vec![0.0],
            pieces: vec![vec![1.0], vec![1.0, 0.0, 0.0, 0.0, 1.0]],
        };
        let field = MetricField::from_fn(chart, |i, j| match (i, j) {
            (0, 0) => Expr::Piecewise { var: 0, pw: pw.clone() },
            (1, 1) => Expr::Const(1.0),
            _ => Expr::Const(0.0),
        })
        .unwrap();
        let eps = 1e-13;
        let left = field.evaluate_jet(&[-eps, 0.0f64], 3).unwrap();
        let right = field.evaluate_jet(&[eps, 0.0f64], 3).unwrap();
        for (a, b) in [
            (&left.g, &right.g),
            (&left.dg, &right.dg),
            (&left.d2g, &right.d2g),
            (&left.d3g, &right.d3g),
        ] {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        assert!(!field.stencil_clear_of_breakpoints(&[1e-4f64, 0.0], 1e-3));
        assert!(field.stencil_clear_of_breakpoints(&[0.5f64, 0.0], 1e-3));
    }

    #[test]
    fn polynomial_expr_component_round_trip() {
        let chart =
            ChartSpec::new(vec![(-1.0, 1.0); 3], vec!["a".into(), "b".into(), "c".into()])
                .unwrap();
        let mut p = Poly::coord(3, 0);
        p = p.mul(&Poly::coord(3, 1)).add(&Poly::constant(3, 2.0));
        let field = MetricField::from_fn(chart, |i, j| {
            if i == j {
                Expr::Polynomial(p.clone())
            } else {
                Expr::Const(0.0)
            }
        })
        .unwrap();
        let jet = field.evaluate_jet(&[0.5f64, 0.25, 0.0], 2).unwrap();
        assert!((jet.g_at(0, 0) - 2.125).abs() < 1e-15);
        assert_eq!(jet.dg_at(0, 0, 0), 0.25);
        assert_eq!(jet.d2g_at(1, 1, 0, 1), 1.0);
    }
}
