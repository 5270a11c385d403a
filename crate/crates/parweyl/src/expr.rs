//! Closed-form expression vocabulary for metric components.
//!
//! Components are built from constants, coordinates, `+`, `×`, integer
//! powers, sparse multivariate polynomials, and piecewise-polynomial
//! univariate functions with C³ joins. Nothing transcendental: the metric
//! families need only polynomials, and the piecewise support exists for
//! profiles that are constant on a subinterval.
//!
//! Every node evaluates either to a plain scalar or to a [`Jet`], so the
//! same tree drives the exact-derivative path and the finite-difference
//! oracle.

use crate::jet::Jet;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Sparse multivariate polynomial with f64 coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub nvars: usize,
    /// `(powers, coefficient)` pairs; powers has length `nvars`.
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(nvars);
        }
        Poly { nvars, terms: vec![(vec![0; nvars], c)] }
    }

    pub fn coord(nvars: usize, i: usize) -> Self {
        let mut p = vec![0; nvars];
        p[i] = 1;
        Poly { nvars, terms: vec![(p, 1.0)] }
    }

    /// Collect like terms and drop zeros; keeps a canonical term order.
    fn normalize(mut self) -> Self {
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Vec<u32>, f64)> = Vec::new();
        for (p, c) in self.terms.into_iter() {
            if let Some(last) = out.last_mut() {
                if last.0 == p {
                    last.1 += c;
                    continue;
                }
            }
            out.push((p, c));
        }
        out.retain(|t| t.1 != 0.0);
        Poly { nvars: self.nvars, terms: out }
    }

    pub fn add(&self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        Poly { nvars: self.nvars, terms }.normalize()
    }

    pub fn scale(&self, c: f64) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(p, k)| (p.clone(), k * c)).collect(),
        }
        .normalize()
    }

    pub fn sub(&self, rhs: &Poly) -> Poly {
        self.add(&rhs.scale(-1.0))
    }

    pub fn mul(&self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (pa, ca) in &self.terms {
            for (pb, cb) in &rhs.terms {
                let powers: Vec<u32> = pa.iter().zip(pb).map(|(a, b)| a + b).collect();
                terms.push((powers, ca * cb));
            }
        }
        Poly { nvars: self.nvars, terms }.normalize()
    }

    /// Exact partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut terms = Vec::new();
        for (p, c) in &self.terms {
            if p[i] == 0 {
                continue;
            }
            let mut q = p.clone();
            q[i] -= 1;
            terms.push((q, c * p[i] as f64));
        }
        Poly { nvars: self.nvars, terms }.normalize()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.1.abs()))
    }

    pub fn eval<T: Real>(&self, point: &[T]) -> T {
        let mut acc = T::zero();
        for (p, c) in &self.terms {
            let mut term = T::of(*c);
            for (i, &pow) in p.iter().enumerate() {
                for _ in 0..pow {
                    term = term * point[i];
                }
            }
            acc = acc + term;
        }
        acc
    }

    pub fn eval_jet<T: Real>(&self, point: &[T], order: usize) -> Jet<T> {
        let n = self.nvars;
        let mut acc = Jet::constant(n, order, T::zero());
        for (p, c) in &self.terms {
            let mut term = Jet::constant(n, order, T::of(*c));
            for (i, &pow) in p.iter().enumerate() {
                if pow > 0 {
                    let x = Jet::coordinate(n, order, i, point[i]);
                    term = term.mul(&x.powi(pow));
                }
            }
            acc = acc.add(&term);
        }
        acc
    }
}

/// Univariate polynomial evaluation (coefficients in ascending degree).
fn horner<T: Real>(coeffs: &[f64], x: T) -> T {
    let mut acc = T::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * x + T::of(c);
    }
    acc
}

fn poly_derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Piecewise polynomial of one coordinate with C³ joins.
///
/// `breakpoints` are the interior joins, strictly increasing; `pieces` has
/// one more entry than `breakpoints`. At an exact breakpoint the right-hand
/// piece is used, so evaluation is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub breakpoints: Vec<f64>,
    /// Ascending-degree coefficient lists, one per piece.
    pub pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    /// Single polynomial valid everywhere.
    pub fn single(coeffs: Vec<f64>) -> Self {
        PiecewisePoly { breakpoints: Vec::new(), pieces: vec![coeffs] }
    }

    pub fn constant(c: f64) -> Self {
        Self::single(vec![c])
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.pieces.is_empty() {
            return Err("piecewise polynomial needs at least one piece".into());
        }
        if self.pieces.len() != self.breakpoints.len() + 1 {
            return Err(format!(
                "piece count {} does not match breakpoint count {} + 1",
                self.pieces.len(),
                self.breakpoints.len()
            ));
        }
        for w in self.breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err("breakpoints must be strictly increasing".into());
            }
        }
        let r = self.c3_residual();
        if r > 1e-9 {
            return Err(format!("pieces do not join C³: worst mismatch {r:.3e}"));
        }
        Ok(())
    }

    /// Worst mismatch of value and first three derivatives across the joins.
    pub fn c3_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (b_idx, &b) in self.breakpoints.iter().enumerate() {
            let mut left = self.pieces[b_idx].clone();
            let mut right = self.pieces[b_idx + 1].clone();
            for _ in 0..4 {
                let l: f64 = horner(&left, b);
                let r: f64 = horner(&right, b);
                worst = worst.max((l - r).abs());
                left = poly_derivative_coeffs(&left);
                right = poly_derivative_coeffs(&right);
            }
        }
        worst
    }

    fn piece_index<T: Real>(&self, x: T) -> usize {
        self.breakpoints.iter().filter(|&&b| T::of(b) <= x).count()
    }

    pub fn eval<T: Real>(&self, x: T) -> T {
        horner(&self.pieces[self.piece_index(x)], x)
    }

    /// Derivative of given order at a plain value (right piece at joins).
    pub fn eval_derivative<T: Real>(&self, x: T, order: usize) -> T {
        let mut coeffs = self.pieces[self.piece_index(x)].clone();
        for _ in 0..order {
            coeffs = poly_derivative_coeffs(&coeffs);
        }
        horner(&coeffs, x)
    }

    pub fn eval_jet<T: Real>(&self, n: usize, var: usize, point: &[T], order: usize) -> Jet<T> {
        let coeffs = &self.pieces[self.piece_index(point[var])];
        let x = Jet::coordinate(n, order, var, point[var]);
        let mut acc = Jet::constant(n, order, T::zero());
        for &c in coeffs.iter().rev() {
            acc = acc.mul(&x).add(&Jet::constant(n, order, T::of(c)));
        }
        acc
    }

    /// True when every piece is a constant polynomial.
    pub fn is_constant(&self) -> bool {
        self.pieces.iter().all(|p| p.iter().skip(1).all(|&c| c == 0.0))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, &c| m.max(c.abs()))
    }
}

/// Closed-form scalar expression of the chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    PowInt(Box<Expr>, u32),
    Polynomial(Poly),
    /// Piecewise polynomial of a single coordinate.
    Piecewise { var: usize, pw: PiecewisePoly },
}

impl Expr {
    pub fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }

    pub fn eval<T: Real>(&self, point: &[T]) -> T {
        match self {
            Expr::Const(c) => T::of(*c),
            Expr::Coord(i) => point[*i],
            Expr::Add(a, b) => a.eval(point) + b.eval(point),
            Expr::Sub(a, b) => a.eval(point) - b.eval(point),
            Expr::Mul(a, b) => a.eval(point) * b.eval(point),
            Expr::Neg(a) => -a.eval(point),
            Expr::PowInt(a, p) => {
                let base = a.eval(point);
                let mut acc = T::one();
                for _ in 0..*p {
                    acc = acc * base;
                }
                acc
            }
            Expr::Polynomial(p) => {
                // A polynomial may be declared in fewer variables than the
                // chart has; it reads the leading coordinates.
                p.eval(point)
            }
            Expr::Piecewise { var, pw } => pw.eval(point[*var]),
        }
    }

    pub fn eval_jet<T: Real>(&self, n: usize, point: &[T], order: usize) -> Jet<T> {
        match self {
            Expr::Const(c) => Jet::constant(n, order, T::of(*c)),
            Expr::Coord(i) => Jet::coordinate(n, order, *i, point[*i]),
            Expr::Add(a, b) => a.eval_jet(n, point, order).add(&b.eval_jet(n, point, order)),
            Expr::Sub(a, b) => a.eval_jet(n, point, order).sub(&b.eval_jet(n, point, order)),
            Expr::Mul(a, b) => a.eval_jet(n, point, order).mul(&b.eval_jet(n, point, order)),
            Expr::Neg(a) => a.eval_jet(n, point, order).neg(),
            Expr::PowInt(a, p) => a.eval_jet(n, point, order).powi(*p),
            Expr::Polynomial(p) => {
                let mut acc = Jet::constant(n, order, T::zero());
                for (powers, c) in &p.terms {
                    let mut term = Jet::constant(n, order, T::of(*c));
                    for (i, &pow) in powers.iter().enumerate() {
                        if pow > 0 {
                            term = term.mul(&Jet::coordinate(n, order, i, point[i]).powi(pow));
                        }
                    }
                    acc = acc.add(&term);
                }
                acc
            }
            Expr::Piecewise { var, pw } => pw.eval_jet(n, *var, point, order),
        }
    }

    /// Piecewise sub-expressions restrict where the field is smooth; the
    /// breakpoint set is needed to keep finite-difference stencils off joins.
    pub fn collect_breakpoints(&self, out: &mut Vec<(usize, f64)>) {
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_breakpoints(out);
                b.collect_breakpoints(out);
            }
            Expr::Neg(a) | Expr::PowInt(a, _) => a.collect_breakpoints(out),
            Expr::Piecewise { var, pw } => {
                for &b in &pw.breakpoints {
                    out.push((*var, b));
                }
            }
            _ => {}
        }
    }
}
