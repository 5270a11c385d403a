//! Truncated-Taylor forward differentiation.
//!
//! A [`Jet`] carries a value together with all partial derivatives up to a
//! chosen order (at most 3) with respect to `n` coordinates. Arithmetic
//! propagates the blocks by the Leibniz rule, so results are exact up to
//! floating-point rounding: no truncation error, no expression swell.
//!
//! Derivative blocks are stored as full (unsymmetrized) arrays; the Leibniz
//! formulas are written symmetrically, so mixed partials commute bit-exactly.
//! Blocks above `order` are kept zeroed and must not be read.

use crate::scalar::Real;

pub const MAX_ORDER: usize = 3;

/// Value plus partial derivatives to `order` in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    pub n: usize,
    pub order: usize,
    pub v: T,
    /// `d1[i] = ∂_i f`
    pub d1: Vec<T>,
    /// `d2[i*n+j] = ∂_i ∂_j f`
    pub d2: Vec<T>,
    /// `d3[(i*n+j)*n+k] = ∂_i ∂_j ∂_k f`
    pub d3: Vec<T>,
}

impl<T: Real> Jet<T> {
    /// Blocks are allocated only up to `order`; higher blocks stay empty.
    pub fn constant(n: usize, order: usize, v: T) -> Self {
        assert!(order <= MAX_ORDER);
        Jet {
            n,
            order,
            v,
            d1: vec![T::zero(); if order >= 1 { n } else { 0 }],
            d2: vec![T::zero(); if order >= 2 { n * n } else { 0 }],
            d3: vec![T::zero(); if order >= 3 { n * n * n } else { 0 }],
        }
    }

    /// The coordinate function `x_i`, seeded at value `v`.
    pub fn coordinate(n: usize, order: usize, i: usize, v: T) -> Self {
        let mut j = Self::constant(n, order, v);
        if order >= 1 {
            j.d1[i] = T::one();
        }
        j
    }

    #[inline]
    pub fn d2_at(&self, i: usize, j: usize) -> T {
        self.d2[i * self.n + j]
    }

    #[inline]
    pub fn d3_at(&self, i: usize, j: usize, k: usize) -> T {
        self.d3[(i * self.n + j) * self.n + k]
    }

    /// Partial derivative as a jet of one order less.
    pub fn diff(&self, i: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.n;
        let mut out = Self::constant(n, self.order - 1, self.d1[i]);
        if out.order >= 1 {
            for a in 0..n {
                out.d1[a] = self.d2_at(i, a);
            }
        }
        if out.order >= 2 {
            for a in 0..n {
                for b in 0..n {
                    out.d2[a * n + b] = self.d3_at(i, a, b);
                }
            }
        }
        out
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = self.clone();
        out.v = out.v * c;
        for x in out.d1.iter_mut() {
            *x = *x * c;
        }
        for x in out.d2.iter_mut() {
            *x = *x * c;
        }
        for x in out.d3.iter_mut() {
            *x = *x * c;
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    fn zip(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.n, rhs.n);
        let order = self.order.min(rhs.order);
        let mut out = Self::constant(self.n, order, f(self.v, rhs.v));
        for i in 0..out.d1.len() {
            out.d1[i] = f(self.d1[i], rhs.d1[i]);
        }
        for i in 0..out.d2.len() {
            out.d2[i] = f(self.d2[i], rhs.d2[i]);
        }
        for i in 0..out.d3.len() {
            out.d3[i] = f(self.d3[i], rhs.d3[i]);
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let order = self.order.min(rhs.order);
        let (f, g) = (self, rhs);
        let mut out = Self::constant(n, order, f.v * g.v);
        if order >= 1 {
            for i in 0..n {
                out.d1[i] = f.d1[i] * g.v + f.v * g.d1[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.d2[i * n + j] = f.d2_at(i, j) * g.v
                        + f.d1[i] * g.d1[j]
                        + f.d1[j] * g.d1[i]
                        + f.v * g.d2_at(i, j);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out.d3[(i * n + j) * n + k] = f.d3_at(i, j, k) * g.v
                            + f.d2_at(i, j) * g.d1[k]
                            + f.d2_at(i, k) * g.d1[j]
                            + f.d2_at(j, k) * g.d1[i]
                            + f.d1[i] * g.d2_at(j, k)
                            + f.d1[j] * g.d2_at(i, k)
                            + f.d1[k] * g.d2_at(i, j)
                            + f.v * g.d3_at(i, j, k);
                    }
                }
            }
        }
        out
    }

    /// Non-negative integer power by repeated multiplication.
    pub fn powi(&self, p: u32) -> Self {
        let mut acc = Self::constant(self.n, self.order, T::one());
        for _ in 0..p {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiplicative inverse. The nilpotent part `u = f/f(0) - 1` makes the
    /// geometric series `1 - u + u² - u³` exact after truncation.
    pub fn recip(&self) -> Self {
        assert!(self.v != T::zero(), "reciprocal of a jet with zero value part");
        let inv_v = T::one() / self.v;
        let mut u = self.scale(inv_v);
        u.v = T::zero();
        let one = Self::constant(self.n, self.order, T::one());
        let u2 = u.mul(&u);
        let u3 = u2.mul(&u);
        one.sub(&u).add(&u2).sub(&u3).scale(inv_v)
    }

    pub fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.recip())
    }
}
