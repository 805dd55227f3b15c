//! Uniform 1D grids.

use crate::error::{Error, Result};

/// Uniform grid on an interval, either closed (both endpoints are nodes,
/// spacing `len/(n-1)`) or periodic (right endpoint identified with the
/// left, spacing `len/n`).
///
/// Node coordinates are always recomputed from `(a, b, n)` so two grids
/// built from the same data produce bit-identical nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    a: f64,
    b: f64,
    n: usize,
    periodic: bool,
}

impl UniformGrid {
    /// Closed grid with `n >= 2` nodes including both endpoints.
    pub fn closed(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n < 2 {
            return Err(Error::Config(format!(
                "closed grid needs b > a and n >= 2, got a={a}, b={b}, n={n}"
            )));
        }
        Ok(Self { a, b, n, periodic: false })
    }

    /// Periodic grid with `n >= 1` nodes; `b` is identified with `a`.
    pub fn periodic(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n < 1 {
            return Err(Error::Config(format!(
                "periodic grid needs b > a and n >= 1, got a={a}, b={b}, n={n}"
            )));
        }
        Ok(Self { a, b, n, periodic: true })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn start(&self) -> f64 {
        self.a
    }

    pub fn end(&self) -> f64 {
        self.b
    }

    pub fn extent(&self) -> f64 {
        self.b - self.a
    }

    /// Grid spacing; positive by construction.
    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.b - self.a) / self.n as f64
        } else {
            (self.b - self.a) / (self.n - 1) as f64
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a + self.spacing() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }
}
