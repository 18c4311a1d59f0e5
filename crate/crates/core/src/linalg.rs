// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{BarError, Result};

/// Determinants below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`; symmetric by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Matrix2 {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }

    /// Adjugate inverse; errors when `|det| < 1e−12`.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(det.abs() >= SINGULAR_DET) {
            return Err(BarError::SingularMatrix(det));
        }
        Ok(Self::new(self.c / det, -self.b / det, self.a / det))
    }

    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        self.a * v[0] * v[0] + 2.0 * self.b * v[0] * v[1] + self.c * v[1] * v[1]
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.b * v[0] + self.c * v[1]]
    }

    /// `V·M·V` for symmetric `V`, `M`, re-symmetrized against rounding.
    pub fn sandwich(v: &Self, m: &Self) -> Self {
        let vm = [[v.a * m.a + v.b * m.b, v.a * m.b + v.b * m.c], [v.b * m.a + v.c * m.b, v.b * m.b + v.c * m.c]];
        let a = vm[0][0] * v.a + vm[0][1] * v.b;
        let b1 = vm[0][0] * v.b + vm[0][1] * v.c;
        let b2 = vm[1][0] * v.a + vm[1][1] * v.b;
        let c = vm[1][0] * v.b + vm[1][1] * v.c;
        Self::new(a, 0.5 * (b1 + b2), c)
    }

    /// Eigenvalues, smallest first.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * (self.a + self.c);
        let disc = (0.25 * (self.a - self.c).powi(2) + self.b * self.b).sqrt();
        [half_tr - disc, half_tr + disc]
    }

    pub fn is_negative_definite(&self) -> bool {
        self.a < 0.0 && self.det() > 0.0
    }
}
