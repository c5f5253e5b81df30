//! Third-order Taylor jets of scalar functions on R³.
//!
//! Jets carry the value together with the full (symmetric) gradient, Hessian
//! and third-derivative tensor. Products and compositions with univariate
//! functions propagate exactly, which is all the metric families need.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarJet {
    pub v: f64,
    pub d1: [f64; 3],
    pub d2: [[f64; 3]; 3],
    pub d3: [[[f64; 3]; 3]; 3],
}

impl ScalarJet {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            d1: [0.0; 3],
            d2: [[0.0; 3]; 3],
            d3: [[[0.0; 3]; 3]; 3],
        }
    }

    /// |x|² with its exact derivatives.
    pub fn radius_squared(x: [f64; 3]) -> Self {
        let mut jet = Self::constant(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        for i in 0..3 {
            jet.d1[i] = 2.0 * x[i];
            jet.d2[i][i] = 2.0;
        }
        jet
    }

    /// Chain rule for `f ∘ self`, given `f, f', f'', f'''` at `self.v`.
    pub fn compose(&self, f: [f64; 4]) -> Self {
        let [f0, f1, f2, f3] = f;
        let g = &self.d1;
        let h = &self.d2;
        let mut out = Self::constant(f0);
        for i in 0..3 {
            out.d1[i] = f1 * g[i];
            for j in 0..3 {
                out.d2[i][j] = f2 * g[i] * g[j] + f1 * h[i][j];
                for k in 0..3 {
                    out.d3[i][j][k] = f3 * g[i] * g[j] * g[k]
                        + f2 * (h[i][j] * g[k] + h[i][k] * g[j] + h[j][k] * g[i])
                        + f1 * self.d3[i][j][k];
                }
            }
        }
        out
    }

    /// Leibniz rule.
    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (self, other);
        let mut out = Self::constant(a.v * b.v);
        for i in 0..3 {
            out.d1[i] = a.d1[i] * b.v + a.v * b.d1[i];
            for j in 0..3 {
                out.d2[i][j] = a.d2[i][j] * b.v
                    + a.d1[i] * b.d1[j]
                    + a.d1[j] * b.d1[i]
                    + a.v * b.d2[i][j];
                for k in 0..3 {
                    out.d3[i][j][k] = a.d3[i][j][k] * b.v
                        + a.d2[i][j] * b.d1[k]
                        + a.d2[i][k] * b.d1[j]
                        + a.d2[j][k] * b.d1[i]
                        + a.d1[i] * b.d2[j][k]
                        + a.d1[j] * b.d2[i][k]
                        + a.d1[k] * b.d2[i][j]
                        + a.v * b.d3[i][j][k];
                }
            }
        }
        out
    }

    /// Largest absolute entry among derivatives of total order `order`.
    pub fn max_abs_of_order(&self, order: usize) -> f64 {
        match order {
            0 => self.v.abs(),
            1 => self.d1.iter().fold(0.0, |m, v| m.max(v.abs())),
            2 => self.d2.iter().flatten().fold(0.0, |m, v| m.max(v.abs())),
            3 => self
                .d3
                .iter()
                .flatten()
                .flatten()
                .fold(0.0, |m, v| m.max(v.abs())),
            _ => 0.0,
        }
    }
}
