use std::fmt;

use serde::Serialize;

use crate::model::{PairFn, ScalarFn};

/// Tabulated nondecreasing function of one radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl Table1 {
    /// Builds the table, replacing `values` by their running maximum.
    pub fn monotone(radii: Vec<f64>, mut values: Vec<f64>) -> Self {
        running_max(&mut values);
        Table1 { radii, values }
    }

    /// Linear interpolation; the first value below the grid and the final
    /// slope above it.
    pub fn eval(&self, x: f64) -> f64 {
        let (k, w) = locate(&self.radii, x);
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }
}

/// Tabulated function of two radii, nondecreasing in each argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub radii: Vec<f64>,
    /// `values[a][b]` at `(radii[a], radii[b])`.
    pub values: Vec<Vec<f64>>,
}

impl Table2 {
    pub fn monotone(radii: Vec<f64>, mut values: Vec<Vec<f64>>) -> Self {
        for row in values.iter_mut() {
            running_max(row);
        }
        for a in 1..values.len() {
            for b in 0..values[a].len() {
                values[a][b] = values[a][b].max(values[a - 1][b]);
            }
        }
        Table2 { radii, values }
    }

    /// Bilinear inside the grid. Past the last radius each argument adds its
    /// largest final-cell slope.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let m = self.radii.len();
        let last = self.radii[m - 1];
        let (uc, vc) = (u.min(last), v.min(last));
        let (a, wa) = locate(&self.radii, uc);
        let (b, wb) = locate(&self.radii, vc);
        let t = &self.values;
        let inner = (1.0 - wa) * ((1.0 - wb) * t[a][b] + wb * t[a][b + 1])
            + wa * ((1.0 - wb) * t[a + 1][b] + wb * t[a + 1][b + 1]);
        if m < 2 {
            return inner;
        }
        let h = last - self.radii[m - 2];
        let su = (0..m).map(|j| (t[m - 1][j] - t[m - 2][j]) / h).fold(0.0, f64::max);
        let sv = (0..m).map(|i| (t[i][m - 1] - t[i][m - 2]) / h).fold(0.0, f64::max);
        inner + su * (u - uc) + sv * (v - vc)
    }
}

fn running_max(v: &mut [f64]) {
    for k in 1..v.len() {
        v[k] = v[k].max(v[k - 1]);
    }
}

/// Cell index `k` (so `k + 1` is valid) and weight; weights above 1 extend
/// the last cell, weights are 0 below the grid.
fn locate(radii: &[f64], x: f64) -> (usize, f64) {
    let m = radii.len();
    if m == 1 {
        return (0, 0.0);
    }
    if x <= radii[0] {
        return (0, 0.0);
    }
    let k = radii.partition_point(|&r| r < x).clamp(1, m - 1) - 1;
    (k, (x - radii[k]) / (radii[k + 1] - radii[k]))
}

/// Growth envelope `Ψ`.
#[derive(Clone)]
pub enum ScalarEnvelope {
    Declared(ScalarFn),
    Table(Table1),
}

impl ScalarEnvelope {
    /// `NaN` if a declared envelope fails, so every inequality using it fails.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarEnvelope::Declared(f) => f(x).unwrap_or(f64::NAN),
            ScalarEnvelope::Table(t) => t.eval(x),
        }
    }

    pub fn is_declared(&self) -> bool {
        matches!(self, ScalarEnvelope::Declared(_))
    }
}

impl fmt::Debug for ScalarEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarEnvelope::Declared(_) => f.write_str("Declared(..)"),
            ScalarEnvelope::Table(t) => f.debug_tuple("Table").field(t).finish(),
        }
    }
}

/// Lipschitz envelope `K`.
#[derive(Clone)]
pub enum PairEnvelope {
    Declared(PairFn),
    Table(Table2),
}

impl PairEnvelope {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            PairEnvelope::Declared(f) => f(u, v).unwrap_or(f64::NAN),
            PairEnvelope::Table(t) => t.eval(u, v),
        }
    }

    pub fn is_declared(&self) -> bool {
        matches!(self, PairEnvelope::Declared(_))
    }
}

impl fmt::Debug for PairEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairEnvelope::Declared(_) => f.write_str("Declared(..)"),
            PairEnvelope::Table(t) => f.debug_tuple("Table").field(t).finish(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_interpolates_and_extrapolates() {
        let t = Table1::monotone(vec![1.0, 2.0, 3.0], vec![1.0, 0.5, 3.0]);
        assert_eq!(t.values, vec![1.0, 1.0, 3.0]);
        assert_eq!(t.eval(0.2), 1.0);
        assert_eq!(t.eval(2.5), 2.0);
        assert_eq!(t.eval(4.0), 5.0);
    }

    #[test]
    fn table2_is_monotone_and_extends() {
        let r = vec![1.0, 2.0];
        let t = Table2::monotone(r, vec![vec![2.0, 3.0], vec![1.0, 4.0]]);
        assert_eq!(t.values, vec![vec![2.0, 3.0], vec![2.0, 4.0]]);
        assert_eq!(t.eval(1.0, 1.0), 2.0);
        assert_eq!(t.eval(1.5, 1.5), 2.75);
        // su = max(0, 1) = 1, sv = max(1, 2) = 2
        assert_eq!(t.eval(3.0, 2.0), 5.0);
        assert_eq!(t.eval(2.0, 3.0), 6.0);
    }
}
