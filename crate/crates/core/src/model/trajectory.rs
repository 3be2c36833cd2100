use std::sync::Arc;

use nalgebra::DVector;

use super::{Grid, History, Side};
use crate::error::{Error, Result};

/// A discretized element of PC_{rτ}: one `n`-vector per grid node, stored per
/// segment so both one-sided values exist at every breakpoint.
///
/// Between nodes the trajectory is linear; interpolation never crosses a
/// segment boundary.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: Arc<Grid>,
    n: usize,
    values: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Fills every node with `fill(segment_index, node_index, out)`.
    pub fn from_nodes<F>(grid: Arc<Grid>, n: usize, mut fill: F) -> Result<Self>
    where
        F: FnMut(usize, usize, &mut [f64]) -> Result<()>,
    {
        let mut values = Vec::with_capacity(grid.segments().len());
        for (si, seg) in grid.segments().iter().enumerate() {
            let mut v = vec![0.0; seg.len() * n];
            for (k, chunk) in v.chunks_exact_mut(n).enumerate() {
                fill(si, k, chunk)?;
            }
            values.push(v);
        }
        Ok(Trajectory { grid, n, values })
    }

    /// Samples `f(t)` at every node (the same value on both sides of a breakpoint).
    pub fn from_fn<F>(grid: Arc<Grid>, n: usize, f: F) -> Self
    where
        F: Fn(f64) -> DVector<f64>,
    {
        Self::from_nodes(grid.clone(), n, |si, k, out| {
            out.copy_from_slice(f(grid.segments()[si].times[k]).as_slice());
            Ok(())
        })
        .expect("infallible fill")
    }

    pub fn constant(grid: Arc<Grid>, value: &[f64]) -> Self {
        let n = value.len();
        Self::from_nodes(grid, n, |_, _, out| {
            out.copy_from_slice(value);
            Ok(())
        })
        .expect("infallible fill")
    }

    pub fn zeros(grid: Arc<Grid>, n: usize) -> Self {
        Self::constant(grid, &vec![0.0; n])
    }

    /// Builds a trajectory from per-segment flat value buffers.
    pub fn from_segment_values(grid: Arc<Grid>, n: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.segments().len() {
            return Err(Error::GridMismatch(format!(
                "{} value blocks for {} segments",
                values.len(),
                grid.segments().len()
            )));
        }
        for (seg, v) in grid.segments().iter().zip(&values) {
            if v.len() != seg.len() * n {
                return Err(Error::GridMismatch(format!(
                    "segment starting at {} has {} values, expected {}",
                    seg.start,
                    v.len(),
                    seg.len() * n
                )));
            }
        }
        Ok(Trajectory { grid, n, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn segment_values(&self, seg: usize) -> &[f64] {
        &self.values[seg]
    }

    pub(crate) fn segment_values_mut(&mut self, seg: usize) -> &mut [f64] {
        &mut self.values[seg]
    }

    pub fn into_segment_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    pub fn node(&self, seg: usize, k: usize) -> &[f64] {
        &self.values[seg][k * self.n..(k + 1) * self.n]
    }

    pub fn node_mut(&mut self, seg: usize, k: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.values[seg][k * n..(k + 1) * n]
    }

    /// Iterates `(segment, node, time, value)` over all stored nodes in time order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64, &[f64])> + '_ {
        self.grid.segments().iter().enumerate().flat_map(move |(si, seg)| {
            seg.times.iter().enumerate().map(move |(k, &t)| (si, k, t, self.node(si, k)))
        })
    }

    pub fn eval(&self, t: f64, side: Side) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        self.eval_into(t, side, out.as_mut_slice())?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, side: Side, out: &mut [f64]) -> Result<()> {
        let si = self.grid.locate(t, side).ok_or(Error::OutOfDomain {
            t,
            lo: self.grid.start(),
            hi: self.grid.end(),
        })?;
        self.eval_in_segment(si, t, out);
        Ok(())
    }

    /// Component `i` at `t`; `t` is clamped into the domain.
    pub fn component(&self, t: f64, side: Side, i: usize) -> f64 {
        let t = t.clamp(self.grid.start(), self.grid.end());
        let si = self.grid.locate(t, side).expect("clamped time is inside the grid");
        let times = &self.grid.segments()[si].times;
        let (k, w) = bracket(times, t);
        let v = &self.values[si];
        if w == 0.0 {
            v[k * self.n + i]
        } else {
            (1.0 - w) * v[k * self.n + i] + w * v[(k + 1) * self.n + i]
        }
    }

    fn eval_in_segment(&self, si: usize, t: f64, out: &mut [f64]) {
        let times = &self.grid.segments()[si].times;
        let (k, w) = bracket(times, t);
        let n = self.n;
        let v = &self.values[si];
        if w == 0.0 {
            out.copy_from_slice(&v[k * n..(k + 1) * n]);
        } else {
            for i in 0..n {
                out[i] = (1.0 - w) * v[k * n + i] + w * v[(k + 1) * n + i];
            }
        }
    }

    /// The history segment `z_t(s) = z(t + s)`, `s ∈ [-r, 0]`.
    pub fn translate(&self, t: f64) -> Result<History<'_>> {
        if !(t >= 0.0 && t <= self.grid.end()) {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi: self.grid.end() });
        }
        Ok(History::anchored(self, t, Side::Left))
    }

    /// `sup_t ‖z(t)‖` over all stored node values.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.chunks_exact(self.n))
            .map(norm)
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// First node time holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<f64> {
        self.nodes().find(|(_, _, _, v)| v.iter().any(|x| !x.is_finite())).map(|(_, _, t, _)| t)
    }

    /// Node-wise `self + scale * other` on a shared grid.
    pub fn add_scaled(&self, other: &Trajectory, scale: f64) -> Result<Trajectory> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + scale * y).collect())
            .collect();
        Ok(Trajectory { grid: self.grid.clone(), n: self.n, values })
    }

    pub(crate) fn check_same_grid(&self, other: &Trajectory) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch(format!("dimension {} vs {}", self.n, other.n)));
        }
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::GridMismatch("node sets differ".into()));
        }
        Ok(())
    }
}

/// Index `k` and weight `w` with `t = (1-w)·times[k] + w·times[k+1]`; `w = 0`
/// on an exact node.
fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let k = times.partition_point(|&x| x < t);
    if k < times.len() && times[k] == t {
        return (k, 0.0);
    }
    if k == 0 {
        return (0, 0.0);
    }
    if k >= times.len() {
        return (times.len() - 1, 0.0);
    }
    let (a, b) = (times[k - 1], times[k]);
    (k - 1, (t - a) / (b - a))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sup-norm distance evaluated on the union of both node sets, including
/// both stored sides at breakpoints.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::GridMismatch(format!("dimension {} vs {}", a.n, b.n)));
    }
    if a.grid.start() != b.grid.start() || a.grid.end() != b.grid.end() {
        return Err(Error::Domain(format!(
            "horizon mismatch: [{}, {}] vs [{}, {}]",
            a.grid.start(),
            a.grid.end(),
            b.grid.start(),
            b.grid.end()
        )));
    }
    if Arc::ptr_eq(&a.grid, &b.grid) || *a.grid == *b.grid {
        let d = a
            .values
            .iter()
            .zip(&b.values)
            .flat_map(|(x, y)| x.chunks_exact(a.n).zip(y.chunks_exact(a.n)))
            .map(|(x, y)| diff_norm(x, y))
            .fold(0.0, f64::max);
        return Ok(d);
    }
    Ok(one_way(a, b)?.max(one_way(b, a)?))
}

fn one_way(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let mut buf = vec![0.0; a.n];
    let mut d: f64 = 0.0;
    for (si, seg) in a.grid.segments().iter().enumerate() {
        let last = seg.len() - 1;
        for (k, &t) in seg.times.iter().enumerate() {
            let side = if k == 0 && si > 0 && k != last { Side::Right } else { Side::Left };
            b.eval_into(t, side, &mut buf)?;
            d = d.max(diff_norm(a.node(si, k), &buf));
        }
    }
    Ok(d)
}
