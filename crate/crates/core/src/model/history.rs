use nalgebra::DVector;

use super::trajectory::norm;
use super::{Side, Trajectory};

/// A piecewise-linear function on `[-r, 0]` given by knots; used for
/// standalone histories (random samples, tabulated φ).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledHistory {
    pub r: f64,
    pub n: usize,
    /// Increasing knot times from `-r` to `0`.
    pub knots: Vec<f64>,
    /// `knots.len() * n` values, row-major by knot.
    pub values: Vec<f64>,
}

impl SampledHistory {
    pub fn view(&self) -> History<'_> {
        History { src: Source::Sampled(self), anchor: 0.0, side: Side::Left, r: self.r, n: self.n }
    }

    fn component(&self, i: usize, s: f64) -> f64 {
        let k = self.knots.partition_point(|&x| x < s);
        if k == 0 {
            return self.values[i];
        }
        if k >= self.knots.len() {
            return self.values[(self.knots.len() - 1) * self.n + i];
        }
        let (a, b) = (self.knots[k - 1], self.knots[k]);
        let w = (s - a) / (b - a);
        (1.0 - w) * self.values[(k - 1) * self.n + i] + w * self.values[k * self.n + i]
    }
}

pub(crate) type PointReader<'a> = &'a (dyn Fn(f64, usize) -> f64 + Sync);

#[derive(Clone, Copy)]
enum Source<'a> {
    Trajectory(&'a Trajectory),
    Sampled(&'a SampledHistory),
    /// Reads the absolute-time value of component `i`.
    Reader(PointReader<'a>),
}

/// The history segment `s ↦ z(anchor + s)` on `[-r, 0]`.
///
/// A view: it borrows the trajectory (or sample) it reads from.
#[derive(Clone, Copy)]
pub struct History<'a> {
    src: Source<'a>,
    anchor: f64,
    side: Side,
    r: f64,
    n: usize,
}

impl<'a> History<'a> {
    /// View of `z` anchored at `t`; jump points are read from `side`.
    pub fn anchored(z: &'a Trajectory, t: f64, side: Side) -> Self {
        History { src: Source::Trajectory(z), anchor: t, side, r: z.grid().r(), n: z.n() }
    }

    pub(crate) fn from_reader(reader: PointReader<'a>, t: f64, r: f64, n: usize) -> Self {
        History { src: Source::Reader(reader), anchor: t, side: Side::Left, r, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Component `i` (0-based) at lag position `s ∈ [-r, 0]`.
    pub fn component(&self, i: usize, s: f64) -> f64 {
        let s = s.clamp(-self.r, 0.0);
        match self.src {
            Source::Trajectory(z) => z.component(self.anchor + s, self.side, i),
            Source::Sampled(h) => h.component(i, s),
            Source::Reader(f) => f(self.anchor + s, i),
        }
    }

    pub fn eval(&self, s: f64) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| self.component(i, s)))
    }

    /// `sup_{s ∈ [-r,0]} ‖h(s)‖`, exact for the piecewise-linear sources.
    pub fn sup_norm(&self) -> f64 {
        let mut buf = vec![0.0; self.n];
        let mut best: f64 = 0.0;
        let mut probe = |s: f64, buf: &mut Vec<f64>| {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = self.component(i, s);
            }
            best = best.max(norm(buf));
        };
        match self.src {
            Source::Trajectory(z) => {
                let (lo, hi) = (self.anchor - self.r, self.anchor);
                probe(-self.r, &mut buf);
                probe(0.0, &mut buf);
                for (_, _, t, v) in z.nodes() {
                    if t > lo && t < hi {
                        best = best.max(norm(v));
                    }
                }
            }
            Source::Sampled(h) => {
                for v in h.values.chunks_exact(h.n) {
                    best = best.max(norm(v));
                }
            }
            Source::Reader(_) => {
                for k in 0..=64 {
                    probe(-self.r + self.r * k as f64 / 64.0, &mut buf);
                }
            }
        }
        best
    }
}
