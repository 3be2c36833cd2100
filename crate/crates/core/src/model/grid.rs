use serde::Serialize;

use super::{Partition, Side};
use crate::error::{Error, Result};

/// Which law of the system governs a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PieceKind {
    /// `[-r, 0]`, given by `phi - g(…)`.
    History,
    /// `(s_i, t_{i+1}]`, `i = 0..=N`, the differential law.
    Ode(usize),
    /// `(t_i, s_i]`, `i = 1..=N` (1-based), the impulse law.
    Impulse(usize),
    /// Past the horizon; produced by prolongation only.
    Continuation,
}

/// A closed time interval between two consecutive breakpoints with its nodes.
///
/// Adjacent segments share their boundary time; the first node of a segment
/// holds the right limit there and the last node of the previous segment the
/// left limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub kind: PieceKind,
    pub start: f64,
    pub end: f64,
    pub times: Vec<f64>,
    /// Indices of interior nodes where the step changes: θ points and
    /// delay-propagated breakpoints. The trajectory is continuous there but
    /// its derivative may not be.
    pub joints: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Whether node `k` starts a new sub-interval (segment start or joint).
    pub fn is_left_edge(&self, k: usize) -> bool {
        k == 0 || self.joints.binary_search(&k).is_ok()
    }
}

/// Time grid over `[-r, tau]` (or beyond, after prolongation) with every
/// breakpoint as a segment boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    r: f64,
    tau: f64,
    step: f64,
    segments: Vec<Segment>,
}

impl Grid {
    /// `(tau + r) / 2000`.
    pub fn default_step(partition: &Partition) -> f64 {
        (partition.tau + partition.r) / 2000.0
    }

    /// Builds the grid with nominal step `step`. Besides the breakpoints, each
    /// θ_j and each point `b + d` (`b ∈ {0, t_i, s_i}`, `d` a positive lag)
    /// is made a node.
    pub fn new(partition: &Partition, step: f64, lags: &[f64]) -> Result<Grid> {
        let violations = partition.violations();
        if !violations.is_empty() {
            return Err(Error::InvalidSpec(violations));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("grid step must be positive, got {step}")));
        }
        let mut pieces = vec![(PieceKind::History, -partition.r, 0.0)];
        let mut start = 0.0;
        for (i, imp) in partition.impulses.iter().enumerate() {
            pieces.push((PieceKind::Ode(i), start, imp.t));
            if imp.s > imp.t {
                pieces.push((PieceKind::Impulse(i + 1), imp.t, imp.s));
            }
            start = imp.s;
        }
        pieces.push((PieceKind::Ode(partition.n_impulses()), start, partition.tau));

        let mut cuts: Vec<f64> = partition.theta.clone();
        let mut sources = vec![0.0];
        for imp in &partition.impulses {
            sources.push(imp.t);
            sources.push(imp.s);
        }
        for &d in lags.iter().filter(|&&d| d > 0.0) {
            cuts.extend(sources.iter().map(|b| b + d));
        }
        cuts.sort_by(f64::total_cmp);

        let tiny = step * 1e-6;
        let segments = pieces
            .into_iter()
            .map(|(kind, a, b)| {
                let mut inner: Vec<f64> = cuts.iter().copied().filter(|&c| c > a + tiny && c < b - tiny).collect();
                inner.dedup_by(|x, y| (*x - *y).abs() <= tiny);
                build_segment(kind, a, b, &inner, step)
            })
            .collect();
        Ok(Grid { r: partition.r, tau: partition.tau, step, segments })
    }

    /// A copy of this grid with a continuation segment over `times`
    /// (`times[0]` must equal the current end).
    pub fn with_continuation(&self, times: Vec<f64>) -> Grid {
        debug_assert!(times.first() == Some(&self.end()));
        let mut segments = self.segments.clone();
        let end = *times.last().unwrap();
        segments.push(Segment { kind: PieceKind::Continuation, start: self.end(), end, times, joints: vec![] });
        Grid { r: self.r, tau: self.tau, step: self.step, segments }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Horizon of the underlying partition.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Nominal step.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start(&self) -> f64 {
        -self.r
    }

    /// Last covered time (`tau` unless continued).
    pub fn end(&self) -> f64 {
        self.segments.last().map_or(self.tau, |s| s.end)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn node_count(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Index of the segment holding the `side` value at `t`.
    pub fn locate(&self, t: f64, side: Side) -> Option<usize> {
        if !self.contains(t) {
            return None;
        }
        let last = self.segments.len() - 1;
        let idx = match side {
            Side::Left => self.segments.partition_point(|s| s.end < t).min(last),
            Side::Right => self.segments.partition_point(|s| s.start <= t).saturating_sub(1),
        };
        Some(idx)
    }

    /// Sorted, de-duplicated node times in `[0, end]`.
    pub fn forward_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.node_count());
        for seg in self.segments.iter().filter(|s| s.kind != PieceKind::History) {
            for &t in &seg.times {
                if out.last() != Some(&t) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Breakpoint times shared by two segments (where two-sided values live).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

fn build_segment(kind: PieceKind, a: f64, b: f64, inner: &[f64], step: f64) -> Segment {
    let mut times = vec![a];
    let mut joints = Vec::new();
    let mut lo = a;
    for (idx, &hi) in inner.iter().chain(std::iter::once(&b)).enumerate() {
        let m = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (hi - lo) / m as f64;
        for k in 1..m {
            times.push(lo + k as f64 * h);
        }
        times.push(hi);
        if idx < inner.len() {
            joints.push(times.len() - 1);
        }
        lo = hi;
    }
    Segment { kind, start: a, end: b, times, joints }
}
