//! Continuation of a solution past the horizon, where only the delayed
//! differential law remains, with blow-up detection and the Grönwall a-priori
//! bound.

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::EvolutionCache;
use crate::model::{trajectory_norm, History, Side, SystemSpec, Trajectory};

/// Norm past which the state counts as escaped.
pub const ESCAPE_NORM: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Extension {
    /// The input on `[-r, τ]` followed by the computed continuation, up to
    /// `T` or to the escape time.
    pub trajectory: Trajectory,
    /// Time of the last accepted node when the state escaped.
    pub escape: Option<f64>,
}

/// Marches `z' = A(t) z + f(t, z_t)` from `τ` to `t_end` with RK4 on a
/// uniform step close to the grid step of `z`.
///
/// Stages read the history from the trajectory built so far; inside the
/// current step it is the straight line from the last node to the stage
/// state. A step is refused, and escape reported, when the state or the
/// slope is not finite, the norm exceeds [`ESCAPE_NORM`], or the first
/// slope would move the state by more than `1 + ‖z_n‖` in one step.
pub fn extend_solution(spec: &SystemSpec, z: &Trajectory, t_end: f64) -> Result<Extension> {
    let grid = z.grid();
    let tau = grid.end();
    if !(t_end > tau) {
        return Err(Error::Domain(format!("extension end {t_end} must exceed the current end {tau}")));
    }
    let n = z.n();
    let steps = ((t_end - tau) / grid.step() - 1e-9).ceil().max(1.0) as usize;
    let h = (t_end - tau) / steps as f64;

    let mut times = vec![tau];
    let mut vals: Vec<f64> = z.eval(tau, Side::Left)?.iter().copied().collect();
    let mut escape = None;

    for step in 0..steps {
        let t0 = tau + step as f64 * h;
        let t1 = if step + 1 == steps { t_end } else { tau + (step + 1) as f64 * h };
        let y0 = DVector::from_column_slice(&vals[step * n..]);
        match rk4_step(spec, z, &times, &vals, t0, t1, &y0) {
            Some(y1) => {
                times.push(t1);
                vals.extend(y1.iter());
            }
            None => {
                escape = Some(t0);
                log::info!("escape detected at t = {t0}");
                break;
            }
        }
    }

    if times.len() == 1 {
        // escape on the very first step: keep a zero-length continuation out
        // of the grid
        return Ok(Extension { trajectory: z.clone(), escape });
    }
    let ext_grid = Arc::new(grid.with_continuation(times));
    let mut values = z.clone().into_segment_values();
    values.push(vals);
    let trajectory = Trajectory::from_segment_values(ext_grid, n, values)?;
    Ok(Extension { trajectory, escape })
}

fn rk4_step(
    spec: &SystemSpec,
    z: &Trajectory,
    times: &[f64],
    vals: &[f64],
    t0: f64,
    t1: f64,
    y0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = y0.len();
    let h = t1 - t0;
    let tau = times[0];
    let r = spec.partition.r;
    let slope = |t: f64, y: &DVector<f64>| -> Option<DVector<f64>> {
        let reader = |a: f64, i: usize| -> f64 {
            if a <= tau {
                z.component(a, Side::Left, i)
            } else if a <= t0 {
                let k = times.partition_point(|&x| x < a);
                if times[k] == a {
                    return vals[k * n + i];
                }
                let w = (a - times[k - 1]) / (times[k] - times[k - 1]);
                (1.0 - w) * vals[(k - 1) * n + i] + w * vals[k * n + i]
            } else if t > t0 {
                let w = ((a - t0) / (t - t0)).min(1.0);
                (1.0 - w) * y0[i] + w * y[i]
            } else {
                y0[i]
            }
        };
        let hist = History::from_reader(&reader, t, r, n);
        let a = spec.eval_matrix(t).ok()?;
        let f = spec.eval_drift(t, &hist).ok()?;
        let k = a * y + f;
        k.iter().all(|x| x.is_finite()).then_some(k)
    };

    let k1 = slope(t0, y0)?;
    if h * k1.norm() > 1.0 + y0.norm() {
        return None;
    }
    let k2 = slope(t0 + 0.5 * h, &(y0 + &k1 * (0.5 * h)))?;
    let k3 = slope(t0 + 0.5 * h, &(y0 + &k2 * (0.5 * h)))?;
    let k4 = slope(t1, &(y0 + &k3 * h))?;
    let y1 = y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let norm = y1.norm();
    (norm.is_finite() && norm <= ESCAPE_NORM).then_some(y1)
}

/// `M (L ‖z(s_N)‖ + ∫h) exp(M ∫h)`.
pub fn gronwall_formula(m: f64, l: f64, z_norm: f64, integral_h: f64) -> f64 {
    m * (l * z_norm + integral_h) * (m * integral_h).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallBound {
    pub start: f64,
    pub end: f64,
    /// `sup ‖U(t, s)‖` over `start ≤ s ≤ t ≤ end`, with the safety factor.
    pub m: f64,
    pub l: f64,
    pub z_norm: f64,
    pub integral_h: f64,
    pub bound: f64,
}

/// The a-priori bound on `(start, end]`, with `start = s_N` (0 without
/// impulses) and `l` the jump gain at `start`. `M` is recomputed on
/// `[start, end]` and the integral of `h` uses the trapezoid rule on the
/// same nodes.
pub fn gronwall_bound<H>(spec: &SystemSpec, z: &Trajectory, end: f64, l: f64, h: H) -> Result<GronwallBound>
where
    H: Fn(f64) -> Result<f64>,
{
    let start = spec.partition.last_release();
    if !(end > start) {
        return Err(Error::Domain(format!("bound interval ({start}, {end}] is empty")));
    }
    let steps = ((end - start) / z.grid().step()).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|k| start + (end - start) * k as f64 / steps as f64).collect();
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &t in &times {
        let v = h(t)?;
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("growth majorant h({t}) = {v} is negative")));
        }
        if let Some((tp, vp)) = prev {
            integral += 0.5 * (t - tp) * (v + vp);
        }
        prev = Some((t, v));
    }
    let m = EvolutionCache::from_times(spec.n, times, |t| spec.eval_matrix(t))?.norm_bound();
    let z_norm = z.eval(start, Side::Left)?.norm();
    let bound = gronwall_formula(m, l, z_norm, integral);
    Ok(GronwallBound { start, end, m, l, z_norm, integral_h: integral, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCheck {
    pub escaped: bool,
    pub first_hit: Option<f64>,
}

/// First node (in time order) whose norm reaches `radius`.
pub fn boundary_alternative_check(z: &Trajectory, radius: f64) -> BoundaryCheck {
    let first_hit = z.nodes().find(|(_, _, _, v)| trajectory_norm(v) >= radius).map(|(_, _, t, _)| t);
    BoundaryCheck { escaped: first_hit.is_some(), first_hit }
}
