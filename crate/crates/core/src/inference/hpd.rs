//! Highest-posterior-density regions on the circle as unions of arcs.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::circ::Angle;
use crate::error::{Error, Result};

/// Arc from `lo` counter-clockwise to `hi`. When `hi < lo` the arc passes
/// through zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub lo: f64,
    pub hi: f64,
}

impl Arc {
    pub fn length(&self) -> f64 {
        if self.hi >= self.lo {
            self.hi - self.lo
        } else {
            TAU - self.lo + self.hi
        }
    }

    pub fn contains(&self, a: Angle) -> bool {
        let x = a.radians();
        if self.hi >= self.lo {
            x >= self.lo && x <= self.hi
        } else {
            x >= self.lo || x <= self.hi
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpdRegion {
    pub intervals: Vec<Arc>,
    /// Target probability.
    pub mass: f64,
    /// Histogram mass inside the arcs.
    pub covered_mass: f64,
    pub bins: usize,
}

impl HpdRegion {
    pub fn contains(&self, a: Angle) -> bool {
        self.intervals.iter().any(|arc| arc.contains(a))
    }

    /// Fraction of the circle covered.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Arc::length).sum::<f64>() / TAU
    }
}

/// Histogram HPD: bins are taken in decreasing count until `mass` is
/// reached. The last bin is cut so the covered histogram mass equals the
/// target; the cut keeps the side touching an already selected neighbour.
pub fn hpd_circular(draws: &[Angle], mass: f64, bins: usize) -> Result<HpdRegion> {
    if draws.len() < 100 {
        return Err(Error::invalid(format!("HPD needs at least 100 draws, got {}", draws.len())));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::invalid(format!("HPD mass must lie in (0, 1), got {mass}")));
    }
    if bins < 2 {
        return Err(Error::invalid("HPD needs at least two bins"));
    }
    let width = TAU / bins as f64;
    let mut counts = vec![0usize; bins];
    for a in draws {
        let b = ((a.radians() / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut order: Vec<usize> = (0..bins).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));

    let n = draws.len() as f64;
    let target = mass * n;
    let mut selected = vec![false; bins];
    let mut acc = 0.0;
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for &b in &order {
        let c = counts[b] as f64;
        if c == 0.0 {
            break;
        }
        let lo = b as f64 * width;
        if acc + c < target {
            selected[b] = true;
            pieces.push((lo, lo + width));
            acc += c;
            continue;
        }
        let frac = (target - acc) / c;
        let left = selected[(b + bins - 1) % bins];
        let right = selected[(b + 1) % bins];
        let piece = if pieces.is_empty() {
            // a single bin holds the whole target; cutting it could miss its draws
            acc = c;
            (lo, lo + width)
        } else if left && !right {
            (lo, lo + frac * width)
        } else if right && !left {
            (lo + (1.0 - frac) * width, lo + width)
        } else {
            let mid = lo + 0.5 * width;
            (mid - 0.5 * frac * width, mid + 0.5 * frac * width)
        };
        if !pieces.is_empty() {
            acc = target;
        }
        pieces.push(piece);
        break;
    }

    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let tol = 1e-9 * width;
    for (lo, hi) in pieces {
        match merged.last_mut() {
            Some(last) if lo <= last.1 + tol => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let full = merged.len() == 1 && merged[0].0 <= tol && merged[0].1 >= TAU - tol;
    let mut intervals: Vec<Arc> = merged.iter().map(|&(lo, hi)| Arc { lo, hi: hi.min(TAU) }).collect();
    if !full && intervals.len() > 1 {
        let first = intervals[0];
        let last = *intervals.last().unwrap();
        if first.lo <= tol && last.hi >= TAU - tol {
            intervals.pop();
            intervals[0] = Arc { lo: last.lo, hi: first.hi };
        }
    }
    Ok(HpdRegion {
        intervals,
        mass,
        covered_mass: acc / n,
        bins,
    })
}
