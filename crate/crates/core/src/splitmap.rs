//! The coordinate-splitting map on `C^n = C x C^{n-1}`:
//! `(a, b) -> (a, 0)` if `|a| > |b|`, else `(0, b)`.
//!
//! Each point moves by at most `|v| / sqrt(2)`, and each image lies within
//! `|w|` of its preimage. The images project discretely onto both factors
//! whenever the source set is discrete.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::generators::PairedPointSet;
use crate::point::{distance, norm_slice, DedupIndex, FieldTag, DEDUP_TOL, PointSet, Vector};
use crate::projector::{separation_report, Projection, SeparationReport};
use crate::sampling::GroupElement;

pub const FORWARD_BOUND: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub const BACKWARD_BOUND: f64 = 1.0;
const BOUND_TOL: f64 = 1e-12;
const MAX_SHIFTS: usize = 100;

/// A target that collided with an earlier one and was rescaled along its
/// nonzero factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAdjustment {
    pub source_index: usize,
    pub unadjusted: Vec<f64>,
    pub shift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitRecord {
    pub pairing: PairedPointSet,
    pub max_forward_ratio: f64,
    pub max_backward_ratio: f64,
    pub adjustments: Vec<SplitAdjustment>,
}

fn split_coords(c: &[f64]) -> Vec<f64> {
    let a = norm_slice(&c[..2]);
    let b = norm_slice(&c[2..]);
    let mut out = vec![0.0; c.len()];
    if a > b {
        out[..2].copy_from_slice(&c[..2]);
    } else {
        out[2..].copy_from_slice(&c[2..]);
    }
    out
}

fn ratios(pairs: impl Iterator<Item = (usize, usize, f64, f64, f64)>) -> (f64, f64) {
    let mut fwd: f64 = 0.0;
    let mut bwd: f64 = 0.0;
    for (_, _, dist, nv, nw) in pairs {
        if nv > 0.0 {
            fwd = fwd.max(dist / nv);
        }
        if nw > 0.0 {
            bwd = bwd.max(dist / nw);
        }
    }
    (fwd, bwd)
}

fn pair_metrics(p: &PairedPointSet) -> impl Iterator<Item = (usize, usize, f64, f64, f64)> + '_ {
    p.source.points().iter().enumerate().map(move |(i, v)| {
        let t = p.pairing[i];
        let w = &p.target.points()[t];
        (i, t, distance(v.coords(), w.coords()), v.norm(), w.norm())
    })
}

/// Applies the splitting map to every point. Colliding targets are pushed
/// apart by the smallest rescaling that clears the duplicate tolerance.
pub fn alpha_split(ps: &PointSet) -> Result<SplitRecord> {
    if ps.field() != FieldTag::Complex || ps.dim() < 2 {
        return Err(invalid("the splitting map needs a complex point set with n >= 2"));
    }
    let n = ps.dim();
    let mut targets: Vec<Vec<f64>> = Vec::with_capacity(ps.len());
    let mut index = DedupIndex::new();
    let mut adjustments = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, v) in ps.points().iter().enumerate() {
        let exact = split_coords(v.coords());
        let repeats = seen.entry(exact.iter().map(|x| x.to_bits()).collect()).or_insert(0);
        let mut attempt = *repeats;
        *repeats += 1;
        let f = norm_slice(&exact);
        let step = (2.0 * DEDUP_TOL).max(8.0 * f64::EPSILON * f);
        let shifted = |attempt: usize| -> Vec<f64> {
            if attempt == 0 {
                return exact.clone();
            }
            let scale = 1.0 + step * attempt as f64 / f;
            exact.iter().map(|x| x * scale).collect()
        };
        let first_attempt = attempt;
        let mut w = shifted(attempt);
        while index.find(&w, |j| &targets[j]).is_some() {
            attempt += 1;
            if attempt > first_attempt + MAX_SHIFTS {
                return Err(invalid(format!("could not separate image of point {i}")));
            }
            w = shifted(attempt);
        }
        let shift = step * attempt as f64;
        if attempt > 0 {
            adjustments.push(SplitAdjustment {
                source_index: i,
                unadjusted: exact,
                shift,
            });
        }
        index.insert(&w, i);
        targets.push(w);
    }
    let points = targets
        .into_iter()
        .map(|c| Vector::new(FieldTag::Complex, n, c))
        .collect::<Result<Vec<_>>>()?;
    let target = PointSet::new_unchecked_distinct(
        FieldTag::Complex,
        n,
        points,
        format!("split({})", ps.provenance()),
        ps.truncation_radius(),
    )?;
    let pairing = PairedPointSet::new(ps.clone(), target, (0..ps.len()).collect())?;
    let (max_forward_ratio, max_backward_ratio) = ratios(pair_metrics(&pairing));
    Ok(SplitRecord {
        pairing,
        max_forward_ratio,
        max_backward_ratio,
        adjustments,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundWitness {
    pub source_index: usize,
    pub target_index: usize,
    pub kind: BoundKind,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitVerification {
    pub forward_ok: bool,
    pub backward_ok: bool,
    pub max_forward_ratio: f64,
    pub max_backward_ratio: f64,
    pub witnesses: Vec<BoundWitness>,
}

/// Recomputes both displacement ratios from the pairing and lists every pair
/// that violates a bound.
pub fn verify_split_bounds(sr: &SplitRecord) -> SplitVerification {
    let mut witnesses = Vec::new();
    for (i, t, dist, nv, nw) in pair_metrics(&sr.pairing) {
        if nv > 0.0 && dist / nv > FORWARD_BOUND + BOUND_TOL {
            witnesses.push(BoundWitness {
                source_index: i,
                target_index: t,
                kind: BoundKind::Forward,
                ratio: dist / nv,
            });
        }
        if nw > 0.0 && dist / nw > BACKWARD_BOUND + BOUND_TOL {
            witnesses.push(BoundWitness {
                source_index: i,
                target_index: t,
                kind: BoundKind::Backward,
                ratio: dist / nw,
            });
        }
    }
    let (max_forward_ratio, max_backward_ratio) = ratios(pair_metrics(&sr.pairing));
    SplitVerification {
        forward_ok: witnesses.iter().all(|w| w.kind != BoundKind::Forward),
        backward_ok: witnesses.iter().all(|w| w.kind != BoundKind::Backward),
        max_forward_ratio,
        max_backward_ratio,
        witnesses,
    }
}

/// Separation reports for the projections of the split image onto the first
/// factor (`d = 1`) and onto the remaining `n - 1` coordinates. Adjusted
/// targets are projected from their unadjusted positions.
pub fn split_projections_discrete(
    sr: &SplitRecord,
    schedule: &[f64],
    window_radius: Option<f64>,
) -> Result<(SeparationReport, SeparationReport)> {
    let target = &sr.pairing.target;
    let n = target.dim();
    let mut points = target.points().to_vec();
    for adj in &sr.adjustments {
        let t = sr.pairing.pairing[adj.source_index];
        points[t] = Vector::new(FieldTag::Complex, n, adj.unadjusted.clone())?;
    }
    let exact = PointSet::new_unchecked_distinct(FieldTag::Complex, n, points, target.provenance(), None)?;

    let first = Projection::new(GroupElement::identity(FieldTag::Complex, n), 1)?;
    let perm: Vec<usize> = (1..n).chain(std::iter::once(0)).collect();
    let second = Projection::new(GroupElement::permutation(FieldTag::Complex, &perm)?, n - 1)?;
    Ok((
        separation_report(&first, &exact, schedule, window_radius)?,
        separation_report(&second, &exact, schedule, window_radius)?,
    ))
}
