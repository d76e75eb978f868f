//! Growth-series diagnostics: partial sums of `sum_k |v_k|^{-s}`, counting
//! functions and convergence-exponent estimates.
//!
//! A finite truncation cannot decide convergence, so the verdict compares `s`
//! with the fitted counting exponent `rho_hat`:
//! `Converging` if `s >= rho_hat + 0.1`, `Diverging` if `s <= rho_hat - 0.1`.
//! In the band between the two, a series whose last two checkpoints still
//! differ by more than 1% once the last checkpoint covers more than `10^4`
//! points is called `Diverging`; otherwise the verdict is `Uncertain`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generators::{lattice_points, LatticeSpec};
use crate::point::{FieldTag, PointSet};
use crate::stats::fit_line;

/// Points with smaller norm are treated as the origin and left out of every series.
pub const ORIGIN_TOL: f64 = 1e-12;
/// Relative slack when comparing a norm against a radius.
pub const RADIUS_SLACK: f64 = 1e-12;

const EXPONENT_MARGIN: f64 = 0.1;
const PLATEAU_MIN_POINTS: usize = 10_000;
const PLATEAU_REL_CHANGE: f64 = 0.01;
const MIN_EXPONENT_POINTS: usize = 50;
const EXPONENT_GRID: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converging,
    Diverging,
    Uncertain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Number of nonzero points summed.
    pub k: usize,
    /// Norm of the `k`-th point in norm order.
    pub radius: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub s: f64,
    pub partial_sums: Vec<SeriesPoint>,
    pub tail_bound_estimate: Option<f64>,
    pub verdict: Verdict,
    pub rho_hat: Option<f64>,
    pub excluded_origin: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingFunction {
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub exponent_used: f64,
    pub diagnostics: SeriesDiagnostics,
    pub satisfied: Verdict,
}

/// Nonzero norms in ascending order, plus the number of origin points dropped.
fn sorted_nonzero_norms(ps: &PointSet) -> (Vec<f64>, usize) {
    let mut norms = ps.norms();
    let before = norms.len();
    norms.retain(|&r| r >= ORIGIN_TOL);
    let excluded = before - norms.len();
    norms.sort_by(f64::total_cmp);
    (norms, excluded)
}

/// `K = count, count/2, count/4, ...` (at most 16 values), ascending.
pub fn default_checkpoints(count: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = count;
    while k >= 1 && ks.len() < 16 {
        ks.push(k);
        k /= 2;
    }
    ks.reverse();
    ks
}

/// Partial sums `S_K` over the `K` smallest nonzero points, at each checkpoint `K`.
pub fn partial_sums(ps: &PointSet, s: f64, checkpoints: &[usize]) -> Result<SeriesDiagnostics> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("exponent s must be positive, got {s}")));
    }
    let (norms, excluded) = sorted_nonzero_norms(ps);
    let mut ks: Vec<usize> = checkpoints
        .iter()
        .map(|&k| k.min(norms.len()))
        .filter(|&k| k >= 1)
        .collect();
    ks.sort_unstable();
    ks.dedup();

    let terms: Vec<f64> = norms.iter().map(|r| r.powf(-s)).collect();
    let partial_sums: Vec<SeriesPoint> = ks
        .iter()
        .map(|&k| SeriesPoint {
            k,
            radius: norms[k - 1],
            // smallest terms first
            partial_sum: terms[..k].iter().rev().sum(),
        })
        .collect();

    let rho_hat = critical_exponent(ps).ok().map(|(r, _)| r);
    let verdict = series_verdict(s, rho_hat, &partial_sums);
    let tail_bound_estimate = match (rho_hat, partial_sums.last()) {
        (Some(rho), Some(last)) if rho < s => {
            Some(last.k as f64 * rho / (s - rho) * last.radius.powf(-s))
        }
        _ => None,
    };
    Ok(SeriesDiagnostics {
        s,
        partial_sums,
        tail_bound_estimate,
        verdict,
        rho_hat,
        excluded_origin: excluded,
    })
}

/// Partial sums with checkpoints given as radii: `K = #{k : 0 < |v_k| <= r}`.
pub fn partial_sums_at_radii(ps: &PointSet, s: f64, radii: &[f64]) -> Result<SeriesDiagnostics> {
    let (norms, _) = sorted_nonzero_norms(ps);
    let ks: Vec<usize> = radii
        .iter()
        .map(|&r| norms.partition_point(|&x| x <= r * (1.0 + RADIUS_SLACK)))
        .collect();
    partial_sums(ps, s, &ks)
}

fn series_verdict(s: f64, rho_hat: Option<f64>, sums: &[SeriesPoint]) -> Verdict {
    match rho_hat {
        Some(rho) if s >= rho + EXPONENT_MARGIN => return Verdict::Converging,
        Some(rho) if s <= rho - EXPONENT_MARGIN => return Verdict::Diverging,
        _ => {}
    }
    if let [.., prev, last] = sums {
        if last.k > PLATEAU_MIN_POINTS
            && (last.partial_sum - prev.partial_sum) > PLATEAU_REL_CHANGE * prev.partial_sum
        {
            return Verdict::Diverging;
        }
    }
    Verdict::Uncertain
}

/// Exact counts `N(r) = #{k : |v_k| <= r}`, origin included.
pub fn counting_function(ps: &PointSet, radii: &[f64]) -> Result<CountingFunction> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radii must be strictly increasing"));
    }
    let norms = ps.norms();
    let counts = radii
        .iter()
        .map(|&r| {
            let lim = r * (1.0 + RADIUS_SLACK);
            norms.iter().filter(|&&x| x <= lim).count()
        })
        .collect();
    Ok(CountingFunction {
        radii: radii.to_vec(),
        counts,
    })
}

/// Least-squares slope of `log N(r)` against `log r` over the top decade of
/// radii, with its standard error.
pub fn critical_exponent(ps: &PointSet) -> Result<(f64, f64)> {
    let mut norms = ps.norms();
    norms.sort_by(f64::total_cmp);
    let big = norms.iter().filter(|&&r| r >= 1.0).count();
    if big < MIN_EXPONENT_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_EXPONENT_POINTS} points with norm >= 1, have {big}"
        )));
    }
    let r_max = *norms.last().expect("nonempty");
    let r_min = r_max / 10.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..EXPONENT_GRID {
        let t = i as f64 / (EXPONENT_GRID - 1) as f64;
        let r = r_min * (r_max / r_min).powf(t);
        let count = norms.partition_point(|&x| x <= r * (1.0 + RADIUS_SLACK));
        if count > 0 {
            xs.push(r.ln());
            ys.push((count as f64).ln());
        }
    }
    let fit = fit_line(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData("counting function is empty on the top decade".into()))?;
    Ok((fit.slope, fit.slope_stderr))
}

/// Checks the growth hypothesis for a projection to dimension `d`: the series
/// exponent is `2d` over the complex numbers and `d` over the reals.
pub fn hypothesis_check(ps: &PointSet, d: usize) -> Result<HypothesisCheck> {
    if d == 0 || d >= ps.dim() {
        return Err(invalid(format!(
            "target dimension must satisfy 0 < d < n = {}, got {d}",
            ps.dim()
        )));
    }
    let exponent_used = match ps.field() {
        FieldTag::Complex => 2.0 * d as f64,
        FieldTag::Real => d as f64,
    };
    let (norms, _) = sorted_nonzero_norms(ps);
    let diagnostics = partial_sums(ps, exponent_used, &default_checkpoints(norms.len()))?;
    Ok(HypothesisCheck {
        exponent_used,
        satisfied: diagnostics.verdict,
        diagnostics,
    })
}

/// Partial sums of `sum |gamma|^{-(rank + epsilon)}` over a lattice truncation,
/// checkpointed at radius/8, radius/4, radius/2 and radius.
pub fn lattice_series_check(spec: &LatticeSpec, epsilon: f64) -> Result<SeriesDiagnostics> {
    if spec.rank() == 0 {
        return Err(invalid("lattice series needs rank at least 1"));
    }
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon must be nonnegative"));
    }
    let ps = lattice_points(spec)?;
    let radii: Vec<f64> = [8.0, 4.0, 2.0, 1.0].iter().map(|f| spec.radius / f).collect();
    partial_sums_at_radii(&ps, spec.rank() as f64 + epsilon, &radii)
}
