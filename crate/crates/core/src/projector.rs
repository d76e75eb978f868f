//! Random projections `pi_g(v) = L(g v)` with `g` Haar-distributed and `L`
//! the first-`d`-coordinates map, plus the finite-truncation diagnostics used
//! to judge whether a projected sequence looks discrete.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::growth::RADIUS_SLACK;
use crate::point::{min_gap_grid, norm_slice, FieldTag, PointSet, Vector};
use crate::rng::RngStream;
use crate::sampling::{cap_measure_exact, chunked_hits, haar, CapEstimate, GroupElement};

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    g: GroupElement,
    d: usize,
}

impl Projection {
    /// `0 < d <= n`; `d == n` is the full isometry `g` itself.
    pub fn new(g: GroupElement, d: usize) -> Result<Self> {
        if d == 0 || d > g.dim() {
            return Err(invalid(format!(
                "target dimension must satisfy 0 < d <= n = {}, got {d}",
                g.dim()
            )));
        }
        Ok(Self { g, d })
    }

    pub fn field(&self) -> FieldTag {
        self.g.field()
    }

    pub fn source_dim(&self) -> usize {
        self.g.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.d
    }

    pub fn group_element(&self) -> &GroupElement {
        &self.g
    }

    fn project_coords(&self, coords: &[f64], field: FieldTag) -> Vec<f64> {
        self.g.apply_rows(coords, field, self.d)
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        self.check_dims(v.field(), v.dim())?;
        Vector::new(v.field(), self.d, self.project_coords(v.coords(), v.field()))
    }

    fn check_dims(&self, field: FieldTag, n: usize) -> Result<()> {
        if n != self.g.dim() {
            return Err(invalid(format!(
                "dimension mismatch: projection expects n = {}, got {n}",
                self.g.dim()
            )));
        }
        if field == FieldTag::Complex && self.g.field() == FieldTag::Real {
            // an orthogonal matrix is also unitary, so this is allowed
            return Ok(());
        }
        if field == FieldTag::Real && self.g.field() == FieldTag::Complex {
            return Err(invalid("a unitary projection cannot act on a real point set"));
        }
        Ok(())
    }
}

/// Projects every point of `ps`. The image may contain coincident points.
pub fn apply_projection(p: &Projection, ps: &PointSet) -> Result<PointSet> {
    p.check_dims(ps.field(), ps.dim())?;
    let points = ps
        .points()
        .iter()
        .map(|v| Vector::new(ps.field(), p.d, p.project_coords(v.coords(), ps.field())))
        .collect::<Result<Vec<_>>>()?;
    PointSet::new_unchecked_distinct(
        ps.field(),
        p.d,
        points,
        format!("project(d={}; {})", p.d, ps.provenance()),
        None,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Discreteness {
    DiscreteLooking,
    DenseLooking,
    Inconclusive,
}

impl std::fmt::Display for Discreteness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Discreteness::DiscreteLooking => "DiscreteLooking",
            Discreteness::DenseLooking => "DenseLooking",
            Discreteness::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub truncation_radii: Vec<f64>,
    pub window_radius: f64,
    pub min_gaps: Vec<Option<f64>>,
    pub crowding_counts: Vec<usize>,
    pub verdict: Discreteness,
    pub reason: Option<String>,
}

impl SeparationReport {
    /// Min gap at the largest truncation.
    pub fn score(&self) -> Option<f64> {
        self.min_gaps.last().copied().flatten()
    }
}

/// Discreteness verdict from a sequence of window min-gaps over growing
/// truncations: steady gaps look discrete, geometrically shrinking gaps look
/// dense.
pub fn discreteness_verdict(min_gaps: &[Option<f64>]) -> (Discreteness, Option<String>) {
    let Some(first_idx) = min_gaps.iter().position(Option::is_some) else {
        return (
            Discreteness::Inconclusive,
            Some("fewer than two distinct points in the window at every truncation".into()),
        );
    };
    let last_idx = min_gaps.len() - 1;
    if first_idx == last_idx {
        return (
            Discreteness::Inconclusive,
            Some("only the largest truncation has a gap".into()),
        );
    }
    let first = min_gaps[first_idx].expect("present");
    let last = min_gaps[last_idx].expect("gaps never disappear once present");
    let steps = (last_idx - first_idx) as f64;
    if last >= 0.5 * first {
        (Discreteness::DiscreteLooking, None)
    } else if last <= first * 2f64.powf(-steps / 2.0) {
        (Discreteness::DenseLooking, None)
    } else {
        (
            Discreteness::Inconclusive,
            Some(format!("gap ratio {:.6} between thresholds", last / first)),
        )
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Projected points sorted by source norm, ready for truncation sweeps.
struct ProjectedSweep {
    source_norms: Vec<f64>,
    coords: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl ProjectedSweep {
    fn build(p: &Projection, ps: &PointSet, max_radius: f64) -> Self {
        let lim = max_radius * (1.0 + RADIUS_SLACK);
        let mut order: Vec<(f64, usize)> = ps
            .points()
            .iter()
            .enumerate()
            .map(|(i, v)| (v.norm(), i))
            .filter(|(r, _)| *r <= lim)
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let coords: Vec<Vec<f64>> = order
            .iter()
            .map(|&(_, i)| p.project_coords(ps.points()[i].coords(), ps.field()))
            .collect();
        let norms = coords.iter().map(|c| norm_slice(c)).collect();
        Self {
            source_norms: order.into_iter().map(|(r, _)| r).collect(),
            coords,
            norms,
        }
    }

    fn prefix_len(&self, radius: f64) -> usize {
        let lim = radius * (1.0 + RADIUS_SLACK);
        self.source_norms.partition_point(|&r| r <= lim)
    }
}

/// Sweeps the truncation schedule, recording window min-gaps and crowding
/// counts of the projected image. With `window_radius = None` the window is
/// the median projected norm of the first truncation.
pub fn separation_report(
    p: &Projection,
    ps: &PointSet,
    schedule: &[f64],
    window_radius: Option<f64>,
) -> Result<SeparationReport> {
    p.check_dims(ps.field(), ps.dim())?;
    validate_schedule(schedule)?;
    if let Some(w) = window_radius {
        if !(w > 0.0) {
            return Err(invalid("window radius must be positive"));
        }
    }
    let sweep = ProjectedSweep::build(p, ps, *schedule.last().expect("nonempty"));
    Ok(sweep_report(&sweep, schedule, window_radius))
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < 3 {
        return Err(invalid("truncation schedule needs at least 3 radii"));
    }
    if schedule.iter().any(|r| !(*r > 0.0)) || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("truncation schedule must be positive and strictly increasing"));
    }
    Ok(())
}

fn sweep_report(sweep: &ProjectedSweep, schedule: &[f64], window_radius: Option<f64>) -> SeparationReport {
    let first_len = sweep.prefix_len(schedule[0]);
    let window = match window_radius {
        Some(w) => w,
        None if first_len == 0 => {
            return SeparationReport {
                truncation_radii: schedule.to_vec(),
                window_radius: f64::NAN,
                min_gaps: vec![None; schedule.len()],
                crowding_counts: vec![0; schedule.len()],
                verdict: Discreteness::Inconclusive,
                reason: Some("first truncation is empty".into()),
            };
        }
        None => median(&mut sweep.norms[..first_len].to_vec()),
    };

    let mut min_gaps = Vec::with_capacity(schedule.len());
    let mut crowding_counts = Vec::with_capacity(schedule.len());
    for &r in schedule {
        let len = sweep.prefix_len(r);
        let pts: Vec<&[f64]> = (0..len)
            .filter(|&i| sweep.norms[i] <= window)
            .map(|i| sweep.coords[i].as_slice())
            .collect();
        crowding_counts.push(pts.len());
        min_gaps.push(min_gap_grid(&pts));
    }
    let (verdict, mut reason) = discreteness_verdict(&min_gaps);
    if sweep.source_norms.is_empty() {
        reason = Some("empty truncation".into());
    }
    SeparationReport {
        truncation_radii: schedule.to_vec(),
        window_radius: window,
        min_gaps,
        crowding_counts,
        verdict,
        reason,
    }
}

/// Schedule `R/8, R/4, R/2, R` with `R` the largest norm in `ps`.
pub fn default_schedule(ps: &PointSet) -> Vec<f64> {
    let r = ps.norms().into_iter().fold(0.0, f64::max);
    [8.0, 4.0, 2.0, 1.0].iter().map(|f| r / f).collect()
}

fn cap_dims(field: FieldTag, n: usize, d: usize) -> (usize, usize) {
    match field {
        FieldTag::Complex => (2 * d, 2 * (n - d)),
        FieldTag::Real => (d, n - d),
    }
}

fn check_target_dim(n: usize, d: usize) -> Result<()> {
    if d == 0 || d >= n {
        return Err(invalid(format!("target dimension must satisfy 0 < d < n = {n}, got {d}")));
    }
    Ok(())
}

/// Exact Haar probability that `|pi_g(v)| <= r`.
pub fn skr_probability_exact(v: &Vector, r: f64, d: usize) -> Result<f64> {
    check_target_dim(v.dim(), d)?;
    let norm = v.norm();
    if norm <= r {
        return Ok(1.0);
    }
    let (k, m) = cap_dims(v.field(), v.dim(), d);
    cap_measure_exact(k, m, r / norm)
}

/// Monte Carlo estimate of `mu(S_{k,r}) = P_g(|pi_g(v)| <= r)` over Haar `g`.
pub fn skr_probability_mc(
    v: &Vector,
    r: f64,
    d: usize,
    trials: u64,
    rng: &mut RngStream,
) -> Result<CapEstimate> {
    check_target_dim(v.dim(), d)?;
    if !(r > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let (k, m) = cap_dims(v.field(), v.dim(), d);
    let norm = v.norm();
    if norm <= r {
        return Ok(CapEstimate {
            k,
            m,
            epsilon: 1.0,
            mc_estimate: 1.0,
            mc_stderr: 0.0,
            exact_value: 1.0,
            samples: 0,
        });
    }
    let exact = cap_measure_exact(k, m, r / norm)?;
    let base = rng.split();
    let (field, n) = (v.field(), v.dim());
    let hits = chunked_hits(trials, &base, |rng| {
        let g = haar(field, n, rng).expect("n >= 1");
        norm_slice(&g.apply_rows(v.coords(), field, d)) <= r
    });
    Ok(CapEstimate::from_hits(k, m, r / norm, hits, trials, exact))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingInequality {
    pub threshold: usize,
    pub radius: f64,
    pub trials: u64,
    /// `N * mu(M_{N,r})` estimated by Monte Carlo.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `sum_k mu(S_{k,r})` from exact cap values.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `N mu(M_{N,r}) <= sum_k mu(S_{k,r})` on a finite point set, where
/// `M_{N,r}` is the set of `g` for which at least `N` projected points lie in
/// the ball of radius `r`.
pub fn counting_inequality_experiment(
    ps: &PointSet,
    d: usize,
    r: f64,
    threshold: usize,
    trials: u64,
    rng: &mut RngStream,
) -> Result<CountingInequality> {
    check_target_dim(ps.dim(), d)?;
    if trials < 1000 {
        return Err(invalid("counting inequality needs at least 1000 trials"));
    }
    if threshold == 0 || !(r > 0.0) {
        return Err(invalid("threshold and radius must be positive"));
    }
    let rhs: f64 = ps
        .points()
        .iter()
        .map(|v| skr_probability_exact(v, r, d))
        .sum::<Result<f64>>()?;

    let (field, n) = (ps.field(), ps.dim());
    let base = rng.split();
    let hits = chunked_hits(trials, &base, |rng| {
        let g = haar(field, n, rng).expect("n >= 1");
        let mut inside = 0usize;
        for v in ps.points() {
            if norm_slice(&g.apply_rows(v.coords(), field, d)) <= r {
                inside += 1;
                if inside >= threshold {
                    return true;
                }
            }
        }
        false
    });
    let p = hits as f64 / trials as f64;
    let big_n = threshold as f64;
    let lhs = big_n * p;
    let lhs_stderr = big_n * (p * (1.0 - p) / trials as f64).sqrt();
    Ok(CountingInequality {
        threshold,
        radius: r,
        trials,
        lhs,
        lhs_stderr,
        rhs,
        holds: lhs <= rhs + 5.0 * lhs_stderr,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub index: usize,
    pub projection: Projection,
    pub report: SeparationReport,
}

impl TrialOutcome {
    pub fn score(&self) -> Option<f64> {
        self.report.score()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub best_index: usize,
    pub trials: Vec<TrialOutcome>,
}

impl SearchResult {
    pub fn best(&self) -> &TrialOutcome {
        &self.trials[self.best_index]
    }

    pub fn all_scores(&self) -> Vec<Option<f64>> {
        self.trials.iter().map(TrialOutcome::score).collect()
    }
}

/// Ranking key: gap at the largest truncation, then at the next smaller one.
/// Absent gaps rank below every present gap.
fn rank_key(report: &SeparationReport) -> (f64, f64) {
    let at = |i: usize| -> f64 {
        report
            .min_gaps
            .len()
            .checked_sub(i)
            .and_then(|j| report.min_gaps[j])
            .unwrap_or(f64::NEG_INFINITY)
    };
    (at(1), at(2))
}

/// Draws `trials` Haar projections and keeps the one whose image is best
/// separated at the largest truncation. Trial `i` draws from sub-stream `i`,
/// so the outcome does not depend on the thread count.
pub fn projection_search(
    ps: &PointSet,
    d: usize,
    trials: usize,
    schedule: &[f64],
    window_radius: Option<f64>,
    rng: &mut RngStream,
) -> Result<SearchResult> {
    check_target_dim(ps.dim(), d)?;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    validate_schedule(schedule)?;
    let base = rng.split();
    let field = ps.field();
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<TrialOutcome> {
            let mut sub = base.substream(i as u64);
            let projection = Projection::new(haar(field, ps.dim(), &mut sub)?, d)?;
            let report = separation_report(&projection, ps, schedule, window_radius)?;
            Ok(TrialOutcome {
                index: i,
                projection,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if outcomes.iter().all(|o| o.score().is_none()) {
        return Err(Error::NoViableProjection {
            trials,
            reports: outcomes.into_iter().map(|o| o.report).collect(),
        });
    }
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate().skip(1) {
        let (a, b) = rank_key(&o.report);
        let (x, y) = rank_key(&outcomes[best].report);
        if a > x || (a == x && b > y) {
            best = i;
        }
    }
    Ok(SearchResult {
        best_index: best,
        trials: outcomes,
    })
}
