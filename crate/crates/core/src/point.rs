//! Field-tagged vectors, finite point sets and pairwise-gap queries.
//!
//! Complex vectors are stored as interleaved `(re, im)` pairs, so a vector in
//! `C^n` and its realification in `R^{2n}` share one coordinate buffer. All
//! norms are Euclidean (Hermitian on `C^n`).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Two points closer than this are the same point.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldTag {
    Real,
    Complex,
}

impl FieldTag {
    /// Number of real coordinates per field coordinate.
    pub fn real_factor(self) -> usize {
        match self {
            FieldTag::Real => 1,
            FieldTag::Complex => 2,
        }
    }

    pub fn real_len(self, n: usize) -> usize {
        n * self.real_factor()
    }
}

impl fmt::Display for FieldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldTag::Real => f.write_str("real"),
            FieldTag::Complex => f.write_str("complex"),
        }
    }
}

impl std::str::FromStr for FieldTag {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(FieldTag::Real),
            "complex" => Ok(FieldTag::Complex),
            other => Err(invalid(format!("unknown field `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    field: FieldTag,
    n: usize,
    coords: Vec<f64>,
}

impl Vector {
    pub fn new(field: FieldTag, n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("vector dimension must be positive"));
        }
        if coords.len() != field.real_len(n) {
            return Err(invalid(format!(
                "{field} vector of dimension {n} needs {} real coordinates, got {}",
                field.real_len(n),
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("coordinate {i} is not finite")));
        }
        Ok(Self { field, n, coords })
    }

    pub fn zeros(field: FieldTag, n: usize) -> Self {
        Self {
            field,
            n,
            coords: vec![0.0; field.real_len(n)],
        }
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        norm_slice(&self.coords)
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum()
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector {
            field: self.field,
            n: self.n,
            coords: self.coords.iter().map(|x| c * x).collect(),
        }
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        distance(&self.coords, &other.coords)
    }
}

/// Euclidean (Hermitian) norm.
pub fn norm(v: &Vector) -> f64 {
    v.norm()
}

/// Views a complex vector as a real vector with twice the dimension.
pub fn realify(v: &Vector) -> Result<Vector> {
    match v.field {
        FieldTag::Complex => Ok(Vector {
            field: FieldTag::Real,
            n: 2 * v.n,
            coords: v.coords.clone(),
        }),
        FieldTag::Real => Err(invalid("realify expects a complex vector")),
    }
}

pub(crate) fn norm_slice(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A finite truncation of a discrete sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    field: FieldTag,
    n: usize,
    points: Vec<Vector>,
    provenance: String,
    truncation_radius: Option<f64>,
}

impl PointSet {
    /// Builds a point set, rejecting mixed dimensions and near-duplicates.
    pub fn new(
        field: FieldTag,
        n: usize,
        points: Vec<Vector>,
        provenance: impl Into<String>,
        truncation_radius: Option<f64>,
    ) -> Result<Self> {
        let ps = Self::new_unchecked_distinct(field, n, points, provenance, truncation_radius)?;
        let mut index = DedupIndex::new();
        for (i, p) in ps.points.iter().enumerate() {
            if let Some(j) = index.find(p.coords(), |j| ps.points[j].coords()) {
                return Err(invalid(format!(
                    "points {j} and {i} coincide within {DEDUP_TOL:e}"
                )));
            }
            index.insert(p.coords(), i);
        }
        Ok(ps)
    }

    /// Builds a point set without the distinctness check. Projected images
    /// may legitimately contain coincident points.
    pub fn new_unchecked_distinct(
        field: FieldTag,
        n: usize,
        points: Vec<Vector>,
        provenance: impl Into<String>,
        truncation_radius: Option<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("point set dimension must be positive"));
        }
        if let Some(r) = truncation_radius {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(invalid("truncation radius must be a nonnegative finite number"));
            }
        }
        for (i, p) in points.iter().enumerate() {
            if p.field != field || p.n != n {
                return Err(invalid(format!(
                    "point {i} is a {} vector of dimension {}, expected {field} of dimension {n}",
                    p.field, p.n
                )));
            }
        }
        Ok(Self {
            field,
            n,
            points,
            provenance: provenance.into(),
            truncation_radius,
        })
    }

    pub fn empty(field: FieldTag, n: usize, provenance: impl Into<String>) -> Self {
        Self {
            field,
            n,
            points: Vec::new(),
            provenance: provenance.into(),
            truncation_radius: None,
        }
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vector> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn truncation_radius(&self) -> Option<f64> {
        self.truncation_radius
    }

    pub fn norms(&self) -> Vec<f64> {
        self.points.iter().map(Vector::norm).collect()
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// Views every point as a real vector; norms are unchanged.
    pub fn realify(&self) -> Result<PointSet> {
        let points = self.points.iter().map(realify).collect::<Result<Vec<_>>>()?;
        Ok(PointSet {
            field: FieldTag::Real,
            n: 2 * self.n,
            points,
            provenance: format!("realify({})", self.provenance),
            truncation_radius: self.truncation_radius,
        })
    }
}

fn window_points(ps: &PointSet, window_radius: f64) -> Vec<&[f64]> {
    ps.points
        .iter()
        .filter(|p| p.norm() <= window_radius)
        .map(|p| p.coords())
        .collect()
}

/// Minimum distance between distinct points of `ps` lying in the closed ball
/// of radius `window_radius`. `None` when fewer than two distinct points lie
/// in the window. Exact O(N²) scan.
pub fn min_pairwise_gap(ps: &PointSet, window_radius: f64) -> Result<Option<f64>> {
    if !(window_radius > 0.0) {
        return Err(invalid("window radius must be positive"));
    }
    Ok(min_gap_brute(&window_points(ps, window_radius)))
}

/// Same result as [`min_pairwise_gap`], computed with a uniform grid.
pub fn min_pairwise_gap_grid(ps: &PointSet, window_radius: f64) -> Result<Option<f64>> {
    if !(window_radius > 0.0) {
        return Err(invalid("window radius must be positive"));
    }
    Ok(min_gap_grid(&window_points(ps, window_radius)))
}

pub(crate) fn min_gap_brute(pts: &[&[f64]]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = distance(pts[i], pts[j]);
            if d > DEDUP_TOL && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
        }
    }
    best
}

const GRID_BRUTE_CUTOFF: usize = 48;

/// Grid-bucketed exact minimum gap. A pair closer than the cell size always
/// lies in the same or adjacent cells, so a candidate below the cell size is
/// the true minimum; otherwise the cells are coarsened and the scan repeated.
pub(crate) fn min_gap_grid(pts: &[&[f64]]) -> Option<f64> {
    if pts.len() <= GRID_BRUTE_CUTOFF {
        return min_gap_brute(pts);
    }
    // collapse coincident points so heavy multiplicities stay linear
    let mut index = DedupIndex::new();
    let mut reps: Vec<&[f64]> = Vec::with_capacity(pts.len());
    for &p in pts {
        if index.find(p, |j| reps[j]).is_none() {
            index.insert(p, reps.len());
            reps.push(p);
        }
    }
    if reps.len() < pts.len() {
        return min_gap_grid(&reps);
    }
    let dim = pts[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in pts {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| h - l)
        .fold(0.0f64, f64::max);
    if extent <= DEDUP_TOL {
        return None;
    }
    let active: Vec<usize> = (0..dim).filter(|&k| hi[k] - lo[k] > 0.0).collect();
    let mut cell = 2.0 * extent / (pts.len() as f64).powf(1.0 / active.len() as f64);
    let offsets = half_neighbourhood(active.len());

    loop {
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::with_capacity(pts.len());
        for (i, p) in pts.iter().enumerate() {
            let key: Vec<i64> = active
                .iter()
                .map(|&k| ((p[k] - lo[k]) / cell).floor() as i64)
                .collect();
            cells.entry(key).or_default().push(i);
        }

        let mut best: Option<f64> = None;
        let mut consider = |d: f64| {
            if d > DEDUP_TOL && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
        };
        let mut probe = Vec::with_capacity(active.len());
        for (key, members) in &cells {
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    consider(distance(pts[i], pts[j]));
                }
            }
            for off in &offsets {
                probe.clear();
                probe.extend(key.iter().zip(off).map(|(k, o)| k + o));
                if let Some(others) = cells.get(&probe) {
                    for &i in members {
                        for &j in others {
                            consider(distance(pts[i], pts[j]));
                        }
                    }
                }
            }
        }

        if cell >= extent {
            return best;
        }
        if let Some(b) = best {
            if b < cell * (1.0 - 1e-9) {
                return Some(b);
            }
        }
        cell *= 4.0;
    }
}

/// Offsets in {-1,0,1}^dim that are lexicographically positive.
fn half_neighbourhood(dim: usize) -> Vec<Vec<i64>> {
    let total = 3usize.pow(dim as u32);
    let mut out = Vec::with_capacity(total / 2);
    for code in 0..total {
        let mut c = code;
        let mut off = vec![0i64; dim];
        for slot in off.iter_mut().rev() {
            *slot = (c % 3) as i64 - 1;
            c /= 3;
        }
        if off.iter().find(|&&o| o != 0).is_some_and(|&o| o > 0) {
            out.push(off);
        }
    }
    out
}

const DEDUP_CELL: f64 = 1.0 / 65536.0;
const DEDUP_OFFSET: f64 = 0.381_966_011_250_105_1;

/// Hash index answering "is there a stored point within [`DEDUP_TOL`]?".
///
/// Cells are much larger than the tolerance, so a near-duplicate sits in the
/// same cell except along coordinates close to a cell boundary; only those
/// coordinates are probed on both sides.
#[derive(Default)]
pub(crate) struct DedupIndex {
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl DedupIndex {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    fn key_and_edges(x: &[f64]) -> (Vec<i64>, Vec<(usize, i64)>) {
        let mut key = Vec::with_capacity(x.len());
        let mut edges = Vec::new();
        for (k, &c) in x.iter().enumerate() {
            let scaled = c / DEDUP_CELL + DEDUP_OFFSET;
            let base = scaled.floor();
            let frac = scaled - base;
            let slack = DEDUP_TOL / DEDUP_CELL + scaled.abs() * 4.0 * f64::EPSILON + 1e-9;
            key.push(base as i64);
            if frac < slack {
                edges.push((k, -1));
            } else if frac > 1.0 - slack {
                edges.push((k, 1));
            }
        }
        (key, edges)
    }

    pub(crate) fn find<'a>(&self, x: &[f64], coords_of: impl Fn(usize) -> &'a [f64]) -> Option<usize> {
        let (key, edges) = Self::key_and_edges(x);
        let mut probe = key.clone();
        for mask in 0u32..(1u32 << edges.len()) {
            probe.copy_from_slice(&key);
            for (bit, &(k, step)) in edges.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    probe[k] += step;
                }
            }
            if let Some(list) = self.cells.get(&probe) {
                if let Some(&j) = list.iter().find(|&&j| distance(coords_of(j), x) <= DEDUP_TOL) {
                    return Some(j);
                }
            }
        }
        None
    }

    pub(crate) fn insert(&mut self, x: &[f64], id: usize) {
        let (key, _) = Self::key_and_edges(x);
        self.cells.entry(key).or_default().push(id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real(coords: &[f64]) -> Vector {
        Vector::new(FieldTag::Real, coords.len(), coords.to_vec()).unwrap()
    }

    fn real_set(pts: &[&[f64]]) -> PointSet {
        let n = pts[0].len();
        PointSet::new(FieldTag::Real, n, pts.iter().map(|p| real(p)).collect(), "test", None).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&real(&[3.0, 4.0])), 5.0);
        let z = Vector::new(FieldTag::Complex, 1, vec![1.0, 1.0]).unwrap();
        assert!((norm(&z) - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(norm(&real(&[0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Vector::new(FieldTag::Real, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(FieldTag::Real, 1, vec![f64::INFINITY]).is_err());
        assert!(Vector::new(FieldTag::Complex, 2, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn realify_examples() {
        let v = Vector::new(FieldTag::Complex, 1, vec![3.0, 4.0]).unwrap();
        let r = realify(&v).unwrap();
        assert_eq!(r.field(), FieldTag::Real);
        assert_eq!(r.dim(), 2);
        assert_eq!(r.coords(), &[3.0, 4.0]);

        let v = Vector::new(FieldTag::Complex, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(norm(&realify(&v).unwrap()), norm(&v));
        assert!((norm(&v) - std::f64::consts::SQRT_2).abs() < 1e-15);

        let z = realify(&Vector::zeros(FieldTag::Complex, 3)).unwrap();
        assert_eq!(z, Vector::zeros(FieldTag::Real, 6));

        assert!(realify(&real(&[1.0])).is_err());
    }

    #[test]
    fn min_gap_examples() {
        let ps = real_set(&[&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.0]]);
        assert_eq!(min_pairwise_gap(&ps, 10.0).unwrap(), Some(1.0));
        let ps = real_set(&[&[0.0, 0.0], &[5.0, 0.0]]);
        assert_eq!(min_pairwise_gap(&ps, 1.0).unwrap(), None);
        assert!(min_pairwise_gap(&ps, 0.0).is_err());
    }

    #[test]
    fn min_gap_z2_disk() {
        let mut pts = Vec::new();
        for x in -5i32..=5 {
            for y in -5i32..=5 {
                if x * x + y * y <= 25 {
                    pts.push(real(&[x as f64, y as f64]));
                }
            }
        }
        assert_eq!(pts.len(), 81);
        let ps = PointSet::new(FieldTag::Real, 2, pts, "z2", Some(5.0)).unwrap();
        assert_eq!(min_pairwise_gap(&ps, 5.0).unwrap(), Some(1.0));
        assert_eq!(min_pairwise_gap_grid(&ps, 5.0).unwrap(), Some(1.0));
    }

    #[test]
    fn duplicates_rejected() {
        let a = real(&[1.0, 2.0]);
        let b = real(&[1.0 + 1e-13, 2.0]);
        assert!(PointSet::new(FieldTag::Real, 2, vec![a.clone(), b.clone()], "", None).is_err());
        assert!(PointSet::new_unchecked_distinct(FieldTag::Real, 2, vec![a, b], "", None).is_ok());
    }

    #[test]
    fn dedup_across_cell_boundary() {
        let edge = 3.0 * DEDUP_CELL - DEDUP_OFFSET * DEDUP_CELL;
        let a = real(&[edge - 4e-13]);
        let b = real(&[edge + 4e-13]);
        assert!(PointSet::new(FieldTag::Real, 1, vec![a, b], "", None).is_err());
    }

    #[test]
    fn coincident_points_are_one_point() {
        let ps = PointSet::new_unchecked_distinct(
            FieldTag::Real,
            1,
            vec![real(&[1.0]), real(&[1.0]), real(&[1.0])],
            "",
            None,
        )
        .unwrap();
        assert_eq!(min_pairwise_gap(&ps, 2.0).unwrap(), None);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let r = PointSet::new(FieldTag::Real, 2, vec![real(&[1.0, 2.0]), real(&[1.0])], "", None);
        assert!(r.is_err());
    }

    fn coords_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, dim)
    }

    proptest! {
        #[test]
        fn norm_is_homogeneous(c in -50.0f64..50.0, x in coords_strategy(5)) {
            let v = real(&x);
            let lhs = v.scale(c).norm();
            let rhs = c.abs() * v.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn grid_agrees_with_brute(
            pts in prop::collection::vec(coords_strategy(3), 2..200),
            scale in 0.01f64..10.0,
        ) {
            let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * scale).collect()).collect();
            let refs: Vec<&[f64]> = scaled.iter().map(|p| p.as_slice()).collect();
            prop_assert_eq!(min_gap_brute(&refs), min_gap_grid(&refs));
        }

        #[test]
        fn min_gap_permutation_invariant(
            pts in prop::collection::vec(coords_strategy(2), 2..60),
            seed in any::<u64>(),
        ) {
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let mut shuffled = refs.clone();
            let len = shuffled.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(min_gap_brute(&refs), min_gap_brute(&shuffled));
        }
    }

    #[test]
    fn grid_agrees_on_integer_lattices() {
        let mut pts = Vec::new();
        for x in -12i32..=12 {
            for y in -12i32..=12 {
                pts.push(vec![x as f64 * 0.5, y as f64 * 0.25]);
            }
        }
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert_eq!(min_gap_grid(&refs), Some(0.25));
        assert_eq!(min_gap_brute(&refs), Some(0.25));
    }
}
