//! Point-set families: lattice truncations, bounded perturbations of a set,
//! power-law sequences and zero-padded embeddings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::point::{DedupIndex, FieldTag, PointSet, Vector};
use crate::rng::RngStream;
use crate::sampling::sphere_uniform;

pub const DEFAULT_POINT_BUDGET: u64 = 1_000_000;

/// Candidate boxes larger than this many multiples of the budget are refused
/// before enumeration starts.
const BOX_BUDGET_FACTOR: u64 = 64;

const PERTURB_ATTEMPTS: usize = 100;

/// A truncated lattice `{ sum m_i b_i : m in Z^r, |.| <= radius }`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    pub field: FieldTag,
    pub n: usize,
    pub basis: Vec<Vector>,
    pub radius: f64,
}

impl LatticeSpec {
    pub fn new(field: FieldTag, n: usize, basis: Vec<Vector>, radius: f64) -> Result<Self> {
        let spec = Self {
            field,
            n,
            basis,
            radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The first `rank` real unit vectors `e_1, ..., e_rank` of the realified
    /// space; for complex fields these interleave as `e1, i*e1, e2, i*e2, ...`.
    pub fn standard(field: FieldTag, n: usize, rank: usize, radius: f64) -> Result<Self> {
        let len = field.real_len(n);
        if rank > len {
            return Err(invalid(format!("rank {rank} exceeds real dimension {len}")));
        }
        let basis = (0..rank)
            .map(|i| {
                let mut c = vec![0.0; len];
                c[i] = 1.0;
                Vector::new(field, n, c)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, n, basis, radius)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("lattice dimension must be positive"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid("lattice radius must be positive"));
        }
        let len = self.field.real_len(self.n);
        if self.rank() > len {
            return Err(invalid(format!(
                "rank {} exceeds real dimension {len}",
                self.rank()
            )));
        }
        for (i, b) in self.basis.iter().enumerate() {
            if b.field() != self.field || b.dim() != self.n {
                return Err(invalid(format!("basis vector {i} has the wrong field or dimension")));
            }
        }
        if self.rank() > 0 {
            let det = self.gram().determinant();
            if !(det > 1e-10) {
                return Err(invalid(format!(
                    "basis is rank deficient (Gram determinant {det:e})"
                )));
            }
        }
        Ok(())
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let r = self.rank();
        DMatrix::from_fn(r, r, |i, j| {
            self.basis[i]
                .coords()
                .iter()
                .zip(self.basis[j].coords())
                .map(|(a, b)| a * b)
                .sum()
        })
    }

    /// Smallest singular value of the basis matrix.
    pub fn min_singular_value(&self) -> f64 {
        if self.rank() == 0 {
            return f64::INFINITY;
        }
        let eig = SymmetricEigen::new(self.gram());
        eig.eigenvalues.min().max(0.0).sqrt()
    }

    fn describe(&self) -> String {
        let basis: Vec<String> = self
            .basis
            .iter()
            .map(|b| {
                let c: Vec<String> = b.coords().iter().map(|x| format!("{x}")).collect();
                format!("[{}]", c.join(","))
            })
            .collect();
        format!(
            "lattice(field={},n={},rank={},basis=[{}],radius={})",
            self.field,
            self.n,
            self.rank(),
            basis.join(","),
            self.radius
        )
    }
}

/// Every lattice point of norm at most `spec.radius`, sorted by norm.
pub fn lattice_points(spec: &LatticeSpec) -> Result<PointSet> {
    lattice_points_with_budget(spec, DEFAULT_POINT_BUDGET)
}

pub fn lattice_points_with_budget(spec: &LatticeSpec, budget: u64) -> Result<PointSet> {
    spec.validate()?;
    let len = spec.field.real_len(spec.n);
    let r = spec.rank();
    // |m|_2 <= |B m| / sigma_min, so each coefficient is bounded by radius / sigma_min.
    let bound = if r == 0 {
        0
    } else {
        (spec.radius / spec.min_singular_value() * (1.0 + 1e-12)).floor() as i64
    };
    let side = 2 * bound as u64 + 1;
    let box_size = side.checked_pow(r as u32).unwrap_or(u64::MAX);
    if box_size > budget.saturating_mul(BOX_BUDGET_FACTOR) {
        return Err(Error::BudgetExceeded {
            requested: box_size,
            budget,
        });
    }

    let r2 = spec.radius * spec.radius * (1.0 + 1e-12);
    let mut coeffs = vec![-bound; r];
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut point = vec![0.0; len];
    loop {
        point.iter_mut().for_each(|x| *x = 0.0);
        for (m, b) in coeffs.iter().zip(&spec.basis) {
            if *m != 0 {
                let m = *m as f64;
                for (p, c) in point.iter_mut().zip(b.coords()) {
                    *p += m * c;
                }
            }
        }
        let nsq: f64 = point.iter().map(|x| x * x).sum();
        if nsq <= r2 {
            if out.len() as u64 >= budget {
                return Err(Error::BudgetExceeded {
                    requested: out.len() as u64 + 1,
                    budget,
                });
            }
            out.push((nsq, point.clone()));
        }
        // odometer
        let mut i = 0;
        while i < r {
            if coeffs[i] < bound {
                coeffs[i] += 1;
                break;
            }
            coeffs[i] = -bound;
            i += 1;
        }
        if i == r {
            break;
        }
    }
    out.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let points = out
        .into_iter()
        .map(|(_, c)| Vector::new(spec.field, spec.n, c))
        .collect::<Result<Vec<_>>>()?;
    PointSet::new(spec.field, spec.n, points, spec.describe(), Some(spec.radius))
}

/// Two point sets of equal size and a bijection between them.
/// `pairing[i]` is the index in `target` of the image of `source[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedPointSet {
    pub source: PointSet,
    pub target: PointSet,
    pub pairing: Vec<usize>,
}

impl PairedPointSet {
    pub fn new(source: PointSet, target: PointSet, pairing: Vec<usize>) -> Result<Self> {
        if source.len() != target.len() || pairing.len() != source.len() {
            return Err(invalid("paired sets and pairing must have equal length"));
        }
        let mut seen = vec![false; pairing.len()];
        for &t in &pairing {
            if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
                return Err(invalid("pairing is not a permutation"));
            }
        }
        Ok(Self {
            source,
            target,
            pairing,
        })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Vector, &Vector)> {
        self.source
            .points()
            .iter()
            .zip(&self.pairing)
            .map(|(s, &t)| (s, &self.target.points()[t]))
    }
}

/// Moves every point `v` by a uniformly oriented displacement of length
/// uniform in `[0, lambda |v| + k_const]`.
pub fn perturb(ps: &PointSet, lambda: f64, k_const: f64, rng: &mut RngStream) -> Result<PairedPointSet> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(k_const > 0.0) || !k_const.is_finite() {
        return Err(invalid(format!("K must be positive, got {k_const}")));
    }
    let field = ps.field();
    let n = ps.dim();
    let len = field.real_len(n);
    let mut targets: Vec<Vector> = Vec::with_capacity(ps.len());
    let mut index = DedupIndex::new();
    for (i, v) in ps.points().iter().enumerate() {
        let bound = lambda * v.norm() + k_const;
        let mut placed = None;
        for _ in 0..PERTURB_ATTEMPTS {
            let dir = sphere_uniform(len, rng)?;
            let mag = rng.random::<f64>() * bound;
            let coords: Vec<f64> = v
                .coords()
                .iter()
                .zip(dir.coords())
                .map(|(x, d)| x + mag * d)
                .collect();
            let w = Vector::new(field, n, coords)?;
            if w.distance(v) > bound {
                continue;
            }
            if index.find(w.coords(), |j| targets[j].coords()).is_some() {
                continue;
            }
            placed = Some(w);
            break;
        }
        let w = placed.ok_or(Error::DuplicateRetryExhausted {
            index: i,
            attempts: PERTURB_ATTEMPTS,
        })?;
        index.insert(w.coords(), i);
        targets.push(w);
    }
    let provenance = format!(
        "perturb(lambda={lambda},K={k_const},seed={},stream={}; {})",
        rng.seed(),
        rng.stream_id(),
        ps.provenance()
    );
    let target = PointSet::new(field, n, targets, provenance, None)?;
    let pairing = (0..ps.len()).collect();
    PairedPointSet::new(ps.clone(), target, pairing)
}

/// Point `k` (1-based) has norm `k^{1/rho}` and a uniformly random direction,
/// so the counting function grows like `r^rho`.
pub fn power_sequence(
    field: FieldTag,
    n: usize,
    rho: f64,
    count: usize,
    rng: &mut RngStream,
) -> Result<PointSet> {
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let len = field.real_len(n);
    let provenance = format!(
        "power(field={field},n={n},rho={rho},count={count},seed={},stream={})",
        rng.seed(),
        rng.stream_id()
    );
    let mut points = Vec::with_capacity(count);
    for k in 1..=count {
        let radius = (k as f64).powf(1.0 / rho);
        let dir = sphere_uniform(len, rng)?;
        points.push(Vector::new(field, n, dir.coords().iter().map(|x| radius * x).collect())?);
    }
    PointSet::new(field, n, points, provenance, None)
}

/// Appends one zero field coordinate to every point.
pub fn embed_pad(ps: &PointSet) -> Result<PointSet> {
    let field = ps.field();
    let extra = field.real_factor();
    let points = ps
        .points()
        .iter()
        .map(|p| {
            let mut c = p.coords().to_vec();
            c.extend(std::iter::repeat_n(0.0, extra));
            Vector::new(field, ps.dim() + 1, c)
        })
        .collect::<Result<Vec<_>>>()?;
    PointSet::new_unchecked_distinct(
        field,
        ps.dim() + 1,
        points,
        format!("embed_pad({})", ps.provenance()),
        ps.truncation_radius(),
    )
}
