//! Haar-distributed unitary and orthogonal matrices, uniform sphere points and
//! spherical cap measures.
//!
//! The cap `M_eps` is the set of unit vectors in `R^{k+m}` whose first `k`
//! coordinates have norm at most `eps`. For a uniform point the squared norm
//! of those coordinates is `Beta(k/2, m/2)` distributed, which gives the exact
//! value `I_{eps^2}(k/2, m/2)` used as the oracle for every Monte Carlo
//! estimate here.
//!
//! Two candidate densities appear for the map `(v, w) -> (eps v, sqrt(1 - |eps v|^2) w)`
//! from `B^k x S^{m-1}` onto the cap: `eps^k (1 - |eps v|^2)^{m/2}` and, from a
//! direct surface-measure computation, `eps^k (1 - |eps v|^2)^{(m-2)/2}`. Either
//! one gives the `eps^k` scaling; the crate relies only on the beta law, which
//! the Monte Carlo checks confirm.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::point::{FieldTag, Vector};
use crate::rng::RngStream;
use crate::special::{beta_inc, ln_beta};
use crate::stats::{fit_line, ks_critical, ks_statistic, MomentAccumulator};

/// Samples per parallel chunk; chunk `i` always draws from sub-stream `i`.
pub(crate) const MC_CHUNK: u64 = 1 << 15;

/// An element of U(n) (complex) or O(n) (real), stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    field: FieldTag,
    n: usize,
    entries: Vec<Complex64>,
}

impl GroupElement {
    pub fn identity(field: FieldTag, n: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { field, n, entries }
    }

    /// Builds an element from row-major entries, checking unitarity to `1e-10`.
    pub fn from_entries(field: FieldTag, n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(invalid(format!("expected {} entries for n = {n}", n * n)));
        }
        if field == FieldTag::Real && entries.iter().any(|z| z.im != 0.0) {
            return Err(invalid("orthogonal matrix entries must be real"));
        }
        let g = Self { field, n, entries };
        let res = g.unitarity_residual();
        if !(res <= 1e-10) {
            return Err(invalid(format!("matrix is not unitary (residual {res:e})")));
        }
        Ok(g)
    }

    /// Permutation matrix sending basis vector `perm[j]` to position `j`,
    /// i.e. `(g v)_j = v_{perm[j]}`.
    pub fn permutation(field: FieldTag, perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(invalid("not a permutation"));
            }
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for (row, &col) in perm.iter().enumerate() {
            entries[row * n + col] = Complex64::new(1.0, 0.0);
        }
        Ok(Self { field, n, entries })
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.n + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `self * other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                for j in 0..n {
                    entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        let field = if self.field == FieldTag::Real && other.field == FieldTag::Real {
            FieldTag::Real
        } else {
            FieldTag::Complex
        };
        GroupElement { field, n, entries }
    }

    /// Max-entry error of `G^H G - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += self.entries[k * n + i].conj() * self.entries[k * n + j];
                }
                if i == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn determinant(&self) -> Complex64 {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.entries);
        m.determinant()
    }

    /// First `rows` field coordinates of `g * v`, in the layout of `v`'s field.
    /// `coords` uses the interleaved layout for complex vectors.
    pub(crate) fn apply_rows(&self, coords: &[f64], field: FieldTag, rows: usize) -> Vec<f64> {
        let n = self.n;
        match field {
            FieldTag::Real => (0..rows)
                .map(|i| {
                    let row = &self.entries[i * n..(i + 1) * n];
                    row.iter().zip(coords).map(|(g, x)| g.re * x).sum()
                })
                .collect(),
            FieldTag::Complex => {
                let mut out = Vec::with_capacity(2 * rows);
                for i in 0..rows {
                    let row = &self.entries[i * n..(i + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, g) in row.iter().enumerate() {
                        acc += g * Complex64::new(coords[2 * j], coords[2 * j + 1]);
                    }
                    out.push(acc.re);
                    out.push(acc.im);
                }
                out
            }
        }
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.n {
            return Err(invalid(format!(
                "dimension mismatch: matrix is {0}x{0}, vector has dimension {1}",
                self.n,
                v.dim()
            )));
        }
        Vector::new(v.field(), self.n, self.apply_rows(v.coords(), v.field(), self.n))
    }
}

/// Haar-random element of U(n).
pub fn haar_unitary(n: usize, rng: &mut RngStream) -> Result<GroupElement> {
    haar(FieldTag::Complex, n, rng)
}

/// Haar-random element of O(n).
pub fn haar_orthogonal(n: usize, rng: &mut RngStream) -> Result<GroupElement> {
    haar(FieldTag::Real, n, rng)
}

/// Haar element of the group matching `field`.
pub fn haar(field: FieldTag, n: usize, rng: &mut RngStream) -> Result<GroupElement> {
    if n == 0 {
        return Err(invalid("group dimension must be at least 1"));
    }
    loop {
        if let Some(g) = try_haar(field, n, rng) {
            return Ok(g);
        }
    }
}

/// Orthonormalizes the columns of a Ginibre matrix by Gram–Schmidt with one
/// reorthogonalization pass. The implied triangular factor has a positive
/// real diagonal, which is the normalization that makes `Q` Haar distributed.
/// Returns `None` on numerical rank deficiency so the caller redraws.
fn try_haar(field: FieldTag, n: usize, rng: &mut RngStream) -> Option<GroupElement> {
    // cols[j][i] = Z_{ij}
    let mut cols = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for col in cols.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = match field {
                FieldTag::Real => 0.0,
                FieldTag::Complex => rng.sample(StandardNormal),
            };
            col[i] = Complex64::new(re, im);
        }
    }
    for j in 0..n {
        let (done, rest) = cols.split_at_mut(j);
        let col = &mut rest[0];
        let initial = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for _pass in 0..2 {
            for q in done.iter() {
                let proj: Complex64 = q.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
                for (c, a) in col.iter_mut().zip(q) {
                    *c -= proj * a;
                }
            }
        }
        let r = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(r > 1e-8 * initial) || !r.is_finite() {
            return None;
        }
        for c in col.iter_mut() {
            *c /= r;
        }
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            entries[i * n + j] = *z;
        }
    }
    Some(GroupElement { field, n, entries })
}

/// Uniform point on the unit sphere of `R^dim`.
pub fn sphere_uniform(dim: usize, rng: &mut RngStream) -> Result<Vector> {
    if dim == 0 {
        return Err(invalid("sphere dimension must be at least 1"));
    }
    let mut buf = vec![0.0; dim];
    let r = fill_sphere(&mut buf, rng);
    for x in buf.iter_mut() {
        *x /= r;
    }
    Vector::new(FieldTag::Real, dim, buf)
}

/// Fills `buf` with a Gaussian vector and returns its norm, redrawing on underflow.
fn fill_sphere(buf: &mut [f64], rng: &mut RngStream) -> f64 {
    loop {
        for x in buf.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let r = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r >= 1e-150 {
            return r;
        }
    }
}

fn check_cap_args(k: usize, m: usize, epsilon: f64) -> Result<()> {
    if k == 0 || m == 0 {
        return Err(invalid("cap dimensions k and m must be positive"));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(())
}

/// Exact measure of the cap `M_eps` on `S^{k+m-1}`: `I_{eps^2}(k/2, m/2)`.
pub fn cap_measure_exact(k: usize, m: usize, epsilon: f64) -> Result<f64> {
    check_cap_args(k, m, epsilon)?;
    beta_inc(k as f64 / 2.0, m as f64 / 2.0, epsilon * epsilon)
}

/// Limit of `eps^{-k} * cap_measure_exact(k, m, eps)` as `eps -> 0`,
/// namely `1 / (a B(a, b))` with `a = k/2`, `b = m/2`.
pub fn cap_small_eps_constant(k: usize, m: usize) -> f64 {
    let (a, b) = (k as f64 / 2.0, m as f64 / 2.0);
    (-ln_beta(a, b)).exp() / a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapEstimate {
    pub k: usize,
    pub m: usize,
    pub epsilon: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub exact_value: f64,
    pub samples: u64,
}

impl CapEstimate {
    /// Binomial standard error of the estimator if the oracle value is exact.
    pub fn oracle_stderr(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        (self.exact_value * (1.0 - self.exact_value) / self.samples as f64).sqrt()
    }

    /// `|mc - exact|` in units of [`Self::oracle_stderr`].
    pub fn deviation(&self) -> f64 {
        let diff = (self.mc_estimate - self.exact_value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.oracle_stderr()
        }
    }

    /// z-test of the estimate against the oracle value.
    pub fn agrees_within(&self, sigmas: f64) -> bool {
        (self.mc_estimate - self.exact_value).abs() <= sigmas * self.oracle_stderr()
    }

    /// True when the estimate is more than five standard errors off the oracle.
    pub fn flagged(&self) -> bool {
        !self.agrees_within(5.0)
    }

    pub(crate) fn from_hits(k: usize, m: usize, epsilon: f64, hits: u64, samples: u64, exact_value: f64) -> Self {
        let p = hits as f64 / samples as f64;
        CapEstimate {
            k,
            m,
            epsilon,
            mc_estimate: p,
            mc_stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            exact_value,
            samples,
        }
    }
}

/// Runs `samples` Bernoulli trials in fixed-size chunks, chunk `i` drawing from
/// `base.substream(i)`. The hit count does not depend on thread scheduling.
pub(crate) fn chunked_hits<F>(samples: u64, base: &RngStream, trial: F) -> u64
where
    F: Fn(&mut RngStream) -> bool + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = base.substream(c);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..len).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// Monte Carlo estimate of the cap measure from uniform sphere samples.
pub fn cap_measure_mc(
    k: usize,
    m: usize,
    epsilon: f64,
    samples: u64,
    rng: &mut RngStream,
) -> Result<CapEstimate> {
    check_cap_args(k, m, epsilon)?;
    if samples < 1000 {
        return Err(invalid("cap_measure_mc needs at least 1000 samples"));
    }
    let exact = cap_measure_exact(k, m, epsilon)?;
    let base = rng.split();
    let dim = k + m;
    let hits = chunked_hits(samples, &base, |rng| {
        let mut stack = [0.0f64; 64];
        let mut heap;
        let buf: &mut [f64] = if dim <= stack.len() {
            &mut stack[..dim]
        } else {
            heap = vec![0.0; dim];
            &mut heap
        };
        let r = fill_sphere(buf, rng);
        buf[..k].iter().map(|x| (x / r) * (x / r)).sum::<f64>().sqrt() <= epsilon
    });
    Ok(CapEstimate::from_hits(k, m, epsilon, hits, samples, exact))
}

/// Where cap values in a scaling fit come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CapSource {
    Exact,
    MonteCarlo { samples: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapScalingFit {
    pub k: usize,
    pub m: usize,
    pub eps_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    /// Small-eps limit of `eps^{-k} * lambda(M_eps)`.
    pub limit_constant: f64,
    /// `eps^{-k} * lambda(M_eps) / limit_constant` along the grid.
    pub ratio_trend: Vec<f64>,
}

impl CapScalingFit {
    /// Smallest and largest `lambda(M_eps) / eps^k` over the grid.
    pub fn scaled_range(&self) -> (f64, f64) {
        self.eps_grid
            .iter()
            .zip(&self.values)
            .map(|(e, v)| v / e.powi(self.k as i32))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }
}

/// Fits `log lambda(M_eps)` against `log eps`; the slope estimates `k`.
pub fn cap_scaling_fit(
    k: usize,
    m: usize,
    eps_grid: &[f64],
    source: CapSource,
    rng: &mut RngStream,
) -> Result<CapScalingFit> {
    if eps_grid.len() < 4 {
        return Err(invalid("scaling fit needs at least 4 grid points"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
        return Err(invalid("scaling grid must lie in (0, 0.5]"));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("scaling grid must be strictly decreasing"));
    }
    let mut values = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let v = match source {
            CapSource::Exact => cap_measure_exact(k, m, eps)?,
            CapSource::MonteCarlo { samples } => {
                let est = cap_measure_mc(k, m, eps, samples, rng)?;
                if est.mc_estimate == 0.0 {
                    return Err(Error::InsufficientSamples { epsilon: eps });
                }
                est.mc_estimate
            }
        };
        values.push(v);
    }
    let xs: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| invalid("degenerate scaling grid"))?;
    let limit_constant = cap_small_eps_constant(k, m);
    let ratio_trend = eps_grid
        .iter()
        .zip(&values)
        .map(|(e, v)| v / e.powi(k as i32) / limit_constant)
        .collect();
    Ok(CapScalingFit {
        k,
        m,
        eps_grid: eps_grid.to_vec(),
        values,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        limit_constant,
        ratio_trend,
    })
}

/// Mean and standard error of `|u_11|^2` over `samples` Haar draws, computed
/// in fixed chunks and merged in chunk order.
pub fn haar_entry_moment(field: FieldTag, n: usize, samples: u64, rng: &mut RngStream) -> Result<(MomentAccumulator, f64)> {
    if n == 0 || samples == 0 {
        return Err(invalid("need n >= 1 and at least one sample"));
    }
    let base = rng.split();
    let chunk = MC_CHUNK;
    let chunks = samples.div_ceil(chunk);
    let parts: Vec<(MomentAccumulator, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sub = base.substream(c);
            let len = chunk.min(samples - c * chunk);
            let mut acc = MomentAccumulator::new();
            let mut worst: f64 = 0.0;
            for _ in 0..len {
                let g = haar(field, n, &mut sub).expect("n >= 1");
                worst = worst.max(g.unitarity_residual());
                acc.push(g.entry(0, 0).norm_sqr());
            }
            (acc, worst)
        })
        .collect();
    let mut total = MomentAccumulator::new();
    let mut worst: f64 = 0.0;
    for (acc, w) in &parts {
        total.merge(acc);
        worst = worst.max(*w);
    }
    Ok((total, worst))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub passes: bool,
}

/// Two-sample KS test of left invariance: `|g_11|` over `samples` Haar draws
/// against `|(h g')_11|` over an independent batch, with `h` itself a Haar
/// draw held fixed.
pub fn haar_left_invariance(
    field: FieldTag,
    n: usize,
    samples: usize,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<KsOutcome> {
    if n == 0 || samples < 2 {
        return Err(invalid("need n >= 1 and at least two samples"));
    }
    let h = haar(field, n, rng)?;
    let plain_base = rng.split();
    let shifted_base = rng.split();
    let stat = |g: &GroupElement| g.entry(0, 0).norm();
    let plain: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| stat(&haar(field, n, &mut plain_base.substream(i as u64)).expect("n >= 1")))
        .collect();
    let shifted: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let g = haar(field, n, &mut shifted_base.substream(i as u64)).expect("n >= 1");
            stat(&h.compose(&g))
        })
        .collect();
    let statistic = ks_statistic(&plain, &shifted);
    let critical = ks_critical(alpha, samples, samples);
    Ok(KsOutcome {
        statistic,
        critical,
        alpha,
        passes: statistic <= critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MomentAccumulator;
    use std::f64::consts::PI;

    /// Independent oracle: integrate the Beta(k/2, m/2) density of `t = |x_head|^2`
    /// after substituting `t = u^2` (k odd) to remove the endpoint singularity,
    /// using composite Simpson with many panels.
    fn cap_quadrature(k: usize, m: usize, eps: f64) -> f64 {
        let (a, b) = (k as f64 / 2.0, m as f64 / 2.0);
        let norm = ln_beta_oracle(a, b);
        // density of s = |x_head| : 2 s^{2a-1} (1-s^2)^{b-1} / B(a,b)
        let f = |s: f64| {
            if s <= 0.0 {
                return if k == 1 { 2.0 * (-norm).exp() } else { 0.0 };
            }
            let one_minus = (1.0 - s * s).max(0.0);
            if one_minus == 0.0 && b < 1.0 {
                return 0.0;
            }
            2.0 * ((2.0 * a - 1.0) * s.ln() + (b - 1.0) * one_minus.ln() - norm).exp()
        };
        // for b < 1 the density blows up at s=1; substitute s = 1 - w^2 near the end.
        if b < 1.0 && eps > 0.5 {
            let head = simpson(&f, 0.0, 0.5, 20000);
            let w_max = (1.0 - 0.5f64).sqrt();
            let w_min = (1.0 - eps).max(0.0).sqrt();
            let g = |w: f64| f(1.0 - w * w) * 2.0 * w;
            head + simpson(&g, w_min, w_max, 20000)
        } else {
            simpson(&f, 0.0, eps, 20000)
        }
    }

    fn ln_beta_oracle(a: f64, b: f64) -> f64 {
        // Γ at half-integers by recurrence from Γ(1/2) = √π, Γ(1) = 1.
        fn ln_gamma_half(x: f64) -> f64 {
            let mut acc = 0.0;
            let mut y = x;
            while y > 1.0 {
                y -= 1.0;
                acc += y.ln();
            }
            if (y - 0.5).abs() < 1e-12 {
                acc + 0.5 * PI.ln()
            } else {
                acc
            }
        }
        ln_gamma_half(a) + ln_gamma_half(b) - ln_gamma_half(a + b)
    }

    fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..panels {
            let x = lo + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn exact_matches_quadrature_oracle() {
        for k in 1..=3 {
            for m in 1..=4 {
                for &eps in &[0.02, 0.05, 0.1, 0.2, 0.5, 0.9] {
                    let exact = cap_measure_exact(k, m, eps).unwrap();
                    let quad = cap_quadrature(k, m, eps);
                    assert!(
                        ((exact - quad) / exact).abs() < 1e-6,
                        "k={k} m={m} eps={eps}: beta {exact} vs quadrature {quad}"
                    );
                }
            }
        }
    }

    #[test]
    fn exact_examples() {
        assert_eq!(cap_measure_exact(3, 2, 1.0).unwrap(), 1.0);
        let v = cap_measure_exact(1, 1, 0.5).unwrap();
        assert!((v - 2.0 / PI * 0.5f64.asin()).abs() < 1e-14);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        assert!((cap_measure_exact(2, 2, 0.3).unwrap() - 0.09).abs() < 1e-14);
        assert!((cap_measure_exact(2, 4, 0.2).unwrap() - 0.0784).abs() < 1e-14);
        assert!(cap_measure_exact(1, 1, 0.0).is_err());
        assert!(cap_measure_exact(1, 1, 1.5).is_err());
        assert!(cap_measure_exact(0, 1, 0.5).is_err());
    }

    #[test]
    fn exact_monotone() {
        for k in 1..=3 {
            for m in 1..=4 {
                let mut prev = 0.0;
                for i in 1..=50 {
                    let eps = i as f64 / 50.0;
                    let v = cap_measure_exact(k, m, eps).unwrap();
                    assert!(v >= prev);
                    prev = v;
                    if k > 1 {
                        assert!(cap_measure_exact(k - 1, m, eps).unwrap() >= v);
                    }
                }
            }
        }
    }

    #[test]
    fn cap_ratio_bounded_on_small_eps() {
        for k in 1..=3 {
            for m in 1..=4 {
                let ratios: Vec<f64> = (0..=40)
                    .map(|i| 0.01 + 0.19 * i as f64 / 40.0)
                    .map(|e| cap_measure_exact(k, m, e).unwrap() / e.powi(k as i32))
                    .collect();
                let c2 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                let c1 = ratios.iter().copied().fold(0.0, f64::max);
                assert!(c2 > 0.0 && c1 / c2 <= 2.0, "k={k} m={m}: [{c2}, {c1}]");
            }
        }
    }

    #[test]
    fn mc_examples() {
        let mut rng = RngStream::new(11, 0);
        let est = cap_measure_mc(1, 1, 0.5, 1_000_000, &mut rng).unwrap();
        assert!(est.agrees_within(4.0), "{est:?}");
        let est = cap_measure_mc(2, 4, 0.2, 200_000, &mut rng).unwrap();
        assert!(est.agrees_within(4.0), "{est:?}");
        let est = cap_measure_mc(2, 3, 1.0, 5_000, &mut rng).unwrap();
        assert_eq!(est.mc_estimate, 1.0);
        assert_eq!(est.mc_stderr, 0.0);
        assert!(cap_measure_mc(1, 1, 0.5, 999, &mut rng).is_err());
    }

    #[test]
    fn mc_deterministic() {
        let a = cap_measure_mc(2, 2, 0.3, 100_000, &mut RngStream::new(5, 1)).unwrap();
        let b = cap_measure_mc(2, 2, 0.3, 100_000, &mut RngStream::new(5, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_fit_exact() {
        let mut rng = RngStream::new(0, 0);
        let fit = cap_scaling_fit(2, 2, &[0.2, 0.1, 0.05, 0.02], CapSource::Exact, &mut rng).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        for r in &fit.ratio_trend {
            assert!((r - 1.0).abs() < 1e-12);
        }

        let grid = [0.2, 0.15, 0.1, 0.07, 0.05, 0.035, 0.02];
        let fit = cap_scaling_fit(1, 3, &grid, CapSource::Exact, &mut rng).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn ratio_trend_monotone_to_one() {
        let grid = [0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01];
        let mut rng = RngStream::new(0, 0);
        for k in 1..=3 {
            for m in 1..=4 {
                let fit = cap_scaling_fit(k, m, &grid, CapSource::Exact, &mut rng).unwrap();
                let dist: Vec<f64> = fit.ratio_trend.iter().map(|r| (r - 1.0).abs()).collect();
                for w in dist.windows(2) {
                    assert!(w[1] <= w[0] + 1e-14, "k={k} m={m}: {:?}", fit.ratio_trend);
                }
                assert!(dist.last().unwrap() < &0.01);
            }
        }
    }

    #[test]
    fn scaling_fit_errors() {
        let mut rng = RngStream::new(0, 0);
        assert!(cap_scaling_fit(1, 1, &[0.2, 0.1, 0.05], CapSource::Exact, &mut rng).is_err());
        assert!(cap_scaling_fit(1, 1, &[0.8, 0.1, 0.05, 0.02], CapSource::Exact, &mut rng).is_err());
        assert!(cap_scaling_fit(1, 1, &[0.1, 0.2, 0.05, 0.02], CapSource::Exact, &mut rng).is_err());
        let err = cap_scaling_fit(
            1,
            1,
            &[0.2, 0.1, 0.05, 1e-6],
            CapSource::MonteCarlo { samples: 1000 },
            &mut rng,
        )
        .unwrap_err();
        match err {
            Error::InsufficientSamples { epsilon } => assert_eq!(epsilon, 1e-6),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unitary_n1_is_phase() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..100 {
            let g = haar_unitary(1, &mut rng).unwrap();
            assert!((g.entry(0, 0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_residuals_and_determinism() {
        let mut rng = RngStream::new(17, 3);
        for n in 1..=6 {
            for _ in 0..200 {
                assert!(haar_unitary(n, &mut rng).unwrap().unitarity_residual() <= 1e-12);
                assert!(haar_orthogonal(n, &mut rng).unwrap().unitarity_residual() <= 1e-12);
            }
        }
        let a = haar_unitary(4, &mut RngStream::new(1, 1)).unwrap();
        let b = haar_unitary(4, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn orthogonal_n1_signs() {
        let mut rng = RngStream::new(8, 0);
        let acc: MomentAccumulator = (0..10_000)
            .map(|_| {
                let g = haar_orthogonal(1, &mut rng).unwrap();
                let x = g.entry(0, 0).re;
                assert!(x == 1.0 || x == -1.0);
                if x > 0.0 { 1.0 } else { 0.0 }
            })
            .collect();
        assert!((acc.mean - 0.5).abs() <= 4.0 * acc.stderr());
    }

    #[test]
    fn orthogonal_determinants() {
        let mut rng = RngStream::new(21, 0);
        let (mut pos, mut neg) = (0, 0);
        for _ in 0..200 {
            let det = haar_orthogonal(3, &mut rng).unwrap().determinant();
            assert!(det.im.abs() < 1e-10);
            if (det.re - 1.0).abs() < 1e-10 {
                pos += 1;
            } else if (det.re + 1.0).abs() < 1e-10 {
                neg += 1;
            } else {
                panic!("determinant {det}");
            }
        }
        assert!(pos > 0 && neg > 0);
    }

    #[test]
    fn orthogonal_entry_moment() {
        let mut rng = RngStream::new(4, 4);
        let acc: MomentAccumulator = (0..100_000)
            .map(|_| haar_orthogonal(2, &mut rng).unwrap().entry(0, 0).re.powi(2))
            .collect();
        assert!((acc.mean - 0.5).abs() <= 4.0 * acc.stderr());
    }

    #[test]
    fn sphere_examples() {
        let mut rng = RngStream::new(2, 2);
        let mut half = MomentAccumulator::new();
        for _ in 0..100_000 {
            let v = sphere_uniform(2, &mut rng).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
            half.push(if v.coords()[0] > 0.0 { 1.0 } else { 0.0 });
        }
        assert!((half.mean - 0.5).abs() <= 4.0 * half.stderr());

        let sq: MomentAccumulator = (0..100_000)
            .map(|_| sphere_uniform(4, &mut rng).unwrap().coords()[0].powi(2))
            .collect();
        assert!((sq.mean - 0.25).abs() <= 4.0 * sq.stderr());
        assert!(sphere_uniform(0, &mut rng).is_err());
    }

    #[test]
    fn entry_moment() {
        let (acc, worst) = haar_entry_moment(FieldTag::Complex, 3, 20_000, &mut RngStream::new(1, 0)).unwrap();
        assert!((acc.mean - 1.0 / 3.0).abs() <= 4.0 * acc.stderr());
        assert!(worst <= 1e-12);
    }

    #[test]
    fn left_invariance() {
        let out = haar_left_invariance(FieldTag::Complex, 3, 5_000, 0.01, &mut RngStream::new(2, 0)).unwrap();
        assert!(out.passes, "{out:?}");
        let out = haar_left_invariance(FieldTag::Real, 3, 5_000, 0.01, &mut RngStream::new(2, 0)).unwrap();
        assert!(out.passes, "{out:?}");
    }

    #[test]
    fn permutation_matrix() {
        let g = GroupElement::permutation(FieldTag::Complex, &[1, 2, 0]).unwrap();
        let v = Vector::new(FieldTag::Complex, 3, vec![1.0, 0.0, 2.0, 0.5, 3.0, -1.0]).unwrap();
        assert_eq!(g.apply(&v).unwrap().coords(), &[2.0, 0.5, 3.0, -1.0, 1.0, 0.0]);
        assert!(GroupElement::permutation(FieldTag::Real, &[0, 0]).is_err());
    }
}
