use std::path::Path;

use serde_json::{json, Value};
use tameproj::generators::{embed_pad, lattice_points_with_budget, perturb, power_sequence, LatticeSpec};
use tameproj::growth::{default_checkpoints, partial_sums, ORIGIN_TOL};
use tameproj::io::{fmt_f64, load_point_set, save_paired, save_point_set};
use tameproj::projector::{
    counting_inequality_experiment, default_schedule, projection_search, skr_probability_mc,
    Discreteness, SeparationReport,
};
use tameproj::sampling::{
    cap_measure_mc, cap_scaling_fit, haar_entry_moment, haar_left_invariance, CapSource,
};
use tameproj::splitmap::{alpha_split, split_projections_discrete, verify_split_bounds};
use tameproj::{Error, FieldTag, PointSet, Result, RngStream, Vector};

use crate::run::Run;
use crate::{CapArgs, GenerateArgs, HaarArgs, Kind, Outcome, ProjectArgs, SeriesArgs, SkrArgs, SplitArgs};

const CAP_SIGMAS: f64 = 5.0;
const HAAR_SIGMAS: f64 = 4.0;
const UNITARITY_TOL: f64 = 1e-12;
const KS_ALPHA: f64 = 0.01;
const MAX_WITNESSES: usize = 100;

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn require<T: Copy>(value: Option<T>, flag: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("--{flag} is required for --kind {kind}")))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn parse_basis_token(token: &str, field: FieldTag, n: usize) -> Result<Vector> {
    let (imag, index) = match token.strip_prefix("ie") {
        Some(rest) => (true, rest),
        None => (false, token.strip_prefix('e').unwrap_or("")),
    };
    let k: usize = index
        .parse()
        .ok()
        .filter(|&k| k >= 1 && k <= n)
        .ok_or_else(|| usage(format!("basis token `{token}` must be e<k> or ie<k> with 1 <= k <= {n}")))?;
    if imag && field == FieldTag::Real {
        return Err(usage(format!("basis token `{token}` needs --field complex")));
    }
    let mut coords = vec![0.0; field.real_len(n)];
    coords[field.real_factor() * (k - 1) + usize::from(imag)] = 1.0;
    Vector::new(field, n, coords)
}

fn lattice_spec(a: &GenerateArgs) -> Result<LatticeSpec> {
    let radius = require(a.radius, "radius", "lattice")?;
    let basis: Vec<Vector> = if let Some(path) = &a.basis_json {
        let rows: Vec<Vec<f64>> = serde_json::from_slice(&std::fs::read(path)?)?;
        rows.into_iter()
            .map(|c| Vector::new(a.field, a.dim, c))
            .collect::<Result<_>>()?
    } else if !a.basis.is_empty() {
        a.basis
            .iter()
            .map(|t| parse_basis_token(t.trim(), a.field, a.dim))
            .collect::<Result<_>>()?
    } else {
        let rank = a.rank.unwrap_or_else(|| a.field.real_len(a.dim));
        return LatticeSpec::standard(a.field, a.dim, rank, radius);
    };
    LatticeSpec::new(a.field, a.dim, basis, radius)
}

fn input_set(path: Option<&Path>, kind: &str) -> Result<PointSet> {
    let path = path.ok_or_else(|| usage(format!("--input is required for --kind {kind}")))?;
    load_point_set(path)
}

fn set_summary(ps: &PointSet) -> Value {
    json!({
        "field": ps.field(),
        "n": ps.dim(),
        "count": ps.len(),
        "max_norm": ps.norms().into_iter().fold(0.0, f64::max),
    })
}

pub fn generate(a: &GenerateArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "generate", seed, a)?;
    let mut rng = RngStream::new(seed, 0);
    let provenance = run.echo()?;
    let (summary, files) = match a.kind {
        Kind::Lattice => {
            let ps = lattice_points_with_budget(&lattice_spec(a)?, a.budget)?.with_provenance(provenance);
            save_point_set(&ps, &run.path("points.jsonl"))?;
            (set_summary(&ps), vec!["points.jsonl".to_string()])
        }
        Kind::Power => {
            let rho = require(a.rho, "rho", "power")?;
            let count = require(a.count, "count", "power")?;
            let ps = power_sequence(a.field, a.dim, rho, count, &mut rng)?.with_provenance(provenance);
            save_point_set(&ps, &run.path("points.jsonl"))?;
            (set_summary(&ps), vec!["points.jsonl".to_string()])
        }
        Kind::Embed => {
            let ps = embed_pad(&input_set(a.input.as_deref(), "embed")?)?.with_provenance(provenance);
            save_point_set(&ps, &run.path("points.jsonl"))?;
            (set_summary(&ps), vec!["points.jsonl".to_string()])
        }
        Kind::Perturbed => {
            let lambda = require(a.lambda, "lambda", "perturbed")?;
            let k_const = require(a.k_const, "k-const", "perturbed")?;
            let source = input_set(a.input.as_deref(), "perturbed")?;
            let mut pp = perturb(&source, lambda, k_const, &mut rng)?;
            pp.target = pp.target.clone().with_provenance(provenance.clone());
            let paths = save_paired(&pp, out, "perturbed", &provenance)?;
            let names = paths
                .iter()
                .map(|p| p.file_name().expect("file").to_string_lossy().into_owned())
                .collect();
            (set_summary(&pp.target), names)
        }
    };
    run.write_summary(json!({ "points": summary, "files": files }))?;
    Ok(Outcome::Positive)
}

fn report_json(r: &SeparationReport) -> Value {
    json!({
        "truncation_radii": r.truncation_radii,
        "window_radius": r.window_radius,
        "min_gaps": r.min_gaps,
        "crowding_counts": r.crowding_counts,
        "verdict": r.verdict,
        "reason": r.reason,
    })
}

fn separation_rows(run: &Run, name: &str, r: &SeparationReport) -> Result<()> {
    let mut t = run.table(&["truncation_radius", "min_gap", "crowding_count", "window_radius"])?;
    for ((radius, gap), count) in r.truncation_radii.iter().zip(&r.min_gaps).zip(&r.crowding_counts) {
        t.row(vec![fmt_f64(*radius), opt(*gap), count.to_string(), fmt_f64(r.window_radius)]);
    }
    run.write_table(name, &t)
}

fn schedule_for(ps: &PointSet, given: &[f64]) -> Vec<f64> {
    if given.is_empty() {
        default_schedule(ps)
    } else {
        given.to_vec()
    }
}

pub fn project(a: &ProjectArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "project", seed, a)?;
    let ps = load_point_set(&a.input)?;
    if a.d == 0 || a.d >= ps.dim() {
        return Err(usage(format!("--d must satisfy 0 < d < n = {}, got {}", ps.dim(), a.d)));
    }
    let schedule = schedule_for(&ps, &a.schedule);
    let mut rng = RngStream::new(seed, 0);
    let mut search = run.table(&["trial", "score_at_R_max", "verdict"])?;
    match projection_search(&ps, a.d, a.trials, &schedule, a.window, &mut rng) {
        Ok(res) => {
            for t in &res.trials {
                search.row(vec![t.index.to_string(), opt(t.score()), t.report.verdict.to_string()]);
            }
            run.write_table("search.csv", &search)?;
            let best = res.best();
            separation_rows(&run, "separation.csv", &best.report)?;
            let g = best.projection.group_element();
            let matrix: Vec<Vec<[f64; 2]>> = (0..g.dim())
                .map(|i| (0..g.dim()).map(|j| [g.entry(i, j).re, g.entry(i, j).im]).collect())
                .collect();
            let tally = |v: Discreteness| res.trials.iter().filter(|t| t.report.verdict == v).count();
            run.write_summary(json!({
                "verdict": best.report.verdict,
                "best_trial": res.best_index,
                "score": best.score(),
                "best_report": report_json(&best.report),
                "best_matrix": matrix,
                "matrix_layout": "row-major [re, im]; the projection keeps the first d rows",
                "n": ps.dim(),
                "d": a.d,
                "field": ps.field(),
                "verdict_counts": {
                    "DiscreteLooking": tally(Discreteness::DiscreteLooking),
                    "DenseLooking": tally(Discreteness::DenseLooking),
                    "Inconclusive": tally(Discreteness::Inconclusive),
                },
            }))?;
            Ok(Outcome::Positive)
        }
        Err(Error::NoViableProjection { trials, reports }) => {
            for (i, r) in reports.iter().enumerate() {
                search.row(vec![i.to_string(), String::new(), r.verdict.to_string()]);
            }
            run.write_table("search.csv", &search)?;
            run.write_summary(json!({
                "verdict": "NoViableProjection",
                "trials": trials,
                "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
            }))?;
            Ok(Outcome::Negative(format!(
                "no viable projection in {trials} trials: no window held two distinct points"
            )))
        }
        Err(e) => Err(e),
    }
}

pub fn series(a: &SeriesArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "series", seed, a)?;
    let ps = load_point_set(&a.input)?;
    let nonzero = ps.norms().into_iter().filter(|&r| r >= ORIGIN_TOL).count();
    let checkpoints = if a.checkpoints.is_empty() {
        default_checkpoints(nonzero)
    } else {
        a.checkpoints.clone()
    };
    let mut table = run.table(&["K", "radius", "partial_sum", "s"])?;
    let mut results = Vec::new();
    for &s in &a.s {
        let diag = partial_sums(&ps, s, &checkpoints)?;
        for p in &diag.partial_sums {
            table.row(vec![p.k.to_string(), fmt_f64(p.radius), fmt_f64(p.partial_sum), fmt_f64(s)]);
        }
        results.push(json!({
            "s": s,
            "verdict": diag.verdict,
            "rho_hat": diag.rho_hat,
            "tail_bound_estimate": diag.tail_bound_estimate,
            "excluded_origin": diag.excluded_origin,
            "final_partial_sum": diag.partial_sums.last().map(|p| p.partial_sum),
        }));
    }
    run.write_table("series.csv", &table)?;
    run.write_summary(json!({ "series": results }))?;
    Ok(Outcome::Positive)
}

pub fn capmeasure(a: &CapArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "capmeasure", seed, a)?;
    let mut rng = RngStream::new(seed, 0);
    let mut table = run.table(&["k", "m", "epsilon", "samples", "mc_estimate", "mc_stderr", "exact_value"])?;
    let mut rows = Vec::new();
    let mut disagreements = 0;
    for &eps in &a.eps {
        let est = cap_measure_mc(a.k, a.m, eps, a.samples, &mut rng)?;
        table.row(vec![
            a.k.to_string(),
            a.m.to_string(),
            fmt_f64(eps),
            a.samples.to_string(),
            fmt_f64(est.mc_estimate),
            fmt_f64(est.mc_stderr),
            fmt_f64(est.exact_value),
        ]);
        let agrees = est.agrees_within(CAP_SIGMAS);
        disagreements += usize::from(!agrees);
        rows.push(json!({
            "epsilon": eps,
            "mc_estimate": est.mc_estimate,
            "exact_value": est.exact_value,
            "deviation_sigmas": est.deviation(),
            "agrees": agrees,
        }));
    }
    run.write_table("capmeasure.csv", &table)?;

    let mut small: Vec<f64> = a.eps.iter().copied().filter(|&e| e > 0.0 && e <= 0.5).collect();
    small.sort_by(|x, y| y.total_cmp(x));
    small.dedup();
    let fit = if small.len() >= 4 {
        let f = cap_scaling_fit(a.k, a.m, &small, CapSource::Exact, &mut rng)?;
        let (lo, hi) = f.scaled_range();
        json!({
            "eps_grid": f.eps_grid,
            "slope": f.slope,
            "slope_stderr": f.slope_stderr,
            "limit_constant": f.limit_constant,
            "ratio_trend": f.ratio_trend,
            "scaled_min": lo,
            "scaled_max": hi,
        })
    } else {
        Value::Null
    };
    run.write_summary(json!({
        "k": a.k,
        "m": a.m,
        "sigmas": CAP_SIGMAS,
        "estimates": rows,
        "exact_scaling_fit": fit,
    }))?;
    if disagreements > 0 {
        return Ok(Outcome::Negative(format!(
            "{disagreements} estimate(s) differ from the exact value by more than {CAP_SIGMAS} standard errors"
        )));
    }
    Ok(Outcome::Positive)
}

pub fn split(a: &SplitArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "split", seed, a)?;
    let ps = load_point_set(&a.input)?;
    let sr = alpha_split(&ps)?;
    let echo = run.echo()?;
    let mut pairing = sr.pairing.clone();
    pairing.target = pairing.target.with_provenance(echo.clone());
    save_paired(&pairing, out, "split", &echo)?;
    let ver = verify_split_bounds(&sr);

    let factors = if ps.is_empty() {
        Value::Null
    } else {
        let schedule = schedule_for(&ps, &a.schedule);
        let (first, second) = split_projections_discrete(&sr, &schedule, a.window)?;
        separation_rows(&run, "split_first_factor.csv", &first)?;
        separation_rows(&run, "split_second_factor.csv", &second)?;
        json!({ "first": report_json(&first), "second": report_json(&second) })
    };
    run.write_summary(json!({
        "forward_ok": ver.forward_ok,
        "backward_ok": ver.backward_ok,
        "max_forward_ratio": ver.max_forward_ratio,
        "max_backward_ratio": ver.max_backward_ratio,
        "witness_count": ver.witnesses.len(),
        "witnesses": ver.witnesses.iter().take(MAX_WITNESSES).collect::<Vec<_>>(),
        "adjustments": sr.adjustments.len(),
        "factor_reports": factors,
    }))?;
    if !(ver.forward_ok && ver.backward_ok) {
        return Ok(Outcome::Negative(format!("{} pair(s) violate a displacement bound", ver.witnesses.len())));
    }
    Ok(Outcome::Positive)
}

pub fn haartest(a: &HaarArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "haartest", seed, a)?;
    let mut rng = RngStream::new(seed, 0);
    let (acc, residual) = haar_entry_moment(a.field, a.n, a.samples, &mut rng)?;
    let ks = haar_left_invariance(a.field, a.n, a.ks_samples, KS_ALPHA, &mut rng)?;
    let expected = 1.0 / a.n as f64;
    let moment_ok = (acc.mean - expected).abs() <= HAAR_SIGMAS * acc.stderr();
    let unitary_ok = residual <= UNITARITY_TOL;

    let mut table = run.table(&["statistic", "value", "reference", "tolerance"])?;
    table.row(vec![
        "mean_abs_u11_sq".into(),
        fmt_f64(acc.mean),
        fmt_f64(expected),
        fmt_f64(HAAR_SIGMAS * acc.stderr()),
    ]);
    table.row(vec!["max_unitarity_residual".into(), fmt_f64(residual), fmt_f64(0.0), fmt_f64(UNITARITY_TOL)]);
    table.row(vec!["ks_left_invariance".into(), fmt_f64(ks.statistic), fmt_f64(0.0), fmt_f64(ks.critical)]);
    run.write_table("haartest.csv", &table)?;
    run.write_summary(json!({
        "samples": acc.count,
        "mean_abs_u11_sq": acc.mean,
        "stderr": acc.stderr(),
        "expected": expected,
        "moment_ok": moment_ok,
        "max_unitarity_residual": residual,
        "unitarity_ok": unitary_ok,
        "ks": ks,
    }))?;
    let failures: Vec<&str> = [(moment_ok, "moment"), (unitary_ok, "unitarity"), (ks.passes, "left invariance")]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| name)
        .collect();
    if failures.is_empty() {
        Ok(Outcome::Positive)
    } else {
        Ok(Outcome::Negative(format!("failed: {}", failures.join(", "))))
    }
}

pub fn skr(a: &SkrArgs, seed: u64, out: &Path) -> Result<Outcome> {
    let run = Run::new(out, "skr", seed, a)?;
    let ps = load_point_set(&a.input)?;
    let mut rng = RngStream::new(seed, 0);
    let mut table = run.table(&["index", "norm", "samples", "mc_estimate", "mc_stderr", "exact_value"])?;
    let mut rhs = 0.0;
    let mut worst: f64 = 0.0;
    for (i, v) in ps.points().iter().enumerate() {
        let est = skr_probability_mc(v, a.r, a.d, a.trials, &mut rng)?;
        rhs += est.exact_value;
        worst = worst.max(est.deviation());
        table.row(vec![
            i.to_string(),
            fmt_f64(v.norm()),
            est.samples.to_string(),
            fmt_f64(est.mc_estimate),
            fmt_f64(est.mc_stderr),
            fmt_f64(est.exact_value),
        ]);
    }
    run.write_table("skr.csv", &table)?;
    let counting = match a.threshold {
        Some(n) => Some(counting_inequality_experiment(&ps, a.d, a.r, n, a.trials, &mut rng)?),
        None => None,
    };
    run.write_summary(json!({
        "points": ps.len(),
        "sum_exact": rhs,
        "max_deviation_sigmas": worst,
        "counting_inequality": counting,
    }))?;
    match counting {
        Some(c) if !c.holds => Ok(Outcome::Negative(format!(
            "counting inequality fails: lhs {} > rhs {}",
            c.lhs, c.rhs
        ))),
        _ => Ok(Outcome::Positive),
    }
}
