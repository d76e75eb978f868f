use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tameproj"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn generate_lattice_counts_and_header() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["generate", "--kind", "lattice", "--dim", "2", "--field", "real", "--basis", "e1,e2", "--radius", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("points.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 82);
    let header: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["count"], 81);
    assert!(header["provenance"].as_str().unwrap().contains("\"seed\":0"));
    assert_eq!(summary(tmp.path())["run"]["config"]["radius"], 5.0);
}

#[test]
fn generate_power_norms() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(tmp.path(), &["generate", "--kind", "power", "--rho", "2", "--count", "100"])), 0);
    let text = std::fs::read_to_string(tmp.path().join("points.jsonl")).unwrap();
    for (k, line) in text.lines().skip(1).enumerate() {
        let c: Vec<f64> = serde_json::from_str(line).unwrap();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - ((k + 1) as f64).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["generate", "--kind", "lattice", "--dim", "2"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--radius"));
    assert_eq!(code(&run(tmp.path(), &["generate", "--kind", "power", "--rho", "2"])), 2);
    assert_eq!(code(&run(tmp.path(), &["generate", "--kind", "nonsense"])), 2);
    assert_eq!(code(&run(tmp.path(), &["generate", "--kind", "lattice", "--basis", "e3", "--radius", "2"])), 2);
    assert_eq!(code(&run(tmp.path(), &["capmeasure", "--k", "1", "--m", "1", "--eps", "1.5", "--samples", "1000"])), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_tameproj"))
        .env("TAMEPROJ_THREADS", "zero")
        .args(["--out", tmp.path().to_str().unwrap(), "haartest", "--samples", "10"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_input_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.jsonl");
    assert_eq!(code(&run(tmp.path(), &["series", "--input", missing.to_str().unwrap()])), 4);
}

#[test]
fn project_rank_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(
        code(&run(&gen, &["generate", "--kind", "lattice", "--field", "complex", "--dim", "2", "--basis", "e1", "--radius", "300"])),
        0
    );
    let input = gen.join("points.jsonl");
    let out = tmp.path().join("proj");
    let o = run(&out, &["project", "--input", input.to_str().unwrap(), "--d", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["result"]["verdict"], "DiscreteLooking");
    let matrix = s["result"]["best_matrix"].as_array().unwrap();
    assert_eq!(matrix.len(), 2);
    let rows = data_lines(&out.join("search.csv"));
    assert_eq!(rows[0], "trial,score_at_R_max,verdict");
    assert_eq!(rows.len(), 17);

    assert_eq!(code(&run(&out, &["project", "--input", input.to_str().unwrap(), "--d", "2"])), 2);
}

#[test]
fn project_without_gaps_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("one.jsonl");
    std::fs::write(
        &input,
        "{\"field\":\"real\",\"n\":2,\"count\":1,\"provenance\":\"\",\"truncation_radius\":null}\n[1.0,1.0]\n",
    )
    .unwrap();
    let out = tmp.path().join("proj");
    let o = run(&out, &["project", "--input", input.to_str().unwrap(), "--d", "1", "--schedule", "1,2,4", "--trials", "3"]);
    assert_eq!(code(&o), 3);
    assert_eq!(summary(&out)["result"]["verdict"], "NoViableProjection");
}

#[test]
fn capmeasure_arcsine() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["capmeasure", "--k", "1", "--m", "1", "--eps", "0.5", "--samples", "1000000"]);
    assert_eq!(code(&o), 0);
    let rows = data_lines(&tmp.path().join("capmeasure.csv"));
    assert_eq!(rows[0], "k,m,epsilon,samples,mc_estimate,mc_stderr,exact_value");
    let cells: Vec<f64> = rows[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cells[6] - 1.0 / 3.0).abs() < 1e-14);
    assert!((cells[4] - 1.0 / 3.0).abs() < 5.0 * (1.0f64 / 3.0 * 2.0 / 3.0 / 1e6).sqrt());
}

#[test]
fn series_on_integer_line() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(code(&run(&gen, &["generate", "--kind", "lattice", "--dim", "1", "--basis", "e1", "--radius", "100"])), 0);
    let out = tmp.path().join("series");
    let input = gen.join("points.jsonl");
    assert_eq!(code(&run(&out, &["series", "--input", input.to_str().unwrap(), "--s", "2"])), 0);
    let want: f64 = 2.0 * (1..=100).map(|m| (m as f64).powi(-2)).sum::<f64>();
    let rows = data_lines(&out.join("series.csv"));
    assert_eq!(rows[0], "K,radius,partial_sum,s");
    let last: Vec<&str> = rows.last().unwrap().split(',').collect();
    assert_eq!(last[0], "200");
    assert!((last[2].parse::<f64>().unwrap() - want).abs() < 1e-12);
    assert_eq!(summary(&out)["result"]["series"][0]["excluded_origin"], 1);
}

#[test]
fn split_bounds_hold() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(code(&run(&gen, &["generate", "--kind", "power", "--field", "complex", "--dim", "3", "--rho", "2", "--count", "300"])), 0);
    let out = tmp.path().join("split");
    let input = gen.join("points.jsonl");
    assert_eq!(code(&run(&out, &["split", "--input", input.to_str().unwrap()])), 0);
    let s = summary(&out);
    assert_eq!(s["result"]["forward_ok"], true);
    assert_eq!(s["result"]["backward_ok"], true);
    for name in ["split_source.jsonl", "split_target.jsonl", "split_pairing.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(data_lines(&out.join("split_pairing.csv"))[0], "source_index,target_index");
}

#[test]
fn split_rejects_real_input() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(code(&run(&gen, &["generate", "--kind", "lattice", "--radius", "2"])), 0);
    let input = gen.join("points.jsonl");
    assert_eq!(code(&run(&tmp.path().join("s"), &["split", "--input", input.to_str().unwrap()])), 2);
}

#[test]
fn haartest_and_skr() {
    let tmp = tempfile::tempdir().unwrap();
    let h = tmp.path().join("h");
    assert_eq!(code(&run(&h, &["haartest", "--n", "2", "--samples", "20000", "--ks-samples", "2000"])), 0);
    assert_eq!(summary(&h)["result"]["unitarity_ok"], true);

    let gen = tmp.path().join("gen");
    assert_eq!(code(&run(&gen, &["generate", "--kind", "lattice", "--field", "complex", "--dim", "2", "--rank", "2", "--radius", "3"])), 0);
    let input = gen.join("points.jsonl");
    let skr = tmp.path().join("skr");
    let o = run(&skr, &["skr", "--input", input.to_str().unwrap(), "--r", "1", "--d", "1", "--trials", "2000", "--threshold", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&skr)["result"]["counting_inequality"]["holds"], true);
    assert_eq!(data_lines(&skr.join("skr.csv"))[0], "index,norm,samples,mc_estimate,mc_stderr,exact_value");
}

#[test]
fn embed_and_perturb() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(code(&run(&gen, &["generate", "--kind", "lattice", "--field", "complex", "--dim", "2", "--basis", "e1", "--radius", "20"])), 0);
    let input = gen.join("points.jsonl");
    let emb = tmp.path().join("emb");
    assert_eq!(code(&run(&emb, &["generate", "--kind", "embed", "--input", input.to_str().unwrap()])), 0);
    assert_eq!(summary(&emb)["result"]["points"]["n"], 3);
    let per = tmp.path().join("per");
    assert_eq!(
        code(&run(&per, &["generate", "--kind", "perturbed", "--input", input.to_str().unwrap(), "--lambda", "0.3", "--k-const", "1"])),
        0
    );
    assert_eq!(data_lines(&per.join("perturbed_pairing.csv")).len(), 42);
    assert_eq!(
        code(&run(&per, &["generate", "--kind", "perturbed", "--input", input.to_str().unwrap(), "--lambda", "1.5", "--k-const", "1"])),
        2
    );
}
