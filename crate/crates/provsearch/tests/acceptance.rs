//! Acceptance checks, one line of output per criterion.
//!
//! Runs without the libtest harness so each check prints `PASS` or `FAIL`
//! with a short measurement. Exits non-zero if any check fails.

mod common;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use provsearch_core::corpus::augment;
use provsearch_core::embedding::{embed_local, l2_normalize, EmbeddingVector};
use provsearch_core::eval::{
    completeness, display_percent, load_ratings_csv, load_suite, out_of_scope_score, render_report, run_suite, Category,
    EvaluationReport, ReportFormat,
};
use provsearch_core::index::{self, FlatIndex, IndexError};
use provsearch_core::pipeline::{parse_response, RetrievalConfig, SearchEngine, SearchOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> EmbeddingVector {
    loop {
        let raw: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        if let Ok(v) = l2_normalize(&raw) {
            return v;
        }
    }
}

fn linear_scan(rows: &[(String, EmbeddingVector)], q: &EmbeddingVector, k: usize) -> Vec<String> {
    let mut scored: Vec<(f32, &str)> = rows
        .iter()
        .map(|(id, v)| (v.as_slice().iter().zip(q.as_slice()).fold(0.0f32, |s, (a, b)| s + a * b), id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

fn index_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut queries = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<(String, EmbeddingVector)> = Vec::with_capacity(1000);
        for i in 0..1000 {
            // A few exact duplicates exercise the tie rule.
            let v = if i % 50 == 49 { rows[i - 7].1.clone() } else { random_unit(&mut rng, 64) };
            rows.push((format!("id-{:04}", rng.gen_range(0..10_000)) + &format!("-{i}"), v));
        }
        let mut idx = FlatIndex::new(64).map_err(|e| e.to_string())?;
        for (id, v) in &rows {
            idx.add(id.clone(), v).map_err(|e| e.to_string())?;
        }
        for _ in 0..5 {
            let q = random_unit(&mut rng, 64);
            let got: Vec<String> = idx.search(&q, 10).map_err(|e| e.to_string())?.into_iter().map(|h| h.record_id).collect();
            ensure!(got == linear_scan(&rows, &q, 10), "seed {seed}: id sequence differs from linear scan");
            queries += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("50 corpora x 1000 x 64, {queries} queries identical, {secs:.2} s"))
}

fn normalization_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let dim = rng.gen_range(2..=128);
        let raw: Vec<f32> = (0..dim).map(|_| rng.gen_range(-100.0f32..100.0)).collect();
        let v = l2_normalize(&raw).map_err(|e| e.to_string())?;
        worst = worst.max((v.norm() - 1.0).abs());
        let again = l2_normalize(v.as_slice()).map_err(|e| e.to_string())?;
        let drift = v.as_slice().iter().zip(again.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        ensure!(drift < 1e-6, "idempotence drift {drift}");
    }
    ensure!(worst < 1e-6, "norm error {worst}");
    let v = l2_normalize(&[3.0, 4.0]).map_err(|e| e.to_string())?;
    ensure!((v.as_slice()[0] - 0.6).abs() < 1e-7 && (v.as_slice()[1] - 0.8).abs() < 1e-7, "(3,4) -> {:?}", v.as_slice());
    Ok(format!("10000 vectors, max |norm-1| = {worst:.2e}, (3,4) -> (0.6,0.8)"))
}

fn persistence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut idx = FlatIndex::new(96).map_err(|e| e.to_string())?;
    for i in 0..800 {
        idx.add(format!("rec-{i}"), &random_unit(&mut rng, 96)).map_err(|e| e.to_string())?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("x.pvix");
    index::save(&idx, &path).map_err(|e| e.to_string())?;
    let loaded = index::load(&path).map_err(|e| e.to_string())?;
    for i in 0..100 {
        let q = random_unit(&mut rng, 96);
        let a = idx.search(&q, 10).map_err(|e| e.to_string())?;
        let b = loaded.search(&q, 10).map_err(|e| e.to_string())?;
        let same = a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| x.record_id == y.record_id && x.score.to_bits() == y.score.to_bits());
        ensure!(same, "query {i}: results differ after reload");
    }
    let good = std::fs::read(&path).map_err(|e| e.to_string())?;
    let mut bad = good.clone();
    bad[..4].copy_from_slice(b"NOPE");
    std::fs::write(&path, &bad).map_err(|e| e.to_string())?;
    ensure!(matches!(index::load(&path), Err(IndexError::BadMagic)), "bad magic not detected");
    std::fs::write(&path, &good[..good.len() - 4]).map_err(|e| e.to_string())?;
    ensure!(
        matches!(index::load(&path), Err(IndexError::TruncatedFile | IndexError::ChecksumMismatch { .. })),
        "truncation not detected"
    );
    Ok("100 queries bit-identical after reload; bad magic and truncation rejected".into())
}

fn golden_augmentation() -> Check {
    let corpus = provsearch::commands::load_corpus(&common::fixtures().join("desk_corpus.csv")).map_err(|e| e.to_string())?;
    let record = corpus.get("GS-001").ok_or("fixture record GS-001 missing")?;
    let text = augment(record).text;
    let golden = std::fs::read_to_string(common::fixtures().join("golden/dix_augmented.txt")).map_err(|e| e.to_string())?;
    ensure!(text == golden, "rendered text differs from golden file");
    for needle in ["Auction House: Fischer", "Dix, Otto", "76 cm x 70 cm", "http://digi.ub.uni-heidelberg.de/diglit/fischer1939_06_30"] {
        ensure!(text.contains(needle), "missing {needle:?}");
    }
    Ok(format!("byte-exact, {} bytes", text.len()))
}

fn ids(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn metric_unit_suite(report: &EvaluationReport) -> Check {
    ensure!(completeness(&ids(&["a", "b"]), &ids(&["a", "b", "c", "d"])) == Some(100.0), "plus-extras rule");
    let c = completeness(&ids(&["a", "b", "c"]), &ids(&["a", "b"])).ok_or("no value")?;
    ensure!(display_percent(c) == "66.7", "got {}", display_percent(c));
    ensure!(out_of_scope_score(Category::OutOfScope, &BTreeSet::new()).ok() == Some(100.0), "out-of-scope empty");
    let mut worst = 0.0f64;
    for row in &report.categories {
        let vals: Vec<f64> =
            report.queries.iter().filter(|q| q.category == row.category).filter_map(|q| q.retrieval_completeness).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        worst = worst.max((row.mean_retrieval_completeness.unwrap_or(f64::NAN) - mean).abs());
    }
    ensure!(worst < 1e-9, "category mean off by {worst}");
    Ok(format!("100 / 66.7 / 100, category means recomputed within {worst:.1e}"))
}

fn stub_engine() -> Result<SearchEngine, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    Ok(common::stub_state(dir.path()).stub_engine)
}

fn run_fixture_suite() -> Result<EvaluationReport, String> {
    let suite = load_suite(std::fs::File::open(common::fixtures().join("eval_suite.jsonl")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let ratings = load_ratings_csv(std::fs::File::open(common::fixtures().join("ratings.csv")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    run_suite(&suite, &stub_engine()?, &RetrievalConfig::default(), &ratings, 4).map_err(|e| e.to_string())
}

fn end_to_end_suite(report: &EvaluationReport, secs: f64) -> Check {
    ensure!(secs < 30.0, "suite took {secs:.1} s");
    let counts: Vec<(Category, usize)> = report.categories.iter().map(|r| (r.category, r.query_count)).collect();
    let want = [(Category::Specific, 8), (Category::VagueOrBroad, 7), (Category::Multilingual, 2), (Category::OutOfScope, 3)];
    ensure!(counts == want, "category counts {counts:?}");
    let specific = report.category(Category::Specific).ok_or("no Specific row")?;
    ensure!(specific.mean_retrieval_completeness == Some(100.0), "Specific retrieval {:?}", specific.mean_retrieval_completeness);
    let oos = report.category(Category::OutOfScope).ok_or("no out-of-scope row")?;
    ensure!(oos.mean_output_completeness == Some(100.0), "out-of-scope score {:?}", oos.mean_output_completeness);
    let table = String::from_utf8(render_report(report, ReportFormat::TableText).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    for h in ["Query Category", "Number of Queries", "Average Completeness (%)", "Average Output Rating"] {
        ensure!(table.contains(h), "missing header {h:?}");
    }
    let row = table.lines().find(|l| l.starts_with("Specific")).ok_or("no Specific line")?;
    let cells: Vec<&str> = row.split(" | ").map(str::trim).collect();
    ensure!(cells[2] == "100.0", "completeness cell {:?}", cells[2]);
    ensure!(cells[3].split_once('.').is_some_and(|(_, d)| d.len() == 2), "rating cell {:?}", cells[3]);
    Ok(format!("20 queries in {secs:.2} s; Specific retrieval 100.0, out-of-scope 100.0, rating {}", cells[3]))
}

fn adversarial_payload(rng: &mut impl Rng, context: &[String]) -> String {
    let id = |rng: &mut dyn rand::RngCore| -> String {
        match rng.gen_range(0..5) {
            0 => context[rng.gen_range(0..context.len())].clone(),
            1 => format!("GS-{:03}", rng.gen_range(11..1000)),
            2 => (0..rng.gen_range(1..10)).map(|_| rng.gen_range(b'!'..=b'~') as char).collect(),
            3 => format!("[record_id: FAKE-{}]", rng.gen_range(0..100)),
            _ => context[0].to_lowercase(),
        }
    };
    let n = rng.gen_range(0..6);
    let objects: Vec<Value> = (0..n).map(|_| json!({"record_id": id(rng), "title": "x"})).collect();
    let excl: Vec<Value> = (0..rng.gen_range(0..4)).map(|_| json!({"record_id": id(rng), "reason": "y"})).collect();
    let labels: Vec<Value> =
        (0..rng.gen_range(0..12)).map(|_| json!({"record_id": id(rng), "label": "Highly Relevant"})).collect();
    let body = json!({"classification": "object-based", "relevant_objects": objects, "exclusions": excl, "relevance_labels": labels});
    match rng.gen_range(0..3) {
        0 => format!("Sure.\n```json\n{body}\n```"),
        1 => format!("{body}"),
        _ => format!("Results for GS-777 and GS-999:\n```\n{body}\n```\nAlso see GS-555."),
    }
}

fn no_fabrication() -> Check {
    let context: Vec<String> = (1..=10).map(|i| format!("GS-{i:03}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut parsed = 0;
    let mut dropped = 0;
    for i in 0..100 {
        let raw = adversarial_payload(&mut rng, &context);
        let Ok(result) = parse_response(&raw, &context) else { continue };
        parsed += 1;
        dropped += result.warnings.len();
        for id in result.final_ids() {
            ensure!(context.contains(&id), "payload {i}: fabricated {id:?} survived");
        }
        for id in result.mentioned_ids() {
            ensure!(context.iter().any(|c| c == id), "payload {i}: fabricated {id:?} mentioned");
        }
    }
    ensure!(parsed == 100, "only {parsed} payloads parsed");
    Ok(format!("100 payloads, result ids within context every time, {dropped} warnings"))
}

fn probe_bits() -> String {
    ["Were there any paintings by Otto Dix sold at Fischer in 1939?", "Max Liebermann 签名的炭笔素描", "Картины"]
        .iter()
        .flat_map(|t| embed_local(t, 3072).into_inner())
        .map(|x| format!("{:08x}", x.to_bits()))
        .collect()
}

fn determinism(first: &EvaluationReport) -> Check {
    let mut a = first.clone();
    let mut b = run_fixture_suite()?;
    a.generated_at.clear();
    b.generated_at.clear();
    let ja = render_report(&a, ReportFormat::Json).map_err(|e| e.to_string())?;
    let jb = render_report(&b, ReportFormat::Json).map_err(|e| e.to_string())?;
    ensure!(ja == jb, "report JSON differs between runs");
    let out = std::process::Command::new(std::env::current_exe().map_err(|e| e.to_string())?)
        .env("PROVSEARCH_ACCEPTANCE_PROBE", "1")
        .output()
        .map_err(|e| e.to_string())?;
    let child = String::from_utf8_lossy(&out.stdout).trim().to_string();
    ensure!(child == probe_bits(), "embedder bits differ across processes");
    Ok(format!("report JSON identical ({} bytes); embedder bits identical across processes", ja.len()))
}

fn service_contract() -> Check {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let base = common::spawn(common::stub_state(dir.path())).await;
        let c = reqwest::Client::new();
        let h = c.get(format!("{base}/healthz")).send().await.map_err(|e| e.to_string())?;
        ensure!(h.status() == 200, "healthz {}", h.status());
        let q = "Were there any paintings by Otto Dix sold at Fischer in 1939?";
        let r = c.post(format!("{base}/api/search")).json(&json!({"query": q, "stub": true})).send().await.map_err(|e| e.to_string())?;
        ensure!(r.status() == 200, "search {}", r.status());
        let o: SearchOutcome = r.json().await.map_err(|e| e.to_string())?;
        ensure!(o.final_ids().contains(&"GS-001".to_string()), "Dix record not returned");
        let r = c.post(format!("{base}/api/ratings")).json(&json!({"query_id": "S01", "rating": 5})).send().await.map_err(|e| e.to_string())?;
        ensure!(r.status() == 422, "rating 5 gave {}", r.status());
        let r = c.post(format!("{base}/api/ratings")).json(&json!({"query_id": "S01", "rating": 3})).send().await.map_err(|e| e.to_string())?;
        ensure!(r.status() == 201, "rating 3 gave {}", r.status());
        let handles: Vec<_> = (0..16)
            .map(|_| {
                let c = c.clone();
                let url = format!("{base}/api/search");
                tokio::spawn(async move {
                    let r = c.post(url).json(&json!({"query": q, "stub": true})).send().await.ok()?;
                    (r.status() == 200).then_some(())?;
                    r.json::<SearchOutcome>().await.ok()
                })
            })
            .collect();
        let mut ok = 0;
        for h in handles {
            if let Ok(Some(out)) = h.await {
                ensure!(out.result == o.result, "concurrent result differs");
                ok += 1;
            }
        }
        ensure!(ok == 16, "{ok}/16 concurrent searches succeeded");
        Ok("healthz, stub search, rating 5 -> 422, 16 concurrent searches".to_string())
    })
}

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
    });
    let ms = start.elapsed().as_millis();
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail} [{ms} ms]");
            true
        }
        Err(why) => {
            println!("FAIL  {name}: {why} [{ms} ms]");
            false
        }
    }
}

fn main() {
    if std::env::var_os("PROVSEARCH_ACCEPTANCE_PROBE").is_some() {
        println!("{}", probe_bits());
        return;
    }
    let start = Instant::now();
    let suite = run_fixture_suite();
    let suite_secs = start.elapsed().as_secs_f64();

    let mut results = vec![
        run("index-oracle equivalence", index_oracle_equivalence),
        run("normalization suite", normalization_suite),
        run("persistence", persistence),
        run("golden augmentation", golden_augmentation),
    ];
    match &suite {
        Ok(report) => {
            results.push(run("metric unit suite", || metric_unit_suite(report)));
            results.push(run("end-to-end stub suite", || end_to_end_suite(report, suite_secs)));
        }
        Err(e) => {
            results.push(run("metric unit suite", || Err(format!("suite failed: {e}"))));
            results.push(run("end-to-end stub suite", || Err(format!("suite failed: {e}"))));
        }
    }
    results.push(run("no-fabrication enforcement", no_fabrication));
    results.push(match &suite {
        Ok(report) => run("determinism", || determinism(report)),
        Err(e) => run("determinism", || Err(format!("suite failed: {e}"))),
    });
    results.push(run("service contract", service_contract));

    let passed = results.iter().filter(|ok| **ok).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
