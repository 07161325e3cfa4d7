//! Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
//! exits non-zero if any check fails.
//!
//! Runs offline: provider calls come from mocks or the committed cassettes.

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use quickcheck::{QuickCheck, TestResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veracity_core::credibility::{admit, priority};
use veracity_core::evidence::gather;
use veracity_core::gateway::{MockBackend, PageContent, REVERSE_IMAGE_PAGE_SIZE};
use veracity_core::images::ImageStore;
use veracity_core::response::{validate, RESPONSE_OPENER};
use veracity_core::retrieval::{apply_time_gate, relevance_verdict, score_relevance, PostEmbeddings};
use veracity_core::text::find_urls;
use veracity_core::{
    run_batch, BiasRating, FactualityRating, GatePolicy, Gateway, PipelineConfig, Post, Priority, ProviderKind,
    RetrievedPage, RunRecord, RunStatus, TimeGate,
};
use veracity_core::domain::ValidationFlag;
use veracity_eval::agreement::{weighted_kappa, Kappa, Weighting};
use veracity_eval::aggregate::summarize;
use veracity_eval::helpfulness::{classify_helpfulness, HelpfulnessClass};
use veracity_eval::replay::{load_dataset, overall_headline, DATASET_ENV};
use veracity_eval::rubric::{Coherence, Criterion, Explicitness, Fluency, IdentificationExistence, Rubric};
use veracity_eval::stats::{mann_whitney_exact, mann_whitney_normal, mann_whitney_u, spearman_rho, PValueMethod};
use veracity_eval::store::{AnnotationRecord, Phase};
use veracity_testkit as testkit;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Checked = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn post(text: &str, created_at: DateTime<Utc>) -> Post {
    Post {
        id: "p".into(),
        text: text.into(),
        images: vec![],
        created_at,
        author_name: "a".into(),
        author_screen_name: "a".into(),
        author_description: String::new(),
    }
}

fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap()
}

fn ranked_page(i: usize, main_text: String, published_minutes: Option<i64>) -> RetrievedPage {
    RetrievedPage {
        url: format!("https://a.example/{i}").parse().unwrap(),
        publisher_domain: "a.example".into(),
        title: String::new(),
        main_text,
        main_image: None,
        published_at: published_minutes.map(|m| epoch() + chrono::Duration::minutes(m)),
        text_relevance: 95.0,
        visual_relevance: None,
        priority: Priority::High,
    }
}

// ---------------------------------------------------------------- lattice

const FACTUALITY: [&str; 6] = ["very high", "high", "mostly factual", "mixed", "low", "very low"];
const BIAS: [&str; 11] = [
    "least biased",
    "left-center",
    "right-center",
    "left",
    "right",
    "extremely left",
    "extremely right",
    "pro-science",
    "questionable",
    "satire",
    "conspiracy-pseudoscience",
];

/// Closed-form rule written over labels rather than the enums.
fn lattice_oracle(f: &str, b: &str) -> Priority {
    let admitted = ["very high", "high", "mostly factual"].contains(&f)
        && ["least biased", "left-center", "right-center", "pro-science"].contains(&b);
    match (admitted, f, b) {
        (false, _, _) => Priority::Excluded,
        (true, "very high", "least biased" | "pro-science") => Priority::High,
        (true, "very high" | "high", _) => Priority::Medium,
        _ => Priority::Low,
    }
}

fn credibility_lattice() -> Checked {
    let start = Instant::now();
    let (mut total, mut admitted, mut high) = (0, 0, 0);
    for f in FACTUALITY {
        for b in BIAS {
            let fr: FactualityRating = f.parse().map_err(|e| format!("{f}: {e}"))?;
            let br: BiasRating = b.parse().map_err(|e| format!("{b}: {e}"))?;
            let expected = lattice_oracle(f, b);
            ensure!(priority(fr, br) == expected, "{f} / {b}: {:?} != {expected:?}", priority(fr, br));
            ensure!(admit(fr, br) == (expected != Priority::Excluded), "{f} / {b}: admit mismatch");
            total += 1;
            admitted += usize::from(admit(fr, br));
            high += usize::from(priority(fr, br) == Priority::High);
        }
    }
    let elapsed = start.elapsed();
    ensure!((total, admitted, high) == (66, 12, 2), "counts {total}/{admitted}/{high}");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("66 pairs, 12 admitted, 2 high, {elapsed:?} (< 1 s)"))
}

// -------------------------------------------------------------- relevance

async fn relevance_thresholds() -> Checked {
    let c = PipelineConfig::default();
    ensure!(relevance_verdict(90.0, None, false, &c).kept, "90 must be kept");
    ensure!(!relevance_verdict(89.99, None, false, &c).kept, "89.99 must be dropped");
    ensure!(relevance_verdict(95.0, None, true, &c).kept, "multimodal 95 must be kept");
    ensure!(!relevance_verdict(94.99, Some(0.6999), true, &c).kept, "94.99 / 0.6999 must be dropped");
    ensure!(relevance_verdict(0.0, Some(0.7), true, &c).kept, "visual 0.7 must be kept");

    // Unit-basis embedder: dot products of 90 and 89.99 against the post.
    let mut table = HashMap::new();
    table.insert("claim".to_string(), vec![10.0, 0.0, 0.0]);
    table.insert("at threshold".to_string(), vec![9.0, 0.0, 0.0]);
    table.insert("just below".to_string(), vec![8.999, 0.1, 0.0]);
    let gateway = Gateway::builder(MockBackend::new().text_vectors(table)).build();
    let session = gateway.session();
    let p = post("claim", epoch());
    let embeddings = PostEmbeddings {
        text: Some(session.embed_text("claim").await.map_err(|e| e.to_string())?),
        images: vec![],
    };
    for (text, expected, kept) in [("at threshold", 90.0, true), ("just below", 89.99, false)] {
        let page = PageContent {
            url: "https://a.example/x".parse().unwrap(),
            title: String::new(),
            main_text: text.into(),
            main_image: None,
            published_at: None,
        };
        let v = score_relevance(&session, &p, &embeddings, &page, &c)
            .await
            .map_err(|e| e.to_string())?;
        ensure!((v.text_relevance - expected).abs() < 1e-9, "{text}: relevance {}", v.text_relevance);
        ensure!(v.kept == kept, "{text}: kept = {}", v.kept);
    }

    let mut runner = TestRunner::new(ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let strategy = (0.0f64..120.0, proptest::option::of(0.0f64..1.0), 0.0f64..30.0, 0.0f64..0.5, any::<bool>());
    runner
        .run(&strategy, |(text, visual, dt, dv, multimodal)| {
            let before = relevance_verdict(text, visual, multimodal, &c);
            let after = relevance_verdict(text + dt, visual.map(|v| (v + dv).min(1.0)), multimodal, &c);
            prop_assert!(!before.kept || after.kept);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("90 kept, 89.99 dropped, OR-rule 95 / 0.7, monotone over 1000 pages".into())
}

// --------------------------------------------------------------- stopping

fn stopping_gateway(pattern: Arc<Vec<bool>>) -> Arc<Gateway> {
    Gateway::builder(MockBackend::new().chat(move |_, context| {
        let i: usize = context
            .split("Article content: Page ")
            .nth(1)?
            .split(' ')
            .next()?
            .parse()
            .ok()?;
        Some(if pattern[i] {
            format!("1. \"Page {i} says the claim is wrong.\"\n2. none")
        } else {
            "none.".into()
        })
    }))
    .build()
}

fn brute_force_stop(pattern: &[bool], needed: usize) -> usize {
    let mut seen = 0;
    for (i, refutes) in pattern.iter().enumerate() {
        seen += usize::from(*refutes);
        if seen >= needed {
            return i + 1;
        }
    }
    pattern.len()
}

async fn stopping_rule() -> Checked {
    const PAGES: usize = 8;
    let sequential = PipelineConfig::default();
    let speculative = PipelineConfig {
        speculative_lookahead: true,
        ..sequential.clone()
    };
    let pages: Vec<RetrievedPage> = (0..PAGES)
        .map(|i| ranked_page(i, format!("Page {i} says the claim is wrong."), None))
        .collect();
    let p = post("claim", epoch());
    for code in 0..(1u32 << PAGES) {
        let pattern: Vec<bool> = (0..PAGES).map(|i| code & (1 << i) != 0).collect();
        let expected = brute_force_stop(&pattern, sequential.refutation_stop_count);
        let mut outputs = Vec::new();
        for config in [&sequential, &speculative] {
            let session = stopping_gateway(Arc::new(pattern.clone())).session();
            let outcome = gather(&session, &pages, &p, &[], config).await;
            let counted = session
                .calls()
                .iter()
                .filter(|c| c.kind == ProviderKind::ChatLlm && !c.speculative)
                .count();
            ensure!(counted == expected, "{pattern:?}: {counted} calls, brute force {expected}");
            ensure!(outcome.results.len() == expected, "{pattern:?}: stop point {}", outcome.results.len());
            outputs.push(outcome);
        }
        ensure!(outputs[0] == outputs[1], "{pattern:?}: speculative output differs");
    }
    Ok(format!("{} patterns match brute force; speculative identical", 1u32 << PAGES))
}

// -------------------------------------------------------------- time gate

fn time_gate() -> Checked {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let strategy = (
        prop::collection::vec(proptest::option::of(-500i64..500), 0..40),
        -600i64..600,
        1i64..300,
    );
    runner
        .run(&strategy, |(stamps, t1, step)| {
            let pages: Vec<RetrievedPage> = stamps
                .iter()
                .enumerate()
                .map(|(i, s)| ranked_page(i, String::new(), *s))
                .collect();
            let kept = |cutoff: i64| -> Vec<RetrievedPage> {
                apply_time_gate(pages.clone(), &TimeGate::explicit(epoch() + chrono::Duration::minutes(cutoff)))
            };
            let t2 = t1 + step;
            let early = kept(t1);
            let late = kept(t2);
            prop_assert!(early.iter().all(|p| late.contains(p)));
            let cutoff = epoch() + chrono::Duration::minutes(t2);
            prop_assert!(late.iter().all(|p| p.published_at.is_some_and(|d| d < cutoff)));
            let expected = stamps.iter().filter(|s| s.is_some_and(|m| m < t2)).count();
            prop_assert_eq!(late.len(), expected);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 cases: kept(t1) within kept(t2), strict cutoff, undated dropped".into())
}

// ----------------------------------------------------------- determinism

/// Response JSON, or status and error for runs without a response. The
/// record itself carries the config hash, which parallelism changes.
fn response_json(record: &RunRecord) -> String {
    match &record.response {
        Some(r) => serde_json::to_string(r).expect("responses serialize"),
        None => serde_json::json!({"status": record.status, "error": record.error}).to_string(),
    }
}

async fn determinism() -> Checked {
    let posts: Vec<_> = testkit::scenarios().iter().map(testkit::raw_post).collect();
    let mut baseline: Option<Vec<String>> = None;
    for round in 0..10 {
        let pipeline = testkit::merged_replay_pipeline(PipelineConfig::default())?;
        let records = run_batch(&pipeline, posts.clone(), &GatePolicy::PostTime, 5).await;
        let outputs: Vec<String> = records.iter().map(response_json).collect();
        match &baseline {
            None => baseline = Some(outputs),
            Some(b) => ensure!(b == &outputs, "replay {round} differs"),
        }
    }
    let baseline = baseline.expect("ten rounds ran");
    for parallelism in [1, 5] {
        let config = PipelineConfig {
            parallelism,
            ..PipelineConfig::default()
        };
        let pipeline = testkit::merged_replay_pipeline(config)?;
        let records = run_batch(&pipeline, posts.clone(), &GatePolicy::PostTime, parallelism).await;
        let outputs: Vec<String> = records.iter().map(response_json).collect();
        ensure!(outputs == baseline, "parallelism {parallelism} differs");
    }
    Ok(format!("{} posts byte-identical over 10 replays and parallelism 1 / 5", posts.len()))
}

// ------------------------------------------------------- response contract

async fn response_contract() -> Checked {
    let mut evidence_path = 0;
    let mut flagged = 0;
    let mut rejected = 0;
    for scenario in testkit::scenarios() {
        let pipeline = testkit::replay_pipeline(&scenario.name, PipelineConfig::default())?;
        let record = pipeline.run_raw(testkit::raw_post(&scenario), &GatePolicy::PostTime).await;
        let name = &scenario.name;
        if record.status == RunStatus::Rejected {
            ensure!(record.response.is_none(), "{name}: rejected run carries a response");
            rejected += 1;
            continue;
        }
        ensure!(record.status == RunStatus::Completed, "{name}: status {:?}", record.status);
        let response = record.response.expect("completed runs carry a response");
        if response.lack_of_evidence {
            continue;
        }
        evidence_path += 1;
        ensure!(response.text.starts_with(RESPONSE_OPENER), "{name}: opener missing");
        let sources: Vec<String> = response.evidence_trail.iter().map(|e| e.source_url.to_string()).collect();
        ensure!(
            response.references.iter().all(|r| sources.contains(r)),
            "{name}: reference outside the evidence"
        );
        let check = validate(&response.text, &response.evidence_trail);
        ensure!(
            !check.flags.iter().any(|f| matches!(f, ValidationFlag::NumberedUrl { .. } | ValidationFlag::MissingOpener)),
            "{name}: format violation passed"
        );
        for (_, url) in find_urls(&response.text) {
            let supported = check.references.iter().any(|r| r.trim_end_matches('/') == url.trim_end_matches('/'));
            let reported = response
                .flags
                .iter()
                .any(|f| matches!(f, ValidationFlag::UnsupportedUrl { url: u } if u == url));
            ensure!(supported || reported, "{name}: {url} neither cited evidence nor flagged");
            flagged += usize::from(reported);
        }
    }
    ensure!(evidence_path > 0 && rejected > 0 && flagged > 0, "fixtures do not exercise the validator");

    let evidence = validate("x", &[]);
    ensure!(evidence.flags.contains(&ValidationFlag::MissingOpener), "missing opener not flagged");
    let numbered = validate("This tweet is false.\n1. https://a.example/x", &[]);
    ensure!(
        numbered.flags.iter().any(|f| matches!(f, ValidationFlag::NumberedUrl { .. })),
        "numbered URL not flagged"
    );
    Ok(format!(
        "{} fixtures: {evidence_path} evidence-path responses compliant, {flagged} unsupported URL flagged, {rejected} rejected",
        testkit::SCENARIO_COUNT
    ))
}

// ------------------------------------------------------------ helpfulness

fn partition_oracle(score: f64) -> TestResult {
    if !score.is_finite() {
        return TestResult::discard();
    }
    let expected = if score >= 0.35 {
        HelpfulnessClass::High
    } else if (0.05..0.25).contains(&score) {
        HelpfulnessClass::Average
    } else {
        HelpfulnessClass::Neither
    };
    TestResult::from_bool(classify_helpfulness(score) == expected)
}

fn helpfulness_partition() -> Checked {
    for (score, class) in [
        (0.35, HelpfulnessClass::High),
        (0.349_999_999, HelpfulnessClass::Neither),
        (0.25, HelpfulnessClass::Neither),
        (0.249_999_999, HelpfulnessClass::Average),
        (0.05, HelpfulnessClass::Average),
        (0.049_999_999, HelpfulnessClass::Neither),
    ] {
        ensure!(classify_helpfulness(score) == class, "{score} classified {:?}", classify_helpfulness(score));
    }
    let passed = QuickCheck::new()
        .tests(10_000)
        .max_tests(100_000)
        .quicktest(partition_oracle as fn(f64) -> TestResult)
        .map_err(|r| format!("counterexample: {r:?}"))?;
    let near = QuickCheck::new()
        .tests(10_000)
        .quicktest((|x: u32| partition_oracle(f64::from(x % 50_000) / 100_000.0)) as fn(u32) -> TestResult)
        .map_err(|r| format!("counterexample: {r:?}"))?;
    ensure!(passed >= 10_000 && near >= 10_000, "only {passed} / {near} cases ran");
    Ok(format!("boundaries 0.35 / 0.25 / 0.05 exact; {passed} random + {near} near-boundary scores"))
}

// ------------------------------------------------------------- statistics

fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let smaller = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn rubric(overall: u8) -> Rubric {
    Rubric {
        explicitness: Explicitness::Explicit,
        identification_existence: IdentificationExistence::CorrectOnly,
        identification_comprehensiveness: 4,
        explanation_accuracy: 4,
        explanation_informativeness: overall,
        text_relevance: 8,
        text_factuality: 4,
        text_fluency: Fluency::High,
        text_coherence: Coherence::Fully,
        text_toxicity: false,
        references: vec![],
        overall,
    }
}

fn annotation(task: usize, annotator: usize, weight: f64, overall: u8) -> AnnotationRecord {
    AnnotationRecord {
        task_id: format!("t{task}"),
        annotator_id: format!("e{annotator}"),
        response_id: format!("t{task}-r0"),
        post_id: None,
        approach: Some("a".into()),
        labels: Default::default(),
        phase: Phase::Main,
        weight,
        rubric: rubric(overall),
        explanation: "x".into(),
        started_at: None,
        submitted_at: epoch(),
    }
}

fn statistics_oracles() -> Checked {
    // Linear-weighted kappa on confusion [[2,1,0],[0,2,1],[0,0,2]] is 5/7.
    let a = [0, 0, 0, 1, 1, 1, 2, 2];
    let b = [0, 0, 1, 1, 1, 2, 2, 2];
    let kappa = weighted_kappa(&a, &b, 3, Weighting::Linear).map_err(|e| e.to_string())?;
    let Kappa::Value(k) = kappa else {
        return Err("hand example reported NotApplicable".into());
    };
    ensure!((k - 5.0 / 7.0).abs() < 1e-9, "kappa {k}");
    ensure!(
        weighted_kappa(&[2, 2, 2], &[2, 2, 2], 3, Weighting::Linear).map_err(|e| e.to_string())? == Kappa::NotApplicable,
        "degenerate marginals must be NotApplicable"
    );

    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    ensure!(mw.u == 0.0 && (mw.p - 0.1).abs() < 1e-12, "U = {}, p = {}", mw.u, mw.p);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..10.0)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..10.0) + 1.5).collect();
        let exact = mann_whitney_exact(&x, &y).map_err(|e| e.to_string())?;
        ensure!(exact.method == PValueMethod::Exact, "n = 8 must use the exact method");
        let normal = mann_whitney_normal(&x, &y).map_err(|e| e.to_string())?;
        worst = worst.max((exact.p - normal.p).abs());
    }
    ensure!(worst < 0.02, "exact vs normal differ by {worst}");

    let mut worst_rho: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
        let Ok(rho) = spearman_rho(&x, &y) else { continue };
        worst_rho = worst_rho.max((rho - brute_pearson(&brute_ranks(&x), &brute_ranks(&y))).abs());
    }
    ensure!(worst_rho < 1e-12, "spearman off by {worst_rho}");

    // Dual tasks at 0.5 each: sum w x = 4 + 3 + 4.5 + 3.5 + 4 + 10 = 29, sum w = 4.
    let records = vec![
        annotation(0, 1, 0.5, 8),
        annotation(0, 2, 0.5, 6),
        annotation(1, 1, 0.5, 9),
        annotation(1, 2, 0.5, 7),
        annotation(2, 1, 1.0, 4),
        annotation(3, 2, 1.0, 10),
    ];
    let summary = summarize(&records, Criterion::Overall).map_err(|e| e.to_string())?;
    let s = &summary[0].summary;
    let sd = (20.75f64 / 3.0).sqrt();
    ensure!(s.weight == 4.0 && s.mean == 7.25, "aggregate {} / {}", s.weight, s.mean);
    ensure!(s.sd.is_some_and(|v| (v - sd).abs() < 1e-12), "aggregate sd {:?}", s.sd);
    Ok(format!(
        "kappa 5/7 (tol 1e-9), U=0 p=0.1, |exact-normal| {worst:.4} (< 0.02), spearman (tol 1e-12), 0.5/0.5 aggregate exact"
    ))
}

// ------------------------------------------------------------ data replay

fn data_replay() -> Outcome {
    let records = match load_dataset() {
        Ok(Some(r)) => r,
        Ok(None) => return Outcome::Skip(format!("{DATASET_ENV} not set")),
        Err(e) => return Outcome::Fail(format!("loading dataset: {e}")),
    };
    let rows = match overall_headline(&records) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let expected = [(8.1, 2.0), (6.3, 2.0), (5.9, 2.7), (5.2, 2.1)];
    if rows.len() != expected.len() {
        return Outcome::Fail(format!("{} approaches, expected 4", rows.len()));
    }
    let mut summary = Vec::new();
    for (row, (mean, sd)) in rows.iter().zip(expected) {
        let got_sd = row.sd.unwrap_or(f64::NAN);
        summary.push(format!("{} {:.2}/{:.2}", row.approach, row.mean, got_sd));
        if (row.mean - mean).abs() > 0.05 || (got_sd - sd).abs() > 0.05 || got_sd.is_nan() {
            return Outcome::Fail(format!("{}: mean {:.3} sd {got_sd:.3}, expected {mean} / {sd} (tol 0.05)", row.approach, row.mean));
        }
    }
    Outcome::Pass(format!("means and SDs within 0.05: {}", summary.join(", ")))
}

// ----------------------------------------------------------------- config

async fn config_fidelity() -> Checked {
    let c = PipelineConfig::default();
    let snapshot = (
        c.queries_text_only,
        c.queries_with_images,
        c.max_links_same_priority,
        c.reverse_image_max_pages,
        c.text_relevance_threshold,
        c.multimodal_text_threshold,
        c.visual_threshold,
        c.max_page_chars,
        c.refutation_stop_count,
        c.parallelism,
    );
    ensure!(snapshot == (3, 5, 10, 5, 90.0, 95.0, 0.7, 20_000, 2, 5), "default config {snapshot:?}");
    ensure!(REVERSE_IMAGE_PAGE_SIZE == 10, "page size {REVERSE_IMAGE_PAGE_SIZE}");

    // Five pages of ten results cap reverse image search at 50 links.
    let store = Arc::new(ImageStore::new());
    let image = store
        .insert("img.png", veracity_core::gateway::tiny_png(1))
        .map_err(|e| e.to_string())?;
    let session = Gateway::builder(MockBackend::new().reverse_image_pages(9, 10))
        .images(store)
        .build()
        .session();
    let links = session
        .search_reverse_image(&image, c.reverse_image_max_pages)
        .await
        .map_err(|e| e.to_string())?;
    ensure!(links.len() == 50, "{} reverse image links", links.len());
    Ok("(3, 5, 10, 5 pages / 50 links, 90, 95, 0.7, 20000, 2, 5)".into())
}

// ----------------------------------------------------------------- runner

async fn timed<F: Future<Output = Checked>>(f: F) -> Outcome {
    match f.await {
        Ok(detail) => Outcome::Pass(detail),
        Err(detail) => Outcome::Fail(detail),
    }
}

#[tokio::main]
async fn main() {
    let start = Instant::now();
    let checks: Vec<(&str, Outcome)> = vec![
        ("credibility lattice", timed(async { credibility_lattice() }).await),
        ("relevance thresholds", timed(relevance_thresholds()).await),
        ("stopping rule", timed(stopping_rule()).await),
        ("time gate", timed(async { time_gate() }).await),
        ("determinism", timed(determinism()).await),
        ("response contract", timed(response_contract()).await),
        ("helpfulness partition", timed(async { helpfulness_partition() }).await),
        ("statistics oracles", timed(async { statistics_oracles() }).await),
        ("data replay", data_replay()),
        ("config fidelity", timed(config_fidelity()).await),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in checks.iter().enumerate() {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{:>2}] {name}: {detail}", i + 1);
    }
    let elapsed = start.elapsed();
    println!("acceptance: {} checks, {failed} failed, {elapsed:.1?}", checks.len());
    if failed > 0 || elapsed > Duration::from_secs(300) {
        std::process::exit(1);
    }
}
