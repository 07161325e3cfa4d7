//! The early-stop rule against a brute-force sequential simulation.

use std::sync::Arc;

use chrono::{TimeZone, Utc};
use veracity_core::evidence::{gather, GatherOutcome};
use veracity_core::gateway::MockBackend;
use veracity_core::{Gateway, PipelineConfig, Post, Priority, ProviderKind, RetrievedPage};

const PAGES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Verdict {
    Refutes,
    Context,
    Nothing,
}

fn page(i: usize) -> RetrievedPage {
    RetrievedPage {
        url: format!("https://a.example/{i}").parse().unwrap(),
        publisher_domain: "a.example".into(),
        title: String::new(),
        main_text: format!("Page {i} says the claim is wrong. Page {i} adds context."),
        main_image: None,
        published_at: None,
        text_relevance: 95.0,
        visual_relevance: None,
        priority: Priority::High,
    }
}

fn post() -> Post {
    Post {
        id: "p".into(),
        text: "claim".into(),
        images: vec![],
        created_at: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
        author_name: "a".into(),
        author_screen_name: "a".into(),
        author_description: String::new(),
    }
}

fn gateway(pattern: Arc<Vec<Verdict>>) -> Arc<Gateway> {
    let backend = MockBackend::new().chat(move |_, context| {
        let i: usize = context
            .split("Article content: Page ")
            .nth(1)?
            .split(' ')
            .next()?
            .parse()
            .ok()?;
        Some(match pattern[i] {
            Verdict::Refutes => format!("1. \"Page {i} says the claim is wrong.\"\n2. none"),
            Verdict::Context => format!("1. none\n2. \"Page {i} adds context.\""),
            Verdict::Nothing => "none.".into(),
        })
    });
    Gateway::builder(backend).build()
}

/// Pages consulted by a plain left-to-right walk.
fn brute_force(pattern: &[Verdict], config: &PipelineConfig) -> usize {
    let mut count = 0;
    for (i, v) in pattern.iter().enumerate() {
        let counts = match v {
            Verdict::Refutes => true,
            Verdict::Context => !config.stop_on_explicit_only,
            Verdict::Nothing => false,
        };
        count += usize::from(counts);
        if count >= config.refutation_stop_count {
            return i + 1;
        }
    }
    pattern.len()
}

async fn run(pattern: &[Verdict], config: &PipelineConfig) -> (GatherOutcome, usize, usize) {
    let gateway = gateway(Arc::new(pattern.to_vec()));
    let session = gateway.session();
    let pages: Vec<RetrievedPage> = (0..pattern.len()).map(page).collect();
    let outcome = gather(&session, &pages, &post(), &[], config).await;
    let calls = session.calls();
    let chat = |speculative: bool| {
        calls
            .iter()
            .filter(|c| c.kind == ProviderKind::ChatLlm && c.speculative == speculative)
            .count()
    };
    (outcome, chat(false), chat(true))
}

fn patterns(states: &[Verdict]) -> Vec<Vec<Verdict>> {
    let total = states.len().pow(PAGES as u32);
    (0..total)
        .map(|mut code| {
            (0..PAGES)
                .map(|_| {
                    let v = states[code % states.len()];
                    code /= states.len();
                    v
                })
                .collect()
        })
        .collect()
}

async fn check_all(states: &[Verdict], explicit_only: bool) {
    let sequential = PipelineConfig {
        stop_on_explicit_only: explicit_only,
        ..PipelineConfig::default()
    };
    let speculative = PipelineConfig {
        speculative_lookahead: true,
        ..sequential.clone()
    };
    for pattern in patterns(states) {
        let expected = brute_force(&pattern, &sequential);
        let (seq, seq_calls, seq_spec) = run(&pattern, &sequential).await;
        assert_eq!(seq_calls, expected, "{pattern:?}");
        assert_eq!(seq_spec, 0);
        assert_eq!(seq.results.len(), expected);
        let (spec, spec_calls, extra) = run(&pattern, &speculative).await;
        assert_eq!(spec, seq, "{pattern:?}");
        assert_eq!(spec_calls, expected);
        assert!(extra <= speculative.parallelism);
        assert!(expected + extra <= PAGES);
    }
}

#[tokio::test]
async fn all_binary_patterns_match_sequential_walk() {
    check_all(&[Verdict::Refutes, Verdict::Nothing], true).await;
}

#[tokio::test]
async fn context_only_pages_per_stop_setting() {
    let states = [Verdict::Refutes, Verdict::Context, Verdict::Nothing];
    check_all(&states, true).await;
    check_all(&states, false).await;
}
