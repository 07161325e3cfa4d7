use std::collections::HashMap;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use veracity_core::gateway::{MockBackend, PageContent};
use veracity_core::retrieval::{relevance_verdict, score_relevance, PostEmbeddings, VerdictReason};
use veracity_core::{Gateway, PipelineConfig, Post};

fn post(text: &str) -> Post {
    Post {
        id: "p".into(),
        text: text.into(),
        images: vec![],
        created_at: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
        author_name: "a".into(),
        author_screen_name: "a".into(),
        author_description: String::new(),
    }
}

fn page(text: &str) -> PageContent {
    PageContent {
        url: "https://a.example/x".parse().unwrap(),
        title: String::new(),
        main_text: text.into(),
        main_image: None,
        published_at: None,
    }
}

#[test]
fn text_only_threshold_is_inclusive() {
    let c = PipelineConfig::default();
    assert!(relevance_verdict(90.0, None, false, &c).kept);
    assert!(!relevance_verdict(89.99, None, false, &c).kept);
    assert!(!relevance_verdict(89.999_999, None, false, &c).kept);
    // Visual relevance does not apply to text-only posts.
    assert!(!relevance_verdict(50.0, Some(1.0), false, &c).kept);
}

#[test]
fn multimodal_or_rule() {
    let c = PipelineConfig::default();
    let v = |t, vis| relevance_verdict(t, vis, true, &c);
    assert_eq!(v(95.0, None).reason, VerdictReason::MultimodalTextAbove);
    assert!(!v(94.99, None).kept);
    assert!(!v(94.99, Some(0.69)).kept);
    assert_eq!(v(10.0, Some(0.7)).reason, VerdictReason::VisualAbove);
    assert!(!v(92.0, Some(0.6999)).kept);
    assert!(v(95.0, Some(0.0)).kept);
}

/// Scores through the gateway with basis-vector embeddings scaled so the
/// dot product equals the intended relevance.
#[tokio::test]
async fn scored_through_unit_basis_embedder() {
    let c = PipelineConfig::default();
    let mut table = HashMap::new();
    table.insert("claim".to_string(), vec![10.0, 0.0, 0.0]);
    table.insert("at threshold".to_string(), vec![9.0, 0.0, 0.0]);
    table.insert("just below".to_string(), vec![8.999, 0.1, 0.0]);
    table.insert("orthogonal".to_string(), vec![0.0, 0.0, 10.0]);
    let gateway = Gateway::builder(MockBackend::new().text_vectors(table)).build();
    let session = gateway.session();
    let p = post("claim");
    let embeddings = PostEmbeddings {
        text: Some(session.embed_text("claim").await.unwrap()),
        images: vec![],
    };
    let kept = |text: &'static str| {
        let session = session.clone();
        let p = p.clone();
        let embeddings = embeddings.clone();
        let c = c.clone();
        async move { score_relevance(&session, &p, &embeddings, &page(text), &c).await.unwrap() }
    };
    let at = kept("at threshold").await;
    assert_eq!(at.text_relevance, 90.0);
    assert!(at.kept);
    let below = kept("just below").await;
    assert!((below.text_relevance - 89.99).abs() < 1e-9);
    assert!(!below.kept);
    assert!(!kept("orthogonal").await.kept);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Raising either relevance score never drops a kept page.
    #[test]
    fn verdict_is_monotone(
        text in 0.0f64..120.0,
        visual in proptest::option::of(0.0f64..1.0),
        dt in 0.0f64..30.0,
        dv in 0.0f64..0.5,
        multimodal in any::<bool>(),
    ) {
        let c = PipelineConfig::default();
        let before = relevance_verdict(text, visual, multimodal, &c);
        let after = relevance_verdict(text + dt, visual.map(|v| (v + dv).min(1.0)), multimodal, &c);
        prop_assert!(!before.kept || after.kept);
        // Lowering the thresholds never drops a kept page either.
        let looser = PipelineConfig {
            text_relevance_threshold: c.text_relevance_threshold - dt,
            multimodal_text_threshold: c.multimodal_text_threshold - dt,
            visual_threshold: c.visual_threshold - dv,
            ..c.clone()
        };
        prop_assert!(!before.kept || relevance_verdict(text, visual, multimodal, &looser).kept);
    }
}
