use veracity_core::{CorrectionResponse, EvidenceKind, GatePolicy, PipelineConfig, Priority, RunRecord, RunStatus};
use veracity_testkit::{raw_post, replay_pipeline, scenario};

async fn replay(name: &str) -> RunRecord {
    let pipeline = replay_pipeline(name, PipelineConfig::default()).unwrap();
    pipeline.run_raw(raw_post(&scenario(name).unwrap()), &GatePolicy::PostTime).await
}

/// Last path segment of each evidence source.
fn urls_of(r: &CorrectionResponse) -> Vec<&str> {
    r.evidence_trail.iter().map(|e| e.source_url.path().rsplit('/').next().unwrap()).collect()
}

fn urls(record: &RunRecord) -> Vec<String> {
    urls_of(record.response.as_ref().unwrap()).into_iter().map(String::from).collect()
}

#[tokio::test]
async fn refuted_post_stops_after_two_explicit_pages() {
    let r = replay("text_refuted").await;
    assert_eq!(r.status, RunStatus::Completed);
    assert_eq!(urls(&r), ["dam-intact", "dam-sensors"]);
    let d = &r.response.unwrap().diagnostics;
    assert_eq!((d.pages_kept, d.pages_extracted), (3, 2));
}

#[tokio::test]
async fn higher_tiers_are_extracted_first() {
    let r = replay("text_mixed_tiers").await;
    let trail = &r.response.as_ref().unwrap().evidence_trail;
    let tiers: Vec<Priority> = trail.iter().map(|e| e.source_priority).collect();
    assert_eq!(tiers, [Priority::High, Priority::Medium, Priority::Low]);
}

#[tokio::test]
async fn threshold_boundary_is_inclusive() {
    assert_eq!(urls(&replay("text_boundary").await), ["kelvale-at-threshold"]);
    let below = replay("text_below_threshold").await.response.unwrap();
    assert!(below.lack_of_evidence);
    assert!(below.references.is_empty());
}

#[tokio::test]
async fn time_gate_drops_later_and_undated_pages() {
    assert_eq!(urls(&replay("text_after_cutoff").await), ["brackwater-earlier"]);
    assert_eq!(urls(&replay("text_undated").await), ["fernhollow-dated"]);
}

#[tokio::test]
async fn unrated_publishers_yield_no_evidence() {
    let r = replay("text_unrated_publishers").await.response.unwrap();
    assert!(r.lack_of_evidence);
    assert_eq!(r.diagnostics.pages_fetched, 0);
}

#[tokio::test]
async fn numbered_urls_are_retried_then_rejected() {
    let retried = replay("text_retry_numbered").await;
    assert_eq!(retried.status, RunStatus::Completed);
    assert!(!retried.response.unwrap().flags.is_empty());
    let rejected = replay("text_rejected").await;
    assert_eq!(rejected.status, RunStatus::Rejected);
    assert!(rejected.response.is_none());
}

#[tokio::test]
async fn unsupported_urls_are_not_references() {
    let r = replay("text_unsupported_url").await.response.unwrap();
    assert!(r.text.contains("unlisted-source.example"));
    assert!(r.references.iter().all(|u| !u.contains("unlisted-source")));
}

#[tokio::test]
async fn hallucinated_quotes_are_dropped() {
    let r = replay("text_hallucinated_quote").await.response.unwrap();
    assert_eq!(r.evidence_trail.len(), 1);
    assert_eq!(r.evidence_trail[0].kind, EvidenceKind::ImplicitRefutation);
}

#[tokio::test]
async fn failed_fetches_become_warnings() {
    let r = replay("text_fetch_failures").await.response.unwrap();
    assert_eq!(r.diagnostics.warnings.len(), 1);
    assert_eq!(urls_of(&r), ["harrowgate-open"]);
}

#[tokio::test]
async fn visual_relevance_admits_low_text_pages() {
    assert_eq!(urls(&replay("image_photo_visual").await), ["lindqvist-archive"]);
    assert_eq!(urls(&replay("image_multimodal_text").await), ["orrington-on-time"]);
    assert_eq!(urls(&replay("image_reverse_search").await), ["saltcombe-2017"]);
}

#[tokio::test]
async fn image_only_and_quote_images_are_described() {
    assert_eq!(urls(&replay("image_only_post").await), ["veldmark-fire"]);
    assert_eq!(urls(&replay("image_celebrity_quote").await), ["quorrin-speech"]);
}

#[tokio::test]
async fn long_pages_are_cut_before_extraction() {
    let r = replay("text_long_page").await.response.unwrap();
    assert_eq!(r.evidence_trail.len(), 1);
}
