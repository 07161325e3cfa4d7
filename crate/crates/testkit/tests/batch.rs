use veracity_core::{run_batch, GatePolicy, PipelineConfig, RawPost, RunStatus};
use veracity_testkit::{merged_replay_pipeline, post_with_missing_image, raw_post, scenarios, stable_json};

fn posts(n: usize) -> Vec<RawPost> {
    scenarios().iter().take(n).map(raw_post).collect()
}

#[tokio::test]
async fn parallel_batch_matches_sequential_and_keeps_order() {
    let pipeline = merged_replay_pipeline(PipelineConfig::default()).unwrap();
    let input = posts(12);
    let ids: Vec<String> = input.iter().map(|p| p.id.clone().unwrap()).collect();
    let one = run_batch(&pipeline, input.clone(), &GatePolicy::PostTime, 1).await;
    let five = run_batch(&pipeline, input, &GatePolicy::PostTime, 5).await;
    assert_eq!(one.iter().map(|r| r.post_id.clone()).collect::<Vec<_>>(), ids);
    let one: Vec<String> = one.iter().map(stable_json).collect();
    let five: Vec<String> = five.iter().map(stable_json).collect();
    assert_eq!(one, five);
}

#[tokio::test]
async fn one_bad_post_does_not_sink_the_batch() {
    let pipeline = merged_replay_pipeline(PipelineConfig::default()).unwrap();
    let mut input = posts(3);
    input.insert(1, post_with_missing_image());
    let records = run_batch(&pipeline, input, &GatePolicy::PostTime, 5).await;
    assert_eq!(records.len(), 4);
    assert_eq!(records[1].status, RunStatus::Failed);
    assert!(records[1].error.as_deref().unwrap().contains("unreadable image"));
    for i in [0, 2, 3] {
        assert_eq!(records[i].status, RunStatus::Completed);
    }
}

#[tokio::test]
async fn empty_batch() {
    let pipeline = merged_replay_pipeline(PipelineConfig::default()).unwrap();
    assert!(run_batch(&pipeline, vec![], &GatePolicy::PostTime, 5).await.is_empty());
}
