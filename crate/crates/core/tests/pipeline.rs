use pasa_lab::harness::{
    ablate, evaluate_policy, read_checkpoint, train_rl, train_sft, write_checkpoint, RunConfig, Variant,
    World, THREADS_ENV,
};
use pasa_lab::policy::Checkpoint;

fn small() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.corpus.n_papers = 300;
    cfg.queries.n_train = 8;
    cfg.queries.n_eval = 6;
    cfg.imitation.demo_queries = 4;
    cfg.imitation.epochs = 10;
    cfg.ppo.total_steps = 4;
    cfg.ppo.policy_freeze_steps = 1;
    cfg.ppo.learning_rate = 0.05;
    cfg.ppo.value_learning_rate = 0.001;
    cfg
}

#[test]
fn training_is_deterministic_and_checkpoints_reload_exactly() {
    let cfg = small();
    let world = World::generate(&cfg).unwrap();
    let sft = train_sft(&cfg, &world).unwrap();
    let mut saved = Vec::new();
    let a = train_rl(&cfg, &world, &sft.policy, &mut |ck| {
        saved.push(ck.clone());
        Ok(())
    })
    .unwrap();
    let b = train_rl(&cfg, &World::generate(&cfg).unwrap(), &sft.policy, &mut |_| Ok(())).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.metrics, b.metrics);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/final.json");
    write_checkpoint(&Checkpoint::new(&a.policy, &a.value, 4), &path).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back.policy_params().unwrap(), a.policy);
    assert_eq!(back.value_params().unwrap(), a.value);
    assert_eq!(
        evaluate_policy(&cfg, &world, &back.policy_params().unwrap(), 2).unwrap(),
        evaluate_policy(&cfg, &world, &a.policy, 2).unwrap()
    );
    for ck in &saved {
        assert!(ck.step <= 4);
    }
}

#[test]
fn evaluation_ignores_thread_count() {
    let cfg = small();
    let world = World::generate(&cfg).unwrap();
    let sft = train_sft(&cfg, &world).unwrap();
    let params = sft.policy.params();
    std::env::set_var(THREADS_ENV, "1");
    let one = evaluate_policy(&cfg, &world, params, 2).unwrap();
    std::env::set_var(THREADS_ENV, "3");
    let three = evaluate_policy(&cfg, &world, params, 2).unwrap();
    std::env::remove_var(THREADS_ENV);
    assert_eq!(one, three);
}

#[test]
fn ablation_rows_follow_variants() {
    let mut cfg = small();
    cfg.ablate.replicates = 2;
    let world = World::generate(&cfg).unwrap();
    let rows = ablate(&cfg, &world, &[Variant::Full, Variant::NoExpand, Variant::NoRl]).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.variant).collect();
    assert_eq!(names, ["full", "no-expand", "no-rl"]);
    assert!(rows.iter().all(|r| r.replicates.len() == 2));
    assert!(rows[1].replicates.iter().all(|r| r.eval.actions.expand == 0));
    assert!(rows[0].crawler_recall() >= rows[1].crawler_recall());
}
