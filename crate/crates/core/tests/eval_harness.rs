use propnsm::eval::dummy::{ConstantLearner, OracleLearner, RandomLearner};
use propnsm::eval::{run_protocol, EvalOptions, Evaluation, Learner, ProtocolConfig, ProtocolKind};
use propnsm::synth::{generate, SynthConfig};
use propnsm::{Error, MethodKind};
use rand::seq::SliceRandom;

fn small() -> propnsm::synth::SynthData {
    generate(&SynthConfig {
        n_classes: 8,
        semantic_dim: 12,
        feature_dim: 6,
        per_class: 4,
        ..Default::default()
    })
    .unwrap()
}

fn protocol(kind: ProtocolKind) -> ProtocolConfig {
    ProtocolConfig {
        kind,
        trials: 6,
        group_size: 4,
        n_unseen: 3,
        k_values: vec![1, 3, 5],
        master_seed: 11,
    }
}

#[test]
fn trial_results_do_not_depend_on_order() {
    let d = small();
    let sem = d.dataset.class_semantics(&d.table).unwrap();
    let learners: [&dyn Learner; 3] = [&MethodKind::NsmPb, &MethodKind::Lm, &RandomLearner];
    let cfg = protocol(ProtocolKind::Kway);
    let options = EvalOptions::default();
    let eval = Evaluation {
        dataset: &d.dataset,
        class_semantics: &sem,
        learners: &learners,
        protocol: &cfg,
        options: &options,
    };
    let report = eval.run().unwrap();
    let mut order: Vec<usize> = (0..cfg.trials).collect();
    order.shuffle(&mut propnsm::rng::seeded_rng(3));
    for t in order {
        assert_eq!(eval.run_trial(t).unwrap(), report.trials[t]);
    }
}

#[test]
fn more_trials_keep_earlier_ones() {
    let d = small();
    let sem = d.dataset.class_semantics(&d.table).unwrap();
    let learners: [&dyn Learner; 1] = [&MethodKind::Lm];
    let short = protocol(ProtocolKind::BinaryPairs);
    let long = ProtocolConfig {
        trials: 9,
        ..short.clone()
    };
    let a = run_protocol(&d.dataset, &sem, &learners, &short, &EvalOptions::default()).unwrap();
    let b = run_protocol(&d.dataset, &sem, &learners, &long, &EvalOptions::default()).unwrap();
    assert_eq!(a.trials[..], b.trials[..6]);
}

#[test]
fn metrics_stay_in_range() {
    let d = small();
    let sem = d.dataset.class_semantics(&d.table).unwrap();
    let learners: [&dyn Learner; 4] = [
        &MethodKind::LmPb,
        &MethodKind::Conse,
        &RandomLearner,
        &ConstantLearner,
    ];
    for kind in [
        ProtocolKind::BinaryPairs,
        ProtocolKind::Kway,
        ProtocolKind::FullSet,
        ProtocolKind::Topk,
    ] {
        let cfg = protocol(kind);
        let r = run_protocol(&d.dataset, &sem, &learners, &cfg, &EvalOptions::default()).unwrap();
        let n_candidates = match kind {
            ProtocolKind::BinaryPairs => 2,
            ProtocolKind::Kway => cfg.group_size,
            _ => d.dataset.n_classes(),
        };
        assert_eq!(r.metrics, cfg.metric_names());
        for trial in &r.trials {
            for res in &trial.results {
                for (name, &v) in &res.values {
                    if name == "mean_rank" {
                        assert!(
                            (1.0..=n_candidates as f64).contains(&v),
                            "{kind} {name} {v}"
                        );
                    } else {
                        assert!((0.0..=1.0).contains(&v), "{kind} {name} {v}");
                    }
                }
            }
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("trial,method,metric,value\n"));
        let rows = csv.lines().count() - 1;
        assert_eq!(rows, cfg.trials * learners.len() * r.metrics.len());
    }
}

#[test]
fn oracle_is_perfect_everywhere() {
    let d = small();
    let sem = d.dataset.class_semantics(&d.table).unwrap();
    for kind in [
        ProtocolKind::BinaryPairs,
        ProtocolKind::Kway,
        ProtocolKind::FullSet,
        ProtocolKind::Topk,
    ] {
        let r = run_protocol(
            &d.dataset,
            &sem,
            &[&OracleLearner],
            &protocol(kind),
            &EvalOptions::default(),
        )
        .unwrap();
        for metric in &r.metrics {
            assert_eq!(r.mean("ORACLE", metric), Some(1.0), "{kind} {metric}");
        }
    }
}

#[test]
fn identical_methods_give_degenerate_ttest() {
    let d = small();
    let sem = d.dataset.class_semantics(&d.table).unwrap();
    let r = run_protocol(
        &d.dataset,
        &sem,
        &[&OracleLearner, &OracleLearner],
        &protocol(ProtocolKind::FullSet),
        &EvalOptions::default(),
    )
    .unwrap();
    assert!(r.ttests.iter().all(|t| t.t.is_none() && t.note.is_some()));
}

#[test]
fn bad_configs_are_rejected() {
    let d = small();
    let sem = d.dataset.class_semantics(&d.table).unwrap();
    let run = |cfg: ProtocolConfig| {
        run_protocol(
            &d.dataset,
            &sem,
            &[&OracleLearner],
            &cfg,
            &EvalOptions::default(),
        )
    };
    let base = protocol(ProtocolKind::Kway);
    assert!(matches!(
        run(ProtocolConfig {
            trials: 0,
            ..base.clone()
        }),
        Err(Error::InvalidArgument(_))
    ));
    assert!(run(ProtocolConfig {
        group_size: 9,
        ..base.clone()
    })
    .is_err());
    let topk = protocol(ProtocolKind::Topk);
    assert!(run(ProtocolConfig {
        k_values: vec![3, 1],
        ..topk.clone()
    })
    .is_err());
    assert!(run(ProtocolConfig {
        k_values: vec![8],
        ..topk.clone()
    })
    .is_err());
    assert!(run(ProtocolConfig {
        n_unseen: 8,
        ..topk
    })
    .is_err());
}
