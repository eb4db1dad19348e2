//! Behaviour of the five models across the steepness sweep.

use smece::experiments::{run_experiment, ExperimentConfig, Metric, Parallelism};
use smece::models::ModelKind::*;

#[test]
fn sweep_trends() {
    let result = run_experiment(
        &ExperimentConfig::standard(2).unwrap().with_seed(77),
        &Parallelism::default(),
    )
    .unwrap();
    let at = |k: f64| result.score_conditions().iter().find(|c| c.k == k).unwrap();
    let (flat, steep) = (at(0.5), at(50.0));

    for c in result.score_conditions() {
        assert_eq!(c.mean(PosteriorMatching, Metric::Smece), 0.0, "k={}", c.k);
    }

    // Scaling miscalibration fades as the posterior sharpens.
    let smece = |c: &smece::experiments::ConditionScores, m| c.mean(m, Metric::Smece);
    assert!((smece(flat, Overconfident) - 0.1770).abs() < 0.005);
    assert!((smece(steep, Overconfident) - 0.0028).abs() < 0.005);
    assert!((smece(flat, Underconfident) - 0.0979).abs() < 0.005);
    assert!((smece(steep, Underconfident) - 0.0070).abs() < 0.005);
    assert!(smece(steep, Overconfident) < smece(flat, Overconfident));
    assert!(smece(steep, Underconfident) < smece(flat, Underconfident));

    // A constant bias does not.
    assert!(smece(steep, BiasedHigh) > 0.05);
}

#[test]
fn ece_prefers_overconfident_model_in_every_replication() {
    let mut config = ExperimentConfig::standard(3).unwrap();
    config.k_values = vec![2.0];
    let result = run_experiment(&config, &Parallelism::default()).unwrap();
    let c = &result.ranking_conditions()[0];
    assert_eq!(c.ece.pair(PosteriorMatching, Overconfident), 0.0);
    assert_eq!(c.smece.pair(PosteriorMatching, Overconfident), 1.0);
}

#[test]
fn spread_shrinks_with_sample_size() {
    let mut config = ExperimentConfig::standard(4).unwrap();
    config.replications = 200;
    let result = run_experiment(&config, &Parallelism::default()).unwrap();
    let conditions = result.score_conditions();
    let (small, large) = (&conditions[0], conditions.last().unwrap());
    assert_eq!((small.n, large.n), (500, 10_000));
    for model in [Overconfident, Underconfident, BiasedHigh, Random] {
        for metric in Metric::ALL {
            assert!(large.cell(model, metric).std < small.cell(model, metric).std);
        }
    }
    let a_means: Vec<f64> = conditions
        .iter()
        .map(|c| c.mean(PosteriorMatching, Metric::Ece))
        .collect();
    let spread = a_means.iter().cloned().fold(f64::MIN, f64::max)
        - a_means.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.002, "ECE(A) means {a_means:?}");
}
