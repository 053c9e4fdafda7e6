use kgllm_core::baselines::{
    calibrate_from_scores, grad_check, train, BaselineModel, GradProbe, ModelKind, TrainConfig,
};
use kgllm_core::{KnowledgeGraph, NodeId, RelationId, Triple};
use proptest::prelude::*;

fn chain() -> KnowledgeGraph {
    KnowledgeGraph::build(4, 1, [Triple::new(0, 0, 1), Triple::new(1, 0, 2), Triple::new(2, 0, 3)]).unwrap()
}

#[test]
fn grad_check_over_100_probes_per_kind() {
    for kind in ModelKind::ALL {
        let worst = (0..100)
            .map(|seed| grad_check(&GradProbe::random(kind, seed), 1e-5))
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{kind:?}: max relative error {worst:e}");
    }
}

proptest! {
    #[test]
    fn complex_with_zero_imaginary_equals_distmult(seed in any::<u64>(), h in 0u32..6, r in 0u32..3, t in 0u32..6) {
        let cfg = TrainConfig { dim: 8, seed, ..Default::default() };
        let mut c = BaselineModel::init(ModelKind::ComplEx, 6, 3, &cfg).unwrap();
        c.entity_im.iter_mut().for_each(|v| *v = 0.0);
        c.relation_im.iter_mut().for_each(|v| *v = 0.0);
        let d = BaselineModel {
            kind: ModelKind::DistMult,
            entity_im: Vec::new(),
            relation_im: Vec::new(),
            ..c.clone()
        };
        let (h, r, t) = (NodeId(h), RelationId(r), NodeId(t));
        let diff = (c.score_triple(h, r, t).unwrap() - d.score_triple(h, r, t).unwrap()).abs();
        prop_assert!(diff <= 1e-10, "diff {}", diff);
    }

    #[test]
    fn calibration_matches_exhaustive_scan(scored in prop::collection::vec((-5i32..5, any::<bool>()), 1..40)) {
        let scored: Vec<(f64, bool)> = scored.into_iter().map(|(s, y)| (s as f64 / 2.0, y)).collect();
        let mut candidates: Vec<f64> = scored.iter().map(|p| p.0).collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let f1_at = |t: f64| {
            let tp = scored.iter().filter(|&&(s, y)| s >= t && y).count();
            let fp = scored.iter().filter(|&&(s, y)| s >= t && !y).count();
            let fn_ = scored.iter().filter(|&&(s, y)| s < t && y).count();
            if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 }
        };
        let best = candidates.iter().map(|&t| f1_at(t)).fold(f64::NEG_INFINITY, f64::max);
        let want = candidates.iter().copied().find(|&t| f1_at(t) == best).unwrap();
        prop_assert_eq!(calibrate_from_scores(&scored).unwrap(), want);
    }
}

#[test]
fn calibration_on_separated_scores_picks_lowest_positive() {
    let scored = [(-2.0, false), (-1.5, false), (0.25, true), (1.0, true)];
    assert_eq!(calibrate_from_scores(&scored).unwrap(), 0.25);
    assert_eq!(calibrate_from_scores(&[(3.0, false), (3.0, true)]).unwrap(), 3.0);
}

#[test]
fn epochs_zero_returns_the_seeded_initialization() {
    let g = chain();
    for kind in ModelKind::ALL {
        let cfg = TrainConfig { epochs: 0, dim: 8, seed: 11, ..Default::default() };
        let (m, report) = train(&g, kind, &cfg).unwrap();
        assert!(report.epoch_losses.is_empty());
        assert_eq!(m, BaselineModel::init(kind, 4, 1, &cfg).unwrap());
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let g = chain();
    for kind in ModelKind::ALL {
        let cfg = TrainConfig { epochs: 7, dim: 8, seed: 5, batch_size: 2, ..Default::default() };
        let (a, _) = train(&g, kind, &cfg).unwrap();
        let (b, _) = train(&g, kind, &cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = train(&g, kind, &TrainConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn transe_entity_rows_stay_unit_norm() {
    let g = chain();
    for epochs in 1..=4 {
        let cfg = TrainConfig { epochs, dim: 10, learning_rate: 0.1, batch_size: 1, ..Default::default() };
        let (m, _) = train(&g, ModelKind::TransE, &cfg).unwrap();
        for row in m.entity_re.chunks(m.dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-6, "epoch {epochs}: norm {norm}");
        }
    }
}

#[test]
fn trained_chain_scores_true_triples_above_corruptions() {
    let g = chain();
    for kind in ModelKind::ALL {
        let cfg = TrainConfig {
            epochs: 50,
            dim: 16,
            learning_rate: 0.1,
            batch_size: 1,
            negatives: 2,
            seed: 1,
            ..Default::default()
        };
        let (m, report) = train(&g, kind, &cfg).unwrap();
        let score = |h, t| m.score_triple(NodeId(h), RelationId(0), NodeId(t)).unwrap();
        let truth = [(0, 1), (1, 2), (2, 3)];
        let mean_true = truth.iter().map(|&(h, t)| score(h, t)).sum::<f64>() / 3.0;
        let corrupted: Vec<(u32, u32)> = (0..4)
            .flat_map(|h| (0..4).map(move |t| (h, t)))
            .filter(|p| !truth.contains(p))
            .collect();
        let mean_false = corrupted.iter().map(|&(h, t)| score(h, t)).sum::<f64>() / corrupted.len() as f64;
        assert!(mean_true > mean_false, "{kind:?}: {mean_true} <= {mean_false}");
        let (first, last) = (report.epoch_losses[0], *report.epoch_losses.last().unwrap());
        assert!(last < first, "{kind:?}: loss {first} -> {last}");
    }
}

#[test]
fn empty_graph_is_rejected() {
    let g = KnowledgeGraph::build(3, 1, std::iter::empty()).unwrap();
    assert!(train(&g, ModelKind::DistMult, &TrainConfig::default()).is_err());
}
