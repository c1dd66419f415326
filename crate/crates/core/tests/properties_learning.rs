//! Property tests for the link learner and the two-tower losses.

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fullscan::link_learner::{
    aggregate_and_prune, l1_path, score_links_ratio, select_links_for_seeker, threshold_sweep,
    AttrMap, ComplexLink, JobCatalog, L1Options, LinkTemplate, PruneConfig, SegmentJobs,
    SparseDesign, TrainingPair, DEFAULT_MAX_META_LINKS,
};
use fullscan::two_tower::{
    hard_negative_filter, mix_easy_negatives, recall_at_k, softmax_loss, softmax_rows,
    InventoryJob, ModelConfig, PairExample, Tower, TowerModel,
};

fn templates() -> Vec<LinkTemplate> {
    vec![
        LinkTemplate::new("title", "job_title"),
        LinkTemplate::new("skill", "job_skill"),
    ]
}

fn attrs(pairs: &[(&str, Vec<u8>)]) -> AttrMap {
    pairs
        .iter()
        .map(|(k, vs)| (k.to_string(), vs.iter().map(|v| format!("v{v}")).collect()))
        .collect()
}

fn pair() -> impl Strategy<Value = TrainingPair> {
    (
        0u8..6,
        prop::collection::vec(0u8..3, 1..=2),
        prop::collection::vec(0u8..3, 1..=2),
        0u8..10,
        prop::collection::vec(0u8..3, 1..=2),
        prop::collection::vec(0u8..3, 1..=2),
        any::<bool>(),
    )
        .prop_map(|(s, st, ss, j, jt, js, hire)| TrainingPair {
            seeker_id: format!("s{s}"),
            seeker: attrs(&[("title", st), ("skill", ss)]),
            job_id: format!("j{j}"),
            job: attrs(&[("job_title", jt), ("job_skill", js)]),
            hire,
        })
}

fn pairs() -> impl Strategy<Value = Vec<TrainingPair>> {
    prop::collection::vec(pair(), 1..80)
}

fn prune() -> PruneConfig {
    PruneConfig {
        min_support: 2,
        max_meta_links: DEFAULT_MAX_META_LINKS,
    }
}

fn catalog(data: &[TrainingPair]) -> JobCatalog {
    JobCatalog::from_pairs(data)
}

fn matrix(m: usize, d: usize, values: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((m, d), |(i, j)| values[(i * d + j) % values.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn aggregation_ignores_pair_order(data in pairs(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = aggregate_and_prune(&data, &templates(), prune()).unwrap();
        let b = aggregate_and_prune(&shuffled, &templates(), prune()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn aggregated_links_pass_the_prune_rule(data in pairs()) {
        for l in aggregate_and_prune(&data, &templates(), prune()).unwrap() {
            prop_assert!(l.support >= 2 && l.neg_count <= l.support);
            let fired_hires = data.iter().filter(|p| p.hire && l.key.fires(&p.seeker, &p.job)).count();
            prop_assert_eq!(fired_hires as u32, l.support);
        }
    }

    #[test]
    fn liquidity_is_monotone_in_theta(data in pairs(), seeker in 0u8..6) {
        let mut links = aggregate_and_prune(&data, &templates(), prune()).unwrap();
        score_links_ratio(&mut links);
        let Some(sp) = data.iter().find(|p| p.seeker_id == format!("s{seeker}")) else {
            return Ok(());
        };
        let jobs = catalog(&data);
        let mut cache = SegmentJobs::default();
        let mut last = (0, 0);
        for theta in 0..=jobs.len() + 1 {
            let sel = select_links_for_seeker(&sp.seeker, &links, theta, &jobs, &mut cache);
            let now = (sel.mappings.len(), sel.reachable_jobs.len());
            prop_assert!(now.0 >= last.0 && now.1 >= last.1, "theta {}: {:?} after {:?}", theta, now, last);
            last = now;
        }
    }

    #[test]
    fn sweep_is_monotone_in_threshold(data in pairs(), eval in pairs()) {
        let mut links: Vec<ComplexLink> = aggregate_and_prune(&data, &templates(), prune()).unwrap();
        score_links_ratio(&mut links);
        let thresholds: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let reports = threshold_sweep(&links, &eval, &templates(), &thresholds, DEFAULT_MAX_META_LINKS).unwrap();
        for w in reports.windows(2) {
            prop_assert!(w[1].recall <= w[0].recall);
            prop_assert!(w[1].linked_pairs <= w[0].linked_pairs);
            prop_assert!(w[1].num_links <= w[0].num_links);
        }
    }

    #[test]
    fn l1_weights_vanish_for_large_lambda(
        rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 8..40),
        labels in prop::collection::vec(any::<bool>(), 40),
    ) {
        let design = SparseDesign::from_dense(&rows);
        let y: Vec<f64> = labels[..rows.len()].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        // at lambda >= max |X^T (y - mean y)| / N the zero vector is optimal
        let fits = l1_path(&design, &y, &[10.0, 1.0], &L1Options::default());
        prop_assert_eq!(fits[0].nonzero(), 0);
        prop_assert!(fits.iter().all(|f| f.objective.is_finite()));
    }

    // Lasso paths are not monotone for arbitrary designs (a feature can drop
    // out and re-enter); with disjoint link supports they are.
    #[test]
    fn l1_path_sparsity_is_monotone_for_disjoint_links(
        rows in prop::collection::vec(prop::option::of(0usize..6), 10..80),
        labels in prop::collection::vec(any::<bool>(), 80),
    ) {
        let mut columns = vec![Vec::new(); 6];
        for (i, r) in rows.iter().enumerate() {
            if let Some(c) = r {
                columns[*c].push(i);
            }
        }
        let design = SparseDesign::new(rows.len(), columns);
        let y: Vec<f64> = labels[..rows.len()].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let lambdas: Vec<f64> = (0..16).map(|i| 1e-4 * 2f64.powi(i)).collect();
        let nonzero: Vec<usize> = l1_path(&design, &y, &lambdas, &L1Options::default())
            .iter()
            .map(|f| f.nonzero())
            .collect();
        prop_assert!(nonzero.windows(2).all(|w| w[1] <= w[0]), "{:?}", nonzero);
    }

    #[test]
    fn softmax_rows_sum_to_one(m in 1usize..6, d in 1usize..8, values in prop::collection::vec(-30.0..30.0f64, 48)) {
        let z = matrix(m, d, &values);
        for row in softmax_rows(z.view()).rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_is_shift_invariant_per_row(
        m in 1usize..6,
        d in 1usize..8,
        values in prop::collection::vec(-5.0..5.0f64, 48),
        shifts in prop::collection::vec(-100.0..100.0f64, 6),
    ) {
        let z = matrix(m, d, &values);
        let mut shifted = z.clone();
        for (i, mut row) in shifted.rows_mut().into_iter().enumerate() {
            row += shifts[i];
        }
        let positives: Vec<usize> = (0..m).map(|i| i % d).collect();
        let (a, ga) = softmax_loss(z.view(), &positives).unwrap();
        let (b, gb) = softmax_loss(shifted.view(), &positives).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(ga.iter().zip(gb.iter()).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn hard_filter_keeps_the_positive(
        m in 1usize..6,
        d in 2usize..10,
        values in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 0.5, 1.0]), 60),
        k_pick in any::<prop::sample::Index>(),
        pos_seed in any::<u64>(),
    ) {
        use rand::Rng;
        let z = matrix(m, d, &values);
        let k = 1 + k_pick.index(d);
        let mut rng = ChaCha8Rng::seed_from_u64(pos_seed);
        let positives: Vec<usize> = (0..m).map(|_| rng.random_range(0..d)).collect();
        let hard = hard_negative_filter(z.view(), &positives, k).unwrap();
        prop_assert_eq!(hard.z.dim(), (m, k));
        for i in 0..m {
            prop_assert_eq!(hard.columns[i][0], positives[i]);
            prop_assert_eq!(hard.z[[i, 0]], z[[i, positives[i]]]);
        }
    }

    #[test]
    fn easy_mixing_width(m in 2usize..20, p in 1usize..5, per in 0usize..10, inv in 10usize..30, seed in any::<u64>()) {
        let pairs: Vec<PairExample> = (0..m)
            .map(|i| PairExample { seeker: vec![format!("s{i}")], job_id: format!("p{i}"), job: vec![format!("j{i}")] })
            .collect();
        let inventory: Vec<InventoryJob> = (0..inv)
            .map(|i| InventoryJob { job_id: format!("i{i}"), features: vec![format!("f{i}")] })
            .collect();
        let n = per * p;
        let batch = mix_easy_negatives(&pairs, &inventory, n, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(batch.d(), m + n / p);
        prop_assert_eq!(batch.positives.clone(), (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn tower_outputs_are_unit_and_deterministic(
        seed in any::<u64>(),
        inputs in prop::collection::vec(prop::collection::vec("[a-z]{1,4}", 1..4), 1..6),
    ) {
        let model = TowerModel::new(ModelConfig { hash_buckets: 64, embed_dim: 8, out_dim: 5 }, seed).unwrap();
        let refs: Vec<&[String]> = inputs.iter().map(Vec::as_slice).collect();
        for tower in [Tower::Seeker, Tower::Job] {
            let a = model.forward(tower, &refs).output;
            let b = model.forward(tower, &refs).output;
            prop_assert_eq!(&a, &b);
            for row in a.rows() {
                let n = row.dot(&row).sqrt();
                prop_assert!((n - 1.0).abs() < 1e-9 || n == 0.0);
            }
        }
    }

    #[test]
    fn recall_bounds(actual in prop::collection::vec(prop::collection::btree_set(0u8..20, 1..5), 1..10), extra in prop::collection::vec(0u8..20, 0..5)) {
        let actual: Vec<Vec<u8>> = actual.into_iter().map(|s| s.into_iter().collect()).collect();
        let covering: Vec<Vec<u8>> = actual.iter().map(|a| a.iter().chain(&extra).copied().collect()).collect();
        prop_assert_eq!(recall_at_k(&covering, &actual).unwrap(), 1.0);
        let partial: Vec<Vec<u8>> = actual.iter().map(|a| a[..1].to_vec()).collect();
        let r = recall_at_k(&partial, &actual).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
        let none: Vec<Vec<u8>> = actual.iter().map(|_| vec![]).collect();
        prop_assert_eq!(recall_at_k(&none, &actual).unwrap(), 0.0);
    }
}
