use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcesim_core::algorithms::{AlgorithmKind, OnlineRun};
use vcesim_core::metrics::acceptance_ratio_windows;
use vcesim_core::oracle::{CapacityView, PathSolver, SearchStrategy, VcAceOracle};
use vcesim_core::substrate::{build_bcube, build_fat_tree, SubstrateGraph};
use vcesim_core::verify::{random_costs, random_tiny_instance, TinyShape};
use vcesim_core::workload::{generate_sequence, sequence_from_csv, sequence_to_csv, BenefitPattern, RequestDomain, VcRequest};

fn request() -> impl Strategy<Value = VcRequest> {
    (3u32..=14, 4u32..=12, 4u32..=20).prop_map(|(n, b, c)| VcRequest::new(1, n, b, c, 100))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_embeddings_are_valid_and_priced(req in request(), seed in any::<u64>()) {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let costs = random_costs(&mut ChaCha8Rng::seed_from_u64(seed), &g);
        let m = VcAceOracle::default()
            .find_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial)
            .unwrap();
        if let Some(m) = m {
            prop_assert!(m.validate(&g, &req, &CapacityView::Initial).is_ok());
            prop_assert_eq!(m.cost, m.cost_under(&costs));
        } else {
            let bf = VcAceOracle::new(SearchStrategy::Exhaustive, PathSolver::BellmanFord)
                .find_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial)
                .unwrap();
            prop_assert!(bf.is_none());
        }
    }

    #[test]
    fn pruned_search_matches_exhaustive(req in request(), seed in any::<u64>()) {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let costs = random_costs(&mut ChaCha8Rng::seed_from_u64(seed), &g);
        let find = |s| VcAceOracle::new(s, PathSolver::DijkstraEarlyStop)
            .find_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial)
            .unwrap();
        prop_assert_eq!(find(SearchStrategy::Pruned), find(SearchStrategy::Exhaustive));
    }

    #[test]
    fn sequences_respect_domain_and_round_trip(seed in any::<u64>(), len in 1usize..200) {
        let seq = generate_sequence(seed, len, &BenefitPattern::random(), RequestDomain::default()).unwrap();
        prop_assert_eq!(seq.len(), len);
        for (i, r) in seq.iter().enumerate() {
            prop_assert_eq!(r.index as usize, i + 1);
            prop_assert!((3..=14).contains(&r.n_vms));
            prop_assert!((4..=12).contains(&r.bandwidth));
            prop_assert!((4..=20).contains(&r.compute));
            prop_assert!((1..=1000).contains(&r.benefit));
        }
        prop_assert_eq!(sequence_from_csv(&sequence_to_csv(&seq)).unwrap(), seq);
    }

    #[test]
    fn bcube_edge_list_round_trips(n in 2u32..5, k in 0u32..3) {
        let g = build_bcube(n, k, 20, 20).unwrap();
        prop_assert_eq!(SubstrateGraph::from_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn window_ratios_recover_acceptance_count(bits in prop::collection::vec(any::<bool>(), 1..500), w in 1usize..120) {
        let ratios = acceptance_ratio_windows(&bits, w).unwrap();
        let recovered: f64 = ratios
            .iter()
            .zip(bits.chunks(w))
            .map(|(r, c)| r * c.len() as f64)
            .sum();
        prop_assert!((recovered - bits.iter().filter(|&&b| b).count() as f64).abs() < 1e-9);
    }

    #[test]
    fn online_bookkeeping_is_consistent(seed in any::<u64>()) {
        let inst = random_tiny_instance(&mut ChaCha8Rng::seed_from_u64(seed), &TinyShape::default());
        for kind in AlgorithmKind::ALL {
            let mut run = OnlineRun::new(kind, &inst.graph);
            let mut accepted = 0;
            for r in &inst.requests {
                let step = run.process(r).unwrap();
                prop_assert!(step.after.alpha >= step.before.alpha);
                if step.decision.is_accepted() {
                    accepted += r.benefit;
                }
            }
            let s = run.state();
            prop_assert_eq!(s.cum_profit, accepted);
            prop_assert_eq!(s.records.len(), inst.requests.len());
            if matches!(kind, AlgorithmKind::Greedy | AlgorithmKind::CovceLoad) {
                prop_assert!(s.within_capacity());
            }
        }
    }
}
