use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtgo::consensus::{draw_ids, run_warmup, warmup_sim, WarmupRounds};
use dtgo::digraph::{sample_strongly_connected, Digraph, DEFAULT_MAX_ATTEMPTS};
use dtgo::gossip::{
    correction_factors, delayed_stationary_weights, stationary_weights, DelaySpec, GossipMatrix,
    ROW_SUM_TOLERANCE,
};
use dtgo::optimizer::{dtgo_run, DtgoConfig, Engine, InitialState, Quadratic};
use dtgo::simulator::{Network, NetworkSim};

/// A strongly connected graph plus delays on some of its links.
fn network() -> impl Strategy<Value = (Digraph, DelaySpec, u64)> {
    (
        2usize..12,
        0.15f64..0.8,
        any::<u64>(),
        0.0f64..0.6,
        1usize..4,
    )
        .prop_map(|(n, p, seed, dp, dmax)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_strongly_connected(n, p, &mut rng, DEFAULT_MAX_ATTEMPTS).unwrap();
            let mut delays = DelaySpec::new();
            for (i, (from, to)) in g.edges().filter(|(f, t)| f != t).enumerate() {
                // A cheap deterministic thinning so the strategy shrinks well.
                if ((seed >> (i % 60)) & 1) as f64 <= dp && (i * 7 + n) % 3 == 0 {
                    delays.insert(from, to, 1 + (i + n) % dmax);
                }
            }
            (g, delays, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extended_matrix_is_row_stochastic((g, delays, _) in network()) {
        let w = GossipMatrix::inverse_indegree(&g).unwrap();
        let w_v = w.extend_with_delays(&delays).unwrap();
        prop_assert_eq!(w_v.size(), g.node_count() + delays.total_delay());
        prop_assert!(w_v.validate().is_empty());
        for r in 0..w_v.size() {
            let s: f64 = (0..w_v.size()).map(|c| w_v.get(r, c)).sum();
            prop_assert!((s - 1.0).abs() <= ROW_SUM_TOLERANCE);
        }
    }

    #[test]
    fn stationary_weights_are_a_fixed_point((g, delays, _) in network()) {
        let w = GossipMatrix::inverse_indegree(&g).unwrap();
        let base = stationary_weights(&w).unwrap();
        let info = delayed_stationary_weights(&w, &base, &delays).unwrap();
        let w_v = w.extend_with_delays(&delays).unwrap();
        prop_assert!((info.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(info.pi.iter().all(|p| *p > 0.0));
        for c in 0..w_v.size() {
            let v: f64 = (0..w_v.size()).map(|r| info.pi[r] * w_v.get(r, c)).sum();
            prop_assert!((v - info.pi[c]).abs() < 1e-12);
        }
        // Corrected weights of the real nodes all equal 1/N.
        let d = correction_factors(&info).unwrap();
        let n = g.node_count() as f64;
        for (p, d) in info.real_pi().iter().zip(&d) {
            prop_assert!((p * d - 1.0 / n).abs() < 1e-14);
        }
    }

    #[test]
    fn gossip_preserves_the_weighted_sum((g, delays, seed) in network(), rounds in 1usize..40) {
        let net = Network::with_delays(g, delays).unwrap();
        let base = stationary_weights(net.weights()).unwrap();
        let info = delayed_stationary_weights(net.weights(), &base, net.delays()).unwrap();
        let x0: Vec<Vec<f64>> = (0..net.node_count()).map(|i| vec![((seed >> i) % 17) as f64 - 8.0]).collect();
        let start: f64 = info.real_pi().iter().zip(&x0).map(|(p, x)| p * x[0]).sum();
        let mut sim = NetworkSim::new(net, x0).unwrap();
        sim.gossip_rounds(rounds);
        let ext = sim.extended_states();
        let now: f64 = info.pi.iter().zip(&ext).map(|(p, x)| p * x[0]).sum();
        prop_assert!((now - start).abs() < 1e-11);
    }

    #[test]
    fn warmup_tables_stay_normalised((g, delays, seed) in network(), rounds in 0usize..30) {
        let net = Network::with_delays(g, delays).unwrap();
        let ids = draw_ids(net.node_count(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut sim = warmup_sim(net.clone(), &ids).unwrap();
        run_warmup(&mut sim, &ids, WarmupRounds::Fixed(rounds)).unwrap();
        // Mass in flight is what keeps a node's table below one.
        for table in sim.states() {
            prop_assert!(table.total() <= 1.0 + 1e-12);
            prop_assert!(table.iter().all(|(_, v)| v >= 0.0));
        }
        if net.delays().is_empty() {
            for table in sim.states() {
                prop_assert!((table.total() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn engines_and_preservation((g, delays, seed) in network(), tau_g in 1usize..4) {
        let net = Network::with_delays(g, delays).unwrap();
        let n = net.node_count();
        let q = Quadratic::integer_targets(n).with_noise(0.7);
        let mut cfg = DtgoConfig {
            iterations: 40,
            tau_g,
            seed,
            initial: InitialState::PerNode((0..n).map(|i| vec![i as f64 - 2.0]).collect()),
            ..Default::default()
        };
        let a = dtgo_run(&net, &q, &cfg).unwrap();
        cfg.engine = Engine::Matrix;
        let b = dtgo_run(&net, &q, &cfg).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for (x, y) in sa.iter().zip(sb) {
                prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
            }
        }
        for r in a.preservation_residuals() {
            prop_assert!(r < 1e-10);
        }
    }
}
