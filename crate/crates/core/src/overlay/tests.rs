use proptest::prelude::*;

use super::*;
use crate::simkernel::SimRng;

fn spec(name: &str, zone: u32, capacity: f64, x: f64, y: f64) -> NodeSpec {
    NodeSpec {
        name: name.to_string(),
        zone,
        capacity,
        x,
        y,
    }
}

fn ring(n: usize, seed: u64) -> Overlay {
    let mut rng = SimRng::seed_from(seed);
    let topo = EdgeTopology::generate(n, 20, &mut rng);
    Overlay::build(&topo, OverlayConfig::default()).unwrap()
}

fn brute_closest(o: &Overlay, key: u128) -> NodeId {
    *o.live_ids()
        .iter()
        .min_by_key(|id| (ring_distance(id.0, key), id.0))
        .unwrap()
}

fn assert_tables_consistent(o: &Overlay) {
    let bits = o.config().digit_bits;
    for id in o.live_ids() {
        for (row, col, e) in o.routing_entries(id).unwrap() {
            assert!(o.is_live(e), "{id} references dead {e}");
            assert_eq!(shared_prefix_len(id.0, e.0, bits), row);
            assert_eq!(e.digit(row, bits), col);
            assert_ne!(id.digit(row, bits), col, "own column must stay empty");
        }
        let leaf = o.leaf_set(id).unwrap();
        assert_eq!(leaf.len(), o.config().leaf_capacity.min(o.len() - 1));
        assert!(!leaf.contains(&id));
        for m in &leaf {
            assert!(o.is_live(*m));
        }
        // Exactly the physically nearest live peers.
        let mut all: Vec<(f64, NodeId)> = o
            .live_ids()
            .into_iter()
            .filter(|&m| m != id)
            .map(|m| (o.distance(id, m).unwrap(), m))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect: Vec<NodeId> = all.iter().take(leaf.len()).map(|e| e.1).collect();
        assert_eq!(leaf, expect);
    }
}

#[test]
fn singleton_ring_is_empty() {
    let mut o = Overlay::new(OverlayConfig::default(), RttModel::default()).unwrap();
    let a = o.join(spec("a", 0, 1.0, 0.0, 0.0)).unwrap();
    assert!(o.routing_entries(a).unwrap().is_empty());
    assert!(o.leaf_set(a).unwrap().is_empty());
    assert_eq!(o.route(a, 12345).unwrap().nodes, vec![a]);
}

#[test]
fn two_nodes_know_each_other() {
    let mut o = Overlay::new(OverlayConfig::default(), RttModel::default()).unwrap();
    let a = o.join(spec("a", 0, 1.0, 0.0, 0.0)).unwrap();
    let b = o.join(spec("b", 0, 1.0, 1.0, 0.0)).unwrap();
    assert_eq!(o.leaf_set(a).unwrap(), vec![b]);
    assert_eq!(o.leaf_set(b).unwrap(), vec![a]);
    let mut rng = SimRng::seed_from(1);
    for _ in 0..100 {
        let key = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        assert!(o.route(a, key).unwrap().hops() <= 1);
        assert!(o.route(b, key).unwrap().hops() <= 1);
    }
}

#[test]
fn duplicate_name_conflicts() {
    let mut o = Overlay::new(OverlayConfig::default(), RttModel::default()).unwrap();
    o.join(spec("a", 0, 1.0, 0.0, 0.0)).unwrap();
    assert_eq!(
        o.join(spec("a", 1, 2.0, 5.0, 5.0)),
        Err(OverlayError::DuplicateName("a".into()))
    );
}

#[test]
fn rejects_bad_config() {
    let cfg = OverlayConfig {
        digit_bits: 3,
        ..OverlayConfig::default()
    };
    assert!(Overlay::new(cfg, RttModel::default()).is_err());
}

#[test]
fn hop_bound_arithmetic() {
    let cfg = OverlayConfig::default();
    assert_eq!(cfg.log_hops(1), 0);
    assert_eq!(cfg.log_hops(16), 1);
    assert_eq!(cfg.log_hops(17), 2);
    assert_eq!(cfg.log_hops(10_000), 4);
    assert_eq!(cfg.hop_bound(10_000), 6);
}

#[test]
fn thousand_joins_keep_prefix_invariant() {
    let o = ring(1000, 7);
    assert_eq!(o.len(), 1000);
    assert_tables_consistent(&o);
}

#[test]
fn self_route_is_zero_hops() {
    let o = ring(50, 3);
    for id in o.live_ids() {
        let p = o.route(id, id.0).unwrap();
        assert_eq!(p.nodes, vec![id]);
        assert_eq!(p.hops(), 0);
    }
}

#[test]
fn routes_end_at_closest_node_and_make_prefix_progress() {
    let o = ring(512, 11);
    let ids = o.live_ids();
    let bits = o.config().digit_bits;
    let bound = o.config().hop_bound(o.len()) as usize;
    let mut rng = SimRng::seed_from(12);
    for _ in 0..5000 {
        let from = ids[rng.below(ids.len())];
        let key = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        let p = o.route(from, key).unwrap();
        assert_eq!(p.destination(), brute_closest(&o, key));
        assert!(p.hops() <= bound, "{} hops", p.hops());
        // Every hop either lengthens the shared prefix or moves numerically
        // closer.
        for w in p.nodes.windows(2) {
            let longer =
                shared_prefix_len(w[1].0, key, bits) > shared_prefix_len(w[0].0, key, bits);
            let nearer = ring_distance(w[1].0, key) < ring_distance(w[0].0, key);
            assert!(longer || nearer, "{:?}", p.nodes);
        }
    }
}

#[test]
fn closest_node_matches_brute_force() {
    let o = ring(300, 2);
    let mut rng = SimRng::seed_from(3);
    for _ in 0..2000 {
        let key = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        assert_eq!(o.closest_node(key).unwrap(), brute_closest(&o, key));
    }
}

#[test]
fn no_candidates_for_own_key() {
    let o = ring(40, 5);
    let id = o.live_ids()[3];
    assert!(o.next_hop_candidates(id, id.0).unwrap().is_empty());
}

/// Finds two names whose ids share their first digit but differ from the
/// first digit of `at`.
fn twin_names(at: NodeId) -> (String, String) {
    let mut by_digit: HashMap<usize, String> = HashMap::new();
    for i in 0.. {
        let name = format!("twin-{i}");
        let d = NodeId::from_name(&name).digit(0, 4);
        if d == at.digit(0, 4) {
            continue;
        }
        if let Some(prev) = by_digit.get(&d) {
            return (prev.clone(), name);
        }
        by_digit.insert(d, name);
    }
    unreachable!()
}

#[test]
fn equal_rtt_prefers_higher_capacity() {
    let mut o = Overlay::new(OverlayConfig::default(), RttModel::default()).unwrap();
    let at = o.join(spec("origin", 0, 1.0, 0.0, 0.0)).unwrap();
    let (n4, n8) = twin_names(at);
    let a = o.join(spec(&n4, 0, 4.0, 3.0, 4.0)).unwrap();
    let b = o.join(spec(&n8, 0, 8.0, 4.0, 3.0)).unwrap();
    let key = a.0 ^ 1;
    let c = o.next_hop_candidates(at, key).unwrap();
    assert_eq!(c, vec![b, a]);
}

#[test]
fn candidate_order_is_monotone() {
    let o = ring(400, 9);
    let ids = o.live_ids();
    let mut rng = SimRng::seed_from(10);
    for _ in 0..2000 {
        let at = ids[rng.below(ids.len())];
        let key = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        let c = o.next_hop_candidates(at, key).unwrap();
        for w in c.windows(2) {
            let ka = (
                o.rtt(at, w[0]).unwrap(),
                -o.spec(w[0]).unwrap().capacity,
                w[0],
            );
            let kb = (
                o.rtt(at, w[1]).unwrap(),
                -o.spec(w[1]).unwrap().capacity,
                w[1],
            );
            assert!(
                ka.partial_cmp(&kb) != Some(Ordering::Greater),
                "{ka:?} > {kb:?}"
            );
        }
    }
}

#[test]
fn failing_nobody_repairs_nothing() {
    let mut o = ring(20, 1);
    let r = o.fail_nodes(&[]).unwrap();
    assert_eq!(r.entries_repaired, 0);
    assert_eq!(r.time_ms, 0.0);
}

#[test]
fn failing_one_of_three() {
    let mut o = Overlay::new(OverlayConfig::default(), RttModel::default()).unwrap();
    let a = o.join(spec("a", 0, 1.0, 0.0, 0.0)).unwrap();
    let b = o.join(spec("b", 0, 1.0, 1.0, 0.0)).unwrap();
    let c = o.join(spec("c", 0, 1.0, 0.0, 1.0)).unwrap();
    let r = o.fail_nodes(&[b]).unwrap();
    assert_eq!(r.failed, 1);
    assert_eq!(o.leaf_set(a).unwrap(), vec![c]);
    assert_eq!(o.leaf_set(c).unwrap(), vec![a]);
    assert!(!o.is_live(b));
    assert_eq!(
        o.route(a, b.0).unwrap().destination(),
        brute_closest(&o, b.0)
    );
}

#[test]
fn failing_everyone_is_an_error() {
    let mut o = ring(5, 1);
    let all = o.live_ids();
    assert_eq!(o.fail_nodes(&all), Err(OverlayError::EmptyRing));
}

#[test]
fn failing_a_dead_node_is_an_error() {
    let mut o = ring(5, 1);
    let v = o.live_ids()[0];
    o.fail_nodes(&[v]).unwrap();
    assert_eq!(o.fail_nodes(&[v]), Err(OverlayError::NotLive(v)));
}

#[test]
fn mass_failure_repairs_in_roughly_constant_time() {
    let base = ring(1000, 21);
    let ids = base.live_ids();
    let mut one = base.clone();
    let single = one.fail_nodes(&[ids[500]]).unwrap();
    assert_tables_consistent(&one);

    let mut rng = SimRng::seed_from(22);
    let mut pool = ids.clone();
    rng.shuffle(&mut pool);
    let mut many = base.clone();
    let report = many.fail_nodes(&pool[..100]).unwrap();
    assert_eq!(report.failed, 100);
    assert_tables_consistent(&many);
    assert!(report.entries_repaired > single.entries_repaired);
    assert!(
        report.time_ms <= 3.0 * single.time_ms,
        "{} vs {}",
        report.time_ms,
        single.time_ms
    );
    for _ in 0..1000 {
        let from = many.live_ids()[rng.below(900)];
        let key = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        assert_eq!(
            many.route(from, key).unwrap().destination(),
            brute_closest(&many, key)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn routes_stay_correct_under_churn(seed in 0u64..10_000, n in 2usize..120, kill in 0usize..40) {
        let mut o = ring(n, seed);
        let mut rng = SimRng::seed_from(seed ^ 0xdead);
        let mut ids = o.live_ids();
        rng.shuffle(&mut ids);
        let kill = kill.min(n - 1);
        o.fail_nodes(&ids[..kill]).unwrap();
        let live = o.live_ids();
        for _ in 0..50 {
            let from = live[rng.below(live.len())];
            let key = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
            let p = o.route(from, key).unwrap();
            prop_assert_eq!(p.destination(), brute_closest(&o, key));
            let unique: HashSet<_> = p.nodes.iter().collect();
            prop_assert_eq!(unique.len(), p.nodes.len());
        }
    }
}
