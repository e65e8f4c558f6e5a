use proptest::prelude::*;

use super::*;
use crate::simkernel::SimRng;

fn link(src: u32, dst: u32, theta: f64, base: f64) -> Link {
    Link {
        src,
        dst,
        theta,
        base_delay_ms: base,
    }
}

fn unit_graph(nodes: usize, edges: &[(u32, u32)], sink: u32) -> NetGraph {
    NetGraph::new(
        nodes,
        edges.iter().map(|&(a, b)| link(a, b, 1.0, 1.0)).collect(),
        0,
        sink,
    )
    .unwrap()
}

// Largest grid point u in [p, 1] that satisfies the budget, scanning every
// point, then a finer scan between it and the next point.
fn grid_u_star(p: f64, t: f64, budget: f64, coarse: usize, fine: usize) -> f64 {
    let ok = |u: f64| t * kl_bernoulli(p, u) <= budget;
    let step = (1.0 - p) / coarse as f64;
    let mut best = p;
    for i in 0..=coarse {
        let u = p + step * i as f64;
        if ok(u) {
            best = u;
        }
    }
    let fine_step = step / fine as f64;
    let base = best;
    for i in 0..=fine {
        let u = base + fine_step * i as f64;
        if u <= 1.0 && ok(u) {
            best = u;
        }
    }
    best
}

// Exhaustive DFS over loop-free paths from w.
fn brute_j(g: &NetGraph, costs: &[f64], w: u32) -> f64 {
    fn go(g: &NetGraph, costs: &[f64], v: u32, acc: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if v == g.sink {
            *best = best.min(acc);
            return;
        }
        for &i in g.out_links(v) {
            let x = g.link(i).dst as usize;
            if !seen[x] {
                seen[x] = true;
                go(g, costs, x as u32, acc + costs[i], seen, best);
                seen[x] = false;
            }
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[w as usize] = true;
    let mut best = f64::INFINITY;
    go(g, costs, w, 0.0, &mut seen, &mut best);
    best
}

// O(V^2) Dijkstra from the source over expected delays.
fn simple_dijkstra(g: &NetGraph) -> f64 {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[g.source as usize] = 0.0;
    for _ in 0..n {
        let Some(v) = (0..n)
            .filter(|&v| !done[v])
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[v] = true;
        for l in g.links().iter().filter(|l| l.src as usize == v) {
            let nd = dist[v] + l.base_delay_ms / l.theta;
            if nd < dist[l.dst as usize] {
                dist[l.dst as usize] = nd;
            }
        }
    }
    dist[g.sink as usize]
}

#[test]
fn kl_values() {
    assert_eq!(kl_bernoulli(0.5, 0.5), 0.0);
    assert!((kl_bernoulli(0.0, 0.3) - -(0.7f64.ln())).abs() < 1e-15);
    let expect = 0.3 * (3.0f64 / 7.0).ln() + 0.7 * (7.0f64 / 3.0).ln();
    assert!((kl_bernoulli(0.3, 0.7) - expect).abs() < 1e-12);
    assert_eq!(kl_bernoulli(0.4, 1.0), f64::INFINITY);
    assert_eq!(kl_bernoulli(0.4, 0.0), f64::INFINITY);
    assert_eq!(kl_bernoulli(1.0, 1.0), 0.0);
}

#[test]
fn omega_boundaries() {
    let perfect = LinkStats { s: 7, t: 7 };
    assert_eq!(omega(perfect, 1000, 1.0, 1e-9), 1.0);
    assert_eq!(omega(LinkStats::default(), 50, 0.5, 1e-9), 1.0);
    // log 1 = 0: no slack.
    assert_eq!(omega(LinkStats { s: 5, t: 10 }, 1, 1.0, 1e-9), 2.0);
    assert_eq!(omega(LinkStats { s: 0, t: 4 }, 1, 1.0, 1e-9), f64::INFINITY);
}

#[test]
fn omega_matches_grid_at_e_to_the_ten() {
    let stats = LinkStats { s: 5, t: 10 };
    let tau = 10f64.exp().ceil() as u64;
    let budget = (tau as f64).ln();
    let grid = grid_u_star(0.5, 10.0, budget, 1_000_000, 10_000);
    let u = u_star(stats, budget, 1e-9);
    assert!(((1.0 / u) - (1.0 / grid)).abs() <= 1e-6 * (1.0 / grid));
    assert!(omega(stats, tau, 1.0, 1e-9) >= 1.0);
}

#[test]
fn unit_weights_give_hop_distance() {
    let g = unit_graph(5, &[(0, 1), (1, 2), (2, 4), (0, 3), (3, 4), (1, 4)], 4);
    let stats = StatsTable::new(&g);
    let costs = link_costs(&g, &stats, 0.5, 1e-9);
    let j = cost_to_go(&g, &costs, &[], HopLimit::All);
    assert_eq!(j, vec![2.0, 1.0, 1.0, 1.0, 0.0]);
}

#[test]
fn hop_limited_cost_counts_only_leading_links() {
    let g = NetGraph::new(
        4,
        vec![
            link(0, 1, 1.0, 1.0),
            link(1, 3, 1.0, 10.0),
            link(0, 2, 1.0, 2.0),
            link(2, 3, 1.0, 2.0),
        ],
        0,
        3,
    )
    .unwrap();
    let costs: Vec<f64> = g.links().iter().map(|l| l.base_delay_ms).collect();
    assert_eq!(cost_to_go(&g, &costs, &[], HopLimit::All)[0], 4.0);
    assert_eq!(cost_to_go(&g, &costs, &[], HopLimit::Hops(1))[0], 1.0);
    assert_eq!(cost_to_go(&g, &costs, &[], HopLimit::Hops(2))[0], 4.0);
}

#[test]
fn hop_limited_paths_must_still_reach_the_sink() {
    // 0 -> 1 is cheap but 1 is a dead end.
    let g = NetGraph::new(
        4,
        vec![
            link(0, 1, 1.0, 1.0),
            link(0, 2, 1.0, 5.0),
            link(2, 3, 1.0, 5.0),
        ],
        0,
        3,
    )
    .unwrap();
    let costs: Vec<f64> = g.links().iter().map(|l| l.base_delay_ms).collect();
    let j = cost_to_go(&g, &costs, &[], HopLimit::Hops(1));
    assert_eq!(j[0], 5.0);
    assert_eq!(j[1], f64::INFINITY);
}

#[test]
fn single_link_is_always_taken() {
    let g = NetGraph::new(2, vec![link(0, 1, 0.5, 3.0)], 0, 1).unwrap();
    for policy in [
        PolicyKind::Lookahead,
        PolicyKind::NextHop,
        PolicyKind::EndToEnd { l: 1.0 },
        PolicyKind::Optimal,
    ] {
        let ledger = run_regret(&g, policy, BanditConfig::default(), 20, 1).unwrap();
        assert!(ledger.path_of.iter().all(|&p| p == 0));
        assert!(ledger.expected.iter().all(|&r| r == 0.0));
        // Delays are whole multiples of the base delay.
        assert!(ledger
            .delays
            .iter()
            .all(|d| (d / 3.0).fract() == 0.0 && *d >= 3.0));
    }
}

#[test]
fn lower_cost_to_go_wins_when_omega_ties() {
    // 0 -> 1 -> 4 costs 1 + 3, 0 -> 2 -> 4 costs 1 + 7.
    let g = NetGraph::new(
        5,
        vec![
            link(0, 1, 1.0, 1.0),
            link(0, 2, 1.0, 1.0),
            link(1, 4, 1.0, 3.0),
            link(2, 4, 1.0, 7.0),
            link(0, 3, 1.0, 20.0),
            link(3, 4, 1.0, 1.0),
        ],
        0,
        4,
    )
    .unwrap();
    let stats = StatsTable::new(&g);
    let mut visited = vec![false; 5];
    visited[0] = true;
    let i = step_lookahead(&g, &stats, 0, &visited, &BanditConfig::default()).unwrap();
    assert_eq!(g.link(i).dst, 1);
}

#[test]
fn ties_go_to_the_lowest_next_hop() {
    let g = unit_graph(4, &[(0, 2), (0, 1), (1, 3), (2, 3)], 3);
    let stats = StatsTable::new(&g);
    let visited = [true, false, false, false];
    let i = step_lookahead(&g, &stats, 0, &visited, &BanditConfig::default()).unwrap();
    assert_eq!(g.link(i).dst, 1);
}

// Cheap first link into an expensive tail versus a dearer first link into
// a cheap tail.
fn trap_graph() -> NetGraph {
    NetGraph::new(
        5,
        vec![
            link(0, 1, 1.0, 10.0),
            link(1, 4, 0.1, 10.0),
            link(0, 2, 0.5, 10.0),
            link(2, 3, 1.0, 10.0),
            link(3, 4, 1.0, 10.0),
        ],
        0,
        4,
    )
    .unwrap()
}

#[test]
fn lookahead_escapes_the_trap_next_hop_does_not() {
    let g = trap_graph();
    let optimal = g.optimal_path();
    assert_eq!(g.path_nodes(&optimal), vec![0, 2, 3, 4]);
    let mut la = Router::new(&g, PolicyKind::Lookahead, BanditConfig::default()).unwrap();
    let mut nh = Router::new(&g, PolicyKind::NextHop, BanditConfig::default()).unwrap();
    let mut rng = SimRng::seed_from(3);
    for _ in 0..50 {
        la.route_packet(&mut rng).unwrap();
        nh.route_packet(&mut rng).unwrap();
    }
    let mut la_hits = 0;
    let mut nh_hits = 0;
    for _ in 0..200 {
        la_hits += usize::from(la.route_packet(&mut rng).unwrap().path == optimal);
        nh_hits += usize::from(nh.route_packet(&mut rng).unwrap().path == optimal);
    }
    assert!(la_hits > 180, "lookahead {la_hits}");
    assert!(nh_hits < 100, "next-hop {nh_hits}");
}

#[test]
fn first_visit_always_explores() {
    // Link to 1 has a known low delay; on a node's first visit the choice
    // must still be uniform.
    let g = unit_graph(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], 3);
    let mut picks = [0usize; 2];
    for seed in 0..4000 {
        let mut stats = StatsTable::new(&g);
        stats.links[0] = LinkStats { s: 10, t: 10 };
        stats.delay_sum[0] = 10.0;
        stats.links[1] = LinkStats { s: 10, t: 10 };
        stats.delay_sum[1] = 1000.0;
        let mut rng = SimRng::seed_from(seed);
        let i = step_nexthop(&g, &mut stats, 0, &[true, false, false, false], &mut rng).unwrap();
        picks[g.link(i).dst as usize - 1] += 1;
    }
    assert!(picks[0] > 1800 && picks[1] > 1800, "{picks:?}");
}

#[test]
fn greedy_frequency_follows_the_epsilon_schedule() {
    let g = NetGraph::new(
        3,
        vec![
            link(0, 1, 1.0, 2.0),
            link(0, 2, 1.0, 5.0),
            link(2, 1, 1.0, 1.0),
        ],
        0,
        1,
    )
    .unwrap();
    let mut stats = StatsTable::new(&g);
    stats.links[0] = LinkStats { s: 1, t: 1 };
    stats.delay_sum[0] = 2.0;
    stats.links[1] = LinkStats { s: 1, t: 1 };
    stats.delay_sum[1] = 5.0;
    stats.node_visits[0] = 1000;
    let visited = [true, false, false];
    let mut rng = SimRng::seed_from(4);
    let steps = 100_000;
    let mut cheap = 0;
    for _ in 0..steps {
        let i = step_nexthop(&g, &mut stats, 0, &visited, &mut rng).unwrap();
        cheap += usize::from(i == 0);
    }
    // Exploit with 1 - 1/N, N >= 1001; explore picks the cheap link half
    // the time.
    assert!(cheap as f64 / steps as f64 >= 0.95);
}

#[test]
fn end_to_end_tries_every_path_then_ranks() {
    let g = unit_graph(4, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)], 3);
    let paths = g.enumerate_paths(100).unwrap();
    let nodes: Vec<Vec<u32>> = paths.iter().map(|p| g.path_nodes(p)).collect();
    assert_eq!(nodes, vec![vec![0, 1, 2, 3], vec![0, 1, 3], vec![0, 2, 3]]);
    let mut stats = StatsTable::new(&g);
    let mut ps = vec![PathStats::default(); 3];
    assert_eq!(plan_end_to_end(&paths, &ps, &stats, 1.0, 1.0), 0);
    ps[0] = PathStats {
        visits: 1,
        delay_sum: 3.0,
    };
    assert_eq!(plan_end_to_end(&paths, &ps, &stats, 1.0, 1.0), 1);
    ps[1] = PathStats {
        visits: 1,
        delay_sum: 2.0,
    };
    ps[2] = PathStats {
        visits: 1,
        delay_sum: 2.5,
    };
    for i in [0, 1, 2, 3] {
        stats.links[i].s = 1;
    }
    // tau = 1: pure empirical ranking.
    assert_eq!(plan_end_to_end(&paths, &ps, &stats, 1.0, 1.0), 1);
    assert!(matches!(g.enumerate_paths(2), Err(BanditError::PathCap(2))));
}

#[test]
fn perfect_links_take_one_attempt() {
    let g = NetGraph::new(2, vec![link(0, 1, 1.0, 4.0)], 0, 1).unwrap();
    let mut stats = StatsTable::new(&g);
    let mut rng = SimRng::seed_from(5);
    for k in 1..=100 {
        assert_eq!(transmit(&g, 0, &mut stats, &mut rng).unwrap(), 1);
        assert_eq!(stats.tau, 1 + k);
    }
    assert_eq!(stats.delay_sum[0], 400.0);
    assert_eq!(stats.links[0], LinkStats { s: 100, t: 100 });
}

#[test]
fn geometric_mean_is_inverse_theta() {
    let mut rng = SimRng::seed_from(6);
    let n = 1_000_000;
    let total: u64 = (0..n).map(|_| geometric(0.5, &mut rng)).sum();
    let mean = total as f64 / n as f64;
    assert!((mean - 2.0).abs() < 0.01, "{mean}");
}

#[test]
fn optimal_path_matches_a_second_dijkstra() {
    for seed in 0..100 {
        let mut rng = SimRng::seed_from(seed);
        let g = random_net(6 + rng.below(10), 30, (10.0, 100.0), &mut rng).unwrap();
        let p = g.optimal_path();
        let d = g.expected_delay(&p);
        let oracle = simple_dijkstra(&g);
        assert!(
            (d - oracle).abs() <= 1e-9 * oracle,
            "seed {seed}: {d} vs {oracle}"
        );
        let ledger =
            run_regret(&g, PolicyKind::Optimal, BanditConfig::default(), 50, seed).unwrap();
        assert!(ledger.expected.iter().all(|&r| r == 0.0));
        assert_eq!(ledger.first_optimal_trial, Some(1));
    }
}

#[test]
fn graph_csv_round_trip() {
    let mut rng = SimRng::seed_from(7);
    let g = grid_road(16, 30, (50.0, 250.0), &mut rng).unwrap();
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("#source=0,sink=15\nsrc,dst,theta,base_delay_ms\n"));
    assert!(!text.contains('\r'));
    assert_eq!(NetGraph::read_csv(buf.as_slice()).unwrap(), g);
    assert!(NetGraph::read_csv("src,dst,theta,base_delay_ms\n".as_bytes()).is_err());
    let low = "#source=0,sink=1\nsrc,dst,theta,base_delay_ms\n0,1,0.001,5\n";
    assert!(NetGraph::read_csv(low.as_bytes()).is_err());
}

#[test]
fn grid_roads_have_the_requested_shape() {
    for (nodes, links) in [(25, 32), (36, 64), (64, 128), (144, 256), (16, 30)] {
        let g = grid_road(
            nodes,
            links,
            (50.0, 250.0),
            &mut SimRng::seed_from(nodes as u64),
        )
        .unwrap();
        assert_eq!(g.node_count(), nodes);
        assert_eq!(g.links().len(), links);
        for l in g.links() {
            let e = l.expected_delay();
            assert!((50.0 - 1e-9..=250.0 + 1e-9).contains(&e));
        }
        // Every non-sink node can move on.
        assert!((0..nodes as u32 - 1).all(|v| !g.out_links(v).is_empty()));
    }
    assert!(grid_road(25, 100, (50.0, 250.0), &mut SimRng::seed_from(1)).is_err());
}

#[test]
fn config_validation() {
    let bad = BanditConfig {
        c: 0.0,
        ..BanditConfig::default()
    };
    assert!(bad.validate().is_err());
    let g = unit_graph(2, &[(0, 1)], 1);
    assert!(Router::new(&g, PolicyKind::EndToEnd { l: 0.0 }, BanditConfig::default()).is_err());
    assert!(run_regret(&g, PolicyKind::NextHop, BanditConfig::default(), 0, 1).is_err());
}

fn small_graph() -> impl Strategy<Value = NetGraph> {
    (3usize..=10, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = SimRng::seed_from(seed);
        let links = (n - 1) + rng.below(n * (n - 1) - (n - 1) + 1);
        random_net(n, links, (1.0, 50.0), &mut rng).unwrap()
    })
}

proptest! {
    #[test]
    fn omega_at_least_one_and_non_increasing_in_tau(
        s in 1u64..500, extra in 0u64..500, tau in 1u64..1_000_000, dt in 1u64..1_000_000, c in 0.001f64..=1.0,
    ) {
        let stats = LinkStats { s, t: s + extra };
        let a = omega(stats, tau, c, 1e-9);
        let b = omega(stats, tau + dt, c, 1e-9);
        prop_assert!(a >= 1.0 && b >= 1.0);
        prop_assert!(b <= a * (1.0 + 1e-8));
    }

    #[test]
    fn cost_to_go_equals_enumeration(g in small_graph(), seed in any::<u64>()) {
        let mut rng = SimRng::seed_from(seed);
        let mut stats = StatsTable::new(&g);
        for (i, s) in stats.links.iter_mut().enumerate() {
            if rng.bernoulli(0.7).unwrap() {
                let succ = 1 + rng.below(20) as u64;
                *s = LinkStats { s: succ, t: succ + rng.below(40) as u64 };
                stats.delay_sum[i] = 1.0;
            }
        }
        stats.tau = 1 + rng.below(10_000) as u64;
        let costs = link_costs(&g, &stats, 0.3, 1e-9);
        let j = cost_to_go(&g, &costs, &[], HopLimit::All);
        for w in 0..g.node_count() as u32 {
            let b = brute_j(&g, &costs, w);
            prop_assert!(j[w as usize] == b || (j[w as usize] - b).abs() <= 1e-12 * b, "node {w}: {} vs {b}", j[w as usize]);
        }
    }

    #[test]
    fn expected_regret_never_decreases(seed in any::<u64>(), which in 0usize..3) {
        let mut rng = SimRng::seed_from(seed);
        let g = grid_road(16, 30, (50.0, 250.0), &mut rng).unwrap();
        let policy = [PolicyKind::Lookahead, PolicyKind::NextHop, PolicyKind::EndToEnd { l: 1.0 }][which];
        let ledger = run_regret(&g, policy, BanditConfig::default(), 60, seed).unwrap();
        prop_assert!(ledger.expected.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(ledger.expected[0] >= 0.0);
    }
}
