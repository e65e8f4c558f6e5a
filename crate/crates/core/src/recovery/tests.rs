use proptest::prelude::*;

use super::*;
use crate::overlay::{EdgeTopology, NodeSpec, OverlayConfig};
use crate::simkernel::SimRng;

fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = SimRng::seed_from(seed);
    let mut out = Vec::with_capacity(len + 8);
    while out.len() < len {
        out.extend_from_slice(&rng.next_u64().to_le_bytes());
    }
    out.truncate(len);
    out
}

fn ring(n: usize, seed: u64) -> Overlay {
    let topo = EdgeTopology::generate(n, 4, &mut SimRng::seed_from(seed));
    Overlay::build(&topo, OverlayConfig::default()).unwrap()
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == size)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

#[test]
fn replication_is_the_one_one_code() {
    let state = b"operator state".to_vec();
    let frags = encode(&state, ErasureConfig::new(1, 1).unwrap(), 0).unwrap();
    assert_eq!(frags[0].data, state);
    assert_eq!(frags[1].data, state);
}

#[test]
fn first_m_fragments_are_the_padded_state() {
    let state = random_bytes(1001, 1);
    let cfg = ErasureConfig::new(4, 3).unwrap();
    let frags = encode(&state, cfg, 9).unwrap();
    assert_eq!(frags.len(), 7);
    assert!(frags
        .iter()
        .all(|f| f.data.len() == 251 && f.epoch == 9 && f.state_len == 1001));
    let mut joined: Vec<u8> = frags[..4].iter().flat_map(|f| f.data.clone()).collect();
    assert!(joined[1001..].iter().all(|b| *b == 0));
    joined.truncate(1001);
    assert_eq!(joined, state);
}

#[test]
fn every_four_of_six_decodes_sixteen_megabytes() {
    let state = random_bytes(16 << 20, 2);
    let cfg = ErasureConfig::new(4, 2).unwrap();
    let frags = encode(&state, cfg, 0).unwrap();
    let sets = subsets(6, 4);
    assert_eq!(sets.len(), 15);
    for set in sets {
        let chosen: Vec<Fragment> = set.iter().map(|&i| frags[i].clone()).collect();
        assert!(decode(&chosen, cfg).unwrap() == state, "{set:?}");
    }
}

#[test]
fn exhaustive_erasures_for_small_codes() {
    for n in 2..=8 {
        for m in 1..n {
            let cfg = ErasureConfig::new(m, n - m).unwrap();
            let state = random_bytes(97 + n * m, (n * 10 + m) as u64);
            let frags = encode(&state, cfg, 3).unwrap();
            for keep in 0..=n {
                for set in subsets(n, keep) {
                    let chosen: Vec<Fragment> = set.iter().map(|&i| frags[i].clone()).collect();
                    match decode(&chosen, cfg) {
                        Ok(s) => {
                            assert!(keep >= m);
                            assert_eq!(s, state);
                        }
                        Err(RecoveryError::InsufficientFragments { have, need }) => {
                            assert!(keep < m);
                            assert_eq!((have, need), (keep, m));
                        }
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }
}

#[test]
fn decode_errors() {
    let cfg = ErasureConfig::new(3, 2).unwrap();
    let state = random_bytes(300, 4);
    let mut frags = encode(&state, cfg, 1).unwrap();
    assert_eq!(
        decode(&frags[..2], cfg),
        Err(RecoveryError::InsufficientFragments { have: 2, need: 3 })
    );
    // Duplicates do not count twice.
    let dup = vec![frags[0].clone(), frags[0].clone(), frags[1].clone()];
    assert!(matches!(
        decode(&dup, cfg),
        Err(RecoveryError::InsufficientFragments { have: 2, .. })
    ));
    frags[4].epoch = 2;
    assert_eq!(decode(&frags, cfg), Err(RecoveryError::MixedEpoch));
    assert_eq!(
        ErasureConfig::new(200, 56),
        Err(RecoveryError::FieldSize(256))
    );
    assert!(matches!(
        ErasureConfig::new(0, 2),
        Err(RecoveryError::Config(_))
    ));
    assert_eq!(encode(&[], cfg, 0), Err(RecoveryError::EmptyState));
}

#[test]
fn header_round_trip() {
    let f = Fragment {
        index: 5,
        epoch: 0xDEAD_BEEF,
        state_len: 1 << 40,
        data: vec![1, 2, 3],
    };
    let bytes = f.to_bytes();
    assert_eq!(bytes.len(), HEADER_LEN + 3);
    assert_eq!(&bytes[..8], &[0, 0, 1, 0, 0, 0, 0, 0]);
    assert_eq!(bytes[12], 5);
    assert_eq!(Fragment::from_bytes(&bytes).unwrap(), f);
    assert!(Fragment::from_bytes(&bytes[..12]).is_err());
}

#[test]
fn two_fragments_on_three_nodes() {
    let topo = EdgeTopology::new(
        (0..3)
            .map(|i| NodeSpec {
                name: format!("n{i}"),
                zone: 0,
                capacity: 1.0,
                x: i as f64,
                y: 0.0,
            })
            .collect(),
    );
    let overlay = Overlay::build(&topo, OverlayConfig::default()).unwrap();
    let owner = overlay.id_of("n0").unwrap();
    let cfg = ErasureConfig::new(1, 1).unwrap();
    let holders = fragment_holders(&overlay, owner, cfg).unwrap();
    assert_eq!(
        holders,
        vec![overlay.id_of("n1").unwrap(), overlay.id_of("n2").unwrap()]
    );
    let too_big = ErasureConfig::new(2, 1).unwrap();
    assert!(matches!(
        fragment_holders(&overlay, owner, too_big),
        Err(RecoveryError::LeafTooSmall {
            live: 2,
            needed: 3,
            ..
        })
    ));
}

#[test]
fn holders_are_distinct_leaf_members() {
    for seed in 0..100 {
        let mut rng = SimRng::seed_from(seed);
        let n_nodes = 12 + rng.below(40);
        let overlay = ring(n_nodes, seed);
        let ids = overlay.live_ids();
        let owner = ids[rng.below(ids.len())];
        let cfg = ErasureConfig::new(1 + rng.below(6), 1 + rng.below(4)).unwrap();
        let holders = fragment_holders(&overlay, owner, cfg).unwrap();
        let mut unique = holders.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), cfg.n());
        let leaf = overlay.leaf_set(owner).unwrap();
        assert!(holders.iter().all(|h| leaf.contains(h) && *h != owner));
    }
}

#[test]
fn half_second_interval_over_five_seconds_is_ten_epochs() {
    let overlay = ring(30, 5);
    let owner = overlay.live_ids()[3];
    let mut cp = Checkpointer::new(
        &overlay,
        "op#0",
        owner,
        ErasureConfig::new(2, 1).unwrap(),
        500,
    )
    .unwrap();
    let taken = cp.run(5_000, |t| t.to_be_bytes().to_vec()).unwrap();
    assert_eq!(taken, 10);
    assert_eq!(cp.epochs, (1..=10).map(|i| i * 500).collect::<Vec<_>>());
    let last = cp.latest().unwrap();
    assert_eq!(last.epoch, 9);
    assert_eq!(
        decode(&last.fragments, last.cfg).unwrap(),
        5_000u64.to_be_bytes().to_vec()
    );
}

#[test]
fn model_at_one_one_is_one_fragment_upload() {
    let rate = LinkRate::default();
    let cfg = ErasureConfig::new(1, 1).unwrap();
    let len = 16 << 20;
    // 16 MiB at 100 Mbit/s.
    let b = len as f64 * 8.0 / 100e6 * 1e3;
    assert!((model_time_ms(cfg, len, rate) - b).abs() < 1e-9);
}

#[test]
fn model_is_monotone_over_the_grid() {
    // B held fixed: one unit per providing peer.
    let model = |m: usize, k: usize| m as f64 / (m + k - 1) as f64;
    for m in 1..=8 {
        for k in 1..=8 {
            if m < 8 {
                assert!(model(m + 1, k) > model(m, k) || k == 1, "m {m} k {k}");
            }
            if k < 8 {
                assert!(model(m, k + 1) < model(m, k), "m {m} k {k}");
            }
        }
    }
    // With k = 1 the ratio is exactly 1 for every m; with the real state
    // size the per-fragment B shrinks as m grows.
    let rate = LinkRate::default();
    let len = 16 << 20;
    for k in 1..=8 {
        for m in 1..8 {
            let a = model_time_ms(ErasureConfig::new(m, k).unwrap(), len, rate);
            let b = model_time_ms(ErasureConfig::new(m + 1, k).unwrap(), len, rate);
            assert!(
                b < a || (b - a).abs() < 1e-9,
                "state-size model, m {m} k {k}"
            );
        }
    }
}

#[test]
fn stateless_restart_moves_nothing() {
    let overlay = ring(20, 6);
    let failed = overlay.live_ids()[0];
    let r = restart_stateless(&overlay, "op#0", failed).unwrap();
    assert_eq!(r.sim_time_ms, 0.0);
    assert_eq!(r.model_time_ms, 0.0);
    assert!(r.success);
    assert!(overlay.leaf_set(failed).unwrap().contains(&r.replacement));
}

#[test]
fn recovery_tolerates_exactly_n_minus_m_dead_holders() {
    let state = random_bytes(4096, 7);
    for n in 2..=8 {
        for m in 1..n {
            let mut overlay = ring(40, 8);
            let owner = overlay.live_ids()[5];
            let cfg = ErasureConfig::new(m, n - m).unwrap();
            let mut cp = Checkpointer::new(&overlay, "op#0", owner, cfg, 1000).unwrap();
            let snapshot = cp.take(1000, &state).unwrap().clone();
            overlay.fail_nodes(&[owner]).unwrap();
            for dead in 0..n {
                for set in subsets(n, dead) {
                    let mut o = overlay.clone();
                    let victims: Vec<NodeId> = set.iter().map(|&i| snapshot.holders[i]).collect();
                    o.fail_nodes(&victims).unwrap();
                    match recover(&o, &snapshot, owner, LinkRate::default()) {
                        Ok(r) => {
                            assert!(dead <= n - m);
                            assert!(r.report.success);
                            assert_eq!(r.state, state);
                        }
                        Err(RecoveryError::Unrecoverable { report, needed }) => {
                            assert!(dead > n - m, "n {n} m {m} dead {dead}");
                            assert!(!report.success && report.fallback_restart);
                            assert_eq!(needed, m);
                            assert_eq!(report.fragments_fetched, n - dead);
                        }
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }
}

#[test]
fn recovery_needs_the_owner() {
    let overlay = ring(20, 9);
    let ids = overlay.live_ids();
    let mut cp = Checkpointer::new(
        &overlay,
        "op#0",
        ids[0],
        ErasureConfig::new(2, 2).unwrap(),
        1000,
    )
    .unwrap();
    let snap = cp.take(0, b"abc").unwrap().clone();
    assert!(matches!(
        recover(&overlay, &snap, ids[1], LinkRate::default()),
        Err(RecoveryError::NotOwner { .. })
    ));
}

#[test]
fn parallel_recovery_tracks_the_model_and_beats_one_source() {
    let state = random_bytes(16 << 20, 10);
    let mut overlay = ring(200, 11);
    let owner = overlay.live_ids()[17];
    let mut snaps = Vec::new();
    for m in 1..=8 {
        for k in 1..=8 {
            let mut cp = Checkpointer::new(
                &overlay,
                "op#0",
                owner,
                ErasureConfig::new(m, k).unwrap(),
                1000,
            )
            .unwrap();
            snaps.push(cp.take(1000, &state).unwrap().clone());
        }
    }
    overlay.fail_nodes(&[owner]).unwrap();
    for snap in &snaps {
        let r = recover(&overlay, snap, owner, LinkRate::default())
            .unwrap()
            .report;
        let rel = (r.sim_time_ms - r.model_time_ms).abs() / r.model_time_ms;
        assert!(
            rel < 0.10,
            "{:?}: sim {} model {}",
            snap.cfg,
            r.sim_time_ms,
            r.model_time_ms
        );
        if snap.cfg.m >= 2 {
            assert!(r.sim_time_ms < r.single_source_ms.unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_m_fragments_round_trip(
        len in 1usize..20_000, m in 1usize..12, k in 1usize..5, seed in any::<u64>(),
    ) {
        let cfg = ErasureConfig::new(m, k).unwrap();
        let state = random_bytes(len, seed);
        let frags = encode(&state, cfg, 0).unwrap();
        let mut rng = SimRng::seed_from(seed ^ 1);
        let mut idx: Vec<usize> = (0..cfg.n()).collect();
        rng.shuffle(&mut idx);
        let chosen: Vec<Fragment> = idx[..m].iter().map(|&i| frags[i].clone()).collect();
        prop_assert_eq!(decode(&chosen, cfg).unwrap(), state);
    }
}
