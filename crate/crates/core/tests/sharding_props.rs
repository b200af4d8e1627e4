use accmap::sharding::{shard_layout, DEFAULT_ELEM_BYTES};
use accmap::{enumerate_strategies, memory_footprint, ConvLayer, Dim, ParallelismStrategy};
use proptest::prelude::*;

fn small_layer() -> impl Strategy<Value = ConvLayer> {
    (1..=8u32, 1..=8u32, 4..=8u32, 1..=8u32, 1..=8u32, 1..=8u32).prop_map(|(co, ci, h, w, kh, kw)| ConvLayer::new(co, ci, h, w, kh, kw, 1))
}

fn layer_with_strategy() -> impl Strategy<Value = (ConvLayer, ParallelismStrategy)> {
    (small_layer(), prop_oneof![Just(2u32), Just(4u32)], any::<prop::sample::Index>()).prop_map(|(l, p, i)| {
        let all = enumerate_strategies(&l, p).unwrap();
        let s = i.get(&all).clone();
        (l, s)
    })
}

/// Visit counts of every point of the six-deep loop nest.
fn coverage(layer: &ConvLayer, s: &ParallelismStrategy) -> Vec<u32> {
    let ext = Dim::ALL.map(|d| d.extent(layer) as usize);
    let mut hits = vec![0u32; ext.iter().product()];
    for m in 0..s.p {
        for t in 0..s.phases() {
            let r = s.member_phase_ranges(layer, m, t);
            for a in r[0].clone() {
                for b in r[1].clone() {
                    for c in r[2].clone() {
                        for d in r[3].clone() {
                            for e in r[4].clone() {
                                for f in r[5].clone() {
                                    let idx = [a, b, c, d, e, f].iter().zip(&ext).fold(0, |acc, (&i, &n)| acc * n + i as usize);
                                    hits[idx] += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    hits
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn shards_tile_the_loop_nest_once((layer, s) in layer_with_strategy()) {
        prop_assert!(coverage(&layer, &s).iter().all(|&h| h == 1), "{} on {:?}", s, layer);
    }

    #[test]
    fn busiest_shard_flops_bound((layer, s) in layer_with_strategy()) {
        let sharded = (s.p * s.phases()) as u64 * s.per_phase_layer(&layer).flops();
        prop_assert!(sharded >= layer.flops());
        if Dim::ALL.iter().all(|&d| d.extent(&layer) % s.split(d) == 0) {
            prop_assert_eq!(sharded, layer.flops());
        }
    }

    #[test]
    fn shards_never_exceed_their_tensor((layer, s) in layer_with_strategy()) {
        let full = shard_layout(&layer, &ParallelismStrategy::none(), DEFAULT_ELEM_BYTES).unwrap();
        let part = shard_layout(&layer, &s, DEFAULT_ELEM_BYTES).unwrap();
        prop_assert!(part.in_shard <= full.in_shard);
        prop_assert!(part.weight_shard <= full.weight_shard);
        prop_assert!(part.out_shard <= full.out_shard);
        prop_assert!(part.shared_shard <= full.in_shard + full.weight_shard);
        let mem = memory_footprint(&[(layer, s)], DEFAULT_ELEM_BYTES).unwrap();
        prop_assert_eq!(mem, part.weight_bytes() + part.in_bytes() + part.out_bytes() + part.shared_bytes());
    }

    #[test]
    fn allreduce_follows_reduction_splits((layer, s) in layer_with_strategy()) {
        let shards = shard_layout(&layer, &s, DEFAULT_ELEM_BYTES).unwrap();
        let reduction = s.es.iter().any(|(d, _)| matches!(d, Dim::Cin | Dim::Kh | Dim::Kw));
        prop_assert_eq!(shards.needs_allreduce, reduction);
    }

    #[test]
    fn enumeration_is_valid_and_distinct(layer in small_layer(), p in prop_oneof![Just(2u32), Just(4u32)]) {
        let all = enumerate_strategies(&layer, p).unwrap();
        for s in &all {
            prop_assert_eq!(s.p, p);
            prop_assert!(s.fits(&layer));
        }
        let mut dedup = all.clone();
        dedup.sort_by_key(|s| s.to_string() + &format!("{:?}", s.es));
        dedup.dedup();
        prop_assert_eq!(dedup.len(), all.len());
    }
}

#[test]
fn non_power_of_two_degree_is_rejected() {
    let layer = ConvLayer::square(8, 8, 8, 3, 1);
    assert!(enumerate_strategies(&layer, 3).is_err());
}
