use crate::accel::{layer_cycles, AcceleratorDesign};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, LatencyReport, MappedSet, Mapping};
use crate::sharding::{Dim, ParallelismStrategy};
use crate::topology::{AccSetCandidate, SystemTopology};
use crate::workload::{ConvLayer, Workload};

/// ES over the two largest loop dimensions with the most balanced
/// factorization of `p` (larger factor on the larger dim), no SS. Falls back
/// to the next dims when a factor does not fit.
pub fn baseline_strategy(layer: &ConvLayer, p: u32) -> ParallelismStrategy {
    if p <= 1 {
        return ParallelismStrategy::none();
    }
    let mut dims = Dim::ALL;
    dims.sort_by(|a, b| b.extent(layer).cmp(&a.extent(layer)).then(a.cmp(b)));
    let hi = (1..=p).find(|f| p.is_multiple_of(*f) && f * f >= p).unwrap_or(p);
    let lo = p / hi;
    for i in 0..dims.len() {
        for j in i + 1..dims.len() {
            if let Ok(s) = ParallelismStrategy::new(&[(dims[i], hi), (dims[j], lo)], None) {
                if s.fits(layer) {
                    return s;
                }
            }
        }
    }
    ParallelismStrategy::new(&[(dims[0], p)], None).expect("degree is positive")
}

/// The comparison mapper: the two topology groups as sets, the first half of
/// the layers (rounded up) on the first group, each set configured with the
/// design that minimizes its unsharded compute cycles.
pub fn run_baseline(workload: &Workload, topo: &SystemTopology, designs: &[AcceleratorDesign], elem_bytes: u64) -> Result<(Mapping, LatencyReport)> {
    let groups = topo.groups();
    if groups.len() != 2 {
        return Err(Error::UnsupportedBaseline(format!(
            "the baseline needs exactly two accelerator groups, the topology has {}",
            groups.len()
        )));
    }
    if designs.is_empty() {
        return Err(Error::Validation("no accelerator designs given".into()));
    }
    let n = workload.len();
    let half = n.div_ceil(2);
    let mut sets = Vec::new();
    let mut strategies = Vec::with_capacity(n);
    for (group, range) in groups.into_iter().zip([0..half, half..n]) {
        if range.is_empty() {
            continue;
        }
        let layers = &workload.layers[range.clone()];
        let design = designs
            .iter()
            .min_by_key(|d| layers.iter().map(|l| layer_cycles(d, l)).sum::<u64>())
            .expect("designs is nonempty");
        let p = group.len() as u32;
        strategies.extend(layers.iter().map(|l| baseline_strategy(l, p)));
        sets.push(MappedSet {
            accset: AccSetCandidate::new(topo, group),
            design: design.clone(),
            layers: range,
        });
    }
    let mapping = Mapping { sets, strategies };
    let report = evaluate(&mapping, workload, topo, elem_bytes)?;
    Ok((mapping, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::builtin_designs;
    use crate::topology::build_f1_topology;
    use crate::workload::catalog::catalog;

    #[test]
    fn two_largest_dims() {
        let l = ConvLayer::new(512, 512, 14, 14, 3, 3, 1);
        let s = baseline_strategy(&l, 4);
        assert_eq!(s, ParallelismStrategy::new(&[(Dim::Cout, 2), (Dim::Cin, 2)], None).unwrap());
    }

    #[test]
    fn ties_follow_dim_order() {
        let l = ConvLayer::new(14, 14, 14, 14, 3, 3, 1);
        let s = baseline_strategy(&l, 4);
        assert_eq!(s.es, vec![(Dim::Cout, 2), (Dim::Cin, 2)]);
        let l = ConvLayer::new(64, 3, 224, 224, 3, 3, 1);
        assert_eq!(baseline_strategy(&l, 4).es, vec![(Dim::H, 2), (Dim::W, 2)]);
    }

    #[test]
    fn alexnet_split() {
        let topo = build_f1_topology();
        let w = catalog("alexnet").unwrap();
        let (m, r) = run_baseline(&w, &topo, &builtin_designs(), 2).unwrap();
        assert_eq!(m.sets.len(), 2);
        assert_eq!(m.sets[0].layers, 0..3);
        assert_eq!(m.sets[1].layers, 3..5);
        assert_eq!(m.sets[0].accset.members, vec![0, 1, 2, 3]);
        assert!(r.total_ms > 0.0);
    }

    #[test]
    fn single_group_is_unsupported() {
        let topo = SystemTopology::new(vec![vec![0.0, 8e9], vec![8e9, 0.0]], vec![2e9; 2], vec![1 << 30; 2], 1e-6).unwrap();
        let w = catalog("alexnet").unwrap();
        assert!(matches!(
            run_baseline(&w, &topo, &builtin_designs(), 2),
            Err(Error::UnsupportedBaseline(_))
        ));
    }
}
