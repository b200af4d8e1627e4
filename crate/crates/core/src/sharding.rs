//! Exclusive-shard (ES) / shared-shard (SS) parallelism strategies.
//!
//! A strategy splits up to two loop dimensions into exclusive shards whose
//! factors multiply to the parallelism degree `p`, and optionally circulates
//! one dimension as `p` shared shards around a logical ring over `p`
//! compute phases. Splitting a reduction dimension (`Cin`, `Kh`, `Kw`) as
//! ES leaves partial outputs that must be all-reduced.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{AccSetCandidate, SystemTopology};
use crate::workload::ConvLayer;

/// Default bytes per tensor element (16-bit datapath).
pub const DEFAULT_ELEM_BYTES: u64 = 2;

/// The six loop dimensions of a convolution, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    Cout,
    Cin,
    H,
    W,
    Kh,
    Kw,
}

impl Dim {
    pub const ALL: [Dim; 6] = [Dim::Cout, Dim::Cin, Dim::H, Dim::W, Dim::Kh, Dim::Kw];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn extent(self, layer: &ConvLayer) -> u32 {
        match self {
            Dim::Cout => layer.c_out,
            Dim::Cin => layer.c_in,
            Dim::H => layer.h,
            Dim::W => layer.w,
            Dim::Kh => layer.k_h,
            Dim::Kw => layer.k_w,
        }
    }

    pub fn is_reduction(self) -> bool {
        matches!(self, Dim::Cin | Dim::Kh | Dim::Kw)
    }

    pub fn name(self) -> &'static str {
        match self {
            Dim::Cout => "Cout",
            Dim::Cin => "Cin",
            Dim::H => "H",
            Dim::W => "W",
            Dim::Kh => "Kh",
            Dim::Kw => "Kw",
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn with_extent(layer: &ConvLayer, dim: Dim, v: u32) -> ConvLayer {
    let mut l = *layer;
    match dim {
        Dim::Cout => l.c_out = v,
        Dim::Cin => l.c_in = v,
        Dim::H => l.h = v,
        Dim::W => l.w = v,
        Dim::Kh => l.k_h = v,
        Dim::Kw => l.k_w = v,
    }
    l
}

/// Balanced split of `0..extent` into `parts` chunks; chunk `idx`.
/// Sizes differ by at most one and the largest is `ceil(extent / parts)`.
pub fn chunk(range: Range<u32>, parts: u32, idx: u32) -> Range<u32> {
    let len = (range.end - range.start) as u64;
    let lo = (idx as u64 * len / parts as u64) as u32;
    let hi = ((idx as u64 + 1) * len / parts as u64) as u32;
    range.start + lo..range.start + hi
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParallelismStrategy {
    /// Exclusive splits `(dim, factor)`, sorted by dim, every factor >= 2.
    pub es: Vec<(Dim, u32)>,
    /// Shared-shard dimension; absent when `p == 1`.
    pub ss: Option<Dim>,
    /// Parallelism degree: product of the ES factors.
    pub p: u32,
}

impl Default for ParallelismStrategy {
    fn default() -> Self {
        Self::none()
    }
}

impl ParallelismStrategy {
    /// The unsharded strategy.
    pub fn none() -> Self {
        ParallelismStrategy { es: Vec::new(), ss: None, p: 1 }
    }

    /// Builds a normalized strategy: unit factors are dropped, dims sorted,
    /// and the SS dim is discarded when the degree is 1.
    pub fn new(es: &[(Dim, u32)], ss: Option<Dim>) -> Result<Self> {
        let mut splits: Vec<(Dim, u32)> = Vec::new();
        for &(d, f) in es {
            if f == 0 {
                return Err(Error::InvalidStrategy(format!("split factor of {d} is zero")));
            }
            if splits.iter().any(|&(e, _)| e == d) {
                return Err(Error::InvalidStrategy(format!("{d} appears twice in ES")));
            }
            if f > 1 {
                splits.push((d, f));
            }
        }
        if splits.len() > 2 {
            return Err(Error::InvalidStrategy("ES may split at most two dimensions".into()));
        }
        splits.sort();
        let p = splits.iter().map(|&(_, f)| f).product::<u32>();
        Ok(ParallelismStrategy {
            es: splits,
            ss: if p > 1 { ss } else { None },
            p,
        })
    }

    pub fn es_factor(&self, dim: Dim) -> u32 {
        self.es.iter().find(|&&(d, _)| d == dim).map_or(1, |&(_, f)| f)
    }

    /// Total number of pieces `dim` is cut into (ES factor times `p` for the SS dim).
    pub fn split(&self, dim: Dim) -> u32 {
        let ss = if self.ss == Some(dim) { self.p } else { 1 };
        self.es_factor(dim) * ss
    }

    pub fn phases(&self) -> u32 {
        if self.ss.is_some() {
            self.p
        } else {
            1
        }
    }

    pub fn needs_allreduce(&self) -> bool {
        self.es.iter().any(|&(d, _)| d.is_reduction())
    }

    /// Structural checks independent of any layer.
    pub fn check_structure(&self) -> Result<()> {
        if self.es.len() > 2 {
            return Err(Error::InvalidStrategy("ES may split at most two dimensions".into()));
        }
        for (i, &(d, f)) in self.es.iter().enumerate() {
            if f < 2 {
                return Err(Error::InvalidStrategy(format!("ES factor of {d} must be at least 2")));
            }
            if self.es[..i].iter().any(|&(e, _)| e == d) {
                return Err(Error::InvalidStrategy(format!("{d} appears twice in ES")));
            }
        }
        let product = self.es.iter().map(|&(_, f)| f).product::<u32>();
        if product != self.p {
            return Err(Error::InvalidStrategy(format!(
                "ES factors multiply to {product}, but p = {}",
                self.p
            )));
        }
        if self.p == 1 && self.ss.is_some() {
            return Err(Error::InvalidStrategy("SS requires p > 1".into()));
        }
        Ok(())
    }

    /// Checks that every split fits inside the layer's dimensions.
    pub fn check_for(&self, layer: &ConvLayer) -> Result<()> {
        self.check_structure()?;
        for d in Dim::ALL {
            let split = self.split(d);
            if split > d.extent(layer) {
                return Err(Error::InvalidStrategy(format!(
                    "{d} is split {split} ways but layer {} has only {} elements along it",
                    layer.index,
                    d.extent(layer)
                )));
            }
        }
        Ok(())
    }

    pub fn fits(&self, layer: &ConvLayer) -> bool {
        self.check_for(layer).is_ok()
    }

    /// Loop bounds computed by the busiest accelerator in one phase.
    pub fn per_phase_layer(&self, layer: &ConvLayer) -> ConvLayer {
        Dim::ALL.iter().fold(*layer, |l, &d| {
            let e = d.extent(layer);
            with_extent(&l, d, e.div_ceil(self.split(d)))
        })
    }

    /// ES coordinate of `member` along `dim` (0 when `dim` is not split).
    /// The first ES dim is the most significant digit of the member index.
    pub fn es_coord(&self, member: u32, dim: Dim) -> u32 {
        let mut stride = self.p;
        for &(d, f) in &self.es {
            stride /= f;
            if d == dim {
                return (member / stride) % f;
            }
        }
        0
    }

    /// Index ranges of all six loops executed by `member` in `phase`.
    /// In phase `t`, member `m` works on shared shard `(m + t) mod p`.
    pub fn member_phase_ranges(&self, layer: &ConvLayer, member: u32, phase: u32) -> [Range<u32>; 6] {
        Dim::ALL.map(|d| {
            let f = self.es_factor(d);
            let base = chunk(0..d.extent(layer), f, self.es_coord(member, d));
            if self.ss == Some(d) {
                chunk(base, self.p, (member + phase) % self.p)
            } else {
                base
            }
        })
    }

    /// Report notation, e.g. `ES={H,W}, SS=∅`.
    pub fn notation(&self) -> String {
        let es: Vec<&str> = self.es.iter().map(|(d, _)| d.name()).collect();
        let ss = self.ss.map_or("∅".to_string(), |d| format!("{{{d}}}"));
        if es.is_empty() {
            format!("ES=∅, SS={ss}")
        } else {
            format!("ES={{{}}}, SS={ss}", es.join(","))
        }
    }

    /// Notation with split factors, e.g. `ES={H×2,W×2}, SS=∅`.
    pub fn detailed_notation(&self) -> String {
        let es: Vec<String> = self.es.iter().map(|(d, f)| format!("{d}×{f}")).collect();
        let ss = self.ss.map_or("∅".to_string(), |d| format!("{{{d}}}"));
        if es.is_empty() {
            format!("ES=∅, SS={ss}")
        } else {
            format!("ES={{{}}}, SS={ss}", es.join(","))
        }
    }
}

impl fmt::Display for ParallelismStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detailed_notation())
    }
}

/// Every ordered factorization of `p` into two factors, e.g. 4 -> (4,1), (2,2), (1,4).
pub fn factor_pairs(p: u32) -> Vec<(u32, u32)> {
    (1..=p).filter(|a| p.is_multiple_of(*a)).rev().map(|a| (a, p / a)).collect()
}

/// A strategy family: an unordered ES dim pair plus an optional SS dim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyFamily {
    pub es: (Dim, Dim),
    pub ss: Option<Dim>,
}

/// The 15 ES-only families followed by the 90 ES+SS families. The SS dim
/// ranges over all six dims, including the two ES dims.
pub fn strategy_families() -> Vec<StrategyFamily> {
    let mut pairs = Vec::new();
    for (i, &a) in Dim::ALL.iter().enumerate() {
        for &b in &Dim::ALL[i + 1..] {
            pairs.push((a, b));
        }
    }
    let mut out: Vec<StrategyFamily> = pairs.iter().map(|&es| StrategyFamily { es, ss: None }).collect();
    for &es in &pairs {
        for ss in Dim::ALL {
            out.push(StrategyFamily { es, ss: Some(ss) });
        }
    }
    out
}

impl StrategyFamily {
    /// Concrete strategies of this family at degree `p`, before any
    /// layer-size filtering. Duplicates across families are possible when a
    /// factor is 1.
    pub fn instances(&self, p: u32) -> Vec<ParallelismStrategy> {
        factor_pairs(p)
            .into_iter()
            .map(|(fa, fb)| {
                ParallelismStrategy::new(&[(self.es.0, fa), (self.es.1, fb)], self.ss)
                    .expect("family instances are well formed")
            })
            .collect()
    }
}

/// Distinct strategies of degree `p` that fit `layer`, in a fixed order.
pub fn enumerate_strategies(layer: &ConvLayer, p: u32) -> Result<Vec<ParallelismStrategy>> {
    if p == 0 || !p.is_power_of_two() {
        return Err(Error::Validation(format!("parallelism degree {p} is not a power of two")));
    }
    if p == 1 {
        return Ok(vec![ParallelismStrategy::none()]);
    }
    let mut out: Vec<ParallelismStrategy> = Vec::new();
    for fam in strategy_families() {
        for s in fam.instances(p) {
            if s.fits(layer) && !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Per-accelerator tensor footprint of one sharded layer (busiest member).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShardLayout {
    pub elem_bytes: u64,
    /// Input feature-map elements, halo included.
    pub in_shard: u64,
    pub weight_shard: u64,
    /// Output elements resident after the layer completes.
    pub out_shard: u64,
    /// Elements of the shard that circulates around the ring (0 without SS).
    pub shared_shard: u64,
    pub needs_allreduce: bool,
    pub phases: u32,
    pub per_phase_layer: ConvLayer,
}

impl ShardLayout {
    pub fn in_bytes(&self) -> u64 {
        self.in_shard * self.elem_bytes
    }
    pub fn weight_bytes(&self) -> u64 {
        self.weight_shard * self.elem_bytes
    }
    pub fn out_bytes(&self) -> u64 {
        self.out_shard * self.elem_bytes
    }
    pub fn shared_bytes(&self) -> u64 {
        self.shared_shard * self.elem_bytes
    }
}

fn input_extent(out: u32, split: u32, stride: u32, k: u32) -> u64 {
    let full = out as u64 * stride as u64;
    if split <= 1 {
        return full;
    }
    let rows = out.div_ceil(split) as u64;
    // Receptive field of `rows` outputs, including the halo.
    ((rows - 1) * stride as u64 + k as u64).min(full)
}

pub fn shard_layout(layer: &ConvLayer, strategy: &ParallelismStrategy, elem_bytes: u64) -> Result<ShardLayout> {
    strategy.check_for(layer)?;
    let s = |d: Dim| strategy.split(d);
    let es = |d: Dim| strategy.es_factor(d);
    let cd = |d: Dim, f: u32| d.extent(layer).div_ceil(f) as u64;

    let in_shard = cd(Dim::Cin, s(Dim::Cin))
        * input_extent(layer.h, s(Dim::H), layer.stride, layer.k_h)
        * input_extent(layer.w, s(Dim::W), layer.stride, layer.k_w);
    let weight_shard =
        cd(Dim::Cout, s(Dim::Cout)) * cd(Dim::Cin, s(Dim::Cin)) * cd(Dim::Kh, s(Dim::Kh)) * cd(Dim::Kw, s(Dim::Kw));
    let out_shard = cd(Dim::Cout, es(Dim::Cout)) * cd(Dim::H, es(Dim::H)) * cd(Dim::W, es(Dim::W));
    let shared_shard = match strategy.ss {
        None => 0,
        Some(Dim::Cout | Dim::Kh | Dim::Kw) => weight_shard,
        Some(Dim::H | Dim::W) => in_shard,
        Some(Dim::Cin) => in_shard + weight_shard,
    };
    Ok(ShardLayout {
        elem_bytes,
        in_shard,
        weight_shard,
        out_shard,
        shared_shard,
        needs_allreduce: strategy.needs_allreduce(),
        phases: strategy.phases(),
        per_phase_layer: strategy.per_phase_layer(layer),
    })
}

/// Bytes each accelerator needs: every resident weight shard, plus the
/// largest per-layer working set of input, output and shared receive buffer.
pub fn memory_footprint(layers: &[(ConvLayer, ParallelismStrategy)], elem_bytes: u64) -> Result<u64> {
    let mut weights = 0u64;
    let mut working = 0u64;
    for (layer, strategy) in layers {
        let s = shard_layout(layer, strategy, elem_bytes)?;
        weights += s.weight_bytes();
        working = working.max(s.in_bytes() + s.out_bytes() + s.shared_bytes());
    }
    Ok(weights + working)
}

/// True when every strategy has degree `|accset|` and the footprint fits
/// in the smallest member's DRAM.
pub fn is_valid(
    layers: &[(ConvLayer, ParallelismStrategy)],
    accset: &AccSetCandidate,
    topo: &SystemTopology,
    elem_bytes: u64,
) -> bool {
    if layers.iter().any(|(_, s)| s.p as usize != accset.size()) {
        return false;
    }
    match memory_footprint(layers, elem_bytes) {
        Ok(bytes) => bytes <= topo.min_mem(&accset.members),
        Err(_) => false,
    }
}

/// Interval `[idx / parts, (idx + 1) / parts)` of a tensor axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slice {
    pub idx: u32,
    pub parts: u32,
}

impl Slice {
    pub const FULL: Slice = Slice { idx: 0, parts: 1 };

    pub fn contains(&self, other: &Slice) -> bool {
        let (a, f1) = (self.idx as u64, self.parts as u64);
        let (b, f2) = (other.idx as u64, other.parts as u64);
        a * f2 <= b * f1 && (b + 1) * f1 <= (a + 1) * f2
    }
}

/// Which part of an activation tensor (channel, row, column) each member holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationLayout {
    pub regions: Vec<[Slice; 3]>,
}

impl ActivationLayout {
    /// Output regions held after the layer (all-reduce included).
    pub fn output_of(strategy: &ParallelismStrategy) -> Self {
        let regions = (0..strategy.p)
            .map(|m| {
                [Dim::Cout, Dim::H, Dim::W].map(|d| Slice {
                    idx: strategy.es_coord(m, d),
                    parts: strategy.es_factor(d),
                })
            })
            .collect();
        ActivationLayout { regions }
    }

    /// Input regions each member must hold before the layer starts.
    pub fn input_of(strategy: &ParallelismStrategy) -> Self {
        let regions = (0..strategy.p)
            .map(|m| {
                [Dim::Cin, Dim::H, Dim::W].map(|d| {
                    let f = strategy.es_factor(d);
                    let c = strategy.es_coord(m, d);
                    if strategy.ss == Some(d) {
                        Slice {
                            idx: c * strategy.p + m,
                            parts: f * strategy.p,
                        }
                    } else {
                        Slice { idx: c, parts: f }
                    }
                })
            })
            .collect();
        ActivationLayout { regions }
    }

    /// True when every member already holds what `needed` asks of it.
    pub fn satisfies(&self, needed: &ActivationLayout) -> bool {
        self.regions.len() == needed.regions.len()
            && self
                .regions
                .iter()
                .zip(&needed.regions)
                .all(|(have, want)| have.iter().zip(want).all(|(h, w)| h.contains(w)))
    }
}

/// Allocation-free equivalent of
/// `ActivationLayout::output_of(prev).satisfies(&ActivationLayout::input_of(next))`.
pub fn layouts_match(prev: &ParallelismStrategy, next: &ParallelismStrategy) -> bool {
    if prev.p != next.p {
        return false;
    }
    (0..prev.p).all(|m| {
        [(Dim::Cout, Dim::Cin), (Dim::H, Dim::H), (Dim::W, Dim::W)]
            .iter()
            .all(|&(od, id)| {
                let have = Slice {
                    idx: prev.es_coord(m, od),
                    parts: prev.es_factor(od),
                };
                let f = next.es_factor(id);
                let c = next.es_coord(m, id);
                let want = if next.ss == Some(id) {
                    Slice {
                        idx: c * next.p + m,
                        parts: f * next.p,
                    }
                } else {
                    Slice { idx: c, parts: f }
                };
                have.contains(&want)
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big() -> ConvLayer {
        ConvLayer::square(64, 64, 32, 3, 1)
    }

    #[test]
    fn family_counts() {
        let f = strategy_families();
        assert_eq!(f.iter().filter(|f| f.ss.is_none()).count(), 15);
        assert_eq!(f.iter().filter(|f| f.ss.is_some()).count(), 90);
        assert_eq!(factor_pairs(4), vec![(4, 1), (2, 2), (1, 4)]);
    }

    #[test]
    fn degree_one_is_unsharded() {
        assert_eq!(enumerate_strategies(&big(), 1).unwrap(), vec![ParallelismStrategy::none()]);
    }

    #[test]
    fn degree_must_be_power_of_two() {
        assert!(enumerate_strategies(&big(), 3).is_err());
        assert!(enumerate_strategies(&big(), 0).is_err());
    }

    #[test]
    fn pointwise_layer_never_splits_kernel() {
        let l = ConvLayer::square(64, 64, 14, 1, 1);
        let all = enumerate_strategies(&l, 2).unwrap();
        assert!(!all.is_empty());
        assert!(all.iter().all(|s| s.split(Dim::Kh) == 1 && s.split(Dim::Kw) == 1));
    }

    #[test]
    fn distinct_strategy_counts() {
        let kernel_big = ConvLayer::square(64, 64, 32, 16, 1);
        // p=2: 6 single-dim ES, each with 6 SS choices or none.
        assert_eq!(enumerate_strategies(&kernel_big, 2).unwrap().len(), 6 * 7);
        // p=4: 6 single-dim x4 + 15 pairs 2x2, each with 6 SS choices or none.
        assert_eq!(enumerate_strategies(&kernel_big, 4).unwrap().len(), 21 * 7);
        // A 3x3 kernel cannot take ES and SS on the same kernel dim at p=2.
        assert_eq!(enumerate_strategies(&big(), 2).unwrap().len(), 6 * 7 - 2);
    }

    #[test]
    fn es_cin_w_quarter_input_half_weight() {
        let l = ConvLayer::new(8, 8, 8, 8, 1, 1, 1);
        let s = ParallelismStrategy::new(&[(Dim::Cin, 2), (Dim::W, 2)], None).unwrap();
        let lay = shard_layout(&l, &s, 2).unwrap();
        assert_eq!(lay.in_shard * 4, l.input_elems());
        assert_eq!(lay.weight_shard * 2, l.weight_elems());
        assert!(lay.needs_allreduce);
        assert_eq!(lay.phases, 1);
    }

    #[test]
    fn es_w_ss_cout_halves_input_and_weight() {
        let l = ConvLayer::new(8, 8, 8, 8, 1, 1, 1);
        let s = ParallelismStrategy::new(&[(Dim::W, 2)], Some(Dim::Cout)).unwrap();
        assert_eq!(s.p, 2);
        let lay = shard_layout(&l, &s, 2).unwrap();
        assert_eq!(lay.phases, 2);
        assert!(!lay.needs_allreduce);
        assert_eq!(lay.in_shard * 2, l.input_elems());
        assert_eq!(lay.weight_shard * 2, l.weight_elems());
        assert_eq!(lay.shared_shard, lay.weight_shard);
        assert_eq!(lay.per_phase_layer.c_out, 4);
        assert_eq!(lay.per_phase_layer.w, 4);
    }

    #[test]
    fn empty_strategy_is_whole_tensors() {
        let l = big();
        let lay = shard_layout(&l, &ParallelismStrategy::none(), 2).unwrap();
        assert_eq!(lay.in_shard, l.input_elems());
        assert_eq!(lay.weight_shard, l.weight_elems());
        assert_eq!(lay.out_shard, l.output_elems());
        assert_eq!(lay.phases, 1);
        assert!(!lay.needs_allreduce);
        assert_eq!(lay.per_phase_layer, l);
    }

    #[test]
    fn halo_is_charged_to_input() {
        let l = ConvLayer::square(4, 4, 16, 3, 1);
        let s = ParallelismStrategy::new(&[(Dim::H, 2)], None).unwrap();
        let lay = shard_layout(&l, &s, 2).unwrap();
        assert_eq!(lay.in_shard, 4 * (8 + 2) * 16);
    }

    #[test]
    fn footprint_single_layer() {
        let l = big();
        let bytes = memory_footprint(&[(l, ParallelismStrategy::none())], 2).unwrap();
        assert_eq!(bytes, l.weight_elems() * 2 + (l.input_elems() + l.output_elems()) * 2);
    }

    #[test]
    fn cout_split_divides_weight_term() {
        let l = ConvLayer::square(64, 32, 8, 3, 1);
        let s = ParallelismStrategy::new(&[(Dim::Cout, 4)], None).unwrap();
        let full = shard_layout(&l, &ParallelismStrategy::none(), 2).unwrap();
        let quarter = shard_layout(&l, &s, 2).unwrap();
        assert_eq!(quarter.weight_bytes() * 4, full.weight_bytes());
    }

    #[test]
    fn validity_checks_memory_and_degree() {
        use crate::topology::build_f1_topology;
        let t = build_f1_topology();
        let set4 = AccSetCandidate::new(&t, vec![0, 1, 2, 3]);
        let set2 = AccSetCandidate::new(&t, vec![0, 1]);
        let l = big();
        let s4 = ParallelismStrategy::new(&[(Dim::H, 2), (Dim::W, 2)], None).unwrap();
        assert!(is_valid(&[(l, s4.clone())], &set4, &t, 2));
        assert!(!is_valid(&[(l, s4)], &set2, &t, 2));
    }

    #[test]
    fn too_large_factor_is_rejected() {
        let l = ConvLayer::square(4, 4, 4, 1, 1);
        let s = ParallelismStrategy::new(&[(Dim::Kh, 2)], None).unwrap();
        let err = shard_layout(&l, &s, 2).unwrap_err();
        assert!(err.to_string().contains("Kh"), "{err}");
    }

    #[test]
    fn notation() {
        let s = ParallelismStrategy::new(&[(Dim::W, 2), (Dim::H, 2)], None).unwrap();
        assert_eq!(s.notation(), "ES={H,W}, SS=∅");
        let s = ParallelismStrategy::new(&[(Dim::H, 2)], Some(Dim::Cout)).unwrap();
        assert_eq!(s.notation(), "ES={H}, SS={Cout}");
        assert_eq!(s.detailed_notation(), "ES={H×2}, SS={Cout}");
    }

    #[test]
    fn layouts_match_when_spatial_split_is_kept() {
        let s = ParallelismStrategy::new(&[(Dim::H, 2), (Dim::W, 2)], None).unwrap();
        assert!(ActivationLayout::output_of(&s).satisfies(&ActivationLayout::input_of(&s)));
        let cout = ParallelismStrategy::new(&[(Dim::Cout, 4)], None).unwrap();
        assert!(!ActivationLayout::output_of(&s).satisfies(&ActivationLayout::input_of(&cout)));
        // Channel-split output feeds a channel-split (reduction) input.
        let cin = ParallelismStrategy::new(&[(Dim::Cin, 4)], None).unwrap();
        assert!(ActivationLayout::output_of(&cout).satisfies(&ActivationLayout::input_of(&cin)));
        // Rows split four ways feed a ring that starts each member on its own rows.
        let h4 = ParallelismStrategy::new(&[(Dim::H, 4)], None).unwrap();
        let ring = ParallelismStrategy::new(&[(Dim::Cout, 4)], Some(Dim::H)).unwrap();
        assert!(ActivationLayout::output_of(&h4).satisfies(&ActivationLayout::input_of(&ring)));
    }
}
