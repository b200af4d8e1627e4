//! End-to-end latency of a complete mapping.
//!
//! Sets execute one after another in layer order. Inside a set every layer
//! costs `phases x per-phase compute` plus its all-reduce and ring traffic,
//! and consecutive layers pay a redistribution when the producer's output
//! partition does not cover the consumer's input needs. Between sets the
//! full boundary activation is sent over the best available path.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::accel::{layer_latency, AcceleratorDesign};
use crate::comm::{allreduce_cost, p2p_cost, redistribute_cost, ss_ring_cost};
use crate::error::{Error, Result};
use crate::sharding::{layouts_match, memory_footprint, shard_layout, ParallelismStrategy};
use crate::topology::{inter_set_path_bandwidth, AccSetCandidate, SystemTopology};
use crate::workload::{ConvLayer, Workload};

/// One accelerator set with its design and contiguous layer range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedSet {
    pub accset: AccSetCandidate,
    pub design: AcceleratorDesign,
    /// Half-open layer index range.
    pub layers: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    pub sets: Vec<MappedSet>,
    /// One strategy per workload layer.
    pub strategies: Vec<ParallelismStrategy>,
}

impl Mapping {
    /// Index of the set that runs layer `l`.
    pub fn set_of(&self, l: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.layers.contains(&l))
    }

    /// Checks every structural invariant against a workload and topology.
    pub fn validate(&self, workload: &Workload, topo: &SystemTopology) -> Result<()> {
        let n = workload.len();
        if self.sets.is_empty() {
            return Err(Error::InvalidMapping("mapping has no accelerator sets".into()));
        }
        if self.strategies.len() != n {
            return Err(Error::InvalidMapping(format!(
                "{} strategies for {n} layers",
                self.strategies.len()
            )));
        }
        let mut next = 0usize;
        for (i, set) in self.sets.iter().enumerate() {
            if set.accset.members.is_empty() {
                return Err(Error::InvalidMapping(format!("set {i} has no members")));
            }
            if let Some(&m) = set.accset.members.iter().find(|&&m| m >= topo.n_acc) {
                return Err(Error::InvalidMapping(format!(
                    "set {i} names accelerator {m}, but the topology has {}",
                    topo.n_acc
                )));
            }
            if set.accset.members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMapping(format!(
                    "set {i} members must be sorted and distinct"
                )));
            }
            if self.sets[..i].iter().any(|o| !o.accset.is_disjoint(&set.accset)) {
                return Err(Error::InvalidMapping(format!(
                    "set {i} {} overlaps an earlier set",
                    set.accset.label()
                )));
            }
            if set.layers.start != next || set.layers.end <= set.layers.start {
                return Err(Error::InvalidMapping(format!(
                    "layer ranges are not contiguous: set {i} covers {}..{}, expected to start at {next}",
                    set.layers.start, set.layers.end
                )));
            }
            next = set.layers.end;
            set.design.validate()?;
            let p = set.accset.size() as u32;
            for l in set.layers.clone().take_while(|&l| l < n) {
                let s = &self.strategies[l];
                if s.p != p {
                    return Err(Error::InvalidMapping(format!(
                        "layer {} has degree {} but runs on {} accelerators",
                        l + 1,
                        s.p,
                        p
                    )));
                }
                s.check_for(&workload.layers[l])?;
            }
        }
        if next != n {
            return Err(Error::InvalidMapping(format!(
                "layer ranges cover 0..{next} but the workload has {n} layers"
            )));
        }
        Ok(())
    }
}

/// Bandwidth used for collectives inside a set: the spanning-tree
/// bottleneck, or the slowest host link when the set has no direct path.
pub fn set_bandwidth(topo: &SystemTopology, members: &[usize]) -> f64 {
    let direct = topo.bottleneck_bandwidth(members);
    if direct > 0.0 || members.len() < 2 {
        return direct;
    }
    members.iter().map(|&m| topo.bw_host[m]).fold(f64::INFINITY, f64::min)
}

/// Seconds of each cost component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub compute: f64,
    pub allreduce: f64,
    pub ss_ring: f64,
    pub redistribution: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.compute + self.allreduce + self.ss_ring + self.redistribution
    }

    fn add(&mut self, o: &CostBreakdown) {
        self.compute += o.compute;
        self.allreduce += o.allreduce;
        self.ss_ring += o.ss_ring;
        self.redistribution += o.redistribution;
    }
}

/// Fixed parameters shared by every layer of one set.
#[derive(Debug, Clone, Copy)]
pub struct SetEnv<'a> {
    pub design: &'a AcceleratorDesign,
    pub p: u32,
    pub bandwidth: f64,
    pub msg_latency: f64,
    pub elem_bytes: u64,
    /// Hide each SS ring step behind the next phase's compute.
    pub overlap_ss: bool,
}

impl<'a> SetEnv<'a> {
    pub fn new(topo: &SystemTopology, accset: &AccSetCandidate, design: &'a AcceleratorDesign, elem_bytes: u64) -> Self {
        SetEnv {
            design,
            p: accset.size() as u32,
            bandwidth: set_bandwidth(topo, &accset.members),
            msg_latency: topo.msg_latency,
            elem_bytes,
            overlap_ss: false,
        }
    }

    /// Compute and collective cost of one layer, excluding redistribution.
    pub fn layer_cost(&self, layer: &ConvLayer, strategy: &ParallelismStrategy) -> Result<CostBreakdown> {
        let shards = shard_layout(layer, strategy, self.elem_bytes)?;
        let compute = shards.phases as f64 * layer_latency(self.design, &shards.per_phase_layer);
        let group: u32 = strategy
            .es
            .iter()
            .filter(|(d, _)| d.is_reduction())
            .map(|&(_, f)| f)
            .product();
        let allreduce = allreduce_cost(shards.out_bytes() as f64, group, self.bandwidth, self.msg_latency)?.seconds;
        let mut ss_ring = match strategy.ss {
            Some(_) => ss_ring_cost(shards.shared_bytes() as f64, strategy.p, self.bandwidth, self.msg_latency)?.seconds,
            None => 0.0,
        };
        if self.overlap_ss && ss_ring > 0.0 {
            let steps = (strategy.p - 1) as f64;
            let phase = compute / shards.phases as f64;
            ss_ring = steps * (ss_ring / steps - phase).max(0.0);
        }
        Ok(CostBreakdown {
            compute,
            allreduce,
            ss_ring,
            redistribution: 0.0,
        })
    }

    /// Cost of handing `prev`'s output to the next layer in the same set.
    pub fn redistribution(&self, prev: &ConvLayer, prev_s: &ParallelismStrategy, next_s: &ParallelismStrategy) -> Result<f64> {
        let matched = layouts_match(prev_s, next_s);
        if matched {
            return Ok(0.0);
        }
        let bytes = (prev.output_elems() * self.elem_bytes) as f64;
        Ok(redistribute_cost(bytes, false, self.bandwidth, self.msg_latency)?.seconds)
    }
}

/// Latency of a run of layers on one set. Returns the breakdown and the
/// per-accelerator memory footprint.
pub fn evaluate_set(env: &SetEnv<'_>, layers: &[ConvLayer], strategies: &[ParallelismStrategy]) -> Result<(CostBreakdown, u64)> {
    let mut total = CostBreakdown::default();
    for (i, (layer, s)) in layers.iter().zip(strategies).enumerate() {
        total.add(&env.layer_cost(layer, s)?);
        if i > 0 {
            total.redistribution += env.redistribution(&layers[i - 1], &strategies[i - 1], s)?;
        }
    }
    let pairs: Vec<(ConvLayer, ParallelismStrategy)> = layers.iter().copied().zip(strategies.iter().cloned()).collect();
    let mem = memory_footprint(&pairs, env.elem_bytes)?;
    Ok((total, mem))
}

/// Per-phase compute time of a set whose members run different designs:
/// every member waits for the slowest one.
pub fn heterogeneous_set_compute(designs: &[AcceleratorDesign], layer: &ConvLayer, strategy: &ParallelismStrategy) -> Result<f64> {
    if designs.len() != strategy.p as usize {
        return Err(Error::InvalidMapping(format!(
            "{} designs for a strategy of degree {}",
            designs.len(),
            strategy.p
        )));
    }
    strategy.check_for(layer)?;
    let shard = strategy.per_phase_layer(layer);
    Ok(designs.iter().map(|d| layer_latency(d, &shard)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    /// 1-based layer number.
    pub layer: usize,
    pub strategy: String,
    pub compute_ms: f64,
    pub allreduce_ms: f64,
    pub ss_ring_ms: f64,
    /// Redistribution paid before this layer starts.
    pub redistribution_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub members: Vec<usize>,
    pub design: String,
    pub first_layer: usize,
    pub last_layer: usize,
    pub compute_ms: f64,
    pub allreduce_ms: f64,
    pub ss_ring_ms: f64,
    pub redistribution_ms: f64,
    pub memory_bytes: u64,
    pub memory_limit: u64,
    pub valid: bool,
    pub layers: Vec<LayerReport>,
}

impl SetReport {
    pub fn total_ms(&self) -> f64 {
        self.compute_ms + self.allreduce_ms + self.ss_ring_ms + self.redistribution_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub bytes: u64,
    pub ms: f64,
    pub via_host: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub total_ms: f64,
    pub per_set: Vec<SetReport>,
    pub inter_set_ms: f64,
    pub boundaries: Vec<BoundaryReport>,
    /// Footprint on each accelerator (0 for idle ones).
    pub memory_per_acc: Vec<u64>,
    pub valid: bool,
}

fn ms(s: f64) -> f64 {
    s * 1e3
}

pub fn evaluate(mapping: &Mapping, workload: &Workload, topo: &SystemTopology, elem_bytes: u64) -> Result<LatencyReport> {
    evaluate_with(mapping, workload, topo, elem_bytes, false)
}

/// [`evaluate`] with SS communication optionally overlapped with compute:
/// only the part of each ring step longer than a compute phase is charged.
pub fn evaluate_with(mapping: &Mapping, workload: &Workload, topo: &SystemTopology, elem_bytes: u64, overlap_ss: bool) -> Result<LatencyReport> {
    mapping.validate(workload, topo)?;
    let mut per_set = Vec::with_capacity(mapping.sets.len());
    let mut memory_per_acc = vec![0u64; topo.n_acc];
    for set in &mapping.sets {
        let env = SetEnv {
            overlap_ss,
            ..SetEnv::new(topo, &set.accset, &set.design, elem_bytes)
        };
        let layers = &workload.layers[set.layers.clone()];
        let strategies = &mapping.strategies[set.layers.clone()];
        let mut layer_reports = Vec::with_capacity(layers.len());
        let mut sum = CostBreakdown::default();
        for (i, (layer, s)) in layers.iter().zip(strategies).enumerate() {
            let mut c = env.layer_cost(layer, s)?;
            if i > 0 {
                c.redistribution = env.redistribution(&layers[i - 1], &strategies[i - 1], s)?;
            }
            sum.add(&c);
            layer_reports.push(LayerReport {
                layer: set.layers.start + i + 1,
                strategy: s.detailed_notation(),
                compute_ms: ms(c.compute),
                allreduce_ms: ms(c.allreduce),
                ss_ring_ms: ms(c.ss_ring),
                redistribution_ms: ms(c.redistribution),
            });
        }
        let pairs: Vec<(ConvLayer, ParallelismStrategy)> = layers.iter().copied().zip(strategies.iter().cloned()).collect();
        let memory_bytes = memory_footprint(&pairs, elem_bytes)?;
        let memory_limit = topo.min_mem(&set.accset.members);
        for &m in &set.accset.members {
            memory_per_acc[m] = memory_bytes;
        }
        per_set.push(SetReport {
            members: set.accset.members.clone(),
            design: set.design.label.clone(),
            first_layer: set.layers.start + 1,
            last_layer: set.layers.end,
            compute_ms: ms(sum.compute),
            allreduce_ms: ms(sum.allreduce),
            ss_ring_ms: ms(sum.ss_ring),
            redistribution_ms: ms(sum.redistribution),
            memory_bytes,
            memory_limit,
            valid: memory_bytes <= memory_limit,
            layers: layer_reports,
        });
    }

    let mut boundaries = Vec::new();
    for pair in mapping.sets.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let last = &workload.layers[a.layers.end - 1];
        let bytes = last.output_elems() * elem_bytes;
        let path = inter_set_path_bandwidth(topo, &a.accset, &b.accset)?;
        let cost = p2p_cost(bytes as f64, path.bandwidth, topo.msg_latency)?;
        boundaries.push(BoundaryReport {
            bytes,
            ms: ms(cost.seconds),
            via_host: path.via_host,
        });
    }
    let inter_set_ms = boundaries.iter().fold(0.0, |acc, b| acc + b.ms);
    let total_ms = per_set.iter().fold(0.0, |acc, s| acc + s.total_ms()) + inter_set_ms;
    let valid = per_set.iter().all(|s| s.valid);
    Ok(LatencyReport {
        total_ms,
        per_set,
        inter_set_ms,
        boundaries,
        memory_per_acc,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::builtin_designs;
    use crate::sharding::Dim;
    use crate::topology::build_f1_topology;
    use crate::units::GIB;

    fn single(workload: &Workload, topo: &SystemTopology, members: Vec<usize>, design: &AcceleratorDesign) -> Mapping {
        let p = members.len() as u32;
        let strategies = if p == 1 {
            vec![ParallelismStrategy::none(); workload.len()]
        } else {
            workload
                .layers
                .iter()
                .map(|_| ParallelismStrategy::new(&[(Dim::Cout, p)], None).unwrap())
                .collect()
        };
        Mapping {
            sets: vec![MappedSet {
                accset: AccSetCandidate::new(topo, members),
                design: design.clone(),
                layers: 0..workload.len(),
            }],
            strategies,
        }
    }

    #[test]
    fn single_accelerator_is_sum_of_layer_latencies() {
        let topo = build_f1_topology();
        let d = &builtin_designs()[0];
        let w = Workload::new(
            "t",
            vec![ConvLayer::square(64, 3, 56, 3, 1), ConvLayer::square(128, 64, 28, 3, 2)],
        )
        .unwrap();
        let r = evaluate(&single(&w, &topo, vec![0], d), &w, &topo, 2).unwrap();
        let expect: f64 = w.layers.iter().map(|l| layer_latency(d, l)).sum::<f64>() * 1e3;
        assert!((r.total_ms - expect).abs() <= 1e-12 * expect);
        assert_eq!(r.inter_set_ms, 0.0);
        assert_eq!(r.per_set[0].allreduce_ms + r.per_set[0].ss_ring_ms + r.per_set[0].redistribution_ms, 0.0);
        assert!(r.valid);
    }

    #[test]
    fn ring_micro_case() {
        let topo = build_f1_topology();
        let d = builtin_designs()[0].clone();
        let layer = ConvLayer::square(64, 64, 28, 3, 1);
        let w = Workload::new("t", vec![layer]).unwrap();
        let s = ParallelismStrategy::new(&[(Dim::W, 2)], Some(Dim::Cout)).unwrap();
        let m = Mapping {
            sets: vec![MappedSet {
                accset: AccSetCandidate::new(&topo, vec![0, 1]),
                design: d.clone(),
                layers: 0..1,
            }],
            strategies: vec![s],
        };
        let r = evaluate(&m, &w, &topo, 2).unwrap();
        let half = ConvLayer::new(32, 64, 28, 14, 3, 3, 1);
        let compute = 2.0 * layer_latency(&d, &half);
        let weight_half_bytes = (32 * 64 * 9 * 2) as f64;
        let ring = 1e-6 + weight_half_bytes * 8.0 / 8e9;
        let expect = (compute + ring) * 1e3;
        assert!((r.total_ms - expect).abs() <= 1e-12 * expect, "{} vs {expect}", r.total_ms);
        assert_eq!(r.per_set[0].allreduce_ms, 0.0);
    }

    #[test]
    fn overlap_hides_ring_steps_behind_compute() {
        let topo = build_f1_topology();
        let d = builtin_designs()[0].clone();
        let layer = ConvLayer::square(64, 64, 28, 3, 1);
        let w = Workload::new("t", vec![layer]).unwrap();
        let m = Mapping {
            sets: vec![MappedSet {
                accset: AccSetCandidate::new(&topo, vec![0, 1]),
                design: d.clone(),
                layers: 0..1,
            }],
            strategies: vec![ParallelismStrategy::new(&[(Dim::W, 2)], Some(Dim::Cout)).unwrap()],
        };
        let serial = evaluate(&m, &w, &topo, 2).unwrap();
        let hidden = evaluate_with(&m, &w, &topo, 2, true).unwrap();
        let phase = serial.per_set[0].compute_ms / 2.0;
        let step = serial.per_set[0].ss_ring_ms;
        let expect = phase + phase.max(step);
        assert!((hidden.total_ms - expect).abs() <= 1e-12 * expect);
        assert!(hidden.total_ms <= serial.total_ms);
        assert_eq!(hidden.per_set[0].compute_ms, serial.per_set[0].compute_ms);
    }

    #[test]
    fn oversized_weights_are_invalid() {
        let topo = build_f1_topology();
        let d = &builtin_designs()[0];
        // 16384 x 16384 x 3 x 3 x 2 bytes = 4.5 GiB of weights.
        let w = Workload::new("big", vec![ConvLayer::square(16384, 16384, 1, 3, 1)]).unwrap();
        let r = evaluate(&single(&w, &topo, vec![0], d), &w, &topo, 2).unwrap();
        assert!(!r.valid);
        assert!(r.memory_per_acc[0] > GIB);
    }

    #[test]
    fn decomposition_identity() {
        let topo = build_f1_topology();
        let designs = builtin_designs();
        let w = Workload::new(
            "t",
            vec![
                ConvLayer::square(64, 3, 32, 3, 1),
                ConvLayer::square(64, 64, 32, 3, 1),
                ConvLayer::square(128, 64, 16, 3, 2),
            ],
        )
        .unwrap();
        let m = Mapping {
            sets: vec![
                MappedSet {
                    accset: AccSetCandidate::new(&topo, vec![0, 1, 2, 3]),
                    design: designs[0].clone(),
                    layers: 0..2,
                },
                MappedSet {
                    accset: AccSetCandidate::new(&topo, vec![4, 5]),
                    design: designs[1].clone(),
                    layers: 2..3,
                },
            ],
            strategies: vec![
                ParallelismStrategy::new(&[(Dim::H, 2), (Dim::W, 2)], None).unwrap(),
                ParallelismStrategy::new(&[(Dim::Cin, 4)], Some(Dim::Cout)).unwrap(),
                ParallelismStrategy::new(&[(Dim::Cout, 2)], None).unwrap(),
            ],
        };
        let r = evaluate(&m, &w, &topo, 2).unwrap();
        let sum: f64 = r.per_set.iter().map(|s| s.total_ms()).sum::<f64>() + r.inter_set_ms;
        assert!((r.total_ms - sum).abs() <= 1e-9 * r.total_ms);
        assert!(r.per_set[0].redistribution_ms > 0.0);
        assert!(r.per_set[0].allreduce_ms > 0.0);
        assert!(r.boundaries[0].via_host);
    }

    #[test]
    fn structural_errors() {
        let topo = build_f1_topology();
        let d = builtin_designs()[0].clone();
        let w = Workload::new("t", vec![ConvLayer::square(8, 8, 8, 3, 1); 2]).unwrap();
        let mut m = single(&w, &topo, vec![0, 1], &d);
        m.sets[0].layers = 0..1;
        assert!(evaluate(&m, &w, &topo, 2).unwrap_err().to_string().contains("cover"));
        let mut m = single(&w, &topo, vec![0, 1], &d);
        m.strategies[1] = ParallelismStrategy::none();
        assert!(evaluate(&m, &w, &topo, 2).unwrap_err().to_string().contains("degree"));
    }

    #[test]
    fn heterogeneous_max_rule() {
        let designs = builtin_designs();
        let layer = ConvLayer::square(64, 64, 28, 3, 1);
        let s = ParallelismStrategy::new(&[(Dim::Cout, 2)], None).unwrap();
        let same = heterogeneous_set_compute(&[designs[0].clone(), designs[0].clone()], &layer, &s).unwrap();
        assert_eq!(same, layer_latency(&designs[0], &s.per_phase_layer(&layer)));
        let mut fast = designs[0].clone();
        fast.freq *= 2.0;
        let mixed = heterogeneous_set_compute(&[designs[0].clone(), fast], &layer, &s).unwrap();
        assert_eq!(mixed, same);
    }
}
