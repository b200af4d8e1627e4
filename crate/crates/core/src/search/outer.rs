use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::inner::{run_inner_ga, InnerResult};
use super::{run_ga, GAConfig, MEMORY_PENALTY};
use crate::accel::{profile_designs, AcceleratorDesign};
use crate::comm::p2p_cost;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, LatencyReport, MappedSet, Mapping};
use crate::par::Executor;
use crate::topology::{enumerate_accset_candidates, inter_set_path_bandwidth, AccSetCandidate, SystemTopology};
use crate::workload::Workload;

/// Candidates usable by the search: those whose size is a power of two.
pub fn search_candidates(topo: &SystemTopology) -> Vec<AccSetCandidate> {
    enumerate_accset_candidates(topo)
        .into_iter()
        .filter(|c| c.size().is_power_of_two())
        .collect()
}

/// Gene layout of the outer genome: one gene per candidate, one per
/// (set slot, design), and one cut gene per slot boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterLayout {
    pub candidates: Vec<AccSetCandidate>,
    pub n_designs: usize,
    pub slots: usize,
}

impl OuterLayout {
    pub fn new(candidates: Vec<AccSetCandidate>, n_designs: usize, n_acc: usize) -> Self {
        OuterLayout {
            candidates,
            n_designs,
            slots: n_acc.max(1),
        }
    }

    pub fn n_genes(&self) -> usize {
        self.candidates.len() + self.slots * self.n_designs + self.slots - 1
    }

    fn design_genes<'g>(&self, genes: &'g [f64], slot: usize) -> &'g [f64] {
        let start = self.candidates.len() + slot * self.n_designs;
        &genes[start..start + self.n_designs]
    }

    fn cut_genes<'g>(&self, genes: &'g [f64]) -> &'g [f64] {
        &genes[self.candidates.len() + self.slots * self.n_designs..]
    }
}

/// One decoded set: candidate index, design index and layer range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SetChoice {
    pub candidate: usize,
    pub design: usize,
    pub layers: Range<usize>,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Greedy disjoint candidate selection by descending gene, per-slot design
/// argmax, and sorted cut genes scaled to layer boundaries. Sets whose range
/// comes out empty are dropped and their accelerators stay idle.
pub fn decode_outer(genes: &[f64], layout: &OuterLayout, n_layers: usize) -> Vec<SetChoice> {
    let cand = &layout.candidates;
    let mut order: Vec<usize> = (0..cand.len()).collect();
    order.sort_by(|&a, &b| genes[b].total_cmp(&genes[a]).then(a.cmp(&b)));
    let mut used: Vec<usize> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let total: usize = {
        let mut all: Vec<usize> = cand.iter().flat_map(|c| c.members.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    };
    for i in order {
        if chosen.len() == layout.slots || used.len() == total {
            break;
        }
        if cand[i].members.iter().all(|m| !used.contains(m)) {
            used.extend(&cand[i].members);
            chosen.push(i);
        }
    }

    let k = chosen.len();
    let mut cuts: Vec<f64> = layout.cut_genes(genes)[..k.saturating_sub(1)].to_vec();
    cuts.sort_by(f64::total_cmp);
    let mut bounds = vec![0usize];
    bounds.extend(cuts.iter().map(|&c| ((c * n_layers as f64).round() as usize).min(n_layers)));
    bounds.push(n_layers);

    chosen
        .iter()
        .enumerate()
        .filter_map(|(slot, &c)| {
            let range = bounds[slot]..bounds[slot + 1];
            (!range.is_empty()).then(|| SetChoice {
                candidate: c,
                design: argmax(layout.design_genes(genes, slot)),
                layers: range,
            })
        })
        .collect()
}

/// First-generation design genes: the performance scores scaled so the
/// best design gets 1.
pub fn init_design_genes(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![1.0; scores.len()];
    }
    scores.iter().map(|s| s / max).collect()
}

type MemoKey = (Vec<usize>, usize, usize, usize);

/// Inner-GA results shared by all outer individuals.
struct Memo {
    map: Mutex<HashMap<MemoKey, Arc<InnerResult>>>,
}

impl Memo {
    fn get_or_run(&self, key: MemoKey, run: impl FnOnce() -> InnerResult) -> Arc<InnerResult> {
        if let Some(r) = self.map.lock().expect("memo lock").get(&key) {
            return Arc::clone(r);
        }
        let r = Arc::new(run());
        Arc::clone(self.map.lock().expect("memo lock").entry(key).or_insert(r))
    }

    fn len(&self) -> usize {
        self.map.lock().expect("memo lock").len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub mapping: Mapping,
    pub report: LatencyReport,
    /// Best outer fitness per generation, seconds.
    pub history: Vec<f64>,
    pub outer_evaluations: usize,
    pub inner_runs: usize,
}

/// Two-level search: the outer GA picks sets, designs and layer cuts; each
/// distinct (set, design, range) is optimized once by the inner GA.
pub fn run_outer_ga(
    workload: &Workload,
    topo: &SystemTopology,
    designs: &[AcceleratorDesign],
    cfg_outer: &GAConfig,
    cfg_inner: &GAConfig,
    elem_bytes: u64,
    exec: Executor,
) -> Result<SearchOutcome> {
    if designs.is_empty() {
        return Err(Error::Validation("no accelerator designs given".into()));
    }
    if workload.is_empty() {
        return Err(Error::Validation("workload has no layers".into()));
    }
    cfg_outer.validate()?;
    cfg_inner.validate()?;
    let layout = OuterLayout::new(search_candidates(topo), designs.len(), topo.n_acc);
    let design_init = init_design_genes(&profile_designs(designs, workload).scores);
    let memo = Memo {
        map: Mutex::new(HashMap::new()),
    };
    let n = workload.len();

    let solve = |choice: &SetChoice| -> Arc<InnerResult> {
        let accset = &layout.candidates[choice.candidate];
        let key = (accset.members.clone(), choice.design, choice.layers.start, choice.layers.end);
        memo.get_or_run(key, || {
            run_inner_ga(
                accset,
                &workload.layers[choice.layers.clone()],
                choice.layers.start,
                &designs[choice.design],
                choice.design,
                topo,
                cfg_inner,
                elem_bytes,
            )
        })
    };

    let fitness = |genes: &[f64]| -> f64 {
        let choices = decode_outer(genes, &layout, n);
        let mut total = 0.0;
        let mut valid = true;
        for (i, c) in choices.iter().enumerate() {
            let r = solve(c);
            total += r.latency;
            valid &= r.valid;
            if i > 0 {
                let prev = &choices[i - 1];
                let bytes = workload.layers[prev.layers.end - 1].output_elems() * elem_bytes;
                let cost = inter_set_path_bandwidth(topo, &layout.candidates[prev.candidate], &layout.candidates[c.candidate])
                    .and_then(|path| p2p_cost(bytes as f64, path.bandwidth, topo.msg_latency));
                match cost {
                    Ok(c) => total += c.seconds,
                    Err(_) => return f64::INFINITY,
                }
            }
        }
        if valid {
            total
        } else {
            total * MEMORY_PENALTY
        }
    };

    let init = |rng: &mut ChaCha8Rng, _| -> Vec<f64> {
        let mut g: Vec<f64> = (0..layout.n_genes()).map(|_| rng.random::<f64>()).collect();
        for slot in 0..layout.slots {
            let start = layout.candidates.len() + slot * layout.n_designs;
            g[start..start + layout.n_designs].copy_from_slice(&design_init);
        }
        g
    };

    let out = run_ga(layout.n_genes(), 1, cfg_outer, init, fitness, exec);
    let choices = decode_outer(&out.best, &layout, n);
    let mut strategies = Vec::with_capacity(n);
    let mut sets = Vec::with_capacity(choices.len());
    for c in &choices {
        strategies.extend(solve(c).strategies.iter().cloned());
        sets.push(MappedSet {
            accset: layout.candidates[c.candidate].clone(),
            design: designs[c.design].clone(),
            layers: c.layers.clone(),
        });
    }
    let mapping = Mapping { sets, strategies };
    let report = evaluate(&mapping, workload, topo, elem_bytes)?;
    Ok(SearchOutcome {
        mapping,
        report,
        history: out.history,
        outer_evaluations: out.evaluations,
        inner_runs: memo.len(),
    })
}
