use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::inner::score;
use super::outer::search_candidates;
use super::MEMORY_PENALTY;
use crate::accel::AcceleratorDesign;
use crate::comm::p2p_cost;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, LatencyReport, MappedSet, Mapping, SetEnv};
use crate::sharding::{enumerate_strategies, ParallelismStrategy};
use crate::topology::{inter_set_path_bandwidth, AccSetCandidate, SystemTopology};
use crate::workload::{ConvLayer, Workload};

/// Largest instance the exhaustive search accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_layers: usize,
    pub max_accelerators: usize,
    pub max_designs: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_layers: 4,
            max_accelerators: 4,
            max_designs: 2,
        }
    }
}

/// Exact optimum of the inner objective for one set: a chain DP over
/// compute, collective and redistribution costs, then a branch-and-bound
/// pass when the DP optimum overflows memory.
pub fn exact_inner(env: &SetEnv<'_>, layers: &[ConvLayer], mem_limit: u64) -> Result<(f64, Vec<ParallelismStrategy>)> {
    let options: Vec<Vec<ParallelismStrategy>> = layers
        .iter()
        .map(|l| enumerate_strategies(l, env.p))
        .collect::<Result<_>>()?;
    let own: Vec<Vec<f64>> = layers
        .iter()
        .zip(&options)
        .map(|(l, opts)| opts.iter().map(|s| env.layer_cost(l, s).map(|c| c.total())).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let n = layers.len();
    let trans = |i: usize, a: usize, b: usize| -> f64 {
        env.redistribution(&layers[i - 1], &options[i - 1][a], &options[i][b])
            .unwrap_or(f64::INFINITY)
    };

    // best[i][s]: cheapest chain over layers 0..=i ending in option s.
    let mut best: Vec<Vec<f64>> = vec![own[0].clone()];
    let mut back: Vec<Vec<usize>> = vec![vec![0; own[0].len()]];
    for i in 1..n {
        let mut row = Vec::with_capacity(own[i].len());
        let mut arg = Vec::with_capacity(own[i].len());
        for b in 0..own[i].len() {
            let (a, v) = (0..own[i - 1].len())
                .map(|a| (a, best[i - 1][a] + trans(i, a, b)))
                .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                .expect("every layer has a strategy");
            row.push(v + own[i][b]);
            arg.push(a);
        }
        best.push(row);
        back.push(arg);
    }
    let (mut s, _) = best[n - 1]
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
        .expect("nonempty");
    let mut picks = vec![0usize; n];
    for i in (0..n).rev() {
        picks[i] = s;
        s = back[i][s];
    }
    let chosen: Vec<ParallelismStrategy> = picks.iter().enumerate().map(|(i, &k)| options[i][k].clone()).collect();
    let (fit, _, _, valid) = score(env, layers, &chosen, mem_limit);
    if valid {
        return Ok((fit, chosen));
    }

    // Lower bound on the cost of layers i.. (redistribution ignored).
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + own[i].iter().copied().fold(f64::INFINITY, f64::min);
    }
    let mut best_fit = fit;
    let mut best_pick = picks;
    let mut stack = vec![0usize; n];
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        i: usize,
        acc: f64,
        stack: &mut Vec<usize>,
        ctx: &mut dyn FnMut(&[usize]) -> f64,
        bound: &dyn Fn(usize, usize, usize) -> f64,
        own: &[Vec<f64>],
        suffix: &[f64],
        best_fit: &mut f64,
        best_pick: &mut Vec<usize>,
    ) {
        let n = own.len();
        if i == n {
            let f = ctx(stack);
            if f < *best_fit {
                *best_fit = f;
                best_pick.clone_from(stack);
            }
            return;
        }
        for k in 0..own[i].len() {
            let step = own[i][k] + if i > 0 { bound(i, stack[i - 1], k) } else { 0.0 };
            if acc + step + suffix[i + 1] >= *best_fit {
                continue;
            }
            stack[i] = k;
            dfs(i + 1, acc + step, stack, ctx, bound, own, suffix, best_fit, best_pick);
        }
    }
    let mut full = |picks: &[usize]| -> f64 {
        let s: Vec<ParallelismStrategy> = picks.iter().enumerate().map(|(i, &k)| options[i][k].clone()).collect();
        score(env, layers, &s, mem_limit).0
    };
    dfs(0, 0.0, &mut stack, &mut full, &trans, &own, &suffix, &mut best_fit, &mut best_pick);
    let chosen = best_pick.iter().enumerate().map(|(i, &k)| options[i][k].clone()).collect();
    Ok((best_fit, chosen))
}

/// Candidate, design, first layer, end layer.
type Piece = (usize, usize, usize, usize);
/// Fitness, latency, validity and strategies of one piece.
type Solved = (f64, f64, bool, Vec<ParallelismStrategy>);

struct Enumerator<'a> {
    workload: &'a Workload,
    topo: &'a SystemTopology,
    designs: &'a [AcceleratorDesign],
    candidates: Vec<AccSetCandidate>,
    elem_bytes: u64,
    memo: HashMap<Piece, Solved>,
    best: Option<(f64, Vec<Piece>)>,
}

impl Enumerator<'_> {
    fn set_cost(&mut self, c: usize, d: usize, start: usize, end: usize) -> Result<(f64, bool)> {
        if let Some(v) = self.memo.get(&(c, d, start, end)) {
            return Ok((v.1, v.2));
        }
        let accset = &self.candidates[c];
        let env = SetEnv::new(self.topo, accset, &self.designs[d], self.elem_bytes);
        let layers = &self.workload.layers[start..end];
        let mem_limit = self.topo.min_mem(&accset.members);
        let (fit, strategies) = exact_inner(&env, layers, mem_limit)?;
        let (_, b, _, valid) = score(&env, layers, &strategies, mem_limit);
        self.memo.insert((c, d, start, end), (fit, b.total(), valid, strategies));
        Ok((b.total(), valid))
    }

    /// Extends a partial sequence of sets covering layers `0..start`.
    fn extend(&mut self, start: usize, seq: &mut Vec<Piece>) -> Result<()> {
        let n = self.workload.len();
        if start == n {
            return self.finish(seq);
        }
        for c in 0..self.candidates.len() {
            if seq.iter().any(|&(o, ..)| !self.candidates[o].is_disjoint(&self.candidates[c])) {
                continue;
            }
            for end in start + 1..=n {
                for d in 0..self.designs.len() {
                    seq.push((c, d, start, end));
                    self.extend(end, seq)?;
                    seq.pop();
                }
            }
        }
        Ok(())
    }

    fn finish(&mut self, seq: &[Piece]) -> Result<()> {
        let mut total = 0.0;
        let mut valid = true;
        for (i, &(c, d, start, end)) in seq.iter().enumerate() {
            let (lat, ok) = self.set_cost(c, d, start, end)?;
            total += lat;
            valid &= ok;
            if i > 0 {
                let (pc, _, _, pend) = seq[i - 1];
                let bytes = self.workload.layers[pend - 1].output_elems() * self.elem_bytes;
                let path = inter_set_path_bandwidth(self.topo, &self.candidates[pc], &self.candidates[c])?;
                total += p2p_cost(bytes as f64, path.bandwidth, self.topo.msg_latency)?.seconds;
            }
        }
        let fitness = if valid { total } else { total * MEMORY_PENALTY };
        if self.best.as_ref().is_none_or(|(b, _)| fitness < *b) {
            self.best = Some((fitness, seq.to_vec()));
        }
        Ok(())
    }
}

/// Exhaustive search over every ordered sequence of disjoint candidate sets,
/// contiguous layer cuts, design assignment and per-layer strategy.
pub fn run_oracle(
    workload: &Workload,
    topo: &SystemTopology,
    designs: &[AcceleratorDesign],
    limits: &OracleLimits,
    elem_bytes: u64,
) -> Result<(Mapping, LatencyReport)> {
    let mut too_big = Vec::new();
    if workload.len() > limits.max_layers {
        too_big.push(format!("{} layers (limit {})", workload.len(), limits.max_layers));
    }
    if topo.n_acc > limits.max_accelerators {
        too_big.push(format!("{} accelerators (limit {})", topo.n_acc, limits.max_accelerators));
    }
    if designs.len() > limits.max_designs {
        too_big.push(format!("{} designs (limit {})", designs.len(), limits.max_designs));
    }
    if !too_big.is_empty() {
        return Err(Error::OracleLimits(too_big.join(", ")));
    }
    if designs.is_empty() || workload.is_empty() {
        return Err(Error::Validation("oracle needs at least one design and one layer".into()));
    }
    let mut e = Enumerator {
        workload,
        topo,
        designs,
        candidates: search_candidates(topo),
        elem_bytes,
        memo: HashMap::new(),
        best: None,
    };
    e.extend(0, &mut Vec::new())?;
    let (_, seq) = e.best.clone().expect("at least one mapping exists");
    let mut sets = Vec::new();
    let mut strategies = Vec::new();
    for (c, d, start, end) in seq {
        strategies.extend(e.memo[&(c, d, start, end)].3.iter().cloned());
        sets.push(MappedSet {
            accset: e.candidates[c].clone(),
            design: designs[d].clone(),
            layers: start..end,
        });
    }
    let mapping = Mapping { sets, strategies };
    let report = evaluate(&mapping, workload, topo, elem_bytes)?;
    Ok((mapping, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::{builtin_designs, layer_latency};
    use crate::topology::build_f1_topology;

    #[test]
    fn one_layer_one_accelerator() {
        let topo = SystemTopology::new(vec![vec![0.0]], vec![2e9], vec![1 << 30], 1e-6).unwrap();
        let d = vec![builtin_designs()[1].clone()];
        let l = ConvLayer::square(32, 16, 14, 3, 1);
        let w = Workload::new("t", vec![l]).unwrap();
        let (_, r) = run_oracle(&w, &topo, &d, &OracleLimits::default(), 2).unwrap();
        assert!((r.total_ms - layer_latency(&d[0], &l) * 1e3).abs() < 1e-12);
    }

    #[test]
    fn refuses_large_instances() {
        let topo = build_f1_topology();
        let w = Workload::new("t", vec![ConvLayer::square(8, 8, 8, 3, 1)]).unwrap();
        let err = run_oracle(&w, &topo, &builtin_designs()[..1], &OracleLimits::default(), 2).unwrap_err();
        assert!(matches!(err, Error::OracleLimits(_)));
        assert!(err.to_string().contains("8 accelerators"));
    }

    #[test]
    fn dp_matches_brute_force() {
        let topo = SystemTopology::new(vec![vec![0.0, 8e9], vec![8e9, 0.0]], vec![2e9; 2], vec![1 << 30; 2], 1e-6).unwrap();
        let d = builtin_designs()[0].clone();
        let layers = [ConvLayer::square(8, 4, 6, 3, 1), ConvLayer::square(6, 8, 6, 1, 1)];
        let set = AccSetCandidate::new(&topo, vec![0, 1]);
        let env = SetEnv::new(&topo, &set, &d, 2);
        let (fit, _) = exact_inner(&env, &layers, 1 << 30).unwrap();
        let a = enumerate_strategies(&layers[0], 2).unwrap();
        let b = enumerate_strategies(&layers[1], 2).unwrap();
        let mut brute = f64::INFINITY;
        for x in &a {
            for y in &b {
                brute = brute.min(score(&env, &layers, &[x.clone(), y.clone()], 1 << 30).0);
            }
        }
        assert_eq!(fit, brute);
        // Tight memory forces the branch-and-bound path.
        let (tight, s) = exact_inner(&env, &layers, 200).unwrap();
        let mut brute = f64::INFINITY;
        for x in &a {
            for y in &b {
                brute = brute.min(score(&env, &layers, &[x.clone(), y.clone()], 200).0);
            }
        }
        assert_eq!(tight, brute);
        assert_eq!(s.len(), 2);
    }
}
