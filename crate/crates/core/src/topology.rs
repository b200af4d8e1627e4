//! Multi-accelerator system graph and accelerator-set candidates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, Quantity, GBPS, GIB};

/// Default fixed cost of one point-to-point message.
pub const DEFAULT_MSG_LATENCY: f64 = 1e-6;

/// Largest component for which connected power-of-two subsets are enumerated.
const MAX_CLOSURE_COMPONENT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTopology {
    pub n_acc: usize,
    /// Symmetric, zero diagonal, bits/s. Zero means no direct link.
    pub bw: Vec<Vec<f64>>,
    /// Host-link bandwidth per accelerator, bits/s.
    pub bw_host: Vec<f64>,
    /// DRAM capacity per accelerator, bytes.
    pub mem: Vec<u64>,
    /// Fixed per-message latency, seconds.
    pub msg_latency: f64,
}

impl SystemTopology {
    pub fn new(bw: Vec<Vec<f64>>, bw_host: Vec<f64>, mem: Vec<u64>, msg_latency: f64) -> Result<Self> {
        let t = SystemTopology {
            n_acc: bw.len(),
            bw,
            bw_host,
            mem,
            msg_latency,
        };
        t.validate()?;
        Ok(t)
    }

    /// Accelerators in `groups` are linked all-to-all at `group_bw`; there are
    /// no links between groups.
    pub fn grouped(groups: &[Vec<usize>], group_bw: f64, host_bw: f64, mem: u64, msg_latency: f64) -> Result<Self> {
        let n = groups.iter().map(Vec::len).sum();
        let mut bw = vec![vec![0.0; n]; n];
        let mut seen = vec![false; n];
        for g in groups {
            for &a in g {
                if a >= n || seen[a] {
                    return Err(Error::Validation(format!("accelerator {a} is out of range or listed twice")));
                }
                seen[a] = true;
                for &b in g {
                    if a != b {
                        bw[a][b] = group_bw;
                    }
                }
            }
        }
        Self::new(bw, vec![host_bw; n], vec![mem; n], msg_latency)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_acc;
        if n == 0 {
            return Err(Error::Validation("topology has no accelerators".into()));
        }
        if self.bw.len() != n || self.bw.iter().any(|r| r.len() != n) {
            return Err(Error::Validation(format!("bandwidth matrix must be {n}x{n}")));
        }
        if self.bw_host.len() != n || self.mem.len() != n {
            return Err(Error::Validation("bw_host and mem need one entry per accelerator".into()));
        }
        for i in 0..n {
            if self.bw[i][i] != 0.0 {
                return Err(Error::Validation(format!("bw[{i}][{i}] must be zero")));
            }
            for j in 0..n {
                let v = self.bw[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!("bw[{i}][{j}] = {v} is not a bandwidth")));
                }
                if v != self.bw[j][i] {
                    return Err(Error::Validation(format!("bandwidth matrix is not symmetric at ({i},{j})")));
                }
            }
            if !(self.bw_host[i] > 0.0 && self.bw_host[i].is_finite()) {
                return Err(Error::Validation(format!("bw_host[{i}] must be positive")));
            }
            if self.mem[i] == 0 {
                return Err(Error::Validation(format!("mem[{i}] must be positive")));
            }
        }
        if !(self.msg_latency >= 0.0 && self.msg_latency.is_finite()) {
            return Err(Error::Validation("msg_latency must be non-negative".into()));
        }
        Ok(())
    }

    /// Connected components of the direct-link graph, each sorted, ordered by
    /// smallest member.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        components(self.n_acc, |a, b| self.bw[a][b] > 0.0, &(0..self.n_acc).collect::<Vec<_>>())
    }

    pub fn is_connected(&self, members: &[usize]) -> bool {
        components(self.n_acc, |a, b| self.bw[a][b] > 0.0, members).len() == 1
    }

    pub fn min_mem(&self, members: &[usize]) -> u64 {
        members.iter().map(|&m| self.mem[m]).min().unwrap_or(0)
    }

    /// Bottleneck bandwidth of the best spanning tree over `members`, or 0
    /// for a single accelerator or a disconnected set.
    pub fn bottleneck_bandwidth(&self, members: &[usize]) -> f64 {
        if members.len() < 2 {
            return 0.0;
        }
        let mut levels: Vec<f64> = members
            .iter()
            .flat_map(|&a| members.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.bw[a][b])
            .filter(|&v| v > 0.0)
            .collect();
        levels.sort_by(|a, b| b.total_cmp(a));
        levels.dedup();
        for t in levels {
            if components(self.n_acc, |a, b| self.bw[a][b] >= t, members).len() == 1 {
                return t;
            }
        }
        0.0
    }

    pub fn from_document(doc: TopologyDoc) -> Result<Self> {
        let n = doc.n_acc;
        let msg_latency = match &doc.msg_latency {
            Some(q) => units::parse_seconds("msg_latency", q)?,
            None => DEFAULT_MSG_LATENCY,
        };
        let per_acc_bw = |field: &str, v: &PerAcc| -> Result<Vec<f64>> {
            match v {
                PerAcc::One(q) => Ok(vec![units::parse_bandwidth(field, q)?; n]),
                PerAcc::Each(qs) => {
                    if qs.len() != n {
                        return Err(Error::parse(field, format!("expected {n} entries, got {}", qs.len())));
                    }
                    qs.iter().map(|q| units::parse_bandwidth(field, q)).collect()
                }
            }
        };
        let bw_host = per_acc_bw("bw_host", &doc.bw_host)?;
        let mem = match &doc.mem {
            PerAcc::One(q) => vec![units::parse_bytes("mem", q)?; n],
            PerAcc::Each(qs) => {
                if qs.len() != n {
                    return Err(Error::parse("mem", format!("expected {n} entries, got {}", qs.len())));
                }
                qs.iter().map(|q| units::parse_bytes("mem", q)).collect::<Result<_>>()?
            }
        };
        let mut bw = vec![vec![0.0; n]; n];
        if let Some(groups) = &doc.groups {
            let gbw = doc
                .group_bw
                .as_ref()
                .ok_or_else(|| Error::parse("group_bw", "required when `groups` is given"))?;
            let gbw = units::parse_bandwidth("group_bw", gbw)?;
            for g in groups {
                for &a in g {
                    for &b in g {
                        if a >= n || b >= n {
                            return Err(Error::parse("groups", format!("accelerator index out of range 0..{n}")));
                        }
                        if a != b {
                            bw[a][b] = gbw;
                        }
                    }
                }
            }
        }
        for (i, e) in doc.edges.iter().enumerate() {
            let field = format!("edges[{i}]");
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::parse(field, format!("bad endpoints ({}, {})", e.a, e.b)));
            }
            let v = units::parse_bandwidth(&field, &e.bw)?;
            bw[e.a][e.b] = v;
            bw[e.b][e.a] = v;
        }
        Self::new(bw, bw_host, mem, msg_latency)
    }

    pub fn to_document(&self) -> TopologyDoc {
        let mut edges = Vec::new();
        for a in 0..self.n_acc {
            for b in a + 1..self.n_acc {
                if self.bw[a][b] > 0.0 {
                    edges.push(EdgeDoc {
                        a,
                        b,
                        bw: scaled(self.bw[a][b], GBPS, "Gbps", "bps"),
                    });
                }
            }
        }
        TopologyDoc {
            n_acc: self.n_acc,
            groups: None,
            group_bw: None,
            edges,
            bw_host: PerAcc::Each(
                self.bw_host
                    .iter()
                    .map(|&v| scaled(v, GBPS, "Gbps", "bps"))
                    .collect(),
            ),
            mem: PerAcc::Each(self.mem.iter().map(|&v| scaled(v as f64, GIB as f64, "GB", "B")).collect()),
            msg_latency: Some(scaled(self.msg_latency, 1e-6, "us", "s")),
        }
    }
}

/// `value` in `unit` when that reads back exactly, otherwise in `base`.
fn scaled(value: f64, scale: f64, unit: &str, base: &str) -> Quantity {
    let v = value / scale;
    if v * scale == value {
        Quantity::Text(format!("{v}{unit}"))
    } else {
        Quantity::Text(format!("{value}{base}"))
    }
}

/// The eight-accelerator, two-group system: 8 Gbps inside a group, no
/// direct links across groups, 2 Gbps host links and 1 GB DRAM each.
pub fn build_f1_topology() -> SystemTopology {
    SystemTopology::grouped(
        &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
        8.0 * GBPS,
        2.0 * GBPS,
        GIB,
        DEFAULT_MSG_LATENCY,
    )
    .expect("builtin topology is valid")
}

pub fn builtin_topology(name: &str) -> Option<SystemTopology> {
    match name.to_ascii_lowercase().as_str() {
        "f1" => Some(build_f1_topology()),
        _ => None,
    }
}

/// On-disk topology document. Either `groups` + `group_bw`, an explicit
/// `edges` list, or both (edges override).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub n_acc: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_bw: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeDoc>,
    pub bw_host: PerAcc,
    pub mem: PerAcc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg_latency: Option<Quantity>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub a: usize,
    pub b: usize,
    pub bw: Quantity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAcc {
    Each(Vec<Quantity>),
    One(Quantity),
}

pub fn load_topology(source: &str) -> Result<SystemTopology> {
    let doc: TopologyDoc = serde_json::from_str(source).map_err(|e| Error::parse("topology", e.to_string()))?;
    SystemTopology::from_document(doc)
}

/// A group of accelerators that may be configured with one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccSetCandidate {
    /// Sorted accelerator indices.
    pub members: Vec<usize>,
    /// Bottleneck link bandwidth inside the set (bits/s); 0 for a singleton.
    pub intra_bw: f64,
}

impl AccSetCandidate {
    pub fn new(topo: &SystemTopology, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let intra_bw = topo.bottleneck_bandwidth(&members);
        AccSetCandidate { members, intra_bw }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_disjoint(&self, other: &AccSetCandidate) -> bool {
        self.members.iter().all(|m| !other.members.contains(m))
    }

    pub fn label(&self) -> String {
        let ids: Vec<String> = self.members.iter().map(|m| m.to_string()).collect();
        format!("{{{}}}", ids.join(","))
    }
}

/// Candidate accelerator sets from iterative lowest-bandwidth edge removal.
///
/// The components of the full graph are recorded first. Then every edge tied
/// at the current minimum bandwidth is deleted in one round and the new
/// components are recorded, until no edges remain. Finally the list is
/// closed under connected subsets whose size is a power of two. Ordered by
/// size (largest first), then lexicographically.
pub fn enumerate_accset_candidates(topo: &SystemTopology) -> Vec<AccSetCandidate> {
    let n = topo.n_acc;
    let all: Vec<usize> = (0..n).collect();
    let mut recorded: BTreeSet<Vec<usize>> = BTreeSet::new();

    let mut threshold = 0.0f64;
    loop {
        for comp in components(n, |a, b| topo.bw[a][b] > threshold, &all) {
            recorded.insert(comp);
        }
        let next = topo
            .bw
            .iter()
            .flatten()
            .copied()
            .filter(|&v| v > threshold)
            .min_by(f64::total_cmp);
        match next {
            Some(v) => threshold = v,
            None => break,
        }
    }

    let mut closed = recorded.clone();
    for comp in &recorded {
        if comp.len() > MAX_CLOSURE_COMPONENT {
            continue;
        }
        let k = comp.len();
        for mask in 1u32..(1u32 << k) {
            let size = mask.count_ones() as usize;
            if !size.is_power_of_two() {
                continue;
            }
            let subset: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| comp[i]).collect();
            if topo.is_connected(&subset) {
                closed.insert(subset);
            }
        }
    }

    let mut out: Vec<AccSetCandidate> = closed.into_iter().map(|m| AccSetCandidate::new(topo, m)).collect();
    out.sort_by(|a, b| b.size().cmp(&a.size()).then_with(|| a.members.cmp(&b.members)));
    out
}

/// Bandwidth available for moving data from set `a` to set `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathBandwidth {
    pub bandwidth: f64,
    pub via_host: bool,
}

/// Direct link if any member pair is linked (best such link), otherwise
/// the host path limited by the slower of the two host links.
pub fn inter_set_path_bandwidth(topo: &SystemTopology, a: &AccSetCandidate, b: &AccSetCandidate) -> Result<PathBandwidth> {
    if !a.is_disjoint(b) {
        return Err(Error::Validation(format!(
            "accelerator sets {} and {} overlap",
            a.label(),
            b.label()
        )));
    }
    let direct = a
        .members
        .iter()
        .flat_map(|&x| b.members.iter().map(move |&y| topo.bw[x][y]))
        .fold(0.0f64, f64::max);
    if direct > 0.0 {
        return Ok(PathBandwidth {
            bandwidth: direct,
            via_host: false,
        });
    }
    let host = |s: &AccSetCandidate| s.members.iter().map(|&m| topo.bw_host[m]).fold(0.0f64, f64::max);
    Ok(PathBandwidth {
        bandwidth: host(a).min(host(b)),
        via_host: true,
    })
}

/// Connected components of `members` under `linked`, each sorted.
fn components(n: usize, linked: impl Fn(usize, usize) -> bool, members: &[usize]) -> Vec<Vec<usize>> {
    let mut inside = vec![false; n];
    for &m in members {
        inside[m] = true;
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    for &start in &sorted {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for u in 0..n {
                if inside[u] && !seen[u] && linked(v, u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(c: &[AccSetCandidate]) -> Vec<Vec<usize>> {
        c.iter().map(|c| c.members.clone()).collect()
    }

    #[test]
    fn f1_links() {
        let t = build_f1_topology();
        assert_eq!(t.n_acc, 8);
        assert_eq!(t.bw[0][1], 8e9);
        assert_eq!(t.bw[0][4], 0.0);
        assert!(t.bw_host.iter().all(|&v| v == 2e9));
        assert!(t.mem.iter().all(|&v| v == GIB));
        assert_eq!(t.groups(), vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
    }

    #[test]
    fn f1_candidates_are_every_power_of_two_subset_of_a_group() {
        let t = build_f1_topology();
        let c = enumerate_accset_candidates(&t);
        // 2 groups x (1 four-set + 6 pairs + 4 singletons)
        assert_eq!(c.len(), 22);
        let m = members(&c);
        assert!(m.contains(&vec![0, 1, 2, 3]));
        assert!(m.contains(&vec![4, 5, 6, 7]));
        assert!(m.contains(&vec![1, 3]));
        assert!(!m.contains(&vec![3, 4]));
        for s in 0..8 {
            assert!(m.contains(&vec![s]));
        }
        assert!(c.iter().all(|c| t.is_connected(&c.members)));
        assert_eq!(c[0].intra_bw, 8e9);
    }

    #[test]
    fn single_accelerator() {
        let t = SystemTopology::new(vec![vec![0.0]], vec![1e9], vec![GIB], 0.0).unwrap();
        assert_eq!(members(&enumerate_accset_candidates(&t)), vec![vec![0]]);
    }

    #[test]
    fn three_node_path() {
        // 0 -1Gbps- 1 -2Gbps- 2
        let bw = vec![vec![0.0, 1e9, 0.0], vec![1e9, 0.0, 2e9], vec![0.0, 2e9, 0.0]];
        let t = SystemTopology::new(bw, vec![1e9; 3], vec![GIB; 3], 0.0).unwrap();
        let m = members(&enumerate_accset_candidates(&t));
        assert_eq!(m, vec![vec![0, 1, 2], vec![0, 1], vec![1, 2], vec![0], vec![1], vec![2]]);
        let c = enumerate_accset_candidates(&t);
        assert_eq!(c[0].intra_bw, 1e9);
        assert_eq!(c[2].intra_bw, 2e9);
    }

    #[test]
    fn candidates_are_deterministic() {
        let t = build_f1_topology();
        assert_eq!(enumerate_accset_candidates(&t), enumerate_accset_candidates(&t));
    }

    #[test]
    fn inter_set_paths() {
        let t = build_f1_topology();
        let a = AccSetCandidate::new(&t, vec![0, 1]);
        let b = AccSetCandidate::new(&t, vec![2, 3]);
        let c = AccSetCandidate::new(&t, vec![4, 5, 6, 7]);
        let p = inter_set_path_bandwidth(&t, &a, &b).unwrap();
        assert_eq!((p.bandwidth, p.via_host), (8e9, false));
        let p = inter_set_path_bandwidth(&t, &a, &c).unwrap();
        assert_eq!((p.bandwidth, p.via_host), (2e9, true));
        let s = AccSetCandidate::new(&t, vec![0]);
        assert!(inter_set_path_bandwidth(&t, &s, &s).is_err());
    }

    #[test]
    fn document_forms_agree() {
        let grouped = load_topology(
            r#"{"n_acc":8,"groups":[[0,1,2,3],[4,5,6,7]],"group_bw":"8Gbps","bw_host":"2Gbps","mem":"1GB","msg_latency":"1us"}"#,
        )
        .unwrap();
        assert_eq!(grouped, build_f1_topology());
        let emitted = serde_json::to_string(&grouped.to_document()).unwrap();
        assert_eq!(load_topology(&emitted).unwrap(), grouped);
    }

    #[test]
    fn rejects_asymmetric() {
        let bw = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(SystemTopology::new(bw, vec![1.0; 2], vec![1; 2], 0.0).is_err());
    }
}
