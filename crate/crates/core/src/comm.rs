//! Analytical communication costs: point-to-point transfers, ring
//! all-reduce, shared-shard ring circulation and activation redistribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CommCost {
    pub seconds: f64,
    pub bytes_moved: f64,
    pub via_host: bool,
}

impl CommCost {
    pub const ZERO: CommCost = CommCost {
        seconds: 0.0,
        bytes_moved: 0.0,
        via_host: false,
    };
}

fn require_bandwidth(bw: f64) -> Result<()> {
    if bw > 0.0 && bw.is_finite() {
        Ok(())
    } else {
        Err(Error::ZeroBandwidth)
    }
}

/// `msg_latency + bytes * 8 / bandwidth`.
pub fn p2p_cost(bytes: f64, bandwidth: f64, msg_latency: f64) -> Result<CommCost> {
    require_bandwidth(bandwidth)?;
    Ok(CommCost {
        seconds: msg_latency + bytes * 8.0 / bandwidth,
        bytes_moved: bytes,
        via_host: false,
    })
}

/// Ring all-reduce of `bytes_per_member` over `p` members:
/// `2 (p - 1) (msg_latency + bytes_per_member / p * 8 / bw)`.
pub fn allreduce_cost(bytes_per_member: f64, p: u32, intra_bw: f64, msg_latency: f64) -> Result<CommCost> {
    if p <= 1 {
        return Ok(CommCost::ZERO);
    }
    require_bandwidth(intra_bw)?;
    let p = p as f64;
    let chunk = bytes_per_member / p;
    let steps = 2.0 * (p - 1.0);
    Ok(CommCost {
        seconds: steps * (msg_latency + chunk * 8.0 / intra_bw),
        bytes_moved: steps * chunk * p,
        via_host: false,
    })
}

/// `p - 1` ring steps, each forwarding one shared shard to the neighbor.
pub fn ss_ring_cost(shared_shard_bytes: f64, p: u32, intra_bw: f64, msg_latency: f64) -> Result<CommCost> {
    if p <= 1 {
        return Ok(CommCost::ZERO);
    }
    require_bandwidth(intra_bw)?;
    let steps = (p - 1) as f64;
    Ok(CommCost {
        seconds: steps * (msg_latency + shared_shard_bytes * 8.0 / intra_bw),
        bytes_moved: steps * shared_shard_bytes * p as f64,
        via_host: false,
    })
}

/// Zero when the producer's layout already covers what the consumer needs,
/// otherwise a full-tensor all-gather-then-scatter at `bw`.
pub fn redistribute_cost(out_bytes_total: f64, layouts_match: bool, bw: f64, msg_latency: f64) -> Result<CommCost> {
    if layouts_match {
        return Ok(CommCost::ZERO);
    }
    p2p_cost(out_bytes_total, bw, msg_latency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GBPS, MIB};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1e-30)
    }

    #[test]
    fn p2p_zero_bytes_is_latency() {
        assert_eq!(p2p_cost(0.0, 8.0 * GBPS, 1e-6).unwrap().seconds, 1e-6);
    }

    #[test]
    fn p2p_one_mib() {
        let c = p2p_cost(MIB as f64, 8.0 * GBPS, 1e-6).unwrap();
        assert!(close(c.seconds, 1.049576e-3), "{}", c.seconds);
        let c = p2p_cost(MIB as f64, 2.0 * GBPS, 1e-6).unwrap();
        assert!(close(c.seconds, 4.194304e-3 + 1e-6), "{}", c.seconds);
    }

    #[test]
    fn p2p_zero_bandwidth() {
        assert!(matches!(p2p_cost(1.0, 0.0, 0.0), Err(Error::ZeroBandwidth)));
    }

    #[test]
    fn allreduce_twelve_ms() {
        let c = allreduce_cost(8e6, 4, 8.0 * GBPS, 0.0).unwrap();
        assert!(close(c.seconds, 12e-3), "{}", c.seconds);
        assert_eq!(allreduce_cost(8e6, 1, 0.0, 1e-6).unwrap(), CommCost::ZERO);
        assert!(allreduce_cost(8e6, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn allreduce_bandwidth_optimal_limit() {
        let bytes = 1e6;
        let limit = 2.0 * bytes * 8.0 / GBPS;
        let c = allreduce_cost(bytes, 1 << 16, GBPS, 0.0).unwrap();
        assert!((c.seconds - limit).abs() / limit < 1e-4);
    }

    #[test]
    fn ring_steps() {
        let one = ss_ring_cost(MIB as f64, 2, 8.0 * GBPS, 1e-6).unwrap();
        assert!(close(one.seconds, 1.049576e-3));
        let three = ss_ring_cost(MIB as f64, 4, 8.0 * GBPS, 1e-6).unwrap();
        assert!(close(three.seconds, 3.0 * one.seconds));
        assert_eq!(ss_ring_cost(5.0, 1, 0.0, 1.0).unwrap().seconds, 0.0);
    }

    #[test]
    fn redistribution() {
        assert_eq!(redistribute_cost(1e6, true, 8.0 * GBPS, 1e-6).unwrap().seconds, 0.0);
        let c = redistribute_cost(4.0 * MIB as f64, false, 2.0 * GBPS, 1e-6).unwrap();
        assert!(close(c.seconds, 16.777216e-3 + 1e-6));
    }
}
