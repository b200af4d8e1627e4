//! Human-readable mapping tables and comparison cells.

use crate::evaluator::{LatencyReport, Mapping};

fn conv_range(first: usize, last: usize) -> String {
    if first == last {
        format!("Conv{first}")
    } else {
        format!("Conv{first}-{last}")
    }
}

/// One line per set, e.g. `Conv1-7→4×Design 1`.
pub fn set_lines(mapping: &Mapping) -> Vec<String> {
    mapping
        .sets
        .iter()
        .map(|s| {
            format!(
                "{}→{}×{}",
                conv_range(s.layers.start + 1, s.layers.end),
                s.accset.size(),
                s.design.label
            )
        })
        .collect()
}

/// One line per layer, e.g. `Conv1: ES={H,W}, SS=∅`.
pub fn strategy_lines(mapping: &Mapping) -> Vec<String> {
    mapping
        .strategies
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Conv{}: {}", i + 1, s.notation()))
        .collect()
}

/// Set lines joined with `; `.
pub fn mapping_summary(mapping: &Mapping) -> String {
    set_lines(mapping).join("; ")
}

/// Relative change of `value` against `reference`, percent.
pub fn reduction_percent(value: f64, reference: f64) -> f64 {
    (value - reference) / reference * 100.0
}

/// Comparison cell such as `0.748(-10.1%)`.
pub fn compare_cell(value_ms: f64, reference_ms: f64) -> String {
    format!("{value_ms:.3}({:+.1}%)", reduction_percent(value_ms, reference_ms))
}

/// Multi-line table: total, component breakdown, sets, then strategies.
pub fn render(title: &str, mapping: &Mapping, report: &LatencyReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{title}\n"));
    out.push_str(&format!(
        "total latency: {:.3} ms{}\n",
        report.total_ms,
        if report.valid { "" } else { " (memory limit exceeded)" }
    ));
    out.push_str(&format!("mapping: {}\n", mapping_summary(mapping)));
    out.push_str("set  members          compute_ms  allreduce_ms  ss_ring_ms  redist_ms  memory_MiB\n");
    for (i, s) in report.per_set.iter().enumerate() {
        let members: Vec<String> = s.members.iter().map(|m| m.to_string()).collect();
        out.push_str(&format!(
            "{:<4} {:<16} {:>10.3}  {:>12.3}  {:>10.3}  {:>9.3}  {:>10.1}\n",
            i + 1,
            format!("{{{}}}", members.join(",")),
            s.compute_ms,
            s.allreduce_ms,
            s.ss_ring_ms,
            s.redistribution_ms,
            s.memory_bytes as f64 / (1u64 << 20) as f64
        ));
    }
    out.push_str(&format!("inter-set: {:.3} ms\n", report.inter_set_ms));
    for line in strategy_lines(mapping) {
        out.push_str(&format!("  {line}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_format() {
        assert_eq!(compare_cell(0.748, 0.832), "0.748(-10.1%)");
        assert_eq!(compare_cell(1.0, 1.0), "1.000(+0.0%)");
    }

    #[test]
    fn ranges() {
        assert_eq!(conv_range(1, 7), "Conv1-7");
        assert_eq!(conv_range(3, 3), "Conv3");
    }
}
