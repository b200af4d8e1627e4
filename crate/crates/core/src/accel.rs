//! Analytical cycle models for the configurable accelerator designs.
//!
//! All three models count cycles from loop bounds and tile parameters; the
//! only utilization effect is tile underfill from ceiling division, plus a
//! fixed per-output-tile cost for the two designs that stream a reduction
//! through a pipeline (systolic fill/drain, Winograd transforms).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, Quantity};
use crate::workload::{ConvLayer, Workload};

/// Version tag of the cycle formulas, embedded in reports.
pub const FORMULA_VERSION: &str = "cycles-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// Loop-tiled engine: `tm x tn` MAC array over (c_out, c_in), output tile `tr x tc`.
    Tiled { tm: u32, tn: u32, tr: u32, tc: u32 },
    /// `row x col` systolic array of `vec`-wide PEs over (c_out, h*w, c_in).
    Systolic { row: u32, col: u32, vec: u32 },
    /// F(m x m, 3 x 3) Winograd engine with `n = m + 2` input tiles and
    /// `pn x pm` channel parallelism.
    Winograd { n: u32, pn: u32, pm: u32 },
}

impl DesignKind {
    pub fn name(&self) -> &'static str {
        match self {
            DesignKind::Tiled { .. } => "tiled",
            DesignKind::Systolic { .. } => "systolic",
            DesignKind::Winograd { .. } => "winograd",
        }
    }

    fn params(&self) -> Vec<(&'static str, u32)> {
        match *self {
            DesignKind::Tiled { tm, tn, tr, tc } => vec![("tm", tm), ("tn", tn), ("tr", tr), ("tc", tc)],
            DesignKind::Systolic { row, col, vec } => vec![("row", row), ("col", col), ("vec", vec)],
            DesignKind::Winograd { n, pn, pm } => vec![("n", n), ("pn", pn), ("pm", pm)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorDesign {
    pub id: String,
    /// Display name used in mapping tables.
    pub label: String,
    /// Clock frequency, Hz.
    pub freq: f64,
    pub n_pe: u32,
    #[serde(flatten)]
    pub kind: DesignKind,
}

impl AcceleratorDesign {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq > 0.0 && self.freq.is_finite()) {
            return Err(Error::Validation(format!("design `{}`: freq must be positive", self.id)));
        }
        if self.n_pe == 0 {
            return Err(Error::Validation(format!("design `{}`: n_pe must be positive", self.id)));
        }
        for (name, v) in self.kind.params() {
            if v == 0 {
                return Err(Error::Validation(format!("design `{}`: `{name}` must be at least 1", self.id)));
            }
        }
        if let DesignKind::Winograd { n, .. } = self.kind {
            if n < 3 {
                return Err(Error::Validation(format!(
                    "design `{}`: winograd tile n must be at least 3",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn cycles(&self, layer: &ConvLayer) -> u64 {
        layer_cycles(self, layer)
    }

    pub fn seconds(&self, layer: &ConvLayer) -> f64 {
        layer_latency(self, layer)
    }
}

/// The three built-in designs: a loop-tiled engine, a systolic array and a
/// Winograd engine, all at 200 MHz with comparable PE counts.
pub fn builtin_designs() -> Vec<AcceleratorDesign> {
    vec![
        AcceleratorDesign {
            id: "design1".into(),
            label: "Design 1".into(),
            freq: 200e6,
            n_pe: 438,
            kind: DesignKind::Tiled { tm: 64, tn: 7, tr: 7, tc: 14 },
        },
        AcceleratorDesign {
            id: "design2".into(),
            label: "Design 2".into(),
            freq: 200e6,
            n_pe: 572,
            kind: DesignKind::Systolic { row: 11, col: 13, vec: 8 },
        },
        AcceleratorDesign {
            id: "design3".into(),
            label: "Design 3".into(),
            freq: 200e6,
            n_pe: 576,
            kind: DesignKind::Winograd { n: 6, pn: 2, pm: 8 },
        },
    ]
}

fn cdiv(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Cycles to run `layer` on `design`.
pub fn layer_cycles(design: &AcceleratorDesign, layer: &ConvLayer) -> u64 {
    let co = layer.c_out as u64;
    let ci = layer.c_in as u64;
    let h = layer.h as u64;
    let w = layer.w as u64;
    let kk = layer.k_h as u64 * layer.k_w as u64;
    match design.kind {
        DesignKind::Tiled { tm, tn, tr, tc } => {
            let (tm, tn, tr, tc) = (tm as u64, tn as u64, tr as u64, tc as u64);
            cdiv(co, tm) * cdiv(ci, tn) * cdiv(h, tr) * cdiv(w, tc) * tr * tc * kk
        }
        DesignKind::Systolic { row, col, vec } => {
            let (row, col, vec) = (row as u64, col as u64, vec as u64);
            // Each vec-wide step takes row*col*vec / n_pe cycles on the
            // available multipliers. Every row x col output tile then pays a
            // row + col skew and drains its results one per cycle.
            let step = cdiv(row * col * vec, design.n_pe as u64).max(1);
            let reduction = cdiv(ci, vec) * kk * step;
            cdiv(co, row) * cdiv(h * w, col) * (reduction + row * col + row + col)
        }
        DesignKind::Winograd { n, pn, pm } => {
            let (n, pn, pm) = (n as u64, pn as u64, pm as u64);
            if layer.k_h == 3 && layer.k_w == 3 {
                let m = n - 2;
                // One step covers pm*pn channel pairs of an m x m output tile,
                // i.e. pm*pn*m*m*9 direct-convolution MACs.
                let step = cdiv(pm * pn * m * m * 9, design.n_pe as u64).max(1);
                // Inverse transform and write-back of pm m x m output tiles,
                // plus the input/output transform pipeline depth.
                let transforms = pm * m * m + 2 * n;
                cdiv(co, pm) * cdiv(h, m) * cdiv(w, m) * (cdiv(ci, pn) * step + transforms)
            } else {
                // No Winograd gain: direct convolution on the pm x pn array.
                cdiv(co, pm) * cdiv(ci, pn) * h * w * kk
            }
        }
    }
}

/// Seconds to run `layer` on `design`.
pub fn layer_latency(design: &AcceleratorDesign, layer: &ConvLayer) -> f64 {
    layer_cycles(design, layer) as f64 / design.freq
}

/// Cycle matrix and normalized performance scores of a design set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignProfile {
    /// `cycles[d][l]`.
    pub cycles: Vec<Vec<u64>>,
    /// Sum over layers of the best design's cycles divided by this design's
    /// total cycles; in (0, 1].
    pub scores: Vec<f64>,
}

pub fn profile_designs(designs: &[AcceleratorDesign], workload: &Workload) -> DesignProfile {
    let cycles: Vec<Vec<u64>> = designs
        .iter()
        .map(|d| workload.layers.iter().map(|l| layer_cycles(d, l)).collect())
        .collect();
    let best: u64 = (0..workload.len())
        .map(|l| cycles.iter().map(|row| row[l]).min().unwrap_or(0))
        .sum();
    let scores = cycles
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                1.0
            } else {
                best as f64 / total as f64
            }
        })
        .collect();
    DesignProfile { cycles, scores }
}

/// On-disk design document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: String,
    pub freq: Quantity,
    pub n_pe: u32,
    pub params: BTreeMap<String, u32>,
}

impl DesignDoc {
    pub fn into_design(self) -> Result<AcceleratorDesign> {
        let field = |name: &str| -> Result<u32> {
            self.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::parse(format!("{}.params.{name}", self.id), "missing parameter"))
        };
        let kind = match self.kind.to_ascii_lowercase().as_str() {
            "tiled" => DesignKind::Tiled {
                tm: field("tm")?,
                tn: field("tn")?,
                tr: field("tr")?,
                tc: field("tc")?,
            },
            "systolic" => DesignKind::Systolic {
                row: field("row")?,
                col: field("col")?,
                vec: field("vec")?,
            },
            "winograd" => DesignKind::Winograd {
                n: field("n")?,
                pn: field("pn")?,
                pm: field("pm")?,
            },
            other => {
                return Err(Error::parse(
                    format!("{}.kind", self.id),
                    format!("unknown kind `{other}` (expected tiled, systolic or winograd)"),
                ))
            }
        };
        let d = AcceleratorDesign {
            label: self.label.clone().unwrap_or_else(|| self.id.clone()),
            freq: units::parse_frequency(&format!("{}.freq", self.id), &self.freq)?,
            n_pe: self.n_pe,
            id: self.id,
            kind,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn from_design(d: &AcceleratorDesign) -> Self {
        DesignDoc {
            id: d.id.clone(),
            label: Some(d.label.clone()),
            kind: d.kind.name().to_string(),
            freq: Quantity::Text(format!("{}MHz", d.freq / 1e6)),
            n_pe: d.n_pe,
            params: d.kind.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

/// Parses a JSON list of design documents.
pub fn load_designs(source: &str) -> Result<Vec<AcceleratorDesign>> {
    let docs: Vec<DesignDoc> = serde_json::from_str(source).map_err(|e| Error::parse("designs", e.to_string()))?;
    if docs.is_empty() {
        return Err(Error::Validation("design list is empty".into()));
    }
    let designs: Vec<AcceleratorDesign> = docs.into_iter().map(DesignDoc::into_design).collect::<Result<_>>()?;
    for (i, d) in designs.iter().enumerate() {
        if designs[..i].iter().any(|e| e.id == d.id) {
            return Err(Error::Validation(format!("duplicate design id `{}`", d.id)));
        }
    }
    Ok(designs)
}
