//! DNN inference workloads as topologically ordered convolution layers.
//!
//! Only convolutions are modeled. Pooling, activations, normalization and
//! the classifier head are folded away; the catalog keeps a record of what
//! was folded so parameter and operation totals of the full model can still
//! be reported.

pub mod catalog;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One convolution layer, described by its output-centric loop bounds.
///
/// `h` and `w` are output spatial dims. The input spatial extent is
/// `h * stride` by `w * stride` (same padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvLayer {
    pub index: usize,
    pub c_out: u32,
    pub c_in: u32,
    pub h: u32,
    pub w: u32,
    pub k_h: u32,
    pub k_w: u32,
    pub stride: u32,
}

impl ConvLayer {
    pub fn new(c_out: u32, c_in: u32, h: u32, w: u32, k_h: u32, k_w: u32, stride: u32) -> Self {
        ConvLayer {
            index: 0,
            c_out,
            c_in,
            h,
            w,
            k_h,
            k_w,
            stride,
        }
    }

    /// Square kernel, square feature map.
    pub fn square(c_out: u32, c_in: u32, hw: u32, k: u32, stride: u32) -> Self {
        Self::new(c_out, c_in, hw, hw, k, k, stride)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c_out", self.c_out),
            ("c_in", self.c_in),
            ("h", self.h),
            ("w", self.w),
            ("k_h", self.k_h),
            ("k_w", self.k_w),
            ("stride", self.stride),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Validation(format!(
                    "layer {}: `{name}` must be at least 1",
                    self.index
                )));
            }
        }
        Ok(())
    }

    pub fn macs(&self) -> u64 {
        self.c_out as u64
            * self.c_in as u64
            * self.h as u64
            * self.w as u64
            * self.k_h as u64
            * self.k_w as u64
    }

    pub fn flops(&self) -> u64 {
        2 * self.macs()
    }

    pub fn weight_elems(&self) -> u64 {
        self.c_out as u64 * self.c_in as u64 * self.k_h as u64 * self.k_w as u64
    }

    pub fn input_elems(&self) -> u64 {
        self.c_in as u64 * (self.h * self.stride) as u64 * (self.w * self.stride) as u64
    }

    pub fn output_elems(&self) -> u64 {
        self.c_out as u64 * self.h as u64 * self.w as u64
    }
}

/// Floating-point operation count of a layer: two per multiply-accumulate.
pub fn layer_flops(layer: &ConvLayer) -> u64 {
    layer.flops()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub layers: Vec<ConvLayer>,
}

impl Workload {
    /// Builds a workload, renumbering layers by position.
    pub fn new(name: impl Into<String>, layers: Vec<ConvLayer>) -> Result<Self> {
        let layers: Vec<ConvLayer> = layers
            .into_iter()
            .enumerate()
            .map(|(index, l)| ConvLayer { index, ..l })
            .collect();
        let w = Workload {
            name: name.into(),
            layers,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Validation("workload name is empty".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Validation(format!("workload `{}` has no layers", self.name)));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.index != i {
                return Err(Error::Validation(format!(
                    "layer at position {i} carries index {}",
                    l.index
                )));
            }
            l.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn total_flops(&self) -> u64 {
        self.layers.iter().map(ConvLayer::flops).sum()
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(ConvLayer::macs).sum()
    }

    pub fn total_weight_elems(&self) -> u64 {
        self.layers.iter().map(ConvLayer::weight_elems).sum()
    }

    pub fn to_document(&self) -> WorkloadDoc {
        WorkloadDoc {
            name: self.name.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    c_out: Some(l.c_out as i64),
                    c_in: Some(l.c_in as i64),
                    h: Some(l.h as i64),
                    w: Some(l.w as i64),
                    k: None,
                    k_h: Some(l.k_h as i64),
                    k_w: Some(l.k_w as i64),
                    stride: Some(l.stride as i64),
                })
                .collect(),
        }
    }

    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("workload serializes")
    }
}

/// On-disk workload document. `k` is shorthand for a square kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadDoc {
    pub name: String,
    pub layers: Vec<LayerDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_out: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_in: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_h: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_w: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stride: Option<i64>,
}

impl WorkloadDoc {
    pub fn into_workload(self) -> Result<Workload> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, doc) in self.layers.into_iter().enumerate() {
            let req = |name: &str, v: Option<i64>| -> Result<i64> {
                v.ok_or_else(|| Error::parse(format!("layers[{i}].{name}"), "missing field"))
            };
            let k_h = match (doc.k_h, doc.k) {
                (Some(v), _) | (None, Some(v)) => v,
                (None, None) => return Err(Error::parse(format!("layers[{i}].k_h"), "missing field (or `k`)")),
            };
            let k_w = match (doc.k_w, doc.k) {
                (Some(v), _) | (None, Some(v)) => v,
                (None, None) => return Err(Error::parse(format!("layers[{i}].k_w"), "missing field (or `k`)")),
            };
            let fields = [
                ("c_out", req("c_out", doc.c_out)?),
                ("c_in", req("c_in", doc.c_in)?),
                ("h", req("h", doc.h)?),
                ("w", req("w", doc.w)?),
                ("k_h", k_h),
                ("k_w", k_w),
                ("stride", doc.stride.unwrap_or(1)),
            ];
            let mut vals = [0u32; 7];
            for (slot, (name, v)) in vals.iter_mut().zip(fields) {
                if v < 1 {
                    return Err(Error::Validation(format!(
                        "layers[{i}].{name} must be at least 1, got {v}"
                    )));
                }
                *slot = u32::try_from(v).map_err(|_| {
                    Error::parse(format!("layers[{i}].{name}"), format!("{v} is out of range"))
                })?;
            }
            let [c_out, c_in, h, w, k_h, k_w, stride] = vals;
            layers.push(ConvLayer::new(c_out, c_in, h, w, k_h, k_w, stride));
        }
        Workload::new(self.name, layers)
    }
}

/// Parses and validates a workload document.
pub fn load_workload(source: &str) -> Result<Workload> {
    let doc: WorkloadDoc = serde_json::from_str(source).map_err(|e| Error::parse("workload", e.to_string()))?;
    doc.into_workload()
}
