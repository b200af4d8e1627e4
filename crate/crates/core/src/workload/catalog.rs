//! Built-in benchmark models.
//!
//! Conv shapes follow the standard published architecture definitions
//! (torchvision layouts: stride on the 3x3 conv of a bottleneck). ResNet
//! projection shortcuts are folded away, which makes the conv counts
//! 33 / 100 / 49 for ResNet34 / ResNet101 / WRN-50-2.

use serde::Serialize;

use super::{ConvLayer, Workload};
use crate::error::{Error, Result};

pub const MODEL_NAMES: [&str; 5] = ["alexnet", "vgg16", "resnet34", "resnet101", "wrn-50-2"];

/// An operator that is not part of the conv workload but belongs to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FoldedOp {
    /// Fully connected layer with bias.
    Linear { inputs: u64, outputs: u64 },
    /// 1x1 projection shortcut convolution (no bias).
    Projection { c_out: u64, c_in: u64, h: u64, w: u64 },
    /// Learned scale and shift of a batch-norm layer.
    BatchNorm { channels: u64 },
    /// Bias vector of a convolution.
    ConvBias { channels: u64 },
}

impl FoldedOp {
    pub fn params(&self) -> u64 {
        match *self {
            FoldedOp::Linear { inputs, outputs } => inputs * outputs + outputs,
            FoldedOp::Projection { c_out, c_in, .. } => c_out * c_in,
            FoldedOp::BatchNorm { channels } => 2 * channels,
            FoldedOp::ConvBias { channels } => channels,
        }
    }

    pub fn macs(&self) -> u64 {
        match *self {
            FoldedOp::Linear { inputs, outputs } => inputs * outputs,
            FoldedOp::Projection { c_out, c_in, h, w } => c_out * c_in * h * w,
            FoldedOp::BatchNorm { .. } | FoldedOp::ConvBias { .. } => 0,
        }
    }
}

/// A catalog model: its conv workload plus the folded operators.
#[derive(Debug, Clone)]
pub struct ModelCard {
    pub workload: Workload,
    pub folded: Vec<FoldedOp>,
}

impl ModelCard {
    pub fn parameter_count(&self) -> u64 {
        self.workload.total_weight_elems() + self.folded.iter().map(FoldedOp::params).sum::<u64>()
    }

    /// Multiply-accumulate count of the whole model (convs plus folded ops).
    pub fn mac_count(&self) -> u64 {
        self.workload.total_macs() + self.folded.iter().map(FoldedOp::macs).sum::<u64>()
    }
}

/// Returns the conv workload of a built-in model.
pub fn catalog(model_name: &str) -> Result<Workload> {
    model_card(model_name).map(|c| c.workload)
}

pub fn model_card(model_name: &str) -> Result<ModelCard> {
    let key = model_name.trim().to_ascii_lowercase();
    let (layers, folded) = match key.as_str() {
        "alexnet" => alexnet(),
        "vgg16" => vgg16(),
        "resnet34" => resnet_basic(&[3, 4, 6, 3]),
        "resnet101" => resnet_bottleneck(&[3, 4, 23, 3], 1),
        "wrn-50-2" | "wrn50-2" | "wide_resnet50_2" => resnet_bottleneck(&[3, 4, 6, 3], 2),
        _ => {
            return Err(Error::UnknownModel {
                name: model_name.to_string(),
                available: MODEL_NAMES.join(", "),
            })
        }
    };
    let canonical = if key.starts_with("wrn") || key.starts_with("wide") {
        "wrn-50-2"
    } else {
        key.as_str()
    };
    Ok(ModelCard {
        workload: Workload::new(canonical, layers)?,
        folded,
    })
}

fn with_biases(layers: &[ConvLayer]) -> Vec<FoldedOp> {
    layers
        .iter()
        .map(|l| FoldedOp::ConvBias {
            channels: l.c_out as u64,
        })
        .collect()
}

fn alexnet() -> (Vec<ConvLayer>, Vec<FoldedOp>) {
    let layers = vec![
        ConvLayer::square(64, 3, 55, 11, 4),
        ConvLayer::square(192, 64, 27, 5, 1),
        ConvLayer::square(384, 192, 13, 3, 1),
        ConvLayer::square(256, 384, 13, 3, 1),
        ConvLayer::square(256, 256, 13, 3, 1),
    ];
    let mut folded = with_biases(&layers);
    folded.extend([
        FoldedOp::Linear { inputs: 256 * 6 * 6, outputs: 4096 },
        FoldedOp::Linear { inputs: 4096, outputs: 4096 },
        FoldedOp::Linear { inputs: 4096, outputs: 1000 },
    ]);
    (layers, folded)
}

fn vgg16() -> (Vec<ConvLayer>, Vec<FoldedOp>) {
    let plan: [(u32, u32, u32); 13] = [
        (64, 3, 224),
        (64, 64, 224),
        (128, 64, 112),
        (128, 128, 112),
        (256, 128, 56),
        (256, 256, 56),
        (256, 256, 56),
        (512, 256, 28),
        (512, 512, 28),
        (512, 512, 28),
        (512, 512, 14),
        (512, 512, 14),
        (512, 512, 14),
    ];
    let layers: Vec<ConvLayer> = plan
        .iter()
        .map(|&(c_out, c_in, hw)| ConvLayer::square(c_out, c_in, hw, 3, 1))
        .collect();
    let mut folded = with_biases(&layers);
    folded.extend([
        FoldedOp::Linear { inputs: 512 * 7 * 7, outputs: 4096 },
        FoldedOp::Linear { inputs: 4096, outputs: 4096 },
        FoldedOp::Linear { inputs: 4096, outputs: 1000 },
    ]);
    (layers, folded)
}

fn stem(layers: &mut Vec<ConvLayer>, folded: &mut Vec<FoldedOp>) {
    layers.push(ConvLayer::square(64, 3, 112, 7, 2));
    folded.push(FoldedOp::BatchNorm { channels: 64 });
}

fn projection(folded: &mut Vec<FoldedOp>, c_out: u32, c_in: u32, hw: u32) {
    folded.push(FoldedOp::Projection {
        c_out: c_out as u64,
        c_in: c_in as u64,
        h: hw as u64,
        w: hw as u64,
    });
    folded.push(FoldedOp::BatchNorm { channels: c_out as u64 });
}

fn resnet_basic(blocks: &[u32; 4]) -> (Vec<ConvLayer>, Vec<FoldedOp>) {
    let mut layers = Vec::new();
    let mut folded = Vec::new();
    stem(&mut layers, &mut folded);
    let mut c_in = 64;
    let mut hw = 56;
    for (stage, (&n, width)) in blocks.iter().zip([64u32, 128, 256, 512]).enumerate() {
        for b in 0..n {
            let stride = if b == 0 && stage > 0 { 2 } else { 1 };
            if stride == 2 {
                hw /= 2;
            }
            layers.push(ConvLayer::square(width, c_in, hw, 3, stride));
            layers.push(ConvLayer::square(width, width, hw, 3, 1));
            folded.push(FoldedOp::BatchNorm { channels: width as u64 });
            folded.push(FoldedOp::BatchNorm { channels: width as u64 });
            if stride != 1 || c_in != width {
                projection(&mut folded, width, c_in, hw);
            }
            c_in = width;
        }
    }
    folded.push(FoldedOp::Linear { inputs: 512, outputs: 1000 });
    (layers, folded)
}

fn resnet_bottleneck(blocks: &[u32; 4], width_mult: u32) -> (Vec<ConvLayer>, Vec<FoldedOp>) {
    let mut layers = Vec::new();
    let mut folded = Vec::new();
    stem(&mut layers, &mut folded);
    let mut c_in = 64;
    let mut hw = 56;
    for (stage, &n) in blocks.iter().enumerate() {
        let planes = 64u32 << stage;
        let width = planes * width_mult;
        let out = planes * 4;
        for b in 0..n {
            let stride = if b == 0 && stage > 0 { 2 } else { 1 };
            layers.push(ConvLayer::square(width, c_in, hw, 1, 1));
            if stride == 2 {
                hw /= 2;
            }
            layers.push(ConvLayer::square(width, width, hw, 3, stride));
            layers.push(ConvLayer::square(out, width, hw, 1, 1));
            folded.push(FoldedOp::BatchNorm { channels: width as u64 });
            folded.push(FoldedOp::BatchNorm { channels: width as u64 });
            folded.push(FoldedOp::BatchNorm { channels: out as u64 });
            if b == 0 {
                projection(&mut folded, out, c_in, hw);
            }
            c_in = out;
        }
    }
    folded.push(FoldedOp::Linear { inputs: 2048, outputs: 1000 });
    (layers, folded)
}
