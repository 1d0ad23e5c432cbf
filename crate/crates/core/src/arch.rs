//! MobileNetV2-SSD architecture graphs and analytic cost counting.
//!
//! A graph is a flat, channel-consistent sequence of convolution layers
//! (backbone followed by the SSD extra feature layers) plus a detection head
//! that taps a subset of those layers. Nothing here holds weights; the graph
//! exists only so parameter and multiply-accumulate counts can be derived
//! exactly for a given width multiplier and input resolution.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resolution the width/resolution multipliers are relative to.
pub const REFERENCE_RESOLUTION: u32 = 224;

/// Smallest input side that still leaves a 1×1 map at the backbone's output stride.
pub const MIN_RESOLUTION: u32 = 32;

/// Channel counts are rounded to multiples of this.
pub const CHANNEL_DIVISOR: u32 = 8;

pub const DEFAULT_NUM_CLASSES: u32 = 21;

pub const DEFAULT_ANCHORS: [u32; 6] = [3, 6, 6, 6, 6, 6];

const STEM_CHANNELS: u32 = 32;
const LAST_CHANNELS: u32 = 1280;

/// Inverted-residual stages as (expansion t, output channels c, repeats n, first stride s).
const INVERTED_RESIDUAL_STAGES: [(u32, u32, usize, u32); 7] = [
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
];

/// SSD extra feature layers as (1×1 bottleneck channels, output channels).
const EXTRA_LAYERS: [(u32, u32); 4] = [(256, 512), (128, 256), (128, 256), (64, 128)];

/// Output channels of the stage whose last block feeds the stride-16 head source.
const STRIDE16_SOURCE_CHANNELS: u32 = 96;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchError {
    #[error("width multiplier must be finite and > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("input resolution {resolution} too small: feature maps need resolution >= {min}")]
    ResolutionTooSmall { resolution: u32, min: u32 },
    #[error("num_classes must be >= 1")]
    NoClasses,
    #[error("head needs one anchor count per feature source ({sources} sources, {anchors} anchor counts)")]
    AnchorMismatch { sources: usize, anchors: usize },
    #[error("anchor counts must be >= 1")]
    ZeroAnchors,
}

/// A candidate design point: width multiplier and absolute input resolution.
///
/// The resolution multiplier is derived (`resolution / 224`), never stored.
/// Equality, hashing and ordering use the exact bit pattern of `alpha`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "RawTheta")]
pub struct Theta {
    alpha: f64,
    resolution: u32,
}

#[derive(Deserialize)]
struct RawTheta {
    alpha: f64,
    resolution: u32,
}

impl TryFrom<RawTheta> for Theta {
    type Error = ArchError;

    fn try_from(raw: RawTheta) -> Result<Self, Self::Error> {
        Theta::new(raw.alpha, raw.resolution)
    }
}

impl Theta {
    pub fn new(alpha: f64, resolution: u32) -> Result<Self, ArchError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ArchError::InvalidAlpha(alpha));
        }
        if resolution < MIN_RESOLUTION {
            return Err(ArchError::ResolutionTooSmall { resolution, min: MIN_RESOLUTION });
        }
        Ok(Self { alpha, resolution })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Resolution multiplier relative to 224.
    pub fn rho(&self) -> f64 {
        f64::from(self.resolution) / f64::from(REFERENCE_RESOLUTION)
    }
}

impl PartialEq for Theta {
    fn eq(&self, other: &Self) -> bool {
        self.alpha.to_bits() == other.alpha.to_bits() && self.resolution == other.resolution
    }
}

impl Eq for Theta {}

impl Hash for Theta {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.alpha.to_bits().hash(state);
        self.resolution.hash(state);
    }
}

impl PartialOrd for Theta {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Theta {
    fn cmp(&self, other: &Self) -> Ordering {
        self.alpha
            .total_cmp(&other.alpha)
            .then(self.resolution.cmp(&other.resolution))
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={} resolution={}", self.alpha, self.resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    StandardConv,
    DepthwiseSeparableConv,
    InvertedResidual,
}

/// One convolution layer (or block) of the graph.
///
/// For `depthwise_separable_conv` the bias/batch-norm flags apply to both the
/// depthwise and the pointwise half. An `inverted_residual` block always has
/// batch norm after each of its convolutions and skips the expansion conv
/// when `expansion == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: u32,
    pub in_channels: u32,
    pub out_channels: u32,
    pub stride: u32,
    pub expansion: u32,
    pub has_batchnorm: bool,
    pub has_bias: bool,
}

impl LayerSpec {
    pub fn standard(kernel: u32, in_channels: u32, out_channels: u32, stride: u32) -> Self {
        Self {
            kind: LayerKind::StandardConv,
            kernel,
            in_channels,
            out_channels,
            stride,
            expansion: 1,
            has_batchnorm: true,
            has_bias: false,
        }
    }

    pub fn separable(kernel: u32, in_channels: u32, out_channels: u32, stride: u32) -> Self {
        Self { kind: LayerKind::DepthwiseSeparableConv, ..Self::standard(kernel, in_channels, out_channels, stride) }
    }

    pub fn inverted_residual(expansion: u32, in_channels: u32, out_channels: u32, stride: u32) -> Self {
        Self {
            kind: LayerKind::InvertedResidual,
            expansion,
            ..Self::standard(3, in_channels, out_channels, stride)
        }
    }

    /// Swap batch norm for a plain bias (prediction convs).
    pub fn with_bias(self) -> Self {
        Self { has_batchnorm: false, has_bias: true, ..self }
    }

    pub fn without_norm(self) -> Self {
        Self { has_batchnorm: false, has_bias: false, ..self }
    }

    /// Output side length for an input side, same padding.
    pub fn output_side(&self, input_side: u32) -> u32 {
        input_side.div_ceil(self.stride)
    }

    /// Trainable parameters. Batch-norm contributes scale and shift only.
    pub fn params(&self) -> u64 {
        let k2 = u64::from(self.kernel) * u64::from(self.kernel);
        let cin = u64::from(self.in_channels);
        let cout = u64::from(self.out_channels);
        let extra = |c: u64| -> u64 {
            let mut n = 0;
            if self.has_bias {
                n += c;
            }
            if self.has_batchnorm {
                n += 2 * c;
            }
            n
        };
        match self.kind {
            LayerKind::StandardConv => k2 * cin * cout + extra(cout),
            LayerKind::DepthwiseSeparableConv => k2 * cin + extra(cin) + cin * cout + extra(cout),
            LayerKind::InvertedResidual => {
                let hidden = cin * u64::from(self.expansion);
                let expand = if self.expansion == 1 { 0 } else { cin * hidden + 2 * hidden };
                expand + k2 * hidden + 2 * hidden + hidden * cout + 2 * cout
            }
        }
    }

    /// Multiply-accumulates for one forward pass at the given input side.
    pub fn macs(&self, input_side: u32) -> u64 {
        let k2 = u64::from(self.kernel) * u64::from(self.kernel);
        let cin = u64::from(self.in_channels);
        let cout = u64::from(self.out_channels);
        let in_area = u64::from(input_side) * u64::from(input_side);
        let out_side = u64::from(self.output_side(input_side));
        let out_area = out_side * out_side;
        match self.kind {
            LayerKind::StandardConv => k2 * cin * cout * out_area,
            LayerKind::DepthwiseSeparableConv => (k2 * cin + cin * cout) * out_area,
            LayerKind::InvertedResidual => {
                let hidden = cin * u64::from(self.expansion);
                let expand = if self.expansion == 1 { 0 } else { cin * hidden * in_area };
                expand + (k2 * hidden + hidden * cout) * out_area
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadStyle {
    Ssd,
    #[default]
    Ssdlite,
}

impl std::str::FromStr for HeadStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssd" => Ok(Self::Ssd),
            "ssdlite" => Ok(Self::Ssdlite),
            other => Err(format!("unknown head style {other:?} (expected ssd or ssdlite)")),
        }
    }
}

/// A head tap: the output of `layer` with its spatial side and channel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSource {
    pub layer: usize,
    pub side: u32,
    pub channels: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsdHeadSpec {
    pub feature_sources: Vec<FeatureSource>,
    pub anchors_per_location: Vec<u32>,
    pub head_style: HeadStyle,
}

/// The class and box prediction convs attached to one feature source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Predictor {
    pub source: usize,
    pub side: u32,
    pub class_conv: LayerSpec,
    pub box_conv: LayerSpec,
}

impl SsdHeadSpec {
    /// A head with no feature sources; contributes nothing to counts.
    pub fn empty() -> Self {
        Self { feature_sources: Vec::new(), anchors_per_location: Vec::new(), head_style: HeadStyle::default() }
    }

    /// Per-source predictors producing `num_classes + 1` scores (background
    /// included) and 4 box offsets per anchor.
    pub fn predictors(&self, num_classes: u32) -> Vec<Predictor> {
        self.feature_sources
            .iter()
            .zip(&self.anchors_per_location)
            .map(|(src, &anchors)| {
                let conv = |out: u32| match self.head_style {
                    HeadStyle::Ssd => LayerSpec::standard(3, src.channels, out, 1).with_bias(),
                    HeadStyle::Ssdlite => LayerSpec::separable(3, src.channels, out, 1).with_bias(),
                };
                Predictor {
                    source: src.layer,
                    side: src.side,
                    class_conv: conv(anchors * (num_classes + 1)),
                    box_conv: conv(anchors * 4),
                }
            })
            .collect()
    }
}

/// Layer sequence plus detection head for one design point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchitectureGraph {
    pub theta: Theta,
    pub num_classes: u32,
    pub layers: Vec<LayerSpec>,
    pub head: SsdHeadSpec,
}

/// Round `base_channels * alpha` to a multiple of `divisor`, never below
/// `divisor` and never more than 10% under the unrounded width.
pub fn scale_channels(base_channels: u32, alpha: f64, divisor: u32) -> u32 {
    let v = f64::from(base_channels) * alpha;
    let d = f64::from(divisor);
    let nearest = ((v + d / 2.0) as u64 / u64::from(divisor) * u64::from(divisor)) as u32;
    let mut c = nearest.max(divisor);
    if f64::from(c) < 0.9 * v {
        c += divisor;
    }
    c
}

/// Options for graph construction beyond the design point itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub num_classes: u32,
    pub head_style: HeadStyle,
    pub anchors_per_location: Vec<u32>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            num_classes: DEFAULT_NUM_CLASSES,
            head_style: HeadStyle::default(),
            anchors_per_location: DEFAULT_ANCHORS.to_vec(),
        }
    }
}

impl ArchConfig {
    pub fn new(num_classes: u32, head_style: HeadStyle) -> Self {
        Self { num_classes, head_style, ..Self::default() }
    }

    pub fn build(&self, theta: Theta) -> Result<ArchitectureGraph, ArchError> {
        build_graph_with_anchors(theta, self.num_classes, self.head_style, &self.anchors_per_location)
    }

    /// Parameter count in millions for the full detection network.
    pub fn params_m(&self, theta: Theta) -> Result<f64, ArchError> {
        Ok(count_params(&self.build(theta)?) as f64 / 1e6)
    }
}

pub fn build_graph(theta: Theta, num_classes: u32, head_style: HeadStyle) -> Result<ArchitectureGraph, ArchError> {
    build_graph_with_anchors(theta, num_classes, head_style, &DEFAULT_ANCHORS)
}

/// Build MobileNetV2 + SSD extras + head. Six sources are tapped: the last
/// 96-channel block (stride 16), the final 1×1 conv (stride 32) and the four
/// extra layers. `anchors` must have one entry per source.
pub fn build_graph_with_anchors(
    theta: Theta,
    num_classes: u32,
    head_style: HeadStyle,
    anchors: &[u32],
) -> Result<ArchitectureGraph, ArchError> {
    if theta.resolution() < MIN_RESOLUTION {
        return Err(ArchError::ResolutionTooSmall { resolution: theta.resolution(), min: MIN_RESOLUTION });
    }
    if num_classes == 0 {
        return Err(ArchError::NoClasses);
    }
    let alpha = theta.alpha();
    let scale = |c: u32| scale_channels(c, alpha, CHANNEL_DIVISOR);

    let mut layers = Vec::new();
    let mut sides = Vec::new();
    let mut side = theta.resolution();
    let mut push = |layer: LayerSpec, layers: &mut Vec<LayerSpec>| {
        side = layer.output_side(side);
        sides.push(side);
        layers.push(layer);
    };

    let mut channels = scale(STEM_CHANNELS);
    push(LayerSpec::standard(3, 3, channels, 2), &mut layers);

    let mut stride16_source = None;
    for &(t, c, n, s) in &INVERTED_RESIDUAL_STAGES {
        let out = scale(c);
        for i in 0..n {
            let stride = if i == 0 { s } else { 1 };
            push(LayerSpec::inverted_residual(t, channels, out, stride), &mut layers);
            channels = out;
        }
        if c == STRIDE16_SOURCE_CHANNELS {
            stride16_source = Some(layers.len() - 1);
        }
    }

    let last = if alpha > 1.0 { scale(LAST_CHANNELS) } else { LAST_CHANNELS };
    push(LayerSpec::standard(1, channels, last, 1), &mut layers);
    channels = last;

    let mut source_layers = vec![stride16_source.expect("stage table has a 96-channel stage"), layers.len() - 1];
    for &(mid, out) in &EXTRA_LAYERS {
        let (mid, out) = (scale(mid), scale(out));
        push(LayerSpec::standard(1, channels, mid, 1), &mut layers);
        push(LayerSpec::separable(3, mid, out, 2), &mut layers);
        channels = out;
        source_layers.push(layers.len() - 1);
    }

    if source_layers.len() != anchors.len() {
        return Err(ArchError::AnchorMismatch { sources: source_layers.len(), anchors: anchors.len() });
    }
    if anchors.contains(&0) {
        return Err(ArchError::ZeroAnchors);
    }

    let feature_sources = source_layers
        .into_iter()
        .map(|i| FeatureSource { layer: i, side: sides[i], channels: layers[i].out_channels })
        .collect();

    Ok(ArchitectureGraph {
        theta,
        num_classes,
        layers,
        head: SsdHeadSpec { feature_sources, anchors_per_location: anchors.to_vec(), head_style },
    })
}

/// Exact trainable parameter count of layers plus head predictors.
pub fn count_params(graph: &ArchitectureGraph) -> u64 {
    let body: u64 = graph.layers.iter().map(LayerSpec::params).sum();
    let head: u64 = graph
        .head
        .predictors(graph.num_classes)
        .iter()
        .map(|p| p.class_conv.params() + p.box_conv.params())
        .sum();
    body + head
}

/// Multiply-accumulates for one forward pass at `graph.theta.resolution()`.
pub fn count_macs(graph: &ArchitectureGraph) -> u64 {
    let mut side = graph.theta.resolution();
    let mut total = 0;
    for layer in &graph.layers {
        total += layer.macs(side);
        side = layer.output_side(side);
    }
    for p in graph.head.predictors(graph.num_classes) {
        total += p.class_conv.macs(p.side) + p.box_conv.macs(p.side);
    }
    total
}

impl ArchitectureGraph {
    /// Graph over an arbitrary layer list with no head.
    pub fn from_layers(theta: Theta, num_classes: u32, layers: Vec<LayerSpec>) -> Self {
        Self { theta, num_classes, layers, head: SsdHeadSpec::empty() }
    }

    pub fn is_channel_consistent(&self) -> bool {
        self.layers.windows(2).all(|w| w[0].out_channels == w[1].in_channels)
            && self
                .head
                .feature_sources
                .iter()
                .all(|s| self.layers.get(s.layer).is_some_and(|l| l.out_channels == s.channels))
    }

    /// JSON form written by `count --dump-graph`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha": self.theta.alpha(),
            "resolution": self.theta.resolution(),
            "num_classes": self.num_classes,
            "layers": self.layers,
            "head": {
                "head_style": self.head.head_style,
                "feature_sources": self.head.feature_sources,
                "anchors_per_location": self.head.anchors_per_location,
                "predictors": self.head.predictors(self.num_classes),
            },
            "params": count_params(self),
            "macs": count_macs(self),
        })
    }
}
