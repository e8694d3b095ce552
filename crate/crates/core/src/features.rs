//! Deterministic convolutional feature extraction and the style statistics
//! computed from it: AdaIN vectors (per-channel means and standard
//! deviations) and Gram matrices.
//!
//! Both statistics only depend on the multiset of activations at each
//! channel, so any spatial permutation of a feature map leaves them
//! unchanged. [`invariance_check`] uses this to test that swapping two
//! homogeneous image regions does not change the style of an image.

use rayon::prelude::*;

use crate::error::{Result, UstError};
use crate::linalg::SymMatrix;
use crate::model::StyleVector;
use crate::rng::UniformStream;

/// Added to the variance before taking the square root.
pub const ADAIN_EPS: f64 = 1e-5;

/// Multi-channel image with planar (channel, row, column) layout and values
/// in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(UstError::InvalidInput(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| UstError::InvalidInput("image dimensions overflow".into()))?;
        if values.len() != expected {
            return Err(UstError::InvalidInput(format!(
                "image needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(UstError::InvalidInput(format!(
                "image value {v} is outside [0, 1]"
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            values,
        })
    }

    /// A uniformly coloured image.
    pub fn filled(height: usize, width: usize, colour: &[f64]) -> Result<Self> {
        let plane = height * width;
        let values = colour
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c, plane))
            .collect();
        Self::new(height, width, colour.len(), values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        assert!((0.0..=1.0).contains(&v), "pixel value {v} outside [0, 1]");
        self.values[(c * self.height + y) * self.width + x] = v;
    }

    fn as_feature_map(&self) -> FeatureMap {
        FeatureMap {
            layer: 0,
            height: self.height,
            width: self.width,
            channels: self.channels,
            values: self.values.clone(),
        }
    }
}

/// Activations of one layer, planar layout.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    layer: usize,
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        layer: usize,
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(UstError::InvalidInput(format!(
                "feature map dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if values.len() != height * width * channels {
            return Err(UstError::InvalidInput(format!(
                "feature map needs {} values, got {}",
                height * width * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(UstError::InvalidInput(
                "feature map has non-finite values".into(),
            ));
        }
        Ok(FeatureMap {
            layer,
            height,
            width,
            channels,
            values,
        })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.values[c * plane..(c + 1) * plane]
    }

    /// Applies the same spatial permutation to every channel:
    /// `out[p] = in[perm[p]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<FeatureMap> {
        let plane = self.height * self.width;
        let mut seen = vec![false; plane];
        if perm.len() != plane
            || perm
                .iter()
                .any(|&p| p >= plane || std::mem::replace(&mut seen[p], true))
        {
            return Err(UstError::InvalidInput(
                "spatial permutation does not match the feature map".into(),
            ));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.channels {
            let ch = self.channel(c);
            values.extend(perm.iter().map(|&p| ch[p]));
        }
        Ok(self.with_values(values))
    }

    fn with_values(&self, values: Vec<f64>) -> FeatureMap {
        FeatureMap {
            layer: self.layer,
            height: self.height,
            width: self.width,
            channels: self.channels,
            values,
        }
    }
}

/// One convolution: `out_channels` filters of odd `kernel_size`, stride 1,
/// replicate-edge same padding, bias, ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub kernel_size: usize,
}

/// Architecture and weight seed of the toy encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvNetSpec {
    pub input_channels: usize,
    pub layers: Vec<ConvLayerSpec>,
    pub weight_seed: u64,
}

/// Output channels of the default encoder.
pub const DEFAULT_LAYER_CHANNELS: [usize; 3] = [8, 16, 32];

impl ConvNetSpec {
    /// Three 3x3 layers with 8, 16 and 32 channels.
    pub fn default_for(input_channels: usize, weight_seed: u64) -> Self {
        Self::with_channels(input_channels, &DEFAULT_LAYER_CHANNELS, 3, weight_seed)
    }

    pub fn with_channels(
        input_channels: usize,
        channels: &[usize],
        kernel_size: usize,
        weight_seed: u64,
    ) -> Self {
        ConvNetSpec {
            input_channels,
            layers: channels
                .iter()
                .map(|&out_channels| ConvLayerSpec {
                    out_channels,
                    kernel_size,
                })
                .collect(),
            weight_seed,
        }
    }

    /// Length of the AdaIN vector this network produces.
    pub fn adain_dim(&self) -> usize {
        2 * self.layers.iter().map(|l| l.out_channels).sum::<usize>()
    }

    /// Distance from an output activation to the furthest input pixel that
    /// influences it.
    pub fn receptive_radius(&self) -> usize {
        self.layers.iter().map(|l| l.kernel_size / 2).sum()
    }

    /// Width of identical surroundings two swapped regions need so that the
    /// swap permutes activations at every layer.
    ///
    /// Each layer of radius `r` consumes `r` pixels of the ring on both sides
    /// of the growing swapped region, except the last, which only needs to
    /// read `r` pixels: `2 * R - r_last`.
    pub fn homogeneity_margin(&self) -> usize {
        let last = self.layers.last().map_or(0, |l| l.kernel_size / 2);
        2 * self.receptive_radius() - last
    }

    fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.layers.is_empty() {
            return Err(UstError::InvalidInput(
                "network needs input channels and at least one layer".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.out_channels == 0 || l.kernel_size % 2 == 0 {
                return Err(UstError::InvalidInput(format!(
                    "layer {i}: need positive channels and an odd kernel, got {l:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    /// `[out][in][ky][kx]`
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Encoder with weights drawn from the spec's seed.
///
/// Weights and biases are uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
/// drawn layer by layer from one [`UniformStream`]: all weights of a layer in
/// `[out][in][ky][kx]` order, then its biases.
#[derive(Clone, Debug)]
pub struct ConvNet {
    spec: ConvNetSpec,
    layers: Vec<ConvLayer>,
}

impl ConvNet {
    pub fn new(spec: &ConvNetSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = UniformStream::new(spec.weight_seed);
        let mut in_channels = spec.input_channels;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let fan_in = in_channels * l.kernel_size * l.kernel_size;
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..l.out_channels * fan_in)
                .map(|_| rng.next_range(-bound, bound))
                .collect();
            let bias = (0..l.out_channels)
                .map(|_| rng.next_range(-bound, bound))
                .collect();
            layers.push(ConvLayer {
                in_channels,
                out_channels: l.out_channels,
                kernel_size: l.kernel_size,
                weights,
                bias,
            });
            in_channels = l.out_channels;
        }
        Ok(ConvNet {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn spec(&self) -> &ConvNetSpec {
        &self.spec
    }

    /// Runs the image through every layer, returning one map per layer
    /// (layer indices start at 1).
    pub fn forward(&self, img: &ImageTensor) -> Result<Vec<FeatureMap>> {
        if img.channels() != self.spec.input_channels {
            return Err(UstError::InvalidInput(format!(
                "image has {} channels, network expects {}",
                img.channels(),
                self.spec.input_channels
            )));
        }
        let mut current = img.as_feature_map();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.apply(&current, i + 1);
            out.push(current.clone());
        }
        Ok(out)
    }
}

impl ConvLayer {
    fn apply(&self, input: &FeatureMap, layer_index: usize) -> FeatureMap {
        let (h, w) = (input.height, input.width);
        let k = self.kernel_size;
        let r = k / 2;
        let plane = h * w;

        // Replicate-edge padded copy of every input channel.
        let (ph, pw) = (h + 2 * r, w + 2 * r);
        let mut padded = vec![0.0; self.in_channels * ph * pw];
        for c in 0..self.in_channels {
            let src = input.channel(c);
            for py in 0..ph {
                let y = py.saturating_sub(r).min(h - 1);
                for px in 0..pw {
                    let x = px.saturating_sub(r).min(w - 1);
                    padded[(c * ph + py) * pw + px] = src[y * w + x];
                }
            }
        }

        let mut values = vec![0.0; self.out_channels * plane];
        values
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(o, out)| {
                let filt =
                    &self.weights[o * self.in_channels * k * k..(o + 1) * self.in_channels * k * k];
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = self.bias[o];
                        for c in 0..self.in_channels {
                            let base = c * ph * pw;
                            for ky in 0..k {
                                let row = base + (y + ky) * pw + x;
                                let wrow = (c * k + ky) * k;
                                for kx in 0..k {
                                    acc += filt[wrow + kx] * padded[row + kx];
                                }
                            }
                        }
                        out[y * w + x] = acc.max(0.0);
                    }
                }
            });

        FeatureMap {
            layer: layer_index,
            height: h,
            width: w,
            channels: self.out_channels,
            values,
        }
    }
}

/// Runs `img` through the network described by `net`.
pub fn extract_features(img: &ImageTensor, net: &ConvNetSpec) -> Result<Vec<FeatureMap>> {
    ConvNet::new(net)?.forward(img)
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Population mean and variance of one channel.
pub fn channel_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var)
}

/// Per-channel means followed by per-channel `sqrt(var + eps)` for one map.
pub fn channel_stats(map: &FeatureMap) -> (Vec<f64>, Vec<f64>) {
    (0..map.channels)
        .map(|c| {
            let (mean, var) = channel_moments(map.channel(c));
            (mean, (var + ADAIN_EPS).sqrt())
        })
        .unzip()
}

/// Concatenates, layer by layer, all channel means then all channel
/// standard deviations.
pub fn adain_vector(maps: &[FeatureMap]) -> Result<StyleVector> {
    if maps.is_empty() {
        return Err(UstError::InvalidInput("no feature maps".into()));
    }
    let mut out = Vec::with_capacity(2 * maps.iter().map(|m| m.channels).sum::<usize>());
    for m in maps {
        let (means, sigmas) = channel_stats(m);
        out.extend(means);
        out.extend(sigmas);
    }
    StyleVector::new(out)
}

/// Splits an AdaIN vector back into per-layer `(means, sigmas)` for the
/// given channel counts.
pub fn split_adain_vector(vector: &[f64], channels: &[usize]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let expected = 2 * channels.iter().sum::<usize>();
    if vector.len() != expected {
        return Err(UstError::InvalidDimension(format!(
            "AdaIN vector has {} entries, layout needs {expected}",
            vector.len()
        )));
    }
    let mut rest = vector;
    let mut out = Vec::with_capacity(channels.len());
    for &c in channels {
        let (means, tail) = rest.split_at(c);
        let (sigmas, tail) = tail.split_at(c);
        out.push((means.to_vec(), sigmas.to_vec()));
        rest = tail;
    }
    Ok(out)
}

/// Channel Gram matrix `F F^T / (H W)` of a feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub layer: usize,
    pub matrix: SymMatrix,
}

pub fn gram_matrix(map: &FeatureMap) -> GramMatrix {
    let c = map.channels;
    let n = (map.height * map.width) as f64;
    let mut values = vec![0.0; c * c];
    for i in 0..c {
        let fi = map.channel(i);
        for j in i..c {
            let fj = map.channel(j);
            let g = compensated_sum(fi.iter().zip(fj).map(|(a, b)| a * b)) / n;
            values[i * c + j] = g;
            values[j * c + i] = g;
        }
    }
    GramMatrix {
        layer: map.layer,
        matrix: SymMatrix::from_matrix_unchecked(nalgebra::DMatrix::from_row_slice(c, c, &values)),
    }
}

/// Re-normalises each channel of `content` to the target mean and AdaIN
/// standard deviation.
///
/// Targets live in the same space as [`adain_vector`]: a target `sigma`
/// means the output should re-extract to `sqrt(var + eps) = sigma`, so the
/// channel is scaled to raw variance `sigma^2 - eps`. Negative sigmas are
/// clamped to zero. Targets below `sqrt(eps)`, and constant input channels,
/// produce a constant channel at the target mean.
pub fn apply_adain(
    content: &FeatureMap,
    style_means: &[f64],
    style_sigmas: &[f64],
) -> Result<FeatureMap> {
    let c = content.channels;
    if style_means.len() != c || style_sigmas.len() != c {
        return Err(UstError::InvalidInput(format!(
            "content has {c} channels, style has {} means and {} sigmas",
            style_means.len(),
            style_sigmas.len()
        )));
    }
    if style_means
        .iter()
        .chain(style_sigmas)
        .any(|v| !v.is_finite())
    {
        return Err(UstError::InvalidInput(
            "style statistics must be finite".into(),
        ));
    }
    let mut values = Vec::with_capacity(content.values.len());
    for ch in 0..c {
        let src = content.channel(ch);
        let (mean, var) = channel_moments(src);
        let sigma = style_sigmas[ch].max(0.0);
        let target_var = (sigma * sigma - ADAIN_EPS).max(0.0);
        let gain = if var > 0.0 {
            (target_var / var).sqrt()
        } else {
            0.0
        };
        let shift = style_means[ch];
        values.extend(src.iter().map(|x| shift + gain * (x - mean)));
    }
    Ok(content.with_values(values))
}

/// The AdaIN standard deviation [`apply_adain`] can reach for a target
/// sigma on a channel with input variance `input_var`.
pub fn achievable_sigma(target_sigma: f64, input_var: f64) -> f64 {
    let floor = ADAIN_EPS.sqrt();
    if input_var > 0.0 {
        target_sigma.max(floor)
    } else {
        floor
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.width
            && other.x < self.x + self.width
            && self.y < other.y + other.height
            && other.y < self.y + self.height
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.width <= width && self.y + self.height <= height
    }

    /// Grows by `margin` on every side; `None` if that leaves the image.
    fn dilated_within(&self, margin: usize, width: usize, height: usize) -> Option<Rect> {
        let grown = Rect {
            x: self.x.checked_sub(margin)?,
            y: self.y.checked_sub(margin)?,
            width: self.width + 2 * margin,
            height: self.height + 2 * margin,
        };
        grown.fits(width, height).then_some(grown)
    }
}

fn check_regions(img: &ImageTensor, a: &Rect, b: &Rect) -> Result<()> {
    if a.width == 0 || a.height == 0 {
        return Err(UstError::InvalidRegion("regions must be non-empty".into()));
    }
    if (a.width, a.height) != (b.width, b.height) {
        return Err(UstError::InvalidRegion(format!(
            "regions differ in size: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    for r in [a, b] {
        if !r.fits(img.width, img.height) {
            return Err(UstError::InvalidRegion(format!(
                "{r:?} is outside the {}x{} image",
                img.width, img.height
            )));
        }
    }
    if a.intersects(b) {
        return Err(UstError::InvalidRegion(format!("{a:?} overlaps {b:?}")));
    }
    Ok(())
}

/// Exchanges the pixels of two equally sized, disjoint rectangles.
pub fn swap_regions(img: &ImageTensor, a: Rect, b: Rect) -> Result<ImageTensor> {
    check_regions(img, &a, &b)?;
    let mut out = img.clone();
    for c in 0..img.channels {
        for dy in 0..a.height {
            for dx in 0..a.width {
                let pa = img.get(c, a.y + dy, a.x + dx);
                let pb = img.get(c, b.y + dy, b.x + dx);
                out.set(c, a.y + dy, a.x + dx, pb);
                out.set(c, b.y + dy, b.x + dx, pa);
            }
        }
    }
    Ok(out)
}

/// Whether the surroundings of two regions allow a style-preserving swap:
/// both regions grown by `margin` stay inside the image and apart, and the
/// ring of width `margin` around each holds the same pixels.
pub fn regions_homogeneous(img: &ImageTensor, a: &Rect, b: &Rect, margin: usize) -> bool {
    let (Some(ga), Some(gb)) = (
        a.dilated_within(margin, img.width, img.height),
        b.dilated_within(margin, img.width, img.height),
    ) else {
        return false;
    };
    if ga.intersects(&gb) {
        return false;
    }
    for c in 0..img.channels {
        for dy in 0..ga.height {
            for dx in 0..ga.width {
                let inside =
                    dy >= margin && dy < margin + a.height && dx >= margin && dx < margin + a.width;
                if inside {
                    continue;
                }
                if img.get(c, ga.y + dy, ga.x + dx) != img.get(c, gb.y + dy, gb.x + dx) {
                    return false;
                }
            }
        }
    }
    true
}

/// Largest style-statistic changes at one layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerDeviation {
    pub layer: usize,
    pub adain: f64,
    pub gram: f64,
}

/// Outcome of [`invariance_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub layers: Vec<LayerDeviation>,
    /// Whether the homogeneous-surroundings precondition held.
    pub homogeneous: bool,
    pub required_margin: usize,
    pub tol: f64,
}

impl InvarianceReport {
    pub fn max_adain_deviation(&self) -> f64 {
        self.layers.iter().map(|l| l.adain).fold(0.0, f64::max)
    }

    pub fn max_gram_deviation(&self) -> f64 {
        self.layers.iter().map(|l| l.gram).fold(0.0, f64::max)
    }

    pub fn within_tolerance(&self) -> bool {
        self.max_adain_deviation() <= self.tol && self.max_gram_deviation() <= self.tol
    }

    /// False only when the precondition held and the statistics still moved
    /// by more than `tol`.
    pub fn consistent(&self) -> bool {
        !self.homogeneous || self.within_tolerance()
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Swaps two regions and reports how much the AdaIN and Gram statistics
/// move at every layer.
pub fn invariance_check(
    img: &ImageTensor,
    a: Rect,
    b: Rect,
    net: &ConvNetSpec,
    tol: f64,
) -> Result<InvarianceReport> {
    let swapped = swap_regions(img, a, b)?;
    let encoder = ConvNet::new(net)?;
    let before = encoder.forward(img)?;
    let after = encoder.forward(&swapped)?;
    let layers = before
        .iter()
        .zip(&after)
        .map(|(x, y)| {
            let sx = adain_vector(std::slice::from_ref(x))?;
            let sy = adain_vector(std::slice::from_ref(y))?;
            let gx = gram_matrix(x);
            let gy = gram_matrix(y);
            Ok(LayerDeviation {
                layer: x.layer,
                adain: max_abs_diff(sx.as_slice(), sy.as_slice()),
                gram: max_abs_diff(
                    gx.matrix.as_matrix().as_slice(),
                    gy.matrix.as_matrix().as_slice(),
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let required_margin = net.homogeneity_margin();
    Ok(InvarianceReport {
        layers,
        homogeneous: regions_homogeneous(img, &a, &b, required_margin),
        required_margin,
        tol,
    })
}
