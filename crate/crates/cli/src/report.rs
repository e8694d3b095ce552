//! Machine-readable reports written by `adain` and `invariance`.

use serde::Serialize;
use ust_core::features::ADAIN_EPS;
use ust_core::Rect;

#[derive(Debug, Serialize)]
pub struct AdainChannel {
    pub channel: usize,
    pub content_mean: f64,
    pub content_sigma: f64,
    pub target_mean: f64,
    pub target_sigma: f64,
    /// The sigma the re-normalised channel can actually reach: the target,
    /// raised to `sqrt(eps)` when below it or when the channel is constant.
    pub achievable_sigma: f64,
    pub achieved_mean: f64,
    pub achieved_sigma: f64,
}

impl AdainChannel {
    fn deviation(&self) -> f64 {
        (self.achieved_mean - self.target_mean)
            .abs()
            .max((self.achieved_sigma - self.achievable_sigma).abs())
    }

    fn clamped(&self) -> bool {
        self.achievable_sigma != self.target_sigma
    }
}

#[derive(Debug, Serialize)]
pub struct AdainLayer {
    pub layer: usize,
    pub max_deviation: f64,
    pub channels: Vec<AdainChannel>,
}

impl AdainLayer {
    pub fn new(layer: usize, channels: Vec<AdainChannel>) -> Self {
        let max_deviation = channels
            .iter()
            .map(AdainChannel::deviation)
            .fold(0.0, f64::max);
        AdainLayer {
            layer,
            max_deviation,
            channels,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AdainReport {
    pub content: String,
    pub style_source: String,
    pub adain_eps: f64,
    pub tol: f64,
    /// Largest gap between achieved and achievable statistics.
    pub max_deviation: f64,
    pub within_tolerance: bool,
    pub clamped_channels: usize,
    pub layers: Vec<AdainLayer>,
}

impl AdainReport {
    pub fn new(content: String, style_source: String, tol: f64, layers: Vec<AdainLayer>) -> Self {
        let max_deviation = layers.iter().map(|l| l.max_deviation).fold(0.0, f64::max);
        let clamped_channels = layers
            .iter()
            .flat_map(|l| &l.channels)
            .filter(|c| c.clamped())
            .count();
        AdainReport {
            content,
            style_source,
            adain_eps: ADAIN_EPS,
            tol,
            max_deviation,
            within_tolerance: max_deviation <= tol,
            clamped_channels,
            layers,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RectJson {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl From<Rect> for RectJson {
    fn from(r: Rect) -> Self {
        RectJson {
            x: r.x,
            y: r.y,
            width: r.width,
            height: r.height,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InvarianceLayer {
    pub layer: usize,
    pub adain_max_deviation: f64,
    pub gram_max_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct InvarianceSummary {
    pub image: String,
    pub rect_a: RectJson,
    pub rect_b: RectJson,
    pub tol: f64,
    pub required_margin: usize,
    pub homogeneous: bool,
    pub layers: Vec<InvarianceLayer>,
    pub max_adain_deviation: f64,
    pub max_gram_deviation: f64,
    pub within_tolerance: bool,
    /// False only if the regions were homogeneous and the statistics moved.
    pub consistent: bool,
}
