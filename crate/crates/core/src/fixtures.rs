//! Deterministic synthetic images used by the test suites and the CLI's
//! `synth` command.

use crate::features::{ImageTensor, Rect};
use crate::rng::UniformStream;

const BACKGROUND: [f64; 3] = [0.4, 0.5, 0.6];
const PATCH: usize = 8;

fn texture_patch(seed: u64) -> Vec<[f64; 3]> {
    let mut rng = UniformStream::new(seed);
    (0..PATCH * PATCH)
        .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
        .collect()
}

fn paint_patch(img: &mut ImageTensor, at: Rect, patch: &[[f64; 3]]) {
    for dy in 0..at.height {
        for dx in 0..at.width {
            let px = patch[dy * at.width + dx];
            for (c, v) in px.iter().enumerate() {
                img.set(c, at.y + dy, at.x + dx, *v);
            }
        }
    }
}

/// Two copies of one 8x8 random texture on a constant 64x64 background,
/// far enough apart and from the border for the default network.
pub fn twin_patch_image() -> (ImageTensor, Rect, Rect) {
    let mut img = ImageTensor::filled(64, 64, &BACKGROUND).expect("valid fixture");
    let a = Rect::new(10, 12, PATCH, PATCH);
    let b = Rect::new(42, 38, PATCH, PATCH);
    let patch = texture_patch(0x5eed);
    paint_patch(&mut img, a, &patch);
    paint_patch(&mut img, b, &patch);
    (img, a, b)
}

/// Two different 8x8 textures on the same background; swapping them
/// exercises the full forward pass without changing the pixel multiset.
pub fn distinct_patch_image() -> (ImageTensor, Rect, Rect) {
    let mut img = ImageTensor::filled(64, 64, &BACKGROUND).expect("valid fixture");
    let a = Rect::new(10, 12, PATCH, PATCH);
    let b = Rect::new(42, 38, PATCH, PATCH);
    paint_patch(&mut img, a, &texture_patch(1));
    paint_patch(&mut img, b, &texture_patch(2));
    (img, a, b)
}

/// Like [`distinct_patch_image`] but with a stray pixel two columns right of
/// region `a`, inside the margin the default network needs.
pub fn margin_violating_image() -> (ImageTensor, Rect, Rect) {
    let (mut img, a, b) = distinct_patch_image();
    for c in 0..3 {
        img.set(c, a.y + 3, a.x + a.width + 1, 1.0);
    }
    (img, a, b)
}

/// Labels produced by [`synthetic_corpus`].
pub const CORPUS_LABELS: [&str; 3] = ["checks", "speckle", "stripes"];

/// Small textured images, `per_label` for each of [`CORPUS_LABELS`].
///
/// Each label is one texture family (checkerboards, speckle noise,
/// diagonal stripes) with a characteristic palette; individual images vary
/// phase, period and noise.
pub fn synthetic_corpus(
    per_label: usize,
    side: usize,
    seed: u64,
) -> Vec<(String, Vec<ImageTensor>)> {
    let mut rng = UniformStream::new(seed);
    CORPUS_LABELS
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let images = (0..per_label)
                .map(|_| corpus_image(k, side, &mut rng))
                .collect();
            (label.to_string(), images)
        })
        .collect()
}

fn corpus_image(family: usize, side: usize, rng: &mut UniformStream) -> ImageTensor {
    let palettes = [
        ([0.9, 0.85, 0.2], [0.1, 0.15, 0.5]),
        ([0.7, 0.3, 0.3], [0.2, 0.6, 0.4]),
        ([0.95, 0.95, 0.95], [0.05, 0.1, 0.1]),
    ];
    let (fg, bg) = palettes[family];
    let period = 2 + (rng.next_f64() * 3.0) as usize;
    let phase = (rng.next_f64() * period as f64) as usize;
    let noise = 0.05 + 0.05 * rng.next_f64();
    let plane = side * side;
    let mut values = vec![0.0; 3 * plane];
    for y in 0..side {
        for x in 0..side {
            let on = match family {
                0 => ((x + phase) / period + y / period).is_multiple_of(2),
                1 => rng.next_f64() < 0.3,
                _ => (x + y + phase) % (2 * period) < period,
            };
            let base = if on { fg } else { bg };
            for c in 0..3 {
                let jitter = (rng.next_f64() - 0.5) * 2.0 * noise;
                values[c * plane + y * side + x] = (base[c] + jitter).clamp(0.0, 1.0);
            }
        }
    }
    ImageTensor::new(side, side, 3, values).expect("valid corpus image")
}
