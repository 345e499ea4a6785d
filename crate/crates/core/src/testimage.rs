//! Synthetic test images on the 0-255 scale.

use crate::rng::Rng;
use crate::tensor::Tensor3;

/// Grayscale piecewise-constant image: a flat background with a few seeded
/// rectangles and discs at distinct gray levels.
pub fn piecewise_constant(height: usize, width: usize, seed: u64) -> Tensor3 {
    let mut rng = Rng::new(seed);
    let mut img = vec![0.0f32; height * width];
    let background = (40.0 + 40.0 * rng.uniform()) as f32;
    img.fill(background);
    let (hf, wf) = (height as f64, width as f64);
    for shape in 0..6 {
        let level = (20.0 + 215.0 * rng.uniform()).round() as f32;
        let cy = rng.uniform() * hf;
        let cx = rng.uniform() * wf;
        let ry = (0.1 + 0.25 * rng.uniform()) * hf;
        let rx = (0.1 + 0.25 * rng.uniform()) * wf;
        for h in 0..height {
            for w in 0..width {
                let dy = (h as f64 + 0.5 - cy) / ry;
                let dx = (w as f64 + 0.5 - cx) / rx;
                let inside = if shape % 2 == 0 {
                    dy.abs() <= 1.0 && dx.abs() <= 1.0
                } else {
                    dy * dy + dx * dx <= 1.0
                };
                if inside {
                    img[h * width + w] = level;
                }
            }
        }
    }
    Tensor3::from_vec(height, width, 1, img).expect("positive dims")
}
