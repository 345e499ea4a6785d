//! Browser demo: synthesis from a sparse code, the locality contrast between
//! global and per-needle budgets, and denoising with a DCT dictionary.

use csc_core::denoise::{dct_dictionary, denoise, DenoiseConfig, DictionarySource};
use csc_core::io::quantize;
use csc_core::mlcsc::sample_sparse;
use csc_core::sparsify::{project_l0_global, project_l0inf_needle, sparsity_report};
use csc_core::testimage::piecewise_constant;
use csc_core::{ConvDictionary, Rng, SparsityRule, Tensor3};
use wasm_bindgen::prelude::*;

/// One grayscale picture as RGBA bytes, ready for `ImageData`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub label: String,
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<u8>,
}

impl Panel {
    /// Pixels already on the 0-255 scale.
    fn absolute(label: impl Into<String>, t: &Tensor3) -> Panel {
        Panel::from_gray(label, t, |v| quantize(v))
    }

    /// Min-max stretched to 0-255.
    fn stretched(label: impl Into<String>, t: &Tensor3) -> Panel {
        let (lo, hi) = t.min_max();
        let span = hi - lo;
        Panel::from_gray(label, t, |v| {
            if span > 0.0 {
                quantize(255.0 * (v - lo) / span)
            } else {
                128
            }
        })
    }

    fn from_gray(label: impl Into<String>, t: &Tensor3, f: impl Fn(f32) -> u8) -> Panel {
        let mut rgba = Vec::with_capacity(t.height() * t.width() * 4);
        for needle in t.needles() {
            let g = f(needle[0]);
            rgba.extend_from_slice(&[g, g, g, 255]);
        }
        Panel {
            label: label.into(),
            width: t.width(),
            height: t.height(),
            rgba,
        }
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct DemoResult {
    panels: Vec<Panel>,
    summary: String,
}

#[wasm_bindgen]
impl DemoResult {
    pub fn count(&self) -> usize {
        self.panels.len()
    }

    pub fn label(&self, i: usize) -> String {
        self.panels[i].label.clone()
    }

    pub fn width(&self, i: usize) -> usize {
        self.panels[i].width
    }

    pub fn height(&self, i: usize) -> usize {
        self.panels[i].height
    }

    pub fn rgba(&self, i: usize) -> Vec<u8> {
        self.panels[i].rgba.clone()
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

impl DemoResult {
    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }
}

fn rule(needle: bool, k: usize, needles: usize) -> SparsityRule {
    if needle {
        SparsityRule::L0InfNeedle { k }
    } else {
        SparsityRule::L0Global { k: k * needles }
    }
}

/// Sample a sparse code over `size × size` needles and synthesize it with a
/// random 5×5 dictionary. With `needle` unset the same total budget is spread
/// globally.
pub fn synthesize_demo(seed: u64, atoms: usize, k: usize, needle: bool, size: usize) -> Result<DemoResult, String> {
    let mut rng = Rng::new(seed);
    let dict = ConvDictionary::random(atoms, 5, 1, 1, 2, &mut rng).map_err(|e| e.to_string())?;
    let sample = sample_sparse(size, size, atoms, rule(needle, k, size * size), &mut rng)
        .map_err(|e| e.to_string())?;
    let image = dict.synthesize(&sample.gamma).map_err(|e| e.to_string())?;
    let report = sparsity_report(&sample.gamma, 0.0);
    Ok(DemoResult {
        panels: vec![
            Panel::stretched("synthesized image", &image),
            Panel::absolute("nonzeros per needle", &report.heat_map()),
        ],
        summary: format!(
            "{} nonzeros, max per needle {}, {:.1}% dense",
            sample.support_size,
            report.max_needle_nnz,
            100.0 * report.global_nnz_fraction
        ),
    })
}

/// Project one code with a global budget of `k` per needle on average and
/// with a hard per-needle budget `k`; the code's energy sits in a blob.
pub fn locality_demo(seed: u64, k: usize, size: usize, channels: usize) -> Result<DemoResult, String> {
    let mut rng = Rng::new(seed);
    let (cy, cx) = (rng.uniform() * size as f64, rng.uniform() * size as f64);
    let radius = size as f64 / 5.0;
    let noise = Tensor3::random_gaussian(size, size, channels, &mut rng).map_err(|e| e.to_string())?;
    let gamma = Tensor3::from_fn(size, size, channels, |i, j, c| {
        let d2 = (i as f64 - cy).powi(2) + (j as f64 - cx).powi(2);
        let weight = 0.05 + 10.0 * (-d2 / (2.0 * radius * radius)).exp();
        (weight as f32) * noise.get(i, j, c)
    })
    .map_err(|e| e.to_string())?;
    let global = project_l0_global(&gamma, k * size * size);
    let local = project_l0inf_needle(&gamma, k);
    let (rg, rl) = (sparsity_report(&global, 0.0), sparsity_report(&local, 0.0));
    Ok(DemoResult {
        panels: vec![
            Panel::stretched("|code| energy per needle", &needle_energy(&gamma)),
            Panel::absolute("global budget: nonzeros per needle", &rg.heat_map()),
            Panel::absolute("per-needle budget: nonzeros per needle", &rl.heat_map()),
        ],
        summary: format!(
            "max nonzeros in a needle: global {} vs per-needle {} (k = {k})",
            rg.max_needle_nnz, rl.max_needle_nnz
        ),
    })
}

fn needle_energy(t: &Tensor3) -> Tensor3 {
    let values = t
        .needles()
        .map(|n| n.iter().map(|v| v * v).sum::<f32>().sqrt())
        .collect();
    Tensor3::from_vec(t.height(), t.width(), 1, values).expect("finite energies")
}

/// Denoise a synthetic 64×64 image with a 64-atom 8×8 DCT dictionary.
pub fn denoise_demo(seed: u64, sigma: f64, k: usize, iters: usize) -> Result<DemoResult, String> {
    let clean = piecewise_constant(64, 64, seed);
    let cfg = DenoiseConfig {
        sigma,
        ..DenoiseConfig::new(SparsityRule::L0InfNeedle { k }, iters, seed)
    };
    let dict = dct_dictionary(64, 8).map_err(|e| e.to_string())?;
    let run = denoise(&clean, &cfg, &DictionarySource::Fixed(dict)).map_err(|e| e.to_string())?;
    let mut panels = vec![
        Panel::absolute("clean", &clean),
        Panel::absolute(format!("noisy {:.2} dB", run.noisy_psnr), &run.noisy),
    ];
    let mut summary = format!("noisy {:.2} dB", run.noisy_psnr);
    if let Some(b) = &run.best_average {
        panels.push(Panel::absolute(format!("best average {:.2} dB", b.psnr), &b.image));
        summary.push_str(&format!(", best average {:.2} dB at iteration {}", b.psnr, b.iteration));
    }
    if let Some(b) = &run.best_single {
        panels.push(Panel::absolute(format!("best single {:.2} dB", b.psnr), &b.image));
        summary.push_str(&format!(", best single {:.2} dB at iteration {}", b.psnr, b.iteration));
    }
    Ok(DemoResult { panels, summary })
}

#[wasm_bindgen(js_name = synthesize)]
pub fn js_synthesize(seed: u32, atoms: usize, k: usize, needle: bool, size: usize) -> Result<DemoResult, JsError> {
    synthesize_demo(u64::from(seed), atoms, k, needle, size).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = locality)]
pub fn js_locality(seed: u32, k: usize, size: usize, channels: usize) -> Result<DemoResult, JsError> {
    locality_demo(u64::from(seed), k, size, channels).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = denoise)]
pub fn js_denoise(seed: u32, sigma: f64, k: usize, iters: usize) -> Result<DemoResult, JsError> {
    denoise_demo(u64::from(seed), sigma, k, iters).map_err(|e| JsError::new(&e))
}
