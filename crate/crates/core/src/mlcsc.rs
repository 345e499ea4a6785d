//! Multi-layer convolutional sparse coding.
//!
//! Layer indexing runs from the image inward: `D₁` synthesizes the image from
//! `Γ₁`, `D₂` synthesizes `Γ₁` from `Γ₂`, and so on, so
//! `x = D₁Γ₁`, `Γ₁ = D₂Γ₂`, …, `Γ_{L−1} = D_L Γ_L`. Generator code often
//! counts the other way round; everything here uses image-first numbering.

use rand::seq::index;

use crate::dictionary::ConvDictionary;
use crate::error::{CscError, Result};
use crate::rng::Rng;
use crate::sparsify::SparsityRule;
use crate::tensor::Tensor3;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub dictionary: ConvDictionary,
    pub rule: SparsityRule,
}

impl Layer {
    pub fn new(dictionary: ConvDictionary, rule: SparsityRule) -> Self {
        Layer { dictionary, rule }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlCscModel {
    layers: Vec<Layer>,
}

/// Representations produced by a cascade synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutput {
    /// `Γ₁ … Γ_L`; the last entry is the input code.
    pub gammas: Vec<Tensor3>,
    pub image: Tensor3,
}

impl MlCscModel {
    /// Checks that each `Dᵢ` (i ≥ 2) has as many channels as `Dᵢ₋₁` has atoms.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CscError::domain("model needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            let (outer, inner) = (&pair[0].dictionary, &pair[1].dictionary);
            if inner.channels() != outer.atom_count() {
                return Err(CscError::CascadeGeometry {
                    layer: i + 2,
                    reason: format!(
                        "atoms have {} channels but layer {} has {} atoms",
                        inner.channels(),
                        i + 1,
                        outer.atom_count()
                    ),
                });
            }
        }
        for layer in &layers {
            layer.rule.validate()?;
        }
        Ok(MlCscModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn deepest(&self) -> &Layer {
        self.layers.last().expect("non-empty model")
    }

    /// Synthesize from the deepest code, keeping every intermediate.
    pub fn synthesize_all(&self, gamma_deep: &Tensor3) -> Result<CascadeOutput> {
        let mut rev = vec![gamma_deep.clone()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let next = layer
                .dictionary
                .synthesize(rev.last().expect("seeded"))
                .map_err(|e| CscError::CascadeGeometry {
                    layer: idx + 1,
                    reason: e.to_string(),
                })?;
            rev.push(next);
        }
        let image = rev.pop().expect("image");
        rev.reverse();
        Ok(CascadeOutput { gammas: rev, image })
    }

    /// `x = D₁ ⋯ D_L Γ_L`.
    pub fn synthesize_cascade(&self, gamma_deep: &Tensor3) -> Result<Tensor3> {
        Ok(self.synthesize_all(gamma_deep)?.image)
    }

    /// Spatial size of `Γ_L` needed to produce an `out_height × out_width` image.
    pub fn deep_geometry_for_output(&self, out_height: usize, out_width: usize) -> Result<(usize, usize)> {
        let (mut h, mut w) = (out_height, out_width);
        for (idx, layer) in self.layers.iter().enumerate() {
            let geo = layer
                .dictionary
                .geometry_for_output(h, w)
                .map_err(|e| CscError::CascadeGeometry {
                    layer: idx + 1,
                    reason: e.to_string(),
                })?;
            (h, w) = (geo.rep_height, geo.rep_width);
        }
        Ok((h, w))
    }

    /// Flat dictionary equivalent to `D₁ ⋯ D_depth`.
    ///
    /// Atom `k` is the response of the unpadded cascade to a unit impulse in
    /// channel `k` of `Γ_depth`; it has size
    /// `n_eff(i) = n_eff(i−1) + (nᵢ − 1)·s₁⋯sᵢ₋₁`. The effective stride is
    /// `s₁⋯s_depth` and the effective padding `Σ pᵢ·s₁⋯sᵢ₋₁`. Atoms are left
    /// unnormalized.
    ///
    /// `synthesize(D_eff, Γ)` reproduces the cascade exactly when the inner
    /// layers (`i ≥ 2`) have zero padding; with inner padding the cascade
    /// crops intermediate codes and the two differ near the borders.
    pub fn effective_dictionary(&self, depth: usize) -> Result<ConvDictionary> {
        if depth == 0 || depth > self.depth() {
            return Err(CscError::domain(format!(
                "depth must be in 1..={}, got {depth}",
                self.depth()
            )));
        }
        if depth == 1 {
            return Ok(self.layers[0].dictionary.clone());
        }
        let mut size = 0;
        let mut stride = 1;
        let mut padding = 0;
        for layer in &self.layers[..depth] {
            let d = &layer.dictionary;
            size = if size == 0 {
                d.atom_size()
            } else {
                size + (d.atom_size() - 1) * stride
            };
            padding += d.padding() * stride;
            stride *= d.stride();
        }
        let unpadded: Vec<ConvDictionary> = self.layers[..depth]
            .iter()
            .map(|l| {
                let d = &l.dictionary;
                ConvDictionary::new(
                    d.atom_count(),
                    d.atom_size(),
                    d.channels(),
                    d.stride(),
                    0,
                    d.atoms().to_vec(),
                )
            })
            .collect::<Result<_>>()?;
        let m = unpadded[depth - 1].atom_count();
        let c = unpadded[0].channels();
        let mut atoms = Vec::with_capacity(m * size * size * c);
        for k in 0..m {
            let mut signal = Tensor3::zeros(1, 1, m)?;
            signal.set(0, 0, k, 1.0);
            for d in unpadded.iter().rev() {
                signal = d.synthesize(&signal)?;
            }
            debug_assert_eq!(signal.shape(), (size, size, c));
            atoms.extend_from_slice(signal.data());
        }
        ConvDictionary::new(m, size, c, stride, padding, atoms)
    }

    /// Check each `Γᵢ` against its rule and against `Γᵢ = Dᵢ₊₁ Γᵢ₊₁`.
    pub fn validate(&self, gammas: &[Tensor3]) -> Result<ValidationReport> {
        if gammas.len() != self.depth() {
            return Err(CscError::shape(format!(
                "expected {} representations, got {}",
                self.depth(),
                gammas.len()
            )));
        }
        let mut layers = Vec::with_capacity(self.depth());
        for (idx, (layer, gamma)) in self.layers.iter().zip(gammas).enumerate() {
            let nonzeros = gamma.count_nonzero(0.0);
            let max_needle_nnz = gamma
                .needles()
                .map(|n| n.iter().filter(|v| **v != 0.0).count())
                .max()
                .unwrap_or(0);
            let sparsity_ok = match layer.rule {
                SparsityRule::L1Penalty { .. } => None,
                rule => Some(rule.is_satisfied_by(gamma)),
            };
            let consistency = match gammas.get(idx + 1) {
                None => None,
                Some(deeper) => {
                    let next = &self.layers[idx + 1].dictionary;
                    Some(match next.synthesize(deeper) {
                        Ok(synth) if synth.same_shape(gamma) => {
                            let err = synth.sub(gamma)?.norm();
                            let scale = synth.norm().max(gamma.norm()).max(f64::MIN_POSITIVE);
                            err / scale
                        }
                        _ => f64::INFINITY,
                    })
                }
            };
            layers.push(LayerCheck {
                layer: idx + 1,
                rule: layer.rule,
                nonzeros,
                max_needle_nnz,
                l1_mass: gamma.l1_norm(),
                sparsity_ok,
                consistency_residual: consistency,
                consistency_ok: consistency.is_none_or(|r| r <= CONSISTENCY_TOL),
            });
        }
        Ok(ValidationReport { layers })
    }
}

/// Relative tolerance of the `Γᵢ = Dᵢ₊₁ Γᵢ₊₁` check.
pub const CONSISTENCY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: usize,
    pub rule: SparsityRule,
    pub nonzeros: usize,
    pub max_needle_nnz: usize,
    pub l1_mass: f64,
    /// `None` for the ℓ1 rule, which only reports mass.
    pub sparsity_ok: Option<bool>,
    /// Relative residual against the deeper layer; `None` for the deepest.
    pub consistency_residual: Option<f64>,
    pub consistency_ok: bool,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.sparsity_ok.unwrap_or(true) && self.consistency_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub layers: Vec<LayerCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.layers.iter().all(LayerCheck::passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    pub gamma: Tensor3,
    pub support_size: usize,
    pub rng_seed: u64,
}

/// Random sparse code: a uniformly drawn support (global, or exactly `k` per
/// needle) carrying i.i.d. standard Gaussian values.
pub fn sample_sparse(
    height: usize,
    width: usize,
    channels: usize,
    rule: SparsityRule,
    rng: &mut Rng,
) -> Result<SparseSample> {
    let mut gamma = Tensor3::zeros(height, width, channels)?;
    let draw = |rng: &mut Rng| loop {
        let v = rng.gaussian() as f32;
        if v != 0.0 {
            return v;
        }
    };
    let support_size = match rule {
        SparsityRule::L1Penalty { .. } => {
            return Err(CscError::domain("an l1 penalty defines no support budget"))
        }
        SparsityRule::L0Global { k } => {
            let total = gamma.len();
            if k > total {
                return Err(CscError::domain(format!(
                    "budget {k} exceeds the {total} entries of the representation"
                )));
            }
            let mut picks = index::sample(rng, total, k).into_vec();
            picks.sort_unstable();
            let data = gamma.data_mut();
            for i in picks {
                data[i] = draw(rng);
            }
            k
        }
        SparsityRule::L0InfNeedle { k } => {
            if k > channels {
                return Err(CscError::domain(format!(
                    "needle budget {k} exceeds {channels} channels"
                )));
            }
            for needle in gamma.data_mut().chunks_exact_mut(channels) {
                let mut picks = index::sample(rng, channels, k).into_vec();
                picks.sort_unstable();
                for i in picks {
                    needle[i] = draw(rng);
                }
            }
            k * height * width
        }
    };
    Ok(SparseSample {
        gamma,
        support_size,
        rng_seed: rng.seed(),
    })
}
