//! Denoising by fitting sparse convolutional codes to a single noisy image.
//!
//! The noisy observation `x₀ = x + n` is explained as `DΓ` under a sparsity
//! rule by running a pursuit on `½‖DΓ − x₀‖²`. Every iterate gives a
//! reconstruction `x̂_t = DΓ_t` ("single") and an exponential moving average
//! `x̄_t = γ·x̄_{t−1} + (1 − γ)·x̂_t` ("average"). Both are scored against the
//! clean image and the best of each is kept.

use std::fmt;

use crate::dictionary::ConvDictionary;
use crate::error::{CscError, Result};
use crate::pursuit::{pursue_with, PursuitConfig, StepSize};
use crate::rng::{streams, Rng};
use crate::sparsify::SparsityRule;
use crate::tensor::{add_awgn, psnr, Tensor3};

pub const DEFAULT_SIGMA: f64 = 25.0;
pub const DEFAULT_EMA_DECAY: f64 = 0.99;

/// Orthonormal 2-D DCT-II atoms on an `n × n` grid, the first `m` in zigzag
/// order. Stride 1, padding `(n − 1) / 2`.
pub fn dct_dictionary(m: usize, n: usize) -> Result<ConvDictionary> {
    if m == 0 || n == 0 {
        return Err(CscError::domain("atom count and size must be positive"));
    }
    if m > n * n {
        return Err(CscError::domain(format!(
            "an {n}x{n} cosine basis has only {} atoms, asked for {m}",
            n * n
        )));
    }
    let basis = |freq: usize, pos: usize| -> f64 {
        let alpha = if freq == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        alpha * (std::f64::consts::PI * (2 * pos + 1) as f64 * freq as f64 / (2 * n) as f64).cos()
    };
    let mut atoms = Vec::with_capacity(m * n * n);
    for (p, q) in zigzag(n).into_iter().take(m) {
        for u in 0..n {
            for v in 0..n {
                atoms.push((basis(p, u) * basis(q, v)) as f32);
            }
        }
    }
    ConvDictionary::new(m, n, 1, 1, (n - 1) / 2, atoms)
}

/// JPEG-style zigzag over an `n × n` frequency grid.
fn zigzag(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    for diag in 0..(2 * n - 1) {
        let lo = diag.saturating_sub(n - 1);
        let hi = diag.min(n - 1);
        let cells: Vec<(usize, usize)> = (lo..=hi).map(|p| (p, diag - p)).collect();
        if diag % 2 == 0 {
            order.extend(cells.into_iter().rev());
        } else {
            order.extend(cells);
        }
    }
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub atoms: usize,
    pub atom_size: usize,
    pub rule: SparsityRule,
    pub epochs: usize,
    /// Per-atom step, scaled by `1/‖Γ_k‖²`.
    pub learn_rate: f64,
    /// Pursuit iterations per epoch (warm-started).
    pub sc_iters: usize,
    pub power_iters: usize,
}

impl LearnConfig {
    pub fn new(atoms: usize, atom_size: usize, rule: SparsityRule) -> Self {
        LearnConfig {
            atoms,
            atom_size,
            rule,
            epochs: 10,
            learn_rate: 0.5,
            sc_iters: 5,
            power_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub dictionary: ConvDictionary,
    /// Objective after each epoch's dictionary update.
    pub epoch_objectives: Vec<f64>,
    pub gamma: Option<Tensor3>,
}

const MAX_HALVINGS: usize = 10;
const EPOCH_SLACK: f64 = 1e-5;

/// Alternating minimization of `½‖DΓ − x₀‖²` (+ ℓ1 penalty) over `Γ` and `D`,
/// from seeded random unit atoms (stride 1, padding `(n − 1) / 2`).
pub fn learn_dictionary(x0: &Tensor3, cfg: &LearnConfig, rng: &mut Rng) -> Result<ConvDictionary> {
    Ok(learn_dictionary_traced(x0, cfg, rng)?.dictionary)
}

pub fn learn_dictionary_traced(x0: &Tensor3, cfg: &LearnConfig, rng: &mut Rng) -> Result<LearnOutcome> {
    if cfg.atoms == 0 || cfg.atom_size == 0 {
        return Err(CscError::domain("atom count and size must be positive"));
    }
    if !(cfg.learn_rate > 0.0 && cfg.learn_rate.is_finite()) {
        return Err(CscError::domain("learn rate must be positive"));
    }
    cfg.rule.validate()?;
    let mut dict = ConvDictionary::random(
        cfg.atoms,
        cfg.atom_size,
        x0.channels(),
        1,
        (cfg.atom_size - 1) / 2,
        rng,
    )?;
    let geo = dict.geometry_for_output(x0.height(), x0.width())?;
    match cfg.rule {
        SparsityRule::L0InfNeedle { k } if k > cfg.atoms => {
            return Err(CscError::domain(format!(
                "needle budget {k} exceeds {} atoms",
                cfg.atoms
            )))
        }
        SparsityRule::L0Global { k } if k > geo.rep_height * geo.rep_width * cfg.atoms => {
            return Err(CscError::domain(format!(
                "budget {k} exceeds the representation capacity"
            )))
        }
        _ => {}
    }
    if cfg.epochs == 0 {
        return Ok(LearnOutcome {
            dictionary: dict,
            epoch_objectives: Vec::new(),
            gamma: None,
        });
    }

    let penalty = |g: &Tensor3| match cfg.rule {
        SparsityRule::L1Penalty { lambda } => lambda * g.l1_norm(),
        _ => 0.0,
    };
    let objective = |d: &ConvDictionary, g: &Tensor3| -> Result<f64> {
        Ok(0.5 * d.synthesize(g)?.sub(x0)?.norm_sq() + penalty(g))
    };

    let mut gamma: Option<Tensor3> = None;
    let mut epoch_objectives = Vec::with_capacity(cfg.epochs);
    let mut refresh = rng.split(streams::ATOM_REFRESH);
    for epoch in 0..cfg.epochs {
        let sc = PursuitConfig {
            max_iters: cfg.sc_iters,
            step: StepSize::Auto,
            rule: cfg.rule,
            objective_tol: 0.0,
            power_iters: cfg.power_iters,
            seed: rng.seed() ^ epoch as u64,
        };
        let g = pursue_with(&dict, x0, &sc, gamma.take(), |_| {})?.gamma;
        let current = objective(&dict, &g)?;
        if !current.is_finite() {
            return Err(CscError::Divergence { iteration: epoch + 1 });
        }

        let residual = dict.synthesize(&g)?.sub(x0)?;
        let grad = dict.atom_gradient(&g, &residual)?;
        let energy: Vec<f64> = (0..cfg.atoms)
            .map(|k| {
                g.data()
                    .iter()
                    .skip(k)
                    .step_by(cfg.atoms)
                    .map(|&v| f64::from(v) * f64::from(v))
                    .sum::<f64>()
            })
            .collect();
        let atom_len = dict.atom_len();
        let mut rate = cfg.learn_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut atoms = dict.atoms().to_vec();
            for (k, chunk) in atoms.chunks_exact_mut(atom_len).enumerate() {
                if energy[k] <= 0.0 {
                    continue;
                }
                let step = rate / energy[k];
                for (a, &gr) in chunk.iter_mut().zip(&grad[k * atom_len..(k + 1) * atom_len]) {
                    *a = (f64::from(*a) - step * f64::from(gr)) as f32;
                }
            }
            let candidate = dict.with_atoms(atoms)?.normalize_atoms(&mut refresh);
            let obj = objective(&candidate, &g)?;
            if obj.is_finite() && obj <= current + EPOCH_SLACK * current.max(1.0) {
                accepted = Some((candidate, obj));
                break;
            }
            rate *= 0.5;
        }
        let obj = match accepted {
            Some((candidate, obj)) => {
                dict = candidate;
                obj
            }
            None => current,
        };
        epoch_objectives.push(obj);
        gamma = Some(g);
    }
    Ok(LearnOutcome {
        dictionary: dict,
        epoch_objectives,
        gamma,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySource {
    Fixed(ConvDictionary),
    Learned(LearnConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    pub sigma: f64,
    pub rule: SparsityRule,
    pub iters: usize,
    pub ema_decay: f64,
    pub step: StepSize,
    pub power_iters: usize,
    pub seed: u64,
}

impl DenoiseConfig {
    pub fn new(rule: SparsityRule, iters: usize, seed: u64) -> Self {
        DenoiseConfig {
            sigma: DEFAULT_SIGMA,
            rule,
            iters,
            ema_decay: DEFAULT_EMA_DECAY,
            step: StepSize::Auto,
            power_iters: 50,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(CscError::domain(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return Err(CscError::domain(format!(
                "ema decay must lie strictly inside (0, 1), got {}",
                self.ema_decay
            )));
        }
        if self.iters == 0 {
            return Err(CscError::domain("iteration count must be positive"));
        }
        self.rule.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestImage {
    /// 1-based iteration at which the image was produced.
    pub iteration: usize,
    pub psnr: f64,
    pub image: Tensor3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseRun {
    pub noisy: Tensor3,
    pub noisy_psnr: f64,
    pub dictionary: ConvDictionary,
    pub objectives: Vec<f64>,
    pub psnr_single_trace: Vec<f64>,
    pub psnr_avg_trace: Vec<f64>,
    pub best_single: Option<BestImage>,
    pub best_average: Option<BestImage>,
}

impl DenoiseRun {
    pub fn iterations(&self) -> usize {
        self.psnr_single_trace.len()
    }

    /// `iter,psnr_single,psnr_avg` lines.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,psnr_single,psnr_avg\n");
        for (i, (a, b)) in self
            .psnr_single_trace
            .iter()
            .zip(&self.psnr_avg_trace)
            .enumerate()
        {
            s.push_str(&format!("{},{},{}\n", i + 1, a, b));
        }
        s
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, Clone)]
pub struct DenoiseFailure {
    pub error: CscError,
    pub partial: Option<Box<DenoiseRun>>,
}

impl fmt::Display for DenoiseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for DenoiseFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<CscError> for DenoiseFailure {
    fn from(error: CscError) -> Self {
        DenoiseFailure {
            error,
            partial: None,
        }
    }
}

/// Running EMA kept in f64 so the average stays inside the hull of its inputs.
struct Ema {
    decay: f64,
    state: Option<Vec<f64>>,
}

impl Ema {
    fn update(&mut self, x: &Tensor3) -> Tensor3 {
        let state = match self.state.take() {
            None => x.data().iter().map(|&v| f64::from(v)).collect(),
            Some(mut s) => {
                for (acc, &v) in s.iter_mut().zip(x.data()) {
                    *acc = self.decay * *acc + (1.0 - self.decay) * f64::from(v);
                }
                s
            }
        };
        let out = Tensor3::from_vec_unchecked(
            x.height(),
            x.width(),
            x.channels(),
            state.iter().map(|&v| v as f32).collect(),
        );
        self.state = Some(state);
        out
    }
}

/// Add noise to `clean`, fit the sparse model to the noisy image and track the
/// best single and averaged reconstructions by PSNR against `clean`.
///
/// Noise, dictionary initialization and the power iteration draw from
/// separate streams of `cfg.seed`.
pub fn denoise(
    clean: &Tensor3,
    cfg: &DenoiseConfig,
    source: &DictionarySource,
) -> std::result::Result<DenoiseRun, DenoiseFailure> {
    cfg.validate()?;
    let master = Rng::new(cfg.seed);
    let noisy = add_awgn(clean, cfg.sigma, &mut master.split(streams::NOISE))?;
    let dictionary = match source {
        DictionarySource::Fixed(d) => d.clone(),
        DictionarySource::Learned(lc) => {
            learn_dictionary(&noisy, lc, &mut master.split(streams::DICTIONARY_INIT))?
        }
    };
    let pursuit = PursuitConfig {
        max_iters: cfg.iters,
        step: cfg.step,
        rule: cfg.rule,
        objective_tol: 0.0,
        power_iters: cfg.power_iters,
        seed: rand::RngCore::next_u64(&mut master.split(streams::POWER_ITERATION)),
    };

    let mut run = DenoiseRun {
        noisy_psnr: psnr(clean, &noisy)?,
        noisy: noisy.clone(),
        dictionary: dictionary.clone(),
        objectives: Vec::with_capacity(cfg.iters),
        psnr_single_trace: Vec::with_capacity(cfg.iters),
        psnr_avg_trace: Vec::with_capacity(cfg.iters),
        best_single: None,
        best_average: None,
    };
    let mut ema = Ema {
        decay: cfg.ema_decay,
        state: None,
    };
    let result = pursue_with(&dictionary, &noisy, &pursuit, None, |it| {
        let single = it.reconstruction;
        let average = ema.update(single);
        let ps = psnr(clean, single).unwrap_or(f64::NAN);
        let pa = psnr(clean, &average).unwrap_or(f64::NAN);
        run.objectives.push(it.objective);
        run.psnr_single_trace.push(ps);
        run.psnr_avg_trace.push(pa);
        if run.best_single.as_ref().is_none_or(|b| ps > b.psnr) {
            run.best_single = Some(BestImage {
                iteration: it.iteration,
                psnr: ps,
                image: single.clone(),
            });
        }
        if run.best_average.as_ref().is_none_or(|b| pa > b.psnr) {
            run.best_average = Some(BestImage {
                iteration: it.iteration,
                psnr: pa,
                image: average,
            });
        }
    });
    match result {
        Ok(_) => Ok(run),
        Err(error) => Err(DenoiseFailure {
            error,
            partial: Some(Box::new(run)),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsify::sparsity_report;
    use crate::tensor::inner;
    use crate::testimage;

    #[test]
    fn dct_dc_atom() {
        let d = dct_dictionary(1, 4).unwrap();
        assert!(d.atom(0).iter().all(|&v| (v - 0.25).abs() < 1e-7));
    }

    #[test]
    fn dct_atoms_orthonormal() {
        let d = dct_dictionary(64, 8).unwrap();
        assert_eq!((d.atom_count(), d.atom_size(), d.channels()), (64, 8, 1));
        for a in 0..64 {
            assert!((d.atom_norm(a) - 1.0).abs() < 1e-6);
            for b in (a + 1)..64 {
                let ip = inner(&d.atom_tensor(a), &d.atom_tensor(b)).unwrap();
                assert!(ip.abs() < 1e-6, "{a} {b} {ip}");
            }
        }
        assert!(dct_dictionary(65, 8).is_err());
    }

    #[test]
    fn zigzag_order() {
        assert_eq!(
            zigzag(3),
            vec![(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (1, 2), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn dct_padding_keeps_odd_sizes() {
        let d = dct_dictionary(9, 3).unwrap();
        let g = d.geometry_for_output(10, 10).unwrap();
        assert_eq!((g.rep_height, g.rep_width), (10, 10));
    }

    #[test]
    fn near_noiseless_identity_run() {
        let clean = testimage::piecewise_constant(16, 16, 3);
        let cfg = DenoiseConfig {
            sigma: 1e-6,
            ..DenoiseConfig::new(SparsityRule::L0Global { k: 256 }, 5, 1)
        };
        let run = denoise(&clean, &cfg, &DictionarySource::Fixed(ConvDictionary::identity())).unwrap();
        assert!(run.best_single.unwrap().psnr > 60.0);
    }

    #[test]
    fn ema_fixed_point_for_constant_input() {
        let x = testimage::piecewise_constant(8, 8, 2);
        let mut ema = Ema { decay: 0.99, state: None };
        for _ in 0..20 {
            assert_eq!(ema.update(&x), x);
        }
    }

    #[test]
    fn traces_and_best_fields_agree() {
        let clean = testimage::piecewise_constant(24, 24, 5);
        let cfg = DenoiseConfig::new(SparsityRule::L0InfNeedle { k: 2 }, 15, 4);
        let run = denoise(&clean, &cfg, &DictionarySource::Fixed(dct_dictionary(16, 4).unwrap())).unwrap();
        assert_eq!(run.iterations(), 15);
        assert_eq!(run.psnr_avg_trace.len(), 15);
        let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bs = run.best_single.as_ref().unwrap();
        let ba = run.best_average.as_ref().unwrap();
        assert_eq!(bs.psnr, max(&run.psnr_single_trace));
        assert_eq!(ba.psnr, max(&run.psnr_avg_trace));
        assert_eq!(run.psnr_single_trace[bs.iteration - 1], bs.psnr);
        assert_eq!(psnr(&clean, &bs.image).unwrap(), bs.psnr);
    }

    #[test]
    fn average_stays_within_history_hull() {
        let clean = testimage::piecewise_constant(12, 12, 6);
        let d = dct_dictionary(9, 3).unwrap();
        let noisy = add_awgn(&clean, 25.0, &mut Rng::new(1)).unwrap();
        let cfg = PursuitConfig::new(SparsityRule::L0InfNeedle { k: 2 }, 12);
        let mut ema = Ema { decay: 0.9, state: None };
        let mut lo = vec![f32::INFINITY; clean.len()];
        let mut hi = vec![f32::NEG_INFINITY; clean.len()];
        pursue_with(&d, &noisy, &cfg, None, |it| {
            assert!(sparsity_report(it.gamma, 0.0).max_needle_nnz <= 2);
            for (i, &v) in it.reconstruction.data().iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
            let avg = ema.update(it.reconstruction);
            for (i, &v) in avg.data().iter().enumerate() {
                assert!(lo[i] <= v && v <= hi[i]);
            }
        })
        .unwrap();
    }

    #[test]
    fn config_validation() {
        let base = DenoiseConfig::new(SparsityRule::L0Global { k: 1 }, 3, 0);
        let clean = Tensor3::zeros(4, 4, 1).unwrap();
        let src = DictionarySource::Fixed(ConvDictionary::identity());
        for bad in [
            DenoiseConfig { ema_decay: 1.0, ..base.clone() },
            DenoiseConfig { ema_decay: 0.0, ..base.clone() },
            DenoiseConfig { sigma: -1.0, ..base.clone() },
            DenoiseConfig { iters: 0, ..base.clone() },
        ] {
            assert!(matches!(denoise(&clean, &bad, &src), Err(DenoiseFailure { error: CscError::Domain(_), .. })));
        }
    }

    #[test]
    fn divergence_keeps_partial_run() {
        let clean = testimage::piecewise_constant(8, 8, 1);
        let cfg = DenoiseConfig {
            step: StepSize::Fixed(1e30),
            ..DenoiseConfig::new(SparsityRule::L0Global { k: 64 }, 50, 2)
        };
        let failure = denoise(&clean, &cfg, &DictionarySource::Fixed(ConvDictionary::identity())).unwrap_err();
        assert!(matches!(failure.error, CscError::Divergence { .. }));
        let partial = failure.partial.unwrap();
        assert!(partial.iterations() < 50);
    }

    #[test]
    fn denoise_is_deterministic() {
        let clean = testimage::piecewise_constant(16, 16, 9);
        let cfg = DenoiseConfig::new(SparsityRule::L0InfNeedle { k: 3 }, 8, 77);
        let src = DictionarySource::Learned(LearnConfig {
            epochs: 2,
            ..LearnConfig::new(8, 4, SparsityRule::L0InfNeedle { k: 3 })
        });
        assert_eq!(denoise(&clean, &cfg, &src).unwrap(), denoise(&clean, &cfg, &src).unwrap());
    }

    #[test]
    fn learn_zero_epochs_returns_initialization() {
        let x = testimage::piecewise_constant(10, 10, 1);
        let cfg = LearnConfig { epochs: 0, ..LearnConfig::new(4, 3, SparsityRule::L0InfNeedle { k: 1 }) };
        let learned = learn_dictionary(&x, &cfg, &mut Rng::new(5)).unwrap();
        let init = ConvDictionary::random(4, 3, 1, 1, 1, &mut Rng::new(5)).unwrap();
        assert_eq!(learned, init);
    }

    #[test]
    fn learn_rejects_oversized_budget() {
        let x = testimage::piecewise_constant(10, 10, 1);
        let cfg = LearnConfig::new(4, 3, SparsityRule::L0InfNeedle { k: 5 });
        assert!(matches!(learn_dictionary(&x, &cfg, &mut Rng::new(5)), Err(CscError::Domain(_))));
        let cfg = LearnConfig::new(4, 3, SparsityRule::L0Global { k: 401 });
        assert!(matches!(learn_dictionary(&x, &cfg, &mut Rng::new(5)), Err(CscError::Domain(_))));
    }

    #[test]
    fn learned_atoms_unit_norm_and_objective_monotone() {
        let x = testimage::piecewise_constant(16, 16, 2);
        let cfg = LearnConfig { epochs: 6, ..LearnConfig::new(6, 4, SparsityRule::L0InfNeedle { k: 2 }) };
        let out = learn_dictionary_traced(&x, &cfg, &mut Rng::new(8)).unwrap();
        for k in 0..6 {
            assert!((out.dictionary.atom_norm(k) - 1.0).abs() < 1e-5);
        }
        assert_eq!(out.epoch_objectives.len(), 6);
    }
}
