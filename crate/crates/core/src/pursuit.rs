//! Sparse coding solvers.
//!
//! All solvers start from `Γ₀ = 0` and take proximal-gradient steps on
//! `½‖DΓ − x‖²`:
//!
//! * [`ista`]: `Γ ← soft(Γ − t·Dᵀ(DΓ − x), t·λ)` for the ℓ1 rule;
//! * [`iht`]: `Γ ← P(Γ − t·Dᵀ(DΓ − x))` with `P` an ℓ0 projection;
//! * [`layered_thresholding`]: one forward pass `Γᵢ = Pᵢ(Dᵢᵀ Γᵢ₋₁)` through a
//!   multi-layer model.

use crate::dictionary::ConvDictionary;
use crate::error::{CscError, Result};
use crate::mlcsc::MlCscModel;
use crate::rng::Rng;
use crate::sparsify::{soft_threshold, SparsityRule};
use crate::tensor::{inner, Tensor3};

/// Safety factor applied to `1/L` when the step size is automatic.
pub const AUTO_STEP_FACTOR: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `0.99 / L`, with `L` from [`estimate_lipschitz`].
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PursuitConfig {
    pub max_iters: usize,
    pub step: StepSize,
    pub rule: SparsityRule,
    /// Stop once an iteration lowers the objective by less than this.
    /// Zero disables the check.
    pub objective_tol: f64,
    pub power_iters: usize,
    /// Seed of the power-iteration start vector.
    pub seed: u64,
}

impl PursuitConfig {
    pub fn new(rule: SparsityRule, max_iters: usize) -> Self {
        PursuitConfig {
            max_iters,
            step: StepSize::Auto,
            rule,
            objective_tol: 0.0,
            power_iters: 50,
            seed: 0,
        }
    }

    pub fn with_step(mut self, step: StepSize) -> Self {
        self.step = step;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.objective_tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    ObjectiveTol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PursuitTrace {
    /// Objective at `Γ₀` (before the first step).
    pub initial_objective: f64,
    /// Objective after each iteration.
    pub objectives: Vec<f64>,
    pub gamma: Tensor3,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub step: f64,
}

impl PursuitTrace {
    pub fn final_objective(&self) -> f64 {
        self.objectives
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }

    /// `iter,objective` lines, iteration 0 being the starting point.
    pub fn to_csv_rows(&self) -> String {
        let mut s = String::from("iter,objective\n");
        s.push_str(&format!("0,{}\n", self.initial_objective));
        for (i, o) in self.objectives.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, o));
        }
        s
    }
}

/// State handed to the per-iteration observer.
pub struct Iterate<'a> {
    /// 1-based iteration number.
    pub iteration: usize,
    pub gamma: &'a Tensor3,
    /// `DΓ` for the current `Γ`.
    pub reconstruction: &'a Tensor3,
    pub objective: f64,
}

/// Largest eigenvalue of `DᵀD` on `height × width` representations, by power
/// iteration from a seeded Gaussian start. Returns the Rayleigh quotient of
/// the last iterate.
pub fn estimate_lipschitz(
    dict: &ConvDictionary,
    height: usize,
    width: usize,
    iters: usize,
    rng: &mut Rng,
) -> Result<f64> {
    dict.geometry(height, width)?;
    if iters == 0 {
        return Err(CscError::domain("power iteration needs at least one step"));
    }
    let mut v = Tensor3::random_gaussian(height, width, dict.atom_count(), rng)?;
    v = v.scale((1.0 / v.norm()) as f32);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let av = dict.adjoint(&dict.synthesize(&v)?)?;
        estimate = inner(&v, &av)?;
        let norm = av.norm();
        if norm == 0.0 {
            return Err(CscError::domain("dictionary operator is zero"));
        }
        v = av.scale((1.0 / norm) as f32);
    }
    Ok(estimate)
}

fn resolve_step(dict: &ConvDictionary, height: usize, width: usize, cfg: &PursuitConfig) -> Result<f64> {
    match cfg.step {
        StepSize::Fixed(t) if t > 0.0 && t.is_finite() => Ok(t),
        StepSize::Fixed(t) => Err(CscError::domain(format!("step size must be positive, got {t}"))),
        StepSize::Auto => {
            let l = estimate_lipschitz(dict, height, width, cfg.power_iters, &mut Rng::new(cfg.seed))?;
            Ok(AUTO_STEP_FACTOR / l)
        }
    }
}

fn data_fit(recon: &Tensor3, x: &Tensor3) -> Result<f64> {
    let r = recon.sub(x)?;
    Ok(0.5 * r.norm_sq())
}

fn objective(rule: &SparsityRule, recon: &Tensor3, x: &Tensor3, gamma: &Tensor3) -> Result<f64> {
    let fit = data_fit(recon, x)?;
    Ok(match *rule {
        SparsityRule::L1Penalty { lambda } => fit + lambda * gamma.l1_norm(),
        _ => fit,
    })
}

/// Proximal-gradient pursuit under any rule, starting from `init` (zeros when
/// `None`), calling `observer` after every iteration.
pub fn pursue_with(
    dict: &ConvDictionary,
    x: &Tensor3,
    cfg: &PursuitConfig,
    init: Option<Tensor3>,
    mut observer: impl FnMut(&Iterate<'_>),
) -> Result<PursuitTrace> {
    cfg.rule.validate()?;
    if x.channels() != dict.channels() {
        return Err(CscError::shape(format!(
            "signal has {} channels, atoms have {}",
            x.channels(),
            dict.channels()
        )));
    }
    let geo = dict.geometry_for_output(x.height(), x.width())?;
    let step = resolve_step(dict, geo.rep_height, geo.rep_width, cfg)?;
    let threshold = match cfg.rule {
        SparsityRule::L1Penalty { lambda } => step * lambda,
        _ => 0.0,
    };

    let mut gamma = match init {
        Some(g) => {
            if g.shape() != (geo.rep_height, geo.rep_width, dict.atom_count()) {
                return Err(CscError::shape("initial representation has the wrong shape"));
            }
            g
        }
        None => Tensor3::zeros(geo.rep_height, geo.rep_width, dict.atom_count())?,
    };
    let mut recon = dict.synthesize(&gamma)?;
    let initial_objective = objective(&cfg.rule, &recon, x, &gamma)?;
    let mut objectives = Vec::with_capacity(cfg.max_iters);
    let mut prev = initial_objective;
    let mut stop_reason = StopReason::MaxIters;

    for iteration in 1..=cfg.max_iters {
        let grad = dict.adjoint(&recon.sub(x)?)?;
        let moved = gamma.axpby(1.0, &grad, -(step as f32))?;
        if !moved.is_finite() {
            return Err(CscError::Divergence { iteration });
        }
        gamma = cfg.rule.apply(&moved, threshold)?;
        recon = dict.synthesize(&gamma)?;
        let obj = objective(&cfg.rule, &recon, x, &gamma)?;
        if !obj.is_finite() || !recon.is_finite() {
            return Err(CscError::Divergence { iteration });
        }
        objectives.push(obj);
        observer(&Iterate {
            iteration,
            gamma: &gamma,
            reconstruction: &recon,
            objective: obj,
        });
        if cfg.objective_tol > 0.0 && prev - obj < cfg.objective_tol {
            stop_reason = StopReason::ObjectiveTol;
            break;
        }
        prev = obj;
    }

    Ok(PursuitTrace {
        initial_objective,
        iterations_run: objectives.len(),
        objectives,
        gamma,
        stop_reason,
        step,
    })
}

/// ISTA on `½‖DΓ − x‖² + λ‖Γ‖₁`.
pub fn ista(dict: &ConvDictionary, x: &Tensor3, cfg: &PursuitConfig) -> Result<PursuitTrace> {
    if cfg.rule.is_projection() {
        return Err(CscError::domain("ista needs an l1 rule"));
    }
    pursue_with(dict, x, cfg, None, |_| {})
}

/// Iterative hard thresholding on `½‖DΓ − x‖²` under an ℓ0 budget.
pub fn iht(dict: &ConvDictionary, x: &Tensor3, cfg: &PursuitConfig) -> Result<PursuitTrace> {
    if !cfg.rule.is_projection() {
        return Err(CscError::domain("iht needs an l0 or l0inf rule"));
    }
    pursue_with(dict, x, cfg, None, |_| {})
}

/// One thresholding pass through the cascade: `Γ₁ = P₁(D₁ᵀx)`,
/// `Γᵢ = Pᵢ(Dᵢᵀ Γᵢ₋₁)`. The ℓ1 rule soft-thresholds by its `λ` directly.
pub fn layered_thresholding(model: &MlCscModel, x: &Tensor3) -> Result<Vec<Tensor3>> {
    let mut out: Vec<Tensor3> = Vec::with_capacity(model.depth());
    for (idx, layer) in model.layers().iter().enumerate() {
        let input = out.last().unwrap_or(x);
        let lifted = layer.dictionary.adjoint(input).map_err(|e| CscError::CascadeGeometry {
            layer: idx + 1,
            reason: e.to_string(),
        })?;
        let gamma = match layer.rule {
            SparsityRule::L1Penalty { lambda } => soft_threshold(&lifted, lambda)?,
            rule => rule.apply(&lifted, 0.0)?,
        };
        out.push(gamma);
    }
    Ok(out)
}
