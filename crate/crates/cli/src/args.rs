use clap::{Args, ValueEnum};
use csc_core::{SparsityRule, StepSize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    L1,
    L0,
    L0inf,
}

#[derive(Debug, Clone, Args)]
pub struct RuleArgs {
    /// Sparsity rule: l1 penalty, global l0 budget or per-needle l0 budget.
    #[arg(long, value_enum)]
    pub rule: Option<RuleKind>,
    /// Budget for the l0 and l0inf rules.
    #[arg(long)]
    pub k: Option<usize>,
    /// Penalty weight for the l1 rule.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
}

impl RuleArgs {
    /// The rule given on the command line, or `fallback` when `--rule` is absent.
    pub fn resolve(&self, fallback: Option<SparsityRule>) -> CliResult<SparsityRule> {
        let rule = match self.rule {
            None => match fallback {
                Some(r) if self.k.is_none() && self.lambda.is_none() => r,
                Some(_) | None => {
                    return Err(CliError::usage("--rule is required when --k or --lambda is given"))
                }
            },
            Some(RuleKind::L1) => {
                if self.k.is_some() {
                    return Err(CliError::usage("--k does not apply to --rule l1"));
                }
                let lambda = self
                    .lambda
                    .ok_or_else(|| CliError::usage("--rule l1 needs --lambda"))?;
                SparsityRule::L1Penalty { lambda }
            }
            Some(kind) => {
                if self.lambda.is_some() {
                    return Err(CliError::usage("--lambda only applies to --rule l1"));
                }
                let k = self
                    .k
                    .ok_or_else(|| CliError::usage("--rule l0 and l0inf need --k"))?;
                if kind == RuleKind::L0 {
                    SparsityRule::L0Global { k }
                } else {
                    SparsityRule::L0InfNeedle { k }
                }
            }
        };
        rule.validate()
            .map_err(|e| CliError::usage(format!("invalid rule: {e}")))?;
        Ok(rule)
    }

    pub fn require(&self) -> CliResult<SparsityRule> {
        if self.rule.is_none() {
            return Err(CliError::usage("--rule is required"));
        }
        self.resolve(None)
    }
}

/// `auto` or a positive step size.
pub fn parse_step(s: &str) -> Result<StepSize, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(StepSize::Auto);
    }
    let v: f64 = s.parse().map_err(|_| format!("expected `auto` or a number, got `{s}`"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("step must be positive, got {s}"));
    }
    Ok(StepSize::Fixed(v))
}

pub fn step_json(step: StepSize) -> serde_json::Value {
    match step {
        StepSize::Auto => serde_json::json!("auto"),
        StepSize::Fixed(v) => serde_json::json!(v),
    }
}
