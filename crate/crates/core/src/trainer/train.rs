use std::io::Write;

use super::objective::evaluate;
use super::{domain_risks, objective_value, Link, Objective, Predictor, RiskMode, TrainingDomains};
use crate::error::{domain, QrmError, Result};
use crate::numkit::{mean, sample_std};
use crate::semlab::EnvironmentSet;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<F> {
    pub learning_rate: F,
    /// Steps on the target objective, after pretraining.
    pub steps: usize,
    /// Leading steps of plain mean-risk descent at `learning_rate`.
    pub pretrain_steps: usize,
    /// Scale the main-phase rate by `0.5 (1 + cos(π t / steps))`.
    pub cosine_anneal: bool,
    /// Main-phase rate when pretraining ran; defaults to `learning_rate`.
    pub post_pretrain_lr: Option<F>,
    pub seed: u64,
    pub risk_mode: RiskMode,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            learning_rate: F::lit(0.1),
            steps: 1000,
            pretrain_steps: 0,
            cosine_anneal: false,
            post_pretrain_lr: None,
            seed: 0,
            risk_mode: RiskMode::Analytic,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let ok = |lr: F| lr > F::zero() && lr.is_finite();
        if !ok(self.learning_rate) {
            return domain(format!("learning rate must be finite and > 0, got {}", self.learning_rate));
        }
        if let Some(lr) = self.post_pretrain_lr {
            if !ok(lr) {
                return domain(format!("post-pretraining learning rate must be finite and > 0, got {lr}"));
            }
        }
        if let RiskMode::Sampled { n: 0 } = self.risk_mode {
            return domain("sampled risk mode needs n >= 1");
        }
        Ok(())
    }
}

/// Objective and risk summary before the update of `step`; the last row is
/// the final predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow<F> {
    pub step: usize,
    pub objective: F,
    pub mean_risk: F,
    pub std_risk: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<F> {
    pub predictor: Predictor<F>,
    pub trajectory: Vec<TrajectoryRow<F>>,
}

/// Trains a zero-initialized linear predictor on `(X1, X2)` of `envs`.
pub fn train<F: Scalar>(
    envs: &EnvironmentSet<F>,
    objective: &Objective<F>,
    config: &TrainConfig<F>,
) -> Result<TrainOutcome<F>> {
    config.validate()?;
    let domains = TrainingDomains::prepare(envs, config.risk_mode, config.seed)?;
    train_on(&domains, Predictor::zeros(2, false, Link::Identity), objective, config)
}

/// Full-batch gradient descent from `init`. `config.risk_mode` and
/// `config.seed` are not consulted; `domains` is already materialized.
pub fn train_on<F: Scalar>(
    domains: &TrainingDomains<F>,
    init: Predictor<F>,
    objective: &Objective<F>,
    config: &TrainConfig<F>,
) -> Result<TrainOutcome<F>> {
    config.validate()?;
    let mut p = init;
    let mut trajectory = Vec::with_capacity(config.pretrain_steps + config.steps + 1);
    let mut step = 0;
    descend(
        domains,
        &mut p,
        &Objective::Erm,
        config.pretrain_steps,
        config.learning_rate,
        false,
        &mut step,
        &mut trajectory,
    )?;
    let lr = match (config.pretrain_steps, config.post_pretrain_lr) {
        (k, Some(lr)) if k > 0 => lr,
        _ => config.learning_rate,
    };
    descend(domains, &mut p, objective, config.steps, lr, config.cosine_anneal, &mut step, &mut trajectory)?;
    let risks = domain_risks(&p, domains)?;
    let value = objective_value(objective, &risks)?;
    trajectory.push(row(step, value, risks.as_slice()));
    Ok(TrainOutcome { predictor: p, trajectory })
}

fn row<F: Scalar>(step: usize, objective: F, risks: &[F]) -> TrajectoryRow<F> {
    TrajectoryRow { step, objective, mean_risk: mean(risks), std_risk: sample_std(risks) }
}

#[allow(clippy::too_many_arguments)]
fn descend<F: Scalar>(
    domains: &TrainingDomains<F>,
    p: &mut Predictor<F>,
    objective: &Objective<F>,
    steps: usize,
    lr: F,
    cosine: bool,
    step: &mut usize,
    trajectory: &mut Vec<TrajectoryRow<F>>,
) -> Result<()> {
    let mut limit = F::infinity();
    for t in 0..steps {
        let ev = evaluate(objective, p, domains)?;
        if t == 0 {
            limit = F::lit(1e6) * ev.value.abs().max(F::one());
        }
        if !ev.value.is_finite() || ev.value > limit || ev.gradient.iter().any(|g| !g.is_finite()) {
            return Err(QrmError::Divergence {
                step: *step,
                value: ev.value.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
        trajectory.push(row(*step, ev.value, ev.risks.as_slice()));
        let rate = if cosine {
            let frac = F::from_usize_lossy(t) / F::from_usize_lossy(steps);
            lr * F::lit(0.5) * (F::one() + (F::PI() * frac).cos())
        } else {
            lr
        };
        let theta: Vec<F> = p.params().iter().zip(&ev.gradient).map(|(&w, &g)| w - rate * g).collect();
        p.set_params(&theta)?;
        *step += 1;
    }
    Ok(())
}

/// CSV `step,objective,mean_risk,std_risk`.
pub fn write_trajectory_csv<F: Scalar, W: Write>(rows: &[TrajectoryRow<F>], out: W) -> Result<()> {
    let io = |e: csv::Error| QrmError::Domain(format!("csv write failed: {e}"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["step", "objective", "mean_risk", "std_risk"]).map_err(io)?;
    for r in rows {
        w.write_record([r.step.to_string(), r.objective.to_string(), r.mean_risk.to_string(), r.std_risk.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| QrmError::Domain(format!("csv flush failed: {e}")))
}
