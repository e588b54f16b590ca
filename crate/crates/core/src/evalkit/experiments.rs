use std::io::Write;

use super::{coverage, default_report};
use crate::error::{domain, QrmError, Result};
use crate::numkit::{cell_stream_id, mix64, AlphaLevel};
use crate::riskdist::{fit, icdf, BandwidthRule, EstimatorKind, RiskModel, RiskVector};
use crate::semlab::{sample_environments, EnvironmentFamily, EnvironmentSet};
use crate::trainer::{domain_risks, objective_value, Objective, Predictor, TrainingDomains};
use crate::Scalar;

/// Estimator used for the quantiles compared in [`qq_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqSettings<F> {
    pub alpha: AlphaLevel<F>,
    pub kind: EstimatorKind,
    pub rule: BandwidthRule<F>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqRow<F> {
    pub m: usize,
    /// Mean over seeds of `|q̂_m - q̂_reference|`.
    pub mean_gap: F,
}

fn analytic_risks<F: Scalar>(predictor: &Predictor<F>, envs: &EnvironmentSet<F>) -> Result<RiskVector<F>> {
    domain_risks(predictor, &TrainingDomains::Analytic(envs.clone()))
}

fn fitted_quantile<F: Scalar>(predictor: &Predictor<F>, envs: &EnvironmentSet<F>, s: &QqSettings<F>) -> Result<F> {
    icdf(&fit(&analytic_risks(predictor, envs)?, s.kind, s.rule)?, s.alpha)
}

/// Seed of the `m`-domain sample paired with reference seed `seed`.
fn fresh_seed(seed: u64, m: usize) -> u64 {
    mix64(seed ^ cell_stream_id("evalkit.qq", m as u64))
}

/// `|q̂_m - q̂_reference|` for one seed. A sample of the reference size is the
/// reference sample itself, so its gap is zero.
pub fn qq_gap<F: Scalar>(
    family: &EnvironmentFamily<F>,
    predictor: &Predictor<F>,
    settings: &QqSettings<F>,
    m: usize,
    m_reference: usize,
    seed: u64,
) -> Result<F> {
    if m > m_reference {
        return domain(format!("sample size {m} exceeds reference size {m_reference}"));
    }
    if m == m_reference {
        return Ok(F::zero());
    }
    let reference = fitted_quantile(predictor, &sample_environments(m_reference, family, seed)?, settings)?;
    let fresh = fitted_quantile(predictor, &sample_environments(m, family, fresh_seed(seed, m))?, settings)?;
    Ok((fresh - reference).abs())
}

/// Convergence of the fitted quantile in the number of domains, with analytic risks.
pub fn qq_experiment<F: Scalar>(
    family: &EnvironmentFamily<F>,
    predictor: &Predictor<F>,
    settings: &QqSettings<F>,
    m_values: &[usize],
    m_reference: usize,
    seeds: &[u64],
) -> Result<Vec<QqRow<F>>> {
    if seeds.is_empty() {
        return domain("qq experiment needs at least one seed");
    }
    m_values
        .iter()
        .map(|&m| {
            let total =
                seeds.iter().map(|&s| qq_gap(family, predictor, settings, m, m_reference, s)).sum::<Result<F>>()?;
            Ok(QqRow { m, mean_gap: total / F::from_usize_lossy(seeds.len()) })
        })
        .collect()
}

/// CSV `m,mean_gap`.
pub fn write_qq_csv<F: Scalar, W: Write>(rows: &[QqRow<F>], out: W) -> Result<()> {
    let io = |e: csv::Error| QrmError::Domain(format!("csv write failed: {e}"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["m", "mean_gap"]).map_err(io)?;
    for r in rows {
        w.write_record([r.m.to_string(), r.mean_gap.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| QrmError::Domain(format!("csv flush failed: {e}")))
}

/// Fresh-domain quantile risk of each trained predictor at each level.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierTable<F> {
    pub alphas: Vec<F>,
    pub levels: Vec<F>,
    /// `risks[a][l]`: predictor trained at `alphas[a]`, quantile at `levels[l]`.
    pub risks: Vec<Vec<F>>,
}

impl<F: Scalar> FrontierTable<F> {
    /// Levels that are also training levels and where the predictor trained
    /// there is beaten by another by more than the factor `1 + rel_tol`, as
    /// `(level, competing alpha)`.
    pub fn dominance_violations(&self, rel_tol: F) -> Vec<(F, F)> {
        let mut out = Vec::new();
        for (li, &level) in self.levels.iter().enumerate() {
            let Some(own) = self.alphas.iter().position(|&a| a == level) else {
                continue;
            };
            let mine = self.risks[own][li];
            for (ai, &alpha) in self.alphas.iter().enumerate() {
                if ai != own && mine > self.risks[ai][li] * (F::one() + rel_tol) {
                    out.push((level, alpha));
                }
            }
        }
        out
    }

    /// Wide CSV: `level` then one column `alpha_<a>` per trained predictor.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| QrmError::Domain(format!("csv write failed: {e}"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["level".to_string()];
        header.extend(self.alphas.iter().map(|a| format!("alpha_{a}")));
        w.write_record(&header).map_err(io)?;
        for (li, level) in self.levels.iter().enumerate() {
            let mut rec = vec![level.to_string()];
            rec.extend(self.risks.iter().map(|row| row[li].to_string()));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| QrmError::Domain(format!("csv flush failed: {e}")))
    }
}

pub fn write_frontier_csv<F: Scalar, W: Write>(table: &FrontierTable<F>, out: W) -> Result<()> {
    table.write_csv(out)
}

/// Empirical quantiles of each predictor's risks on at least 500 fresh domains.
pub fn frontier_experiment<F: Scalar>(
    trained: &[(F, Predictor<F>)],
    fresh: &EnvironmentSet<F>,
    levels: &[F],
) -> Result<FrontierTable<F>> {
    if trained.is_empty() {
        return domain("frontier needs at least one trained predictor");
    }
    if fresh.len() < 500 {
        return domain(format!("frontier needs at least 500 fresh domains, got {}", fresh.len()));
    }
    let mut risks = Vec::with_capacity(trained.len());
    for (_, p) in trained {
        let model = RiskModel::empirical(analytic_risks(p, fresh)?.into_inner())?;
        risks.push(levels.iter().map(|&l| icdf(&model, AlphaLevel::prob(l)?)).collect::<Result<Vec<_>>>()?);
    }
    Ok(FrontierTable { alphas: trained.iter().map(|(a, _)| *a).collect(), levels: levels.to_vec(), risks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult<F> {
    pub alpha: F,
    /// The quantile objective evaluated on the training risks.
    pub predicted_q: F,
    pub fraction_below: F,
}

/// Fits the quantile of `objective` on the training risks and measures how
/// often fresh domains stay at or below it.
pub fn coverage_experiment<F: Scalar>(
    predictor: &Predictor<F>,
    objective: &Objective<F>,
    training: &TrainingDomains<F>,
    fresh: &TrainingDomains<F>,
) -> Result<CoverageResult<F>> {
    let Objective::Eqrm { alpha, .. } = objective else {
        return domain("coverage needs a quantile objective");
    };
    let predicted_q = objective_value(objective, &domain_risks(predictor, training)?)?;
    let test = domain_risks(predictor, fresh)?;
    Ok(CoverageResult { alpha: alpha.alpha(), predicted_q, fraction_below: coverage(test.as_slice(), predicted_q) })
}

/// Full report of a predictor on fresh domains.
pub fn fresh_report<F: Scalar>(predictor: &Predictor<F>, fresh: &TrainingDomains<F>) -> Result<super::EvalReport<F>> {
    default_report(&domain_risks(predictor, fresh)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{default_report, REPORT_LEVELS};

    fn settings(alpha: f64, kind: EstimatorKind) -> QqSettings<f64> {
        QqSettings { alpha: AlphaLevel::Prob(alpha), kind, rule: BandwidthRule::GaussianOptimal }
    }

    #[test]
    fn reference_size_has_zero_gap() {
        let fam = EnvironmentFamily::default();
        let p = Predictor::linear(vec![0.5, 0.5]);
        assert_eq!(qq_gap(&fam, &p, &settings(0.9, EstimatorKind::Kde), 300, 300, 4).unwrap(), 0.0);
        assert!(qq_gap(&fam, &p, &settings(0.9, EstimatorKind::Kde), 301, 300, 4).is_err());
    }

    #[test]
    fn degenerate_family_has_zero_gap() {
        let fam = EnvironmentFamily { sigma2_sigma: 0.0, ..EnvironmentFamily::default() };
        let p = Predictor::linear(vec![0.3, 0.6]);
        let rows =
            qq_experiment(&fam, &p, &settings(0.5, EstimatorKind::Gaussian), &[10, 50, 200], 1000, &[1, 2, 3]).unwrap();
        assert!(rows.iter().all(|r| r.mean_gap == 0.0), "{rows:?}");
    }

    #[test]
    fn gap_shrinks_with_more_domains() {
        let fam = EnvironmentFamily::default();
        let p = Predictor::linear(vec![0.5, 0.5]);
        let seeds: Vec<u64> = (0..20).collect();
        let rows =
            qq_experiment(&fam, &p, &settings(0.9, EstimatorKind::Kde), &[10, 50, 200, 1000], 1000, &seeds).unwrap();
        assert!(rows[0].mean_gap > rows[2].mean_gap && rows[3].mean_gap == 0.0, "{rows:?}");
    }

    #[test]
    fn frontier_rows_match_reports() {
        let fresh = sample_environments(600, &EnvironmentFamily::default(), 9).unwrap();
        let p = Predictor::linear(vec![0.4, 0.5]);
        let levels: Vec<f64> = REPORT_LEVELS.to_vec();
        let table = frontier_experiment(&[(0.9, p.clone()), (1.0, Predictor::linear(vec![1.0, 0.0]))], &fresh, &levels)
            .unwrap();
        let rep = default_report(&analytic_risks(&p, &fresh).unwrap()).unwrap();
        let want: Vec<f64> = rep.quantiles.iter().map(|&(_, q)| q).collect();
        assert_eq!(table.risks[0], want);
        assert!(table.risks[1].iter().all(|&r| (r - 2.0).abs() < 1e-12));
        let small = sample_environments(20, &EnvironmentFamily::default(), 9).unwrap();
        assert!(frontier_experiment(&[(0.9, p)], &small, &levels).is_err());
    }

    #[test]
    fn dominance_violations_are_found() {
        let table = FrontierTable {
            alphas: vec![0.5, 0.9],
            levels: vec![0.5, 0.9],
            risks: vec![vec![1.0, 3.0], vec![1.01, 2.0]],
        };
        assert!(table.dominance_violations(0.02).is_empty());
        let bad = FrontierTable { risks: vec![vec![1.1, 3.0], vec![1.0, 2.0]], ..table };
        assert_eq!(bad.dominance_violations(0.02), vec![(0.5, 0.9)]);
    }
}
