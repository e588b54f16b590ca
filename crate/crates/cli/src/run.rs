//! Experiment kinds. Each runs its cells on the rayon pool, merges results in
//! config order and writes CSVs and SVG plots through [`Outputs`].

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use qrm_core::evalkit::{
    coverage_experiment, fresh_report, frontier_experiment, qq_gap, risk_curve, write_curve_csv, write_qq_csv,
    CurveGrid, CurvePoint, QqRow, QqSettings,
};
use qrm_core::numkit::{cell_stream_id, mean, mix64, sample_std, AlphaLevel};
use qrm_core::riskdist::{bandwidth, fit, icdf};
use qrm_core::semlab::{
    generate_color_shape, sample_environments, verify_unique_invariant_minimum, ColorShapeSpec, EnvironmentSet,
    VerifyOptions,
};
use qrm_core::trainer::{
    domain_risks, train_on, write_trajectory_csv, Link, Objective, Predictor, TrainConfig, TrainOutcome,
    TrainingDomains,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::fixtures;
use crate::plot::{render, PlotKind, Table};

/// Files written by one run, removed again if the run fails.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> qrm_core::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    /// CSV with `header` and string `rows`.
    pub fn records<S: AsRef<str>>(&mut self, name: &str, header: &[S], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write(name, &bytes)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let rows: Vec<Vec<String>> = table.rows.iter().map(|r| r.iter().map(f64::to_string).collect()).collect();
        self.records(name, &table.columns, &rows)
    }

    pub fn plot(&mut self, name: &str, table: &Table, kind: PlotKind) -> Result<()> {
        let title = name.trim_end_matches(".svg");
        self.write(name, render(table, kind, title)?.as_bytes())
    }

    /// Removes everything this run wrote, and the directory if the run created it.
    pub fn discard(self) {
        for f in &self.written {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

/// Seed of cell `index` of the sub-experiment `label`.
fn cell_seed(master: u64, label: &str, index: u64) -> u64 {
    mix64(master ^ cell_stream_id(label, index))
}

fn level_tag(level: &AlphaLevel<f64>) -> String {
    match level {
        AlphaLevel::Prob(a) => format!("alpha_{a}"),
        AlphaLevel::LogTail(l) => format!("logtail_{l}"),
    }
}

fn sem_init() -> Predictor<f64> {
    Predictor::zeros(2, false, Link::Identity)
}

/// Training environments and the domains risks are computed from, for cell `index`.
fn training_domains(cfg: &ExperimentConfig, index: u64) -> Result<(EnvironmentSet<f64>, TrainingDomains<f64>)> {
    let m = cfg.environment().domains.unwrap_or_default();
    let envs = sample_environments(m, &cfg.family(), cell_seed(cfg.seed(), "train-domains", index))?;
    let domains =
        TrainingDomains::prepare(&envs, cfg.train_config().risk_mode, cell_seed(cfg.seed(), "train-samples", index))?;
    Ok((envs, domains))
}

fn fresh_domains(cfg: &ExperimentConfig, index: u64) -> Result<EnvironmentSet<f64>> {
    let m = cfg.environment().test_domains.unwrap_or_default();
    Ok(sample_environments(m, &cfg.family(), cell_seed(cfg.seed(), "test-domains", index))?)
}

fn train_levels(
    cfg: &ExperimentConfig,
    domains: &TrainingDomains<f64>,
) -> Result<Vec<(AlphaLevel<f64>, TrainOutcome<f64>)>> {
    let tc = cfg.train_config();
    cfg.levels()?
        .into_par_iter()
        .map(|level| Ok((level, train_on(domains, sem_init(), &cfg.quantile_objective(level), &tc)?)))
        .collect()
}

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    match cfg.kind {
        ExperimentKind::Fig2aFrontier => frontier(cfg, out),
        ExperimentKind::Fig2bCurves => curves(cfg, out),
        ExperimentKind::Fig2cCoefficients => coefficients(cfg, out),
        ExperimentKind::Fig2dQq => qq(cfg, out),
        ExperimentKind::Coverage => coverage(cfg, out),
        ExperimentKind::CmnistToy => color_shape(cfg, out),
        ExperimentKind::CausalVerify => verify(cfg, out),
    }?;
    let rows: Vec<Vec<String>> = cfg.manifest_rows()?.into_iter().map(|(k, v)| vec![k, v]).collect();
    out.records("manifest.csv", &["key", "value"], &rows)
}

fn frontier(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (_, domains) = training_domains(cfg, 0)?;
    let trained = train_levels(cfg, &domains)?;
    let fresh = fresh_domains(cfg, 0)?;
    let eval_levels: Vec<f64> = trained.iter().map(|(l, _)| l.alpha()).collect();
    let pairs: Vec<(f64, Predictor<f64>)> = trained.iter().map(|(l, o)| (l.alpha(), o.predictor.clone())).collect();
    let table = frontier_experiment(&pairs, &fresh, &eval_levels)?;
    out.csv("frontier.csv", |w| table.write_csv(w))?;
    let mut columns = vec!["level".to_string()];
    columns.extend(trained.iter().map(|(l, _)| level_tag(l)));
    let rows = eval_levels
        .iter()
        .enumerate()
        .map(|(i, &lv)| std::iter::once(lv).chain(table.risks.iter().map(|r| r[i])).collect())
        .collect();
    out.plot("frontier.svg", &Table::new(columns, rows), PlotKind::Line)?;

    let fresh = TrainingDomains::Analytic(fresh);
    for (level, o) in &trained {
        let report = fresh_report(&o.predictor, &fresh)?;
        out.csv(&format!("report_{}.csv", level_tag(level)), |w| report.write_csv(w))?;
    }
    Ok(())
}

fn curves(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (_, domains) = training_domains(cfg, 0)?;
    let trained = train_levels(cfg, &domains)?;
    let risks =
        trained.iter().map(|(_, o)| domain_risks(&o.predictor, &domains)).collect::<qrm_core::Result<Vec<_>>>()?;
    let c = cfg.curves.as_ref().expect("resolved curves section");
    let rule = cfg.bandwidth_rule()?;
    let grid = match (c.t_min, c.t_max) {
        (Some(t_min), Some(t_max)) => CurveGrid { t_min, t_max, points: c.points.unwrap_or_default() },
        (lo, hi) => {
            // pooled risk range, widened by three bandwidths of the widest fit
            let pooled = risks.iter().flat_map(|r| r.as_slice().iter().copied());
            let (min, max) = pooled.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let pad = risks.iter().map(|r| 3.0 * bandwidth(r, rule)).fold(0.05 * (max - min), f64::max).max(1e-3);
            CurveGrid {
                t_min: lo.unwrap_or(min - pad),
                t_max: hi.unwrap_or(max + pad),
                points: c.points.unwrap_or_default(),
            }
        }
    };
    let per_level: Vec<Vec<CurvePoint<f64>>> =
        risks.par_iter().map(|r| risk_curve(r, cfg.estimator(), rule, grid)).collect::<qrm_core::Result<_>>()?;
    let mut columns = vec!["t".to_string()];
    for (level, _) in &trained {
        columns.push(format!("pdf_{}", level_tag(level)));
        columns.push(format!("cdf_{}", level_tag(level)));
    }
    let rows = (0..grid.points)
        .map(|i| {
            std::iter::once(per_level[0][i].t).chain(per_level.iter().flat_map(|c| [c[i].pdf, c[i].cdf])).collect()
        })
        .collect();
    for ((level, _), pts) in trained.iter().zip(&per_level) {
        out.csv(&format!("curve_{}.csv", level_tag(level)), |w| write_curve_csv(pts, w))?;
    }
    let table = Table::new(columns, rows);
    out.table("curves.csv", &table)?;
    out.plot("pdf.svg", &table, PlotKind::Pdf)?;
    out.plot("cdf.svg", &table, PlotKind::Cdf)
}

fn coefficients(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (_, domains) = training_domains(cfg, 0)?;
    let trained = train_levels(cfg, &domains)?;
    let mut rows = Vec::new();
    let mut plot_rows = Vec::new();
    for (level, o) in &trained {
        let b = &o.predictor.weights;
        rows.push(vec![level.alpha().to_string(), level.ln_tail().to_string(), b[0].to_string(), b[1].to_string()]);
        plot_rows.push(vec![-level.ln_tail() / std::f64::consts::LN_10, b[0], b[1]]);
    }
    out.records("coefficients.csv", &["alpha", "ln_tail", "beta1", "beta2"], &rows)?;
    let columns = ["neg_log10_tail", "beta1", "beta2"].map(String::from).to_vec();
    out.plot("coefficients.svg", &Table::new(columns, plot_rows), PlotKind::Line)?;
    for (level, o) in &trained {
        out.csv(&format!("trajectory_{}.csv", level_tag(level)), |w| write_trajectory_csv(&o.trajectory, w))?;
    }
    Ok(())
}

fn qq(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let q = cfg.qq.as_ref().expect("resolved qq section");
    let fam = cfg.family();
    let level = cfg.levels()?[0];
    let settings = QqSettings { alpha: level, kind: cfg.estimator(), rule: cfg.bandwidth_rule()? };
    let p = Predictor::linear(q.beta.clone().unwrap_or_default());
    let m_values = q.m_values.clone().unwrap_or_default();
    let m_ref = q.m_reference.unwrap_or_default();
    let seeds: Vec<u64> = (0..q.seeds.unwrap_or_default() as u64).map(|s| cell_seed(cfg.seed(), "qq", s)).collect();

    let cells: Vec<(usize, u64)> = m_values.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let gaps: Vec<f64> =
        cells.par_iter().map(|&(m, s)| qq_gap(&fam, &p, &settings, m, m_ref, s)).collect::<qrm_core::Result<_>>()?;
    let rows: Vec<QqRow<f64>> = m_values
        .iter()
        .zip(gaps.chunks(seeds.len()))
        .map(|(&m, g)| QqRow { m, mean_gap: g.iter().sum::<f64>() / g.len() as f64 })
        .collect();
    out.csv("qq.csv", |w| write_qq_csv(&rows, w))?;
    let gap_table =
        Table::new(vec!["m".into(), "mean_gap".into()], rows.iter().map(|r| vec![r.m as f64, r.mean_gap]).collect());
    out.plot("qq.svg", &gap_table, PlotKind::Line)?;

    // quantile pairs against the reference sample of the first seed
    let levels: Vec<f64> = (1..20).map(|i| f64::from(i) / 20.0).collect();
    let quantiles = |envs: &EnvironmentSet<f64>| -> Result<Vec<f64>> {
        let model = fit(&domain_risks(&p, &TrainingDomains::Analytic(envs.clone()))?, settings.kind, settings.rule)?;
        Ok(levels.iter().map(|&a| icdf(&model, AlphaLevel::Prob(a))).collect::<qrm_core::Result<_>>()?)
    };
    let reference = quantiles(&sample_environments(m_ref, &fam, seeds[0])?)?;
    let smaller: Vec<usize> = m_values.iter().copied().filter(|&m| m < m_ref).collect();
    let fitted: Vec<Vec<f64>> = smaller
        .par_iter()
        .map(|&m| quantiles(&sample_environments(m, &fam, cell_seed(cfg.seed(), "qq-quantiles", m as u64))?))
        .collect::<Result<_>>()?;
    let mut columns = vec!["reference".to_string()];
    columns.extend(smaller.iter().map(|m| format!("m_{m}")));
    let rows =
        (0..levels.len()).map(|i| std::iter::once(reference[i]).chain(fitted.iter().map(|f| f[i])).collect()).collect();
    let table = Table::new(columns, rows);
    out.table("quantiles.csv", &table)?;
    out.plot("quantiles.svg", &table, PlotKind::Qq)
}

fn coverage(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let seeds = cfg.coverage.as_ref().and_then(|c| c.seeds).unwrap_or_default() as u64;
    let levels = cfg.levels()?;
    let tc = cfg.train_config();
    let per_seed: Vec<Vec<(f64, f64, f64)>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let (_, domains) = training_domains(cfg, s)?;
            let fresh = TrainingDomains::Analytic(fresh_domains(cfg, s)?);
            levels
                .par_iter()
                .map(|&level| {
                    let obj = cfg.quantile_objective(level);
                    let p = train_on(&domains, sem_init(), &obj, &tc)?.predictor;
                    let r = coverage_experiment(&p, &obj, &domains, &fresh)?;
                    Ok((r.alpha, r.predicted_q, r.fraction_below))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for li in 0..levels.len() {
        for (s, row) in per_seed.iter().enumerate() {
            let (a, q, f) = row[li];
            rows.push(vec![a.to_string(), s.to_string(), q.to_string(), f.to_string()]);
        }
    }
    out.records("coverage.csv", &["alpha", "seed", "predicted_q", "fraction_below"], &rows)?;
    let summary: Vec<Vec<f64>> = levels
        .iter()
        .enumerate()
        .map(|(li, l)| vec![l.alpha(), per_seed.iter().map(|r| r[li].2).sum::<f64>() / seeds as f64])
        .collect();
    let table = Table::new(vec!["alpha".into(), "coverage".into()], summary);
    out.table("coverage_summary.csv", &table)?;
    out.plot("coverage.svg", &table, PlotKind::Qq)
}

fn accuracy(p: &Predictor<f64>, test: &qrm_core::semlab::DomainDataset<f64>) -> f64 {
    let hits = test.rows().filter(|(x, y)| (p.score(x) > 0.0) == (*y > 0.5)).count();
    hits as f64 / test.len() as f64
}

fn color_shape(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let c = cfg.color_shape.as_ref().expect("resolved color_shape section");
    let colors = c.train_colors.clone().unwrap_or_default();
    let p_shape = c.p_shape.unwrap_or_default();
    let n = cfg.train().samples.unwrap_or_default();
    let levels = cfg.levels()?;
    let tc = cfg.train_config();
    // ERM gets the same total budget at the pretraining rate
    let erm_cfg = TrainConfig { steps: tc.pretrain_steps + tc.steps, pretrain_steps: 0, cosine_anneal: false, ..tc };
    let mut methods: Vec<(String, Objective<f64>, TrainConfig<f64>)> = vec![("erm".into(), Objective::Erm, erm_cfg)];
    methods.extend(levels.iter().map(|l| (format!("eqrm_{}", level_tag(l)), cfg.quantile_objective(*l), tc)));

    let per_seed: Vec<Vec<(f64, Vec<f64>)>> = (0..c.seeds.unwrap_or_default() as u64)
        .into_par_iter()
        .map(|s| {
            let sets = colors
                .iter()
                .enumerate()
                .map(|(i, &pc)| {
                    let idx = s * colors.len() as u64 + i as u64;
                    generate_color_shape(
                        &ColorShapeSpec::new(pc, p_shape)?,
                        n,
                        cell_seed(cfg.seed(), "color-shape-train", idx),
                    )
                })
                .collect::<qrm_core::Result<Vec<_>>>()?;
            let domains = TrainingDomains::Sampled(sets);
            let test_spec = ColorShapeSpec::new(c.test_color.unwrap_or_default(), p_shape)?;
            let test = generate_color_shape(
                &test_spec,
                c.test_samples.unwrap_or_default(),
                cell_seed(cfg.seed(), "color-shape-test", s),
            )?;
            methods
                .par_iter()
                .map(|(_, obj, mc)| {
                    let p = train_on(&domains, Predictor::zeros(2, false, Link::Logistic), obj, mc)?.predictor;
                    Ok((accuracy(&p, &test), p.weights))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut columns = vec!["seed".to_string()];
    columns.extend(methods.iter().map(|(name, _, _)| name.clone()));
    let rows: Vec<Vec<f64>> = per_seed
        .iter()
        .enumerate()
        .map(|(s, r)| std::iter::once(s as f64).chain(r.iter().map(|(a, _)| *a)).collect())
        .collect();
    let table = Table::new(columns, rows);
    out.table("accuracy.csv", &table)?;
    out.plot("accuracy.svg", &table, PlotKind::Line)?;

    let mut rows = Vec::new();
    for (s, r) in per_seed.iter().enumerate() {
        for ((name, _, _), (_, wts)) in methods.iter().zip(r) {
            rows.push(vec![s.to_string(), name.clone(), wts[0].to_string(), wts[1].to_string()]);
        }
    }
    out.records("weights.csv", &["seed", "method", "w_color", "w_shape"], &rows)?;

    let rows: Vec<Vec<String>> = methods
        .iter()
        .enumerate()
        .map(|(k, (name, _, _))| {
            let acc: Vec<f64> = per_seed.iter().map(|r| r[k].0).collect();
            let sd = if acc.len() > 1 { sample_std(&acc) } else { 0.0 };
            vec![name.clone(), mean(&acc).to_string(), sd.to_string()]
        })
        .collect();
    out.records("summary.csv", &["method", "mean_accuracy", "std_accuracy"], &rows)
}

/// Verifier result as `key: value` lines, shared by the `verify` subcommand.
pub fn verify_lines(
    moments: &[qrm_core::semlab::Moments<f64>],
    opts: VerifyOptions<f64>,
) -> Result<Vec<(String, String)>> {
    let r = verify_unique_invariant_minimum(moments, opts)?;
    let witness = r.witness.map(|w| w.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")).unwrap_or_default();
    Ok(vec![
        ("unique".into(), r.unique.to_string()),
        ("inconclusive".into(), r.inconclusive.to_string()),
        ("residual".into(), r.residual.to_string()),
        ("threshold".into(), r.threshold.to_string()),
        ("witness".into(), witness),
    ])
}

fn verify(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let v = cfg.verify.as_ref().expect("resolved verify section");
    let moments = fixtures::moments(cfg.verify_source())?;
    let opts = VerifyOptions {
        tolerance: v.tolerance.unwrap_or_default(),
        restarts: v.restarts.unwrap_or_default(),
        seed: cell_seed(cfg.seed(), "verify", 0),
    };
    let lines = verify_lines(&moments, opts)?;
    let name = v.fixture.clone().filter(|_| v.domains.is_none()).unwrap_or_else(|| "custom".into());
    let header: Vec<&str> = std::iter::once("fixture").chain(lines.iter().map(|(k, _)| k.as_str())).collect();
    let row: Vec<String> = std::iter::once(name).chain(lines.iter().map(|(_, v)| v.clone())).collect();
    out.records("verify.csv", &header, &[row])
}
