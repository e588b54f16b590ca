//! Domain sets for the causal verifier: built-in fixtures or listed domains.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use qrm_core::semlab::{Covariate, DomainSpec, InterventionKind, Moments};

use crate::config::{input_error, DomainEntry, InputError};

pub const NAMES: [&str; 4] = ["two-noise", "root-only", "hard-x2", "descendant-twins"];

pub enum Source<'a> {
    Named(&'a str),
    Domains(&'a [DomainEntry]),
}

fn example_domain(sigma2: f64) -> DomainSpec<f64> {
    DomainSpec::new(1.0, 2.0_f64.sqrt(), sigma2).expect("valid fixture")
}

fn named(name: &str) -> Result<Vec<Moments<f64>>> {
    Ok(match name {
        // noise on the effect varies: only the causal coefficient is invariant
        "two-noise" => vec![Moments::from_spec(&example_domain(0.5)), Moments::from_spec(&example_domain(2.0))],
        // no descendant of the label: zero cross moments, full-rank covariance
        "root-only" => vec![Moments::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![0.0, 0.0])?],
        "hard-x2" => vec![
            Moments::from_spec(&example_domain(1.0)),
            Moments::from_spec(&example_domain(1.0).with_intervention(Covariate::X2, InterventionKind::Hard, 2.0)?),
        ],
        // a descendant whose distribution never changes cannot be ruled out
        "descendant-twins" => {
            let (rho, sy2) = (0.4, 1.0);
            let vy = 2.0 + 2.0 * rho + sy2;
            let m = Moments::new(
                vec![vec![1.0, rho, 1.0 + rho], vec![rho, 1.0, 1.0 + rho], vec![1.0 + rho, 1.0 + rho, vy + 0.5]],
                vec![0.0, 0.0, sy2],
            )?;
            vec![m.clone(), m]
        }
        other => return input_error(format!("unknown fixture {other:?}; expected one of {}", NAMES.join(", "))),
    })
}

fn from_entries(entries: &[DomainEntry]) -> Result<Vec<Moments<f64>>> {
    if entries.is_empty() {
        return input_error("fixture lists no domains");
    }
    entries
        .iter()
        .map(|e| {
            let bad = |err: qrm_core::QrmError| InputError(format!("invalid domain: {err}"));
            let mut spec = DomainSpec::new(e.sigma1, e.sigma_y, e.sigma2).map_err(bad)?;
            if let Some(i) = &e.intervention {
                let target: Covariate = i.target.parse().map_err(bad)?;
                let kind: InterventionKind = i.kind.parse().map_err(bad)?;
                spec = spec.with_intervention(target, kind, i.value).map_err(bad)?;
            }
            Ok(Moments::from_spec(&spec))
        })
        .collect()
}

pub fn moments(source: Source<'_>) -> Result<Vec<Moments<f64>>> {
    match source {
        Source::Named(name) => named(name),
        Source::Domains(d) => from_entries(d),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    domains: Vec<DomainEntry>,
}

/// A built-in fixture name, or a TOML file with `[[domains]]` entries.
pub fn load(arg: &str) -> Result<Vec<Moments<f64>>> {
    if NAMES.contains(&arg) || !Path::new(arg).exists() {
        return named(arg);
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
    let file: FixtureFile = toml::from_str(&text).map_err(|e| InputError(format!("invalid fixture file: {e}")))?;
    from_entries(&file.domains)
}
