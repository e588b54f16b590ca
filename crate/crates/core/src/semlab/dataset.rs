use std::io::Write;

use crate::error::{domain, QrmError, Result};
use crate::Scalar;

/// Samples of one domain: an `n × d` row-major covariate matrix and `n` labels.
/// Binary labels are stored as `0` / `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset<F> {
    names: Vec<String>,
    covariates: Vec<F>,
    labels: Vec<F>,
}

impl<F: Scalar> DomainDataset<F> {
    pub fn new(names: Vec<String>, covariates: Vec<F>, labels: Vec<F>) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return domain("dataset needs at least one covariate");
        }
        if covariates.len() != labels.len() * d {
            return Err(QrmError::Dimension { expected: labels.len() * d, got: covariates.len() });
        }
        if covariates.iter().chain(&labels).any(|v| !v.is_finite()) {
            return domain("dataset contains non-finite values");
        }
        Ok(Self { names, covariates, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[F] {
        let d = self.dim();
        &self.covariates[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[F], F)> + '_ {
        self.covariates.chunks_exact(self.dim()).zip(self.labels.iter().copied())
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        self.covariates.iter().skip(j).step_by(self.dim()).copied().collect()
    }

    pub fn labels(&self) -> &[F] {
        &self.labels
    }

    /// CSV with one column per covariate followed by `y`. Values use the
    /// shortest representation that parses back to the same float.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| QrmError::Domain(format!("csv write failed: {e}"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("y");
        w.write_record(&header).map_err(io)?;
        let mut record = Vec::with_capacity(self.dim() + 1);
        for (x, y) in self.rows() {
            record.clear();
            record.extend(x.iter().map(|v| v.to_string()));
            record.push(y.to_string());
            w.write_record(&record).map_err(io)?;
        }
        w.flush().map_err(|e| QrmError::Domain(format!("csv flush failed: {e}")))
    }
}
