//! Conditional-independence backends with call counting.
//!
//! Two backends share one interface: a graph oracle answering by
//! m-separation in a MAG (infinite-sample semantics), and a Fisher-z partial
//! correlation test over a Gaussian dataset. Every query increments a
//! monotone counter; the counter is the algorithm's cost metric.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::{Dag, Mag};
use crate::msep::m_separated;
use crate::project::latent_project;

/// Outcome of one CI query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiDecision {
    pub independent: bool,
    /// z-statistic; 0 for the oracle.
    pub statistic: f64,
    /// Two-sided p-value; 1 or 0 for the oracle.
    pub p_value: f64,
}

/// Common surface of the oracle and Fisher-z backends.
pub trait CiBackend {
    fn num_vars(&self) -> usize;
    fn var_names(&self) -> &[String];
    /// Is `x` independent of `y` given `z`? Increments the counter.
    fn ci_query(&mut self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision>;
    fn n_tests(&self) -> u64;
}

fn check_query(n_vars: usize, x: usize, y: usize, z: &[usize]) -> Result<()> {
    if x >= n_vars || y >= n_vars || z.iter().any(|&v| v >= n_vars) {
        return Err(Error::InvalidQuery("variable index out of range".into()));
    }
    if x == y {
        return Err(Error::InvalidQuery("x and y must differ".into()));
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(Error::InvalidQuery(
            "conditioning set must not contain x or y".into(),
        ));
    }
    Ok(())
}

/// Infinite-sample oracle: independence iff m-separation in the MAG.
pub struct OracleBackend {
    mag: Mag,
    names: Vec<String>,
    n_tests: u64,
}

impl OracleBackend {
    pub fn from_mag(mag: Mag) -> Self {
        let names = mag.graph().names().to_vec();
        OracleBackend {
            mag,
            names,
            n_tests: 0,
        }
    }

    /// Oracle over the latent projection of a DAG; variables are the
    /// observed nodes in input order.
    pub fn from_dag(dag: &Dag, latents: &[usize]) -> Result<Self> {
        Ok(Self::from_mag(latent_project(dag, latents)?))
    }

    pub fn mag(&self) -> &Mag {
        &self.mag
    }
}

impl CiBackend for OracleBackend {
    fn num_vars(&self) -> usize {
        self.names.len()
    }

    fn var_names(&self) -> &[String] {
        &self.names
    }

    fn ci_query(&mut self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision> {
        check_query(self.names.len(), x, y, z)?;
        self.n_tests += 1;
        let independent = m_separated(self.mag.graph(), x, y, z)?;
        Ok(CiDecision {
            independent,
            statistic: 0.0,
            p_value: if independent { 1.0 } else { 0.0 },
        })
    }

    fn n_tests(&self) -> u64 {
        self.n_tests
    }
}

/// Column-named real matrix with cached means and covariance.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    /// Row-major values, `n` rows by `p` columns.
    data: Vec<f64>,
    n: usize,
    p: usize,
    means: Vec<f64>,
    cov: DMatrix<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, data: Vec<f64>, n: usize) -> Result<Self> {
        let p = names.len();
        if n == 0 || p == 0 || data.len() != n * p {
            return Err(Error::InvalidQuery(format!(
                "dataset shape mismatch: {} values for {n} rows x {p} columns",
                data.len()
            )));
        }
        let mut means = vec![0.0; p];
        for row in 0..n {
            for col in 0..p {
                means[col] += data[row * p + col];
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut cov = DMatrix::zeros(p, p);
        for row in 0..n {
            for i in 0..p {
                let di = data[row * p + i] - means[i];
                for j in i..p {
                    let dj = data[row * p + j] - means[j];
                    cov[(i, j)] += di * dj;
                }
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        for i in 0..p {
            for j in i..p {
                let v = cov[(i, j)] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Dataset {
            names,
            data,
            n,
            p,
            means,
            cov,
        })
    }

    /// Reads a CSV file: header row of column names, float rows below.
    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let names: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut data = Vec::new();
        let mut n = 0usize;
        for rec in rdr.records() {
            let rec = rec?;
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidQuery(format!("non-numeric value `{field}` in CSV"))
                })?;
                data.push(v);
            }
            n += 1;
        }
        Dataset::new(names, data, n)
    }

    pub fn to_csv_path(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.names)?;
        for row in 0..self.n {
            let rec: Vec<String> = (0..self.p)
                .map(|col| format!("{}", self.data[row * self.p + col]))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.p + col]
    }
}

/// Fisher-z partial-correlation test at level `alpha`.
pub struct FisherZBackend {
    data: Dataset,
    alpha: f64,
    threshold: f64,
    normal: Normal,
    n_tests: u64,
}

/// Partial correlations are clamped to this magnitude before the log
/// transform to avoid infinities on (near-)perfectly correlated columns.
const R_CLAMP: f64 = 1.0 - 1e-12;

impl FisherZBackend {
    pub fn new(data: Dataset, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
            return Err(Error::InvalidQuery(format!(
                "alpha must be in (0, 1), got {alpha}"
            )));
        }
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let threshold = normal.inverse_cdf(1.0 - alpha / 2.0);
        Ok(FisherZBackend {
            data,
            alpha,
            threshold,
            normal,
            n_tests: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Partial correlation of `x`, `y` given `z` from the cached covariance:
    /// the unconditional correlation when `z` is empty, otherwise via the
    /// precision matrix of the covariance submatrix over `{x, y} ∪ z`.
    fn partial_correlation(&self, x: usize, y: usize, z: &[usize]) -> Result<f64> {
        let cov = &self.data.cov;
        if z.is_empty() {
            let denom = (cov[(x, x)] * cov[(y, y)]).sqrt();
            if denom <= 0.0 {
                return Err(Error::DegenerateConditioningSet);
            }
            return Ok(cov[(x, y)] / denom);
        }
        let mut idx = Vec::with_capacity(z.len() + 2);
        idx.push(x);
        idx.push(y);
        idx.extend_from_slice(z);
        let k = idx.len();
        let mut sub = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                sub[(i, j)] = cov[(idx[i], idx[j])];
            }
        }
        // Cholesky doubles as the singularity check: covariance submatrices
        // are PSD, so failure means a degenerate conditioning set.
        let chol = sub
            .cholesky()
            .ok_or(Error::DegenerateConditioningSet)?;
        let prec = chol.inverse();
        let denom = (prec[(0, 0)] * prec[(1, 1)]).sqrt();
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::DegenerateConditioningSet);
        }
        Ok(-prec[(0, 1)] / denom)
    }
}

impl CiBackend for FisherZBackend {
    fn num_vars(&self) -> usize {
        self.data.p
    }

    fn var_names(&self) -> &[String] {
        &self.data.names
    }

    fn ci_query(&mut self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision> {
        check_query(self.data.p, x, y, z)?;
        let n = self.data.n;
        if n < z.len() + 4 {
            return Err(Error::InsufficientSampleSize { n, z: z.len() });
        }
        self.n_tests += 1;
        // Canonical index order keeps the statistic bitwise identical under
        // x/y exchange.
        let r = self.partial_correlation(x.min(y), x.max(y), z)?;
        let r = r.clamp(-R_CLAMP, R_CLAMP);
        let dof = (n - z.len() - 3) as f64;
        let statistic = dof.sqrt() * 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        let p_value = 2.0 * (1.0 - self.normal.cdf(statistic.abs()));
        Ok(CiDecision {
            independent: statistic.abs() <= self.threshold,
            statistic,
            p_value,
        })
    }

    fn n_tests(&self) -> u64 {
        self.n_tests
    }
}
