//! Simulation harness: dataset container, data generation under the clean and
//! contaminated schemes, replication orchestration, metrics and CSV plumbing.

mod datagen;
mod io;
mod metrics;
mod pipeline;
mod runner;

pub use datagen::{gen_clean, gen_contaminated};
pub use io::{read_data_csv, write_data_csv, write_rep_records, write_aggregates};
pub use metrics::{medse_eta, mse_beta, mse_eta};
pub use pipeline::{fit_dataset, EstimatorKind, FullFit, PipelineOptions};
pub use runner::{run_replications, RepRecord, SimResult};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A regression sample: responses `y`, covariates `x` stored row-major
/// (`n × q`), and per-observation case weights (all 1 unless a reweighted
/// refit, e.g. the EIF oracle, is in play).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub q: usize,
    pub w: Vec<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Vec<f64>, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidInput("q must be at least 1".into()));
        }
        if x.len() != y.len() * q {
            return Err(Error::InvalidInput(format!(
                "x has {} entries, expected {} rows x {} columns",
                x.len(),
                y.len(),
                q
            )));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in dataset".into()));
        }
        let n = y.len();
        Ok(Dataset {
            y,
            x,
            q,
            w: vec![1.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }

    #[inline]
    pub fn proj_row(&self, beta: &[f64], i: usize) -> f64 {
        self.x_row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    pub fn projections(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.proj_row(beta, i)).collect()
    }

    /// Append one observation with the given case weight.
    pub fn push(&mut self, y0: f64, x0: &[f64], w0: f64) {
        assert_eq!(x0.len(), self.q);
        self.y.push(y0);
        self.x.extend_from_slice(x0);
        self.w.push(w0);
    }

    /// Rows selected by `keep` (used by cross-validation folds).
    pub fn subset(&self, keep: &[usize]) -> Dataset {
        let mut y = Vec::with_capacity(keep.len());
        let mut x = Vec::with_capacity(keep.len() * self.q);
        let mut w = Vec::with_capacity(keep.len());
        for &i in keep {
            y.push(self.y[i]);
            x.extend_from_slice(self.x_row(i));
            w.push(self.w[i]);
        }
        Dataset { y, x, q: self.q, w }
    }

    /// Rotate covariates: `x ↦ R x` with `R` given row-major `q × q`.
    pub fn rotated(&self, r: &[f64]) -> Dataset {
        let q = self.q;
        assert_eq!(r.len(), q * q);
        let mut x = vec![0.0; self.x.len()];
        for i in 0..self.n() {
            let row = self.x_row(i);
            for a in 0..q {
                let mut acc = 0.0;
                for b in 0..q {
                    acc += r[a * q + b] * row[b];
                }
                x[i * q + a] = acc;
            }
        }
        Dataset {
            y: self.y.clone(),
            x,
            q,
            w: self.w.clone(),
        }
    }
}

/// Contamination schemes of the numerical study. `C0` is the clean model;
/// `M*` shift 10% of responses by `log k` and re-route the signal through the
/// direction orthogonal to the true index (k = 3, 4, 5); `S*` replace 10% of
/// responses by `log k + ε` outright (k = 100, 500, 1000).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    C0,
    M1,
    M2,
    M3,
    S1,
    S2,
    S3,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::C0,
        Scheme::M1,
        Scheme::M2,
        Scheme::M3,
        Scheme::S1,
        Scheme::S2,
        Scheme::S3,
    ];

    /// The shift constant k, if contaminated.
    pub fn k(&self) -> Option<f64> {
        match self {
            Scheme::C0 => None,
            Scheme::M1 => Some(3.0),
            Scheme::M2 => Some(4.0),
            Scheme::M3 => Some(5.0),
            Scheme::S1 => Some(100.0),
            Scheme::S2 => Some(500.0),
            Scheme::S3 => Some(1000.0),
        }
    }

    pub fn is_moderate(&self) -> bool {
        matches!(self, Scheme::M1 | Scheme::M2 | Scheme::M3)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::C0 => "C0",
            Scheme::M1 => "M1",
            Scheme::M2 => "M2",
            Scheme::M3 => "M3",
            Scheme::S1 => "S1",
            Scheme::S2 => "S2",
            Scheme::S3 => "S3",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C0" => Ok(Scheme::C0),
            "M1" => Ok(Scheme::M1),
            "M2" => Ok(Scheme::M2),
            "M3" => Ok(Scheme::M3),
            "S1" => Ok(Scheme::S1),
            "S2" => Ok(Scheme::S2),
            "S3" => Ok(Scheme::S3),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Named link functions for data generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFn {
    Sin2pi,
    Linear,
    Flat,
}

impl LinkFn {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            LinkFn::Sin2pi => (2.0 * std::f64::consts::PI * u).sin(),
            LinkFn::Linear => u,
            LinkFn::Flat => 0.0,
        }
    }
}

/// An equidistant bandwidth grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        GridSpec { lo, hi, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.lo + step * k as f64).collect()
    }

    /// Parse the CLI syntax `lo:hi:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "grid must be lo:hi:count, got '{s}'"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad grid lower bound '{}'", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad grid upper bound '{}'", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad grid count '{}'", parts[2])))?;
        if !(lo > 0.0) || hi < lo || count == 0 {
            return Err(Error::Config(format!("degenerate grid '{s}'")));
        }
        Ok(GridSpec { lo, hi, count })
    }
}

/// Monte Carlo study configuration. JSON keys match the field names; CLI
/// flags override individual entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub n_reps: usize,
    pub q: usize,
    pub gamma0: f64,
    pub beta0: Vec<f64>,
    pub link: LinkFn,
    pub scheme: Scheme,
    pub k_folds: usize,
    pub h1_grid: GridSpec,
    pub h2_grid: GridSpec,
    pub losses: Vec<EstimatorKind>,
    pub base_seed: u64,
    pub tau_mode: crate::estimator::TauMode,
    pub output: Option<String>,
}

impl Default for SimConfig {
    /// Desk-scale defaults: 100 replications and 5-point CV grids. The
    /// full-scale study (1000 replications, 13/25-point grids) is opt-in.
    fn default() -> Self {
        let s = 1.0 / 2.0f64.sqrt();
        SimConfig {
            n: 100,
            n_reps: 100,
            q: 2,
            gamma0: 3.0,
            beta0: vec![s, s],
            link: LinkFn::Sin2pi,
            scheme: Scheme::C0,
            k_folds: 5,
            h1_grid: GridSpec::new(0.05, 0.35, 5),
            h2_grid: GridSpec::new(0.05, 0.35, 5),
            losses: vec![EstimatorKind::Classical, EstimatorKind::Robust],
            base_seed: 1,
            tau_mode: crate::estimator::TauMode::Indicator,
            output: None,
        }
    }
}

impl SimConfig {
    /// Switch to the full-scale study layout (1000 replications, 13-point
    /// initial and 25-point final bandwidth grids).
    pub fn full_scale(mut self) -> Self {
        self.n_reps = 1000;
        self.h1_grid = GridSpec::new(0.05, 0.35, 13);
        self.h2_grid = GridSpec::new(0.05, 0.35, 25);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta0.len() != self.q {
            return Err(Error::Config(format!(
                "beta0 has {} entries but q = {}",
                self.beta0.len(),
                self.q
            )));
        }
        let norm: f64 = self.beta0.iter().map(|b| b * b).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!("beta0 must be unit, |beta0| = {norm}")));
        }
        if self.scheme.is_moderate() && self.q != 2 {
            return Err(Error::Config(
                "moderate contamination schemes are defined for q = 2".into(),
            ));
        }
        if self.k_folds < 2 || self.k_folds > self.n {
            return Err(Error::Config(format!(
                "k_folds = {} out of range for n = {}",
                self.k_folds, self.n
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parse_and_values() {
        let g = GridSpec::parse("0.05:0.35:13").unwrap();
        let v = g.values();
        assert_eq!(v.len(), 13);
        assert!((v[0] - 0.05).abs() < 1e-15);
        assert!((v[12] - 0.35).abs() < 1e-15);
        assert!((v[1] - v[0] - 0.025).abs() < 1e-12);
        assert!(GridSpec::parse("0.05:0.35").is_err());
        assert!(GridSpec::parse("a:b:c").is_err());
    }

    #[test]
    fn dataset_shape_checks() {
        assert!(Dataset::new(vec![1.0, 2.0], vec![0.1; 4], 2).is_ok());
        assert!(Dataset::new(vec![1.0, 2.0], vec![0.1; 3], 2).is_err());
        assert!(Dataset::new(vec![f64::NAN], vec![0.1; 2], 2).is_err());
    }

    #[test]
    fn config_roundtrip_json() {
        let cfg = SimConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: SimConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.n, cfg.n);
        assert_eq!(back.scheme, cfg.scheme);
        // partial configs pick up defaults
        let partial: SimConfig = serde_json::from_str(r#"{"n": 50, "scheme": "S3"}"#).unwrap();
        assert_eq!(partial.n, 50);
        assert_eq!(partial.scheme, Scheme::S3);
        assert_eq!(partial.n_reps, 100);
    }
}
