use serde::{Deserialize, Serialize};

use crate::domain::{DomainGeometry, Point};
use crate::error::{Error, Result};

/// `n` points of a domain, carrying the uniform empirical measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub domain: DomainGeometry,
    pub points: Vec<Point>,
}

impl EmpiricalSample {
    pub fn new(domain: DomainGeometry, points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !domain.contains(p)) {
            return Err(Error::InvalidArgument(format!("point {:?} outside {domain}", p.0)));
        }
        Ok(EmpiricalSample { domain, points })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// First coordinates (the whole sample in one dimension).
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x()).collect()
    }

    /// The midpoint grid with `k` nodes per axis, as a sample.
    pub fn grid(domain: DomainGeometry, k: usize) -> Result<Self> {
        let points = domain.quadrature_grid(k)?.into_iter().map(|(p, _)| p).collect();
        Ok(EmpiricalSample { domain, points })
    }
}
