use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::randvec::RandomVector;

/// How an experimental design was generated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerTag {
    Natural,
    Hdr(f64),
}

impl fmt::Display for SamplerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerTag::Natural => write!(f, "natural"),
            SamplerTag::Hdr(a) => write!(f, "hdr({a})"),
        }
    }
}

impl FromStr for SamplerTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "natural" {
            return Ok(SamplerTag::Natural);
        }
        let inner = t
            .strip_prefix("hdr(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sampler '{s}'")))?;
        let a: f64 = inner.parse().map_err(|_| Error::InvalidArgument(format!("bad alpha in '{s}'")))?;
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {a}")));
        }
        Ok(SamplerTag::Hdr(a))
    }
}

impl Serialize for SamplerTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SamplerTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Training inputs, responses and the input model they refer to.
#[derive(Clone, Debug)]
pub struct ExperimentalDesign {
    x: PointSet,
    y: Vec<f64>,
    rv: RandomVector,
    sampler: SamplerTag,
}

impl ExperimentalDesign {
    pub fn new(x: PointSet, y: Vec<f64>, rv: RandomVector, sampler: SamplerTag) -> Result<Self> {
        let d = rv.dim();
        if x.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
        }
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!("{} inputs but {} responses", x.len(), y.len())));
        }
        if x.len() < d + 1 {
            return Err(Error::InvalidArgument(format!("need at least {} points, got {}", d + 1, x.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("response {i} is not finite")));
        }
        if let Some((i, j)) = find_duplicate(&x, 1e-12) {
            return Err(Error::InvalidArgument(format!("rows {i} and {j} are duplicates")));
        }
        Ok(Self { x, y, rv, sampler })
    }

    pub fn x(&self) -> &PointSet {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    pub fn sampler(&self) -> SamplerTag {
        self.sampler
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Inputs mapped to independent standard-normal space.
    pub fn standard_inputs(&self) -> Result<PointSet> {
        self.rv.to_standard_set(&self.x)
    }

    pub fn response_variance(&self) -> f64 {
        sample_variance(&self.y)
    }

    /// Loads a headerless CSV whose last column holds the responses.
    pub fn from_csv(path: &std::path::Path, rv: RandomVector, sampler: SamplerTag) -> Result<Self> {
        let d = rv.dim();
        let all = PointSet::read_csv(std::fs::File::open(path)?)?;
        if all.dim() != d + 1 {
            return Err(Error::DimensionMismatch { expected: d + 1, got: all.dim() });
        }
        let mut x = PointSet::with_capacity(d, all.len());
        let mut y = Vec::with_capacity(all.len());
        for r in all.rows() {
            x.push(&r[..d])?;
            y.push(r[d]);
        }
        Self::new(x, y, rv, sampler)
    }
}

pub(crate) fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn find_duplicate(x: &PointSet, tol: f64) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x.row(a)[0].total_cmp(&x.row(b)[0]));
    for (k, &i) in order.iter().enumerate() {
        let ri = x.row(i);
        for &j in &order[k + 1..] {
            let rj = x.row(j);
            if rj[0] - ri[0] > tol {
                break;
            }
            if ri.iter().zip(rj).all(|(a, b)| (a - b).abs() <= tol) {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_tag_round_trip() {
        for t in [SamplerTag::Natural, SamplerTag::Hdr(0.01), SamplerTag::Hdr(1e-4)] {
            assert_eq!(t.to_string().parse::<SamplerTag>().unwrap(), t);
        }
        assert!("hdr(1.5)".parse::<SamplerTag>().is_err());
        assert!("lhs".parse::<SamplerTag>().is_err());
    }

    #[test]
    fn validation() {
        let rv = RandomVector::standard_normal(2);
        let x = PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(ExperimentalDesign::new(x.clone(), vec![1.0, 2.0, 3.0], rv.clone(), SamplerTag::Natural).is_ok());
        assert!(ExperimentalDesign::new(x.clone(), vec![1.0, f64::NAN, 3.0], rv.clone(), SamplerTag::Natural).is_err());
        let dup = PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(ExperimentalDesign::new(dup, vec![1.0, 2.0, 3.0], rv.clone(), SamplerTag::Natural).is_err());
        let small = PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(ExperimentalDesign::new(small, vec![1.0, 2.0], rv, SamplerTag::Natural).is_err());
    }
}
