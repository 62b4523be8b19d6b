//! Search spaces and points within them.
//!
//! All surrogate and policy math happens in the normalized unit cube; raw
//! parameter units appear only at I/O boundaries. Log-scaled dimensions map
//! through log-ratio so kernel length-scales stay scale-free.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

/// One continuous dimension of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl ParamSpec {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            lower,
            upper,
            scale: Scale::Linear,
        }
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            lower,
            upper,
            scale: Scale::Log,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::InvalidSpace(format!(
                "parameter `{}` has non-finite bounds",
                self.name
            )));
        }
        if self.lower >= self.upper {
            return Err(Error::InvalidSpace(format!(
                "parameter `{}` requires lower < upper, got [{}, {}]",
                self.name, self.lower, self.upper
            )));
        }
        if self.scale == Scale::Log && self.lower <= 0.0 {
            return Err(Error::InvalidSpace(format!(
                "log-scaled parameter `{}` requires lower > 0, got {}",
                self.name, self.lower
            )));
        }
        Ok(())
    }
}

/// Ordered collection of parameter specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace("space needs at least one parameter".into()));
        }
        for spec in &params {
            spec.validate()?;
        }
        for (i, a) in params.iter().enumerate() {
            if params[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate parameter name `{}`",
                    a.name
                )));
            }
        }
        Ok(SearchSpace { params })
    }

    /// `dim` linear dimensions named x0..x{dim-1} over `[lower, upper]`.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        SearchSpace::new(
            (0..dim)
                .map(|i| ParamSpec::linear(&format!("x{i}"), lower, upper))
                .collect(),
        )
    }

    /// The unit hypercube, handy in tests.
    pub fn unit(dim: usize) -> Self {
        SearchSpace::uniform(dim, 0.0, 1.0).expect("unit cube is always valid")
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn contains(&self, x: &ParamVector) -> bool {
        x.len() == self.dim()
            && x.values()
                .iter()
                .zip(&self.params)
                .all(|(&v, spec)| v >= spec.lower && v <= spec.upper && v.is_finite())
    }

    /// Uniform draw in raw units (uniform in the normalized cube, so
    /// log-scaled dimensions are log-uniform).
    pub fn sample_uniform<R: rand::Rng>(&self, rng: &mut R) -> ParamVector {
        let u: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        denormalize(&u, self).expect("uniform cube point denormalizes")
    }
}

/// A point in a search space, in raw (unnormalized) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Map a raw point into the unit cube.
pub fn normalize(x: &ParamVector, space: &SearchSpace) -> Result<Vec<f64>> {
    if x.len() != space.dim() {
        return Err(Error::Protocol(format!(
            "point has {} values, space has {} dimensions",
            x.len(),
            space.dim()
        )));
    }
    x.values()
        .iter()
        .zip(space.params())
        .map(|(&v, spec)| {
            if !(v >= spec.lower && v <= spec.upper) {
                return Err(Error::OutOfBounds {
                    name: spec.name.clone(),
                    value: v,
                    lower: spec.lower,
                    upper: spec.upper,
                });
            }
            Ok(match spec.scale {
                Scale::Linear => (v - spec.lower) / (spec.upper - spec.lower),
                Scale::Log => (v.ln() - spec.lower.ln()) / (spec.upper.ln() - spec.lower.ln()),
            })
        })
        .collect()
}

/// Inverse of [`normalize`]. Results are clamped into bounds to absorb
/// round-off at the edges of the cube.
pub fn denormalize(u: &[f64], space: &SearchSpace) -> Result<ParamVector> {
    if u.len() != space.dim() {
        return Err(Error::Protocol(format!(
            "cube point has {} values, space has {} dimensions",
            u.len(),
            space.dim()
        )));
    }
    let values = u
        .iter()
        .zip(space.params())
        .enumerate()
        .map(|(i, (&c, spec))| {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::OutOfUnitCube { index: i, value: c });
            }
            let raw = match spec.scale {
                Scale::Linear => spec.lower + c * (spec.upper - spec.lower),
                Scale::Log => (spec.lower.ln() + c * (spec.upper.ln() - spec.lower.ln())).exp(),
            };
            Ok(raw.clamp(spec.lower, spec.upper))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ParamVector(values))
}
