//! Interpolation problems: points, target values, model and ε, with JSON I/O.

use crate::error::{Error, Result};
use crate::geometry::{self, Model, ModelPoint};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationInstance {
    pub model: Model,
    pub points: Vec<C64>,
    pub values: Vec<C64>,
    pub epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    model: Model,
    points: Vec<[f64; 2]>,
    values: Vec<[f64; 2]>,
    epsilon: f64,
}

impl InterpolationInstance {
    pub fn new(model: Model, points: Vec<C64>, values: Vec<C64>, epsilon: f64) -> Result<Self> {
        let inst = InterpolationInstance {
            model,
            points,
            values,
            epsilon,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.values.len() {
            return Err(Error::Schema(format!(
                "{} points but {} values",
                self.points.len(),
                self.values.len()
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Schema(format!("epsilon {} must be positive", self.epsilon)));
        }
        for p in &self.points {
            ModelPoint::new(*p, self.model)?;
        }
        for w in &self.values {
            ModelPoint::disc(*w)?;
        }
        for i in 0..self.points.len() {
            for j in 0..i {
                if self.points[i] == self.points[j] {
                    return Err(Error::Domain(format!("repeated point {}", self.points[i])));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn model_points(&self) -> Vec<ModelPoint> {
        self.points
            .iter()
            .map(|&value| ModelPoint {
                value,
                model: self.model,
            })
            .collect()
    }

    /// Same problem with points moved to the half-plane by the Cayley map.
    pub fn to_half_plane(&self) -> Self {
        let mut out = self.clone();
        if self.model == Model::Disc {
            out.points = self.points.iter().map(|&w| geometry::cayley_disc_to_hp(w)).collect();
            out.model = Model::HalfPlane;
        }
        out
    }

    pub fn to_disc(&self) -> Self {
        let mut out = self.clone();
        if self.model == Model::HalfPlane {
            out.points = self.points.iter().map(|&z| geometry::cayley_hp_to_disc(z)).collect();
            out.model = Model::Disc;
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(text)?;
        let inst = InterpolationInstance {
            model: f.model,
            points: f.points.iter().map(|p| C64::new(p[0], p[1])).collect(),
            values: f.values.iter().map(|p| C64::new(p[0], p[1])).collect(),
            epsilon: f.epsilon,
        };
        inst.validate().map_err(|e| match e {
            Error::Schema(m) => Error::Schema(m),
            other => Error::Schema(other.to_string()),
        })?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let f = InstanceFile {
            model: self.model,
            points: self.points.iter().map(|p| [p.re, p.im]).collect(),
            values: self.values.iter().map(|p| [p.re, p.im]).collect(),
            epsilon: self.epsilon,
        };
        serde_json::to_string_pretty(&f).expect("instance serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::report::write_atomic(path, self.to_json().as_bytes())
    }
}
