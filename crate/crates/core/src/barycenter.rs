//! Weighted center of mass in the hyperbolic plane: the unique minimizer of
//! `H_μ(x) = Σ mᵢ β(x, yᵢ)²`.
//!
//! All iteration happens in the disc with the curvature −1 metric. The
//! minimizer does not depend on the normalization of β, so the model's own
//! normalization is applied only when values and residuals are reported.

use crate::error::{Error, Result};
use crate::geometry::{self, natural_to_beta, Model, ModelPoint};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPointSet {
    atoms: Vec<ModelPoint>,
    masses: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(atoms: Vec<ModelPoint>, masses: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != masses.len() {
            return Err(Error::Usage("need as many masses as atoms, at least one".into()));
        }
        let model = atoms[0].model;
        for a in &atoms {
            if a.model != model {
                return Err(Error::Usage("atoms from different models".into()));
            }
            a.check()?;
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Usage("masses must be positive".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Usage(format!("masses sum to {total}, not 1")));
        }
        Ok(WeightedPointSet { atoms, masses })
    }

    /// Equal masses `1/n`.
    pub fn uniform(atoms: Vec<ModelPoint>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn model(&self) -> Model {
        self.atoms[0].model
    }

    pub fn atoms(&self) -> &[ModelPoint] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn disc_atoms(&self) -> Vec<C64> {
        self.atoms.iter().map(|a| geometry::to_disc(a).value).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarycenterResult {
    pub center: ModelPoint,
    /// `H_μ(center)` in the model's normalization.
    pub value: f64,
    pub iterations: usize,
    /// Norm of the first variation, model normalization.
    pub residual: f64,
}

/// Tangent vector at 0 pointing to `u`, curvature −1 length.
fn log0(u: C64) -> C64 {
    let r = u.norm();
    if r == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        u * (2.0 * r.atanh() / r)
    }
}

fn exp0(v: C64) -> C64 {
    let r = v.norm();
    if r == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        v * ((0.5 * r).tanh() / r)
    }
}

fn h_natural(atoms: &[C64], masses: &[f64], x: C64) -> f64 {
    atoms
        .iter()
        .zip(masses)
        .map(|(&y, &m)| {
            let d = geometry::natural_disc(x, y);
            m * d * d
        })
        .sum()
}

/// Merges bitwise-equal atoms, keeping first-seen order.
fn group(atoms: &[C64], masses: &[f64]) -> (Vec<C64>, Vec<f64>) {
    let mut keyed: Vec<(u64, u64, usize)> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.re.to_bits(), a.im.to_bits(), i))
        .collect();
    keyed.sort_unstable();
    let mut first_of = vec![usize::MAX; atoms.len()];
    let mut k = 0;
    while k < keyed.len() {
        let mut e = k;
        while e < keyed.len() && keyed[e].0 == keyed[k].0 && keyed[e].1 == keyed[k].1 {
            e += 1;
        }
        let lead = keyed[k..e].iter().map(|t| t.2).min().expect("non-empty run");
        for t in &keyed[k..e] {
            first_of[t.2] = lead;
        }
        k = e;
    }
    let mut out_a = Vec::new();
    let mut out_m = Vec::new();
    let mut slot = vec![usize::MAX; atoms.len()];
    for i in 0..atoms.len() {
        let lead = first_of[i];
        if slot[lead] == usize::MAX {
            slot[lead] = out_a.len();
            out_a.push(atoms[lead]);
            out_m.push(0.0);
        }
        out_m[slot[lead]] += masses[i];
    }
    (out_a, out_m)
}

/// Raw disc barycenter: `(center, iterations, residual in natural units)`.
///
/// Masses need not be normalized. A measure with one distinct atom returns
/// that atom bit for bit.
pub fn barycenter_disc(atoms: &[C64], masses: &[f64], tol_natural: f64, max_iter: usize) -> Result<(C64, usize, f64)> {
    if atoms.is_empty() {
        return Err(Error::Usage("empty measure".into()));
    }
    let (atoms, mut masses) = group(atoms, masses);
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    if atoms.len() == 1 {
        return Ok((atoms[0], 0, 0.0));
    }
    let mut c = atoms
        .iter()
        .zip(&masses)
        .map(|(&a, &m)| a * m)
        .sum::<C64>();
    let first_variation = |c: C64| -> C64 {
        atoms
            .iter()
            .zip(&masses)
            .map(|(&y, &m)| log0(geometry::mobius_to_origin(c, y)) * m)
            .sum()
    };
    let mut h = h_natural(&atoms, &masses, c);
    let mut v = first_variation(c);
    let mut step: f64 = 1.0;
    for it in 0..max_iter {
        let res = v.norm();
        if res <= tol_natural {
            return Ok((c, it, res));
        }
        // damped until H drops; near the minimum H is flat to rounding, so a
        // smaller first variation also counts as progress
        loop {
            let cand = geometry::mobius_from_origin(c, exp0(v * step));
            let h_new = h_natural(&atoms, &masses, cand);
            let v_new = first_variation(cand);
            if h_new < h || v_new.norm() < res || step < 1e-12 {
                c = cand;
                h = h_new;
                v = v_new;
                break;
            }
            step *= 0.5;
        }
        step = (step * 2.0).min(1.0);
    }
    if v.norm() <= tol_natural {
        return Ok((c, max_iter, v.norm()));
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: v.norm(),
    })
}

/// `Σ mᵢ β(x, yᵢ)²` in the model's normalization.
pub fn karcher_value(mu: &WeightedPointSet, x: &ModelPoint) -> Result<f64> {
    let mut total = 0.0;
    for (a, &m) in mu.atoms.iter().zip(&mu.masses) {
        let b = geometry::hyp_distance(x, a)?;
        total += m * b * b;
    }
    Ok(total)
}

pub fn barycenter(mu: &WeightedPointSet, tol: f64, max_iter: usize) -> Result<BarycenterResult> {
    let model = mu.model();
    // first variation scales like the metric
    let tol_natural = geometry::beta_to_natural(model, tol);
    let (c, iterations, res) = barycenter_disc(&mu.disc_atoms(), &mu.masses, tol_natural, max_iter)?;
    let center = match model {
        Model::Disc => ModelPoint { value: c, model },
        Model::HalfPlane => {
            // single atoms come back untouched
            let single = mu.atoms.iter().all(|a| a.value == mu.atoms[0].value);
            let value = if single {
                mu.atoms[0].value
            } else {
                geometry::cayley_disc_to_hp(c)
            };
            ModelPoint { value, model }
        }
    };
    Ok(BarycenterResult {
        value: karcher_value(mu, &center)?,
        center,
        iterations,
        residual: natural_to_beta(model, res),
    })
}

/// `d(y,z)² + d(y′,z′)² + 2d(y,y′)d(z,z′) − d(y,z′)² − d(y′,z)²`.
pub fn reshetnyak_slack(y: &ModelPoint, y2: &ModelPoint, z: &ModelPoint, z2: &ModelPoint) -> Result<f64> {
    let d = geometry::hyp_distance;
    let (yz, y2z2, yy2, zz2) = (d(y, z)?, d(y2, z2)?, d(y, y2)?, d(z, z2)?);
    let (yz2, y2z) = (d(y, z2)?, d(y2, z)?);
    Ok(yz * yz + y2z2 * y2z2 + 2.0 * yy2 * zz2 - yz2 * yz2 - y2z * y2z)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Compares `β(c_f, c_g)` with `Σ |cellᵢ| β(fᵢ, gᵢ)` for step maps on a common partition.
pub fn contraction_check(
    f: &[ModelPoint],
    g: &[ModelPoint],
    cells: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ContractionCheck> {
    if f.len() != g.len() || f.len() != cells.len() {
        return Err(Error::Usage("step maps and partition differ in length".into()));
    }
    let cf = barycenter(&WeightedPointSet::new(f.to_vec(), cells.to_vec())?, tol, max_iter)?;
    let cg = barycenter(&WeightedPointSet::new(g.to_vec(), cells.to_vec())?, tol, max_iter)?;
    let lhs = geometry::hyp_distance(&cf.center, &cg.center)?;
    let mut rhs = 0.0;
    for i in 0..f.len() {
        rhs += cells[i] * geometry::hyp_distance(&f[i], &g[i])?;
    }
    Ok(ContractionCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 10.0 * tol,
    })
}
