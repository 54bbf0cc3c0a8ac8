//! Hyperbolic metric in the unit disc and the upper half-plane.
//!
//! Two normalizations are kept side by side:
//! disc `β = log₂((1+ρ)/(1−ρ))` and half-plane `β = ½·log₂((1+ρ)/(1−ρ))`,
//! where `ρ` is the pseudo-hyperbolic distance of the model.
//! Every distance is routed through `ρ` and the accurate quantity `1 − ρ²`,
//! so points near the boundary do not lose digits.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "disc")]
    Disc,
    #[serde(rename = "halfplane")]
    HalfPlane,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelPoint {
    pub value: C64,
    pub model: Model,
}

impl ModelPoint {
    pub fn new(value: C64, model: Model) -> Result<Self> {
        let p = ModelPoint { value, model };
        p.check()?;
        Ok(p)
    }

    pub fn disc(value: C64) -> Result<Self> {
        Self::new(value, Model::Disc)
    }

    pub fn half_plane(value: C64) -> Result<Self> {
        Self::new(value, Model::HalfPlane)
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.value.re.is_finite()
            && self.value.im.is_finite()
            && match self.model {
                Model::Disc => self.value.norm() < 1.0,
                Model::HalfPlane => self.value.im > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{} is outside the {:?} model",
                self.value, self.model
            )))
        }
    }
}

fn same_model(a: &ModelPoint, b: &ModelPoint) -> Result<Model> {
    if a.model != b.model {
        return Err(Error::Usage(format!(
            "model mismatch: {:?} vs {:?}",
            a.model, b.model
        )));
    }
    a.check()?;
    b.check()?;
    Ok(a.model)
}

/// `(ρ, 1 − ρ²)` for two disc points.
pub fn rho_pair_disc(a: C64, b: C64) -> (f64, f64) {
    let den = (C64::new(1.0, 0.0) - b.conj() * a).norm();
    let rho = (a - b).norm() / den;
    let ma = a.norm();
    let mb = b.norm();
    let one_minus = (1.0 - ma) * (1.0 + ma) * (1.0 - mb) * (1.0 + mb) / (den * den);
    (rho, one_minus)
}

/// `(ρ, 1 − ρ²)` for two half-plane points.
pub fn rho_pair_hp(a: C64, b: C64) -> (f64, f64) {
    let den = (a - b.conj()).norm();
    let rho = (a - b).norm() / den;
    let one_minus = 4.0 * a.im * b.im / (den * den);
    (rho, one_minus)
}

/// `ln((1+ρ)/(1−ρ)) = 2·atanh ρ`, given `ρ` and an accurate `1 − ρ²`.
pub fn natural_from_rho(rho: f64, one_minus_rho2: f64) -> f64 {
    if rho < 0.5 {
        2.0 * rho.atanh()
    } else {
        2.0 * rho.ln_1p() - one_minus_rho2.ln()
    }
}

/// Curvature −1 distance between disc points.
pub fn natural_disc(a: C64, b: C64) -> f64 {
    let (r, m) = rho_pair_disc(a, b);
    natural_from_rho(r, m)
}

/// Curvature −1 distance between half-plane points.
pub fn natural_hp(a: C64, b: C64) -> f64 {
    let (r, m) = rho_pair_hp(a, b);
    natural_from_rho(r, m)
}

/// Disc-normalized β of two disc points.
pub fn beta_disc(a: C64, b: C64) -> f64 {
    natural_disc(a, b) / LN_2
}

/// Half-plane-normalized β of two half-plane points.
pub fn beta_hp(a: C64, b: C64) -> f64 {
    natural_hp(a, b) / (2.0 * LN_2)
}

pub fn natural_to_beta(model: Model, d: f64) -> f64 {
    match model {
        Model::Disc => d / LN_2,
        Model::HalfPlane => d / (2.0 * LN_2),
    }
}

pub fn beta_to_natural(model: Model, b: f64) -> f64 {
    match model {
        Model::Disc => b * LN_2,
        Model::HalfPlane => b * 2.0 * LN_2,
    }
}

pub fn hyp_distance(a: &ModelPoint, b: &ModelPoint) -> Result<f64> {
    Ok(match same_model(a, b)? {
        Model::Disc => beta_disc(a.value, b.value),
        Model::HalfPlane => beta_hp(a.value, b.value),
    })
}

pub fn pseudo_distance(a: &ModelPoint, b: &ModelPoint) -> Result<f64> {
    Ok(match same_model(a, b)? {
        Model::Disc => rho_pair_disc(a.value, b.value).0,
        Model::HalfPlane => rho_pair_hp(a.value, b.value).0,
    })
}

/// Half-plane to disc, `z ↦ (z − i)/(z + i)`.
pub fn cayley_hp_to_disc(z: C64) -> C64 {
    (z - C64::i()) / (z + C64::i())
}

/// Disc to half-plane, `w ↦ i(1 + w)/(1 − w)`.
pub fn cayley_disc_to_hp(w: C64) -> C64 {
    C64::i() * (1.0 + w) / (1.0 - w)
}

/// Moves a point to the other model; applying it twice is the identity.
pub fn cayley(p: &ModelPoint) -> Result<ModelPoint> {
    p.check()?;
    Ok(match p.model {
        Model::HalfPlane => ModelPoint {
            value: cayley_hp_to_disc(p.value),
            model: Model::Disc,
        },
        Model::Disc => ModelPoint {
            value: cayley_disc_to_hp(p.value),
            model: Model::HalfPlane,
        },
    })
}

pub fn to_disc(p: &ModelPoint) -> ModelPoint {
    match p.model {
        Model::Disc => *p,
        Model::HalfPlane => ModelPoint {
            value: cayley_hp_to_disc(p.value),
            model: Model::Disc,
        },
    }
}

pub fn to_half_plane(p: &ModelPoint) -> ModelPoint {
    match p.model {
        Model::HalfPlane => *p,
        Model::Disc => ModelPoint {
            value: cayley_disc_to_hp(p.value),
            model: Model::HalfPlane,
        },
    }
}

/// `τ_a(z) = (z − a)/(1 − āz)`, the disc involution swapping `a` and 0.
pub fn mobius_to_origin(a: C64, z: C64) -> C64 {
    (z - a) / (1.0 - a.conj() * z)
}

pub fn mobius_from_origin(a: C64, w: C64) -> C64 {
    (w + a) / (1.0 + a.conj() * w)
}

/// Point at natural distance `s·|u|` along the ray from 0 through `u`.
fn scale_from_origin(u: C64, s: f64) -> C64 {
    let r = u.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    u * ((s * r.atanh()).tanh() / r)
}

/// Disc geodesic from `a` to `b` at constant speed.
pub fn geodesic_disc(a: C64, b: C64, s: f64) -> C64 {
    let u = mobius_to_origin(a, b);
    mobius_from_origin(a, scale_from_origin(u, s))
}

/// Half-plane geodesic from `a` to `b` at constant speed.
pub fn geodesic_hp(a: C64, b: C64, s: f64) -> C64 {
    let nb = (b - a.re) / a.im;
    let u = cayley_hp_to_disc(nb);
    let p = scale_from_origin(u, s);
    a.re + a.im * cayley_disc_to_hp(p)
}

pub fn geodesic_interpolate(a: &ModelPoint, b: &ModelPoint, s: f64) -> Result<ModelPoint> {
    let model = same_model(a, b)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Usage(format!("geodesic parameter {s} outside [0,1]")));
    }
    if s == 0.0 {
        return Ok(*a);
    }
    if s == 1.0 {
        return Ok(*b);
    }
    let value = match model {
        Model::Disc => geodesic_disc(a.value, b.value, s),
        Model::HalfPlane => geodesic_hp(a.value, b.value, s),
    };
    Ok(ModelPoint { value, model })
}

/// Disc automorphism `z ↦ e^{iθ}(z − a)/(1 − āz)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscAutomorphism {
    pub rotation: f64,
    pub a: C64,
}

impl DiscAutomorphism {
    pub fn apply(&self, z: C64) -> C64 {
        C64::from_polar(1.0, self.rotation) * mobius_to_origin(self.a, z)
    }

    pub fn inverse_apply(&self, w: C64) -> C64 {
        mobius_from_origin(self.a, C64::from_polar(1.0, -self.rotation) * w)
    }
}

/// Hyperbolic area of the euclidean disc `|z| < r`, curvature −1.
pub fn hyperbolic_area_disc(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0,1)")));
    }
    Ok(4.0 * PI * r * r / ((1.0 - r) * (1.0 + r)))
}

/// Hyperbolic area of a disc-normalized ball of radius `beta` (curvature −1).
pub fn hyperbolic_area_ball_disc_beta(beta: f64) -> f64 {
    // (1+ρ)/(1−ρ) = 2^β
    let q = beta.exp2();
    let rho = (q - 1.0) / (q + 1.0);
    4.0 * PI * rho * rho / ((1.0 - rho) * (1.0 + rho))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    pub center: f64,
    pub half_width: f64,
}

impl CircleArc {
    /// Arc length as a fraction of the circle.
    pub fn normalized_length(&self) -> f64 {
        self.half_width / PI
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        let d = (theta - self.center).rem_euclid(2.0 * PI);
        let d = d.min(2.0 * PI - d);
        d < self.half_width || self.half_width >= PI
    }
}

/// Arcs `{ξ ∈ 𝕋 : |z − ξ| < M(1 − |z|)}`; `None` marks an empty arc.
pub fn stolz_projection(points: &[ModelPoint], m: f64) -> Result<Vec<Option<CircleArc>>> {
    if !(m > 1.0) {
        return Err(Error::Usage(format!("aperture {m} must exceed 1")));
    }
    points
        .iter()
        .map(|p| {
            if p.model != Model::Disc {
                return Err(Error::Usage("stolz projection needs disc points".into()));
            }
            p.check()?;
            let r = p.value.norm();
            let reach = m * (1.0 - r);
            if r == 0.0 {
                return Ok(Some(CircleArc {
                    center: 0.0,
                    half_width: PI,
                }));
            }
            // |z − e^{iθ}|² = 1 + r² − 2r·cos(θ − arg z) < reach²
            let c = (1.0 + r * r - reach * reach) / (2.0 * r);
            if c >= 1.0 {
                Ok(None)
            } else if c <= -1.0 {
                Ok(Some(CircleArc {
                    center: p.value.arg(),
                    half_width: PI,
                }))
            } else {
                Ok(Some(CircleArc {
                    center: p.value.arg(),
                    half_width: c.acos(),
                }))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(re: f64, im: f64) -> ModelPoint {
        ModelPoint::half_plane(C64::new(re, im)).unwrap()
    }

    fn dp(re: f64, im: f64) -> ModelPoint {
        ModelPoint::disc(C64::new(re, im)).unwrap()
    }

    #[test]
    fn frozen_distances() {
        assert!((hyp_distance(&dp(0.0, 0.0), &dp(0.5, 0.0)).unwrap() - 3f64.log2()).abs() < 1e-14);
        assert!((hyp_distance(&hp(0.0, 1.0), &hp(0.0, 2.0)).unwrap() - 0.5).abs() < 1e-14);
        assert!((pseudo_distance(&hp(0.0, 1.0), &hp(0.0, 2.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(hyp_distance(&hp(0.3, 0.2), &hp(0.3, 0.2)).unwrap(), 0.0);
        let w = dp(0.3, -0.4);
        assert!((pseudo_distance(&dp(0.0, 0.0), &w).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn model_errors() {
        assert!(matches!(hyp_distance(&dp(0.0, 0.0), &hp(0.0, 1.0)), Err(Error::Usage(_))));
        let bad = ModelPoint {
            value: C64::new(0.0, -1.0),
            model: Model::HalfPlane,
        };
        assert!(matches!(hyp_distance(&bad, &hp(0.0, 1.0)), Err(Error::Domain(_))));
        assert!(ModelPoint::disc(C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn cayley_examples() {
        let c = cayley(&hp(0.0, 1.0)).unwrap();
        assert_eq!(c.model, Model::Disc);
        assert!(c.value.norm() < 1e-16);
        let p = hp(0.37, 0.012);
        let back = cayley(&cayley(&p).unwrap()).unwrap();
        assert!((back.value - p.value).norm() < 1e-14);
        let d = hyp_distance(&cayley(&hp(0.0, 1.0)).unwrap(), &cayley(&hp(0.0, 2.0)).unwrap()).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
    }

    #[test]
    fn geodesic_examples() {
        let m = geodesic_interpolate(&hp(0.0, 1.0), &hp(0.0, 4.0), 0.5).unwrap();
        assert!((m.value - C64::new(0.0, 2.0)).norm() < 1e-14);
        let a = dp(0.1, 0.2);
        let b = dp(-0.6, 0.3);
        assert_eq!(geodesic_interpolate(&a, &b, 0.0).unwrap(), a);
        assert_eq!(geodesic_interpolate(&a, &b, 1.0).unwrap(), b);
        assert!(matches!(geodesic_interpolate(&a, &b, 1.5), Err(Error::Usage(_))));
        let d = hyp_distance(&a, &b).unwrap();
        for k in 1..10 {
            let s = k as f64 / 10.0;
            let q = geodesic_interpolate(&a, &b, s).unwrap();
            assert!((hyp_distance(&a, &q).unwrap() - s * d).abs() < 1e-12);
        }
    }

    #[test]
    fn area_examples() {
        assert!((hyperbolic_area_disc(0.5).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        for n in 5..=20 {
            let a = hyperbolic_area_disc(1.0 - (-(n as f64)).exp2()).unwrap();
            let c1 = a / (n as f64).exp2();
            assert!((PI..=4.0 * PI).contains(&c1), "n={n} c1={c1}");
        }
        let tiny = hyperbolic_area_disc(1e-6).unwrap();
        assert!((tiny / (4.0 * PI * 1e-12) - 1.0).abs() < 1e-9);
        assert!(hyperbolic_area_disc(1.0).is_err());
    }

    #[test]
    fn stolz_examples() {
        let arcs = stolz_projection(&[dp(0.0, 0.0)], 2.0).unwrap();
        assert_eq!(arcs[0].unwrap().half_width, PI);
        let arcs = stolz_projection(&[dp(0.9, 0.0)], 2.0).unwrap();
        let arc = arcs[0].unwrap();
        assert_eq!(arc.center, 0.0);
        // boundary of the arc solves |0.9 − e^{iθ}| = 0.2
        let edge = C64::from_polar(1.0, arc.half_width);
        assert!(((C64::new(0.9, 0.0) - edge).norm() - 0.2).abs() < 1e-12);
        assert!(stolz_projection(&[], 2.0).unwrap().is_empty());
        assert!(stolz_projection(&[dp(0.5, 0.0)], 1.0).is_err());
    }

    #[test]
    fn stolz_arc_length_scales_with_boundary_distance() {
        let m = 2.0;
        let k = (m * m - 1.0f64).sqrt() / PI;
        for i in 0..200 {
            let r = 0.5 + 0.4999 * i as f64 / 199.0;
            let z = dp(r * 0.3f64.cos(), r * 0.3f64.sin());
            let arc = stolz_projection(&[z], m).unwrap()[0].unwrap();
            let ratio = arc.normalized_length() / (1.0 - r);
            assert!(ratio > 0.5 * k && ratio < 2.0 * k, "r={r} ratio={ratio}");
        }
    }

    #[test]
    fn near_boundary_accuracy() {
        let a = C64::new(0.0, 1e-12);
        let b = C64::new(0.0, 2e-12);
        assert!((beta_hp(a, b) - 0.5).abs() < 1e-12);
        let u = 1.0 - 1e-13;
        let d = beta_disc(C64::new(0.0, 0.0), C64::new(u, 0.0));
        let exact = ((1.0 + u) / 1e-13f64).log2();
        assert!((d - exact).abs() < 1e-3);
    }

    fn disc_point() -> impl proptest::strategy::Strategy<Value = C64> {
        use proptest::prelude::*;
        (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
    }

    proptest::proptest! {
        #[test]
        fn automorphisms_preserve_beta(a in disc_point(), b in disc_point(), c in disc_point(), rot in 0.0..std::f64::consts::TAU) {
            let tau = DiscAutomorphism { rotation: rot, a: c };
            let drift = (beta_disc(tau.apply(a), tau.apply(b)) - beta_disc(a, b)).abs();
            proptest::prop_assert!(drift <= 1e-10 * (1.0 + beta_disc(a, b)), "{}", drift);
        }

        #[test]
        fn half_plane_beta_is_a_metric(
            p in (-2.0..2.0f64, -8.0..2.0f64), q in (-2.0..2.0f64, -8.0..2.0f64), r in (-2.0..2.0f64, -8.0..2.0f64),
        ) {
            let z = |(x, e): (f64, f64)| C64::new(x, e.exp2());
            let (p, q, r) = (z(p), z(q), z(r));
            proptest::prop_assert!(beta_hp(p, r) + beta_hp(r, q) >= beta_hp(p, q) - 1e-9);
            let gap = beta_disc(cayley_hp_to_disc(p), cayley_hp_to_disc(q)) - 2.0 * beta_hp(p, q);
            proptest::prop_assert!(gap.abs() <= 1e-9 * (1.0 + beta_hp(p, q)));
        }
    }
}
