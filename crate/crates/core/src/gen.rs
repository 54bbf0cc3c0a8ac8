//! Deterministic instance generators.

use crate::conditions::{compatibility_ratio, density_check, necessity_witness, DensityForm, DensityParams};
use crate::config::RunConfig;
use crate::dyadic::{DyadicInterval, Offset};
use crate::error::{Error, Result};
use crate::geometry::{beta_hp, geodesic_disc, Model, ModelPoint};
use crate::instance::InterpolationInstance;
use crate::interpolant::{hp_point_at, SEED};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `{i·2⁻ᵏ}ₖ₌₀..K` with zero values.
pub fn column(k: u32, epsilon: f64) -> Result<InterpolationInstance> {
    let points = (0..=k).map(|j| C64::new(0.0, (-(j as f64)).exp2())).collect();
    InterpolationInstance::new(Model::HalfPlane, points, vec![ZERO; k as usize + 1], epsilon)
}

/// Every box center of generation `g` under `[0, 1)`.
pub fn full_grid(g: u32, epsilon: f64) -> Result<InterpolationInstance> {
    let n = 1usize << g;
    let points = (0..n as i64)
        .map(|j| DyadicInterval::new(g as i32, j, Offset::ZERO).center())
        .collect();
    InterpolationInstance::new(Model::HalfPlane, points, vec![ZERO; n], epsilon)
}

/// `⌈2^{αg}⌉` evenly spread box centers at each generation `g ≤ depth`,
/// certified by the band-count density check before it is returned.
pub fn lattice(alpha: f64, depth: u32, epsilon: f64, cfg: &RunConfig) -> Result<InterpolationInstance> {
    if !(alpha > 0.0 && alpha < 1.0) || depth > 20 {
        return Err(Error::Usage("lattice needs 0 < α < 1 and depth ≤ 20".into()));
    }
    let mut points = Vec::new();
    for g in 0..=depth {
        let slots = 1i64 << g;
        let m = ((alpha * g as f64).exp2().ceil() as i64).min(slots);
        for i in 0..m {
            let j = ((i as f64 + 0.5) * slots as f64 / m as f64).floor() as i64;
            points.push(DyadicInterval::new(g as i32, j, Offset::ZERO).center());
        }
    }
    let n = points.len();
    let inst = InterpolationInstance::new(Model::HalfPlane, points, vec![ZERO; n], epsilon)?;
    let params = DensityParams {
        m: cfg.density_m,
        alpha: cfg.alpha_max,
    };
    let d = density_check(&inst.model_points(), params, DensityForm::DyadicGeneration, depth.max(1))?;
    if d.fitted_alpha > alpha + 0.1 {
        return Err(Error::Certification(format!(
            "lattice fitted exponent {:.4} exceeds {alpha} + 0.1",
            d.fitted_alpha
        )));
    }
    Ok(inst)
}

/// Three mutually close points: the proximity graph is a triangle.
pub fn cluster(epsilon: f64) -> Result<InterpolationInstance> {
    let c = C64::new(0.5, 0.5);
    let points = (0..3).map(|k| hp_point_at(c, 0.03, 2.0 * PI * k as f64 / 3.0)).collect();
    InterpolationInstance::new(Model::HalfPlane, points, vec![ZERO; 3], epsilon)
}

/// Two-window family on the `n`-th annulus of a disc host that puts
/// `⌈2^{k/2}⌉ + 3` evenly spaced points on the middle circle of annulus `k`.
pub fn witness(n: u32, gamma: f64, epsilon: f64) -> Result<InterpolationInstance> {
    if n == 0 || n > 30 {
        return Err(Error::Usage("witness needs 1 ≤ n ≤ 30".into()));
    }
    let mut host = Vec::new();
    for k in 1..=n + 1 {
        let b = (k as f64 - 0.5).exp2();
        let rho = (b - 1.0) / (b + 1.0);
        let m = (0.5 * k as f64).exp2().ceil() as usize + 3;
        for j in 0..m {
            host.push(C64::from_polar(rho, 2.0 * PI * (j as f64 + 0.25) / m as f64));
        }
    }
    let w = necessity_witness(&host, n, gamma, epsilon)?;
    if w.degenerate {
        return Err(Error::Usage(format!("annulus {n} holds no host points")));
    }
    Ok(w.instance)
}

/// Up to `n` random well-spread points in the unit box with values
/// `e^{iθ}·γ(0, τ(z), ε/2)`, where `τ` sends the anchor `0.5 + 1.5i` to 0 and
/// `γ(0, p, s)` is the point a fraction `s` of the way from 0 to `p`.
///
/// Moving a fraction `s` toward a fixed point is `s`-Lipschitz, so the values
/// are `ε/2`-compatible with each other and with value 0 at the anchor.
pub fn sparse(n: usize, epsilon: f64, seed: u64, cfg: &RunConfig) -> Result<InterpolationInstance> {
    if n == 0 || n > 64 || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Usage("sparse needs 1 ≤ n ≤ 64 and 0 < ε < 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deepest = (cfg.max_generation as f64 - 0.5).max(2.0);
    let params = DensityParams {
        m: cfg.density_m,
        alpha: cfg.alpha_max,
    };
    for _ in 0..100 {
        let mut points: Vec<C64> = Vec::with_capacity(n);
        let mut tries = 0;
        while points.len() < n && tries < 10_000 {
            tries += 1;
            let z = C64::new(rng.gen_range(0.02..0.98), (-rng.gen_range(1.5..deepest)).exp2());
            if points.iter().all(|&p| beta_hp(p, z) >= 1.0) {
                points.push(z);
            }
        }
        if points.len() < n {
            continue;
        }
        let mp: Vec<ModelPoint> = points.iter().map(|&z| ModelPoint::half_plane(z)).collect::<Result<_>>()?;
        let d = density_check(&mp, params, DensityForm::DyadicGeneration, cfg.max_generation)?;
        if d.fitted_alpha > 0.6 {
            continue;
        }
        let rotation = C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
        let values = points
            .iter()
            .map(|&z| rotation * geodesic_disc(ZERO, (z - SEED) / (z - SEED.conj()), 0.5 * epsilon))
            .collect();
        let inst = InterpolationInstance::new(Model::HalfPlane, points, values, epsilon)?;
        if compatibility_ratio(&inst)? > epsilon {
            return Err(Error::Numerical("generated values are not compatible".into()));
        }
        return Ok(inst);
    }
    Err(Error::Usage(format!("could not place {n} sparse points")))
}
