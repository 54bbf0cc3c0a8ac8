//! Finite checks of the two geometric conditions characterizing interpolating
//! sequences (union of two separated sequences, exponential sparseness), plus
//! the compatibility ratio of a value assignment and the Pick-matrix oracle.
//!
//! Dyadic analyses run in the half-plane; disc instances are moved there by
//! the Cayley map first. Ratios compare `atanh ρ` of values against `atanh ρ`
//! of points, so they do not depend on which β normalization is in force.

use crate::config::RunConfig;
use crate::dyadic::{locate_extended, DyadicInterval, Offset, SubtreeCounts};
use crate::error::{Error, Result};
use crate::geometry::{self, Model, ModelPoint};
use crate::instance::InterpolationInstance;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};

/// Distances below this count as coincident.
pub const SEPARATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// Minimum pairwise β; `+∞` for fewer than two points.
    pub delta: f64,
    pub pair: Option<(usize, usize)>,
    /// Set when `delta` is infinite or below [`SEPARATION_TOL`].
    pub flagged: bool,
}

fn model_of(points: &[ModelPoint]) -> Result<Option<Model>> {
    let Some(first) = points.first() else {
        return Ok(None);
    };
    for p in points {
        if p.model != first.model {
            return Err(Error::Usage("points from different models".into()));
        }
        p.check()?;
    }
    Ok(Some(first.model))
}

fn beta_in(model: Model, a: C64, b: C64) -> f64 {
    match model {
        Model::Disc => geometry::beta_disc(a, b),
        Model::HalfPlane => geometry::beta_hp(a, b),
    }
}

fn natural_in(model: Model, a: C64, b: C64) -> f64 {
    match model {
        Model::Disc => geometry::natural_disc(a, b),
        Model::HalfPlane => geometry::natural_hp(a, b),
    }
}

pub fn separation_constant(points: &[ModelPoint]) -> Result<Separation> {
    let model = model_of(points)?;
    let mut best = (f64::INFINITY, None);
    if let Some(model) = model {
        for i in 0..points.len() {
            for j in 0..i {
                let d = beta_in(model, points[i].value, points[j].value);
                if d < best.0 {
                    best = (d, Some((j, i)));
                }
            }
        }
    }
    Ok(Separation {
        delta: best.0,
        pair: best.1,
        flagged: !best.0.is_finite() || best.0 < SEPARATION_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitOutcome {
    /// Index sets of the two colour classes.
    Split { first: Vec<usize>, second: Vec<usize> },
    /// Vertices of an odd cycle of the proximity graph, in cycle order.
    OddCycle { cycle: Vec<usize>, is_triangle: bool },
}

impl SplitOutcome {
    pub fn is_split(&self) -> bool {
        matches!(self, SplitOutcome::Split { .. })
    }
}

/// Two-colours the graph with an edge whenever `β < delta` (model normalization).
pub fn split_two_separated(points: &[ModelPoint], delta: f64) -> Result<SplitOutcome> {
    if !(delta > 0.0) {
        return Err(Error::Usage(format!("threshold {delta} must be positive")));
    }
    let model = model_of(points)?;
    let n = points.len();
    let mut adj = vec![Vec::new(); n];
    if let Some(model) = model {
        for i in 0..n {
            for j in 0..i {
                if beta_in(model, points[i].value, points[j].value) < delta {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
    }
    Ok(two_colour(&adj))
}

fn two_colour(adj: &[Vec<usize>]) -> SplitOutcome {
    let n = adj.len();
    let mut colour = vec![u8::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    for start in 0..n {
        if colour[start] != u8::MAX {
            continue;
        }
        colour[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if colour[v] == u8::MAX {
                    colour[v] = 1 - colour[u];
                    parent[v] = u;
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                } else if colour[v] == colour[u] {
                    // walk both tree paths up to their meeting point
                    let (mut a, mut b) = (u, v);
                    let (mut left, mut right) = (vec![a], vec![b]);
                    while depth[a] > depth[b] {
                        a = parent[a];
                        left.push(a);
                    }
                    while depth[b] > depth[a] {
                        b = parent[b];
                        right.push(b);
                    }
                    while a != b {
                        a = parent[a];
                        b = parent[b];
                        left.push(a);
                        right.push(b);
                    }
                    right.pop();
                    right.reverse();
                    left.extend(right);
                    let is_triangle = left.len() == 3;
                    return SplitOutcome::OddCycle {
                        cycle: left,
                        is_triangle,
                    };
                }
            }
        }
    }
    let first = (0..n).filter(|&i| colour[i] == 0).collect();
    let second = (0..n).filter(|&i| colour[i] == 1).collect();
    SplitOutcome::Split { first, second }
}

/// Largest pairwise distance `d` such that the graph `β < d` is still bipartite.
///
/// `+∞` when every threshold works (at most two points).
pub fn largest_bipartite_threshold(points: &[ModelPoint]) -> Result<f64> {
    let model = model_of(points)?;
    let Some(model) = model else {
        return Ok(f64::INFINITY);
    };
    let n = points.len();
    let mut dists: Vec<f64> = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in 0..i {
            dists.push(beta_in(model, points[i].value, points[j].value));
        }
    }
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    if split_two_separated(points, f64::MAX)?.is_split() {
        return Ok(f64::INFINITY);
    }
    // bipartite at dists[lo] (edgeless); not bipartite beyond the last distance
    let (mut lo, mut hi) = (0usize, dists.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if split_two_separated(points, dists[mid])?.is_split() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(dists[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityForm {
    /// Counts in hyperbolic balls against their area.
    DiscCount,
    /// Counts in the `n`-th horizontal band of each Carleson box.
    DyadicGeneration,
    /// Counts in balls of radius `n` against `2ⁿ`.
    RadiusCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub m: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityWitness {
    Band {
        interval: DyadicInterval,
        n: u32,
        count: usize,
    },
    Ball {
        center: C64,
        radius: u32,
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOutcome {
    pub form: DensityForm,
    pub params: DensityParams,
    pub holds: bool,
    /// Smallest α that works with `params.m`; `+∞` if none does.
    pub fitted_alpha: f64,
    /// Smallest M that works with `params.alpha`.
    pub fitted_m: f64,
    /// Configuration attaining `fitted_alpha`.
    pub witness: Option<DensityWitness>,
    /// Set when the generation bound is shallower than the data.
    pub warning: Option<String>,
}

/// One sample `count ≤ M·scale^α` feeding the fit.
struct Sample {
    count: usize,
    log2_scale: f64,
    witness: DensityWitness,
}

fn fit(form: DensityForm, params: DensityParams, samples: &[Sample], warning: Option<String>) -> DensityOutcome {
    let mut fitted_alpha: f64 = 0.0;
    let mut witness = None;
    let mut fitted_m: f64 = 0.0;
    let mut holds = true;
    for s in samples {
        let c = s.count as f64;
        fitted_m = fitted_m.max(c / (params.alpha * s.log2_scale).exp2());
        if c > params.m * (params.alpha * s.log2_scale).exp2() {
            holds = false;
        }
        if c > params.m {
            let a = if s.log2_scale > 0.0 {
                (c / params.m).log2() / s.log2_scale
            } else {
                f64::INFINITY
            };
            if a > fitted_alpha {
                fitted_alpha = a;
                witness = Some(s.witness.clone());
            }
        }
    }
    if witness.is_none() {
        // no sample exceeds M: report the fullest one
        witness = samples
            .iter()
            .max_by_key(|s| s.count)
            .map(|s| s.witness.clone());
    }
    DensityOutcome {
        form,
        params,
        holds,
        fitted_alpha,
        fitted_m,
        witness,
        warning,
    }
}

fn half_plane_points(points: &[ModelPoint]) -> Vec<C64> {
    points.iter().map(|p| geometry::to_half_plane(p).value).collect()
}

/// Dyadic centers at generations `≤ d` lying over or beside the points.
fn nearby_dyadic_centers(hp: &[C64], d: u32) -> Vec<C64> {
    let mut set = BTreeSet::new();
    for &z in hp {
        let Some(home) = locate_extended(z, Offset::ZERO) else {
            continue;
        };
        let lo = home.generation.min(0);
        let hi = (d as i32).min(home.generation + 2);
        for g in lo..=hi {
            let anc = if g <= home.generation {
                home.ancestor((home.generation - g) as u32)
            } else {
                // descend toward the point's horizontal position
                locate_extended(C64::new(z.re, (-(g as f64)).exp2() * 0.75), Offset::ZERO)
                    .expect("positive height")
            };
            for dj in -1..=1 {
                set.insert(DyadicInterval::new(g, anc.index + dj, Offset::ZERO));
            }
        }
    }
    set.into_iter().map(|i| i.center()).collect()
}

pub fn density_check(
    points: &[ModelPoint],
    params: DensityParams,
    form: DensityForm,
    d: u32,
) -> Result<DensityOutcome> {
    if !(params.m > 0.0 && params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::Usage(format!("invalid density params {params:?}")));
    }
    model_of(points)?;
    let hp = half_plane_points(points);
    let homes: Vec<DyadicInterval> = hp
        .iter()
        .map(|&z| locate_extended(z, Offset::ZERO).expect("valid half-plane point"))
        .collect();
    let deepest = homes.iter().map(|i| i.generation).max().unwrap_or(0);
    let warning = (deepest > d as i32).then(|| {
        format!("points reach generation {deepest}, deeper than the bound {d}")
    });
    let mut samples = Vec::new();
    match form {
        DensityForm::DyadicGeneration => {
            let min_gen = homes.iter().map(|i| i.generation).min().unwrap_or(0).min(0);
            let counts = SubtreeCounts::from_intervals(homes.iter().copied(), min_gen);
            for &(k, g) in counts.keys() {
                if k.generation > d as i32 || g <= k.generation {
                    continue;
                }
                let n = (g - k.generation) as u32;
                samples.push(Sample {
                    count: counts.count(&k, g),
                    log2_scale: n as f64,
                    witness: DensityWitness::Band {
                        interval: k,
                        n,
                        count: counts.count(&k, g),
                    },
                });
            }
            // deterministic order for tie-breaking of the witness
            samples.sort_by(|a, b| match (&a.witness, &b.witness) {
                (
                    DensityWitness::Band { interval: i, n: m, .. },
                    DensityWitness::Band { interval: j, n: k, .. },
                ) => (i, m).cmp(&(j, k)),
                _ => std::cmp::Ordering::Equal,
            });
        }
        DensityForm::DiscCount | DensityForm::RadiusCount => {
            let mut centers = hp.clone();
            centers.extend(nearby_dyadic_centers(&hp, d));
            for c in centers {
                // disc-normalized radius = 2·β_hp
                let dist: Vec<f64> = hp.iter().map(|&z| 2.0 * geometry::beta_hp(c, z)).collect();
                for r in 1..=d {
                    let count = dist.iter().filter(|&&b| b <= r as f64).count();
                    if count == 0 {
                        continue;
                    }
                    let log2_scale = match form {
                        DensityForm::RadiusCount => r as f64,
                        _ => (geometry::hyperbolic_area_ball_disc_beta(r as f64) / PI)
                            .max(1.0)
                            .log2(),
                    };
                    samples.push(Sample {
                        count,
                        log2_scale,
                        witness: DensityWitness::Ball {
                            center: c,
                            radius: r,
                            count,
                        },
                    });
                }
            }
        }
    }
    Ok(fit(form, params, &samples, warning))
}

/// `sup_Q Σ_{z ∈ Q} Im z / ℓ(Q)` over dyadic boxes of generation `≤ d`.
pub fn carleson_intensity(points: &[ModelPoint], d: u32) -> Result<f64> {
    model_of(points)?;
    let hp = half_plane_points(points);
    let mut sums: std::collections::HashMap<DyadicInterval, f64> = Default::default();
    let mut order: Vec<(DyadicInterval, f64)> = hp
        .iter()
        .map(|&z| (locate_extended(z, Offset::ZERO).expect("valid point"), z.im))
        .collect();
    order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let min_gen = order.iter().map(|(i, _)| i.generation).min().unwrap_or(0).min(0);
    for (home, y) in order {
        let mut k = home;
        loop {
            if k.generation <= d as i32 {
                *sums.entry(k).or_insert(0.0) += y;
            }
            if k.generation <= min_gen {
                break;
            }
            k = k.parent();
        }
    }
    Ok(sums
        .iter()
        .map(|(k, s)| s / k.length())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickVerdict {
    Feasible,
    Marginal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickResult {
    #[serde(skip)]
    pub matrix: Option<DMatrix<C64>>,
    pub min_eigenvalue: f64,
    pub verdict: PickVerdict,
    /// `min_eigenvalue ≥ −tol`.
    pub feasible: bool,
}

/// Pick matrix `(1 − wᵢw̄ⱼ)/(1 − zᵢz̄ⱼ)` in the disc and its smallest eigenvalue.
pub fn pick_matrix_psd(inst: &InterpolationInstance, tol_eig: f64) -> Result<PickResult> {
    let disc = inst.to_disc();
    let n = disc.len();
    if n == 0 {
        return Ok(PickResult {
            matrix: Some(DMatrix::zeros(0, 0)),
            min_eigenvalue: f64::INFINITY,
            verdict: PickVerdict::Feasible,
            feasible: true,
        });
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        let num = C64::new(1.0, 0.0) - disc.values[i] * disc.values[j].conj();
        let den = C64::new(1.0, 0.0) - disc.points[i] * disc.points[j].conj();
        num / den
    });
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::Numerical("pick eigenvalues not finite".into()));
    }
    let verdict = if min.abs() < tol_eig {
        PickVerdict::Marginal
    } else if min < 0.0 {
        PickVerdict::Infeasible
    } else {
        PickVerdict::Feasible
    };
    Ok(PickResult {
        matrix: Some(m),
        min_eigenvalue: min,
        verdict,
        feasible: min >= -tol_eig,
    })
}

/// `max β(wₙ, wₘ)/β(zₙ, zₘ)` with both sides in the disc normalization.
pub fn compatibility_ratio(inst: &InterpolationInstance) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..inst.len() {
        for j in 0..i {
            let dz = natural_in(inst.model, inst.points[i], inst.points[j]);
            if dz == 0.0 {
                return Err(Error::Domain(format!("points {j} and {i} coincide")));
            }
            let dw = geometry::natural_disc(inst.values[i], inst.values[j]);
            worst = worst.max(dw / dz);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NecessityWitness {
    /// Disc-model instance on `F₁ ∪ F₂`.
    pub instance: InterpolationInstance,
    /// Host indices of the points in each window.
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
    /// Exponent constant after tuning.
    pub c: f64,
    pub ratio: f64,
    pub degenerate: bool,
}

/// Splits the annulus `n − 1 < β(0, z) ≤ n` into the right and left argument
/// windows of half-width `π/2 − 2^{−nγ}` and assigns `±(1 − 2^{−cεγn})`.
pub fn necessity_witness(host: &[C64], n: u32, gamma: f64, epsilon: f64) -> Result<NecessityWitness> {
    if !(gamma > 0.0 && gamma < 1.0) || !(epsilon > 0.0) || n == 0 {
        return Err(Error::Usage("need n ≥ 1, 0 < γ < 1 and ε > 0".into()));
    }
    let window = FRAC_PI_2 - (-(n as f64) * gamma).exp2();
    let (mut f1, mut f2) = (Vec::new(), Vec::new());
    for (k, &z) in host.iter().enumerate() {
        ModelPoint::disc(z)?;
        let b = geometry::beta_disc(C64::new(0.0, 0.0), z);
        if !(b > n as f64 - 1.0 && b <= n as f64) {
            continue;
        }
        let arg = z.arg();
        let anti = (arg - PI).rem_euclid(2.0 * PI);
        let anti = anti.min(2.0 * PI - anti);
        if arg.abs() < window {
            f1.push(k);
        } else if anti < window {
            f2.push(k);
        }
    }
    let points: Vec<C64> = f1.iter().chain(f2.iter()).map(|&k| host[k]).collect();
    let degenerate = points.is_empty();
    let mut c = 1.0;
    loop {
        let v = 1.0 - (-c * epsilon * gamma * n as f64).exp2();
        let values: Vec<C64> = (0..f1.len())
            .map(|_| C64::new(v, 0.0))
            .chain((0..f2.len()).map(|_| C64::new(-v, 0.0)))
            .collect();
        let instance = InterpolationInstance {
            model: Model::Disc,
            points: points.clone(),
            values,
            epsilon,
        };
        let ratio = compatibility_ratio(&instance)?;
        if ratio <= epsilon || c < 1e-12 {
            return Ok(NecessityWitness {
                instance,
                f1,
                f2,
                c,
                ratio,
                degenerate,
            });
        }
        c *= 0.5;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub points: usize,
    pub separation: Separation,
    /// Threshold used for the two-colouring, instance normalization.
    pub split_threshold: f64,
    pub split: SplitOutcome,
    pub largest_bipartite_threshold: f64,
    pub density: Vec<DensityOutcome>,
    pub carleson_intensity: f64,
    pub compatibility_ratio: f64,
    pub pick: PickResult,
    pub condition_a: bool,
    pub condition_b: bool,
}

/// Runs every check; condition (b) is judged on the dyadic band form.
pub fn analyze(inst: &InterpolationInstance, cfg: &RunConfig) -> Result<AnalysisReport> {
    inst.validate()?;
    let pts = inst.model_points();
    let d = cfg.max_generation;
    let separation = separation_constant(&pts)?;
    let split_threshold = match inst.model {
        Model::HalfPlane => cfg.separation_floor,
        Model::Disc => 2.0 * cfg.separation_floor,
    };
    let split = split_two_separated(&pts, split_threshold)?;
    let params = DensityParams {
        m: cfg.density_m,
        alpha: cfg.alpha_max,
    };
    let mut density = Vec::new();
    for form in [
        DensityForm::DyadicGeneration,
        DensityForm::RadiusCount,
        DensityForm::DiscCount,
    ] {
        density.push(density_check(&pts, params, form, d)?);
    }
    let condition_b = density[0].fitted_alpha <= cfg.alpha_max;
    Ok(AnalysisReport {
        points: inst.len(),
        condition_a: split.is_split(),
        separation,
        split_threshold,
        split,
        largest_bipartite_threshold: largest_bipartite_threshold(&pts)?,
        density,
        carleson_intensity: carleson_intensity(&pts, d)?,
        compatibility_ratio: compatibility_ratio(inst)?,
        pick: pick_matrix_psd(inst, cfg.tol_eig)?,
        condition_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp(points: &[(f64, f64)]) -> Vec<ModelPoint> {
        points
            .iter()
            .map(|&(x, y)| ModelPoint::half_plane(C64::new(x, y)).unwrap())
            .collect()
    }

    fn column(k: u32) -> Vec<ModelPoint> {
        (0..=k).map(|j| ModelPoint::half_plane(C64::new(0.0, (-(j as f64)).exp2())).unwrap()).collect()
    }

    fn full_grid(g: i32) -> Vec<ModelPoint> {
        (0..1i64 << g)
            .map(|j| ModelPoint::half_plane(DyadicInterval::new(g, j, Offset::ZERO).center()).unwrap())
            .collect()
    }

    #[test]
    fn separation_examples() {
        let s = separation_constant(&hp(&[(0.0, 1.0), (0.0, 2.0)])).unwrap();
        assert!((s.delta - 0.5).abs() < 1e-14 && !s.flagged);
        let s = separation_constant(&hp(&[(0.3, 0.4), (0.3 + 1e-9, 0.4)])).unwrap();
        assert!(s.delta < 1e-6 && s.flagged);
        let s = separation_constant(&hp(&[(0.3, 0.4)])).unwrap();
        assert!(s.delta.is_infinite() && s.flagged);
    }

    #[test]
    fn split_examples() {
        let tri = hp(&[(0.5, 0.5), (0.501, 0.5), (0.5005, 0.501)]);
        match split_two_separated(&tri, 0.2).unwrap() {
            SplitOutcome::OddCycle { cycle, is_triangle } => {
                assert!(is_triangle);
                let set: BTreeSet<_> = cycle.into_iter().collect();
                assert_eq!(set.len(), 3);
            }
            other => panic!("expected odd cycle, got {other:?}"),
        }
        let sep = column(5);
        assert_eq!(
            split_two_separated(&sep, 0.2).unwrap(),
            SplitOutcome::Split { first: (0..6).collect(), second: vec![] }
        );
        // interleaved columns: intra-pair gap ≈ 7e-4, column step 0.5
        let mut pts = Vec::new();
        for k in 0..8 {
            let y = (-(k as f64)).exp2();
            pts.push((0.0, y));
            pts.push((0.0, y * (1.0 + 1e-3)));
        }
        let pts = hp(&pts);
        let inner = geometry::beta_hp(C64::new(0.0, 1.0), C64::new(0.0, 1.001));
        let outer = geometry::beta_hp(C64::new(0.0, 1.001), C64::new(0.0, 2.0));
        let delta = 0.5 * (inner + outer);
        match split_two_separated(&pts, delta).unwrap() {
            SplitOutcome::Split { first, second } => {
                let a: Vec<usize> = (0..8).map(|k| 2 * k).collect();
                let b: Vec<usize> = (0..8).map(|k| 2 * k + 1).collect();
                assert!((first == a && second == b) || (first == b && second == a));
                for part in [&first, &second] {
                    let sub: Vec<_> = part.iter().map(|&i| pts[i]).collect();
                    assert!(separation_constant(&sub).unwrap().delta >= delta);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bipartite_threshold_is_maximal() {
        let tri = hp(&[(0.5, 0.5), (0.6, 0.5), (0.55, 0.6), (0.2, 0.1)]);
        let t = largest_bipartite_threshold(&tri).unwrap();
        assert!(split_two_separated(&tri, t).unwrap().is_split());
        assert!(!split_two_separated(&tri, t * (1.0 + 1e-9)).unwrap().is_split());
        assert!(largest_bipartite_threshold(&hp(&[(0.0, 1.0), (0.0, 1.1)])).unwrap().is_infinite());
    }

    #[test]
    fn density_examples() {
        let p = DensityParams { m: 1.0, alpha: 0.1 };
        for form in [DensityForm::DiscCount, DensityForm::DyadicGeneration, DensityForm::RadiusCount] {
            assert!(density_check(&hp(&[(0.3, 0.2)]), p, form, 12).unwrap().holds);
        }
        let p = DensityParams { m: 4.0, alpha: 0.35 };
        let col = density_check(&column(20), p, DensityForm::RadiusCount, 20).unwrap();
        assert!(col.fitted_alpha <= 0.35, "{}", col.fitted_alpha);
        // brute-force oracle: the ball at a column point of radius n holds 2n+1 points
        let oracle = (1..=20u32)
            .map(|n| (((2 * n + 1) as f64) / 4.0).log2() / n as f64)
            .fold(0.0, f64::max);
        assert!((col.fitted_alpha - oracle).abs() < 1e-12);
        let p = DensityParams { m: 4.0, alpha: 0.7 };
        let grid = density_check(&full_grid(10), p, DensityForm::DyadicGeneration, 12).unwrap();
        assert!(!grid.holds);
        assert!((grid.fitted_alpha - 0.8).abs() < 1e-12);
        assert_eq!(
            grid.witness,
            Some(DensityWitness::Band { interval: DyadicInterval::root(0, Offset::ZERO), n: 10, count: 1024 })
        );
    }

    #[test]
    fn carleson_examples() {
        assert_eq!(carleson_intensity(&hp(&[(0.0, 1.0)]), 12).unwrap(), 1.0);
        assert_eq!(carleson_intensity(&[], 12).unwrap(), 0.0);
        for k in [3, 10, 25] {
            assert!(carleson_intensity(&column(k), 30).unwrap() <= 2.0);
        }
    }

    fn disc_inst(z: &[C64], w: &[C64]) -> InterpolationInstance {
        InterpolationInstance::new(Model::Disc, z.to_vec(), w.to_vec(), 0.1).unwrap()
    }

    #[test]
    fn pick_examples() {
        let z = [C64::new(0.1, 0.2), C64::new(-0.5, 0.3), C64::new(0.0, -0.7)];
        assert!(pick_matrix_psd(&disc_inst(&z, &z), 1e-9).unwrap().feasible);
        let one = pick_matrix_psd(&disc_inst(&[C64::new(0.0, 0.0)], &[C64::new(0.0, 0.0)]), 1e-9).unwrap();
        assert_eq!(one.min_eigenvalue, 1.0);
        let bad = disc_inst(&[C64::new(0.0, 0.0), C64::new(0.5, 0.0)], &[C64::new(0.0, 0.0), C64::new(0.9, 0.0)]);
        let r = pick_matrix_psd(&bad, 1e-9).unwrap();
        // closed form eigenvalues of [[1,1],[1,q]]
        let q: f64 = 0.19 / 0.75;
        let lam = 0.5 * (1.0 + q - ((1.0 - q) * (1.0 - q) + 4.0).sqrt());
        assert!((r.min_eigenvalue - lam).abs() < 1e-12);
        assert_eq!(r.verdict, PickVerdict::Infeasible);
    }

    #[test]
    fn compatibility_examples() {
        let z = [C64::new(0.1, 0.2), C64::new(-0.5, 0.3), C64::new(0.0, -0.7)];
        let w0 = [C64::new(0.2, 0.0); 3];
        assert_eq!(compatibility_ratio(&disc_inst(&z, &w0)).unwrap(), 0.0);
        let tau = geometry::DiscAutomorphism { rotation: 0.7, a: C64::new(0.3, -0.2) };
        let w: Vec<C64> = z.iter().map(|&p| tau.apply(p)).collect();
        let r = compatibility_ratio(&disc_inst(&z, &w)).unwrap();
        assert!(r <= 1.0 + 1e-10 && r > 1.0 - 1e-10);
        let zz = [C64::new(0.0, 0.0), C64::new(0.5, 0.0)];
        let target = 0.05 * geometry::natural_disc(zz[0], zz[1]);
        let ww = [C64::new(0.0, 0.0), C64::new((0.5 * target).tanh(), 0.0)];
        assert!((compatibility_ratio(&disc_inst(&zz, &ww)).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn witness_examples() {
        let n = 10;
        let r = |b: f64| {
            let q = b.exp2();
            (q - 1.0) / (q + 1.0)
        };
        let rad = r(n as f64 - 0.5);
        let only_right = [C64::from_polar(rad, 0.1), C64::from_polar(rad, -0.2)];
        let w = necessity_witness(&only_right, n, 0.5, 0.1).unwrap();
        assert_eq!(w.ratio, 0.0);
        assert_eq!(w.f1.len(), 2);
        let both = [C64::from_polar(rad, 0.1), C64::from_polar(rad, PI - 0.1)];
        let w = necessity_witness(&both, n, 0.5, 0.1).unwrap();
        assert_eq!((w.f1.clone(), w.f2.clone()), (vec![0], vec![1]));
        assert!(w.ratio <= 0.1 && !w.degenerate);
        assert!((compatibility_ratio(&w.instance).unwrap() - w.ratio).abs() < 1e-15);
        assert!(necessity_witness(&[], n, 0.5, 0.1).unwrap().degenerate);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn split_parts_are_separated(seed in 0u64..1000, delta in 0.05f64..1.5) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<ModelPoint> = (0..12)
                .map(|_| ModelPoint::half_plane(C64::new(rng.gen(), rng.gen_range(0.05..1.0))).unwrap())
                .collect();
            if let SplitOutcome::Split { first, second } = split_two_separated(&pts, delta).unwrap() {
                for part in [first, second] {
                    let sub: Vec<_> = part.iter().map(|&i| pts[i]).collect();
                    prop_assert!(separation_constant(&sub).unwrap().delta >= delta);
                }
            }
        }
    }
}
