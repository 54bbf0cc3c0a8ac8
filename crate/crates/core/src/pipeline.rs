//! End-to-end construction: normalize, check, build `φ`, correct to `f`,
//! sample and audit.

use crate::conditions::{analyze, compatibility_ratio, AnalysisReport, SplitOutcome};
use crate::config::RunConfig;
use crate::correction::{
    assemble_f, bmo_norm, combine_two_sequences, dbar_budget, AnalyticInterpolant, CombinedInterpolant,
};
use crate::error::{Error, Result};
use crate::geometry::{cayley_disc_to_hp, Model};
use crate::instance::InterpolationInstance;
use crate::interpolant::{build_smooth, hp_point_at, verify_abc, AbcReport, SmoothDiagnostics};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest `|wₙ*|` accepted by the two-sequence step.
pub const AUX_BUDGET: f64 = 0.9;

/// Instance coordinates to the half-plane working frame, where every point
/// lies in `[0, 1) × (0, 1]`: Cayley for disc input, then
/// `z ↦ (z − shift)/scale` with `scale` a power of two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub from_disc: bool,
    pub shift: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn fit(inst: &InterpolationInstance) -> Self {
        let from_disc = inst.model == Model::Disc;
        let hp: Vec<C64> = inst
            .points
            .iter()
            .map(|&z| if from_disc { cayley_disc_to_hp(z) } else { z })
            .collect();
        let inside = hp.iter().all(|z| (0.0..1.0).contains(&z.re) && z.im <= 1.0);
        if inside {
            return Normalization {
                from_disc,
                shift: 0.0,
                scale: 1.0,
            };
        }
        let lo = hp.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let hi = hp.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let top = hp.iter().map(|z| z.im).fold(0.0, f64::max);
        let mut scale = 1.0f64;
        while !(scale > 1.25 * (hi - lo) && scale >= top) {
            scale *= 2.0;
        }
        while scale > 2.5 * (hi - lo) && 0.5 * scale >= top && scale > 1e-300 {
            scale *= 0.5;
        }
        // center the points in the unit interval
        let shift = 0.5 * (lo + hi) - 0.5 * scale;
        Normalization {
            from_disc,
            shift,
            scale,
        }
    }

    pub fn forward(&self, z: C64) -> C64 {
        let h = if self.from_disc { cayley_disc_to_hp(z) } else { z };
        (h - self.shift) / self.scale
    }
}

/// The analytic interpolant, on one separated sequence or a union of two.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Constructed {
    Single(AnalyticInterpolant),
    Pair(Box<CombinedInterpolant>),
}

impl Constructed {
    pub fn eval(&self, z: C64) -> Result<C64> {
        match self {
            Constructed::Single(f) => f.eval(z),
            Constructed::Pair(h) => h.eval(z),
        }
    }

    pub fn stencil(&self, z0: C64, h: f64) -> Result<[C64; 5]> {
        match self {
            Constructed::Single(f) => f.stencil(z0, h),
            Constructed::Pair(c) => c.stencil(z0, h),
        }
    }

    /// The interpolant built on the first (or only) sequence.
    pub fn primary(&self) -> &AnalyticInterpolant {
        match self {
            Constructed::Single(f) => f,
            Constructed::Pair(c) => c.first(),
        }
    }

    fn parts(&self) -> Vec<&AnalyticInterpolant> {
        match self {
            Constructed::Single(f) => vec![f],
            Constructed::Pair(c) => std::iter::once(c.first()).chain(c.second()).collect(),
        }
    }
}

/// Real-axis sample abscissae.
pub fn boundary_xs(cfg: &RunConfig) -> Vec<f64> {
    let g = &cfg.grid;
    let n = g.boundary_samples;
    (0..n)
        .map(|k| g.x_min + (g.x_max - g.x_min) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Interior probes: the lattice shifted by a third of a step (so dyadic
/// lines are missed), then eight points on each blend annulus; each is
/// kept a few steps inside its quadrature cell.
pub fn probe_points(cfg: &RunConfig, c: &Constructed) -> Vec<C64> {
    let g = &cfg.grid;
    let dx = (g.x_max - g.x_min) / g.nx as f64;
    let ratio = g.y_max / g.y_min;
    let mut out = Vec::with_capacity(g.nx * g.ny);
    for j in 0..g.ny {
        let y = g.y_min * ratio.powf((j as f64 + 1.0 / 3.0) / g.ny as f64);
        for i in 0..g.nx {
            out.push(C64::new(g.x_min + (i as f64 + 1.0 / 3.0) * dx, y));
        }
    }
    for part in c.parts() {
        for p in part.phi().patches() {
            for k in 0..8 {
                let theta = (k as f64 + 0.5) * PI / 4.0;
                out.push(hp_point_at(p.center, 1.5 * p.radius, theta));
            }
        }
    }
    out.into_iter()
        .map(|z| {
            let h = cfg.fd_step * z.im;
            c.parts().into_iter().fold(z, |z, part| settle(z, part, h))
        })
        .collect()
}

/// Moves `z` inside its quadrature cell so the stencil of step `h` does
/// not straddle a cell edge, where the discrete `∂̄b` jumps.
fn settle(z: C64, f: &AnalyticInterpolant, h: f64) -> C64 {
    let Some(k) = f.jones().cell_containing(z) else { return z };
    let c = f.jones().cell(k);
    let m = 2.0 * h;
    if c.x1 - c.x0 <= 2.0 * m || c.y1 - c.y0 <= 2.0 * m {
        return z;
    }
    C64::new(z.re.clamp(c.x0 + m, c.x1 - m), z.im.clamp(c.y0 + m, c.y1 - m))
}

/// Sampled values of the constructed function, in the working frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub nodes: Vec<C64>,
    /// Probe center and the five stencil values around it.
    pub probes: Vec<(C64, [C64; 5])>,
    pub boundary: Vec<(f64, C64)>,
    /// Stencil step relative to `Im z`.
    pub fd_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitChecks {
    pub node_residual: f64,
    pub boundary_sup: f64,
    /// `1 + tol − boundary_sup`; negative on failure.
    pub boundary_margin: f64,
    /// Largest `|∂̄f|·Im z/(1 − |f|²)` over probes.
    pub dbar_max: f64,
    pub dbar_at: Option<[f64; 2]>,
    pub nodes_ok: bool,
    pub boundary_ok: bool,
    pub dbar_ok: bool,
}

impl ExitChecks {
    pub fn success(&self) -> bool {
        self.nodes_ok && self.boundary_ok && self.dbar_ok
    }

    /// Recomputes the three exit conditions from samples alone.
    pub fn from_samples(s: &Samples, values: &[C64], cfg: &RunConfig) -> Self {
        let node_residual = s
            .nodes
            .iter()
            .zip(values)
            .map(|(f, w)| (f - w).norm())
            .fold(0.0, f64::max);
        let boundary_sup = s.boundary.iter().map(|(_, f)| f.norm()).fold(0.0, f64::max);
        let mut dbar_max: f64 = 0.0;
        let mut dbar_at = None;
        for (z, st) in &s.probes {
            let r = dbar_budget(st, *z, s.fd_step * z.im);
            // NaN counts as a failure
            if !(r <= dbar_max) {
                dbar_max = if r.is_nan() { f64::INFINITY } else { r };
                dbar_at = Some([z.re, z.im]);
            }
        }
        let boundary_margin = 1.0 + cfg.boundary_tol - boundary_sup;
        ExitChecks {
            node_residual,
            boundary_sup,
            boundary_margin,
            dbar_max,
            dbar_at,
            nodes_ok: node_residual <= cfg.node_tol,
            boundary_ok: boundary_margin >= 0.0,
            dbar_ok: dbar_max <= cfg.residual_budget,
        }
    }
}

/// Constants measured on the correction step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConstants {
    /// `max |log(|E(z)|/(1 − |φ(z)|²))|/ε` over probes.
    pub s_const: f64,
    /// `sup_ℝ |b| / ‖|F| dA‖_C`; zero when `F ≡ 0`.
    pub j_const: f64,
    pub b_boundary_sup: f64,
    pub carleson_f: f64,
    pub sup_f: f64,
    pub bmo_log_h: f64,
    pub jones_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSequenceInfo {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub w_star_max: f64,
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub normalization: Normalization,
    /// Working-frame points and their values.
    pub points: Vec<C64>,
    pub values: Vec<C64>,
    pub epsilon: f64,
    pub analysis: AnalysisReport,
    pub interpolant: Constructed,
    pub smooth: SmoothDiagnostics,
    pub abc: AbcReport,
    pub correction: CorrectionConstants,
    pub two_sequence: Option<TwoSequenceInfo>,
    pub samples: Samples,
    pub checks: ExitChecks,
}

fn build_single(points: &[C64], values: &[C64], epsilon: f64, cfg: &RunConfig) -> Result<(AnalyticInterpolant, SmoothDiagnostics)> {
    let (phi, diag) = build_smooth(points, values, epsilon, cfg)?;
    Ok((assemble_f(phi, points.to_vec(), cfg.fd_step)?, diag))
}

fn measure_correction(f: &AnalyticInterpolant, probes: &[C64], epsilon: f64, cfg: &RunConfig) -> Result<CorrectionConstants> {
    let s_const = probes
        .par_iter()
        .map(|&z| {
            let phi = f.phi().eval(z)?;
            Ok((f.outer().exponent(z).re - (1.0 - phi.norm_sqr()).ln()).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max)
        / epsilon;
    let b_boundary_sup = boundary_xs(cfg)
        .par_iter()
        .map(|&x| f.b(C64::new(x, 0.0)).map(|b| b.norm()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let carleson_f = f.jones().carleson_norm(cfg.max_generation as i32 + 2);
    Ok(CorrectionConstants {
        s_const,
        j_const: if carleson_f > 0.0 { b_boundary_sup / carleson_f } else { 0.0 },
        b_boundary_sup,
        carleson_f,
        sup_f: f.jones().sup_abs_f(),
        bmo_log_h: bmo_norm(&f.boundary().map(f64::ln), cfg.max_generation as i32),
        jones_cells: f.jones().len(),
    })
}

fn sample(c: &Constructed, points: &[C64], probes: &[C64], cfg: &RunConfig) -> Result<Samples> {
    let nodes = points.par_iter().map(|&z| c.eval(z)).collect::<Result<_>>()?;
    let probes = probes
        .par_iter()
        .map(|&z| Ok((z, c.stencil(z, cfg.fd_step * z.im)?)))
        .collect::<Result<_>>()?;
    let boundary = boundary_xs(cfg)
        .par_iter()
        .map(|&x| Ok((x, c.eval(C64::new(x, 0.0))?)))
        .collect::<Result<_>>()?;
    Ok(Samples {
        nodes,
        probes,
        boundary,
        fd_step: cfg.fd_step,
    })
}

/// Refuses instances that fail either geometric condition or whose values
/// are not `ε`-compatible; otherwise builds and audits `f`.
pub fn construct(inst: &InterpolationInstance, cfg: &RunConfig) -> Result<Construction> {
    cfg.validate()?;
    let analysis = analyze(inst, cfg)?;
    if let SplitOutcome::OddCycle { cycle, .. } = &analysis.split {
        return Err(Error::Refused(format!(
            "not a union of two separated sequences: odd cycle {cycle:?}"
        )));
    }
    if !analysis.condition_b {
        return Err(Error::Refused(format!(
            "density exponent {:.4} exceeds {}: witness {:?}",
            analysis.density[0].fitted_alpha, cfg.alpha_max, analysis.density[0].witness
        )));
    }
    if analysis.compatibility_ratio > inst.epsilon * (1.0 + 1e-12) {
        return Err(Error::Refused(format!(
            "compatibility ratio {:.6} exceeds ε = {}",
            analysis.compatibility_ratio, inst.epsilon
        )));
    }
    let normalization = Normalization::fit(inst);
    let points: Vec<C64> = inst.points.iter().map(|&z| normalization.forward(z)).collect();
    let values = inst.values.clone();
    let epsilon = inst.epsilon;

    let close = analysis.separation.delta < analysis.split_threshold;
    let (interpolant, smooth, two_sequence) = match (&analysis.split, close) {
        (SplitOutcome::Split { first, second }, true) => {
            let pick = |idx: &[usize], v: &[C64]| idx.iter().map(|&k| v[k]).collect::<Vec<_>>();
            let (p1, v1) = (pick(first, &points), pick(first, &values));
            let (p2, v2) = (pick(second, &points), pick(second, &values));
            let (f, diag) = build_single(&p1, &v1, epsilon, cfg)?;
            let h = combine_two_sequences(f, &p2, &v2, &boundary_xs(cfg), AUX_BUDGET, |pts, w| {
                let sub = InterpolationInstance {
                    model: Model::HalfPlane,
                    points: pts.to_vec(),
                    values: w.to_vec(),
                    epsilon,
                };
                let eps2 = epsilon.max(compatibility_ratio(&sub)?);
                Ok(build_single(pts, w, eps2, cfg)?.0)
            })?;
            let info = TwoSequenceInfo {
                first: first.clone(),
                second: second.clone(),
                w_star_max: h.w_star().iter().map(|w| w.norm()).fold(0.0, f64::max),
            };
            (Constructed::Pair(Box::new(h)), diag, Some(info))
        }
        _ => {
            let (f, diag) = build_single(&points, &values, epsilon, cfg)?;
            (Constructed::Single(f), diag, None)
        }
    };

    let primary = interpolant.primary();
    let cells = primary.phi().support_cells();
    let abc = verify_abc(primary.phi(), epsilon, cfg, &cells)?;
    let probes = probe_points(cfg, &interpolant);
    let correction = measure_correction(primary, &probes, epsilon, cfg)?;
    let samples = sample(&interpolant, &points, &probes, cfg)?;
    let checks = ExitChecks::from_samples(&samples, &values, cfg);
    Ok(Construction {
        normalization,
        points,
        values,
        epsilon,
        analysis,
        interpolant,
        smooth,
        abc,
        correction,
        two_sequence,
        samples,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn normalization_keeps_unit_box_points() {
        let inst = InterpolationInstance::new(Model::HalfPlane, vec![c(0.3, 0.5)], vec![c(0.0, 0.0)], 0.1).unwrap();
        let n = Normalization::fit(&inst);
        assert_eq!(n.forward(c(0.3, 0.5)), c(0.3, 0.5));
    }

    #[test]
    fn normalization_fits_wide_instances() {
        let pts = vec![c(-3.0, 0.5), c(5.0, 2.5), c(1.0, 0.01)];
        let inst = InterpolationInstance::new(Model::HalfPlane, pts.clone(), vec![c(0.0, 0.0); 3], 0.1).unwrap();
        let n = Normalization::fit(&inst);
        assert_eq!(n.scale.log2().fract(), 0.0);
        for z in pts {
            let w = n.forward(z);
            assert!((0.0..1.0).contains(&w.re) && w.im > 0.0 && w.im <= 1.0, "{w}");
        }
    }

    #[test]
    fn zero_values_give_zero_function() {
        let pts = vec![c(0.25, 0.1), c(0.7, 0.01)];
        let inst = InterpolationInstance::new(Model::HalfPlane, pts, vec![c(0.0, 0.0); 2], 0.05).unwrap();
        let cfg = RunConfig::default();
        let out = construct(&inst, &cfg).unwrap();
        assert!(out.checks.success());
        assert!(out.samples.boundary.iter().all(|(_, f)| *f == c(0.0, 0.0)));
        assert!(out.samples.probes.iter().all(|(_, s)| s.iter().all(|f| *f == c(0.0, 0.0))));
    }

    #[test]
    fn single_point_is_interpolated() {
        let inst =
            InterpolationInstance::new(Model::HalfPlane, vec![c(0.5, 0.75)], vec![c(0.3, 0.0)], 0.05).unwrap();
        let out = construct(&inst, &RunConfig::default()).unwrap();
        assert!(out.checks.node_residual <= 1e-12, "{:?}", out.checks);
        assert!(out.checks.boundary_sup <= 1.0 + 1e-3, "{:?}", out.checks);
        assert!(out.checks.success(), "{:?}", out.checks);
    }

    #[test]
    fn incompatible_values_are_refused() {
        let inst = InterpolationInstance::new(
            Model::HalfPlane,
            vec![c(0.25, 0.5), c(0.75, 0.5)],
            vec![c(0.5, 0.0), c(-0.5, 0.0)],
            0.05,
        )
        .unwrap();
        assert!(matches!(construct(&inst, &RunConfig::default()), Err(Error::Refused(_))));
    }
}
