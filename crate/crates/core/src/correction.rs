//! From the smooth interpolant to an analytic one: boundary data, the outer
//! function, a finite Blaschke product, an explicit bounded solution of
//! `∂̄b = F`, and the final correction `f = φ − ½·B·E·b`.
//!
//! Convention: `∂̄ = ½(∂ₓ + i∂ᵧ)`.

use crate::error::{Error, Result};
use crate::interpolant::{carleson_norm, Cell, MassPoint, SmoothInterpolant};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Piecewise constant function on ℝ: `values[k]` on `[knots[k], knots[k+1])`,
/// `tail` outside `[knots[0], knots[n])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    tail: f64,
}

impl BoundaryFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, tail: f64) -> Result<Self> {
        if knots.len() != values.len() + 1 && !(knots.is_empty() && values.is_empty()) {
            return Err(Error::Usage("need one more knot than values".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Usage("knots must increase strictly".into()));
        }
        if !tail.is_finite() || values.iter().any(|v| !v.is_finite()) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Domain("boundary data must be finite".into()));
        }
        Ok(BoundaryFunction { knots, values, tail })
    }

    pub fn constant(c: f64) -> Self {
        BoundaryFunction {
            knots: Vec::new(),
            values: Vec::new(),
            tail: c,
        }
    }

    /// Cells centered on increasing sample abscissae; the outer cells extend
    /// by half a spacing.
    pub fn from_samples(xs: &[f64], vals: &[f64], tail: f64) -> Result<Self> {
        if xs.len() != vals.len() || xs.len() < 2 {
            return Err(Error::Usage("need at least two matching samples".into()));
        }
        let mut knots = Vec::with_capacity(xs.len() + 1);
        knots.push(xs[0] - 0.5 * (xs[1] - xs[0]));
        for w in xs.windows(2) {
            knots.push(0.5 * (w[0] + w[1]));
        }
        let n = xs.len();
        knots.push(xs[n - 1] + 0.5 * (xs[n - 1] - xs[n - 2]));
        Self::new(knots, vals.to_vec(), tail)
    }

    /// Merges neighbouring pieces with equal values.
    pub fn simplified(&self) -> Self {
        if self.values.is_empty() {
            return self.clone();
        }
        let mut knots = vec![self.knots[0]];
        let mut values: Vec<f64> = Vec::new();
        for (k, &v) in self.values.iter().enumerate() {
            if values.last() == Some(&v) {
                *knots.last_mut().expect("non-empty") = self.knots[k + 1];
            } else {
                values.push(v);
                knots.push(self.knots[k + 1]);
            }
        }
        BoundaryFunction {
            knots,
            values,
            tail: self.tail,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.values.is_empty() || x < self.knots[0] || x >= self.knots[self.knots.len() - 1] {
            return self.tail;
        }
        let k = self.knots.partition_point(|&t| t <= x) - 1;
        self.values[k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BoundaryFunction {
            knots: self.knots.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            tail: f(self.tail),
        }
    }
}

/// `P_z(u) = (1/π)∫ y/((x − t)² + y²) u(t) dt`, exact for piecewise constant data.
pub fn poisson_integral(u: &BoundaryFunction, z: C64) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Poisson integral needs Im z > 0, got {z}")));
    }
    let angle = |t: f64| ((t - z.re) / z.im).atan();
    let mut p = u.tail;
    for (k, &v) in u.values.iter().enumerate() {
        p += (v - u.tail) * (angle(u.knots[k + 1]) - angle(u.knots[k])) / PI;
    }
    Ok(p)
}

/// Mean oscillation `|I|⁻¹∫_I |u − u_I|` of piecewise constant data.
fn mean_oscillation(u: &BoundaryFunction, a: f64, b: f64) -> f64 {
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let n = u.values.len();
    let (lo, hi) = if n == 0 { (b, b) } else { (u.knots[0], u.knots[n]) };
    if a < lo {
        pieces.push((lo.min(b) - a, u.tail));
    }
    if b > hi {
        pieces.push((b - hi.max(a), u.tail));
    }
    if n > 0 && a < hi && b > lo {
        let start = u.knots.partition_point(|&t| t <= a).saturating_sub(1);
        for k in start..n {
            let (s, e) = (u.knots[k].max(a), u.knots[k + 1].min(b));
            if s >= b {
                break;
            }
            if e > s {
                pieces.push((e - s, u.values[k]));
            }
        }
    }
    let len = b - a;
    let mean = pieces.iter().map(|(l, v)| l * v).sum::<f64>() / len;
    pieces.iter().map(|(l, v)| l * (v - mean).abs()).sum::<f64>() / len
}

/// Sup of the mean oscillation over dyadic intervals of generation `≤ d`
/// and their translates by half a length.
pub fn bmo_norm(u: &BoundaryFunction, d: i32) -> f64 {
    let n = u.values.len();
    if n == 0 {
        return 0.0;
    }
    let (lo, hi) = (u.knots[0], u.knots[n]);
    let g_lo = -((hi - lo).log2().ceil() as i32) - 1;
    let mut best: f64 = 0.0;
    for g in g_lo..=d {
        let l = (-(g as f64)).exp2();
        for shift in [0.0, 0.5 * l] {
            let j0 = ((lo - shift) / l).floor() as i64;
            let j1 = ((hi - shift) / l).ceil() as i64;
            for j in j0..j1 {
                let a = shift + j as f64 * l;
                best = best.max(mean_oscillation(u, a, a + l));
            }
        }
    }
    best
}

/// `E(h)(z) = exp((−i/π)∫ log h(t)/(t − z) dt)`, so `log|E| = P_z(log h)`.
///
/// The integral is telescoped over the knots; on the real axis the branch is
/// the limit from above.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterFunction {
    knots: Vec<f64>,
    /// `c_{j−1} − c_j` for `c = log h − log tail`, with `c` zero outside.
    jumps: Vec<f64>,
    log_tail: f64,
}

impl OuterFunction {
    pub fn new(h: &BoundaryFunction) -> Result<Self> {
        if !(h.tail > 0.0) || h.values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("outer function needs positive boundary data".into()));
        }
        let h = h.simplified();
        let log_tail = h.tail.ln();
        let c: Vec<f64> = h.values.iter().map(|v| v.ln() - log_tail).collect();
        let n = c.len();
        let mut knots = Vec::new();
        let mut jumps = Vec::new();
        for j in 0..h.knots.len() {
            let before = if j == 0 { 0.0 } else { c[j - 1] };
            let after = if j == n { 0.0 } else { c[j] };
            if before != after {
                knots.push(h.knots[j]);
                jumps.push(before - after);
            }
        }
        Ok(OuterFunction { knots, jumps, log_tail })
    }

    pub fn exponent(&self, z: C64) -> C64 {
        let mut s = ZERO;
        for (&t, &d) in self.knots.iter().zip(&self.jumps) {
            let log = if z.im > 0.0 {
                (t - z).ln()
            } else {
                let r = (t - z.re).abs().max(1e-300);
                C64::new(r.ln(), if t < z.re { -PI } else { 0.0 })
            };
            s += log * d;
        }
        C64::new(self.log_tail, 0.0) + s * C64::new(0.0, -1.0 / PI)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.exponent(z).exp()
    }
}

pub fn outer_function(h: &BoundaryFunction, z: C64) -> Result<C64> {
    Ok(OuterFunction::new(h)?.eval(z))
}

/// `Π (z − zₖ)/(z − z̄ₖ)`.
pub fn blaschke(zeros: &[C64], z: C64) -> C64 {
    zeros
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, &zk| acc * ((z - zk) / (z - zk.conj())))
}

/// `u·Log u − u` with an explicit branch for `u` on the negative axis.
fn p_term(u: C64, upper: bool) -> C64 {
    if u == ZERO {
        return ZERO;
    }
    let log = if u.im == 0.0 && u.re < 0.0 {
        C64::new((-u.re).ln(), if upper { PI } else { -PI })
    } else {
        u.ln()
    };
    u * log - u
}

/// `∫_{t1}^{t2} Log(s + it) dt`, splitting at the branch cut.
fn log_column(s: f64, t1: f64, t2: f64) -> C64 {
    let minus_i = C64::new(0.0, -1.0);
    let u = |t: f64| C64::new(s, t);
    if s < 0.0 && t1 < 0.0 && t2 > 0.0 {
        let upper = p_term(u(t2), true) - p_term(C64::new(s, 0.0), true);
        let lower = p_term(C64::new(s, 0.0), false) - p_term(u(t1), false);
        return minus_i * (upper + lower);
    }
    // at t = 0 the side is the one the interval lies on
    let above = t1 >= 0.0;
    minus_i * (p_term(u(t2), above) - p_term(u(t1), above))
}

/// Exact `∫_C dA(ξ)/(ξ − z)` over a rectangle.
pub fn rectangle_cauchy(c: &Cell, z: C64) -> C64 {
    let (s1, s2) = (c.x0 - z.re, c.x1 - z.re);
    let (t1, t2) = (c.y0 - z.im, c.y1 - z.im);
    log_column(s2, t1, t2) - log_column(s1, t1, t2)
}

/// Quadrature form of the explicit solution
/// `b(z) = (2i/π)∫ Im ξ·F(ξ)·K(ξ, z)/((z − ξ)(z − ξ̄)) dA(ξ)`, with
/// `K(ξ, z) = exp ∫_{Im w < Im ξ} (i/(ξ − w̄) − i/(z − w̄))|F(w)| dA(w)`.
///
/// Prefactor `2i/π` makes `∂̄b = F`. Masses sit at cell midpoints.
#[derive(Clone, Debug)]
pub struct JonesSolver {
    cells: Vec<Cell>,
    mids: Vec<C64>,
    f: Vec<C64>,
    /// `|F|·area`.
    mass: Vec<f64>,
    /// Cell indices by increasing midpoint height.
    order: Vec<usize>,
    /// `∫_{S(ξ)} i|F(w)|/(ξ − w̄) dA(w)` at each midpoint.
    a_self: Vec<C64>,
}

impl JonesSolver {
    /// Cells with `F = 0` at the midpoint stay: a probe inside one still
    /// anchors there.
    pub fn new(cells: &[Cell], f: &[C64]) -> Self {
        let cells = cells.to_vec();
        let f = f.to_vec();
        let mids: Vec<C64> = cells.iter().map(|c| c.mid()).collect();
        let mass: Vec<f64> = cells.iter().zip(&f).map(|(c, v)| v.norm() * c.area()).collect();
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| mids[a].im.total_cmp(&mids[b].im).then(a.cmp(&b)));
        let mut solver = JonesSolver {
            cells,
            mids,
            f,
            mass,
            order,
            a_self: Vec::new(),
        };
        solver.a_self = (0..solver.cells.len())
            .into_par_iter()
            .map(|k| solver.below_sum(solver.mids[k].im, solver.mids[k]))
            .collect();
        solver
    }

    /// True when no cell carries mass.
    pub fn is_empty(&self) -> bool {
        self.f.iter().all(|&v| v == ZERO)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// `Σ_{Im w < y} i·mass_w/(p − w̄)`.
    fn below_sum(&self, y: f64, p: C64) -> C64 {
        let mut s = ZERO;
        for &w in &self.order {
            if self.mids[w].im >= y {
                break;
            }
            if self.mass[w] == 0.0 {
                continue;
            }
            s += C64::i() * self.mass[w] / (p - self.mids[w].conj());
        }
        s
    }

    /// `Σ_{Im w < Im ξ_k} i·mass_w/(z − w̄)` for every cell `k`.
    fn gammas(&self, z: C64) -> Vec<C64> {
        let mut out = vec![ZERO; self.cells.len()];
        let mut acc = ZERO;
        let mut k = 0;
        while k < self.order.len() {
            let y = self.mids[self.order[k]].im;
            let mut e = k;
            while e < self.order.len() && self.mids[self.order[e]].im == y {
                out[self.order[e]] = acc;
                e += 1;
            }
            for &w in self.order[k..e].iter().filter(|&&w| self.mass[w] != 0.0) {
                acc += C64::i() * self.mass[w] / (z - self.mids[w].conj());
            }
            k = e;
        }
        out
    }

    /// `−(2i/π)·Im ξ·K(ξ, z)/(z − ξ̄)`: the kernel is this factor over `ξ − z`.
    fn smooth_factor(xi: C64, z: C64, k_exponent: C64) -> C64 {
        C64::new(0.0, -2.0 / PI) * xi.im * k_exponent.exp() / (z - xi.conj())
    }

    pub fn cell(&self, k: usize) -> &Cell {
        &self.cells[k]
    }

    pub fn cell_containing(&self, p: C64) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(p))
    }

    /// Midpoint sum at `z`; the cell holding `anchor` (value `f_anchor` there)
    /// is replaced by its exact Cauchy transform with the smooth factor
    /// frozen at the anchor.
    pub fn eval(&self, z: C64, anchor: Option<(C64, C64)>) -> C64 {
        let skip = anchor.and_then(|(p, _)| self.cell_containing(p));
        let gam = self.gammas(z);
        let mut b = ZERO;
        #[allow(clippy::needless_range_loop)]
        for k in 0..self.cells.len() {
            if Some(k) == skip || self.f[k] == ZERO {
                continue;
            }
            let xi = self.mids[k];
            let factor = Self::smooth_factor(xi, z, self.a_self[k] - gam[k]);
            b += factor * self.f[k] * self.cells[k].area() / (xi - z);
        }
        if let (Some(k), Some((p, fp))) = (skip, anchor) {
            let k_exp = self.below_sum(p.im, p) - self.below_sum(p.im, z);
            b += Self::smooth_factor(p, z, k_exp) * fp * rectangle_cauchy(&self.cells[k], z);
        }
        b
    }

    /// Carleson norm of `|F| dA` on offset-0 dyadic boxes.
    pub fn carleson_norm(&self, max_gen: i32) -> f64 {
        let masses: Vec<MassPoint> = self
            .mids
            .iter()
            .zip(&self.mass)
            .map(|(&z, &mass)| MassPoint { z, mass })
            .collect();
        carleson_norm(&masses, -2, max_gen).0
    }

    pub fn sup_abs_f(&self) -> f64 {
        self.f.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Stencil offsets: center, `±h`, `±ih`.
pub const STENCIL: [(f64, f64); 5] = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];

/// `∂̄` from a five-point stencil with step `h`.
pub fn dbar_from_stencil(s: &[C64; 5], h: f64) -> C64 {
    let dx = (s[1] - s[2]) / (2.0 * h);
    let dy = (s[3] - s[4]) / (2.0 * h);
    0.5 * (dx + C64::i() * dy)
}

/// `|∂̄f|·Im z/(1 − |f|²)` at the stencil center.
pub fn dbar_budget(s: &[C64; 5], z: C64, h: f64) -> f64 {
    dbar_from_stencil(s, h).norm() * z.im / (1.0 - s[0].norm_sqr())
}

/// `f = φ − ½·B·E(1 − |φ|²)·b` with `∂̄b = 2∂̄φ/(B·E(1 − |φ|²))`.
#[derive(Clone, Debug)]
pub struct AnalyticInterpolant {
    phi: SmoothInterpolant,
    zeros: Vec<C64>,
    outer: OuterFunction,
    boundary: BoundaryFunction,
    jones: JonesSolver,
    fd_step: f64,
}

impl AnalyticInterpolant {
    pub fn phi(&self) -> &SmoothInterpolant {
        &self.phi
    }

    pub fn zeros(&self) -> &[C64] {
        &self.zeros
    }

    pub fn outer(&self) -> &OuterFunction {
        &self.outer
    }

    /// `1 − |φ|²` on the real axis.
    pub fn boundary(&self) -> &BoundaryFunction {
        &self.boundary
    }

    pub fn jones(&self) -> &JonesSolver {
        &self.jones
    }

    /// Right-hand side `F` of the ∂̄-problem.
    pub fn source(&self, xi: C64) -> Result<C64> {
        source(&self.phi, &self.zeros, &self.outer, xi, self.fd_step)
    }

    fn correction_factor(&self, z: C64) -> C64 {
        0.5 * blaschke(&self.zeros, z) * self.outer.eval(z)
    }

    fn anchor_at(&self, z0: C64) -> Result<Option<(C64, C64)>> {
        if z0.im > 0.0 && self.jones.cell_containing(z0).is_some() {
            Ok(Some((z0, self.source(z0)?)))
        } else {
            Ok(None)
        }
    }

    fn b_anchored(&self, z: C64, anchor: C64) -> Result<C64> {
        let a = self.anchor_at(anchor)?;
        if self.jones.is_empty() && a.is_none_or(|(_, fa)| fa == ZERO) {
            return Ok(ZERO);
        }
        Ok(self.jones.eval(z, a))
    }

    /// `b` with the singular cell anchored at `z` itself.
    pub fn b(&self, z: C64) -> Result<C64> {
        self.b_anchored(z, z)
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let phi = if z.im > 0.0 { self.phi.eval(z)? } else { self.phi.phi0(C64::new(z.re, 0.0))? };
        Ok(phi - self.correction_factor(z) * self.b(z)?)
    }

    /// `f` at the five stencil points around `z0`, one anchoring for all.
    pub fn stencil(&self, z0: C64, h: f64) -> Result<[C64; 5]> {
        let anchor = self.anchor_at(z0)?;
        let mut out = [ZERO; 5];
        for (k, (sx, sy)) in STENCIL.iter().enumerate() {
            let z = z0 + C64::new(sx * h, sy * h);
            let b = self.jones.eval(z, anchor);
            out[k] = self.phi.eval(z)? - self.correction_factor(z) * b;
        }
        Ok(out)
    }
}

fn source(phi: &SmoothInterpolant, zeros: &[C64], outer: &OuterFunction, xi: C64, fd_step: f64) -> Result<C64> {
    let d = phi.dbar_ac(xi, fd_step)?;
    if d == ZERO {
        return Ok(ZERO);
    }
    let den = blaschke(zeros, xi) * outer.eval(xi);
    if den == ZERO {
        return Err(Error::Numerical(format!("∂̄φ is nonzero at the zero {xi}")));
    }
    Ok(2.0 * d / den)
}

/// `1 − |φ(x + i0)|²` as exact piecewise constant data: the averaged map is
/// constant on the real axis between endpoints of the pieces' intervals.
pub fn boundary_data(phi: &SmoothInterpolant) -> Result<BoundaryFunction> {
    let mut knots: Vec<f64> = phi
        .pieces()
        .iter()
        .flat_map(|p| {
            p.family()
                .nodes()
                .iter()
                .flat_map(|n| [n.interval.left(), n.interval.right()])
        })
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    if knots.len() < 2 {
        return Ok(BoundaryFunction::constant(1.0));
    }
    let values: Vec<f64> = knots
        .par_windows(2)
        .map(|w| Ok(1.0 - phi.phi0(C64::new(0.5 * (w[0] + w[1]), 0.0))?.norm_sqr()))
        .collect::<Result<_>>()?;
    Ok(BoundaryFunction::new(knots, values, 1.0)?.simplified())
}

/// Builds `f` from the smooth interpolant and the node set.
pub fn assemble_f(phi: SmoothInterpolant, zeros: Vec<C64>, fd_step: f64) -> Result<AnalyticInterpolant> {
    let boundary = boundary_data(&phi)?;
    let outer = OuterFunction::new(&boundary)?;
    let cells = phi.support_cells();
    let f: Vec<C64> = cells
        .par_iter()
        .map(|c| source(&phi, &zeros, &outer, c.mid(), fd_step))
        .collect::<Result<_>>()?;
    let jones = JonesSolver::new(&cells, &f);
    Ok(AnalyticInterpolant {
        phi,
        zeros,
        outer,
        boundary,
        jones,
        fd_step,
    })
}

/// Interpolant on the union of two separated sequences:
/// `h = f + B₁·g·E(1 − |f|)` with `g(zₙ⁽²⁾) = wₙ*`.
#[derive(Clone, Debug)]
pub struct CombinedInterpolant {
    first: AnalyticInterpolant,
    second: Option<AnalyticInterpolant>,
    outer: Option<OuterFunction>,
    w_star: Vec<C64>,
}

impl CombinedInterpolant {
    pub fn first(&self) -> &AnalyticInterpolant {
        &self.first
    }

    pub fn second(&self) -> Option<&AnalyticInterpolant> {
        self.second.as_ref()
    }

    pub fn w_star(&self) -> &[C64] {
        &self.w_star
    }

    fn glue(&self, z: C64, f: C64, g: C64) -> C64 {
        match &self.outer {
            Some(e) => f + blaschke(self.first.zeros(), z) * g * e.eval(z),
            None => f,
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let f = self.first.eval(z)?;
        match &self.second {
            Some(s) => Ok(self.glue(z, f, s.eval(z)?)),
            None => Ok(f),
        }
    }

    pub fn stencil(&self, z0: C64, h: f64) -> Result<[C64; 5]> {
        let f = self.first.stencil(z0, h)?;
        let Some(s) = &self.second else { return Ok(f) };
        let g = s.stencil(z0, h)?;
        let mut out = [ZERO; 5];
        for (k, (sx, sy)) in STENCIL.iter().enumerate() {
            out[k] = self.glue(z0 + C64::new(sx * h, sy * h), f[k], g[k]);
        }
        Ok(out)
    }
}

/// Target values for the auxiliary problem:
/// `wₙ* = (wₙ⁽²⁾ − f(zₙ⁽²⁾))/(B₁(zₙ⁽²⁾)·E(1 − |f|)(zₙ⁽²⁾))`.
pub fn auxiliary_values(f: &AnalyticInterpolant, outer: &OuterFunction, points2: &[C64], values2: &[C64]) -> Result<Vec<C64>> {
    points2
        .iter()
        .zip(values2)
        .map(|(&z, &w)| {
            let den = blaschke(f.zeros(), z) * outer.eval(z);
            if den == ZERO {
                return Err(Error::Domain(format!("second-sequence point {z} hits a first-sequence zero")));
            }
            Ok((w - f.eval(z)?) / den)
        })
        .collect()
}

/// Solves the second problem with `build_second` and glues it to `f`.
///
/// `boundary_xs` samples `1 − |f|` on the real axis (value 1 outside).
pub fn combine_two_sequences(
    f: AnalyticInterpolant,
    points2: &[C64],
    values2: &[C64],
    boundary_xs: &[f64],
    budget: f64,
    build_second: impl FnOnce(&[C64], &[C64]) -> Result<AnalyticInterpolant>,
) -> Result<CombinedInterpolant> {
    if points2.is_empty() {
        return Ok(CombinedInterpolant {
            first: f,
            second: None,
            outer: None,
            w_star: Vec::new(),
        });
    }
    let h: Vec<f64> = boundary_xs
        .par_iter()
        .map(|&x| Ok(1.0 - f.eval(C64::new(x, 0.0))?.norm()))
        .collect::<Result<_>>()?;
    if let Some(bad) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "|f| reaches 1 on the real axis at x = {}",
            boundary_xs[bad]
        )));
    }
    let outer = OuterFunction::new(&BoundaryFunction::from_samples(boundary_xs, &h, 1.0)?)?;
    let w_star = auxiliary_values(&f, &outer, points2, values2)?;
    let worst = w_star.iter().map(|w| w.norm()).fold(0.0, f64::max);
    if worst > budget {
        return Err(Error::Refused(format!(
            "auxiliary values reach {worst:.4}, above the budget {budget}"
        )));
    }
    let g = build_second(points2, &w_star)?;
    Ok(CombinedInterpolant {
        first: f,
        second: Some(g),
        outer: Some(outer),
        w_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rho_pair_hp;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn indicator(a: f64, b: f64, v: f64) -> BoundaryFunction {
        BoundaryFunction::new(vec![a, b], vec![v], 0.0).unwrap()
    }

    #[test]
    fn poisson_examples() {
        let one = BoundaryFunction::constant(1.0);
        assert!((poisson_integral(&one, c(0.3, 0.2)).unwrap() - 1.0).abs() < 1e-15);
        let ind = indicator(-1.0, 1.0, 1.0);
        assert!((poisson_integral(&ind, c(0.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        let odd = BoundaryFunction::new(vec![-1.0, 0.0, 1.0], vec![-1.0, 1.0], 0.0).unwrap();
        assert!(poisson_integral(&odd, c(0.0, 0.7)).unwrap().abs() < 1e-15);
        assert!(poisson_integral(&odd, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn poisson_matches_brute_force() {
        let u = BoundaryFunction::new(vec![-0.5, 0.1, 0.4], vec![2.0, -1.0], 0.3).unwrap();
        let z = c(0.05, 0.2);
        // t = x + y·tan θ turns the kernel into dθ/π on (−π/2, π/2)
        let n = 2_000_000;
        let dth = PI / n as f64;
        let s: f64 = (0..n)
            .map(|k| u.eval(z.re + z.im * (-PI / 2.0 + (k as f64 + 0.5) * dth).tan()) * dth / PI)
            .sum();
        assert!((s - poisson_integral(&u, z).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn bmo_examples() {
        assert_eq!(bmo_norm(&BoundaryFunction::constant(3.0), 8), 0.0);
        let sign = BoundaryFunction::new(vec![-1.0, 0.0, 1.0], vec![-1.0, 1.0], 0.0).unwrap();
        assert!((bmo_norm(&sign, 8) - 1.0).abs() < 1e-15);
        assert!((mean_oscillation(&sign, -1.0, 1.0) - 1.0).abs() < 1e-15);
        let scaled = sign.map(|v| -2.5 * v);
        assert!((bmo_norm(&scaled, 8) - 2.5 * bmo_norm(&sign, 8)).abs() < 1e-14);
    }

    #[test]
    fn outer_examples() {
        let one = BoundaryFunction::constant(1.0);
        assert_eq!(outer_function(&one, c(0.2, 0.3)).unwrap(), c(1.0, 0.0));
        let h = BoundaryFunction::new(vec![-1.0, 1.0], vec![std::f64::consts::E], 1.0).unwrap();
        let e = outer_function(&h, c(0.0, 1.0)).unwrap();
        assert!((e.norm() - 0.5f64.exp()).abs() < 1e-14);
        assert!((outer_function(&h, c(0.0, 1e6)).unwrap().norm() - 1.0).abs() < 1e-5);
        assert!(outer_function(&BoundaryFunction::new(vec![0.0, 1.0], vec![0.0], 1.0).unwrap(), c(0.0, 1.0)).is_err());
    }

    #[test]
    fn outer_modulus_is_poisson_of_log() {
        let h = BoundaryFunction::new(vec![-0.3, 0.2, 0.25, 0.9], vec![0.5, 0.9, 0.7], 0.8).unwrap();
        let log_h = h.map(f64::ln);
        let e = OuterFunction::new(&h).unwrap();
        for z in [c(0.0, 0.1), c(0.22, 0.01), c(3.0, 2.0)] {
            let p = poisson_integral(&log_h, z).unwrap();
            assert!((e.eval(z).norm().ln() - p).abs() < 1e-13);
        }
        // boundary modulus equals h off the knots
        for x in [-1.0, 0.0, 0.21, 0.5, 2.0] {
            assert!((e.eval(c(x, 0.0)).norm() - h.eval(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn outer_is_analytic() {
        let h = BoundaryFunction::new(vec![-0.3, 0.2, 0.9], vec![0.5, 0.9], 1.0).unwrap();
        let e = OuterFunction::new(&h).unwrap();
        let z = c(0.1, 0.05);
        let hh = 1e-6;
        let s: [C64; 5] = STENCIL.map(|(a, b)| e.eval(z + c(a * hh, b * hh)));
        assert!(dbar_from_stencil(&s, hh).norm() < 1e-6);
    }

    #[test]
    fn blaschke_examples() {
        let i = c(0.0, 1.0);
        assert_eq!(blaschke(&[i], i), ZERO);
        assert!((blaschke(&[i], c(3.7, 0.0)).norm() - 1.0).abs() < 1e-15);
        assert!((blaschke(&[i], c(0.0, 2.0)).norm() - 1.0 / 3.0).abs() < 1e-15);
        for z in [c(0.4, 0.1), c(-2.0, 3.0)] {
            let zeta = c(0.3, 0.7);
            assert!((blaschke(&[zeta], z).norm() - rho_pair_hp(z, zeta).0).abs() < 1e-15);
        }
    }

    #[test]
    fn rectangle_transform_matches_quadrature() {
        let cell = Cell {
            x0: 0.0,
            x1: 0.5,
            y0: 1.0,
            y1: 1.25,
        };
        let brute = |z: C64, n: usize| {
            let mut s = ZERO;
            let (dx, dy) = ((cell.x1 - cell.x0) / n as f64, (cell.y1 - cell.y0) / n as f64);
            for i in 0..n {
                for j in 0..n {
                    let xi = c(cell.x0 + (i as f64 + 0.5) * dx, cell.y0 + (j as f64 + 0.5) * dy);
                    s += dx * dy / (xi - z);
                }
            }
            s
        };
        for z in [c(2.0, 0.3), c(0.25, 0.9), c(-0.4, 1.1), c(0.7, 1.3)] {
            assert!((rectangle_cauchy(&cell, z) - brute(z, 400)).norm() < 1e-6, "{z}");
        }
        // inside: the singularity is integrable, midpoint converges slowly
        let z = c(0.1003, 1.1107);
        assert!((rectangle_cauchy(&cell, z) - brute(z, 1500)).norm() < 2e-3);
        // ∂̄ of the transform is −π inside and 0 outside
        let h = 1e-6;
        let s: [C64; 5] = STENCIL.map(|(a, b)| rectangle_cauchy(&cell, z + c(a * h, b * h)));
        assert!((dbar_from_stencil(&s, h) + PI).norm() < 1e-5);
        let zo = c(0.9, 0.5);
        let s: [C64; 5] = STENCIL.map(|(a, b)| rectangle_cauchy(&cell, zo + c(a * h, b * h)));
        assert!(dbar_from_stencil(&s, h).norm() < 1e-5);
    }

    fn unit_cell(l: f64) -> Cell {
        Cell {
            x0: 0.0,
            x1: l,
            y0: 0.5 * l,
            y1: l,
        }
    }

    #[test]
    fn jones_zero_source() {
        let j = JonesSolver::new(&[unit_cell(1.0)], &[ZERO]);
        assert!(j.is_empty());
        assert_eq!(j.eval(c(0.3, 0.2), None), ZERO);
    }

    #[test]
    fn jones_single_cell_dbar() {
        let cell = unit_cell(0.25);
        let j = JonesSolver::new(&[cell], &[c(1.0, 0.0)]);
        let z0 = cell.mid();
        let h = 1e-7;
        let s: [C64; 5] = STENCIL.map(|(a, b)| j.eval(z0 + c(a * h, b * h), Some((z0, c(1.0, 0.0)))));
        assert!((dbar_from_stencil(&s, h) - 1.0).norm() < 1e-3);
    }

    #[test]
    fn jones_boundary_scales_with_carleson_norm() {
        let mut ratios = Vec::new();
        for k in 0..3 {
            let l = (-(k as f64)).exp2();
            let cells: Vec<Cell> = unit_cell(l).split(8).collect();
            let f = vec![c(1.0, 0.0); cells.len()];
            let j = JonesSolver::new(&cells, &f);
            let sup = (0..200)
                .map(|t| j.eval(c(-l + 3.0 * l * t as f64 / 200.0, 0.0), None).norm())
                .fold(0.0, f64::max);
            ratios.push(sup / j.carleson_norm(12));
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 2.0, "{ratios:?}");
    }
}
