//! Interpolating maps `ℝ²₊ → 𝔻` with hyperbolic Lipschitz control.
//!
//! Points are first thinned to well separated box centers, each center is
//! flanked by its two horizontal neighbours, and for every grid offset a
//! piecewise interpolant is built from tent functions on an intermediate
//! family. The smooth interpolant is the barycenter of the offset family,
//! patched to be exactly constant near every original node.
//!
//! A piece built on the grid with offset `s` plays the role of
//! `z ↦ φ_t(z + t)` for `t = −s`, so no evaluation point is ever translated.

use crate::barycenter::barycenter_disc;
use crate::config::RunConfig;
use crate::covering::{build_intermediate, CoveringParams, IntermediateFamily};
use crate::dyadic::{generation_of_height, locate, locate_extended, DyadicInterval, IntervalFamily, Offset};
use crate::error::{Error, Result};
use crate::geometry::{beta_disc, beta_hp, geodesic_disc, natural_disc, natural_hp};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{LN_2, PI};

/// Anchor above the unit box carrying value 0; it stands for the virtual
/// super-root of every tree.
pub const SEED: C64 = C64::new(0.5, 1.5);

/// Minimum separation of the centers handed to the augmentation.
pub const AUGMENT_SEPARATION: f64 = 5.0;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thinned {
    /// `centers[0]` is [`SEED`].
    pub centers: Vec<C64>,
    pub values: Vec<C64>,
    /// Offset-0 interval whose top holds each center; `None` for the seed.
    pub intervals: Vec<Option<DyadicInterval>>,
    /// Covering center for each original point.
    pub assignment: Vec<usize>,
    /// Smallest `β_hp` between centers (`+∞` for the seed alone).
    pub separation: f64,
}

/// Greedy thinning by decreasing height: the highest uncovered point
/// contributes the center of its box, valued by the nearest original point.
pub fn thin_wellseparated(points: &[C64], values: &[C64], n: f64) -> Thinned {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .im
            .total_cmp(&points[a].im)
            .then(points[a].re.total_cmp(&points[b].re))
            .then(a.cmp(&b))
    });
    let mut centers = vec![SEED];
    let mut center_values = vec![ZERO];
    let mut intervals = vec![None];
    loop {
        let next = order
            .iter()
            .copied()
            .find(|&k| centers.iter().all(|&c| beta_hp(points[k], c) > n));
        let Some(k) = next else { break };
        let iv = locate_extended(points[k], Offset::ZERO).expect("point lies in the half-plane");
        let c = iv.center();
        let nearest = (0..points.len())
            .min_by(|&a, &b| beta_hp(points[a], c).total_cmp(&beta_hp(points[b], c)).then(a.cmp(&b)))
            .expect("non-empty");
        centers.push(c);
        center_values.push(values[nearest]);
        intervals.push(Some(iv));
    }
    let assignment = points
        .iter()
        .map(|&p| {
            centers
                .iter()
                .position(|&c| beta_hp(p, c) <= n)
                .expect("every point is covered")
        })
        .collect();
    Thinned {
        separation: min_pairwise(&centers),
        centers,
        values: center_values,
        intervals,
        assignment,
    }
}

fn min_pairwise(points: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in 0..i {
            best = best.min(beta_hp(points[i], points[j]));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Augmented {
    /// Triples `z, z − 4y/3, z + 4y/3` per center, in input order.
    pub points: Vec<C64>,
    pub values: Vec<C64>,
    pub separation: f64,
}

/// Flanks every center with its left and right neighbours at the same height.
pub fn augment_sundberg(centers: &[C64], values: &[C64]) -> Result<Augmented> {
    for i in 0..centers.len() {
        for j in 0..i {
            let b = beta_hp(centers[i], centers[j]);
            if !(b > AUGMENT_SEPARATION) {
                return Err(Error::Refused(format!(
                    "centers {} and {} are {b:.4} apart, need more than {AUGMENT_SEPARATION}",
                    centers[j], centers[i]
                )));
            }
        }
    }
    let mut points = Vec::with_capacity(3 * centers.len());
    let mut out_values = Vec::with_capacity(3 * centers.len());
    for (&c, &w) in centers.iter().zip(values) {
        let shift = 4.0 * c.im / 3.0;
        points.extend([c, c - shift, c + shift]);
        out_values.extend([w, w, w]);
    }
    let separation = min_pairwise(&points);
    if separation == 0.0 {
        return Err(Error::Numerical("augmented points coincide".into()));
    }
    Ok(Augmented {
        points,
        values: out_values,
        separation,
    })
}

/// Edges between two nodes; `None` is the super-root.
pub fn tree_distance(fam: &IntermediateFamily, a: Option<usize>, b: Option<usize>) -> usize {
    let nodes = fam.nodes();
    let depth = |n: Option<usize>| n.map_or(0, |k| nodes[k].depth);
    let up = |n: Option<usize>| n.and_then(|k| nodes[k].parent);
    let (mut a, mut b) = (a, b);
    let mut d = 0;
    while depth(a) > depth(b) {
        a = up(a);
        d += 1;
    }
    while depth(b) > depth(a) {
        b = up(b);
        d += 1;
    }
    while a != b {
        a = up(a);
        b = up(b);
        d += 2;
    }
    d
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeValues {
    pub values: Vec<C64>,
    /// Largest `β_disc` step along an edge, including edges to the super-root.
    pub edge_lipschitz: f64,
}

/// Extends node values from the constrained nodes (plus the super-root,
/// value 0) to the whole tree.
///
/// Parents precede children in `fam.nodes()`, so one top-down pass suffices:
/// a node steps from its parent's value toward its nearest constrained
/// descendant by one edge's share of the geodesic, and copies the parent
/// when nothing below it is constrained.
pub fn tree_extend_values(fam: &IntermediateFamily, constrained: &BTreeMap<usize, C64>, l: f64) -> Result<TreeValues> {
    let nodes = fam.nodes();
    let keys: Vec<Option<usize>> = std::iter::once(None).chain(constrained.keys().map(|&k| Some(k))).collect();
    let value_of = |k: Option<usize>| k.map_or(ZERO, |k| constrained[&k]);
    for i in 0..keys.len() {
        for j in 0..i {
            let d = tree_distance(fam, keys[i], keys[j]) as f64;
            let b = beta_disc(value_of(keys[i]), value_of(keys[j]));
            if b > l * d * (1.0 + 1e-12) {
                let name = |k: Option<usize>| k.map_or("super-root".to_string(), |k| format!("{:?}", nodes[k].interval));
                return Err(Error::Refused(format!(
                    "constrained pair {} / {} violates tree-Lipschitz {l:.6}: β = {b:.6} over {d} edges",
                    name(keys[j]),
                    name(keys[i])
                )));
            }
        }
    }
    // nearest constrained descendant, ties to the smaller node index
    let mut nearest: Vec<Option<(usize, usize)>> = vec![None; nodes.len()];
    for k in (0..nodes.len()).rev() {
        if constrained.contains_key(&k) {
            nearest[k] = Some((0, k));
            continue;
        }
        nearest[k] = nodes[k]
            .children
            .iter()
            .filter_map(|&c| nearest[c].map(|(d, t)| (d + 1, t)))
            .min();
    }
    let mut values = vec![ZERO; nodes.len()];
    let mut edge: f64 = 0.0;
    for k in 0..nodes.len() {
        let wp = nodes[k].parent.map_or(ZERO, |p| values[p]);
        values[k] = match (constrained.get(&k), nearest[k]) {
            (Some(&w), _) => w,
            (None, Some((d, t))) => geodesic_disc(wp, constrained[&t], 1.0 / (d + 1) as f64),
            (None, None) => wp,
        };
        edge = edge.max(beta_disc(wp, values[k]));
    }
    Ok(TreeValues {
        values,
        edge_lipschitz: edge,
    })
}

/// `min{1, 6(1 − y/|I|)}` on `Q(I)`, zero elsewhere.
pub fn tent_eval(i: &DyadicInterval, z: C64) -> f64 {
    if !i.in_box(z) {
        return 0.0;
    }
    (6.0 * (1.0 - z.im / i.length())).min(1.0)
}

/// `Σ b⁺ₙψₙ` for one grid offset.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseInterpolant {
    family: IntermediateFamily,
    values: Vec<C64>,
    coeffs: Vec<C64>,
    lipschitz: f64,
    edge_lipschitz: f64,
}

impl PiecewiseInterpolant {
    /// Assembles an interpolant from explicit node values.
    pub fn from_values(family: IntermediateFamily, values: Vec<C64>, lipschitz: f64) -> Self {
        let nodes = family.nodes();
        let coeffs: Vec<C64> = nodes
            .iter()
            .zip(&values)
            .map(|(n, &w)| w - n.parent.map_or(ZERO, |p| values[p]))
            .collect();
        let edge_lipschitz = nodes
            .iter()
            .zip(&values)
            .map(|(n, &w)| beta_disc(w, n.parent.map_or(ZERO, |p| values[p])))
            .fold(0.0, f64::max);
        PiecewiseInterpolant {
            family,
            values,
            coeffs,
            lipschitz,
            edge_lipschitz,
        }
    }

    pub fn family(&self) -> &IntermediateFamily {
        &self.family
    }

    pub fn offset(&self) -> Offset {
        self.family.offset()
    }

    /// `w⁺` per node.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// `b⁺ₙ = w⁺ₙ − w⁺_parent`.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Tree-Lipschitz bound the constraints were checked against.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn edge_lipschitz(&self) -> f64 {
        self.edge_lipschitz
    }

    /// Only the deepest box containing `z` can be on its ramp; every box
    /// above it has `ψ = 1`, so the sum telescopes to the parent value plus
    /// one ramp term.
    pub fn eval(&self, z: C64) -> C64 {
        let Some(k) = self.family.deepest_containing(z.re, z.im.max(0.0)) else {
            return ZERO;
        };
        let node = &self.family.nodes()[k];
        let t = 6.0 * (1.0 - z.im / node.interval.length());
        if t >= 1.0 {
            return self.values[k];
        }
        let wp = node.parent.map_or(ZERO, |p| self.values[p]);
        wp + (self.values[k] - wp) * t
    }

    /// Largest `d(φ(a), φ(b))/d(a, b)` over vertical pairs in the tops of
    /// boxes with a nonzero coefficient, natural units on both sides.
    pub fn vertical_audit(&self) -> f64 {
        const H: [f64; 7] = [0.52, 0.6, 0.7, 0.8, 0.84, 0.9, 0.98];
        let mut worst: f64 = 0.0;
        for (node, b) in self.family.nodes().iter().zip(&self.coeffs) {
            if *b == ZERO {
                continue;
            }
            let l = node.interval.length();
            let x = node.interval.midpoint();
            let pts: Vec<C64> = H.iter().map(|h| C64::new(x, h * l)).collect();
            for w in pts.windows(2) {
                let r = natural_disc(self.eval(w[0]), self.eval(w[1])) / natural_hp(w[0], w[1]);
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Builds the piece on grid `offset` for augmented data.
///
/// Constraints are the located boxes of the points. The tree-Lipschitz bound
/// is `2ε·κ`, with `κ` the largest `β_disc(z_a, z_b)/d_tree(a, b)` over
/// constrained pairs (the seed standing in for the super-root); the factor 2
/// absorbs the snapping of points to box centers.
pub fn build_phi_t(
    points: &[C64],
    values: &[C64],
    offset: Offset,
    params: &CoveringParams,
    epsilon: f64,
) -> Result<PiecewiseInterpolant> {
    let mut by_interval: BTreeMap<DyadicInterval, (C64, C64)> = BTreeMap::new();
    for (&z, &w) in points.iter().zip(values) {
        let iv = locate(z, offset).ok_or_else(|| Error::Usage(format!("point {z} lies above the unit box")))?;
        if let Some(&(z0, w0)) = by_interval.get(&iv) {
            if w0 != w {
                return Err(Error::Refused(format!(
                    "points {z0} and {z} share the box {iv:?} with different values"
                )));
            }
        }
        by_interval.entry(iv).or_insert((z, w));
    }
    let a = IntervalFamily::from_intervals(offset, by_interval.keys().copied())?;
    let family = build_intermediate(&a, None, params)?;
    let mut constrained = BTreeMap::new();
    let mut anchor: HashMap<usize, C64> = HashMap::new();
    for (iv, &(z, w)) in &by_interval {
        let k = family.node_of(iv).expect("occupied intervals belong to the family");
        constrained.insert(k, w);
        anchor.insert(k, z);
    }
    let keys: Vec<Option<usize>> = std::iter::once(None).chain(constrained.keys().map(|&k| Some(k))).collect();
    let point_of = |k: Option<usize>| k.map_or(SEED, |k| anchor[&k]);
    let mut kappa: f64 = 0.0;
    for i in 0..keys.len() {
        for j in 0..i {
            let d = tree_distance(&family, keys[i], keys[j]) as f64;
            kappa = kappa.max(2.0 * beta_hp(point_of(keys[i]), point_of(keys[j])) / d);
        }
    }
    let l = 2.0 * epsilon * kappa;
    let ext = tree_extend_values(&family, &constrained, l)?;
    Ok(PiecewiseInterpolant::from_values(family, ext.values, l))
}

/// Exact constancy disc around an original node, blended to the averaged
/// map over the annulus `δ ≤ β_hp ≤ 2δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: C64,
    pub value: C64,
    pub radius: f64,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Axis-aligned quadrature cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cell {
    pub fn mid(&self) -> C64 {
        C64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, z: C64) -> bool {
        self.x0 <= z.re && z.re < self.x1 && self.y0 < z.im && z.im <= self.y1
    }

    pub fn split(&self, k: usize) -> impl Iterator<Item = Cell> + '_ {
        let dx = (self.x1 - self.x0) / k as f64;
        let dy = (self.y1 - self.y0) / k as f64;
        (0..k).flat_map(move |i| {
            (0..k).map(move |j| Cell {
                x0: self.x0 + i as f64 * dx,
                x1: self.x0 + (i + 1) as f64 * dx,
                y0: self.y0 + j as f64 * dy,
                y1: self.y0 + (j + 1) as f64 * dy,
            })
        })
    }
}

/// Rows per height band `(ℓ/2, ℓ]`; the ramp `(5ℓ/6, ℓ]` is rows 8..12.
const BAND_ROWS: i64 = 12;
const RAMP_ROWS: std::ops::Range<i64> = 8..12;
const PATCH_SPLIT: usize = 4;

/// Euclidean bounding box `[x0, x1] × [y0, y1]` of `{β_hp(·, c) ≤ r}`.
pub fn hyperbolic_disc_box(c: C64, r: f64) -> Cell {
    let rho = (r * LN_2).tanh();
    let q = 1.0 - rho * rho;
    let yc = c.im * (1.0 + rho * rho) / q;
    let rad = 2.0 * c.im * rho / q;
    Cell {
        x0: c.re - rad,
        x1: c.re + rad,
        y0: yc - rad,
        y1: yc + rad,
    }
}

/// Point at `β_hp` distance `r` from `c` in direction `θ` (disc chart at `c`).
pub fn hp_point_at(c: C64, r: f64, theta: f64) -> C64 {
    let w = C64::from_polar((r * LN_2).tanh(), theta);
    (c - c.conj() * w) / (1.0 - w)
}

/// Translation average of the offset pieces with node patches.
#[derive(Clone, Debug)]
pub struct SmoothInterpolant {
    pieces: Vec<PiecewiseInterpolant>,
    patches: Vec<Patch>,
    tol: f64,
    max_iter: usize,
}

impl SmoothInterpolant {
    pub fn new(pieces: Vec<PiecewiseInterpolant>, patches: Vec<Patch>, tol: f64, max_iter: usize) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Usage("no offset pieces".into()));
        }
        Ok(SmoothInterpolant {
            pieces,
            patches,
            tol,
            max_iter,
        })
    }

    pub fn pieces(&self) -> &[PiecewiseInterpolant] {
        &self.pieces
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// Barycenter of the pieces at `z`, before patching.
    pub fn phi0(&self, z: C64) -> Result<C64> {
        let atoms: Vec<C64> = self.pieces.iter().map(|p| p.eval(z)).collect();
        if atoms.iter().all(|&a| a == atoms[0]) {
            return Ok(atoms[0]);
        }
        let masses = vec![1.0; atoms.len()];
        Ok(barycenter_disc(&atoms, &masses, self.tol, self.max_iter)?.0)
    }

    fn patch_near(&self, z: C64) -> Option<(&Patch, f64)> {
        self.patches.iter().find_map(|p| {
            let b = beta_hp(z, p.center);
            (b < 2.0 * p.radius).then_some((p, b))
        })
    }

    /// Patched value given the unpatched value `base` at `z`.
    fn blend(&self, z: C64, base: C64) -> C64 {
        match self.patch_near(z) {
            Some((p, b)) if b <= p.radius => p.value,
            Some((p, b)) => geodesic_disc(p.value, base, smoothstep((b - p.radius) / p.radius)),
            None => base,
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        if let Some((p, b)) = self.patch_near(z) {
            if b <= p.radius {
                return Ok(p.value);
            }
        }
        Ok(self.blend(z, self.phi0(z)?))
    }

    /// `(∂ₓφ, ∂ᵧφ)` of the absolutely continuous part: the averaged map is
    /// constant in `x` between grid lines, so it is sampled at frozen `x`
    /// and only the patch blend is differenced horizontally.
    pub fn gradient_ac(&self, z: C64, h_rel: f64) -> Result<(C64, C64)> {
        let h = h_rel * z.im;
        let near = self.patches.iter().any(|p| beta_hp(z, p.center) < 2.0 * p.radius + 1e-3);
        if let Some((p, b)) = self.patch_near(z) {
            if b < p.radius * (1.0 - 1e-3) {
                return Ok((ZERO, ZERO));
            }
        }
        let base = self.phi0(z)?;
        let up = self.phi0(z + C64::new(0.0, h))?;
        let down = self.phi0(z - C64::new(0.0, h))?;
        if !near {
            return Ok((ZERO, (up - down) / (2.0 * h)));
        }
        let dx = (self.blend(z + h, base) - self.blend(z - h, base)) / (2.0 * h);
        let dy = (self.blend(z + C64::new(0.0, h), up) - self.blend(z - C64::new(0.0, h), down)) / (2.0 * h);
        Ok((dx, dy))
    }

    /// `∂̄φ = ½(∂ₓ + i∂ᵧ)φ` of the absolutely continuous part.
    pub fn dbar_ac(&self, z: C64, h_rel: f64) -> Result<C64> {
        let (dx, dy) = self.gradient_ac(z, h_rel)?;
        Ok(0.5 * (dx + C64::i() * dy))
    }

    /// Cells covering every place the absolutely continuous gradient can be
    /// nonzero: ramps of boxes with a nonzero coefficient, and patch annuli.
    ///
    /// Cells come from one global tiling (band `(ℓ/2, ℓ]`, 12 rows, columns
    /// of width `ℓ/16` capped by the offset spacing), so they never overlap;
    /// cells meeting a patch are split 4×4.
    pub fn support_cells(&self) -> Vec<Cell> {
        let n_t = self.pieces.len() as f64;
        let width = |g: i32| {
            let l = (-(g as f64)).exp2();
            (l / 16.0).min(1.0 / n_t).max(l / 64.0)
        };
        let mut ramp: BTreeSet<(i32, i64, i64)> = BTreeSet::new();
        for piece in &self.pieces {
            for (node, b) in piece.family().nodes().iter().zip(piece.coeffs()) {
                if *b == ZERO {
                    continue;
                }
                let g = node.interval.generation;
                let w = width(g);
                let c0 = (node.interval.left() / w).floor() as i64;
                let c1 = (node.interval.right() / w).ceil() as i64;
                for r in RAMP_ROWS {
                    for c in c0..c1 {
                        ramp.insert((g, r, c));
                    }
                }
            }
        }
        let mut refined: BTreeSet<(i32, i64, i64)> = BTreeSet::new();
        for p in &self.patches {
            let bx = hyperbolic_disc_box(p.center, 2.0 * p.radius);
            let g_top = generation_of_height(bx.y1);
            let g_bot = generation_of_height(bx.y0.max(f64::MIN_POSITIVE));
            for g in g_top..=g_bot {
                let l = (-(g as f64)).exp2();
                let w = width(g);
                let dy = l / (2 * BAND_ROWS) as f64;
                for r in 0..BAND_ROWS {
                    let y0 = 0.5 * l + r as f64 * dy;
                    if y0 + dy < bx.y0 || y0 > bx.y1 {
                        continue;
                    }
                    for c in (bx.x0 / w).floor() as i64..=(bx.x1 / w).floor() as i64 {
                        refined.insert((g, r, c));
                    }
                }
            }
        }
        let cell_of = |&(g, r, c): &(i32, i64, i64)| {
            let l = (-(g as f64)).exp2();
            let w = width(g);
            let dy = l / (2 * BAND_ROWS) as f64;
            Cell {
                x0: c as f64 * w,
                x1: (c + 1) as f64 * w,
                y0: 0.5 * l + r as f64 * dy,
                y1: 0.5 * l + (r + 1) as f64 * dy,
            }
        };
        let mut cells = Vec::new();
        for key in ramp.union(&refined) {
            let cell = cell_of(key);
            if refined.contains(key) {
                cells.extend(cell.split(PATCH_SPLIT));
            } else {
                cells.push(cell);
            }
        }
        cells
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothDiagnostics {
    pub thinned_centers: usize,
    pub thinned_separation: f64,
    pub augmented_points: usize,
    pub augmented_separation: f64,
    pub patch_radius: f64,
    pub max_c_pack: f64,
    pub max_c_chain: f64,
    pub max_tree_lipschitz: f64,
    pub max_edge_lipschitz: f64,
    pub max_vertical_ratio: f64,
}

/// Full construction for half-plane points normalized into `Q([0, 1))`.
pub fn build_smooth(points: &[C64], values: &[C64], epsilon: f64, cfg: &RunConfig) -> Result<(SmoothInterpolant, SmoothDiagnostics)> {
    if let Some(z) = points.iter().find(|z| !(z.im > 0.0 && z.im <= 1.0 && (0.0..1.0).contains(&z.re))) {
        return Err(Error::Usage(format!("point {z} lies outside the unit box")));
    }
    let thinned = thin_wellseparated(points, values, cfg.thin_separation);
    let aug = augment_sundberg(&thinned.centers[1..], &thinned.values[1..])?;
    let params = CoveringParams::from_config(cfg);
    let bits = cfg.offset_bits();
    let pieces: Vec<PiecewiseInterpolant> = (0..cfg.t_samples as i64)
        .into_par_iter()
        .map(|m| {
            let offset = Offset::from_dyadic(m, bits)?;
            build_phi_t(&aug.points, &aug.values, offset, &params, epsilon)
        })
        .collect::<Result<_>>()?;
    let sep = min_pairwise(points);
    let radius = cfg.node_patch_radius.min(sep / 4.0);
    let patches = points
        .iter()
        .zip(values)
        .map(|(&center, &value)| Patch { center, value, radius })
        .collect();
    let diag = SmoothDiagnostics {
        thinned_centers: thinned.centers.len(),
        thinned_separation: thinned.separation,
        augmented_points: aug.points.len(),
        augmented_separation: aug.separation,
        patch_radius: radius,
        max_c_pack: pieces.iter().map(|p| p.family().audit().c_pack).fold(0.0, f64::max),
        max_c_chain: pieces.iter().map(|p| p.family().audit().c_chain).fold(0.0, f64::max),
        max_tree_lipschitz: pieces.iter().map(|p| p.lipschitz()).fold(0.0, f64::max),
        max_edge_lipschitz: pieces.iter().map(|p| p.edge_lipschitz()).fold(0.0, f64::max),
        max_vertical_ratio: pieces.iter().map(|p| p.vertical_audit()).fold(0.0, f64::max),
    };
    let s = SmoothInterpolant::new(pieces, patches, cfg.barycenter_tol, cfg.barycenter_max_iter)?;
    Ok((s, diag))
}

/// Point mass for Carleson sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassPoint {
    pub z: C64,
    pub mass: f64,
}

/// `sup μ(Q(I))/|I|` over offset-0 dyadic intervals with generations in
/// `min_gen..=max_gen`; mass sits at each point's location.
pub fn carleson_norm(masses: &[MassPoint], min_gen: i32, max_gen: i32) -> (f64, Option<DyadicInterval>) {
    let mut sums: HashMap<DyadicInterval, f64> = HashMap::new();
    for m in masses {
        if m.mass == 0.0 {
            continue;
        }
        for g in min_gen..=max_gen {
            let l = (-(g as f64)).exp2();
            if m.z.im > l {
                break;
            }
            let j = (m.z.re / l).floor() as i64;
            let iv = DyadicInterval::new(g, j, Offset::ZERO);
            *sums.entry(iv).or_insert(0.0) += m.mass;
        }
    }
    let mut best = (0.0, None);
    let mut keys: Vec<_> = sums.keys().copied().collect();
    keys.sort();
    for iv in keys {
        let r = sums[&iv] / iv.length();
        if r > best.0 {
            best = (r, Some(iv));
        }
    }
    best
}

/// Horizontal jump mass of one piece: `max_Q (Σ ∫ β-jump ds over vertical
/// grid lines inside Q)/ℓ(Q)` over boxes on the piece's grid.
pub fn jump_ledger(piece: &PiecewiseInterpolant, max_gen: u32) -> f64 {
    const SAMPLES: usize = 8;
    let offset = piece.offset();
    let mut lines: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for node in piece.family().nodes() {
        let l = node.interval.length();
        for x in [node.interval.left(), node.interval.right()] {
            let e = lines.entry(x.to_bits()).or_insert((x, 0.0));
            e.1 = e.1.max(l);
        }
    }
    let deepest = max_gen as i32 + 2;
    let mut sums: HashMap<DyadicInterval, f64> = HashMap::new();
    for &(x, top) in lines.values() {
        let eta = (-(deepest as f64) - 20.0).exp2();
        for k in generation_of_height(top)..=deepest {
            let band = (-(k as f64)).exp2();
            let mut mass = 0.0;
            for j in 0..SAMPLES {
                let y = band * (0.5 + (j as f64 + 0.5) / (2 * SAMPLES) as f64);
                let jump = beta_disc(piece.eval(C64::new(x - eta, y)), piece.eval(C64::new(x + eta, y)));
                mass += jump * band / (2 * SAMPLES) as f64;
            }
            if mass == 0.0 {
                continue;
            }
            for g in -1..=max_gen as i32 {
                let l = (-(g as f64)).exp2();
                if l < band {
                    break;
                }
                if let Some(iv) = locate_extended(C64::new(x, 0.75 * l), offset) {
                    *sums.entry(iv).or_insert(0.0) += mass;
                }
            }
        }
    }
    sums.iter().map(|(iv, m)| m / iv.length()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbcReport {
    /// Largest `β_disc(φ(probe), wₙ)` over probes within the patch radius.
    pub a_max: f64,
    pub a_radius: f64,
    pub b_ratio: f64,
    pub b_const: f64,
    /// Pairs where the averaged map beat the mean piece distance by more than `10·tol`.
    pub averaging_violations: usize,
    pub c_norm: f64,
    pub c_const: f64,
    pub c_witness: Option<DyadicInterval>,
    pub d_const: f64,
    pub range_violations: usize,
    pub pairs: usize,
    pub cells: usize,
}

/// Audits exact interpolation near the nodes, the sampled Lipschitz ratio,
/// and the Carleson norm of `|∇φ|/(1 − |φ|²)`.
pub fn verify_abc(s: &SmoothInterpolant, epsilon: f64, cfg: &RunConfig, cells: &[Cell]) -> Result<AbcReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut range_violations = 0;
    let mut check_range = |w: C64| {
        if w.norm() > 1.0 {
            range_violations += 1;
        }
    };

    let mut a_max: f64 = 0.0;
    let mut a_radius = f64::INFINITY;
    for p in s.patches() {
        a_radius = a_radius.min(p.radius);
        for r in [0.0, 0.5, 0.999] {
            for k in 0..8 {
                let q = hp_point_at(p.center, r * p.radius, k as f64 * PI / 4.0);
                let w = s.eval(q)?;
                check_range(w);
                a_max = a_max.max(beta_disc(w, p.value));
            }
        }
    }

    let g = &cfg.grid;
    let mut b_ratio: f64 = 0.0;
    let mut averaging_violations = 0;
    for _ in 0..cfg.lipschitz_pairs {
        let x = rng.gen_range(g.x_min..g.x_max);
        let y = (rng.gen_range(g.y_min.ln()..g.y_max.ln())).exp();
        let z = C64::new(x, y);
        let d = rng.gen_range(-6.0f64..6.0).exp2();
        let w = hp_point_at(z, d, rng.gen_range(0.0..2.0 * PI));
        let (fz, fw) = (s.eval(z)?, s.eval(w)?);
        check_range(fz);
        check_range(fw);
        b_ratio = b_ratio.max(natural_disc(fz, fw) / natural_hp(z, w));
        let mean = s
            .pieces()
            .iter()
            .map(|p| natural_disc(p.eval(z), p.eval(w)))
            .sum::<f64>()
            / s.pieces().len() as f64;
        if natural_disc(s.phi0(z)?, s.phi0(w)?) > mean + 10.0 * cfg.barycenter_tol {
            averaging_violations += 1;
        }
    }

    // random pairs rarely cross the blend annuli, so cross each one radially
    for p in s.patches() {
        for k in 0..8 {
            let theta = k as f64 * PI / 4.0;
            for (r0, r1) in [(0.9, 1.5), (1.2, 1.8), (1.5, 2.1)] {
                let z = hp_point_at(p.center, r0 * p.radius, theta);
                let w = hp_point_at(p.center, r1 * p.radius, theta);
                let (fz, fw) = (s.eval(z)?, s.eval(w)?);
                b_ratio = b_ratio.max(natural_disc(fz, fw) / natural_hp(z, w));
            }
        }
    }

    let masses: Vec<MassPoint> = cells
        .par_iter()
        .map(|c| {
            let z = c.mid();
            let f = s.eval(z)?;
            let (dx, dy) = s.gradient_ac(z, cfg.fd_step)?;
            let grad = (dx.norm_sqr() + dy.norm_sqr()).sqrt();
            Ok(MassPoint {
                z,
                mass: grad / (1.0 - f.norm_sqr()) * c.area(),
            })
        })
        .collect::<Result<_>>()?;
    let deepest = cells.iter().map(|c| generation_of_height(c.y1)).max().unwrap_or(0);
    let (c_norm, c_witness) = carleson_norm(&masses, -2, deepest.max(0) + 1);

    let d_const = s
        .pieces()
        .par_iter()
        .map(|p| jump_ledger(p, cfg.max_generation))
        .reduce(|| 0.0, f64::max)
        / epsilon;

    Ok(AbcReport {
        a_max,
        a_radius,
        b_ratio,
        b_const: b_ratio / epsilon,
        averaging_violations,
        c_norm,
        c_const: c_norm / epsilon,
        c_witness,
        d_const,
        range_violations,
        pairs: cfg.lipschitz_pairs,
        cells: cells.len(),
    })
}
