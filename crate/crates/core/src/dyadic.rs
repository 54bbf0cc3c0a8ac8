//! Dyadic intervals on translated grids, their Carleson boxes and tops,
//! and the recursive halving cover used to bound generation counts.
//!
//! An interval is `(generation, index, offset)` and covers
//! `[t + j·2⁻ⁿ, t + (j+1)·2⁻ⁿ)`. Nesting is decided on the integers only.
//! Indices range over all of ℤ so a grid tiles the whole real line; the
//! generation may be negative when un-normalized data is analysed.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// Grid translation `t = m·2⁻³²`, always in `[0, 1)`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Offset(pub u32);

impl Offset {
    pub const ZERO: Offset = Offset(0);

    /// `t = m·2⁻ᵈ` reduced mod 1; requires `d ≤ 32`.
    pub fn from_dyadic(m: i64, d: u32) -> Result<Offset> {
        if d > 32 {
            return Err(Error::Usage(format!("offset resolution 2^-{d} finer than 2^-32")));
        }
        let modulus = 1i64 << d;
        let r = m.rem_euclid(modulus) as u64;
        Ok(Offset((r << (32 - d)) as u32))
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 4294967296.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub generation: i32,
    pub index: i64,
    pub offset: Offset,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlesonBox {
    pub interval: DyadicInterval,
    pub left: f64,
    pub right: f64,
    pub height: f64,
}

impl CarlesonBox {
    /// `x ∈ [left, right)`, `0 < y ≤ height`.
    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.left && z.re < self.right && z.im > 0.0 && z.im <= self.height
    }
}

/// Upper half `{y > |I|/2}` of a Carleson box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopRegion {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl TopRegion {
    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.left && z.re < self.right && z.im > self.bottom && z.im <= self.top
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxGeometry {
    pub carleson_box: CarlesonBox,
    pub top: TopRegion,
    pub center: C64,
}

impl DyadicInterval {
    pub fn new(generation: i32, index: i64, offset: Offset) -> Self {
        DyadicInterval {
            generation,
            index,
            offset,
        }
    }

    /// `[j, j+1)` on the grid with the given offset.
    pub fn root(index: i64, offset: Offset) -> Self {
        Self::new(0, index, offset)
    }

    pub fn length(&self) -> f64 {
        (-self.generation as f64).exp2()
    }

    pub fn left(&self) -> f64 {
        self.offset.value() + self.index as f64 * self.length()
    }

    pub fn right(&self) -> f64 {
        self.offset.value() + (self.index + 1) as f64 * self.length()
    }

    pub fn midpoint(&self) -> f64 {
        self.offset.value() + (self.index as f64 + 0.5) * self.length()
    }

    pub fn parent(&self) -> Self {
        Self::new(self.generation - 1, self.index >> 1, self.offset)
    }

    pub fn children(&self) -> [Self; 2] {
        let g = self.generation + 1;
        [
            Self::new(g, 2 * self.index, self.offset),
            Self::new(g, 2 * self.index + 1, self.offset),
        ]
    }

    /// The ancestor `k` generations up (`k ≥ 0`).
    pub fn ancestor(&self, k: u32) -> Self {
        Self::new(
            self.generation - k as i32,
            self.index >> k.min(63),
            self.offset,
        )
    }

    /// `other ⊆ self` on a common grid.
    pub fn contains_interval(&self, other: &DyadicInterval) -> bool {
        if self.offset != other.offset || other.generation < self.generation {
            return false;
        }
        let k = (other.generation - self.generation) as u32;
        (other.index >> k.min(63)) == self.index
    }

    pub fn contains_x(&self, x: f64) -> bool {
        x >= self.left() && x < self.right()
    }

    pub fn center(&self) -> C64 {
        C64::new(self.midpoint(), 0.75 * self.length())
    }

    pub fn box_geometry(&self) -> BoxGeometry {
        let (left, right, l) = (self.left(), self.right(), self.length());
        BoxGeometry {
            carleson_box: CarlesonBox {
                interval: *self,
                left,
                right,
                height: l,
            },
            top: TopRegion {
                left,
                right,
                bottom: 0.5 * l,
                top: l,
            },
            center: self.center(),
        }
    }

    pub fn in_box(&self, z: C64) -> bool {
        self.contains_x(z.re) && z.im > 0.0 && z.im <= self.length()
    }

    pub fn in_top(&self, z: C64) -> bool {
        let l = self.length();
        self.contains_x(z.re) && z.im > 0.5 * l && z.im <= l
    }
}

/// The `n` with `2⁻ⁿ⁻¹ < y ≤ 2⁻ⁿ`.
pub fn generation_of_height(y: f64) -> i32 {
    let mut n = (-y.log2()).floor() as i32;
    while (-(n as f64)).exp2() < y {
        n -= 1;
    }
    while (-(n as f64) - 1.0).exp2() >= y {
        n += 1;
    }
    n
}

/// Interval of the offset grid whose top contains `z`, at any generation.
pub fn locate_extended(z: C64, offset: Offset) -> Option<DyadicInterval> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return None;
    }
    let g = generation_of_height(z.im);
    let scaled = (z.re - offset.value()) * (g as f64).exp2();
    let mut j = scaled.floor() as i64;
    // guard the floor against rounding at an endpoint
    let mut cand = DyadicInterval::new(g, j, offset);
    if z.re < cand.left() {
        j -= 1;
        cand = DyadicInterval::new(g, j, offset);
    } else if z.re >= cand.right() {
        j += 1;
        cand = DyadicInterval::new(g, j, offset);
    }
    Some(cand)
}

/// Like [`locate_extended`] but only generations `≥ 0`: points above height 1 lie in no top.
pub fn locate(z: C64, offset: Offset) -> Option<DyadicInterval> {
    if z.im > 1.0 {
        return None;
    }
    locate_extended(z, offset)
}

/// `β_disc(z(I), z(J)) − k` for `I ⊆ J` with `|I| = 2⁻ᵏ|J|`.
pub fn nested_center_gap(i: &DyadicInterval, j: &DyadicInterval) -> Result<f64> {
    if !j.contains_interval(i) {
        return Err(Error::Usage(format!("{i:?} is not nested in {j:?}")));
    }
    let k = (i.generation - j.generation) as f64;
    let beta = 2.0 * crate::geometry::beta_hp(i.center(), j.center());
    Ok(beta - k)
}

/// Duplicate-free set of intervals on one grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalFamily {
    offset: Offset,
    members: BTreeSet<DyadicInterval>,
}

impl IntervalFamily {
    pub fn new(offset: Offset) -> Self {
        IntervalFamily {
            offset,
            members: BTreeSet::new(),
        }
    }

    pub fn from_intervals(
        offset: Offset,
        items: impl IntoIterator<Item = DyadicInterval>,
    ) -> Result<Self> {
        let mut f = Self::new(offset);
        for i in items {
            f.insert(i)?;
        }
        Ok(f)
    }

    pub fn offset(&self) -> Offset {
        self.offset
    }

    pub fn insert(&mut self, i: DyadicInterval) -> Result<bool> {
        if i.offset != self.offset {
            return Err(Error::Usage(format!(
                "interval offset {:?} differs from family offset {:?}",
                i.offset, self.offset
            )));
        }
        Ok(self.members.insert(i))
    }

    pub fn remove(&mut self, i: &DyadicInterval) -> bool {
        self.members.remove(i)
    }

    pub fn contains(&self, i: &DyadicInterval) -> bool {
        self.members.contains(i)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Ordered by generation, then index.
    pub fn iter(&self) -> impl Iterator<Item = &DyadicInterval> {
        self.members.iter()
    }

    pub fn max_generation(&self) -> Option<i32> {
        self.members.iter().map(|i| i.generation).max()
    }

    pub fn min_generation(&self) -> Option<i32> {
        self.members.iter().map(|i| i.generation).min()
    }

    /// Members contained in `i` (including `i` itself when present).
    pub fn descendants_of<'a>(
        &'a self,
        i: &'a DyadicInterval,
    ) -> impl Iterator<Item = &'a DyadicInterval> + 'a {
        self.members.iter().filter(move |j| i.contains_interval(j))
    }

    /// `#{J ∈ A : J ⊆ I, |J| = 2⁻ⁿ|I|}`.
    pub fn generation_count(&self, i: &DyadicInterval, n: u32) -> usize {
        let g = i.generation + n as i32;
        self.members
            .iter()
            .filter(|j| j.generation == g && i.contains_interval(j))
            .count()
    }
}

/// Free-function form of [`IntervalFamily::generation_count`].
pub fn generation_count(a: &IntervalFamily, i: &DyadicInterval, n: u32) -> usize {
    a.generation_count(i, n)
}

/// Counts `#{J ∈ A : J ⊆ K, gen J = g}` for every ancestor `K` of a member.
#[derive(Clone, Debug, Default)]
pub struct SubtreeCounts {
    counts: HashMap<(DyadicInterval, i32), usize>,
}

impl SubtreeCounts {
    /// Ancestors are taken down to generation `min_gen`.
    pub fn build(a: &IntervalFamily, min_gen: i32) -> Self {
        Self::from_intervals(a.iter().copied(), min_gen)
    }

    /// Multiset version: repeated intervals count once per occurrence.
    pub fn from_intervals(items: impl IntoIterator<Item = DyadicInterval>, min_gen: i32) -> Self {
        let mut counts = HashMap::new();
        for j in items {
            let mut k = j;
            loop {
                *counts.entry((k, j.generation)).or_insert(0) += 1;
                if k.generation <= min_gen {
                    break;
                }
                k = k.parent();
            }
        }
        SubtreeCounts { counts }
    }

    pub fn count(&self, k: &DyadicInterval, target_gen: i32) -> usize {
        self.counts.get(&(*k, target_gen)).copied().unwrap_or(0)
    }

    /// Every `(K, g)` with a nonzero count.
    pub fn keys(&self) -> impl Iterator<Item = &(DyadicInterval, i32)> {
        self.counts.keys()
    }
}

/// Audit of the recursive halving cover of one interval.
#[derive(Clone, Debug, PartialEq)]
pub struct HalvingCover {
    /// Disjoint pieces `I₁, I₂, …` in the order they were split off.
    pub decomposition: Vec<DyadicInterval>,
    pub count: usize,
    pub bound: f64,
    pub holds: bool,
    /// Intervals at which neither half met its quota.
    pub hypothesis_violations: Vec<DyadicInterval>,
}

pub fn halving_cover_bound(m: f64, alpha: f64, n: u32) -> f64 {
    2.0 * m / (1.0 - (-alpha).exp2()) * (n as f64 * alpha).exp2()
}

/// Covers `I` by halves that each meet the quota `M·2^{kα}` for target generation `gen I + n`.
pub fn halving_cover(a: &IntervalFamily, i: &DyadicInterval, n: u32, m: f64, alpha: f64) -> Result<HalvingCover> {
    if !(m > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Usage(format!("need M > 0 and 0 < α < 1, got M={m}, α={alpha}")));
    }
    if i.offset != a.offset() {
        return Err(Error::Usage("interval and family on different grids".into()));
    }
    let target = i.generation + n as i32;
    let count_in = |k: &DyadicInterval| -> usize {
        a.iter()
            .filter(|j| j.generation == target && k.contains_interval(j))
            .count()
    };
    let count = count_in(i);
    let bound = halving_cover_bound(m, alpha, n);
    let mut decomposition = Vec::new();
    let mut violations = Vec::new();
    if n == 0 {
        decomposition.push(*i);
    } else {
        let mut current = *i;
        loop {
            let levels = (target - current.generation) as f64;
            let quota = m * (levels * alpha).exp2();
            let [h0, h1] = current.children();
            let (c0, c1) = (count_in(&h0), count_in(&h1));
            let (g0, g1) = (c0 as f64 <= quota, c1 as f64 <= quota);
            if !g0 && !g1 {
                violations.push(current);
            }
            // the good half is split off; ties and double failures keep the smaller count
            let (good, other, other_good) = if g0 && (!g1 || c0 <= c1) || (!g0 && !g1 && c0 <= c1) {
                (h0, h1, g1)
            } else {
                (h1, h0, g0)
            };
            decomposition.push(good);
            if other_good || other.generation == target {
                decomposition.push(other);
                break;
            }
            current = other;
        }
    }
    Ok(HalvingCover {
        decomposition,
        count,
        bound,
        holds: count as f64 <= bound,
        hypothesis_violations: violations,
    })
}

/// Every `(I, n)` where both halves of `I` exceed `M·2^{nα}` at generation `gen I + n`.
pub fn halving_violations(a: &IntervalFamily, m: f64, alpha: f64) -> Vec<(DyadicInterval, u32)> {
    let Some(min_gen) = a.min_generation() else {
        return Vec::new();
    };
    let counts = SubtreeCounts::build(a, min_gen - 1);
    let mut seen = BTreeSet::new();
    for (k, g) in counts.keys() {
        if k.generation > min_gen - 1 && k.generation <= *g {
            let p = k.parent();
            let n = g - p.generation;
            if n >= 1 {
                seen.insert((p, n as u32));
            }
        }
    }
    seen.into_iter()
        .filter(|(p, n)| {
            let quota = m * (*n as f64 * alpha).exp2();
            let target = p.generation + *n as i32;
            p.children()
                .iter()
                .all(|h| counts.count(h, target) as f64 > quota)
        })
        .collect()
}

/// Random family under `[0,1)` with generations `1..=d` that satisfies the halving hypothesis.
///
/// Members are drawn with probability `density`, then violators are pruned
/// until [`halving_violations`] comes back empty.
pub fn random_halving_family<R: Rng>(
    rng: &mut R,
    d: u32,
    density: f64,
    m: f64,
    alpha: f64,
) -> IntervalFamily {
    let mut fam = IntervalFamily::new(Offset::ZERO);
    for g in 1..=d as i32 {
        for j in 0..(1i64 << g) {
            if rng.gen::<f64>() < density {
                fam.insert(DyadicInterval::new(g, j, Offset::ZERO)).ok();
            }
        }
    }
    loop {
        let bad = halving_violations(&fam, m, alpha);
        if bad.is_empty() {
            return fam;
        }
        for (p, n) in bad {
            let target = p.generation + n as i32;
            let victims: Vec<_> = fam
                .iter()
                .filter(|j| j.generation == target && p.contains_interval(j))
                .copied()
                .collect();
            if let Some(v) = victims.get(rng.gen_range(0..victims.len().max(1))) {
                fam.remove(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn iv(g: i32, j: i64) -> DyadicInterval {
        DyadicInterval::new(g, j, Offset::ZERO)
    }

    #[test]
    fn box_geometry_examples() {
        let root = iv(0, 0);
        assert_eq!(root.box_geometry().center, C64::new(0.5, 0.75));
        assert!(!root.in_top(C64::new(0.5, 0.5)));
        assert!(root.in_top(C64::new(0.5, 0.6)));
        assert_eq!(iv(1, 0).center(), C64::new(0.25, 0.375));
        let g = root.box_geometry();
        assert!(g.top.contains(g.center));
        assert!(g.carleson_box.contains(C64::new(0.99, 0.01)));
    }

    #[test]
    fn locate_examples() {
        assert_eq!(locate(C64::new(0.5, 0.75), Offset::ZERO), Some(iv(0, 0)));
        assert_eq!(locate(C64::new(0.25, 0.3), Offset::ZERO), Some(iv(1, 0)));
        assert_eq!(locate(C64::new(0.5, 10.0), Offset::ZERO), None);
        assert_eq!(locate_extended(C64::new(0.5, 1.5), Offset::ZERO), Some(iv(-1, 0)));
        assert_eq!(locate(C64::new(-0.25, 0.5), Offset::ZERO), Some(iv(1, -1)));
    }

    #[test]
    fn locate_inverts_center_to_generation_20() {
        let offsets = [Offset::ZERO, Offset::from_dyadic(5, 6).unwrap()];
        for off in offsets {
            for g in 0..=20 {
                for j in [0i64, 1, (1 << g) / 3, (1 << g) - 1] {
                    let i = DyadicInterval::new(g, j, off);
                    assert_eq!(locate(i.center(), off), Some(i));
                }
            }
        }
    }

    #[test]
    fn generation_count_examples() {
        let a = IntervalFamily::from_intervals(Offset::ZERO, [iv(0, 0)]).unwrap();
        assert_eq!(a.generation_count(&iv(0, 0), 0), 1);
        let a = IntervalFamily::from_intervals(Offset::ZERO, (0..4).map(|j| iv(2, j))).unwrap();
        assert_eq!(generation_count(&a, &iv(0, 0), 2), 4);
        let a = IntervalFamily::from_intervals(Offset::ZERO, [iv(2, 0), iv(2, 1)]).unwrap();
        assert_eq!(a.generation_count(&iv(1, 1), 1), 0);
    }

    #[test]
    fn family_rejects_foreign_offset() {
        let mut f = IntervalFamily::new(Offset::ZERO);
        let other = DyadicInterval::new(0, 0, Offset::from_dyadic(1, 1).unwrap());
        assert!(f.insert(other).is_err());
    }

    #[test]
    fn halving_cover_examples() {
        let b = halving_cover_bound(1.0, 0.5, 4);
        assert!((b - 2.0 / (1.0 - 0.5f64.sqrt()) * 4.0).abs() < 1e-12);
        assert!((b - 27.3137).abs() < 1e-3);
        let empty = IntervalFamily::new(Offset::ZERO);
        let c = halving_cover(&empty, &iv(0, 0), 4, 1.0, 0.5).unwrap();
        assert!(c.holds && c.count == 0 && c.hypothesis_violations.is_empty());
        // empty family: both halves good immediately
        assert_eq!(c.decomposition, vec![iv(1, 0), iv(1, 1)]);
    }

    #[test]
    fn halving_decomposition_is_a_disjoint_cover() {
        // all of generation 4 under the right half, nothing on the left
        let a = IntervalFamily::from_intervals(Offset::ZERO, (8..16).map(|j| iv(4, j))).unwrap();
        let c = halving_cover(&a, &iv(0, 0), 4, 1.0, 0.5).unwrap();
        let total: f64 = c.decomposition.iter().map(|i| i.length()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        for (p, q) in c.decomposition.iter().zip(c.decomposition.iter().skip(1)) {
            assert!(!p.contains_interval(q) && !q.contains_interval(p));
        }
        assert!(c.decomposition.len() <= 5);
    }

    #[test]
    fn nested_gap_bounded() {
        assert_eq!(nested_center_gap(&iv(0, 0), &iv(0, 0)).unwrap(), 0.0);
        let mut worst: f64 = 0.0;
        for k in 0..=20 {
            worst = worst.max(nested_center_gap(&iv(k, 0), &iv(0, 0)).unwrap().abs());
            let mid = iv(k, (1i64 << k) / 2);
            worst = worst.max(nested_center_gap(&mid, &iv(0, 0)).unwrap().abs());
        }
        assert!(worst <= 2.0, "worst gap {worst}");
        assert!(nested_center_gap(&iv(0, 0), &iv(1, 0)).is_err());
    }

    #[test]
    fn offsets_quantize() {
        assert_eq!(Offset::from_dyadic(1, 1).unwrap().value(), 0.5);
        assert_eq!(Offset::from_dyadic(-1, 6).unwrap().value(), 63.0 / 64.0);
        assert!(Offset::from_dyadic(1, 33).is_err());
    }

    #[test]
    fn random_families_meet_hypothesis() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f = random_halving_family(&mut rng, 7, 0.4, 1.0, 0.5);
            assert!(halving_violations(&f, 1.0, 0.5).is_empty());
        }
    }

    proptest! {
        #[test]
        fn children_partition_parent(g in 0i32..40, j in -1000i64..1000, m in 0i64..64) {
            let off = Offset::from_dyadic(m, 6).unwrap();
            let p = DyadicInterval::new(g, j, off);
            let [a, b] = p.children();
            prop_assert_eq!(a.left(), p.left());
            prop_assert_eq!(a.right(), b.left());
            prop_assert_eq!(b.right(), p.right());
            prop_assert_eq!(a.length() * a.length() * 4.0, p.length() * p.length());
            prop_assert!(p.contains_interval(&a) && p.contains_interval(&b));
            prop_assert_eq!(a.parent(), p);
            prop_assert_eq!(b.parent(), p);
        }
    }
}
