//! Intermediate dyadic family between the occupied intervals and the full
//! grid: it contains every occupied interval, packs with bounded total
//! length, and meets every ancestor chain of an occupied interval densely.
//!
//! Construction is a candidate rule over an exponent schedule; every
//! candidate is certified exhaustively before it is returned.

use crate::dyadic::{DyadicInterval, IntervalFamily, Offset, SubtreeCounts};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// `M` at which the density exponent of the occupied family is fitted.
pub const DENSITY_FIT_M: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringAudit {
    /// `max_J Σ_{I ∈ G, I ⊆ J} |I| / |J|`.
    pub c_pack: f64,
    /// `max log₂(|I₁|/|I₀|) / #{I ∈ G : I₀ ⊆ I ⊆ I₁}` over `I₀ ∈ A`, `I₁ ∈ G`.
    pub c_chain: f64,
    pub ok: bool,
    pub pack_witness: Option<DyadicInterval>,
    pub chain_witness: Option<(DyadicInterval, DyadicInterval)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub interval: DyadicInterval,
    /// Smallest strictly larger member; `None` under the virtual super-root.
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Edges from the virtual super-root (gen-0 roots have depth 1).
    pub depth: usize,
    pub occupied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntermediateFamily {
    g: IntervalFamily,
    a: IntervalFamily,
    nodes: Vec<TreeNode>,
    lookup: HashMap<DyadicInterval, usize>,
    roots: Vec<usize>,
    gamma: f64,
    alpha_fit: f64,
    audit: CoveringAudit,
}

impl IntermediateFamily {
    pub fn g(&self) -> &IntervalFamily {
        &self.g
    }

    pub fn a(&self) -> &IntervalFamily {
        &self.a
    }

    pub fn offset(&self) -> Offset {
        self.g.offset()
    }

    /// Nodes ordered by generation then index, so parents precede children.
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_of(&self, i: &DyadicInterval) -> Option<usize> {
        self.lookup.get(i).copied()
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha_fit(&self) -> f64 {
        self.alpha_fit
    }

    /// Audit taken when the family was certified.
    pub fn audit(&self) -> &CoveringAudit {
        &self.audit
    }

    /// Deepest member containing `(x, ·)` with `|I| ≥ y`, walking down from the roots.
    pub fn deepest_containing(&self, x: f64, y: f64) -> Option<usize> {
        let root = self
            .roots
            .iter()
            .copied()
            .find(|&r| self.nodes[r].interval.contains_x(x))?;
        if self.nodes[root].interval.length() < y {
            return None;
        }
        let mut k = root;
        'descend: loop {
            for &c in &self.nodes[k].children {
                let iv = &self.nodes[c].interval;
                if iv.length() >= y && iv.contains_x(x) {
                    k = c;
                    continue 'descend;
                }
            }
            return Some(k);
        }
    }

    /// `(generation, index)` pairs for audit dumps.
    pub fn to_json(&self) -> serde_json::Value {
        let list = |f: &IntervalFamily| -> Vec<(i32, i64)> {
            f.iter().map(|i| (i.generation, i.index)).collect()
        };
        serde_json::json!({
            "offset": self.offset().value(),
            "gamma": self.gamma,
            "alpha_fit": self.alpha_fit,
            "g": list(&self.g),
            "a": list(&self.a),
            "c_pack": self.audit.c_pack,
            "c_chain": self.audit.c_chain,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ceilings {
    pub c_pack: f64,
    pub c_chain: f64,
}

impl Default for Ceilings {
    fn default() -> Self {
        Ceilings {
            c_pack: 64.0,
            c_chain: 16.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoveringParams {
    pub max_generation: u32,
    /// Families whose fitted exponent exceeds this are refused.
    pub max_alpha: f64,
    pub schedule_len: usize,
    pub ceilings: Ceilings,
}

impl Default for CoveringParams {
    fn default() -> Self {
        CoveringParams {
            max_generation: 12,
            max_alpha: 0.7,
            schedule_len: 6,
            ceilings: Ceilings::default(),
        }
    }
}

impl CoveringParams {
    pub fn from_config(cfg: &crate::config::RunConfig) -> Self {
        CoveringParams {
            max_generation: cfg.max_generation,
            max_alpha: cfg.alpha_max,
            schedule_len: cfg.gamma_schedule_len,
            ceilings: Ceilings {
                c_pack: cfg.c_pack_ceiling,
                c_chain: cfg.c_chain_ceiling,
            },
        }
    }
}

/// Band-count exponent of `A` at `M = 4`: `max log₂(count/4)/n`.
pub fn fitted_interval_alpha(a: &IntervalFamily) -> f64 {
    let Some(min_gen) = a.min_generation() else {
        return 0.0;
    };
    let counts = SubtreeCounts::build(a, min_gen);
    let mut alpha: f64 = 0.0;
    for &(k, g) in counts.keys() {
        let n = g - k.generation;
        let c = counts.count(&k, g) as f64;
        if n >= 1 && c > DENSITY_FIT_M {
            alpha = alpha.max((c / DENSITY_FIT_M).log2() / n as f64);
        }
    }
    alpha
}

/// Exponents `1 − (1 − α)/2ᵏ`, `k = 0, 1, …`.
pub fn gamma_schedule(alpha: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 1.0 - (1.0 - alpha) / (k as f64).exp2())
        .collect()
}

fn candidate(a: &IntervalFamily, gamma: f64) -> IntervalFamily {
    let mut g = a.clone();
    // generations of members below each ancestor, sorted
    let mut below: HashMap<DyadicInterval, Vec<i32>> = HashMap::new();
    for i in a.iter() {
        let mut k = *i;
        loop {
            below.entry(k).or_default().push(i.generation);
            if k.generation <= 0 {
                break;
            }
            k = k.parent();
        }
    }
    for v in below.values_mut() {
        v.sort_unstable();
    }
    for i in a.iter() {
        if i.generation < 0 {
            continue;
        }
        let mut j = *i;
        for k in 1..=i.generation as u32 {
            j = j.parent();
            let gens = &below[&j];
            let n = gens.partition_point(|&g| g <= i.generation) as f64;
            if n <= (k as f64 * gamma).exp2() {
                g.insert(j).expect("same grid");
            }
        }
        g.insert(i.ancestor(i.generation as u32)).expect("same grid");
    }
    g
}

fn build_tree(g: &IntervalFamily) -> (Vec<TreeNode>, HashMap<DyadicInterval, usize>, Vec<usize>) {
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(g.len());
    let mut lookup = HashMap::with_capacity(g.len());
    let mut roots = Vec::new();
    let mut ordered: Vec<DyadicInterval> = g.iter().copied().collect();
    ordered.sort_by_key(|i| (i.generation, i.index));
    for iv in ordered {
        let idx = nodes.len();
        let mut parent = None;
        let mut k = iv;
        while k.generation > 0 {
            k = k.parent();
            if let Some(&p) = lookup.get(&k) {
                parent = Some(p);
                break;
            }
        }
        let depth = parent.map_or(1, |p: usize| nodes[p].depth + 1);
        nodes.push(TreeNode {
            interval: iv,
            parent,
            children: Vec::new(),
            depth,
            occupied: false,
        });
        match parent {
            Some(p) => nodes[p].children.push(idx),
            None => roots.push(idx),
        }
        lookup.insert(iv, idx);
    }
    (nodes, lookup, roots)
}

/// Exhaustive packing and chain audit of `G` against `A`.
pub fn verify_intermediate_sets(g: &IntervalFamily, a: &IntervalFamily, ceilings: Ceilings) -> CoveringAudit {
    let mut sums: BTreeMap<DyadicInterval, f64> = BTreeMap::new();
    for i in g.iter() {
        let mut k = *i;
        loop {
            *sums.entry(k).or_insert(0.0) += i.length();
            if k.generation <= 0 {
                break;
            }
            k = k.parent();
        }
    }
    let (mut c_pack, mut pack_witness) = (0.0, None);
    for (k, s) in &sums {
        let r = s / k.length();
        if r > c_pack {
            c_pack = r;
            pack_witness = Some(*k);
        }
    }
    let (mut c_chain, mut chain_witness) = (0.0, None);
    for i0 in a.iter() {
        let mut count = 0usize;
        let mut k = *i0;
        loop {
            if g.contains(&k) {
                count += 1;
                let levels = (i0.generation - k.generation) as f64;
                let r = if levels == 0.0 { 0.0 } else { levels / count as f64 };
                if r > c_chain {
                    c_chain = r;
                    chain_witness = Some((*i0, k));
                }
            }
            if k.generation <= 0 {
                break;
            }
            k = k.parent();
        }
    }
    let all_in = a.iter().all(|i| g.contains(i));
    CoveringAudit {
        ok: all_in && c_pack <= ceilings.c_pack && c_chain <= ceilings.c_chain,
        c_pack,
        c_chain,
        pack_witness,
        chain_witness,
    }
}

/// Re-certifies a built family from scratch.
pub fn verify_intermediate(fam: &IntermediateFamily, ceilings: Ceilings) -> CoveringAudit {
    verify_intermediate_sets(&fam.g, &fam.a, ceilings)
}

/// Builds and certifies `G ⊇ A ∪ roots`, trying the exponent schedule in order.
///
/// `gamma` pins a single exponent instead of the schedule.
pub fn build_intermediate(
    a: &IntervalFamily,
    gamma: Option<f64>,
    params: &CoveringParams,
) -> Result<IntermediateFamily> {
    let d = params.max_generation;
    let ceilings = params.ceilings;
    if let Some(bad) = a.iter().find(|i| i.generation < 0 || i.generation > d as i32) {
        return Err(Error::Usage(format!(
            "interval {bad:?} outside generations 0..={d}"
        )));
    }
    let alpha_fit = fitted_interval_alpha(a);
    if alpha_fit > params.max_alpha {
        return Err(Error::Refused(format!(
            "occupied family is too dense: fitted exponent {alpha_fit:.4} at M = {DENSITY_FIT_M}"
        )));
    }
    let schedule = match gamma {
        Some(g) => vec![g],
        None => gamma_schedule(alpha_fit, params.schedule_len),
    };
    let mut last = None;
    for gamma in schedule {
        let g = candidate(a, gamma);
        let audit = verify_intermediate_sets(&g, a, ceilings);
        if audit.ok {
            let (mut nodes, lookup, roots) = build_tree(&g);
            for i in a.iter() {
                nodes[lookup[i]].occupied = true;
            }
            return Ok(IntermediateFamily {
                g,
                a: a.clone(),
                nodes,
                lookup,
                roots,
                gamma,
                alpha_fit,
                audit,
            });
        }
        last = Some((gamma, audit));
    }
    let (gamma, audit) = last.expect("non-empty schedule");
    Err(Error::Certification(format!(
        "no exponent certified; last γ = {gamma:.4}: C_pack = {:.3} at {:?}, C_chain = {:.3} at {:?}",
        audit.c_pack, audit.pack_witness, audit.c_chain, audit.chain_witness
    )))
}
