//! Minimal ball covers of the depth-`N` shadow of a tree boundary.
//!
//! A ball `B_u` of the ultrametric boundary has diameter `e^{-|u|}`, so a
//! cover by balls of generations in `[min_gen, N]` is an antichain and costs
//! `Σ g(e^{-|u|})`. The optimum is found bottom-up:
//!
//! * `cost(u) = 0` if no descendant of `u` reaches generation `N`,
//! * `cost(u) = g(e^{-N})` at a surviving frontier vertex,
//! * `cost(u) = min(g(e^{-|u|}), Σ_i cost(u*i))` if `|u| >= min_gen`,
//! * `cost(u) = Σ_i cost(u*i)` above `min_gen`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::branching::WField;
use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::offspring::OffspringDistribution;
use crate::parallel;
use crate::sampler::{GwSampler, Purpose};
use crate::spine::RatioReport;
use crate::stats::{self, Estimate};
use crate::tree::TruncatedTree;
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSolution {
    pub cost: f64,
    /// Ball centres, in breadth-first order.
    pub antichain: Vec<Word>,
    /// `g(e^{-|u|})` for each centre.
    pub ball_costs: Vec<f64>,
    pub min_generation_used: Option<usize>,
    pub max_generation_used: Option<usize>,
    pub min_gen: usize,
    pub depth: usize,
}

/// `g(e^{-n})` for `n ∈ [min_gen, N]`, indexed by `n`.
fn gauge_levels(g: &Gauge, min_gen: usize, depth: usize) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; depth + 1];
    for (n, slot) in out.iter_mut().enumerate().skip(min_gen) {
        let v = g.at_generation(n)?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::GaugeUndefined {
                generation: n,
                reason: format!("value {v}"),
            });
        }
        *slot = v;
    }
    Ok(out)
}

/// Exact minimal cover cost of the surviving frontier of `t`.
pub fn min_cover_cost(t: &TruncatedTree, g: &Gauge, min_gen: usize) -> Result<CoverSolution> {
    let depth = t.depth();
    if min_gen == 0 {
        return Err(Error::Domain("covers use balls of generation >= 1".into()));
    }
    if depth < min_gen {
        return Err(Error::Domain(format!("tree depth {depth} below min_gen {min_gen}")));
    }
    let gl = gauge_levels(g, min_gen, depth)?;
    let alive = t.frontier_counts();
    let mut cost: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    let mut take: Vec<Vec<bool>> = vec![Vec::new(); depth + 1];
    cost[depth] = alive[depth]
        .iter()
        .map(|&c| if c > 0 { gl[depth] } else { 0.0 })
        .collect();
    take[depth] = alive[depth].iter().map(|&c| c > 0).collect();
    for n in (0..depth).rev() {
        let w = t.width(n);
        let mut c = Vec::with_capacity(w);
        let mut k = Vec::with_capacity(w);
        for i in 0..w {
            if alive[n][i] == 0 {
                c.push(0.0);
                k.push(false);
                continue;
            }
            let below = t.children(n, i).fold(0.0, |acc, j| acc + cost[n + 1][j]);
            if n >= min_gen && gl[n] <= below {
                c.push(gl[n]);
                k.push(true);
            } else {
                c.push(below);
                k.push(false);
            }
        }
        cost[n] = c;
        take[n] = k;
    }
    let mut antichain = Vec::new();
    let mut ball_costs = Vec::new();
    let mut frontier = vec![0usize];
    for n in 0..=depth {
        let mut next = Vec::new();
        for &i in &frontier {
            if alive[n][i] == 0 {
                continue;
            }
            if take[n][i] {
                antichain.push(t.word_at(n, i));
                ball_costs.push(gl[n]);
            } else if n < depth {
                next.extend(t.children(n, i));
            }
        }
        frontier = next;
    }
    Ok(CoverSolution {
        cost: cost[0][0],
        min_generation_used: antichain.iter().map(|u| u.len()).min(),
        max_generation_used: antichain.iter().map(|u| u.len()).max(),
        antichain,
        ball_costs,
        min_gen,
        depth,
    })
}

impl CoverSolution {
    /// Checks the antichain property, that every surviving frontier word is
    /// covered, the generation range, and that the cost recomputed from the
    /// antichain reproduces the optimum exactly.
    pub fn verify(&self, t: &TruncatedTree, g: &Gauge) -> std::result::Result<(), String> {
        let set: BTreeSet<&Word> = self.antichain.iter().collect();
        for u in &self.antichain {
            if u.len() < self.min_gen || u.len() > self.depth {
                return Err(format!(
                    "ball {u} outside generations [{}, {}]",
                    self.min_gen, self.depth
                ));
            }
            if (0..u.len()).any(|k| set.contains(&u.restrict(k))) {
                return Err(format!("{u} has an ancestor in the antichain"));
            }
            if !t.contains(u) {
                return Err(format!("{u} is not in the tree"));
            }
        }
        let d = t.depth();
        let alive = t.frontier_counts();
        for i in 0..t.width(d) {
            let v = t.word_at(d, i);
            if alive[d][i] > 0 && !(self.min_gen..=d).any(|k| set.contains(&v.restrict(k))) {
                return Err(format!("frontier word {v} is not covered"));
            }
        }
        let gl = gauge_levels(g, self.min_gen, d).map_err(|e| e.to_string())?;
        // same association order as the dynamic programme
        let mut below: Vec<f64> = vec![0.0; t.width(d)];
        for i in 0..t.width(d) {
            if set.contains(&t.word_at(d, i)) {
                below[i] = gl[d];
            }
        }
        for n in (0..d).rev() {
            below = (0..t.width(n))
                .map(|i| {
                    if n >= self.min_gen && set.contains(&t.word_at(n, i)) {
                        gl[n]
                    } else {
                        t.children(n, i).fold(0.0, |acc, j| acc + below[j])
                    }
                })
                .collect();
        }
        if below[0] != self.cost {
            return Err(format!("antichain costs {}, optimum {}", below[0], self.cost));
        }
        let flat: f64 = self.ball_costs.iter().sum();
        if (flat - self.cost).abs() > 1e-12 * self.cost.max(1.0) {
            return Err(format!("ball costs sum to {flat}, optimum {}", self.cost));
        }
        Ok(())
    }
}

/// Optimal costs of `T|n` for `n = min_gen..=N`; not monotone in general.
pub fn cost_sequence(t: &TruncatedTree, g: &Gauge, min_gen: usize) -> Result<Vec<(usize, f64)>> {
    (min_gen..=t.depth())
        .map(|n| Ok((n, min_cover_cost(&t.truncate(n), g, min_gen)?.cost)))
        .collect()
}

/// Outcome of one half of the comparison check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// The density hypothesis fails at `witness`; nothing is asserted.
    HypothesisNotMet {
        witness: Word,
        generation: usize,
        mass: f64,
        gauge: f64,
    },
    Holds {
        cost: f64,
        bound: f64,
    },
    Violated {
        cost: f64,
        bound: f64,
    },
}

impl Verdict {
    pub fn is_violation(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }

    pub fn hypothesis_met(&self) -> bool {
        !matches!(self, Verdict::HypothesisNotMet { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub depth: usize,
    pub min_gen: usize,
    pub c: f64,
    pub total_mass: f64,
    pub cover: CoverSolution,
    /// `μ(B_u) <= g(diam B_u)` on every ball ⇒ cost `>= C^{-1} μ(A)`.
    pub lower: Verdict,
    /// Every frontier ray has a ball with `μ(B_u) >= g(diam B_u)` ⇒ cost `<= C μ(A)`.
    pub upper: Verdict,
}

type Support = (TruncatedTree, Vec<Vec<Word>>, Vec<Vec<f64>>);

/// The positive-mass words of `leaf_masses`, relabelled into an ordinary
/// tree (children renumbered `1..k` in order); returns the tree and, per
/// generation, the original word of each vertex.
fn support_tree(leaf_masses: &BTreeMap<Word, f64>) -> Result<Support> {
    let depth = leaf_masses
        .keys()
        .next()
        .map(|w| w.len())
        .ok_or_else(|| Error::Domain("empty leaf-mass map".into()))?;
    for (w, &v) in leaf_masses {
        if w.len() != depth {
            return Err(Error::Domain(format!("leaf {w} is not at generation {depth}")));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("mass {v} at {w}")));
        }
    }
    let leaves: Vec<(&Word, f64)> = leaf_masses
        .iter()
        .filter(|(_, &v)| v > 0.0)
        .map(|(w, &v)| (w, v))
        .collect();
    let mut gens: Vec<Vec<Word>> = vec![vec![Word::root()]];
    for n in 1..=depth {
        let set: BTreeSet<Word> = leaves.iter().map(|(w, _)| w.restrict(n)).collect();
        gens.push(set.into_iter().collect());
    }
    let mut levels = Vec::with_capacity(depth);
    for n in 0..depth {
        let counts: Vec<u32> = gens[n]
            .iter()
            .map(|p| gens[n + 1].iter().filter(|c| c.parent().as_ref() == Some(p)).count() as u32)
            .collect();
        levels.push(counts);
    }
    let tree = TruncatedTree::from_levels(depth, levels)?;
    let mut masses: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    masses[depth] = gens[depth].iter().map(|w| leaf_masses[w]).collect();
    for n in (0..depth).rev() {
        masses[n] = (0..tree.width(n))
            .map(|i| tree.children(n, i).map(|j| masses[n + 1][j]).sum())
            .collect();
    }
    Ok((tree, gens, masses))
}

/// Discretised comparison of the minimal cover cost with the total mass.
///
/// Balls are paired with the gauge at their diameter `e^{-|u|}`, which is the
/// supremum of the radii `r` with `B(u, r) = B_u`.
pub fn comparison_check(
    leaf_masses: &BTreeMap<Word, f64>,
    g: &Gauge,
    c: f64,
    min_gen: usize,
) -> Result<ComparisonReport> {
    if !(c >= 1.0) {
        return Err(Error::Domain(format!("doubling constant {c} must be >= 1")));
    }
    let (tree, names, masses) = support_tree(leaf_masses)?;
    let depth = tree.depth();
    let total = masses[0][0];
    let cover = if total > 0.0 {
        min_cover_cost(&tree, g, min_gen)?
    } else {
        CoverSolution {
            cost: 0.0,
            antichain: Vec::new(),
            ball_costs: Vec::new(),
            min_generation_used: None,
            max_generation_used: None,
            min_gen,
            depth,
        }
    };
    let gl = gauge_levels(g, min_gen, depth)?;

    let mut witness = None;
    'outer: for n in min_gen..=depth {
        for (i, &mass) in masses[n].iter().enumerate() {
            if mass > gl[n] {
                witness = Some((names[n][i].clone(), n, mass, gl[n]));
                break 'outer;
            }
        }
    }
    let lower = match witness {
        Some((w, n, mass, gv)) => Verdict::HypothesisNotMet {
            witness: w,
            generation: n,
            mass,
            gauge: gv,
        },
        None => {
            let bound = total / c;
            if cover.cost >= bound {
                Verdict::Holds {
                    cost: cover.cost,
                    bound,
                }
            } else {
                Verdict::Violated {
                    cost: cover.cost,
                    bound,
                }
            }
        }
    };

    // heavy[n][i]: some ancestor-or-self at generation >= min_gen is heavy
    let mut heavy: Vec<bool> = vec![false];
    let mut unmet = None;
    for n in 1..=depth {
        let mut next = Vec::with_capacity(tree.width(n));
        for (p, &h) in heavy.iter().enumerate() {
            for j in tree.children(n - 1, p) {
                next.push(h || (n >= min_gen && masses[n][j] >= gl[n]));
            }
        }
        heavy = next;
    }
    if let Some(i) = heavy.iter().position(|&h| !h) {
        unmet = Some((names[depth][i].clone(), depth, masses[depth][i], gl[depth]));
    }
    let upper = match unmet {
        Some((w, n, mass, gv)) => Verdict::HypothesisNotMet {
            witness: w,
            generation: n,
            mass,
            gauge: gv,
        },
        None => {
            let bound = c * total;
            if cover.cost <= bound {
                Verdict::Holds {
                    cost: cover.cost,
                    bound,
                }
            } else {
                Verdict::Violated {
                    cost: cover.cost,
                    bound,
                }
            }
        }
    };
    Ok(ComparisonReport {
        depth,
        min_gen,
        c,
        total_mass: total,
        cover,
        lower,
        upper,
    })
}

/// One sampled tree: its optimal cover cost and `Ŵ_∅`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverRun {
    pub cost: f64,
    pub w: f64,
    pub depth: usize,
    pub min_gen: usize,
}

/// Cover costs and `Ŵ_∅` over `reps` GW trees of the given depth.
pub fn cover_runs(
    d: &OffspringDistribution,
    g: &Gauge,
    depth: usize,
    min_gen: usize,
    reps: usize,
    seed: u64,
    cap: u64,
) -> Result<Vec<CoverRun>> {
    let s = GwSampler::new(d)?.with_cap(cap);
    parallel::replicas(seed, Purpose::Covers, reps, |_, stream| {
        let t = s.sample_gw(depth, &mut stream.rng())?;
        let sol = min_cover_cost(&t, g, min_gen)?;
        Ok(CoverRun {
            cost: sol.cost,
            w: WField::new(&t, d.mean())?.root(),
            depth,
            min_gen,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairs: usize,
    pub dead: usize,
    /// `Σ cost·W / Σ W²` with its standard error.
    pub slope: Estimate,
    /// `κ̂` per seed and `1/κ̂` across them.
    pub kappa_hats: Vec<f64>,
    pub inverse_kappa: Estimate,
    pub depth: usize,
    pub min_gen: usize,
    pub tail_depth: Option<usize>,
    pub note: String,
}

impl PairingReport {
    /// `max(slope, 1/κ̂) / min(slope, 1/κ̂)`.
    pub fn ratio(&self) -> f64 {
        let (a, b) = (self.slope.mean, self.inverse_kappa.mean);
        a.max(b) / a.min(b)
    }
}

/// Pairs the cover cost with `Ŵ` across trees (regression through the
/// origin) and reports the slope next to `1/κ̂`. No relation is asserted:
/// the cover cost is a pre-measure at a fixed scale, `κ̂` a windowed proxy of
/// a limsup.
pub fn c_xi_pairing(ratios: &[RatioReport], runs: &[CoverRun], tail_depth: Option<usize>) -> Result<PairingReport> {
    if runs.is_empty() || ratios.is_empty() {
        return Err(Error::TooFewSamples { got: 0, needed: 1 });
    }
    let (depth, min_gen) = (runs[0].depth, runs[0].min_gen);
    if runs.iter().any(|r| r.depth != depth || r.min_gen != min_gen) {
        return Err(Error::TruncationMismatch("cover runs at different depths".into()));
    }
    for r in ratios {
        if let (Some(a), Some(b)) = (r.tail_depth, tail_depth) {
            if a != b {
                return Err(Error::TruncationMismatch(format!(
                    "density ratios use a tail at depth {a}, covers at depth {b}"
                )));
            }
        }
    }
    let sww: f64 = runs.iter().map(|r| r.w * r.w).sum();
    let scw: f64 = runs.iter().map(|r| r.cost * r.w).sum();
    if !(sww > 0.0) {
        return Err(Error::Domain("every tree died; the slope is undefined".into()));
    }
    let b = scw / sww;
    let n = runs.len();
    let rss: f64 = runs.iter().map(|r| (r.cost - b * r.w).powi(2)).sum();
    let se = if n > 1 {
        (rss / (n - 1) as f64 / sww).sqrt()
    } else {
        0.0
    };
    let kappa_hats: Vec<f64> = ratios.iter().map(|r| r.kappa_hat).collect();
    let inverse_kappa = Estimate::from_samples(kappa_hats.iter().map(|k| 1.0 / k));
    Ok(PairingReport {
        pairs: n,
        dead: runs.iter().filter(|r| r.w == 0.0).count(),
        slope: Estimate { mean: b, stderr: se, n },
        kappa_hats,
        inverse_kappa,
        depth,
        min_gen,
        tail_depth,
        note: format!(
            "cover costs are depth-{depth} pre-measures with balls of generation >= {min_gen}; \
             1/kappa is the inverse cross-replica median of windowed density-ratio maxima; \
             the two estimate the same constant only in the limit"
        ),
    })
}

/// Median of the cover cost per unit `Ŵ` over surviving trees.
pub fn median_cost_per_w(runs: &[CoverRun]) -> Option<f64> {
    let v: Vec<f64> = runs.iter().filter(|r| r.w > 0.0).map(|r| r.cost / r.w).collect();
    if v.is_empty() {
        None
    } else {
        Some(stats::median(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail::TailModel;
    use crate::tree::tests::arb_tree;
    use crate::word::w;
    use proptest::prelude::*;

    #[test]
    fn binary_cover_is_one() {
        for n in 5..=15 {
            let t = TruncatedTree::full(2, n);
            let sol = min_cover_cost(&t, &Gauge::binary(), 1).unwrap();
            assert!((sol.cost - 1.0).abs() < 1e-12);
            sol.verify(&t, &Gauge::binary()).unwrap();
        }
    }

    #[test]
    fn dead_tree_costs_nothing() {
        let t = TruncatedTree::single_node(4);
        let sol = min_cover_cost(&t, &Gauge::identity(), 1).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert!(sol.antichain.is_empty());
        sol.verify(&t, &Gauge::identity()).unwrap();
    }

    #[test]
    fn single_branch_uses_deepest_allowed_scale() {
        // {∅↦2, 1↦0, 2↦1, (2,1)↦1}, g(r) = r: one alive ray, and since
        // g(e^{-n}) = e^{-n} decreases the deepest ball is the cheapest.
        let t = TruncatedTree::from_levels(3, vec![vec![2], vec![0, 1], vec![1]]).unwrap();
        let sol = min_cover_cost(&t, &Gauge::identity(), 1).unwrap();
        assert_eq!(sol.antichain, vec![w(&[2, 1, 1])]);
        assert!((sol.cost - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn hawkes_gauge_needs_min_gen_two() {
        let t = TruncatedTree::full(2, 4);
        let g = Gauge::hawkes(2.0, TailModel::Constant { value: 1.0 }).unwrap();
        assert!(min_cover_cost(&t, &g, 1).is_err());
        assert!((min_cover_cost(&t, &g, 2).unwrap().cost - 1.0).abs() < 1e-12);
        assert!(min_cover_cost(&t, &g, 5).is_err());
    }

    /// Exhaustive search: every antichain of vertices with generations in
    /// `[min_gen, N]` (dead vertices included) that covers the alive frontier.
    fn brute_force(t: &TruncatedTree, gl: &[f64], min_gen: usize) -> f64 {
        let d = t.depth();
        let alive = t.frontier_counts();
        // all antichains below vertex (n, i), as lists of (gen, index)
        fn antichains(t: &TruncatedTree, n: usize, i: usize, min_gen: usize) -> Vec<Vec<(usize, usize)>> {
            let mut out = Vec::new();
            if n >= min_gen {
                out.push(vec![(n, i)]);
            }
            if n < t.depth() {
                let mut acc: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
                for j in t.children(n, i) {
                    let sub = antichains(t, n + 1, j, min_gen);
                    let mut next = Vec::new();
                    for a in &acc {
                        for s in &sub {
                            let mut v = a.clone();
                            v.extend_from_slice(s);
                            next.push(v);
                        }
                    }
                    acc = next;
                }
                out.extend(acc);
            } else if n < min_gen {
                out.push(Vec::new());
            }
            out
        }
        let mut best = f64::INFINITY;
        for a in antichains(t, 0, 0, min_gen) {
            let words: Vec<Word> = a.iter().map(|&(n, i)| t.word_at(n, i)).collect();
            let covered = (0..t.width(d)).all(|i| {
                alive[d][i] == 0 || {
                    let v = t.word_at(d, i);
                    words.iter().any(|u| u.is_ancestor_of(&v))
                }
            });
            if covered {
                let c: f64 = a.iter().map(|&(n, _)| gl[n]).sum();
                best = best.min(c);
            }
        }
        best
    }

    fn small_tree() -> impl Strategy<Value = TruncatedTree> {
        arb_tree().prop_filter("at most 40 nodes, depth 1..=4", |t| {
            t.node_count() <= 40 && (1..=4).contains(&t.depth())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn dp_matches_brute_force(t in small_tree(), min_gen in 1usize..3, scale in 0.2f64..3.0, base in 1.2f64..4.0) {
            prop_assume!(min_gen <= t.depth());
            let g = Gauge::power(scale, base).unwrap();
            let sol = min_cover_cost(&t, &g, min_gen).unwrap();
            sol.verify(&t, &g).map_err(TestCaseError::fail)?;
            let gl = gauge_levels(&g, min_gen, t.depth()).unwrap();
            let bf = brute_force(&t, &gl, min_gen);
            let alive = t.frontier_counts()[0][0] > 0;
            if alive {
                prop_assert!((sol.cost - bf).abs() <= 1e-12 * bf.max(1.0), "dp {} bf {}", sol.cost, bf);
            } else {
                prop_assert_eq!(sol.cost, 0.0);
            }
        }

        #[test]
        fn cost_monotone_in_gauge(t in small_tree(), base in 1.2f64..4.0, bump in 1.0f64..3.0) {
            let a = min_cover_cost(&t, &Gauge::power(1.0, base).unwrap(), 1).unwrap();
            let b = min_cover_cost(&t, &Gauge::power(bump, base).unwrap(), 1).unwrap();
            prop_assert!(b.cost >= a.cost);
        }
    }

    #[test]
    fn comparison_binary_is_tight() {
        let n = 6;
        let t = TruncatedTree::full(2, n);
        let masses: BTreeMap<Word, f64> = t.words_at(n).map(|u| (u, 2f64.powi(-(n as i32)))).collect();
        let r = comparison_check(&masses, &Gauge::binary(), 1.0, 1).unwrap();
        assert!((r.total_mass - 1.0).abs() < 1e-12);
        assert!((r.cover.cost - 1.0).abs() < 1e-12);
        assert!(matches!(r.lower, Verdict::Holds { .. }));
        assert!(matches!(r.upper, Verdict::Holds { .. }));
    }

    #[test]
    fn comparison_reports_unmet_hypothesis() {
        let mut masses = BTreeMap::new();
        masses.insert(w(&[1, 1]), 0.9);
        masses.insert(w(&[2, 1]), 0.0);
        let r = comparison_check(&masses, &Gauge::identity(), std::f64::consts::E, 1).unwrap();
        match &r.lower {
            Verdict::HypothesisNotMet { witness, .. } => assert_eq!(witness, &w(&[1])),
            v => panic!("unexpected {v:?}"),
        }
        assert!(r.upper.hypothesis_met());
        // the zero-mass leaf is outside the support and needs no cover
        assert_eq!(r.cover.antichain.len(), 1);
        assert!(comparison_check(&BTreeMap::new(), &Gauge::identity(), 2.0, 1).is_err());
    }

    #[test]
    fn pairing_ignores_dead_trees() {
        let runs = vec![
            CoverRun {
                cost: 1.0,
                w: 1.0,
                depth: 5,
                min_gen: 2,
            },
            CoverRun {
                cost: 2.0,
                w: 2.0,
                depth: 5,
                min_gen: 2,
            },
        ];
        let mut with_dead = runs.clone();
        with_dead.push(CoverRun {
            cost: 0.0,
            w: 0.0,
            depth: 5,
            min_gen: 2,
        });
        let ratio = RatioReport {
            depth: 10,
            window: crate::spine::RatioWindow { lo: 5, hi: 10 },
            window_max: vec![2.0],
            mean: 2.0,
            quantiles: [2.0; 5],
            kappa_hat: 2.0,
            dyadic: vec![],
            skipped: vec![],
            tail_depth: Some(12),
        };
        let a = c_xi_pairing(std::slice::from_ref(&ratio), &runs, Some(12)).unwrap();
        let b = c_xi_pairing(std::slice::from_ref(&ratio), &with_dead, Some(12)).unwrap();
        assert_eq!(a.slope.mean, 1.0);
        assert_eq!(b.slope.mean, 1.0);
        assert_eq!(b.dead, 1);
        assert_eq!(a.inverse_kappa.mean, 0.5);
        assert!(c_xi_pairing(&[ratio], &runs, Some(14)).is_err());
    }
}
