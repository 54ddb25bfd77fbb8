//! Truncated martingale estimates `Ŵ_u`, branching-measure ball masses and
//! the ball/radius arithmetic of the boundary metric `δ(u,v) = e^{-|u∧v|}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::TruncatedTree;
use crate::word::Word;

/// `Ŵ_u = Z_{N-|u|}(θ_u T) / m^{N-|u|}` for every vertex of a depth-`N` tree.
///
/// The frontier counts are kept as integers, so `Ŵ` and the ball masses are
/// each computed from exact counts with a single rounding.
#[derive(Debug, Clone)]
pub struct WField {
    tree: TruncatedTree,
    m: f64,
    counts: Vec<Vec<u64>>,
}

impl WField {
    pub fn new(tree: &TruncatedTree, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("mean {m} must be positive and finite")));
        }
        Ok(WField {
            counts: tree.frontier_counts(),
            tree: tree.clone(),
            m,
        })
    }

    pub fn tree(&self) -> &TruncatedTree {
        &self.tree
    }

    /// Reference depth `N` of the estimator.
    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn mean(&self) -> f64 {
        self.m
    }

    /// `Z_{N-n}` below vertex `i` of generation `n`.
    pub fn count(&self, n: usize, i: usize) -> u64 {
        self.counts[n][i]
    }

    /// `Ŵ` of vertex `i` of generation `n`.
    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.counts[n][i] as f64 / self.m.powi((self.depth() - n) as i32)
    }

    /// `Ŵ_∅`.
    pub fn root(&self) -> f64 {
        self.value(0, 0)
    }

    /// `Ŵ_u`, or 0 when `u ∉ T` (including `|u| > N`, where nothing is known
    /// and the vertex is absent from the truncated tree).
    pub fn w(&self, u: &Word) -> f64 {
        match self.tree.locate(u) {
            Some(i) => self.value(u.len(), i),
            None => 0.0,
        }
    }

    /// `M̂(B_u) = m^{-|u|} Ŵ_u = Z_{N-|u|}(θ_u T) m^{-N}`; exact zero off the tree.
    pub fn ball_mass(&self, u: &Word) -> f64 {
        match self.tree.locate(u) {
            Some(i) => self.counts[u.len()][i] as f64 / self.m.powi(self.depth() as i32),
            None => 0.0,
        }
    }

    /// `ln M̂(B_u)`, computed without forming `m^{-N}`; `-inf` off the tree or
    /// on dead vertices.
    pub fn ln_ball_mass(&self, u: &Word) -> f64 {
        match self.tree.locate(u) {
            Some(i) => (self.counts[u.len()][i] as f64).ln() - self.depth() as f64 * self.m.ln(),
            None => f64::NEG_INFINITY,
        }
    }

    /// Largest `|Ŵ_u - m^{-1} Σ_i Ŵ_{u*i}|` over internal vertices.
    pub fn projective_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for n in 0..self.depth() {
            for i in 0..self.tree.width(n) {
                let sum: f64 = self.tree.children(n, i).map(|j| self.value(n + 1, j)).sum();
                worst = worst.max((self.value(n, i) - sum / self.m).abs());
            }
        }
        worst
    }

    /// `Σ_{|u|=n} M̂(B_u)`, which equals `Ŵ_∅` at every `n <= N`.
    pub fn level_mass(&self, n: usize) -> f64 {
        let scale = self.m.powi(self.depth() as i32);
        self.counts[n].iter().map(|&c| c as f64 / scale).sum()
    }

    /// One row per vertex: `word,generation,w_value,ball_mass`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "word,generation,w_value,ball_mass")?;
        for n in 0..=self.depth() {
            let scale = self.m.powi(self.depth() as i32);
            for i in 0..self.tree.width(n) {
                writeln!(
                    out,
                    "{},{},{},{}",
                    self.tree.word_at(n, i),
                    n,
                    self.value(n, i),
                    self.counts[n][i] as f64 / scale
                )?;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`WField::new`].
pub fn w_field(t: &TruncatedTree, m: f64) -> Result<WField> {
    WField::new(t, m)
}

/// Free-function form of [`WField::ball_mass`].
pub fn ball_mass(w: &WField, u: &Word) -> f64 {
    w.ball_mass(u)
}

/// `n(r)` together with whether the ball is the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusClass {
    pub generation: usize,
    /// `r > 1`: `B(u, r)` is all of `∂U`.
    pub whole_space: bool,
}

/// `n(r) = ⌊(-ln r)_+⌋ + 1`: the generation of the ball `B(u, r) = B_{u|n(r)}`.
pub fn radius_to_generation(r: f64) -> Result<RadiusClass> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius {r} must be positive")));
    }
    let e = (-r.ln()).max(0.0);
    Ok(RadiusClass {
        generation: e.floor() as usize + 1,
        whole_space: r > 1.0,
    })
}

/// How two balls of the ultrametric boundary sit relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallRelation {
    Equal,
    Contains,
    ContainedIn,
    Disjoint,
}

/// The ball `B_u` of rays through `u`; its diameter is `e^{-|u|}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BallId {
    pub center: Word,
}

impl BallId {
    pub fn new(center: Word) -> Self {
        BallId { center }
    }

    pub fn generation(&self) -> usize {
        self.center.len()
    }

    pub fn diameter(&self) -> f64 {
        (-(self.generation() as f64)).exp()
    }

    /// Balls are nested or disjoint: `B_u ⊇ B_v` iff `u ∧ v = u`.
    pub fn relation(&self, other: &BallId) -> BallRelation {
        let m = self.center.meet(&other.center);
        match (m == self.center, m == other.center) {
            (true, true) => BallRelation::Equal,
            (true, false) => BallRelation::Contains,
            (false, true) => BallRelation::ContainedIn,
            (false, false) => BallRelation::Disjoint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::tests::arb_tree;
    use crate::word::w;
    use proptest::prelude::*;

    #[test]
    fn binary_is_flat() {
        let t = TruncatedTree::full(2, 8);
        let f = WField::new(&t, 2.0).unwrap();
        for n in 0..=8 {
            for i in 0..t.width(n) {
                assert_eq!(f.value(n, i), 1.0);
            }
        }
        assert_eq!(f.ball_mass(&w(&[1, 2, 1])), 0.125);
        assert_eq!(f.ln_ball_mass(&w(&[1, 2, 1])), -3.0 * 2f64.ln());
    }

    #[test]
    fn small_tree_example() {
        // {∅↦2, 1↦0, 2↦2} at depth 2, m = 1.5.
        let t = TruncatedTree::from_levels(2, vec![vec![2], vec![0, 2]]).unwrap();
        let f = WField::new(&t, 1.5).unwrap();
        assert!((f.root() - 2.0 / 2.25).abs() < 1e-15);
        assert_eq!(f.w(&w(&[1])), 0.0);
        assert_eq!(f.ball_mass(&w(&[1])), 0.0);
        assert_eq!(f.ball_mass(&w(&[3])), 0.0);
        assert_eq!(f.w(&w(&[2, 1])), 1.0);
        assert!((f.ball_mass(&w(&[1])) + f.ball_mass(&w(&[2])) - f.root()).abs() < 1e-15);
    }

    #[test]
    fn csv_export() {
        let t = TruncatedTree::from_levels(1, vec![vec![2]]).unwrap();
        let mut buf = Vec::new();
        WField::new(&t, 2.0).unwrap().write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "word,generation,w_value,ball_mass\n,0,1,1\n1,1,1,0.5\n2,1,1,0.5\n");
    }

    #[test]
    fn radius_classes() {
        assert_eq!(radius_to_generation(1.0).unwrap().generation, 1);
        assert_eq!(radius_to_generation((-2.0f64).exp()).unwrap().generation, 3);
        assert_eq!(radius_to_generation(0.5).unwrap().generation, 1);
        let big = radius_to_generation(3.0).unwrap();
        assert_eq!(big.generation, 1);
        assert!(big.whole_space);
        assert!(radius_to_generation(0.0).is_err());
        assert!(radius_to_generation(-1.0).is_err());
    }

    #[test]
    fn ball_relations() {
        let a = BallId::new(w(&[1]));
        let b = BallId::new(w(&[1, 2]));
        let c = BallId::new(w(&[2]));
        assert_eq!(a.relation(&b), BallRelation::Contains);
        assert_eq!(b.relation(&a), BallRelation::ContainedIn);
        assert_eq!(a.relation(&c), BallRelation::Disjoint);
        assert_eq!(a.relation(&a), BallRelation::Equal);
        assert!((b.diameter() - (-2.0f64).exp()).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn additivity_and_projectivity(t in arb_tree(), m in 1.01f64..3.0) {
            let f = WField::new(&t, m).unwrap();
            prop_assert!(f.projective_residual() <= 1e-10 * f.root().max(1.0));
            for n in 0..t.depth() {
                prop_assert!((f.level_mass(n) - f.root()).abs() <= 1e-10);
            }
        }

        #[test]
        fn nested_balls_are_lighter(t in arb_tree(), m in 1.01f64..3.0) {
            let f = WField::new(&t, m).unwrap();
            for n in 1..=t.depth() {
                for u in t.words_at(n) {
                    let p = u.parent().unwrap();
                    prop_assert!(f.ball_mass(&u) <= f.ball_mass(&p));
                    prop_assert_eq!(f.w(&u) == 0.0, f.count(n, t.locate(&u).unwrap()) == 0);
                }
            }
        }

        #[test]
        fn cutting_is_local(t in arb_tree(), pick in 0usize..1000) {
            // Cutting a frontier parent only changes its ancestors' values.
            let d = t.depth();
            prop_assume!(d >= 1 && t.width(d - 1) > 0);
            let i = pick % t.width(d - 1);
            let u = t.word_at(d - 1, i);
            let cut = t.cut(&u).unwrap();
            let before = WField::new(&t, 1.7).unwrap();
            let after = WField::new(&cut, 1.7).unwrap();
            for n in 0..=d {
                for v in cut.words_at(n) {
                    if !v.is_ancestor_of(&u) {
                        prop_assert_eq!(before.w(&v), after.w(&v));
                    }
                }
            }
        }
    }
}
