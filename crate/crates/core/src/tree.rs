//! Finite-depth ordered trees.
//!
//! A [`TruncatedTree`] stores the offspring counts of every vertex above the
//! truncation depth `N`, generation by generation, in breadth-first
//! lexicographic order. In that order the children of a vertex, and more
//! generally its descendants at any fixed generation, occupy a contiguous
//! index range of the next levels, which makes cutting, shifting and
//! bottom-up folds cheap.
//!
//! The record form ([`TreeRecords`]) is the word-keyed view used for
//! validation and serialization: one `word -> offspring_count` entry per
//! vertex with `|u| < N`. Frontier vertices (`|u| = N`) carry no record and
//! absent words (`k_u = -1`) are simply missing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::Word;

/// One breach of the tree axioms found by [`TreeRecords::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    /// Depth is positive but the root has no offspring record.
    MissingRoot,
    /// A record exists for a word at or below the truncation depth.
    RecordBeyondDepth { word: Word },
    /// Tree(1): the parent of a recorded word is not in the tree.
    MissingParent { word: Word },
    /// Tree(2): a recorded word's last letter exceeds its parent's count.
    ChildIndexExceedsParent { word: Word, parent_count: u32 },
    /// Tree(2): the parent announces this child but it has no record.
    MissingChild { word: Word },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingRoot => write!(f, "root has no offspring record"),
            Violation::RecordBeyondDepth { word } => {
                write!(f, "[{word}] recorded at or below the truncation depth")
            }
            Violation::MissingParent { word } => write!(f, "[{word}] Tree(1): prefix missing"),
            Violation::ChildIndexExceedsParent { word, parent_count } => {
                write!(f, "[{word}] Tree(2): child index exceeds parent count {parent_count}")
            }
            Violation::MissingChild { word } => {
                write!(f, "[{word}] Tree(2): announced child has no record")
            }
        }
    }
}

/// Word-keyed offspring records of a depth-`N` tree prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecords {
    pub depth: usize,
    pub offspring: BTreeMap<Word, u32>,
}

impl TreeRecords {
    pub fn new(depth: usize) -> Self {
        TreeRecords {
            depth,
            offspring: BTreeMap::new(),
        }
    }

    pub fn with(mut self, word: Word, count: u32) -> Self {
        self.offspring.insert(word, count);
        self
    }

    /// Checks Tree(1) and Tree(2) on the truncated prefix. Violations are
    /// returned, never raised.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.depth > 0 && !self.offspring.contains_key(&Word::root()) {
            out.push(Violation::MissingRoot);
        }
        for word in self.offspring.keys() {
            if word.len() >= self.depth {
                out.push(Violation::RecordBeyondDepth { word: word.clone() });
            }
            if let Some(parent) = word.parent() {
                match self.offspring.get(&parent) {
                    None => out.push(Violation::MissingParent { word: word.clone() }),
                    Some(&k) => {
                        let i = word.last().expect("non-root word");
                        if i > k {
                            out.push(Violation::ChildIndexExceedsParent {
                                word: word.clone(),
                                parent_count: k,
                            });
                        }
                    }
                }
            }
        }
        for (word, &k) in &self.offspring {
            if word.len() + 1 >= self.depth {
                continue;
            }
            for i in 1..=k {
                let c = word.child(i);
                if !self.offspring.contains_key(&c) {
                    out.push(Violation::MissingChild { word: c });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Writes the CSV form: a `# depth=N` header line, a column header, then
    /// one `word,offspring_count` row per record in breadth-first order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# depth={}", self.depth)?;
        writeln!(out, "word,offspring_count")?;
        for (word, k) in &self.offspring {
            writeln!(out, "{word},{k}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut depth = None;
        let mut offspring = BTreeMap::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim_end();
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some(d) = kv.strip_prefix("depth=") {
                        depth = Some(d.parse().map_err(|_| Error::Io(format!("bad depth `{d}`")))?);
                    }
                }
                continue;
            }
            if line.is_empty() || line == "word,offspring_count" {
                continue;
            }
            let (w, k) = line
                .split_once(',')
                .ok_or_else(|| Error::Io(format!("bad record `{line}`")))?;
            let k: u32 = k
                .trim()
                .parse()
                .map_err(|_| Error::Io(format!("bad offspring count in `{line}`")))?;
            offspring.insert(w.parse()?, k);
        }
        let depth = depth.ok_or_else(|| Error::Io("missing `# depth=` header".into()))?;
        Ok(TreeRecords { depth, offspring })
    }

    /// JSON-lines form: a `{"depth":N}` line followed by one
    /// `{"word":..,"offspring_count":..}` object per record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", serde_json::json!({ "depth": self.depth }))?;
        for (word, k) in &self.offspring {
            writeln!(
                out,
                "{}",
                serde_json::json!({ "word": word.to_string(), "offspring_count": k })
            )?;
        }
        Ok(())
    }
}

/// A depth-`N` prefix `T|N` of an ordered rooted tree.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeRecords", into = "TreeRecords")]
pub struct TruncatedTree {
    depth: usize,
    /// `levels[n][i]`: offspring count of the `i`-th vertex of generation `n`, for `n < depth`.
    levels: Vec<Vec<u32>>,
    /// `starts[n][i]`: index in generation `n+1` of the first child of vertex `i`; one
    /// trailing entry holds `Z_{n+1}`.
    starts: Vec<Vec<usize>>,
}

impl fmt::Debug for TruncatedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncatedTree")
            .field("depth", &self.depth)
            .field("levels", &self.levels)
            .finish()
    }
}

fn prefix_starts(level: &[u32]) -> Vec<usize> {
    let mut s = Vec::with_capacity(level.len() + 1);
    let mut acc = 0usize;
    s.push(0);
    for &k in level {
        acc += k as usize;
        s.push(acc);
    }
    s
}

impl TruncatedTree {
    /// Builds a tree from per-generation offspring counts. `levels.len()` must
    /// equal `depth`, generation 0 has exactly one vertex and each generation
    /// has as many vertices as the previous one has children.
    pub fn from_levels(depth: usize, levels: Vec<Vec<u32>>) -> Result<Self> {
        if levels.len() != depth {
            return Err(Error::Domain(format!(
                "{} levels supplied for depth {depth}",
                levels.len()
            )));
        }
        if depth > 0 && levels[0].len() != 1 {
            return Err(Error::Domain("generation 0 must hold exactly the root".into()));
        }
        let starts: Vec<Vec<usize>> = levels.iter().map(|l| prefix_starts(l)).collect();
        for n in 1..depth {
            let expected = *starts[n - 1].last().unwrap();
            if levels[n].len() != expected {
                return Err(Error::Domain(format!(
                    "generation {n} has {} vertices, parents announce {expected}",
                    levels[n].len()
                )));
            }
        }
        Ok(TruncatedTree { depth, levels, starts })
    }

    /// The tree `{∅}` with `k_∅ = 0`, truncated at `depth`.
    pub fn single_node(depth: usize) -> Self {
        let mut levels = vec![Vec::new(); depth];
        if depth > 0 {
            levels[0].push(0);
        }
        TruncatedTree::from_levels(depth, levels).expect("single node is well formed")
    }

    /// The full `k`-ary tree of the given depth.
    pub fn full(k: u32, depth: usize) -> Self {
        let mut levels = Vec::with_capacity(depth);
        let mut width = 1usize;
        for _ in 0..depth {
            levels.push(vec![k; width]);
            width *= k as usize;
        }
        TruncatedTree::from_levels(depth, levels).expect("full tree is well formed")
    }

    pub fn from_records(records: &TreeRecords) -> Result<Self> {
        records.validate().map_err(|v| Error::InvalidTree(v.len()))?;
        let depth = records.depth;
        let mut levels = vec![Vec::new(); depth];
        // BTreeMap iterates breadth-first, which is exactly the level order.
        for (word, &k) in &records.offspring {
            levels[word.len()].push(k);
        }
        TruncatedTree::from_levels(depth, levels)
    }

    pub fn to_records(&self) -> TreeRecords {
        let mut offspring = BTreeMap::new();
        for n in 0..self.depth {
            for (i, &k) in self.levels[n].iter().enumerate() {
                offspring.insert(self.word_at(n, i), k);
            }
        }
        TreeRecords {
            depth: self.depth,
            offspring,
        }
    }

    /// Re-derives the record form and checks the tree axioms on it.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        self.to_records().validate()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, n: usize) -> &[u32] {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[Vec<u32>] {
        &self.levels
    }

    /// `Z_n(T)`. Fails when `n` exceeds the truncation depth.
    pub fn z_count(&self, n: usize) -> Result<usize> {
        if n > self.depth {
            return Err(Error::BeyondTruncation {
                requested: n,
                depth: self.depth,
            });
        }
        Ok(self.width(n))
    }

    /// Number of vertices at generation `n <= depth`.
    pub fn width(&self, n: usize) -> usize {
        if n == 0 {
            1
        } else {
            *self.starts[n - 1].last().unwrap()
        }
    }

    pub fn node_count(&self) -> usize {
        (0..=self.depth).map(|n| self.width(n)).sum()
    }

    /// Children of vertex `i` of generation `n < depth`, as an index range in generation `n+1`.
    pub fn children(&self, n: usize, i: usize) -> Range<usize> {
        self.starts[n][i]..self.starts[n][i + 1]
    }

    /// Index of the parent (in generation `n-1`) of vertex `i` of generation `n >= 1`.
    pub fn parent_index(&self, n: usize, i: usize) -> usize {
        self.starts[n - 1].partition_point(|&s| s <= i) - 1
    }

    pub fn word_at(&self, n: usize, mut i: usize) -> Word {
        let mut letters = vec![0u32; n];
        for g in (1..=n).rev() {
            let p = self.parent_index(g, i);
            letters[g - 1] = (i - self.starts[g - 1][p] + 1) as u32;
            i = p;
        }
        Word::new(letters).expect("letters are positive")
    }

    /// Index of `u` within its generation, if `u ∈ T` and `|u| <= depth`.
    pub fn locate(&self, u: &Word) -> Option<usize> {
        if u.len() > self.depth {
            return None;
        }
        let mut i = 0usize;
        for (g, &letter) in u.letters().iter().enumerate() {
            let k = self.levels[g][i];
            if letter > k {
                return None;
            }
            i = self.starts[g][i] + letter as usize - 1;
        }
        Some(i)
    }

    pub fn contains(&self, u: &Word) -> bool {
        self.locate(u).is_some()
    }

    /// `k_u(T)` for `u` above the frontier; `None` for absent or frontier words.
    pub fn offspring(&self, u: &Word) -> Option<u32> {
        if u.len() >= self.depth {
            return None;
        }
        self.locate(u).map(|i| self.levels[u.len()][i])
    }

    pub fn words_at(&self, n: usize) -> impl Iterator<Item = Word> + '_ {
        (0..self.width(n)).map(move |i| self.word_at(n, i))
    }

    /// Index ranges, generation by generation from `n` down to the depth, of the
    /// descendants of vertex `i` of generation `n` (the vertex itself first).
    pub fn descendant_ranges(&self, n: usize, i: usize) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.depth - n + 1);
        let mut r = i..i + 1;
        out.push(r.clone());
        for g in n..self.depth {
            r = self.starts[g][r.start]..self.starts[g][r.end];
            out.push(r.clone());
        }
        out
    }

    /// `Cut_u T`: removes every strict descendant of `u` and sets `k_u = 0`.
    pub fn cut(&self, u: &Word) -> Result<TruncatedTree> {
        let i = self.locate(u).ok_or_else(|| Error::NotInTree(u.clone()))?;
        let n = u.len();
        let ranges = self.descendant_ranges(n, i);
        let mut levels = self.levels.clone();
        if n < self.depth {
            levels[n][i] = 0;
        }
        for g in n + 1..self.depth {
            let r = &ranges[g - n];
            levels[g].drain(r.clone());
        }
        TruncatedTree::from_levels(self.depth, levels)
    }

    /// `θ_u T`, re-rooted at `∅` with depth `N - |u|`; `None` when `u ∉ T`.
    pub fn shift(&self, u: &Word) -> Option<TruncatedTree> {
        let i = self.locate(u)?;
        let n = u.len();
        let ranges = self.descendant_ranges(n, i);
        let levels = (n..self.depth)
            .map(|g| self.levels[g][ranges[g - n].clone()].to_vec())
            .collect();
        Some(TruncatedTree::from_levels(self.depth - n, levels).expect("subtree is well formed"))
    }

    /// `T|m`; a no-op when `m >= depth`.
    pub fn truncate(&self, m: usize) -> TruncatedTree {
        if m >= self.depth {
            return self.clone();
        }
        TruncatedTree::from_levels(m, self.levels[..m].to_vec()).expect("prefix is well formed")
    }

    /// For every vertex, the number of its descendants at the truncation depth
    /// (`Z_{N-|u|}(θ_u T)`), computed in one bottom-up pass.
    pub fn frontier_counts(&self) -> Vec<Vec<u64>> {
        let mut out: Vec<Vec<u64>> = vec![Vec::new(); self.depth + 1];
        out[self.depth] = vec![1; self.width(self.depth)];
        for n in (0..self.depth).rev() {
            let below = &out[n + 1];
            let cur: Vec<u64> = (0..self.width(n))
                .map(|i| below[self.children(n, i)].iter().sum())
                .collect();
            out[n] = cur;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.to_records().write_csv(out)
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<()> {
        self.to_records().write_jsonl(out)
    }
}

impl TryFrom<TreeRecords> for TruncatedTree {
    type Error = Error;
    fn try_from(r: TreeRecords) -> Result<Self> {
        TruncatedTree::from_records(&r)
    }
}

impl From<TruncatedTree> for TreeRecords {
    fn from(t: TruncatedTree) -> TreeRecords {
        t.to_records()
    }
}

/// Arena used to assemble trees out of pieces (spine plus grafted subtrees).
#[derive(Debug, Default)]
pub(crate) struct TreeBuilder {
    children: Vec<Vec<usize>>,
}

impl TreeBuilder {
    pub(crate) fn new() -> Self {
        TreeBuilder {
            children: vec![Vec::new()],
        }
    }

    pub(crate) fn add_child(&mut self, parent: usize) -> usize {
        let id = self.children.len();
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    /// Appends a copy of `sub|max_depth` as the next child of `parent`.
    pub(crate) fn graft(&mut self, parent: usize, sub: &TruncatedTree, max_depth: usize) {
        let depth = sub.depth().min(max_depth);
        let root = self.add_child(parent);
        let mut current = vec![root];
        for g in 0..depth {
            let mut next = Vec::with_capacity(sub.width(g + 1));
            for (i, &id) in current.iter().enumerate() {
                for _ in sub.children(g, i) {
                    next.push(self.add_child(id));
                }
            }
            current = next;
        }
    }

    pub(crate) fn build(self, depth: usize) -> TruncatedTree {
        let mut levels = Vec::with_capacity(depth);
        let mut current = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::new();
            let mut level = Vec::with_capacity(current.len());
            for &id in &current {
                level.push(self.children[id].len() as u32);
                next.extend_from_slice(&self.children[id]);
            }
            levels.push(level);
            current = next;
        }
        TruncatedTree::from_levels(depth, levels).expect("arena yields a well-formed tree")
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::word::w;
    use proptest::prelude::*;

    /// T = {∅↦2, 1↦1, 2↦0, (1,1)↦0} at depth 3.
    fn sample_tree() -> TruncatedTree {
        let r = TreeRecords::new(3)
            .with(Word::root(), 2)
            .with(w(&[1]), 1)
            .with(w(&[2]), 0)
            .with(w(&[1, 1]), 0);
        TruncatedTree::from_records(&r).unwrap()
    }

    #[test]
    fn validate_examples() {
        let ok = TreeRecords::new(2)
            .with(Word::root(), 2)
            .with(w(&[1]), 1)
            .with(w(&[2]), 0);
        assert_eq!(ok.validate(), Ok(()));

        let too_far = TreeRecords::new(2)
            .with(Word::root(), 2)
            .with(w(&[1]), 0)
            .with(w(&[2]), 0)
            .with(w(&[3]), 0);
        let v = too_far.validate().unwrap_err();
        assert!(v.contains(&Violation::ChildIndexExceedsParent {
            word: w(&[3]),
            parent_count: 2
        }));

        let no_prefix = TreeRecords::new(3).with(Word::root(), 1).with(w(&[1, 1]), 0);
        let v = no_prefix.validate().unwrap_err();
        assert!(v.contains(&Violation::MissingParent { word: w(&[1, 1]) }));
        assert!(v.contains(&Violation::MissingChild { word: w(&[1]) }));
    }

    #[test]
    fn z_counts() {
        let t = sample_tree();
        assert_eq!(t.z_count(0).unwrap(), 1);
        assert_eq!(t.z_count(1).unwrap(), 2);
        assert_eq!(t.z_count(2).unwrap(), 1);
        assert_eq!(t.z_count(3).unwrap(), 0);
        assert!(matches!(
            t.z_count(4),
            Err(Error::BeyondTruncation { requested: 4, depth: 3 })
        ));
        let single = TruncatedTree::single_node(1);
        assert_eq!(single.z_count(0).unwrap(), 1);
        assert_eq!(single.z_count(1).unwrap(), 0);
        let full = TruncatedTree::full(2, 6);
        for n in 0..=6 {
            assert_eq!(full.z_count(n).unwrap(), 1 << n);
        }
    }

    #[test]
    fn cut_examples() {
        let t = sample_tree();
        let c = t.cut(&w(&[1])).unwrap();
        let expected = TreeRecords::new(3)
            .with(Word::root(), 2)
            .with(w(&[1]), 0)
            .with(w(&[2]), 0);
        assert_eq!(c.to_records(), expected);

        assert_eq!(t.cut(&Word::root()).unwrap(), TruncatedTree::single_node(3));

        let full = TruncatedTree::full(2, 2);
        assert_eq!(full.cut(&w(&[1, 2])).unwrap(), full);

        assert!(matches!(t.cut(&w(&[3])), Err(Error::NotInTree(_))));
    }

    #[test]
    fn shift_examples() {
        let t = sample_tree();
        let s = t.shift(&w(&[1])).unwrap();
        let expected = TreeRecords::new(2).with(Word::root(), 1).with(w(&[1]), 0);
        assert_eq!(s.to_records(), expected);
        assert_eq!(t.shift(&Word::root()).unwrap(), t);
        assert!(t.shift(&w(&[2, 1])).is_none());
        assert!(t.shift(&w(&[7])).is_none());
    }

    #[test]
    fn locate_and_words() {
        let t = sample_tree();
        assert_eq!(t.offspring(&Word::root()), Some(2));
        assert_eq!(t.offspring(&w(&[1])), Some(1));
        assert_eq!(t.offspring(&w(&[3])), None);
        let gen1: Vec<_> = t.words_at(1).collect();
        assert_eq!(gen1, vec![w(&[1]), w(&[2])]);
        assert_eq!(t.word_at(2, 0), w(&[1, 1]));
    }

    #[test]
    fn csv_round_trip() {
        let t = sample_tree();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# depth=3\nword,offspring_count\n,2\n1,1\n2,0\n1.1,0\n"));
        let back = TreeRecords::read_csv(&buf[..]).unwrap();
        assert_eq!(TruncatedTree::from_records(&back).unwrap(), t);
    }

    #[test]
    fn json_round_trip() {
        let t = sample_tree();
        let s = serde_json::to_string(&t).unwrap();
        let back: TruncatedTree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn builder_matches_records() {
        let mut b = TreeBuilder::new();
        let a = b.add_child(0);
        b.add_child(0);
        b.add_child(a);
        assert_eq!(b.build(3), sample_tree());
    }

    /// Random well-formed trees: offspring counts in 0..=3, at most 60
    /// vertices per generation, depth up to 5.
    pub(crate) fn arb_tree() -> impl Strategy<Value = TruncatedTree> {
        (0usize..=5, proptest::collection::vec(0u32..=3, 256)).prop_map(|(depth, pool)| {
            let mut it = pool.into_iter();
            let mut levels = Vec::new();
            let mut width = 1usize;
            for _ in 0..depth {
                let mut budget = 60u32;
                let level: Vec<u32> = (0..width)
                    .map(|_| {
                        let k = it.next().unwrap_or(0).min(budget);
                        budget -= k;
                        k
                    })
                    .collect();
                width = (60 - budget) as usize;
                levels.push(level);
            }
            TruncatedTree::from_levels(depth, levels).unwrap()
        })
    }

    proptest! {
        #[test]
        fn generation_sizes_match_counts(t in arb_tree()) {
            prop_assert!(t.validate().is_ok());
            for n in 1..=t.depth() {
                let s: usize = t.level(n - 1).iter().map(|&k| k as usize).sum();
                prop_assert_eq!(t.z_count(n).unwrap(), s);
            }
        }

        #[test]
        fn shift_of_cut_is_single_node(t in arb_tree(), pick in 0usize..1000) {
            let n = pick % (t.depth() + 1);
            let width = t.width(n);
            prop_assume!(width > 0);
            let u = t.word_at(n, pick % width);
            let c = t.cut(&u).unwrap();
            prop_assert!(c.validate().is_ok());
            prop_assert_eq!(c.shift(&u).unwrap(), TruncatedTree::single_node(t.depth() - n));
        }

        #[test]
        fn records_round_trip(t in arb_tree()) {
            prop_assert_eq!(TruncatedTree::from_records(&t.to_records()).unwrap(), t);
        }
    }
}
