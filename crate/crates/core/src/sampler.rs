//! Seeded random generation of truncated Galton-Watson trees, generation-size
//! chains and size-biased spine trees.
//!
//! Every replica draws from its own [`RngStream`]: a ChaCha8 generator keyed by
//! the experiment seed with the replica's stream id selecting one of the 2^64
//! non-overlapping ChaCha streams. Replicas can therefore run in any order or
//! in parallel and still reproduce bit for bit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::{Family, OffspringDistribution};
use crate::tree::{TreeBuilder, TruncatedTree};
use crate::word::Word;

/// Default cap on the number of vertices a single sample may hold.
pub const DEFAULT_POPULATION_CAP: u64 = 100_000_000;

/// Finite supports with more points than this are sampled with an alias table.
const ALIAS_THRESHOLD: usize = 8;

/// Below this many parents, generation sums are drawn one parent at a time.
const DIRECT_SUM_THRESHOLD: u64 = 32;

/// A reproducible random stream: `(seed, stream)` fully determines the draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

/// Stream-id namespaces so that different stages of one experiment never
/// share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Purpose {
    Trees = 1,
    WSamples = 2,
    Spines = 3,
    Battery = 4,
    Thin = 5,
    Covers = 6,
    Auxiliary = 7,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Stream for replica `index` of a given purpose: the purpose tag goes in
    /// the top 16 bits, the replica index in the low 48.
    pub fn replica(seed: u64, purpose: Purpose, index: u64) -> Self {
        assert!(index < (1u64 << 48), "replica index out of range");
        RngStream {
            seed,
            stream: ((purpose as u64) << 48) | index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

#[derive(Debug, Clone)]
enum Method {
    Scan {
        values: Vec<u32>,
        cdf: Vec<f64>,
    },
    Alias {
        values: Vec<u32>,
        table: WeightedAliasIndex<f64>,
    },
    Geometric(Geometric),
    /// `1 + G1 + G2` with i.i.d. geometric `G`s: the size-biased geometric law.
    ShiftedNegBin(Geometric),
}

/// Draws from a discrete law on the nonnegative integers, one value at a
/// time or as the sum of many i.i.d. values.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    method: Method,
    /// `(value, probability)` pairs with positive probability (finite laws only).
    support: Vec<(u32, f64)>,
    /// Geometric parameter `c` (geometric laws only).
    c: f64,
}

impl DiscreteSampler {
    fn from_table(weights: &[f64]) -> Result<Self> {
        let support: Vec<(u32, f64)> = weights
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k as u32, p))
            .collect();
        if support.is_empty() {
            return Err(Error::Distribution("no positive weights".into()));
        }
        let values: Vec<u32> = support.iter().map(|&(k, _)| k).collect();
        let method = if support.len() > ALIAS_THRESHOLD {
            let table = WeightedAliasIndex::new(support.iter().map(|&(_, p)| p).collect())
                .map_err(|e| Error::Distribution(format!("alias table: {e}")))?;
            Method::Alias { values, table }
        } else {
            let total: f64 = support.iter().map(|&(_, p)| p).sum();
            let mut acc = 0.0;
            let cdf = support
                .iter()
                .map(|&(_, p)| {
                    acc += p / total;
                    acc
                })
                .collect();
            Method::Scan { values, cdf }
        };
        Ok(DiscreteSampler {
            method,
            support,
            c: 0.0,
        })
    }

    /// Sampler for `ξ`.
    pub fn offspring(d: &OffspringDistribution) -> Result<Self> {
        match d.family() {
            Family::Finite { pmf } => Self::from_table(pmf),
            Family::Geometric { c } => Ok(DiscreteSampler {
                method: Method::Geometric(geometric(*c)?),
                support: Vec::new(),
                c: *c,
            }),
        }
    }

    /// Sampler for `ξ̂(k) = k ξ(k) / m`.
    pub fn size_biased(d: &OffspringDistribution) -> Result<Self> {
        let sb = d.size_biased()?;
        match d.family() {
            Family::Finite { pmf } => {
                let w: Vec<f64> = (0..pmf.len()).map(|k| sb.pmf(k)).collect();
                Self::from_table(&w)
            }
            Family::Geometric { c } => Ok(DiscreteSampler {
                method: Method::ShiftedNegBin(geometric(*c)?),
                support: Vec::new(),
                c: *c,
            }),
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.method {
            Method::Scan { values, cdf } => {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
                values[i]
            }
            Method::Alias { values, table } => values[table.sample(rng)],
            Method::Geometric(g) => clamp_u32(g.sample(rng)),
            Method::ShiftedNegBin(g) => clamp_u32(1 + g.sample(rng) + g.sample(rng)),
        }
    }

    /// Sum of `n` i.i.d. draws. Large `n` is handled through the exact law of
    /// the sum (multinomial counts for finite support, negative binomial via
    /// the gamma-Poisson mixture for the geometric family).
    pub fn draw_sum<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        if n < DIRECT_SUM_THRESHOLD {
            return (0..n).map(|_| self.draw(rng) as u64).sum();
        }
        match &self.method {
            Method::Scan { .. } | Method::Alias { .. } => {
                let mut remaining = n;
                let mut mass_left = 1.0f64;
                let mut total = 0u64;
                let last = self.support.len() - 1;
                for (i, &(k, p)) in self.support.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let count = if i == last {
                        remaining
                    } else {
                        let pp = (p / mass_left).clamp(0.0, 1.0);
                        Binomial::new(remaining, pp)
                            .expect("probability clamped to [0,1]")
                            .sample(rng)
                    };
                    total += k as u64 * count;
                    remaining -= count;
                    mass_left -= p;
                }
                total
            }
            Method::Geometric(_) => {
                let scale = self.c / (1.0 - self.c);
                let lambda = Gamma::new(n as f64, scale)
                    .expect("positive shape and scale")
                    .sample(rng);
                poisson(lambda, rng)
            }
            Method::ShiftedNegBin(_) => {
                let scale = self.c / (1.0 - self.c);
                let lambda = Gamma::new(2.0 * n as f64, scale)
                    .expect("positive shape and scale")
                    .sample(rng);
                n + poisson(lambda, rng)
            }
        }
    }
}

fn geometric(c: f64) -> Result<Geometric> {
    Geometric::new(1.0 - c).map_err(|e| Error::Distribution(format!("geometric: {e}")))
}

fn clamp_u32(x: u64) -> u32 {
    x.min(u32::MAX as u64) as u32
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda)
        .expect("lambda within the supported range")
        .sample(rng) as u64
}

/// `(I*, k*)`: spine child index and spine offspring count at one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpineStep {
    pub index: u32,
    pub offspring: u32,
}

/// How deep the GW subtrees grafted on a spine are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "depth", rename_all = "snake_case")]
pub enum SubtreeDepth {
    /// Every graft gets the same relative depth.
    Common(usize),
    /// A graft at generation `n` is sampled down to absolute generation `H`,
    /// i.e. to relative depth `H - n`.
    Horizon(usize),
}

impl SubtreeDepth {
    /// Relative depth of a graft rooted at generation `n`.
    pub fn at_generation(&self, n: usize) -> usize {
        match *self {
            SubtreeDepth::Common(d) => d,
            SubtreeDepth::Horizon(h) => h.saturating_sub(n),
        }
    }
}

/// A vertex grafted on the spine together with its GW subtree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graft {
    pub word: Word,
    pub subtree: TruncatedTree,
}

/// A truncated size-biased tree: a spine of length `N`, its per-level
/// `(I*_n, k*_n)` records and the GW subtrees grafted at the off-spine
/// children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineTree {
    depth: usize,
    spine: Word,
    steps: Vec<SpineStep>,
    /// `grafts[n-1]`: grafts rooted at generation `n`, in word order.
    grafts: Vec<Vec<Graft>>,
    subtree_depth: SubtreeDepth,
}

impl SpineTree {
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `U*|N`.
    pub fn spine(&self) -> &Word {
        &self.spine
    }

    pub fn steps(&self) -> &[SpineStep] {
        &self.steps
    }

    pub fn subtree_depth(&self) -> SubtreeDepth {
        self.subtree_depth
    }

    /// Grafts rooted at generation `n ∈ [1, N]`.
    pub fn grafts_at(&self, n: usize) -> &[Graft] {
        &self.grafts[n - 1]
    }

    pub fn grafts(&self) -> impl Iterator<Item = &Graft> {
        self.grafts.iter().flatten()
    }

    /// The tree `T*|h` as an ordinary truncated tree, `h <= N`. Each graft at
    /// generation `n` must have been sampled to relative depth at least `h - n`.
    pub fn materialize(&self, h: usize) -> Result<TruncatedTree> {
        if h > self.depth {
            return Err(Error::BeyondTruncation {
                requested: h,
                depth: self.depth,
            });
        }
        let mut b = TreeBuilder::new();
        let mut spine_node = 0usize;
        for n in 1..=h {
            let step = self.steps[n - 1];
            let mut grafts = self.grafts[n - 1].iter();
            let mut next_spine = 0usize;
            for j in 1..=step.offspring {
                if j == step.index {
                    next_spine = b.add_child(spine_node);
                } else {
                    let g = grafts.next().expect("one graft per off-spine child");
                    if g.subtree.depth() < h - n {
                        return Err(Error::TruncationMismatch(format!(
                            "graft {} sampled to depth {}, needs {}",
                            g.word,
                            g.subtree.depth(),
                            h - n
                        )));
                    }
                    b.graft(spine_node, &g.subtree, h - n);
                }
            }
            spine_node = next_spine;
        }
        Ok(b.build(h))
    }

    /// `T*|N`.
    pub fn tree(&self) -> Result<TruncatedTree> {
        self.materialize(self.depth)
    }
}

/// Samplers for one offspring law, with a population cap.
#[derive(Debug, Clone)]
pub struct GwSampler {
    dist: OffspringDistribution,
    offspring: DiscreteSampler,
    size_biased: Option<DiscreteSampler>,
    cap: u64,
}

impl GwSampler {
    pub fn new(dist: &OffspringDistribution) -> Result<Self> {
        let size_biased = if dist.is_supercritical() {
            Some(DiscreteSampler::size_biased(dist)?)
        } else {
            None
        };
        Ok(GwSampler {
            dist: dist.clone(),
            offspring: DiscreteSampler::offspring(dist)?,
            size_biased,
            cap: DEFAULT_POPULATION_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn distribution(&self) -> &OffspringDistribution {
        &self.dist
    }

    pub fn offspring_sampler(&self) -> &DiscreteSampler {
        &self.offspring
    }

    fn check_cap(&self, nodes: u64) -> Result<()> {
        if nodes > self.cap {
            Err(Error::PopulationCap { nodes, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// A GW(ξ) tree truncated at `depth`; offspring counts are drawn in
    /// breadth-first order.
    pub fn sample_gw<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Result<TruncatedTree> {
        let mut levels = Vec::with_capacity(depth);
        let mut width = 1u64;
        let mut total = 1u64;
        for _ in 0..depth {
            let level: Vec<u32> = (0..width).map(|_| self.offspring.draw(rng)).collect();
            width = level.iter().map(|&k| k as u64).sum();
            total += width;
            self.check_cap(total)?;
            levels.push(level);
        }
        TruncatedTree::from_levels(depth, levels)
    }

    /// `(Z_0, ..., Z_N)` without materialising the tree.
    pub fn sample_z_chain<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Result<Vec<u64>> {
        let mut z = Vec::with_capacity(depth + 1);
        z.push(1u64);
        let mut total = 1u64;
        for n in 0..depth {
            let next = self.offspring.draw_sum(z[n], rng);
            total = total.saturating_add(next);
            self.check_cap(total)?;
            z.push(next);
        }
        Ok(z)
    }

    /// `Z_N / m^N` from a fresh z-chain.
    pub fn sample_w<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Result<f64> {
        Ok(self.sample_z_final(depth, rng)? as f64 / self.dist.mean().powi(depth as i32))
    }

    /// `Z_N` alone; same law and cap as [`GwSampler::sample_z_chain`].
    pub fn sample_z_final<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Result<u64> {
        let mut z = 1u64;
        let mut total = 1u64;
        for _ in 0..depth {
            if z == 0 {
                break;
            }
            z = self.offspring.draw_sum(z, rng);
            total = total.saturating_add(z);
            self.check_cap(total)?;
        }
        Ok(z)
    }

    fn size_biased_sampler(&self) -> Result<&DiscreteSampler> {
        self.size_biased
            .as_ref()
            .ok_or(Error::NotSupercritical { mean: self.dist.mean() })
    }

    /// `(I*, k*) ~ ρ`: `k*` from `ξ̂`, then `I*` uniform on `1..=k*`.
    pub fn sample_rho<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SpineStep> {
        let offspring = self.size_biased_sampler()?.draw(rng);
        let index = rng.random_range(1..=offspring);
        Ok(SpineStep { index, offspring })
    }

    /// A size-biased tree with spine length `depth` and grafted subtrees of the
    /// requested depth.
    pub fn sample_spine<R: Rng + ?Sized>(
        &self,
        depth: usize,
        subtree_depth: SubtreeDepth,
        rng: &mut R,
    ) -> Result<SpineTree> {
        if depth == 0 {
            return Err(Error::Domain("spine length must be at least 1".into()));
        }
        let mut spine = Word::root();
        let mut steps = Vec::with_capacity(depth);
        let mut grafts = Vec::with_capacity(depth);
        let mut total = 1u64;
        for n in 1..=depth {
            let step = self.sample_rho(rng)?;
            let parent = spine.clone();
            let d = subtree_depth.at_generation(n);
            let mut level = Vec::with_capacity(step.offspring as usize - 1);
            for j in 1..=step.offspring {
                if j == step.index {
                    continue;
                }
                let subtree = self.sample_gw(d, rng)?;
                total += subtree.node_count() as u64;
                self.check_cap(total)?;
                level.push(Graft {
                    word: parent.child(j),
                    subtree,
                });
            }
            total += 1;
            spine = parent.child(step.index);
            steps.push(step);
            grafts.push(level);
        }
        Ok(SpineTree {
            depth,
            spine,
            steps,
            grafts,
            subtree_depth,
        })
    }
}

/// Free-function form: one GW tree from a stream.
pub fn sample_gw(d: &OffspringDistribution, depth: usize, stream: RngStream) -> Result<TruncatedTree> {
    GwSampler::new(d)?.sample_gw(depth, &mut stream.rng())
}

/// Free-function form: one generation-size chain from a stream.
pub fn sample_z_chain(d: &OffspringDistribution, depth: usize, stream: RngStream) -> Result<Vec<u64>> {
    GwSampler::new(d)?.sample_z_chain(depth, &mut stream.rng())
}

/// Free-function form: one spine tree from a stream.
pub fn sample_spine(
    d: &OffspringDistribution,
    depth: usize,
    subtree_depth: usize,
    stream: RngStream,
) -> Result<SpineTree> {
    GwSampler::new(d)?.sample_spine(depth, SubtreeDepth::Common(subtree_depth), &mut stream.rng())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::offspring;

    fn xi_a() -> OffspringDistribution {
        offspring("0:0.25,2:0.75")
    }

    #[test]
    fn reproducible_streams() {
        let s = GwSampler::new(&xi_a()).unwrap();
        let a = s.sample_gw(8, &mut RngStream::new(11, 3).rng()).unwrap();
        let b = s.sample_gw(8, &mut RngStream::new(11, 3).rng()).unwrap();
        assert_eq!(a, b);
        let draws = |st: RngStream| -> Vec<u64> {
            let mut r = st.rng();
            (0..64).map(|_| r.random::<u64>()).collect()
        };
        assert_ne!(draws(RngStream::new(11, 3)), draws(RngStream::new(11, 4)));
        assert_ne!(
            draws(RngStream::replica(1, Purpose::Trees, 0)),
            draws(RngStream::replica(1, Purpose::Spines, 0))
        );
    }

    #[test]
    fn deterministic_binary() {
        let s = GwSampler::new(&offspring("2:1")).unwrap();
        let mut rng = RngStream::new(0, 0).rng();
        let t = s.sample_gw(7, &mut rng).unwrap();
        assert_eq!(t, TruncatedTree::full(2, 7));
        let unbounded = s.clone().with_cap(u64::MAX);
        assert_eq!(unbounded.sample_z_chain(40, &mut rng).unwrap()[40], 1u64 << 40);
        let sp = s.sample_spine(5, SubtreeDepth::Common(3), &mut rng).unwrap();
        for n in 1..=5 {
            assert_eq!(sp.grafts_at(n).len(), 1);
            assert_eq!(sp.grafts_at(n)[0].subtree, TruncatedTree::full(2, 3));
        }
    }

    #[test]
    fn population_cap_aborts() {
        let s = GwSampler::new(&offspring("2:1")).unwrap().with_cap(1000);
        let mut rng = RngStream::new(0, 0).rng();
        assert!(matches!(s.sample_gw(12, &mut rng), Err(Error::PopulationCap { .. })));
        assert!(matches!(
            s.sample_z_chain(12, &mut rng),
            Err(Error::PopulationCap { .. })
        ));
        assert!(s.sample_gw(8, &mut rng).is_ok());
    }

    #[test]
    fn spine_invariants_and_materialisation() {
        let g = OffspringDistribution::geometric(2.0 / 3.0).unwrap();
        let s = GwSampler::new(&g).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..200 {
            let sp = s.sample_spine(6, SubtreeDepth::Horizon(6), &mut rng).unwrap();
            let t = sp.tree().unwrap();
            assert!(t.validate().is_ok());
            for n in 0..=6 {
                assert!(t.contains(&sp.spine().restrict(n)));
            }
            for (n, step) in sp.steps().iter().enumerate() {
                assert!(step.index >= 1 && step.index <= step.offspring);
                assert_eq!(sp.spine().restrict(n + 1), sp.spine().restrict(n).child(step.index));
                assert_eq!(t.offspring(&sp.spine().restrict(n)), Some(step.offspring));
            }
            for gr in sp.grafts() {
                assert!(gr.subtree.validate().is_ok());
                assert_eq!(t.shift(&gr.word).unwrap(), gr.subtree.truncate(6 - gr.word.len()));
            }
        }
    }

    #[test]
    fn materialise_rejects_shallow_grafts() {
        let s = GwSampler::new(&xi_a()).unwrap();
        let sp = s
            .sample_spine(5, SubtreeDepth::Common(1), &mut RngStream::new(1, 1).rng())
            .unwrap();
        assert!(matches!(sp.tree(), Err(Error::TruncationMismatch(_))));
        assert!(sp.materialize(2).is_ok());
    }

    #[test]
    fn subcritical_has_no_spine() {
        let s = GwSampler::new(&offspring("0:0.5,2:0.5")).unwrap();
        let mut rng = RngStream::new(0, 0).rng();
        assert!(s.sample_spine(3, SubtreeDepth::Common(1), &mut rng).is_err());
        assert!(s.sample_gw(3, &mut rng).is_ok());
    }

    #[test]
    fn alias_path_for_wide_support() {
        let pmf = vec![0.1; 10];
        let d = OffspringDistribution::finite(pmf).unwrap();
        let s = DiscreteSampler::offspring(&d).unwrap();
        assert!(matches!(s.method, Method::Alias { .. }));
        let small = DiscreteSampler::offspring(&xi_a()).unwrap();
        assert!(matches!(small.method, Method::Scan { .. }));
    }
}
