//! Monte Carlo and exact checks of the size-bias identities:
//!
//! * many-to-one: `E[Σ_{|u|=n} G1(Cut_u T, u) G2(θ_u T)] = m^n E[G1(Cut_{U*|n} T*, U*|n)] E[G2(T)]`,
//! * the measure form: `E[Σ_{|u|=n} G(T|n, u) m^{-n} W_u] = E[G(T*|n, U*|n)]`,
//! * the law of `T*|n` is `(Z_n / m^n) P(T|n ∈ ·)`, by exact enumeration.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::branching::WField;
use crate::error::{Error, Result};
use crate::offspring::{Family, OffspringDistribution};
use crate::parallel;
use crate::sampler::{GwSampler, Purpose, SubtreeDepth};
use crate::stats::{Comparison, Estimate};
use crate::tree::TruncatedTree;
use crate::word::Word;

/// Largest `m^n` for which full trees are materialised (`2.5^10`).
pub const MAX_EXPECTED_GENERATION: f64 = 9536.7431640625;

/// A nonnegative functional `G(T, u)` of a tree and a ray, depending only on
/// `T|n` and `u|n` for its declared depth `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    Constant,
    /// `1{u_1 = index}`.
    FirstStep {
        index: u32,
    },
    /// `1{k_∅(T) = k}`.
    RootOffspring {
        k: u32,
    },
    /// `1{T|n = pattern} 1{u|_{|prefix|} = prefix}`; either part may be absent.
    Cylinder {
        depth: usize,
        pattern: Option<TruncatedTree>,
        prefix: Word,
    },
}

impl FunctionalSpec {
    pub fn depth(&self) -> usize {
        match self {
            FunctionalSpec::Constant => 0,
            FunctionalSpec::FirstStep { .. } | FunctionalSpec::RootOffspring { .. } => 1,
            FunctionalSpec::Cylinder { depth, .. } => *depth,
        }
    }

    pub fn cylinder(pattern: Option<TruncatedTree>, prefix: Word) -> Result<Self> {
        let depth = pattern.as_ref().map(|p| p.depth()).unwrap_or(prefix.len());
        if prefix.len() > depth {
            return Err(Error::Functional(format!(
                "prefix {prefix} is longer than the pattern depth {depth}"
            )));
        }
        Ok(FunctionalSpec::Cylinder { depth, pattern, prefix })
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            FunctionalSpec::Constant => "1".into(),
            FunctionalSpec::FirstStep { index } => format!("1{{u_1 = {index}}}"),
            FunctionalSpec::RootOffspring { k } => format!("1{{k_root = {k}}}"),
            FunctionalSpec::Cylinder { depth, pattern, prefix } => {
                let p = match pattern {
                    Some(t) => format!("T|{depth} = {:?}", t.levels()),
                    None => format!("any T|{depth}"),
                };
                format!("cylinder({p}, u starts with '{prefix}')")
            }
        }
    }

    /// `G(T, u)`; needs `depth(T) >= n` and `|u| >= n`.
    pub fn eval(&self, t: &TruncatedTree, u: &Word) -> Result<f64> {
        let n = self.depth();
        if t.depth() < n || u.len() < n {
            return Err(Error::Functional(format!(
                "{} needs depth {n}, got tree depth {} and |u| = {}",
                self.label(),
                t.depth(),
                u.len()
            )));
        }
        let hit = match self {
            FunctionalSpec::Constant => true,
            FunctionalSpec::FirstStep { index } => u.letters()[0] == *index,
            FunctionalSpec::RootOffspring { k } => t.level(0)[0] == *k,
            FunctionalSpec::Cylinder { depth, pattern, prefix } => {
                prefix.is_ancestor_of(u) && pattern.as_ref().is_none_or(|p| t.truncate(*depth) == *p)
            }
        };
        Ok(if hit { 1.0 } else { 0.0 })
    }
}

/// Both sides of an identity with their comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSided {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub comparison: Comparison,
}

impl TwoSided {
    fn new(lhs: Estimate, rhs: Estimate) -> Self {
        TwoSided {
            comparison: Comparison::new(lhs, rhs),
            lhs,
            rhs,
        }
    }
}

fn check_size(d: &OffspringDistribution, n: usize) -> Result<()> {
    if d.mean().powi(n as i32) > MAX_EXPECTED_GENERATION * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "m^n = {:.1} exceeds the materialisation limit 2.5^10",
            d.mean().powi(n as i32)
        )));
    }
    Ok(())
}

/// Monte Carlo settings shared by the identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub reps: usize,
    pub seed: u64,
    pub cap: u64,
}

/// `E[Σ_{|u|=n} G(T|n, u) m^{-n} Ŵ_u]` against `E[G(T*|n, U*|n)]`, with `n`
/// the depth of `G` (at least 1) and `Ŵ_u` computed `extra` generations below `n`.
pub fn keyformula_mc(d: &OffspringDistribution, g: &FunctionalSpec, extra: usize, mc: McConfig) -> Result<TwoSided> {
    let n = g.depth().max(1);
    check_size(d, n + extra)?;
    let m = d.mean();
    let s = GwSampler::new(d)?.with_cap(mc.cap);
    let lhs = parallel::batched(mc.seed, Purpose::Battery, mc.reps, 64, |rng| {
        let t = s.sample_gw(n + extra, rng)?;
        let f = WField::new(&t, m)?;
        let top = t.truncate(n);
        let mut sum = 0.0;
        for i in 0..t.width(n) {
            let u = t.word_at(n, i);
            let gv = g.eval(&top, &u)?;
            if gv != 0.0 {
                sum += gv * f.value(n, i);
            }
        }
        Ok(sum * m.powi(-(n as i32)))
    })?;
    let rhs = parallel::batched(mc.seed, Purpose::Spines, mc.reps, 64, |rng| {
        let sp = s.sample_spine(n, SubtreeDepth::Horizon(n), rng)?;
        g.eval(&sp.tree()?, sp.spine())
    })?;
    Ok(TwoSided::new(Estimate::from_samples(lhs), Estimate::from_samples(rhs)))
}

/// `E[Σ_{|u|=n} G1(Cut_u T, u) G2(θ_u T)]` against
/// `m^n E[G1(Cut_{U*|n} T*, U*|n)] E[G2(T)]`. Empty sums contribute 0.
pub fn folklore_check(
    d: &OffspringDistribution,
    n: usize,
    g1: &FunctionalSpec,
    g2: &FunctionalSpec,
    mc: McConfig,
) -> Result<TwoSided> {
    if g1.depth() > n {
        return Err(Error::Functional(format!("G1 has depth {} > n = {n}", g1.depth())));
    }
    let n2 = g2.depth();
    check_size(d, n + n2)?;
    let m = d.mean();
    let s = GwSampler::new(d)?.with_cap(mc.cap);
    let lhs = parallel::batched(mc.seed, Purpose::Battery, mc.reps, 64, |rng| {
        let t = s.sample_gw(n + n2, rng)?;
        let mut sum = 0.0;
        for u in t.words_at(n) {
            let a = g1.eval(&t.cut(&u)?, &u)?;
            if a != 0.0 {
                let sub = t.shift(&u).expect("u is in the tree");
                sum += a * g2.eval(&sub, &first_ray(n2))?;
            }
        }
        Ok(sum)
    })?;
    let spine_side = parallel::batched(mc.seed, Purpose::Spines, mc.reps, 64, |rng| {
        if n == 0 {
            return g1.eval(&TruncatedTree::single_node(0), &Word::root());
        }
        let sp = s.sample_spine(n, SubtreeDepth::Horizon(n), rng)?;
        let t = sp.tree()?;
        g1.eval(&t.cut(sp.spine())?, sp.spine())
    })?;
    let gw_side = parallel::batched(mc.seed, Purpose::Auxiliary, mc.reps, 256, |rng| {
        let t = s.sample_gw(n2, rng)?;
        g2.eval(&t, &first_ray(n2))
    })?;
    let rhs = Estimate::from_samples(spine_side)
        .scale(m.powi(n as i32))
        .times(Estimate::from_samples(gw_side));
    Ok(TwoSided::new(Estimate::from_samples(lhs), rhs))
}

/// A word of length `n` used when `G2` ignores the ray (`1.1...1`).
fn first_ray(n: usize) -> Word {
    Word::new(vec![1; n]).expect("ones are positive letters")
}

/// One entry of the identity battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryEntry {
    pub name: String,
    pub identity: String,
    pub result: TwoSided,
    pub z: f64,
    /// `z <= 3`.
    pub pass: bool,
}

/// The built-in functionals checked against the measure form, and
/// `(n, G1, G2)` triples checked against the many-to-one form.
pub fn battery_specs() -> (Vec<FunctionalSpec>, Vec<(usize, FunctionalSpec, FunctionalSpec)>) {
    let w = |l: &[u32]| Word::new(l.to_vec()).expect("positive letters");
    let binary_root = TruncatedTree::from_levels(1, vec![vec![2]]).expect("valid");
    let two_level = TruncatedTree::from_levels(2, vec![vec![2], vec![2, 0]]).expect("valid");
    let key = vec![
        FunctionalSpec::Constant,
        FunctionalSpec::FirstStep { index: 1 },
        FunctionalSpec::RootOffspring { k: 2 },
        FunctionalSpec::Cylinder {
            depth: 1,
            pattern: Some(binary_root),
            prefix: w(&[2]),
        },
        FunctionalSpec::Cylinder {
            depth: 2,
            pattern: None,
            prefix: w(&[1, 2]),
        },
        FunctionalSpec::Cylinder {
            depth: 2,
            pattern: Some(two_level),
            prefix: w(&[1, 1]),
        },
    ];
    let folk = vec![
        (1, FunctionalSpec::Constant, FunctionalSpec::RootOffspring { k: 0 }),
        (2, FunctionalSpec::FirstStep { index: 1 }, FunctionalSpec::Constant),
        (
            2,
            FunctionalSpec::RootOffspring { k: 2 },
            FunctionalSpec::RootOffspring { k: 2 },
        ),
    ];
    (key, folk)
}

/// Runs every built-in functional through both identities.
pub fn battery(d: &OffspringDistribution, extra: usize, mc: McConfig) -> Result<Vec<BatteryEntry>> {
    let (key, folk) = battery_specs();
    let mut out = Vec::new();
    for (i, g) in key.iter().enumerate() {
        let cfg = McConfig {
            seed: mc.seed.wrapping_add(i as u64 * 0x9E37),
            ..mc
        };
        let r = keyformula_mc(d, g, extra, cfg)?;
        out.push(BatteryEntry {
            name: g.label(),
            identity: "measure".into(),
            z: r.comparison.z,
            pass: r.comparison.within(3.0),
            result: r,
        });
    }
    for (i, (n, g1, g2)) in folk.iter().enumerate() {
        let cfg = McConfig {
            seed: mc.seed.wrapping_add((100 + i) as u64 * 0x9E37),
            ..mc
        };
        let r = folklore_check(d, *n, g1, g2, cfg)?;
        out.push(BatteryEntry {
            name: format!("n={n}, G1={}, G2={}", g1.label(), g2.label()),
            identity: "many-to-one".into(),
            z: r.comparison.z,
            pass: r.comparison.within(3.0),
            result: r,
        });
    }
    Ok(out)
}

/// One depth-`n` tree shape with its probabilities under both laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedTree {
    pub tree: TruncatedTree,
    pub gw: f64,
    /// `(Z_n / m^n) P(T|n = tree)`.
    pub reweighted: f64,
    /// `P(T*|n = tree)` from the spine construction.
    pub spine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBiasEnumeration {
    pub n: usize,
    pub trees: Vec<EnumeratedTree>,
    /// Total variation distance, computed in exact rational arithmetic.
    pub tv: f64,
    pub tv_is_zero: bool,
}

/// Largest offspring count accepted by [`sizebias_law_enumerate`].
pub const ENUMERATION_MAX_OFFSPRING: usize = 5;

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite probability")
}

/// Exact law of `T*|n` against the `Z_n/m^n`-reweighted GW law, `n ∈ {1, 2}`.
pub fn sizebias_law_enumerate(d: &OffspringDistribution, n: usize) -> Result<SizeBiasEnumeration> {
    let pmf = match d.family() {
        Family::Finite { pmf } => pmf.clone(),
        Family::Geometric { .. } => {
            return Err(Error::EnumerationTooLarge("geometric support is infinite".into()));
        }
    };
    if !(1..=2).contains(&n) {
        return Err(Error::EnumerationTooLarge(format!(
            "n = {n}; only n ∈ {{1, 2}} is enumerated"
        )));
    }
    if pmf.len() > ENUMERATION_MAX_OFFSPRING + 1 {
        return Err(Error::EnumerationTooLarge(format!(
            "support reaches {} > {ENUMERATION_MAX_OFFSPRING}",
            pmf.len() - 1
        )));
    }
    d.size_biased()?;
    let xi: Vec<BigRational> = pmf.iter().map(|&p| rational(p)).collect();
    let m: BigRational = xi
        .iter()
        .enumerate()
        .map(|(k, p)| p * BigRational::from_integer(BigInt::from(k)))
        .fold(BigRational::zero(), |a, b| a + b);
    let kk = |k: usize| BigRational::from_integer(BigInt::from(k));
    let hat = |k: usize| &xi[k] * kk(k) / &m;
    let support: Vec<usize> = (0..xi.len()).filter(|&k| !xi[k].is_zero()).collect();

    // levels -> (gw, reweighted, spine)
    let mut laws: BTreeMap<Vec<Vec<u32>>, [BigRational; 3]> = BTreeMap::new();
    for &k0 in &support {
        if n == 1 {
            let gw = xi[k0].clone();
            let rw = &gw * kk(k0) / &m;
            laws.insert(vec![vec![k0 as u32]], [gw, rw, hat(k0)]);
            continue;
        }
        // every assignment of child counts to the k0 children
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..k0 {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    support.iter().map(move |&k| {
                        let mut v = c.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        for kids in combos {
            let prod: BigRational = kids.iter().fold(BigRational::one(), |a, &k| a * &xi[k]);
            let gw = &xi[k0] * &prod;
            let z2: usize = kids.iter().sum();
            let rw = &gw * kk(z2) / (&m * &m);
            // spine through child i: (ξ̂(k0)/k0) ξ̂(k_i) Π_{j≠i} ξ(k_j)
            let mut spine = BigRational::zero();
            for (i, &ki) in kids.iter().enumerate() {
                if ki == 0 {
                    continue;
                }
                let others = kids
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .fold(BigRational::one(), |a, (_, &k)| a * &xi[k]);
                spine += hat(k0) / kk(k0) * hat(ki) * others;
            }
            let levels = vec![vec![k0 as u32], kids.iter().map(|&k| k as u32).collect()];
            laws.insert(levels, [gw, rw, spine]);
        }
    }
    let tv: BigRational = laws
        .values()
        .map(|[_, a, b]| (a - b).abs())
        .fold(BigRational::zero(), |a, b| a + b)
        / BigRational::from_integer(BigInt::from(2));
    let to_f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    let trees = laws
        .iter()
        .map(|(levels, [gw, rw, sp])| {
            Ok(EnumeratedTree {
                tree: TruncatedTree::from_levels(n, levels.clone())?,
                gw: to_f(gw),
                reweighted: to_f(rw),
                spine: to_f(sp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SizeBiasEnumeration {
        n,
        trees,
        tv: to_f(&tv),
        tv_is_zero: tv.is_zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::offspring;
    use crate::word::w;

    fn xi_a() -> OffspringDistribution {
        offspring("0:0.25,2:0.75")
    }

    #[test]
    fn functional_evaluation() {
        let t = TruncatedTree::from_levels(2, vec![vec![2], vec![2, 0]]).unwrap();
        assert_eq!(FunctionalSpec::Constant.eval(&t, &Word::root()).unwrap(), 1.0);
        assert_eq!(
            FunctionalSpec::FirstStep { index: 1 }.eval(&t, &w(&[1, 2])).unwrap(),
            1.0
        );
        assert_eq!(
            FunctionalSpec::FirstStep { index: 2 }.eval(&t, &w(&[1, 2])).unwrap(),
            0.0
        );
        assert_eq!(FunctionalSpec::RootOffspring { k: 2 }.eval(&t, &w(&[1])).unwrap(), 1.0);
        let c = FunctionalSpec::cylinder(Some(t.clone()), w(&[1])).unwrap();
        assert_eq!(c.eval(&t, &w(&[1, 1])).unwrap(), 1.0);
        assert_eq!(c.eval(&t, &w(&[2, 1])).unwrap(), 0.0);
        assert!(c.eval(&t.truncate(1), &w(&[1, 1])).is_err());
        assert!(FunctionalSpec::cylinder(None, w(&[1, 1])).unwrap().depth() == 2);
        assert!(FunctionalSpec::cylinder(Some(t.truncate(1)), w(&[1, 1])).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let r = sizebias_law_enumerate(&xi_a(), 1).unwrap();
        assert!(r.tv_is_zero);
        let two = r.trees.iter().find(|e| e.tree.level(0)[0] == 2).unwrap();
        assert_eq!(two.reweighted, 1.0);
        assert_eq!(two.spine, 1.0);
        let dead = r.trees.iter().find(|e| e.tree.level(0)[0] == 0).unwrap();
        assert_eq!(dead.reweighted, 0.0);
        let r2 = sizebias_law_enumerate(&xi_a(), 2).unwrap();
        assert!(r2.tv_is_zero);
        let alive: Vec<_> = r2.trees.iter().filter(|e| e.tree.level(0)[0] == 2).collect();
        assert_eq!(alive.len(), 4);
        let total: f64 = r2.trees.iter().map(|e| e.spine).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let c = sizebias_law_enumerate(&offspring("2:1"), 2).unwrap();
        assert_eq!(c.trees.len(), 1);
        assert_eq!(c.trees[0].tree, TruncatedTree::full(2, 2));
        assert_eq!(c.tv, 0.0);
    }

    #[test]
    fn enumeration_limits() {
        assert!(sizebias_law_enumerate(&offspring("geom:0.6"), 1).is_err());
        assert!(sizebias_law_enumerate(&offspring("0:0.5,6:0.5"), 1).is_err());
        assert!(sizebias_law_enumerate(&xi_a(), 3).is_err());
        assert!(sizebias_law_enumerate(&offspring("0:0.6,1:0.4"), 1).is_err());
    }

    #[test]
    fn size_cap() {
        let d = offspring("3:1");
        let mc = McConfig {
            reps: 1,
            seed: 0,
            cap: u64::MAX,
        };
        assert!(keyformula_mc(&d, &FunctionalSpec::Constant, 10, mc).is_err());
        assert!(folklore_check(&xi_a(), 25, &FunctionalSpec::Constant, &FunctionalSpec::Constant, mc).is_err());
    }

    #[test]
    fn deterministic_law_is_exact() {
        let d = offspring("2:1");
        let mc = McConfig {
            reps: 200,
            seed: 3,
            cap: u64::MAX,
        };
        let r = keyformula_mc(&d, &FunctionalSpec::FirstStep { index: 1 }, 2, mc).unwrap();
        assert_eq!(r.lhs.mean, 0.5);
        let r = folklore_check(&d, 3, &FunctionalSpec::Constant, &FunctionalSpec::Constant, mc).unwrap();
        assert_eq!(r.lhs.mean, 8.0);
        assert_eq!(r.rhs.mean, 8.0);
    }

    #[test]
    fn empty_sums_vanish() {
        // ξ(0) close to 1: most trees die before n and contribute nothing.
        let d = offspring("0:0.95,1:0.05");
        assert!(!d.is_supercritical());
        let s = GwSampler::new(&d).unwrap();
        let mut rng = crate::sampler::RngStream::new(1, 1).rng();
        let mut zero = 0;
        for _ in 0..1000 {
            let t = s.sample_gw(3, &mut rng).unwrap();
            let sum: f64 = t
                .words_at(3)
                .map(|u| FunctionalSpec::Constant.eval(&t.cut(&u).unwrap(), &u).unwrap())
                .sum();
            if t.width(3) == 0 {
                assert_eq!(sum, 0.0);
                zero += 1;
            }
        }
        assert!(zero > 900);
    }
}
