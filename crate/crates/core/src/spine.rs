//! Quantities along the distinguished ray of a size-biased tree.
//!
//! For a spine of length `N`, `Y_n` is the sum of the `Ŵ` values of the
//! subtrees grafted at generation `n` and `X_n = Σ_{p>=0} m^{-p} Y_{p+n}`,
//! truncated at the horizon `N`. Ball masses along the spine are
//! `M(B(U*, r)) = m^{-n(r)-1} X_{n(r)+1}`; the density ratios
//! `R_n = m^{-n} X_n / g(e^{-n})` estimate the a.s. constant of the upper
//! density of the branching measure.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::branching::WField;
use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::offspring::OffspringDistribution;
use crate::parallel;
use crate::sampler::{GwSampler, Purpose, SpineTree, SubtreeDepth};
use crate::stats::{self, Comparison, Estimate};
use crate::tail::{EmpiricalTail, TailModel};
use crate::word::Word;

/// Per-generation sequences along one spine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTrace {
    m: f64,
    subtree_depth: SubtreeDepth,
    /// `y[n-1] = Y_n`, `n = 1..=N`.
    y: Vec<f64>,
    /// `x[n-1] = Σ_{p=0}^{N-n} m^{-p} Y_{p+n}`.
    x: Vec<f64>,
    /// Mean of `Y` used in the tail bound: `E[ξ̂] - 1` when known.
    y_bar: f64,
    y_bar_is_estimate: bool,
}

impl DensityTrace {
    /// Builds `X` from `Y` by the backward recursion `X_n = Y_n + X_{n+1}/m`.
    ///
    /// `y_bar` is the mean of `Y` entering the tail bound; pass `None` to use
    /// the empirical mean of this trace (flagged as an estimate).
    pub fn from_y(y: Vec<f64>, m: f64, subtree_depth: SubtreeDepth, y_bar: Option<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Domain("a trace needs N >= 1".into()));
        }
        if !(m > 1.0) {
            return Err(Error::NotSupercritical { mean: m });
        }
        let mut x = vec![0.0; y.len()];
        let mut acc = 0.0;
        for n in (0..y.len()).rev() {
            acc = y[n] + acc / m;
            x[n] = acc;
        }
        let (y_bar, y_bar_is_estimate) = match y_bar {
            Some(v) => (v, false),
            None => (y.iter().sum::<f64>() / y.len() as f64, true),
        };
        Ok(DensityTrace {
            m,
            subtree_depth,
            y,
            x,
            y_bar,
            y_bar_is_estimate,
        })
    }

    /// Spine length `N`.
    pub fn depth(&self) -> usize {
        self.y.len()
    }

    pub fn mean(&self) -> f64 {
        self.m
    }

    pub fn subtree_depth(&self) -> SubtreeDepth {
        self.subtree_depth
    }

    /// `Y_n`, `1 <= n <= N`.
    pub fn y(&self, n: usize) -> f64 {
        self.y[n - 1]
    }

    /// Truncated `X_n`, `1 <= n <= N`.
    pub fn x(&self, n: usize) -> f64 {
        self.x[n - 1]
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    /// Empirical mean of `Y_1..Y_N` on this trace.
    pub fn y_mean_empirical(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    pub fn y_bar(&self) -> (f64, bool) {
        (self.y_bar, self.y_bar_is_estimate)
    }

    /// Estimate of the omitted terms `Σ_{p > N-n} m^{-p} Y_{p+n}`:
    /// `m^{-(N-n+1)} Ȳ m/(m-1)`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        let k = (self.depth() - n + 1) as i32;
        self.m.powi(-k) * self.y_bar * self.m / (self.m - 1.0)
    }

    /// `R_n = m^{-n} X_n / g(e^{-n})` for `n = 2..=N` (index `n-2`); `None`
    /// where the gauge vanishes or is undefined.
    pub fn ratios(&self, g: &Gauge) -> Vec<Option<f64>> {
        (2..=self.depth())
            .map(|n| match scaled_gauge(g, self.m, n) {
                Some(d) if d > 0.0 => Some(self.x(n) / d),
                _ => None,
            })
            .collect()
    }

    /// Rows `n,Y,X,tail_bound,R`; `R` is blank at `n = 1` and where undefined.
    pub fn write_csv<W: Write>(&self, g: &Gauge, mut out: W) -> Result<()> {
        writeln!(out, "n,Y,X,tail_bound,R")?;
        let r = self.ratios(g);
        for n in 1..=self.depth() {
            let rn = if n >= 2 {
                r[n - 2].map(|v| v.to_string()).unwrap_or_default()
            } else {
                String::new()
            };
            writeln!(out, "{},{},{},{},{}", n, self.y(n), self.x(n), self.tail_bound(n), rn)?;
        }
        Ok(())
    }
}

/// `m^n g(e^{-n})`; for the Hawkes gauge this is `F^{-1}(ln n)` directly.
fn scaled_gauge(g: &Gauge, m: f64, n: usize) -> Option<f64> {
    match g {
        Gauge::Hawkes { tail, .. } if n >= 2 => tail.inv((n as f64).ln()).ok(),
        Gauge::Hawkes { .. } => None,
        Gauge::Power { .. } => g.at_generation(n).ok().map(|v| v * m.powi(n as i32)),
    }
}

/// `Gr(T*, U*|n-1)`: the off-spine children of the spine vertex at generation
/// `n-1`; there are `k*_n - 1` of them.
pub fn graft_set(s: &SpineTree, n: usize) -> Result<Vec<Word>> {
    if n == 0 || n > s.depth() {
        return Err(Error::Domain(format!(
            "graft generation {n} outside [1, {}]",
            s.depth()
        )));
    }
    Ok(s.grafts_at(n).iter().map(|g| g.word.clone()).collect())
}

/// `Ŵ` fields of every grafted subtree, keyed by the grafted vertex.
pub fn graft_wfields(s: &SpineTree, m: f64) -> Result<BTreeMap<Word, WField>> {
    s.grafts()
        .map(|g| Ok((g.word.clone(), WField::new(&g.subtree, m)?)))
        .collect()
}

/// `Y` and `X` from a materialised spine tree and the `Ŵ` fields of its
/// grafts. Each field must have the relative depth the spine's truncation
/// policy prescribes for its generation.
pub fn xy_sequences(s: &SpineTree, fields: &BTreeMap<Word, WField>, d: &OffspringDistribution) -> Result<DensityTrace> {
    let m = d.mean();
    let policy = s.subtree_depth();
    let mut y = Vec::with_capacity(s.depth());
    for n in 1..=s.depth() {
        let mut sum = 0.0;
        for g in s.grafts_at(n) {
            let f = fields
                .get(&g.word)
                .ok_or_else(|| Error::MissingWField(g.word.clone()))?;
            if f.depth() != policy.at_generation(n) {
                return Err(Error::TruncationMismatch(format!(
                    "W field of {} has depth {}, the spine prescribes {}",
                    g.word,
                    f.depth(),
                    policy.at_generation(n)
                )));
            }
            sum += f.root();
        }
        y.push(sum);
    }
    DensityTrace::from_y(y, m, policy, Some(d.mean_grafts_per_level()?))
}

/// A trace drawn without materialising the spine tree: per level, `k*` from
/// `ξ̂` and one z-chain per graft.
pub fn sample_trace<R: Rng + ?Sized>(
    s: &GwSampler,
    depth: usize,
    subtree_depth: SubtreeDepth,
    rng: &mut R,
) -> Result<DensityTrace> {
    let d = s.distribution();
    let mut y = Vec::with_capacity(depth);
    for n in 1..=depth {
        let step = s.sample_rho(rng)?;
        let rel = subtree_depth.at_generation(n);
        let mut sum = 0.0;
        for _ in 1..step.offspring {
            sum += s.sample_w(rel, rng)?;
        }
        y.push(sum);
    }
    DensityTrace::from_y(y, d.mean(), subtree_depth, Some(d.mean_grafts_per_level()?))
}

/// `reps` independent traces, one stream per replica.
pub fn sample_traces(
    d: &OffspringDistribution,
    depth: usize,
    subtree_depth: SubtreeDepth,
    reps: usize,
    seed: u64,
    cap: u64,
) -> Result<Vec<DensityTrace>> {
    let s = GwSampler::new(d)?.with_cap(cap);
    parallel::batched(seed, Purpose::Spines, reps, 16, |rng| {
        sample_trace(&s, depth, subtree_depth, rng)
    })
}

/// `M(B(U*, e^{-n}))` with its share of the horizon tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMass {
    pub n: usize,
    pub radius: f64,
    /// `m^{-n-2} X_{n+2}`, since `n(e^{-n}) = n + 1`.
    pub mass: f64,
    pub tail_bound: f64,
}

/// Ray masses for `n = 0..=N-2`.
pub fn ray_ball_masses(trace: &DensityTrace) -> Vec<RayMass> {
    (0..=trace.depth().saturating_sub(2))
        .filter(|&n| n + 2 <= trace.depth())
        .map(|n| ray_ball_mass(trace, n).expect("within horizon"))
        .collect()
}

/// The ray mass at radius `e^{-n}`; needs `X_{n+2}`, so `n <= N - 2`.
pub fn ray_ball_mass(trace: &DensityTrace, n: usize) -> Result<RayMass> {
    if n + 2 > trace.depth() {
        return Err(Error::BeyondTruncation {
            requested: n + 2,
            depth: trace.depth(),
        });
    }
    let scale = trace.mean().powi(-((n + 2) as i32));
    Ok(RayMass {
        n,
        radius: (-(n as f64)).exp(),
        mass: scale * trace.x(n + 2),
        tail_bound: scale * trace.tail_bound(n + 2),
    })
}

/// Window of generations over which `max R_n` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioWindow {
    pub lo: usize,
    pub hi: usize,
}

impl RatioWindow {
    /// `[⌈N/2⌉, N]`, clipped below at 2.
    pub fn upper_half(depth: usize) -> Self {
        RatioWindow {
            lo: depth.div_ceil(2).max(2),
            hi: depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicWindow {
    pub lo: usize,
    pub hi: usize,
    /// Median over replicas of `max_{lo <= n <= hi} R_n`.
    pub median_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub depth: usize,
    pub window: RatioWindow,
    /// Per replica `max_{n ∈ window} R_n`.
    pub window_max: Vec<f64>,
    pub mean: f64,
    /// Quantiles at 5, 25, 50, 75, 95 %.
    pub quantiles: [f64; 5],
    /// `κ̂`: the cross-replica median of the windowed maxima.
    pub kappa_hat: f64,
    pub dyadic: Vec<DyadicWindow>,
    /// Generations skipped because `g(e^{-n})` is zero or undefined.
    pub skipped: Vec<usize>,
    pub tail_depth: Option<usize>,
}

/// Windowed maxima of the density ratios across replicas and `κ̂`.
pub fn density_ratios(traces: &[DensityTrace], g: &Gauge, window: Option<RatioWindow>) -> Result<RatioReport> {
    let depth = traces
        .first()
        .ok_or(Error::TooFewSamples { got: 0, needed: 1 })?
        .depth();
    if traces.iter().any(|t| t.depth() != depth) {
        return Err(Error::TruncationMismatch("traces of different lengths".into()));
    }
    let m = traces[0].mean();
    let window = window.unwrap_or_else(|| RatioWindow::upper_half(depth));
    if window.lo < 2 || window.hi > depth || window.lo > window.hi {
        return Err(Error::Domain(format!(
            "window [{}, {}] outside [2, {depth}]",
            window.lo, window.hi
        )));
    }
    let denom: Vec<Option<f64>> = (0..=depth)
        .map(|n| {
            if n < 2 {
                None
            } else {
                scaled_gauge(g, m, n).filter(|&v| v > 0.0)
            }
        })
        .collect();
    let skipped: Vec<usize> = (2..=depth).filter(|&n| denom[n].is_none()).collect();
    let window_max_of = |t: &DensityTrace, lo: usize, hi: usize| -> f64 {
        (lo..=hi)
            .filter_map(|n| denom[n].map(|d| t.x(n) / d))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let window_max: Vec<f64> = traces.iter().map(|t| window_max_of(t, window.lo, window.hi)).collect();
    if window_max.iter().any(|v| !v.is_finite()) {
        return Err(Error::GaugeUndefined {
            generation: window.lo,
            reason: "gauge vanishes on the whole window".into(),
        });
    }
    let mut sorted = window_max.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95].map(|p| stats::quantile_sorted(&sorted, p));
    let mut dyadic = Vec::new();
    let mut lo = 2usize;
    while lo <= depth {
        let hi = (2 * lo - 1).min(depth);
        let maxima: Vec<f64> = traces.iter().map(|t| window_max_of(t, lo, hi)).collect();
        if maxima.iter().all(|v| v.is_finite()) {
            dyadic.push(DyadicWindow {
                lo,
                hi,
                median_max: stats::median(&maxima),
            });
        }
        lo *= 2;
    }
    Ok(RatioReport {
        depth,
        window,
        mean: window_max.iter().sum::<f64>() / window_max.len() as f64,
        quantiles,
        kappa_hat: quantiles[2],
        window_max,
        dyadic,
        skipped,
        tail_depth: g.tail().and_then(|t| t.depth()),
    })
}

/// Whether `C1` comes from the moment fixed point or from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    Oracle,
    Estimated,
}

/// `C0 = 1 - ξ̂(1)` and `C1 = √E[W²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c0: f64,
    pub c1: f64,
    pub c1_source: ConstantSource,
}

impl BoundConstants {
    /// `C1` from `E[W²] = (E[k²] - m)/(m² - m)`.
    pub fn oracle(d: &OffspringDistribution) -> Result<Self> {
        Ok(BoundConstants {
            c0: 1.0 - d.size_biased()?.pmf(1),
            c1: d.w_second_moment()?.sqrt(),
            c1_source: ConstantSource::Oracle,
        })
    }

    /// `C1` from the mean square of the tail's samples.
    pub fn estimated(d: &OffspringDistribution, tail: &EmpiricalTail) -> Result<Self> {
        let s = tail.samples();
        let ew2 = s.iter().map(|w| w * w).sum::<f64>() / s.len() as f64;
        Ok(BoundConstants {
            c0: 1.0 - d.size_biased()?.pmf(1),
            c1: ew2.sqrt(),
            c1_source: ConstantSource::Estimated,
        })
    }
}

/// `X̃_1 = m Ŵ_N(T*) = X_1 + m^{1-N}`: the truncated `X_1` of a horizon-`N`
/// trace completed by the spine vertex itself, whose law is exactly
/// `P(X̃_1 ∈ ·) = E[Ŵ_N; m Ŵ_N ∈ ·]`.
pub fn completed_x1(trace: &DensityTrace) -> Result<f64> {
    match trace.subtree_depth() {
        SubtreeDepth::Horizon(h) if h == trace.depth() => Ok(trace.x(1) + trace.mean().powi(1 - trace.depth() as i32)),
        other => Err(Error::TruncationMismatch(format!(
            "completed X_1 needs horizon {} grafts, trace has {other:?}",
            trace.depth()
        ))),
    }
}

/// `reps` draws of [`completed_x1`] at horizon `depth`.
pub fn sample_x1(d: &OffspringDistribution, depth: usize, reps: usize, seed: u64, cap: u64) -> Result<Vec<f64>> {
    let s = GwSampler::new(d)?.with_cap(cap);
    parallel::batched(seed, Purpose::Spines, reps, 64, |rng| {
        completed_x1(&sample_trace(&s, depth, SubtreeDepth::Horizon(depth), rng)?)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub x: f64,
    /// `P̂(X_1 > x)`.
    pub p_x1: Estimate,
    /// `C0 e^{-F̂(x)} = C0 Ŝ(x)`.
    pub ok_bound: Estimate,
    pub ok_holds: bool,
    /// `P̂(X_1 > m x)`.
    pub p_x1_mx: Estimate,
    /// `E[Ŵ 1{Ŵ > x}]`.
    pub tail_mass: Estimate,
    pub equality_z: f64,
    pub equality_holds: bool,
    /// `C1 e^{-F̂(x)/2}`.
    pub rough_bound: Estimate,
    pub rough_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constants: BoundConstants,
    pub depth: usize,
    pub x1_samples: usize,
    pub w_samples: usize,
    pub sigmas: f64,
    pub rows: Vec<BoundRow>,
    pub ok_bound_holds: bool,
    pub equality_holds: bool,
    pub rough_bound_holds: bool,
}

impl BoundReport {
    pub fn all_hold(&self) -> bool {
        self.ok_bound_holds && self.equality_holds && self.rough_bound_holds
    }
}

/// 20 evenly spaced points on `[0, F̂^{-1}(ln 100)]`, where `Ŝ >= 1%`.
pub fn default_bound_grid(tail: &EmpiricalTail) -> Result<Vec<f64>> {
    let hi = tail.inverse(100f64.ln())?.value;
    Ok(crate::tail::linspace(0.0, hi, 20))
}

/// Compares `P(X_1 > x)` with `C0 e^{-F(x)}` (lower bound), and
/// `P(X_1 > m x)` with `E[W 1{W > x}]` (equality) and `C1 e^{-F(x)/2}`
/// (upper bound). `x1` must be [`completed_x1`] draws at the tail's depth.
pub fn bound_check(
    d: &OffspringDistribution,
    tail: &EmpiricalTail,
    x1: &[f64],
    x1_depth: usize,
    constants: BoundConstants,
    grid: &[f64],
    sigmas: f64,
) -> Result<BoundReport> {
    if x1_depth != tail.depth() {
        return Err(Error::TruncationMismatch(format!(
            "X_1 draws at horizon {x1_depth}, W samples at depth {}",
            tail.depth()
        )));
    }
    if x1.is_empty() {
        return Err(Error::TooFewSamples { got: 0, needed: 1 });
    }
    let m = d.mean();
    let nx = x1.len();
    let ws = tail.samples();
    let nw = ws.len();
    let mut rows = Vec::with_capacity(grid.len());
    for &x in grid {
        let p_x1 = Estimate::proportion(x1.iter().filter(|&&v| v > x).count(), nx);
        let s = Estimate::proportion(ws.iter().filter(|&&w| w > x).count(), nw);
        let ok_bound = s.scale(constants.c0);
        let ok_holds = p_x1.mean >= ok_bound.mean - sigmas * p_x1.stderr.hypot(ok_bound.stderr);
        let p_x1_mx = Estimate::proportion(x1.iter().filter(|&&v| v > m * x).count(), nx);
        let tail_mass = Estimate::from_samples(ws.iter().map(|&w| if w > x { w } else { 0.0 }));
        let cmp = Comparison::new(p_x1_mx, tail_mass);
        let rough_bound = Estimate {
            mean: constants.c1 * s.mean.sqrt(),
            stderr: if s.mean > 0.0 {
                constants.c1 * s.stderr / (2.0 * s.mean.sqrt())
            } else {
                0.0
            },
            n: nw,
        };
        let rough_holds = p_x1_mx.mean <= rough_bound.mean + sigmas * p_x1_mx.stderr.hypot(rough_bound.stderr);
        rows.push(BoundRow {
            x,
            p_x1,
            ok_bound,
            ok_holds,
            p_x1_mx,
            tail_mass,
            equality_z: cmp.z,
            equality_holds: cmp.within(sigmas),
            rough_bound,
            rough_holds,
        });
    }
    Ok(BoundReport {
        constants,
        depth: tail.depth(),
        x1_samples: nx,
        w_samples: nw,
        sigmas,
        ok_bound_holds: rows.iter().all(|r| r.ok_holds),
        equality_holds: rows.iter().all(|r| r.equality_holds),
        rough_bound_holds: rows.iter().all(|r| r.rough_holds),
        rows,
    })
}

/// Parameters of the thin-ray counting identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinRayConfig {
    pub n0: usize,
    /// Generation `N` of the counted vertices.
    pub depth: usize,
    /// `Ŵ` values are computed at horizon `N + extra`.
    pub extra: usize,
    pub reps: usize,
    pub seed: u64,
    pub cap: u64,
}

/// Largest `N` for which the direct side materialises trees.
pub const THIN_RAY_MAX_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub n: usize,
    /// `P̂(Y_{n+1} < F̂^{-1}(½ ln n))`.
    pub p_below: Estimate,
    /// `1 - C0 n^{-1/2}`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinRayReport {
    pub config: ThinRayConfig,
    pub horizon: usize,
    pub tail_depth: Option<usize>,
    /// `thresholds[n - n0] = m^{-1} F̂^{-1}(½ ln n)`.
    pub thresholds: Vec<f64>,
    /// `g(e^{-N})`.
    pub gauge_at_n: f64,
    /// `F̂^{-1}(ln N)`.
    pub finv_ln_n: f64,
    /// `E[g(e^{-N}) #J_{n0,N}]` on GW trees.
    pub lhs: Estimate,
    /// `F̂^{-1}(ln N) P(∀n: X*_n < threshold_n)` along spines.
    pub rhs: Estimate,
    pub comparison: Comparison,
    /// Some threshold is 0, so `J` is empty and both sides vanish.
    pub vacuous: bool,
    pub levels: Vec<LevelCheck>,
}

/// Both sides of `E[g(e^{-N}) #J_{n0,N}] = F^{-1}(ln N) P(∀ n ∈ [n0,N]: X*_n < m^{-1} F^{-1}(½ ln n))`.
///
/// `J_{n0,N}` collects the generation-`N` vertices `v` with
/// `Ŵ_{v|n} < m^{-1} F̂^{-1}(½ ln n)` for all `n ∈ [n0, N]`. All `Ŵ` are
/// computed at horizon `H = N + extra` on both sides, which keeps the identity
/// exact at finite depth: `X*_n = m^{-(N-n)} W' + Σ_{p=n+1}^{N} m^{-(p-n)} Y_p`
/// with grafts at generation `p` observed to relative depth `H - p` and `W'`
/// to depth `H - N`.
pub fn thin_ray_identity(d: &OffspringDistribution, tail: &TailModel, cfg: ThinRayConfig) -> Result<ThinRayReport> {
    let (n0, big_n) = (cfg.n0, cfg.depth);
    if !(2 <= n0 && n0 < big_n && big_n <= THIN_RAY_MAX_DEPTH) {
        return Err(Error::Domain(format!(
            "thin-ray identity needs 2 <= n0 < N <= {THIN_RAY_MAX_DEPTH}, got n0={n0}, N={big_n}"
        )));
    }
    let m = d.mean();
    let h = big_n + cfg.extra;
    let g = Gauge::hawkes(m, tail.clone())?;
    let thresholds = (n0..=big_n)
        .map(|n| Ok(tail.inv(0.5 * (n as f64).ln())? / m))
        .collect::<Result<Vec<f64>>>()?;
    let gauge_at_n = g.at_generation(big_n)?;
    let finv_ln_n = tail.inv((big_n as f64).ln())?;
    let vacuous = thresholds.iter().any(|&t| t <= 0.0);
    let s = GwSampler::new(d)?.with_cap(cfg.cap);

    let counts = parallel::batched(cfg.seed, Purpose::Thin, cfg.reps, 64, |rng| {
        let t = s.sample_gw(h, rng)?;
        let f = WField::new(&t, m)?;
        // ok[i]: the ancestors of vertex i of the current generation pass
        let mut ok = vec![true];
        for n in 0..big_n {
            let mut next = Vec::with_capacity(t.width(n + 1));
            for (i, &pass) in ok.iter().enumerate() {
                for j in t.children(n, i) {
                    let g1 = n + 1;
                    let below = g1 < n0 || f.value(g1, j) < thresholds[g1 - n0];
                    next.push(pass && below);
                }
            }
            ok = next;
        }
        Ok(ok.iter().filter(|&&b| b).count() as f64)
    })?;
    let lhs = Estimate::from_samples(counts.iter().map(|&c| c * gauge_at_n));

    let hits = parallel::batched(cfg.seed, Purpose::Spines, cfg.reps, 64, |rng| {
        // Y_p for p = n0+1..=N; levels above n0 do not enter X*_n for n >= n0.
        let mut y = vec![0.0; big_n + 1];
        for (p, yp) in y.iter_mut().enumerate().skip(n0 + 1) {
            let step = s.sample_rho(rng)?;
            for _ in 1..step.offspring {
                *yp += s.sample_w(h - p, rng)?;
            }
        }
        let mut xs = s.sample_w(h - big_n, rng)?;
        let mut inside = xs < thresholds[big_n - n0];
        for n in (n0..big_n).rev() {
            xs = (xs + y[n + 1]) / m;
            inside &= xs < thresholds[n - n0];
        }
        Ok(inside)
    })?;
    let k = hits.iter().filter(|&&b| b).count();
    let rhs = Estimate::proportion(k, cfg.reps).scale(finv_ln_n);

    let c0 = 1.0 - d.size_biased()?.pmf(1);
    let levels = level_checks(&s, tail, c0, n0, big_n, h, cfg)?;

    Ok(ThinRayReport {
        config: cfg,
        horizon: h,
        tail_depth: tail.depth(),
        thresholds,
        gauge_at_n,
        finv_ln_n,
        comparison: Comparison::new(lhs, rhs),
        lhs,
        rhs,
        vacuous,
        levels,
    })
}

/// `P(Y_{n+1} < F̂^{-1}(½ ln n)) <= 1 - C0 n^{-1/2}` on fresh `Y` draws at the
/// tail's own depth (or the horizon, for exact tails).
fn level_checks(
    s: &GwSampler,
    tail: &TailModel,
    c0: f64,
    n0: usize,
    big_n: usize,
    h: usize,
    cfg: ThinRayConfig,
) -> Result<Vec<LevelCheck>> {
    let depth = tail.depth().unwrap_or(h);
    let ys = parallel::batched(cfg.seed, Purpose::Auxiliary, cfg.reps, 256, |rng| {
        let step = s.sample_rho(rng)?;
        let mut y = 0.0;
        for _ in 1..step.offspring {
            y += s.sample_w(depth, rng)?;
        }
        Ok(y)
    })?;
    (n0..big_n)
        .map(|n| {
            let thr = tail.inv(0.5 * (n as f64).ln())?;
            let p_below = Estimate::proportion(ys.iter().filter(|&&y| y < thr).count(), ys.len());
            let bound = 1.0 - c0 / (n as f64).sqrt();
            Ok(LevelCheck {
                n,
                p_below,
                bound,
                holds: p_below.mean <= bound + 3.0 * p_below.stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::offspring;
    use crate::sampler::RngStream;
    use crate::tree::TruncatedTree;

    fn binary_trace(n: usize) -> DensityTrace {
        let s = GwSampler::new(&offspring("2:1")).unwrap();
        let policy = if n <= 20 {
            SubtreeDepth::Horizon(n)
        } else {
            SubtreeDepth::Common(8)
        };
        sample_trace(&s, n, policy, &mut RngStream::new(0, 0).rng()).unwrap()
    }

    #[test]
    fn binary_closed_forms() {
        let t = binary_trace(10);
        for n in 1..=10 {
            assert_eq!(t.y(n), 1.0);
            assert_eq!(t.x(n), 2.0 - 2f64.powi(-((10 - n) as i32)));
        }
        assert!((t.x(1) - 1.998046875).abs() < 1e-15);
        for rm in ray_ball_masses(&t) {
            let exact = 2f64.powi(-(rm.n as i32) - 1);
            assert!(rm.mass <= exact && exact - rm.mass <= rm.tail_bound);
        }
        assert!(ray_ball_mass(&t, 9).is_err());
    }

    #[test]
    fn trace_invariants() {
        let d = offspring("geom:0.6666666666666666");
        let s = GwSampler::new(&d).unwrap();
        let mut rng = RngStream::new(5, 1).rng();
        for _ in 0..50 {
            let t = sample_trace(&s, 20, SubtreeDepth::Common(6), &mut rng).unwrap();
            for n in 1..=20 {
                assert!(t.y(n) >= 0.0);
                assert!(t.x(n) >= t.y(n));
                if n < 20 {
                    assert!(t.x(n) >= t.y(n + 1) / d.mean());
                }
            }
        }
    }

    #[test]
    fn materialised_and_fast_paths_agree_structurally() {
        let d = offspring("0:0.25,2:0.75");
        let s = GwSampler::new(&d).unwrap();
        let sp = s
            .sample_spine(6, SubtreeDepth::Common(4), &mut RngStream::new(2, 2).rng())
            .unwrap();
        let fields = graft_wfields(&sp, d.mean()).unwrap();
        let t = xy_sequences(&sp, &fields, &d).unwrap();
        for n in 1..=6 {
            assert_eq!(graft_set(&sp, n).unwrap().len(), 1);
            let w = fields[&sp.grafts_at(n)[0].word].root();
            assert_eq!(t.y(n), w);
        }
        assert!(graft_set(&sp, 0).is_err());
        assert!(graft_set(&sp, 7).is_err());
        let mut missing = fields.clone();
        missing.remove(&sp.grafts_at(3)[0].word);
        assert!(matches!(xy_sequences(&sp, &missing, &d), Err(Error::MissingWField(_))));
        let mut wrong = fields.clone();
        let key = sp.grafts_at(2)[0].word.clone();
        wrong.insert(key, WField::new(&TruncatedTree::full(2, 3), 1.5).unwrap());
        assert!(matches!(
            xy_sequences(&sp, &wrong, &d),
            Err(Error::TruncationMismatch(_))
        ));
    }

    #[test]
    fn binary_kappa_is_two() {
        let traces: Vec<DensityTrace> = (0..3).map(|_| binary_trace(128)).collect();
        let g = Gauge::hawkes(2.0, TailModel::Constant { value: 1.0 }).unwrap();
        let r = density_ratios(&traces, &g, None).unwrap();
        assert_eq!(r.kappa_hat, 2.0);
        assert_eq!(r.window, RatioWindow { lo: 64, hi: 128 });
        assert!(r.skipped.is_empty());
    }

    #[test]
    fn zero_gauge_points_are_skipped() {
        // F(0) = 1 for this tail, so F^{-1}(ln 2) = 0 and n = 2 drops out.
        let tail = TailModel::Exponential {
            q: 1.0 - (-1.0f64).exp(),
        };
        let g = Gauge::hawkes(1.5, tail).unwrap();
        let t = DensityTrace::from_y(vec![1.0; 10], 1.5, SubtreeDepth::Common(3), None).unwrap();
        let r = density_ratios(&[t], &g, Some(RatioWindow { lo: 2, hi: 10 })).unwrap();
        assert_eq!(r.skipped, vec![2]);
    }

    #[test]
    fn bound_constants() {
        let a = BoundConstants::oracle(&offspring("0:0.25,2:0.75")).unwrap();
        assert_eq!(a.c0, 1.0);
        assert!((a.c1 - 2f64.sqrt()).abs() < 1e-12);
        let g = BoundConstants::oracle(&offspring("geom:0.6666666666666666")).unwrap();
        assert!((g.c0 - 8.0 / 9.0).abs() < 1e-12);
        assert!((g.c1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn completed_x1_requires_matching_horizon() {
        let t = DensityTrace::from_y(vec![1.0; 4], 2.0, SubtreeDepth::Common(4), None).unwrap();
        assert!(completed_x1(&t).is_err());
        assert_eq!(completed_x1(&binary_trace(4)).unwrap(), 2.0);
    }

    #[test]
    fn thin_ray_binary_is_empty() {
        let d = offspring("2:1");
        let cfg = ThinRayConfig {
            n0: 2,
            depth: 6,
            extra: 2,
            reps: 50,
            seed: 1,
            cap: 1_000_000,
        };
        let r = thin_ray_identity(&d, &TailModel::Constant { value: 1.0 }, cfg).unwrap();
        assert_eq!(r.lhs.mean, 0.0);
        assert_eq!(r.rhs.mean, 0.0);
        assert!(r.thresholds.iter().all(|&t| t == 0.5));
        let bad = ThinRayConfig { n0: 1, ..cfg };
        assert!(thin_ray_identity(&d, &TailModel::Constant { value: 1.0 }, bad).is_err());
        let deep = ThinRayConfig { depth: 13, ..cfg };
        assert!(thin_ray_identity(&d, &TailModel::Constant { value: 1.0 }, deep).is_err());
    }

    #[test]
    fn trace_csv() {
        let t = binary_trace(3);
        let mut buf = Vec::new();
        t.write_csv(&Gauge::binary(), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "n,Y,X,tail_bound,R");
        assert_eq!(s.lines().nth(1).unwrap(), "1,1,1.75,0.25,");
    }
}
