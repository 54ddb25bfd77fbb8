//! The tail functional `F(x) = -ln P(W > x)`, its right-continuous inverse
//! `F^{-1}(y) = inf{x >= 0 : F(x) > y}`, and the doubling diagnostic
//! `sup F^{-1}(2x) / F^{-1}(x)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::{Family, OffspringDistribution};
use crate::parallel;
use crate::sampler::{GwSampler, Purpose};

/// Minimum number of `W` samples accepted by [`EmpiricalTail::new`].
pub const MIN_TAIL_SAMPLES: usize = 100;

/// `F^{-1}(y)` with a flag raised once `y` reaches the top of the finite range
/// of `F`, where the inverse saturates at the largest sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailInverse {
    pub value: f64,
    pub saturated: bool,
}

/// Order statistics of `W` estimates at a recorded truncation depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTail {
    sorted: Vec<f64>,
    depth: usize,
}

impl EmpiricalTail {
    /// Sorts the samples. `depth` is the truncation depth of the `Ŵ` estimates.
    pub fn new(mut samples: Vec<f64>, depth: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples {
                got: 0,
                needed: MIN_TAIL_SAMPLES,
            });
        }
        if let Some(bad) = samples.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain(format!(
                "W sample {bad} is not a finite nonnegative number"
            )));
        }
        if samples.len() < MIN_TAIL_SAMPLES {
            return Err(Error::TooFewSamples {
                got: samples.len(),
                needed: MIN_TAIL_SAMPLES,
            });
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        Ok(EmpiricalTail { sorted: samples, depth })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    /// `Ŝ(x) = #{samples > x} / n`.
    pub fn survival(&self, x: f64) -> f64 {
        let above = self.sorted.len() - self.sorted.partition_point(|&s| s <= x);
        above as f64 / self.sorted.len() as f64
    }

    /// `F̂(x) = -ln Ŝ(x)`, `+inf` from the largest sample on.
    pub fn f(&self, x: f64) -> f64 {
        let s = self.survival(x);
        if s >= 1.0 {
            0.0
        } else {
            -s.ln()
        }
    }

    /// `sup` of the finite values of `F̂`, reached just below the maximum.
    pub fn sup_f(&self) -> f64 {
        let ties = self.sorted.len() - self.sorted.partition_point(|&s| s < self.max());
        (self.sorted.len() as f64 / ties as f64).ln()
    }

    /// `F̂^{-1}(y)`: the least order statistic `x` with `#{samples > x} < n e^{-y}`.
    /// `n e^{-y}` is snapped to a nearby integer first, so that `F̂^{-1}(F̂(x))`
    /// does not depend on the rounding of `exp(ln(·))`.
    pub fn inverse(&self, y: f64) -> Result<TailInverse> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("tail inverse needs y >= 0, got {y}")));
        }
        let n = self.sorted.len();
        let mut t = n as f64 * (-y).exp();
        if (t - t.round()).abs() < 1e-9 * t.max(1.0) {
            t = t.round();
        }
        // largest admissible count above x, then its order statistic
        let above = t.ceil() as i64 - 1;
        let saturated = y >= self.sup_f();
        let value = if above < 0 {
            self.max()
        } else {
            self.sorted[n - 1 - (above as usize).min(n - 1)]
        };
        Ok(TailInverse {
            value: value.max(0.0),
            saturated,
        })
    }
}

/// A tail of `W`: estimated from samples, or known in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    Empirical(EmpiricalTail),
    /// `P(W > x) = (1-q) e^{-(1-q)x}`: the law of `W` for a geometric
    /// offspring law, whose generating function is fractional linear.
    Exponential {
        q: f64,
    },
    /// `W ≡ value` (deterministic offspring).
    Constant {
        value: f64,
    },
}

impl TailModel {
    /// The closed-form tail for a geometric law or a deterministic one.
    pub fn analytic(d: &OffspringDistribution) -> Result<Self> {
        match d.family() {
            // q = (1-c)/c, the root of c q² - q + (1-c) below 1
            Family::Geometric { c } if d.is_supercritical() => Ok(TailModel::Exponential { q: (1.0 - c) / c }),
            Family::Finite { pmf } if pmf.iter().filter(|&&p| p > 0.0).count() == 1 && d.mean() > 1.0 => {
                Ok(TailModel::Constant { value: 1.0 })
            }
            _ => Err(Error::Distribution(format!("no closed-form W law for {}", d.spec()))),
        }
    }

    /// W-truncation depth of the samples behind the tail; `None` for exact laws.
    pub fn depth(&self) -> Option<usize> {
        match self {
            TailModel::Empirical(t) => Some(t.depth()),
            _ => None,
        }
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, TailModel::Empirical(_))
    }

    pub fn survival(&self, x: f64) -> f64 {
        match self {
            TailModel::Empirical(t) => t.survival(x),
            TailModel::Exponential { q } => {
                if x < 0.0 {
                    1.0
                } else {
                    (1.0 - q) * (-(1.0 - q) * x).exp()
                }
            }
            TailModel::Constant { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `F(x) = -ln P(W > x)`.
    pub fn f(&self, x: f64) -> f64 {
        match self {
            TailModel::Exponential { q } if x >= 0.0 => -(1.0 - q).ln() + (1.0 - q) * x,
            TailModel::Empirical(t) => t.f(x),
            _ => {
                let s = self.survival(x);
                if s >= 1.0 {
                    0.0
                } else {
                    -s.ln()
                }
            }
        }
    }

    pub fn inverse(&self, y: f64) -> Result<TailInverse> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("tail inverse needs y >= 0, got {y}")));
        }
        match self {
            TailModel::Empirical(t) => t.inverse(y),
            TailModel::Exponential { q } => Ok(TailInverse {
                value: ((y + (1.0 - q).ln()) / (1.0 - q)).max(0.0),
                saturated: false,
            }),
            TailModel::Constant { value } => Ok(TailInverse {
                value: *value,
                saturated: false,
            }),
        }
    }

    /// `F^{-1}(y)` without the saturation flag.
    pub fn inv(&self, y: f64) -> Result<f64> {
        self.inverse(y).map(|t| t.value)
    }

    /// Rows `x,survival,F,Finv_at_logx`; the last column is blank for `x < 1`.
    pub fn write_csv<W: Write>(&self, xs: &[f64], mut out: W) -> Result<()> {
        writeln!(out, "x,survival,F,Finv_at_logx")?;
        for &x in xs {
            let finv = if x >= 1.0 {
                self.inv(x.ln())?.to_string()
            } else {
                String::new()
            };
            writeln!(out, "{},{},{},{}", x, self.survival(x), self.f(x), finv)?;
        }
        Ok(())
    }
}

impl From<EmpiricalTail> for TailModel {
    fn from(t: EmpiricalTail) -> Self {
        TailModel::Empirical(t)
    }
}

/// `reps` independent `Ŵ = Z_N / m^N` draws from z-chains, in replica order.
pub fn sample_w(d: &OffspringDistribution, depth: usize, reps: usize, seed: u64, cap: u64) -> Result<Vec<f64>> {
    let s = GwSampler::new(d)?.with_cap(cap);
    parallel::batched(seed, Purpose::WSamples, reps, 256, |rng| s.sample_w(depth, rng))
}

/// [`EmpiricalTail`] from `reps` fresh z-chains of the given depth.
pub fn empirical_tail(
    d: &OffspringDistribution,
    depth: usize,
    reps: usize,
    seed: u64,
    cap: u64,
) -> Result<EmpiricalTail> {
    EmpiricalTail::new(sample_w(d, depth, reps, seed, cap)?, depth)
}

/// One grid point of the doubling diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub x: f64,
    pub finv_x: f64,
    pub finv_2x: f64,
    /// `None` when `F^{-1}(x) = 0`.
    pub ratio: Option<f64>,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub rows: Vec<DoublingRow>,
    pub sup_ratio: f64,
    pub argmax: f64,
    /// `a = log2(sup ratio)`, so that `F^{-1}(sx) <= 2^a s^a F^{-1}(x)`.
    pub exponent: f64,
    /// Grid points dropped because `F^{-1}(x) = 0`.
    pub excluded: Vec<f64>,
    pub depth: Option<usize>,
}

/// `sup_{x ∈ grid} F^{-1}(2x) / F^{-1}(x)` with the per-point table.
/// Points where the inverse saturates are kept and flagged.
pub fn doubling_diagnostic(tail: &TailModel, grid: &[f64]) -> Result<DoublingReport> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut excluded = Vec::new();
    let mut sup = f64::NEG_INFINITY;
    let mut argmax = f64::NAN;
    for &x in grid {
        let a = tail.inverse(x)?;
        let b = tail.inverse(2.0 * x)?;
        let ratio = if a.value > 0.0 { Some(b.value / a.value) } else { None };
        match ratio {
            Some(r) if r > sup => {
                sup = r;
                argmax = x;
            }
            None => excluded.push(x),
            _ => {}
        }
        rows.push(DoublingRow {
            x,
            finv_x: a.value,
            finv_2x: b.value,
            ratio,
            saturated: a.saturated || b.saturated,
        });
    }
    if !sup.is_finite() {
        return Err(Error::Domain("no grid point with F^{-1}(x) > 0".into()));
    }
    Ok(DoublingReport {
        rows,
        sup_ratio: sup,
        argmax,
        exponent: sup.log2(),
        excluded,
        depth: tail.depth(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConseqRow {
    pub s: f64,
    pub x: f64,
    /// `2^{-1} s^{1/a} F(x)`.
    pub lhs: f64,
    /// `F(sx)`, possibly `+inf`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `2^{-1} s^{1/a} F(x) <= F(sx)` for every `s` in `s_values` and every
/// grid point `x >= F^{-1}(1)` at which `F(x)` is finite.
pub fn conseq_check(tail: &TailModel, a: f64, s_values: &[f64], x_grid: &[f64]) -> Result<Vec<ConseqRow>> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("exponent {a} must be positive")));
    }
    let x0 = tail.inv(1.0)?;
    let mut rows = Vec::new();
    for &s in s_values {
        for &x in x_grid.iter().filter(|&&x| x >= x0) {
            let fx = tail.f(x);
            if !fx.is_finite() {
                continue;
            }
            let lhs = 0.5 * s.powf(1.0 / a) * fx;
            let rhs = tail.f(s * x);
            rows.push(ConseqRow {
                s,
                x,
                lhs,
                rhs,
                holds: lhs <= rhs,
            });
        }
    }
    Ok(rows)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
