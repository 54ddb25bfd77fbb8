//! Offspring laws: pmf, mean, generating function, extinction probability,
//! and the size-biased law with its repartition distribution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for the extinction fixed-point iteration.
pub const EXTINCTION_TOL: f64 = 1e-12;
/// Iteration cap for the extinction fixed-point iteration.
pub const EXTINCTION_MAX_ITER: usize = 1_000_000;

/// Supported families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Explicit table, `pmf[k] = ξ(k)`.
    Finite { pmf: Vec<f64> },
    /// `ξ(k) = (1-c) c^k`, `k >= 0`.
    Geometric { c: f64 },
}

/// Outcome of checking `m ∈ (1, ∞)` and `Σ k log k ξ(k) < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HypStatus {
    Holds,
    /// The law is usable (e.g. for subcritical sanity checks) but not supercritical.
    Fails {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringDistribution {
    family: Family,
    mean: f64,
    second_moment: f64,
    spec: String,
    hyp: HypStatus,
}

fn spec_error(position: usize, token: &str, message: impl Into<String>) -> Error {
    Error::OffspringSpec {
        position,
        token: token.to_string(),
        message: message.into(),
    }
}

impl OffspringDistribution {
    /// Finite-support law from a pmf table indexed by `k`. Entries must be
    /// nonnegative and sum to 1 within `1e-9`; the table is renormalised.
    pub fn finite(pmf: Vec<f64>) -> Result<Self> {
        let spec = pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, p)| format!("{k}:{p}"))
            .collect::<Vec<_>>()
            .join(",");
        Self::finite_with_spec(pmf, spec)
    }

    fn finite_with_spec(mut pmf: Vec<f64>, spec: String) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::Distribution("empty pmf".into()));
        }
        if let Some((k, p)) = pmf.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Distribution(format!("ξ({k}) = {p} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Distribution(format!("pmf sums to {total}, not 1")));
        }
        for p in pmf.iter_mut() {
            *p /= total;
        }
        while pmf.len() > 1 && *pmf.last().unwrap() == 0.0 {
            pmf.pop();
        }
        let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let second_moment = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        Ok(Self::assemble(Family::Finite { pmf }, mean, second_moment, spec))
    }

    /// Geometric law `ξ(k) = (1-c) c^k` with `c ∈ (0, 1)`.
    pub fn geometric(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Distribution(format!("geometric parameter {c} not in (0,1)")));
        }
        let mean = c / (1.0 - c);
        let variance = c / ((1.0 - c) * (1.0 - c));
        Ok(Self::assemble(
            Family::Geometric { c },
            mean,
            variance + mean * mean,
            format!("geom:{c}"),
        ))
    }

    fn assemble(family: Family, mean: f64, second_moment: f64, spec: String) -> Self {
        // Finite support and geometric tails make Σ k log k ξ(k) finite, so only m matters.
        let hyp = if mean > 1.0 && mean.is_finite() {
            HypStatus::Holds
        } else {
            HypStatus::Fails {
                reason: format!("mean {mean} is not in (1, inf)"),
            }
        };
        OffspringDistribution {
            family,
            mean,
            second_moment,
            spec,
            hyp,
        }
    }

    /// Parses `"k1:p1,k2:p2,..."` or `"geom:c"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let trimmed = spec.trim();
        if trimmed.is_empty() {
            return Err(spec_error(0, "", "empty offspring spec"));
        }
        if let Some(rest) = trimmed.strip_prefix("geom:") {
            let c: f64 = rest
                .trim()
                .parse()
                .map_err(|_| spec_error(5, rest, "geometric parameter is not a number"))?;
            if !(c > 0.0 && c < 1.0) {
                return Err(spec_error(5, rest, "geometric parameter must lie in (0,1)"));
            }
            return Self::geometric(c);
        }
        let mut pmf: Vec<f64> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut offset = 0usize;
        for token in trimmed.split(',') {
            let pos = offset;
            offset += token.len() + 1;
            let (k, p) = token
                .split_once(':')
                .ok_or_else(|| spec_error(pos, token, "expected `k:p`"))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| spec_error(pos, token, "offspring count must be a nonnegative integer"))?;
            if k > 10_000 {
                return Err(spec_error(pos, token, "offspring count above 10000"));
            }
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| spec_error(pos, token, "probability is not a number"))?;
            if !(p >= 0.0) || !p.is_finite() {
                return Err(spec_error(pos, token, "negative or non-finite probability"));
            }
            if !seen.insert(k) {
                return Err(spec_error(pos, token, "duplicate offspring count"));
            }
            if pmf.len() <= k {
                pmf.resize(k + 1, 0.0);
            }
            pmf[k] = p;
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(spec_error(
                0,
                trimmed,
                format!("probabilities sum to {total}, not 1 (tolerance 1e-9)"),
            ));
        }
        Self::finite_with_spec(pmf, trimmed.to_string())
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn hyp(&self) -> &HypStatus {
        &self.hyp
    }

    pub fn is_supercritical(&self) -> bool {
        self.hyp == HypStatus::Holds
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `E[k²]`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Largest `k` with `ξ(k) > 0`, or `None` for unbounded support.
    pub fn max_offspring(&self) -> Option<usize> {
        match &self.family {
            Family::Finite { pmf } => Some(pmf.len() - 1),
            Family::Geometric { .. } => None,
        }
    }

    /// `ξ(k)`.
    pub fn pmf(&self, k: usize) -> f64 {
        match &self.family {
            Family::Finite { pmf } => pmf.get(k).copied().unwrap_or(0.0),
            Family::Geometric { c } => (1.0 - c) * c.powi(k as i32),
        }
    }

    /// Generating function `f(r) = Σ ξ(k) r^k` on `[0, 1]`.
    pub fn pgf(&self, r: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("pgf argument {r} outside [0,1]")));
        }
        Ok(self.pgf_unchecked(r))
    }

    fn pgf_unchecked(&self, r: f64) -> f64 {
        match &self.family {
            Family::Finite { pmf } => pmf.iter().rev().fold(0.0, |acc, &p| acc * r + p),
            Family::Geometric { c } => (1.0 - c) / (1.0 - c * r),
        }
    }

    /// Smallest fixed point of `f` on `[0, 1]`, by monotone iteration from 0.
    pub fn extinction_prob(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance {tol} must be positive")));
        }
        let mut q = 0.0f64;
        for _ in 0..EXTINCTION_MAX_ITER {
            let next = self.pgf_unchecked(q);
            if (next - q).abs() < tol {
                return Ok(next);
            }
            q = next;
        }
        Ok(q)
    }

    /// `q` at the default tolerance.
    pub fn q(&self) -> f64 {
        self.extinction_prob(EXTINCTION_TOL)
            .expect("default tolerance is positive")
    }

    /// `E[W²] = (E[k²] - m) / (m² - m)`, from squaring the projective identity.
    pub fn w_second_moment(&self) -> Result<f64> {
        self.require_supercritical()?;
        let m = self.mean;
        Ok((self.second_moment - m) / (m * m - m))
    }

    /// Mean number of grafts per spine level, `E[ξ̂] - 1 = E[k²]/m - 1`.
    pub fn mean_grafts_per_level(&self) -> Result<f64> {
        self.require_supercritical()?;
        Ok(self.second_moment / self.mean - 1.0)
    }

    fn require_supercritical(&self) -> Result<()> {
        if self.is_supercritical() {
            Ok(())
        } else {
            Err(Error::NotSupercritical { mean: self.mean })
        }
    }

    /// The size-biased law `ξ̂(k) = k ξ(k) / m`.
    pub fn size_biased(&self) -> Result<SizeBiasedLaw> {
        self.require_supercritical()?;
        Ok(SizeBiasedLaw { base: self.clone() })
    }
}

impl FromStr for OffspringDistribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OffspringDistribution::parse(s)
    }
}

impl fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

/// Shorthand: `parse` that panics, for fixed literals in tests and benches.
pub fn offspring(spec: &str) -> OffspringDistribution {
    OffspringDistribution::parse(spec).expect("valid offspring spec")
}

/// `ξ̂` together with the repartition law `ρ(k, ℓ) = 1{k ≤ ℓ} ξ(ℓ) / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasedLaw {
    base: OffspringDistribution,
}

impl SizeBiasedLaw {
    pub fn base(&self) -> &OffspringDistribution {
        &self.base
    }

    pub fn pmf(&self, k: usize) -> f64 {
        k as f64 * self.base.pmf(k) / self.base.mean
    }

    /// `ρ(k, ℓ)` for the spine child index `k` and spine offspring count `ℓ`.
    pub fn rho(&self, k: usize, l: usize) -> f64 {
        if k >= 1 && k <= l {
            self.base.pmf(l) / self.base.mean
        } else {
            0.0
        }
    }

    /// `E[ξ̂] = E[k²] / m`.
    pub fn mean(&self) -> f64 {
        self.base.second_moment / self.base.mean
    }
}
