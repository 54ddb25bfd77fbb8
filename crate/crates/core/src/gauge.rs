//! Gauge functions for ball covers of the boundary.
//!
//! The Hawkes gauge is `g(r) = r^{ln m} F^{-1}(ln ln 1/r)` on `(0, e^{-1})`.
//! At the ball scales `r = e^{-n}` it is evaluated as `m^{-n} F^{-1}(ln n)`,
//! which avoids the round trip through `exp`/`ln`. Power gauges
//! `g(r) = scale · r^{ln base}` are also provided; they are defined at every
//! scale, including the root ball.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tail::TailModel;

/// A gauge value at a ball scale, with the tail's saturation flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeValue {
    pub value: f64,
    /// The tail inverse hit the largest sample.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    Hawkes {
        m: f64,
        tail: TailModel,
    },
    /// `g(r) = scale · r^{ln base}`, so `g(e^{-n}) = scale · base^{-n}`.
    Power {
        scale: f64,
        base: f64,
    },
}

impl Gauge {
    pub fn hawkes(m: f64, tail: TailModel) -> Result<Self> {
        if !(m > 1.0 && m.is_finite()) {
            return Err(Error::NotSupercritical { mean: m });
        }
        Ok(Gauge::Hawkes { m, tail })
    }

    pub fn power(scale: f64, base: f64) -> Result<Self> {
        if !(scale > 0.0 && base > 0.0 && scale.is_finite() && base.is_finite()) {
            return Err(Error::Domain(format!(
                "power gauge needs positive scale and base, got {scale}, {base}"
            )));
        }
        Ok(Gauge::Power { scale, base })
    }

    /// `g(r) = r^{ln 2}`, the exact gauge of the full binary tree.
    pub fn binary() -> Self {
        Gauge::Power { scale: 1.0, base: 2.0 }
    }

    /// `g(r) = r`.
    pub fn identity() -> Self {
        Gauge::Power {
            scale: 1.0,
            base: std::f64::consts::E,
        }
    }

    pub fn tail(&self) -> Option<&TailModel> {
        match self {
            Gauge::Hawkes { tail, .. } => Some(tail),
            Gauge::Power { .. } => None,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Gauge::Hawkes { m, .. } => Some(*m),
            Gauge::Power { .. } => None,
        }
    }

    /// Smallest generation `n` at which `g(e^{-n})` is defined.
    pub fn min_generation(&self) -> usize {
        match self {
            Gauge::Hawkes { .. } => 2,
            Gauge::Power { .. } => 0,
        }
    }

    /// `g(r)` from the defining formula.
    pub fn eval(&self, r: f64) -> Result<f64> {
        match self {
            Gauge::Hawkes { m, tail } => {
                if !(r > 0.0 && r < (-1.0f64).exp()) {
                    return Err(Error::Domain(format!("gauge argument {r} outside (0, 1/e)")));
                }
                let y = (-r.ln()).ln();
                Ok(r.powf(m.ln()) * tail.inv(y.max(0.0))?)
            }
            Gauge::Power { scale, base } => {
                if !(r > 0.0) {
                    return Err(Error::Domain(format!("gauge argument {r} must be positive")));
                }
                Ok(scale * r.powf(base.ln()))
            }
        }
    }

    /// `g(e^{-n})` with the saturation flag.
    pub fn at_generation_detail(&self, n: usize) -> Result<GaugeValue> {
        match self {
            Gauge::Hawkes { m, tail } => {
                if n < 2 {
                    return Err(Error::GaugeUndefined {
                        generation: n,
                        reason: "the Hawkes gauge is defined on (0, 1/e), i.e. n >= 2".into(),
                    });
                }
                let inv = tail.inverse((n as f64).ln())?;
                Ok(GaugeValue {
                    value: m.powi(-(n as i32)) * inv.value,
                    saturated: inv.saturated,
                })
            }
            Gauge::Power { scale, base } => Ok(GaugeValue {
                value: scale * base.powi(-(n as i32)),
                saturated: false,
            }),
        }
    }

    /// `g(e^{-n})`.
    pub fn at_generation(&self, n: usize) -> Result<f64> {
        self.at_generation_detail(n).map(|v| v.value)
    }

    /// `g(e^{-n})` for `n = 0..=depth`, `None` where undefined.
    pub fn table(&self, depth: usize) -> Vec<Option<f64>> {
        (0..=depth).map(|n| self.at_generation(n).ok()).collect()
    }

    /// Rows `r,g` on a log-spaced grid of `points` radii in `[r_min, r_max]`.
    pub fn write_csv<W: Write>(&self, r_min: f64, r_max: f64, points: usize, mut out: W) -> Result<()> {
        writeln!(out, "r,g")?;
        let (a, b) = (r_min.ln(), r_max.ln());
        for i in 0..points {
            let t = if points > 1 {
                i as f64 / (points - 1) as f64
            } else {
                0.0
            };
            let r = (a + t * (b - a)).exp();
            writeln!(out, "{},{}", r, self.eval(r)?)?;
        }
        Ok(())
    }
}

/// Grid radii (sorted increasing) at which `g` decreases; empty when `g` is
/// nondecreasing on the grid.
pub fn monotonicity_violations(g: &Gauge, radii: &[f64]) -> Result<Vec<f64>> {
    let mut r: Vec<f64> = radii.to_vec();
    r.sort_by(|a, b| a.total_cmp(b));
    let vals = r.iter().map(|&x| g.eval(x)).collect::<Result<Vec<_>>>()?;
    Ok(r.windows(2)
        .zip(vals.windows(2))
        .filter(|(_, v)| v[1] < v[0])
        .map(|(x, _)| x[1])
        .collect())
}
