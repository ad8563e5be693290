use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How `γ_τ` is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscountRule {
    /// `γ_τ = numerator / (offset + τ)`
    Harmonic { numerator: f64, offset: f64 },
    /// `γ_τ = scale · (τ + 1)^(−exponent)`, `0 < exponent ≤ 1`
    Power { exponent: f64, scale: f64 },
    /// A finite, non-increasing list of positive values.
    Explicit(Vec<f64>),
}

/// Positive, non-increasing discount factors, optionally capped.
///
/// Harmonic and power families with exponent at most one are non-summable,
/// so they satisfy the standing assumption on discounts analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSequence {
    rule: DiscountRule,
    cap: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDiscount(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl DiscountSequence {
    pub fn harmonic(numerator: f64, offset: f64) -> Result<Self> {
        positive("harmonic numerator", numerator)?;
        positive("harmonic offset", offset)?;
        Ok(DiscountSequence {
            rule: DiscountRule::Harmonic { numerator, offset },
            cap: None,
        })
    }

    pub fn power(exponent: f64, scale: f64) -> Result<Self> {
        positive("power scale", scale)?;
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::InvalidDiscount(format!(
                "power exponent must lie in (0, 1], got {exponent}"
            )));
        }
        Ok(DiscountSequence {
            rule: DiscountRule::Power { exponent, scale },
            cap: None,
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDiscount("explicit list is empty".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            positive(&format!("gamma_{i}"), v)?;
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidDiscount(format!(
                "explicit list increases at index {}",
                i + 1
            )));
        }
        Ok(DiscountSequence {
            rule: DiscountRule::Explicit(values),
            cap: None,
        })
    }

    /// Clamps every factor at `cap`. Capping keeps the sequence positive and
    /// non-increasing.
    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        positive("cap", cap)?;
        self.cap = Some(self.cap.map_or(cap, |c| c.min(cap)));
        Ok(self)
    }

    pub fn rule(&self) -> &DiscountRule {
        &self.rule
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    /// Number of available factors, if finite.
    pub fn len_limit(&self) -> Option<usize> {
        match &self.rule {
            DiscountRule::Explicit(v) => Some(v.len()),
            _ => None,
        }
    }

    /// `γ_τ`, or `None` past the end of an explicit list.
    pub fn gamma(&self, tau: usize) -> Option<f64> {
        let raw = match &self.rule {
            DiscountRule::Harmonic { numerator, offset } => numerator / (offset + tau as f64),
            DiscountRule::Power { exponent, scale } => scale * (tau as f64 + 1.0).powf(-exponent),
            DiscountRule::Explicit(v) => *v.get(tau)?,
        };
        Some(self.cap.map_or(raw, |c| raw.min(c)))
    }

    /// `γ_0, …, γ_{len−1}`.
    pub fn prefix(&self, len: usize) -> Result<Vec<f64>> {
        (0..len)
            .map(|tau| {
                self.gamma(tau).ok_or_else(|| {
                    Error::InvalidDiscount(format!("explicit list has no factor for tau = {tau}"))
                })
            })
            .collect()
    }

    /// Largest factor of the sequence, `γ_0`.
    pub fn max_value(&self) -> f64 {
        self.gamma(0).expect("sequences are non-empty")
    }
}

impl fmt::Display for DiscountSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            DiscountRule::Harmonic { numerator, offset } => write!(f, "{numerator}/{offset}")?,
            DiscountRule::Power { exponent, scale } if *scale == 1.0 => {
                write!(f, "pow:{exponent}")?
            }
            DiscountRule::Power { exponent, scale } => write!(f, "pow:{exponent}:{scale}")?,
            DiscountRule::Explicit(v) => write!(f, "explicit[{}]", v.len())?,
        }
        if let Some(c) = self.cap {
            write!(f, " (cap {c})")?;
        }
        Ok(())
    }
}

/// Parses `a/b` (harmonic `a/(b+τ)`), `pow:p` or `pow:p:scale`.
impl FromStr for DiscountSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidDiscount(format!("cannot parse rate {s:?}: {what}"));
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad("expected a number"))
        };
        if let Some(rest) = s.strip_prefix("pow:") {
            let mut parts = rest.split(':');
            let exponent = num(parts.next().unwrap_or(""))?;
            let scale = parts.next().map(num).transpose()?.unwrap_or(1.0);
            if parts.next().is_some() {
                return Err(bad("too many fields"));
            }
            return DiscountSequence::power(exponent, scale);
        }
        let (a, b) = s
            .split_once('/')
            .ok_or_else(|| bad("expected a/b or pow:p"))?;
        DiscountSequence::harmonic(num(a)?, num(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountDiagnosticRow {
    pub t: usize,
    /// `Σ_{τ≤t} γ_τ`
    pub sum: f64,
    /// `Σ_{τ≤t} γ_τ²`
    pub sum_sq: f64,
    pub ratio: f64,
}

/// Partial sums of `γ` and `γ²` and their ratio for every `t ≤ horizon`.
pub fn discount_diagnostic(
    discounts: &DiscountSequence,
    horizon: usize,
) -> Result<Vec<DiscountDiagnosticRow>> {
    if horizon < 1 {
        return Err(Error::InvalidDiscount("horizon must be at least 1".into()));
    }
    let gammas = discounts.prefix(horizon + 1)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    Ok(gammas
        .iter()
        .enumerate()
        .map(|(t, &g)| {
            sum += g;
            sum_sq += g * g;
            DiscountDiagnosticRow {
                t,
                sum,
                sum_sq,
                ratio: sum_sq / sum,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_values() {
        let d = DiscountSequence::harmonic(20.0, 10.0).unwrap();
        assert_eq!(d.gamma(0), Some(2.0));
        assert_eq!(d.gamma(10), Some(1.0));
        assert_eq!(d.with_cap(0.5).unwrap().gamma(0), Some(0.5));
    }

    #[test]
    fn power_values() {
        let d = DiscountSequence::power(0.5, 2.0).unwrap();
        assert_eq!(d.gamma(3), Some(1.0));
        assert!(DiscountSequence::power(1.5, 1.0).is_err());
        assert!(DiscountSequence::power(0.0, 1.0).is_err());
    }

    #[test]
    fn explicit_must_be_positive_and_non_increasing() {
        assert!(DiscountSequence::explicit(vec![0.5, 0.6]).is_err());
        assert!(DiscountSequence::explicit(vec![0.5, 0.0]).is_err());
        let d = DiscountSequence::explicit(vec![0.5, 0.5, 0.25]).unwrap();
        assert_eq!(d.gamma(3), None);
        assert!(d.prefix(4).is_err());
        assert_eq!(d.prefix(3).unwrap(), vec![0.5, 0.5, 0.25]);
    }

    #[test]
    fn parse_rates() {
        let h: DiscountSequence = "20/10".parse().unwrap();
        assert_eq!(h, DiscountSequence::harmonic(20.0, 10.0).unwrap());
        let p: DiscountSequence = "pow:0.5".parse().unwrap();
        assert_eq!(p, DiscountSequence::power(0.5, 1.0).unwrap());
        let ps: DiscountSequence = "pow:0.75:0.3".parse().unwrap();
        assert_eq!(ps, DiscountSequence::power(0.75, 0.3).unwrap());
        assert!("fast".parse::<DiscountSequence>().is_err());
        assert!("1/0".parse::<DiscountSequence>().is_err());
        assert_eq!(h.to_string(), "20/10");
    }

    #[test]
    fn sequences_are_non_increasing() {
        for d in [
            DiscountSequence::harmonic(20.0, 10.0).unwrap(),
            DiscountSequence::power(0.3, 1.0).unwrap(),
            DiscountSequence::harmonic(20.0, 10.0)
                .unwrap()
                .with_cap(0.5)
                .unwrap(),
        ] {
            let v = d.prefix(5000).unwrap();
            assert!(v.windows(2).all(|w| w[1] <= w[0] && w[1] > 0.0));
        }
    }

    #[test]
    fn constant_sequence_ratio_is_the_constant() {
        let d = DiscountSequence::explicit(vec![0.1; 50]).unwrap();
        let rows = discount_diagnostic(&d, 49).unwrap();
        assert!((rows[49].ratio - 0.1).abs() < 1e-15);
        assert!(discount_diagnostic(&d, 0).is_err());
    }
}
