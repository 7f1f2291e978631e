//! Truncated formal power series with `f64` coefficients.
//!
//! All products are truncated at an explicit order; coefficients beyond it
//! are never materialized.

use crate::error::{Error, Result};

/// Slack allowed below zero for coefficients that represent probabilities.
pub const PMF_NEGATIVE_SLACK: f64 = 1e-14;
/// Slack allowed above one for partial sums of a probability generating function.
pub const PMF_MASS_SLACK: f64 = 1e-10;

/// A power series truncated after `order()`: index `n` holds the coefficient of `s^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoly {
    coeffs: Vec<f64>,
}

impl SeriesPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Input("a series needs at least one coefficient".into()));
        }
        if let Some((i, &c)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::SeriesInstability { index: i, value: c });
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_vec(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `s^n`, zero past the truncation order.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// Horner evaluation of the truncated polynomial.
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, 0.0);
        Self { coeffs }
    }

    /// Product truncated at `order`.
    pub fn mul_trunc(&self, other: &Self, order: usize) -> Self {
        let mut out = vec![0.0; order + 1];
        for (i, &a) in self.coeffs.iter().enumerate().take(order + 1) {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate().take(order + 1 - i) {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// Multiplicative inverse truncated at `order`; needs a nonzero constant term.
    pub fn reciprocal(&self, order: usize) -> Result<Self> {
        let a0 = self.coeff(0);
        if a0 == 0.0 {
            return Err(Error::Input("reciprocal of a series with zero constant term".into()));
        }
        let mut out = vec![0.0; order + 1];
        out[0] = 1.0 / a0;
        for m in 1..=order {
            let upper = m.min(self.order());
            let acc: f64 = (1..=upper).map(|j| self.coeffs[j] * out[m - j]).sum();
            out[m] = -acc / a0;
        }
        Self::new(out)
    }

    /// `outer(self)` truncated at `order`, by Horner's scheme. `self` must
    /// have zero constant term so that `outer` terms past `order` vanish.
    pub fn compose(outer: &[f64], inner: &Self, order: usize) -> Result<Self> {
        if inner.coeff(0) != 0.0 {
            return Err(Error::Input("inner series of a composition must vanish at 0".into()));
        }
        let inner = inner.truncate(order);
        let degree = outer.len().min(order + 1);
        let mut acc = Self::zeros(order);
        for &c in outer[..degree].iter().rev() {
            acc = acc.mul_trunc(&inner, order);
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    /// `self^r` truncated at `order`, for a positive constant term.
    pub fn powf(&self, r: f64, order: usize) -> Result<Self> {
        let mut power = OnlinePower::new(self.coeff(0), r)?;
        let mut out = Vec::with_capacity(order + 1);
        out.push(power.value(0));
        for k in 1..=order {
            out.push(power.push(self.coeff(k)));
        }
        Self::new(out)
    }

    /// Running sums `Σ_{m ≤ n} a_m` for every `n`.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .scan(0.0, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    /// Checks the series can be the generating function of a (defective) p.m.f.
    pub fn check_pmf(&self) -> Result<()> {
        self.check_nonnegative(PMF_NEGATIVE_SLACK)?;
        let total = self.coeffs.iter().sum::<f64>();
        if total > 1.0 + PMF_MASS_SLACK {
            return Err(Error::SeriesInstability {
                index: self.order(),
                value: total,
            });
        }
        Ok(())
    }

    pub(crate) fn check_nonnegative(&self, slack: f64) -> Result<()> {
        match self.coeffs.iter().enumerate().find(|(_, &c)| c < -slack) {
            Some((index, &value)) => Err(Error::SeriesInstability { index, value }),
            None => Ok(()),
        }
    }
}

/// Coefficients of `A(s)^r` produced one at a time as coefficients of `A`
/// arrive (J. C. P. Miller's recurrence).
#[derive(Debug, Clone)]
pub(crate) struct OnlinePower {
    exponent: f64,
    base: Vec<f64>,
    out: Vec<f64>,
}

impl OnlinePower {
    pub(crate) fn new(a0: f64, exponent: f64) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(Error::Input(format!(
                "real power of a series needs a positive constant term, got {a0}"
            )));
        }
        Ok(Self {
            exponent,
            base: vec![a0],
            out: vec![a0.powf(exponent)],
        })
    }

    pub(crate) fn value(&self, k: usize) -> f64 {
        self.out[k]
    }

    /// Feeds the next base coefficient `a_k` and returns `[s^k] A^r`.
    pub(crate) fn push(&mut self, a_k: f64) -> f64 {
        self.base.push(a_k);
        let k = self.base.len() - 1;
        let kf = k as f64;
        let acc: f64 = (1..=k)
            .map(|i| ((self.exponent + 1.0) * i as f64 - kf) * self.base[i] * self.out[k - i])
            .sum();
        let g = acc / (kf * self.base[0]);
        self.out.push(g);
        g
    }
}
