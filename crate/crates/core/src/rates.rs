//! Cumulant of the return time, its Legendre transform, and the large and
//! moderate deviation rates of the weak-record count.
//!
//! With `t = e^λ` and `h = h(t)`, the return time of the reflected walk has
//! generating function `f₀(t) = t (q + ψ(h))` for right-continuous laws and
//! `f₀(t) = t χ(h)` for left-continuous ones, so `Λ(λ) = λ + ln core(h)`.
//! Working with the log of `core` keeps `Λ` finite for any `λ < 0`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fixed_point::{self, FixedPoint};
use crate::law::{IncrementLaw, Orientation};
use crate::output::real;

/// Smallest `λ` probed; `e^λ` underflows to zero below this.
pub const LAMBDA_FLOOR: f64 = -745.0;
const LAMBDA_CEILING: f64 = -1e-14;
const INVERT_MAX_ITERATIONS: usize = 200;
const INVERT_REL_TOL: f64 = 1e-13;

/// Value of a rate that may be `+∞` (impossible events).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn is_infinite(self) -> bool {
        matches!(self, RateValue::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            RateValue::Finite(v) => Some(v),
            RateValue::Infinite => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl From<f64> for RateValue {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            RateValue::Infinite
        } else {
            RateValue::Finite(v)
        }
    }
}

impl Serialize for RateValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        real::serialize(&self.as_f64(), s)
    }
}

impl<'de> Deserialize<'de> for RateValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        real::deserialize(d).map(RateValue::from)
    }
}

/// Everything the rate computation produces for one record density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Record density `A_n / n`.
    #[serde(with = "real")]
    pub x_rec: f64,
    /// Slope target `1 / x_rec`.
    #[serde(with = "real")]
    pub x: f64,
    #[serde(with = "real")]
    pub lambda: f64,
    #[serde(rename = "Lambda", with = "real")]
    pub cumulant: f64,
    #[serde(rename = "Lambda_star")]
    pub legendre: RateValue,
    pub ldp_rate: RateValue,
}

/// `Λ` and `Λ' - 1` at one `λ`, from a single fixed-point solve.
#[derive(Debug, Clone, Copy)]
struct Eval {
    log_core: f64,
    excess: f64,
}

fn evaluate(law: &IncrementLaw, lambda: f64) -> Result<Eval> {
    let t = lambda.exp();
    let fp = fixed_point::solve_split(law, t, -lambda.exp_m1())?;
    Ok(evaluate_at(law, &fp))
}

fn evaluate_at(law: &IncrementLaw, fp: &FixedPoint) -> Eval {
    let a = fp.arg();
    let (core, numerator) = match law.orientation() {
        Orientation::Right => (law.q() + law.psi_at(a), law.x_dpsi_at(a)),
        Orientation::Left => (law.chi_at(a), law.x_dchi_at(a)),
    };
    let excess = if numerator == 0.0 {
        0.0
    } else {
        numerator / (fp.slope_gap(law) * core)
    };
    Eval {
        log_core: core.ln(),
        excess,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda < 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "lambda",
            value: lambda,
            domain: "(-inf, 0)",
        })
    }
}

/// `ln` of the return-time generating function at `t → 0`, i.e.
/// `ln P(τ = 1)`: `ln(q + p_0)` (right) or `ln(1 - q)` (left).
pub fn log_one_step_return(law: &IncrementLaw) -> f64 {
    match law.orientation() {
        Orientation::Right => (law.q() + law.p0()).ln(),
        Orientation::Left => (-law.q()).ln_1p(),
    }
}

/// `Λ(λ) = ln E[e^{λτ}]` for `λ < 0`.
pub fn cumulant(law: &IncrementLaw, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(lambda + evaluate(law, lambda)?.log_core)
}

/// `Λ'(λ)`, which increases from 1 at `-∞` to `+∞` at `0-`.
pub fn cumulant_deriv(law: &IncrementLaw, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(1.0 + evaluate(law, lambda)?.excess)
}

/// `G(x)`: the `λ < 0` with `Λ'(λ) = x`, for `x > 1`. Clamped at
/// [`LAMBDA_FLOOR`] when `x` is too close to 1 for `e^λ` to resolve.
pub fn invert_slope(law: &IncrementLaw, x: f64) -> Result<f64> {
    if !(x > 1.0) || x.is_infinite() {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "(1, inf)",
        });
    }
    let target = x - 1.0;
    let excess = |l: f64| evaluate(law, l).map(|e| e.excess);

    let mut hi = LAMBDA_CEILING;
    while excess(hi)? < target {
        hi *= 1e-3;
        if hi > -f64::MIN_POSITIVE {
            return Err(Error::Convergence(format!("slope {x} is beyond reach below 0")));
        }
    }
    let mut lo = -1.0;
    while excess(lo)? > target {
        if lo <= LAMBDA_FLOOR {
            return Ok(LAMBDA_FLOOR);
        }
        lo = (2.0 * lo).max(LAMBDA_FLOOR);
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..INVERT_MAX_ITERATIONS {
        // Geometric midpoint while the bracket spans decades.
        mid = if lo < 4.0 * hi { -(lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let e = excess(mid)?;
        if (e - target).abs() <= INVERT_REL_TOL * x {
            return Ok(mid);
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// `Λ*(x) = sup_{λ ≤ 0} {xλ - Λ(λ)}`: `+∞` below 1, the one-step return
/// boundary value at 1.
pub fn legendre(law: &IncrementLaw, x: f64) -> Result<RateValue> {
    if x.is_nan() {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[1, inf)",
        });
    }
    if x < 1.0 {
        return Ok(RateValue::Infinite);
    }
    if x == 1.0 {
        return Ok(RateValue::Finite(-log_one_step_return(law)));
    }
    let lambda = invert_slope(law, x)?;
    let e = evaluate(law, lambda)?;
    Ok(RateValue::Finite(((x - 1.0) * lambda - e.log_core).max(0.0)))
}

/// `x_rec Λ*(1 / x_rec)`, the decay rate of `P(A_n ≥ x_rec n)`. Zero at
/// `x_rec = 0`, `+∞` above 1.
pub fn ldp_rate(law: &IncrementLaw, x_rec: f64) -> Result<RateValue> {
    Ok(rate_point(law, x_rec)?.ldp_rate)
}

pub fn rate_point(law: &IncrementLaw, x_rec: f64) -> Result<RatePoint> {
    if !(x_rec >= 0.0) || x_rec.is_infinite() {
        return Err(Error::Domain {
            name: "x_rec",
            value: x_rec,
            domain: "[0, 1]",
        });
    }
    if x_rec > 1.0 {
        return Ok(RatePoint {
            x_rec,
            x: 1.0 / x_rec,
            lambda: f64::NAN,
            cumulant: f64::NAN,
            legendre: RateValue::Infinite,
            ldp_rate: RateValue::Infinite,
        });
    }
    if x_rec == 0.0 {
        return Ok(RatePoint {
            x_rec,
            x: f64::INFINITY,
            lambda: 0.0,
            cumulant: 0.0,
            legendre: RateValue::Infinite,
            ldp_rate: RateValue::Finite(0.0),
        });
    }
    let x = 1.0 / x_rec;
    if x_rec == 1.0 {
        let star = -log_one_step_return(law);
        return Ok(RatePoint {
            x_rec,
            x,
            lambda: f64::NEG_INFINITY,
            cumulant: f64::NEG_INFINITY,
            legendre: RateValue::Finite(star),
            ldp_rate: RateValue::Finite(star),
        });
    }
    let lambda = invert_slope(law, x)?;
    let e = evaluate(law, lambda)?;
    let star = ((x - 1.0) * lambda - e.log_core).max(0.0);
    Ok(RatePoint {
        x_rec,
        x,
        lambda,
        cumulant: lambda + e.log_core,
        legendre: RateValue::Finite(star),
        ldp_rate: RateValue::Finite(x_rec * star),
    })
}

/// How `(α, c)` of `1 - sφ'(h(s)) ~ c (1 - s)^α` were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    FiniteVariance,
    StableFamily,
    NumericEstimate,
}

/// Moderate-deviation constants and the resulting rate
/// `-ln P(A_n ≥ x n^{a} c_n^{b}) / (n^{a} c_n^{b}) ~ coefficient · x^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpConstants {
    pub orientation: Orientation,
    pub regime: Regime,
    pub alpha: f64,
    pub c: f64,
    pub q: f64,
    /// Exponents of `n` and of `c_n` in the deviation scale.
    pub scaling_exponents: (f64, f64),
    pub rate_coefficient: f64,
    pub rate_exponent: f64,
    /// Relative spread of the regression, for numeric estimates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uncertainty: Option<f64>,
}

impl MdpConstants {
    pub fn from_alpha_c(orientation: Orientation, regime: Regime, alpha: f64, c: f64, q: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                domain: "(0, 1)",
            });
        }
        if !(c > 0.0) || c.is_infinite() {
            return Err(Error::Domain {
                name: "c",
                value: c,
                domain: "(0, inf)",
            });
        }
        let (scaling_exponents, rate_coefficient, rate_exponent) = match orientation {
            Orientation::Right => (
                (1.0 - alpha, alpha),
                alpha / (1.0 - alpha) * (q / c).powf(1.0 / alpha),
                1.0 / alpha,
            ),
            Orientation::Left => (
                (alpha, 1.0 - alpha),
                (c * (1.0 - alpha).powf(2.0 - alpha) * alpha.powf(alpha)).powf(1.0 / (1.0 - alpha)),
                1.0 / (1.0 - alpha),
            ),
        };
        Ok(Self {
            orientation,
            regime,
            alpha,
            c,
            q,
            scaling_exponents,
            rate_coefficient,
            rate_exponent,
            uncertainty: None,
        })
    }

    /// Index `p` of the regularly varying occupation time at 0: `1 - α`
    /// (right) or `α` (left).
    pub fn occupation_index(&self) -> f64 {
        match self.orientation {
            Orientation::Right => 1.0 - self.alpha,
            Orientation::Left => self.alpha,
        }
    }

    /// Limit of `U_n / n^p` for the expected number of returns
    /// `U_n = Σ_{m ≤ n} P(S̄_m = 0)`.
    pub fn renewal_constant(&self) -> f64 {
        let a = self.alpha;
        match self.orientation {
            Orientation::Right => (1.0 - a) * self.c / (self.q * gamma(2.0 - a)),
            Orientation::Left => 1.0 / ((1.0 - a) * self.c * gamma(1.0 + a)),
        }
    }
}

/// Closed-form constants: `α = 1/2, c = √2 σ` for explicit laws and the
/// stable-family values otherwise.
pub fn mdp_constants(law: &IncrementLaw) -> Result<MdpConstants> {
    let o = law.orientation();
    if let Some((gamma, beta)) = law.stable_params() {
        let r = 1.0 + beta;
        let alpha = beta / r;
        let c = gamma.powf(1.0 / r) * r.powf(beta / r);
        MdpConstants::from_alpha_c(o, Regime::StableFamily, alpha, c, law.q())
    } else {
        let sigma = law
            .sigma()
            .ok_or_else(|| Error::InvalidLaw("explicit law without variance".into()))?;
        MdpConstants::from_alpha_c(o, Regime::FiniteVariance, 0.5, 2f64.sqrt() * sigma, law.q())
    }
}

/// Log–log fit of `1 - sφ'(h(s))` against `1 - s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub c: f64,
    /// Relative spread of the local estimates over the fitted points.
    pub spread: f64,
    /// `(1 - s, 1 - sφ'(h(s)))` for `s = 1 - 10^{-k}`, `k = 2..=8`.
    pub points: Vec<(f64, f64)>,
}

/// Largest relative spread accepted from [`fit_power_law`].
pub const MAX_FIT_SPREAD: f64 = 0.05;

/// Fits `(α, c)` on the three points closest to `s = 1`. Fails when the
/// local slopes or prefactors disagree by more than [`MAX_FIT_SPREAD`].
pub fn fit_power_law(law: &IncrementLaw) -> Result<PowerLawFit> {
    let mut points = Vec::new();
    for k in 2..=8 {
        let u = 10f64.powi(-k);
        let fp = fixed_point::solve_split(law, 1.0 - u, u)?;
        let gap = fp.slope_gap(law);
        if !(gap > 0.0) {
            return Err(Error::Regression(format!("non-positive slope gap {gap} at 1 - s = {u}")));
        }
        points.push((u, gap));
    }
    let fine = &points[points.len() - 3..];
    let logs: Vec<(f64, f64)> = fine.iter().map(|&(u, g)| (u.ln(), g.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    let c = (my - alpha * mx).exp();

    let local_slopes: Vec<f64> = logs.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let slope_spread = spread(&local_slopes);
    let prefactors: Vec<f64> = fine.iter().map(|&(u, g)| g / u.powf(alpha)).collect();
    let spread = slope_spread.max(spread(&prefactors));
    if !(spread <= MAX_FIT_SPREAD) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Regression(format!(
            "no power law near s = 1: alpha = {alpha}, spread = {spread}"
        )));
    }
    Ok(PowerLawFit {
        alpha,
        c,
        spread,
        points,
    })
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean.abs()
}

/// Constants from [`fit_power_law`] instead of closed forms.
pub fn mdp_constants_numeric(law: &IncrementLaw) -> Result<MdpConstants> {
    let fit = fit_power_law(law)?;
    let mut k = MdpConstants::from_alpha_c(law.orientation(), Regime::NumericEstimate, fit.alpha, fit.c, law.q())?;
    k.uncertainty = Some(fit.spread);
    Ok(k)
}

/// Positive decay rate `rate_coefficient · x^rate_exponent`.
pub fn mdp_rate(constants: &MdpConstants, x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "(0, inf)",
        });
    }
    Ok(constants.rate_coefficient * x.powf(constants.rate_exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(o: Orientation) -> IncrementLaw {
        IncrementLaw::symmetric(o)
    }

    fn asym(o: Orientation) -> IncrementLaw {
        IncrementLaw::new(
            o,
            crate::law::LawSpec::Explicit {
                q: 0.4,
                p: vec![0.3, 0.2, 0.1],
            },
        )
        .unwrap()
    }

    fn stable(o: Orientation) -> IncrementLaw {
        IncrementLaw::stable(o, 0.5, 0.5).unwrap()
    }

    fn all_laws() -> Vec<IncrementLaw> {
        let mut v = Vec::new();
        for o in [Orientation::Right, Orientation::Left] {
            v.extend([sym(o), asym(o), stable(o)]);
        }
        v
    }

    /// `f₀(s) = 1/2 + s/2 - √(1 - s²)/2` for the symmetric walk.
    fn sym_f0(s: f64) -> f64 {
        0.5 + 0.5 * s - 0.5 * (1.0 - s * s).sqrt()
    }

    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        fc.max(fd)
    }

    #[test]
    fn cumulant_examples() {
        for o in [Orientation::Right, Orientation::Left] {
            let l = cumulant(&sym(o), 0.6f64.ln()).unwrap();
            assert!((l - 0.4f64.ln()).abs() < 1e-13, "{o}: {l}");
            assert!(cumulant(&sym(o), -1e-12).unwrap().abs() < 1e-5);
        }
        assert!(cumulant(&sym(Orientation::Right), 0.0).is_err());
        for lambda in [-0.01, -0.3, -2.0, -7.0] {
            let exact = sym_f0(f64::exp(lambda)).ln();
            let got = cumulant(&sym(Orientation::Right), lambda).unwrap();
            assert!((got - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulant_is_finite_deep_in_the_tail() {
        for law in all_laws() {
            let b = log_one_step_return(&law);
            for lambda in [-700.0, -800.0, -1e6] {
                let l = cumulant(&law, lambda).unwrap();
                assert!((l - lambda - b).abs() < 1e-9, "{l}");
            }
            assert_eq!(cumulant(&law, f64::NEG_INFINITY).unwrap(), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn derivative_examples() {
        let law = sym(Orientation::Right);
        let lambda = 0.6f64.ln();
        let d = cumulant_deriv(&law, lambda).unwrap();
        assert!((d - 1.3125).abs() < 1e-12);
        let step = 1e-6;
        let fd = (cumulant(&law, lambda + step).unwrap() - cumulant(&law, lambda - step).unwrap()) / (2.0 * step);
        assert!((fd - d).abs() < 1e-7);
        for law in all_laws() {
            let far = cumulant_deriv(&law, -20.0).unwrap();
            assert!((1.0..=1.001).contains(&far), "{far}");
            let near: Vec<f64> = [-1e-4, -1e-6, -1e-8]
                .iter()
                .map(|&l| cumulant_deriv(&law, l).unwrap())
                .collect();
            assert!(near[0] < near[1] && near[1] < near[2] && near[2] > 50.0, "{near:?}");
        }
        // About 36 at λ = -1e-4, from t f₀'(t) / f₀(t) in closed form.
        let t = f64::exp(-1e-4);
        let want = t * (0.5 + t / (2.0 * (1.0 - t * t).sqrt())) / sym_f0(t);
        let d4 = cumulant_deriv(&law, -1e-4).unwrap();
        assert!((d4 - want).abs() < 1e-9 * want, "{d4} vs {want}");
    }

    #[test]
    fn derivative_matches_finite_differences_for_all_laws() {
        for law in all_laws() {
            for lambda in [-5.0f64, -1.0, -0.1, -0.01] {
                let step = 1e-5 * lambda.abs();
                let fd = (cumulant(&law, lambda + step).unwrap() - cumulant(&law, lambda - step).unwrap()) / (2.0 * step);
                let d = cumulant_deriv(&law, lambda).unwrap();
                assert!((fd - d).abs() < 1e-6 * d, "{} {lambda}: {fd} vs {d}", law.orientation());
            }
        }
    }

    #[test]
    fn invert_slope_examples() {
        let law = sym(Orientation::Right);
        assert!((invert_slope(&law, 1.3125).unwrap() - 0.6f64.ln()).abs() < 1e-12);
        let l = invert_slope(&law, 1e6).unwrap();
        assert!(l > -1e-4 && l < 0.0);
        let deep = invert_slope(&law, 1.0 + 1e-15).unwrap();
        assert!(deep < -30.0);
        assert!(invert_slope(&law, 1.0).is_err());
        assert!(invert_slope(&law, 0.5).is_err());
    }

    #[test]
    fn invert_slope_meets_tolerance() {
        for law in all_laws() {
            for x in [1.001, 1.01, 1.3, 2.0, 5.0, 20.0, 1e3, 1e5] {
                let l = invert_slope(&law, x).unwrap();
                let d = cumulant_deriv(&law, l).unwrap();
                assert!((d - x).abs() <= 1e-10 * x, "{x}: {d}");
            }
        }
    }

    #[test]
    fn legendre_examples() {
        for o in [Orientation::Right, Orientation::Left] {
            let law = sym(o);
            assert_eq!(legendre(&law, 1.0).unwrap(), RateValue::Finite(2f64.ln()));
            let v = legendre(&law, 1.3125).unwrap().finite().unwrap();
            assert!((v - (1.3125 * 0.6f64.ln() - 0.4f64.ln())).abs() < 1e-12);
            assert!((v - 0.2458).abs() < 1e-4);
            assert_eq!(legendre(&law, 0.99).unwrap(), RateValue::Infinite);
        }
        assert_eq!(
            legendre(&asym(Orientation::Right), 1.0).unwrap(),
            RateValue::Finite(-(0.7f64.ln()))
        );
        assert_eq!(
            legendre(&asym(Orientation::Left), 1.0).unwrap(),
            RateValue::Finite(-(0.6f64.ln()))
        );
    }

    #[test]
    fn ldp_examples() {
        let law = sym(Orientation::Right);
        assert_eq!(ldp_rate(&law, 1.0).unwrap(), RateValue::Finite(2f64.ln()));
        let r = ldp_rate(&law, 1.0 / 1.3125).unwrap().finite().unwrap();
        assert!((r - 0.1873).abs() < 1e-4);
        assert_eq!(ldp_rate(&law, 1.5).unwrap(), RateValue::Infinite);
        assert_eq!(ldp_rate(&law, 0.0).unwrap(), RateValue::Finite(0.0));
        assert!(ldp_rate(&law, -0.1).is_err());
    }

    #[test]
    fn legendre_matches_grid_maximization() {
        let xs = [1.01, 1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0];
        for law in all_laws() {
            for &x in &xs {
                let direct = legendre(&law, x).unwrap().finite().unwrap();
                let brute = golden_max(|l| x * l - cumulant(&law, l).unwrap(), -40.0, -1e-12);
                assert!((direct - brute).abs() < 1e-6, "{x}: {direct} vs {brute}");
            }
        }
    }

    #[test]
    fn envelope_identity() {
        for law in all_laws() {
            for x in [1.2, 2.0, 6.0] {
                let step = 1e-5;
                let fd = (legendre(&law, x + step).unwrap().as_f64() - legendre(&law, x - step).unwrap().as_f64())
                    / (2.0 * step);
                assert!((fd - invert_slope(&law, x).unwrap()).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn legendre_is_convex_and_nonnegative() {
        for law in all_laws() {
            let xs: Vec<f64> = (0..40).map(|i| 1.0 + 0.25 * i as f64).collect();
            let v: Vec<f64> = xs.iter().map(|&x| legendre(&law, x).unwrap().as_f64()).collect();
            assert!(v.iter().all(|&y| y >= 0.0));
            for w in v.windows(3) {
                assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
            }
        }
    }

    #[test]
    fn lambda_minus_cumulant_limit() {
        for law in all_laws() {
            let gap = -30.0 - cumulant(&law, -30.0).unwrap();
            assert!((gap + log_one_step_return(&law)).abs() <= 1e-6);
        }
    }

    #[test]
    fn symmetric_walk_is_self_dual() {
        let (r, l) = (sym(Orientation::Right), sym(Orientation::Left));
        for i in 0..=60 {
            let lambda = -10f64.powf(1.0 - i as f64 / 15.0);
            let (a, b) = (cumulant(&r, lambda).unwrap(), cumulant(&l, lambda).unwrap());
            assert!((a - b).abs() <= 1e-12, "{lambda}: {a} vs {b}");
        }
        for x in [0.3, 0.76, 0.95] {
            assert!((ldp_rate(&r, x).unwrap().as_f64() - ldp_rate(&l, x).unwrap().as_f64()).abs() < 1e-12);
        }
        let (kr, kl) = (mdp_constants(&r).unwrap(), mdp_constants(&l).unwrap());
        assert!((kr.rate_coefficient - kl.rate_coefficient).abs() < 1e-15);
    }

    #[test]
    fn mdp_constant_examples() {
        let k = mdp_constants(&sym(Orientation::Right)).unwrap();
        assert_eq!(k.regime, Regime::FiniteVariance);
        assert_eq!(k.alpha, 0.5);
        assert!((k.c - 2f64.sqrt()).abs() < 1e-15);
        assert!((k.rate_coefficient - 0.125).abs() < 1e-15);
        assert_eq!(k.rate_exponent, 2.0);
        assert_eq!(k.scaling_exponents, (0.5, 0.5));
        assert!((mdp_rate(&k, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(mdp_rate(&k, 0.0).unwrap(), 0.0);

        let kl = mdp_constants(&sym(Orientation::Left)).unwrap();
        assert!((kl.rate_coefficient - 0.125).abs() < 1e-15);

        let ks = mdp_constants(&stable(Orientation::Right)).unwrap();
        assert_eq!(ks.regime, Regime::StableFamily);
        assert!((ks.alpha - 1.0 / 3.0).abs() < 1e-15);
        assert!((ks.c - 0.7211).abs() < 1e-4);
        assert!((ks.rate_coefficient - 0.25 / 1.5f64.powi(4)).abs() < 1e-15);
        assert!((ks.rate_exponent - 3.0).abs() < 1e-12);
        assert_eq!(ks.scaling_exponents.0, 1.0 - ks.alpha);

        let ksl = mdp_constants(&stable(Orientation::Left)).unwrap();
        assert!((mdp_rate(&ksl, 1.0).unwrap() - 0.1283).abs() < 1e-4);
        assert!((ksl.rate_exponent - 1.5).abs() < 1e-12);
    }

    #[test]
    fn corollary_closed_forms() {
        for x in [0.5, 1.0, 2.0] {
            for law in [sym(Orientation::Right), asym(Orientation::Right)] {
                let s2 = law.sigma2().unwrap();
                let want = law.q().powi(2) * x * x / (2.0 * s2);
                let got = mdp_rate(&mdp_constants(&law).unwrap(), x).unwrap();
                assert!((got - want).abs() <= 1e-12 * want);
            }
            for law in [sym(Orientation::Left), asym(Orientation::Left)] {
                let want = law.sigma2().unwrap() * x * x / 8.0;
                let got = mdp_rate(&mdp_constants(&law).unwrap(), x).unwrap();
                assert!((got - want).abs() <= 1e-12 * want);
            }
            let (g, b) = (0.5f64, 0.5f64);
            let want_r = b * g / (1.0 + b).powf(2.0 + 1.0 / b) * x.powf(1.0 + 1.0 / b);
            let want_l = g * b.powf(b) / (1.0 + b).powf(2.0 + b) * x.powf(1.0 + b);
            let got_r = mdp_rate(&mdp_constants(&stable(Orientation::Right)).unwrap(), x).unwrap();
            let got_l = mdp_rate(&mdp_constants(&stable(Orientation::Left)).unwrap(), x).unwrap();
            assert!((got_r - want_r).abs() <= 1e-12 * want_r);
            assert!((got_l - want_l).abs() <= 1e-12 * want_l);
        }
    }

    #[test]
    fn power_law_fit_recovers_closed_forms() {
        for law in all_laws() {
            let exact = mdp_constants(&law).unwrap();
            let fit = fit_power_law(&law).unwrap();
            assert!((fit.alpha - exact.alpha).abs() < 0.02 * exact.alpha, "{fit:?}");
            assert!((fit.c - exact.c).abs() < 0.02 * exact.c, "{fit:?}");
            let k = mdp_constants_numeric(&law).unwrap();
            assert_eq!(k.regime, Regime::NumericEstimate);
            assert!(k.uncertainty.unwrap() <= MAX_FIT_SPREAD);
        }
    }

    #[test]
    fn renewal_constant_for_symmetric_walk() {
        let k = mdp_constants(&sym(Orientation::Right)).unwrap();
        let want = 2.0 * 2f64.sqrt() / std::f64::consts::PI.sqrt();
        assert!((k.renewal_constant() - want).abs() < 1e-12);
        assert_eq!(k.occupation_index(), 0.5);
    }

    #[test]
    fn rate_point_json_round_trip() {
        let law = sym(Orientation::Right);
        for x_rec in [0.7619, 1.0, 1.5] {
            let p = rate_point(&law, x_rec).unwrap();
            let text = serde_json::to_string(&p).unwrap();
            let back: RatePoint = serde_json::from_str(&text).unwrap();
            assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn derivative_is_increasing(a in -30.0f64..-1e-6, b in -30.0f64..-1e-6) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9 * lo.abs());
            for law in [sym(Orientation::Right), stable(Orientation::Left)] {
                prop_assert!(cumulant_deriv(&law, lo).unwrap() <= cumulant_deriv(&law, hi).unwrap());
                prop_assert!(cumulant(&law, lo).unwrap() <= cumulant(&law, hi).unwrap());
                prop_assert!(cumulant(&law, hi).unwrap() <= 0.0);
            }
        }

        #[test]
        fn rate_point_is_consistent(x_rec in 0.01f64..0.999) {
            let law = asym(Orientation::Right);
            let p = rate_point(&law, x_rec).unwrap();
            prop_assert!(p.lambda < 0.0 && p.cumulant <= 0.0);
            let star = p.legendre.as_f64();
            prop_assert!((star - (p.x * p.lambda - p.cumulant)).abs() < 1e-10 * (1.0 + star));
            prop_assert!((p.ldp_rate.as_f64() - x_rec * star).abs() < 1e-15);
        }
    }
}
