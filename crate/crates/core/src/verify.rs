//! Named check suites run by `record-walk verify`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{self, h_limit_checks};
use crate::law::{IncrementLaw, Orientation};
use crate::oracle;
use crate::output::real;
use crate::rates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    HLimits,
    LambdaLimits,
    Legendre,
    OracleEquivalence,
    Tauberian,
    LdpTrend,
    MdpConstants,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::HLimits,
        Suite::LambdaLimits,
        Suite::Legendre,
        Suite::OracleEquivalence,
        Suite::Tauberian,
        Suite::LdpTrend,
        Suite::MdpConstants,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::HLimits => "h-limits",
            Suite::LambdaLimits => "lambda-limits",
            Suite::Legendre => "legendre",
            Suite::OracleEquivalence => "oracle-equivalence",
            Suite::Tauberian => "tauberian",
            Suite::LdpTrend => "ldp-trend",
            Suite::MdpConstants => "mdp-constants",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown suite {s:?}")))
    }
}

/// How `observed` is compared with `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|observed - target| ≤ tolerance`
    Absolute,
    /// `|observed - target| ≤ tolerance · |target|`
    Relative,
    /// `observed ≥ target`
    AtLeast,
    /// `observed ≤ target`
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "real")]
    pub target: f64,
    #[serde(with = "real")]
    pub observed: f64,
    #[serde(with = "real")]
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub provenance: String,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        target: f64,
        observed: f64,
        tolerance: f64,
        comparison: Comparison,
        provenance: &str,
    ) -> Self {
        let passed = match comparison {
            Comparison::Absolute => (observed - target).abs() <= tolerance,
            Comparison::Relative => (observed - target).abs() <= tolerance * target.abs(),
            Comparison::AtLeast => observed >= target,
            Comparison::AtMost => observed <= target,
        };
        Self {
            name: name.into(),
            target,
            observed,
            tolerance,
            comparison,
            passed,
            provenance: provenance.to_string(),
        }
    }

    /// Pass/fail flag without a numeric target.
    pub fn flag(name: impl Into<String>, ok: bool, provenance: &str) -> Self {
        Self::new(name, 1.0, if ok { 1.0 } else { 0.0 }, 0.0, Comparison::AtLeast, provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
        Self { suite, checks, passed }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn run_suite(law: &IncrementLaw, suite: Suite) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::HLimits => h_limits(law)?,
        Suite::LambdaLimits => lambda_limits(law)?,
        Suite::Legendre => legendre(law)?,
        Suite::OracleEquivalence => oracle_equivalence(law)?,
        Suite::Tauberian => tauberian(law)?,
        Suite::LdpTrend => ldp_trend(law)?,
        Suite::MdpConstants => mdp_constants(law)?,
    };
    Ok(VerifyReport::new(suite, checks))
}

fn h_limits(law: &IncrementLaw) -> Result<Vec<Check>> {
    Ok(h_limit_checks(law)?
        .into_iter()
        .map(|c| {
            let comparison = if c.relative {
                Comparison::Relative
            } else {
                Comparison::Absolute
            };
            Check::new(c.name.clone(), c.target, c.extrapolant, c.tolerance, comparison, "fixed_point")
        })
        .collect())
}

fn lambda_limits(law: &IncrementLaw) -> Result<Vec<Check>> {
    let mut checks = vec![
        Check::new(
            "slope at lambda = -20",
            1.0,
            rates::cumulant_deriv(law, -20.0)?,
            1e-3,
            Comparison::Absolute,
            "rates",
        ),
        Check::new(
            "lambda - Lambda(lambda) at lambda = -30",
            -rates::log_one_step_return(law),
            -30.0 - rates::cumulant(law, -30.0)?,
            1e-6,
            Comparison::Absolute,
            "rates",
        ),
        Check::new(
            "slope at lambda = -1e-8",
            50.0,
            rates::cumulant_deriv(law, -1e-8)?,
            0.0,
            Comparison::AtLeast,
            "rates",
        ),
    ];
    let slopes = (0..=80)
        .map(|i| rates::cumulant_deriv(law, -(10f64.powf(2.0 - i as f64 / 8.0))))
        .collect::<Result<Vec<_>>>()?;
    checks.push(Check::flag(
        "slope increasing on lambda in [-100, -1e-8]",
        slopes.windows(2).all(|w| w[1] >= w[0]) && slopes[0] >= 1.0,
        "rates",
    ));
    Ok(checks)
}

/// `sup_λ {xλ - Λ(λ)}` over `[-40, 0)` by golden-section search.
fn legendre_by_search(law: &IncrementLaw, x: f64) -> Result<f64> {
    let f = |l: f64| rates::cumulant(law, l).map(|c| x * l - c);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-40.0, -1e-12);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(fc.max(fd))
}

fn legendre(law: &IncrementLaw) -> Result<Vec<Check>> {
    let mut checks = vec![Check::new(
        "boundary value at x = 1",
        -rates::log_one_step_return(law),
        rates::legendre(law, 1.0)?.as_f64(),
        0.0,
        Comparison::Absolute,
        "rates",
    )];
    for x in [1.01, 1.1, 1.5, 2.0, 5.0, 10.0, 20.0] {
        checks.push(Check::new(
            format!("conjugate at x = {x} against direct maximization"),
            legendre_by_search(law, x)?,
            rates::legendre(law, x)?.as_f64(),
            1e-6,
            Comparison::Absolute,
            "rates",
        ));
    }
    for x in [1.2, 2.0, 6.0] {
        let step = 1e-5;
        let fd = (rates::legendre(law, x + step)?.as_f64() - rates::legendre(law, x - step)?.as_f64()) / (2.0 * step);
        checks.push(Check::new(
            format!("envelope identity at x = {x}"),
            rates::invert_slope(law, x)?,
            fd,
            1e-4,
            Comparison::Absolute,
            "rates",
        ));
    }
    Ok(checks)
}

fn oracle_equivalence(law: &IncrementLaw) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let (truncated, _) = oracle::oracle_law(law)?;
    let one_step = rates::log_one_step_return(&truncated).exp();
    for n in [20, 40, 60] {
        let dp = oracle::dp_distribution(law, n, n)?;
        let rn = oracle::renewal_distribution(law, n, n)?;
        let gap = (0..=n).map(|k| (dp.tail(k) - rn.tail(k)).abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            format!("max |dp - renewal| at n = {n}"),
            0.0,
            gap,
            1e-12,
            Comparison::Absolute,
            "oracle",
        ));
        checks.push(Check::new(
            format!("P(A_n = n) at n = {n}"),
            one_step.powi(n as i32),
            dp.tail(n),
            1e-12,
            Comparison::Relative,
            "oracle",
        ));
    }
    Ok(checks)
}

/// `U_n / n^p` for the expected number of returns to 0.
pub fn renewal_ratios(law: &IncrementLaw, ns: &[usize]) -> Result<Vec<f64>> {
    let top = *ns.iter().max().ok_or_else(|| Error::Input("no horizons".into()))?;
    let series = oracle::return_prob_partial_sums(law, top)?;
    let p = rates::mdp_constants(law)?.occupation_index();
    Ok(ns.iter().map(|&n| series.cumulative[n] / (n as f64).powf(p)).collect())
}

fn tauberian(law: &IncrementLaw) -> Result<Vec<Check>> {
    let target = rates::mdp_constants(law)?.renewal_constant();
    let ratios = renewal_ratios(law, &[1000, 10_000])?;
    let (r3, r4) = (ratios[0], ratios[1]);
    Ok(vec![
        Check::new("U_n / n^p at n = 1e4", target, r4, 0.1, Comparison::Relative, "oracle"),
        Check::flag(
            "n = 1e3 and 1e4 bracket the constant or approach it",
            (r3 - target) * (r4 - target) <= 0.0 || (r4 - target).abs() < (r3 - target).abs(),
            "oracle",
        ),
    ])
}

/// Record density used by the trend suite.
pub const TREND_DENSITY: f64 = 0.5;
/// Horizons of the trend suite.
pub const TREND_HORIZONS: [usize; 4] = [100, 200, 400, 800];

/// `-(1/n) ln P(A_n ≥ ⌈x_rec n⌉)` from the renewal oracle.
pub fn finite_n_rates(law: &IncrementLaw, x_rec: f64, ns: &[usize]) -> Result<Vec<f64>> {
    let (law, _) = oracle::oracle_law(law)?;
    let top = *ns.iter().max().ok_or_else(|| Error::Input("no horizons".into()))?;
    let tau = oracle::tau_pmf(&law, top)?;
    ns.iter()
        .map(|&n| {
            let k = (x_rec * n as f64).ceil() as usize;
            let p = oracle::renewal_tail(&tau, n, k)?;
            Ok(-p.ln() / n as f64)
        })
        .collect()
}

fn ldp_trend(law: &IncrementLaw) -> Result<Vec<Check>> {
    let rate = rates::ldp_rate(law, TREND_DENSITY)?.as_f64();
    let r = finite_n_rates(law, TREND_DENSITY, &TREND_HORIZONS)?;
    let monotone = r.windows(2).all(|w| w[1] <= w[0]) || r.windows(2).all(|w| w[1] >= w[0]);
    let approaching = r.windows(2).all(|w| (w[1] - rate).abs() < (w[0] - rate).abs());
    let extrapolant = 2.0 * r[3] - r[2];
    let ns: Vec<f64> = TREND_HORIZONS[1..].iter().map(|&n| n as f64).collect();
    let corrected = log_corrected_limit([ns[0], ns[1], ns[2]], [r[1], r[2], r[3]]);
    Ok(vec![
        Check::flag("finite-n rates are monotone and approach the limit", monotone && approaching, "oracle"),
        Check::new(
            "Richardson extrapolant of n = 400, 800",
            rate,
            extrapolant,
            0.1,
            Comparison::Relative,
            "oracle",
        ),
        Check::new(
            "limit of r + (a ln n + b) / n through n = 200, 400, 800",
            rate,
            corrected,
            0.1,
            Comparison::Relative,
            "oracle",
        ),
    ])
}

/// `r` in `r_n = r + (a ln n + b) / n` through three points.
pub fn log_corrected_limit(n: [f64; 3], r: [f64; 3]) -> f64 {
    // Eliminate b, then a, from n r_n = r n + a ln n + b.
    let y = [n[0] * r[0], n[1] * r[1], n[2] * r[2]];
    let (d1n, d1l, d1y) = (n[1] - n[0], n[1].ln() - n[0].ln(), y[1] - y[0]);
    let (d2n, d2l, d2y) = (n[2] - n[1], n[2].ln() - n[1].ln(), y[2] - y[1]);
    (d1y * d2l - d2y * d1l) / (d1n * d2l - d2n * d1l)
}

/// Closed forms of the moderate-deviation rate for the two families:
/// `q²x²/(2σ²)` and `σ²x²/8` (finite variance), `βγ x^{1+1/β} / (1+β)^{2+1/β}`
/// and `γβ^β x^{1+β} / (1+β)^{2+β}` (stable).
pub fn closed_form_mdp_rate(law: &IncrementLaw, x: f64) -> Option<f64> {
    match (law.stable_params(), law.orientation()) {
        (Some((g, b)), Orientation::Right) => Some(b * g / (1.0 + b).powf(2.0 + 1.0 / b) * x.powf(1.0 + 1.0 / b)),
        (Some((g, b)), Orientation::Left) => Some(g * b.powf(b) / (1.0 + b).powf(2.0 + b) * x.powf(1.0 + b)),
        (None, Orientation::Right) => Some(law.q().powi(2) * x * x / (2.0 * law.sigma2()?)),
        (None, Orientation::Left) => Some(law.sigma2()? * x * x / 8.0),
    }
}

fn mdp_constants(law: &IncrementLaw) -> Result<Vec<Check>> {
    let exact = rates::mdp_constants(law)?;
    let mut checks = Vec::new();
    match rates::fit_power_law(law) {
        Ok(fit) => {
            checks.push(Check::new("fitted alpha", exact.alpha, fit.alpha, 0.02, Comparison::Relative, "rates"));
            checks.push(Check::new("fitted c", exact.c, fit.c, 0.02, Comparison::Relative, "rates"));
        }
        Err(e) => checks.push(Check::flag(format!("power-law fit: {e}"), false, "rates")),
    }
    if let Some(sigma) = law.sigma() {
        let u = 1e-8;
        let fp = fixed_point::solve_split(law, 1.0 - u, u)?;
        checks.push(Check::new(
            "slope gap / sqrt(1 - s) at s = 1 - 1e-8",
            2f64.sqrt() * sigma,
            fp.slope_gap(law) / u.sqrt(),
            0.01,
            Comparison::Relative,
            "fixed_point",
        ));
    }
    for x in [0.5, 1.0, 2.0] {
        if let Some(want) = closed_form_mdp_rate(law, x) {
            checks.push(Check::new(
                format!("rate at x = {x} against closed form"),
                want,
                rates::mdp_rate(&exact, x)?,
                1e-12,
                Comparison::Relative,
                "rates",
            ));
        }
    }
    Ok(checks)
}
