//! The minimal nonnegative solution `h(s)` of `x = s φ(x)`.
//!
//! `h` is the generating function of the first passage of the walk one
//! level down (right-continuous case) and drives every rate in the crate.
//! For `s ≤ 1/2` the root is found in the variable `x`; above that it is
//! found in `y = 1 - x`, using
//!
//! ```text
//! s φ(x) - x = (φ(x) - x) - (1 - s) φ(x),    φ(x) - x = y² ω(x)
//! ```
//!
//! which keeps `1 - h(s)` accurate as `s → 1-` where `h` has a square-root
//! type singularity.

use serde::Serialize;

use crate::error::{check_unit, Error, Result};
use crate::law::{Arg, IncrementLaw};
use crate::series::{OnlinePower, SeriesPoly};

/// Default truncation order for `h` and derived series.
pub const DEFAULT_SERIES_ORDER: usize = 512;

/// Largest power table (entries) built by [`h_series`] for explicit laws.
const POWER_TABLE_BUDGET: usize = 50_000_000;

const MAX_ITERATIONS: usize = 400;

/// A solved fixed point with both the point and its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub s: f64,
    /// `1 - s`.
    pub u: f64,
    pub h: f64,
    /// `1 - h`.
    pub y: f64,
}

impl FixedPoint {
    pub(crate) fn arg(&self) -> Arg {
        Arg {
            x: self.h,
            y: self.y,
        }
    }

    /// `1 - s φ'(h(s))`, evaluated as `(1 - s) φ'(h) + (1 - h) κ(h)`.
    pub fn slope_gap(&self, law: &IncrementLaw) -> f64 {
        let a = self.arg();
        self.u * law.dphi_at(a) + law.dphi_gap_at(a)
    }
}

/// `h(s)` for `s ∈ [0, 1]`.
pub fn solve_h(law: &IncrementLaw, s: f64) -> Result<f64> {
    Ok(solve(law, s)?.h)
}

pub fn solve(law: &IncrementLaw, s: f64) -> Result<FixedPoint> {
    check_unit("s", s)?;
    solve_split(law, s, 1.0 - s)
}

/// Solves with `s` and `1 - s` supplied separately; callers that know `1 - s`
/// more accurately than `1.0 - s` (e.g. `-expm1(λ)`) should use this.
pub(crate) fn solve_split(law: &IncrementLaw, s: f64, u: f64) -> Result<FixedPoint> {
    if s == 0.0 {
        return Ok(FixedPoint { s, u, h: 0.0, y: 1.0 });
    }
    if u == 0.0 {
        return Ok(FixedPoint { s, u, h: 1.0, y: 0.0 });
    }
    if s <= 0.5 {
        // g(x) = s φ(x) - x: positive at 0, negative at 1, convex.
        let g = |x: f64| {
            let a = Arg::from_x(x);
            (s * law.phi_at(a) - x, s * law.dphi_at(a) - 1.0)
        };
        let x = bracketed_newton(g, 0.0, 1.0, 0.0)?;
        Ok(FixedPoint { s, u, h: x, y: 1.0 - x })
    } else {
        // F(y) = y² ω - u φ at x = 1 - y: negative at 0, positive at 1.
        let f = |y: f64| {
            let a = Arg::from_y(y);
            let value = law.excess_at(a) - u * law.phi_at(a);
            let slope = u * law.dphi_at(a) + law.dphi_gap_at(a);
            (value, slope)
        };
        let y = bracketed_newton(f, 0.0, 1.0, 1.0)?;
        Ok(FixedPoint { s, u, h: 1.0 - y, y })
    }
}

/// Root of `f` on `[lo, hi]` where `f` changes sign, Newton steps kept
/// inside the shrinking bracket and bisection as the fallback. `f` returns
/// `(value, derivative)`. Runs until the bracket collapses to adjacent floats
/// or the Newton step drops below the last ulp.
fn bracketed_newton<F>(f: F, lo: f64, hi: f64, start: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Convergence(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo:e}, {f_hi:e})"
        )));
    }
    let lo_negative = f_lo < 0.0;
    let (mut lo, mut hi) = (lo, hi);
    let mut x = start;
    for _ in 0..MAX_ITERATIONS {
        let (v, d) = f(x);
        if v == 0.0 {
            return Ok(x);
        }
        if (v < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / d;
        let next = if d != 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || (next - x).abs() <= f64::EPSILON * 0.25 * x.abs() {
            return Ok(next);
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return Ok(if f(lo).0.abs() <= f(hi).0.abs() { lo } else { hi });
        }
        x = next;
    }
    Err(Error::Convergence(format!(
        "no convergence after {MAX_ITERATIONS} iterations, bracket [{lo:e}, {hi:e}]"
    )))
}

/// `h'(s) = φ(h) / (1 - s φ'(h))` for `s ∈ (0, 1)`.
pub fn h_deriv(law: &IncrementLaw, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain {
            name: "s",
            value: s,
            domain: "(0, 1)",
        });
    }
    let fp = solve(law, s)?;
    let gap = fp.slope_gap(law);
    if gap < 1e-12 {
        log::warn!("h'({s}) is near its singularity: 1 - s φ'(h) = {gap:e}");
    }
    Ok(law.phi_at(fp.arg()) / gap)
}

/// Coefficients of `h` through `s^order`.
///
/// Coefficient `m` of `h = s φ(h)` depends only on coefficients `1 .. m-1`,
/// so a single sweep performs the fixed-point iteration one coefficient at a
/// time; the result equals `order` rounds of `H ← s φ(H)`.
pub fn h_series(law: &IncrementLaw, order: usize) -> Result<SeriesPoly> {
    let order = order.max(1);
    let mut h = vec![0.0; order + 1];
    h[1] = law.q();
    match law.stable_params() {
        Some((_, beta)) => {
            // φ(H) = H + q (1 - H)^{1+β}
            let q = law.q();
            let mut power = OnlinePower::new(1.0, 1.0 + beta)?;
            for m in 2..=order {
                let g = power.push(-h[m - 1]);
                h[m] = h[m - 1] + q * g;
            }
        }
        None => {
            let support = law.support_len().expect("explicit laws have finite support");
            let phi = law.expand_coefficients(support).into_coeffs();
            let degree = (phi.len() - 1).min(order);
            let cells = degree.saturating_mul(order + 1);
            if cells > POWER_TABLE_BUDGET {
                return Err(Error::Memory {
                    states: cells,
                    budget: POWER_TABLE_BUDGET,
                });
            }
            // powers[j-1][t] = [s^t] H^j
            let width = order + 1;
            let mut powers = vec![0.0; degree * width];
            for m in 2..=order {
                let t = m - 1;
                powers[t] = h[t];
                for j in 2..=degree.min(t) {
                    let (prev, cur) = powers.split_at_mut((j - 1) * width);
                    let prev = &prev[(j - 2) * width..];
                    cur[t] = (1..=t + 1 - j).map(|i| h[i] * prev[t - i]).sum();
                }
                h[m] = (1..=degree.min(t)).map(|j| phi[j] * powers[(j - 1) * width + t]).sum();
            }
        }
    }
    SeriesPoly::new(h)
}

/// One evaluated limit along a grid approaching its limit point.
#[derive(Debug, Clone, Serialize)]
pub struct LimitCheck {
    pub name: String,
    pub target: f64,
    /// `(grid point, observed value)`, coarse to fine.
    pub points: Vec<(f64, f64)>,
    /// Richardson extrapolant of the two finest points, assuming an error
    /// proportional to the grid spacing.
    pub extrapolant: f64,
    pub tolerance: f64,
    pub relative: bool,
    pub passed: bool,
}

impl LimitCheck {
    fn new(name: &str, target: f64, points: Vec<(f64, f64)>, ratio: f64, tolerance: f64, relative: bool) -> Self {
        let n = points.len();
        let (coarse, fine) = (points[n - 2].1, points[n - 1].1);
        let extrapolant = (ratio * fine - coarse) / (ratio - 1.0);
        let err = (fine - target).abs();
        let passed = fine.is_finite()
            && if relative {
                err <= tolerance * target.abs()
            } else {
                err <= tolerance
            };
        Self {
            name: name.to_string(),
            target,
            points,
            extrapolant,
            tolerance,
            relative,
            passed,
        }
    }

    pub fn observed(&self) -> f64 {
        self.points.last().map(|p| p.1).unwrap_or(f64::NAN)
    }
}

/// The three limits of `h` at the ends of `[0, 1]`:
/// `h(s)/s → q`, `(h(s) - q s)/s² → q p_0` as `s → 0+`, and near `s = 1`
/// either `(1 - s φ'(h))/√(1-s) → √2 σ` (finite variance) or
/// `(1 - s φ'(h))/(1-s)^α → c` (stable family).
pub fn h_limit_checks(law: &IncrementLaw) -> Result<Vec<LimitCheck>> {
    let q = law.q();
    let mut checks = Vec::with_capacity(3);

    let mut pts = Vec::new();
    for k in 4..=6 {
        let s = 10f64.powi(-k);
        pts.push((s, solve_h(law, s)? / s));
    }
    checks.push(LimitCheck::new("h(s)/s -> q", q, pts, 10.0, 1e-6, false));

    let mut pts = Vec::new();
    for k in 2..=4 {
        let s = 10f64.powi(-k);
        pts.push((s, (solve_h(law, s)? - q * s) / (s * s)));
    }
    checks.push(LimitCheck::new(
        "(h(s) - q s)/s^2 -> q p0",
        q * law.p0(),
        pts,
        10.0,
        1e-3,
        false,
    ));

    let (alpha, c, name, tol) = match (law.sigma(), law.stable_params()) {
        (Some(sigma), _) => (0.5, 2f64.sqrt() * sigma, "(1 - s phi'(h))/sqrt(1-s) -> sqrt(2) sigma", 0.01),
        (None, Some((gamma, beta))) => {
            let alpha = beta / (1.0 + beta);
            let c = gamma.powf(1.0 / (1.0 + beta)) * (1.0 + beta).powf(alpha);
            (alpha, c, "(1 - s phi'(h))/(1-s)^alpha -> c", 0.02)
        }
        (None, None) => unreachable!("laws without finite variance are stable"),
    };
    let mut pts = Vec::new();
    for k in 6..=8 {
        let u = 10f64.powi(-k);
        let fp = solve_split(law, 1.0 - u, u)?;
        pts.push((1.0 - u, fp.slope_gap(law) / u.powf(alpha)));
    }
    checks.push(LimitCheck::new(name, c, pts, 10.0, tol, true));
    Ok(checks)
}
