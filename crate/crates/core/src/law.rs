//! Increment laws of left- and right-continuous integer walks.
//!
//! A right-continuous walk steps `+1` with probability `q` and `-n` with
//! probability `p_n` (`n ≥ 0`); a left-continuous walk is the mirror image.
//! Both are described by the generating function
//!
//! ```text
//! φ(s) = q + Σ_{n≥0} p_n s^{n+1}
//! ```
//!
//! and every law accepted here is critical: `φ'(1) = 1`.
//!
//! Besides `φ` the law exposes a handful of derived functions that stay
//! accurate near `s = 1`, where the naive forms cancel:
//!
//! ```text
//! χ(x) = (1 - φ(x)) / (1 - x)        ω(x) = (φ(x) - x) / (1 - x)²
//! κ(x) = (1 - φ'(x)) / (1 - x)       ψ(x) = (φ(x) - q) / x = Σ p_n x^n
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::series::SeriesPoly;

/// Tolerance on `q + Σ p_n = 1` for explicit laws.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Tolerance on `φ'(1) = 1`.
pub const CRITICALITY_TOLERANCE: f64 = 1e-10;

/// Below this argument the stable family's `ψ` is summed from its expansion.
const STABLE_SERIES_CUTOFF: f64 = 0.5;
/// Terms kept for that expansion; `0.5^160` is far below `f64` resolution.
const STABLE_SERIES_TERMS: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Only upward jump is `+1`.
    Right,
    /// Only downward jump is `-1`.
    Left,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Right => "right",
            Orientation::Left => "left",
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Orientation::Right),
            "left" => Ok(Orientation::Left),
            other => Err(Error::Input(format!("unknown orientation {other:?}"))),
        }
    }
}

/// The jump distribution, either listed or from the parametric stable family
/// `φ(s) = s + γ/(1+β)·(1-s)^{1+β}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LawSpec {
    Explicit { q: f64, p: Vec<f64> },
    Stable { gamma: f64, beta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawFile {
    orientation: Orientation,
    spec: LawSpec,
}

/// Point in `[0, 1]` carried together with its complement so that both
/// `x` and `1 - x` keep full relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Arg {
    pub x: f64,
    pub y: f64,
}

impl Arg {
    pub(crate) fn from_x(x: f64) -> Self {
        Self { x, y: 1.0 - x }
    }

    pub(crate) fn from_y(y: f64) -> Self {
        Self { x: 1.0 - y, y }
    }
}

/// Polynomial coefficient tables of `φ` and its derived functions.
#[derive(Debug, Clone)]
struct Tables {
    phi: Vec<f64>,
    dphi: Vec<f64>,
    d2phi: Vec<f64>,
    chi: Vec<f64>,
    omega: Vec<f64>,
    kappa: Vec<f64>,
}

impl Tables {
    fn new(phi: Vec<f64>) -> Self {
        let d = phi.len() - 1;
        // T_m = Σ_{k≥m} φ_k for m ≥ 1
        let mut tail = vec![0.0; d + 2];
        let mut first_moment_tail = vec![0.0; d + 2];
        for k in (1..=d).rev() {
            tail[k] = tail[k + 1] + phi[k];
            first_moment_tail[k] = first_moment_tail[k + 1] + k as f64 * phi[k];
        }
        let chi: Vec<f64> = (0..d).map(|j| tail[j + 1]).collect();
        // R_m = Σ_{j≥m} T_j
        let mut tail2 = vec![0.0; d + 2];
        for j in (1..=d).rev() {
            tail2[j] = tail2[j + 1] + tail[j];
        }
        let omega: Vec<f64> = (0..d.saturating_sub(1)).map(|i| tail2[i + 2]).collect();
        let kappa: Vec<f64> = (0..d.saturating_sub(1))
            .map(|i| first_moment_tail[i + 2])
            .collect();
        let dphi = phi.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect();
        let d2phi = phi
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, &c)| (k * (k - 1)) as f64 * c)
            .collect();
        Self {
            phi,
            dphi,
            d2phi,
            chi,
            omega,
            kappa,
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// `Σ k c_k x^k`.
fn x_derivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, &a)| acc * x + k as f64 * a)
}

#[derive(Debug, Clone)]
enum Repr {
    Explicit(Tables),
    Stable {
        gamma: f64,
        beta: f64,
        q: f64,
        // φ coefficients used where the closed forms cancel (small x)
        small: Vec<f64>,
    },
}

/// A validated critical increment law together with its orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LawFile", into = "LawFile")]
pub struct IncrementLaw {
    orientation: Orientation,
    spec: LawSpec,
    sigma2: Option<f64>,
    repr: Repr,
}

impl TryFrom<LawFile> for IncrementLaw {
    type Error = Error;

    fn try_from(file: LawFile) -> Result<Self> {
        IncrementLaw::new(file.orientation, file.spec)
    }
}

impl From<IncrementLaw> for LawFile {
    fn from(law: IncrementLaw) -> Self {
        LawFile {
            orientation: law.orientation,
            spec: law.spec,
        }
    }
}

impl PartialEq for IncrementLaw {
    fn eq(&self, other: &Self) -> bool {
        self.orientation == other.orientation && self.spec == other.spec
    }
}

impl IncrementLaw {
    pub fn new(orientation: Orientation, spec: LawSpec) -> Result<Self> {
        match &spec {
            LawSpec::Explicit { q, p } => {
                let (q, p) = (*q, p.as_slice());
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::InvalidLaw(format!("q = {q} must lie in (0, 1]")));
                }
                if let Some((n, &pn)) = p
                    .iter()
                    .enumerate()
                    .find(|(_, &v)| !(v.is_finite() && v >= 0.0))
                {
                    return Err(Error::InvalidLaw(format!("p_{n} = {pn} must be a nonnegative number")));
                }
                let mass = q + p.iter().sum::<f64>();
                if (mass - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::InvalidLaw(format!(
                        "total mass {mass} differs from 1 by more than {MASS_TOLERANCE:e}"
                    )));
                }
                if p.first().copied().unwrap_or(0.0) >= 1.0 {
                    return Err(Error::InvalidLaw("p_0 must be below 1".into()));
                }
                let mean_down: f64 = p.iter().enumerate().map(|(n, &v)| n as f64 * v).sum();
                if (mean_down - q).abs() > CRITICALITY_TOLERANCE {
                    return Err(Error::InvalidLaw(format!(
                        "not critical: φ'(1) - 1 = {:e} (Σ n p_n = {mean_down}, q = {q})",
                        mean_down - q
                    )));
                }
                let mut phi = Vec::with_capacity(p.len() + 1);
                phi.push(q);
                phi.extend_from_slice(p);
                let sigma2 = phi
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (k * k.saturating_sub(1)) as f64 * c)
                    .sum();
                Ok(Self {
                    orientation,
                    spec,
                    sigma2: Some(sigma2),
                    repr: Repr::Explicit(Tables::new(phi)),
                })
            }
            LawSpec::Stable { gamma, beta } => {
                let (gamma, beta) = (*gamma, *beta);
                for (name, v) in [("gamma", gamma), ("beta", beta)] {
                    if !(v > 0.0 && v < 1.0) {
                        return Err(Error::InvalidLaw(format!("{name} = {v} must lie in (0, 1)")));
                    }
                }
                let small = stable_coefficients(gamma, beta, STABLE_SERIES_TERMS);
                Ok(Self {
                    orientation,
                    spec,
                    sigma2: None,
                    repr: Repr::Stable {
                        gamma,
                        beta,
                        q: gamma / (1.0 + beta),
                        small,
                    },
                })
            }
        }
    }

    /// Symmetric nearest-neighbour walk, `q = p_1 = 1/2`.
    pub fn symmetric(orientation: Orientation) -> Self {
        Self::new(
            orientation,
            LawSpec::Explicit {
                q: 0.5,
                p: vec![0.0, 0.5],
            },
        )
        .expect("symmetric walk is a valid law")
    }

    pub fn stable(orientation: Orientation, gamma: f64, beta: f64) -> Result<Self> {
        Self::new(orientation, LawSpec::Stable { gamma, beta })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("law serializes")
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn spec(&self) -> &LawSpec {
        &self.spec
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Self {
        Self {
            orientation,
            ..self.clone()
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self.repr, Repr::Stable { .. })
    }

    /// `P(X = +1)` (right) or `P(X = -1)` (left).
    pub fn q(&self) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => t.phi[0],
            Repr::Stable { q, .. } => *q,
        }
    }

    /// Probability of a zero step.
    pub fn p0(&self) -> f64 {
        self.p(0)
    }

    /// `p_n`: probability of the jump of size `n` in the unrestricted direction.
    pub fn p(&self, n: usize) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => t.phi.get(n + 1).copied().unwrap_or(0.0),
            Repr::Stable { gamma, beta, small, .. } => match small.get(n + 1) {
                Some(&c) => c,
                None => stable_coefficients(*gamma, *beta, n + 1)[n + 1],
            },
        }
    }

    /// Largest jump index with positive probability, `None` for the stable family.
    pub fn support_len(&self) -> Option<usize> {
        match &self.repr {
            Repr::Explicit(t) => Some(t.phi.len() - 1),
            Repr::Stable { .. } => None,
        }
    }

    /// `φ''(1)` when finite.
    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma2.map(f64::sqrt)
    }

    /// `(γ, β)` of a stable-family law.
    pub fn stable_params(&self) -> Option<(f64, f64)> {
        match self.repr {
            Repr::Stable { gamma, beta, .. } => Some((gamma, beta)),
            Repr::Explicit(_) => None,
        }
    }

    /// `φ(s)`.
    pub fn phi(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.phi_at(Arg::from_x(s)))
    }

    /// `φ'(s)` or `φ''(s)`; `φ''(1)` of the stable family is `+∞`.
    pub fn phi_deriv(&self, s: f64, order: u8) -> Result<f64> {
        check_unit("s", s)?;
        let a = Arg::from_x(s);
        match order {
            1 => Ok(self.dphi_at(a)),
            2 => Ok(self.d2phi_at(a)),
            _ => Err(Error::Input(format!("derivative order {order} is not 1 or 2"))),
        }
    }

    /// Coefficients of `φ` up to `s^order`.
    pub fn expand_coefficients(&self, order: usize) -> SeriesPoly {
        let order = order.max(1);
        match &self.repr {
            Repr::Explicit(t) => {
                let mut c = t.phi.clone();
                c.resize(order + 1, 0.0);
                SeriesPoly::from_vec(c)
            }
            Repr::Stable { gamma, beta, .. } => {
                SeriesPoly::from_vec(stable_coefficients(*gamma, *beta, order))
            }
        }
    }

    /// Finite-support approximation keeping `p_0 .. p_{order-1}` exactly.
    ///
    /// The dropped tail is placed on the two integers around its conditional
    /// mean so that the result is still a critical law. Returns the law and
    /// the probability mass that was moved. Explicit laws come back unchanged.
    pub fn truncated(&self, order: usize) -> Result<(IncrementLaw, f64)> {
        let (gamma, beta) = match self.repr {
            Repr::Explicit(_) => return Ok((self.clone(), 0.0)),
            Repr::Stable { gamma, beta, .. } => (gamma, beta),
        };
        let coeffs = stable_coefficients(gamma, beta, order.max(1));
        let q = coeffs[0];
        let mut p = coeffs[1..].to_vec();
        let kept_mass: f64 = p.iter().sum();
        let kept_mean: f64 = p.iter().enumerate().map(|(n, &v)| n as f64 * v).sum();
        let moved = 1.0 - q - kept_mass;
        let tail_mean = q - kept_mean;
        if moved > 0.0 && tail_mean > 0.0 {
            let centre = (tail_mean / moved).max(p.len() as f64);
            let lo = centre.floor();
            let frac = centre - lo;
            let lo = lo as usize;
            p.resize(lo + 2, 0.0);
            p[lo] += moved * (1.0 - frac);
            p[lo + 1] += moved * frac;
        }
        let law = IncrementLaw::new(self.orientation, LawSpec::Explicit { q, p })?;
        Ok((law, moved.max(0.0)))
    }

    pub(crate) fn phi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.phi, a.x),
            Repr::Stable { beta, q, .. } => a.x + q * a.y.powf(1.0 + beta),
        }
    }

    pub(crate) fn dphi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.dphi, a.x),
            Repr::Stable { gamma, beta, .. } => 1.0 - gamma * a.y.powf(*beta),
        }
    }

    pub(crate) fn d2phi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.d2phi, a.x),
            Repr::Stable { gamma, beta, .. } => {
                if a.y == 0.0 {
                    f64::INFINITY
                } else {
                    gamma * beta * a.y.powf(beta - 1.0)
                }
            }
        }
    }

    /// `(1 - φ(x)) / (1 - x)`.
    pub(crate) fn chi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.chi, a.x),
            Repr::Stable { beta, q, .. } => 1.0 - q * a.y.powf(*beta),
        }
    }

    /// `x χ'(x)`.
    pub(crate) fn x_dchi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => x_derivative(&t.chi, a.x),
            Repr::Stable { beta, q, .. } => a.x * q * beta * a.y.powf(beta - 1.0),
        }
    }

    /// `(φ(x) - x) / (1 - x)²`.
    pub(crate) fn omega_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.omega, a.x),
            Repr::Stable { beta, q, .. } => q * a.y.powf(beta - 1.0),
        }
    }

    /// `φ(x) - x = (1 - x)² ω(x)`.
    pub(crate) fn excess_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(_) => a.y * a.y * self.omega_at(a),
            Repr::Stable { beta, q, .. } => q * a.y.powf(1.0 + beta),
        }
    }

    /// `1 - φ'(x) = (1 - x) κ(x)`.
    pub(crate) fn dphi_gap_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(_) => a.y * self.kappa_at(a),
            Repr::Stable { gamma, beta, .. } => gamma * a.y.powf(*beta),
        }
    }

    /// `(1 - φ'(x)) / (1 - x)`.
    pub(crate) fn kappa_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.kappa, a.x),
            Repr::Stable { gamma, beta, .. } => gamma * a.y.powf(beta - 1.0),
        }
    }

    /// `ψ(x) = Σ p_n x^n`.
    pub(crate) fn psi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => horner(&t.phi[1..], a.x),
            Repr::Stable { beta, q, small, .. } => {
                if a.x <= STABLE_SERIES_CUTOFF {
                    horner(&small[1..], a.x)
                } else {
                    1.0 - q * (1.0 - a.y.powf(1.0 + beta)) / a.x
                }
            }
        }
    }

    /// `x ψ'(x) = Σ n p_n x^n`.
    pub(crate) fn x_dpsi_at(&self, a: Arg) -> f64 {
        match &self.repr {
            Repr::Explicit(t) => x_derivative(&t.phi[1..], a.x),
            Repr::Stable { beta, q, small, .. } => {
                if a.x <= STABLE_SERIES_CUTOFF {
                    x_derivative(&small[1..], a.x)
                } else {
                    q * (1.0 - a.y.powf(*beta) * (1.0 + beta * a.x)) / a.x
                }
            }
        }
    }

    /// Cumulative probabilities in the fixed sampling order
    /// `(+1, -0, -1, -2, ...)` (right) or its mirror (left), over the first
    /// `len` entries.
    pub(crate) fn sampling_weights(&self, len: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(len);
        w.push(self.q());
        match &self.repr {
            Repr::Explicit(t) => w.extend(t.phi[1..].iter().take(len.saturating_sub(1))),
            Repr::Stable { gamma, beta, .. } => {
                let c = stable_coefficients(*gamma, *beta, len);
                w.extend_from_slice(&c[1..len]);
            }
        }
        w
    }
}

/// Coefficients `φ_0 .. φ_order` of `s + γ/(1+β)·(1-s)^{1+β}`, from the
/// binomial ratio recurrence.
pub(crate) fn stable_coefficients(gamma: f64, beta: f64, order: usize) -> Vec<f64> {
    let r = 1.0 + beta;
    let q = gamma / r;
    let mut c = Vec::with_capacity(order + 1);
    c.push(q);
    if order >= 1 {
        c.push(1.0 - gamma);
    }
    if order >= 2 {
        let mut a = q * r * beta / 2.0;
        c.push(a);
        for k in 2..order {
            a *= (k as f64 - r) / (k as f64 + 1.0);
            c.push(a);
        }
    }
    c
}
