//! Exact finite-`n` distributions of the weak-record count `A_n`.
//!
//! Two independent routes: a dynamic program over the reflected chain
//! `S̄ = M - S`, whose visits to 0 are the weak records, and the renewal
//! representation `P(A_n ≥ k) = P(τ_1 + … + τ_k ≤ n)` with the return-time
//! p.m.f. read off the generating function `f₀`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::h_series;
use crate::law::{IncrementLaw, Orientation};
use crate::series::SeriesPoly;

/// Support kept when a stable-family law is replaced by a finite one.
pub const ORACLE_TRUNCATION: usize = 10_000;
/// Default cap on DP cells `(level_cap + 1)(kmax + 1)`.
pub const DEFAULT_STATE_BUDGET: usize = 20_000_000;
/// Coefficients below `-SERIES_NEGATIVE_TOL` are reported as instability.
pub const SERIES_NEGATIVE_TOL: f64 = 1e-10;

/// Finite-support law used by the oracles, with the probability mass moved
/// by the truncation (zero for explicit laws).
pub fn oracle_law(law: &IncrementLaw) -> Result<(IncrementLaw, f64)> {
    law.truncated(ORACLE_TRUNCATION)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Dp,
    Renewal,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Dp => "dp",
            Provenance::Renewal => "renewal",
            Provenance::MonteCarlo => "montecarlo",
        }
    }
}

/// `P(A_n ≥ k)` for `k = 0..=kmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub n: usize,
    pub entries: Vec<f64>,
    pub provenance: Provenance,
    /// Overflow mass for the DP, largest 95% half-width for Monte Carlo.
    pub error_bound: f64,
    /// Mass moved when truncating the law; results are exact for the
    /// truncated law and within `n` times this of the original one.
    pub truncated_mass: f64,
    /// Per-entry confidence intervals (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intervals: Option<Vec<(f64, f64)>>,
}

impl TailTable {
    pub fn kmax(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn tail(&self, k: usize) -> f64 {
        self.entries.get(k).copied().unwrap_or(0.0)
    }

    /// `P(A_n = k)`; exact only below `kmax`.
    pub fn point(&self, k: usize) -> f64 {
        self.tail(k) - self.tail(k + 1)
    }

    fn from_counts(n: usize, counts: &[f64], provenance: Provenance) -> Self {
        let mut entries = vec![0.0; counts.len()];
        let mut acc = 0.0;
        for k in (0..counts.len()).rev() {
            acc += counts[k];
            entries[k] = acc.min(1.0);
        }
        entries[0] = 1.0;
        Self {
            n,
            entries,
            provenance,
            error_bound: 0.0,
            truncated_mass: 0.0,
            intervals: None,
        }
    }
}

/// One row of the reflected-chain kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    /// `(j, p_{i,j})` for `j ≤ level_cap`, increasing in `j`.
    pub entries: Vec<(usize, f64)>,
    /// Mass leaving `[0, level_cap]`.
    pub overflow: f64,
}

impl KernelRow {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum::<f64>() + self.overflow
    }

    pub fn prob(&self, j: usize) -> f64 {
        self.entries.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }
}

/// Transition kernel of `S̄` on `{0, …, level_cap}` plus an absorbing
/// overflow state. Rows are produced on demand.
#[derive(Debug, Clone)]
pub struct ChainKernel {
    orientation: Orientation,
    level_cap: usize,
    q: f64,
    p: Vec<f64>,
    /// `tail[m] = Σ_{k ≥ m} p_k`, one past the support is zero.
    tail: Vec<f64>,
    truncated_mass: f64,
}

pub fn build_kernel(law: &IncrementLaw, level_cap: usize) -> Result<ChainKernel> {
    if level_cap == 0 {
        return Err(Error::Input("level_cap must be at least 1".into()));
    }
    let (law, truncated_mass) = oracle_law(law)?;
    let support = law.support_len().expect("oracle laws have finite support");
    let p: Vec<f64> = (0..support).map(|n| law.p(n)).collect();
    let mut tail = vec![0.0; p.len() + 1];
    for m in (0..p.len()).rev() {
        tail[m] = tail[m + 1] + p[m];
    }
    Ok(ChainKernel {
        orientation: law.orientation(),
        level_cap,
        q: law.q(),
        p,
        tail,
        truncated_mass,
    })
}

impl ChainKernel {
    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn level_cap(&self) -> usize {
        self.level_cap
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    fn p(&self, k: usize) -> f64 {
        self.p.get(k).copied().unwrap_or(0.0)
    }

    fn tail(&self, m: usize) -> f64 {
        self.tail.get(m).copied().unwrap_or(0.0)
    }

    pub fn row(&self, i: usize) -> KernelRow {
        let cap = self.level_cap;
        assert!(i <= cap, "row {i} beyond level cap {cap}");
        let mut entries = Vec::new();
        let overflow;
        match self.orientation {
            Orientation::Right => {
                if i == 0 {
                    entries.push((0, self.q + self.p(0)));
                    entries.extend((1..=cap).map(|k| (k, self.p(k))));
                    overflow = self.tail(cap + 1);
                } else {
                    entries.push((i - 1, self.q));
                    entries.extend((0..=cap - i).map(|k| (i + k, self.p(k))));
                    overflow = self.tail(cap - i + 1);
                }
            }
            Orientation::Left => {
                if i == 0 {
                    entries.push((0, 1.0 - self.q));
                } else {
                    entries.push((0, self.tail(i)));
                    entries.extend((1..=i).map(|j| (j, self.p(i - j))));
                }
                if i < cap {
                    entries.push((i + 1, self.q));
                    overflow = 0.0;
                } else {
                    overflow = self.q;
                }
            }
        }
        entries.retain(|e| e.1 != 0.0);
        KernelRow { entries, overflow }
    }
}

/// Settings of [`exact_an_distribution`].
#[derive(Debug, Clone, Copy)]
pub struct DpConfig {
    /// Largest `k` tracked; counts above it are lumped. Defaults to `n`.
    pub kmax: Option<usize>,
    pub state_budget: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            kmax: None,
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }
}

/// `dst += w · src`, shifting counts up by one (capped) when `record`.
#[inline]
fn spread(dst: &mut [f64], src: &[f64], w: f64, record: bool) {
    if w == 0.0 {
        return;
    }
    if record {
        let k = src.len() - 1;
        for c in 0..k {
            dst[c + 1] += w * src[c];
        }
        dst[k] += w * src[k];
    } else {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += w * s;
        }
    }
}

/// Distribution of `A_n` started from `S̄_0 = 0`, by dynamic programming over
/// `(level, count)`. Mass that leaves the level cap keeps its count; the
/// part of it that could still have returned to 0 is reported as
/// `error_bound`. A level cap of `n` makes the result exact.
pub fn exact_an_distribution(kernel: &ChainKernel, n: usize, config: &DpConfig) -> Result<TailTable> {
    if n == 0 {
        return Err(Error::Input("horizon n must be at least 1".into()));
    }
    let kmax = config.kmax.unwrap_or(n).min(n);
    let cap = kernel.level_cap.min(n);
    let w = kmax + 1;
    let states = (cap + 1).saturating_mul(w);
    if states > config.state_budget {
        return Err(Error::Memory {
            states,
            budget: config.state_budget,
        });
    }
    let mut cur = vec![0.0; states];
    let mut next = vec![0.0; states];
    let mut frozen = vec![0.0; w];
    let mut error_bound = 0.0;
    cur[0] = 1.0;

    for t in 1..=n {
        next.iter_mut().for_each(|v| *v = 0.0);
        let remaining = n - t;
        // Right walks descend one level per step, so only levels that can
        // still reach 0 are kept live; the rest is frozen exactly.
        let live_top = match kernel.orientation {
            Orientation::Right => cap.min(remaining),
            Orientation::Left => cap,
        };
        let reach = match kernel.orientation {
            Orientation::Right => cap,
            Orientation::Left => cap.min(t - 1),
        };
        for i in 0..=reach {
            let row = &cur[i * w..(i + 1) * w];
            let mass: f64 = row.iter().sum();
            if mass == 0.0 {
                continue;
            }
            let mut escaped = 0.0;
            let mut push = |next: &mut [f64], j: usize, pr: f64| {
                if pr == 0.0 {
                    return;
                }
                if j <= live_top {
                    spread(&mut next[j * w..(j + 1) * w], row, pr, j == 0);
                } else {
                    escaped += pr;
                }
            };
            match kernel.orientation {
                Orientation::Right => {
                    if i == 0 {
                        push(&mut next, 0, kernel.q + kernel.p(0));
                        for k in 1..=cap {
                            push(&mut next, k, kernel.p(k));
                        }
                        escaped += kernel.tail(cap + 1);
                    } else {
                        push(&mut next, i - 1, kernel.q);
                        for k in 0..=cap - i {
                            push(&mut next, i + k, kernel.p(k));
                        }
                        escaped += kernel.tail(cap - i + 1);
                    }
                }
                Orientation::Left => {
                    if i == 0 {
                        push(&mut next, 0, 1.0 - kernel.q);
                    } else {
                        push(&mut next, 0, kernel.tail(i));
                        for j in 1..=i {
                            push(&mut next, j, kernel.p(i - j));
                        }
                    }
                    if i < cap {
                        push(&mut next, i + 1, kernel.q);
                    } else {
                        escaped += kernel.q;
                    }
                }
            }
            if escaped > 0.0 {
                spread(&mut frozen, row, escaped, false);
                // Right: the escaped levels exceed `cap`, so a return needs
                // more than `cap` further steps. Left: one jump suffices.
                let can_return = match kernel.orientation {
                    Orientation::Right => remaining > cap,
                    Orientation::Left => remaining > 0,
                };
                if can_return {
                    error_bound += escaped * mass;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }

    let mut counts = frozen;
    for level in cur.chunks(w) {
        for (c, v) in counts.iter_mut().zip(level) {
            *c += v;
        }
    }
    let mut table = TailTable::from_counts(n, &counts, Provenance::Dp);
    table.error_bound = error_bound;
    table.truncated_mass = kernel.truncated_mass;
    Ok(table)
}

fn jump_coefficients(law: &IncrementLaw, order: usize) -> Vec<f64> {
    match law.support_len() {
        Some(len) => (0..len.min(order + 1)).map(|n| law.p(n)).collect(),
        None => law.expand_coefficients(order + 1).coeffs()[1..].to_vec(),
    }
}

fn checked(series: SeriesPoly) -> Result<SeriesPoly> {
    series.check_nonnegative(SERIES_NEGATIVE_TOL)?;
    Ok(series)
}

/// `s · g(s)` truncated at `order`.
fn times_s(g: &SeriesPoly, order: usize) -> SeriesPoly {
    let mut c = vec![0.0; order + 1];
    c[1..].copy_from_slice(&g.coeffs()[..order]);
    SeriesPoly::from_vec(c)
}

/// Coefficients `P(τ = m)`, `m ≤ order`, of the return time of `S̄` to 0:
/// `f₀(s) = s (q + ψ(h(s)))` (right) or `s χ(h(s))` (left), expanded by
/// composition. Stable laws use their closed forms in `(1 - h)`.
pub fn tau_pmf(law: &IncrementLaw, order: usize) -> Result<SeriesPoly> {
    let order = order.max(1);
    let h = h_series(law, order)?;
    let q = law.q();
    let inner = match (law.orientation(), law.stable_params()) {
        (Orientation::Right, None) => {
            let mut g = SeriesPoly::compose(&jump_coefficients(law, order), &h, order - 1)?.into_coeffs();
            g[0] += q;
            g
        }
        (Orientation::Left, None) => {
            let p = jump_coefficients(law, order);
            // χ_k = Σ_{m ≥ k} p_m
            let mut chi = vec![0.0; p.len()];
            let mut acc = 1.0 - q - p.iter().sum::<f64>();
            for k in (0..p.len()).rev() {
                acc += p[k];
                chi[k] = acc;
            }
            SeriesPoly::compose(&chi, &h, order - 1)?.into_coeffs()
        }
        (Orientation::Right, Some(_)) => return tau_pmf_by_division(law, order),
        (Orientation::Left, Some((_, beta))) => {
            // χ(h) = 1 - q (1 - h)^β
            let one_minus_h = one_minus(&h);
            let mut g = one_minus_h.powf(beta, order - 1)?.into_coeffs();
            g.iter_mut().for_each(|c| *c *= -q);
            g[0] += 1.0;
            g
        }
    };
    checked(times_s(&SeriesPoly::from_vec(inner), order))
}

fn one_minus(h: &SeriesPoly) -> SeriesPoly {
    let mut c: Vec<f64> = h.coeffs().iter().map(|v| -v).collect();
    c[0] += 1.0;
    SeriesPoly::from_vec(c)
}

/// [`tau_pmf`] by the division forms `f₀ = 1 + qs - qs / h(s)` (right) and
/// `f₀ = s (1 - φ(h)) / (1 - h)` (left).
pub fn tau_pmf_by_division(law: &IncrementLaw, order: usize) -> Result<SeriesPoly> {
    let order = order.max(1);
    let h = h_series(law, order + 1)?;
    let q = law.q();
    let f0 = match law.orientation() {
        Orientation::Right => {
            // h / s has constant term q > 0.
            let h_over_s = SeriesPoly::from_vec(h.coeffs()[1..].to_vec());
            let inv = h_over_s.reciprocal(order)?;
            let mut c: Vec<f64> = inv.coeffs().iter().map(|v| -q * v).collect();
            c[0] += 1.0;
            c[1] += q;
            SeriesPoly::from_vec(c)
        }
        Orientation::Left => {
            let phi = law.expand_coefficients(order).into_coeffs();
            let phi_h = SeriesPoly::compose(&phi, &h, order - 1)?;
            let numer = one_minus(&phi_h);
            let ratio = numer.mul_trunc(&one_minus(&h).reciprocal(order - 1)?, order - 1);
            times_s(&ratio, order)
        }
    };
    checked(f0)
}

fn check_tau(tau: &SeriesPoly, n: usize) -> Result<()> {
    if tau.order() < n {
        return Err(Error::Input(format!(
            "return-time series of order {} cannot resolve horizon {n}",
            tau.order()
        )));
    }
    if tau.coeff(0) != 0.0 {
        return Err(Error::Input("return time must be at least 1".into()));
    }
    Ok(())
}

/// `P(τ_1 + … + τ_k ≤ n)` by binary powering of the truncated p.m.f.
pub fn renewal_tail(tau: &SeriesPoly, n: usize, k: usize) -> Result<f64> {
    check_tau(tau, n)?;
    if k == 0 {
        return Ok(1.0);
    }
    let mut base = tau.truncate(n);
    let mut acc: Option<SeriesPoly> = None;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a.mul_trunc(&base, n),
            });
        }
        e >>= 1;
        if e > 0 {
            base = base.mul_trunc(&base, n);
        }
    }
    let total: f64 = acc.expect("k > 0").coeffs().iter().sum();
    Ok(total.min(1.0))
}

/// [`renewal_tail`] for every `k ≤ kmax` at once.
pub fn renewal_tail_table(tau: &SeriesPoly, n: usize, kmax: usize) -> Result<TailTable> {
    check_tau(tau, n)?;
    let kmax = kmax.min(n);
    let base = tau.truncate(n);
    let mut power = SeriesPoly::from_vec({
        let mut c = vec![0.0; n + 1];
        c[0] = 1.0;
        c
    });
    let mut entries = Vec::with_capacity(kmax + 1);
    entries.push(1.0);
    for _ in 1..=kmax {
        power = power.mul_trunc(&base, n);
        entries.push(power.coeffs().iter().sum::<f64>().min(1.0));
    }
    Ok(TailTable {
        n,
        entries,
        provenance: Provenance::Renewal,
        error_bound: 0.0,
        truncated_mass: 0.0,
        intervals: None,
    })
}

/// Renewal route for a law: the oracle law's `τ` p.m.f., then
/// [`renewal_tail_table`].
pub fn renewal_distribution(law: &IncrementLaw, n: usize, kmax: usize) -> Result<TailTable> {
    let (law, moved) = oracle_law(law)?;
    let tau = tau_pmf(&law, n)?;
    let mut table = renewal_tail_table(&tau, n, kmax)?;
    table.truncated_mass = moved;
    Ok(table)
}

/// DP route with `level_cap = n`, which is exact.
pub fn dp_distribution(law: &IncrementLaw, n: usize, kmax: usize) -> Result<TailTable> {
    let kernel = build_kernel(law, n)?;
    exact_an_distribution(
        &kernel,
        n,
        &DpConfig {
            kmax: Some(kmax),
            ..DpConfig::default()
        },
    )
}

/// Return probabilities `u_m = P(S̄_m = 0)` and their running sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub u: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Coefficients of `1 / (1 - f₀(s))` through `s^n`:
/// `u_0 = 1`, `u_m = Σ_{j=1}^{m} P(τ = j) u_{m-j}`.
pub fn return_prob_partial_sums(law: &IncrementLaw, n: usize) -> Result<ReturnSeries> {
    let n = n.max(1);
    let tau = tau_pmf(law, n)?;
    let f = tau.coeffs();
    let mut u = vec![0.0; n + 1];
    u[0] = 1.0;
    for m in 1..=n {
        u[m] = (1..=m).map(|j| f[j] * u[m - j]).sum();
    }
    let u = checked(SeriesPoly::from_vec(u))?.into_coeffs();
    let cumulative = SeriesPoly::from_vec(u.clone()).partial_sums();
    Ok(ReturnSeries { u, cumulative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::LawSpec;
    use crate::rates;
    use proptest::prelude::*;

    fn sym(o: Orientation) -> IncrementLaw {
        IncrementLaw::symmetric(o)
    }

    fn asym(o: Orientation) -> IncrementLaw {
        IncrementLaw::new(
            o,
            LawSpec::Explicit {
                q: 0.4,
                p: vec![0.3, 0.2, 0.1],
            },
        )
        .unwrap()
    }

    fn stable(o: Orientation) -> IncrementLaw {
        IncrementLaw::stable(o, 0.5, 0.5).unwrap()
    }

    /// Brute-force `P(A_n = k)` over all paths of a finite-support law.
    fn enumerate(law: &IncrementLaw, n: usize) -> Vec<f64> {
        let support = law.support_len().unwrap();
        let sign = match law.orientation() {
            Orientation::Right => 1i64,
            Orientation::Left => -1,
        };
        let mut steps = vec![(sign, law.q())];
        steps.extend((0..support).map(|k| (-sign * k as i64, law.p(k))));
        let mut out = vec![0.0; n + 1];
        let mut stack = vec![(0usize, 0i64, 0i64, 0usize, 1.0f64)];
        while let Some((t, s, m, a, pr)) = stack.pop() {
            if t == n {
                out[a] += pr;
                continue;
            }
            for &(dx, p) in &steps {
                if p > 0.0 {
                    let s2 = s + dx;
                    let rec = usize::from(s2 >= m);
                    stack.push((t + 1, s2, m.max(s2), a + rec, pr * p));
                }
            }
        }
        out
    }

    #[test]
    fn kernel_row_examples() {
        let r = build_kernel(&sym(Orientation::Right), 10).unwrap();
        let row0 = r.row(0);
        assert_eq!(row0.entries, vec![(0, 0.5), (1, 0.5)]);
        let row3 = r.row(3);
        assert_eq!(row3.entries, vec![(2, 0.5), (4, 0.5)]);
        let l = build_kernel(&sym(Orientation::Left), 10).unwrap();
        assert_eq!(l.row(0).entries, vec![(0, 0.5), (1, 0.5)]);
        assert!(build_kernel(&sym(Orientation::Left), 0).is_err());
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        for o in [Orientation::Right, Orientation::Left] {
            for law in [sym(o), asym(o), stable(o)] {
                let k = build_kernel(&law, 40).unwrap();
                for i in 0..=40 {
                    assert!((k.row(i).total() - 1.0).abs() < 1e-14, "{o} row {i}");
                }
            }
        }
    }

    #[test]
    fn left_kernel_matches_definition() {
        let k = build_kernel(&asym(Orientation::Left), 5).unwrap();
        let row = k.row(2);
        assert!((row.prob(3) - 0.4).abs() < 1e-15);
        assert!((row.prob(2) - 0.3).abs() < 1e-15);
        assert!((row.prob(1) - 0.2).abs() < 1e-15);
        assert!((row.prob(0) - 0.1).abs() < 1e-15);
        assert!((k.row(5).overflow - 0.4).abs() < 1e-15);
    }

    #[test]
    fn dp_small_examples() {
        let law = sym(Orientation::Right);
        let t1 = dp_distribution(&law, 1, 1).unwrap();
        assert_eq!(t1.entries, vec![1.0, 0.5]);
        let t2 = dp_distribution(&law, 2, 2).unwrap();
        assert!((t2.tail(2) - 0.25).abs() < 1e-15);
        assert_eq!(t2.error_bound, 0.0);
        let left = dp_distribution(&asym(Orientation::Left), 1, 1).unwrap();
        assert!((left.tail(1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn dp_matches_path_enumeration() {
        for o in [Orientation::Right, Orientation::Left] {
            for law in [sym(o), asym(o)] {
                let n = 9;
                let brute = enumerate(&law, n);
                let table = dp_distribution(&law, n, n).unwrap();
                for k in 0..=n {
                    assert!((table.point(k) - brute[k]).abs() < 1e-13, "{o} k={k} {} {}", table.point(k), brute[k]);
                }
            }
        }
    }

    #[test]
    fn dp_error_bound_is_honest() {
        for o in [Orientation::Right, Orientation::Left] {
            let law = asym(o);
            let n = 40;
            let config = DpConfig::default();
            let small = exact_an_distribution(&build_kernel(&law, 8).unwrap(), n, &config).unwrap();
            let large = exact_an_distribution(&build_kernel(&law, 12).unwrap(), n, &config).unwrap();
            let exact = exact_an_distribution(&build_kernel(&law, n).unwrap(), n, &config).unwrap();
            assert!(small.error_bound > 0.0);
            assert_eq!(exact.error_bound, 0.0);
            for k in 0..=n {
                assert!((small.tail(k) - large.tail(k)).abs() <= small.error_bound + 1e-15);
                assert!((small.tail(k) - exact.tail(k)).abs() <= small.error_bound + 1e-15);
            }
        }
    }

    #[test]
    fn dp_respects_state_budget() {
        let kernel = build_kernel(&sym(Orientation::Right), 100).unwrap();
        let config = DpConfig {
            kmax: None,
            state_budget: 1000,
        };
        assert!(matches!(
            exact_an_distribution(&kernel, 100, &config),
            Err(Error::Memory { .. })
        ));
    }

    #[test]
    fn tau_examples() {
        let tau = tau_pmf(&sym(Orientation::Right), 8).unwrap();
        let want = [0.0, 0.5, 0.25, 0.0, 1.0 / 16.0, 0.0, 1.0 / 32.0];
        for (m, w) in want.iter().enumerate() {
            assert!((tau.coeff(m) - w).abs() < 1e-15, "m={m}");
        }
        for law in [asym(Orientation::Right), stable(Orientation::Right)] {
            let t = tau_pmf(&law, 4).unwrap();
            assert!((t.coeff(1) - (law.q() + law.p0())).abs() < 1e-15);
        }
        for law in [asym(Orientation::Left), stable(Orientation::Left)] {
            let t = tau_pmf(&law, 4).unwrap();
            assert!((t.coeff(1) - (1.0 - law.q())).abs() < 1e-15);
        }
    }

    #[test]
    fn composition_and_division_agree() {
        for o in [Orientation::Right, Orientation::Left] {
            for law in [sym(o), asym(o), stable(o), oracle_law(&stable(o)).unwrap().0] {
                let a = tau_pmf(&law, 150).unwrap();
                let b = tau_pmf_by_division(&law, 150).unwrap();
                for m in 0..=150 {
                    assert!((a.coeff(m) - b.coeff(m)).abs() < 1e-13, "{o} m={m}");
                }
            }
        }
    }

    #[test]
    fn tau_mass_increases_towards_one() {
        let tau = tau_pmf(&sym(Orientation::Right), 4000).unwrap();
        let sums = tau.partial_sums();
        assert!(sums.windows(2).all(|w| w[1] >= w[0]));
        let last = *sums.last().unwrap();
        assert!(last <= 1.0 + 1e-12);
        // 1 - Σ_{m ≤ M} P(τ = m) ~ C / √M
        let d1 = 1.0 - sums[1000];
        let d2 = 1.0 - sums[4000];
        assert!((d1 / d2 - 2.0).abs() < 0.05, "{}", d1 / d2);
    }

    #[test]
    fn tau_generating_function_matches_cumulant() {
        for o in [Orientation::Right, Orientation::Left] {
            for law in [sym(o), asym(o), stable(o)] {
                let tau = tau_pmf(&law, 1000).unwrap();
                for lambda in [-0.05, -0.5, -3.0] {
                    let mgf = tau.eval(f64::exp(lambda));
                    let want = rates::cumulant(&law, lambda).unwrap().exp();
                    // Remaining mass beyond m = 1000 is at most e^{1000 λ}.
                    assert!((mgf - want).abs() < 1e-12 + f64::exp(1000.0 * lambda), "{o} {lambda}");
                }
            }
        }
    }

    #[test]
    fn renewal_examples() {
        let tau = tau_pmf(&sym(Orientation::Right), 30).unwrap();
        for n in [1, 5, 30] {
            let all = renewal_tail(&tau, n, n).unwrap();
            assert!((all - 0.5f64.powi(n as i32)).abs() < 1e-15 * all.max(1e-300) + 1e-300);
        }
        assert_eq!(renewal_tail(&tau, 10, 0).unwrap(), 1.0);
        assert!(renewal_tail(&tau, 31, 1).is_err());
        let one = renewal_tail(&tau, 30, 1).unwrap();
        assert!((one - tau.partial_sums()[30]).abs() < 1e-15);
    }

    #[test]
    fn renewal_table_matches_powering() {
        let tau = tau_pmf(&asym(Orientation::Left), 50).unwrap();
        let table = renewal_tail_table(&tau, 50, 50).unwrap();
        for k in [0, 1, 7, 25, 50] {
            assert!((table.tail(k) - renewal_tail(&tau, 50, k).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn dp_and_renewal_agree() {
        for o in [Orientation::Right, Orientation::Left] {
            for law in [sym(o), asym(o), stable(o)] {
                let n = 30;
                let dp = dp_distribution(&law, n, n).unwrap();
                let rn = renewal_distribution(&law, n, n).unwrap();
                for k in 0..=n {
                    assert!((dp.tail(k) - rn.tail(k)).abs() < 1e-12, "{o} k={k}");
                }
            }
        }
    }

    #[test]
    fn return_probability_examples() {
        let r = return_prob_partial_sums(&sym(Orientation::Right), 10).unwrap();
        assert_eq!(r.u[0], 1.0);
        assert!((r.u[1] - 0.5).abs() < 1e-15);
        assert!((r.u[2] - 0.5).abs() < 1e-15);
        assert!(r.u.iter().all(|&v| v >= 0.0));
        assert!((r.cumulative[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn table_serializes() {
        let t = dp_distribution(&sym(Orientation::Right), 3, 3).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.contains("\"provenance\":\"dp\""));
        let back: TailTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn tails_are_monotone_probabilities(n in 1usize..40, right in any::<bool>()) {
            let o = if right { Orientation::Right } else { Orientation::Left };
            let t = dp_distribution(&asym(o), n, n).unwrap();
            prop_assert_eq!(t.entries[0], 1.0);
            prop_assert!(t.entries.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(t.entries.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
