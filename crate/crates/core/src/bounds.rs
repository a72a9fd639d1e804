//! Bounds on the quenched slope and on the critical curve: the fractional
//! moment bound, the tilted strategy, the `f_α` functional and the entropy
//! reduction at the annealed critical point.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annealed::{annealed_critical_h, WordDistribution, WordSpace};
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::numerics::{bisect, log_sum_exp, norm_cdf, softplus, Rule};

static LEGENDRE_16: OnceLock<Rule> = OnceLock::new();

/// `f_α(z) = {½(1 + z^α)}^{1/α}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FAlpha {
    pub alpha: f64,
}

impl FAlpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("f_alpha needs alpha > 1 (got {alpha})")));
        }
        Ok(FAlpha { alpha })
    }

    pub fn value(&self, z: f64) -> f64 {
        self.log_value(z.ln()).exp()
    }

    /// `log f_α(e^u)`.
    pub fn log_value(&self, u: f64) -> f64 {
        (softplus(self.alpha * u) - std::f64::consts::LN_2) / self.alpha
    }

    /// `f_α(e^u) − 1` without cancellation near `u = 0`.
    pub fn excess(&self, u: f64) -> f64 {
        self.log_value(u).exp_m1()
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let a = self.alpha;
        0.5f64.powf(1.0 / a) * (1.0 + z.powf(a)).powf(1.0 / a - 1.0) * z.powf(a - 1.0)
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        let a = self.alpha;
        0.5f64.powf(1.0 / a) * (1.0 + z.powf(a)).powf(1.0 / a - 2.0) * z.powf(a - 2.0) * (a - 1.0)
    }

    /// `2^{1−1/α}`, the cap on `E f_α(Z)` when `E Z ≤ 1`.
    pub fn cap(&self) -> f64 {
        2f64.powf(1.0 - 1.0 / self.alpha)
    }

    /// `E f_α(e^{a + sX}) − 1` for standard normal `X`.
    pub fn lognormal_excess(&self, a: f64, s: f64, hermite: &Rule) -> f64 {
        self.lognormal_excess_shifted(a, s, a + 0.5 * s * s, hermite)
    }

    /// As [`FAlpha::lognormal_excess`] with `shift = a + s²/2 = log E Z`
    /// supplied by the caller, which avoids cancellation when both terms
    /// are large.
    pub fn lognormal_excess_shifted(&self, a: f64, s: f64, shift: f64, hermite: &Rule) -> f64 {
        if s <= 1.0 {
            return hermite.apply(|x| self.excess(a + s * x));
        }
        // f_α(z) = 2^{−1/α} max(1, z) r(|log z|), r(t) = (1 + e^{−αt})^{1/α};
        // E max(1, Z) is explicit and the remainder has a smooth integrand.
        let alpha = self.alpha;
        let max_part = if shift > 700.0 {
            f64::INFINITY
        } else {
            shift.exp() * norm_cdf((shift + 0.5 * s * s) / s) - norm_cdf(a / s)
        };
        if !max_part.is_finite() {
            return f64::INFINITY;
        }
        let r_minus_one = |t: f64| ((-alpha * t).exp().ln_1p() / alpha).exp_m1();
        let log_norm = -(s * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let weight = |t: f64| {
            let below = log_norm - (t + a).powi(2) / (2.0 * s * s);
            let above = shift + log_norm - (t - shift - 0.5 * s * s).powi(2) / (2.0 * s * s);
            below.exp() + above.exp()
        };
        let legendre = LEGENDRE_16.get_or_init(|| Rule::legendre(16));
        let top = 45.0 / alpha;
        let pieces = (top / 0.5).ceil() as usize;
        let width = top / pieces as f64;
        let mut rest = 0.0;
        for i in 0..pieces {
            let lo = i as f64 * width;
            rest += legendre.integrate(lo, lo + width, |t| r_minus_one(t) * weight(t));
        }
        let c = 0.5f64.powf(1.0 / alpha);
        // 2^{−1/α}(1 + max_part + rest) − 1
        c * (max_part + rest) + (c - 1.0)
    }
}

/// `((1−t)/t) log 2 + (1/t) log Σ_m e^{−gtm} ρ(m)^t`, an upper bound on
/// `S^que(β, h_c^ann(βt); g)`; `+∞` when the series diverges.
pub fn fractional_moment_bound(t: f64, g: f64, law: &ExcursionLaw) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) || !(g >= 0.0) {
        return Err(Error::Domain(format!("need t in (0, 1] and g ≥ 0 (got t={t}, g={g})")));
    }
    let series = law.series(g * t, t, 0.0);
    if !series.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - t) / t * std::f64::consts::LN_2 + series.ln() / t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedStrategy {
    /// `αM(2β/α) − 2βh`.
    pub rate: f64,
    /// `h(ν_{β/α} | ν_β)`.
    pub entropy_to_tilted: f64,
    /// `h(ν_{β/α} | ν)`.
    pub entropy_to_base: f64,
    /// `h(ν_{β/α}|ν_β) + (α−1)h(ν_{β/α}|ν) − [M(2β) − αM(2β/α)]`.
    pub identity_residual: f64,
}

/// Tilted letter laws `ν_λ ∝ e^{−λx}ν`, with `ν_β` meaning `λ = 2β`.
pub fn tilted_strategy_rate(beta: f64, h: f64, model: &DisorderModel, alpha: f64) -> TiltedStrategy {
    let mu = 2.0 * beta / alpha;
    let rate = alpha * model.cumulant(mu) - 2.0 * beta * h;
    let entropy_to_tilted = model.tilted_relative_entropy(mu, 2.0 * beta);
    let entropy_to_base = model.tilted_relative_entropy(mu, 0.0);
    let target = model.cumulant(2.0 * beta) - alpha * model.cumulant(mu);
    TiltedStrategy {
        rate,
        entropy_to_tilted,
        entropy_to_base,
        identity_residual: entropy_to_tilted + (alpha - 1.0) * entropy_to_base - target,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FAlphaOptions {
    pub hermite_order: usize,
    /// Lengths up to here are summed one by one.
    pub m_cut: usize,
    /// Ratio between consecutive block edges beyond `m_cut`.
    pub block_ratio: f64,
}

impl Default for FAlphaOptions {
    fn default() -> Self {
        FAlphaOptions { hermite_order: 64, m_cut: 4096, block_ratio: 1.02 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FAlphaBound {
    /// `𝒩̂ − 1`.
    pub excess: f64,
    /// `𝒩̂(β,h) = Σ_m ρ(m) E f_α(Z_m)`.
    pub normalizer: f64,
    /// `α log 𝒩̂`, a lower bound on `S*^que(β,h)`.
    pub bound: f64,
}

/// Per-length `E f_α(Z_m) − 1` with `Z_m = e^{−μ(hm + S_m)}`, `μ = 2β/α`.
struct LengthExcess<'a> {
    f: FAlpha,
    mu: f64,
    h: f64,
    model: &'a DisorderModel,
    hermite: Rule,
    log_factorial: Vec<f64>,
    lattice: Option<LatticeSums>,
}

/// Letter-sum laws of a lattice letter law, built by convolution.
struct LatticeSums {
    a0: f64,
    step: f64,
    dists: Vec<Vec<f64>>,
}

impl<'a> LengthExcess<'a> {
    fn new(f: FAlpha, beta: f64, h: f64, model: &'a DisorderModel, m_top: usize, opts: FAlphaOptions) -> Result<Self> {
        let mu = 2.0 * beta / f.alpha;
        let mut log_factorial = Vec::new();
        let mut lattice = None;
        match model {
            DisorderModel::Binary => {
                log_factorial = (0..=m_top).map(|k| libm::lgamma(k as f64 + 1.0)).collect();
            }
            DisorderModel::Gaussian => {}
            DisorderModel::Discrete { .. } => {
                let (a0, step) = model
                    .lattice()
                    .ok_or_else(|| Error::BadDisorder("the f_alpha functional needs equally spaced atoms".into()))?;
                let (atoms, weights) = model.atoms().expect("discrete");
                let idx: Vec<usize> = atoms.iter().map(|a| ((a - a0) / step).round() as usize).collect();
                let width = idx.iter().copied().max().unwrap_or(0);
                let mut dists = vec![vec![0.0]];
                for _ in 1..=opts.m_cut.min(m_top) {
                    let prev = dists.last().expect("nonempty");
                    let mut next = vec![f64::NEG_INFINITY; prev.len() + width];
                    for (j, slot) in next.iter_mut().enumerate() {
                        *slot = log_sum_exp(
                            idx.iter()
                                .zip(&weights)
                                .filter(|(k, _)| **k <= j && j - **k < prev.len())
                                .map(|(k, w)| prev[j - k] + w.ln()),
                        );
                    }
                    dists.push(next);
                }
                lattice = Some(LatticeSums { a0, step, dists });
            }
        }
        Ok(LengthExcess { f, mu, h, model, hermite: Rule::hermite(opts.hermite_order), log_factorial, lattice })
    }

    fn term(&self, log_p: f64, u: f64) -> f64 {
        let lf = self.f.log_value(u);
        if lf < 1.0 {
            log_p.exp() * lf.exp_m1()
        } else {
            (log_p + lf).exp() - log_p.exp()
        }
    }

    fn at(&self, m: usize) -> f64 {
        let mf = m as f64;
        match self.model {
            DisorderModel::Gaussian => {
                let shift = self.mu * mf * (0.5 * self.mu - self.h);
                self.f.lognormal_excess_shifted(-self.mu * self.h * mf, self.mu * mf.sqrt(), shift, &self.hermite)
            }
            DisorderModel::Binary => {
                let lf = &self.log_factorial;
                let base = lf[m] - mf * std::f64::consts::LN_2;
                (0..=m)
                    .map(|k| {
                        let s = mf - 2.0 * k as f64;
                        self.term(base - lf[k] - lf[m - k], -self.mu * (self.h * mf + s))
                    })
                    .sum()
            }
            DisorderModel::Discrete { .. } => {
                let lat = self.lattice.as_ref().expect("lattice sums");
                let m = m.min(lat.dists.len() - 1);
                lat.dists[m]
                    .iter()
                    .enumerate()
                    .filter(|(_, lp)| lp.is_finite())
                    .map(|(j, lp)| {
                        let s = m as f64 * lat.a0 + j as f64 * lat.step;
                        self.term(*lp, -self.mu * (self.h * m as f64 + s))
                    })
                    .sum()
            }
        }
    }
}

/// `𝒩̂(β,h)` and the lower bound `α log 𝒩̂`. Infinite below
/// `h_c^ann(β/α)`, where `E Z_m` grows geometrically.
pub fn falpha_lower_functional(
    beta: f64,
    h: f64,
    model: &DisorderModel,
    law: &ExcursionLaw,
    alpha: f64,
    opts: FAlphaOptions,
) -> Result<FAlphaBound> {
    let f = FAlpha::new(alpha)?;
    if beta == 0.0 {
        return Ok(FAlphaBound { excess: 0.0, normalizer: 1.0, bound: 0.0 });
    }
    let threshold = annealed_critical_h(beta / alpha, model);
    if h < threshold * (1.0 - 1e-14) {
        return Ok(FAlphaBound { excess: f64::INFINITY, normalizer: f64::INFINITY, bound: f64::INFINITY });
    }
    let p = law.period();
    let m_max = law.m_max();
    let eval = LengthExcess::new(f, beta, h, model, m_max, opts)?;
    let probs = law.probs();
    let mut excess = 0.0;
    let cut = opts.m_cut.min(m_max);
    for m in (p..=cut).step_by(p) {
        if probs[m] > 0.0 {
            excess += probs[m] * eval.at(m);
        }
    }
    // blocks of lengths beyond the cut share one evaluation each
    let mut lo = cut + 1;
    let mut last = if cut >= p { eval.at(cut - cut % p) } else { 0.0 };
    while lo <= m_max {
        let hi = (((lo as f64) * opts.block_ratio).ceil() as usize).max(lo + p).min(m_max + 1);
        let mass: f64 = probs[lo..hi].iter().sum();
        if mass > 0.0 {
            let mid = ((lo as f64 * hi as f64).sqrt() as usize).clamp(lo, hi - 1);
            let rep = (mid / p).max(1) * p;
            last = eval.at(rep.min(m_max));
            excess += mass * last;
        }
        lo = hi;
    }
    excess += law.tail_mass() * last;
    let normalizer = 1.0 + excess;
    Ok(FAlphaBound { excess, normalizer, bound: alpha * excess.ln_1p() })
}

/// Root in `h` of `α log 𝒩̂(β,h)`, searched above `h_c^ann(β/α)`.
pub fn falpha_critical_h(
    beta: f64,
    model: &DisorderModel,
    law: &ExcursionLaw,
    alpha: f64,
    opts: FAlphaOptions,
) -> Result<f64> {
    let lo = annealed_critical_h(beta / alpha, model);
    let f = |h: f64| falpha_lower_functional(beta, h, model, law, alpha, opts).map(|b| b.excess);
    let mut hi = lo.max(1e-3) * 2.0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoBracket { lo, hi });
        }
    }
    bisect(|h| f(h).unwrap_or(f64::NAN), lo, hi, 1e-10, 200)
}

/// `h(½ν + ½ν_β | ν)`.
pub fn witness_entropy(beta: f64, model: &DisorderModel) -> f64 {
    let m = model.cumulant(2.0 * beta);
    let density = |x: f64| 0.5 * (1.0 + (-2.0 * beta * x - m).exp());
    let xlogx = |d: f64| if d > 0.0 { d * d.ln() } else { 0.0 };
    match model.atoms() {
        Some((atoms, weights)) => atoms.iter().zip(&weights).map(|(a, w)| w * xlogx(density(*a))).sum(),
        None => Rule::hermite(96).apply(|x| xlogx(density(x))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOptions {
    pub max_len: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions { max_len: 12, restarts: 1000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyGap {
    /// `U(q*) = (α−1) m_{q*} h(½ν + ½ν_β | ν)`.
    pub at_witness: f64,
    pub witness_entropy: f64,
    pub witness_mean_length: f64,
    /// Smallest `U` found over the search family.
    pub best: f64,
    /// Tilt coefficients of `σ`, `τ` and `σ²/τ` at the best point.
    pub best_params: [f64; 3],
    /// Restarts that ended at `U ≤ 0`.
    pub nonpositive: usize,
}

/// `U(q) = h(q | q*) + (α−1) m_q h(π₁ψ_q | ν)` at `h = h_c^ann(β)` on a
/// truncated word space, minimized over `q ∝ q* e^{θ₁σ + θ₂τ + θ₃σ²/τ}`.
/// The minimum over the family bounds the true infimum from above.
pub fn entropy_reduction_gap(beta: f64, model: &DisorderModel, law: &ExcursionLaw, opts: GapOptions) -> Result<EntropyGap> {
    if !(beta > 0.0) {
        return Err(Error::Domain("the entropy gap needs beta > 0".into()));
    }
    let alpha = law.alpha();
    let space = WordSpace::new(model, law, opts.max_len)?;
    let hc = annealed_critical_h(beta, model);
    let star = space.gibbs_maximizer(&space.reference(false), beta, hc, 0.0);
    let log_star: Vec<f64> = star.probs.iter().map(|p| p.ln()).collect();
    let weights = space.letter_weights();
    let u = |q: &WordDistribution| {
        let marginal = space.letter_marginal(q);
        let letter_entropy: f64 =
            marginal.iter().zip(&weights).filter(|(p, _)| **p > 0.0).map(|(p, w)| p * (p / w).ln()).sum();
        WordSpace::relative_entropy(q, &log_star) + (alpha - 1.0) * space.mean_length(q) * letter_entropy
    };
    let family = |theta: &[f64; 3]| {
        let logs: Vec<f64> = space
            .cells
            .iter()
            .zip(&log_star)
            .map(|(c, l)| {
                let t = c.len as f64;
                l + theta[0] * c.sum + theta[1] * t + theta[2] * c.sum * c.sum / t
            })
            .collect();
        let z = log_sum_exp(logs.iter().copied());
        WordDistribution { probs: logs.iter().map(|l| (l - z).exp()).collect() }
    };
    let at_witness = u(&star);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = at_witness;
    let mut best_params = [0.0; 3];
    let mut nonpositive = 0;
    for restart in 0..opts.restarts {
        let mut theta = if restart == 0 {
            [0.0; 3]
        } else {
            [rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(-0.2..0.2)]
        };
        let mut value = u(&family(&theta));
        let mut step = 0.25;
        while step > 1e-7 {
            let mut improved = false;
            for i in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut trial = theta;
                    trial[i] += sign * step;
                    let v = u(&family(&trial));
                    if v < value {
                        theta = trial;
                        value = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if value <= 0.0 {
            nonpositive += 1;
        }
        if value < best {
            best = value;
            best_params = theta;
        }
    }
    Ok(EntropyGap {
        at_witness,
        witness_entropy: witness_entropy(beta, model),
        witness_mean_length: space.mean_length(&star),
        best,
        best_params,
        nonpositive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn srw() -> ExcursionLaw {
        ExcursionLaw::srw(200_000).unwrap()
    }

    #[test]
    fn falpha_shape() {
        for alpha in [1.2, 1.5, 3.0] {
            let f = FAlpha::new(alpha).unwrap();
            assert!((f.value(1.0) - 1.0).abs() < 1e-15);
            let mut prev = 0.0;
            for i in 0..=1000 {
                let z = 0.01 + i as f64 * 0.01;
                let v = f.value(z);
                assert!(v > prev);
                prev = v;
                let eps = 1e-5 * z.max(0.1);
                let d1 = (f.value(z + eps) - f.value(z - eps)) / (2.0 * eps);
                assert!((d1 - f.derivative(z)).abs() < 1e-6, "alpha={alpha} z={z}");
                let d2 = (f.derivative(z + eps) - f.derivative(z - eps)) / (2.0 * eps);
                assert!((d2 - f.second_derivative(z)).abs() < 1e-6 * f.second_derivative(z).max(1.0));
                assert!(f.second_derivative(z) >= 0.0);
            }
        }
        assert!(FAlpha::new(1.0).is_err());
    }

    #[test]
    fn lognormal_excess_methods_agree() {
        // the split formula against adaptive Simpson in the standard normal variable
        let fine = Rule::hermite(64);
        for alpha in [1.2, 1.5, 3.0] {
            let f = FAlpha::new(alpha).unwrap();
            for s in [1.2, 1.6, 2.0] {
                for a in [-0.5 * s * s, -s * s, 0.3] {
                    let split = f.lognormal_excess(a, s, &fine);
                    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                    let direct =
                        crate::numerics::adaptive_simpson(&|x: f64| density(x) * f.excess(a + s * x), -40.0, 40.0, 1e-13, 60).0;
                    assert!((split - direct).abs() < 1e-9, "alpha={alpha} s={s} a={a}: {split} vs {direct}");
                }
            }
        }
    }

    #[test]
    fn lognormal_excess_large_spread_limit() {
        // E Z = 1 and Z → 0 in probability: E f_α(Z) → 2^{1−1/α}
        let f = FAlpha::new(1.5).unwrap();
        let rule = Rule::hermite(64);
        let s = 60.0;
        let v = f.lognormal_excess(-0.5 * s * s, s, &rule);
        assert!((v - (f.cap() - 1.0)).abs() < 1e-3, "{v}");
        assert!(v <= f.cap() - 1.0 + 1e-12, "{}", v - (f.cap() - 1.0));
    }

    #[test]
    fn fractional_moment_examples() {
        let law = srw();
        assert!(fractional_moment_bound(1.0, 0.0, &law).unwrap().abs() < 1e-12);
        assert!(fractional_moment_bound(1.0 / 1.5, 0.0, &law).unwrap().is_infinite());
        assert!(fractional_moment_bound(0.6, 0.0, &law).unwrap().is_infinite());
        assert!(fractional_moment_bound(0.7, 0.0, &law).unwrap().is_finite());
        assert!(fractional_moment_bound(0.5, 0.1, &law).unwrap().is_finite());
        assert!(fractional_moment_bound(0.0, 0.1, &law).is_err());
        // ρ(m) = m^{−3/2}/ζ(3/2): Σ ρ^{0.8} = ζ(1.2)/ζ(3/2)^{0.8}
        let pl = ExcursionLaw::power_law(1.5, 200_000, 1).unwrap();
        let zeta_12: f64 = 5.591582441177751;
        let zeta_15: f64 = 2.612375348685488;
        let exact = 0.25 * std::f64::consts::LN_2 + (zeta_12 / zeta_15.powf(0.8)).ln() / 0.8;
        let got = fractional_moment_bound(0.8, 0.0, &pl).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn tilted_strategy_examples() {
        let b = DisorderModel::Binary;
        for (beta, alpha) in [(1.0, 1.5), (0.25, 3.0), (2.0, 1.2)] {
            let hc = annealed_critical_h(beta / alpha, &b);
            let s = tilted_strategy_rate(beta, hc, &b, alpha);
            assert!(s.rate.abs() < 1e-12);
            assert!(s.identity_residual.abs() < 1e-10);
            assert!(tilted_strategy_rate(beta, hc - 0.01, &b, alpha).rate > 0.0);
        }
        let s = tilted_strategy_rate(1.0, 0.3, &b, 1.5);
        assert!((s.rate - (1.5 * (4f64 / 3.0).cosh().ln() - 0.6)).abs() < 1e-14);
        let g = tilted_strategy_rate(0.7, 0.2, &DisorderModel::Gaussian, 1.5);
        assert!(g.identity_residual.abs() < 1e-12);
        let lg = tilted_strategy_rate(0.7, 0.2, &DisorderModel::lattice_gaussian(21), 1.5);
        assert!(lg.identity_residual.abs() < 1e-10);
    }

    #[test]
    fn falpha_functional_at_lower_curve() {
        let opts = FAlphaOptions::default();
        let laws = [(1.5, srw()), (3.0, ExcursionLaw::power_law(3.0, 200_000, 1).unwrap())];
        for (alpha, law) in &laws {
            let cap = FAlpha::new(*alpha).unwrap().cap();
            for model in [DisorderModel::Binary, DisorderModel::Gaussian] {
                for beta in [0.25, 1.0] {
                    let h = annealed_critical_h(beta / alpha, &model);
                    let b = falpha_lower_functional(beta, h, &model, law, *alpha, opts).unwrap();
                    assert!(b.bound > 0.0, "{model:?} beta={beta} alpha={alpha}");
                    assert!(b.normalizer <= cap);
                    let below = falpha_lower_functional(beta, h - 0.01, &model, law, *alpha, opts).unwrap();
                    assert!(below.bound.is_infinite());
                }
            }
        }
    }

    #[test]
    fn falpha_functional_small_beta() {
        let law = srw();
        let opts = FAlphaOptions { m_cut: 512, ..Default::default() };
        let mut prev = f64::INFINITY;
        for beta in [0.2, 0.05, 0.01] {
            let h = annealed_critical_h(beta / 1.5, &DisorderModel::Binary);
            let b = falpha_lower_functional(beta, h, &DisorderModel::Binary, &law, 1.5, opts).unwrap();
            assert!(b.excess > 0.0 && b.excess < prev);
            prev = b.excess;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn falpha_binary_matches_small_direct_sum() {
        // a custom law on {2, 4} makes 𝒩̂ a four-term binomial sum
        let law = ExcursionLaw::custom(vec![0.0, 0.6, 0.0, 0.4], 2, 1.5).unwrap();
        let (beta, h, alpha) = (0.8, 0.5, 1.5);
        let f = FAlpha::new(alpha).unwrap();
        let mu = 2.0 * beta / alpha;
        let e = |m: usize| -> f64 {
            (0..=m)
                .map(|k| {
                    let c = (1..=k).map(|i| (m - k + i) as f64 / i as f64).product::<f64>();
                    c * 0.5f64.powi(m as i32) * f.value((-mu * (h * m as f64 + m as f64 - 2.0 * k as f64)).exp())
                })
                .sum()
        };
        let direct = 0.6 * e(2) + 0.4 * e(4);
        let b = falpha_lower_functional(beta, h, &DisorderModel::Binary, &law, alpha, FAlphaOptions::default()).unwrap();
        assert!((b.normalizer - direct).abs() < 1e-14);
    }

    #[test]
    fn falpha_discrete_lattice_matches_binary() {
        let law = ExcursionLaw::srw(600).unwrap();
        let opts = FAlphaOptions { m_cut: 600, ..Default::default() };
        let disc = DisorderModel::discrete(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let h = annealed_critical_h(0.5 / 1.5, &disc) + 0.05;
        let a = falpha_lower_functional(0.5, h, &disc, &law, 1.5, opts).unwrap();
        let b = falpha_lower_functional(0.5, h, &DisorderModel::Binary, &law, 1.5, opts).unwrap();
        assert!((a.excess - b.excess).abs() < 1e-10);
    }

    #[test]
    fn falpha_curve_lies_in_the_sandwich() {
        let law = srw();
        let opts = FAlphaOptions { m_cut: 1024, ..Default::default() };
        for beta in [0.5, 1.0] {
            let b = DisorderModel::Binary;
            let root = falpha_critical_h(beta, &b, &law, 1.5, opts).unwrap();
            assert!(root > annealed_critical_h(beta / 1.5, &b));
            assert!(root < annealed_critical_h(beta, &b));
        }
    }

    #[test]
    fn witness_entropy_closed_form() {
        // ½ν + ½ν_β puts mass ½(½ + e^{∓2β}/(2cosh 2β)) on ±1
        let beta = 1.0f64;
        let c = (2.0 * beta).cosh();
        let p_plus = 0.5 * (0.5 + (-2.0 * beta).exp() / (2.0 * c));
        let p_minus = 1.0 - p_plus;
        let exact = p_plus * (2.0 * p_plus).ln() + p_minus * (2.0 * p_minus).ln();
        assert!((witness_entropy(beta, &DisorderModel::Binary) - exact).abs() < 1e-15);
        assert!(exact > 0.0);
        let mut prev = f64::INFINITY;
        for beta in [0.1, 0.01, 0.001] {
            let w = witness_entropy(beta, &DisorderModel::Gaussian);
            assert!(w > 0.0 && w < prev);
            prev = w;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn entropy_gap_is_positive() {
        let law = srw();
        let opts = GapOptions { restarts: 1000, ..Default::default() };
        let gap = entropy_reduction_gap(1.0, &DisorderModel::Binary, &law, opts).unwrap();
        let expect = 0.5 * gap.witness_mean_length * gap.witness_entropy;
        assert!((gap.at_witness - expect).abs() < 1e-12, "{} vs {expect}", gap.at_witness);
        assert!(gap.best > 0.0 && gap.best <= gap.at_witness);
        assert_eq!(gap.nonpositive, 0);
        let small = entropy_reduction_gap(0.05, &DisorderModel::Binary, &law, GapOptions { restarts: 20, ..opts }).unwrap();
        assert!(small.at_witness < gap.at_witness);
    }

    proptest! {
        #[test]
        fn falpha_is_convex_and_capped(alpha in 1.05f64..4.0, z1 in 0.0f64..20.0, z2 in 0.0f64..20.0) {
            let f = FAlpha::new(alpha).unwrap();
            let mid = f.value(0.5 * (z1 + z2));
            prop_assert!(mid <= 0.5 * (f.value(z1) + f.value(z2)) + 1e-12);
            prop_assert!(f.value(z1) <= 0.5f64.powf(1.0 / alpha) * (1.0 + z1) + 1e-12);
        }
    }
}
