//! Excursion-length laws ρ on `p·ℕ`, truncated at `m_max`, with an analytic
//! description of the discarded tail, and the exponential tilts
//! `ρ_g(m) = e^{−gm} ρ(m) / 𝒩(g)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, ols};

pub const DEFAULT_M_MAX: usize = 200_000;

/// Reproducible description of a law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Srw { m_max: usize },
    PowerLaw { alpha: f64, period: usize, m_max: usize },
    /// `probabilities[i]` is ρ(i+1).
    Custom { alpha: f64, period: usize, probabilities: Vec<f64> },
}

impl LawSpec {
    pub fn build(&self) -> Result<ExcursionLaw> {
        match self {
            LawSpec::Srw { m_max } => ExcursionLaw::srw(*m_max),
            LawSpec::PowerLaw { alpha, period, m_max } => ExcursionLaw::power_law(*alpha, *m_max, *period),
            LawSpec::Custom { alpha, period, probabilities } => {
                ExcursionLaw::custom(probabilities.clone(), *period, *alpha)
            }
        }
    }
}

/// `ρ(m) ≈ amp · m^{−α} (1 + corr/m)` on the lattice beyond `m_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct TailModel {
    amp: f64,
    corr: f64,
}

#[derive(Clone, Debug)]
pub struct ExcursionLaw {
    spec: LawSpec,
    alpha: f64,
    period: usize,
    m_max: usize,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    tail_mass: f64,
    tail: Option<TailModel>,
    survival: Vec<f64>,
}

/// Exponentially tilted law.
#[derive(Clone, Debug)]
pub struct TiltedLaw {
    pub g: f64,
    pub log_normalizer: f64,
    /// `log ρ_g(m)` for `m = 0..=m_max` (`−∞` off the support).
    pub log_probs: Vec<f64>,
    /// Mass of the tilted law beyond `m_max`.
    pub tail_mass: f64,
    /// `e^{−g m_max} / (1 − e^{−g})`.
    pub truncation_bound: f64,
}

/// Neumaier compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }
    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// `Σ_{j>J} (p j)^{−s} e^{−r p j}` for `s > 1` or `r > 0`.
pub fn lattice_tail(j0: usize, p: usize, s: f64, r: f64) -> f64 {
    let pf = p as f64;
    let term = |j: f64| (pf * j).powf(-s) * (-r * pf * j).exp();
    let mut acc = CompensatedSum::default();
    let mut j = j0 as f64;
    if r > 0.0 {
        // Direct summation while the exponential factor is doing the work.
        for _ in 0..200_000 {
            j += 1.0;
            let t = term(j);
            acc.add(t);
            if t <= 1e-18 * acc.value() || t == 0.0 {
                return acc.value();
            }
        }
    } else if s <= 1.0 {
        return f64::INFINITY;
    }
    // Euler–Maclaurin from x = j for the remainder Σ_{i>j}.
    let x = j;
    let f = term(x);
    let d = -s / x - r * pf;
    let f1 = f * d;
    let f3 = f * (d * d * d + 3.0 * d * s / (x * x) - 2.0 * s / (x * x * x));
    let integral = if r == 0.0 {
        (pf * x).powf(1.0 - s) / (pf * (s - 1.0))
    } else {
        upper_power_exp_integral(pf * x, s, r) / pf
    };
    acc.add(integral - 0.5 * f - f1 / 12.0 + f3 / 720.0);
    acc.value()
}

/// `∫_a^∞ u^{−s} e^{−r u} du` for `r > 0`.
fn upper_power_exp_integral(a: f64, s: f64, r: f64) -> f64 {
    // u = a e^t
    let ra = r * a;
    let g = |t: f64| ((1.0 - s) * t - ra * (t.exp() - 1.0)).exp();
    let mut hi = 1.0;
    while (1.0 - s) * hi - ra * (hi.exp() - 1.0) > -60.0 {
        hi *= 2.0;
    }
    let (v, _) = adaptive_simpson(&g, 0.0, hi, 1e-15, 50);
    a.powf(1.0 - s) * (-ra).exp() * v
}

impl ExcursionLaw {
    /// First-return law of simple random walk:
    /// `ρ(2m) = C(2m, m) 4^{−m} / (2m − 1)`.
    pub fn srw(m_max: usize) -> Result<Self> {
        if m_max < 2 {
            return Err(Error::BadExcursionLaw("m_max must be at least 2".into()));
        }
        let m_max = m_max - m_max % 2;
        let mut probs = vec![0.0; m_max + 1];
        let mut log_u = CompensatedSum::default();
        for j in 1..=m_max / 2 {
            // u(2j) = u(2j−2)(1 − 1/(2j))
            log_u.add((-1.0 / (2.0 * j as f64)).ln_1p());
            probs[2 * j] = (log_u.value() - (2.0 * j as f64 - 1.0).ln()).exp();
        }
        let tail_mass = log_u.value().exp();
        let tail = TailModel { amp: (2.0 / std::f64::consts::PI).sqrt(), corr: 0.75 };
        Ok(Self::assemble(LawSpec::Srw { m_max }, 1.5, 2, probs, tail_mass, Some(tail)))
    }

    /// `ρ(m) ∝ m^{−α}` on `period·ℕ`, normalized over the whole lattice.
    pub fn power_law(alpha: f64, m_max: usize, period: usize) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::BadExcursionLaw(format!("power law needs alpha > 1 (got {alpha})")));
        }
        if period == 0 || m_max < period {
            return Err(Error::BadExcursionLaw("need period ≥ 1 and m_max ≥ period".into()));
        }
        let m_max = m_max - m_max % period;
        let jmax = m_max / period;
        let mut head = CompensatedSum::default();
        for j in (1..=jmax).rev() {
            head.add(((period * j) as f64).powf(-alpha));
        }
        let tail_raw = lattice_tail(jmax, period, alpha, 0.0);
        let z = head.value() + tail_raw;
        let mut probs = vec![0.0; m_max + 1];
        for j in 1..=jmax {
            probs[period * j] = ((period * j) as f64).powf(-alpha) / z;
        }
        let spec = LawSpec::PowerLaw { alpha, period, m_max };
        Ok(Self::assemble(spec, alpha, period, probs, tail_raw / z, Some(TailModel { amp: 1.0 / z, corr: 0.0 })))
    }

    /// A law given by its probabilities `ρ(1), …, ρ(m_max)`; missing mass is
    /// kept as `tail_mass` with no analytic tail.
    pub fn custom(probabilities: Vec<f64>, period: usize, alpha: f64) -> Result<Self> {
        if period == 0 || probabilities.is_empty() {
            return Err(Error::BadExcursionLaw("empty law or zero period".into()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::BadExcursionLaw("negative probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::BadExcursionLaw(format!("total mass {total} exceeds 1")));
        }
        for (i, p) in probabilities.iter().enumerate() {
            if *p > 0.0 && (i + 1) % period != 0 {
                return Err(Error::BadExcursionLaw(format!("mass at {} off the period lattice", i + 1)));
            }
        }
        let mut probs = vec![0.0];
        probs.extend_from_slice(&probabilities);
        let spec = LawSpec::Custom { alpha, period, probabilities };
        Ok(Self::assemble(spec, alpha, period, probs, (1.0 - total).max(0.0), None))
    }

    fn assemble(
        spec: LawSpec,
        alpha: f64,
        period: usize,
        probs: Vec<f64>,
        tail_mass: f64,
        tail: Option<TailModel>,
    ) -> Self {
        let m_max = probs.len() - 1;
        let log_probs = probs.iter().map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect();
        let mut survival = vec![0.0; m_max + 1];
        let mut acc = CompensatedSum::default();
        acc.add(tail_mass);
        survival[m_max] = tail_mass;
        for l in (0..m_max).rev() {
            acc.add(probs[l + 1]);
            survival[l] = acc.value();
        }
        ExcursionLaw { spec, alpha, period, m_max, probs, log_probs, tail_mass, tail, survival }
    }

    pub fn spec(&self) -> &LawSpec {
        &self.spec
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn m_max(&self) -> usize {
        self.m_max
    }
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }
    /// `ρ(0..=m_max)`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }
    pub fn has_infinite_support(&self) -> bool {
        self.tail.is_some()
    }

    pub fn prob(&self, m: usize) -> f64 {
        if m <= self.m_max {
            self.probs[m]
        } else if m % self.period != 0 {
            0.0
        } else {
            self.tail.map_or(0.0, |t| t.amp * (m as f64).powf(-self.alpha) * (1.0 + t.corr / m as f64))
        }
    }

    pub fn log_prob(&self, m: usize) -> f64 {
        if m <= self.m_max {
            self.log_probs[m]
        } else {
            self.prob(m).ln()
        }
    }

    /// `ρ̄(l) = Σ_{m>l} ρ(m)`.
    pub fn survival(&self, l: usize) -> f64 {
        if l <= self.m_max {
            self.survival[l]
        } else {
            self.tail_series_from(l / self.period, 0.0, 1.0, 0.0)
        }
    }

    /// `Σ_{m > p·J, m ∈ pℕ} e^{−r m} ρ(m)^t m^k` from the tail model.
    fn tail_series_from(&self, j0: usize, r: f64, t: f64, k: f64) -> f64 {
        match self.tail {
            None => 0.0,
            Some(tm) => {
                let s = self.alpha * t - k;
                let main = lattice_tail(j0, self.period, s, r);
                let corr = if tm.corr != 0.0 { t * tm.corr * lattice_tail(j0, self.period, s + 1.0, r) } else { 0.0 };
                tm.amp.powf(t) * (main + corr)
            }
        }
    }

    /// `Σ_{m>m_max} e^{−r m} ρ(m)^t m^k`, the analytic completion of a series
    /// truncated at `m_max`.
    pub fn tail_series(&self, r: f64, t: f64, k: f64) -> f64 {
        self.tail_series_from(self.m_max / self.period, r, t, k)
    }

    /// `Σ_m e^{−r m} ρ(m)^t m^k` over the whole support (infinite when it
    /// diverges).
    pub fn series(&self, r: f64, t: f64, k: f64) -> f64 {
        if self.tail.is_some() && r == 0.0 && self.alpha * t - k <= 1.0 {
            return f64::INFINITY;
        }
        let mut acc = CompensatedSum::default();
        for m in (1..=self.m_max / self.period).rev().map(|i| i * self.period) {
            let p = self.probs[m];
            if p > 0.0 {
                acc.add((-r * m as f64).exp() * p.powf(t) * (m as f64).powf(k));
            }
        }
        acc.add(self.tail_series(r, t, k));
        acc.value()
    }

    /// `𝒩(g) = Σ_m e^{−gm} ρ(m)`; `+∞` for `g < 0` on infinite support.
    pub fn normalizer(&self, g: f64) -> f64 {
        if g < 0.0 && self.tail.is_some() {
            return f64::INFINITY;
        }
        if g == 0.0 {
            return 1.0 - if self.tail.is_some() { 0.0 } else { self.tail_mass };
        }
        self.series(g, 1.0, 0.0)
    }

    pub fn log_normalizer(&self, g: f64) -> f64 {
        self.normalizer(g).ln()
    }

    /// Tilted law `ρ_g` and `log 𝒩(g)`.
    pub fn tilt(&self, g: f64) -> Result<TiltedLaw> {
        if !(g >= 0.0) {
            return Err(Error::Domain(format!("tilt requires g ≥ 0 (got {g})")));
        }
        let log_normalizer = self.log_normalizer(g);
        let log_probs = self
            .log_probs
            .iter()
            .enumerate()
            .map(|(m, lp)| if lp.is_finite() { lp - g * m as f64 - log_normalizer } else { f64::NEG_INFINITY })
            .collect();
        let tail_mass = if g == 0.0 { self.tail_mass } else { self.tail_series(g, 1.0, 0.0) / log_normalizer.exp() };
        let truncation_bound =
            if g > 0.0 { (-g * self.m_max as f64).exp() / (1.0 - (-g).exp()) } else { f64::INFINITY };
        Ok(TiltedLaw { g, log_normalizer, log_probs, tail_mass, truncation_bound })
    }

    /// Mean excursion length `m_ρ` (infinite for `α ≤ 2`).
    pub fn mean(&self) -> f64 {
        self.series(0.0, 1.0, 1.0)
    }

    /// `ρ(p·i)` for `i = 1..=window/p`, index 0 unused.
    pub fn lattice_kernel(&self, window: usize) -> Vec<f64> {
        let w = window.min(self.m_max) / self.period;
        (0..=w).map(|i| if i == 0 { 0.0 } else { self.probs[i * self.period] }).collect()
    }

    /// Fitted slope of `log ρ(m)` against `log m` over the last decade of the
    /// truncated support.
    pub fn tail_exponent(&self) -> f64 {
        let lo = (self.m_max / 10).max(self.period);
        let step = ((self.m_max - lo) / 2000).max(1) * self.period;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let mut m = lo.div_ceil(self.period) * self.period;
        while m <= self.m_max {
            if self.probs[m] > 0.0 {
                xs.push((m as f64).ln());
                ys.push(self.log_probs[m]);
            }
            m += step;
        }
        -ols(&xs, &ys).slope
    }

    /// `M ρ̄(M) / Σ_{m≤M} m ρ(m)` on a geometric grid of `M` up to `m_max`.
    /// The condition holds when the ratio decreases towards zero.
    pub fn first_moment_ratios(&self, points: usize) -> Vec<(usize, f64)> {
        let mut partial = vec![0.0; self.m_max + 1];
        for m in 1..=self.m_max {
            partial[m] = partial[m - 1] + m as f64 * self.probs[m];
        }
        let lo = (self.m_max / 100).max(self.period) as f64;
        (0..points)
            .map(|i| {
                let frac = i as f64 / (points.max(2) - 1) as f64;
                let m = (lo * (self.m_max as f64 / lo).powf(frac)).round() as usize;
                let m = m.clamp(1, self.m_max);
                (m, m as f64 * self.survival(m) / partial[m])
            })
            .collect()
    }

    /// Boolean form of [`Self::first_moment_ratios`].
    pub fn first_moment_condition(&self) -> bool {
        let r = self.first_moment_ratios(12);
        let decreasing = r.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9));
        decreasing && r.last().map_or(false, |x| x.1 < 1e-3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn srw_small_values() {
        let law = ExcursionLaw::srw(1000).unwrap();
        assert!((law.prob(2) - 0.5).abs() < 1e-15);
        assert!((law.prob(4) - 0.125).abs() < 1e-15);
        assert!((law.prob(6) - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(law.prob(3), 0.0);
        assert_eq!(law.period(), 2);
    }

    #[test]
    fn srw_local_limit() {
        let law = ExcursionLaw::srw(4000).unwrap();
        let m = 1000.0f64;
        let scaled = law.prob(2000) * 2.0 * std::f64::consts::PI.sqrt() * m.powf(1.5);
        assert!((scaled - 1.0).abs() < 0.02);
        assert!((law.tail_exponent() - 1.5).abs() < 0.075);
    }

    #[test]
    fn srw_mass_and_tail() {
        let law = ExcursionLaw::srw(DEFAULT_M_MAX).unwrap();
        let total: f64 = law.probs().iter().sum::<f64>() + law.tail_mass();
        assert!((total - 1.0).abs() < 1e-12);
        // the tail model continues the exact law
        let next = law.prob(DEFAULT_M_MAX + 2);
        let exact = (law.log_prob(DEFAULT_M_MAX) + (1.0 - 1.0 / (DEFAULT_M_MAX as f64 + 2.0)).ln()
            + ((DEFAULT_M_MAX as f64 - 1.0) / (DEFAULT_M_MAX as f64 + 1.0)).ln())
        .exp();
        assert!((next / exact - 1.0).abs() < 1e-9);
        // analytic tail mass from the model matches u(m_max)
        let model_tail = law.tail_series(0.0, 1.0, 0.0);
        assert!((model_tail / law.tail_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn srw_generating_function() {
        let law = ExcursionLaw::srw(DEFAULT_M_MAX).unwrap();
        for g in [0.1f64, 0.01, 1e-4, 2.0] {
            let closed = 1.0 - (1.0 - (-2.0 * g).exp()).sqrt();
            assert!((law.normalizer(g) - closed).abs() < 1e-12, "g={g}");
        }
        assert_eq!(law.normalizer(0.0), 1.0);
    }

    #[test]
    fn power_law_examples() {
        let law = ExcursionLaw::power_law(2.0, 1000, 1).unwrap();
        assert!((law.prob(1) / law.prob(2) - 4.0).abs() < 1e-12);
        let law = ExcursionLaw::power_law(1.5, 1_000_000, 1).unwrap();
        let total: f64 = law.probs().iter().sum::<f64>() + law.tail_mass();
        assert!((total - 1.0).abs() < 1e-12);
        // ζ(3/2) = 2.612375348685488
        assert!((1.0 / law.prob(1) - 2.612375348685488).abs() < 1e-10);
        assert!(ExcursionLaw::power_law(1.0, 100, 1).is_err());
        assert!(ExcursionLaw::power_law(0.5, 100, 1).is_err());
    }

    #[test]
    fn power_law_mean() {
        let law = ExcursionLaw::power_law(3.0, DEFAULT_M_MAX, 1).unwrap();
        // ζ(2)/ζ(3)
        let expected = (std::f64::consts::PI.powi(2) / 6.0) / 1.2020569031595942;
        assert!((law.mean() - expected).abs() < 1e-10);
        assert!((law.mean() - 1.3684).abs() < 1e-4);
        assert!(ExcursionLaw::power_law(1.5, 1000, 1).unwrap().mean().is_infinite());
        assert!(law.first_moment_condition());
        assert!(!ExcursionLaw::srw(DEFAULT_M_MAX).unwrap().first_moment_condition());
    }

    #[test]
    fn periodic_power_law() {
        let law = ExcursionLaw::power_law(1.5, 10_000, 2).unwrap();
        assert_eq!(law.prob(3), 0.0);
        // ρ(2j) = (2j)^{−α} / (2^{−α} ζ(α))
        assert!((law.prob(2) - 1.0 / 2.612375348685488).abs() < 1e-10);
        let t = law.tilt(0.3).unwrap();
        assert!(t.log_probs.iter().enumerate().all(|(m, l)| m % 2 == 0 || *l == f64::NEG_INFINITY));
    }

    #[test]
    fn custom_law() {
        let law = ExcursionLaw::custom(vec![0.5, 0.25], 1, 2.0).unwrap();
        assert!((law.tail_mass() - 0.25).abs() < 1e-15);
        assert!((law.normalizer(0.0) - 0.75).abs() < 1e-15);
        assert!(ExcursionLaw::custom(vec![0.5, 0.25], 2, 2.0).is_err());
        assert!(ExcursionLaw::custom(vec![0.9, 0.25], 1, 2.0).is_err());
    }

    #[test]
    fn tilt_basics() {
        let law = ExcursionLaw::srw(10_000).unwrap();
        let t0 = law.tilt(0.0).unwrap();
        assert_eq!(t0.log_normalizer, 0.0);
        for m in [2, 4, 100] {
            assert!((t0.log_probs[m] - law.log_prob(m)).abs() < 1e-15);
        }
        let big = law.tilt(50.0).unwrap();
        assert!(big.log_probs[2].abs() < 1e-15);
        assert!(law.tilt(-0.1).is_err());
        assert!(law.normalizer(-0.1).is_infinite());
        let t = law.tilt(0.1).unwrap();
        let mass: f64 = t.log_probs.iter().map(|l| l.exp()).sum::<f64>() + t.tail_mass;
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_series_against_direct_sum() {
        let law = ExcursionLaw::power_law(1.5, 2000, 1).unwrap();
        let big = ExcursionLaw::power_law(1.5, 4_000_000, 1).unwrap();
        // Σ_{m>2000} e^{−rm} m^{−1.2} with r small, via a much longer direct sum
        for (r, t) in [(0.0, 0.8), (1e-4, 0.8), (0.01, 1.0), (1e-3, 0.5)] {
            let head = |l: &ExcursionLaw| -> f64 {
                (1..=2000).map(|m| (-r * m as f64).exp() * l.prob(m).powf(t)).sum()
            };
            let a = head(&law) + law.tail_series(r, t, 0.0);
            let b = big.series(r, t, 0.0);
            assert!((a / b - 1.0).abs() < 1e-9, "r={r} t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn spec_roundtrip() {
        let law = ExcursionLaw::power_law(2.5, 500, 1).unwrap();
        let json = serde_json::to_string(law.spec()).unwrap();
        let back: LawSpec = serde_json::from_str(&json).unwrap();
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt.probs(), law.probs());
        assert!(json.contains("\"kind\":\"power_law\""));
    }

    proptest! {
        #[test]
        fn normalizer_log_convex_and_decreasing(g in 0.001f64..3.0, d in 0.001f64..0.5, a in 1.2f64..3.5) {
            let law = ExcursionLaw::power_law(a, 5000, 1).unwrap();
            let (l0, l1, l2) = (law.log_normalizer(g), law.log_normalizer(g + d), law.log_normalizer(g + 2.0 * d));
            prop_assert!(l1 < l0);
            prop_assert!(l1 <= 0.5 * (l0 + l2) + 1e-12);
        }
    }
}
