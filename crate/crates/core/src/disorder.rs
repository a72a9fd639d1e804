//! Letter disorder laws ν with zero mean and unit variance.
//!
//! The cumulant `M(λ) = log E e^{−λω}`, its derivative `G = M′`, the inverse
//! `H = G⁻¹` on `[0, χ)`, and `F(λ) = λG(λ) − M(λ)`, which is the rate in the
//! lower-tail Chernoff bound for sums of letters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, newton_bisect, Rule};

const MAX_ATOMS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DisorderModel {
    /// ±1 with probability ½ each.
    Binary,
    Gaussian,
    /// Finitely many atoms.
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

/// Outcome of the lower-tail bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailBound {
    /// Natural log of the bound on the probability.
    Log(f64),
    /// The event lies outside the support of the sum.
    Impossible,
}

impl TailBound {
    pub fn log_value(self) -> f64 {
        match self {
            TailBound::Log(v) => v,
            TailBound::Impossible => f64::NEG_INFINITY,
        }
    }
}

impl DisorderModel {
    pub fn binary() -> Self {
        DisorderModel::Binary
    }

    pub fn gaussian() -> Self {
        DisorderModel::Gaussian
    }

    /// A finite law; weights are normalized, and the standardization is
    /// checked to 1e-12.
    pub fn discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = DisorderModel::Discrete { atoms, weights };
        m.validate()?;
        if let DisorderModel::Discrete { atoms, weights } = m {
            let total: f64 = weights.iter().sum();
            Ok(DisorderModel::Discrete { atoms, weights: weights.iter().map(|w| w / total).collect() })
        } else {
            unreachable!()
        }
    }

    /// `k`-point Gauss–Hermite quantization of the standard Gaussian.
    pub fn quantized_gaussian(k: usize) -> Self {
        let rule = Rule::hermite(k);
        DisorderModel::discrete(rule.nodes, rule.weights).expect("Hermite rules match two moments")
    }

    /// `k` equally spaced atoms with Gaussian-shaped weights on `±4.5`
    /// before rescaling to unit variance.
    pub fn lattice_gaussian(k: usize) -> Self {
        assert!(k >= 3, "need at least three atoms");
        let half = (k - 1) as f64 / 2.0;
        let step = 4.5 / half;
        let xs: Vec<f64> = (0..k).map(|i| (i as f64 - half) * step).collect();
        let ws: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let total: f64 = ws.iter().sum();
        let var: f64 = xs.iter().zip(&ws).map(|(x, w)| x * x * w).sum::<f64>() / total;
        let sd = var.sqrt();
        DisorderModel::discrete(xs.iter().map(|x| x / sd).collect(), ws).expect("symmetric and rescaled")
    }

    /// `(a₀, Δ)` when every atom is `a₀ + kΔ` for an integer `k`.
    pub fn lattice(&self) -> Option<(f64, f64)> {
        let (atoms, _) = self.atoms()?;
        let lo = atoms.iter().copied().fold(f64::INFINITY, f64::min);
        let mut sorted = atoms.clone();
        sorted.sort_by(f64::total_cmp);
        let step = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
        if !step.is_finite() {
            return Some((lo, 1.0));
        }
        let on_grid = atoms.iter().all(|a| {
            let k = (a - lo) / step;
            (k - k.round()).abs() < 1e-9
        });
        on_grid.then_some((lo, step))
    }

    pub fn validate(&self) -> Result<()> {
        if let DisorderModel::Discrete { atoms, weights } = self {
            if atoms.is_empty() || atoms.len() != weights.len() {
                return Err(Error::BadDisorder("atoms and weights must be nonempty and equally long".into()));
            }
            if atoms.len() > MAX_ATOMS {
                return Err(Error::BadDisorder(format!("at most {MAX_ATOMS} atoms")));
            }
            if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || atoms.iter().any(|a| !a.is_finite()) {
                return Err(Error::BadDisorder("weights must be positive and atoms finite".into()));
            }
            let total: f64 = weights.iter().sum();
            let mean: f64 = atoms.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total;
            let second: f64 = atoms.iter().zip(weights).map(|(a, w)| a * a * w).sum::<f64>() / total;
            let variance = second - mean * mean;
            if mean.abs() > 1e-12 || (variance - 1.0).abs() > 1e-12 {
                return Err(Error::NotStandardized { mean, variance });
            }
        }
        Ok(())
    }

    /// Atoms and probabilities for finitely supported laws.
    pub fn atoms(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DisorderModel::Binary => Some((vec![-1.0, 1.0], vec![0.5, 0.5])),
            DisorderModel::Gaussian => None,
            DisorderModel::Discrete { atoms, weights } => Some((atoms.clone(), weights.clone())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DisorderModel::Binary => "binary",
            DisorderModel::Gaussian => "gaussian",
            DisorderModel::Discrete { .. } => "discrete",
        }
    }

    /// Log-probabilities of the atoms under the tilted law
    /// `ν_λ(dx) ∝ e^{−λx} ν(dx)`.
    fn tilted_log_probs(atoms: &[f64], weights: &[f64], lambda: f64) -> Vec<f64> {
        let raw: Vec<f64> = atoms.iter().zip(weights).map(|(a, w)| w.ln() - lambda * a).collect();
        let z = log_sum_exp(raw.iter().copied());
        raw.iter().map(|r| r - z).collect()
    }

    /// `M(λ) = log E e^{−λω}`.
    pub fn cumulant(&self, lambda: f64) -> f64 {
        match self {
            DisorderModel::Binary => {
                let a = lambda.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
            DisorderModel::Gaussian => 0.5 * lambda * lambda,
            DisorderModel::Discrete { atoms, weights } => {
                log_sum_exp(atoms.iter().zip(weights).map(|(a, w)| w.ln() - lambda * a))
            }
        }
    }

    /// `G(λ) = M′(λ)`, the mean of `−ω` under `ν_λ`.
    pub fn slope(&self, lambda: f64) -> f64 {
        match self {
            DisorderModel::Binary => lambda.tanh(),
            DisorderModel::Gaussian => lambda,
            DisorderModel::Discrete { atoms, weights } => {
                let lp = Self::tilted_log_probs(atoms, weights, lambda);
                -atoms.iter().zip(&lp).map(|(a, l)| a * l.exp()).sum::<f64>()
            }
        }
    }

    /// `G′(λ)`, the variance of ω under `ν_λ`.
    pub fn slope_derivative(&self, lambda: f64) -> f64 {
        match self {
            DisorderModel::Binary => {
                let t = lambda.tanh();
                1.0 - t * t
            }
            DisorderModel::Gaussian => 1.0,
            DisorderModel::Discrete { atoms, weights } => {
                let lp = Self::tilted_log_probs(atoms, weights, lambda);
                let mean: f64 = atoms.iter().zip(&lp).map(|(a, l)| a * l.exp()).sum();
                atoms.iter().zip(&lp).map(|(a, l)| (a - mean).powi(2) * l.exp()).sum()
            }
        }
    }

    /// `χ = lim_{λ→∞} G(λ)`, the supremum of the support of `−ω`.
    pub fn chi(&self) -> f64 {
        match self {
            DisorderModel::Binary => 1.0,
            DisorderModel::Gaussian => f64::INFINITY,
            DisorderModel::Discrete { atoms, .. } => -atoms.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `H(y) = G⁻¹(y)` for `0 ≤ y < χ`.
    pub fn inverse_slope(&self, y: f64) -> Result<f64> {
        let chi = self.chi();
        if !(y >= 0.0) || y >= chi {
            return Err(Error::SlopeDomain { y, chi });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if let DisorderModel::Gaussian = self {
            return Ok(y);
        }
        let mut hi = 1.0;
        while self.slope(hi) < y {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::SlopeDomain { y, chi });
            }
        }
        Ok(newton_bisect(|l| (self.slope(l) - y, self.slope_derivative(l)), 0.0, hi, 1e-15))
    }

    /// `F(λ) = λG(λ) − M(λ)`.
    pub fn legendre(&self, lambda: f64) -> f64 {
        lambda * self.slope(lambda) - self.cumulant(lambda)
    }

    /// `lim_{y↑χ} F(H(y))`: minus the log-weight of the lowest atom, or
    /// infinity for unbounded support.
    pub fn rate_at_chi(&self) -> f64 {
        match self {
            DisorderModel::Binary => std::f64::consts::LN_2,
            DisorderModel::Gaussian => f64::INFINITY,
            DisorderModel::Discrete { atoms, weights } => {
                let lo = atoms.iter().copied().fold(f64::INFINITY, f64::min);
                let w: f64 = atoms.iter().zip(weights).filter(|(a, _)| **a == lo).map(|(_, w)| w).sum();
                -w.ln()
            }
        }
    }

    /// Chernoff rate `F(H(y))` of the event `Σ_{k≤n} ω_k ≤ −n y`; infinite
    /// beyond χ.
    pub fn rate(&self, y: f64) -> f64 {
        let chi = self.chi();
        if y <= 0.0 {
            0.0
        } else if y < chi {
            self.legendre(self.inverse_slope(y).expect("inside the domain"))
        } else if y == chi {
            self.rate_at_chi()
        } else {
            f64::INFINITY
        }
    }

    /// Bound on `log P(Σ_{k≤n} ω_k ≤ −A − nB)`.
    pub fn tail_bound(&self, n: u64, a: f64, b: f64) -> TailBound {
        let y = a / n as f64 + b;
        if y > self.chi() {
            return TailBound::Impossible;
        }
        TailBound::Log(-(n as f64) * self.rate(y))
    }

    /// Monte Carlo frequency of `Σ_{k≤n} ω_k ≤ −A − nB` over `samples`
    /// independent blocks of `n` letters, with its binomial standard error.
    pub fn tail_frequency(&self, n: usize, a: f64, b: f64, samples: usize, seed: u64) -> (f64, f64) {
        let cut = -a - n as f64 * b;
        let letters = self.sample(n * samples, seed);
        let hits = letters.chunks_exact(n.max(1)).filter(|c| c.iter().sum::<f64>() <= cut).count();
        let p = hits as f64 / samples as f64;
        (p, (p * (1.0 - p) / samples as f64).sqrt())
    }

    /// `C = ½ min(F(H(B)), F(H(1)))` with `C(A + x) ≤ x F(H(A/x + B))`.
    pub fn tail_constant(&self, b: f64) -> f64 {
        0.5 * self.rate(b).min(self.rate(1.0))
    }

    /// `n` i.i.d. letters.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            DisorderModel::Binary => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
            DisorderModel::Gaussian => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            DisorderModel::Discrete { atoms, weights } => {
                let idx = WeightedIndex::new(weights).expect("validated weights");
                (0..n).map(|_| atoms[idx.sample(&mut rng)]).collect()
            }
        }
    }

    /// `h(ν_a | ν_b)` between two exponential tilts of ν.
    pub fn tilted_relative_entropy(&self, a: f64, b: f64) -> f64 {
        match self.atoms() {
            None => 0.5 * (a - b) * (a - b),
            Some((atoms, weights)) => {
                let la = Self::tilted_log_probs(&atoms, &weights, a);
                let lb = Self::tilted_log_probs(&atoms, &weights, b);
                la.iter().zip(&lb).map(|(x, y)| if *x == f64::NEG_INFINITY { 0.0 } else { x.exp() * (x - y) }).sum()
            }
        }
    }

    /// Probabilities of the atoms under `ν_λ`.
    pub fn tilted_probs(&self, lambda: f64) -> Option<Vec<f64>> {
        self.atoms().map(|(a, w)| Self::tilted_log_probs(&a, &w, lambda).iter().map(|l| l.exp()).collect())
    }
}
