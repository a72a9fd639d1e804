//! Annealed closed forms, the annealed slope `𝒩(β,h;g)`, and the Gibbs
//! variational principle on truncated word spaces.
//!
//! A word is an excursion length `m` and its letters. Every functional here
//! depends on a word only through `(m, σ)` with `σ` the letter sum, so words
//! are grouped into cells with that key and distributions are taken to be
//! reference-distributed inside a cell. Relative entropies between such laws
//! equal the entropies between their cell marginals.

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::numerics::{bisect, log_add_exp, log_half_one_plus_exp, log_sum_exp};
use crate::partition::annealed_rate;

/// `g^ann(β,h) = 0 ∨ [M(2β) − 2βh]`.
pub fn annealed_excess_free_energy(beta: f64, h: f64, model: &DisorderModel) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    annealed_rate(beta, h, model).max(0.0)
}

/// `h_c^ann(β) = M(2β)/(2β)`; 0 at `β = 0`, which is the limit.
pub fn annealed_critical_h(beta: f64, model: &DisorderModel) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    model.cumulant(2.0 * beta) / (2.0 * beta)
}

/// `𝒩(β,h;g) = ½𝒩(g) + ½𝒩(g − [M(2β) − 2βh])`, `+∞` below `g^ann`.
pub fn curly_n(beta: f64, h: f64, g: f64, law: &ExcursionLaw, model: &DisorderModel) -> f64 {
    let c = if beta == 0.0 { 0.0 } else { annealed_rate(beta, h, model) };
    if g < 0.0 || g < c {
        return f64::INFINITY;
    }
    0.5 * law.normalizer(g) + 0.5 * law.normalizer(g - c)
}

/// `S^ann(β,h;g) = log 𝒩(β,h;g)`.
pub fn annealed_slope(beta: f64, h: f64, g: f64, law: &ExcursionLaw, model: &DisorderModel) -> f64 {
    curly_n(beta, h, g, law, model).ln()
}

/// Smallest `g` with `S^ann(β,h;g) ≤ 0`, found by bisection.
pub fn annealed_slope_root(beta: f64, h: f64, law: &ExcursionLaw, model: &DisorderModel) -> Result<f64> {
    let positive = |g: f64| annealed_slope(beta, h, g, law, model) > 0.0;
    if !positive(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while positive(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoBracket { lo: 0.0, hi });
        }
    }
    bisect(|g| if positive(g) { -1.0 } else { 1.0 }, 0.0, hi, 1e-14, 200)
}

/// Words of length `len` whose letters add up to `sum`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub len: usize,
    pub sum: f64,
    /// Position of `sum` on the lattice of `len`-letter sums.
    pub index: usize,
    /// `log ρ(len) + log ν^{⊗len}(letter sum = sum)`.
    pub log_ref: f64,
}

/// All cells with `len ≤ max_len` carrying reference mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordSpace {
    pub max_len: usize,
    pub cells: Vec<Cell>,
    /// `(lattice offset, log weight)` per letter.
    letters: Vec<(usize, f64)>,
    /// `log ν^{⊗m}(Σ k_i = j)` for `m = 0..=max_len`.
    log_sums: Vec<Vec<f64>>,
}

/// Law over the cells of a [`WordSpace`], index-aligned with `cells`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordDistribution {
    pub probs: Vec<f64>,
}

/// `q_{ρ,ν}` on a word space, raw or renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceWordLaw {
    pub log_probs: Vec<f64>,
    pub renormalized: bool,
}

impl ReferenceWordLaw {
    pub fn to_distribution(&self) -> WordDistribution {
        let z = log_sum_exp(self.log_probs.iter().copied());
        WordDistribution { probs: self.log_probs.iter().map(|l| (l - z).exp()).collect() }
    }
}

impl WordDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn normalized(mut self) -> Self {
        let t = self.total();
        self.probs.iter_mut().for_each(|p| *p /= t);
        self
    }
}

/// Result of iterated mirror ascent.
#[derive(Clone, Debug, PartialEq)]
pub struct Ascent {
    pub q: WordDistribution,
    pub value: f64,
    pub iterations: usize,
}

impl WordSpace {
    /// Needs letters on an arithmetic grid so that letter sums can be
    /// tracked exactly.
    pub fn new(model: &DisorderModel, law: &ExcursionLaw, max_len: usize) -> Result<Self> {
        let (atoms, weights) =
            model.atoms().ok_or_else(|| Error::BadDisorder("word spaces need a finitely supported letter law".into()))?;
        let (a0, step) =
            model.lattice().ok_or_else(|| Error::BadDisorder("word spaces need equally spaced atoms".into()))?;
        let k: Vec<usize> = atoms.iter().map(|a| ((a - a0) / step).round() as usize).collect();
        let width = k.iter().copied().max().unwrap_or(0);
        let mut letter = vec![f64::NEG_INFINITY; width + 1];
        for (ki, w) in k.iter().zip(&weights) {
            letter[*ki] = log_add_exp(letter[*ki], w.ln());
        }
        let mut cells = Vec::new();
        let mut dist = vec![0.0];
        let mut log_sums = vec![dist.clone()];
        let mut terms = Vec::with_capacity(width + 1);
        for m in 1..=max_len {
            let mut next = vec![f64::NEG_INFINITY; dist.len() + width];
            for (j, slot) in next.iter_mut().enumerate() {
                terms.clear();
                for (d, lw) in letter.iter().enumerate() {
                    if d <= j && j - d < dist.len() && lw.is_finite() {
                        terms.push(dist[j - d] + lw);
                    }
                }
                *slot = log_sum_exp(terms.iter().copied());
            }
            dist = next;
            log_sums.push(dist.clone());
            let lr = law.log_prob(m);
            if lr == f64::NEG_INFINITY {
                continue;
            }
            for (j, ld) in dist.iter().enumerate() {
                if ld.is_finite() {
                    cells.push(Cell { len: m, sum: m as f64 * a0 + j as f64 * step, index: j, log_ref: lr + ld });
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Domain(format!("no excursion mass up to length {max_len}")));
        }
        let letters = k.iter().zip(&weights).map(|(ki, w)| (*ki, w.ln())).collect();
        Ok(WordSpace { max_len, cells, letters, log_sums })
    }

    /// Letter law `π₁ψ_q`: a uniformly chosen letter of the concatenation,
    /// per atom of the letter law.
    pub fn letter_marginal(&self, q: &WordDistribution) -> Vec<f64> {
        let mut out = vec![0.0; self.letters.len()];
        let mut mean_len = 0.0;
        for (c, p) in self.cells.iter().zip(&q.probs) {
            if *p == 0.0 {
                continue;
            }
            mean_len += p * c.len as f64;
            let whole = self.log_sums[c.len][c.index];
            let rest = &self.log_sums[c.len - 1];
            for (slot, (k, lw)) in out.iter_mut().zip(&self.letters) {
                if *k <= c.index && c.index - k < rest.len() {
                    *slot += p * c.len as f64 * (lw + rest[c.index - k] - whole).exp();
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= mean_len);
        out
    }

    /// Letter weights, aligned with [`WordSpace::letter_marginal`].
    pub fn letter_weights(&self) -> Vec<f64> {
        self.letters.iter().map(|(_, lw)| lw.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn reference(&self, renormalized: bool) -> ReferenceWordLaw {
        let mut log_probs: Vec<f64> = self.cells.iter().map(|c| c.log_ref).collect();
        if renormalized {
            let z = log_sum_exp(log_probs.iter().copied());
            log_probs.iter_mut().for_each(|l| *l -= z);
        }
        ReferenceWordLaw { log_probs, renormalized }
    }

    /// `log φ_{β,h}(y) = log ½(1 + e^{−2β(hτ + σ)})`.
    pub fn log_phi(cell: &Cell, beta: f64, h: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        log_half_one_plus_exp(-2.0 * beta * (h * cell.len as f64 + cell.sum))
    }

    fn score(cell: &Cell, beta: f64, h: f64, g: f64) -> f64 {
        -g * cell.len as f64 + Self::log_phi(cell, beta, h)
    }

    /// `log Σ_y ref(y) e^{−gτ(y)} φ(y)`; with the raw reference this is the
    /// truncated `log 𝒩(β,h;g)`.
    pub fn log_partition(&self, reference: &ReferenceWordLaw, beta: f64, h: f64, g: f64) -> f64 {
        log_sum_exp(self.cells.iter().zip(&reference.log_probs).map(|(c, l)| l + Self::score(c, beta, h, g)))
    }

    /// `h(q | ref)`, infinite when `q` charges a cell `ref` does not.
    pub fn relative_entropy(q: &WordDistribution, log_ref: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (p, l) in q.probs.iter().zip(log_ref) {
            if *p > 0.0 {
                if *l == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                acc += p * (p.ln() - l);
            }
        }
        acc
    }

    pub fn mean_length(&self, q: &WordDistribution) -> f64 {
        self.cells.iter().zip(&q.probs).map(|(c, p)| p * c.len as f64).sum()
    }

    /// `∫ q [−gτ + log φ] − h(q | ref)`.
    pub fn variational_functional(
        &self,
        q: &WordDistribution,
        reference: &ReferenceWordLaw,
        beta: f64,
        h: f64,
        g: f64,
    ) -> f64 {
        let mut acc = 0.0;
        for ((c, p), l) in self.cells.iter().zip(&q.probs).zip(&reference.log_probs) {
            if *p > 0.0 {
                if *l == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                acc += p * (Self::score(c, beta, h, g) + l - p.ln());
            }
        }
        acc
    }

    /// `q ∝ ref · e^{−gτ} φ`.
    pub fn gibbs_maximizer(&self, reference: &ReferenceWordLaw, beta: f64, h: f64, g: f64) -> WordDistribution {
        let logs: Vec<f64> =
            self.cells.iter().zip(&reference.log_probs).map(|(c, l)| l + Self::score(c, beta, h, g)).collect();
        let z = log_sum_exp(logs.iter().copied());
        WordDistribution { probs: logs.iter().map(|l| (l - z).exp()).collect() }
    }

    /// Entropic mirror ascent from the normalized reference with step `eta`:
    /// `log q ← (1 − η) log q + η (log ref + score)`, then renormalize.
    pub fn mirror_ascent(
        &self,
        reference: &ReferenceWordLaw,
        beta: f64,
        h: f64,
        g: f64,
        eta: f64,
        max_iter: usize,
    ) -> Ascent {
        let target: Vec<f64> =
            self.cells.iter().zip(&reference.log_probs).map(|(c, l)| l + Self::score(c, beta, h, g)).collect();
        let mut logq = reference.log_probs.clone();
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let mut next: Vec<f64> = logq.iter().zip(&target).map(|(a, t)| (1.0 - eta) * a + eta * t).collect();
            let z = log_sum_exp(next.iter().copied());
            next.iter_mut().for_each(|l| *l -= z);
            let change = next.iter().zip(&logq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            logq = next;
            if change < 1e-15 {
                break;
            }
        }
        let q = WordDistribution { probs: logq.iter().map(|l| l.exp()).collect() };
        let value = self.variational_functional(&q, reference, beta, h, g);
        Ascent { q, value, iterations }
    }

    /// `h(q|q_{ρ_g,ν}) − h(q|q_{ρ,ν}) − log 𝒩(g) − g m_q`, with both
    /// entropies evaluated separately against the raw reference laws.
    pub fn tilting_residual(&self, q: &WordDistribution, law: &ExcursionLaw, g: f64) -> f64 {
        let log_n = law.log_normalizer(g);
        let raw: Vec<f64> = self.cells.iter().map(|c| c.log_ref).collect();
        let tilted: Vec<f64> = self.cells.iter().map(|c| c.log_ref - g * c.len as f64 - log_n).collect();
        let h_tilted = Self::relative_entropy(q, &tilted);
        let h_raw = Self::relative_entropy(q, &raw);
        h_tilted - h_raw - log_n - g * self.mean_length(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn srw() -> ExcursionLaw {
        ExcursionLaw::srw(200_000).unwrap()
    }

    fn random_q(n: usize, rng: &mut ChaCha8Rng, sparse: bool) -> WordDistribution {
        let probs: Vec<f64> = (0..n)
            .map(|_| if sparse && rng.random::<f64>() < 0.3 { 0.0 } else { -rng.random::<f64>().ln() })
            .collect();
        WordDistribution { probs }.normalized()
    }

    #[test]
    fn closed_forms() {
        let b = DisorderModel::Binary;
        let g = DisorderModel::Gaussian;
        assert_eq!(annealed_excess_free_energy(0.0, 0.3, &b), 0.0);
        assert!((annealed_excess_free_energy(1.0, 0.0, &b) - 2f64.cosh().ln()).abs() < 1e-15);
        assert_eq!(annealed_excess_free_energy(1.0, annealed_critical_h(1.0, &b) + 0.01, &b), 0.0);
        assert!((annealed_critical_h(1.0, &g) - 1.0).abs() < 1e-15);
        assert!((annealed_critical_h(1.0, &b) - 2f64.cosh().ln() / 2.0).abs() < 1e-15);
        assert!((annealed_critical_h(1.0, &b) - 0.6625).abs() < 1e-4);
        assert_eq!(annealed_critical_h(0.0, &b), 0.0);
        for alpha in [1.2, 1.5, 3.0] {
            for beta in [0.1, 0.5, 2.0] {
                assert!(annealed_critical_h(beta / alpha, &b) < annealed_critical_h(beta, &b));
            }
        }
    }

    #[test]
    fn curly_n_examples() {
        let law = srw();
        let b = DisorderModel::Binary;
        let hc = annealed_critical_h(1.0, &b);
        assert!((curly_n(1.0, hc, 0.0, &law, &b) - 1.0).abs() < 1e-12);
        assert!(annealed_slope(1.0, hc, 0.0, &law, &b).abs() < 1e-12);
        for g in [0.01, 0.3] {
            assert!((curly_n(0.0, 0.4, g, &law, &b) - law.normalizer(g)).abs() < 1e-15);
        }
        let ga = annealed_excess_free_energy(1.0, 0.0, &b);
        assert!(curly_n(1.0, 0.0, ga - 1e-9, &law, &b).is_infinite());
        assert!(curly_n(1.0, 0.0, ga, &law, &b).is_finite());
    }

    #[test]
    fn curly_n_against_double_series() {
        // Σ_m ρ(m) e^{−gm} Σ_k C(m,k) 2^{−m} ½(1 + e^{−2β(m − 2k)}) with
        // β = 1, h = 0 and letters ±1.
        let law = srw();
        let b = DisorderModel::Binary;
        let g = annealed_excess_free_energy(1.0, 0.0, &b) + 0.1;
        let mut terms = Vec::new();
        let mut log_binom = vec![0.0f64];
        for m in 1..=800usize {
            let mut next = vec![0.0; m + 1];
            for k in 0..=m {
                let a = if k < m { log_binom[k] } else { f64::NEG_INFINITY };
                let c = if k > 0 { log_binom[k - 1] } else { f64::NEG_INFINITY };
                next[k] = crate::numerics::log_add_exp(a, c);
            }
            log_binom = next;
            if m % 2 == 1 {
                continue;
            }
            let lr = law.log_prob(m) - g * m as f64 - m as f64 * std::f64::consts::LN_2;
            for (k, lb) in log_binom.iter().enumerate() {
                let s = m as f64 - 2.0 * k as f64;
                terms.push(lr + lb + log_half_one_plus_exp(-2.0 * s));
            }
        }
        let direct = log_sum_exp(terms).exp();
        let closed = curly_n(1.0, 0.0, g, &law, &b);
        assert!((direct - closed).abs() < 1e-10 * closed, "{direct} vs {closed}");
    }

    #[test]
    fn slope_root_is_annealed_free_energy() {
        let law = srw();
        for model in [DisorderModel::Binary, DisorderModel::Gaussian] {
            for beta in [0.25, 0.5, 1.0] {
                let hc = annealed_critical_h(beta, &model);
                for h in [0.0, 0.5 * hc, hc, 1.5 * hc] {
                    let root = annealed_slope_root(beta, h, &law, &model).unwrap();
                    let exact = annealed_excess_free_energy(beta, h, &model);
                    assert!((root - exact).abs() < 1e-8, "beta={beta} h={h}: {root} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn word_space_requires_lattice_letters() {
        let law = srw();
        assert!(WordSpace::new(&DisorderModel::Gaussian, &law, 6).is_err());
        assert!(WordSpace::new(&DisorderModel::quantized_gaussian(5), &law, 6).is_err());
        assert!(WordSpace::new(&DisorderModel::Binary, &law, 1).is_err());
    }

    #[test]
    fn reference_mass_per_length() {
        let law = srw();
        for model in [DisorderModel::Binary, DisorderModel::lattice_gaussian(21)] {
            let space = WordSpace::new(&model, &law, 12).unwrap();
            for m in (2..=12).step_by(2) {
                let mass: f64 = space.cells.iter().filter(|c| c.len == m).map(|c| c.log_ref.exp()).sum();
                assert!((mass - law.prob(m)).abs() < 1e-14, "m={m}");
            }
            // binary letter sums have the parity of the length
            if model == DisorderModel::Binary {
                assert_eq!(space.len(), (2..=12).step_by(2).map(|m| m + 1).sum::<usize>());
            }
        }
    }

    #[test]
    fn letter_marginal_of_reference_is_the_letter_law() {
        let law = srw();
        let model = DisorderModel::discrete(vec![-3f64.sqrt(), 0.0, 3f64.sqrt()], vec![1.0, 4.0, 1.0]).unwrap();
        let space = WordSpace::new(&model, &law, 10).unwrap();
        let q = space.reference(true).to_distribution();
        for (a, b) in space.letter_marginal(&q).iter().zip(space.letter_weights()) {
            assert!((a - b).abs() < 1e-14);
        }
        // all mass on the word (+1, +1)
        let bin = WordSpace::new(&DisorderModel::Binary, &law, 4).unwrap();
        let i = bin.cells.iter().position(|c| c.len == 2 && c.sum == 2.0).unwrap();
        let mut probs = vec![0.0; bin.len()];
        probs[i] = 1.0;
        let m = bin.letter_marginal(&WordDistribution { probs });
        assert!(m[0].abs() < 1e-15 && (m[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn functional_examples() {
        let law = srw();
        let space = WordSpace::new(&DisorderModel::Binary, &law, 12).unwrap();
        let reference = space.reference(true);
        let q = reference.to_distribution();
        assert!(space.variational_functional(&q, &reference, 0.0, 0.3, 0.0).abs() < 1e-14);
        // the cell (2, +2) holds the single word (+1, +1)
        let i = space.cells.iter().position(|c| c.len == 2 && c.sum == 2.0).unwrap();
        let mut probs = vec![0.0; space.len()];
        probs[i] = 1.0;
        let point = WordDistribution { probs };
        let (beta, h, g) = (0.7, 0.2, 0.4);
        let expect = -2.0 * g + WordSpace::log_phi(&space.cells[i], beta, h) + reference.log_probs[i];
        assert!((space.variational_functional(&point, &reference, beta, h, g) - expect).abs() < 1e-14);
        let mut missing = reference.clone();
        missing.log_probs[i] = f64::NEG_INFINITY;
        assert_eq!(space.variational_functional(&point, &missing, beta, h, g), f64::NEG_INFINITY);
    }

    #[test]
    fn gibbs_maximizer_properties() {
        let law = srw();
        let space = WordSpace::new(&DisorderModel::Binary, &law, 12).unwrap();
        let raw = space.reference(false);
        let normed = space.reference(true);
        let q0 = space.gibbs_maximizer(&normed, 0.0, 0.5, 0.0);
        for (a, b) in q0.probs.iter().zip(&normed.to_distribution().probs) {
            assert!((a - b).abs() < 1e-15);
        }
        let far = space.gibbs_maximizer(&raw, 1.0, 0.0, 50.0);
        let short: f64 = space.cells.iter().zip(&far.probs).filter(|(c, _)| c.len == 2).map(|(_, p)| p).sum();
        assert!(short > 1.0 - 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (beta, h, g) in [(1.0, 0.0, 0.2), (0.5, 0.3, 0.05), (2.0, 1.0, 1.0)] {
            let star = space.gibbs_maximizer(&raw, beta, h, g);
            let best = space.variational_functional(&star, &raw, beta, h, g);
            let exact = space.log_partition(&raw, beta, h, g);
            assert!((best - exact).abs() < 1e-12);
            for _ in 0..100 {
                let noise = random_q(space.len(), &mut rng, false);
                let eps = rng.random::<f64>() * 0.2;
                let probs = star.probs.iter().zip(&noise.probs).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
                let v = space.variational_functional(&WordDistribution { probs }, &raw, beta, h, g);
                assert!(v <= best + 1e-13);
            }
            let ascent = space.mirror_ascent(&raw, beta, h, g, 0.5, 200);
            assert!((ascent.value - exact).abs() < 1e-10, "{} vs {exact}", ascent.value);
        }
    }

    #[test]
    fn functional_is_strictly_concave() {
        let law = srw();
        let space = WordSpace::new(&DisorderModel::Binary, &law, 10).unwrap();
        let raw = space.reference(false);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = random_q(space.len(), &mut rng, false);
            let b = random_q(space.len(), &mut rng, false);
            let mid = WordDistribution { probs: a.probs.iter().zip(&b.probs).map(|(x, y)| 0.5 * (x + y)).collect() };
            let f = |q: &WordDistribution| space.variational_functional(q, &raw, 1.0, 0.2, 0.3);
            assert!(f(&mid) > 0.5 * (f(&a) + f(&b)));
        }
    }

    #[test]
    fn tilting_residuals() {
        let law = srw();
        let space = WordSpace::new(&DisorderModel::Binary, &law, 12).unwrap();
        let reference = space.reference(true).to_distribution();
        assert_eq!(space.tilting_residual(&reference, &law, 0.0), 0.0);
        for g in [0.1, 1.0] {
            assert!(space.tilting_residual(&reference, &law, g).abs() < 1e-9);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut worst = 0.0f64;
        for trial in 0..200 {
            let q = random_q(space.len(), &mut rng, trial % 2 == 0);
            for g in [0.1, 1.0] {
                worst = worst.max(space.tilting_residual(&q, &law, g).abs());
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn truncation_converges_to_closed_form() {
        let law = srw();
        let b = DisorderModel::Binary;
        let (beta, h) = (1.0, 0.0);
        let g = annealed_excess_free_energy(beta, h, &b) + 0.2;
        let closed = annealed_slope(beta, h, g, &law, &b);
        let mut last = f64::INFINITY;
        for l in [20, 40, 80, 160] {
            let space = WordSpace::new(&b, &law, l).unwrap();
            let gap = (space.log_partition(&space.reference(false), beta, h, g) - closed).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-3, "{last}");
    }
}
