//! Log-domain partition sums of the excursion renewal representation.
//!
//! A path is a sequence of excursions away from the interface with lengths
//! drawn from ρ; an excursion over `I = (a, b]` placed below the interface
//! gets weight `e^{−2β Σ_{k∈I}(ω_k + h)}`, one above gets 1, each side with
//! probability ½. Everything is measured relative to the path that stays
//! above, so `(1/n) log Z̃_n` is the excess free energy directly.

pub(crate) mod engine;
mod critical;
mod genfun;

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::exec::Exec;
use crate::numerics::{log_half_one_plus_exp, log_sum_exp, mean_stderr};

pub use critical::{critical_h, is_localized, CriticalEstimate, CriticalOptions};
pub use genfun::{
    excursion_generating_function, replica_generating_function, s_hat, s_hat_root, GenFun, GenFunOptions, SRoot,
    SSample,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub h: f64,
    /// Tilt; only used by the generating function.
    #[serde(default)]
    pub g: f64,
}

impl ModelParams {
    pub fn new(beta: f64, h: f64) -> Self {
        ModelParams { beta, h, g: 0.0 }
    }
    pub fn with_g(self, g: f64) -> Self {
        ModelParams { g, ..self }
    }
}

/// `window` caps the excursion lengths entering the recursion; `None` keeps
/// every length up to `min(n, m_max)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpOptions {
    pub window: Option<usize>,
}

/// `log ψ` for an excursion whose letters plus bias sum to `segment_sum`:
/// `log(½(1 + e^{−2β·segment_sum}))`.
#[inline]
pub fn log_excursion_weight(beta: f64, segment_sum: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    log_half_one_plus_exp(-2.0 * beta * segment_sum)
}

/// `S_k = Σ_{t≤k} (ω_t + h)` for `k = 0..=n`.
pub fn prefix_sums(omega: &[f64], h: f64, n: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    s.push(0.0);
    for w in &omega[..n] {
        acc += w + h;
        s.push(acc);
    }
    s
}

/// Constrained partition sums for one disorder realization.
#[derive(Clone, Debug)]
pub struct LogDpTable {
    pub beta: f64,
    pub h: f64,
    /// `log Z̃_{j,0}` for `j = 0..=n`; `−∞` off the return lattice.
    pub log_z: Vec<f64>,
    /// `S_k` for `k = 0..=n`.
    pub prefix_sums: Vec<f64>,
    /// Largest excursion length used.
    pub window: usize,
    /// Log weight added per completed excursion.
    pub reward: f64,
}

impl LogDpTable {
    pub fn n(&self) -> usize {
        self.log_z.len() - 1
    }

    /// `log ψ((a, b])`.
    pub fn log_psi(&self, a: usize, b: usize) -> f64 {
        log_excursion_weight(self.beta, self.prefix_sums[b] - self.prefix_sums[a])
    }

    /// Free-endpoint partition sum.
    pub fn free_log_z(&self, law: &ExcursionLaw) -> f64 {
        let v: Vec<f64> = self.prefix_sums.iter().map(|s| 2.0 * self.beta * s).collect();
        free_from(&self.log_z, &v, law)
    }
}

fn effective_window(law: &ExcursionLaw, n: usize, opts: DpOptions) -> usize {
    let w = opts.window.unwrap_or(usize::MAX).min(n).min(law.m_max());
    w.max(law.period().min(n))
}

/// Renewal sums on the full time axis from a potential given at every time.
fn log_z_from_potential(v: Option<&[f64]>, law: &ExcursionLaw, n: usize, window: usize, reward: f64) -> Vec<f64> {
    let p = law.period();
    let len = n / p;
    let mut kernel = law.lattice_kernel(window);
    if reward != 0.0 {
        let f = reward.exp();
        kernel.iter_mut().for_each(|k| *k *= f);
    }
    let lattice_v: Option<Vec<f64>> = v.map(|v| (0..=len).map(|i| v[i * p]).collect());
    let compressed = engine::renewal(&kernel, lattice_v.as_deref(), len);
    let mut full = vec![f64::NEG_INFINITY; n + 1];
    for (i, z) in compressed.into_iter().enumerate() {
        full[i * p] = z;
    }
    full
}

/// `log Σ_k Z[k] · ½ ρ̄(n−k) (1 + e^{−(V_n − V_k)})`.
fn free_from(log_z: &[f64], v: &[f64], law: &ExcursionLaw) -> f64 {
    let n = log_z.len() - 1;
    log_sum_exp((0..=n).filter(|k| log_z[*k] > f64::NEG_INFINITY).map(|k| {
        log_z[k] + law.survival(n - k).ln() + log_half_one_plus_exp(-(v[n] - v[k]))
    }))
}

fn check_len(omega: &[f64], n: usize) -> Result<()> {
    if n == 0 || omega.len() < n {
        return Err(Error::Domain(format!("need 1 ≤ n ≤ |ω| (n = {n}, |ω| = {})", omega.len())));
    }
    Ok(())
}

/// Constrained quenched partition sums `log Z̃_{j,0}`, `j ≤ n`.
pub fn constrained_log_z(
    params: ModelParams,
    omega: &[f64],
    law: &ExcursionLaw,
    n: usize,
    opts: DpOptions,
) -> Result<LogDpTable> {
    rewarded_log_z(params, omega, law, n, opts, 0.0)
}

/// As [`constrained_log_z`] with every completed excursion weighted by
/// `e^reward`, so that `∂ log Z̃_n / ∂reward` is the mean return count.
pub fn rewarded_log_z(
    params: ModelParams,
    omega: &[f64],
    law: &ExcursionLaw,
    n: usize,
    opts: DpOptions,
    reward: f64,
) -> Result<LogDpTable> {
    check_len(omega, n)?;
    let prefix = prefix_sums(omega, params.h, n);
    let window = effective_window(law, n, opts);
    let log_z = if params.beta == 0.0 {
        log_z_from_potential(None, law, n, window, reward)
    } else {
        let v: Vec<f64> = prefix.iter().map(|s| 2.0 * params.beta * s).collect();
        log_z_from_potential(Some(&v), law, n, window, reward)
    };
    Ok(LogDpTable { beta: params.beta, h: params.h, log_z, prefix_sums: prefix, window, reward })
}

/// Free-endpoint quenched partition sum `log Z̃_n`.
pub fn free_log_z(params: ModelParams, omega: &[f64], law: &ExcursionLaw, n: usize, opts: DpOptions) -> Result<f64> {
    Ok(constrained_log_z(params, omega, law, n, opts)?.free_log_z(law))
}

/// Per-monomer growth `c = M(2β) − 2βh` of the averaged below-side weight.
pub fn annealed_rate(beta: f64, h: f64, model: &DisorderModel) -> f64 {
    model.cumulant(2.0 * beta) - 2.0 * beta * h
}

fn annealed_potential(beta: f64, h: f64, model: &DisorderModel, n: usize) -> Vec<f64> {
    let c = annealed_rate(beta, h, model);
    (0..=n).map(|k| -c * k as f64).collect()
}

/// Annealed constrained partition sums, `ψ` replaced by
/// `½(1 + e^{m(M(2β) − 2βh)})`.
pub fn annealed_constrained_log_z(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    n: usize,
    opts: DpOptions,
) -> Vec<f64> {
    let window = effective_window(law, n, opts);
    if params.beta == 0.0 {
        return log_z_from_potential(None, law, n, window, 0.0);
    }
    let v = annealed_potential(params.beta, params.h, model, n);
    log_z_from_potential(Some(&v), law, n, window, 0.0)
}

/// Annealed free-endpoint partition sum.
pub fn annealed_log_z(params: ModelParams, model: &DisorderModel, law: &ExcursionLaw, n: usize, opts: DpOptions) -> f64 {
    let log_z = annealed_constrained_log_z(params, model, law, n, opts);
    let v = if params.beta == 0.0 { vec![0.0; n + 1] } else { annealed_potential(params.beta, params.h, model, n) };
    free_from(&log_z, &v, law)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub replicas: usize,
    /// `log Z̃_n` per replica.
    pub per_replica_log_z: Vec<f64>,
}

/// Replica mean of `(1/n) log Z̃_n`; replica `r` uses disorder seed `seed + r`.
#[allow(clippy::too_many_arguments)]
pub fn quenched_free_energy(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    n: usize,
    replicas: usize,
    seed: u64,
    opts: DpOptions,
    exec: Exec,
) -> Result<FreeEnergyEstimate> {
    if replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    let logs: Vec<Result<f64>> = exec.map(replicas, |r| {
        let omega = model.sample(n, seed.wrapping_add(r as u64));
        free_log_z(params, &omega, law, n, opts)
    });
    let per_replica_log_z = logs.into_iter().collect::<Result<Vec<f64>>>()?;
    let fe: Vec<f64> = per_replica_log_z.iter().map(|z| z / n as f64).collect();
    let (value, stderr) = mean_stderr(&fe);
    Ok(FreeEnergyEstimate { value, stderr, n, replicas, per_replica_log_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursions::ExcursionLaw;

    /// All compositions of `n` into parts from the law's support, with their
    /// log weights `Σ log ρ(m_i) + log ψ_i`.
    fn enumerate(n: usize, law: &ExcursionLaw, beta: f64, s: &[f64]) -> Vec<(Vec<usize>, f64)> {
        fn rec(
            start: usize,
            n: usize,
            law: &ExcursionLaw,
            beta: f64,
            s: &[f64],
            cur: &mut Vec<usize>,
            lw: f64,
            out: &mut Vec<(Vec<usize>, f64)>,
        ) {
            if start == n {
                out.push((cur.clone(), lw));
                return;
            }
            for m in 1..=(n - start) {
                let p = law.prob(m);
                if p == 0.0 {
                    continue;
                }
                let end = start + m;
                let seg = s[end] - s[start];
                // both sides explicitly
                let psi = 0.5 * (1.0 + (-2.0 * beta * seg).exp());
                cur.push(end);
                rec(end, n, law, beta, s, cur, lw + p.ln() + psi.ln(), out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, law, beta, s, &mut Vec::new(), 0.0, &mut out);
        out
    }

    fn enumerate_sides(n: usize, law: &ExcursionLaw, beta: f64, s: &[f64]) -> f64 {
        // every composition and every assignment of sides
        let mut total = 0.0;
        for (parts, _) in enumerate(n, law, beta, s) {
            let t = parts.len();
            for mask in 0..(1u32 << t) {
                let mut w = 1.0;
                let mut a = 0;
                for (i, &b) in parts.iter().enumerate() {
                    w *= law.prob(b - a) * 0.5;
                    if mask >> i & 1 == 1 {
                        w *= (-2.0 * beta * (s[b] - s[a])).exp();
                    }
                    a = b;
                }
                total += w;
            }
        }
        total.ln()
    }

    #[test]
    fn excursion_weight_examples() {
        assert_eq!(log_excursion_weight(0.0, 3.0), 0.0);
        assert!(log_excursion_weight(1.7, 0.0).abs() < 1e-16);
        let v = log_excursion_weight(1.0, -3.0);
        assert!((v - (0.5 * (1.0 + 6f64.exp())).ln()).abs() < 1e-14);
        assert!((v - 5.309328504577785).abs() < 1e-12);
        assert!((log_excursion_weight(1.0, -400.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn small_srw_decompositions() {
        let law = ExcursionLaw::srw(100).unwrap();
        let omega = [0.3, -1.2, 0.7, -0.4, 1.1];
        let p = ModelParams::new(0.8, 0.1);
        let t = constrained_log_z(p, &omega, &law, 4, DpOptions::default()).unwrap();
        assert!((t.log_z[2] - (law.log_prob(2) + t.log_psi(0, 2))).abs() < 1e-13);
        let two = law.log_prob(2) + t.log_psi(0, 2) + law.log_prob(2) + t.log_psi(2, 4);
        let one = law.log_prob(4) + t.log_psi(0, 4);
        let expect = crate::numerics::log_add_exp(one, two);
        assert!((t.log_z[4] - expect).abs() < 1e-13);
        assert_eq!(t.log_z[3], f64::NEG_INFINITY);
        // free endpoint at n = 3
        let t3 = constrained_log_z(p, &omega, &law, 3, DpOptions::default()).unwrap();
        let s = &t3.prefix_sums;
        let b = p.beta;
        let direct = (0.5 * law.survival(3) * (1.0 + (-2.0 * b * s[3]).exp())
            + t3.log_z[2].exp() * 0.5 * law.survival(1) * (1.0 + (-2.0 * b * (s[3] - s[2])).exp()))
        .ln();
        assert!((t3.free_log_z(&law) - direct).abs() < 1e-13);
    }

    #[test]
    fn brute_force_equivalence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let laws = [ExcursionLaw::srw(14).unwrap(), ExcursionLaw::power_law(1.5, 14, 1).unwrap()];
        for trial in 0..50 {
            let law = &laws[trial % 2];
            let n = if trial % 2 == 0 { 14 } else { 12 };
            let beta = rng.random_range(0.0..2.0);
            let h = rng.random_range(0.0..1.0);
            let omega = DisorderModel::Gaussian.sample(n, trial as u64);
            let p = ModelParams::new(beta, h);
            let t = constrained_log_z(p, &omega, law, n, DpOptions::default()).unwrap();
            let brute = enumerate_sides(n, law, beta, &t.prefix_sums);
            assert!((t.log_z[n] - brute).abs() < 1e-9, "trial {trial}: {} vs {brute}", t.log_z[n]);
        }
    }

    #[test]
    fn zero_beta_is_renewal_mass() {
        let law = ExcursionLaw::power_law(1.5, 200, 1).unwrap();
        let omega = DisorderModel::Binary.sample(60, 1);
        let t = constrained_log_z(ModelParams::new(0.0, 0.4), &omega, &law, 60, DpOptions::default()).unwrap();
        let mut u = vec![0.0; 61];
        u[0] = 1.0;
        for j in 1..=60 {
            u[j] = (1..=j).map(|m| law.prob(m) * u[j - m]).sum();
        }
        for j in 0..=60 {
            assert!((t.log_z[j] - u[j].ln()).abs() < 1e-12);
        }
        assert!(t.free_log_z(&law).abs() < 1e-12);
        let srw = ExcursionLaw::srw(1000).unwrap();
        let omega = DisorderModel::Gaussian.sample(301, 2);
        let z = free_log_z(ModelParams::new(0.0, 0.0), &omega, &srw, 301, DpOptions::default()).unwrap();
        assert!(z.abs() < 1e-12);
    }

    #[test]
    fn annealed_matches_disorder_average() {
        // E_ω Z̃ over all 2^n binary words equals the annealed sum
        let law = ExcursionLaw::srw(20).unwrap();
        let n = 10;
        let p = ModelParams::new(0.7, 0.2);
        let mut total = 0.0;
        for word in 0..(1u32 << n) {
            let omega: Vec<f64> = (0..n).map(|i| if word >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            total += free_log_z(p, &omega, &law, n, DpOptions::default()).unwrap().exp();
        }
        let avg = (total / (1u32 << n) as f64).ln();
        let ann = annealed_log_z(p, &DisorderModel::Binary, &law, n, DpOptions::default());
        assert!((avg - ann).abs() < 1e-12, "{avg} vs {ann}");
    }

    #[test]
    fn quenched_estimate_basics() {
        let law = ExcursionLaw::srw(10_000).unwrap();
        let model = DisorderModel::Binary;
        let est = quenched_free_energy(ModelParams::new(0.0, 0.3), &model, &law, 2000, 3, 5, DpOptions::default(), Exec::Sequential)
            .unwrap();
        assert!(est.value.abs() < 1e-12 && est.stderr < 1e-12);
        let a = quenched_free_energy(ModelParams::new(1.0, 0.0), &model, &law, 3000, 4, 5, DpOptions::default(), Exec::Sequential)
            .unwrap();
        let b = quenched_free_energy(ModelParams::new(1.0, 0.0), &model, &law, 3000, 4, 5, DpOptions::default(), Exec::Parallel)
            .unwrap();
        assert_eq!(a, b);
        let ann = annealed_log_z(ModelParams::new(1.0, 0.0), &model, &law, 3000, DpOptions::default());
        for z in &a.per_replica_log_z {
            assert!(*z < ann);
        }
        assert!(a.value > 0.0);
    }
}
