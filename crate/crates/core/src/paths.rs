//! Exact backward sampling of excursion decompositions from the renewal
//! table, and the return-count diagnostics built on it.
//!
//! Only the return points and the side of each excursion are sampled; the
//! Hamiltonian sees nothing else of the path.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annealed::annealed_slope;
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::exec::{stream_seed, Exec};
use crate::numerics::{log_half_one_plus_exp, log_sum_exp, mean_stderr};
use crate::partition::{constrained_log_z, rewarded_log_z, s_hat, DpOptions, GenFunOptions, LogDpTable, ModelParams, SSample};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSample {
    /// `0 = k_0 < … < k_T`; `k_T = n` unless the endpoint is free.
    pub return_points: Vec<usize>,
    /// `+1` above, `−1` below, one per excursion and one for a nonempty
    /// final stretch.
    pub signs: Vec<i8>,
    /// Length of the unfinished last excursion (0 when constrained).
    pub final_stretch: usize,
    /// Returns in `1..=n`.
    pub m_n: usize,
}

impl PathSample {
    pub fn gaps(&self) -> Vec<usize> {
        self.return_points.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[inline]
fn below_probability(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Sampler over one disorder realization. Holds the distribution of the last
/// return for the free endpoint.
pub struct PathSampler<'a> {
    table: &'a LogDpTable,
    law: &'a ExcursionLaw,
    /// Cumulative law of the last return `k` (free endpoint).
    last_return: Vec<(usize, f64)>,
    free_log_z: f64,
}

impl<'a> PathSampler<'a> {
    pub fn new(table: &'a LogDpTable, law: &'a ExcursionLaw) -> Result<Self> {
        let n = table.n();
        if table.log_z[n] == f64::NEG_INFINITY && n % law.period() == 0 {
            return Err(Error::EmptyEndpoint);
        }
        let beta2 = 2.0 * table.beta;
        let s = &table.prefix_sums;
        let terms: Vec<(usize, f64)> = (0..=n)
            .filter(|&k| table.log_z[k] > f64::NEG_INFINITY)
            .map(|k| {
                let tail = law.survival(n - k).ln();
                (k, table.log_z[k] + tail + log_half_one_plus_exp(-beta2 * (s[n] - s[k])))
            })
            .filter(|(_, w)| *w > f64::NEG_INFINITY)
            .collect();
        let free_log_z = log_sum_exp(terms.iter().map(|t| t.1));
        if !free_log_z.is_finite() {
            return Err(Error::EmptyEndpoint);
        }
        let mut acc = 0.0;
        let last_return = terms
            .into_iter()
            .map(|(k, w)| {
                acc += (w - free_log_z).exp();
                (k, acc)
            })
            .collect();
        Ok(PathSampler { table, law, last_return, free_log_z })
    }

    pub fn free_log_z(&self) -> f64 {
        self.free_log_z
    }

    fn side<R: Rng>(&self, a: usize, b: usize, rng: &mut R) -> i8 {
        let u = -2.0 * self.table.beta * (self.table.prefix_sums[b] - self.table.prefix_sums[a]);
        if rng.random::<f64>() < below_probability(u) {
            -1
        } else {
            1
        }
    }

    /// Previous return before `j`, drawn by walking the excursion length up
    /// from the shortest one until the cumulative weight passes a uniform.
    fn previous<R: Rng>(&self, j: usize, rng: &mut R) -> usize {
        let t = self.table;
        let p = self.law.period();
        let lz = t.log_z[j];
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        let mut last = None;
        let mut d = p;
        while d <= j.min(t.window) {
            let k = j - d;
            if t.log_z[k] > f64::NEG_INFINITY {
                let w = (t.log_z[k] + self.law.log_prob(d) + t.reward + t.log_psi(k, j) - lz).exp();
                if w > 0.0 {
                    acc += w;
                    last = Some(k);
                    if acc > u {
                        return k;
                    }
                }
            }
            d += p;
        }
        // rounding left the total a hair below one
        last.expect("positive partition sum has a predecessor")
    }

    fn backward<R: Rng>(&self, end: usize, rng: &mut R) -> (Vec<usize>, Vec<i8>) {
        let mut points = vec![end];
        let mut j = end;
        while j > 0 {
            j = self.previous(j, rng);
            points.push(j);
        }
        points.reverse();
        let signs = points.windows(2).map(|w| self.side(w[0], w[1], rng)).collect();
        (points, signs)
    }

    /// A path pinned at `n`.
    pub fn sample_constrained<R: Rng>(&self, rng: &mut R) -> Result<PathSample> {
        let n = self.table.n();
        if self.table.log_z[n] == f64::NEG_INFINITY {
            return Err(Error::EmptyEndpoint);
        }
        let (return_points, signs) = self.backward(n, rng);
        let m_n = return_points.len() - 1;
        Ok(PathSample { return_points, signs, final_stretch: 0, m_n })
    }

    /// A path with free endpoint: the last return is drawn first.
    pub fn sample_free<R: Rng>(&self, rng: &mut R) -> PathSample {
        let n = self.table.n();
        let u = rng.random::<f64>() * self.last_return.last().map_or(1.0, |l| l.1);
        let idx = self.last_return.partition_point(|&(_, c)| c <= u).min(self.last_return.len() - 1);
        let k = self.last_return[idx].0;
        let (return_points, mut signs) = self.backward(k, rng);
        if k < n {
            signs.push(self.side(k, n, rng));
        }
        let m_n = return_points.len() - 1;
        PathSample { return_points, signs, final_stretch: n - k, m_n }
    }
}

/// One path from a fresh table; `free` selects the endpoint convention.
pub fn sample_path(table: &LogDpTable, law: &ExcursionLaw, free: bool, seed: u64) -> Result<PathSample> {
    let sampler = PathSampler::new(table, law)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if free {
        Ok(sampler.sample_free(&mut rng))
    } else {
        sampler.sample_constrained(&mut rng)
    }
}

/// Return points and final-stretch length of a path.
pub type Decomposition = (Vec<usize>, usize);

/// Exact law of decompositions by enumeration; exponential in `n`, for
/// checking the sampler on short chains. `free` selects the endpoint
/// convention.
pub fn exact_decomposition_law(table: &LogDpTable, law: &ExcursionLaw, free: bool) -> HashMap<Decomposition, f64> {
    let n = table.n();
    let beta2 = 2.0 * table.beta;
    let s = &table.prefix_sums;
    let mut out = HashMap::new();
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(vec![0], 0.0)];
    while let Some((pts, lw)) = stack.pop() {
        let k = *pts.last().expect("starts at 0");
        if free {
            let tail = law.survival(n - k).ln() + log_half_one_plus_exp(-beta2 * (s[n] - s[k]));
            if tail > f64::NEG_INFINITY {
                out.insert((pts.clone(), n - k), lw + tail);
            }
        } else if k == n {
            out.insert((pts.clone(), 0), lw);
        }
        for d in 1..=(n - k) {
            if law.prob(d) > 0.0 {
                let mut next = pts.clone();
                next.push(k + d);
                stack.push((next, lw + law.log_prob(d) + table.reward + table.log_psi(k, k + d)));
            }
        }
    }
    let z = log_sum_exp(out.values().copied());
    out.values_mut().for_each(|v| *v = (*v - z).exp());
    out
}

/// Total variation between the exact decomposition law and the empirical
/// law of `samples` draws, with the largest per-cell deviation in binomial
/// standard deviations.
pub fn sampler_total_variation(
    table: &LogDpTable,
    law: &ExcursionLaw,
    free: bool,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let exact = exact_decomposition_law(table, law, free);
    let sampler = PathSampler::new(table, law)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: HashMap<Decomposition, usize> = HashMap::new();
    for _ in 0..samples {
        let s = if free { sampler.sample_free(&mut rng) } else { sampler.sample_constrained(&mut rng)? };
        *counts.entry((s.return_points, s.final_stretch)).or_default() += 1;
    }
    let mut dist = 0.0;
    let mut worst: f64 = 0.0;
    for (key, p) in &exact {
        let f = counts.get(key).copied().unwrap_or(0) as f64 / samples as f64;
        dist += (f - p).abs();
        let sd = (p * (1.0 - p) / samples as f64).sqrt().max(1e-12);
        worst = worst.max((f - p).abs() / sd);
    }
    // mass on decompositions the enumeration rules out
    let stray = counts.iter().filter(|(k, _)| !exact.contains_key(*k)).map(|(_, c)| *c).sum::<usize>();
    if stray > 0 {
        dist += stray as f64 / samples as f64;
        worst = f64::INFINITY;
    }
    Ok((0.5 * dist, worst))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Delocalized,
    NearCritical,
    Localized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub dp: DpOptions,
    pub free_end: bool,
    /// Localized when `ĝ > localized_mult · stderr`.
    pub localized_mult: f64,
    /// Near-critical when `ĝ > near_mult · stderr` short of localized.
    pub near_mult: f64,
    /// Difference step for `Ĉ`, relative to `ĝ`.
    pub rel_step: f64,
    /// Compute `Ĉ` in the localized regime.
    pub derivative: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            dp: DpOptions { window: Some(8192) },
            free_end: true,
            localized_mult: 10.0,
            near_mult: 3.0,
            rel_step: 0.02,
            derivative: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `Ĉ = −1/(∂Ŝ/∂g)` at `g = ĝ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnDensity {
    pub g: f64,
    pub step: f64,
    /// Richardson-refined central estimate.
    pub value: f64,
    /// Replica error combined with the Richardson correction.
    pub error: f64,
    pub central: f64,
    pub left: f64,
    pub right: f64,
}

fn density_from_differences(g: f64, step: f64, per_replica: &[[f64; 5]]) -> ReturnDensity {
    // columns: −e, −e/2, 0, e/2, e
    let col = |f: &dyn Fn(&[f64; 5]) -> f64| -> Vec<f64> { per_replica.iter().map(f).collect() };
    let d1 = col(&|r| (r[4] - r[0]) / (2.0 * step));
    let d2 = col(&|r| (r[3] - r[1]) / step);
    let rich: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let (value, stat) = mean_stderr(&rich);
    let (central, _) = mean_stderr(&d1);
    let (left, _) = mean_stderr(&col(&|r| (r[2] - r[0]) / step));
    let (right, _) = mean_stderr(&col(&|r| (r[4] - r[2]) / step));
    ReturnDensity { g, step, value, error: (stat * stat + (value - central).powi(2)).sqrt(), central, left, right }
}

/// `Ĉ` from the partition sums. A reward `ε` per completed excursion moves
/// the free energy to `ĝ(ε)` with `Ŝ(β, h; ĝ(ε)) = −ε`, so `−1/(∂Ŝ/∂g)` is
/// `dĝ/dε`, taken by differences in `ε` with common disorder.
#[allow(clippy::too_many_arguments)]
pub fn return_density(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    n: usize,
    replicas: usize,
    seed: u64,
    step: f64,
    opts: DpOptions,
    exec: Exec,
) -> Result<ReturnDensity> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("difference step must be positive (got {step})")));
    }
    let nf = n as f64;
    let rows: Vec<Result<[f64; 5]>> = exec.map(replicas, |r| {
        let omega = model.sample(n, seed.wrapping_add(r as u64));
        let mut row = [0.0; 5];
        for (slot, e) in row.iter_mut().zip([-1.0, -0.5, 0.0, 0.5, 1.0]) {
            let t = rewarded_log_z(params, &omega, law, n, opts, e * step)?;
            *slot = t.free_log_z(law) / nf;
        }
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (g, _) = mean_stderr(&rows.iter().map(|r| r[2]).collect::<Vec<_>>());
    Ok(density_from_differences(g, step, &rows))
}

/// `Ĉ` from differences of the generating-function slope `Ŝ` in `g`. The
/// finite-`N` slope converges slowly in its `g`-derivative; see
/// [`return_density`] for the partition-sum route.
#[allow(clippy::too_many_arguments)]
pub fn return_density_genfun(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    replicas: usize,
    seed: u64,
    step: f64,
    opts: GenFunOptions,
    exec: Exec,
) -> Result<ReturnDensity> {
    let g = params.g;
    let at = |x: f64| -> Result<SSample> { s_hat(params.with_g(x), model, law, replicas, seed, opts, exec) };
    let cols = [at(g - step)?, at(g - 0.5 * step)?, at(g)?, at(g + 0.5 * step)?, at(g + step)?];
    // Ŝ is decreasing in g; swap the roles so that differences give −∂Ŝ/∂g.
    let rows: Vec<[f64; 5]> =
        (0..replicas).map(|r| std::array::from_fn(|i| -cols[i].per_replica[r])).collect();
    let d = density_from_differences(g, step, &rows);
    let inv = |x: f64| 1.0 / x;
    Ok(ReturnDensity {
        value: inv(d.value),
        error: d.error / (d.value * d.value),
        central: inv(d.central),
        left: inv(d.left),
        right: inv(d.right),
        ..d
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogBoundCheck {
    pub c: f64,
    pub threshold: f64,
    pub exceed_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub replica: usize,
    pub path: usize,
    pub m_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostic {
    pub beta: f64,
    pub h: f64,
    pub n: usize,
    pub seed: u64,
    pub regime: Regime,
    pub g_hat: Estimate,
    /// Replica mean of the per-replica path average of `𝓜_n/n`.
    pub mn_over_n: Estimate,
    pub c_from_derivative: Option<ReturnDensity>,
    /// `(q, quantile of 𝓜_n / log n)`, reported off the localized regime.
    pub log_quantiles: Option<Vec<(f64, f64)>>,
    pub log_bound: Option<LogBoundCheck>,
    pub records: Vec<ReturnRecord>,
}

pub fn classify(g_hat: Estimate, localized_mult: f64, near_mult: f64) -> Regime {
    if g_hat.value > localized_mult * g_hat.stderr {
        Regime::Localized
    } else if g_hat.value > near_mult * g_hat.stderr {
        Regime::NearCritical
    } else {
        Regime::Delocalized
    }
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Log-bound constant `c = 10 α / |S^ann(β, h; 0)|`, defined when the
/// annealed slope at zero tilt is negative. The quenched slope lies below the
/// annealed one, so this `c` is at least the quenched version.
pub fn log_bound_constant(beta: f64, h: f64, law: &ExcursionLaw, model: &DisorderModel) -> Option<f64> {
    let s0 = annealed_slope(beta, h, 0.0, law, model);
    (s0 < 0.0).then(|| 10.0 * law.alpha() / s0.abs())
}

struct ReplicaPaths {
    free_log_z: f64,
    m_n: Vec<usize>,
}

/// Return-count statistics under the quenched path measure. Replica `r` uses
/// disorder seed `seed + r` and path streams `stream_seed(seed, r, path)`.
#[allow(clippy::too_many_arguments)]
pub fn return_count_statistics(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    n: usize,
    replicas: usize,
    paths_per_replica: usize,
    seed: u64,
    opts: PathOptions,
    exec: Exec,
) -> Result<PhaseDiagnostic> {
    if replicas < 2 || paths_per_replica == 0 {
        return Err(Error::Domain("need at least two replicas and one path each".into()));
    }
    let runs: Vec<Result<ReplicaPaths>> = exec.map(replicas, |r| {
        let omega = model.sample(n, seed.wrapping_add(r as u64));
        let table = constrained_log_z(params, &omega, law, n, opts.dp)?;
        let sampler = PathSampler::new(&table, law)?;
        let mut m_n = Vec::with_capacity(paths_per_replica);
        for path in 0..paths_per_replica {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, r as u64, path as u64));
            let s = if opts.free_end { sampler.sample_free(&mut rng) } else { sampler.sample_constrained(&mut rng)? };
            m_n.push(s.m_n);
        }
        Ok(ReplicaPaths { free_log_z: sampler.free_log_z(), m_n })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let fe: Vec<f64> = runs.iter().map(|r| r.free_log_z / nf).collect();
    let (gv, gs) = mean_stderr(&fe);
    let g_hat = Estimate { value: gv, stderr: gs };
    let per_replica: Vec<f64> =
        runs.iter().map(|r| r.m_n.iter().sum::<usize>() as f64 / (r.m_n.len() as f64 * nf)).collect();
    let (mv, ms) = mean_stderr(&per_replica);
    let regime = classify(g_hat, opts.localized_mult, opts.near_mult);
    let records: Vec<ReturnRecord> = runs
        .iter()
        .enumerate()
        .flat_map(|(replica, r)| r.m_n.iter().enumerate().map(move |(path, &m_n)| ReturnRecord { replica, path, m_n }))
        .collect();
    let log_n = nf.ln();
    let log_quantiles = (regime != Regime::Localized).then(|| {
        let mut v: Vec<f64> = records.iter().map(|r| r.m_n as f64 / log_n).collect();
        v.sort_by(f64::total_cmp);
        [0.5, 0.9, 0.95, 0.99].iter().map(|&q| (q, quantile(&v, q))).collect()
    });
    let log_bound = log_bound_constant(params.beta, params.h, law, model).map(|c| {
        let threshold = c * log_n;
        let exceed = records.iter().filter(|r| r.m_n as f64 > threshold).count();
        LogBoundCheck { c, threshold, exceed_fraction: exceed as f64 / records.len() as f64 }
    });
    let c_from_derivative = if regime == Regime::Localized && opts.derivative {
        Some(return_density(params, model, law, n, replicas, seed, opts.rel_step * gv, opts.dp, exec)?)
    } else {
        None
    };
    Ok(PhaseDiagnostic {
        beta: params.beta,
        h: params.h,
        n,
        seed,
        regime,
        g_hat,
        mn_over_n: Estimate { value: mv, stderr: ms },
        c_from_derivative,
        log_quantiles,
        log_bound,
        records,
    })
}
