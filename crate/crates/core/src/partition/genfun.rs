//! Excursion-indexed generating function
//! `F_N(g) = Σ_{0<k_1<…<k_N} Π_i e^{−g m_i} ρ(m_i) ψ((k_{i−1}, k_i])`
//! and its growth rate `Ŝ(β, h; g)` in `N`.

use serde::{Deserialize, Serialize};

use super::engine::{reversed, ScaledHistory};
use super::{prefix_sums, ModelParams};
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::exec::Exec;
use crate::numerics::{illinois, log_add_exp, log_half_one_plus_exp, log_sum_exp, mean_stderr, ols};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenFunOptions {
    /// Largest excursion count.
    pub n_max: usize,
    /// Entries more than `trim` nats below the layer maximum are dropped.
    pub trim: f64,
    /// Relative mass allowed to fall outside the excursion-length window per
    /// layer.
    pub eps: f64,
}

impl Default for GenFunOptions {
    fn default() -> Self {
        GenFunOptions { n_max: 400, trim: 80.0, eps: 1e-13 }
    }
}

#[derive(Clone, Debug)]
pub struct GenFun {
    pub g: f64,
    /// `log F_N` for `N = 0..=n_max` (`log F_0 = 0`).
    pub log_f: Vec<f64>,
    /// Excursion-length window in monomers.
    pub window: usize,
    /// Furthest position carrying weight.
    pub reach: usize,
    pub s_hat: f64,
    pub fit_residual: f64,
}

/// `Ŝ` and its replica spread at one tilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SSample {
    pub g: f64,
    pub mean: f64,
    pub stderr: f64,
    pub per_replica: Vec<f64>,
}

/// Zero of `g ↦ Ŝ(β, h; g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SRoot {
    pub g: f64,
    pub sigma: f64,
    /// `∂Ŝ/∂g` near the root.
    pub slope: f64,
    pub at_root: SSample,
    pub evaluations: usize,
}

/// Largest drop `max_{i<j} (S_i − S_j)` over the given points.
fn max_drawdown(points: impl Iterator<Item = f64>) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut d: f64 = 0.0;
    for s in points {
        peak = peak.max(s);
        d = d.max(peak - s);
    }
    d
}

/// `F_1, …, F_{N_max}` for one disorder sequence. Returns `Ok(None)` when the
/// sequence is too short to hold the weight of `N_max` excursions.
pub fn excursion_generating_function(
    params: ModelParams,
    omega: &[f64],
    law: &ExcursionLaw,
    opts: GenFunOptions,
) -> Result<Option<GenFun>> {
    let g = params.g;
    if !(g > 0.0) {
        return Err(Error::NonPositiveTilt(g));
    }
    let p = law.period();
    let len = omega.len() / p;
    if len < 2 {
        return Ok(None);
    }
    let s = prefix_sums(omega, params.h, len * p);
    let v: Vec<f64> = (0..=len).map(|i| 2.0 * params.beta * s[i * p]).collect();

    // Window: dropped lengths carry at most eps of the shortest-excursion term.
    let log_psi_max = log_half_one_plus_exp(max_drawdown(v.iter().copied()));
    let wmax = (law.m_max() / p).min(len);
    let log_weight = |d: usize| -g * (d * p) as f64 + law.log_prob(d * p);
    let mut log_suffix = law.tail_series(g, 1.0, 0.0).ln();
    for d in (wmax + 1)..=(law.m_max() / p) {
        log_suffix = log_add_exp(log_suffix, log_weight(d));
    }
    let threshold = opts.eps.ln() - std::f64::consts::LN_2 + log_weight(1) - log_psi_max;
    let mut wc = wmax;
    while wc > 1 {
        let next = log_add_exp(log_suffix, log_weight(wc));
        if next > threshold {
            break;
        }
        log_suffix = next;
        wc -= 1;
    }
    let kernel: Vec<f64> = (0..=wc).map(|d| if d == 0 { 0.0 } else { log_weight(d).exp() }).collect();
    let krev = reversed(&kernel);

    let mut log_f = vec![0.0; opts.n_max + 1];
    let mut lo = 0usize;
    let mut vals = vec![0.0f64];
    let mut reach = 0usize;
    let mut scratch = Vec::new();
    for layer in log_f.iter_mut().skip(1) {
        let mut a = ScaledHistory::new(lo, vals.len());
        let mut b = ScaledHistory::new(lo, vals.len());
        for (k, &x) in vals.iter().enumerate() {
            a.push(x);
            b.push(x + v[lo + k]);
        }
        let hi_prev = lo + vals.len() - 1;
        let new_lo = lo + 1;
        let new_hi = (hi_prev + wc).min(len);
        let mut next = Vec::with_capacity(new_hi + 1 - new_lo);
        for i in new_lo..=new_hi {
            let la = a.correlate(i, &krev, &mut scratch);
            let lb = b.correlate(i, &krev, &mut scratch);
            next.push(log_add_exp(la, lb - v[i]) - std::f64::consts::LN_2);
        }
        let max = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if new_hi == len && hi_prev + wc > len && *next.last().unwrap() > max - opts.trim {
            return Ok(None);
        }
        *layer = log_sum_exp(next.iter().copied());
        let first = next.iter().position(|x| *x >= max - opts.trim).unwrap();
        let last = next.iter().rposition(|x| *x >= max - opts.trim).unwrap();
        lo = new_lo + first;
        vals = next[first..=last].to_vec();
        reach = reach.max(lo + vals.len() - 1);
    }
    let from = (opts.n_max / 2).max(1);
    let xs: Vec<f64> = (from..=opts.n_max).map(|n| n as f64).collect();
    let ys: Vec<f64> = (from..=opts.n_max).map(|n| log_f[n]).collect();
    let fit = ols(&xs, &ys);
    Ok(Some(GenFun { g, log_f, window: wc * p, reach: reach * p, s_hat: fit.slope, fit_residual: fit.residual_sd }))
}

/// Generating function for the disorder of seed `seed`, lengthening the
/// sequence (same prefix) until it holds the weight.
pub fn replica_generating_function(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    seed: u64,
    opts: GenFunOptions,
) -> Result<GenFun> {
    let mut len = (opts.n_max * 8 * law.period()).max(1024);
    loop {
        let omega = model.sample(len, seed);
        if let Some(f) = excursion_generating_function(params, &omega, law, opts)? {
            return Ok(f);
        }
        if len > 1 << 26 {
            return Err(Error::Domain("generating function weight does not settle".into()));
        }
        len *= 2;
    }
}

/// Replica mean of `Ŝ(β, h; g)`; replica `r` uses disorder seed `seed + r`.
#[allow(clippy::too_many_arguments)]
pub fn s_hat(
    params: ModelParams,
    model: &DisorderModel,
    law: &ExcursionLaw,
    replicas: usize,
    seed: u64,
    opts: GenFunOptions,
    exec: Exec,
) -> Result<SSample> {
    let vals: Vec<Result<f64>> = exec.map(replicas, |r| {
        replica_generating_function(params, model, law, seed.wrapping_add(r as u64), opts).map(|f| f.s_hat)
    });
    let per_replica = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let (mean, stderr) = mean_stderr(&per_replica);
    Ok(SSample { g: params.g, mean, stderr, per_replica })
}

/// Root in `g` of the replica-mean `Ŝ`, with common disorder across `g`.
#[allow(clippy::too_many_arguments)]
pub fn s_hat_root(
    beta: f64,
    h: f64,
    model: &DisorderModel,
    law: &ExcursionLaw,
    replicas: usize,
    seed: u64,
    opts: GenFunOptions,
    exec: Exec,
    bracket: (f64, f64),
    tol: f64,
) -> Result<SRoot> {
    let mut evaluations = 0;
    let mut eval = |g: f64| -> Result<SSample> {
        evaluations += 1;
        s_hat(ModelParams { beta, h, g }, model, law, replicas, seed, opts, exec)
    };
    let (mut a, mut b) = bracket;
    let mut sa = eval(a)?;
    let mut tries = 0;
    while sa.mean <= 0.0 {
        tries += 1;
        if tries > 12 {
            return Err(Error::NoBracket { lo: a, hi: b });
        }
        b = a;
        a *= 0.5;
        sa = eval(a)?;
    }
    let mut sb = eval(b)?;
    tries = 0;
    while sb.mean >= 0.0 {
        tries += 1;
        if tries > 12 {
            return Err(Error::NoBracket { lo: a, hi: b });
        }
        a = b;
        sa = sb;
        b *= 1.5;
        sb = eval(b)?;
    }
    let mut samples: Vec<SSample> = vec![sa.clone(), sb.clone()];
    let mut failure = None;
    let root = illinois(
        |g| match eval(g) {
            Ok(s) => {
                let m = s.mean;
                samples.push(s);
                m
            }
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        (a, sa.mean),
        (b, sb.mean),
        tol,
        60,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let at_root = match samples.iter().find(|s| s.g == root) {
        Some(s) => s.clone(),
        None => {
            let s = s_hat(ModelParams { beta, h, g: root }, model, law, replicas, seed, opts, exec)?;
            evaluations += 1;
            s
        }
    };
    // secant slope from the two evaluated tilts nearest the root on either side
    let below = samples.iter().filter(|s| s.g < root).max_by(|x, y| x.g.total_cmp(&y.g));
    let above = samples.iter().filter(|s| s.g > root).min_by(|x, y| x.g.total_cmp(&y.g));
    let slope = match (below, above) {
        (Some(l), Some(u)) => (u.mean - l.mean) / (u.g - l.g),
        _ => (sb.mean - sa.mean) / (b - a),
    };
    let sigma = at_root.stderr / slope.abs();
    Ok(SRoot { g: root, sigma, slope, at_root, evaluations })
}
