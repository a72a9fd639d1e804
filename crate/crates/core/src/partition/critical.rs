//! Bisection in `h` for the localization transition of the finite-`n`
//! estimator.

use serde::{Deserialize, Serialize};

use super::{quenched_free_energy, DpOptions, FreeEnergyEstimate, ModelParams};
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::exec::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    pub n: usize,
    pub replicas: usize,
    /// A point counts as localized when `ĝ > eps_mult · stderr`.
    pub eps_mult: f64,
    pub dp: DpOptions,
    /// Final bracket width.
    pub tol: f64,
    /// Offset used for the local slope `∂ĝ/∂h` on the localized side.
    pub slope_step: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions { n: 100_000, replicas: 32, eps_mult: 10.0, dp: DpOptions { window: Some(8192) }, tol: 1e-3, slope_step: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub beta: f64,
    pub h_c: f64,
    /// Spread from the replica error at the crossing, propagated through the
    /// local slope, combined with the bracket half-width.
    pub sigma: f64,
    pub slope: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    /// Estimate at the localized end of the final bracket.
    pub localized_side: FreeEnergyEstimate,
}

pub fn is_localized(est: &FreeEnergyEstimate, eps_mult: f64) -> bool {
    est.value > eps_mult * est.stderr
}

/// `ĥ_c(β)`: the `h` where the replica estimate of the excess free energy
/// drops to the noise floor. Disorder is common to every `h`.
pub fn critical_h(
    beta: f64,
    model: &DisorderModel,
    law: &ExcursionLaw,
    seed: u64,
    opts: CriticalOptions,
    exec: Exec,
    bracket: (f64, f64),
) -> Result<CriticalEstimate> {
    let mut evaluations = 0;
    let mut eval = |h: f64| {
        evaluations += 1;
        quenched_free_energy(ModelParams::new(beta, h), model, law, opts.n, opts.replicas, seed, opts.dp, exec)
    };
    let (mut lo, mut hi) = bracket;
    let mut lo_est = eval(lo)?;
    let hi_est = eval(hi)?;
    if !is_localized(&lo_est, opts.eps_mult) || is_localized(&hi_est, opts.eps_mult) {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let est = eval(mid)?;
        if is_localized(&est, opts.eps_mult) {
            lo = mid;
            lo_est = est;
        } else {
            hi = mid;
        }
    }
    let inner = eval(lo - opts.slope_step)?;
    let slope = (lo_est.value - inner.value) / opts.slope_step;
    let spread = lo_est.stderr / slope.abs();
    let half = 0.5 * (hi - lo);
    Ok(CriticalEstimate {
        beta,
        h_c: 0.5 * (lo + hi),
        sigma: (spread * spread + half * half).sqrt(),
        slope,
        bracket: (lo, hi),
        evaluations,
        localized_side: lo_est,
    })
}
