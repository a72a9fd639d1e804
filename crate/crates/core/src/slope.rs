//! Weak-interaction slope constants: `E_α(y,B)`, `I_α(B)`, the root `B(α)`
//! and `K_c*(α)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::{falpha_lower_functional, FAlpha, FAlphaOptions};
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::excursions::ExcursionLaw;
use crate::numerics::{adaptive_simpson_pieces, bisect, mean_stderr, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeOptions {
    pub hermite_order: usize,
    /// Absolute tolerance of each outer adaptive Simpson piece.
    pub tol: f64,
    pub pieces: usize,
}

impl Default for SlopeOptions {
    fn default() -> Self {
        SlopeOptions { hermite_order: 96, tol: 1e-12, pieces: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub alpha: f64,
    /// Only for `1 < α < 2`.
    pub b_alpha: Option<f64>,
    pub k_c_star: f64,
    pub quadrature_error: f64,
    pub root_residual: f64,
}

/// `E_α(y,B) − 1` with `E_α(y,B) = E f_α(e^{−2By − 2√y X})`.
pub fn expectation_excess(y: f64, b: f64, alpha: f64, hermite: &Rule) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("need y > 0 (got {y})")));
    }
    Ok(FAlpha::new(alpha)?.lognormal_excess_shifted(-2.0 * b * y, 2.0 * y.sqrt(), 2.0 * y * (1.0 - b), hermite))
}

pub fn expectation_e(y: f64, b: f64, alpha: f64, hermite: &Rule) -> Result<f64> {
    Ok(1.0 + expectation_excess(y, b, alpha, hermite)?)
}

/// `E_α(y,B) − 1 − y[½(1+α) − B]`.
pub fn expansion_residual(y: f64, b: f64, alpha: f64, hermite: &Rule) -> Result<f64> {
    Ok(expectation_excess(y, b, alpha, hermite)? - y * (0.5 * (1.0 + alpha) - b))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("I_alpha needs 1 < alpha < 2 (got {alpha})")));
    }
    Ok(())
}

/// Exponents of the substitutions `y = u^k` on `(0,1]` and `y = u^{−k′}` on
/// `[1,∞)`; both leave an integrand vanishing at `u = 0`.
fn substitution_powers(alpha: f64) -> (f64, f64) {
    ((2.0 / (2.0 - alpha)).max(2.0), (2.0 / (alpha - 1.0)).ceil())
}

/// `I_α(B) = ∫₀^∞ y^{−α}[E_α(y,B) − 1] dy` and an error estimate.
pub fn integral_i(b: f64, alpha: f64, opts: SlopeOptions) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let f = FAlpha::new(alpha)?;
    let rule = Rule::hermite(opts.hermite_order);
    let (k, kp) = substitution_powers(alpha);
    let excess = |y: f64| f.lognormal_excess_shifted(-2.0 * b * y, 2.0 * y.sqrt(), 2.0 * y * (1.0 - b), &rule);
    // Jacobians and y^{−α} folded into one power of u
    let near = |u: f64| if u <= 0.0 { 0.0 } else { excess(u.powf(k)) * k * u.powf(k * (1.0 - alpha) + k - 1.0) };
    let far = |u: f64| if u <= 0.0 { 0.0 } else { excess(u.powf(-kp)) * kp * u.powf(kp * (alpha - 1.0) - 1.0) };
    let (a, ea) = adaptive_simpson_pieces(&near, 0.0, 1.0, opts.pieces, opts.tol);
    let (c, ec) = adaptive_simpson_pieces(&far, 0.0, 1.0, opts.pieces, opts.tol);
    Ok((a + c, ea + ec))
}

/// Monte Carlo estimate of `I_α(B)` over `(U, X)` with the same
/// substitutions: `(mean, stderr)`.
pub fn integral_i_monte_carlo(b: f64, alpha: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let f = FAlpha::new(alpha)?;
    let (k, kp) = substitution_powers(alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let u: f64 = 1.0 - rng.random::<f64>();
            let x: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            let g = |y: f64, x: f64| f.excess(-2.0 * b * y - 2.0 * y.sqrt() * x);
            g(u.powf(k), x) * k * u.powf(k * (1.0 - alpha) + k - 1.0)
                + g(u.powf(-kp), x2) * kp * u.powf(kp * (alpha - 1.0) - 1.0)
        })
        .collect();
    Ok(mean_stderr(&values))
}

/// `B(α)`, the root of `I_α(B) = 0` in `B > 1`.
pub fn solve_b(alpha: f64, opts: SlopeOptions) -> Result<SlopeResult> {
    check_alpha(alpha)?;
    let i = |b: f64| integral_i(b, alpha, opts).map(|v| v.0);
    let mut hi = 2.0;
    while i(hi)? >= 0.0 {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::NoBracket { lo: 1.0, hi });
        }
    }
    let b = bisect(|b| i(b).unwrap_or(f64::NAN), 1.0, hi, 1e-13, 200)?;
    let (residual, err) = integral_i(b, alpha, opts)?;
    Ok(SlopeResult { alpha, b_alpha: Some(b), k_c_star: b / alpha, quadrature_error: err, root_residual: residual })
}

/// `K_c*(α)`: `B(α)/α` for `1 < α < 2` and `(1+α)/(2α)` for `α ≥ 2`.
pub fn kc_star(alpha: f64, opts: SlopeOptions) -> Result<SlopeResult> {
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("K_c* needs alpha > 1 (got {alpha})")));
    }
    if alpha < 2.0 {
        return solve_b(alpha, opts);
    }
    Ok(SlopeResult { alpha, b_alpha: None, k_c_star: (1.0 + alpha) / (2.0 * alpha), quadrature_error: 0.0, root_residual: 0.0 })
}

/// Fitted `K = max_y |E_α(y,B) − 1 − y[½(1+α) − B]| / y^{3/2}` over `ys`.
pub fn expansion_constant(ys: &[f64], b: f64, alpha: f64, hermite: &Rule) -> Result<f64> {
    let mut k = 0.0f64;
    for y in ys {
        k = k.max(expansion_residual(*y, b, alpha, hermite)?.abs() / y.powf(1.5));
    }
    Ok(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub beta: f64,
    /// `(1/β²)[𝒩(β, Bβ/α) − 1]` with Gaussian letters.
    pub scaled_excess: f64,
    /// `[½(1+α) − B] m_ρ / α²`.
    pub limit: f64,
    pub relative_error: f64,
}

/// Small-`β` scaling of the `f_α` series at `h = Bβ/α` (which is
/// `B·h_c^ann(β/α)` for Gaussian letters).
pub fn weak_coupling_scaling(b: f64, law: &ExcursionLaw, betas: &[f64], opts: FAlphaOptions) -> Result<Vec<ScalingPoint>> {
    let alpha = law.alpha();
    let limit = (0.5 * (1.0 + alpha) - b) * law.mean() / (alpha * alpha);
    betas
        .iter()
        .map(|beta| {
            let bound = falpha_lower_functional(*beta, b * beta / alpha, &DisorderModel::Gaussian, law, alpha, opts)?;
            let scaled = bound.excess / (beta * beta);
            Ok(ScalingPoint { beta: *beta, scaled_excess: scaled, limit, relative_error: (scaled - limit).abs() / limit.abs() })
        })
        .collect()
}
