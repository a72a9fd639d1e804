//! One table per command over the configured grid.

use copolymer::annealed::{annealed_critical_h, annealed_excess_free_energy, annealed_slope, annealed_slope_root};
use copolymer::bounds::{
    entropy_reduction_gap, falpha_lower_functional, fractional_moment_bound, tilted_strategy_rate, FAlphaOptions,
    GapOptions,
};
use copolymer::partition::{
    annealed_log_z, critical_h, is_localized, quenched_free_energy, s_hat, CriticalOptions, DpOptions, GenFunOptions,
    ModelParams,
};
use copolymer::paths::{return_count_statistics, PathOptions, Regime};
use copolymer::slope::{kc_star, SlopeOptions};
use copolymer::{ExcursionLaw, Exec, LawSpec};

use crate::config::RunConfig;
use crate::output::{Cell, Table};
use crate::CliError;

pub const COMMANDS: [&str; 8] =
    ["annealed", "quenched-fe", "s-of-g", "critical-curve", "bounds", "slope", "paths", "selftest"];

const COMMON: [&str; 6] = ["disorder", "excursion", "law_alpha", "seed", "n", "replicas"];

fn law_name(spec: &LawSpec) -> &'static str {
    match spec {
        LawSpec::Srw { .. } => "srw",
        LawSpec::PowerLaw { .. } => "power_law",
        LawSpec::Custom { .. } => "custom",
    }
}

fn columns(extra: &[&str]) -> Table {
    let all: Vec<&str> = COMMON.iter().chain(extra).copied().collect();
    Table::new(&all)
}

fn row(cfg: &RunConfig, law: &ExcursionLaw, extra: Vec<Cell>) -> Vec<Cell> {
    let mut r: Vec<Cell> = vec![
        cfg.disorder.name().into(),
        law_name(&cfg.excursion).into(),
        law.alpha().into(),
        cfg.seed.into(),
        cfg.n.into(),
        cfg.replicas.into(),
    ];
    r.extend(extra);
    r
}

fn dp(cfg: &RunConfig) -> DpOptions {
    DpOptions { window: cfg.window }
}

fn grid_bh(cfg: &RunConfig) -> impl Iterator<Item = (f64, f64)> + '_ {
    cfg.grid.beta.iter().flat_map(move |b| cfg.grid.h.iter().map(move |h| (*b, *h)))
}

pub fn annealed(cfg: &RunConfig, law: &ExcursionLaw) -> Result<Table, CliError> {
    let mut t = columns(&["beta", "h", "h_c_ann", "f_ann", "f_ann_dp", "g_ann_root"]);
    let model = &cfg.disorder;
    for (beta, h) in grid_bh(cfg) {
        let dp_value = annealed_log_z(ModelParams::new(beta, h), model, law, cfg.n, dp(cfg)) / cfg.n as f64;
        t.push(row(
            cfg,
            law,
            vec![
                beta.into(),
                h.into(),
                annealed_critical_h(beta, model).into(),
                annealed_excess_free_energy(beta, h, model).into(),
                dp_value.into(),
                annealed_slope_root(beta, h, law, model)?.into(),
            ],
        ));
    }
    Ok(t)
}

pub fn quenched_fe(cfg: &RunConfig, law: &ExcursionLaw, exec: Exec) -> Result<Table, CliError> {
    let mut t = columns(&["beta", "h", "g_hat", "stderr", "localized", "f_ann", "h_c_ann"]);
    let model = &cfg.disorder;
    for (beta, h) in grid_bh(cfg) {
        let est = quenched_free_energy(ModelParams::new(beta, h), model, law, cfg.n, cfg.replicas, cfg.seed, dp(cfg), exec)?;
        t.push(row(
            cfg,
            law,
            vec![
                beta.into(),
                h.into(),
                est.value.into(),
                est.stderr.into(),
                is_localized(&est, cfg.tolerances.eps_fe).into(),
                annealed_excess_free_energy(beta, h, model).into(),
                annealed_critical_h(beta, model).into(),
            ],
        ));
    }
    Ok(t)
}

pub fn s_of_g(cfg: &RunConfig, law: &ExcursionLaw, exec: Exec) -> Result<Table, CliError> {
    let mut t = columns(&["beta", "h", "g", "excursions", "s_hat", "stderr", "s_ann"]);
    let opts = GenFunOptions { n_max: cfg.excursions, eps: cfg.tolerances.eps_tail, ..Default::default() };
    for (beta, h) in grid_bh(cfg) {
        for &g in &cfg.grid.g {
            let s = s_hat(ModelParams { beta, h, g }, &cfg.disorder, law, cfg.replicas, cfg.seed, opts, exec)?;
            t.push(row(
                cfg,
                law,
                vec![
                    beta.into(),
                    h.into(),
                    g.into(),
                    cfg.excursions.into(),
                    s.mean.into(),
                    s.stderr.into(),
                    annealed_slope(beta, h, g, law, &cfg.disorder).into(),
                ],
            ));
        }
    }
    Ok(t)
}

pub fn critical_curve(cfg: &RunConfig, law: &ExcursionLaw, exec: Exec) -> Result<Table, CliError> {
    let mut t = columns(&[
        "beta",
        "h_c_hat",
        "sigma",
        "slope",
        "bracket_lo",
        "bracket_hi",
        "h_lower",
        "h_upper",
        "lower_margin_sigma",
        "upper_margin_sigma",
        "in_sandwich",
    ]);
    let model = &cfg.disorder;
    let alpha = law.alpha();
    let opts = CriticalOptions { n: cfg.n, replicas: cfg.replicas, eps_mult: cfg.tolerances.eps_fe, dp: dp(cfg), ..Default::default() };
    for &beta in &cfg.grid.beta {
        let upper = annealed_critical_h(beta, model);
        let lower = annealed_critical_h(beta / alpha, model);
        let est = critical_h(beta, model, law, cfg.seed, opts, exec, (0.0, upper + 0.25))?;
        let lo_m = (est.h_c - lower) / est.sigma;
        let hi_m = (upper - est.h_c) / est.sigma;
        t.push(row(
            cfg,
            law,
            vec![
                beta.into(),
                est.h_c.into(),
                est.sigma.into(),
                est.slope.into(),
                est.bracket.0.into(),
                est.bracket.1.into(),
                lower.into(),
                upper.into(),
                lo_m.into(),
                hi_m.into(),
                (est.h_c > lower && est.h_c < upper).into(),
            ],
        ));
    }
    Ok(t)
}

pub fn bounds(cfg: &RunConfig, law: &ExcursionLaw) -> Result<Table, CliError> {
    let mut t = columns(&[
        "beta",
        "h",
        "h_threshold",
        "tilted_rate",
        "tilted_identity_residual",
        "falpha_excess",
        "falpha_bound",
        "fm_t_below",
        "fm_below",
        "fm_t_above",
        "fm_above",
        "gap_at_witness",
        "gap_best",
    ]);
    let model = &cfg.disorder;
    let alpha = law.alpha();
    let (t_below, t_above) = (0.95 / alpha, (1.05 / alpha).min(1.0));
    let fm_below = fractional_moment_bound(t_below, 0.0, law)?;
    let fm_above = fractional_moment_bound(t_above, 0.0, law)?;
    let gap_opts = GapOptions { restarts: 200, seed: cfg.seed, ..Default::default() };
    for &beta in &cfg.grid.beta {
        // the gap needs a lattice letter law and β > 0
        let gap = if beta > 0.0 { entropy_reduction_gap(beta, model, law, gap_opts).ok() } else { None };
        for &h in &cfg.grid.h {
            let tilt = tilted_strategy_rate(beta, h, model, alpha);
            let fa = falpha_lower_functional(beta, h, model, law, alpha, FAlphaOptions::default())?;
            t.push(row(
                cfg,
                law,
                vec![
                    beta.into(),
                    h.into(),
                    annealed_critical_h(beta / alpha, model).into(),
                    tilt.rate.into(),
                    tilt.identity_residual.into(),
                    fa.excess.into(),
                    fa.bound.into(),
                    t_below.into(),
                    fm_below.into(),
                    t_above.into(),
                    fm_above.into(),
                    gap.as_ref().map_or(f64::NAN, |g| g.at_witness).into(),
                    gap.as_ref().map_or(f64::NAN, |g| g.best).into(),
                ],
            ));
        }
    }
    Ok(t)
}

pub fn slope(cfg: &RunConfig, law: &ExcursionLaw) -> Result<Table, CliError> {
    let mut t = columns(&["alpha", "b_alpha", "k_c_star", "quadrature_error", "root_residual"]);
    for &alpha in &cfg.grid.alpha {
        let r = kc_star(alpha, SlopeOptions::default())?;
        t.push(row(
            cfg,
            law,
            vec![
                alpha.into(),
                r.b_alpha.unwrap_or(f64::NAN).into(),
                r.k_c_star.into(),
                r.quadrature_error.into(),
                r.root_residual.into(),
            ],
        ));
    }
    Ok(t)
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Delocalized => "delocalized",
        Regime::NearCritical => "near-critical",
        Regime::Localized => "localized",
    }
}

/// Summary table and per-sample table.
pub fn paths(cfg: &RunConfig, law: &ExcursionLaw, exec: Exec) -> Result<(Table, Table), CliError> {
    let mut summary = columns(&[
        "beta",
        "h",
        "paths_per_replica",
        "regime",
        "g_hat",
        "g_stderr",
        "mn_over_n",
        "mn_stderr",
        "c_hat",
        "c_error",
        "c_left",
        "c_right",
        "log_c",
        "log_threshold",
        "exceed_fraction",
        "q50_mn_over_log_n",
        "q90_mn_over_log_n",
        "q99_mn_over_log_n",
    ]);
    let mut samples = columns(&["beta", "h", "replica", "path_id", "m_n"]);
    let opts = PathOptions { dp: dp(cfg), localized_mult: cfg.tolerances.eps_fe, ..Default::default() };
    for (beta, h) in grid_bh(cfg) {
        let d = return_count_statistics(
            ModelParams::new(beta, h),
            &cfg.disorder,
            law,
            cfg.n,
            cfg.replicas,
            cfg.paths_per_replica,
            cfg.seed,
            opts,
            exec,
        )?;
        let c = d.c_from_derivative.as_ref();
        let q = |p: f64| {
            d.log_quantiles.as_ref().and_then(|v| v.iter().find(|(x, _)| *x == p).map(|(_, y)| *y)).unwrap_or(f64::NAN)
        };
        summary.push(row(
            cfg,
            law,
            vec![
                beta.into(),
                h.into(),
                cfg.paths_per_replica.into(),
                regime_name(d.regime).into(),
                d.g_hat.value.into(),
                d.g_hat.stderr.into(),
                d.mn_over_n.value.into(),
                d.mn_over_n.stderr.into(),
                c.map_or(f64::NAN, |c| c.value).into(),
                c.map_or(f64::NAN, |c| c.error).into(),
                c.map_or(f64::NAN, |c| c.left).into(),
                c.map_or(f64::NAN, |c| c.right).into(),
                d.log_bound.map_or(f64::NAN, |l| l.c).into(),
                d.log_bound.map_or(f64::NAN, |l| l.threshold).into(),
                d.log_bound.map_or(f64::NAN, |l| l.exceed_fraction).into(),
                q(0.5).into(),
                q(0.9).into(),
                q(0.99).into(),
            ],
        ));
        for r in &d.records {
            samples.push(row(cfg, law, vec![beta.into(), h.into(), r.replica.into(), r.path.into(), r.m_n.into()]));
        }
    }
    Ok((summary, samples))
}
