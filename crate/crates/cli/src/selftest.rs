//! Fast invariant suites run by the `selftest` command.

use copolymer::annealed::{annealed_critical_h, annealed_excess_free_energy, WordDistribution, WordSpace};
use copolymer::bounds::{falpha_lower_functional, fractional_moment_bound, tilted_strategy_rate, FAlpha, FAlphaOptions};
use copolymer::partition::{annealed_log_z, constrained_log_z, quenched_free_energy, DpOptions, ModelParams};
use copolymer::paths::sampler_total_variation;
use copolymer::slope::{kc_star, SlopeOptions};
use copolymer::{DisorderModel, ExcursionLaw, Exec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::output::Table;
use crate::CliError;

struct Checks {
    table: Table,
    failed: usize,
}

impl Checks {
    fn new() -> Self {
        Checks { table: Table::new(&["suite", "check", "value", "limit", "pass"]), failed: 0 }
    }

    fn record(&mut self, suite: &str, check: String, value: f64, limit: f64, pass: bool) {
        if !pass {
            self.failed += 1;
        }
        self.table.push(vec![suite.into(), check.into(), value.into(), limit.into(), pass.into()]);
    }

    /// `value ≤ limit`; NaN fails.
    fn at_most(&mut self, suite: &str, check: String, value: f64, limit: f64) {
        self.record(suite, check, value, limit, value <= limit);
    }
}

fn annealed(c: &mut Checks) {
    let law = ExcursionLaw::srw(50_000).expect("law");
    let n = 20_000;
    for model in [DisorderModel::Binary, DisorderModel::Gaussian] {
        for (beta, h) in [(1.0, 0.0), (1.0, 1.0), (0.5, 0.1), (0.5, 0.5)] {
            let dp = annealed_log_z(ModelParams::new(beta, h), &model, &law, n, DpOptions::default()) / n as f64;
            let diff = (dp - annealed_excess_free_energy(beta, h, &model)).abs();
            c.at_most("annealed", format!("{} beta={beta} h={h} dp vs closed form", model.name()), diff, 2e-3);
        }
    }
    let model = DisorderModel::Binary;
    for beta in [0.25, 0.5, 1.0, 2.0] {
        let hc = annealed_critical_h(beta, &model);
        let at = (model.cumulant(2.0 * beta) - 2.0 * beta * hc).abs();
        c.at_most("annealed", format!("beta={beta} rate at curve"), at, 1e-12);
        let inside = annealed_excess_free_energy(beta, hc - 0.01, &model);
        let outside = annealed_excess_free_energy(beta, hc + 0.01, &model);
        c.record("annealed", format!("beta={beta} sign pattern"), inside, 0.0, inside > 0.0 && outside == 0.0);
    }
}

fn variational(c: &mut Checks) {
    let law = ExcursionLaw::srw(50_000).expect("law");
    let model = DisorderModel::Binary;
    let space = WordSpace::new(&model, &law, 40).expect("lattice letters");
    let raw = space.reference(false);
    for (beta, h, g) in [(1.0, 0.0, 0.6), (0.5, 0.3, 0.2)] {
        let ascent = space.mirror_ascent(&raw, beta, h, g, 0.5, 2000);
        let gap = (ascent.value - space.log_partition(&raw, beta, h, g)).abs();
        c.at_most("variational", format!("beta={beta} h={h} g={g} max functional = log N"), gap, 1e-10);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let q = WordDistribution { probs: (0..space.len()).map(|_| -rng.random::<f64>().ln()).collect() }.normalized();
        for g in [0.1, 1.0] {
            worst = worst.max(space.tilting_residual(&q, &law, g).abs());
        }
    }
    c.at_most("variational", "tilting identity residual, 50 laws".into(), worst, 1e-9);
}

fn bounds(c: &mut Checks) {
    let law = ExcursionLaw::srw(200_000).expect("law");
    let alpha = law.alpha();
    let below = fractional_moment_bound(0.95 / alpha, 0.0, &law).unwrap_or(f64::NAN);
    let above = fractional_moment_bound(1.05 / alpha, 0.0, &law).unwrap_or(f64::NAN);
    c.record("bounds", "fractional moment infinite below 1/alpha".into(), below, f64::INFINITY, below.is_infinite());
    c.record("bounds", "fractional moment finite above 1/alpha".into(), above, f64::INFINITY, above.is_finite());
    let model = DisorderModel::Binary;
    let cap = FAlpha::new(alpha).expect("alpha > 1").cap();
    for beta in [0.25, 1.0] {
        let h = annealed_critical_h(beta / alpha, &model);
        let t = tilted_strategy_rate(beta, h, &model, alpha);
        c.at_most("bounds", format!("beta={beta} tilted rate at threshold"), t.rate.abs(), 1e-12);
        c.at_most("bounds", format!("beta={beta} tilted entropy identity"), t.identity_residual.abs(), 1e-10);
        let f = falpha_lower_functional(beta, h, &model, &law, alpha, FAlphaOptions::default())
            .map_or(f64::NAN, |b| b.excess);
        c.record("bounds", format!("beta={beta} f_alpha excess at threshold"), f, cap - 1.0, f > 0.0 && f <= cap - 1.0);
    }
}

fn slope(c: &mut Checks) {
    let opts = SlopeOptions::default();
    for (alpha, want) in [(2.0, 0.75), (3.0, 2.0 / 3.0)] {
        let k = kc_star(alpha, opts).map_or(f64::NAN, |r| r.k_c_star);
        c.record("slope", format!("K_c*({alpha})"), k, want, k == want);
    }
    match kc_star(1.5, opts) {
        Ok(r) => {
            let b = r.b_alpha.unwrap_or(f64::NAN);
            c.record("slope", "B(1.5) > 1".into(), b, 1.0, b > 1.0);
            c.at_most("slope", "I(B(1.5)) residual".into(), r.root_residual.abs(), 1e-8);
        }
        Err(_) => c.record("slope", "B(1.5) solves".into(), f64::NAN, 0.0, false),
    }
}

fn concentration(c: &mut Checks) {
    for model in [DisorderModel::Binary, DisorderModel::Gaussian] {
        for (n, a, b) in [(10, 1.0, 0.1), (20, 0.5, 0.3), (50, 2.0, 0.1)] {
            let (p, se) = model.tail_frequency(n, a, b, 20_000, n as u64);
            let bound = model.tail_bound(n as u64, a, b).log_value().exp();
            c.at_most("concentration", format!("{} n={n} A={a} B={b} tail frequency", model.name()), p - 5.0 * se, bound);
        }
    }
    let model = DisorderModel::Binary;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10 {
        for j in 0..10 {
            let (a, x, b) = (0.1 + 2.0 * i as f64, 1.0 + 11.0 * j as f64, 0.3);
            if a / x + b <= model.chi() {
                worst = worst.max(model.tail_constant(b) * (a + x) - x * model.rate(a / x + b));
            }
        }
    }
    c.at_most("concentration", "C(A+x) - x F(H(A/x+B)) on grid".into(), worst, 1e-12);
}

fn quenched(c: &mut Checks) {
    let law = ExcursionLaw::srw(50_000).expect("law");
    let est = quenched_free_energy(
        ModelParams::new(1.0, 0.0),
        &DisorderModel::Binary,
        &law,
        5000,
        8,
        1,
        DpOptions { window: Some(2048) },
        Exec::Parallel,
    );
    match est {
        Ok(e) => {
            let upper = 2f64.cosh().ln();
            c.record("quenched", "g_hat(1,0) > 0 at 5 sigma".into(), e.value / e.stderr, 5.0, e.value > 5.0 * e.stderr);
            let m = (upper - e.value) / e.stderr;
            c.record("quenched", "g_hat(1,0) < log cosh 2 at 5 sigma".into(), m, 5.0, m > 5.0);
        }
        Err(_) => c.record("quenched", "g_hat(1,0) evaluates".into(), f64::NAN, 0.0, false),
    }
}

fn paths(c: &mut Checks) {
    let law = ExcursionLaw::srw(1000).expect("law");
    let n = 10;
    let omega = DisorderModel::Binary.sample(n, 4);
    for free in [false, true] {
        let table = constrained_log_z(ModelParams::new(1.0, 0.2), &omega, &law, n, DpOptions::default());
        let tv = table
            .ok()
            .and_then(|t| sampler_total_variation(&t, &law, free, 100_000, 5).ok())
            .map_or(f64::NAN, |v| v.0);
        c.at_most("paths", format!("sampler TV at n={n}, free={free}"), tv, 0.01);
    }
}

fn determinism(c: &mut Checks) -> Result<(), CliError> {
    let mut cfg = RunConfig::with_seed(11);
    cfg.n = 2000;
    cfg.replicas = 4;
    cfg.grid.h = vec![0.0, 0.5];
    let law = cfg.validate()?;
    let a = crate::commands::quenched_fe(&cfg, &law, Exec::Parallel)?.to_csv();
    let b = crate::commands::quenched_fe(&cfg, &law, Exec::Sequential)?.to_csv();
    c.record("determinism", "parallel and sequential outputs identical".into(), 0.0, 0.0, a == b);
    let text = cfg.to_key_values();
    let same = RunConfig::parse(&text).map(|back| back == cfg && back.to_key_values() == text).unwrap_or(false);
    c.record("determinism", "config round trip".into(), 0.0, 0.0, same);
    Ok(())
}

/// All suites; the flag is true when every check passed.
pub fn run() -> Result<(Table, bool), CliError> {
    let mut c = Checks::new();
    annealed(&mut c);
    variational(&mut c);
    bounds(&mut c);
    slope(&mut c);
    concentration(&mut c);
    quenched(&mut c);
    paths(&mut c);
    determinism(&mut c)?;
    let ok = c.failed == 0;
    Ok((c.table, ok))
}
