//! Small numerical kit: log-domain arithmetic, Gaussian quadrature rules,
//! adaptive Simpson, bracketing root finders and replica statistics.

use std::f64::consts::{LN_2, PI};

use libm::erfc;

use crate::error::{Error, Result};

/// `log(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(½(1 + e^u))`.
#[inline]
pub fn log_half_one_plus_exp(u: f64) -> f64 {
    softplus(u) - LN_2
}

/// Dot product with eight independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Nodes and weights of an `n`-point rule. Hermite rules integrate against
/// the standard Gaussian density (weights sum to one); Legendre rules live on
/// `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Gauss–Hermite rule for `E f(X)`, `X ~ N(0,1)`.
    pub fn hermite(n: usize) -> Rule {
        assert!(n >= 1);
        // Newton iteration on orthonormal physicists' Hermite polynomials.
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let scale = PI.sqrt();
        let nodes: Vec<f64> = x.iter().rev().map(|t| t * std::f64::consts::SQRT_2).collect();
        let weights: Vec<f64> = w.iter().rev().map(|v| v / scale).collect();
        Rule { nodes, weights }
    }

    /// Gauss–Legendre rule on `[-1, 1]`.
    pub fn legendre(n: usize) -> Rule {
        assert!(n >= 1);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-16 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        Rule { nodes: x, weights: w }
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Legendre rule mapped to `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        r * self.apply(|t| f(c + r * t))
    }
}

/// Adaptive Simpson quadrature. Returns the value and an error estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> (f64, f64) {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // the floor keeps the recursion from chasing rounding noise
        let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if depth == 0 || !delta.is_finite() || delta.abs() <= 15.0 * tol.max(floor) {
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        let (l, el) = rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let (r, er) = rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        (l + r, el + er)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Adaptive Simpson applied on `pieces` equal subintervals, which keeps the
/// recursion from missing narrow features of an otherwise smooth integrand.
pub fn adaptive_simpson_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> (f64, f64) {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for i in 0..pieces {
        let lo = a + h * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + h };
        let (v, e) = adaptive_simpson(f, lo, hi, tol / pieces as f64, 40);
        total += v;
        err += e;
    }
    (total, err)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Illinois (modified regula falsi) root finder from a bracket given with
/// function values of opposite sign. Stops when successive iterates move
/// less than `xtol`.
pub fn illinois<F: FnMut(f64) -> f64>(mut f: F, lo: (f64, f64), hi: (f64, f64), xtol: f64, max_iter: usize) -> f64 {
    let ((mut a, mut fa), (mut b, mut fb)) = (lo, hi);
    let mut side = 0i8;
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        if (c - prev).abs() <= xtol || (b - a).abs() <= xtol {
            return c;
        }
        prev = c;
        let fc = f(c);
        if fc == 0.0 || fc.is_nan() {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    prev
}

/// Root of an increasing function with Newton steps safeguarded by a bracket.
pub fn newton_bisect<F: FnMut(f64) -> (f64, f64)>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(x);
        if v == 0.0 {
            return x;
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= xtol * x.abs().max(1.0) || hi - lo <= xtol {
            return next;
        }
        x = next;
    }
    x
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least squares fit `y ≈ a + b x`.
#[derive(Clone, Copy, Debug)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_sd: f64,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual_sd = if xs.len() > 2 { (rss / (n - 2.0)).sqrt() } else { 0.0 };
    LinearFit { slope, intercept, residual_sd }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for n in [8, 32, 64, 96, 192] {
            let r = Rule::hermite(n);
            assert!((r.apply(|_| 1.0) - 1.0).abs() < 1e-13, "n={n}");
            assert!(r.apply(|x| x).abs() < 1e-12);
            assert!((r.apply(|x| x * x) - 1.0).abs() < 1e-12);
            assert!((r.apply(|x| x.powi(4)) - 3.0).abs() < 1e-11);
            // E e^{X} = e^{1/2}
            assert!(n < 32 || (r.apply(|x| x.exp()) - 0.5f64.exp()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn legendre_polynomials_exact() {
        let r = Rule::legendre(10);
        assert!((r.apply(|_| 1.0) - 2.0).abs() < 1e-14);
        assert!((r.apply(|x| x.powi(18)) - 2.0 / 19.0).abs() < 1e-14);
        let v = r.integrate(0.0, PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_handles_sqrt() {
        let (v, _) = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 50);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn log_domain_helpers() {
        assert!((log_add_exp(0.0, 0.0) - LN_2).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((log_sum_exp([1000.0, 1000.0]) - 1000.0 - LN_2).abs() < 1e-12);
        assert!(log_half_one_plus_exp(0.0).abs() < 1e-16);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn root_finders() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14, 200).is_err());
        let r = newton_bisect(|x| (x.tanh() - 0.5, 1.0 - x.tanh().powi(2)), 0.0, 10.0, 1e-15);
        assert!((r - 0.5f64.atanh()).abs() < 1e-13);
        let f = |x: f64| x.exp() - 3.0;
        let r = illinois(f, (0.0, f(0.0)), (4.0, f(4.0)), 1e-13, 100);
        assert!((r - 3f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn ols_recovers_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.25 * x).collect();
        let fit = ols(&xs, &ys);
        assert!((fit.slope + 0.25).abs() < 1e-13 && (fit.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        let d = norm_cdf(1.959963984540054) - 0.975;
        assert!(d.abs() < 1e-14, "{d:e}");
        assert!((norm_cdf(-10.0) - 7.619853024160527e-24).abs() < 1e-36);
    }
}
