//! Renewal recursion with the excursion weight split into two causal
//! correlations.
//!
//! With a potential `V` and `ψ((k, j]) = ½(1 + e^{−(V_j − V_k)})`,
//!
//! ```text
//! Z[j] = ½ Σ_m Z[j−m] ρ(m) + ½ e^{−V_j} Σ_m (Z[j−m] e^{V_{j−m}}) ρ(m),
//! ```
//!
//! so each step is two dot products against the fixed kernel `ρ`. Values are
//! kept in blocks that share a log reference; inside a block everything is a
//! plain `f64` in `(0, 1]`.

use crate::numerics::{dot, log_add_exp};

pub(crate) const BLOCK: usize = 256;

/// A growing sequence of log values stored block-scaled.
pub(crate) struct ScaledHistory {
    start: usize,
    refs: Vec<f64>,
    vals: Vec<f64>,
}

impl ScaledHistory {
    pub(crate) fn new(start: usize, capacity: usize) -> Self {
        ScaledHistory { start, refs: Vec::with_capacity(capacity / BLOCK + 1), vals: Vec::with_capacity(capacity) }
    }

    /// One past the last stored position.
    pub(crate) fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    pub(crate) fn push(&mut self, logv: f64) {
        let idx = self.vals.len();
        let b = idx / BLOCK;
        if b == self.refs.len() {
            self.refs.push(logv);
            self.vals.push(if logv == f64::NEG_INFINITY { 0.0 } else { 1.0 });
            return;
        }
        let r = self.refs[b];
        if logv > r {
            let f = if r == f64::NEG_INFINITY { 0.0 } else { (r - logv).exp() };
            for v in &mut self.vals[b * BLOCK..] {
                *v *= f;
            }
            self.refs[b] = logv;
            self.vals.push(1.0);
        } else if logv == f64::NEG_INFINITY {
            self.vals.push(0.0);
        } else {
            self.vals.push((logv - r).exp());
        }
    }

    /// `log Σ_{d=1}^{w} kernel[d] · value(i − d)` over stored positions, with
    /// `krev[t] = kernel[w − t]`.
    pub(crate) fn correlate(&self, i: usize, krev: &[f64], scratch: &mut Vec<(f64, f64)>) -> f64 {
        let w = krev.len();
        let lo = self.start.max(i.saturating_sub(w));
        let hi = i.min(self.end());
        if lo >= hi {
            return f64::NEG_INFINITY;
        }
        // global positions [lo, hi)
        scratch.clear();
        let mut k = lo;
        while k < hi {
            let local = k - self.start;
            let b = local / BLOCK;
            let block_end = (self.start + (b + 1) * BLOCK).min(hi);
            let t0 = w + k - i;
            let len = block_end - k;
            let d = dot(&self.vals[local..local + len], &krev[t0..t0 + len]);
            if d > 0.0 {
                scratch.push((self.refs[b], d));
            }
            k = block_end;
        }
        let r = scratch.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.0));
        if r == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = scratch.iter().map(|(rb, d)| d * (rb - r).exp()).sum();
        r + s.ln()
    }
}

/// Reversed kernel for [`ScaledHistory::correlate`]; `kernel[0]` is ignored.
pub(crate) fn reversed(kernel: &[f64]) -> Vec<f64> {
    let w = kernel.len() - 1;
    (0..w).map(|t| kernel[w - t]).collect()
}

/// `log Z[i]` for lattice indices `0..=len` with `Z[0] = 1`, lattice kernel
/// `kernel[d]` (`d ≥ 1`) and potential `v[i]`; `None` means `ψ ≡ 1`.
pub(crate) fn renewal(kernel: &[f64], potential: Option<&[f64]>, len: usize) -> Vec<f64> {
    let krev = reversed(kernel);
    let mut out = Vec::with_capacity(len + 1);
    let mut a = ScaledHistory::new(0, len + 1);
    let mut scratch = Vec::new();
    out.push(0.0);
    a.push(0.0);
    match potential {
        None => {
            for i in 1..=len {
                let la = a.correlate(i, &krev, &mut scratch);
                out.push(la);
                a.push(la);
            }
        }
        Some(v) => {
            let mut b = ScaledHistory::new(0, len + 1);
            b.push(v[0]);
            for i in 1..=len {
                let la = a.correlate(i, &krev, &mut scratch);
                let lb = b.correlate(i, &krev, &mut scratch);
                let z = log_add_exp(la, lb - v[i]) - std::f64::consts::LN_2;
                out.push(z);
                a.push(z);
                b.push(if z == f64::NEG_INFINITY { z } else { z + v[i] });
            }
        }
    }
    out
}
