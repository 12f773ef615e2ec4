//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's own Panjer or quadrature code, so
//! agreement is a real cross-check.

#![allow(dead_code)]

/// Compound Poisson law by summing over the claim count,
/// `P(A = m) = sum_n e^{-L} L^n / n! f^{*n}(m)`, on lattice points `0..len`.
pub fn brute_force_compound(f: &[f64], lambda: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut conv = vec![0.0; len];
    conv[0] = 1.0;
    let mut weight = (-lambda).exp();
    for n in 0..200 {
        for (o, c) in out.iter_mut().zip(&conv) {
            *o += weight * c;
        }
        let mut next = vec![0.0; len];
        for (i, &c) in conv.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (j, &q) in f.iter().enumerate() {
                if i + j < len {
                    next[i + j] += c * q;
                }
            }
        }
        conv = next;
        weight *= lambda / (n + 1) as f64;
    }
    out
}

/// Exponential(1) claims rounded to the lattice `{0, h, 2h, ...}`.
pub fn exp_claims_on_lattice(h: f64, len: usize) -> Vec<f64> {
    let cdf = |z: f64| if z <= 0.0 { 0.0 } else { 1.0 - (-z).exp() };
    (0..len)
        .map(|k| {
            let k = k as f64;
            cdf(k * h + 0.5 * h) - cdf(k * h - 0.5 * h)
        })
        .collect()
}

/// Plain Panjer recursion for compound Poisson, no rescaling.
pub fn panjer_plain(f: &[f64], lambda: f64, len: usize) -> Vec<f64> {
    let mut g = vec![0.0; len];
    g[0] = (-lambda * (1.0 - f[0])).exp();
    for m in 1..len {
        let mut acc = 0.0;
        for j in 1..=m.min(f.len() - 1) {
            acc += j as f64 * f[j] * g[m - j];
        }
        g[m] = lambda / m as f64 * acc;
    }
    g
}

pub fn convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn stop_loss(l: f64, priority: f64, cap: f64) -> f64 {
    (l - priority).max(0.0).min(cap)
}

/// `E[phi(l + A)]` for a lattice law truncated at `probs.len()`; the mass
/// beyond the last point pays the cap.
pub fn expected_layer(probs: &[f64], h: f64, l: f64, priority: f64, cap: f64) -> f64 {
    let mut acc = 0.0;
    let mut mass = 0.0;
    for (m, &p) in probs.iter().enumerate() {
        acc += p * stop_loss(l + m as f64 * h, priority, cap);
        mass += p;
    }
    acc + (1.0 - mass).max(0.0) * cap
}

/// Constant-hazard CVA with static loss intensity and exponential claims:
/// `f = int_t^T c e^{-c(s-t)} E[phi(l + A_pre(s) + A_post(s))] ds` at `r = 0`,
/// pre- and post-default aggregates computed separately and convolved.
pub struct ConstantHazardOracle {
    pub lam_pre: f64,
    pub lam_post: f64,
    pub c: f64,
    pub maturity: f64,
    pub priority: f64,
    pub cap: f64,
    pub h: f64,
}

impl ConstantHazardOracle {
    pub fn layer_at(&self, t: f64, s: f64, l: f64) -> f64 {
        let len = ((self.priority + self.cap - l).max(0.0) / self.h).ceil() as usize + 2;
        let f = exp_claims_on_lattice(self.h, len);
        let a = panjer_plain(&f, self.lam_pre * (s - t), len);
        let b = panjer_plain(&f, self.lam_post * (self.maturity - s), len);
        expected_layer(&convolve(&a, &b, len), self.h, l, self.priority, self.cap)
    }

    /// Composite Simpson in the default time.
    pub fn value(&self, t: f64, l: f64, intervals: usize) -> f64 {
        let n = intervals + intervals % 2;
        let w = (self.maturity - t) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let s = t + i as f64 * w;
            let coef = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += coef * self.c * (-self.c * (s - t)).exp() * self.layer_at(t, s, l);
        }
        acc * w / 3.0
    }
}

impl ConstantHazardOracle {
    /// `df/dc = int_t^T (1 - c(s-t)) e^{-c(s-t)} P(s) ds`.
    pub fn d_hazard(&self, t: f64, l: f64, intervals: usize) -> f64 {
        let n = intervals + intervals % 2;
        let w = (self.maturity - t) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let s = t + i as f64 * w;
            let coef = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let u = s - t;
            acc += coef * (1.0 - self.c * u) * (-self.c * u).exp() * self.layer_at(t, s, l);
        }
        acc * w / 3.0
    }
}
