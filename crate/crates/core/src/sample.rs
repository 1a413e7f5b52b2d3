//! Random sampling primitives over caller-provided `RngCore` streams.
//!
//! No hidden global state: every sampler takes an explicit generator, and
//! [`derive_seed`] gives independent per-structure streams from one master
//! seed. Normal variates use Box-Muller through `libm` rather than a
//! platform-dependent ziggurat, keeping draws bit-stable everywhere.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

use crate::math;

/// Derive a child seed from a master seed and a textual label
/// (e.g. a structure code) via splitmix64 folding.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut state = master ^ 0x9e37_79b9_7f4a_7c15;
    let mut mix = |x: u64| {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut out = mix(label.len() as u64);
    for chunk in label.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        out = mix(u64::from_le_bytes(word));
    }
    out
}

/// A seeded ChaCha stream; `stream` indexes independent substreams
/// (counter-based, safe for parallel use).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on (0, 1] (never exactly zero, safe for `ln`).
#[inline]
pub fn uniform_01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal via Box-Muller.
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = uniform_01(rng);
    let u2 = uniform_01(rng);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Gamma(shape, 1) via Marsaglia-Tsang, with the boost trick for shape < 1.
pub fn gamma<R: RngCore + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        let boost = gamma(rng, shape + 1.0);
        let u = uniform_01(rng);
        return boost * math::powf(u, 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / math::sqrt(9.0 * d);
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = uniform_01(rng);
        if math::ln(u) < 0.5 * x * x + d - d * v + d * math::ln(v) {
            return d * v;
        }
    }
}

/// Dirichlet draw; components are floored at 1e-12 and renormalized so the
/// result stays in the simplex interior (boundary points are not invertible
/// under the stick-breaking transform).
pub fn dirichlet<R: RngCore + ?Sized>(rng: &mut R, concentration: &[f64]) -> Vec<f64> {
    assert!(!concentration.is_empty());
    if concentration.len() == 1 {
        return alloc::vec![1.0];
    }
    let mut draws: Vec<f64> = concentration.iter().map(|&a| gamma(rng, a).max(1e-300)).collect();
    let total: f64 = draws.iter().sum();
    for d in draws.iter_mut() {
        *d = (*d / total).max(1e-12);
    }
    let total: f64 = draws.iter().sum();
    for d in draws.iter_mut() {
        *d /= total;
    }
    draws
}

/// Normal(mean, sd²) truncated to [0, ∞).
///
/// Rejection from the untruncated normal when the acceptance probability
/// Φ(mean/sd) is at least 10%, inverse-CDF sampling otherwise.
pub fn truncated_normal<R: RngCore + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    assert!(sd > 0.0, "truncated normal sd must be positive");
    let accept = math::normal_cdf(mean / sd);
    if accept >= 0.1 {
        loop {
            let x = mean + sd * standard_normal(rng);
            if x >= 0.0 {
                return x;
            }
        }
    } else {
        // Inverse CDF in complementary form: the upper-tail mass beyond the
        // truncation point stays representable however deep the truncation.
        let a = -mean / sd;
        let tail_at_a = 0.5 * math::erfc(a * core::f64::consts::FRAC_1_SQRT_2);
        let u = uniform_01(rng);
        let tail = ((1.0 - u) * tail_at_a).max(1e-300);
        let z = -math::normal_quantile(tail);
        (mean + sd * z).max(0.0)
    }
}

/// Log-density of the [0, ∞)-truncated normal.
pub fn truncated_normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    if x < 0.0 {
        return math::LOG_ZERO;
    }
    let normalizer = math::normal_cdf(mean / sd);
    math::normal_log_pdf(x, mean, sd) - math::ln(normalizer)
}

/// Dirichlet log-density on the simplex (with respect to the (K−1)-dim
/// Lebesgue measure). Off-simplex points return [`math::LOG_ZERO`].
pub fn dirichlet_log_pdf(phi: &[f64], concentration: &[f64]) -> f64 {
    assert_eq!(phi.len(), concentration.len());
    if concentration.len() == 1 {
        // Degenerate 0-simplex: a point mass at 1.
        return if math::abs(phi[0] - 1.0) <= 1e-9 { 0.0 } else { math::LOG_ZERO };
    }
    let mut sum = 0.0;
    for &p in phi {
        if p <= 0.0 || p >= 1.0 {
            return math::LOG_ZERO;
        }
        sum += p;
    }
    if math::abs(sum - 1.0) > 1e-9 {
        return math::LOG_ZERO;
    }
    let alpha_total: f64 = concentration.iter().sum();
    let mut logp = math::ln_gamma(alpha_total);
    for (&p, &a) in phi.iter().zip(concentration) {
        logp += (a - 1.0) * math::ln(p) - math::ln_gamma(a);
    }
    logp
}

/// Human-readable stream labels used in run metadata.
pub fn stream_label(kind: &str, index: usize) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    let _ = write!(s, "{kind}:{index}");
    s
}
