//! Seeded random-number primitives shared by the simulator, the bootstrap,
//! and the optimizer.
//!
//! # Seeding contract
//!
//! A task with seed `s` derives the generator for sub-task `i` as
//! `ChaCha8Rng::seed_from_u64(mix_seed(s, i))`, where [`mix_seed`] is the
//! SplitMix64 finalizer applied to `s XOR (i+1)*0x9E3779B97F4A7C15`. Because
//! each sub-task owns an independent stream, loops may run in any order or in
//! parallel and still reproduce bit-identical results for a fixed seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Mean below which Poisson sampling uses inverse-CDF sequential search;
/// at or above it, Hörmann's PTRS transformed rejection.
const POISSON_INVERSION_CUTOFF: f64 = 30.0;

/// Derives the sub-stream seed for `(seed, index)`.
///
/// SplitMix64 finalizer over `seed XOR (index+1)*GOLDEN_GAMMA`: distinct
/// indices give statistically independent streams, and index 0 differs from
/// the parent seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator for sub-task `index` of a task seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, index))
}

/// Draws one Poisson variate with the given mean.
///
/// Exact sampling: inverse-CDF sequential search below mean 30, Hörmann's
/// PTRS transformed rejection at 30 and above. Both branches consume only
/// uniform variates from `rng`, so results are reproducible across platforms
/// for a fixed stream.
///
/// The mean must be finite and nonnegative; a zero mean returns 0.
pub fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    assert!(
        mean.is_finite() && mean >= 0.0,
        "poisson mean must be finite and nonnegative, got {mean}"
    );
    if mean == 0.0 {
        0
    } else if mean < POISSON_INVERSION_CUTOFF {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

/// Sequential search through the CDF; O(mean) per draw, exact for small means.
fn poisson_inversion(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // The tail bound keeps pathological u ~ 1 from looping once p underflows.
    while u > cdf && k < 1100 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// Hörmann's PTRS rejection sampler, valid for mean >= 10.
fn poisson_ptrs(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let rhs = k * loglam - mean - ln_factorial(k as u64);
        if (v * inv_alpha / (a / (us * us) + b)).ln() <= rhs {
            return k as u64;
        }
    }
}

/// Natural log of k!, exact summation up to 255 and a Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    const TABLE_LEN: usize = 256;
    static TABLE: std::sync::OnceLock<[f64; TABLE_LEN]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0.0; TABLE_LEN];
        for i in 2..TABLE_LEN {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if (k as usize) < TABLE_LEN {
        return table[k as usize];
    }
    let x = k as f64;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    (x + 0.5) * x.ln() - x
        + 0.5 * ln_2pi
        + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

/// A uniformly distributed point on the (n-1)-simplex: n nonnegative weights
/// summing to one, via normalized exponential spacings.
pub fn uniform_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    assert!(n > 0, "simplex dimension must be positive");
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return vec![1.0 / n as f64; n];
    }
    for x in &mut w {
        *x /= sum;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_seed_separates_indices() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        let c = mix_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, 42);
    }

    #[test]
    fn streams_are_reproducible() {
        let mut r1 = stream_rng(7, 3);
        let mut r2 = stream_rng(7, 3);
        for _ in 0..100 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }

    #[test]
    fn poisson_zero_mean_is_zero() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..10 {
            assert_eq!(poisson(&mut rng, 0.0), 0);
        }
    }

    #[test]
    fn poisson_small_mean_moments() {
        let mut rng = stream_rng(11, 0);
        let n = 20_000;
        let mean = 3.0;
        let draws: Vec<f64> = (0..n).map(|_| poisson(&mut rng, mean) as f64).collect();
        let m: f64 = draws.iter().sum::<f64>() / n as f64;
        let v: f64 = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        // 5-sigma bands for the sample mean and a loose band for the variance.
        assert!((m - mean).abs() < 5.0 * (mean / n as f64).sqrt(), "mean {m}");
        assert!((v - mean).abs() < 0.15, "variance {v}");
    }

    #[test]
    fn poisson_large_mean_moments() {
        let mut rng = stream_rng(12, 0);
        let n = 20_000;
        let mean = 1000.0;
        let draws: Vec<f64> = (0..n).map(|_| poisson(&mut rng, mean) as f64).collect();
        let m: f64 = draws.iter().sum::<f64>() / n as f64;
        let v: f64 = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - mean).abs() < 5.0 * (mean / n as f64).sqrt(), "mean {m}");
        assert!((v - mean).abs() / mean < 0.05, "variance {v}");
    }

    #[test]
    fn poisson_huge_mean_stays_in_band() {
        let mut rng = stream_rng(13, 0);
        let mean = 1.0e6;
        for _ in 0..50 {
            let k = poisson(&mut rng, mean) as f64;
            assert!((k - mean).abs() < 6.0 * mean.sqrt(), "draw {k}");
        }
    }

    #[test]
    fn poisson_branches_agree_near_cutoff() {
        // Means straddling the cutoff should produce comparable statistics.
        let n = 30_000;
        let sample_mean = |mean: f64, seed: u64| -> f64 {
            let mut rng = stream_rng(seed, 0);
            (0..n).map(|_| poisson(&mut rng, mean) as f64).sum::<f64>() / n as f64
        };
        let lo = sample_mean(29.5, 21);
        let hi = sample_mean(30.5, 22);
        assert!((lo - 29.5).abs() < 0.2, "below cutoff {lo}");
        assert!((hi - 30.5).abs() < 0.2, "above cutoff {hi}");
    }

    #[test]
    fn ln_factorial_matches_summation() {
        let direct = |k: u64| -> f64 { (2..=k).map(|i| (i as f64).ln()).sum() };
        for k in [0, 1, 2, 5, 100, 255, 256, 300, 1000, 50_000] {
            let expect = direct(k);
            let got = ln_factorial(k);
            let tol = 1e-12 * expect.abs().max(1.0);
            assert!((got - expect).abs() < tol, "k={k}: {got} vs {expect}");
        }
    }

    #[test]
    fn simplex_weights_normalized() {
        let mut rng = stream_rng(5, 9);
        for n in [1, 2, 4, 8] {
            let w = uniform_simplex(&mut rng, n);
            assert_eq!(w.len(), n);
            assert!(w.iter().all(|x| *x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
