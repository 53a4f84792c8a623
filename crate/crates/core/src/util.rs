//! Small shared helpers: name parsing, low-discrepancy sequences, seeded streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Splits `"name(args)"` into `("name", Some("args"))`; plain names give `None`.
pub fn split_call(s: &str) -> Option<(&str, Option<&str>)> {
    let s = s.trim();
    match s.find('(') {
        None => Some((s, None)),
        Some(open) => {
            let inner = s[open + 1..].strip_suffix(')')?;
            Some((s[..open].trim(), Some(inner)))
        }
    }
}

/// Parses a comma-separated list of floats.
pub fn parse_floats(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect()
}

/// Independent deterministic stream for task `index` under `seed`.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal variate by Box-Muller.
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b as u64) as f64;
        i /= b as u64;
        f *= inv;
    }
    r
}

/// Point `i` of the Halton sequence in `[0,1)^dim` (dim ≤ 16), skipping the origin.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension limited to {}", PRIMES.len());
    (0..dim).map(|k| radical_inverse(i + 1, PRIMES[k])).collect()
}

/// `m` low-discrepancy unit vectors in R^dim.
///
/// dim 1: ±1; dim 2: equally spaced angles starting at 0; dim 3: Fibonacci
/// sphere; higher: normalized Halton points pushed through the inverse normal CDF.
pub fn sphere_directions(dim: usize, m: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => (0..m).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..m)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let rad = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    vec![rad * phi.cos(), rad * phi.sin(), z]
                })
                .collect()
        }
        _ => (0..m as u64)
            .map(|i| {
                let g: Vec<f64> = halton(i, dim).into_iter().map(inverse_normal_cdf).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                g.into_iter().map(|v| v / norm).collect()
            })
            .collect(),
    }
}

/// Acklam's rational approximation of the standard normal quantile.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    let lo = 0.02425;
    if p < lo {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (slope, my - slope * mx)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_call_forms() {
        assert_eq!(split_call("engel"), Some(("engel", None)));
        assert_eq!(split_call("abelian(3)"), Some(("abelian", Some("3"))));
        assert_eq!(split_call("bad(3"), None);
    }

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn directions_are_unit() {
        for dim in 1..6 {
            for d in sphere_directions(dim, 17) {
                assert!((norm2(&d) - 1.0).abs() < 1e-12);
            }
        }
        let circle = sphere_directions(2, 4);
        assert!((circle[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_quantile_symmetry() {
        assert!(inverse_normal_cdf(0.5).abs() < 1e-9);
        assert!((inverse_normal_cdf(0.975) - 1.959964).abs() < 1e-5);
        assert!((inverse_normal_cdf(0.01) + inverse_normal_cdf(0.99)).abs() < 1e-8);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
    }
}
