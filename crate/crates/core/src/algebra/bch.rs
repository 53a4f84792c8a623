use super::{AlgebraError, CarnotAlgebra};

/// Largest step handled by the BCH recursion (limited by the tabulated
/// Bernoulli numbers).
pub const MAX_BCH_STEP: usize = 9;

/// `K_{2p} = B_{2p} / (2p)!` for p = 1..4.
const K_EVEN: [f64; 4] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
];

/// `log(exp(x) exp(y))` through the homogeneous components `Z_m`, using
/// Varadarajan's recursion
///
/// ```text
/// Z_1 = x + y
/// (m+1) Z_{m+1} = ½ [x − y, Z_m]
///     + Σ_{p ≥ 1, 2p ≤ m} K_{2p} Σ_{k_1+…+k_{2p} = m} [Z_{k_1}, [… [Z_{k_{2p}}, x + y] …]]
/// ```
///
/// Components of degree above the step vanish by nilpotency.
pub(crate) fn bch(alg: &CarnotAlgebra, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = alg.dim();
    let s = alg.step();
    let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    if s == 1 {
        return sum;
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut z: Vec<Vec<f64>> = vec![sum.clone()];
    let mut scratch = vec![0.0; n];
    for m in 1..s {
        let mut next = alg.bracket(&diff, &z[m - 1]);
        next.iter_mut().for_each(|v| *v *= 0.5);
        let mut p = 1;
        while 2 * p <= m {
            let k = K_EVEN[p - 1];
            let mut parts = vec![0usize; 2 * p];
            for_each_composition(m, 2 * p, &mut parts, 0, &mut |parts| {
                let mut acc = sum.clone();
                for &ki in parts.iter().rev() {
                    alg.bracket_into(&z[ki - 1], &acc, &mut scratch);
                    std::mem::swap(&mut acc, &mut scratch);
                }
                for (o, a) in next.iter_mut().zip(&acc) {
                    *o += k * a;
                }
            });
            p += 1;
        }
        let inv = 1.0 / (m as f64 + 1.0);
        next.iter_mut().for_each(|v| *v *= inv);
        z.push(next);
    }
    let mut out = vec![0.0; n];
    for zm in &z {
        for (o, v) in out.iter_mut().zip(zm) {
            *o += v;
        }
    }
    out
}

/// Visits every composition of `total` into `parts.len()` positive parts.
fn for_each_composition(
    total: usize,
    count: usize,
    parts: &mut [usize],
    idx: usize,
    f: &mut dyn FnMut(&[usize]),
) {
    if idx == count - 1 {
        if total >= 1 {
            parts[idx] = total;
            f(parts);
        }
        return;
    }
    let remaining = count - idx - 1;
    if total < remaining + 1 {
        return;
    }
    for k in 1..=total - remaining {
        parts[idx] = k;
        for_each_composition(total - k, count, parts, idx + 1, f);
    }
}

/// Closed-form BCH up to degree four:
/// `x + y + ½[x,y] + (1/12)([x,[x,y]] + [y,[y,x]]) − (1/24)[y,[x,[x,y]]]`.
///
/// Independent of the recursion above; used to cross-check it for step ≤ 4.
pub fn bch_closed_form(alg: &CarnotAlgebra, x: &[f64], y: &[f64]) -> Result<Vec<f64>, AlgebraError> {
    let s = alg.step();
    if s > 4 {
        return Err(AlgebraError::UnsupportedStep { step: s, max: 4 });
    }
    let xy = alg.bracket(x, y);
    let yx: Vec<f64> = xy.iter().map(|v| -v).collect();
    let x_xy = alg.bracket(x, &xy);
    let y_yx = alg.bracket(y, &yx);
    let y_x_xy = alg.bracket(y, &x_xy);
    Ok((0..alg.dim())
        .map(|i| {
            x[i] + y[i] + 0.5 * xy[i] + (x_xy[i] + y_yx[i]) / 12.0 - y_x_xy[i] / 24.0
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_are_counted() {
        // C(m-1, k-1) compositions of m into k parts.
        let mut parts = vec![0; 3];
        let mut count = 0;
        for_each_composition(6, 3, &mut parts, 0, &mut |p| {
            assert_eq!(p.iter().sum::<usize>(), 6);
            assert!(p.iter().all(|&k| k >= 1));
            count += 1;
        });
        assert_eq!(count, 10);
    }

    #[test]
    fn abelian_product_is_sum() {
        let a = CarnotAlgebra::abelian(3);
        assert_eq!(bch(&a, &[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]), vec![1.5, 2.5, 3.5]);
    }
}
