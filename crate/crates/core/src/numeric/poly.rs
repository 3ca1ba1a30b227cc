//! Real polynomials in ascending-coefficient form and their complex roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Divides `p` by `(z - root)`, returning quotient and remainder.
pub fn deflate(p: &[f64], root: f64) -> (Vec<f64>, f64) {
    let n = p.len();
    assert!(n >= 2, "cannot deflate a constant");
    let mut q = vec![0.0; n - 1];
    let mut carry = p[n - 1];
    for k in (0..n - 1).rev() {
        q[k] = carry;
        carry = p[k] + carry * root;
    }
    (q, carry)
}

pub fn eval_complex(p: &[f64], z: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// All complex roots of `p` (ascending coefficients, nonzero leading term).
///
/// Eigenvalues of the companion matrix, each polished by a few Newton steps.
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let mut p = p.to_vec();
    while p.len() > 1 && p[p.len() - 1] == 0.0 {
        p.pop();
    }
    let degree = p.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = p[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -p[i] / lead;
    }
    let dp = derivative(&p);
    companion
        .complex_eigenvalues()
        .iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..4 {
                let d = eval_complex(&dp, z);
                if d.norm() == 0.0 {
                    break;
                }
                let step = eval_complex(&p, z) / d;
                if !step.re.is_finite() || !step.im.is_finite() {
                    break;
                }
                z -= step;
            }
            z
        })
        .collect()
}

/// Coefficients of `prod_k (1 - z * scale_k)` as real numbers.
///
/// The scales must come in conjugate pairs, so imaginary parts cancel.
pub fn product_of_linear_factors(scales: &[Complex64]) -> Vec<f64> {
    let mut coef = vec![Complex64::new(1.0, 0.0)];
    for &s in scales {
        let mut next = vec![Complex64::new(0.0, 0.0); coef.len() + 1];
        for (k, &c) in coef.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * s;
        }
        coef = next;
    }
    coef.into_iter().map(|c| c.re).collect()
}

pub fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deflation_leaves_zero_remainder_at_a_root() {
        // (z - 1)^2 (z + 2) = z^3 - 3z + 2
        let p = [2.0, -3.0, 0.0, 1.0];
        let (q, r) = deflate(&p, 1.0);
        assert!(r.abs() < 1e-15);
        let (q2, r2) = deflate(&q, 1.0);
        assert!(r2.abs() < 1e-15);
        assert_eq!(q2, vec![2.0, 1.0]);
    }

    #[test]
    fn roots_of_a_cubic() {
        // (z - 2)(z^2 + 1)
        let p = [-2.0, 1.0, -2.0, 1.0];
        let mut r = roots(&p);
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((r[2] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn linear_factor_product() {
        // (1 - z)(1 - 2z) = 1 - 3z + 2z^2
        let c = product_of_linear_factors(&[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
        assert_eq!(c, vec![1.0, -3.0, 2.0]);
    }
}
