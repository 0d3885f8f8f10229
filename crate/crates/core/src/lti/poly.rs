//! Polynomials in the backward shift `x = z⁻¹`, stored in ascending powers:
//! `c[0] + c[1]·x + c[2]·x² + ...`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Horner evaluation at a (complex) value of `z⁻¹`.
pub fn eval(coeffs: &[f64], zinv: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zinv + c)
}

pub fn eval_complex(coeffs: &[Complex64], zinv: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zinv + c)
}

pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Drops trailing (highest-power) coefficients that are exactly zero, keeping at least one.
pub fn trim_trailing(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    c
}

/// Roots in `z` of `c[0] + c[1] z⁻¹ + ... + c[m] z⁻ᵐ`, i.e. the roots of the
/// ordinary polynomial `c[0] zᵐ + ... + c[m]`. Zeros of `c[0]` are not allowed.
pub fn roots_in_z(c: &[f64]) -> Vec<Complex64> {
    let c = trim_trailing(c.to_vec());
    let m = c.len() - 1;
    if m == 0 {
        return Vec::new();
    }
    assert!(c[0] != 0.0, "leading coefficient must be nonzero");
    // companion matrix of the monic polynomial z^m + (c1/c0) z^{m-1} + ...
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    let raw = comp.complex_eigenvalues();
    raw.iter().map(|&r| polish_root(&c, r)).collect()
}

// A few Newton steps on the descending-power polynomial sharpen eigenvalue roots.
fn polish_root(desc: &[f64], mut r: Complex64) -> Complex64 {
    for _ in 0..4 {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in desc {
            dp = dp * r + p;
            p = p * r + c;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let next = r - step;
        if !next.re.is_finite() || !next.im.is_finite() {
            break;
        }
        let before = p.norm();
        let after = eval_desc(desc, next).norm();
        if after >= before {
            break;
        }
        r = next;
    }
    r
}

fn eval_desc(desc: &[f64], z: Complex64) -> Complex64 {
    desc.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Expands `∏ (1 - rᵢ z⁻¹)` into ascending real coefficients. Roots must come in
/// conjugate pairs; the imaginary residue of the expansion is discarded.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &a) in acc.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re).collect()
}

/// Long division `num = quot·den + rem` carried out from the highest power down.
pub fn divide(num: &[f64], den: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let den = trim_trailing(den.to_vec());
    let dn = den.len() - 1;
    let lead = den[dn];
    assert!(lead != 0.0, "division by the zero polynomial");
    if num.len() <= dn {
        return (vec![0.0], num.to_vec());
    }
    let mut rem = num.to_vec();
    let qn = num.len() - 1 - dn;
    let mut quot = vec![0.0; qn + 1];
    for k in (0..=qn).rev() {
        let q = rem[k + dn] / lead;
        quot[k] = q;
        for (j, &d) in den.iter().enumerate() {
            rem[k + j] -= q * d;
        }
    }
    rem.truncate(dn.max(1));
    (quot, rem)
}
