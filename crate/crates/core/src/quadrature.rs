//! Gauss–Legendre rules on (0, 1) and the simplex substitution used for
//! projective factors.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on (0, 1), nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss-legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> (0,1)
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Maps collapsed coordinates `σ ∈ (0,1)^m` onto the radial variables
/// `t_i = |z_i|²` of an affine chart of ℂP^m through the moment simplex
/// `x_i = t_i / (1 + Σ t)`. Returns `(t, |∂t/∂σ|)`.
///
/// For m = 1 this is `t = σ/(1-σ)`.
pub fn simplex_to_radial(sigma: &[f64]) -> (Vec<f64>, f64) {
    let m = sigma.len();
    let mut x = vec![0.0; m];
    let mut rest = 1.0;
    let mut jac_x = 1.0;
    for i in 0..m {
        x[i] = rest * sigma[i];
        jac_x *= rest;
        rest *= 1.0 - sigma[i];
    }
    // rest = x0 = 1 - Σ x
    let x0 = rest;
    let t: Vec<f64> = x.iter().map(|xi| xi / x0).collect();
    let jac_t = x0.powi(-(m as i32 + 1));
    (t, jac_x * jac_t)
}

/// Neumaier-compensated sum, order preserving.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
