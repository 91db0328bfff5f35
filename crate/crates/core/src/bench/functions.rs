//! Closed-form benchmarks: Schwefel, the penalized function, Griewank.

use std::f64::consts::PI;

pub const SCHWEFEL_OFFSET: f64 = 418.9829;

pub fn eval_c2(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|&v| -v * v.abs().sqrt().sin()).sum();
    s + SCHWEFEL_OFFSET * x.len() as f64
}

/// The derivative of `-x sin(sqrt|x|)` is even in `x` and tends to 0 at the
/// origin, which is also the subgradient used there.
pub fn grad_c2(x: &[f64], grad: &mut [f64]) -> f64 {
    let mut s = 0.0;
    for (g, &v) in grad.iter_mut().zip(x) {
        let r = v.abs().sqrt();
        s -= v * r.sin();
        *g = if v == 0.0 { 0.0 } else { -r.sin() - 0.5 * r * r.cos() };
    }
    s + SCHWEFEL_OFFSET * x.len() as f64
}

#[inline]
fn y(x: f64) -> f64 {
    (x + 5.0) / 4.0
}

/// `sum_i 100 max(0, |x_i| - 10)^4`.
pub fn penalty_u(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| {
            let e = (v.abs() - 10.0).max(0.0);
            100.0 * e.powi(4)
        })
        .sum()
}

/// Penalized function with the boundary penalty inside every summand.
pub fn eval_c3(x: &[f64]) -> f64 {
    let n = x.len();
    let u = penalty_u(x);
    let head = 10.0 * (PI * y(x[0])).sin().powi(2);
    let body: f64 = (0..n.saturating_sub(1))
        .map(|i| {
            let a = y(x[i]) - 1.0;
            a * a * (1.0 + 10.0 * (PI * y(x[i + 1])).sin().powi(2) + u)
        })
        .sum();
    PI / n as f64 * (head + body)
}

pub fn grad_c3(x: &[f64], grad: &mut [f64]) -> f64 {
    let n = x.len();
    let u = penalty_u(x);
    let scale = PI / n as f64;
    let sin2 = |v: f64| (PI * y(v)).sin().powi(2);
    // d/dx sin^2(pi y(x)) = (pi / 4) sin(2 pi y(x))
    let dsin2 = |v: f64| 0.25 * PI * (2.0 * PI * y(v)).sin();

    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut body = 0.0;
    let mut a_sum = 0.0;
    for i in 0..n.saturating_sub(1) {
        let a = y(x[i]) - 1.0;
        let factor = 1.0 + 10.0 * sin2(x[i + 1]) + u;
        body += a * a * factor;
        a_sum += a * a;
        grad[i] += 0.5 * a * factor;
        grad[i + 1] += a * a * 10.0 * dsin2(x[i + 1]);
    }
    grad[0] += 10.0 * dsin2(x[0]);
    if a_sum > 0.0 {
        for (g, &v) in grad.iter_mut().zip(x) {
            let e = (v.abs() - 10.0).max(0.0);
            if e > 0.0 {
                *g += a_sum * 400.0 * e.powi(3) * v.signum();
            }
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    scale * (10.0 * sin2(x[0]) + body)
}

pub fn eval_c4(x: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut prod = 1.0;
    for (i, &v) in x.iter().enumerate() {
        sum += v * v;
        prod *= (v / ((i + 1) as f64).sqrt()).cos();
    }
    1.0 + sum / 4000.0 - prod
}

pub fn grad_c4(x: &[f64], grad: &mut [f64]) -> f64 {
    let n = x.len();
    let roots: Vec<f64> = (1..=n).map(|i| (i as f64).sqrt()).collect();
    let cos: Vec<f64> = x.iter().zip(&roots).map(|(v, r)| (v / r).cos()).collect();
    // Products excluding index k, via prefix and suffix products.
    let mut prefix = vec![1.0; n + 1];
    let mut sum = 0.0;
    for k in 0..n {
        prefix[k + 1] = prefix[k] * cos[k];
        sum += x[k] * x[k];
    }
    let mut suffix = 1.0;
    for k in (0..n).rev() {
        let others = prefix[k] * suffix;
        grad[k] = x[k] / 2000.0 + (x[k] / roots[k]).sin() / roots[k] * others;
        suffix *= cos[k];
    }
    1.0 + sum / 4000.0 - prefix[n]
}

pub fn eval_sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn grad_sphere(x: &[f64], grad: &mut [f64]) -> f64 {
    for (g, v) in grad.iter_mut().zip(x) {
        *g = 2.0 * v;
    }
    eval_sphere(x)
}
