//! Independent oracles shared by the acceptance suite: a dense linear-system
//! path for GP predictions, quadrature rules, and a from-scratch EI. None of
//! this reuses the crate's Cholesky, erf, or kernel code.

use planbo::history::{History, Observation, StudyMeta};
use planbo::space::{normalize, ParamVector, SearchSpace};
use planbo::surrogate::KernelConfig;

/// Matern 5/2 covariance recomputed from the formula.
pub fn matern52(kernel: &KernelConfig, a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&kernel.length_scales)
        .map(|((&x, &y), &l)| ((x - y) / l).powi(2))
        .sum();
    let s = (5.0 * r2).sqrt();
    kernel.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .abs()
                    .partial_cmp(&m[j * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        let pivot = m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] / pivot;
            for j in col..n {
                m[row * n + j] -= factor * m[col * n + j];
            }
            x[row] -= factor * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut sum = x[row];
        for j in row + 1..n {
            sum -= m[row * n + j] * x[j];
        }
        x[row] = sum / m[row * n + row];
    }
    x
}

/// Population mean and clamped std, matching the documented standardization.
pub fn standardize_constants(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(1e-8))
}

/// The base jitter the fitted posterior uses on well-conditioned instances:
/// the first rung of the documented ladder.
pub fn base_jitter(kernel: &KernelConfig) -> f64 {
    1e-10 * kernel.signal_variance
}

/// Dense-solve GP prediction in original y units, on normalized inputs with
/// standardized targets: mean = k*^T (K + sigma^2 I)^-1 y.
#[allow(clippy::too_many_arguments)]
pub fn dense_predict(
    kernel: &KernelConfig,
    inputs: &[Vec<f64>],
    targets_std: &[f64],
    jitter: f64,
    u: &[f64],
    mean: f64,
    std: f64,
) -> (f64, f64) {
    let n = inputs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = matern52(kernel, &inputs[i], &inputs[j]);
        }
        k[i * n + i] += kernel.noise_variance + jitter;
    }
    let k_star: Vec<f64> = inputs.iter().map(|p| matern52(kernel, p, u)).collect();
    let alpha = gauss_solve(&k, n, targets_std);
    let w = gauss_solve(&k, n, &k_star);
    let mean_std: f64 = k_star.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let var_std = matern52(kernel, u, u) + kernel.noise_variance
        - k_star.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    (mean + std * mean_std, std * std * var_std.max(0.0))
}

/// Normalized inputs and standardized targets of a history, recomputed from
/// raw observations.
pub fn normalized_view(history: &History) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64) {
    let space = history.space();
    let inputs: Vec<Vec<f64>> = history
        .observations()
        .iter()
        .map(|o| normalize(&o.x, space).unwrap())
        .collect();
    let raw: Vec<f64> = history.observations().iter().map(|o| o.y).collect();
    let (mean, std) = standardize_constants(&raw);
    let targets = raw.iter().map(|y| (y - mean) / std).collect();
    (inputs, targets, mean, std)
}

pub fn build_history(points: &[(Vec<f64>, f64)], space: SearchSpace) -> History {
    let meta = StudyMeta::new("acceptance", "objective", space);
    let mut h = History::new(meta);
    for (i, (x, y)) in points.iter().enumerate() {
        h = h
            .with_observation(Observation::new(ParamVector::new(x.clone()), *y, i + 1).unwrap())
            .unwrap();
    }
    h
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 rational
/// approximation (|error| < 7.5e-8); independent of the crate's erf.
pub fn normal_cdf_as(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-x * x).exp();
    0.5 * (1.0 + sign * erf)
}

/// Closed-form EI rebuilt on the independent CDF.
pub fn ei_oracle(mean: f64, variance: f64, incumbent: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return (mean - incumbent).max(0.0);
    }
    let z = (mean - incumbent) / sigma;
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (sigma * (z * normal_cdf_as(z) + pdf)).max(0.0)
}

/// Gauss-Hermite nodes and weights for integrals of e^{-x^2} f(x), computed
/// by Newton iteration on the Hermite recurrence and self-checked against
/// known moments.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let eps = 3e-14;
    let pim4 = 0.751_125_544_464_942_5_f64; // pi^(-1/4)
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => {
                let a = (2.0 * n as f64 + 1.0).sqrt();
                a - 1.85575 * a.powf(-1.0 / 3.0)
            }
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= eps {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    let total: f64 = weights.iter().sum();
    assert!(
        (total - std::f64::consts::PI.sqrt()).abs() < 1e-9,
        "Gauss-Hermite weights sum to {total}, want sqrt(pi)"
    );
    let second: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(x, w)| w * x * x)
        .sum();
    assert!(
        (second - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-9,
        "Gauss-Hermite second moment {second} off"
    );
    nodes.into_iter().zip(weights).collect()
}

/// Composite Simpson rule on [a, b] with an even interval count.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals >= 2 && intervals % 2 == 0);
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let x = a + i as f64 * h;
        sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}
