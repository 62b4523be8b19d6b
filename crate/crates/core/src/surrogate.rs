//! Gaussian-process surrogate with cheap fantasized posterior updates.
//!
//! The posterior is an immutable value: `fantasize` conditions on one
//! simulated observation via a rank-one Cholesky extension and returns a new
//! posterior, leaving kernel hyperparameters and target standardization
//! frozen. Many rollouts can fantasize from the same base concurrently.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{History, PredictiveDistribution};
use crate::linalg::CholeskyFactor;
use crate::metrics;
use crate::rng::substream;
use crate::space::{normalize, ParamVector, SearchSpace};

/// Smallest allowed target standard deviation; keeps standardization finite
/// for constant (or single-point) histories.
const MIN_TARGET_STD: f64 = 1e-8;

/// Jitter ladder, relative to the mean kernel diagonal (the signal variance
/// for stationary kernels): 1e-10 escalating tenfold up to 1e-4.
const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    SquaredExponential,
    Matern52,
}

/// Stationary kernel with per-dimension length scales, operating on
/// normalized unit-cube coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub variant: KernelVariant,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelConfig {
    /// The fallback configuration used when hyperparameter search fails.
    pub fn default_for_dim(dim: usize) -> Self {
        KernelConfig {
            variant: KernelVariant::Matern52,
            length_scales: vec![0.3; dim],
            signal_variance: 1.0,
            noise_variance: 1e-4,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.length_scales.len() != dim {
            return Err(Error::config(
                "length_scales",
                format!("expected {dim} entries, got {}", self.length_scales.len()),
            ));
        }
        if self.length_scales.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::config("length_scales", "must all be positive"));
        }
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return Err(Error::config("signal_variance", "must be positive"));
        }
        if self.noise_variance < 0.0 || !self.noise_variance.is_finite() {
            return Err(Error::config("noise_variance", "must be >= 0"));
        }
        Ok(())
    }

    fn scaled_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        for ((&x, &y), &l) in a.iter().zip(b).zip(&self.length_scales) {
            let d = (x - y) / l;
            sum += d * d;
        }
        sum.sqrt()
    }

    /// Covariance between two normalized points.
    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.scaled_dist(a, b);
        self.signal_variance * self.corr_from_r2(r * r)
    }

    /// Reciprocal squared length scales, hoisted out of pairwise loops.
    fn inv_sq_scales(&self) -> Vec<f64> {
        self.length_scales.iter().map(|l| 1.0 / (l * l)).collect()
    }

    fn corr_from_r2(&self, r2: f64) -> f64 {
        match self.variant {
            KernelVariant::SquaredExponential => (-0.5 * r2).exp(),
            KernelVariant::Matern52 => {
                let s = (5.0 * r2).sqrt();
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }

    #[inline]
    fn covariance_inv(&self, a: &[f64], b: &[f64], inv_sq: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((&x, &y), &w) in a.iter().zip(b).zip(inv_sq) {
            let d = x - y;
            r2 += d * d * w;
        }
        self.signal_variance * self.corr_from_r2(r2)
    }
}

/// Exact GP regression posterior over standardized targets.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: KernelConfig,
    space: SearchSpace,
    train_inputs: Vec<Vec<f64>>,
    targets_std: Vec<f64>,
    chol: CholeskyFactor,
    alpha: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    jitter: f64,
    inv_sq_scales: Vec<f64>,
}

/// Fit an exact GP to the observed history.
pub fn fit(history: &History, kernel: &KernelConfig) -> Result<GpPosterior> {
    if history.is_empty() {
        return Err(Error::Protocol("cannot fit a GP to an empty history".into()));
    }
    let space = history.space().clone();
    kernel.validate(space.dim())?;

    let inputs: Vec<Vec<f64>> = history
        .observations()
        .iter()
        .map(|o| normalize(&o.x, &space))
        .collect::<Result<_>>()?;
    let raw: Vec<f64> = history.observations().iter().map(|o| o.y).collect();
    let (mean, std) = standardize_constants(&raw);
    let targets_std: Vec<f64> = raw.iter().map(|y| (y - mean) / std).collect();

    let (chol, jitter) = factor_kernel_matrix(kernel, &inputs, None)?;
    let alpha = chol.solve(&targets_std);
    Ok(GpPosterior {
        inv_sq_scales: kernel.inv_sq_scales(),
        kernel: kernel.clone(),
        space,
        train_inputs: inputs,
        targets_std,
        chol,
        alpha,
        target_mean: mean,
        target_std: std,
        jitter,
    })
}

/// Population mean and (clamped) population standard deviation.
fn standardize_constants(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(MIN_TARGET_STD))
}

/// Build and factor K + noise*I, escalating jitter until the factorization
/// succeeds. When `start_at` is given the ladder starts from that absolute
/// jitter (used by the fantasize fallback so it never regularizes less than
/// its base posterior did).
fn factor_kernel_matrix(
    kernel: &KernelConfig,
    inputs: &[Vec<f64>],
    start_at: Option<f64>,
) -> Result<(CholeskyFactor, f64)> {
    let n = inputs.len();
    let inv_sq = kernel.inv_sq_scales();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.covariance_inv(&inputs[i], &inputs[j], &inv_sq);
            base[i * n + j] = v;
            base[j * n + i] = v;
        }
    }
    for level in JITTER_LADDER {
        let jitter = level * kernel.signal_variance;
        if let Some(min) = start_at {
            if jitter < min {
                continue;
            }
        }
        let mut k = base.clone();
        for i in 0..n {
            k[i * n + i] += kernel.noise_variance + jitter;
        }
        if let Some(chol) = CholeskyFactor::decompose(&k, n) {
            return Ok((chol, jitter));
        }
    }
    Err(Error::Numerical(format!(
        "kernel matrix of {n} points is not positive definite after the jitter ladder"
    )))
}

impl GpPosterior {
    pub fn len(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_inputs.is_empty()
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    /// Predictive distribution at a raw-unit point, in original y units.
    /// The variance includes the observation noise.
    pub fn predict(&self, x: &ParamVector) -> Result<PredictiveDistribution> {
        let u = normalize(x, &self.space)?;
        Ok(self.predict_normalized(&u))
    }

    /// Predictive distribution at a normalized point.
    pub fn predict_normalized(&self, u: &[f64]) -> PredictiveDistribution {
        let (mean_std, var_std) = self.predict_standardized(u);
        PredictiveDistribution {
            mean: self.target_mean + self.target_std * mean_std,
            variance: self.target_std * self.target_std * var_std,
        }
    }

    /// Predictive mean/variance on the standardized target scale. This is
    /// the scale-free view the policy scores proposals on.
    pub fn predict_standardized(&self, u: &[f64]) -> (f64, f64) {
        let n = self.train_inputs.len();
        let mut k_star = Vec::with_capacity(n);
        for input in &self.train_inputs {
            k_star.push(self.kernel.covariance_inv(input, u, &self.inv_sq_scales));
        }
        let mean = k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = self.chol.solve_lower(&k_star);
        let prior = self.kernel.covariance(u, u) + self.kernel.noise_variance;
        let var = (prior - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (mean, var)
    }

    /// Condition on one simulated observation without refitting
    /// hyperparameters or standardization constants.
    pub fn fantasize(&self, x: &ParamVector, y: f64) -> Result<GpPosterior> {
        let u = normalize(x, &self.space)?;
        self.fantasize_normalized(u, y)
    }

    pub fn fantasize_normalized(&self, u: Vec<f64>, y: f64) -> Result<GpPosterior> {
        if !y.is_finite() {
            return Err(Error::NonFinite(y));
        }
        let y_std = (y - self.target_mean) / self.target_std;
        let cross: Vec<f64> = self
            .train_inputs
            .iter()
            .map(|input| self.kernel.covariance_inv(input, &u, &self.inv_sq_scales))
            .collect();
        let diag = self.kernel.covariance(&u, &u) + self.kernel.noise_variance + self.jitter;

        let mut inputs = self.train_inputs.clone();
        inputs.push(u);
        let mut targets = self.targets_std.clone();
        targets.push(y_std);

        let (chol, jitter) = match self.chol.extend(&cross, diag) {
            Some(extended) => (extended, self.jitter),
            // Degenerate Schur pivot: refit from scratch with the ladder.
            None => factor_kernel_matrix(&self.kernel, &inputs, Some(self.jitter))?,
        };
        let alpha = chol.solve(&targets);
        Ok(GpPosterior {
            inv_sq_scales: self.inv_sq_scales.clone(),
            kernel: self.kernel.clone(),
            space: self.space.clone(),
            train_inputs: inputs,
            targets_std: targets,
            chol,
            alpha,
            target_mean: self.target_mean,
            target_std: self.target_std,
            jitter,
        })
    }

    /// Draw one value from the predictive distribution at `x`.
    pub fn sample_y<R: Rng>(&self, x: &ParamVector, rng: &mut R) -> Result<f64> {
        let dist = self.predict(x)?;
        Ok(sample_from(&dist, rng))
    }
}

/// Draw from a Gaussian predictive distribution. A zero-variance
/// distribution returns the mean exactly.
pub fn sample_from<R: Rng>(dist: &PredictiveDistribution, rng: &mut R) -> f64 {
    metrics::count_value_sample();
    let z: f64 = rng.sample(StandardNormal);
    dist.mean + dist.variance.max(0.0).sqrt() * z
}

/// Negative log marginal likelihood context with inputs normalized and
/// targets standardized once.
struct LmlContext {
    inputs: Vec<Vec<f64>>,
    targets_std: Vec<f64>,
}

impl LmlContext {
    fn from_history(history: &History) -> Result<Self> {
        let space = history.space();
        let inputs = history
            .observations()
            .iter()
            .map(|o| normalize(&o.x, space))
            .collect::<Result<_>>()?;
        let raw: Vec<f64> = history.observations().iter().map(|o| o.y).collect();
        let (mean, std) = standardize_constants(&raw);
        Ok(LmlContext {
            inputs,
            targets_std: raw.iter().map(|y| (y - mean) / std).collect(),
        })
    }

    fn log_marginal(&self, kernel: &KernelConfig) -> Result<f64> {
        let n = self.targets_std.len();
        let (chol, _) = factor_kernel_matrix(kernel, &self.inputs, None)?;
        let alpha = chol.solve(&self.targets_std);
        let fit_term = self
            .targets_std
            .iter()
            .zip(&alpha)
            .map(|(y, a)| y * a)
            .sum::<f64>();
        Ok(-0.5 * fit_term
            - chol.log_det_half()
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Log marginal likelihood of the history under a kernel configuration
/// (standardized targets).
pub fn log_marginal_likelihood(history: &History, kernel: &KernelConfig) -> Result<f64> {
    kernel.validate(history.space().dim())?;
    LmlContext::from_history(history)?.log_marginal(kernel)
}

// Hyperparameter search bounds in ln-space.
const LN_LS_BOUNDS: (f64, f64) = (-3.912023005428146, 2.995732273553991); // [0.02, 20]
const LN_SIGNAL_BOUNDS: (f64, f64) = (-4.605170185988091, 4.605170185988092); // [1e-2, 1e2]
const LN_NOISE_BOUNDS: (f64, f64) = (-13.815510557964274, 0.0); // [1e-6, 1]

/// Maximize the log marginal likelihood over length scales, signal variance,
/// and noise variance by multi-start Nelder-Mead in ln-space. Deterministic
/// given `rng_seed`; falls back to the default configuration when every
/// start fails the factorization.
pub fn fit_hyperparameters(history: &History, rng_seed: u64) -> KernelConfig {
    let dim = history.space().dim();
    let default = KernelConfig::default_for_dim(dim);
    if history.len() < 2 {
        return default;
    }
    let ctx = match LmlContext::from_history(history) {
        Ok(ctx) => ctx,
        Err(_) => return default,
    };

    let score = |theta: &[f64]| -> f64 {
        let kernel = kernel_from_theta(theta, dim);
        match ctx.log_marginal(&kernel) {
            Ok(lml) if lml.is_finite() => -lml,
            _ => f64::INFINITY,
        }
    };

    let mut best_theta = theta_from_kernel(&default);
    let mut best_neg = score(&best_theta);

    let n_restarts = 8;
    let max_evals = 120;
    for restart in 0..n_restarts {
        let mut rng = substream(rng_seed, &[0x4859_5045u64, restart as u64]);
        let mut start = Vec::with_capacity(dim + 2);
        for _ in 0..dim {
            start.push(sample_ln(&mut rng, 0.05, 2.0));
        }
        start.push(sample_ln(&mut rng, 0.2, 5.0));
        start.push(sample_ln(&mut rng, 1e-5, 0.1));
        let (theta, neg) = nelder_mead(&score, start, 0.4, max_evals, 1e-6);
        if neg < best_neg {
            best_neg = neg;
            best_theta = theta;
        }
    }
    // Polish the default start too so the returned config never scores
    // below it.
    let (theta, neg) = nelder_mead(&score, theta_from_kernel(&default), 0.4, max_evals, 1e-6);
    if neg < best_neg {
        best_neg = neg;
        best_theta = theta;
    }

    if !best_neg.is_finite() {
        return default;
    }
    kernel_from_theta(&best_theta, dim)
}

fn sample_ln<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo.ln() + u * (hi.ln() - lo.ln())
}

fn kernel_from_theta(theta: &[f64], dim: usize) -> KernelConfig {
    let ls = theta[..dim]
        .iter()
        .map(|&t| t.clamp(LN_LS_BOUNDS.0, LN_LS_BOUNDS.1).exp())
        .collect();
    KernelConfig {
        variant: KernelVariant::Matern52,
        length_scales: ls,
        signal_variance: theta[dim].clamp(LN_SIGNAL_BOUNDS.0, LN_SIGNAL_BOUNDS.1).exp(),
        noise_variance: theta[dim + 1].clamp(LN_NOISE_BOUNDS.0, LN_NOISE_BOUNDS.1).exp(),
    }
}

fn theta_from_kernel(kernel: &KernelConfig) -> Vec<f64> {
    let mut theta: Vec<f64> = kernel.length_scales.iter().map(|l| l.ln()).collect();
    theta.push(kernel.signal_variance.ln());
    theta.push(kernel.noise_variance.ln());
    theta
}

/// Plain Nelder-Mead minimizer with an evaluation cap and relative spread
/// stopping rule. Returns the best vertex and its value.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: Vec<f64>,
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut evals = 0;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..dim {
        let mut v = x0.clone();
        v[i] += step;
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if best.is_finite() && (worst - best).abs() <= ftol * (best.abs() + 1.0) {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(v, _)| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[dim].0)
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = eval(&reflect, &mut evals);

        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[dim] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let fc = eval(&contract, &mut evals);
            if fc < simplex[dim].1 {
                simplex[dim] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let best_v = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = best_v
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    let fs = eval(&shrunk, &mut evals);
                    *entry = (shrunk, fs);
                    if evals >= max_evals {
                        break;
                    }
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{Observation, StudyMeta};
    use crate::space::SearchSpace;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn history_from(points: &[(Vec<f64>, f64)], dim: usize) -> History {
        let meta = StudyMeta::new("s", "f", SearchSpace::unit(dim));
        let mut h = History::new(meta);
        for (i, (x, y)) in points.iter().enumerate() {
            h = h
                .with_observation(Observation::new(ParamVector::new(x.clone()), *y, i + 1).unwrap())
                .unwrap();
        }
        h
    }

    fn noisefree_kernel(dim: usize, noise: f64) -> KernelConfig {
        KernelConfig {
            variant: KernelVariant::Matern52,
            length_scales: vec![0.3; dim],
            signal_variance: 1.0,
            noise_variance: noise,
        }
    }

    /// Independent dense solve: Gaussian elimination with partial pivoting,
    /// plus a from-scratch kernel evaluation. Shares nothing with the
    /// Cholesky path.
    pub(crate) fn dense_predict(
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

    fn matern52(kernel: &KernelConfig, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&kernel.length_scales)
            .map(|((&x, &y), &l)| ((x - y) / l).powi(2))
            .sum();
        let s = (5.0 * r2).sqrt();
        kernel.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
    }

    fn gauss_solve(a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
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

    fn random_history(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> History {
        let points: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let y = rng.random::<f64>() * 4.0 - 2.0;
                (x, y)
            })
            .collect();
        history_from(&points, dim)
    }

    #[test]
    fn empty_history_errors() {
        let meta = StudyMeta::new("s", "f", SearchSpace::unit(1));
        let h = History::new(meta);
        assert!(fit(&h, &noisefree_kernel(1, 0.0)).is_err());
    }

    #[test]
    fn single_observation_interpolates() {
        let h = history_from(&[(vec![0.4], 2.5)], 1);
        let gp = fit(&h, &noisefree_kernel(1, 0.0)).unwrap();
        let d = gp.predict(&ParamVector::new(vec![0.4])).unwrap();
        assert_abs_diff_eq!(d.mean, 2.5, epsilon = 1e-9);
        assert!(d.variance <= 1e-10, "variance {} too large", d.variance);
    }

    #[test]
    fn two_point_posterior_matches_dense_solve() {
        let h = history_from(&[(vec![0.2], 1.0), (vec![0.8], -1.0)], 1);
        let kernel = noisefree_kernel(1, 1e-4);
        let gp = fit(&h, &kernel).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = vec![vec![0.2], vec![0.8]];
        let (mean, std) = standardize_constants(&[1.0, -1.0]);
        let targets: Vec<f64> = [1.0, -1.0].iter().map(|y| (y - mean) / std).collect();
        for _ in 0..10 {
            let u = vec![rng.random::<f64>()];
            let got = gp.predict_normalized(&u);
            let (want_mean, want_var) =
                dense_predict(&kernel, &inputs, &targets, gp.jitter, &u, mean, std);
            assert_abs_diff_eq!(got.mean, want_mean, epsilon = 1e-8);
            assert_abs_diff_eq!(got.variance, want_var, epsilon = 1e-8);
        }
    }

    #[test]
    fn far_from_data_reverts_to_prior() {
        // Population std of {0, 2} is exactly 1, so the de-standardized
        // prior variance is signal + noise directly.
        let h = history_from(&[(vec![0.01, 0.01], 0.0), (vec![0.02, 0.01], 2.0)], 2);
        let kernel = KernelConfig {
            variant: KernelVariant::Matern52,
            length_scales: vec![0.04; 2],
            signal_variance: 1.7,
            noise_variance: 0.3,
        };
        let gp = fit(&h, &kernel).unwrap();
        // (1, 1) is more than 20 length scales from both points.
        let d = gp.predict(&ParamVector::new(vec![1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(d.mean, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d.variance, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn prediction_at_training_point_with_tiny_noise() {
        let h = history_from(&[(vec![0.3], 1.5), (vec![0.7], 0.5)], 1);
        let gp = fit(&h, &noisefree_kernel(1, 1e-10)).unwrap();
        let d = gp.predict(&ParamVector::new(vec![0.3])).unwrap();
        assert_abs_diff_eq!(d.mean, 1.5, epsilon = 1e-6);
    }

    #[test]
    fn fantasize_matches_refit_with_frozen_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let dim = 1 + (rng.random::<f64>() * 3.0) as usize;
            let n = 2 + (rng.random::<f64>() * 10.0) as usize;
            let h = random_history(&mut rng, dim, n);
            let kernel = noisefree_kernel(dim, 1e-4);
            let gp = fit(&h, &kernel).unwrap();

            let fx: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            let fy = rng.random::<f64>() * 4.0 - 2.0;
            let fant = gp.fantasize(&ParamVector::new(fx.clone()), fy).unwrap();

            let mut inputs = gp.train_inputs.clone();
            inputs.push(fx);
            let mut targets = gp.targets_std.clone();
            targets.push((fy - gp.target_mean) / gp.target_std);

            for _ in 0..10 {
                let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let got = fant.predict_normalized(&u);
                let (want_mean, want_var) = dense_predict(
                    &kernel,
                    &inputs,
                    &targets,
                    gp.jitter,
                    &u,
                    gp.target_mean,
                    gp.target_std,
                );
                assert_abs_diff_eq!(got.mean, want_mean, epsilon = 1e-8);
                assert_abs_diff_eq!(got.variance, want_var, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn fantasize_then_predict_at_the_fantasy_point() {
        let h = history_from(&[(vec![0.2], 1.0), (vec![0.8], -1.0)], 1);
        let gp = fit(&h, &noisefree_kernel(1, 1e-10)).unwrap();
        let x = ParamVector::new(vec![0.55]);
        let fant = gp.fantasize(&x, 3.0).unwrap();
        let d = fant.predict(&x).unwrap();
        assert_abs_diff_eq!(d.mean, 3.0, epsilon = 1e-4);
    }

    #[test]
    fn chain_of_fantasies_matches_batch_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_history(&mut rng, 2, 6);
        let kernel = noisefree_kernel(2, 1e-4);
        let gp = fit(&h, &kernel).unwrap();

        let fantasies: Vec<(Vec<f64>, f64)> = (0..5)
            .map(|_| {
                let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
                (x, rng.random::<f64>() * 2.0 - 1.0)
            })
            .collect();

        let mut chained = gp.clone();
        for (x, y) in &fantasies {
            chained = chained
                .fantasize(&ParamVector::new(x.clone()), *y)
                .unwrap();
        }

        let mut inputs = gp.train_inputs.clone();
        let mut targets = gp.targets_std.clone();
        for (x, y) in &fantasies {
            inputs.push(x.clone());
            targets.push((y - gp.target_mean) / gp.target_std);
        }
        for _ in 0..10 {
            let u: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let got = chained.predict_normalized(&u);
            let (want_mean, want_var) = dense_predict(
                &kernel,
                &inputs,
                &targets,
                gp.jitter,
                &u,
                gp.target_mean,
                gp.target_std,
            );
            assert_abs_diff_eq!(got.mean, want_mean, epsilon = 1e-7);
            assert_abs_diff_eq!(got.variance, want_var, epsilon = 1e-7);
        }
    }

    #[test]
    fn zero_variance_sampling_returns_the_mean_exactly() {
        let dist = PredictiveDistribution {
            mean: 1.25,
            variance: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_from(&dist, &mut rng), 1.25);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let h = history_from(&[(vec![0.2], 1.0), (vec![0.8], -1.0)], 1);
        let gp = fit(&h, &noisefree_kernel(1, 1e-4)).unwrap();
        let x = ParamVector::new(vec![0.5]);
        let a = gp
            .sample_y(&x, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = gp
            .sample_y(&x, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_mean_matches_predictive_mean() {
        let h = history_from(&[(vec![0.2], 1.0), (vec![0.8], -1.0)], 1);
        let gp = fit(&h, &noisefree_kernel(1, 1e-2)).unwrap();
        let x = ParamVector::new(vec![0.5]);
        let dist = gp.predict(&x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| gp.sample_y(&x, &mut rng).unwrap()).sum();
        let empirical = sum / n as f64;
        let se = dist.std_dev() / (n as f64).sqrt();
        assert!(
            (empirical - dist.mean).abs() <= 4.0 * se,
            "empirical {} vs {} (se {})",
            empirical,
            dist.mean,
            se
        );
    }

    #[test]
    fn training_point_variance_bounded_by_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let h = random_history(&mut rng, 2, 8);
            let kernel = noisefree_kernel(2, 1e-9);
            let gp = fit(&h, &kernel).unwrap();
            for obs in h.observations() {
                let d = gp.predict(&obs.x).unwrap();
                assert!(d.variance >= 0.0);
                // Standardized-scale bound, de-standardized.
                let bound = (kernel.noise_variance + 1e-8) * gp.target_std * gp.target_std
                    + gp.jitter * gp.target_std * gp.target_std;
                assert!(
                    d.variance <= bound + 1e-12,
                    "variance {} above noise bound {}",
                    d.variance,
                    bound
                );
            }
        }
    }

    /// Plain test-local Cholesky, independent of the crate implementation.
    fn plain_cholesky(a: &[f64], n: usize) -> Vec<f64> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        l
    }

    #[test]
    fn hyperparameters_recover_known_lengthscale() {
        // Draw from a GP prior with length scale 0.2 and fit it back.
        let true_ls = 0.2;
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let kernel = KernelConfig {
            variant: KernelVariant::Matern52,
            length_scales: vec![true_ls],
            signal_variance: 1.0,
            noise_variance: 1e-6,
        };
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = matern52(&kernel, &[xs[i]], &[xs[j]]);
            }
            cov[i * n + i] += 1e-8;
        }
        let l = plain_cholesky(&cov, n);
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // y = L z has covariance L L^T = K.
        let ys: Vec<f64> = (0..n)
            .map(|i| (0..=i).map(|j| l[i * n + j] * z[j]).sum())
            .collect();
        let points: Vec<(Vec<f64>, f64)> = xs.iter().zip(&ys).map(|(&x, &y)| (vec![x], y)).collect();
        let h = history_from(&points, 1);
        let fitted = fit_hyperparameters(&h, 42);
        let ls = fitted.length_scales[0];
        assert!(
            ls > true_ls / 2.0 && ls < true_ls * 2.0,
            "recovered length scale {ls} not within factor 2 of {true_ls}"
        );
    }

    #[test]
    fn duplicate_points_force_noise_away_from_zero() {
        let h = history_from(&[(vec![0.5], 0.0), (vec![0.5], 1.0), (vec![0.2], 0.4)], 1);
        let fitted = fit_hyperparameters(&h, 1);
        assert!(
            fitted.noise_variance >= 1e-3,
            "noise {} not bounded away from zero",
            fitted.noise_variance
        );
    }

    #[test]
    fn fitted_config_scores_at_least_the_default() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_history(&mut rng, 2, 12);
        let fitted = fit_hyperparameters(&h, 99);
        let default = KernelConfig::default_for_dim(2);
        let lml_fitted = log_marginal_likelihood(&h, &fitted).unwrap();
        let lml_default = log_marginal_likelihood(&h, &default).unwrap();
        assert!(
            lml_fitted >= lml_default - 1e-9,
            "fitted {lml_fitted} below default {lml_default}"
        );
    }
}
