use super::{MapError, Result};
use crate::rng::seeded;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const PERPLEXITY_TOL: f64 = 1e-5;
const MAX_SEARCH_STEPS: usize = 200;
const DUPLICATE_JITTER: f64 = 1e-8;
const INIT_SCALE: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 15.0,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 3 {
            return Err(MapError::TooFew(n));
        }
        check_perplexity(self.perplexity, n)?;
        if self.iterations == 0 {
            return Err(MapError::BadConfig("iterations must be at least 1".into()));
        }
        let positive = |v: f64| v > 0.0;
        if !positive(self.learning_rate) || !positive(self.exaggeration) {
            return Err(MapError::BadConfig(
                "learning rate and exaggeration must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_perplexity(perplexity: f64, n: usize) -> Result<()> {
    if !(1.0..n as f64).contains(&perplexity) {
        return Err(MapError::BadConfig(format!(
            "perplexity {perplexity} must lie in [1, {n})"
        )));
    }
    Ok(())
}

/// Symmetric input-space affinities.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub n: usize,
    /// Row-major `n × n`.
    pub p: Vec<f64>,
    pub perplexity: f64,
    /// Per-point Gaussian bandwidth of the conditional distribution.
    pub sigmas: Vec<f64>,
}

impl AffinityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Copies `x`, nudging every exact repeat of an earlier row by a tiny
/// index-derived unit vector.
pub fn jitter_duplicates(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = x.to_vec();
    for i in 1..out.len() {
        if out[..i].iter().any(|prev| prev == &out[i]) {
            let d = out[i].len();
            let dir: Vec<f64> = (0..d)
                .map(|k| ((i + 1) as f64 * (k + 1) as f64).sin())
                .collect();
            let norm = dir
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            out[i]
                .iter_mut()
                .zip(&dir)
                .for_each(|(v, u)| *v += DUPLICATE_JITTER * u / norm);
        }
    }
    out
}

/// Conditional row `p_{·|i}` at precision `beta = 1/(2σ²)` and its entropy in bits.
fn conditional_row(dist: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut row: Vec<f64> = dist
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            if j == i {
                0.0
            } else {
                (-beta * (d - min)).exp()
            }
        })
        .collect();
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= z);
    let h: f64 = -row
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>();
    (row, h)
}

/// Binary-searches each row's bandwidth to hit `perplexity`, then
/// symmetrizes: `P = (P_{j|i} + P_{i|j}) / 2n`.
pub fn pairwise_affinities(x: &[Vec<f64>], perplexity: f64) -> Result<AffinityMatrix> {
    let n = x.len();
    if n < 3 {
        return Err(MapError::TooFew(n));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(MapError::Shape("input rows differ in length".into()));
    }
    check_perplexity(perplexity, n)?;
    let x = jitter_duplicates(x);
    let mut cond = vec![0.0; n * n];
    let mut sigmas = vec![0.0; n];
    for i in 0..n {
        let dist: Vec<f64> = x.iter().map(|xj| sq_dist(&x[i], xj)).collect();
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let (mut row, mut h) = conditional_row(&dist, i, beta);
        for _ in 0..MAX_SEARCH_STEPS {
            if (h.exp2() - perplexity).abs() < PERPLEXITY_TOL {
                break;
            }
            if h.exp2() > perplexity {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            (row, h) = conditional_row(&dist, i, beta);
        }
        sigmas[i] = (1.0 / (2.0 * beta)).sqrt();
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok(AffinityMatrix {
        n,
        p,
        perplexity,
        sigmas,
    })
}

/// Student-t kernel `(1 + ‖yᵢ − yⱼ‖²)⁻¹` for all pairs (zero diagonal) and its sum.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut w = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = v;
            w[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (w, z)
}

/// `KL(P ‖ Q)` with the Student-t low-dimensional kernel.
pub fn kl_objective(p: &AffinityMatrix, y: &[[f64; 2]]) -> Result<f64> {
    if y.len() != p.n {
        return Err(MapError::Shape(format!(
            "{} positions for {} affinities",
            y.len(),
            p.n
        )));
    }
    Ok(kl_unchecked(&p.p, y))
}

fn kl_unchecked(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (w, z) = student_kernel(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (w[i * n + j] / z)).ln();
            }
        }
    }
    kl
}

/// `∂KL/∂yᵢ = 4 Σⱼ (s·pᵢⱼ − qᵢⱼ)(yᵢ − yⱼ)(1 + ‖yᵢ − yⱼ‖²)⁻¹` with the
/// affinities scaled by `s` (early exaggeration; `s = 1` is the true gradient).
pub fn kl_gradient(p: &AffinityMatrix, y: &[[f64; 2]], scale: f64) -> Result<Vec<[f64; 2]>> {
    if y.len() != p.n {
        return Err(MapError::Shape(format!(
            "{} positions for {} affinities",
            y.len(),
            p.n
        )));
    }
    Ok(gradient_unchecked(&p.p, y, scale))
}

fn gradient_unchecked(p: &[f64], y: &[[f64; 2]], scale: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let (w, z) = student_kernel(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = w[i * n + j];
            let m = 4.0 * (scale * p[i * n + j] - wij / z) * wij;
            grad[i][0] += m * (y[i][0] - y[j][0]);
            grad[i][1] += m * (y[i][1] - y[j][1]);
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneRun {
    pub y: Vec<[f64; 2]>,
    /// Unexaggerated objective after each iteration.
    pub objectives: Vec<f64>,
    pub affinities: AffinityMatrix,
}

/// Exact t-SNE: seeded `N(0, 1e-4²)` start, early exaggeration, momentum and
/// per-coordinate adaptive gains.
pub fn tsne(x: &[Vec<f64>], config: &TsneConfig) -> Result<TsneRun> {
    config.validate(x.len())?;
    let affinities = pairwise_affinities(x, config.perplexity)?;
    let n = x.len();
    let mut rng = seeded(config.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [a * INIT_SCALE, b * INIT_SCALE]
        })
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut objectives = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let scale = if it < config.exaggeration_iterations {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let grad = gradient_unchecked(&affinities.p, &y, scale);
        for i in 0..n {
            for k in 0..2 {
                let g = grad[i][k];
                gains[i][k] = if (g > 0.0) != (update[i][k] > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    gains[i][k] * 0.8
                };
                gains[i][k] = gains[i][k].max(MIN_GAIN);
                update[i][k] = momentum * update[i][k] - config.learning_rate * gains[i][k] * g;
                y[i][k] += update[i][k];
            }
        }
        for k in 0..2 {
            let mean = y.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[k] -= mean);
        }
        if y.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(MapError::NonFinite { iteration: it });
        }
        objectives.push(kl_unchecked(&affinities.p, &y));
    }
    Ok(TsneRun {
        y,
        objectives,
        affinities,
    })
}
