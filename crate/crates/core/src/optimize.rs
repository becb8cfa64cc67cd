//! Derivative-free minimization with linear models on a simplex, in the
//! style of COBYLA without constraints.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::rng_from_seed;
use crate::error::{Error, Result};

// Simplex acceptability: vertices no farther than BETA * rho from the best
// point and no closer than ALPHA * rho to the face spanned by the others.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
// Radius is halved once a step achieves less than this fraction of the
// predicted decrease.
const ACCEPT_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub rho_begin: f64,
    pub rho_end: f64,
    /// Defaults to `100 * dim` when absent.
    pub max_evals: Option<usize>,
    /// Seed for the random initial point.
    pub seed: u64,
    /// Keep every evaluation in the result.
    pub trace: bool,
    /// The objective is known to be sampled. Without this the optimizer
    /// only smooths the final point when a repeated evaluation disagrees.
    #[serde(skip)]
    pub stochastic: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rho_begin: 0.5,
            rho_end: 1e-4,
            max_evals: None,
            seed: 0,
            trace: false,
            stochastic: false,
        }
    }
}

impl OptimizerConfig {
    pub fn max_evals_for(&self, dim: usize) -> usize {
        self.max_evals.unwrap_or(100 * dim.max(1))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.rho_end > 0.0 && self.rho_begin > self.rho_end) {
            return Err(Error::Config(format!(
                "need rho_begin > rho_end > 0, got {} and {}",
                self.rho_begin, self.rho_end
            )));
        }
        if self.max_evals_for(dim) < dim + 2 {
            return Err(Error::Config(format!(
                "max_evals {} is below dim + 2 = {}",
                self.max_evals_for(dim),
                dim + 2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub eval: usize,
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceEntry>,
}

impl OptimizationResult {
    /// Running minimum of the recorded values.
    pub fn incumbent_history(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trace
            .iter()
            .map(|t| {
                best = best.min(t.value);
                best
            })
            .collect()
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("eval,value,x\n");
        for t in &self.trace {
            let xs: Vec<String> = t.x.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&format!("{},{:.12e},{}\n", t.eval, t.value, xs.join(";")));
        }
        out
    }
}

/// Angles drawn i.i.d. uniform on `[0, 2pi)`.
pub fn random_init(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..dim).map(|_| rng.gen_range(0.0..TAU)).collect()
}

/// Minimizes from `random_init(dim, config.seed)`.
pub fn minimize(f: impl FnMut(&[f64]) -> f64, dim: usize, config: &OptimizerConfig) -> Result<OptimizationResult> {
    minimize_from(f, &random_init(dim, config.seed), config)
}

pub fn maximize(mut f: impl FnMut(&[f64]) -> f64, dim: usize, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let mut r = minimize(|x| -f(x), dim, config)?;
    r.value = -r.value;
    r.trace.iter_mut().for_each(|t| t.value = -t.value);
    Ok(r)
}

struct Tracker<F> {
    f: F,
    evals: usize,
    max: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trace: Option<Vec<TraceEntry>>,
    samples: Vec<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Tracker<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        self.samples.push((x.to_vec(), v));
        if let Some(t) = &mut self.trace {
            t.push(TraceEntry {
                eval: self.evals,
                x: x.to_vec(),
                value: v,
            });
        }
        if v < self.best_f || self.best_x.is_empty() {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        v
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max
    }

    fn finish(self, converged: bool) -> OptimizationResult {
        OptimizationResult {
            x: self.best_x,
            value: self.best_f,
            evaluations: self.evals,
            converged,
            trace: self.trace.unwrap_or_default(),
        }
    }
}

pub fn minimize_from(f: impl FnMut(&[f64]) -> f64, x0: &[f64], config: &OptimizerConfig) -> Result<OptimizationResult> {
    let n = x0.len();
    config.validate(n)?;
    let mut t = Tracker {
        f,
        evals: 0,
        max: config.max_evals_for(n),
        best_x: Vec::new(),
        best_f: f64::INFINITY,
        trace: config.trace.then(Vec::new),
        samples: Vec::new(),
    };
    let f0 = t.eval(x0);
    if n == 0 {
        return Ok(t.finish(true));
    }

    let mut rho = config.rho_begin;
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![f0];
    build_simplex(&mut t, &mut pts, &mut vals, rho);
    if pts.len() < n + 1 {
        return Ok(t.finish(false));
    }

    let mut needs_geometry = false;
    let converged = loop {
        if t.exhausted() {
            break false;
        }
        let b = argmin(&vals);
        pts.swap(0, b);
        vals.swap(0, b);

        let edges = DMatrix::from_fn(n, n, |i, j| pts[i + 1][j] - pts[0][j]);
        let Some(inv) = edges.clone().try_inverse() else {
            pts.truncate(1);
            vals.truncate(1);
            build_simplex(&mut t, &mut pts, &mut vals, rho);
            if pts.len() < n + 1 {
                break false;
            }
            continue;
        };
        let dist: Vec<f64> = (0..n).map(|i| edges.row(i).norm()).collect();
        let dual: Vec<DVector<f64>> = (0..n).map(|i| inv.column(i).into_owned()).collect();
        let sigma: Vec<f64> = dual.iter().map(|d| 1.0 / d.norm()).collect();
        let acceptable = dist.iter().all(|d| *d <= BETA * rho) && sigma.iter().all(|s| *s >= ALPHA * rho);

        let df = DVector::from_fn(n, |i, _| vals[i + 1] - vals[0]);
        let g = &inv * df;
        let gnorm = g.norm();

        if needs_geometry && !acceptable {
            needs_geometry = false;
            let j = match (0..n).filter(|&i| dist[i] > BETA * rho).max_by(|&a, &b| dist[a].total_cmp(&dist[b])) {
                Some(j) => j,
                None => argmin(&sigma),
            };
            let dir = &dual[j] / dual[j].norm();
            let sign = if g.dot(&dir) > 0.0 { -1.0 } else { 1.0 };
            let x: Vec<f64> = (0..n).map(|k| pts[0][k] + sign * rho * dir[k]).collect();
            let v = t.eval(&x);
            pts[j + 1] = x;
            vals[j + 1] = v;
            continue;
        }

        let ratio = if gnorm.is_finite() && gnorm > 0.0 {
            let x: Vec<f64> = (0..n).map(|k| pts[0][k] - rho * g[k] / gnorm).collect();
            let v = t.eval(&x);
            let ratio = (vals[0] - v) / (rho * gnorm);
            let step = DVector::from_fn(n, |k, _| x[k] - pts[0][k]);
            let (j, vol) = (0..n)
                .map(|j| (j, step.dot(&dual[j]).abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("n > 0");
            if vol > 1e-12 {
                pts[j + 1] = x;
                vals[j + 1] = v;
            }
            ratio
        } else {
            0.0
        };

        if ratio < ACCEPT_RATIO {
            if acceptable {
                if rho <= config.rho_end {
                    break true;
                }
                rho *= 0.5;
                if rho <= 1.5 * config.rho_end {
                    rho = config.rho_end;
                }
            } else {
                needs_geometry = true;
            }
        }
    };
    polish(&mut t, config.rho_begin, config.stochastic);
    Ok(t.finish(converged))
}

// Under a stochastic objective the lowest recorded sample is biased low and
// tends to sit wherever the noise happened to be kind. Repeat the incumbent
// once; if the value moves, fit a quadratic to the samples around it by least
// squares and finish at the fitted minimum instead.
fn polish<F: FnMut(&[f64]) -> f64>(t: &mut Tracker<F>, radius: f64, stochastic: bool) {
    let n = t.best_x.len();
    if t.evals + 2 > t.max || !t.best_f.is_finite() {
        return;
    }
    let x0 = t.best_x.clone();
    let f0 = t.best_f;
    let again = t.eval(&x0);
    if again == f0 && !stochastic {
        return;
    }
    let n_coef = (n + 1) * (n + 2) / 2;
    let mut near: Vec<(f64, usize)> = t
        .samples
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| v.is_finite())
        .map(|(i, (x, _))| (x.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    let inside = near.iter().filter(|(d, _)| *d <= radius).count();
    near.truncate(inside.max(2 * n_coef));
    if near.len() < 2 * n_coef {
        return;
    }
    let reach = near.last().map_or(0.0, |(d, _)| *d);

    // columns: 1, y_i, then y_i * y_j for i <= j
    let row = |y: &[f64]| {
        let mut r = Vec::with_capacity(n_coef);
        r.push(1.0);
        r.extend_from_slice(y);
        for i in 0..n {
            for j in i..n {
                r.push(y[i] * y[j]);
            }
        }
        r
    };
    let mut a = DMatrix::zeros(near.len(), n_coef);
    let mut b = DVector::zeros(near.len());
    for (r, (_, i)) in near.iter().enumerate() {
        let (x, v) = &t.samples[*i];
        let y: Vec<f64> = x.iter().zip(&x0).map(|(p, q)| p - q).collect();
        for (c, val) in row(&y).into_iter().enumerate() {
            a[(r, c)] = val;
        }
        b[r] = *v;
    }
    let Ok(coef) = a.svd(true, true).solve(&b, 1e-12) else {
        return;
    };
    let g = DVector::from_fn(n, |i, _| coef[1 + i]);
    let mut h = DMatrix::zeros(n, n);
    let mut k = 1 + n;
    for i in 0..n {
        for j in i..n {
            if i == j {
                h[(i, i)] = 2.0 * coef[k];
            } else {
                h[(i, j)] = coef[k];
                h[(j, i)] = coef[k];
            }
            k += 1;
        }
    }
    // Newton step restricted to directions of clearly positive curvature;
    // parameters that stop mattering at the optimum leave flat directions.
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return;
    }
    let mut step = DVector::zeros(n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-6 * top {
            let v = eig.eigenvectors.column(i);
            step -= v * (v.dot(&g) / l);
        }
    }
    if step.norm() > reach {
        step *= reach / step.norm();
    }
    let x: Vec<f64> = x0.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
    let v = t.eval(&x);
    t.best_x = x;
    t.best_f = v;
}

fn build_simplex<F: FnMut(&[f64]) -> f64>(t: &mut Tracker<F>, pts: &mut Vec<Vec<f64>>, vals: &mut Vec<f64>, rho: f64) {
    let n = pts[0].len();
    for i in 0..n {
        if t.exhausted() {
            return;
        }
        let mut x = pts[0].clone();
        x[i] += rho;
        vals.push(t.eval(&x));
        pts.push(x);
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let r = minimize_from(|x| (x[0] - 2.0).powi(2), &[0.0], &OptimizerConfig::default()).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-4, "{:?}", r);
        assert!(r.converged);
    }

    #[test]
    fn anisotropic_quadratic() {
        let r = minimize_from(|x| x[0] * x[0] + 10.0 * x[1] * x[1], &[1.3, -0.8], &OptimizerConfig::default()).unwrap();
        assert!(r.x[0].abs() < 1e-3 && r.x[1].abs() < 1e-3, "{:?}", r);
    }

    #[test]
    fn maximize_concave() {
        let r = maximize(|x| -(x[0] - 1.0).powi(2), 1, &OptimizerConfig::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3);
        assert!(r.value <= 0.0 && r.value > -1e-6);
    }

    #[test]
    fn constant_objective() {
        let r = maximize(|_| 3.5, 3, &OptimizerConfig::default()).unwrap();
        assert_eq!(r.value, 3.5);
    }

    #[test]
    fn zero_dimensional() {
        let r = minimize(|_| 7.0, 0, &OptimizerConfig::default()).unwrap();
        assert_eq!((r.value, r.evaluations, r.converged), (7.0, 1, true));
    }

    #[test]
    fn budget_respected() {
        let cfg = OptimizerConfig {
            max_evals: Some(9),
            ..Default::default()
        };
        let r = minimize(|x| x.iter().map(|v| v.sin()).sum(), 5, &cfg).unwrap();
        assert_eq!(r.evaluations, 9);
        assert!(!r.converged);
    }

    #[test]
    fn invalid_config() {
        let bad = OptimizerConfig {
            rho_begin: 1e-5,
            ..Default::default()
        };
        assert!(bad.validate(2).is_err());
        let small = OptimizerConfig {
            max_evals: Some(3),
            ..Default::default()
        };
        assert!(small.validate(2).is_err());
    }

    #[test]
    fn random_init_contract() {
        assert_eq!(random_init(6, 4), random_init(6, 4));
        assert_eq!(random_init(6, 4).len(), 6);
        assert!(random_init(50, 1).iter().all(|v| (0.0..TAU).contains(v)));
    }
}
