//! Poisson log-linear models fitted by iteratively reweighted least squares.
//!
//! Designs are hierarchical with treatment coding: an intercept, then every
//! interaction of up to `order` variables, each level indexed against the
//! first category of every variable involved.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::table::{ContingencyTable, TableSchema};

const MAX_ITERATIONS: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const DEVIANCE_TOL: f64 = 1e-10;
/// Standard errors above this are treated as diverging estimates.
const SEPARATION_SE: f64 = 1e3;

/// Sparse 0/1 design over the cells of a table.
#[derive(Clone, Debug)]
pub struct LoglinearDesign {
    terms: Vec<String>,
    rows: Vec<Vec<u32>>,
}

impl LoglinearDesign {
    /// All main effects and interactions of up to `order` variables.
    pub fn hierarchical(schema: &TableSchema, order: usize) -> Result<Self> {
        let p = schema.variables().len();
        if order == 0 || order > p {
            return param_err(format!("interaction order must be in 1..={p}, got {order}"));
        }
        let dims = schema.dims();

        // variable subsets by size, then lexicographically
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for size in 1..=order {
            let mut idx: Vec<usize> = (0..size).collect();
            loop {
                subsets.push(idx.clone());
                let mut i = size;
                while i > 0 && idx[i - 1] == p - size + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                idx[i - 1] += 1;
                for j in i..size {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }

        let vars = schema.variables();
        let mut terms = vec!["(Intercept)".to_string()];
        let mut offsets = Vec::with_capacity(subsets.len());
        for set in &subsets {
            offsets.push(terms.len());
            let sizes: Vec<usize> = set.iter().map(|&v| dims[v] - 1).collect();
            let count: usize = sizes.iter().product();
            for flat in 0..count {
                let mut rem = flat;
                let mut levels = vec![0; set.len()];
                for i in (0..set.len()).rev() {
                    levels[i] = rem % sizes[i] + 1;
                    rem /= sizes[i];
                }
                let name = set
                    .iter()
                    .zip(&levels)
                    .map(|(&v, &l)| format!("{}[{}]", vars[v].name, vars[v].categories[l]))
                    .collect::<Vec<_>>()
                    .join(":");
                terms.push(name);
            }
        }
        if terms.len() > u32::MAX as usize {
            return Err(Error::Overflow("design has too many columns".into()));
        }

        let rows = (0..schema.num_cells())
            .map(|cell| {
                let cats = schema.categories_of(cell);
                let mut cols = vec![0u32];
                for (set, &off) in subsets.iter().zip(&offsets) {
                    if set.iter().any(|&v| cats[v] == 0) {
                        continue;
                    }
                    let mut flat = 0;
                    for &v in set {
                        flat = flat * (dims[v] - 1) + cats[v] - 1;
                    }
                    cols.push((off + flat) as u32);
                }
                cols
            })
            .collect();
        Ok(Self { terms, rows })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn num_params(&self) -> usize {
        self.terms.len()
    }

    pub fn num_cells(&self) -> usize {
        self.rows.len()
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|cols| cols.iter().map(|&c| beta[c as usize]).sum())
            .collect()
    }

    /// Poisson log-likelihood without the `ln y!` constant.
    pub fn log_likelihood(&self, y: &[f64], beta: &[f64]) -> f64 {
        self.linear_predictor(beta)
            .iter()
            .zip(y)
            .map(|(&eta, &yi)| yi * eta - eta.exp())
            .sum()
    }

    /// Gradient of the log-likelihood, `X^T (y - mu)`.
    pub fn score(&self, y: &[f64], beta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_params()];
        for ((cols, &eta), &yi) in self.rows.iter().zip(&self.linear_predictor(beta)).zip(y) {
            let r = yi - eta.exp();
            for &c in cols {
                g[c as usize] += r;
            }
        }
        g
    }

    fn weighted_gram(&self, w: &[f64], z: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.num_params();
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        for ((cols, &wi), &zi) in self.rows.iter().zip(w).zip(z) {
            for &i in cols {
                b[i as usize] += wi * zi;
                for &j in cols {
                    a[(i as usize, j as usize)] += wi;
                }
            }
        }
        (a, b)
    }

    /// Fit to the counts `y` (one per cell).
    pub fn fit(&self, y: &[f64]) -> Result<FitResult> {
        if y.len() != self.num_cells() {
            return Err(Error::Alignment(format!(
                "{} counts for a design over {} cells",
                y.len(),
                self.num_cells()
            )));
        }
        let p = self.num_params();
        let mut mu: Vec<f64> = y.iter().map(|&v| v + 0.5).collect();
        let mut eta: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
        let mut beta = vec![0.0; p];
        let mut deviance = poisson_deviance(y, &mu);
        let mut converged = false;
        let mut iterations = 0;
        let mut max_score = f64::INFINITY;

        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let z: Vec<f64> = eta.iter().zip(y).zip(&mu).map(|((&e, &yi), &m)| e + (yi - m) / m).collect();
            let (a, b) = self.weighted_gram(&mu, &z);
            beta = solve_spd(a, &b)?.iter().copied().collect();
            eta = self.linear_predictor(&beta);
            mu = eta.iter().map(|&e| e.clamp(-700.0, 700.0).exp()).collect();

            let new_deviance = poisson_deviance(y, &mu);
            max_score = self.score(y, &beta).iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
            let change = (new_deviance - deviance).abs() / (new_deviance.abs() + 0.1);
            deviance = new_deviance;
            if max_score < SCORE_TOL || change < DEVIANCE_TOL {
                converged = true;
                break;
            }
        }

        let (info, _) = self.weighted_gram(&mu, &vec![0.0; mu.len()]);
        let cov = invert_spd(info)?;
        let std_errors: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        let separated = beta
            .iter()
            .zip(&std_errors)
            .map(|(b, se)| !(b.is_finite() && se.is_finite()) || *se > SEPARATION_SE)
            .collect();
        Ok(FitResult {
            terms: self.terms.clone(),
            ci_lower: beta.iter().zip(&std_errors).map(|(b, s)| b - 1.96 * s).collect(),
            ci_upper: beta.iter().zip(&std_errors).map(|(b, s)| b + 1.96 * s).collect(),
            estimates: beta,
            std_errors,
            separated,
            fitted: mu,
            deviance,
            max_score,
            iterations,
            converged,
        })
    }
}

fn poisson_deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&yi, &m)| {
            let t = if yi > 0.0 { yi * (yi / m).ln() } else { 0.0 };
            t - (yi - m)
        })
        .sum::<f64>()
}

fn ridge(a: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let max_diag = (0..a.nrows()).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let mut r = a.clone();
    for i in 0..a.nrows() {
        r[(i, i)] += scale * max_diag.max(1.0);
    }
    r
}

/// Cholesky solve, retrying with a tiny ridge when the matrix is numerically singular.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    for scale in [0.0, 1e-12, 1e-9] {
        let m = if scale == 0.0 { a.clone() } else { ridge(&a, scale) };
        if let Some(chol) = m.cholesky() {
            return Ok(chol.solve(b));
        }
    }
    Err(Error::Convergence {
        routine: "IRLS (singular information matrix)",
        iterations: 0,
    })
}

fn invert_spd(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    for scale in [0.0, 1e-12, 1e-9] {
        let m = if scale == 0.0 { a.clone() } else { ridge(&a, scale) };
        if let Some(chol) = m.cholesky() {
            return Ok(chol.inverse());
        }
    }
    Err(Error::Convergence {
        routine: "IRLS (singular information matrix)",
        iterations: 0,
    })
}

/// Estimates, standard errors and 95% intervals of a fitted log-linear model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub terms: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    /// Terms whose estimates diverge (sampling zeros in a margin).
    pub separated: Vec<bool>,
    pub fitted: Vec<f64>,
    pub deviance: f64,
    /// Largest absolute score component at the reported estimates.
    pub max_score: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fit the all-`order`-way model to the marginal of `table` over `variables`.
pub fn fit_loglinear(table: &ContingencyTable, variables: &[&str], order: usize) -> Result<FitResult> {
    let margin = table.marginal(variables)?;
    let design = LoglinearDesign::hierarchical(margin.schema(), order)?;
    let y: Vec<f64> = margin.counts().iter().map(|&c| c as f64).collect();
    design.fit(&y)
}
