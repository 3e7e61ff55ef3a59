//! Friedman omnibus test and Nemenyi post-hoc comparison over fold scores,
//! with the chi-square and studentized-range numerics they need.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};

/// Significance level used for critical differences and report flags.
pub const ALPHA: f64 = 0.05;

/// Blocks (folds) by treatments (algorithms). Higher scores are better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    treatments: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(treatments: Vec<String>, rows: Vec<Vec<f64>>) -> Result<ScoreMatrix> {
        let k = treatments.len();
        if k < 2 || rows.len() < 2 {
            return Err(TriageError::InvalidParameter(format!(
                "score matrix needs at least 2 blocks and 2 treatments, got {}x{}",
                rows.len(),
                k
            )));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != k) {
            return Err(TriageError::Shape { expected: k, actual: row.len() });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TriageError::InvalidParameter("score matrix contains non-finite values".into()));
        }
        Ok(ScoreMatrix { treatments, rows })
    }

    pub fn treatments(&self) -> &[String] {
        &self.treatments
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.treatments.len()
    }

    /// Arithmetic mean of each treatment's column.
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.k())
            .map(|j| self.rows.iter().map(|r| r[j]).sum::<f64>() / self.blocks() as f64)
            .collect()
    }

    /// Parses a CSV with a header row of treatment names and one numeric row per block.
    pub fn from_csv(text: &str) -> Result<ScoreMatrix> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| TriageError::Parse("empty score file".into()))?;
        let treatments: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let rows = lines
            .enumerate()
            .map(|(i, line)| {
                line.split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|_| {
                            TriageError::Parse(format!("row {}: not a number: {:?}", i + 2, v.trim()))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreMatrix::new(treatments, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub q_statistic: f64,
    pub p_value: f64,
    pub mean_ranks: Vec<f64>,
    pub tie_correction: f64,
    /// Every block had all treatments tied; Q and p are reported as 0 and 1.
    pub fully_tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiResult {
    pub p_matrix: Vec<Vec<f64>>,
    pub critical_difference: f64,
}

/// Ranks within one block, 1 = highest score, ties share the average rank.
/// Also returns the block's `sum(t^3 - t)` over tie groups.
fn rank_block(scores: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let average = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = average;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

pub fn mean_ranks(m: &ScoreMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.k()];
    for row in m.rows() {
        let (ranks, _) = rank_block(row);
        sums.iter_mut().zip(ranks).for_each(|(s, r)| *s += r);
    }
    sums.into_iter().map(|s| s / m.blocks() as f64).collect()
}

pub fn friedman_test(m: &ScoreMatrix) -> FriedmanResult {
    let n = m.blocks() as f64;
    let k = m.k() as f64;
    let mut sums = vec![0.0; m.k()];
    let mut ties = 0.0;
    for row in m.rows() {
        let (ranks, t) = rank_block(row);
        sums.iter_mut().zip(ranks).for_each(|(s, r)| *s += r);
        ties += t;
    }
    let mean_ranks: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let tie_correction = 1.0 - ties / (n * (k * k * k - k));
    if tie_correction <= 0.0 {
        return FriedmanResult { q_statistic: 0.0, p_value: 1.0, mean_ranks, tie_correction: 0.0, fully_tied: true };
    }
    let centre = (k + 1.0) / 2.0;
    let spread: f64 = mean_ranks.iter().map(|r| (r - centre).powi(2)).sum();
    let q_statistic = 12.0 * n / (k * (k + 1.0)) * spread / tie_correction;
    FriedmanResult {
        q_statistic,
        p_value: chi2_upper_tail(q_statistic, m.k() - 1),
        mean_ranks,
        tie_correction,
        fully_tied: false,
    }
}

pub fn nemenyi_pairwise(m: &ScoreMatrix) -> NemenyiResult {
    let k = m.k();
    let ranks = mean_ranks(m);
    let se = ((k * (k + 1)) as f64 / (6.0 * m.blocks() as f64)).sqrt();
    let mut p_matrix = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let q = (ranks[i] - ranks[j]).abs() / se * std::f64::consts::SQRT_2;
            let p = (1.0 - studentized_range_cdf(q, k)).clamp(0.0, 1.0);
            p_matrix[i][j] = p;
            p_matrix[j][i] = p;
        }
    }
    let critical_difference = studentized_range_quantile(1.0 - ALPHA, k) / std::f64::consts::SQRT_2 * se;
    NemenyiResult { p_matrix, critical_difference }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi2_upper_tail(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let a = df as f64 / 2.0;
    let x = x / 2.0;
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_fraction(a, x)
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 1000;

/// Regularized lower incomplete gamma `P(a, x)` by its power series.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - libm::lgamma(a)).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)` by Lentz's continued fraction.
fn upper_gamma_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - libm::lgamma(a)).exp() * h
}

const GL_ORDER: usize = 20;
const GL_PANELS_PER_UNIT: f64 = 2.0;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for j in 2..=n {
                        let j = j as f64;
                        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let step = p1 / dp;
                    x -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// CDF of the studentized range of `k` standard normals (infinite df):
/// `k * integral phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz` over `[-8, 8 + q]`,
/// by composite Gauss-Legendre quadrature.
pub fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let (lo, hi) = (-8.0, 8.0 + q);
    let panels = ((hi - lo) * GL_PANELS_PER_UNIT).ceil() as usize;
    let width = (hi - lo) / panels as f64;
    let rule = gauss_legendre();
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        for &(x, w) in rule {
            let z = mid + 0.5 * width * x;
            let inner = (normal_cdf(z) - normal_cdf(z - q)).max(0.0);
            total += w * normal_pdf(z) * inner.powi(k as i32 - 1);
        }
    }
    (k as f64 * total * 0.5 * width).clamp(0.0, 1.0)
}

/// Inverse of [`studentized_range_cdf`] by bisection.
pub fn studentized_range_quantile(probability: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while studentized_range_cdf(hi, k) < probability {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k) < probability {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
