//! Concordance metrics: Harrell's and Uno's empirical C-index, Monte-Carlo
//! population C-index and optimal C*, finite-support counterparts, and
//! preference-cycle detection.
//!
//! A pair is concordant when the individual with the earlier event has the
//! higher risk score. Score ties count one half.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censoring::CensoringSurvival;
use crate::data::Dataset;
use crate::error::{validation, Error, Result};
use crate::model::SurvivalModel;
use crate::num::mean_and_se;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CIndexValue {
    pub value: f64,
    pub n_comparable_pairs: u64,
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_mc: usize,
}

/// Source of i.i.d. covariate vectors.
pub trait CovariateSampler: Sync {
    fn dim(&self) -> usize;
    fn sample_x(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Shipped covariate laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovariateLaw {
    /// `X ~ N(0, I_d)`.
    StdNormal { d: usize },
    /// One-hot group indicator with group probabilities `weights` (normalised).
    OneHot { weights: Vec<f64> },
}

impl CovariateSampler for CovariateLaw {
    fn dim(&self) -> usize {
        match self {
            CovariateLaw::StdNormal { d } => *d,
            CovariateLaw::OneHot { weights } => weights.len(),
        }
    }

    fn sample_x(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            CovariateLaw::StdNormal { d } => (0..*d).map(|_| StandardNormal.sample(rng)).collect(),
            CovariateLaw::OneHot { weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut g = weights.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    if u < *w {
                        g = k;
                        break;
                    }
                    u -= w;
                }
                let mut x = vec![0.0; weights.len()];
                x[g] = 1.0;
                x
            }
        }
    }
}

fn check_scores(scores: &[f64], n: usize) -> Result<()> {
    if scores.len() != n {
        return Err(validation(format!("{} scores for {n} rows", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(validation("risk scores must be finite"));
    }
    Ok(())
}

/// Shared pair loop: for every `j` with positive weight, compare against all
/// `i` with `u_i > u_j`. Per-`j` partial sums are reduced in index order so
/// the result does not depend on thread scheduling.
fn weighted_concordance(scores: &[f64], u: &[f64], weight: &(dyn Fn(usize) -> f64 + Sync)) -> (f64, f64, u64) {
    let parts: Vec<(f64, f64, u64)> = (0..u.len())
        .into_par_iter()
        .map(|j| {
            let w = weight(j);
            if w == 0.0 {
                return (0.0, 0.0, 0);
            }
            let (uj, sj) = (u[j], scores[j]);
            let mut num = 0.0;
            let mut count = 0u64;
            for (i, &ui) in u.iter().enumerate() {
                if ui > uj {
                    count += 1;
                    let si = scores[i];
                    if sj > si {
                        num += 1.0;
                    } else if sj == si {
                        num += 0.5;
                    }
                }
            }
            (w * num, w * count as f64, count)
        })
        .collect();
    parts.iter().fold((0.0, 0.0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2))
}

/// Harrell's C on fully observed event times; pairs with tied times are skipped.
pub fn harrell_c(scores: &[f64], times: &[f64]) -> Result<CIndexValue> {
    check_scores(scores, times.len())?;
    if times.len() < 2 {
        return Err(Error::Undefined("C-index needs at least two samples".into()));
    }
    let (num, den, pairs) = weighted_concordance(scores, times, &|_| 1.0);
    if pairs == 0 {
        return Err(Error::Undefined("no comparable pairs (all times tied)".into()));
    }
    Ok(CIndexValue { value: num / den, n_comparable_pairs: pairs })
}

/// Uno's IPCW C-index in ratio form with pair weights `δ_j / G(u_j)²`.
pub fn uno_c<G: CensoringSurvival + Sync + ?Sized>(scores: &[f64], data: &Dataset, curve: &G) -> Result<CIndexValue> {
    check_scores(scores, data.len())?;
    let (u, delta) = (data.u(), data.delta());
    let weight = |j: usize| crate::censoring::ipcw_weight(curve, u[j], delta[j], 2);
    let (num, den, pairs) = weighted_concordance(scores, u, &weight);
    if !(den > 0.0) || pairs == 0 {
        return Err(Error::Undefined("no comparable pairs for Uno's C-index".into()));
    }
    if !den.is_finite() {
        return Err(Error::NonFinite("IPCW weights (censoring survival reached zero)".into()));
    }
    Ok(CIndexValue { value: num / den, n_comparable_pairs: pairs })
}

/// I.i.d. covariate pairs with their exact pairwise probabilities
/// `p = P(T > T' | x, x')`, shared by the population-level estimators.
#[derive(Debug, Clone)]
pub struct PairSample {
    pub x: Vec<Vec<f64>>,
    pub x2: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

impl PairSample {
    /// Draws covariates sequentially from `rng`, then evaluates the model in parallel.
    pub fn draw<R: Rng + ?Sized>(
        model: &SurvivalModel,
        sampler: &dyn CovariateSampler,
        n_mc: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut adapter = RngAdapter(rng);
        let mut x = Vec::with_capacity(n_mc);
        let mut x2 = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            x.push(sampler.sample_x(&mut adapter));
            x2.push(sampler.sample_x(&mut adapter));
        }
        let p = x
            .par_iter()
            .zip(x2.par_iter())
            .map(|(a, b)| model.pairwise_prob(a, b))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { x, x2, p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Per-pair terms `p·1(s<s') + (1−p)·1(s>s') + ½·1(s=s')`, whose mean is the
    /// population C-index of `score`.
    pub fn concordance_terms<F>(&self, score: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        self.x
            .par_iter()
            .zip(self.x2.par_iter())
            .zip(self.p.par_iter())
            .map(|((a, b), &p)| Ok(pair_concordance(p, score(a)?, score(b)?)))
            .collect()
    }

    pub fn c_index<F>(&self, score: F) -> Result<McEstimate>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let terms = self.concordance_terms(score)?;
        let (value, std_err) = mean_and_se(&terms);
        Ok(McEstimate { value, std_err, n_mc: terms.len() })
    }

    pub fn c_star(&self) -> McEstimate {
        let terms: Vec<f64> = self.p.iter().map(|&p| p.max(1.0 - p)).collect();
        let (value, std_err) = mean_and_se(&terms);
        McEstimate { value, std_err, n_mc: terms.len() }
    }
}

/// Lets a `?Sized` generic RNG be used where `&mut dyn RngCore` is expected.
struct RngAdapter<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Expected concordance of one pair with `p = P(T > T')` and scores `s`, `s2`.
pub fn pair_concordance(p: f64, s: f64, s2: f64) -> f64 {
    if s < s2 {
        p
    } else if s > s2 {
        1.0 - p
    } else {
        0.5
    }
}

const MIN_MC: usize = 1000;

/// Population C-index `P(f(X) < f(X') | T > T')` of a score, by Monte Carlo over covariates.
pub fn population_c_index<F, R>(
    model: &SurvivalModel,
    score: F,
    sampler: &dyn CovariateSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    if n_mc < MIN_MC {
        return Err(validation(format!("n_mc must be at least {MIN_MC}")));
    }
    PairSample::draw(model, sampler, n_mc, rng)?.c_index(score)
}

/// `C* = E max(p, 1 − p)`. For models without an optimal ordering this is an
/// upper envelope that no score attains.
pub fn oracle_c_star<R: Rng + ?Sized>(
    model: &SurvivalModel,
    sampler: &dyn CovariateSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n_mc < MIN_MC {
        return Err(validation(format!("n_mc must be at least {MIN_MC}")));
    }
    Ok(PairSample::draw(model, sampler, n_mc, rng)?.c_star())
}

fn check_finite_support(pmat: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    check_antisymmetric(pmat)?;
    if weights.len() != pmat.len() {
        return Err(validation("weights and probability matrix sizes differ"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(validation("weights must be non-negative and sum to 1"));
    }
    Ok(())
}

/// Exact population C-index when `X` takes finitely many values with
/// probabilities `weights`.
pub fn finite_support_c_index(pmat: &[Vec<f64>], weights: &[f64], scores: &[f64]) -> Result<f64> {
    check_finite_support(pmat, weights)?;
    check_scores(scores, weights.len())?;
    let mut acc = 0.0;
    for (g, row) in pmat.iter().enumerate() {
        for (h, &p) in row.iter().enumerate() {
            acc += weights[g] * weights[h] * pair_concordance(p, scores[g], scores[h]);
        }
    }
    Ok(acc)
}

/// Exact `E max(p, 1 − p)` on a finite covariate support.
pub fn finite_support_c_star(pmat: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    check_finite_support(pmat, weights)?;
    let mut acc = 0.0;
    for (g, row) in pmat.iter().enumerate() {
        for (h, &p) in row.iter().enumerate() {
            acc += weights[g] * weights[h] * if g == h { 0.5 } else { p.max(1.0 - p) };
        }
    }
    Ok(acc)
}

fn check_antisymmetric(pmat: &[Vec<f64>]) -> Result<()> {
    let n = pmat.len();
    for (i, row) in pmat.iter().enumerate() {
        if row.len() != n {
            return Err(validation("probability matrix must be square"));
        }
        for j in 0..n {
            let (a, b) = (row[j], pmat[j][i]);
            if !(0.0..=1.0).contains(&a) || (a + b - 1.0).abs() > 1e-9 {
                return Err(validation(format!("p[{i}][{j}] + p[{j}][{i}] != 1 ({a} + {b})")));
            }
        }
    }
    Ok(())
}

/// A directed 3-cycle in the strict-majority tournament (`i → j` iff
/// `p[i][j] > 1/2`), or `None` when the relation is acyclic.
///
/// A tournament with any cycle has a 3-cycle, so triples suffice. The cycle
/// is reported starting from its smallest index.
pub fn detect_preference_cycle(pmat: &[Vec<f64>]) -> Result<Option<Vec<usize>>> {
    check_antisymmetric(pmat)?;
    let n = pmat.len();
    let beats = |i: usize, j: usize| pmat[i][j] > 0.5;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (i + 1)..n {
                if k != j && beats(i, j) && beats(j, k) && beats(k, i) {
                    return Ok(Some(vec![i, j, k]));
                }
            }
        }
    }
    Ok(None)
}
