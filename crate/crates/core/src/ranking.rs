//! Ranking inference as a minimum-weight feedback arc set (MWFAS) problem.
//!
//! Given pairwise probabilities `h_ij = P(T_i > T_j)`, the tournament weight
//! `γ_ij = |2h_ij − 1|·1(h_ij > 1/2)` is the price of ranking `i` as riskier
//! than `j` although `i` probably outlives `j`. A ranking's cost is the total
//! weight of such violated pairs.
//!
//! Orders are listed from lowest to highest risk: `order[0]` is the item
//! expected to survive longest. All solvers break ties toward the
//! lexicographically smallest order.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{validation, Error, Result};
use crate::estimators::PairwiseModel;
use crate::model::SurvivalModel;
use crate::num::logistic;

/// Largest cohort accepted by [`mwfas_exact`].
pub const EXACT_MAX_N: usize = 20;

/// Default pass budget of [`mwfas_local_search`].
pub const DEFAULT_LS_PASSES: usize = 50;

/// Anything that can estimate `P(T > T' | x, x')`.
pub trait PairwiseOracle: Sync {
    fn prob(&self, x: &[f64], x2: &[f64]) -> Result<f64>;

    /// `p[i][j] = P(T_i > T_j)` over a cohort.
    fn prob_matrix(&self, cohort: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = cohort.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Ok(0.5) } else { self.prob(&cohort[i], &cohort[j]) })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    }
}

impl PairwiseOracle for SurvivalModel {
    fn prob(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.pairwise_prob(x, x2)
    }
}

impl PairwiseOracle for PairwiseModel {
    fn prob(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        Ok(self.h(x, x2))
    }

    fn prob_matrix(&self, cohort: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let g: Vec<f64> = cohort.iter().map(|x| self.potential(x)).collect();
        Ok(g.par_iter().map(|gi| g.iter().map(|gj| logistic(gi - gj)).collect()).collect())
    }
}

/// Weighted majority tournament over `n` items, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tournament {
    n: usize,
    gamma: Vec<f64>,
}

impl Tournament {
    /// Build from `p[i][j] = P(T_i > T_j)`.
    pub fn from_prob_matrix(p: &[Vec<f64>]) -> Result<Self> {
        Self::from_prob_matrix_weighted(p, None)
    }

    /// As [`Tournament::from_prob_matrix`], with `γ_ij` scaled by `w_i w_j`
    /// (items standing for covariate values with marginal mass `w`).
    pub fn from_prob_matrix_weighted(p: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Self> {
        let n = p.len();
        if n < 2 {
            return Err(validation("a tournament needs at least two items"));
        }
        if let Some(w) = weights {
            if w.len() != n || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(validation("item weights must be finite, non-negative, one per item"));
            }
        }
        let mut gamma = vec![0.0; n * n];
        for (i, row) in p.iter().enumerate() {
            if row.len() != n {
                return Err(validation("probability matrix must be square"));
            }
            for (j, &h) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                // saturated logistic estimates can round to exactly 0 or 1
                if !(0.0..=1.0).contains(&h) {
                    return Err(validation(format!("h[{i}][{j}] = {h} is outside [0, 1]")));
                }
                if h > 0.5 {
                    let scale = weights.map_or(1.0, |w| w[i] * w[j]);
                    gamma[i * n + j] = (2.0 * h - 1.0) * scale;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                if gamma[i * n + j] > 0.0 && gamma[j * n + i] > 0.0 {
                    return Err(validation(format!("h[{i}][{j}] and h[{j}][{i}] both exceed 1/2")));
                }
            }
        }
        Ok(Self { n, gamma })
    }

    /// Build directly from weights; `gamma[i][j]` must be ≥ 0 with at most one
    /// direction positive per pair.
    pub fn from_gamma(gamma: &[Vec<f64>]) -> Result<Self> {
        let n = gamma.len();
        if n < 2 {
            return Err(validation("a tournament needs at least two items"));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in gamma.iter().enumerate() {
            if row.len() != n {
                return Err(validation("gamma matrix must be square"));
            }
            for (j, &g) in row.iter().enumerate() {
                if !(g >= 0.0 && g.is_finite()) || (i == j && g != 0.0) {
                    return Err(validation(format!("invalid gamma[{i}][{j}] = {g}")));
                }
                if g > 0.0 && gamma[j][i] > 0.0 {
                    return Err(validation(format!("gamma[{i}][{j}] and gamma[{j}][{i}] both positive")));
                }
                flat.push(g);
            }
        }
        Ok(Self { n, gamma: flat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cost of ranking `i` riskier than `j`.
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.gamma.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Headerless CSV, one matrix row per line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.gamma.chunks(self.n) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| validation(format!("tournament CSV: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_gamma(&rows)
    }
}

/// Build the tournament of a cohort from any pairwise oracle.
pub fn build_tournament(oracle: &dyn PairwiseOracle, cohort: &[Vec<f64>]) -> Result<Tournament> {
    if cohort.len() < 2 {
        return Err(validation("cohort needs at least two items"));
    }
    Tournament::from_prob_matrix(&oracle.prob_matrix(cohort)?)
}

/// A permutation: `perm[i]` is the rank of item `i` (0 = lowest risk).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    perm: Vec<usize>,
}

impl Ranking {
    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &r in &perm {
            if r >= n || seen[r] {
                return Err(validation("ranking is not a permutation"));
            }
            seen[r] = true;
        }
        Ok(Self { perm })
    }

    /// From items listed lowest risk first.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut perm = vec![usize::MAX; n];
        for (rank, &item) in order.iter().enumerate() {
            if item >= n || perm[item] != usize::MAX {
                return Err(validation("order is not a permutation"));
            }
            perm[item] = rank;
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect() }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Items listed from lowest to highest risk.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.perm.len()];
        for (item, &rank) in self.perm.iter().enumerate() {
            order[rank] = item;
        }
        order
    }
}

/// Total weight of violated pairs: `Σ γ_ij 1(rank_i > rank_j)`.
pub fn ranking_cost(t: &Tournament, r: &Ranking) -> Result<f64> {
    if t.n() != r.len() {
        return Err(validation(format!("tournament has {} items, ranking has {}", t.n(), r.len())));
    }
    Ok(order_cost(t, &r.order()))
}

fn order_cost(t: &Tournament, order: &[usize]) -> f64 {
    let mut cost = 0.0;
    for (a, &lo) in order.iter().enumerate() {
        for &hi in &order[a + 1..] {
            cost += t.gamma(hi, lo);
        }
    }
    cost
}

fn tie_tol(v: f64) -> f64 {
    1e-12 * (1.0 + v.abs())
}

/// Globally optimal ranking by dynamic programming over subsets, O(2ⁿ n²).
pub fn mwfas_exact(t: &Tournament) -> Result<Ranking> {
    let n = t.n();
    if n > EXACT_MAX_N {
        return Err(Error::TooLarge(format!(
            "exact MWFAS supports n <= {EXACT_MAX_N}, got {n}; use the greedy or local-search solvers"
        )));
    }
    let full = (1usize << n) - 1;
    // placing v directly above the set S of lower-risk items violates γ(v, u) for u in S
    let place_cost = |v: usize, s: usize| -> f64 {
        let mut c = 0.0;
        let mut rest = s;
        while rest != 0 {
            let u = rest.trailing_zeros() as usize;
            c += t.gamma(v, u);
            rest &= rest - 1;
        }
        c
    };
    // best[S] = minimal cost of ranking the complement of S above S
    let mut best = vec![f64::INFINITY; full + 1];
    best[full] = 0.0;
    for s in (0..full).rev() {
        let mut b = f64::INFINITY;
        for v in 0..n {
            if s & (1 << v) == 0 {
                b = b.min(place_cost(v, s) + best[s | (1 << v)]);
            }
        }
        best[s] = b;
    }
    let mut order = Vec::with_capacity(n);
    let mut s = 0usize;
    while s != full {
        let target = best[s];
        let v = (0..n)
            .find(|&v| s & (1 << v) == 0 && place_cost(v, s) + best[s | (1 << v)] <= target + tie_tol(target))
            .expect("some extension attains the optimum");
        order.push(v);
        s |= 1 << v;
    }
    Ranking::from_order(&order)
}

/// Greedy: repeatedly give the next-lowest rank to the remaining item with the
/// largest net weight `Σ_u γ(v, u) − γ(u, v)` over remaining items, i.e. the
/// item that most clearly outlives the rest. Ties go to the smallest index.
pub fn mwfas_greedy(t: &Tournament) -> Ranking {
    let n = t.n();
    let mut net: Vec<f64> = (0..n).map(|v| (0..n).map(|u| t.gamma(v, u) - t.gamma(u, v)).sum()).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if !placed[v] && (pick == usize::MAX || net[v] > net[pick]) {
                pick = v;
            }
        }
        placed[pick] = true;
        order.push(pick);
        for u in 0..n {
            if !placed[u] {
                net[u] -= t.gamma(u, pick) - t.gamma(pick, u);
            }
        }
    }
    Ranking::from_order(&order).expect("greedy emits a permutation")
}

/// Best-improvement single-item relocation, item by item, until a full pass
/// makes no strict improvement or `max_passes` passes have run.
pub fn mwfas_local_search(t: &Tournament, start: &Ranking, max_passes: usize) -> Result<Ranking> {
    if start.len() != t.n() {
        return Err(validation("start ranking size does not match tournament"));
    }
    let n = t.n();
    let mut order = start.order();
    for _ in 0..max_passes {
        let mut improved = false;
        for item in 0..n {
            let p = order.iter().position(|&v| v == item).expect("item present");
            let mut best_delta = 0.0;
            let mut best_q = p;
            // move left: items in order[q..p] end up above `item`
            let mut delta = 0.0;
            for q in (0..p).rev() {
                let u = order[q];
                delta += t.gamma(u, item) - t.gamma(item, u);
                if delta < best_delta - tie_tol(best_delta) {
                    best_delta = delta;
                    best_q = q;
                }
            }
            // move right: items in order[p+1..=q] end up below `item`
            let mut delta = 0.0;
            for (q, &u) in order.iter().enumerate().skip(p + 1) {
                delta += t.gamma(item, u) - t.gamma(u, item);
                if delta < best_delta - tie_tol(best_delta) {
                    best_delta = delta;
                    best_q = q;
                }
            }
            if best_q != p {
                let v = order.remove(p);
                order.insert(best_q, v);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ranking::from_order(&order)
}

/// Greedy followed by local search with the default pass budget.
pub fn mwfas_greedy_ls(t: &Tournament) -> Ranking {
    let g = mwfas_greedy(t);
    mwfas_local_search(t, &g, DEFAULT_LS_PASSES).expect("sizes match")
}

/// Risk scores `score_i = rank_i`.
pub fn scores_from_ranking(r: &Ranking) -> Vec<f64> {
    r.perm().iter().map(|&k| k as f64).collect()
}
