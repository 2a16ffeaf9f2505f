//! Training losses for linear risk models and the pairwise-probability model.
//!
//! Every loss returns `(value, gradient)` with respect to the flattened
//! parameter vector `[β₁, ..., β_d, intercept]` (see
//! [`LinearRiskModel::params`]). Losses that are invariant to the intercept
//! report a zero gradient for it.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::censoring::{ipcw_weight, CensoringSurvival};
use crate::data::Dataset;
use crate::error::{domain, validation, Error, Result};
use crate::num::{dot, logistic, normal_cdf, normal_pdf, softplus};
use crate::optim::{minimize, OptConfig, OptReport};

/// Default cap on the number of comparable pairs used by pairwise losses.
pub const DEFAULT_PAIR_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRiskModel {
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl LinearRiskModel {
    pub fn zeros(d: usize) -> Self {
        Self { beta: vec![0.0; d], intercept: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// `f(x) = β·x + intercept`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.beta, x) + self.intercept
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.beta.clone();
        p.push(self.intercept);
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        let (beta, b) = p.split_at(p.len() - 1);
        Self { beta: beta.to_vec(), intercept: b[0] }
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if self.beta.len() != data.dim() {
            return Err(validation(format!(
                "model dimension {} does not match data dimension {}",
                self.beta.len(),
                data.dim()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) || !self.intercept.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        if data.is_empty() {
            return Err(validation("empty dataset"));
        }
        Ok(())
    }
}

/// Convex regularisers `Ω` for the Fenchel-Young loss `S(v, t) = Ω*(v) − v t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FenchelRegularizer {
    /// `Ω(u) = u²/2` on ℝ; `Ω*(v) = v²/2`.
    Squared,
    /// `Ω(u) = u log u − u` on ℝ₊; `Ω*(v) = e^v`.
    Entropy,
}

impl FenchelRegularizer {
    pub fn omega(&self, u: f64) -> f64 {
        match self {
            FenchelRegularizer::Squared => 0.5 * u * u,
            FenchelRegularizer::Entropy if u == 0.0 => 0.0,
            FenchelRegularizer::Entropy => u * u.ln() - u,
        }
    }

    pub fn omega_prime(&self, u: f64) -> f64 {
        match self {
            FenchelRegularizer::Squared => u,
            FenchelRegularizer::Entropy => u.ln(),
        }
    }

    pub fn omega_conj(&self, v: f64) -> f64 {
        match self {
            FenchelRegularizer::Squared => 0.5 * v * v,
            FenchelRegularizer::Entropy => v.exp(),
        }
    }

    pub fn omega_conj_prime(&self, v: f64) -> f64 {
        match self {
            FenchelRegularizer::Squared => v,
            FenchelRegularizer::Entropy => v.exp(),
        }
    }

    /// Lower bound `μ` on `Ω''` over the whole domain, if one exists.
    /// `Ω(u) = u log u − u` has `Ω''(u) = 1/u → 0`, so it has none.
    pub fn strong_convexity(&self) -> Option<f64> {
        match self {
            FenchelRegularizer::Squared => Some(1.0),
            FenchelRegularizer::Entropy => None,
        }
    }

    /// `γ = 1/√μ`.
    pub fn gamma(&self) -> Option<f64> {
        self.strong_convexity().map(|mu| 1.0 / mu.sqrt())
    }

    /// Bregman divergence `D(u, v) = Ω*(v) − v u + Ω(u)`, i.e. the excess
    /// Fenchel-Young loss of predicting `v` when the target mean is `u`.
    pub fn excess_loss(&self, u: f64, v: f64) -> f64 {
        self.omega_conj(v) - v * u + self.omega(u)
    }
}

/// Fenchel-Young surrogate `(1/n) Σ δ_i [Ω*(f_i) − f_i u_i] / G(u_i)`.
pub fn fy_loss_grad<G: CensoringSurvival + ?Sized>(
    reg: FenchelRegularizer,
    model: &LinearRiskModel,
    data: &Dataset,
    curve: &G,
) -> Result<(f64, Vec<f64>)> {
    model.check(data)?;
    let d = data.dim();
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for i in 0..data.len() {
        let w = ipcw_weight(curve, data.u()[i], data.delta()[i], 1);
        if w == 0.0 {
            continue;
        }
        let x = data.row(i);
        let u = data.u()[i];
        let f = model.predict(x);
        loss += w * (reg.omega_conj(f) - f * u);
        let c = w * (reg.omega_conj_prime(f) - u);
        for k in 0..d {
            grad[k] += c * x[k];
        }
        grad[d] += c;
    }
    finish(loss / n, grad.into_iter().map(|g| g / n).collect())
}

fn finish(loss: f64, grad: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss or gradient".into()));
    }
    Ok((loss, grad))
}

/// Parametric likelihoods for the maximum-likelihood loss, each indexed by
/// `f(x) = β·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MleFamily {
    /// Exponential proportional hazards with rate `e^f`.
    ExpPh,
    /// Unit-scale Weibull with shape `k = e^f`.
    Weibull,
    /// `log T ~ N(f, sd²)` with a fixed `sd`.
    LogNormalAft { sd: f64 },
}

impl MleFamily {
    /// Sign turning `f` into a risk score (higher = shorter survival).
    pub fn risk_sign(&self) -> f64 {
        match self {
            MleFamily::ExpPh => 1.0,
            MleFamily::Weibull | MleFamily::LogNormalAft { .. } => -1.0,
        }
    }
}

/// `log Φ(−z)`, accurate far into the upper tail.
fn log_normal_sf(z: f64) -> f64 {
    if z < 30.0 {
        normal_cdf(-z).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - (z * (2.0 * std::f64::consts::PI).sqrt()).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Inverse Mills ratio `φ(z) / Φ(−z)`.
fn inverse_mills(z: f64) -> f64 {
    if z < 30.0 {
        normal_pdf(z) / normal_cdf(-z)
    } else {
        let z2 = z * z;
        z + 1.0 / z - 2.0 / (z * z2)
    }
}

/// Negative mean log-likelihood `−(1/n) Σ [δ log μ_f(u|x) + (1−δ) log S_f(u|x)]`.
pub fn mle_loss_grad(family: MleFamily, model: &LinearRiskModel, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    model.check(data)?;
    if let MleFamily::LogNormalAft { sd } = family {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(validation("log-normal sd must be > 0"));
        }
    }
    let d = data.dim();
    let n = data.len() as f64;
    let mut ll = 0.0;
    let mut grad = vec![0.0; d + 1];
    for i in 0..data.len() {
        let (x, u, event) = (data.row(i), data.u()[i], data.delta()[i]);
        if !(u > 0.0) {
            return Err(domain(format!("observed time must be > 0, got {u}")));
        }
        let f = model.predict(x);
        let ev = if event { 1.0 } else { 0.0 };
        // (log-likelihood term, its derivative in f)
        let (l, dl) = match family {
            MleFamily::ExpPh => {
                let h = f.exp() * u;
                (ev * f - h, ev - h)
            }
            MleFamily::Weibull => {
                let k = f.exp();
                let lu = u.ln();
                let uk = (k * lu).exp();
                (ev * (f + (k - 1.0) * lu) - uk, ev * (1.0 + k * lu) - uk * k * lu)
            }
            MleFamily::LogNormalAft { sd } => {
                let z = (u.ln() - f) / sd;
                if event {
                    (normal_pdf(z).ln() - sd.ln() - u.ln(), z / sd)
                } else {
                    (log_normal_sf(z), inverse_mills(z) / sd)
                }
            }
        };
        ll += l;
        for k in 0..d {
            grad[k] -= dl * x[k];
        }
        grad[d] -= dl;
    }
    finish(-ll / n, grad.into_iter().map(|g| g / n).collect())
}

/// Negative mean Cox partial log-likelihood with Breslow ties:
/// `−(1/n) Σ_{δ_i=1} [η_i − log Σ_{u_j ≥ u_i} e^{η_j}]`, `η = β·x`.
pub fn cox_partial_loss_grad(model: &LinearRiskModel, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    model.check(data)?;
    if data.n_events() == 0 {
        return Err(validation("Cox partial likelihood needs at least one event"));
    }
    let d = data.dim();
    let n = data.len();
    let eta: Vec<f64> = (0..n).map(|i| dot(&model.beta, data.row(i))).collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let u = data.u();
    let mut order: Vec<usize> = (0..n).collect();
    // latest first, so risk sets grow as we sweep
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]));

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; d];
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    let mut pos = 0;
    while pos < n {
        let t = u[order[pos]];
        let mut end = pos;
        while end < n && u[order[end]] == t {
            let i = order[end];
            let w = (eta[i] - shift).exp();
            s0 += w;
            for (acc, xv) in s1.iter_mut().zip(data.row(i)) {
                *acc += w * xv;
            }
            end += 1;
        }
        let log_s0 = s0.ln() + shift;
        for &i in &order[pos..end] {
            if data.delta()[i] {
                loss -= eta[i] - log_s0;
                for (k, xv) in data.row(i).iter().enumerate() {
                    grad[k] -= xv - s1[k] / s0;
                }
            }
        }
        pos = end;
    }
    let nf = n as f64;
    finish(loss / nf, grad.into_iter().map(|g| g / nf).collect())
}

/// Comparable pairs `(i, j)` with `δ_j = 1`, `u_j < u_i` and weight
/// `δ_j / G(u_j)²`; `j` is the earlier observed event.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparablePairs {
    pub i: Vec<u32>,
    pub j: Vec<u32>,
    pub w: Vec<f64>,
    /// Number of comparable pairs before subsampling.
    pub total: u64,
}

impl ComparablePairs {
    /// Enumerate all comparable pairs, or a uniform subsample of `cap` of them.
    pub fn build<G: CensoringSurvival + ?Sized, R: Rng + ?Sized>(
        data: &Dataset,
        curve: &G,
        cap: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = data.len();
        if n > u32::MAX as usize {
            return Err(Error::TooLarge("dataset too large for pair indexing".into()));
        }
        let u = data.u();
        let mut sorted: Vec<usize> = (0..n).collect();
        sorted.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
        // for each event j (in sorted order): first sorted position with u > u_j, and its count
        let mut events = Vec::new();
        let mut counts = Vec::new();
        for (p, &j) in sorted.iter().enumerate() {
            if !data.delta()[j] {
                continue;
            }
            let start = p + sorted[p..].partition_point(|&k| u[k] <= u[j]);
            if start < n {
                events.push((j, start));
                counts.push((n - start) as u64);
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(validation("no comparable pairs"));
        }
        let mut out = ComparablePairs { i: Vec::new(), j: Vec::new(), w: Vec::new(), total };
        let mut push = |j: usize, i: usize| {
            out.i.push(i as u32);
            out.j.push(j as u32);
            out.w.push(ipcw_weight(curve, u[j], true, 2));
        };
        if total <= cap as u64 {
            for &(j, start) in &events {
                for &i in &sorted[start..] {
                    push(j, i);
                }
            }
        } else {
            if total > usize::MAX as u64 {
                return Err(Error::TooLarge("too many comparable pairs".into()));
            }
            let mut picks = index::sample(rng, total as usize, cap).into_vec();
            picks.sort_unstable();
            let mut offsets = Vec::with_capacity(counts.len() + 1);
            let mut acc = 0u64;
            offsets.push(0u64);
            for c in &counts {
                acc += c;
                offsets.push(acc);
            }
            let mut e = 0;
            for k in picks {
                let k = k as u64;
                while offsets[e + 1] <= k {
                    e += 1;
                }
                let (j, start) = events[e];
                push(j, sorted[start + (k - offsets[e]) as usize]);
            }
        }
        if out.w.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("pair weights (censoring survival reached zero)".into()));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Smoothed C-index loss `−Σ w_ij logistic((f_j − f_i)/σ) / Σ w_ij` over comparable pairs.
pub fn smooth_c_loss_grad(
    model: &LinearRiskModel,
    data: &Dataset,
    pairs: &ComparablePairs,
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    model.check(data)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(validation(format!("sigma must be > 0, got {sigma}")));
    }
    if pairs.is_empty() {
        return Err(validation("no comparable pairs"));
    }
    let f: Vec<f64> = (0..data.len()).map(|k| dot(&model.beta, data.row(k))).collect();
    let wsum = pairs.total_weight();
    let mut coef = vec![0.0; data.len()];
    let mut acc = 0.0;
    for p in 0..pairs.len() {
        let (i, j, w) = (pairs.i[p] as usize, pairs.j[p] as usize, pairs.w[p]);
        let s = logistic((f[j] - f[i]) / sigma);
        acc += w * s;
        let c = w * s * (1.0 - s) / sigma;
        coef[j] += c;
        coef[i] -= c;
    }
    let d = data.dim();
    let mut grad = vec![0.0; d + 1];
    for (k, &c) in coef.iter().enumerate() {
        if c != 0.0 {
            for (g, xv) in grad.iter_mut().zip(data.row(k)) {
                *g -= c * xv;
            }
        }
    }
    finish(-acc / wsum, grad.into_iter().map(|g| g / wsum).collect())
}

/// Result of fitting a linear risk model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub model: LinearRiskModel,
    pub loss: f64,
    pub report: OptReport,
}

fn fit_linear<F>(d: usize, opt: &OptConfig, loss: F) -> Result<LinearFit>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut loss = loss;
    let r = minimize(|p| loss(p), d + 1, opt)?;
    Ok(LinearFit { model: LinearRiskModel::from_params(&r.beta), loss: r.loss, report: r.report })
}

pub fn fit_fy<G: CensoringSurvival + ?Sized>(
    reg: FenchelRegularizer,
    data: &Dataset,
    curve: &G,
    opt: &OptConfig,
) -> Result<LinearFit> {
    fit_linear(data.dim(), opt, |p| fy_loss_grad(reg, &LinearRiskModel::from_params(p), data, curve))
}

pub fn fit_mle(family: MleFamily, data: &Dataset, opt: &OptConfig) -> Result<LinearFit> {
    fit_linear(data.dim(), opt, |p| mle_loss_grad(family, &LinearRiskModel::from_params(p), data))
}

pub fn fit_cox(data: &Dataset, opt: &OptConfig) -> Result<LinearFit> {
    fit_linear(data.dim(), opt, |p| cox_partial_loss_grad(&LinearRiskModel::from_params(p), data))
}

/// Number of starting points tried by [`fit_smooth_c`].
pub const SMOOTH_C_STARTS: usize = 5;

/// Multi-start fit of the smoothed C-index; keeps the start with the lowest loss.
///
/// Start 0 is the configured init (zeros by default); the others are standard
/// normal draws from a stream seeded by `seed`.
pub fn fit_smooth_c(data: &Dataset, pairs: &ComparablePairs, sigma: f64, opt: &OptConfig, seed: u64) -> Result<LinearFit> {
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LinearFit> = None;
    for s in 0..SMOOTH_C_STARTS {
        let cfg = if s == 0 {
            opt.clone()
        } else {
            let mut init: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            init.push(0.0);
            opt.with_init(init)
        };
        let fit = fit_linear(d, &cfg, |p| smooth_c_loss_grad(&LinearRiskModel::from_params(p), data, pairs, sigma))?;
        if best.as_ref().is_none_or(|b| fit.loss < b.loss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Logistic pairwise model `h(x, x') = logistic(g(x) − g(x'))` with
/// `g(x) = w₁·x + w₂·(x − m)²` (squares taken elementwise).
///
/// This is logistic regression on the antisymmetric pair features
/// `φ(x, x') = [x − x', (x − m)² − (x' − m)²]` without intercept, so
/// `h(x, x') + h(x', x) = 1` and `h(x, x) = 1/2` hold exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseModel {
    /// Length `2d`: linear weights then quadratic weights.
    pub weights: Vec<f64>,
    /// Centre `m` of the quadratic features (training covariate mean).
    pub center: Vec<f64>,
    /// All training pairs were ordered correctly, so the unpenalised fit
    /// has no finite optimum and the weights are only a direction.
    pub separable: bool,
}

impl PairwiseModel {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        pair_point_features(x, &self.center)
    }

    /// `g(x)`; pairwise logits are differences of this potential.
    pub fn potential(&self, x: &[f64]) -> f64 {
        dot(&self.weights, &self.features(x))
    }

    /// The antisymmetric pair feature vector `φ(x, x')`.
    pub fn pair_features(&self, x: &[f64], x2: &[f64]) -> Vec<f64> {
        self.features(x).iter().zip(self.features(x2)).map(|(a, b)| a - b).collect()
    }

    /// Estimated `P(T > T' | x, x2)`.
    pub fn h(&self, x: &[f64], x2: &[f64]) -> f64 {
        logistic(dot(&self.weights, &self.pair_features(x, x2)))
    }
}

fn pair_point_features(x: &[f64], center: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.extend(x.iter().zip(center).map(|(a, m)| (a - m) * (a - m)));
    v
}

/// Logistic loss of one labelled pair with logit `z`: label `true` means "first outlives second".
pub fn pair_logistic_loss(z: f64, label: bool) -> f64 {
    if label {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Weighted logistic loss of [`PairwiseModel`] weights over comparable pairs
/// (each labelled "the later observation outlives the earlier event").
pub fn pairwise_loss_grad(weights: &[f64], features: &[Vec<f64>], pairs: &ComparablePairs) -> Result<(f64, Vec<f64>)> {
    let g: Vec<f64> = features.iter().map(|f| dot(weights, f)).collect();
    let wsum = pairs.total_weight();
    let mut coef = vec![0.0; features.len()];
    let mut acc = 0.0;
    for p in 0..pairs.len() {
        let (i, j, w) = (pairs.i[p] as usize, pairs.j[p] as usize, pairs.w[p]);
        let z = g[i] - g[j];
        acc += w * pair_logistic_loss(z, true);
        let c = -w * logistic(-z);
        coef[i] += c;
        coef[j] -= c;
    }
    let mut grad = vec![0.0; weights.len()];
    for (k, &c) in coef.iter().enumerate() {
        if c != 0.0 {
            for (gr, fv) in grad.iter_mut().zip(&features[k]) {
                *gr += c * fv;
            }
        }
    }
    finish(acc / wsum, grad.into_iter().map(|v| v / wsum).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseFit {
    pub model: PairwiseModel,
    pub loss: f64,
    pub report: OptReport,
    pub n_pairs: usize,
}

/// Weighted logistic regression of `1(T_i > T_j)` on comparable pairs.
pub fn fit_pairwise_model(data: &Dataset, pairs: &ComparablePairs, opt: &OptConfig) -> Result<PairwiseFit> {
    if pairs.is_empty() {
        return Err(validation("no comparable pairs"));
    }
    let d = data.dim();
    let n = data.len() as f64;
    let mut center = vec![0.0; d];
    for x in data.rows() {
        for (c, v) in center.iter_mut().zip(x) {
            *c += v / n;
        }
    }
    let features: Vec<Vec<f64>> = data.rows().map(|x| pair_point_features(x, &center)).collect();
    let r = minimize(|w| pairwise_loss_grad(w, &features, pairs), 2 * d, opt)?;
    let g: Vec<f64> = features.iter().map(|f| dot(&r.beta, f)).collect();
    let separable = (0..pairs.len()).all(|p| g[pairs.i[p] as usize] > g[pairs.j[p] as usize]);
    Ok(PairwiseFit {
        model: PairwiseModel { weights: r.beta, center, separable },
        loss: r.loss,
        report: r.report,
        n_pairs: pairs.len(),
    })
}
