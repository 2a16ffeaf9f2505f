//! Conditional survival-model families μ(t|x).
//!
//! Every family exposes its survival curve, density, sampler, the pairwise
//! probability `P(T > T' | x, x')` and, where one exists, a risk score that
//! induces the optimal ordering.
//!
//! Sign convention used throughout the crate: a *higher* risk score means a
//! statistically *shorter* survival, i.e. `score(x) <= score(x')` implies
//! `pairwise_prob(x, x') >= 1/2`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, validation, Error, Result};
use crate::num::{dot, logistic, normal_cdf, normal_pdf, normal_quantile, softplus};
use crate::quad::{geometric_breaks, integrate, integrate_pieces, QuadOptions};

/// Survival mass left beyond the integration horizon.
pub const TAIL_EPS: f64 = 1e-10;

/// Nested model families: A ⊊ B ⊊ C, and D = complement of C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    A,
    B,
    C,
    D,
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyTag::A => "A",
            FamilyTag::B => "B",
            FamilyTag::C => "C",
            FamilyTag::D => "D",
        };
        f.write_str(s)
    }
}

/// Noise scale of the heteroscedastic AFT model as a function of `f(x) = β·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "link", rename_all = "kebab-case")]
pub enum SigmaLink {
    /// `σ = offset + softplus(f)`; non-decreasing in `f`, bounded below by `offset`.
    SoftplusShift { offset: f64 },
}

impl Default for SigmaLink {
    fn default() -> Self {
        SigmaLink::SoftplusShift { offset: 0.5 }
    }
}

impl SigmaLink {
    pub fn sigma(&self, f: f64) -> f64 {
        match *self {
            SigmaLink::SoftplusShift { offset } => offset + softplus(f),
        }
    }

    /// Infimum of σ over all covariates.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            SigmaLink::SoftplusShift { offset } => offset,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SigmaLink::SoftplusShift { offset } if offset > 0.0 && offset.is_finite() => Ok(()),
            SigmaLink::SoftplusShift { offset } => {
                Err(validation(format!("sigma offset must be > 0, got {offset}")))
            }
        }
    }
}

/// Terms of a curved scalar exponential family
/// `μ(t|x) = b(t) exp[η(θ) τ(t) − A(θ)]`.
///
/// Implementations must keep `η` and `τ` non-decreasing so that `θ` orders
/// survival (monotone likelihood ratio); a larger `θ` then means a longer
/// survival.
pub trait CurvedExpFamily: Send + Sync + fmt::Debug {
    fn eta(&self, theta: f64) -> f64;
    fn tau(&self, t: f64) -> f64;
    fn log_base(&self, t: f64) -> f64;
    fn log_partition(&self, theta: f64) -> f64;
}

/// Shipped exponential-family instances, plus an escape hatch for custom terms.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpFamilyTerms {
    /// Exponential law with rate `e^{−θ}`: `η(θ) = −e^{−θ}`, `τ(t) = t`,
    /// `A(θ) = θ`, `b(t) = 1`.
    ExponentialRate,
    #[serde(skip)]
    Custom(Arc<dyn CurvedExpFamily>),
}

impl fmt::Debug for ExpFamilyTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpFamilyTerms::ExponentialRate => f.write_str("ExponentialRate"),
            ExpFamilyTerms::Custom(inner) => write!(f, "Custom({inner:?})"),
        }
    }
}

impl PartialEq for ExpFamilyTerms {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ExpFamilyTerms::ExponentialRate, ExpFamilyTerms::ExponentialRate) => true,
            (ExpFamilyTerms::Custom(a), ExpFamilyTerms::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl CurvedExpFamily for ExpFamilyTerms {
    fn eta(&self, theta: f64) -> f64 {
        match self {
            ExpFamilyTerms::ExponentialRate => -(-theta).exp(),
            ExpFamilyTerms::Custom(c) => c.eta(theta),
        }
    }
    fn tau(&self, t: f64) -> f64 {
        match self {
            ExpFamilyTerms::ExponentialRate => t,
            ExpFamilyTerms::Custom(c) => c.tau(t),
        }
    }
    fn log_base(&self, t: f64) -> f64 {
        match self {
            ExpFamilyTerms::ExponentialRate => 0.0,
            ExpFamilyTerms::Custom(c) => c.log_base(t),
        }
    }
    fn log_partition(&self, theta: f64) -> f64 {
        match self {
            ExpFamilyTerms::ExponentialRate => theta,
            ExpFamilyTerms::Custom(c) => c.log_partition(theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarExpFamily {
    pub beta: Vec<f64>,
    pub terms: ExpFamilyTerms,
}

impl ScalarExpFamily {
    fn log_density(&self, theta: f64, t: f64) -> f64 {
        let terms = &self.terms;
        terms.log_base(t) + terms.eta(theta) * terms.tau(t) - terms.log_partition(theta)
    }

    fn survival(&self, theta: f64, t: f64) -> Result<f64> {
        match self.terms {
            ExpFamilyTerms::ExponentialRate => Ok((-(-theta).exp() * t).exp()),
            ExpFamilyTerms::Custom(_) => {
                let head = integrate(|s| self.log_density(theta, s).exp(), 0.0, t, QuadOptions::default())?;
                Ok((1.0 - head.value).clamp(0.0, 1.0))
            }
        }
    }

    fn tail_time(&self, theta: f64, eps: f64) -> Result<f64> {
        match self.terms {
            ExpFamilyTerms::ExponentialRate => Ok(-eps.ln() * theta.exp()),
            ExpFamilyTerms::Custom(_) => {
                let mut t = 1.0;
                for _ in 0..200 {
                    if self.survival(theta, t)? < eps {
                        return Ok(t);
                    }
                    t *= 2.0;
                }
                Err(Error::Domain("exponential family tail never drops below tolerance".into()))
            }
        }
    }

    fn mean(&self, theta: f64) -> Result<f64> {
        match self.terms {
            ExpFamilyTerms::ExponentialRate => Ok(theta.exp()),
            ExpFamilyTerms::Custom(_) => {
                let hi = self.tail_time(theta, 1e-12)?;
                let r = integrate_pieces(
                    |s| self.survival(theta, s).unwrap_or(f64::NAN),
                    &geometric_breaks(1e-4 * hi, hi),
                    QuadOptions::default(),
                )?;
                Ok(r.value)
            }
        }
    }
}

/// Gaussian-jittered discrete laws, one per covariate group.
///
/// Group `g` draws an atom uniformly from `atoms[g]` and adds `N(0, jitter_sd²)`.
/// Covariates are one-hot group indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJitterCycle {
    pub atoms: Vec<Vec<f64>>,
    pub jitter_sd: f64,
}

impl DiscreteJitterCycle {
    /// Nontransitive dice A={2,2,4,4,9,9}, B={1,1,6,6,8,8}, C={3,3,5,5,7,7}:
    /// A beats B, B beats C, C beats A, each with probability 5/9.
    pub fn dice(jitter_sd: f64) -> Self {
        Self {
            atoms: vec![
                vec![2.0, 2.0, 4.0, 4.0, 9.0, 9.0],
                vec![1.0, 1.0, 6.0, 6.0, 8.0, 8.0],
                vec![3.0, 3.0, 5.0, 5.0, 7.0, 7.0],
            ],
            jitter_sd,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.atoms.len()
    }

    /// Group index encoded by a one-hot covariate vector.
    pub fn group_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.atoms.len() {
            return Err(validation(format!(
                "expected one-hot vector of length {}, got {}",
                self.atoms.len(),
                x.len()
            )));
        }
        let mut group = None;
        for (g, &v) in x.iter().enumerate() {
            if v == 1.0 {
                if group.is_some() {
                    return Err(validation("covariates are not one-hot"));
                }
                group = Some(g);
            } else if v != 0.0 {
                return Err(validation("covariates are not one-hot"));
            }
        }
        group.ok_or_else(|| validation("covariates are not one-hot"))
    }

    pub fn one_hot(&self, group: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.atoms.len()];
        x[group] = 1.0;
        x
    }

    /// `P(T_g > T_h)` by exact enumeration over atom pairs.
    pub fn group_pair_prob(&self, g: usize, h: usize) -> f64 {
        let scale = self.jitter_sd * std::f64::consts::SQRT_2;
        let (a, b) = (&self.atoms[g], &self.atoms[h]);
        let mut acc = 0.0;
        for &ta in a {
            for &tb in b {
                acc += normal_cdf((ta - tb) / scale);
            }
        }
        acc / (a.len() * b.len()) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.atoms.len() < 2 {
            return Err(validation("jitter cycle needs at least two groups"));
        }
        if !(self.jitter_sd > 0.0 && self.jitter_sd.is_finite()) {
            return Err(validation("jitter_sd must be > 0"));
        }
        for (g, list) in self.atoms.iter().enumerate() {
            if list.is_empty() {
                return Err(validation(format!("group {g} has no atoms")));
            }
            // keeps the negative-time mass below ~1e-15 so the untruncated formulas are exact
            if list.iter().any(|&a| !(a >= 8.0 * self.jitter_sd) || !a.is_finite()) {
                return Err(validation(format!(
                    "group {g}: atoms must be finite and at least 8 jitter sds above zero"
                )));
            }
        }
        Ok(())
    }
}

/// A conditional law of the time-to-event given covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurvivalModel {
    /// `S(t|x) = exp(−λ0 t e^{β·x})`.
    CoxPh { beta: Vec<f64>, baseline_rate: f64 },
    /// `log T = β·x + s ε`, `ε ~ N(0, 1)`.
    Aft { beta: Vec<f64>, noise_sd: f64 },
    /// `log T = β·x + σ(x) ε` with σ non-decreasing in `β·x`.
    AftH { beta: Vec<f64>, sigma: SigmaLink },
    /// `S(t|x) = exp(−t^{k(x)})`, `k(x) = exp(β·x)`.
    WeibullShape { beta: Vec<f64> },
    ExpFamily(ScalarExpFamily),
    JitterCycle(DiscreteJitterCycle),
}

fn check_beta(beta: &[f64]) -> Result<()> {
    if beta.is_empty() {
        return Err(validation("beta must be non-empty"));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(validation("beta entries must be finite"));
    }
    Ok(())
}

impl SurvivalModel {
    pub fn cox_ph(beta: Vec<f64>, baseline_rate: f64) -> Result<Self> {
        let m = SurvivalModel::CoxPh { beta, baseline_rate };
        m.validate()?;
        Ok(m)
    }

    pub fn aft(beta: Vec<f64>, noise_sd: f64) -> Result<Self> {
        let m = SurvivalModel::Aft { beta, noise_sd };
        m.validate()?;
        Ok(m)
    }

    pub fn aft_h(beta: Vec<f64>, sigma: SigmaLink) -> Result<Self> {
        let m = SurvivalModel::AftH { beta, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn weibull_shape(beta: Vec<f64>) -> Result<Self> {
        let m = SurvivalModel::WeibullShape { beta };
        m.validate()?;
        Ok(m)
    }

    pub fn exp_family(beta: Vec<f64>, terms: ExpFamilyTerms) -> Result<Self> {
        let m = SurvivalModel::ExpFamily(ScalarExpFamily { beta, terms });
        m.validate()?;
        Ok(m)
    }

    pub fn jitter_cycle(cycle: DiscreteJitterCycle) -> Result<Self> {
        let m = SurvivalModel::JitterCycle(cycle);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SurvivalModel::CoxPh { beta, baseline_rate } => {
                check_beta(beta)?;
                if !(*baseline_rate > 0.0 && baseline_rate.is_finite()) {
                    return Err(validation("baseline_rate must be > 0"));
                }
                Ok(())
            }
            SurvivalModel::Aft { beta, noise_sd } => {
                check_beta(beta)?;
                if !(*noise_sd > 0.0 && noise_sd.is_finite()) {
                    return Err(validation("noise_sd must be > 0"));
                }
                Ok(())
            }
            SurvivalModel::AftH { beta, sigma } => {
                check_beta(beta)?;
                sigma.validate()
            }
            SurvivalModel::WeibullShape { beta } => check_beta(beta),
            SurvivalModel::ExpFamily(ef) => check_beta(&ef.beta),
            SurvivalModel::JitterCycle(c) => c.validate(),
        }
    }

    pub fn family(&self) -> FamilyTag {
        match self {
            SurvivalModel::CoxPh { .. } | SurvivalModel::Aft { .. } => FamilyTag::A,
            SurvivalModel::AftH { .. } => FamilyTag::B,
            SurvivalModel::WeibullShape { .. } | SurvivalModel::ExpFamily(_) => FamilyTag::C,
            SurvivalModel::JitterCycle(_) => FamilyTag::D,
        }
    }

    /// Covariate dimension expected by the model.
    pub fn dim(&self) -> usize {
        match self {
            SurvivalModel::CoxPh { beta, .. }
            | SurvivalModel::Aft { beta, .. }
            | SurvivalModel::AftH { beta, .. }
            | SurvivalModel::WeibullShape { beta } => beta.len(),
            SurvivalModel::ExpFamily(ef) => ef.beta.len(),
            SurvivalModel::JitterCycle(c) => c.n_groups(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurvivalModel::CoxPh { .. } => "cox-ph",
            SurvivalModel::Aft { .. } => "aft",
            SurvivalModel::AftH { .. } => "aft-h",
            SurvivalModel::WeibullShape { .. } => "weibull-shape",
            SurvivalModel::ExpFamily(_) => "exp-family",
            SurvivalModel::JitterCycle(_) => "jitter-cycle",
        }
    }

    /// Linear index `β·x` (θ(x) for the exponential family).
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        let beta = match self {
            SurvivalModel::CoxPh { beta, .. }
            | SurvivalModel::Aft { beta, .. }
            | SurvivalModel::AftH { beta, .. }
            | SurvivalModel::WeibullShape { beta } => beta,
            SurvivalModel::ExpFamily(ef) => &ef.beta,
            SurvivalModel::JitterCycle(_) => {
                return Err(Error::Unsupported("jitter cycle has no linear predictor".into()))
            }
        };
        if beta.len() != x.len() {
            return Err(validation(format!(
                "covariate dimension {} does not match model dimension {}",
                x.len(),
                beta.len()
            )));
        }
        let f = dot(beta, x);
        if !f.is_finite() {
            return Err(Error::NonFinite("linear predictor".into()));
        }
        Ok(f)
    }

    /// Weibull shape `k(x) = exp(β·x)`.
    pub fn weibull_k(&self, x: &[f64]) -> Result<f64> {
        match self {
            SurvivalModel::WeibullShape { .. } => Ok(self.linear_predictor(x)?.exp()),
            _ => Err(Error::Unsupported("weibull_k on a non-Weibull model".into())),
        }
    }

    /// Per-covariate noise scale of the (heteroscedastic) AFT models.
    pub fn aft_sigma(&self, x: &[f64]) -> Result<f64> {
        match self {
            SurvivalModel::Aft { noise_sd, .. } => Ok(*noise_sd),
            SurvivalModel::AftH { sigma, .. } => Ok(sigma.sigma(self.linear_predictor(x)?)),
            _ => Err(Error::Unsupported("aft_sigma on a non-AFT model".into())),
        }
    }

    /// `S(t|x) = P(T > t | X = x)`.
    pub fn survival_at(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("survival_at requires t >= 0, got {t}")));
        }
        if let SurvivalModel::JitterCycle(c) = self {
            let g = c.group_of(x)?;
            let atoms = &c.atoms[g];
            let s = atoms.iter().map(|a| normal_cdf((a - t) / c.jitter_sd)).sum::<f64>() / atoms.len() as f64;
            return Ok(s);
        }
        let f = self.linear_predictor(x)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        let s = match self {
            SurvivalModel::CoxPh { baseline_rate, .. } => (-baseline_rate * t * f.exp()).exp(),
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => {
                let s = self.aft_sigma(x)?;
                normal_cdf(-(t.ln() - f) / s)
            }
            SurvivalModel::WeibullShape { .. } => (-t.powf(f.exp())).exp(),
            SurvivalModel::ExpFamily(ef) => ef.survival(f, t)?,
            SurvivalModel::JitterCycle(_) => unreachable!(),
        };
        Ok(s)
    }

    /// Conditional density `μ(t|x)`.
    pub fn density_at(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(domain(format!("density_at requires t > 0, got {t}")));
        }
        if let SurvivalModel::JitterCycle(c) = self {
            let g = c.group_of(x)?;
            let atoms = &c.atoms[g];
            let d = atoms.iter().map(|a| normal_pdf((t - a) / c.jitter_sd)).sum::<f64>()
                / (atoms.len() as f64 * c.jitter_sd);
            return Ok(d);
        }
        let f = self.linear_predictor(x)?;
        let d = match self {
            SurvivalModel::CoxPh { baseline_rate, .. } => {
                let rate = baseline_rate * f.exp();
                rate * (-rate * t).exp()
            }
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => {
                let s = self.aft_sigma(x)?;
                normal_pdf((t.ln() - f) / s) / (s * t)
            }
            SurvivalModel::WeibullShape { .. } => {
                let k = f.exp();
                let tk = t.powf(k);
                k * tk / t * (-tk).exp()
            }
            SurvivalModel::ExpFamily(ef) => ef.log_density(f, t).exp(),
            SurvivalModel::JitterCycle(_) => unreachable!(),
        };
        Ok(d)
    }

    /// A time `t` with `S(t|x) < eps`.
    pub fn tail_time(&self, x: &[f64], eps: f64) -> Result<f64> {
        let z = -normal_quantile(eps);
        match self {
            SurvivalModel::CoxPh { baseline_rate, .. } => {
                Ok(-eps.ln() / (baseline_rate * self.linear_predictor(x)?.exp()))
            }
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => {
                Ok((self.linear_predictor(x)? + self.aft_sigma(x)? * z).exp())
            }
            SurvivalModel::WeibullShape { .. } => Ok((-eps.ln()).powf(1.0 / self.weibull_k(x)?)),
            SurvivalModel::ExpFamily(ef) => ef.tail_time(self.linear_predictor(x)?, eps),
            SurvivalModel::JitterCycle(c) => {
                let g = c.group_of(x)?;
                let top = c.atoms[g].iter().cloned().fold(f64::MIN, f64::max);
                Ok(top + z * c.jitter_sd)
            }
        }
    }

    /// Draw one time-to-event from `T | X = x`.
    pub fn sample_event<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let t = match self {
            SurvivalModel::CoxPh { baseline_rate, .. } => {
                let e: f64 = Exp1.sample(rng);
                e / (baseline_rate * self.linear_predictor(x)?.exp())
            }
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => {
                let z: f64 = StandardNormal.sample(rng);
                (self.linear_predictor(x)? + self.aft_sigma(x)? * z).exp()
            }
            SurvivalModel::WeibullShape { .. } => {
                let e: f64 = Exp1.sample(rng);
                e.powf(1.0 / self.weibull_k(x)?)
            }
            SurvivalModel::ExpFamily(ef) => {
                let theta = self.linear_predictor(x)?;
                match ef.terms {
                    ExpFamilyTerms::ExponentialRate => {
                        let e: f64 = Exp1.sample(rng);
                        e * theta.exp()
                    }
                    ExpFamilyTerms::Custom(_) => {
                        let u: f64 = rng.random();
                        invert_survival(|t| ef.survival(theta, t), u, ef.tail_time(theta, 1e-14)?)?
                    }
                }
            }
            SurvivalModel::JitterCycle(c) => {
                let g = c.group_of(x)?;
                let atoms = &c.atoms[g];
                loop {
                    let a = atoms[rng.random_range(0..atoms.len())];
                    let z: f64 = StandardNormal.sample(rng);
                    let t = a + c.jitter_sd * z;
                    if t > 0.0 {
                        break t;
                    }
                }
            }
        };
        if !(t.is_finite() && t > 0.0) {
            // underflow/overflow at extreme linear predictors
            return Ok(t.clamp(f64::MIN_POSITIVE, f64::MAX));
        }
        Ok(t)
    }

    /// `P(T > T' | x, x2)` with `T ~ μ(·|x)` and `T' ~ μ(·|x2)` independent.
    pub fn pairwise_prob(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != x2.len() {
            return Err(validation("pairwise_prob: covariate dimensions differ"));
        }
        match self {
            SurvivalModel::CoxPh { .. } => {
                let (f, f2) = (self.linear_predictor(x)?, self.linear_predictor(x2)?);
                Ok(logistic(f2 - f))
            }
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => {
                let (f, f2) = (self.linear_predictor(x)?, self.linear_predictor(x2)?);
                let (s, s2) = (self.aft_sigma(x)?, self.aft_sigma(x2)?);
                Ok(normal_cdf((f - f2) / (s * s + s2 * s2).sqrt()))
            }
            SurvivalModel::WeibullShape { .. } => {
                let (f, f2) = (self.linear_predictor(x)?, self.linear_predictor(x2)?);
                if f == f2 {
                    return Ok(0.5);
                }
                // P(T > T') = I(k/k'), evaluated on the branch with ratio >= 1
                let log_ratio = f - f2;
                if log_ratio >= 0.0 {
                    weibull_pair_integral(log_ratio.exp())
                } else {
                    Ok(1.0 - weibull_pair_integral((-log_ratio).exp())?)
                }
            }
            SurvivalModel::ExpFamily(ef) => {
                let (th, th2) = (self.linear_predictor(x)?, self.linear_predictor(x2)?);
                if th == th2 {
                    return Ok(0.5);
                }
                // E_{T_b}[S(T_b | a)] with a = min θ, b = max θ
                let (a, b, flip) = if th <= th2 { (th, th2, false) } else { (th2, th, true) };
                let (ta, tb) = (ef.tail_time(a, TAIL_EPS)?, ef.tail_time(b, TAIL_EPS)?);
                let breaks = geometric_breaks(1e-4 * ta.min(tb), ta.max(tb));
                let r = integrate_pieces(
                    |t| {
                        if t <= 0.0 {
                            return 0.0;
                        }
                        ef.log_density(b, t).exp() * ef.survival(a, t).unwrap_or(f64::NAN)
                    },
                    &breaks,
                    QuadOptions::default(),
                )?;
                // r = P(T_a > T_b), where T_a has the smaller θ (shorter-lived side)
                Ok(if flip { 1.0 - r.value } else { r.value })
            }
            SurvivalModel::JitterCycle(c) => {
                let (g, h) = (c.group_of(x)?, c.group_of(x2)?);
                if g == h {
                    return Ok(0.5);
                }
                if g < h {
                    Ok(c.group_pair_prob(g, h))
                } else {
                    Ok(1.0 - c.group_pair_prob(h, g))
                }
            }
        }
    }

    /// `E[T | X = x]`.
    pub fn conditional_expectation(&self, x: &[f64]) -> Result<f64> {
        match self {
            SurvivalModel::CoxPh { baseline_rate, .. } => {
                Ok((-self.linear_predictor(x)?).exp() / baseline_rate)
            }
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => {
                let s = self.aft_sigma(x)?;
                Ok((self.linear_predictor(x)? + 0.5 * s * s).exp())
            }
            SurvivalModel::WeibullShape { .. } => Ok(gamma(1.0 + 1.0 / self.weibull_k(x)?)),
            SurvivalModel::ExpFamily(ef) => ef.mean(self.linear_predictor(x)?),
            SurvivalModel::JitterCycle(c) => {
                let atoms = &c.atoms[c.group_of(x)?];
                Ok(atoms.iter().sum::<f64>() / atoms.len() as f64)
            }
        }
    }

    /// Risk score inducing the optimal ordering (higher = shorter survival).
    pub fn optimal_ordering_score(&self, x: &[f64]) -> Result<f64> {
        match self {
            SurvivalModel::CoxPh { .. } => self.linear_predictor(x),
            SurvivalModel::Aft { .. } | SurvivalModel::AftH { .. } => Ok(-self.linear_predictor(x)?),
            SurvivalModel::WeibullShape { .. } => Ok(-self.weibull_k(x)?),
            SurvivalModel::ExpFamily(_) => Ok(-self.linear_predictor(x)?),
            SurvivalModel::JitterCycle(_) => Err(Error::NoOptimalOrdering),
        }
    }

    /// Matrix `p[i][j] = P(T_i > T_j)` over a cohort.
    pub fn pair_prob_matrix(&self, cohort: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = cohort.len();
        let mut p = vec![vec![0.5; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.pairwise_prob(&cohort[i], &cohort[j])?;
                p[i][j] = v;
                p[j][i] = 1.0 - v;
            }
        }
        Ok(p)
    }
}

/// `I(r) = ∫₀^∞ exp(−u − u^r) du`, which equals `P(T' < T)` for Weibull laws
/// with shapes `k` (for `T`) and `k'` (for `T'`) and `r = k / k'`.
///
/// `I(r) >= 1/2` iff `r >= 1`, and `I(r) + I(1/r) = 1`.
pub fn weibull_pair_integral(r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(domain(format!("weibull_pair_integral requires r > 0, got {r}")));
    }
    // e^{-40} is far below the 1e-10 tail budget. For large r the factor
    // e^{-u^r} drops from 1 to 0 inside [1 - 8/r, 1 + 8/r]; break there so no
    // panel can miss the transition.
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 4000 };
    let mut breaks = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0];
    if r > 8.0 {
        breaks.extend([1.0 - 8.0 / r, 1.0 + 8.0 / r]);
    }
    breaks.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(|u: f64| (-u - u.powf(r)).exp(), w[0], w[1], opts)?.value;
    }
    Ok(total)
}

/// Solve `S(t) = u` for a non-increasing survival curve by bisection.
fn invert_survival<F: Fn(f64) -> Result<f64>>(s: F, u: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s(mid)? > u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
