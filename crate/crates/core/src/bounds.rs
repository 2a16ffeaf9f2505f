//! Monte-Carlo verification of the excess-risk bounds.
//!
//! * Pointwise: `|2 P(T > T' | x, x') − 1| <= L |f*(x) − f*(x')|`.
//! * C-index excess vs. score error: `C(f*) − C(f) <= 2L E|f(X) − f*(X)|`.
//! * C-index excess vs. surrogate excess:
//!   `C* − C(f) <= 4Lγ √(R(f) − R*)`, where `R` is the Fenchel-Young risk.
//!
//! Both sides of each inequality are estimated on one common sample of
//! covariate pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{validation, Error, Result};
use crate::estimators::FenchelRegularizer;
use crate::metrics::{pair_concordance, CovariateLaw, CovariateSampler, PairSample};
use crate::model::{ExpFamilyTerms, FamilyTag, SigmaLink, SurvivalModel};
use crate::num::mean_and_se;

/// Headroom factor applied to empirically estimated Lipschitz constants.
pub const L_HEADROOM: f64 = 1.1;
/// Pairs used when a Lipschitz constant has to be estimated.
pub const L_ESTIMATION_PAIRS: usize = 100_000;
const L_ESTIMATION_SEED: u64 = 0x4c49_5053;

/// A Lipschitz constant and where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzConstant {
    pub value: f64,
    /// `Some(n)` when estimated from `n` sampled pairs (with headroom).
    pub estimated_from: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: Option<f64>,
    pub l_estimated_from: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs <= rhs + 3·std_err`.
    pub holds: bool,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Monte-Carlo standard error of `lhs − rhs`.
    pub std_err: f64,
    pub n_mc: usize,
    pub constants: BoundConstants,
    /// Surrogate excess risk `R(f) − R*` (surrogate bound only).
    pub excess_risk: Option<f64>,
    /// Right-hand side with the tighter constant `√2·Lγ`, reported but not checked.
    pub rhs_tight: Option<f64>,
}

/// Constant `L` with `|2P(T > T'|x, x') − 1| <= L |f*(x) − f*(x')|`, where
/// `f*` is [`SurvivalModel::optimal_ordering_score`].
///
/// * Cox PH: 1.
/// * AFT with noise sd `s`: `1/(s√π)`, twice the peak density of `N(0, 2s²)`.
/// * Heteroscedastic AFT with `σ >= 1/a`: `a/√π`.
/// * Exponential family: estimated on `N(0, I_d)` pairs, with headroom.
///
/// Weibull-shape models admit no such constant with respect to `−k(x)`, and
/// the jitter-cycle family has no optimal score at all.
pub fn lipschitz_l(model: &SurvivalModel) -> Result<LipschitzConstant> {
    let exact = |value| Ok(LipschitzConstant { value, estimated_from: None });
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    match model {
        SurvivalModel::CoxPh { .. } => exact(1.0),
        SurvivalModel::Aft { noise_sd, .. } => exact(inv_sqrt_pi / noise_sd),
        SurvivalModel::AftH { sigma, .. } => exact(inv_sqrt_pi / sigma.lower_bound()),
        SurvivalModel::ExpFamily(_) => {
            let law = CovariateLaw::StdNormal { d: model.dim() };
            let mut rng = ChaCha8Rng::seed_from_u64(L_ESTIMATION_SEED);
            estimate_lipschitz(model, &law, L_ESTIMATION_PAIRS, &mut rng)
        }
        SurvivalModel::WeibullShape { .. } => Err(Error::Unsupported(
            "no Lipschitz constant exists for the Weibull-shape family with respect to -k(x)".into(),
        )),
        SurvivalModel::JitterCycle(_) => Err(Error::NoOptimalOrdering),
    }
}

/// `max |2p − 1| / |f*(x) − f*(x')|` over sampled pairs, times [`L_HEADROOM`].
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    model: &SurvivalModel,
    sampler: &dyn CovariateSampler,
    n_pairs: usize,
    rng: &mut R,
) -> Result<LipschitzConstant> {
    let pairs = PairSample::draw(model, sampler, n_pairs, rng)?;
    let ratios = pair_ratios(&pairs, &|x| model.optimal_ordering_score(x))?;
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(LipschitzConstant { value: L_HEADROOM * max, estimated_from: Some(n_pairs) })
}

fn pair_ratios(pairs: &PairSample, target: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<Vec<f64>> {
    pairs
        .x
        .par_iter()
        .zip(pairs.x2.par_iter())
        .zip(pairs.p.par_iter())
        .map(|((a, b), &p)| {
            let gap = (target(a)? - target(b)?).abs();
            let lhs = (2.0 * p - 1.0).abs();
            Ok(if gap > 0.0 { lhs / gap } else { 0.0 })
        })
        .collect()
}

/// Models the bound checks ship with, all on `X ~ N(0, I_3)`. Weibull-shape
/// and jitter-cycle models are absent: the first has no Lipschitz constant
/// and the second no optimal ordering.
pub fn fixture_models() -> Vec<(&'static str, SurvivalModel)> {
    let beta = vec![0.8, -0.5, 0.3];
    let build = || -> Result<Vec<(&'static str, SurvivalModel)>> {
        Ok(vec![
            ("cox-ph", SurvivalModel::cox_ph(beta.clone(), 1.0)?),
            ("aft", SurvivalModel::aft(beta.clone(), 0.7)?),
            ("aft-h", SurvivalModel::aft_h(beta.clone(), SigmaLink::default())?),
            ("exp-family", SurvivalModel::exp_family(beta.clone(), ExpFamilyTerms::ExponentialRate)?),
        ])
    };
    build().expect("fixture parameters are valid")
}

/// Result of the pointwise check on sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub l: f64,
    pub n_pairs: usize,
    /// Largest `|2p − 1| − L|Δf*|` seen (≤ 0 when the inequality holds everywhere).
    pub max_excess: f64,
    pub violations: usize,
}

/// Check the pointwise inequality on `n_pairs` sampled covariate pairs, with a
/// `1e-9` tolerance.
pub fn check_pointwise<R: Rng + ?Sized>(
    model: &SurvivalModel,
    sampler: &dyn CovariateSampler,
    n_pairs: usize,
    rng: &mut R,
) -> Result<PointwiseReport> {
    check_pointwise_with(model, lipschitz_l(model)?, sampler, n_pairs, rng)
}

/// [`check_pointwise`] with a precomputed constant.
pub fn check_pointwise_with<R: Rng + ?Sized>(
    model: &SurvivalModel,
    lc: LipschitzConstant,
    sampler: &dyn CovariateSampler,
    n_pairs: usize,
    rng: &mut R,
) -> Result<PointwiseReport> {
    require_optimal_score(model)?;
    let l = lc.value;
    let pairs = PairSample::draw(model, sampler, n_pairs, rng)?;
    let excess: Vec<f64> = pairs
        .x
        .par_iter()
        .zip(pairs.x2.par_iter())
        .zip(pairs.p.par_iter())
        .map(|((a, b), &p)| {
            let gap = (model.optimal_ordering_score(a)? - model.optimal_ordering_score(b)?).abs();
            Ok((2.0 * p - 1.0).abs() - l * gap)
        })
        .collect::<Result<_>>()?;
    Ok(PointwiseReport {
        l,
        n_pairs,
        max_excess: excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        violations: excess.iter().filter(|&&e| e > 1e-9).count(),
    })
}

fn require_optimal_score(model: &SurvivalModel) -> Result<()> {
    if model.family() == FamilyTag::D {
        return Err(Error::NoOptimalOrdering);
    }
    Ok(())
}

/// Check `C(f*) − C(f̂) <= 2L E|f̂(X) − f*(X)|`.
///
/// Per pair the left side is the concordance gap and the right side is
/// `L(|e(x)| + |e(x')|)` with `e = f̂ − f*`, so the two means are the two
/// sides of the inequality.
pub fn check_ordering_gap<F, R>(
    model: &SurvivalModel,
    f_hat: F,
    sampler: &dyn CovariateSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<BoundReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    require_optimal_score(model)?;
    check_ordering_gap_with(model, lipschitz_l(model)?, f_hat, sampler, n_mc, rng)
}

/// [`check_ordering_gap`] with a precomputed constant, e.g. to reuse an estimated one.
pub fn check_ordering_gap_with<F, R>(
    model: &SurvivalModel,
    lc: LipschitzConstant,
    f_hat: F,
    sampler: &dyn CovariateSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<BoundReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    require_optimal_score(model)?;
    let l = lc.value;
    if n_mc < 2 {
        return Err(validation("n_mc must be at least 2"));
    }
    let pairs = PairSample::draw(model, sampler, n_mc, rng)?;
    let per_pair: Vec<(f64, f64)> = pairs
        .x
        .par_iter()
        .zip(pairs.x2.par_iter())
        .zip(pairs.p.par_iter())
        .map(|((a, b), &p)| {
            let (sa, sb) = (model.optimal_ordering_score(a)?, model.optimal_ordering_score(b)?);
            let (ha, hb) = (f_hat(a)?, f_hat(b)?);
            let gap = pair_concordance(p, sa, sb) - pair_concordance(p, ha, hb);
            Ok((gap, l * ((ha - sa).abs() + (hb - sb).abs())))
        })
        .collect::<Result<_>>()?;
    let lhs_terms: Vec<f64> = per_pair.iter().map(|t| t.0).collect();
    let rhs_terms: Vec<f64> = per_pair.iter().map(|t| t.1).collect();
    let diff: Vec<f64> = per_pair.iter().map(|t| t.0 - t.1).collect();
    let (lhs, _) = mean_and_se(&lhs_terms);
    let (rhs, _) = mean_and_se(&rhs_terms);
    let (_, se) = mean_and_se(&diff);
    Ok(BoundReport {
        bound: "ordering-gap",
        lhs,
        rhs,
        holds: lhs <= rhs + 3.0 * se,
        margin: rhs - lhs,
        std_err: se,
        n_mc,
        constants: BoundConstants { l, gamma: None, l_estimated_from: lc.estimated_from },
        excess_risk: None,
        rhs_tight: None,
    })
}

/// Check `C* − C(f̂) <= 4Lγ √(R(f̂) − R*)` for a Fenchel-Young fit `f̂`.
///
/// The ranking evaluated is the one induced by the predicted mean
/// `∇Ω*(f̂(x))` (higher mean, lower risk). `L` is the Lipschitz constant of
/// `|2p − 1|` with respect to the conditional expectation, estimated on the
/// same pairs with [`L_HEADROOM`]. The surrogate excess risk is computed
/// exactly per covariate as the Bregman gap between `f̂(x)` and `Ω'(E[T|x])`.
pub fn check_excess_risk<F, R>(
    model: &SurvivalModel,
    reg: FenchelRegularizer,
    f_hat: F,
    sampler: &dyn CovariateSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<BoundReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    match model.family() {
        FamilyTag::A | FamilyTag::B => {}
        FamilyTag::C => {
            return Err(Error::Unsupported(
                "the conditional expectation is not an optimal ordering for this model".into(),
            ))
        }
        FamilyTag::D => return Err(Error::NoOptimalOrdering),
    }
    let gamma = reg
        .gamma()
        .ok_or_else(|| Error::Unsupported("regularizer is not strongly convex; gamma is undefined".into()))?;
    if n_mc < 2 {
        return Err(validation("n_mc must be at least 2"));
    }
    let pairs = PairSample::draw(model, sampler, n_mc, rng)?;
    let ce = |x: &[f64]| model.conditional_expectation(x);
    let ratios = pair_ratios(&pairs, &ce)?;
    let l = L_HEADROOM * ratios.iter().cloned().fold(0.0, f64::max);

    // per pair: C-index gap, and the mean Bregman excess of its two points
    let per_pair: Vec<(f64, f64)> = pairs
        .x
        .par_iter()
        .zip(pairs.x2.par_iter())
        .zip(pairs.p.par_iter())
        .map(|((a, b), &p)| {
            let (ma, mb) = (ce(a)?, ce(b)?);
            let (va, vb) = (f_hat(a)?, f_hat(b)?);
            let (sa, sb) = (-reg.omega_conj_prime(va), -reg.omega_conj_prime(vb));
            let gap = p.max(1.0 - p) - pair_concordance(p, sa, sb);
            let excess = 0.5 * (reg.excess_loss(ma, va).max(0.0) + reg.excess_loss(mb, vb).max(0.0));
            Ok((gap, excess))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = per_pair.iter().map(|t| t.0).collect();
    let excesses: Vec<f64> = per_pair.iter().map(|t| t.1).collect();
    let (lhs, se_lhs) = mean_and_se(&gaps);
    let (excess, se_excess) = mean_and_se(&excesses);
    let c = 4.0 * l * gamma;
    let root = excess.sqrt();
    let rhs = c * root;
    // delta method for c·√excess
    let se_rhs = if root > 0.0 { c * se_excess / (2.0 * root) } else { 0.0 };
    let se = (se_lhs * se_lhs + se_rhs * se_rhs).sqrt();
    Ok(BoundReport {
        bound: "excess-risk",
        lhs,
        rhs,
        holds: lhs <= rhs + 3.0 * se,
        margin: rhs - lhs,
        std_err: se,
        n_mc,
        constants: BoundConstants { l, gamma: Some(gamma), l_estimated_from: Some(n_mc) },
        excess_risk: Some(excess),
        rhs_tight: Some(std::f64::consts::SQRT_2 * l * gamma * root),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn law(d: usize) -> CovariateLaw {
        CovariateLaw::StdNormal { d }
    }

    #[test]
    fn closed_form_constants() {
        assert_eq!(lipschitz_l(&SurvivalModel::cox_ph(vec![1.0], 1.0).unwrap()).unwrap().value, 1.0);
        let aft = lipschitz_l(&SurvivalModel::aft(vec![1.0], 1.0).unwrap()).unwrap().value;
        assert!((aft - 0.564_189_583_547_756_3).abs() < 1e-12);
        let afth = SurvivalModel::aft_h(vec![1.0], SigmaLink::default()).unwrap();
        assert!((lipschitz_l(&afth).unwrap().value - 2.0 * 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!(lipschitz_l(&SurvivalModel::weibull_shape(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn exp_family_constant_is_estimated() {
        let m = SurvivalModel::exp_family(vec![0.6, -0.4], ExpFamilyTerms::ExponentialRate).unwrap();
        let lc = lipschitz_l(&m).unwrap();
        assert_eq!(lc.estimated_from, Some(L_ESTIMATION_PAIRS));
        // |2 logistic(Δ) − 1| = tanh(|Δ|/2) <= |Δ|/2, approached for small Δ
        assert!(lc.value > 0.5 && lc.value <= 0.5 * L_HEADROOM + 1e-9, "{}", lc.value);
    }

    #[test]
    fn pointwise_inequality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [
            SurvivalModel::cox_ph(vec![0.8, -0.6], 1.0).unwrap(),
            SurvivalModel::aft(vec![0.8, -0.6], 0.7).unwrap(),
            SurvivalModel::aft_h(vec![0.8, -0.6], SigmaLink::default()).unwrap(),
        ] {
            let r = check_pointwise(&m, &law(2), 10_000, &mut rng).unwrap();
            assert_eq!(r.violations, 0, "{m:?}: {r:?}");
        }
    }

    #[test]
    fn exact_score_has_zero_gap() {
        let m = SurvivalModel::cox_ph(vec![1.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = check_ordering_gap(&m, |x| m.optimal_ordering_score(x), &law(2), 2000, &mut rng).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.holds);
    }

    #[test]
    fn monotone_transform_is_loose() {
        let m = SurvivalModel::cox_ph(vec![1.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = check_ordering_gap(&m, |x| Ok(2.0 * m.optimal_ordering_score(x)? + 3.0), &law(2), 2000, &mut rng).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.rhs > 0.0 && r.holds);
    }

    #[test]
    fn noisy_score_satisfies_ordering_gap() {
        let m = SurvivalModel::cox_ph(vec![0.6, 0.8], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = |x: &[f64]| Ok(m.optimal_ordering_score(x)? + 0.1 * (noise[0] * x[0] + noise[1] * x[1]).sin());
        let r = check_ordering_gap(&m, f, &law(2), 5000, &mut rng).unwrap();
        assert!(r.holds && r.margin > 0.0, "{r:?}");
    }

    #[test]
    fn excess_risk_optimal_and_perturbed() {
        let m = SurvivalModel::aft_h(vec![0.6, -0.8], SigmaLink::default()).unwrap();
        let reg = FenchelRegularizer::Squared;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let opt = |x: &[f64]| Ok(reg.omega_prime(m.conditional_expectation(x)?));
        let r = check_excess_risk(&m, reg, opt, &law(2), 3000, &mut rng).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-9 && r.holds, "{r:?}");
        let pert = |x: &[f64]| Ok(opt(x)? + 0.3 * x[0]);
        let r = check_excess_risk(&m, reg, pert, &law(2), 3000, &mut rng).unwrap();
        assert!(r.holds && r.excess_risk.unwrap() > 0.0, "{r:?}");
    }

    #[test]
    fn excess_risk_rejects_unsupported_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = SurvivalModel::weibull_shape(vec![1.0]).unwrap();
        assert!(check_excess_risk(&w, FenchelRegularizer::Squared, |_| Ok(0.0), &law(1), 100, &mut rng).is_err());
        let c = SurvivalModel::cox_ph(vec![1.0], 1.0).unwrap();
        assert!(check_excess_risk(&c, FenchelRegularizer::Entropy, |_| Ok(0.0), &law(1), 100, &mut rng).is_err());
    }
}
