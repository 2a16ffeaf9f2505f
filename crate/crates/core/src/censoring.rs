//! Independent right-censoring and the censoring survival curve `G(t) = P(C > t)`.
//!
//! [`CensoringModel`] simulates censoring times and also knows its own true
//! `G`. [`CensoringCurve`] is the Kaplan-Meier estimate of `G` built by
//! treating censorings (`δ = 0`) as the events. Both implement
//! [`CensoringSurvival`], which is all the IPCW code needs.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{domain, validation, Result};

/// Default lower clip applied to the estimated censoring curve.
pub const DEFAULT_FLOOR_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CensoringModel {
    /// No censoring: every event is observed.
    #[default]
    None,
    /// `C ~ Exp(rate)`.
    Exponential { rate: f64 },
    /// `C ~ U[lower, upper]`; `lower == upper` gives a fixed censoring time.
    Uniform { lower: f64, upper: f64 },
}

impl CensoringModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CensoringModel::None => Ok(()),
            CensoringModel::Exponential { rate } if rate > 0.0 && rate.is_finite() => Ok(()),
            CensoringModel::Exponential { rate } => {
                Err(validation(format!("censoring rate must be > 0, got {rate}")))
            }
            CensoringModel::Uniform { lower, upper }
                if lower >= 0.0 && upper > 0.0 && lower <= upper && upper.is_finite() =>
            {
                Ok(())
            }
            CensoringModel::Uniform { lower, upper } => Err(validation(format!(
                "uniform censoring needs 0 <= lower <= upper, upper > 0; got [{lower}, {upper}]"
            ))),
        }
    }

    /// Draw one censoring time (`+∞` when there is no censoring).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CensoringModel::None => f64::INFINITY,
            CensoringModel::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            CensoringModel::Uniform { lower, upper } => {
                if lower == upper {
                    lower
                } else {
                    lower + (upper - lower) * rng.random::<f64>()
                }
            }
        }
    }
}

/// Anything that can report `G(t) = P(C > t)`.
pub trait CensoringSurvival {
    fn censor_survival(&self, t: f64) -> f64;
}

impl CensoringSurvival for CensoringModel {
    fn censor_survival(&self, t: f64) -> f64 {
        match *self {
            CensoringModel::None => 1.0,
            CensoringModel::Exponential { rate } => (-rate * t.max(0.0)).exp(),
            CensoringModel::Uniform { lower, upper } => {
                if t < lower {
                    1.0
                } else if t >= upper {
                    0.0
                } else {
                    (upper - t) / (upper - lower)
                }
            }
        }
    }
}

/// Censor event times: `u = min(t, c)`, `δ = 1(c >= t)`.
///
/// Draws exactly one censoring time per event time, in order.
pub fn apply_censoring<R: Rng + ?Sized>(
    times: &[f64],
    cmodel: &CensoringModel,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<bool>)> {
    cmodel.validate()?;
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(domain(format!("event times must be > 0, got {t}")));
    }
    let mut u = Vec::with_capacity(times.len());
    let mut delta = Vec::with_capacity(times.len());
    for &t in times {
        let c = cmodel.sample(rng);
        let observed = c >= t;
        u.push(if observed { t } else { c });
        delta.push(observed);
    }
    Ok((u, delta))
}

/// Right-continuous step estimate of `G`, clipped below at `floor_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringCurve {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    floor_eps: f64,
    floored: bool,
}

impl CensoringCurve {
    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// Curve values right after each jump, already floored.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor_eps(&self) -> f64 {
        self.floor_eps
    }

    /// Whether the unclipped product-limit estimate fell below `floor_eps`.
    pub fn floored(&self) -> bool {
        self.floored
    }

    /// Evaluate `Ĝ(t)`; errors for negative `t`.
    pub fn survival_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("censoring curve evaluated at t = {t}")));
        }
        Ok(self.eval(t))
    }

    fn eval(&self, t: f64) -> f64 {
        // number of jumps at or before t
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

impl CensoringSurvival for CensoringCurve {
    fn censor_survival(&self, t: f64) -> f64 {
        self.eval(t)
    }
}

/// Free-function form of [`CensoringCurve::survival_at`].
pub fn censoring_survival_at(curve: &CensoringCurve, t: f64) -> Result<f64> {
    curve.survival_at(t)
}

/// Kaplan-Meier estimate of `G` with the default floor.
pub fn fit_km_censoring(data: &Dataset) -> Result<CensoringCurve> {
    fit_km_censoring_with_floor(data.u(), data.delta(), DEFAULT_FLOOR_EPS)
}

/// Kaplan-Meier estimate of `G` on `(u, δ)`, treating `δ = 0` as the event.
///
/// Tied times are grouped, and at a tie events leave the risk set after the
/// censorings are counted (so `δ = 1` rows at time `t` are still at risk of
/// censoring at `t`).
pub fn fit_km_censoring_with_floor(u: &[f64], delta: &[bool], floor_eps: f64) -> Result<CensoringCurve> {
    if u.is_empty() {
        return Err(validation("cannot fit a censoring curve on an empty dataset"));
    }
    if u.len() != delta.len() {
        return Err(validation("u and delta have different lengths"));
    }
    if !(floor_eps > 0.0 && floor_eps < 1.0) {
        return Err(validation(format!("floor_eps must lie in (0, 1), got {floor_eps}")));
    }
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));

    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut floored = false;
    let mut g = 1.0;
    let mut at_risk = u.len();
    let mut i = 0;
    while i < order.len() {
        let t = u[order[i]];
        let mut j = i;
        let mut censored = 0usize;
        while j < order.len() && u[order[j]] == t {
            if !delta[order[j]] {
                censored += 1;
            }
            j += 1;
        }
        if censored > 0 {
            g *= 1.0 - censored as f64 / at_risk as f64;
            if g < floor_eps {
                floored = true;
            }
            jump_times.push(t);
            values.push(g.max(floor_eps));
        }
        at_risk -= j - i;
        i = j;
    }
    Ok(CensoringCurve { jump_times, values, floor_eps, floored })
}

/// IPCW weight `δ / G(u)^power`.
pub fn ipcw_weight<G: CensoringSurvival + ?Sized>(curve: &G, u: f64, delta: bool, power: i32) -> f64 {
    if !delta {
        return 0.0;
    }
    1.0 / curve.censor_survival(u).powi(power)
}

/// Censoring rate of an exponential law that censors a fraction `target` of
/// the given event times in expectation, found by bisection on
/// `mean(1 − e^{−rate·t_i})`.
pub fn calibrate_exponential_rate(times: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(validation(format!("censoring target must lie in (0, 1), got {target}")));
    }
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(validation("calibration needs a non-empty list of positive finite times"));
    }
    let frac = |rate: f64| times.iter().map(|&t| -(-rate * t).exp_m1()).sum::<f64>() / times.len() as f64;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while frac(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(validation("censoring rate calibration diverged"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) < target {
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
