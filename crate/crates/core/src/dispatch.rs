//! Robot dispatch against a human readiness-time distribution.
//!
//! If the robot arrives at `t` and the human becomes ready at `H`, the robot
//! idles `(H − t)⁺` and the human idles `(t − H)⁺`. With linear waiting costs
//! the expected cost is minimized at the `c_robot / (c_human + c_robot)`
//! quantile of `H`.

use serde::{Deserialize, Serialize};

use crate::distributions::{DurationModel, FamilyParams};
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::special::{norm_cdf, norm_pdf, norm_sf};

pub const PLAN_SCHEMA_VERSION: u32 = 1;
const QUAD_TOL: f64 = 1e-12;

/// Per-second waiting costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    /// Cost per second the human waits on the robot.
    pub c_human: f64,
    /// Cost per second the robot waits on the human.
    pub c_robot: f64,
}

impl CostSpec {
    pub fn new(c_human: f64, c_robot: f64) -> Result<Self> {
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        if !ok(c_human) || !ok(c_robot) {
            return Err(Error::Config(format!(
                "waiting costs must be finite and nonnegative (human {c_human}, robot {c_robot})"
            )));
        }
        if c_human + c_robot <= 0.0 {
            return Err(Error::Config("waiting costs cannot both be zero".into()));
        }
        Ok(Self { c_human, c_robot })
    }

    /// `c_robot / (c_human + c_robot)`: the optimal probability that the human
    /// is ready by the robot's arrival.
    pub fn critical_ratio(&self) -> f64 {
        self.c_robot / (self.c_human + self.c_robot)
    }
}

/// `(E[(t − H)⁺], E[(H − t)⁺])`: expected human idle and robot idle time.
pub fn partial_expectations(model: &DurationModel, t: f64) -> (f64, f64) {
    match model.params() {
        FamilyParams::Normal { mu, sigma } => {
            let z = (t - mu) / sigma;
            let phi = sigma * norm_pdf(z);
            let early = (t - mu) * norm_cdf(z) + phi;
            let late = phi - (t - mu) * norm_sf(z);
            (early, late)
        }
        FamilyParams::LogNormal { mu, sigma } => {
            let mean = model.mean();
            if t <= 0.0 {
                return (0.0, mean - t);
            }
            let lt = t.ln();
            let d1 = (mu + sigma * sigma - lt) / sigma;
            let d2 = (mu - lt) / sigma;
            let late = mean * norm_cdf(d1) - t * norm_cdf(d2);
            let early = t * norm_cdf(-d2) - mean * norm_cdf(-d1);
            (early, late)
        }
        FamilyParams::Weibull { .. } | FamilyParams::Gamma { .. } => {
            if t <= 0.0 {
                return (0.0, model.mean() - t);
            }
            // E[(t − H)⁺] = ∫₀ᵗ F(h) dh; the other side follows from E[H] − t
            let early = integrate(|h| model.cdf(h), 0.0, t, QUAD_TOL);
            (early, early + model.mean() - t)
        }
    }
}

/// `c_robot · E[(H − t)⁺] + c_human · E[(t − H)⁺]`.
pub fn expected_cost(model: &DurationModel, t: f64, costs: &CostSpec) -> f64 {
    let (early, late) = partial_expectations(model, t);
    costs.c_robot * late + costs.c_human * early
}

/// Arrival time minimizing [`expected_cost`] over `t ≥ 0`.
///
/// Zero robot cost sends the robot immediately; zero human cost has no
/// finite optimum and is an error.
pub fn optimal_dispatch(model: &DurationModel, costs: &CostSpec) -> Result<f64> {
    if costs.c_human == 0.0 {
        return Err(Error::UnboundedOptimum);
    }
    if costs.c_robot == 0.0 {
        return Ok(0.0);
    }
    // convex cost: an unconstrained optimum below zero clamps to the boundary
    Ok(model.quantile(costs.critical_ratio())?.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDispatch {
    pub order: usize,
    pub model: DurationModel,
    /// Robot arrival target, seconds from order start.
    pub target_s: f64,
    /// Robot departure, seconds from order start.
    pub departure_s: f64,
    /// Set when travel exceeds the target and the departure was floored at zero.
    pub departure_floored: bool,
    pub expected_cost: f64,
    /// P(H ≤ target): probability the human is ready by the robot's arrival.
    pub p_on_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    pub schema_version: u32,
    pub costs: CostSpec,
    pub orders: Vec<OrderDispatch>,
}

/// Plans one robot delivery per order. `robot_travel` holds either one
/// travel time for every order or one per order.
pub fn schedule_session(models: &[DurationModel], costs: &CostSpec, robot_travel: &[f64]) -> Result<DispatchPlan> {
    if models.is_empty() {
        return Err(Error::Config("dispatch schedule needs at least one order model".into()));
    }
    let travel = |i: usize| match robot_travel.len() {
        0 => Ok(0.0),
        1 => Ok(robot_travel[0]),
        n if n == models.len() => Ok(robot_travel[i]),
        n => Err(Error::Config(format!(
            "{n} travel times given for {} orders (expected 1 or {})",
            models.len(),
            models.len()
        ))),
    };
    let mut orders = Vec::with_capacity(models.len());
    for (i, model) in models.iter().enumerate() {
        let travel = travel(i)?;
        if !(travel.is_finite() && travel >= 0.0) {
            return Err(Error::Config(format!("robot travel time {travel} must be finite and >= 0")));
        }
        let target = optimal_dispatch(model, costs)?;
        let raw_departure = target - travel;
        orders.push(OrderDispatch {
            order: i + 1,
            model: *model,
            target_s: target,
            departure_s: raw_departure.max(0.0),
            departure_floored: raw_departure < 0.0,
            expected_cost: expected_cost(model, target, costs),
            p_on_time: model.cdf(target),
        });
    }
    Ok(DispatchPlan {
        schema_version: PLAN_SCHEMA_VERSION,
        costs: *costs,
        orders,
    })
}
