//! Bounded distributed control laws.
//!
//! Speed consensus:
//!
//! ```text
//! u_i = -Σ_{j∈N_i} ∇_{q_i}U(q_i, q_j)·e(theta_i) - Σ_{j∈N_i} σ1(v_i - v_j)
//! ```
//!
//! Heading consensus, with `n_i = |N_i|` and wrapped angle differences:
//!
//! ```text
//! tau_i = θr'' - σ2(w_i - θr') - kθ/(n_i+1) [Σ_j (θ_i - θ_j) + (θ_i - θr)]
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::AgentState;
use crate::graph::ProximityGraph;
use crate::potential::Potential;
use crate::{Error, Result, Vec2};

/// Odd, nondecreasing saturation: identity on `|s| <= L`, bounded by `M`.
///
/// With `L == M` this is a plain clamp. With `L < M` the output ramps
/// linearly from `L` at `|s| = L` to `M` at `|s| = knee` and stays there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    pub linear: f64,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knee: Option<f64>,
}

impl SaturationParams {
    pub fn clamp(bound: f64) -> Self {
        Self { linear: bound, bound, knee: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linear > 0.0 && self.linear <= self.bound && self.bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "saturation needs 0 < L <= M, got L={}, M={}",
                self.linear, self.bound
            )));
        }
        if let Some(k) = self.knee {
            if self.linear < self.bound && !(k > self.linear && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("saturation knee {k} must exceed L={}", self.linear)));
            }
        }
        Ok(())
    }

    fn knee_or_default(&self) -> f64 {
        self.knee.unwrap_or(2.0 * self.bound - self.linear)
    }

    pub fn apply(&self, s: f64) -> f64 {
        let mag = s.abs();
        let out = if mag <= self.linear {
            mag
        } else if self.linear >= self.bound {
            self.bound
        } else {
            let knee = self.knee_or_default();
            let slope = (self.bound - self.linear) / (knee - self.linear);
            (self.linear + slope * (mag - self.linear)).min(self.bound)
        };
        out.copysign(s)
    }
}

/// Desired flock heading and its derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingSample {
    pub theta: f64,
    pub rate: f64,
    pub accel: f64,
}

impl HeadingSample {
    pub fn fixed(theta: f64) -> Self {
        Self { theta: angle::wrap(theta), rate: 0.0, accel: 0.0 }
    }
}

/// Desired-heading profile. Both variants have bounded first and second
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadingReference {
    Constant { theta: f64 },
    /// `theta(t) = theta0 + rate * t`.
    Ramp { theta0: f64, rate: f64 },
}

impl HeadingReference {
    pub fn at(&self, t: f64) -> HeadingSample {
        match *self {
            HeadingReference::Constant { theta } => HeadingSample::fixed(theta),
            HeadingReference::Ramp { theta0, rate } => {
                HeadingSample { theta: angle::wrap(theta0 + rate * t), rate, accel: 0.0 }
            }
        }
    }

    /// Bound on `|θr''|` over all time.
    pub fn accel_bound(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub sigma1: SaturationParams,
    pub sigma2: SaturationParams,
    pub k_theta: f64,
    pub reference: HeadingReference,
}

impl ControlGains {
    pub fn validate(&self) -> Result<()> {
        self.sigma1.validate()?;
        self.sigma2.validate()?;
        if !(self.k_theta > 0.0 && self.k_theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("k_theta must be positive, got {}", self.k_theta)));
        }
        Ok(())
    }
}

/// Speed law for an agent interacting with the given `(position, speed)`
/// partners. Shared by the flock law and the obstacle law.
pub fn interaction_speed<I>(agent: &AgentState, partners: I, pot: &Potential, sigma1: &SaturationParams) -> Result<f64>
where
    I: IntoIterator<Item = (Vec2, f64)>,
{
    let e = agent.heading();
    let mut u = 0.0;
    for (q_j, v_j) in partners {
        u -= pot.gradient_force(&agent.q, &q_j)?.dot(&e);
        u -= sigma1.apply(agent.v - v_j);
    }
    Ok(u)
}

/// Speed-consensus input `u_i` over the graph neighbors of `i`.
pub fn speed_control(i: usize, snapshot: &[AgentState], g: &ProximityGraph, pot: &Potential, gains: &ControlGains) -> Result<f64> {
    let partners = g.neighbors(i).iter().map(|&j| (snapshot[j].q, snapshot[j].v));
    interaction_speed(&snapshot[i], partners, pot, &gains.sigma1).map_err(|e| match e {
        Error::CoincidentPositions { .. } => {
            let j = g.neighbors(i).iter().copied().find(|&j| snapshot[j].q == snapshot[i].q).unwrap_or(i);
            Error::Coincident { i, j }
        }
        other => other,
    })
}

/// Heading law with an explicit gain denominator count.
///
/// The bracket always sums the wrapped differences to every neighbor and to
/// the reference; `denominator` is `n_i + 1` in free flocking.
pub fn heading_law<I>(agent: &AgentState, neighbor_headings: I, reference: HeadingSample, gains: &ControlGains, denominator: usize) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut bracket = angle::diff(agent.theta, reference.theta);
    for th in neighbor_headings {
        bracket += angle::diff(agent.theta, th);
    }
    reference.accel - gains.sigma2.apply(agent.w - reference.rate) - gains.k_theta / denominator as f64 * bracket
}

/// Heading-consensus input `tau_i`.
pub fn orientation_control(i: usize, snapshot: &[AgentState], g: &ProximityGraph, gains: &ControlGains, reference: HeadingSample) -> f64 {
    let nbrs = g.neighbors(i);
    heading_law(&snapshot[i], nbrs.iter().map(|&j| snapshot[j].theta), reference, gains, nbrs.len() + 1)
}

/// Leader cruise law `u_l = -σ1(v_l - v_r)`.
pub fn leader_speed_control(v_leader: f64, v_ref: f64, gains: &ControlGains) -> f64 {
    -gains.sigma1.apply(v_leader - v_ref)
}

/// `|u|` bound for an agent with `partners` interaction partners.
pub fn speed_bound(partners: usize, pot: &Potential, gains: &ControlGains) -> f64 {
    partners as f64 * (pot.params().force_bound() + gains.sigma1.bound)
}

/// `|tau|` bound for the free-flock heading law.
pub fn heading_bound(gains: &ControlGains) -> f64 {
    gains.reference.accel_bound() + gains.sigma2.bound + 2.0 * PI * gains.k_theta
}
