//! Circular obstacles seen through projection-point virtual agents.
//!
//! A robot near an obstacle interacts with the nearest boundary point as if
//! it were another agent. The point moves along one of the two boundary
//! tangents, so the heading law steers the robot around the obstacle.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::control::{heading_law, interaction_speed, ControlGains, HeadingSample};
use crate::dynamics::AgentState;
use crate::graph::ProximityGraph;
use crate::potential::Potential;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidParameter(format!("obstacle ({cx}, {cy}, {radius}) needs a positive radius")));
        }
        Ok(Self { center: Vec2::new(cx, cy), radius })
    }

    /// Signed distance from `q` to the boundary; negative inside.
    pub fn clearance(&self, q: &Vec2) -> f64 {
        (q - self.center).norm() - self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualAgent {
    /// Projection point on the boundary.
    pub q: Vec2,
    pub v: f64,
    pub theta: f64,
    /// Signed angle from the robot heading to the ray toward the center.
    pub alpha: f64,
}

/// Nearest boundary point to a robot outside the obstacle.
pub fn project(q_r: &Vec2, obs: &Obstacle) -> Result<Vec2> {
    let d = (q_r - obs.center).norm();
    if !(d > obs.radius) {
        return Err(Error::InsideObstacle { obstacle: 0, x: q_r.x, y: q_r.y });
    }
    let ratio = obs.radius / d;
    Ok(q_r * ratio + obs.center * (1.0 - ratio))
}

/// Virtual agent induced on `obs` by a robot at `q_r` with speed `v` and
/// heading `theta`.
///
/// The virtual speed is `v r |sin α| / ‖q_r - q_obs‖`; the sign of `α`
/// selects the tangent direction, with `α = 0` on the `+π/2` branch.
pub fn virtual_agent(q_r: &Vec2, v: f64, theta: f64, obs: &Obstacle) -> Result<VirtualAgent> {
    let q = project(q_r, obs)?;
    let ray = obs.center - q_r;
    let e = crate::dynamics::unit(theta);
    let cross = e.x * ray.y - e.y * ray.x;
    let alpha = cross.atan2(e.dot(&ray));
    let speed = v * obs.radius * alpha.sin().abs() / (q_r - q).norm();
    let heading = if alpha > 0.0 { -FRAC_PI_2 + alpha + theta } else { FRAC_PI_2 + alpha + theta };
    Ok(VirtualAgent { q, v: speed, theta: angle::wrap(heading), alpha })
}

/// Which boundary tangent the virtual agent follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentBranch {
    /// Chosen by the sign of `α`.
    Alpha,
    /// The tangent closer to the goal heading; ties go to the `α` branch.
    #[default]
    Goal,
}

/// [`virtual_agent`] with the tangent picked by `branch`.
pub fn virtual_agent_toward(q_r: &Vec2, v: f64, theta: f64, obs: &Obstacle, branch: TangentBranch, goal: f64) -> Result<VirtualAgent> {
    let mut va = virtual_agent(q_r, v, theta, obs)?;
    if branch == TangentBranch::Goal {
        let other = angle::wrap(va.theta + std::f64::consts::PI);
        if (other - goal).cos() > (va.theta - goal).cos() {
            va.theta = other;
        }
    }
    Ok(va)
}

/// Obstacle-mode speed input: the flock-neighbor terms plus the potential
/// term of each virtual agent. Virtual agents carry no speed-matching term.
pub fn obstacle_speed_control(
    i: usize,
    snapshot: &[AgentState],
    g: &ProximityGraph,
    virtuals: &[VirtualAgent],
    pot: &Potential,
    gains: &ControlGains,
) -> Result<f64> {
    let own = snapshot[i].v;
    let partners = g
        .neighbors(i)
        .iter()
        .map(|&j| (snapshot[j].q, snapshot[j].v))
        .chain(virtuals.iter().map(|va| (va.q, own)));
    interaction_speed(&snapshot[i], partners, pot, &gains.sigma1)
}

/// Desired heading while avoiding: circular mean of the virtual headings.
pub fn obstacle_reference(virtuals: &[VirtualAgent]) -> Option<HeadingSample> {
    angle::circular_mean(virtuals.iter().map(|va| va.theta)).map(HeadingSample::fixed)
}

/// Obstacle-mode heading input. The gain is divided by `n_obs + 1`; the
/// bracket sums wrapped differences to every virtual agent and to their
/// mean heading. Reference rates are taken as zero.
pub fn obstacle_heading_control(agent: &AgentState, virtuals: &[VirtualAgent], gains: &ControlGains) -> f64 {
    let reference = obstacle_reference(virtuals).unwrap_or(HeadingSample::fixed(agent.theta));
    heading_law(agent, virtuals.iter().map(|va| va.theta), reference, gains, virtuals.len() + 1)
}

/// Engagement rule, with thresholds measured as clearance from the
/// obstacle boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    /// Engage when the clearance drops below this.
    pub engage_below: f64,
    /// Release once the clearance reaches this.
    pub release_at: f64,
    /// Only engage while heading toward the center (`cos α > 0`), and
    /// release once heading away from it.
    pub require_approach: bool,
    pub branch: TangentBranch,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        if !(self.engage_below > 0.0 && self.release_at >= self.engage_below && self.release_at.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "obstacle activation needs 0 < engage ({}) <= release ({})",
                self.engage_below, self.release_at
            )));
        }
        Ok(())
    }
}

/// Per-agent, per-obstacle engagement flags with hysteresis.
#[derive(Debug, Clone, PartialEq)]
pub struct Engagement {
    obstacles: usize,
    flags: Vec<bool>,
}

fn heading_in(s: &AgentState, obs: &Obstacle) -> bool {
    s.heading().dot(&(obs.center - s.q)) > 0.0
}

impl Engagement {
    pub fn new(agents: usize, obstacles: usize) -> Self {
        Self { obstacles, flags: vec![false; agents * obstacles] }
    }

    pub fn update(&mut self, states: &[AgentState], obstacles: &[Obstacle], act: &Activation) {
        for (i, s) in states.iter().enumerate() {
            for (k, obs) in obstacles.iter().enumerate() {
                let c = obs.clearance(&s.q);
                let flag = &mut self.flags[i * self.obstacles + k];
                if *flag {
                    if c >= act.release_at || (act.require_approach && !heading_in(s, obs)) {
                        *flag = false;
                    }
                } else if c < act.engage_below && (!act.require_approach || heading_in(s, obs)) {
                    *flag = true;
                }
            }
        }
    }

    pub fn engaged(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.flags[i * self.obstacles..(i + 1) * self.obstacles];
        row.iter().enumerate().filter(|(_, &f)| f).map(|(k, _)| k)
    }

    pub fn is_engaged(&self, i: usize) -> bool {
        self.engaged(i).next().is_some()
    }

    pub fn engaged_agents(&self) -> usize {
        (0..self.flags.len() / self.obstacles.max(1)).filter(|&i| self.is_engaged(i)).count()
    }
}

/// Virtual agents for the obstacles engaged by an agent.
pub fn virtual_agents_for(
    s: &AgentState,
    obstacles: &[Obstacle],
    engaged: impl Iterator<Item = usize>,
    branch: TangentBranch,
    goal: f64,
) -> Result<Vec<VirtualAgent>> {
    engaged
        .map(|k| {
            virtual_agent_toward(&s.q, s.v, s.theta, &obstacles[k], branch, goal).map_err(|e| match e {
                Error::InsideObstacle { x, y, .. } => Error::InsideObstacle { obstacle: k, x, y },
                other => other,
            })
        })
        .collect()
}
