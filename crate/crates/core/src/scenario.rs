//! Scenario files, initial placement and pre-run validation.
//!
//! Scenario files are flat TOML documents; every dimensional key carries
//! its unit (`_m`, `_s`, `_rad`, `_mps`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ControlGains, HeadingReference, SaturationParams};
use crate::dynamics::AgentState;
use crate::graph::{GraphParams, ProximityGraph};
use crate::metrics::{v1_budget, Budget};
use crate::obstacles::{Activation, Obstacle, TangentBranch};
use crate::potential::{calibrate, Potential, PotentialGeometry, PotentialParams};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    /// Two concentric rings, radius 4 then 8.
    Rings,
    Explicit,
}

/// How controls are applied inside one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlHold {
    /// Controls computed once from the step-start snapshot.
    Zoh,
    /// Controls re-evaluated on every Runge–Kutta stage, graph held fixed.
    Stagewise,
}

fn default_dt() -> f64 {
    0.01
}
fn default_horizon() -> f64 {
    100.0
}
fn default_eps1() -> f64 {
    1.0
}
fn default_eps2() -> f64 {
    3.0
}
fn default_sat() -> f64 {
    0.5
}
fn default_speed_max() -> f64 {
    0.8
}
fn default_heading_min() -> f64 {
    -FRAC_PI_2
}
fn default_heading_max() -> f64 {
    FRAC_PI_2
}
fn default_threads() -> usize {
    1
}
fn default_hold() -> ControlHold {
    ControlHold::Zoh
}
fn default_true() -> bool {
    true
}

/// Flat scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub agents: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,

    pub r0_m: f64,
    pub a_m: f64,
    #[serde(rename = "A_m")]
    pub big_a_m: f64,
    #[serde(rename = "R0_m")]
    pub big_r0_m: f64,
    #[serde(rename = "U_max")]
    pub u_max: f64,
    /// Lobe amplitudes; calibrated from `U_max` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,

    /// Sensing radius; defaults to `R0_m`.
    #[serde(default, rename = "R_m", skip_serializing_if = "Option::is_none")]
    pub sensing_radius_m: Option<f64>,
    #[serde(default = "default_eps1")]
    pub eps1_m: f64,
    #[serde(default = "default_eps2")]
    pub eps2_m: f64,

    #[serde(default = "default_sat", rename = "L1")]
    pub l1: f64,
    #[serde(default = "default_sat", rename = "M1")]
    pub m1: f64,
    #[serde(default, rename = "knee1", skip_serializing_if = "Option::is_none")]
    pub knee1: Option<f64>,
    #[serde(default = "default_sat", rename = "L2")]
    pub l2: f64,
    #[serde(default = "default_sat", rename = "M2")]
    pub m2: f64,
    #[serde(default, rename = "knee2", skip_serializing_if = "Option::is_none")]
    pub knee2: Option<f64>,
    pub k_theta: f64,
    pub theta_r_rad: f64,
    #[serde(default)]
    pub theta_r_rate_radps: f64,

    pub placement: PlacementKind,
    #[serde(default)]
    pub speed_min_mps: f64,
    #[serde(default = "default_speed_max")]
    pub speed_max_mps: f64,
    #[serde(default = "default_heading_min")]
    pub heading_min_rad: f64,
    #[serde(default = "default_heading_max")]
    pub heading_max_rad: f64,
    /// Explicit placement: `[[x, y], ...]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions_m: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headings_rad: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub speeds_mps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angular_speeds_radps: Vec<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_speed_mps: Option<f64>,

    /// `[[cx, cy, radius], ...]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<[f64; 3]>,
    /// Obstacle engagement clearance; defaults to `a_m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_engage_m: Option<f64>,
    /// Obstacle release clearance; defaults to `a_m + r0_m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_release_m: Option<f64>,
    #[serde(default = "default_true")]
    pub obstacle_require_approach: bool,
    #[serde(default)]
    pub obstacle_tangent: TangentBranch,

    #[serde(default = "default_hold")]
    pub control_hold: ControlHold,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

/// Machine-readable reason attached to every rejected scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    InvalidParameter,
    TooFewAgents,
    CoincidentPositions,
    DisconnectedInitialGraph,
    EnergyBudget,
    ObstacleOverlap,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::InvalidParameter => "invalid_parameter",
            RejectReason::TooFewAgents => "too_few_agents",
            RejectReason::CoincidentPositions => "coincident_positions",
            RejectReason::DisconnectedInitialGraph => "disconnected_initial_graph",
            RejectReason::EnergyBudget => "energy_budget",
            RejectReason::ObstacleOverlap => "obstacle_overlap",
        }
    }
}

fn reject(reason: RejectReason, detail: impl Into<String>) -> Error {
    Error::Rejected { reason, detail: detail.into() }
}

/// Ring placement: agent `i` (1-based) sits at
/// `(Γ sin(π(i-1)/Γ + π), Γ cos(π(i-1)/Γ + π))` with `Γ = 4` for the first
/// `⌈N/3⌉` agents and `Γ = 8` after. For N = 15 this is the `i < 6` split.
pub fn ring_positions(n: usize) -> Vec<Vec2> {
    let inner = n.div_ceil(3);
    (1..=n)
        .map(|i| {
            let gamma = if i <= inner { 4.0 } else { 8.0 };
            let phase = PI * (i - 1) as f64 / gamma + PI;
            Vec2::new(gamma * phase.sin(), gamma * phase.cos())
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Ring positions plus seeded headings and speeds; angular speeds start at 0.
/// Draw order per agent: heading, then speed.
pub fn ring_placement(n: usize, seed: u64, speed_range: (f64, f64), heading_range: (f64, f64)) -> Vec<AgentState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ring_positions(n)
        .into_iter()
        .map(|q| {
            let theta = draw(&mut rng, heading_range.0, heading_range.1);
            let v = draw(&mut rng, speed_range.0, speed_range.1);
            AgentState::new(q.x, q.y, theta, v, 0.0)
        })
        .collect()
}

/// A validated scenario with everything the simulation loop needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub potential: Potential,
    pub graph_params: GraphParams,
    pub gains: ControlGains,
    pub obstacles: Vec<Obstacle>,
    pub activation: Activation,
    pub initial: Vec<AgentState>,
    pub graph: ProximityGraph,
    pub budget: Budget,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Obstacle-free flocking with the reference tuning and ring placement.
    pub fn canonical_free_flock(seed: u64) -> Self {
        Scenario {
            name: "free-flock".into(),
            agents: 15,
            seed,
            dt_s: default_dt(),
            horizon_s: default_horizon(),
            r0_m: 1.0,
            a_m: 3.0,
            big_a_m: 6.0,
            big_r0_m: 8.0,
            u_max: 15.0,
            p1: None,
            p2: None,
            sensing_radius_m: None,
            eps1_m: default_eps1(),
            eps2_m: default_eps2(),
            l1: default_sat(),
            m1: default_sat(),
            knee1: None,
            l2: default_sat(),
            m2: default_sat(),
            knee2: None,
            k_theta: 1.5,
            theta_r_rad: FRAC_PI_2,
            theta_r_rate_radps: 0.0,
            placement: PlacementKind::Rings,
            speed_min_mps: 0.0,
            speed_max_mps: default_speed_max(),
            heading_min_rad: default_heading_min(),
            heading_max_rad: default_heading_max(),
            positions_m: Vec::new(),
            headings_rad: Vec::new(),
            speeds_mps: Vec::new(),
            angular_speeds_radps: Vec::new(),
            leader_index: None,
            leader_speed_mps: None,
            obstacles: Vec::new(),
            obstacle_engage_m: None,
            obstacle_release_m: None,
            obstacle_require_approach: true,
            obstacle_tangent: TangentBranch::Goal,
            control_hold: default_hold(),
            threads: default_threads(),
        }
    }

    /// Leader-driven flock passing a unit-radius obstacle at (12, -1).
    pub fn canonical_obstacle(seed: u64) -> Self {
        Scenario {
            name: "obstacle".into(),
            theta_r_rad: FRAC_PI_4,
            leader_index: Some(0),
            leader_speed_mps: Some(0.2),
            obstacles: vec![[12.0, -1.0, 1.0]],
            ..Self::canonical_free_flock(seed)
        }
    }

    pub fn geometry(&self) -> PotentialGeometry {
        PotentialGeometry {
            collision_radius: self.r0_m,
            dead_zone_start: self.a_m,
            dead_zone_end: self.big_a_m,
            cohesion_radius: self.big_r0_m,
        }
    }

    pub fn potential_params(&self) -> Result<PotentialParams> {
        match (self.p1, self.p2) {
            (Some(p1), Some(p2)) => {
                let p = PotentialParams { geometry: self.geometry(), u_max: self.u_max, p_repulsive: p1, p_attractive: p2 };
                p.validate()?;
                Ok(p)
            }
            (None, None) => calibrate(self.geometry(), self.u_max),
            _ => Err(Error::InvalidParameter("set both p1 and p2, or neither".into())),
        }
    }

    pub fn graph_params(&self) -> GraphParams {
        GraphParams {
            sensing_radius: self.sensing_radius_m.unwrap_or(self.big_r0_m),
            eps1: self.eps1_m,
            eps2: self.eps2_m,
        }
    }

    pub fn gains(&self) -> ControlGains {
        let reference = if self.theta_r_rate_radps == 0.0 {
            HeadingReference::Constant { theta: self.theta_r_rad }
        } else {
            HeadingReference::Ramp { theta0: self.theta_r_rad, rate: self.theta_r_rate_radps }
        };
        ControlGains {
            sigma1: SaturationParams { linear: self.l1, bound: self.m1, knee: self.knee1 },
            sigma2: SaturationParams { linear: self.l2, bound: self.m2, knee: self.knee2 },
            k_theta: self.k_theta,
            reference,
        }
    }

    pub fn activation(&self) -> Activation {
        Activation {
            engage_below: self.obstacle_engage_m.unwrap_or(self.a_m),
            release_at: self.obstacle_release_m.unwrap_or(self.a_m + self.r0_m),
            require_approach: self.obstacle_require_approach,
            branch: self.obstacle_tangent,
        }
    }

    pub fn obstacle_list(&self) -> Result<Vec<Obstacle>> {
        self.obstacles.iter().map(|&[cx, cy, r]| Obstacle::new(cx, cy, r)).collect()
    }

    /// Number of rows a full run produces, `floor(T/dt) + 1`.
    pub fn row_count(&self) -> usize {
        // Tolerate T/dt landing a hair under an integer.
        ((self.horizon_s / self.dt_s) * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn initial_states(&self) -> Result<Vec<AgentState>> {
        match self.placement {
            PlacementKind::Rings => Ok(ring_placement(
                self.agents,
                self.seed,
                (self.speed_min_mps, self.speed_max_mps),
                (self.heading_min_rad, self.heading_max_rad),
            )),
            PlacementKind::Explicit => {
                let n = self.agents;
                if self.positions_m.len() != n || self.headings_rad.len() != n || self.speeds_mps.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "explicit placement needs {n} positions, headings and speeds"
                    )));
                }
                if !self.angular_speeds_radps.is_empty() && self.angular_speeds_radps.len() != n {
                    return Err(Error::InvalidParameter(format!("expected {n} angular speeds")));
                }
                Ok((0..n)
                    .map(|i| {
                        let w = self.angular_speeds_radps.get(i).copied().unwrap_or(0.0);
                        let [x, y] = self.positions_m[i];
                        AgentState::new(x, y, self.headings_rad[i], self.speeds_mps[i], w)
                    })
                    .collect())
            }
        }
    }

    fn check_parameters(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("dt_s", self.dt_s)?;
        positive("horizon_s", self.horizon_s)?;
        if self.threads == 0 {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        if self.speed_min_mps > self.speed_max_mps || self.heading_min_rad > self.heading_max_rad {
            return Err(Error::InvalidParameter("initial ranges must have min <= max".into()));
        }
        let g = self.graph_params();
        g.validate()?;
        // Binding between graph and potential radii.
        if g.sensing_radius != self.big_r0_m {
            return Err(Error::InvalidParameter(format!("R_m ({}) must equal R0_m ({})", g.sensing_radius, self.big_r0_m)));
        }
        if !(self.r0_m <= g.eps1 && g.eps1 < self.a_m) {
            return Err(Error::InvalidParameter(format!("eps1_m must lie in [r0, a), got {}", g.eps1)));
        }
        if !(g.eps2 > 0.0 && g.eps2 <= self.big_r0_m - self.a_m) {
            return Err(Error::InvalidParameter(format!("eps2_m must lie in (0, R0 - a], got {}", g.eps2)));
        }
        self.gains().validate()?;
        match (self.leader_index, self.leader_speed_mps) {
            (Some(i), Some(v)) => {
                if i >= self.agents || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("leader index {i} / speed {v} invalid")));
                }
            }
            (None, None) => {}
            _ => return Err(Error::InvalidParameter("leader_index and leader_speed_mps go together".into())),
        }
        if !self.obstacles.is_empty() {
            self.activation().validate()?;
        }
        Ok(())
    }

    /// Full pre-run validation. Every failure is an [`Error::Rejected`] with a
    /// [`RejectReason`].
    pub fn prepare(&self) -> Result<Prepared> {
        let invalid = |e: Error| match e {
            Error::Rejected { .. } => e,
            other => reject(RejectReason::InvalidParameter, other.to_string()),
        };
        if self.agents < 2 {
            return Err(reject(RejectReason::TooFewAgents, format!("need at least 2 agents, got {}", self.agents)));
        }
        self.check_parameters().map_err(invalid)?;
        let params = self.potential_params().map_err(invalid)?;
        let potential = Potential::new(params).map_err(invalid)?;
        let obstacles = self.obstacle_list().map_err(invalid)?;
        let initial = self.initial_states().map_err(invalid)?;
        if let Some(bad) = initial.iter().position(|s| !s.is_finite()) {
            return Err(reject(RejectReason::InvalidParameter, format!("agent {bad} has a non-finite initial state")));
        }

        let positions: Vec<Vec2> = initial.iter().map(|s| s.q).collect();
        let graph_params = self.graph_params();
        let graph = ProximityGraph::init(&positions, graph_params).map_err(|e| match e {
            Error::Coincident { i, j } => reject(RejectReason::CoincidentPositions, format!("agents {i} and {j} coincide")),
            other => invalid(other),
        })?;
        if !graph.is_connected() {
            return Err(reject(
                RejectReason::DisconnectedInitialGraph,
                format!("initial graph has {} links and is not connected", graph.edge_count()),
            ));
        }
        for (k, obs) in obstacles.iter().enumerate() {
            if let Some(i) = positions.iter().position(|q| obs.clearance(q) <= 0.0) {
                return Err(reject(RejectReason::ObstacleOverlap, format!("agent {i} starts inside obstacle {k}")));
            }
        }
        let budget = v1_budget(&initial, &graph, &potential, &graph_params);
        if !budget.ok {
            return Err(reject(
                RejectReason::EnergyBudget,
                format!(
                    "V1(0) = {:.6}, V1max = {:.6}, limit = {:.6}, U_M = {}",
                    budget.v1_initial, budget.v1_max, budget.v1_initial_limit, params.u_max
                ),
            ));
        }
        Ok(Prepared {
            scenario: self.clone(),
            gains: self.gains(),
            activation: self.activation(),
            potential,
            graph_params,
            obstacles,
            initial,
            graph,
            budget,
        })
    }
}
