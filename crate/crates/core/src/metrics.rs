//! Energy functions, sum identities and the runtime invariant monitor.
//!
//! The monitor turns the closed-loop guarantees into per-step checks:
//! separation above the collision radius, linked pairs inside the cohesion
//! radius, a connected graph, bounded inputs, and (where the hypotheses
//! apply) non-increasing energies.

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::control::{ControlGains, HeadingSample, SaturationParams};
use crate::dynamics::{AgentState, ControlInput};
use crate::graph::{GraphParams, ProximityGraph};
use crate::potential::Potential;

/// `V1 = Σ_{edges} U(r_ij) + ½ Σ v_i²` (each edge is counted once, which is
/// the halved double sum over neighbor sets).
pub fn energy_v1(snapshot: &[AgentState], g: &ProximityGraph, pot: &Potential) -> f64 {
    let potential: f64 = g.edges().map(|(i, j)| pot.value((snapshot[i].q - snapshot[j].q).norm())).sum();
    potential + kinetic(snapshot)
}

fn kinetic(snapshot: &[AgentState]) -> f64 {
    0.5 * snapshot.iter().map(|s| s.v * s.v).sum::<f64>()
}

/// Outcome of the initial energy budget test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub v1_initial: f64,
    pub v1_max: f64,
    /// Largest admissible `V1(0)`.
    pub v1_initial_limit: f64,
    /// `U(R0 - eps2)`: the energy a newly created link can carry.
    pub link_energy: f64,
    pub ok: bool,
}

/// Checks `U_M > V1max` and `V1(0) <= V1max - (N-1)(N-2)/2 U(R0 - eps2)` with
/// `V1max = ½ Σ v(0)² + N(N-1)/2 U(R0 - eps2)`.
pub fn v1_budget(snapshot0: &[AgentState], g0: &ProximityGraph, pot: &Potential, graph: &GraphParams) -> Budget {
    let n = snapshot0.len() as f64;
    let link_energy = pot.value(pot.params().geometry.cohesion_radius - graph.eps2);
    let v1_max = kinetic(snapshot0) + n * (n - 1.0) / 2.0 * link_energy;
    let v1_initial_limit = v1_max - (n - 1.0) * (n - 2.0) / 2.0 * link_energy;
    let v1_initial = energy_v1(snapshot0, g0, pot);
    let ok = pot.params().u_max > v1_max && v1_initial <= v1_initial_limit;
    Budget { v1_initial, v1_max, v1_initial_limit, link_energy, ok }
}

/// Heading energy with `e_i = wrap(θ_i - θr)`, `ė_i = w_i - θr'`:
///
/// ```text
/// V2 = ½ Σ kθ/(n_i+1) e_i² + ½ Σ ė_i² + ¼ Σ_i Σ_{j∈N_i} kθ/(n_i+1) (θ_i - θ_j)²
/// ```
pub fn energy_v2(snapshot: &[AgentState], g: &ProximityGraph, gains: &ControlGains, reference: HeadingSample) -> f64 {
    let k = gains.k_theta;
    let mut v2 = 0.0;
    for (i, s) in snapshot.iter().enumerate() {
        let weight = k / (g.degree(i) + 1) as f64;
        let e = angle::diff(s.theta, reference.theta);
        let e_dot = s.w - reference.rate;
        v2 += 0.5 * weight * e * e + 0.5 * e_dot * e_dot;
        for &j in g.neighbors(i) {
            let d = angle::diff(s.theta, snapshot[j].theta);
            v2 += 0.25 * weight * d * d;
        }
    }
    v2
}

/// Degree-weighted heading energy
///
/// ```text
/// W = ½ Σ (n_i+1)/kθ ė_i² + ½ Σ e_i² + ¼ Σ_i Σ_{j∈N_i} (θ_i - θ_j)²
/// ```
///
/// Under the heading law on a fixed graph `dW/dt = -Σ (n_i+1)/kθ ė_i σ2(ė_i) ≤ 0`
/// for any graph. `V2` only has that property when linked agents share a
/// degree; on a d-regular graph `V2 = kθ/(d+1) W`.
pub fn heading_energy_weighted(snapshot: &[AgentState], g: &ProximityGraph, gains: &ControlGains, reference: HeadingSample) -> f64 {
    let k = gains.k_theta;
    let mut w = 0.0;
    for (i, s) in snapshot.iter().enumerate() {
        let e = angle::diff(s.theta, reference.theta);
        let e_dot = s.w - reference.rate;
        w += 0.5 * (g.degree(i) + 1) as f64 / k * e_dot * e_dot + 0.5 * e * e;
        for &j in g.neighbors(i) {
            let d = angle::diff(s.theta, snapshot[j].theta);
            w += 0.25 * d * d;
        }
    }
    w
}

/// Both sides of the neighbor-sum identity for an odd `sigma`:
/// `(½ Σ_i Σ_{j∈N_i} (a_i - a_j) σ(b_i - b_j),  Σ_i Σ_{j∈N_i} a_i σ(b_i - b_j))`.
pub fn sum_identity_sides<F: Fn(f64) -> f64>(g: &ProximityGraph, a: &[f64], b: &[f64], sigma: F) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..g.len() {
        for &j in g.neighbors(i) {
            let s = sigma(b[i] - b[j]);
            lhs += (a[i] - a[j]) * s;
            rhs += a[i] * s;
        }
    }
    (0.5 * lhs, rhs)
}

/// True when the two sides of [`sum_identity_sides`] agree to `tol`.
pub fn check_sum_identity<F: Fn(f64) -> f64>(g: &ProximityGraph, a: &[f64], b: &[f64], sigma: F, tol: f64) -> bool {
    let (l, r) = sum_identity_sides(g, a, b, sigma);
    (l - r).abs() <= tol
}

/// `(σ(x) - σ(y)) σ(x - y)`, nonnegative for any odd nondecreasing `σ`.
pub fn saturation_product(sat: &SaturationParams, x: f64, y: f64) -> f64 {
    (sat.apply(x) - sat.apply(y)) * sat.apply(x - y)
}

pub fn speed_spread(snapshot: &[AgentState]) -> f64 {
    let (lo, hi) = snapshot.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.v), hi.max(s.v)));
    if snapshot.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Largest wrapped heading difference over all pairs.
pub fn heading_spread(snapshot: &[AgentState]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in snapshot.iter().enumerate() {
        for b in &snapshot[i + 1..] {
            worst = worst.max(angle::diff(a.theta, b.theta).abs());
        }
    }
    worst
}

/// Largest wrapped deviation from `theta_ref`.
pub fn heading_error(snapshot: &[AgentState], theta_ref: f64) -> f64 {
    snapshot.iter().map(|s| angle::diff(s.theta, theta_ref).abs()).fold(0.0, f64::max)
}

pub fn max_angular_speed(snapshot: &[AgentState]) -> f64 {
    snapshot.iter().map(|s| s.w.abs()).fold(0.0, f64::max)
}

/// Closest pair `(distance, i, j)`; infinite for fewer than two agents.
pub fn closest_pair(snapshot: &[AgentState]) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..snapshot.len() {
        for j in i + 1..snapshot.len() {
            let d = (snapshot[i].q - snapshot[j].q).norm();
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    best
}

/// Farthest linked pair of `g`, evaluated at `snapshot`.
pub fn farthest_link(snapshot: &[AgentState], g: &ProximityGraph) -> Option<(f64, usize, usize)> {
    g.edges()
        .map(|(i, j)| ((snapshot[i].q - snapshot[j].q).norm(), i, j))
        .fold(None, |best, c| match best {
            Some(b) if b.0 >= c.0 => Some(b),
            _ => Some(c),
        })
}

/// Quantities recorded every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub t: f64,
    pub v1: f64,
    pub v2: f64,
    /// [`heading_energy_weighted`].
    pub w2: f64,
    pub d_min: f64,
    pub speed_spread: f64,
    pub heading_spread: f64,
    pub heading_error: f64,
    pub w_max_abs: f64,
    pub u_max_abs: f64,
    pub tau_max_abs: f64,
    pub connected: bool,
    pub edges: usize,
    pub obstacle_clearance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Collision { i: usize, j: usize, distance: f64 },
    CohesionLost { i: usize, j: usize, distance: f64 },
    EnergyIncrease { from: f64, to: f64 },
    EnergyJump { jump: f64, allowed: f64 },
    HeadingEnergyIncrease { from: f64, to: f64 },
    Disconnected,
    SpeedInputBound { agent: usize, value: f64, bound: f64 },
    HeadingInputBound { agent: usize, value: f64, bound: f64 },
    ObstacleContact { agent: usize, clearance: f64 },
}

impl ViolationKind {
    pub fn label(&self) -> &'static str {
        match self {
            ViolationKind::Collision { .. } => "collision",
            ViolationKind::CohesionLost { .. } => "cohesion_lost",
            ViolationKind::EnergyIncrease { .. } => "energy_increase",
            ViolationKind::EnergyJump { .. } => "energy_jump",
            ViolationKind::HeadingEnergyIncrease { .. } => "heading_energy_increase",
            ViolationKind::Disconnected => "disconnected",
            ViolationKind::SpeedInputBound { .. } => "speed_input_bound",
            ViolationKind::HeadingInputBound { .. } => "heading_input_bound",
            ViolationKind::ObstacleContact { .. } => "obstacle_contact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub t: f64,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

/// Relative tolerance for the discrete energy-descent checks.
pub const DESCENT_REL_TOL: f64 = 1e-6;

/// Absolute slack on the link-creation energy jump.
pub const JUMP_ABS_TOL: f64 = 1e-9;

pub fn descent_tolerance(previous: f64) -> f64 {
    DESCENT_REL_TOL * (1.0 + previous.abs())
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub potential: Potential,
    pub graph: GraphParams,
    pub gains: ControlGains,
    /// Check `V1` descent between switches (off for leader runs).
    pub check_v1: bool,
    /// Check `V2` descent after the last switch (obstacle-free runs only).
    pub check_v2: bool,
}

/// Everything the monitor needs about one step.
#[derive(Debug, Clone, Copy)]
pub struct StepObservation<'a> {
    pub step: usize,
    pub t: f64,
    pub states: &'a [AgentState],
    pub controls: &'a [ControlInput],
    /// Graph after this step's update.
    pub graph: &'a ProximityGraph,
    /// `V1` of `states` under the previous step's edge set.
    pub v1_before_switch: f64,
    /// Farthest pair linked before this step's update, at `states`.
    pub farthest_prior_link: Option<(f64, usize, usize)>,
    pub edges_added: usize,
    pub u_bounds: &'a [f64],
    pub tau_bounds: &'a [f64],
    /// Leader or obstacle laws acted over the interval ending here.
    pub descent_exempt: bool,
    /// Smallest robot clearance to any obstacle, with the agent index.
    pub obstacle_clearance: Option<(f64, usize)>,
    pub reference: HeadingSample,
}

/// Summary written at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub certified: bool,
    pub violations: Vec<Violation>,
    pub steps_observed: usize,
    pub d_min: f64,
    pub u_max_abs: f64,
    pub tau_max_abs: f64,
    pub min_obstacle_clearance: Option<f64>,
    /// Links at t = 0.
    pub initial_edges: usize,
    pub edges_added: usize,
    pub edges_removed: usize,
    pub switch_count: usize,
    pub final_switch_time: Option<f64>,
    pub final_edges: usize,
    pub budget: Option<Budget>,
    #[serde(skip)]
    pub steps: Vec<StepMetrics>,
}

impl MonitorReport {
    pub fn count(&self, label: &str) -> usize {
        self.violations.iter().filter(|v| v.kind.label() == label).count()
    }
}

#[derive(Debug, Clone)]
pub struct Monitor {
    cfg: MonitorConfig,
    steps: Vec<StepMetrics>,
    violations: Vec<Violation>,
    initial_edges: Option<usize>,
    prev_v1: Option<f64>,
    link_energy: f64,
}

impl Monitor {
    pub fn new(cfg: MonitorConfig) -> Self {
        let link_energy = cfg.potential.value(cfg.potential.params().geometry.cohesion_radius - cfg.graph.eps2);
        Self { cfg, steps: Vec::new(), violations: Vec::new(), initial_edges: None, prev_v1: None, link_energy }
    }

    fn flag(&mut self, step: usize, t: f64, kind: ViolationKind) {
        self.violations.push(Violation { step, t, kind });
    }

    /// Records one step and returns its metrics.
    pub fn observe(&mut self, obs: &StepObservation<'_>) -> StepMetrics {
        let geometry = self.cfg.potential.params().geometry;
        let (step, t) = (obs.step, obs.t);
        if self.initial_edges.is_none() {
            self.initial_edges = Some(obs.graph.edge_count());
        }

        let v1 = energy_v1(obs.states, obs.graph, &self.cfg.potential);
        let v2 = energy_v2(obs.states, obs.graph, &self.cfg.gains, obs.reference);
        let w2 = heading_energy_weighted(obs.states, obs.graph, &self.cfg.gains, obs.reference);
        let (d_min, ci, cj) = closest_pair(obs.states);
        let connected = obs.graph.is_connected();
        let u_max_abs = obs.controls.iter().map(|c| c.u.abs()).fold(0.0, f64::max);
        let tau_max_abs = obs.controls.iter().map(|c| c.tau.abs()).fold(0.0, f64::max);

        if d_min <= geometry.collision_radius {
            self.flag(step, t, ViolationKind::Collision { i: ci, j: cj, distance: d_min });
        }
        if let Some((d, i, j)) = obs.farthest_prior_link {
            if d >= geometry.cohesion_radius {
                self.flag(step, t, ViolationKind::CohesionLost { i, j, distance: d });
            }
        }
        if self.cfg.check_v1 && !obs.descent_exempt {
            if let Some(prev) = self.prev_v1 {
                if obs.v1_before_switch - prev > descent_tolerance(prev) {
                    self.flag(step, t, ViolationKind::EnergyIncrease { from: prev, to: obs.v1_before_switch });
                }
                let allowed = obs.edges_added as f64 * self.link_energy + JUMP_ABS_TOL;
                let jump = v1 - obs.v1_before_switch;
                if jump > allowed {
                    self.flag(step, t, ViolationKind::EnergyJump { jump, allowed });
                }
            }
        }
        self.prev_v1 = Some(v1);
        if !connected {
            self.flag(step, t, ViolationKind::Disconnected);
        }
        for (agent, (c, (&ub, &tb))) in obs.controls.iter().zip(obs.u_bounds.iter().zip(obs.tau_bounds)).enumerate() {
            if c.u.abs() > ub {
                self.flag(step, t, ViolationKind::SpeedInputBound { agent, value: c.u, bound: ub });
            }
            if c.tau.abs() > tb {
                self.flag(step, t, ViolationKind::HeadingInputBound { agent, value: c.tau, bound: tb });
            }
        }
        if let Some((clearance, agent)) = obs.obstacle_clearance {
            if clearance <= 0.0 {
                self.flag(step, t, ViolationKind::ObstacleContact { agent, clearance });
            }
        }

        let m = StepMetrics {
            step,
            t,
            v1,
            v2,
            w2,
            d_min,
            speed_spread: speed_spread(obs.states),
            heading_spread: heading_spread(obs.states),
            heading_error: heading_error(obs.states, obs.reference.theta),
            w_max_abs: max_angular_speed(obs.states),
            u_max_abs,
            tau_max_abs,
            connected,
            edges: obs.graph.edge_count(),
            obstacle_clearance: obs.obstacle_clearance.map(|c| c.0),
        };
        self.steps.push(m);
        m
    }

    /// Closes the run: applies the after-last-switch heading-energy check
    /// and assembles the report.
    pub fn finish(mut self, g: &ProximityGraph, budget: Option<Budget>) -> MonitorReport {
        let log = g.switch_log();
        let final_switch_time = log.last().map(|e| e.t);
        if self.cfg.check_v2 {
            let settle = final_switch_time.unwrap_or(f64::NEG_INFINITY);
            let increases: Vec<_> = self
                .steps
                .windows(2)
                .filter(|w| w[0].t >= settle && w[1].w2 - w[0].w2 > descent_tolerance(w[0].w2))
                .map(|w| (w[1].step, w[1].t, w[0].w2, w[1].w2))
                .collect();
            for (step, t, from, to) in increases {
                self.flag(step, t, ViolationKind::HeadingEnergyIncrease { from, to });
            }
            self.violations.sort_by_key(|v| v.step);
        }
        let fold_max = |f: fn(&StepMetrics) -> f64| self.steps.iter().map(f).fold(0.0, f64::max);
        let u_max_abs = fold_max(|m| m.u_max_abs);
        let tau_max_abs = fold_max(|m| m.tau_max_abs);
        let d_min = self.steps.iter().map(|m| m.d_min).fold(f64::INFINITY, f64::min);
        let min_obstacle_clearance =
            self.steps.iter().filter_map(|m| m.obstacle_clearance).fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))));
        MonitorReport {
            certified: self.violations.is_empty(),
            steps_observed: self.steps.len(),
            d_min,
            u_max_abs,
            tau_max_abs,
            min_obstacle_clearance,
            initial_edges: self.initial_edges.unwrap_or(0),
            edges_added: log.iter().map(|e| e.added.len()).sum(),
            edges_removed: log.iter().map(|e| e.removed.len()).sum(),
            switch_count: log.len(),
            final_switch_time,
            final_edges: g.edge_count(),
            budget,
            violations: self.violations,
            steps: self.steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::HeadingReference;
    use crate::potential::{reference_geometry, REFERENCE_U_MAX};

    fn pot() -> Potential {
        Potential::calibrated(reference_geometry(), REFERENCE_U_MAX).unwrap()
    }

    fn gp() -> GraphParams {
        GraphParams { sensing_radius: 8.0, eps1: 1.0, eps2: 3.0 }
    }

    fn gains() -> ControlGains {
        ControlGains {
            sigma1: SaturationParams::clamp(0.5),
            sigma2: SaturationParams::clamp(0.5),
            k_theta: 1.5,
            reference: HeadingReference::Constant { theta: 0.0 },
        }
    }

    fn agent(x: f64, y: f64, v: f64) -> AgentState {
        AgentState::new(x, y, 0.0, v, 0.0)
    }

    #[test]
    fn v1_examples() {
        let pot = pot();
        let one = vec![agent(0.0, 0.0, 2.0)];
        let g = ProximityGraph::from_edges(1, &[], gp());
        assert_eq!(energy_v1(&one, &g, &pot), 2.0);

        let two = vec![agent(0.0, 0.0, 0.0), agent(4.5, 0.0, 0.0)];
        let g = ProximityGraph::from_edges(2, &[(0, 1)], gp());
        assert_eq!(energy_v1(&two, &g, &pot), 0.0);

        // U(1.5) from 40-digit quadrature.
        let close = vec![agent(0.0, 0.0, 0.0), agent(1.5, 0.0, 0.0)];
        assert!((energy_v1(&close, &g, &pot) - 13.155_490_750_840_064).abs() < 1e-8);
    }

    #[test]
    fn budget_examples() {
        let pot = pot();
        // R0 - eps2 = 5 lies in the dead zone.
        let s = vec![agent(0.0, 0.0, 1.0), agent(4.0, 0.0, 2.0)];
        let g = ProximityGraph::init(&[s[0].q, s[1].q], gp()).unwrap();
        let b = v1_budget(&s, &g, &pot, &gp());
        assert_eq!(b.link_energy, 0.0);
        assert_eq!(b.v1_max, 2.5);
        assert!(b.ok);

        let still = vec![agent(0.0, 0.0, 0.0), agent(4.0, 0.0, 0.0)];
        let b = v1_budget(&still, &g, &pot, &gp());
        assert_eq!((b.v1_max, b.v1_initial), (0.0, 0.0));
        assert!(b.ok);
    }

    #[test]
    fn budget_rejects_excess_kinetic_energy() {
        let pot = pot();
        // Σ v² = 40 -> V1max = 20 > U_M = 15.
        let s = vec![agent(0.0, 0.0, 2.0), agent(4.0, 0.0, 6.0)];
        let g = ProximityGraph::init(&[s[0].q, s[1].q], gp()).unwrap();
        let b = v1_budget(&s, &g, &pot, &gp());
        assert_eq!(b.v1_max, 20.0);
        assert!(!b.ok);
    }

    #[test]
    fn v2_examples() {
        let g = ProximityGraph::from_edges(1, &[], gp());
        let s = vec![AgentState::new(0.0, 0.0, 0.2, 0.0, 0.0)];
        let v2 = energy_v2(&s, &g, &gains(), HeadingSample::fixed(0.0));
        assert!((v2 - 0.03).abs() < 1e-15);

        let g = ProximityGraph::from_edges(2, &[(0, 1)], gp());
        let s = vec![AgentState::new(0.0, 0.0, 0.4, 0.1, 0.1), AgentState::new(4.0, 0.0, 0.4, 0.0, 0.1)];
        let sample = HeadingSample { theta: 0.4, rate: 0.1, accel: 0.0 };
        assert_eq!(energy_v2(&s, &g, &gains(), sample), 0.0);
    }

    #[test]
    fn pair_sum_identities_small_cases() {
        let g = ProximityGraph::from_edges(2, &[], gp());
        assert_eq!(sum_identity_sides(&g, &[1.0, 2.0], &[3.0, 4.0], f64::sin), (0.0, 0.0));

        let edges: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
        let g = ProximityGraph::from_edges(4, &edges, gp());
        let a = [0.3, -1.2, 0.7, 2.0];
        let b = [1.0, 0.25, -0.5, 0.9];
        let sat = SaturationParams::clamp(0.5);
        assert!(check_sum_identity(&g, &a, &b, |x| sat.apply(x), 1e-12));
        assert!(check_sum_identity(&g, &a, &b, |x| x, 1e-12));
        // Not odd: the identity fails.
        assert!(!check_sum_identity(&g, &a, &b, |x| x * x, 1e-12));
    }

    #[test]
    fn saturation_product_nonnegative_edge_values() {
        let sat = SaturationParams::clamp(0.5);
        assert!(saturation_product(&sat, 0.3, -0.3) >= 0.0);
        assert_eq!(saturation_product(&sat, 5.0, 4.0), 0.0);
    }

    #[test]
    fn spreads() {
        let s = vec![
            AgentState::new(0.0, 0.0, 3.0, 0.1, 0.0),
            AgentState::new(5.0, 0.0, -3.0, 0.4, -0.2),
        ];
        assert!((speed_spread(&s) - 0.3).abs() < 1e-15);
        assert!((heading_spread(&s) - (2.0 * std::f64::consts::PI - 6.0)).abs() < 1e-12);
        assert_eq!(max_angular_speed(&s), 0.2);
        assert_eq!(closest_pair(&s), (5.0, 0, 1));
    }
}
