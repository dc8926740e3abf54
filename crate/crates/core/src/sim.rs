//! Simulation loop.
//!
//! Per step: update the graph from the current positions, refresh obstacle
//! engagement, compute every agent's input from the same snapshot, record
//! the step with the monitor, then integrate.

use rayon::prelude::*;

use crate::control::{self, heading_bound, speed_bound, HeadingSample};
use crate::dynamics::{self, AgentState, ControlInput};
use crate::graph::ProximityGraph;
use crate::metrics::{energy_v1, farthest_link, Monitor, MonitorConfig, StepObservation};
use crate::obstacles::{self, Engagement};
use crate::scenario::{ControlHold, Prepared, Scenario};
use crate::trace::{Trace, TraceMeta, TraceRow};
use crate::{Error, Result};

/// Which law an agent follows during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Flock,
    Leader,
    Obstacle,
}

/// Read-only inputs shared by all control evaluations within a step.
struct Laws<'a> {
    prep: &'a Prepared,
    leader: Option<(usize, f64)>,
}

impl Laws<'_> {
    fn mode(&self, i: usize, engagement: &Engagement) -> Mode {
        if engagement.is_engaged(i) {
            Mode::Obstacle
        } else if self.leader.is_some_and(|(l, _)| l == i) {
            Mode::Leader
        } else {
            Mode::Flock
        }
    }

    fn reference(&self, t: f64) -> HeadingSample {
        self.prep.gains.reference.at(t)
    }

    fn agent_input(&self, i: usize, states: &[AgentState], g: &ProximityGraph, engagement: &Engagement, t: f64) -> Result<ControlInput> {
        let p = self.prep;
        match self.mode(i, engagement) {
            Mode::Obstacle => {
                let virtuals = obstacles::virtual_agents_for(
                    &states[i],
                    &p.obstacles,
                    engagement.engaged(i),
                    p.activation.branch,
                    self.reference(t).theta,
                )?;
                Ok(ControlInput {
                    u: obstacles::obstacle_speed_control(i, states, g, &virtuals, &p.potential, &p.gains)?,
                    tau: obstacles::obstacle_heading_control(&states[i], &virtuals, &p.gains),
                })
            }
            Mode::Leader => {
                let (_, v_ref) = self.leader.expect("leader mode without leader");
                Ok(ControlInput {
                    u: control::leader_speed_control(states[i].v, v_ref, &p.gains),
                    tau: control::orientation_control(i, states, g, &p.gains, self.reference(t)),
                })
            }
            Mode::Flock => Ok(ControlInput {
                u: control::speed_control(i, states, g, &p.potential, &p.gains)?,
                tau: control::orientation_control(i, states, g, &p.gains, self.reference(t)),
            }),
        }
    }

    fn inputs(&self, states: &[AgentState], g: &ProximityGraph, engagement: &Engagement, t: f64, parallel: bool) -> Result<Vec<ControlInput>> {
        if parallel {
            (0..states.len()).into_par_iter().map(|i| self.agent_input(i, states, g, engagement, t)).collect()
        } else {
            (0..states.len()).map(|i| self.agent_input(i, states, g, engagement, t)).collect()
        }
    }

    /// Analytic input bounds for the current modes.
    fn bounds(&self, g: &ProximityGraph, engagement: &Engagement) -> (Vec<f64>, Vec<f64>) {
        let p = self.prep;
        let n = g.len();
        let k = p.gains.k_theta;
        (0..n)
            .map(|i| match self.mode(i, engagement) {
                Mode::Flock => (speed_bound(n - 1, &p.potential, &p.gains), heading_bound(&p.gains)),
                Mode::Leader => (p.gains.sigma1.bound, heading_bound(&p.gains)),
                Mode::Obstacle => {
                    let n_obs = engagement.engaged(i).count() as f64;
                    let u = speed_bound(n - 1, &p.potential, &p.gains) + n_obs * p.potential.params().force_bound();
                    // n_obs + 1 wrapped terms over the n_obs + 1 denominator.
                    (u, p.gains.sigma2.bound + k * std::f64::consts::PI)
                }
            })
            .unzip()
    }
}

/// A run that stopped early. The trace holds every row recorded before the
/// failure.
#[derive(Debug)]
pub struct Aborted {
    pub trace: Trace,
    pub cause: Error,
}

/// Runs a scenario to its horizon.
pub fn run(s: &Scenario) -> Result<Trace> {
    let prep = s.prepare()?;
    match run_prepared(&prep) {
        Ok(trace) => Ok(trace),
        Err(aborted) => Err(aborted.cause),
    }
}

/// Runs an already validated scenario. On failure the partial trace is kept.
pub fn run_prepared(prep: &Prepared) -> std::result::Result<Trace, Box<Aborted>> {
    let s = &prep.scenario;
    let threads = s.threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| simulate(prep, threads > 1))
}

fn simulate(prep: &Prepared, parallel: bool) -> std::result::Result<Trace, Box<Aborted>> {
    let s = &prep.scenario;
    let laws = Laws { prep, leader: s.leader_index.zip(s.leader_speed_mps) };
    let mut monitor = Monitor::new(MonitorConfig {
        potential: prep.potential.clone(),
        graph: prep.graph_params,
        gains: prep.gains,
        check_v1: laws.leader.is_none(),
        check_v2: prep.obstacles.is_empty(),
    });
    let mut graph = prep.graph.clone();
    let mut engagement = Engagement::new(s.agents, prep.obstacles.len());
    let mut states = prep.initial.clone();
    let rows_total = s.row_count();
    let mut rows: Vec<TraceRow> = Vec::with_capacity(rows_total);
    let mut prev_engaged = false;

    let result = (|| -> Result<()> {
        for k in 0..rows_total {
            let t = k as f64 * s.dt_s;
            let (v1_before, prior_link, added, removed) = if k == 0 {
                (energy_v1(&states, &graph, &prep.potential), farthest_link(&states, &graph), 0, 0)
            } else {
                let v1_before = energy_v1(&states, &graph, &prep.potential);
                let prior = farthest_link(&states, &graph);
                let positions: Vec<_> = states.iter().map(|a| a.q).collect();
                let (added, removed) = graph.update(&positions, t).map_or((0, 0), |e| (e.added.len(), e.removed.len()));
                (v1_before, prior, added, removed)
            };
            engagement.update(&states, &prep.obstacles, &prep.activation);
            let engaged_now = engagement.engaged_agents() > 0;

            let controls = laws.inputs(&states, &graph, &engagement, t, parallel)?;
            let (u_bounds, tau_bounds) = laws.bounds(&graph, &engagement);
            let clearance = prep
                .obstacles
                .iter()
                .flat_map(|o| states.iter().enumerate().map(move |(i, a)| (o.clearance(&a.q), i)))
                .fold(None, |best: Option<(f64, usize)>, c| match best {
                    Some(b) if b.0 <= c.0 => Some(b),
                    _ => Some(c),
                });
            let metrics = monitor.observe(&StepObservation {
                step: k,
                t,
                states: &states,
                controls: &controls,
                graph: &graph,
                v1_before_switch: v1_before,
                farthest_prior_link: prior_link,
                edges_added: added,
                u_bounds: &u_bounds,
                tau_bounds: &tau_bounds,
                descent_exempt: prev_engaged || engaged_now,
                obstacle_clearance: clearance,
                reference: laws.reference(t),
            });
            rows.push(TraceRow::new(t, &states, &controls, &metrics, added, removed, engagement.engaged_agents()));
            prev_engaged = engaged_now;

            if k + 1 == rows_total {
                break;
            }
            states = match s.control_hold {
                ControlHold::Zoh => dynamics::step(&states, &controls, s.dt_s, k)?,
                ControlHold::Stagewise => dynamics::step_closed_loop(&states, t, s.dt_s, k, |xs, tt| {
                    laws.inputs(xs, &graph, &engagement, tt, parallel)
                })?,
            };
        }
        Ok(())
    })();

    let report = monitor.finish(&graph, Some(prep.budget));
    let trace = Trace { meta: TraceMeta::new(prep, graph.switch_log().to_vec(), report), rows };
    match result {
        Ok(()) => Ok(trace),
        Err(cause) => Err(Box::new(Aborted { trace, cause })),
    }
}
