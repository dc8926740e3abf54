//! Unicycle double-integrator model and a fixed-step RK4 integrator.
//!
//! ```text
//! q' = v e(theta),  theta' = w,  v' = u,  w' = tau
//! ```

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub q: Vec2,
    /// Heading, kept in `(-π, π]` between steps.
    pub theta: f64,
    /// Linear speed.
    pub v: f64,
    /// Angular speed.
    pub w: f64,
}

impl AgentState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, w: f64) -> Self {
        Self { q: Vec2::new(x, y), theta: angle::wrap(theta), v, w }
    }

    /// Unit heading vector `e(theta)`.
    pub fn heading(&self) -> Vec2 {
        unit(self.theta)
    }

    pub fn velocity(&self) -> Vec2 {
        self.heading() * self.v
    }

    pub fn is_finite(&self) -> bool {
        self.q.x.is_finite() && self.q.y.is_finite() && self.theta.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

pub fn unit(theta: f64) -> Vec2 {
    Vec2::new(theta.cos(), theta.sin())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear acceleration.
    pub u: f64,
    /// Angular acceleration.
    pub tau: f64,
}

/// Time derivative of one agent's state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub q: Vec2,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
}

pub fn derivative(s: &AgentState, c: &ControlInput) -> StateRate {
    StateRate { q: s.heading() * s.v, theta: s.w, v: c.u, w: c.tau }
}

fn advance(s: &AgentState, k: &StateRate, h: f64) -> AgentState {
    // Heading is left unwrapped inside a step.
    AgentState { q: s.q + k.q * h, theta: s.theta + k.theta * h, v: s.v + k.v * h, w: s.w + k.w * h }
}

fn combine(s: &AgentState, k: [&StateRate; 4], dt: f64) -> AgentState {
    let [k1, k2, k3, k4] = k;
    let q = (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) / 6.0;
    let th = (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta) / 6.0;
    let v = (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v) / 6.0;
    let w = (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w) / 6.0;
    AgentState { q: s.q + q * dt, theta: angle::wrap(s.theta + th * dt), v: s.v + v * dt, w: s.w + w * dt }
}

fn check_finite(states: &[AgentState], step: usize) -> Result<()> {
    if states.iter().all(AgentState::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// One RK4 step with the controls held constant over the step.
pub fn step(states: &[AgentState], controls: &[ControlInput], dt: f64, step_index: usize) -> Result<Vec<AgentState>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if states.len() != controls.len() {
        return Err(Error::InvalidParameter(format!(
            "{} states but {} controls",
            states.len(),
            controls.len()
        )));
    }
    let next: Vec<AgentState> = states
        .iter()
        .zip(controls)
        .map(|(s, c)| {
            let k1 = derivative(s, c);
            let k2 = derivative(&advance(s, &k1, 0.5 * dt), c);
            let k3 = derivative(&advance(s, &k2, 0.5 * dt), c);
            let k4 = derivative(&advance(s, &k3, dt), c);
            combine(s, [&k1, &k2, &k3, &k4], dt)
        })
        .collect();
    check_finite(&next, step_index)?;
    Ok(next)
}

/// One RK4 step of the closed loop: `feedback` is evaluated on every stage,
/// at `t`, `t + dt/2` and `t + dt`.
pub fn step_closed_loop<F>(states: &[AgentState], t: f64, dt: f64, step_index: usize, mut feedback: F) -> Result<Vec<AgentState>>
where
    F: FnMut(&[AgentState], f64) -> Result<Vec<ControlInput>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let rates = |xs: &[AgentState], cs: &[ControlInput]| -> Vec<StateRate> {
        xs.iter().zip(cs).map(|(s, c)| derivative(s, c)).collect()
    };
    let shifted = |k: &[StateRate], h: f64| -> Vec<AgentState> {
        states.iter().zip(k).map(|(s, r)| advance(s, r, h)).collect()
    };

    let k1 = rates(states, &feedback(states, t)?);
    let s2 = shifted(&k1, 0.5 * dt);
    let k2 = rates(&s2, &feedback(&s2, t + 0.5 * dt)?);
    let s3 = shifted(&k2, 0.5 * dt);
    let k3 = rates(&s3, &feedback(&s3, t + 0.5 * dt)?);
    let s4 = shifted(&k3, dt);
    let k4 = rates(&s4, &feedback(&s4, t + dt)?);

    let next: Vec<AgentState> = (0..states.len())
        .map(|i| combine(&states[i], [&k1[i], &k2[i], &k3[i], &k4[i]], dt))
        .collect();
    check_finite(&next, step_index)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn zero() -> ControlInput {
        ControlInput::default()
    }

    #[test]
    fn derivative_cases() {
        let d = derivative(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0), &zero());
        assert_eq!(d.q, Vec2::new(1.0, 0.0));
        assert_eq!((d.theta, d.v, d.w), (0.0, 0.0, 0.0));

        let d = derivative(&AgentState::new(0.0, 0.0, FRAC_PI_2, 2.0, 0.0), &zero());
        assert!(d.q.x.abs() < 1e-12 && (d.q.y - 2.0).abs() < 1e-12);

        let d = derivative(&AgentState::new(0.0, 0.0, 0.0, 0.0, 0.0), &ControlInput { u: 0.3, tau: -0.1 });
        assert_eq!((d.v, d.w), (0.3, -0.1));
    }

    #[test]
    fn straight_line_step_is_exact() {
        let s = [AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0)];
        let next = step(&s, &[zero()], 0.01, 0).unwrap();
        assert_eq!(next[0].q, Vec2::new(0.01, 0.0));
        assert_eq!(next[0].v, 1.0);
    }

    #[test]
    fn pure_rotation_step() {
        let s = [AgentState::new(0.0, 0.0, 0.0, 0.0, 1.0)];
        let next = step(&s, &[zero()], 0.01, 0).unwrap();
        assert!((next[0].theta - 0.01).abs() < 1e-15);
        assert_eq!(next[0].q, Vec2::zeros());
    }

    #[test]
    fn zero_input_conserves_rates() {
        let mut s = vec![AgentState::new(1.0, -2.0, 0.3, 0.7, -0.4)];
        for k in 0..500 {
            s = step(&s, &[zero()], 0.01, k).unwrap();
        }
        assert_eq!(s[0].v, 0.7);
        assert_eq!(s[0].w, -0.4);
    }

    #[test]
    fn heading_wrapped_after_step() {
        let s = [AgentState::new(0.0, 0.0, PI - 0.001, 0.0, 1.0)];
        let next = step(&s, &[zero()], 0.01, 0).unwrap();
        assert!(next[0].theta < 0.0 && next[0].theta > -PI);
    }

    #[test]
    fn mismatched_lengths_and_bad_dt() {
        let s = [AgentState::new(0.0, 0.0, 0.0, 0.0, 0.0)];
        assert!(step(&s, &[], 0.01, 0).is_err());
        assert!(step(&s, &[zero()], 0.0, 0).is_err());
    }

    #[test]
    fn non_finite_reports_step() {
        let s = [AgentState::new(0.0, 0.0, 0.0, 0.0, 0.0)];
        let err = step(&s, &[ControlInput { u: f64::NAN, tau: 0.0 }], 0.01, 42).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 42 }));
    }

    #[test]
    fn closed_loop_matches_open_loop_for_constant_feedback() {
        let s = vec![AgentState::new(0.5, 0.1, 0.2, 0.3, 0.4), AgentState::new(-1.0, 2.0, -2.0, 1.0, 0.0)];
        let c = vec![ControlInput { u: 0.1, tau: -0.2 }, ControlInput { u: -0.3, tau: 0.05 }];
        let open = step(&s, &c, 0.05, 0).unwrap();
        let closed = step_closed_loop(&s, 0.0, 0.05, 0, |_, _| Ok(c.clone())).unwrap();
        assert_eq!(open, closed);
    }

    #[test]
    fn circle_closes_after_one_period() {
        let n = 2000;
        let dt = TAU / n as f64;
        let mut s = vec![AgentState::new(0.0, 0.0, 0.0, 1.0, 1.0)];
        for k in 0..n {
            s = step(&s, &[zero()], dt, k).unwrap();
        }
        assert!(s[0].q.norm() < 1e-8, "closure error {}", s[0].q.norm());
    }
}
