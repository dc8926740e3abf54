//! Checks shared by the property tests and the acceptance suite. Each
//! returns a short detail line on success and the first failure otherwise.

#![allow(dead_code)]

use flocksim_core::control::SaturationParams;
use flocksim_core::dynamics::{self, AgentState, ControlInput};
use flocksim_core::graph::{GraphParams, ProximityGraph};
use flocksim_core::metrics::{saturation_product, sum_identity_sides};
use flocksim_core::potential::{reference_geometry, Potential, REFERENCE_U_MAX};
use flocksim_core::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

const GRAPH_PARAMS: GraphParams = GraphParams { sensing_radius: 8.0, eps1: 1.0, eps2: 3.0 };

pub fn reference_potential() -> Potential {
    Potential::calibrated(reference_geometry(), REFERENCE_U_MAX).expect("reference potential")
}

fn random_graph(rng: &mut ChaCha8Rng) -> ProximityGraph {
    let n = rng.gen_range(1..=24);
    let p: f64 = rng.gen_range(0.0..=1.0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    ProximityGraph::from_edges(n, &edges, GRAPH_PARAMS)
}

fn identity_on_random_graphs(seed: u64, label: &str, sigma: impl Fn(f64) -> f64 + Copy, span: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let g = random_graph(&mut rng);
        let a: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-span..span)).collect();
        let b: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-span..span)).collect();
        let (l, r) = sum_identity_sides(&g, &a, &b, sigma);
        let scale: f64 = (0..g.len())
            .flat_map(|i| g.neighbors(i).iter().map(move |&j| (i, j)))
            .map(|(i, j)| (a[i] * sigma(b[i] - b[j])).abs())
            .sum();
        let gap = (l - r).abs() / (1.0 + scale);
        if gap > 1e-12 {
            return Err(format!("{label}: graph {trial} sides differ by {gap:e}"));
        }
        worst = worst.max(gap);
    }
    Ok(format!("{label}: 1000 graphs, worst relative gap {worst:e}"))
}

/// Pair-sum identity with a saturated odd function.
pub fn pair_sum_saturated() -> Check {
    let sat = SaturationParams::clamp(0.5);
    identity_on_random_graphs(11, "saturated", move |x| sat.apply(x), 2.0)
}

/// Pair-sum identity on heading errors and their rates.
pub fn pair_sum_heading() -> Check {
    identity_on_random_graphs(13, "identity", |x| x, std::f64::consts::PI)
}

/// `(σ(x) - σ(y)) σ(x - y) >= 0` for the clamp and a ramped saturation.
pub fn saturation_products() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sats = [SaturationParams::clamp(0.5), SaturationParams { linear: 0.2, bound: 0.5, knee: Some(1.5) }];
    for sat in &sats {
        for k in 0..100_000 {
            let (x, y) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let prod = saturation_product(sat, x, y);
            if prod < 0.0 {
                return Err(format!("pair {k}: ({x}, {y}) gives {prod:e}"));
            }
        }
    }
    Ok("1e5 pairs for each of 2 saturations, all products >= 0".into())
}

/// Bounds, smoothness and the ceiling limits of `U`.
pub fn potential_properties() -> Check {
    let pot = reference_potential();
    let geo = pot.params().geometry;
    let (r0, big_r0, u_m) = (geo.collision_radius, geo.cohesion_radius, pot.params().u_max);
    for k in 0..=4000 {
        let r = 10.0 * k as f64 / 4000.0;
        let u = pot.value(r);
        if !(0.0..=u_m).contains(&u) {
            return Err(format!("U({r}) = {u} outside [0, {u_m}]"));
        }
    }
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let r = r0 + 2.0 * h + (big_r0 - r0 - 4.0 * h) * k as f64 / 999.0;
        let fd = (pot.value(r + h) - pot.value(r - h)) / (2.0 * h);
        let err = (fd - pot.phi(r)).abs();
        if err > 1e-6 {
            return Err(format!("dU/dr at {r}: {fd} vs phi {}", pot.phi(r)));
        }
        worst = worst.max(err);
    }
    let low = (pot.value(r0 + 1e-9) - u_m).abs();
    let high = (pot.value(big_r0 - 1e-9) - u_m).abs();
    if low > 1e-8 || high > 1e-8 {
        return Err(format!("ceiling limits off by {low:e} (inner) and {high:e} (outer)"));
    }
    Ok(format!("U in [0, U_M]; |dU/dr - phi| <= {worst:e}; limits within {:e}", low.max(high)))
}

/// The pair force against central differences of `U(|q_i - q_j|)`.
pub fn gradient_matches_finite_difference() -> Check {
    let pot = reference_potential();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let r = rng.gen_range(1.01..7.99);
        let ang: f64 = rng.gen_range(-3.1..3.1);
        let q_j = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let q_i = q_j + dynamics::unit(ang) * r;
        let grad = pot.gradient_force(&q_i, &q_j).map_err(|e| e.to_string())?;
        let u = |q: Vec2| pot.value((q - q_j).norm());
        let fd = Vec2::new(
            (u(q_i + Vec2::new(h, 0.0)) - u(q_i - Vec2::new(h, 0.0))) / (2.0 * h),
            (u(q_i + Vec2::new(0.0, h)) - u(q_i - Vec2::new(0.0, h))) / (2.0 * h),
        );
        let err = (grad - fd).amax();
        if err > 1e-6 {
            return Err(format!("r = {r}: force {grad:?} vs {fd:?}"));
        }
        worst = worst.max(err);
    }
    Ok(format!("2000 pairs, worst component error {worst:e}"))
}

/// Position error after integrating `v = w = 1` to `t_end` in `steps` steps,
/// against the closed-form circle through the origin.
fn circle_error(t_end: f64, steps: usize) -> f64 {
    let dt = t_end / steps as f64;
    let mut s = vec![AgentState::new(0.0, 0.0, 0.0, 1.0, 1.0)];
    let c = [ControlInput::default()];
    for k in 0..steps {
        s = dynamics::step(&s, &c, dt, k).expect("finite");
    }
    let exact = Vec2::new(t_end.sin(), 1.0 - t_end.cos());
    (s[0].q - exact).norm()
}

/// One full revolution returns to the start.
pub fn orbit_closure() -> Check {
    let err = circle_error(std::f64::consts::TAU, 1000);
    if err <= 1e-8 {
        Ok(format!("closure error {err:e} after one revolution"))
    } else {
        Err(format!("closure error {err:e} > 1e-8"))
    }
}

/// Least-squares log-log slope of the circle error over one decade of `dt`.
pub fn convergence_slope() -> Check {
    let t_end = 4.0;
    let pts: Vec<(f64, f64)> = [20usize, 40, 80, 100, 200]
        .iter()
        .map(|&n| ((t_end / n as f64).ln(), circle_error(t_end, n).ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = num / den;
    if (3.7..=4.3).contains(&slope) {
        Ok(format!("slope {slope:.3} for dt in [0.02, 0.2]"))
    } else {
        Err(format!("slope {slope:.3} outside [3.7, 4.3]"))
    }
}

pub fn property_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("pair_sum_saturated", pair_sum_saturated()),
        ("pair_sum_heading", pair_sum_heading()),
        ("saturation_products", saturation_products()),
        ("potential", potential_properties()),
        ("gradient", gradient_matches_finite_difference()),
        ("orbit", orbit_closure()),
        ("slope", convergence_slope()),
    ]
}
