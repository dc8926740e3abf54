//! Bounded coordination potential built from two compact-support bump lobes.
//!
//! The radial force `phi` is a repulsive bump on `(r0, a)`, zero on the dead
//! zone `[a, A]`, and an attractive bump on `(A, R0)`. The potential is
//! anchored at the ceiling on both ends of `[r0, R0]`:
//!
//! ```text
//! U(r) = U_M + ∫_{r0}^{r} phi(s) ds      r0 <= r <= R0
//! U(r) = U_M                             otherwise
//! ```
//!
//! With the lobe amplitudes produced by [`calibrate`], `U` vanishes on the dead
//! zone and returns to `U_M` at the cohesion radius.

use serde::{Deserialize, Serialize};

use crate::quadrature;
use crate::{Error, Result, Vec2};

/// Relative tolerance for lobe integrals.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Total spline knots across both lobes.
pub const SPLINE_KNOTS: usize = 4096;

/// Shape of the potential without the lobe amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialGeometry {
    /// Inner collision radius `r0`.
    pub collision_radius: f64,
    /// Start of the dead zone `a`.
    pub dead_zone_start: f64,
    /// End of the dead zone `A`.
    pub dead_zone_end: f64,
    /// Cohesion radius `R0`.
    pub cohesion_radius: f64,
}

impl PotentialGeometry {
    pub fn validate(&self) -> Result<()> {
        let g = self;
        let finite = [g.collision_radius, g.dead_zone_start, g.dead_zone_end, g.cohesion_radius]
            .iter()
            .all(|x| x.is_finite());
        if !finite
            || !(0.0 < g.collision_radius
                && g.collision_radius < g.dead_zone_start
                && g.dead_zone_start < g.dead_zone_end
                && g.dead_zone_end < g.cohesion_radius)
        {
            return Err(Error::InvalidParameter(format!(
                "potential radii must satisfy 0 < r0 < a < A < R0, got r0={}, a={}, A={}, R0={}",
                g.collision_radius, g.dead_zone_start, g.dead_zone_end, g.cohesion_radius
            )));
        }
        Ok(())
    }

    /// Center of the repulsive lobe, `(r0 + a) / 2`.
    pub fn repulsive_center(&self) -> f64 {
        0.5 * (self.collision_radius + self.dead_zone_start)
    }

    /// Center of the attractive lobe, `(R0 + A) / 2`.
    pub fn attractive_center(&self) -> f64 {
        0.5 * (self.cohesion_radius + self.dead_zone_end)
    }

    fn repulsive_half_width(&self) -> f64 {
        0.5 * (self.dead_zone_start - self.collision_radius)
    }

    fn attractive_half_width(&self) -> f64 {
        0.5 * (self.cohesion_radius - self.dead_zone_end)
    }
}

/// Full parameter record of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    #[serde(flatten)]
    pub geometry: PotentialGeometry,
    /// Potential ceiling `U_M`.
    pub u_max: f64,
    /// Amplitude of the repulsive lobe (negative).
    pub p_repulsive: f64,
    /// Amplitude of the attractive lobe (positive).
    pub p_attractive: f64,
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(Error::InvalidParameter(format!("U_M must be positive, got {}", self.u_max)));
        }
        if !(self.p_repulsive.is_finite() && self.p_repulsive < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "repulsive amplitude must be negative, got {}",
                self.p_repulsive
            )));
        }
        if !(self.p_attractive.is_finite() && self.p_attractive > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "attractive amplitude must be positive, got {}",
                self.p_attractive
            )));
        }
        Ok(())
    }

    /// Largest force magnitude, `max(|p1|, p2)`.
    pub fn force_bound(&self) -> f64 {
        self.p_repulsive.abs().max(self.p_attractive)
    }
}

/// Unit-amplitude bump `exp(-u^2 / (w^2 - u^2))` supported on `(-w, w)`.
pub fn bump(u: f64, half_width: f64) -> f64 {
    let w2 = half_width * half_width;
    let u2 = u * u;
    if u2 >= w2 {
        return 0.0;
    }
    (-u2 / (w2 - u2)).exp()
}

/// Radial force `phi(s)`.
pub fn phi(s: f64, p: &PotentialParams) -> f64 {
    let g = &p.geometry;
    if s > g.collision_radius && s < g.dead_zone_start {
        p.p_repulsive * bump(s - g.repulsive_center(), g.repulsive_half_width())
    } else if s > g.dead_zone_end && s < g.cohesion_radius {
        p.p_attractive * bump(s - g.attractive_center(), g.attractive_half_width())
    } else {
        0.0
    }
}

fn lobe_integral(center: f64, half_width: f64) -> f64 {
    quadrature::integrate(
        |s| bump(s - center, half_width),
        center - half_width,
        center + half_width,
        QUAD_REL_TOL,
        0.0,
    )
}

/// Picks the lobe amplitudes so that `U(a) = 0` and `U(R0) = U_M`.
pub fn calibrate(geometry: PotentialGeometry, u_max: f64) -> Result<PotentialParams> {
    geometry.validate()?;
    if !(u_max.is_finite() && u_max > 0.0) {
        return Err(Error::InvalidParameter(format!("U_M must be positive, got {u_max}")));
    }
    let inner = lobe_integral(geometry.repulsive_center(), geometry.repulsive_half_width());
    let outer = lobe_integral(geometry.attractive_center(), geometry.attractive_half_width());
    Ok(PotentialParams {
        geometry,
        u_max,
        p_repulsive: -u_max / inner,
        p_attractive: u_max / outer,
    })
}

/// Cubic Hermite table of `U` on one lobe, with exact slopes `phi` at the knots.
#[derive(Debug, Clone)]
struct LobeSpline {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl LobeSpline {
    fn eval(&self, r: f64) -> f64 {
        let last = self.values.len() - 2;
        let x = (r - self.lo) / self.step;
        let k = (x.floor().max(0.0) as usize).min(last);
        let t = x - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

/// Calibrated potential with a precomputed interpolation table for `U`.
#[derive(Debug, Clone)]
pub struct Potential {
    params: PotentialParams,
    repulsive: LobeSpline,
    attractive: LobeSpline,
}

impl Potential {
    pub fn new(params: PotentialParams) -> Result<Self> {
        params.validate()?;
        let g = params.geometry;
        let knots = SPLINE_KNOTS / 2;

        // Repulsive lobe: U(r) = -p1 * ∫_r^a phi/p1, so U(a) = 0 exactly.
        let repulsive = {
            let (lo, hi) = (g.collision_radius, g.dead_zone_start);
            let step = (hi - lo) / (knots - 1) as f64;
            let mut tail = vec![0.0; knots];
            for k in (0..knots - 1).rev() {
                let x0 = lo + step * k as f64;
                let x1 = if k + 1 == knots - 1 { hi } else { lo + step * (k + 1) as f64 };
                tail[k] = tail[k + 1]
                    + quadrature::integrate(
                        |s| bump(s - g.repulsive_center(), g.repulsive_half_width()),
                        x0,
                        x1,
                        QUAD_REL_TOL,
                        1e-18,
                    );
            }
            let values = tail.iter().map(|t| -params.p_repulsive * t).collect();
            let slopes = (0..knots).map(|k| phi(lo + step * k as f64, &params)).collect();
            LobeSpline { lo, step, values, slopes }
        };

        // Attractive lobe: U(r) = p2 * ∫_A^r phi/p2, so U(A) = 0 exactly.
        let attractive = {
            let (lo, hi) = (g.dead_zone_end, g.cohesion_radius);
            let step = (hi - lo) / (knots - 1) as f64;
            let mut head = vec![0.0; knots];
            for k in 1..knots {
                let x0 = lo + step * (k - 1) as f64;
                let x1 = if k == knots - 1 { hi } else { lo + step * k as f64 };
                head[k] = head[k - 1]
                    + quadrature::integrate(
                        |s| bump(s - g.attractive_center(), g.attractive_half_width()),
                        x0,
                        x1,
                        QUAD_REL_TOL,
                        1e-18,
                    );
            }
            let values = head.iter().map(|h| params.p_attractive * h).collect();
            let slopes = (0..knots).map(|k| phi(lo + step * k as f64, &params)).collect();
            LobeSpline { lo, step, values, slopes }
        };

        Ok(Self { params, repulsive, attractive })
    }

    /// Calibrates the amplitudes for `geometry` and `u_max`, then builds the table.
    pub fn calibrated(geometry: PotentialGeometry, u_max: f64) -> Result<Self> {
        Self::new(calibrate(geometry, u_max)?)
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn phi(&self, s: f64) -> f64 {
        phi(s, &self.params)
    }

    /// `U(r)`, clamped into `[0, U_M]`.
    pub fn value(&self, r: f64) -> f64 {
        let g = &self.params.geometry;
        let u_max = self.params.u_max;
        let u = if r <= g.collision_radius || r >= g.cohesion_radius {
            u_max
        } else if r < g.dead_zone_start {
            self.repulsive.eval(r)
        } else if r <= g.dead_zone_end {
            0.0
        } else {
            self.attractive.eval(r)
        };
        u.clamp(0.0, u_max)
    }

    /// `U(r)` by direct adaptive quadrature, without the table. Slow.
    pub fn value_by_quadrature(&self, r: f64) -> f64 {
        let g = &self.params.geometry;
        if r <= g.collision_radius || r >= g.cohesion_radius {
            return self.params.u_max;
        }
        let p = self.params;
        let split = [g.repulsive_center(), g.dead_zone_start, g.dead_zone_end, g.attractive_center()];
        let mut lo = g.collision_radius;
        let mut acc = 0.0;
        for &b in split.iter().chain(std::iter::once(&r)) {
            let hi = b.min(r);
            if hi > lo {
                acc += quadrature::integrate(|s| phi(s, &p), lo, hi, QUAD_REL_TOL, 1e-14);
                lo = hi;
            }
        }
        (p.u_max + acc).clamp(0.0, p.u_max)
    }

    /// `∇_{q_i} U(‖q_i - q_j‖)`, i.e. `phi(r) (q_i - q_j) / r`.
    pub fn gradient_force(&self, q_i: &Vec2, q_j: &Vec2) -> Result<Vec2> {
        gradient_force(q_i, q_j, &self.params)
    }
}

/// Gradient of the pair potential with respect to `q_i`. Swapping the
/// arguments negates the result exactly.
pub fn gradient_force(q_i: &Vec2, q_j: &Vec2, params: &PotentialParams) -> Result<Vec2> {
    let d = q_i - q_j;
    let r = d.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::CoincidentPositions { x: q_i.x, y: q_i.y });
    }
    Ok(d * (phi(r, params) / r))
}

/// Reference tuning: r0=1, a=3, A=6, R0=8, U_M=15.
pub fn reference_geometry() -> PotentialGeometry {
    PotentialGeometry {
        collision_radius: 1.0,
        dead_zone_start: 3.0,
        dead_zone_end: 6.0,
        cohesion_radius: 8.0,
    }
}

pub const REFERENCE_U_MAX: f64 = 15.0;
