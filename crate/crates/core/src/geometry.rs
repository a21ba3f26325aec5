//! UAV waypoints and the two hop distances of the relay link.
//!
//! The ground users sit at `(+d, 0, 0)` (S_a) and `(-d, 0, 0)` (S_b). The UAV
//! position is given in polar flight coordinates `(r, theta, phi)` measured
//! from the flight-path centre.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Polar flight coordinates of the UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPosition {
    /// Radial distance from the flight-path centre, meters.
    pub r: f64,
    /// Azimuth, radians.
    pub theta: f64,
    /// Elevation, radians.
    pub phi: f64,
}

impl PolarPosition {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        let p = Self { r, theta, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.r.is_finite() && self.r >= 0.0, "r", || {
            format!("must be finite and >= 0, got {}", self.r)
        })?;
        ensure(self.theta.is_finite(), "theta", || "must be finite".into())?;
        ensure(self.phi.is_finite(), "phi", || "must be finite".into())
    }
}

/// Cartesian waypoint, meters. `z` is the flight altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Half user separation and the two hop lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Half the user separation, meters.
    pub d: f64,
    /// Hop S_a -> R, meters.
    pub d_a: f64,
    /// Hop R -> S_b, meters.
    pub d_b: f64,
}

impl LinkGeometry {
    /// Geometry with the UAV directly above the centre (`r = 0`).
    pub fn centred(d: f64) -> Result<Self> {
        hop_distances(
            d,
            PolarPosition {
                r: 0.0,
                theta: 0.0,
                phi: 0.0,
            },
        )
    }
}

/// `x = r cos(theta)`, `y = r sin(theta)`, `z = r sin(phi)`.
pub fn cartesian_from_polar(p: PolarPosition) -> Waypoint {
    Waypoint {
        x: p.r * p.theta.cos(),
        y: p.r * p.theta.sin(),
        z: p.r * p.phi.sin(),
    }
}

/// Hop distances for a UAV at `p` between users at `±d`.
///
/// `d_a² = d² + r²(3 − cos 2φ)/2 − ψ` and `d_b² = d² + r²(3 − cos 2φ)/2 + ψ`
/// with `ψ = 2 r d cos θ`.
pub fn hop_distances(d: f64, p: PolarPosition) -> Result<LinkGeometry> {
    ensure(d.is_finite() && d > 0.0, "d", || {
        format!("must be > 0, got {d}")
    })?;
    p.validate()?;
    let common = d * d + 0.5 * p.r * p.r * (3.0 - (2.0 * p.phi).cos());
    let psi = 2.0 * p.r * d * p.theta.cos();
    let rad_a = common - psi;
    let rad_b = common + psi;
    for rad in [rad_a, rad_b] {
        if rad <= 0.0 {
            return Err(Error::DegenerateGeometry { radicand: rad });
        }
    }
    Ok(LinkGeometry {
        d,
        d_a: rad_a.sqrt(),
        d_b: rad_b.sqrt(),
    })
}

/// A flight over `duration` seconds split into `slots` slots of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<PolarPosition>,
    pub duration: f64,
    pub slots: usize,
}

impl Trajectory {
    pub fn new(waypoints: Vec<PolarPosition>, duration: f64, slots: usize) -> Result<Self> {
        let t = Self {
            waypoints,
            duration,
            slots,
        };
        t.validate()?;
        Ok(t)
    }

    /// Constant-radius, constant-elevation orbit with the azimuth swept
    /// uniformly, one waypoint per slot.
    pub fn orbit(r: f64, phi: f64, duration: f64, slots: usize) -> Result<Self> {
        let waypoints = (0..slots)
            .map(|n| PolarPosition {
                r,
                theta: 2.0 * std::f64::consts::PI * n as f64 / slots as f64,
                phi,
            })
            .collect();
        Self::new(waypoints, duration, slots)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        ensure(self.slots >= 2, "slots", || {
            format!("need at least 2 slots, got {}", self.slots)
        })?;
        ensure(
            self.duration.is_finite() && self.duration > 0.0,
            "duration",
            || format!("must be > 0, got {}", self.duration),
        )?;
        self.waypoints.iter().try_for_each(PolarPosition::validate)
    }

    /// Slot length `δt = T / N`.
    pub fn slot_length(&self) -> f64 {
        self.duration / self.slots as f64
    }

    /// UAV position for each slot. Waypoints are spread evenly over the slots
    /// and interpolated linearly in `(r, theta, phi)` in between.
    pub fn positions(&self) -> Result<Vec<PolarPosition>> {
        self.validate()?;
        let m = self.waypoints.len();
        if m == 1 {
            return Ok(vec![self.waypoints[0]; self.slots]);
        }
        if m >= self.slots {
            // One waypoint per slot; extra waypoints are sampled evenly.
            return Ok((0..self.slots)
                .map(|n| {
                    let idx =
                        (n as f64 * (m - 1) as f64 / (self.slots - 1) as f64).round() as usize;
                    self.waypoints[idx]
                })
                .collect());
        }
        let span = (m - 1) as f64;
        Ok((0..self.slots)
            .map(|n| {
                let s = n as f64 * span / (self.slots - 1) as f64;
                let i = (s.floor() as usize).min(m - 2);
                let t = s - i as f64;
                let (p0, p1) = (self.waypoints[i], self.waypoints[i + 1]);
                PolarPosition {
                    r: p0.r + t * (p1.r - p0.r),
                    theta: p0.theta + t * (p1.theta - p0.theta),
                    phi: p0.phi + t * (p1.phi - p0.phi),
                }
            })
            .collect())
    }
}

/// One link geometry per slot (slot index starts at 1), the UAV held fixed
/// within a slot.
pub fn sample_trajectory(d: f64, t: &Trajectory) -> Result<Vec<(usize, LinkGeometry)>> {
    t.positions()?
        .into_iter()
        .enumerate()
        .map(|(n, p)| Ok((n + 1, hop_distances(d, p)?)))
        .collect()
}
