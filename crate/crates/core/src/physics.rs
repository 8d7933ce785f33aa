//! Closed-form physical models: air-to-ground channel rate, laser charging,
//! rotary-wing propulsion power and its energy-optimal cruise speed.
//!
//! Everything here is a pure function of its arguments. The functions are
//! generic over [`Real`]; the simulator instantiates them with `f64`.

use thiserror::Error;

use crate::scalar::Real;

/// Floor applied to the horizontal distance before computing the elevation
/// angle. Directly overhead still yields 90° to within 1e-4 degrees.
pub const EPS_DIST: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("elevation angle {0} degrees outside [0, 90]")]
    ElevationOutOfRange(f64),
    #[error("{name} must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("negative speed {0} m/s")]
    NegativeSpeed(f64),
}

fn check<T: Real>(
    ok: bool,
    name: &'static str,
    requirement: &'static str,
    value: T,
) -> Result<(), PhysicsError> {
    if ok {
        Ok(())
    } else {
        Err(PhysicsError::InvalidParameter {
            name,
            requirement,
            value: value.as_f64(),
        })
    }
}

/// Which distance enters the path-loss term of the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathLossDistance {
    /// 3-D slant range `sqrt(d_h^2 + H^2)`.
    #[default]
    Slant,
    /// Horizontal range only (floored at [`EPS_DIST`]).
    Horizontal,
}

/// Air-to-ground link constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    /// Bandwidth `W` in Hz.
    pub bandwidth: T,
    /// Reference SNR `beta0 / sigma^2`, stored as a linear ratio.
    pub ref_snr: T,
    /// IoT transmit power in W.
    pub tx_power: T,
    pub pathloss_exponent: T,
    pub b1: T,
    pub b2: T,
    pub mu_los: T,
    pub mu_nlos: T,
    pub distance: PathLossDistance,
}

impl<T: Real> Default for ChannelParams<T> {
    fn default() -> Self {
        Self {
            bandwidth: T::lit(1e6),
            ref_snr: T::lit(db_to_linear(80.0)),
            tx_power: T::lit(0.1),
            pathloss_exponent: T::lit(2.0),
            b1: T::lit(9.61),
            b2: T::lit(0.16),
            mu_los: T::lit(1.0),
            mu_nlos: T::lit(0.2),
            distance: PathLossDistance::Slant,
        }
    }
}

impl<T: Real> ChannelParams<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let z = T::zero();
        check(self.bandwidth > z, "bandwidth", "> 0", self.bandwidth)?;
        check(self.ref_snr > z, "ref_snr", "> 0", self.ref_snr)?;
        // Zero transmit power is allowed: it models a silent IoT.
        check(self.tx_power >= z, "tx_power", ">= 0", self.tx_power)?;
        check(
            self.pathloss_exponent > z,
            "pathloss_exponent",
            "> 0",
            self.pathloss_exponent,
        )?;
        check(self.b1 > z, "b1", "> 0", self.b1)?;
        check(self.b2 > z, "b2", "> 0", self.b2)?;
        check(self.mu_los > z, "mu_los", "> 0", self.mu_los)?;
        check(
            self.mu_nlos > z && self.mu_nlos <= self.mu_los,
            "mu_nlos",
            "in (0, mu_los]",
            self.mu_nlos,
        )
    }
}

/// Laser beam director link constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams<T> {
    /// Emitted laser power `P_L` in W.
    pub laser_power: T,
    /// Laser-to-electricity conversion efficiency.
    pub conversion_eta: T,
    /// Atmospheric attenuation coefficient per meter.
    pub attenuation: T,
}

impl<T: Real> Default for LaserParams<T> {
    fn default() -> Self {
        Self {
            laser_power: T::lit(1000.0),
            conversion_eta: T::lit(0.15),
            attenuation: T::lit(1e-6),
        }
    }
}

impl<T: Real> LaserParams<T> {
    /// Accepts `conversion_eta == 0` so that charging can be switched off.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let z = T::zero();
        check(self.laser_power >= z, "laser_power", ">= 0", self.laser_power)?;
        check(
            self.conversion_eta >= z && self.conversion_eta <= T::one(),
            "conversion_eta",
            "in [0, 1]",
            self.conversion_eta,
        )?;
        check(self.attenuation >= z, "attenuation", ">= 0", self.attenuation)
    }
}

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropulsionParams<T> {
    /// Blade profile power in hover, W.
    pub p_alpha: T,
    /// Induced power in hover, W.
    pub p_beta: T,
    /// Rotor blade tip speed, m/s.
    pub v_tip: T,
    /// Mean rotor induced velocity in hover, m/s.
    pub v0_hover: T,
    /// Fuselage drag ratio.
    pub d0_drag: T,
    /// Air density, kg/m^3.
    pub rho_air: T,
    /// Rotor solidity.
    pub solidity: T,
    /// Rotor disc area, m^2.
    pub rotor_area: T,
}

impl<T: Real> Default for PropulsionParams<T> {
    fn default() -> Self {
        Self {
            p_alpha: T::lit(14.7517),
            p_beta: T::lit(41.5409),
            v_tip: T::lit(80.0),
            v0_hover: T::lit(5.0463),
            d0_drag: T::lit(0.5009),
            rho_air: T::lit(1.225),
            solidity: T::lit(0.1248),
            rotor_area: T::lit(0.1256),
        }
    }
}

impl<T: Real> PropulsionParams<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let z = T::zero();
        check(self.p_alpha > z, "p_alpha", "> 0", self.p_alpha)?;
        check(self.p_beta > z, "p_beta", "> 0", self.p_beta)?;
        check(self.v_tip > z, "v_tip", "> 0", self.v_tip)?;
        check(self.v0_hover > z, "v0_hover", "> 0", self.v0_hover)?;
        check(self.d0_drag > z, "d0_drag", "> 0", self.d0_drag)?;
        check(self.rho_air > z, "rho_air", "> 0", self.rho_air)?;
        check(self.solidity > z, "solidity", "> 0", self.solidity)?;
        check(self.rotor_area > z, "rotor_area", "> 0", self.rotor_area)
    }

    /// Power drawn while hovering, `P_alpha + P_beta`.
    pub fn hover_power(&self) -> T {
        self.p_alpha + self.p_beta
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Line-of-sight probability at elevation `elevation_deg` (degrees).
pub fn los_probability<T: Real>(elevation_deg: T, b1: T, b2: T) -> Result<T, PhysicsError> {
    if !(elevation_deg >= T::zero() && elevation_deg <= T::lit(90.0)) {
        return Err(PhysicsError::ElevationOutOfRange(elevation_deg.as_f64()));
    }
    let one = T::one();
    Ok(one / (one + b1 * (-b2 * (elevation_deg - b1)).exp()))
}

/// Elevation angle in degrees of a UAV at `altitude` seen from a ground node
/// `horizontal_dist` away.
pub fn elevation_deg<T: Real>(horizontal_dist: T, altitude: T) -> T {
    let floor = T::lit(EPS_DIST);
    (altitude / horizontal_dist.max(floor)).atan().to_degrees()
}

/// Uplink rate in bit/s from a ground IoT to a UAV.
pub fn transmission_rate<T: Real>(
    params: &ChannelParams<T>,
    horizontal_dist: T,
    altitude: T,
) -> Result<T, PhysicsError> {
    check(altitude > T::zero(), "altitude", "> 0", altitude)?;
    check(
        horizontal_dist >= T::zero(),
        "horizontal_dist",
        ">= 0",
        horizontal_dist,
    )?;
    let theta = elevation_deg(horizontal_dist, altitude);
    let p_los = los_probability(theta, params.b1, params.b2)?;
    let p_nlos = T::one() - p_los;
    let dist = match params.distance {
        PathLossDistance::Slant => horizontal_dist.hypot(altitude),
        PathLossDistance::Horizontal => horizontal_dist.max(T::lit(EPS_DIST)),
    };
    let gain = p_los * params.mu_los + p_nlos * params.mu_nlos;
    let snr = params.ref_snr * params.tx_power * gain / dist.powf(params.pathloss_exponent);
    Ok(params.bandwidth * (T::one() + snr).log2())
}

/// Electrical power (W) harvested by a UAV from an LBD `horizontal_dist`
/// away with vertical separation `altitude`.
pub fn laser_power_received<T: Real>(params: &LaserParams<T>, horizontal_dist: T, altitude: T) -> T {
    let slant = horizontal_dist.hypot(altitude);
    params.laser_power * params.conversion_eta * (-params.attenuation * slant).exp()
}

/// Propulsion power (W) at level-flight speed `speed`.
///
/// At zero speed this returns exactly `p_alpha + p_beta`.
pub fn propulsion_power<T: Real>(params: &PropulsionParams<T>, speed: T) -> Result<T, PhysicsError> {
    if speed < T::zero() || speed.is_nan() {
        return Err(PhysicsError::NegativeSpeed(speed.as_f64()));
    }
    if speed == T::zero() {
        return Ok(params.hover_power());
    }
    let one = T::one();
    let v2 = speed * speed;
    let v4 = v2 * v2;
    let v0_2 = params.v0_hover * params.v0_hover;
    let v0_4 = v0_2 * v0_2;

    let blade = params.p_alpha * (one + T::lit(3.0) * v2 / (params.v_tip * params.v_tip));
    // Analytically nonnegative; the clamp absorbs cancellation at large speeds.
    let radicand = ((one + v4 / (T::lit(4.0) * v0_4)).sqrt() - v2 / (T::lit(2.0) * v0_2)).max(T::zero());
    let induced = params.p_beta * radicand.sqrt();
    let parasite = T::lit(0.5)
        * params.d0_drag
        * params.rho_air
        * params.solidity
        * params.rotor_area
        * v2
        * speed;
    Ok(blade + induced + parasite)
}

/// Speed in `[0, v_max]` minimizing [`propulsion_power`], by golden-section
/// search down to a bracket narrower than `tol`.
///
/// The curve falls monotonically to its minimum and rises after it, which
/// is all the search needs. It is not convex everywhere: the induced term
/// bends it downward below roughly 4.8 m/s with the default constants.
pub fn optimal_speed<T: Real>(params: &PropulsionParams<T>, v_max: T, tol: T) -> Result<T, PhysicsError> {
    check(v_max > T::zero(), "v_max", "> 0", v_max)?;
    check(tol > T::zero(), "tol", "> 0", tol)?;
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut lo, mut hi) = (T::zero(), v_max);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = propulsion_power(params, x1)?;
    let mut f2 = propulsion_power(params, x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = propulsion_power(params, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = propulsion_power(params, x2)?;
        }
    }
    let mid = (lo + hi) / T::lit(2.0);
    // The endpoints are not probed by the interior search.
    let candidates = [mid, T::zero(), v_max];
    let mut best = mid;
    let mut best_p = propulsion_power(params, mid)?;
    for &v in &candidates[1..] {
        let p = propulsion_power(params, v)?;
        if p < best_p {
            best = v;
            best_p = p;
        }
    }
    Ok(best)
}
