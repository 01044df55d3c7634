//! Analytic ground truth: plane-wave scattering from sound-hard spheres.
//!
//! For a unit plane wave `e^{ik d·x}` (time dependence `e^{-iωt}`) incident
//! on a rigid sphere of radius `a`, the scattered pressure at distance `r`
//! and angle `γ` from the propagation direction is
//!
//! ```text
//! p_s = −Σ_l (2l+1) iˡ [j_l'(ka) / h_l'(ka)] h_l(kr) P_l(cos γ)
//! ```
//!
//! with `h_l = j_l + i y_l`. The incident plus scattered field then has zero
//! normal derivative on the sphere. Scenes with several spheres are
//! approximated by single-scattering superposition: each sphere scatters the
//! incident wave (phase-shifted to its centre) and inter-sphere interaction
//! is ignored.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::shfield::SphericalField;
use crate::special::{derivative, legendre, spherical_h1, spherical_jn, spherical_yn};
use crate::sphgeom::{sph_to_cart, Direction, FieldGrid};
use crate::{ASF_BANDS, SPEED_OF_SOUND};

/// Radius at which ASFs are sampled, in metres.
pub const DEFAULT_REFERENCE_RADIUS: f64 = 5.0;
/// Relative change allowed when doubling the truncation order.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;
/// Number of truncation doublings before giving up.
const MAX_DOUBLINGS: u32 = 4;

/// A sound-hard sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SphereScatterer {
    pub radius: f64,
    pub center: Vec3,
}

impl SphereScatterer {
    pub fn new(radius: f64, center: Vec3) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::invalid(format!(
                "sphere needs a positive radius and finite centre (radius {radius})"
            )));
        }
        Ok(SphereScatterer { radius, center })
    }

    pub fn centered(radius: f64) -> Result<Self> {
        Self::new(radius, Vec3::ZERO)
    }
}

/// Scattering problem: spheres under a unit plane wave.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScatterConfig {
    pub scatterers: Vec<SphereScatterer>,
    pub frequency: f64,
    pub sound_speed: f64,
    /// Propagation direction of the plane wave.
    pub incoming: Direction,
}

impl ScatterConfig {
    /// Plane wave travelling along −x at the default speed of sound.
    pub fn new(scatterers: Vec<SphereScatterer>, frequency: f64) -> Result<Self> {
        let cfg = ScatterConfig {
            scatterers,
            frequency,
            sound_speed: SPEED_OF_SOUND,
            incoming: canonical_incoming(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !ASF_BANDS.contains(&self.frequency) {
            return Err(Error::invalid(format!(
                "unsupported frequency {} Hz (expected one of 125, 250, 500, 1000)",
                self.frequency
            )));
        }
        if self.scatterers.is_empty() {
            return Err(Error::invalid("scatter config has no scatterers"));
        }
        if !(self.sound_speed > 0.0) {
            return Err(Error::invalid("sound speed must be positive"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        core::f64::consts::TAU * self.frequency / self.sound_speed
    }

    /// Largest distance from the origin to any scatterer surface point.
    pub fn extent(&self) -> f64 {
        self.scatterers
            .iter()
            .map(|s| s.center.norm() + s.radius)
            .fold(0.0, f64::max)
    }
}

/// Propagation direction used for all training labels: −x.
pub fn canonical_incoming() -> Direction {
    Direction::new(core::f64::consts::FRAC_PI_2, core::f64::consts::PI).expect("valid")
}

/// Initial truncation order for size parameter `ka`.
pub fn truncation_order(ka: f64) -> usize {
    (ka + 10.0 + 4.0 * ka.cbrt()).ceil() as usize
}

/// Radial part of the rigid-sphere series at fixed `(ka, kr)`:
/// `a_l = −(2l+1) iˡ [j_l'(ka)/h_l'(ka)] h_l(kr)`.
#[derive(Debug, Clone)]
pub struct SphereSeries {
    terms: Vec<Complex64>,
}

impl SphereSeries {
    /// Series truncated at order `order` (inclusive). Requires `kr >= ka`.
    pub fn with_order(ka: f64, kr: f64, order: usize) -> Self {
        let j = spherical_jn(order + 1, ka);
        let y = spherical_yn(order + 1, ka);
        let dj = derivative(&j, ka);
        let dy = derivative(&y, ka);
        let h = spherical_h1(order, kr);
        let mut i_pow = Complex64::new(1.0, 0.0);
        let terms = (0..=order)
            .map(|l| {
                let ratio = if dy[l].is_finite() {
                    Complex64::new(dj[l], 0.0) / Complex64::new(dj[l], dy[l])
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let mut t = -ratio * h[l] * (2 * l + 1) as f64 * i_pow;
                if !t.re.is_finite() || !t.im.is_finite() {
                    t = Complex64::new(0.0, 0.0);
                }
                i_pow *= Complex64::new(0.0, 1.0);
                t
            })
            .collect();
        SphereSeries { terms }
    }

    /// Series whose truncation is converged for every angle: doubling the
    /// order changes the result by less than [`CONVERGENCE_TOLERANCE`]
    /// relative to the series magnitude.
    pub fn converged(ka: f64, kr: f64) -> Result<Self> {
        let mut order = truncation_order(ka);
        for _ in 0..MAX_DOUBLINGS {
            let long = SphereSeries::with_order(ka, kr, 2 * order);
            let head: f64 = long.terms[..=order].iter().map(|t| t.norm()).sum();
            let tail: f64 = long.terms[order + 1..].iter().map(|t| t.norm()).sum();
            if tail <= CONVERGENCE_TOLERANCE * head.max(f64::MIN_POSITIVE) {
                let mut short = long;
                short.terms.truncate(order + 1);
                return Ok(short);
            }
            order *= 2;
        }
        Err(Error::numerical(
            format!("rigid-sphere series did not converge (ka={ka}, kr={kr})"),
            f64::NAN,
        ))
    }

    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// Sum of the series at `cos γ`.
    pub fn eval(&self, cos_gamma: f64) -> Complex64 {
        let p = legendre(self.order(), cos_gamma.clamp(-1.0, 1.0));
        self.terms.iter().zip(&p).map(|(t, pl)| t * pl).sum()
    }
}

/// Scattered pressure of a rigid sphere under a unit plane wave.
pub fn sphere_scattered_pressure(ka: f64, kr: f64, gamma: f64) -> Result<Complex64> {
    if !(ka > 0.0) {
        return Err(Error::invalid(format!("ka must be positive, got {ka}")));
    }
    if !(kr > ka) {
        return Err(Error::invalid(format!(
            "field point kr={kr} is not outside the sphere (ka={ka})"
        )));
    }
    Ok(SphereSeries::converged(ka, kr)?.eval(gamma.cos()))
}

/// Scattered pressure with an explicit truncation order.
pub fn sphere_scattered_pressure_truncated(ka: f64, kr: f64, gamma: f64, order: usize) -> Complex64 {
    SphereSeries::with_order(ka, kr, order).eval(gamma.cos())
}

/// Incident plus scattered pressure for `kr >= ka` (the surface included).
pub fn sphere_total_pressure(ka: f64, kr: f64, gamma: f64) -> Result<Complex64> {
    if !(ka > 0.0) || kr < ka {
        return Err(Error::invalid(format!("need 0 < ka <= kr, got ka={ka}, kr={kr}")));
    }
    let scattered = SphereSeries::converged(ka, kr)?.eval(gamma.cos());
    let incident = Complex64::new(0.0, kr * gamma.cos()).exp();
    Ok(incident + scattered)
}

/// An ASF together with the number of samples clipped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct AsfSolution {
    pub field: SphericalField,
    pub clipped: usize,
}

/// Complex scattered pressure at `x` from every sphere in `cfg`.
pub fn scattered_pressure_at(cfg: &ScatterConfig, x: Vec3) -> Result<Complex64> {
    let k = cfg.wavenumber();
    let d = sph_to_cart(cfg.incoming);
    let mut order: Vec<&SphereScatterer> = cfg.scatterers.iter().collect();
    // canonical summation order so relabelling spheres is bit-exact
    order.sort_by(|a, b| {
        a.center
            .to_array()
            .partial_cmp(&b.center.to_array())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.radius.partial_cmp(&b.radius).unwrap_or(core::cmp::Ordering::Equal))
    });
    let mut total = Complex64::new(0.0, 0.0);
    for s in order {
        let rel = x - s.center;
        let dist = rel.norm();
        if dist <= s.radius {
            return Err(Error::invalid(format!(
                "field point ({:.3}, {:.3}, {:.3}) lies inside a scatterer",
                x.x, x.y, x.z
            )));
        }
        let cos_gamma = d.dot(rel) / dist;
        let phase = Complex64::new(0.0, k * d.dot(s.center)).exp();
        let series = SphereSeries::converged(k * s.radius, k * dist)?;
        total += phase * series.eval(cos_gamma);
    }
    Ok(total)
}

/// Samples `|p_s|` on `grid` at radius `r_ref`, clipped to `[0, 1]`.
pub fn compute_asf(cfg: &ScatterConfig, grid: &Arc<FieldGrid>, r_ref: f64) -> Result<AsfSolution> {
    cfg.validate()?;
    if !(r_ref > cfg.extent()) {
        return Err(Error::invalid(format!(
            "reference radius {r_ref} m does not enclose the scatterers (extent {:.3} m)",
            cfg.extent()
        )));
    }
    let k = cfg.wavenumber();
    let mut clipped = 0;
    let mut pressures = Vec::with_capacity(grid.len());

    if let [s] = cfg.scatterers.as_slice() {
        if s.center == Vec3::ZERO {
            // centred sphere: every point shares kr, so the radial series is reused
            let series = SphereSeries::converged(k * s.radius, k * r_ref)?;
            let d = sph_to_cart(cfg.incoming);
            for &u in grid.points() {
                let v = series.eval(d.dot(u)).norm();
                pressures.push(clip(v, &mut clipped));
            }
            let field = SphericalField::new(grid.clone(), pressures, cfg.frequency, r_ref)?;
            return Ok(AsfSolution { field, clipped });
        }
    }

    for &u in grid.points() {
        let v = scattered_pressure_at(cfg, u * r_ref)?.norm();
        pressures.push(clip(v, &mut clipped));
    }
    let field = SphericalField::new(grid.clone(), pressures, cfg.frequency, r_ref)?;
    Ok(AsfSolution { field, clipped })
}

fn clip(v: f64, count: &mut usize) -> f64 {
    if v > 1.0 {
        *count += 1;
        1.0
    } else {
        v
    }
}

/// Inverse-distance extrapolation from the reference radius:
/// `p(r) = (r_ref / r) p(r_ref)`.
pub fn inverse_distance(p_ref: f64, r_ref: f64, r: f64) -> f64 {
    p_ref * r_ref / r
}

/// The five in-plane directions of the radial study, in degrees measured
/// from the propagation direction within the x–y plane.
pub const FALLOFF_ANGLES_DEG: [f64; 5] = [0.0, 72.0, 144.0, 216.0, 288.0];

/// Unit vector at `angle_deg` from the propagation direction `d` (a unit
/// vector in the x–y plane), rotating towards +y for `d = −x`.
pub fn in_plane_direction(angle_deg: f64) -> Vec3 {
    let a = angle_deg.to_radians();
    // propagation along −x; rotate about +z
    Vec3::new(-a.cos(), -a.sin(), 0.0)
}

/// One row of the radial fall-off table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalloffRow {
    pub angle_deg: f64,
    pub radius: f64,
    /// `|p_s|` from the series.
    pub pressure: f64,
    /// Inverse-distance prediction anchored at the reference radius.
    pub fitted: f64,
    /// `|fitted − pressure| / pressure`.
    pub relative_error: f64,
}

/// Compares `|p_s|` along each direction against the inverse-distance law
/// anchored at `r_ref`.
pub fn radial_falloff_study(
    cfg: &ScatterConfig,
    directions_deg: &[f64],
    radii: &[f64],
    r_ref: f64,
) -> Result<Vec<FalloffRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(directions_deg.len() * radii.len());
    for &angle in directions_deg {
        let u = in_plane_direction(angle);
        let p_ref = scattered_pressure_at(cfg, u * r_ref)?.norm();
        for &r in radii {
            let pressure = scattered_pressure_at(cfg, u * r)?.norm();
            let fitted = inverse_distance(p_ref, r_ref, r);
            rows.push(FalloffRow {
                angle_deg: angle,
                radius: r,
                pressure,
                fitted,
                relative_error: (fitted - pressure).abs() / pressure,
            });
        }
    }
    Ok(rows)
}

/// CSV rendering of a fall-off table.
pub fn falloff_csv(rows: &[FalloffRow]) -> String {
    let mut s = String::from("angle_deg,radius_m,pressure,fitted,relative_error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.angle_deg, r.radius, r.pressure, r.fitted, r.relative_error
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphgeom::icosphere;
    use core::f64::consts::PI;

    #[test]
    fn rejects_interior_points() {
        assert!(sphere_scattered_pressure(2.0, 1.5, 0.0).is_err());
        assert!(sphere_scattered_pressure(2.0, 2.0, 0.0).is_err());
        assert!(sphere_scattered_pressure(0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn doubling_truncation_is_stable() {
        let (ka, kr) = (5.0, 50.0);
        let l = truncation_order(ka);
        for &g in &[0.0, 0.8, 2.0, PI] {
            let a = sphere_scattered_pressure_truncated(ka, kr, g, l);
            let b = sphere_scattered_pressure_truncated(ka, kr, g, 2 * l);
            assert!((a - b).norm() <= 1e-9 * b.norm(), "gamma={g}");
        }
    }

    #[test]
    fn rayleigh_limit_backscatter() {
        let (ka, kr) = (0.05, 500.0);
        let p = sphere_scattered_pressure(ka, kr, PI).unwrap().norm();
        let rayleigh = ka.powi(3) / (3.0 * kr) * (1.0 - 1.5 * PI.cos());
        assert!((p - rayleigh).abs() / rayleigh < 0.02, "{p} vs {rayleigh}");
    }

    #[test]
    fn unsupported_frequency() {
        let s = SphereScatterer::centered(0.5).unwrap();
        assert!(ScatterConfig::new(alloc::vec![s], 2000.0).is_err());
        assert!(ScatterConfig::new(alloc::vec![], 125.0).is_err());
    }

    #[test]
    fn vanishing_sphere_gives_silence() {
        let grid = Arc::new(icosphere(2).unwrap());
        let cfg = ScatterConfig::new(alloc::vec![SphereScatterer::centered(1e-4).unwrap()], 125.0).unwrap();
        let asf = compute_asf(&cfg, &grid, 5.0).unwrap();
        assert!(asf.field.pressures().iter().all(|&p| p < 1e-6));
    }

    #[test]
    fn reference_radius_must_enclose() {
        let grid = Arc::new(icosphere(1).unwrap());
        let cfg = ScatterConfig::new(
            alloc::vec![SphereScatterer::new(0.5, Vec3::new(4.8, 0.0, 0.0)).unwrap()],
            125.0,
        )
        .unwrap();
        assert!(compute_asf(&cfg, &grid, 5.0).is_err());
    }

    #[test]
    fn fitted_value_halves_at_double_distance() {
        assert_eq!(inverse_distance(0.3, 5.0, 10.0), 0.15);
    }

    #[test]
    fn off_centre_path_matches_centred_fast_path() {
        let grid = Arc::new(icosphere(2).unwrap());
        let cfg = ScatterConfig::new(alloc::vec![SphereScatterer::centered(0.6).unwrap()], 500.0).unwrap();
        let fast = compute_asf(&cfg, &grid, 5.0).unwrap();
        for (i, &u) in grid.points().iter().enumerate().step_by(7) {
            let slow = scattered_pressure_at(&cfg, u * 5.0).unwrap().norm();
            assert!((slow - fast.field.pressures()[i]).abs() < 1e-12);
        }
    }
}
