//! Real spherical harmonics, least-squares projection of sampled fields and
//! the normalized reproduction error.
//!
//! The basis is the orthonormal real basis without the Condon–Shortley phase:
//!
//! ```text
//! Y_l^m  = √2 K_l^m P_l^m(cos θ) cos(mφ)     m > 0
//! Y_l^0  =    K_l^0 P_l(cos θ)
//! Y_l^-m = √2 K_l^m P_l^m(cos θ) sin(mφ)     m > 0
//! ```
//!
//! Coefficients are stored in `(l ascending, m from −l to +l)` order, so the
//! index of `(l, m)` is `l² + l + m`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;


use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::linalg::{cholesky_solve, qr_least_squares, symmetric_eigenvalues, Matrix};
use crate::sphgeom::{sph_to_cart, Direction, FieldGrid};

/// SH order used for learned fields (16 coefficients).
pub const DEFAULT_ORDER: u32 = 3;
/// Normal-matrix condition number above which projection switches to QR.
pub const QR_FALLBACK_CONDITION: f64 = 1e8;

/// Number of coefficients of an order-`order` expansion.
pub fn coefficient_count(order: u32) -> usize {
    ((order + 1) * (order + 1)) as usize
}

/// Flat index of `(l, m)`.
pub fn sh_index(l: u32, m: i32) -> usize {
    (l * l) as usize + (l as i64 + m as i64) as usize
}

/// Value of the real orthonormal harmonic `Y_l^m` at `d`.
pub fn sh_basis(l: u32, m: i32, d: Direction) -> Result<f64> {
    if m.unsigned_abs() > l {
        return Err(Error::invalid(format!("|m| = {} exceeds l = {l}", m.abs())));
    }
    Ok(sh_basis_all(l, sph_to_cart(d))[sh_index(l, m)])
}

/// All basis values up to `order` at the unit vector `v`.
pub fn sh_basis_all(order: u32, v: Vec3) -> Vec<f64> {
    let mut out = vec![0.0; coefficient_count(order)];
    fill_basis(order, v, &mut out);
    out
}

/// Writes all basis values up to `order` at unit vector `v` into `out`.
pub fn fill_basis(order: u32, v: Vec3, out: &mut [f64]) {
    let lmax = order as usize;
    let ct = v.z.clamp(-1.0, 1.0);
    let st = (v.x * v.x + v.y * v.y).sqrt();
    let phi = if st == 0.0 { 0.0 } else { v.y.atan2(v.x) };

    // P_l^m without the Condon–Shortley phase, for m <= l <= lmax
    let mut plm = vec![0.0; (lmax + 1) * (lmax + 1)];
    let idx = |l: usize, m: usize| l * (lmax + 1) + m;
    let mut pmm = 1.0;
    for m in 0..=lmax {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * st;
        }
        plm[idx(m, m)] = pmm;
        if m < lmax {
            plm[idx(m + 1, m)] = ct * (2 * m + 1) as f64 * pmm;
        }
        for l in (m + 2)..=lmax {
            plm[idx(l, m)] = ((2 * l - 1) as f64 * ct * plm[idx(l - 1, m)]
                - (l + m - 1) as f64 * plm[idx(l - 2, m)])
                / (l - m) as f64;
        }
    }

    for l in 0..=lmax {
        let base = (2 * l + 1) as f64 / (4.0 * PI);
        out[l * l + l] = base.sqrt() * plm[idx(l, 0)];
        // ratio (l-m)!/(l+m)! accumulated incrementally
        let mut ratio = 1.0;
        for m in 1..=l {
            ratio /= ((l + m) * (l - m + 1)) as f64;
            let k = (2.0 * base * ratio).sqrt() * plm[idx(l, m)];
            let (s, c) = (m as f64 * phi).sin_cos();
            out[l * l + l + m] = k * c;
            out[l * l + l - m] = k * s;
        }
    }
}

/// Real SH expansion of one angular field at one frequency.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SHCoefficients {
    pub frequency: f64,
    pub order: u32,
    pub coeffs: Vec<f64>,
}

impl SHCoefficients {
    pub fn new(order: u32, coeffs: Vec<f64>, frequency: f64) -> Result<Self> {
        if coeffs.len() != coefficient_count(order) {
            return Err(Error::invalid(format!(
                "order {order} needs {} coefficients, got {}",
                coefficient_count(order),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite SH coefficient"));
        }
        Ok(SHCoefficients {
            frequency,
            order,
            coeffs,
        })
    }

    pub fn zeros(order: u32, frequency: f64) -> Self {
        SHCoefficients {
            frequency,
            order,
            coeffs: vec![0.0; coefficient_count(order)],
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Field value at `d`; unclamped.
    pub fn evaluate(&self, d: Direction) -> f64 {
        evaluate(self, d)
    }

    /// Field value at unit vector `v`; unclamped.
    pub fn evaluate_vec(&self, v: Vec3) -> f64 {
        let basis = sh_basis_all(self.order, v);
        basis.iter().zip(&self.coeffs).map(|(y, c)| y * c).sum()
    }

    /// Scattering gain at `v`: the field value clamped to `[0, 1]`.
    pub fn gain(&self, v: Vec3) -> f64 {
        self.evaluate_vec(v).clamp(0.0, 1.0)
    }
}

/// `Σ c_l^m Y_l^m(d)`.
pub fn evaluate(c: &SHCoefficients, d: Direction) -> f64 {
    c.evaluate_vec(sph_to_cart(d))
}

/// Scattering gains sampled at the points of a field grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalField {
    grid: Arc<FieldGrid>,
    pressures: Vec<f64>,
    frequency: f64,
    reference_radius: f64,
}

impl SphericalField {
    pub fn new(
        grid: Arc<FieldGrid>,
        pressures: Vec<f64>,
        frequency: f64,
        reference_radius: f64,
    ) -> Result<Self> {
        if pressures.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} pressures for a {}-point grid",
                pressures.len(),
                grid.len()
            )));
        }
        if let Some(p) = pressures.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("pressure {p} outside [0, 1]")));
        }
        if !(reference_radius > 0.0) {
            return Err(Error::invalid("reference radius must be positive"));
        }
        Ok(SphericalField {
            grid,
            pressures,
            frequency,
            reference_radius,
        })
    }

    /// Evaluates `c` at every grid point, clamped to `[0, 1]`.
    pub fn from_coefficients(grid: Arc<FieldGrid>, c: &SHCoefficients, reference_radius: f64) -> Self {
        let pressures = grid.points().iter().map(|&p| c.gain(p)).collect();
        SphericalField {
            grid,
            pressures,
            frequency: c.frequency,
            reference_radius,
        }
    }

    pub fn grid(&self) -> &Arc<FieldGrid> {
        &self.grid
    }

    pub fn pressures(&self) -> &[f64] {
        &self.pressures
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn reference_radius(&self) -> f64 {
        self.reference_radius
    }
}

/// Result of a least-squares SH fit.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub coeffs: Vec<f64>,
    /// RMS of the point residuals.
    pub residual_rms: f64,
    /// Condition number of the design matrix.
    pub condition: f64,
}

/// Precomputed least-squares operator for a fixed set of directions and
/// order. Reusing one projector across many fields avoids refactoring the
/// design matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    order: u32,
    design: Matrix,
    condition: f64,
    solver: Solver,
}

#[derive(Debug, Clone)]
enum Solver {
    /// Rows of `(AᵀA)⁻¹Aᵀ`.
    Normal(Matrix),
    Qr,
}

impl Projector {
    pub fn new(points: &[Vec3], order: u32) -> Result<Self> {
        let m = coefficient_count(order);
        let n = points.len();
        if n < m {
            return Err(Error::invalid(format!(
                "{n} sample points cannot determine {m} coefficients"
            )));
        }
        let mut design = Matrix::zeros(n, m);
        for (r, &p) in points.iter().enumerate() {
            fill_basis(order, p, &mut design.data[r * m..(r + 1) * m]);
        }
        let gram = design.gram();
        let eig = symmetric_eigenvalues(&gram);
        let lmax = eig.iter().cloned().fold(0.0, f64::max);
        let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let normal_condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        let condition = normal_condition.sqrt();

        if normal_condition <= QR_FALLBACK_CONDITION {
            let mut inv_gram = Matrix::zeros(m, m);
            for j in 0..m {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                let col = cholesky_solve(&gram, &e)
                    .ok_or_else(|| Error::numerical("normal matrix not positive definite", condition))?;
                for (i, v) in col.into_iter().enumerate() {
                    inv_gram.set(i, j, v);
                }
            }
            let mut pinv = Matrix::zeros(m, n);
            for r in 0..n {
                let row = &design.data[r * m..(r + 1) * m];
                for i in 0..m {
                    let s: f64 = (0..m).map(|k| inv_gram.at(i, k) * row[k]).sum();
                    pinv.set(i, r, s);
                }
            }
            Ok(Projector {
                order,
                design,
                condition,
                solver: Solver::Normal(pinv),
            })
        } else {
            // probe for rank deficiency once, up front
            let zeros = vec![0.0; n];
            qr_least_squares(&design, &zeros).map_err(|ratio| {
                Error::numerical(
                    format!("rank-deficient SH design matrix at order {order}"),
                    ratio.max(condition),
                )
            })?;
            Ok(Projector {
                order,
                design,
                condition,
                solver: Solver::Qr,
            })
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn fit(&self, values: &[f64]) -> Result<LeastSquaresFit> {
        if values.len() != self.design.rows {
            return Err(Error::invalid(format!(
                "{} values for {} sample points",
                values.len(),
                self.design.rows
            )));
        }
        let coeffs = match &self.solver {
            Solver::Normal(pinv) => pinv.mul_vec(values),
            Solver::Qr => {
                qr_least_squares(&self.design, values)
                    .map_err(|ratio| Error::numerical("rank-deficient SH design matrix", ratio))?
                    .0
            }
        };
        let fitted = self.design.mul_vec(&coeffs);
        let ss: f64 = fitted.iter().zip(values).map(|(f, v)| (f - v) * (f - v)).sum();
        Ok(LeastSquaresFit {
            coeffs,
            residual_rms: (ss / values.len() as f64).sqrt(),
            condition: self.condition,
        })
    }

    /// Values of the expansion `coeffs` at the projector's sample points.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.design.mul_vec(coeffs)
    }
}

/// Least-squares SH coefficients of `field` up to `order`.
pub fn project(field: &SphericalField, order: u32) -> Result<SHCoefficients> {
    let fit = Projector::new(field.grid.points(), order)?.fit(&field.pressures)?;
    SHCoefficients::new(order, fit.coeffs, field.frequency)
}

/// Normalized reproduction error between two fields on the same grid,
/// integrated with the grid's solid-angle weights.
pub fn nre(target: &SphericalField, predicted: &SphericalField) -> Result<f64> {
    if !Arc::ptr_eq(&target.grid, &predicted.grid) && *target.grid != *predicted.grid {
        return Err(Error::invalid("fields are sampled on different grids"));
    }
    if target.frequency != predicted.frequency {
        return Err(Error::invalid(format!(
            "frequency mismatch: {} Hz vs {} Hz",
            target.frequency, predicted.frequency
        )));
    }
    weighted_nre(&target.pressures, &predicted.pressures, target.grid.weights())
}

/// `Σ w (t − p)² / Σ w t²`.
pub fn weighted_nre(target: &[f64], predicted: &[f64], weights: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() || target.len() != weights.len() {
        return Err(Error::invalid("sample, prediction and weight lengths differ"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((t, p), w) in target.iter().zip(predicted).zip(weights) {
        num += w * (t - p) * (t - p);
        den += w * t * t;
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("target field is identically zero".into()));
    }
    Ok(num / den)
}

/// One point of a fit-error-versus-order curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitError {
    pub order: u32,
    /// Residual energy over field energy, `Σ(f − f̂)² / Σ f²`.
    pub relative_error: f64,
    /// Square root of `relative_error` (an L2 amplitude ratio).
    pub amplitude_error: f64,
}

/// Relative least-squares fitting error of `field` for orders `0..=max_order`.
pub fn fit_error_curve(field: &SphericalField, max_order: u32) -> Result<Vec<FitError>> {
    let energy: f64 = field.pressures.iter().map(|p| p * p).sum();
    if !(energy > 0.0) {
        return Err(Error::UndefinedMetric("field is identically zero".into()));
    }
    (0..=max_order)
        .map(|order| {
            let fit = Projector::new(field.grid.points(), order)?.fit(&field.pressures)?;
            let residual = fit.residual_rms * fit.residual_rms * field.pressures.len() as f64;
            let relative_error = residual / energy;
            Ok(FitError {
                order,
                relative_error,
                amplitude_error: relative_error.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphgeom::icosphere;

    fn grid() -> Arc<FieldGrid> {
        Arc::new(icosphere(3).unwrap())
    }

    #[test]
    fn closed_form_values() {
        let d = Direction::new(0.7, 2.0).unwrap();
        let y00 = sh_basis(0, 0, d).unwrap();
        assert!((y00 - 0.282_094_791_773_878_1).abs() < 1e-15);
        let pole = Direction::new(0.0, 0.0).unwrap();
        assert!((sh_basis(1, 0, pole).unwrap() - 0.488_602_511_902_919_9).abs() < 1e-15);
        // Y_1^1 ∝ x, Y_1^-1 ∝ y
        let v = sph_to_cart(d);
        let k = (3.0 / (4.0 * PI)).sqrt();
        assert!((sh_basis(1, 1, d).unwrap() - k * v.x).abs() < 1e-14);
        assert!((sh_basis(1, -1, d).unwrap() - k * v.y).abs() < 1e-14);
    }

    #[test]
    fn invalid_m_rejected() {
        let d = Direction::new(1.0, 1.0).unwrap();
        assert!(matches!(sh_basis(2, 3, d), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constant_field_projects_to_l0() {
        let g = grid();
        let f = SphericalField::new(g.clone(), vec![0.5; g.len()], 125.0, 5.0).unwrap();
        let c = project(&f, 3).unwrap();
        assert!((c.coeffs[0] - 0.5 * 2.0 * PI.sqrt()).abs() < 1e-10);
        assert!(c.coeffs[1..].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn constant_reconstruction() {
        let mut c = SHCoefficients::zeros(3, 125.0);
        c.coeffs[0] = 2.0 * PI.sqrt();
        for &p in grid().points().iter().step_by(17) {
            assert!((c.evaluate_vec(p) - 1.0).abs() < 1e-14);
        }
        let z = SHCoefficients::zeros(3, 125.0);
        assert_eq!(z.evaluate(Direction::new(1.0, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn band_limited_round_trip() {
        let g = grid();
        let mut rng = crate::rng::seeded(7);
        use rand::Rng;
        let truth: Vec<f64> = (0..16).map(|_| rng.random_range(-0.1..0.1)).collect();
        let mut truth = truth;
        truth[0] = 1.2;
        let c = SHCoefficients::new(3, truth.clone(), 500.0).unwrap();
        let f = SphericalField::from_coefficients(g, &c, 5.0);
        assert!(f.pressures().iter().all(|p| *p > 0.0 && *p < 1.0));
        let back = project(&f, 3).unwrap();
        for (a, b) in back.coeffs.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn underdetermined_rejected() {
        let g = icosphere(0).unwrap();
        assert!(matches!(
            Projector::new(g.points(), 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rank_deficient_reports_condition() {
        // every point on the equator: Y_1^0 vanishes identically
        let pts: Vec<Vec3> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.157;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        match Projector::new(&pts, 1) {
            Err(Error::NumericalFailure { condition, .. }) => assert!(condition > 1e6),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn nre_reference_values() {
        let g = grid();
        let vals: Vec<f64> = g.points().iter().map(|p| 0.25 + 0.2 * p.x).collect();
        let f = SphericalField::new(g.clone(), vals.clone(), 250.0, 5.0).unwrap();
        assert_eq!(nre(&f, &f).unwrap(), 0.0);
        let zero = SphericalField::new(g.clone(), vec![0.0; g.len()], 250.0, 5.0).unwrap();
        assert!((nre(&f, &zero).unwrap() - 1.0).abs() < 1e-15);
        let doubled = SphericalField::new(g.clone(), vals.iter().map(|v| 2.0 * v).collect(), 250.0, 5.0).unwrap();
        assert!((nre(&f, &doubled).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(nre(&zero, &f), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn nre_rejects_frequency_mismatch() {
        let g = grid();
        let a = SphericalField::new(g.clone(), vec![0.3; g.len()], 250.0, 5.0).unwrap();
        let b = SphericalField::new(g.clone(), vec![0.3; g.len()], 500.0, 5.0).unwrap();
        assert!(nre(&a, &b).is_err());
    }

    #[test]
    fn field_rejects_out_of_range() {
        let g = grid();
        assert!(SphericalField::new(g.clone(), vec![1.5; g.len()], 125.0, 5.0).is_err());
        assert!(SphericalField::new(g.clone(), vec![0.5; 3], 125.0, 5.0).is_err());
        assert!(SphericalField::new(g.clone(), vec![0.5; g.len()], 125.0, 0.0).is_err());
    }

    #[test]
    fn band_limited_curve_is_zero_above_its_order() {
        let g = grid();
        let mut c = SHCoefficients::zeros(2, 125.0);
        c.coeffs[0] = 1.0;
        c.coeffs[2] = 0.2;
        c.coeffs[6] = 0.1;
        let f = SphericalField::from_coefficients(g, &c, 5.0);
        let curve = fit_error_curve(&f, 5).unwrap();
        assert_eq!(curve.len(), 6);
        for e in &curve[2..] {
            assert!(e.relative_error < 1e-18 && e.amplitude_error < 1e-9, "{e:?}");
        }
        for w in curve.windows(2) {
            assert!(w[1].relative_error <= w[0].relative_error + 1e-15);
        }
    }
}
