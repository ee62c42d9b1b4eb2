//! Weil-Petersson pairing of quadratic differentials and its reflection in
//! the area of the minimal-surface family.
//!
//! The pairing integrates `alpha conj(beta)` against the hyperbolic area
//! element divided by the squared metric density, evaluated with the
//! surface's lumped quadrature. Its geometric content is checked through
//! the area functional: the area of the minimal surface for the small
//! quadratic differential `t alpha + s beta` has no first-order term, and
//! its mixed second derivative in `t, conj(s)` at the origin is minus the
//! pairing. The mixed derivative is formed from central differences; since
//! the area depends on the coefficient pair only through the squared
//! combined field, the sixteen difference corners collapse to four
//! distinct elliptic solves, one per polarization combination.

use crate::gauss::{solve_gauss, GaussError, MinimalSurfaceData, SolveOptions};
use crate::numeric::{KahanComplexSum, KahanSum};
use crate::surface::{hyperbolic_metric_factor, QuadDifferentialField, SampledSurface};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WpError {
    #[error("field has {found} values but the surface has {expected} points")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("difference step {step} is not a positive finite number")]
    BadStep { step: f64 },
    #[error("need at least two increasing positive probe sizes")]
    BadProbes,
    #[error(transparent)]
    Gauss(#[from] GaussError),
}

/// Outcome of the finite-difference comparison for one pair of fields.
#[derive(Debug, Clone)]
pub struct WpReport {
    pub pairing: Complex64,
    pub finite_difference: Complex64,
    /// `|finite_difference + pairing| / |pairing|`.
    pub rel_error: f64,
    pub step: f64,
    pub solves: u32,
}

fn check_len(surface: &SampledSurface, field: &QuadDifferentialField) -> Result<(), WpError> {
    if field.values.len() != surface.point_count() {
        return Err(WpError::DimensionMismatch {
            expected: surface.point_count(),
            found: field.values.len(),
        });
    }
    Ok(())
}

/// Hermitian pairing `sum m_i alpha_i conj(beta_i) / g0(z_i)^2`.
pub fn wp_pairing(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    beta: &QuadDifferentialField,
) -> Result<Complex64, WpError> {
    check_len(surface, alpha)?;
    check_len(surface, beta)?;
    let mut acc = KahanComplexSum::new();
    for (i, (&a, &b)) in alpha.values.iter().zip(&beta.values).enumerate() {
        let g = hyperbolic_metric_factor(surface.points()[i]);
        acc.add(a * b.conj() * (surface.mass()[i] / (g * g)));
    }
    Ok(acc.value())
}

/// Area of the minimal surface in the induced metric, `sum m_i e^{2 u_i}`.
pub fn minimal_surface_area(surface: &SampledSurface, data: &MinimalSurfaceData) -> f64 {
    let mut acc = KahanSum::new();
    for (&m, &u) in surface.mass().iter().zip(&data.u.values) {
        acc.add(m * (2.0 * u).exp());
    }
    acc.value()
}

fn solve_combination(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    beta: &QuadDifferentialField,
    c1: Complex64,
    c2: Complex64,
    warm: Option<Vec<f64>>,
) -> Result<MinimalSurfaceData, GaussError> {
    let values: Vec<Complex64> = alpha
        .values
        .iter()
        .zip(&beta.values)
        .map(|(&a, &b)| c1 * a + c2 * b)
        .collect();
    let field = QuadDifferentialField {
        values,
        automorphy_residual: alpha.automorphy_residual.max(beta.automorphy_residual),
    };
    let options = SolveOptions {
        t_cap: f64::INFINITY,
        initial_u: warm,
        ..SolveOptions::default()
    };
    solve_gauss(surface, &field, Complex64::new(1.0, 0.0), &options)
}

/// Mixed central-difference second variation of the area against the
/// pairing. The four distinct solves are warm-started in sequence, so a
/// rerun reproduces the report bit for bit.
pub fn second_variation_fd(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    beta: &QuadDifferentialField,
    step: f64,
) -> Result<WpReport, WpError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(WpError::BadStep { step });
    }
    check_len(surface, alpha)?;
    check_len(surface, beta)?;
    let pairing = wp_pairing(surface, alpha, beta)?;
    let h = Complex64::new(step, 0.0);
    let mut warm: Option<Vec<f64>> = None;
    let mut solves = 0u32;
    let mut area_at = |c2: Complex64, warm: &mut Option<Vec<f64>>| -> Result<f64, WpError> {
        let data = solve_combination(surface, alpha, beta, h, c2 * step, warm.take())?;
        *warm = Some(data.u.values.clone());
        solves += 1;
        Ok(minimal_surface_area(surface, &data))
    };
    let plus = area_at(Complex64::new(1.0, 0.0), &mut warm)?;
    let minus = area_at(Complex64::new(-1.0, 0.0), &mut warm)?;
    let plus_i = area_at(Complex64::new(0.0, 1.0), &mut warm)?;
    let minus_i = area_at(Complex64::new(0.0, -1.0), &mut warm)?;
    let finite_difference =
        Complex64::new(plus - minus, plus_i - minus_i) / (4.0 * step * step);
    let scale = pairing.norm();
    let defect = (finite_difference + pairing).norm();
    let rel_error = if scale > 0.0 { defect / scale } else { defect };
    Ok(WpReport {
        pairing,
        finite_difference,
        rel_error,
        step,
        solves,
    })
}

/// Least-squares log-log slope of `|area(t) - area(0)|` over the probe
/// sizes; a value near two reflects the vanishing first variation.
pub fn first_variation_slope(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    probes: &[f64],
) -> Result<f64, WpError> {
    if probes.len() < 2 || probes.windows(2).any(|w| w[0] >= w[1]) || probes[0] <= 0.0 {
        return Err(WpError::BadProbes);
    }
    check_len(surface, alpha)?;
    let base = surface.total_mass();
    let zero = QuadDifferentialField {
        values: vec![Complex64::new(0.0, 0.0); alpha.values.len()],
        automorphy_residual: 0.0,
    };
    let mut warm: Option<Vec<f64>> = None;
    let mut xs = Vec::with_capacity(probes.len());
    let mut ys = Vec::with_capacity(probes.len());
    for &t in probes {
        let data = solve_combination(
            surface,
            alpha,
            &zero,
            Complex64::new(t, 0.0),
            Complex64::new(0.0, 0.0),
            warm.take(),
        )?;
        warm = Some(data.u.values.clone());
        let dev = (minimal_surface_area(surface, &data) - base).abs();
        if dev == 0.0 {
            return Err(WpError::BadProbes);
        }
        xs.push(t.ln());
        ys.push(dev.ln());
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::FuchsianGroup;
    use crate::surface::{build_sampled_surface, poincare_series_batch, Polynomial};

    fn basis_fields(
        resolution: u32,
        word_length: u32,
    ) -> (SampledSurface, Vec<QuadDifferentialField>) {
        let group = FuchsianGroup::bolza();
        let surface = build_sampled_surface(&group, resolution).unwrap();
        let polys = vec![
            Polynomial::parse("1").unwrap(),
            Polynomial::parse("1+z^2").unwrap(),
            Polynomial::parse("1+z^2+z^4").unwrap(),
        ];
        let fields = poincare_series_batch(&polys, &group, word_length, &surface).unwrap();
        (surface, fields)
    }

    fn scaled(field: &QuadDifferentialField, c: Complex64) -> QuadDifferentialField {
        QuadDifferentialField {
            values: field.values.iter().map(|&v| c * v).collect(),
            automorphy_residual: field.automorphy_residual,
        }
    }

    #[test]
    fn pairing_is_hermitian_to_the_bit() {
        let (surface, fields) = basis_fields(12, 2);
        let ab = wp_pairing(&surface, &fields[0], &fields[1]).unwrap();
        let ba = wp_pairing(&surface, &fields[1], &fields[0]).unwrap();
        assert_eq!(ab.re, ba.re);
        assert_eq!(ab.im, -ba.im);
        let aa = wp_pairing(&surface, &fields[0], &fields[0]).unwrap();
        assert_eq!(aa.im, 0.0);
        assert!(aa.re > 0.0);
    }

    #[test]
    fn pairing_is_sesquilinear() {
        let (surface, fields) = basis_fields(12, 2);
        let c = Complex64::new(0.3, -0.7);
        let base = wp_pairing(&surface, &fields[0], &fields[1]).unwrap();
        let left = wp_pairing(&surface, &scaled(&fields[0], c), &fields[1]).unwrap();
        let right = wp_pairing(&surface, &fields[0], &scaled(&fields[1], c)).unwrap();
        assert!((left - c * base).norm() < 1e-12 * base.norm().max(1.0));
        assert!((right - c.conj() * base).norm() < 1e-12 * base.norm().max(1.0));
    }

    #[test]
    fn gram_matrix_of_the_default_basis_is_positive_definite() {
        let (surface, fields) = basis_fields(16, 4);
        let mut g = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = wp_pairing(&surface, &fields[i], &fields[j]).unwrap();
            }
        }
        // Sylvester minors of the Hermitian matrix.
        let d1 = g[0][0].re;
        let d2 = g[0][0].re * g[1][1].re - g[0][1].norm_sqr();
        let d3 = (g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]))
            .re;
        assert!(d1 > 0.0);
        assert!(d2 > 0.0);
        assert!(d3 > 0.0);
    }

    #[test]
    fn distinct_rotation_characters_are_orthogonal() {
        let group = FuchsianGroup::bolza();
        let surface = build_sampled_surface(&group, 16).unwrap();
        let polys = vec![
            Polynomial::parse("1").unwrap(),
            Polynomial::parse("z^2").unwrap(),
        ];
        let rough = poincare_series_batch(&polys, &group, 2, &surface).unwrap();
        let fields = poincare_series_batch(&polys, &group, 4, &surface).unwrap();
        let n0 = wp_pairing(&surface, &fields[0], &fields[0]).unwrap().re;
        let n1 = wp_pairing(&surface, &fields[1], &fields[1]).unwrap().re;
        assert!(n0 > 1e-4);
        assert!(n1 > 1e-4);
        // Exact only in the limit: the quotient evaluates boundary classes
        // at one representative, so truncation leaks into the cancellation.
        let leaky = wp_pairing(&surface, &rough[0], &rough[1]).unwrap();
        let cross = wp_pairing(&surface, &fields[0], &fields[1]).unwrap();
        assert!(cross.norm() < 1e-6 * (n0 * n1).sqrt());
        assert!(cross.norm() < leaky.norm() / 50.0);
    }

    #[test]
    fn pairings_are_stable_under_refinement() {
        let group = FuchsianGroup::bolza();
        let coarse = build_sampled_surface(&group, 16).unwrap();
        let fine = build_sampled_surface(&group, 32).unwrap();
        let poly = vec![Polynomial::parse("1").unwrap()];
        let fc = poincare_series_batch(&poly, &group, 4, &coarse).unwrap();
        let ff = poincare_series_batch(&poly, &group, 4, &fine).unwrap();
        let pc = wp_pairing(&coarse, &fc[0], &fc[0]).unwrap().re;
        let pf = wp_pairing(&fine, &ff[0], &ff[0]).unwrap().re;
        assert!(
            (pc - pf).abs() < 0.01 * pf,
            "coarse {pc} vs fine {pf}"
        );
    }

    #[test]
    fn diagonal_second_variation_is_negative_real() {
        let (surface, fields) = basis_fields(12, 4);
        let report = second_variation_fd(&surface, &fields[0], &fields[0], 0.05).unwrap();
        assert_eq!(report.solves, 4);
        assert!(report.finite_difference.re < 0.0);
        assert!(
            report.finite_difference.im.abs() < 0.05 * report.finite_difference.re.abs()
        );
        assert!(report.rel_error < 0.05, "rel error {}", report.rel_error);
    }

    #[test]
    fn mixed_second_variation_tracks_complex_pairings() {
        let (surface, fields) = basis_fields(12, 4);
        let c = Complex64::new(0.6, 0.8);
        let beta = scaled(&fields[0], c);
        let report = second_variation_fd(&surface, &fields[0], &beta, 0.05).unwrap();
        assert!(report.pairing.im.abs() > 0.1 * report.pairing.norm());
        assert!(report.rel_error < 0.05, "rel error {}", report.rel_error);
        let cross = second_variation_fd(&surface, &fields[0], &fields[1], 0.05).unwrap();
        assert!(cross.rel_error < 0.05, "rel error {}", cross.rel_error);
    }

    #[test]
    fn difference_error_shrinks_quadratically() {
        let (surface, fields) = basis_fields(12, 4);
        let coarse = second_variation_fd(&surface, &fields[0], &fields[1], 0.1).unwrap();
        let fine = second_variation_fd(&surface, &fields[0], &fields[1], 0.05).unwrap();
        let ratio = coarse.rel_error / fine.rel_error;
        assert!(
            (2.5..6.0).contains(&ratio),
            "refinement ratio {ratio} from {} to {}",
            coarse.rel_error,
            fine.rel_error
        );
    }

    #[test]
    fn area_deviation_grows_quadratically_in_t() {
        let (surface, fields) = basis_fields(12, 4);
        let slope =
            first_variation_slope(&surface, &fields[0], &[0.02, 0.04, 0.08]).unwrap();
        assert!((1.8..2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let (surface, fields) = basis_fields(12, 2);
        let short = QuadDifferentialField {
            values: vec![Complex64::new(1.0, 0.0); 3],
            automorphy_residual: 0.0,
        };
        assert!(matches!(
            wp_pairing(&surface, &fields[0], &short),
            Err(WpError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            second_variation_fd(&surface, &fields[0], &fields[1], 0.0),
            Err(WpError::BadStep { .. })
        ));
        assert!(matches!(
            first_variation_slope(&surface, &fields[0], &[0.08, 0.02]),
            Err(WpError::BadProbes)
        ));
    }
}
