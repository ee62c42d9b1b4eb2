//! Minimal-surface conformal factors from the Gauss equation.
//!
//! A minimal disk in hyperbolic 3-space equivariant under the surface group
//! induces a metric `e^{2u} g_hyp` on the quotient surface, where `u` solves
//!
//! ```text
//! Delta u + 1 - e^{2u} - q e^{-2u} = 0,      q = |t alpha|^2 / g0^2
//! ```
//!
//! with `Delta` the hyperbolic Laplacian, `g0` the hyperbolic conformal
//! density of the disk chart and `t alpha` the quadratic differential
//! prescribing the second fundamental form. The solver runs damped Newton
//! iterations: each step solves the symmetric positive system
//! `(K + M c) dz = M F` with conjugate gradients preconditioned by the mass
//! diagonal, then backtracks on the mass-weighted residual square until the
//! step decreases it. Every float operation is sequential and deterministic,
//! so repeated solves reproduce results bit for bit.
//!
//! The principal curvatures of the immersion are `+/- lambda` with
//! `lambda = |t alpha| e^{-2u} / g0`; the immersion stays in the
//! almost-Fuchsian regime exactly when `lambda < 1` everywhere.

use crate::moebius::GroupError;
use crate::sparse::conjugate_gradient;
use crate::surface::{
    hyperbolic_metric_factor, MeshError, QuadDifferentialField, SampledSurface, ScalarField,
};
use num_complex::Complex64;
use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_NEWTON: u32 = 50;

/// Default cap on `|t|`; far beyond the almost-Fuchsian onset for the
/// differentials produced here, where the quasi-Newton continuation loses
/// its footing anyway.
pub const DEFAULT_T_CAP: f64 = 0.5;

const ARMIJO_SLOPE: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / (1 << 20) as f64;
const CG_TOLERANCE: f64 = 1e-12;
const CG_MAX_ITERATIONS: u32 = 200_000;

#[derive(Debug, Error)]
pub enum GaussError {
    #[error("|t| = {modulus} exceeds the solver cap {cap}")]
    ParameterCap { modulus: f64, cap: f64 },
    #[error("no convergence after {iterations} Newton steps, residual {residual:e}")]
    NonConvergence { iterations: u32, residual: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Knobs for [`solve_gauss`]. `initial_u` warm-starts the Newton iteration,
/// for continuation in `t`.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_newton: u32,
    pub t_cap: f64,
    pub initial_u: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_newton: DEFAULT_MAX_NEWTON,
            t_cap: DEFAULT_T_CAP,
            initial_u: None,
        }
    }
}

/// Converged minimal-surface data at one point of the parameter disk.
#[derive(Debug, Clone)]
pub struct MinimalSurfaceData {
    pub t: Complex64,
    /// Log conformal factor of the induced metric over the hyperbolic one.
    pub u: ScalarField,
    /// Pointwise principal curvature magnitude.
    pub lambda: ScalarField,
    /// Real part of the shape operator's trace-free form: the second
    /// fundamental form is `Re(t alpha dz^2)` and the shape operator in an
    /// orthonormal frame is `[[a, b], [b, -a]]`.
    pub shape_a: ScalarField,
    pub shape_b: ScalarField,
    pub almost_fuchsian: bool,
    pub iterations: u32,
    pub residual: f64,
}

impl MinimalSurfaceData {
    pub fn max_lambda(&self) -> f64 {
        self.lambda.max_abs()
    }
}

fn check_alpha(surface: &SampledSurface, alpha: &QuadDifferentialField) -> Result<(), GaussError> {
    if alpha.len() != surface.point_count() {
        return Err(GaussError::Mesh(MeshError::DimensionMismatch {
            expected: surface.point_count(),
            found: alpha.len(),
        }));
    }
    Ok(())
}

/// Pointwise curvature magnitude `|t alpha| e^{-2u} / g0`.
pub fn principal_curvature_field(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    t: Complex64,
    u: &ScalarField,
) -> Result<ScalarField, GaussError> {
    check_alpha(surface, alpha)?;
    if u.len() != surface.point_count() {
        return Err(GaussError::Mesh(MeshError::DimensionMismatch {
            expected: surface.point_count(),
            found: u.len(),
        }));
    }
    let values = surface
        .points()
        .iter()
        .zip(alpha.values.iter().zip(&u.values))
        .map(|(&z, (&a, &ui))| {
            t.norm() * a.norm() * (-2.0 * ui).exp() / hyperbolic_metric_factor(z)
        })
        .collect();
    Ok(ScalarField::new(values))
}

/// Shape operator entries `(a, b)` in an orthonormal frame of the induced
/// metric: `a + i b = conj(t alpha) e^{-2u} / g0`.
pub fn second_fundamental_form_components(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    t: Complex64,
    u: &ScalarField,
) -> Result<(ScalarField, ScalarField), GaussError> {
    check_alpha(surface, alpha)?;
    if u.len() != surface.point_count() {
        return Err(GaussError::Mesh(MeshError::DimensionMismatch {
            expected: surface.point_count(),
            found: u.len(),
        }));
    }
    let mut va = Vec::with_capacity(u.len());
    let mut vb = Vec::with_capacity(u.len());
    for (&z, (&al, &ui)) in surface
        .points()
        .iter()
        .zip(alpha.values.iter().zip(&u.values))
    {
        let scale = (-2.0 * ui).exp() / hyperbolic_metric_factor(z);
        let ta = t * al;
        va.push(ta.re * scale);
        vb.push(-ta.im * scale);
    }
    Ok((ScalarField::new(va), ScalarField::new(vb)))
}

/// Solves the conformal factor equation for the prescribed differential
/// `t alpha` and packages the geometry of the resulting minimal surface.
pub fn solve_gauss(
    surface: &SampledSurface,
    alpha: &QuadDifferentialField,
    t: Complex64,
    options: &SolveOptions,
) -> Result<MinimalSurfaceData, GaussError> {
    check_alpha(surface, alpha)?;
    if t.norm() > options.t_cap {
        return Err(GaussError::ParameterCap {
            modulus: t.norm(),
            cap: options.t_cap,
        });
    }
    let n = surface.point_count();
    let mass = surface.mass();
    let stiffness = surface.stiffness();
    let q: Vec<f64> = surface
        .points()
        .iter()
        .zip(&alpha.values)
        .map(|(&z, &a)| {
            let g0 = hyperbolic_metric_factor(z);
            t.norm_sqr() * a.norm_sqr() / (g0 * g0)
        })
        .collect();

    let mut u = match &options.initial_u {
        Some(start) => {
            if start.len() != n {
                return Err(GaussError::Mesh(MeshError::DimensionMismatch {
                    expected: n,
                    found: start.len(),
                }));
            }
            start.clone()
        }
        None => vec![0.0; n],
    };

    // F(u) = Delta u + 1 - e^{2u} - q e^{-2u}, with Delta = -M^{-1} K.
    let mut ku = vec![0.0; n];
    let residual_vec = |u: &[f64], ku: &mut Vec<f64>| -> Vec<f64> {
        stiffness.mul_vec(u, ku);
        u.iter()
            .zip(ku.iter())
            .zip(mass.iter().zip(&q))
            .map(|((&ui, &kui), (&mi, &qi))| {
                -kui / mi + 1.0 - (2.0 * ui).exp() - qi * (-2.0 * ui).exp()
            })
            .collect()
    };
    let merit = |f: &[f64]| -> f64 { f.iter().zip(mass).map(|(fi, mi)| mi * fi * fi).sum() };
    let sup = |f: &[f64]| -> f64 { f.iter().fold(0.0f64, |m, v| m.max(v.abs())) };

    let mut f = residual_vec(&u, &mut ku);
    let mut res = sup(&f);
    let mut iterations = 0;
    while res >= options.tolerance {
        if iterations >= options.max_newton {
            return Err(GaussError::NonConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        // Linearization: (K + M c) step = M F with c = 2 e^{2u} - 2 q e^{-2u},
        // positive definite throughout the almost-Fuchsian regime.
        let c: Vec<f64> = u
            .iter()
            .zip(&q)
            .map(|(&ui, &qi)| 2.0 * (2.0 * ui).exp() - 2.0 * qi * (-2.0 * ui).exp())
            .collect();
        let rhs: Vec<f64> = f.iter().zip(mass).map(|(fi, mi)| fi * mi).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            stiffness.mul_vec(x, out);
            for ((o, &xi), (&mi, &ci)) in out.iter_mut().zip(x).zip(mass.iter().zip(&c)) {
                *o += mi * ci * xi;
            }
        };
        let zero = vec![0.0; n];
        let (step, _) =
            conjugate_gradient(apply, mass, &rhs, &zero, CG_TOLERANCE, CG_MAX_ITERATIONS)
                .map_err(|_| GaussError::NonConvergence {
                    iterations,
                    residual: res,
                })?;
        let phi = merit(&f);
        let mut s = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(&ui, &di)| ui + s * di).collect();
            let f_trial = residual_vec(&trial, &mut ku);
            let phi_trial = merit(&f_trial);
            if phi_trial <= (1.0 - ARMIJO_SLOPE * s) * phi {
                u = trial;
                f = f_trial;
                break;
            }
            s *= 0.5;
            if s < MIN_STEP {
                return Err(GaussError::NonConvergence {
                    iterations,
                    residual: res,
                });
            }
        }
        res = sup(&f);
    }

    let u = ScalarField::new(u);
    let lambda = principal_curvature_field(surface, alpha, t, &u)?;
    let (shape_a, shape_b) = second_fundamental_form_components(surface, alpha, t, &u)?;
    let almost_fuchsian = lambda.max_abs() < 1.0;
    Ok(MinimalSurfaceData {
        t,
        u,
        lambda,
        shape_a,
        shape_b,
        almost_fuchsian,
        iterations,
        residual: res,
    })
}
