//! The parallel foliation spread out from an almost-Fuchsian minimal surface.
//!
//! Flowing the minimal surface along its unit normal for a signed distance
//! `r` sweeps out leaves whose induced metric, in the principal frame of the
//! shape operator, is `e^{2v} (cosh r I + sinh r S)^2` with `v` the induced
//! log density and `S` the trace-free shape operator. When the principal
//! curvatures stay inside `(-1, 1)` the leaves foliate the whole quasi-Fuchsian
//! end pair, their principal curvatures `(tanh r -/+ lambda)/(1 -/+ lambda tanh r)`
//! sweep monotonically to `+/-1`, and the complex dilatation of a leaf
//! against the central one is `tanh(r) (a + i b)`.
//!
//! Comparing the conformal structures of far leaves bounds the Teichmueller
//! distance between the two ends; the bound here is the integrated form
//! `(1/2) |B(r2) - B(r1)|` with `B(r) = log((1 + k tanh r)/(1 - k tanh r))`
//! evaluated at a curvature bound `k`, finite at infinite `r`.

use crate::gauss::MinimalSurfaceData;
use crate::surface::{
    hyperbolic_metric_factor, MeshError, SampledSurface, ScalarField,
};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FoliationError {
    #[error("a principal curvature reaches {max}, outside the open unit range")]
    CurvatureRange { max: f64 },
    #[error("curvature bound {lambda0} outside [0, 1)")]
    BadBound { lambda0: f64 },
    #[error("metric is not Riemannian (determinant {det:e})")]
    Degenerate { det: f64 },
    #[error("compactified coordinate {t} outside [-1, 1]")]
    BadSlice { t: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Pointwise symmetric 2x2 metric samples `[[e, f], [f, g]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl MetricField {
    pub fn new(e: Vec<f64>, f: Vec<f64>, g: Vec<f64>) -> Result<Self, FoliationError> {
        if e.len() != f.len() || e.len() != g.len() {
            return Err(FoliationError::Mesh(MeshError::DimensionMismatch {
                expected: e.len(),
                found: f.len().max(g.len()),
            }));
        }
        Ok(Self { e, f, g })
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn det(&self, i: usize) -> f64 {
        self.e[i] * self.g[i] - self.f[i] * self.f[i]
    }
}

/// Beltrami coefficient of the identity from the conformal class of the
/// hyperbolic chart to `metric`: `(E - G + 2iF) / (E + G + 2 sqrt(EG - F^2))`
/// at each sample.
pub fn complex_dilatation(metric: &MetricField) -> Result<Vec<Complex64>, FoliationError> {
    let mut out = Vec::with_capacity(metric.len());
    for i in 0..metric.len() {
        let (e, f, g) = (metric.e[i], metric.f[i], metric.g[i]);
        let det = e * g - f * f;
        if det <= 0.0 || e + g <= 0.0 {
            return Err(FoliationError::Degenerate { det });
        }
        out.push(Complex64::new(e - g, 2.0 * f) / (e + g + 2.0 * det.sqrt()));
    }
    Ok(out)
}

fn check_lengths(surface: &SampledSurface, data: &MinimalSurfaceData) -> Result<(), FoliationError> {
    if data.u.len() != surface.point_count() {
        return Err(FoliationError::Mesh(MeshError::DimensionMismatch {
            expected: surface.point_count(),
            found: data.u.len(),
        }));
    }
    Ok(())
}

/// Induced metric of the leaf at normal distance `r`, from the trace-free
/// shape data of the central minimal surface.
pub fn parallel_metric(
    surface: &SampledSurface,
    data: &MinimalSurfaceData,
    r: f64,
) -> Result<MetricField, FoliationError> {
    check_lengths(surface, data)?;
    let max = data.lambda.max_abs();
    if !(max < 1.0) {
        return Err(FoliationError::CurvatureRange { max });
    }
    let (alpha, beta) = (r.cosh(), r.sinh());
    let n = surface.point_count();
    let mut em = Vec::with_capacity(n);
    let mut fm = Vec::with_capacity(n);
    let mut gm = Vec::with_capacity(n);
    for i in 0..n {
        let e2v = (2.0 * data.u.values[i]).exp() * hyperbolic_metric_factor(surface.points()[i]);
        let (a, b) = (data.shape_a.values[i], data.shape_b.values[i]);
        let l2 = a * a + b * b;
        em.push(e2v * (alpha * alpha + 2.0 * a * alpha * beta + beta * beta * l2));
        fm.push(e2v * 2.0 * b * alpha * beta);
        gm.push(e2v * (alpha * alpha - 2.0 * a * alpha * beta + beta * beta * l2));
    }
    Ok(MetricField { e: em, f: fm, g: gm })
}

/// Same flow for a general symmetric shape operator `[[a, b], [b, c]]` over
/// an arbitrary conformal density; the eigenvalues must stay inside the
/// open unit interval.
pub fn parallel_metric_general(
    conformal: &ScalarField,
    a: &ScalarField,
    b: &ScalarField,
    c: &ScalarField,
    r: f64,
) -> Result<MetricField, FoliationError> {
    let n = conformal.len();
    if a.len() != n || b.len() != n || c.len() != n {
        return Err(FoliationError::Mesh(MeshError::DimensionMismatch {
            expected: n,
            found: a.len().max(b.len()).max(c.len()),
        }));
    }
    let (alpha, beta) = (r.cosh(), r.sinh());
    let mut em = Vec::with_capacity(n);
    let mut fm = Vec::with_capacity(n);
    let mut gm = Vec::with_capacity(n);
    for i in 0..n {
        let (ai, bi, ci) = (a.values[i], b.values[i], c.values[i]);
        let spread = (0.25 * (ai - ci) * (ai - ci) + bi * bi).sqrt();
        let reach = (0.5 * (ai + ci)).abs() + spread;
        if !(reach < 1.0) {
            return Err(FoliationError::CurvatureRange { max: reach });
        }
        let s = conformal.values[i];
        em.push(s * (alpha * alpha + 2.0 * ai * alpha * beta + beta * beta * (ai * ai + bi * bi)));
        fm.push(s * (2.0 * bi * alpha * beta + bi * beta * beta * (ai + ci)));
        gm.push(s * (alpha * alpha + 2.0 * ci * alpha * beta + beta * beta * (ci * ci + bi * bi)));
    }
    Ok(MetricField { e: em, f: fm, g: gm })
}

/// Principal curvatures of the leaf at distance `r`, pointwise
/// `((tanh r - lambda)/(1 - lambda tanh r), (tanh r + lambda)/(1 + lambda tanh r))`.
pub fn parallel_principal_curvatures(
    surface: &SampledSurface,
    data: &MinimalSurfaceData,
    r: f64,
) -> Result<(ScalarField, ScalarField), FoliationError> {
    check_lengths(surface, data)?;
    let max = data.lambda.max_abs();
    if !(max < 1.0) {
        return Err(FoliationError::CurvatureRange { max });
    }
    let tau = r.tanh();
    let mut low = Vec::with_capacity(data.lambda.len());
    let mut high = Vec::with_capacity(data.lambda.len());
    for &l in &data.lambda.values {
        low.push((tau - l) / (1.0 - l * tau));
        high.push((tau + l) / (1.0 + l * tau));
    }
    Ok((ScalarField::new(low), ScalarField::new(high)))
}

/// One leaf of the foliation: metric plus principal curvatures.
#[derive(Debug, Clone)]
pub struct FoliationLeaf {
    pub r: f64,
    pub metric: MetricField,
    pub principal_low: ScalarField,
    pub principal_high: ScalarField,
}

impl FoliationLeaf {
    pub fn from_minimal_data(
        surface: &SampledSurface,
        data: &MinimalSurfaceData,
        r: f64,
    ) -> Result<Self, FoliationError> {
        let metric = parallel_metric(surface, data, r)?;
        let (principal_low, principal_high) = parallel_principal_curvatures(surface, data, r)?;
        Ok(Self {
            r,
            metric,
            principal_low,
            principal_high,
        })
    }

    /// Leaf area: the quotient of area densities against the mesh mass.
    pub fn area(&self, surface: &SampledSurface) -> Result<f64, FoliationError> {
        if self.metric.len() != surface.point_count() {
            return Err(FoliationError::Mesh(MeshError::DimensionMismatch {
                expected: surface.point_count(),
                found: self.metric.len(),
            }));
        }
        let mut acc = crate::numeric::KahanSum::new();
        for i in 0..self.metric.len() {
            let det = self.metric.det(i);
            if det <= 0.0 {
                return Err(FoliationError::Degenerate { det });
            }
            let g0 = hyperbolic_metric_factor(surface.points()[i]);
            acc.add(surface.mass()[i] * det.sqrt() / g0);
        }
        Ok(acc.value())
    }
}

/// Dilatation of the identity between the leaves at `r1` and `r2` over a
/// point of curvature `lambda`, in closed form.
pub fn leaf_dilatation_pair(lambda: f64, r1: f64, r2: f64) -> f64 {
    let (t1, t2) = (r1.tanh(), r2.tanh());
    lambda * (t2 - t1).abs() / (1.0 - lambda * lambda * t1 * t2)
}

/// Dilatation of the flow from a leaf with shape operator `[[a, b], [b, c]]`
/// to the parallel leaf `delta_r` further out, as a complex Beltrami
/// coefficient `sinh(dr) (a - c + 2ib) / (2 cosh(dr) + (a + c) sinh(dr))`.
pub fn intermediate_leaf_dilatation(a: f64, b: f64, c: f64, delta_r: f64) -> Complex64 {
    let (alpha, beta) = (delta_r.cosh(), delta_r.sinh());
    Complex64::new(a - c, 2.0 * b) * beta / (2.0 * alpha + (a + c) * beta)
}

/// Chart dilatation of the ends: the limit of the leaf dilatations as
/// `r` runs to the chosen end, `+/-(a + ib)` pointwise.
pub fn boundary_dilatation(
    shape_a: &ScalarField,
    shape_b: &ScalarField,
    positive_end: bool,
) -> Vec<Complex64> {
    let sign = if positive_end { 1.0 } else { -1.0 };
    shape_a
        .values
        .iter()
        .zip(&shape_b.values)
        .map(|(&a, &b)| Complex64::new(sign * a, sign * b))
        .collect()
}

/// Point of the closed interval `[-inf, +inf]` parameterizing leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub fn tanh(self) -> f64 {
        match self {
            ExtendedReal::NegInf => -1.0,
            ExtendedReal::Finite(r) => r.tanh(),
            ExtendedReal::PosInf => 1.0,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(r: f64) -> Self {
        ExtendedReal::Finite(r)
    }
}

impl std::fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtendedReal::NegInf => write!(f, "-inf"),
            ExtendedReal::Finite(r) => write!(f, "{r}"),
            ExtendedReal::PosInf => write!(f, "inf"),
        }
    }
}

/// Odd primitive `B(r) = log((1 + k tanh r)/(1 - k tanh r))`, computed so
/// that `B(-r) = -B(r)` holds exactly in floating point.
fn end_potential(lambda0: f64, r: ExtendedReal) -> f64 {
    let tau = r.tanh();
    let mag = ((1.0 + lambda0 * tau.abs()) / (1.0 - lambda0 * tau.abs())).ln();
    if tau < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Upper bound for the Teichmueller distance between the conformal
/// structures seen by the leaves at `r1` and `r2`, for a global curvature
/// bound `lambda0` of the central surface. Both parameters may be infinite;
/// the full bound between the two ends is `r1 = -inf`, `r2 = +inf`.
pub fn teich_bound(
    lambda0: f64,
    r1: ExtendedReal,
    r2: ExtendedReal,
) -> Result<f64, FoliationError> {
    if !(0.0..1.0).contains(&lambda0) {
        return Err(FoliationError::BadBound { lambda0 });
    }
    Ok(0.5 * (end_potential(lambda0, r2) - end_potential(lambda0, r1)).abs())
}

/// Slice data of the compactified picture: the product coordinate `t` in
/// `[-1, 1]` replaces `tanh r`, the slice metric is `dt^2 + (1 - t^2) h`,
/// and `h` stays nondegenerate through `t = +/-1` where its conformal class
/// is the end structure.
#[derive(Debug, Clone)]
pub struct CompactifiedSlice {
    pub t: f64,
    pub dt2_coefficient: f64,
    /// `(1 - t^2) h`: the actual tangential part, vanishing at the ends.
    pub tangential: MetricField,
    /// `h = e^{2v} [[1 + t^2 l^2 + 2ta, 2tb], [2tb, 1 + t^2 l^2 - 2ta]]`.
    pub conformal_representative: MetricField,
}

/// Metric of the compactified product at coordinate `t`.
pub fn compactified_metric(
    surface: &SampledSurface,
    data: &MinimalSurfaceData,
    t: f64,
) -> Result<CompactifiedSlice, FoliationError> {
    check_lengths(surface, data)?;
    if !(-1.0..=1.0).contains(&t) {
        return Err(FoliationError::BadSlice { t });
    }
    let max = data.lambda.max_abs();
    if !(max < 1.0) {
        return Err(FoliationError::CurvatureRange { max });
    }
    let n = surface.point_count();
    let mut he = Vec::with_capacity(n);
    let mut hf = Vec::with_capacity(n);
    let mut hg = Vec::with_capacity(n);
    for i in 0..n {
        let e2v = (2.0 * data.u.values[i]).exp() * hyperbolic_metric_factor(surface.points()[i]);
        let (a, b) = (data.shape_a.values[i], data.shape_b.values[i]);
        let l2 = a * a + b * b;
        he.push(e2v * (1.0 + t * t * l2 + 2.0 * t * a));
        hf.push(e2v * 2.0 * t * b);
        hg.push(e2v * (1.0 + t * t * l2 - 2.0 * t * a));
    }
    let fade = 1.0 - t * t;
    let tangential = MetricField {
        e: he.iter().map(|v| fade * v).collect(),
        f: hf.iter().map(|v| fade * v).collect(),
        g: hg.iter().map(|v| fade * v).collect(),
    };
    Ok(CompactifiedSlice {
        t,
        dt2_coefficient: 1.0,
        tangential,
        conformal_representative: MetricField {
            e: he,
            f: hf,
            g: hg,
        },
    })
}
