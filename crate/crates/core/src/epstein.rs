//! Surfaces in the hyperbolic ball built from conformal data at infinity.
//!
//! A smooth positive density `e^{2 rho}` against the round metric of the
//! boundary sphere determines an envelope surface inside the ball: each
//! boundary point contributes the horosphere matching the density there, and
//! the envelope point is an explicit rational expression in `rho`, its
//! sphere gradient and the boundary point. Adding a constant `r` to `rho`
//! flows the surface a hyperbolic distance `r` along its normals, which
//! makes the construction a convenient source of foliations by parallel
//! surfaces; letting `r` run to infinity recovers the conformal density.
//!
//! The boundary sphere is charted stereographically by `theta` in the plane,
//! with `theta = 0` at the south pole and the unit circle of the chart on
//! the sphere's equator, so disk-preserving Moebius maps act on the chart
//! with unchanged coefficients. Their isometric extensions to the ball are
//! computed through the spinor action on Hermitian matrices.

use crate::moebius::MobiusTransform;
use num_complex::Complex64;
use std::rc::Rc;
use thiserror::Error;

/// Step for finite-difference gradients of support functions given without
/// an analytic gradient.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum EpsteinError {
    #[error("support function spec {spec:?}: {message}")]
    BadSpec { spec: String, message: String },
    #[error("point {x}, {y}, {z} lies outside the open unit ball")]
    OutsideBall { x: f64, y: f64, z: f64 },
}

/// Point of the open unit ball model of hyperbolic 3-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BallPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Hyperbolic distance between two points of the open ball.
pub fn ball_distance(p: BallPoint, q: BallPoint) -> Result<f64, EpsteinError> {
    let pp = p.norm_sqr();
    let qq = q.norm_sqr();
    if pp >= 1.0 {
        return Err(EpsteinError::OutsideBall {
            x: p.x,
            y: p.y,
            z: p.z,
        });
    }
    if qq >= 1.0 {
        return Err(EpsteinError::OutsideBall {
            x: q.x,
            y: q.y,
            z: q.z,
        });
    }
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let dz = p.z - q.z;
    let d2 = dx * dx + dy * dy + dz * dz;
    Ok((1.0 + 2.0 * d2 / ((1.0 - pp) * (1.0 - qq))).acosh())
}

/// Stereographic chart point to unit sphere: `(2x, 2y, s - 1)/(s + 1)` with
/// `s = |theta|^2`.
pub fn stereo_to_sphere(theta: Complex64) -> [f64; 3] {
    let s = theta.norm_sqr();
    let d = s + 1.0;
    [2.0 * theta.re / d, 2.0 * theta.im / d, (s - 1.0) / d]
}

/// Conformal density of `e^{2 rho} g_round` against `|d theta|^2` in the
/// chart: `4 e^{2 rho} / (1 + |theta|^2)^2`.
pub fn boundary_conformal_factor(rho: &SupportFunction, theta: Complex64) -> f64 {
    let d = 1.0 + theta.norm_sqr();
    4.0 * (2.0 * rho.value(theta)).exp() / (d * d)
}

/// Real-valued function of the boundary chart with an optional analytic
/// gradient; without one, gradients fall back to central differences of
/// width [`FD_STEP`].
#[derive(Clone)]
pub struct SupportFunction {
    eval: Rc<dyn Fn(Complex64) -> f64>,
    grad: Option<Rc<dyn Fn(Complex64) -> (f64, f64)>>,
    offset: f64,
}

impl std::fmt::Debug for SupportFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SupportFunction")
            .field("offset", &self.offset)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

impl SupportFunction {
    pub fn constant(c: f64) -> Self {
        Self {
            eval: Rc::new(move |_| c),
            grad: Some(Rc::new(|_| (0.0, 0.0))),
            offset: 0.0,
        }
    }

    pub fn from_fn(f: impl Fn(Complex64) -> f64 + 'static) -> Self {
        Self {
            eval: Rc::new(f),
            grad: None,
            offset: 0.0,
        }
    }

    pub fn from_fn_with_grad(
        f: impl Fn(Complex64) -> f64 + 'static,
        g: impl Fn(Complex64) -> (f64, f64) + 'static,
    ) -> Self {
        Self {
            eval: Rc::new(f),
            grad: Some(Rc::new(g)),
            offset: 0.0,
        }
    }

    /// `constant:<c>` or `linear:<a>,<b>` for `a Re theta + b Im theta`.
    pub fn parse(spec: &str) -> Result<Self, EpsteinError> {
        let bad = |message: &str| EpsteinError::BadSpec {
            spec: spec.to_string(),
            message: message.to_string(),
        };
        let (kind, args) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected kind:arguments"))?;
        match kind.trim() {
            "constant" => {
                let c: f64 = args
                    .trim()
                    .parse()
                    .map_err(|e| bad(&format!("bad constant: {e}")))?;
                Ok(Self::constant(c))
            }
            "linear" => {
                let (sa, sb) = args.split_once(',').ok_or_else(|| bad("expected a,b"))?;
                let a: f64 = sa
                    .trim()
                    .parse()
                    .map_err(|e| bad(&format!("bad coefficient: {e}")))?;
                let b: f64 = sb
                    .trim()
                    .parse()
                    .map_err(|e| bad(&format!("bad coefficient: {e}")))?;
                Ok(Self::from_fn_with_grad(
                    move |t| a * t.re + b * t.im,
                    move |_| (a, b),
                ))
            }
            other => Err(bad(&format!("unknown kind {other:?}"))),
        }
    }

    pub fn value(&self, theta: Complex64) -> f64 {
        (self.eval)(theta) + self.offset
    }

    /// Chart gradient `(d/dx, d/dy)`.
    pub fn gradient(&self, theta: Complex64) -> (f64, f64) {
        match &self.grad {
            Some(g) => g(theta),
            None => {
                let h = FD_STEP;
                let dx = ((self.eval)(theta + Complex64::new(h, 0.0))
                    - (self.eval)(theta - Complex64::new(h, 0.0)))
                    / (2.0 * h);
                let dy = ((self.eval)(theta + Complex64::new(0.0, h))
                    - (self.eval)(theta - Complex64::new(0.0, h)))
                    / (2.0 * h);
                (dx, dy)
            }
        }
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// The same support function moved `delta` along the normal flow.
    pub fn offset(&self, delta: f64) -> Self {
        Self {
            eval: Rc::clone(&self.eval),
            grad: self.grad.as_ref().map(Rc::clone),
            offset: self.offset + delta,
        }
    }

    /// Pullback under a chart Moebius map: the support function of the
    /// transported conformal density,
    /// `rho(gamma theta) + log(|gamma'| (1 + |theta|^2) / (1 + |gamma theta|^2))`.
    pub fn pullback(&self, gamma: MobiusTransform) -> Self {
        let parent_eval = Rc::clone(&self.eval);
        let parent_offset = self.offset;
        let eval = move |theta: Complex64| {
            let w = gamma.apply_unchecked(theta);
            let dg = gamma.derivative(theta);
            parent_eval(w)
                + parent_offset
                + (dg.norm() * (1.0 + theta.norm_sqr()) / (1.0 + w.norm_sqr())).ln()
        };
        let grad = self.grad.as_ref().map(|g| {
            let parent_grad = Rc::clone(g);
            let conformal = move |theta: Complex64| -> (f64, f64) {
                let w = gamma.apply_unchecked(theta);
                let dg = gamma.derivative(theta);
                let (px, py) = parent_grad(w);
                // chain rule through the holomorphic map
                let gx = px * dg.re + py * dg.im;
                let gy = -px * dg.im + py * dg.re;
                // log |gamma'|: derivative of -2 log |conj(b) theta + conj(a)|
                let den = gamma.b().conj() * theta + gamma.a().conj();
                let q = gamma.b().conj() / den;
                let lx = -2.0 * q.re;
                let ly = 2.0 * q.im;
                // log (1 + |theta|^2)
                let s = 1.0 + theta.norm_sqr();
                let tx = 2.0 * theta.re / s;
                let ty = 2.0 * theta.im / s;
                // log (1 + |gamma theta|^2)
                let sw = 1.0 + w.norm_sqr();
                let cw = w.conj() * dg;
                let wx = 2.0 * cw.re / sw;
                let wy = -2.0 * cw.im / sw;
                (gx + lx + tx - wx, gy + ly + ty - wy)
            };
            Rc::new(conformal) as Rc<dyn Fn(Complex64) -> (f64, f64)>
        });
        Self {
            eval: Rc::new(eval),
            grad,
            offset: 0.0,
        }
    }
}

/// Gradient of the support function on the round sphere, expressed as an
/// ambient tangent vector at `stereo_to_sphere(theta)`.
pub fn sphere_gradient(rho: &SupportFunction, theta: Complex64) -> [f64; 3] {
    let (rx, ry) = rho.gradient(theta);
    let s = theta.norm_sqr();
    let (x, y) = (theta.re, theta.im);
    let d = s + 1.0;
    let dx = [
        2.0 * (s + 1.0 - 2.0 * x * x) / (d * d),
        -4.0 * x * y / (d * d),
        4.0 * x / (d * d),
    ];
    let dy = [
        -4.0 * x * y / (d * d),
        2.0 * (s + 1.0 - 2.0 * y * y) / (d * d),
        4.0 * y / (d * d),
    ];
    let scale = d * d / 4.0;
    [
        scale * (rx * dx[0] + ry * dy[0]),
        scale * (rx * dx[1] + ry * dy[1]),
        scale * (rx * dx[2] + ry * dy[2]),
    ]
}

/// Envelope point of the horosphere family prescribed by `rho` at the
/// boundary point `theta`.
pub fn epstein_embed(rho: &SupportFunction, theta: Complex64) -> BallPoint {
    let big_x = stereo_to_sphere(theta);
    let dr = sphere_gradient(rho, theta);
    let d2 = dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2];
    let r = rho.value(theta);
    let er = r.exp();
    let den = d2 + (er + 1.0) * (er + 1.0);
    let radial = (d2 + er * er - 1.0) / den;
    BallPoint::new(
        radial * big_x[0] + 2.0 * dr[0] / den,
        radial * big_x[1] + 2.0 * dr[1] / den,
        radial * big_x[2] + 2.0 * dr[2] / den,
    )
}

/// Isometry of the ball extending the chart action of `gamma` on the
/// boundary sphere, through the spinor action on Hermitian matrices.
pub fn ball_isometry(gamma: &MobiusTransform, p: BallPoint) -> BallPoint {
    // Hyperboloid lift (t, v) with t^2 - |v|^2 = 1.
    let w = 1.0 - p.norm_sqr();
    let t = (1.0 + p.norm_sqr()) / w;
    let (vx, vy, vz) = (2.0 * p.x / w, 2.0 * p.y / w, 2.0 * p.z / w);
    // Hermitian form H = [[t + z, x - i y], [x + i y, t - z]]; the chart
    // convention pairs theta with the spinor (conj theta, 1), so the acting
    // matrix is the conjugate of gamma's.
    let h11 = Complex64::new(t + vz, 0.0);
    let h22 = Complex64::new(t - vz, 0.0);
    let h12 = Complex64::new(vx, -vy);
    let h21 = h12.conj();
    let (a, b) = (gamma.a().conj(), gamma.b().conj());
    let (ac, bc) = (a.conj(), b.conj());
    // H' = B H B^* with B = [[a, b], [bc, ac]], B^* = [[ac, b], [bc, a]].
    let m11 = a * h11 + b * h21;
    let m12 = a * h12 + b * h22;
    let m21 = bc * h11 + ac * h21;
    let m22 = bc * h12 + ac * h22;
    let n11 = (m11 * ac + m12 * bc).re;
    let n22 = (m21 * b + m22 * a).re;
    let n12 = m11 * b + m12 * a;
    let tt = 0.5 * (n11 + n22);
    let zz = 0.5 * (n11 - n22);
    let xx = n12.re;
    let yy = -n12.im;
    BallPoint::new(xx / (1.0 + tt), yy / (1.0 + tt), zz / (1.0 + tt))
}

/// Worst chart-sample deviation of the embedded surface from invariance
/// under `gamma`: compares `embed(gamma theta)` with the isometry applied
/// to `embed(theta)`. Vanishes exactly when the density is compatible with
/// the group element.
pub fn equivariance_residual(
    rho: &SupportFunction,
    gamma: &MobiusTransform,
    samples: &[Complex64],
) -> f64 {
    let mut worst: f64 = 0.0;
    for &theta in samples {
        let direct = epstein_embed(rho, gamma.apply_unchecked(theta));
        let carried = ball_isometry(gamma, epstein_embed(rho, theta));
        let dx = direct.x - carried.x;
        let dy = direct.y - carried.y;
        let dz = direct.z - carried.z;
        worst = worst.max((dx * dx + dy * dy + dz * dz).sqrt());
    }
    worst
}

/// First fundamental form `[E, F, G]` of the embedded surface at `theta` in
/// chart directions, by central differences of the embedding, measured in
/// the hyperbolic ball metric.
pub fn first_fundamental_form_fd(rho: &SupportFunction, theta: Complex64, step: f64) -> [f64; 3] {
    let pxp = epstein_embed(rho, theta + Complex64::new(step, 0.0));
    let pxm = epstein_embed(rho, theta - Complex64::new(step, 0.0));
    let pyp = epstein_embed(rho, theta + Complex64::new(0.0, step));
    let pym = epstein_embed(rho, theta - Complex64::new(0.0, step));
    let du = [
        (pxp.x - pxm.x) / (2.0 * step),
        (pxp.y - pxm.y) / (2.0 * step),
        (pxp.z - pxm.z) / (2.0 * step),
    ];
    let dv = [
        (pyp.x - pym.x) / (2.0 * step),
        (pyp.y - pym.y) / (2.0 * step),
        (pyp.z - pym.z) / (2.0 * step),
    ];
    let p = epstein_embed(rho, theta);
    let conf = 1.0 - p.norm_sqr();
    let scale = 4.0 / (conf * conf);
    let dot = |u: &[f64; 3], v: &[f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    [
        scale * dot(&du, &du),
        scale * dot(&du, &dv),
        scale * dot(&dv, &dv),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::FuchsianGroup;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_points() -> Vec<Complex64> {
        vec![
            c(0.0, 0.0),
            c(0.3, 0.1),
            c(-0.2, 0.4),
            c(0.9, -0.6),
            c(-1.3, 0.2),
            c(0.1, 1.7),
        ]
    }

    fn wavy() -> SupportFunction {
        SupportFunction::from_fn_with_grad(
            |t| 0.4 + 0.2 * t.re + 0.1 * (t.im * 1.3).sin(),
            |t| (0.2, 0.13 * (t.im * 1.3).cos()),
        )
    }

    #[test]
    fn chart_covers_the_sphere() {
        assert_eq!(stereo_to_sphere(c(0.0, 0.0)), [0.0, 0.0, -1.0]);
        assert_eq!(stereo_to_sphere(c(1.0, 0.0)), [1.0, 0.0, 0.0]);
        for &t in &sample_points() {
            let x = stereo_to_sphere(t);
            let n = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            assert!((n - 1.0).abs() < 1e-15);
        }
        let far = stereo_to_sphere(c(1e8, 0.0));
        assert!(far[2] > 1.0 - 1e-15);
    }

    #[test]
    fn sphere_gradient_of_the_real_part_has_norm_half_at_the_pole() {
        let rho = SupportFunction::from_fn_with_grad(|t| t.re, |_| (1.0, 0.0));
        let g = sphere_gradient(&rho, c(0.0, 0.0));
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        assert!((n - 0.5).abs() < 1e-15);
        // tangency to the sphere everywhere
        for &t in &sample_points() {
            let g = sphere_gradient(&rho, t);
            let x = stereo_to_sphere(t);
            let d = g[0] * x[0] + g[1] * x[1] + g[2] * x[2];
            assert!(d.abs() < 1e-13);
        }
    }

    #[test]
    fn constant_densities_embed_as_centered_spheres() {
        for &cc in &[-1.0, 0.3, 2.0] {
            let rho = SupportFunction::constant(cc);
            let radius = (cc / 2.0).tanh();
            for &t in &sample_points() {
                let p = epstein_embed(&rho, t);
                let x = stereo_to_sphere(t);
                let dx = p.x - radius * x[0];
                let dy = p.y - radius * x[1];
                let dz = p.z - radius * x[2];
                assert!((dx * dx + dy * dy + dz * dz).sqrt() < 1e-12);
            }
        }
    }

    #[test]
    fn distance_oracle_matches_radial_geodesics() {
        let d = ball_distance(
            BallPoint::new(0.0, 0.0, 0.0),
            BallPoint::new(0.7, 0.0, 0.0),
        )
        .unwrap();
        assert!((d - 2.0 * 0.7f64.atanh()).abs() < 1e-13);
        let p = BallPoint::new(0.1, -0.4, 0.2);
        let q = BallPoint::new(-0.3, 0.5, 0.1);
        let pq = ball_distance(p, q).unwrap();
        let qp = ball_distance(q, p).unwrap();
        assert_eq!(pq, qp);
        assert!(ball_distance(p, BallPoint::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn offsetting_the_density_flows_along_normals() {
        let rho = wavy();
        for &t in &sample_points() {
            for &r in &[0.1, 0.5, 1.0] {
                let here = epstein_embed(&rho, t);
                let there = epstein_embed(&rho.offset(r), t);
                let d = ball_distance(here, there).unwrap();
                assert!((d - r).abs() < 1e-9, "flow {r} gave {d}");
            }
        }
    }

    #[test]
    fn finite_difference_gradients_track_analytic_ones() {
        let exact = wavy();
        let fd = SupportFunction::from_fn(|t| 0.4 + 0.2 * t.re + 0.1 * (t.im * 1.3).sin());
        assert!(exact.has_analytic_gradient());
        assert!(!fd.has_analytic_gradient());
        for &t in &sample_points() {
            let (gx, gy) = exact.gradient(t);
            let (fx, fy) = fd.gradient(t);
            assert!((gx - fx).abs() < 1e-9);
            assert!((gy - fy).abs() < 1e-9);
            let pe = epstein_embed(&exact, t);
            let pf = epstein_embed(&fd, t);
            assert!((pe.x - pf.x).abs() < 1e-8);
        }
    }

    #[test]
    fn rotations_extend_to_axis_rotations_of_the_ball() {
        let phi = 0.77;
        let gamma = MobiusTransform::rotation(phi);
        let p = BallPoint::new(0.3, -0.2, 0.5);
        let q = ball_isometry(&gamma, p);
        let expected = BallPoint::new(
            p.x * phi.cos() - p.y * phi.sin(),
            p.x * phi.sin() + p.y * phi.cos(),
            p.z,
        );
        assert!((q.x - expected.x).abs() < 1e-14);
        assert!((q.y - expected.y).abs() < 1e-14);
        assert!((q.z - expected.z).abs() < 1e-14);
    }

    #[test]
    fn ball_extension_fixes_distances_and_the_boundary_action() {
        let gamma = FuchsianGroup::bolza().generators()[1];
        let p = BallPoint::new(0.2, 0.3, -0.4);
        let q = BallPoint::new(-0.1, 0.0, 0.6);
        let dp = ball_distance(p, q).unwrap();
        let dq = ball_distance(ball_isometry(&gamma, p), ball_isometry(&gamma, q)).unwrap();
        assert!((dp - dq).abs() < 1e-11);
        // Boundary continuity: near-sphere points follow the chart action.
        for &t in &sample_points() {
            let x = stereo_to_sphere(t);
            let shrink = 1.0 - 1e-9;
            let inside = BallPoint::new(shrink * x[0], shrink * x[1], shrink * x[2]);
            let moved = ball_isometry(&gamma, inside);
            let target = stereo_to_sphere(gamma.apply_unchecked(t));
            let err = ((moved.x - target[0]).powi(2)
                + (moved.y - target[1]).powi(2)
                + (moved.z - target[2]).powi(2))
            .sqrt();
            assert!(err < 1e-6, "boundary action error {err}");
        }
    }

    #[test]
    fn pullback_reproduces_the_transported_surface() {
        let gamma = FuchsianGroup::bolza().generators()[0];
        let rho = wavy();
        let pulled = rho.pullback(gamma);
        assert!(pulled.has_analytic_gradient());
        let inverse = gamma.inverse();
        for &t in &sample_points() {
            let lhs = epstein_embed(&pulled, t);
            let rhs = ball_isometry(&inverse, epstein_embed(&rho, gamma.apply_unchecked(t)));
            let err = ((lhs.x - rhs.x).powi(2)
                + (lhs.y - rhs.y).powi(2)
                + (lhs.z - rhs.z).powi(2))
            .sqrt();
            assert!(err < 1e-12, "pullback error {err}");
        }
    }

    #[test]
    fn incompatible_densities_show_a_visible_residual() {
        let gamma = FuchsianGroup::bolza().generators()[0];
        let rho = SupportFunction::constant(0.4);
        let r = equivariance_residual(&rho, &gamma, &sample_points());
        assert!(r > 1e-3);
        // and a pulled-back pair has none under the inverse direction
        let pulled = rho.pullback(gamma);
        let mut worst: f64 = 0.0;
        for &t in &sample_points() {
            let lhs = epstein_embed(&pulled, t);
            let rhs = ball_isometry(&gamma.inverse(), epstein_embed(&rho, gamma.apply_unchecked(t)));
            worst = worst
                .max(((lhs.x - rhs.x).powi(2) + (lhs.y - rhs.y).powi(2) + (lhs.z - rhs.z).powi(2)).sqrt());
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn far_flow_recovers_the_boundary_density() {
        let rho = wavy();
        let r = 20.0;
        let flowed = rho.offset(r);
        let stretch = 1.0 / r.cosh().powi(2);
        for &t in &[c(0.0, 0.0), c(0.4, -0.3), c(-0.8, 0.1)] {
            let form = first_fundamental_form_fd(&flowed, t, FD_STEP);
            let bf = boundary_conformal_factor(&rho, t);
            assert!((form[0] * stretch - bf).abs() < 1e-6 * bf, "E mismatch");
            assert!((form[2] * stretch - bf).abs() < 1e-6 * bf, "G mismatch");
            assert!((form[1] * stretch).abs() < 1e-6 * bf, "F mismatch");
        }
    }

    #[test]
    fn support_function_specs_parse() {
        let rho = SupportFunction::parse("constant:0.25").unwrap();
        assert_eq!(rho.value(c(5.0, 5.0)), 0.25);
        let lin = SupportFunction::parse("linear:0.5,-1").unwrap();
        assert_eq!(lin.value(c(0.2, 0.4)), 0.5 * 0.2 - 0.4);
        assert!(lin.has_analytic_gradient());
        assert!(SupportFunction::parse("nope").is_err());
        assert!(SupportFunction::parse("gauss:1").is_err());
        assert!(SupportFunction::parse("constant:x").is_err());
    }
}
