//! Discrete model of the closed genus-2 surface carried by the octagon group.
//!
//! The fundamental domain is the regular hyperbolic octagon with vertex angle
//! pi/4; its vertices sit at Euclidean radius `2^(-1/4)` and angles
//! `(2k+1) pi/8`. The mesh triangulates the octagon by slicing it into eight
//! center-vertex-vertex wedges and subdividing each wedge into `resolution`
//! geodesic rows sampled at equal hyperbolic arclength. Rows on the outer
//! boundary of side `k+4` land, point by point, on the samples of side `k`
//! under the pairing generator, so the quotient identification is a bijection
//! of boundary samples; the eight octagon corners collapse to one point.
//!
//! Scalar analysis uses first-order finite elements in the disk chart: the
//! Dirichlet energy of the hyperbolic metric is conformally invariant in two
//! dimensions, so the chart cotangent matrix is the stiffness operator of the
//! curved surface, while the lumped mass comes from the hyperbolic area
//! density `4 / (1 - |z|^2)^2`. The Laplace-Beltrami operator is
//! `mass^(-1) (-stiffness)`.
//!
//! Quadratic differentials are produced as truncated Poincare series
//! `sum P(gamma z) gamma'(z)^2` over the elements enumerated up to a word
//! length; the deviation from true automorphy is recorded with each field.

use crate::moebius::{enumerate_group, FuchsianGroup, GroupError, MobiusTransform};
use crate::numeric::{KahanComplexSum, KahanSum};
use crate::sparse::{conjugate_gradient, CsrMatrix};
use num_complex::Complex64;
use std::io::Write;
use thiserror::Error;

pub const MIN_RESOLUTION: u32 = 8;
pub const MAX_RESOLUTION: u32 = 256;

/// Boundary samples further than this from their paired image mean the
/// group does not pair the octagon sides.
pub const SEAM_TOLERANCE: f64 = 1e-9;

pub const MIN_ANGLE_DEG: f64 = 1.0;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("resolution {resolution} outside {MIN_RESOLUTION}..={MAX_RESOLUTION}")]
    ResolutionRange { resolution: u32 },
    #[error("octagon meshing needs exactly 4 generators, group has {count}")]
    GeneratorCount { count: usize },
    #[error("side pairing failed: boundary sample misses its partner by {residual:e}")]
    SeamMismatch { residual: f64 },
    #[error("corner identification failed: no short word carries corner {corner} to the base corner")]
    CornerOrbit { corner: usize },
    #[error("degenerate chart triangle (minimum angle {min_angle_deg} degrees)")]
    TriangleQuality { min_angle_deg: f64 },
    #[error("field has {found} samples, surface has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point {z} lies outside the fundamental octagon")]
    OutsideDomain { z: Complex64 },
    #[error("polynomial spec {spec:?}: {message}")]
    BadPolynomial { spec: String, message: String },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("eigenvalue solve failed: {0}")]
    Eigen(#[from] crate::sparse::CgError),
}

/// Hyperbolic area density of the disk model, `4 / (1 - |z|^2)^2`.
pub fn hyperbolic_metric_factor(z: Complex64) -> f64 {
    let t = 1.0 - z.norm_sqr();
    4.0 / (t * t)
}

/// Hyperbolic distance between two points of the open disk.
pub fn disk_distance(p: Complex64, q: Complex64) -> f64 {
    let w = (q - p) / (Complex64::new(1.0, 0.0) - p.conj() * q);
    2.0 * w.norm().atanh()
}

/// Point at arclength fraction `t` along the geodesic from `p` to `q`.
fn geodesic_point(p: Complex64, q: Complex64, t: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let q1 = (q - p) / (one - p.conj() * q);
    let d = 2.0 * q1.norm().atanh();
    if d == 0.0 {
        return p;
    }
    let w = q1 / q1.norm() * (t * d / 2.0).tanh();
    (w + p) / (one + p.conj() * w)
}

/// One identified pair of boundary samples: the pairing generator maps the
/// chart point `from_chart` onto `to_chart`.
#[derive(Debug, Clone, Copy)]
pub struct SeamPair {
    pub generator: usize,
    pub from_chart: u32,
    pub to_chart: u32,
}

/// Real-valued samples over the surface points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(value: f64, len: usize) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn from_fn(surface: &SampledSurface, f: impl Fn(Complex64) -> f64) -> Self {
        Self {
            values: surface.points.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Complex samples of a quadratic differential at the representative chart
/// coordinates, together with the measured automorphy defect of the
/// truncated series that produced them.
#[derive(Debug, Clone)]
pub struct QuadDifferentialField {
    pub values: Vec<Complex64>,
    pub automorphy_residual: f64,
}

impl QuadDifferentialField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Triangulated quotient surface with mass and stiffness operators.
#[derive(Debug, Clone)]
pub struct SampledSurface {
    resolution: u32,
    group: FuchsianGroup,
    chart_coords: Vec<Complex64>,
    triangles: Vec<[u32; 3]>,
    chart_to_surface: Vec<u32>,
    /// Factor carrying a stored differential value at the representative to
    /// the chart copy: `alpha_chart(p) = alpha_stored(surface(p)) * factor`.
    chart_transport: Vec<Complex64>,
    points: Vec<Complex64>,
    mass: Vec<f64>,
    stiffness: CsrMatrix,
    seam: Vec<SeamPair>,
    min_angle_deg: f64,
}

/// Chart node layout: center, then ray nodes, then wedge interiors.
struct Layout {
    n: usize,
}

impl Layout {
    fn ray(&self, r: usize, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.n);
        1 + r * self.n + (i - 1)
    }

    /// Node `l` of row `i` in wedge `j` (the wedge whose outer row is octagon
    /// side `j`). Row 0 is the center; `l = 0` and `l = i` sit on the rays.
    fn node(&self, j: usize, i: usize, l: usize) -> usize {
        debug_assert!(i <= self.n && l <= i);
        if i == 0 {
            return 0;
        }
        if l == 0 {
            return self.ray((j + 7) % 8, i);
        }
        if l == i {
            return self.ray(j, i);
        }
        let wedge = self.n * (self.n - 1) / 2;
        1 + 8 * self.n + j * wedge + (i - 1) * (i - 2) / 2 + (l - 1)
    }

    fn chart_count(&self) -> usize {
        4 * self.n * self.n + 4 * self.n + 1
    }
}

/// Builds the octagon mesh for a four-generator group pairing opposite
/// sides. Fails if the resolution is out of range, the group cannot pair the
/// regular octagon, or the chart triangles degenerate.
pub fn build_sampled_surface(
    group: &FuchsianGroup,
    resolution: u32,
) -> Result<SampledSurface, MeshError> {
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
        return Err(MeshError::ResolutionRange { resolution });
    }
    let gens = group.generators();
    if gens.len() != 4 {
        return Err(MeshError::GeneratorCount { count: gens.len() });
    }
    let n = resolution as usize;
    let layout = Layout { n };

    // Octagon corners: hyperbolic distance acosh(3 + 2 sqrt 2) from the
    // center, Euclidean radius 2^(-1/4).
    let vertex_dist = (3.0 + 2.0 * std::f64::consts::SQRT_2).acosh();
    let corner: Vec<Complex64> = (0..8)
        .map(|k| {
            Complex64::from_polar(
                (vertex_dist / 2.0).tanh(),
                (2 * k + 1) as f64 * std::f64::consts::FRAC_PI_8,
            )
        })
        .collect();

    let mut coords = vec![Complex64::new(0.0, 0.0); layout.chart_count()];
    for (r, &w) in corner.iter().enumerate() {
        for i in 1..=n {
            let s = i as f64 / n as f64 * vertex_dist;
            coords[layout.ray(r, i)] = Complex64::from_polar((s / 2.0).tanh(), w.arg());
        }
    }
    for j in 0..8 {
        for i in 2..=n {
            let a = coords[layout.node(j, i, 0)];
            let b = coords[layout.node(j, i, i)];
            for l in 1..i {
                coords[layout.node(j, i, l)] = geodesic_point(a, b, l as f64 / i as f64);
            }
        }
    }

    let mut triangles = Vec::with_capacity(8 * n * n);
    for j in 0..8 {
        for i in 1..=n {
            for l in 0..i {
                triangles.push([
                    layout.node(j, i, l) as u32,
                    layout.node(j, i, l + 1) as u32,
                    layout.node(j, i - 1, l) as u32,
                ]);
                if l + 1 < i {
                    triangles.push([
                        layout.node(j, i - 1, l) as u32,
                        layout.node(j, i, l + 1) as u32,
                        layout.node(j, i - 1, l + 1) as u32,
                    ]);
                }
            }
        }
    }

    // Quotient identification in chart-index order, so representatives come
    // first: boundary samples of sides 4..7 fold onto sides 0..3 with the
    // row parameter reversed, and all ray endpoints are the one corner class.
    let mut chart_to_surface = vec![u32::MAX; layout.chart_count()];
    let mut points = Vec::new();
    let fresh = |points: &mut Vec<Complex64>, z: Complex64| -> u32 {
        points.push(z);
        (points.len() - 1) as u32
    };
    chart_to_surface[0] = fresh(&mut points, coords[0]);
    for r in 0..8 {
        for i in 1..=n {
            let c = layout.ray(r, i);
            if i < n || r == 0 {
                chart_to_surface[c] = fresh(&mut points, coords[c]);
            } else {
                chart_to_surface[c] = chart_to_surface[layout.ray(0, n)];
            }
        }
    }
    for j in 0..8 {
        for i in 2..=n {
            for l in 1..i {
                let c = layout.node(j, i, l);
                if i < n || j < 4 {
                    chart_to_surface[c] = fresh(&mut points, coords[c]);
                } else {
                    chart_to_surface[c] = chart_to_surface[layout.node(j - 4, n, n - l)];
                }
            }
        }
    }

    let mut seam = Vec::new();
    for k in 0..4 {
        for l in 1..n {
            seam.push(SeamPair {
                generator: k,
                from_chart: layout.node(k + 4, n, l) as u32,
                to_chart: layout.node(k, n, n - l) as u32,
            });
        }
        // The pairing also matches the corners bounding the sides.
        seam.push(SeamPair {
            generator: k,
            from_chart: layout.ray((k + 3) % 8, n) as u32,
            to_chart: layout.ray(k, n) as u32,
        });
        seam.push(SeamPair {
            generator: k,
            from_chart: layout.ray((k + 4) % 8, n) as u32,
            to_chart: layout.ray((k + 7) % 8, n) as u32,
        });
    }
    let mut seam_residual: f64 = 0.0;
    for pair in &seam {
        let image = gens[pair.generator].apply_unchecked(coords[pair.from_chart as usize]);
        seam_residual = seam_residual.max((image - coords[pair.to_chart as usize]).norm());
    }
    if seam_residual > SEAM_TOLERANCE {
        return Err(MeshError::SeamMismatch {
            residual: seam_residual,
        });
    }

    // Transport factors to the representatives, for differential fields.
    let mut chart_transport = vec![Complex64::new(1.0, 0.0); layout.chart_count()];
    for k in 0..4 {
        for l in 1..n {
            let c = layout.node(k + 4, n, l);
            let d = gens[k].derivative(coords[c]);
            chart_transport[c] = d * d;
        }
    }
    let corner_words = corner_orbit_words(gens, &corner)?;
    for r in 1..8 {
        let c = layout.ray(r, n);
        let d = corner_words[r].derivative(coords[c]);
        chart_transport[c] = d * d;
    }

    // Lumped hyperbolic mass and chart cotangent stiffness.
    let mut mass = vec![0.0; points.len()];
    let mut triplets = Vec::with_capacity(triangles.len() * 12);
    let mut min_angle = f64::INFINITY;
    for tri in &triangles {
        let p = [
            coords[tri[0] as usize],
            coords[tri[1] as usize],
            coords[tri[2] as usize],
        ];
        let s = [
            chart_to_surface[tri[0] as usize],
            chart_to_surface[tri[1] as usize],
            chart_to_surface[tri[2] as usize],
        ];
        let cross = |u: Complex64, v: Complex64| u.re * v.im - u.im * v.re;
        let dot = |u: Complex64, v: Complex64| u.re * v.re + u.im * v.im;
        let area = 0.5 * cross(p[1] - p[0], p[2] - p[0]).abs();
        for c in 0..3 {
            mass[s[c] as usize] += area / 3.0 * hyperbolic_metric_factor(p[c]);
            let u = p[(c + 1) % 3] - p[c];
            let v = p[(c + 2) % 3] - p[c];
            min_angle = min_angle.min(cross(u, v).abs().atan2(dot(u, v)));
            let w = 0.5 * dot(u, v) / cross(u, v).abs();
            let (i, j) = (s[(c + 1) % 3], s[(c + 2) % 3]);
            triplets.push((i, i, w));
            triplets.push((j, j, w));
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
        }
    }
    let min_angle_deg = min_angle.to_degrees();
    if min_angle_deg < MIN_ANGLE_DEG {
        return Err(MeshError::TriangleQuality { min_angle_deg });
    }
    let stiffness = CsrMatrix::from_triplets(points.len(), &triplets);

    Ok(SampledSurface {
        resolution,
        group: group.clone(),
        chart_coords: coords,
        triangles,
        chart_to_surface,
        chart_transport,
        points,
        mass,
        stiffness,
        seam,
        min_angle_deg,
    })
}

/// Finds, for every octagon corner, a short group word carrying it to the
/// base corner; breadth-first over generator products.
fn corner_orbit_words(
    gens: &[MobiusTransform],
    corner: &[Complex64],
) -> Result<Vec<MobiusTransform>, MeshError> {
    let mut steps: Vec<MobiusTransform> = gens.to_vec();
    steps.extend(gens.iter().map(MobiusTransform::inverse));
    let target = corner[0];
    let mut words = vec![None::<MobiusTransform>; 8];
    for (r, word) in words.iter_mut().enumerate() {
        let mut frontier = vec![MobiusTransform::identity()];
        'search: for _depth in 0..5 {
            for m in &frontier {
                if (m.apply_unchecked(corner[r]) - target).norm() < SEAM_TOLERANCE {
                    *word = Some(*m);
                    break 'search;
                }
            }
            let mut next = Vec::with_capacity(frontier.len() * 8);
            for m in &frontier {
                for s in &steps {
                    next.push(s.compose(m));
                }
            }
            frontier = next;
        }
        if word.is_none() {
            return Err(MeshError::CornerOrbit { corner: r });
        }
    }
    Ok(words.into_iter().map(Option::unwrap).collect())
}

impl SampledSurface {
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.group
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Representative chart coordinates, one per surface point.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn seam(&self) -> &[SeamPair] {
        &self.seam
    }

    pub fn chart_coords(&self) -> &[Complex64] {
        &self.chart_coords
    }

    pub fn chart_to_surface(&self) -> &[u32] {
        &self.chart_to_surface
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn min_angle_deg(&self) -> f64 {
        self.min_angle_deg
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = KahanSum::new();
        for &m in &self.mass {
            s.add(m);
        }
        s.value()
    }

    fn check_len(&self, len: usize) -> Result<(), MeshError> {
        if len != self.points.len() {
            return Err(MeshError::DimensionMismatch {
                expected: self.points.len(),
                found: len,
            });
        }
        Ok(())
    }

    /// `mass^(-1) (-stiffness) f`: negative on the peak of a bump, zero on
    /// constants.
    pub fn laplace_beltrami(&self, f: &ScalarField) -> Result<ScalarField, MeshError> {
        self.check_len(f.len())?;
        let mut y = vec![0.0; f.len()];
        self.stiffness.mul_vec(&f.values, &mut y);
        for (v, m) in y.iter_mut().zip(&self.mass) {
            *v = -*v / m;
        }
        Ok(ScalarField::new(y))
    }

    /// Mass-weighted quadrature of a scalar field.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64, MeshError> {
        self.check_len(f.len())?;
        let mut s = KahanSum::new();
        for (v, m) in f.values.iter().zip(&self.mass) {
            s.add(v * m);
        }
        Ok(s.value())
    }

    /// Locates the chart triangle containing `z` and returns its corners and
    /// barycentric weights. Exact node hits are resolved first so nodal
    /// lookups reproduce stored values without roundoff.
    fn locate(&self, z: Complex64) -> Result<([u32; 3], [f64; 3]), MeshError> {
        for (c, &w) in self.chart_coords.iter().enumerate() {
            if w == z {
                let c = c as u32;
                return Ok(([c, c, c], [1.0, 0.0, 0.0]));
            }
        }
        let cross = |u: Complex64, v: Complex64| u.re * v.im - u.im * v.re;
        for tri in &self.triangles {
            let p = [
                self.chart_coords[tri[0] as usize],
                self.chart_coords[tri[1] as usize],
                self.chart_coords[tri[2] as usize],
            ];
            let full = cross(p[1] - p[0], p[2] - p[0]);
            if full.abs() == 0.0 {
                continue;
            }
            let w0 = cross(p[1] - z, p[2] - z) / full;
            let w1 = cross(p[2] - z, p[0] - z) / full;
            let w2 = cross(p[0] - z, p[1] - z) / full;
            let tol = -1e-12;
            if w0 >= tol && w1 >= tol && w2 >= tol {
                return Ok((*tri, [w0, w1, w2]));
            }
        }
        Err(MeshError::OutsideDomain { z })
    }

    /// Linear interpolation of a scalar field in the chart triangles.
    pub fn interpolate(&self, f: &ScalarField, z: Complex64) -> Result<f64, MeshError> {
        self.check_len(f.len())?;
        let (tri, w) = self.locate(z)?;
        if w[0] == 1.0 {
            return Ok(f.values[self.chart_to_surface[tri[0] as usize] as usize]);
        }
        Ok((0..3)
            .map(|c| w[c] * f.values[self.chart_to_surface[tri[c] as usize] as usize])
            .sum())
    }

    /// Interpolation of a differential field; stored values are carried to
    /// the local chart copy with the weight-4 transport factor first.
    pub fn interpolate_differential(
        &self,
        f: &QuadDifferentialField,
        z: Complex64,
    ) -> Result<Complex64, MeshError> {
        self.check_len(f.len())?;
        let (tri, w) = self.locate(z)?;
        let value_at = |c: u32| {
            f.values[self.chart_to_surface[c as usize] as usize] * self.chart_transport[c as usize]
        };
        if w[0] == 1.0 {
            return Ok(value_at(tri[0]));
        }
        Ok((0..3).map(|c| value_at(tri[c]) * w[c]).sum())
    }

    /// `idx,re_z,im_z,mass` rows for the surface points.
    pub fn write_points_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "idx,re_z,im_z,mass")?;
        for (idx, (z, m)) in self.points.iter().zip(&self.mass).enumerate() {
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", idx, z.re, z.im, m)?;
        }
        Ok(())
    }

    /// `row,col,value` rows for the stiffness operator.
    pub fn write_stiffness_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for (i, j, v) in self.stiffness.entries() {
            writeln!(out, "{},{},{:.16e}", i, j, v)?;
        }
        Ok(())
    }
}

/// Smallest nonzero eigenvalue of the positive Laplacian `-Delta`, by
/// inverse iteration on the stiffness-mass pencil with the constants
/// projected out.
pub fn smallest_nonzero_laplace_eigenvalue(surface: &SampledSurface) -> Result<f64, MeshError> {
    let n = surface.point_count();
    let mass = surface.mass();
    let stiffness = surface.stiffness();
    let total: f64 = surface.total_mass();
    let project = |x: &mut [f64]| {
        let mean: f64 = x.iter().zip(mass).map(|(v, m)| v * m).sum::<f64>() / total;
        for v in x.iter_mut() {
            *v -= mean;
        }
    };
    let mut x: Vec<f64> = (0..n).map(|i| (1.7 * i as f64 + 0.3).sin()).collect();
    project(&mut x);
    let norm = |x: &[f64]| {
        x.iter()
            .zip(mass)
            .map(|(v, m)| v * v * m)
            .sum::<f64>()
            .sqrt()
    };
    let nx = norm(&x);
    for v in x.iter_mut() {
        *v /= nx;
    }
    let mut lambda = 0.0;
    for _ in 0..200 {
        let rhs: Vec<f64> = x.iter().zip(mass).map(|(v, m)| v * m).collect();
        let (mut y, _) = conjugate_gradient(
            |v, out| stiffness.mul_vec(v, out),
            mass,
            &rhs,
            &x,
            1e-12,
            100_000,
        )?;
        project(&mut y);
        let ny = norm(&y);
        for v in y.iter_mut() {
            *v /= ny;
        }
        let new_lambda = stiffness.quadratic_form(&y);
        let done = (new_lambda - lambda).abs() <= 1e-10 * new_lambda.abs();
        lambda = new_lambda;
        x = y;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Complex polynomial in the chart coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { coeffs };
        while p.coeffs.len() > 1 && p.coeffs.last() == Some(&Complex64::new(0.0, 0.0)) {
            p.coeffs.pop();
        }
        p
    }

    pub fn monomial(degree: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
        coeffs[degree] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Parses sums of monomial terms: `1`, `z`, `z^2`, `1+z^2`, `0.5*z^4`.
    pub fn parse(spec: &str) -> Result<Self, MeshError> {
        let bad = |message: &str| MeshError::BadPolynomial {
            spec: spec.to_string(),
            message: message.to_string(),
        };
        let mut coeffs: Vec<Complex64> = Vec::new();
        let body = spec.trim();
        if body.is_empty() {
            return Err(bad("empty spec"));
        }
        for term in body.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(bad("empty term"));
            }
            let (coeff_text, z_part) = match term.find('z') {
                None => (term, None),
                Some(pos) => {
                    let head = term[..pos].trim().trim_end_matches('*').trim();
                    (head, Some(term[pos..].trim()))
                }
            };
            let coeff = if coeff_text.is_empty() {
                1.0
            } else {
                coeff_text
                    .parse::<f64>()
                    .map_err(|e| bad(&format!("bad coefficient {coeff_text:?}: {e}")))?
            };
            let degree = match z_part {
                None => 0,
                Some("z") => 1,
                Some(rest) => {
                    let exp = rest
                        .strip_prefix("z^")
                        .ok_or_else(|| bad(&format!("unrecognized term {term:?}")))?;
                    exp.parse::<usize>()
                        .map_err(|e| bad(&format!("bad exponent {exp:?}: {e}")))?
                }
            };
            if degree > 16 {
                return Err(bad("exponent too large"));
            }
            if coeffs.len() <= degree {
                coeffs.resize(degree + 1, Complex64::new(0.0, 0.0));
            }
            coeffs[degree] += Complex64::new(coeff, 0.0);
        }
        Ok(Self::new(coeffs))
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) && !(self.coeffs.len() == 1) {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            let unit = c == Complex64::new(1.0, 0.0);
            match (k, unit) {
                (0, _) => write!(f, "{}", c.re)?,
                (1, true) => write!(f, "z")?,
                (1, false) => write!(f, "{}*z", c.re)?,
                (_, true) => write!(f, "z^{k}")?,
                (_, false) => write!(f, "{}*z^{k}", c.re)?,
            }
        }
        Ok(())
    }
}

/// Truncated Poincare series `sum P(gamma z) gamma'(z)^2` over the group
/// elements of word length at most `word_length`.
#[derive(Debug, Clone)]
pub struct PoincareSeries {
    elements: Vec<MobiusTransform>,
    poly: Polynomial,
    word_length: u32,
}

impl PoincareSeries {
    pub fn new(
        poly: Polynomial,
        group: &FuchsianGroup,
        word_length: u32,
    ) -> Result<Self, GroupError> {
        Ok(Self {
            elements: enumerate_group(group, word_length)?,
            poly,
            word_length,
        })
    }

    pub fn word_length(&self) -> u32 {
        self.word_length
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = KahanComplexSum::new();
        for g in &self.elements {
            let den = g.b().conj() * z + g.a().conj();
            let d2 = den * den;
            let w = (g.a() * z + g.b()) / den;
            acc.add(self.poly.eval(w) / (d2 * d2));
        }
        acc.value()
    }

    /// Worst deviation of `eval(gamma z) gamma'(z)^2` from `eval(z)` over
    /// the sample points and all four generators.
    pub fn automorphy_residual(&self, group: &FuchsianGroup, samples: &[Complex64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &z in samples {
            let here = self.eval(z);
            for g in group.generators() {
                let d = g.derivative(z);
                let there = self.eval(g.apply_unchecked(z));
                worst = worst.max((there * d * d - here).norm());
            }
        }
        worst
    }
}

/// Automorphy defects of several truncated series, measured in one shared
/// pass over the group elements. For every sample `z` and every generator
/// `gamma`, the series are evaluated at `z` and at `gamma z` and the worst
/// deviation of `eval(gamma z) gamma'(z)^2` from `eval(z)` is returned per
/// polynomial. Streaming the element list once makes long word lengths
/// affordable.
pub fn automorphy_residuals_batch(
    polys: &[Polynomial],
    group: &FuchsianGroup,
    word_length: u32,
    samples: &[Complex64],
) -> Result<Vec<f64>, GroupError> {
    let elements = enumerate_group(group, word_length)?;
    let gens = group.generators();
    let stride = 1 + gens.len();
    let mut points = Vec::with_capacity(samples.len() * stride);
    for &z in samples {
        points.push(z);
        for g in gens {
            points.push(g.apply_unchecked(z));
        }
    }
    let mut acc = vec![KahanComplexSum::new(); points.len() * polys.len()];
    for g in &elements {
        let (a, b) = (g.a(), g.b());
        let (ac, bc) = (a.conj(), b.conj());
        for (pi, &z) in points.iter().enumerate() {
            let inv_den = 1.0 / (bc * z + ac);
            let inv2 = inv_den * inv_den;
            let gp2 = inv2 * inv2;
            let w = (a * z + b) * inv_den;
            for (qi, p) in polys.iter().enumerate() {
                acc[pi * polys.len() + qi].add(p.eval(w) * gp2);
            }
        }
    }
    let value = |pi: usize, qi: usize| acc[pi * polys.len() + qi].value();
    let mut residuals = vec![0.0f64; polys.len()];
    for (si, &z) in samples.iter().enumerate() {
        for (gi, g) in gens.iter().enumerate() {
            let d = g.derivative(z);
            let dd = d * d;
            for (qi, r) in residuals.iter_mut().enumerate() {
                let here = value(si * stride, qi);
                let there = value(si * stride + 1 + gi, qi);
                *r = r.max((there * dd - here).norm());
            }
        }
    }
    Ok(residuals)
}

/// Evaluates several Poincare series with a shared pass over the group
/// elements and samples them on the surface points. The recorded automorphy
/// residual is measured at the redundant boundary copies: the directly
/// evaluated series at a side sample of sides 4..7 is compared against the
/// stored representative value carried over by the pairing transport.
pub fn poincare_series_batch(
    polys: &[Polynomial],
    group: &FuchsianGroup,
    word_length: u32,
    surface: &SampledSurface,
) -> Result<Vec<QuadDifferentialField>, MeshError> {
    let elements = enumerate_group(group, word_length)?;
    let eval_many = |z: Complex64| -> Vec<Complex64> {
        let mut acc = vec![KahanComplexSum::new(); polys.len()];
        for g in &elements {
            let den = g.b().conj() * z + g.a().conj();
            let d2 = den * den;
            let gp2 = 1.0 / (d2 * d2);
            let w = (g.a() * z + g.b()) / den;
            for (a, p) in acc.iter_mut().zip(polys) {
                a.add(p.eval(w) * gp2);
            }
        }
        acc.iter().map(KahanComplexSum::value).collect()
    };

    let mut fields: Vec<Vec<Complex64>> = polys
        .iter()
        .map(|_| vec![Complex64::new(0.0, 0.0); surface.point_count()])
        .collect();
    for (idx, &z) in surface.points().iter().enumerate() {
        for (f, v) in fields.iter_mut().zip(eval_many(z)) {
            f[idx] = v;
        }
    }

    let mut residuals = vec![0.0f64; polys.len()];
    for pair in surface.seam() {
        let from = pair.from_chart as usize;
        let z = surface.chart_coords()[from];
        let stored_idx = surface.chart_to_surface()[from] as usize;
        let transport = surface.chart_transport[from];
        for (k, direct) in eval_many(z).into_iter().enumerate() {
            let carried = fields[k][stored_idx] * transport;
            residuals[k] = residuals[k].max((carried - direct).norm());
        }
    }

    Ok(fields
        .into_iter()
        .zip(residuals)
        .map(|(values, automorphy_residual)| QuadDifferentialField {
            values,
            automorphy_residual,
        })
        .collect())
}

/// Single-series convenience wrapper around [`poincare_series_batch`].
pub fn poincare_series(
    poly: Polynomial,
    group: &FuchsianGroup,
    word_length: u32,
    surface: &SampledSurface,
) -> Result<QuadDifferentialField, MeshError> {
    Ok(poincare_series_batch(&[poly], group, word_length, surface)?
        .pop()
        .expect("one field per polynomial"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bolza_surface(resolution: u32) -> SampledSurface {
        build_sampled_surface(&FuchsianGroup::bolza(), resolution).unwrap()
    }

    #[test]
    fn counts_match_the_layout() {
        let n = 8usize;
        let s = bolza_surface(n as u32);
        assert_eq!(s.chart_coords().len(), 4 * n * n + 4 * n + 1);
        assert_eq!(s.triangle_count(), 8 * n * n);
        // one center + 8 rays + 8 wedge interiors, minus folded boundary.
        let expected = 1 + 8 * (n - 1) + 8 * (n - 1) * (n - 2) / 2 + 4 * (n - 1) + 1;
        assert_eq!(s.point_count(), expected);
    }

    #[test]
    fn resolution_range_is_enforced() {
        let g = FuchsianGroup::bolza();
        assert!(matches!(
            build_sampled_surface(&g, 4),
            Err(MeshError::ResolutionRange { .. })
        ));
        assert!(matches!(
            build_sampled_surface(&g, 300),
            Err(MeshError::ResolutionRange { .. })
        ));
    }

    #[test]
    fn seam_samples_match_under_pairing() {
        let s = bolza_surface(10);
        let gens = s.group().generators().to_vec();
        for pair in s.seam() {
            let from = s.chart_coords()[pair.from_chart as usize];
            let to = s.chart_coords()[pair.to_chart as usize];
            assert!((gens[pair.generator].apply_unchecked(from) - to).norm() < 1e-12);
            assert_eq!(
                s.chart_to_surface()[pair.from_chart as usize],
                s.chart_to_surface()[pair.to_chart as usize]
            );
        }
    }

    #[test]
    fn corrupted_group_fails_seam_identification() {
        let g = FuchsianGroup::bolza();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.txt");
        let mut text = String::new();
        for (k, gen) in g.generators().iter().enumerate() {
            let mut a = gen.a();
            if k == 2 {
                a += c(1e-3, 0.0);
            }
            text.push_str(&format!(
                "{:.17e} {:.17e} {:.17e} {:.17e}\n",
                a.re,
                a.im,
                gen.b().re,
                gen.b().im
            ));
        }
        std::fs::write(&path, text).unwrap();
        let broken = FuchsianGroup::from_file(&path).unwrap();
        assert!(matches!(
            build_sampled_surface(&broken, 8),
            Err(MeshError::SeamMismatch { .. })
        ));
    }

    #[test]
    fn total_mass_approaches_gauss_bonnet_area() {
        let expected = 4.0 * std::f64::consts::PI;
        let coarse = (bolza_surface(12).total_mass() - expected).abs();
        let fine = (bolza_surface(24).total_mass() - expected).abs();
        assert!(coarse / expected < 0.02);
        assert!(fine < coarse);
    }

    #[test]
    fn triangles_stay_well_shaped() {
        let s = bolza_surface(16);
        assert!(s.min_angle_deg() > 10.0);
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums() {
        let s = bolza_surface(10);
        assert!(s.stiffness().symmetry_residual() < 1e-12);
        let worst = s
            .stiffness()
            .row_sums()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-10);
    }

    #[test]
    fn stiffness_is_positive_semidefinite_with_simple_kernel() {
        let s = bolza_surface(8);
        let n = s.point_count();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in s.stiffness().entries() {
            dense[(i as usize, j as usize)] = v;
        }
        // Symmetrize against roundoff before factorizing.
        let sym = (&dense + dense.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        assert!(vals[0] > -1e-10);
        assert!(vals[0].abs() < 1e-10);
        assert!(vals[1] > 1e-6);
    }

    #[test]
    fn laplacian_kills_constants_and_integrates_to_zero() {
        let s = bolza_surface(12);
        let constant = ScalarField::constant(2.5, s.point_count());
        let lap = s.laplace_beltrami(&constant).unwrap();
        assert!(lap.max_abs() < 1e-10);

        let f = ScalarField::from_fn(&s, |z| (2.0 * z.re).cos() + z.im);
        let lap = s.laplace_beltrami(&f).unwrap();
        assert!(s.integrate(&lap).unwrap().abs() < 1e-9);
    }

    #[test]
    fn laplacian_is_self_adjoint_in_the_mass_inner_product() {
        let s = bolza_surface(10);
        let f = ScalarField::from_fn(&s, |z| z.re * z.re - 0.3 * z.im);
        let g = ScalarField::from_fn(&s, |z| (3.0 * z.im).sin());
        let lf = s.laplace_beltrami(&f).unwrap();
        let lg = s.laplace_beltrami(&g).unwrap();
        let pair = |a: &ScalarField, b: &ScalarField| -> f64 {
            a.values
                .iter()
                .zip(&b.values)
                .zip(s.mass())
                .map(|((x, y), m)| x * y * m)
                .sum()
        };
        assert!((pair(&lf, &g) - pair(&f, &lg)).abs() < 1e-9);
    }

    #[test]
    fn laplacian_is_negative_at_a_bump_peak() {
        let s = bolza_surface(12);
        let f = ScalarField::from_fn(&s, |z| (-8.0 * z.norm_sqr()).exp());
        let lap = s.laplace_beltrami(&f).unwrap();
        assert!(lap.values[0] < -0.1);
    }

    #[test]
    fn integrate_is_linear() {
        let s = bolza_surface(8);
        let f = ScalarField::from_fn(&s, |z| z.re + 0.2);
        let g = ScalarField::from_fn(&s, |z| z.im * z.re);
        let combo = ScalarField::new(
            f.values
                .iter()
                .zip(&g.values)
                .map(|(a, b)| 2.0 * a - 0.5 * b)
                .collect(),
        );
        let lhs = s.integrate(&combo).unwrap();
        let rhs = 2.0 * s.integrate(&f).unwrap() - 0.5 * s.integrate(&g).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = bolza_surface(8);
        let bad = ScalarField::constant(1.0, 5);
        assert!(matches!(
            s.integrate(&bad),
            Err(MeshError::DimensionMismatch { .. })
        ));
        assert!(s.laplace_beltrami(&bad).is_err());
    }

    #[test]
    fn smallest_eigenvalue_matches_dense_factorization() {
        let s = bolza_surface(12);
        let iterative = smallest_nonzero_laplace_eigenvalue(&s).unwrap();

        let n = s.point_count();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in s.stiffness().entries() {
            dense[(i as usize, j as usize)] = v;
        }
        let scale: Vec<f64> = s.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                dense[(i, j)] *= scale[i] * scale[j];
            }
        }
        let sym = (&dense + dense.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        // The bottom nonzero eigenvalue is (numerically) a triple; the
        // iterative value must land inside that cluster.
        assert!((iterative - vals[1]).abs() < 2e-2 * vals[1]);
        assert!(iterative > 3.4 && iterative < 4.3);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_for_affine_fields() {
        let s = bolza_surface(8);
        let f = ScalarField::from_fn(&s, |z| 2.0 * z.re - 0.7 * z.im + 0.3);
        for idx in [0usize, 3, 17, s.point_count() - 1] {
            let z = s.points()[idx];
            assert_eq!(s.interpolate(&f, z).unwrap(), f.values[idx]);
        }
        // Strictly interior probe away from the folded boundary.
        let z = c(0.11, 0.07);
        let expected = 2.0 * z.re - 0.7 * z.im + 0.3;
        assert!((s.interpolate(&f, z).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn points_outside_the_octagon_are_rejected() {
        let s = bolza_surface(8);
        let f = ScalarField::constant(1.0, s.point_count());
        assert!(matches!(
            s.interpolate(&f, c(0.95, 0.0)),
            Err(MeshError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn polynomial_parse_eval_and_display() {
        let p = Polynomial::parse("1+z^2").unwrap();
        assert_eq!(p.eval(c(2.0, 0.0)), c(5.0, 0.0));
        assert_eq!(p.to_string(), "1+z^2");
        let q = Polynomial::parse("0.5*z^4").unwrap();
        assert_eq!(q.eval(c(2.0, 0.0)), c(8.0, 0.0));
        let r = Polynomial::parse(" z ").unwrap();
        assert_eq!(r.eval(c(0.3, 0.1)), c(0.3, 0.1));
        assert_eq!(Polynomial::parse("3").unwrap().eval(c(9.0, 9.0)), c(3.0, 0.0));
        assert!(Polynomial::parse("z^-1").is_err());
        assert!(Polynomial::parse("w^2").is_err());
        assert!(Polynomial::parse("").is_err());
    }

    #[test]
    fn series_matches_direct_summation() {
        let group = FuchsianGroup::bolza();
        let series = PoincareSeries::new(Polynomial::monomial(1), &group, 4).unwrap();
        let z = c(0.2, -0.1);
        let mut direct = c(0.0, 0.0);
        let elements = enumerate_group(&group, 4).unwrap();
        for g in elements.iter().rev() {
            let den = g.b().conj() * z + g.a().conj();
            let w = (g.a() * z + g.b()) / den;
            direct += w / den.powu(4);
        }
        assert!((series.eval(z) - direct).norm() < 1e-12);
        assert_eq!(series.element_count(), 3193);
    }

    #[test]
    fn odd_series_vanish_at_the_center_by_symmetry() {
        let group = FuchsianGroup::bolza();
        let z0 = c(0.0, 0.0);
        let odd = PoincareSeries::new(Polynomial::monomial(1), &group, 4).unwrap();
        assert!(odd.eval(z0).norm() < 1e-12);
        let even = PoincareSeries::new(Polynomial::monomial(0), &group, 4).unwrap();
        let v = even.eval(z0);
        assert!((v.re - 1.1956).abs() < 2e-2);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn automorphy_residual_decreases_with_word_length() {
        let group = FuchsianGroup::bolza();
        let samples: Vec<Complex64> = (0..20)
            .map(|k| Complex64::from_polar(0.05 * k as f64 / 4.0 + 0.1, 0.37 * k as f64))
            .collect();
        let mut last = f64::INFINITY;
        for word_length in [2u32, 3, 4] {
            let series =
                PoincareSeries::new(Polynomial::monomial(0), &group, word_length).unwrap();
            let r = series.automorphy_residual(&group, &samples);
            assert!(r <= last);
            last = r;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn batched_residuals_match_per_series_measurements() {
        let group = FuchsianGroup::bolza();
        let samples: Vec<Complex64> = (0..6)
            .map(|k| Complex64::from_polar(0.07 * k as f64, 1.3 * k as f64))
            .collect();
        let polys = vec![
            Polynomial::monomial(0),
            Polynomial::parse("1+z^2").unwrap(),
        ];
        let batch = automorphy_residuals_batch(&polys, &group, 3, &samples).unwrap();
        for (p, &r) in polys.iter().zip(&batch) {
            let series = PoincareSeries::new(p.clone(), &group, 3).unwrap();
            let single = series.automorphy_residual(&group, &samples);
            assert!((r - single).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_fields_record_boundary_automorphy_defect() {
        let group = FuchsianGroup::bolza();
        let s = bolza_surface(8);
        let coarse = poincare_series(Polynomial::monomial(0), &group, 2, &s).unwrap();
        let fine = poincare_series(Polynomial::monomial(0), &group, 4, &s).unwrap();
        // Seam samples sit near the disk boundary where truncation bites
        // hardest; the defect still has to shrink with the word length.
        assert!(fine.automorphy_residual < coarse.automorphy_residual);
        assert!(fine.automorphy_residual > 0.0);
        assert!(fine.automorphy_residual < 10.0);
    }

    #[test]
    fn batch_and_single_series_agree_and_are_deterministic() {
        let group = FuchsianGroup::bolza();
        let s = bolza_surface(8);
        let polys = [Polynomial::monomial(0), Polynomial::parse("1+z^2").unwrap()];
        let batch = poincare_series_batch(&polys, &group, 3, &s).unwrap();
        let single = poincare_series(polys[1].clone(), &group, 3, &s).unwrap();
        for (x, y) in batch[1].values.iter().zip(&single.values) {
            assert_eq!(x, y);
        }
        let again = poincare_series_batch(&polys, &group, 3, &s).unwrap();
        for (f, g) in batch.iter().zip(&again) {
            assert_eq!(f.automorphy_residual, g.automorphy_residual);
            assert_eq!(f.values, g.values);
        }
    }

    #[test]
    fn differential_transport_is_consistent_across_the_seam() {
        let group = FuchsianGroup::bolza();
        let s = bolza_surface(8);
        let field = poincare_series(Polynomial::monomial(0), &group, 3, &s).unwrap();
        // At a redundant boundary copy, interpolation transports the stored
        // value; the direct series there differs only by the recorded defect.
        let series = PoincareSeries::new(Polynomial::monomial(0), &group, 3).unwrap();
        for pair in s.seam().iter().step_by(3) {
            let z = s.chart_coords()[pair.from_chart as usize];
            let carried = s.interpolate_differential(&field, z).unwrap();
            let direct = series.eval(z);
            assert!((carried - direct).norm() <= field.automorphy_residual + 1e-12);
        }
    }
}
