//! Isometries of the Poincare disk and finitely generated Fuchsian groups.
//!
//! An orientation-preserving disk isometry is stored as the matrix
//! `[[a, b], [conj(b), conj(a)]]` with `|a|^2 - |b|^2 = 1`, acting by
//! `z -> (a z + b) / (conj(b) z + conj(a))`. Composition is matrix product,
//! the derivative is `1 / (conj(b) z + conj(a))^2`.
//!
//! The built-in group is the genus-2 octagon group: the fundamental domain
//! is the regular hyperbolic octagon with vertex angle pi/4 centered at the
//! origin, and the four generators translate opposite sides onto each other.
//! Group elements are enumerated breadth-first by word length with
//! deduplication up to overall matrix sign.

use num_complex::Complex64;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::path::Path;
use thiserror::Error;

/// Two elements closer than this (Frobenius distance, up to sign) are the
/// same group element. Distinct elements of a discrete cocompact group stay
/// far above this at any word length the enumerator accepts.
pub const DEDUP_DISTANCE: f64 = 1e-9;

/// Default upper limit for enumeration word length.
pub const DEFAULT_WORD_CAP: u32 = 10;

const DET_TOLERANCE: f64 = 1e-10;
const DEDUP_CELL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("matrix is not a unit-determinant disk isometry: |a|^2 - |b|^2 - 1 = {residual:e}")]
    NotUnitDeterminant { residual: f64 },
    #[error("generator {index} is not hyperbolic: |trace| = {trace}")]
    NotHyperbolic { index: usize, trace: f64 },
    #[error("point lies outside the open unit disk: |z| = {modulus}")]
    OutsideDisk { modulus: f64 },
    #[error("word length {requested} exceeds the enumeration cap {cap}")]
    WordLengthCap { requested: u32, cap: u32 },
    #[error("relation references generator {index} but the group has {count}")]
    BadRelationIndex { index: usize, count: usize },
    #[error("generator file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Unit-determinant isometry of the Poincare disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusTransform {
    a: Complex64,
    b: Complex64,
}

impl MobiusTransform {
    /// Builds the transform with matrix `[[a, b], [conj(b), conj(a)]]`,
    /// rejecting matrices whose determinant is off unity.
    pub fn new(a: Complex64, b: Complex64) -> Result<Self, GroupError> {
        let t = Self { a, b };
        let residual = t.det_residual();
        if !residual.is_finite() || residual > DET_TOLERANCE {
            return Err(GroupError::NotUnitDeterminant { residual });
        }
        Ok(t)
    }

    /// Builds the transform without checking the determinant. Used when
    /// reading untrusted input whose defects should be reported later
    /// rather than rejected at construction.
    pub fn new_unchecked(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn identity() -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// Rotation by `phi` about the origin.
    pub fn rotation(phi: f64) -> Self {
        Self {
            a: Complex64::from_polar(1.0, phi / 2.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    /// `| |a|^2 - |b|^2 - 1 |`.
    pub fn det_residual(&self) -> f64 {
        (self.a.norm_sqr() - self.b.norm_sqr() - 1.0).abs()
    }

    /// Matrix trace, real for this matrix shape.
    pub fn trace(&self) -> f64 {
        2.0 * self.a.re
    }

    /// Applies the transform to a point of the open disk.
    pub fn apply(&self, z: Complex64) -> Result<Complex64, GroupError> {
        let modulus = z.norm();
        if !(modulus < 1.0) {
            return Err(GroupError::OutsideDisk { modulus });
        }
        Ok(self.apply_unchecked(z))
    }

    /// Fractional linear action without the disk membership check. The limit
    /// circle and the rest of the Riemann sphere chart are legitimate inputs
    /// here; the pole `-conj(a)/conj(b)` always lies outside the closed disk.
    pub fn apply_unchecked(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// Complex derivative of the action at `z`.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let den = self.b.conj() * z + self.a.conj();
        1.0 / (den * den)
    }

    /// `self` after `other`: `(self.compose(other)).apply(z) = self.apply(other.apply(z))`.
    pub fn compose(&self, other: &Self) -> Self {
        // Top row of the matrix product; the bottom row stays the conjugate.
        Self {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    /// Frobenius distance up to overall sign of the matrix.
    pub fn matrix_distance(&self, other: &Self) -> f64 {
        let plus = ((self.a - other.a).norm_sqr() + (self.b - other.b).norm_sqr()).sqrt();
        let minus = ((self.a + other.a).norm_sqr() + (self.b + other.b).norm_sqr()).sqrt();
        std::f64::consts::SQRT_2 * plus.min(minus)
    }

    pub fn is_near_identity(&self, tol: f64) -> bool {
        self.matrix_distance(&Self::identity()) < tol
    }

    /// Dedup key: coordinates with canonical overall sign, snapped to a grid
    /// coarse enough to absorb rounding noise yet far below the separation
    /// of distinct group elements.
    fn dedup_key(&self) -> u64 {
        let mut v = [self.a.re, self.a.im, self.b.re, self.b.im];
        let lead = v.iter().find(|x| x.abs() > 1e-8).copied().unwrap_or(1.0);
        if lead < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for x in &v {
            ((x / DEDUP_CELL).round() as i64).hash(&mut h);
        }
        h.finish()
    }
}

/// Summary of the structural checks on a generator set.
#[derive(Debug, Clone, Copy)]
pub struct GroupReport {
    /// Worst `| |a|^2 - |b|^2 - 1 |` over the generators.
    pub det_residual: f64,
    /// Distance of the evaluated relation word from plus or minus identity.
    pub relation_residual: f64,
    /// Smallest generator |trace|; hyperbolic elements exceed 2.
    pub min_abs_trace: f64,
}

impl GroupReport {
    pub fn worst_residual(&self) -> f64 {
        self.det_residual.max(self.relation_residual)
    }
}

/// Finitely generated discrete group of disk isometries.
///
/// The relation word uses signed 1-based indices: `k` means generator `k-1`,
/// `-k` its inverse. It is carried for verification only.
#[derive(Debug, Clone)]
pub struct FuchsianGroup {
    generators: Vec<MobiusTransform>,
    relation: Vec<i32>,
    label: String,
}

impl FuchsianGroup {
    /// Validating constructor: unit determinants and hyperbolic generators.
    pub fn new(
        generators: Vec<MobiusTransform>,
        relation: Vec<i32>,
        label: impl Into<String>,
    ) -> Result<Self, GroupError> {
        for (index, g) in generators.iter().enumerate() {
            let residual = g.det_residual();
            if !residual.is_finite() || residual > DET_TOLERANCE {
                return Err(GroupError::NotUnitDeterminant { residual });
            }
            if g.trace().abs() <= 2.0 {
                return Err(GroupError::NotHyperbolic {
                    index,
                    trace: g.trace().abs(),
                });
            }
        }
        let g = Self {
            generators,
            relation,
            label: label.into(),
        };
        g.check_relation_indices()?;
        Ok(g)
    }

    /// The genus-2 octagon group. Generator `k` is the real-axis translation
    /// `a = 1 + sqrt 2`, `b = sqrt(2 + 2 sqrt 2)` conjugated by the rotation
    /// through `k pi / 4`; it maps octagon side `k + 4` onto side `k`.
    pub fn bolza() -> Self {
        let s2 = std::f64::consts::SQRT_2;
        let a = Complex64::new(1.0 + s2, 0.0);
        let b0 = (2.0 + 2.0 * s2).sqrt();
        let generators = (0..4)
            .map(|k| MobiusTransform {
                a,
                b: Complex64::from_polar(b0, k as f64 * std::f64::consts::FRAC_PI_4),
            })
            .collect();
        Self {
            generators,
            relation: OCTAGON_RELATION.to_vec(),
            label: "bolza".into(),
        }
    }

    /// Reads generators from a text file: one generator per line as four
    /// whitespace-separated fields `Re(a) Im(a) Re(b) Im(b)`, with `#`
    /// starting a comment. No validation happens here; call [`Self::verify`]
    /// to obtain residuals. Four-generator files are assigned the octagon
    /// relation word, others carry an empty relation.
    pub fn from_file(path: &Path) -> Result<Self, GroupError> {
        let text = std::fs::read_to_string(path)?;
        let mut generators = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(GroupError::Parse {
                    line: lineno + 1,
                    message: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let mut vals = [0.0; 4];
            for (slot, field) in vals.iter_mut().zip(&fields) {
                *slot = field.parse::<f64>().map_err(|e| GroupError::Parse {
                    line: lineno + 1,
                    message: format!("bad number {field:?}: {e}"),
                })?;
            }
            generators.push(MobiusTransform::new_unchecked(
                Complex64::new(vals[0], vals[1]),
                Complex64::new(vals[2], vals[3]),
            ));
        }
        if generators.is_empty() {
            return Err(GroupError::Parse {
                line: 0,
                message: "no generators in file".into(),
            });
        }
        let relation = if generators.len() == 4 {
            OCTAGON_RELATION.to_vec()
        } else {
            Vec::new()
        };
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".into());
        Ok(Self {
            generators,
            relation,
            label,
        })
    }

    pub fn generators(&self) -> &[MobiusTransform] {
        &self.generators
    }

    pub fn relation(&self) -> &[i32] {
        &self.relation
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn check_relation_indices(&self) -> Result<(), GroupError> {
        for &s in &self.relation {
            let index = s.unsigned_abs() as usize;
            if index == 0 || index > self.generators.len() {
                return Err(GroupError::BadRelationIndex {
                    index,
                    count: self.generators.len(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates a signed-index word left to right.
    pub fn evaluate_word(&self, word: &[i32]) -> Result<MobiusTransform, GroupError> {
        let mut m = MobiusTransform::identity();
        for &s in word {
            let index = s.unsigned_abs() as usize;
            if index == 0 || index > self.generators.len() {
                return Err(GroupError::BadRelationIndex {
                    index,
                    count: self.generators.len(),
                });
            }
            let g = self.generators[index - 1];
            let g = if s > 0 { g } else { g.inverse() };
            m = m.compose(&g);
        }
        Ok(m)
    }

    /// Residuals of the structural invariants. The relation residual is the
    /// distance of the evaluated relation word from plus or minus identity
    /// (zero when no relation is recorded).
    pub fn verify(&self) -> GroupReport {
        let det_residual = self
            .generators
            .iter()
            .map(MobiusTransform::det_residual)
            .fold(0.0, f64::max);
        let relation_residual = if self.relation.is_empty() {
            0.0
        } else {
            match self.evaluate_word(&self.relation) {
                Ok(m) => m.matrix_distance(&MobiusTransform::identity()),
                Err(_) => f64::INFINITY,
            }
        };
        let min_abs_trace = self
            .generators
            .iter()
            .map(|g| g.trace().abs())
            .fold(f64::INFINITY, f64::min);
        GroupReport {
            det_residual,
            relation_residual,
            min_abs_trace,
        }
    }
}

/// Vertex cycle of the regular octagon with opposite sides identified.
const OCTAGON_RELATION: [i32; 8] = [1, -2, 3, -4, -1, 2, -3, 4];

/// All distinct group elements of word length at most `max_word_length`,
/// breadth-first: identity first, then length 1 in generator order
/// (generators before inverses), and so on. Two words are the same element
/// when their matrices agree up to sign within [`DEDUP_DISTANCE`].
pub fn enumerate_group(
    group: &FuchsianGroup,
    max_word_length: u32,
) -> Result<Vec<MobiusTransform>, GroupError> {
    enumerate_group_with_cap(group, max_word_length, DEFAULT_WORD_CAP)
}

/// Enumeration with an explicit word length cap.
pub fn enumerate_group_with_cap(
    group: &FuchsianGroup,
    max_word_length: u32,
    cap: u32,
) -> Result<Vec<MobiusTransform>, GroupError> {
    if max_word_length > cap {
        return Err(GroupError::WordLengthCap {
            requested: max_word_length,
            cap,
        });
    }
    let mut steps: Vec<MobiusTransform> = group.generators.to_vec();
    steps.extend(group.generators.iter().map(MobiusTransform::inverse));

    let mut elements = vec![MobiusTransform::identity()];
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(MobiusTransform::identity().dedup_key());
    let mut level_start = 0;
    for _ in 0..max_word_length {
        let level_end = elements.len();
        for i in level_start..level_end {
            let base = elements[i];
            for step in &steps {
                let m = base.compose(step);
                if seen.insert(m.dedup_key()) {
                    elements.push(m);
                }
            }
        }
        level_start = level_end;
    }
    Ok(elements)
}

/// Upper bound on the element count of a free product: `1 + 2g sum (2g-1)^k`.
pub fn free_group_count_bound(generator_count: usize, max_word_length: u32) -> u64 {
    let degree = 2 * generator_count as u64;
    let mut bound = 1u64;
    let mut sphere = degree;
    for _ in 0..max_word_length {
        bound += sphere;
        sphere *= degree - 1;
    }
    bound
}
