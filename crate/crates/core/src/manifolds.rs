//! Supported manifolds and their equivariant embeddings.
//!
//! Every manifold is handled extrinsically through an embedding `J` into a
//! Euclidean space of symmetric matrices (or plain vectors for the sphere):
//!
//! | manifold         | native point                 | `J(x)`          | `D`          |
//! |------------------|------------------------------|-----------------|--------------|
//! | `Sphere(n)`      | unit vector in ℝⁿ⁺¹          | identity        | `n + 1`      |
//! | `Grassmann(p,n)` | n×p frame with `XᵀX = I_p`   | projector `XXᵀ` | `n(n+1)/2`   |
//! | `Spd(p)`         | p×p SPD matrix               | `log S`         | `p(p+1)/2`   |
//!
//! Ambient vectors are stored as full matrices. Their flat `D`-vector form
//! scales off-diagonal entries by √2 so that Frobenius geometry on matrices
//! and Euclidean geometry on the flat vectors coincide.
//!
//! The Grassmann and SPD exponential maps are projection retractions
//! (`unembed(J(x) + t·v)`); only the sphere uses the closed-form geodesic.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for structural point invariants (unit norm, orthonormal frame, symmetry).
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Minimum gap between the p-th and (p+1)-th eigenvalues when extracting a subspace.
pub const EIGEN_GAP_TOL: f64 = 1e-10;
/// Below this norm a vector cannot be radially projected onto the sphere.
pub const MIN_PROJECTION_NORM: f64 = 1e-12;
/// Tangent steps shorter than this leave the base point unchanged.
pub const MIN_STEP_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    /// Unit sphere Sⁿ ⊂ ℝⁿ⁺¹.
    Sphere { n: usize },
    /// p-dimensional subspaces of ℝⁿ.
    Grassmann { p: usize, n: usize },
    /// p×p symmetric positive definite matrices.
    Spd { p: usize },
}

impl ManifoldKind {
    pub fn sphere(n: usize) -> Result<Self> {
        let kind = ManifoldKind::Sphere { n };
        kind.validate()?;
        Ok(kind)
    }

    pub fn grassmann(p: usize, n: usize) -> Result<Self> {
        let kind = ManifoldKind::Grassmann { p, n };
        kind.validate()?;
        Ok(kind)
    }

    pub fn spd(p: usize) -> Result<Self> {
        let kind = ManifoldKind::Spd { p };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ManifoldKind::Sphere { n } if n >= 1 => Ok(()),
            ManifoldKind::Grassmann { p, n } if p >= 1 && p < n => Ok(()),
            ManifoldKind::Spd { p } if p >= 1 => Ok(()),
            _ => Err(Error::InvalidInput(format!("unsupported manifold parameters {self}"))),
        }
    }

    /// Intrinsic dimension d.
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            ManifoldKind::Sphere { n } => n,
            ManifoldKind::Grassmann { p, n } => p * (n - p),
            ManifoldKind::Spd { p } => linalg::sym_dim(p),
        }
    }

    /// Dimension D of the embedding space.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            ManifoldKind::Sphere { n } => n + 1,
            ManifoldKind::Grassmann { n, .. } => linalg::sym_dim(n),
            ManifoldKind::Spd { p } => linalg::sym_dim(p),
        }
    }

    /// Shape of the matrix holding an ambient vector.
    pub fn ambient_shape(&self) -> (usize, usize) {
        match *self {
            ManifoldKind::Sphere { n } => (n + 1, 1),
            ManifoldKind::Grassmann { n, .. } => (n, n),
            ManifoldKind::Spd { p } => (p, p),
        }
    }

    /// Shape of the native coordinates of a point.
    pub fn native_shape(&self) -> (usize, usize) {
        match *self {
            ManifoldKind::Sphere { n } => (n + 1, 1),
            ManifoldKind::Grassmann { p, n } => (n, p),
            ManifoldKind::Spd { p } => (p, p),
        }
    }

    /// Sphere and Grassmannian are compact; SPD is not.
    pub fn is_compact(&self) -> bool {
        !matches!(self, ManifoldKind::Spd { .. })
    }

    fn symmetric_ambient(&self) -> bool {
        !matches!(self, ManifoldKind::Sphere { .. })
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ManifoldKind::Sphere { n } => write!(f, "Sphere({n})"),
            ManifoldKind::Grassmann { p, n } => write!(f, "Grassmann({p},{n})"),
            ManifoldKind::Spd { p } => write!(f, "Spd({p})"),
        }
    }
}

fn ensure_same_kind(a: ManifoldKind, b: ManifoldKind) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::KindMismatch {
            left: a.to_string(),
            right: b.to_string(),
        })
    }
}

fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// A point on a supported manifold in its native representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    kind: ManifoldKind,
    coords: DMatrix<f64>,
}

impl ManifoldPoint {
    /// Validates the native coordinates against the invariants of `kind`.
    pub fn new(kind: ManifoldKind, coords: DMatrix<f64>) -> Result<Self> {
        kind.validate()?;
        if coords.shape() != kind.native_shape() {
            return Err(Error::InvalidInput(format!(
                "{kind} expects native shape {:?}, got {:?}",
                kind.native_shape(),
                coords.shape()
            )));
        }
        ensure_finite(&coords, "point")?;
        match kind {
            ManifoldKind::Sphere { .. } => {
                let norm = coords.norm();
                if (norm - 1.0).abs() > STRUCTURE_TOL {
                    return Err(Error::InvalidInput(format!("sphere point has norm {norm}")));
                }
            }
            ManifoldKind::Grassmann { p, .. } => {
                let gram = coords.transpose() * &coords;
                let err = (gram - DMatrix::<f64>::identity(p, p)).amax();
                if err > STRUCTURE_TOL {
                    return Err(Error::InvalidInput(format!(
                        "Grassmann frame is not orthonormal (max |XᵀX - I| = {err:e})"
                    )));
                }
            }
            ManifoldKind::Spd { .. } => {
                let asym = (&coords - coords.transpose()).amax();
                if asym > STRUCTURE_TOL * coords.amax().max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "SPD matrix is not symmetric (max asymmetry {asym:e})"
                    )));
                }
                let min_eig = linalg::min_sym_eigenvalue(&coords);
                if min_eig <= 0.0 {
                    return Err(Error::Domain(format!(
                        "SPD matrix has non-positive eigenvalue {min_eig:e}"
                    )));
                }
            }
        }
        Ok(ManifoldPoint { kind, coords })
    }

    /// Sphere point from a slice of length `n + 1`.
    pub fn sphere(coords: &[f64]) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput("sphere point needs at least 2 coordinates".into()));
        }
        let kind = ManifoldKind::sphere(coords.len() - 1)?;
        ManifoldPoint::new(kind, DMatrix::from_column_slice(coords.len(), 1, coords))
    }

    /// Grassmann point spanned by the columns of `frame` (orthonormal n×p).
    pub fn grassmann(frame: DMatrix<f64>) -> Result<Self> {
        let kind = ManifoldKind::grassmann(frame.ncols(), frame.nrows())?;
        ManifoldPoint::new(kind, frame)
    }

    /// Grassmann point spanned by the columns of an arbitrary full-rank n×p matrix.
    pub fn grassmann_span(matrix: &DMatrix<f64>) -> Result<Self> {
        ensure_finite(matrix, "frame")?;
        ManifoldPoint::grassmann(linalg::orthonormalize(matrix))
    }

    pub fn spd(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("SPD matrix must be square".into()));
        }
        let kind = ManifoldKind::spd(matrix.nrows())?;
        ManifoldPoint::new(kind, matrix)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }
}

/// A point or tangent vector of the embedding space ℝᴰ.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector {
    values: DMatrix<f64>,
}

impl AmbientVector {
    /// Wraps a matrix of the kind's ambient shape. Symmetric kinds are
    /// symmetrized.
    pub fn new(kind: ManifoldKind, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != kind.ambient_shape() {
            return Err(Error::InvalidInput(format!(
                "{kind} expects ambient shape {:?}, got {:?}",
                kind.ambient_shape(),
                values.shape()
            )));
        }
        ensure_finite(&values, "ambient vector")?;
        let values = if kind.symmetric_ambient() {
            linalg::symmetrize(&values)
        } else {
            values
        };
        Ok(AmbientVector { values })
    }

    pub fn zeros(kind: ManifoldKind) -> Self {
        let (r, c) = kind.ambient_shape();
        AmbientVector {
            values: DMatrix::zeros(r, c),
        }
    }

    /// Rebuilds an ambient vector from its flat D-coordinates.
    pub fn from_flat(kind: ManifoldKind, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != kind.ambient_dim() {
            return Err(Error::InvalidInput(format!(
                "{kind} expects {} flat coordinates, got {}",
                kind.ambient_dim(),
                flat.len()
            )));
        }
        let values = if kind.symmetric_ambient() {
            linalg::unflatten_sym(kind.ambient_shape().0, flat)
        } else {
            DMatrix::from_column_slice(flat.len(), 1, flat.as_slice())
        };
        AmbientVector::new(kind, values)
    }

    /// Flat D-coordinates; off-diagonal entries of symmetric matrices carry a
    /// √2 factor so the flat dot product equals the Frobenius inner product.
    pub fn flat(&self) -> DVector<f64> {
        if self.values.ncols() == 1 {
            DVector::from_column_slice(self.values.as_slice())
        } else {
            linalg::flatten_sym(&self.values)
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dot(&self, other: &AmbientVector) -> f64 {
        self.values.dot(&other.values)
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Add for &AmbientVector {
    type Output = AmbientVector;
    fn add(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector {
            values: &self.values + &rhs.values,
        }
    }
}

impl Sub for &AmbientVector {
    type Output = AmbientVector;
    fn sub(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector {
            values: &self.values - &rhs.values,
        }
    }
}

impl Mul<f64> for &AmbientVector {
    type Output = AmbientVector;
    fn mul(self, rhs: f64) -> AmbientVector {
        AmbientVector {
            values: &self.values * rhs,
        }
    }
}

/// An ambient vector lying in the tangent space of the image manifold at `J(base)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: ManifoldPoint,
    direction: AmbientVector,
}

impl TangentVector {
    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn direction(&self) -> &AmbientVector {
        &self.direction
    }

    pub fn norm(&self) -> f64 {
        self.direction.norm()
    }

    pub fn scaled(&self, t: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            direction: &self.direction * t,
        }
    }

    /// Largest violation of the tangent-space conditions at the base point.
    pub fn tangency_residual(&self) -> f64 {
        let d = self.direction.matrix();
        match self.base.kind {
            ManifoldKind::Sphere { .. } => self.base.coords.dot(d).abs(),
            ManifoldKind::Grassmann { .. } => {
                let p = embed(&self.base);
                let p = p.matrix();
                let reproj = p * d + d * p - 2.0 * p * d * p;
                (d - d.transpose()).amax().max((reproj - d).amax())
            }
            ManifoldKind::Spd { .. } => (d - d.transpose()).amax(),
        }
    }
}

/// `J(x)`: identity on the sphere, `XXᵀ` on the Grassmannian, `log S` on SPD.
///
/// Invalid coordinates are rejected when the [`ManifoldPoint`] is built, so
/// this map cannot fail.
pub fn embed(x: &ManifoldPoint) -> AmbientVector {
    let values = match x.kind {
        ManifoldKind::Sphere { .. } => x.coords.clone(),
        ManifoldKind::Grassmann { .. } => linalg::symmetrize(&(&x.coords * x.coords.transpose())),
        ManifoldKind::Spd { .. } => linalg::spd_log(&x.coords),
    };
    AmbientVector { values }
}

fn check_ambient(kind: ManifoldKind, v: &AmbientVector) -> Result<()> {
    kind.validate()?;
    if v.values.shape() != kind.ambient_shape() {
        return Err(Error::InvalidInput(format!(
            "{kind} expects ambient shape {:?}, got {:?}",
            kind.ambient_shape(),
            v.values.shape()
        )));
    }
    ensure_finite(&v.values, "ambient vector")
}

/// Top-p eigenvectors of `sym(v)` as an orthonormal n×p frame.
fn dominant_frame(p: usize, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = linalg::sym_eigen_desc(&linalg::symmetrize(v));
    let gap = values[p - 1] - values[p];
    if gap.abs() < EIGEN_GAP_TOL {
        return Err(Error::AmbiguousSubspace { gap });
    }
    Ok(vectors.columns(0, p).into_owned())
}

/// `J⁻¹ ∘ 𝒫`: the manifold point whose embedding is the image point closest to `v`.
pub fn unembed(kind: ManifoldKind, v: &AmbientVector) -> Result<ManifoldPoint> {
    check_ambient(kind, v)?;
    match kind {
        ManifoldKind::Sphere { .. } => {
            let norm = v.values.norm();
            if norm < MIN_PROJECTION_NORM {
                return Err(Error::DegenerateProjection { norm });
            }
            ManifoldPoint::new(kind, &v.values / norm)
        }
        ManifoldKind::Grassmann { p, .. } => ManifoldPoint::new(kind, dominant_frame(p, &v.values)?),
        ManifoldKind::Spd { .. } => ManifoldPoint::new(kind, linalg::sym_exp(&v.values)),
    }
}

/// Nearest point of the image manifold `J(M)` to `v`.
pub fn project_to_image(kind: ManifoldKind, v: &AmbientVector) -> Result<AmbientVector> {
    check_ambient(kind, v)?;
    match kind {
        ManifoldKind::Sphere { .. } | ManifoldKind::Grassmann { .. } => {
            Ok(embed(&unembed(kind, v)?))
        }
        ManifoldKind::Spd { .. } => Ok(AmbientVector {
            values: linalg::symmetrize(&v.values),
        }),
    }
}

/// Orthogonal projection of an ambient vector onto `T_{J(x)} J(M)`.
pub fn project_to_tangent(x: &ManifoldPoint, g: &AmbientVector) -> Result<TangentVector> {
    check_ambient(x.kind, g)?;
    let values = match x.kind {
        ManifoldKind::Sphere { .. } => &g.values - &x.coords * x.coords.dot(&g.values),
        ManifoldKind::Grassmann { .. } => {
            let proj = embed(x).values;
            let gs = linalg::symmetrize(&g.values);
            let pg = &proj * &gs;
            let out = &pg + &gs * &proj - 2.0 * &pg * &proj;
            linalg::symmetrize(&out)
        }
        ManifoldKind::Spd { .. } => linalg::symmetrize(&g.values),
    };
    Ok(TangentVector {
        base: x.clone(),
        direction: AmbientVector { values },
    })
}

/// Moves from `x` along the tangent vector `v` scaled by `t`.
///
/// Sphere: exact great-circle geodesic. Grassmann and SPD: projection
/// retraction `unembed(J(x) + t·v)`, which agrees with the exponential map to
/// first order.
pub fn exp_map(x: &ManifoldPoint, v: &TangentVector, t: f64) -> Result<ManifoldPoint> {
    ensure_same_kind(x.kind, v.base.kind)?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite step size {t}")));
    }
    let step_norm = v.norm() * t.abs();
    if step_norm < MIN_STEP_NORM {
        return Ok(x.clone());
    }
    match x.kind {
        ManifoldKind::Sphere { .. } => {
            let vnorm = v.norm();
            let theta = t * vnorm;
            let moved = &x.coords * theta.cos() + v.direction.matrix() * (theta.sin() / vnorm);
            let norm = moved.norm();
            ManifoldPoint::new(x.kind, moved / norm)
        }
        ManifoldKind::Grassmann { .. } | ManifoldKind::Spd { .. } => {
            let target = &embed(x) + &(v.direction() * t);
            unembed(x.kind, &target)
        }
    }
}

/// Chordal distance `‖J(x) − J(z)‖` in the embedding space.
pub fn extrinsic_distance(x: &ManifoldPoint, z: &ManifoldPoint) -> Result<f64> {
    ensure_same_kind(x.kind, z.kind)?;
    Ok((embed(x).values - embed(z).values).norm())
}

/// Log-Euclidean distance `‖log a − log b‖_F` between SPD matrices.
pub fn spd_intrinsic_distance(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    if !matches!(a.kind, ManifoldKind::Spd { .. }) {
        return Err(Error::Domain(format!("{} is not an SPD manifold", a.kind)));
    }
    ensure_same_kind(a.kind, b.kind)?;
    Ok((linalg::spd_log(&a.coords) - linalg::spd_log(&b.coords)).norm())
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Symmetric matrix with i.i.d. N(0,1) diagonal and N(0,1/2) off-diagonal entries.
pub(crate) fn gaussian_symmetric<R: Rng + ?Sized>(q: usize, rng: &mut R) -> DMatrix<f64> {
    linalg::symmetrize(&gaussian_matrix(q, q, rng))
}

/// Draws a random point: uniform on the sphere, Haar-distributed subspace on
/// the Grassmannian, `exp` of a Gaussian symmetric matrix on SPD.
pub fn random_point<R: Rng + ?Sized>(kind: ManifoldKind, rng: &mut R) -> ManifoldPoint {
    let (rows, cols) = kind.native_shape();
    loop {
        let coords = match kind {
            ManifoldKind::Sphere { .. } => {
                let g = gaussian_matrix(rows, 1, rng);
                let norm = g.norm();
                if norm < MIN_PROJECTION_NORM {
                    continue;
                }
                g / norm
            }
            ManifoldKind::Grassmann { .. } => linalg::orthonormalize(&gaussian_matrix(rows, cols, rng)),
            ManifoldKind::Spd { p } => linalg::sym_exp(&gaussian_symmetric(p, rng)),
        };
        // Rejection only triggers on measure-zero draws.
        if let Ok(point) = ManifoldPoint::new(kind, coords) {
            return point;
        }
    }
}

pub fn random_point_seeded(kind: ManifoldKind, seed: u64) -> ManifoldPoint {
    random_point(kind, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random unit-norm tangent vector at `x`.
pub fn random_unit_tangent<R: Rng + ?Sized>(x: &ManifoldPoint, rng: &mut R) -> TangentVector {
    let (rows, cols) = x.kind.ambient_shape();
    loop {
        let raw = if x.kind.symmetric_ambient() {
            gaussian_symmetric(rows, rng)
        } else {
            gaussian_matrix(rows, cols, rng)
        };
        let g = AmbientVector { values: raw };
        let v = project_to_tangent(x, &g).expect("shape matches kind");
        let norm = v.norm();
        if norm > 1e-8 {
            return v.scaled(1.0 / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn amb(kind: ManifoldKind, rows: &[f64]) -> AmbientVector {
        let (r, c) = kind.ambient_shape();
        AmbientVector::new(kind, DMatrix::from_row_slice(r, c, rows)).unwrap()
    }

    fn axis_frame() -> ManifoldPoint {
        ManifoldPoint::grassmann(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap()
    }

    #[test]
    fn kind_dimensions() {
        assert_eq!(ManifoldKind::sphere(2).unwrap().ambient_dim(), 3);
        let g = ManifoldKind::grassmann(2, 3).unwrap();
        assert_eq!((g.intrinsic_dim(), g.ambient_dim()), (2, 6));
        assert_eq!(ManifoldKind::spd(3).unwrap().ambient_dim(), 6);
        assert!(ManifoldKind::grassmann(3, 3).is_err());
        assert!(ManifoldKind::sphere(0).is_err());
        assert!(ManifoldKind::spd(0).is_err());
    }

    #[test]
    fn point_validation_errors() {
        assert!(matches!(
            ManifoldPoint::sphere(&[f64::NAN, 0.0, 1.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(ManifoldPoint::sphere(&[0.0, 0.0, 1.1]).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(ManifoldPoint::spd(not_pd), Err(Error::Domain(_))));
    }

    #[test]
    fn embed_examples() {
        let south = ManifoldPoint::sphere(&[0.0, 0.0, -1.0]).unwrap();
        assert_eq!(embed(&south).matrix().as_slice(), &[0.0, 0.0, -1.0]);

        let proj = embed(&axis_frame());
        assert_eq!(proj.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let eye = ManifoldPoint::spd(DMatrix::identity(2, 2)).unwrap();
        assert!(embed(&eye).norm() < 1e-15);
    }

    #[test]
    fn unembed_examples() {
        let s2 = ManifoldKind::sphere(2).unwrap();
        let x = unembed(s2, &amb(s2, &[0.0, 0.0, -0.5])).unwrap();
        assert_eq!(x.coords().as_slice(), &[0.0, 0.0, -1.0]);

        let g12 = ManifoldKind::grassmann(1, 2).unwrap();
        let x = unembed(g12, &amb(g12, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(extrinsic_distance(&x, &axis_frame()).unwrap() < 1e-14);

        let spd2 = ManifoldKind::spd(2).unwrap();
        let x = unembed(spd2, &AmbientVector::zeros(spd2)).unwrap();
        assert!((x.coords() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn unembed_degeneracies() {
        let s2 = ManifoldKind::sphere(2).unwrap();
        assert!(matches!(
            unembed(s2, &AmbientVector::zeros(s2)),
            Err(Error::DegenerateProjection { .. })
        ));
        let g12 = ManifoldKind::grassmann(1, 2).unwrap();
        assert!(matches!(
            unembed(g12, &amb(g12, &[0.5, 0.0, 0.0, 0.5])),
            Err(Error::AmbiguousSubspace { .. })
        ));
    }

    #[test]
    fn project_to_image_examples() {
        let s2 = ManifoldKind::sphere(2).unwrap();
        let v = project_to_image(s2, &amb(s2, &[0.0, 0.0, -2.0])).unwrap();
        assert_eq!(v.matrix().as_slice(), &[0.0, 0.0, -1.0]);

        // Nearest rank-1 projector to diag(0.9, 0.1): brute force over the
        // one-parameter family of unit directions (cos a, sin a).
        let g12 = ManifoldKind::grassmann(1, 2).unwrap();
        let target = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.1]);
        let brute = (0..100_000)
            .map(|i| {
                let a = PI * i as f64 / 100_000.0;
                let u = DMatrix::from_column_slice(2, 1, &[a.cos(), a.sin()]);
                let proj = &u * u.transpose();
                ((&proj - &target).norm(), proj)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        assert!((&brute - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-12);
        let v = project_to_image(g12, &AmbientVector::new(g12, target).unwrap()).unwrap();
        assert!((v.matrix() - brute).norm() < 1e-12);

        let spd2 = ManifoldKind::spd(2).unwrap();
        let sym = amb(spd2, &[0.3, -1.0, -1.0, 2.0]);
        assert_eq!(project_to_image(spd2, &sym).unwrap(), sym);
    }

    #[test]
    fn project_to_tangent_examples() {
        let north = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        let s2 = north.kind();
        let t = project_to_tangent(&north, &amb(s2, &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(t.direction().matrix().as_slice(), &[1.0, 2.0, 0.0]);
        let t = project_to_tangent(&north, &amb(s2, &[0.0, 0.0, 5.0])).unwrap();
        assert_eq!(t.norm(), 0.0);

        // The tangent space of rank-1 projectors in 2×2 at diag(1,0) is spanned by
        // the derivative of u(a)u(a)ᵀ at a = 0, i.e. [[0,1],[1,0]]. The identity
        // is orthogonal to it, so its projection vanishes.
        let x = axis_frame();
        let g12 = x.kind();
        let h = 1e-6;
        let curve = |a: f64| {
            let u = DMatrix::from_column_slice(2, 1, &[a.cos(), a.sin()]);
            &u * u.transpose()
        };
        let basis = (curve(h) - curve(-h)) / (2.0 * h);
        let ident = amb(g12, &[1.0, 0.0, 0.0, 1.0]);
        assert!(basis.dot(ident.matrix()).abs() < 1e-9);
        let t = project_to_tangent(&x, &ident).unwrap();
        assert!(t.norm() < 1e-15);
    }

    #[test]
    fn exp_map_examples() {
        let x = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let s2 = x.kind();
        let v = project_to_tangent(&x, &amb(s2, &[0.0, PI / 2.0, 0.0])).unwrap();
        let y = exp_map(&x, &v, 1.0).unwrap();
        assert!((y.coords() - DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])).norm() < 1e-15);

        let v = project_to_tangent(&x, &amb(s2, &[0.0, 2.0 * PI, 0.0])).unwrap();
        let y = exp_map(&x, &v, 1.0).unwrap();
        assert!((y.coords() - x.coords()).norm() < 1e-14);

        for kind in [s2, ManifoldKind::grassmann(2, 4).unwrap(), ManifoldKind::spd(3).unwrap()] {
            let x = random_point_seeded(kind, 11);
            let zero = project_to_tangent(&x, &AmbientVector::zeros(kind)).unwrap();
            assert_eq!(exp_map(&x, &zero, 1.0).unwrap(), x);
        }
    }

    #[test]
    fn distance_examples() {
        let north = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        let south = ManifoldPoint::sphere(&[0.0, 0.0, -1.0]).unwrap();
        assert_eq!(extrinsic_distance(&north, &south).unwrap(), 2.0);
        assert_eq!(extrinsic_distance(&north, &north).unwrap(), 0.0);

        let e2 = ManifoldPoint::grassmann(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        // diag(1,0) - diag(0,1) has Frobenius norm √2.
        assert!((extrinsic_distance(&axis_frame(), &e2).unwrap() - SQRT_2).abs() < 1e-15);

        assert!(matches!(
            extrinsic_distance(&north, &e2),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn spd_distance_examples() {
        let eye = ManifoldPoint::spd(DMatrix::identity(2, 2)).unwrap();
        let e_eye = ManifoldPoint::spd(DMatrix::identity(2, 2) * std::f64::consts::E).unwrap();
        assert_eq!(spd_intrinsic_distance(&eye, &eye).unwrap(), 0.0);
        assert!((spd_intrinsic_distance(&e_eye, &eye).unwrap() - SQRT_2).abs() < 1e-14);
        let north = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            spd_intrinsic_distance(&north, &north),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn random_point_examples() {
        let s2 = ManifoldKind::sphere(2).unwrap();
        let x = random_point_seeded(s2, 5);
        assert!((x.coords().norm() - 1.0).abs() < 1e-12);
        assert_eq!(x, random_point_seeded(s2, 5));

        let g = ManifoldKind::grassmann(2, 3).unwrap();
        let x = random_point_seeded(g, 5);
        let gram = x.coords().transpose() * x.coords();
        assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    }
}
