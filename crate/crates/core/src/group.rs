//! Rigid-motion group elements and their actions.
//!
//! Elements of SE(3) are stored as a rotation matrix plus a translation. The
//! same type covers SO(3) (zero translation) and the pure translation
//! subgroup (identity rotation). Actions on states, tensorial features and
//! plain vectors implement [`Action`], and [`canonicalize`] turns an
//! arbitrary map into one that is equivariant under a pair of actions.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::quad::QuadState;

/// Orthonormality drift past which rotations are re-orthonormalized.
pub const ORTHO_TOL: f64 = 1e-9;

/// An element of SE(3): `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for GroupElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl GroupElement {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds an element, re-orthonormalizing the rotation if it drifted.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: orthonormalize_if_needed(rotation),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_rotation(rot_x(angle))
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_rotation(rot_y(angle))
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(rot_z(angle))
    }

    /// Rotation of `angle` radians about the (not necessarily unit) `axis`.
    pub fn axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        Self::from_rotation(axis_angle(axis, angle))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `(R_a R_b, R_a t_b + t_a)`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// `(Rᵀ, −Rᵀ t)`.
    pub fn inverse(&self) -> GroupElement {
        let rt = self.rotation.transpose();
        GroupElement {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Affine action on a point.
    pub fn act_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Linear action on a free vector (translation ignored).
    pub fn act_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        ortho_error(&self.rotation)
    }

    /// Row-major rotation followed by the translation.
    pub fn to_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = self.rotation[(r, c)];
            }
        }
        out[9] = self.translation.x;
        out[10] = self.translation.y;
        out[11] = self.translation.z;
        out
    }

    pub fn from_array(a: &[f64; 12]) -> Self {
        let rotation = Matrix3::from_row_slice(&a[..9]);
        GroupElement::new(rotation, Vector3::new(a[9], a[10], a[11]))
    }

    /// Largest absolute element-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &GroupElement) -> f64 {
        let r = (self.rotation - other.rotation).abs().max();
        let t = (self.translation - other.translation).abs().max();
        r.max(t)
    }
}

impl std::ops::Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.compose(&rhs)
    }
}

pub fn compose(a: &GroupElement, b: &GroupElement) -> GroupElement {
    a.compose(b)
}

pub fn inverse(g: &GroupElement) -> GroupElement {
    g.inverse()
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rodrigues' formula.
pub fn axis_angle(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Matrix3::identity();
    }
    let k = skew(&(axis / n));
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// The matrix `[v]_×` with `[v]_× w = v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn ortho_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Gram–Schmidt on the columns.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).normalize();
    let c1 = r.column(1) - c0 * c0.dot(&r.column(1));
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

fn orthonormalize_if_needed(r: Matrix3<f64>) -> Matrix3<f64> {
    if ortho_error(&r) > ORTHO_TOL {
        orthonormalize(&r)
    } else {
        r
    }
}

/// A group action on some space `X`: `act(e, x) = x` and
/// `act(g, act(h, x)) = act(g·h, x)`.
pub trait Action<X> {
    fn act(&self, g: &GroupElement, x: &X) -> X;
}

/// Affine action on points (positions).
#[derive(Debug, Clone, Copy, Default)]
pub struct PointAction;

/// Linear action on free vectors (velocities, directions).
#[derive(Debug, Clone, Copy, Default)]
pub struct VectorAction;

/// Trivial action: every element acts as the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrivialAction;

/// Action on quadrotor states, see [`act_on_state`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StateAction;

/// Action on tensorial features, see [`act_on_feature`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureAction;

impl Action<Vector3<f64>> for PointAction {
    fn act(&self, g: &GroupElement, x: &Vector3<f64>) -> Vector3<f64> {
        g.act_point(x)
    }
}

impl Action<Vector3<f64>> for VectorAction {
    fn act(&self, g: &GroupElement, x: &Vector3<f64>) -> Vector3<f64> {
        g.act_vector(x)
    }
}

impl<X: Clone> Action<X> for TrivialAction {
    fn act(&self, _g: &GroupElement, x: &X) -> X {
        x.clone()
    }
}

impl Action<QuadState> for StateAction {
    fn act(&self, g: &GroupElement, x: &QuadState) -> QuadState {
        act_on_state(g, x)
    }
}

impl Action<TensorialFeature> for FeatureAction {
    fn act(&self, g: &GroupElement, x: &TensorialFeature) -> TensorialFeature {
        act_on_feature(g, x)
    }
}

/// Positions and target move affinely, velocity and world angular velocity
/// rotate, attitude is left-multiplied. The body-frame angular velocity is
/// unchanged because `(R_g R)ᵀ (R_g R ω) = ω`.
pub fn act_on_state(g: &GroupElement, s: &QuadState) -> QuadState {
    QuadState {
        position: g.act_point(&s.position),
        velocity: g.act_vector(&s.velocity),
        rotation: orthonormalize_if_needed(g.rotation() * s.rotation),
        omega: s.omega,
        target: g.act_point(&s.target),
    }
}

/// Scalar (type-0) and 3-vector (type-1) channels attached to a frame.
///
/// Vector channels are ambient coordinates; a channel flagged positional
/// transforms affinely, the others only rotate.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorialFeature {
    pub scalars: Vec<f64>,
    pub vectors: Vec<Vector3<f64>>,
    pub positional: Vec<bool>,
    pub frame: GroupElement,
}

impl TensorialFeature {
    /// All vector channels non-positional.
    pub fn new(scalars: Vec<f64>, vectors: Vec<Vector3<f64>>, frame: GroupElement) -> Self {
        let positional = vec![false; vectors.len()];
        Self {
            scalars,
            vectors,
            positional,
            frame,
        }
    }

    pub fn with_positional(mut self, positional: Vec<bool>) -> Self {
        assert_eq!(positional.len(), self.vectors.len(), "one flag per vector channel");
        self.positional = positional;
        self
    }

    /// The same feature seen from `new_frame`: acts with `new_frame · frame⁻¹`.
    pub fn reexpress(&self, new_frame: &GroupElement) -> TensorialFeature {
        act_on_feature(&new_frame.compose(&self.frame.inverse()), self)
    }

    /// Largest absolute difference over scalars, vectors and frame.
    pub fn max_abs_diff(&self, other: &TensorialFeature) -> f64 {
        assert_eq!(self.scalars.len(), other.scalars.len());
        assert_eq!(self.vectors.len(), other.vectors.len());
        let s = self
            .scalars
            .iter()
            .zip(&other.scalars)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let v = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0, f64::max);
        s.max(v).max(self.frame.max_abs_diff(&other.frame))
    }
}

pub fn act_on_feature(g: &GroupElement, f: &TensorialFeature) -> TensorialFeature {
    let vectors = f
        .vectors
        .iter()
        .zip(&f.positional)
        .map(|(v, &pos)| if pos { g.act_point(v) } else { g.act_vector(v) })
        .collect();
    TensorialFeature {
        scalars: f.scalars.clone(),
        vectors,
        positional: f.positional.clone(),
        frame: g.compose(&f.frame),
    }
}

/// Lifts `body: X → Y` to `F(g, x) = ψ_g[body(φ_{g⁻¹}[x])]`.
///
/// The result satisfies `F(q·g, φ_q[x]) = ψ_q[F(g, x)]` for every `q`.
pub fn canonicalize<X, Y, F, In, Out>(
    body: F,
    input: In,
    output: Out,
) -> impl Fn(&GroupElement, &X) -> Y
where
    F: Fn(&X) -> Y,
    In: Action<X>,
    Out: Action<Y>,
{
    move |g, x| {
        let local = input.act(&g.inverse(), x);
        output.act(g, &body(&local))
    }
}
