use nalgebra::Vector3;

use crate::group::{GroupElement, TensorialFeature};
use crate::quad::QuadState;

use super::model::Policy;

/// Vectors produced by [`canonical_vectors`].
pub const CANONICAL_VECTORS: usize = 8;
/// Rotation invariants produced by [`node_invariants`].
pub const INVARIANTS: usize = 21;

/// The state seen from `frame`: position, target, velocity, world angular
/// velocity, the three attitude columns, and target offset, all multiplied
/// by `R_gᵀ` (positions after subtracting `t_g`).
pub fn canonical_vectors(s: &QuadState, frame: &GroupElement) -> [Vector3<f64>; CANONICAL_VECTORS] {
    let rt = frame.rotation().transpose();
    let t = frame.translation();
    let att = rt * s.rotation;
    [
        rt * (s.position - t),
        rt * (s.target - t),
        rt * s.velocity,
        rt * s.world_omega(),
        att.column(0).into_owned(),
        att.column(1).into_owned(),
        att.column(2).into_owned(),
        rt * (s.target - s.position),
    ]
}

/// Norms and pairwise dot products of the six direction-like canonical
/// vectors (all but the two positions). Unchanged by any rotation of the
/// frame.
pub fn node_invariants(v: &[Vector3<f64>; CANONICAL_VECTORS]) -> [f64; INVARIANTS] {
    let mut out = [0.0; INVARIANTS];
    let dirs = &v[2..];
    let mut k = 0;
    for a in dirs {
        out[k] = a.norm();
        k += 1;
    }
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            out[k] = dirs[i].dot(&dirs[j]);
            k += 1;
        }
    }
    out
}

/// Lifts the state seen from `frame` to the policy's first-layer feature:
/// scalars from a linear map of the invariants, vectors from scalar-weighted
/// sums of the canonical vectors. As with every [`TensorialFeature`] the
/// vectors are returned in ambient coordinates, i.e. rotated back by `R_g`.
pub fn encode_node(s: &QuadState, frame: &GroupElement, policy: &Policy) -> TensorialFeature {
    let v = canonical_vectors(s, frame);
    let inv = node_invariants(&v);
    let (w0, b0, w1) = policy.lift_params();
    let c0 = policy.config.scalars;
    let c1 = policy.config.vectors;
    let scalars = (0..c0)
        .map(|j| b0[j] + inv.iter().enumerate().map(|(q, x)| x * w0[q * c0 + j]).sum::<f64>())
        .collect();
    let vectors = (0..c1)
        .map(|j| {
            let local: Vector3<f64> = v.iter().enumerate().map(|(q, x)| x * w1[q * c1 + j]).sum();
            frame.act_vector(&local)
        })
        .collect();
    TensorialFeature::new(scalars, vectors, *frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{act_on_feature, act_on_state};

    fn state() -> QuadState {
        let mut s = QuadState::at_rest(Vector3::new(1.0, -2.0, 3.0), Vector3::new(0.5, 0.5, 2.0));
        s.velocity = Vector3::new(0.3, 0.1, -0.2);
        s.omega = Vector3::new(0.05, -0.4, 1.0);
        s.rotation = crate::group::axis_angle(Vector3::new(1.0, 2.0, 0.5), 0.3);
        s
    }

    #[test]
    fn own_frame_at_target_has_zero_offset() {
        let s = QuadState::at_rest(Vector3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 2.0, 3.0));
        let v = canonical_vectors(&s, &GroupElement::new(s.rotation, s.position));
        assert_eq!(v[7], Vector3::zeros());
        assert_eq!(v[0], Vector3::zeros());
    }

    #[test]
    fn identity_frame_gives_world_quantities() {
        let s = state();
        let v = canonical_vectors(&s, &GroupElement::identity());
        assert_eq!(v[0], s.position);
        assert_eq!(v[1], s.target);
        assert_eq!(v[2], s.velocity);
        assert_eq!(v[4], s.rotation.column(0).into_owned());
    }

    #[test]
    fn transformed_state_in_transformed_frame_matches() {
        let s = state();
        let frame = GroupElement::new(crate::group::rot_z(0.7), Vector3::new(0.2, 0.0, 1.0));
        let g = GroupElement::new(crate::group::axis_angle(Vector3::new(-1.0, 0.3, 2.0), 2.1), Vector3::new(4.0, -3.0, 0.5));
        let a = canonical_vectors(&s, &frame);
        let b = canonical_vectors(&act_on_state(&g, &s), &g.compose(&frame));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn encoded_feature_transforms_with_the_frame() {
        let cfg = super::super::GraphormerConfig { scalars: 5, vectors: 4, ..Default::default() };
        let policy = Policy::new(cfg, 3).unwrap();
        let s = state();
        let frame = GroupElement::new(s.rotation, s.position);
        let g = GroupElement::new(crate::group::axis_angle(Vector3::new(0.2, -1.0, 0.7), 1.2), Vector3::new(-2.0, 1.0, 3.0));
        let a = encode_node(&s, &frame, &policy);
        let b = encode_node(&act_on_state(&g, &s), &g.compose(&frame), &policy);
        assert!(act_on_feature(&g, &a).max_abs_diff(&b) <= 1e-12);
        // Seen from their own frames the two features coincide.
        let id = GroupElement::identity();
        assert!(a.reexpress(&id).max_abs_diff(&b.reexpress(&id)) <= 1e-12);
    }

    #[test]
    fn invariants_ignore_frame_rotation() {
        let s = state();
        let a = node_invariants(&canonical_vectors(&s, &GroupElement::identity()));
        let b = node_invariants(&canonical_vectors(&s, &GroupElement::rot_x(1.3)));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
