//! Numerical checks that a reward is invariant and a vector field is
//! equivariant under sampled group elements, plus the finite push-forward
//! extension of a planar integrator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::group::{act_on_state, axis_angle, GroupElement};
use crate::policy::{Policy, PolicyError};
use crate::quad::{derivative, QuadParams, QuadState};
use crate::swarm::{neighborhoods_with, reward_terms, LocalGraph, NeighborRule, RewardConfig};

/// Named families of group elements to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupSpec {
    /// Rotation about a uniform random axis by an angle uniform on
    /// `[0, π]`, translation uniform in `[−5, 5]³`.
    Se3,
    So3,
    /// Rotation about `z` with an arbitrary 3-D translation.
    Se2z,
    Trans,
    Identity,
    /// The fixed quarter turn about `x`.
    Rx90,
}

impl GroupSpec {
    pub const ALL: [GroupSpec; 6] = [
        GroupSpec::Se3,
        GroupSpec::So3,
        GroupSpec::Se2z,
        GroupSpec::Trans,
        GroupSpec::Identity,
        GroupSpec::Rx90,
    ];

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let translation = |rng: &mut R| Vector3::from_fn(|_, _| rng.gen_range(-5.0..=5.0));
        let rotation = |rng: &mut R| {
            let axis: [f64; 3] = UnitSphere.sample(rng);
            axis_angle(Vector3::from(axis), rng.gen_range(0.0..=PI))
        };
        match self {
            GroupSpec::Se3 => {
                let r = rotation(rng);
                GroupElement::new(r, translation(rng))
            }
            GroupSpec::So3 => GroupElement::from_rotation(rotation(rng)),
            GroupSpec::Se2z => {
                let r = crate::group::rot_z(rng.gen_range(-PI..=PI));
                GroupElement::new(r, translation(rng))
            }
            GroupSpec::Trans => GroupElement::from_translation(translation(rng)),
            GroupSpec::Identity => GroupElement::identity(),
            GroupSpec::Rx90 => GroupElement::rot_x(PI / 2.0),
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            GroupSpec::Se3 => "SE(3): uniform axis, angle ~ U[0, pi], translation ~ U[-5, 5]^3",
            GroupSpec::So3 => "SO(3): uniform axis, angle ~ U[0, pi]",
            GroupSpec::Se2z => "z-rotations ~ U[-pi, pi] with translation ~ U[-5, 5]^3",
            GroupSpec::Trans => "translations ~ U[-5, 5]^3",
            GroupSpec::Identity => "identity only",
            GroupSpec::Rx90 => "fixed 90 degree rotation about x",
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GroupSpec::Se3 => "se3",
            GroupSpec::So3 => "so3",
            GroupSpec::Se2z => "se2z",
            GroupSpec::Trans => "trans",
            GroupSpec::Identity => "identity",
            GroupSpec::Rx90 => "rx90",
        };
        f.write_str(s)
    }
}

impl FromStr for GroupSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupSpec::ALL
            .into_iter()
            .find(|g| g.to_string() == s)
            .ok_or_else(|| format!("unknown group `{s}` (expected one of se3, so3, se2z, trans, identity, rx90)"))
    }
}

/// Largest residual of one condition and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub condition: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(condition: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            condition: condition.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub target: String,
    pub group: String,
    pub sampling: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl AuditReport {
    pub fn new(target: &str, group: &str, sampling: &str, samples: usize, seed: u64, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            target: target.to_string(),
            group: group.to_string(),
            sampling: sampling.to_string(),
            samples,
            seed,
            checks,
            pass,
        }
    }

    /// Plain-text table of the checks.
    pub fn table(&self) -> String {
        let mut out = format!(
            "target: {}  group: {}  samples: {}  seed: {}\n{:<22} {:>14} {:>10}  verdict\n",
            self.target, self.group, self.samples, self.seed, "condition", "residual", "tol"
        );
        for c in &self.checks {
            out.push_str(&format!(
                "{:<22} {:>14.6e} {:>10.1e}  {}\n",
                c.condition,
                c.residual,
                c.tolerance,
                if c.pass { "pass" } else { "fail" }
            ));
        }
        out
    }
}

/// Condition 1: `max |L(x, u) − L(φ_g x, ψ_g u)|` over `n` samples.
pub fn audit_reward<G, X, U, R: Rng>(
    reward: impl Fn(&X, &U) -> f64,
    act_state: impl Fn(&G, &X) -> X,
    act_input: impl Fn(&G, &U) -> U,
    mut sample_group: impl FnMut(&mut R) -> G,
    mut sample_point: impl FnMut(&mut R) -> (X, U),
    n: usize,
    tol: f64,
    rng: &mut R,
) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let g = sample_group(rng);
        let (x, u) = sample_point(rng);
        let r = (reward(&x, &u) - reward(&act_state(&g, &x), &act_input(&g, &u))).abs();
        worst = worst.max(r);
    }
    Check::new("reward-invariance", worst, tol)
}

/// A control system `ẋ = f(x, u)` with group actions on states and inputs
/// and the differential of the state action on tangent vectors.
pub trait ControlSystem {
    type Group;
    type State;
    type Input;

    fn field(&self, x: &Self::State, u: &Self::Input) -> Vec<f64>;
    fn act_state(&self, g: &Self::Group, x: &Self::State) -> Self::State;
    fn act_input(&self, g: &Self::Group, u: &Self::Input) -> Self::Input;
    /// `dφ_g` at `x` applied to the tangent vector `v`.
    fn push_tangent(&self, g: &Self::Group, x: &Self::State, v: &[f64]) -> Vec<f64>;
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Condition 2: `max ‖dφ_g f(x, u) − f(φ_g x, ψ_g u)‖` over `n` samples.
pub fn audit_dynamics<S: ControlSystem, R: Rng>(
    sys: &S,
    mut sample_group: impl FnMut(&mut R) -> S::Group,
    mut sample_point: impl FnMut(&mut R) -> (S::State, S::Input),
    n: usize,
    tol: f64,
    rng: &mut R,
) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let g = sample_group(rng);
        let (x, u) = sample_point(rng);
        let lhs = sys.push_tangent(&g, &x, &sys.field(&x, &u));
        let rhs = sys.field(&sys.act_state(&g, &x), &sys.act_input(&g, &u));
        worst = worst.max(dist(&lhs, &rhs));
    }
    Check::new("dynamics-equivariance", worst, tol)
}

/// Quadrotor dynamics with thrusts treated as frame scalars.
#[derive(Debug, Clone, Default)]
pub struct QuadrotorSystem {
    pub params: QuadParams,
}

impl ControlSystem for QuadrotorSystem {
    type Group = GroupElement;
    type State = QuadState;
    type Input = [f64; 4];

    fn field(&self, x: &QuadState, u: &[f64; 4]) -> Vec<f64> {
        derivative(x, u, &self.params).to_vec()
    }

    fn act_state(&self, g: &GroupElement, x: &QuadState) -> QuadState {
        act_on_state(g, x)
    }

    fn act_input(&self, _: &GroupElement, u: &[f64; 4]) -> [f64; 4] {
        *u
    }

    /// Velocity and acceleration rotate, `Ṙ ↦ R_g Ṙ`, the body-frame
    /// angular acceleration is unchanged.
    fn push_tangent(&self, g: &GroupElement, _: &QuadState, v: &[f64]) -> Vec<f64> {
        let r = g.rotation();
        let mut out = Vec::with_capacity(18);
        for k in 0..2 {
            let w = r * Vector3::new(v[3 * k], v[3 * k + 1], v[3 * k + 2]);
            out.extend(w.iter());
        }
        let rdot = nalgebra::Matrix3::from_row_slice(&v[6..15]);
        let rr = r * rdot;
        for i in 0..3 {
            for j in 0..3 {
                out.push(rr[(i, j)]);
            }
        }
        out.extend_from_slice(&v[15..18]);
        out
    }
}

/// `ẋ = u` in 3-D with inputs rotating like velocities.
#[derive(Debug, Clone, Copy, Default)]
pub struct Integrator3;

impl ControlSystem for Integrator3 {
    type Group = GroupElement;
    type State = Vector3<f64>;
    type Input = Vector3<f64>;

    fn field(&self, _: &Vector3<f64>, u: &Vector3<f64>) -> Vec<f64> {
        u.iter().copied().collect()
    }

    fn act_state(&self, g: &GroupElement, x: &Vector3<f64>) -> Vector3<f64> {
        g.act_point(x)
    }

    fn act_input(&self, g: &GroupElement, u: &Vector3<f64>) -> Vector3<f64> {
        g.act_vector(u)
    }

    fn push_tangent(&self, g: &GroupElement, _: &Vector3<f64>, v: &[f64]) -> Vec<f64> {
        g.act_vector(&Vector3::new(v[0], v[1], v[2])).iter().copied().collect()
    }
}

/// Random swarm state: positions in `[−3, 3]² × [0, 4]`, random attitudes,
/// Gaussian velocities and rates, targets in the same box.
pub fn random_states<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<QuadState> {
    (0..n)
        .map(|_| {
            let mut p = || Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..4.0));
            let (x, t) = (p(), p());
            let mut s = QuadState::at_rest(x, t);
            let normal = |rng: &mut R| Vector3::from_fn(|_, _| StandardNormal.sample(rng));
            s.velocity = normal(rng);
            s.omega = normal(rng);
            let axis: [f64; 3] = UnitSphere.sample(rng);
            s.rotation = axis_angle(Vector3::from(axis), rng.gen_range(0.0..=PI));
            s
        })
        .collect()
}

pub fn random_actions<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<[f64; 4]> {
    (0..n).map(|_| [(); 4].map(|_| rng.gen_range(-1.0..=1.0))).collect()
}

/// Random local graph with `nodes` nodes, ego in slot 0.
pub fn random_local_graph<R: Rng + ?Sized>(rng: &mut R, nodes: usize) -> LocalGraph {
    LocalGraph::new((0..nodes).collect(), random_states(rng, nodes), 0)
}

/// Swarm objective without room terms: the sum of every agent's reward,
/// with contacts charged whenever two agents are within the contact
/// distance.
pub fn swarm_objective(states: &[QuadState], actions: &[[f64; 4]], cfg: &RewardConfig, dt: f64, rule: &NeighborRule) -> f64 {
    let positions: Vec<_> = states.iter().map(|s| s.position).collect();
    let nb = neighborhoods_with(&positions, rule);
    let c = cfg.coeffs(dt);
    (0..states.len())
        .map(|i| {
            let touching = (0..states.len()).any(|j| j != i && (positions[i] - positions[j]).norm() <= cfg.min_separation);
            let others: Vec<_> = nb[i].iter().map(|&j| positions[j]).collect();
            reward_terms(&states[i], &others, &actions[i], &c, touching).total
        })
        .sum()
}

/// Condition 1 for the swarm objective over random swarms of `agents`.
pub fn audit_swarm_reward(group: GroupSpec, agents: usize, n: usize, tol: f64, seed: u64) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RewardConfig::default();
    let rule = NeighborRule::default();
    let check = audit_reward(
        |x: &Vec<QuadState>, u: &Vec<[f64; 4]>| swarm_objective(x, u, &cfg, 0.01, &rule),
        |g: &GroupElement, x: &Vec<QuadState>| x.iter().map(|s| act_on_state(g, s)).collect(),
        |_: &GroupElement, u: &Vec<[f64; 4]>| u.clone(),
        |r: &mut ChaCha8Rng| group.sample(r),
        |r: &mut ChaCha8Rng| (random_states(r, agents), random_actions(r, agents)),
        n,
        tol,
        &mut rng,
    );
    AuditReport::new("reward", &group.to_string(), group.describe(), n, seed, vec![check])
}

/// Condition 2 for the quadrotor dynamics.
pub fn audit_quadrotor(params: QuadParams, group: GroupSpec, n: usize, tol: f64, seed: u64) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let check = audit_dynamics(
        &QuadrotorSystem { params },
        |r: &mut ChaCha8Rng| group.sample(r),
        |r: &mut ChaCha8Rng| (random_states(r, 1)[0], random_actions(r, 1)[0].map(|v| (1.0 + v) / 2.0)),
        n,
        tol,
        &mut rng,
    );
    AuditReport::new("dynamics", &group.to_string(), group.describe(), n, seed, vec![check])
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative residual `‖π̂(g·G) − ψ_g π̂(G)‖ / ‖ψ_g π̂(G)‖` of the trunk
/// output, where `ψ_g` rotates the vector channels by `R_g`.
pub fn policy_residual(policy: &Policy, graph: &LocalGraph, g: &GroupElement) -> Result<f64, PolicyError> {
    let moved = graph.transformed(g);
    let e = policy.evaluate(&[graph, &moved])?;
    let s = policy.config.out_scalars;
    let mut expect = e.features[0].clone();
    for v in expect[s..].chunks_mut(3) {
        let w = g.act_vector(&Vector3::new(v[0], v[1], v[2]));
        v.copy_from_slice(w.as_slice());
    }
    Ok(dist(&e.features[1], &expect) / norm(&expect).max(1e-12))
}

/// Equivariance of the policy trunk over random graphs of up to
/// `max_nodes` nodes.
pub fn audit_policy(policy: &Policy, group: GroupSpec, max_nodes: usize, n: usize, tol: f64, seed: u64) -> Result<AuditReport, PolicyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let nodes = rng.gen_range(1..=max_nodes.max(1));
        let graph = random_local_graph(&mut rng, nodes);
        let g = group.sample(&mut rng);
        worst = worst.max(policy_residual(policy, &graph, &g)?);
    }
    let check = Check::new("policy-equivariance", worst, tol);
    Ok(AuditReport::new("policy", &group.to_string(), group.describe(), n, seed, vec![check]))
}

fn rot2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// The planar integrator `ẋ = u` extended by a cyclic group of `K`
/// rotations. An extended input holds `K` weights and `K` planar inputs;
/// the field is `Σ_j α_j R_j u_j`. Group element `m` acts on states by
/// `R_m` and on extended inputs by moving slot `j` to slot `m + j mod K`.
#[derive(Debug, Clone)]
pub struct CyclicExtension {
    pub k: usize,
    rotations: Vec<Matrix2<f64>>,
}

impl CyclicExtension {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1);
        let rotations = (0..k).map(|j| rot2(2.0 * PI * j as f64 / k as f64)).collect();
        Self { k, rotations }
    }

    pub fn rotation(&self, m: usize) -> &Matrix2<f64> {
        &self.rotations[m % self.k]
    }

    /// Extended input that selects the original system: weight 1 on the
    /// identity slot.
    pub fn one_hot(&self, u: &Vector2<f64>) -> Vec<f64> {
        let mut out = vec![0.0; 3 * self.k];
        out[0] = 1.0;
        out[self.k] = u.x;
        out[self.k + 1] = u.y;
        out
    }
}

impl ControlSystem for CyclicExtension {
    type Group = usize;
    type State = Vector2<f64>;
    type Input = Vec<f64>;

    fn field(&self, _: &Vector2<f64>, u: &Vec<f64>) -> Vec<f64> {
        let mut out = Vector2::zeros();
        for j in 0..self.k {
            let uj = Vector2::new(u[self.k + 2 * j], u[self.k + 2 * j + 1]);
            out += u[j] * (self.rotations[j] * uj);
        }
        vec![out.x, out.y]
    }

    fn act_state(&self, m: &usize, x: &Vector2<f64>) -> Vector2<f64> {
        self.rotation(*m) * x
    }

    fn act_input(&self, m: &usize, u: &Vec<f64>) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; 3 * k];
        for j in 0..k {
            let to = (j + m) % k;
            out[to] = u[j];
            out[k + 2 * to] = u[k + 2 * j];
            out[k + 2 * to + 1] = u[k + 2 * j + 1];
        }
        out
    }

    fn push_tangent(&self, m: &usize, _: &Vector2<f64>, v: &[f64]) -> Vec<f64> {
        let w = self.rotation(*m) * Vector2::new(v[0], v[1]);
        vec![w.x, w.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub k: usize,
    pub equivariance: Check,
    /// Largest state gap between the original and the one-hot extended
    /// system over the trajectory.
    pub trajectory_deviation: f64,
    pub steps: usize,
    pub pass: bool,
}

/// Audits the `K`-fold extension and replays a random input sequence
/// through `ẋ = u` and through the extension with one-hot inputs, both with
/// explicit Euler steps of `dt`.
pub fn pushforward_demo(k: usize, n: usize, steps: usize, dt: f64, tol: f64, seed: u64) -> PushforwardReport {
    let sys = CyclicExtension::new(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let equivariance = audit_dynamics(
        &sys,
        |r: &mut ChaCha8Rng| r.gen_range(0..k),
        |r: &mut ChaCha8Rng| {
            let x = Vector2::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            let u = (0..3 * k).map(|_| r.gen_range(-1.0..1.0)).collect();
            (x, u)
        },
        n,
        tol,
        &mut rng,
    );
    let mut x = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut y = x;
    let mut deviation: f64 = 0.0;
    for _ in 0..steps {
        let u = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        x += u * dt;
        let f = sys.field(&y, &sys.one_hot(&u));
        y += Vector2::new(f[0], f[1]) * dt;
        deviation = deviation.max((x - y).abs().max());
    }
    let pass = equivariance.pass && deviation == 0.0;
    PushforwardReport {
        k,
        equivariance,
        trajectory_deviation: deviation,
        steps,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_spec_round_trips_through_strings() {
        for g in GroupSpec::ALL {
            assert_eq!(g.to_string().parse::<GroupSpec>().unwrap(), g);
        }
        assert!("se4".parse::<GroupSpec>().is_err());
    }

    #[test]
    fn x_coordinate_reward_fails_under_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut last_t = 0.0f64;
        let check = audit_reward(
            |x: &Vector3<f64>, _: &()| x.x,
            |g: &GroupElement, x: &Vector3<f64>| g.act_point(x),
            |_: &GroupElement, u: &()| *u,
            |r: &mut ChaCha8Rng| {
                let g = GroupSpec::Trans.sample(r);
                last_t = last_t.max(g.translation().x.abs());
                g
            },
            |_: &mut ChaCha8Rng| (Vector3::new(1.0, 2.0, 3.0), ()),
            50,
            1e-9,
            &mut rng,
        );
        assert!(!check.pass);
        assert!((check.residual - last_t).abs() < 1e-12);
    }

    #[test]
    fn identity_sampler_has_zero_residual() {
        let r = audit_swarm_reward(GroupSpec::Identity, 4, 20, 1e-9, 1);
        assert_eq!(r.checks[0].residual, 0.0);
        let d = audit_quadrotor(QuadParams::default(), GroupSpec::Identity, 20, 1e-9, 1);
        assert_eq!(d.checks[0].residual, 0.0);
    }

    #[test]
    fn integrator_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = audit_dynamics(
            &Integrator3,
            |r: &mut ChaCha8Rng| GroupSpec::So3.sample(r),
            |r: &mut ChaCha8Rng| (Vector3::from_fn(|_, _| r.gen::<f64>()), Vector3::from_fn(|_, _| r.gen::<f64>())),
            100,
            1e-12,
            &mut rng,
        );
        assert!(c.pass, "{}", c.residual);
    }

    #[test]
    fn residual_grows_with_nested_samples() {
        let a = audit_quadrotor(QuadParams::default(), GroupSpec::Se3, 10, 1e-9, 5);
        let b = audit_quadrotor(QuadParams::default(), GroupSpec::Se3, 40, 1e-9, 5);
        assert!(b.checks[0].residual >= a.checks[0].residual);
    }

    #[test]
    fn trivial_extension_is_the_original() {
        let r = pushforward_demo(1, 20, 100, 0.01, 1e-12, 0);
        assert!(r.pass);
        assert_eq!(r.equivariance.residual, 0.0);
    }

    fn tiny_policy(equivariant: bool) -> Policy {
        let cfg = crate::policy::GraphormerConfig {
            layers: 2,
            scalars: 6,
            vectors: 5,
            key_dim: 6,
            ff_hidden: 12,
            trunk: [16, 8, 16, 16],
            out_scalars: 7,
            head_hidden: 10,
            critic_hidden: 10,
            equivariant,
            ..Default::default()
        };
        Policy::new(cfg, 3).unwrap()
    }

    #[test]
    fn policy_trunk_is_equivariant() {
        let r = audit_policy(&tiny_policy(true), GroupSpec::Se3, 6, 30, 1e-9, 4).unwrap();
        assert!(r.pass, "{}", r.table());
    }

    #[test]
    fn ablated_policy_breaks_equivariance() {
        let r = audit_policy(&tiny_policy(false), GroupSpec::Se3, 6, 30, 1e-5, 4).unwrap();
        assert!(!r.pass, "{}", r.table());
    }

    #[test]
    fn quadrotor_quarter_turn_residual_is_tilted_gravity() {
        let r = audit_quadrotor(QuadParams::default(), GroupSpec::Rx90, 10, 1e-6, 0);
        let expect = crate::quad::GRAVITY * 2f64.sqrt();
        assert!((r.checks[0].residual - expect).abs() < 1e-9, "{}", r.table());
    }

    #[test]
    fn report_table_lists_checks() {
        let r = audit_swarm_reward(GroupSpec::Se3, 3, 5, 1e-9, 0);
        let t = r.table();
        assert!(t.contains("reward-invariance"));
    }
}
