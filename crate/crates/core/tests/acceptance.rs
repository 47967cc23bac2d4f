//! Acceptance suite. Each test writes one `criterion N: PASS|FAIL ...` line
//! straight to stderr, so the verdicts show even with captured output.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use equiswarm::audit::{audit_quadrotor, policy_residual, pushforward_demo, random_local_graph, GroupSpec};
use equiswarm::config::RunConfig;
use equiswarm::group::{act_on_state, canonicalize, ortho_error, Action, GroupElement, StateAction, TensorialFeature};
use equiswarm::nn::{AdamState, ParamStore, ParamVars, Tape, Tensor};
use equiswarm::par;
use equiswarm::policy::{GraphormerConfig, Policy};
use equiswarm::ppo::{
    evaluate_policy, gae, gaussian_log_prob, ppo_update, surrogate_loss, ActorCritic, Heads, Result as PpoResult, RolloutBuffer,
    TrainConfig, Trainer,
};
use equiswarm::quad::{step, QuadParams, QuadState, GRAVITY};
use equiswarm::swarm::{reward_terms, summarize, LocalGraph, RewardConfig};

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n:>2}: {}  {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn random_rotation(rng: &mut ChaCha8Rng) -> GroupElement {
    GroupSpec::Se3.sample(rng)
}

// Criterion 1 ---------------------------------------------------------------

/// An arbitrary, deliberately non-equivariant map from a state to a feature:
/// scalars and vectors built from raw coordinates with fixed random weights
/// and a constant vector offset.
struct Body {
    w: Vec<f64>,
}

impl Body {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        Self {
            w: (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    fn apply(&self, s: &QuadState) -> TensorialFeature {
        let mut flat: Vec<f64> = s.position.iter().chain(s.velocity.iter()).chain(s.target.iter()).copied().collect();
        flat.extend(s.rotation.iter());
        let w = &self.w;
        let dot = |off: usize| flat.iter().enumerate().map(|(k, x)| w[(off + k) % 64] * x).sum::<f64>();
        let scalars = vec![dot(0).tanh(), (dot(7) * 0.3).sin(), dot(13) * dot(21)];
        let v1 = s.velocity * dot(29).tanh() + Vector3::new(w[1], w[2], w[3]);
        let v2 = s.rotation.column(0) * w[4] + (s.target - s.position).cross(&s.velocity) * w[5];
        let p = s.position + s.target * w[6] + Vector3::new(w[7], w[8], w[9]);
        TensorialFeature::new(scalars, vec![v1, v2, p], GroupElement::identity()).with_positional(vec![false, false, true])
    }
}

struct Feature;

impl Action<TensorialFeature> for Feature {
    fn act(&self, g: &GroupElement, x: &TensorialFeature) -> TensorialFeature {
        equiswarm::group::act_on_feature(g, x)
    }
}

fn feature_flat(f: &TensorialFeature) -> Vec<f64> {
    let mut out = f.scalars.clone();
    for v in &f.vectors {
        out.extend(v.iter());
    }
    out.extend(f.frame.to_array());
    out
}

fn vec_rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(1e-12)
}

#[test]
fn criterion_01_canonicalization() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let body = Body::new(&mut rng);
        let f = canonicalize(|s: &QuadState| body.apply(s), StateAction, Feature);
        let g = random_rotation(&mut rng);
        let q = random_rotation(&mut rng);
        let x = equiswarm::audit::random_states(&mut rng, 1)[0];
        let lhs = f(&q.compose(&g), &act_on_state(&q, &x));
        let rhs = Feature.act(&q, &f(&g, &x));
        worst = worst.max(vec_rel(&feature_flat(&lhs), &feature_flat(&rhs)));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-5 && secs < 10.0;
    report(1, pass, format!("max relative residual {worst:.2e} over 100 samples, {secs:.2}s"));
    assert!(pass);
}

// Criterion 2 ---------------------------------------------------------------

#[test]
fn criterion_02_policy_equivariance() {
    let start = Instant::now();
    let eq = Policy::new(GraphormerConfig::default(), 11).unwrap();
    let ablation = Policy::new(
        GraphormerConfig {
            equivariant: false,
            ..Default::default()
        },
        11,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut broken = 0;
    for _ in 0..100 {
        let nodes = rng.gen_range(1..=8);
        let graph = random_local_graph(&mut rng, nodes);
        let g = GroupSpec::Se3.sample(&mut rng);
        worst = worst.max(policy_residual(&eq, &graph, &g).unwrap());
        if policy_residual(&ablation, &graph, &g).unwrap() > 1e-2 {
            broken += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-5 && broken >= 95 && secs < 60.0;
    report(
        2,
        pass,
        format!("equivariant max relative residual {worst:.2e}; ablation violates > 1e-2 on {broken}/100; {secs:.1}s"),
    );
    assert!(pass);
}

// Criterion 3 ---------------------------------------------------------------

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn criterion_03_permutation_invariance() {
    let policy = Policy::new(GraphormerConfig::default(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let graph = random_local_graph(&mut rng, 4);
    let base = policy.evaluate(&[&graph]).unwrap();
    let perms = permutations(4);
    let mut worst: f64 = 0.0;
    for p in &perms {
        let e = policy.evaluate(&[&graph.permuted(p)]).unwrap();
        for (a, b) in e.pooled[0].iter().zip(&base.pooled[0]) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in e.mean[0].iter().zip(&base.mean[0]) {
            worst = worst.max((a - b).abs());
        }
    }
    let pass = perms.len() == 24 && worst <= 1e-12;
    report(3, pass, format!("{} permutations, max abs difference {worst:.2e}", perms.len()));
    assert!(pass);
}

// Criterion 4 ---------------------------------------------------------------

fn loss_buffer(policy: &Policy, rng: &mut ChaCha8Rng) -> (RolloutBuffer<LocalGraph>, Vec<f64>) {
    let graphs: Vec<LocalGraph> = (0..6).map(|k| random_local_graph(rng, 1 + k % 4)).collect();
    let refs: Vec<&LocalGraph> = graphs.iter().collect();
    let (means, ls, values) = policy.act(&refs).unwrap();
    let mut buf = RolloutBuffer::new(graphs.len(), 1);
    for (k, g) in graphs.into_iter().enumerate() {
        let a: Vec<f64> = means[k].iter().zip(&ls).map(|(m, l)| m + l.exp() * { let z: f64 = StandardNormal.sample(rng); z }).collect();
        // Old log-probabilities shifted so ratios spread across the clip range.
        let lp = gaussian_log_prob(&a, &means[k], &ls) + rng.gen_range(-0.5..0.5);
        buf.push(g, a, lp, rng.gen_range(-1.0..1.0), values[k], false);
    }
    buf.last_values = vec![0.0; buf.sequences];
    buf.compute_advantages(0.99, 0.95).unwrap();
    buf.returns = buf.returns.iter().map(|r| r + rng.gen_range(-1.0..1.0)).collect();
    let adv = buf.advantages.iter().map(|a| a + rng.gen_range(-1.0..1.0)).collect();
    (buf, adv)
}

#[test]
fn criterion_04_gradient_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut policy = Policy::new(
        GraphormerConfig {
            log_std_init: -0.3,
            mean_gain: 1.0,
            ..Default::default()
        },
        4,
    )
    .unwrap();
    let (buf, adv) = loss_buffer(&policy, &mut rng);
    let cfg = TrainConfig::default();
    let idx: Vec<usize> = (0..buf.len()).collect();
    let analytic = surrogate_loss(&policy, &buf, &adv, &idx, idx.len(), &cfg).unwrap();

    let sizes: Vec<usize> = policy.params.tensors().iter().map(Tensor::len).collect();
    let total: usize = sizes.iter().sum();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..32 {
        let mut flat = rng.gen_range(0..total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        let base = policy.params.tensors()[t].data()[flat];
        let mut eval = |v: f64| {
            policy.params.tensors_mut()[t].data_mut()[flat] = v;
            surrogate_loss(&policy, &buf, &adv, &idx, idx.len(), &cfg).unwrap().loss
        };
        let fd = (eval(base + h) - eval(base - h)) / (2.0 * h);
        policy.params.tensors_mut()[t].data_mut()[flat] = base;
        let an = analytic.grads[t].data()[flat];
        // Relative to the gradient scale so near-zero entries do not
        // dominate through cancellation noise.
        let err = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-4 && secs < 120.0;
    report(4, pass, format!("32 parameters, max relative error {worst:.2e}, {secs:.1}s"));
    assert!(pass);
}

// Criterion 5 ---------------------------------------------------------------

#[test]
fn criterion_05_dynamics_symmetry_audit() {
    let p = QuadParams::default();
    let trans = audit_quadrotor(p.clone(), GroupSpec::Trans, 100, 1e-9, 5).checks[0].residual;
    let z = audit_quadrotor(p.clone(), GroupSpec::Se2z, 100, 1e-9, 5).checks[0].residual;
    let x = audit_quadrotor(p, GroupSpec::Rx90, 100, 1e-9, 5).checks[0].residual;
    let expect = 9.81 * 2f64.sqrt();
    let pass = trans <= 1e-9 && z <= 1e-9 && (x - expect).abs() <= 1e-6;
    report(
        5,
        pass,
        format!("translations {trans:.2e}, z-rotations {z:.2e}, 90 deg about x {x:.9} (expected {expect:.9})"),
    );
    assert!(pass);
}

// Criterion 6 ---------------------------------------------------------------

#[test]
fn criterion_06_dynamics_oracles() {
    let p = QuadParams::default();
    let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 10.0), Vector3::zeros());
    for _ in 0..10 {
        s = step(&s, &[0.0; 4], &p).unwrap();
    }
    let fall_err = ((s.position.z - 10.0) - (-0.5 * GRAVITY * 0.1 * 0.1)).abs();

    let mut s = QuadState::at_rest(Vector3::new(0.3, -0.2, 1.0), Vector3::zeros());
    let hover = p.hover_action();
    for _ in 0..100 {
        s = step(&s, &hover, &p).unwrap();
    }
    let drift = (s.position - Vector3::new(0.3, -0.2, 1.0)).norm();

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros());
    let mut ortho: f64 = 0.0;
    for _ in 0..10_000 {
        let a = [(); 4].map(|_| rng.gen_range(0.0..=1.0));
        s = step(&s, &a, &p).unwrap();
        ortho = ortho.max(ortho_error(&s.rotation));
    }
    let pass = fall_err <= 1e-4 && drift < 1e-6 && ortho <= 1e-8;
    report(
        6,
        pass,
        format!("free-fall error {fall_err:.2e} m, hover drift {drift:.2e} m, max |RtR - I|_F {ortho:.2e}"),
    );
    assert!(pass);
}

// Criterion 7 ---------------------------------------------------------------

#[test]
fn criterion_07_reward_examples() {
    let c = RewardConfig::default().coeffs(0.01);
    let at = |x: Vector3<f64>, t: Vector3<f64>| QuadState::at_rest(x, t);
    let o = Vector3::zeros();

    let r1 = reward_terms(&at(o, o), &[], &[0.0; 4], &c, false).total;
    let r2 = reward_terms(&at(o, Vector3::new(2.0, 0.0, 0.0)), &[], &[0.0; 4], &c, false).position;
    let r3 = reward_terms(&at(o, o), &[Vector3::new(0.6, 0.0, 0.0)], &[0.0; 4], &c, false).collision;
    let r4 = reward_terms(&at(o, o), &[Vector3::new(0.0, 0.3, 0.0)], &[0.0; 4], &c, false).collision;
    let errs = [r1.abs(), (r2 - (-0.01)).abs(), r3.abs(), (r4 - (-0.025)).abs()];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let pass = worst <= 1e-12;
    report(7, pass, format!("four worked examples, max error {worst:.2e} (got {r1}, {r2}, {r3}, {r4})"));
    assert!(pass);
}

// Criterion 8 ---------------------------------------------------------------

#[test]
fn criterion_08_pushforward() {
    let r = pushforward_demo(4, 100, 100, 0.01, 1e-12, 8);
    let pass = r.equivariance.pass && r.trajectory_deviation == 0.0 && r.steps == 100;
    report(
        8,
        pass,
        format!(
            "C4 extension residual {:.2e}, one-hot trajectory deviation {:e} over {} steps",
            r.equivariance.residual, r.trajectory_deviation, r.steps
        ),
    );
    assert!(pass);
}

// Criterion 9 ---------------------------------------------------------------

struct Bandit {
    params: ParamStore,
}

impl ActorCritic for Bandit {
    type Obs = ();

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn forward(&self, tape: &mut Tape, pv: &ParamVars, obs: &[&()]) -> PpoResult<Heads> {
        let ones = tape.leaf(obs.len(), 1, vec![1.0; obs.len()])?;
        let v = pv.vars();
        Ok(Heads {
            mean: tape.matmul(ones, v[0])?,
            log_std: v[1],
            value: tape.matmul(ones, v[2])?,
        })
    }
}

/// Best constant action for `−|a − 0.3|` by brute force over a grid.
fn brute_force_optimum() -> f64 {
    let samples: Vec<f64> = (0..2001).map(|k| -1.0 + k as f64 * 0.001).collect();
    let value = |a: f64| -(a - 0.3f64).abs();
    samples.into_iter().fold(f64::NAN, |best, a| if best.is_nan() || value(a) > value(best) { a } else { best })
}

#[test]
fn criterion_09_ppo_sanity() {
    let optimum = brute_force_optimum();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut params = ParamStore::new();
    params.add("mean", Tensor::full(&[1, 1], -0.5));
    params.add("log_std", Tensor::full(&[1, 1], 0.3f64.ln()));
    params.add("value", Tensor::full(&[1, 1], 0.0));
    let mut model = Bandit { params };
    let mut adam = AdamState::new(&model.params);
    let cfg = TrainConfig {
        lr: 0.005,
        batch_size: 256,
        grad_chunk: 64,
        entropy_coef: 0.0,
        ..Default::default()
    };
    for _ in 0..200 {
        let (m, ls, v) = model.act(&[&()]).unwrap();
        let mut buf = RolloutBuffer::new(256, 1);
        for _ in 0..256 {
            let a = m[0][0] + ls[0].exp() * { let z: f64 = StandardNormal.sample(&mut rng); z };
            buf.push((), vec![a], gaussian_log_prob(&[a], &m[0], &ls), -(a - 0.3).abs(), v[0], true);
        }
        buf.last_values = vec![0.0; 256];
        buf.compute_advantages(cfg.gamma, cfg.gae_lambda).unwrap();
        ppo_update(&mut model, &mut adam, &buf, &cfg, &mut rng).unwrap();
    }
    let mean = model.params.tensors()[0].data()[0];
    let (a, _) = gae(&[1.0; 3], &[0.0; 4], &[false; 3], 0.99, 1.0).unwrap();
    let pass = (mean - optimum).abs() <= 0.05 && (a[0] - 2.9701).abs() <= 1e-12;
    report(
        9,
        pass,
        format!("bandit mean {mean:.4} after 200 updates (optimum {optimum:.3}); GAE A0 = {:.12}", a[0]),
    );
    assert!(pass);
}

// Criteria 10 and 11 --------------------------------------------------------

fn smoke_config() -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")).unwrap()
}

#[derive(Debug, Clone)]
struct SmokeRun {
    seed: u64,
    equivariant: bool,
    first_reward: f64,
    final_reward: f64,
    eval_distance: f64,
    seconds: f64,
}

fn smoke_run(seed: u64, equivariant: bool) -> SmokeRun {
    let mut cfg = smoke_config();
    cfg.train.seed = seed;
    cfg.policy.equivariant = equivariant;
    let start = Instant::now();
    let mut trainer = Trainer::new(cfg.clone()).unwrap();
    let summary = trainer.run(None, &AtomicBool::new(false)).unwrap();
    let episodes = evaluate_policy(&trainer.policy, cfg.env, cfg.quad.clone(), cfg.scenario, 10, 10_000 + seed).unwrap();
    let m = summarize(&episodes, cfg.env.success_radius).unwrap();
    SmokeRun {
        seed,
        equivariant,
        first_reward: summary.first_reward.unwrap(),
        final_reward: summary.final_reward.unwrap(),
        eval_distance: m.mean_final_distance,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Five seeds in both policy modes, shared by criteria 10 and 11.
fn smoke_runs() -> &'static [SmokeRun] {
    static RUNS: OnceLock<Vec<SmokeRun>> = OnceLock::new();
    RUNS.get_or_init(|| par::map_range(10, |k| smoke_run((k / 2) as u64, k % 2 == 0)))
}

#[test]
fn criterion_10_training_smoke() {
    let r = smoke_runs().iter().find(|r| r.seed == 0 && r.equivariant).unwrap();
    let improved = r.final_reward > r.first_reward;
    let close = r.eval_distance < 1.0;
    let pass = improved && close;
    report(
        10,
        pass,
        format!(
            "reward {:.3} at update 1 -> {:.3} over the last 10 updates; final distance {:.3} m over 10 evaluation episodes; {:.0}s",
            r.first_reward, r.final_reward, r.eval_distance, r.seconds
        ),
    );
    assert!(improved, "mean episode reward did not improve");
    assert!(close, "final mean distance {:.3} m is not below 1.0 m", r.eval_distance);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

#[test]
fn criterion_11_equivariant_vs_ablation() {
    let runs = smoke_runs();
    let pick = |eq: bool| runs.iter().filter(|r| r.equivariant == eq).map(|r| r.final_reward).collect::<Vec<_>>();
    let (eq, ab) = (pick(true), pick(false));
    let (me, ma) = (median(eq.clone()), median(ab.clone()));
    let pass = me >= ma;
    report(
        11,
        pass,
        format!("median final reward equivariant {me:.3} vs ablation {ma:.3} (equivariant {eq:.2?}, ablation {ab:.2?})"),
    );
    assert!(pass);
}
