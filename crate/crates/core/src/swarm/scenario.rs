use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::room::Room;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    StaticSameGoal,
    StaticDifferentGoals,
    DynamicSame,
    DynamicDifferent,
    SwapGoals,
    SwarmVsSwarm,
    PursuitLissajous,
    PursuitBezier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formation {
    Circle,
    Grid,
    Sphere,
    Cylinder,
    Cube,
    Point,
}

/// `x = A sin(a t + δ)`, `y = B sin(b t)`, `z = C sin(c t) + z₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LissajousCurve {
    pub amplitude: [f64; 3],
    pub frequency: [f64; 3],
    pub phase: f64,
    pub z0: f64,
}

impl Default for LissajousCurve {
    fn default() -> Self {
        Self {
            amplitude: [1.5, 1.5, 0.5],
            frequency: [0.8, 1.6, 0.8],
            phase: PI / 2.0,
            z0: 0.0,
        }
    }
}

impl LissajousCurve {
    pub fn eval(&self, t: f64) -> Vector3<f64> {
        let [a_x, a_y, a_z] = self.amplitude;
        let [f_x, f_y, f_z] = self.frequency;
        Vector3::new(
            a_x * (f_x * t + self.phase).sin(),
            a_y * (f_y * t).sin(),
            a_z * (f_z * t).sin() + self.z0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub formation: Formation,
    /// Seconds between target regenerations (or swaps, or Bezier segments).
    pub period: f64,
    /// Nearest-neighbor spacing of formation points (m).
    pub spacing: f64,
    /// Minimum distance kept between targets and the walls (m).
    pub margin: f64,
    /// Offset from the room center for pursuit curves.
    pub lissajous: LissajousCurve,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::StaticDifferentGoals,
            formation: Formation::Circle,
            period: 5.0,
            spacing: 0.8,
            margin: 0.5,
            lissajous: LissajousCurve::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(format!("scenario.period must be positive, got {}", self.period));
        }
        if !(self.spacing >= 0.0 && self.margin >= 0.0) {
            return Err("scenario.spacing and scenario.margin must be non-negative".into());
        }
        Ok(())
    }
}

/// Target generator: a pure function of the seed and time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub room: Room,
    pub agents: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, room: Room, agents: usize, seed: u64) -> Self {
        Self { config, room, agents, seed }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn epoch(&self, t: f64) -> u64 {
        (t / self.config.period).floor().max(0.0) as u64
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let m = self.config.margin;
        let (lo, hi) = (self.room.lower(), self.room.upper());
        Vector3::from_fn(|i, _| {
            let (a, b) = (lo[i] + m, hi[i] - m);
            if a >= b {
                (lo[i] + hi[i]) / 2.0
            } else {
                rng.gen_range(a..b)
            }
        })
    }

    fn center(&self, epoch: u64) -> Vector3<f64> {
        self.random_point(&mut self.rng(epoch))
    }

    /// Bezier waypoint `k` (may be negative for the leading tangent).
    fn waypoint(&self, k: i64) -> Vector3<f64> {
        self.random_point(&mut self.rng((1u64 << 40) ^ (k as u64)))
    }

    fn bezier(&self, t: f64) -> Vector3<f64> {
        let s = t / self.config.period;
        let k = s.floor() as i64;
        let u = s - k as f64;
        let w = |i: i64| self.waypoint(i);
        let (p0, p3) = (w(k), w(k + 1));
        let p1 = p0 + (p3 - w(k - 1)) / 6.0;
        let p2 = p3 - (w(k + 2) - p0) / 6.0;
        let v = 1.0 - u;
        p0 * (v * v * v) + p1 * (3.0 * v * v * u) + p2 * (3.0 * v * u * u) + p3 * (u * u * u)
    }

    fn offsets(&self, n: usize) -> Vec<Vector3<f64>> {
        formation_offsets(self.config.formation, n, self.config.spacing)
    }

    /// Targets of every agent at time `t`, clamped into the room.
    pub fn targets(&self, t: f64) -> Vec<Vector3<f64>> {
        let n = self.agents;
        let raw: Vec<Vector3<f64>> = match self.config.kind {
            ScenarioKind::StaticSameGoal => vec![self.center(0); n],
            ScenarioKind::StaticDifferentGoals => {
                let c = self.center(0);
                self.offsets(n).into_iter().map(|o| c + o).collect()
            }
            ScenarioKind::DynamicSame => vec![self.center(self.epoch(t)); n],
            ScenarioKind::DynamicDifferent => {
                let c = self.center(self.epoch(t));
                self.offsets(n).into_iter().map(|o| c + o).collect()
            }
            ScenarioKind::SwapGoals => {
                let c = self.center(0);
                let slots: Vec<_> = self.offsets(n).into_iter().map(|o| c + o).collect();
                let shift = (self.epoch(t) % n.max(1) as u64) as usize;
                (0..n).map(|i| slots[(i + shift) % n]).collect()
            }
            ScenarioKind::SwarmVsSwarm => {
                let first = n.div_ceil(2);
                let (mut ca, mut cb) = (self.center(0), self.center(1));
                if self.epoch(t) % 2 == 1 {
                    std::mem::swap(&mut ca, &mut cb);
                }
                let oa = self.offsets(first);
                let ob = self.offsets(n - first);
                oa.into_iter().map(|o| ca + o).chain(ob.into_iter().map(|o| cb + o)).collect()
            }
            ScenarioKind::PursuitLissajous => {
                let c = self.room.center() + self.config.lissajous.eval(t);
                self.offsets(n).into_iter().map(|o| c + o).collect()
            }
            ScenarioKind::PursuitBezier => {
                let c = self.bezier(t);
                self.offsets(n).into_iter().map(|o| c + o).collect()
            }
        };
        raw.iter().map(|p| self.room.clamp(p, self.config.margin)).collect()
    }
}

/// Formation points centered on the origin with roughly `spacing` between
/// neighbors.
pub fn formation_offsets(formation: Formation, n: usize, spacing: f64) -> Vec<Vector3<f64>> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Vector3::zeros()];
    }
    let ring = |count: usize, z: f64| -> Vec<Vector3<f64>> {
        let r = if count > 1 { spacing / (2.0 * (PI / count as f64).sin()) } else { 0.0 };
        (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                Vector3::new(r * a.cos(), r * a.sin(), z)
            })
            .collect()
    };
    let mut pts = match formation {
        Formation::Point => vec![Vector3::zeros(); n],
        Formation::Circle => ring(n, 0.0),
        Formation::Grid => {
            let side = (n as f64).sqrt().ceil() as usize;
            (0..n)
                .map(|k| Vector3::new((k % side) as f64 * spacing, (k / side) as f64 * spacing, 0.0))
                .collect()
        }
        Formation::Cube => {
            let side = (n as f64).cbrt().ceil() as usize;
            (0..n)
                .map(|k| {
                    Vector3::new(
                        (k % side) as f64 * spacing,
                        ((k / side) % side) as f64 * spacing,
                        (k / (side * side)) as f64 * spacing,
                    )
                })
                .collect()
        }
        Formation::Cylinder => {
            let layers = n.div_ceil(4).clamp(1, 3);
            let per = n.div_ceil(layers);
            let mut out = Vec::with_capacity(n);
            for l in 0..layers {
                let count = per.min(n - out.len());
                out.extend(ring(count, l as f64 * spacing));
            }
            out
        }
        Formation::Sphere => {
            // Fibonacci lattice; radius chosen so neighboring points sit
            // about `spacing` apart.
            let r = spacing * (n as f64 / (4.0 * PI)).sqrt().max(0.5);
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    Vector3::new(r * rho * a.cos(), r * rho * a.sin(), r * z)
                })
                .collect()
        }
    };
    let mean = pts.iter().sum::<Vector3<f64>>() / n as f64;
    pts.iter_mut().for_each(|p| *p -= mean);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(kind: ScenarioKind, n: usize) -> Scenario {
        let cfg = ScenarioConfig { kind, ..Default::default() };
        Scenario::new(cfg, Room::default(), n, 11)
    }

    #[test]
    fn static_targets_do_not_move() {
        let s = scenario(ScenarioKind::StaticSameGoal, 4);
        assert_eq!(s.targets(0.0), s.targets(10.0));
        let d = scenario(ScenarioKind::StaticDifferentGoals, 4);
        assert_eq!(d.targets(0.0), d.targets(10.0));
    }

    #[test]
    fn dynamic_targets_regenerate_per_period() {
        let s = scenario(ScenarioKind::DynamicDifferent, 3);
        assert_eq!(s.targets(0.1), s.targets(4.9));
        assert_ne!(s.targets(0.1), s.targets(5.1));
    }

    #[test]
    fn swap_goals_permutes_assignment() {
        let s = scenario(ScenarioKind::SwapGoals, 4);
        let (a, b) = (s.targets(1.0), s.targets(6.0));
        assert_ne!(a, b);
        for p in &a {
            assert!(b.contains(p));
        }
    }

    #[test]
    fn swarm_vs_swarm_exchanges_groups() {
        let s = scenario(ScenarioKind::SwarmVsSwarm, 4);
        let (a, b) = (s.targets(1.0), s.targets(6.0));
        let ca = (a[0] + a[1]) / 2.0;
        let cb = (b[2] + b[3]) / 2.0;
        assert!((ca - cb).norm() < 1e-12);
    }

    #[test]
    fn lissajous_tilted_circle_start() {
        let c = LissajousCurve {
            amplitude: [1.0, 1.0, 1.0],
            frequency: [1.0, 1.0, 1.0],
            phase: PI / 2.0,
            z0: 2.0,
        };
        assert!((c.eval(0.0) - Vector3::new(1.0, 0.0, 2.0)).norm() < 1e-15);
        for k in 0..20 {
            let p = c.eval(0.3 * k as f64);
            // Points satisfy x² + y² = 1 and lie in the plane z − z₀ = y.
            assert!((p.x * p.x + p.y * p.y - 1.0).abs() < 1e-12);
            assert!((p.z - 2.0 - p.y).abs() < 1e-12);
        }
    }

    #[test]
    fn bezier_is_continuous_across_segments() {
        let s = scenario(ScenarioKind::PursuitBezier, 1);
        let eps = 1e-7;
        for k in 1..4 {
            let t = 5.0 * k as f64;
            assert!((s.targets(t - eps)[0] - s.targets(t + eps)[0]).norm() < 1e-5);
        }
    }

    #[test]
    fn targets_stay_in_room() {
        let room = Room::cube(2.0);
        for kind in [ScenarioKind::PursuitLissajous, ScenarioKind::StaticDifferentGoals, ScenarioKind::PursuitBezier] {
            let cfg = ScenarioConfig { kind, formation: Formation::Sphere, spacing: 3.0, ..Default::default() };
            let s = Scenario::new(cfg, room, 8, 5);
            for k in 0..50 {
                assert!(s.targets(k as f64 * 0.37).iter().all(|p| room.contains(p)));
            }
        }
    }

    #[test]
    fn formations_are_centered_with_spacing() {
        for f in [Formation::Circle, Formation::Grid, Formation::Cube, Formation::Cylinder, Formation::Sphere] {
            let pts = formation_offsets(f, 8, 1.0);
            assert_eq!(pts.len(), 8);
            assert!(pts.iter().sum::<Vector3<f64>>().norm() < 1e-12);
            let min = (0..8)
                .flat_map(|a| (a + 1..8).map(move |b| (a, b)))
                .map(|(a, b)| (pts[a] - pts[b]).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.5, "{f:?}: {min}");
        }
    }
}
