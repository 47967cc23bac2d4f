use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[−w/2, w/2] × [−d/2, d/2] × [0, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Default for Room {
    fn default() -> Self {
        Self::cube(10.0)
    }
}

impl Room {
    pub fn cube(side: f64) -> Self {
        Self {
            width: side,
            depth: side,
            height: side,
        }
    }

    pub fn lower(&self) -> Vector3<f64> {
        Vector3::new(-self.width / 2.0, -self.depth / 2.0, 0.0)
    }

    pub fn upper(&self) -> Vector3<f64> {
        Vector3::new(self.width / 2.0, self.depth / 2.0, self.height)
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.height / 2.0)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i])
    }

    /// Clamps `p` to the box shrunk by `margin` on every side.
    pub fn clamp(&self, p: &Vector3<f64>, margin: f64) -> Vector3<f64> {
        let (lo, hi) = (self.lower(), self.upper());
        Vector3::from_fn(|i, _| {
            let (a, b) = (lo[i] + margin, hi[i] - margin);
            if a > b {
                (lo[i] + hi[i]) / 2.0
            } else {
                p[i].clamp(a, b)
            }
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if [self.width, self.depth, self.height].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(format!("room dimensions must be positive, got {self:?}"))
        }
    }
}
