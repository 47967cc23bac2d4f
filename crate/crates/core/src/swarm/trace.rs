use std::io::Write;

use super::reward::{ContactFlags, RewardBreakdown};
use crate::quad::QuadState;

/// One `(step, agent)` row of an exported episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub agent: usize,
    pub state: QuadState,
    pub u: [f64; 4],
    pub reward: RewardBreakdown,
    pub contacts: ContactFlags,
}

pub fn trace_header() -> Vec<String> {
    let mut h = vec!["t".to_string(), "agent".to_string()];
    let xyz = |p: &str| ["x", "y", "z"].map(|c| format!("{p}_{c}"));
    h.extend(xyz("pos"));
    h.extend(xyz("vel"));
    for r in 0..3 {
        for c in 0..3 {
            h.push(format!("r{r}{c}"));
        }
    }
    h.extend(xyz("omega"));
    h.extend(xyz("target"));
    h.extend((0..4).map(|k| format!("u{k}")));
    h.extend(["r_position", "r_collision", "r_stability", "r_total"].map(String::from));
    h.extend(["agent_contact", "wall_contact"].map(String::from));
    h
}

impl TraceRow {
    pub fn fields(&self) -> Vec<String> {
        let s = &self.state;
        let mut f = vec![self.t.to_string(), self.agent.to_string()];
        f.extend(s.position.iter().map(f64::to_string));
        f.extend(s.velocity.iter().map(f64::to_string));
        for r in 0..3 {
            for c in 0..3 {
                f.push(s.rotation[(r, c)].to_string());
            }
        }
        f.extend(s.omega.iter().map(f64::to_string));
        f.extend(s.target.iter().map(f64::to_string));
        f.extend(self.u.iter().map(f64::to_string));
        let r = &self.reward;
        f.extend([r.position, r.collision, r.stability, r.total].map(|v| v.to_string()));
        f.push((self.contacts.agent as u8).to_string());
        f.push((self.contacts.wall as u8).to_string());
        f
    }
}

/// Writes `rows` as CSV with a header line.
pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trace_header())?;
    for row in rows {
        out.write_record(row.fields())?;
    }
    out.flush()?;
    Ok(())
}
