//! Trajectory and log files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back reproduces the values bit for bit.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::optimize::IterationRecord;

/// `t,robot_id,x1..xn,u1..um`; the final state of each robot has empty controls.
pub fn trajectory_csv(trajs: &[Trajectory]) -> String {
    let Some(first) = trajs.first() else {
        return String::new();
    };
    let (n, m) = (first.state_dim, first.control_dim);
    let mut s = String::from("t,robot_id");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    for i in 1..=m {
        let _ = write!(s, ",u{i}");
    }
    s.push('\n');
    for (r, tr) in trajs.iter().enumerate() {
        for t in 0..=tr.steps() {
            let _ = write!(s, "{},{r}", t as f64 * tr.dt);
            for v in tr.state(t) {
                let _ = write!(s, ",{v}");
            }
            for i in 0..m {
                if t < tr.steps() {
                    let _ = write!(s, ",{}", tr.control(t)[i]);
                } else {
                    s.push(',');
                }
            }
            s.push('\n');
        }
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a file written by [`trajectory_csv`]. Robots must appear in order
/// with consecutive rows.
pub fn read_trajectory_csv(text: &str) -> Result<Vec<Trajectory>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty trajectory file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "robot_id" {
        return Err(parse_err(1, "header must start with t,robot_id"));
    }
    let n = cols.iter().filter(|c| c.starts_with('x')).count();
    let m = cols.iter().filter(|c| c.starts_with('u')).count();
    if n == 0 || n + m + 2 != cols.len() {
        return Err(parse_err(1, "header must be t,robot_id,x1..xn,u1..um"));
    }

    struct Rows {
        times: Vec<f64>,
        states: Vec<f64>,
        controls: Vec<f64>,
        closed: bool,
    }
    let mut robots: Vec<Rows> = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(ln, format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let num = |f: &str| f.parse::<f64>().map_err(|_| parse_err(ln, format!("not a number: {f:?}")));
        let t = num(fields[0])?;
        let id: usize = fields[1].parse().map_err(|_| parse_err(ln, "bad robot_id"))?;
        if id == robots.len() {
            if robots.last().is_some_and(|r| !r.closed) {
                return Err(parse_err(ln, "previous robot has no final state row"));
            }
            robots.push(Rows {
                times: Vec::new(),
                states: Vec::new(),
                controls: Vec::new(),
                closed: false,
            });
        } else if id + 1 != robots.len() {
            return Err(parse_err(ln, "robot rows must be grouped and in order"));
        }
        let rows = robots.last_mut().unwrap();
        if rows.closed {
            return Err(parse_err(ln, "rows after the final state of a robot"));
        }
        rows.times.push(t);
        for f in &fields[2..2 + n] {
            rows.states.push(num(f)?);
        }
        let u = &fields[2 + n..];
        if u.iter().all(|f| f.is_empty()) {
            rows.closed = true;
        } else {
            for f in u {
                rows.controls.push(num(f)?);
            }
        }
    }
    if robots.is_empty() {
        return Err(parse_err(0, "no trajectory rows"));
    }
    robots
        .into_iter()
        .map(|r| {
            if !r.closed {
                return Err(parse_err(0, "trajectory is truncated: missing final state row"));
            }
            if r.times.len() < 2 {
                return Err(parse_err(0, "trajectory needs at least one interval"));
            }
            let dt = r.times[1] - r.times[0];
            Trajectory::from_parts(n, m, dt, r.states, r.controls)
        })
        .collect()
}

/// `iteration,ergodicity,control_cost,max_constraint_violation`.
pub fn iteration_log_csv(log: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,ergodicity,control_cost,max_constraint_violation\n");
    for r in log {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.iteration, r.ergodicity, r.control_cost, r.max_constraint_violation
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub ergodicity: f64,
    pub point_ergodicity: f64,
    pub control_cost: f64,
    pub violation: f64,
    pub converged: bool,
    pub wall_time: f64,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
}
