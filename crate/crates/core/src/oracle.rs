//! Robertson–Webb query access to an instance.
//!
//! Mechanisms only see agents through [`Oracle`]: `eval` and `cut` queries, each
//! appended to a [`QueryLog`]. [`Oracle::recover_structure`] identifies an agent's
//! support and peak from two cut queries at the quartiles.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::valuation::{CakeInstance, SinglePeakedValuation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryKind {
    Eval { x: f64, y: f64 },
    Cut { from: f64, target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub agent: usize,
    pub kind: QueryKind,
    pub answer: f64,
}

impl fmt::Display for QueryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            QueryKind::Eval { x, y } => write!(f, "{} eval {} {} {}", self.agent, x, y, self.answer),
            QueryKind::Cut { from, target } => {
                write!(f, "{} cut {} {} {}", self.agent, from, target, self.answer)
            }
        }
    }
}

/// Append-only record of the queries issued during one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryLog {
    eval_count: usize,
    cut_count: usize,
    transcript: Vec<QueryRecord>,
}

impl QueryLog {
    pub fn eval_count(&self) -> usize {
        self.eval_count
    }

    pub fn cut_count(&self) -> usize {
        self.cut_count
    }

    pub fn transcript(&self) -> &[QueryRecord] {
        &self.transcript
    }

    fn push(&mut self, record: QueryRecord) {
        match record.kind {
            QueryKind::Eval { .. } => self.eval_count += 1,
            QueryKind::Cut { .. } => self.cut_count += 1,
        }
        self.transcript.push(record);
    }

    /// One query per line: `agent kind arg1 arg2 answer`, agents numbered from zero.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.transcript {
            let _ = writeln!(out, "{r}");
        }
        out
    }
}

/// Parameters of an agent as identified through queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredShape {
    pub left: f64,
    pub peak: f64,
    pub right: f64,
    pub peak_density: f64,
    pub slope: f64,
}

impl RecoveredShape {
    fn from_valuation(v: &SinglePeakedValuation) -> Self {
        Self {
            left: v.left(),
            peak: v.peak(),
            right: v.right(),
            peak_density: v.peak_density(),
            slope: v.slope(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.peak_density - self.slope * (x - self.peak).abs()).max(0.0)
    }
}

pub struct Oracle<'a> {
    agents: &'a [SinglePeakedValuation],
    log: QueryLog,
}

impl<'a> Oracle<'a> {
    pub fn new(instance: &'a CakeInstance) -> Self {
        Self {
            agents: instance.agents(),
            log: QueryLog::default(),
        }
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    fn agent(&self, agent: usize) -> Result<&'a SinglePeakedValuation> {
        self.agents
            .get(agent)
            .ok_or_else(|| Error::domain(format!("no agent with index {agent}")))
    }

    pub fn eval(&mut self, agent: usize, x: f64, y: f64) -> Result<f64> {
        let answer = self.agent(agent)?.eval(x, y)?;
        self.log.push(QueryRecord {
            agent,
            kind: QueryKind::Eval { x, y },
            answer,
        });
        Ok(answer)
    }

    pub fn cut(&mut self, agent: usize, from: f64, target: f64) -> Result<f64> {
        let answer = self.agent(agent)?.cut(from, target)?;
        self.log.push(QueryRecord {
            agent,
            kind: QueryKind::Cut { from, target },
            answer,
        });
        Ok(answer)
    }

    /// Identifies support and peak with exactly two cut queries.
    pub fn recover_structure(&mut self, agent: usize) -> Result<RecoveredShape> {
        let lower = self.cut(agent, 0.0, 0.25)?;
        let upper = self.cut(agent, 0.0, 0.75)?;
        let v = shape_from_quartiles(lower, upper).map_err(|e| match e {
            Error::RecoveryAmbiguous { candidates, .. } => {
                Error::RecoveryAmbiguous { agent, candidates }
            }
            _ => Error::RecoveryFailed { agent },
        })?;
        Ok(RecoveredShape::from_valuation(&v))
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }

    pub fn into_log(self) -> QueryLog {
        self.log
    }
}

const QUARTILE: f64 = 0.25;
/// Value residual accepted when checking a candidate against the two answers.
const FIT_TOL: f64 = 1e-10;
/// Residual below which a candidate peak snaps to the end of its search range.
const SNAP_TOL: f64 = 1e-14;

/// Density at the inner end of a boundary tail of mass one quarter that has
/// `room` length available and slope `k`.
fn tail_density(room: f64, k: f64) -> f64 {
    if k * room * room >= 2.0 * QUARTILE {
        (2.0 * k * QUARTILE).sqrt()
    } else {
        QUARTILE / room + k * room / 2.0
    }
}

/// Mass of a ramp ending at density `u` with slope `k` and `room` length to the boundary.
fn tail_mass(u: f64, k: f64, room: f64) -> f64 {
    let run = (u / k).min(room);
    run * u - k * run * run / 2.0
}

fn bisect_root(mut lo: f64, mut hi: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `f` over consecutive grid points, refined by bisection.
fn grid_roots(grid: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            roots.push(grid[i]);
        } else if i + 1 < grid.len()
            && values[i + 1] != 0.0
            && (values[i] < 0.0) != (values[i + 1] < 0.0)
            && values[i].is_finite()
            && values[i + 1].is_finite()
        {
            roots.push(bisect_root(grid[i], grid[i + 1], &f));
        }
    }
    roots
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Candidate `(peak, slope)` pairs with the peak between the two quartiles.
fn peak_between(lower: f64, upper: f64) -> Vec<(f64, f64)> {
    let span = upper - lower;
    let (room_left, room_right) = (lower, 1.0 - upper);
    let parts = |k: f64| {
        let u1 = tail_density(room_left, k);
        let u2 = tail_density(room_right, k);
        (u1, u2)
    };
    // Mass between the quartiles is span (u1 + u2)/2 + k span^2/4 - (u2 - u1)^2/(4k).
    let residual = |k: f64| {
        let (u1, u2) = parts(k);
        span * (u1 + u2) / 2.0 + k * span * span / 4.0 - (u2 - u1).powi(2) / (4.0 * k) - 0.5
    };
    grid_roots(&log_grid(1e-9, 1e13, 800), residual)
        .into_iter()
        .filter_map(|k| {
            let (u1, u2) = parts(k);
            let peak = (lower + upper) / 2.0 + (u2 - u1) / (2.0 * k);
            let slack = 1e-9 * span.max(1e-9);
            (peak >= lower - slack && peak <= upper + slack).then_some((peak, k))
        })
        .collect()
}

/// Candidate `(peak, slope)` pairs with the peak at or left of the lower quartile.
fn peak_left_of(lower: f64, upper: f64) -> Vec<(f64, f64)> {
    let span = upper - lower;
    let room_right = 1.0 - upper;
    // Falling line on [lower, upper] of mass one half: densities u1 > u2.
    let low_end = |k: f64| 1.0 / (2.0 * span) - k * span / 2.0;
    let k_max = 1.0 / (span * span);
    let grid: Vec<f64> = log_grid(1e-9 * k_max, k_max, 400)
        .into_iter()
        .filter(|&k| k < k_max)
        .collect();
    let roots = grid_roots(&grid, |k| tail_mass(low_end(k), k, room_right) - QUARTILE);

    let mut out = Vec::new();
    for k in roots {
        let u2 = low_end(k);
        if u2 <= 0.0 {
            continue;
        }
        let u1 = u2 + k * span;
        // Mass of [0, lower] as the peak moves left from `lower`: decreasing in the peak.
        let left_mass = |p: f64| {
            let e = lower - p;
            let h = u1 + k * e;
            e * (2.0 * u1 + k * e) / 2.0 + tail_mass(h, k, p) - QUARTILE
        };
        let (at_zero, at_lower) = (left_mass(0.0), left_mass(lower));
        if at_zero < -SNAP_TOL || at_lower > SNAP_TOL {
            continue;
        }
        // The residual is flat in the peak near the boundary, so a root within
        // rounding of zero is indistinguishable from a peak on the boundary.
        let p = if at_zero <= SNAP_TOL {
            0.0
        } else if at_lower >= -SNAP_TOL {
            lower
        } else {
            bisect_root(0.0, lower, &left_mass)
        };
        out.push((p, k));
    }
    out
}

/// Reconstructs the valuation whose quartiles are `lower` and `upper`.
pub fn shape_from_quartiles(lower: f64, upper: f64) -> Result<SinglePeakedValuation> {
    if !(0.0 < lower && lower < upper && upper < 1.0) {
        return Err(Error::RecoveryFailed { agent: 0 });
    }
    let mut raw = peak_between(lower, upper);
    raw.extend(peak_left_of(lower, upper));
    raw.extend(
        peak_left_of(1.0 - upper, 1.0 - lower)
            .into_iter()
            .map(|(p, k)| (1.0 - p, k)),
    );

    let mut found: Vec<SinglePeakedValuation> = Vec::new();
    for (p, k) in raw {
        let Ok(v) = SinglePeakedValuation::from_peak_slope(p.clamp(0.0, 1.0), k) else {
            continue;
        };
        let fits = (v.cdf(lower) - QUARTILE).abs() <= FIT_TOL
            && (v.cdf(upper) - 3.0 * QUARTILE).abs() <= FIT_TOL;
        let duplicate = found.iter().any(|w| {
            (w.peak() - v.peak()).abs() <= 1e-7
                && (w.slope() - v.slope()).abs() <= 1e-7 * v.slope().max(1.0)
        });
        if fits && !duplicate {
            found.push(v);
        }
    }
    match found.len() {
        0 => Err(Error::RecoveryFailed { agent: 0 }),
        1 => Ok(found[0]),
        _ => Err(Error::RecoveryAmbiguous {
            agent: 0,
            candidates: found.iter().map(|v| (v.peak(), v.slope())).collect(),
        }),
    }
}
