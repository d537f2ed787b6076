//! Allocation mechanisms.
//!
//! Every mechanism talks to the agents only through an [`Oracle`]: it first
//! recovers each agent's support and peak with two cut queries, then works with
//! those recovered shapes plus any further `eval`/`cut` queries it needs. Reported
//! utilities are computed afterwards from the instance and are not logged.

use std::fmt;
use std::str::FromStr;

use crate::allocation::{Allocation, Interval};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, QueryLog, RecoveredShape};
use crate::valuation::{branch_crossings, supports_cover, CakeInstance};

/// Consecutive marks closer than this bound a zero-length segment.
const MARK_TOL: f64 = 1e-12;
/// Relative tolerance when comparing recovered slopes.
const SLOPE_TOL: f64 = 1e-7;
/// Recovered peaks closer than this are treated as equal.
const PEAK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    WangWu,
    ModifiedWangWu,
    LeftmostLeaves,
    Utilitarian,
    EnvelopeUtilitarian,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::WangWu,
        Mechanism::Utilitarian,
        Mechanism::LeftmostLeaves,
        Mechanism::ModifiedWangWu,
        Mechanism::EnvelopeUtilitarian,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Mechanism::WangWu => "ww",
            Mechanism::ModifiedWangWu => "mww",
            Mechanism::LeftmostLeaves => "ll",
            Mechanism::Utilitarian => "um",
            Mechanism::EnvelopeUtilitarian => "envelope",
        }
    }

    pub fn run(&self, instance: &CakeInstance) -> Result<MechanismResult> {
        match self {
            Mechanism::WangWu => run_ww(instance),
            Mechanism::ModifiedWangWu => run_mww(instance),
            Mechanism::LeftmostLeaves => run_ll(instance),
            Mechanism::Utilitarian => run_um(instance),
            Mechanism::EnvelopeUtilitarian => run_envelope_um(instance),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Domain(format!("unknown mechanism {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct MechanismResult {
    pub mechanism: Mechanism,
    pub allocation: Allocation,
    /// `V_i(X_i)` for every agent in input order.
    pub utilities: Vec<f64>,
    pub log: QueryLog,
    /// Sorted positions the mechanism cut at or segmented by.
    pub marks: Vec<f64>,
}

fn finish(
    mechanism: Mechanism,
    instance: &CakeInstance,
    pieces: Vec<Vec<Interval>>,
    oracle: Oracle<'_>,
    mut marks: Vec<f64>,
) -> Result<MechanismResult> {
    let allocation = Allocation::new(pieces)?;
    let utilities = allocation.utilities(instance)?;
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    Ok(MechanismResult {
        mechanism,
        allocation,
        utilities,
        log: oracle.into_log(),
        marks,
    })
}

fn recover_all(oracle: &mut Oracle<'_>) -> Result<Vec<RecoveredShape>> {
    (0..oracle.agent_count())
        .map(|i| oracle.recover_structure(i))
        .collect()
}

/// Sorted `{0, 1} ∪ {l_i, p_i, r_i}` with near-duplicates removed.
fn segment_marks(shapes: &[RecoveredShape]) -> Vec<f64> {
    let mut marks = vec![0.0, 1.0];
    for s in shapes {
        marks.extend([s.left, s.peak, s.right]);
    }
    marks.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(marks.len());
    for m in marks {
        match out.last() {
            Some(&last) if m - last <= MARK_TOL => {}
            _ => out.push(m),
        }
    }
    // the last kept mark may sit a hair below 1
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Splits `[a, b]` into `2m` equal pieces; the `rank`-th of `agents` takes pieces
/// `rank` and `2m - 1 - rank` (zero-based).
fn split_symmetric(a: f64, b: f64, agents: &[usize], pieces: &mut [Vec<Interval>]) {
    let parts = 2 * agents.len();
    let at = |j: usize| {
        if j == parts {
            b
        } else {
            a + (b - a) * j as f64 / parts as f64
        }
    };
    for (rank, &agent) in agents.iter().enumerate() {
        let mirror = parts - 1 - rank;
        pieces[agent].push(Interval::new(at(rank), at(rank + 1)));
        pieces[agent].push(Interval::new(at(mirror), at(mirror + 1)));
    }
}

/// Wang–Wu: every segment between consecutive marks is cut into `2n` equal
/// pieces and agent `i` takes pieces `i` and `2n + 1 - i`.
pub fn run_ww(instance: &CakeInstance) -> Result<MechanismResult> {
    let mut oracle = Oracle::new(instance);
    let shapes = recover_all(&mut oracle)?;
    let marks = segment_marks(&shapes);
    let everyone: Vec<usize> = (0..shapes.len()).collect();
    let mut pieces = vec![Vec::new(); shapes.len()];
    for w in marks.windows(2) {
        split_symmetric(w[0], w[1], &everyone, &mut pieces);
    }
    finish(Mechanism::WangWu, instance, pieces, oracle, marks)
}

/// Modified Wang–Wu: each segment is shared only among the agents whose support
/// overlaps it with positive length.
pub fn run_mww(instance: &CakeInstance) -> Result<MechanismResult> {
    let mut oracle = Oracle::new(instance);
    let shapes = recover_all(&mut oracle)?;
    let marks = segment_marks(&shapes);
    let everyone: Vec<usize> = (0..shapes.len()).collect();
    let mut pieces = vec![Vec::new(); shapes.len()];
    for w in marks.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Marks include every support endpoint, so a segment either lies inside a
        // support or meets it in at most a point.
        let interested: Vec<usize> = shapes
            .iter()
            .enumerate()
            .filter(|(_, s)| Interval::new(a, b).overlap(s.left, s.right) > 0.5 * (b - a))
            .map(|(i, _)| i)
            .collect();
        if interested.is_empty() {
            if !instance.waste_tolerant() {
                return Err(Error::EmptySegment { start: a, end: b });
            }
            split_symmetric(a, b, &everyone, &mut pieces);
        } else {
            split_symmetric(a, b, &interested, &mut pieces);
        }
    }
    finish(Mechanism::ModifiedWangWu, instance, pieces, oracle, marks)
}

fn require_common_slope(shapes: &[RecoveredShape]) -> Result<()> {
    let k0 = shapes[0].slope;
    if let Some((i, s)) = shapes
        .iter()
        .enumerate()
        .find(|(_, s)| (s.slope - k0).abs() > SLOPE_TOL * k0.max(s.slope))
    {
        return Err(Error::PrereqViolated(format!(
            "agents 1 and {} have slopes {k0} and {}; a common slope is required",
            i + 1,
            s.slope
        )));
    }
    Ok(())
}

fn require_coverage(shapes: &[RecoveredShape], instance: &CakeInstance) -> Result<()> {
    let supports: Vec<(f64, f64)> = shapes.iter().map(|s| (s.left, s.right)).collect();
    if !supports_cover(&supports) && !instance.waste_tolerant() {
        return Err(Error::PrereqViolated(
            "agent supports do not cover the cake".into(),
        ));
    }
    Ok(())
}

/// Agents by increasing recovered peak, ties by input index.
fn peak_order(shapes: &[RecoveredShape]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by(|&i, &j| shapes[i].peak.total_cmp(&shapes[j].peak).then(i.cmp(&j)));
    order
}

/// Leftmost leaves: in peak order, each agent takes from the left the smallest
/// interval worth a `1/(agents left)` share of what remains to it, extended to
/// the next agent's support start.
pub fn run_ll(instance: &CakeInstance) -> Result<MechanismResult> {
    let mut oracle = Oracle::new(instance);
    let shapes = recover_all(&mut oracle)?;
    require_common_slope(&shapes)?;
    require_coverage(&shapes, instance)?;
    let order = peak_order(&shapes);
    let n = order.len();

    let mut cuts = Vec::with_capacity(n.saturating_sub(1));
    let mut prev = 0.0;
    for m in 0..n.saturating_sub(1) {
        let agent = order[m];
        let remaining = oracle.eval(agent, prev, 1.0)?;
        let c = oracle.cut(agent, prev, remaining / (n - m) as f64)?;
        let next = c.max(shapes[order[m + 1]].left).min(1.0);
        cuts.push(next);
        prev = next;
    }
    let allocation = Allocation::from_cuts(&cuts, &order)?;
    finish(
        Mechanism::LeftmostLeaves,
        instance,
        allocation.pieces().to_vec(),
        oracle,
        cuts,
    )
}

/// Utilitarian mechanism: connected peak-preserving allocation cut where
/// consecutive agents' densities cross.
pub fn run_um(instance: &CakeInstance) -> Result<MechanismResult> {
    let mut oracle = Oracle::new(instance);
    let shapes = recover_all(&mut oracle)?;
    require_common_slope(&shapes)?;
    require_coverage(&shapes, instance)?;
    let order = peak_order(&shapes);
    for w in order.windows(2) {
        if (shapes[w[1]].peak - shapes[w[0]].peak).abs() <= PEAK_TOL {
            return Err(Error::EqualPeaks {
                first: w[0].min(w[1]),
                second: w[0].max(w[1]),
            });
        }
    }

    let mut cuts: Vec<f64> = Vec::with_capacity(order.len().saturating_sub(1));
    for w in order.windows(2) {
        let (a, b) = (&shapes[w[0]], &shapes[w[1]]);
        let k = 0.5 * (a.slope + b.slope);
        let crossing = (a.peak_density - b.peak_density) / (2.0 * k) + (a.peak + b.peak) / 2.0;
        let mut c = crossing.clamp(a.peak, b.peak);
        if let Some(&last) = cuts.last() {
            c = c.max(last);
        }
        cuts.push(c);
    }
    let allocation = Allocation::from_cuts(&cuts, &order)?;
    finish(
        Mechanism::Utilitarian,
        instance,
        allocation.pieces().to_vec(),
        oracle,
        cuts,
    )
}

/// Assigns every cell of the upper envelope of the densities to an agent of
/// maximal density there (ties to the lowest index). Works for any slopes; the
/// result may be disconnected.
pub fn run_envelope_um(instance: &CakeInstance) -> Result<MechanismResult> {
    let mut oracle = Oracle::new(instance);
    let shapes = recover_all(&mut oracle)?;
    require_coverage(&shapes, instance)?;

    let mut breaks = vec![0.0, 1.0];
    for (i, a) in shapes.iter().enumerate() {
        breaks.extend([a.left, a.peak, a.right]);
        for b in &shapes[i + 1..] {
            breaks.extend(branch_crossings(
                (a.peak, a.peak_density, a.slope),
                (b.peak, b.peak_density, b.slope),
            ));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= MARK_TOL);

    let mut pieces = vec![Vec::new(); shapes.len()];
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut best = 0;
        for (i, s) in shapes.iter().enumerate().skip(1) {
            let (d, top) = (s.density(mid), shapes[best].density(mid));
            if d > top + 1e-12 * top.max(1.0) {
                best = i;
            }
        }
        pieces[best].push(Interval::new(w[0], w[1]));
    }
    finish(
        Mechanism::EnvelopeUtilitarian,
        instance,
        pieces,
        oracle,
        breaks,
    )
}
