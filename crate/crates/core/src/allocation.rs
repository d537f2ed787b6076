//! Pieces, allocations, value tables and fairness audits.
//!
//! Intervals are treated as half-open `[start, end)` with the last one closed;
//! endpoints carry no value so the convention never affects an audit.

use std::fmt;

use crate::error::{Error, Result};
use crate::valuation::CakeInstance;

/// Intervals closer than this are merged; shorter ones are dropped.
const MERGE_TOL: f64 = 1e-12;
/// Geometric tolerance for partition checks and measure-zero comparisons.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= MERGE_TOL
    }

    /// Length of the overlap with `[lo, hi]`.
    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        (self.end.min(hi) - self.start.max(lo)).max(0.0)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Sorts, merges touching intervals and drops empty ones.
pub fn normalize_piece(mut piece: Vec<Interval>) -> Vec<Interval> {
    piece.retain(|iv| !iv.is_empty());
    piece.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut out: Vec<Interval> = Vec::with_capacity(piece.len());
    for iv in piece {
        match out.last_mut() {
            Some(last) if iv.start <= last.end + MERGE_TOL => last.end = last.end.max(iv.end),
            _ => out.push(iv),
        }
    }
    out
}

/// A partition of `[0, 1]` into one piece per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pieces: Vec<Vec<Interval>>,
}

impl Allocation {
    /// Normalizes every piece and checks that together they partition the cake.
    pub fn new(pieces: Vec<Vec<Interval>>) -> Result<Self> {
        let pieces: Vec<Vec<Interval>> = pieces.into_iter().map(normalize_piece).collect();
        if pieces.is_empty() {
            return Err(Error::InvalidAllocation("no agents".into()));
        }
        let mut all: Vec<Interval> = pieces.iter().flatten().copied().collect();
        for iv in &all {
            if !(iv.start.is_finite() && iv.end.is_finite())
                || iv.start < -GEOM_TOL
                || iv.end > 1.0 + GEOM_TOL
                || iv.start > iv.end
            {
                return Err(Error::InvalidAllocation(format!("interval {iv} is not inside [0, 1]")));
            }
        }
        all.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut reach = 0.0;
        for iv in &all {
            if iv.start > reach + GEOM_TOL {
                return Err(Error::InvalidAllocation(format!(
                    "gap between {reach} and {}",
                    iv.start
                )));
            }
            if iv.start < reach - GEOM_TOL {
                return Err(Error::InvalidAllocation(format!(
                    "pieces overlap on [{}, {reach}]",
                    iv.start
                )));
            }
            reach = iv.end;
        }
        if reach < 1.0 - GEOM_TOL {
            return Err(Error::InvalidAllocation(format!("gap between {reach} and 1")));
        }
        Ok(Self { pieces })
    }

    /// Connected allocation from `n - 1` cut points; agent `order[m]` takes the `m`-th piece.
    pub fn from_cuts(cuts: &[f64], order: &[usize]) -> Result<Self> {
        if order.len() != cuts.len() + 1 {
            return Err(Error::InvalidAllocation(format!(
                "{} cut points cannot split the cake among {} agents",
                cuts.len(),
                order.len()
            )));
        }
        let mut pieces = vec![Vec::new(); order.len()];
        let mut start = 0.0;
        for (m, &agent) in order.iter().enumerate() {
            let end = cuts.get(m).copied().unwrap_or(1.0);
            if end < start {
                return Err(Error::InvalidAllocation("cut points must be nondecreasing".into()));
            }
            pieces[agent].push(Interval::new(start, end));
            start = end;
        }
        Self::new(pieces)
    }

    /// Re-applies normalization; idempotent.
    pub fn normalized(&self) -> Self {
        Self {
            pieces: self.pieces.iter().cloned().map(normalize_piece).collect(),
        }
    }

    pub fn agent_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, agent: usize) -> &[Interval] {
        &self.pieces[agent]
    }

    pub fn pieces(&self) -> &[Vec<Interval>] {
        &self.pieces
    }

    /// All intervals in left-to-right order with their owners.
    pub fn owner_sequence(&self) -> Vec<(Interval, usize)> {
        let mut seq: Vec<(Interval, usize)> = self
            .pieces
            .iter()
            .enumerate()
            .flat_map(|(agent, piece)| piece.iter().map(move |&iv| (iv, agent)))
            .collect();
        seq.sort_by(|a, b| a.0.start.total_cmp(&b.0.start));
        seq
    }

    /// Every distinct interval endpoint.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .pieces
            .iter()
            .flatten()
            .flat_map(|iv| [iv.start, iv.end])
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn check_shape(&self, instance: &CakeInstance) -> Result<()> {
        if instance.len() != self.agent_count() {
            return Err(Error::ShapeMismatch {
                expected: instance.len(),
                found: self.agent_count(),
            });
        }
        Ok(())
    }

    /// Value agent `viewer` assigns to the piece of `holder`.
    pub fn value_of(&self, instance: &CakeInstance, viewer: usize, holder: usize) -> f64 {
        let v = instance.agent(viewer);
        self.pieces[holder]
            .iter()
            .map(|iv| v.eval_unchecked(iv.start.max(0.0), iv.end.min(1.0)))
            .sum()
    }

    /// Own-piece values `V_i(X_i)`.
    pub fn utilities(&self, instance: &CakeInstance) -> Result<Vec<f64>> {
        self.check_shape(instance)?;
        Ok((0..self.agent_count())
            .map(|i| self.value_of(instance, i, i))
            .collect())
    }
}

/// `M[i][j]` is the value agent `i` assigns to agent `j`'s piece.
pub fn value_matrix(instance: &CakeInstance, allocation: &Allocation) -> Result<Vec<Vec<f64>>> {
    allocation.check_shape(instance)?;
    let n = instance.len();
    Ok((0..n)
        .map(|i| (0..n).map(|j| allocation.value_of(instance, i, j)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    EnvyFree,
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    /// `agent` values `envied`'s piece above its own.
    Envy {
        agent: usize,
        envied: usize,
        own_value: f64,
        other_value: f64,
    },
    /// `agent` gets less than its proportional share.
    BelowShare { agent: usize, own_value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub check: Check,
    pub passed: bool,
    /// The largest violation; present exactly when the check fails.
    pub witness: Option<Witness>,
    pub tolerance: f64,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.check {
            Check::EnvyFree => "envy-free",
            Check::Proportional => "proportional",
        };
        write!(f, "{name}: {}", if self.passed { "yes" } else { "no" })?;
        match self.witness {
            Some(Witness::Envy {
                agent,
                envied,
                own_value,
                other_value,
            }) => write!(
                f,
                " (agent {} values own piece at {own_value} and agent {}'s at {other_value})",
                agent + 1,
                envied + 1
            ),
            Some(Witness::BelowShare { agent, own_value }) => {
                write!(f, " (agent {} values own piece at {own_value})", agent + 1)
            }
            None => Ok(()),
        }
    }
}

pub fn audit_envy_free(
    instance: &CakeInstance,
    allocation: &Allocation,
    tolerance: f64,
) -> Result<AuditReport> {
    let m = value_matrix(instance, allocation)?;
    let mut worst: Option<(f64, Witness)> = None;
    for (i, row) in m.iter().enumerate() {
        for (j, &other) in row.iter().enumerate() {
            let excess = other - row[i];
            if i != j && excess > tolerance && worst.is_none_or(|(w, _)| excess > w) {
                worst = Some((
                    excess,
                    Witness::Envy {
                        agent: i,
                        envied: j,
                        own_value: row[i],
                        other_value: other,
                    },
                ));
            }
        }
    }
    Ok(AuditReport {
        check: Check::EnvyFree,
        passed: worst.is_none(),
        witness: worst.map(|(_, w)| w),
        tolerance,
    })
}

pub fn audit_proportional(
    instance: &CakeInstance,
    allocation: &Allocation,
    tolerance: f64,
) -> Result<AuditReport> {
    let utilities = allocation.utilities(instance)?;
    let share = 1.0 / utilities.len() as f64;
    let witness = utilities
        .iter()
        .enumerate()
        .filter(|(_, &u)| u < share - tolerance)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(agent, &own_value)| Witness::BelowShare { agent, own_value });
    Ok(AuditReport {
        check: Check::Proportional,
        passed: witness.is_none(),
        witness,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureFlags {
    pub connected: bool,
    /// Only meaningful for connected allocations; false otherwise.
    pub peak_preserving: bool,
    pub non_wasteful: bool,
}

/// Parts of each agent's piece that lie outside its support, longer than `GEOM_TOL`.
pub fn wasteful_parts(instance: &CakeInstance, allocation: &Allocation) -> Vec<(usize, Interval)> {
    let mut out = Vec::new();
    for (agent, piece) in allocation.pieces().iter().enumerate() {
        let (l, r) = instance.agent(agent).support();
        for iv in piece {
            for part in [
                Interval::new(iv.start, iv.end.min(l)),
                Interval::new(iv.start.max(r), iv.end),
            ] {
                if part.len() > GEOM_TOL {
                    out.push((agent, part));
                }
            }
        }
    }
    out
}

pub fn structure_flags(instance: &CakeInstance, allocation: &Allocation) -> Result<StructureFlags> {
    allocation.check_shape(instance)?;
    let connected = allocation.pieces().iter().all(|p| p.len() <= 1);
    let peak_preserving = connected
        && allocation
            .owner_sequence()
            .windows(2)
            .all(|w| instance.agent(w[0].1).peak() <= instance.agent(w[1].1).peak());
    let non_wasteful = wasteful_parts(instance, allocation).is_empty();
    Ok(StructureFlags {
        connected,
        peak_preserving,
        non_wasteful,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::SinglePeakedValuation;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    fn disjoint3() -> CakeInstance {
        let agents = [1.0 / 6.0, 0.5, 5.0 / 6.0]
            .iter()
            .map(|&p| SinglePeakedValuation::from_peak_density(p, 6.0).unwrap())
            .collect();
        CakeInstance::new(agents).unwrap()
    }

    #[test]
    fn normalization_merges_and_drops() {
        assert_eq!(normalize_piece(vec![iv(0.5, 1.0), iv(0.0, 0.5)]), vec![iv(0.0, 1.0)]);
        assert_eq!(normalize_piece(vec![iv(0.3, 0.3), iv(0.4, 0.6)]), vec![iv(0.4, 0.6)]);
        let once = normalize_piece(vec![iv(0.2, 0.3), iv(0.0, 0.1), iv(0.1, 0.15)]);
        assert_eq!(once, vec![iv(0.0, 0.15), iv(0.2, 0.3)]);
        assert_eq!(normalize_piece(once.clone()), once);
    }

    #[test]
    fn rejects_gaps_and_overlaps() {
        assert!(Allocation::new(vec![vec![iv(0.0, 0.4)], vec![iv(0.5, 1.0)]]).is_err());
        assert!(Allocation::new(vec![vec![iv(0.0, 0.6)], vec![iv(0.5, 1.0)]]).is_err());
        assert!(Allocation::new(vec![vec![iv(0.0, 0.6)], vec![iv(0.6, 0.9)]]).is_err());
        assert!(Allocation::new(vec![]).is_err());
        assert!(Allocation::new(vec![vec![iv(0.0, 0.6)], vec![iv(0.6, 1.0)]]).is_ok());
    }

    #[test]
    fn supports_allocation_of_disjoint_instance() {
        let inst = disjoint3();
        let alloc = Allocation::from_cuts(&[1.0 / 3.0, 2.0 / 3.0], &[0, 1, 2]).unwrap();
        let m = value_matrix(&inst, &alloc).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((x - want).abs() < 1e-12);
            }
        }
        assert!(audit_proportional(&inst, &alloc, 1e-9).unwrap().passed);
        assert!(audit_envy_free(&inst, &alloc, 1e-9).unwrap().passed);
        let flags = structure_flags(&inst, &alloc).unwrap();
        assert_eq!(
            flags,
            StructureFlags {
                connected: true,
                peak_preserving: true,
                non_wasteful: true
            }
        );
    }

    #[test]
    fn single_agent_gets_everything() {
        let v = SinglePeakedValuation::from_peak_density(0.5, 2.0).unwrap();
        let inst = CakeInstance::new(vec![v]).unwrap();
        let alloc = Allocation::new(vec![vec![iv(0.0, 1.0)]]).unwrap();
        let m = value_matrix(&inst, &alloc).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0][0] - 1.0).abs() < 1e-12);
        assert!(audit_envy_free(&inst, &alloc, 1e-9).unwrap().passed);
    }

    #[test]
    fn everything_to_one_agent_is_not_proportional() {
        let a = SinglePeakedValuation::from_peak_density(0.3, 1.5).unwrap();
        let b = SinglePeakedValuation::from_peak_density(0.7, 1.5).unwrap();
        let inst = CakeInstance::new(vec![a, b]).unwrap();
        let alloc = Allocation::new(vec![vec![iv(0.0, 1.0)], vec![]]).unwrap();
        let report = audit_proportional(&inst, &alloc, 1e-9).unwrap();
        assert!(!report.passed);
        assert!(matches!(report.witness, Some(Witness::BelowShare { agent: 1, .. })));
        let report = audit_envy_free(&inst, &alloc, 1e-9).unwrap();
        assert!(matches!(report.witness, Some(Witness::Envy { agent: 1, envied: 0, .. })));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let inst = disjoint3();
        let alloc = Allocation::new(vec![vec![iv(0.0, 0.5)], vec![iv(0.5, 1.0)]]).unwrap();
        assert!(matches!(
            value_matrix(&inst, &alloc),
            Err(Error::ShapeMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn reversed_order_is_not_peak_preserving() {
        let inst = disjoint3();
        let alloc = Allocation::from_cuts(&[1.0 / 3.0, 2.0 / 3.0], &[2, 1, 0]).unwrap();
        let flags = structure_flags(&inst, &alloc).unwrap();
        assert!(flags.connected);
        assert!(!flags.peak_preserving);
        assert!(!flags.non_wasteful);
        assert_eq!(wasteful_parts(&inst, &alloc).len(), 2);
    }
}
