//! Pareto optimality: a structural audit for common-slope instances, a
//! constructive improvement step, and an LP check that works for any instance.

use std::fmt;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use crate::allocation::{wasteful_parts, Allocation, Interval};
use crate::error::{Error, Result};
use crate::valuation::CakeInstance;

/// The LP reports an improvement only when the total slack exceeds this.
pub const LP_SLACK_TOL: f64 = 1e-7;
/// Cell values below this are treated as zero to keep the simplex well conditioned.
const LP_VALUE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    PO,
    NotPO,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParetoWitness {
    /// Part of `agent`'s piece where it has zero density.
    Wasteful { agent: usize, part: Interval },
    /// Adjacent intervals whose owners appear against peak order: `left_agent`
    /// has the larger peak but holds the interval on the left.
    PeakOrder {
        left_agent: usize,
        left: Interval,
        right_agent: usize,
        right: Interval,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoVerdict {
    pub verdict: Verdict,
    pub witness: Option<ParetoWitness>,
    /// Why the structural test does not apply; empty unless `Inapplicable`.
    pub reasons: Vec<String>,
}

impl ParetoVerdict {
    pub fn is_po(&self) -> bool {
        self.verdict == Verdict::PO
    }
}

impl fmt::Display for ParetoVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.verdict, &self.witness) {
            (Verdict::PO, _) => write!(f, "po: pass"),
            (Verdict::Inapplicable, _) => {
                write!(f, "po: inapplicable ({})", self.reasons.join("; "))
            }
            (Verdict::NotPO, Some(ParetoWitness::Wasteful { agent, part })) => write!(
                f,
                "po: fail (agent {} holds {part} outside its support)",
                agent + 1
            ),
            (
                Verdict::NotPO,
                Some(ParetoWitness::PeakOrder {
                    left_agent,
                    left,
                    right_agent,
                    right,
                }),
            ) => write!(
                f,
                "po: fail (agent {} holds {left} left of agent {}'s {right} but has the later peak)",
                left_agent + 1,
                right_agent + 1
            ),
            (Verdict::NotPO, None) => write!(f, "po: fail"),
        }
    }
}

fn applicability(instance: &CakeInstance) -> Vec<String> {
    let flags = instance.flags();
    let mut reasons = Vec::new();
    if !flags.common_slope {
        reasons.push("slopes differ".to_string());
    }
    if !flags.distinct_peaks {
        reasons.push("two agents share a peak".to_string());
    }
    if !flags.coverage {
        reasons.push("supports do not cover the cake".to_string());
    }
    reasons
}

/// First adjacent pair `(j on the left, i on the right)` with `p_i < p_j`.
fn first_inversion(instance: &CakeInstance, seq: &[(Interval, usize)]) -> Option<usize> {
    seq.windows(2).position(|w| {
        let (left, right) = (w[0].1, w[1].1);
        instance.agent(right).peak() < instance.agent(left).peak()
    })
}

/// Decides Pareto optimality of `allocation` for a common-slope instance with
/// distinct peaks and covering supports: PO exactly when nothing is wasted and
/// the pieces appear in peak order.
pub fn audit_pareto_sp(instance: &CakeInstance, allocation: &Allocation) -> Result<ParetoVerdict> {
    if instance.len() != allocation.agent_count() {
        return Err(Error::ShapeMismatch {
            expected: instance.len(),
            found: allocation.agent_count(),
        });
    }
    let reasons = applicability(instance);
    if !reasons.is_empty() {
        return Ok(ParetoVerdict {
            verdict: Verdict::Inapplicable,
            witness: None,
            reasons,
        });
    }
    let witness = if let Some(&(agent, part)) = wasteful_parts(instance, allocation).first() {
        Some(ParetoWitness::Wasteful { agent, part })
    } else {
        // With distinct peaks, a disconnected holding always shows up as an
        // adjacent pair out of peak order.
        let seq = allocation.owner_sequence();
        first_inversion(instance, &seq).map(|m| ParetoWitness::PeakOrder {
            left_agent: seq[m].1,
            left: seq[m].0,
            right_agent: seq[m + 1].1,
            right: seq[m + 1].0,
        })
    };
    Ok(ParetoVerdict {
        verdict: if witness.is_some() { Verdict::NotPO } else { Verdict::PO },
        witness,
        reasons: Vec::new(),
    })
}

/// Number of interval pairs whose owners appear against peak order.
pub fn peak_inversions(instance: &CakeInstance, allocation: &Allocation) -> usize {
    let peaks: Vec<f64> = allocation
        .owner_sequence()
        .iter()
        .map(|&(_, a)| instance.agent(a).peak())
        .collect();
    let mut count = 0;
    for (s, ps) in peaks.iter().enumerate() {
        count += peaks[s + 1..].iter().filter(|&&pt| pt < *ps).count();
    }
    count
}

/// One Pareto improvement, or `None` when the allocation admits none of the
/// two kinds below.
///
/// A wasted part is split at every support endpoint and each sub-part goes to
/// the agent with the highest density there. Otherwise the first adjacent pair
/// out of peak order is swapped inside its window, keeping one of the two
/// agents' values fixed so the other strictly gains.
pub fn find_improvement_exchange(
    instance: &CakeInstance,
    allocation: &Allocation,
) -> Result<Option<Allocation>> {
    if instance.len() != allocation.agent_count() {
        return Err(Error::ShapeMismatch {
            expected: instance.len(),
            found: allocation.agent_count(),
        });
    }
    if !instance.flags().common_slope {
        return Err(Error::PrereqViolated(
            "improvement exchanges need a common slope".into(),
        ));
    }
    for (owner, part) in wasteful_parts(instance, allocation) {
        if let Some(next) = reassign_waste(instance, allocation, owner, part)? {
            return Ok(Some(next));
        }
    }
    swap_inversion(instance, allocation)
}

fn reassign_waste(
    instance: &CakeInstance,
    allocation: &Allocation,
    owner: usize,
    part: Interval,
) -> Result<Option<Allocation>> {
    let mut cuts = vec![part.start, part.end];
    for v in instance.agents() {
        cuts.extend([v.left(), v.right()]);
    }
    cuts.retain(|&x| x >= part.start && x <= part.end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut gifts: Vec<(usize, Interval)> = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (best, density) = (0..instance.len())
            .map(|i| (i, instance.agent(i).density_unchecked(mid)))
            .fold((owner, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if density > 0.0 {
            gifts.push((best, Interval::new(w[0], w[1])));
        }
    }
    if gifts.is_empty() {
        return Ok(None);
    }
    let mut pieces = allocation.pieces().to_vec();
    for &(_, g) in &gifts {
        pieces[owner] = remove_span(&pieces[owner], g);
    }
    for (agent, g) in gifts {
        pieces[agent].push(g);
    }
    Allocation::new(pieces).map(Some)
}

/// `piece` minus `[cut.start, cut.end]`.
fn remove_span(piece: &[Interval], cut: Interval) -> Vec<Interval> {
    let mut out = Vec::with_capacity(piece.len() + 1);
    for iv in piece {
        if iv.end <= cut.start || iv.start >= cut.end {
            out.push(*iv);
            continue;
        }
        if iv.start < cut.start {
            out.push(Interval::new(iv.start, cut.start));
        }
        if iv.end > cut.end {
            out.push(Interval::new(cut.end, iv.end));
        }
    }
    out
}

fn swap_inversion(instance: &CakeInstance, allocation: &Allocation) -> Result<Option<Allocation>> {
    let seq = allocation.owner_sequence();
    let Some(m) = first_inversion(instance, &seq) else {
        return Ok(None);
    };
    let (left, j) = seq[m];
    let (right, i) = seq[m + 1];
    let (a, b, c) = (left.start, left.end, right.end);
    let (vi, vj) = (instance.agent(i), instance.agent(j));

    // Agent i (earlier peak) moves to the left part of [a, c].
    let split = if c > vj.peak() && a >= vi.peak() {
        // keep i's value: V_i(a, b') = V_i(b, c)
        vi.cut(a, vi.eval_unchecked(b, c))?
    } else {
        // keep j's value: V_j(b', c) = V_j(a, b)
        vj.cut(a, vj.eval_unchecked(b, c))?
    };
    let split = split.clamp(a, c);

    let mut pieces = allocation.pieces().to_vec();
    pieces[j] = remove_span(&pieces[j], left);
    pieces[i] = remove_span(&pieces[i], right);
    pieces[i].push(Interval::new(a, split));
    pieces[j].push(Interval::new(split, c));
    Allocation::new(pieces).map(Some)
}

/// Outcome of repeatedly applying [`find_improvement_exchange`].
#[derive(Debug, Clone)]
pub struct ImprovementPath {
    pub allocation: Allocation,
    pub waste_steps: usize,
    pub swap_steps: usize,
    /// Wasted parts in the starting allocation.
    pub initial_waste: usize,
    /// Order inversions once the waste was gone.
    pub inversions_after_waste: usize,
}

impl ImprovementPath {
    pub fn steps(&self) -> usize {
        self.waste_steps + self.swap_steps
    }

    /// Every waste step removes one wasted part and every swap removes at
    /// least one inversion.
    pub fn bound(&self) -> usize {
        self.initial_waste + self.inversions_after_waste
    }
}

/// Applies improvements until none is left or `max_steps` is reached.
pub fn improve_until_stable(
    instance: &CakeInstance,
    allocation: &Allocation,
    max_steps: usize,
) -> Result<ImprovementPath> {
    let mut current = allocation.clone();
    let initial_waste = wasteful_parts(instance, &current).len();
    let (mut waste_steps, mut swap_steps) = (0, 0);
    let mut inversions_after_waste = None;
    while waste_steps + swap_steps < max_steps {
        let wasteful = !wasteful_parts(instance, &current).is_empty();
        if !wasteful && inversions_after_waste.is_none() {
            inversions_after_waste = Some(peak_inversions(instance, &current));
        }
        match find_improvement_exchange(instance, &current)? {
            Some(next) => {
                if wasteful {
                    waste_steps += 1;
                } else {
                    swap_steps += 1;
                }
                current = next;
            }
            None => break,
        }
    }
    let inversions_after_waste =
        inversions_after_waste.unwrap_or_else(|| peak_inversions(instance, &current));
    Ok(ImprovementPath {
        allocation: current,
        waste_steps,
        swap_steps,
        initial_waste,
        inversions_after_waste,
    })
}

/// A fractional assignment of grid cells found by the LP.
#[derive(Debug, Clone)]
pub struct FractionalAssignment {
    pub cells: Vec<Interval>,
    /// `shares[i][c]` is agent `i`'s fraction of cell `c`.
    pub shares: Vec<Vec<f64>>,
    /// Each agent's value under the assignment.
    pub values: Vec<f64>,
    /// Total gain over the audited allocation.
    pub slack: f64,
}

/// Cell boundaries: a uniform grid merged with every support mark and every
/// allocation endpoint.
fn lp_grid(instance: &CakeInstance, allocation: &Allocation, grid_cells: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=grid_cells)
        .map(|c| c as f64 / grid_cells as f64)
        .collect();
    for v in instance.agents() {
        pts.extend([v.left(), v.peak(), v.right()]);
    }
    pts.extend(allocation.endpoints());
    pts.retain(|x| (0.0..=1.0).contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    pts
}

/// Solves the dominance LP and returns the best assignment whatever its slack.
///
/// Cell values are exact; the approximation lies only in restricting the
/// search to fractional assignments of the grid cells.
pub fn max_total_slack(
    instance: &CakeInstance,
    allocation: &Allocation,
    grid_cells: usize,
) -> Result<FractionalAssignment> {
    let n = instance.len();
    if n != allocation.agent_count() {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: allocation.agent_count(),
        });
    }
    if grid_cells < n.max(1) {
        return Err(Error::Domain(format!(
            "grid of {grid_cells} cells is coarser than {n} agents"
        )));
    }
    let pts = lp_grid(instance, allocation, grid_cells);
    let cells: Vec<Interval> = pts.windows(2).map(|w| Interval::new(w[0], w[1])).collect();
    let value: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let v = instance.agent(i);
            cells
                .iter()
                .map(|c| v.eval_unchecked(c.start, c.end))
                .map(|x| if x > LP_VALUE_FLOOR { x } else { 0.0 })
                .collect()
        })
        .collect();
    // Own values measured on the same cells so the audited allocation is itself
    // feasible.
    let owner = cell_owners(allocation, &cells);
    let mut own = vec![0.0; n];
    for (c, &o) in owner.iter().enumerate() {
        own[o] += value[o][c];
    }

    // Only agents that value a cell get a variable for it; any unassigned
    // remainder goes back to the owner.
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let z: Vec<Vec<Option<microlp::Variable>>> = value
        .iter()
        .map(|vi| {
            vi.iter()
                .map(|&v| (v > 0.0).then(|| lp.add_var(v, (0.0, 1.0))))
                .collect()
        })
        .collect();
    for c in 0..cells.len() {
        let terms: Vec<_> = z.iter().filter_map(|zi| zi[c]).map(|v| (v, 1.0)).collect();
        if !terms.is_empty() {
            lp.add_constraint(terms, ComparisonOp::Le, 1.0);
        }
    }
    for i in 0..n {
        let terms: Vec<_> = (0..cells.len())
            .filter_map(|c| z[i][c].map(|v| (v, value[i][c])))
            .collect();
        lp.add_constraint(terms, ComparisonOp::Ge, own[i]);
    }
    let sol = match lp.solve() {
        Ok(SolveOutcome::Solution(sol)) => sol,
        Ok(SolveOutcome::Interrupted(_)) => {
            return Err(Error::SolverFailure("solve interrupted".into()))
        }
        Err(e) => return Err(Error::SolverFailure(e.to_string())),
    };

    let mut shares: Vec<Vec<f64>> = z
        .iter()
        .map(|zi| zi.iter().map(|v| v.map_or(0.0, |v| sol.var_value(v))).collect())
        .collect();
    for (c, &o) in owner.iter().enumerate() {
        let taken: f64 = shares.iter().map(|si| si[c]).sum();
        shares[o][c] += (1.0 - taken).max(0.0);
    }
    let values: Vec<f64> = (0..n)
        .map(|i| (0..cells.len()).map(|c| shares[i][c] * value[i][c]).sum())
        .collect();
    let slack = values.iter().zip(&own).map(|(v, o)| v - o).sum::<f64>().max(0.0);
    Ok(FractionalAssignment {
        cells,
        shares,
        values,
        slack,
    })
}

fn cell_owners(allocation: &Allocation, cells: &[Interval]) -> Vec<usize> {
    let seq = allocation.owner_sequence();
    let mut k = 0;
    cells
        .iter()
        .map(|c| {
            let mid = 0.5 * (c.start + c.end);
            while k + 1 < seq.len() && seq[k].0.end <= mid {
                k += 1;
            }
            seq[k].1
        })
        .collect()
}

/// A fractional reassignment of grid cells that makes nobody worse off and
/// gains more than [`LP_SLACK_TOL`] in total, if one exists.
pub fn dominance_oracle(
    instance: &CakeInstance,
    allocation: &Allocation,
    grid_cells: usize,
) -> Result<Option<FractionalAssignment>> {
    let best = max_total_slack(instance, allocation, grid_cells)?;
    Ok((best.slack > LP_SLACK_TOL).then_some(best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareMetrics {
    pub utilities: Vec<f64>,
    pub sum: f64,
    /// `sum / n`.
    pub average: f64,
    pub minimum: f64,
}

pub fn welfare_metrics(instance: &CakeInstance, allocation: &Allocation) -> Result<WelfareMetrics> {
    let utilities = allocation.utilities(instance)?;
    let sum: f64 = utilities.iter().sum();
    let minimum = utilities.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(WelfareMetrics {
        average: sum / utilities.len() as f64,
        sum,
        minimum,
        utilities,
    })
}

/// True when every agent weakly gains (within `tol`) and some agent gains more than `tol`.
pub fn dominates(better: &[f64], worse: &[f64], tol: f64) -> bool {
    better.len() == worse.len()
        && better.iter().zip(worse).all(|(b, w)| *b >= w - tol)
        && better.iter().zip(worse).any(|(b, w)| *b > w + tol)
}
