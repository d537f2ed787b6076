//! Instance generators, the welfare-loss curve and mechanism comparisons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{audit_envy_free, audit_proportional, AuditReport};
use crate::efficiency::{audit_pareto_sp, dominates, welfare_metrics, ParetoVerdict};
use crate::error::{Error, Result};
use crate::mechanisms::{run_ww, Mechanism};
use crate::valuation::{CakeInstance, SinglePeakedValuation};
use crate::AUDIT_TOL;

const MAX_ATTEMPTS: usize = 1000;

/// `n` agents with supports tiling the cake: agent `i` owns `[i/n, (i+1)/n]`.
pub fn disjoint_support_instance(n: usize) -> Result<CakeInstance> {
    if n == 0 {
        return Err(Error::Domain("need at least one agent".into()));
    }
    let h = 2.0 * n as f64;
    let agents = (0..n)
        .map(|i| SinglePeakedValuation::from_peak_density((2 * i + 1) as f64 / h, h))
        .collect::<Result<Vec<_>>>()?;
    CakeInstance::new(agents)
}

/// Three agents with peaks 1/3, 1/2, 2/3 and peak density 3.
pub fn figure3_instance() -> CakeInstance {
    let agents = [1.0 / 3.0, 0.5, 2.0 / 3.0]
        .iter()
        .map(|&p| SinglePeakedValuation::from_peak_density(p, 3.0).expect("interior triangle"))
        .collect();
    CakeInstance::new(agents).expect("supports cover the cake")
}

/// Two agents with unequal slopes: a wide triangle over the whole cake and a
/// narrow tall one on `[0.6, 0.8]`.
pub fn unequal_slopes_instance() -> CakeInstance {
    let wide = SinglePeakedValuation::from_peak_density(0.5, 2.0).expect("interior triangle");
    let narrow = SinglePeakedValuation::from_peak_density(0.7, 10.0).expect("interior triangle");
    CakeInstance::new(vec![wide, narrow]).expect("wide support covers the cake")
}

/// Two agents with slope 2 and peaks 0.7, 0.8, both supports truncated to the
/// whole cake. The utilitarian cut at 0.725 leaves agent 2 envious.
pub fn utilitarian_envy_instance() -> CakeInstance {
    let agents = [0.7, 0.8]
        .iter()
        .map(|&p| SinglePeakedValuation::from_peak_slope(p, 2.0).expect("normalizable"))
        .collect();
    CakeInstance::new(agents).expect("full supports cover the cake")
}

/// A random instance with distinct peaks and covering supports, fixed by `seed`.
///
/// With `common_slope`, one slope is drawn log-uniformly from `[1.2, 18]` and
/// each agent's peak density solved from it; otherwise peak densities are
/// drawn from `[1.05, 6]`.
pub fn random_instance(n: usize, seed: u64, common_slope: bool) -> Result<CakeInstance> {
    if n == 0 {
        return Err(Error::Domain("need at least one agent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let slope = (rng.gen_range(1.2f64.ln()..18f64.ln())).exp();
        let agents = (0..n)
            .map(|_| {
                let peak = rng.gen_range(0.0..1.0);
                if common_slope {
                    SinglePeakedValuation::from_peak_slope(peak, slope)
                } else {
                    SinglePeakedValuation::from_peak_density(peak, rng.gen_range(1.05..6.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if let Ok(inst) = CakeInstance::new(agents) {
            if inst.flags().distinct_peaks {
                return Ok(inst);
            }
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareLossRow {
    pub n: usize,
    pub t_po: f64,
    pub t_ww: f64,
    pub wl: f64,
}

impl WelfareLossRow {
    pub const HEADER: [&'static str; 4] = ["n", "t_po", "t_ww", "wl"];
}

/// Average utility under WW against the unique PO allocation on the
/// disjoint-support instances of sizes `n_min..=n_max`.
pub fn welfare_loss_curve(n_min: usize, n_max: usize) -> Result<Vec<WelfareLossRow>> {
    if n_min < 2 || n_min > n_max {
        return Err(Error::Domain(format!(
            "need 2 <= n_min <= n_max, got {n_min}..{n_max}"
        )));
    }
    (n_min..=n_max)
        .map(|n| {
            let inst = disjoint_support_instance(n)?;
            let cuts: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
            let order: Vec<usize> = (0..n).collect();
            let po = crate::allocation::Allocation::from_cuts(&cuts, &order)?;
            let t_po = welfare_metrics(&inst, &po)?.average;
            let t_ww = welfare_metrics(&inst, &run_ww(&inst)?.allocation)?.average;
            Ok(WelfareLossRow {
                n,
                t_po,
                t_ww,
                wl: t_po - t_ww,
            })
        })
        .collect()
}

/// Audited outcome of one mechanism on one instance.
#[derive(Debug, Clone)]
pub struct MechanismRow {
    pub mechanism: Mechanism,
    pub utilities: Vec<f64>,
    pub sum: f64,
    pub envy_free: AuditReport,
    pub proportional: AuditReport,
    pub pareto: ParetoVerdict,
    pub cut_queries: usize,
    pub eval_queries: usize,
}

#[derive(Debug, Clone)]
pub enum RowOutcome {
    Ran(Box<MechanismRow>),
    /// The mechanism's prerequisites failed on this instance.
    Inapplicable { mechanism: Mechanism, reason: String },
}

impl RowOutcome {
    pub fn mechanism(&self) -> Mechanism {
        match self {
            RowOutcome::Ran(row) => row.mechanism,
            RowOutcome::Inapplicable { mechanism, .. } => *mechanism,
        }
    }

    pub fn row(&self) -> Option<&MechanismRow> {
        match self {
            RowOutcome::Ran(row) => Some(row),
            RowOutcome::Inapplicable { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<RowOutcome>,
    /// `(a, b)` when mechanism `a` Pareto dominates `b` on this instance.
    pub dominance: Vec<(Mechanism, Mechanism)>,
    /// Mechanisms whose utility sum is the largest among the rows that ran.
    pub max_sum: Vec<Mechanism>,
}

impl ComparisonTable {
    pub fn get(&self, mechanism: Mechanism) -> Option<&MechanismRow> {
        self.rows
            .iter()
            .find(|r| r.mechanism() == mechanism)
            .and_then(RowOutcome::row)
    }

    pub fn dominates(&self, a: Mechanism, b: Mechanism) -> bool {
        self.dominance.contains(&(a, b))
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "mechanism",
        "utilities",
        "sum",
        "envy_free",
        "proportional",
        "pareto",
        "cut_queries",
        "eval_queries",
        "dominates_ww",
        "max_sum",
    ];

    /// One record per mechanism, in [`Self::CSV_HEADER`] order. Numbers are
    /// formatted by `fmt`.
    pub fn csv_records(&self, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|outcome| match outcome {
                RowOutcome::Ran(r) => vec![
                    r.mechanism.tag().to_string(),
                    r.utilities.iter().map(|&u| fmt(u)).collect::<Vec<_>>().join(" "),
                    fmt(r.sum),
                    yes_no(r.envy_free.passed).into(),
                    yes_no(r.proportional.passed).into(),
                    format!("{:?}", r.pareto.verdict),
                    r.cut_queries.to_string(),
                    r.eval_queries.to_string(),
                    yes_no(self.dominates(r.mechanism, Mechanism::WangWu)).into(),
                    yes_no(self.max_sum.contains(&r.mechanism)).into(),
                ],
                RowOutcome::Inapplicable { mechanism, reason } => {
                    let mut rec = vec![mechanism.tag().to_string(), String::new(), String::new()];
                    rec.extend(std::iter::repeat_n(String::new(), 2));
                    rec.push(format!("Inapplicable: {reason}"));
                    rec.extend(std::iter::repeat_n(String::new(), 4));
                    rec
                }
            })
            .collect()
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Mechanisms compared in the summary table.
pub const COMPARED: [Mechanism; 4] = [
    Mechanism::WangWu,
    Mechanism::Utilitarian,
    Mechanism::LeftmostLeaves,
    Mechanism::ModifiedWangWu,
];

/// Runs the four mechanisms, audits every output and records which outputs
/// dominate which.
pub fn compare_mechanisms(instance: &CakeInstance) -> Result<ComparisonTable> {
    let mut rows = Vec::with_capacity(COMPARED.len());
    for m in COMPARED {
        match m.run(instance) {
            Ok(res) => {
                let a = &res.allocation;
                rows.push(RowOutcome::Ran(Box::new(MechanismRow {
                    mechanism: m,
                    sum: res.utilities.iter().sum(),
                    envy_free: audit_envy_free(instance, a, AUDIT_TOL)?,
                    proportional: audit_proportional(instance, a, AUDIT_TOL)?,
                    pareto: audit_pareto_sp(instance, a)?,
                    cut_queries: res.log.cut_count(),
                    eval_queries: res.log.eval_count(),
                    utilities: res.utilities,
                })));
            }
            Err(e) if e.is_prerequisite() => rows.push(RowOutcome::Inapplicable {
                mechanism: m,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }

    let ran: Vec<&MechanismRow> = rows.iter().filter_map(RowOutcome::row).collect();
    let mut dominance = Vec::new();
    for a in &ran {
        for b in &ran {
            if a.mechanism != b.mechanism && dominates(&a.utilities, &b.utilities, AUDIT_TOL) {
                dominance.push((a.mechanism, b.mechanism));
            }
        }
    }
    let best = ran.iter().map(|r| r.sum).fold(f64::NEG_INFINITY, f64::max);
    let max_sum = ran
        .iter()
        .filter(|r| r.sum >= best - AUDIT_TOL)
        .map(|r| r.mechanism)
        .collect();
    Ok(ComparisonTable {
        rows,
        dominance,
        max_sum,
    })
}

/// Properties a mechanism showed on every instance of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropertyRow {
    pub mechanism: Mechanism,
    /// PO on every instance.
    pub efficient: bool,
    pub envy_free: bool,
    /// Largest utility sum among the compared mechanisms on every instance.
    pub max_utility: bool,
    /// Weakly dominates WW everywhere and strictly somewhere; `None` for WW itself.
    pub dominates_ww: Option<bool>,
}

/// Mechanism-level summary: a property holds only if the audits confirm it on
/// every instance, so one counterexample is enough to rule it out.
pub fn property_matrix(instances: &[CakeInstance]) -> Result<Vec<PropertyRow>> {
    let tables = instances
        .iter()
        .map(compare_mechanisms)
        .collect::<Result<Vec<_>>>()?;
    Ok(COMPARED
        .iter()
        .map(|&m| {
            let rows: Vec<Option<&MechanismRow>> = tables.iter().map(|t| t.get(m)).collect();
            let all = |f: &dyn Fn(&MechanismRow) -> bool| rows.iter().all(|r| r.is_some_and(f));
            let dominates_ww = (m != Mechanism::WangWu).then(|| {
                let weak = tables.iter().zip(&rows).all(|(t, r)| {
                    match (r, t.get(Mechanism::WangWu)) {
                        (Some(r), Some(ww)) => r
                            .utilities
                            .iter()
                            .zip(&ww.utilities)
                            .all(|(a, b)| *a >= b - AUDIT_TOL),
                        _ => false,
                    }
                });
                weak && tables.iter().any(|t| t.dominates(m, Mechanism::WangWu))
            });
            PropertyRow {
                mechanism: m,
                efficient: all(&|r| r.pareto.is_po()),
                envy_free: all(&|r| r.envy_free.passed),
                max_utility: tables.iter().all(|t| t.max_sum.contains(&m)),
                dominates_ww,
            }
        })
        .collect())
}
