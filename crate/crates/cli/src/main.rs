use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cakecut::allocation::{audit_envy_free, audit_proportional};
use cakecut::efficiency::{audit_pareto_sp, Verdict};
use cakecut::experiments::{
    compare_mechanisms, disjoint_support_instance, figure3_instance, unequal_slopes_instance,
    utilitarian_envy_instance, welfare_loss_curve, ComparisonTable, RowOutcome, WelfareLossRow,
};
use cakecut::{CakeInstance, Mechanism, AUDIT_TOL};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod files;
mod render;

// println! panics when stdout is a closed pipe (`cakecut ... | head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use files::{read_json, sig, sig_list, write_json, AllocationFile, InstanceFile};

/// Cake cutting with single-peaked valuations.
#[derive(Parser)]
#[command(name = "cakecut", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,

    /// Allow parts of the cake that no agent values.
    #[arg(long)]
    waste_tolerant: bool,
}

impl InstanceArgs {
    fn load(&self) -> Result<CakeInstance> {
        read_json::<InstanceFile>(&self.instance)?
            .to_instance(self.waste_tolerant)
            .with_context(|| format!("loading {}", self.instance.display()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism and report utilities and query counts.
    Run {
        #[arg(long, value_parser = parse_mechanism)]
        mechanism: Mechanism,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Where to write the allocation (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print every oracle query.
        #[arg(long)]
        transcript: bool,
    },
    /// Audit an allocation for envy-freeness, proportionality and Pareto optimality.
    Audit {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "ef,prop,po")]
        checks: Vec<CheckArg>,
        /// Numerical tolerance for the fairness checks.
        #[arg(long, default_value_t = AUDIT_TOL)]
        epsilon: f64,
    },
    /// Run every mechanism on one instance and tabulate the audits.
    Compare {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Reproduce an experiment.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentArg,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write one of the built-in instances as an instance file.
    Example {
        #[arg(value_enum)]
        name: ExampleArg,
        /// Agent count for `disjoint`.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the densities, and the allocation if one is given, as SVG.
    Render {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    Ef,
    Prop,
    Po,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Figure3,
    UtilitarianEnvy,
    UnequalSlopes,
    Disjoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    WelfareLoss,
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Mechanism::ALL.iter().map(|m| m.tag()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    ChecksFailed,
    Inapplicable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ChecksFailed) => ExitCode::from(1),
        Ok(Status::Inapplicable) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            let prereq = err
                .chain()
                .filter_map(|e| e.downcast_ref::<cakecut::Error>())
                .any(cakecut::Error::is_prerequisite);
            ExitCode::from(if prereq { 3 } else { 2 })
        }
    }
}

fn execute(command: Command) -> Result<Status> {
    match command {
        Command::Run {
            mechanism,
            instance,
            out,
            transcript,
        } => cmd_run(mechanism, &instance, out.as_deref(), transcript),
        Command::Audit {
            instance,
            allocation,
            checks,
            epsilon,
        } => cmd_audit(&instance, &allocation, &checks, epsilon),
        Command::Compare { instance, csv } => cmd_compare(&instance, csv.as_deref()),
        Command::Experiment {
            name: ExperimentArg::WelfareLoss,
            n_min,
            n_max,
            csv,
        } => cmd_welfare_loss(n_min, n_max, csv.as_deref()),
        Command::Example { name, n, out } => {
            let instance = match name {
                ExampleArg::Figure3 => figure3_instance(),
                ExampleArg::UtilitarianEnvy => utilitarian_envy_instance(),
                ExampleArg::UnequalSlopes => unequal_slopes_instance(),
                ExampleArg::Disjoint => disjoint_support_instance(n)?,
            };
            write_json(&out, &InstanceFile::from_instance(&instance))?;
            Ok(Status::Ok)
        }
        Command::Render {
            instance,
            allocation,
            out,
        } => cmd_render(&instance, allocation.as_deref(), &out),
    }
}

fn cmd_run(mechanism: Mechanism, args: &InstanceArgs, out: Option<&Path>, transcript: bool) -> Result<Status> {
    let instance = args.load()?;
    let result = mechanism.run(&instance)?;
    let marks_label = match mechanism {
        Mechanism::Utilitarian | Mechanism::LeftmostLeaves => "cuts",
        _ => "marks",
    };
    out!("mechanism {mechanism}");
    out!("utilities {}", sig_list(&result.utilities));
    out!("sum {}", sig(result.utilities.iter().sum()));
    out!("{marks_label} {}", sig_list(&result.marks));
    out!(
        "queries cut {} eval {}",
        result.log.cut_count(),
        result.log.eval_count()
    );
    if transcript {
        out!("{}", result.log.to_text().trim_end());
    }
    match out {
        Some(path) => write_json(path, &AllocationFile::from_allocation(&result.allocation))?,
        None => {
            for (agent, piece) in result.allocation.pieces().iter().enumerate() {
                let ivs: Vec<String> = piece
                    .iter()
                    .map(|iv| format!("[{}, {}]", sig(iv.start), sig(iv.end)))
                    .collect();
                out!("agent {} {}", agent + 1, ivs.join(" "));
            }
        }
    }
    Ok(Status::Ok)
}

fn cmd_audit(args: &InstanceArgs, allocation: &Path, checks: &[CheckArg], epsilon: f64) -> Result<Status> {
    if epsilon.is_nan() || epsilon < 0.0 {
        bail!("--epsilon must be a non-negative number");
    }
    let instance = args.load()?;
    let alloc = read_json::<AllocationFile>(allocation)?
        .to_allocation()
        .with_context(|| format!("loading {}", allocation.display()))?;
    let (mut failed, mut inapplicable) = (false, false);
    for check in [CheckArg::Ef, CheckArg::Prop, CheckArg::Po] {
        if !checks.contains(&check) {
            continue;
        }
        match check {
            CheckArg::Ef => {
                let report = audit_envy_free(&instance, &alloc, epsilon)?;
                failed |= !report.passed;
                out!("{report}");
            }
            CheckArg::Prop => {
                let report = audit_proportional(&instance, &alloc, epsilon)?;
                failed |= !report.passed;
                out!("{report}");
            }
            CheckArg::Po => {
                let verdict = audit_pareto_sp(&instance, &alloc)?;
                match verdict.verdict {
                    Verdict::PO => {}
                    Verdict::NotPO => failed = true,
                    Verdict::Inapplicable => inapplicable = true,
                }
                out!("{verdict}");
            }
        }
    }
    Ok(if failed {
        Status::ChecksFailed
    } else if inapplicable {
        Status::Inapplicable
    } else {
        Status::Ok
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn print_table(table: &ComparisonTable) {
    out!(
        "{:<10} {:<44} {:<14} {:<4} {:<5} {:<13} {:>4} {:>5} {:<8} {}",
        "mechanism", "utilities", "sum", "ef", "prop", "po", "cuts", "evals", "dom-ww", "max-sum"
    );
    for outcome in &table.rows {
        match outcome {
            RowOutcome::Ran(r) => out!(
                "{:<10} {:<44} {:<14} {:<4} {:<5} {:<13} {:>4} {:>5} {:<8} {}",
                r.mechanism.tag(),
                sig_list(&r.utilities),
                sig(r.sum),
                yes_no(r.envy_free.passed),
                yes_no(r.proportional.passed),
                format!("{:?}", r.pareto.verdict),
                r.cut_queries,
                r.eval_queries,
                if r.mechanism == Mechanism::WangWu {
                    "-"
                } else {
                    yes_no(table.dominates(r.mechanism, Mechanism::WangWu))
                },
                yes_no(table.max_sum.contains(&r.mechanism)),
            ),
            RowOutcome::Inapplicable { mechanism, reason } => {
                out!("{:<10} inapplicable: {reason}", mechanism.tag())
            }
        }
    }
    if !table.dominance.is_empty() {
        let pairs: Vec<String> = table
            .dominance
            .iter()
            .map(|(a, b)| format!("{a}>{b}"))
            .collect();
        out!("dominance {}", pairs.join(" "));
    }
}

fn cmd_compare(args: &InstanceArgs, csv_path: Option<&Path>) -> Result<Status> {
    let instance = args.load()?;
    let table = compare_mechanisms(&instance)?;
    print_table(&table);
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(ComparisonTable::CSV_HEADER)?;
        for rec in table.csv_records(sig) {
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(Status::Ok)
}

fn cmd_welfare_loss(n_min: usize, n_max: usize, csv_path: Option<&Path>) -> Result<Status> {
    let rows = welfare_loss_curve(n_min, n_max)?;
    out!("{}", WelfareLossRow::HEADER.join(" "));
    for r in &rows {
        out!("{} {} {} {}", r.n, sig(r.t_po), sig(r.t_ww), sig(r.wl));
    }
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(WelfareLossRow::HEADER)?;
        for r in &rows {
            w.write_record([r.n.to_string(), sig(r.t_po), sig(r.t_ww), sig(r.wl)])?;
        }
        w.flush()?;
    }
    Ok(Status::Ok)
}

fn cmd_render(args: &InstanceArgs, allocation: Option<&Path>, out: &Path) -> Result<Status> {
    let instance = args.load()?;
    let alloc = match allocation {
        Some(path) => {
            let alloc = read_json::<AllocationFile>(path)?.to_allocation()?;
            if alloc.agent_count() != instance.len() {
                bail!(
                    "allocation has {} agents, instance has {}",
                    alloc.agent_count(),
                    instance.len()
                );
            }
            Some(alloc)
        }
        None => None,
    };
    let svg = render::render_svg(&instance, alloc.as_ref());
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    Ok(Status::Ok)
}
