use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use hybridgrid::canonical::to_canonical_string;
use hybridgrid::cost::{plan_cost, savings_vs_reference, CostAssumptions};
use hybridgrid::dcopf::{self, OpfProblem};
use hybridgrid::grid::{load_case, save_case, Network};
use hybridgrid::pipeline::{self, Evaluation, PipelineInputs, Stage, StageError, WeekSelection};
use hybridgrid::planner::{build_transition, count_spanning_trees, default_catalog, load_catalog, RatingConfig, TransitionPlan};
use hybridgrid::preprocess::{preprocess, PreprocessOptions};
use hybridgrid::{Error, Result};

/// Hybrid AC/HVDC transition planning.
#[derive(Parser)]
#[command(name = "hybridgrid", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce an expansion plan to its base grid and normalize it.
    Preprocess {
        case: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Keep all new lines.
        #[arg(long)]
        skip_reduce: bool,
        /// CSV of removed lines (id, km).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve the DC optimal power flow at peak or for one profile hour.
    Opf {
        case: PathBuf,
        #[arg(long, requires = "profiles")]
        hour: Option<usize>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Solution JSON; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select conversions and write the converted grid.
    Plan {
        case: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// RatingConfig JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Investment cost of a plan, optionally against a reference plan.
    Cost {
        plan: PathBuf,
        case: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        assumptions: Option<PathBuf>,
        /// Report file; `.csv` selects CSV, anything else JSON.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Hourly OPF of two grid variants over profile weeks.
    Evaluate {
        case_a: PathBuf,
        case_b: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// `auto` or comma-separated week start hours.
        #[arg(long, default_value = "auto")]
        weeks: WeekSelection,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Preprocess, plan, cost and evaluate in one go.
    Pipeline {
        case: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        assumptions: Option<PathBuf>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        weeks: WeekSelection,
        #[arg(long)]
        skip_reduce: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Number of spanning trees of the AC branch graph.
    CountTrees { case: PathBuf },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Parse { path: path.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn print_json(value: &serde_json::Value) {
    print!("{}", to_canonical_string(value).expect("json value"));
}

fn profiles(path: Option<&Path>) -> Result<Option<BTreeMap<String, Vec<f64>>>> {
    path.map(read_json).transpose()
}

fn rating_config(path: Option<&Path>) -> Result<RatingConfig> {
    let cfg: RatingConfig = path.map(read_json).transpose()?.unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

fn catalog(path: Option<&Path>) -> Result<Vec<hybridgrid::planner::ConverterModule>> {
    path.map_or_else(|| Ok(default_catalog()), load_catalog)
}

fn assumptions(path: Option<&Path>) -> Result<CostAssumptions> {
    path.map_or_else(|| Ok(CostAssumptions::default()), CostAssumptions::load)
}

fn variant_ids(a: &Path, b: &Path) -> (String, String) {
    let stem = |p: &Path| p.file_stem().map_or("case".into(), |s| s.to_string_lossy().into_owned());
    let (x, y) = (stem(a), stem(b));
    if x == y {
        (format!("{x}_a"), format!("{y}_b"))
    } else {
        (x, y)
    }
}

fn peak_solution(net: &Network) -> Result<hybridgrid::dcopf::OpfSolution> {
    let sol = dcopf::solve(&OpfProblem::peak(net))?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("peak OPF is infeasible: {}", sol.cause.unwrap_or_default())));
    }
    Ok(sol)
}

fn run(cmd: Command) -> Result<(), StageError> {
    let load = |e| StageError::new(Stage::Load, e);
    match cmd {
        Command::Preprocess { case, out, skip_reduce, report } => {
            let net = load_case(&case).map_err(load)?;
            let (base, removal) = preprocess(&net, PreprocessOptions { skip_reduce })
                .map_err(|e| StageError::new(Stage::Preprocess, e))?;
            let write = |e| StageError::new(Stage::Write, e);
            save_case(&base, &out).map_err(write)?;
            if let Some(path) = report {
                write_text(&path, &removal.to_csv()).map_err(write)?;
            }
            print_json(&json!({
                "buses": base.buses.len(),
                "branches": base.branches.len(),
                "generators": base.generators.len(),
                "removed_lines": removal.count,
                "removed_km": removal.total_km,
            }));
        }
        Command::Opf { case, hour, profiles: profile_path, out } => {
            let net = load_case(&case).map_err(load)?;
            let extra = profiles(profile_path.as_deref()).map_err(load)?;
            let solve = |e| StageError::new(Stage::PeakOpf, e);
            let sol = match hour {
                Some(h) => {
                    let merged = pipeline::merged_profiles(&net, extra.as_ref());
                    let prob = OpfProblem::at_hour(&net, &merged, h).map_err(solve)?;
                    dcopf::solve(&prob)
                }
                None => dcopf::solve(&OpfProblem::peak(&net)),
            }
            .map_err(solve)?;
            let text = to_canonical_string(&sol).expect("solution serializes");
            match out {
                Some(path) => {
                    write_text(&path, &text).map_err(|e| StageError::new(Stage::Write, e))?;
                    print_json(&json!({"status": sol.status, "total_cost": sol.total_cost}));
                }
                None => print!("{text}"),
            }
        }
        Command::Plan { case, catalog: catalog_path, config, out, grid_out } => {
            let net = load_case(&case).map_err(load)?;
            let modules = catalog(catalog_path.as_deref()).map_err(load)?;
            let cfg = rating_config(config.as_deref()).map_err(load)?;
            let sol = peak_solution(&net).map_err(|e| StageError::new(Stage::PeakOpf, e))?;
            let (plan, converted) =
                build_transition(&net, &sol, &modules, &cfg).map_err(|e| StageError::new(Stage::Plan, e))?;
            let write = |e| StageError::new(Stage::Write, e);
            write_text(&out, &plan.to_json()).map_err(write)?;
            if let Some(path) = grid_out {
                save_case(&converted, &path).map_err(write)?;
            }
            print_json(&serde_json::to_value(&plan.summary).expect("summary serializes"));
        }
        Command::Cost { plan, case, reference, assumptions: assumption_path, out } => {
            let plan: TransitionPlan = read_json(&plan).map_err(load)?;
            let net = load_case(&case).map_err(load)?;
            let reference = reference.map(load_case).transpose().map_err(load)?;
            let rates = assumptions(assumption_path.as_deref()).map_err(load)?;
            let mut report = plan_cost(&plan, &net, &rates);
            if let Some(r) = &reference {
                report = report.with_reference(&savings_vs_reference(&net, r, &rates));
            }
            let csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            let text = if csv { report.to_csv() } else { report.to_json() };
            write_text(&out, &text).map_err(|e| StageError::new(Stage::Write, e))?;
            print_json(&json!({
                "grand_total_keur": report.grand_total_keur,
                "comparison": report.comparison,
            }));
        }
        Command::Evaluate { case_a, case_b, profiles: profile_path, weeks, out } => {
            let a = load_case(&case_a).map_err(load)?;
            let b = load_case(&case_b).map_err(load)?;
            let extra = profiles(profile_path.as_deref()).map_err(load)?;
            let (id_a, id_b) = variant_ids(&case_a, &case_b);
            let mut merged = pipeline::merged_profiles(&b, None);
            merged.extend(pipeline::merged_profiles(&a, extra.as_ref()));
            let eval = |e| StageError::new(Stage::Evaluate, e);
            let windows = pipeline::evaluation_windows(&a, &merged, &weeks).map_err(eval)?;
            let result = pipeline::evaluate((&id_a, &a), (&id_b, &b), &merged, &windows).map_err(eval)?;
            let write = |e| StageError::new(Stage::Write, e);
            let runs_a = result.windows.iter().map(|w| &w.base).collect();
            let runs_b = result.windows.iter().map(|w| &w.htg).collect();
            write_text(&out.join(&id_a).join("run.json"), &Evaluation::runs_json(runs_a)).map_err(write)?;
            write_text(&out.join(&id_b).join("run.json"), &Evaluation::runs_json(runs_b)).map_err(write)?;
            write_text(&out.join("compare.csv"), &result.to_csv()).map_err(write)?;
            print_json(&json!({
                "windows": windows.iter().map(|w| [w.start, w.end]).collect::<Vec<_>>(),
                "total_a": result.total_base(),
                "total_b": result.total_htg(),
            }));
        }
        Command::Pipeline { case, catalog: catalog_path, config, assumptions: assumption_path, profiles: profile_path, weeks, skip_reduce, out } => {
            let inputs = PipelineInputs {
                case: load_case(&case).map_err(load)?,
                catalog: catalog(catalog_path.as_deref()).map_err(load)?,
                rating: rating_config(config.as_deref()).map_err(load)?,
                assumptions: assumptions(assumption_path.as_deref()).map_err(load)?,
                profiles: profiles(profile_path.as_deref()).map_err(load)?,
                weeks,
                preprocess: PreprocessOptions { skip_reduce },
            };
            let output = pipeline::run_pipeline(&inputs)?;
            output.write(&out).map_err(|e| StageError::new(Stage::Write, e))?;
            print_json(&json!({
                "artifacts": pipeline::ARTIFACTS,
                "summary": output.plan.summary,
                "grand_total_keur": output.cost_report.grand_total_keur,
                "total_base": output.evaluation.total_base(),
                "total_htg": output.evaluation.total_htg(),
            }));
        }
        Command::CountTrees { case } => {
            let net = load_case(&case).map_err(load)?;
            print_json(&json!({"spanning_trees": count_spanning_trees(&net).to_string()}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
