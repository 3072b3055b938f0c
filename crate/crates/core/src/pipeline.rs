//! End-to-end run: preprocess, peak OPF, transition plan, costing and the
//! two-variant evaluation. Every artifact is computed in memory before the
//! first file is written.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::cost::{plan_cost, savings_vs_reference, CostAssumptions, CostReport};
use crate::dcopf::{self, OpfProblem, OpfSolution};
use crate::error::{Error, Result};
use crate::grid::{to_case_string, Network};
use crate::harness::{self, RunComparison, ScenarioRun, WEEK_HOURS, YEAR_HOURS};
use crate::planner::{build_transition, ConverterModule, RatingConfig, TransitionPlan};
use crate::preprocess::{preprocess, PreprocessOptions, RemovalReport};

pub const BASE_VARIANT: &str = "base";
pub const HTG_VARIANT: &str = "htg";

pub const ARTIFACTS: [&str; 6] =
    ["base_case.json", "peak_opf.json", "plan.json", "converted_case.json", "cost_report.json", "compare.csv"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Preprocess,
    PeakOpf,
    Plan,
    Cost,
    Evaluate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Preprocess => "preprocess",
            Stage::PeakOpf => "peak-opf",
            Stage::Plan => "plan",
            Stage::Cost => "cost",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn new(stage: Stage, source: Error) -> Self {
        Self { stage, source }
    }

    /// 2 for solver failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.source.is_solver_failure() {
            2
        } else {
            1
        }
    }
}

/// Which hours the evaluation covers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum WeekSelection {
    /// Extreme-load weeks of a full year of profiles, otherwise the first
    /// week the profiles cover.
    #[default]
    Auto,
    Starts(Vec<usize>),
}

impl std::str::FromStr for WeekSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(WeekSelection::Auto);
        }
        let starts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad week start {p:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(WeekSelection::Starts(starts))
    }
}

/// Profiles referenced by `net` with `overrides` taking precedence over the
/// ones stored in the case.
pub fn merged_profiles(net: &Network, overrides: Option<&BTreeMap<String, Vec<f64>>>) -> BTreeMap<String, Vec<f64>> {
    let mut out = net.profiles.clone();
    if let Some(extra) = overrides {
        out.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    out
}

fn covered_hours(net: &Network, profiles: &BTreeMap<String, Vec<f64>>) -> Option<usize> {
    let loads = net.buses.iter().filter_map(|b| b.load_profile_id.as_ref());
    let res = net.generators.iter().filter_map(|g| g.res_profile_id.as_ref());
    loads.chain(res).map(|id| profiles.get(id).map_or(0, Vec::len)).min()
}

/// Hour windows to evaluate, in ascending order without duplicates.
pub fn evaluation_windows(
    net: &Network,
    profiles: &BTreeMap<String, Vec<f64>>,
    weeks: &WeekSelection,
) -> Result<Vec<Range<usize>>> {
    let mut starts = match weeks {
        WeekSelection::Starts(starts) => starts.iter().map(|&s| s..s + WEEK_HOURS).collect(),
        WeekSelection::Auto => match covered_hours(net, profiles) {
            None => vec![0..1],
            Some(0) => return Err(Error::Profile("profiles are empty".into())),
            Some(n) if n >= YEAR_HOURS => {
                let load = harness::total_load_series(net, profiles, YEAR_HOURS)?;
                let w = harness::find_extreme_weeks(&load, YEAR_HOURS)?;
                vec![w.min_week_start..w.min_week_start + WEEK_HOURS, w.max_week_start..w.max_week_start + WEEK_HOURS]
            }
            Some(n) => vec![0..n.min(WEEK_HOURS)],
        },
    };
    starts.sort_by_key(|r| r.start);
    starts.dedup();
    Ok(starts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub base: ScenarioRun,
    pub htg: ScenarioRun,
    pub comparison: RunComparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub windows: Vec<WindowResult>,
}

impl Evaluation {
    pub fn total_base(&self) -> f64 {
        self.windows.iter().map(|w| w.comparison.total_a).sum()
    }

    pub fn total_htg(&self) -> f64 {
        self.windows.iter().map(|w| w.comparison.total_b).sum()
    }

    /// All windows in one CSV with a single header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.windows.iter().enumerate() {
            let csv = w.comparison.to_csv();
            let body = if i == 0 { csv.as_str() } else { csv.split_once('\n').map_or("", |(_, rest)| rest) };
            out.push_str(body);
        }
        out
    }

    pub fn runs_json(runs: Vec<&ScenarioRun>) -> String {
        crate::canonical::to_canonical_string(&runs).expect("runs serialize")
    }
}

/// Hourly runs of both variants over `windows`.
pub fn evaluate(
    base: (&str, &Network),
    htg: (&str, &Network),
    profiles: &BTreeMap<String, Vec<f64>>,
    windows: &[Range<usize>],
) -> Result<Evaluation> {
    let mut out = Vec::with_capacity(windows.len());
    for w in windows {
        let a = harness::run_week(base.0, base.1, profiles, w.clone())?;
        let b = harness::run_week(htg.0, htg.1, profiles, w.clone())?;
        let comparison = harness::compare(&a, &b)?;
        out.push(WindowResult { base: a, htg: b, comparison });
    }
    Ok(Evaluation { windows: out })
}

#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub case: Network,
    pub catalog: Vec<ConverterModule>,
    pub rating: RatingConfig,
    pub assumptions: CostAssumptions,
    /// Overrides for the profiles stored in the case.
    pub profiles: Option<BTreeMap<String, Vec<f64>>>,
    pub weeks: WeekSelection,
    pub preprocess: PreprocessOptions,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub base_case: Network,
    pub removal: RemovalReport,
    pub peak_opf: OpfSolution,
    pub plan: TransitionPlan,
    pub converted_case: Network,
    pub cost_report: CostReport,
    pub evaluation: Evaluation,
}

impl PipelineOutput {
    /// Artifact file names and contents, in the order of [`ARTIFACTS`].
    pub fn artifacts(&self) -> Vec<(&'static str, String)> {
        let contents = [
            to_case_string(&self.base_case),
            crate::canonical::to_canonical_string(&self.peak_opf).expect("solution serializes"),
            self.plan.to_json(),
            to_case_string(&self.converted_case),
            self.cost_report.to_json(),
            self.evaluation.to_csv(),
        ];
        ARTIFACTS.into_iter().zip(contents).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        for (name, text) in self.artifacts() {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|source| Error::Io { path, source })?;
        }
        Ok(())
    }
}

pub fn run_pipeline(inputs: &PipelineInputs) -> Result<PipelineOutput, StageError> {
    let at = |stage| move |e| StageError::new(stage, e);
    let (base_case, removal) = preprocess(&inputs.case, inputs.preprocess).map_err(at(Stage::Preprocess))?;

    let peak_opf = dcopf::solve(&OpfProblem::peak(&base_case)).map_err(at(Stage::PeakOpf))?;
    if !peak_opf.is_optimal() {
        let cause = peak_opf.cause.clone().unwrap_or_default();
        return Err(StageError::new(Stage::PeakOpf, Error::Solver(format!("peak OPF is infeasible: {cause}"))));
    }

    let (plan, converted_case) =
        build_transition(&base_case, &peak_opf, &inputs.catalog, &inputs.rating).map_err(at(Stage::Plan))?;

    inputs.assumptions.validate().map_err(at(Stage::Cost))?;
    let savings = savings_vs_reference(&base_case, &inputs.case, &inputs.assumptions);
    let cost_report = plan_cost(&plan, &converted_case, &inputs.assumptions).with_reference(&savings);

    let profiles = merged_profiles(&base_case, inputs.profiles.as_ref());
    let windows = evaluation_windows(&base_case, &profiles, &inputs.weeks).map_err(at(Stage::Evaluate))?;
    let evaluation = evaluate(
        (BASE_VARIANT, &base_case),
        (HTG_VARIANT, &converted_case),
        &profiles,
        &windows,
    )
    .map_err(at(Stage::Evaluate))?;

    Ok(PipelineOutput { base_case, removal, peak_opf, plan, converted_case, cost_report, evaluation })
}
