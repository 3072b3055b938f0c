//! Hourly OPF runs over profile weeks and comparison of two grid variants.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcopf::{self, OpfProblem, OpfStatus};
use crate::error::{Error, Result};
use crate::grid::{GeneratorKind, Network};

pub const WEEK_HOURS: usize = 168;
pub const YEAR_HOURS: usize = 8760;
/// Caps the worker count of the hourly solves.
pub const THREADS_ENV: &str = "HYBRIDGRID_THREADS";
const NOISE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourStatus {
    Optimal,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourResult {
    pub hour: usize,
    pub total_load: f64,
    pub res_capacity: f64,
    /// EUR/h; absent unless the hour solved.
    pub total_cost: Option<f64>,
    pub status: HourStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    /// MW lost in HVDC links.
    pub hvdc_losses: f64,
    /// Highest bus price of the hour, EUR/MWh.
    pub max_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub total_cost: f64,
    pub max_load_hour: usize,
    pub infeasible_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub variant_id: String,
    pub hours: Vec<HourResult>,
    pub aggregate: Aggregate,
}

impl ScenarioRun {
    pub fn to_json(&self) -> String {
        crate::canonical::to_canonical_string(self).expect("run serializes")
    }

    pub fn hour_range(&self) -> Range<usize> {
        match (self.hours.first(), self.hours.last()) {
            (Some(a), Some(b)) => a.hour..b.hour + 1,
            _ => 0..0,
        }
    }
}

/// Worker count from `HYBRIDGRID_THREADS`; `None` leaves rayon's default.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0)
}

fn referenced_profiles(net: &Network) -> BTreeSet<&str> {
    let loads = net.buses.iter().filter_map(|b| b.load_profile_id.as_deref());
    let res = net.generators.iter().filter_map(|g| g.res_profile_id.as_deref());
    loads.chain(res).collect()
}

fn check_profiles(net: &Network, profiles: &BTreeMap<String, Vec<f64>>, hours: &Range<usize>) -> Result<()> {
    for id in referenced_profiles(net) {
        let series = profiles.get(id).ok_or_else(|| Error::Profile(format!("missing profile {id}")))?;
        if series.len() < hours.end {
            return Err(Error::Profile(format!(
                "profile {id} has {} hours, run needs {}",
                series.len(),
                hours.end
            )));
        }
    }
    Ok(())
}

fn solve_hour(net: &Network, profiles: &BTreeMap<String, Vec<f64>>, hour: usize) -> HourResult {
    let mut result = HourResult {
        hour,
        total_load: 0.0,
        res_capacity: 0.0,
        total_cost: None,
        status: HourStatus::Failed,
        cause: None,
        hvdc_losses: 0.0,
        max_price: None,
    };
    let prob = match OpfProblem::at_hour(net, profiles, hour) {
        Ok(p) => p,
        Err(e) => {
            result.cause = Some(e.to_string());
            return result;
        }
    };
    result.total_load = prob.total_load();
    result.res_capacity = net
        .generators
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GeneratorKind::Res)
        .map(|(i, _)| prob.available_capacity(i))
        .sum();
    match dcopf::solve(&prob) {
        Ok(sol) if sol.status == OpfStatus::Optimal => {
            result.status = HourStatus::Optimal;
            result.total_cost = Some(sol.total_cost);
            result.hvdc_losses = sol.total_losses();
            result.max_price = sol.bus_prices.iter().map(|p| p.value).reduce(f64::max);
        }
        Ok(sol) => {
            result.status = HourStatus::Infeasible;
            result.cause = sol.cause;
        }
        Err(e) => result.cause = Some(e.to_string()),
    }
    result
}

/// One OPF per hour of `hours`, in hour order. Hours that fail are
/// recorded and the run continues.
pub fn run_week(
    variant_id: &str,
    net: &Network,
    profiles: &BTreeMap<String, Vec<f64>>,
    hours: Range<usize>,
) -> Result<ScenarioRun> {
    check_profiles(net, profiles, &hours)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Solver(format!("cannot start worker pool: {e}")))?;
    let results: Vec<HourResult> =
        pool.install(|| hours.clone().into_par_iter().map(|h| solve_hour(net, profiles, h)).collect());
    Ok(ScenarioRun { variant_id: variant_id.to_string(), aggregate: aggregate(&results), hours: results })
}

fn aggregate(hours: &[HourResult]) -> Aggregate {
    let mut max_load_hour = hours.first().map_or(0, |h| h.hour);
    let mut max_load = f64::NEG_INFINITY;
    for h in hours {
        if h.total_load > max_load {
            max_load = h.total_load;
            max_load_hour = h.hour;
        }
    }
    Aggregate {
        total_cost: hours.iter().filter_map(|h| h.total_cost).sum(),
        max_load_hour,
        infeasible_count: hours.iter().filter(|h| h.status != HourStatus::Optimal).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub hour: usize,
    pub total_load: f64,
    pub res_capacity: f64,
    pub cost_a: Option<f64>,
    pub cost_b: Option<f64>,
    /// `cost_b - cost_a`.
    pub delta: Option<f64>,
    pub relative_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub variant_a: String,
    pub variant_b: String,
    pub rows: Vec<CompareRow>,
    /// Totals over hours where both variants solved.
    pub total_a: f64,
    pub total_b: f64,
    pub weekly_delta: f64,
    pub max_relative_gap: f64,
}

impl RunComparison {
    pub fn relative_weekly_gap(&self) -> f64 {
        if self.total_a == 0.0 {
            0.0
        } else {
            self.weekly_delta / self.total_a
        }
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| crate::canonical::round_significant(x).to_string()).unwrap_or_default();
        let mut out = format!(
            "hour,load_mw,res_mw,cost_{},cost_{},delta,relative_delta\n",
            self.variant_a, self.variant_b
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.hour,
                fmt(Some(r.total_load)),
                fmt(Some(r.res_capacity)),
                fmt(r.cost_a),
                fmt(r.cost_b),
                fmt(r.delta),
                fmt(r.relative_delta)
            ));
        }
        out
    }
}

/// `y - x`, with differences at the level of solver round-off reported as 0.
fn cost_delta(x: f64, y: f64) -> f64 {
    let d = y - x;
    if d.abs() <= NOISE * x.abs().max(y.abs()) {
        0.0
    } else {
        d
    }
}

pub fn compare(a: &ScenarioRun, b: &ScenarioRun) -> Result<RunComparison> {
    let hours_a: Vec<usize> = a.hours.iter().map(|h| h.hour).collect();
    let hours_b: Vec<usize> = b.hours.iter().map(|h| h.hour).collect();
    if hours_a != hours_b {
        return Err(Error::Mismatch(format!(
            "runs cover different hours: {:?} vs {:?}",
            a.hour_range(),
            b.hour_range()
        )));
    }
    let mut rows = Vec::with_capacity(a.hours.len());
    let (mut total_a, mut total_b, mut max_gap) = (0.0, 0.0, 0.0f64);
    for (ha, hb) in a.hours.iter().zip(&b.hours) {
        let delta = ha.total_cost.zip(hb.total_cost).map(|(x, y)| cost_delta(x, y));
        let relative_delta = ha.total_cost.zip(delta).map(|(x, d)| if x == 0.0 { 0.0 } else { d / x });
        if let (Some(x), Some(y)) = (ha.total_cost, hb.total_cost) {
            total_a += x;
            total_b += y;
        }
        if let Some(r) = relative_delta {
            max_gap = max_gap.max(r.abs());
        }
        rows.push(CompareRow {
            hour: ha.hour,
            total_load: ha.total_load,
            res_capacity: ha.res_capacity,
            cost_a: ha.total_cost,
            cost_b: hb.total_cost,
            delta,
            relative_delta,
        });
    }
    Ok(RunComparison {
        variant_a: a.variant_id.clone(),
        variant_b: b.variant_id.clone(),
        rows,
        total_a,
        total_b,
        weekly_delta: total_b - total_a,
        max_relative_gap: max_gap,
    })
}

/// System load per hour for the first `hours` hours of the profiles.
pub fn total_load_series(net: &Network, profiles: &BTreeMap<String, Vec<f64>>, hours: usize) -> Result<Vec<f64>> {
    check_profiles(net, profiles, &(0..hours))?;
    Ok((0..hours)
        .map(|h| {
            net.buses
                .iter()
                .map(|b| b.load_mw * b.load_profile_id.as_ref().map_or(1.0, |id| profiles[id][h]))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtremeWeeks {
    pub min_week_start: usize,
    pub max_week_start: usize,
}

/// Week-aligned windows holding the minimum and maximum load hour of the
/// year. The first hour wins ties; the trailing partial week maps onto the
/// last full window.
pub fn find_extreme_weeks(total_load: &[f64], year_hours: usize) -> Result<ExtremeWeeks> {
    if year_hours < WEEK_HOURS || total_load.len() < year_hours {
        return Err(Error::Profile(format!(
            "load series has {} hours, need at least {} (and at least one week)",
            total_load.len(),
            year_hours
        )));
    }
    let year = &total_load[..year_hours];
    let (mut lo, mut hi) = (0, 0);
    for (h, &v) in year.iter().enumerate() {
        if v < year[lo] {
            lo = h;
        }
        if v > year[hi] {
            hi = h;
        }
    }
    let start = |h: usize| (h / WEEK_HOURS * WEEK_HOURS).min(year_hours - WEEK_HOURS);
    Ok(ExtremeWeeks { min_week_start: start(lo), max_week_start: start(hi) })
}
