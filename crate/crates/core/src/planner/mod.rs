//! Transition from a meshed AC grid to the hybrid architecture.
//!
//! Every AC branch gets an upgrade suitability `w = mu + r` (transformers
//! additionally get the largest series resistance in the grid, which makes
//! them the preferred candidates). The minimum spanning tree under `w`
//! stays AC; all other branches are converted to HVDC with a demand-driven
//! target rating and a converter picked from a catalog.

mod converter;
mod trees;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dcopf::{hvdc_loss_fraction, OpfSolution};
use crate::error::{Error, Result};
use crate::grid::{Branch, BranchKind, HvdcLink, LinkOrigin, Network, REACTIVE_SHARE};

pub use converter::{default_catalog, load_catalog, parse_catalog, select_converter, ConverterChoice, ConverterModule};
pub use trees::{count_spanning_trees, select_conversions, Selection};

/// Upgrade suitability of one branch given its flow-limit multiplier and
/// the largest series resistance among all AC branches.
pub fn suitability(branch: &Branch, mu: f64, r_max: f64) -> f64 {
    match branch.kind {
        BranchKind::Line => mu + branch.r,
        BranchKind::Transformer => mu + branch.r + r_max,
    }
}

/// Suitabilities for every branch of `net`, in branch order.
pub fn suitability_weights(net: &Network, sol: &OpfSolution) -> Result<Vec<f64>> {
    check_solution(net, sol)?;
    let r_max = net.max_resistance();
    Ok(net.branches.iter().zip(&sol.mu).map(|(br, mu)| suitability(br, mu.value, r_max)).collect())
}

fn check_solution(net: &Network, sol: &OpfSolution) -> Result<()> {
    if !sol.is_optimal() {
        return Err(Error::Planning("planning requires an optimal power-flow solution".into()));
    }
    let matches = sol.mu.len() == net.branches.len()
        && sol.utilization.len() == net.branches.len()
        && net.branches.iter().zip(&sol.mu).all(|(br, mu)| br.id == mu.id);
    if !matches {
        return Err(Error::Planning("power-flow solution does not belong to this network".into()));
    }
    Ok(())
}

/// Thresholds and factors of the target-rating scheme. Utilizations are in
/// percent, `mu_tol` in EUR/MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    pub mu_tol: f64,
    pub u_high: f64,
    pub u_low: f64,
    pub up_factor: f64,
    pub high_factor: f64,
    pub mid_factor: f64,
    pub low_factor: f64,
}

impl Default for RatingConfig {
    fn default() -> Self {
        Self {
            mu_tol: 1e-6,
            u_high: 70.0,
            u_low: 30.0,
            up_factor: 2.0,
            high_factor: 1.0,
            mid_factor: 0.75,
            low_factor: 0.5,
        }
    }
}

impl RatingConfig {
    pub fn validate(&self) -> Result<()> {
        let factors = [self.up_factor, self.high_factor, self.mid_factor, self.low_factor];
        if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::validation("rating factors must be positive"));
        }
        if !(self.mu_tol >= 0.0 && self.u_low <= self.u_high) {
            return Err(Error::validation("rating thresholds require mu_tol >= 0 and u_low <= u_high"));
        }
        Ok(())
    }
}

/// Target MVA rating after conversion.
///
/// Congested branches are uprated; the others keep or shed capacity
/// according to their utilization at peak load.
pub fn target_rating(rating: f64, mu: f64, utilization: f64, cfg: &RatingConfig) -> f64 {
    let factor = if mu > cfg.mu_tol {
        cfg.up_factor
    } else if utilization >= cfg.u_high {
        cfg.high_factor
    } else if utilization >= cfg.u_low {
        cfg.mid_factor
    } else {
        cfg.low_factor
    };
    factor * rating
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub branch_id: u64,
    pub kind: BranchKind,
    pub original_rating: f64,
    pub mu: f64,
    pub utilization: f64,
    pub weight: f64,
    pub target_rating: f64,
    pub converter_id: String,
    pub module_count: u32,
    /// Installed converter capacity, MVA.
    pub installed_mva: f64,
    /// Installed capacity over the branch's original rating.
    pub capacity_factor: f64,
    pub link: HvdcLink,
}

impl Conversion {
    pub fn is_uprated(&self) -> bool {
        self.target_rating > self.original_rating
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub lines_converted: usize,
    pub transformers_converted: usize,
    pub km_converted: f64,
    pub average_capacity_factor: f64,
    pub line_capacity_factor: f64,
    pub transformer_capacity_factor: f64,
    pub uprated: usize,
    pub tree_branches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPlan {
    pub conversions: Vec<Conversion>,
    pub tree_branch_ids: Vec<u64>,
    pub summary: PlanSummary,
}

impl TransitionPlan {
    pub fn to_json(&self) -> String {
        crate::canonical::to_canonical_string(self).expect("plan serializes")
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Plans the conversion of `net` (preprocessed, with `sol` its peak-load
/// OPF) and returns the plan together with the converted network.
pub fn build_transition(
    net: &Network,
    sol: &OpfSolution,
    catalog: &[ConverterModule],
    cfg: &RatingConfig,
) -> Result<(TransitionPlan, Network)> {
    cfg.validate()?;
    let weights = suitability_weights(net, sol)?;
    let selection = select_conversions(net, &weights)?;
    let position: BTreeMap<u64, usize> = net.branches.iter().enumerate().map(|(k, b)| (b.id, k)).collect();

    let mut next_link = net.next_link_id();
    let mut conversions = Vec::with_capacity(selection.off_tree.len());
    for id in &selection.off_tree {
        let k = position[id];
        let br = &net.branches[k];
        let mu = sol.mu[k].value;
        let utilization = sol.utilization[k].value;
        let target = target_rating(br.rating, mu, utilization, cfg);
        let (is_b2b, origin) = match br.kind {
            BranchKind::Line => (false, LinkOrigin::ConvertedLine),
            BranchKind::Transformer => (true, LinkOrigin::ConvertedTransformer),
        };
        let length_km = if is_b2b { 0.0 } else { br.length_km };
        let choice = select_converter(target, is_b2b, length_km, catalog)?;
        let installed = choice.installed_mva();
        let link = HvdcLink {
            id: next_link,
            from_bus: br.from_bus,
            to_bus: br.to_bus,
            p_max: installed,
            q_max: REACTIVE_SHARE * installed,
            loss_k: choice.module.loss_k,
            loss_d: choice.module.loss_d,
            length_km,
            converter_id: choice.module.id.clone(),
            origin,
            cable: false,
        };
        hvdc_loss_fraction(&link)?;
        next_link += 1;
        conversions.push(Conversion {
            branch_id: br.id,
            kind: br.kind,
            original_rating: br.rating,
            mu,
            utilization,
            weight: weights[k],
            target_rating: target,
            converter_id: choice.module.id.clone(),
            module_count: choice.module_count,
            installed_mva: installed,
            capacity_factor: installed / br.rating,
            link,
        });
    }

    let mut converted = net.clone();
    converted.branches.retain(|b| selection.tree.binary_search(&b.id).is_ok());
    converted.hvdc_links.extend(conversions.iter().map(|c| c.link.clone()));
    let converted = converted.validated()?;

    let lines = || conversions.iter().filter(|c| c.kind == BranchKind::Line);
    let transformers = || conversions.iter().filter(|c| c.kind == BranchKind::Transformer);
    let summary = PlanSummary {
        lines_converted: lines().count(),
        transformers_converted: transformers().count(),
        km_converted: lines().map(|c| c.link.length_km).sum(),
        average_capacity_factor: mean(conversions.iter().map(|c| c.capacity_factor)),
        line_capacity_factor: mean(lines().map(|c| c.capacity_factor)),
        transformer_capacity_factor: mean(transformers().map(|c| c.capacity_factor)),
        uprated: conversions.iter().filter(|c| c.is_uprated()).count(),
        tree_branches: selection.tree.len(),
    };
    let plan = TransitionPlan { conversions, tree_branch_ids: selection.tree, summary };
    Ok((plan, converted))
}
