//! Linearized (DC) optimal power flow.
//!
//! Variables: generator outputs, cost-segment loadings, bus angles, AC branch
//! flows and two nonnegative directed flows per HVDC link. Link losses are
//! charged at the receiving end, so a link carrying `f` from its sending bus
//! delivers `(1 - loss) * f`.
//!
//! The branch flow-limit multiplier `mu` is read off the reduced cost of the
//! flow variable at its bound and is expressed in EUR/MWh.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{HvdcLink, Network, MAX_LOSS_FRACTION};
use crate::lp::{LinearProgram, LpError, LpSolution, Sense};

/// Multipliers below this magnitude are reported as zero.
pub const DUAL_ZERO: f64 = 1e-7;

/// Loss fraction of a link: `(loss_k * length_km + loss_d) / 100`.
pub fn hvdc_loss_fraction(link: &HvdcLink) -> Result<f64> {
    let lambda = link.raw_loss_fraction();
    if !(0.0..MAX_LOSS_FRACTION).contains(&lambda) {
        return Err(Error::validation(format!(
            "hvdc link {}: loss fraction {lambda} is implausible (must lie in [0, 0.2))",
            link.id
        )));
    }
    Ok(lambda)
}

/// One OPF instance: a network plus per-bus load multipliers and
/// per-generator availability factors (both indexed like the network's
/// entity lists).
#[derive(Debug, Clone)]
pub struct OpfProblem<'a> {
    pub net: &'a Network,
    pub load_scale: Vec<f64>,
    pub res_availability: Vec<f64>,
}

impl<'a> OpfProblem<'a> {
    /// Peak conditions: nominal loads, full availability.
    pub fn peak(net: &'a Network) -> Self {
        Self { net, load_scale: vec![1.0; net.buses.len()], res_availability: vec![1.0; net.generators.len()] }
    }

    pub fn new(net: &'a Network, load_scale: Vec<f64>, res_availability: Vec<f64>) -> Result<Self> {
        if load_scale.len() != net.buses.len() || res_availability.len() != net.generators.len() {
            return Err(Error::validation("OPF multipliers do not match the network"));
        }
        if let Some(s) = load_scale.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::validation(format!("load multiplier {s} must be nonnegative")));
        }
        if let Some(f) = res_availability.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::validation(format!("availability factor {f} outside [0, 1]")));
        }
        Ok(Self { net, load_scale, res_availability })
    }

    /// Multipliers for one hour of the given profile set.
    pub fn at_hour(net: &'a Network, profiles: &BTreeMap<String, Vec<f64>>, hour: usize) -> Result<Self> {
        let lookup = |id: &str| -> Result<f64> {
            let series = profiles.get(id).ok_or_else(|| Error::Profile(format!("missing profile {id}")))?;
            series
                .get(hour)
                .copied()
                .ok_or_else(|| Error::Profile(format!("profile {id} has no value for hour {hour}")))
        };
        let load_scale = net
            .buses
            .iter()
            .map(|b| b.load_profile_id.as_deref().map_or(Ok(1.0), lookup))
            .collect::<Result<Vec<_>>>()?;
        let availability = net
            .generators
            .iter()
            .map(|g| g.res_profile_id.as_deref().map_or(Ok(1.0), lookup))
            .collect::<Result<Vec<_>>>()?;
        Self::new(net, load_scale, availability)
    }

    pub fn bus_load(&self, i: usize) -> f64 {
        self.net.buses[i].load_mw * self.load_scale[i]
    }

    pub fn total_load(&self) -> f64 {
        (0..self.net.buses.len()).map(|i| self.bus_load(i)).sum()
    }

    pub fn available_capacity(&self, g: usize) -> f64 {
        self.net.generators[g].p_max * self.res_availability[g]
    }

    pub fn total_available(&self) -> f64 {
        (0..self.net.generators.len()).map(|g| self.available_capacity(g)).sum()
    }
}

/// Variable and row indices of the LP built for an [`OpfProblem`].
#[derive(Debug, Clone)]
pub struct OpfLayout {
    pub dispatch: Vec<usize>,
    pub segments: Vec<Vec<usize>>,
    pub angles: Vec<usize>,
    pub ac_flows: Vec<usize>,
    /// `(forward, reverse)` directed flow variables per link.
    pub hvdc: Vec<(usize, usize)>,
    pub balance_rows: Vec<usize>,
    pub dispatch_rows: Vec<usize>,
    pub flow_rows: Vec<usize>,
    pub loss_fractions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OpfLp {
    pub lp: LinearProgram<f64>,
    pub layout: OpfLayout,
}

/// Builds the linear program. The first bus (lowest id) is the angle
/// reference.
pub fn build_lp(prob: &OpfProblem<'_>) -> Result<OpfLp> {
    let net = prob.net;
    let index = net.bus_index();
    let mut lp = LinearProgram::new();

    let mut dispatch = vec![];
    let mut segments = vec![];
    for (g, gen) in net.generators.iter().enumerate() {
        let cap = prob.available_capacity(g);
        dispatch.push(lp.add_var(0.0, Some(gen.p_min), Some(cap)));
        lp.offset += gen.fixed_cost();
        segments.push(
            gen.segments().iter().map(|s| lp.add_var(s.slope, Some(0.0), Some(s.width))).collect::<Vec<_>>(),
        );
    }
    let angles: Vec<usize> = (0..net.buses.len())
        .map(|i| if i == 0 { lp.add_var(0.0, Some(0.0), Some(0.0)) } else { lp.add_var(0.0, None, None) })
        .collect();
    let ac_flows: Vec<usize> =
        net.branches.iter().map(|br| lp.add_var(0.0, Some(-br.rating), Some(br.rating))).collect();
    let mut hvdc = vec![];
    let mut loss_fractions = vec![];
    for link in &net.hvdc_links {
        loss_fractions.push(hvdc_loss_fraction(link)?);
        let fwd = lp.add_var(0.0, Some(0.0), Some(link.p_max));
        let rev = lp.add_var(0.0, Some(0.0), Some(link.p_max));
        hvdc.push((fwd, rev));
    }

    // (a) bus balance: generation - outflow + inflow = load
    let mut balance: Vec<Vec<(usize, f64)>> = vec![vec![]; net.buses.len()];
    for (g, gen) in net.generators.iter().enumerate() {
        balance[index[&gen.bus]].push((dispatch[g], 1.0));
    }
    for (k, br) in net.branches.iter().enumerate() {
        balance[index[&br.from_bus]].push((ac_flows[k], -1.0));
        balance[index[&br.to_bus]].push((ac_flows[k], 1.0));
    }
    for (l, link) in net.hvdc_links.iter().enumerate() {
        let (fwd, rev) = hvdc[l];
        let delivered = 1.0 - loss_fractions[l];
        let (a, b) = (index[&link.from_bus], index[&link.to_bus]);
        balance[a].push((fwd, -1.0));
        balance[a].push((rev, delivered));
        balance[b].push((rev, -1.0));
        balance[b].push((fwd, delivered));
    }
    let balance_rows = balance
        .into_iter()
        .enumerate()
        .map(|(i, coeffs)| lp.add_constraint(coeffs, Sense::Eq, prob.bus_load(i)))
        .collect();

    // dispatch = p_min + sum of segment loadings
    let dispatch_rows = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let mut coeffs = vec![(dispatch[g], 1.0)];
            coeffs.extend(segments[g].iter().map(|&s| (s, -1.0)));
            lp.add_constraint(coeffs, Sense::Eq, gen.p_min)
        })
        .collect();

    // (b) flow = b * base * (theta_from - theta_to); (c) is the flow bound.
    let flow_rows = net
        .branches
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let coef = br.b * net.base_mva;
            lp.add_constraint(
                vec![
                    (ac_flows[k], 1.0),
                    (angles[index[&br.from_bus]], -coef),
                    (angles[index[&br.to_bus]], coef),
                ],
                Sense::Eq,
                0.0,
            )
        })
        .collect();

    Ok(OpfLp {
        lp,
        layout: OpfLayout {
            dispatch,
            segments,
            angles,
            ac_flows,
            hvdc,
            balance_rows,
            dispatch_rows,
            flow_rows,
            loss_fractions,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpfStatus {
    Optimal,
    Infeasible,
}

/// Value attached to an entity id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ById {
    pub id: u64,
    pub value: f64,
}

fn by_id(ids: impl Iterator<Item = u64>, values: impl Iterator<Item = f64>) -> Vec<ById> {
    ids.zip(values).map(|(id, value)| ById { id, value }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfSolution {
    pub status: OpfStatus,
    /// Why the instance is infeasible, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    /// MW per generator.
    pub dispatch: Vec<ById>,
    /// Radians per bus; the reference bus is at zero.
    pub angles: Vec<ById>,
    /// MW per AC branch, positive from `from_bus` to `to_bus`.
    pub ac_flows: Vec<ById>,
    /// Signed sending-end MW per link, positive from `from_bus`.
    pub hvdc_flows: Vec<ById>,
    /// MW lost per link.
    pub hvdc_losses: Vec<ById>,
    /// Flow-limit multiplier per branch, EUR/MWh.
    pub mu: Vec<ById>,
    /// Percent of rating per branch.
    pub utilization: Vec<ById>,
    /// Marginal price of demand per bus, EUR/MWh.
    pub bus_prices: Vec<ById>,
    /// EUR/h.
    pub total_cost: f64,
}

impl OpfSolution {
    fn infeasible(cause: String) -> Self {
        Self {
            status: OpfStatus::Infeasible,
            cause: Some(cause),
            dispatch: vec![],
            angles: vec![],
            ac_flows: vec![],
            hvdc_flows: vec![],
            hvdc_losses: vec![],
            mu: vec![],
            utilization: vec![],
            bus_prices: vec![],
            total_cost: 0.0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == OpfStatus::Optimal
    }

    /// Values in branch order of the solved network.
    pub fn mu_values(&self) -> Vec<f64> {
        self.mu.iter().map(|e| e.value).collect()
    }

    pub fn utilization_values(&self) -> Vec<f64> {
        self.utilization.iter().map(|e| e.value).collect()
    }

    pub fn total_losses(&self) -> f64 {
        self.hvdc_losses.iter().map(|e| e.value).sum()
    }

    pub fn total_dispatch(&self) -> f64 {
        self.dispatch.iter().map(|e| e.value).sum()
    }
}

/// Full solve result: the reported solution plus the raw LP data, for
/// callers that want to check optimality conditions.
#[derive(Debug, Clone)]
pub struct OpfOutcome {
    pub solution: OpfSolution,
    pub lp: OpfLp,
    pub raw: Option<LpSolution<f64>>,
}

pub fn solve(prob: &OpfProblem<'_>) -> Result<OpfSolution> {
    solve_detailed(prob).map(|o| o.solution)
}

pub fn solve_detailed(prob: &OpfProblem<'_>) -> Result<OpfOutcome> {
    let built = build_lp(prob)?;
    let raw = match built.lp.solve() {
        Ok(raw) => raw,
        Err(LpError::Infeasible { rows }) => {
            let cause = infeasibility_cause(prob, &built.layout, &rows);
            return Ok(OpfOutcome { solution: OpfSolution::infeasible(cause), lp: built, raw: None });
        }
        Err(LpError::Unbounded) => {
            return Err(Error::Solver("OPF is unbounded; a flow or capacity limit is missing".into()))
        }
        Err(e) => return Err(Error::Solver(format!("OPF failed: {e}"))),
    };
    let solution = extract(prob, &built.layout, &raw);
    debug_assert!(counterflow_links(prob.net, &solution).is_empty(), "simultaneous counterflow on a lossy link");
    Ok(OpfOutcome { solution, lp: built, raw: Some(raw) })
}

fn clean(v: f64) -> f64 {
    if v.abs() < DUAL_ZERO {
        0.0
    } else {
        v
    }
}

fn extract(prob: &OpfProblem<'_>, layout: &OpfLayout, raw: &LpSolution<f64>) -> OpfSolution {
    let net = prob.net;
    let x = &raw.x;
    let flows: Vec<f64> = layout.ac_flows.iter().map(|&v| x[v]).collect();
    let mu: Vec<f64> = layout.ac_flows.iter().map(|&v| clean(raw.reduced_costs[v].abs())).collect();
    let utilization: Vec<f64> =
        net.branches.iter().zip(&flows).map(|(br, f)| 100.0 * f.abs() / br.rating).collect();
    let hvdc_flows: Vec<f64> = layout.hvdc.iter().map(|&(f, r)| x[f] - x[r]).collect();
    let hvdc_losses: Vec<f64> =
        layout.hvdc.iter().zip(&layout.loss_fractions).map(|(&(f, r), l)| l * (x[f] + x[r])).collect();

    OpfSolution {
        status: OpfStatus::Optimal,
        cause: None,
        dispatch: by_id(net.generators.iter().map(|g| g.id), layout.dispatch.iter().map(|&v| x[v])),
        angles: by_id(net.buses.iter().map(|b| b.id), layout.angles.iter().map(|&v| x[v])),
        ac_flows: by_id(net.branches.iter().map(|b| b.id), flows.into_iter()),
        hvdc_flows: by_id(net.hvdc_links.iter().map(|l| l.id), hvdc_flows.into_iter()),
        hvdc_losses: by_id(net.hvdc_links.iter().map(|l| l.id), hvdc_losses.into_iter()),
        mu: by_id(net.branches.iter().map(|b| b.id), mu.into_iter()),
        utilization: by_id(net.branches.iter().map(|b| b.id), utilization.into_iter()),
        bus_prices: by_id(
            net.buses.iter().map(|b| b.id),
            layout.balance_rows.iter().map(|&r| clean(raw.duals[r])),
        ),
        total_cost: raw.objective,
    }
}

fn infeasibility_cause(prob: &OpfProblem<'_>, layout: &OpfLayout, rows: &[usize]) -> String {
    let demand = prob.total_load();
    let available = prob.total_available();
    if demand > available {
        return format!("total demand {demand:.3} MW exceeds available generation {available:.3} MW");
    }
    let buses: Vec<u64> = layout
        .balance_rows
        .iter()
        .enumerate()
        .filter(|(_, r)| rows.contains(r))
        .map(|(i, _)| prob.net.buses[i].id)
        .collect();
    if buses.is_empty() {
        "generator limits and network constraints admit no feasible dispatch".into()
    } else {
        format!("power balance cannot be met at buses {buses:?}")
    }
}

/// Lossy links that carry flow in both directions although both end buses
/// have a strictly positive price. Such a point is never optimal.
pub fn counterflow_links(net: &Network, sol: &OpfSolution) -> Vec<u64> {
    if !sol.is_optimal() {
        return vec![];
    }
    let price: BTreeMap<u64, f64> = sol.bus_prices.iter().map(|e| (e.id, e.value)).collect();
    net.hvdc_links
        .iter()
        .zip(&sol.hvdc_flows)
        .zip(&sol.hvdc_losses)
        .filter(|((link, flow), loss)| {
            let lambda = link.raw_loss_fraction();
            if lambda <= 0.0 || price[&link.from_bus] <= DUAL_ZERO || price[&link.to_bus] <= DUAL_ZERO {
                return false;
            }
            // Losses exceed what the net flow alone would cause.
            loss.value > lambda * flow.value.abs() + 1e-6
        })
        .map(|((link, _), _)| link.id)
        .collect()
}
