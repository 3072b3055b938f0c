//! Reduction of an expansion plan to its base grid and the model
//! preprocessing steps applied before planning.
//!
//! The fixed order is: flag essential lines, reduce, merge parallel
//! branches, aggregate generators, floor series resistances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{connectivity, Branch, BranchStatus, CostPoint, EdgeRef, Generator, Network};

/// Smallest series resistance kept in the model, p.u.
pub const MIN_RESISTANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedLine {
    pub id: u64,
    pub length_km: f64,
}

/// Side artifact of [`reduce_to_base_grid`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RemovalReport {
    pub removed: Vec<RemovedLine>,
    pub count: usize,
    pub total_km: f64,
    /// Buses without load or generation left isolated by the removal.
    pub dropped_buses: Vec<u64>,
}

impl RemovalReport {
    /// `id,km` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,km\n");
        for line in &self.removed {
            out.push_str(&format!("{},{}\n", line.id, crate::canonical::round_significant(line.length_km)));
        }
        out
    }
}

/// Buses with load or generation attached.
fn terminal_buses(net: &Network) -> BTreeSet<u64> {
    let mut terminals: BTreeSet<u64> = net.buses.iter().filter(|b| b.load_mw > 0.0).map(|b| b.id).collect();
    terminals.extend(net.generators.iter().map(|g| g.bus));
    terminals
}

/// True when every terminal bus lies in a single component of the edges
/// accepted by `keep`.
fn terminals_connected(net: &Network, terminals: &BTreeSet<u64>, keep: impl Fn(&Branch) -> bool) -> bool {
    let conn = connectivity(net, |e| match e {
        EdgeRef::Branch(b) => keep(b),
        EdgeRef::Link(_) => true,
    });
    conn.components.iter().filter(|c| c.iter().any(|b| terminals.contains(b))).count() <= 1
}

/// Decides the essential flag of every new branch that does not carry an
/// explicit one.
///
/// New branches explicitly flagged non-essential are removed first. The
/// undecided ones are then visited in id order: a branch is dropped when all
/// load and generation buses stay connected without it (and without every
/// branch dropped before it), otherwise it is essential. The result is a
/// minimal set of new branches that keeps the terminals connected.
pub fn flag_essential_lines(net: &Network) -> Network {
    let terminals = terminal_buses(net);
    let mut dropped: BTreeSet<u64> =
        net.branches.iter().filter(|b| b.is_new() && b.essential == Some(false)).map(|b| b.id).collect();
    let mut decided: BTreeMap<u64, bool> = BTreeMap::new();
    for br in net.branches.iter().filter(|b| b.is_new() && b.essential.is_none()) {
        dropped.insert(br.id);
        if terminals_connected(net, &terminals, |b| !dropped.contains(&b.id)) {
            decided.insert(br.id, false);
        } else {
            dropped.remove(&br.id);
            decided.insert(br.id, true);
        }
    }
    let mut out = net.clone();
    for br in &mut out.branches {
        if let Some(&flag) = decided.get(&br.id) {
            br.essential = Some(flag);
        }
    }
    out
}

/// Removes every new branch not flagged essential. Buses left isolated
/// without load or generation are dropped with them.
pub fn reduce_to_base_grid(net: &Network) -> Result<(Network, RemovalReport)> {
    let removed: Vec<RemovedLine> = net
        .branches
        .iter()
        .filter(|b| b.is_new() && !b.is_essential())
        .map(|b| RemovedLine { id: b.id, length_km: b.length_km })
        .collect();
    if removed.is_empty() {
        return Ok((net.clone(), RemovalReport::default()));
    }
    let removed_ids: BTreeSet<u64> = removed.iter().map(|r| r.id).collect();
    let mut out = net.clone();
    out.branches.retain(|b| !removed_ids.contains(&b.id));

    let terminals = terminal_buses(&out);
    let conn = connectivity(&out, |_| true);
    let mut dropped_buses = vec![];
    let mut live_components = vec![];
    for comp in conn.components {
        if comp.iter().any(|b| terminals.contains(b)) {
            live_components.push(comp);
        } else if !touches_link(&out, &comp) {
            dropped_buses.extend(comp);
        } else {
            live_components.push(comp);
        }
    }
    if live_components.len() > 1 {
        return Err(Error::Disconnected { components: live_components });
    }
    if !dropped_buses.is_empty() {
        let gone: BTreeSet<u64> = dropped_buses.iter().copied().collect();
        out.buses.retain(|b| !gone.contains(&b.id));
        out.branches.retain(|b| !gone.contains(&b.from_bus) && !gone.contains(&b.to_bus));
    }
    let total_km = removed.iter().map(|r| r.length_km).sum();
    let report = RemovalReport { count: removed.len(), removed, total_km, dropped_buses };
    Ok((out, report))
}

fn touches_link(net: &Network, comp: &[u64]) -> bool {
    let members: BTreeSet<u64> = comp.iter().copied().collect();
    net.hvdc_links.iter().any(|l| members.contains(&l.from_bus) || members.contains(&l.to_bus))
}

/// Replaces each group of parallel branches of one kind by an equivalent
/// branch: susceptances and ratings add, resistances combine harmonically,
/// the length is the longest member's. The equivalent keeps the smallest id.
pub fn merge_parallel_branches(net: &Network) -> Result<Network> {
    let mut groups: BTreeMap<(u64, u64), Vec<&Branch>> = BTreeMap::new();
    for br in &net.branches {
        groups.entry(br.bus_pair()).or_default().push(br);
    }
    let mut branches = Vec::with_capacity(net.branches.len());
    for ((a, b), mut members) in groups {
        if members.len() == 1 {
            branches.push(members[0].clone());
            continue;
        }
        members.sort_by_key(|m| m.id);
        if members.iter().any(|m| m.kind != members[0].kind) {
            let ids: Vec<u64> = members.iter().map(|m| m.id).collect();
            return Err(Error::validation(format!(
                "parallel branches {ids:?} between buses {a} and {b} mix lines and transformers"
            )));
        }
        let first = members[0];
        let all_new = members.iter().all(|m| m.is_new());
        let essential = if all_new && members.iter().any(|m| m.essential.is_some()) {
            Some(members.iter().any(|m| m.is_essential()))
        } else {
            None
        };
        branches.push(Branch {
            id: first.id,
            from_bus: first.from_bus,
            to_bus: first.to_bus,
            kind: first.kind,
            r: 1.0 / members.iter().map(|m| 1.0 / m.r).sum::<f64>(),
            b: members.iter().map(|m| m.b).sum(),
            rating: members.iter().map(|m| m.rating).sum(),
            length_km: members.iter().map(|m| m.length_km).fold(0.0, f64::max),
            status: if all_new { BranchStatus::New } else { BranchStatus::Existing },
            essential,
        });
    }
    branches.sort_by_key(|b| b.id);
    Ok(Network { branches, ..net.clone() })
}

fn check_convex(g: &Generator) -> Result<()> {
    let segments = g.segments();
    for pair in segments.windows(2) {
        if pair[1].slope < pair[0].slope - 1e-9 * pair[0].slope.abs().max(1.0) {
            return Err(Error::validation(format!("generator {}: cost curve is not convex", g.id)));
        }
    }
    Ok(())
}

/// Merges generators sharing bus, kind and availability profile into one
/// unit whose cost curve is the lower envelope of their joint dispatch.
pub fn aggregate_generators(net: &Network) -> Result<Network> {
    type Key<'a> = (u64, crate::grid::GeneratorKind, Option<&'a str>);
    let mut groups: BTreeMap<Key<'_>, Vec<&Generator>> = BTreeMap::new();
    for g in &net.generators {
        check_convex(g)?;
        groups.entry((g.bus, g.kind, g.res_profile_id.as_deref())).or_default().push(g);
    }
    let mut generators = vec![];
    for (_, mut members) in groups {
        if members.len() == 1 {
            generators.push(members[0].clone());
            continue;
        }
        members.sort_by_key(|g| g.id);
        let p_min: f64 = members.iter().map(|g| g.p_min).sum();
        let p_max: f64 = members.iter().map(|g| g.p_max).sum();
        let mut segments: Vec<(f64, usize, usize, f64)> = vec![];
        for (gi, g) in members.iter().enumerate() {
            for (si, s) in g.segments().into_iter().enumerate() {
                segments.push((s.slope, gi, si, s.width));
            }
        }
        segments.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut mw = p_min;
        let mut cost: f64 = members.iter().map(|g| g.fixed_cost()).sum();
        let mut points = vec![CostPoint::new(mw, cost)];
        for (slope, _, _, width) in &segments {
            mw += width;
            cost += slope * width;
            points.push(CostPoint::new(mw, cost));
        }
        if let Some(last) = points.last_mut() {
            last.breakpoint_mw = p_max;
        }
        let first = members[0];
        generators.push(Generator { id: first.id, p_min, p_max, cost: points, ..first.clone() });
    }
    generators.sort_by_key(|g| g.id);
    Ok(Network { generators, ..net.clone() })
}

pub fn floor_resistance(net: &Network) -> Network {
    let mut out = net.clone();
    for br in &mut out.branches {
        if br.r < MIN_RESISTANCE {
            br.r = MIN_RESISTANCE;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PreprocessOptions {
    pub skip_reduce: bool,
}

/// Runs the full preprocessing chain and revalidates the result.
pub fn preprocess(net: &Network, opts: PreprocessOptions) -> Result<(Network, RemovalReport)> {
    let (reduced, report) = if opts.skip_reduce {
        (net.clone(), RemovalReport::default())
    } else {
        reduce_to_base_grid(&flag_essential_lines(net))?
    };
    let merged = merge_parallel_branches(&reduced)?;
    let aggregated = aggregate_generators(&merged)?;
    let floored = floor_resistance(&aggregated);
    Ok((floored.validated()?, report))
}
