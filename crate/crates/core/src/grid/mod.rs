//! Grid domain types and their invariants.
//!
//! A [`Network`] is the single authoritative grid state. It is validated on
//! load and treated as immutable afterwards; transformations return a new
//! network.

mod connectivity;
mod io;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use connectivity::{connectivity, Connectivity, EdgeRef};
pub use io::{load_case, parse_case, save_case, to_case_string};

/// Upper bound (exclusive) on a plausible HVDC loss fraction.
pub const MAX_LOSS_FRACTION: f64 = 0.2;

/// Reactive capability of an HVDC link as a share of its active limit.
pub const REACTIVE_SHARE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u64,
    #[serde(default)]
    pub name: String,
    /// Peak active demand in MW.
    #[serde(default)]
    pub load_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_profile_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Line,
    Transformer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    Existing,
    New,
}

/// An AC line or transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub id: u64,
    pub from_bus: u64,
    pub to_bus: u64,
    pub kind: BranchKind,
    /// Series resistance, p.u.
    pub r: f64,
    /// Series susceptance magnitude used by the DC flow model, p.u.
    pub b: f64,
    /// MVA rating.
    pub rating: f64,
    #[serde(default)]
    pub length_km: f64,
    pub status: BranchStatus,
    /// Only meaningful for new branches. `None` leaves the decision to
    /// [`crate::preprocess::flag_essential_lines`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub essential: Option<bool>,
}

impl Branch {
    pub fn is_new(&self) -> bool {
        self.status == BranchStatus::New
    }

    pub fn is_essential(&self) -> bool {
        self.essential.unwrap_or(false)
    }

    /// Endpoints as an unordered pair.
    pub fn bus_pair(&self) -> (u64, u64) {
        (self.from_bus.min(self.to_bus), self.from_bus.max(self.to_bus))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Conventional,
    Res,
}

/// Breakpoint of a piecewise-linear generation cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostPoint {
    pub breakpoint_mw: f64,
    pub cost_eur_per_h: f64,
}

impl CostPoint {
    pub fn new(breakpoint_mw: f64, cost_eur_per_h: f64) -> Self {
        Self { breakpoint_mw, cost_eur_per_h }
    }
}

/// One linear piece of a cost curve: `width` MW at `slope` EUR/MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSegment {
    pub width: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: u64,
    pub bus: u64,
    pub p_min: f64,
    pub p_max: f64,
    pub cost: Vec<CostPoint>,
    pub kind: GeneratorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res_profile_id: Option<String>,
}

impl Generator {
    /// Cost at `p_min`, EUR/h.
    pub fn fixed_cost(&self) -> f64 {
        self.cost.first().map_or(0.0, |p| p.cost_eur_per_h)
    }

    pub fn segments(&self) -> Vec<CostSegment> {
        self.cost
            .windows(2)
            .map(|w| {
                let width = w[1].breakpoint_mw - w[0].breakpoint_mw;
                CostSegment { width, slope: (w[1].cost_eur_per_h - w[0].cost_eur_per_h) / width }
            })
            .collect()
    }

    /// Evaluates the cost curve at `p` (clamped to the curve's domain).
    pub fn cost_at(&self, p: f64) -> f64 {
        let mut cost = self.fixed_cost();
        let mut remaining = p - self.p_min;
        for seg in self.segments() {
            if remaining <= 0.0 {
                break;
            }
            let used = remaining.min(seg.width);
            cost += used * seg.slope;
            remaining -= used;
        }
        cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    ConvertedLine,
    ConvertedTransformer,
    NewLine,
}

/// Point-to-point HVDC link. Losses are `loss_k * length_km + loss_d`
/// percent of the transmitted active power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvdcLink {
    pub id: u64,
    pub from_bus: u64,
    pub to_bus: u64,
    /// Active power limit, MW.
    pub p_max: f64,
    /// Reactive capability, MVAr.
    pub q_max: f64,
    /// Length-dependent loss, percent per km.
    pub loss_k: f64,
    /// Fixed converter loss, percent.
    pub loss_d: f64,
    /// Zero for back-to-back installations.
    #[serde(default)]
    pub length_km: f64,
    pub converter_id: String,
    pub origin: LinkOrigin,
    /// New DC lines only: built as cable rather than overhead line.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cable: bool,
}

impl HvdcLink {
    /// Loss fraction of the sending-end flow, without range checks.
    pub fn raw_loss_fraction(&self) -> f64 {
        (self.loss_k * self.length_km + self.loss_d) / 100.0
    }

    pub fn is_back_to_back(&self) -> bool {
        self.length_km == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub hvdc_links: Vec<HvdcLink>,
    /// Hourly per-unit series keyed by profile id.
    #[serde(default)]
    pub profiles: BTreeMap<String, Vec<f64>>,
}

fn check_unique(kind: &str, ids: impl Iterator<Item = u64>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::validation(format!("duplicate {kind} id {id}")));
        }
    }
    Ok(())
}

fn finite(value: f64, what: impl FnOnce() -> String) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{} is not finite", what())))
    }
}

impl Network {
    /// Sorts every entity list by id and checks all invariants.
    pub fn validated(mut self) -> Result<Self> {
        self.sort();
        self.validate()?;
        Ok(self)
    }

    pub fn sort(&mut self) {
        self.buses.sort_by_key(|b| b.id);
        self.branches.sort_by_key(|b| b.id);
        self.generators.sort_by_key(|g| g.id);
        self.hvdc_links.sort_by_key(|l| l.id);
    }

    /// Checks every type invariant without requiring sorted order.
    pub fn validate(&self) -> Result<()> {
        self.validate_entities()?;
        let conn = connectivity(self, |_| true);
        if !conn.connected {
            return Err(Error::Disconnected { components: conn.components });
        }
        Ok(())
    }

    /// Entity-level invariants only; connectivity is not checked.
    pub fn validate_entities(&self) -> Result<()> {
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return Err(Error::validation(format!("base_mva must be positive, got {}", self.base_mva)));
        }
        if self.buses.is_empty() {
            return Err(Error::validation("network has no buses"));
        }
        check_unique("bus", self.buses.iter().map(|b| b.id))?;
        check_unique("branch", self.branches.iter().map(|b| b.id))?;
        check_unique("generator", self.generators.iter().map(|g| g.id))?;
        check_unique("hvdc link", self.hvdc_links.iter().map(|l| l.id))?;

        let bus_ids: BTreeSet<u64> = self.buses.iter().map(|b| b.id).collect();
        let known = |bus: u64| -> Result<()> {
            if bus_ids.contains(&bus) {
                Ok(())
            } else {
                Err(Error::validation(format!("unknown bus {bus}")))
            }
        };

        for bus in &self.buses {
            finite(bus.load_mw, || format!("bus {} load_mw", bus.id))?;
            if bus.load_mw < 0.0 {
                return Err(Error::validation(format!("bus {}: load_mw must be nonnegative", bus.id)));
            }
        }
        for br in &self.branches {
            known(br.from_bus)?;
            known(br.to_bus)?;
            for (name, v) in [("r", br.r), ("b", br.b), ("rating", br.rating), ("length_km", br.length_km)] {
                finite(v, || format!("branch {} {name}", br.id))?;
            }
            if br.from_bus == br.to_bus {
                return Err(Error::validation(format!("branch {}: from_bus equals to_bus", br.id)));
            }
            if br.r <= 0.0 {
                return Err(Error::validation(format!("branch {}: r must be positive", br.id)));
            }
            if br.b <= 0.0 {
                return Err(Error::validation(format!("branch {}: b must be positive", br.id)));
            }
            if br.rating <= 0.0 {
                return Err(Error::validation(format!("branch {}: rating must be positive", br.id)));
            }
            if br.length_km < 0.0 {
                return Err(Error::validation(format!("branch {}: length_km must be nonnegative", br.id)));
            }
            if br.kind == BranchKind::Transformer && br.length_km != 0.0 {
                return Err(Error::validation(format!("branch {}: transformer must have length_km = 0", br.id)));
            }
        }
        for g in &self.generators {
            known(g.bus)?;
            validate_generator(g)?;
        }
        for link in &self.hvdc_links {
            known(link.from_bus)?;
            known(link.to_bus)?;
            validate_link(link)?;
        }
        for (id, series) in &self.profiles {
            if let Some(v) = series.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::validation(format!("profile {id}: invalid value {v}")));
            }
        }
        Ok(())
    }

    pub fn bus(&self, id: u64) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Position of each bus id in `self.buses`.
    pub fn bus_index(&self) -> BTreeMap<u64, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load_mw).sum()
    }

    /// Largest series resistance over all AC branches.
    pub fn max_resistance(&self) -> f64 {
        self.branches.iter().map(|b| b.r).fold(0.0, f64::max)
    }

    pub fn next_link_id(&self) -> u64 {
        self.hvdc_links.iter().map(|l| l.id + 1).max().unwrap_or(1)
    }
}

fn validate_generator(g: &Generator) -> Result<()> {
    let id = g.id;
    for (name, v) in [("p_min", g.p_min), ("p_max", g.p_max)] {
        finite(v, || format!("generator {id} {name}"))?;
    }
    if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
        return Err(Error::validation(format!("generator {id}: require 0 <= p_min <= p_max")));
    }
    let Some(first) = g.cost.first() else {
        return Err(Error::validation(format!("generator {id}: cost curve is empty")));
    };
    let last = g.cost.last().expect("non-empty");
    for p in &g.cost {
        finite(p.breakpoint_mw, || format!("generator {id} breakpoint"))?;
        finite(p.cost_eur_per_h, || format!("generator {id} cost"))?;
    }
    if first.breakpoint_mw != g.p_min || last.breakpoint_mw != g.p_max {
        return Err(Error::validation(format!(
            "generator {id}: cost breakpoints must span [p_min, p_max]"
        )));
    }
    if g.cost.windows(2).any(|w| w[1].breakpoint_mw <= w[0].breakpoint_mw) {
        return Err(Error::validation(format!(
            "generator {id}: cost breakpoints must be strictly increasing"
        )));
    }
    let segments = g.segments();
    for pair in segments.windows(2) {
        let tol = 1e-9 * pair[0].slope.abs().max(1.0);
        if pair[1].slope < pair[0].slope - tol {
            return Err(Error::validation(format!("generator {id}: cost curve is not convex")));
        }
    }
    Ok(())
}

fn validate_link(link: &HvdcLink) -> Result<()> {
    let id = link.id;
    for (name, v) in [
        ("p_max", link.p_max),
        ("q_max", link.q_max),
        ("loss_k", link.loss_k),
        ("loss_d", link.loss_d),
        ("length_km", link.length_km),
    ] {
        finite(v, || format!("hvdc link {id} {name}"))?;
    }
    if link.from_bus == link.to_bus {
        return Err(Error::validation(format!("hvdc link {id}: from_bus equals to_bus")));
    }
    if link.p_max <= 0.0 {
        return Err(Error::validation(format!("hvdc link {id}: p_max must be positive")));
    }
    if (link.q_max - REACTIVE_SHARE * link.p_max).abs() > 1e-9 * link.p_max.max(1.0) {
        return Err(Error::validation(format!("hvdc link {id}: q_max must equal 0.5 * p_max")));
    }
    if link.length_km < 0.0 || link.loss_k < 0.0 || link.loss_d < 0.0 {
        return Err(Error::validation(format!(
            "hvdc link {id}: length and loss coefficients must be nonnegative"
        )));
    }
    let lambda = link.raw_loss_fraction();
    if !(0.0..MAX_LOSS_FRACTION).contains(&lambda) {
        return Err(Error::validation(format!("hvdc link {id}: loss fraction {lambda} outside [0, 0.2)")));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn expect_err(net: Network, needle: &str) {
        match net.validated() {
            Err(e) => assert!(e.to_string().contains(needle), "{e} does not mention {needle}"),
            Ok(_) => panic!("expected error containing {needle}"),
        }
    }

    #[test]
    fn valid_two_bus() {
        let net = two_bus(50.0).validated().unwrap();
        assert_eq!(net.buses.len(), 2);
    }

    #[test]
    fn unknown_bus() {
        let mut net = two_bus(50.0);
        net.branches[0].to_bus = 99;
        expect_err(net, "unknown bus 99");
    }

    #[test]
    fn duplicate_ids() {
        let mut net = two_bus(50.0);
        net.buses[1].id = 1;
        expect_err(net, "duplicate bus id 1");
    }

    #[test]
    fn negative_load() {
        let mut net = two_bus(50.0);
        net.buses[1].load_mw = -1.0;
        expect_err(net, "load_mw must be nonnegative");
    }

    #[test]
    fn branch_invariants() {
        let cases: Vec<(Box<dyn Fn(&mut Branch)>, &str)> = vec![
            (Box::new(|b| b.to_bus = b.from_bus), "from_bus equals to_bus"),
            (Box::new(|b| b.r = 0.0), "r must be positive"),
            (Box::new(|b| b.b = -1.0), "b must be positive"),
            (Box::new(|b| b.rating = 0.0), "rating must be positive"),
            (
                Box::new(|b| {
                    b.kind = BranchKind::Transformer;
                    b.length_km = 3.0
                }),
                "transformer must have length_km = 0",
            ),
            (Box::new(|b| b.length_km = -1.0), "length_km must be nonnegative"),
        ];
        for (mutate, needle) in cases {
            let mut net = two_bus(50.0);
            mutate(&mut net.branches[0]);
            expect_err(net, needle);
        }
    }

    #[test]
    fn generator_invariants() {
        let mut net = two_bus(50.0);
        net.generators[0].p_min = 200.0;
        expect_err(net, "p_min <= p_max");

        let mut net = two_bus(50.0);
        net.generators[0].cost = vec![];
        expect_err(net, "cost curve is empty");

        let mut net = two_bus(50.0);
        net.generators[0].cost[1].breakpoint_mw = 90.0;
        expect_err(net, "span [p_min, p_max]");

        let mut net = two_bus(50.0);
        net.generators[0].cost =
            vec![CostPoint::new(0.0, 0.0), CostPoint::new(0.0, 1.0), CostPoint::new(100.0, 5.0)];
        expect_err(net, "strictly increasing");

        let mut net = two_bus(50.0);
        net.generators[0].cost =
            vec![CostPoint::new(0.0, 0.0), CostPoint::new(50.0, 1000.0), CostPoint::new(100.0, 1500.0)];
        expect_err(net, "not convex");
    }

    #[test]
    fn link_invariants() {
        let base = || {
            let mut net = two_bus(50.0);
            net.hvdc_links.push(b2b(1, 1, 2, 100.0, 1.9));
            net
        };
        base().validated().unwrap();

        let mut net = base();
        net.hvdc_links[0].p_max = 0.0;
        expect_err(net, "p_max must be positive");

        let mut net = base();
        net.hvdc_links[0].q_max = 10.0;
        expect_err(net, "q_max must equal 0.5 * p_max");

        let mut net = base();
        net.hvdc_links[0].loss_d = 20.0;
        expect_err(net, "outside [0, 0.2)");

        let mut net = base();
        net.hvdc_links[0].to_bus = 1;
        expect_err(net, "from_bus equals to_bus");
    }

    #[test]
    fn disconnected_network() {
        let mut net = two_bus(50.0);
        net.buses.push(bus(3, 0.0));
        match net.validated() {
            Err(Error::Disconnected { components }) => assert_eq!(components, vec![vec![1, 2], vec![3]]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cost_curve_evaluation() {
        let g = Generator {
            id: 1,
            bus: 1,
            p_min: 10.0,
            p_max: 30.0,
            cost: vec![CostPoint::new(10.0, 100.0), CostPoint::new(20.0, 200.0), CostPoint::new(30.0, 400.0)],
            kind: GeneratorKind::Conventional,
            res_profile_id: None,
        };
        assert_eq!(g.cost_at(10.0), 100.0);
        assert_eq!(g.cost_at(25.0), 300.0);
        assert_eq!(g.segments()[1].slope, 20.0);
    }
}
