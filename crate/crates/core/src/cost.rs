//! Investment-cost accounting for a transition plan and for the new lines
//! of an expansion plan.
//!
//! Unit costs are integer euros per unit. Every line item is accumulated
//! from per-entity totals rounded to whole thousands of euros, so reports
//! add up exactly and are byte-stable.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BranchKind, LinkOrigin, Network};
use crate::planner::TransitionPlan;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostAssumptions {
    pub ac_line_eur_per_km: i64,
    pub dc_overhead_eur_per_km: i64,
    pub dc_cable_eur_per_km: i64,
    pub ac_to_dc_conversion_eur_per_km: i64,
    pub vsc_eur_per_mva: i64,
    /// Converter stations costed per converted line.
    pub terminals_per_converted_line: u32,
    /// Multiplier on the VSC rate for back-to-back stations.
    pub b2b_cost_multiplier: f64,
}

impl Default for CostAssumptions {
    fn default() -> Self {
        Self {
            ac_line_eur_per_km: 1_500_000,
            dc_overhead_eur_per_km: 1_500_000,
            dc_cable_eur_per_km: 4_000_000,
            ac_to_dc_conversion_eur_per_km: 200_000,
            vsc_eur_per_mva: 102_000,
            terminals_per_converted_line: 2,
            b2b_cost_multiplier: 1.0,
        }
    }
}

impl CostAssumptions {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.ac_line_eur_per_km,
            self.dc_overhead_eur_per_km,
            self.dc_cable_eur_per_km,
            self.ac_to_dc_conversion_eur_per_km,
            self.vsc_eur_per_mva,
        ];
        if rates.iter().any(|r| *r < 0) || !(self.b2b_cost_multiplier >= 0.0) {
            return Err(Error::validation("cost assumptions must be nonnegative"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let parsed: Self =
            serde_json::from_str(&text).map_err(|source| Error::Parse { path: path.to_path_buf(), source })?;
        parsed.validate()?;
        Ok(parsed)
    }
}

/// `quantity * unit_cost` in thousands of euros, rounded half away from zero.
pub fn keur(quantity: f64, unit_cost_eur: f64) -> i64 {
    (quantity * unit_cost_eur / 1000.0).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostItem {
    pub category: String,
    pub quantity: f64,
    pub unit: String,
    pub unit_cost_eur: f64,
    pub total_keur: i64,
}

impl CostItem {
    fn new(category: &str, unit: &str, unit_cost_eur: f64) -> Self {
        Self { category: category.into(), quantity: 0.0, unit: unit.into(), unit_cost_eur, total_keur: 0 }
    }

    fn add(&mut self, quantity: f64) {
        self.quantity += quantity;
        self.total_keur += keur(quantity, self.unit_cost_eur);
    }

    fn negated(&self) -> Self {
        Self { quantity: -self.quantity, total_keur: -self.total_keur, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Savings of the evaluated base grid against the reference plan.
    pub reference_savings_keur: i64,
    /// Plan investment minus those savings.
    pub net_premium_keur: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub items: Vec<CostItem>,
    pub grand_total_keur: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

impl CostReport {
    fn from_items(items: Vec<CostItem>) -> Self {
        let grand_total_keur = items.iter().map(|i| i.total_keur).sum();
        Self { items, grand_total_keur, comparison: None }
    }

    pub fn item(&self, category: &str) -> Option<&CostItem> {
        self.items.iter().find(|i| i.category == category)
    }

    pub fn with_reference(mut self, savings: &CostReport) -> Self {
        self.comparison = Some(Comparison {
            reference_savings_keur: savings.grand_total_keur,
            net_premium_keur: self.grand_total_keur - savings.grand_total_keur,
        });
        self
    }

    pub fn to_json(&self) -> String {
        crate::canonical::to_canonical_string(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,quantity,unit,unit_cost_eur,total_keur\n");
        for i in &self.items {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i.category,
                crate::canonical::round_significant(i.quantity),
                i.unit,
                i.unit_cost_eur,
                i.total_keur
            ));
        }
        out.push_str(&format!("total,,,,{}\n", self.grand_total_keur));
        if let Some(c) = &self.comparison {
            out.push_str(&format!("reference_savings,,,,{}\n", c.reference_savings_keur));
            out.push_str(&format!("net_premium,,,,{}\n", c.net_premium_keur));
        }
        out
    }
}

/// Line items for the new AC and DC lines contained in `net`.
fn new_line_items(net: &Network, a: &CostAssumptions) -> Vec<CostItem> {
    let mut ac = CostItem::new("new_ac_lines", "km", a.ac_line_eur_per_km as f64);
    let mut overhead = CostItem::new("new_dc_overhead", "km", a.dc_overhead_eur_per_km as f64);
    let mut cable = CostItem::new("new_dc_cable", "km", a.dc_cable_eur_per_km as f64);
    for br in net.branches.iter().filter(|b| b.is_new()) {
        ac.add(br.length_km);
    }
    for link in net.hvdc_links.iter().filter(|l| l.origin == LinkOrigin::NewLine) {
        if link.cable {
            cable.add(link.length_km);
        } else {
            overhead.add(link.length_km);
        }
    }
    vec![ac, overhead, cable]
}

/// Conversion items only; additive over disjoint plans.
fn conversion_items(plan: &TransitionPlan, a: &CostAssumptions) -> Vec<CostItem> {
    let mut conversion = CostItem::new("ac_to_dc_conversion", "km", a.ac_to_dc_conversion_eur_per_km as f64);
    let mut vsc = CostItem::new("vsc_substations", "MVA", a.vsc_eur_per_mva as f64);
    let mut b2b = CostItem::new("b2b_converters", "MVA", a.vsc_eur_per_mva as f64 * a.b2b_cost_multiplier);
    for c in &plan.conversions {
        match c.kind {
            BranchKind::Line => {
                conversion.add(c.link.length_km);
                vsc.add(f64::from(a.terminals_per_converted_line) * c.installed_mva);
            }
            BranchKind::Transformer => b2b.add(c.installed_mva),
        }
    }
    vec![conversion, vsc, b2b]
}

/// Investment for a transition plan on `net`: conversions, converter
/// stations and the new lines the network still contains.
pub fn plan_cost(plan: &TransitionPlan, net: &Network, assumptions: &CostAssumptions) -> CostReport {
    let mut items = conversion_items(plan, assumptions);
    items.extend(new_line_items(net, assumptions));
    CostReport::from_items(items)
}

/// Cost of the new lines in `reference` minus those in `base`, per
/// category. Positive totals are savings of `base`.
pub fn savings_vs_reference(base: &Network, reference: &Network, assumptions: &CostAssumptions) -> CostReport {
    let ours = new_line_items(base, assumptions);
    let theirs = new_line_items(reference, assumptions);
    let items = theirs
        .iter()
        .zip(&ours)
        .map(|(r, b)| {
            let d = b.negated();
            CostItem { quantity: r.quantity + d.quantity, total_keur: r.total_keur + d.total_keur, ..r.clone() }
        })
        .collect();
    CostReport::from_items(items)
}

/// Ordinary least-squares line `loss = k * length + d` through the points
/// not listed in `omit`. Returns `(k, d)`.
pub fn fit_loss_model<T: Scalar>(points: &[(T, T)], omit: &BTreeSet<usize>) -> Result<(T, T)> {
    let kept: Vec<&(T, T)> = points.iter().enumerate().filter(|(i, _)| !omit.contains(i)).map(|(_, p)| p).collect();
    if kept.len() < 2 {
        return Err(Error::Fit(format!("need at least two points, got {}", kept.len())));
    }
    if kept.iter().all(|p| p.0 == kept[0].0) {
        return Err(Error::Fit("all lengths are equal; slope is undetermined".into()));
    }
    let n = T::from_usize(kept.len()).expect("count fits");
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (x, y) in kept {
        sx = sx + x.clone();
        sy = sy + y.clone();
        sxx = sxx + x.clone() * x.clone();
        sxy = sxy + x.clone() * y.clone();
    }
    let denom = n.clone() * sxx - sx.clone() * sx.clone();
    let k = (n.clone() * sxy - sx.clone() * sy.clone()) / denom;
    let d = (sy - k.clone() * sx) / n;
    Ok((k, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::*;
    use crate::grid::{BranchStatus, HvdcLink};
    use crate::planner::{Conversion, PlanSummary};
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn conversion(branch_id: u64, kind: BranchKind, km: f64, mva: f64) -> Conversion {
        let mut link = b2b(branch_id, 1, 2, mva, 1.9);
        link.length_km = km;
        Conversion {
            branch_id,
            kind,
            original_rating: mva,
            mu: 0.0,
            utilization: 0.0,
            weight: 0.0,
            target_rating: mva,
            converter_id: "M".into(),
            module_count: 1,
            installed_mva: mva,
            capacity_factor: 1.0,
            link,
        }
    }

    fn plan(conversions: Vec<Conversion>) -> TransitionPlan {
        TransitionPlan { conversions, tree_branch_ids: vec![], summary: PlanSummary::default() }
    }

    fn dc_line(id: u64, km: f64, cable: bool) -> HvdcLink {
        HvdcLink { origin: LinkOrigin::NewLine, length_km: km, cable, loss_d: 0.0, ..b2b(id, 1, 2, 1000.0, 0.0) }
    }

    #[test]
    fn conversion_unit_costs() {
        let a = CostAssumptions::default();
        let report = plan_cost(&plan(vec![conversion(1, BranchKind::Line, 100.0, 1000.0)]), &two_bus(1.0), &a);
        assert_eq!(report.item("ac_to_dc_conversion").unwrap().total_keur, 20_000);
        // Two 1000 MVA terminals at 0.102 MEUR/MVA.
        assert_eq!(report.item("vsc_substations").unwrap().total_keur, 204_000);
        let single = CostAssumptions { terminals_per_converted_line: 1, ..a };
        let report = plan_cost(&plan(vec![conversion(1, BranchKind::Line, 100.0, 1000.0)]), &two_bus(1.0), &single);
        assert_eq!(report.item("vsc_substations").unwrap().total_keur, 102_000);
    }

    #[test]
    fn b2b_costed_once_with_multiplier() {
        let a = CostAssumptions::default();
        let p = plan(vec![conversion(1, BranchKind::Transformer, 0.0, 500.0)]);
        assert_eq!(plan_cost(&p, &two_bus(1.0), &a).grand_total_keur, 51_000);
        let a = CostAssumptions { b2b_cost_multiplier: 1.5, ..a };
        assert_eq!(plan_cost(&p, &two_bus(1.0), &a).grand_total_keur, 76_500);
    }

    #[test]
    fn empty_plan_costs_nothing() {
        let report = plan_cost(&plan(vec![]), &two_bus(1.0), &CostAssumptions::default());
        assert_eq!(report.grand_total_keur, 0);
        assert_eq!(report.items.len(), 6);
    }

    #[test]
    fn grand_total_is_sum_of_items() {
        let mut net = two_bus(1.0);
        net.branches.push(crate::grid::Branch { status: BranchStatus::New, length_km: 33.3, ..line(2, 1, 2, 0.01, 1.0, 1.0) });
        net.hvdc_links.push(dc_line(9, 12.345, true));
        let p = plan(vec![conversion(1, BranchKind::Line, 77.7, 333.0), conversion(2, BranchKind::Transformer, 0.0, 250.0)]);
        let report = plan_cost(&p, &net, &CostAssumptions::default());
        assert_eq!(report.grand_total_keur, report.items.iter().map(|i| i.total_keur).sum::<i64>());
        assert_eq!(report.item("new_ac_lines").unwrap().total_keur, 49_950);
        assert_eq!(report.item("new_dc_cable").unwrap().total_keur, 49_380);
    }

    #[test]
    fn plan_cost_is_additive() {
        let a = CostAssumptions::default();
        let net = two_bus(1.0);
        let first = vec![conversion(1, BranchKind::Line, 12.3456, 321.7), conversion(2, BranchKind::Transformer, 0.0, 99.9)];
        let second = vec![conversion(3, BranchKind::Line, 0.3333, 17.17)];
        let union: Vec<Conversion> = first.iter().chain(&second).cloned().collect();
        let total = plan_cost(&plan(union), &net, &a).grand_total_keur;
        let parts = plan_cost(&plan(first), &net, &a).grand_total_keur + plan_cost(&plan(second), &net, &a).grand_total_keur;
        assert_eq!(total, parts);
    }

    #[test]
    fn cable_premium() {
        let mut base = two_bus(1.0);
        base.hvdc_links.push(dc_line(1, 2600.0, false));
        let mut reference = two_bus(1.0);
        reference.hvdc_links.push(dc_line(1, 2600.0, true));
        let report = savings_vs_reference(&base, &reference, &CostAssumptions::default());
        assert_eq!(report.grand_total_keur, 6_500_000);
    }

    #[test]
    fn savings_examples() {
        let a = CostAssumptions::default();
        let net = two_bus(1.0);
        assert_eq!(savings_vs_reference(&net, &net, &a).grand_total_keur, 0);
        let mut reference = net.clone();
        reference.branches.push(crate::grid::Branch {
            status: BranchStatus::New,
            length_km: 100.0,
            ..line(2, 1, 2, 0.01, 1.0, 1.0)
        });
        let report = savings_vs_reference(&net, &reference, &a);
        assert_eq!(report.grand_total_keur, 150_000);
        let back = savings_vs_reference(&reference, &net, &a);
        assert_eq!(back.grand_total_keur, -150_000);
        for (x, y) in report.items.iter().zip(&back.items) {
            assert_eq!(x.total_keur, -y.total_keur);
            assert_eq!(x.quantity, -y.quantity);
        }
    }

    #[test]
    fn comparison_and_csv() {
        let a = CostAssumptions::default();
        let mut reference = two_bus(1.0);
        reference.hvdc_links.push(dc_line(1, 10.0, true));
        let savings = savings_vs_reference(&two_bus(1.0), &reference, &a);
        let report = plan_cost(&plan(vec![conversion(1, BranchKind::Line, 100.0, 1000.0)]), &two_bus(1.0), &a)
            .with_reference(&savings);
        let c = report.comparison.as_ref().unwrap();
        assert_eq!(c.reference_savings_keur, 40_000);
        assert_eq!(c.net_premium_keur, 224_000 - 40_000);
        let csv = report.to_csv();
        assert!(csv.starts_with("category,quantity,unit,unit_cost_eur,total_keur\n"));
        assert!(csv.contains("net_premium,,,,184000\n"));
    }

    #[test]
    fn exact_fits() {
        let pts: Vec<(f64, f64)> = [0.0, 50.0, 100.0, 400.0].iter().map(|&l| (l, 0.01 * l + 1.0)).collect();
        let (k, d) = fit_loss_model(&pts, &BTreeSet::new()).unwrap();
        assert!((k - 0.01).abs() < 1e-12 && (d - 1.0).abs() < 1e-12);
        let (k, d) = fit_loss_model(&[(0.0f64, 1.9f64), (100.0, 2.9)], &BTreeSet::new()).unwrap();
        assert!((k - 0.01).abs() < 1e-12 && (d - 1.9).abs() < 1e-12);
    }

    #[test]
    fn planted_outlier_is_ignored() {
        // Points on 0.0042 l + 1.37 with an outlier planted at index 2.
        let lengths = [0.0, 50.0, 100.0, 200.0, 300.0];
        let mut pts: Vec<(f64, f64)> = lengths.iter().map(|&l| (l, 0.0042 * l + 1.37)).collect();
        pts[2].1 = 9.0;
        let (k, d) = fit_loss_model(&pts, &BTreeSet::from([2])).unwrap();
        assert!((k - 0.0042).abs() < 1e-9 && (d - 1.37).abs() < 1e-9);
        let (k_all, _) = fit_loss_model(&pts, &BTreeSet::new()).unwrap();
        assert!((k_all - 0.0042).abs() > 1e-3);
    }

    #[test]
    fn exact_rational_fit() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let pts = vec![(r(0, 1), r(3, 2)), (r(10, 1), r(2, 1)), (r(20, 1), r(5, 2))];
        let (k, d) = fit_loss_model(&pts, &BTreeSet::new()).unwrap();
        assert_eq!((k, d), (r(1, 20), r(3, 2)));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_loss_model(&[(1.0f64, 2.0f64)], &BTreeSet::new()).is_err());
        assert!(fit_loss_model(&[(1.0f64, 2.0f64), (1.0, 3.0)], &BTreeSet::new()).is_err());
        assert!(fit_loss_model(&[(1.0f64, 2.0f64), (2.0, 3.0)], &BTreeSet::from([0])).is_err());
    }
}
