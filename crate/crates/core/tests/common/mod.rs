//! Seeded fuzz corpus and brute-force oracles shared by the integration
//! and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hybridgrid::dcopf::{solve, OpfOutcome, OpfProblem, OpfSolution};
use hybridgrid::grid::{
    Branch, BranchKind, BranchStatus, Bus, CostPoint, Generator, GeneratorKind, Network,
};
use hybridgrid::lp::Sense;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x5eed_2017;

pub fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn bus(id: u64, load_mw: f64) -> Bus {
    Bus { id, name: format!("b{id}"), load_mw, load_profile_id: None }
}

pub fn branch(id: u64, from: u64, to: u64, kind: BranchKind, r: f64, b: f64, rating: f64) -> Branch {
    let length_km = if kind == BranchKind::Transformer { 0.0 } else { 10.0 + 10.0 * id as f64 };
    Branch {
        id,
        from_bus: from,
        to_bus: to,
        kind,
        r,
        b,
        rating,
        length_km,
        status: BranchStatus::Existing,
        essential: None,
    }
}

/// Convex cost from `(width, slope)` segments starting at `p_min`.
pub fn generator(id: u64, bus: u64, p_min: f64, fixed: f64, segments: &[(f64, f64)]) -> Generator {
    let mut cost = vec![CostPoint::new(p_min, fixed)];
    let (mut p, mut c) = (p_min, fixed);
    for &(w, s) in segments {
        p += w;
        c += w * s;
        cost.push(CostPoint::new(p, c));
    }
    Generator { id, bus, p_min, p_max: p, cost, kind: GeneratorKind::Conventional, res_profile_id: None }
}

pub fn network(buses: Vec<Bus>, branches: Vec<Branch>, generators: Vec<Generator>) -> Network {
    Network { base_mva: 100.0, buses, branches, generators, hvdc_links: vec![], profiles: BTreeMap::new() }
}

/// Random spanning tree plus `extra` random edges on buses `1..=n`.
pub fn random_edges(rng: &mut ChaCha8Rng, n: u64, extra: usize) -> Vec<(u64, u64)> {
    let mut order: Vec<u64> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..order.len() {
        let j = rng.gen_range(0..i);
        edges.push((order[j], order[i]));
    }
    for _ in 0..extra {
        let a = rng.gen_range(1..=n);
        let mut b = rng.gen_range(1..=n);
        while b == a {
            b = rng.gen_range(1..=n);
        }
        edges.push((a, b));
    }
    edges
}

/// Connected grid whose ratings bind only occasionally.
pub fn random_grid(rng: &mut ChaCha8Rng, n: u64) -> Network {
    let extra = rng.gen_range(0..=(n as usize));
    let edges = random_edges(rng, n, extra);
    let buses: Vec<Bus> = (1..=n).map(|i| bus(i, rng.gen_range(0..60) as f64)).collect();
    let total: f64 = buses.iter().map(|b| b.load_mw).sum();
    let branches = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let kind = if rng.gen_bool(0.2) { BranchKind::Transformer } else { BranchKind::Line };
            branch(
                k as u64 + 1,
                a,
                b,
                kind,
                rng.gen_range(0.001..0.1),
                rng.gen_range(2.0..40.0),
                rng.gen_range(0.5..1.5) * (total + 50.0),
            )
        })
        .collect();
    let n_gens = rng.gen_range(1..=3.min(n));
    let per_gen = (total * 1.5 + 30.0) / n_gens as f64;
    let generators = (0..n_gens)
        .map(|g| {
            let at = rng.gen_range(1..=n);
            let s1 = rng.gen_range(5.0..40.0);
            generator(g + 1, at, 0.0, 0.0, &[(per_gen / 2.0, s1), (per_gen / 2.0, s1 + rng.gen_range(0.0..20.0))])
        })
        .collect();
    network(buses, branches, generators).validated().expect("random grid is valid")
}

/// Random grid whose peak OPF is feasible (redrawn until it is), with the
/// solution.
pub fn plannable_grid(rng: &mut ChaCha8Rng, n: u64) -> (Network, OpfSolution) {
    loop {
        let net = random_grid(rng, n);
        let sol = solve(&OpfProblem::peak(&net)).expect("solver runs");
        if sol.is_optimal() {
            return (net, sol);
        }
    }
}

/// Small OPF instance: at most 4 buses, 2 generators and 2 segments each,
/// with ratings tight enough to bind now and then.
pub fn small_opf_instance(rng: &mut ChaCha8Rng) -> Network {
    let n = rng.gen_range(2..=4u64);
    let extra = rng.gen_range(0..=2usize);
    let edges = random_edges(rng, n, extra);
    let buses: Vec<Bus> = (1..=n).map(|i| bus(i, rng.gen_range(0..80) as f64)).collect();
    let branches = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            branch(k as u64 + 1, a, b, BranchKind::Line, 0.01, rng.gen_range(1.0..20.0), rng.gen_range(20.0..200.0))
        })
        .collect();
    let total: f64 = buses.iter().map(|b| b.load_mw).sum();
    let generators = (0..rng.gen_range(1..=2u64))
        .map(|g| {
            let mut segs: Vec<(f64, f64)> = (0..rng.gen_range(1..=2))
                .map(|_| (rng.gen_range(0.4..1.0) * (total + 20.0), rng.gen_range(1.0..50.0)))
                .collect();
            segs.sort_by(|a, b| a.1.total_cmp(&b.1));
            let p_min = if rng.gen_bool(0.3) { rng.gen_range(0.0..10.0) } else { 0.0 };
            generator(g + 1, rng.gen_range(1..=n), p_min, rng.gen_range(0.0..100.0), &segs)
        })
        .collect();
    network(buses, branches, generators).validated().expect("small instance is valid")
}

/// Dense Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum cost of the DC-OPF by enumerating the vertices of its feasible
/// polytope, written independently of the library's LP model: segment
/// outputs and non-reference angles are the variables, flows are
/// substituted out. `None` when no vertex is feasible.
pub fn vertex_enumeration_cost(net: &Network) -> Option<f64> {
    let index = net.bus_index();
    let n = net.buses.len();
    let mut cost = vec![];
    let mut seg_bus = vec![];
    let mut seg_width = vec![];
    let mut fixed = 0.0;
    let mut injection = vec![0.0; n];
    for g in &net.generators {
        fixed += g.cost[0].cost_eur_per_h;
        injection[index[&g.bus]] += g.p_min;
        for w in g.cost.windows(2) {
            let width = w[1].breakpoint_mw - w[0].breakpoint_mw;
            cost.push((w[1].cost_eur_per_h - w[0].cost_eur_per_h) / width);
            seg_bus.push(index[&g.bus]);
            seg_width.push(width);
        }
    }
    let ns = cost.len();
    let nv = ns + n - 1;
    let angle = |i: usize| if i == 0 { None } else { Some(ns + i - 1) };

    // Equalities: generation - load - net outflow = 0 at each bus.
    let mut eq: Vec<(Vec<f64>, f64)> = vec![];
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for s in 0..ns {
            if seg_bus[s] == i {
                row[s] = 1.0;
            }
        }
        for br in &net.branches {
            let (f, t) = (index[&br.from_bus], index[&br.to_bus]);
            let k = br.b * net.base_mva;
            let sign = if f == i {
                -1.0
            } else if t == i {
                1.0
            } else {
                continue;
            };
            // Outflow from f is k (theta_f - theta_t).
            if let Some(v) = angle(f) {
                row[v] += sign * k;
            }
            if let Some(v) = angle(t) {
                row[v] -= sign * k;
            }
        }
        eq.push((row, net.buses[i].load_mw - injection[i]));
    }
    // Inequalities a.v <= rhs.
    let mut ineq: Vec<(Vec<f64>, f64)> = vec![];
    for s in 0..ns {
        let mut lo = vec![0.0; nv];
        lo[s] = -1.0;
        ineq.push((lo, 0.0));
        let mut hi = vec![0.0; nv];
        hi[s] = 1.0;
        ineq.push((hi, seg_width[s]));
    }
    for br in &net.branches {
        let (f, t) = (index[&br.from_bus], index[&br.to_bus]);
        let k = br.b * net.base_mva;
        let mut row = vec![0.0; nv];
        if let Some(v) = angle(f) {
            row[v] += k;
        }
        if let Some(v) = angle(t) {
            row[v] -= k;
        }
        ineq.push((row.clone(), br.rating));
        ineq.push((row.iter().map(|x| -x).collect(), br.rating));
    }

    let free = nv - eq.len();
    let mut best: Option<f64> = None;
    combinations(ineq.len(), free, |active| {
        let mut a: Vec<Vec<f64>> = eq.iter().map(|e| e.0.clone()).collect();
        let mut b: Vec<f64> = eq.iter().map(|e| e.1).collect();
        for &i in active {
            a.push(ineq[i].0.clone());
            b.push(ineq[i].1);
        }
        let Some(v) = solve_dense(a, b) else { return };
        let feasible = ineq.iter().all(|(row, rhs)| {
            let lhs: f64 = row.iter().zip(&v).map(|(x, y)| x * y).sum();
            lhs <= rhs + 1e-7 * (1.0 + rhs.abs())
        });
        if feasible {
            let obj = fixed + cost.iter().zip(&v).map(|(c, x)| c * x).sum::<f64>();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    });
    best
}

/// Largest complementary-slackness violation and the relative duality gap
/// of a solved OPF, from the raw LP data.
pub struct DualityCheck {
    pub gap: f64,
    pub slackness: f64,
    pub sign_violation: f64,
}

pub fn duality_check(outcome: &OpfOutcome) -> DualityCheck {
    let lp = &outcome.lp.lp;
    let raw = outcome.raw.as_ref().expect("optimal outcome");
    let mut dual_obj = lp.offset;
    let mut slackness = 0.0f64;
    let mut sign_violation = 0.0f64;
    for (i, c) in lp.constraints.iter().enumerate() {
        let y = raw.duals[i];
        dual_obj += y * c.rhs;
        let slack = lp.activity(i, &raw.x) - c.rhs;
        slackness = slackness.max((y * slack).abs());
        let wrong = match c.sense {
            Sense::Le => y.max(0.0),
            Sense::Ge => (-y).max(0.0),
            Sense::Eq => 0.0,
        };
        sign_violation = sign_violation.max(wrong);
    }
    for (j, &d) in raw.reduced_costs.iter().enumerate() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let x = raw.x[j];
        if d > 0.0 {
            match lo {
                Some(l) => {
                    dual_obj += d * l;
                    slackness = slackness.max((d * (x - l)).abs());
                }
                None => sign_violation = sign_violation.max(d),
            }
        } else if d < 0.0 {
            match hi {
                Some(u) => {
                    dual_obj += d * u;
                    slackness = slackness.max((d * (u - x)).abs());
                }
                None => sign_violation = sign_violation.max(-d),
            }
        }
    }
    let gap = (raw.objective - dual_obj).abs() / raw.objective.abs().max(1.0);
    DualityCheck { gap, slackness, sign_violation }
}

/// Minimum spanning-tree weight and number of spanning trees, by checking
/// every subset of `n - 1` branches.
pub fn exhaustive_spanning_trees(net: &Network, weights: &[f64]) -> (Option<f64>, u64) {
    let index = net.bus_index();
    let n = net.buses.len();
    let m = net.branches.len();
    let mut best: Option<f64> = None;
    let mut count = 0u64;
    combinations(m, n - 1, |subset| {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, mut a: usize) -> usize {
            while p[a] != a {
                a = p[a];
            }
            a
        }
        for &k in subset {
            let br = &net.branches[k];
            let (a, b) = (find(&mut parent, index[&br.from_bus]), find(&mut parent, index[&br.to_bus]));
            if a == b {
                return;
            }
            parent[a] = b;
        }
        count += 1;
        let w: f64 = subset.iter().map(|&k| weights[k]).sum();
        best = Some(best.map_or(w, |b: f64| b.min(w)));
    });
    (best, count)
}

/// Cheapest joint dispatch of `gens` meeting `demand`, by searching all
/// integer output combinations. Exact when breakpoints and demand are
/// integers.
pub fn grid_search_dispatch(gens: &[Generator], demand: f64) -> Option<f64> {
    fn go(gens: &[Generator], demand: f64) -> Option<f64> {
        match gens {
            [] => (demand.abs() < 1e-9).then_some(0.0),
            [g, rest @ ..] => {
                let mut best: Option<f64> = None;
                let mut p = g.p_min;
                while p <= g.p_max + 1e-9 {
                    if let Some(c) = go(rest, demand - p) {
                        let total = c + g.cost_at(p);
                        best = Some(best.map_or(total, |b: f64| b.min(total)));
                    }
                    p += 1.0;
                }
                best
            }
        }
    }
    go(gens, demand)
}

/// Random convex generators on integer breakpoints at a single bus.
pub fn random_convex_gens(rng: &mut ChaCha8Rng, bus_id: u64) -> Vec<Generator> {
    (0..rng.gen_range(2..=3u64))
        .map(|g| {
            let mut slopes: Vec<f64> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..60) as f64).collect();
            slopes.sort_by(f64::total_cmp);
            let segs: Vec<(f64, f64)> = slopes.iter().map(|&s| (rng.gen_range(1..=12) as f64, s)).collect();
            let p_min = rng.gen_range(0..=3) as f64;
            generator(g + 1, bus_id, p_min, rng.gen_range(0..50) as f64, &segs)
        })
        .collect()
}
