mod common;

use common::*;
use hybridgrid::dcopf::{self, solve, solve_detailed, OpfProblem, OpfStatus};
use hybridgrid::grid::{HvdcLink, LinkOrigin};

#[test]
fn small_instances_match_vertex_enumeration() {
    let mut rng = rng(1);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..60 {
        let net = small_opf_instance(&mut rng);
        let sol = solve(&OpfProblem::peak(&net)).unwrap();
        match vertex_enumeration_cost(&net) {
            Some(best) => {
                assert_eq!(sol.status, OpfStatus::Optimal, "case {case}");
                let rel = (sol.total_cost - best).abs() / best.abs().max(1.0);
                assert!(rel < 1e-6, "case {case}: solver {} oracle {best}", sol.total_cost);
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, OpfStatus::Infeasible, "case {case}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal > 30, "corpus too infeasible: {optimal} optimal, {infeasible} infeasible");
}

#[test]
fn optimality_conditions_hold() {
    let mut rng = rng(2);
    for case in 0..60 {
        let net = small_opf_instance(&mut rng);
        let out = solve_detailed(&OpfProblem::peak(&net)).unwrap();
        if !out.solution.is_optimal() {
            continue;
        }
        let check = duality_check(&out);
        assert!(check.gap < 1e-6, "case {case}: gap {}", check.gap);
        assert!(check.slackness < 1e-6, "case {case}: slackness {}", check.slackness);
        assert!(check.sign_violation < 1e-7, "case {case}: dual sign {}", check.sign_violation);
    }
}

#[test]
fn congestion_prices_follow_flow_limits() {
    let mut rng = rng(3);
    for _ in 0..40 {
        let net = small_opf_instance(&mut rng);
        let sol = solve(&OpfProblem::peak(&net)).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        for ((br, mu), flow) in net.branches.iter().zip(&sol.mu).zip(&sol.ac_flows) {
            assert!(mu.value >= 0.0);
            if mu.value > 1e-6 {
                assert!((flow.value.abs() - br.rating).abs() < 1e-6 * br.rating.max(1.0));
            }
        }
    }
}

#[test]
fn larger_grids_conserve_power() {
    let mut rng = rng(4);
    for n in [5u64, 12, 25] {
        let net = random_grid(&mut rng, n);
        let sol = solve(&OpfProblem::peak(&net)).unwrap();
        assert!(sol.is_optimal());
        let residual = sol.total_dispatch() - net.total_load() - sol.total_losses();
        assert!(residual.abs() <= 1e-6 * net.total_load().max(1.0));
    }
}

#[test]
fn back_to_back_losses_at_receiving_end() {
    let mut net = network(
        vec![bus(1, 0.0), bus(2, 98.1)],
        vec![],
        vec![generator(1, 1, 0.0, 0.0, &[(200.0, 10.0)])],
    );
    net.hvdc_links.push(HvdcLink {
        id: 1,
        from_bus: 1,
        to_bus: 2,
        p_max: 350.0,
        q_max: 175.0,
        loss_k: 0.0,
        loss_d: 1.9,
        length_km: 0.0,
        converter_id: "M3".into(),
        origin: LinkOrigin::ConvertedTransformer,
        cable: false,
    });
    let net = net.validated().unwrap();
    let sol = solve(&OpfProblem::peak(&net)).unwrap();
    assert!((sol.hvdc_flows[0].value - 100.0).abs() < 1e-9);
    assert!((sol.hvdc_losses[0].value - 1.9).abs() < 1e-9);
    assert!((dcopf::hvdc_loss_fraction(&net.hvdc_links[0]).unwrap() - 0.019).abs() < 1e-15);
}
