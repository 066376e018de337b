mod common;

use common::{mt_instance, random_instance, solve_exported};
use mttd::instance::SolomonClass;
use mttd::milp::{brute_force, decode_routes, export_milp, BRUTE_FORCE_GUARD};
use mttd::solution::Solution;
use mttd_highs_check::{solve_lp_file, Status};

#[test]
fn exported_model_matches_enumeration() {
    for seed in 1..=6 {
        let inst = random_instance(100 + seed, 2 + (seed as usize % 2), 20.0, 100.0, 1, 1);
        let exact = brute_force(&inst, BRUTE_FORCE_GUARD).unwrap();
        let milp = solve_exported(&inst, 120.0);
        if !exact.feasible {
            assert_eq!(milp.status, Status::Infeasible, "seed {seed}");
            continue;
        }
        assert_eq!(milp.status, Status::Optimal, "seed {seed}");
        let obj = milp.objective.unwrap();
        assert!((obj - exact.objective).abs() <= 1e-4, "seed {seed}: MILP {obj} vs enumeration {}", exact.objective);
    }
}

#[test]
fn decoded_milp_routes_evaluate_to_the_objective() {
    let inst = mt_instance(SolomonClass::R, 3, 7, 1, 1);
    let model = export_milp(&inst).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.lp");
    std::fs::write(&path, model.to_lp()).unwrap();
    let out = solve_lp_file(&path, Some(120.0)).unwrap();
    assert_eq!(out.status, Status::Optimal);
    let routes = decode_routes(&inst, |name| out.columns.get(name).copied());
    let sol = Solution::from_routes(&inst, routes).unwrap();
    assert!(sol.is_feasible());
    assert!((sol.total_cost() - out.objective.unwrap()).abs() <= 1e-4);
}
