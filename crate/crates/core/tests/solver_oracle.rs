//! The branch-and-bound actor against exhaustive enumeration on small instances.

mod common;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use edgeplace::solver::{PlacementProblem, SearchStrategy};

#[test]
fn branch_and_bound_matches_exhaustive_enumeration() {
    let started = Instant::now();
    let tally = common::solver_vs_brute_force(0x5eed, 200).unwrap();
    let elapsed = started.elapsed();
    assert!(tally.feasible >= 100, "only {} feasible instances", tally.feasible);
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
}

#[test]
fn candidates_stay_within_the_gap_and_are_sorted() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let inst = common::random_instance(&mut rng);
        let problem = PlacementProblem::new(&inst.obs, &inst.nodes, &inst.profiles, &inst.model, &inst.options).unwrap();
        let report = problem.solve(0.1, 32, SearchStrategy::BranchAndBound);
        let cap = 1.1 * report.objective.value;
        for w in report.candidates.windows(2) {
            assert!(w[0].objective.value <= w[1].objective.value);
        }
        for c in &report.candidates {
            assert!(c.objective.value <= cap + 1e-12);
            if report.feasible {
                assert!(problem.violations(&c.placement.assignment).is_empty());
            }
        }
    }
}

#[test]
fn enumeration_and_branch_and_bound_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let inst = common::random_instance(&mut rng);
        let problem = PlacementProblem::new(&inst.obs, &inst.nodes, &inst.profiles, &inst.model, &inst.options).unwrap();
        let bb = problem.solve(0.05, 8, SearchStrategy::BranchAndBound);
        let en = problem.solve(0.05, 8, SearchStrategy::Enumerate);
        assert_eq!(bb.objective.value, en.objective.value, "instance {i}");
        assert_eq!(bb.feasible, en.feasible, "instance {i}");
    }
}
