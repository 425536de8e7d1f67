//! Every bundled scenario must validate, run and pass its own checks.

use grbsde_lab::{all_bundled, run_scenario};

#[test]
fn all_bundled_scenarios_pass_their_checks() {
    let scenarios = all_bundled().unwrap();
    assert!(scenarios.len() >= 8);
    for scenario in &scenarios {
        let art = run_scenario(scenario, None)
            .unwrap_or_else(|e| panic!("{} failed to run: {e}", scenario.name));
        for check in &art.checks {
            assert!(
                check.passed,
                "{}: check {} failed with value {:.6e} vs tolerance {:.6e}",
                scenario.name, check.name, check.value, check.tolerance
            );
        }
        assert!(!art.checks.is_empty(), "{} runs no checks", scenario.name);
    }
}
