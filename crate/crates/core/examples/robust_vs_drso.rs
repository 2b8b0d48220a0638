//! Plans a random 14-node backbone instance with both models from the
//! same training sample and compares them on a fresh sample.
//!
//! ```text
//! cargo run --release --example robust_vs_drso -- 8
//! ```

use netplan::drso::{solve_drso, DrsoConfig};
use netplan::evaluation::{empirical_moments, evaluate_plan, sample_scenarios, SamplerConfig};
use netplan::formulations::UncertaintySet;
use netplan::network::{generate_random_instance, us_backbone_topology, DEFAULT_PENALTY};
use netplan::robust::{solve_robust, RobustConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let inst = generate_random_instance(&us_backbone_topology(), k, 1, DEFAULT_PENALTY)?;
    let training = sample_scenarios(&SamplerConfig::default().with_seed(2), 60, k)?;
    let holdout = sample_scenarios(&SamplerConfig::default().with_seed(3), 500, k)?;

    let drso = solve_drso(&inst, &empirical_moments(&training)?, &DrsoConfig::default())?;
    let robust =
        solve_robust(&inst, &UncertaintySet::new(training)?, &RobustConfig { routings: false, ..Default::default() })?;

    println!("{:<7} {:>10} {:>10} {:>10} {:>10}", "model", "capacity", "cost", "E[O/S]", "CVaR95");
    for (name, plan) in [("drso", &drso.plan), ("robust", &robust.plan)] {
        let r = evaluate_plan(&inst, &plan.expansions, &holdout)?;
        println!(
            "{name:<7} {:>10.2} {:>10.2} {:>10.3} {:>10.3}",
            plan.capacity_added(),
            plan.capacity_cost,
            r.expected_outsourced,
            r.cvar95
        );
    }
    Ok(())
}
