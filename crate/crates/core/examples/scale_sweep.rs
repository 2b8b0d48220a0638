//! Scales one plan up and down and reports how outsourcing responds.

use netplan::drso::{solve_drso, DrsoConfig};
use netplan::evaluation::{
    drso_sweep_factors, empirical_moments, robust_sweep_factors, sample_scenarios, scale_sweep, EvalOptions,
    SamplerConfig,
};
use netplan::io::sweep_csv;
use netplan::network::{generate_random_instance, us_backbone_topology, DEFAULT_PENALTY};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 6;
    let inst = generate_random_instance(&us_backbone_topology(), k, 4, DEFAULT_PENALTY)?;
    let training = sample_scenarios(&SamplerConfig::default().with_seed(5), 60, k)?;
    let holdout = sample_scenarios(&SamplerConfig::default().with_seed(6), 200, k)?;
    let plan = solve_drso(&inst, &empirical_moments(&training)?, &DrsoConfig::default())?.plan;

    let mut lambdas = robust_sweep_factors();
    lambdas.extend(drso_sweep_factors().into_iter().skip(1));
    lambdas.sort_by(f64::total_cmp);
    let rows = scale_sweep(&inst, &plan.expansions, &lambdas, &holdout, &EvalOptions::default())?;
    print!("{}", sweep_csv(&rows, &["drso plan, 200 holdout scenarios".into()]));
    Ok(())
}
