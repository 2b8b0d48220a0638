//! One link, one commodity: how much capacity the moment-based plan buys
//! as the demand variance grows, next to the plan for the mean demand.

use netplan::ambiguity::MomentInfo;
use netplan::drso::{solve_drso, DrsoConfig};
use netplan::formulations::{build_nominal, solve_and_extract, CapacityMode, ModelKind, Scenario};
use netplan::lp::Backend;
use netplan::network::{Commodity, Instance, Network};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = Network::new(vec!["a".into(), "b".into()], vec![("ab".into(), "a".into(), "b".into(), 5.0, 40.0)])?;
    let inst = Instance::new(net, vec![Commodity { id: "k".into(), source: 0, sink: 1 }], 130.0)?;
    let mean = 20.0;

    let nominal = build_nominal(&inst, &Scenario::new(vec![mean]), CapacityMode::Shared)?;
    let plan = solve_and_extract(&inst, &nominal, ModelKind::Nominal, Backend::Auto, "nominal")?;
    println!("nominal at mean {mean}: x = {:.3}", plan.expansions[0]);

    println!("{:>8}  {:>8}  {:>8}  {:>10}", "variance", "d~*", "x", "F(d~*)");
    for variance in [1.0, 25.0, 100.0, 400.0, 1600.0] {
        let m = [MomentInfo::new(mean, variance)?];
        let sol = solve_drso(&inst, &m, &DrsoConfig::default())?;
        println!("{variance:>8}  {:>8.3}  {:>8.3}  {:>10.3}", sol.d_tilde[0], sol.plan.expansions[0], sol.objective);
    }
    Ok(())
}
