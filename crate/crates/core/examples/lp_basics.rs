//! Building and solving a small LP with both backends, then re-solving
//! after a right-hand-side change from the previous basis.

use netplan::lp::{solve_with, Backend, DenseSimplex, LinearProgram, Relation, Sense, SimplexOptions};

fn main() {
    // A small production plan: maximize profit under two resource limits.
    let mut lp = LinearProgram::new(Sense::Maximize);
    let chairs = lp.add_var("chairs", 0.0, f64::INFINITY, 30.0);
    let tables = lp.add_var("tables", 0.0, 40.0, 50.0);
    let wood = lp.add_constraint(vec![(chairs, 2.0), (tables, 5.0)], Relation::Le, 200.0);
    lp.add_constraint(vec![(chairs, 1.0), (tables, 1.0)], Relation::Le, 60.0);
    print!("{}", lp.dump());

    for backend in [Backend::Dense, Backend::Sparse] {
        let sol = solve_with(&lp, backend).expect("valid LP");
        println!(
            "{backend:?}: {:?} objective {} chairs {} tables {}",
            sol.status,
            sol.objective_value,
            sol.value(chairs),
            sol.value(tables)
        );
    }

    let (mut warm, first) = DenseSimplex::solve(&lp, SimplexOptions::default());
    println!("cold: {} pivots", first.iterations);
    lp.constraints[wood].rhs = 260.0;
    let again = warm.resolve_with_rhs(&lp);
    println!(
        "more wood: objective {}, pivot count {} -> {}",
        again.objective_value, first.iterations, again.iterations
    );
}
