//! The distribution that attains the worst-case shortfall at a few
//! planning levels, checked against its own moments.

use netplan::ambiguity::{worst_case_distribution, worst_case_shortfall, MomentInfo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = MomentInfo::new(10.0, 100.0)?;
    println!(
        "{:>6}  {:>9} {:>7}  {:>9} {:>7}  {:>9} {:>9}",
        "d~", "low", "p_low", "high", "p_high", "E[(D-d~)+]", "N(d~)"
    );
    for d in [0.0, 2.5, 5.0, 10.0, 15.0, 25.0] {
        let dist = worst_case_distribution(d, &m)?;
        println!(
            "{d:>6.1}  {:>9.4} {:>7.4}  {:>9.4} {:>7.4}  {:>9.4} {:>9.4}",
            dist.lower_point,
            dist.lower_mass,
            dist.upper_point,
            dist.upper_mass,
            dist.expected_shortfall(d),
            worst_case_shortfall(d, &m)?
        );
        assert!((dist.mean() - m.mean).abs() < 1e-9 && (dist.variance() - m.variance).abs() < 1e-9);
    }
    Ok(())
}
