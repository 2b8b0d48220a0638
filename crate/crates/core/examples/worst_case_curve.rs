//! Prints the worst-case expected shortfall curve as CSV.
//!
//! ```text
//! cargo run --example worst_case_curve -- 10 100 40
//! ```
//! Arguments are the mean, the variance and the right end of the grid.

use netplan::ambiguity::{shortfall_curve, threshold, MomentInfo};
use netplan::io::curve_csv;

fn arg(i: usize, default: f64) -> f64 {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = MomentInfo::new(arg(1, 10.0), arg(2, 100.0))?;
    let hi = arg(3, 4.0 * m.mean);
    let points = shortfall_curve(&m, 0.0, hi, 81)?;
    let comments = vec![
        format!("mean={} variance={}", m.mean, m.variance),
        format!("branch switch at d_tilde={}", threshold(&m)?),
    ];
    print!("{}", curve_csv(&points, &comments));
    Ok(())
}
