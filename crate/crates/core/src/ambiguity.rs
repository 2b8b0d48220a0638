//! Worst-case expected shortfall over a moment ambiguity set.
//!
//! Nature picks any demand distribution on `[0, ∞)` with mean `μ` and
//! variance `σ²` and tries to maximize the expected unmet demand
//! `E[(d − d̃)₊]` for a committed satisfied amount `d̃`. The optimum is
//! attained by a two-point distribution and has a closed form with two
//! branches separated at `(μ² + σ²) / 2μ`:
//!
//! ```text
//! N(d̃) = ½ (μ − d̃ + √((d̃ − μ)² + σ²))    if d̃ > (μ² + σ²) / 2μ
//! N(d̃) = μ − d̃ · μ² / (μ² + σ²)            otherwise
//! ```
//!
//! Below the threshold the worst case is the one-sided Chebyshev law with
//! mass at `0` and at `(σ² + μ²)/μ`; above it the upper support point is
//! `d̃ + √((d̃ − μ)² + σ²)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpStatus, Relation, Sense};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbiguityError {
    #[error("invalid moments: mean {mean} must be > 0 and variance {variance} must be >= 0")]
    InvalidMoments { mean: f64, variance: f64 },
    #[error("satisfied demand {0} must be finite and >= 0")]
    NegativeCommitment(f64),
    #[error("length mismatch: {commitments} commitments vs {moments} moment pairs")]
    LengthMismatch { commitments: usize, moments: usize },
    #[error("grid LP did not reach optimality: {0:?}")]
    GridLp(LpStatus),
}

/// Mean and variance of one commodity's demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentInfo {
    pub mean: f64,
    pub variance: f64,
}

impl MomentInfo {
    pub fn new(mean: f64, variance: f64) -> Result<Self, AmbiguityError> {
        let m = Self { mean, variance };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), AmbiguityError> {
        if !(self.mean.is_finite() && self.mean > 0.0 && self.variance.is_finite() && self.variance >= 0.0) {
            return Err(AmbiguityError::InvalidMoments { mean: self.mean, variance: self.variance });
        }
        Ok(())
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Second raw moment `μ² + σ²`.
    pub fn second_moment(&self) -> f64 {
        self.mean * self.mean + self.variance
    }
}

/// Nature's worst-case law: two support points with their masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointDistribution {
    pub lower_point: f64,
    pub upper_point: f64,
    pub lower_mass: f64,
    pub upper_mass: f64,
}

impl TwoPointDistribution {
    pub fn mean(&self) -> f64 {
        self.lower_mass * self.lower_point + self.upper_mass * self.upper_point
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.lower_mass * (self.lower_point - mu).powi(2) + self.upper_mass * (self.upper_point - mu).powi(2)
    }

    /// `E[(d − d̃)₊]` under this distribution.
    pub fn expected_shortfall(&self, d_tilde: f64) -> f64 {
        self.upper_mass * (self.upper_point - d_tilde).max(0.0)
            + self.lower_mass * (self.lower_point - d_tilde).max(0.0)
    }
}

fn check(d_tilde: f64, m: &MomentInfo) -> Result<(), AmbiguityError> {
    m.validate()?;
    if !(d_tilde.is_finite() && d_tilde >= 0.0) {
        return Err(AmbiguityError::NegativeCommitment(d_tilde));
    }
    Ok(())
}

/// Branch point `(μ² + σ²) / 2μ`.
pub fn threshold(m: &MomentInfo) -> Result<f64, AmbiguityError> {
    m.validate()?;
    Ok(m.second_moment() / (2.0 * m.mean))
}

fn upper_branch(d_tilde: f64, m: &MomentInfo) -> f64 {
    let dev = d_tilde - m.mean;
    0.5 * (m.mean - d_tilde + (dev * dev + m.variance).sqrt())
}

fn lower_branch(d_tilde: f64, m: &MomentInfo) -> f64 {
    m.mean - d_tilde * m.mean * m.mean / m.second_moment()
}

/// Both closed-form branches evaluated at `d̃`, regardless of which one is
/// active. Useful for continuity checks.
pub fn branch_values(d_tilde: f64, m: &MomentInfo) -> (f64, f64) {
    (lower_branch(d_tilde, m), upper_branch(d_tilde, m))
}

/// Worst-case expected shortfall `N(d̃)`.
///
/// With zero variance the ambiguity set is a point mass at `μ` and the
/// value is `max(0, μ − d̃)`.
pub fn worst_case_shortfall(d_tilde: f64, m: &MomentInfo) -> Result<f64, AmbiguityError> {
    check(d_tilde, m)?;
    if m.variance == 0.0 {
        return Ok((m.mean - d_tilde).max(0.0));
    }
    let t = m.second_moment() / (2.0 * m.mean);
    Ok(if d_tilde > t { upper_branch(d_tilde, m) } else { lower_branch(d_tilde, m) })
}

/// Slope of `N` with respect to `d̃`. At the threshold the lower-branch
/// constant `−μ²/(μ² + σ²)` is returned; both branches agree there.
pub fn shortfall_derivative(d_tilde: f64, m: &MomentInfo) -> Result<f64, AmbiguityError> {
    check(d_tilde, m)?;
    if m.variance == 0.0 {
        return Ok(if d_tilde < m.mean { -1.0 } else { 0.0 });
    }
    let t = m.second_moment() / (2.0 * m.mean);
    if d_tilde > t {
        let dev = d_tilde - m.mean;
        Ok(0.5 * (dev / (dev * dev + m.variance).sqrt() - 1.0))
    } else {
        Ok(-m.mean * m.mean / m.second_moment())
    }
}

/// The two-point law attaining `N(d̃)`.
pub fn worst_case_distribution(d_tilde: f64, m: &MomentInfo) -> Result<TwoPointDistribution, AmbiguityError> {
    check(d_tilde, m)?;
    let s2 = m.second_moment();
    if m.variance == 0.0 {
        // Degenerate: both points collapse onto μ.
        return Ok(TwoPointDistribution { lower_point: m.mean, upper_point: m.mean, lower_mass: 0.0, upper_mass: 1.0 });
    }
    let t = s2 / (2.0 * m.mean);
    if d_tilde <= t {
        let lower_mass = m.variance / s2;
        return Ok(TwoPointDistribution {
            lower_point: 0.0,
            upper_point: s2 / m.mean,
            lower_mass,
            upper_mass: 1.0 - lower_mass,
        });
    }
    let dev = d_tilde - m.mean;
    let upper = d_tilde + (dev * dev + m.variance).sqrt();
    let gap = upper - m.mean;
    let q = gap * gap / (m.variance + gap * gap);
    // α = μ − σ²/(χ₂ − μ) is the same value as (μ − (1 − q)χ₂)/q but
    // avoids the cancellation in the numerator.
    let lower = m.mean - m.variance / gap;
    Ok(TwoPointDistribution { lower_point: lower, upper_point: upper, lower_mass: q, upper_mass: 1.0 - q })
}

/// Separable multi-commodity worst case `Σ_k N(d̃ᵏ)`.
pub fn multi_commodity_shortfall(d_tilde: &[f64], moments: &[MomentInfo]) -> Result<f64, AmbiguityError> {
    if d_tilde.len() != moments.len() {
        return Err(AmbiguityError::LengthMismatch { commitments: d_tilde.len(), moments: moments.len() });
    }
    d_tilde.iter().zip(moments).map(|(&d, m)| worst_case_shortfall(d, m)).sum()
}

/// Samples `(d̃, N(d̃))` at `points` evenly spaced values in `[lo, hi]`.
pub fn shortfall_curve(m: &MomentInfo, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>, AmbiguityError> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let d = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            worst_case_shortfall(d, m).map(|n| (d, n))
        })
        .collect()
}

/// Solves nature's problem restricted to a finite support grid as an LP:
/// `max Σ pᵢ (dᵢ − d̃)₊` subject to `Σ pᵢ = 1`, `Σ pᵢ dᵢ = μ`,
/// `Σ pᵢ dᵢ² = μ² + σ²`, `p ≥ 0`.
///
/// The grid always includes the analytic support points, so the optimum
/// coincides with [`worst_case_shortfall`] whenever the grid is a subset
/// of `[0, ∞)`.
pub fn grid_lp_shortfall(d_tilde: f64, m: &MomentInfo, filler_points: usize) -> Result<f64, AmbiguityError> {
    check(d_tilde, m)?;
    let dist = worst_case_distribution(d_tilde, m)?;
    let hi = 2.0 * dist.upper_point.max(m.second_moment() / m.mean);
    let mut grid: Vec<f64> = (0..filler_points).map(|i| hi * i as f64 / (filler_points.max(2) - 1) as f64).collect();
    grid.extend([0.0, m.second_moment() / m.mean, dist.lower_point, dist.upper_point]);
    grid.retain(|d| *d >= 0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    // Rescale the support so the second-moment row stays O(1).
    let scale = hi.max(1.0);
    let mut lp = LinearProgram::new(Sense::Maximize);
    let p: Vec<_> = grid
        .iter()
        .enumerate()
        .map(|(i, d)| lp.add_var(format!("p[{i}]"), 0.0, f64::INFINITY, (d - d_tilde).max(0.0)))
        .collect();
    lp.add_constraint(p.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
    lp.add_constraint(p.iter().zip(&grid).map(|(&v, d)| (v, d / scale)).collect(), Relation::Eq, m.mean / scale);
    lp.add_constraint(
        p.iter().zip(&grid).map(|(&v, d)| (v, (d / scale).powi(2))).collect(),
        Relation::Eq,
        m.second_moment() / (scale * scale),
    );
    let sol = crate::lp::solve_lp(&lp).map_err(|_| AmbiguityError::GridLp(LpStatus::NumericFailure))?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        s => Err(AmbiguityError::GridLp(s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> MomentInfo {
        MomentInfo::new(10.0, 100.0).unwrap()
    }

    #[test]
    fn threshold_values() {
        assert_eq!(threshold(&fig1()).unwrap(), 10.0);
        assert_eq!(threshold(&MomentInfo { mean: 10.0, variance: 0.0 }).unwrap(), 5.0);
        assert_eq!(threshold(&MomentInfo::new(20.0, 100.0).unwrap()).unwrap(), 12.5);
        assert!(threshold(&MomentInfo { mean: 0.0, variance: 1.0 }).is_err());
        assert!(threshold(&MomentInfo { mean: -1.0, variance: 1.0 }).is_err());
    }

    #[test]
    fn shortfall_examples() {
        let m = fig1();
        assert_eq!(worst_case_shortfall(0.0, &m).unwrap(), 10.0);
        assert!((worst_case_shortfall(10.0, &m).unwrap() - 5.0).abs() < 1e-12);
        let (lo, hi) = branch_values(10.0, &m);
        assert!((lo - hi).abs() < 1e-12);
        let n20 = worst_case_shortfall(20.0, &m).unwrap();
        assert!((n20 - 0.5 * (-10.0 + 200f64.sqrt())).abs() < 1e-12);
        assert!((n20 - 2.071068).abs() < 1e-6);
        let dist = worst_case_distribution(20.0, &m).unwrap();
        assert!((dist.expected_shortfall(20.0) - n20).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(worst_case_shortfall(-1.0, &fig1()).is_err());
        assert!(worst_case_shortfall(f64::NAN, &fig1()).is_err());
        assert!(worst_case_shortfall(1.0, &MomentInfo { mean: 0.0, variance: 1.0 }).is_err());
        assert!(MomentInfo::new(1.0, -1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let m = fig1();
        assert_eq!(shortfall_derivative(10.0, &m).unwrap(), -0.5);
        // Upper-branch formula evaluated exactly at the threshold.
        let upper_at_t = 0.5 * (0.0 / (100f64).sqrt() - 1.0);
        assert_eq!(upper_at_t, -0.5);
        let s20 = shortfall_derivative(20.0, &m).unwrap();
        assert!((s20 - 0.5 * (10.0 / 200f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((s20 + 0.1464466).abs() < 1e-7);
        let h = 1e-5 * 20.0;
        let fd =
            (worst_case_shortfall(20.0 + h, &m).unwrap() - worst_case_shortfall(20.0 - h, &m).unwrap()) / (2.0 * h);
        assert!((fd - s20).abs() < 1e-6);
        let far = shortfall_derivative(1e9, &m).unwrap();
        assert!(far < 0.0 && far > -1e-12);
    }

    #[test]
    fn distribution_examples() {
        let m = fig1();
        let low = worst_case_distribution(5.0, &m).unwrap();
        assert_eq!((low.lower_point, low.upper_point), (0.0, 20.0));
        assert_eq!((low.lower_mass, low.upper_mass), (0.5, 0.5));
        let high = worst_case_distribution(20.0, &m).unwrap();
        assert!((high.upper_point - 34.142136).abs() < 1e-6);
        assert!((high.lower_mass - 0.853553).abs() < 1e-6);
        assert!((high.lower_point - 5.857864).abs() < 1e-6);
        // The lower point recovered from the mean condition.
        let q = high.lower_mass;
        let alpha = (m.mean - (1.0 - q) * high.upper_point) / q;
        assert!((alpha - high.lower_point).abs() < 1e-9);
        for d in [high, low] {
            assert!((d.mean() - 10.0).abs() < 1e-9);
            assert!((d.variance() - 100.0).abs() < 1e-9);
            assert!((d.lower_mass + d.upper_mass - 1.0).abs() < 1e-12);
            assert!(d.lower_point < d.upper_point);
        }
    }

    #[test]
    fn at_threshold_uses_lower_branch() {
        let m = MomentInfo::new(7.0, 30.0).unwrap();
        let t = threshold(&m).unwrap();
        let d = worst_case_distribution(t, &m).unwrap();
        assert_eq!(d.lower_point, 0.0);
        assert_eq!(worst_case_shortfall(t, &m).unwrap(), lower_branch(t, &m));
    }

    #[test]
    fn zero_variance_is_point_mass() {
        let m = MomentInfo::new(10.0, 0.0).unwrap();
        assert_eq!(worst_case_shortfall(4.0, &m).unwrap(), 6.0);
        assert_eq!(worst_case_shortfall(12.0, &m).unwrap(), 0.0);
        let d = worst_case_distribution(4.0, &m).unwrap();
        assert_eq!(d.mean(), 10.0);
        assert_eq!(d.variance(), 0.0);
    }

    #[test]
    fn multi_commodity_sum() {
        let m = fig1();
        assert_eq!(multi_commodity_shortfall(&[20.0], &[m]).unwrap(), worst_case_shortfall(20.0, &m).unwrap());
        assert!((multi_commodity_shortfall(&[10.0, 10.0], &[m, m]).unwrap() - 10.0).abs() < 1e-12);
        let m2 = MomentInfo::new(3.0, 5.0).unwrap();
        let a = multi_commodity_shortfall(&[4.0, 1.0], &[m, m2]).unwrap();
        let b = multi_commodity_shortfall(&[1.0, 4.0], &[m2, m]).unwrap();
        assert_eq!(a, b);
        assert!(multi_commodity_shortfall(&[1.0], &[m, m]).is_err());
    }

    #[test]
    fn grid_lp_matches_closed_form() {
        let m = fig1();
        for d in [0.0, 5.0, 10.0, 20.0, 35.0] {
            let lp = grid_lp_shortfall(d, &m, 60).unwrap();
            let cf = worst_case_shortfall(d, &m).unwrap();
            assert!((lp - cf).abs() < 1e-6, "d={d}: lp={lp} cf={cf}");
        }
    }
}
