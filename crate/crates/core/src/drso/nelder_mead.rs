//! Nelder-Mead minimization on the nonnegative orthant.
//!
//! Trial points are clamped to `x ≥ 0` before evaluation.

/// Reflection, expansion, contraction and shrink coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmCoefficients {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NmCoefficients {
    fn default() -> Self {
        Self { reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5 }
    }
}

impl NmCoefficients {
    /// Dimension-dependent coefficients that behave better than the
    /// classic ones once `n` grows past a handful.
    pub fn adaptive(n: usize) -> Self {
        let n = n.max(2) as f64;
        Self { reflection: 1.0, expansion: 1.0 + 2.0 / n, contraction: 0.75 - 1.0 / (2.0 * n), shrink: 1.0 - 1.0 / n }
    }
}

#[derive(Debug, Clone)]
pub struct NmOptions {
    pub coefficients: NmCoefficients,
    /// Stop when `f_max − f_min < tolerance · (1 + |f_best|)` and every
    /// vertex is within `point_tolerance · (1 + ‖x_best‖∞)` of the best one
    /// in each coordinate.
    pub tolerance: f64,
    /// Zero disables the size test.
    pub point_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Affine combination `a + t (b − a)`, clamped.
fn along(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let mut x: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect();
    project(&mut x);
    x
}

/// A flat spread alone also holds for vertices at equal heights on both
/// sides of a minimum.
fn small(simplex: &[(Vec<f64>, f64)], tol: f64) -> bool {
    if tol == 0.0 {
        return true;
    }
    let best = &simplex[0].0;
    let scale = 1.0 + best.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    simplex[1..].iter().all(|(v, _)| v.iter().zip(best).all(|(a, b)| (a - b).abs() <= tol * scale))
}

/// Minimizes `f` from `x0` with initial edge lengths `steps`.
pub fn minimize<E>(
    mut f: impl FnMut(&[f64]) -> Result<f64, E>,
    x0: &[f64],
    steps: &[f64],
    opts: &NmOptions,
) -> Result<NmResult, E> {
    let n = x0.len();
    let c = opts.coefficients;
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };

    let mut start = x0.to_vec();
    project(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start, &mut evaluations)?;
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut v = start.clone();
        v[i] += steps[i];
        project(&mut v);
        let fv = eval(&v, &mut evaluations)?;
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable sort keeps the order of ties deterministic.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst - best < opts.tolerance * (1.0 + best.abs()) && small(&simplex, opts.point_tolerance) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (ci, vi) in centroid.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        for ci in &mut centroid {
            *ci /= n as f64;
        }

        let xw = simplex[n].0.clone();
        let xr = along(&centroid, &xw, -c.reflection);
        let fr = eval(&xr, &mut evaluations)?;
        if fr < best {
            let xe = along(&centroid, &xr, c.expansion);
            let fe = eval(&xe, &mut evaluations)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < worst {
            let xc = along(&centroid, &xr, c.contraction);
            let fc = eval(&xc, &mut evaluations)?;
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(&centroid, &xw, c.contraction);
            let fc = eval(&xc, &mut evaluations)?;
            let ok = fc < worst;
            (xc, fc, ok)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let xb = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&xb, &vertex.0, c.shrink);
            let fx = eval(&x, &mut evaluations)?;
            *vertex = (x, fx);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Ok(NmResult { x, value, iterations, evaluations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> NmOptions {
        NmOptions {
            coefficients: NmCoefficients::default(),
            tolerance: 1e-12,
            point_tolerance: 0.0,
            max_iterations: 10_000,
        }
    }

    #[test]
    fn quadratic() {
        let r = minimize(
            |x: &[f64]| Ok::<_, ()>((x[0] - 3.0).powi(2) + 2.0 * (x[1] - 1.0).powi(2)),
            &[0.0, 0.0],
            &[1.0, 1.0],
            &opts(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn respects_orthant() {
        let r = minimize(
            |x: &[f64]| Ok::<_, ()>((x[0] + 2.0).powi(2) + (x[1] - 1.0).powi(2)),
            &[1.0, 1.0],
            &[0.5, 0.5],
            &opts(),
        )
        .unwrap();
        assert!(r.x.iter().all(|&v| v >= 0.0));
        assert!(r.x[0] < 1e-4 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn equal_heights_across_the_minimum_do_not_stop() {
        // Vertices at 1 and 5 start level around the minimum at 3.
        let f = |x: &[f64]| Ok::<_, ()>((x[0] - 3.0).abs());
        let spread_only = NmOptions { tolerance: 1e-6, ..opts() };
        let r = minimize(f, &[1.0], &[4.0], &spread_only).unwrap();
        assert_eq!(r.iterations, 0);
        let sized = NmOptions { point_tolerance: 1e-6, ..spread_only };
        let r = minimize(f, &[1.0], &[4.0], &sized).unwrap();
        assert!(r.converged && (r.x[0] - 3.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn reports_iteration_limit() {
        let o = NmOptions { max_iterations: 3, ..opts() };
        let r = minimize(|x: &[f64]| Ok::<_, ()>(x.iter().map(|v| (v - 5.0).powi(2)).sum()), &[0.0; 4], &[1.0; 4], &o)
            .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn adaptive_in_higher_dimension() {
        let o = NmOptions {
            coefficients: NmCoefficients::adaptive(10),
            tolerance: 1e-14,
            point_tolerance: 0.0,
            max_iterations: 50_000,
        };
        let target: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let r = minimize(
            |x: &[f64]| Ok::<_, ()>(x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum()),
            &[0.0; 10],
            &[1.0; 10],
            &o,
        )
        .unwrap();
        assert!(r.value < 1e-6, "{}", r.value);
    }

    #[test]
    fn errors_propagate() {
        let r = minimize(|_: &[f64]| Err::<f64, _>("boom"), &[1.0], &[1.0], &opts());
        assert_eq!(r.unwrap_err(), "boom");
    }
}
