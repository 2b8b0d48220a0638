//! Shared helpers for the integration tests: random instances and an
//! exhaustive LP oracle.

#![allow(dead_code)]

use netplan::lp::{LinearProgram, Relation, Sense};
use netplan::network::{Commodity, Instance, Network};
use rand::seq::SliceRandom;
use rand::Rng;

/// Strongly connected network: a bidirected ring plus `chords` random arcs.
/// Costs are in `[1, 10]`, base capacities in `{0, …, 4}`.
pub fn random_network<R: Rng>(rng: &mut R, nodes: usize, chords: usize) -> Network {
    let names: Vec<String> = (0..nodes).map(|i| format!("n{i}")).collect();
    let mut arcs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut add = |t: usize, h: usize, rng: &mut R| {
        if t != h && seen.insert((t, h)) {
            let u = f64::from(rng.random_range(0..5u8));
            let c = rng.random_range(1.0..10.0);
            arcs.push((format!("a{t}_{h}"), names[t].clone(), names[h].clone(), u, c));
        }
    };
    for i in 0..nodes {
        add(i, (i + 1) % nodes, rng);
        add((i + 1) % nodes, i, rng);
    }
    for _ in 0..chords {
        let t = rng.random_range(0..nodes);
        let h = rng.random_range(0..nodes);
        add(t, h, rng);
    }
    Network::new(names.clone(), arcs).expect("valid random network")
}

/// Random instance with `k` distinct ordered commodity pairs.
pub fn random_instance<R: Rng>(rng: &mut R, nodes: usize, k: usize, penalty: f64) -> Instance {
    let net = random_network(rng, nodes, nodes);
    let mut pairs: Vec<(usize, usize)> =
        (0..nodes).flat_map(|s| (0..nodes).map(move |t| (s, t))).filter(|(s, t)| s != t).collect();
    pairs.shuffle(rng);
    let commodities = pairs[..k]
        .iter()
        .enumerate()
        .map(|(i, &(source, sink))| Commodity { id: format!("k{i}"), source, sink })
        .collect();
    Instance::new(net, commodities, penalty).expect("valid random instance")
}

/// Random LP over `x ≥ 0` with `m` rows of small integer coefficients, a
/// budget row `Σ x ≤ B` that keeps it bounded, and right-hand sides chosen
/// so a random point is feasible. Integer data makes degeneracy common.
pub fn random_bounded_lp<R: Rng>(rng: &mut R, n: usize, m: usize) -> (LinearProgram, Vec<f64>) {
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut lp = LinearProgram::new(sense);
    let x0: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..4u8))).collect();
    let vars: Vec<_> = (0..n)
        .map(|j| lp.add_var(format!("x{j}"), 0.0, f64::INFINITY, f64::from(rng.random_range(-5..=5i8))))
        .collect();
    for _ in 0..m {
        let coeffs: Vec<_> =
            vars.iter().map(|&v| (v, f64::from(rng.random_range(-4..=4i8)))).filter(|c| c.1 != 0.0).collect();
        let lhs: f64 = coeffs.iter().map(|&(v, a)| a * x0[v.0]).sum();
        let slack = f64::from(rng.random_range(0..3u8));
        let (rel, rhs) = match rng.random_range(0..3) {
            0 => (Relation::Le, lhs + slack),
            1 => (Relation::Ge, lhs - slack),
            _ => (Relation::Eq, lhs),
        };
        lp.add_constraint(coeffs, rel, rhs);
    }
    let budget = x0.iter().sum::<f64>() + f64::from(rng.random_range(1..6u8));
    lp.add_constraint(vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Le, budget);
    (lp, x0)
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for j in col..n {
                        a[i][j] -= f * a[col][j];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Optimal objective of a bounded LP over `x ≥ 0` (no finite upper bounds)
/// by enumerating every basic solution. `None` if no vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut row = vec![0.0; n];
        for &(v, a) in &c.coeffs {
            row[v.0] += a;
        }
        planes.push((row, c.rhs));
    }
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        planes.push((row, 0.0));
    }
    let feasible = |x: &[f64]| {
        x.iter().all(|&v| v >= -1e-7)
            && lp.constraints.iter().all(|c| {
                let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum();
                let tol = 1e-7 * (1.0 + c.rhs.abs());
                match c.relation {
                    Relation::Le => lhs <= c.rhs + tol,
                    Relation::Ge => lhs >= c.rhs - tol,
                    Relation::Eq => (lhs - c.rhs).abs() <= tol,
                }
            })
    };
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut best: Option<f64> = None;
    combinations(planes.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let v = sign * lp.objective_at(&x);
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        }
    });
    best.map(|v| sign * v)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
