#![allow(dead_code)]

use exact_tsa::lp::LpProblem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random LP with finite bounds whose right-hand side comes from an interior
/// point, so it is feasible and bounded.
pub fn random_feasible(seed: u64, max_vars: usize) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_vars);
    let m = rng.random_range(1..n.min(n / 2 + 2));
    let mut lp = LpProblem::new(n, m);
    for j in 0..n {
        lp.lower[j] = if rng.random_bool(0.3) { -rng.random_range(0.0..5.0) } else { 0.0 };
        lp.upper[j] = lp.lower[j] + rng.random_range(0.5..10.0);
        lp.cost[j] = rng.random_range(-10.0..10.0);
    }
    // a few variables without an upper bound but with nonnegative cost
    for j in 0..n {
        if rng.random_bool(0.15) {
            lp.upper[j] = f64::INFINITY;
            lp.cost[j] = lp.cost[j].abs();
        }
    }
    let x0: Vec<f64> = (0..n)
        .map(|j| {
            let hi = if lp.upper[j].is_finite() { lp.upper[j] } else { lp.lower[j] + 5.0 };
            rng.random_range(lp.lower[j]..=hi)
        })
        .collect();
    for i in 0..m {
        // every row touches at least one column of its own
        lp.eq_matrix.push((i, i, rng.random_range(0.5..3.0)));
        for j in 0..n {
            if j != i && rng.random_bool(0.4) {
                lp.eq_matrix.push((i, j, rng.random_range(-4.0..4.0)));
            }
        }
    }
    lp.eq_rhs = lp.row_activity(&x0);
    lp
}

/// Nonnegative variables whose first row sums to a negative value.
pub fn random_infeasible(seed: u64) -> LpProblem {
    let mut lp = random_feasible(seed, 30);
    lp.lower.iter_mut().for_each(|l| *l = 0.0);
    lp.upper.iter_mut().for_each(|u| *u = u.max(1.0));
    let n = lp.n_vars;
    lp.eq_matrix.retain(|&(r, _, _)| r != 0);
    for j in 0..n {
        lp.eq_matrix.push((0, j, 1.0 + (j % 3) as f64));
    }
    lp.eq_rhs[0] = -1.0;
    lp
}

/// A feasible LP plus a ray `s = t -> inf` along which the cost decreases.
pub fn random_unbounded(seed: u64) -> LpProblem {
    let mut lp = random_feasible(seed, 30);
    let (s, t, row) = (lp.n_vars, lp.n_vars + 1, lp.n_eq);
    lp.n_vars += 2;
    lp.n_eq += 1;
    lp.cost.extend([-1.0, 0.5]);
    lp.lower.extend([0.0, 0.0]);
    lp.upper.extend([f64::INFINITY, f64::INFINITY]);
    lp.eq_matrix.extend([(row, s, 1.0), (row, t, -1.0)]);
    lp.eq_rhs.push(0.0);
    lp
}

/// Minimum objective over every basic solution of an LP with finite bounds:
/// each choice of `m` basic columns and lower/upper placement of the rest.
/// `None` if no basic solution is feasible.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let (m, n) = (lp.n_eq, lp.n_vars);
    assert!(lp.upper.iter().all(|u| u.is_finite()));
    let mut a = DMatrix::<f64>::zeros(m, n);
    for &(r, c, v) in &lp.eq_matrix {
        a[(r, c)] += v;
    }
    let mut best: Option<f64> = None;
    for basis in combinations(n, m) {
        let b = DMatrix::from_fn(m, m, |i, k| a[(i, basis[k])]);
        let Some(lu) = Some(b.lu()).filter(|lu| lu.determinant().abs() > 1e-10) else {
            continue;
        };
        let nonbasic: Vec<usize> = (0..n).filter(|j| !basis.contains(j)).collect();
        for mask in 0u32..(1 << nonbasic.len()) {
            let mut x = vec![0.0; n];
            for (k, &j) in nonbasic.iter().enumerate() {
                x[j] = if mask >> k & 1 == 1 { lp.upper[j] } else { lp.lower[j] };
            }
            let ax = lp.row_activity(&x);
            let rhs = DVector::from_fn(m, |i, _| lp.eq_rhs[i] - ax[i]);
            let Some(xb) = lu.solve(&rhs) else { continue };
            let mut feasible = true;
            for (k, &j) in basis.iter().enumerate() {
                x[j] = xb[k];
                if xb[k] < lp.lower[j] - 1e-9 || xb[k] > lp.upper[j] + 1e-9 {
                    feasible = false;
                }
            }
            if feasible {
                let obj = lp.objective(&x);
                best = Some(best.map_or(obj, |b| b.min(obj)));
            }
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            go(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Random LP with at most `max_vars` bounded variables for enumeration.
pub fn random_small(seed: u64, max_vars: usize) -> LpProblem {
    let mut lp = random_feasible(seed, max_vars);
    for j in 0..lp.n_vars {
        if !lp.upper[j].is_finite() {
            lp.upper[j] = lp.lower[j] + 8.0;
        }
    }
    // the interior point may no longer be inside the tightened box; move the
    // rhs to the box centre
    let centre: Vec<f64> = (0..lp.n_vars).map(|j| 0.5 * (lp.lower[j] + lp.upper[j])).collect();
    lp.eq_rhs = lp.row_activity(&centre);
    lp
}

/// Minimum SSE over all contiguous partitions of `values` into `k` parts,
/// indexed by `k`.
pub fn brute_force_sse(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut best = vec![f64::INFINITY; n + 1];
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(values.iter().scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        }))
        .collect();
    let seg = |a: usize, b: usize| {
        let mean = (prefix[b] - prefix[a]) / (b - a) as f64;
        values[a..b].iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    };
    for mask in 0u32..(1 << (n - 1)) {
        let mut start = 0;
        let mut total = 0.0;
        for i in 0..n - 1 {
            if mask >> i & 1 == 1 {
                total += seg(start, i + 1);
                start = i + 1;
            }
        }
        total += seg(start, n);
        let k = mask.count_ones() as usize + 1;
        best[k] = best[k].min(total);
    }
    best
}
