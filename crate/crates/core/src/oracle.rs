//! Brute-force reference computations.
//!
//! Everything here is deliberately naive and shares no code path with the
//! algorithms it is used to check. Exhaustive enumerations are exponential
//! and only meant for tiny instances.

use crate::valuation::ValuationMatrix;

/// Calls `visit` with every assignment `owner: [0, m) -> [0, n)`.
fn for_each_assignment(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    let mut owner = vec![0usize; m];
    loop {
        visit(&owner);
        let mut pos = 0;
        loop {
            if pos == m {
                return;
            }
            owner[pos] += 1;
            if owner[pos] < n {
                break;
            }
            owner[pos] = 0;
            pos += 1;
        }
    }
}

fn bundle_sums(values: &ValuationMatrix, owner: &[usize]) -> Vec<Vec<f64>> {
    // sums[i][k] = v_i(A_k)
    let n = values.n();
    let mut sums = vec![vec![0.0; n]; n];
    for (j, &k) in owner.iter().enumerate() {
        for (i, row) in sums.iter_mut().enumerate() {
            row[k] += values.get(i, j);
        }
    }
    sums
}

/// Maximum utilitarian welfare over all `n^m` allocations.
pub fn max_welfare(values: &ValuationMatrix) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_assignment(values.n(), values.m(), |owner| {
        let w: f64 = owner
            .iter()
            .enumerate()
            .map(|(j, &i)| values.get(i, j))
            .sum();
        best = best.max(w);
    });
    best
}

/// Minimum over all integral allocations of the maximum envy.
pub fn min_max_envy_integral(values: &ValuationMatrix) -> f64 {
    let n = values.n();
    let mut best = f64::INFINITY;
    for_each_assignment(n, values.m(), |owner| {
        let sums = bundle_sums(values, owner);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    worst = worst.max(sums[i][k] - sums[i][i]);
                }
            }
        }
        best = best.min(worst);
    });
    best
}

/// Lagrangian lower bound on the min-max-envy LP optimum.
///
/// `weights[i * n + k]` (`i != k`) is a non-negative multiplier on the
/// constraint `alpha >= v_i(x_k) - v_i(x_i)`; the weights are normalised to
/// sum to one (negative entries are treated as zero). For any such weights
/// every feasible `(x, alpha)` satisfies
/// `alpha >= sum_j min_k [ sum_{i != k} w_{ik} v_{ij} - sum_{l != k} w_{kl} v_{kj} ]`,
/// so the returned value never exceeds the LP optimum.
pub fn minmax_envy_lagrangian_bound(values: &ValuationMatrix, weights: &[f64]) -> f64 {
    let n = values.n();
    assert_eq!(weights.len(), n * n);
    let mut w: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(idx, &x)| if idx / n == idx % n { 0.0 } else { x.max(0.0) })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return f64::NEG_INFINITY;
    }
    w.iter_mut().for_each(|x| *x /= total);
    let mut bound = 0.0;
    for j in 0..values.m() {
        let mut best = f64::INFINITY;
        for k in 0..n {
            let mut c = 0.0;
            for i in 0..n {
                if i != k {
                    c += w[i * n + k] * values.get(i, j);
                    c -= w[k * n + i] * values.get(k, j);
                }
            }
            best = best.min(c);
        }
        bound += best;
    }
    bound
}

/// `E[f g] - E[f] E[g]` computed literally.
pub fn naive_association_gap(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let e = |h: &dyn Fn(usize) -> f64| (0..weights.len()).map(|a| weights[a] * h(a)).sum::<f64>();
    e(&|a| f[a] * g[a]) - e(&|a| f[a]) * e(&|a| g[a])
}

/// Conditional means of `X_1` given `X_1 + Y_1 > max_{i >= 2} X_i + Y_i`
/// (win) and given its complement (lose), computed through the CDF of a
/// single competitor's score: `P(win | X_1 + Y_1 = s) = P(X + Y < s)^(n-1)`.
///
/// Returns `None` when either event has probability zero.
pub fn conditional_means_via_cdf(
    d_support: &[f64],
    d_weights: &[f64],
    dp_support: &[f64],
    dp_weights: &[f64],
    n: usize,
) -> Option<(f64, f64)> {
    let mut scores: Vec<(f64, f64)> = Vec::new();
    for (x, wx) in d_support.iter().zip(d_weights) {
        for (y, wy) in dp_support.iter().zip(dp_weights) {
            scores.push((x + y, wx * wy));
        }
    }
    let below = |s: f64| -> f64 { scores.iter().filter(|(z, _)| *z < s).map(|(_, w)| w).sum() };
    let (mut p_win, mut x_win, mut p_lose, mut x_lose) = (0.0, 0.0, 0.0, 0.0);
    for (x, wx) in d_support.iter().zip(d_weights) {
        for (y, wy) in dp_support.iter().zip(dp_weights) {
            let w = wx * wy;
            let win = below(x + y).powi(n as i32 - 1);
            p_win += w * win;
            x_win += w * win * x;
            p_lose += w * (1.0 - win);
            x_lose += w * (1.0 - win) * x;
        }
    }
    if p_win <= 0.0 || p_lose <= 1e-15 {
        return None;
    }
    Some((x_win / p_win, x_lose / p_lose))
}
