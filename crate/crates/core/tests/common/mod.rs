//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

/// Least-squares non-increasing fit by enumerating every split of the
/// vector into contiguous blocks (each block takes its weighted mean) and
/// keeping the best feasible candidate. Exponential; for tiny inputs only.
pub fn brute_force_isotonic(y: &[f64], w: &[f64]) -> Vec<f64> {
    let m = y.len();
    assert!(m >= 1 && m <= 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cuts in 0u32..(1 << (m - 1)) {
        let mut fit = vec![0.0; m];
        let mut start = 0;
        for end in 1..=m {
            if end == m || cuts & (1 << (end - 1)) != 0 {
                let ws: f64 = w[start..end].iter().sum();
                let mean = y[start..end]
                    .iter()
                    .zip(&w[start..end])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / ws;
                fit[start..end].fill(mean);
                start = end;
            }
        }
        if fit.windows(2).any(|p| p[1] > p[0] + 1e-12) {
            continue;
        }
        let sse: f64 = fit
            .iter()
            .zip(y)
            .zip(w)
            .map(|((f, t), wt)| wt * (f - t).powi(2))
            .sum();
        if best.as_ref().map_or(true, |(b, _)| sse < *b - 1e-15) {
            best = Some((sse, fit));
        }
    }
    best.expect("the all-pooled candidate is always feasible").1
}

pub fn is_doubly_monotone(m: &[f64], n: usize, k: usize, tol: f64) -> bool {
    for i in 0..n {
        for j in 0..k {
            let v = m[i * k + j];
            if j + 1 < k && m[i * k + j + 1] > v + tol {
                return false;
            }
            if i + 1 < n && m[(i + 1) * k + j] > v + tol {
                return false;
            }
        }
    }
    true
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Exact projection of a small `n x k` matrix onto doubly monotone
/// matrices. The optimum is constant on each of its level sets and equals
/// the target mean there, so minimizing over all set partitions of the
/// cells (block means, feasible candidates only) finds it exactly.
pub fn partition_projection(m: &[f64], n: usize, k: usize) -> Vec<f64> {
    let cells = n * k;
    assert!(cells <= 9);
    let mut labels = vec![0usize; cells];
    let mut best: Option<(f64, Vec<f64>)> = None;
    // Restricted growth strings enumerate each set partition once.
    fn visit(
        pos: usize,
        max_label: usize,
        labels: &mut Vec<usize>,
        m: &[f64],
        n: usize,
        k: usize,
        best: &mut Option<(f64, Vec<f64>)>,
    ) {
        let cells = labels.len();
        if pos == cells {
            let blocks = max_label + 1;
            let mut sum = vec![0.0; blocks];
            let mut cnt = vec![0.0; blocks];
            for (c, l) in labels.iter().enumerate() {
                sum[*l] += m[c];
                cnt[*l] += 1.0;
            }
            let fit: Vec<f64> = labels.iter().map(|l| sum[*l] / cnt[*l]).collect();
            if !is_doubly_monotone(&fit, n, k, 1e-12) {
                return;
            }
            let d = sq_dist(&fit, m);
            if best.as_ref().map_or(true, |(b, _)| d < *b) {
                *best = Some((d, fit));
            }
            return;
        }
        let limit = if pos == 0 { 0 } else { max_label + 1 };
        for l in 0..=limit {
            labels[pos] = l;
            visit(pos + 1, max_label.max(l), labels, m, n, k, best);
        }
    }
    visit(0, 0, &mut labels, m, n, k, &mut best);
    best.expect("constant matrix is feasible").1
}

/// Smallest squared distance from a 3x3 matrix to any doubly monotone
/// matrix whose entries lie on `{0, step, 2 step, ..., 1}`.
///
/// Dynamic program over rows: a row is a non-increasing triple of levels,
/// and each row must be entrywise below the previous one. The best cost
/// over all previous rows dominating a triple is a 3D suffix minimum.
pub fn grid_search_min_3x3(m: &[f64], levels: usize) -> f64 {
    let l = levels;
    let value = |a: usize| a as f64 / (l - 1) as f64;
    let idx = |a: usize, b: usize, c: usize| (a * l + b) * l + c;
    let row_cost = |r: usize, a: usize, b: usize, c: usize| {
        (m[r * 3] - value(a)).powi(2)
            + (m[r * 3 + 1] - value(b)).powi(2)
            + (m[r * 3 + 2] - value(c)).powi(2)
    };
    let inf = f64::INFINITY;
    let mut cost = vec![inf; l * l * l];
    for a in 0..l {
        for b in 0..=a {
            for c in 0..=b {
                cost[idx(a, b, c)] = row_cost(0, a, b, c);
            }
        }
    }
    for r in 1..3 {
        // dominate[a][b][c] = min cost over previous rows (a',b',c') with
        // a' >= a, b' >= b, c' >= c.
        let mut dom = cost.clone();
        for a in (0..l).rev() {
            for b in (0..l).rev() {
                for c in (0..l).rev() {
                    let mut v = dom[idx(a, b, c)];
                    if a + 1 < l {
                        v = v.min(dom[idx(a + 1, b, c)]);
                    }
                    if b + 1 < l {
                        v = v.min(dom[idx(a, b + 1, c)]);
                    }
                    if c + 1 < l {
                        v = v.min(dom[idx(a, b, c + 1)]);
                    }
                    dom[idx(a, b, c)] = v;
                }
            }
        }
        let mut next = vec![inf; l * l * l];
        for a in 0..l {
            for b in 0..=a {
                for c in 0..=b {
                    next[idx(a, b, c)] = dom[idx(a, b, c)] + row_cost(r, a, b, c);
                }
            }
        }
        cost = next;
    }
    cost.into_iter().fold(inf, f64::min)
}
