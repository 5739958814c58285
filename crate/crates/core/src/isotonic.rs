//! Order-restricted least squares: weighted pool-adjacent-violators for
//! non-increasing fits, and the projection onto matrices that are
//! non-increasing along both axes.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Weighted 1D isotonic problem with a non-increasing constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicProblem1D {
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl IsotonicProblem1D {
    pub fn unweighted(targets: Vec<f64>) -> Self {
        let weights = vec![1.0; targets.len()];
        Self { targets, weights }
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        pava_nonincreasing(&self.targets, &self.weights)
    }
}

/// Non-increasing weighted least-squares fit of `targets`.
pub fn pava_nonincreasing(targets: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = targets.to_vec();
    Pava::default().solve(&mut out, weights)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Block {
    weight: f64,
    weighted_sum: f64,
    end: usize,
}

/// Reusable PAVA workspace; solving many problems with one instance avoids
/// reallocating the block stack.
#[derive(Debug, Default, Clone)]
pub struct Pava {
    blocks: Vec<Block>,
}

impl Pava {
    /// Overwrites `values` with its non-increasing fit under `weights`.
    ///
    /// Zero-weight entries are carried inside the block they fall in and take
    /// its value without moving it. Leading zero-weight entries join the first
    /// positive-weight block. Equal adjacent means are pooled, so blocks are
    /// maximal.
    pub fn solve(&mut self, values: &mut [f64], weights: &[f64]) -> Result<()> {
        if values.len() != weights.len() {
            return Err(Error::Validation(format!(
                "{} targets but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Validation(format!(
                "isotonic weight {w} must be finite and >= 0"
            )));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::Degenerate("every isotonic weight is zero".into()));
        }
        self.solve_unchecked(values, weights);
        Ok(())
    }

    /// [`Pava::solve`] for inputs already known to be valid: equal lengths,
    /// finite non-negative weights, at least one positive.
    pub(crate) fn solve_unchecked(&mut self, values: &mut [f64], weights: &[f64]) {
        let first = weights.iter().position(|w| *w > 0.0).unwrap_or(0);
        let blocks = &mut self.blocks;
        blocks.clear();
        blocks.push(Block {
            weight: weights[first],
            weighted_sum: weights[first] * values[first],
            end: first + 1,
        });
        for i in first + 1..values.len() {
            let w = weights[i];
            if w == 0.0 {
                blocks.last_mut().expect("stack is non-empty").end = i + 1;
                continue;
            }
            let mut top = Block {
                weight: w,
                weighted_sum: w * values[i],
                end: i + 1,
            };
            // prev.mean <= top.mean, cross-multiplied (weights are positive).
            while let Some(prev) = blocks.last() {
                if prev.weighted_sum * top.weight > top.weighted_sum * prev.weight {
                    break;
                }
                top.weight += prev.weight;
                top.weighted_sum += prev.weighted_sum;
                blocks.pop();
            }
            blocks.push(top);
        }

        let mut start = 0;
        for b in blocks.iter() {
            values[start..b.end].fill(b.weighted_sum / b.weight);
            start = b.end;
        }
    }
}

/// Order of the two directional projections inside one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Risk direction (down columns) first, then time (along rows).
    #[default]
    RiskFirst,
    TimeFirst,
}

/// Solver for the doubly monotone projection. Both compute the same
/// Euclidean projection; they differ only in how fast they get there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionAlgorithm {
    /// Dykstra's alternating projections with residual correction.
    Dykstra,
    /// Accelerated proximal gradient on the dual (Dykstra's dual iteration
    /// with Nesterov momentum and gradient-based restarts).
    AcceleratedDual,
    /// Exact recursive partitioning at level thresholds; not iterative, so
    /// `tol` and `max_iter` do not apply.
    #[default]
    Partition,
}

impl std::str::FromStr for ProjectionAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dykstra" => Ok(ProjectionAlgorithm::Dykstra),
            "dual" | "accelerated-dual" => Ok(ProjectionAlgorithm::AcceleratedDual),
            "partition" | "exact" => Ok(ProjectionAlgorithm::Partition),
            other => Err(Error::Usage(format!("unknown projection solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    /// Stop once the weighted Frobenius norm of the change between
    /// successive iterates (and, for the dual solver, the remaining
    /// infeasibility) drops below this value.
    pub tol: f64,
    pub max_iter: usize,
    pub order: SweepOrder,
    pub algorithm: ProjectionAlgorithm,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            order: SweepOrder::RiskFirst,
            algorithm: ProjectionAlgorithm::default(),
        }
    }
}

impl ProjectionConfig {
    pub fn dykstra() -> Self {
        Self {
            algorithm: ProjectionAlgorithm::Dykstra,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    /// Row-major `n x K` projection.
    pub matrix: Vec<f64>,
    pub iterations: usize,
    pub change: f64,
}

/// Projects the row-major `n x K` `matrix` onto matrices that are
/// non-increasing down every column and along every row.
pub fn project_doubly_monotone(
    matrix: &[f64],
    n: usize,
    k: usize,
    config: &ProjectionConfig,
) -> Result<ProjectionOutcome> {
    project_doubly_monotone_weighted(matrix, &vec![1.0; n], &vec![1.0; k], config)
}

/// Weighted variant: the objective is `sum_ij r_i c_j (S_ij - M_ij)^2`.
///
/// Product weights let duplicated rows or columns be collapsed into one
/// weighted row or column without changing the solution.
pub fn project_doubly_monotone_weighted(
    matrix: &[f64],
    row_weights: &[f64],
    col_weights: &[f64],
    config: &ProjectionConfig,
) -> Result<ProjectionOutcome> {
    let n = row_weights.len();
    let k = col_weights.len();
    if matrix.len() != n * k {
        return Err(Error::Validation(format!(
            "matrix has {} entries, expected {n} x {k}",
            matrix.len()
        )));
    }
    if n == 0 || k == 0 {
        return Err(Error::Degenerate("empty matrix".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "matrix contains non-finite values".into(),
        ));
    }
    for w in row_weights.iter().chain(col_weights) {
        if !w.is_finite() || *w <= 0.0 {
            return Err(Error::Validation(format!(
                "projection weight {w} must be finite and > 0"
            )));
        }
    }
    let ops = Sweeps {
        n,
        k,
        row_weights,
        col_weights,
        order: config.order,
    };
    let outcome = match config.algorithm {
        ProjectionAlgorithm::Dykstra => dykstra(matrix, &ops, config)?,
        ProjectionAlgorithm::AcceleratedDual => accelerated_dual(matrix, &ops, config)?,
        ProjectionAlgorithm::Partition => partition(matrix, row_weights, col_weights),
    };
    let mut outcome = outcome;
    enforce_monotone(&mut outcome.matrix, k);
    tracing::debug!(
        n,
        k,
        iterations = outcome.iterations,
        change = outcome.change,
        "projection converged"
    );
    Ok(outcome)
}

/// The two directional projections, in the configured order.
struct Sweeps<'a> {
    n: usize,
    k: usize,
    row_weights: &'a [f64],
    col_weights: &'a [f64],
    order: SweepOrder,
}

impl Sweeps<'_> {
    fn first(&self, m: &mut [f64]) {
        match self.order {
            SweepOrder::RiskFirst => pava_columns(m, self.n, self.k, self.row_weights),
            SweepOrder::TimeFirst => pava_rows(m, self.k, self.col_weights),
        }
    }

    fn second(&self, m: &mut [f64]) {
        match self.order {
            SweepOrder::RiskFirst => pava_rows(m, self.k, self.col_weights),
            SweepOrder::TimeFirst => pava_columns(m, self.n, self.k, self.row_weights),
        }
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let k = self.k;
        a.chunks(k)
            .zip(b.chunks(k))
            .zip(self.row_weights)
            .map(|((ra, rb), rw)| {
                rw * ra
                    .iter()
                    .zip(rb)
                    .zip(self.col_weights)
                    .map(|((x, y), w)| w * (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Iterate and residuals of Dykstra's alternating projection.
#[derive(Debug, Clone)]
pub struct DykstraState {
    pub current: Vec<f64>,
    /// Residual of the first directional projection.
    pub eps_first: Vec<f64>,
    /// Residual of the second directional projection.
    pub eps_second: Vec<f64>,
    pub iterations: usize,
    pub change: f64,
}

fn dykstra(
    matrix: &[f64],
    ops: &Sweeps<'_>,
    config: &ProjectionConfig,
) -> Result<ProjectionOutcome> {
    let len = matrix.len();
    let mut st = DykstraState {
        current: matrix.to_vec(),
        eps_first: vec![0.0; len],
        eps_second: vec![0.0; len],
        iterations: 0,
        change: f64::INFINITY,
    };
    let mut prev = vec![0.0; len];
    let mut work = vec![0.0; len];
    while st.iterations < config.max_iter {
        st.iterations += 1;
        prev.copy_from_slice(&st.current);
        for ((u, s), e) in work.iter_mut().zip(&st.current).zip(&st.eps_first) {
            *u = s + e;
        }
        ops.first(&mut work);
        for ((e, s), p) in st.eps_first.iter_mut().zip(&st.current).zip(&work) {
            *e += s - p;
        }
        std::mem::swap(&mut st.current, &mut work);
        for ((v, s), e) in work.iter_mut().zip(&st.current).zip(&st.eps_second) {
            *v = s + e;
        }
        ops.second(&mut work);
        for ((e, s), p) in st.eps_second.iter_mut().zip(&st.current).zip(&work) {
            *e += s - p;
        }
        std::mem::swap(&mut st.current, &mut work);
        st.change = ops.dist(&st.current, &prev);
        if st.change < config.tol {
            // The second projection is exact; PAVA is order preserving, so a
            // pass in the first direction keeps it.
            let mut out = st.current;
            ops.first(&mut out);
            return Ok(ProjectionOutcome {
                matrix: out,
                iterations: st.iterations,
                change: st.change,
            });
        }
    }
    Err(Error::ProjectionNonConvergence {
        iterations: st.iterations,
        change: st.change,
        last_iterate: st.current,
    })
}

/// Fast dual proximal gradient. With `P1`, `P2` the two directional
/// projections and dual variable `y`:
/// `u = P1(m + w)`, `z = P2(u - w)`, `y' = w - u + z`, then a Nesterov
/// extrapolation `w' = y' + beta (y' - y)`, restarted whenever the step
/// opposes the momentum. `u` converges to the projection and `u - z` to 0.
fn accelerated_dual(
    matrix: &[f64],
    ops: &Sweeps<'_>,
    config: &ProjectionConfig,
) -> Result<ProjectionOutcome> {
    let len = matrix.len();
    let mut y = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut u = vec![0.0; len];
    let mut u_prev = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut t = 1.0_f64;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < config.max_iter {
        iterations += 1;
        std::mem::swap(&mut u, &mut u_prev);
        for ((ui, mi), wi) in u.iter_mut().zip(matrix).zip(&w) {
            *ui = mi + wi;
        }
        ops.first(&mut u);
        for ((zi, ui), wi) in z.iter_mut().zip(&u).zip(&w) {
            *zi = ui - wi;
        }
        ops.second(&mut z);

        let step = if iterations == 1 {
            f64::INFINITY
        } else {
            ops.dist(&u, &u_prev)
        };
        let gap = ops.dist(&u, &z);
        change = step.max(gap);
        if change < config.tol {
            ops.second(&mut u);
            return Ok(ProjectionOutcome {
                matrix: u,
                iterations,
                change,
            });
        }

        // z becomes y' - y, then y is advanced in place.
        for (((zi, wi), ui), yi) in z.iter_mut().zip(&w).zip(&u).zip(&y) {
            *zi = (wi - ui + *zi) - yi;
        }
        // Gradient restart: <w - y', y' - y> > 0 means the momentum overshot.
        let mut restart_dot = 0.0;
        {
            let k = ops.k;
            for (((wr, yr), dr), rw) in w
                .chunks(k)
                .zip(y.chunks(k))
                .zip(z.chunks(k))
                .zip(ops.row_weights)
            {
                let mut s = 0.0;
                for (((wi, yi), di), cw) in wr.iter().zip(yr).zip(dr).zip(ops.col_weights) {
                    s += cw * (wi - (yi + di)) * di;
                }
                restart_dot += rw * s;
            }
        }
        let t_next = if restart_dot > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if restart_dot > 0.0 {
            0.0
        } else {
            (t - 1.0) / t_next
        };
        for ((yi, wi), di) in y.iter_mut().zip(w.iter_mut()).zip(&z) {
            *yi += di;
            *wi = *yi + beta * di;
        }
        t = t_next;
    }
    Err(Error::ProjectionNonConvergence {
        iterations,
        change,
        last_iterate: u,
    })
}

/// Rows `first..first + lo.len()`; row `first + r` covers columns
/// `lo[r]..hi[r]`. Both bounds are non-increasing down the rows.
struct Region {
    first: usize,
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl Region {
    /// Drops empty rows at either end; `None` when nothing is left.
    fn trimmed(first: usize, lo: Vec<u32>, hi: Vec<u32>) -> Option<Self> {
        let start = (0..lo.len()).find(|r| lo[*r] < hi[*r])?;
        let end = (0..lo.len()).rev().find(|r| lo[*r] < hi[*r])? + 1;
        Some(Self {
            first: first + start,
            lo: lo[start..end].to_vec(),
            hi: hi[start..end].to_vec(),
        })
    }
}

/// Exact projection by recursive partitioning.
///
/// For a region with weighted mean `a`, the solution is `>= a` on the
/// down-set maximizing `sum w (y - a)` and `<= a` elsewhere, and the two
/// parts can be solved independently. Down-sets of a band are staircases,
/// found by dynamic programming over rows. A region whose best down-set has
/// no positive excess is a single block at its mean.
fn partition(matrix: &[f64], row_weights: &[f64], col_weights: &[f64]) -> ProjectionOutcome {
    let n = row_weights.len();
    let k = col_weights.len();
    let mut out = vec![0.0; n * k];
    let mut stack = vec![Region {
        first: 0,
        lo: vec![0; n],
        hi: vec![k as u32; n],
    }];
    let mut splits = 0;
    // Scratch shared across regions: DP values and suffix argmax pointers.
    let mut prev_v: Vec<f64> = Vec::new();
    let mut cur_v: Vec<f64> = Vec::new();
    let mut choice: Vec<u32> = Vec::new();
    let mut offsets: Vec<usize> = Vec::new();
    while let Some(region) = stack.pop() {
        let rows = region.lo.len();
        let (mut sw, mut swy, mut scale) = (0.0, 0.0, 0.0);
        for r in 0..rows {
            let i = region.first + r;
            let (lo, hi) = (region.lo[r] as usize, region.hi[r] as usize);
            let row = &matrix[i * k + lo..i * k + hi];
            let (mut a, mut b) = (0.0, 0.0);
            for (y, c) in row.iter().zip(&col_weights[lo..hi]) {
                a += c;
                b += c * y;
            }
            sw += row_weights[i] * a;
            swy += row_weights[i] * b;
        }
        let mean = swy / sw;
        for r in 0..rows {
            let i = region.first + r;
            let (lo, hi) = (region.lo[r] as usize, region.hi[r] as usize);
            let row = &matrix[i * k + lo..i * k + hi];
            let s: f64 = row
                .iter()
                .zip(&col_weights[lo..hi])
                .map(|(y, c)| c * (y - mean).abs())
                .sum();
            scale += row_weights[i] * s;
        }

        // V_r(b) = P_r(b) + max_{b' >= max(b, lo_{r-1})} V_{r-1}(b'), where
        // P_r(b) is the excess of columns lo_r..b of row r.
        offsets.clear();
        choice.clear();
        prev_v.clear();
        let mut prev_lo = 0usize;
        for r in 0..rows {
            let i = region.first + r;
            let (lo, hi) = (region.lo[r] as usize, region.hi[r] as usize);
            let rw = row_weights[i];
            // Suffix maxima of the previous row's values, with argmax.
            offsets.push(choice.len());
            if r > 0 {
                let len = prev_v.len();
                let base = choice.len();
                choice.resize(base + len, 0);
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0u32;
                for j in (0..len).rev() {
                    if prev_v[j] >= best {
                        best = prev_v[j];
                        arg = (prev_lo + j) as u32;
                    }
                    prev_v[j] = best;
                    choice[base + j] = arg;
                }
            }
            cur_v.clear();
            let mut acc = 0.0;
            for b in lo..=hi {
                if b > lo {
                    let y = matrix[i * k + b - 1];
                    acc += rw * col_weights[b - 1] * (y - mean);
                }
                let carry = if r == 0 {
                    0.0
                } else {
                    prev_v[b.max(prev_lo) - prev_lo]
                };
                cur_v.push(acc + carry);
            }
            std::mem::swap(&mut prev_v, &mut cur_v);
            prev_lo = lo;
        }
        // Smallest maximizer in the last row.
        let mut best = f64::NEG_INFINITY;
        let mut b_last = prev_lo;
        for (j, v) in prev_v.iter().enumerate() {
            if *v > best {
                best = *v;
                b_last = prev_lo + j;
            }
        }

        let tiny = 1e-13 * scale.max(f64::MIN_POSITIVE);
        let mut bounds = vec![0u32; rows];
        if best > tiny {
            bounds[rows - 1] = b_last as u32;
            for r in (1..rows).rev() {
                let lo_prev = region.lo[r - 1] as usize;
                let b = (bounds[r] as usize).max(lo_prev);
                bounds[r - 1] = choice[offsets[r] + b - lo_prev];
            }
        }
        let proper = best > tiny
            && (0..rows).any(|r| bounds[r] > region.lo[r])
            && (0..rows).any(|r| bounds[r] < region.hi[r]);
        if !proper {
            for r in 0..rows {
                let i = region.first + r;
                let (lo, hi) = (region.lo[r] as usize, region.hi[r] as usize);
                out[i * k + lo..i * k + hi].fill(mean);
            }
            continue;
        }
        splits += 1;
        let upper = Region::trimmed(region.first, region.lo.clone(), bounds.clone());
        let lower = Region::trimmed(region.first, bounds, region.hi);
        stack.extend(lower);
        stack.extend(upper);
    }
    ProjectionOutcome {
        matrix: out,
        iterations: splits,
        change: 0.0,
    }
}

/// Running minima along rows, then down columns. Removes rounding-level
/// violations so both orders hold exactly; taking minima never breaks the
/// order already established in the other direction.
fn enforce_monotone(matrix: &mut [f64], k: usize) {
    for row in matrix.chunks_mut(k) {
        for j in 1..row.len() {
            if row[j] > row[j - 1] {
                row[j] = row[j - 1];
            }
        }
    }
    let n = matrix.len() / k;
    for i in 1..n {
        let (above, below) = matrix.split_at_mut(i * k);
        let prev = &above[(i - 1) * k..];
        for (v, p) in below[..k].iter_mut().zip(prev) {
            if *v > *p {
                *v = *p;
            }
        }
    }
}

const TILE: usize = 32;

/// Non-increasing PAVA down every column of a row-major `n x K` matrix.
pub(crate) fn pava_columns(matrix: &mut [f64], n: usize, k: usize, row_weights: &[f64]) {
    let tiles: Vec<usize> = (0..k).step_by(TILE).collect();
    let group = rayon::current_num_threads().max(1) * 4;
    for starts in tiles.chunks(group) {
        let src = &*matrix;
        let solved: Vec<(usize, Vec<f64>)> = starts
            .par_iter()
            .map_init(Pava::default, |pava, &c0| {
                let width = TILE.min(k - c0);
                let mut buf = vec![0.0; width * n];
                for i in 0..n {
                    let row = &src[i * k + c0..i * k + c0 + width];
                    for (c, v) in row.iter().enumerate() {
                        buf[c * n + i] = *v;
                    }
                }
                for col in buf.chunks_mut(n) {
                    pava.solve_unchecked(col, row_weights);
                }
                (c0, buf)
            })
            .collect();
        for (c0, buf) in solved {
            let width = buf.len() / n;
            for i in 0..n {
                let row = &mut matrix[i * k + c0..i * k + c0 + width];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = buf[c * n + i];
                }
            }
        }
    }
}

/// Non-increasing PAVA along every row of a row-major matrix with `k` columns.
pub(crate) fn pava_rows(matrix: &mut [f64], k: usize, col_weights: &[f64]) {
    matrix
        .par_chunks_mut(k)
        .for_each_init(Pava::default, |pava, row| {
            pava.solve_unchecked(row, col_weights);
        });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(targets: &[f64]) -> Vec<f64> {
        pava_nonincreasing(targets, &vec![1.0; targets.len()]).unwrap()
    }

    #[test]
    fn feasible_input_is_unchanged() {
        assert_eq!(unit(&[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn single_violation_pools_everything() {
        assert_eq!(unit(&[1.0, 3.0, 2.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn zero_weight_entry_is_carried_without_influence() {
        let f = pava_nonincreasing(&[1.0, 3.0, 2.0], &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(f, vec![1.5, 1.5, 1.5]);
        let f = pava_nonincreasing(&[5.0, 9.0, 1.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(f, vec![9.0, 9.0, 1.0]);
    }

    #[test]
    fn all_zero_weights_are_degenerate() {
        let err = pava_nonincreasing(&[1.0, 2.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(pava_nonincreasing(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn single_row_projection_is_pava() {
        let row = [0.2, 0.9, 0.4, 0.5, 0.1];
        let out = project_doubly_monotone(&row, 1, 5, &ProjectionConfig::default()).unwrap();
        let expect = unit(&row);
        for (a, b) in out.matrix.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn doubly_monotone_matrix_is_a_fixed_point() {
        let m = [1.0, 0.8, 0.5, 0.9, 0.7, 0.2];
        let out = project_doubly_monotone(&m, 2, 3, &ProjectionConfig::dykstra()).unwrap();
        assert_eq!(out.matrix, m.to_vec());
        assert_eq!(out.iterations, 1);
        let out = project_doubly_monotone(&m, 2, 3, &ProjectionConfig::default()).unwrap();
        assert_eq!(out.matrix, m.to_vec());
    }

    #[test]
    fn non_convergence_carries_the_iterate() {
        let m = [0.0, 1.0, 1.0, 0.0, 0.3, 0.9, 0.2, 0.7, 0.4];
        let cfg = ProjectionConfig {
            tol: 0.0,
            max_iter: 3,
            ..ProjectionConfig::dykstra()
        };
        match project_doubly_monotone(&m, 3, 3, &cfg).unwrap_err() {
            Error::ProjectionNonConvergence {
                iterations,
                last_iterate,
                ..
            } => {
                assert_eq!(iterations, 3);
                assert_eq!(last_iterate.len(), 9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
