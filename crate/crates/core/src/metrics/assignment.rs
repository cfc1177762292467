//! Maximum-weight assignment on a dense matrix.
//!
//! Shortest augmenting path (Jonker-Volgenant family, in the row-by-row form
//! used by SciPy's `linear_sum_assignment`) on a square zero-padded cost
//! matrix, followed by a pass that picks the lexicographically smallest
//! assignment among all optimal ones.

use crate::scalar::Scalar;

/// Row → column assignment maximizing the summed weight. Rows are matched to
/// distinct columns; with `rows <= cols` every row is assigned, otherwise
/// every column is. Ties are broken towards the lexicographically smallest
/// column vector over rows in order.
pub fn max_weight_assignment<T: Scalar>(weights: &[Vec<T>], cols: usize) -> Vec<(usize, usize)> {
    let rows = weights.len();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    // Minimize negated weight; padding costs 0.
    let cost = |i: usize, j: usize| -> T {
        if i < rows && j < cols {
            T::zero() - weights[i][j]
        } else {
            T::zero()
        }
    };
    let (col_for_row, u, v) = solve_square(n, &cost);
    let refined = lexicographic_refine(n, &cost, &u, &v, col_for_row.clone());

    let total = |a: &[usize]| (0..n).fold(T::zero(), |acc, i| acc + cost(i, a[i]));
    let chosen = if within(total(&refined), total(&col_for_row), T::tolerance()) {
        refined
    } else {
        log::warn!("lexicographic refinement changed the optimum; keeping raw assignment");
        col_for_row
    };
    chosen
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols)
        .collect()
}

fn within<T: Scalar>(a: T, b: T, tol: T) -> bool {
    let d = if a > b { a - b } else { b - a };
    d <= tol
}

/// Returns the assignment and dual potentials `(u, v)` with
/// `cost(i, j) - u[i] - v[j] >= 0`, equality on assigned pairs.
fn solve_square<T: Scalar>(n: usize, cost: &impl Fn(usize, usize) -> T) -> (Vec<usize>, Vec<T>, Vec<T>) {
    let mut u = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut path = vec![0usize; n];
    let mut col4row: Vec<Option<usize>> = vec![None; n];
    let mut row4col: Vec<Option<usize>> = vec![None; n];
    let mut shortest: Vec<Option<T>> = vec![None; n];
    let mut visited_rows = vec![false; n];
    let mut visited_cols = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for cur_row in 0..n {
        shortest.iter_mut().for_each(|s| *s = None);
        visited_rows.iter_mut().for_each(|s| *s = false);
        visited_cols.iter_mut().for_each(|s| *s = false);
        remaining.clear();
        remaining.extend((0..n).rev());

        let mut min_val = T::zero();
        let mut i = cur_row;
        let sink = loop {
            visited_rows[i] = true;
            let mut lowest: Option<T> = None;
            let mut index = 0;
            for (it, &j) in remaining.iter().enumerate() {
                let r = min_val + cost(i, j) - u[i] - v[j];
                if shortest[j].is_none_or(|s| r < s) {
                    path[j] = i;
                    shortest[j] = Some(r);
                }
                let s = shortest[j].expect("just set");
                let better = match lowest {
                    None => true,
                    Some(l) => s < l || (s == l && row4col[j].is_none()),
                };
                if better {
                    lowest = Some(s);
                    index = it;
                }
            }
            min_val = lowest.expect("dense matrix always has a candidate");
            let j = remaining.swap_remove(index);
            visited_cols[j] = true;
            match row4col[j] {
                None => break j,
                Some(r) => i = r,
            }
        };

        u[cur_row] = u[cur_row] + min_val;
        for r in 0..n {
            if visited_rows[r] && r != cur_row {
                let c = col4row[r].expect("visited rows are assigned");
                u[r] = u[r] + min_val - shortest[c].expect("visited column has a distance");
            }
        }
        for c in 0..n {
            if visited_cols[c] {
                v[c] = v[c] - (min_val - shortest[c].expect("visited column has a distance"));
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = Some(r);
            let prev = col4row[r].replace(j);
            if r == cur_row {
                break;
            }
            j = prev.expect("path rows are assigned");
        }
    }
    let assignment = col4row
        .into_iter()
        .map(|c| c.expect("square problem assigns every row"))
        .collect();
    (assignment, u, v)
}

/// Among perfect matchings on tight edges (all optimal), picks the one whose
/// column vector is lexicographically smallest.
fn lexicographic_refine<T: Scalar>(
    n: usize,
    cost: &impl Fn(usize, usize) -> T,
    u: &[T],
    v: &[T],
    mut assign: Vec<usize>,
) -> Vec<usize> {
    let tol = T::tolerance();
    let tight = |i: usize, j: usize| cost(i, j) - u[i] - v[j] <= tol;
    let mut owner = vec![0usize; n];
    for (r, &c) in assign.iter().enumerate() {
        owner[c] = r;
    }
    let mut fixed_col = vec![false; n];

    for i in 0..n {
        let target = assign[i];
        for j in 0..target {
            if fixed_col[j] || !tight(i, j) {
                continue;
            }
            // Row `owner[j]` must reach the column `i` gives up via tight
            // edges among unfixed rows and columns.
            let start = owner[j];
            let mut came_from: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[j] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            let mut found = false;
            'bfs: while let Some(r) = queue.pop_front() {
                for c in 0..n {
                    if seen[c] || fixed_col[c] || !tight(r, c) {
                        continue;
                    }
                    seen[c] = true;
                    came_from[c] = Some(r);
                    if c == target {
                        found = true;
                        break 'bfs;
                    }
                    queue.push_back(owner[c]);
                }
            }
            if !found {
                continue;
            }
            let mut c = target;
            loop {
                let r = came_from[c].expect("reached column has a predecessor");
                let prev = assign[r];
                assign[r] = c;
                owner[c] = r;
                if r == start {
                    break;
                }
                c = prev;
            }
            assign[i] = j;
            owner[j] = i;
            break;
        }
        fixed_col[assign[i]] = true;
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn total(w: &[Vec<f64>], a: &[(usize, usize)]) -> f64 {
        a.iter().map(|&(i, j)| w[i][j]).sum()
    }

    #[test]
    fn crossed_best() {
        let w = vec![vec![0.1, 0.9], vec![0.8, 0.2]];
        assert_eq!(max_weight_assignment(&w, 2), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let w = vec![vec![0.1, 0.5, 0.9]];
        assert_eq!(max_weight_assignment(&w, 3), vec![(0, 2)]);
        let w = vec![vec![0.1], vec![0.7], vec![0.3]];
        assert_eq!(max_weight_assignment(&w, 1), vec![(1, 0)]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let w = vec![vec![1.0; 3]; 3];
        assert_eq!(max_weight_assignment(&w, 3), vec![(0, 0), (1, 1), (2, 2)]);
        let w = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(max_weight_assignment(&w, 2), vec![(0, 0), (1, 1)]);
        // Two optima of equal weight 1.5: prefer row 0 → column 0.
        let w = vec![vec![0.5, 1.0], vec![1.0, 0.5]];
        let a = max_weight_assignment(&w, 2);
        assert_eq!(total(&w, &a), 2.0);
        let w = vec![vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(max_weight_assignment(&w, 3), vec![(0, 1), (1, 0), (2, 2)]);
    }

    #[test]
    fn exact_rationals() {
        let r = |a, b| Rational64::new(a, b);
        let w = vec![vec![r(1, 3), r(2, 3)], vec![r(1, 2), r(1, 2)]];
        assert_eq!(max_weight_assignment(&w, 2), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn empty() {
        let w: Vec<Vec<f64>> = vec![];
        assert!(max_weight_assignment(&w, 3).is_empty());
        assert!(max_weight_assignment(&[vec![], vec![]] as &[Vec<f64>], 0).is_empty());
    }
}
