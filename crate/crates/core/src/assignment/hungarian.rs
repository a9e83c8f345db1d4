//! Shortest augmenting path form of the Hungarian method, O(n^3).
//!
//! Dual potentials `u` (rows) and `v` (columns) keep every reduced cost
//! `c[i][j] - u[i] - v[j]` non-negative and zero on matched pairs. Column
//! reduction supplies the starting duals and a partial matching; each
//! remaining free row is then matched by a Dijkstra search over reduced
//! costs, after which the duals are shifted along the search tree.

const FREE: usize = usize::MAX;

pub(super) fn solve(n: usize, c: &[f64]) -> Vec<usize> {
    debug_assert_eq!(c.len(), n * n);
    let mut u = vec![0.0f64; n];
    let mut v = vec![f64::INFINITY; n];
    let mut col_of_row = vec![FREE; n];
    let mut row_of_col = vec![FREE; n];

    // Column reduction: v[j] = min_i c[i][j], matching each column to its
    // argmin row when that row is still free.
    let mut argmin = vec![0usize; n];
    for i in 0..n {
        let row = &c[i * n..(i + 1) * n];
        for (j, &cost) in row.iter().enumerate() {
            if cost < v[j] {
                v[j] = cost;
                argmin[j] = i;
            }
        }
    }
    for j in (0..n).rev() {
        let i = argmin[j];
        if col_of_row[i] == FREE {
            col_of_row[i] = j;
            row_of_col[j] = i;
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![0usize; n];
    let mut scanned_rows = vec![false; n];
    let mut scanned_cols = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut touched_rows: Vec<usize> = Vec::with_capacity(n);
    let mut touched_cols: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        if col_of_row[start] != FREE {
            continue;
        }
        dist.fill(f64::INFINITY);
        remaining.clear();
        remaining.extend((0..n).rev());
        touched_rows.clear();
        touched_cols.clear();

        let mut row = start;
        let mut shortest = 0.0f64;
        let sink = loop {
            scanned_rows[row] = true;
            touched_rows.push(row);
            let base = shortest - u[row];
            let costs = &c[row * n..(row + 1) * n];
            let mut best = f64::INFINITY;
            let mut best_at = 0;
            for (k, &j) in remaining.iter().enumerate() {
                let reduced = base + costs[j] - v[j];
                if reduced < dist[j] {
                    pred[j] = row;
                    dist[j] = reduced;
                }
                let d = dist[j];
                if d < best || (d == best && row_of_col[j] == FREE) {
                    best = d;
                    best_at = k;
                }
            }
            shortest = best;
            let j = remaining.swap_remove(best_at);
            scanned_cols[j] = true;
            touched_cols.push(j);
            if row_of_col[j] == FREE {
                break j;
            }
            row = row_of_col[j];
        };

        u[start] += shortest;
        for &i in &touched_rows {
            scanned_rows[i] = false;
            if i != start {
                u[i] += shortest - dist[col_of_row[i]];
            }
        }
        for &j in &touched_cols {
            scanned_cols[j] = false;
            v[j] -= shortest - dist[j];
        }

        let mut j = sink;
        loop {
            let i = pred[j];
            row_of_col[j] = i;
            let previous = std::mem::replace(&mut col_of_row[i], j);
            if i == start {
                break;
            }
            j = previous;
        }
    }
    col_of_row
}
