//! Exact transportation simplex for balanced discrete problems.  Entering
//! variables follow Bland's rule and ties in the ratio test break
//! lexicographically, so degenerate pivots cannot cycle.

const RC_TOL: f64 = 1e-12;

/// Optimal flow matrix (row-major m x n) for min sum flow*cost subject to
/// row sums = supply and column sums = demand.  Supplies and demands must
/// balance; the desk scale here is at most a few thousand cells.
pub(crate) fn transport_lp(cost: &[f64], supply: &[f64], demand: &[f64]) -> Vec<f64> {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n);
    let mut flow = vec![0.0_f64; m * n];
    let mut basis = vec![false; m * n];

    // northwest-corner initial basic feasible solution: walks from (0,0)
    // to (m-1,n-1) marking exactly m+n-1 cells
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let t = s[i].min(d[j]);
        flow[i * n + j] = t;
        basis[i * n + j] = true;
        s[i] -= t;
        d[j] -= t;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if s[i] <= d[j] && i < m - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut iter = 0usize;
    loop {
        iter += 1;
        assert!(iter < 100_000, "transportation simplex failed to terminate");

        // duals from the basis tree: u_i + v_j = c_ij on basic cells
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut stack = vec![(0usize, true)];
        while let Some((k, is_row)) = stack.pop() {
            if is_row {
                for jj in 0..n {
                    if basis[k * n + jj] && v[jj].is_nan() {
                        v[jj] = cost[k * n + jj] - u[k];
                        stack.push((jj, false));
                    }
                }
            } else {
                for ii in 0..m {
                    if basis[ii * n + k] && u[ii].is_nan() {
                        u[ii] = cost[ii * n + k] - v[k];
                        stack.push((ii, true));
                    }
                }
            }
        }

        let mut entering = None;
        'scan: for ii in 0..m {
            for jj in 0..n {
                if !basis[ii * n + jj] && cost[ii * n + jj] - u[ii] - v[jj] < -RC_TOL {
                    entering = Some((ii, jj));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            // degenerate pivots leave ulp-scale residue on arcs that carry
            // no real mass; it is invisible in the cost but pollutes plan
            // supports, so sweep it out
            for f in &mut flow {
                if *f < 1e-13 {
                    *f = 0.0;
                }
            }
            return flow;
        };

        // unique path row ei -> col ej through the basis tree; adding the
        // entering cell closes it into the pivot cycle
        let path = tree_path(&basis, m, n, ei, ej);
        let mut theta = f64::INFINITY;
        let mut leave = (usize::MAX, usize::MAX);
        for (k, &(pi, pj)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = flow[pi * n + pj];
                if f < theta - RC_TOL
                    || (f <= theta + RC_TOL && (pi, pj) < leave)
                {
                    theta = f.min(theta);
                    leave = (pi, pj);
                }
            }
        }
        for (k, &(pi, pj)) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[pi * n + pj] = (flow[pi * n + pj] - theta).max(0.0);
            } else {
                flow[pi * n + pj] += theta;
            }
        }
        flow[ei * n + ej] += theta;
        basis[ei * n + ej] = true;
        basis[leave.0 * n + leave.1] = false;
        flow[leave.0 * n + leave.1] = 0.0;
    }
}

/// Arc sequence of the unique basis-tree path from row `ei` to col `ej`,
/// alternating row->col, col->row, ...
fn tree_path(basis: &[bool], m: usize, n: usize, ei: usize, ej: usize) -> Vec<(usize, usize)> {
    // nodes: rows 0..m, then cols m..m+n
    let mut parent = vec![usize::MAX; m + n];
    let mut parent_arc = vec![(usize::MAX, usize::MAX); m + n];
    let mut queue = std::collections::VecDeque::new();
    parent[ei] = ei;
    queue.push_back(ei);
    while let Some(node) = queue.pop_front() {
        if node == m + ej {
            break;
        }
        if node < m {
            for jj in 0..n {
                if basis[node * n + jj] && parent[m + jj] == usize::MAX {
                    parent[m + jj] = node;
                    parent_arc[m + jj] = (node, jj);
                    queue.push_back(m + jj);
                }
            }
        } else {
            let jj = node - m;
            for ii in 0..m {
                if basis[ii * n + jj] && parent[ii] == usize::MAX {
                    parent[ii] = node;
                    parent_arc[ii] = (ii, jj);
                    queue.push_back(ii);
                }
            }
        }
    }
    let mut arcs = Vec::new();
    let mut node = m + ej;
    assert!(parent[node] != usize::MAX, "basis is not a spanning tree");
    while node != ei {
        arcs.push(parent_arc[node]);
        node = parent[node];
    }
    arcs.reverse();
    arcs
}
