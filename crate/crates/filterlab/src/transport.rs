//! Exact solution of the discrete optimal-transport (transportation) linear
//! program, and the barycentric reduction of a plan to posterior points.
//!
//! The solver is a transportation-problem network simplex with a
//! northwest-corner initial basis. The entering arc comes from a block
//! search over the reduced costs (the most negative arc within a cyclic
//! window of sqrt(P N) cells, resuming where the previous pivot stopped);
//! after a run of degenerate pivots the entering rule drops to Bland's
//! lowest-index rule, which cannot cycle, and returns to block search on
//! the next strict improvement. Degenerate flows stay exactly zero, the
//! leaving arc is the lowest-index minimizer of the ratio test, and the
//! final flows are re-solved on the basis tree directly from the input
//! marginals. Every scan runs in a fixed order, so identical input bits
//! produce identical plan bits.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gmm::StateVector;

/// Pairwise squared Euclidean distances between source and target points.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: DMatrix<f64>,
}

impl CostMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }
}

/// Builds the squared-Euclidean cost matrix (sources as rows, targets as
/// columns).
pub fn cost_matrix(src: &[StateVector], dst: &[StateVector]) -> CostMatrix {
    assert!(!src.is_empty() && !dst.is_empty(), "cost matrix needs nonempty point sets");
    let dim = src[0].len();
    assert!(
        src.iter().chain(dst.iter()).all(|p| p.len() == dim),
        "cost matrix points must share one dimension"
    );
    let entries = DMatrix::from_fn(src.len(), dst.len(), |i, j| (&src[i] - &dst[j]).norm_squared());
    CostMatrix { entries }
}

/// A nonnegative coupling with prescribed row sums (source weights) and
/// column sums (target weights); a basic solution has at most P + N - 1
/// strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: DMatrix<f64>,
}

impl TransportPlan {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Total cost of this plan under the given cost matrix.
    pub fn objective(&self, cost: &CostMatrix) -> f64 {
        self.entries.zip_fold(cost.entries(), 0.0, |acc, t, c| acc + t * c)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.entries.nrows())
            .map(|i| self.entries.row(i).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.entries.ncols())
            .map(|j| self.entries.column(j).sum())
            .collect()
    }
}

const FEASIBILITY_TOL: f64 = 1e-9;

/// Solves the transportation problem exactly: minimizes `sum T_ij c_ij`
/// subject to `T 1 = src_w`, `T' 1 = dst_w`, `T >= 0`.
///
/// Weight vectors must carry the same total mass within 1e-9 (the target
/// side is rescaled internally to match exactly). Zero-weight rows and
/// columns are dropped for the solve and reinserted as zero rows/columns.
pub fn solve_transport(cost: &CostMatrix, src_w: &[f64], dst_w: &[f64]) -> Result<TransportPlan> {
    let p = cost.nrows();
    let n = cost.ncols();
    if src_w.len() != p {
        return Err(Error::DimensionMismatch {
            context: "source weights",
            expected: p,
            got: src_w.len(),
        });
    }
    if dst_w.len() != n {
        return Err(Error::DimensionMismatch {
            context: "target weights",
            expected: n,
            got: dst_w.len(),
        });
    }
    assert!(
        src_w.iter().chain(dst_w.iter()).all(|&w| w >= 0.0 && w.is_finite()),
        "transport weights must be finite and nonnegative"
    );
    let src_mass: f64 = src_w.iter().sum();
    let dst_mass: f64 = dst_w.iter().sum();
    if (src_mass - dst_mass).abs() > FEASIBILITY_TOL * src_mass.max(dst_mass).max(1.0) {
        return Err(Error::MarginalMismatch { src_mass, dst_mass });
    }

    // Drop zero-weight rows and columns; remember where they were.
    let rows: Vec<usize> = (0..p).filter(|&i| src_w[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| dst_w[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Ok(TransportPlan {
            entries: DMatrix::zeros(p, n),
        });
    }
    let supplies: Vec<f64> = rows.iter().map(|&i| src_w[i]).collect();
    let scale = src_mass / dst_mass;
    let demands: Vec<f64> = cols.iter().map(|&j| dst_w[j] * scale).collect();
    let reduced = DMatrix::from_fn(rows.len(), cols.len(), |a, b| cost.entries()[(rows[a], cols[b])]);

    let dense = simplex_core(&reduced, &supplies, &demands)?;

    let mut entries = DMatrix::zeros(p, n);
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            entries[(i, j)] = dense[(a, b)];
        }
    }
    Ok(TransportPlan { entries })
}

/// Network simplex on the dense transportation problem. `supplies` and
/// `demands` are strictly positive and balanced.
fn simplex_core(cost: &DMatrix<f64>, supplies: &[f64], demands: &[f64]) -> Result<DMatrix<f64>> {
    let p = supplies.len();
    let n = demands.len();
    let n_nodes = p + n;
    let n_arcs = p + n - 1;

    // Basis arcs (row, col, flow) from the northwest corner. Ties insert
    // exact-zero flows, keeping the arc count at p + n - 1.
    let mut arc_row = Vec::with_capacity(n_arcs);
    let mut arc_col = Vec::with_capacity(n_arcs);
    let mut arc_flow = Vec::with_capacity(n_arcs);
    let mut in_basis = vec![usize::MAX; p * n];
    {
        let mut a_rem = supplies.to_vec();
        let mut b_rem = demands.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = a_rem[i].min(b_rem[j]);
            in_basis[i * n + j] = arc_row.len();
            arc_row.push(i);
            arc_col.push(j);
            arc_flow.push(q);
            a_rem[i] -= q;
            b_rem[j] -= q;
            if i == p - 1 && j == n - 1 {
                break;
            }
            if a_rem[i] <= b_rem[j] && i < p - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    debug_assert_eq!(arc_row.len(), n_arcs);

    let cost_scale = cost.amax().max(1.0);
    let pivot_tol = 1e-11 * cost_scale;
    let max_pivots = 1000 * n_nodes + 100_000;
    // After this many consecutive degenerate pivots, fall back to Bland's
    // rule until the objective strictly improves again.
    let degenerate_patience = 4 * n_nodes;
    let mut degenerate_run = 0usize;
    let total_cells = p * n;
    let block_size = ((total_cells as f64).sqrt() as usize).max(16).min(total_cells);
    let mut scan_start = 0usize;

    // Scratch buffers reused across pivots.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut potential = vec![0.0_f64; n_nodes];
    let mut parent_arc = vec![usize::MAX; n_nodes];
    let mut visited = vec![false; n_nodes];
    let mut queue = Vec::with_capacity(n_nodes);
    let mut minus_arcs: Vec<usize> = Vec::new();
    let mut plus_arcs: Vec<usize> = Vec::new();

    for _pivot in 0..max_pivots {
        // Rebuild adjacency of the spanning tree (nodes: 0..p rows, p..p+n cols).
        for adj in adjacency.iter_mut() {
            adj.clear();
        }
        for a in 0..n_arcs {
            adjacency[arc_row[a]].push(a);
            adjacency[p + arc_col[a]].push(a);
        }

        // Node potentials from the tree: reduced cost of basic arcs is zero.
        visited.fill(false);
        queue.clear();
        queue.push(0usize);
        visited[0] = true;
        potential[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &a in &adjacency[node] {
                let other = if node < p { p + arc_col[a] } else { arc_row[a] };
                if !visited[other] {
                    visited[other] = true;
                    let c = cost[(arc_row[a], arc_col[a])];
                    potential[other] = c - potential[node];
                    queue.push(other);
                }
            }
        }

        // Entering arc.
        let blands = degenerate_run >= degenerate_patience;
        let mut best = -pivot_tol;
        let mut enter: Option<(usize, usize)> = None;
        if blands {
            // Lowest-index negative reduced cost; provably cycle-free.
            'scan: for i in 0..p {
                let ui = potential[i];
                for j in 0..n {
                    if in_basis[i * n + j] == usize::MAX {
                        let r = cost[(i, j)] - ui - potential[p + j];
                        if r < best {
                            best = r;
                            enter = Some((i, j));
                            break 'scan;
                        }
                    }
                }
            }
        } else {
            // Block search: best arc within a window, resuming cyclically.
            let mut examined = 0usize;
            let mut in_block = 0usize;
            let mut pos = scan_start;
            while examined < total_cells {
                if in_basis[pos] == usize::MAX {
                    let (i, j) = (pos / n, pos % n);
                    let r = cost[(i, j)] - potential[i] - potential[p + j];
                    if r < best {
                        best = r;
                        enter = Some((i, j));
                    }
                }
                examined += 1;
                in_block += 1;
                pos += 1;
                if pos == total_cells {
                    pos = 0;
                }
                if in_block == block_size {
                    if enter.is_some() {
                        break;
                    }
                    in_block = 0;
                }
            }
            scan_start = pos;
        }
        let Some((ei, ej)) = enter else {
            // Optimal: re-solve exact flows on the final basis tree.
            return Ok(tree_flows(p, n, &arc_row, &arc_col, supplies, demands));
        };

        // Unique tree path from row node ei to col node p + ej.
        visited.fill(false);
        parent_arc.fill(usize::MAX);
        queue.clear();
        queue.push(ei);
        visited[ei] = true;
        let target = p + ej;
        let mut head = 0;
        while head < queue.len() && !visited[target] {
            let node = queue[head];
            head += 1;
            for &a in &adjacency[node] {
                let other = if node < p { p + arc_col[a] } else { arc_row[a] };
                if !visited[other] {
                    visited[other] = true;
                    parent_arc[other] = a;
                    queue.push(other);
                }
            }
        }
        debug_assert!(visited[target], "basis must be a spanning tree");

        // Walk back from the target collecting the alternating cycle: the
        // entering arc pushes +theta into col ej, so the tree arc feeding
        // each col node on the path sheds theta and the arc leaving each row
        // node picks it up.
        minus_arcs.clear();
        plus_arcs.clear();
        let mut node = target;
        while node != ei {
            let a = parent_arc[node];
            if node >= p {
                minus_arcs.push(a);
                node = arc_row[a];
            } else {
                plus_arcs.push(a);
                node = p + arc_col[a];
            }
        }

        // Ratio test over -theta arcs; leaving arc is the lowest (row, col)
        // among the exact minimizers.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for &a in &minus_arcs {
            let f = arc_flow[a];
            if f < theta
                || (f == theta && (arc_row[a], arc_col[a]) < (arc_row[leave], arc_col[leave]))
            {
                theta = f;
                leave = a;
            }
        }
        debug_assert_ne!(leave, usize::MAX);

        if theta > 0.0 {
            for &a in &plus_arcs {
                arc_flow[a] += theta;
            }
            for &a in &minus_arcs {
                arc_flow[a] -= theta;
            }
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }

        // Swap the leaving arc for the entering one.
        in_basis[arc_row[leave] * n + arc_col[leave]] = usize::MAX;
        in_basis[ei * n + ej] = leave;
        arc_row[leave] = ei;
        arc_col[leave] = ej;
        arc_flow[leave] = theta;
    }
    Err(Error::InvalidConfig(
        "transport solver exceeded its pivot budget".into(),
    ))
}

/// Exact flows on a spanning-tree basis for the original (unperturbed)
/// marginals, by repeatedly resolving leaf nodes.
fn tree_flows(
    p: usize,
    n: usize,
    arc_row: &[usize],
    arc_col: &[usize],
    supplies: &[f64],
    demands: &[f64],
) -> DMatrix<f64> {
    let n_nodes = p + n;
    let n_arcs = arc_row.len();
    let mut degree = vec![0usize; n_nodes];
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for a in 0..n_arcs {
        degree[arc_row[a]] += 1;
        degree[p + arc_col[a]] += 1;
        adjacency[arc_row[a]].push(a);
        adjacency[p + arc_col[a]].push(a);
    }
    // Node balance: +supply for rows, -demand for cols.
    let mut balance = vec![0.0_f64; n_nodes];
    for i in 0..p {
        balance[i] = supplies[i];
    }
    for j in 0..n {
        balance[p + j] = -demands[j];
    }

    let mut removed_arc = vec![false; n_arcs];
    let mut removed_node = vec![false; n_nodes];
    let mut flow = vec![0.0_f64; n_arcs];
    let mut stack: Vec<usize> = (0..n_nodes).filter(|&v| degree[v] == 1).collect();
    while let Some(leaf) = stack.pop() {
        if removed_node[leaf] || degree[leaf] == 0 {
            continue;
        }
        let Some(&a) = adjacency[leaf].iter().find(|&&a| !removed_arc[a]) else {
            continue;
        };
        // Flow on the leaf arc settles the leaf's remaining balance. Rows
        // push +flow, cols pull -flow.
        let f = if leaf < p { balance[leaf] } else { -balance[leaf] };
        flow[a] = f;
        let other = if leaf < p { p + arc_col[a] } else { arc_row[a] };
        // Transfer: the arc moves `f` mass from its row to its col.
        if leaf < p {
            balance[other] += f;
        } else {
            balance[other] -= f;
        }
        removed_arc[a] = true;
        removed_node[leaf] = true;
        degree[leaf] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
    }

    let mut dense = DMatrix::zeros(p, n);
    for a in 0..n_arcs {
        // Degenerate arcs may pick up a roundoff-negative flow; clamp.
        dense[(arc_row[a], arc_col[a])] = flow[a].max(0.0);
    }
    dense
}

/// Barycentric projection of a transport plan: target point j becomes the
/// convex combination of source points with weights `T_.j / w_j`.
pub fn barycentric_projection(
    plan: &TransportPlan,
    src: &[StateVector],
    dst_w: &[f64],
) -> Result<Vec<StateVector>> {
    let p = plan.entries().nrows();
    let n = plan.entries().ncols();
    if src.len() != p {
        return Err(Error::DimensionMismatch {
            context: "barycentric source points",
            expected: p,
            got: src.len(),
        });
    }
    if dst_w.len() != n {
        return Err(Error::DimensionMismatch {
            context: "barycentric target weights",
            expected: n,
            got: dst_w.len(),
        });
    }
    let dim = src[0].len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        if dst_w[j] <= 0.0 {
            return Err(Error::ZeroMassTarget { index: j });
        }
        let mut acc = StateVector::zeros(dim);
        for i in 0..p {
            let t = plan.entries()[(i, j)];
            if t != 0.0 {
                acc += &src[i] * t;
            }
        }
        out.push(acc / dst_w[j]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn pts(values: &[f64]) -> Vec<StateVector> {
        values.iter().map(|&v| dvector![v]).collect()
    }

    #[test]
    fn cost_matrix_trivial_cases() {
        let one = pts(&[1.5]);
        let c = cost_matrix(&one, &one);
        assert_eq!(c.entries()[(0, 0)], 0.0);

        let c = cost_matrix(&pts(&[0.0, 1.0]), &pts(&[0.0, 1.0]));
        assert_eq!(c.entries()[(0, 0)], 0.0);
        assert_eq!(c.entries()[(0, 1)], 1.0);
        assert_eq!(c.entries()[(1, 0)], 1.0);
        assert_eq!(c.entries()[(1, 1)], 0.0);
    }

    #[test]
    fn matched_supports_give_diagonal_plan() {
        let p = pts(&[0.0, 2.0, -1.0]);
        let w = [0.2, 0.5, 0.3];
        let c = cost_matrix(&p, &p);
        let plan = solve_transport(&c, &w, &w).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { w[i] } else { 0.0 };
                assert_abs_diff_eq!(plan.entries()[(i, j)], expect, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(plan.objective(&c), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_hand_case() {
        let c = cost_matrix(&pts(&[0.0, 1.0]), &pts(&[0.0, 1.0]));
        let plan = solve_transport(&c, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(plan.entries()[(0, 0)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.entries()[(0, 1)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.entries()[(1, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.entries()[(1, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.objective(&c), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn marginal_mismatch_rejected() {
        let c = cost_matrix(&pts(&[0.0]), &pts(&[1.0]));
        let err = solve_transport(&c, &[1.0], &[0.5]).unwrap_err();
        assert!(matches!(err, Error::MarginalMismatch { .. }));
    }

    #[test]
    fn zero_weight_rows_and_cols_reinserted() {
        let c = cost_matrix(&pts(&[0.0, 5.0, 1.0]), &pts(&[0.0, 9.0, 1.0]));
        let plan = solve_transport(&c, &[0.5, 0.0, 0.5], &[0.5, 0.0, 0.5]).unwrap();
        assert_eq!(plan.entries().nrows(), 3);
        for j in 0..3 {
            assert_eq!(plan.entries()[(1, j)], 0.0);
            assert_eq!(plan.entries()[(j, 1)], 0.0);
        }
        assert_abs_diff_eq!(plan.entries()[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.entries()[(2, 2)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn plan_is_deterministic() {
        let src = pts(&[0.3, -1.2, 0.9, 2.2, -0.4]);
        let dst = pts(&[0.0, 1.0, -1.0]);
        let c = cost_matrix(&src, &dst);
        let sw = [0.1, 0.3, 0.2, 0.25, 0.15];
        let dw = [0.5, 0.25, 0.25];
        let a = solve_transport(&c, &sw, &dw).unwrap();
        let b = solve_transport(&c, &sw, &dw).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn basic_solution_support_bound() {
        let src = pts(&[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let dst = pts(&[0.2, 1.7, 2.8]);
        let c = cost_matrix(&src, &dst);
        let sw = [1.0 / 7.0; 7];
        let dw = [0.3, 0.3, 0.4];
        let plan = solve_transport(&c, &sw, &dw).unwrap();
        let positive = plan.entries().iter().filter(|&&t| t > 0.0).count();
        assert!(positive <= 7 + 3 - 1);
    }

    #[test]
    fn cost_scaling_preserves_support() {
        let src = pts(&[0.1, 0.9, 1.7, 2.4]);
        let dst = pts(&[0.0, 2.0]);
        let sw = [0.25; 4];
        let dw = [0.5, 0.5];
        let c1 = cost_matrix(&src, &dst);
        let scaled = CostMatrix {
            entries: c1.entries() * 37.5,
        };
        let p1 = solve_transport(&c1, &sw, &dw).unwrap();
        let p2 = solve_transport(&scaled, &sw, &dw).unwrap();
        for (a, b) in p1.entries().iter().zip(p2.entries().iter()) {
            assert_eq!(*a > 1e-12, *b > 1e-12);
        }
    }

    #[test]
    fn barycentric_identity_on_diagonal_plan() {
        let p = pts(&[0.0, 2.0, -1.0]);
        let w = [0.2, 0.5, 0.3];
        let c = cost_matrix(&p, &p);
        let plan = solve_transport(&c, &w, &w).unwrap();
        let out = barycentric_projection(&plan, &p, &w).unwrap();
        for (a, b) in out.iter().zip(&p) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn barycentric_single_target_is_barycenter() {
        let src = pts(&[0.0, 1.0, 3.0]);
        let sw = [0.5, 0.25, 0.25];
        let dst = pts(&[0.0]);
        let c = cost_matrix(&src, &dst);
        let plan = solve_transport(&c, &sw, &[1.0]).unwrap();
        let out = barycentric_projection(&plan, &src, &[1.0]).unwrap();
        assert_abs_diff_eq!(out[0][0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn barycentric_hand_case() {
        let src = pts(&[0.0, 1.0]);
        let c = cost_matrix(&src, &src);
        let plan = solve_transport(&c, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
        let out = barycentric_projection(&plan, &src, &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(out[0][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1][0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn barycentric_zero_mass_target() {
        let src = pts(&[0.0]);
        let plan = TransportPlan {
            entries: DMatrix::zeros(1, 1),
        };
        let err = barycentric_projection(&plan, &src, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::ZeroMassTarget { index: 0 }));
    }
}
