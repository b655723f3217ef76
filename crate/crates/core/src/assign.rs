//! Optimal rectangular assignment and IoU-based mask association.
//!
//! [`hungarian`] solves the linear assignment problem with the shortest
//! augmenting path form of the Hungarian method on a virtually padded square
//! matrix, then walks the equality subgraph of the optimal dual to return the
//! lexicographically smallest optimal pair list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{mask_iou, RleMask};

/// Dense row-major cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape {
                expected: format!("{rows}x{cols}"),
                got: format!("{} values", values.len()),
            });
        }
        Ok(CostMatrix { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let values = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        CostMatrix { rows, cols, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape {
                expected: format!("rows of length {cols}"),
                got: "ragged rows".into(),
            });
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of the original costs over `pairs`, accumulated in row order.
    pub total: f64,
}

const NONE: usize = usize::MAX;

/// Optimal assignment of cardinality `min(rows, cols)`.
///
/// Among equal-cost optima the lexicographically smallest pair list is
/// returned. Ties are detected on the equality subgraph of the final dual
/// with a relative tolerance of `1e-9`.
pub fn hungarian(cost: &CostMatrix, sense: Sense) -> Result<Assignment> {
    for r in 0..cost.rows {
        for c in 0..cost.cols {
            if !cost.get(r, c).is_finite() {
                return Err(Error::NonFiniteCost { row: r, col: c });
            }
        }
    }
    if cost.rows == 0 || cost.cols == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..cost.rows).collect(),
            unmatched_cols: (0..cost.cols).collect(),
            total: 0.0,
        });
    }

    let n = cost.rows.max(cost.cols);
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    // Virtual padding: entries outside the real block cost 0.
    let padded = |r: usize, c: usize| -> f64 {
        if r < cost.rows && c < cost.cols {
            sign * cost.get(r, c)
        } else {
            0.0
        }
    };

    let (row_pot, col_pot, col_match) = solve_square(n, &padded);

    let scale = cost.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let equality: Vec<Vec<usize>> = (0..n)
        .map(|r| {
            (0..n)
                .filter(|&c| (padded(r, c) - row_pot[r] - col_pot[c]).abs() <= tol)
                .collect()
        })
        .collect();

    let mut row_match = vec![NONE; n];
    for (c, &r) in col_match.iter().enumerate() {
        row_match[r] = c;
    }
    lexicographic_refine(&equality, &mut row_match);

    let mut pairs = Vec::new();
    let mut unmatched_rows = Vec::new();
    let mut col_used = vec![false; cost.cols];
    let mut total = 0.0;
    for (r, &c) in row_match.iter().enumerate().take(cost.rows) {
        if c < cost.cols {
            pairs.push((r, c));
            col_used[c] = true;
            total += cost.get(r, c);
        } else {
            unmatched_rows.push(r);
        }
    }
    let unmatched_cols = (0..cost.cols).filter(|&c| !col_used[c]).collect();
    Ok(Assignment {
        pairs,
        unmatched_rows,
        unmatched_cols,
        total,
    })
}

/// Shortest augmenting path Hungarian method on an `n x n` matrix.
/// Returns row potentials, column potentials, and the row matched to each
/// column. Reduced costs `a[r][c] - u[r] - v[c]` are non-negative and zero on
/// the matching.
fn solve_square(n: usize, a: &impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    // 1-based internally; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let row_pot = u[1..].to_vec();
    let col_pot = v[1..].to_vec();
    let col_match = p[1..].iter().map(|&r| r - 1).collect();
    (row_pot, col_pot, col_match)
}

/// Rewrites a perfect matching of the equality graph into the
/// lexicographically smallest one: row by row, take the lowest column that
/// still admits a perfect matching for the remaining rows.
fn lexicographic_refine(equality: &[Vec<usize>], row_match: &mut [usize]) {
    let n = row_match.len();
    let mut col_match = vec![NONE; n];
    for (r, &c) in row_match.iter().enumerate() {
        col_match[c] = r;
    }
    let mut col_fixed = vec![false; n];

    for i in 0..n {
        for &j in &equality[i] {
            if col_fixed[j] {
                continue;
            }
            if row_match[i] == j {
                col_fixed[j] = true;
                break;
            }
            let saved = (row_match.to_vec(), col_match.clone());
            let freed = row_match[i];
            let displaced = col_match[j];
            col_match[freed] = NONE;
            row_match[i] = j;
            col_match[j] = i;
            row_match[displaced] = NONE;
            col_fixed[j] = true;
            let mut visited = vec![false; n];
            if augment(
                displaced,
                equality,
                row_match,
                &mut col_match,
                &col_fixed,
                &mut visited,
            ) {
                break;
            }
            col_fixed[j] = false;
            row_match.copy_from_slice(&saved.0);
            col_match = saved.1;
        }
    }
}

fn augment(
    row: usize,
    equality: &[Vec<usize>],
    row_match: &mut [usize],
    col_match: &mut [usize],
    col_fixed: &[bool],
    visited: &mut [bool],
) -> bool {
    for &c in &equality[row] {
        if col_fixed[c] || visited[c] {
            continue;
        }
        visited[c] = true;
        let holder = col_match[c];
        if holder == NONE || augment(holder, equality, row_match, col_match, col_fixed, visited) {
            row_match[row] = c;
            col_match[c] = row;
            return true;
        }
    }
    false
}

/// One associated (segmentation, propagation) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub seg: usize,
    pub prop: usize,
    pub iou: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    pub matches: Vec<Match>,
    pub unmatched_seg: Vec<usize>,
    pub unmatched_prop: Vec<usize>,
}

/// Default association floor: only pairs with IoU strictly above it match.
pub const DEFAULT_IOU_FLOOR: f64 = 0.1;

/// IoU-maximizing bipartite association. Hungarian-matched pairs whose IoU
/// is `<= iou_floor` are reported as unmatched on both sides.
pub fn associate<S, P>(seg: &[S], prop: &[P], iou_floor: f64) -> Result<Association>
where
    S: AsRef<RleMask>,
    P: AsRef<RleMask>,
{
    let mut ious = Vec::with_capacity(seg.len() * prop.len());
    for s in seg {
        for p in prop {
            ious.push(mask_iou(s.as_ref(), p.as_ref())?);
        }
    }
    let matrix = CostMatrix::new(seg.len(), prop.len(), ious)?;
    let assignment = hungarian(&matrix, Sense::Maximize)?;

    let mut out = Association {
        matches: Vec::new(),
        unmatched_seg: assignment.unmatched_rows,
        unmatched_prop: assignment.unmatched_cols,
    };
    for (s, p) in assignment.pairs {
        let iou = matrix.get(s, p);
        if iou > iou_floor {
            out.matches.push(Match {
                seg: s,
                prop: p,
                iou,
            });
        } else {
            out.unmatched_seg.push(s);
            out.unmatched_prop.push(p);
        }
    }
    out.unmatched_seg.sort_unstable();
    out.unmatched_prop.sort_unstable();
    Ok(out)
}
