use super::lp;
use super::{Polytope, Tolerance, ZERO_ROW};
use crate::error::{Error, Result};

/// Coefficients below this magnitude are treated as zero when sorting rows
/// into positive, negative and zero groups for an eliminated coordinate.
const PIVOT: f64 = 1e-12;

pub(super) fn project(p: &Polytope, keep: &[usize], tol: &Tolerance) -> Result<Polytope> {
    if keep.is_empty() {
        return Err(Error::Precondition("projection needs at least one coordinate".into()));
    }
    for (pos, &k) in keep.iter().enumerate() {
        if k >= p.dim() {
            return Err(Error::Precondition(format!(
                "coordinate {k} out of range for a {}-dimensional set",
                p.dim()
            )));
        }
        if keep[..pos].contains(&k) {
            return Err(Error::Precondition(format!("coordinate {k} listed twice")));
        }
    }
    let mut current = p.remove_redundancy(tol)?;
    // Original coordinate index of each live column.
    let mut columns: Vec<usize> = (0..p.dim()).collect();
    if current.is_canonical_empty() {
        return Ok(Polytope::empty(keep.len()));
    }

    loop {
        let candidates: Vec<usize> = (0..columns.len())
            .filter(|&c| !keep.contains(&columns[c]))
            .collect();
        let Some(&col) = candidates.iter().min_by_key(|&&c| growth(&current, c)) else {
            break;
        };
        let next = drop_slack_rows(&current, col, eliminate(&current, col), tol)?;
        current = next.remove_redundancy(tol)?;
        columns.remove(col);
        if current.is_canonical_empty() {
            return Ok(Polytope::empty(keep.len()));
        }
    }

    // Columns are still in ascending original order; permute into `keep` order.
    let order: Vec<usize> = keep
        .iter()
        .map(|k| columns.iter().position(|c| c == k).expect("kept column"))
        .collect();
    let (a, b) = current.raw();
    let n = columns.len();
    let mut out = Vec::with_capacity(b.len() * n);
    for i in 0..b.len() {
        let row = &a[i * n..(i + 1) * n];
        out.extend(order.iter().map(|&c| row[c]));
    }
    Ok(Polytope::from_raw(n, out, b.to_vec()))
}

/// Drops rows of `eliminated` that stay strictly away from `before`: the
/// support of `before` in the row's direction (zero in column `col`) is
/// the support of the projection, so such rows cut nothing. These LPs only
/// see the rows of `before`, far fewer than the Fourier–Motzkin output.
///
/// A combined row is first tested against a relaxation of `before` made of
/// its two parent rows and the bounding box, which often settles it with a
/// tiny LP.
fn drop_slack_rows(before: &Polytope, col: usize, eliminated: Eliminated, tol: &Tolerance) -> Result<Polytope> {
    let n = before.dim();
    let (a, b) = before.raw();
    let mut boxed_a = Vec::with_capacity((2 * n + 2) * n);
    let mut boxed_b = Vec::with_capacity(2 * n + 2);
    if let Some(bbox) = before.bounding_box(tol)? {
        for (k, (lo, hi)) in bbox.into_iter().enumerate() {
            for (sign, bound) in [(1.0, hi), (-1.0, -lo)] {
                if bound.is_finite() {
                    boxed_a.extend((0..n).map(|c| if c == k { sign } else { 0.0 }));
                    boxed_b.push(bound);
                }
            }
        }
    }
    let box_rows = boxed_b.len();
    let slack = |value: lp::Value, rhs: f64| matches!(value, lp::Value::Finite(v) if v < rhs - tol.red);

    let mut ka = Vec::new();
    let mut kb = Vec::new();
    let mut dir = vec![0.0; n];
    for ((row, rhs), parents) in eliminated.rows.rows().zip(&eliminated.parents) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < ZERO_ROW {
            if rhs < -tol.feas {
                return Ok(Polytope::empty(n - 1));
            }
            continue;
        }
        let rhs = rhs / norm;
        dir[..col].iter_mut().zip(&row[..col]).for_each(|(d, v)| *d = v / norm);
        dir[col] = 0.0;
        dir[col + 1..].iter_mut().zip(&row[col..]).for_each(|(d, v)| *d = v / norm);
        if let Some((i, j)) = *parents {
            boxed_a.truncate(box_rows * n);
            boxed_b.truncate(box_rows);
            for k in [i, j] {
                let (r, bk) = before.row(k);
                boxed_a.extend_from_slice(r);
                boxed_b.push(bk);
            }
            if slack(lp::max_value(&dir, &boxed_a, &boxed_b)?, rhs) {
                continue;
            }
        }
        if slack(lp::max_value(&dir, a, b)?, rhs) {
            continue;
        }
        ka.extend(row.iter().map(|v| v / norm));
        kb.push(rhs);
    }
    Ok(Polytope::from_raw(n - 1, ka, kb))
}

/// Number of rows produced by eliminating `col`, minus the rows consumed.
fn growth(p: &Polytope, col: usize) -> i64 {
    let (mut pos, mut neg) = (0i64, 0i64);
    for (row, _) in p.rows() {
        if row[col] > PIVOT {
            pos += 1;
        } else if row[col] < -PIVOT {
            neg += 1;
        }
    }
    pos * neg - pos - neg
}

/// Output of one elimination step; `parents[k]` names the pair of rows
/// combined into row `k`, or `None` for a row passed through.
struct Eliminated {
    rows: Polytope,
    parents: Vec<Option<(usize, usize)>>,
}

/// One Fourier–Motzkin step: every (positive, negative) pair of rows in
/// column `col` is combined so that the column cancels; rows with a zero
/// coefficient pass through.
fn eliminate(p: &Polytope, col: usize) -> Eliminated {
    let n = p.dim();
    let drop_col = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .enumerate()
            .filter(|(j, _)| *j != col)
            .map(|(_, v)| *v)
            .collect()
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut parents = Vec::new();
    for (i, (row, rhs)) in p.rows().enumerate() {
        let c = row[col];
        if c > PIVOT {
            pos.push(i);
        } else if c < -PIVOT {
            neg.push(i);
        } else {
            a.extend(drop_col(row));
            b.push(rhs);
            parents.push(None);
        }
    }
    for &i in &pos {
        let (ri, bi) = p.row(i);
        for &j in &neg {
            let (rj, bj) = p.row(j);
            let (wi, wj) = (-rj[col], ri[col]);
            let combined: Vec<f64> = (0..n).map(|k| wi * ri[k] + wj * rj[k]).collect();
            a.extend(drop_col(&combined));
            b.push(wi * bi + wj * bj);
            parents.push(Some((i, j)));
        }
    }
    Eliminated {
        rows: Polytope::from_raw(n - 1, a, b),
        parents,
    }
}
