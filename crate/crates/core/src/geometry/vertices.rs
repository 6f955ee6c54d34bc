//! Brute-force vertex enumeration for sets of dimension at most three. Used
//! for plotting exports and volume summaries, never inside fixed points.

use super::{Polytope, Tolerance};
use crate::error::{Error, Result};

const SINGULAR: f64 = 1e-12;
const SAME_POINT: f64 = 1e-9;

pub(super) fn enumerate(p: &Polytope, tol: &Tolerance) -> Result<Vec<Vec<f64>>> {
    let n = p.dim();
    if n == 0 || n > 3 {
        return Err(Error::Precondition(format!(
            "vertex enumeration supports 1 to 3 dimensions, got {n}"
        )));
    }
    let q = p.remove_redundancy(tol)?;
    if q.is_canonical_empty() {
        return Ok(Vec::new());
    }
    if let Some(bbox) = q.bounding_box(tol)? {
        if bbox.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Precondition("cannot enumerate vertices of an unbounded set".into()));
        }
    }
    let m = q.n_rows();
    let accept = 10.0 * tol.feas.max(1e-9);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |v: Vec<f64>| {
        if !out
            .iter()
            .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() < SAME_POINT.max(accept)))
        {
            out.push(v);
        }
    };
    for combo in combinations(m, n) {
        let mut mat = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (r, &i) in combo.iter().enumerate() {
            let (row, b) = q.row(i);
            mat[r * n..(r + 1) * n].copy_from_slice(row);
            rhs[r] = b;
        }
        if let Some(x) = solve(&mut mat, &mut rhs, n) {
            if q.margin(&x) >= -accept {
                push(x);
            }
        }
    }
    Ok(out)
}

pub(super) fn volume(p: &Polytope, tol: &Tolerance) -> Result<f64> {
    let verts = enumerate(p, tol)?;
    if verts.is_empty() {
        return Ok(0.0);
    }
    Ok(match p.dim() {
        1 => {
            let (lo, hi) = verts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[0]), hi.max(v[0])));
            hi - lo
        }
        2 => polygon_area(&verts),
        _ => polyhedron_volume(p, &verts, tol)?,
    })
}

fn polygon_area(verts: &[Vec<f64>]) -> f64 {
    let ordered = order_planar(verts.iter().map(|v| [v[0], v[1]]).collect());
    let k = ordered.len();
    if k < 3 {
        return 0.0;
    }
    let twice: f64 = (0..k)
        .map(|i| {
            let (a, b) = (ordered[i], ordered[(i + 1) % k]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    twice.abs() / 2.0
}

/// Sorts planar points by angle around their centroid.
fn order_planar(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let k = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / k;
    pts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    pts
}

/// Sums tetrahedra formed by the centroid and a fan triangulation of each
/// facet.
fn polyhedron_volume(p: &Polytope, verts: &[Vec<f64>], tol: &Tolerance) -> Result<f64> {
    let q = p.remove_redundancy(tol)?;
    let k = verts.len() as f64;
    let centroid: Vec<f64> = (0..3).map(|j| verts.iter().map(|v| v[j]).sum::<f64>() / k).collect();
    let on_face = 10.0 * tol.feas.max(1e-9);
    let mut total = 0.0;
    for (normal, rhs) in q.rows() {
        let face: Vec<&Vec<f64>> = verts
            .iter()
            .filter(|v| (dot(normal, v) - rhs).abs() <= on_face)
            .collect();
        if face.len() < 3 {
            continue;
        }
        // In-plane basis orthogonal to the facet normal.
        let helper = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = normalize3(cross(normal, &helper));
        let e2 = cross(normal, &e1);
        let planar: Vec<[f64; 2]> = face.iter().map(|v| [dot(&e1, v), dot(&e2, v)]).collect();
        let ordered = order_planar(planar.clone());
        let lookup = |pt: &[f64; 2]| -> &Vec<f64> {
            let idx = planar.iter().position(|q| q == pt).expect("planar point");
            face[idx]
        };
        let anchor = lookup(&ordered[0]);
        for w in ordered[1..].windows(2) {
            let (b, c) = (lookup(&w[0]), lookup(&w[1]));
            total += tetra_volume(&centroid, anchor, b, c);
        }
    }
    Ok(total)
}

fn tetra_volume(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let u: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let v: Vec<f64> = (0..3).map(|i| c[i] - a[i]).collect();
    let w: Vec<f64> = (0..3).map(|i| d[i] - a[i]).collect();
    dot(&u, &cross(&v, &w)).abs() / 6.0
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize3(v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Gaussian elimination with partial pivoting on an `n × n` row-major system.
fn solve(mat: &mut [f64], rhs: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| mat[i * n + col].abs().total_cmp(&mat[j * n + col].abs()))?;
        if mat[pivot * n + col].abs() < SINGULAR {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                mat.swap(pivot * n + j, col * n + j);
            }
            rhs.swap(pivot, col);
        }
        for i in col + 1..n {
            let f = mat[i * n + col] / mat[col * n + col];
            for j in col..n {
                mat[i * n + j] -= f * mat[col * n + j];
            }
            rhs[i] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| mat[i * n + j] * x[j]).sum();
        x[i] = (rhs[i] - s) / mat[i * n + i];
    }
    Some(x)
}
