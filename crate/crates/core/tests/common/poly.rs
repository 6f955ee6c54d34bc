//! Vertex-based ground truth for polytopes of dimension at most three.

use nalgebra::{DMatrix, DVector};
use preview_synth::geometry::Polytope;
use rand::Rng;

pub const EPS: f64 = 1e-6;

/// Half-spaces `(a, β)` of `p`.
pub fn rows(p: &Polytope) -> Vec<(Vec<f64>, f64)> {
    p.rows().map(|(a, b)| (a.to_vec(), b)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All vertices of the bounded polytope `h`: solutions of every square
/// subsystem that satisfy the remaining rows.
pub fn vertices(h: &[(Vec<f64>, f64)], dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for combo in combinations(h.len(), dim) {
        let m = DMatrix::from_fn(dim, dim, |r, c| h[combo[r]].0[c]);
        let rhs = DVector::from_fn(dim, |r, _| h[combo[r]].1);
        let lu = m.lu();
        if lu.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(x) = lu.solve(&rhs) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if h.iter().all(|(a, b)| dot(a, &x) <= b + 1e-8) && !out.iter().any(|v| dist(v, &x) < 1e-7) {
            out.push(x);
        }
    }
    out
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn support(verts: &[Vec<f64>], c: &[f64]) -> f64 {
    verts.iter().map(|v| dot(v, c)).fold(f64::NEG_INFINITY, f64::max)
}

/// `P ⊆ Q` for bounded `P` given by its vertices.
pub fn subset(p_verts: &[Vec<f64>], q: &[(Vec<f64>, f64)], eps: f64) -> bool {
    p_verts.iter().all(|v| q.iter().all(|(a, b)| dot(a, v) <= b + eps))
}

/// Number of distinct facets of a full-dimensional bounded polytope: rows
/// whose tight vertices span a hyperplane, parallel copies counted once.
pub fn facet_count(h: &[(Vec<f64>, f64)], dim: usize) -> usize {
    let verts = vertices(h, dim);
    let mut normals: Vec<Vec<f64>> = Vec::new();
    for (a, b) in h {
        let norm = dot(a, a).sqrt();
        let unit: Vec<f64> = a.iter().map(|v| v / norm).collect();
        let tight: Vec<&Vec<f64>> = verts.iter().filter(|v| (dot(a, v) - b).abs() < 1e-7 * norm.max(1.0)).collect();
        if tight.len() < dim {
            continue;
        }
        let span = DMatrix::from_fn(tight.len() - 1, dim, |r, c| tight[r + 1][c] - tight[0][c]);
        if dim > 1 && span.rank(1e-7) + 1 < dim {
            continue;
        }
        if !normals.iter().any(|n| dist(n, &unit) < 1e-6) {
            normals.push(unit);
        }
    }
    normals.len()
}

/// Random full-dimensional polytope around the origin: `rows` random
/// half-spaces cut out of the box `[-3, 3]^dim`.
pub fn random_polytope<R: Rng>(rng: &mut R, dim: usize, rows: usize) -> Polytope {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut r = vec![0.0; dim];
            r[k] = s;
            a.push(r);
            b.push(3.0);
        }
    }
    for _ in 0..rows {
        let r: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if dot(&r, &r) < 1e-2 {
            continue;
        }
        a.push(r);
        b.push(rng.random_range(0.3..2.0));
    }
    let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = a.iter().zip(b).map(|(r, bi)| bi + dot(r, &shift)).collect();
    Polytope::new(dim, a, b).unwrap()
}

/// `p` with extra rows that are implied by it: loosened copies, scaled
/// copies and positive combinations of pairs of rows.
pub fn with_redundant_rows<R: Rng>(rng: &mut R, p: &Polytope) -> Polytope {
    let h = rows(p);
    let mut a: Vec<Vec<f64>> = h.iter().map(|(r, _)| r.clone()).collect();
    let mut b: Vec<f64> = h.iter().map(|(_, bi)| *bi).collect();
    for _ in 0..h.len() {
        let i = rng.random_range(0..h.len());
        let j = rng.random_range(0..h.len());
        match rng.random_range(0..3) {
            0 => {
                a.push(h[i].0.clone());
                b.push(h[i].1 + rng.random_range(0.0..1.0));
            }
            1 => {
                let s = rng.random_range(0.5..3.0);
                a.push(h[i].0.iter().map(|v| v * s).collect());
                b.push(h[i].1 * s);
            }
            _ => {
                let (wi, wj) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
                a.push(h[i].0.iter().zip(&h[j].0).map(|(x, y)| wi * x + wj * y).collect());
                b.push(wi * h[i].1 + wj * h[j].1 + rng.random_range(0.0..0.5));
            }
        }
    }
    Polytope::new(p.dim(), a, b).unwrap()
}

/// Unit directions: the axes, their negatives and `extra` random ones.
pub fn directions<R: Rng>(rng: &mut R, dim: usize, extra: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[k] = s;
            out.push(e);
        }
    }
    while out.len() < 2 * dim + extra {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dot(&c, &c).sqrt();
        if n > 1e-3 {
            out.push(c.iter().map(|v| v / n).collect());
        }
    }
    out
}
