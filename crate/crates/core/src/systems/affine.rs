use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Plant;
use crate::error::{Error, Result};
use crate::geometry::{Polytope, Tolerance};

/// Discrete-time mode `x⁺ = A x + B u + E d + K` with `d ∈ D`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMode {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub k: DVector<f64>,
    pub d: Polytope,
    /// Vertices of `D` when it has at most three dimensions, for sampling.
    d_vertices: Vec<Vec<f64>>,
    d_box: Vec<(f64, f64)>,
}

impl AffineMode {
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        e: DMatrix<f64>,
        k: DVector<f64>,
        d: Polytope,
    ) -> Result<Self> {
        let name = name.into();
        let n = a.nrows();
        let bad = |what: &str| Error::InvalidSystem(format!("mode {name}: {what}"));
        if a.ncols() != n || b.nrows() != n || e.nrows() != n || k.len() != n {
            return Err(bad("matrix dimensions disagree"));
        }
        if e.ncols() != d.dim() {
            return Err(bad("E has a different column count than D's dimension"));
        }
        let tol = Tolerance::default();
        let d_box = d
            .bounding_box(&tol)?
            .ok_or_else(|| bad("disturbance set is empty"))?;
        if d_box.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
            return Err(bad("disturbance set is unbounded"));
        }
        let d_vertices = if d.dim() <= 3 { d.vertices(&tol)? } else { Vec::new() };
        Ok(AffineMode {
            name,
            a,
            b,
            e,
            k,
            d,
            d_vertices,
            d_box,
        })
    }

    fn sample_disturbance<R: Rng + ?Sized>(&self, rng: &mut R, tol: &Tolerance) -> Vec<f64> {
        if !self.d_vertices.is_empty() && rng.random_bool(0.5) {
            return self.d_vertices[rng.random_range(0..self.d_vertices.len())].clone();
        }
        sample_box(&self.d, &self.d_box, rng, tol).unwrap_or_else(|| {
            self.d.chebyshev(1.0).map(|(c, _)| c).unwrap_or_else(|_| vec![0.0; self.d.dim()])
        })
    }
}

/// Uniform rejection sampling inside `p` using its bounding box.
fn sample_box<R: Rng + ?Sized>(p: &Polytope, bbox: &[(f64, f64)], rng: &mut R, tol: &Tolerance) -> Option<Vec<f64>> {
    for _ in 0..10_000 {
        let x: Vec<f64> = bbox
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect();
        if p.contains(&x, tol.feas) {
            return Some(x);
        }
    }
    None
}

/// Switched affine system over the state domain `X` and input set `U`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSystem {
    domain: Polytope,
    input: Polytope,
    modes: Vec<AffineMode>,
    tol: Tolerance,
}

impl AffineSystem {
    pub fn new(domain: Polytope, input: Polytope, modes: Vec<AffineMode>, tol: Tolerance) -> Result<Self> {
        let (n, m) = (domain.dim(), input.dim());
        if modes.is_empty() {
            return Err(Error::InvalidSystem("no modes".into()));
        }
        for md in &modes {
            if md.a.nrows() != n {
                return Err(Error::InvalidSystem(format!(
                    "mode {} acts on {} states, domain has {n}",
                    md.name,
                    md.a.nrows()
                )));
            }
            if md.b.ncols() != m {
                return Err(Error::InvalidSystem(format!(
                    "mode {} takes {} inputs, input set has {m}",
                    md.name,
                    md.b.ncols()
                )));
            }
        }
        if input.is_empty(&tol)? {
            return Err(Error::InvalidSystem("input set is empty".into()));
        }
        Ok(AffineSystem {
            domain: domain.remove_redundancy(&tol)?,
            input: input.remove_redundancy(&tol)?,
            modes,
            tol,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input.dim()
    }

    pub fn input_set(&self) -> &Polytope {
        &self.input
    }

    pub fn modes(&self) -> &[AffineMode] {
        &self.modes
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.tol
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    fn check_mode(&self, mode: usize) -> Result<&AffineMode> {
        self.modes.get(mode).ok_or(Error::UnknownMode(mode))
    }

    /// Rows `(a, β)` of `target` pulled back through the listed modes:
    /// `[aᵀA, aᵀB]·(x, u) ≤ β − h_D(Eᵀa) − aᵀK`, one row per mode. `None`
    /// means some disturbance can push every point out.
    fn pulled_back(&self, modes: &[usize], target: &Polytope) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let (n, m) = (self.state_dim(), self.input_dim());
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (a, beta) in target.normalize().rows() {
            let av = DVector::from_column_slice(a);
            for &mi in modes {
                let md = self.check_mode(mi)?;
                let dir = md.e.tr_mul(&av);
                let h = if dir.iter().all(|v| *v == 0.0) {
                    0.0
                } else {
                    md.d.support(dir.as_slice())?
                };
                if !h.is_finite() {
                    return Ok(None);
                }
                let ax = md.a.tr_mul(&av);
                let au = md.b.tr_mul(&av);
                rows.extend_from_slice(ax.as_slice());
                rows.extend_from_slice(au.as_slice());
                rhs.push(beta - h - av.dot(&md.k));
            }
        }
        debug_assert_eq!(rows.len(), rhs.len() * (n + m));
        Ok(Some((rows, rhs)))
    }

    fn next_state(&self, md: &AffineMode, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        let u = DVector::from_column_slice(u);
        let d = DVector::from_column_slice(d);
        let next = &md.a * x + &md.b * u + &md.e * d + &md.k;
        next.iter().copied().collect()
    }
}

impl Plant for AffineSystem {
    type Set = Polytope;
    type State = Vec<f64>;
    type Input = Vec<f64>;

    fn num_modes(&self) -> usize {
        self.modes.len()
    }

    fn domain(&self) -> Polytope {
        self.domain.clone()
    }

    fn empty_set(&self) -> Polytope {
        Polytope::empty(self.state_dim())
    }

    fn pre_common(&self, modes: &[usize], target: &Polytope) -> Result<Polytope> {
        let (n, m) = (self.state_dim(), self.input_dim());
        if target.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: target.dim(),
            });
        }
        if target.is_canonical_empty() {
            return Ok(self.empty_set());
        }
        let Some((rows, rhs)) = self.pulled_back(modes, target)? else {
            return Ok(self.empty_set());
        };
        let lifted = Polytope::from_raw(n + m, rows, rhs)
            .stack(&self.input.embed(n + m, n))
            .stack(&self.domain.embed(n + m, 0));
        let keep: Vec<usize> = (0..n).collect();
        lifted.project(&keep, &self.tol)
    }

    fn intersect(&self, a: &Polytope, b: &Polytope) -> Result<Polytope> {
        a.intersect(b, &self.tol)
    }

    fn is_subset(&self, a: &Polytope, b: &Polytope) -> Result<bool> {
        a.is_subset(b, &self.tol)
    }

    fn is_empty(&self, a: &Polytope) -> Result<bool> {
        a.is_empty(&self.tol)
    }

    fn contains(&self, set: &Polytope, x: &Vec<f64>) -> bool {
        set.contains(x, self.tol.feas)
    }

    fn margin(&self, set: &Polytope, x: &Vec<f64>) -> f64 {
        set.margin(x)
    }

    /// Chebyshev center of the inputs that keep every successor in `target`.
    fn select_input(&self, mode: usize, x: &Vec<f64>, target: &Polytope) -> Result<Option<Vec<f64>>> {
        let (n, m) = (self.state_dim(), self.input_dim());
        if target.is_canonical_empty() {
            return Ok(None);
        }
        let Some((rows, rhs)) = self.pulled_back(&[mode], target)? else {
            return Ok(None);
        };
        let mut a = Vec::with_capacity(rhs.len() * m);
        let mut b = Vec::with_capacity(rhs.len());
        for (i, beta) in rhs.iter().enumerate() {
            let row = &rows[i * (n + m)..(i + 1) * (n + m)];
            let fixed: f64 = row[..n].iter().zip(x).map(|(c, v)| c * v).sum();
            a.extend_from_slice(&row[n..]);
            b.push(beta - fixed);
        }
        let feasible = Polytope::from_raw(m, a, b).stack(&self.input);
        let (center, r) = feasible.chebyshev(1e6)?;
        if r < -self.tol.feas {
            return Ok(None);
        }
        Ok(Some(center))
    }

    fn fallback_input(&self) -> Vec<f64> {
        self.input
            .chebyshev(1e6)
            .map(|(c, _)| c)
            .unwrap_or_else(|_| vec![0.0; self.input_dim()])
    }

    fn successor<R: Rng + ?Sized>(&self, mode: usize, x: &Vec<f64>, u: &Vec<f64>, rng: &mut R) -> Result<Vec<f64>> {
        let md = self.check_mode(mode)?;
        let d = md.sample_disturbance(rng, &self.tol);
        Ok(self.next_state(md, x, u, &d))
    }

    fn sample<R: Rng + ?Sized>(&self, set: &Polytope, rng: &mut R) -> Result<Option<Vec<f64>>> {
        let Some(bbox) = set.bounding_box(&self.tol)? else {
            return Ok(None);
        };
        if bbox.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Precondition("cannot sample from an unbounded set".into()));
        }
        Ok(sample_box(set, &bbox, rng, &self.tol).or_else(|| set.chebyshev(1.0).ok().map(|(c, _)| c)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    #[default]
    Euler,
    Zoh,
}

/// Continuous-time matrices `(A, B, E, K)` turned into a discrete-time
/// update with step `dt`.
pub fn discretize(
    ac: &DMatrix<f64>,
    bc: &DMatrix<f64>,
    ec: &DMatrix<f64>,
    kc: &DVector<f64>,
    dt: f64,
    method: Discretization,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let n = ac.nrows();
    match method {
        Discretization::Euler => (
            DMatrix::identity(n, n) + ac * dt,
            bc * dt,
            ec * dt,
            kc * dt,
        ),
        Discretization::Zoh => {
            let (m, p) = (bc.ncols(), ec.ncols());
            let size = n + m + p + 1;
            let mut big = DMatrix::zeros(size, size);
            big.view_mut((0, 0), (n, n)).copy_from(ac);
            big.view_mut((0, n), (n, m)).copy_from(bc);
            big.view_mut((0, n + m), (n, p)).copy_from(ec);
            big.view_mut((0, n + m + p), (n, 1)).copy_from(kc);
            let phi = (big * dt).exp();
            (
                phi.view((0, 0), (n, n)).into_owned(),
                phi.view((0, n), (n, m)).into_owned(),
                phi.view((0, n + m), (n, p)).into_owned(),
                phi.view((0, n + m + p), (n, 1)).column(0).into_owned(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{inv, pre, FixpointOptions, Status};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    /// `x⁺ = a x + u + d`, `u ∈ [-1, 1]`, `d ∈ [-w, w]`, `X = [-10, 10]`.
    fn line(a: f64, w: f64) -> AffineSystem {
        let mode = AffineMode::new(
            "f1",
            scalar(a),
            scalar(1.0),
            scalar(1.0),
            DVector::zeros(1),
            Polytope::interval(-w, w),
        )
        .unwrap();
        AffineSystem::new(
            Polytope::interval(-10.0, 10.0),
            Polytope::interval(-1.0, 1.0),
            vec![mode],
            Tolerance::default(),
        )
        .unwrap()
    }

    fn bounds(p: &Polytope) -> (f64, f64) {
        let bb = p.bounding_box(&Tolerance::default()).unwrap().unwrap();
        bb[0]
    }

    #[test]
    fn pre_of_interval_matches_interval_arithmetic() {
        // a x + u + d ∈ [-1, 1] for all |d| ≤ 0.5 and some |u| ≤ 1  ⇔  |2x| ≤ 1.5
        let sys = line(2.0, 0.5);
        let p = pre(&sys, 0, &Polytope::interval(-1.0, 1.0)).unwrap();
        let (lo, hi) = bounds(&p);
        assert!((lo + 0.75).abs() < 1e-9 && (hi - 0.75).abs() < 1e-9);
    }

    #[test]
    fn wide_disturbance_empties_pre() {
        let mode = AffineMode::new(
            "f1",
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            DVector::zeros(1),
            Polytope::interval(-1.0, 1.0),
        )
        .unwrap();
        let sys = AffineSystem::new(
            Polytope::interval(-10.0, 10.0),
            Polytope::interval(-1.0, 1.0),
            vec![mode],
            Tolerance::default(),
        )
        .unwrap();
        // Disturbance wider than the target: nothing can be guaranteed.
        assert!(sys.is_empty(&pre(&sys, 0, &Polytope::interval(-0.5, 0.5)).unwrap()).unwrap());
    }

    #[test]
    fn contraction_keeps_its_safe_set() {
        let sys = line(0.5, 0.0);
        let out = inv(&sys, 0, &Polytope::interval(-1.0, 1.0), &FixpointOptions::default()).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.set.set_eq(&Polytope::interval(-1.0, 1.0), &Tolerance::default()).unwrap());
    }

    #[test]
    fn unstable_dynamics_shrink() {
        // |2x + u + d| ≤ r with |u| ≤ 1, |d| ≤ 0.5 keeps r ≥ 2r - 0.5 ⇒ r ≤ 0.5
        let sys = line(2.0, 0.5);
        let out = inv(&sys, 0, &Polytope::interval(-5.0, 5.0), &FixpointOptions::default()).unwrap();
        let (lo, hi) = bounds(&out.set);
        assert!((hi - 0.5).abs() < 1e-6 && (lo + 0.5).abs() < 1e-6, "{lo} {hi}");
    }

    #[test]
    fn chosen_input_reaches_target() {
        let sys = line(2.0, 0.25);
        let target = Polytope::interval(-1.0, 1.0);
        let u = sys.select_input(0, &vec![0.5], &target).unwrap().unwrap();
        // 1 + u ± 0.25 ∈ [-1, 1] ⇒ u ∈ [-1, -0.25]; the center is -0.625.
        assert!((u[0] + 0.625).abs() < 1e-6);
        assert!(sys.select_input(0, &vec![5.0], &target).unwrap().is_none());
    }

    #[test]
    fn zoh_of_integrator() {
        let (a, b, _, k) = discretize(
            &scalar(0.0),
            &scalar(1.0),
            &scalar(1.0),
            &DVector::from_element(1, 2.0),
            0.5,
            Discretization::Zoh,
        );
        assert!((a[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((b[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((k[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zoh_matches_euler_for_small_steps() {
        let ac = scalar(-0.3);
        let (ae, ..) = discretize(&ac, &scalar(1.0), &scalar(1.0), &DVector::zeros(1), 1e-4, Discretization::Euler);
        let (az, ..) = discretize(&ac, &scalar(1.0), &scalar(1.0), &DVector::zeros(1), 1e-4, Discretization::Zoh);
        assert!((ae[(0, 0)] - az[(0, 0)]).abs() < 1e-8);
    }
}
