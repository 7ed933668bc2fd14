//! Hamiltonians, derivative bounds, coercivity radii and the Lax-Friedrichs flux.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Grid;

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type HamiltonianFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Momentum part of the catalog Hamiltonians, a function of `|p|` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Kinetic {
    Eikonal,
    Quadratic,
    ShiftedEikonal { a0: f64 },
    DoubleWell,
}

impl Kinetic {
    #[inline]
    pub fn eval(&self, p: &[f64]) -> f64 {
        let n2: f64 = p.iter().map(|v| v * v).sum();
        match *self {
            Kinetic::Eikonal => n2.sqrt(),
            Kinetic::Quadratic => n2,
            Kinetic::ShiftedEikonal { a0 } => n2.sqrt() + a0,
            Kinetic::DoubleWell => (n2 - 1.0) * (n2 - 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kinetic::Eikonal => "eikonal",
            Kinetic::Quadratic => "quadratic",
            Kinetic::ShiftedEikonal { .. } => "shifted-eikonal",
            Kinetic::DoubleWell => "double-well",
        }
    }
}

#[derive(Clone)]
enum Form {
    /// `H(x, p) = K(p) - f(x)`
    Catalog {
        kinetic: Kinetic,
        potential: PotentialFn,
    },
    Custom(HamiltonianFn),
}

/// An evaluable `H(x, p)`, optionally shifted: `H_a = H - a`.
#[derive(Clone)]
pub struct Hamiltonian {
    form: Form,
    tag: String,
    dim: usize,
    shift: f64,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("tag", &self.tag)
            .field("dim", &self.dim)
            .field("shift", &self.shift)
            .finish()
    }
}

impl Hamiltonian {
    /// Looks up a catalog entry. `a0` is only read by `shifted-eikonal`.
    pub fn catalog(name: &str, dim: usize, f: PotentialFn, a0: f64) -> Result<Self> {
        let kinetic = match name {
            "eikonal" => Kinetic::Eikonal,
            "quadratic" => Kinetic::Quadratic,
            "shifted-eikonal" => Kinetic::ShiftedEikonal { a0 },
            "double-well" => Kinetic::DoubleWell,
            other => {
                return Err(Error::Config(format!(
                    "unknown hamiltonian '{other}' (expected eikonal, quadratic, shifted-eikonal or double-well)"
                )))
            }
        };
        Ok(Self::from_kinetic(kinetic, dim, f))
    }

    pub fn from_kinetic(kinetic: Kinetic, dim: usize, f: PotentialFn) -> Self {
        Hamiltonian {
            form: Form::Catalog {
                kinetic,
                potential: f,
            },
            tag: kinetic.name().to_string(),
            dim,
            shift: 0.0,
        }
    }

    pub fn eikonal<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Self::from_kinetic(Kinetic::Eikonal, dim, Arc::new(f))
    }

    pub fn quadratic<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Self::from_kinetic(Kinetic::Quadratic, dim, Arc::new(f))
    }

    pub fn shifted_eikonal(dim: usize, a0: f64) -> Self {
        Self::from_kinetic(Kinetic::ShiftedEikonal { a0 }, dim, Arc::new(|_| 0.0))
    }

    pub fn double_well<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Self::from_kinetic(Kinetic::DoubleWell, dim, Arc::new(f))
    }

    pub fn custom<F>(tag: &str, dim: usize, h: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Hamiltonian {
            form: Form::Custom(Arc::new(h)),
            tag: tag.to_string(),
            dim,
            shift: 0.0,
        }
    }

    /// `H - a`. Shifts compose additively.
    pub fn shifted(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.shift += a;
        out
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        match &self.form {
            Form::Catalog { kinetic, potential } => kinetic.eval(p) - potential(x) - self.shift,
            Form::Custom(h) => h(x, p) - self.shift,
        }
    }

    /// `p -> H(x, p)` with the potential evaluated once.
    pub fn at<'a>(&'a self, x: &'a [f64]) -> impl Fn(&[f64]) -> f64 + 'a {
        let frozen = match &self.form {
            Form::Catalog { kinetic, potential } => Some((*kinetic, potential(x))),
            Form::Custom(_) => None,
        };
        move |p: &[f64]| match frozen {
            Some((kinetic, f)) => kinetic.eval(p) - f - self.shift,
            None => self.eval(x, p),
        }
    }

    /// The `F - f` split of a catalog Hamiltonian, if this is one.
    pub fn split(&self) -> Option<(Kinetic, PotentialFn)> {
        match &self.form {
            Form::Catalog { kinetic, potential } => Some((*kinetic, potential.clone())),
            Form::Custom(_) => None,
        }
    }

    /// Precomputes position-dependent data on the nodes of `grid`.
    pub fn bind(&self, grid: &Grid) -> NodeHamiltonian {
        let coords: Vec<[f64; 2]> = (0..grid.len()).map(|n| grid.coords(n)).collect();
        let potential = match &self.form {
            Form::Catalog { potential, .. } => coords
                .iter()
                .map(|x| potential(&x[..self.dim]) + self.shift)
                .collect(),
            Form::Custom(_) => Vec::new(),
        };
        NodeHamiltonian {
            inner: self.clone(),
            coords,
            potential,
        }
    }
}

/// A Hamiltonian with its potential cached on grid nodes.
#[derive(Clone, Debug)]
pub struct NodeHamiltonian {
    inner: Hamiltonian,
    coords: Vec<[f64; 2]>,
    potential: Vec<f64>,
}

impl NodeHamiltonian {
    #[inline]
    pub fn eval(&self, node: usize, p: &[f64]) -> f64 {
        match &self.inner.form {
            Form::Catalog { kinetic, .. } => kinetic.eval(p) - self.potential[node],
            Form::Custom(h) => h(&self.coords[node][..self.inner.dim], p) - self.inner.shift,
        }
    }

    pub fn spec(&self) -> &Hamiltonian {
        &self.inner
    }
}

/// Deterministic sampling densities used by the audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub positions: usize,
    pub directions: usize,
    pub radii: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            positions: 64,
            directions: 64,
            radii: 32,
        }
    }
}

impl Sampling {
    /// Lattice of positions covering the closed domain, endpoints included.
    pub fn positions(&self, grid: &Grid) -> Vec<[f64; 2]> {
        let m = self.positions.max(2);
        let (lo, hi) = (grid.lower(), grid.upper());
        let axis = |a: usize| -> Vec<f64> {
            (0..m)
                .map(|k| lo[a] + (hi[a] - lo[a]) * k as f64 / (m - 1) as f64)
                .collect()
        };
        let mut out = Vec::new();
        if grid.dim() == 1 {
            for x in axis(0) {
                out.push([x, 0.0]);
            }
        } else {
            let (xs, ys) = (axis(0), axis(1));
            for &y in &ys {
                for &x in &xs {
                    out.push([x, y]);
                }
            }
        }
        out
    }

    /// Unit directions: `{-1, +1}` in 1D, equally spaced angles in 2D.
    pub fn directions(&self, dim: usize) -> Vec<[f64; 2]> {
        if dim == 1 {
            vec![[-1.0, 0.0], [1.0, 0.0]]
        } else {
            let m = self.directions.max(4);
            (0..m)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    [th.cos(), th.sin()]
                })
                .collect()
        }
    }
}

/// Artificial viscosity per axis and the momentum box it was estimated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxParams {
    pub alpha: [f64; 2],
    pub p_max: f64,
}

impl FluxParams {
    pub fn alpha_max(&self, dim: usize) -> f64 {
        self.alpha[..dim].iter().copied().fold(0.0, f64::max)
    }
}

pub const ALPHA_FLOOR: f64 = 1e-6;
const ALPHA_INFLATION: f64 = 1.1;

/// Sampled bound on `|dH/dp_i|` over `x` in the domain and `|p| <= p_max`, inflated by 10%.
pub fn estimate_alpha(
    spec: &Hamiltonian,
    grid: &Grid,
    p_max: f64,
    sampling: &Sampling,
) -> Result<FluxParams> {
    let dim = grid.dim();
    let positions = sampling.positions(grid);
    let dirs = sampling.directions(dim);
    let radii = sampling.radii.max(1);
    let probe = |alpha: &mut [f64; 2], x: &[f64], h: &dyn Fn(&[f64]) -> f64, p: [f64; 2]| -> Result<()> {
        for axis in 0..dim {
            let step = 1e-6 * p[axis].abs().max(1.0);
            let mut hi = p;
            let mut lo = p;
            hi[axis] += step;
            lo[axis] -= step;
            let (a, b) = (h(&hi[..dim]), h(&lo[..dim]));
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Spec(format!(
                    "non-finite H near x = {x:?}, p = {:?}",
                    &p[..dim]
                )));
            }
            alpha[axis] = alpha[axis].max(((a - b) / (2.0 * step)).abs());
        }
        Ok(())
    };
    let per_position: Vec<Result<[f64; 2]>> = positions
        .par_iter()
        .map(|x| {
            let x = &x[..dim];
            let h = spec.at(x);
            let mut alpha = [0.0f64; 2];
            probe(&mut alpha, x, &h, [0.0; 2])?;
            for d in &dirs {
                for k in 1..=radii {
                    let r = p_max * k as f64 / radii as f64;
                    probe(&mut alpha, x, &h, [r * d[0], r * d[1]])?;
                }
            }
            Ok(alpha)
        })
        .collect();
    let mut alpha = [0.0f64; 2];
    // first failing position in lattice order, independent of the thread count
    for a in per_position {
        let a = a?;
        alpha[0] = alpha[0].max(a[0]);
        alpha[1] = alpha[1].max(a[1]);
    }
    for a in alpha.iter_mut().take(dim) {
        *a = (*a * ALPHA_INFLATION).max(ALPHA_FLOOR);
    }
    Ok(FluxParams { alpha, p_max })
}

pub const COERCIVITY_CAP: f64 = 1e6;

/// Smallest sampled radius `r` such that `H(x, p) >= level` for all sampled
/// `x` and all sampled `|p| = r`; doubling then bisection.
pub fn coercivity_radius(
    spec: &Hamiltonian,
    grid: &Grid,
    level: f64,
    cap: f64,
    sampling: &Sampling,
) -> Result<f64> {
    let dim = grid.dim();
    let positions = sampling.positions(grid);
    let dirs = sampling.directions(dim);
    // lowest sampled value on the sphere |p| = r, with its location
    let worst = |r: f64| -> (f64, [f64; 2], [f64; 2]) {
        // NaN counts as failure
        let pick = |best: &mut (f64, [f64; 2], [f64; 2]), cand: (f64, [f64; 2], [f64; 2])| {
            if !(cand.0 >= best.0) {
                *best = cand;
            }
        };
        let per_position: Vec<_> = positions
            .par_iter()
            .map(|x| {
                let h = spec.at(&x[..dim]);
                let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
                for d in &dirs {
                    let p = [r * d[0], r * d[1]];
                    pick(&mut best, (h(&p[..dim]), *x, *d));
                }
                best
            })
            .collect();
        let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
        for cand in per_position {
            pick(&mut best, cand);
        }
        best
    };
    let ok = |r: f64| worst(r).0 >= level;
    if ok(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !ok(hi) {
        if hi >= cap {
            let (value, x, d) = worst(cap);
            return Err(Error::NotCoercive {
                level,
                cap,
                x: x[..dim].to_vec(),
                direction: d[..dim].to_vec(),
                value,
            });
        }
        hi = (hi * 2.0).min(cap);
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(hi)
}

/// `max_x H(x, 0)` over the sampled positions and the grid nodes.
pub fn max_h_at_zero(spec: &Hamiltonian, grid: &Grid, sampling: &Sampling) -> f64 {
    let dim = grid.dim();
    let zero = [0.0; 2];
    let mut m = f64::NEG_INFINITY;
    for x in sampling.positions(grid) {
        m = m.max(spec.eval(&x[..dim], &zero[..dim]));
    }
    for node in 0..grid.len() {
        let x = grid.coords(node);
        m = m.max(spec.eval(&x[..dim], &zero[..dim]));
    }
    m
}

/// Default momentum box: coercivity radius at level `max_x H(x, 0) + 1`.
pub fn default_p_max(spec: &Hamiltonian, grid: &Grid, sampling: &Sampling) -> Result<f64> {
    let level = max_h_at_zero(spec, grid, sampling) + 1.0;
    coercivity_radius(spec, grid, level, COERCIVITY_CAP, sampling)
}

/// Lax-Friedrichs numerical Hamiltonian
/// `H(x, (p- + p+)/2) - sum_i alpha_i/2 (p+_i - p-_i)`.
pub fn lf_flux(
    spec: &Hamiltonian,
    x: &[f64],
    p_minus: &[f64],
    p_plus: &[f64],
    flux: &FluxParams,
) -> f64 {
    let dim = p_minus.len();
    let mut avg = [0.0; 2];
    let mut visc = 0.0;
    for i in 0..dim {
        avg[i] = 0.5 * (p_minus[i] + p_plus[i]);
        visc += 0.5 * flux.alpha[i] * (p_plus[i] - p_minus[i]);
    }
    spec.eval(x, &avg[..dim]) - visc
}

/// Minimizes `phi` over `[lo, hi]`: dense sample (endpoints and 0 included)
/// followed by golden-section refinement around the best sample.
pub(crate) fn minimize_interval<F: Fn(f64) -> f64>(lo: f64, hi: f64, samples: usize, phi: F) -> (f64, f64) {
    if hi <= lo {
        return (lo, phi(lo));
    }
    let m = samples.max(2);
    let mut best = (lo, phi(lo));
    let mut best_k = 0usize;
    for k in 1..=m {
        let q = if k == m {
            hi
        } else {
            lo + (hi - lo) * k as f64 / m as f64
        };
        let v = phi(q);
        if v < best.1 {
            best = (q, v);
            best_k = k;
        }
    }
    if lo < 0.0 && hi > 0.0 {
        let v = phi(0.0);
        if v <= best.1 {
            return (0.0, v);
        }
    }
    // golden section on the bracket around the best sample
    let step = (hi - lo) / m as f64;
    let mut a = (lo + step * (best_k as f64 - 1.0)).max(lo);
    let mut b = (lo + step * (best_k as f64 + 1.0)).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = phi(d);
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    for (q, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (q, v);
        }
    }
    best
}

/// Sampled `min_p H(x, p)` over `|p| <= p_max` and its minimizer.
pub fn min_over_p(spec: &Hamiltonian, x: &[f64], p_max: f64, sampling: &Sampling) -> (f64, [f64; 2]) {
    let dim = spec.dim();
    let h = spec.at(x);
    if dim == 1 {
        let (q, v) = minimize_interval(-p_max, p_max, 2048, |q| h(&[q]));
        return (v, [q, 0.0]);
    }
    let mut best = (h(&[0.0, 0.0]), [0.0, 0.0]);
    for d in sampling.directions(2) {
        let (r, v) = minimize_interval(0.0, p_max, 256, |r| h(&[r * d[0], r * d[1]]));
        if v < best.0 {
            best = (v, [r * d[0], r * d[1]]);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Grid {
        Grid::interval(0.0, 1.0, 11).unwrap()
    }

    #[test]
    fn frozen_position_matches_eval() {
        let h = Hamiltonian::quadratic(2, |x| (3.0 * x[0]).sin() + x[1]).shifted(0.3);
        let x = [0.2, 0.7];
        let at = h.at(&x);
        for p in [[0.0, 0.0], [1.5, -0.25], [-3.0, 2.0]] {
            assert_eq!(at(&p), h.eval(&x, &p));
        }
    }

    #[test]
    fn catalog_values() {
        let e = Hamiltonian::catalog("eikonal", 1, Arc::new(|x: &[f64]| (x[0] - 0.5).abs()), 0.0)
            .unwrap();
        assert_eq!(e.eval(&[0.5], &[2.0]), 2.0);
        let q = Hamiltonian::quadratic(2, |_| 1.0);
        assert_eq!(q.eval(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
        let dw = Hamiltonian::double_well(2, |_| 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(dw.eval(&[0.0, 0.0], &[s, s]).abs() < 1e-15);
        let se = Hamiltonian::shifted_eikonal(1, 0.5);
        assert_eq!(se.eval(&[0.3], &[-1.0]), 1.5);
        assert!(matches!(
            Hamiltonian::catalog("hamster", 1, Arc::new(|_| 0.0), 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shift_law() {
        let h = Hamiltonian::double_well(1, |x| x[0].sin());
        let hs = h.shifted(0.7);
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            let p = [-3.0 + 0.12 * i as f64];
            assert_eq!(hs.eval(&x, &p), h.eval(&x, &p) - 0.7);
        }
        let grid = unit();
        let bound = hs.bind(&grid);
        for node in 0..grid.len() {
            let x = grid.coords(node);
            assert!((bound.eval(node, &[0.4]) - hs.eval(&x[..1], &[0.4])).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_estimates() {
        let grid = unit();
        let s = Sampling::default();
        let e = Hamiltonian::eikonal(1, |x| (x[0] - 0.5).abs());
        let fp = estimate_alpha(&e, &grid, 5.0, &s).unwrap();
        assert!((fp.alpha[0] - 1.1).abs() < 1e-6);
        let q = Hamiltonian::quadratic(1, |_| 0.0);
        let fp = estimate_alpha(&q, &grid, 2.0, &s).unwrap();
        assert!((fp.alpha[0] - 4.4).abs() < 1e-6);
        let c = Hamiltonian::custom("const", 1, |_, _| 3.0);
        let fp = estimate_alpha(&c, &grid, 2.0, &s).unwrap();
        assert_eq!(fp.alpha[0], ALPHA_FLOOR);
        let bad = Hamiltonian::custom("bad", 1, |_, p| (p[0] - 1.0).ln());
        assert!(matches!(estimate_alpha(&bad, &grid, 2.0, &s), Err(Error::Spec(_))));
    }

    #[test]
    fn alpha_in_2d_matches_dense_sampling_oracle() {
        // |dH/dp_1| for |p|^2 is 2|p_1| <= 2 P_max, attained on the axis direction
        let grid = Grid::rectangle([(0.0, 1.0), (0.0, 1.0)], [5, 5]).unwrap();
        let q = Hamiltonian::quadratic(2, |_| 0.0);
        let fp = estimate_alpha(&q, &grid, 1.5, &Sampling::default()).unwrap();
        assert!((fp.alpha[0] - 3.3).abs() < 1e-6);
        assert!((fp.alpha[1] - 3.3).abs() < 1e-6);
    }

    #[test]
    fn coercivity_examples() {
        let grid = unit();
        let s = Sampling::default();
        let e = Hamiltonian::eikonal(1, |x| x[0]);
        let r = coercivity_radius(&e, &grid, 0.0, COERCIVITY_CAP, &s).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        let q = Hamiltonian::quadratic(1, |_| 0.0);
        let r = coercivity_radius(&q, &grid, 4.0, COERCIVITY_CAP, &s).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
        let lin = Hamiltonian::custom("x.p", 1, |x, p| x[0] * p[0]);
        match default_p_max(&lin, &grid, &s) {
            Err(Error::NotCoercive {
                x,
                direction,
                value,
                cap,
                ..
            }) => {
                assert!(value < 1.0);
                assert_eq!(value, x[0] * cap * direction[0]);
            }
            other => panic!("expected coercivity failure, got {other:?}"),
        }
    }

    #[test]
    fn lf_flux_examples() {
        let e = Hamiltonian::eikonal(1, |_| 0.0);
        let fp = FluxParams {
            alpha: [1.1, 0.0],
            p_max: 5.0,
        };
        assert!((lf_flux(&e, &[0.2], &[0.0], &[2.0], &fp) + 0.1).abs() < 1e-14);
        assert_eq!(lf_flux(&e, &[0.2], &[-0.7], &[-0.7], &fp), 0.7);
    }

    #[test]
    fn minimize_interval_finds_endpoints_and_zero() {
        let (q, v) = minimize_interval(0.0, 10.0, 32, |q| q.abs() - 1.0);
        assert_eq!((q, v), (0.0, -1.0));
        let (q, v) = minimize_interval(-3.0, 2.0, 32, |q| q.abs());
        assert_eq!((q, v), (0.0, 0.0));
        let (q, _) = minimize_interval(-3.0, 2.0, 32, |q| (q - 0.123456).powi(2));
        assert!((q - 0.123456).abs() < 1e-6);
    }

    #[test]
    fn min_over_p_eikonal() {
        let e = Hamiltonian::eikonal(1, |x| (x[0] - 0.5).abs());
        let (v, p) = min_over_p(&e, &[0.2], 3.0, &Sampling::default());
        assert!((v + 0.3).abs() < 1e-12);
        assert_eq!(p[0], 0.0);
        let dw = Hamiltonian::double_well(2, |_| 0.0);
        let (v, p) = min_over_p(&dw, &[0.0, 0.0], 3.0, &Sampling::default());
        assert!(v.abs() < 1e-10);
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-5);
    }
}
