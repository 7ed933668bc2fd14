//! Large-time behaviour: monotonicity diagnostics of `u + ct`, intrinsic
//! distances and Aubry sets in one dimension, representation formulas for
//! the limiting profiles, and the compatibility-free bracketing of Dirichlet
//! problems with incompatible initial data.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::hamiltonian::{min_over_p, Hamiltonian, Sampling};
use crate::solver::{BoundaryCondition, DirichletData, EvolutionState, Scheme, Snapshot};

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Snapshots of `u + c t`.
pub fn drift_compensated(state: &EvolutionState, c: f64) -> Vec<Snapshot> {
    state
        .snapshots
        .iter()
        .map(|s| Snapshot {
            time: s.time,
            u: s.u.iter().map(|u| u + c * s.time).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MuSeries {
    pub eta: f64,
    /// Upper bound of `u_c - v_c` after the shift.
    pub c_bound: f64,
    /// Constant added to `v_c` so that `min (u_c - v_c) = 1`.
    pub shift: f64,
    pub times: Vec<f64>,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub delta: Vec<f64>,
}

impl MuSeries {
    /// First probe time after which `1 - mu_plus <= eps` holds for good.
    pub fn settle_time(&self, eps: f64) -> Option<f64> {
        let last_bad = self.mu_plus.iter().rposition(|m| 1.0 - m > eps);
        match last_bad {
            None => self.times.first().copied(),
            Some(k) => self.times.get(k + 1).copied(),
        }
    }

    pub fn delta_near(&self, s: f64) -> Option<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - s).abs().partial_cmp(&(b.1 - s).abs()).expect("finite"))?
            .0;
        Some(self.delta[k])
    }
}

/// Monotonicity ratios of `w = u_c - v_c` over the probe net:
///
/// `mu+(s) = min_{x, t >= s} (w(x,t) + eta (t - s)) / w(x,s)`,
/// `mu-(s) = max_{x, t >= s} (w(x,t) - eta (t - s)) / w(x,s)`,
/// `delta(s) = C (1 - mu+(s))`.
pub fn mu_series(history: &[Snapshot], v_c: &[f64], eta: f64) -> Result<MuSeries> {
    if history.is_empty() {
        return Err(Error::Config("empty probe window".into()));
    }
    if !(eta >= 0.0) {
        return Err(Error::Config(format!("eta must be nonnegative, got {eta}")));
    }
    let mut lo = f64::INFINITY;
    for s in history {
        if s.u.len() != v_c.len() {
            return Err(Error::Config("snapshot and eigenfunction lengths differ".into()));
        }
        for (u, v) in s.u.iter().zip(v_c) {
            lo = lo.min(u - v);
        }
    }
    let shift = lo - 1.0;
    let w: Vec<Vec<f64>> = history
        .iter()
        .map(|s| s.u.iter().zip(v_c).map(|(u, v)| u - v - shift).collect())
        .collect();
    let c_bound = w.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let times: Vec<f64> = history.iter().map(|s| s.time).collect();
    let k = times.len();
    let (mu_plus, mu_minus): (Vec<f64>, Vec<f64>) = (0..k)
        .into_par_iter()
        .map(|a| {
            let mut mp = f64::INFINITY;
            let mut mm = f64::NEG_INFINITY;
            for b in a..k {
                let dt = times[b] - times[a];
                for (wb, wa) in w[b].iter().zip(&w[a]) {
                    mp = mp.min((wb + eta * dt) / wa);
                    mm = mm.max((wb - eta * dt) / wa);
                }
            }
            (mp, mm)
        })
        .unzip();
    let delta = mu_plus.iter().map(|m| c_bound * (1.0 - m)).collect();
    Ok(MuSeries {
        eta,
        c_bound,
        shift,
        times,
        mu_plus,
        mu_minus,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecayFit {
    /// `1 - mu+(s) ~ A exp(-lambda s)`
    Rate { lambda: f64, points: usize },
    /// `mu+ = 1` at every probe.
    Converged,
}

/// Least-squares decay rate of `1 - mu+` over probes where it exceeds `1e-6`.
pub fn fit_decay(series: &MuSeries) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.mu_plus)
        .filter(|(_, m)| 1.0 - **m > 1e-6)
        .map(|(t, m)| (*t, (1.0 - m).ln()))
        .collect();
    if series.mu_plus.iter().all(|m| *m >= 1.0) {
        return Ok(DecayFit::Converged);
    }
    if pts.len() < 5 {
        return Err(Error::Config(format!(
            "decay fit needs five probes with mu+ < 1, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(DecayFit::Rate {
        lambda: -sxy / sxx,
        points: pts.len(),
    })
}

/// One-dimensional intrinsic distance at level `a`, stored through the
/// extreme slopes `p+`, `p-` of the sublevel sets and their running
/// trapezoidal integrals.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceTable {
    pub level: f64,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    cum_plus: Vec<f64>,
    cum_minus: Vec<f64>,
}

impl DistanceTable {
    /// Builds the table from the slope bounds on a uniform 1D grid.
    pub fn from_slopes(level: f64, h: f64, p_plus: Vec<f64>, p_minus: Vec<f64>) -> Self {
        let cum = |p: &[f64]| {
            let mut out = vec![0.0; p.len()];
            for i in 1..p.len() {
                out[i] = out[i - 1] + 0.5 * h * (p[i - 1] + p[i]);
            }
            out
        };
        DistanceTable {
            level,
            cum_plus: cum(&p_plus),
            cum_minus: cum(&p_minus),
            p_plus,
            p_minus,
        }
    }

    pub fn len(&self) -> usize {
        self.p_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_plus.is_empty()
    }

    /// `d(x_i, x_j)`
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.cum_plus[i] - self.cum_plus[j]
        } else {
            self.cum_minus[i] - self.cum_minus[j]
        }
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.d(i, j)).collect())
            .collect()
    }
}

/// Extreme points of `{p : H(x, p) <= a}` for convex `H(x, .)`.
///
/// When the sublevel set is empty but `min_p H(x, p) <= a + slack`, both
/// bounds collapse to the minimizer.
fn sublevel_bounds(
    spec: &Hamiltonian,
    x: &[f64],
    a: f64,
    p_max: f64,
    slack: f64,
    sampling: &Sampling,
) -> Result<(f64, f64)> {
    let (m, q) = min_over_p(spec, x, p_max, sampling);
    let q = q[0];
    if m > a {
        if m <= a + slack {
            return Ok((q, q));
        }
        return Err(Error::Infeasible(format!(
            "sublevel set {{H <= {a}}} is empty at x = {:.6} (min H = {m:.6e})",
            x[0]
        )));
    }
    let h = |p: f64| spec.eval(x, &[p]);
    let bisect = |inside: f64, dir: f64| -> Result<f64> {
        let mut lo = inside;
        let mut step = p_max.max(1.0);
        let mut hi = inside + dir * step;
        let mut tries = 0;
        while h(hi) <= a {
            lo = hi;
            step *= 2.0;
            hi = inside + dir * step;
            tries += 1;
            if tries > 60 {
                return Err(Error::Infeasible(format!(
                    "sublevel set {{H <= {a}}} is unbounded at x = {:.6}",
                    x[0]
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if h(mid) <= a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    };
    Ok((bisect(q, 1.0)?, bisect(q, -1.0)?))
}

/// Intrinsic distance at level `a` on a 1D grid:
/// `d(x, y) = int_y^x p+` for `x > y` and `int_x^y (-p-)` for `x < y`.
pub fn intrinsic_distance_1d(
    spec: &Hamiltonian,
    a: f64,
    grid: &Grid,
    p_max: f64,
    slack: f64,
    sampling: &Sampling,
) -> Result<DistanceTable> {
    if grid.dim() != 1 {
        return Err(Error::Config("intrinsic distances are one-dimensional".into()));
    }
    let bounds: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| sublevel_bounds(spec, &grid.coords(i)[..1], a, p_max, slack, sampling))
        .collect::<Result<_>>()?;
    let (pp, pm) = bounds.into_iter().unzip();
    Ok(DistanceTable::from_slopes(a, grid.spacing()[0], pp, pm))
}

#[derive(Debug, Clone, Serialize)]
pub struct AubrySet {
    pub nodes: Vec<usize>,
    pub tol: f64,
    pub warning: Option<String>,
}

/// Nodes where `min_p H(y, p) >= c - tol`.
pub fn aubry_set(
    spec: &Hamiltonian,
    c: f64,
    grid: &Grid,
    tol: f64,
    p_max: f64,
    sampling: &Sampling,
) -> AubrySet {
    let dim = grid.dim();
    let nodes: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| min_over_p(spec, &grid.coords(i)[..dim], p_max, sampling).0 >= c - tol)
        .collect();
    let warning = nodes
        .is_empty()
        .then(|| format!("no node has min_p H >= {c} - {tol}; limit formulas over the set are unavailable"));
    AubrySet {
        nodes,
        tol,
        warning,
    }
}

/// `min_k d(x, sources[k]) + values[k]`
pub fn phi_minus(d: &DistanceTable, values: &[f64], sources: &[usize]) -> Vec<f64> {
    (0..d.len())
        .map(|i| {
            sources
                .iter()
                .zip(values)
                .map(|(&y, v)| d.d(i, y) + v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Lower profile from initial data: minimum over all nodes.
pub fn phi_minus_initial(d: &DistanceTable, u0: &[f64]) -> Vec<f64> {
    let all: Vec<usize> = (0..u0.len()).collect();
    phi_minus(d, u0, &all)
}

/// Lower profile from boundary data given in boundary-slot order.
pub fn phi_minus_boundary(d: &DistanceTable, grid: &Grid, g: &[f64]) -> Vec<f64> {
    let nodes: Vec<usize> = grid.boundary_nodes().iter().map(|b| b.node).collect();
    phi_minus(d, g, &nodes)
}

/// `min_{y in A} d(x, y) + seed(y)`
pub fn phi_infty(d: &DistanceTable, seed: &[f64], aubry: &AubrySet) -> Result<Vec<f64>> {
    if aubry.nodes.is_empty() {
        return Err(Error::Infeasible(
            aubry
                .warning
                .clone()
                .unwrap_or_else(|| "empty Aubry set".into()),
        ));
    }
    let vals: Vec<f64> = aubry.nodes.iter().map(|&y| seed[y]).collect();
    Ok(phi_minus(d, &vals, &aubry.nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    /// Oblique problem, lower envelope from the initial data.
    NeumannLower,
    /// Oblique problem, limit over the Aubry set.
    NeumannLimit,
    StateConstraintLower,
    /// Limit of `u + c t` when the boundary data are eventually inactive.
    StateConstraintLimit,
    /// Lower envelope from the boundary data; limit when `c_sc < 0`.
    DirichletLower,
    /// Limit when `c_sc = 0`, seeded by both lower envelopes.
    MixedLimit,
    /// `c_sc` inside the dead band and the two candidate limits disagree.
    Ambiguous,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileResult {
    pub formula: Formula,
    pub phi_minus: Vec<f64>,
    pub phi_infty: Vec<f64>,
    /// Compared evolution limit (`u(T) + max(c, 0) T` for Dirichlet runs).
    pub limit: Vec<f64>,
    pub distance: f64,
    pub boundary_loss_time: Option<f64>,
    /// Distances to every candidate formula evaluated.
    pub candidates: Vec<(Formula, f64)>,
    pub notes: Vec<String>,
}

/// Inputs of the limit-profile computations.
#[derive(Debug, Clone)]
pub struct ProfileInputs<'a> {
    pub spec: &'a Hamiltonian,
    pub grid: &'a Grid,
    pub u0: &'a [f64],
    pub p_max: f64,
    pub aubry_tol: f64,
    /// Accepted excess of `min_p H` over the distance level.
    pub level_slack: f64,
    pub sampling: Sampling,
}

/// Profiles of an oblique (`mode = Neumann`) or state-constraint run at the
/// ergodic level `c`, compared with `u(T) + cT`.
pub fn free_boundary_profile(
    inputs: &ProfileInputs<'_>,
    c: f64,
    neumann: bool,
    state: &EvolutionState,
) -> Result<ProfileResult> {
    let d = intrinsic_distance_1d(
        inputs.spec,
        c,
        inputs.grid,
        inputs.p_max,
        inputs.level_slack,
        &inputs.sampling,
    )?;
    let aubry = aubry_set(inputs.spec, c, inputs.grid, inputs.aubry_tol, inputs.p_max, &inputs.sampling);
    let lower = phi_minus_initial(&d, inputs.u0);
    let limit_profile = phi_infty(&d, &lower, &aubry)?;
    let limit: Vec<f64> = state.u.iter().map(|u| u + c * state.t).collect();
    let distance = sup_distance(&limit, &limit_profile);
    let (lo_tag, lim_tag) = if neumann {
        (Formula::NeumannLower, Formula::NeumannLimit)
    } else {
        (Formula::StateConstraintLower, Formula::StateConstraintLimit)
    };
    Ok(ProfileResult {
        formula: lim_tag,
        candidates: vec![(lim_tag, distance), (lo_tag, sup_distance(&limit, &lower))],
        phi_minus: lower,
        phi_infty: limit_profile,
        limit,
        distance,
        boundary_loss_time: None,
        notes: aubry.warning.into_iter().collect(),
    })
}

pub const DEAD_BAND: f64 = 1e-2;

/// Agreement tolerance between candidate Dirichlet limits.
pub const PROFILE_TOL: f64 = 2e-2;

/// Limit profile of a Dirichlet run selected by the sign of `c_sc`, with a
/// dead band around zero.
pub fn dirichlet_asymptotic(
    inputs: &ProfileInputs<'_>,
    g: &[f64],
    c_sc: f64,
    state: &EvolutionState,
    dead_band: f64,
) -> Result<ProfileResult> {
    let grid = inputs.grid;
    let u_t = &state.u;
    let t_final = state.t;
    let dist = |a: f64, slack: f64| {
        intrinsic_distance_1d(inputs.spec, a, grid, inputs.p_max, slack, &inputs.sampling)
    };
    let mut notes = Vec::new();
    if c_sc > dead_band {
        let d_s = dist(c_sc, inputs.level_slack)?;
        let aubry = aubry_set(inputs.spec, c_sc, grid, inputs.aubry_tol, inputs.p_max, &inputs.sampling);
        let lower = phi_minus_initial(&d_s, inputs.u0);
        let prof = phi_infty(&d_s, &lower, &aubry)?;
        let limit: Vec<f64> = u_t.iter().map(|u| u + c_sc * t_final).collect();
        let distance = sup_distance(&limit, &prof);
        let loss = boundary_loss_time(state, grid, g, 1e-8);
        if loss.is_none() {
            notes.push("boundary data stayed active at every probe".into());
        }
        return Ok(ProfileResult {
            formula: Formula::StateConstraintLimit,
            candidates: vec![(Formula::StateConstraintLimit, distance)],
            phi_minus: lower,
            phi_infty: prof,
            limit,
            distance,
            boundary_loss_time: loss,
            notes,
        });
    }
    let d0 = dist(0.0, dead_band.max(inputs.level_slack))?;
    let lower_d = phi_minus_boundary(&d0, grid, g);
    let limit = u_t.to_vec();
    let dist_lower = sup_distance(&limit, &lower_d);
    if c_sc < -dead_band {
        return Ok(ProfileResult {
            formula: Formula::DirichletLower,
            candidates: vec![(Formula::DirichletLower, dist_lower)],
            phi_infty: lower_d.clone(),
            phi_minus: lower_d,
            limit,
            distance: dist_lower,
            boundary_loss_time: None,
            notes,
        });
    }
    // |c_sc| within the dead band: the mixed formula at level zero
    let aubry = aubry_set(inputs.spec, 0.0, grid, inputs.aubry_tol.max(c_sc.abs()), inputs.p_max, &inputs.sampling);
    let lower_s = phi_minus_initial(&d0, inputs.u0);
    let seed: Vec<f64> = lower_s.iter().zip(&lower_d).map(|(a, b)| a.min(*b)).collect();
    // the boundary keeps acting as a source alongside the Aubry set
    let mixed: Vec<f64> = phi_infty(&d0, &seed, &aubry)?
        .iter()
        .zip(&lower_d)
        .map(|(a, b)| a.min(*b))
        .collect();
    let dist_mixed = sup_distance(&limit, &mixed);
    let candidates = vec![(Formula::MixedLimit, dist_mixed), (Formula::DirichletLower, dist_lower)];
    let sign_known = c_sc.abs() < 1e-12;
    let disagree = sup_distance(&mixed, &lower_d) > PROFILE_TOL;
    if disagree && !sign_known {
        notes.push(format!(
            "c_sc = {c_sc:.3e} is inside the dead band and the candidate limits differ by {:.3e}",
            sup_distance(&mixed, &lower_d)
        ));
        return Ok(ProfileResult {
            formula: Formula::Ambiguous,
            candidates,
            phi_minus: seed,
            phi_infty: mixed,
            limit,
            distance: dist_mixed.min(dist_lower),
            boundary_loss_time: None,
            notes,
        });
    }
    Ok(ProfileResult {
        formula: Formula::MixedLimit,
        candidates,
        phi_minus: seed,
        phi_infty: mixed,
        limit,
        distance: dist_mixed,
        boundary_loss_time: None,
        notes,
    })
}

/// First probe time after which `u < g - tol` on every boundary node at
/// every later probe.
pub fn boundary_loss_time(state: &EvolutionState, grid: &Grid, g: &[f64], tol: f64) -> Option<f64> {
    let inactive: Vec<bool> = state
        .snapshots
        .iter()
        .map(|s| {
            grid.boundary_nodes()
                .iter()
                .enumerate()
                .all(|(slot, b)| s.u[b.node] < g[slot] - tol)
        })
        .collect();
    let last_active = inactive.iter().rposition(|x| !x);
    match last_active {
        None => state.snapshots.first().map(|s| s.time),
        Some(k) if k + 1 < inactive.len() => Some(state.snapshots[k + 1].time),
        Some(_) => None,
    }
}

/// `u0^g`: the initial data with `u0 ^ g` on the boundary.
pub fn boundary_meet(grid: &Grid, u0: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = u0.to_vec();
    for (slot, b) in grid.boundary_nodes().iter().enumerate() {
        out[b.node] = out[b.node].min(g[slot]);
    }
    out
}

/// Discrete inf-convolution `min_y w(y) + k |x - y|^2` over all nodes.
pub fn inf_convolution(grid: &Grid, w: &[f64], k: f64) -> Vec<f64> {
    let dim = grid.dim();
    let coords: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = coords[i];
            coords
                .iter()
                .zip(w)
                .map(|(y, wy)| {
                    let r2: f64 = (0..dim).map(|a| (x[a] - y[a]).powi(2)).sum();
                    wy + k * r2
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichEntry {
    pub k: f64,
    pub gap: f64,
    /// Limit of the run started from the regularized initial data.
    pub limit_regularized: Vec<f64>,
    /// Limit of the run with relaxed boundary data.
    pub limit_relaxed: Vec<f64>,
    /// `||u0^k - u0^g||_inf`
    pub regularization_size: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub c_sc: f64,
    pub horizon: f64,
    pub compatible: bool,
    pub entries: Vec<SandwichEntry>,
    pub strictly_decreasing: bool,
    /// Candidate limit `phi_s^-` and distances of the final limits to it.
    pub candidate_lower_state: Option<Vec<f64>>,
    /// Candidate limit `phi_s^- ^ phi_d^-`.
    pub candidate_meet: Option<Vec<f64>>,
    pub candidate_distances: Vec<(String, f64, f64)>,
}

/// Brackets a Dirichlet problem whose initial data may violate `u0 <= g`
/// by two compatible families: regularized initial data `u0^k`, and the
/// relaxed boundary data `max(g, u0 - k t)`. Limits are `u(T) + max(c_sc, 0) T`.
pub fn compat_free_sandwich(
    scheme: &Scheme,
    u0: &[f64],
    g: &[f64],
    ks: &[f64],
    horizon: f64,
    c_sc: f64,
    candidates: Option<&ProfileInputs<'_>>,
) -> Result<SandwichReport> {
    if ks.windows(2).any(|w| !(w[1] > w[0])) || ks.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Config("sandwich parameters must be positive and increasing".into()));
    }
    let grid = scheme.grid();
    let nodes: Vec<usize> = grid.boundary_nodes().iter().map(|b| b.node).collect();
    let compatible = nodes.iter().zip(g).all(|(&n, gv)| u0[n] <= *gv);
    let ug = boundary_meet(grid, u0, g);
    let u0_boundary: Vec<f64> = nodes.iter().map(|&n| u0[n]).collect();
    let drift = c_sc.max(0.0);
    let entries: Vec<SandwichEntry> = ks
        .par_iter()
        .map(|&k| -> Result<SandwichEntry> {
            let uk = inf_convolution(grid, &ug, k);
            let first = scheme.with_bc(BoundaryCondition::Dirichlet(DirichletData::Fixed(g.to_vec())));
            let second = scheme.with_bc(BoundaryCondition::Dirichlet(DirichletData::Relaxing {
                g: g.to_vec(),
                u0: u0_boundary.clone(),
                rate: k,
            }));
            let (a, b) = rayon::join(|| first.evolve(&uk, horizon), || second.evolve(u0, horizon));
            let (a, b) = (a?, b?);
            let la: Vec<f64> = a.u.iter().map(|u| u + drift * a.t).collect();
            let lb: Vec<f64> = b.u.iter().map(|u| u + drift * b.t).collect();
            Ok(SandwichEntry {
                k,
                gap: sup_distance(&la, &lb),
                regularization_size: sup_distance(&uk, &ug),
                limit_regularized: la,
                limit_relaxed: lb,
            })
        })
        .collect::<Result<_>>()?;
    let strictly_decreasing = entries.windows(2).all(|w| w[1].gap < w[0].gap);
    let (mut lower_state, mut meet, mut dists) = (None, None, Vec::new());
    if let Some(inp) = candidates {
        let d_s = intrinsic_distance_1d(inp.spec, c_sc, grid, inp.p_max, inp.level_slack, &inp.sampling);
        let d_0 = intrinsic_distance_1d(inp.spec, 0.0, grid, inp.p_max, inp.level_slack.max(DEAD_BAND), &inp.sampling);
        if let (Ok(d_s), Ok(d_0)) = (d_s, d_0) {
            let ls = phi_minus_initial(&d_s, u0);
            let ld = phi_minus_boundary(&d_0, grid, g);
            let m: Vec<f64> = ls.iter().zip(&ld).map(|(a, b)| a.min(*b)).collect();
            if let Some(last) = entries.last() {
                dists.push((
                    "lower-state".to_string(),
                    sup_distance(&last.limit_regularized, &ls),
                    sup_distance(&last.limit_relaxed, &ls),
                ));
                dists.push((
                    "meet".to_string(),
                    sup_distance(&last.limit_regularized, &m),
                    sup_distance(&last.limit_relaxed, &m),
                ));
            }
            lower_state = Some(ls);
            meet = Some(m);
        }
    }
    Ok(SandwichReport {
        c_sc,
        horizon,
        compatible,
        entries,
        strictly_decreasing,
        candidate_lower_state: lower_state,
        candidate_meet: meet,
        candidate_distances: dists,
    })
}
