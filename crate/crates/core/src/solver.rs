//! Explicit monotone time stepping for `u_t + H(x, Du) = 0` with viscosity
//! boundary conditions.
//!
//! Interior nodes use the Lax-Friedrichs flux. Boundary conditions enter
//! through one ghost value per boundary node and outward axis:
//!
//! * oblique derivative: the ghost makes the one-sided outward difference
//!   satisfy `gamma . Du = g`;
//! * state constraint: the ghost has the steep outward slope `lambda_sc`, and
//!   the node uses the Godunov flux `min H` over the slopes between the inward
//!   difference and the ghost slope, so that no information enters from
//!   outside the domain;
//! * Dirichlet: as state constraint, followed by the clamp `u <= g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{validate_oblique, Grid, ObliqueCheck, ObliqueField, Side};
use crate::hamiltonian::{
    default_p_max, estimate_alpha, minimize_interval, FluxParams, Hamiltonian, NodeHamiltonian,
    Sampling,
};

/// Boundary values of a Dirichlet problem, in boundary-slot order.
#[derive(Debug, Clone)]
pub enum DirichletData {
    Fixed(Vec<f64>),
    /// `max(g(x), u0(x) - rate * t)`
    Relaxing { g: Vec<f64>, u0: Vec<f64>, rate: f64 },
}

impl DirichletData {
    #[inline]
    pub fn value(&self, slot: usize, t: f64) -> f64 {
        match self {
            DirichletData::Fixed(g) => g[slot],
            DirichletData::Relaxing { g, u0, rate } => g[slot].max(u0[slot] - rate * t),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DirichletData::Fixed(g) => g.len(),
            DirichletData::Relaxing { g, .. } => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    Neumann(ObliqueField),
    StateConstraint,
    Dirichlet(DirichletData),
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Neumann(_) => "neumann",
            BoundaryCondition::StateConstraint => "state-constraint",
            BoundaryCondition::Dirichlet(_) => "dirichlet",
        }
    }

    fn uses_sc_flux(&self) -> bool {
        !matches!(self, BoundaryCondition::Neumann(_))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    /// Outward ghost slope for state-constraint and Dirichlet nodes.
    pub lambda_sc: Option<f64>,
    pub tol_bc: f64,
    /// Time between recorded probes.
    pub probe_every: f64,
    pub p_max: Option<f64>,
    /// Overrides the sampled artificial viscosity on every axis.
    pub alpha: Option<f64>,
    pub sampling: Sampling,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl: 0.4,
            lambda_sc: None,
            tol_bc: 1e-8,
            probe_every: 0.5,
            p_max: None,
            alpha: None,
            sampling: Sampling::default(),
        }
    }
}

/// Ghost values indexed by boundary slot, axis and side; NaN where the node
/// has no outward neighbour.
#[derive(Debug, Clone)]
pub struct GhostLayer {
    values: Vec<[[f64; 2]; 2]>,
}

impl GhostLayer {
    pub fn get(&self, slot: usize, axis: usize, side: Side) -> Option<f64> {
        let v = self.values[slot][axis][side.index()];
        (!v.is_nan()).then_some(v)
    }
}

/// Builds the ghost layer for `u`.
pub fn apply_boundary(
    u: &[f64],
    bc: &BoundaryCondition,
    grid: &Grid,
    lambda_sc: f64,
) -> GhostLayer {
    let dim = grid.dim();
    let h = grid.spacing();
    let mut values = vec![[[f64::NAN; 2]; 2]; grid.boundary_nodes().len()];
    for (slot, b) in grid.boundary_nodes().iter().enumerate() {
        let ub = u[b.node];
        match bc {
            BoundaryCondition::StateConstraint | BoundaryCondition::Dirichlet(_) => {
                for axis in 0..dim {
                    if let Some(side) = b.outward[axis] {
                        values[slot][axis][side.index()] = ub + lambda_sc * h[axis];
                    }
                }
            }
            BoundaryCondition::Neumann(field) => {
                let gamma = field.gamma(slot);
                let g = field.g(slot);
                let mut du = [0.0; 2];
                let outward: Vec<usize> = (0..dim).filter(|&a| b.outward[a].is_some()).collect();
                if outward.len() == 1 {
                    let i = outward[0];
                    let mut rest = g;
                    for j in 0..dim {
                        if j != i {
                            let s = grid.stride(j);
                            let dj = (u[b.node + s] - u[b.node - s]) / (2.0 * h[j]);
                            rest -= gamma[j] * dj;
                            du[j] = dj;
                        }
                    }
                    du[i] = rest / gamma[i];
                } else {
                    // corner: normal part from the datum, tangential part from
                    // the inward one-sided differences
                    let mut inward = [0.0; 2];
                    for a in 0..dim {
                        let s = grid.stride(a);
                        inward[a] = match b.outward[a] {
                            Some(Side::Upper) => (ub - u[b.node - s]) / h[a],
                            _ => (u[b.node + s] - ub) / h[a],
                        };
                    }
                    let n = b.normal;
                    let t = [-n[1], n[0]];
                    let tau = t[0] * inward[0] + t[1] * inward[1];
                    let gn = gamma[0] * n[0] + gamma[1] * n[1];
                    let gt = gamma[0] * t[0] + gamma[1] * t[1];
                    let sn = (g - tau * gt) / gn;
                    du = [sn * n[0] + tau * t[0], sn * n[1] + tau * t[1]];
                }
                for a in 0..dim {
                    if let Some(side) = b.outward[a] {
                        values[slot][a][side.index()] = ub + side.sign() * h[a] * du[a];
                    }
                }
            }
        }
    }
    GhostLayer { values }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub time: f64,
    pub sup_norm: f64,
    /// Dirichlet runs: `min over boundary of g - u`.
    pub boundary_min_gap: Option<f64>,
    /// Rate of change of the nodal mean since the previous probe.
    pub slope_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionState {
    pub u: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub steps: usize,
    /// `max ||u(t+dt) - u(t)||_inf / dt` over all steps taken.
    pub lipschitz: f64,
    /// Largest one-sided difference seen at a probe.
    pub max_gradient: f64,
    /// Dirichlet runs: `max over boundary and t >= dt of u - g`.
    pub max_boundary_excess: Option<f64>,
    pub probes: Vec<ProbeRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl EvolutionState {
    pub fn new(u0: Vec<f64>, dt: f64) -> Self {
        EvolutionState {
            u: u0,
            t: 0.0,
            dt,
            steps: 0,
            lipschitz: 0.0,
            max_gradient: 0.0,
            max_boundary_excess: None,
            probes: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    /// `(t, ||u(t) + c t||_inf)` at every snapshot.
    pub fn drift_norms(&self, c: f64) -> Vec<(f64, f64)> {
        self.snapshots
            .iter()
            .map(|s| (s.time, sup_norm_shifted(&s.u, c * s.time)))
            .collect()
    }

    pub fn snapshot_near(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().min_by(|a, b| {
            (a.time - t)
                .abs()
                .partial_cmp(&(b.time - t).abs())
                .expect("finite times")
        })
    }
}

fn sup_norm_shifted(u: &[f64], shift: f64) -> f64 {
    u.iter().map(|v| (v + shift).abs()).fold(0.0, f64::max)
}

/// A configured discretization: Hamiltonian bound to the grid, boundary
/// condition, flux parameters and the fixed time step.
#[derive(Debug, Clone)]
pub struct Scheme {
    spec: Hamiltonian,
    ham: NodeHamiltonian,
    grid: Grid,
    bc: BoundaryCondition,
    flux: FluxParams,
    lambda_sc: f64,
    dt: f64,
    config: SolverConfig,
    warnings: Vec<String>,
}

const SC_SAMPLES: usize = 32;

impl Scheme {
    pub fn new(
        spec: &Hamiltonian,
        bc: BoundaryCondition,
        grid: &Grid,
        config: &SolverConfig,
    ) -> Result<Self> {
        if spec.dim() != grid.dim() {
            return Err(Error::Config(format!(
                "hamiltonian is {}-dimensional but the grid is {}-dimensional",
                spec.dim(),
                grid.dim()
            )));
        }
        if !(config.cfl > 0.0 && config.cfl <= 1.0) {
            return Err(Error::Config("CFL factor must be in (0,1]".into()));
        }
        match &bc {
            BoundaryCondition::Neumann(field) => {
                if let ObliqueCheck::Violation { node, dot } = validate_oblique(grid, field)? {
                    return Err(Error::Config(format!(
                        "oblique direction not outward at node {node}: n . gamma = {dot}"
                    )));
                }
            }
            BoundaryCondition::Dirichlet(data) => {
                let nb = grid.boundary_nodes().len();
                if data.len() != nb {
                    return Err(Error::Config(format!(
                        "dirichlet data has {} values for {nb} boundary nodes",
                        data.len()
                    )));
                }
                if (0..nb).any(|s| !data.value(s, 0.0).is_finite()) {
                    return Err(Error::Config("non-finite dirichlet data".into()));
                }
            }
            BoundaryCondition::StateConstraint => {}
        }
        let sampling = config.sampling;
        let p_max = match config.p_max {
            Some(p) => p,
            None => default_p_max(spec, grid, &sampling)?,
        };
        let lambda_sc = config.lambda_sc.unwrap_or(p_max);
        let flux = match config.alpha {
            Some(a) => FluxParams {
                alpha: [a, if grid.dim() == 2 { a } else { 0.0 }],
                p_max,
            },
            None => estimate_alpha(spec, grid, p_max, &sampling)?,
        };
        let dt = config.cfl * grid.min_spacing() / (grid.dim() as f64 * flux.alpha_max(grid.dim()));
        Ok(Scheme {
            spec: spec.clone(),
            ham: spec.bind(grid),
            grid: grid.clone(),
            bc,
            flux,
            lambda_sc,
            dt,
            config: config.clone(),
            warnings: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &Hamiltonian {
        &self.spec
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn flux(&self) -> &FluxParams {
        &self.flux
    }

    pub fn lambda_sc(&self) -> f64 {
        self.lambda_sc
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Same discretization with a different boundary condition.
    pub fn with_bc(&self, bc: BoundaryCondition) -> Self {
        let mut out = self.clone();
        out.bc = bc;
        out
    }

    /// Widens the flux box (and with it `alpha`, `dt` and a defaulted
    /// `lambda_sc`) to cover the slopes of `data`, including the jump that the
    /// dirichlet clamp creates at `t = 0`. Returns a clone when nothing changes.
    pub fn fitted_to(&self, data: &[&[f64]]) -> Result<Scheme> {
        let h = self.grid.min_spacing();
        let mut needed = 0.0f64;
        for u in data {
            needed = needed.max(self.max_gradient(u));
            if let BoundaryCondition::Dirichlet(g) = &self.bc {
                for (slot, b) in self.grid.boundary_nodes().iter().enumerate() {
                    needed = needed.max((u[b.node] - g.value(slot, 0.0)) / h);
                }
            }
        }
        if needed <= self.flux.p_max {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        if self.config.alpha.is_some() {
            out.warnings.push(format!(
                "data slope {needed:.3e} exceeds the flux box {:.3e} but alpha is fixed",
                self.flux.p_max
            ));
            return Ok(out);
        }
        let p_max = 1.1 * needed;
        out.flux = estimate_alpha(&self.spec, &self.grid, p_max, &self.config.sampling)?;
        if self.config.lambda_sc.is_none() {
            out.lambda_sc = p_max;
        }
        out.dt = self.config.cfl * h / (self.grid.dim() as f64 * out.flux.alpha_max(self.grid.dim()));
        out.warnings.push(format!(
            "flux box widened from {:.3e} to {p_max:.3e} to cover the data",
            self.flux.p_max
        ));
        Ok(out)
    }

    /// Same discretization with `H` replaced by `H - a`. Flux parameters
    /// and time step are unchanged (the shift does not affect `dH/dp`).
    pub fn shifted(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.spec = self.spec.shifted(a);
        out.ham = out.spec.bind(&self.grid);
        out
    }

    /// Numerical Hamiltonian at one node given its one-sided differences.
    #[inline]
    fn node_flux(&self, node: usize, pm: [f64; 2], pp: [f64; 2]) -> f64 {
        let dim = self.grid.dim();
        let slot = self.grid.boundary_slot(node);
        if let (Some(slot), true) = (slot, self.bc.uses_sc_flux()) {
            return self.boundary_godunov(node, slot, pm, pp);
        }
        let mut avg = [0.0; 2];
        let mut visc = 0.0;
        for i in 0..dim {
            avg[i] = 0.5 * (pm[i] + pp[i]);
            visc += 0.5 * self.flux.alpha[i] * (pp[i] - pm[i]);
        }
        self.ham.eval(node, &avg[..dim]) - visc
    }

    /// `min H` over outward-axis slopes between the inward difference and
    /// the ghost slope; Lax-Friedrichs on the remaining axes.
    fn boundary_godunov(&self, node: usize, slot: usize, pm: [f64; 2], pp: [f64; 2]) -> f64 {
        let dim = self.grid.dim();
        let b = &self.grid.boundary_nodes()[slot];
        let mut base = [0.0; 2];
        let mut visc = 0.0;
        let mut range = [(0.0, 0.0); 2];
        let mut free = [false; 2];
        for i in 0..dim {
            match b.outward[i] {
                Some(Side::Upper) => range[i] = (pm[i], pp[i].max(pm[i])),
                Some(Side::Lower) => range[i] = (pm[i].min(pp[i]), pp[i]),
                None => {
                    free[i] = true;
                    base[i] = 0.5 * (pm[i] + pp[i]);
                    visc += 0.5 * self.flux.alpha[i] * (pp[i] - pm[i]);
                }
            }
        }
        let outward: Vec<usize> = (0..dim).filter(|&i| !free[i]).collect();
        let eval = |p: &[f64; 2]| self.ham.eval(node, &p[..dim]);
        let best = if outward.len() == 1 {
            let i = outward[0];
            let (lo, hi) = range[i];
            minimize_interval(lo, hi, SC_SAMPLES, |q| {
                let mut p = base;
                p[i] = q;
                eval(&p)
            })
            .1
        } else {
            // corner: alternate 1D minimizations, seeded from a coarse tensor sample
            let m = 8usize;
            let at = |r: (f64, f64), k: usize| r.0 + (r.1 - r.0) * k as f64 / m as f64;
            let mut p = [range[0].0, range[1].0];
            let mut best = eval(&p);
            for a in 0..=m {
                for c in 0..=m {
                    let cand = [at(range[0], a), at(range[1], c)];
                    let v = eval(&cand);
                    if v < best {
                        best = v;
                        p = cand;
                    }
                }
            }
            for _ in 0..4 {
                for i in 0..2 {
                    let (q, v) = minimize_interval(range[i].0, range[i].1, SC_SAMPLES, |q| {
                        let mut t = p;
                        t[i] = q;
                        eval(&t)
                    });
                    if v < best {
                        best = v;
                        p[i] = q;
                    }
                }
            }
            best
        };
        best - visc
    }

    /// One-sided differences at `node` using `ghosts` outside the domain.
    #[inline]
    fn differences(&self, u: &[f64], ghosts: &GhostLayer, node: usize) -> ([f64; 2], [f64; 2]) {
        let dim = self.grid.dim();
        let h = self.grid.spacing();
        let counts = self.grid.counts();
        let idx = self.grid.multi_index(node);
        let slot = self.grid.boundary_slot(node);
        let mut pm = [0.0; 2];
        let mut pp = [0.0; 2];
        for a in 0..dim {
            let s = self.grid.stride(a);
            let left = if idx[a] > 0 {
                u[node - s]
            } else {
                ghosts.values[slot.expect("boundary node")][a][0]
            };
            let right = if idx[a] + 1 < counts[a] {
                u[node + s]
            } else {
                ghosts.values[slot.expect("boundary node")][a][1]
            };
            pm[a] = (u[node] - left) / h[a];
            pp[a] = (right - u[node]) / h[a];
        }
        (pm, pp)
    }

    pub fn ghosts(&self, u: &[f64]) -> GhostLayer {
        apply_boundary(u, &self.bc, &self.grid, self.lambda_sc)
    }

    /// Numerical Hamiltonian at every node.
    pub fn fluxes(&self, u: &[f64]) -> Vec<f64> {
        let ghosts = self.ghosts(u);
        (0..self.grid.len())
            .map(|node| {
                let (pm, pp) = self.differences(u, &ghosts, node);
                self.node_flux(node, pm, pp)
            })
            .collect()
    }

    /// Largest one-sided difference magnitude of `u` (interior stencils).
    pub fn max_gradient(&self, u: &[f64]) -> f64 {
        let ghosts = self.ghosts(u);
        let mut m = 0.0f64;
        for node in 0..self.grid.len() {
            let (pm, pp) = self.differences(u, &ghosts, node);
            let on_boundary = self.grid.is_boundary(node) && self.bc.uses_sc_flux();
            for a in 0..self.grid.dim() {
                if on_boundary {
                    // ghost slope is an artifact, not a property of u
                    continue;
                }
                m = m.max(pm[a].abs()).max(pp[a].abs());
            }
        }
        m
    }

    /// Advances `state` by the scheme's time step.
    pub fn step(&self, state: &mut EvolutionState) -> Result<()> {
        self.step_with(state, self.dt)
    }

    /// Advances `state` by `dt`, which must respect the CFL bound.
    pub fn step_with(&self, state: &mut EvolutionState, dt: f64) -> Result<()> {
        if dt > self.dt * (1.0 + 1e-12) || dt <= 0.0 {
            return Err(Error::Cfl {
                dt,
                max_dt: self.dt,
            });
        }
        let f = self.fluxes(&state.u);
        let t_new = if dt == state.dt {
            (state.steps + 1) as f64 * dt
        } else {
            state.t + dt
        };
        let mut change = 0.0f64;
        for node in 0..self.grid.len() {
            let mut v = state.u[node] - dt * f[node];
            if let (BoundaryCondition::Dirichlet(data), Some(slot)) =
                (&self.bc, self.grid.boundary_slot(node))
            {
                let g = data.value(slot, t_new);
                v = v.min(g);
                let excess = v - g;
                state.max_boundary_excess =
                    Some(state.max_boundary_excess.map_or(excess, |m| m.max(excess)));
            }
            if !v.is_finite() {
                return Err(Error::Divergence { node, time: t_new });
            }
            change = change.max((v - state.u[node]).abs());
            state.u[node] = v;
        }
        state.lipschitz = state.lipschitz.max(change / dt);
        state.steps += 1;
        state.t = t_new;
        Ok(())
    }

    fn probe(&self, state: &mut EvolutionState) {
        let time = state.t;
        let sup_norm = state.u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let boundary_min_gap = match &self.bc {
            BoundaryCondition::Dirichlet(data) => Some(
                self.grid
                    .boundary_nodes()
                    .iter()
                    .enumerate()
                    .map(|(slot, b)| data.value(slot, time) - state.u[b.node])
                    .fold(f64::INFINITY, f64::min),
            ),
            _ => None,
        };
        let mean = state.u.iter().sum::<f64>() / state.u.len() as f64;
        let slope_estimate = state.snapshots.last().and_then(|prev| {
            let dtp = time - prev.time;
            (dtp > 0.0).then(|| {
                let prev_mean = prev.u.iter().sum::<f64>() / prev.u.len() as f64;
                (mean - prev_mean) / dtp
            })
        });
        state.max_gradient = state.max_gradient.max(self.max_gradient(&state.u));
        state.probes.push(ProbeRecord {
            time,
            sup_norm,
            boundary_min_gap,
            slope_estimate,
        });
        state.snapshots.push(Snapshot {
            time,
            u: state.u.clone(),
        });
    }

    /// Marches from `u0` to the first step at or after `t_final`, recording
    /// probes at `t = 0`, every `probe_every` and at the final time.
    pub fn evolve(&self, u0: &[f64], t_final: f64) -> Result<EvolutionState> {
        if u0.len() != self.grid.len() {
            return Err(Error::Config(format!(
                "initial data has {} values for {} nodes",
                u0.len(),
                self.grid.len()
            )));
        }
        if let Some(node) = u0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite initial data at node {node}")));
        }
        let mut state = EvolutionState::new(u0.to_vec(), self.dt);
        let n_steps = ((t_final / self.dt) - 1e-9).ceil().max(0.0) as usize;
        let stride = ((self.config.probe_every / self.dt).round() as usize).max(1);
        self.probe(&mut state);
        for k in 1..=n_steps {
            self.step(&mut state)?;
            if k % stride == 0 || k == n_steps {
                self.probe(&mut state);
            }
        }
        Ok(state)
    }

    /// Warnings about the run: gradients approaching the flux box.
    pub fn run_warnings(&self, state: &EvolutionState) -> Vec<String> {
        let mut out = self.warnings.clone();
        if state.max_gradient > 0.9 * self.flux.p_max {
            out.push(format!(
                "solution gradient {:.3e} approaches the flux box radius {:.3e}",
                state.max_gradient, self.flux.p_max
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `max over nodes and probes of (u - v)^+`.
    pub max_violation: f64,
    /// `max - min` over both initial data.
    pub dynamic_range: f64,
    /// `(t, ||u - v||_inf)` at every probe.
    pub gaps: Vec<(f64, f64)>,
    /// Largest increase of the gap between consecutive probes.
    pub contraction_excess: f64,
}

/// Evolves two initial data with the same scheme and measures how far the
/// ordering `u <= v` is violated.
pub fn discrete_comparison(
    scheme: &Scheme,
    u0: &[f64],
    v0: &[f64],
    t_final: f64,
) -> Result<ComparisonReport> {
    let (ru, rv) = rayon::join(|| scheme.evolve(u0, t_final), || scheme.evolve(v0, t_final));
    let (su, sv) = (ru?, rv?);
    let mut max_violation = 0.0f64;
    let mut gaps = Vec::with_capacity(su.snapshots.len());
    for (a, b) in su.snapshots.iter().zip(&sv.snapshots) {
        let mut gap = 0.0f64;
        for (x, y) in a.u.iter().zip(&b.u) {
            max_violation = max_violation.max(x - y);
            gap = gap.max((x - y).abs());
        }
        gaps.push((a.time, gap));
    }
    let contraction_excess = gaps
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(0.0, f64::max);
    let (lo, hi) = u0
        .iter()
        .chain(v0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    Ok(ComparisonReport {
        max_violation,
        dynamic_range: hi - lo,
        gaps,
        contraction_excess,
    })
}
