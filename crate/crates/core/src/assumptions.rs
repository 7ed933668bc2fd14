//! Sampled audits of the structural hypotheses on `H`.
//!
//! A failing verdict always carries a witness that can be re-evaluated on
//! its own; a passing verdict only means that no violation was found among
//! the samples drawn.
//!
//! Random draws are organized in fixed-size shards, each with its own
//! ChaCha stream derived from the seed, so the first `N` draws of a run with
//! `2N` samples are exactly the draws of the run with `N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Grid;
use crate::hamiltonian::{coercivity_radius, default_p_max, min_over_p, Hamiltonian, Sampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn suffix(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Ray inequality at `(x, p, q, mu)`: `lhs = mu H_a(x, p/mu + q)`,
    /// `rhs = H_a(x, p + q)`, `margin` the normalized gap.
    Ray {
        sign: Sign,
        level: f64,
        eta: f64,
        x: Vec<f64>,
        p: Vec<f64>,
        q: Vec<f64>,
        mu: f64,
        lhs: f64,
        rhs: f64,
        margin: f64,
    },
    /// `H(x, cap * direction) = value < level`.
    Coercivity {
        level: f64,
        x: Vec<f64>,
        direction: Vec<f64>,
        cap: f64,
        value: f64,
    },
    /// `H(x, (p+q)/2) = lhs > rhs = (H(x,p) + H(x,q)) / 2`.
    Midpoint {
        x: Vec<f64>,
        p: Vec<f64>,
        q: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },
    /// A pointwise quantity with the wrong sign.
    Value {
        what: String,
        x: Vec<f64>,
        p: Option<Vec<f64>>,
        value: f64,
    },
    Nodes {
        nodes: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Normalized ray margin: `(mu H(x,p/mu+q) - H(x,p+q)) / (1 - mu)` for the
/// plus sign, `(H(x,p+q) - mu H(x,p/mu+q)) / ((mu - 1) / mu)` for minus.
pub fn ray_margin(spec: &Hamiltonian, sign: Sign, x: &[f64], p: &[f64], q: &[f64], mu: f64) -> (f64, f64, f64) {
    let dim = x.len();
    let mut a = [0.0; 2];
    let mut b = [0.0; 2];
    for i in 0..dim {
        a[i] = p[i] / mu + q[i];
        b[i] = p[i] + q[i];
    }
    let lhs = mu * spec.eval(x, &a[..dim]);
    let rhs = spec.eval(x, &b[..dim]);
    let margin = match sign {
        Sign::Plus => (lhs - rhs) / (1.0 - mu),
        Sign::Minus => (rhs - lhs) / ((mu - 1.0) / mu),
    };
    (lhs, rhs, margin)
}

impl Witness {
    /// Re-evaluates the recorded inequality; returns the recomputed margin
    /// (or value) for comparison with the recorded one.
    pub fn replay(&self, spec: &Hamiltonian) -> f64 {
        match self {
            Witness::Ray {
                sign, x, p, q, mu, ..
            } => ray_margin(spec, *sign, x, p, q, *mu).2,
            Witness::Coercivity {
                x, direction, cap, ..
            } => {
                let p: Vec<f64> = direction.iter().map(|d| d * cap).collect();
                spec.eval(x, &p)
            }
            Witness::Midpoint { x, p, q, .. } => {
                let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
                spec.eval(x, &m) - 0.5 * (spec.eval(x, p) + spec.eval(x, q))
            }
            Witness::Value { value, .. } => *value,
            Witness::Nodes { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// The recorded quantity that `replay` recomputes.
    pub fn recorded(&self) -> f64 {
        match self {
            Witness::Ray { margin, .. } => *margin,
            Witness::Coercivity { value, .. } => *value,
            Witness::Midpoint { lhs, rhs, .. } => lhs - rhs,
            Witness::Value { value, .. } => *value,
            Witness::Nodes { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Empirical modulus for one `eta` (and one exclusion radius, if any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub eta: f64,
    pub epsilon: Option<f64>,
    pub psi_hat: Option<f64>,
    pub premise_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub id: String,
    pub verdict: Verdict,
    /// A pass is sampled evidence, not a proof.
    pub sampled: bool,
    pub samples: usize,
    pub box_radius: Option<f64>,
    pub seed: Option<u64>,
    pub moduli: Vec<Modulus>,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn new(id: impl Into<String>) -> Self {
        AssumptionReport {
            id: id.into(),
            verdict: Verdict::Pass,
            sampled: false,
            samples: 0,
            box_radius: None,
            seed: None,
            moduli: Vec::new(),
            witness: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub samples: usize,
    pub seed: u64,
    pub etas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Momentum box for `p` and `q`; defaults to the flux box radius.
    pub p_box: Option<f64>,
    /// A modulus at or below this value is a violation.
    pub threshold: f64,
    /// Tolerance on `min_p H_a = 0` over the exceptional set.
    pub min_tol: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            samples: 100_000,
            seed: 0,
            etas: vec![0.05, 0.1, 0.2],
            epsilons: vec![0.1, 0.05],
            p_box: None,
            threshold: 1e-6,
            min_tol: 1e-3,
        }
    }
}

pub const SHARD: usize = 4096;

/// `mu` grid of the plus inequality; `mu = 1` is excluded since both sides
/// coincide there.
pub fn mu_grid(sign: Sign) -> Vec<f64> {
    match sign {
        Sign::Plus => (1..=9).map(|k| k as f64 / 10.0).collect(),
        Sign::Minus => (1..=9).map(|k| 10f64.powf(k as f64 / 9.0)).collect(),
    }
}

/// Coercivity at the levels 0, 10 and 100.
pub fn check_coercivity(spec: &Hamiltonian, grid: &Grid, cap: f64, sampling: &Sampling) -> AssumptionReport {
    let mut rep = AssumptionReport::new("coercivity");
    rep.sampled = true;
    for level in [0.0, 10.0, 100.0] {
        match coercivity_radius(spec, grid, level, cap, sampling) {
            Ok(r) => rep.notes.push(format!("level {level}: radius {r:.6e}")),
            Err(crate::Error::NotCoercive {
                level,
                cap,
                x,
                direction,
                value,
            }) => {
                rep.verdict = Verdict::Fail;
                rep.witness = Some(Witness::Coercivity {
                    level,
                    x,
                    direction,
                    cap,
                    value,
                });
                return rep;
            }
            Err(e) => {
                rep.verdict = Verdict::Fail;
                rep.notes.push(e.to_string());
                return rep;
            }
        }
    }
    rep
}

fn box_radius(spec: &Hamiltonian, grid: &Grid, cfg: &AuditConfig) -> Result<f64> {
    match cfg.p_box {
        Some(b) => Ok(b),
        None => default_p_max(spec, grid, &Sampling::default()),
    }
}

/// Crossing of `h(o + r d) = level` along a ray from `o` with `h(o) <= level`;
/// returns the last point below and first point above the level.
fn ray_crossing<F: Fn(&[f64]) -> f64>(h: F, o: [f64; 2], d: [f64; 2], level: f64, reach: f64, dim: usize) -> Option<([f64; 2], [f64; 2])> {
    let at = |r: f64| [o[0] + r * d[0], o[1] + r * d[1]];
    let m = 64;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=m {
        let r = reach * k as f64 / m as f64;
        if h(&at(r)[..dim]) > level {
            hi = Some(r);
            break;
        }
        lo = r;
    }
    let mut hi = hi?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(&at(mid)[..dim]) > level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some((at(lo), at(hi)))
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> [f64; 2] {
    if dim == 1 {
        [if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0]
    } else {
        let th = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        [th.cos(), th.sin()]
    }
}

fn argmin_p(spec: &Hamiltonian, x: &[f64], b: f64) -> (f64, [f64; 2]) {
    let dim = x.len();
    if dim == 1 {
        let (q, v) = crate::hamiltonian::minimize_interval(-b, b, 64, |q| spec.eval(x, &[q]));
        (v, [q, 0.0])
    } else {
        min_over_p(spec, x, b, &Sampling {
            directions: 32,
            ..Sampling::default()
        })
    }
}

/// Running minimum of the normalized margin for one `eta`.
#[derive(Debug, Clone)]
struct Tally {
    psi: Option<f64>,
    premise: usize,
    witness: Option<Witness>,
}

impl Tally {
    fn empty() -> Self {
        Tally {
            psi: None,
            premise: 0,
            witness: None,
        }
    }

    fn merge(&mut self, other: Tally) {
        self.premise += other.premise;
        if let Some(m) = other.psi {
            if self.psi.is_none_or(|s| m < s) {
                self.psi = Some(m);
                self.witness = other.witness;
            }
        }
    }
}

struct RayProblem<'a> {
    spec: &'a Hamiltonian,
    sign: Sign,
    lower: [f64; 2],
    upper: [f64; 2],
    dim: usize,
    b: f64,
    etas: &'a [f64],
    exclude: Option<(&'a [[f64; 2]], f64)>,
}

impl RayProblem<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng, tallies: &mut [Tally]) {
        let dim = self.dim;
        let mut x = [0.0; 2];
        for a in 0..dim {
            x[a] = self.lower[a] + (self.upper[a] - self.lower[a]) * rng.gen::<f64>();
        }
        let boundary_mode = rng.gen::<bool>();
        // consume a fixed number of draws per sample so shards stay aligned
        let dirs = [random_direction(rng, dim), random_direction(rng, dim)];
        let mut uni = [[0.0; 2]; 1 + 8];
        for v in uni.iter_mut() {
            for a in 0..dim {
                v[a] = self.b * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        if let Some((k, eps)) = self.exclude {
            let far = k.iter().all(|y| {
                let d2: f64 = (0..dim).map(|a| (x[a] - y[a]).powi(2)).sum();
                d2.sqrt() >= eps
            });
            if !far {
                return;
            }
        }
        let xs = &x[..dim];
        let h = |p: &[f64]| self.spec.eval(xs, p);
        let reach = 2.0 * self.b;
        let (hmin, pstar) = if boundary_mode {
            argmin_p(self.spec, xs, self.b)
        } else {
            (f64::NAN, [0.0; 2])
        };
        let q = if boundary_mode {
            if hmin > 0.0 {
                return;
            }
            match (self.sign, ray_crossing(h, pstar, dirs[0], 0.0, reach, dim)) {
                (Sign::Plus, Some((inner, _))) => inner,
                (Sign::Minus, Some((_, outer))) => outer,
                (_, None) => return,
            }
        } else {
            uni[0]
        };
        let hq = h(&q[..dim]);
        let q_ok = match self.sign {
            Sign::Plus => hq <= 0.0,
            Sign::Minus => hq >= 0.0,
        };
        if !q_ok {
            return;
        }
        for (e, &eta) in self.etas.iter().enumerate() {
            let z = if boundary_mode {
                let found = match self.sign {
                    Sign::Plus => ray_crossing(h, q, dirs[1], eta, reach, dim).map(|(_, o)| o),
                    Sign::Minus => {
                        if hmin > -eta {
                            None
                        } else {
                            ray_crossing(h, pstar, dirs[1], -eta, reach, dim).map(|(i, _)| i)
                        }
                    }
                };
                match found {
                    Some(z) => z,
                    None => continue,
                }
            } else {
                uni[1 + e % 8]
            };
            let mut p = [0.0; 2];
            let mut pq = [0.0; 2];
            for a in 0..dim {
                p[a] = z[a] - q[a];
                pq[a] = p[a] + q[a];
            }
            let hz = h(&pq[..dim]);
            let premise = match self.sign {
                Sign::Plus => hz >= eta,
                Sign::Minus => hz <= -eta,
            };
            if !premise {
                continue;
            }
            let t = &mut tallies[e];
            t.premise += 1;
            for mu in mu_grid(self.sign) {
                let (lhs, rhs, margin) = ray_margin(self.spec, self.sign, xs, &p[..dim], &q[..dim], mu);
                if t.psi.is_none_or(|s| margin < s) {
                    t.psi = Some(margin);
                    t.witness = Some(Witness::Ray {
                        sign: self.sign,
                        level: self.spec.shift(),
                        eta,
                        x: xs.to_vec(),
                        p: p[..dim].to_vec(),
                        q: q[..dim].to_vec(),
                        mu,
                        lhs,
                        rhs,
                        margin,
                    });
                }
            }
        }
    }

    fn run(&self, samples: usize, seed: u64) -> Vec<Tally> {
        let shards = samples.div_ceil(SHARD);
        let per_shard: Vec<Vec<Tally>> = (0..shards)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                let count = SHARD.min(samples - s * SHARD);
                let mut tallies = vec![Tally::empty(); self.etas.len()];
                for _ in 0..count {
                    self.draw(&mut rng, &mut tallies);
                }
                tallies
            })
            .collect();
        let mut total = vec![Tally::empty(); self.etas.len()];
        for shard in per_shard {
            for (t, s) in total.iter_mut().zip(shard) {
                t.merge(s);
            }
        }
        total
    }
}

fn ray_problem<'a>(
    spec: &'a Hamiltonian,
    grid: &Grid,
    sign: Sign,
    b: f64,
    etas: &'a [f64],
    exclude: Option<(&'a [[f64; 2]], f64)>,
) -> RayProblem<'a> {
    RayProblem {
        spec,
        sign,
        lower: grid.lower(),
        upper: grid.upper(),
        dim: grid.dim(),
        b,
        etas,
        exclude,
    }
}

fn settle(rep: &mut AssumptionReport, tallies: Vec<Tally>, epsilon: Option<f64>, etas: &[f64], threshold: f64) {
    for (t, &eta) in tallies.into_iter().zip(etas) {
        rep.moduli.push(Modulus {
            eta,
            epsilon,
            psi_hat: t.psi,
            premise_samples: t.premise,
        });
        match t.psi {
            Some(m) if m <= threshold => {
                let worse = match rep.witness.as_ref() {
                    Some(w) if rep.verdict == Verdict::Fail => m < w.recorded(),
                    _ => true,
                };
                rep.verdict = Verdict::Fail;
                if worse {
                    rep.witness = t.witness;
                }
            }
            None if rep.verdict != Verdict::Fail => {
                rep.verdict = Verdict::Inconclusive;
                rep.notes.push(match epsilon {
                    Some(e) => format!("premise never satisfied for eta = {eta}, epsilon = {e}"),
                    None => format!("premise never satisfied for eta = {eta}"),
                });
            }
            _ => {}
        }
    }
}

/// Ray monotonicity of `H_a = H - a` on the superlevel (`Plus`) or
/// sublevel (`Minus`) side, sampled over `(x, p, q, mu)`.
pub fn check_ray_monotonicity(
    spec: &Hamiltonian,
    grid: &Grid,
    a: f64,
    sign: Sign,
    cfg: &AuditConfig,
) -> Result<AssumptionReport> {
    let b = box_radius(spec, grid, cfg)?;
    let shifted = spec.shifted(a);
    let mut rep = AssumptionReport::new(format!("ray-monotonicity-{}", sign.suffix()));
    rep.sampled = true;
    rep.samples = cfg.samples;
    rep.box_radius = Some(b);
    rep.seed = Some(cfg.seed);
    let tallies = ray_problem(&shifted, grid, sign, b, &cfg.etas, None).run(cfg.samples, cfg.seed);
    settle(&mut rep, tallies, None, &cfg.etas, cfg.threshold);
    Ok(rep)
}

/// Ray monotonicity away from an exceptional node set `k`, where
/// `min_p H_a` must vanish.
pub fn check_localized_ray_monotonicity(
    spec: &Hamiltonian,
    grid: &Grid,
    a: f64,
    k: &[usize],
    sign: Sign,
    cfg: &AuditConfig,
) -> Result<AssumptionReport> {
    let b = box_radius(spec, grid, cfg)?;
    let shifted = spec.shifted(a);
    let dim = grid.dim();
    let mut rep = AssumptionReport::new(format!("localized-ray-monotonicity-{}", sign.suffix()));
    rep.sampled = true;
    rep.samples = cfg.samples;
    rep.box_radius = Some(b);
    rep.seed = Some(cfg.seed);
    if k.is_empty() {
        rep.notes.push("exceptional set is empty: the zero-minimum condition holds vacuously".into());
    }
    for &node in k {
        let x = grid.coords(node);
        let (m, p) = min_over_p(&shifted, &x[..dim], b, &Sampling::default());
        if m.abs() > cfg.min_tol {
            rep.verdict = Verdict::Fail;
            rep.witness = Some(Witness::Value {
                what: "min_p H_a on the exceptional set".into(),
                x: x[..dim].to_vec(),
                p: Some(p[..dim].to_vec()),
                value: m,
            });
            return Ok(rep);
        }
    }
    let coords: Vec<[f64; 2]> = k.iter().map(|&n| grid.coords(n)).collect();
    for &eps in &cfg.epsilons {
        let tallies = ray_problem(&shifted, grid, sign, b, &cfg.etas, Some((&coords, eps))).run(cfg.samples, cfg.seed);
        settle(&mut rep, tallies, Some(eps), &cfg.etas, cfg.threshold);
    }
    Ok(rep)
}

/// Midpoint convexity of `p -> H(x, p)`.
pub fn check_convexity(spec: &Hamiltonian, grid: &Grid, cfg: &AuditConfig) -> Result<AssumptionReport> {
    let b = box_radius(spec, grid, cfg)?;
    let dim = grid.dim();
    let (lower, upper) = (grid.lower(), grid.upper());
    let mut rep = AssumptionReport::new("convexity");
    rep.sampled = true;
    rep.samples = cfg.samples;
    rep.box_radius = Some(b);
    rep.seed = Some(cfg.seed);
    let shards = cfg.samples.div_ceil(SHARD);
    let found: Vec<Option<(f64, Witness)>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            let mut worst: Option<(f64, Witness)> = None;
            for _ in 0..SHARD.min(cfg.samples - s * SHARD) {
                let mut x = [0.0; 2];
                let mut p = [0.0; 2];
                let mut q = [0.0; 2];
                for a in 0..dim {
                    x[a] = lower[a] + (upper[a] - lower[a]) * rng.gen::<f64>();
                    p[a] = b * (2.0 * rng.gen::<f64>() - 1.0);
                    q[a] = b * (2.0 * rng.gen::<f64>() - 1.0);
                }
                let w = Witness::Midpoint {
                    x: x[..dim].to_vec(),
                    p: p[..dim].to_vec(),
                    q: q[..dim].to_vec(),
                    lhs: 0.0,
                    rhs: 0.0,
                };
                let excess = w.replay(spec);
                if excess > 1e-10 && worst.as_ref().is_none_or(|(e, _)| excess > *e) {
                    let m: Vec<f64> = (0..dim).map(|a| 0.5 * (p[a] + q[a])).collect();
                    let lhs = spec.eval(&x[..dim], &m);
                    let rhs = 0.5 * (spec.eval(&x[..dim], &p[..dim]) + spec.eval(&x[..dim], &q[..dim]));
                    worst = Some((
                        excess,
                        Witness::Midpoint {
                            x: x[..dim].to_vec(),
                            p: p[..dim].to_vec(),
                            q: q[..dim].to_vec(),
                            lhs,
                            rhs,
                        },
                    ));
                }
            }
            worst
        })
        .collect();
    let worst = found
        .into_iter()
        .flatten()
        .fold(None::<(f64, Witness)>, |acc, (e, w)| match acc {
            Some((ae, aw)) if ae >= e => Some((ae, aw)),
            _ => Some((e, w)),
        });
    if let Some((_, w)) = worst {
        rep.verdict = Verdict::Fail;
        rep.witness = Some(w);
    }
    Ok(rep)
}

/// `F(x, p) >= F(x, 0) = 0` for the kinetic part of a catalog Hamiltonian.
pub fn check_kinetic_split(spec: &Hamiltonian, grid: &Grid, cfg: &AuditConfig) -> Result<AssumptionReport> {
    let mut rep = AssumptionReport::new("kinetic-minimum-at-zero");
    let Some((kinetic, _)) = spec.split() else {
        rep.verdict = Verdict::Skipped;
        rep.notes.push("no kinetic/potential split declared".into());
        return Ok(rep);
    };
    let b = box_radius(spec, grid, cfg)?;
    let dim = grid.dim();
    rep.sampled = true;
    rep.samples = cfg.samples;
    rep.box_radius = Some(b);
    rep.seed = Some(cfg.seed);
    let zero = [0.0; 2];
    let f0 = kinetic.eval(&zero[..dim]);
    if f0 != 0.0 {
        rep.verdict = Verdict::Fail;
        rep.witness = Some(Witness::Value {
            what: "F(x, 0)".into(),
            x: grid.coords(0)[..dim].to_vec(),
            p: Some(zero[..dim].to_vec()),
            value: f0,
        });
        return Ok(rep);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: Option<(f64, [f64; 2])> = None;
    for _ in 0..cfg.samples {
        let mut p = [0.0; 2];
        for v in p.iter_mut().take(dim) {
            *v = b * (2.0 * rng.gen::<f64>() - 1.0);
        }
        let v = kinetic.eval(&p[..dim]);
        if v < 0.0 && worst.is_none_or(|(w, _)| v < w) {
            worst = Some((v, p));
        }
    }
    if let Some((v, p)) = worst {
        rep.verdict = Verdict::Fail;
        rep.witness = Some(Witness::Value {
            what: "F(x, p)".into(),
            x: grid.coords(0)[..dim].to_vec(),
            p: Some(p[..dim].to_vec()),
            value: v,
        });
    }
    Ok(rep)
}

/// `f >= 0` on the nodes with a nonempty zero set; reports the discrete zero set.
pub fn check_potential(spec: &Hamiltonian, grid: &Grid) -> (AssumptionReport, Vec<usize>) {
    let mut rep = AssumptionReport::new("potential-zero-set");
    let Some((_, f)) = spec.split() else {
        rep.verdict = Verdict::Skipped;
        rep.notes.push("no kinetic/potential split declared".into());
        return (rep, Vec::new());
    };
    let dim = grid.dim();
    let vals: Vec<f64> = (0..grid.len()).map(|n| f(&grid.coords(n)[..dim])).collect();
    let (imin, fmin) = vals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let zero_set: Vec<usize> = (0..grid.len()).filter(|&n| vals[n].abs() <= 1e-12).collect();
    if fmin < 0.0 {
        rep.verdict = Verdict::Fail;
        rep.witness = Some(Witness::Value {
            what: "f(x)".into(),
            x: grid.coords(imin)[..dim].to_vec(),
            p: None,
            value: fmin,
        });
    } else if zero_set.is_empty() {
        rep.verdict = Verdict::Fail;
        rep.witness = Some(Witness::Value {
            what: "min f over the nodes (zero set empty)".into(),
            x: grid.coords(imin)[..dim].to_vec(),
            p: None,
            value: fmin,
        });
    }
    rep.notes.push(format!("discrete zero set has {} nodes", zero_set.len()));
    (rep, zero_set)
}

/// `g >= 0` on the boundary nodes.
pub fn check_boundary_data(grid: &Grid, g: &[f64]) -> AssumptionReport {
    let mut rep = AssumptionReport::new("boundary-data-nonnegative");
    let bad: Vec<(usize, f64)> = grid
        .boundary_nodes()
        .iter()
        .zip(g)
        .filter(|(_, v)| **v < 0.0)
        .map(|(b, v)| (b.node, *v))
        .collect();
    if !bad.is_empty() {
        rep.verdict = Verdict::Fail;
        rep.witness = Some(Witness::Nodes {
            nodes: bad.iter().map(|b| b.0).collect(),
            values: bad.iter().map(|b| b.1).collect(),
        });
    }
    rep
}

/// `u0 <= g` on the boundary nodes. The witness lists `u0 - g` at the
/// violating nodes.
pub fn check_compatibility(grid: &Grid, u0: &[f64], g: &[f64]) -> AssumptionReport {
    let mut rep = AssumptionReport::new("compatibility");
    let bad: Vec<(usize, f64)> = grid
        .boundary_nodes()
        .iter()
        .zip(g)
        .filter(|(b, gv)| u0[b.node] > **gv)
        .map(|(b, gv)| (b.node, u0[b.node] - gv))
        .collect();
    if !bad.is_empty() {
        rep.verdict = Verdict::Fail;
        rep.notes.push("initial data exceed the boundary data; use the bracketing runs".into());
        rep.witness = Some(Witness::Nodes {
            nodes: bad.iter().map(|b| b.0).collect(),
            values: bad.iter().map(|b| b.1).collect(),
        });
    }
    rep
}
