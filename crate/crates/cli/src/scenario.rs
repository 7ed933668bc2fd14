//! Scenario files: TOML with the sections `grid`, `hamiltonian`, `bc`,
//! `initial`, `run` and `check`. See the README for the full grammar.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use hjlab_core::assumptions::AuditConfig;
use hjlab_core::hamiltonian::PotentialFn;
use hjlab_core::ergodic::ErgodicConfig;
use hjlab_core::{
    BoundaryCondition, DirichletData, Grid, Hamiltonian, ObliqueField, Scheme, SolverConfig,
};
use serde::{Deserialize, Serialize};

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub grid: GridSection,
    pub hamiltonian: HamiltonianSection,
    pub bc: BcSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub check: CheckSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// One `[lower, upper]` pair per axis.
    pub extents: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSection {
    /// `|p| - f(x)`
    Eikonal {
        #[serde(default = "zero_expr")]
        potential: String,
    },
    /// `|p|^2 - f(x)`
    Quadratic {
        #[serde(default = "zero_expr")]
        potential: String,
    },
    /// `|p| + a0`
    ShiftedEikonal { a0: f64 },
    /// `(|p|^2 - 1)^2 - f(x)`
    DoubleWell {
        #[serde(default = "zero_expr")]
        potential: String,
    },
    /// Any `H` over `x, p` (1D) or `x, y, px, py` (2D).
    Custom { expression: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BcSection {
    Neumann {
        #[serde(default = "zero_expr")]
        g: String,
        /// Components of the oblique direction; the outward normal if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<Vec<String>>,
    },
    StateConstraint,
    Dirichlet {
        g: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub u0: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    pub cfl: f64,
    pub probe_every: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_sc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Levels of the monotonicity diagnostics.
    pub etas: Vec<f64>,
    /// Discount factors, strictly decreasing.
    pub deltas: Vec<f64>,
    /// Regularization parameters of the bracketing runs, strictly increasing.
    pub ks: Vec<f64>,
    pub seed: u64,
    pub ergodic_tol: f64,
    pub profile_tol: f64,
    pub aubry_tol: f64,
    pub dead_band: f64,
    pub level_slack: f64,
    /// Sup-norm change of `u + ct` between the last two probes regarded as settled.
    pub settle_tol: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_final: 10.0,
            cfl: 0.4,
            probe_every: 0.5,
            p_max: None,
            lambda_sc: None,
            alpha: None,
            etas: vec![0.05],
            deltas: ErgodicConfig::default().deltas,
            ks: vec![4.0, 16.0, 64.0],
            seed: 0,
            ergodic_tol: 2e-2,
            profile_tol: 2e-2,
            aubry_tol: 1e-3,
            dead_band: 1e-2,
            level_slack: 1e-9,
            settle_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exceptional {
    /// Nodes where the potential vanishes.
    PotentialZeros,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// The shift `a` in `H_a = H - a`.
    pub level: f64,
    pub samples: usize,
    pub etas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub exceptional: Exceptional,
    /// Audits to run; all applicable ones when empty.
    pub assumptions: Vec<String>,
}

impl Default for CheckSection {
    fn default() -> Self {
        let a = AuditConfig::default();
        CheckSection {
            level: 0.0,
            samples: a.samples,
            etas: a.etas,
            epsilons: a.epsilons,
            exceptional: Exceptional::PotentialZeros,
            assumptions: Vec::new(),
        }
    }
}

pub const ASSUMPTIONS: &[&str] = &[
    "coercivity",
    "ray-monotonicity-plus",
    "ray-monotonicity-minus",
    "localized-ray-monotonicity-plus",
    "localized-ray-monotonicity-minus",
    "convexity",
    "kinetic-minimum-at-zero",
    "potential-zero-set",
    "boundary-data-nonnegative",
    "compatibility",
];

const DIRICHLET_ONLY: &[&str] = &["boundary-data-nonnegative", "compatibility"];

/// A scenario with its expressions evaluated on the grid.
pub struct Built {
    pub grid: Grid,
    pub spec: Hamiltonian,
    pub bc: BoundaryCondition,
    pub u0: Vec<f64>,
    /// Boundary data in slot order (dirichlet values, or the oblique datum).
    pub g: Vec<f64>,
    pub solver: SolverConfig,
}

impl Built {
    pub fn scheme(&self) -> Result<Scheme> {
        Ok(Scheme::new(&self.spec, self.bc.clone(), &self.grid, &self.solver)?)
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self.bc, BoundaryCondition::Dirichlet(_))
    }
}

fn space_vars(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

fn parse_field(field: &str, src: &str, vars: &[&str]) -> Result<Expr> {
    Expr::parse(src, vars).map_err(|e| anyhow!("{field}: {e} in \"{src}\""))
}

/// Evaluates `e` at every point of `points`; errors name the field and point.
fn sample(field: &str, e: &Expr, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            let v = e.eval(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(anyhow!("{field}: \"{}\" is not finite at {x:?}", e.source()))
            }
        })
        .collect()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario {}", path.display()))?;
        Scenario::parse(&text).with_context(|| format!("invalid scenario {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        s.validate()?;
        Ok(s)
    }

    /// The normalized form: every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn dim(&self) -> usize {
        self.grid.extents.len()
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(1..=2).contains(&dim) {
            bail!("grid.extents: expected one or two axes, got {dim}");
        }
        if self.grid.counts.len() != dim {
            bail!("grid.counts: {} entries for {dim} axes", self.grid.counts.len());
        }
        let r = &self.run;
        if !(r.cfl > 0.0 && r.cfl <= 1.0) {
            bail!("run.cfl: CFL factor must be in (0,1]");
        }
        if !(r.t_final >= 0.0) {
            bail!("run.t_final: must be nonnegative");
        }
        if !(r.probe_every > 0.0) {
            bail!("run.probe_every: must be positive");
        }
        if r.etas.iter().any(|e| !(*e >= 0.0)) {
            bail!("run.etas: levels must be nonnegative");
        }
        if r.ks.windows(2).any(|w| !(w[1] > w[0])) || r.ks.iter().any(|k| !(*k > 0.0)) {
            bail!("run.ks: must be positive and strictly increasing");
        }
        for id in &self.check.assumptions {
            if !ASSUMPTIONS.contains(&id.as_str()) {
                bail!("check.assumptions: unknown assumption '{id}' (known: {})", ASSUMPTIONS.join(", "));
            }
            if DIRICHLET_ONLY.contains(&id.as_str()) && !matches!(self.bc, BcSection::Dirichlet { .. }) {
                bail!("check.assumptions: '{id}' applies to dirichlet scenarios only");
            }
        }
        if let BcSection::Neumann { gamma: Some(g), .. } = &self.bc {
            if g.len() != dim {
                bail!("bc.gamma: {} components for {dim} axes", g.len());
            }
        }
        // expressions must at least parse; finiteness is checked on the grid
        self.build().map(|_| ())
    }

    /// The audits requested, or all that apply to the boundary condition.
    pub fn assumptions(&self) -> Vec<String> {
        if !self.check.assumptions.is_empty() {
            return self.check.assumptions.clone();
        }
        let dirichlet = matches!(self.bc, BcSection::Dirichlet { .. });
        ASSUMPTIONS
            .iter()
            .filter(|id| dirichlet || !DIRICHLET_ONLY.contains(id))
            .map(|s| s.to_string())
            .collect()
    }

    /// Why the limit-profile formulas do not apply, if they do not.
    pub fn profile_unsupported(&self) -> Option<String> {
        if self.dim() != 1 {
            return Some("representation formulas are implemented on intervals only".into());
        }
        match &self.bc {
            BcSection::Neumann { g, gamma } if gamma.is_some() || g.trim() != "0" => Some(
                "representation formulas are implemented for homogeneous normal Neumann data only".into(),
            ),
            _ => None,
        }
    }

    pub fn ergodic_config(&self) -> ErgodicConfig {
        ErgodicConfig {
            deltas: self.run.deltas.clone(),
            tolerance: self.run.ergodic_tol,
            ..ErgodicConfig::default()
        }
    }

    pub fn audit_config(&self, seed: u64) -> AuditConfig {
        AuditConfig {
            samples: self.check.samples,
            seed,
            etas: self.check.etas.clone(),
            epsilons: self.check.epsilons.clone(),
            ..AuditConfig::default()
        }
    }

    pub fn build(&self) -> Result<Built> {
        let dim = self.dim();
        let e = &self.grid.extents;
        let c = &self.grid.counts;
        let grid = if dim == 1 {
            Grid::interval(e[0][0], e[0][1], c[0])
        } else {
            Grid::rectangle([(e[0][0], e[0][1]), (e[1][0], e[1][1])], [c[0], c[1]])
        }
        .map_err(|err| anyhow!("grid: {err}"))?;
        let vars = space_vars(dim);
        let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|n| grid.coords(n)[..dim].to_vec()).collect();
        let boundary: Vec<Vec<f64>> = grid
            .boundary_nodes()
            .iter()
            .map(|b| grid.coords(b.node)[..dim].to_vec())
            .collect();

        let potential = |src: &str| -> Result<PotentialFn> {
            let f = parse_field("hamiltonian.potential", src, vars)?;
            sample("hamiltonian.potential", &f, &nodes)?;
            Ok(Arc::new(move |x: &[f64]| f.eval(x)))
        };
        let spec = match &self.hamiltonian {
            HamiltonianSection::Eikonal { potential: p } => {
                Hamiltonian::catalog("eikonal", dim, potential(p)?, 0.0)?
            }
            HamiltonianSection::Quadratic { potential: p } => {
                Hamiltonian::catalog("quadratic", dim, potential(p)?, 0.0)?
            }
            HamiltonianSection::DoubleWell { potential: p } => {
                Hamiltonian::catalog("double-well", dim, potential(p)?, 0.0)?
            }
            HamiltonianSection::ShiftedEikonal { a0 } => Hamiltonian::shifted_eikonal(dim, *a0),
            HamiltonianSection::Custom { expression } => {
                let names: &[&str] = if dim == 1 { &["x", "p"] } else { &["x", "y", "px", "py"] };
                let h = parse_field("hamiltonian.expression", expression, names)?;
                let probe: Vec<f64> = vec![0.0; 2 * dim];
                let mut at = nodes[0].clone();
                at.extend_from_slice(&probe[dim..]);
                if !h.eval(&at).is_finite() {
                    bail!("hamiltonian.expression: not finite at x = {:?}, p = 0", nodes[0]);
                }
                Hamiltonian::custom("custom", dim, move |x, p| {
                    let mut v = [0.0; 4];
                    v[..dim].copy_from_slice(x);
                    v[dim..2 * dim].copy_from_slice(p);
                    h.eval(&v[..2 * dim])
                })
            }
        };

        let u0_expr = parse_field("initial.u0", &self.initial.u0, vars)?;
        let u0 = sample("initial.u0", &u0_expr, &nodes)?;

        let (bc, g) = match &self.bc {
            BcSection::StateConstraint => (BoundaryCondition::StateConstraint, Vec::new()),
            BcSection::Dirichlet { g } => {
                let e = parse_field("bc.g", g, vars)?;
                let g = sample("bc.g", &e, &boundary)?;
                (BoundaryCondition::Dirichlet(DirichletData::Fixed(g.clone())), g)
            }
            BcSection::Neumann { g, gamma } => {
                let e = parse_field("bc.g", g, vars)?;
                let g = sample("bc.g", &e, &boundary)?;
                let field = match gamma {
                    None => ObliqueField::normal(&grid, g.clone()),
                    Some(parts) => {
                        let mut comps = Vec::with_capacity(dim);
                        for (i, src) in parts.iter().enumerate() {
                            let name = format!("bc.gamma[{i}]");
                            let e = parse_field(&name, src, vars)?;
                            comps.push(sample(&name, &e, &boundary)?);
                        }
                        let gamma = (0..boundary.len())
                            .map(|s| [comps[0][s], if dim == 2 { comps[1][s] } else { 0.0 }])
                            .collect();
                        ObliqueField::new(gamma, g.clone())
                    }
                };
                (BoundaryCondition::Neumann(field), g)
            }
        };

        let solver = SolverConfig {
            cfl: self.run.cfl,
            lambda_sc: self.run.lambda_sc,
            probe_every: self.run.probe_every,
            p_max: self.run.p_max,
            alpha: self.run.alpha,
            ..SolverConfig::default()
        };
        Ok(Built {
            grid,
            spec,
            bc,
            u0,
            g,
            solver,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NR: &str = r#"
name = "nr"
[grid]
extents = [[0.0, 1.0]]
counts = [41]
[hamiltonian]
kind = "eikonal"
potential = "abs(x - 0.5)"
[bc]
kind = "neumann"
[initial]
u0 = "0.3*cos(2*pi*x)"
"#;

    #[test]
    fn defaults_and_round_trip() {
        let s = Scenario::parse(NR).unwrap();
        assert_eq!(s.run, RunSection::default());
        let again = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.to_toml(), again.to_toml());
        let b = s.build().unwrap();
        assert_eq!(b.grid.len(), 41);
        assert!((b.u0[0] - 0.3).abs() < 1e-15);
        assert_eq!(b.g, vec![0.0, 0.0]);
    }

    #[test]
    fn field_diagnostics() {
        let bad = NR.replace("abs(x - 0.5)", "abs(z)");
        let err = format!("{:#}", Scenario::parse(&bad).unwrap_err());
        assert!(err.contains("hamiltonian.potential"), "{err}");
        let bad = NR.replace("0.3*cos(2*pi*x)", "1/(x - x)");
        let err = format!("{:#}", Scenario::parse(&bad).unwrap_err());
        assert!(err.contains("initial.u0") && err.contains("not finite"), "{err}");
        let bad = format!("{NR}[run]\ncfll = 0.3\n");
        let err = format!("{:#}", Scenario::parse(&bad).unwrap_err());
        assert!(err.contains("cfll"), "{err}");
        let bad = format!("{NR}[check]\nassumptions = [\"compatibility\"]\n");
        let err = format!("{:#}", Scenario::parse(&bad).unwrap_err());
        assert!(err.contains("dirichlet scenarios only"), "{err}");
    }

    #[test]
    fn custom_and_two_dimensional() {
        let text = r#"
[grid]
extents = [[0.0, 1.0], [0.0, 2.0]]
counts = [5, 9]
[hamiltonian]
kind = "custom"
expression = "px^2 + py^2 - x*y"
[bc]
kind = "dirichlet"
g = "x + y"
[initial]
u0 = "0"
"#;
        let s = Scenario::parse(text).unwrap();
        let b = s.build().unwrap();
        assert_eq!(b.spec.eval(&[1.0, 2.0], &[1.0, 1.0]), 0.0);
        assert_eq!(b.g.len(), b.grid.boundary_nodes().len());
        assert!(s.assumptions().contains(&"compatibility".to_string()));
        assert_eq!(Scenario::parse(&s.to_toml()).unwrap(), s);
    }
}
