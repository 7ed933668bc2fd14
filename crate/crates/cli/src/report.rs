//! Collects the artifacts of an output directory into `report.json` and a
//! plain-text table.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use hjlab_core::assumptions::{AssumptionReport, Verdict};
use serde::{Deserialize, Serialize};

use crate::artifacts::OutDir;
use crate::commands::{DiagnoseSummary, ErgodicSummary, ProfileSummary, RunSummary};
use crate::scenario::{Scenario, ASSUMPTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotRun,
    NotApplicable,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotRun => "not run",
            Status::NotApplicable => "not applicable",
        }
    }

    fn of(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub entries: Vec<Entry>,
}

fn entry(name: &str, status: Status, detail: impl Into<String>) -> Entry {
    Entry {
        name: name.into(),
        status,
        detail: detail.into(),
    }
}

/// JSON artifact if present; a malformed file is an error, a missing one is not.
fn optional<T: serde::de::DeserializeOwned>(out: &OutDir, name: &str) -> Result<Option<T>> {
    if out.exists(name) {
        Ok(Some(out.read_json(name, "")?))
    } else {
        Ok(None)
    }
}

#[derive(Deserialize)]
struct StationaryEntry {
    a: f64,
    outcome: String,
}

pub fn build(out: &OutDir) -> Result<Report> {
    if !out.exists("scenario.toml") {
        bail!("missing {} (nothing to report; run another command first)", out.path("scenario.toml").display());
    }
    let text = std::fs::read_to_string(out.path("scenario.toml"))?;
    let scenario = Scenario::parse(&text)?;
    let dirichlet = matches!(scenario.bc, crate::scenario::BcSection::Dirichlet { .. });
    let run: Option<RunSummary> = optional(out, "run.json")?;
    let erg: Option<ErgodicSummary> = optional(out, "ergodic.json")?;
    let diag: Option<DiagnoseSummary> = optional(out, "diagnose.json")?;
    let prof: Option<ProfileSummary> = optional(out, "profile.json")?;
    let stat: Option<Vec<StationaryEntry>> = optional(out, "stationary.json")?;
    let tol = &scenario.run;
    let mut entries = Vec::new();

    entries.push(match &erg {
        None => entry("ergodic-constant", Status::NotRun, "no ergodic.json"),
        Some(e) => {
            let agree = e.delta_c.is_none_or(|d| d <= e.tolerance);
            let detail = match e.delta_c {
                Some(d) => format!("c = {:.6e}, |c_discount - c_slope| = {d:.3e} (tol {:.1e})", e.c, e.tolerance),
                None => format!("c = {:.6e}, no slope cross-check", e.c),
            };
            entry("ergodic-constant", Status::of(e.converged && agree), detail)
        }
    });

    entries.push(if !dirichlet {
        entry("stationary-solvability", Status::NotApplicable, "dirichlet scenarios only")
    } else {
        match &stat {
            None => entry("stationary-solvability", Status::NotRun, "no stationary.json"),
            Some(list) => {
                let outcome = |k: usize| list.get(k).map(|s| s.outcome.as_str()).unwrap_or("?");
                let ok = outcome(1) == "solved" && outcome(2) == "infeasible";
                let detail = list
                    .iter()
                    .map(|s| format!("a = {:.4}: {}", s.a, s.outcome))
                    .collect::<Vec<_>>()
                    .join(", ");
                entry("stationary-solvability", Status::of(ok), detail)
            }
        }
    });

    match &diag {
        None => {
            for name in ["large-time-convergence", "monotonicity-diagnostics", "bounded-drift"] {
                entries.push(entry(name, Status::NotRun, "no diagnose.json"));
            }
        }
        Some(d) => {
            entries.push(entry(
                "large-time-convergence",
                Status::of(d.final_change <= tol.settle_tol),
                format!("last snapshot change {:.3e} (tol {:.1e})", d.final_change, tol.settle_tol),
            ));
            let ok = d.etas.iter().all(|e| {
                // too few probes with mu+ < 1 to fit a rate is fast settling, not a failure
                e.lambda.is_none_or(|l| l > 0.0) && e.delta_last <= e.delta_first + 1e-12
            });
            let detail = d
                .etas
                .iter()
                .map(|e| match (e.lambda, &e.fit_error) {
                    (_, Some(err)) => format!("eta {}: delta {:.3e} -> {:.3e}, no rate ({err})", e.eta, e.delta_first, e.delta_last),
                    (Some(l), None) => format!("eta {}: rate {l:.3e}, delta {:.3e} -> {:.3e}", e.eta, e.delta_first, e.delta_last),
                    (None, None) => format!("eta {}: mu+ = 1 throughout", e.eta),
                })
                .collect::<Vec<_>>()
                .join("; ");
            entries.push(entry("monotonicity-diagnostics", Status::of(ok), detail));
            entries.push(entry(
                "bounded-drift",
                Status::of(d.drift_growth <= tol.profile_tol),
                format!("growth of |u + {:.4e} t| over the second half {:.3e}", d.drift, d.drift_growth),
            ));
        }
    }

    entries.push(match (&prof, scenario.profile_unsupported()) {
        (_, Some(why)) => entry("asymptotic-profile", Status::NotApplicable, why),
        (None, None) => entry("asymptotic-profile", Status::NotRun, "no profile.json"),
        (Some(p), None) => entry(
            "asymptotic-profile",
            Status::of(p.pass),
            format!("{}: distance {:.3e} (tol {:.1e})", p.formula, p.distance, p.tolerance),
        ),
    });

    entries.push(if !dirichlet {
        entry("boundary-bound", Status::NotApplicable, "dirichlet scenarios only")
    } else {
        match run.as_ref().and_then(|r| r.max_boundary_excess) {
            None => entry("boundary-bound", Status::NotRun, "no run.json"),
            Some(x) => entry("boundary-bound", Status::of(x <= 1e-12), format!("max u - g on the boundary {x:.3e}")),
        }
    });

    let mut audits: Vec<AssumptionReport> = Vec::new();
    for id in ASSUMPTIONS {
        if let Some(r) = optional(out, &format!("check_{id}.json"))? {
            audits.push(r);
        }
    }
    entries.push(if audits.is_empty() {
        entry("assumptions", Status::NotRun, "no check_*.json")
    } else {
        let failed: Vec<&str> = audits.iter().filter(|r| r.verdict == Verdict::Fail).map(|r| r.id.as_str()).collect();
        let detail = if failed.is_empty() {
            format!("{} audited, none failed", audits.len())
        } else {
            format!("failed: {}", failed.join(", "))
        };
        entry("assumptions", Status::of(failed.is_empty()), detail)
    });

    Ok(Report {
        scenario: scenario.name,
        entries,
    })
}

pub fn render(report: &Report) -> String {
    let width = report.entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let mut text = format!("scenario: {}\n", report.scenario);
    for e in &report.entries {
        writeln!(text, "{:<width$}  {:<14}  {}", e.name, e.status.label(), e.detail).expect("string write");
    }
    text
}

pub fn write(out: &OutDir) -> Result<Report> {
    let report = build(out)?;
    out.write_json("report.json", &report)?;
    out.write_text("report.txt", &render(&report))?;
    Ok(report)
}
