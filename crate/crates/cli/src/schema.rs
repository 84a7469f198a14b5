//! Versioned JSON schemas for instances, solutions, and results.
//!
//! Complex numbers are `[re, im]` arrays throughout. Instance files carry a
//! `version` field and a self-describing `kind`; unknown fields are rejected
//! so schema drift fails loudly.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use twrbeam_core::homotopy::SolverConfig;
use twrbeam_core::physical::PhysicalProblem;
use twrbeam_core::reduction::ReducedProblem;
use twrbeam_core::CMat;

pub const SCHEMA_VERSION: u32 = 1;

/// Solver overrides carried by an instance file. CLI flags take precedence.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_newton: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.corr_tol {
            cfg.corr_tol = v;
        }
        if let Some(v) = self.lambda_tol {
            cfg.lambda_tol = v;
        }
        if let Some(v) = self.max_newton {
            cfg.max_newton = v;
        }
    }
}

/// Physical instance fields (`"kind": "physical"`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhysicalFields {
    pub antennas: usize,
    pub h1: Vec<[f64; 2]>,
    pub h2: Vec<[f64; 2]>,
    pub p1: f64,
    pub p2: f64,
    pub sigma_r2: f64,
    pub sigma1_2: f64,
    pub sigma2_2: f64,
    /// SINR targets, linear scale.
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Reduced instance fields (`"kind": "reduced"`): the seven coefficients plus
/// an optional watts-per-unit scale.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReducedFields {
    pub q1: f64,
    pub q2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceBody {
    Physical(PhysicalFields),
    Reduced(ReducedFields),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub version: u32,
    pub body: InstanceBody,
    pub solver: Option<SolverOverrides>,
}

/// Pops `version`, `kind`, and (optionally) `solver` out of a JSON object,
/// returning them with the remaining fields for the strict per-kind parse.
fn split_envelope(text: &str) -> Result<(u32, String, Option<SolverOverrides>, Value)> {
    let value: Value = serde_json::from_str(text).context("invalid JSON")?;
    let Value::Object(mut map) = value else {
        bail!("expected a JSON object at the top level");
    };
    let version = map
        .remove("version")
        .context("missing required field 'version'")?;
    let version: u32 = serde_json::from_value(version).context("field 'version' must be an integer")?;
    let kind = map.remove("kind").context("missing required field 'kind'")?;
    let kind: String = serde_json::from_value(kind).context("field 'kind' must be a string")?;
    let solver = match map.remove("solver") {
        Some(v) => Some(serde_json::from_value(v).context("invalid 'solver' block")?),
        None => None,
    };
    Ok((version, kind, solver, Value::Object(map)))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let (version, kind, solver, rest) =
            split_envelope(text).context("failed to parse instance JSON")?;
        if version != SCHEMA_VERSION {
            bail!("unsupported instance schema version {version} (expected {SCHEMA_VERSION})");
        }
        let body = match kind.as_str() {
            "physical" => InstanceBody::Physical(
                serde_json::from_value(rest).context("invalid physical instance")?,
            ),
            "reduced" => InstanceBody::Reduced(
                serde_json::from_value(rest).context("invalid reduced instance")?,
            ),
            other => bail!("unknown instance kind '{other}' (expected 'physical' or 'reduced')"),
        };
        let inst = InstanceFile { version, body, solver };
        inst.validate()?;
        Ok(inst)
    }

    #[allow(dead_code)] // exercised by the round-trip tests
    pub fn to_json(&self) -> Result<String> {
        let mut map = match &self.body {
            InstanceBody::Physical(f) => {
                let Value::Object(map) = serde_json::to_value(f)? else { unreachable!() };
                let mut out = serde_json::Map::new();
                out.insert("version".into(), self.version.into());
                out.insert("kind".into(), "physical".into());
                out.extend(map);
                out
            }
            InstanceBody::Reduced(f) => {
                let Value::Object(map) = serde_json::to_value(f)? else { unreachable!() };
                let mut out = serde_json::Map::new();
                out.insert("version".into(), self.version.into());
                out.insert("kind".into(), "reduced".into());
                out.extend(map);
                out
            }
        };
        if let Some(solver) = &self.solver {
            map.insert("solver".into(), serde_json::to_value(solver)?);
        }
        Ok(serde_json::to_string_pretty(&Value::Object(map))?)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.body {
            InstanceBody::Physical(f) => {
                if f.antennas < 2 {
                    bail!("antennas must be at least 2, got {}", f.antennas);
                }
                if f.h1.len() != f.antennas || f.h2.len() != f.antennas {
                    bail!(
                        "channel length mismatch: antennas = {}, |h1| = {}, |h2| = {}",
                        f.antennas,
                        f.h1.len(),
                        f.h2.len()
                    );
                }
                for (name, v) in [
                    ("p1", f.p1),
                    ("p2", f.p2),
                    ("sigma_r2", f.sigma_r2),
                    ("sigma1_2", f.sigma1_2),
                    ("sigma2_2", f.sigma2_2),
                    ("gamma1", f.gamma1),
                    ("gamma2", f.gamma2),
                ] {
                    if !(v > 0.0 && v.is_finite()) {
                        bail!("{name} must be finite and positive, got {v}");
                    }
                }
                let finite = |h: &[[f64; 2]]| h.iter().all(|z| z[0].is_finite() && z[1].is_finite());
                if !finite(&f.h1) || !finite(&f.h2) {
                    bail!("channel entries must be finite");
                }
                if f.h1.iter().all(|z| z[0] == 0.0 && z[1] == 0.0)
                    || f.h2.iter().all(|z| z[0] == 0.0 && z[1] == 0.0)
                {
                    bail!("channel vectors must be nonzero");
                }
            }
            InstanceBody::Reduced(f) => {
                for (name, v) in [("q1", f.q1), ("q2", f.q2), ("d1", f.d1), ("d2", f.d2)] {
                    if !(v >= 0.0 && v.is_finite()) {
                        bail!("{name} must be finite and nonnegative, got {v}");
                    }
                }
                for (name, v) in [("c1", f.c1), ("c2", f.c2), ("r", f.r)] {
                    if !(v > 0.0 && v.is_finite()) {
                        bail!("{name} must be finite and positive, got {v}");
                    }
                }
                if let Some(s) = f.scale {
                    if !(s > 0.0 && s.is_finite()) {
                        bail!("scale must be finite and positive, got {s}");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_physical(&self) -> Option<PhysicalProblem> {
        match &self.body {
            InstanceBody::Physical(f) => Some(PhysicalProblem {
                antennas: f.antennas,
                h1: f.h1.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
                h2: f.h2.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
                p1: f.p1,
                p2: f.p2,
                sigma_r2: f.sigma_r2,
                sigma1_2: f.sigma1_2,
                sigma2_2: f.sigma2_2,
                gamma1: f.gamma1,
                gamma2: f.gamma2,
            }),
            InstanceBody::Reduced(_) => None,
        }
    }

    pub fn to_reduced(&self) -> Option<ReducedProblem> {
        match &self.body {
            InstanceBody::Reduced(f) => {
                let mut red =
                    ReducedProblem::from_coefficients(f.q1, f.q2, f.c1, f.c2, f.d1, f.d2, f.r);
                if let Some(s) = f.scale {
                    red.scale = s;
                }
                Some(red)
            }
            InstanceBody::Physical(_) => None,
        }
    }

    pub fn from_physical(prob: &PhysicalProblem) -> Self {
        InstanceFile {
            version: SCHEMA_VERSION,
            body: InstanceBody::Physical(PhysicalFields {
                antennas: prob.antennas,
                h1: prob.h1.iter().map(|z| [z.re, z.im]).collect(),
                h2: prob.h2.iter().map(|z| [z.re, z.im]).collect(),
                p1: prob.p1,
                p2: prob.p2,
                sigma_r2: prob.sigma_r2,
                sigma1_2: prob.sigma1_2,
                sigma2_2: prob.sigma2_2,
                gamma1: prob.gamma1,
                gamma2: prob.gamma2,
            }),
            solver: None,
        }
    }
}

/// A solution file for `verify`: either a real reduced 2x2 (row-major) or a
/// complex one split into real and imaginary parts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RealSolutionFields {
    pub a: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComplexSolutionFields {
    pub a_re: [f64; 4],
    pub a_im: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolutionBody {
    Real(RealSolutionFields),
    Complex(ComplexSolutionFields),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub version: u32,
    pub body: SolutionBody,
}

impl SolutionFile {
    pub fn parse(text: &str) -> Result<Self> {
        let (version, kind, solver, rest) =
            split_envelope(text).context("failed to parse solution JSON")?;
        if solver.is_some() {
            bail!("solution files do not take a 'solver' block");
        }
        if version != SCHEMA_VERSION {
            bail!("unsupported solution schema version {version} (expected {SCHEMA_VERSION})");
        }
        let body = match kind.as_str() {
            "solution" => SolutionBody::Real(
                serde_json::from_value(rest).context("invalid real solution")?,
            ),
            "solution_complex" => SolutionBody::Complex(
                serde_json::from_value(rest).context("invalid complex solution")?,
            ),
            other => {
                bail!("unknown solution kind '{other}' (expected 'solution' or 'solution_complex')")
            }
        };
        Ok(SolutionFile { version, body })
    }
}

/// Reduced coefficients echoed into result records and `reduce` output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReducedCoefficients {
    pub q1: f64,
    pub q2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub r: f64,
    pub scale: f64,
}

impl From<&ReducedProblem> for ReducedCoefficients {
    fn from(red: &ReducedProblem) -> Self {
        ReducedCoefficients {
            q1: red.q1,
            q2: red.q2,
            c1: red.c1,
            c2: red.c2,
            d1: red.d1,
            d2: red.d2,
            r: red.r,
            scale: red.scale,
        }
    }
}

/// `reduce` output: coefficients plus the lift basis when available.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReduceOutput {
    pub version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub coefficients: ReducedCoefficients,
    /// `M x 2` lift basis `B` of `A(a) = conj(B) a B^H`, rows of `[re, im]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<[[f64; 2]; 2]>>,
}

pub fn cmat_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// One branch outcome in a result record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchRecord {
    pub sign: f64,
    pub status: String,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    pub lambda_sign_violations: usize,
}

/// Full solve result. `wall_time_ms` is the only field that is not a pure
/// function of the inputs; batch CSV output omits it for byte-stable sweeps.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRecord {
    pub version: u32,
    pub kind: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduced: Option<ReducedCoefficients>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_watts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinr: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam: Option<Vec<Vec<[f64; 2]>>>,
    pub precheck_ok: bool,
    pub branches: Vec<BranchRecord>,
    /// Present on failure: best feasible point the oracle could find.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<FallbackRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FallbackRecord {
    pub source: String,
    pub a: [f64; 4],
    pub power: f64,
}

/// Verification output for `verify`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyRecord {
    pub version: u32,
    pub realified: bool,
    pub a: [f64; 4],
    pub lambda: [f64; 2],
    pub power: f64,
    pub constraint_values: [f64; 2],
    pub feasible: bool,
    pub kkt_residual: f64,
    pub kkt_ok: bool,
    pub lambda_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_ok: Option<bool>,
    pub pass: bool,
}

/// Full-round-trip float formatting (17 significant digits) for CSV fields.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
