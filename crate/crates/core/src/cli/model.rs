//! Model files: a marginal law plus one source of rates.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "spec": {"family": "gamma", "params": {"shape": 2.0}},
//!   "alpha": {"family": "n", "scale": 1.0},
//!   "tolerance": 1e-12,
//!   "closed_form": true
//! }
//! ```
//!
//! `alpha` is one of `{"ratios": [1, ...]}`, `{"family": "n" | "n^2" | "n(n+2)/3"}`
//! or `{"solve": k}`, each with an optional `scale` (α₁, default 1). A bare
//! list of ratios is accepted too. A file holding only a spec
//! (`{"family": ..., "params": ...}`) is a model without rates.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::continuity::{solve_alpha, AlphaSequence, ContinuityReport, RateFamily};
use crate::error::{Result, SmprError};
use crate::kernels::TransitionKernel;
use crate::marginals::MarginalSpec;
use crate::orthopoly::basis_from_moments;

pub const SCHEMA: u32 = 1;

/// Where the rates come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    Ratios(Vec<f64>),
    Family(String),
    Solve(usize),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaObject {
    ratios: Option<Vec<f64>>,
    family: Option<String>,
    solve: Option<usize>,
    scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    List(Vec<f64>),
    Object(AlphaObject),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    schema: Option<u32>,
    name: Option<String>,
    spec: MarginalSpec,
    alpha: Option<AlphaRepr>,
    tolerance: Option<f64>,
    closed_form: Option<bool>,
}

/// A declared or solved rate sequence.
#[derive(Debug, Clone)]
pub struct ResolvedAlpha {
    pub source: AlphaSource,
    pub alpha: AlphaSequence,
    /// The solver output when the source was `{"solve": k}`.
    pub solved: Option<ContinuityReport>,
}

/// A loaded model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub name: Option<String>,
    pub spec: MarginalSpec,
    pub alpha: Option<ResolvedAlpha>,
    pub tolerance: Option<f64>,
    pub closed_form: bool,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SmprError::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| SmprError::InvalidParameter(format!("malformed JSON in {}: {e}", path.display())))
}

fn check_schema(v: &Value, path: &Path) -> Result<()> {
    match v.get("schema") {
        None => Ok(()),
        Some(s) if s.as_u64() == Some(SCHEMA as u64) => Ok(()),
        Some(s) => Err(SmprError::InvalidParameter(format!(
            "{}: unsupported schema {s}, expected {SCHEMA}",
            path.display()
        ))),
    }
}

fn invalid(path: &Path, e: serde_json::Error) -> SmprError {
    SmprError::InvalidParameter(format!("{}: {e}", path.display()))
}

impl ModelFile {
    /// Reads a model file or a bare spec file.
    pub fn load(path: &Path) -> Result<Self> {
        let v = read_json(path)?;
        check_schema(&v, path)?;
        if v.get("spec").is_none() {
            let spec: MarginalSpec = serde_json::from_value(v).map_err(|e| invalid(path, e))?;
            return Ok(ModelFile { name: None, spec, alpha: None, tolerance: None, closed_form: true });
        }
        let repr: ModelRepr = serde_json::from_value(v).map_err(|e| invalid(path, e))?;
        let _ = repr.schema;
        let alpha = repr.alpha.map(|a| resolve_alpha(a, &repr.spec)).transpose()?;
        if let Some(t) = repr.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SmprError::InvalidParameter(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(ModelFile {
            name: repr.name,
            spec: repr.spec,
            alpha,
            tolerance: repr.tolerance,
            closed_form: repr.closed_form.unwrap_or(true),
        })
    }

    /// Replaces the rates with those of an alpha file.
    pub fn with_alpha_file(mut self, path: &Path) -> Result<Self> {
        let v = read_json(path)?;
        check_schema(&v, path)?;
        let v = match v {
            Value::Object(mut o) if o.contains_key("alpha") => o.remove("alpha").expect("key present"),
            Value::Object(mut o) => {
                o.remove("schema");
                Value::Object(o)
            }
            other => other,
        };
        let repr: AlphaRepr = serde_json::from_value(v).map_err(|e| invalid(path, e))?;
        self.alpha = Some(resolve_alpha(repr, &self.spec)?);
        Ok(self)
    }

    pub fn require_alpha(&self) -> Result<&ResolvedAlpha> {
        self.alpha.as_ref().ok_or_else(|| {
            SmprError::InvalidParameter("no rates given: pass --alpha or use a model file with an \"alpha\" entry".into())
        })
    }

    /// Transition kernel with the model's tolerance and closed-form setting.
    pub fn kernel(&self) -> Result<TransitionKernel> {
        let alpha = self.require_alpha()?;
        let mut k = TransitionKernel::new(&self.spec, alpha.alpha.clone())?.with_closed_form(self.closed_form);
        if let Some(t) = self.tolerance {
            k = k.with_tolerance(t)?;
        }
        Ok(k)
    }
}

fn resolve_alpha(repr: AlphaRepr, spec: &MarginalSpec) -> Result<ResolvedAlpha> {
    let obj = match repr {
        AlphaRepr::List(ratios) => AlphaObject { ratios: Some(ratios), family: None, solve: None, scale: None },
        AlphaRepr::Object(o) => o,
    };
    let scale = obj.scale.unwrap_or(1.0);
    let sources = obj.ratios.is_some() as u8 + obj.family.is_some() as u8 + obj.solve.is_some() as u8;
    if sources != 1 {
        return Err(SmprError::InvalidParameter(format!(
            "alpha needs exactly one of \"ratios\", \"family\" or \"solve\", got {sources}"
        )));
    }
    if let Some(ratios) = obj.ratios {
        let alpha = AlphaSequence::explicit(ratios.clone(), scale)?;
        return Ok(ResolvedAlpha { source: AlphaSource::Ratios(ratios), alpha, solved: None });
    }
    if let Some(name) = obj.family {
        let alpha = AlphaSequence::from_family(RateFamily::parse(&name)?, scale)?;
        return Ok(ResolvedAlpha { source: AlphaSource::Family(name), alpha, solved: None });
    }
    let k = obj.solve.expect("one source present");
    let c = basis_from_moments(spec, 2 * k)?;
    let report = solve_alpha(&c, k)?;
    let alpha = AlphaSequence::explicit(report.ratios.clone(), scale)?;
    Ok(ResolvedAlpha { source: AlphaSource::Solve(k), alpha, solved: Some(report) })
}
