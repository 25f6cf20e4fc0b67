//! Scaling-study configuration: a TOML file with sections [study], [model],
//! [sweep], [oracle], [predictor] and [output]. Unknown keys are rejected and
//! every diagnostic carries a line number.

use crate::boundary::{BoundaryCondition, BoundaryModel};
use crate::error::{Error, Result};
use crate::expr::parse_expr;
use crate::pointwise::{PotentialModel, Predictor};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudySection,
    pub model: ModelSection,
    pub sweep: SweepSection,
    pub oracle: OracleSection,
    pub predictor: PredictorSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeSense {
    /// |slope − expected| ≤ tolerance.
    #[default]
    TwoSided,
    /// slope ≥ expected − tolerance: the error may decay faster than claimed.
    UpperBound,
}

fn default_tolerance() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub id: String,
    /// Which estimate the study targets, carried into the report.
    pub anchor: String,
    pub expected_slope: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub sense: SlopeSense,
    /// The error metric is |oracle − prediction|·h^normalize_exponent.
    #[serde(default)]
    pub normalize_exponent: f64,
    /// Every x in the sweep must classify into this regime label.
    pub regime: Option<String>,
    /// Largest allowed max/min − 1 of C_i = metric_i / h_i^expected.
    pub constant_variation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Potential,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionName {
    Dirichlet,
    Neumann,
    Robin,
}

fn default_dimension() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub potential: Option<String>,
    /// Row-major g^{jk} expressions; identity when absent.
    pub metric: Option<Vec<String>>,
    pub domain: Option<Vec<[f64; 2]>>,
    pub tau: Option<f64>,
    pub condition: Option<ConditionName>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum XSet {
    /// Points along x₁ with |W| ≤ halfwidth·h^exponent around the turning
    /// point nearest `center`.
    TravelTimeWindow {
        halfwidth: f64,
        exponent: f64,
        points: usize,
        center: Option<Vec<f64>>,
    },
    /// Fixed points, each with `dimension` coordinates.
    Points { x: Vec<Vec<f64>> },
    /// x₁ ∈ [coefficient·h^exponent, max], clustered towards the lower end.
    BoundaryRange {
        coefficient: f64,
        exponent: f64,
        max: f64,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub h: Vec<f64>,
    pub x_set: XSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Closed-form kernel of the linear potential V = −x₁.
    AiryExact,
    /// Closed-form Dirichlet/Neumann half-space kernel.
    HalfspaceExact,
    /// Dense eigensolve of a boxed 1-D surrogate.
    Eigensolver,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub kind: OracleKind,
    /// Eigensolver: extent of the box into the allowed region, measured
    /// from the turning point.
    pub length: Option<f64>,
    pub points_per_wavelength: Option<f64>,
    pub richardson: Option<bool>,
    /// Quadrature tolerance for integral oracles.
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum PredictorVariant {
    #[serde(rename = "weyl-only")]
    WeylOnly,
    #[serde(rename = "weyl+correction")]
    WeylPlusCorrection,
}

impl From<PredictorVariant> for Predictor {
    fn from(v: PredictorVariant) -> Self {
        match v {
            PredictorVariant::WeylOnly => Predictor::WeylOnly,
            PredictorVariant::WeylPlusCorrection => Predictor::WeylPlusCorrection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSection {
    pub variant: PredictorVariant,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Per-point CSV, relative to the config file.
    pub csv: Option<String>,
    /// Text summary, relative to the config file.
    pub summary: Option<String>,
}

/// A model built from [model].
#[derive(Debug, Clone, PartialEq)]
pub enum StudyModel {
    Potential(PotentialModel),
    Boundary(BoundaryModel),
}

/// 1-based line of a byte offset.
fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, or of the section header, or 1.
fn line_of_key(text: &str, section: &str, key: &str) -> usize {
    let header = format!("[{section}]");
    let mut in_section = false;
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            in_section = line == header || line.starts_with(&format!("[{section}."));
            if line == header {
                header_line = Some(i + 1);
            }
            continue;
        }
        if in_section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

fn config_error(text: &str, section: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Config { line: line_of_key(text, section, key), message: message.into() }
}

impl StudyConfig {
    /// Parse and validate. Every error is an [`Error::Config`] with a line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_at(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let s = &self.study;
        if !(s.tolerance > 0.0) {
            return Err(config_error(text, "study", "tolerance", "tolerance must be positive"));
        }
        let hs = &self.sweep.h;
        if hs.len() < 4 {
            return Err(config_error(text, "sweep", "h", "need at least four h values"));
        }
        if hs.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
            return Err(config_error(text, "sweep", "h", "h values must lie in (0, 1]"));
        }
        let hmax = hs.iter().cloned().fold(f64::MIN, f64::max);
        let hmin = hs.iter().cloned().fold(f64::MAX, f64::min);
        if hmax / hmin < 10.0 * (1.0 - 1e-12) {
            return Err(config_error(text, "sweep", "h", "h values must span at least one decade"));
        }
        match &self.sweep.x_set {
            XSet::TravelTimeWindow { halfwidth, points, .. } => {
                if !(*halfwidth > 0.0) || *points < 2 {
                    return Err(config_error(text, "sweep.x_set", "halfwidth", "window needs halfwidth > 0 and points >= 2"));
                }
                if self.model.kind != ModelKind::Potential {
                    return Err(config_error(text, "sweep.x_set", "kind", "travel-time window needs a potential model"));
                }
            }
            XSet::Points { x } => {
                if x.is_empty() || x.iter().any(|p| p.len() != self.model.dimension) {
                    return Err(config_error(text, "sweep.x_set", "x", "each point needs `dimension` coordinates"));
                }
            }
            XSet::BoundaryRange { max, points, .. } => {
                if *points < 2 || !(*max > 0.0) {
                    return Err(config_error(text, "sweep.x_set", "max", "boundary range needs max > 0 and points >= 2"));
                }
            }
        }
        if let Some(v) = s.constant_variation {
            if !(v > 0.0) {
                return Err(config_error(text, "study", "constant_variation", "must be positive"));
            }
        }
        match (self.oracle.kind, self.model.kind) {
            (OracleKind::HalfspaceExact, ModelKind::Potential) => {
                return Err(config_error(text, "oracle", "kind", "halfspace-exact needs a boundary model"));
            }
            (OracleKind::AiryExact | OracleKind::Eigensolver, ModelKind::Boundary) => {
                return Err(config_error(text, "oracle", "kind", "this oracle needs a potential model"));
            }
            _ => {}
        }
        if self.oracle.kind == OracleKind::Eigensolver {
            if self.model.dimension != 1 {
                return Err(config_error(text, "oracle", "kind", "the eigensolver oracle is one-dimensional"));
            }
            if !self.oracle.length.is_some_and(|l| l > 0.0) {
                return Err(config_error(text, "oracle", "length", "eigensolver oracle needs length > 0"));
            }
        }
        self.build_model_inner(text).map(|_| ())
    }

    fn build_model_inner(&self, text: &str) -> Result<StudyModel> {
        let m = &self.model;
        let d = m.dimension;
        match m.kind {
            ModelKind::Potential => {
                let pot = m.potential.as_deref().ok_or_else(|| {
                    config_error(text, "model", "kind", "potential model needs `potential`")
                })?;
                parse_expr(pot).map_err(|e| config_error(text, "model", "potential", e.to_string()))?;
                let domain = m
                    .domain
                    .as_ref()
                    .map(|v| v.iter().map(|p| (p[0], p[1])).collect())
                    .unwrap_or_else(|| vec![(-60.0, 60.0); d]);
                let model = match &m.metric {
                    None => PotentialModel::new(d, pot, domain),
                    Some(entries) => {
                        let exprs = entries
                            .iter()
                            .map(|s| parse_expr(s))
                            .collect::<Result<Vec<_>>>()
                            .map_err(|e| config_error(text, "model", "metric", e.to_string()))?;
                        PotentialModel::with_metric(d, pot, exprs, domain)
                    }
                }
                .map_err(|e| config_error(text, "model", "potential", e.to_string()))?;
                Ok(StudyModel::Potential(model))
            }
            ModelKind::Boundary => {
                let condition = match (m.condition, m.beta) {
                    (Some(ConditionName::Dirichlet), None) => BoundaryCondition::Dirichlet,
                    (Some(ConditionName::Neumann), None) => BoundaryCondition::Neumann,
                    (Some(ConditionName::Robin), Some(b)) => BoundaryCondition::Robin(b),
                    (Some(ConditionName::Robin), None) => {
                        return Err(config_error(text, "model", "condition", "robin needs `beta`"));
                    }
                    (Some(_), Some(_)) => {
                        return Err(config_error(text, "model", "beta", "`beta` only applies to robin"));
                    }
                    (None, _) => {
                        return Err(config_error(text, "model", "kind", "boundary model needs `condition`"));
                    }
                };
                let bm = BoundaryModel::new(d, condition)
                    .map_err(|e| config_error(text, "model", "dimension", e.to_string()))?;
                Ok(StudyModel::Boundary(bm))
            }
        }
    }

    pub fn build_model(&self) -> Result<StudyModel> {
        self.build_model_inner("")
    }

    /// Spectral level τ; 0 for potentials and 1 for boundary problems unless
    /// given.
    pub fn tau(&self) -> f64 {
        self.model.tau.unwrap_or(match self.model.kind {
            ModelKind::Potential => 0.0,
            ModelKind::Boundary => 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[study]
id = "t"
anchor = "turning point"
expected_slope = -0.6667

[model]
kind = "potential"
potential = "-x"

[sweep]
h = [0.04, 0.02, 0.01, 0.004]

[sweep.x_set]
kind = "travel-time-window"
halfwidth = 1.0
exponent = 0.6667
points = 5

[oracle]
kind = "airy-exact"

[predictor]
variant = "weyl-only"
"#;

    #[test]
    fn parses_good_config() {
        let c = StudyConfig::parse(GOOD).unwrap();
        assert_eq!(c.study.tolerance, 0.15);
        assert_eq!(c.study.sense, SlopeSense::TwoSided);
        assert_eq!(c.predictor.variant, PredictorVariant::WeylOnly);
        assert_eq!(c.tau(), 0.0);
        assert!(matches!(c.build_model().unwrap(), StudyModel::Potential(_)));
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = GOOD.replace("anchor = \"turning point\"", "anchor = \"tp\"\ncolour = 3");
        match StudyConfig::parse(&bad) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 5, "{message}");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let bad = GOOD.replace("points = 5", "points = = 5");
        match StudyConfig::parse(&bad) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 18),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_point_at_key() {
        let bad = GOOD.replace("potential = \"-x\"", "potential = \"-x +\"");
        match StudyConfig::parse(&bad) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 9),
            other => panic!("{other:?}"),
        }
        let bad = GOOD.replace("h = [0.04, 0.02, 0.01, 0.004]", "h = [0.04, 0.02, 0.01]");
        match StudyConfig::parse(&bad) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 12),
            other => panic!("{other:?}"),
        }
        let bad = GOOD.replace("0.004]", "0.005]");
        assert!(StudyConfig::parse(&bad).is_err());
    }

    #[test]
    fn oracle_model_mismatch() {
        let bad = GOOD.replace("kind = \"airy-exact\"", "kind = \"halfspace-exact\"");
        assert!(matches!(StudyConfig::parse(&bad), Err(Error::Config { .. })));
    }
}
