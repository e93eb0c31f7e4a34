//! Metric spec files.
//!
//! A spec is a TOML document with a `[metric]` section naming the kind, the
//! dimension and a display name, plus one kind-specific section and an
//! optional `[domain]`:
//!
//! ```toml
//! [metric]
//! kind = "randers"
//! n = 2
//! name = "FUNK_2"
//!
//! [riemannian]
//! a = ["((1 - r2) + x1*x1) / (1 - r2)^2", "(x1*x2) / (1 - r2)^2",
//!      "(x2*x1) / (1 - r2)^2", "((1 - r2) + x2*x2) / (1 - r2)^2"]
//!
//! [randers]
//! alpha = "riemannian"
//! b = ["x1 / (1 - r2)", "x2 / (1 - r2)"]
//! eps = 1.0
//!
//! [domain]
//! radius = 0.8
//! ```

use std::fmt;
use std::path::Path;

use finsler_core::homogeneous::{invariant_metric_field, LieAlgebraData, CHART_RADIUS_LIMIT};
use finsler_core::metric::{AlphaData, Domain, MetricVariant, PhiProfile};
use finsler_core::expr::Expr;
use finsler_core::{Error as CoreError, MetricModel};
use serde::Deserialize;

/// Samples used by the strong-convexity gate.
pub const CONVEXITY_SAMPLES: usize = 64;

/// Why a spec was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationKind {
    NonConvex,
    Regularity,
    Jacobi,
    Expression,
    Dimension,
    Missing,
    Value,
}

impl fmt::Display for ValidationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValidationKind::NonConvex => "NonConvex",
            ValidationKind::Regularity => "Regularity",
            ValidationKind::Jacobi => "Jacobi",
            ValidationKind::Expression => "Expression",
            ValidationKind::Dimension => "Dimension",
            ValidationKind::Missing => "Missing",
            ValidationKind::Value => "Value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SpecError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error{}: {message}", location(*line, key))]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("validation error ({kind}){}: {message}", location(*line, key))]
    Validation {
        kind: ValidationKind,
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
}

fn location(line: Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l}, key `{k}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" at key `{k}`"),
        (None, None) => String::new(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    metric: MetricSection,
    riemannian: Option<RiemannianSection>,
    randers: Option<RandersSection>,
    alphabeta: Option<AlphaBetaSection>,
    minkowski: Option<MinkowskiSection>,
    spherical: Option<SphericalSection>,
    homogeneous: Option<HomogeneousSection>,
    domain: Option<DomainSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricSection {
    kind: String,
    n: usize,
    name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Rows {
    Flat(Vec<String>),
    Nested(Vec<Vec<String>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RiemannianSection {
    a: Option<Rows>,
    conformal: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandersSection {
    alpha: Option<String>,
    b: Vec<String>,
    eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaBetaSection {
    alpha: Option<String>,
    b: Vec<String>,
    phi_kind: String,
    phi_coeffs: Vec<f64>,
    phi_den: Option<Vec<f64>>,
    b0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MinkowskiSection {
    norm: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphericalSection {
    profile: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HomogeneousSection {
    dim: usize,
    #[serde(default)]
    structure: Vec<String>,
    #[serde(default)]
    h_indices: Vec<usize>,
    m_indices: Option<Vec<usize>>,
    m_inner_product: Vec<Vec<f64>>,
    u: Vec<f64>,
    kappa: Option<f64>,
    phi_kind: String,
    phi_coeffs: Vec<f64>,
    phi_den: Option<Vec<f64>>,
    b0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    lo: Option<Vec<f64>>,
    hi: Option<Vec<f64>>,
    half: Option<f64>,
    radius: Option<f64>,
}

/// Source text with helpers to locate keys for diagnostics.
struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line_of_offset(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    /// Line of `key` inside `[section]`, or of the section header when the
    /// key is absent.
    fn line_of(&self, section: &str, key: Option<&str>) -> Option<usize> {
        let header = format!("[{section}]");
        let mut in_section = false;
        let mut header_line = None;
        for (k, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                in_section = line == header;
                if in_section {
                    header_line = Some(k + 1);
                }
                continue;
            }
            if let (true, Some(key)) = (in_section, key) {
                if let Some(rest) = line.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(k + 1);
                    }
                }
            }
        }
        header_line
    }

    fn invalid(&self, kind: ValidationKind, section: &str, key: Option<&str>, message: impl Into<String>) -> SpecError {
        SpecError::Validation {
            kind,
            line: self.line_of(section, key),
            key: Some(match key {
                Some(k) => format!("{section}.{k}"),
                None => section.to_string(),
            }),
            message: message.into(),
        }
    }

    fn missing(&self, section: &str) -> SpecError {
        SpecError::Validation {
            kind: ValidationKind::Missing,
            line: None,
            key: Some(section.to_string()),
            message: format!("section [{section}] is required for this kind"),
        }
    }
}

fn core_kind(e: &CoreError) -> ValidationKind {
    match e {
        CoreError::NonConvex { .. } => ValidationKind::NonConvex,
        CoreError::RegularityViolation { .. } => ValidationKind::Regularity,
        CoreError::InvalidLieAlgebra(_) => ValidationKind::Jacobi,
        CoreError::Expr(_) => ValidationKind::Expression,
        CoreError::Dimension { .. } => ValidationKind::Dimension,
        _ => ValidationKind::Value,
    }
}

/// Reads and validates a spec file.
pub fn parse_metric_spec(path: &Path) -> Result<MetricModel, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("METRIC");
    parse_metric_str(&text, stem)
}

/// Parses spec text; `default_name` is used when `[metric]` has no name.
pub fn parse_metric_str(text: &str, default_name: &str) -> Result<MetricModel, SpecError> {
    let src = Source { text };
    let file: SpecFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|r| src.line_of_offset(r.start));
        SpecError::Parse {
            line,
            key: None,
            message: e.message().trim().to_string(),
        }
    })?;
    let n = file.metric.n;
    if !(2..=4).contains(&n) {
        return Err(src.invalid(ValidationKind::Dimension, "metric", Some("n"), format!("n = {n} outside 2..=4")));
    }
    let name = file.metric.name.clone().unwrap_or_else(|| default_name.to_string());
    let kind = file.metric.kind.as_str();
    if kind == "homogeneous" {
        return homogeneous(&src, &file, n, &name);
    }
    let variant = match kind {
        "euclid" => MetricVariant::Minkowski {
            norm: Expr::parse("u").expect("literal"),
        },
        "riemannian" => MetricVariant::Riemannian {
            a: alpha(&src, &file, n, Some("riemannian"))?,
        },
        "randers" => {
            let sec = file.randers.as_ref().ok_or_else(|| src.missing("randers"))?;
            MetricVariant::Randers {
                alpha: alpha(&src, &file, n, sec.alpha.as_deref())?,
                b: form(&src, "randers", &sec.b, n)?,
                eps: sec.eps.unwrap_or(1.0),
            }
        }
        "alphabeta" => {
            let sec = file.alphabeta.as_ref().ok_or_else(|| src.missing("alphabeta"))?;
            MetricVariant::AlphaBeta {
                alpha: alpha(&src, &file, n, sec.alpha.as_deref())?,
                b: form(&src, "alphabeta", &sec.b, n)?,
                phi: phi(&src, "alphabeta", &sec.phi_kind, &sec.phi_coeffs, sec.phi_den.as_deref(), sec.b0)?,
            }
        }
        "minkowski" => {
            let sec = file.minkowski.as_ref().ok_or_else(|| src.missing("minkowski"))?;
            MetricVariant::Minkowski {
                norm: expr(&src, "minkowski", "norm", &sec.norm)?,
            }
        }
        "spherical" => {
            let sec = file.spherical.as_ref().ok_or_else(|| src.missing("spherical"))?;
            MetricVariant::Spherical {
                profile: expr(&src, "spherical", "profile", &sec.profile)?,
            }
        }
        other => {
            return Err(src.invalid(
                ValidationKind::Value,
                "metric",
                Some("kind"),
                format!("unknown kind `{other}`"),
            ))
        }
    };
    let dom = domain(&src, file.domain.as_ref(), n)?;
    let model = MetricModel::new(&name, n, variant, dom)
        .map_err(|e| src.invalid(core_kind(&e), kind_section(kind), None, e.to_string()))?;
    model
        .check_strong_convexity(CONVEXITY_SAMPLES, 0)
        .map_err(|e| src.invalid(core_kind(&e), kind_section(kind), None, e.to_string()))?;
    Ok(model)
}

fn kind_section(kind: &str) -> &str {
    match kind {
        "euclid" => "metric",
        k => k,
    }
}

fn expr(src: &Source<'_>, section: &str, key: &str, s: &str) -> Result<Expr, SpecError> {
    Expr::parse(s).map_err(|e| src.invalid(ValidationKind::Expression, section, Some(key), e.to_string()))
}

fn form(src: &Source<'_>, section: &str, b: &[String], n: usize) -> Result<Vec<Expr>, SpecError> {
    if b.len() != n {
        return Err(src.invalid(
            ValidationKind::Dimension,
            section,
            Some("b"),
            format!("expected {n} components, found {}", b.len()),
        ));
    }
    b.iter().map(|s| expr(src, section, "b", s)).collect()
}

fn alpha(src: &Source<'_>, file: &SpecFile, n: usize, which: Option<&str>) -> Result<AlphaData, SpecError> {
    match which.unwrap_or("euclid") {
        "euclid" => Ok(AlphaData::euclidean(n)),
        "riemannian" => {
            let sec = file.riemannian.as_ref().ok_or_else(|| src.missing("riemannian"))?;
            let bad = |key: &str, e: CoreError| src.invalid(core_kind(&e), "riemannian", Some(key), e.to_string());
            match (&sec.a, &sec.conformal) {
                (Some(rows), None) => {
                    let flat: Vec<&str> = match rows {
                        Rows::Flat(v) => v.iter().map(String::as_str).collect(),
                        Rows::Nested(v) => v.iter().flatten().map(String::as_str).collect(),
                    };
                    if flat.len() != n * n {
                        return Err(src.invalid(
                            ValidationKind::Dimension,
                            "riemannian",
                            Some("a"),
                            format!("expected {} entries, found {}", n * n, flat.len()),
                        ));
                    }
                    AlphaData::parse(n, &flat).map_err(|e| bad("a", e))
                }
                (None, Some(c)) => AlphaData::conformal(n, c).map_err(|e| bad("conformal", e)),
                _ => Err(src.invalid(
                    ValidationKind::Value,
                    "riemannian",
                    None,
                    "give exactly one of `a` and `conformal`",
                )),
            }
        }
        other => Err(src.invalid(
            ValidationKind::Value,
            "randers",
            Some("alpha"),
            format!("alpha must be \"euclid\" or \"riemannian\", found `{other}`"),
        )),
    }
}

fn phi(
    src: &Source<'_>,
    section: &str,
    kind: &str,
    coeffs: &[f64],
    den: Option<&[f64]>,
    b0: Option<f64>,
) -> Result<PhiProfile, SpecError> {
    let arity = |k: usize| -> Result<(), SpecError> {
        if coeffs.len() == k {
            Ok(())
        } else {
            Err(src.invalid(
                ValidationKind::Value,
                section,
                Some("phi_coeffs"),
                format!("phi_kind `{kind}` takes {k} coefficients, found {}", coeffs.len()),
            ))
        }
    };
    let b0v = b0.unwrap_or(1.0);
    if !(b0v > 0.0) {
        return Err(src.invalid(ValidationKind::Value, section, Some("b0"), "b0 must be positive"));
    }
    let p = match kind {
        "randers" => {
            arity(1)?;
            let mut p = PhiProfile::randers(coeffs[0]);
            if let Some(b) = b0 {
                p.b0 = p.b0.min(b);
            }
            p
        }
        "polynomial" => {
            if coeffs.is_empty() {
                arity(1)?;
            }
            PhiProfile::polynomial(coeffs.to_vec(), b0v)
        }
        "rational" => {
            let den = den.filter(|d| !d.is_empty()).ok_or_else(|| {
                src.invalid(ValidationKind::Missing, section, Some("phi_den"), "rational profile needs phi_den")
            })?;
            PhiProfile::rational(coeffs.to_vec(), den.to_vec(), b0v)
        }
        "sqrt_linear" => {
            arity(3)?;
            PhiProfile::sqrt_linear(coeffs[0], coeffs[1], coeffs[2], b0v)
        }
        other => {
            return Err(src.invalid(
                ValidationKind::Value,
                section,
                Some("phi_kind"),
                format!("unknown phi_kind `{other}`"),
            ))
        }
    };
    Ok(p)
}

fn domain(src: &Source<'_>, sec: Option<&DomainSection>, n: usize) -> Result<Domain, SpecError> {
    let Some(sec) = sec else {
        return Ok(Domain::unit_box(n));
    };
    let bad = |key: &str, m: String| src.invalid(ValidationKind::Value, "domain", Some(key), m);
    match (sec.lo.as_ref(), sec.hi.as_ref(), sec.half, sec.radius) {
        (Some(lo), Some(hi), None, None) => {
            if lo.len() != n || hi.len() != n {
                return Err(src.invalid(
                    ValidationKind::Dimension,
                    "domain",
                    Some("lo"),
                    format!("bounds must have {n} entries"),
                ));
            }
            if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                return Err(bad("lo", "need lo < hi in every coordinate".into()));
            }
            Ok(Domain::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            })
        }
        (None, None, Some(h), None) if h > 0.0 => Ok(Domain::cube(n, h)),
        (None, None, None, Some(r)) if r > 0.0 => Ok(Domain::Ball { radius: r }),
        _ => Err(bad(
            "radius",
            "give `lo` and `hi`, or a positive `half`, or a positive `radius`".into(),
        )),
    }
}

fn homogeneous(src: &Source<'_>, file: &SpecFile, n: usize, name: &str) -> Result<MetricModel, SpecError> {
    let sec = file.homogeneous.as_ref().ok_or_else(|| src.missing("homogeneous"))?;
    let s = "homogeneous";
    let dim = sec.dim;
    let one_based = |key: &str, v: &[usize]| -> Result<Vec<usize>, SpecError> {
        v.iter()
            .map(|&i| {
                if (1..=dim).contains(&i) {
                    Ok(i - 1)
                } else {
                    Err(src.invalid(ValidationKind::Value, s, Some(key), format!("index {i} outside 1..={dim}")))
                }
            })
            .collect()
    };
    let mut structure = Vec::with_capacity(sec.structure.len());
    for t in &sec.structure {
        let parts: Vec<&str> = t.split_whitespace().collect();
        let bad = || {
            src.invalid(
                ValidationKind::Value,
                s,
                Some("structure"),
                format!("expected \"i j k value\", found `{t}`"),
            )
        };
        if parts.len() != 4 {
            return Err(bad());
        }
        let idx: Vec<usize> = parts[..3].iter().map(|p| p.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let c: f64 = parts[3].parse().map_err(|_| bad())?;
        let idx = one_based("structure", &idx)?;
        structure.push((idx[0], idx[1], idx[2], c));
    }
    let h = one_based("h_indices", &sec.h_indices)?;
    let m = match &sec.m_indices {
        Some(m) => one_based("m_indices", m)?,
        None => (0..dim).filter(|i| !h.contains(i)).collect(),
    };
    if m.len() != n {
        return Err(src.invalid(
            ValidationKind::Dimension,
            s,
            Some("m_indices"),
            format!("dim m = {} but n = {n}", m.len()),
        ));
    }
    if sec.m_inner_product.len() != n || sec.m_inner_product.iter().any(|r| r.len() != n) {
        return Err(src.invalid(
            ValidationKind::Dimension,
            s,
            Some("m_inner_product"),
            format!("expected {n} rows of {n}"),
        ));
    }
    let inner: Vec<f64> = sec.m_inner_product.iter().flatten().copied().collect();
    let phi = phi(src, s, &sec.phi_kind, &sec.phi_coeffs, sec.phi_den.as_deref(), sec.b0)?;
    let data = LieAlgebraData::new(dim, &structure, h, m, inner, sec.u.clone(), sec.kappa.unwrap_or(1.0), phi)
        .map_err(|e| src.invalid(core_kind(&e), s, None, e.to_string()))?;
    let radius = match file.domain.as_ref() {
        None => CHART_RADIUS_LIMIT,
        Some(DomainSection {
            radius: Some(r),
            lo: None,
            hi: None,
            half: None,
        }) => *r,
        Some(_) => {
            return Err(src.invalid(
                ValidationKind::Value,
                "domain",
                None,
                "homogeneous charts are balls: give `radius` only",
            ))
        }
    };
    let b = data.b_squared().sqrt();
    data.phi
        .check_regular_on(b)
        .map_err(|e| src.invalid(ValidationKind::Regularity, s, Some("u"), e.to_string()))?;
    let model = invariant_metric_field(&data, radius, name)
        .map_err(|e| src.invalid(core_kind(&e), "domain", Some("radius"), e.to_string()))?;
    model
        .check_strong_convexity(CONVEXITY_SAMPLES, 0)
        .map_err(|e| src.invalid(core_kind(&e), s, None, e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use finsler_core::metric::lookup;

    #[test]
    fn euclid_spec() {
        let m = parse_metric_str("[metric]\nkind = \"euclid\"\nn = 2\nname = \"EUCLID_2\"\n", "x").unwrap();
        assert_eq!(m, lookup("EUCLID_2").unwrap());
    }

    #[test]
    fn randers_with_large_eps_is_not_convex() {
        let text = "[metric]\nkind = \"randers\"\nn = 2\n\n[randers]\nb = [\"1\", \"0\"]\neps = 1.5\n";
        match parse_metric_str(text, "R") {
            Err(SpecError::Validation { kind, line, .. }) => {
                assert_eq!(kind, ValidationKind::NonConvex);
                assert_eq!(line, Some(5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn heisenberg_round_trips() {
        let text = r#"
[metric]
kind = "homogeneous"
n = 3
name = "HEIS_RANDERS"

[homogeneous]
dim = 3
structure = ["1 2 3 1.0"]
m_inner_product = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
u = [0.5, 0, 0]
kappa = 1.0
phi_kind = "randers"
phi_coeffs = [1.0]
"#;
        let m = parse_metric_str(text, "x").unwrap();
        assert_eq!(m, lookup("HEIS_RANDERS").unwrap());
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let e = parse_metric_str("[metric]\nkind = \"euclid\"\nn = = 2\n", "x").unwrap_err();
        assert!(matches!(e, SpecError::Parse { line: Some(3), .. }), "{e:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_metric_str("[metric]\nkind = \"euclid\"\nn = 2\ncolour = 1\n", "x").unwrap_err();
        assert!(matches!(e, SpecError::Parse { line: Some(4), .. }), "{e:?}");
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn bad_expression_points_at_key() {
        let text = "[metric]\nkind = \"minkowski\"\nn = 2\n\n[minkowski]\nnorm = \"sqrt(y1^2 + y2^2\"\n";
        match parse_metric_str(text, "M") {
            Err(SpecError::Validation { kind, line, key, .. }) => {
                assert_eq!(kind, ValidationKind::Expression);
                assert_eq!(line, Some(6));
                assert_eq!(key.as_deref(), Some("minkowski.norm"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jacobi_violation_is_a_validation_error() {
        let text = r#"
[metric]
kind = "homogeneous"
n = 3

[homogeneous]
dim = 3
structure = ["1 2 3 1", "2 3 1 1", "3 1 2 1", "1 3 1 1"]
m_inner_product = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
u = [0, 0, 0]
phi_kind = "randers"
phi_coeffs = [1.0]
"#;
        let e = parse_metric_str(text, "x").unwrap_err();
        assert!(matches!(e, SpecError::Validation { kind: ValidationKind::Jacobi, .. }), "{e:?}");
    }
}
