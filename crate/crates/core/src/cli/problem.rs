//! Problem files: `x' = A(t)x + f(t) + F(t, x)` with window, tolerances and
//! an optional certificate.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::expr::{parse_with_params, Expr};
use crate::hyperbolicity::Constants;
use crate::linalg::{matrix_from_rows, Matrix};
use crate::propagator::{CoefficientMatrix, Tolerances};
use crate::rap::Tail;
use crate::solvers::ExprForcing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `[−T, T]` with a trichotomy.
    #[default]
    WholeLine,
    /// `[0, T]` with a dichotomy.
    HalfLine,
}

/// User-supplied projectors and, optionally, constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl CertificateSpec {
    pub fn constants(&self) -> Option<Constants> {
        match (self.n, self.nu) {
            (Some(n), Some(nu)) => Some(Constants::new(n, nu)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-7
}
fn default_rtol() -> f64 {
    Tolerances::default().rtol
}
fn default_atol() -> f64 {
    Tolerances::default().atol
}
fn default_max_iter() -> usize {
    200
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            tol: default_tol(),
            rtol: default_rtol(),
            atol: default_atol(),
            max_iter: default_max_iter(),
        }
    }
}

/// Defaults for `rap-scan` and `audit`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RapSpec {
    /// `[A, B, STEP]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_range: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Tail>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Problem file contents, as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dim: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    pub f: Vec<String>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<Vec<String>>,
    /// Declared Lipschitz constant of `F`.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Sample-check `L` (or estimate it when absent).
    #[serde(default, skip_serializing_if = "is_false")]
    pub validate_lipschitz: bool,
    /// Named constants usable in every expression.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSpec>,
    /// `T`: the window is `[−T, T]` or `[0, T]`.
    pub window: f64,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// Continuation list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rap: Option<RapSpec>,
}

/// A spec with all expressions compiled.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub a: CoefficientMatrix,
    pub f: ExprForcing,
    pub nonlinearity: Option<Vec<Expr>>,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.spec.tolerances.rtol,
            atol: self.spec.tolerances.atol,
        }
    }
}

fn problem_err(pointer: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Problem {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Deserializes a spec, reporting schema violations with a JSON pointer.
pub fn parse_spec(text: &str) -> Result<ProblemSpec, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

fn compile_expr(
    src: &str,
    pointer: &str,
    params: &BTreeMap<String, f64>,
    dim: usize,
    state: bool,
) -> Result<Expr, CliError> {
    let e = parse_with_params(src, params).map_err(|err| problem_err(pointer, format!("`{src}`: {err}")))?;
    for v in e.free_vars() {
        let ok = v == "t"
            || (state
                && v.strip_prefix('x')
                    .and_then(|k| k.parse::<usize>().ok())
                    .is_some_and(|k| (1..=dim).contains(&k)));
        if !ok {
            let allowed = if state {
                format!("t, x1..x{dim}")
            } else {
                "t".to_string()
            };
            return Err(problem_err(pointer, format!("`{src}`: free variable {v} not in {{{allowed}}}")));
        }
    }
    Ok(e)
}

fn check_square(m: &[Vec<f64>], dim: usize, pointer: &str) -> Result<Matrix, CliError> {
    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
        return Err(problem_err(pointer, format!("expected a {dim}x{dim} matrix")));
    }
    Ok(matrix_from_rows(m))
}

impl ProblemSpec {
    /// Checks shapes and compiles every expression.
    pub fn compile(&self) -> Result<Problem, CliError> {
        let n = self.dim;
        if n == 0 {
            return Err(problem_err("/dim", "dim must be at least 1"));
        }
        if self.a.len() != n {
            return Err(problem_err("/A", format!("expected {n} rows, got {}", self.a.len())));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != n {
                return Err(problem_err(format!("/A/{i}"), format!("expected {n} entries, got {}", row.len())));
            }
            for (j, s) in row.iter().enumerate() {
                entries.push(compile_expr(s, &format!("/A/{i}/{j}"), &self.parameters, n, false)?);
            }
        }
        let a = CoefficientMatrix::new(n, entries).map_err(|e| problem_err("/A", e.to_string()))?;
        if self.f.len() != n {
            return Err(problem_err("/f", format!("expected {n} entries, got {}", self.f.len())));
        }
        let f = self
            .f
            .iter()
            .enumerate()
            .map(|(i, s)| compile_expr(s, &format!("/f/{i}"), &self.parameters, n, false))
            .collect::<Result<Vec<_>, _>>()?;
        let nonlinearity = match &self.nonlinearity {
            None => None,
            Some(fs) => {
                if fs.len() != n {
                    return Err(problem_err("/F", format!("expected {n} entries, got {}", fs.len())));
                }
                if self.lipschitz.is_none() && !self.validate_lipschitz {
                    return Err(problem_err("/L", "F is present: declare L or set validate_lipschitz"));
                }
                Some(
                    fs.iter()
                        .enumerate()
                        .map(|(i, s)| compile_expr(s, &format!("/F/{i}"), &self.parameters, n, true))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
        };
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return Err(problem_err("/L", format!("L must be positive, got {l}")));
            }
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(problem_err("/window", format!("window must be positive, got {}", self.window)));
        }
        let t = &self.tolerances;
        for (name, v) in [("tol", t.tol), ("rtol", t.rtol), ("atol", t.atol)] {
            if !(v > 0.0) {
                return Err(problem_err(format!("/tolerances/{name}"), format!("must be positive, got {v}")));
            }
        }
        if let Some(c) = &self.certificate {
            check_square(&c.p, n, "/certificate/P")?;
            match (&c.q, self.mode) {
                (Some(q), _) => {
                    check_square(q, n, "/certificate/Q")?;
                }
                (None, Mode::WholeLine) => return Err(problem_err("/certificate/Q", "whole-line certificates need Q")),
                (None, Mode::HalfLine) => {}
            }
            if c.n.is_some() != c.nu.is_some() {
                return Err(problem_err("/certificate", "give both N and nu, or neither"));
            }
        }
        Ok(Problem {
            spec: self.clone(),
            a,
            f: ExprForcing(f),
            nonlinearity,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// Reads, validates and compiles a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)?.compile()
}

/// Certificate file given with `--certificate`.
pub fn load_certificate(path: impl AsRef<Path>) -> Result<CertificateSpec, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAG: &str = r#"{"dim": 2, "A": [["-1", "0"], ["0", "1"]], "f": ["cos(t)", "cos(t)"], "window": 30}"#;

    #[test]
    fn loads_and_round_trips() {
        let spec = parse_spec(DIAG).unwrap();
        let p = spec.compile().unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(parse_spec(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn free_variable_named() {
        let text = DIAG.replace(r#"["0", "1"]]"#, r#"["sin(x9)", "1"]]"#);
        let err = parse_spec(&text).unwrap().compile().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x9") && msg.contains("/A/1/0"), "{msg}");
    }

    #[test]
    fn schema_error_has_pointer() {
        let text = DIAG.replace(r#""window": 30"#, r#""window": "long""#);
        match parse_spec(&text) {
            Err(CliError::Schema { pointer, .. }) => assert_eq!(pointer, "/window"),
            other => panic!("{other:?}"),
        }
        let text = DIAG.replace(r#"["-1", "0"]"#, r#"["-1", 0]"#);
        match parse_spec(&text) {
            Err(CliError::Schema { pointer, .. }) => assert_eq!(pointer, "/A/0/1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_has_location() {
        let text = DIAG.replace("cos(t)\", \"cos", "cos(t\", \"cos");
        let msg = parse_spec(&text).unwrap().compile().unwrap_err().to_string();
        assert!(msg.contains("/f/0") && msg.contains("byte"), "{msg}");
    }

    #[test]
    fn parameters_are_substituted() {
        let text = r#"{"dim": 1, "A": [["1"]], "f": ["0"], "F": ["-eps*exp(-abs(t))*x1^3"],
            "validate_lipschitz": true, "parameters": {"eps": 0.5}, "window": 20}"#;
        let p = parse_spec(text).unwrap().compile().unwrap();
        let e = &p.nonlinearity.unwrap()[0];
        let v = e.eval(&crate::expr::Point::new(0.0, &[2.0])).unwrap();
        assert!((v + 4.0).abs() < 1e-15);
    }
}
