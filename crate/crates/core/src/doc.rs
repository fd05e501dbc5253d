//! JSON instance documents and reports.
//!
//! Exact quantities are written as canonical rational strings (`"p"` or
//! `"p/q"`); floating-point fields carry 17 significant digits so that a
//! report re-serializes byte for byte.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::cone::{ConePosition, DualGenerator, Position};
use crate::eps::{format_rational, parse_rational, EpsPoly, Interval, Rational, Sign};
use crate::instance::{
    degrees_from_intersections, two_term_degree, validate_instance, validate_instance_allow_disconnected, Ambient,
    GradedComponent, Instance, RawInstance, ValidationError,
};
use crate::moment::{FlowResult, SolveOutcome, SweepRow, SweepStatus};
use crate::slope::{StabilityKind, SubsheafIndex, TwoTermVerdict, Verdict};

/// A rational read from a JSON integer or from a `"p/q"` / decimal string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalRepr(pub Rational);

impl<'de> Deserialize<'de> for RationalRepr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = RationalRepr;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a rational string such as \"3/4\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(RationalRepr(Rational::from_integer(v.into())))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(RationalRepr(Rational::from_integer(v.into())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Err(E::custom(format!(
                    "floating-point number {v} is not exact; write it as a string such as \"1/8\""
                )))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse_rational(v).map(RationalRepr).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for RationalRepr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

/// `#[serde(with = "rational_str")]` for `Rational` fields.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        RationalRepr::deserialize(d).map(|r| r.0)
    }
}

mod rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Ok(Vec::<RationalRepr>::deserialize(d)?.into_iter().map(|r| r.0).collect())
    }
}

mod opt_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Ok(Option::<RationalRepr>::deserialize(d)?.map(|r| r.0))
    }
}

/// A float written with 17 significant digits; non-finite values become
/// `null`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Float17(pub f64);

impl Serialize for Float17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Float17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Float17(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN)))
    }
}

fn floats(v: &[f64]) -> Vec<Float17> {
    v.iter().copied().map(Float17).collect()
}

// ---------------------------------------------------------------------------
// instance documents

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientDoc {
    pub n: usize,
    pub m: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub rank: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deg_coeffs: Option<Vec<RationalRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection_numbers: Option<Vec<RationalRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_degree: Option<RationalRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction_degree: Option<RationalRepr>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    TwoTerm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum B0Doc {
    Uniform(RationalRepr),
    PerEdge(Vec<RationalRepr>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0_sq: Option<B0Doc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub ambient: AmbientDoc,
    pub components: Vec<ComponentDoc>,
    /// 1-based `[i, j]` pairs.
    #[serde(default)]
    pub quiver: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "is_default_options")]
    pub options: OptionsDoc,
}

fn is_default_options(o: &OptionsDoc) -> bool {
    *o == OptionsDoc::default()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("ParseError: {message} at line {line}, column {column} (field `{path}`)")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("DegreeSource: component {component:?} must give exactly one of deg_coeffs, intersection_numbers or base_degree (with restriction_degree)")]
    DegreeSource { component: String },
    #[error("ZeroIndex: quiver edge [{}, {}] uses 0; indices are 1-based", .0[0], .0[1])]
    ZeroIndex([usize; 2]),
    #[error("BadB0: {0}")]
    BadB0(String),
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

pub fn parse_document(text: &str) -> Result<InstanceDocument, DocError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: InstanceDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        DocError::Json {
            path,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner.to_string()),
        }
    })?;
    de.end().map_err(|e| DocError::Json {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    Ok(doc)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}

/// A validated instance together with its document options.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadedInstance {
    pub instance: Instance,
    /// Per-edge magnitudes, if the document sets them.
    pub b0_sq: Option<Vec<Rational>>,
    pub mode: Mode,
}

impl InstanceDocument {
    pub fn into_raw(self) -> Result<RawInstance, DocError> {
        let ambient = Ambient::new(self.ambient.n, self.ambient.m)?;
        let mut components = Vec::with_capacity(self.components.len());
        for (k, c) in self.components.into_iter().enumerate() {
            let name = c.name.unwrap_or_else(|| format!("G{}", k + 1));
            let restriction_degree = c.restriction_degree.map(|r| r.0);
            let deg_coeffs = match (c.deg_coeffs, c.intersection_numbers, c.base_degree) {
                (Some(d), None, None) => EpsPoly::new(d.into_iter().map(|r| r.0).collect()),
                (None, Some(nums), None) => {
                    let nums: Vec<Rational> = nums.into_iter().map(|r| r.0).collect();
                    degrees_from_intersections(ambient.n(), &nums).map_err(|e| match e {
                        ValidationError::WrongLength { expected, found, .. } => ValidationError::WrongLength {
                            component: name.clone(),
                            expected,
                            found,
                        },
                        other => other,
                    })?
                }
                (None, None, Some(base)) => two_term_degree(ambient, &base.0, c.rank, restriction_degree.as_ref())
                    .map_err(|e| match e {
                        ValidationError::MissingRestrictionData(_) => {
                            ValidationError::MissingRestrictionData(name.clone())
                        }
                        ValidationError::ZeroRank(_) => ValidationError::ZeroRank(name.clone()),
                        other => other,
                    })?,
                _ => return Err(DocError::DegreeSource { component: name }),
            };
            components.push(GradedComponent {
                name,
                rank: c.rank,
                deg_coeffs,
                restriction_degree,
            });
        }
        let mut edges = Vec::with_capacity(self.quiver.len());
        for e in self.quiver {
            if e[0] == 0 || e[1] == 0 {
                return Err(DocError::ZeroIndex(e));
            }
            edges.push((e[0] - 1, e[1] - 1));
        }
        Ok(RawInstance {
            n: ambient.n(),
            m: ambient.m(),
            components,
            edges,
        })
    }

    /// Validates the document. With `require_connected = false` a
    /// disconnected quiver is accepted.
    pub fn load(self, require_connected: bool) -> Result<LoadedInstance, DocError> {
        let options = self.options.clone();
        let doc_edges = self.quiver.clone();
        let raw = self.into_raw()?;
        let instance = if require_connected {
            validate_instance(raw)?
        } else {
            validate_instance_allow_disconnected(raw)?
        };
        let ne = instance.quiver().len();
        let b0_sq = match options.b0_sq {
            None => None,
            Some(B0Doc::Uniform(b)) => Some(vec![b.0; ne]),
            Some(B0Doc::PerEdge(v)) => {
                if v.len() != ne {
                    return Err(DocError::BadB0(format!("{} magnitudes for {} edges", v.len(), ne)));
                }
                // document order follows the quiver list; the instance keeps edges sorted
                let sorted = instance.quiver().edges();
                let mut out = vec![Rational::from_integer(0.into()); ne];
                for (e, b) in doc_edges.iter().zip(v) {
                    let k = sorted
                        .binary_search(&(e[0] - 1, e[1] - 1))
                        .expect("validated edge is present");
                    out[k] = b.0;
                }
                Some(out)
            }
        };
        if let Some(b) = &b0_sq {
            if b.iter().any(|x| *x <= Rational::from_integer(0.into())) {
                return Err(DocError::BadB0("edge magnitudes must be positive".into()));
            }
        }
        Ok(LoadedInstance {
            instance,
            b0_sq,
            mode: options.mode.unwrap_or_default(),
        })
    }
}

pub fn load_instance(text: &str, require_connected: bool) -> Result<LoadedInstance, DocError> {
    parse_document(text)?.load(require_connected)
}

impl InstanceDocument {
    /// Document for an instance, using `deg_coeffs`.
    pub fn from_instance(inst: &Instance) -> Self {
        InstanceDocument {
            ambient: AmbientDoc {
                n: inst.ambient().n(),
                m: inst.ambient().m(),
            },
            components: inst
                .components()
                .iter()
                .map(|c| ComponentDoc {
                    name: Some(c.name.clone()),
                    rank: c.rank,
                    deg_coeffs: Some(c.deg_coeffs.coeffs().iter().cloned().map(RationalRepr).collect()),
                    restriction_degree: c.restriction_degree.clone().map(RationalRepr),
                    ..ComponentDoc::default()
                })
                .collect(),
            quiver: inst.quiver().edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            options: OptionsDoc::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

// ---------------------------------------------------------------------------
// reports; fields are declared in alphabetical order

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDoc {
    pub difference: EpsPoly,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<Interval>,
    pub sign: i32,
    pub subset: SubsheafIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    #[serde(with = "rational_vec")]
    pub coords: Vec<Rational>,
    pub minus: SubsheafIndex,
    pub plus: SubsheafIndex,
    pub tight_edges: Vec<[usize; 2]>,
}

impl From<&DualGenerator> for GeneratorDoc {
    fn from(g: &DualGenerator) -> Self {
        GeneratorDoc {
            coords: g.coords.clone(),
            minus: g.minus.clone(),
            plus: g.plus.clone(),
            tight_edges: g.tight_edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<GeneratorDoc>,
    pub pairings: Vec<EpsPoly>,
    pub position: Position,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    #[serde(default, with = "opt_rational", skip_serializing_if = "Option::is_none")]
    pub max_min_t: Option<Rational>,
    pub position: Position,
    #[serde(with = "rational_vec")]
    pub t: Vec<Rational>,
}

impl From<&FlowResult> for FlowDoc {
    fn from(f: &FlowResult) -> Self {
        match f {
            FlowResult::Feasible { max_min_t, t } => FlowDoc {
                max_min_t: max_min_t.clone(),
                position: f.position(),
                t: t.clone(),
            },
            FlowResult::Infeasible => FlowDoc {
                max_min_t: None,
                position: Position::Outside,
                t: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDoc {
    pub b_norm: Float17,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<GeneratorDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<Float17>>,
    #[serde(with = "rational_str")]
    pub eps: Rational,
    pub newton_iters: usize,
    pub residual: Float17,
    pub status: SweepStatus,
    pub t: Vec<Float17>,
    pub x_star: Vec<Float17>,
}

impl SolveDoc {
    pub fn new(eps: &Rational, out: &SolveOutcome) -> Self {
        let sol = out.solution();
        let (status, escape) = match out {
            SolveOutcome::Converged(_) => (SweepStatus::Converged, None),
            SolveOutcome::Boundary(e) => (SweepStatus::Boundary, Some(e)),
            SolveOutcome::Divergent(e) => (SweepStatus::Divergent, Some(e)),
        };
        SolveDoc {
            b_norm: Float17(sol.b_norm),
            certificate: escape.and_then(|e| e.certificate.as_ref()).map(GeneratorDoc::from),
            direction: escape.map(|e| floats(&e.direction)),
            eps: eps.clone(),
            newton_iters: out.iterations(),
            residual: Float17(sol.residual),
            status,
            t: floats(&sol.t),
            x_star: floats(&sol.x_star),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRowDoc {
    pub b_norm: Option<Float17>,
    #[serde(with = "rational_str")]
    pub eps: Rational,
    pub newton_iters: usize,
    pub residual: Option<Float17>,
    pub status: SweepStatus,
}

impl From<&SweepRow> for SweepRowDoc {
    fn from(r: &SweepRow) -> Self {
        SweepRowDoc {
            b_norm: r.b_norm.map(Float17),
            eps: r.eps.clone(),
            newton_iters: r.newton_iters,
            residual: r.residual.map(Float17),
            status: r.status,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictDoc {
    Stable,
    Semistable,
    Unstable,
    Inconclusive,
}

impl From<StabilityKind> for VerdictDoc {
    fn from(k: StabilityKind) -> Self {
        match k {
            StabilityKind::Stable => VerdictDoc::Stable,
            StabilityKind::Semistable => VerdictDoc::Semistable,
            StabilityKind::Unstable => VerdictDoc::Unstable,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_position: Option<ConeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_generators: Option<Vec<GeneratorDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_threshold: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_weight: Option<Vec<EpsPoly>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRowDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<SubsheafIndex>>,
}

impl Report {
    pub fn decide(v: &Verdict) -> Self {
        let deciding = match v.kind {
            StabilityKind::Unstable => Some(Sign::Negative),
            StabilityKind::Semistable => Some(Sign::Zero),
            StabilityKind::Stable => None,
        };
        let mut witnesses: Vec<SubsheafIndex> = v
            .checks
            .iter()
            .filter(|c| Some(c.sign) == deciding)
            .map(|c| c.subset.clone())
            .collect();
        witnesses.sort();
        Report {
            checks: Some(
                v.checks
                    .iter()
                    .map(|c| CheckDoc {
                        difference: c.difference.clone(),
                        root: c.root.interval().cloned(),
                        sign: c.sign.as_i32(),
                        subset: c.subset.clone(),
                    })
                    .collect(),
            ),
            epsilon_threshold: v.epsilon_threshold.clone(),
            mode: Some(Mode::Full),
            verdict: Some(v.kind.into()),
            witnesses: Some(witnesses),
            ..Report::default()
        }
    }

    pub fn two_term(v: &TwoTermVerdict) -> Self {
        let (verdict, witnesses) = match v {
            TwoTermVerdict::Stable => (VerdictDoc::Stable, Vec::new()),
            TwoTermVerdict::Inconclusive { failing } => (VerdictDoc::Inconclusive, vec![failing.clone()]),
        };
        Report {
            mode: Some(Mode::TwoTerm),
            verdict: Some(verdict),
            witnesses: Some(witnesses),
            ..Report::default()
        }
    }

    pub fn cone(weights: Vec<Vec<i64>>, moment_weight: Vec<EpsPoly>, cp: &ConePosition) -> Self {
        Report {
            cone_position: Some(ConeDoc {
                certificate: cp.certificate.as_ref().map(GeneratorDoc::from),
                pairings: cp.pairings.clone(),
                position: cp.position,
            }),
            dual_generators: Some(cp.generators.iter().map(GeneratorDoc::from).collect()),
            moment_weight: Some(moment_weight),
            weights: Some(weights),
            ..Report::default()
        }
    }

    pub fn solve(eps: &Rational, out: &SolveOutcome, flow: &FlowResult) -> Self {
        Report {
            flow: Some(flow.into()),
            solve: Some(SolveDoc::new(eps, out)),
            ..Report::default()
        }
    }

    pub fn sweep(rows: &[SweepRow]) -> Self {
        Report {
            sweep: Some(rows.iter().map(SweepRowDoc::from).collect()),
            ..Report::default()
        }
    }

    /// Canonical pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// CSV with columns `eps, b_norm, residual, status, newton_iters`; `eps` is
/// the exact rational, empty cells mark missing values.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "b_norm", "residual", "status", "newton_iters"])
        .expect("in-memory write");
    let f = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.16e}"));
    for r in rows {
        w.write_record([
            format_rational(&r.eps),
            f(r.b_norm),
            f(r.residual),
            r.status.to_string(),
            r.newton_iters.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
