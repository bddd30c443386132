//! Affine expressions, variables, bounds and constraints shared by every graph layer.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::ModelError;

macro_rules! uuid_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Uuid);

        impl $name {
            pub fn new() -> Self {
                Self(Uuid::new_v4())
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::new()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

uuid_id!(
    /// Identifier of an optinode, unique across every graph hierarchy.
    NodeId
);
uuid_id!(
    /// Identifier of an optiedge or inter-worker edge.
    EdgeId
);
uuid_id!(
    /// Identifier of an optigraph or remote optigraph.
    GraphId
);

/// A variable is addressed by its owning node and a dense per-node index.
///
/// The canonical name lives on the owning node (see [`canonical_name`]); keeping
/// the id `Copy` lets expressions be cheap ordered maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariableId {
    pub node: NodeId,
    pub index: u32,
}

impl VariableId {
    pub fn new(node: NodeId, index: u32) -> Self {
        Self { node, index }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrality {
    Continuous,
    Integer,
}

/// Box bounds plus integrality of a single variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableBounds {
    #[serde(with = "neg_inf_as_null")]
    pub lower: f64,
    #[serde(with = "pos_inf_as_null")]
    pub upper: f64,
    pub integrality: Integrality,
}

impl VariableBounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            integrality: Integrality::Continuous,
        }
    }

    pub fn free() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn non_negative() -> Self {
        Self::new(0.0, f64::INFINITY)
    }

    pub fn fixed(value: f64) -> Self {
        Self::new(value, value)
    }

    pub fn integer(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            integrality: Integrality::Integer,
        }
    }

    pub fn binary() -> Self {
        Self::integer(0.0, 1.0)
    }

    pub fn is_integer(&self) -> bool {
        self.integrality == Integrality::Integer
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.lower.is_nan() || self.upper.is_nan() {
            return Err(ModelError::InvalidBounds {
                lower: self.lower,
                upper: self.upper,
            });
        }
        if self.lower > self.upper || self.lower == f64::INFINITY || self.upper == f64::NEG_INFINITY {
            return Err(ModelError::InvalidBounds {
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }
}

impl Default for VariableBounds {
    fn default() -> Self {
        Self::free()
    }
}

/// `Σ coefficient·variable + constant`. Exact zeros are never stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    #[serde(with = "term_list")]
    terms: BTreeMap<VariableId, f64>,
    constant: f64,
}

impl AffineExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn term(var: VariableId, coefficient: f64) -> Self {
        let mut expr = Self::new();
        expr.add_term(var, coefficient);
        expr
    }

    pub fn from_terms<I: IntoIterator<Item = (VariableId, f64)>>(terms: I, constant: f64) -> Self {
        let mut expr = Self::constant(constant);
        for (var, coefficient) in terms {
            expr.add_term(var, coefficient);
        }
        expr
    }

    /// Accumulates `coefficient·var`, removing the entry if it cancels to exactly zero.
    pub fn add_term(&mut self, var: VariableId, coefficient: f64) {
        if coefficient == 0.0 {
            return;
        }
        let entry = self.terms.entry(var).or_insert(0.0);
        *entry += coefficient;
        if *entry == 0.0 {
            self.terms.remove(&var);
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn terms(&self) -> impl Iterator<Item = (VariableId, f64)> + '_ {
        self.terms.iter().map(|(v, c)| (*v, *c))
    }

    pub fn coefficient(&self, var: VariableId) -> f64 {
        self.terms.get(&var).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn variables(&self) -> impl Iterator<Item = VariableId> + '_ {
        self.terms.keys().copied()
    }

    /// Evaluates the expression; variables missing from `value` are an error of the caller and panic.
    pub fn evaluate<F: Fn(VariableId) -> f64>(&self, value: F) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * value(*v)).sum::<f64>()
    }

    /// Replaces every variable through `map`, merging terms that collide.
    pub fn map_variables<F: Fn(VariableId) -> VariableId>(&self, map: F) -> Self {
        Self::from_terms(self.terms().map(|(v, c)| (map(v), c)), self.constant)
    }
}

/// Term-wise sum of two expressions.
pub fn expr_add(a: &AffineExpr, b: &AffineExpr) -> AffineExpr {
    let mut out = a.clone();
    for (var, coefficient) in b.terms() {
        out.add_term(var, coefficient);
    }
    out.constant += b.constant;
    out
}

/// Multiplies every coefficient and the constant by `k`.
pub fn expr_scale(a: &AffineExpr, k: f64) -> AffineExpr {
    if k == 0.0 {
        return AffineExpr::new();
    }
    AffineExpr {
        terms: a
            .terms
            .iter()
            .filter_map(|(v, c)| {
                let scaled = c * k;
                (scaled != 0.0).then_some((*v, scaled))
            })
            .collect(),
        constant: a.constant * k,
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: AffineExpr) -> AffineExpr {
        expr_add(&self, &rhs)
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        expr_add(&self, &expr_scale(&rhs, -1.0))
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(self, k: f64) -> AffineExpr {
        expr_scale(&self, k)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        expr_scale(&self, -1.0)
    }
}

impl From<VariableId> for AffineExpr {
    fn from(var: VariableId) -> Self {
        AffineExpr::term(var, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    LessEqual,
    #[serde(rename = "==")]
    Equal,
    #[serde(rename = ">=")]
    GreaterEqual,
}

impl Sense {
    pub fn symbol(&self) -> &'static str {
        match self {
            Sense::LessEqual => "<=",
            Sense::Equal => "==",
            Sense::GreaterEqual => ">=",
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `body sense rhs`. A constant inside `body` is moved to the right-hand side when flattened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub body: AffineExpr,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(body: AffineExpr, sense: Sense, rhs: f64) -> Self {
        Self { body, sense, rhs }
    }

    pub fn le(body: AffineExpr, rhs: f64) -> Self {
        Self::new(body, Sense::LessEqual, rhs)
    }

    pub fn eq(body: AffineExpr, rhs: f64) -> Self {
        Self::new(body, Sense::Equal, rhs)
    }

    pub fn ge(body: AffineExpr, rhs: f64) -> Self {
        Self::new(body, Sense::GreaterEqual, rhs)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.rhs.is_finite() || !self.body.constant_term().is_finite() {
            return Err(ModelError::NonFinite("constraint right-hand side".into()));
        }
        if self.body.terms().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFinite("constraint coefficient".into()));
        }
        Ok(())
    }

    /// Right-hand side after moving the body constant across.
    pub fn normalized_rhs(&self) -> f64 {
        self.rhs - self.body.constant_term()
    }

    /// Signed violation: positive means the constraint is violated by that amount.
    pub fn violation<F: Fn(VariableId) -> f64>(&self, value: F) -> f64 {
        let lhs = self.body.evaluate(value);
        match self.sense {
            Sense::LessEqual => lhs - self.rhs,
            Sense::GreaterEqual => self.rhs - lhs,
            Sense::Equal => (lhs - self.rhs).abs(),
        }
    }
}

/// Builds the canonical variable name `<node>[:<var>]` or `<node>[:<var>][i,j,..]`.
pub fn canonical_name(node_label: &str, var_name: &str, subscripts: &[i64]) -> Result<String, ModelError> {
    validate_label(node_label)?;
    validate_label(var_name)?;
    let mut name = format!("{node_label}[:{var_name}]");
    if !subscripts.is_empty() {
        let joined: Vec<String> = subscripts.iter().map(i64::to_string).collect();
        name.push('[');
        name.push_str(&joined.join(","));
        name.push(']');
    }
    Ok(name)
}

/// The `[:<var>][<subscripts>]` part of a canonical name, shared by copies of a variable on different nodes.
pub fn name_suffix(canonical: &str) -> &str {
    match canonical.find("[:") {
        Some(pos) => &canonical[pos..],
        None => canonical,
    }
}

pub(crate) fn validate_label(label: &str) -> Result<(), ModelError> {
    if label.is_empty() {
        return Err(ModelError::InvalidLabel {
            label: label.to_string(),
            reason: "label is empty",
        });
    }
    if label.contains(['[', ']']) {
        return Err(ModelError::InvalidLabel {
            label: label.to_string(),
            reason: "label contains '[' or ']'",
        });
    }
    if label.contains(['/', ':', ',']) || label.chars().any(char::is_whitespace) {
        return Err(ModelError::InvalidLabel {
            label: label.to_string(),
            reason: "label contains '/', ':', ',' or whitespace",
        });
    }
    Ok(())
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod pos_inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Terms travel as `[[node, index, coefficient], ...]`.
mod term_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{NodeId, VariableId};

    pub fn serialize<S: Serializer>(terms: &BTreeMap<VariableId, f64>, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<(NodeId, u32, f64)> = terms.iter().map(|(v, c)| (v.node, v.index, *c)).collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<VariableId, f64>, D::Error> {
        let list = Vec::<(NodeId, u32, f64)>::deserialize(d)?;
        let mut terms = BTreeMap::new();
        for (node, index, coefficient) in list {
            if coefficient != 0.0 {
                *terms.entry(VariableId::new(node, index)).or_insert(0.0) += coefficient;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Ok(terms)
    }
}
