//! Takagi-Sugeno fuzzy inference with sigmoidal memberships.
//!
//! Rule bases are plain data: a set of variables, each with named labels and
//! a sigmoid per label, and a list of rules whose antecedents are
//! `(variable, label)` pairs joined by `min`. Consequents are constant
//! outputs, and the crisp score is the strength-weighted average of the
//! constants, optionally further weighted by a per-rule confidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of rule confidences.
pub const CONFIDENCE_SUM_TOL: f64 = 1e-9;

/// Sigmoid `1 / (1 + exp(-a (x - c)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    pub a: f64,
    pub c: f64,
}

impl MembershipFunction {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigmoid needs finite a != 0 and finite c, got a={a}, c={c}"
            )));
        }
        Ok(MembershipFunction { a, c })
    }

    pub fn degree(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.a * (x - self.c)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Consequent {
    Low,
    Average,
    High,
}

impl Consequent {
    pub fn value(self) -> f64 {
        match self {
            Consequent::Low => 10.0,
            Consequent::Average => 50.0,
            Consequent::High => 100.0,
        }
    }
}

/// Strength and output constant of one fired rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleActivation {
    pub strength: f64,
    pub z: f64,
}

/// Crisp output of a rule base, always within `[10, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FisScore(pub f64);

/// `min` over the antecedent degrees. An empty list gives 1.
pub fn rule_strength(degrees: impl IntoIterator<Item = f64>) -> f64 {
    degrees.into_iter().fold(1.0, f64::min)
}

/// `Σ ω z / Σ ω`, or `None` when no rule fires.
pub fn defuzzify_tsk(activations: &[RuleActivation]) -> Option<FisScore> {
    let den: f64 = activations.iter().map(|r| r.strength).sum();
    if den <= 0.0 {
        return None;
    }
    let num: f64 = activations.iter().map(|r| r.strength * r.z).sum();
    Some(FisScore(clamp_score(num / den)))
}

/// `Σ ω a z / Σ a ω`, or `None` when the denominator vanishes.
pub fn defuzzify_weighted(activations: &[RuleActivation], confidences: &[f64]) -> Option<FisScore> {
    debug_assert_eq!(activations.len(), confidences.len());
    let den: f64 = activations
        .iter()
        .zip(confidences)
        .map(|(r, a)| a * r.strength)
        .sum();
    if den <= 0.0 {
        return None;
    }
    let num: f64 = activations
        .iter()
        .zip(confidences)
        .map(|(r, a)| a * r.strength * r.z)
        .sum();
    Some(FisScore(clamp_score(num / den)))
}

// Rounding can push a convex combination a hair outside its hull.
fn clamp_score(z: f64) -> f64 {
    z.clamp(Consequent::Low.value(), Consequent::High.value())
}

/// Serialized form of a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub antecedents: Vec<(String, String)>,
    pub consequent: Consequent,
    /// Confidence `a_i`; omitted on every rule means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBaseSpec {
    pub variables: BTreeMap<String, BTreeMap<String, MembershipFunction>>,
    pub rules: Vec<FuzzyRule>,
}

#[derive(Debug, Clone)]
struct Variable {
    name: String,
    labels: Vec<(String, MembershipFunction)>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    antecedents: Vec<(usize, usize)>,
    z: f64,
}

/// A validated rule base with names resolved to indices.
#[derive(Debug, Clone)]
pub struct RuleBase {
    spec: RuleBaseSpec,
    variables: Vec<Variable>,
    rules: Vec<CompiledRule>,
    confidences: Vec<f64>,
}

/// Membership degrees per variable and label. A variable that received no
/// crisp input has no degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Fuzzified {
    degrees: Vec<Option<Vec<f64>>>,
}

impl RuleBase {
    pub fn new(spec: RuleBaseSpec) -> Result<Self> {
        if spec.rules.is_empty() {
            return Err(Error::RuleBase("no rules".into()));
        }
        let mut variables = Vec::with_capacity(spec.variables.len());
        for (name, labels) in &spec.variables {
            let mut resolved = Vec::with_capacity(labels.len());
            for (label, mf) in labels {
                resolved.push((label.clone(), MembershipFunction::new(mf.a, mf.c)?));
            }
            variables.push(Variable {
                name: name.clone(),
                labels: resolved,
            });
        }

        let mut rules = Vec::with_capacity(spec.rules.len());
        for (i, rule) in spec.rules.iter().enumerate() {
            if rule.antecedents.is_empty() {
                return Err(Error::RuleBase(format!("rule {} has no antecedent", i + 1)));
            }
            let mut antecedents = Vec::with_capacity(rule.antecedents.len());
            for (var, label) in &rule.antecedents {
                let vi = variables
                    .iter()
                    .position(|v| &v.name == var)
                    .ok_or_else(|| Error::MissingVariable(var.clone()))?;
                let li = variables[vi]
                    .labels
                    .iter()
                    .position(|(l, _)| l == label)
                    .ok_or_else(|| Error::UnknownLabel {
                        variable: var.clone(),
                        label: label.clone(),
                    })?;
                antecedents.push((vi, li));
            }
            rules.push(CompiledRule {
                antecedents,
                z: rule.consequent.value(),
            });
        }

        let confidences = resolve_confidences(&spec.rules)?;
        Ok(RuleBase {
            spec,
            variables,
            rules,
            confidences,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn spec(&self) -> &RuleBaseSpec {
        &self.spec
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.spec.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn membership(&self, variable: &str, label: &str) -> Option<MembershipFunction> {
        self.variables
            .iter()
            .find(|v| v.name == variable)?
            .labels
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, mf)| *mf)
    }

    /// Degrees for every label of every variable that has an input.
    pub fn fuzzify(&self, inputs: &[(&str, f64)]) -> Fuzzified {
        let degrees = self
            .variables
            .iter()
            .map(|v| {
                inputs
                    .iter()
                    .find(|(name, _)| *name == v.name)
                    .map(|&(_, x)| v.labels.iter().map(|(_, mf)| mf.degree(x)).collect())
            })
            .collect();
        Fuzzified { degrees }
    }

    /// Fuzzified values with nothing set, for injecting degrees directly.
    pub fn empty_degrees(&self) -> Fuzzified {
        Fuzzified {
            degrees: vec![None; self.variables.len()],
        }
    }

    /// Overrides one label's degree. Other labels of a variable that had no
    /// input default to 0.
    pub fn set_degree(
        &self,
        f: &mut Fuzzified,
        variable: &str,
        label: &str,
        degree: f64,
    ) -> Result<()> {
        let vi = self
            .variables
            .iter()
            .position(|v| v.name == variable)
            .ok_or_else(|| Error::MissingVariable(variable.to_string()))?;
        let li = self.variables[vi]
            .labels
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel {
                variable: variable.to_string(),
                label: label.to_string(),
            })?;
        let n = self.variables[vi].labels.len();
        f.degrees[vi].get_or_insert_with(|| vec![0.0; n])[li] = degree;
        Ok(())
    }

    /// Strength of rule `index` (zero-based).
    pub fn rule_strength(&self, index: usize, f: &Fuzzified) -> Result<f64> {
        let rule = &self.rules[index];
        let mut degrees = Vec::with_capacity(rule.antecedents.len());
        for &(vi, li) in &rule.antecedents {
            match &f.degrees[vi] {
                Some(d) => degrees.push(d[li]),
                None => return Err(Error::MissingVariable(self.variables[vi].name.clone())),
            }
        }
        Ok(rule_strength(degrees))
    }

    pub fn activations(&self, f: &Fuzzified) -> Result<Vec<RuleActivation>> {
        (0..self.rules.len())
            .map(|i| {
                Ok(RuleActivation {
                    strength: self.rule_strength(i, f)?,
                    z: self.rules[i].z,
                })
            })
            .collect()
    }

    /// Confidence-weighted score, `None` when no rule fires.
    pub fn score(&self, inputs: &[(&str, f64)]) -> Result<Option<FisScore>> {
        let acts = self.activations(&self.fuzzify(inputs))?;
        Ok(defuzzify_weighted(&acts, &self.confidences))
    }
}

fn resolve_confidences(rules: &[FuzzyRule]) -> Result<Vec<f64>> {
    let given: Vec<f64> = rules.iter().filter_map(|r| r.confidence).collect();
    if given.is_empty() {
        return Ok(vec![1.0 / rules.len() as f64; rules.len()]);
    }
    if given.len() != rules.len() {
        return Err(Error::RuleBase(
            "confidence must be given on every rule or on none".into(),
        ));
    }
    if given.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::RuleBase("confidences must be non-negative".into()));
    }
    let sum: f64 = given.iter().sum();
    if (sum - 1.0).abs() > CONFIDENCE_SUM_TOL {
        return Err(Error::RuleBase(format!(
            "confidences sum to {sum}, expected 1"
        )));
    }
    Ok(given)
}
