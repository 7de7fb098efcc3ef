//! Risk-model data types, JSON parsing and structural validation.
//!
//! A model is a forest of risk items linked by probabilistic transitions.
//! Items may additionally belong to an XOR group, in which case exactly one
//! member of the group fires intrinsically in every scenario.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ItemId = u32;

/// Tolerance for the XOR-group probability sum.
pub const XOR_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskItem {
    pub id: ItemId,
    #[serde(default)]
    pub name: String,
    /// Intrinsic trigger probability.
    pub p: f64,
    /// Loss generated when the item is triggered.
    #[serde(default)]
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: ItemId,
    pub to: ItemId,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct XorGroup {
    pub members: Vec<ItemId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModTarget {
    Item(ItemId),
    Transition { from: ItemId, to: ItemId },
}

impl fmt::Display for ModTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModTarget::Item(id) => write!(f, "p{id}"),
            ModTarget::Transition { from, to } => write!(f, "p{from}->{to}"),
        }
    }
}

/// A single probability shift selected by one setting of the modification
/// register. Index 0 is reserved for "no modification".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modification {
    pub index: u32,
    pub target: ModTarget,
    pub delta: f64,
}

/// On-disk representation of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub items: Vec<RiskItem>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub xor_groups: Vec<XorGroup>,
    #[serde(default)]
    pub modifications: Vec<Modification>,
    pub threshold: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationKind {
    Cycle,
    SelfLoop,
    ProbabilityRange,
    XorSum,
    XorSize,
    XorMembership,
    DanglingId,
    DuplicateId,
    DuplicateTransition,
    DuplicateModification,
    ReservedIndex,
    ModificationRange,
    Empty,
}

impl fmt::Display for ValidationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValidationKind::Cycle => "cycle",
            ValidationKind::SelfLoop => "self-loop",
            ValidationKind::ProbabilityRange => "probability-range",
            ValidationKind::XorSum => "xor-sum",
            ValidationKind::XorSize => "xor-size",
            ValidationKind::XorMembership => "xor-membership",
            ValidationKind::DanglingId => "dangling-id",
            ValidationKind::DuplicateId => "duplicate-id",
            ValidationKind::DuplicateTransition => "duplicate-transition",
            ValidationKind::DuplicateModification => "duplicate-modification",
            ValidationKind::ReservedIndex => "reserved-index",
            ValidationKind::ModificationRange => "modification-range",
            ValidationKind::Empty => "empty",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error [{kind}]: {detail}")]
    Validation { kind: ValidationKind, detail: String },
    #[error("enumeration too large: {scenarios} scenarios (limit {limit})")]
    EnumerationTooLarge { scenarios: u128, limit: u128 },
    #[error("model has {0} items; at most 64 supported for bitmask evaluation")]
    TooManyItems(usize),
}

impl ModelError {
    pub fn kind(&self) -> Option<ValidationKind> {
        match self {
            ModelError::Validation { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

fn invalid(kind: ValidationKind, detail: impl Into<String>) -> ModelError {
    ModelError::Validation {
        kind,
        detail: detail.into(),
    }
}

/// Validated risk model with precomputed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    file: ModelFile,
    index: BTreeMap<ItemId, usize>,
    topo: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    xor_of: Vec<Option<usize>>,
}

/// Parse and validate a model from JSON text.
pub fn parse_model(text: &str) -> Result<RiskModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    RiskModel::new(file)
}

fn check_probability(p: f64, what: impl FnOnce() -> String) -> Result<(), ModelError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(
            ValidationKind::ProbabilityRange,
            format!("{} = {p} is outside [0, 1]", what()),
        ))
    }
}

impl RiskModel {
    pub fn new(file: ModelFile) -> Result<Self, ModelError> {
        if file.items.is_empty() {
            return Err(invalid(ValidationKind::Empty, "model has no items"));
        }
        let mut index = BTreeMap::new();
        for (i, item) in file.items.iter().enumerate() {
            if index.insert(item.id, i).is_some() {
                return Err(invalid(
                    ValidationKind::DuplicateId,
                    format!("item id {} appears twice", item.id),
                ));
            }
            check_probability(item.p, || format!("p of item {}", item.id))?;
        }

        let n = file.items.len();
        let mut incoming = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (t, tr) in file.transitions.iter().enumerate() {
            let (Some(&from), Some(&to)) = (index.get(&tr.from), index.get(&tr.to)) else {
                return Err(invalid(
                    ValidationKind::DanglingId,
                    format!("transition {}->{} references an unknown item", tr.from, tr.to),
                ));
            };
            if from == to {
                return Err(invalid(
                    ValidationKind::SelfLoop,
                    format!("transition {}->{} starts and ends at the same item", tr.from, tr.to),
                ));
            }
            if !seen.insert((tr.from, tr.to)) {
                return Err(invalid(
                    ValidationKind::DuplicateTransition,
                    format!("transition {}->{} appears twice", tr.from, tr.to),
                ));
            }
            check_probability(tr.p, || format!("p of transition {}->{}", tr.from, tr.to))?;
            incoming[to].push(t);
        }

        let mut xor_of = vec![None; n];
        for (g, group) in file.xor_groups.iter().enumerate() {
            if group.members.len() < 2 {
                return Err(invalid(
                    ValidationKind::XorSize,
                    format!("xor group {g} has fewer than two members"),
                ));
            }
            let mut sum = 0.0;
            for id in &group.members {
                let Some(&i) = index.get(id) else {
                    return Err(invalid(
                        ValidationKind::DanglingId,
                        format!("xor group {g} references unknown item {id}"),
                    ));
                };
                if xor_of[i].is_some() {
                    return Err(invalid(
                        ValidationKind::XorMembership,
                        format!("item {id} belongs to more than one xor group"),
                    ));
                }
                xor_of[i] = Some(g);
                sum += file.items[i].p;
            }
            if (sum - 1.0).abs() > XOR_SUM_TOLERANCE {
                return Err(invalid(
                    ValidationKind::XorSum,
                    format!("xor group {g} probabilities sum to {sum}, expected 1"),
                ));
            }
        }

        let topo = topological_order(&file, &index)?;

        let model = RiskModel {
            file,
            index,
            topo,
            incoming,
            xor_of,
        };
        model.validate_modifications()?;
        Ok(model)
    }

    fn validate_modifications(&self) -> Result<(), ModelError> {
        let mut indices = BTreeSet::new();
        for m in &self.file.modifications {
            if m.index == 0 {
                return Err(invalid(
                    ValidationKind::ReservedIndex,
                    "modification index 0 is reserved for the unmodified model",
                ));
            }
            if !indices.insert(m.index) {
                return Err(invalid(
                    ValidationKind::DuplicateModification,
                    format!("modification index {} appears twice", m.index),
                ));
            }
            if !m.delta.is_finite() {
                return Err(invalid(
                    ValidationKind::ModificationRange,
                    format!("modification {} has a non-finite delta", m.index),
                ));
            }
            self.apply_modification(m).map_err(|e| match e {
                ModelError::Validation { kind, detail } => {
                    let kind = match kind {
                        ValidationKind::ProbabilityRange | ValidationKind::XorSum => {
                            ValidationKind::ModificationRange
                        }
                        other => other,
                    };
                    invalid(kind, format!("modification {}: {detail}", m.index))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn file(&self) -> &ModelFile {
        &self.file
    }

    pub fn items(&self) -> &[RiskItem] {
        &self.file.items
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.file.transitions
    }

    pub fn xor_groups(&self) -> &[XorGroup] {
        &self.file.xor_groups
    }

    pub fn modifications(&self) -> &[Modification] {
        &self.file.modifications
    }

    pub fn threshold(&self) -> u64 {
        self.file.threshold
    }

    pub fn with_threshold(&self, threshold: u64) -> RiskModel {
        let mut m = self.clone();
        m.file.threshold = threshold;
        m
    }

    pub fn item_index(&self, id: ItemId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Item indices in topological order, ties broken by ascending id.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Indices into `transitions()` of transitions ending at item `i`.
    pub fn incoming(&self, i: usize) -> &[usize] {
        &self.incoming[i]
    }

    pub fn xor_group_of(&self, i: usize) -> Option<usize> {
        self.xor_of[i]
    }

    pub fn total_cost(&self) -> u64 {
        self.file.items.iter().map(|i| i.cost).sum()
    }

    pub fn transition_index(&self, from: ItemId, to: ItemId) -> Option<usize> {
        self.file
            .transitions
            .iter()
            .position(|t| t.from == from && t.to == to)
    }

    /// Largest modification index, or 0 when the model has none.
    pub fn max_modification_index(&self) -> u32 {
        self.file
            .modifications
            .iter()
            .map(|m| m.index)
            .max()
            .unwrap_or(0)
    }

    pub fn modification(&self, index: u32) -> Option<&Modification> {
        self.file.modifications.iter().find(|m| m.index == index)
    }

    /// Number of probability parameters (item intrinsics plus transitions).
    pub fn parameter_count(&self) -> usize {
        self.file.items.len() + self.file.transitions.len()
    }

    /// The model with modification `index` applied. Index 0 and indices with
    /// no table entry yield the unmodified model.
    pub fn with_modification(&self, index: u32) -> Result<RiskModel, ModelError> {
        match self.modification(index) {
            None => Ok(self.clone()),
            Some(m) => self.apply_modification(m),
        }
    }

    fn apply_modification(&self, m: &Modification) -> Result<RiskModel, ModelError> {
        let mut out = self.clone();
        match m.target {
            ModTarget::Item(id) => {
                let i = self.item_index(id).ok_or_else(|| {
                    invalid(
                        ValidationKind::DanglingId,
                        format!("modification targets unknown item {id}"),
                    )
                })?;
                let old = self.file.items[i].p;
                let new = old + m.delta;
                check_probability(new, || format!("modified p of item {id}"))?;
                out.file.items[i].p = new;
                if let Some(g) = self.xor_of[i] {
                    // Remaining members absorb the shift in proportion to their mass.
                    let rest = 1.0 - old;
                    for &other in &self.file.xor_groups[g].members {
                        let j = self.index[&other];
                        if j == i {
                            continue;
                        }
                        let q = self.file.items[j].p;
                        let scaled = if rest > 0.0 {
                            q * (1.0 - new) / rest
                        } else {
                            (1.0 - new) / (self.file.xor_groups[g].members.len() - 1) as f64
                        };
                        check_probability(scaled, || format!("rebalanced p of item {other}"))?;
                        out.file.items[j].p = scaled;
                    }
                }
            }
            ModTarget::Transition { from, to } => {
                let t = self.transition_index(from, to).ok_or_else(|| {
                    invalid(
                        ValidationKind::DanglingId,
                        format!("modification targets unknown transition {from}->{to}"),
                    )
                })?;
                let new = self.file.transitions[t].p + m.delta;
                check_probability(new, || format!("modified p of transition {from}->{to}"))?;
                out.file.transitions[t].p = new;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("model file serializes")
    }
}

fn topological_order(
    file: &ModelFile,
    index: &BTreeMap<ItemId, usize>,
) -> Result<Vec<usize>, ModelError> {
    let n = file.items.len();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in &file.transitions {
        let (a, b) = (index[&t.from], index[&t.to]);
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut ready: BinaryHeap<Reverse<(ItemId, usize)>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| Reverse((file.items[i].id, i)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, i))) = ready.pop() {
        order.push(i);
        for &j in &out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse((file.items[j].id, j)));
            }
        }
    }
    if order.len() != n {
        let stuck: Vec<String> = (0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| file.items[i].id.to_string())
            .collect();
        return Err(invalid(
            ValidationKind::Cycle,
            format!("transition graph has a cycle through items {}", stuck.join(", ")),
        ));
    }
    Ok(order)
}

/// The four-item model with one XOR pair and two transitions used throughout
/// the documentation and tests.
pub fn fig1_model() -> RiskModel {
    parse_model(FIG1_JSON).expect("built-in model is valid")
}

pub const FIG1_JSON: &str = r#"{
  "items": [
    { "id": 1, "name": "country X status quo", "p": 0.8, "cost": 0 },
    { "id": 2, "name": "country X political crisis", "p": 0.2, "cost": 1 },
    { "id": 3, "name": "country X rating downgrade", "p": 0.1, "cost": 4 },
    { "id": 4, "name": "FX volatility increases", "p": 0.05, "cost": 8 }
  ],
  "transitions": [
    { "from": 2, "to": 3, "p": 0.5 },
    { "from": 2, "to": 4, "p": 0.4 }
  ],
  "xor_groups": [[1, 2]],
  "modifications": [
    { "index": 1, "target": { "item": 2 }, "delta": 0.1 },
    { "index": 2, "target": { "item": 3 }, "delta": 0.1 },
    { "index": 3, "target": { "item": 4 }, "delta": 0.1 },
    { "index": 4, "target": { "transition": { "from": 2, "to": 3 } }, "delta": 0.1 },
    { "index": 5, "target": { "transition": { "from": 2, "to": 4 } }, "delta": 0.1 }
  ],
  "threshold": 12
}
"#;

/// Modification index that shifts mass toward the crisis item in the
/// built-in four-item model.
pub const FIG1_CRISIS_MODIFICATION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_parses() {
        let m = fig1_model();
        assert_eq!(m.items().len(), 4);
        assert_eq!(m.items()[1].p, 0.2);
        let t23 = m.transition_index(2, 3).unwrap();
        let t24 = m.transition_index(2, 4).unwrap();
        assert_eq!(m.transitions()[t23].p, 0.5);
        assert_eq!(m.transitions()[t24].p, 0.4);
        assert_eq!(m.threshold(), 12);
        assert_eq!(m.total_cost(), 13);
        assert_eq!(m.max_modification_index(), 5);
    }

    #[test]
    fn cycle_is_rejected() {
        let text = r#"{"items":[{"id":1,"p":0.1},{"id":2,"p":0.2}],
            "transitions":[{"from":1,"to":2,"p":0.5},{"from":2,"to":1,"p":0.5}],
            "threshold":1}"#;
        let err = parse_model(text).unwrap_err();
        assert_eq!(err.kind(), Some(ValidationKind::Cycle));
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn xor_sum_is_checked() {
        let text = r#"{"items":[{"id":1,"p":0.7},{"id":2,"p":0.2}],
            "xor_groups":[[1,2]], "threshold":1}"#;
        let err = parse_model(text).unwrap_err();
        assert_eq!(err.kind(), Some(ValidationKind::XorSum));
        assert!(err.to_string().contains("xor-sum"));
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_model("{\n  \"items\": [ ,\n}").unwrap_err();
        match err {
            ModelError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_and_range_errors() {
        let dangling = r#"{"items":[{"id":1,"p":0.1}],
            "transitions":[{"from":1,"to":9,"p":0.5}], "threshold":1}"#;
        assert_eq!(
            parse_model(dangling).unwrap_err().kind(),
            Some(ValidationKind::DanglingId)
        );
        let range = r#"{"items":[{"id":1,"p":1.5}], "threshold":1}"#;
        assert_eq!(
            parse_model(range).unwrap_err().kind(),
            Some(ValidationKind::ProbabilityRange)
        );
        let dup = r#"{"items":[{"id":1,"p":0.5},{"id":1,"p":0.5}], "threshold":1}"#;
        assert_eq!(
            parse_model(dup).unwrap_err().kind(),
            Some(ValidationKind::DuplicateId)
        );
    }

    #[test]
    fn modification_validation() {
        let reserved = r#"{"items":[{"id":1,"p":0.5}],
            "modifications":[{"index":0,"target":{"item":1},"delta":0.1}], "threshold":1}"#;
        assert_eq!(
            parse_model(reserved).unwrap_err().kind(),
            Some(ValidationKind::ReservedIndex)
        );
        let out_of_range = r#"{"items":[{"id":1,"p":0.95}],
            "modifications":[{"index":1,"target":{"item":1},"delta":0.1}], "threshold":1}"#;
        assert_eq!(
            parse_model(out_of_range).unwrap_err().kind(),
            Some(ValidationKind::ModificationRange)
        );
    }

    #[test]
    fn xor_modification_shifts_mass_within_group() {
        let m = fig1_model().with_modification(FIG1_CRISIS_MODIFICATION).unwrap();
        assert!((m.items()[0].p - 0.7).abs() < 1e-15);
        assert!((m.items()[1].p - 0.3).abs() < 1e-15);
        // Unknown settings leave the model untouched.
        assert_eq!(fig1_model().with_modification(7).unwrap(), fig1_model());
    }

    #[test]
    fn topological_order_breaks_ties_by_id() {
        let text = r#"{"items":[{"id":5,"p":0.1},{"id":3,"p":0.1},{"id":1,"p":0.1}],
            "transitions":[{"from":5,"to":1,"p":0.5}], "threshold":1}"#;
        let m = parse_model(text).unwrap();
        let ids: Vec<_> = m
            .topological_order()
            .iter()
            .map(|&i| m.items()[i].id)
            .collect();
        assert_eq!(ids, vec![3, 5, 1]);
    }
}
