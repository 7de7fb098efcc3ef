//! Compiler from [`RiskModel`] to the state-preparation circuit RM.
//!
//! Qubit roster, low to high: QAE output, modification register, item qubits
//! (descending item id, so the first item sits highest), tree ancillas, cost
//! register, indicator, phase ancilla, search phase qubit. Absent registers
//! take no qubits. With every option enabled for the four-item example this
//! reproduces the q0…q21 numbering used throughout the docs.

use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Control, Gate, Qubit, Register};
use crate::model::{ModelError, RiskModel};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("unsupported structure: {0}")]
    Unsupported(String),
    #[error("cost register of {width} qubits cannot hold {needed}")]
    RegisterTooNarrow { needed: u64, width: usize },
    #[error("threshold mode {0:?} does not apply to this model")]
    ThresholdNotApplicable(ThresholdMode),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// θ = 2·asin(√p), so that U3(θ)|0⟩ reads 1 with probability p.
pub fn angle_for_probability(p: f64) -> Result<f64, CompileError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(CompileError::Probability(p));
    }
    Ok(2.0 * p.sqrt().asin())
}

fn rotation(p: f64, target: Qubit) -> Result<Gate, CompileError> {
    Ok(Gate::u3(angle_for_probability(p.clamp(0.0, 1.0))?, target))
}

/// How the indicator qubit learns whether loss ≥ threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum ThresholdMode {
    /// First applicable of `AllItems`, `HighBits`, `Comparator`.
    #[default]
    Auto,
    /// No cost register: the threshold is reached exactly when every item
    /// fires (all costs positive and dropping any item falls below A).
    AllItems,
    /// A = 2^w − 2^j on a w-bit register: loss ≥ A iff the top w−j bits are set.
    HighBits,
    /// Add the two's complement of A, copy the inverted sign bit, subtract again.
    Comparator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum AdderStyle {
    /// Cascades of multi-controlled X gates.
    #[default]
    Ripple,
    /// One increment gate per power of two.
    Native,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutOptions {
    pub n_ae: usize,
    pub modifications: bool,
    /// `None` leaves out the cost register and indicator.
    pub threshold: Option<ThresholdMode>,
    pub phase_ancilla: bool,
    pub search_phase: bool,
    pub adder: AdderStyle,
}

impl LayoutOptions {
    /// Item qubits only.
    pub fn bare() -> Self {
        LayoutOptions {
            n_ae: 0,
            modifications: false,
            threshold: None,
            phase_ancilla: false,
            search_phase: false,
            adder: AdderStyle::Ripple,
        }
    }

    pub fn with_modifications() -> Self {
        LayoutOptions {
            modifications: true,
            ..Self::bare()
        }
    }

    /// Modifications, cost register and indicator.
    pub fn risk_model() -> Self {
        LayoutOptions {
            threshold: Some(ThresholdMode::Auto),
            ..Self::with_modifications()
        }
    }

    /// Everything one QRM operator needs.
    pub fn grover_operator() -> Self {
        LayoutOptions {
            phase_ancilla: true,
            ..Self::risk_model()
        }
    }

    pub fn qae(n_ae: usize) -> Self {
        LayoutOptions {
            n_ae,
            ..Self::grover_operator()
        }
    }

    pub fn search(n_ae: usize) -> Self {
        LayoutOptions {
            search_phase: true,
            ..Self::qae(n_ae)
        }
    }

    pub fn threshold_mode(mut self, mode: ThresholdMode) -> Self {
        self.threshold = Some(mode);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ResolvedThreshold {
    AllItems,
    /// Cost-register positions that must all be set.
    HighBits { from_bit: usize },
    /// Two's complement of the (clamped) threshold on the cost register.
    Comparator { complement: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterLayout {
    pub n_qubits: usize,
    pub output: Range<Qubit>,
    pub modification: Range<Qubit>,
    /// Qubit of each item, indexed like `model.items()`.
    pub items: Vec<Qubit>,
    pub ancillas: Range<Qubit>,
    pub cost: Range<Qubit>,
    pub indicator: Option<Qubit>,
    pub phase: Option<Qubit>,
    pub search_phase: Option<Qubit>,
    pub threshold: Option<ResolvedThreshold>,
    pub adder: AdderStyle,
}

/// Number of bits needed to write `v` (0 for 0).
pub fn bit_width(v: u64) -> usize {
    (u64::BITS - v.leading_zeros()) as usize
}

fn all_items_applies(model: &RiskModel) -> bool {
    let total = model.total_cost();
    let min = model.items().iter().map(|i| i.cost).min().unwrap_or(0);
    min > 0 && model.threshold() <= total && total - min < model.threshold()
}

fn high_bits_from(model: &RiskModel) -> Option<usize> {
    let w = bit_width(model.total_cost());
    let a = model.threshold();
    (0..w).find(|&j| a == (1u64 << w) - (1u64 << j))
}

/// Ancilla qubits a transition tree over `m` sources needs.
fn tree_ancillas(m: usize) -> usize {
    m.saturating_sub(1)
}

impl RegisterLayout {
    pub fn new(model: &RiskModel, opts: &LayoutOptions) -> Result<Self, CompileError> {
        let n_items = model.items().len();
        let n_anc: usize = (0..n_items)
            .map(|i| {
                let m = model.incoming(i).len();
                if m >= 2 { tree_ancillas(m) } else { 0 }
            })
            .sum();
        let n_s = if opts.modifications {
            bit_width(model.max_modification_index() as u64)
        } else {
            0
        };
        let (threshold, n_c) = match opts.threshold {
            None => (None, 0),
            Some(mode) => {
                let resolved = match mode {
                    ThresholdMode::AllItems if all_items_applies(model) => ResolvedThreshold::AllItems,
                    ThresholdMode::HighBits => match high_bits_from(model) {
                        Some(j) => ResolvedThreshold::HighBits { from_bit: j },
                        None => return Err(CompileError::ThresholdNotApplicable(mode)),
                    },
                    ThresholdMode::AllItems => {
                        return Err(CompileError::ThresholdNotApplicable(mode))
                    }
                    ThresholdMode::Comparator => comparator(model),
                    ThresholdMode::Auto => {
                        if all_items_applies(model) {
                            ResolvedThreshold::AllItems
                        } else if let Some(j) = high_bits_from(model) {
                            ResolvedThreshold::HighBits { from_bit: j }
                        } else {
                            comparator(model)
                        }
                    }
                };
                let total = model.total_cost();
                let n_c = match resolved {
                    ResolvedThreshold::AllItems => 0,
                    ResolvedThreshold::HighBits { .. } => bit_width(total),
                    ResolvedThreshold::Comparator { .. } => bit_width(total) + 1,
                };
                (Some(resolved), n_c)
            }
        };
        let mut next = 0;
        let mut take = |len: usize| {
            let r = next..next + len;
            next += len;
            r
        };
        let output = take(opts.n_ae);
        let modification = take(n_s);
        let item_range = take(n_items);
        let ancillas = take(n_anc);
        let cost = take(n_c);
        let indicator = threshold.as_ref().map(|_| take(1).start);
        let phase = opts.phase_ancilla.then(|| take(1).start);
        let search_phase = opts.search_phase.then(|| take(1).start);
        // Highest id gets the lowest qubit.
        let mut by_id: Vec<usize> = (0..n_items).collect();
        by_id.sort_by_key(|&i| std::cmp::Reverse(model.items()[i].id));
        let mut items = vec![0; n_items];
        for (slot, &i) in by_id.iter().enumerate() {
            items[i] = item_range.start + slot;
        }
        Ok(RegisterLayout {
            n_qubits: next,
            output,
            modification,
            items,
            ancillas,
            cost,
            indicator,
            phase,
            search_phase,
            threshold,
            adder: opts.adder,
        })
    }

    pub fn n_ae(&self) -> usize {
        self.output.len()
    }

    pub fn n_s(&self) -> usize {
        self.modification.len()
    }

    pub fn n_c(&self) -> usize {
        self.cost.len()
    }

    pub fn output_qubits(&self) -> Vec<Qubit> {
        self.output.clone().collect()
    }

    pub fn modification_qubits(&self) -> Vec<Qubit> {
        self.modification.clone().collect()
    }

    pub fn cost_qubits(&self) -> Vec<Qubit> {
        self.cost.clone().collect()
    }

    /// Item qubits in item-index order.
    pub fn item_qubits(&self) -> Vec<Qubit> {
        self.items.clone()
    }

    /// Qubits RM writes to: items, ancillas, cost register and indicator.
    pub fn work_qubits(&self) -> Vec<Qubit> {
        let lo = self.modification.end;
        let hi = self.indicator.map(|q| q + 1).unwrap_or(self.cost.end);
        (lo..hi).collect()
    }

    /// Controls selecting modification `index` on the register (LSB first).
    pub fn modification_controls(&self, index: u32) -> Vec<Control> {
        self.modification
            .clone()
            .enumerate()
            .map(|(b, q)| Control {
                qubit: q,
                positive: index >> b & 1 == 1,
            })
            .collect()
    }

    pub fn registers(&self) -> Vec<Register> {
        let mut out = Vec::new();
        let mut add = |name: &str, r: Range<Qubit>| {
            if !r.is_empty() {
                out.push(Register {
                    name: name.to_string(),
                    start: r.start,
                    len: r.len(),
                });
            }
        };
        add("output", self.output.clone());
        add("modification", self.modification.clone());
        let item_lo = self.modification.end;
        add("items", item_lo..item_lo + self.items.len());
        add("ancilla", self.ancillas.clone());
        add("cost", self.cost.clone());
        if let Some(q) = self.indicator {
            add("indicator", q..q + 1);
        }
        if let Some(q) = self.phase {
            add("phase", q..q + 1);
        }
        if let Some(q) = self.search_phase {
            add("search-phase", q..q + 1);
        }
        out
    }

    pub fn empty_circuit(&self) -> Circuit {
        Circuit::with_registers(self.n_qubits, self.registers())
    }
}

fn comparator(model: &RiskModel) -> ResolvedThreshold {
    let total = model.total_cost();
    let n_c = bit_width(total) + 1;
    // Thresholds above the total cost can never be reached; clamp to total + 1.
    let a = model.threshold().min(total + 1);
    let modulus = 1u64 << n_c;
    ResolvedThreshold::Comparator {
        complement: (modulus - a) % modulus,
    }
}

/// The exactly-one chain for an XOR group. Member k is rotated with its
/// probability conditioned on no earlier member having fired, negatively
/// controlled on every earlier member. A conditional probability of 1 becomes
/// an X gate.
pub fn compile_xor_chain(
    model: &RiskModel,
    group: usize,
    layout: &RegisterLayout,
    source: Option<Control>,
) -> Result<Vec<Gate>, CompileError> {
    let members: Vec<usize> = model.xor_groups()[group]
        .members
        .iter()
        .map(|id| model.item_index(*id).expect("validated"))
        .collect();
    let mut gates = Vec::with_capacity(members.len());
    let mut used = 0.0;
    for (k, &i) in members.iter().enumerate() {
        let p = model.items()[i].p;
        let remaining = 1.0 - used;
        let conditional = if remaining <= 1e-12 {
            0.0
        } else {
            (p / remaining).clamp(0.0, 1.0)
        };
        let target = layout.items[i];
        let gate = if conditional >= 1.0 - 1e-12 {
            Gate::x(target)
        } else {
            rotation(conditional, target)?
        };
        let controls = members[..k]
            .iter()
            .map(|&j| Control::off(layout.items[j]))
            .chain(source);
        gates.push(gate.with_controls(controls));
        used += p;
    }
    Ok(gates)
}

/// A node of a transition tree: an item qubit feeding through a transition
/// probability, or an ancilla that already carries the OR of its subtree.
#[derive(Debug, Clone, Copy)]
struct TreeNode {
    qubit: Qubit,
    p: f64,
}

/// Gates and ancillas for an item fed by several transitions. Pairs of sources
/// are combined into zero-cost ancilla items with four doubly-controlled U3
/// gates each, layer by layer, until one node is left; the target is then
/// prepared from that node in the two-controlled-U3 form.
pub fn compile_transition_tree(
    model: &RiskModel,
    item: usize,
    layout: &RegisterLayout,
    ancillas: &mut impl Iterator<Item = Qubit>,
) -> Result<Vec<Gate>, CompileError> {
    let target = layout.items[item];
    let intrinsic = model.items()[item].p;
    let mut nodes: Vec<TreeNode> = model
        .incoming(item)
        .iter()
        .map(|&t| {
            let tr = &model.transitions()[t];
            TreeNode {
                qubit: layout.items[model.item_index(tr.from).expect("validated")],
                p: tr.p,
            }
        })
        .collect();
    let mut gates = Vec::new();
    if nodes.is_empty() {
        gates.push(rotation(intrinsic, target)?);
        return Ok(gates);
    }
    while nodes.len() > 1 {
        let mut next = Vec::with_capacity(nodes.len().div_ceil(2));
        for pair in nodes.chunks(2) {
            if let [a, b] = pair {
                let anc = ancillas
                    .next()
                    .ok_or_else(|| CompileError::Unsupported("ancilla register exhausted".into()))?;
                for (on_a, on_b) in [(false, false), (false, true), (true, false), (true, true)] {
                    let miss_a = if on_a { 1.0 - a.p } else { 1.0 };
                    let miss_b = if on_b { 1.0 - b.p } else { 1.0 };
                    gates.push(rotation(1.0 - miss_a * miss_b, anc)?.with_controls([
                        Control { qubit: a.qubit, positive: on_a },
                        Control { qubit: b.qubit, positive: on_b },
                    ]));
                }
                next.push(TreeNode { qubit: anc, p: 1.0 });
            } else {
                next.push(pair[0]);
            }
        }
        nodes = next;
    }
    let root = nodes[0];
    gates.push(rotation(intrinsic, target)?.with_control(Control::off(root.qubit)));
    gates.push(
        rotation(root.p + (1.0 - root.p) * intrinsic, target)?.with_control(Control::on(root.qubit)),
    );
    Ok(gates)
}

/// One block of gates per item (or XOR group), in topological order.
fn state_blocks(model: &RiskModel, layout: &RegisterLayout) -> Result<Vec<Vec<Gate>>, CompileError> {
    for t in model.transitions() {
        let to = model.item_index(t.to).expect("validated");
        if model.xor_group_of(to).is_some() {
            return Err(CompileError::Unsupported(format!(
                "transition {}->{} into an XOR member",
                t.from, t.to
            )));
        }
    }
    let mut blocks = Vec::new();
    let mut done_groups = vec![false; model.xor_groups().len()];
    let mut ancillas = layout.ancillas.clone();
    for &i in model.topological_order() {
        if let Some(g) = model.xor_group_of(i) {
            if !done_groups[g] {
                done_groups[g] = true;
                blocks.push(compile_xor_chain(model, g, layout, None)?);
            }
            continue;
        }
        blocks.push(compile_transition_tree(model, i, layout, &mut ancillas)?);
    }
    Ok(blocks)
}

/// Item blocks with modification blocks behind each affected original block:
/// the inverse of the original and the modified block, both controlled on the
/// modification register holding that index.
pub fn compile_items(model: &RiskModel, layout: &RegisterLayout) -> Result<Vec<Gate>, CompileError> {
    let base = state_blocks(model, layout)?;
    let mut variants: Vec<(u32, Vec<Vec<Gate>>)> = Vec::new();
    if layout.n_s() > 0 {
        for m in model.modifications() {
            let modified = model.with_modification(m.index)?;
            variants.push((m.index, state_blocks(&modified, layout)?));
        }
    }
    let mut gates = Vec::new();
    for (b, block) in base.iter().enumerate() {
        gates.extend(block.iter().cloned());
        for (index, blocks) in &variants {
            if blocks[b] == *block {
                continue;
            }
            let ctrl = layout.modification_controls(*index);
            gates.extend(block.iter().rev().map(|g| g.inverse().with_controls(ctrl.iter().copied())));
            gates.extend(blocks[b].iter().map(|g| g.clone().with_controls(ctrl.iter().copied())));
        }
    }
    Ok(gates)
}

/// Add 2^k to the cost register, controlled by `control`.
fn add_power(layout: &RegisterLayout, k: usize, control: &[Control]) -> Vec<Gate> {
    let reg = layout.cost_qubits();
    if k >= reg.len() {
        return Vec::new();
    }
    match layout.adder {
        AdderStyle::Native => vec![Gate::increment(k as u32, reg).with_controls(control.iter().copied())],
        AdderStyle::Ripple => (k..reg.len())
            .rev()
            .map(|j| {
                Gate::x(reg[j]).with_controls(
                    control
                        .iter()
                        .copied()
                        .chain(reg[k..j].iter().map(|&q| Control::on(q))),
                )
            })
            .collect(),
    }
}

/// Controlled power-of-two increments adding each triggered item's cost.
pub fn cost_accumulator(model: &RiskModel, layout: &RegisterLayout) -> Result<Vec<Gate>, CompileError> {
    if layout.n_c() == 0 {
        return Ok(Vec::new());
    }
    let usable = match layout.threshold {
        Some(ResolvedThreshold::Comparator { .. }) => layout.n_c() - 1,
        _ => layout.n_c(),
    };
    let total = model.total_cost();
    if bit_width(total) > usable {
        return Err(CompileError::RegisterTooNarrow {
            needed: total,
            width: usable,
        });
    }
    let mut gates = Vec::new();
    for &i in model.topological_order() {
        let cost = model.items()[i].cost;
        let ctrl = [Control::on(layout.items[i])];
        for k in 0..64 {
            if cost >> k & 1 == 1 {
                gates.extend(add_power(layout, k, &ctrl));
            }
        }
    }
    Ok(gates)
}

/// Gates setting the indicator to [loss ≥ A].
pub fn threshold_indicator(model: &RiskModel, layout: &RegisterLayout) -> Vec<Gate> {
    let (Some(ind), Some(th)) = (layout.indicator, layout.threshold.as_ref()) else {
        return Vec::new();
    };
    let reg = layout.cost_qubits();
    match th {
        ResolvedThreshold::AllItems => {
            let mut qs: Vec<Qubit> = model
                .topological_order()
                .iter()
                .map(|&i| layout.items[i])
                .collect();
            qs.sort_unstable_by(|a, b| b.cmp(a));
            vec![Gate::x(ind).with_controls(qs.into_iter().map(Control::on))]
        }
        ResolvedThreshold::HighBits { from_bit } => {
            vec![Gate::x(ind).with_controls(reg[*from_bit..].iter().map(|&q| Control::on(q)))]
        }
        ResolvedThreshold::Comparator { complement } => {
            let mut add = Vec::new();
            for k in 0..reg.len() {
                if complement >> k & 1 == 1 {
                    add.extend(add_power(layout, k, &[]));
                }
            }
            let sign = *reg.last().expect("comparator register has a sign bit");
            let mut gates = add.clone();
            gates.push(Gate::x(ind).with_control(Control::off(sign)));
            gates.extend(add.iter().rev().map(Gate::inverse));
            gates
        }
    }
}

/// RM: item preparation with modification blocks, cost accumulation and the
/// threshold indicator, over `layout`.
pub fn compile_model(model: &RiskModel, layout: &RegisterLayout) -> Result<Circuit, CompileError> {
    let mut c = layout.empty_circuit();
    c.extend(compile_items(model, layout)?);
    c.extend(cost_accumulator(model, layout)?);
    c.extend(threshold_indicator(model, layout));
    Ok(c)
}

/// Convenience: build the layout and RM in one go.
pub fn compile_with(model: &RiskModel, opts: &LayoutOptions) -> Result<(RegisterLayout, Circuit), CompileError> {
    let layout = RegisterLayout::new(model, opts)?;
    let c = compile_model(model, &layout)?;
    Ok((layout, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use crate::model::{fig1_model, parse_model};
    use crate::sim::StateVector;

    fn theta(g: &Gate) -> f64 {
        match g.kind {
            GateKind::U3 { theta, .. } => theta,
            _ => panic!("not a U3: {g}"),
        }
    }

    #[test]
    fn angles() {
        assert!((angle_for_probability(0.8).unwrap() - 2.214).abs() < 1e-3);
        assert!((angle_for_probability(0.55).unwrap() - 1.671).abs() < 1e-3);
        assert_eq!(angle_for_probability(0.0).unwrap(), 0.0);
        assert!(angle_for_probability(1.2).is_err());
    }

    #[test]
    fn bare_fig1_matches_drawing() {
        let (layout, c) = compile_with(&fig1_model(), &LayoutOptions::bare()).unwrap();
        assert_eq!(layout.n_qubits, 4);
        assert_eq!(layout.items, vec![3, 2, 1, 0]);
        let expected = [
            ("U3", 3, vec![], 2.214),
            ("X", 2, vec![Control::off(3)], 0.0),
            ("U3", 1, vec![Control::off(2)], 0.643),
            ("U3", 1, vec![Control::on(2)], 1.671),
            ("U3", 0, vec![Control::off(2)], 0.451),
            ("U3", 0, vec![Control::on(2)], 1.430),
        ];
        assert_eq!(c.gates.len(), expected.len());
        for (g, (kind, t, ctrls, angle)) in c.gates.iter().zip(expected) {
            assert_eq!(g.kind.name(), kind);
            assert_eq!(g.targets, vec![t]);
            assert_eq!(g.controls, ctrls);
            if kind == "U3" {
                assert!((theta(g) - angle).abs() < 1e-3, "{g}");
            }
        }
    }

    #[test]
    fn fig4_cost_and_indicator_layout() {
        let (layout, c) = compile_with(&fig1_model(), &LayoutOptions::risk_model()).unwrap();
        assert_eq!(layout.n_qubits, 12);
        assert_eq!(layout.cost, 7..11);
        assert_eq!(layout.indicator, Some(11));
        assert_eq!(layout.threshold, Some(ResolvedThreshold::HighBits { from_bit: 2 }));
        let tail: Vec<String> = c.gates[c.gates.len() - 8..].iter().map(|g| g.to_string()).collect();
        assert_eq!(
            tail,
            vec![
                "GATE X 10 [+5 +7 +8 +9]",
                "GATE X 9 [+5 +7 +8]",
                "GATE X 8 [+5 +7]",
                "GATE X 7 [+5]",
                "GATE X 10 [+4 +9]",
                "GATE X 9 [+4]",
                "GATE X 10 [+3]",
                "GATE X 11 [+9 +10]",
            ]
        );
    }

    #[test]
    fn xor_triple_chain() {
        let m = parse_model(
            r#"{"items":[{"id":1,"p":0.5},{"id":2,"p":0.25},{"id":3,"p":0.25}],
                "xor_groups":[[1,2,3]],"threshold":0}"#,
        )
        .unwrap();
        let layout = RegisterLayout::new(&m, &LayoutOptions::bare()).unwrap();
        let g = compile_xor_chain(&m, 0, &layout, None).unwrap();
        assert!((theta(&g[0]) - angle_for_probability(0.5).unwrap()).abs() < 1e-12);
        assert!((theta(&g[1]) - angle_for_probability(0.5).unwrap()).abs() < 1e-12);
        assert_eq!(g[2].kind, GateKind::X);
        assert_eq!(g[2].controls.len(), 2);
    }

    #[test]
    fn degenerate_xor_pair() {
        let m = parse_model(r#"{"items":[{"id":1,"p":1.0},{"id":2,"p":0.0}],"xor_groups":[[1,2]],"threshold":0}"#)
            .unwrap();
        let layout = RegisterLayout::new(&m, &LayoutOptions::bare()).unwrap();
        let g = compile_xor_chain(&m, 0, &layout, None).unwrap();
        assert_eq!(g[0].kind, GateKind::X);
        assert_eq!(theta(&g[1]), 0.0);
    }

    #[test]
    fn single_zero_item_is_identity() {
        let m = parse_model(r#"{"items":[{"id":1,"p":0.0}],"threshold":1}"#).unwrap();
        let (_, c) = compile_with(&m, &LayoutOptions::bare()).unwrap();
        assert_eq!(c.gates.len(), 1);
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&c).unwrap();
        assert_eq!(s.probability(0), 1.0);
    }

    #[test]
    fn two_source_tree_uses_four_doubly_controlled_rotations() {
        let m = parse_model(
            r#"{"items":[{"id":1,"p":0.3},{"id":2,"p":0.6},{"id":3,"p":0.1}],
                "transitions":[{"from":1,"to":3,"p":0.5},{"from":2,"to":3,"p":0.25}],
                "threshold":1}"#,
        )
        .unwrap();
        let (layout, c) = compile_with(&m, &LayoutOptions::bare()).unwrap();
        assert_eq!(layout.ancillas.len(), 1);
        let doubly = c.gates.iter().filter(|g| g.controls.len() == 2).count();
        assert_eq!(doubly, 4);
        let mut s = StateVector::zero(layout.n_qubits).unwrap();
        s.apply(&c).unwrap();
        let p3 = s.marginal(&[layout.items[2]])[1];
        let direct = 0.3 * 0.6 * (1.0 - 0.9 * 0.5 * 0.75)
            + 0.3 * 0.4 * (1.0 - 0.9 * 0.5)
            + 0.7 * 0.6 * (1.0 - 0.9 * 0.75)
            + 0.7 * 0.4 * 0.1;
        assert!((p3 - direct).abs() < 1e-12);
    }

    #[test]
    fn comparator_register_width() {
        let m = fig1_model();
        let layout = RegisterLayout::new(&m, &LayoutOptions::risk_model().threshold_mode(ThresholdMode::Comparator))
            .unwrap();
        assert_eq!(layout.n_c(), 5);
        assert_eq!(layout.threshold, Some(ResolvedThreshold::Comparator { complement: 20 }));
        assert!(RegisterLayout::new(&m, &LayoutOptions::risk_model().threshold_mode(ThresholdMode::AllItems)).is_err());
    }
}
