//! Back-of-the-envelope qubit and gate counts for production-size models,
//! plus exact counts from the compiler for comparison.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::circuit::Circuit;
use crate::compile::{bit_width, compile_with, LayoutOptions, RegisterLayout, ThresholdMode};
use crate::model::RiskModel;
use crate::qae::{compile_qae, QaeError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QubitEstimate {
    pub items: usize,
    pub tree_ancillas: usize,
    pub modification: usize,
    pub qae: usize,
    pub cost: usize,
    pub indicator: usize,
    pub phase: usize,
    pub search_phase: usize,
}

impl QubitEstimate {
    /// Items, QAE output, modification register and cost register.
    pub fn headline(&self) -> usize {
        self.items + self.qae + self.modification + self.cost
    }

    /// Every qubit the search circuit allocates.
    pub fn total(&self) -> usize {
        self.headline() + self.tree_ancillas + self.indicator + self.phase + self.search_phase
    }
}

/// ⌈log₂ n⌉, 0 for n ≤ 1.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 { 0 } else { bit_width((n - 1) as u64) }
}

/// n_r items, n_t transitions, n_c cost bits, n_ae output bits; the
/// modification register gets ⌈log₂(n_r + n_t)⌉ qubits.
pub fn estimate_qubits(n_r: usize, n_t: usize, n_c: usize, n_ae: usize) -> QubitEstimate {
    QubitEstimate {
        items: n_r,
        tree_ancillas: 0,
        modification: ceil_log2(n_r + n_t),
        qae: n_ae,
        cost: n_c,
        indicator: usize::from(n_r > 0),
        phase: usize::from(n_r > 0),
        search_phase: usize::from(n_r > 0),
    }
}

/// The same estimate read off a concrete model. The cost width follows the
/// threshold circuit the compiler would pick; transition trees add one
/// ancilla per extra incoming edge.
pub fn estimate_model_qubits(model: &RiskModel, n_ae: usize, threshold: ThresholdMode) -> Result<QubitEstimate, QaeError> {
    let layout = RegisterLayout::new(model, &LayoutOptions::risk_model().threshold_mode(threshold))?;
    let n_r = model.items().len();
    let mut q = estimate_qubits(n_r, model.transitions().len(), layout.n_c(), n_ae);
    // Only parameters that carry a modification need a state, plus the
    // unmodified setting.
    q.modification = ceil_log2(model.max_modification_index() as usize + 1);
    q.tree_ancillas = (0..n_r).map(|i| model.incoming(i).len().saturating_sub(1)).sum();
    Ok(q)
}

/// n·log₁₀(n), taken as 0 below n = 2.
fn n_log_n(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        n as f64 * (n as f64).log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateEstimate {
    /// Gates of one RM.
    pub model: f64,
    /// 2^n_ae · RM.
    pub qae: f64,
    pub grover_steps: usize,
    /// Two QAEs per Grover step.
    pub grover_total: f64,
}

/// m_r = (n_r+n_t)·log(n_r+n_t) + n_r·n_c·log(n_c), QAE = 2^n_ae·m_r and
/// n_g = ⌊(π/4)·√(n_params/factor)⌋ Grover steps of two QAEs each.
pub fn estimate_gates(n_r: usize, n_t: usize, n_c: usize, n_ae: usize, n_params: usize, factor: f64) -> GateEstimate {
    let model = n_log_n(n_r + n_t) + n_r as f64 * if n_c < 2 { 0.0 } else { n_log_n(n_c) };
    let qae = (1u64 << n_ae) as f64 * model;
    let grover_steps = grover_steps(n_params, factor);
    GateEstimate {
        model,
        qae,
        grover_steps,
        grover_total: 2.0 * grover_steps as f64 * qae,
    }
}

pub fn grover_steps(n_params: usize, factor: f64) -> usize {
    ((PI / 4.0) * (n_params as f64 / factor).sqrt()).floor().max(1.0) as usize
}

/// c·n² elementary gates for each gate touching n qubits (c = 1); gates on
/// a single qubit count once.
pub fn elementary_expansion(circuit: &Circuit) -> u64 {
    circuit
        .gates
        .iter()
        .map(|g| match g.arity() as u64 {
            1 => 1,
            n => n * n,
        })
        .sum()
}

/// Gate count by arity, for the expansion table.
pub fn arity_table(circuit: &Circuit) -> BTreeMap<usize, u64> {
    let mut t = BTreeMap::new();
    for g in &circuit.gates {
        *t.entry(g.arity()).or_insert(0) += 1;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledCounts {
    pub qubits: usize,
    /// RM without the modification blocks, the quantity m_r estimates.
    pub base_model_gates: usize,
    pub model_gates: usize,
    pub model_max_arity: usize,
    pub qae_gates: usize,
    pub qae_max_arity: usize,
    pub model_elementary: u64,
}

/// Exact counts of the compiled RM and QAE circuits.
pub fn compiled_counts(model: &RiskModel, n_ae: usize, threshold: ThresholdMode) -> Result<CompiledCounts, QaeError> {
    let q = compile_qae(model, &LayoutOptions::qae(n_ae).threshold_mode(threshold))?;
    let base = LayoutOptions {
        modifications: false,
        ..LayoutOptions::risk_model().threshold_mode(threshold)
    };
    let (_, base_rm) = compile_with(model, &base)?;
    Ok(CompiledCounts {
        qubits: q.layout.n_qubits,
        base_model_gates: base_rm.len(),
        model_gates: q.rm.len(),
        model_max_arity: q.rm.max_arity(),
        qae_gates: q.circuit.len(),
        qae_max_arity: q.circuit.max_arity(),
        model_elementary: elementary_expansion(&q.rm),
    })
}
