//! The Grover operator QRM = −RM·S₀·RM†·S_X and canonical (phase-estimation)
//! amplitude estimation over it.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Control, Gate, Qubit};
use crate::compile::{compile_model, CompileError, LayoutOptions, RegisterLayout, ThresholdMode};
use crate::model::{ModelError, RiskModel};
use crate::sim::{Histogram, SimError, StateVector, MAX_QUBITS};

#[derive(Debug, Error)]
pub enum QaeError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("layout lacks {0}")]
    MissingRegister(&'static str),
    #[error("{requested} qubits exceed the simulator budget of {limit}")]
    Budget { requested: usize, limit: usize },
    #[error("n_ae must be at least 1")]
    EmptyOutput,
    #[error("modification {index} does not fit a {width}-qubit register")]
    ModificationOutOfRange { index: u32, width: usize },
}

/// sin²(π·a/2^n_ae).
pub fn decode(a: usize, n_ae: usize) -> f64 {
    (PI * a as f64 / (1u64 << n_ae) as f64).sin().powi(2)
}

/// The mirror encoding 2^n_ae − a of the same estimate.
pub fn mirror(a: usize, n_ae: usize) -> usize {
    ((1usize << n_ae) - a) % (1usize << n_ae)
}

/// Grid point nearest to a* = asin(√p)/π.
pub fn nearest_outcome(p: f64, n_ae: usize) -> usize {
    let a = p.clamp(0.0, 1.0).sqrt().asin() / PI;
    ((a * (1u64 << n_ae) as f64).round() as usize) % (1usize << n_ae)
}

/// QRM over `layout`, given the compiled RM. Gate order follows the drawing:
/// S_X as a Z on the phase ancilla (prepared in |1⟩) controlled by the
/// indicator, RM†, S₀ as a Z on the phase ancilla negatively controlled by
/// every work qubit, the overall −1 as X·Z·X·Z on the first work qubit, RM.
pub fn build_qrm(rm: &Circuit, layout: &RegisterLayout) -> Result<Circuit, QaeError> {
    let indicator = layout.indicator.ok_or(QaeError::MissingRegister("an indicator qubit"))?;
    let phase = layout.phase.ok_or(QaeError::MissingRegister("a phase ancilla"))?;
    let work = layout.work_qubits();
    let mut c = layout.empty_circuit();
    c.push(Gate::z(phase).with_control(Control::on(indicator)));
    c.append(&rm.inverse()).expect("same layout");
    c.push(Gate::z(phase).with_controls(work.iter().map(|&q| Control::off(q))));
    let first = work[0];
    c.extend([Gate::x(first), Gate::z(first), Gate::x(first), Gate::z(first)]);
    c.append(rm).expect("same layout");
    Ok(c)
}

/// QFT on `qubits` (qubits[0] least significant), with the closing swaps.
pub fn qft(qubits: &[Qubit], n_qubits: usize) -> Circuit {
    let m = qubits.len();
    let mut c = Circuit::new(n_qubits);
    for j in (0..m).rev() {
        c.push(Gate::h(qubits[j]));
        for k in (0..j).rev() {
            c.push(Gate::phase(PI / (1u64 << (j - k)) as f64, qubits[j]).with_control(Control::on(qubits[k])));
        }
    }
    for i in 0..m / 2 {
        let (a, b) = (qubits[i], qubits[m - 1 - i]);
        c.push(Gate::x(b).with_control(Control::on(a)));
        c.push(Gate::x(a).with_control(Control::on(b)));
        c.push(Gate::x(b).with_control(Control::on(a)));
    }
    c
}

pub fn inverse_qft(qubits: &[Qubit], n_qubits: usize) -> Circuit {
    qft(qubits, n_qubits).inverse()
}

/// Full QAE circuit: H on the output register, X on the phase ancilla, RM,
/// QRM^(2^j) controlled by output qubit j (by repetition), inverse QFT.
pub fn build_qae(rm: &Circuit, layout: &RegisterLayout) -> Result<Circuit, QaeError> {
    if layout.n_ae() == 0 {
        return Err(QaeError::EmptyOutput);
    }
    if layout.n_qubits > MAX_QUBITS {
        return Err(QaeError::Budget {
            requested: layout.n_qubits,
            limit: MAX_QUBITS,
        });
    }
    let qrm = build_qrm(rm, layout)?;
    let out = layout.output_qubits();
    let mut c = layout.empty_circuit();
    for &q in &out {
        c.push(Gate::h(q));
    }
    c.push(Gate::x(layout.phase.expect("checked by build_qrm")));
    c.append(rm).expect("same layout");
    for (j, &q) in out.iter().enumerate() {
        let controlled = qrm.controlled(Control::on(q));
        for _ in 0..(1usize << j) {
            c.append(&controlled).expect("same layout");
        }
    }
    c.append(&inverse_qft(&out, layout.n_qubits)).expect("same layout");
    Ok(c)
}

/// RM applications inside one QAE circuit (RM and RM† counted alike).
pub fn rm_applications(n_ae: usize) -> u64 {
    1 + 2 * ((1u64 << n_ae) - 1)
}

/// Compiled QAE for a model together with its layout.
#[derive(Debug, Clone)]
pub struct QaeCircuit {
    pub layout: RegisterLayout,
    pub rm: Circuit,
    pub circuit: Circuit,
}

pub fn compile_qae(model: &RiskModel, opts: &LayoutOptions) -> Result<QaeCircuit, QaeError> {
    let layout = RegisterLayout::new(model, opts)?;
    if layout.n_qubits > MAX_QUBITS {
        return Err(QaeError::Budget {
            requested: layout.n_qubits,
            limit: MAX_QUBITS,
        });
    }
    let rm = compile_model(model, &layout)?;
    let circuit = build_qae(&rm, &layout)?;
    Ok(QaeCircuit { layout, rm, circuit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaeResult {
    pub n_ae: usize,
    pub modification: u32,
    /// Exact probability of each outcome a.
    pub probabilities: Vec<f64>,
    pub histogram: Option<Histogram>,
}

impl QaeResult {
    /// Most likely outcome (smallest value on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (a, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] + 1e-15 {
                best = a;
            }
        }
        best
    }

    /// The two mirror encodings of the most likely estimate, smaller first.
    pub fn modes(&self) -> (usize, usize) {
        let a = self.mode();
        let b = mirror(a, self.n_ae);
        (a.min(b), a.max(b))
    }

    /// Probability of outcome `a` plus its mirror.
    pub fn modal_mass(&self, a: usize) -> f64 {
        let b = mirror(a, self.n_ae);
        if a == b {
            self.probabilities[a]
        } else {
            self.probabilities[a] + self.probabilities[b]
        }
    }

    pub fn estimate(&self) -> f64 {
        decode(self.mode(), self.n_ae)
    }

    /// (outcome, a = outcome/2^n_ae, P(a)) for every outcome.
    pub fn decoded(&self) -> Vec<(usize, f64, f64)> {
        let size = 1usize << self.n_ae;
        (0..size)
            .map(|o| (o, o as f64 / size as f64, decode(o, self.n_ae)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaeOptions {
    pub n_ae: usize,
    pub modification: u32,
    pub threshold: ThresholdMode,
    pub shots: u64,
    pub seed: u64,
}

impl QaeOptions {
    pub fn new(n_ae: usize) -> Self {
        QaeOptions {
            n_ae,
            modification: 0,
            threshold: ThresholdMode::Auto,
            shots: 0,
            seed: 0,
        }
    }
}

/// Simulate QAE with the modification register set to `opts.modification`.
pub fn run_qae(model: &RiskModel, opts: &QaeOptions) -> Result<QaeResult, QaeError> {
    let q = compile_qae(model, &LayoutOptions::qae(opts.n_ae).threshold_mode(opts.threshold))?;
    if opts.modification > model.max_modification_index() {
        return Err(QaeError::ModificationOutOfRange {
            index: opts.modification,
            width: q.layout.n_s(),
        });
    }
    let mut state = StateVector::zero(q.layout.n_qubits)?;
    for (b, qb) in q.layout.modification.clone().enumerate() {
        if opts.modification >> b & 1 == 1 {
            state.apply_gate(&Gate::x(qb))?;
        }
    }
    state.apply(&q.circuit)?;
    let out = q.layout.output_qubits();
    let probabilities = state.marginal(&out);
    let histogram = (opts.shots > 0).then(|| Histogram::sample(&probabilities, opts.n_ae, opts.shots, opts.seed, "output"));
    Ok(QaeResult {
        n_ae: opts.n_ae,
        modification: opts.modification,
        probabilities,
        histogram,
    })
}
