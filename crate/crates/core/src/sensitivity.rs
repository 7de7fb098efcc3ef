//! Grover search over the modification register with QAE as an imperfect
//! oracle.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Control, Gate, Qubit};
use crate::classical::{classical_sensitivity, exact_exceedance, ClassicalSensitivity, SensitivityOptions};
use crate::compile::{LayoutOptions, RegisterLayout, ThresholdMode};
use crate::model::{ModelError, RiskModel};
use crate::qae::{compile_qae, decode, mirror, nearest_outcome, rm_applications, QaeCircuit, QaeError};
use crate::seed::derive_seed;
use crate::sim::{Histogram, StateVector};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Qae(#[from] QaeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("target outcome {outcome} does not fit {n_ae} output qubits")]
    OutcomeOutOfRange { outcome: usize, n_ae: usize },
    #[error("target set is empty")]
    EmptyTarget,
    #[error("model has no modification register")]
    NoModifications,
    #[error("steps must be at least 1")]
    ZeroSteps,
}

/// Outcomes of the QAE output register that count as a hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchTarget {
    pub n_ae: usize,
    pub outcomes: BTreeSet<usize>,
}

impl SearchTarget {
    /// The given outcomes plus their mirrors.
    pub fn exact(n_ae: usize, outcomes: impl IntoIterator<Item = usize>) -> Result<Self, SearchError> {
        let mut set = BTreeSet::new();
        for o in outcomes {
            if o >= 1 << n_ae {
                return Err(SearchError::OutcomeOutOfRange { outcome: o, n_ae });
            }
            set.insert(o);
            set.insert(mirror(o, n_ae));
        }
        if set.is_empty() {
            return Err(SearchError::EmptyTarget);
        }
        Ok(SearchTarget { n_ae, outcomes: set })
    }

    /// Grid point nearest to `p` and its mirror, widened by `widen` cells
    /// on each side.
    pub fn around(p: f64, n_ae: usize, widen: usize) -> Self {
        let size = 1usize << n_ae;
        let a = nearest_outcome(p, n_ae);
        let outcomes = (0..=2 * widen).map(|d| (a + size + d - widen) % size);
        Self::exact(n_ae, outcomes).expect("in range and nonempty")
    }

    /// Every outcome whose decoded probability is at least `p`. May be empty.
    pub fn at_least(p: f64, n_ae: usize) -> Self {
        SearchTarget {
            n_ae,
            outcomes: (0..1usize << n_ae).filter(|&o| decode(o, n_ae) >= p).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// QAE, one Z on the search phase qubit per target outcome (controls follow
/// the outcome bits, LSB on the first output qubit), QAE†.
pub fn build_oracle(qae: &Circuit, layout: &RegisterLayout, target: &SearchTarget) -> Result<Circuit, SearchError> {
    let phase = layout
        .search_phase
        .ok_or(QaeError::MissingRegister("a search phase qubit"))?;
    let out = layout.output_qubits();
    let mut c = layout.empty_circuit();
    c.append(qae).expect("same layout");
    for &o in &target.outcomes {
        if o >= 1 << out.len() {
            return Err(SearchError::OutcomeOutOfRange { outcome: o, n_ae: out.len() });
        }
        let controls = out.iter().enumerate().map(|(b, &q)| Control {
            qubit: q,
            positive: o >> b & 1 == 1,
        });
        c.push(Gate::z(phase).with_controls(controls));
    }
    c.append(&qae.inverse()).expect("same layout");
    Ok(c)
}

/// Inversion about the mean on `qubits`: H, X, multi-controlled Z, X, H.
pub fn diffusion(qubits: &[Qubit], n_qubits: usize) -> Circuit {
    let mut c = Circuit::new(n_qubits);
    c.extend(qubits.iter().map(|&q| Gate::h(q)));
    c.extend(qubits.iter().map(|&q| Gate::x(q)));
    if let Some((&last, rest)) = qubits.split_last() {
        c.push(Gate::z(last).with_controls(rest.iter().map(|&q| Control::on(q))));
    }
    c.extend(qubits.iter().map(|&q| Gate::x(q)));
    c.extend(qubits.iter().map(|&q| Gate::h(q)));
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Rounding {
    /// Never overshoots; a fractional step is dropped.
    #[default]
    Floor,
    Nearest,
}

/// (π/4)·√(N / (M·factor)), unrounded.
pub fn raw_steps(n: f64, m: f64, factor: f64) -> f64 {
    PI / 4.0 * (n / (m * factor)).sqrt()
}

pub fn optimal_steps(n: f64, m: f64, factor: f64, rounding: Rounding) -> usize {
    let raw = raw_steps(n, m, factor);
    let s = match rounding {
        Rounding::Floor => raw.floor(),
        Rounding::Nearest => raw.round(),
    };
    (s as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Steps {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub steps: Steps,
    pub shots: u64,
    pub seed: u64,
    /// M̂/M: false positives inflate the solution count.
    pub factor: f64,
    pub rounding: Rounding,
    pub threshold: ThresholdMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            steps: Steps::Auto,
            shots: 0,
            seed: 0,
            factor: 1.8,
            rounding: Rounding::Floor,
            threshold: ThresholdMode::Auto,
        }
    }
}

impl SearchConfig {
    pub fn resolve_steps(&self, n_s: usize) -> Result<usize, SearchError> {
        match self.steps {
            Steps::Fixed(0) => Err(SearchError::ZeroSteps),
            Steps::Fixed(s) => Ok(s),
            Steps::Auto => Ok(optimal_steps((1u64 << n_s) as f64, 1.0, self.factor, self.rounding)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub n_ae: usize,
    pub n_s: usize,
    pub steps: usize,
    /// Exact marginal of the modification register.
    pub probabilities: Vec<f64>,
    pub histogram: Option<Histogram>,
    /// Model-circuit applications, RM and RM† alike.
    pub model_calls: u64,
}

impl SearchResult {
    pub fn top(&self) -> usize {
        let mut best = 0;
        for (k, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] + 1e-15 {
                best = k;
            }
        }
        best
    }
}

/// Model calls of a search: two QAEs per step.
pub fn quantum_model_calls(steps: usize, n_ae: usize) -> u64 {
    2 * steps as u64 * rm_applications(n_ae)
}

fn search_circuit(model: &RiskModel, target: &SearchTarget, threshold: ThresholdMode) -> Result<(QaeCircuit, Circuit), SearchError> {
    if target.is_empty() && target.n_ae == 0 {
        return Err(SearchError::EmptyTarget);
    }
    let q = compile_qae(model, &LayoutOptions::search(target.n_ae).threshold_mode(threshold))?;
    if q.layout.n_s() == 0 {
        return Err(SearchError::NoModifications);
    }
    let oracle = build_oracle(&q.circuit, &q.layout, target)?;
    Ok((q, oracle))
}

/// Uniform superposition over modifications, `steps` rounds of oracle and
/// diffusion, then the exact modification marginal (and a seeded sample).
pub fn run_search(model: &RiskModel, target: &SearchTarget, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    let (q, oracle) = search_circuit(model, target, config.threshold)?;
    let layout = &q.layout;
    let n_s = layout.n_s();
    let steps = config.resolve_steps(n_s)?;
    let mods = layout.modification_qubits();
    let diff = diffusion(&mods, layout.n_qubits);

    let mut state = StateVector::zero(layout.n_qubits).map_err(QaeError::from)?;
    state
        .apply_gate(&Gate::x(layout.search_phase.expect("search layout")))
        .map_err(QaeError::from)?;
    for &m in &mods {
        state.apply_gate(&Gate::h(m)).map_err(QaeError::from)?;
    }
    for _ in 0..steps {
        state.apply(&oracle).map_err(QaeError::from)?;
        state.apply(&diff).map_err(QaeError::from)?;
    }
    let probabilities = state.marginal(&mods);
    let histogram = (config.shots > 0).then(|| Histogram::sample(&probabilities, n_s, config.shots, config.seed, "modification"));
    Ok(SearchResult {
        n_ae: target.n_ae,
        n_s,
        steps,
        probabilities,
        histogram,
        model_calls: quantum_model_calls(steps, target.n_ae),
    })
}

/// Probability that QAE lands in the target set, for every modification
/// state, from one QAE run over the uniform modification superposition.
pub fn marking_masses(model: &RiskModel, target: &SearchTarget, threshold: ThresholdMode) -> Result<Vec<f64>, SearchError> {
    let q = compile_qae(model, &LayoutOptions::qae(target.n_ae).threshold_mode(threshold))?;
    let layout = &q.layout;
    let mods = layout.modification_qubits();
    let mut state = StateVector::zero(layout.n_qubits).map_err(QaeError::from)?;
    for &m in &mods {
        state.apply_gate(&Gate::h(m)).map_err(QaeError::from)?;
    }
    state.apply(&q.circuit).map_err(QaeError::from)?;
    let mut joint_qubits = layout.output_qubits();
    joint_qubits.extend(&mods);
    let joint = state.marginal(&joint_qubits);
    let n_ae = target.n_ae;
    let n_states = 1usize << mods.len();
    Ok((0..n_states)
        .map(|k| {
            target
                .outcomes
                .iter()
                .map(|&o| joint[o | k << n_ae])
                .sum::<f64>()
                * n_states as f64
        })
        .collect())
}

/// Outcome threshold halfway (in amplitude angle) between two exceedances.
pub fn angle_midpoint(p: f64, q: f64) -> f64 {
    let t = |x: f64| x.sqrt().asin();
    ((t(p) + t(q)) / 2.0).sin().powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub confidence: f64,
    pub seed: u64,
    pub n_ae_range: std::ops::RangeInclusive<usize>,
    pub factor: f64,
    pub rounding: Rounding,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            confidence: 0.7,
            seed: 0,
            n_ae_range: 3..=8,
            factor: 1.8,
            rounding: Rounding::Floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n_items: usize,
    pub n_params: usize,
    pub planted: u32,
    /// Target probability: outcomes decoding at or above it are marked.
    pub target_p: f64,
    pub n_ae: Option<usize>,
    pub steps: usize,
    pub quantum_success: f64,
    pub classical_evals: Option<u64>,
    pub quantum_model_calls: Option<u64>,
}

impl ScalingRow {
    pub fn ratio(&self) -> Option<f64> {
        Some(self.quantum_model_calls? as f64 / self.classical_evals? as f64)
    }
}

/// For each model: the cheapest classical Monte Carlo sweep and the smallest
/// QAE register whose Grover search both pick the planted parameter with at
/// least `confidence`. The target marks every estimate past the angle
/// midpoint between the planted exceedance and the runner-up.
pub fn scaling_experiment(models: &[(RiskModel, u32)], cfg: &ScalingConfig) -> Result<Vec<ScalingRow>, SearchError> {
    let mut rows = Vec::new();
    for (i, (model, planted)) in models.iter().enumerate() {
        let planted_p = exact_exceedance(model, *planted)?;
        let mut runner_up = exact_exceedance(model, 0)?;
        for m in model.modifications() {
            if m.index != *planted {
                runner_up = runner_up.max(exact_exceedance(model, m.index)?);
            }
        }
        let target_p = angle_midpoint(planted_p, runner_up);
        let seed = derive_seed(cfg.seed, &[i as u64]);

        let mut opts = SensitivityOptions::new(planted_p, (planted_p - runner_up).abs() / 2.0, cfg.confidence, seed);
        opts.trials = 400;
        let classical_evals = match classical_sensitivity(model, &opts)? {
            ClassicalSensitivity::Found { evaluations, .. } => Some(evaluations),
            _ => None,
        };

        let n_s = crate::compile::bit_width(model.max_modification_index() as u64);
        let search = SearchConfig {
            steps: Steps::Auto,
            seed,
            factor: cfg.factor,
            rounding: cfg.rounding,
            ..SearchConfig::default()
        };
        let steps = search.resolve_steps(n_s)?;
        let mut row = ScalingRow {
            n_items: model.items().len(),
            n_params: model.parameter_count(),
            planted: *planted,
            target_p,
            n_ae: None,
            steps,
            quantum_success: 0.0,
            classical_evals,
            quantum_model_calls: None,
        };
        for n_ae in cfg.n_ae_range.clone() {
            let target = SearchTarget::at_least(target_p, n_ae);
            if target.is_empty() {
                continue;
            }
            let r = run_search(model, &target, &search)?;
            let success = r.probabilities[*planted as usize];
            if success >= cfg.confidence {
                row.n_ae = Some(n_ae);
                row.quantum_success = success;
                row.quantum_model_calls = Some(r.model_calls);
                break;
            }
            row.quantum_success = row.quantum_success.max(success);
        }
        rows.push(row);
    }
    Ok(rows)
}
