//! Grover search with imperfect oracles: false positives from a rotated
//! perfect oracle, and false negatives from root oracles that only fire for
//! some sign patterns of an internal ancilla register.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{Circuit, Control, Gate, GateKind, Qubit};
use crate::sensitivity::diffusion;
use crate::sim::{SimError, StateVector};

/// Largest search register the sweeps accept.
pub const MAX_SEARCH_QUBITS: usize = 14;

/// M̂ = Π (cos αᵢ + sin αᵢ)².
pub fn effective_solutions(alphas: &[f64]) -> f64 {
    alphas.iter().map(|a| (a.cos() + a.sin()).powi(2)).product()
}

/// Ŝ = (π/4)·√(N/M̂), unrounded.
pub fn predicted_steps(n: f64, m_hat: f64) -> f64 {
    PI / 4.0 * (n / m_hat).sqrt()
}

/// P = Π cos² αᵢ.
pub fn predicted_success(alphas: &[f64]) -> f64 {
    alphas.iter().map(|a| a.cos().powi(2)).product()
}

fn ry(theta: f64, q: Qubit) -> Gate {
    Gate::single(GateKind::U3 { theta, phi: 0.0, lambda: 0.0 }, q)
}

/// Perfect oracle for |1…1⟩ conjugated by U3(2αᵢ) on every search qubit.
/// Qubits 0..n are the search register, qubit n is the kickback qubit, which
/// the caller prepares in |−⟩.
pub fn false_positive_oracle(alphas: &[f64]) -> Circuit {
    let n = alphas.len();
    let mut c = Circuit::new(n + 1);
    for (q, a) in alphas.iter().enumerate() {
        c.push(ry(2.0 * a, q));
    }
    c.push(Gate::x(n).with_controls((0..n).map(Control::on)));
    for (q, a) in alphas.iter().enumerate() {
        c.push(ry(-2.0 * a, q));
    }
    c
}

fn check_size(n: usize) -> Result<(), SimError> {
    if n > MAX_SEARCH_QUBITS {
        return Err(SimError::Budget {
            requested: n,
            limit: MAX_SEARCH_QUBITS,
        });
    }
    Ok(())
}

/// Exact probability of |1…1⟩ after 0..=max_steps Grover steps with the
/// false-positive oracle.
pub fn false_positive_curve(alphas: &[f64], max_steps: usize) -> Result<Vec<f64>, SimError> {
    let n = alphas.len();
    check_size(n)?;
    let search: Vec<Qubit> = (0..n).collect();
    let oracle = false_positive_oracle(alphas);
    let diff = diffusion(&search, n + 1);
    let mut s = StateVector::zero(n + 1)?;
    s.apply_gates(&[Gate::x(n), Gate::h(n)])?;
    for &q in &search {
        s.apply_gate(&Gate::h(q))?;
    }
    let solution = (1usize << n) - 1;
    let mut out = vec![s.marginal(&search)[solution]];
    for _ in 0..max_steps {
        s.apply(&oracle)?;
        s.apply(&diff)?;
        out.push(s.marginal(&search)[solution]);
    }
    Ok(out)
}

pub fn run_false_positive_grover(alphas: &[f64], steps: usize) -> Result<f64, SimError> {
    Ok(*false_positive_curve(alphas, steps)?.last().expect("nonempty"))
}

/// Highest success over the first Grover period, with the step it occurs at.
pub fn false_positive_peak(alphas: &[f64]) -> Result<(usize, f64), SimError> {
    let n = alphas.len();
    let period = (PI / 2.0 * ((1u64 << n) as f64).sqrt()).ceil() as usize + 1;
    let curve = false_positive_curve(alphas, period)?;
    Ok(curve
        .iter()
        .copied()
        .enumerate()
        .skip(1)
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc }))
}

/// Register layout of a root-oracle experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootLayout {
    pub n: usize,
    pub k: usize,
}

impl RootLayout {
    pub fn search(&self) -> Vec<Qubit> {
        (0..self.n).collect()
    }
    pub fn indicator(&self) -> Qubit {
        self.n
    }
    pub fn ancillas(&self) -> Vec<Qubit> {
        (self.n + 1..self.n + 1 + self.k).collect()
    }
    pub fn mark(&self) -> Qubit {
        self.n + 1 + self.k
    }
    pub fn n_qubits(&self) -> usize {
        self.n + self.k + 2
    }
}

/// How the ancillas are put in superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Activation {
    /// H on every ancilla.
    Equal,
    /// U3(2α) on the first ancilla, so ⟨0|+̂⟩ = cos α; H on the rest.
    Rotated(f64),
}

fn prepare(layout: RootLayout, activation: Activation) -> Vec<Gate> {
    let mut g = vec![Gate::x(layout.indicator())];
    for (i, q) in layout.ancillas().into_iter().enumerate() {
        match activation {
            Activation::Rotated(alpha) if i == 0 => g.push(ry(2.0 * alpha, q)),
            _ => g.push(Gate::h(q)),
        }
    }
    g
}

/// U, one marking gate per (solution, pattern), U†. A pattern fires when the
/// ancillas read its bits, so with `Activation::Rotated` pattern 0 is the
/// "+" branch of weight cos α.
pub fn build_root_oracle(
    layout: RootLayout,
    solutions: &[usize],
    patterns: &[u32],
    activation: Activation,
) -> Circuit {
    let prep = prepare(layout, activation);
    let mut c = Circuit::new(layout.n_qubits());
    c.extend(prep.iter().cloned());
    for &x in solutions {
        for &pat in patterns {
            let mut controls: Vec<Control> = (0..layout.n)
                .map(|b| Control {
                    qubit: b,
                    positive: x >> b & 1 == 1,
                })
                .collect();
            controls.push(Control::on(layout.indicator()));
            controls.extend(layout.ancillas().into_iter().enumerate().map(|(i, q)| Control {
                qubit: q,
                positive: pat >> i & 1 == 1,
            }));
            c.push(Gate::x(layout.mark()).with_controls(controls));
        }
    }
    c.extend(prep.iter().rev().map(Gate::inverse));
    c
}

/// Success (probability of any solution string, summed over ancillas) after
/// 0..=max_steps steps.
pub fn root_curve(
    layout: RootLayout,
    solutions: &[usize],
    patterns: &[u32],
    activation: Activation,
    max_steps: usize,
) -> Result<Vec<f64>, SimError> {
    check_size(layout.n)?;
    let search = layout.search();
    let oracle = build_root_oracle(layout, solutions, patterns, activation);
    let diff = diffusion(&search, layout.n_qubits());
    let mut s = StateVector::zero(layout.n_qubits())?;
    s.apply_gates(&[Gate::x(layout.mark()), Gate::h(layout.mark())])?;
    for &q in &search {
        s.apply_gate(&Gate::h(q))?;
    }
    let success = |s: &StateVector| {
        let m = s.marginal(&search);
        solutions.iter().map(|&x| m[x]).sum::<f64>()
    };
    let mut out = vec![success(&s)];
    for _ in 0..max_steps {
        s.apply(&oracle)?;
        s.apply(&diff)?;
        out.push(success(&s));
    }
    Ok(out)
}

/// The solutions 0..m of an N = 2^n search space.
pub fn first_solutions(m: usize) -> Vec<usize> {
    (0..m).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootDelta {
    pub n_search: usize,
    pub m: usize,
    pub k: usize,
    pub a: usize,
    pub steps: usize,
    pub delta_perfect: f64,
    pub delta_root: f64,
    pub ratio: f64,
}

/// ΔP and ΔP̃ after `steps` steps: standard Grover against a product of the
/// first `a` root oracles (patterns 0..a).
pub fn root_grover_delta(n_search: usize, m: usize, k: usize, a: usize, steps: usize) -> Result<RootDelta, SimError> {
    assert!(a >= 1 && a <= 1 << k, "1 ≤ a ≤ 2^k");
    let solutions = first_solutions(m);
    let patterns: Vec<u32> = (0..a as u32).collect();
    let perfect = root_curve(RootLayout { n: n_search, k: 0 }, &solutions, &[0], Activation::Equal, steps)?;
    let root = root_curve(RootLayout { n: n_search, k }, &solutions, &patterns, Activation::Equal, steps)?;
    let dp = perfect[steps] - perfect[0];
    let dr = root[steps] - root[0];
    Ok(RootDelta {
        n_search,
        m,
        k,
        a,
        steps,
        delta_perfect: dp,
        delta_root: dr,
        ratio: dr / dp,
    })
}

/// Step at which standard Grover peaks within its first period.
pub fn standard_optimum(n_search: usize, m: usize) -> usize {
    let theta = ((m as f64) / (1u64 << n_search) as f64).sqrt().asin();
    // sin²((2s+1)θ) peaks where (2s+1)θ is nearest π/2.
    let s = (PI / (4.0 * theta) - 0.5).round() as usize;
    s.max(1)
}

fn argmax(curve: &[f64]) -> usize {
    curve
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 + 1e-12 { (i, p) } else { acc })
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSweepRow {
    pub n_search: usize,
    pub k: usize,
    pub a: usize,
    pub steps: usize,
    pub delta_perfect: f64,
    pub delta_root: f64,
    pub ratio: f64,
    pub expected_ratio: f64,
    pub argmax_perfect: usize,
    pub argmax_root: usize,
}

/// Every (N, k, a, n) with n up to the standard optimum, one solution.
pub fn root_sweep(n_search: &[usize], ks: &[usize]) -> Result<Vec<RootSweepRow>, SimError> {
    let cases: Vec<(usize, usize, usize)> = n_search
        .iter()
        .flat_map(|&n| ks.iter().flat_map(move |&k| (1..=1usize << k).map(move |a| (n, k, a))))
        .collect();
    let rows: Result<Vec<Vec<RootSweepRow>>, SimError> = cases
        .par_iter()
        .map(|&(n, k, a)| {
            let opt = standard_optimum(n, 1);
            let horizon = 2 * opt + 1;
            let patterns: Vec<u32> = (0..a as u32).collect();
            let perfect = root_curve(RootLayout { n, k: 0 }, &[0], &[0], Activation::Equal, horizon)?;
            let root = root_curve(RootLayout { n, k }, &[0], &patterns, Activation::Equal, horizon)?;
            let (am_p, am_r) = (argmax(&perfect), argmax(&root));
            Ok((1..=opt)
                .map(|s| {
                    let dp = perfect[s] - perfect[0];
                    let dr = root[s] - root[0];
                    RootSweepRow {
                        n_search: n,
                        k,
                        a,
                        steps: s,
                        delta_perfect: dp,
                        delta_root: dr,
                        ratio: dr / dp,
                        expected_ratio: a as f64 / (1u64 << k) as f64,
                        argmax_perfect: am_p,
                        argmax_root: am_r,
                    }
                })
                .collect())
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnequalRow {
    pub alpha: f64,
    pub k: usize,
    pub steps: usize,
    pub p_perfect: f64,
    pub p_root: f64,
    pub p_initial: f64,
    /// cos²α / 2^k · P.
    pub bound: f64,
    pub holds: bool,
}

/// Rotated first ancilla, the single pattern that fires on its cos α branch.
pub fn unequal_activation(n_search: usize, k: usize, alpha: f64, max_steps: usize) -> Result<Vec<UnequalRow>, SimError> {
    let perfect = root_curve(RootLayout { n: n_search, k: 0 }, &[0], &[0], Activation::Equal, max_steps)?;
    let root = root_curve(RootLayout { n: n_search, k }, &[0], &[0], Activation::Rotated(alpha), max_steps)?;
    let scale = alpha.cos().powi(2) / (1u64 << k) as f64;
    Ok((1..=max_steps)
        .map(|s| {
            let bound = scale * perfect[s];
            UnequalRow {
                alpha,
                k,
                steps: s,
                p_perfect: perfect[s],
                p_root: root[s],
                p_initial: root[0],
                bound,
                holds: root[s] >= bound - 1e-12,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsePositiveRow {
    pub n_search: usize,
    pub alpha: f64,
    pub m_hat: f64,
    pub predicted_steps: f64,
    pub predicted_success: f64,
    pub peak_step: usize,
    pub peak_success: f64,
}

/// α on the first search qubit, 0 on the rest.
pub fn false_positive_sweep(n_search: usize, alphas: &[f64]) -> Result<Vec<FalsePositiveRow>, SimError> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let mut v = vec![0.0; n_search];
            v[0] = alpha;
            let (peak_step, peak_success) = false_positive_peak(&v)?;
            let m_hat = effective_solutions(&v);
            Ok(FalsePositiveRow {
                n_search,
                alpha,
                m_hat,
                predicted_steps: predicted_steps((1u64 << n_search) as f64, m_hat),
                predicted_success: predicted_success(&v),
                peak_step,
                peak_success,
            })
        })
        .collect()
}

/// Spreading: the same total angle split evenly over the first `spread`
/// qubits. No closed form is asserted here.
pub fn spread_sweep(n_search: usize, total_alpha: f64) -> Result<Vec<FalsePositiveRow>, SimError> {
    (1..=n_search)
        .map(|spread| {
            let mut v = vec![0.0; n_search];
            for a in v.iter_mut().take(spread) {
                *a = total_alpha / spread as f64;
            }
            let (peak_step, peak_success) = false_positive_peak(&v)?;
            let m_hat = effective_solutions(&v);
            Ok(FalsePositiveRow {
                n_search,
                alpha: total_alpha / spread as f64,
                m_hat,
                predicted_steps: predicted_steps((1u64 << n_search) as f64, m_hat),
                predicted_success: predicted_success(&v),
                peak_step,
                peak_success,
            })
        })
        .collect()
}
