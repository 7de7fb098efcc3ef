#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use qrisk_core::circuit::Gate;
use qrisk_core::compile::{compile_with, LayoutOptions, RegisterLayout};
use qrisk_core::sim::StateVector;
use qrisk_core::{parse_model, RiskModel};
use serde_json::json;

pub fn examples_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

/// Every model file shipped under docs/examples, sorted by name.
pub fn corpus() -> Vec<(String, RiskModel)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(examples_dir())
        .expect("docs/examples exists")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let m = parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, m)
        })
        .collect()
}

/// Simulate RM with the modification register set to `k`.
pub fn run_rm(model: &RiskModel, opts: &LayoutOptions, k: u32) -> (RegisterLayout, StateVector) {
    let (layout, rm) = compile_with(model, opts).unwrap();
    let mut s = StateVector::zero(layout.n_qubits).unwrap();
    for (b, q) in layout.modification.clone().enumerate() {
        if k >> b & 1 == 1 {
            s.apply_gate(&Gate::x(q)).unwrap();
        }
    }
    s.apply(&rm).unwrap();
    (layout, s)
}

const PS: [f64; 7] = [0.0, 0.1, 0.25, 0.4, 0.5, 0.75, 1.0];

/// Small random models the compiler supports: an optional XOR group over the
/// first items, forward transitions that never enter the group, and a few
/// modifications that stay inside [0, 1].
pub fn arb_model(max_items: usize) -> impl Strategy<Value = RiskModel> {
    (2..=max_items)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(0..PS.len(), n),
                prop::collection::vec(0u64..5, n),
                0usize..=3.min(n),
                prop::collection::vec((0..n, 0..n, 1..PS.len()), 0..n + 2),
                prop::collection::vec((0..2 * n, prop::bool::ANY), 0..4),
                0u64..16,
            )
        })
        .prop_map(|(n, ps, costs, xor, edges, mods, thr)| {
            let xor = if xor == 1 { 0 } else { xor };
            let mut p: Vec<f64> = ps.iter().map(|&i| PS[i]).collect();
            if xor > 0 {
                let w: Vec<f64> = (0..xor).map(|i| 1.0 + i as f64).collect();
                let s: f64 = w.iter().sum();
                for i in 0..xor {
                    p[i] = w[i] / s;
                }
            }
            let items: Vec<_> = (0..n)
                .map(|i| json!({"id": i + 1, "p": p[i], "cost": costs[i]}))
                .collect();
            let mut seen = std::collections::BTreeSet::new();
            let mut transitions = Vec::new();
            for (a, b, pi) in edges {
                let (from, to) = (a.min(b), a.max(b));
                if from == to || to < xor || !seen.insert((from, to)) {
                    continue;
                }
                transitions.push((from + 1, to + 1, PS[pi]));
            }
            let mut modifications = Vec::new();
            for (t, up) in mods {
                let delta = if up { 0.1 } else { -0.1 };
                let target = if t < n {
                    if t < xor || !(0.0..=1.0).contains(&(p[t] + delta)) {
                        continue;
                    }
                    json!({"item": t + 1})
                } else {
                    let Some(&(from, to, tp)) = transitions.get(t - n) else { continue };
                    if !(0.0..=1.0).contains(&(tp + delta)) {
                        continue;
                    }
                    json!({"transition": {"from": from, "to": to}})
                };
                if modifications.iter().any(|m: &serde_json::Value| m["target"] == target) {
                    continue;
                }
                modifications.push(json!({"index": modifications.len() + 1, "target": target, "delta": delta}));
            }
            let total: u64 = costs.iter().sum();
            let file = json!({
                "items": items,
                "transitions": transitions.iter().map(|&(f, t, p)| json!({"from": f, "to": t, "p": p})).collect::<Vec<_>>(),
                "xor_groups": if xor > 0 { vec![(1..=xor).collect::<Vec<_>>()] } else { vec![] },
                "modifications": modifications,
                "threshold": thr.min(total + 1),
            });
            parse_model(&file.to_string()).expect("generated model is valid")
        })
}
