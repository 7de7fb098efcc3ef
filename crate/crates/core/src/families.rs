//! Model families for scaling runs.

use serde_json::json;

use crate::model::{parse_model, RiskModel};

/// Intrinsic probabilities of the seven-item chain tree.
const CHAIN_P: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8];

/// Transitions of the seven-item chain tree as (from, to, p).
const CHAIN_T: [(u32, u32, f64); 6] = [
    (1, 2, 0.4),
    (1, 3, 0.3),
    (3, 4, 0.2),
    (3, 5, 0.1),
    (5, 6, 0.5),
    (5, 7, 0.6),
];

pub const CHAIN_SIZES: std::ops::RangeInclusive<usize> = 2..=7;

/// Modification index of the dominant parameter in every chain model.
pub const CHAIN_PLANTED: u32 = 1;

/// The first `n` items of the chain tree (2 ≤ n ≤ 7), unit costs, threshold
/// n, so only the all-triggered scenario exceeds. Every parameter gets a +0.1
/// modification; index 1 raises the root item, which everything downstream
/// depends on, so it roughly doubles the exceedance while no other
/// modification moves it by more than a fifth.
pub fn chain_model(n: usize) -> RiskModel {
    assert!(CHAIN_SIZES.contains(&n), "chain models have 2 to 7 items");
    let items: Vec<_> = (0..n)
        .map(|i| json!({"id": i + 1, "name": format!("RI{}", i + 1), "p": CHAIN_P[i], "cost": 1}))
        .collect();
    let transitions: Vec<_> = CHAIN_T
        .iter()
        .filter(|t| (t.1 as usize) <= n)
        .map(|&(from, to, p)| json!({"from": from, "to": to, "p": p}))
        .collect();
    let mut mods = Vec::new();
    for i in 1..=n {
        mods.push(json!({"index": mods.len() + 1, "target": {"item": i}, "delta": 0.1}));
    }
    for t in &transitions {
        mods.push(json!({"index": mods.len() + 1, "target": {"transition": {"from": t["from"], "to": t["to"]}}, "delta": 0.1}));
    }
    let file = json!({
        "items": items,
        "transitions": transitions,
        "xor_groups": [],
        "modifications": mods,
        "threshold": n,
    });
    parse_model(&file.to_string()).expect("chain family is valid")
}
