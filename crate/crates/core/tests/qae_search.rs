mod common;

use std::f64::consts::PI;

use common::corpus;
use proptest::prelude::*;
use qrisk_core::classical::exact_exceedance;
use qrisk_core::compile::{LayoutOptions, ThresholdMode};
use qrisk_core::families::chain_model;
use qrisk_core::qae::{compile_qae, mirror, run_qae, QaeOptions};
use qrisk_core::sensitivity::{marking_masses, run_search, SearchConfig, SearchTarget, Steps};

const N_AE: usize = 4;

fn fits(model: &qrisk_core::RiskModel, n_ae: usize) -> bool {
    compile_qae(model, &LayoutOptions::search(n_ae)).is_ok_and(|q| q.layout.n_qubits <= 18)
}

#[test]
fn qae_mode_brackets_exact_value() {
    for (name, model) in corpus() {
        if !fits(&model, N_AE) {
            continue;
        }
        let mut ks = vec![0];
        ks.extend(model.modifications().iter().map(|m| m.index));
        for k in ks {
            let p = exact_exceedance(&model, k).unwrap();
            let a_star = (1u64 << N_AE) as f64 * p.sqrt().asin() / PI;
            let ok: Vec<usize> = [a_star.floor() as usize, a_star.ceil() as usize]
                .into_iter()
                .flat_map(|a| [a, mirror(a, N_AE)])
                .collect();
            let mut opts = QaeOptions::new(N_AE);
            opts.modification = k;
            let r = run_qae(&model, &opts).unwrap();
            assert!(ok.contains(&r.mode()), "{name} k={k}: mode {} not next to a*={a_star}", r.mode());
            let total: f64 = r.probabilities.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn marking_masses_match_single_qae_runs() {
    let model = chain_model(3);
    let target = SearchTarget::exact(N_AE, [2, 3]).unwrap();
    let masses = marking_masses(&model, &target, ThresholdMode::Auto).unwrap();
    for (k, w) in masses.iter().enumerate() {
        // Register states without a modification run the base model.
        let k = if k as u32 > model.max_modification_index() { 0 } else { k };
        let mut opts = QaeOptions::new(N_AE);
        opts.modification = k as u32;
        let r = run_qae(&model, &opts).unwrap();
        let want: f64 = target.outcomes.iter().map(|&a| r.probabilities[a]).sum();
        assert!((w - want).abs() < 1e-10, "k={k}: {w} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// An oracle that marks with mean mass w̄ moves the search state at most
    /// 2√w̄ per step away from the uniform superposition, so every
    /// modification's probability stays within the matching band around 1/N.
    #[test]
    fn search_moves_no_further_than_marking_allows(
        outcomes in prop::collection::btree_set(0usize..(1 << N_AE), 1..4),
        steps in 1usize..3,
    ) {
        let model = chain_model(2);
        let target = SearchTarget::exact(N_AE, outcomes).unwrap();
        let masses = marking_masses(&model, &target, ThresholdMode::Auto).unwrap();
        let n = masses.len() as f64;
        let w_bar = masses.iter().sum::<f64>() / n;
        let config = SearchConfig { steps: Steps::Fixed(steps), ..SearchConfig::default() };
        let r = run_search(&model, &target, &config).unwrap();
        let d = 2.0 * steps as f64 * w_bar.sqrt();
        let lo = (n.recip().sqrt() - d).max(0.0).powi(2);
        let hi = (n.recip().sqrt() + d).powi(2);
        for p in &r.probabilities {
            prop_assert!(*p >= lo - 1e-10 && *p <= hi + 1e-10, "p={} outside [{}, {}]", p, lo, hi);
        }
        let total: f64 = r.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
