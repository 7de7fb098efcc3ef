//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --release -p qrisk-core --test acceptance -- --nocapture`.
//! The test itself fails if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{corpus, run_rm};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use qrisk_core::circuit::{Circuit, Control, Gate, GateKind};
use qrisk_core::classical::{conditioned_exceedance, exact_exceedance, monte_carlo, trigger_distribution};
use qrisk_core::compile::LayoutOptions;
use qrisk_core::families::{chain_model, CHAIN_PLANTED, CHAIN_SIZES};
use qrisk_core::model::{fig1_model, FIG1_CRISIS_MODIFICATION};
use qrisk_core::qae::{compile_qae, decode, run_qae, QaeOptions};
use qrisk_core::resources::{estimate_gates, estimate_qubits, grover_steps};
use qrisk_core::sensitivity::{run_search, scaling_experiment, ScalingConfig, SearchConfig, SearchTarget, Steps};
use qrisk_core::sim::{Histogram, StateVector};
use qrisk_core::theory::{
    effective_solutions, false_positive_peak, predicted_success, root_sweep, unequal_activation,
};

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, n: u32, ok: bool, detail: String) {
        println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(n);
        }
    }
}

fn close(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn criterion_1(r: &mut Report) {
    let t = Instant::now();
    let model = fig1_model();
    let enumerated = exact_exceedance(&model, 0).unwrap();
    let conditioned = conditioned_exceedance(&model, 0).unwrap();
    let (layout, s) = run_rm(&model, &LayoutOptions::risk_model(), 0);
    let indicator = s.prob_all_one(&[layout.indicator.unwrap()]);
    let secs = t.elapsed().as_secs_f64();
    let ok = close(enumerated, 0.0513, 1e-12)
        && close(conditioned, 0.0513, 1e-12)
        && close(indicator, enumerated, 1e-10)
        && secs < 1.0;
    r.line(
        1,
        ok,
        format!("enumeration={enumerated:.15} conditioning={conditioned:.15} indicator={indicator:.15} time={secs:.3}s"),
    );
}

fn criterion_2(r: &mut Report) {
    let t = Instant::now();
    let res = run_qae(&fig1_model(), &QaeOptions::new(8)).unwrap();
    let modes = res.modes();
    let d = decode(19, 8);
    let mass = res.modal_mass(19);
    let bound = 8.0 / (PI * PI);
    let ok = modes == (19, 237) && close(d, 0.0534, 1e-4) && mass >= bound;
    r.line(
        2,
        ok,
        format!(
            "modes={modes:?} decode(19)={d:.6} modal_mass={mass:.4} (need >= {bound:.4}) time={:.1}s",
            t.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let t = Instant::now();
    let target = SearchTarget::exact(8, [23, 233]).unwrap();
    let config = SearchConfig {
        steps: Steps::Fixed(1),
        ..SearchConfig::default()
    };
    let res = run_search(&fig1_model(), &target, &config).unwrap();
    let p = res.probabilities[FIG1_CRISIS_MODIFICATION as usize];
    r.line(
        3,
        close(p, 0.58, 0.03),
        format!("P(crisis)={p:.4} (need 0.58 ± 0.03) time={:.1}s", t.elapsed().as_secs_f64()),
    );
}

fn criterion_4(r: &mut Report) {
    let t = Instant::now();
    let models: Vec<_> = CHAIN_SIZES.map(|n| (chain_model(n), CHAIN_PLANTED)).collect();
    let rows = scaling_experiment(&models, &ScalingConfig::default()).unwrap();
    let steps: Vec<usize> = rows.iter().map(|r| r.steps).collect();
    let ratios: Vec<Option<f64>> = rows.iter().map(|r| r.ratio()).collect();
    let steps_ok = steps == [1, 1, 1, 2, 2, 2];
    let all_found = ratios.iter().all(Option::is_some);
    let monotone = all_found && ratios.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap());
    for row in &rows {
        println!(
            "    n={} n_ae={:?} steps={} success={:.3} quantum={:?} classical={:?} ratio={:?}",
            row.n_items, row.n_ae, row.steps, row.quantum_success, row.quantum_model_calls, row.classical_evals, row.ratio()
        );
    }
    r.line(
        4,
        steps_ok && monotone,
        format!(
            "steps={steps:?} (need [1, 1, 1, 2, 2, 2]) ratio non-increasing={monotone} time={:.0}s",
            t.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let t = Instant::now();
    let m_hat = effective_solutions(&[0.45]);
    let p = predicted_success(&[0.45]);
    let mut alphas = vec![0.0; 6];
    alphas[0] = 0.45;
    let (step, peak) = false_positive_peak(&alphas).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ok = close(m_hat, 1.783, 0.001) && close(p, 0.8104, 1e-4) && peak >= 0.9 * p && peak <= p && secs < 10.0;
    r.line(
        5,
        ok,
        format!("M̂={m_hat:.5} P={p:.6} (need 0.8104 ± 1e-4) peak={peak:.4} at step {step} time={secs:.2}s"),
    );
}

fn criterion_6(r: &mut Report) {
    let t = Instant::now();
    let rows = root_sweep(&[3, 4, 5], &[1, 2]).unwrap();
    let worst = rows
        .iter()
        .map(|row| (row.ratio - row.a as f64 / (1u64 << row.k) as f64).abs())
        .fold(0.0, f64::max);
    let argmax_ok = rows.iter().all(|row| row.argmax_perfect == row.argmax_root);
    let mut bound_ok = true;
    let mut checked = 0;
    for n in [3, 4, 5] {
        for k in [1, 2] {
            for alpha in [0.0, 0.45, PI / 2.0] {
                for row in unequal_activation(n, k, alpha, 4).unwrap() {
                    bound_ok &= row.holds;
                    checked += 1;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    r.line(
        6,
        worst <= 1e-9 && argmax_ok && bound_ok && secs < 60.0,
        format!(
            "rows={} max ratio error={worst:.2e} argmax invariant={argmax_ok} bound holds on {checked} rows={bound_ok} time={secs:.2}s",
            rows.len()
        ),
    );
}

fn criterion_7(r: &mut Report) {
    let q = estimate_qubits(150, 250, 10, 10).headline();
    let g = estimate_gates(150, 250, 10, 10, 400, 1.0).qae;
    let s = grover_steps(400, 1.0);
    let ok = q == 182 && close(g, 2.6e6, 0.05 * 2.6e6) && s == 15;
    r.line(7, ok, format!("headline qubits={q} (need 182) qae gates={g:.4e} grover steps={s}"));
}

fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let mut c = Circuit::new(n);
    for _ in 0..len {
        let mut qs: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            qs.swap(i, rng.random_range(0..=i));
        }
        let kind = match rng.random_range(0..5) {
            0 => GateKind::U3 {
                theta: rng.random_range(-PI..PI),
                phi: rng.random_range(-PI..PI),
                lambda: rng.random_range(-PI..PI),
            },
            1 => GateKind::X,
            2 => GateKind::H,
            3 => GateKind::Phase(rng.random_range(-PI..PI)),
            _ => GateKind::Increment {
                k: rng.random_range(0..2),
                decrement: rng.random(),
            },
        };
        let nt = if matches!(kind, GateKind::Increment { .. }) { 3 } else { 1 };
        let nc = rng.random_range(0..3);
        let controls = qs[nt..nt + nc]
            .iter()
            .map(|&q| if rng.random() { Control::on(q) } else { Control::off(q) })
            .collect();
        c.push(Gate {
            kind,
            targets: qs[..nt].to_vec(),
            controls,
        });
    }
    c
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let v: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(v.into_iter().map(|a| a / norm).collect())
}

fn csv_bytes(h: &Histogram) -> Vec<u8> {
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    buf
}

fn criterion_8(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut norm_err, mut inv_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let c = random_circuit(&mut rng, 8, 60);
        let s0 = random_state(&mut rng, 8);
        let mut s = s0.clone();
        s.apply(&c).unwrap();
        norm_err = norm_err.max((s.norm_sqr() - 1.0).abs());
        s.apply(&c.inverse()).unwrap();
        inv_err = inv_err.max(s.max_abs_diff(&s0));
    }
    // The compiled circuits too.
    for (_, model) in corpus() {
        let q = compile_qae(&model, &LayoutOptions::qae(2)).unwrap();
        if q.layout.n_qubits > 18 {
            continue;
        }
        let mut s = StateVector::zero(q.layout.n_qubits).unwrap();
        s.apply(&q.circuit).unwrap();
        norm_err = norm_err.max((s.norm_sqr() - 1.0).abs());
        let mut back = s.clone();
        back.apply(&q.circuit.inverse()).unwrap();
        inv_err = inv_err.max(back.max_abs_diff(&StateVector::zero(q.layout.n_qubits).unwrap()));
    }

    // Seeded outputs are byte-identical across reruns.
    let model = chain_model(3);
    let sampled = |seed| {
        let mut opts = QaeOptions::new(4);
        opts.shots = 1000;
        opts.seed = seed;
        csv_bytes(run_qae(&model, &opts).unwrap().histogram.as_ref().unwrap())
    };
    let mc = |seed| {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(monte_carlo(&model, 1, 50_000, seed).unwrap()).unwrap();
        w.into_inner().unwrap()
    };
    let reproducible = sampled(3) == sampled(3) && mc(3) == mc(3) && sampled(3) != sampled(4);

    // RM distribution against enumeration on every model of at most 7 items.
    let mut models: Vec<(String, _)> = corpus();
    models.extend(CHAIN_SIZES.map(|n| (format!("chain{n}"), chain_model(n))));
    let mut rm_err = 0.0f64;
    let mut checked = 0;
    for (_, model) in models.iter().filter(|(_, m)| m.items().len() <= 7) {
        let mut ks = vec![0];
        ks.extend(model.modifications().iter().map(|m| m.index));
        for k in ks {
            let (layout, s) = run_rm(model, &LayoutOptions::risk_model(), k);
            let want = trigger_distribution(&model.with_modification(k).unwrap()).unwrap();
            for (mask, p) in s.marginal(&layout.items).iter().enumerate() {
                rm_err = rm_err.max((p - want.get(&(mask as u64)).copied().unwrap_or(0.0)).abs());
            }
            checked += 1;
        }
    }
    let ok = norm_err <= 1e-9 && inv_err <= 1e-12 && reproducible && rm_err <= 1e-10;
    r.line(
        8,
        ok,
        format!(
            "norm error={norm_err:.1e} inverse error={inv_err:.1e} reproducible={reproducible} rm vs enumeration={rm_err:.1e} over {checked} settings"
        ),
    );
}

#[test]
fn acceptance() {
    let mut r = Report { failed: Vec::new() };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    assert!(r.failed.is_empty(), "failing criteria: {:?}", r.failed);
}
