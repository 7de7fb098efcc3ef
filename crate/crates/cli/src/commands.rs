use std::fs;
use std::path::Path;

use serde::Serialize;

use qrisk_core::classical::{exact_exceedance, loss_distribution, monte_carlo};
use qrisk_core::compile::{compile_with, LayoutOptions, ThresholdMode};
use qrisk_core::families::{chain_model, CHAIN_PLANTED, CHAIN_SIZES};
use qrisk_core::model::fig1_model;
use qrisk_core::qae::{build_qrm, compile_qae, decode, run_qae, QaeOptions};
use qrisk_core::resources::{arity_table, compiled_counts, estimate_gates, estimate_model_qubits, estimate_qubits, QubitEstimate};
use qrisk_core::sensitivity::{
    build_oracle, marking_masses, run_search, scaling_experiment, ScalingConfig, SearchConfig, SearchTarget, Steps,
};
use qrisk_core::sim::{lsb_first, Histogram};
use qrisk_core::theory::{false_positive_sweep, root_sweep, spread_sweep, unequal_activation};
use qrisk_core::{parse_model, RiskModel};

use crate::output::{read_manifest, RunManifest, Sink};
use crate::{CircuitKind, Cli, CliError, ClassicalMode, Command, TheoryCommand};

fn load_model(path: Option<&Path>) -> Result<RiskModel, CliError> {
    match path {
        None => Ok(fig1_model()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            parse_model(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        }
    }
}

/// Arguments without `--out`, for the manifest.
fn strip_out(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classical { .. } => "classical",
        Command::Qae { .. } => "qae",
        Command::Sensitivity { .. } => "sensitivity",
        Command::Scaling { .. } => "scaling",
        Command::Theory { .. } => "theory",
        Command::Resources { .. } => "resources",
        Command::Circuit { .. } => "circuit",
        Command::Replay { .. } => "replay",
    }
}

pub fn dispatch(cli: Cli, args: &[String]) -> Result<(), CliError> {
    if let Command::Replay { manifest } = &cli.command {
        let m = read_manifest(manifest)?;
        if m.args.iter().any(|a| a == "replay") {
            return Err(CliError::Validation("manifest records a replay".into()));
        }
        let mut argv = vec!["qrisk".to_string()];
        argv.extend(m.args);
        if let Some(out) = &cli.out {
            argv.push("--out".into());
            argv.push(out.display().to_string());
        }
        return crate::run(argv);
    }

    let manifest = RunManifest {
        command: command_name(&cli.command).to_string(),
        model: cli.model.as_ref().map(|p| p.display().to_string()),
        args: strip_out(args),
        seed: cli.seed,
        shots: cli.shots,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: Vec::new(),
    };
    let mut sink = Sink::new(cli.out.clone(), cli.format, cli.plot)?;
    let model_path = cli.model.as_deref();
    match cli.command {
        Command::Classical { mode, modification } => classical(&mut sink, &load_model(model_path)?, mode, modification, &cli)?,
        Command::Qae {
            n_ae,
            modification,
            threshold_mode,
        } => qae(&mut sink, &load_model(model_path)?, n_ae, modification, threshold_mode.into(), &cli)?,
        Command::Sensitivity {
            target_p,
            ref targets,
            at_least,
            widen,
            n_ae,
            ref steps,
            factor,
            rounding,
            threshold_mode,
        } => {
            let target = match (target_p, targets.is_empty()) {
                (Some(p), _) if at_least => SearchTarget::at_least(p, n_ae),
                (Some(p), _) => SearchTarget::around(p, n_ae, widen),
                (None, false) => SearchTarget::exact(n_ae, targets.iter().copied())?,
                (None, true) => return Err(CliError::Usage("give --target-p or --targets".into())),
            };
            let steps = match steps.as_str() {
                "auto" => Steps::Auto,
                s => Steps::Fixed(s.parse().map_err(|_| CliError::Usage(format!("--steps: expected a number or auto, got {s}")))?),
            };
            let config = SearchConfig {
                steps,
                shots: cli.shots,
                seed: cli.seed,
                factor,
                rounding: rounding.into(),
                threshold: threshold_mode.into(),
            };
            sensitivity(&mut sink, &load_model(model_path)?, &target, &config)?
        }
        Command::Scaling {
            ref sizes,
            ref models,
            planted,
            confidence,
            n_ae_min,
            n_ae_max,
        } => {
            let set: Vec<(RiskModel, u32)> = if models.is_empty() {
                sizes
                    .iter()
                    .map(|&n| {
                        if CHAIN_SIZES.contains(&n) {
                            Ok((chain_model(n), CHAIN_PLANTED))
                        } else {
                            Err(CliError::Usage(format!("chain sizes run from 2 to 7, got {n}")))
                        }
                    })
                    .collect::<Result<_, _>>()?
            } else {
                models
                    .iter()
                    .map(|p| Ok((load_model(Some(p))?, planted)))
                    .collect::<Result<_, CliError>>()?
            };
            let cfg = ScalingConfig {
                confidence,
                seed: cli.seed,
                n_ae_range: n_ae_min..=n_ae_max,
                ..ScalingConfig::default()
            };
            scaling(&mut sink, &set, &cfg)?
        }
        Command::Theory { ref which } => theory(&mut sink, which)?,
        Command::Resources {
            n_r,
            n_t,
            n_c,
            n_ae,
            n_params,
            factor,
        } => resources(&mut sink, n_r, n_t, n_c, n_ae, n_params, factor, model_path)?,
        Command::Circuit {
            kind,
            n_ae,
            ref targets,
            threshold_mode,
        } => circuit(&mut sink, &load_model(model_path)?, kind, n_ae, targets, threshold_mode.into())?,
        Command::Replay { .. } => unreachable!("handled above"),
    }
    sink.finish(manifest)
}

#[derive(Serialize)]
struct LossRow {
    loss: u64,
    probability: f64,
}

#[derive(Serialize)]
struct ClassicalRow {
    modification: u32,
    mode: &'static str,
    threshold: u64,
    exceedance: f64,
    stderr: f64,
    shots: u64,
}

fn classical(sink: &mut Sink, model: &RiskModel, mode: ClassicalMode, k: u32, cli: &Cli) -> Result<(), CliError> {
    let m = model.with_modification(k)?;
    let row = match mode {
        ClassicalMode::Exact => ClassicalRow {
            modification: k,
            mode: "exact",
            threshold: m.threshold(),
            exceedance: exact_exceedance(model, k)?,
            stderr: 0.0,
            shots: 0,
        },
        ClassicalMode::Mc => {
            if cli.shots == 0 {
                return Err(CliError::Usage("--mode mc needs --shots".into()));
            }
            let e = monte_carlo(model, k, cli.shots, cli.seed)?;
            ClassicalRow {
                modification: k,
                mode: "mc",
                threshold: m.threshold(),
                exceedance: e.estimate,
                stderr: e.stderr,
                shots: e.shots,
            }
        }
    };
    eprintln!("P(loss >= {}) = {:.6}{}", row.threshold, row.exceedance, if row.shots > 0 { format!(" ± {:.6}", row.stderr) } else { String::new() });
    sink.table("exceedance", &[row])?;
    if matches!(mode, ClassicalMode::Exact) {
        let rows: Vec<LossRow> = loss_distribution(&m)?
            .into_iter()
            .map(|(loss, probability)| LossRow { loss, probability })
            .collect();
        sink.table("loss_distribution", &rows)?;
        sink.plot("loss_distribution", "loss_distribution", 1, &[(2, "P(loss)")], false)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DecodedRow {
    outcome: usize,
    bits: String,
    a: f64,
    decoded_p: f64,
    probability: f64,
}

fn qae(sink: &mut Sink, model: &RiskModel, n_ae: usize, k: u32, threshold: ThresholdMode, cli: &Cli) -> Result<(), CliError> {
    let opts = QaeOptions {
        n_ae,
        modification: k,
        threshold,
        shots: cli.shots,
        seed: cli.seed,
    };
    let r = run_qae(model, &opts)?;
    let (lo, hi) = r.modes();
    eprintln!(
        "modes {lo}/{hi}, decoded P = {:.6}, mass {:.4}; exact P = {:.6}",
        decode(lo, n_ae),
        r.modal_mass(lo),
        exact_exceedance(model, k)?
    );
    let rows: Vec<DecodedRow> = r
        .decoded()
        .into_iter()
        .map(|(o, a, p)| DecodedRow {
            outcome: o,
            bits: lsb_first(o, n_ae),
            a,
            decoded_p: p,
            probability: r.probabilities[o],
        })
        .collect();
    let hist = r.histogram.clone().unwrap_or_else(|| Histogram::exact(&r.probabilities, n_ae, "output"));
    sink.histogram("qae_histogram", &hist)?;
    sink.table("qae_decoded", &rows)?;
    sink.plot("qae_decoded", "qae_decoded", 1, &[(5, "P(outcome)")], false)?;
    Ok(())
}

#[derive(Serialize)]
struct MarginalRow {
    modification: usize,
    bits: String,
    probability: f64,
    marking_mass: f64,
}

fn sensitivity(sink: &mut Sink, model: &RiskModel, target: &SearchTarget, config: &SearchConfig) -> Result<(), CliError> {
    if target.is_empty() {
        eprintln!("warning: no estimate reaches the target; expect a near-uniform result");
    }
    let r = run_search(model, target, config)?;
    let masses = marking_masses(model, target, config.threshold)?;
    let top = r.top();
    eprintln!(
        "{} step(s), {} model calls; top modification {} ({}) with probability {:.4}",
        r.steps,
        r.model_calls,
        top,
        lsb_first(top, r.n_s),
        r.probabilities[top]
    );
    let rows: Vec<MarginalRow> = r
        .probabilities
        .iter()
        .enumerate()
        .map(|(k, &p)| MarginalRow {
            modification: k,
            bits: lsb_first(k, r.n_s),
            probability: p,
            marking_mass: masses[k],
        })
        .collect();
    let hist = r.histogram.clone().unwrap_or_else(|| Histogram::exact(&r.probabilities, r.n_s, "modification"));
    sink.histogram("sensitivity_histogram", &hist)?;
    sink.table("sensitivity_marginal", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct ScalingCsv {
    n_items: usize,
    n_params: usize,
    classical_evals: Option<u64>,
    quantum_model_calls: Option<u64>,
}

fn scaling(sink: &mut Sink, set: &[(RiskModel, u32)], cfg: &ScalingConfig) -> Result<(), CliError> {
    let rows = scaling_experiment(set, cfg)?;
    for r in &rows {
        eprintln!(
            "{} items: n_ae {:?}, {} step(s), success {:.3}, classical {:?}, quantum {:?}",
            r.n_items, r.n_ae, r.steps, r.quantum_success, r.classical_evals, r.quantum_model_calls
        );
    }
    let csv: Vec<ScalingCsv> = rows
        .iter()
        .map(|r| ScalingCsv {
            n_items: r.n_items,
            n_params: r.n_params,
            classical_evals: r.classical_evals,
            quantum_model_calls: r.quantum_model_calls,
        })
        .collect();
    sink.table("scaling", &csv)?;
    sink.table("scaling_details", &rows)?;
    sink.plot("scaling", "scaling", 1, &[(3, "classical"), (4, "quantum")], true)?;
    Ok(())
}

fn theory(sink: &mut Sink, which: &TheoryCommand) -> Result<(), CliError> {
    match which {
        TheoryCommand::FalsePositive { n, alphas, spread } => {
            let rows = if *spread {
                let mut all = Vec::new();
                for &a in alphas {
                    all.extend(spread_sweep(*n, a)?);
                }
                all
            } else {
                false_positive_sweep(*n, alphas)?
            };
            sink.table("false_positive", &rows)?;
            sink.plot("false_positive", "false_positive", 2, &[(5, "predicted"), (7, "simulated peak")], false)?;
        }
        TheoryCommand::Root { n, k } => {
            let rows = root_sweep(n, k)?;
            sink.table("root", &rows)?;
        }
        TheoryCommand::Unequal { n, k, alphas, steps } => {
            let mut rows = Vec::new();
            for &a in alphas {
                rows.extend(unequal_activation(*n, *k, a, *steps)?);
            }
            if rows.iter().any(|r| !r.holds) {
                eprintln!("warning: bound violated");
            }
            sink.table("unequal", &rows)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Quantity {
    quantity: String,
    value: f64,
}

fn q(name: &str, v: f64) -> Quantity {
    Quantity {
        quantity: name.to_string(),
        value: v,
    }
}

#[allow(clippy::too_many_arguments)]
fn resources(
    sink: &mut Sink,
    n_r: Option<usize>,
    n_t: usize,
    n_c: usize,
    n_ae: usize,
    n_params: Option<usize>,
    factor: f64,
    model_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let (qubits, gates): (QubitEstimate, _) = match n_r {
        Some(n_r) => {
            let est = estimate_qubits(n_r, n_t, n_c, n_ae);
            (est, estimate_gates(n_r, n_t, n_c, n_ae, n_params.unwrap_or(n_r + n_t), factor))
        }
        None => {
            let model = load_model(model_path)?;
            let est = estimate_model_qubits(&model, n_ae, ThresholdMode::Auto)?;
            let g = estimate_gates(
                model.items().len(),
                model.transitions().len(),
                est.cost,
                n_ae,
                n_params.unwrap_or(model.parameter_count()),
                factor,
            );
            if n_ae <= 10 {
                let c = compiled_counts(&model, n_ae.max(1), ThresholdMode::Auto)?;
                rows.push(q("compiled_base_model_gates", c.base_model_gates as f64));
                rows.push(q("compiled_model_gates", c.model_gates as f64));
                rows.push(q("compiled_model_max_arity", c.model_max_arity as f64));
                rows.push(q("compiled_model_elementary", c.model_elementary as f64));
                rows.push(q("compiled_qae_gates", c.qae_gates as f64));
                let (_, rm) = compile_with(&model, &LayoutOptions::risk_model())?;
                for (arity, count) in arity_table(&rm) {
                    rows.push(q(&format!("model_gates_arity_{arity}"), count as f64));
                }
            }
            (est, g)
        }
    };
    let mut head = vec![
        q("qubits_items", qubits.items as f64),
        q("qubits_tree_ancillas", qubits.tree_ancillas as f64),
        q("qubits_modification", qubits.modification as f64),
        q("qubits_qae", qubits.qae as f64),
        q("qubits_cost", qubits.cost as f64),
        q("qubits_indicator", qubits.indicator as f64),
        q("qubits_phase", qubits.phase as f64),
        q("qubits_search_phase", qubits.search_phase as f64),
        q("qubits_headline", qubits.headline() as f64),
        q("qubits_total", qubits.total() as f64),
        q("gates_model", gates.model),
        q("gates_qae", gates.qae),
        q("grover_steps", gates.grover_steps as f64),
        q("gates_grover_total", gates.grover_total),
    ];
    eprintln!(
        "{} qubits ({} with ancillas), {:.3e} gates per QAE, {} Grover steps, {:.3e} gates in total",
        qubits.headline(),
        qubits.total(),
        gates.qae,
        gates.grover_steps,
        gates.grover_total
    );
    head.extend(rows);
    sink.table("resources", &head)
}

fn circuit(
    sink: &mut Sink,
    model: &RiskModel,
    kind: CircuitKind,
    n_ae: usize,
    targets: &[usize],
    threshold: ThresholdMode,
) -> Result<(), CliError> {
    let text = match kind {
        CircuitKind::Rm => compile_with(model, &LayoutOptions::risk_model().threshold_mode(threshold))?.1.to_text(),
        CircuitKind::Qrm => {
            let (layout, rm) = compile_with(model, &LayoutOptions::grover_operator().threshold_mode(threshold))?;
            build_qrm(&rm, &layout)?.to_text()
        }
        CircuitKind::Qae => compile_qae(model, &LayoutOptions::qae(n_ae.max(1)).threshold_mode(threshold))?.circuit.to_text(),
        CircuitKind::Oracle => {
            let n_ae = n_ae.max(1);
            let q = compile_qae(model, &LayoutOptions::search(n_ae).threshold_mode(threshold))?;
            let target = SearchTarget::exact(n_ae, targets.iter().copied())?;
            build_oracle(&q.circuit, &q.layout, &target)?.to_text()
        }
    };
    sink.text("circuit", "txt", &text)
}
