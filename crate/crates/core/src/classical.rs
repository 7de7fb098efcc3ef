//! Classical evaluation of risk models: scenario propagation, exact
//! enumeration, an independent conditioning evaluator, seeded Monte Carlo and
//! the Monte-Carlo-driven sensitivity search used as the classical baseline.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{ItemId, ModelError, RiskModel};
use crate::seed::derive_seed;

/// Upper bound on the number of scenario draws enumerated exactly.
pub const MAX_SCENARIOS: u128 = 1 << 26;

/// Monte Carlo shots per shard. Each shard has its own ChaCha8 stream, so the
/// result does not depend on how shards are spread over worker threads.
pub const MC_SHARD: u64 = 1 << 16;

/// One realisation of every random decision in a model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioDraw {
    /// Intrinsic trigger per item. For XOR members this is the selection.
    pub intrinsic_fired: BTreeMap<ItemId, bool>,
    pub transition_fired: BTreeMap<(ItemId, ItemId), bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Propagation {
    pub triggered: BTreeSet<ItemId>,
    pub loss: u64,
}

/// Cascade a draw through the model. Decisions missing from the draw count as
/// not fired.
pub fn propagate(model: &RiskModel, draw: &ScenarioDraw) -> Propagation {
    let intrinsic: Vec<bool> = model
        .items()
        .iter()
        .map(|it| draw.intrinsic_fired.get(&it.id).copied().unwrap_or(false))
        .collect();
    let fired: Vec<bool> = model
        .transitions()
        .iter()
        .map(|t| {
            draw.transition_fired
                .get(&(t.from, t.to))
                .copied()
                .unwrap_or(false)
        })
        .collect();
    let mut on = vec![false; model.items().len()];
    let loss = propagate_indexed(model, &intrinsic, &fired, &mut on);
    Propagation {
        triggered: on
            .iter()
            .zip(model.items())
            .filter(|(f, _)| **f)
            .map(|(_, it)| it.id)
            .collect(),
        loss,
    }
}

/// Index-based propagation; `on` is overwritten with the triggered flags.
pub(crate) fn propagate_indexed(
    model: &RiskModel,
    intrinsic: &[bool],
    fired: &[bool],
    on: &mut [bool],
) -> u64 {
    let transitions = model.transitions();
    let items = model.items();
    let mut loss = 0;
    for &i in model.topological_order() {
        let mut hit = intrinsic[i];
        if !hit {
            hit = model.incoming(i).iter().any(|&t| {
                fired[t] && on[model.item_index(transitions[t].from).expect("validated")]
            });
        }
        on[i] = hit;
        if hit {
            loss += items[i].cost;
        }
    }
    loss
}

fn triggered_mask(on: &[bool]) -> u64 {
    on.iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .fold(0u64, |m, (i, _)| m | (1 << i))
}

/// Number of distinct scenario draws: one categorical draw per XOR group and
/// one Bernoulli draw per free item and per transition.
pub fn scenario_count(model: &RiskModel) -> u128 {
    let mut count: u128 = 1;
    for g in model.xor_groups() {
        count = count.saturating_mul(g.members.len() as u128);
    }
    let free = (0..model.items().len())
        .filter(|&i| model.xor_group_of(i).is_none())
        .count();
    let bits = free + model.transitions().len();
    if bits >= 127 {
        return u128::MAX;
    }
    count.saturating_mul(1u128 << bits)
}

/// Visit every scenario draw with non-zero probability. The callback receives
/// the draw probability, the triggered flags (by item index) and the loss.
pub fn enumerate_scenarios<F>(model: &RiskModel, mut visit: F) -> Result<(), ModelError>
where
    F: FnMut(f64, &[bool], u64),
{
    let scenarios = scenario_count(model);
    if scenarios > MAX_SCENARIOS {
        return Err(ModelError::EnumerationTooLarge {
            scenarios,
            limit: MAX_SCENARIOS,
        });
    }
    let n = model.items().len();
    let free_items: Vec<usize> = (0..n).filter(|&i| model.xor_group_of(i).is_none()).collect();
    let groups: Vec<Vec<usize>> = model
        .xor_groups()
        .iter()
        .map(|g| g.members.iter().map(|id| model.item_index(*id).unwrap()).collect())
        .collect();

    struct Walk<'a, F> {
        model: &'a RiskModel,
        groups: Vec<Vec<usize>>,
        free_items: Vec<usize>,
        intrinsic: Vec<bool>,
        fired: Vec<bool>,
        on: Vec<bool>,
        visit: F,
    }

    impl<F: FnMut(f64, &[bool], u64)> Walk<'_, F> {
        fn groups(&mut self, g: usize, w: f64) {
            if g == self.groups.len() {
                return self.items(0, w);
            }
            for k in 0..self.groups[g].len() {
                let member = self.groups[g][k];
                let p = self.model.items()[member].p;
                if p == 0.0 {
                    continue;
                }
                self.intrinsic[member] = true;
                self.groups(g + 1, w * p);
                self.intrinsic[member] = false;
            }
        }

        fn items(&mut self, k: usize, w: f64) {
            if k == self.free_items.len() {
                return self.transitions(0, w);
            }
            let i = self.free_items[k];
            let p = self.model.items()[i].p;
            if p < 1.0 {
                self.intrinsic[i] = false;
                self.items(k + 1, w * (1.0 - p));
            }
            if p > 0.0 {
                self.intrinsic[i] = true;
                self.items(k + 1, w * p);
                self.intrinsic[i] = false;
            }
        }

        fn transitions(&mut self, t: usize, w: f64) {
            if t == self.fired.len() {
                let loss = propagate_indexed(self.model, &self.intrinsic, &self.fired, &mut self.on);
                (self.visit)(w, &self.on, loss);
                return;
            }
            let p = self.model.transitions()[t].p;
            if p < 1.0 {
                self.fired[t] = false;
                self.transitions(t + 1, w * (1.0 - p));
            }
            if p > 0.0 {
                self.fired[t] = true;
                self.transitions(t + 1, w * p);
                self.fired[t] = false;
            }
        }
    }

    let mut walk = Walk {
        model,
        groups,
        free_items,
        intrinsic: vec![false; n],
        fired: vec![false; model.transitions().len()],
        on: vec![false; n],
        visit: &mut visit,
    };
    walk.groups(0, 1.0);
    Ok(())
}

/// Exact P(loss ≥ threshold) for the model with the given modification applied.
pub fn exact_exceedance(model: &RiskModel, modification_index: u32) -> Result<f64, ModelError> {
    let m = model.with_modification(modification_index)?;
    let threshold = m.threshold();
    let mut p = 0.0;
    enumerate_scenarios(&m, |w, _, loss| {
        if loss >= threshold {
            p += w;
        }
    })?;
    Ok(p)
}

/// Exact distribution over triggered-item sets, keyed by bitmask over item
/// indices (bit i = `model.items()[i]`).
pub fn trigger_distribution(model: &RiskModel) -> Result<BTreeMap<u64, f64>, ModelError> {
    if model.items().len() > 64 {
        return Err(ModelError::TooManyItems(model.items().len()));
    }
    let mut dist = BTreeMap::new();
    enumerate_scenarios(model, |w, on, _| {
        *dist.entry(triggered_mask(on)).or_insert(0.0) += w;
    })?;
    Ok(dist)
}

/// Exact loss distribution by enumeration.
pub fn loss_distribution(model: &RiskModel) -> Result<BTreeMap<u64, f64>, ModelError> {
    let mut dist = BTreeMap::new();
    enumerate_scenarios(model, |w, _, loss| {
        *dist.entry(loss).or_insert(0.0) += w;
    })?;
    Ok(dist)
}

/// Trigger-set distribution computed by conditioning on the items processed
/// so far, marginalising transitions analytically instead of enumerating them.
/// Shares no code with [`enumerate_scenarios`].
pub fn conditioned_trigger_distribution(
    model: &RiskModel,
) -> Result<BTreeMap<u64, f64>, ModelError> {
    let n = model.items().len();
    if n > 26 {
        return Err(ModelError::EnumerationTooLarge {
            scenarios: 1u128 << n.min(127),
            limit: MAX_SCENARIOS,
        });
    }
    // XOR selections first: the selected member is forced on intrinsically.
    let mut selections: Vec<(u64, f64)> = vec![(0, 1.0)];
    for g in model.xor_groups() {
        let mut next = Vec::new();
        for &(mask, w) in &selections {
            for id in &g.members {
                let i = model.item_index(*id).unwrap();
                let p = model.items()[i].p;
                if p > 0.0 {
                    next.push((mask | (1 << i), w * p));
                }
            }
        }
        selections = next;
    }

    let mut out = BTreeMap::new();
    for (selected, w0) in selections {
        let mut states: BTreeMap<u64, f64> = BTreeMap::from([(0u64, w0)]);
        for &i in model.topological_order() {
            let base = if model.xor_group_of(i).is_some() {
                if selected & (1 << i) != 0 { 1.0 } else { 0.0 }
            } else {
                model.items()[i].p
            };
            let mut next = BTreeMap::new();
            for (mask, w) in states {
                let mut stay_off = 1.0 - base;
                for &t in model.incoming(i) {
                    let tr = &model.transitions()[t];
                    let src = model.item_index(tr.from).unwrap();
                    if mask & (1 << src) != 0 {
                        stay_off *= 1.0 - tr.p;
                    }
                }
                let fire = 1.0 - stay_off;
                if fire > 0.0 {
                    *next.entry(mask | (1 << i)).or_insert(0.0) += w * fire;
                }
                if stay_off > 0.0 {
                    *next.entry(mask).or_insert(0.0) += w * stay_off;
                }
            }
            states = next;
        }
        for (mask, w) in states {
            *out.entry(mask).or_insert(0.0) += w;
        }
    }
    Ok(out)
}

pub fn mask_loss(model: &RiskModel, mask: u64) -> u64 {
    model
        .items()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, it)| it.cost)
        .sum()
}

/// Exceedance through the conditioning route.
pub fn conditioned_exceedance(model: &RiskModel, modification_index: u32) -> Result<f64, ModelError> {
    let m = model.with_modification(modification_index)?;
    let dist = conditioned_trigger_distribution(&m)?;
    Ok(dist
        .iter()
        .filter(|(mask, _)| mask_loss(&m, **mask) >= m.threshold())
        .map(|(_, w)| w)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub shots: u64,
}

struct Sampler<'a> {
    model: &'a RiskModel,
    groups: Vec<Vec<(usize, f64)>>,
    free_items: Vec<usize>,
}

impl<'a> Sampler<'a> {
    fn new(model: &'a RiskModel) -> Self {
        let groups = model
            .xor_groups()
            .iter()
            .map(|g| {
                g.members
                    .iter()
                    .map(|id| {
                        let i = model.item_index(*id).unwrap();
                        (i, model.items()[i].p)
                    })
                    .collect()
            })
            .collect();
        let free_items = (0..model.items().len())
            .filter(|&i| model.xor_group_of(i).is_none())
            .collect();
        Sampler {
            model,
            groups,
            free_items,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, intrinsic: &mut [bool], fired: &mut [bool], on: &mut [bool]) -> u64 {
        intrinsic.iter_mut().for_each(|b| *b = false);
        for g in &self.groups {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = g.last().unwrap().0;
            for &(i, p) in g {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            intrinsic[chosen] = true;
        }
        let items = self.model.items();
        for &i in &self.free_items {
            intrinsic[i] = rng.random::<f64>() < items[i].p;
        }
        for (t, tr) in self.model.transitions().iter().enumerate() {
            fired[t] = rng.random::<f64>() < tr.p;
        }
        propagate_indexed(self.model, intrinsic, fired, on)
    }
}

/// Seeded Monte Carlo estimate of P(loss ≥ threshold).
pub fn monte_carlo(
    model: &RiskModel,
    modification_index: u32,
    shots: u64,
    seed: u64,
) -> Result<McEstimate, ModelError> {
    let m = model.with_modification(modification_index)?;
    let hits = mc_hits(&m, shots, seed);
    let shots = shots.max(1);
    let estimate = hits as f64 / shots as f64;
    Ok(McEstimate {
        estimate,
        stderr: (estimate * (1.0 - estimate) / shots as f64).sqrt(),
        hits,
        shots,
    })
}

fn mc_hits(model: &RiskModel, shots: u64, seed: u64) -> u64 {
    let shots = shots.max(1);
    let shards = shots.div_ceil(MC_SHARD);
    let run_shard = |s: u64| {
        let n = MC_SHARD.min(shots - s * MC_SHARD);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        let sampler = Sampler::new(model);
        let k = model.items().len();
        let mut intrinsic = vec![false; k];
        let mut on = vec![false; k];
        let mut fired = vec![false; model.transitions().len()];
        let threshold = model.threshold();
        (0..n)
            .filter(|_| sampler.draw(&mut rng, &mut intrinsic, &mut fired, &mut on) >= threshold)
            .count() as u64
    };
    if shards == 1 {
        run_shard(0)
    } else {
        (0..shards).into_par_iter().map(run_shard).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityOptions {
    pub target_p: f64,
    pub tolerance: f64,
    pub confidence: f64,
    pub seed: u64,
    /// Independent repetitions used to measure the identification rate.
    pub trials: usize,
    pub initial_shots: u64,
    pub max_shots_per_modification: u64,
}

impl SensitivityOptions {
    pub fn new(target_p: f64, tolerance: f64, confidence: f64, seed: u64) -> Self {
        SensitivityOptions {
            target_p,
            tolerance,
            confidence,
            seed,
            trials: 200,
            initial_shots: 8,
            max_shots_per_modification: 1 << 22,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ClassicalSensitivity {
    Found {
        index: u32,
        /// Monte Carlo draws consumed by one identification run.
        evaluations: u64,
        shots_per_modification: u64,
        success_rate: f64,
    },
    /// No modification has an exceedance within tolerance of the target.
    NoQualifyingParameter { closest_index: u32, closest_p: f64 },
    /// A qualifier exists but the shot budget ran out before the requested
    /// confidence was reached.
    BudgetExhausted {
        index: u32,
        shots_per_modification: u64,
        success_rate: f64,
    },
}

/// Find the modification whose exceedance matches `target_p` by per-modification
/// Monte Carlo, and measure how many draws one run needs to pick it with the
/// requested confidence. One run estimates every modification with `n` shots
/// and picks the estimate closest to the target; the identification rate is
/// measured over `trials` seeded repetitions while `n` is doubled and then
/// refined by bisection.
pub fn classical_sensitivity(
    model: &RiskModel,
    opts: &SensitivityOptions,
) -> Result<ClassicalSensitivity, ModelError> {
    let indices: Vec<u32> = model.modifications().iter().map(|m| m.index).collect();
    assert!(!indices.is_empty(), "classical sensitivity needs at least one modification");
    let mut exact = Vec::with_capacity(indices.len());
    for &k in &indices {
        exact.push(exact_exceedance(model, k)?);
    }
    let (best, best_gap) = exact
        .iter()
        .enumerate()
        .map(|(j, p)| (j, (p - opts.target_p).abs()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if best_gap > opts.tolerance {
        return Ok(ClassicalSensitivity::NoQualifyingParameter {
            closest_index: indices[best],
            closest_p: exact[best],
        });
    }
    let models: Vec<RiskModel> = indices
        .iter()
        .map(|&k| model.with_modification(k))
        .collect::<Result<_, _>>()?;

    let rate = |shots: u64| -> f64 {
        let wins = (0..opts.trials)
            .into_par_iter()
            .filter(|&trial| {
                let gaps: Vec<f64> = models
                    .iter()
                    .enumerate()
                    .map(|(j, m)| {
                        let s = derive_seed(opts.seed, &[shots, trial as u64, indices[j] as u64]);
                        let est = mc_hits(m, shots, s) as f64 / shots as f64;
                        (est - opts.target_p).abs()
                    })
                    .collect();
                let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
                // Equal estimates are broken uniformly, never in index order.
                let tied: Vec<usize> = (0..gaps.len()).filter(|&j| gaps[j] == min).collect();
                let coin = derive_seed(opts.seed, &[shots, trial as u64, u64::MAX]);
                tied[(coin % tied.len() as u64) as usize] == best
            })
            .count();
        wins as f64 / opts.trials as f64
    };

    let mut lo = 0u64;
    let mut hi = opts.initial_shots.max(1);
    let mut hi_rate = rate(hi);
    while hi_rate < opts.confidence {
        if hi >= opts.max_shots_per_modification {
            return Ok(ClassicalSensitivity::BudgetExhausted {
                index: indices[best],
                shots_per_modification: hi,
                success_rate: hi_rate,
            });
        }
        lo = hi;
        hi = (hi * 2).min(opts.max_shots_per_modification);
        hi_rate = rate(hi);
    }
    while hi - lo > (hi / 16).max(1) {
        let mid = lo + (hi - lo) / 2;
        let r = rate(mid);
        if r >= opts.confidence {
            hi = mid;
            hi_rate = r;
        } else {
            lo = mid;
        }
    }
    Ok(ClassicalSensitivity::Found {
        index: indices[best],
        evaluations: hi * indices.len() as u64,
        shots_per_modification: hi,
        success_rate: hi_rate,
    })
}
