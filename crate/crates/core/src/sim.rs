//! Dense statevector engine. Qubit 0 is the least significant bit of the
//! amplitude index.
//!
//! Every gate kernel enumerates only the amplitudes whose fixed bits (targets
//! and controls) match, and splits that enumeration into fixed-size chunks.
//! Chunks touch disjoint amplitudes, so the result is bit-identical for any
//! number of worker threads; reductions sum per-chunk partials in chunk order.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind, Qubit};

/// log2 of the amplitudes handled by one parallel work item.
const CHUNK_BITS: u32 = 14;

/// Largest register the engine will allocate.
pub const MAX_QUBITS: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("circuit has {circuit} qubits, state has {state}")]
    SizeMismatch { circuit: usize, state: usize },
    #[error("{requested} qubits exceed the simulator budget of {limit}")]
    Budget { requested: usize, limit: usize },
    #[error("qubit {0} out of range")]
    QubitOutOfRange(Qubit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

#[derive(Clone, Copy)]
struct SyncPtr(*mut Complex64);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

/// Spread the bits of `i` over the zero positions of `fixed_sorted`.
#[inline(always)]
fn deposit(mut i: usize, fixed_sorted: &[usize]) -> usize {
    for &b in fixed_sorted {
        let low = i & ((1 << b) - 1);
        i = ((i >> b) << (b + 1)) | low;
    }
    i
}

impl StateVector {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits > MAX_QUBITS {
            return Err(SimError::Budget {
                requested: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, SimError> {
        let mut s = Self::zero(n_qubits)?;
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two());
        StateVector {
            n_qubits: amps.len().trailing_zeros() as usize,
            amps,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps
            .par_chunks(1 << CHUNK_BITS)
            .map(|c| c.iter().map(|a| a.norm_sqr()).sum::<f64>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .par_chunks(1 << CHUNK_BITS)
            .zip(other.amps.par_chunks(1 << CHUNK_BITS))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&mut self, circuit: &Circuit) -> Result<(), SimError> {
        if circuit.n_qubits != self.n_qubits {
            return Err(SimError::SizeMismatch {
                circuit: circuit.n_qubits,
                state: self.n_qubits,
            });
        }
        for g in &circuit.gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    pub fn apply_gates(&mut self, gates: &[Gate]) -> Result<(), SimError> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<(), SimError> {
        for q in g.targets.iter().chain(g.controls.iter().map(|c| &c.qubit)) {
            if *q >= self.n_qubits {
                return Err(SimError::QubitOutOfRange(*q));
            }
        }
        let mut ctrl_mask = 0usize;
        let mut ctrl_value = 0usize;
        for c in &g.controls {
            ctrl_mask |= 1 << c.qubit;
            if c.positive {
                ctrl_value |= 1 << c.qubit;
            }
        }
        match g.kind {
            GateKind::Increment { k, decrement } => {
                self.increment(&g.targets, k, decrement, ctrl_mask, ctrl_value);
            }
            GateKind::Z => self.diagonal(g.targets[0], ctrl_mask, ctrl_value, Complex64::new(-1.0, 0.0)),
            GateKind::Phase(a) => {
                self.diagonal(g.targets[0], ctrl_mask, ctrl_value, Complex64::from_polar(1.0, a))
            }
            GateKind::X => self.pair(g.targets[0], ctrl_mask, ctrl_value, |a, b| (b, a)),
            GateKind::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                self.pair(g.targets[0], ctrl_mask, ctrl_value, move |a, b| {
                    ((a + b) * s, (a - b) * s)
                })
            }
            GateKind::U3 { theta, phi, lambda } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let m00 = Complex64::new(c, 0.0);
                let m01 = -Complex64::from_polar(s, lambda);
                let m10 = Complex64::from_polar(s, phi);
                let m11 = Complex64::from_polar(c, phi + lambda);
                if phi == 0.0 && lambda == 0.0 {
                    self.pair(g.targets[0], ctrl_mask, ctrl_value, move |a, b| {
                        (a * c - b * s, a * s + b * c)
                    })
                } else {
                    self.pair(g.targets[0], ctrl_mask, ctrl_value, move |a, b| {
                        (m00 * a + m01 * b, m10 * a + m11 * b)
                    })
                }
            }
        }
        Ok(())
    }

    /// Visit every index whose `fixed` bits are zero, in parallel chunks. The
    /// callback receives the index with fixed bits cleared and a raw pointer
    /// to the amplitudes; indices derived from distinct bases must not alias.
    fn for_each_base<F>(&mut self, fixed: &[usize], f: F)
    where
        F: Fn(usize, SyncPtr) + Sync,
    {
        let mut fixed: Vec<usize> = fixed.to_vec();
        fixed.sort_unstable();
        let free = self.n_qubits - fixed.len();
        let total = 1usize << free;
        let ptr = SyncPtr(self.amps.as_mut_ptr());
        // Contiguous run below the lowest fixed bit.
        let run_bits = fixed.first().copied().unwrap_or(free).min(free);
        let run = 1usize << run_bits;
        let outer = total >> run_bits;
        let fixed_hi = &fixed[..];
        let chunk = (1usize << CHUNK_BITS).max(run);
        let per_chunk = chunk / run;
        let body = |start: usize| {
            let end = (start + per_chunk).min(outer);
            for o in start..end {
                let base = deposit(o << run_bits, fixed_hi);
                for j in 0..run {
                    f(base + j, ptr);
                }
            }
        };
        if outer <= per_chunk {
            body(0);
        } else {
            (0..outer.div_ceil(per_chunk))
                .into_par_iter()
                .for_each(|c| body(c * per_chunk));
        }
    }

    fn fixed_bits(target: &[usize], ctrl_mask: usize) -> Vec<usize> {
        let mut v: Vec<usize> = target.to_vec();
        let mut m = ctrl_mask;
        while m != 0 {
            v.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        v
    }

    fn pair<F>(&mut self, target: usize, ctrl_mask: usize, ctrl_value: usize, op: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64) + Sync,
    {
        let fixed = Self::fixed_bits(&[target], ctrl_mask);
        let tbit = 1usize << target;
        self.for_each_base(&fixed, |base, p| {
            let i0 = base | ctrl_value;
            let i1 = i0 | tbit;
            // SAFETY: each base maps to a distinct (i0, i1) pair.
            unsafe {
                let a = *p.0.add(i0);
                let b = *p.0.add(i1);
                let (x, y) = op(a, b);
                *p.0.add(i0) = x;
                *p.0.add(i1) = y;
            }
        });
    }

    fn diagonal(&mut self, target: usize, ctrl_mask: usize, ctrl_value: usize, factor: Complex64) {
        let fixed = Self::fixed_bits(&[target], ctrl_mask);
        let idx_bits = ctrl_value | (1 << target);
        self.for_each_base(&fixed, |base, p| unsafe {
            *p.0.add(base | idx_bits) *= factor;
        });
    }

    fn increment(&mut self, register: &[usize], k: u32, decrement: bool, ctrl_mask: usize, ctrl_value: usize) {
        let w = register.len();
        if (k as usize) >= w {
            return;
        }
        let modulus = 1usize << w;
        let step = if decrement {
            modulus - (1usize << k)
        } else {
            1usize << k
        };
        let fixed = Self::fixed_bits(register, ctrl_mask);
        let offsets: Vec<usize> = (0..modulus)
            .map(|v| {
                register
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| v & (1 << b) != 0)
                    .fold(0, |acc, (_, q)| acc | (1 << q))
            })
            .collect();
        self.for_each_base(&fixed, |base, p| {
            let base = base | ctrl_value;
            let vals: Vec<Complex64> = offsets.iter().map(|o| unsafe { *p.0.add(base | o) }).collect();
            for (v, a) in vals.into_iter().enumerate() {
                unsafe {
                    *p.0.add(base | offsets[(v + step) % modulus]) = a;
                }
            }
        });
    }

    /// Exact probability table over `register` (register[0] least significant).
    pub fn marginal(&self, register: &[Qubit]) -> Vec<f64> {
        let size = 1usize << register.len();
        let chunks: Vec<Vec<f64>> = self
            .amps
            .par_chunks(1 << CHUNK_BITS)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut acc = vec![0.0; size];
                let offset = ci << CHUNK_BITS;
                for (j, a) in chunk.iter().enumerate() {
                    let p = a.norm_sqr();
                    if p == 0.0 {
                        continue;
                    }
                    let idx = offset + j;
                    let mut v = 0;
                    for (b, q) in register.iter().enumerate() {
                        v |= ((idx >> q) & 1) << b;
                    }
                    acc[v] += p;
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; size];
        for c in chunks {
            for (o, x) in out.iter_mut().zip(c) {
                *o += x;
            }
        }
        out
    }

    /// Probability that every listed qubit reads 1.
    pub fn prob_all_one(&self, qubits: &[Qubit]) -> f64 {
        let mask = qubits.iter().fold(0usize, |m, q| m | (1 << q));
        self.amps
            .par_chunks(1 << CHUNK_BITS)
            .enumerate()
            .map(|(ci, chunk)| {
                let offset = ci << CHUNK_BITS;
                chunk
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (offset + j) & mask == mask)
                    .map(|(_, a)| a.norm_sqr())
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    /// Seeded multinomial sample of `register`.
    pub fn sample(&self, register: &[Qubit], shots: u64, seed: u64, label: &str) -> Histogram {
        let probs = self.marginal(register);
        Histogram::sample(&probs, register.len(), shots, seed, label)
    }
}

/// Shot counts (or exact probabilities) over an `n_bits` register.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub label: String,
    pub n_bits: usize,
    pub shots: u64,
    /// Outcome value → count; empty for an exact histogram.
    pub counts: BTreeMap<usize, u64>,
    /// Outcome value → probability (exact, or count/shots when sampled).
    pub probabilities: BTreeMap<usize, f64>,
}

/// Outcome bits rendered least significant first.
pub fn lsb_first(value: usize, n_bits: usize) -> String {
    (0..n_bits)
        .map(|b| if value >> b & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl Histogram {
    pub fn exact(probs: &[f64], n_bits: usize, label: &str) -> Self {
        Histogram {
            label: label.to_string(),
            n_bits,
            shots: 0,
            counts: BTreeMap::new(),
            probabilities: probs
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(v, p)| (v, *p))
                .collect(),
        }
    }

    /// Inverse-CDF sampling with ChaCha8 (rand_chacha 0.9 stream 0).
    pub fn sample(probs: &[f64], n_bits: usize, shots: u64, seed: u64, label: &str) -> Self {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * total;
            let mut v = cdf.partition_point(|c| *c <= u);
            if v >= probs.len() {
                v = probs.len() - 1;
            }
            while probs[v] == 0.0 && v > 0 {
                v -= 1;
            }
            *counts.entry(v).or_insert(0) += 1;
        }
        let probabilities = counts
            .iter()
            .map(|(v, c)| (*v, *c as f64 / shots as f64))
            .collect();
        Histogram {
            label: label.to_string(),
            n_bits,
            shots,
            counts,
            probabilities,
        }
    }

    pub fn is_sampled(&self) -> bool {
        self.shots > 0
    }

    pub fn probability(&self, outcome: usize) -> f64 {
        self.probabilities.get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn count(&self, outcome: usize) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    /// Outcomes sorted by decreasing probability (ties by value).
    pub fn ranked(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.probabilities.iter().map(|(k, p)| (*k, *p)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// CSV `outcome,count,probability` with LSB-first outcome strings.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["outcome", "count", "probability"])?;
        for (v, p) in &self.probabilities {
            out.write_record([
                lsb_first(*v, self.n_bits),
                self.count(*v).to_string(),
                format!("{p:.12}"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
