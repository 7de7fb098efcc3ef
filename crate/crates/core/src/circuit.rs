//! Gate-level circuit IR. Multi-controlled gates are first class; nothing is
//! decomposed into elementary gates.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

pub type Qubit = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Control {
    pub qubit: Qubit,
    /// `true` fires on |1⟩, `false` on |0⟩.
    pub positive: bool,
}

impl Control {
    pub fn on(qubit: Qubit) -> Self {
        Control { qubit, positive: true }
    }

    pub fn off(qubit: Qubit) -> Self {
        Control { qubit, positive: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GateKind {
    U3 { theta: f64, phi: f64, lambda: f64 },
    X,
    Z,
    H,
    /// diag(1, e^{iα}).
    Phase(f64),
    /// Adds `sign · 2^k` modulo 2^len to the register given as targets
    /// (targets[0] least significant).
    Increment { k: u32, decrement: bool },
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::U3 { .. } => "U3",
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::Phase(_) => "P",
            GateKind::Increment { decrement: false, .. } => "INC",
            GateKind::Increment { decrement: true, .. } => "DEC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<Qubit>,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn single(kind: GateKind, target: Qubit) -> Self {
        Gate {
            kind,
            targets: vec![target],
            controls: Vec::new(),
        }
    }

    pub fn u3(theta: f64, target: Qubit) -> Self {
        Gate::single(
            GateKind::U3 {
                theta,
                phi: 0.0,
                lambda: 0.0,
            },
            target,
        )
    }

    pub fn x(target: Qubit) -> Self {
        Gate::single(GateKind::X, target)
    }

    pub fn z(target: Qubit) -> Self {
        Gate::single(GateKind::Z, target)
    }

    pub fn h(target: Qubit) -> Self {
        Gate::single(GateKind::H, target)
    }

    pub fn phase(angle: f64, target: Qubit) -> Self {
        Gate::single(GateKind::Phase(angle), target)
    }

    pub fn increment(k: u32, register: Vec<Qubit>) -> Self {
        Gate {
            kind: GateKind::Increment { k, decrement: false },
            targets: register,
            controls: Vec::new(),
        }
    }

    pub fn with_controls(mut self, controls: impl IntoIterator<Item = Control>) -> Self {
        self.controls.extend(controls);
        self
    }

    pub fn with_control(mut self, c: Control) -> Self {
        self.controls.push(c);
        self
    }

    /// Number of qubits the gate touches.
    pub fn arity(&self) -> usize {
        self.targets.len() + self.controls.len()
    }

    pub fn inverse(&self) -> Gate {
        let kind = match &self.kind {
            GateKind::U3 { theta, phi, lambda } => GateKind::U3 {
                theta: -theta,
                phi: -lambda,
                lambda: -phi,
            },
            GateKind::Phase(a) => GateKind::Phase(-a),
            GateKind::Increment { k, decrement } => GateKind::Increment {
                k: *k,
                decrement: !decrement,
            },
            k => k.clone(),
        };
        Gate {
            kind,
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    fn qubits(&self) -> impl Iterator<Item = Qubit> + '_ {
        self.targets
            .iter()
            .copied()
            .chain(self.controls.iter().map(|c| c.qubit))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Register {
    pub name: String,
    pub start: Qubit,
    pub len: usize,
}

impl Register {
    pub fn range(&self) -> Range<Qubit> {
        self.start..self.start + self.len
    }

    pub fn qubits(&self) -> Vec<Qubit> {
        self.range().collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {index}: qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange {
        index: usize,
        qubit: Qubit,
        n_qubits: usize,
    },
    #[error("gate {index}: qubit {qubit} used twice")]
    Overlap { index: usize, qubit: Qubit },
    #[error("gate {index}: non-finite parameter")]
    NonFinite { index: usize },
    #[error("gate {index}: wrong number of targets")]
    Targets { index: usize },
    #[error("registers {0} and {1} overlap")]
    RegisterOverlap(String, String),
    #[error("circuits differ in width ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub registers: Vec<Register>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            registers: Vec::new(),
        }
    }

    pub fn with_registers(n_qubits: usize, registers: Vec<Register>) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            registers,
        }
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) {
        self.gates.extend(gates);
    }

    /// Append another circuit of the same width (registers are not merged).
    pub fn append(&mut self, other: &Circuit) -> Result<(), CircuitError> {
        if other.n_qubits > self.n_qubits {
            return Err(CircuitError::WidthMismatch(self.n_qubits, other.n_qubits));
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            registers: self.registers.clone(),
        }
    }

    /// The same circuit with one more control on every gate.
    pub fn controlled(&self, control: Control) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| g.clone().with_control(control))
                .collect(),
            registers: self.registers.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn max_arity(&self) -> usize {
        self.gates.iter().map(Gate::arity).max().unwrap_or(0)
    }

    /// Exact gate counts keyed by (kind name, number of controls).
    pub fn counts(&self) -> GateCounts {
        let mut by_kind = BTreeMap::new();
        for g in &self.gates {
            *by_kind
                .entry((g.kind.name().to_string(), g.controls.len()))
                .or_insert(0u64) += 1;
        }
        GateCounts {
            total: self.gates.len() as u64,
            by_kind,
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (a, ra) in self.registers.iter().enumerate() {
            for rb in &self.registers[a + 1..] {
                if ra.len > 0 && rb.len > 0 && ra.start < rb.start + rb.len && rb.start < ra.start + ra.len {
                    return Err(CircuitError::RegisterOverlap(ra.name.clone(), rb.name.clone()));
                }
            }
        }
        for (index, g) in self.gates.iter().enumerate() {
            let mut seen = vec![];
            for q in g.qubits() {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange {
                        index,
                        qubit: q,
                        n_qubits: self.n_qubits,
                    });
                }
                if seen.contains(&q) {
                    return Err(CircuitError::Overlap { index, qubit: q });
                }
                seen.push(q);
            }
            let finite = match g.kind {
                GateKind::U3 { theta, phi, lambda } => {
                    theta.is_finite() && phi.is_finite() && lambda.is_finite()
                }
                GateKind::Phase(a) => a.is_finite(),
                _ => true,
            };
            if !finite {
                return Err(CircuitError::NonFinite { index });
            }
            let targets_ok = match g.kind {
                GateKind::Increment { .. } => !g.targets.is_empty(),
                _ => g.targets.len() == 1,
            };
            if !targets_ok {
                return Err(CircuitError::Targets { index });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "QUBITS {}", self.n_qubits);
        for r in &self.registers {
            let _ = writeln!(s, "REGISTER {} {} {}", r.name, r.start, r.len);
        }
        for g in &self.gates {
            let _ = writeln!(s, "{g}");
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Circuit, CircuitError> {
        let mut circuit: Option<Circuit> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: &str| CircuitError::Parse {
                line,
                message: message.to_string(),
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut words = content.split_whitespace();
            let head = words.next().unwrap();
            match head {
                "QUBITS" => {
                    let n = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| err("expected qubit count"))?;
                    circuit = Some(Circuit::new(n));
                }
                "REGISTER" => {
                    let c = circuit.as_mut().ok_or_else(|| err("REGISTER before QUBITS"))?;
                    let name = words.next().ok_or_else(|| err("expected register name"))?;
                    let start = words.next().and_then(|w| w.parse().ok());
                    let len = words.next().and_then(|w| w.parse().ok());
                    match (start, len) {
                        (Some(start), Some(len)) => c.registers.push(Register {
                            name: name.to_string(),
                            start,
                            len,
                        }),
                        _ => return Err(err("expected register start and length")),
                    }
                }
                "GATE" => {
                    let c = circuit.as_mut().ok_or_else(|| err("GATE before QUBITS"))?;
                    let rest = content["GATE".len()..].trim();
                    c.gates.push(parse_gate(rest).map_err(|m| err(&m))?);
                }
                other => return Err(err(&format!("unknown directive {other}"))),
            }
        }
        let c = circuit.ok_or(CircuitError::Parse {
            line: 0,
            message: "missing QUBITS line".into(),
        })?;
        c.validate()?;
        Ok(c)
    }
}

fn fmt_angle(a: f64) -> String {
    // Shortest representation that round-trips exactly.
    format!("{a:?}")
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            GateKind::U3 { theta, phi, lambda } => format!(
                "U3({},{},{})",
                fmt_angle(*theta),
                fmt_angle(*phi),
                fmt_angle(*lambda)
            ),
            GateKind::Phase(a) => format!("P({})", fmt_angle(*a)),
            GateKind::Increment { k, decrement } => {
                format!("{}({k})", if *decrement { "DEC" } else { "INC" })
            }
            k => k.name().to_string(),
        };
        let targets: Vec<String> = self.targets.iter().map(|q| q.to_string()).collect();
        write!(f, "GATE {kind} {}", targets.join(","))?;
        if !self.controls.is_empty() {
            let cs: Vec<String> = self
                .controls
                .iter()
                .map(|c| format!("{}{}", if c.positive { '+' } else { '-' }, c.qubit))
                .collect();
            write!(f, " [{}]", cs.join(" "))?;
        }
        Ok(())
    }
}

fn parse_gate(s: &str) -> Result<Gate, String> {
    let (kind_part, rest) = match s.find(' ') {
        Some(i) => (&s[..i], s[i..].trim()),
        None => return Err("expected gate kind and targets".into()),
    };
    let (name, params): (&str, Vec<&str>) = match kind_part.find('(') {
        Some(i) => {
            let inner = kind_part[i + 1..]
                .strip_suffix(')')
                .ok_or("unterminated parameter list")?;
            (&kind_part[..i], inner.split(',').collect())
        }
        None => (kind_part, Vec::new()),
    };
    let num = |k: usize| -> Result<f64, String> {
        params
            .get(k)
            .ok_or_else(|| format!("{name}: missing parameter {k}"))?
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("{name}: {e}"))
    };
    let kind = match (name, params.len()) {
        ("U3", 3) => GateKind::U3 {
            theta: num(0)?,
            phi: num(1)?,
            lambda: num(2)?,
        },
        ("U3", 1) => GateKind::U3 {
            theta: num(0)?,
            phi: 0.0,
            lambda: 0.0,
        },
        ("X", 0) => GateKind::X,
        ("Z", 0) => GateKind::Z,
        ("H", 0) => GateKind::H,
        ("P", 1) => GateKind::Phase(num(0)?),
        ("INC", 1) | ("DEC", 1) => GateKind::Increment {
            k: params[0].trim().parse().map_err(|e| format!("{name}: {e}"))?,
            decrement: name == "DEC",
        },
        _ => return Err(format!("unknown gate {kind_part}")),
    };
    let (targets_part, controls_part) = match rest.find('[') {
        Some(i) => {
            let c = rest[i + 1..].trim().strip_suffix(']').ok_or("unterminated control list")?;
            (rest[..i].trim(), Some(c))
        }
        None => (rest, None),
    };
    let targets = targets_part
        .split(',')
        .map(|t| t.trim().parse::<Qubit>().map_err(|e| format!("target: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut controls = Vec::new();
    if let Some(cs) = controls_part {
        for tok in cs.split_whitespace() {
            let (positive, q) = match tok.as_bytes().first() {
                Some(b'+') => (true, &tok[1..]),
                Some(b'-') => (false, &tok[1..]),
                _ => return Err(format!("control {tok} needs a + or - prefix")),
            };
            controls.push(Control {
                qubit: q.parse().map_err(|e| format!("control: {e}"))?,
                positive,
            });
        }
    }
    Ok(Gate {
        kind,
        targets,
        controls,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GateCounts {
    pub total: u64,
    /// (kind, number of controls) → count.
    pub by_kind: BTreeMap<(String, usize), u64>,
}

impl GateCounts {
    /// Count of gates with `controls` controls, any kind.
    pub fn with_controls(&self, controls: usize) -> u64 {
        self.by_kind
            .iter()
            .filter(|((_, c), _)| *c == controls)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn of_kind(&self, kind: &str) -> u64 {
        self.by_kind
            .iter()
            .filter(|((k, _), _)| k == kind)
            .map(|(_, n)| n)
            .sum()
    }
}
