// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlists: topological simulation and longest-path analysis.

use std::fmt;

use super::{CompressorOutputs, CompressorTruthTable};
use crate::error::NetlistError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Inv,
    Buf,
    Nand2,
    Nor2,
    And2,
    Or2,
    Xor2,
    /// `a·b + c·d + e·f`, one stage.
    Ao222,
}

impl GateKind {
    pub const fn fan_in(self) -> usize {
        match self {
            GateKind::Inv | GateKind::Buf => 1,
            GateKind::Nand2 | GateKind::Nor2 | GateKind::And2 | GateKind::Or2 | GateKind::Xor2 => 2,
            GateKind::Ao222 => 6,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            GateKind::Inv => "INV",
            GateKind::Buf => "BUF",
            GateKind::Nand2 => "NAND2",
            GateKind::Nor2 => "NOR2",
            GateKind::And2 => "AND2",
            GateKind::Or2 => "OR2",
            GateKind::Xor2 => "XOR2",
            GateKind::Ao222 => "AO222",
        }
    }

    fn apply(self, v: &[bool]) -> bool {
        match self {
            GateKind::Inv => !v[0],
            GateKind::Buf => v[0],
            GateKind::Nand2 => !(v[0] & v[1]),
            GateKind::Nor2 => !(v[0] | v[1]),
            GateKind::And2 => v[0] & v[1],
            GateKind::Or2 => v[0] | v[1],
            GateKind::Xor2 => v[0] ^ v[1],
            GateKind::Ao222 => (v[0] & v[1]) | (v[2] & v[3]) | (v[4] & v[5]),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate input or netlist output: either a primary input or another gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Input(usize),
    Gate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<Signal>,
    pub label: Option<String>,
}

/// A directed acyclic gate graph. Gate ids are their declaration indices;
/// declaration order need not be topological.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GateNetlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub gates: Vec<Gate>,
    pub outputs: Vec<(String, Signal)>,
}

/// The longest input-to-output path, listed from input to output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalPath {
    pub output: String,
    pub gates: Vec<usize>,
    pub kinds: Vec<GateKind>,
}

impl CriticalPath {
    pub fn depth(&self) -> usize {
        self.kinds.len()
    }

    /// Gate kinds on the path in sorted order.
    pub fn multiset(&self) -> Vec<GateKind> {
        let mut k = self.kinds.clone();
        k.sort();
        k
    }
}

impl fmt::Display for CriticalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kinds: Vec<&str> = self.kinds.iter().map(|k| k.name()).collect();
        write!(
            f,
            "critical_path output={} depth={} gates={}",
            self.output,
            self.depth(),
            kinds.join(">")
        )
    }
}

impl GateNetlist {
    pub fn new(name: impl Into<String>, inputs: &[&str]) -> Self {
        Self {
            name: name.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            gates: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&self, name: &str) -> Option<Signal> {
        self.inputs
            .iter()
            .position(|n| n == name)
            .map(Signal::Input)
    }

    /// Appends a gate and returns its output signal.
    pub fn add(&mut self, kind: GateKind, inputs: &[Signal]) -> Signal {
        self.gates.push(Gate {
            kind,
            inputs: inputs.to_vec(),
            label: None,
        });
        Signal::Gate(self.gates.len() - 1)
    }

    pub fn add_labeled(&mut self, label: &str, kind: GateKind, inputs: &[Signal]) -> Signal {
        let s = self.add(kind, inputs);
        self.gates.last_mut().expect("just pushed").label = Some(label.to_string());
        s
    }

    pub fn set_output(&mut self, name: &str, signal: Signal) {
        self.outputs.push((name.to_string(), signal));
    }

    fn check_signal(&self, gate: usize, s: Signal) -> Result<(), NetlistError> {
        let ok = match s {
            Signal::Input(i) => i < self.inputs.len(),
            Signal::Gate(g) => g < self.gates.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(NetlistError::Unresolved {
                gate,
                reference: format!("{s:?}"),
            })
        }
    }

    /// Checks fan-in and references, and returns gate ids in topological order.
    pub fn validate(&self) -> Result<Vec<usize>, NetlistError> {
        if self.outputs.is_empty() {
            return Err(NetlistError::NoOutputs);
        }
        for (id, g) in self.gates.iter().enumerate() {
            if g.inputs.len() != g.kind.fan_in() {
                return Err(NetlistError::FanIn {
                    gate: id,
                    kind: g.kind.name(),
                    expected: g.kind.fan_in(),
                    got: g.inputs.len(),
                });
            }
            for &s in &g.inputs {
                self.check_signal(id, s)?;
            }
        }
        for (_, s) in &self.outputs {
            self.check_signal(usize::MAX, *s)?;
        }

        // Kahn's algorithm; the ready queue is kept sorted so the order is
        // deterministic for a given declaration order.
        let n = self.gates.len();
        let mut pending = vec![0usize; n];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (id, g) in self.gates.iter().enumerate() {
            for s in &g.inputs {
                if let Signal::Gate(src) = *s {
                    pending[id] += 1;
                    fanout[src].push(id);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| pending[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for &next in &fanout[id] {
                pending[next] -= 1;
                if pending[next] == 0 {
                    ready.insert(next);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&i| pending[i] > 0).unwrap_or(0);
            return Err(NetlistError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Evaluates every output for one assignment of the primary inputs.
    pub fn simulate(&self, inputs: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if inputs.len() != self.inputs.len() {
            return Err(NetlistError::InputCount {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let order = self.validate()?;
        let mut values = vec![false; self.gates.len()];
        let read = |values: &[bool], s: Signal| match s {
            Signal::Input(i) => inputs[i],
            Signal::Gate(g) => values[g],
        };
        let mut scratch = Vec::with_capacity(6);
        for id in order {
            let gate = &self.gates[id];
            scratch.clear();
            scratch.extend(gate.inputs.iter().map(|&s| read(&values, s)));
            values[id] = gate.kind.apply(&scratch);
        }
        Ok(self
            .outputs
            .iter()
            .map(|(_, s)| read(&values, *s))
            .collect())
    }

    pub fn output_index(&self, name: &str) -> Result<usize, NetlistError> {
        self.outputs
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| NetlistError::MissingOutput(name.to_string()))
    }

    /// Simulates a four-input compressor netlist for pattern `x4 x3 x2 x1`.
    /// Any further inputs (such as `cin`) are held at 0.
    pub fn simulate_pattern(&self, pattern: u8) -> Result<CompressorOutputs, NetlistError> {
        let carry = self.output_index("carry")?;
        let sum = self.output_index("sum")?;
        let mut inputs = vec![false; self.inputs.len()];
        for (bit, slot) in inputs.iter_mut().take(4).enumerate() {
            *slot = pattern >> bit & 1 != 0;
        }
        let out = self.simulate(&inputs)?;
        Ok(CompressorOutputs::new(out[carry], out[sum]))
    }

    /// True when the netlist reproduces `table` on all 16 patterns.
    pub fn equivalent_to(&self, table: &CompressorTruthTable) -> Result<bool, NetlistError> {
        for p in 0..16u8 {
            if self.simulate_pattern(p)? != table.get(p) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Longest path in gate stages. Ties between outputs go to the earlier
    /// declared output, ties between predecessors to the lower gate id.
    pub fn critical_path(&self) -> Result<CriticalPath, NetlistError> {
        let order = self.validate()?;
        let mut depth = vec![0usize; self.gates.len()];
        let depth_of = |depth: &[usize], s: Signal| match s {
            Signal::Input(_) => 0,
            Signal::Gate(g) => depth[g],
        };
        for id in order {
            let d = self.gates[id]
                .inputs
                .iter()
                .map(|&s| depth_of(&depth, s))
                .max()
                .unwrap_or(0);
            depth[id] = d + 1;
        }

        let (name, start) = self
            .outputs
            .iter()
            .fold(None::<&(String, Signal)>, |best, o| match best {
                Some(b) if depth_of(&depth, b.1) >= depth_of(&depth, o.1) => Some(b),
                _ => Some(o),
            })
            .expect("validated non-empty outputs");

        let mut gates = Vec::new();
        let mut cursor = *start;
        while let Signal::Gate(id) = cursor {
            gates.push(id);
            let deepest = self.gates[id]
                .inputs
                .iter()
                .filter_map(|&s| match s {
                    Signal::Gate(g) => Some(g),
                    Signal::Input(_) => None,
                })
                .fold(None::<usize>, |best, g| match best {
                    Some(b) if depth[b] > depth[g] || (depth[b] == depth[g] && b < g) => Some(b),
                    _ => Some(g),
                });
            cursor = match deepest {
                Some(g) => Signal::Gate(g),
                None => break,
            };
        }
        gates.reverse();
        let kinds = gates.iter().map(|&g| self.gates[g].kind).collect();
        Ok(CriticalPath {
            output: name.clone(),
            gates,
            kinds,
        })
    }
}

/// Gate-level realization of the proposed compressor.
///
/// Intermediates: `A = NOR(x1,x2)`, `B = NAND(x1,x2)`, `C = NOR(x3,x4)`,
/// `D = NAND(x3,x4)`. Carry is `!(B·D) + !(A+C)`. Sum groups its minterms as
/// `(!A·B)(C + !D) + (!C·D)(A + !B) + !B·!D` onto a single AO222.
pub fn proposed_netlist() -> GateNetlist {
    use GateKind::*;
    let mut n = GateNetlist::new("proposed", &["x1", "x2", "x3", "x4"]);
    let (x1, x2, x3, x4) = (
        Signal::Input(0),
        Signal::Input(1),
        Signal::Input(2),
        Signal::Input(3),
    );
    let a = n.add_labeled("A", Nor2, &[x1, x2]);
    let b = n.add_labeled("B", Nand2, &[x1, x2]);
    let c = n.add_labeled("C", Nor2, &[x3, x4]);
    let d = n.add_labeled("D", Nand2, &[x3, x4]);
    let a_n = n.add_labeled("!A", Inv, &[a]);
    let c_n = n.add_labeled("!C", Inv, &[c]);
    let b_n = n.add_labeled("!B", Inv, &[b]);
    let d_n = n.add_labeled("!D", Inv, &[d]);
    // x1 == x2 and x3 == x4
    let lo_eq = n.add_labeled("A+!B", Nand2, &[a_n, b]);
    let hi_eq = n.add_labeled("C+!D", Nand2, &[c_n, d]);
    // x1 ^ x2 and x3 ^ x4
    let lo_xor = n.add_labeled("!A.B", Inv, &[lo_eq]);
    let hi_xor = n.add_labeled("!C.D", Inv, &[hi_eq]);
    let sum = n.add_labeled("sum", Ao222, &[lo_xor, hi_eq, hi_xor, lo_eq, b_n, d_n]);
    let bd = n.add_labeled("!(B.D)", Nand2, &[b, d]);
    let ac = n.add_labeled("!(A+C)", Nor2, &[a, c]);
    let carry = n.add_labeled("carry", Or2, &[bd, ac]);
    n.set_output("carry", carry);
    n.set_output("sum", sum);
    n
}

/// Exact 4:2 compressor as two chained XOR-based full adders, with the
/// majority carries on AO222 cells. Inputs `x1..x4, cin`; outputs
/// `cout, carry, sum`.
pub fn exact_netlist() -> GateNetlist {
    use GateKind::*;
    let mut n = GateNetlist::new("exact", &["x1", "x2", "x3", "x4", "cin"]);
    let x: Vec<Signal> = (0..5).map(Signal::Input).collect();
    let (x1, x2, x3, x4, cin) = (x[0], x[1], x[2], x[3], x[4]);
    let t = n.add(Xor2, &[x1, x2]);
    let s1 = n.add(Xor2, &[t, x3]);
    let cout = n.add_labeled("cout", Ao222, &[x1, x2, x2, x3, x1, x3]);
    let u = n.add(Xor2, &[s1, x4]);
    let sum = n.add_labeled("sum", Xor2, &[u, cin]);
    let carry = n.add_labeled("carry", Ao222, &[s1, x4, x4, cin, s1, cin]);
    n.set_output("cout", cout);
    n.set_output("carry", carry);
    n.set_output("sum", sum);
    n
}
