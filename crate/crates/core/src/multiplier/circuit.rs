// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use super::plan::PLAN_COLUMNS;
use super::{build_plan, pp_rows, MultiplierConfig, Placement, ReductionPlan, OPERAND_BITS};
use crate::compressor::CompressorOutputs;
use crate::error::{ConfigError, PlanError};

type Wire = u16;

/// Wires `0..64` carry the partial products, `a_i & b_k` on wire `8i + k`.
const PP_WIRES: usize = OPERAND_BITS * OPERAND_BITS;
const MAX_WIRES: usize = 1024;

fn alloc(next: &mut usize) -> Wire {
    let w = *next as Wire;
    *next += 1;
    w
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Approx42 {
        stage: u8,
        column: u8,
        ins: [Wire; 4],
        sum: Wire,
        carry: Wire,
    },
    Exact42 {
        ins: [Wire; 4],
        cin: Option<Wire>,
        sum: Wire,
        carry: Wire,
        cout: Wire,
    },
    Full {
        ins: [Wire; 3],
        sum: Wire,
        carry: Wire,
    },
    Half {
        ins: [Wire; 2],
        sum: Wire,
        carry: Wire,
    },
}

/// A 4:2 approximate compressor that fired on a given input pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApproxEvent {
    pub stage: usize,
    pub column: usize,
    /// Pattern index, `x4 x3 x2 x1`.
    pub pattern: u8,
}

/// Intermediate values of one evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Weighted value of all bits entering each stage, plus the final rows.
    pub stage_values: Vec<u64>,
    pub approx_events: Vec<ApproxEvent>,
    pub result: u16,
}

/// A compiled multiplier: the plan lowered to a flat list of reducer ops
/// over single-assignment wires.
#[derive(Debug, Clone)]
pub struct Multiplier {
    config: MultiplierConfig,
    plan: ReductionPlan,
    table: [CompressorOutputs; 16],
    ops: Vec<Op>,
    wires: usize,
    /// Wires present in each column at the start of each stage; the last
    /// entry holds the two rows fed to the final adder.
    boundaries: Vec<Vec<Vec<Wire>>>,
}

impl Multiplier {
    pub fn new(config: MultiplierConfig) -> Result<Self, ConfigError> {
        let plan = build_plan(&config)?;
        Self::from_plan(config, plan).map_err(|e| match e {
            PlanError::Config(c) => c,
            other => panic!("build_plan produced an inconsistent plan: {other}"),
        })
    }

    /// Lowers an explicit plan. Fails if the plan does not consume every bit
    /// exactly once or leaves more than two rows.
    pub fn from_plan(config: MultiplierConfig, plan: ReductionPlan) -> Result<Self, PlanError> {
        config.validate()?;
        let mut next_wire = PP_WIRES;

        let mut columns: Vec<Vec<Wire>> = vec![Vec::new(); PLAN_COLUMNS];
        for (j, col) in columns.iter_mut().enumerate().take(2 * OPERAND_BITS - 1) {
            if j < plan.truncated_columns {
                continue;
            }
            col.extend(pp_rows(j).map(|i| (i * OPERAND_BITS + (j - i)) as Wire));
        }
        for (j, col) in columns.iter().enumerate() {
            if plan.initial_heights.get(j).copied().unwrap_or(0) != col.len() {
                return Err(PlanError::BitCount {
                    stage: 0,
                    column: j,
                    consumed: plan.initial_heights.get(j).copied().unwrap_or(0),
                    available: col.len(),
                });
            }
        }

        let mut ops = Vec::new();
        let mut boundaries = Vec::new();
        for (s, stage) in plan.stages.iter().enumerate() {
            boundaries.push(columns.clone());
            let mut next: Vec<Vec<Wire>> = vec![Vec::new(); PLAN_COLUMNS + 1];
            let mut couts: Vec<VecDeque<Wire>> = vec![VecDeque::new(); PLAN_COLUMNS + 1];

            for j in 0..PLAN_COLUMNS {
                let bits = &columns[j];
                let placements = stage.get(j).map(Vec::as_slice).unwrap_or(&[]);
                let consumed: usize = placements.iter().map(|p| p.inputs()).sum();
                if consumed != bits.len() {
                    return Err(PlanError::BitCount {
                        stage: s,
                        column: j,
                        consumed,
                        available: bits.len(),
                    });
                }
                let mut cursor = 0;
                let mut flushed = false;
                for &p in placements {
                    if !p.is_compressor() && !flushed {
                        next[j].extend(couts[j].drain(..));
                        flushed = true;
                    } else if p.is_compressor() && flushed {
                        return Err(PlanError::Placement {
                            stage: s,
                            column: j,
                            placement: p.name(),
                        });
                    }
                    let ins = &bits[cursor..cursor + p.inputs()];
                    cursor += p.inputs();
                    match p {
                        Placement::Approx42 => {
                            let (sum, carry) = (alloc(&mut next_wire), alloc(&mut next_wire));
                            ops.push(Op::Approx42 {
                                stage: s as u8,
                                column: j as u8,
                                ins: [ins[0], ins[1], ins[2], ins[3]],
                                sum,
                                carry,
                            });
                            next[j].push(sum);
                            next[j + 1].push(carry);
                        }
                        Placement::Exact42 => {
                            let cin = couts[j].pop_front();
                            let (sum, carry, cout) = (
                                alloc(&mut next_wire),
                                alloc(&mut next_wire),
                                alloc(&mut next_wire),
                            );
                            ops.push(Op::Exact42 {
                                ins: [ins[0], ins[1], ins[2], ins[3]],
                                cin,
                                sum,
                                carry,
                                cout,
                            });
                            next[j].push(sum);
                            next[j + 1].push(carry);
                            couts[j + 1].push_back(cout);
                        }
                        Placement::FullAdder => {
                            let (sum, carry) = (alloc(&mut next_wire), alloc(&mut next_wire));
                            ops.push(Op::Full {
                                ins: [ins[0], ins[1], ins[2]],
                                sum,
                                carry,
                            });
                            next[j].push(sum);
                            next[j + 1].push(carry);
                        }
                        Placement::HalfAdder => {
                            let (sum, carry) = (alloc(&mut next_wire), alloc(&mut next_wire));
                            ops.push(Op::Half {
                                ins: [ins[0], ins[1]],
                                sum,
                                carry,
                            });
                            next[j].push(sum);
                            next[j + 1].push(carry);
                        }
                        Placement::Pass => next[j].push(ins[0]),
                    }
                }
                if !flushed {
                    next[j].extend(couts[j].drain(..));
                }
            }
            next.truncate(PLAN_COLUMNS);
            columns = next;
            if next_wire > MAX_WIRES {
                panic!("plan needs more than {MAX_WIRES} wires");
            }
        }
        if let Some((column, col)) = columns.iter().enumerate().find(|(_, c)| c.len() > 2) {
            return Err(PlanError::Unreduced {
                column,
                height: col.len(),
            });
        }
        boundaries.push(columns);

        Ok(Self {
            table: *config.approx_table.entries(),
            config,
            plan,
            ops,
            wires: next_wire,
            boundaries,
        })
    }

    pub fn config(&self) -> &MultiplierConfig {
        &self.config
    }

    pub fn plan(&self) -> &ReductionPlan {
        &self.plan
    }

    fn run(&self, a: u8, b: u8, wires: &mut [bool], mut events: Option<&mut Vec<ApproxEvent>>) {
        for i in 0..OPERAND_BITS {
            let ai = (a >> i) & 1 == 1;
            for k in 0..OPERAND_BITS {
                wires[i * OPERAND_BITS + k] = ai & ((b >> k) & 1 == 1);
            }
        }
        for op in &self.ops {
            match *op {
                Op::Approx42 {
                    stage,
                    column,
                    ins,
                    sum,
                    carry,
                } => {
                    let pattern = wires[ins[0] as usize] as u8
                        | (wires[ins[1] as usize] as u8) << 1
                        | (wires[ins[2] as usize] as u8) << 2
                        | (wires[ins[3] as usize] as u8) << 3;
                    let out = self.table[pattern as usize];
                    wires[sum as usize] = out.sum;
                    wires[carry as usize] = out.carry;
                    if let Some(ev) = events.as_deref_mut() {
                        ev.push(ApproxEvent {
                            stage: stage as usize,
                            column: column as usize,
                            pattern,
                        });
                    }
                }
                Op::Exact42 {
                    ins,
                    cin,
                    sum,
                    carry,
                    cout,
                } => {
                    let [x1, x2, x3, x4] = ins.map(|w| wires[w as usize]);
                    let c = cin.is_some_and(|w| wires[w as usize]);
                    let first = x1 as u8 + x2 as u8 + x3 as u8;
                    let second = (first & 1) + x4 as u8 + c as u8;
                    wires[cout as usize] = first >= 2;
                    wires[carry as usize] = second >= 2;
                    wires[sum as usize] = second & 1 == 1;
                }
                Op::Full { ins, sum, carry } => {
                    let t: u8 = ins.iter().map(|&w| wires[w as usize] as u8).sum();
                    wires[sum as usize] = t & 1 == 1;
                    wires[carry as usize] = t >= 2;
                }
                Op::Half { ins, sum, carry } => {
                    let (x, y) = (wires[ins[0] as usize], wires[ins[1] as usize]);
                    wires[sum as usize] = x ^ y;
                    wires[carry as usize] = x & y;
                }
            }
        }
    }

    fn weigh(columns: &[Vec<Wire>], wires: &[bool]) -> u64 {
        columns
            .iter()
            .enumerate()
            .map(|(j, col)| (col.iter().filter(|&&w| wires[w as usize]).count() as u64) << j)
            .sum()
    }

    /// Product of `a` and `b` through the reduction tree. The final addition
    /// and compensation are exact modulo 2^16.
    pub fn evaluate(&self, a: u8, b: u8) -> u16 {
        let mut wires = [false; MAX_WIRES];
        self.run(a, b, &mut wires[..self.wires], None);
        let rows = Self::weigh(self.boundaries.last().expect("final rows"), &wires);
        (rows + self.plan.compensation as u64) as u16
    }

    pub fn trace(&self, a: u8, b: u8) -> Trace {
        let mut wires = vec![false; self.wires];
        let mut events = Vec::new();
        self.run(a, b, &mut wires, Some(&mut events));
        let stage_values = self
            .boundaries
            .iter()
            .map(|cols| Self::weigh(cols, &wires))
            .collect();
        Trace {
            stage_values,
            approx_events: events,
            result: self.evaluate(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressor::{table_from_error_pattern, ClampPolicy};
    use crate::multiplier::{exact_oracle, Family};

    #[test]
    fn exact_family_matches_oracle_exhaustive() {
        let m = Multiplier::new(MultiplierConfig::exact()).unwrap();
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(m.evaluate(a, b), exact_oracle(a, b), "{a}*{b}");
            }
        }
    }

    #[test]
    fn hybrid_threshold_zero_is_exact() {
        let m = Multiplier::new(MultiplierConfig::design1(0)).unwrap();
        for a in (0..=255u8).step_by(3) {
            for b in 0..=255u8 {
                assert_eq!(m.evaluate(a, b), exact_oracle(a, b));
            }
        }
    }

    #[test]
    fn proposed_identity_examples() {
        let m = Multiplier::new(MultiplierConfig::proposed()).unwrap();
        for x in 0..=255u8 {
            assert_eq!(m.evaluate(1, x), x as u16);
            assert_eq!(m.evaluate(0, x), 0);
            assert_eq!(m.evaluate(x, 0), 0);
        }
    }

    #[test]
    fn proposed_255_squared_golden() {
        // Frozen from an exhaustive run of this simulator.
        let m = Multiplier::new(MultiplierConfig::proposed()).unwrap();
        let v = m.evaluate(255, 255);
        assert!(v < 65025);
        assert_eq!(v, 59337);
    }

    #[test]
    fn conservation_per_stage() {
        for f in Family::ALL {
            let m = Multiplier::new(MultiplierConfig::new(f)).unwrap();
            let table = m.config().approx_table.clone();
            for (a, b) in [(255u8, 255u8), (173, 91), (15, 240), (128, 3), (77, 201)] {
                let t = m.trace(a, b);
                let mut value = t.stage_values[0] as i64;
                for s in 0..t.stage_values.len() - 1 {
                    let lost: i64 = t
                        .approx_events
                        .iter()
                        .filter(|e| e.stage == s)
                        .map(|e| table.value_error(e.pattern) as i64 * (1i64 << e.column))
                        .sum();
                    value += lost;
                    assert_eq!(value, t.stage_values[s + 1] as i64, "{f} stage {s}");
                }
            }
        }
    }

    #[test]
    fn trace_agrees_with_evaluate() {
        let m = Multiplier::new(MultiplierConfig::design2(4)).unwrap();
        let t = m.trace(200, 100);
        assert_eq!(t.result, m.evaluate(200, 100));
        assert_eq!((*t.stage_values.last().unwrap() + 12) as u16, t.result);
    }

    #[test]
    fn design2_zero_operand_yields_compensation() {
        let m = Multiplier::new(MultiplierConfig::design2(4)).unwrap();
        assert_eq!(m.evaluate(0, 99), 12);
        assert_eq!(m.evaluate(99, 0), 12);
    }

    #[test]
    fn custom_table_changes_result() {
        let t = table_from_error_pattern(&[15, 0], &ClampPolicy::default()).unwrap();
        let m = Multiplier::new(MultiplierConfig::proposed().with_table(t)).unwrap();
        // 0000 now reports 3, so even 0 * 0 is nonzero
        assert_ne!(m.evaluate(0, 0), 0);
    }

    #[test]
    fn from_plan_rejects_inconsistent_plans() {
        let cfg = MultiplierConfig::proposed();
        let mut plan = build_plan(&cfg).unwrap();
        plan.stages[0][7].push(Placement::Pass);
        assert!(matches!(
            Multiplier::from_plan(cfg.clone(), plan),
            Err(PlanError::BitCount {
                stage: 0,
                column: 7,
                ..
            })
        ));

        let mut short = build_plan(&cfg).unwrap();
        short.stages.pop();
        assert!(matches!(
            Multiplier::from_plan(cfg.clone(), short),
            Err(PlanError::Unreduced { .. })
        ));

        let mut order = build_plan(&cfg).unwrap();
        let col = order.stages[0]
            .iter_mut()
            .find(|c| c.len() > 1 && c[0].is_compressor() && !c[c.len() - 1].is_compressor())
            .expect("a mixed column");
        col.reverse();
        assert!(matches!(
            Multiplier::from_plan(cfg, order),
            Err(PlanError::Placement { .. })
        ));
    }
}
