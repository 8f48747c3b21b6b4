use std::collections::VecDeque;

use super::{LinearModel, Relation, Sense, VarKind};
use crate::error::{Error, Result};

/// Search nodes allowed by default before [`enumerate`] gives up.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 2_000_000;

const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Best objective value in the model's own sense; `None` when infeasible.
    pub optimum: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub nodes: u64,
}

/// A `<=` row with per-row tolerance.
struct Leq {
    terms: Vec<(usize, f64)>,
    rhs: f64,
    slack: f64,
}

struct Search<'a> {
    model: &'a LinearModel,
    rows: Vec<Leq>,
    rows_of: Vec<Vec<usize>>,
    /// Objective in maximization form.
    objective: Vec<(usize, f64)>,
    binaries: Vec<usize>,
    limit: u64,
    nodes: u64,
    best: Option<(f64, Vec<f64>)>,
}

/// Exhaustive search over the binaries with bound propagation.
///
/// Continuous variables must be fixed by propagation once every binary is
/// fixed, except for variables only bounded in the direction the objective
/// pushes them; a leaf where that fails is reported as an error.
pub fn enumerate(model: &LinearModel, limit: u64) -> Result<Enumeration> {
    let mut rows = Vec::new();
    for row in &model.rows {
        let scale = 1.0 + row.rhs.abs() + row.terms.iter().map(|&(_, a)| a.abs()).fold(0.0, f64::max);
        let slack = TOLERANCE * scale;
        let negated = || row.terms.iter().map(|&(v, a)| (v, -a)).collect();
        match row.relation {
            Relation::Le => rows.push(Leq { terms: row.terms.clone(), rhs: row.rhs, slack }),
            Relation::Ge => rows.push(Leq { terms: negated(), rhs: -row.rhs, slack }),
            Relation::Eq => {
                rows.push(Leq { terms: row.terms.clone(), rhs: row.rhs, slack });
                rows.push(Leq { terms: negated(), rhs: -row.rhs, slack });
            }
        }
    }
    let mut rows_of = vec![Vec::new(); model.variables.len()];
    for (r, row) in rows.iter().enumerate() {
        for &(v, _) in &row.terms {
            rows_of[v].push(r);
        }
    }
    let sign = match model.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut search = Search {
        model,
        rows,
        rows_of,
        objective: model.objective.iter().map(|&(v, c)| (v, sign * c)).collect(),
        binaries: (0..model.variables.len()).filter(|&v| model.variables[v].kind == VarKind::Binary).collect(),
        limit,
        nodes: 0,
        best: None,
    };
    let lo: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let all: Vec<usize> = (0..search.rows.len()).collect();
    search.dfs(lo, hi, &all)?;
    let nodes = search.nodes;
    Ok(match search.best {
        Some((value, values)) => Enumeration { optimum: Some(sign * value), values: Some(values), nodes },
        None => Enumeration { optimum: None, values: None, nodes },
    })
}

impl Search<'_> {
    fn dfs(&mut self, mut lo: Vec<f64>, mut hi: Vec<f64>, dirty: &[usize]) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::EnumerationBudget { limit: self.limit });
        }
        if !self.propagate(&mut lo, &mut hi, dirty) {
            return Ok(());
        }
        if let Some((best, _)) = &self.best {
            let bound: f64 = self.objective.iter().map(|&(v, c)| if c > 0.0 { c * hi[v] } else { c * lo[v] }).sum();
            if bound <= *best {
                return Ok(());
            }
        }
        let Some(&v) = self.binaries.iter().find(|&&v| lo[v] < hi[v]) else {
            return self.leaf(&lo, &hi);
        };
        let dirty: Vec<usize> = self.rows_of[v].clone();
        for value in [1.0, 0.0] {
            let (mut l, mut h) = (lo.clone(), hi.clone());
            l[v] = value;
            h[v] = value;
            self.dfs(l, h, &dirty)?;
        }
        Ok(())
    }

    fn leaf(&mut self, lo: &[f64], hi: &[f64]) -> Result<()> {
        let mut values = lo.to_vec();
        for &(v, c) in &self.objective {
            values[v] = if c > 0.0 { hi[v] } else { lo[v] };
            if !values[v].is_finite() {
                return Err(Error::InvalidInput(format!("objective unbounded in {}", self.model.variables[v].name)));
            }
        }
        for (v, x) in values.iter_mut().enumerate() {
            if !x.is_finite() {
                *x = if hi[v].is_finite() { hi[v] } else { 0.0 };
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let act: f64 = row.terms.iter().map(|&(v, a)| a * values[v]).sum();
            let magnitude: f64 = row.terms.iter().map(|&(v, a)| (a * values[v]).abs()).sum();
            if act > row.rhs + row.slack + TOLERANCE * magnitude {
                let name = &self.model.rows[self.original_row(r)].name;
                return Err(Error::InvalidInput(format!(
                    "continuous variables of row {name} are not fixed by the binaries"
                )));
            }
        }
        let value: f64 = self.objective.iter().map(|&(v, c)| c * values[v]).sum();
        if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
            self.best = Some((value, values));
        }
        Ok(())
    }

    fn original_row(&self, normalized: usize) -> usize {
        let mut k = 0;
        for (r, row) in self.model.rows.iter().enumerate() {
            k += if row.relation == Relation::Eq { 2 } else { 1 };
            if normalized < k {
                return r;
            }
        }
        unreachable!("row index in range")
    }

    /// Tightens bounds to a fixpoint; false when some row cannot be met.
    fn propagate(&self, lo: &mut [f64], hi: &mut [f64], dirty: &[usize]) -> bool {
        let mut queued = vec![false; self.rows.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &r in dirty {
            if !queued[r] {
                queued[r] = true;
                queue.push_back(r);
            }
        }
        let mut budget = 200 * self.rows.len().max(1);
        while let Some(r) = queue.pop_front() {
            queued[r] = false;
            budget = match budget.checked_sub(1) {
                Some(b) => b,
                None => break,
            };
            let row = &self.rows[r];
            let mins: Vec<f64> = row.terms.iter().map(|&(v, a)| if a > 0.0 { a * lo[v] } else { a * hi[v] }).collect();
            let mut finite = 0.0;
            let mut infinite = 0usize;
            for &m in &mins {
                if m.is_finite() {
                    finite += m;
                } else {
                    infinite += 1;
                }
            }
            if infinite == 0 && finite > row.rhs + row.slack {
                return false;
            }
            if infinite > 1 {
                continue;
            }
            for (&(v, a), &m) in row.terms.iter().zip(&mins) {
                let rest = if m.is_finite() {
                    if infinite > 0 {
                        continue;
                    }
                    finite - m
                } else {
                    finite
                };
                let limit = (row.rhs - rest) / a;
                let binary = self.model.variables[v].kind == VarKind::Binary;
                let changed = if a > 0.0 {
                    let new_hi = if binary { (limit + row.slack / a).floor() } else { limit };
                    tighten_hi(lo[v], &mut hi[v], new_hi)
                } else {
                    let new_lo = if binary { (limit + row.slack / a).ceil() } else { limit };
                    tighten_lo(&mut lo[v], hi[v], new_lo)
                };
                match changed {
                    None => return false,
                    Some(false) => {}
                    Some(true) => {
                        for &q in &self.rows_of[v] {
                            if q != r && !queued[q] {
                                queued[q] = true;
                                queue.push_back(q);
                            }
                        }
                    }
                }
            }
        }
        true
    }
}

fn significant(old: f64, new: f64) -> bool {
    !old.is_finite() || (old - new).abs() > TOLERANCE * (1.0 + new.abs())
}

/// `None` when the bounds cross, otherwise whether `hi` moved.
fn tighten_hi(lo: f64, hi: &mut f64, new: f64) -> Option<bool> {
    if new >= *hi {
        return Some(false);
    }
    if new < lo {
        if lo - new > TOLERANCE * (1.0 + lo.abs()) {
            return None;
        }
        let moved = *hi != lo;
        *hi = lo;
        return Some(moved);
    }
    let moved = significant(*hi, new);
    if moved {
        *hi = new;
    }
    Some(moved)
}

fn tighten_lo(lo: &mut f64, hi: f64, new: f64) -> Option<bool> {
    if new <= *lo {
        return Some(false);
    }
    if new > hi {
        if new - hi > TOLERANCE * (1.0 + hi.abs()) {
            return None;
        }
        let moved = *lo != hi;
        *lo = hi;
        return Some(moved);
    }
    let moved = significant(*lo, new);
    if moved {
        *lo = new;
    }
    Some(moved)
}
