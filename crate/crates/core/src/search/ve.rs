//! Max-sum variable elimination over finite-domain variables, carrying a
//! secondary objective and the number of maximizing assignments.

use rayon::prelude::*;

pub(crate) const NEG: i128 = i128::MIN;

/// Score of a partial assignment: `(primary, secondary)` compared
/// lexicographically, `primary == NEG` meaning infeasible, plus the number
/// of assignments reaching it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Cell {
    pub p: i128,
    pub s: i128,
    pub c: u128,
}

impl Cell {
    pub const INFEASIBLE: Cell = Cell { p: NEG, s: 0, c: 0 };
    pub const UNIT: Cell = Cell { p: 0, s: 0, c: 1 };

    pub fn feasible(&self) -> bool {
        self.p != NEG
    }

    pub fn key(&self) -> (i128, i128) {
        (self.p, self.s)
    }

    #[inline]
    fn times(self, o: Cell) -> Cell {
        if !self.feasible() || !o.feasible() {
            return Cell::INFEASIBLE;
        }
        Cell {
            p: self.p + o.p,
            s: self.s + o.s,
            c: self.c.saturating_mul(o.c),
        }
    }

    #[inline]
    fn absorb(&mut self, o: Cell) {
        if !o.feasible() {
            return;
        }
        if !self.feasible() || o.key() > self.key() {
            *self = o;
        } else if o.key() == self.key() {
            self.c = self.c.saturating_add(o.c);
        }
    }
}

/// Table over `scope` (ascending variable ids, last one fastest).
#[derive(Clone, Debug)]
pub(crate) struct Factor {
    pub scope: Vec<usize>,
    pub table: Vec<Cell>,
}

fn strides(scope: &[usize], dom: &[usize]) -> Vec<usize> {
    let mut s = vec![1; scope.len()];
    for k in (0..scope.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dom[scope[k + 1]];
    }
    s
}

impl Factor {
    /// Fixes `var` to `val`, dropping it from the scope.
    pub fn restrict(&self, var: usize, val: usize, dom: &[usize]) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let st = strides(&self.scope, dom);
        let scope: Vec<usize> = self.scope.iter().copied().filter(|&v| v != var).collect();
        let size: usize = scope.iter().map(|&v| dom[v]).product();
        let new_st = strides(&scope, dom);
        let table = (0..size)
            .map(|o| {
                let mut idx = val * st[pos];
                let mut rem = o;
                for (k, s) in new_st.iter().enumerate() {
                    let old_k = if k < pos { k } else { k + 1 };
                    idx += (rem / s) * st[old_k];
                    rem %= s;
                }
                self.table[idx]
            })
            .collect();
        Factor { scope, table }
    }
}

/// Greedy elimination order (smallest intermediate table first, ties to
/// the lowest id) and its total work in table cells.
pub(crate) fn elimination_order(dom: &[usize], factors: &[Factor], vars: &[usize]) -> (Vec<usize>, u128) {
    let mut scopes: Vec<Vec<usize>> = factors.iter().map(|f| f.scope.clone()).collect();
    let mut left: Vec<usize> = vars.to_vec();
    left.sort_unstable();
    let mut order = Vec::with_capacity(left.len());
    let mut work: u128 = 0;
    let union_of = |scopes: &[Vec<usize>], x: usize| {
        let mut u: Vec<usize> = scopes
            .iter()
            .filter(|s| s.contains(&x))
            .flat_map(|s| s.iter().copied())
            .collect();
        u.push(x);
        u.sort_unstable();
        u.dedup();
        u
    };
    let size_of = |u: &[usize]| u.iter().fold(1u128, |a, &v| a.saturating_mul(dom[v] as u128));
    while !left.is_empty() {
        let (k, u) = left
            .iter()
            .enumerate()
            .map(|(k, &x)| (k, union_of(&scopes, x)))
            .min_by_key(|(_, u)| size_of(u))
            .expect("nonempty");
        let x = left.remove(k);
        work = work.saturating_add(size_of(&u));
        scopes.retain(|s| !s.contains(&x));
        scopes.push(u.into_iter().filter(|&v| v != x).collect());
        order.push(x);
    }
    (order, work)
}

fn eliminate(factors: Vec<Factor>, x: usize, dom: &[usize]) -> Vec<Factor> {
    eliminate_keeping(factors, x, dom).0
}

/// Like [`eliminate`], also handing back the factors that mentioned `x`.
fn eliminate_keeping(factors: Vec<Factor>, x: usize, dom: &[usize]) -> (Vec<Factor>, Vec<Factor>) {
    let (touch, mut rest): (Vec<Factor>, Vec<Factor>) =
        factors.into_iter().partition(|f| f.scope.contains(&x));
    let mut scope: Vec<usize> = touch
        .iter()
        .flat_map(|f| f.scope.iter().copied())
        .filter(|&v| v != x)
        .collect();
    scope.sort_unstable();
    scope.dedup();
    let out_st = strides(&scope, dom);
    let size: usize = scope.iter().map(|&v| dom[v]).product();
    // per touching factor: stride of each output position, and of x
    let maps: Vec<(Vec<usize>, usize)> = touch
        .iter()
        .map(|f| {
            let st = strides(&f.scope, dom);
            let at = |v: usize| f.scope.iter().position(|&w| w == v).map_or(0, |k| st[k]);
            (scope.iter().map(|&v| at(v)).collect(), at(x))
        })
        .collect();
    let dx = dom[x];
    let table: Vec<Cell> = (0..size)
        .into_par_iter()
        .with_min_len(256)
        .map(|o| {
            let mut bases = vec![0usize; touch.len()];
            let mut rem = o;
            for (k, s) in out_st.iter().enumerate() {
                let d = rem / s;
                rem %= s;
                for (b, (m, _)) in bases.iter_mut().zip(&maps) {
                    *b += d * m[k];
                }
            }
            let mut acc = Cell::INFEASIBLE;
            for xv in 0..dx {
                let mut c = Cell::UNIT;
                for ((f, b), (_, sx)) in touch.iter().zip(&bases).zip(&maps) {
                    c = c.times(f.table[b + xv * sx]);
                    if !c.feasible() {
                        break;
                    }
                }
                acc.absorb(c);
            }
            acc
        })
        .collect();
    rest.push(Factor { scope, table });
    (rest, touch)
}

/// Eliminates `order` (which must cover every variable in every scope) and
/// returns the optimum.
pub(crate) fn solve(dom: &[usize], mut factors: Vec<Factor>, order: &[usize]) -> Cell {
    for &x in order {
        factors = eliminate(factors, x, dom);
    }
    factors.into_iter().fold(Cell::UNIT, |acc, f| {
        debug_assert!(f.scope.is_empty());
        acc.times(f.table[0])
    })
}

/// Optimum plus one maximizing assignment (indexed by variable id),
/// recovered by backtracking through the eliminated factors. Variables in
/// no factor get value 0.
pub(crate) fn solve_with_assignment(dom: &[usize], mut factors: Vec<Factor>, order: &[usize]) -> (Cell, Vec<usize>) {
    let mut kept: Vec<Vec<Factor>> = Vec::with_capacity(order.len());
    for &x in order {
        let (rest, touch) = eliminate_keeping(factors, x, dom);
        factors = rest;
        kept.push(touch);
    }
    let best = factors.into_iter().fold(Cell::UNIT, |acc, f| acc.times(f.table[0]));
    let mut asg = vec![0usize; dom.len()];
    for (&x, touch) in order.iter().zip(&kept).rev() {
        let mut pick = (0, Cell::INFEASIBLE);
        for xv in 0..dom[x] {
            asg[x] = xv;
            let mut c = Cell::UNIT;
            for f in touch {
                let st = strides(&f.scope, dom);
                let idx: usize = f.scope.iter().zip(&st).map(|(&v, s)| asg[v] * s).sum();
                c = c.times(f.table[idx]);
            }
            if c.feasible() && (!pick.1.feasible() || c.key() > pick.1.key()) {
                pick = (xv, c);
            }
        }
        asg[x] = pick.0;
    }
    (best, asg)
}
