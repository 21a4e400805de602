//! DE systems in solved form, on-shell reduction, decomposition of
//! differential functions into operator-applied combinations of the
//! equations, and linear differential operators with their adjoints.
//!
//! The off-shell bookkeeping is realized with slack variables: every leading
//! derivative descendant `u_{L+K}` is rewritten as `D_K(solved) + s_K`,
//! where `s` is a fresh dependent variable standing for the equation, so
//! operator extraction reduces to coefficient collection in the slack jets.

use crate::expr::{Atom, ExprError, Expression, MultiIndex, Rat};
use crate::jet::{JetError, JetSpace};
use num_traits::One;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("solved form for equation {0} contains a leading derivative or one of its descendants")]
    LeadingDerivativeInvalid(usize),
    #[error("leading derivatives are not distinct across equations")]
    DuplicateLeading,
    #[error("on-shell reduction did not reach a fixed point within {0} steps")]
    NonTerminating(usize),
    #[error("expression is nonlinear in the equation slack coordinates")]
    NotLinearInSlack,
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// One equation `F = 0` in solved form `leading = solved`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub name: String,
    pub expr: Expression,
    pub lead_dep: u16,
    pub lead_index: MultiIndex,
    pub solved: Expression,
}

/// A system of equations, each solved for a distinct leading derivative,
/// over a shared jet space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DESystem {
    pub space: JetSpace,
    pub equations: Vec<Equation>,
}

const REDUCE_STEP_BOUND: usize = 20_000;

impl DESystem {
    /// Builds a system from `(name, F, leading)` triples. Each `F` must be
    /// linear in its leading coordinate with a jet-free coefficient, and the
    /// resulting solved form must be free of every equation's leading
    /// derivative cone.
    pub fn new(
        space: JetSpace,
        eqs: Vec<(String, Expression, u16, MultiIndex)>,
    ) -> Result<DESystem, SystemError> {
        let mut leads: BTreeSet<(u16, MultiIndex)> = BTreeSet::new();
        for (_, _, d, i) in &eqs {
            if !leads.insert((*d, i.clone())) {
                return Err(SystemError::DuplicateLeading);
            }
        }
        let mut equations = Vec::new();
        for (idx, (name, expr, lead_dep, lead_index)) in eqs.into_iter().enumerate() {
            let lead_atom = Atom::jet(lead_dep, lead_index.clone());
            let coeff = expr.diff_partial(&lead_atom);
            if coeff.is_zero() || coeff.contains_atom(&lead_atom) {
                return Err(SystemError::LeadingDerivativeInvalid(idx));
            }
            // F = coeff*lead + rest  =>  lead = (coeff*lead - F)/coeff
            let rest = expr.clone() - coeff.clone() * Expression::atom(lead_atom.clone());
            let solved = (-rest).divided_by(&coeff);
            equations.push(Equation {
                name,
                expr,
                lead_dep,
                lead_index,
                solved,
            });
        }
        let sys = DESystem { space, equations };
        // Each solved form must stay outside its own equation's leading
        // cone; references to other equations' leadings are allowed (the
        // reduction is triangular) and guarded by the step bound.
        for (idx, eq) in sys.equations.iter().enumerate() {
            let mut bad = false;
            eq.solved.walk_atoms(&mut |a| {
                if let Atom::Jet { dep, index } = a {
                    if *dep == eq.lead_dep && index.contains(&eq.lead_index) {
                        bad = true;
                    }
                }
            });
            if bad {
                return Err(SystemError::LeadingDerivativeInvalid(idx));
            }
        }
        Ok(sys)
    }

    pub fn exprs(&self) -> Vec<Expression> {
        self.equations.iter().map(|e| e.expr.clone()).collect()
    }

    /// The leading-descendant jet of highest order occurring anywhere in
    /// `e`, together with the equation that rewrites it.
    fn find_descendant(&self, e: &Expression) -> Option<(Atom, usize, MultiIndex)> {
        let mut best: Option<(u32, Atom, usize, MultiIndex)> = None;
        e.walk_atoms(&mut |a| {
            if let Atom::Jet { dep, index } = a {
                for (eq_idx, eq) in self.equations.iter().enumerate() {
                    if *dep == eq.lead_dep && index.contains(&eq.lead_index) {
                        let k = index.minus(&eq.lead_index).unwrap();
                        let ord = index.order();
                        let better = match &best {
                            None => true,
                            Some((bord, batom, bidx, _)) => {
                                (ord, a, eq_idx) > (*bord, batom, *bidx)
                            }
                        };
                        if better {
                            best = Some((ord, a.clone(), eq_idx, k));
                        }
                        break;
                    }
                }
            }
        });
        best.map(|(_, atom, idx, k)| (atom, idx, k))
    }

    /// Replaces every leading derivative and descendant through the solved
    /// forms and their total derivatives, to a fixed point. The result
    /// contains no leading descendants.
    pub fn reduce_on_shell(&self, e: &Expression) -> Result<Expression, SystemError> {
        let mut cur = e.clone();
        for _ in 0..REDUCE_STEP_BOUND {
            let (atom, eq_idx, k) = match self.find_descendant(&cur) {
                None => return Ok(cur),
                Some(hit) => hit,
            };
            let eq = &self.equations[eq_idx];
            let replacement = self.space.iterated_total_derivative(&eq.solved, &k)?;
            let bindings = BTreeMap::from([(atom, replacement)]);
            cur = cur.substitute(&bindings)?;
        }
        Err(SystemError::NonTerminating(REDUCE_STEP_BOUND))
    }

    /// Componentwise reduction of a tuple.
    pub fn reduce_all(&self, es: &[Expression]) -> Result<Vec<Expression>, SystemError> {
        es.iter().map(|e| self.reduce_on_shell(e)).collect()
    }
}

// ---------------------------------------------------------------------------
// Linear differential operators
// ---------------------------------------------------------------------------

/// Finite sum `sum_I R^I D_I` of total-derivative monomials with expression
/// coefficients, organized in (row, column) blocks. Absent entries are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearDiffOperator {
    pub rows: usize,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), BTreeMap<MultiIndex, Expression>>,
}

impl LinearDiffOperator {
    pub fn zero(rows: usize, cols: usize) -> Self {
        LinearDiffOperator {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize, space: &JetSpace) -> Self {
        let mut op = LinearDiffOperator::zero(n, n);
        for a in 0..n {
            op.add_coeff(a, a, MultiIndex::zero(space.n_indep()), Expression::one());
        }
        op
    }

    pub fn add_coeff(&mut self, row: usize, col: usize, index: MultiIndex, coeff: Expression) {
        if coeff.is_zero() {
            return;
        }
        let empty = {
            let cell = self.entries.entry((row, col)).or_default();
            let entry = cell.entry(index).or_insert_with(Expression::zero);
            *entry = entry.clone() + coeff;
            if entry.is_zero() {
                cell.retain(|_, c| !c.is_zero());
            }
            cell.is_empty()
        };
        if empty {
            self.entries.remove(&(row, col));
        }
    }

    pub fn coeff(&self, row: usize, col: usize, index: &MultiIndex) -> Expression {
        self.entries
            .get(&(row, col))
            .and_then(|cell| cell.get(index))
            .cloned()
            .unwrap_or_else(Expression::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Maximum derivative order over all entries.
    pub fn order(&self) -> u32 {
        self.entries
            .values()
            .flat_map(|cell| cell.keys())
            .map(|i| i.order())
            .max()
            .unwrap_or(0)
    }

    /// `(R g)_row = sum_{col,I} R^I_{row,col} D_I g_col`.
    pub fn apply(&self, space: &JetSpace, g: &[Expression]) -> Result<Vec<Expression>, JetError> {
        assert_eq!(g.len(), self.cols);
        let mut out = vec![Expression::zero(); self.rows];
        for ((row, col), cell) in &self.entries {
            for (index, coeff) in cell {
                let d = space.iterated_total_derivative(&g[*col], index)?;
                out[*row] = out[*row].clone() + coeff.clone() * d;
            }
        }
        Ok(out)
    }

    /// Formal adjoint: `(R* v)_col = sum_{row,I} (-1)^{|I|} D_I(R^I_{row,col} v_row)`,
    /// expanded into coefficient form via the Leibniz rule. Satisfies
    /// `(R*)* = R` coefficient-wise.
    pub fn adjoint(&self, space: &JetSpace) -> Result<LinearDiffOperator, JetError> {
        let mut out = LinearDiffOperator::zero(self.cols, self.rows);
        for ((row, col), cell) in &self.entries {
            for (index, coeff) in cell {
                let sign = if index.order() % 2 == 0 {
                    Rat::one()
                } else {
                    -Rat::one()
                };
                for j in index.sub_indices() {
                    let k = index.minus(&j).unwrap();
                    let dcoeff = space.iterated_total_derivative(coeff, &k)?;
                    let weight = index.binom(&j);
                    out.add_coeff(
                        *col,
                        *row,
                        j,
                        dcoeff.scaled(&(sign.clone() * weight)),
                    );
                }
            }
        }
        Ok(out)
    }

    /// Boundary current for the operator pairing:
    /// `v.R(w) - R*(v).w = Div Theta` with `Theta` assembled by the same
    /// telescoping scheme used for the Fréchet pairing.
    pub fn pairing_boundary(
        &self,
        space: &JetSpace,
        v: &[Expression],
        w: &[Expression],
    ) -> Result<crate::variational::CurrentVector, JetError> {
        assert_eq!(v.len(), self.rows);
        assert_eq!(w.len(), self.cols);
        let mut out = vec![Expression::zero(); space.n_indep()];
        for ((row, col), cell) in &self.entries {
            for (index, coeff) in cell {
                if index.order() == 0 {
                    continue;
                }
                let g = v[*row].clone() * coeff.clone();
                crate::variational::telescope_into(space, &g, &w[*col], index, &mut out)?;
            }
        }
        Ok(crate::variational::CurrentVector(out))
    }
}

// ---------------------------------------------------------------------------
// Off-shell decomposition
// ---------------------------------------------------------------------------

/// Result of writing `e = residual + sum_I R^{aI} D_I F_a` with the residual
/// equal to the on-shell reduction. `exact` is false when the input was
/// nonlinear in the equations, in which case some operator coefficients
/// contain the equations themselves.
#[derive(Debug, Clone)]
pub struct OffShellDecomposition {
    pub residual: Vec<Expression>,
    pub operator: LinearDiffOperator,
    pub exact: bool,
}

impl DESystem {
    /// Decomposes each component of `e` as an operator applied to the
    /// equations plus an on-shell residual.
    pub fn decompose_off_shell(
        &self,
        e: &[Expression],
    ) -> Result<OffShellDecomposition, SystemError> {
        let m = self.equations.len();
        let slack_names: Vec<String> = (0..m)
            .map(|a| self.space.fresh_dep_name(&format!("s{a}")))
            .collect();
        let refs: Vec<&str> = slack_names.iter().map(|s| s.as_str()).collect();
        let (ext, slack_ids) = self.space.extended_with_deps(&refs);

        let mut residual = Vec::with_capacity(e.len());
        let mut op = LinearDiffOperator::zero(e.len(), m);
        let mut exact = true;

        for (row, comp) in e.iter().enumerate() {
            let slackified = self.slackify(&ext, &slack_ids, comp)?;
            // Collect in the slack jets.
            let mut slack_atoms: BTreeSet<Atom> = BTreeSet::new();
            slackified.walk_atoms(&mut |a| {
                if let Atom::Jet { dep, .. } = a {
                    if slack_ids.contains(dep) {
                        slack_atoms.insert(a.clone());
                    }
                }
            });
            let groups = slackified.collect(&slack_atoms)?;
            for (mono, coeff) in groups {
                if mono.is_unit() {
                    residual.push(coeff);
                    continue;
                }
                if mono.degree() == 1 {
                    let (atom, _) = mono.0.iter().next().unwrap();
                    if let Atom::Jet { dep, index } = atom {
                        let a = slack_ids.iter().position(|d| d == dep).unwrap();
                        op.add_coeff(row, a, index.clone(), coeff);
                        continue;
                    }
                    unreachable!("slack monomials contain slack jets only");
                }
                // Nonlinear in the equations: peel off the largest slack jet
                // and substitute the rest back as derivatives of F.
                exact = false;
                let (atom, &k) = mono.0.iter().next_back().unwrap();
                if let Atom::Jet { dep, index } = atom.clone() {
                    let a = slack_ids.iter().position(|d| *d == dep).unwrap();
                    let mut rest = mono.0.clone();
                    if k == 1 {
                        rest.remove(atom);
                    } else {
                        rest.insert(atom.clone(), k - 1);
                    }
                    let mut factor = coeff;
                    for (ra, rk) in rest {
                        if let Atom::Jet { dep: rd, index: ri } = &ra {
                            if let Some(b) = slack_ids.iter().position(|d| d == rd) {
                                let df = self
                                    .space
                                    .iterated_total_derivative(&self.equations[b].expr, ri)?;
                                factor = factor * df.pow(rk);
                                continue;
                            }
                        }
                        factor = factor * Expression::atom(ra).pow(rk);
                    }
                    op.add_coeff(row, a, index, factor);
                }
            }
            while residual.len() < row + 1 {
                residual.push(Expression::zero());
            }
        }
        Ok(OffShellDecomposition {
            residual,
            operator: op,
            exact,
        })
    }

    /// Scalar convenience wrapper.
    pub fn decompose_scalar(
        &self,
        e: &Expression,
    ) -> Result<OffShellDecomposition, SystemError> {
        self.decompose_off_shell(std::slice::from_ref(e))
    }

    /// Rewrites every leading descendant `u_{L+K}` as
    /// `D_K(solved) + s_K`, to a fixed point.
    fn slackify(
        &self,
        ext: &JetSpace,
        slack_ids: &[u16],
        e: &Expression,
    ) -> Result<Expression, SystemError> {
        let mut cur = e.clone();
        for _ in 0..REDUCE_STEP_BOUND {
            let (atom, eq_idx, k) = match self.find_descendant(&cur) {
                None => return Ok(cur),
                Some(hit) => hit,
            };
            let eq = &self.equations[eq_idx];
            let solved_part = ext.iterated_total_derivative(&eq.solved, &k)?;
            let slack_part = Expression::atom(Atom::jet(slack_ids[eq_idx], k.clone()));
            let bindings = BTreeMap::from([(atom, solved_part + slack_part)]);
            cur = cur.substitute(&bindings)?;
        }
        Err(SystemError::NonTerminating(REDUCE_STEP_BOUND))
    }

    /// Reconstructs `residual + sum R^{aI} D_I F_a`; used by tests to close
    /// the round trip.
    pub fn recompose(
        &self,
        dec: &OffShellDecomposition,
    ) -> Result<Vec<Expression>, SystemError> {
        let f = self.exprs();
        let applied = dec.operator.apply(&self.space, &f)?;
        Ok(dec
            .residual
            .iter()
            .zip(applied)
            .map(|(r, a)| r.clone() + a)
            .collect())
    }
}
