//! Conservation-law machinery: symmetry and adjoint-symmetry residuals and
//! operators, the pair current formula with its multiplier and triviality
//! test, multiplier determining systems with the Helmholtz-type split,
//! multiplier extraction from currents, the symmetry action on currents,
//! determining-system generation for ansätze, and direct integration of
//! characteristic equations.

use crate::desystem::{DESystem, LinearDiffOperator, SystemError};
use crate::expr::{Atom, Expression, Monomial, MultiIndex, Rat};
use crate::jet::{GeneratorCharacteristic, JetError, JetSpace};
use crate::variational::{
    adjoint_frechet, frechet, pair_boundary_current, CurrentVector, VariationalError,
};
use num_traits::One;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LawError {
    #[error("the given characteristic is not a symmetry: residual {0} is nonzero on shell")]
    NotASymmetry(usize),
    #[error("the given functions are not an adjoint-symmetry: residual {0} is nonzero on shell")]
    NotAnAdjointSymmetry(usize),
    #[error("the given current is not conserved on shell")]
    NotConserved,
    #[error("characteristic integration left an unabsorbed residue: {0}")]
    IntegrationIncomplete(String),
    #[error("substitution target is singular on the solution space")]
    SingularOnShell,
    #[error("ansatz arguments must be independent variables and a prefix-closed set of jet coordinates")]
    InvalidAnsatz,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Where a multiplier came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierProvenance {
    Given,
    ExtractedFromCurrent,
    PairFormula,
}

/// Conservation-law multiplier `Q^a`, one component per equation.
#[derive(Debug, Clone)]
pub struct Multiplier {
    pub components: Vec<Expression>,
    pub order: u32,
    pub provenance: MultiplierProvenance,
}

impl Multiplier {
    pub fn new(components: Vec<Expression>, provenance: MultiplierProvenance) -> Self {
        let order = components.iter().map(|c| c.jet_order()).max().unwrap_or(0);
        Multiplier {
            components,
            order,
            provenance,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    /// Non-singularity on the solution space: every denominator must stay
    /// nonzero after on-shell reduction.
    pub fn check_nonsingular(&self, sys: &DESystem) -> Result<(), LawError> {
        for c in &self.components {
            if let Some(d) = c.denominator() {
                if sys.reduce_on_shell(d)?.is_zero() {
                    return Err(LawError::SingularOnShell);
                }
            }
        }
        Ok(())
    }
}

/// Conserved current with its verification status and extracted multiplier.
#[derive(Debug, Clone)]
pub struct ConservedCurrent {
    pub components: CurrentVector,
    pub verified: bool,
    pub multiplier: Option<Multiplier>,
}

// ---------------------------------------------------------------------------
// Determining residuals and operator extraction
// ---------------------------------------------------------------------------

/// On-shell residual of the symmetry determining equation `delta_P F = 0`.
pub fn symmetry_residual(
    sys: &DESystem,
    p: &[Expression],
) -> Result<Vec<Expression>, LawError> {
    let lin = frechet(&sys.space, &sys.exprs(), p)?;
    Ok(sys.reduce_all(&lin)?)
}

/// On-shell residual of the adjoint-symmetry determining equation
/// `delta*_Q F = 0`.
pub fn adjoint_symmetry_residual(
    sys: &DESystem,
    q: &[Expression],
) -> Result<Vec<Expression>, LawError> {
    let adj = adjoint_frechet(&sys.space, &sys.exprs(), q)?;
    Ok(sys.reduce_all(&adj)?)
}

pub fn is_symmetry(sys: &DESystem, p: &[Expression]) -> Result<bool, LawError> {
    Ok(symmetry_residual(sys, p)?.iter().all(|r| r.is_zero()))
}

pub fn is_adjoint_symmetry(sys: &DESystem, q: &[Expression]) -> Result<bool, LawError> {
    Ok(adjoint_symmetry_residual(sys, q)?.iter().all(|r| r.is_zero()))
}

fn require_symmetry(sys: &DESystem, p: &[Expression]) -> Result<(), LawError> {
    for (i, r) in symmetry_residual(sys, p)?.iter().enumerate() {
        if !r.is_zero() {
            return Err(LawError::NotASymmetry(i));
        }
    }
    Ok(())
}

fn require_adjoint_symmetry(sys: &DESystem, q: &[Expression]) -> Result<(), LawError> {
    for (i, r) in adjoint_symmetry_residual(sys, q)?.iter().enumerate() {
        if !r.is_zero() {
            return Err(LawError::NotAnAdjointSymmetry(i));
        }
    }
    Ok(())
}

/// Operator `R_P` with `delta_P F = R_P(F)` off shell, for a symmetry `P`.
pub fn extract_symmetry_operator(
    sys: &DESystem,
    p: &[Expression],
) -> Result<LinearDiffOperator, LawError> {
    require_symmetry(sys, p)?;
    let lin = frechet(&sys.space, &sys.exprs(), p)?;
    let dec = sys.decompose_off_shell(&lin)?;
    Ok(dec.operator)
}

/// Operator `R_Q` with `delta*_Q F = R_Q(F)` off shell, for an
/// adjoint-symmetry `Q`.
pub fn extract_adjsymmetry_operator(
    sys: &DESystem,
    q: &[Expression],
) -> Result<LinearDiffOperator, LawError> {
    require_adjoint_symmetry(sys, q)?;
    let adj = adjoint_frechet(&sys.space, &sys.exprs(), q)?;
    let dec = sys.decompose_off_shell(&adj)?;
    Ok(dec.operator)
}

// ---------------------------------------------------------------------------
// The pair formula
// ---------------------------------------------------------------------------

/// Conserved current `Psi(P,Q;F)` from a symmetry/adjoint-symmetry pair,
/// verified to be divergence-free on shell, with its multiplier attached.
pub fn pair_conserved_current(
    sys: &DESystem,
    p: &[Expression],
    q: &[Expression],
) -> Result<ConservedCurrent, LawError> {
    require_symmetry(sys, p)?;
    require_adjoint_symmetry(sys, q)?;
    let psi = pair_boundary_current(&sys.space, &sys.exprs(), p, q)?;
    let div = psi.divergence(&sys.space)?;
    let verified = sys.reduce_on_shell(&div)?.is_zero();
    let multiplier = pair_multiplier(sys, p, q)?;
    Ok(ConservedCurrent {
        components: psi,
        verified,
        multiplier: Some(multiplier),
    })
}

/// Multiplier of the pair current: `Q_Psi = R_P*(Q) - R_Q*(P)`.
pub fn pair_multiplier(
    sys: &DESystem,
    p: &[Expression],
    q: &[Expression],
) -> Result<Multiplier, LawError> {
    let rp = extract_symmetry_operator(sys, p)?;
    let rq = extract_adjsymmetry_operator(sys, q)?;
    let rp_star = rp.adjoint(&sys.space)?;
    let rq_star = rq.adjoint(&sys.space)?;
    let first = rp_star.apply(&sys.space, q)?;
    let second = rq_star.apply(&sys.space, p)?;
    let components: Vec<Expression> = first
        .into_iter()
        .zip(second)
        .map(|(a, b)| a - b)
        .collect();
    Ok(Multiplier::new(components, MultiplierProvenance::PairFormula))
}

/// True iff the pair current is locally trivial, i.e. the pair multiplier
/// vanishes on shell.
pub fn is_trivial_pair(
    sys: &DESystem,
    p: &[Expression],
    q: &[Expression],
) -> Result<bool, LawError> {
    let m = pair_multiplier(sys, p, q)?;
    let reduced = sys.reduce_all(&m.components)?;
    Ok(reduced.iter().all(|r| r.is_zero()))
}

// ---------------------------------------------------------------------------
// Multiplier determining equations
// ---------------------------------------------------------------------------

/// Adjoint Fréchet derivative of `Q` in the direction of the equations:
/// `(delta*_F Q)_alpha = sum_I (-1)^{|I|} D_I(F_a dQ^a/du^alpha_I)`.
fn adjoint_frechet_along_equations(
    sys: &DESystem,
    q: &[Expression],
) -> Result<Vec<Expression>, LawError> {
    let f = sys.exprs();
    Ok(adjoint_frechet(&sys.space, q, &f)?)
}

/// Residuals whose joint vanishing characterizes a conservation-law
/// multiplier: the on-shell adjoint-symmetry residual plus the canonical
/// coefficients of `E(Q.F) = delta*_Q F + delta*_F Q` collected over the
/// equations and their derivatives (the Helmholtz-type conditions).
pub fn multiplier_residuals(
    sys: &DESystem,
    q: &[Expression],
) -> Result<(Vec<Expression>, Vec<Expression>), LawError> {
    Multiplier::new(q.to_vec(), MultiplierProvenance::Given).check_nonsingular(sys)?;
    let adj = adjoint_frechet(&sys.space, &sys.exprs(), q)?;
    let along = adjoint_frechet_along_equations(sys, q)?;
    let total: Vec<Expression> = adj
        .iter()
        .zip(&along)
        .map(|(a, b)| a.clone() + b.clone())
        .collect();
    let dec = sys.decompose_off_shell(&total)?;
    let adjsym_residual = sys.reduce_all(&adj)?;
    let mut helmholtz = Vec::new();
    for cell in dec.operator.entries.values() {
        for coeff in cell.values() {
            if !coeff.is_zero() {
                helmholtz.push(coeff.clone());
            }
        }
    }
    Ok((adjsym_residual, helmholtz))
}

/// True iff `Q` is a conservation-law multiplier: `E(Q.F) = 0` identically
/// in jet space, checked through the equivalent split system.
pub fn is_multiplier(sys: &DESystem, q: &[Expression]) -> Result<bool, LawError> {
    let (adjsym, helmholtz) = multiplier_residuals(sys, q)?;
    Ok(adjsym.iter().all(|r| r.is_zero()) && helmholtz.iter().all(|r| r.is_zero()))
}

/// Extracts the multiplier of a conserved current by decomposing its
/// divergence off shell and integrating the operator coefficients by parts:
/// `Q^a = sum_I (-1)^{|I|} D_I R^{aI}`. A zero multiplier certifies local
/// triviality for systems in the admitted class.
pub fn multiplier_from_current(
    sys: &DESystem,
    current: &CurrentVector,
) -> Result<Multiplier, LawError> {
    let div = current.divergence(&sys.space)?;
    if !sys.reduce_on_shell(&div)?.is_zero() {
        return Err(LawError::NotConserved);
    }
    let dec = sys.decompose_scalar(&div)?;
    let mut components = vec![Expression::zero(); sys.equations.len()];
    for ((_, col), cell) in &dec.operator.entries {
        for (index, coeff) in cell {
            let derived = sys.space.iterated_total_derivative(coeff, index)?;
            if index.order() % 2 == 0 {
                components[*col] = components[*col].clone() + derived;
            } else {
                components[*col] = components[*col].clone() - derived;
            }
        }
    }
    Ok(Multiplier::new(
        components,
        MultiplierProvenance::ExtractedFromCurrent,
    ))
}

/// Componentwise Fréchet action of a symmetry characteristic on a current.
pub fn symmetry_apply_to_current(
    space: &JetSpace,
    p: &[Expression],
    current: &CurrentVector,
) -> Result<CurrentVector, LawError> {
    let acted = frechet(space, &current.0, p)?;
    Ok(CurrentVector(acted))
}

// ---------------------------------------------------------------------------
// Determining systems for ansätze
// ---------------------------------------------------------------------------

/// What the unknown functions of an ansatz are required to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminingMode {
    AdjointSymmetry,
    Multiplier,
}

/// Overdetermined linear system produced by coefficient splitting of a
/// determining equation over an unknown-function ansatz. `equations` holds
/// the split adjoint-symmetry residual; `helmholtz` holds the extra
/// conditions appended in multiplier mode.
#[derive(Debug, Clone)]
pub struct DeterminingSystem {
    pub unknown: String,
    pub args: Vec<Atom>,
    pub equations: Vec<Expression>,
    pub helmholtz: Vec<Expression>,
}

impl DeterminingSystem {
    pub fn all_equations(&self) -> Vec<Expression> {
        let mut v = self.equations.clone();
        v.extend(self.helmholtz.clone());
        v
    }
}

fn validate_ansatz(space: &JetSpace, args: &[Atom]) -> Result<(), LawError> {
    let jets: BTreeSet<(u16, MultiIndex)> = args
        .iter()
        .filter_map(|a| match a {
            Atom::Jet { dep, index } => Some((*dep, index.clone())),
            _ => None,
        })
        .collect();
    for a in args {
        match a {
            Atom::Indep(_) => {}
            Atom::Jet { dep, index } => {
                // Prefix-closed: every lower multi-index of the same
                // dependent variable must also be an argument.
                for sub in index.sub_indices() {
                    if sub != *index && !jets.contains(&(*dep, sub.clone())) {
                        return Err(LawError::InvalidAnsatz);
                    }
                }
            }
            _ => return Err(LawError::InvalidAnsatz),
        }
    }
    let _ = space;
    Ok(())
}

/// Generates the determining system for an unknown ansatz `Q(args)` on the
/// given system, by reducing the chosen determining equation on shell and
/// splitting over all jet monomials whose coordinates are not ansatz
/// arguments. In multiplier mode, the Helmholtz-type conditions (the
/// canonical equation-coefficients of the full multiplier equation) are
/// split the same way and appended, with duplicates of adjoint-symmetry
/// equations removed.
pub fn generate_determining_system(
    sys: &DESystem,
    unknown: &str,
    mode: DeterminingMode,
) -> Result<DeterminingSystem, LawError> {
    let sig = sys
        .space
        .unknown_signature(unknown)
        .cloned()
        .ok_or(LawError::InvalidAnsatz)?;
    validate_ansatz(&sys.space, &sig)?;
    let m = sys.equations.len();
    // The ansatz has one unknown component per equation when M > 1; for the
    // common scalar case a single symbol is used directly.
    if m != 1 {
        return Err(LawError::InvalidAnsatz);
    }
    let q = vec![sys.space.unknown_expr(unknown)];

    let adj = adjoint_frechet(&sys.space, &sys.exprs(), &q)?;
    let reduced = sys.reduce_all(&adj)?;
    let mut equations = Vec::new();
    for r in &reduced {
        equations.extend(split_over_non_ansatz(r, &sig)?);
    }
    dedupe_normalized(&mut equations);

    let mut helmholtz = Vec::new();
    if mode == DeterminingMode::Multiplier {
        let along = adjoint_frechet_along_equations(sys, &q)?;
        let total: Vec<Expression> = adj
            .iter()
            .zip(&along)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        let dec = sys.decompose_off_shell(&total)?;
        for cell in dec.operator.entries.values() {
            for coeff in cell.values() {
                helmholtz.extend(split_over_non_ansatz(coeff, &sig)?);
            }
        }
        dedupe_normalized(&mut helmholtz);
        helmholtz.retain(|h| !equations.iter().any(|e| e == h));
    }

    Ok(DeterminingSystem {
        unknown: unknown.to_string(),
        args: sig.as_ref().clone(),
        equations,
        helmholtz,
    })
}

/// Splits an expression over all monomials in jet coordinates that are not
/// ansatz arguments, returning one content-normalized equation per
/// coefficient. Arbitrary-function atoms are never split over.
fn split_over_non_ansatz(
    e: &Expression,
    args: &[Atom],
) -> Result<Vec<Expression>, LawError> {
    let arg_set: BTreeSet<Atom> = args.iter().cloned().collect();
    let mut split_vars: BTreeSet<Atom> = BTreeSet::new();
    e.walk_atoms(&mut |a| {
        if let Atom::Jet { .. } = a {
            if !arg_set.contains(a) {
                split_vars.insert(a.clone());
            }
        }
    });
    let groups = e.collect(&split_vars).map_err(SystemError::from)?;
    let mut out: Vec<Expression> = Vec::new();
    for (_, coeff) in groups {
        let c = coeff.content_normalized();
        if !c.is_zero() {
            out.push(c);
        }
    }
    Ok(out)
}

fn dedupe_normalized(eqs: &mut Vec<Expression>) {
    let mut seen = BTreeSet::new();
    eqs.retain(|e| seen.insert(e.clone()));
}

// ---------------------------------------------------------------------------
// Linear reduction of determining systems
// ---------------------------------------------------------------------------

/// Reduces `target` modulo a set of equations that are linear in
/// unknown-function partial atoms, by Gaussian elimination with
/// expression-coefficient pivots. Each basis equation eliminates its leading
/// unknown monomial (highest partial count first); elimination only ever
/// introduces smaller monomials, so the sweep terminates. A zero remainder
/// means `target` lies in the span of the system.
pub fn reduce_modulo_linear_system(target: &Expression, system: &[Expression]) -> Expression {
    let mut basis: Vec<(Monomial, Expression, Expression)> = Vec::new();
    for e in system {
        if e.is_zero() {
            continue;
        }
        if let Some((lead, coeff)) = leading_unknown_group(e) {
            basis.push((lead, coeff, e.clone()));
        }
    }
    basis.sort_by(|a, b| monomial_key(&b.0).cmp(&monomial_key(&a.0)));
    let mut result = target.clone();
    for _ in 0..10_000 {
        if result.is_zero() {
            return result;
        }
        let groups = match unknown_groups(&result) {
            Some(g) => g,
            None => return result,
        };
        let mut changed = false;
        for (lead, cb, b) in &basis {
            if let Some(ct) = groups.get(lead) {
                if ct.is_zero() {
                    continue;
                }
                let factor = ct.divided_by(cb);
                result = result - b.clone() * factor;
                changed = true;
                break;
            }
        }
        if !changed {
            return result;
        }
    }
    result
}

/// Groups an expression by its monomials in unknown-function atoms; the
/// coefficients carry everything else.
fn unknown_groups(e: &Expression) -> Option<std::collections::BTreeMap<Monomial, Expression>> {
    let mut vars: BTreeSet<Atom> = BTreeSet::new();
    e.walk_atoms(&mut |a| {
        if matches!(a, Atom::Unknown { .. }) {
            vars.insert(a.clone());
        }
    });
    e.collect(&vars).ok()
}

fn monomial_key(m: &Monomial) -> (u32, Monomial) {
    let rank = m
        .0
        .keys()
        .map(|a| match a {
            Atom::Unknown { partial, .. } => partial.iter().map(|&c| c as u32).sum::<u32>(),
            _ => 0,
        })
        .max()
        .unwrap_or(0);
    (rank, m.clone())
}

/// The largest unknown monomial of an equation together with its
/// coefficient, ranked by highest partial-derivative count first.
fn leading_unknown_group(e: &Expression) -> Option<(Monomial, Expression)> {
    let groups = unknown_groups(e)?;
    groups
        .iter()
        .filter(|(m, _)| !m.is_unit())
        .max_by(|a, b| monomial_key(a.0).cmp(&monomial_key(b.0)))
        .map(|(m, c)| (m.clone(), c.clone()))
}

/// Mutual reducibility of two linear determining systems: every equation of
/// each side reduces to zero modulo the other.
pub fn systems_mutually_reducible(a: &[Expression], b: &[Expression]) -> bool {
    a.iter()
        .all(|e| reduce_modulo_linear_system(e, b).is_zero())
        && b
            .iter()
            .all(|e| reduce_modulo_linear_system(e, a).is_zero())
}

// ---------------------------------------------------------------------------
// Characteristic integration
// ---------------------------------------------------------------------------

/// Directly integrates the characteristic equation `Q.F = Div C` for a
/// scalar system in two independent variables, by deterministic
/// highest-derivative-first integration by parts (ties broken toward the
/// first independent variable).
pub fn integrate_characteristic(
    sys: &DESystem,
    q: &Multiplier,
) -> Result<ConservedCurrent, LawError> {
    assert_eq!(sys.equations.len(), 1, "scalar systems only");
    let n = sys.space.n_indep();
    assert_eq!(n, 2, "two independent variables only");
    q.check_nonsingular(sys)?;
    let mut e = q.components[0].clone() * sys.equations[0].expr.clone();
    let mut current = vec![Expression::zero(); n];

    let bound = 4096;
    for _ in 0..bound {
        if e.is_zero() {
            let psi = CurrentVector(current);
            let div = psi.divergence(&sys.space)?;
            let verified = sys.reduce_on_shell(&div)?.is_zero();
            return Ok(ConservedCurrent {
                components: psi,
                verified,
                multiplier: Some(q.clone()),
            });
        }
        let (mono, coeff) = pick_integration_term(&e).ok_or_else(|| {
            LawError::IntegrationIncomplete(format!("{} terms remain", e.term_count()))
        })?;
        let (jet_atom, dep, index) = highest_jet(&mono).ok_or_else(|| {
            LawError::IntegrationIncomplete("residue has no derivative factor".to_string())
        })?;
        // Direction: prefer the first independent variable present in the
        // index.
        let dir = index
            .0
            .iter()
            .position(|&c| c > 0)
            .expect("order >= 1 jets have a direction");
        let lower = Atom::jet(dep, index.minus(&MultiIndex::unit(n, dir)).unwrap());

        // Build the potential g with D_dir g reproducing the chosen term.
        let term = term_expression(&mono, &coeff, e.denominator());
        let g = build_potential(&sys.space, &term, &jet_atom, &lower)?;
        let g = match g {
            Some(g) => g,
            None => {
                return Err(LawError::IntegrationIncomplete(
                    "term-wise integration by parts has no closed form here".to_string(),
                ))
            }
        };
        current[dir] = current[dir].clone() + g.clone();
        e = e - sys.space.total_derivative(&g, dir)?;
    }
    Err(LawError::IntegrationIncomplete(
        "step bound exceeded".to_string(),
    ))
}

/// Deterministic choice: the term whose highest jet has maximal order, with
/// ties broken by the monomial order itself.
fn pick_integration_term(e: &Expression) -> Option<(Monomial, Rat)> {
    let mut best: Option<(u32, Monomial, Rat)> = None;
    for (mono, coeff) in e.terms() {
        let ord = mono
            .0
            .keys()
            .filter_map(|a| match a {
                Atom::Jet { index, .. } => Some(index.order()),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        if ord == 0 {
            continue;
        }
        let candidate = (ord, mono.clone(), coeff.clone());
        if best
            .as_ref()
            .map(|b| (candidate.0, &candidate.1) > (b.0, &b.1))
            .unwrap_or(true)
        {
            best = Some(candidate);
        }
    }
    best.map(|(_, m, c)| (m, c))
}

fn highest_jet(mono: &Monomial) -> Option<(Atom, u16, MultiIndex)> {
    let mut best: Option<(u32, Atom, u16, MultiIndex)> = None;
    for a in mono.0.keys() {
        if let Atom::Jet { dep, index } = a {
            if index.order() == 0 {
                continue;
            }
            let cand = (index.order(), a.clone(), *dep, index.clone());
            if best
                .as_ref()
                .map(|b| (cand.0, &cand.1) > (b.0, &b.1))
                .unwrap_or(true)
            {
                best = Some(cand);
            }
        }
    }
    best.map(|(_, a, d, i)| (a, d, i))
}

fn term_expression(mono: &Monomial, coeff: &Rat, den: Option<&Expression>) -> Expression {
    let mut e = Expression::constant(coeff.clone());
    for (a, &k) in &mono.0 {
        e = e * Expression::atom(a.clone()).pow(k);
    }
    if let Some(d) = den {
        e = e.divided_by(d);
    }
    e
}

/// Finds `g` with `D_dir g` containing the given term `f * u_J` exactly,
/// where `u_J = jet` and `u_{J - e_dir} = lower`:
///  - power rule when the term already contains `lower^k`:
///    `g = term * lower / jet / (k+1)`;
///  - antiderivative rule when, after removing `jet`, the remainder is a
///    function of the base dependent variable (and jet-free factors) times a
///    single registered-function factor or a power of the variable.
fn build_potential(
    space: &JetSpace,
    term: &Expression,
    jet: &Atom,
    lower: &Atom,
) -> Result<Option<Expression>, LawError> {
    let dep = match lower {
        Atom::Jet { dep, .. } => *dep,
        _ => unreachable!(),
    };
    // Power rule: g = term * lower / jet / (k'+1), with k' the exponent of
    // the precursor already present. Any introduced remainder carries only
    // lower or differently-shaped jets and is re-examined by the caller.
    let (mono, coeff) = term
        .terms()
        .next()
        .map(|(m, c)| (m.clone(), c.clone()))
        .unwrap();
    let k_lower = mono.0.get(lower).copied().unwrap_or(0);

    if lower_index_order(lower) > 0 || base_factor_ok(&mono, dep, jet) {
        let mut g_mono = mono.0.clone();
        let kj = g_mono[jet];
        if kj == 1 {
            g_mono.remove(jet);
        } else {
            g_mono.insert(jet.clone(), kj - 1);
        }
        *g_mono.entry(lower.clone()).or_insert(0) += 1;
        let mut g = Expression::constant(coeff.clone() / crate::expr::rat((k_lower + 1) as i64));
        for (a, &k) in &g_mono {
            g = g * Expression::atom(a.clone()).pow(k);
        }
        if let Some(d) = term.denominator() {
            g = g.divided_by(d);
        }
        return Ok(Some(g));
    }

    // Zeroth-order precursor: integrate the u-dependence. The term must be
    // (jet) * E(x) * h(u) with h a single function atom in u or a power of
    // u itself.
    antiderivative_potential(space, &mono, &coeff, dep, jet, term.denominator())
}

fn lower_index_order(lower: &Atom) -> u32 {
    match lower {
        Atom::Jet { index, .. } => index.order(),
        _ => 0,
    }
}

/// True when the power rule applies with a zeroth-order precursor: the term
/// is polynomial in the base variable (no function atoms of it).
fn base_factor_ok(mono: &Monomial, dep: u16, jet: &Atom) -> bool {
    for a in mono.0.keys() {
        if a == jet {
            continue;
        }
        match a {
            Atom::Jet { dep: d, index } if *d == dep && index.order() == 0 => {}
            Atom::Jet { .. } => return false,
            Atom::Fn { arg, .. } => {
                if arg.contains_where(&|x| matches!(x, Atom::Jet { .. })) {
                    return false;
                }
            }
            Atom::Unknown { .. } => return false,
            _ => {}
        }
    }
    true
}

/// Potential for terms `E(t,x) * h(u) * u_i`: `g = E * H(u)` with `H' = h`.
fn antiderivative_potential(
    space: &JetSpace,
    mono: &Monomial,
    coeff: &Rat,
    dep: u16,
    jet: &Atom,
    den: Option<&Expression>,
) -> Result<Option<Expression>, LawError> {
    let base = Atom::jet(dep, MultiIndex::zero(space.n_indep()));
    let base_expr = Expression::atom(base.clone());
    let mut outer = Expression::constant(coeff.clone());
    let mut h: Option<Expression> = None;
    for (a, &k) in &mono.0 {
        if a == jet {
            if k != 1 {
                return Ok(None);
            }
            continue;
        }
        let depends_on_u = {
            let mut found = false;
            a.walk(&mut |x| {
                if x == &base {
                    found = true;
                }
            });
            found
        };
        if depends_on_u {
            if h.is_some() {
                return Ok(None);
            }
            match a {
                Atom::Jet { dep: d, index } if *d == dep && index.order() == 0 => {
                    // u^k integrates to u^{k+1}/(k+1).
                    h = Some(
                        base_expr
                            .pow(k + 1)
                            .scaled(&(Rat::one() / crate::expr::rat((k + 1) as i64))),
                    );
                }
                Atom::Fn { name, order, arg } if k == 1 && arg.as_ref() == &base_expr => {
                    h = Some(Expression::atom(Atom::func(name, order - 1, base_expr.clone())));
                }
                _ => return Ok(None),
            }
        } else {
            outer = outer * Expression::atom(a.clone()).pow(k);
        }
    }
    let h = match h {
        Some(h) => h,
        None => return Ok(None),
    };
    let mut g = outer * h;
    if let Some(d) = den {
        g = g.divided_by(d);
    }
    Ok(Some(g))
}

// ---------------------------------------------------------------------------
// Convenience for characteristics
// ---------------------------------------------------------------------------

/// Components of a generator characteristic padded to the dependent-variable
/// count of an extended space (extra components zero).
pub fn padded_components(gen: &GeneratorCharacteristic, n_dep: usize) -> Vec<Expression> {
    let mut out = vec![Expression::zero(); n_dep];
    for (i, c) in gen.components.iter().enumerate() {
        out[i] = c.clone();
    }
    out
}

/// Euler-operator oracle for the multiplier property: `E(Q.F)` for every
/// dependent variable, exact in jet space. Used by tests as the independent
/// route against the split determining system.
pub fn euler_of_characteristic_product(
    sys: &DESystem,
    q: &[Expression],
) -> Result<Vec<Expression>, LawError> {
    let mut qf = Expression::zero();
    for (qa, eq) in q.iter().zip(&sys.equations) {
        qf = qf + qa.clone() * eq.expr.clone();
    }
    let mut out = Vec::new();
    for alpha in 0..sys.space.n_dep() {
        out.push(crate::variational::euler(&sys.space, &qf, alpha as u16)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_expression, Prng};
    use crate::desystem::DESystem;
    use crate::expr::{ratio, Expression, MultiIndex};
    use crate::jet::JetSpace;

    fn wave_space() -> JetSpace {
        JetSpace::new(&["t", "x"], &["u"]).with_funcs(&["b", "c", "m"])
    }

    fn lead_of(s: &JetSpace, derivs: &[&str]) -> (u16, MultiIndex) {
        match s.jet_atom("u", derivs) {
            Atom::Jet { dep, index } => (dep, index),
            _ => unreachable!(),
        }
    }

    fn f_wave(s: &JetSpace) -> Expression {
        let u = s.jet("u", &[]);
        s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + s.func("b", 0, u.clone()) * s.jet("u", &["t"])
            + s.func("c", 0, u.clone()) * s.jet("u", &["x"])
            + s.func("m", 0, u)
    }

    /// Symbolic wave family with arbitrary b, c, m.
    fn wave_system() -> DESystem {
        let s = wave_space();
        let lead = lead_of(&s, &["t", "t"]);
        DESystem::new(s.clone(), vec![("W".into(), f_wave(&s), lead.0, lead.1)]).unwrap()
    }

    /// Damped wave with m = 0.
    fn damped_system() -> DESystem {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + s.func("b", 0, u.clone()) * s.jet("u", &["t"])
            + s.func("c", 0, u) * s.jet("u", &["x"]);
        let lead = lead_of(&s, &["t", "t"]);
        DESystem::new(s.clone(), vec![("W0".into(), f, lead.0, lead.1)]).unwrap()
    }

    /// Quadratic instance: b = c = u, m = u^2, with adjoint-symmetry
    /// exp(t + x).
    fn quadratic_system() -> DESystem {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + u.clone() * s.jet("u", &["t"])
            + u.clone() * s.jet("u", &["x"])
            + u.clone() * u.clone();
        let lead = lead_of(&s, &["t", "t"]);
        DESystem::new(s.clone(), vec![("W1".into(), f, lead.0, lead.1)]).unwrap()
    }

    /// Variational instance b = c = 0, m = u^3.
    fn cubic_system() -> DESystem {
        let s = wave_space();
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"]) + s.jet("u", &[]).pow(3);
        let lead = lead_of(&s, &["t", "t"]);
        DESystem::new(s.clone(), vec![("V".into(), f, lead.0, lead.1)]).unwrap()
    }

    fn etx(s: &JetSpace) -> Expression {
        s.exp(&(s.indep("t") + s.indep("x"))).unwrap()
    }

    #[test]
    fn translation_characteristics_are_symmetries() {
        let sys = wave_system();
        let s = &sys.space;
        for p in [-s.jet("u", &["t"]), -s.jet("u", &["x"])] {
            let r = symmetry_residual(&sys, &[p]).unwrap();
            assert!(r[0].is_zero());
        }
    }

    #[test]
    fn adjoint_symmetry_residuals() {
        // exp(t+x) on the quadratic instance.
        let sys = quadratic_system();
        let q = vec![etx(&sys.space)];
        assert!(adjoint_symmetry_residual(&sys, &q).unwrap()[0].is_zero());
        // Q = 1 on the damped (m = 0) system.
        let sys = damped_system();
        assert!(adjoint_symmetry_residual(&sys, &[Expression::one()]).unwrap()[0].is_zero());
        // Non-example: Q = t on the symbolic family leaves m' t - b.
        let sys = wave_system();
        let s = &sys.space;
        let r = adjoint_symmetry_residual(&sys, &[s.indep("t")]).unwrap();
        let expected = s.func("m", 1, s.jet("u", &[])) * s.indep("t")
            - s.func("b", 0, s.jet("u", &[]));
        assert!((r[0].clone() - expected).is_zero());
    }

    #[test]
    fn operator_extraction_translations_and_multiplication() {
        let sys = wave_system();
        let s = &sys.space;
        let n = 2;
        let rp = extract_symmetry_operator(&sys, &[-s.jet("u", &["t"])]).unwrap();
        assert_eq!(rp.coeff(0, 0, &MultiIndex::unit(n, 0)), Expression::int(-1));
        assert_eq!(rp.entries.iter().map(|(_, c)| c.len()).sum::<usize>(), 1);
        let rp = extract_symmetry_operator(&sys, &[-s.jet("u", &["x"])]).unwrap();
        assert_eq!(rp.coeff(0, 0, &MultiIndex::unit(n, 1)), Expression::int(-1));

        // Q(t,x,u) leads to multiplication by Q_u.
        let sq = wave_space().with_unknown(
            "Q",
            vec![
                Atom::Indep(0),
                Atom::Indep(1),
                Atom::jet(0, MultiIndex::zero(2)),
            ],
        );
        let lead = lead_of(&sq, &["t", "t"]);
        let sysq =
            DESystem::new(sq.clone(), vec![("W".into(), f_wave(&sq), lead.0, lead.1)]).unwrap();
        let q = sq.unknown_expr("Q");
        let adj = crate::variational::adjoint_frechet(&sq, &sysq.exprs(), &[q.clone()]).unwrap();
        let dec = sysq.decompose_off_shell(&adj).unwrap();
        let q_u = q.diff_partial(&Atom::jet(0, MultiIndex::zero(2)));
        assert_eq!(dec.operator.coeff(0, 0, &MultiIndex::zero(2)), q_u);

        // Instantiated exponential adjoint-symmetries have zero operator.
        let sys1 = quadratic_system();
        let rq = extract_adjsymmetry_operator(&sys1, &[etx(&sys1.space)]).unwrap();
        assert!(rq.is_zero());
    }

    #[test]
    fn operator_extraction_point_symmetry_shape() {
        // Dilation of the undamped wave: R_P = -t D_t - x D_x - 2,
        // matching the point-symmetry operator -tau D_t - xi D_x + eta_u
        // - (tau_t + xi_x).
        let s = JetSpace::new(&["t", "x"], &["u"]);
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"]);
        let lead = lead_of(&s, &["t", "t"]);
        let sys = DESystem::new(s.clone(), vec![("L".into(), f, lead.0, lead.1)]).unwrap();
        let p = vec![-s.indep("t") * s.jet("u", &["t"]) - s.indep("x") * s.jet("u", &["x"])];
        let rp = extract_symmetry_operator(&sys, &p).unwrap();
        let n = 2;
        assert_eq!(rp.coeff(0, 0, &MultiIndex::unit(n, 0)), -s.indep("t"));
        assert_eq!(rp.coeff(0, 0, &MultiIndex::unit(n, 1)), -s.indep("x"));
        assert_eq!(rp.coeff(0, 0, &MultiIndex::zero(n)), Expression::int(-2));
        // Its adjoint drops the zeroth-order part: t D_t + x D_x.
        let adj = rp.adjoint(&s).unwrap();
        assert_eq!(adj.coeff(0, 0, &MultiIndex::zero(n)), Expression::zero());
        assert_eq!(adj.coeff(0, 0, &MultiIndex::unit(n, 0)), s.indep("t"));
    }

    #[test]
    fn rejects_non_symmetries() {
        let sys = wave_system();
        let s = &sys.space;
        let bad = extract_symmetry_operator(&sys, &[s.jet("u", &[])]);
        assert!(matches!(bad, Err(LawError::NotASymmetry(0))));
        let bad = pair_conserved_current(&sys, &[s.jet("u", &[])], &[Expression::one()]);
        assert!(matches!(bad, Err(LawError::NotASymmetry(0))));
    }

    #[test]
    fn pair_current_and_multiplier_quadratic() {
        let sys = quadratic_system();
        let s = &sys.space;
        let q = vec![etx(s)];
        let p1 = vec![-s.jet("u", &["t"])];
        let p2 = vec![-s.jet("u", &["x"])];
        // Multipliers are D_t Q and D_x Q = exp(t+x) for both.
        for p in [&p1, &p2] {
            let mult = pair_multiplier(&sys, p, &q).unwrap();
            assert_eq!(mult.components[0], etx(s));
        }
        let current = pair_conserved_current(&sys, &p1, &q).unwrap();
        assert!(current.verified);
        assert!(!is_trivial_pair(&sys, &p1, &q).unwrap());
    }

    #[test]
    fn pair_trivial_cases() {
        // (P = -u_t, Q = 1) on m = 0 is trivial.
        let sys = damped_system();
        let s = &sys.space;
        let p1 = vec![-s.jet("u", &["t"])];
        assert!(is_trivial_pair(&sys, &p1, &[Expression::one()]).unwrap());
        let current = pair_conserved_current(&sys, &p1, &[Expression::one()]).unwrap();
        assert!(current.verified);
        let extracted = multiplier_from_current(&sys, &current.components).unwrap();
        assert!(extracted.is_zero());

        // Commuting variational pair (-u_t, -u_x) on the cubic instance.
        let sys = cubic_system();
        let s = &sys.space;
        let p = vec![-s.jet("u", &["t"])];
        let q = vec![-s.jet("u", &["x"])];
        assert!(is_trivial_pair(&sys, &p, &q).unwrap());

        // x-independent adjoint-symmetry with a translation: Q = exp(x) on
        // the instance m = u + u^2/2, c = u (row-1 conditions with the time
        // exponent zero) pairs trivially with -u_t.
        let s = wave_space();
        let u = s.jet("u", &[]);
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + s.func("b", 0, u.clone()) * s.jet("u", &["t"])
            + u.clone() * s.jet("u", &["x"])
            + u.clone()
            + u.clone().pow(2).scaled(&ratio(1, 2));
        let lead = lead_of(&s, &["t", "t"]);
        let sys = DESystem::new(s.clone(), vec![("Wx".into(), f, lead.0, lead.1)]).unwrap();
        let q = vec![s.exp(&s.indep("x")).unwrap()];
        assert!(adjoint_symmetry_residual(&sys, &q).unwrap()[0].is_zero());
        assert!(is_trivial_pair(&sys, &[-s.jet("u", &["t"])], &q).unwrap());
        assert!(!is_trivial_pair(&sys, &[-s.jet("u", &["x"])], &q).unwrap());
    }

    #[test]
    fn pair_multiplier_wave_profile() {
        // Row-3 family: gamma = 1, q arbitrary; the pair multiplier with the
        // time translation is the derivative -exp(x) q'(x - t).
        let s = JetSpace::new(&["t", "x"], &["u"]).with_funcs(&["m", "q"]);
        let u = s.jet("u", &[]);
        let mp = s.func("m", 1, u.clone());
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + (Expression::one() + mp.clone()) * s.jet("u", &["t"])
            + (Expression::int(-1) + mp) * s.jet("u", &["x"])
            + s.func("m", 0, u);
        let lead = lead_of(&s, &["t", "t"]);
        let sys = DESystem::new(s.clone(), vec![("W3".into(), f, lead.0, lead.1)]).unwrap();
        let profile_arg = s.indep("x") - s.indep("t");
        let q = vec![s.exp(&s.indep("x")).unwrap() * s.func("q", 0, profile_arg.clone())];
        assert!(adjoint_symmetry_residual(&sys, &q).unwrap()[0].is_zero());
        let mult = pair_multiplier(&sys, &[-s.jet("u", &["t"])], &q).unwrap();
        let expected = -s.exp(&s.indep("x")).unwrap() * s.func("q", 1, profile_arg.clone());
        assert!((mult.components[0].clone() - expected).is_zero());
        let mult = pair_multiplier(&sys, &[-s.jet("u", &["x"])], &q).unwrap();
        let expected = s.exp(&s.indep("x")).unwrap()
            * (s.func("q", 0, profile_arg.clone()) + s.func("q", 1, profile_arg));
        assert!((mult.components[0].clone() - expected).is_zero());
        // Constant profile pairs trivially with the time translation.
        let q_const = vec![s.exp(&s.indep("x")).unwrap()];
        assert!(adjoint_symmetry_residual(&sys, &q_const).unwrap()[0].is_zero());
        assert!(is_trivial_pair(&sys, &[-s.jet("u", &["t"])], &q_const).unwrap());
    }

    #[test]
    fn multiplier_residuals_lowest_order() {
        // Symbolic Q(t,x,u): the Helmholtz block is exactly 2 Q_u.
        let s = wave_space().with_unknown(
            "Q",
            vec![
                Atom::Indep(0),
                Atom::Indep(1),
                Atom::jet(0, MultiIndex::zero(2)),
            ],
        );
        let lead = lead_of(&s, &["t", "t"]);
        let sys =
            DESystem::new(s.clone(), vec![("W".into(), f_wave(&s), lead.0, lead.1)]).unwrap();
        let q = s.unknown_expr("Q");
        let (_, helmholtz) = multiplier_residuals(&sys, &[q.clone()]).unwrap();
        assert_eq!(helmholtz.len(), 1);
        let q_u = q.diff_partial(&Atom::jet(0, MultiIndex::zero(2)));
        assert!((helmholtz[0].clone() - q_u * Expression::int(2)).is_zero());

        // Concrete u-independent adjoint-symmetries pass in full.
        let sys = quadratic_system();
        assert!(is_multiplier(&sys, &[etx(&sys.space)]).unwrap());

        // First-order ansatz: a single Helmholtz-type condition.
        let s = wave_space().with_unknown(
            "Q",
            vec![
                Atom::Indep(0),
                Atom::Indep(1),
                Atom::jet(0, MultiIndex::zero(2)),
                Atom::jet(0, MultiIndex::unit(2, 0)),
                Atom::jet(0, MultiIndex::unit(2, 1)),
            ],
        );
        let lead = lead_of(&s, &["t", "t"]);
        let sys =
            DESystem::new(s.clone(), vec![("W".into(), f_wave(&s), lead.0, lead.1)]).unwrap();
        let q = s.unknown_expr("Q");
        let (_, helmholtz) = multiplier_residuals(&sys, &[q]).unwrap();
        assert_eq!(helmholtz.len(), 1);
    }

    #[test]
    fn multiplier_oracle_agreement() {
        // The split system agrees with the Euler-operator route E(Q.F) = 0
        // on both positive and negative cases.
        let sys = quadratic_system();
        let cases: Vec<(Vec<Expression>, bool)> = vec![
            (vec![etx(&sys.space)], true),
            (vec![sys.space.jet("u", &[])], false),
            (vec![sys.space.indep("t")], false),
        ];
        for (q, expect) in cases {
            let split = is_multiplier(&sys, &q).unwrap_or(false);
            let oracle = euler_of_characteristic_product(&sys, &q)
                .unwrap()
                .iter()
                .all(|e| e.is_zero());
            assert_eq!(split, oracle);
            assert_eq!(split, expect);
        }
        // Energy multiplier on the cubic instance.
        let sys = cubic_system();
        let q = vec![sys.space.jet("u", &["t"])];
        assert!(is_multiplier(&sys, &q).unwrap());
        assert!(euler_of_characteristic_product(&sys, &q)
            .unwrap()
            .iter()
            .all(|e| e.is_zero()));
    }

    #[test]
    fn multiplier_extraction_from_currents() {
        let sys = damped_system();
        let s = &sys.space;
        let u = s.jet("u", &[]);
        // C = (u_t + B(u), -u_x + C(u)) extracts Q = 1.
        let current = CurrentVector(vec![
            s.jet("u", &["t"]) + s.func("b", -1, u.clone()),
            -s.jet("u", &["x"]) + s.func("c", -1, u.clone()),
        ]);
        let mult = multiplier_from_current(&sys, &current).unwrap();
        assert_eq!(mult.components[0], Expression::one());

        // A total curl extracts the zero multiplier.
        let mut rng = Prng::new(101);
        for _ in 0..5 {
            let theta = random_expression(s, &mut rng, 2, 3);
            let curl = CurrentVector(vec![
                s.total_derivative(&theta, 1).unwrap(),
                -s.total_derivative(&theta, 0).unwrap(),
            ]);
            let mult = multiplier_from_current(&sys, &curl).unwrap();
            assert!(mult.is_zero());
        }

        // Non-conserved currents are rejected.
        let bad = CurrentVector(vec![u.clone(), Expression::zero()]);
        assert!(matches!(
            multiplier_from_current(&sys, &bad),
            Err(LawError::NotConserved)
        ));
    }

    #[test]
    fn symmetry_action_on_currents() {
        let sys = damped_system();
        let s = &sys.space;
        let u = s.jet("u", &[]);
        let current = CurrentVector(vec![
            s.jet("u", &["t"]) + s.func("b", -1, u.clone()),
            -s.jet("u", &["x"]) + s.func("c", -1, u.clone()),
        ]);
        let p = vec![-s.jet("u", &["t"])];
        let acted = symmetry_apply_to_current(s, &p, &current).unwrap();
        let expected_t = -s.jet("u", &["t", "t"]) - s.func("b", 0, u.clone()) * s.jet("u", &["t"]);
        let expected_x = s.jet("u", &["t", "x"]) - s.func("c", 0, u.clone()) * s.jet("u", &["t"]);
        assert!((acted.0[0].clone() - expected_t).is_zero());
        assert!((acted.0[1].clone() - expected_x).is_zero());
        // The acted current is locally trivial.
        let mult = multiplier_from_current(&sys, &acted).unwrap();
        assert!(mult.is_zero());

        // Zero current stays zero; linear sanity on a scaling action.
        let zero = CurrentVector::zero(2);
        let acted = symmetry_apply_to_current(s, &p, &zero).unwrap();
        assert!(acted.0.iter().all(|c| c.is_zero()));
        let c2 = CurrentVector(vec![u.clone().pow(2), Expression::zero()]);
        let acted = symmetry_apply_to_current(s, &[u.clone()], &c2).unwrap();
        assert!((acted.0[0].clone() - u.clone().pow(2) * Expression::int(2)).is_zero());
    }

    #[test]
    fn determining_system_vs_literature() {
        // Adjoint-symmetry mode for Q(t,x,u) is mutually reducible with the
        // four-equation split of the lowest-order determining equation.
        let s = wave_space().with_unknown(
            "Q",
            vec![
                Atom::Indep(0),
                Atom::Indep(1),
                Atom::jet(0, MultiIndex::zero(2)),
            ],
        );
        let lead = lead_of(&s, &["t", "t"]);
        let sys =
            DESystem::new(s.clone(), vec![("W".into(), f_wave(&s), lead.0, lead.1)]).unwrap();
        let ds = generate_determining_system(&sys, "Q", DeterminingMode::AdjointSymmetry)
            .unwrap();
        assert_eq!(ds.equations.len(), 4);

        let sig = s.unknown_signature("Q").unwrap().as_ref().clone();
        let part = |p: Vec<u8>| Expression::atom(Atom::unknown("Q", sig.clone(), p));
        let u = s.jet("u", &[]);
        let b = s.func("b", 0, u.clone());
        let c = s.func("c", 0, u.clone());
        let m = s.func("m", 0, u.clone());
        let mp = s.func("m", 1, u.clone());
        let reference = vec![
            part(vec![2, 0, 0]) - part(vec![0, 2, 0])
                - b.clone() * part(vec![1, 0, 0])
                - c.clone() * part(vec![0, 1, 0])
                - m * part(vec![0, 0, 1])
                + mp * part(vec![0, 0, 0]),
            part(vec![1, 0, 1]) - b * part(vec![0, 0, 1]),
            part(vec![0, 1, 1]) + c * part(vec![0, 0, 1]),
            part(vec![0, 0, 2]),
        ];
        assert!(systems_mutually_reducible(&ds.equations, &reference));

        // Multiplier mode appends exactly Q_u = 0.
        let ds = generate_determining_system(&sys, "Q", DeterminingMode::Multiplier).unwrap();
        assert_eq!(ds.helmholtz.len(), 1);
        assert!((ds.helmholtz[0].clone() - part(vec![0, 0, 1])).is_zero());

        // Heat equation with Q(t,x): backward heat equation.
        let sh = JetSpace::new(&["t", "x"], &["u"]).with_unknown(
            "Q",
            vec![Atom::Indep(0), Atom::Indep(1)],
        );
        let heat = sh.jet("u", &["t"]) - sh.jet("u", &["x", "x"]);
        let lead = match sh.jet_atom("u", &["t"]) {
            Atom::Jet { dep, index } => (dep, index),
            _ => unreachable!(),
        };
        let hsys = DESystem::new(sh.clone(), vec![("H".into(), heat, lead.0, lead.1)]).unwrap();
        let ds = generate_determining_system(&hsys, "Q", DeterminingMode::AdjointSymmetry)
            .unwrap();
        assert_eq!(ds.equations.len(), 1);
        let hsig = sh.unknown_signature("Q").unwrap().as_ref().clone();
        let hpart = |p: Vec<u8>| Expression::atom(Atom::unknown("Q", hsig.clone(), p));
        let backward = hpart(vec![1, 0]) + hpart(vec![0, 2]);
        assert!((ds.equations[0].clone() - backward).is_zero());
    }

    #[test]
    fn linear_reduction_helper() {
        let s = wave_space().with_unknown(
            "Q",
            vec![Atom::Indep(0), Atom::Indep(1), Atom::jet(0, MultiIndex::zero(2))],
        );
        let sig = s.unknown_signature("Q").unwrap().as_ref().clone();
        let part = |p: Vec<u8>| Expression::atom(Atom::unknown("Q", sig.clone(), p));
        let b = s.func("b", 0, s.jet("u", &[]));
        // target = b*(eq1) + eq2 reduces to zero modulo {eq1, eq2}.
        let eq1 = part(vec![1, 0, 1]) - b.clone() * part(vec![0, 0, 1]);
        let eq2 = part(vec![0, 0, 2]);
        let target = b.clone() * eq1.clone() + eq2.clone();
        assert!(reduce_modulo_linear_system(&target, &[eq1.clone(), eq2.clone()]).is_zero());
        // An independent equation does not reduce.
        let indep = part(vec![0, 1, 0]);
        assert!(!reduce_modulo_linear_system(&indep, &[eq1, eq2]).is_zero());
    }

    #[test]
    fn characteristic_integration() {
        // Q = 1 on the damped system.
        let sys = damped_system();
        let s = &sys.space;
        let u = s.jet("u", &[]);
        let mult = Multiplier::new(vec![Expression::one()], MultiplierProvenance::Given);
        let current = integrate_characteristic(&sys, &mult).unwrap();
        assert!(current.verified);
        let expected_t = s.jet("u", &["t"]) + s.func("b", -1, u.clone());
        let expected_x = -s.jet("u", &["x"]) + s.func("c", -1, u.clone());
        assert!((current.components.0[0].clone() - expected_t).is_zero());
        assert!((current.components.0[1].clone() - expected_x).is_zero());

        // Q = exp(t+x) on the quadratic instance, cross-checked through
        // extraction.
        let sys = quadratic_system();
        let mult = Multiplier::new(vec![etx(&sys.space)], MultiplierProvenance::Given);
        let current = integrate_characteristic(&sys, &mult).unwrap();
        assert!(current.verified);
        let back = multiplier_from_current(&sys, &current.components).unwrap();
        assert!((back.components[0].clone() - etx(&sys.space)).is_zero());

        // Q = 0 integrates to the zero current.
        let mult = Multiplier::new(vec![Expression::zero()], MultiplierProvenance::Given);
        let current = integrate_characteristic(&sys, &mult).unwrap();
        assert!(current.components.0.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn pair_current_multiplier_consistency() {
        // multiplier_from_current(pair current) equals the reduced pair
        // multiplier.
        let sys = quadratic_system();
        let s = &sys.space;
        let q = vec![etx(s)];
        for p in [vec![-s.jet("u", &["t"])], vec![-s.jet("u", &["x"])]] {
            let current = pair_conserved_current(&sys, &p, &q).unwrap();
            let extracted = multiplier_from_current(&sys, &current.components).unwrap();
            let pair = pair_multiplier(&sys, &p, &q).unwrap();
            let reduced = sys.reduce_all(&pair.components).unwrap();
            assert!((extracted.components[0].clone() - reduced[0].clone()).is_zero());
        }
    }

    #[test]
    fn symmetry_action_matches_pair_formula() {
        // The action of a symmetry on a conserved current has the multiplier
        // of the pair built from the current's multiplier.
        let sys = damped_system();
        let s = &sys.space;
        let u = s.jet("u", &[]);
        let current = CurrentVector(vec![
            s.jet("u", &["t"]) + s.func("b", -1, u.clone()),
            -s.jet("u", &["x"]) + s.func("c", -1, u.clone()),
        ]);
        for p in [vec![-s.jet("u", &["t"])], vec![-s.jet("u", &["x"])]] {
            let q_c = multiplier_from_current(&sys, &current).unwrap();
            let acted = symmetry_apply_to_current(s, &p, &current).unwrap();
            let lhs = multiplier_from_current(&sys, &acted).unwrap();
            let rhs = pair_multiplier(&sys, &p, &q_c.components).unwrap();
            let rhs = sys.reduce_all(&rhs.components).unwrap();
            assert!((lhs.components[0].clone() - rhs[0].clone()).is_zero());
        }
    }
}
