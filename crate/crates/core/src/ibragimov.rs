//! Extended Euler-Lagrange construction: the Lagrangian `L = v.F`, the
//! adjoint system `F*`, extension of symmetries to the adjoint variables,
//! the Noether current of the extension, nonlinear self-adjointness
//! checking, and the exact equivalence with the pair formula.

use crate::conslaw::{
    extract_adjsymmetry_operator, extract_symmetry_operator, is_adjoint_symmetry, LawError,
};
use crate::desystem::{DESystem, LinearDiffOperator, SystemError};
use crate::expr::{Atom, Expression, MultiIndex};
use crate::jet::{GeneratorCharacteristic, JetSpace};
use crate::variational::{adjoint_frechet, euler, euler_current, frechet, CurrentVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtendedError {
    #[error("the xi-L correction requires point-form generator data")]
    MissingPointForm,
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Jet(#[from] crate::jet::JetError),
    #[error(transparent)]
    Variational(#[from] crate::variational::VariationalError),
}

/// The base system embedded into the Euler-Lagrange system of `L = v.F`:
/// fresh adjoint variables `v^a`, the Lagrangian, and the adjoint equations
/// `F*_alpha = (delta*_v F)_alpha`, assembled as a solvable system on the
/// extended space when the adjoint equations admit the mirrored leading
/// derivatives.
#[derive(Debug, Clone)]
pub struct ExtendedSystem {
    pub base: DESystem,
    /// Extended jet space containing the adjoint variables.
    pub space: JetSpace,
    /// Dependent-variable ids of the adjoint variables.
    pub v_ids: Vec<u16>,
    pub lagrangian: Expression,
    pub adjoint_equations: Vec<Expression>,
    /// The extended solution space as a DE system (base equations plus
    /// adjoint equations, each solved for the mirrored leading derivative).
    pub full: DESystem,
}

impl ExtendedSystem {
    pub fn v_exprs(&self) -> Vec<Expression> {
        self.v_ids
            .iter()
            .map(|&d| Expression::atom(Atom::jet(d, MultiIndex::zero(self.space.n_indep()))))
            .collect()
    }
}

/// Embeds the system: appends `v^a`, forms `L = v.F` and `F* = delta*_v F`,
/// and verifies the Euler-Lagrange identities `E_v(L) = F`, `E_u(L) = F*`
/// exactly.
pub fn build_extended_system(sys: &DESystem) -> Result<ExtendedSystem, ExtendedError> {
    let m_eqs = sys.equations.len();
    let names: Vec<String> = (0..m_eqs)
        .map(|a| {
            if m_eqs == 1 {
                sys.space.fresh_dep_name("v")
            } else {
                sys.space.fresh_dep_name(&format!("v{a}"))
            }
        })
        .collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let (space, v_ids) = sys.space.extended_with_deps(&refs);
    let v: Vec<Expression> = v_ids
        .iter()
        .map(|&d| Expression::atom(Atom::jet(d, MultiIndex::zero(space.n_indep()))))
        .collect();

    let f = sys.exprs();
    let mut lagrangian = Expression::zero();
    for (va, fa) in v.iter().zip(&f) {
        lagrangian = lagrangian + va.clone() * fa.clone();
    }
    let mut adjoint_equations = adjoint_frechet(&space, &f, &v)?;
    adjoint_equations.truncate(sys.space.n_dep());

    // Euler-Lagrange identities, checked exactly.
    for (a, fa) in f.iter().enumerate() {
        let ev = euler(&space, &lagrangian, v_ids[a])?;
        if !ev.equivalent(fa) {
            panic!("extended system construction violated E_v(L) = F");
        }
    }
    for alpha in 0..sys.space.n_dep() {
        let eu = euler(&space, &lagrangian, alpha as u16)?;
        if !eu.equivalent(&adjoint_equations[alpha]) {
            panic!("extended system construction violated E_u(L) = F*");
        }
    }

    // Solved form for the adjoint equations: mirror the base leading
    // derivative onto the corresponding adjoint variable.
    let mut eqs: Vec<(String, Expression, u16, MultiIndex)> = Vec::new();
    for eq in &sys.equations {
        eqs.push((
            eq.name.clone(),
            eq.expr.clone(),
            eq.lead_dep,
            eq.lead_index.clone(),
        ));
    }
    for (a, fa_star) in adjoint_equations.iter().enumerate() {
        let lead = sys.equations[a].lead_index.clone();
        eqs.push((
            format!("{}_adj", sys.equations[a].name),
            fa_star.clone(),
            v_ids[a],
            lead,
        ));
    }
    let full = DESystem::new(space.clone(), eqs)?;

    Ok(ExtendedSystem {
        base: sys.clone(),
        space,
        v_ids,
        lagrangian,
        adjoint_equations,
        full,
    })
}

/// Characteristic of the extended symmetry on `(u, v)`:
/// the `u`-components are `P`, the `v`-components are `-R_P*(v)`.
pub fn extend_symmetry(
    ext: &ExtendedSystem,
    p: &[Expression],
) -> Result<Vec<Expression>, ExtendedError> {
    let rp = extract_symmetry_operator(&ext.base, p)?;
    let rp_star = rp.adjoint(&ext.space)?;
    let v = ext.v_exprs();
    let v_char = rp_star.apply(&ext.space, &v)?;
    let mut out = vec![Expression::zero(); ext.space.n_dep()];
    for (alpha, comp) in p.iter().enumerate() {
        out[alpha] = comp.clone();
    }
    for (a, comp) in v_char.into_iter().enumerate() {
        out[ext.v_ids[a] as usize] = -comp;
    }
    Ok(out)
}

/// Residual of the variational invariance of the extension:
/// `pr X_ext(L) - Div Theta` with `Theta` the operator boundary current for
/// `v.R_P(F) - R_P*(v).F`. Normalizes to zero for every symmetry.
pub fn variational_invariance_check(
    ext: &ExtendedSystem,
    p: &[Expression],
) -> Result<Expression, ExtendedError> {
    let p_ext = extend_symmetry(ext, p)?;
    let action = frechet(&ext.space, &[ext.lagrangian.clone()], &p_ext)?
        .pop()
        .unwrap_or_else(Expression::zero);
    let rp = extract_symmetry_operator(&ext.base, p)?;
    let v = ext.v_exprs();
    let f = ext.base.exprs();
    let theta = rp.pairing_boundary(&ext.space, &v, &f)?;
    let div = theta.divergence(&ext.space)?;
    Ok(action - div)
}

/// Whether to subtract `xi^i L` from the Noether current; the difference is
/// a current that vanishes on the extended solution space, offered for
/// literature comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentCorrection {
    None,
    XiL,
}

/// Noether current `Phi(P;L)` of the extended variational symmetry. With
/// `CurrentCorrection::XiL` and point-form data, returns
/// `Phi^i - xi^i L` instead.
pub fn noether_current(
    ext: &ExtendedSystem,
    generator: &GeneratorCharacteristic,
    correction: CurrentCorrection,
) -> Result<CurrentVector, ExtendedError> {
    let mut w = vec![Expression::zero(); ext.space.n_dep()];
    for (alpha, comp) in generator.components.iter().enumerate() {
        w[alpha] = comp.clone();
    }
    let phi = euler_current(&ext.space, &ext.lagrangian, &w)?;
    match correction {
        CurrentCorrection::None => Ok(phi),
        CurrentCorrection::XiL => {
            let point = generator
                .point
                .as_ref()
                .ok_or(ExtendedError::MissingPointForm)?;
            let mut out = Vec::with_capacity(phi.0.len());
            for (i, comp) in phi.0.iter().enumerate() {
                out.push(comp.clone() - point.xi[i].clone() * ext.lagrangian.clone());
            }
            Ok(CurrentVector(out))
        }
    }
}

/// Nonlinear self-adjointness of the system under the substitution
/// `v = phi`: holds iff `phi` is an adjoint-symmetry, in which case the
/// reported operator applied to the equations reproduces `F*|_{v=phi}`
/// off shell.
pub fn self_adjointness_check(
    sys: &DESystem,
    phi: &[Expression],
) -> Result<(bool, Option<LinearDiffOperator>), ExtendedError> {
    for c in phi {
        if let Some(d) = c.denominator() {
            if sys.reduce_on_shell(d)?.is_zero() {
                return Err(ExtendedError::Law(LawError::SingularOnShell));
            }
        }
    }
    if !is_adjoint_symmetry(sys, phi)? {
        return Ok((false, None));
    }
    let op = extract_adjsymmetry_operator(sys, phi)?;
    Ok((true, Some(op)))
}

/// Exact equivalence of the two constructions: the Noether current of the
/// extension with `v -> Q` equals the pair current `Psi(P,Q;F)`
/// component-wise after normalization.
pub fn equivalence_check(
    sys: &DESystem,
    p: &[Expression],
    q: &[Expression],
) -> Result<bool, ExtendedError> {
    let ext = build_extended_system(sys)?;
    let gen = GeneratorCharacteristic::from_components(p.to_vec());
    let phi = noether_current(&ext, &gen, CurrentCorrection::None)?;
    // Substitute v -> Q in each component.
    let mut bindings = std::collections::BTreeMap::new();
    for (a, &vid) in ext.v_ids.iter().enumerate() {
        bindings.insert(
            Atom::jet(vid, MultiIndex::zero(ext.space.n_indep())),
            q[a].clone(),
        );
    }
    // Jets of v of order >= 1 may appear in Phi; bind them to the matching
    // total derivatives of Q.
    let mut v_jets: Vec<(u16, MultiIndex)> = Vec::new();
    for comp in &phi.0 {
        for (dep, index) in comp.jet_atoms() {
            if ext.v_ids.contains(&dep) && index.order() >= 1 {
                v_jets.push((dep, index));
            }
        }
    }
    for (dep, index) in v_jets {
        let a = ext.v_ids.iter().position(|&d| d == dep).unwrap();
        let dq = sys.space.iterated_total_derivative(&q[a], &index)?;
        bindings.insert(Atom::jet(dep, index), dq);
    }
    let psi = crate::variational::pair_boundary_current(&sys.space, &sys.exprs(), p, q)?;
    for (phi_i, psi_i) in phi.0.iter().zip(&psi.0) {
        let substituted = phi_i
            .substitute(&bindings)
            .map_err(SystemError::from)?;
        if !substituted.equivalent(psi_i) {
            return Ok(false);
        }
    }
    Ok(true)
}
