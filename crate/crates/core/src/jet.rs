//! Jet-space bookkeeping: variable declarations, total derivatives, and
//! characteristic forms of point symmetries.

use crate::expr::{Atom, ExprError, Expression, LinearForm, MultiIndex, NameResolver};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error("jet order {0} exceeds the maximum tracked order {1}")]
    OrderOverflow(u32, u32),
    #[error("generator is not in point form: {0}")]
    NotPointForm(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Declaration of independent/dependent variables, registered function and
/// unknown-function symbols, parameters, and the maximum tracked jet order.
/// Immutable after construction; extension produces a new space whose atom
/// indices are compatible with the old one (append-only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetSpace {
    indeps: Vec<String>,
    deps: Vec<String>,
    funcs: Vec<String>,
    params: Vec<String>,
    unknowns: BTreeMap<String, Arc<Vec<Atom>>>,
    max_order: u32,
}

impl NameResolver for JetSpace {
    fn indep_name(&self, i: u16) -> &str {
        &self.indeps[i as usize]
    }
    fn dep_name(&self, d: u16) -> &str {
        &self.deps[d as usize]
    }
}

pub const DEFAULT_MAX_ORDER: u32 = 8;

impl JetSpace {
    pub fn new(indeps: &[&str], deps: &[&str]) -> Self {
        JetSpace {
            indeps: indeps.iter().map(|s| s.to_string()).collect(),
            deps: deps.iter().map(|s| s.to_string()).collect(),
            funcs: Vec::new(),
            params: Vec::new(),
            unknowns: BTreeMap::new(),
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    pub fn with_max_order(mut self, order: u32) -> Self {
        self.max_order = order;
        self
    }

    pub fn with_funcs(mut self, names: &[&str]) -> Self {
        for n in names {
            self.funcs.push(n.to_string());
        }
        self
    }

    pub fn with_params(mut self, names: &[&str]) -> Self {
        for n in names {
            self.params.push(n.to_string());
        }
        self
    }

    pub fn with_unknown(mut self, name: &str, args: Vec<Atom>) -> Self {
        self.unknowns.insert(name.to_string(), Arc::new(args));
        self
    }

    /// A copy of this space with extra dependent variables appended.
    /// Existing expressions remain valid against the extended space.
    pub fn extended_with_deps(&self, names: &[&str]) -> (JetSpace, Vec<u16>) {
        let mut out = self.clone();
        let mut ids = Vec::new();
        for n in names {
            ids.push(out.deps.len() as u16);
            out.deps.push(n.to_string());
        }
        (out, ids)
    }

    /// A fresh dependent-variable name avoiding collisions with everything
    /// declared in this space.
    pub fn fresh_dep_name(&self, stem: &str) -> String {
        let taken = |n: &str| {
            self.indeps.iter().any(|s| s == n)
                || self.deps.iter().any(|s| s == n)
                || self.funcs.iter().any(|s| s == n)
                || self.params.iter().any(|s| s == n)
                || self.unknowns.contains_key(n)
        };
        if !taken(stem) {
            return stem.to_string();
        }
        for k in 1.. {
            let cand = format!("{stem}{k}");
            if !taken(&cand) {
                return cand;
            }
        }
        unreachable!()
    }

    pub fn n_indep(&self) -> usize {
        self.indeps.len()
    }

    pub fn n_dep(&self) -> usize {
        self.deps.len()
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn indep_index(&self, name: &str) -> Option<u16> {
        self.indeps.iter().position(|s| s == name).map(|i| i as u16)
    }

    pub fn dep_index(&self, name: &str) -> Option<u16> {
        self.deps.iter().position(|s| s == name).map(|i| i as u16)
    }

    pub fn has_func(&self, name: &str) -> bool {
        self.funcs.iter().any(|s| s == name)
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.params.iter().any(|s| s == name)
    }

    pub fn unknown_signature(&self, name: &str) -> Option<&Arc<Vec<Atom>>> {
        self.unknowns.get(name)
    }

    // -- atom and expression constructors -----------------------------------

    pub fn indep(&self, name: &str) -> Expression {
        Expression::atom(Atom::Indep(self.indep_index(name).expect("unknown variable")))
    }

    pub fn param(&self, name: &str) -> Expression {
        Expression::atom(Atom::Param(name.to_string()))
    }

    /// Jet coordinate from a derivative list, e.g. `jet("u", &["t","x"])`.
    pub fn jet(&self, dep: &str, derivs: &[&str]) -> Expression {
        let d = self.dep_index(dep).expect("unknown dependent variable");
        let mut index = MultiIndex::zero(self.n_indep());
        for v in derivs {
            let i = self.indep_index(v).expect("unknown independent variable");
            index.0[i as usize] += 1;
        }
        Expression::atom(Atom::jet(d, index))
    }

    pub fn jet_atom(&self, dep: &str, derivs: &[&str]) -> Atom {
        let d = self.dep_index(dep).expect("unknown dependent variable");
        let mut index = MultiIndex::zero(self.n_indep());
        for v in derivs {
            let i = self.indep_index(v).expect("unknown independent variable");
            index.0[i as usize] += 1;
        }
        Atom::jet(d, index)
    }

    pub fn func(&self, name: &str, order: i32, arg: Expression) -> Expression {
        Expression::atom(Atom::func(name, order, arg))
    }

    pub fn unknown_expr(&self, name: &str) -> Expression {
        let sig = self.unknowns.get(name).expect("unknown ansatz symbol");
        Expression::atom(Atom::Unknown {
            name: name.to_string(),
            args: sig.clone(),
            partial: vec![0; sig.len()],
        })
    }

    /// Exponential of an expression that is linear in the independent
    /// variables with parameter coefficients. Returns `None` when the
    /// expression is not such a form.
    pub fn exp(&self, e: &Expression) -> Option<Expression> {
        let form = self.linear_form(e)?;
        match Atom::exp(form) {
            Some(a) => Some(Expression::atom(a)),
            None => Some(Expression::one()),
        }
    }

    /// Interprets an expression as a linear form in the independent
    /// variables. Each term must be an independent variable times a
    /// jet-free, indep-free coefficient. Constant terms are rejected.
    pub fn linear_form(&self, e: &Expression) -> Option<LinearForm> {
        if e.denominator().is_some() {
            return None;
        }
        let mut form: BTreeMap<u16, Expression> = BTreeMap::new();
        for (mono, coeff) in e.terms() {
            let mut var: Option<u16> = None;
            let mut rest = Expression::constant(coeff.clone());
            for (a, &k) in &mono.0 {
                match a {
                    Atom::Indep(i) if k == 1 && var.is_none() => var = Some(*i),
                    Atom::Param(_) => {
                        rest = rest * Expression::atom(a.clone()).pow(k);
                    }
                    _ => return None,
                }
            }
            let i = var?;
            let entry = form.entry(i).or_insert_with(Expression::zero);
            *entry = entry.clone() + rest;
        }
        form.retain(|_, c| !c.is_zero());
        Some(LinearForm(form))
    }

    // -- total derivatives ---------------------------------------------------

    /// Total derivative `D_i e`, accounting for explicit dependence on the
    /// `i`-th independent variable, all jet coordinates, arbitrary-function
    /// atoms, unknown-function atoms, and exponential atoms.
    pub fn total_derivative(&self, e: &Expression, i: usize) -> Result<Expression, JetError> {
        let mut overflow: Option<u32> = None;
        let out = e.derive(&mut |a| Ok(self.total_derivative_atom(a, i, &mut overflow)))?;
        match overflow {
            Some(ord) => Err(JetError::OrderOverflow(ord, self.max_order)),
            None => Ok(out),
        }
    }

    fn total_derivative_atom(
        &self,
        a: &Atom,
        i: usize,
        overflow: &mut Option<u32>,
    ) -> Expression {
        match a {
            Atom::Param(_) => Expression::zero(),
            Atom::Indep(j) => {
                if *j as usize == i {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Atom::Jet { dep, index } => {
                let raised = index.raised(i);
                if raised.order() > self.max_order {
                    *overflow = Some(raised.order());
                }
                Expression::atom(Atom::jet(*dep, raised))
            }
            Atom::Fn { name, order, arg } => {
                let darg = arg
                    .derive(&mut |inner| Ok(self.total_derivative_atom(inner, i, overflow)))
                    .expect("total derivative atom rule is infallible");
                if darg.is_zero() {
                    return Expression::zero();
                }
                Expression::atom(Atom::func(name, order + 1, arg.as_ref().clone())) * darg
            }
            Atom::Unknown {
                name,
                args,
                partial,
            } => {
                let mut acc = Expression::zero();
                for (m, arg) in args.iter().enumerate() {
                    let darg = self.total_derivative_atom(arg, i, overflow);
                    if darg.is_zero() {
                        continue;
                    }
                    let mut p = partial.clone();
                    p[m] += 1;
                    acc = acc
                        + Expression::atom(Atom::unknown(name, args.as_ref().clone(), p)) * darg;
                }
                acc
            }
            Atom::Exp(form) => {
                let c = form.coeff(i as u16);
                if c.is_zero() {
                    Expression::zero()
                } else {
                    c * Expression::atom(Atom::Exp(form.clone()))
                }
            }
        }
    }

    /// Iterated total derivative `D_I e`; independent of application order.
    pub fn iterated_total_derivative(
        &self,
        e: &Expression,
        index: &MultiIndex,
    ) -> Result<Expression, JetError> {
        let mut acc = e.clone();
        for i in index.tuple() {
            acc = self.total_derivative(&acc, i)?;
        }
        Ok(acc)
    }

    /// Total divergence `sum_i D_i C^i` of a current vector.
    pub fn total_divergence(&self, current: &[Expression]) -> Result<Expression, JetError> {
        assert_eq!(current.len(), self.n_indep());
        let mut acc = Expression::zero();
        for (i, c) in current.iter().enumerate() {
            acc = acc + self.total_derivative(c, i)?;
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Point-form data `(xi^i, eta^alpha)` of a generator, kept alongside the
/// characteristic because the canonical-form current correction needs it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointForm {
    pub xi: Vec<Expression>,
    pub eta: Vec<Expression>,
}

/// Symmetry generator in characteristic form, one component per dependent
/// variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorCharacteristic {
    pub components: Vec<Expression>,
    pub point: Option<PointForm>,
}

impl GeneratorCharacteristic {
    pub fn from_components(components: Vec<Expression>) -> Self {
        GeneratorCharacteristic {
            components,
            point: None,
        }
    }
}

/// Converts a point generator `xi^i d/dx^i + eta^alpha d/du^alpha` to
/// characteristic form `P^alpha = eta^alpha - xi^i u^alpha_i`, retaining the
/// point data.
pub fn characteristic_from_point_symmetry(
    space: &JetSpace,
    xi: &[Expression],
    eta: &[Expression],
) -> Result<GeneratorCharacteristic, JetError> {
    assert_eq!(xi.len(), space.n_indep());
    assert_eq!(eta.len(), space.n_dep());
    for (label, comps) in [("xi", xi), ("eta", eta)] {
        for e in comps {
            if e.contains_where(&|a| matches!(a, Atom::Jet { index, .. } if index.order() >= 1)) {
                return Err(JetError::NotPointForm(format!(
                    "{label} component depends on derivative coordinates"
                )));
            }
        }
    }
    let n = space.n_indep();
    let mut components = Vec::with_capacity(space.n_dep());
    for alpha in 0..space.n_dep() {
        let mut p = eta[alpha].clone();
        for (i, xi_i) in xi.iter().enumerate() {
            let u_i = Expression::atom(Atom::jet(alpha as u16, MultiIndex::unit(n, i)));
            p = p - xi_i.clone() * u_i;
        }
        components.push(p);
    }
    Ok(GeneratorCharacteristic {
        components,
        point: Some(PointForm {
            xi: xi.to_vec(),
            eta: eta.to_vec(),
        }),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_expression, Prng};
    use crate::expr::rat;

    fn wave_space() -> JetSpace {
        JetSpace::new(&["t", "x"], &["u"])
            .with_funcs(&["b"])
            .with_params(&["m2", "m3", "alpha"])
    }

    #[test]
    fn total_derivative_product() {
        let s = wave_space();
        let e = s.jet("u", &[]) * s.jet("u", &["x"]);
        let expected = s.jet("u", &["t"]) * s.jet("u", &["x"])
            + s.jet("u", &[]) * s.jet("u", &["t", "x"]);
        assert_eq!(s.total_derivative(&e, 0).unwrap(), expected);
    }

    #[test]
    fn total_derivative_unknown_chain_rule() {
        let s = wave_space().with_unknown(
            "Q",
            vec![
                Atom::Indep(0),
                Atom::Indep(1),
                Atom::jet(0, MultiIndex::zero(2)),
            ],
        );
        let q = s.unknown_expr("Q");
        let dq = s.total_derivative(&q, 0).unwrap();
        let sig = s.unknown_signature("Q").unwrap().as_ref().clone();
        let q_t = Expression::atom(Atom::unknown("Q", sig.clone(), vec![1, 0, 0]));
        let q_u = Expression::atom(Atom::unknown("Q", sig, vec![0, 0, 1]));
        assert_eq!(dq, q_t + s.jet("u", &["t"]) * q_u);
    }

    #[test]
    fn total_derivative_exponential() {
        let s = wave_space();
        let e = s.exp(&(s.param("m3") * s.indep("x"))).unwrap();
        assert_eq!(s.total_derivative(&e, 1).unwrap(), s.param("m3") * e);
    }

    #[test]
    fn iterated_derivatives_commute_and_expand() {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let i_tx = match s.jet_atom("u", &["t", "x"]) {
            Atom::Jet { index, .. } => index,
            _ => unreachable!(),
        };
        assert_eq!(
            s.iterated_total_derivative(&u, &i_tx).unwrap(),
            s.jet("u", &["t", "x"])
        );

        // D_tt Q(t,x,u) = Q_tt + 2 u_t Q_tu + u_t^2 Q_uu + u_tt Q_u.
        let sq = wave_space().with_unknown(
            "Q",
            vec![
                Atom::Indep(0),
                Atom::Indep(1),
                Atom::jet(0, MultiIndex::zero(2)),
            ],
        );
        let q = sq.unknown_expr("Q");
        let i_tt = MultiIndex(vec![2, 0]);
        let got = sq.iterated_total_derivative(&q, &i_tt).unwrap();
        let sig = sq.unknown_signature("Q").unwrap().as_ref().clone();
        let part = |p: Vec<u8>| Expression::atom(Atom::unknown("Q", sig.clone(), p));
        let ut = sq.jet("u", &["t"]);
        let expected = part(vec![2, 0, 0])
            + ut.clone() * part(vec![1, 0, 1]) * Expression::int(2)
            + ut.clone().pow(2) * part(vec![0, 0, 2])
            + sq.jet("u", &["t", "t"]) * part(vec![0, 0, 1]);
        assert!((got - expected).is_zero());

        // D_xx exp(alpha x) = alpha^2 exp(alpha x).
        let e = s.exp(&(s.param("alpha") * s.indep("x"))).unwrap();
        let i_xx = MultiIndex(vec![0, 2]);
        assert_eq!(
            s.iterated_total_derivative(&e, &i_xx).unwrap(),
            s.param("alpha").pow(2) * e
        );
    }

    #[test]
    fn total_derivatives_commute_random() {
        let s = wave_space();
        let mut rng = Prng::new(3);
        for _ in 0..30 {
            let e = random_expression(&s, &mut rng, 3, 3);
            let tx = s
                .total_derivative(&s.total_derivative(&e, 0).unwrap(), 1)
                .unwrap();
            let xt = s
                .total_derivative(&s.total_derivative(&e, 1).unwrap(), 0)
                .unwrap();
            assert!((tx - xt).is_zero());
        }
    }

    #[test]
    fn total_derivative_is_derivation() {
        let s = wave_space();
        let mut rng = Prng::new(9);
        for _ in 0..30 {
            let a = random_expression(&s, &mut rng, 2, 3);
            let b = random_expression(&s, &mut rng, 2, 3);
            let lhs = s.total_derivative(&(a.clone() * b.clone()), 0).unwrap();
            let rhs = s.total_derivative(&a, 0).unwrap() * b.clone()
                + a.clone() * s.total_derivative(&b, 0).unwrap();
            assert!((lhs - rhs).is_zero());
        }
    }

    #[test]
    fn order_overflow_detected() {
        let s = JetSpace::new(&["t", "x"], &["u"]).with_max_order(2);
        let e = s.jet("u", &["t", "t"]);
        assert!(matches!(
            s.total_derivative(&e, 0),
            Err(JetError::OrderOverflow(3, 2))
        ));
    }

    #[test]
    fn characteristics_of_point_symmetries() {
        let s = wave_space();
        // d/dt -> P = -u_t.
        let p = characteristic_from_point_symmetry(
            &s,
            &[Expression::one(), Expression::zero()],
            &[Expression::zero()],
        )
        .unwrap();
        assert_eq!(p.components[0], -s.jet("u", &["t"]));
        // d/dx -> P = -u_x.
        let p = characteristic_from_point_symmetry(
            &s,
            &[Expression::zero(), Expression::one()],
            &[Expression::zero()],
        )
        .unwrap();
        assert_eq!(p.components[0], -s.jet("u", &["x"]));
        // exp((t+x)/2) u d/du -> P = exp((t+x)/2) u.
        let half = (s.indep("t") + s.indep("x")).scaled(&rat(1)).scaled(&crate::expr::ratio(1, 2));
        let eta = s.exp(&half).unwrap() * s.jet("u", &[]);
        let p = characteristic_from_point_symmetry(
            &s,
            &[Expression::zero(), Expression::zero()],
            &[eta.clone()],
        )
        .unwrap();
        assert_eq!(p.components[0], eta);
        assert!(p.point.is_some());
    }

    #[test]
    fn point_form_validation() {
        let s = wave_space();
        let bad = characteristic_from_point_symmetry(
            &s,
            &[s.jet("u", &["t"]), Expression::zero()],
            &[Expression::zero()],
        );
        assert!(matches!(bad, Err(JetError::NotPointForm(_))));
    }

    #[test]
    fn characteristic_identity_holds() {
        // P = eta - xi^i u_i as normalized expressions.
        let s = wave_space();
        let xi = vec![s.indep("x"), s.indep("t")];
        let eta = vec![s.jet("u", &[]) * Expression::int(2)];
        let p = characteristic_from_point_symmetry(&s, &xi, &eta).unwrap();
        let expected = eta[0].clone()
            - xi[0].clone() * s.jet("u", &["t"])
            - xi[1].clone() * s.jet("u", &["x"]);
        assert_eq!(p.components[0], expected);
    }
}
