//! Exact symbolic expression kernel.
//!
//! An [`Expression`] is a normalized sum of terms, each term being an exact
//! rational coefficient times a monomial over [`Atom`]s with positive integer
//! exponents, plus an optional formal denominator. Normalization is performed
//! on construction, so structural equality of values decides semantic
//! equality for the supported expression class (polynomials over jet
//! coordinates, parameters, arbitrary-function atoms, unknown-function
//! partials, and exponentials of linear forms), with quotients compared by
//! clearing denominators.
//!
//! The kernel knows nothing about total derivatives or equations; those live
//! in the `jet` and `desystem` modules. It provides construction, arithmetic,
//! partial differentiation with respect to declared atoms, simultaneous
//! substitution, zero-testing, and coefficient collection.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

/// Exact rational coefficient.
pub type Rat = BigRational;

/// Shorthand for building a rational from an integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for building a rational fraction.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Maximum nesting depth (function arguments, quotients, exponent forms)
/// before normalization reports runaway expansion.
pub const DEPTH_BOUND: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("expression nesting exceeds depth bound {DEPTH_BOUND}")]
    DepthExceeded,
    #[error("cyclic binding: target for `{0}` contains its own key atom")]
    CyclicBinding(String),
    #[error("not polynomial in the requested atoms: {0}")]
    NotPolynomial(String),
    #[error("division by zero after substitution")]
    DivisionByZero,
}

// ---------------------------------------------------------------------------
// Multi-indices
// ---------------------------------------------------------------------------

/// Derivative multi-index stored as a count per independent variable, so
/// `u_{tx}` and `u_{xt}` share one representation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<u8>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }

    pub fn raised(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] += 1;
        MultiIndex(v)
    }

    /// Componentwise sum.
    pub fn plus(&self, other: &MultiIndex) -> Self {
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise difference; `None` if any component would go negative.
    pub fn minus(&self, other: &MultiIndex) -> Option<Self> {
        let mut v = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            if a < b {
                return None;
            }
            v.push(a - b);
        }
        Some(MultiIndex(v))
    }

    /// True when `self` dominates `other` componentwise.
    pub fn contains(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// Expansion into a sorted tuple of variable indices, e.g. counts
    /// `(2,1)` over `(t,x)` become `[0,0,1]`.
    pub fn tuple(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.order() as usize);
        for (i, &c) in self.0.iter().enumerate() {
            for _ in 0..c {
                out.push(i);
            }
        }
        out
    }

    /// Product of componentwise binomial coefficients `C(self_i, other_i)`.
    /// This is the Leibniz weight attached to splitting an iterated total
    /// derivative `D_{self}` as `D_{other} . D_{self-other}`.
    pub fn binom(&self, other: &MultiIndex) -> Rat {
        let mut acc = BigInt::one();
        for (&a, &b) in self.0.iter().zip(&other.0) {
            acc *= binomial(a as u64, b as u64);
        }
        Rat::from_integer(acc)
    }

    /// All multi-indices `K <= self` componentwise, in lexicographic order.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(vec![])];
        for &c in &self.0 {
            let mut next = Vec::new();
            for prefix in &out {
                for k in 0..=c {
                    let mut v = prefix.0.clone();
                    v.push(k);
                    next.push(MultiIndex(v));
                }
            }
            out = next;
        }
        out
    }
}

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for j in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

// ---------------------------------------------------------------------------
// Atoms
// ---------------------------------------------------------------------------

/// Linear form `sum_i c_i x^i` in the independent variables, with
/// coefficients that are expressions in parameters and rationals only.
/// Exponential atoms carry exactly one such form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearForm(pub BTreeMap<u16, Expression>);

impl LinearForm {
    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn canon(mut self) -> Self {
        self.0.retain(|_, c| !c.is_zero());
        self
    }

    pub fn plus(&self, other: &LinearForm) -> LinearForm {
        let mut out = self.0.clone();
        for (i, c) in &other.0 {
            let entry = out.entry(*i).or_insert_with(Expression::zero);
            *entry = entry.clone() + c.clone();
        }
        LinearForm(out).canon()
    }

    pub fn scaled(&self, k: &Rat) -> LinearForm {
        if k.is_zero() {
            return LinearForm(BTreeMap::new());
        }
        LinearForm(
            self.0
                .iter()
                .map(|(i, c)| (*i, c.scaled(k)))
                .collect(),
        )
        .canon()
    }

    /// Coefficient of the independent variable `i` (zero when absent).
    pub fn coeff(&self, i: u16) -> Expression {
        self.0.get(&i).cloned().unwrap_or_else(Expression::zero)
    }

    /// The form as an ordinary expression.
    pub fn to_expression(&self) -> Expression {
        let mut acc = Expression::zero();
        for (i, c) in &self.0 {
            acc = acc + c.clone() * Expression::atom(Atom::Indep(*i));
        }
        acc
    }

    /// Partial derivative of the form with respect to an atom.
    fn diff(&self, a: &Atom) -> Expression {
        match a {
            Atom::Indep(i) => self.coeff(*i),
            Atom::Param(_) => {
                let mut acc = Expression::zero();
                for (i, c) in &self.0 {
                    let dc = c.diff_partial(a);
                    if !dc.is_zero() {
                        acc = acc + dc * Expression::atom(Atom::Indep(*i));
                    }
                }
                acc
            }
            _ => Expression::zero(),
        }
    }
}

/// Indivisible symbolic factor.
///
/// Jet multi-indices are stored as per-variable counts, so symmetric
/// derivatives are identified on construction. Arbitrary-function atoms hold
/// a derivative order (`-1` denotes the registered antiderivative) and one
/// normalized argument expression. Unknown-function atoms carry their full
/// argument signature so partial differentiation needs no external registry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    /// Named scalar parameter.
    Param(String),
    /// Independent variable by index into the jet space.
    Indep(u16),
    /// Jet coordinate `u^alpha_I`; the empty index is the variable itself.
    Jet { dep: u16, index: MultiIndex },
    /// `order`-th derivative of a registered univariate function symbol
    /// applied to `arg`; `order = -1` is the antiderivative.
    Fn {
        name: String,
        order: i32,
        arg: Arc<Expression>,
    },
    /// Partial derivative of an unknown function with respect to its
    /// declared arguments, with one derivative count per argument.
    Unknown {
        name: String,
        args: Arc<Vec<Atom>>,
        partial: Vec<u8>,
    },
    /// Exponential of a linear form in independent variables and parameters.
    Exp(Arc<LinearForm>),
}

impl Atom {
    pub fn jet(dep: u16, index: MultiIndex) -> Atom {
        Atom::Jet { dep, index }
    }

    pub fn func(name: &str, order: i32, arg: Expression) -> Atom {
        Atom::Fn {
            name: name.to_string(),
            order,
            arg: Arc::new(arg),
        }
    }

    pub fn unknown(name: &str, args: Vec<Atom>, partial: Vec<u8>) -> Atom {
        Atom::Unknown {
            name: name.to_string(),
            args: Arc::new(args),
            partial,
        }
    }

    pub fn exp(form: LinearForm) -> Option<Atom> {
        let form = form.canon();
        if form.is_zero() {
            None
        } else {
            Some(Atom::Exp(Arc::new(form)))
        }
    }

    /// Highest jet order appearing in (or under) this atom.
    pub fn jet_order(&self) -> u32 {
        let mut max = 0u32;
        self.walk(&mut |a| {
            if let Atom::Jet { index, .. } = a {
                max = max.max(index.order());
            }
        });
        max
    }

    /// Visits this atom and every atom nested inside it (function
    /// arguments, unknown-function signatures, exponent coefficient
    /// expressions, and the independent variables referenced by an
    /// exponent form).
    pub fn walk(&self, f: &mut impl FnMut(&Atom)) {
        f(self);
        match self {
            Atom::Fn { arg, .. } => arg.walk_atoms(f),
            Atom::Unknown { args, .. } => {
                for a in args.iter() {
                    a.walk(f);
                }
            }
            Atom::Exp(form) => {
                for (i, c) in &form.0 {
                    f(&Atom::Indep(*i));
                    c.walk_atoms(f);
                }
            }
            _ => {}
        }
    }

    fn depth(&self) -> usize {
        match self {
            Atom::Fn { arg, .. } => 1 + arg.depth(),
            Atom::Exp(form) => 1 + form.0.values().map(|c| c.depth()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Partial derivative of this atom with respect to atom `by`, treating
    /// all other atoms as independent. The chain rule applies inside
    /// arbitrary-function arguments and unknown-function signatures.
    pub fn diff(&self, by: &Atom) -> Expression {
        if matches!(by, Atom::Exp(_)) {
            panic!("cannot differentiate with respect to an exponential atom");
        }
        if self == by {
            return Expression::one();
        }
        match self {
            Atom::Fn { name, order, arg } => {
                let darg = arg.diff_partial(by);
                if darg.is_zero() {
                    Expression::zero()
                } else {
                    Expression::atom(Atom::func(name, order + 1, arg.as_ref().clone())) * darg
                }
            }
            Atom::Unknown {
                name,
                args,
                partial,
            } => {
                let mut acc = Expression::zero();
                for (m, a) in args.iter().enumerate() {
                    if a == by {
                        let mut p = partial.clone();
                        p[m] += 1;
                        acc = acc
                            + Expression::atom(Atom::unknown(name, args.as_ref().clone(), p));
                    }
                }
                acc
            }
            Atom::Exp(form) => {
                let d = form.diff(by);
                if d.is_zero() {
                    Expression::zero()
                } else {
                    d * Expression::atom(Atom::Exp(form.clone()))
                }
            }
            _ => Expression::zero(),
        }
    }
}

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

/// Product of atoms with positive integer exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Monomial(pub BTreeMap<Atom, u32>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn atom(a: Atom) -> Self {
        let mut m = BTreeMap::new();
        m.insert(a, 1);
        Monomial(m)
    }

    /// Total degree counted with exponents.
    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    /// Canonical form: exponential atoms inside one product are merged into
    /// a single atom by adding their (exponent-scaled) forms.
    fn canon(self) -> Monomial {
        let mut exp_form: Option<LinearForm> = None;
        let mut rest: BTreeMap<Atom, u32> = BTreeMap::new();
        for (a, k) in self.0 {
            debug_assert!(k > 0);
            match a {
                Atom::Exp(form) => {
                    let scaled = form.scaled(&rat(k as i64));
                    exp_form = Some(match exp_form {
                        None => scaled,
                        Some(f) => f.plus(&scaled),
                    });
                }
                other => {
                    *rest.entry(other).or_insert(0) += k;
                }
            }
        }
        if let Some(form) = exp_form {
            if let Some(atom) = Atom::exp(form) {
                *rest.entry(atom).or_insert(0) += 1;
            }
        }
        Monomial(rest)
    }

    fn times(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (a, k) in &other.0 {
            *m.entry(a.clone()).or_insert(0) += k;
        }
        Monomial(m).canon()
    }

    pub fn walk(&self, f: &mut impl FnMut(&Atom)) {
        for a in self.0.keys() {
            a.walk(f);
        }
    }
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

/// Normalized sum of rational-coefficient monomials with an optional formal
/// denominator. Zero is the empty sum with no denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Expression {
    terms: BTreeMap<Monomial, Rat>,
    den: Option<Arc<Expression>>,
}

impl Default for Expression {
    fn default() -> Self {
        Expression::zero()
    }
}

impl Expression {
    pub fn zero() -> Self {
        Expression {
            terms: BTreeMap::new(),
            den: None,
        }
    }

    pub fn one() -> Self {
        Expression::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(), c);
        }
        Expression { terms, den: None }
    }

    pub fn int(n: i64) -> Self {
        Expression::constant(rat(n))
    }

    pub fn atom(a: Atom) -> Self {
        Expression::from_term(Rat::one(), Monomial::atom(a).canon())
    }

    fn from_term(c: Rat, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Expression { terms, den: None }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_none()
            && self.terms.len() == 1
            && self
                .terms
                .get(&Monomial::unit())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// The constant value when the expression is a bare rational.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.den.is_some() {
            return None;
        }
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::unit()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn denominator(&self) -> Option<&Expression> {
        self.den.as_deref()
    }

    /// Numerator and denominator as plain polynomial expressions.
    pub fn split(&self) -> (Expression, Expression) {
        let num = Expression {
            terms: self.terms.clone(),
            den: None,
        };
        let den = self
            .den
            .as_deref()
            .cloned()
            .unwrap_or_else(Expression::one);
        (num, den)
    }

    fn with_den(num: Expression, den: Expression) -> Expression {
        debug_assert!(den.den.is_none() && num.den.is_none());
        if num.is_zero() {
            return Expression::zero();
        }
        if den.is_zero() {
            panic!("formal quotient with zero denominator");
        }
        // Fold constant denominators into the coefficients; pull exponential
        // factors of a single-term denominator into the numerator with the
        // form negated (exponentials never vanish).
        if let Some(c) = den.as_constant() {
            return num.scaled(&(Rat::one() / c));
        }
        if den.terms.len() == 1 {
            let (mono, coeff) = den.terms.iter().next().unwrap();
            let mut exp_part: Option<LinearForm> = None;
            let mut rest = BTreeMap::new();
            for (a, k) in &mono.0 {
                match a {
                    Atom::Exp(form) => {
                        exp_part = Some(form.scaled(&rat(-(*k as i64))));
                    }
                    other => {
                        rest.insert(other.clone(), *k);
                    }
                }
            }
            let mut new_num = num.scaled(&(Rat::one() / coeff.clone()));
            if let Some(form) = exp_part {
                if let Some(atom) = Atom::exp(form) {
                    new_num = new_num * Expression::atom(atom);
                }
            }
            if rest.is_empty() {
                return new_num;
            }
            return Expression {
                terms: new_num.terms,
                den: Some(Arc::new(Expression {
                    terms: BTreeMap::from([(Monomial(rest), Rat::one())]),
                    den: None,
                })),
            };
        }
        // Canonical scale: the smallest denominator monomial gets
        // coefficient one.
        let lead = den.terms.iter().next().map(|(_, c)| c.clone()).unwrap();
        let num = num.scaled(&(Rat::one() / lead.clone()));
        let den = den.scaled(&(Rat::one() / lead));
        Expression {
            terms: num.terms,
            den: Some(Arc::new(den)),
        }
    }

    pub fn scaled(&self, k: &Rat) -> Expression {
        if k.is_zero() {
            return Expression::zero();
        }
        Expression {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * k))
                .collect(),
            den: self.den.clone(),
        }
    }

    /// Formal quotient `self / other`.
    pub fn divided_by(&self, other: &Expression) -> Expression {
        if other.is_zero() {
            panic!("division by the zero expression");
        }
        let (an, ad) = self.split();
        let (bn, bd) = other.split();
        Expression::with_den(an * bd, ad * bn)
    }

    pub fn pow(&self, k: u32) -> Expression {
        let mut acc = Expression::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }

    /// Re-canonicalizes and checks the nesting-depth bound. Construction
    /// already yields canonical forms; this is the public entry point that
    /// guards against runaway expansion and is idempotent.
    pub fn normalize(&self) -> Result<Expression, ExprError> {
        if self.depth() > DEPTH_BOUND {
            return Err(ExprError::DepthExceeded);
        }
        let mut out = Expression::zero();
        for (m, c) in &self.terms {
            out = out + Expression::from_term(c.clone(), m.clone().canon());
        }
        if let Some(d) = &self.den {
            let d = d.normalize()?;
            out = Expression::with_den(out, d);
        }
        Ok(out)
    }

    pub fn depth(&self) -> usize {
        let t = self
            .terms
            .keys()
            .flat_map(|m| m.0.keys())
            .map(|a| a.depth())
            .max()
            .unwrap_or(0);
        match &self.den {
            Some(d) => t.max(1 + d.depth()),
            None => t,
        }
    }

    /// Visits every atom, including atoms nested inside function arguments,
    /// unknown signatures, exponent forms, and the denominator.
    pub fn walk_atoms(&self, f: &mut impl FnMut(&Atom)) {
        for m in self.terms.keys() {
            m.walk(f);
        }
        if let Some(d) = &self.den {
            d.walk_atoms(f);
        }
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        let mut found = false;
        self.walk_atoms(&mut |x| {
            if x == a {
                found = true;
            }
        });
        found
    }

    pub fn contains_where(&self, pred: &impl Fn(&Atom) -> bool) -> bool {
        let mut found = false;
        self.walk_atoms(&mut |x| {
            if pred(x) {
                found = true;
            }
        });
        found
    }

    /// Highest jet order appearing anywhere in the expression.
    pub fn jet_order(&self) -> u32 {
        let mut max = 0;
        self.walk_atoms(&mut |a| {
            if let Atom::Jet { index, .. } = a {
                max = max.max(index.order());
            }
        });
        max
    }

    /// Distinct `(dep, index)` jet coordinates appearing anywhere.
    pub fn jet_atoms(&self) -> BTreeSet<(u16, MultiIndex)> {
        let mut set = BTreeSet::new();
        self.walk_atoms(&mut |a| {
            if let Atom::Jet { dep, index } = a {
                set.insert((*dep, index.clone()));
            }
        });
        set
    }

    /// Semantic equality: the difference normalizes to zero after clearing
    /// denominators.
    pub fn equivalent(&self, other: &Expression) -> bool {
        (self.clone() - other.clone()).is_zero()
    }

    // -- differentiation ----------------------------------------------------

    /// Generic derivation over the term structure: applies the product and
    /// quotient rules with a caller-supplied rule for single atoms. Both
    /// `diff_partial` and the total derivatives are built on this.
    pub fn derive(
        &self,
        atom_rule: &mut impl FnMut(&Atom) -> Result<Expression, ExprError>,
    ) -> Result<Expression, ExprError> {
        let (num, den) = self.split();
        let dnum = num.derive_poly(atom_rule)?;
        match &self.den {
            None => Ok(dnum),
            Some(d) => {
                let dden = d.derive_poly(atom_rule)?;
                // (n/d)' = (n' d - n d') / d^2
                let n = dnum * den.clone() - num * dden;
                Ok(Expression::with_den(n, den.clone() * den))
            }
        }
    }

    fn derive_poly(
        &self,
        atom_rule: &mut impl FnMut(&Atom) -> Result<Expression, ExprError>,
    ) -> Result<Expression, ExprError> {
        debug_assert!(self.den.is_none());
        let mut acc = Expression::zero();
        for (mono, coeff) in &self.terms {
            for (a, &k) in &mono.0 {
                let da = atom_rule(a)?;
                if da.is_zero() {
                    continue;
                }
                let mut rest = mono.0.clone();
                if k == 1 {
                    rest.remove(a);
                } else {
                    rest.insert(a.clone(), k - 1);
                }
                let partial =
                    Expression::from_term(coeff * rat(k as i64), Monomial(rest).canon());
                acc = acc + partial * da;
            }
        }
        Ok(acc)
    }

    /// Partial derivative with respect to a declared atom, treating all
    /// other atoms as independent. The chain rule is applied inside
    /// arbitrary-function arguments and unknown-function signatures.
    pub fn diff_partial(&self, by: &Atom) -> Expression {
        self.derive(&mut |a| Ok(a.diff(by)))
            .expect("partial differentiation cannot fail")
    }

    // -- substitution ---------------------------------------------------------

    /// Simultaneous substitution of atoms by expressions, then
    /// normalization. Binding an unknown-function atom with an all-zero
    /// partial rewrites every partial of that unknown by differentiating
    /// the concrete replacement with respect to the signature arguments.
    pub fn substitute(
        &self,
        bindings: &BTreeMap<Atom, Expression>,
    ) -> Result<Expression, ExprError> {
        for (k, v) in bindings {
            if v.contains_atom(k) {
                return Err(ExprError::CyclicBinding(format!("{k:?}")));
            }
        }
        let out = self.substitute_unchecked(bindings)?;
        out.normalize()
    }

    fn substitute_unchecked(
        &self,
        bindings: &BTreeMap<Atom, Expression>,
    ) -> Result<Expression, ExprError> {
        let mut acc = Expression::zero();
        for (mono, coeff) in &self.terms {
            let mut term = Expression::constant(coeff.clone());
            for (a, &k) in &mono.0 {
                let replaced = Expression::substitute_atom(a, bindings)?;
                term = term * replaced.pow(k);
            }
            acc = acc + term;
        }
        match &self.den {
            None => Ok(acc),
            Some(d) => {
                let d = d.substitute_unchecked(bindings)?;
                if d.is_zero() {
                    return Err(ExprError::DivisionByZero);
                }
                Ok(acc.divided_by(&d))
            }
        }
    }

    fn substitute_atom(
        a: &Atom,
        bindings: &BTreeMap<Atom, Expression>,
    ) -> Result<Expression, ExprError> {
        if let Some(e) = bindings.get(a) {
            return Ok(e.clone());
        }
        match a {
            Atom::Fn { name, order, arg } => {
                let new_arg = arg.substitute_unchecked(bindings)?;
                Ok(Expression::atom(Atom::func(name, *order, new_arg)))
            }
            Atom::Unknown {
                name,
                args,
                partial,
            } => {
                // Instantiation rule: a binding for the base unknown atom
                // rewrites its partials by differentiating the replacement.
                let base = Atom::unknown(name, args.as_ref().clone(), vec![0; args.len()]);
                if let Some(concrete) = bindings.get(&base) {
                    let mut e = concrete.clone();
                    for (m, &count) in partial.iter().enumerate() {
                        for _ in 0..count {
                            e = e.diff_partial(&args[m]);
                        }
                    }
                    return Ok(e);
                }
                Ok(Expression::atom(a.clone()))
            }
            Atom::Exp(form) => {
                let mut new_form = BTreeMap::new();
                for (i, c) in &form.0 {
                    let c = c.substitute_unchecked(bindings)?;
                    if !c.is_zero() {
                        new_form.insert(*i, c);
                    }
                }
                match Atom::exp(LinearForm(new_form)) {
                    Some(atom) => Ok(Expression::atom(atom)),
                    None => Ok(Expression::one()),
                }
            }
            _ => Ok(Expression::atom(a.clone())),
        }
    }

    // -- collection -----------------------------------------------------------

    /// Writes the expression as a sum `monomial * coefficient` over the
    /// given atoms, with coefficients free of those atoms. Fails when the
    /// atoms occur in a denominator, inside a function argument, inside an
    /// unknown-function signature, or inside an exponent form.
    pub fn collect(
        &self,
        vars: &BTreeSet<Atom>,
    ) -> Result<BTreeMap<Monomial, Expression>, ExprError> {
        if let Some(d) = &self.den {
            for v in vars {
                if d.contains_atom(v) {
                    return Err(ExprError::NotPolynomial(
                        "collection atom occurs in a denominator".into(),
                    ));
                }
            }
        }
        let mut out: BTreeMap<Monomial, Expression> = BTreeMap::new();
        for (mono, coeff) in &self.terms {
            let mut var_part = BTreeMap::new();
            let mut rest = BTreeMap::new();
            for (a, &k) in &mono.0 {
                if vars.contains(a) {
                    var_part.insert(a.clone(), k);
                } else {
                    // Nested occurrence means non-polynomial dependence.
                    let mut nested = false;
                    a.walk(&mut |x| {
                        if x != a && vars.contains(x) {
                            nested = true;
                        }
                    });
                    if nested {
                        return Err(ExprError::NotPolynomial(
                            "collection atom occurs inside a function argument".into(),
                        ));
                    }
                    rest.insert(a.clone(), k);
                }
            }
            let rest_expr = Expression {
                terms: BTreeMap::from([(Monomial(rest), coeff.clone())]),
                den: self.den.clone(),
            };
            let entry = out
                .entry(Monomial(var_part))
                .or_insert_with(Expression::zero);
            *entry = entry.clone() + rest_expr;
        }
        out.retain(|_, c| !c.is_zero());
        Ok(out)
    }

    /// Divides out the rational content and fixes the sign so the smallest
    /// monomial has positive coefficient. Used to put generated determining
    /// equations into a stable shape.
    pub fn content_normalized(&self) -> Expression {
        if self.terms.is_empty() {
            return Expression::zero();
        }
        let mut gcd_num = BigInt::zero();
        let mut lcm_den = BigInt::one();
        for c in self.terms.values() {
            gcd_num = num_integer_gcd(gcd_num.clone(), c.numer().abs());
            let d = c.denom().abs();
            let g = num_integer_gcd(lcm_den.clone(), d.clone());
            lcm_den = lcm_den / g * d;
        }
        if gcd_num.is_zero() {
            return Expression::zero();
        }
        let mut scale = Rat::new(lcm_den, gcd_num);
        let first = self.terms.iter().next().unwrap().1;
        if (first * &scale).is_negative() {
            scale = -scale;
        }
        self.scaled(&scale)
    }
}

fn num_integer_gcd(mut a: BigInt, mut b: BigInt) -> BigInt {
    a = a.abs();
    b = b.abs();
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

impl Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        match (&self.den, &rhs.den) {
            (None, None) => add_poly(self, rhs),
            (a, b) if a == b => {
                let den = self.den.clone();
                let mut out = add_poly(
                    Expression {
                        terms: self.terms,
                        den: None,
                    },
                    Expression {
                        terms: rhs.terms,
                        den: None,
                    },
                );
                if out.is_zero() {
                    return out;
                }
                out.den = den;
                out
            }
            _ => {
                let (an, ad) = self.split();
                let (bn, bd) = rhs.split();
                Expression::with_den(an * bd.clone() + bn * ad.clone(), ad * bd)
            }
        }
    }
}

fn add_poly(a: Expression, b: Expression) -> Expression {
    let mut terms = a.terms;
    for (m, c) in b.terms {
        match terms.get_mut(&m) {
            Some(acc) => {
                *acc += c;
                if acc.is_zero() {
                    terms.remove(&m);
                }
            }
            None => {
                terms.insert(m, c);
            }
        }
    }
    Expression { terms, den: None }
}

impl Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        self + (-rhs)
    }
}

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
            den: self.den,
        }
    }
}

impl Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        if self.is_zero() || rhs.is_zero() {
            return Expression::zero();
        }
        let (an, ad) = self.split();
        let (bn, bd) = rhs.split();
        let mut terms: BTreeMap<Monomial, Rat> = BTreeMap::new();
        for (ma, ca) in &an.terms {
            for (mb, cb) in &bn.terms {
                let m = ma.times(mb);
                let c = ca * cb;
                match terms.get_mut(&m) {
                    Some(acc) => {
                        *acc += c;
                        if acc.is_zero() {
                            terms.remove(&m);
                        }
                    }
                    None => {
                        terms.insert(m, c);
                    }
                }
            }
        }
        let num = Expression { terms, den: None };
        if ad.is_one() && bd.is_one() {
            num
        } else {
            Expression::with_den(num, ad * bd)
        }
    }
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

/// Name tables used to render expressions; the jet space provides one.
pub trait NameResolver {
    fn indep_name(&self, i: u16) -> &str;
    fn dep_name(&self, d: u16) -> &str;
}

pub struct DisplayExpr<'a, R: NameResolver> {
    pub expr: &'a Expression,
    pub names: &'a R,
}

impl Expression {
    pub fn display<'a, R: NameResolver>(&'a self, names: &'a R) -> DisplayExpr<'a, R> {
        DisplayExpr { expr: self, names }
    }
}

fn fmt_rat(c: &Rat) -> String {
    if c.denom().is_one() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_atom<R: NameResolver>(a: &Atom, names: &R) -> String {
    match a {
        Atom::Param(p) => p.clone(),
        Atom::Indep(i) => names.indep_name(*i).to_string(),
        Atom::Jet { dep, index } => {
            if index.order() == 0 {
                names.dep_name(*dep).to_string()
            } else {
                let vars: Vec<&str> = index
                    .tuple()
                    .into_iter()
                    .map(|i| names.indep_name(i as u16))
                    .collect();
                format!("{}[{}]", names.dep_name(*dep), vars.join(","))
            }
        }
        Atom::Fn { name, order, arg } => {
            let arg = fmt_expr(arg, names, false);
            match order {
                -1 => format!("int({name},{arg})"),
                0 => format!("{name}({arg})"),
                k => format!("{}{}({})", name, "'".repeat(*k as usize), arg),
            }
        }
        Atom::Unknown {
            name,
            args,
            partial,
        } => {
            if partial.iter().all(|&c| c == 0) {
                name.clone()
            } else {
                let mut parts = Vec::new();
                for (m, &count) in partial.iter().enumerate() {
                    for _ in 0..count {
                        parts.push(fmt_atom(&args[m], names));
                    }
                }
                format!("{}[{}]", name, parts.join(","))
            }
        }
        Atom::Exp(form) => format!("exp({})", fmt_expr(&form.to_expression(), names, false)),
    }
}

fn fmt_term<R: NameResolver>(c: &Rat, m: &Monomial, names: &R) -> String {
    let mut factors: Vec<String> = Vec::new();
    let coeff = c.abs();
    if !coeff.is_one() || m.is_unit() {
        factors.push(fmt_rat(&coeff));
    }
    for (a, &k) in &m.0 {
        let txt = fmt_atom(a, names);
        if k == 1 {
            factors.push(txt);
        } else {
            factors.push(format!("{txt}^{k}"));
        }
    }
    factors.join("*")
}

fn fmt_expr<R: NameResolver>(e: &Expression, names: &R, parens_for_sum: bool) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in e.terms.iter().enumerate() {
        if i == 0 {
            if c.is_negative() {
                out.push('-');
            }
        } else if c.is_negative() {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&fmt_term(c, m, names));
    }
    if let Some(d) = &e.den {
        let num = if e.terms.len() > 1 {
            format!("({out})")
        } else {
            out
        };
        return format!("{}/({})", num, fmt_expr(d, names, false));
    }
    if parens_for_sum && e.terms.len() > 1 {
        return format!("({out})");
    }
    out
}

impl<'a, R: NameResolver> fmt::Display for DisplayExpr<'a, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_expr(self.expr, self.names, false))
    }
}
