//! Variational-calculus toolbox: Fréchet derivative and its adjoint, the
//! boundary currents that tie them together, Euler and higher Euler
//! operators, Helmholtz checks, and total-divergence testing.
//!
//! All identities here are exact. The boundary currents `Psi` and `Phi` are
//! computed from one deterministic telescoping scheme over sorted derivative
//! tuples, so the defining identities
//!
//! ```text
//! v . (df/dw) - w . (df*/dv) = Div Psi(w,v;f)
//! df/dw = w . E(f) + Div Phi(w;f)
//! ```
//!
//! normalize to zero structurally, not merely up to a trivial current, and
//! the substitution `v -> Q` turns `Phi(w; v.F)` into `Psi(w,Q;F)` exactly.

use crate::expr::{Atom, Expression, MultiIndex, Rat};
use crate::jet::{JetError, JetSpace};
use num_traits::One;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VariationalError {
    #[error("component count {0} does not match expected {1}")]
    ShapeMismatch(usize, usize),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Vector of `n` expressions indexed by independent variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurrentVector(pub Vec<Expression>);

impl CurrentVector {
    pub fn zero(n: usize) -> Self {
        CurrentVector(vec![Expression::zero(); n])
    }

    pub fn divergence(&self, space: &JetSpace) -> Result<Expression, JetError> {
        space.total_divergence(&self.0)
    }
}

/// Distinct jet coordinates `(dep, index)` appearing anywhere in the given
/// expressions, including under function arguments and denominators.
fn jet_support(fs: &[Expression]) -> BTreeSet<(u16, MultiIndex)> {
    let mut set = BTreeSet::new();
    for f in fs {
        set.extend(f.jet_atoms());
    }
    set
}

/// Fréchet derivative (linearization) of `f` along the direction `w`:
/// `(delta_w f)_a = sum_{alpha,I} (D_I w^alpha) df_a/du^alpha_I`.
pub fn frechet(
    space: &JetSpace,
    f: &[Expression],
    w: &[Expression],
) -> Result<Vec<Expression>, VariationalError> {
    if w.len() != space.n_dep() {
        return Err(VariationalError::ShapeMismatch(w.len(), space.n_dep()));
    }
    let support = jet_support(f);
    let mut out = vec![Expression::zero(); f.len()];
    for (dep, index) in &support {
        let jet = Atom::jet(*dep, index.clone());
        let dw = space.iterated_total_derivative(&w[*dep as usize], index)?;
        if dw.is_zero() {
            continue;
        }
        for (a, fa) in f.iter().enumerate() {
            let coeff = fa.diff_partial(&jet);
            if !coeff.is_zero() {
                out[a] = out[a].clone() + dw.clone() * coeff;
            }
        }
    }
    Ok(out)
}

/// Adjoint Fréchet derivative:
/// `(delta*_v f)_alpha = sum_{a,I} (-1)^{|I|} D_I(v^a df_a/du^alpha_I)`.
pub fn adjoint_frechet(
    space: &JetSpace,
    f: &[Expression],
    v: &[Expression],
) -> Result<Vec<Expression>, VariationalError> {
    if v.len() != f.len() {
        return Err(VariationalError::ShapeMismatch(v.len(), f.len()));
    }
    let support = jet_support(f);
    let mut out = vec![Expression::zero(); space.n_dep()];
    for (dep, index) in &support {
        let jet = Atom::jet(*dep, index.clone());
        let sign = if index.order() % 2 == 0 {
            Expression::one()
        } else {
            Expression::int(-1)
        };
        for (a, fa) in f.iter().enumerate() {
            let coeff = fa.diff_partial(&jet);
            if coeff.is_zero() {
                continue;
            }
            let inner = v[a].clone() * coeff;
            let derived = space.iterated_total_derivative(&inner, index)?;
            out[*dep as usize] = out[*dep as usize].clone() + sign.clone() * derived;
        }
    }
    Ok(out)
}

/// One telescoping pass for a single jet coordinate: distributes
/// `g . D_I w - (-1)^{|I|} (D_I g) . w` over the components of a boundary
/// current. The derivative tuple is taken sorted ascending; position `q`
/// contributes `(-1)^{q-1} (D_{i_1..i_{q-1}} g)(D_{i_{q+1}..i_k} w)` to
/// component `i_q`.
pub(crate) fn telescope_into(
    space: &JetSpace,
    g: &Expression,
    w: &Expression,
    index: &MultiIndex,
    out: &mut [Expression],
) -> Result<(), JetError> {
    let tuple = index.tuple();
    let k = tuple.len();
    if k == 0 {
        return Ok(());
    }
    // Suffix derivatives of w: suffix[q] = D_{i_{q+1}} ... D_{i_k} w.
    let mut suffix = vec![w.clone(); k];
    for q in (0..k - 1).rev() {
        suffix[q] = space.total_derivative(&suffix[q + 1], tuple[q + 1])?;
    }
    // Prefix derivatives of g accumulate as we walk q upward.
    let mut prefix = g.clone();
    let mut sign = Rat::one();
    for q in 0..k {
        let contribution = prefix.clone() * suffix[q].clone();
        out[tuple[q]] = out[tuple[q]].clone() + contribution.scaled(&sign);
        if q + 1 < k {
            prefix = space.total_derivative(&prefix, tuple[q])?;
            sign = -sign;
        }
    }
    Ok(())
}

/// Boundary current `Psi(w,v;f)` of the Fréchet/adjoint pairing:
/// `v.(delta_w f) - w.(delta*_v f) = Div Psi` holds exactly.
pub fn pair_boundary_current(
    space: &JetSpace,
    f: &[Expression],
    w: &[Expression],
    v: &[Expression],
) -> Result<CurrentVector, VariationalError> {
    if w.len() != space.n_dep() {
        return Err(VariationalError::ShapeMismatch(w.len(), space.n_dep()));
    }
    if v.len() != f.len() {
        return Err(VariationalError::ShapeMismatch(v.len(), f.len()));
    }
    let support = jet_support(f);
    let mut out = vec![Expression::zero(); space.n_indep()];
    for (dep, index) in &support {
        if index.order() == 0 {
            continue;
        }
        let jet = Atom::jet(*dep, index.clone());
        for (a, fa) in f.iter().enumerate() {
            let coeff = fa.diff_partial(&jet);
            if coeff.is_zero() {
                continue;
            }
            let g = v[a].clone() * coeff;
            telescope_into(space, &g, &w[*dep as usize], index, &mut out)?;
        }
    }
    Ok(CurrentVector(out))
}

/// Euler operator (variational derivative) with respect to the dependent
/// variable `alpha`: `E(f) = sum_I (-1)^{|I|} D_I(df/du^alpha_I)`.
pub fn euler(space: &JetSpace, f: &Expression, alpha: u16) -> Result<Expression, JetError> {
    let mut out = Expression::zero();
    for (dep, index) in f.jet_atoms() {
        if dep != alpha {
            continue;
        }
        let coeff = f.diff_partial(&Atom::jet(dep, index.clone()));
        if coeff.is_zero() {
            continue;
        }
        let derived = space.iterated_total_derivative(&coeff, &index)?;
        if index.order() % 2 == 0 {
            out = out + derived;
        } else {
            out = out - derived;
        }
    }
    Ok(out)
}

/// Boundary current `Phi(w;f)` of the variational relation
/// `delta_w f = w.E(f) + Div Phi`, computed by the same telescoping scheme
/// as [`pair_boundary_current`] so that `Phi(w; v.f) = Psi(w,v;f)` exactly.
pub fn euler_current(
    space: &JetSpace,
    f: &Expression,
    w: &[Expression],
) -> Result<CurrentVector, VariationalError> {
    if w.len() != space.n_dep() {
        return Err(VariationalError::ShapeMismatch(w.len(), space.n_dep()));
    }
    let mut out = vec![Expression::zero(); space.n_indep()];
    for (dep, index) in f.jet_atoms() {
        if index.order() == 0 {
            continue;
        }
        let coeff = f.diff_partial(&Atom::jet(dep, index.clone()));
        if coeff.is_zero() {
            continue;
        }
        telescope_into(space, &coeff, &w[dep as usize], &index, &mut out)?;
    }
    Ok(CurrentVector(out))
}

/// Higher Euler operator `E^{(J)}(f)`, the binomial-weighted alternating sum
/// `sum_K (-1)^{|K|} C(J+K,J) D_K(df/du^alpha_{J+K})`. The weights are
/// products of per-variable binomial coefficients, matching the count-vector
/// representation of symmetric derivative tuples.
pub fn higher_euler(
    space: &JetSpace,
    f: &Expression,
    alpha: u16,
    j: &MultiIndex,
) -> Result<Expression, JetError> {
    let mut out = Expression::zero();
    for (dep, index) in f.jet_atoms() {
        if dep != alpha {
            continue;
        }
        let k = match index.minus(j) {
            Some(k) => k,
            None => continue,
        };
        let coeff = f.diff_partial(&Atom::jet(dep, index.clone()));
        if coeff.is_zero() {
            continue;
        }
        let derived = space.iterated_total_derivative(&coeff, &k)?;
        let weight = index.binom(j);
        let signed = if k.order() % 2 == 0 { weight } else { -weight };
        out = out + derived.scaled(&signed);
    }
    Ok(out)
}

/// Helmholtz residual `delta_w F - delta*_w F` with `w` a tuple of fresh
/// dependent variables, and the derived variationality test. The residual
/// vanishes identically in jet space iff `F` is the Euler-Lagrange
/// expression of some Lagrangian.
pub fn helmholtz_residual(
    space: &JetSpace,
    f: &[Expression],
) -> Result<(Vec<Expression>, JetSpace), VariationalError> {
    if f.len() != space.n_dep() {
        return Err(VariationalError::ShapeMismatch(f.len(), space.n_dep()));
    }
    let names: Vec<String> = (0..space.n_dep())
        .map(|k| space.fresh_dep_name(&format!("w{k}")))
        .collect();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let (ext, ids) = space.extended_with_deps(&name_refs);
    let w: Vec<Expression> = ids
        .iter()
        .map(|&d| Expression::atom(Atom::jet(d, MultiIndex::zero(ext.n_indep()))))
        .collect();
    // The direction tuple spans every dependent variable of the extended
    // space; the fresh components never occur in f, so padding with zeros
    // for them is exact.
    let mut w_full = vec![Expression::zero(); ext.n_dep()];
    for (alpha, expr) in w.iter().enumerate() {
        w_full[alpha] = expr.clone();
    }
    let lin = frechet(&ext, f, &w_full)?;
    let adj = adjoint_frechet(&ext, f, &w)?;
    let residual: Vec<Expression> = lin
        .into_iter()
        .zip(adj.into_iter().take(f.len()))
        .map(|(a, b)| a - b)
        .collect();
    Ok((residual, ext))
}

/// True iff the system is variational (all Helmholtz residuals vanish
/// identically in jet space).
pub fn is_variational(space: &JetSpace, f: &[Expression]) -> Result<bool, VariationalError> {
    let (residual, _) = helmholtz_residual(space, f)?;
    Ok(residual.iter().all(|r| r.is_zero()))
}

/// True iff `f` is annihilated by every Euler operator, i.e. is a total
/// divergence.
pub fn is_total_divergence(space: &JetSpace, f: &Expression) -> Result<bool, JetError> {
    for alpha in 0..space.n_dep() {
        if !euler(space, f, alpha as u16)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_expression, random_polynomial, Prng};
    use crate::expr::Expression;

    fn wave_space() -> JetSpace {
        JetSpace::new(&["t", "x"], &["u"]).with_funcs(&["b", "c", "m"])
    }

    /// The running wave family F = u_tt - u_xx + b(u)u_t + c(u)u_x + m(u).
    fn f_wave(s: &JetSpace) -> Expression {
        let u = s.jet("u", &[]);
        s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + s.func("b", 0, u.clone()) * s.jet("u", &["t"])
            + s.func("c", 0, u.clone()) * s.jet("u", &["x"])
            + s.func("m", 0, u)
    }

    fn with_direction(s: &JetSpace, name: &str) -> (JetSpace, Expression) {
        let (ext, ids) = s.extended_with_deps(&[name]);
        let w = Expression::atom(Atom::jet(ids[0], MultiIndex::zero(ext.n_indep())));
        (ext, w)
    }

    /// Direction tuple for `frechet` over an extended space: the fresh
    /// variable acts on the first dependent variable, the rest are zero.
    fn dir_tuple(ext: &JetSpace, w: &Expression) -> Vec<Expression> {
        let mut out = vec![Expression::zero(); ext.n_dep()];
        out[0] = w.clone();
        out
    }

    #[test]
    fn frechet_examples() {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let (ext, w) = with_direction(&s, "w");
        // u u_x linearizes to w u_x + u w_x.
        let f = u.clone() * s.jet("u", &["x"]);
        let got = frechet(&ext, &[f], &dir_tuple(&ext, &w)).unwrap();
        let wx = ext.total_derivative(&w, 1).unwrap();
        assert_eq!(got[0], w.clone() * ext.jet("u", &["x"]) + u.clone() * wx);
        // Identity map.
        let got = frechet(&ext, &[u.clone()], &dir_tuple(&ext, &w)).unwrap();
        assert_eq!(got[0], w);

        // Wave family: D_t^2 w - D_x^2 w + b D_t w + c D_x w
        //              + (u_t b' + u_x c' + m') w.
        let got = frechet(&ext, &[f_wave(&s)], &dir_tuple(&ext, &w)).unwrap();
        let wt = ext.total_derivative(&w, 0).unwrap();
        let wxx = ext
            .iterated_total_derivative(&w, &MultiIndex(vec![0, 2]))
            .unwrap();
        let wtt = ext
            .iterated_total_derivative(&w, &MultiIndex(vec![2, 0]))
            .unwrap();
        let wx = ext.total_derivative(&w, 1).unwrap();
        let b = ext.func("b", 0, u.clone());
        let c = ext.func("c", 0, u.clone());
        let expected = wtt - wxx
            + b * wt
            + c * wx
            + (ext.jet("u", &["t"]) * ext.func("b", 1, u.clone())
                + ext.jet("u", &["x"]) * ext.func("c", 1, u.clone())
                + ext.func("m", 1, u.clone()))
                * w;
        assert!((got[0].clone() - expected).is_zero());
    }

    #[test]
    fn adjoint_examples() {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let (ext, v) = with_direction(&s, "v");
        // u u_x has adjoint direction -u v_x.
        let f = u.clone() * s.jet("u", &["x"]);
        let got = adjoint_frechet(&ext, &[f], &[v.clone()]).unwrap();
        let vx = ext.total_derivative(&v, 1).unwrap();
        assert!((got[0].clone() + u.clone() * vx).is_zero());

        // Wave family: v_tt - v_xx - b v_t - c v_x + m' v.  (The b'u_t and
        // c'u_x contributions cancel between the undifferentiated term and
        // the expanded first-order terms.)
        let got = adjoint_frechet(&ext, &[f_wave(&s)], &[v.clone()]).unwrap();
        let vt = ext.total_derivative(&v, 0).unwrap();
        let vx = ext.total_derivative(&v, 1).unwrap();
        let vtt = ext
            .iterated_total_derivative(&v, &MultiIndex(vec![2, 0]))
            .unwrap();
        let vxx = ext
            .iterated_total_derivative(&v, &MultiIndex(vec![0, 2]))
            .unwrap();
        let expected = vtt - vxx
            - ext.func("b", 0, u.clone()) * vt
            - ext.func("c", 0, u.clone()) * vx
            + ext.func("m", 1, u.clone()) * v.clone();
        assert!((got[0].clone() - expected).is_zero());

        // Self-adjointness of the variational member b = c = 0.
        let f_var = ext.jet("u", &["t", "t"]) - ext.jet("u", &["x", "x"])
            + ext.func("m", 0, u.clone());
        let lin = frechet(&ext, &[f_var.clone()], &dir_tuple(&ext, &v)).unwrap();
        let adj = adjoint_frechet(&ext, &[f_var], &[v.clone()]).unwrap();
        assert!((lin[0].clone() - adj[0].clone()).is_zero());
    }

    #[test]
    fn boundary_current_examples() {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let (ext, w) = with_direction(&s, "w");
        let (ext, v) = {
            let (e2, ids) = ext.extended_with_deps(&["v"]);
            (
                e2.clone(),
                Expression::atom(Atom::jet(ids[0], MultiIndex::zero(2))),
            )
        };
        let w_tuple = vec![w.clone(), Expression::zero(), Expression::zero()];
        // f = u u_x: Psi^x = u v w, Psi^t = 0.
        let f = u.clone() * ext.jet("u", &["x"]);
        let psi = pair_boundary_current(&ext, &[f], &w_tuple, &[v.clone()]).unwrap();
        assert!(psi.0[0].is_zero());
        assert_eq!(psi.0[1], u.clone() * v.clone() * w.clone());

        // f = u: no derivatives, zero current.
        let psi = pair_boundary_current(&ext, &[u.clone()], &w_tuple, &[v.clone()]).unwrap();
        assert!(psi.0[0].is_zero() && psi.0[1].is_zero());

        // Wave family: Psi^t = v D_t w + (b v - D_t v) w,
        //              Psi^x = -v D_x w + (c v + D_x v) w.
        let psi =
            pair_boundary_current(&ext, &[f_wave(&s)], &w_tuple, &[v.clone()]).unwrap();
        let wt = ext.total_derivative(&w, 0).unwrap();
        let wx = ext.total_derivative(&w, 1).unwrap();
        let vt = ext.total_derivative(&v, 0).unwrap();
        let vx = ext.total_derivative(&v, 1).unwrap();
        let b = ext.func("b", 0, u.clone());
        let c = ext.func("c", 0, u.clone());
        let psi_t = v.clone() * wt + (b * v.clone() - vt) * w.clone();
        let psi_x = -v.clone() * wx + (c * v.clone() + vx) * w.clone();
        assert!((psi.0[0].clone() - psi_t).is_zero());
        assert!((psi.0[1].clone() - psi_x).is_zero());
    }

    #[test]
    fn pairing_identity_random() {
        let s = JetSpace::new(&["t", "x"], &["u", "w", "v"]);
        let mut rng = Prng::new(41);
        for _ in 0..20 {
            let f = random_polynomial(&s, &mut rng, 3, 3, 3);
            let w = vec![
                random_expression(&s, &mut rng, 2, 2),
                Expression::zero(),
                Expression::zero(),
            ];
            let v = vec![random_expression(&s, &mut rng, 2, 2)];
            let lin = frechet(&s, &[f.clone()], &w).unwrap();
            let adj = adjoint_frechet(&s, &[f.clone()], &v).unwrap();
            let psi = pair_boundary_current(&s, &[f], &w, &v).unwrap();
            let div = psi.divergence(&s).unwrap();
            let mut lhs = v[0].clone() * lin[0].clone() - div;
            for (alpha, w_alpha) in w.iter().enumerate() {
                lhs = lhs - w_alpha.clone() * adj[alpha].clone();
            }
            assert!(lhs.is_zero());
        }
    }

    #[test]
    fn euler_examples() {
        let s = wave_space();
        let ut = s.jet("u", &["t"]);
        // E(u_t^2 / 2) = -u_tt.
        let e = euler(&s, &ut.clone().pow(2).scaled(&crate::expr::ratio(1, 2)), 0).unwrap();
        assert!((e + s.jet("u", &["t", "t"])).is_zero());
        // Divergences are annihilated.
        let u = s.jet("u", &[]);
        let div = s
            .total_derivative(&(u.clone() * u.clone()), 0)
            .unwrap()
            + s.total_derivative(&(u.clone() * s.jet("u", &["x"])), 1).unwrap();
        assert!(euler(&s, &div, 0).unwrap().is_zero());
        // E_u(v F_wave) reproduces the adjoint equation.
        let (ext, v) = with_direction(&s, "v");
        let lagrangian = v.clone() * f_wave(&s);
        let got = euler(&ext, &lagrangian, 0).unwrap();
        let adj = adjoint_frechet(&ext, &[f_wave(&s)], &[v]).unwrap();
        assert!((got - adj[0].clone()).is_zero());
    }

    #[test]
    fn euler_current_closes_variational_relation() {
        let s = JetSpace::new(&["t", "x"], &["u", "w"]);
        let mut rng = Prng::new(77);
        for _ in 0..15 {
            let f = random_expression(&s, &mut rng, 2, 3);
            let w = vec![
                Expression::atom(Atom::jet(1, MultiIndex::zero(2))),
                Expression::zero(),
            ];
            let lin = frechet(&s, &[f.clone()], &w).unwrap();
            let e0 = euler(&s, &f, 0).unwrap();
            let phi = euler_current(&s, &f, &w).unwrap();
            let div = phi.divergence(&s).unwrap();
            let lhs = lin[0].clone() - w[0].clone() * e0 - div;
            // The w-variable contributes no Euler term since f is built on u.
            assert!(lhs.is_zero());
        }
    }

    #[test]
    fn higher_euler_examples() {
        let s = wave_space();
        let ut = s.jet("u", &["t"]);
        let ux = s.jet("u", &["x"]);
        let j_t = MultiIndex(vec![1, 0]);
        let j_x = MultiIndex(vec![0, 1]);
        let got = higher_euler(&s, &ut.clone().pow(2), 0, &j_t).unwrap();
        assert_eq!(got, ut.clone() * Expression::int(2));
        let got = higher_euler(&s, &(ut.clone() * ux.clone()), 0, &j_x).unwrap();
        assert_eq!(got, ut.clone());
        let u = s.jet("u", &[]);
        let got = higher_euler(&s, &u.clone().pow(2), 0, &j_t).unwrap();
        assert!(got.is_zero());
    }

    #[test]
    fn higher_euler_splits_adjoint_along_direction() {
        // delta*_F Q = sum_J (-1)^{|J|} (D_J F) E^(J)(Q) exactly, for a mixed
        // second-order Q; exercises the count-vector binomial weights.
        let s = JetSpace::new(&["t", "x"], &["u", "f"]);
        let f = Expression::atom(Atom::jet(1, MultiIndex::zero(2)));
        let u = s.jet("u", &[]);
        let q = u.clone() * s.jet("u", &["t", "x"]);
        let adj = adjoint_frechet(&s, &[q.clone()], &[f.clone()]).unwrap();
        let mut rhs = Expression::zero();
        for j in MultiIndex(vec![2, 2]).sub_indices() {
            let he = higher_euler(&s, &q, 0, &j).unwrap();
            if he.is_zero() {
                continue;
            }
            let df = s.iterated_total_derivative(&f, &j).unwrap();
            let signed = if j.order() % 2 == 0 { he } else { -he };
            rhs = rhs + df * signed;
        }
        assert!((adj[0].clone() - rhs).is_zero());
    }

    #[test]
    fn helmholtz_classification() {
        let s = wave_space();
        let u = s.jet("u", &[]);
        // u_tt - u_xx + m(u) is variational.
        let f_var = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + s.func("m", 0, u.clone());
        assert!(is_variational(&s, &[f_var]).unwrap());
        // b = u breaks it; the residual is 2 u w_t + u_t w.
        let f_bad = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + u.clone() * s.jet("u", &["t"]);
        let (residual, ext) = helmholtz_residual(&s, &[f_bad.clone()]).unwrap();
        assert!(!residual[0].is_zero());
        let w = Expression::atom(Atom::jet(1, MultiIndex::zero(2)));
        let wt = ext.total_derivative(&w, 0).unwrap();
        let expected = u.clone() * wt * Expression::int(2) + ext.jet("u", &["t"]) * w;
        assert!((residual[0].clone() - expected).is_zero());
        assert!(!is_variational(&s, &[f_bad]).unwrap());
        // Odd-order time derivative.
        let f_heat = s.jet("u", &["t"]) - s.jet("u", &["x", "x"]);
        assert!(!is_variational(&s, &[f_heat]).unwrap());
    }

    #[test]
    fn variational_implies_selfadjoint_direction() {
        let s = JetSpace::new(&["t", "x"], &["u", "w"]);
        let w = vec![
            Expression::atom(Atom::jet(1, MultiIndex::zero(2))),
            Expression::zero(),
        ];
        let w_adj = vec![Expression::atom(Atom::jet(1, MultiIndex::zero(2)))];
        let f = s.jet("u", &["t", "t"]) - s.jet("u", &["x", "x"])
            + s.jet("u", &[]).pow(3);
        let lin = frechet(&s, &[f.clone()], &w).unwrap();
        let adj = adjoint_frechet(&s, &[f], &w_adj).unwrap();
        assert!((lin[0].clone() - adj[0].clone()).is_zero());
    }

    #[test]
    fn total_divergence_detection() {
        let s = wave_space();
        let u = s.jet("u", &[]);
        let f = s
            .total_derivative(&(u.clone() * s.jet("u", &["t"])), 0)
            .unwrap()
            + s.total_derivative(&(u.clone().pow(2) * s.jet("u", &["x"])), 1)
                .unwrap();
        assert!(is_total_divergence(&s, &f).unwrap());
        assert!(!is_total_divergence(&s, &s.jet("u", &["t"]).pow(2)).unwrap());
        assert!(is_total_divergence(&s, &Expression::zero()).unwrap());
    }

    #[test]
    fn euler_product_rule_random() {
        let s = wave_space();
        let mut rng = Prng::new(13);
        for _ in 0..30 {
            let f = random_expression(&s, &mut rng, 2, 2);
            let g = random_expression(&s, &mut rng, 2, 2);
            let lhs = euler(&s, &(f.clone() * g.clone()), 0).unwrap();
            let a = adjoint_frechet(&s, &[f.clone()], &[g.clone()]).unwrap();
            let b = adjoint_frechet(&s, &[g], &[f]).unwrap();
            assert!((lhs - a[0].clone() - b[0].clone()).is_zero());
        }
    }
}
