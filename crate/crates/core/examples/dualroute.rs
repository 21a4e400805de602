// Scratch: dual-route check of the first-order Helmholtz condition.
// Route A: slack decomposition of the full multiplier equation.
// Route B: R_Q^0 from the adjoint alone, plus the Euler operator of Q,
// canonicalized on shell (the zeroth condition of the split system).

use jetlaw::conslaw::*;
use jetlaw::desystem::DESystem;
use jetlaw::expr::{Atom, MultiIndex};
use jetlaw::jet::JetSpace;
use jetlaw::variational::{adjoint_frechet, euler};

fn main() {
    let space = JetSpace::new(&["t", "x"], &["u"]).with_funcs(&["b", "c", "m"]);
    let u = space.jet("u", &[]);
    let args = vec![
        Atom::Indep(0),
        Atom::Indep(1),
        space.jet_atom("u", &[]),
        space.jet_atom("u", &["t"]),
        space.jet_atom("u", &["x"]),
    ];
    let space = space.with_unknown("Q", args);
    let f = space.jet("u", &["t", "t"]) - space.jet("u", &["x", "x"])
        + space.func("b", 0, u.clone()) * space.jet("u", &["t"])
        + space.func("c", 0, u.clone()) * space.jet("u", &["x"])
        + space.func("m", 0, u.clone());
    let lead = match space.jet_atom("u", &["t", "t"]) {
        Atom::Jet { dep, index } => (dep, index),
        _ => unreachable!(),
    };
    let sys = DESystem::new(space.clone(), vec![("W".into(), f, lead.0, lead.1)]).unwrap();

    let ds_adj = generate_determining_system(&sys, "Q", DeterminingMode::AdjointSymmetry).unwrap();
    let ds = generate_determining_system(&sys, "Q", DeterminingMode::Multiplier).unwrap();
    let route_a = ds.helmholtz[0].clone();

    // Route B: decompose the adjoint alone for R_Q^0; Euler operator of Q.
    let q = space.unknown_expr("Q");
    let adj = adjoint_frechet(&space, &sys.exprs(), &[q.clone()]).unwrap();
    let dec = sys.decompose_off_shell(&adj).unwrap();
    let r0 = dec.operator.coeff(0, 0, &MultiIndex::zero(2));
    let eu = euler(&space, &q, 0).unwrap();
    let route_b = sys.reduce_on_shell(&(r0 + eu)).unwrap();

    // Mutual reduction of the two routes modulo the adjoint-symmetry system.
    let mut basis_ab = ds_adj.equations.clone();
    basis_ab.push(route_b.clone());
    let rem_a = reduce_modulo_linear_system(&route_a, &basis_ab);
    let mut basis_ba = ds_adj.equations.clone();
    basis_ba.push(route_a.clone());
    let rem_b = reduce_modulo_linear_system(&route_b, &basis_ba);
    println!("route A ≡ route B (mod adjsym): {} / {}", rem_a.is_zero(), rem_b.is_zero());
    println!("route A: {}", route_a.display(&space));
    println!("route B: {}", route_b.display(&space));
}
