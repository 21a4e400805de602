// Scratch: first-order multiplier ansatz split on the symbolic wave family.

use jetlaw::conslaw::*;
use jetlaw::desystem::DESystem;
use jetlaw::expr::{Atom, Expression, MultiIndex};
use jetlaw::jet::JetSpace;

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
    println!("adjoint-symmetry split ({}):", ds_adj.equations.len());
    for e in &ds_adj.equations {
        println!("  {}", e.display(&space));
    }
    let ds = generate_determining_system(&sys, "Q", DeterminingMode::Multiplier).unwrap();
    println!("helmholtz conditions ({}):", ds.helmholtz.len());
    for e in &ds.helmholtz {
        println!("  {}", e.display(&space));
    }

    // Paper display (as printed):
    //   2 Q_u - b Q_p + u_t Q_{u p} - u_x Q_{u r} - (b u_t + c u_x + m) Q_{pp} = 0
    let part = |counts: [u8; 5]| -> Expression {
        Expression::atom(Atom::unknown(
            "Q",
            space.unknown_signature("Q").unwrap().as_ref().clone(),
            counts.to_vec(),
        ))
    };
    let b = space.func("b", 0, u.clone());
    let c = space.func("c", 0, u.clone());
    let m = space.func("m", 0, u.clone());
    let ut = space.jet("u", &["t"]);
    let ux = space.jet("u", &["x"]);
    let printed = part([0, 0, 1, 0, 0]).scaled(&jetlaw::expr::rat(2))
        - b.clone() * part([0, 0, 0, 1, 0])
        + ut.clone() * part([0, 0, 1, 1, 0])
        - ux.clone() * part([0, 0, 1, 0, 1])
        - (b.clone() * ut.clone() + c.clone() * ux.clone() + m.clone()) * part([0, 0, 0, 2, 0]);

    // Equivalence mod the adjoint-symmetry system, both directions.
    for (label, h) in [("generated", ds.helmholtz[0].clone()), ("printed", printed.clone())] {
        let other = if label == "generated" { &printed } else { &ds.helmholtz[0] };
        let mut basis = ds_adj.equations.clone();
        basis.push(other.clone());
        let rem = reduce_modulo_linear_system(&h, &basis);
        println!("{label} reduces to zero mod (adjsym + other): {}", rem.is_zero());
        if !rem.is_zero() {
            println!("  remainder: {}", rem.display(&space));
        }
    }

    // Independent oracle on the drift witness: F = u_tt - u_xx + c0 u_x,
    // Q = exp(-c0 x) u_x is an adjoint-symmetry but not a multiplier.
    let space2 = JetSpace::new(&["t", "x"], &["u"]).with_params(&["c0"]);
    let c0 = space2.param("c0");
    let f2 = space2.jet("u", &["t", "t"]) - space2.jet("u", &["x", "x"])
        + c0.clone() * space2.jet("u", &["x"]);
    let lead2 = match space2.jet_atom("u", &["t", "t"]) {
        Atom::Jet { dep, index } => (dep, index),
        _ => unreachable!(),
    };
    let sys2 = DESystem::new(space2.clone(), vec![("D".into(), f2.clone(), lead2.0, lead2.1)]).unwrap();
    let q2 = vec![space2.exp(&(-c0.clone() * space2.indep("x"))).unwrap() * space2.jet("u", &["x"])];
    println!(
        "drift witness adjoint-symmetry: {}",
        is_adjoint_symmetry(&sys2, &q2).unwrap()
    );
    let (adjr, helm) = multiplier_residuals(&sys2, &q2).unwrap();
    println!(
        "drift witness: adjsym residual zero: {}, helmholtz residuals: {:?}",
        adjr.iter().all(|r| r.is_zero()),
        helm.iter().map(|h| format!("{}", h.display(&space2))).collect::<Vec<_>>()
    );
    let oracle = euler_of_characteristic_product(&sys2, &q2).unwrap();
    println!("oracle E_u(QF) = {}", oracle[0].display(&space2));
    // Expected: c0 * exp(-c0 x) * F.
    let expected = c0.clone() * space2.exp(&(-c0.clone() * space2.indep("x"))).unwrap() * f2.clone();
    println!("oracle equals c0*exp(-c0 x)*F: {}", oracle[0].equivalent(&expected));
    let _ = MultiIndex::zero(2);
}
