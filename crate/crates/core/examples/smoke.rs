// Scratch driver used while bringing the engine up; exercises the wave
// family end to end and prints what it finds.

use jetlaw::conslaw::*;
use jetlaw::desystem::DESystem;
use jetlaw::expr::{Atom, Expression, MultiIndex};
use jetlaw::ibragimov::*;
use jetlaw::jet::JetSpace;
use jetlaw::variational::*;

fn main() {
    // Wave family: F = u_tt - u_xx + b(u) u_t + c(u) u_x + m(u), symbolic b,c,m.
    let space = JetSpace::new(&["t", "x"], &["u"]).with_funcs(&["b", "c", "m"]);
    let u = space.jet("u", &[]);
    let f_wave = space.jet("u", &["t", "t"]) - space.jet("u", &["x", "x"])
        + space.func("b", 0, u.clone()) * space.jet("u", &["t"])
        + space.func("c", 0, u.clone()) * space.jet("u", &["x"])
        + space.func("m", 0, u.clone());
    let lead = space.jet_atom("u", &["t", "t"]);
    let (lead_dep, lead_index) = match &lead {
        Atom::Jet { dep, index } => (*dep, index.clone()),
        _ => unreachable!(),
    };
    let sys = DESystem::new(
        space.clone(),
        vec![("W".to_string(), f_wave.clone(), lead_dep, lead_index)],
    )
    .unwrap();

    // Adjoint of the linearization along a fresh variable v.
    let (ext_space, ids) = space.extended_with_deps(&["v"]);
    let v = Expression::atom(Atom::jet(ids[0], MultiIndex::zero(2)));
    let fstar = adjoint_frechet(&ext_space, &[f_wave.clone()], &[v.clone()]).unwrap();
    println!("F* = {}", fstar[0].display(&ext_space));

    // P = -u_t is a symmetry; R_P should be -D_t.
    let p = vec![-space.jet("u", &["t"])];
    println!("symmetry residual(P=-u_t): {:?}", symmetry_residual(&sys, &p).unwrap()[0].is_zero());
    let rp = extract_symmetry_operator(&sys, &p).unwrap();
    println!("R_P entries: {:?}", rp.entries.iter().map(|((r,c),cell)| {
        cell.iter().map(|(i, e)| format!("({r},{c})[{:?}] = {}", i.0, e.display(&space))).collect::<Vec<_>>()
    }).collect::<Vec<_>>());

    // W1 instance: b=u, c=u, m=u^2, Q = exp(t+x).
    let f_w1 = space.jet("u", &["t", "t"]) - space.jet("u", &["x", "x"])
        + u.clone() * space.jet("u", &["t"])
        + u.clone() * space.jet("u", &["x"])
        + u.clone() * u.clone();
    let sys1 = DESystem::new(
        space.clone(),
        vec![(
            "W1".to_string(),
            f_w1.clone(),
            lead_dep,
            space_lead_index(&space),
        )],
    )
    .unwrap();
    let q = vec![space
        .exp(&(space.indep("t") + space.indep("x")))
        .unwrap()];
    println!(
        "W1 adjoint-symmetry residual zero: {}",
        adjoint_symmetry_residual(&sys1, &q).unwrap()[0].is_zero()
    );
    let qpair = pair_multiplier(&sys1, &p, &q).unwrap();
    println!("pair multiplier = {}", qpair.components[0].display(&space));
    println!(
        "trivial pair: {}",
        is_trivial_pair(&sys1, &p, &q).unwrap()
    );
    let cur = pair_conserved_current(&sys1, &p, &q).unwrap();
    println!(
        "pair current verified: {} | C^t = {} | C^x = {}",
        cur.verified,
        cur.components.0[0].display(&space),
        cur.components.0[1].display(&space)
    );
    let extracted = multiplier_from_current(&sys1, &cur.components).unwrap();
    println!("extracted multiplier = {}", extracted.components[0].display(&space));

    // Extended system and equivalence.
    let ext = build_extended_system(&sys1).unwrap();
    println!("L = {}", ext.lagrangian.display(&ext.space));
    println!("F*_ext = {}", ext.adjoint_equations[0].display(&ext.space));
    let inv = variational_invariance_check(&ext, &p).unwrap();
    println!("variational invariance residual zero: {}", inv.is_zero());
    println!(
        "equivalence Phi|_(v=Q) == Psi: {}",
        equivalence_check(&sys1, &p, &q).unwrap()
    );

    // Helmholtz: u_tt - u_xx + m(u) is variational.
    let f_var = space.jet("u", &["t", "t"]) - space.jet("u", &["x", "x"])
        + space.func("m", 0, u.clone());
    println!(
        "u_tt - u_xx + m(u) variational: {}",
        is_variational(&space, &[f_var]).unwrap()
    );
    let f_bad = space.jet("u", &["t", "t"]) - space.jet("u", &["x", "x"])
        + u.clone() * space.jet("u", &["t"]);
    println!(
        "b=u wave variational: {}",
        is_variational(&space, &[f_bad]).unwrap()
    );

    // Determining system for Q(t,x,u) on the symbolic wave family.
    let space_q = space.clone().with_unknown(
        "Q",
        vec![
            Atom::Indep(0),
            Atom::Indep(1),
            space.jet_atom("u", &[]),
        ],
    );
    let sys_q = DESystem::new(
        space_q.clone(),
        vec![(
            "W".to_string(),
            {
                let u = space_q.jet("u", &[]);
                space_q.jet("u", &["t", "t"]) - space_q.jet("u", &["x", "x"])
                    + space_q.func("b", 0, u.clone()) * space_q.jet("u", &["t"])
                    + space_q.func("c", 0, u.clone()) * space_q.jet("u", &["x"])
                    + space_q.func("m", 0, u.clone())
            },
            lead_dep,
            space_lead_index(&space_q),
        )],
    )
    .unwrap();
    let ds = generate_determining_system(&sys_q, "Q", DeterminingMode::AdjointSymmetry).unwrap();
    println!("determining system ({} equations):", ds.equations.len());
    for e in &ds.equations {
        println!("  {}", e.display(&space_q));
    }
    let dsm = generate_determining_system(&sys_q, "Q", DeterminingMode::Multiplier).unwrap();
    println!("multiplier mode appends {} helmholtz conditions:", dsm.helmholtz.len());
    for e in &dsm.helmholtz {
        println!("  {}", e.display(&space_q));
    }
}

fn space_lead_index(space: &JetSpace) -> MultiIndex {
    match space.jet_atom("u", &["t", "t"]) {
        Atom::Jet { index, .. } => index,
        _ => unreachable!(),
    }
}
