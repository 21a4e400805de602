//! Bundled fixtures reproducing the wave-family classification results,
//! plus small variational and evolution systems, and seeded random identity
//! probes.
//!
//! Fixture files are written in the session DSL; their `expect` lines carry
//! the command, the expected verdict or printed result, and a provenance
//! marker (`source=literature|identity|derived`).

use crate::cli::execute_command;
use crate::cli::parse::{parse_session, Expectation, Session};
use crate::expr::{Atom, Expression, MultiIndex};
use crate::jet::JetSpace;
use crate::variational::{adjoint_frechet, euler, frechet, pair_boundary_current};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("fixture `{0}` is corrupt: {1}")]
    FixtureCorrupt(String, String),
}

/// A bundled fixture: a named session source with an expectations block.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
}

const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "w1-quadratic",
        source: include_str!("../fixtures/w1_quadratic.claw"),
    },
    Fixture {
        name: "w-damped",
        source: include_str!("../fixtures/w_damped.claw"),
    },
    Fixture {
        name: "w-row2",
        source: include_str!("../fixtures/w_row2.claw"),
    },
    Fixture {
        name: "w-row3",
        source: include_str!("../fixtures/w_row3.claw"),
    },
    Fixture {
        name: "variational-cubic",
        source: include_str!("../fixtures/variational_cubic.claw"),
    },
    Fixture {
        name: "w-general",
        source: include_str!("../fixtures/w_general.claw"),
    },
    Fixture {
        name: "heat",
        source: include_str!("../fixtures/heat.claw"),
    },
    Fixture {
        name: "first-order-advisory",
        source: include_str!("../fixtures/first_order_advisory.claw"),
    },
];

/// Loads and validates the bundled fixtures: each must parse and every
/// expectation must carry a provenance marker.
pub fn load_fixtures() -> Result<Vec<(Fixture, Session)>, CorpusError> {
    let mut out = Vec::new();
    for f in FIXTURES {
        let session = parse_session(f.source, 8)
            .map_err(|e| CorpusError::FixtureCorrupt(f.name.to_string(), e.to_string()))?;
        for exp in &session.expectations {
            if !exp.fields.contains_key("source") {
                return Err(CorpusError::FixtureCorrupt(
                    f.name.to_string(),
                    format!("expectation `{}` lacks a source marker", exp.command),
                ));
            }
        }
        out.push((f.clone(), session));
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct CorpusSummary {
    pub passed: usize,
    pub failed: usize,
    pub probes_passed: usize,
    pub probes_failed: usize,
    pub lines: Vec<String>,
}

/// Runs every fixture expectation and the seeded identity probes.
pub fn run_corpus(seed: u64) -> CorpusSummary {
    let mut summary = CorpusSummary::default();
    let fixtures = match load_fixtures() {
        Ok(f) => f,
        Err(e) => {
            summary.failed += 1;
            summary.lines.push(format!("FAIL {e}"));
            return summary;
        }
    };
    for (fixture, session) in &fixtures {
        let advisory = fixture.name.ends_with("advisory");
        for exp in &session.expectations {
            match check_expectation(session, exp) {
                Ok(()) => {
                    summary.passed += 1;
                    summary
                        .lines
                        .push(format!("PASS {}: {}", fixture.name, describe(exp)));
                }
                Err(msg) if advisory => {
                    // Advisory fixtures run but do not gate.
                    summary.passed += 1;
                    summary.lines.push(format!(
                        "ADVISORY {}: {} ({msg})",
                        fixture.name,
                        describe(exp)
                    ));
                }
                Err(msg) => {
                    summary.failed += 1;
                    summary.lines.push(format!(
                        "FAIL {}: {} ({msg})",
                        fixture.name,
                        describe(exp)
                    ));
                }
            }
        }
    }
    run_probes(seed, &mut summary);
    summary
}

fn describe(exp: &Expectation) -> String {
    let mut parts = vec![exp.command.clone()];
    for (k, v) in &exp.fields {
        if k == "source" || k == "note" {
            continue;
        }
        parts.push(format!("{k}={v}"));
    }
    parts.join(" ")
}

/// Primary result field per command, used when an expectation pins a
/// printed value.
fn primary_field(command: &str) -> Option<&'static str> {
    match command {
        "pair-multiplier" | "extract-multiplier" | "multiplier-check" => Some("multiplier"),
        "integrate" => Some("current"),
        _ => None,
    }
}

fn check_expectation(session: &Session, exp: &Expectation) -> Result<(), String> {
    let mut params = exp.fields.clone();
    params.remove("verdict");
    params.remove("result");
    params.remove("count");
    params.remove("source");
    params.remove("note");
    let report = execute_command(session, &exp.command, &params)?;
    if let Some(expected) = exp.fields.get("verdict") {
        if &report.verdict != expected {
            return Err(format!(
                "expected verdict {expected}, got {}",
                report.verdict
            ));
        }
    }
    if let Some(expected) = exp.fields.get("count") {
        let got = report
            .result
            .get("equations")
            .cloned()
            .unwrap_or_default();
        if &got != expected {
            return Err(format!("expected {expected} equations, got {got}"));
        }
    }
    if let Some(expected) = exp.fields.get("result") {
        let field = primary_field(&exp.command)
            .ok_or_else(|| format!("`{}` has no primary result field", exp.command))?;
        let got = report
            .result
            .get(field)
            .cloned()
            .unwrap_or_default();
        // Reproduction is exact: the printed value must match the
        // canonical printing of the expected expression tuple.
        let canonical: String = match session.parse_tuple(expected) {
            Ok(parts) => parts
                .iter()
                .map(|e| e.display(&session.space).to_string())
                .collect::<Vec<_>>()
                .join(", "),
            Err(_) => expected.clone(),
        };
        if got != canonical {
            return Err(format!("expected `{canonical}`, got `{got}`"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Seeded identity probes
// ---------------------------------------------------------------------------

/// Deterministic splitmix64 stream; identical output on every platform for
/// a fixed seed, which keeps structured corpus reports byte-identical.
pub struct Prng(u64);

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

/// Random polynomial over jet coordinates of `u` (and `w`, `v` when the
/// space declares them) up to the given order, with small integer
/// coefficients. Shared by the probes and the test suite.
pub fn random_expression(
    space: &JetSpace,
    rng: &mut Prng,
    max_order: u32,
    terms: usize,
) -> Expression {
    random_polynomial(space, rng, max_order, terms, 2)
}

/// Degree-bounded variant of [`random_expression`].
pub fn random_polynomial(
    space: &JetSpace,
    rng: &mut Prng,
    max_order: u32,
    terms: usize,
    max_degree: u64,
) -> Expression {
    let n = space.n_indep();
    let mut pool: Vec<Atom> = Vec::new();
    for i in 0..n {
        pool.push(Atom::Indep(i as u16));
    }
    for dep in 0..space.n_dep() {
        let mut frontier = vec![MultiIndex::zero(n)];
        pool.push(Atom::jet(dep as u16, MultiIndex::zero(n)));
        for _ in 0..max_order {
            let mut next = Vec::new();
            for f in &frontier {
                for i in 0..n {
                    next.push(f.raised(i));
                }
            }
            for idx in &next {
                pool.push(Atom::jet(dep as u16, idx.clone()));
            }
            frontier = next;
        }
    }
    let mut acc = Expression::zero();
    for _ in 0..terms {
        let mut term = Expression::int(rng.int_in(-3, 3));
        if term.is_zero() {
            term = Expression::one();
        }
        let deg = 1 + rng.below(max_degree);
        for _ in 0..deg {
            let atom = pool[rng.below(pool.len() as u64) as usize].clone();
            term = term * Expression::atom(atom);
        }
        acc = acc + term;
    }
    acc
}

fn run_probes(seed: u64, summary: &mut CorpusSummary) {
    let mut rng = Prng::new(seed);
    let space = JetSpace::new(&["t", "x"], &["u", "w", "v"]);
    let zero = Expression::zero;

    let probe = |name: &str, ok: bool, summary: &mut CorpusSummary| {
        if ok {
            summary.probes_passed += 1;
            summary.lines.push(format!("PASS probe {name}"));
        } else {
            summary.probes_failed += 1;
            summary.lines.push(format!("FAIL probe {name}"));
        }
    };

    // Pairing identity: v.(df/dw) - w.(df*/dv) - Div Psi == 0.
    for k in 0..4 {
        let f = random_expression(&space, &mut rng, 2, 3);
        let w = vec![
            random_expression(&space, &mut rng, 1, 2),
            zero(),
            zero(),
        ];
        let v = vec![random_expression(&space, &mut rng, 1, 2)];
        let ok = (|| -> Result<bool, String> {
            let lin = frechet(&space, &[f.clone()], &w).map_err(|e| e.to_string())?;
            let adj = adjoint_frechet(&space, &[f.clone()], &v).map_err(|e| e.to_string())?;
            let psi =
                pair_boundary_current(&space, &[f.clone()], &w, &v).map_err(|e| e.to_string())?;
            let div = psi.divergence(&space).map_err(|e| e.to_string())?;
            let mut lhs = v[0].clone() * lin[0].clone() - div;
            for (alpha, w_alpha) in w.iter().enumerate() {
                lhs = lhs - w_alpha.clone() * adj[alpha].clone();
            }
            Ok(lhs.is_zero())
        })()
        .unwrap_or(false);
        probe(&format!("pair-identity-{k}"), ok, summary);
    }

    // Euler kernel: E(D_t A + D_x B) == 0.
    for k in 0..4 {
        let a = random_expression(&space, &mut rng, 2, 2);
        let b = random_expression(&space, &mut rng, 2, 2);
        let ok = (|| -> Result<bool, String> {
            let div = space.total_derivative(&a, 0).map_err(|e| e.to_string())?
                + space.total_derivative(&b, 1).map_err(|e| e.to_string())?;
            for alpha in 0..space.n_dep() {
                if !euler(&space, &div, alpha as u16)
                    .map_err(|e| e.to_string())?
                    .is_zero()
                {
                    return Ok(false);
                }
            }
            Ok(true)
        })()
        .unwrap_or(false);
        probe(&format!("euler-kernel-{k}"), ok, summary);
    }

    // Commutativity of total derivatives.
    for k in 0..4 {
        let e = random_expression(&space, &mut rng, 2, 3);
        let ok = (|| -> Result<bool, String> {
            let tx = space
                .total_derivative(&space.total_derivative(&e, 0).map_err(|e| e.to_string())?, 1)
                .map_err(|e| e.to_string())?;
            let xt = space
                .total_derivative(&space.total_derivative(&e, 1).map_err(|e| e.to_string())?, 0)
                .map_err(|e| e.to_string())?;
            Ok((tx - xt).is_zero())
        })()
        .unwrap_or(false);
        probe(&format!("commutator-{k}"), ok, summary);
    }

}
