//! Command-line interface: session loading, subcommand dispatch, and
//! machine-readable reports.
//!
//! Every subcommand maps 1:1 onto a library operation. Exit codes: `0` when
//! the command's positive verdict holds (verified / trivial / pass), `1`
//! when it is falsified, `2` on errors.

pub mod parse;

use crate::conslaw::{
    adjoint_symmetry_residual, generate_determining_system, integrate_characteristic,
    is_trivial_pair, multiplier_from_current, multiplier_residuals, pair_conserved_current,
    pair_multiplier, symmetry_residual, DeterminingMode, Multiplier, MultiplierProvenance,
};
use crate::desystem::DESystem;
use crate::expr::{Expression, NameResolver};
use crate::ibragimov::{
    build_extended_system, equivalence_check, extend_symmetry, noether_current,
    self_adjointness_check, variational_invariance_check, CurrentCorrection,
};
use crate::jet::characteristic_from_point_symmetry;
use crate::variational::CurrentVector;
use clap::{Parser, Subcommand, ValueEnum};
use parse::Session;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Parser)]
#[command(
    name = "jetlaw",
    version,
    about = "Exact conservation-law engine for DE systems"
)]
struct Args {
    /// Session file in the declaration DSL.
    #[arg(long, global = true)]
    input: Option<std::path::PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Maximum tracked jet order.
    #[arg(long, global = true, default_value_t = 8)]
    max_order: u32,
    /// Seed for the randomized identity probes of `corpus`.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    AdjointSymmetry,
    Multiplier,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorrectionArg {
    None,
    XiL,
}

#[derive(Subcommand)]
enum Command {
    /// Check the symmetry determining equation for a characteristic.
    CheckSymmetry {
        #[arg(long)]
        symmetry: String,
    },
    /// Check the adjoint-symmetry determining equation (equivalently,
    /// nonlinear self-adjointness under v = Q).
    CheckAdjointSymmetry {
        #[arg(long)]
        adjoint: String,
    },
    /// Conserved current from a symmetry/adjoint-symmetry pair.
    PairCurrent {
        #[arg(long)]
        symmetry: String,
        #[arg(long)]
        adjoint: String,
    },
    /// Multiplier of the pair current.
    PairMultiplier {
        #[arg(long)]
        symmetry: String,
        #[arg(long)]
        adjoint: String,
    },
    /// Local triviality of the pair current.
    Triviality {
        #[arg(long)]
        symmetry: String,
        #[arg(long)]
        adjoint: String,
    },
    /// Full multiplier determining system on a candidate.
    MultiplierCheck {
        #[arg(long)]
        candidate: String,
    },
    /// Extract the multiplier of a conserved current.
    ExtractMultiplier {
        #[arg(long)]
        current: String,
    },
    /// Generate the determining system for a declared unknown ansatz.
    DeterminingSystem {
        #[arg(long)]
        unknown: String,
        #[arg(long, value_enum, default_value_t = ModeArg::AdjointSymmetry)]
        mode: ModeArg,
    },
    /// Integrate the characteristic equation of a multiplier.
    Integrate {
        #[arg(long)]
        multiplier: String,
    },
    /// Extended-Lagrangian construction for a symmetry.
    Ibragimov {
        #[arg(long)]
        symmetry: Option<String>,
        /// Point-form generator: comma-separated xi components then eta
        /// components.
        #[arg(long)]
        point: Option<String>,
        #[arg(long, value_enum, default_value_t = CorrectionArg::None)]
        correction: CorrectionArg,
    },
    /// Exact equality of the extended-Lagrangian current under v = Q with
    /// the pair-formula current.
    Equivalence {
        #[arg(long)]
        symmetry: String,
        #[arg(long)]
        adjoint: String,
    },
    /// Run the bundled fixtures and seeded identity probes.
    Corpus,
}

/// Structured report emitted by every command.
#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub result: BTreeMap<String, String>,
    pub residuals: Vec<String>,
    pub verdict: String,
}

impl Report {
    fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            result: BTreeMap::new(),
            residuals: Vec::new(),
            verdict: String::new(),
        }
    }

    fn human(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "input {k}: {v}");
        }
        for (k, v) in &self.result {
            let _ = writeln!(s, "{k}: {v}");
        }
        for r in &self.residuals {
            let _ = writeln!(s, "residual: {r}");
        }
        let _ = writeln!(s, "verdict: {}", self.verdict);
        s
    }
}

/// Verdicts that exit 0.
const POSITIVE: &[&str] = &[
    "verified",
    "trivial",
    "pass",
    "extracted",
    "generated",
    "equivalent",
];

pub fn run() -> i32 {
    let args = Args::parse();
    match dispatch(&args) {
        Ok(report) => {
            emit(&report, args.format);
            if POSITIVE.contains(&report.verdict.as_str()) {
                0
            } else {
                1
            }
        }
        Err(msg) => {
            let mut report = Report::new("error");
            report.verdict = "error".to_string();
            report.result.insert("message".to_string(), msg);
            emit(&report, args.format);
            2
        }
    }
}

fn emit(report: &Report, format: Format) {
    match format {
        Format::Human => print!("{}", report.human()),
        Format::Structured => {
            println!(
                "{}",
                serde_json::to_string_pretty(report).expect("report serialization")
            );
        }
    }
}

fn load_session(args: &Args) -> Result<Session, String> {
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| "this command requires --input <file>".to_string())?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse::parse_session(&text, args.max_order).map_err(|e| e.to_string())
}

fn need_system(session: &Session) -> Result<&DESystem, String> {
    session
        .system
        .as_ref()
        .ok_or_else(|| "the session declares no equations".to_string())
}

fn parse_components(
    session: &Session,
    text: &str,
    expected: usize,
    what: &str,
) -> Result<Vec<Expression>, String> {
    let comps = session.parse_tuple(text).map_err(|e| e.to_string())?;
    if comps.len() != expected {
        return Err(format!(
            "{what} must have {expected} component(s), got {}",
            comps.len()
        ));
    }
    Ok(comps)
}

fn render_all(session: &Session, es: &[Expression]) -> String {
    es.iter()
        .map(|e| e.display(&session.space).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn dispatch(args: &Args) -> Result<Report, String> {
    if let Command::Corpus = &args.command {
        let summary = crate::corpus::run_corpus(args.seed);
        let mut report = Report::new("corpus");
        report
            .inputs
            .insert("seed".to_string(), args.seed.to_string());
        report.result.insert(
            "fixtures".to_string(),
            format!("{} passed, {} failed", summary.passed, summary.failed),
        );
        report.result.insert(
            "probes".to_string(),
            format!(
                "{} passed, {} failed",
                summary.probes_passed, summary.probes_failed
            ),
        );
        for line in &summary.lines {
            report.residuals.push(line.clone());
        }
        report.verdict = if summary.failed == 0 && summary.probes_failed == 0 {
            "pass".to_string()
        } else {
            "fail".to_string()
        };
        return Ok(report);
    }

    let session = load_session(args)?;
    let (name, params) = args.command.to_invocation();
    execute_command(&session, &name, &params)
}

impl Command {
    fn to_invocation(&self) -> (String, BTreeMap<String, String>) {
        let mut m = BTreeMap::new();
        let name = match self {
            Command::CheckSymmetry { symmetry } => {
                m.insert("symmetry".into(), symmetry.clone());
                "check-symmetry"
            }
            Command::CheckAdjointSymmetry { adjoint } => {
                m.insert("adjoint".into(), adjoint.clone());
                "check-adjoint-symmetry"
            }
            Command::PairCurrent { symmetry, adjoint } => {
                m.insert("symmetry".into(), symmetry.clone());
                m.insert("adjoint".into(), adjoint.clone());
                "pair-current"
            }
            Command::PairMultiplier { symmetry, adjoint } => {
                m.insert("symmetry".into(), symmetry.clone());
                m.insert("adjoint".into(), adjoint.clone());
                "pair-multiplier"
            }
            Command::Triviality { symmetry, adjoint } => {
                m.insert("symmetry".into(), symmetry.clone());
                m.insert("adjoint".into(), adjoint.clone());
                "triviality"
            }
            Command::MultiplierCheck { candidate } => {
                m.insert("candidate".into(), candidate.clone());
                "multiplier-check"
            }
            Command::ExtractMultiplier { current } => {
                m.insert("current".into(), current.clone());
                "extract-multiplier"
            }
            Command::DeterminingSystem { unknown, mode } => {
                m.insert("unknown".into(), unknown.clone());
                m.insert(
                    "mode".into(),
                    match mode {
                        ModeArg::AdjointSymmetry => "adjoint-symmetry".to_string(),
                        ModeArg::Multiplier => "multiplier".to_string(),
                    },
                );
                "determining-system"
            }
            Command::Integrate { multiplier } => {
                m.insert("multiplier".into(), multiplier.clone());
                "integrate"
            }
            Command::Ibragimov {
                symmetry,
                point,
                correction,
            } => {
                if let Some(s) = symmetry {
                    m.insert("symmetry".into(), s.clone());
                }
                if let Some(p) = point {
                    m.insert("point".into(), p.clone());
                }
                m.insert(
                    "correction".into(),
                    match correction {
                        CorrectionArg::None => "none".to_string(),
                        CorrectionArg::XiL => "xi-l".to_string(),
                    },
                );
                "ibragimov"
            }
            Command::Equivalence { symmetry, adjoint } => {
                m.insert("symmetry".into(), symmetry.clone());
                m.insert("adjoint".into(), adjoint.clone());
                "equivalence"
            }
            Command::Corpus => "corpus",
        };
        (name.to_string(), m)
    }
}

fn param<'a>(params: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, String> {
    params
        .get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| format!("missing parameter `{key}`"))
}

/// Executes one named command against a parsed session. Shared by the clap
/// front end and the corpus runner.
pub fn execute_command(
    session: &Session,
    command: &str,
    params: &BTreeMap<String, String>,
) -> Result<Report, String> {
    let sys = need_system(session)?;
    let m_eqs = sys.equations.len();
    let n_dep = session.space.n_dep();
    match command {
        "check-symmetry" => {
            let p = parse_components(
                session,
                param(params, "symmetry")?,
                n_dep,
                "symmetry characteristic",
            )?;
            let residuals = symmetry_residual(sys, &p).map_err(|e| e.to_string())?;
            let mut report = Report::new("check-symmetry");
            report
                .inputs
                .insert("symmetry".to_string(), render_all(session, &p));
            for r in &residuals {
                report.residuals.push(r.display(&session.space).to_string());
            }
            report.verdict = if residuals.iter().all(|r| r.is_zero()) {
                "verified".into()
            } else {
                "falsified".into()
            };
            Ok(report)
        }
        "check-adjoint-symmetry" => {
            let q = parse_components(session, param(params, "adjoint")?, m_eqs, "adjoint-symmetry")?;
            let residuals = adjoint_symmetry_residual(sys, &q).map_err(|e| e.to_string())?;
            let mut report = Report::new("check-adjoint-symmetry");
            report
                .inputs
                .insert("adjoint".to_string(), render_all(session, &q));
            for r in &residuals {
                report.residuals.push(r.display(&session.space).to_string());
            }
            let verified = residuals.iter().all(|r| r.is_zero());
            if verified {
                let (_, op) = self_adjointness_check(sys, &q).map_err(|e| e.to_string())?;
                if let Some(op) = op {
                    report
                        .result
                        .insert("lambda-operator".to_string(), render_operator(session, &op));
                }
            }
            report.verdict = if verified {
                "verified".into()
            } else {
                "falsified".into()
            };
            Ok(report)
        }
        "pair-current" => {
            let p = parse_components(
                session,
                param(params, "symmetry")?,
                n_dep,
                "symmetry characteristic",
            )?;
            let q = parse_components(session, param(params, "adjoint")?, m_eqs, "adjoint-symmetry")?;
            let current = pair_conserved_current(sys, &p, &q).map_err(|e| e.to_string())?;
            let mut report = Report::new("pair-current");
            report
                .inputs
                .insert("symmetry".to_string(), render_all(session, &p));
            report
                .inputs
                .insert("adjoint".to_string(), render_all(session, &q));
            insert_current(&mut report, session, &current.components);
            let trivial = is_trivial_pair(sys, &p, &q).map_err(|e| e.to_string())?;
            report
                .result
                .insert("locally-trivial".to_string(), trivial.to_string());
            if let Some(mult) = &current.multiplier {
                report.result.insert(
                    "multiplier".to_string(),
                    render_all(session, &mult.components),
                );
            }
            report.verdict = if current.verified {
                "verified".into()
            } else {
                "falsified".into()
            };
            Ok(report)
        }
        "pair-multiplier" => {
            let p = parse_components(
                session,
                param(params, "symmetry")?,
                n_dep,
                "symmetry characteristic",
            )?;
            let q = parse_components(session, param(params, "adjoint")?, m_eqs, "adjoint-symmetry")?;
            let mult = pair_multiplier(sys, &p, &q).map_err(|e| e.to_string())?;
            let mut report = Report::new("pair-multiplier");
            report
                .inputs
                .insert("symmetry".to_string(), render_all(session, &p));
            report
                .inputs
                .insert("adjoint".to_string(), render_all(session, &q));
            report.result.insert(
                "multiplier".to_string(),
                render_all(session, &mult.components),
            );
            report.verdict = "verified".into();
            Ok(report)
        }
        "triviality" => {
            let p = parse_components(
                session,
                param(params, "symmetry")?,
                n_dep,
                "symmetry characteristic",
            )?;
            let q = parse_components(session, param(params, "adjoint")?, m_eqs, "adjoint-symmetry")?;
            let trivial = is_trivial_pair(sys, &p, &q).map_err(|e| e.to_string())?;
            let mult = pair_multiplier(sys, &p, &q).map_err(|e| e.to_string())?;
            let mut report = Report::new("triviality");
            report
                .inputs
                .insert("symmetry".to_string(), render_all(session, &p));
            report
                .inputs
                .insert("adjoint".to_string(), render_all(session, &q));
            report.result.insert(
                "multiplier".to_string(),
                render_all(session, &mult.components),
            );
            report.verdict = if trivial {
                "trivial".into()
            } else {
                "nontrivial".into()
            };
            Ok(report)
        }
        "multiplier-check" => {
            let q = parse_components(
                session,
                param(params, "candidate")?,
                m_eqs,
                "multiplier candidate",
            )?;
            let (adjsym, helmholtz) = multiplier_residuals(sys, &q).map_err(|e| e.to_string())?;
            let mut report = Report::new("multiplier-check");
            report
                .inputs
                .insert("candidate".to_string(), render_all(session, &q));
            for r in &adjsym {
                report
                    .residuals
                    .push(format!("adjoint: {}", r.display(&session.space)));
            }
            for r in &helmholtz {
                report
                    .residuals
                    .push(format!("helmholtz: {}", r.display(&session.space)));
            }
            let pass =
                adjsym.iter().all(|r| r.is_zero()) && helmholtz.iter().all(|r| r.is_zero());
            report.verdict = if pass { "pass".into() } else { "fail".into() };
            Ok(report)
        }
        "extract-multiplier" => {
            let n = session.space.n_indep();
            let c = parse_components(session, param(params, "current")?, n, "current")?;
            let mult = multiplier_from_current(sys, &CurrentVector(c.clone()))
                .map_err(|e| e.to_string())?;
            let mut report = Report::new("extract-multiplier");
            report
                .inputs
                .insert("current".to_string(), render_all(session, &c));
            report.result.insert(
                "multiplier".to_string(),
                render_all(session, &mult.components),
            );
            report
                .result
                .insert("locally-trivial".to_string(), mult.is_zero().to_string());
            report.verdict = "extracted".into();
            Ok(report)
        }
        "determining-system" => {
            let unknown = param(params, "unknown")?;
            let mode = match params.get("mode").map(|s| s.as_str()).unwrap_or("adjoint-symmetry")
            {
                "multiplier" => DeterminingMode::Multiplier,
                _ => DeterminingMode::AdjointSymmetry,
            };
            let ds = generate_determining_system(sys, unknown, mode).map_err(|e| e.to_string())?;
            let mut report = Report::new("determining-system");
            report
                .inputs
                .insert("unknown".to_string(), unknown.to_string());
            report.inputs.insert(
                "mode".to_string(),
                match mode {
                    DeterminingMode::AdjointSymmetry => "adjoint-symmetry".to_string(),
                    DeterminingMode::Multiplier => "multiplier".to_string(),
                },
            );
            for e in &ds.equations {
                report.residuals.push(e.display(&session.space).to_string());
            }
            for e in &ds.helmholtz {
                report
                    .residuals
                    .push(format!("helmholtz: {}", e.display(&session.space)));
            }
            report.result.insert(
                "equations".to_string(),
                (ds.equations.len() + ds.helmholtz.len()).to_string(),
            );
            report.verdict = "generated".into();
            Ok(report)
        }
        "integrate" => {
            let q = parse_components(session, param(params, "multiplier")?, m_eqs, "multiplier")?;
            let mult = Multiplier::new(q.clone(), MultiplierProvenance::Given);
            let current = integrate_characteristic(sys, &mult).map_err(|e| e.to_string())?;
            let mut report = Report::new("integrate");
            report
                .inputs
                .insert("multiplier".to_string(), render_all(session, &q));
            insert_current(&mut report, session, &current.components);
            report.result.insert(
                "current".to_string(),
                current
                    .components
                    .0
                    .iter()
                    .map(|c| c.display(&session.space).to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            report.verdict = if current.verified {
                "verified".into()
            } else {
                "falsified".into()
            };
            Ok(report)
        }
        "ibragimov" => {
            let ext = build_extended_system(sys).map_err(|e| e.to_string())?;
            let generator = match (params.get("symmetry"), params.get("point")) {
                (Some(s), None) => crate::jet::GeneratorCharacteristic::from_components(
                    parse_components(session, s, n_dep, "symmetry characteristic")?,
                ),
                (None, Some(pt)) => {
                    let comps = session.parse_tuple(pt).map_err(|e| e.to_string())?;
                    let n = session.space.n_indep();
                    if comps.len() != n + n_dep {
                        return Err(format!(
                            "--point expects {} components (xi then eta)",
                            n + n_dep
                        ));
                    }
                    characteristic_from_point_symmetry(&session.space, &comps[..n], &comps[n..])
                        .map_err(|e| e.to_string())?
                }
                _ => return Err("give exactly one of --symmetry or --point".to_string()),
            };
            let correction = match params.get("correction").map(|s| s.as_str()) {
                Some("xi-l") => CurrentCorrection::XiL,
                _ => CurrentCorrection::None,
            };
            let p = generator.components.clone();
            let p_ext = extend_symmetry(&ext, &p).map_err(|e| e.to_string())?;
            let invariance = variational_invariance_check(&ext, &p).map_err(|e| e.to_string())?;
            let current =
                noether_current(&ext, &generator, correction).map_err(|e| e.to_string())?;
            let div = current.divergence(&ext.space).map_err(|e| e.to_string())?;
            let conserved = ext
                .full
                .reduce_on_shell(&div)
                .map_err(|e| e.to_string())?
                .is_zero();
            let mut report = Report::new("ibragimov");
            report
                .inputs
                .insert("symmetry".to_string(), render_all(session, &p));
            report.result.insert(
                "lagrangian".to_string(),
                ext.lagrangian.display(&ext.space).to_string(),
            );
            for (a, fs) in ext.adjoint_equations.iter().enumerate() {
                report.result.insert(
                    format!("adjoint-equation-{a}"),
                    fs.display(&ext.space).to_string(),
                );
            }
            report.result.insert(
                "extended-symmetry".to_string(),
                p_ext
                    .iter()
                    .map(|e| e.display(&ext.space).to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            for (i, c) in current.0.iter().enumerate() {
                report
                    .result
                    .insert(format!("current-{i}"), c.display(&ext.space).to_string());
            }
            report.result.insert(
                "invariance-residual-zero".to_string(),
                invariance.is_zero().to_string(),
            );
            report
                .result
                .insert("conserved-on-extended".to_string(), conserved.to_string());
            report.verdict = if invariance.is_zero() && conserved {
                "verified".into()
            } else {
                "falsified".into()
            };
            Ok(report)
        }
        "equivalence" => {
            let p = parse_components(
                session,
                param(params, "symmetry")?,
                n_dep,
                "symmetry characteristic",
            )?;
            let q = parse_components(session, param(params, "adjoint")?, m_eqs, "adjoint-symmetry")?;
            let equal = equivalence_check(sys, &p, &q).map_err(|e| e.to_string())?;
            let mut report = Report::new("equivalence");
            report
                .inputs
                .insert("symmetry".to_string(), render_all(session, &p));
            report
                .inputs
                .insert("adjoint".to_string(), render_all(session, &q));
            report.verdict = if equal {
                "equivalent".into()
            } else {
                "falsified".into()
            };
            Ok(report)
        }
        other => Err(format!("unknown command `{other}`")),
    }
}

fn insert_current(report: &mut Report, session: &Session, current: &CurrentVector) {
    for (i, c) in current.0.iter().enumerate() {
        report
            .result
            .insert(format!("current-{i}"), c.display(&session.space).to_string());
    }
}

fn render_operator(session: &Session, op: &crate::desystem::LinearDiffOperator) -> String {
    if op.is_zero() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for ((row, col), cell) in &op.entries {
        for (index, coeff) in cell {
            let mut d = String::new();
            for i in index.tuple() {
                let _ = write!(d, "D[{}]", session.space.indep_name(i as u16));
            }
            parts.push(format!(
                "({row},{col}): ({}){d}",
                coeff.display(&session.space)
            ));
        }
    }
    parts.join(" + ")
}
