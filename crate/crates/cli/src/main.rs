use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lobmatch::agents::default_roster;
use lobmatch::agents::{recognize, roster_with};
use lobmatch::equilibrium::{
    check_equilibrium, compatibility_matrix, expected_utilities, standard_pool, theorem_suite,
    Entry, EquilibriumReport, PayoffMatrix, Status,
};
use lobmatch::formula::{fraction_string, parse_rational, parse_roster_over};
use lobmatch::montecarlo::{agreement, simulate, TrialConfig};
use lobmatch::{Arena, Builtin, OutcomeDistribution, Rational, Roster, RosterParams};

mod render;

use render::{dist_json, dist_lines, q};

#[derive(Parser)]
#[command(
    name = "lobmatch",
    version,
    about = "Exact outcomes for program-game Prisoner's Dilemma bots"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Roster file in the agent DSL, added on top of the built-ins.
    #[arg(long, global = true)]
    roster: Option<PathBuf>,
    /// PrudentBot threshold used by bare `PB`.
    #[arg(long, global = true, value_parser = rational, default_value = "1/2")]
    theta: Rational,
    /// Grounding probability used by bare `eGFB`.
    #[arg(long, global = true, value_parser = rational, default_value = "1/4")]
    epsilon: Rational,
    #[arg(long, global = true, value_parser = rational, default_value = "3")]
    reward: Rational,
    #[arg(long, global = true, value_parser = rational, default_value = "4")]
    temptation: Rational,
    #[arg(long, global = true, value_parser = rational, default_value = "1")]
    punishment: Rational,
    #[arg(long, global = true, value_parser = rational, default_value = "0")]
    sucker: Rational,
    #[arg(
        long,
        global = true,
        value_enum,
        env = "LOBMATCH_FORMAT",
        default_value = "text"
    )]
    format: Format,
    /// Dump compiled systems and world tables to stderr.
    #[arg(long, global = true)]
    debug: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Exact outcome distribution and payoffs of one match.
    Match { agent1: String, agent2: String },
    /// Outcomes of every ordered roster pair.
    Matrix,
    /// Check a pair against a challenger pool.
    Nash {
        agent1: String,
        agent2: String,
        /// Comma-separated challengers; defaults to the whole roster.
        #[arg(long, value_delimiter = ',')]
        pool: Vec<String>,
    },
    /// Machine-check the cooperation and equilibrium claims.
    Theorems,
    /// Monte Carlo run alongside the exact distribution.
    Simulate {
        agent1: String,
        agent2: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        depth: u32,
    },
    /// Parse and validate a roster file.
    Check { file: PathBuf },
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Verdict,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

struct Ctx {
    roster: Roster,
    params: RosterParams,
    payoffs: PayoffMatrix,
    format: Format,
    debug: bool,
}

impl Ctx {
    fn new(g: &GlobalOpts) -> Result<Self> {
        let params = RosterParams {
            theta: g.theta.clone(),
            epsilon: g.epsilon.clone(),
        };
        let mut roster = roster_with(&params)?;
        if let Some(path) = &g.roster {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read roster {}", path.display()))?;
            let extra = parse_roster_over(&text, &roster)
                .with_context(|| format!("in {}", path.display()))?;
            roster.overlay(&extra);
        }
        let payoffs = PayoffMatrix::new(
            g.reward.clone(),
            g.temptation.clone(),
            g.punishment.clone(),
            g.sucker.clone(),
        )?;
        Ok(Ctx {
            roster,
            params,
            payoffs,
            format: g.format,
            debug: g.debug,
        })
    }

    /// Roster identifier first, then built-in name with optional `:rational`.
    fn agent(&self, name: &str) -> Result<Entry> {
        if let Some(spec) = self.roster.get(name) {
            return Ok((name.to_string(), spec.clone()));
        }
        let b =
            Builtin::parse_with_defaults(name, Some(&self.params)).map_err(|e| anyhow!("{e}"))?;
        Ok((b.label(), lobmatch::builtin(&b)?))
    }

    fn payoffs_json(&self) -> Value {
        json!({
            "reward": q(&self.payoffs.reward),
            "temptation": q(&self.payoffs.temptation),
            "punishment": q(&self.payoffs.punishment),
            "sucker": q(&self.payoffs.sucker),
        })
    }

    fn inputs(&self, extra: Value) -> Value {
        let mut v = json!({
            "theta": q(&self.params.theta),
            "epsilon": q(&self.params.epsilon),
            "payoffs": self.payoffs_json(),
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
            m.extend(e);
        }
        v
    }

    fn emit(&self, command: &str, inputs: Value, results: Value, text: String) {
        match self.format {
            Format::Json => {
                let doc = json!({ "command": command, "inputs": inputs, "results": results });
                println!(
                    "{}",
                    serde_json::to_string_pretty(&doc).expect("serializable")
                );
            }
            Format::Text => print!("{text}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Command::Check { file } = &cli.command {
        return check(file, cli.global.format);
    }
    let ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Match { agent1, agent2 } => run_match(&ctx, &agent1, &agent2)?,
        Command::Matrix => run_matrix(&ctx)?,
        Command::Nash {
            agent1,
            agent2,
            pool,
        } => return run_nash(&ctx, &agent1, &agent2, &pool),
        Command::Theorems => return run_theorems(&ctx),
        Command::Simulate {
            agent1,
            agent2,
            trials,
            seed,
            depth,
        } => run_simulate(&ctx, &agent1, &agent2, trials, seed, depth)?,
        Command::Check { .. } => unreachable!(),
    }
    Ok(())
}

fn run_match(ctx: &Ctx, a: &str, b: &str) -> Result<()> {
    let (p1, p2) = (ctx.agent(a)?, ctx.agent(b)?);
    let arena = Arena::new(&ctx.roster);
    if ctx.debug {
        let analysis = arena.analyze(&p1.1, &p2.1)?;
        if let (Some(system), Some(table)) = (&analysis.system, &analysis.table) {
            eprintln!("{system}");
            eprintln!("stabilized at world {}", table.stabilization_world());
            eprintln!("{table}");
        } else {
            eprintln!("grounded pair: solved directly");
        }
    }
    let dist = arena.outcome_distribution(&p1.1, &p2.1)?;
    let (u1, u2) = expected_utilities(&dist, &ctx.payoffs);
    let mut text = format!("{} vs {}\n", p1.0, p2.0);
    text.push_str(&dist_lines(&dist));
    text.push_str(&format!("payoffs: {u1}, {u2}\n"));
    ctx.emit(
        "match",
        ctx.inputs(json!({ "agent1": p1.0, "agent2": p2.0 })),
        json!({ "distribution": dist_json(&dist), "payoffs": [q(&u1), q(&u2)] }),
        text,
    );
    Ok(())
}

fn run_matrix(ctx: &Ctx) -> Result<()> {
    let arena = Arena::new(&ctx.roster);
    let m = compatibility_matrix(&arena, &ctx.payoffs)?;
    let mut cells = Vec::new();
    let width = m.names.iter().map(|n| n.len()).max().unwrap_or(0).max(6);
    let mut text = format!("{:width$}", "");
    for n in &m.names {
        text.push_str(&format!("  {n:>10}"));
    }
    text.push('\n');
    for (i, row) in m.names.iter().enumerate() {
        text.push_str(&format!("{row:width$}"));
        for (j, col) in m.names.iter().enumerate() {
            let c = &m.cells[i][j];
            text.push_str(&format!("  {:>10}", c.flag.as_str()));
            cells.push(json!({
                "row": row,
                "col": col,
                "distribution": dist_json(&c.distribution),
                "payoffs": [q(&c.payoffs.0), q(&c.payoffs.1)],
                "flag": c.flag,
            }));
        }
        text.push('\n');
    }
    for (i, row) in m.names.iter().enumerate() {
        for (j, col) in m.names.iter().enumerate() {
            let c = &m.cells[i][j];
            if c.flag == lobmatch::equilibrium::CellFlag::Mixed {
                text.push_str(&format!("{row} vs {col}: {}\n", c.distribution));
            }
        }
    }
    let block = m.block.as_ref().map(|b| {
        text.push_str(&format!(
            "block {}: hypothesis {}, all mutual cooperation {}\n",
            b.members.join("/"),
            if b.hypothesis_holds { "holds" } else { "fails" },
            b.all_mutual_c
        ));
        json!({
            "members": b.members,
            "theta": q(&b.theta),
            "epsilon": q(&b.epsilon),
            "hypothesis_holds": b.hypothesis_holds,
            "all_mutual_c": b.all_mutual_c,
        })
    });
    ctx.emit(
        "matrix",
        ctx.inputs(json!({ "agents": m.names })),
        json!({ "cells": cells, "block": block }),
        text,
    );
    Ok(())
}

fn run_nash(ctx: &Ctx, a: &str, b: &str, pool: &[String]) -> Result<(), Failure> {
    let (p1, p2) = (ctx.agent(a)?, ctx.agent(b)?);
    let pool: Vec<Entry> = if pool.is_empty() {
        standard_pool(&ctx.roster)
    } else {
        pool.iter().map(|n| ctx.agent(n)).collect::<Result<_>>()?
    };
    let arena = Arena::new(&ctx.roster);
    let rep: EquilibriumReport =
        check_equilibrium(&arena, &p1, &p2, &pool, &ctx.payoffs).map_err(anyhow::Error::from)?;
    let mut text = format!(
        "{} vs {}: payoffs {}, {}\n",
        rep.pair.0, rep.pair.1, rep.payoffs.0, rep.payoffs.1
    );
    for v in &rep.violations {
        text.push_str(&format!(
            "  violation: {} as {} earns {}\n",
            v.challenger, v.seat, v.payoff
        ));
    }
    text.push_str(&format!(
        "{} ({})\n",
        if rep.is_equilibrium() {
            "equilibrium"
        } else {
            "not an equilibrium"
        },
        EquilibriumReport::SCOPE_NOTE
    ));
    let violations: Vec<Value> = rep
        .violations
        .iter()
        .map(|v| json!({ "challenger": v.challenger, "seat": v.seat, "payoff": q(&v.payoff) }))
        .collect();
    ctx.emit(
        "nash",
        ctx.inputs(json!({ "agent1": p1.0, "agent2": p2.0, "pool": rep.pool })),
        json!({
            "payoffs": [q(&rep.payoffs.0), q(&rep.payoffs.1)],
            "equilibrium": rep.is_equilibrium(),
            "violations": violations,
            "scope": EquilibriumReport::SCOPE_NOTE,
        }),
        text,
    );
    if rep.is_equilibrium() {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn run_theorems(ctx: &Ctx) -> Result<(), Failure> {
    let verdicts =
        theorem_suite(&ctx.params.theta, &ctx.params.epsilon).map_err(anyhow::Error::from)?;
    let mut text = String::new();
    for v in &verdicts {
        text.push_str(&format!("[{}] {}: {}\n", v.status, v.name, v.claim));
        for e in &v.evidence {
            text.push_str(&format!("      {e}\n"));
        }
        if let Some(n) = &v.note {
            text.push_str(&format!("      note: {n}\n"));
        }
    }
    let failed = verdicts.iter().filter(|v| v.status == Status::Fail).count();
    text.push_str(&format!("{} verdicts, {failed} failed\n", verdicts.len()));
    let results: Vec<Value> = verdicts
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "claim": v.claim,
                "status": v.status,
                "evidence": v.evidence,
                "note": v.note,
            })
        })
        .collect();
    ctx.emit(
        "theorems",
        ctx.inputs(json!({})),
        json!({ "verdicts": results }),
        text,
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn run_simulate(ctx: &Ctx, a: &str, b: &str, trials: u64, seed: u64, depth: u32) -> Result<()> {
    let (p1, p2) = (ctx.agent(a)?, ctx.agent(b)?);
    let cfg = TrialConfig::new(trials, seed, depth)?;
    let arena = Arena::new(&ctx.roster);
    let exact: OutcomeDistribution = arena.outcome_distribution(&p1.1, &p2.1)?;
    let result = simulate(&arena, &p1.1, &p2.1, &cfg)?;
    let rows = agreement(&result, &exact, 4.0);
    let mut text = format!(
        "{} vs {}: {trials} trials, seed {seed}, depth {depth}\n",
        p1.0, p2.0
    );
    text.push_str("profile      count   frequency       exact  within 4 sigma\n");
    let mut profiles = Vec::new();
    for r in &rows {
        let key = OutcomeDistribution::key(r.profile);
        let count = result.count(r.profile.0, r.profile.1);
        text.push_str(&format!(
            "{key:7} {count:>10}  {:>10.6}  {:>10}  {}\n",
            r.empirical,
            fraction_string(exact.get(r.profile.0, r.profile.1)),
            if r.within { "yes" } else { "no" }
        ));
        profiles.push(json!({
            "profile": key,
            "count": count,
            "frequency": r.empirical,
            "exact": q(exact.get(r.profile.0, r.profile.1)),
            "sigma": r.sigma,
            "within_4_sigma": r.within,
        }));
    }
    text.push_str(&format!("truncated: {}\n", result.truncated));
    ctx.emit(
        "simulate",
        ctx.inputs(json!({
            "agent1": p1.0, "agent2": p2.0,
            "trials": trials, "seed": seed, "depth": depth,
        })),
        json!({
            "profiles": profiles,
            "truncated": result.truncated,
            "exact": dist_json(&exact),
        }),
        text,
    );
    Ok(())
}

fn check(file: &PathBuf, format: Format) -> Result<(), Failure> {
    let text =
        std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    // built-in names may be referenced without being redefined
    let (ok, out, agents) = match parse_roster_over(&text, &default_roster()) {
        Ok(roster) => {
            let mut out = format!("{}: {} agents, valid\n", file.display(), roster.len());
            let mut agents = Vec::new();
            for (name, spec) in roster.iter() {
                let known = recognize(spec).map(|b| b.label());
                out.push_str(&format!(
                    "  {name} := {spec}{}\n",
                    known
                        .as_ref()
                        .map(|k| format!("   [{k}]"))
                        .unwrap_or_default()
                ));
                agents.push(json!({ "name": name, "spec": spec.to_string(), "builtin": known }));
            }
            (true, out, agents)
        }
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            (false, format!("{}: invalid\n", file.display()), Vec::new())
        }
    };
    match format {
        Format::Json => {
            let doc = json!({
                "command": "check",
                "inputs": { "file": file.display().to_string() },
                "results": { "valid": ok, "agents": agents },
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("serializable")
            );
        }
        Format::Text => print!("{out}"),
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}
