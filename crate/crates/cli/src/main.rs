//! Command-line entry point for the game workbench.
//!
//! Exit codes: 0 on success, 1 on domain errors (with a structured JSON
//! error on stderr), 2 on usage errors. With `--format json` every
//! subcommand prints a single JSON document; identical inputs and seeds
//! produce byte-identical output.

use std::fs;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use efgames::formula::Formula;
use efgames::games::{
    efb_referee, efd_winner, min_separating_value, replay_trace, EfbMove, EfbPosition, GameTrace,
    Player, RandomII, SolveCaps,
};
use efgames::io::{ClassFile, CorpusFile, StringSetFile, StructurePairFile};
use efgames::measure::{check_nice, ComplexityMeasure};
use efgames::ordinal::{parse_ordinal_expr, Ordinal};
use efgames::search::{min_separating_formula, EnumerationBudget};
use efgames::strings::{
    is_d_dense, simulate_with_player, BaseProperty, DenseProperty, RandomClopenAdversary, Segment,
};
use efgames::structures::StructClass;

#[derive(Parser)]
#[command(name = "efgames", version, about = "Ordinal-valued formula size and separation games")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Seed for the seeded subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Ordinal arithmetic.
    Ordinal {
        #[command(subcommand)]
        cmd: OrdinalCmd,
    },
    /// Formula inspection.
    Formula {
        #[command(subcommand)]
        cmd: FormulaCmd,
    },
    /// Complexity measures.
    Measure {
        #[command(subcommand)]
        cmd: MeasureCmd,
    },
    /// The back-and-forth game on two structures.
    Efd {
        #[command(subcommand)]
        cmd: EfdCmd,
    },
    /// The splitting/supplementing game on class pairs.
    Efb {
        #[command(subcommand)]
        cmd: EfbCmd,
    },
    /// Formula enumeration.
    Search {
        #[command(subcommand)]
        cmd: SearchCmd,
    },
    /// Cross-checks.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
    /// Infinite binary strings and dense properties.
    Strings {
        #[command(subcommand)]
        cmd: StringsCmd,
    },
}

#[derive(Subcommand)]
enum OrdinalCmd {
    /// Evaluate an ordinal expression in CNF syntax with `#` for the
    /// natural sum, e.g. "w^2*3+w+4" or "w # 1".
    Eval { expr: String },
}

#[derive(Subcommand)]
enum FormulaCmd {
    /// Measure-parametric size of an NNF formula.
    Size {
        #[command(flatten)]
        input: FormulaInput,
        #[arg(long, default_value = "size")]
        measure: String,
    },
    /// Quantifier rank.
    Qr {
        #[command(flatten)]
        input: FormulaInput,
    },
    /// Negation normal form.
    Nnf {
        #[command(flatten)]
        input: FormulaInput,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct FormulaInput {
    /// A JSON formula file.
    #[arg(long)]
    file: Option<String>,
    /// A formula in the compact text syntax.
    #[arg(long)]
    text: Option<String>,
}

impl FormulaInput {
    fn load(&self) -> anyhow::Result<Formula> {
        if let Some(path) = &self.file {
            Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
        } else {
            Ok(self.text.as_deref().unwrap().parse()?)
        }
    }
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Sample the three niceness conditions.
    CheckNice {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
    },
}

#[derive(Subcommand)]
enum EfdCmd {
    /// Exhaustively solve the rank-n game on a structure pair file.
    Solve {
        #[arg(long)]
        file: String,
        #[arg(long)]
        rank: u32,
    },
}

#[derive(Subcommand)]
enum EfbCmd {
    /// Least rank at which Player I wins, with a winning strategy.
    Minsize {
        #[arg(long = "classA")]
        class_a: String,
        #[arg(long = "classB")]
        class_b: String,
        #[arg(long, default_value = "size")]
        measure: String,
        #[arg(long, default_value_t = 6)]
        budget: u64,
        #[arg(long, default_value_t = 2)]
        jmax: usize,
        /// Write the winning strategy table to this file.
        #[arg(long)]
        strategy_out: Option<String>,
        /// Play the strategy against a seeded random Player II and write
        /// the resulting trace to this file.
        #[arg(long)]
        trace_out: Option<String>,
    },
    /// Replay a recorded trace and check it reproduces its outcome.
    Referee {
        #[arg(long)]
        trace: String,
        #[arg(long, default_value = "size")]
        measure: String,
        /// Reject supplement moves (the propositional game).
        #[arg(long)]
        propositional: bool,
    },
}

#[derive(Subcommand)]
enum SearchCmd {
    /// Minimal separating formula by enumeration.
    Minformula {
        #[arg(long = "classA")]
        class_a: String,
        #[arg(long = "classB")]
        class_b: String,
        #[arg(long, default_value = "size")]
        measure: String,
        #[arg(long = "max-value", default_value_t = 6)]
        max_value: u64,
        #[arg(long, default_value_t = 0)]
        jmax: usize,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Game value versus enumeration value over a corpus file.
    Adequacy {
        #[arg(long)]
        corpus: String,
        #[arg(long, default_value = "size")]
        measure: String,
        #[arg(long, default_value_t = 6)]
        budget: u64,
        #[arg(long, default_value_t = 2)]
        jmax: usize,
    },
}

#[derive(Subcommand)]
enum StringsCmd {
    /// The length-L truncation of a dense property.
    Truncate {
        #[arg(long)]
        property: String,
        #[arg(long)]
        length: u64,
        /// Positive segment filter as JSON, e.g. '{"0": true}'.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Check d-density of a finite string set.
    DenseCheck {
        #[arg(long)]
        file: String,
        #[arg(long)]
        d: usize,
    },
    /// The finite lower bound: d-dense pairs need size above d.
    DenseLb {
        #[arg(long = "L")]
        length: u64,
        #[arg(long)]
        d: usize,
    },
    /// Play the propositional game on two dense properties against a
    /// seeded random clopen adversary.
    Simulate {
        #[arg(long)]
        p1: String,
        #[arg(long)]
        p2: String,
        /// Game rank below w^2, e.g. "w*3+2".
        #[arg(long)]
        rank: String,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
        #[arg(long = "support-bound", default_value_t = 6)]
        support_bound: u64,
        /// Write the full trace to this file.
        #[arg(long)]
        out: Option<String>,
    },
}

/// Caps with environment overrides.
struct Caps {
    solve: SolveCaps,
    efd_cap: u32,
    length_cap: u64,
    support_cap: u64,
    round_cap: usize,
}

fn env_cap<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn caps() -> Caps {
    Caps {
        solve: SolveCaps {
            budget_cap: env_cap("EFGAMES_BUDGET_CAP", 8),
            jmax_cap: env_cap("EFGAMES_JMAX_CAP", 4),
        },
        efd_cap: env_cap("EFGAMES_EFD_CAP", 6),
        length_cap: env_cap("EFGAMES_LENGTH_CAP", 12),
        support_cap: env_cap("EFGAMES_SUPPORT_CAP", 8),
        round_cap: env_cap("EFGAMES_ROUND_CAP", 200),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((value, table)) => {
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&value).unwrap()),
                Format::Table => println!("{table}"),
            }
        }
        Err(err) => {
            let code = error_code(&err);
            eprintln!(
                "{}",
                json!({"error": {"code": code, "message": err.to_string()}})
            );
            std::process::exit(1);
        }
    }
}

fn error_code(err: &anyhow::Error) -> &'static str {
    let text = err.to_string();
    for (needle, code) in [
        ("cover", "not-a-cover"),
        ("overflow", "rank-overflow"),
        ("choice", "bad-choice-function"),
        ("separate", "claim-fails"),
        ("cap", "cap-exceeded"),
        ("parse", "parse-error"),
        ("unknown", "unknown-name"),
    ] {
        if text.to_lowercase().contains(needle) {
            return code;
        }
    }
    "domain-error"
}

fn load_class(path: &str) -> anyhow::Result<StructClass> {
    Ok(ClassFile::parse(&fs::read_to_string(path)?)?.build()?)
}

fn run(cli: &Cli) -> anyhow::Result<(Value, String)> {
    let caps = caps();
    match &cli.command {
        Command::Ordinal {
            cmd: OrdinalCmd::Eval { expr },
        } => {
            let value = parse_ordinal_expr(expr)?;
            Ok((json!({"value": value}), value.to_string()))
        }
        Command::Formula { cmd } => run_formula(cmd),
        Command::Measure {
            cmd: MeasureCmd::CheckNice { name, samples },
        } => {
            let measure = ComplexityMeasure::builtin(name)?;
            let report = check_nice(&measure, *samples, cli.seed);
            let table = if report.pass {
                format!("{name}: nice ({samples} samples, seed {})", cli.seed)
            } else {
                format!(
                    "{name}: NOT nice; first witness: {:?}",
                    report.witnesses.first()
                )
            };
            Ok((serde_json::to_value(&report)?, table))
        }
        Command::Efd {
            cmd: EfdCmd::Solve { file, rank },
        } => {
            let (a, b) = StructurePairFile::parse(&fs::read_to_string(file)?)?.build()?;
            let winner = efd_winner(&a, &b, *rank, caps.efd_cap)?;
            Ok((
                json!({"rank": rank, "winner": winner}),
                format!("rank {rank}: player {winner:?} wins"),
            ))
        }
        Command::Efb { cmd } => run_efb(cmd, &caps, cli.seed),
        Command::Search {
            cmd:
                SearchCmd::Minformula {
                    class_a,
                    class_b,
                    measure,
                    max_value,
                    jmax,
                },
        } => {
            let a = load_class(class_a)?;
            let b = load_class(class_b)?;
            let m = ComplexityMeasure::builtin(measure)?;
            let budget = EnumerationBudget {
                max_value: *max_value,
                jmax: *jmax,
                vocabulary: a.vocabulary().clone(),
            };
            match min_separating_formula(&a, &b, &m, &budget)? {
                Some((f, v)) => Ok((
                    json!({"found": true, "value": v, "formula": f, "text": f.to_string()}),
                    format!("value {v}: {f}"),
                )),
                None => Ok((
                    json!({"found": false, "maxValue": max_value}),
                    format!("no separating formula of value <= {max_value}"),
                )),
            }
        }
        Command::Verify { cmd } => run_verify(cmd, &caps),
        Command::Strings { cmd } => run_strings(cmd, &caps, cli.seed),
    }
}

fn run_formula(cmd: &FormulaCmd) -> anyhow::Result<(Value, String)> {
    match cmd {
        FormulaCmd::Size { input, measure } => {
            let f = input.load()?;
            let m = ComplexityMeasure::builtin(measure)?;
            let size = f.size(&m)?;
            Ok((
                json!({"measure": measure, "size": size}),
                size.to_string(),
            ))
        }
        FormulaCmd::Qr { input } => {
            let rank = input.load()?.quantifier_rank();
            Ok((json!({"quantifierRank": rank}), rank.to_string()))
        }
        FormulaCmd::Nnf { input } => {
            let nnf = input.load()?.to_nnf()?;
            Ok((
                json!({"formula": nnf, "text": nnf.to_string()}),
                nnf.to_string(),
            ))
        }
    }
}

fn run_efb(cmd: &EfbCmd, caps: &Caps, seed: u64) -> anyhow::Result<(Value, String)> {
    match cmd {
        EfbCmd::Minsize {
            class_a,
            class_b,
            measure,
            budget,
            jmax,
            strategy_out,
            trace_out,
        } => {
            let a = load_class(class_a)?;
            let b = load_class(class_b)?;
            let m = ComplexityMeasure::builtin(measure)?;
            match min_separating_value(&a, &b, &m, *budget, *jmax, &caps.solve)? {
                Some(result) => {
                    if let Some(path) = strategy_out {
                        fs::write(path, serde_json::to_string_pretty(&result.strategy)?)?;
                    }
                    if let Some(path) = trace_out {
                        let mut strategy = result.strategy.clone();
                        let start = EfbPosition::new(
                            a.clone(),
                            b.clone(),
                            Ordinal::nat(result.value),
                        )
                        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
                        let trace = efb_referee(
                            start,
                            &m,
                            &mut strategy,
                            &mut RandomII::seeded(seed),
                            result.value as usize + 2,
                            *jmax == 0,
                        );
                        fs::write(path, serde_json::to_string_pretty(&trace)?)?;
                    }
                    Ok((
                        json!({
                            "found": true,
                            "value": result.value,
                            "strategyPositions": result.strategy.entries.len(),
                        }),
                        format!("value {}", result.value),
                    ))
                }
                None => Ok((
                    json!({"found": false, "budget": budget}),
                    format!("player I has no winning strategy up to rank {budget}"),
                )),
            }
        }
        EfbCmd::Referee {
            trace,
            measure,
            propositional,
        } => {
            let recorded: GameTrace<EfbPosition, EfbMove> =
                serde_json::from_str(&fs::read_to_string(trace)?)?;
            let m = ComplexityMeasure::builtin(measure)?;
            let replayed = replay_trace(&recorded, &m, *propositional);
            let matches = replayed.outcome == recorded.outcome;
            if !matches {
                anyhow::bail!(
                    "trace does not replay: recorded {:?}, got {:?}",
                    recorded.outcome.reason,
                    replayed.outcome.reason
                );
            }
            Ok((
                json!({
                    "match": true,
                    "winner": replayed.outcome.winner,
                    "reason": replayed.outcome.reason,
                    "rounds": replayed.steps.len(),
                }),
                format!(
                    "trace replays: winner {:?} after {} steps",
                    replayed.outcome.winner,
                    replayed.steps.len()
                ),
            ))
        }
    }
}

fn run_verify(cmd: &VerifyCmd, caps: &Caps) -> anyhow::Result<(Value, String)> {
    let VerifyCmd::Adequacy {
        corpus,
        measure,
        budget,
        jmax,
    } = cmd;
    let corpus = CorpusFile::parse(&fs::read_to_string(corpus)?)?;
    let m = ComplexityMeasure::builtin(measure)?;
    let mut agree = 0;
    let mut disagreements = Vec::new();
    for (idx, instance) in corpus.instances.iter().enumerate() {
        let a = instance.class_a.build()?;
        let b = instance.class_b.build()?;
        // Propositional classes (empty universes) play without variables.
        let propositional = a
            .members()
            .iter()
            .chain(b.members())
            .any(|m| m.structure.universe().is_empty());
        let jmax = if propositional { 0 } else { *jmax };
        let game =
            min_separating_value(&a, &b, &m, *budget, jmax, &caps.solve)?.map(|r| r.value);
        let enum_budget = EnumerationBudget {
            max_value: *budget,
            jmax,
            vocabulary: a.vocabulary().clone(),
        };
        let oracle = min_separating_formula(&a, &b, &m, &enum_budget)?.map(|(_, v)| v);
        let name = instance
            .name
            .clone()
            .unwrap_or_else(|| format!("instance {idx}"));
        // Recorded expectations refer to the `size` measure.
        let expected_ok = match &instance.expected {
            Some(e) if measure == "size" => e.matches(game)?,
            _ => true,
        };
        if game == oracle && expected_ok {
            agree += 1;
        } else {
            disagreements.push(json!({
                "name": name, "game": game, "enumeration": oracle,
                "expected": instance.expected,
            }));
        }
    }
    let total = corpus.instances.len();
    let table = format!("agree: {agree}/{total}");
    Ok((
        json!({"agree": agree, "total": total, "disagreements": disagreements}),
        table,
    ))
}

fn parse_property(name: &str, filter: Option<&str>) -> anyhow::Result<DenseProperty> {
    let base: BaseProperty = name.parse()?;
    let mut property = DenseProperty::new(base);
    if let Some(text) = filter {
        let segment: Segment = serde_json::from_str(text)?;
        property = property.with_filter(segment);
    }
    Ok(property)
}

fn run_strings(cmd: &StringsCmd, caps: &Caps, seed: u64) -> anyhow::Result<(Value, String)> {
    match cmd {
        StringsCmd::Truncate {
            property,
            length,
            filter,
        } => {
            let p = parse_property(property, filter.as_deref())?;
            let set = p.truncate(*length, caps.length_cap)?;
            let strings: Vec<String> = set
                .iter()
                .map(|bits| bits.iter().map(|b| if *b { '1' } else { '0' }).collect())
                .collect();
            Ok((
                json!({"property": property, "length": length, "strings": strings}),
                strings.join(" "),
            ))
        }
        StringsCmd::DenseCheck { file, d } => {
            let set = StringSetFile::parse(&fs::read_to_string(file)?)?.bit_sets()?;
            let dense = is_d_dense(&set, *d);
            Ok((
                json!({"d": d, "dense": dense}),
                format!("{}-dense: {dense}", d),
            ))
        }
        StringsCmd::DenseLb { length, d } => {
            let even: Vec<String> = (0u64..1 << *length)
                .filter(|m| m.count_ones() % 2 == 0)
                .map(|m| mask_to_string(m, *length))
                .collect();
            let odd: Vec<String> = (0u64..1 << *length)
                .filter(|m| m.count_ones() % 2 == 1)
                .map(|m| mask_to_string(m, *length))
                .collect();
            let a = StructClass::from_bit_strings(&even)?;
            let b = StructClass::from_bit_strings(&odd)?;
            let a_set = StringSetFile { strings: even }.bit_sets()?;
            let b_set = StringSetFile { strings: odd }.bit_sets()?;
            let both_dense = is_d_dense(&a_set, *d) && is_d_dense(&b_set, *d);
            let measure = ComplexityMeasure::builtin("size")?;
            let at_budget_d =
                min_separating_value(&a, &b, &measure, *d as u64, 0, &caps.solve)?
                    .map(|r| r.value);
            let holds = both_dense && at_budget_d.is_none();
            Ok((
                json!({
                    "L": length, "d": d, "pair": "even-parity vs odd-parity",
                    "bothDense": both_dense,
                    "valueAtBudgetD": at_budget_d,
                    "minValueExceedsD": holds,
                }),
                format!(
                    "L={length} d={d}: both classes {}-dense, minimal size > {d}: {holds}",
                    d
                ),
            ))
        }
        StringsCmd::Simulate {
            p1,
            p2,
            rank,
            rounds,
            support_bound,
            out,
        } => {
            let left = parse_property(p1, None)?;
            let right = parse_property(p2, None)?;
            let rank: Ordinal = rank.parse()?;
            let bound = (*support_bound).min(caps.support_cap);
            let rounds = (*rounds).min(caps.round_cap);
            let mut adversary = RandomClopenAdversary::seeded(seed, bound);
            let (trace, player_two) =
                simulate_with_player(&left, &right, &rank, &mut adversary, rounds, bound)?;
            if let Some(path) = out {
                fs::write(path, serde_json::to_string_pretty(&trace)?)?;
            }
            let ii_safe = trace.outcome.winner != Some(Player::I);
            Ok((
                json!({
                    "rank": rank, "seed": seed, "rounds": trace.steps.len(),
                    "winner": trace.outcome.winner,
                    "reason": trace.outcome.reason,
                    "endgameEntered": player_two.endgame_entered(),
                    "playerTwoSafe": ii_safe,
                }),
                format!(
                    "winner {:?} after {} rounds (endgame: {})",
                    trace.outcome.winner,
                    trace.steps.len(),
                    player_two.endgame_entered()
                ),
            ))
        }
    }
}

fn mask_to_string(mask: u64, length: u64) -> String {
    (0..length)
        .map(|i| if mask >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}
