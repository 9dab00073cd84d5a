use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mixclass::harness::{self, ExperimentConfig};
use mixclass::oracle::{CountOracle, ExactOracle, MixtureInstance, Phase, Simulator, SparseVector};
use mixclass::params::{AlgoConfig, FamilyConstants};
use mixclass::recovery::{self, RecoveryOptions, RecoveryResult};
use mixclass::setfam::{self, SetFamily};
use mixclass::two_mix::{self, TwoMixOptions};
use mixclass::{support, Error, Result};

#[derive(Parser)]
#[command(name = "mixclass", version, about = "Recover mixtures of sparse linear classifiers from 1-bit queries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct or verify set families.
    #[command(subcommand)]
    Setfam(SetfamCmd),
    /// Query a simulated oracle.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Recover the support matrix.
    #[command(subcommand)]
    Support(SupportCmd),
    /// Recover the components to a target accuracy.
    Recover(RecoverArgs),
    /// Two-component recovery without separability.
    #[command(subcommand, name = "two-mix")]
    TwoMix(TwoMixCmd),
    /// Run an experiment from a key = value config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Ruff,
    Cff,
}

#[derive(Subcommand)]
enum SetfamCmd {
    Construct {
        #[arg(long, value_enum)]
        kind: FamilyArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively check a family file; RUFF when --alpha is given, else CFF.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 50_000_000)]
        cap: u128,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Estimate counts for each query line (dense values or `idx:val` tokens).
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        query_file: PathBuf,
        #[arg(long)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace estimated counts by exact ones (testing mode).
    #[arg(long)]
    exact_oracle: bool,
}

#[derive(Subcommand)]
enum SupportCmd {
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    TwoStage,
    OneStage,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(value_enum)]
    stage: Stage,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
    /// Estimates in the instance format; defaults to OUT with `.estimates`.
    #[arg(long)]
    estimates: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TwoMixCmd {
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Dense components: skip support recovery.
        #[arg(long)]
        dense: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_instance(path: &Path) -> Result<MixtureInstance> {
    MixtureInstance::read_from(open(path)?)
}

fn oracle_for(inst: MixtureInstance, c: &Common) -> Box<dyn CountOracle> {
    if c.exact_oracle {
        Box::new(ExactOracle::new(inst))
    } else {
        Box::new(Simulator::new(inst, c.seed))
    }
}

fn check_ell(inst: &MixtureInstance, ell: usize) -> Result<()> {
    if inst.ell() != ell {
        return Err(Error::InvalidParameter(format!("--ell {ell} but the instance has {} components", inst.ell())));
    }
    Ok(())
}

fn parse_query(line: &str, n: usize, lineno: usize) -> Result<Vec<f64>> {
    let bad = |tok: &str| Error::Parse { line: lineno, msg: format!("bad query token `{tok}`") };
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.iter().any(|t| t.contains(':')) {
        let mut v = vec![0.0; n];
        for tok in toks {
            let (i, x) = tok.split_once(':').ok_or_else(|| bad(tok))?;
            let i: usize = i.parse().map_err(|_| bad(tok))?;
            if i >= n {
                return Err(Error::Parse { line: lineno, msg: format!("index {i} outside dimension {n}") });
            }
            v[i] = x.parse().map_err(|_| bad(tok))?;
        }
        Ok(v)
    } else {
        let v = toks.iter().map(|t| t.parse().map_err(|_| bad(t))).collect::<Result<Vec<f64>>>()?;
        if v.len() != n {
            return Err(Error::Parse { line: lineno, msg: format!("expected {n} values, got {}", v.len()) });
        }
        Ok(v)
    }
}

fn write_result(w: &mut dyn Write, r: &RecoveryResult, truth: &[SparseVector]) -> Result<()> {
    let m = r.evaluate(truth)?;
    let total = r.ledger.total();
    writeln!(w, "component,rep_coord,rep_sign,l2_error,queries_used")?;
    for (t, &e) in m.sigma.iter().enumerate() {
        let rep = r.reps.get(e).map_or(String::new(), |x| x.to_string());
        let sign = r.signs.get(e).map_or(String::new(), |s| format!("{s:+}"));
        writeln!(w, "{t},{rep},{sign},{:.6},{total}", m.errors[t])?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = AlgoConfig::default();
    match cli.cmd {
        Cmd::Setfam(SetfamCmd::Construct { kind, n, t, r, alpha, seed, out }) => {
            let c = FamilyConstants::default();
            let f = match kind {
                FamilyArg::Ruff => setfam::construct_ruff(n, t, alpha, seed, &c)?,
                FamilyArg::Cff => setfam::construct_cff(n, r, t, seed, &c)?,
            };
            let mut w = create(&out)?;
            f.write_to(&mut w)?;
            w.flush()?;
        }
        Cmd::Setfam(SetfamCmd::Verify { input, t, r, alpha, cap }) => {
            let f = SetFamily::read_from(open(&input)?)?;
            let ok = match alpha {
                Some(a) => setfam::verify_ruff(&f, t, a, cap)?,
                None => setfam::verify_cff(&f, r, t, cap)?,
            };
            println!("{}", if ok { "valid" } else { "invalid" });
            if !ok {
                return Err(Error::ConstructionFailure(format!("{} fails the property", input.display())));
            }
        }
        Cmd::Oracle(OracleCmd::Simulate { instance, query_file, batch, seed }) => {
            let inst = load_instance(&instance)?;
            let n = inst.n();
            let mut sim = Simulator::new(inst, seed);
            let mut out = io::stdout().lock();
            writeln!(out, "query_id,pos,neg,z,nz,calls")?;
            let mut id = 0usize;
            for (i, line) in open(&query_file)?.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() || line.trim_start().starts_with('#') {
                    continue;
                }
                let v = parse_query(&line, n, i + 1)?;
                let before = sim.ledger().total();
                let c = sim.counts(&v, batch, Phase::Recovery)?;
                writeln!(out, "{id},{},{},{},{},{}", c.pos, c.neg, c.z, c.nz, sim.ledger().total() - before)?;
                id += 1;
            }
        }
        Cmd::Support(SupportCmd::Recover { common, ell, out }) => {
            let inst = load_instance(&common.instance)?;
            check_ell(&inst, ell)?;
            let p = inst.problem(common.k);
            let mut oracle = oracle_for(inst, &common);
            let rec = support::recover_support(oracle.as_mut(), &p, &cfg, common.seed)?;
            let x = rec.x.canonical();
            let reps = x.representatives()?;
            let signs = support::recover_rep_signs_retrying(oracle.as_mut(), &x, &rec.ruff, &p, &cfg, common.seed)?;
            let mut w = create(&out)?;
            let cols: Vec<String> = (1..=ell).map(|t| format!("col_{t}")).collect();
            writeln!(w, "coordinate,{}", cols.join(","))?;
            writeln!(w, "rep,{}", reps.iter().map(usize::to_string).collect::<Vec<_>>().join(","))?;
            writeln!(w, "sign,{}", signs.iter().map(|s| format!("{s:+}")).collect::<Vec<_>>().join(","))?;
            for (i, row) in x.rows().iter().enumerate() {
                writeln!(w, "{i},{}", row.iter().map(u8::to_string).collect::<Vec<_>>().join(","))?;
            }
            w.flush()?;
            log::info!("support recovery used {} oracle calls", oracle.ledger().total());
        }
        Cmd::Recover(a) => {
            let inst = load_instance(&a.common.instance)?;
            check_ell(&inst, a.ell)?;
            let p = inst.problem(a.common.k);
            let truth = inst.components().to_vec();
            let mut oracle = oracle_for(inst, &a.common);
            let r = match a.stage {
                Stage::TwoStage => recovery::two_stage_recover(
                    oracle.as_mut(),
                    &p,
                    &cfg,
                    a.epsilon,
                    a.common.seed,
                    &RecoveryOptions::default(),
                )?,
                Stage::OneStage => recovery::one_stage_recover(oracle.as_mut(), &p, &cfg, a.epsilon, a.common.seed, None)?,
            };
            let mut w = create(&a.out)?;
            write_result(&mut w, &r, &truth)?;
            w.flush()?;
            let est_path = a.estimates.unwrap_or_else(|| a.out.with_extension("estimates"));
            let mut w = create(&est_path)?;
            MixtureInstance::new(r.estimates.clone(), 0.0)?.write_to(&mut w)?;
            w.flush()?;
        }
        Cmd::TwoMix(TwoMixCmd::Recover { common, delta, epsilon, dense, out }) => {
            let inst = load_instance(&common.instance)?;
            check_ell(&inst, 2)?;
            let mut p = inst.problem(common.k);
            p.delta = delta;
            let truth = inst.components().to_vec();
            let mut oracle = oracle_for(inst, &common);
            let r = two_mix::l2_recover(oracle.as_mut(), &p, epsilon, &cfg, common.seed, dense, &TwoMixOptions::default())?;
            let mut w = sink(out.as_deref())?;
            write_result(&mut w, &r, &truth)?;
            w.flush()?;
        }
        Cmd::Experiment { config } => {
            let c = ExperimentConfig::load(&config)?;
            harness::run_experiment(&c)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mixclass: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
