//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use baselines::MechanismId;
use clap::{Parser, Subcommand};
use market_model::MarketConfig;
use mechanism_verify::{golden_fixture, probe_grid, probe_truthfulness, Subject};
use serde::Serialize;

use crate::experiment::{bench_time, run_experiment, summarize, Summary};
use crate::output::{write_json, write_records_file};
use crate::scenario::{apply_trace, generate_scenario, load_attendance_trace, SizeSpec};
use crate::settings::{load_config, ConfigOverrides};
use crate::sweep::{sweep_grid, sweep_lambda};
use crate::verify::{verify_all, VerifyParams};
use crate::HarnessError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "sim-harness", version, about = "Two-stage overbooking double auction simulator")]
struct Cli {
    /// TOML file with MarketConfig fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired Monte Carlo comparison of mechanisms on one generated market.
    Simulate {
        #[arg(long, default_value_t = 100)]
        buyers: usize,
        #[arg(long, default_value_t = 15)]
        sellers: usize,
        #[arg(long, default_value_t = 300)]
        trials: usize,
        #[arg(long = "mechanism", num_args = 1.., value_parser = parse_mechanism)]
        mechanisms: Vec<MechanismId>,
        /// Per-trial CSV; the summary goes next to it as <out>.summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of attendance probabilities or observations per buyer.
        #[arg(long)]
        attendance_trace: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check the 5x5 worked example.
    Golden {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Realized welfare and utilities over a grid of overbooking rates.
    SweepLambda {
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 100)]
        buyers: usize,
        #[arg(long, default_value_t = 10)]
        sellers: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Misreport sweep for one buyer or seller.
    ProbeTruthfulness {
        #[arg(long, value_parser = parse_subject)]
        subject: Subject,
        #[arg(long, default_value_t = 40)]
        buyers: usize,
        #[arg(long, default_value_t = 8)]
        sellers: usize,
        #[arg(long, default_value_t = 31)]
        points: usize,
        /// Fixed overbooking rate; defaults to the optimizer's choice.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decision time of TwoSAuction against CRDAuction per market size.
    BenchTime {
        #[arg(long, value_delimiter = ',', default_value = "50x10,100x15,150x25,200x25")]
        sizes: Vec<SizeSpec>,
        #[arg(long, default_value_t = 300)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Property suites: IR, budget balance, truthfulness and risk bounds.
    Verify {
        #[arg(long)]
        markets: Option<usize>,
        #[arg(long)]
        probe_markets: Option<usize>,
        #[arg(long)]
        risk_instances: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_mechanism(s: &str) -> Result<MechanismId, String> {
    s.parse()
}

fn parse_subject(s: &str) -> Result<Subject, String> {
    s.parse()
}

fn save<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), HarnessError> {
    match out {
        Some(p) => write_json(p, value),
        None => Ok(()),
    }
}

fn print_summary(summary: &Summary) {
    println!("{:<22} {:>10} {:>8} {:>12} {:>9} {:>8} {:>6}", "mechanism", "mean_sw", "se", "time_ns", "red_%", "matches", "lambda");
    for m in &summary.mechanisms {
        let red = m.time_reduction_pct.map_or("-".to_string(), |r| format!("{r:.1}"));
        println!(
            "{:<22} {:>10.2} {:>8.2} {:>12.0} {:>9} {:>8.1} {:>6.2}",
            m.mechanism.to_string(),
            m.mean_sw,
            m.se_sw,
            m.mean_time_ns,
            red,
            m.mean_matches,
            m.lambda
        );
    }
}

fn run(cli: Cli) -> Result<u8, HarnessError> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Simulate { buyers, sellers, trials, mechanisms, out, attendance_trace, threads } => {
            if trials == 0 {
                return Err(HarnessError::Config("trials must be positive".into()));
            }
            let size = SizeSpec { buyers, sellers };
            if buyers == 0 || sellers == 0 {
                return Err(HarnessError::Config("buyers and sellers must be positive".into()));
            }
            let mechanisms = if mechanisms.is_empty() {
                vec![
                    MechanismId::TwoSAuction,
                    MechanismId::CRDAuction,
                    MechanismId::SSPDAuction,
                    MechanismId::VRAuction,
                    MechanismId::CRAuction,
                    MechanismId::RSAuction,
                ]
            } else {
                mechanisms
            };
            let mut scenario = generate_scenario(size, cfg.seed, cfg.clone(), trials, mechanisms);
            if let Some(p) = attendance_trace {
                apply_trace(&mut scenario.market, &load_attendance_trace(&p)?);
            }
            let exp = match threads {
                Some(t) => crate::experiment::run_experiment_with(&scenario, t)?,
                None => run_experiment(&scenario)?,
            };
            let summary = summarize(&exp.records);
            print_summary(&summary);
            if let Some(p) = out {
                write_records_file(&p, &exp.records)?;
                let mut doc = p.clone().into_os_string();
                doc.push(".summary.json");
                #[derive(Serialize)]
                struct Doc<'a> {
                    size: SizeSpec,
                    config: &'a MarketConfig,
                    stage1: &'a [crate::experiment::Stage1Record],
                    summary: &'a Summary,
                }
                write_json(Path::new(&doc), &Doc { size, config: &cfg, stage1: &exp.stage1, summary: &summary })?;
            }
            Ok(0)
        }
        Command::Golden { out } => {
            let report = golden_fixture()?;
            for c in &report.checks {
                println!("{} {:<24} expected {:<36} got {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.expected, c.actual);
            }
            save(out.as_deref(), &report)?;
            Ok(if report.pass() { 0 } else { EXIT_VERIFY })
        }
        Command::SweepLambda { step, buyers, sellers, trials, out } => {
            if !(step > 0.0 && step <= 1.0) {
                return Err(HarnessError::Config("step must lie in (0,1]".into()));
            }
            let market = crate::scenario::generate_market(SizeSpec { buyers, sellers }, cfg.seed, &Default::default());
            let report = sweep_lambda(&market.buyers, &market.sellers, &cfg, &sweep_grid(step), trials)?;
            println!("{:>6} {:>9} {:>12} {:>10} {:>10} {:>10} {:>8}", "lambda", "contracts", "expected_sw", "sw", "buyers", "sellers", "srisk");
            for p in &report.points {
                println!(
                    "{:>6.2} {:>9} {:>12.2} {:>10.2} {:>10.2} {:>10.2} {:>8.3}",
                    p.lambda, p.contracts, p.expected_sw, p.sw, p.buyer_utility, p.seller_utility, p.max_srisk
                );
            }
            println!("lambda* = {:.2} (risk infeasible: {})", report.lambda_star, report.risk_infeasible);
            save(out.as_deref(), &report)?;
            Ok(0)
        }
        Command::ProbeTruthfulness { subject, buyers, sellers, points, lambda, out } => {
            let market = crate::scenario::generate_market(SizeSpec { buyers, sellers }, cfg.seed, &Default::default());
            let (b, s) = (&market.buyers, &market.sellers);
            let value = match subject {
                Subject::Buyer(n) if n < b.len() => b[n].valuations.iter().sum::<f64>() / b[n].valuations.len() as f64,
                Subject::Seller(m) if m < s.len() => s[m].unit_cost,
                _ => return Err(HarnessError::Config(format!("{subject} is out of range"))),
            };
            let lambda = match lambda {
                Some(l) => l,
                None => opdauction::run_stage1(b, s, &cfg)?.lambda,
            };
            let report = probe_truthfulness(b, s, &cfg, lambda, subject, &probe_grid(value, points))?;
            println!("{subject}: true value {:.4}, lambda {:.2}, truthful utility {:.4}", value, lambda, report.truthful_utility);
            for p in &report.sweep {
                println!("{:>9.4} {:>12.4} {}", p.report, p.utility, if p.winner { "win" } else { "-" });
            }
            for v in &report.violations {
                println!("violation: report {:.4} gains {:.6} ({:?})", v.report, v.gain, v.kind);
            }
            save(out.as_deref(), &report)?;
            Ok(if report.violations.is_empty() { 0 } else { EXIT_VERIFY })
        }
        Command::BenchTime { sizes, trials, out } => {
            let rows = bench_time(&sizes, trials, cfg.seed, &cfg)?;
            println!("{:>8} {:>14} {:>14} {:>10}", "size", "TwoS_ns", "CRD_ns", "red_%");
            for r in &rows {
                println!("{:>8} {:>14.0} {:>14.0} {:>10.1}", r.size.to_string(), r.twos_ns, r.crd_ns, r.reduction_pct);
            }
            save(out.as_deref(), &rows)?;
            Ok(0)
        }
        Command::Verify { markets, probe_markets, risk_instances, mc_samples, out } => {
            let mut params = VerifyParams::quick(cfg.seed);
            if let Some(k) = markets {
                params.economic.markets = k;
            }
            if let Some(k) = probe_markets {
                params.truth.markets = k;
            }
            if let Some(k) = risk_instances {
                params.risk.instances = k;
            }
            if let Some(k) = mc_samples {
                params.risk.samples = k;
            }
            let report = verify_all(&params, &cfg)?;
            for s in &report.suites {
                println!("{} {:<24} {}", if s.pass { "PASS" } else { "FAIL" }, s.name, s.detail);
            }
            save(out.as_deref(), &report)?;
            Ok(if report.pass() { 0 } else { EXIT_VERIFY })
        }
    }
}

/// Parse `args` (program name first), run the command and return the
/// process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                1
            }
        }
    }
}
