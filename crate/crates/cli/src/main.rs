// SPDX-License-Identifier: MIT OR Apache-2.0

//! `riskcpd` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use riskcpd::{DecisionPolicy, ErrorBudget};

use crate::commands::BudgetReport;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "riskcpd",
    version,
    allow_negative_numbers = true,
    about = "Risk-calibrated changepoint detection for security event streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for the synthetic generator.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let c = RunConfig::load(self.config.as_deref())?.with_overrides(self.out.clone(), self.seed);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over the test window; write timeline, alert log and summary.
    Detect(Common),
    /// Score detector and baselines on the test window; write metrics and curves.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Also report label-valued scores under the name `oracle`.
        #[arg(long)]
        debug_oracle_scores: bool,
    },
    /// Grid-search hazard and malicious-prior inflation on the validation window.
    Tune(Common),
    /// Write a synthetic event stream.
    Synth(Common),
    /// Translate an SLO and alert costs into a threshold and alert capacities.
    Budget {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        slo: Option<f64>,
        #[arg(long)]
        period_minutes: Option<f64>,
        #[arg(long)]
        cost_fp: Option<f64>,
        #[arg(long)]
        cost_fn: Option<f64>,
        #[arg(long)]
        base_rate: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect(c) => commands::detect_cmd(&c.load()?).map(drop),
        Command::Eval {
            common,
            debug_oracle_scores,
        } => commands::eval_cmd(&common.load()?, debug_oracle_scores).map(drop),
        Command::Tune(c) => commands::tune_cmd(&c.load()?).map(drop),
        Command::Synth(c) => commands::synth(&c.load()?).map(drop),
        Command::Budget {
            common,
            slo,
            period_minutes,
            cost_fp,
            cost_fn,
            base_rate,
        } => {
            let config = common.load()?;
            let (b, p) = (config.budget, config.policy);
            let budget = ErrorBudget::new(slo.unwrap_or(b.slo), period_minutes.unwrap_or(b.period_minutes))?;
            let policy = DecisionPolicy::new(
                cost_fp.unwrap_or(p.cost_fp),
                cost_fn.unwrap_or(p.cost_fn),
                base_rate.unwrap_or(p.base_rate),
            )?;
            let report = BudgetReport::new(&budget, &policy);
            commands::budget_cmd(&config, &report)?;
            print!("{}", report.render());
            Ok(())
        }
    }
}

fn fail(msg: &str) -> ExitCode {
    let line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("riskcpd: error: {line}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            return fail(
                text.lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: "),
            );
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&format!("{e:#}")),
    }
}
