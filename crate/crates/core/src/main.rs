use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use egf_core::scenario::{
    format_number, load_scenario, parse_table, run_scenario, scenario_from_table, set_parameter, FlowScenario,
    RunReport, ScenarioError,
};
use egf_core::verify::acceptance_suite;

#[derive(Parser)]
#[command(name = "egf", version, about = "Run extrinsic geometric flow scenarios and the acceptance suite")]
struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "egf-out")]
    out: PathBuf,
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { file: PathBuf },
    /// Run a scenario once per value of one scalar parameter.
    Sweep {
        file: PathBuf,
        /// Dotted key, e.g. `grid` or `initial.amplitude`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Run the bundled acceptance suite.
    Verify,
}

fn fail(e: &ScenarioError) -> ExitCode {
    eprintln!("egf: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(file: &Path, out: &Path) -> ExitCode {
    let sc = match load_scenario(file) {
        Ok(sc) => sc,
        Err(e) => return fail(&e),
    };
    let report = match run_scenario(&sc) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = report.write(out, sc.output.trajectory) {
        return fail(&e.into());
    }
    print!("{}", report.verdict());
    ExitCode::from(if report.passed() { 0 } else { 1 })
}

fn sweep(file: &Path, param: &str, values: &[String], out: &Path, threads: Option<usize>) -> ExitCode {
    let text = match fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => return fail(&ScenarioError::Parse(format!("{}: {e}", file.display()))),
    };
    let base = match parse_table(&text) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    if values.is_empty() {
        return fail(&ScenarioError::Invalid("sweep needs at least one value".into()));
    }
    let mut scenarios: Vec<(String, FlowScenario)> = Vec::with_capacity(values.len());
    for v in values {
        let mut table = base.clone();
        let built = set_parameter(&mut table, param, v)
            .and_then(|_| scenario_from_table(table).map_err(|e| ScenarioError::Invalid(e.to_string())))
            .and_then(|sc| sc.validate().map(|_| sc));
        match built {
            Ok(sc) => scenarios.push((v.clone(), sc)),
            Err(e) => return fail(&e),
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(&ScenarioError::Invalid(format!("thread pool: {e}"))),
    };
    let results: Vec<Result<RunReport, ScenarioError>> =
        pool.install(|| scenarios.par_iter().map(|(_, sc)| run_scenario(sc)).collect());

    let mut table = format!("{param},final_sup,error,alpha,passed,exit\n");
    let mut code = 0;
    for ((value, sc), result) in scenarios.iter().zip(&results) {
        let dir = out.join(format!("{param}={}", value.replace(['/', '\\'], "_")));
        let (row, status) = match result {
            Ok(r) => {
                if let Err(e) = r.write(&dir, sc.output.trajectory) {
                    return fail(&e.into());
                }
                let status = if r.passed() { 0 } else { 1 };
                let cells = [
                    format_number(r.final_sup),
                    r.error.map_or(String::new(), format_number),
                    r.alpha.map_or(String::new(), format_number),
                ];
                (format!("{value},{},{}", cells.join(","), u8::from(r.passed())), status)
            }
            Err(e) => {
                eprintln!("egf: {param} = {value}: {e}");
                (format!("{value},,,,0"), e.exit_code())
            }
        };
        table.push_str(&format!("{row},{status}\n"));
        code = code.max(status);
    }
    if let Err(e) = fs::create_dir_all(out).and_then(|_| fs::write(out.join("sweep.csv"), &table)) {
        return fail(&e.into());
    }
    print!("{table}");
    ExitCode::from(code as u8)
}

fn verify(out: &Path) -> ExitCode {
    let outcomes = acceptance_suite();
    let mut text = String::new();
    for c in &outcomes {
        text.push_str(&format!("{c}\n"));
    }
    let passed = outcomes.iter().filter(|c| c.passed()).count();
    text.push_str(&format!("{passed}/{} criteria pass\n", outcomes.len()));
    print!("{text}");
    if let Err(e) = fs::create_dir_all(out).and_then(|_| fs::write(out.join("verdict.txt"), &text)) {
        return fail(&e.into());
    }
    ExitCode::from(if passed == outcomes.len() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { file } => run(file, &cli.out),
        Command::Sweep { file, param, values } => sweep(file, param, values, &cli.out, cli.threads),
        Command::Verify => verify(&cli.out),
    }
}
