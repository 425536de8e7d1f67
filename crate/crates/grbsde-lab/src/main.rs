//! Command-line front end: `run` executes a scenario, `converge` sweeps mesh
//! refinements against an oracle, `list` prints the bundled catalog.
//!
//! Exit codes: 0 all checks pass, 1 a check failed (reports still written),
//! 2 configuration or I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grbsde_lab::{
    bundled_scenario, run_scenario, write_convergence_csv, write_panel_csv, ConvergenceRow,
    OutputKind, Scenario, ScenarioReport, BUNDLED,
};

#[derive(Parser)]
#[command(
    name = "grbsde-lab",
    about = "Numerical laboratory for generalized reflected BSDEs with stochastic quadratic growth"
)]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV panels and JSON reports.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Rayon worker threads (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Validate and print the resolved scenario without running it.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON file or a bundled name.
    Run { config: String },
    /// Re-run a scenario across mesh refinements and tabulate Y0 errors.
    Converge {
        config: String,
        /// Comma-separated step counts, e.g. 10,20,40,80.
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
    },
    /// List the bundled scenarios.
    List,
}

/// stdout may be a closed pipe (`... | head`); drop the line instead of
/// panicking so exit codes stay meaningful for scripts.
fn say(line: String) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none()
}

fn paint(text: &str, code: &str) -> String {
    if color_enabled() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn load_scenario(config: &str) -> Result<Scenario, grbsde::Error> {
    let path = Path::new(config);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| grbsde::Error::Config(format!("cannot read {config}: {e}")))?;
        Scenario::from_json(&text)
    } else {
        bundled_scenario(config)
    }
}

fn cmd_run(scenario: &Scenario, cli: &Cli) -> Result<bool, grbsde::Error> {
    let art = run_scenario(scenario, cli.seed)?;
    let report = ScenarioReport::from_run(&scenario.name, scenario.ensemble.n_paths, &art);

    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| grbsde::Error::Config(format!("cannot create out dir: {e}")))?;
    if scenario.outputs.contains(&OutputKind::Panel) {
        if let Some(panel) = &art.panel {
            let path = cli.out_dir.join(format!("{}_panel.csv", scenario.name));
            write_panel_csv(&path, &art.mesh, panel, art.d)?;
        }
    }
    if scenario.outputs.contains(&OutputKind::Report) {
        let path = cli.out_dir.join(format!("{}_report.json", scenario.name));
        report.write(&path)?;
    }

    for check in &art.checks {
        let status = if check.passed {
            paint("PASS", "32")
        } else {
            paint("FAIL", "31")
        };
        say(format!(
            "[{status}] {:<32} value {:>12.6e}  tolerance {:>12.6e}",
            check.name, check.value, check.tolerance
        ));
    }
    say(format!(
        "{}: {} checks, runtime {:.2}s",
        scenario.name,
        art.checks.len(),
        art.runtime_s
    ));
    Ok(art.all_passed())
}

fn cmd_converge(scenario: &Scenario, steps: &[usize], cli: &Cli) -> Result<bool, grbsde::Error> {
    if scenario.oracle.is_none() {
        return Err(grbsde::Error::Config(
            "convergence sweep needs a scenario with an oracle".into(),
        ));
    }
    let mut rows = Vec::with_capacity(steps.len());
    for &n in steps {
        let mut refined = scenario.clone();
        refined.mesh.n_steps = n;
        if let Some(grbsde_lab::OracleConfig::Tree { n_steps }) = &mut refined.oracle {
            *n_steps = n.min(20);
        }
        let art = run_scenario(&refined, cli.seed)?;
        let panel = art
            .panel
            .as_ref()
            .ok_or_else(|| grbsde::Error::Config("convergence sweep needs a solver".into()))?;
        let oracle = art.oracle.as_ref().unwrap();
        let skor = panel
            .diagnostics
            .skorokhod_lower
            .iter()
            .chain(&panel.diagnostics.skorokhod_upper)
            .cloned()
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            n_steps: n,
            y0_error: (panel.y0_mean() - oracle.y0).abs(),
            skorokhod_residual: skor,
            runtime_s: art.runtime_s,
        });
        say(format!(
            "n_steps {:>5}  y0_error {:.6e}  skorokhod {:.3e}  runtime {:.2}s",
            n,
            rows.last().unwrap().y0_error,
            skor,
            art.runtime_s
        ));
    }
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| grbsde::Error::Config(format!("cannot create out dir: {e}")))?;
    let path = cli.out_dir.join(format!("{}_convergence.csv", scenario.name));
    write_convergence_csv(&path, &rows)?;

    // Errors must decay along the refinement, give or take a noise margin.
    let mut decaying = true;
    for w in rows.windows(2) {
        if w[1].y0_error > 1.10 * w[0].y0_error + 1e-12 {
            decaying = false;
            say(format!(
                "{}: error grew from {:.3e} (n = {}) to {:.3e} (n = {})",
                paint("WARN", "33"),
                w[0].y0_error,
                w[0].n_steps,
                w[1].y0_error,
                w[1].n_steps
            ));
        }
    }
    Ok(decaying)
}

fn cmd_list() {
    say("bundled scenarios:".into());
    for (name, text) in BUNDLED {
        let description = Scenario::from_json(text)
            .map(|s| s.description)
            .unwrap_or_else(|_| "<unparseable>".into());
        say(format!("  {name:<26} {description}"));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let outcome = match &cli.command {
        Command::List => {
            cmd_list();
            Ok(true)
        }
        Command::Run { config } => load_scenario(config).and_then(|scenario| {
            scenario.validate()?;
            if cli.dry_run {
                say(serde_json::to_string_pretty(&scenario).expect("scenario serializes"));
                Ok(true)
            } else {
                cmd_run(&scenario, &cli)
            }
        }),
        Command::Converge { config, steps } => load_scenario(config).and_then(|scenario| {
            scenario.validate()?;
            if cli.dry_run {
                say(format!("would sweep {} over steps {steps:?}", scenario.name));
                Ok(true)
            } else {
                cmd_converge(&scenario, steps, &cli)
            }
        }),
    };

    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
