mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracosc::criteria::{run_criteria, CriteriaInput, CriterionId, CriterionReport, Verdict};
use fracosc::dde::{classify, solve, Trajectory};
use fracosc::fraccalc::{check_properties, Alpha};
use fracosc::scenarios::{load_named, verify, VerifyOptions};

use config::{ConfigError, Format, Loaded};

const EXIT_MISMATCH: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser)]
#[command(name = "fracosc", version, about = "Fractional delay systems: simulation and oscillation criteria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the system and classify the trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate oscillation criteria and write a JSON report.
    Criteria {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated criteria (A4, 3.1, 3.2, 3.3, 3.4, lem3.3, 3.5);
        /// defaults to A4,3.1.
        #[arg(long)]
        thm: Option<String>,
        /// Exit 4 when any verdict is inconclusive.
        #[arg(long)]
        strict: bool,
    },
    /// Check a built-in scenario against its expected results.
    Verify {
        scenario: String,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the fractional-derivative property suite.
    Properties {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

enum Failure {
    Config(String),
    Solver(String),
    Code(u8),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config } => cmd_simulate(&config),
        Command::Criteria {
            config,
            thm,
            strict,
        } => cmd_criteria(&config, thm.as_deref(), strict),
        Command::Verify { scenario, json } => cmd_verify(&scenario, json),
        Command::Properties {
            alpha,
            samples,
            tol,
        } => cmd_properties(alpha, samples, tol),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(Failure::Code(c)) => ExitCode::from(c),
    }
}

fn simulate(cfg: &Loaded) -> Result<Trajectory, Failure> {
    let sim = cfg
        .raw
        .simulate
        .as_ref()
        .ok_or_else(|| Failure::Config("missing [simulate] block".into()))?;
    let hist = cfg
        .history
        .as_ref()
        .ok_or_else(|| Failure::Config("missing [history] block".into()))?;
    let t_end = sim.t_end.value("t_end")?;
    cfg.check_assumptions(t_end)?;
    solve(&cfg.spec, hist, t_end, sim.dt).map_err(|e| Failure::Solver(e.to_string()))
}

fn cmd_simulate(path: &Path) -> Result<(), Failure> {
    let cfg = config::load(path)?;
    let traj = simulate(&cfg)?;
    let sim = cfg.raw.simulate.as_ref().expect("checked in simulate");
    let window = match &sim.window {
        Some([a, b]) => (a.value("window")?, b.value("window")?),
        None => (traj.t0(), traj.t_end()),
    };
    if cfg.wants(Format::Csv) {
        let out = cfg.output_path(&cfg.raw.output.trajectory, ".csv");
        output::write_trajectory(&out, &traj).map_err(|e| Failure::Config(e.to_string()))?;
        println!("trajectory: {} rows -> {}", traj.times().len(), out.display());
    }
    let class = if window.1 > window.0 {
        Some(classify(&traj, window, sim.min_crossings).map_err(|e| Failure::Solver(e.to_string()))?)
    } else {
        None
    };
    let block = output::SimulationSummary::new(&traj, class);
    match &block.classification {
        Some(c) => println!("classification: {:?}", c.verdict),
        None => println!("classification: window is empty"),
    }
    if traj.clamp_activations() > 0 {
        println!("f clamp activated {} times", traj.clamp_activations());
    }
    if cfg.wants(Format::Json) {
        let out = cfg.output_path(&cfg.raw.output.classification, ".class.json");
        output::write_json(&out, &block).map_err(|e| Failure::Config(e.to_string()))?;
        println!("classification -> {}", out.display());
    }
    Ok(())
}

fn parse_ids(list: Option<&str>) -> Result<Vec<CriterionId>, Failure> {
    match list {
        None => Ok(vec![CriterionId::A4, CriterionId::Thm31]),
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse().map_err(Failure::Config))
            .collect(),
    }
}

fn cmd_criteria(path: &Path, thm: Option<&str>, strict: bool) -> Result<(), Failure> {
    let cfg = config::load(path)?;
    let ids = parse_ids(thm)?;
    let rho = cfg.rho()?;
    let kernel = cfg.kernel(&rho)?;
    let needs_traj = ids.contains(&CriterionId::Thm34)
        || (ids.contains(&CriterionId::Thm35)
            && cfg.raw.criteria.thm35_variant == fracosc::criteria::Thm35Variant::State);
    let traj = if needs_traj { Some(simulate(&cfg)?) } else { None };
    let c = &cfg.raw.criteria;
    let input = CriteriaInput {
        spec: &cfg.spec,
        rho,
        kernel,
        horizons: c.horizons.clone(),
        t_grid: c.t_grid.clone(),
        thm35_variant: c.thm35_variant,
        trajectory: traj.as_ref().map(|t| t as &dyn fracosc::dde::StateFn),
        window: c.window.map(|[a, b]| (a, b)),
    };
    let results = run_criteria(&input, &ids, &cfg.probe_options());
    let mut reports = Vec::with_capacity(results.len());
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e @ fracosc::criteria::CriteriaError::Kernel(_)) => {
                return Err(Failure::Config(e.to_string()))
            }
            Err(e) => reports.push(CriterionReport::failed(*id, &e)),
        }
    }
    for r in &reports {
        println!("{:8} {:?}: {}", r.id.name(), r.verdict, r.conclusion);
    }
    let out = cfg.output_path(&cfg.raw.output.report, ".report.json");
    output::write_json(&out, &reports).map_err(|e| Failure::Config(e.to_string()))?;
    println!("report -> {}", out.display());
    if strict && reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        return Err(Failure::Code(EXIT_INCONCLUSIVE));
    }
    Ok(())
}

fn cmd_verify(name: &str, json: Option<PathBuf>) -> Result<(), Failure> {
    let sc = load_named(name).map_err(|e| Failure::Config(e.to_string()))?;
    let rep = verify(&sc, &VerifyOptions::default());
    print!("{}", rep.table());
    if let Some(path) = json {
        output::write_json(&path, &rep).map_err(|e| Failure::Config(e.to_string()))?;
    }
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Code(EXIT_MISMATCH))
    }
}

fn cmd_properties(alpha: f64, samples: usize, tol: f64) -> Result<(), Failure> {
    let alpha = Alpha::new(alpha).map_err(|e| Failure::Config(e.to_string()))?;
    let n = samples.max(1);
    // log-spaced over [0.5, 50]
    let grid: Vec<f64> = (0..n)
        .map(|i| 0.5 * 100f64.powf(i as f64 / (n.max(2) - 1) as f64))
        .collect();
    let report = check_properties(alpha, &grid);
    for p in &report.properties {
        println!(
            "{} {} (cases {}, max rel error {:.3e})",
            if p.holds(tol) { "PASS" } else { "FAIL" },
            p.name,
            p.cases,
            p.max_rel_error
        );
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Config(e.to_string()))?
    );
    if report.all_hold(tol) {
        Ok(())
    } else {
        Err(Failure::Code(EXIT_MISMATCH))
    }
}
