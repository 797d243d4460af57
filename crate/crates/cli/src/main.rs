use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use secureplan_core::abstraction::SecurityMode;
use secureplan_core::pipeline::{
    build_abstraction, names, nba_hoa, plan, plan_json, trajectory_csv, validate_report, verify_path, verify_plan, PipelineError,
    PlanOutcome, Timings,
};
use secureplan_core::scenario::Scenario;

#[derive(Parser)]
#[command(name = "secureplan", version, about = "Security-aware multi-agent LTL planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Directory for written artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's security mode: none, A, B or AB.
    #[arg(long)]
    security: Option<SecurityMode>,
    /// Overrides the scenario's prefix weight.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Checks the scenario and reports its geometry.
    Validate(Common),
    /// Builds the secure system and reports its size.
    Abstract(Common),
    /// Plans and writes plan.json, trajectory.csv and report.json.
    Plan(Common),
    /// Checks a given path, or re-checks a fresh plan when no path is given.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Explicit path such as "(D,E)->(E,B)".
        #[arg(long)]
        path: Option<String>,
    },
    /// Everything `plan` and `verify` write, plus the automaton in HOA format.
    ExportAll(Common),
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| PipelineError::Usage(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

struct Run {
    scenario: Scenario,
    mode: SecurityMode,
    beta: f64,
    out: PathBuf,
    timings: Timings,
}

impl Run {
    fn new(c: &Common) -> Result<Self, PipelineError> {
        let scenario = Scenario::load(&c.scenario)?;
        let mode = c.security.unwrap_or(scenario.security);
        let beta = c.beta.unwrap_or(scenario.params.beta);
        Ok(Run { scenario, mode, beta, out: c.out.clone(), timings: Timings::default() })
    }

    fn report(&self, extra: Value) -> Result<(), PipelineError> {
        let mut v = json!({"scenario": self.scenario.name, "timings": self.timings.0});
        if let (Value::Object(a), Value::Object(b)) = (&mut v, extra) {
            a.extend(b);
        }
        write(&self.out, "report.json", &pretty(&v))
    }

    fn plan(&mut self) -> Result<PlanOutcome, PipelineError> {
        let out = plan(&self.scenario, self.mode, self.beta, &mut self.timings)?;
        write(&self.out, "plan.json", &pretty(&plan_json(&self.scenario, &out)))?;
        if let Some(b) = &out.bundle {
            write(&self.out, "trajectory.csv", &trajectory_csv(&self.scenario, b))?;
        }
        Ok(out)
    }

    fn verify(&self, out: &PlanOutcome) -> Result<Value, PipelineError> {
        let v = verify_plan(&self.scenario, out)?;
        let value = serde_json::to_value(&v).expect("verdict serializes");
        if !v.passed {
            return Err(PipelineError::Internal(format!("plan failed re-verification: {value}")));
        }
        Ok(value)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Validate(c) => {
            let run = Run::new(&c)?;
            let report = validate_report(&run.scenario);
            print!("{}", pretty(&report));
            run.report(json!({"validate": report}))
        }
        Command::Abstract(c) => {
            let mut run = Run::new(&c)?;
            let a = build_abstraction(&run.scenario, run.mode, &mut run.timings)?;
            let report = a.report();
            print!("{}", pretty(&report));
            run.report(json!({"abstraction": report}))
        }
        Command::Plan(c) => {
            let mut run = Run::new(&c)?;
            let out = run.plan()?;
            println!("J = {} (prefix {}, suffix {})", out.plan.j, out.plan.j_prefix, out.plan.j_suffix);
            run.report(json!({"abstraction": out.abstraction.report()}))
        }
        Command::Verify { common, path: Some(path) } => {
            let run = Run::new(&common)?;
            let (p, verdict) = verify_path(&run.scenario, &path)?;
            let v = json!({
                "path": names(&run.scenario, &p),
                "type_a": {
                    "secure": verdict.type_a.secure,
                    "witness": names(&run.scenario, &verdict.type_a.witness),
                    "failed_step": verdict.type_a.failed_step,
                },
                "type_b": verdict.type_b,
            });
            print!("{}", pretty(&v));
            Ok(())
        }
        Command::Verify { common, path: None } => {
            let mut run = Run::new(&common)?;
            let out = run.plan()?;
            let v = run.verify(&out)?;
            print!("{}", pretty(&v));
            run.report(json!({"abstraction": out.abstraction.report(), "verification": v}))
        }
        Command::ExportAll(c) => {
            let mut run = Run::new(&c)?;
            let out = run.plan()?;
            write(&run.out, "nba.hoa", &nba_hoa(&run.scenario, &out.nba))?;
            let v = run.verify(&out)?;
            run.report(json!({
                "validate": validate_report(&run.scenario),
                "abstraction": out.abstraction.report(),
                "verification": v,
            }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SECUREPLAN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
