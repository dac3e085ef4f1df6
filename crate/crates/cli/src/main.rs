use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gamma_lab_cli::run::{execute, write_artifacts};
use gamma_lab_cli::{settings_from_args, Args, CliError, ExperimentPlan};

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GAMMA_LAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("GAMMA_LAB_THREADS: bad value `{v}`")))?;
    if n == 0 {
        return Err(CliError::Config("GAMMA_LAB_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn init_log(dir: &PathBuf) -> Result<(), CliError> {
    let file = fs::File::create(dir.join("run.log"))?;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(file)))
        .try_init()
        .map_err(|e| CliError::Io(format!("logger: {e}")))
}

fn main_inner(args: &Args, out: &mut PathBuf) -> Result<Option<CliError>, CliError> {
    init_threads()?;
    let settings = settings_from_args(args)?;
    if let Some(d) = settings.get("output.dir") {
        *out = PathBuf::from(d);
    }
    fs::create_dir_all(&*out)?;
    let plan = ExperimentPlan::resolve(args.command, settings)?;
    init_log(out)?;
    log::info!("gamma-lab {}", gamma_lab::VERSION);
    for line in plan.config_text().lines() {
        log::info!("config {line}");
    }
    let mut artifacts = execute(&plan)?;
    write_artifacts(&plan, &artifacts)?;
    print!("{}", artifacts.text);
    log::info!("done");
    Ok(artifacts.failure.take())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let err = match main_inner(&args, &mut out) {
        Ok(None) => return ExitCode::SUCCESS,
        Ok(Some(e)) | Err(e) => e,
    };
    let record = err.record();
    let _ = writeln!(std::io::stderr(), "{record}");
    if fs::create_dir_all(&out).is_ok() {
        let _ = fs::write(out.join("error.json"), record + "\n");
    }
    log::error!("{err}");
    ExitCode::from(err.exit_code() as u8)
}
