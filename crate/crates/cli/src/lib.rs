//! The `colonies` command-line tool: single trajectories, estimator runs,
//! method comparisons and figure data, all written as CSV.

pub mod args;
pub mod config;
pub mod figures;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::Parser;
use colonies_core::{
    compare_methods, estimate_many, DirectSimulator, EstimateReport, EstimatorOptions, Functional, Method, ModelError,
    PathRecorder, RngStream, SpinalSimulator,
};

use args::{Cli, Command, CompareArgs, EstimateArgs, MethodChoice, SimulateArgs};

/// Header of the estimate report.
pub const ESTIMATE_HEADER: [&str; 8] = [
    "method",
    "functional",
    "t",
    "estimate",
    "std_error",
    "n_traj",
    "wall_ms",
    "seed",
];

pub const COMPARE_HEADER: [&str; 13] = [
    "method",
    "functional",
    "t",
    "estimate",
    "std_error",
    "sample_variance",
    "n_traj",
    "wall_ms",
    "seed",
    "reference",
    "reference_kind",
    "relative_error",
    "efficiency_ratio",
];

pub const ORACLE_HEADER: [&str; 5] = ["t", "quantity", "lower", "upper", "point"];

const DEFAULT_GAMMA: f64 = 0.9;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, values or parameters; exit status 1.
    Input(String),
    /// Failure while running or writing output; exit status 2.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit status.
pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    match config::merge_config(argv.into_iter().collect()) {
        Ok(argv) => match Cli::try_parse_from(argv) {
            Ok(cli) => match execute(cli) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.code()
                }
            },
            Err(e) => {
                let _ = e.print();
                if e.use_stderr() {
                    1
                } else {
                    0
                }
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Estimate(args) => estimate(&args),
        Command::Compare(args) => compare(&args),
        Command::Figure(args) => figures::run_figure(&args),
    })
}

/// Standard output for `None` or "-", otherwise the named file.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = &args.model;
    let params = model.params()?;
    let init = model.initial_state()?;
    let grid = args.grid.or((model.t > 0.0).then(|| model.t / 100.0));
    let mut recorder = PathRecorder::new(grid);
    let mut rng = RngStream::new(model.seed, 0);
    let spinal = match args.method {
        MethodChoice::Direct => {
            DirectSimulator::new(&params)?.run(&init, model.t, &mut rng, &mut recorder)?;
            false
        }
        MethodChoice::Spinal => {
            SpinalSimulator::new(&params, args.spinal_mode.into())?.run(&init, model.t, &mut rng, &mut recorder)?;
            true
        }
        MethodChoice::Both => return Err(CliError::Input("simulate takes --method direct or spinal".into())),
    };
    let mut out = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    if spinal {
        out.write_record(["time", "label", "trait", "spine"])?;
    } else {
        out.write_record(["time", "label", "trait"])?;
    }
    for row in recorder.rows() {
        let mut record = vec![row.time.to_string(), row.label.clone(), row.trait_value.to_string()];
        if let Some(is_spine) = row.spine {
            record.push(u8::from(is_spine).to_string());
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Expands functional names; a bare `concentration_tail` yields one
/// functional per threshold.
pub fn resolve_functionals(names: &[String], gammas: &[f64]) -> Result<Vec<Functional>, CliError> {
    let gammas = if gammas.is_empty() {
        vec![DEFAULT_GAMMA]
    } else {
        gammas.to_vec()
    };
    if names.is_empty() {
        return Ok(Functional::registry(&gammas));
    }
    let mut out = Vec::new();
    for name in names {
        if name.trim() == "concentration_tail" {
            for &g in &gammas {
                let f = Functional::ConcentrationTail(g);
                out.push(f.to_string().parse()?);
            }
        } else {
            out.push(name.parse()?);
        }
    }
    Ok(out)
}

fn methods(choice: MethodChoice) -> Vec<Method> {
    match choice {
        MethodChoice::Direct => vec![Method::Direct],
        MethodChoice::Spinal => vec![Method::Spinal],
        MethodChoice::Both => vec![Method::Direct, Method::Spinal],
    }
}

/// One estimate CSV row; wall time is written as 0 unless `timing`.
pub fn estimate_record(report: &EstimateReport, timing: bool) -> [String; 8] {
    [
        report.method.to_string(),
        report.functional.to_string(),
        report.t.to_string(),
        report.estimate.to_string(),
        report.std_error.to_string(),
        report.n_traj.to_string(),
        if timing {
            format!("{:.3}", report.wall_ms)
        } else {
            "0".into()
        },
        report.seed.to_string(),
    ]
}

fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let model = &args.model;
    let params = model.params()?;
    let init = model.initial_state()?;
    let functionals = resolve_functionals(&args.functionals, &args.gammas)?;
    let options = EstimatorOptions {
        spinal_mode: args.spinal_mode.into(),
    };
    let mut reports = Vec::new();
    for method in methods(args.method) {
        reports.extend(estimate_many(
            &functionals,
            method,
            &params,
            &init,
            model.t,
            args.trajectories,
            model.seed,
            options,
        )?);
    }
    let mut out = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    out.write_record(ESTIMATE_HEADER)?;
    for report in &reports {
        out.write_record(estimate_record(report, args.timing))?;
        if report.non_finite > 0 {
            eprintln!(
                "warning: {} of {} {} contributions to {} were not finite",
                report.non_finite, report.n_traj, report.method, report.functional
            );
        }
        if args.simulate_f32_accumulation {
            eprintln!(
                "f32 overflow: {} of {} {} contributions to {} exceed single precision",
                report.f32_overflows, report.n_traj, report.method, report.functional
            );
        }
    }
    out.flush()?;
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let model = &args.model;
    let params = model.params()?;
    let init = model.initial_state()?;
    let functional = match resolve_functionals(std::slice::from_ref(&args.functional), &[])?.as_slice() {
        [f] => *f,
        _ => return Err(CliError::Input("compare takes exactly one functional".into())),
    };
    let n_spinal = args.trajectories_spinal.unwrap_or(args.trajectories);
    let cmp = compare_methods(
        functional,
        &params,
        &init,
        model.t,
        args.trajectories,
        n_spinal,
        model.seed,
    )?;
    let mut out = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    out.write_record(COMPARE_HEADER)?;
    let kind = if cmp.reference_is_analytic {
        "analytic"
    } else {
        "pooled"
    };
    for (report, rel) in [
        (&cmp.direct, cmp.relative_error_direct),
        (&cmp.spinal, cmp.relative_error_spinal),
    ] {
        out.write_record([
            report.method.to_string(),
            report.functional.to_string(),
            report.t.to_string(),
            report.estimate.to_string(),
            report.std_error.to_string(),
            report.sample_variance.to_string(),
            report.n_traj.to_string(),
            format!("{:.3}", report.wall_ms),
            report.seed.to_string(),
            cmp.reference.to_string(),
            kind.to_owned(),
            rel.to_string(),
            cmp.efficiency_ratio.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
