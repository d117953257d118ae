//! Parameter sweeps behind the standard figures. Each figure writes a data
//! CSV and an oracle CSV (`t,quantity,lower,upper,point`) with the matching
//! closed-form references; long-time limits use `t = inf`.

use std::path::Path;
use std::time::Instant;

use colonies_core::estimators::{PairAccumulator, CHUNK_SIZE};
use colonies_core::oracles::{
    mean_popsize_bounds, spinal_stationary_popsize, spine_fraction_bounds, variance_resource_bounds_for, BoundPair,
    OracleRow,
};
use colonies_core::{
    compare_methods, estimate, DirectSimulator, Functional, Method, ModelParams, NoPath, PathSink, PopulationState,
    RngStream, SplitLaw,
};
use rayon::prelude::*;

use crate::args::FigureArgs;
use crate::{open_output, CliError, ORACLE_HEADER};

pub const FIG1_LAMBDAS: [f64; 4] = [1.0, 3.0, 6.0, 10.0];
pub const FIG1_MU: f64 = 1.0;
pub const FIG1_N0: usize = 1;

/// 0, 0.5, …, 8.
pub fn fig1_times() -> Vec<f64> {
    (0..=16).map(|k| 0.5 * k as f64).collect()
}

pub const FIG2_R0: f64 = 15.0;
pub const FIG2_A: f64 = 5.0;
pub const FIG2_DELTA: f64 = 1.0;
pub const FIG2_LAMBDAS: [f64; 2] = [1.0, 10.0];
pub const FIG2_MUS: [f64; 2] = [0.5, 1.0];
pub const FIG2_SIGMAS: [f64; 2] = [0.5, 1.0];
pub const FIG2_TIMES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

pub const FIG3_LAMBDA: f64 = 3.0;
pub const FIG3_MU: f64 = 1.0;
pub const FIG3_A: f64 = 1.0;
pub const FIG3_N0: usize = 10;
pub const FIG3_R0: f64 = 10.0;
/// Values of σ²/(1+δ²), realised with δ = 0.
pub const FIG3_VARIANCES: [f64; 3] = [0.1, 1.0, 10.0];
pub const FIG3_TIMES: [f64; 3] = [1.0, 5.0, 10.0];
pub const FIG3_RANKS: usize = 10;

/// Panel, functional, end time and (a, σ, δ, λ, μ) of the comparison figure.
pub const FIG5_PANELS: [(&str, Functional, f64, [f64; 5]); 2] = [
    ("A", Functional::VarianceTotalResource, 2.0, [1.0, 1.0, 0.5, 1.0, 0.3]),
    ("B", Functional::SampledColonyTrait, 10.0, [1.0, 0.5, 0.5, 2.0, 0.5]),
];

pub fn fig2_params(lambda: f64, mu: f64, sigma: f64) -> ModelParams {
    ModelParams {
        a: FIG2_A,
        sigma,
        delta: FIG2_DELTA,
        lambda,
        mu,
        split_law: SplitLaw::Uniform,
    }
}

pub fn fig5_params(values: [f64; 5]) -> ModelParams {
    let [a, sigma, delta, lambda, mu] = values;
    ModelParams {
        a,
        sigma,
        delta,
        lambda,
        mu,
        split_law: SplitLaw::Uniform,
    }
}

/// Runs `n_traj` trajectories in fixed chunks, each filling `width`
/// accumulators, and merges the chunks in order.
pub fn parallel_tally<F>(n_traj: u64, width: usize, per_trajectory: F) -> Result<Vec<PairAccumulator>, CliError>
where
    F: Fn(u64, &mut [PairAccumulator]) -> Result<(), CliError> + Sync,
{
    let chunks: Vec<(u64, u64)> = (0..n_traj.div_ceil(CHUNK_SIZE))
        .map(|c| (c * CHUNK_SIZE, ((c + 1) * CHUNK_SIZE).min(n_traj)))
        .collect();
    let parts = chunks
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = vec![PairAccumulator::default(); width];
            for index in lo..hi {
                per_trajectory(index, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut total = vec![PairAccumulator::default(); width];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total)
}

/// Population size after every event.
#[derive(Default)]
struct CountLog {
    events: Vec<(f64, usize)>,
}

impl PathSink for CountLog {
    fn record(&mut self, state: &PopulationState, _: Option<usize>) {
        self.events.push((state.time(), state.n()));
    }
}

impl CountLog {
    fn count_at(&self, t: f64) -> usize {
        let after = self.events.partition_point(|&(time, _)| time <= t);
        self.events[after.saturating_sub(1)].1
    }
}

/// Mean and variance of N_t at each of the sorted `times` from direct
/// trajectories.
pub fn popsize_curve(
    params: &ModelParams,
    init: &PopulationState,
    times: &[f64],
    n_traj: u64,
    seed: u64,
) -> Result<Vec<PairAccumulator>, CliError> {
    let sim = DirectSimulator::new(params)?;
    let horizon = times.iter().copied().fold(init.time(), f64::max);
    parallel_tally(n_traj, times.len(), |index, acc| {
        let mut rng = RngStream::new(seed, index);
        let mut log = CountLog::default();
        sim.run(init, horizon, &mut rng, &mut log)?;
        for (a, &t) in acc.iter_mut().zip(times) {
            a.push(log.count_at(t) as f64, 0.0);
        }
        Ok(())
    })
}

/// Mean share of the k-th largest colony, k = 1..=ranks, over surviving
/// trajectories; missing ranks count as 0. Also returns the survivor count.
pub fn rank_shares(
    params: &ModelParams,
    init: &PopulationState,
    t: f64,
    ranks: usize,
    n_traj: u64,
    seed: u64,
) -> Result<(Vec<PairAccumulator>, u64), CliError> {
    let sim = DirectSimulator::new(params)?;
    let acc = parallel_tally(n_traj, ranks + 1, |index, acc| {
        let mut rng = RngStream::new(seed, index);
        let (state, _) = sim.run(init, t, &mut rng, &mut NoPath)?;
        acc[ranks].push(f64::from(u8::from(!state.is_extinct())), 0.0);
        if state.is_extinct() {
            return Ok(());
        }
        let mut traits: Vec<f64> = state.traits().collect();
        traits.sort_by(|x, y| y.total_cmp(x));
        for (k, a) in acc[..ranks].iter_mut().enumerate() {
            a.push(traits.get(k).map_or(0.0, |x| x / state.r()), 0.0);
        }
        Ok(())
    })?;
    let survivors = acc[0].count();
    Ok((acc[..ranks].to_vec(), survivors))
}

fn se(acc: &PairAccumulator) -> f64 {
    if acc.count() < 2 {
        return f64::NAN;
    }
    (acc.var_x() / acc.count() as f64).sqrt()
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

type Table = (Vec<&'static str>, Vec<Vec<String>>);

fn figure1(n_traj: u64, seed: u64) -> Result<(Table, Vec<OracleRow>), CliError> {
    let times = fig1_times();
    let init = PopulationState::uniform(FIG1_N0, FIG1_N0 as f64)?;
    let mut rows = Vec::new();
    let mut oracle = Vec::new();
    for &lambda in &FIG1_LAMBDAS {
        let params = ModelParams::new(1.0, 1.0, 1.0, lambda, FIG1_MU, SplitLaw::Uniform)?;
        let curve = popsize_curve(&params, &init, &times, n_traj, seed)?;
        for (&t, acc) in times.iter().zip(&curve) {
            rows.push(vec![
                fmt(lambda),
                fmt(t),
                fmt(acc.mean_x()),
                fmt(se(acc)),
                acc.count().to_string(),
            ]);
            let bounds = mean_popsize_bounds(FIG1_N0, lambda, FIG1_MU, t)?;
            oracle.push(OracleRow::bounds(
                t,
                &format!("mean_population_size[lambda={lambda}]"),
                &bounds,
            ));
        }
    }
    Ok(((vec!["lambda", "t", "estimate", "std_error", "n_traj"], rows), oracle))
}

fn figure2(n_traj: u64, seed: u64) -> Result<(Table, Vec<OracleRow>), CliError> {
    let init = PopulationState::uniform(1, FIG2_R0)?;
    let mut rows = Vec::new();
    let mut oracle = Vec::new();
    for &lambda in &FIG2_LAMBDAS {
        for &mu in &FIG2_MUS {
            for &sigma in &FIG2_SIGMAS {
                let params = fig2_params(lambda, mu, sigma);
                let tag = format!("variance_total_resource[lambda={lambda};mu={mu};sigma={sigma}]");
                for &t in &FIG2_TIMES {
                    for method in [Method::Direct, Method::Spinal] {
                        let r = estimate(
                            Functional::VarianceTotalResource,
                            method,
                            &params,
                            &init,
                            t,
                            n_traj,
                            seed,
                        )?;
                        rows.push(vec![
                            fmt(lambda),
                            fmt(mu),
                            fmt(sigma),
                            fmt(t),
                            method.to_string(),
                            fmt(r.estimate),
                            fmt(r.std_error),
                            r.n_traj.to_string(),
                        ]);
                    }
                    oracle.push(OracleRow::bounds(
                        t,
                        &tag,
                        &variance_resource_bounds_for(&params, &init, t)?,
                    ));
                }
            }
        }
    }
    let header = vec![
        "lambda",
        "mu",
        "sigma",
        "t",
        "method",
        "estimate",
        "std_error",
        "n_traj",
    ];
    Ok(((header, rows), oracle))
}

fn figure3(n_traj: u64, seed: u64) -> Result<(Table, Vec<OracleRow>), CliError> {
    let init = PopulationState::uniform(FIG3_N0, FIG3_R0)?;
    let mut rows = Vec::new();
    let mut oracle = Vec::new();
    for &variance in &FIG3_VARIANCES {
        let params = ModelParams::new(FIG3_A, variance.sqrt(), 0.0, FIG3_LAMBDA, FIG3_MU, SplitLaw::Uniform)?;
        for &t in &FIG3_TIMES {
            let (shares, survivors) = rank_shares(&params, &init, t, FIG3_RANKS, n_traj, seed)?;
            for (k, acc) in shares.iter().enumerate() {
                rows.push(vec![
                    fmt(variance),
                    fmt(t),
                    (k + 1).to_string(),
                    fmt(acc.mean_x()),
                    fmt(se(acc)),
                    survivors.to_string(),
                ]);
            }
        }
        let bounds: BoundPair = spine_fraction_bounds(&params)?;
        oracle.push(OracleRow::bounds(
            f64::INFINITY,
            &format!("spine_fraction[variance={variance}]"),
            &bounds,
        ));
    }
    let header = vec![
        "intrinsic_variance",
        "t",
        "rank",
        "mean_share",
        "std_error",
        "n_surviving",
    ];
    Ok(((header, rows), oracle))
}

/// 100, 1000, … below `n_traj`, then `n_traj` itself.
pub fn fig5_sizes(n_traj: u64) -> Vec<u64> {
    let mut sizes: Vec<u64> = std::iter::successors(Some(100u64), |n| n.checked_mul(10))
        .take_while(|&n| n < n_traj)
        .collect();
    sizes.push(n_traj.max(2));
    sizes
}

fn figure5(n_traj: u64, seed: u64) -> Result<(Table, Vec<OracleRow>), CliError> {
    let init = PopulationState::uniform(1, 1.0)?;
    let mut rows = Vec::new();
    let mut oracle = Vec::new();
    for (panel, functional, t, values) in FIG5_PANELS {
        let params = fig5_params(values);
        for n in fig5_sizes(n_traj) {
            let cmp = compare_methods(functional, &params, &init, t, n, n, seed)?;
            for (r, rel) in [
                (&cmp.direct, cmp.relative_error_direct),
                (&cmp.spinal, cmp.relative_error_spinal),
            ] {
                rows.push(vec![
                    panel.to_owned(),
                    functional.to_string(),
                    fmt(t),
                    r.method.to_string(),
                    n.to_string(),
                    fmt(r.estimate),
                    fmt(r.std_error),
                    format!("{:.3}", r.wall_ms),
                    fmt(rel),
                    fmt(cmp.efficiency_ratio),
                ]);
            }
        }
        match functional {
            Functional::VarianceTotalResource => {
                oracle.push(OracleRow::bounds(
                    t,
                    "variance_total_resource",
                    &variance_resource_bounds_for(&params, &init, t)?,
                ));
            }
            _ => {
                let law = spinal_stationary_popsize(params.lambda, params.mu)?;
                let long_time = init.r() * ((params.a - params.mu) * t).exp() * law.inverse_mean();
                oracle.push(OracleRow::point(t, "sampled_colony_trait_long_time", long_time));
            }
        }
    }
    let header = vec![
        "panel",
        "functional",
        "t",
        "method",
        "n_traj",
        "estimate",
        "std_error",
        "wall_ms",
        "relative_error",
        "efficiency_ratio",
    ];
    Ok(((header, rows), oracle))
}

fn build(id: u8, n_traj: u64, seed: u64) -> Result<(Table, Vec<OracleRow>), CliError> {
    match id {
        1 => figure1(n_traj, seed),
        2 => figure2(n_traj, seed),
        3 => figure3(n_traj, seed),
        5 => figure5(n_traj, seed),
        other => Err(CliError::Input(format!("figure must be 1, 2, 3 or 5, got {other}"))),
    }
}

const PILOT_TRAJECTORIES: u64 = 20;

pub fn run_figure(args: &FigureArgs) -> Result<(), CliError> {
    if args.trajectories < 2 {
        return Err(CliError::Input(format!(
            "need at least 2 trajectories, got {}",
            args.trajectories
        )));
    }
    if args.trajectories > 10 * PILOT_TRAJECTORIES {
        let start = Instant::now();
        build(args.id, PILOT_TRAJECTORIES, args.seed)?;
        let per_traj = start.elapsed().as_secs_f64() / PILOT_TRAJECTORIES as f64;
        eprintln!(
            "figure {}: estimated wall time {:.1} s",
            args.id,
            per_traj * args.trajectories as f64
        );
    }
    let ((header, rows), oracle) = build(args.id, args.trajectories, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    write_table(&args.out.join(format!("figure{}.csv", args.id)), &header, &rows)?;
    write_oracle(&args.out.join(format!("figure{}_oracle.csv", args.id)), &oracle)?;
    Ok(())
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(open_output(Some(path))?);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_oracle(path: &Path, rows: &[OracleRow]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(open_output(Some(path))?);
    out.write_record(ORACLE_HEADER)?;
    for row in rows {
        out.write_record([
            fmt(row.t),
            row.quantity.clone(),
            opt(row.lower),
            opt(row.upper),
            opt(row.point),
        ])?;
    }
    out.flush()?;
    Ok(())
}
