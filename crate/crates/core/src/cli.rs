//! Command-line harness: single runs, sweeps and studies, with CSV/JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lqg::{closed_loop_spectral_radius, solve_gains};
use crate::policy::Strategy;
use crate::sim::{
    aoa_benchmark, compute_metrics_pooled, run_batch, run_controlled_error, run_nlos_study, run_sampling_sweep,
    sweep_follower_speed, sweep_leader_speed, write_cdf, MultipathScenario, Scenario, SparsityPattern, SpeedSweepRow,
};
use crate::tdoa::LinkModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "arrest", version, about = "RSSI leader-tracking simulator")]
pub struct Cli {
    /// Scenario JSON; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 50)]
    pub episodes: usize,
    /// Omit the `# generated` header line from CSV outputs.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run episodes of one scenario; writes per-episode logs, metrics and CDFs.
    Run,
    /// Mean distance against Leader speed.
    SweepLeaderSpeed(LeaderSweepArgs),
    /// Mean distance against the Follower cap.
    SweepFollowerSpeed(FollowerSweepArgs),
    /// Tracking with biased ground-truth observations.
    ControlledError(ControlledArgs),
    /// Estimation error against samples per revolution.
    SamplingRate(SamplingArgs),
    /// Success rate behind a wall, with and without randomized escape.
    NlosStudy(NlosArgs),
    /// Simulated ultrasound ranging accuracy.
    TdoaCheck(TdoaArgs),
    /// Print the stationary Kalman and LQR gains.
    Gains,
    /// AoA estimator comparison on sparse sweeps.
    AoaBenchmark(AoaArgs),
}

#[derive(Debug, Args)]
pub struct LeaderSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5,3")]
    pub speeds: Vec<f64>,
    /// Follower cap as a multiple of the Leader speed.
    #[arg(long, default_value_t = 1.8)]
    pub ratio: f64,
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "pragmatic,optimistic,baseline")]
    pub strategies: Vec<Strategy>,
}

#[derive(Debug, Args)]
pub struct FollowerSweepArgs {
    #[arg(long, default_value_t = 1.0)]
    pub v_l: f64,
    #[arg(long, value_delimiter = ',', default_value = "1.2,1.6,2,2.4,2.8,3.2")]
    pub ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "pragmatic,optimistic,baseline")]
    pub strategies: Vec<Strategy>,
}

#[derive(Debug, Args)]
pub struct ControlledArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
    pub distance_biases: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-60,-30,0,30,60")]
    pub angle_biases_deg: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub distance_sigma: f64,
    #[arg(long, default_value_t = 5.0)]
    pub angle_sigma_deg: f64,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long, value_delimiter = ',', default_value = "200,100,80,60,40")]
    pub rates: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    pub distance: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct NlosArgs {
    /// Used when the config leaves the scenario as line of sight.
    #[arg(long, default_value = "weak-multipath", value_parser = parse_multipath)]
    pub multipath: MultipathScenario,
}

#[derive(Debug, Args)]
pub struct TdoaArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub loss_prob: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AoaArgs {
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    /// Use the configured sparsity model instead of batched gaps.
    #[arg(long)]
    pub model_sparsity: bool,
}

fn parse_kebab<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string())).map_err(|e| e.to_string())
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    parse_kebab(s)
}

fn parse_multipath(s: &str) -> std::result::Result<MultipathScenario, String> {
    parse_kebab(s)
}

/// Exit status for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::NonFinite(_) => EXIT_CONFIG,
        Error::SolverFailure { .. } => EXIT_SOLVER,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        _ => EXIT_OTHER,
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    timestamp: bool,
}

impl Output<'_> {
    /// Write via a temporary file in the same directory, then rename.
    fn write(&self, name: &str, body: &[u8]) -> Result<()> {
        fs::create_dir_all(self.dir)?;
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn csv(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        if self.timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            writeln!(buf, "# generated {secs}")?;
        }
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    fn rows<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        self.csv(name, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.write(name, &body)
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.world.seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn speed_summary(rows: &[SpeedSweepRow]) -> String {
    rows.iter()
        .map(|r| format!("{:?}@{}: {:.2}", r.strategy, r.v_l_max, r.mean_distance).to_lowercase())
        .collect::<Vec<_>>()
        .join("  ")
}

/// Run the parsed command; returns the one-line summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let scenario = load_scenario(cli)?;
    let seed = scenario.world.seed;
    let episodes = cli.episodes;
    let out = Output {
        dir: &cli.out,
        timestamp: !cli.no_timestamp,
    };
    match &cli.command {
        Command::Run => {
            let logs = run_batch(&scenario, episodes, seed)?;
            for log in &logs {
                out.csv(&format!("episode_{:04}.csv", log.episode), |buf| log.write_csv(buf))?;
            }
            let m = compute_metrics_pooled(&logs, scenario.world.d_th)?;
            out.json("metrics.json", &MetricsSummary::from(&m))?;
            for (name, cdf) in [
                ("cdf_distance.csv", &m.distance),
                ("cdf_distance_error.csv", &m.distance_error),
                ("cdf_angle_error.csv", &m.angle_error_deg),
                ("cdf_speed_error.csv", &m.speed_error),
            ] {
                out.csv(name, |buf| write_cdf(buf, cdf))?;
            }
            Ok(m.summary())
        }
        Command::SweepLeaderSpeed(a) => {
            let rows = sweep_leader_speed(&scenario, &a.speeds, a.ratio, &a.strategies, episodes, seed)?;
            out.rows("leader_speed.csv", &rows)?;
            Ok(speed_summary(&rows))
        }
        Command::SweepFollowerSpeed(a) => {
            let rows = sweep_follower_speed(&scenario, a.v_l, &a.ratios, &a.strategies, episodes, seed)?;
            out.rows("follower_speed.csv", &rows)?;
            Ok(rows
                .iter()
                .map(|r| format!("{:?}@{:.1}x: {:.2}", r.strategy, r.v_f_max / r.v_l_max, r.mean_distance).to_lowercase())
                .collect::<Vec<_>>()
                .join("  "))
        }
        Command::ControlledError(a) => {
            let mut biases: Vec<(f64, f64)> = a.distance_biases.iter().map(|&d| (d, 0.0)).collect();
            biases.extend(a.angle_biases_deg.iter().filter(|&&x| x != 0.0).map(|&x| (0.0, x.to_radians())));
            let rows = run_controlled_error(
                &scenario,
                &biases,
                a.distance_sigma,
                a.angle_sigma_deg.to_radians(),
                episodes,
                seed,
            )?;
            out.rows("controlled_error.csv", &rows)?;
            let best = rows
                .iter()
                .min_by(|x, y| x.mean_distance.total_cmp(&y.mean_distance))
                .ok_or_else(|| Error::InvalidArgument("no biases given".into()))?;
            Ok(format!(
                "{} settings; lowest mean distance {:.2} m at distance bias {} m, angle bias {} deg",
                rows.len(),
                best.mean_distance,
                best.distance_bias,
                best.angle_bias_deg
            ))
        }
        Command::SamplingRate(a) => {
            let rows = run_sampling_sweep(&scenario.world, &a.rates, a.distance, a.trials, seed)?;
            out.rows("sampling_rate.csv", &rows)?;
            Ok(rows
                .iter()
                .map(|r| format!("{}: {:.1} deg / {:.2} m", r.rate, r.angle_error_deg, r.distance_error))
                .collect::<Vec<_>>()
                .join("  "))
        }
        Command::NlosStudy(a) => {
            let mut s = scenario.clone();
            if s.world.multipath == MultipathScenario::Los {
                s.world.multipath = a.multipath;
            }
            if s.world.multipath == MultipathScenario::Los {
                return Err(Error::Config("nlos study needs a multipath scenario".into()));
            }
            let study = run_nlos_study(&s, episodes, seed)?;
            out.json("nlos_study.json", &study)?;
            Ok(format!(
                "success without escape {:.2}, with escape {:.2} ({} episodes, {} slots)",
                study.success_without, study.success_with, study.episodes, study.slots
            ))
        }
        Command::TdoaCheck(a) => {
            let mut link = LinkModel::default();
            if let Some(p) = a.loss_prob {
                link.loss_prob = p;
            }
            let check = crate::sim::tdoa_check(&link, a.trials, seed)?;
            out.json("tdoa_check.json", &check)?;
            Ok(format!(
                "{:.3} of trials within 0.20 m, p95 error {:.3} m, angle error steps {:?}, {} failures",
                check.within_20cm, check.distance_error_p95, check.angle_error_steps, check.failures
            ))
        }
        Command::Gains => {
            let cfg = scenario
                .controller_config()
                .ok_or_else(|| Error::Config("the baseline strategy has no controller".into()))?;
            let g = solve_gains(&cfg)?;
            let rho = closed_loop_spectral_radius(&cfg, &g);
            let report = GainsReport {
                k: rows_of(&g.k),
                l: rows_of(&g.l),
                filter_residual: g.filter_residual,
                control_residual: g.control_residual,
                iterations: g.iterations,
                spectral_radius: rho,
            };
            out.json("gains.json", &report)?;
            Ok(format!(
                "K = {:?}  L = {:?}  residuals {:.1e}/{:.1e}  spectral radius {:.4}",
                report.k, report.l, report.filter_residual, report.control_residual, rho
            ))
        }
        Command::AoaBenchmark(a) => {
            let pattern = if a.model_sparsity {
                SparsityPattern::Model
            } else {
                SparsityPattern::BatchedSparse
            };
            let b = aoa_benchmark(&scenario.world, pattern, a.trials, seed)?;
            out.json("aoa_benchmark.json", &b)?;
            Ok(format!(
                "median |error| deg: basic {:.2}, clustering {:.2}, weighted {:.2}",
                b.median_basic_deg, b.median_clustering_deg, b.median_weighted_deg
            ))
        }
    }
}

fn rows_of(m: &nalgebra::Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct GainsReport {
    k: [[f64; 3]; 3],
    l: [[f64; 3]; 3],
    filter_residual: f64,
    control_residual: f64,
    iterations: usize,
    spectral_radius: f64,
}

#[derive(Debug, Serialize)]
struct MetricsSummary {
    episodes: usize,
    slots: usize,
    d_th: f64,
    p_within: f64,
    mean_distance: f64,
    distance_error_p50: f64,
    distance_error_p90: f64,
    angle_error_deg_p50: f64,
    angle_error_deg_p90: f64,
    speed_error_p50: f64,
    speed_error_p90: f64,
    path_ratio_below_2: f64,
}

impl From<&crate::sim::Metrics> for MetricsSummary {
    fn from(m: &crate::sim::Metrics) -> Self {
        Self {
            episodes: m.episodes,
            slots: m.slots,
            d_th: m.d_th,
            p_within: m.p_within,
            mean_distance: m.mean_distance,
            distance_error_p50: m.distance_error.quantile(0.5),
            distance_error_p90: m.distance_error.quantile(0.9),
            angle_error_deg_p50: m.angle_error_deg.quantile(0.5),
            angle_error_deg_p90: m.angle_error_deg.quantile(0.9),
            speed_error_p50: m.speed_error.quantile(0.5),
            speed_error_p90: m.speed_error.quantile(0.9),
            path_ratio_below_2: m.path_ratio_below(2.0),
        }
    }
}
