use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rssi_doa::estimator::{Estimator, Method};
use rssi_doa::field_data::{
    self, array_sensor_ids, batch_observations, measured_pd_timeline, predicted_pd_timeline, window_counts,
    SweepSettings, WalkConfig, HARDWARE_FLOOR_DBM,
};
use rssi_doa::io;
use rssi_doa::likelihood::Grids;
use rssi_doa::patterns::{fit_pattern_wls, fit_residual, ArrayConfig, SensorPattern};
use rssi_doa::sim_harness::{
    default_array, rmse_circular, run_alpha_sweep, run_batch_sweep, run_pc_sweep, ScenarioConfig,
};
use rssi_doa::tracker::{track_sequence, AlphaReduction, FilterConfig};

use crate::args::*;
use crate::CliError;

/// Files read and written by one run.
#[derive(Debug, Default)]
pub struct Outputs {
    pub inputs: Vec<PathBuf>,
    pub files: Vec<String>,
}

pub struct Ctx<'a> {
    pub cli: &'a Cli,
    pub out_dir: &'a Path,
    pub outputs: Outputs,
}

impl Ctx<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.outputs.files.push(name.to_string());
        let path = self.out_dir.join(name);
        let f =
            File::create(&path).map_err(|e| CliError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Ok(BufWriter::new(f))
    }

    fn input(&mut self, path: &Path) -> Result<File, CliError> {
        self.outputs.inputs.push(path.to_path_buf());
        File::open(path).map_err(|e| CliError::Io { path: path.display().to_string(), msg: e.to_string() })
    }

    fn patterns(&mut self, path: &Path) -> Result<Vec<SensorPattern<f64>>, CliError> {
        let f = self.input(path)?;
        Ok(io::read_patterns(f, &path.display().to_string())?)
    }

    fn array(&mut self, path: &Path) -> Result<ArrayConfig<f64>, CliError> {
        let patterns = self.patterns(path)?;
        let c = self.cli;
        Ok(ArrayConfig::uniform(patterns, c.sigma, c.gamma, c.pc)?)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn grids(g: &GridArgs) -> Result<Grids<f64>, CliError> {
    if !(g.psi_step > 0.0) {
        return Err(usage("--psi-step must be positive"));
    }
    let n = 360.0 / g.psi_step;
    if (n - n.round()).abs() > 1e-9 {
        return Err(usage("--psi-step must divide 360"));
    }
    let n_psi = n.round() as usize;
    if !(g.alpha_step > 0.0) || !(g.alpha_max >= g.alpha_min) {
        return Err(usage("alpha grid needs a positive step and --alpha-max >= --alpha-min"));
    }
    if n_psi == 360 && g.alpha_min == -100.0 && g.alpha_max == 0.0 && g.alpha_step == 0.2 {
        return Ok(Grids::standard());
    }
    Ok(Grids::uniform(n_psi, g.alpha_min, g.alpha_max, g.alpha_step)?)
}

fn filter_config(f: &FilterArgs) -> Result<FilterConfig<f64>, CliError> {
    let cfg = FilterConfig {
        n_particles: f.particles,
        process_noise_q: f.process_noise_deg.to_radians().powi(2),
        reduction: match f.reduction {
            ReductionArg::Profile => AlphaReduction::Profile,
            ReductionArg::Marginal => AlphaReduction::Marginal,
        },
        ..FilterConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn methods(m: MethodArg) -> Vec<Method> {
    match m {
        MethodArg::Proposed => vec![Method::Proposed],
        MethodArg::Baseline => vec![Method::Baseline],
        MethodArg::Both => Method::BOTH.to_vec(),
    }
}

fn check_window(w: &WindowArgs) -> Result<(), CliError> {
    if !(w.window > 0.0) || !(w.rate > 0.0) {
        return Err(usage("--window and --rate must be positive"));
    }
    Ok(())
}

pub fn validate_globals(cli: &Cli) -> Result<(), CliError> {
    if !(cli.sigma > 0.0) || !cli.sigma.is_finite() {
        return Err(usage("--sigma must be positive"));
    }
    if !cli.gamma.is_finite() {
        return Err(usage("--gamma must be finite"));
    }
    if !(cli.pc > 0.0 && cli.pc <= 1.0) {
        return Err(usage("--pc must lie in (0, 1]"));
    }
    Ok(())
}

pub fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> Result<(), CliError> {
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    if a.batch == 0 || a.batch_sizes.contains(&0) {
        return Err(usage("batch sizes must be at least 1"));
    }
    if a.alpha.is_empty() {
        return Err(usage("--alpha needs at least one value"));
    }
    if a.pc_values.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(usage("--pc-values must lie in (0, 1]"));
    }
    if !(a.psi_true_step > 0.0) {
        return Err(usage("--psi-true-step must be positive"));
    }
    let cli = ctx.cli;
    let array = match &a.patterns {
        Some(p) => ctx.array(p)?,
        None => default_array(cli.sigma, cli.gamma, cli.pc)?,
    };
    let n_true = (360.0 / a.psi_true_step).ceil() as usize;
    let cfg = ScenarioConfig {
        array,
        grids: grids(&a.grid)?,
        alpha_levels: a.alpha.clone(),
        psi_values_deg: (0..n_true).map(|k| -180.0 + k as f64 * a.psi_true_step).collect(),
        mc_runs: a.runs,
        batch_size: a.batch,
        seed: cli.seed,
    };
    let res = match a.sweep {
        SweepArg::Alpha => run_alpha_sweep(&cfg)?,
        SweepArg::Pc => run_pc_sweep(&cfg, &a.pc_values)?,
        SweepArg::Batch => run_batch_sweep(&cfg, &a.batch_sizes, cli.pc)?,
    };
    io::write_records(ctx.create("results.csv")?, &res.records)?;
    io::write_aggregates(ctx.create("aggregate.csv")?, &res.aggregates)?;
    io::write_per_psi(ctx.create("per_psi.csv")?, &res.per_psi)?;
    for g in &res.aggregates {
        println!(
            "alpha={} pc={} batch={} method={} doa_rmse_deg={:.2} alpha_rmse_db={:.2} misses={:.2}",
            g.alpha_dbm, g.pc, g.batch, g.method, g.doa_rmse_mean, g.alpha_rmse, g.miss_mean
        );
    }
    Ok(())
}

pub fn fit_pattern(ctx: &mut Ctx, a: &FitPatternArgs) -> Result<(), CliError> {
    let f = ctx.input(&a.calibration)?;
    let rows = io::read_calibration(f, &a.calibration.display().to_string())?;
    if rows.is_empty() {
        return Err(CliError::Failed("calibration file has no rows".into()));
    }
    let mut patterns = Vec::new();
    let mut residuals = Vec::new();
    let mut failed = Vec::new();
    for (id, cells) in io::group_calibration(&rows) {
        let angles: Vec<f64> = cells.iter().map(|r| r.angle_deg.to_radians()).collect();
        let means: Vec<f64> = cells.iter().map(|r| r.mean_dbm).collect();
        let vars: Vec<f64> = cells.iter().map(|r| r.var_db2).collect();
        match fit_pattern_wls(id.clone(), &angles, &means, &vars, a.order) {
            Ok(p) => {
                residuals.push(fit_residual(&p, &angles, &means, &vars)?);
                patterns.push(p);
            }
            Err(e) => {
                eprintln!("{}", crate::error_line(&CliError::Core(e), Some(&id)));
                failed.push(id);
            }
        }
    }
    io::write_patterns(ctx.create("patterns.csv")?, &patterns)?;
    let rows: Vec<_> = patterns.iter().zip(&residuals).map(|(p, r)| io::ResidualRow::new(p, r)).collect();
    io::write_residuals(ctx.create("residuals.csv")?, &rows)?;
    for r in &rows {
        println!("sensor={} rms_db={:.4} weighted_rms={:.4}", r.sensor_id, r.rms_db, r.weighted_rms);
    }
    if !failed.is_empty() {
        return Err(CliError::Failed(format!("fit failed for sensors {}", failed.join(","))));
    }
    Ok(())
}

pub fn estimate(ctx: &mut Ctx, a: &EstimateArgs) -> Result<(), CliError> {
    let array = ctx.array(&a.patterns)?;
    let f = ctx.input(&a.observations)?;
    let epochs = io::read_observations(f, &a.observations.display().to_string(), &array)?;
    let est = Estimator::new(array, grids(&a.grid)?)?;
    let mut rows = Vec::new();
    for (id, obs) in &epochs {
        for method in methods(a.method) {
            let e = if a.export_grid {
                let grid = est.grid(obs, method.cost_kind())?;
                io::write_grid(ctx.create(&format!("grid_{id}_{method}.csv"))?, &grid)?;
                let (profile, e) = est.profile(obs, method)?;
                io::write_profile(ctx.create(&format!("profile_{id}_{method}.csv"))?, &profile)?;
                e
            } else {
                est.estimate(obs, method)?
            };
            rows.push(io::EstimateRow::new(*id, &e));
        }
    }
    io::write_estimates(ctx.create("estimates.csv")?, &rows)?;
    info!("{} epochs estimated", epochs.len());
    Ok(())
}

fn single_method(m: MethodArg) -> Result<Method, CliError> {
    match m {
        MethodArg::Proposed => Ok(Method::Proposed),
        MethodArg::Baseline => Ok(Method::Baseline),
        MethodArg::Both => Err(usage("track takes a single --method")),
    }
}

pub fn track(ctx: &mut Ctx, a: &TrackArgs) -> Result<(), CliError> {
    check_window(&a.window)?;
    let method = single_method(a.method)?;
    let config = filter_config(&a.filter)?;
    let array = ctx.array(&a.patterns)?;
    let f = ctx.input(&a.log)?;
    let log = field_data::read_rssi_log(f, &a.log.display().to_string())?;
    let truth = match &a.truth {
        Some(p) => {
            let f = ctx.input(p)?;
            Some(field_data::read_ground_truth(f, &p.display().to_string())?)
        }
        None => None,
    };
    let ids = array_sensor_ids(array.patterns());
    let epochs = batch_observations(&log, &ids, array.gamma(), a.window.window, a.window.rate)?;
    let est = Estimator::new(array.clone(), grids(&a.grid)?)?;
    let track = track_sequence(&epochs, &est, &config, method, ctx.cli.seed)?;
    let bearings: Option<Vec<Option<f64>>> =
        truth.as_ref().map(|t| track.iter().map(|p| t.bearing_at(p.timestamp)).collect());
    io::write_track(ctx.create("track.csv")?, &track, bearings.as_deref())?;

    if let (Some(truth), Some(b)) = (&truth, &bearings) {
        let mut pf = Vec::new();
        let mut ml = Vec::new();
        for (p, b) in track.iter().zip(b) {
            if let Some(b) = b {
                pf.push(p.psi_pf.to_degrees() - b);
                ml.push(p.psi_ml.to_degrees() - b);
            }
        }
        if !pf.is_empty() {
            let (rp, rm) = (rmse_circular(&pf)?, rmse_circular(&ml)?);
            println!("epochs={} rmse_pf_deg={rp:.3} rmse_ml_deg={rm:.3}", pf.len());
            let mut w = ctx.create("track_summary.csv")?;
            io::write_csv(&mut w, &[(pf.len(), rp, rm)], &["n_epochs", "rmse_pf_deg", "rmse_ml_deg"])?;
        }
        let counts = window_counts(&log, &ids, array.gamma(), a.window.window, a.window.rate)?;
        let hats: Vec<(f64, f64)> = track.iter().map(|p| (p.timestamp, p.alpha_hat)).collect();
        let predicted = predicted_pd_timeline(&hats, truth, &array)?;
        let measured = measured_pd_timeline(&counts);
        let mut rows = Vec::new();
        for ((p, pred), meas) in track.iter().zip(&predicted).zip(&measured) {
            let Some(pred) = pred else { continue };
            for (m, id) in ids.iter().enumerate() {
                rows.push((p.timestamp, id.as_str(), pred[m], meas[m]));
            }
        }
        io::write_csv(
            ctx.create("pd_timeline.csv")?,
            &rows,
            &["timestamp", "sensor_id", "predicted_pd", "measured_pd"],
        )?;
    }
    Ok(())
}

pub fn sweep_threshold(ctx: &mut Ctx, a: &SweepThresholdArgs) -> Result<(), CliError> {
    check_window(&a.window)?;
    if a.pf_seeds == 0 {
        return Err(usage("--pf-seeds must be at least 1"));
    }
    if a.gammas.is_empty() {
        return Err(usage("--gammas needs at least one value"));
    }
    if let Some(g) = a.gammas.iter().find(|g| !(**g >= HARDWARE_FLOOR_DBM)) {
        return Err(usage(format!("threshold {g} dBm lies below the hardware floor {HARDWARE_FLOOR_DBM} dBm")));
    }
    let config = filter_config(&a.filter)?;
    let array = ctx.array(&a.patterns)?;
    let f = ctx.input(&a.log)?;
    let log = field_data::read_rssi_log(f, &a.log.display().to_string())?;
    let f = ctx.input(&a.truth)?;
    let truth = field_data::read_ground_truth(f, &a.truth.display().to_string())?;
    let settings = SweepSettings {
        window: a.window.window,
        expected_rate: a.window.rate,
        n_seeds: a.pf_seeds,
        seed: ctx.cli.seed,
        grids: grids(&a.grid)?,
    };
    let points = field_data::threshold_sweep_eval(&log, &truth, &array, &a.gammas, &config, &settings)?;
    io::write_threshold_summary(ctx.create("threshold_summary.csv")?, &points)?;
    for p in &points {
        println!(
            "gamma={} missed_pct={:.1} proposed_rmse_deg={:.2} baseline_rmse_deg={:.2}",
            p.gamma, p.pct_missed, p.proposed.rmse_mean, p.baseline.rmse_mean
        );
    }
    Ok(())
}

pub fn synth_walk(ctx: &mut Ctx, a: &SynthWalkArgs) -> Result<(), CliError> {
    if !(a.duration > 0.0) {
        return Err(usage("--duration must be positive"));
    }
    let cfg =
        WalkConfig { duration_s: a.duration, alpha_ref: a.alpha_ref, sigma: ctx.cli.sigma, ..WalkConfig::default() };
    let (log, truth, array) = field_data::synthetic_walk(&cfg, ctx.cli.seed)?;
    field_data::write_rssi_log(ctx.create("rssi_log.csv")?, &log)?;
    field_data::write_ground_truth(ctx.create("truth.csv")?, &truth)?;
    io::write_patterns(ctx.create("patterns.csv")?, array.patterns())?;
    println!("records={} sensors={}", log.len(), array.len());
    Ok(())
}
