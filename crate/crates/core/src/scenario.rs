//! Scenario pipelines and their output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{RunConfig, Scenario};
use crate::correlations::{measure_correlations, sample_probes, CorrelationReport, CorrelationSpec};
use crate::ensemble::{
    asymptote_estimate, diagnostics, lz_limit, modified_lz_limit, variance_scan, EnsembleResult, InitialState,
    ScanPoint, Simulator,
};
use crate::error::{EslnError, Result};
use crate::kernels::TimeGrid;

pub const OBSERVABLES_HEADER: &str =
    "t,sx_mean,sx_err,sy_mean,sy_err,sz_mean,sz_err,trace_re,trace_im,trace_err";

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub files: Vec<PathBuf>,
    /// Set when the exclusion budget was exceeded.
    pub unreliable: bool,
    /// Human-readable headline numbers, also written to the meta file.
    pub summary: String,
}

pub fn run_scenario(config: &RunConfig) -> Result<ScenarioOutcome> {
    let start = Instant::now();
    let out = &config.out;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut unreliable = false;
    let mut run_stats = String::new();

    match config.scenario {
        Scenario::Correlations => {
            let sim = Simulator::new(&config.bath()?, &config.grid()?, &Default::default())?;
            let probes = sample_probes(sim.grid(), config.probe_lags, config.probe_seed);
            let spec = CorrelationSpec {
                n_samples: config.samples,
                master_seed: config.seed,
                n_workers: config.workers,
                scaling: config.scaling()?,
            };
            let report = measure_correlations(&sim, &probes, &spec)?;
            files.push(write_file(out, "correlations.csv", &correlations_csv(&report))?);
            writeln!(summary, "worst required deviation = {:.3} stderr", report.worst_required_z()).ok();
            writeln!(summary, "largest null magnitude = {:.3e}", report.max_null()).ok();
        }
        Scenario::Stationary | Scenario::Decay | Scenario::Lz => {
            let ens = config.ensemble()?;
            let sim = Simulator::new(&ens.bath, &ens.grid, &ens.quadrature)?;
            let res = sim.run(&ens.spec)?;
            unreliable = res.unreliable;
            run_stats = ensemble_stats(&res);
            files.push(write_file(out, "observables.csv", &observables_csv(&res))?);
            let last = res.sz.len() - 1;
            match config.scenario {
                Scenario::Stationary => {
                    let drift = res.sz.iter().map(|s| (s - res.sz[0]).abs()).fold(0.0, f64::max);
                    writeln!(summary, "sz(t0) = {}", res.sz[0]).ok();
                    writeln!(summary, "max |sz(t) - sz(t0)| = {drift}").ok();
                }
                Scenario::Decay => {
                    // Thermalised reference on a short grid with the same bath and seed.
                    let mut reference = ens;
                    reference.grid = TimeGrid::new(0.0, 10.0 * ens.grid.dt, ens.grid.dt, ens.bath.beta_hbar, ens.grid.dtau)?;
                    reference.spec.init = InitialState::Thermal;
                    let thermal = Simulator::new(&reference.bath, &reference.grid, &reference.quadrature)?
                        .run(&reference.spec)?;
                    let err = |r: &EnsembleResult, n: usize| r.stderr.as_ref().map_or(f64::NAN, |e| e.sz[n]);
                    writeln!(summary, "sz(t_max) = {} +- {}", res.sz[last], err(&res, last)).ok();
                    writeln!(summary, "thermal sz = {} +- {}", thermal.sz[0], err(&thermal, 0)).ok();
                }
                _ => {
                    let window = config.window(&ens.grid);
                    let a = asymptote_estimate(&res, window, config.window_batches)?;
                    let kappa = config
                        .kappa
                        .ok_or_else(|| EslnError::config("kappa", "the lz scenario needs a sweep rate"))?;
                    let limit = lz_limit(config.delta, kappa)?;
                    let modified = modified_lz_limit(config.delta, kappa, config.t0, config.t_max, config.dt)?;
                    let d = diagnostics(&ens.bath, &ens.spec.drive, &ens.grid)?;
                    let text = format!(
                        "window = [{}, {}]\nwindow_nodes = {}\nasymptote = {}\nasymptote_err = {}\n\
                         lz_limit = {limit}\nmodified_lz_limit = {}\ndelta_r = {}\nq = {}\n",
                        window.0, window.1, a.n_nodes, a.mean, a.stderr, modified.value, d.delta_r, d.q
                    );
                    files.push(write_file(out, "asymptote.txt", &text)?);
                    summary.push_str(&text);
                }
            }
        }
        Scenario::Calibrate => {
            let kappa = config
                .kappa
                .ok_or_else(|| EslnError::config("kappa", "calibration needs a sweep rate"))?;
            let limit = lz_limit(config.delta, kappa)?;
            let mut csv = String::from("t0,value,deviation,window_start,window_end\n");
            for &t0 in &config.t0_list {
                let c = modified_lz_limit(config.delta, kappa, t0, config.t_max, config.dt)?;
                writeln!(csv, "{t0},{},{},{},{}", c.value, c.value - limit, c.window.0, c.window.1).ok();
            }
            files.push(write_file(out, "calibration.csv", &csv)?);
            writeln!(summary, "lz_limit = {limit}").ok();
        }
        Scenario::VarianceScan => {
            let ens = config.ensemble()?;
            let scan = variance_scan(&ens, &config.r_list)?;
            files.push(write_file(out, "scan.csv", &scan_csv(&scan))?);
            let best = scan
                .iter()
                .filter_map(|p| p.stderr.map(|e| (p.r_nu_eta, e)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((r, e)) = best {
                writeln!(summary, "smallest final-trace stderr {e} at r_nu_eta = {r}").ok();
            }
        }
    }

    let meta = format!(
        "{}# seed = {}\n{run_stats}# wall_time_s = {:.3}\n# unreliable = {unreliable}\n{}",
        config.to_text(),
        config.seed,
        start.elapsed().as_secs_f64(),
        summary.lines().map(|l| format!("# {l}\n")).collect::<String>()
    );
    files.push(write_file(out, "meta", &meta)?);
    Ok(ScenarioOutcome {
        files,
        unreliable,
        summary,
    })
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn ensemble_stats(res: &EnsembleResult) -> String {
    format!(
        "# samples_used = {}\n# excluded = {}\n# dropped = {}\n# rescale_skipped = {}\n# max_trace_drift = {:e}\n# first_spike = {}\n",
        res.n_samples,
        res.n_excluded,
        res.n_dropped,
        res.rescale_skipped,
        res.max_trace_drift,
        res.first_spike().map_or("none".to_string(), |t| t.to_string())
    )
}

/// One row per grid node; error columns are NaN when there are too few samples
/// for batch errors.
pub fn observables_csv(res: &EnsembleResult) -> String {
    let mut s = String::with_capacity(200 * res.times.len());
    s.push_str(OBSERVABLES_HEADER);
    s.push('\n');
    for n in 0..res.times.len() {
        let e = |f: fn(&crate::ensemble::StdErrors) -> &Vec<f64>| res.stderr.as_ref().map_or(f64::NAN, |x| f(x)[n]);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            res.times[n],
            res.sx[n],
            e(|x| &x.sx),
            res.sy[n],
            e(|x| &x.sy),
            res.sz[n],
            e(|x| &x.sz),
            res.trace[n].re,
            res.trace[n].im,
            e(|x| &x.trace)
        )
        .ok();
    }
    s
}

pub fn correlations_csv(report: &CorrelationReport) -> String {
    let mut s = String::from("pair,t_index,tau_index,target_re,target_im,mean_re,mean_im,stderr,z\n");
    for e in &report.estimates {
        let (t, tau) = e.probe.coordinates();
        writeln!(
            s,
            "{},{t},{tau},{},{},{},{},{},{}",
            e.probe.label(),
            e.target.re,
            e.target.im,
            e.mean.re,
            e.mean.im,
            e.stderr,
            e.z_score()
        )
        .ok();
    }
    s
}

pub fn scan_csv(scan: &[ScanPoint]) -> String {
    let mut s = String::from("r_nu_eta,trace_stderr,n_excluded\n");
    for p in scan {
        writeln!(s, "{},{},{}", p.r_nu_eta, p.stderr.unwrap_or(f64::NAN), p.n_excluded).ok();
    }
    s
}
