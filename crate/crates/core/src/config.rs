//! Flat `key = value` run configuration.
//!
//! Every key has a default, so an empty file is valid. Values are echoed by
//! [`RunConfig::to_text`] with shortest round-trip float formatting, which
//! makes the echo sufficient to repeat a run bit for bit.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ensemble::{default_window, EnsembleConfig, EnsembleSpec, InitialState, SamplingSpec};
use crate::error::{EslnError, Result};
use crate::kernels::{BathSpec, QuadratureSpec, TimeGrid};
use crate::noise::ScalingSpec;
use crate::propagate::{DensityMatrix, Representation, SchemeSpec, SpinBosonDrive, Stepper, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Correlations,
    Stationary,
    Decay,
    Lz,
    Calibrate,
    VarianceScan,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Correlations,
        Scenario::Stationary,
        Scenario::Decay,
        Scenario::Lz,
        Scenario::Calibrate,
        Scenario::VarianceScan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Correlations => "correlations",
            Scenario::Stationary => "stationary",
            Scenario::Decay => "decay",
            Scenario::Lz => "lz",
            Scenario::Calibrate => "calibrate",
            Scenario::VarianceScan => "variance-scan",
        }
    }
}

impl FromStr for Scenario {
    type Err = EslnError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| EslnError::UnknownScenario(s.to_string()))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial spin state; `thermal` is the imaginary-time preparation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    Thermal,
    Up,
    Down,
}

impl InitKind {
    pub fn initial_state(&self) -> InitialState {
        match self {
            InitKind::Thermal => InitialState::Thermal,
            InitKind::Up => InitialState::Pure(DensityMatrix::spin_up()),
            InitKind::Down => InitialState::Pure(DensityMatrix::spin_down()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub alpha: f64,
    pub omega_c: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// A sweep ε(t) = κt replaces the constant bias when set.
    pub kappa: Option<f64>,
    pub t0: f64,
    pub t_max: f64,
    pub dt: f64,
    pub dtau: f64,
    pub stepper: Stepper,
    pub variant: Variant,
    pub representation: Representation,
    pub init: InitKind,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub batches: usize,
    pub r_nu_eta: f64,
    pub r_mu_eta: f64,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub window_batches: usize,
    pub t0_list: Vec<f64>,
    pub r_list: Vec<f64>,
    pub probe_lags: usize,
    pub probe_seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_scenario(Scenario::Stationary)
    }
}

impl RunConfig {
    /// Defaults for a scenario; the physical ones are shared by all.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let mut c = Self {
            scenario,
            alpha: 0.05,
            omega_c: 20.0,
            beta: 1.0,
            delta: 1.0,
            epsilon: -1.0,
            kappa: None,
            t0: 0.0,
            t_max: 6.0,
            dt: 1e-3,
            dtau: 1e-3,
            stepper: Stepper::Heun,
            variant: Variant::Original,
            representation: Representation::Density,
            init: InitKind::Thermal,
            samples: 1000,
            seed: 0,
            workers: 0,
            batches: 12,
            r_nu_eta: 0.5,
            r_mu_eta: 1.0,
            window_start: None,
            window_end: None,
            window_batches: 15,
            t0_list: vec![-5.0, -10.0, -10.06, -20.0, -40.0],
            r_list: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            probe_lags: 20,
            probe_seed: 1,
            out: PathBuf::from("out"),
        };
        match scenario {
            Scenario::Correlations => c.t_max = 2.0,
            Scenario::Stationary => {}
            Scenario::Calibrate => {
                c.alpha = 0.0;
                c.kappa = Some(5.0);
                c.t_max = 10.0;
            }
            Scenario::Decay => {
                c.t_max = 15.0;
                c.init = InitKind::Up;
            }
            Scenario::Lz => {
                c.alpha = 0.01;
                c.kappa = Some(5.0);
                c.t0 = -10.0;
                c.t_max = 10.0;
            }
            Scenario::VarianceScan => {
                c.delta = 0.0;
                c.epsilon = 0.0;
                c.t_max = 10.0;
            }
        }
        c
    }

    /// Sets one key from its textual value. `scenario` only renames the run;
    /// use [`RunConfig::for_scenario`] to pick up scenario defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "scenario" => self.scenario = v.parse()?,
            "alpha" => self.alpha = num(key, v)?,
            "omega_c" => self.omega_c = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "delta" => self.delta = num(key, v)?,
            "epsilon" => self.epsilon = num(key, v)?,
            "kappa" => self.kappa = optional(key, v)?,
            "t0" => self.t0 = num(key, v)?,
            "t_max" => self.t_max = num(key, v)?,
            "dt" => self.dt = num(key, v)?,
            "dtau" => self.dtau = num(key, v)?,
            "stepper" => {
                self.stepper = match v {
                    "heun" => Stepper::Heun,
                    "euler-maruyama" | "em" => Stepper::EulerMaruyama,
                    _ => return Err(EslnError::config(key, format!("`{v}` is not heun or euler-maruyama"))),
                }
            }
            "variant" => {
                self.variant = match v {
                    "original" => Variant::Original,
                    "guided" => Variant::Guided,
                    "normalised" | "normalized" => Variant::Normalised,
                    _ => return Err(EslnError::config(key, format!("`{v}` is not original, guided or normalised"))),
                }
            }
            "representation" => {
                self.representation = match v {
                    "density" => Representation::Density,
                    "spins" => Representation::Spins,
                    _ => return Err(EslnError::config(key, format!("`{v}` is not density or spins"))),
                }
            }
            "init" => {
                self.init = match v {
                    "thermal" => InitKind::Thermal,
                    "up" => InitKind::Up,
                    "down" => InitKind::Down,
                    _ => return Err(EslnError::config(key, format!("`{v}` is not thermal, up or down"))),
                }
            }
            "samples" | "n_samples" => self.samples = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "workers" | "n_workers" => self.workers = num(key, v)?,
            "batches" => self.batches = num(key, v)?,
            "r_nu_eta" => self.r_nu_eta = num(key, v)?,
            "r_mu_eta" => self.r_mu_eta = num(key, v)?,
            "window_start" => self.window_start = optional(key, v)?,
            "window_end" => self.window_end = optional(key, v)?,
            "window_batches" => self.window_batches = num(key, v)?,
            "t0_list" => self.t0_list = list(key, v)?,
            "r_list" => self.r_list = list(key, v)?,
            "probe_lags" => self.probe_lags = num(key, v)?,
            "probe_seed" => self.probe_seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(EslnError::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| EslnError::config(format!("line {}", lineno + 1), "expected key = value"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    /// The `scenario` key of a config text, if present.
    pub fn scenario_in(text: &str) -> Result<Option<Scenario>> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            if let Some((k, v)) = line.split_once('=') {
                if k.trim() == "scenario" {
                    return v.trim().parse().map(Some);
                }
            }
        }
        Ok(None)
    }

    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| v.to_string());
        let join = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let stepper = match self.stepper {
            Stepper::Heun => "heun",
            Stepper::EulerMaruyama => "euler-maruyama",
        };
        let variant = match self.variant {
            Variant::Original => "original",
            Variant::Guided => "guided",
            Variant::Normalised => "normalised",
        };
        let representation = match self.representation {
            Representation::Density => "density",
            Representation::Spins => "spins",
        };
        let init = match self.init {
            InitKind::Thermal => "thermal",
            InitKind::Up => "up",
            InitKind::Down => "down",
        };
        let lines = [
            ("scenario", self.scenario.to_string()),
            ("alpha", self.alpha.to_string()),
            ("omega_c", self.omega_c.to_string()),
            ("beta", self.beta.to_string()),
            ("delta", self.delta.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("kappa", opt(self.kappa)),
            ("t0", self.t0.to_string()),
            ("t_max", self.t_max.to_string()),
            ("dt", self.dt.to_string()),
            ("dtau", self.dtau.to_string()),
            ("stepper", stepper.to_string()),
            ("variant", variant.to_string()),
            ("representation", representation.to_string()),
            ("init", init.to_string()),
            ("samples", self.samples.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("batches", self.batches.to_string()),
            ("r_nu_eta", self.r_nu_eta.to_string()),
            ("r_mu_eta", self.r_mu_eta.to_string()),
            ("window_start", opt(self.window_start)),
            ("window_end", opt(self.window_end)),
            ("window_batches", self.window_batches.to_string()),
            ("t0_list", join(&self.t0_list)),
            ("r_list", join(&self.r_list)),
            ("probe_lags", self.probe_lags.to_string()),
            ("probe_seed", self.probe_seed.to_string()),
            ("out", self.out.display().to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn bath(&self) -> Result<BathSpec> {
        BathSpec::new(self.alpha, self.omega_c, self.beta)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t0, self.t_max, self.dt, self.beta, self.dtau)
    }

    pub fn drive(&self) -> SpinBosonDrive {
        match self.kappa {
            Some(kappa) => SpinBosonDrive::sweep(self.delta, kappa),
            None => SpinBosonDrive::constant(self.delta, self.epsilon),
        }
    }

    pub fn scaling(&self) -> Result<ScalingSpec> {
        ScalingSpec::new(self.r_nu_eta, self.r_mu_eta)
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        let spec = EnsembleSpec {
            drive: self.drive(),
            scheme: SchemeSpec {
                stepper: self.stepper,
                variant: self.variant,
                representation: self.representation,
            },
            scaling: self.scaling()?,
            init: self.init.initial_state(),
            sampling: SamplingSpec {
                n_samples: self.samples,
                master_seed: self.seed,
                n_batches: self.batches,
                n_workers: self.workers,
            },
        };
        spec.validate()?;
        Ok(EnsembleConfig {
            bath: self.bath()?,
            grid: self.grid()?,
            quadrature: QuadratureSpec::default(),
            spec,
        })
    }

    /// Asymptote window, defaulting to the trailing 65 % of the run.
    pub fn window(&self, grid: &TimeGrid) -> (f64, f64) {
        let (a, b) = default_window(grid);
        (self.window_start.unwrap_or(a), self.window_end.unwrap_or(b))
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| EslnError::config(key.trim(), format!("`{v}`: {e}")))
}

fn optional(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s.trim())).collect()
}
