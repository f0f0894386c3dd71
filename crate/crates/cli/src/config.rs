//! Scenario configuration: a flat `key = value` text format with `#`
//! comments, overridable from command-line flags. Unknown keys are
//! rejected, every parameter is validated before any computation starts,
//! and `parse(serialize(c)) == c`.

use std::fmt::Write as _;
use std::path::PathBuf;

use nctrans::pathlen::PathLengthLaw;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Curves,
    Moments,
    Mc,
    Integral,
    Compare,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Curves => "curves",
            Scenario::Moments => "moments",
            Scenario::Mc => "mc",
            Scenario::Integral => "integral",
            Scenario::Compare => "compare",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "curves" => Scenario::Curves,
            "moments" => Scenario::Moments,
            "mc" => Scenario::Mc,
            "integral" => Scenario::Integral,
            "compare" => Scenario::Compare,
            other => {
                return Err(CliError::Config(format!(
                    "unknown scenario {other:?} (expected curves, moments, mc, integral or compare)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureKind {
    Analog,
    Implicit,
}

impl CaptureKind {
    fn name(&self) -> &'static str {
        match self {
            CaptureKind::Analog => "analog",
            CaptureKind::Implicit => "implicit",
        }
    }

    fn from_name(name: &str) -> Result<Self, String> {
        match name {
            "analog" => Ok(CaptureKind::Analog),
            "implicit" => Ok(CaptureKind::Implicit),
            other => Err(format!(
                "unknown capture model {other:?} (expected analog or implicit)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    DiffusionMatched,
    Exponential,
    Tabulated,
}

impl LawKind {
    fn name(&self) -> &'static str {
        match self {
            LawKind::DiffusionMatched => "diffusion_matched",
            LawKind::Exponential => "exponential",
            LawKind::Tabulated => "tabulated",
        }
    }

    fn from_name(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "diffusion_matched" => LawKind::DiffusionMatched,
            "exponential" => LawKind::Exponential,
            "tabulated" => LawKind::Tabulated,
            other => {
                return Err(CliError::Config(format!(
                    "unknown law {other:?} (expected diffusion_matched, exponential or tabulated)"
                )))
            }
        })
    }
}

/// Full description of a scenario run. Defaults reproduce the pebble-bed
/// benchmark: diffusion-matched law with `<s^2> = 6.2898`, homogenized
/// cross section 0.5934 and scattering ratio 0.99.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub law: LawKind,
    /// Mean-squared free path for the diffusion-matched law.
    pub ms2: f64,
    /// Cross section for the exponential law.
    pub sigma_t: f64,
    /// Two-column density table, required when `law = tabulated`.
    pub tabulated_file: Option<PathBuf>,
    /// Scattering ratio in [0, 1).
    pub c: f64,
    /// Homogenized cross section of the medium; sets the classical curves
    /// and the default true mean free path `1 / sigmabar`.
    pub sigmabar: f64,
    /// Overrides the true mean free path used for the `phi0_true` column.
    pub s_mean_true: Option<f64>,
    pub histories: u64,
    pub seed: u64,
    /// Monte Carlo shells; the outer radius defaults to `12 / kappa`.
    pub shells: usize,
    pub shell_r_max: Option<f64>,
    /// Also accumulate the diagnostic track-length flux.
    pub track_length: bool,
    /// Analog capture (default) or implicit capture with Russian roulette.
    pub capture: CaptureKind,
    pub capture_cutoff: f64,
    pub capture_survival: f64,
    /// Solver grid size; inner/outer radii default to `1e-3 <s>` and
    /// `15 / kappa`.
    pub grid_nodes: usize,
    pub grid_r_min: Option<f64>,
    pub grid_r_max: Option<f64>,
    /// Source-iteration termination (component-relative update).
    pub tol: f64,
    pub strength: f64,
    pub curve_points: usize,
    pub curve_s_max: f64,
    /// compare: integral-vs-closed-form tolerance on [cmp_r_lo, cmp_r_hi].
    pub cmp_max_rel_dev: f64,
    pub cmp_r_lo: f64,
    pub cmp_r_hi: f64,
    /// compare: Monte Carlo z-score bound on [cmp_mc_r_lo, cmp_mc_r_hi],
    /// applied to shells with relative standard error below
    /// `cmp_mc_rel_err_max`.
    pub cmp_mc_sigma: f64,
    pub cmp_mc_r_lo: f64,
    pub cmp_mc_r_hi: f64,
    pub cmp_mc_rel_err_max: f64,
    pub cmp_balance_tol: f64,
    pub out_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            law: LawKind::DiffusionMatched,
            ms2: 6.2898,
            sigma_t: 1.0,
            tabulated_file: None,
            c: 0.99,
            sigmabar: 0.5934,
            s_mean_true: None,
            histories: 1_000_000,
            seed: 1,
            shells: 60,
            shell_r_max: None,
            track_length: false,
            capture: CaptureKind::Analog,
            capture_cutoff: 0.25,
            capture_survival: 0.5,
            grid_nodes: 800,
            grid_r_min: None,
            grid_r_max: None,
            tol: 1e-8,
            strength: 1.0,
            curve_points: 500,
            curve_s_max: 10.0,
            cmp_max_rel_dev: 0.01,
            cmp_r_lo: 0.5,
            cmp_r_hi: 10.0,
            cmp_mc_sigma: 3.0,
            cmp_mc_r_lo: 1.0,
            cmp_mc_r_hi: 8.0,
            cmp_mc_rel_err_max: 0.02,
            cmp_balance_tol: 0.005,
            out_dir: PathBuf::from("out"),
        }
    }

    /// Apply `key = value` lines from a config file; later lines win.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    idx + 1
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse::<T>()
                .map_err(|_| format!("invalid value {value:?} for {key}"))
        }
        let flag = |value: &str| -> Result<bool, String> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(format!("invalid boolean {other:?}")),
            }
        };
        fn opt(value: &str) -> Option<&str> {
            if value == "auto" || value.is_empty() {
                None
            } else {
                Some(value)
            }
        }
        match key {
            "scenario" => self.scenario = Scenario::from_name(value).map_err(|e| e.to_string())?,
            "law" => self.law = LawKind::from_name(value).map_err(|e| e.to_string())?,
            "ms2" => self.ms2 = num(key, value)?,
            "sigma_t" => self.sigma_t = num(key, value)?,
            "tabulated_file" => {
                self.tabulated_file = opt(value).map(PathBuf::from);
            }
            "c" => self.c = num(key, value)?,
            "sigmabar" => self.sigmabar = num(key, value)?,
            "s_mean_true" => {
                self.s_mean_true = opt(value).map(|v| num(key, v)).transpose()?;
            }
            "histories" => self.histories = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "shells" => self.shells = num(key, value)?,
            "shell_r_max" => {
                self.shell_r_max = opt(value).map(|v| num(key, v)).transpose()?;
            }
            "track_length" => self.track_length = flag(value)?,
            "capture" => self.capture = CaptureKind::from_name(value)?,
            "capture_cutoff" => self.capture_cutoff = num(key, value)?,
            "capture_survival" => self.capture_survival = num(key, value)?,
            "grid_nodes" => self.grid_nodes = num(key, value)?,
            "grid_r_min" => {
                self.grid_r_min = opt(value).map(|v| num(key, v)).transpose()?;
            }
            "grid_r_max" => {
                self.grid_r_max = opt(value).map(|v| num(key, v)).transpose()?;
            }
            "tol" => self.tol = num(key, value)?,
            "strength" => self.strength = num(key, value)?,
            "curve_points" => self.curve_points = num(key, value)?,
            "curve_s_max" => self.curve_s_max = num(key, value)?,
            "cmp_max_rel_dev" => self.cmp_max_rel_dev = num(key, value)?,
            "cmp_r_lo" => self.cmp_r_lo = num(key, value)?,
            "cmp_r_hi" => self.cmp_r_hi = num(key, value)?,
            "cmp_mc_sigma" => self.cmp_mc_sigma = num(key, value)?,
            "cmp_mc_r_lo" => self.cmp_mc_r_lo = num(key, value)?,
            "cmp_mc_r_hi" => self.cmp_mc_r_hi = num(key, value)?,
            "cmp_mc_rel_err_max" => self.cmp_mc_rel_err_max = num(key, value)?,
            "cmp_balance_tol" => self.cmp_balance_tol = num(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Serialize to the config-file format; `apply_file` on the result
    /// reproduces the struct exactly.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }

    /// One-line form used in CSV header comments.
    pub fn serialize_line(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let opt_num = |v: &Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => "auto".to_string(),
        };
        vec![
            ("scenario", self.scenario.name().to_string()),
            ("law", self.law.name().to_string()),
            ("ms2", format!("{}", self.ms2)),
            ("sigma_t", format!("{}", self.sigma_t)),
            (
                "tabulated_file",
                self.tabulated_file
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "auto".to_string()),
            ),
            ("c", format!("{}", self.c)),
            ("sigmabar", format!("{}", self.sigmabar)),
            ("s_mean_true", opt_num(&self.s_mean_true)),
            ("histories", format!("{}", self.histories)),
            ("seed", format!("{}", self.seed)),
            ("shells", format!("{}", self.shells)),
            ("shell_r_max", opt_num(&self.shell_r_max)),
            ("track_length", format!("{}", self.track_length)),
            ("capture", self.capture.name().to_string()),
            ("capture_cutoff", format!("{}", self.capture_cutoff)),
            ("capture_survival", format!("{}", self.capture_survival)),
            ("grid_nodes", format!("{}", self.grid_nodes)),
            ("grid_r_min", opt_num(&self.grid_r_min)),
            ("grid_r_max", opt_num(&self.grid_r_max)),
            ("tol", format!("{}", self.tol)),
            ("strength", format!("{}", self.strength)),
            ("curve_points", format!("{}", self.curve_points)),
            ("curve_s_max", format!("{}", self.curve_s_max)),
            ("cmp_max_rel_dev", format!("{}", self.cmp_max_rel_dev)),
            ("cmp_r_lo", format!("{}", self.cmp_r_lo)),
            ("cmp_r_hi", format!("{}", self.cmp_r_hi)),
            ("cmp_mc_sigma", format!("{}", self.cmp_mc_sigma)),
            ("cmp_mc_r_lo", format!("{}", self.cmp_mc_r_lo)),
            ("cmp_mc_r_hi", format!("{}", self.cmp_mc_r_hi)),
            ("cmp_mc_rel_err_max", format!("{}", self.cmp_mc_rel_err_max)),
            ("cmp_balance_tol", format!("{}", self.cmp_balance_tol)),
            ("out", self.out_dir.display().to_string()),
        ]
    }

    /// Check every parameter the scenarios may touch.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(0.0..1.0).contains(&self.c) {
            return bad(format!("c must lie in [0, 1), got {}", self.c));
        }
        if !(self.ms2 > 0.0) {
            return bad(format!("ms2 must be positive, got {}", self.ms2));
        }
        if !(self.sigma_t > 0.0) {
            return bad(format!("sigma_t must be positive, got {}", self.sigma_t));
        }
        if !(self.sigmabar > 0.0) {
            return bad(format!("sigmabar must be positive, got {}", self.sigmabar));
        }
        if let Some(s) = self.s_mean_true {
            if !(s > 0.0) {
                return bad(format!("s_mean_true must be positive, got {s}"));
            }
        }
        if self.law == LawKind::Tabulated && self.tabulated_file.is_none() {
            return bad("law = tabulated requires tabulated_file".to_string());
        }
        if self.histories == 0 {
            return bad("histories must be at least 1".to_string());
        }
        if self.shells == 0 {
            return bad("shells must be at least 1".to_string());
        }
        if let Some(r) = self.shell_r_max {
            if !(r > 0.0) {
                return bad(format!("shell_r_max must be positive, got {r}"));
            }
        }
        if !(0.0 < self.capture_cutoff && self.capture_cutoff < 1.0) {
            return bad(format!(
                "capture_cutoff must lie in (0, 1), got {}",
                self.capture_cutoff
            ));
        }
        if !(0.0 < self.capture_survival && self.capture_survival < 1.0) {
            return bad(format!(
                "capture_survival must lie in (0, 1), got {}",
                self.capture_survival
            ));
        }
        if self.grid_nodes < 3 {
            return bad(format!(
                "grid_nodes must be at least 3, got {}",
                self.grid_nodes
            ));
        }
        match (self.grid_r_min, self.grid_r_max) {
            (Some(a), _) if !(a > 0.0) => {
                return bad(format!("grid_r_min must be positive, got {a}"))
            }
            (Some(a), Some(b)) if !(b > a) => {
                return bad(format!("grid_r_max {b} must exceed grid_r_min {a}"))
            }
            _ => {}
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.strength > 0.0) {
            return bad(format!("strength must be positive, got {}", self.strength));
        }
        if self.curve_points < 2 {
            return bad(format!(
                "curve_points must be at least 2, got {}",
                self.curve_points
            ));
        }
        if !(self.curve_s_max > 0.0) {
            return bad(format!(
                "curve_s_max must be positive, got {}",
                self.curve_s_max
            ));
        }
        for (name, v) in [
            ("cmp_max_rel_dev", self.cmp_max_rel_dev),
            ("cmp_mc_sigma", self.cmp_mc_sigma),
            ("cmp_mc_rel_err_max", self.cmp_mc_rel_err_max),
            ("cmp_balance_tol", self.cmp_balance_tol),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.cmp_r_lo > 0.0 && self.cmp_r_hi > self.cmp_r_lo) {
            return bad(format!(
                "compare range needs 0 < cmp_r_lo < cmp_r_hi, got [{}, {}]",
                self.cmp_r_lo, self.cmp_r_hi
            ));
        }
        if !(self.cmp_mc_r_lo > 0.0 && self.cmp_mc_r_hi > self.cmp_mc_r_lo) {
            return bad(format!(
                "compare MC range needs 0 < cmp_mc_r_lo < cmp_mc_r_hi, got [{}, {}]",
                self.cmp_mc_r_lo, self.cmp_mc_r_hi
            ));
        }
        Ok(())
    }

    /// Construct the configured path-length law.
    pub fn build_law(&self) -> Result<PathLengthLaw, CliError> {
        match self.law {
            LawKind::DiffusionMatched => {
                PathLengthLaw::diffusion_matched(self.ms2).map_err(CliError::from_config)
            }
            LawKind::Exponential => {
                PathLengthLaw::exponential(self.sigma_t).map_err(CliError::from_config)
            }
            LawKind::Tabulated => {
                let path = self
                    .tabulated_file
                    .as_ref()
                    .ok_or_else(|| CliError::Config("tabulated_file not set".to_string()))?;
                PathLengthLaw::tabulated_from_file(path).map_err(CliError::from_config)
            }
        }
    }

    /// The mean free path used for the `phi0_true` conversion: explicit
    /// `s_mean_true` if set, else `1 / sigmabar` (the homogenized medium
    /// preserves the true mean free path).
    pub fn true_mean_free_path(&self) -> f64 {
        self.s_mean_true.unwrap_or(1.0 / self.sigmabar)
    }
}
