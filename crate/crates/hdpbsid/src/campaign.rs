//! Monte Carlo campaigns over noise levels.

use std::path::Path;

use hdpbsid_core::analysis::{log_grid, match_eigenvalues, mc_statistics, McStats};
use hdpbsid_core::hermite::SampledSignal;
use hdpbsid_core::ident::{identify, IdentConfig};
use hdpbsid_core::lti::{
    add_output_noise, bandlimit_via_hermite, eigenvalues, frequency_response, simulate_noise_free,
    sine_sweep, uniform_grid, FrequencyResponse, StateSpaceModel, SweepSpec,
};
use nalgebra::Complex;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, NoiseLevel};
use crate::formats::{create_dir, fmt_f64, write_csv, FormatError};

pub const BODE_F_LO: f64 = 0.01;
pub const BODE_F_HI: f64 = 100.0;
pub const BODE_POINTS: usize = 200;

/// Everything a campaign needs, with the noise-free response precomputed.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub truth: StateSpaceModel,
    pub input: SampledSignal,
    pub clean_output: SampledSignal,
    pub ident: IdentConfig,
    pub levels: Vec<NoiseLevel>,
    pub trials: usize,
    pub seed: u64,
    pub include_failures: bool,
}

impl Campaign {
    pub fn new(
        truth: StateSpaceModel,
        sweep: SweepSpec,
        samples: usize,
        bandlimit_eta: Option<usize>,
        ident: IdentConfig,
    ) -> hdpbsid_core::Result<Self> {
        let times = uniform_grid(sweep.duration, samples);
        let mut input = sine_sweep(&sweep, &times)?;
        if let Some(eta) = bandlimit_eta {
            input = bandlimit_via_hermite(&input, eta)?;
        }
        let clean_output = simulate_noise_free(&truth, &input)?;
        Ok(Campaign {
            truth,
            input,
            clean_output,
            ident,
            levels: vec![NoiseLevel::None],
            trials: 1,
            seed: 0,
            include_failures: false,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig, path: &Path) -> Result<Self, FormatError> {
        let truth = cfg.load_model(path)?;
        let (sweep, samples) = cfg.sweep_spec(path)?;
        let mut c = Campaign::new(truth, sweep, samples, cfg.bandlimit_eta, cfg.ident_config())
            .map_err(|e| FormatError::invalid(path, e.to_string()))?;
        c.levels = if cfg.noise.is_empty() {
            vec![NoiseLevel::None]
        } else {
            cfg.noise.clone()
        };
        c.trials = cfg.trials;
        c.seed = cfg.seed;
        c.include_failures = cfg.include_failures;
        Ok(c)
    }

    pub fn trial_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    /// One identification; the same seed gives the same noise at every SNR.
    pub fn run_trial(&self, level: NoiseLevel, index: usize) -> TrialRecord {
        let seed = self.trial_seed(index);
        let outcome = add_output_noise(&self.clean_output, &level.spec(seed))
            .and_then(|y| identify(&self.input, &y, &self.ident));
        match outcome {
            Ok(res) => {
                let eigs = eigenvalues(&res.model);
                let frf = frequency_response(&res.model, &bode_grid()).ok();
                TrialRecord {
                    index,
                    seed,
                    eigenvalues: Some(eigs),
                    model: Some(res.model),
                    frf,
                    error: None,
                }
            }
            Err(e) => TrialRecord {
                index,
                seed,
                eigenvalues: None,
                model: None,
                frf: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn run_level(&self, level: NoiseLevel) -> LevelReport {
        let trials: Vec<TrialRecord> = (0..self.trials)
            .into_par_iter()
            .map(|i| self.run_trial(level, i))
            .collect();
        let truth = eigenvalues(&self.truth);
        let eig_lists: Vec<Option<Vec<Complex<f64>>>> =
            trials.iter().map(|t| t.eigenvalues.clone()).collect();
        let stats = mc_statistics(&eig_lists, &truth, self.include_failures).map_err(|e| e.to_string());
        LevelReport {
            level,
            truth,
            trials,
            stats,
        }
    }

    /// Runs every level, on `jobs` threads when given.
    pub fn run(&self, jobs: Option<usize>) -> Result<Vec<LevelReport>, rayon::ThreadPoolBuildError> {
        let go = || self.levels.iter().map(|&l| self.run_level(l)).collect();
        match jobs {
            Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(go)),
            None => Ok(go()),
        }
    }
}

pub fn bode_grid() -> Vec<f64> {
    log_grid(BODE_F_LO, BODE_F_HI, BODE_POINTS)
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub eigenvalues: Option<Vec<Complex<f64>>>,
    pub model: Option<StateSpaceModel>,
    pub frf: Option<FrequencyResponse>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LevelReport {
    pub level: NoiseLevel,
    pub truth: Vec<Complex<f64>>,
    pub trials: Vec<TrialRecord>,
    pub stats: Result<McStats, String>,
}

impl LevelReport {
    /// Matched absolute eigenvalue errors per trial, `None` for failed trials.
    pub fn trial_errors(&self) -> Vec<Option<f64>> {
        self.trials
            .iter()
            .map(|t| {
                let e = t.eigenvalues.as_ref()?;
                (e.len() == self.truth.len()).then(|| match_eigenvalues(e, &self.truth).max_error())
            })
            .collect()
    }

    fn stats_rows(&self) -> Vec<Vec<String>> {
        let failures = self.trials.len()
            - self
                .trials
                .iter()
                .filter(|t| matches!(&t.eigenvalues, Some(e) if e.len() == self.truth.len()))
                .count();
        self.truth
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let (bias, std, defined, samples, mean) = match &self.stats {
                    Ok(s) => {
                        let e = &s.per_eigenvalue[k];
                        (e.bias, e.std, e.std_defined, e.samples, e.mean)
                    }
                    Err(_) => (f64::NAN, f64::NAN, false, 0, Complex::new(f64::NAN, f64::NAN)),
                };
                vec![
                    k.to_string(),
                    fmt_f64(bias),
                    fmt_f64(std),
                    failures.to_string(),
                    defined.to_string(),
                    samples.to_string(),
                    self.trials.len().to_string(),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(mean.re),
                    fmt_f64(mean.im),
                ]
            })
            .collect()
    }

    fn eig_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for t in &self.trials {
            let head = |status: &str| vec![t.index.to_string(), t.seed.to_string(), status.to_string()];
            match (&t.eigenvalues, &t.error) {
                (Some(e), _) => {
                    let status = if e.len() == self.truth.len() { "ok" } else { "order_mismatch" };
                    let m = match_eigenvalues(e, &self.truth);
                    for p in &m.pairs {
                        let mut r = head(status);
                        r.extend([
                            p.truth_index.to_string(),
                            fmt_f64(p.estimated.re),
                            fmt_f64(p.estimated.im),
                            fmt_f64(p.error),
                            String::new(),
                        ]);
                        rows.push(r);
                    }
                    for z in &m.unmatched_estimated {
                        let mut r = head(status);
                        r.extend([String::new(), fmt_f64(z.re), fmt_f64(z.im), String::new(), String::new()]);
                        rows.push(r);
                    }
                }
                (None, err) => {
                    let mut r = head("failed");
                    r.extend([String::new(), String::new(), String::new(), String::new()]);
                    r.push(err.clone().unwrap_or_default());
                    rows.push(r);
                }
            }
        }
        rows
    }

    fn bode_rows(&self, truth: &FrequencyResponse) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        let mut push = |source: &str, trial: String, frf: &FrequencyResponse| {
            for (f, g) in frf.freqs_hz.iter().zip(&frf.values) {
                for i in 0..g.nrows() {
                    for j in 0..g.ncols() {
                        let z = g[(i, j)];
                        rows.push(vec![
                            source.to_string(),
                            trial.clone(),
                            fmt_f64(*f),
                            i.to_string(),
                            j.to_string(),
                            fmt_f64(z.re.hypot(z.im)),
                            fmt_f64(z.im.atan2(z.re)),
                        ]);
                    }
                }
            }
        };
        push("true", String::new(), truth);
        for t in &self.trials {
            if let Some(frf) = &t.frf {
                push("trial", t.index.to_string(), frf);
            }
        }
        rows
    }

    /// Writes `stats.csv`, `eigs.csv` and `bode_grid.csv` into `dir`.
    pub fn write(&self, dir: &Path, truth_frf: &FrequencyResponse) -> Result<(), FormatError> {
        create_dir(dir)?;
        write_csv(
            &dir.join("stats.csv"),
            &[
                "eigenvalue_index",
                "bias",
                "std",
                "failures",
                "std_defined",
                "samples",
                "trials",
                "truth_re",
                "truth_im",
                "mean_re",
                "mean_im",
            ],
            &self.stats_rows(),
        )?;
        write_csv(
            &dir.join("eigs.csv"),
            &["trial", "seed", "status", "truth_index", "re", "im", "abs_error", "message"],
            &self.eig_rows(),
        )?;
        write_csv(
            &dir.join("bode_grid.csv"),
            &["source", "trial", "freq_hz", "output", "input", "magnitude", "phase_rad"],
            &self.bode_rows(truth_frf),
        )
    }
}

/// Writes one subdirectory per level plus a `summary.csv` across levels.
pub fn write_reports(dir: &Path, campaign: &Campaign, reports: &[LevelReport]) -> Result<(), FormatError> {
    create_dir(dir)?;
    let truth_frf = frequency_response(&campaign.truth, &bode_grid())
        .map_err(|e| FormatError::invalid(dir, format!("true model: {e}")))?;
    let mut summary = Vec::new();
    for r in reports {
        r.write(&dir.join(r.level.label()), &truth_frf)?;
        for row in r.stats_rows() {
            let mut s = vec![r.level.to_string()];
            s.extend(row.into_iter().take(6));
            summary.push(s);
        }
    }
    write_csv(
        &dir.join("summary.csv"),
        &["snr_db", "eigenvalue_index", "bias", "std", "failures", "std_defined", "samples"],
        &summary,
    )
}
