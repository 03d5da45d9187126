//! Benchmark harness: every method on every noise scenario, RMSE and timing
//! aggregated per (method, scenario).

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{RegError, Result};
use crate::method::{register, strip_sigmas, Method, MethodConfig};
use crate::synth::{make_sample, mix_seed, NoiseProfile, SOURCE_HALF_EXTENT};

/// Sample count of the stress preset.
pub const STRESS_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub methods: Vec<Method>,
    pub scenarios: Vec<NoiseProfile>,
    pub n_points: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub config: MethodConfig,
    /// Feed each correspondence's sigma to the filters.
    pub use_sigmas: bool,
    /// Evaluate samples on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            methods: Method::ALL.to_vec(),
            scenarios: vec![NoiseProfile::small(), NoiseProfile::average(), NoiseProfile::large()],
            n_points: 400,
            n_samples: 30,
            seed: 42,
            config: MethodConfig::default(),
            use_sigmas: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub scenario: String,
    pub rmse_mean_mm: f64,
    pub rmse_stddev_mm: f64,
    pub time_mean_ms: f64,
    /// Successful samples.
    pub samples: usize,
    pub failures: usize,
    pub seed: u64,
}

/// Published RMSE (mm) of a method this crate does not implement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub method: &'static str,
    pub scenario: &'static str,
    pub rmse_mm: f64,
}

pub const REFERENCE_LABEL: &str = "published reference, not computed";

/// EMICP and WICP figures for the three synthetic scenarios.
pub const REFERENCE_ROWS: [(&str, &str, f64); 6] = [
    ("emicp", "small", 298.0),
    ("wicp", "small", 193.0),
    ("emicp", "average", 323.0),
    ("wicp", "average", 235.0),
    ("emicp", "large", 332.0),
    ("wicp", "large", 260.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub seed: u64,
    pub n_points: usize,
    pub n_samples: usize,
    /// Side of the cube sources are drawn from (meters).
    pub source_cube_side_m: f64,
    pub rows: Vec<BenchRow>,
    pub reference_rows: Vec<ReferenceRow>,
}

impl BenchReport {
    pub fn row(&self, method: Method, scenario: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method && r.scenario == scenario)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.c
    }
}

fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mut s = CompensatedSum::default();
    values.iter().for_each(|v| s.add(*v));
    let mean = s.total() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = CompensatedSum::default();
    values.iter().for_each(|v| sq.add((v - mean) * (v - mean)));
    (mean, (sq.total() / (n - 1.0)).sqrt())
}

/// Per-method outcome on one sample: `(rmse_mm, time_ms)` or the failure.
type SampleOutcome = Vec<std::result::Result<(f64, f64), RegError>>;

fn evaluate_sample(
    settings: &BenchSettings,
    profile: &NoiseProfile,
    scenario_index: u64,
    sample_index: u64,
) -> Result<SampleOutcome> {
    let sample_seed = mix_seed(mix_seed(settings.seed, scenario_index), sample_index);
    let sample = make_sample(profile, settings.n_points, sample_seed)?;
    let corrs = if settings.use_sigmas {
        sample.corrs
    } else {
        strip_sigmas(&sample.corrs)
    };
    Ok(settings
        .methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let res = register(m, &corrs, &settings.config);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            res.map(|r| (r.rmse * 1e3, elapsed))
        })
        .collect())
}

pub fn run_benchmark(settings: &BenchSettings) -> Result<BenchReport> {
    if settings.methods.is_empty() {
        return Err(RegError::InvalidArgument("no methods selected".into()));
    }
    if settings.scenarios.is_empty() {
        return Err(RegError::InvalidArgument("no scenarios selected".into()));
    }
    if settings.n_points < 3 || settings.n_samples == 0 {
        return Err(RegError::InvalidArgument(format!(
            "need points >= 3 and samples >= 1, got {} and {}",
            settings.n_points, settings.n_samples
        )));
    }
    settings.config.rf.validate()?;

    let mut rows = Vec::new();
    for (si, profile) in settings.scenarios.iter().enumerate() {
        profile.validate()?;
        let run = |i: usize| evaluate_sample(settings, profile, si as u64, i as u64);
        let outcomes: Vec<SampleOutcome> = if settings.parallel {
            (0..settings.n_samples)
                .into_par_iter()
                .map(run)
                .collect::<Result<_>>()?
        } else {
            (0..settings.n_samples).map(run).collect::<Result<_>>()?
        };
        for (mi, &method) in settings.methods.iter().enumerate() {
            let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o[mi].as_ref().ok().copied()).collect();
            let rmses: Vec<f64> = ok.iter().map(|(r, _)| *r).collect();
            let times: Vec<f64> = ok.iter().map(|(_, t)| *t).collect();
            let (rmse_mean_mm, rmse_stddev_mm) = mean_and_stddev(&rmses);
            rows.push(BenchRow {
                method,
                scenario: profile.label(),
                rmse_mean_mm,
                rmse_stddev_mm,
                time_mean_ms: mean_and_stddev(&times).0,
                samples: ok.len(),
                failures: settings.n_samples - ok.len(),
                seed: settings.seed,
            });
        }
    }

    let labels: Vec<String> = settings.scenarios.iter().map(|s| s.label()).collect();
    let reference_rows = REFERENCE_ROWS
        .iter()
        .filter(|(_, scenario, _)| labels.iter().any(|l| l == scenario))
        .map(|&(method, scenario, rmse_mm)| ReferenceRow {
            method,
            scenario,
            rmse_mm,
        })
        .collect();

    Ok(BenchReport {
        seed: settings.seed,
        n_points: settings.n_points,
        n_samples: settings.n_samples,
        source_cube_side_m: 2.0 * SOURCE_HALF_EXTENT,
        rows,
        reference_rows,
    })
}
