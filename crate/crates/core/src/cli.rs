//! The `regfilt` command line. Lives in the library so tests can drive it
//! without spawning a process.
//!
//! Exit codes: `0` success, `1` I/O, `2` usage or parse error, `3` numerical
//! failure, `4` robustness bound infeasible.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_benchmark, BenchSettings, STRESS_SAMPLES};
use crate::error::{RegError, Result};
use crate::io::{
    load_correspondences, load_depths, load_index_pairs, load_ply_vertices, pair_clouds, parse_floats,
    parse_intrinsics, write_correspondences, write_report, Report, ReportFormat, RunConfig, TransformEntry, MM_PER_M,
};
use crate::kalman::COVARIANCE_FLOOR;
use crate::method::register;
use crate::sensor::{
    backproject_pinhole, covariance_of_point, diagonal_covariance, extract_z_levels, point_sigmas, sigma_z,
};
use crate::synth::make_synthetic_set;

#[derive(Debug, Parser)]
#[command(
    name = "regfilt",
    version,
    about = "Rigid 3D registration by Kalman and robust H-infinity filtering"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register one correspondence set.
    Register(RegisterArgs),
    /// Write seeded synthetic correspondence files and their true transforms.
    Synth(SynthArgs),
    /// Score methods on seeded synthetic scenarios.
    Bench(BenchArgs),
    /// Depth standard deviation of one z-level.
    Zlevels(ZlevelsArgs),
    /// Propagate a depth sigma through the pinhole model.
    Sigmas(SigmasArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file. Defaults to $REGFILT_CONFIG when set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set theta=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Correspondence CSV (millimeters).
    #[arg(long, required_unless_present = "source_ply", conflicts_with = "source_ply")]
    pub input: Option<PathBuf>,
    /// Source cloud as ASCII PLY; needs --target-ply and --pairs.
    #[arg(long, requires_all = ["target_ply", "pairs"])]
    pub source_ply: Option<PathBuf>,
    #[arg(long)]
    pub target_ply: Option<PathBuf>,
    /// Index pairs `source target`, one per line.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Length unit of the PLY coordinates: m or mm.
    #[arg(long, default_value = "m")]
    pub ply_unit: String,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json or table; inferred from the --out extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// small, average, large or custom.
    #[arg(long)]
    pub noise: Option<String>,
    /// Lower sigma bound for the custom band (mm).
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Upper sigma bound for the custom band (mm).
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated subset of horn,kf,rf.
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated subset of small,average,large,custom.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Withhold per-point sigmas from the filters.
    #[arg(long)]
    pub no_sigmas: bool,
    /// Evaluate samples on one thread.
    #[arg(long)]
    pub serial: bool,
    /// Run 1000 samples per scenario unless --samples is given.
    #[arg(long)]
    pub stress: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ZlevelsArgs {
    /// Depth samples: a list or a CSV grid.
    #[arg(long)]
    pub depths: PathBuf,
    /// Level index (0 = nearest to the camera).
    #[arg(long)]
    pub index: usize,
    /// Level offset used for the spread.
    #[arg(long = "i")]
    pub offset: Option<usize>,
    /// Relative gap below which depths merge into one level.
    #[arg(long)]
    pub merge_eps: Option<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SigmasArgs {
    /// fx,fy,cx,cy in pixels.
    #[arg(long)]
    pub intrinsics: Option<String>,
    /// u,v in pixels.
    #[arg(long)]
    pub pixel: String,
    #[arg(long)]
    pub depth: f64,
    /// Depth standard deviation, same unit as --depth.
    #[arg(long)]
    pub sigma_z: f64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Parses `args` (program name first), runs the command, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Register(a) => cmd_register(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Zlevels(a) => cmd_zlevels(a, out),
        Command::Sigmas(a) => cmd_sigmas(a, out),
    }
}

/// Config file (or `$REGFILT_CONFIG`), then `--set` overrides, then the
/// dedicated flags in `flags`.
fn load_config(c: &ConfigArgs, flags: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::resolve(c.config.as_deref())?;
    for o in &c.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| RegError::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(e: std::io::Error) -> RegError {
    RegError::io("<stdout>", e)
}

fn emit(report: &Report, path: Option<&Path>, format: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let format: Option<ReportFormat> = format.map(str::parse).transpose()?;
    match path {
        Some(path) => {
            write!(out, "{}", report.to_table()).map_err(io_err)?;
            write_report(report, path, format.unwrap_or_else(|| ReportFormat::for_path(path)))?;
            writeln!(out, "report written to {}", path.display()).map_err(io_err)
        }
        None => match format.unwrap_or(ReportFormat::Table) {
            ReportFormat::Table => write!(out, "{}", report.to_table()).map_err(io_err),
            ReportFormat::Json => writeln!(out, "{}", report.to_json()?).map_err(io_err),
        },
    }
}

fn cmd_register(a: RegisterArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(
        &a.config,
        &[("method", a.method.clone()), ("seed", a.seed.map(|s| s.to_string()))],
    )?;
    let (corrs, label) = match (&a.input, &a.source_ply) {
        (Some(input), _) => (load_correspondences(input)?, input.display().to_string()),
        (None, Some(src)) => {
            let scale = match a.ply_unit.as_str() {
                "m" => 1.0,
                "mm" => 1.0 / MM_PER_M,
                other => {
                    return Err(RegError::InvalidArgument(format!(
                        "--ply-unit must be m or mm, got '{other}'"
                    )))
                }
            };
            let source = load_ply_vertices(src)?;
            let target = load_ply_vertices(a.target_ply.as_ref().expect("clap requires --target-ply"))?;
            let pairs = load_index_pairs(a.pairs.as_ref().expect("clap requires --pairs"))?;
            (pair_clouds(&source, &target, &pairs, scale)?, src.display().to_string())
        }
        (None, None) => return Err(RegError::InvalidArgument("need --input or --source-ply".into())),
    };
    let start = Instant::now();
    let res = register(cfg.method, &corrs, &cfg.methods_config)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    if res.under_determined {
        writeln!(
            out,
            "warning: fewer than 3 correspondences; rotation is under-determined"
        )
        .map_err(io_err)?;
    }
    let report = Report::from_registration(cfg.method, &label, corrs.len(), &res, ms, cfg.seed);
    emit(&report, a.out.as_deref(), a.format.as_deref(), out)
}

fn custom_bounds(min: Option<f64>, max: Option<f64>) -> [(&'static str, Option<String>); 2] {
    [
        ("sigma_min_mm", min.map(|v| v.to_string())),
        ("sigma_max_mm", max.map(|v| v.to_string())),
    ]
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let [lo, hi] = custom_bounds(a.sigma_min, a.sigma_max);
    let cfg = load_config(
        &a.config,
        &[
            ("noise", a.noise.clone()),
            lo,
            hi,
            ("points", a.points.map(|v| v.to_string())),
            ("samples", a.samples.map(|v| v.to_string())),
            ("seed", a.seed.map(|v| v.to_string())),
        ],
    )?;
    let scenarios = cfg.scenarios()?;
    if scenarios.len() != 1 {
        return Err(RegError::InvalidArgument("synth takes exactly one noise band".into()));
    }
    let profile = &scenarios[0];
    std::fs::create_dir_all(&a.out).map_err(|e| RegError::io(&a.out, e))?;
    let set = make_synthetic_set(profile, cfg.points, cfg.samples, cfg.seed)?;
    for (i, sample) in set.iter().enumerate() {
        let stem = format!("sample_{i:04}");
        write_correspondences(a.out.join(format!("{stem}.csv")), &sample.corrs)?;
        let truth = serde_json::json!({
            "seed": cfg.seed,
            "sample_seed": sample.seed,
            "noise": profile.label(),
            "unit": "mm",
            "transform": TransformEntry::from(&sample.truth),
        });
        let path = a.out.join(format!("{stem}_truth.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&truth).expect("json value") + "\n")
            .map_err(|e| RegError::io(&path, e))?;
    }
    writeln!(
        out,
        "wrote {} samples x {} points ({}) to {} (seed {})",
        set.len(),
        cfg.points,
        profile.label(),
        a.out.display(),
        cfg.seed
    )
    .map_err(io_err)
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let [lo, hi] = custom_bounds(a.sigma_min, a.sigma_max);
    let mut flags = vec![
        ("methods", a.methods.clone()),
        ("noise", a.noise.clone()),
        lo,
        hi,
        ("points", a.points.map(|v| v.to_string())),
        (
            "samples",
            a.samples.or(a.stress.then_some(STRESS_SAMPLES)).map(|v| v.to_string()),
        ),
        ("seed", a.seed.map(|v| v.to_string())),
    ];
    if a.no_sigmas {
        flags.push(("use_sigmas", Some("false".into())));
    }
    let cfg = load_config(&a.config, &flags)?;
    let settings = BenchSettings {
        methods: cfg.methods.clone(),
        scenarios: cfg.scenarios()?,
        n_points: cfg.points,
        n_samples: cfg.samples,
        seed: cfg.seed,
        config: cfg.methods_config.clone(),
        use_sigmas: cfg.use_sigmas,
        parallel: !a.serial,
    };
    let report = Report::from_bench(&run_benchmark(&settings)?);
    emit(&report, a.out.as_deref(), a.format.as_deref(), out)
}

fn cmd_zlevels(a: ZlevelsArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(
        &a.config,
        &[
            ("level_offset", a.offset.map(|v| v.to_string())),
            ("merge_epsilon", a.merge_eps.map(|v| v.to_string())),
        ],
    )?;
    let depths = load_depths(&a.depths)?;
    let levels = extract_z_levels(&depths, cfg.merge_epsilon)?;
    let sz = sigma_z(&levels, a.index, cfg.level_offset)?;
    writeln!(out, "levels  = {}", levels.len()).map_err(io_err)?;
    writeln!(out, "level   = {}", levels.as_slice()[a.index]).map_err(io_err)?;
    writeln!(out, "i       = {}", cfg.level_offset).map_err(io_err)?;
    writeln!(out, "sigma_z = {sz}").map_err(io_err)
}

fn cmd_sigmas(a: SigmasArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&a.config, &[])?;
    let intr = match (&a.intrinsics, cfg.intrinsics) {
        (Some(s), _) => parse_intrinsics(s)?,
        (None, Some(k)) => k,
        (None, None) => return Err(RegError::InvalidArgument("--intrinsics fx,fy,cx,cy is required".into())),
    };
    let uv = parse_floats(&a.pixel, 2, "pixel")?;
    let p = backproject_pinhole(uv[0], uv[1], a.depth, &intr)?;
    let s = point_sigmas(uv[0], uv[1], a.sigma_z, &intr)?;
    writeln!(out, "point      = [{}, {}, {}]", p.x, p.y, p.z).map_err(io_err)?;
    writeln!(out, "sigma      = [{}, {}, {}]", s.sx, s.sy, s.sz).map_err(io_err)?;
    let print_matrix = |out: &mut dyn Write, name: &str, m: &nalgebra::Matrix3<f64>| -> Result<()> {
        writeln!(out, "{name}").map_err(io_err)?;
        for r in 0..3 {
            writeln!(out, "  [{:e}, {:e}, {:e}]", m[(r, 0)], m[(r, 1)], m[(r, 2)]).map_err(io_err)?;
        }
        Ok(())
    };
    print_matrix(out, "covariance (outer product)", &covariance_of_point(&s))?;
    print_matrix(out, "covariance (diagonal)", &diagonal_covariance(&s, COVARIANCE_FLOOR))
}

/// Entry point used by the binary.
pub fn main_entry() -> std::process::ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::ExitCode::from(code.clamp(0, 255) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("regfilt").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run_capture(&["frobnicate"]);
        assert_eq!(code, 2);
        assert!(!err.is_empty());
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("bench"));
    }

    #[test]
    fn sigmas_prints_covariances() {
        let (code, out, err) = run_capture(&[
            "sigmas",
            "--intrinsics",
            "500,500,320,240",
            "--pixel",
            "420,240",
            "--depth",
            "2",
            "--sigma-z",
            "0.006",
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("point      = [0.4, 0, 2]"), "{out}");
        assert!(
            out.contains("sigma      = [0.0012000000000000001, 0, 0.006]")
                || out.contains("sigma      = [0.0012, 0, 0.006]"),
            "{out}"
        );
        assert!(out.contains("outer product"));
    }

    #[test]
    fn bad_set_override() {
        let (code, _, err) = run_capture(&[
            "sigmas",
            "--intrinsics",
            "1,1,0,0",
            "--pixel",
            "0,0",
            "--depth",
            "1",
            "--sigma-z",
            "0",
            "--set",
            "nonsense=1",
        ]);
        assert_eq!(code, 2);
        assert!(err.contains("unknown key"), "{err}");
    }
}
