//! `csim`: sparse recovery, denoising, parameter inspection and batch
//! experiments from the command line.
//!
//! Exit codes: 0 on success, 2 for bad arguments, 3 for runtime failures.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use csim_core::denoise::{denoise_image, FilterMethod};
use csim_core::harness::{
    self, denoise_grid, parse_config, ExperimentSpec, SolverKind, SolverOverrides,
};
use csim_core::io::{load_csv_vector, load_pgm, save_csv_vector, save_pgm, PgmFormat};
use csim_core::metrics::{psnr, DEFAULT_PEAK};
use csim_core::params::SelectionOptions;
use csim_core::signal::{observed_count, synth_piecewise_smooth};
use csim_core::{CsimParams, DictionaryKind, Error, Execution};

#[derive(Parser, Debug)]
#[command(name = "csim", version, about = "CSIM-weighted sparse recovery and denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recover a CSV signal or a PGM image from a random subset of its samples.
    Recover(RecoverArgs),
    /// Patch-wise FIR denoising of a PGM image.
    Denoise(DenoiseArgs),
    /// Quality versus sampling ratio on synthetic sparse signals.
    SweepSr(SweepArgs),
    /// Relative error versus iteration on synthetic sparse signals.
    SweepIters(SweepArgs),
    /// Coherence, conditioning and the k2/k1 bounds of a dictionary.
    Params(ParamsArgs),
    /// Basic dictionary facts; optionally writes the atoms as CSV.
    DictInfo(DictArgs),
    /// Writes a synthetic piecewise-smooth PGM test image.
    SynthImage(SynthArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dict: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Sampling ratio in (0, 1]. Repeatable.
    #[arg(long, value_delimiter = ',')]
    sr: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// csim-alm, fista or iht. Repeatable.
    #[arg(long, value_delimiter = ',')]
    solver: Vec<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Any config key, e.g. `--set sigma1=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Nonzeros per synthetic code (default ceil(0.1 p)).
    #[arg(long)]
    k: Option<usize>,
    /// Record wall-clock runtime per trial.
    #[arg(long)]
    timing: bool,
    /// Output CSV; a plot script is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    common: Common,
    /// `.csv` signal (one value per line or comma separated) or `.pgm` image.
    #[arg(long)]
    input: PathBuf,
    /// Recovered signal or image, same format as the input.
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines run log (default `<out>.jsonl`).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Mse,
    Csim,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Noise standard deviation on the 0..255 scale.
    #[arg(long)]
    sigma_n: f64,
    #[arg(long, value_enum, default_value = "csim")]
    method: Method,
    /// Filter order.
    #[arg(long, default_value_t = 6)]
    m: usize,
    /// k2 / k1 for the CSIM filter.
    #[arg(long, default_value_t = 4.0)]
    ratio: f64,
    /// Optional clean reference for PSNR in the log.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct DictArgs {
    #[arg(long, default_value = "dct")]
    dict: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Number of atoms (default n).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    json: bool,
    /// Write the atoms as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[command(flatten)]
    dict: DictArgs,
    #[arg(long)]
    kappa_max: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Sparsity for the RIP bound (default floor(0.1 n)).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::KappaInfeasible(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, Failure>;

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Defaults, then the config file, then flags.
fn build_spec(c: &Common) -> CliResult<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let entries = parse_config(&text).map_err(|e| Failure::Usage(e.to_string()))?;
        spec.apply(&entries)?;
    }
    if let Some(d) = &c.dict {
        spec.dict = d.parse()?;
    }
    if let Some(n) = c.n {
        spec.n = n;
        if c.p.is_none() && c.config.is_none() {
            spec.p = n;
        }
    }
    if let Some(p) = c.p {
        spec.p = p;
    }
    if !c.sr.is_empty() {
        spec.srs = c.sr.clone();
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if !c.solver.is_empty() {
        spec.solvers = c.solver.iter().map(|s| s.parse()).collect::<Result<_, Error>>()?;
    }
    if let Some(m) = c.max_iter {
        spec.max_iter = m;
    }
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        spec.set(k, v)?;
    }
    spec.exec = exec(c.sequential);
    Ok(spec)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_fail(path, e))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("out")
        .to_string()
}

fn write_script(path: &Path, text: &str) -> CliResult {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| io_fail(path, e))
}

fn sweep(args: &SweepArgs, iters: bool) -> CliResult {
    let mut spec = build_spec(&args.common)?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(k) = args.k {
        spec.sparsity = Some(k);
    }
    spec.timing |= args.timing;
    spec.validate()?;

    let mut out = create(&args.out)?;
    let script = sibling(&args.out, "_plot.py");
    let png = file_name(&sibling(&args.out, ".png"));
    let csv = file_name(&args.out);
    if iters {
        let rows = harness::sweep_iters(&spec)?;
        harness::write_iters_csv(&rows, &mut out)?;
        write_script(&script, &harness::sweep_iters_plot_script(&csv, &png))?;
    } else {
        let rows = harness::sweep_sr(&spec)?;
        harness::write_sweep_csv(&rows, &mut out)?;
        write_script(&script, &harness::sweep_sr_plot_script(&csv, &png))?;
    }
    out.flush().map_err(|e| io_fail(&args.out, e))?;
    eprintln!("wrote {} and {}", args.out.display(), script.display());
    Ok(())
}

struct RunLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RunLog {
    fn open(path: PathBuf) -> CliResult<Self> {
        Ok(Self { out: create(&path)?, path })
    }

    fn event(&mut self, v: Value) -> CliResult {
        writeln!(self.out, "{v}").map_err(|e| io_fail(&self.path, e))
    }

    fn finish(mut self) -> CliResult {
        self.out.flush().map_err(|e| io_fail(&self.path, e))
    }
}

fn log_path(log: &Option<PathBuf>, out: &Path) -> PathBuf {
    log.clone().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".jsonl");
        PathBuf::from(s)
    })
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Every effective solver setting, defaults included.
fn effective_config(spec: &ExperimentSpec, kind: SolverKind, n: usize, m: usize) -> Value {
    let o: &SolverOverrides = &spec.overrides;
    match kind {
        SolverKind::CsimAlm => to_json(&o.csim_alm(n, m, spec.max_iter)),
        SolverKind::Fista => to_json(&o.fista(spec.max_iter)),
        SolverKind::Iht => to_json(&o.iht(spec.max_iter)),
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn recover(args: &RecoverArgs) -> CliResult {
    let mut spec = build_spec(&args.common)?;
    let defaults = ExperimentSpec::default();
    // The sweep defaults list several solvers and ratios; recover runs one.
    let kind = match spec.solvers.as_slice() {
        _ if spec.solvers == defaults.solvers => SolverKind::CsimAlm,
        [one] => *one,
        _ => return Err(Failure::Usage("recover takes exactly one solver".into())),
    };
    let sr = match spec.srs.as_slice() {
        _ if spec.srs == defaults.srs => 0.5,
        [one] => *one,
        _ => return Err(Failure::Usage("recover takes exactly one sampling ratio".into())),
    };
    spec.solvers = vec![kind];
    spec.srs = vec![sr];
    spec.validate()?;
    let log_file = log_path(&args.log, &args.out);

    if is_pgm(&args.input) {
        let image = load_pgm(&args.input)?;
        let mut log = RunLog::open(log_file)?;
        let dict = spec.dict.build(spec.n, spec.p)?;
        let m = observed_count(spec.n, sr)?;
        log.event(json!({
            "event": "config",
            "command": "recover",
            "input": args.input,
            "spec": to_json(&spec),
            "solver_config": effective_config(&spec, kind, spec.n, m),
        }))?;
        let r = harness::recover_image(&image, sr, spec.seed, &dict, kind, &spec.overrides, spec.max_iter, spec.exec)?;
        save_pgm(&args.out, &r.image, PgmFormat::Binary)?;
        save_pgm(sibling(&args.out, "_masked.pgm"), &r.masked, PgmFormat::Binary)?;
        for (patch, iters) in r.patch_iterations.iter().enumerate() {
            log.event(json!({"event": "patch", "patch": patch, "iterations": iters}))?;
        }
        log.event(json!({
            "event": "result",
            "observed_samples": r.observed_samples,
            "psnr_db": r.scores.psnr_db,
            "ssim": r.scores.ssim,
            "mse": r.scores.mse,
        }))?;
        eprintln!("psnr {:.3} dB, ssim {:.4}", r.scores.psnr_db, r.scores.ssim);
        log.finish()
    } else {
        let x = load_csv_vector(&args.input)?;
        let mut log = RunLog::open(log_file)?;
        if args.common.n.is_none() {
            spec.n = x.len();
            if args.common.p.is_none() {
                spec.p = x.len();
            }
        }
        let dict = spec.dict.build(spec.n, spec.p)?;
        let m = observed_count(spec.n, sr)?;
        log.event(json!({
            "event": "config",
            "command": "recover",
            "input": args.input,
            "spec": to_json(&spec),
            "solver_config": effective_config(&spec, kind, spec.n, m),
        }))?;
        let r = harness::recover_signal(&x, sr, spec.seed, &dict, kind, &spec.overrides, spec.max_iter)?;
        save_csv_vector(&args.out, &r.output)?;
        for (i, obj) in r.run.objective_history.iter().enumerate() {
            let mut ev = json!({"event": "iter", "iter": i + 1, "objective": obj});
            if let Some((rx, rz)) = r.run.residual_history.get(i) {
                ev["residual_x"] = json!(rx);
                ev["residual_z"] = json!(rz);
            }
            log.event(ev)?;
        }
        log.event(json!({
            "event": "result",
            "iterations": r.run.iterations,
            "converged": r.run.converged,
            "observed": r.mask.observed(),
            "data_fidelity": r.data_fidelity,
            "psnr_db": r.scores.psnr_db,
            "ssim": r.scores.ssim,
            "mse": r.scores.mse,
            "s_hat": r.run.s_hat,
        }))?;
        eprintln!("iterations {}, data fidelity {:.3e}", r.run.iterations, r.data_fidelity);
        log.finish()
    }
}

fn denoise(args: &DenoiseArgs) -> CliResult {
    if !(args.sigma_n >= 0.0 && args.sigma_n.is_finite()) {
        return Err(Failure::Usage(format!("--sigma-n must be >= 0, got {}", args.sigma_n)));
    }
    let image = load_pgm(&args.input)?;
    let reference = args.reference.as_deref().map(load_pgm).transpose()?;
    let method = match args.method {
        Method::Mse => FilterMethod::Mse,
        Method::Csim => FilterMethod::Csim(CsimParams::with_ratio(args.m.max(2), args.ratio)?),
    };
    let grid = denoise_grid(&image)?;
    let sigma_n_sq = args.sigma_n * args.sigma_n;
    let mut log = RunLog::open(log_path(&args.log, &args.out))?;
    log.event(json!({
        "event": "config",
        "command": "denoise",
        "input": args.input,
        "method": method.name(),
        "m": args.m,
        "sigma_n": args.sigma_n,
        "ratio": args.ratio,
        "patch_side": grid.side(),
        "patch_stride": grid.stride(),
        "patches": grid.len(),
    }))?;
    let out = denoise_image(&image, &grid, args.m, sigma_n_sq, method, exec(args.sequential))?;
    save_pgm(&args.out, &out.image, PgmFormat::Binary)?;
    let mut result = json!({"event": "result", "floored_patches": out.floored_patches});
    if let Some(clean) = &reference {
        result["psnr_input_db"] = json!(psnr(&clean.data, &image.data, DEFAULT_PEAK)?);
        result["psnr_output_db"] = json!(psnr(&clean.data, &out.image.data, DEFAULT_PEAK)?);
        result["mean_patch_ssim"] = json!(harness::mean_patch_ssim(clean, &out.image)?);
    }
    log.event(result)?;
    if out.floored_patches > 0 {
        eprintln!("{} patches had noise variance above their sample variance", out.floored_patches);
    }
    log.finish()
}

fn dictionary(args: &DictArgs) -> CliResult<(DictionaryKind, csim_core::Dictionary)> {
    let kind: DictionaryKind = args.dict.parse()?;
    let dict = kind.build(args.n, args.p.unwrap_or(args.n))?;
    if let Some(path) = &args.out {
        dict.save_csv(path)?;
    }
    Ok((kind, dict))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Recover(a) => recover(&a),
        Command::Denoise(a) => denoise(&a),
        Command::SweepSr(a) => sweep(&a, false),
        Command::SweepIters(a) => sweep(&a, true),
        Command::Params(a) => {
            let (kind, dict) = dictionary(&a.dict)?;
            let d = SelectionOptions::default_for(dict.n());
            let opts = SelectionOptions {
                kappa_max: a.kappa_max.unwrap_or(d.kappa_max),
                delta: a.delta.unwrap_or(d.delta),
                k: a.k.unwrap_or(d.k),
            };
            let r = harness::params_report(kind, &dict, opts)?;
            if a.dict.json {
                print_json(&to_json(&r));
            } else {
                println!("{r}");
            }
            Ok(())
        }
        Command::DictInfo(a) => {
            let (kind, dict) = dictionary(&a)?;
            let info = harness::dict_info(kind, &dict)?;
            if a.json {
                print_json(&to_json(&info));
            } else {
                println!("{info}");
            }
            Ok(())
        }
        Command::SynthImage(a) => {
            let img = synth_piecewise_smooth(a.height, a.width, a.seed)?;
            save_pgm(&a.out, &img, PgmFormat::Binary)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
