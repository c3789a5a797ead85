use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use axialconv::bmode::{bmode_render, kernel_preview};
use axialconv::experiment::{ExperimentConfig, TrfSource};
use axialconv::phantom::{nrmse, psnr};
use axialconv::verify::{run_all, VerifyConfig};
use axialconv::{Image64, PadMode, Snr, TensorFile, TensorTag};

const TRF_FILE: &str = "trf.axim";
const RF_FILE: &str = "rf.axim";
const KERNELS_FILE: &str = "kernels.axim";
const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Parser)]
#[command(name = "axialconv", version, about = "Axially-variant kernel ultrasound imaging: simulation, deconvolution and verification")]
struct Cli {
    /// Worker threads for operator application (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Bit-reproducible reductions. Operators are deterministic at any thread
    /// count, so this is accepted for compatibility and has no extra effect.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the depth-varying kernel stack.
    Kernels(KernelsArgs),
    /// Generate a TRF and simulate its RF image.
    Simulate(SimulateArgs),
    /// Reconstruct a TRF from an RF image.
    Deconvolve(DeconvolveArgs),
    /// Run the randomized operator identity suite.
    Verify(VerifyArgs),
    /// Render an image as a log-compressed B-mode PGM.
    Bmode(BmodeArgs),
    /// Compare an estimate with a reference image.
    Metrics(MetricsArgs),
}

/// Experiment parameters; anything left unset keeps the manifest or
/// default value.
#[derive(Args, Default)]
struct ExperimentArgs {
    /// Start from a saved manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Start from a full-size configuration (trf1, trf2, trf3).
    #[arg(long)]
    config: Option<String>,
    /// Image height m_t.
    #[arg(long)]
    rows: Option<usize>,
    /// Image width n_t.
    #[arg(long)]
    cols: Option<usize>,
    /// Axial kernel radius
    #[arg(long = "m-r")]
    m_r: Option<usize>,
    /// Lateral kernel radius
    #[arg(long = "n-r")]
    n_r: Option<usize>,
    /// Center frequency in Hz.
    #[arg(long)]
    f0: Option<f64>,
    /// Sampling frequency in Hz.
    #[arg(long)]
    fs: Option<f64>,
    /// Axial SD in pixels (default m_r/3).
    #[arg(long)]
    sigma1: Option<f64>,
    /// Lateral SD at the image edges in pixels (default n_r/3).
    #[arg(long)]
    sigma2: Option<f64>,
    /// zero, replicate, symmetric or circular.
    #[arg(long = "pad-mode")]
    pad_mode: Option<PadMode>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.manifest, &self.config) {
            (Some(_), Some(_)) => bail!("--manifest and --config are mutually exclusive"),
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_manifest(&text)?
            }
            (None, Some(name)) => ExperimentConfig::for_table(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        over!(rows, cols, m_r, n_r, f0, fs, pad_mode);
        if self.sigma1.is_some() {
            c.sigma1 = self.sigma1;
        }
        if self.sigma2.is_some() {
            c.sigma2 = self.sigma2;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct KernelsArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Output kernel-stack tensor.
    #[arg(long)]
    out: PathBuf,
    /// Also write envelope kernels at 20 depths as a PGM strip.
    #[arg(long)]
    preview: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Signal-to-noise ratio in dB, or "inf" for no noise.
    #[arg(long = "snr-db")]
    snr_db: Option<Snr>,
    #[arg(long)]
    seed: Option<u64>,
    /// Spacing of the interpolated scatterer grid (1 = per pixel).
    #[arg(long = "scatterer-step")]
    scatterer_step: Option<usize>,
    /// Read the TRF from a tensor file instead of generating one.
    #[arg(long)]
    trf: Option<PathBuf>,
    /// Directory for trf.axim, rf.axim, kernels.axim and manifest.txt.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DeconvolveArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Observed RF image (default: rf.axim in the output directory).
    #[arg(long)]
    rf: Option<PathBuf>,
    /// Kernel stack (default: kernels.axim in the output directory).
    #[arg(long)]
    kernels: Option<PathBuf>,
    /// L1 weight
    #[arg(long)]
    lambda1: Option<f64>,
    /// Ridge weight
    #[arg(long)]
    lambda2: Option<f64>,
    /// Maximum iterations
    #[arg(long)]
    iters: Option<usize>,
    /// Relative objective change that stops the solver early.
    #[arg(long)]
    tol: Option<f64>,
    /// Use kernel ROW (1-based, default m_t/2) at every depth.
    #[arg(long = "invariant-kernel", value_name = "ROW", num_args = 0..=1)]
    invariant_kernel: Option<Option<usize>>,
    /// Directory holding the simulation outputs
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Reconstruction tensor (default: recon.axim or recon-ai.axim).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Objective trace CSV (default: next to the reconstruction).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random instances per identity.
    #[arg(long, default_value_t = VerifyConfig::default().instances)]
    instances: usize,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    seed: u64,
}

#[derive(Args)]
struct BmodeArgs {
    /// Image tensor to render.
    input: PathBuf,
    /// Dynamic range in dB.
    #[arg(long, default_value_t = 40.0)]
    dr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    reference: PathBuf,
    estimate: PathBuf,
}

fn read_image(path: &Path) -> Result<Image64> {
    let t = TensorFile::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(t.to_image()?)
}

fn write_tensor(t: &TensorFile, path: &Path) -> Result<()> {
    t.write(path).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_kernels(a: KernelsArgs) -> Result<()> {
    let cfg = a.exp.config()?;
    let stack = cfg.make_stack()?;
    write_tensor(&TensorFile::from_stack(&stack), &a.out)?;
    println!("kernels: {} x {} x {} -> {}", stack.m_t(), stack.m_k(), stack.n_k(), a.out.display());
    if let Some(p) = a.preview {
        kernel_preview(&stack, 20)?.write_pgm(&p)?;
        println!("preview -> {}", p.display());
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = a.exp.config()?;
    if let Some(s) = a.snr_db {
        cfg.snr = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.scatterer_step {
        cfg.scatterer_step = s;
    }
    if let Some(p) = a.trf {
        cfg.trf = TrfSource::File(p);
    }
    if let Some(d) = a.out_dir {
        cfg.out_dir = d;
    }
    ensure_dir(&cfg.out_dir)?;
    let t0 = Instant::now();
    let sim = cfg.simulate()?;
    let elapsed = t0.elapsed();
    let dir = &cfg.out_dir;
    write_tensor(&TensorFile::from_image(&sim.trf, TensorTag::Trf), &dir.join(TRF_FILE))?;
    write_tensor(&TensorFile::from_image(&sim.rf, TensorTag::Rf), &dir.join(RF_FILE))?;
    write_tensor(&TensorFile::from_stack(sim.model.stack()), &dir.join(KERNELS_FILE))?;
    std::fs::write(dir.join(MANIFEST_FILE), cfg.to_manifest())?;
    println!(
        "simulate: {}x{} TRF, kernels {}x{}, snr {} dB, {:.3}s -> {}",
        cfg.rows,
        cfg.cols,
        2 * cfg.m_r + 1,
        2 * cfg.n_r + 1,
        cfg.snr,
        elapsed.as_secs_f64(),
        dir.display()
    );
    Ok(())
}

fn cmd_deconvolve(a: DeconvolveArgs) -> Result<()> {
    let mut cfg = a.exp.config()?;
    if let Some(v) = a.lambda1 {
        cfg.solver.lambda1 = v;
    }
    if let Some(v) = a.lambda2 {
        cfg.solver.lambda2 = v;
    }
    if let Some(v) = a.iters {
        cfg.solver.max_iters = v;
    }
    if a.tol.is_some() {
        cfg.solver.tol = a.tol;
    }
    if let Some(d) = a.out_dir {
        cfg.out_dir = d;
    }
    let dir = cfg.out_dir.clone();
    let y = read_image(&a.rf.unwrap_or_else(|| dir.join(RF_FILE)))?;
    let kpath = a.kernels.unwrap_or_else(|| dir.join(KERNELS_FILE));
    let stack = TensorFile::read(&kpath)
        .with_context(|| format!("reading {}", kpath.display()))?
        .to_stack::<f64>(Some(y.cols()))?;
    if let Some(row) = a.invariant_kernel {
        cfg.invariant_kernel = Some(row.unwrap_or((stack.m_t() / 2).max(1)));
    }
    let stem = if cfg.invariant_kernel.is_some() { "recon-ai" } else { "recon" };
    let out = a.out.unwrap_or_else(|| dir.join(format!("{stem}.axim")));
    let trace = a.trace.unwrap_or_else(|| out.with_extension("csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }

    let t0 = Instant::now();
    let rep = cfg.deconvolve(&stack, &y)?;
    write_tensor(&TensorFile::from_image(&rep.x, TensorTag::Trf), &out)?;
    std::fs::write(&trace, rep.trace_csv()).with_context(|| format!("writing {}", trace.display()))?;
    println!(
        "deconvolve: {} iterations, objective {:.6e} -> {:.6e}, {:.2}s -> {}",
        rep.iterations_run,
        rep.initial_objective,
        rep.final_objective,
        t0.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let rep = run_all(VerifyConfig { instances: a.instances, seed: a.seed })?;
    print!("{}", rep.to_text());
    Ok(rep.passed())
}

fn cmd_bmode(a: BmodeArgs) -> Result<()> {
    let img = read_image(&a.input)?;
    bmode_render(&img, a.dr)?.write_pgm(&a.out)?;
    println!("bmode: {} dB -> {}", a.dr, a.out.display());
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let r = read_image(&a.reference)?;
    let e = read_image(&a.estimate)?;
    println!("nrmse={:.6e} psnr={:.4}", nrmse(&r, &e)?, psnr(&r, &e)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.cmd {
        Cmd::Kernels(a) => cmd_kernels(a)?,
        Cmd::Simulate(a) => cmd_simulate(a)?,
        Cmd::Deconvolve(a) => cmd_deconvolve(a)?,
        Cmd::Verify(a) => return cmd_verify(a),
        Cmd::Bmode(a) => cmd_bmode(a)?,
        Cmd::Metrics(a) => cmd_metrics(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
