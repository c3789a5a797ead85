//! Experiment bundles: every parameter of a simulate/deconvolve run, stored
//! as a plain `key=value` manifest so a run can be reproduced from it alone.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::axial::{AxialKernelStack, ForwardModel};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::Snr;
use crate::padding::PadMode;
use crate::phantom::{make_stack, make_trf, phantom_map, table_config, KernelParams, TrfSpec};
use crate::solver::{deconvolve, SolverConfig, SolverReport, StepPolicy};
use crate::tensor::TensorFile;

#[derive(Clone, Debug, PartialEq)]
pub enum TrfSource {
    /// Synthetic intensity map of the configured size.
    Phantom,
    /// Reflectivity read from a tensor file.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub trf: TrfSource,
    pub rows: usize,
    pub cols: usize,
    pub scatterer_step: usize,
    pub m_r: usize,
    pub n_r: usize,
    pub f0: f64,
    pub fs: f64,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub pad_mode: PadMode,
    pub snr: Snr,
    pub seed: u64,
    pub solver: SolverConfig,
    /// 1-based row whose kernel replaces every other (axially-invariant
    /// baseline).
    pub invariant_kernel: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let k = KernelParams::new(256, 5, 12);
        Self {
            trf: TrfSource::Phantom,
            rows: 256,
            cols: 128,
            scatterer_step: 1,
            m_r: k.m_r,
            n_r: k.n_r,
            f0: k.f0,
            fs: k.fs,
            sigma1: None,
            sigma2: None,
            pad_mode: PadMode::Symmetric,
            snr: Snr::Db(40.0),
            seed: 1,
            solver: SolverConfig::default(),
            invariant_kernel: None,
            out_dir: PathBuf::from("."),
        }
    }
}

/// Outputs of [`ExperimentConfig::simulate`].
#[derive(Clone, Debug)]
pub struct Simulation {
    pub trf: Image<f64>,
    pub rf: Image<f64>,
    pub model: ForwardModel<f64>,
}

impl ExperimentConfig {
    /// Image size and radii of a named full-size configuration.
    pub fn for_table(name: &str) -> Result<Self> {
        let c = table_config(name).ok_or_else(|| Error::Parameter(format!("unknown configuration {name:?}")))?;
        Ok(Self { rows: c.m_t, cols: c.n_t, m_r: c.m_r, n_r: c.n_r, ..Self::default() })
    }

    pub fn kernel_params(&self) -> KernelParams {
        let mut p = KernelParams::new(self.rows, self.m_r, self.n_r);
        p.f0 = self.f0;
        p.fs = self.fs;
        if let Some(s) = self.sigma1 {
            p.sigma1 = s;
        }
        if let Some(s) = self.sigma2 {
            p.sigma2 = s;
        }
        p
    }

    pub fn noise_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn make_trf(&self) -> Result<Image<f64>> {
        match &self.trf {
            TrfSource::Phantom => {
                let spec = TrfSpec { scatterer_step: self.scatterer_step, ..TrfSpec::new(phantom_map(self.rows, self.cols), self.seed) };
                make_trf(&spec)
            }
            TrfSource::File(path) => {
                let x: Image<f64> = TensorFile::read(path)?.to_image()?;
                if x.dims() != (self.rows, self.cols) {
                    return Err(Error::Dimension(format!(
                        "TRF file is {:?}, configuration expects {:?}",
                        x.dims(),
                        (self.rows, self.cols)
                    )));
                }
                Ok(x)
            }
        }
    }

    pub fn make_stack(&self) -> Result<AxialKernelStack<f64>> {
        make_stack(&self.kernel_params(), self.cols)
    }

    pub fn simulate(&self) -> Result<Simulation> {
        let trf = self.make_trf()?;
        let model = ForwardModel::new(self.make_stack()?, self.pad_mode)?;
        let rf = model.simulate(&trf, self.snr, self.noise_seed())?;
        Ok(Simulation { trf, rf, model })
    }

    /// Model used for reconstruction: `stack` itself, or the invariant
    /// baseline built from one of its kernels.
    pub fn reconstruction_model(&self, stack: &AxialKernelStack<f64>) -> Result<ForwardModel<f64>> {
        let stack = match self.invariant_kernel {
            Some(row) => AxialKernelStack::invariant(stack.m_t(), stack.n_t(), &stack.kernel(row)?)?,
            None => stack.clone(),
        };
        ForwardModel::new(stack, self.pad_mode)
    }

    pub fn deconvolve(&self, stack: &AxialKernelStack<f64>, y: &Image<f64>) -> Result<SolverReport<f64>> {
        deconvolve(&self.reconstruction_model(stack)?, y, &self.solver, None)
    }

    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put(
            "trf",
            match &self.trf {
                TrfSource::Phantom => "phantom".into(),
                TrfSource::File(p) => format!("file:{}", p.display()),
            },
        );
        put("rows", self.rows.to_string());
        put("cols", self.cols.to_string());
        put("scatterer_step", self.scatterer_step.to_string());
        put("m_r", self.m_r.to_string());
        put("n_r", self.n_r.to_string());
        put("f0", self.f0.to_string());
        put("fs", self.fs.to_string());
        let k = self.kernel_params();
        put("sigma1", k.sigma1.to_string());
        put("sigma2", k.sigma2.to_string());
        put("pad_mode", self.pad_mode.name().into());
        put("snr_db", self.snr.to_string());
        put("seed", self.seed.to_string());
        put("noise_seed", self.noise_seed().to_string());
        put("lambda1", self.solver.lambda1.to_string());
        put("lambda2", self.solver.lambda2.to_string());
        put("iters", self.solver.max_iters.to_string());
        put(
            "initial_step",
            match self.solver.initial_step {
                StepPolicy::Auto => "auto".into(),
                StepPolicy::Fixed(t) => t.to_string(),
            },
        );
        put("backtrack_shrink", self.solver.backtrack_shrink.to_string());
        put("tol", self.solver.tol.map_or("none".into(), |t| t.to_string()));
        put("invariant_kernel", self.invariant_kernel.map_or("none".into(), |r| r.to_string()));
        put("out_dir", self.out_dir.display().to_string());
        s
    }

    /// Parses a manifest; keys that are absent keep their defaults.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("manifest line {}: expected key=value", n + 1)))?;
            c.set(k.trim(), v.trim())
                .map_err(|e| Error::Format(format!("manifest line {}: {e}", n + 1)))?;
        }
        Ok(c)
    }

    /// Sets one manifest key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        fn num<X: std::str::FromStr>(key: &str, v: &str) -> Result<X> {
            v.parse().map_err(|_| Error::Parameter(format!("bad value {v:?} for {key}")))
        }
        fn opt<X: std::str::FromStr>(key: &str, v: &str) -> Result<Option<X>> {
            if v == "none" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "trf" => {
                self.trf = match v {
                    "phantom" => TrfSource::Phantom,
                    _ => match v.strip_prefix("file:") {
                        Some(p) => TrfSource::File(PathBuf::from(p)),
                        None => return Err(Error::Parameter(format!("bad trf source {v:?}"))),
                    },
                }
            }
            "rows" => self.rows = num(key, v)?,
            "cols" => self.cols = num(key, v)?,
            "scatterer_step" => self.scatterer_step = num(key, v)?,
            "m_r" => self.m_r = num(key, v)?,
            "n_r" => self.n_r = num(key, v)?,
            "f0" => self.f0 = num(key, v)?,
            "fs" => self.fs = num(key, v)?,
            "sigma1" => self.sigma1 = opt(key, v)?,
            "sigma2" => self.sigma2 = opt(key, v)?,
            "pad_mode" => self.pad_mode = v.parse()?,
            "snr_db" => self.snr = Snr::parse(v)?,
            "seed" => self.seed = num(key, v)?,
            "noise_seed" => {
                let s: u64 = num(key, v)?;
                if s != self.noise_seed() {
                    return Err(Error::Parameter("noise_seed must equal seed + 1".into()));
                }
            }
            "lambda1" => self.solver.lambda1 = num(key, v)?,
            "lambda2" => self.solver.lambda2 = num(key, v)?,
            "iters" => self.solver.max_iters = num(key, v)?,
            "initial_step" => {
                self.solver.initial_step = match v {
                    "auto" => StepPolicy::Auto,
                    _ => StepPolicy::Fixed(num(key, v)?),
                }
            }
            "backtrack_shrink" => self.solver.backtrack_shrink = num(key, v)?,
            "tol" => self.solver.tol = opt(key, v)?,
            "invariant_kernel" => self.invariant_kernel = opt(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::Parameter(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}
