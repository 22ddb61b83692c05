use std::path::Path;

use clap::Args;
use iadmm::linsolve::NuSettings;
use iadmm::solvers::NuEstimator;
use iadmm::{read_pgm, write_pgm, BlurOperator, Image};

use crate::error::CliError;

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Side length of the Gaussian blur kernel (odd).
    #[arg(long, default_value_t = 17)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 7.0)]
    pub kernel_sigma: f64,
}

impl KernelArgs {
    pub fn operator(&self, n: usize) -> Result<BlurOperator, CliError> {
        Ok(BlurOperator::gaussian(n, self.kernel_size, self.kernel_sigma)?)
    }
}

/// Settings for the randomized lower bound on `ν`.
#[derive(Debug, Clone, Args)]
pub struct NuArgs {
    /// Number of Gaussian probes.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    /// Probe base `b`; the bound holds with probability `1 − b^(−probes)`.
    #[arg(long, default_value_t = 2.0)]
    pub probe_base: f64,
    /// Seed for the probe vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compute `ν` by a dense eigensolve instead (small images only).
    #[arg(long)]
    pub dense_nu: bool,
}

impl NuArgs {
    pub fn settings(&self) -> NuSettings {
        NuSettings {
            probes: self.probes,
            base: self.probe_base,
            seed: self.seed,
            ..NuSettings::default()
        }
    }

    pub fn estimator(&self) -> NuEstimator {
        if self.dense_nu {
            NuEstimator::Dense
        } else {
            NuEstimator::Halko(self.settings())
        }
    }
}

/// Reads a PGM, naming the file in I/O errors.
pub fn read_image(path: &Path) -> Result<Image, CliError> {
    read_pgm(path).map_err(|e| match e {
        iadmm::Error::Io(io) => CliError::io(path.display(), io),
        other => CliError::io(path.display(), other),
    })
}

pub fn write_image(img: &Image, path: &Path) -> Result<(), CliError> {
    write_pgm(img, path).map_err(|e| CliError::io(path.display(), e))
}
