use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use iadmm::solvers::NuSource;
use iadmm::{SolverConfig, TheoryConstants};

use crate::error::CliError;

/// Ordered `key=value` record written next to every output file.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        let mut m = Self::default();
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_config(&mut self, cfg: &SolverConfig) {
        self.push("method", cfg.method);
        self.push("sigma", cfg.sigma);
        self.push("delta", cfg.delta);
        self.push("alpha", cfg.alpha);
        self.push("beta", cfg.beta);
        self.push("q", cfg.q);
        self.push("epsilon", cfg.epsilon);
        self.push("max_iters", cfg.max_iters);
        self.push("variant", cfg.variant);
        self.push("diagnostics", cfg.diagnostics_on);
        self.push("warmup", cfg.warmup);
        self.push("stop_control", cfg.stop_control);
        self.push("cg_tol", cfg.cg_tol);
        match cfg.cg_max_iters {
            Some(m) => self.push("cg_max_iters", m),
            None => self.push("cg_max_iters", "auto"),
        }
        self.push("init", format!("{:?}", cfg.init).to_lowercase());
        self.push("admissibility", format!("{:?}", cfg.admissibility).to_lowercase());
    }

    pub fn push_constants(&mut self, c: &TheoryConstants) {
        self.push("theta", c.theta);
        self.push("norm_T", c.norm_t);
        self.push("norm_K", c.norm_k);
        self.push("norm_K_converged", c.norm_k_converged);
        self.push("nu_hat", c.nu_hat);
        match c.nu_source {
            NuSource::Dense => self.push("nu_source", "dense"),
            NuSource::Halko { confidence } => {
                self.push("nu_source", "randomized");
                self.push("nu_confidence", confidence);
            }
        }
        self.push("delta_min", c.delta_min);
        self.push("h_hat", c.h_hat);
        self.push("gamma", c.gamma);
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write_beside(&self, output: &Path) -> Result<PathBuf, CliError> {
        let path = sidecar_path(output);
        fs::write(&path, self.render()).map_err(|e| CliError::io(path.display(), e))?;
        Ok(path)
    }
}

/// `out.pgm` gets `out.pgm.manifest`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order() {
        let mut m = Manifest::default();
        m.push("b", 2);
        m.push("a", "x");
        assert_eq!(m.render(), "b=2\na=x\n");
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("dir/out.pgm")), PathBuf::from("dir/out.pgm.manifest"));
    }
}
