use std::fs::File;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use iadmm::solvers::{Admissibility, Initialization, TRACE_COLUMNS};
use iadmm::{run as solve, DiffVariant, IterTrace, Method, SolverConfig};

use crate::common::{read_image, write_image, KernelArgs, NuArgs};
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::parse_with;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Primed,
    Duplicated,
}

impl From<InitArg> for Initialization {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Primed => Initialization::Primed,
            InitArg::Duplicated => Initialization::Duplicated,
        }
    }
}

#[derive(Debug, Args)]
pub struct DeblurArgs {
    /// Blurred input image (binary PGM).
    pub input: PathBuf,
    #[arg(long, default_value = "iadmm", value_parser = parse_with::<Method>)]
    pub method: Method,
    /// Penalty exponent in (0, 1]; 1 and 0.5 have closed-form proximal maps.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Inertial weight (ignored by admm).
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Regularization weight.
    #[arg(long, default_value_t = 1e-3)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Iterations before a residual increase may stop the run.
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    #[arg(long, default_value = "banded", value_parser = parse_with::<DiffVariant>)]
    pub variant: DiffVariant,
    #[arg(long, value_enum, default_value_t = InitArg::Primed)]
    pub init: InitArg,
    /// Reject δ at or below δ_min instead of warning.
    #[arg(long)]
    pub enforce_delta: bool,
    /// Skip the convergence constants and the F, dual_ratio and
    /// subgrad_ratio trace columns.
    #[arg(long)]
    pub no_diagnostics: bool,
    /// Clean image; fills the err and snr trace columns.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub nu: NuArgs,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-iteration CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl DeblurArgs {
    pub fn config(&self, n: usize) -> SolverConfig {
        SolverConfig {
            method: self.method,
            sigma: self.sigma,
            delta: self.delta,
            alpha: self.alpha,
            beta: self.beta,
            q: self.q,
            epsilon: self.eps,
            max_iters: self.max_iters,
            variant: self.variant,
            diagnostics_on: !self.no_diagnostics,
            warmup: self.warmup,
            init: self.init.into(),
            admissibility: if self.enforce_delta {
                Admissibility::Enforce
            } else {
                Admissibility::Warn
            },
            // Small problems get the exact value unless probes were asked for.
            nu_estimator: if n <= 8 && !self.nu.dense_nu {
                iadmm::solvers::NuEstimator::Auto
            } else {
                self.nu.estimator()
            },
            ..SolverConfig::default()
        }
    }
}

pub fn run(args: &DeblurArgs) -> Result<(), CliError> {
    let blurred = read_image(&args.input)?;
    let n = blurred.n();
    let truth = args.truth.as_ref().map(|p| read_image(p)).transpose()?;
    let blur = args.kernel.operator(n)?;
    let cfg = args.config(n);
    cfg.validate()?;

    let mut writer = match &args.trace {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(TRACE_COLUMNS)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut write_err = None;
    let mut observer = |t: &IterTrace| {
        if let (Some(w), None) = (writer.as_mut(), &write_err) {
            if let Err(e) = w.write_record(t.csv_fields()).map_err(CliError::from).and_then(|_| Ok(w.flush()?)) {
                write_err = Some(e);
            }
        }
    };
    let out = solve(&cfg, &blurred, blur, truth.as_ref(), &mut observer)?;
    if let Some(e) = write_err {
        return Err(e);
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    write_image(&out.restored, &args.output)?;

    let last = out.traces.last();
    let mut m = Manifest::new();
    m.push("command", "deblur");
    m.push("input", args.input.display());
    m.push("output", args.output.display());
    if let Some(p) = &args.trace {
        m.push("trace", p.display());
    }
    if let Some(p) = &args.truth {
        m.push("truth", p.display());
    }
    m.push("n", n);
    m.push("kernel_size", args.kernel.kernel_size);
    m.push("kernel_sigma", args.kernel.kernel_sigma);
    m.push("nu_probes", args.nu.probes);
    m.push("nu_probe_base", args.nu.probe_base);
    m.push("seed", args.nu.seed);
    m.push_config(&cfg);
    if let Some(c) = &out.constants {
        m.push_constants(c);
    }
    m.push("stop_reason", out.stop_reason);
    m.push("iterations", out.iterations);
    if let Some(t) = last {
        m.push("final_res", t.residual);
        m.push("final_res_i", t.residual_inertial);
        m.push("final_objective", t.objective);
        if let (Some(err), Some(snr)) = (t.real_error, t.snr) {
            m.push("final_err", err);
            m.push("final_snr", snr);
        }
    }
    m.write_beside(&args.output)?;

    println!("stop_reason={}", out.stop_reason);
    println!("iterations={}", out.iterations);
    if let Some(snr) = last.and_then(|t| t.snr) {
        println!("snr={snr:.4}");
    }
    Ok(())
}
