use clap::Args;
use iadmm::solvers::{compute_theory_constants, NuSource, Problem};
use iadmm::{DiffVariant, Image, Method, SolverConfig};

use crate::common::{KernelArgs, NuArgs};
use crate::error::CliError;
use crate::parse_with;

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Image side length.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value = "banded", value_parser = parse_with::<DiffVariant>)]
    pub variant: DiffVariant,
    #[command(flatten)]
    pub nu: NuArgs,
    /// Penalties at which to report ĥ and the γ constants (comma separated).
    /// Defaults to 1.1·δ_min.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
}

pub fn run(args: &ConstantsArgs) -> Result<(), CliError> {
    if let Some(d) = args.delta.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(CliError::args(format!("delta must be positive, got {d}")));
    }
    let cfg = SolverConfig {
        method: Method::Iadmm,
        alpha: args.alpha,
        beta: args.beta,
        delta: 1.0,
        variant: args.variant,
        nu_estimator: args.nu.estimator(),
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let blur = args.kernel.operator(args.n)?;
    let problem = Problem::new(&cfg, &Image::zeros(args.n), blur)?;
    let base = compute_theory_constants(&cfg, &problem)?;

    let mut lines: Vec<(String, String)> = vec![
        ("n".into(), args.n.to_string()),
        ("theta".into(), base.theta.to_string()),
        ("norm_T".into(), base.norm_t.to_string()),
        ("norm_K".into(), base.norm_k.to_string()),
        ("norm_K_converged".into(), base.norm_k_converged.to_string()),
        ("nu_hat".into(), base.nu_hat.to_string()),
    ];
    match base.nu_source {
        NuSource::Dense => lines.push(("nu_source".into(), "dense".into())),
        NuSource::Halko { confidence } => {
            lines.push(("nu_source".into(), "randomized".into()));
            lines.push(("confidence".into(), confidence.to_string()));
        }
    }
    lines.push(("alpha".into(), args.alpha.to_string()));
    lines.push(("delta_min".into(), base.delta_min.to_string()));

    let deltas = if args.delta.is_empty() {
        vec![1.1 * base.delta_min]
    } else {
        args.delta.clone()
    };
    for delta in deltas {
        let c = base.with_parameters(args.alpha, delta);
        let tag = |k: &str| format!("{k}[{delta}]");
        lines.push((tag("admissible"), c.admissible(delta).to_string()));
        lines.push((tag("h_hat"), c.h_hat.to_string()));
        lines.push((tag("c"), c.c.to_string()));
        lines.push((tag("gamma_u"), c.gamma_u.to_string()));
        lines.push((tag("gamma_v"), c.gamma_v.to_string()));
        lines.push((tag("gamma_p"), c.gamma_p.to_string()));
        lines.push((tag("gamma"), c.gamma.to_string()));
    }

    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in lines {
        println!("{k:<width$} = {v}");
    }
    Ok(())
}
