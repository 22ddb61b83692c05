use std::path::PathBuf;

use clap::Args;
use iadmm::{degrade, make_phantom, BlurOperator, DegradationSpec, PhantomKind};

use crate::common::{read_image, write_image};

use crate::error::CliError;
use crate::manifest::Manifest;
use crate::parse_with;

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "phantom"])))]
pub struct BlurArgs {
    /// Clean input image (binary PGM).
    pub input: Option<PathBuf>,
    /// Generate a phantom instead of reading an image.
    #[arg(long, value_parser = parse_with::<PhantomKind>)]
    pub phantom: Option<PhantomKind>,
    /// Phantom side length.
    #[arg(long, default_value_t = 64, requires = "phantom")]
    pub n: usize,
    #[arg(long, default_value_t = 17)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 7.0)]
    pub kernel_sigma: f64,
    /// Standard deviation of additive Gaussian noise on the [0, 1] scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Seed for the phantom layout and the noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(args: &BlurArgs) -> Result<(), CliError> {
    let clean = match (&args.input, args.phantom) {
        (Some(path), _) => read_image(path)?,
        (None, Some(kind)) => make_phantom(kind, args.n, args.seed)?,
        (None, None) => return Err(CliError::args("an input image or --phantom is required")),
    };
    let spec = DegradationSpec {
        kernel_size: args.kernel_size,
        kernel_sigma: args.kernel_sigma,
        noise_sigma: args.noise_sigma,
        rng_seed: args.seed,
    };
    spec.validate()?;
    let blur = BlurOperator::gaussian(clean.n(), spec.kernel_size, spec.kernel_sigma)?;
    let blurred = degrade(&clean, &spec, &blur)?;
    write_image(&blurred, &args.output)?;

    let mut m = Manifest::new();
    m.push("command", "blur");
    match (&args.input, args.phantom) {
        (Some(path), _) => m.push("input", path.display()),
        (None, Some(kind)) => m.push("phantom", kind),
        _ => {}
    }
    m.push("n", clean.n());
    m.push("seed", args.seed);
    m.push("kernel_size", spec.kernel_size);
    m.push("kernel_sigma", spec.kernel_sigma);
    m.push("noise_sigma", spec.noise_sigma);
    m.push("output", args.output.display());
    m.write_beside(&args.output)?;
    Ok(())
}
