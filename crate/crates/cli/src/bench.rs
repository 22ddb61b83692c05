use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use iadmm::solvers::Admissibility;
use iadmm::{degrade, make_phantom, run as solve, DegradationSpec, Image, Method, PhantomKind, SolverConfig};
use rayon::prelude::*;

use crate::common::{read_image, KernelArgs};
use crate::error::CliError;
use crate::parse_with;

pub const RESULT_COLUMNS: [&str; 15] = [
    "image",
    "method",
    "q",
    "alpha",
    "delta",
    "eps",
    "sigma",
    "iterations",
    "stop_reason",
    "error",
    "snr",
    "res",
    "ratio",
    "status",
    "message",
];

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("images_or_phantoms").required(true).args(["images", "phantoms"])))]
pub struct BenchArgs {
    /// Clean PGM images or glob patterns; each is blurred before solving.
    #[arg(long, num_args = 1..)]
    pub images: Vec<String>,
    /// Phantoms to generate instead of (or besides) images, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<PhantomKind>)]
    pub phantoms: Vec<PhantomKind>,
    /// Phantom side length.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Seed for phantoms and noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Grid file: one `method alpha delta eps q` cell per line, `#` comments.
    #[arg(long)]
    pub grid: PathBuf,
    /// Regularization weight shared by every cell.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Number of cells solved concurrently (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub alpha: f64,
    pub delta: f64,
    pub eps: f64,
    pub q: f64,
}

impl Cell {
    fn is_reference(&self) -> bool {
        self.method == Method::Iadmm && self.alpha == 0.5
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<Cell>, CliError> {
    let mut cells = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| CliError::args(format!("grid line {}: {what}: '{raw}'", i + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad("expected `method alpha delta eps q`"));
        }
        let num = |s: &str, name: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad {name}")));
        cells.push(Cell {
            method: fields[0].parse().map_err(|_| bad("unknown method"))?,
            alpha: num(fields[1], "alpha")?,
            delta: num(fields[2], "delta")?,
            eps: num(fields[3], "eps")?,
            q: num(fields[4], "q")?,
        });
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub iterations: usize,
    pub stop_reason: &'static str,
    pub error: f64,
    pub snr: f64,
    pub res: f64,
}

struct Row {
    image: usize,
    cell: Cell,
    outcome: Result<Outcome, CliError>,
}

/// `I / I_ref`, where the reference is the α = 0.5 IADMM cell on the same
/// image, δ and ε (same q preferred).
fn ratios(rows: &[Row]) -> Vec<Option<f64>> {
    let iters = |r: &Row| r.outcome.as_ref().ok().map(|o| o.iterations as f64);
    rows.iter()
        .map(|row| {
            let candidates = || {
                rows.iter().filter(|r| {
                    r.image == row.image
                        && r.cell.is_reference()
                        && r.cell.delta == row.cell.delta
                        && r.cell.eps == row.cell.eps
                        && r.outcome.is_ok()
                })
            };
            let reference = candidates().find(|r| r.cell.q == row.cell.q).or_else(|| candidates().next())?;
            Some(iters(row)? / iters(reference)?)
        })
        .collect()
}

fn load_images(args: &BenchArgs) -> Result<Vec<(String, Image)>, CliError> {
    let mut out = Vec::new();
    for pattern in &args.images {
        let paths: Vec<PathBuf> = if Path::new(pattern).exists() {
            vec![PathBuf::from(pattern)]
        } else {
            let matches = glob::glob(pattern).map_err(|e| CliError::args(format!("bad glob '{pattern}': {e}")))?;
            let mut v: Vec<PathBuf> = matches.filter_map(|m| m.ok()).collect();
            v.sort();
            v
        };
        if paths.is_empty() {
            return Err(CliError::io(pattern, "no such file"));
        }
        for p in paths {
            out.push((p.display().to_string(), read_image(&p)?));
        }
    }
    for kind in &args.phantoms {
        out.push((kind.to_string(), make_phantom(*kind, args.n, args.seed)?));
    }
    Ok(out)
}

fn solve_cell(args: &BenchArgs, blurred: &Image, truth: &Image, cell: Cell) -> Result<Outcome, CliError> {
    let cfg = SolverConfig {
        method: cell.method,
        alpha: cell.alpha,
        delta: cell.delta,
        epsilon: cell.eps,
        q: cell.q,
        sigma: args.sigma,
        max_iters: args.max_iters,
        diagnostics_on: false,
        admissibility: Admissibility::Ignore,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let blur = args.kernel.operator(blurred.n())?;
    let out = solve(&cfg, blurred, blur, Some(truth), &mut |_| {})?;
    let last = out
        .traces
        .last()
        .ok_or_else(|| CliError::Diverged("solver produced no iterations".into()))?;
    Ok(Outcome {
        iterations: out.iterations,
        stop_reason: out.stop_reason.as_str(),
        error: last.real_error.unwrap_or(f64::NAN),
        snr: last.snr.unwrap_or(f64::NAN),
        res: last.residual,
    })
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    if !(args.sigma > 0.0 && args.sigma.is_finite()) {
        return Err(CliError::args(format!("--sigma must be positive, got {}", args.sigma)));
    }
    let text = fs::read_to_string(&args.grid).map_err(|e| CliError::io(args.grid.display(), e))?;
    let cells = parse_grid(&text)?;
    if cells.is_empty() {
        return Err(CliError::args(format!("grid {} has no cells", args.grid.display())));
    }
    let images = load_images(args)?;
    let spec = DegradationSpec {
        kernel_size: args.kernel.kernel_size,
        kernel_sigma: args.kernel.kernel_sigma,
        noise_sigma: args.noise_sigma,
        rng_seed: args.seed,
    };
    spec.validate()?;
    let mut blurred = Vec::with_capacity(images.len());
    for (_, clean) in &images {
        let blur = args.kernel.operator(clean.n())?;
        blurred.push(degrade(clean, &spec, &blur)?);
    }

    let jobs: Vec<(usize, Cell)> = (0..images.len())
        .flat_map(|i| cells.iter().map(move |c| (i, *c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::args(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<Row> = pool.install(|| {
        jobs.par_iter()
            .map(|&(image, cell)| Row {
                image,
                cell,
                outcome: solve_cell(args, &blurred[image], &images[image].1, cell),
            })
            .collect()
    });

    let ratio = ratios(&rows);
    let mut w = csv::Writer::from_path(&args.output).map_err(|e| CliError::io(args.output.display(), e))?;
    w.write_record(RESULT_COLUMNS)?;
    for (row, ratio) in rows.iter().zip(&ratio) {
        let c = row.cell;
        let mut rec = vec![
            images[row.image].0.clone(),
            c.method.to_string(),
            c.q.to_string(),
            c.alpha.to_string(),
            c.delta.to_string(),
            c.eps.to_string(),
            args.sigma.to_string(),
        ];
        match &row.outcome {
            Ok(o) => rec.extend([
                o.iterations.to_string(),
                o.stop_reason.to_string(),
                o.error.to_string(),
                o.snr.to_string(),
                o.res.to_string(),
                ratio.map(|r| r.to_string()).unwrap_or_default(),
                "ok".to_string(),
                String::new(),
            ]),
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.extend(["failed".to_string(), e.to_string()]);
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed", rows.len());
    }
    if failed == rows.len() {
        let first = rows.into_iter().find_map(|r| r.outcome.err());
        return Err(first.unwrap_or_else(|| CliError::Diverged("every cell failed".into())));
    }
    Ok(())
}
