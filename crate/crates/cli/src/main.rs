//! `chernoff`: evaluation, sampling, diagnostics and verification for
//! Chernoff's distribution from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chernoff::airy::ai;
use chernoff::chernoff::{ChernoffConfig, ChernoffDist, SCHEMA_VERSION};
use chernoff::figures::{emit_figures, FigureConfig};
use chernoff::gaussfact::factor_value;
use chernoff::gfunc::{GFunction, GParams, QuadratureConfig, MAX_ORDER};
use chernoff::hypoexp::{
    sample_chernoff, sample_gtilde, sample_hypoexp, simulate_argmax, GTildeRep, HypoExpRates, RngSeed, TailMode,
};
use chernoff::report::{fmt_num, svg_chart, write_columns, write_json, Series};
use chernoff::verify::{run_criterion, VerifyOptions, CRITERIA};
use chernoff::ChernoffError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "chernoff", version, about = "Chernoff's distribution from its Airy-function representation")]
struct Cli {
    /// Write to this file instead of stdout (a directory for `diagnose --format svg`).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ai(x + i·im) on a grid; CSV z_re, z_im, ai_re, ai_im.
    #[command(allow_negative_numbers = true)]
    Airy {
        #[command(flatten)]
        grid: Grid,
        /// Imaginary part shared by every grid point.
        #[arg(long, default_value_t = 0.0)]
        im: f64,
    },
    /// g_c or one of its derivatives on a grid; CSV x, value.
    #[command(allow_negative_numbers = true)]
    Gfun {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, default_value_t = 0)]
        order: usize,
        #[command(flatten)]
        quad: Quad,
    },
    /// Density of Z_c.
    #[command(allow_negative_numbers = true)]
    Pdf(PointArgs),
    /// Distribution function of Z_c.
    #[command(allow_negative_numbers = true)]
    Cdf(PointArgs),
    /// Quantiles of Z_c.
    #[command(allow_negative_numbers = true)]
    Quantile {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Probabilities in (0, 1); comma separated or repeated.
        #[arg(long, required = true, value_delimiter = ',')]
        p: Vec<f64>,
        #[command(flatten)]
        quad: Quad,
    },
    /// Moment E Z_c^k, 1 <= k <= 8.
    #[command(allow_negative_numbers = true)]
    Moment {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        quad: Quad,
    },
    /// Draws from Z_c, the g-tilde law or a hypoexponential law.
    #[command(allow_negative_numbers = true)]
    Sample {
        #[arg(long, value_enum)]
        dist: Dist,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Exponential terms kept by the g-tilde sampler.
        #[arg(long, default_value_t = 400)]
        m: usize,
        /// Drop, rather than Gaussian-approximate, the g-tilde terms beyond m.
        #[arg(long)]
        truncate: bool,
        /// Hypoexponential rates, comma separated.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        /// Raw little-endian f64 instead of text.
        #[arg(long)]
        binary: bool,
    },
    /// Argmax of W(t) - c t² by random-walk simulation.
    #[command(allow_negative_numbers = true)]
    ArgmaxSim {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 3.0)]
        half_width: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        binary: bool,
    },
    /// Log-concavity diagnostics of f_{Z_c} on a grid.
    #[command(allow_negative_numbers = true)]
    Diagnose {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also sweep the correlation inequality over [-4, 4]² with this step.
        #[arg(long)]
        corr_step: Option<f64>,
        #[command(flatten)]
        quad: Quad,
    },
    /// Gaussian factor g with ½ g(z) g(-z) = φ(z); CSV z, g, residual.
    #[command(allow_negative_numbers = true)]
    Gaussfact {
        #[command(flatten)]
        grid: Grid,
    },
    /// Data (and optionally SVG) for the four figures.
    #[command(allow_negative_numbers = true)]
    Figures {
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Run the acceptance criteria and print a pass/fail table.
    #[command(allow_negative_numbers = true)]
    Verify {
        /// Criteria to run, comma separated; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value_t = 20_140_501)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        argmax_draws: usize,
        #[arg(long, default_value_t = 1e-3)]
        argmax_step: f64,
        #[arg(long, default_value_t = 100_000)]
        gtilde_draws: usize,
        #[arg(long)]
        figures_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Grid {
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    step: f64,
}

#[derive(Args)]
struct Quad {
    /// Truncation point of the frequency integral.
    #[arg(long)]
    u_max: Option<f64>,
    /// Kernel node budget per evaluation.
    #[arg(long)]
    nodes: Option<usize>,
    /// Absolute error target for g.
    #[arg(long)]
    abs_tol: Option<f64>,
}

#[derive(Args)]
struct PointArgs {
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Evaluation points; comma separated or repeated.
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
    at: Vec<f64>,
    #[command(flatten)]
    quad: Quad,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Chernoff,
    Gtilde,
    Hypoexp,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

enum Failure {
    Usage(String),
    Run(ChernoffError),
}

impl From<ChernoffError> for Failure {
    fn from(e: ChernoffError) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl Grid {
    fn points(&self) -> Result<Vec<f64>, Failure> {
        if !(self.from.is_finite() && self.to.is_finite() && self.step > 0.0 && self.from <= self.to) {
            return Err(usage("grid needs finite --from <= --to and --step > 0"));
        }
        let n = ((self.to - self.from) / self.step + 1e-9).floor();
        if n > 1e7 {
            return Err(usage("grid has more than 10^7 points"));
        }
        Ok((0..=n as usize).map(|i| self.from + self.step * i as f64).collect())
    }
}

impl Quad {
    fn config(&self) -> Result<QuadratureConfig, Failure> {
        let mut q = QuadratureConfig::default();
        if let Some(u) = self.u_max {
            q.u_max = u;
        }
        if let Some(n) = self.nodes {
            q.nodes = n;
        }
        if let Some(t) = self.abs_tol {
            q.abs_tol = t;
        }
        if !(q.u_max > 0.0 && q.abs_tol > 0.0 && q.nodes > 0) {
            return Err(usage("--u-max, --nodes and --abs-tol must be positive"));
        }
        Ok(q)
    }

    fn dist(&self, c: f64) -> Result<ChernoffDist, Failure> {
        Ok(ChernoffDist::with_config(c, ChernoffConfig { quad: self.config()?, ..ChernoffConfig::default() })?)
    }
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_values(mut out: Box<dyn Write>, values: &[f64], binary: bool) -> io::Result<()> {
    if binary {
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
    } else {
        for &v in values {
            writeln!(out, "{}", fmt_num(v))?;
        }
    }
    out.flush()
}

#[derive(Serialize)]
struct DiagnoseSummary {
    schema_version: u32,
    c: f64,
    w0: f64,
    sigma0: f64,
    strong_lc_margin: f64,
    pf2_min_det: f64,
    corr_min: Option<f64>,
    w_min: f64,
    v_convexity_violations: usize,
}

fn run(cli: Cli) -> Outcome {
    let output = cli.output.as_deref();
    match cli.command {
        Command::Airy { grid, im } => {
            let xs = grid.points()?;
            let values: Vec<Complex64> = xs.iter().map(|&x| ai(Complex64::new(x, im))).collect();
            let ims = vec![im; xs.len()];
            let re: Vec<f64> = values.iter().map(|v| v.re).collect();
            let imag: Vec<f64> = values.iter().map(|v| v.im).collect();
            write_columns(open_output(output)?, &["z_re", "z_im", "ai_re", "ai_im"], &[&xs, &ims, &re, &imag])?;
        }
        Command::Gfun { c, grid, order, quad } => {
            if order > MAX_ORDER {
                return Err(usage(format!("--order must be at most {MAX_ORDER}")));
            }
            let xs = grid.points()?;
            let g = GFunction::new(GParams::with_quadrature(c, quad.config()?)?)?;
            let values = xs.iter().map(|&x| g.g_deriv(x, order)).collect::<chernoff::Result<Vec<f64>>>()?;
            write_columns(open_output(output)?, &["x", "value"], &[&xs, &values])?;
        }
        Command::Pdf(args) | Command::Cdf(args) if args.at.iter().any(|t| !t.is_finite()) => {
            return Err(usage("--at values must be finite"));
        }
        Command::Pdf(args) => {
            let d = args.quad.dist(args.c)?;
            let values = args.at.iter().map(|&t| d.pdf(t)).collect::<chernoff::Result<Vec<f64>>>()?;
            write_values(open_output(output)?, &values, false)?;
        }
        Command::Cdf(args) => {
            let d = args.quad.dist(args.c)?;
            let values = args.at.iter().map(|&t| d.cdf(t)).collect::<chernoff::Result<Vec<f64>>>()?;
            write_values(open_output(output)?, &values, false)?;
        }
        Command::Quantile { c, p, quad } => {
            if p.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(usage("--p values must lie in (0, 1)"));
            }
            let d = quad.dist(c)?;
            let values = p.iter().map(|&p| d.quantile(p)).collect::<chernoff::Result<Vec<f64>>>()?;
            write_values(open_output(output)?, &values, false)?;
        }
        Command::Moment { c, k, quad } => {
            if !(1..=8).contains(&k) {
                return Err(usage("--k must be between 1 and 8"));
            }
            let d = quad.dist(c)?;
            write_values(open_output(output)?, &[d.moment(k)?], false)?;
        }
        Command::Sample { dist, n, seed, stream, c, m, truncate, rates, binary } => {
            let seed = RngSeed::with_stream(seed, stream);
            let values = match dist {
                Dist::Chernoff => sample_chernoff(&ChernoffDist::new(c)?, n, seed)?.values,
                Dist::Gtilde => {
                    let mode = if truncate { TailMode::Truncate } else { TailMode::Gaussian };
                    sample_gtilde(&GTildeRep::new(c, m)?, n, seed, mode)?
                }
                Dist::Hypoexp => {
                    if rates.is_empty() {
                        return Err(usage("--dist hypoexp needs --rates"));
                    }
                    sample_hypoexp(&HypoExpRates::new(rates)?, n, seed)?
                }
            };
            write_values(open_output(output)?, &values, binary)?;
        }
        Command::ArgmaxSim { c, half_width, step, n, seed, stream, binary } => {
            let sample = simulate_argmax(c, half_width, step, n, RngSeed::with_stream(seed, stream))?;
            if sample.boundary_hits > 0 {
                eprintln!("warning: {} of {n} draws hit the window edge", sample.boundary_hits);
            }
            write_values(open_output(output)?, &sample.values, binary)?;
        }
        Command::Diagnose { c, grid, format, corr_step, quad } => {
            let ts = grid.points()?;
            if let Some(s) = corr_step {
                if !(s > 0.0 && s <= 8.0) {
                    return Err(usage("--corr-step must lie in (0, 8]"));
                }
            }
            if format == Format::Svg && output.is_none() {
                return Err(usage("--format svg needs --output <directory>"));
            }
            let report = quad.dist(c)?.diagnose(&ts, corr_step)?;
            match format {
                Format::Csv => {
                    let header = ["t", "f", "neg_log_f", "w", "v"];
                    write_columns(open_output(output)?, &header, &[&ts, &report.f, &report.neg_log_f, &report.w, &report.v])?;
                }
                Format::Json => {
                    let summary = DiagnoseSummary {
                        schema_version: SCHEMA_VERSION,
                        c,
                        w0: report.w0,
                        sigma0: report.sigma0_est,
                        strong_lc_margin: report.strong_lc_margin,
                        pf2_min_det: report.pf2_min_det,
                        corr_min: corr_step.map(|_| report.corr_residual_min),
                        w_min: report.w_min(),
                        v_convexity_violations: report.v_convexity_violations,
                    };
                    write_json(open_output(output)?, &summary)?;
                }
                Format::Svg => {
                    let dir = output.expect("checked above");
                    std::fs::create_dir_all(dir)?;
                    for (name, title, y) in [
                        ("density.svg", "The density f_Z", &report.f),
                        ("neg_log_density.svg", "-log f_Z", &report.neg_log_f),
                        ("curvature.svg", "(-log f_Z)''", &report.w),
                    ] {
                        std::fs::write(dir.join(name), svg_chart(title, &[Series { name: title, x: &ts, y }]))?;
                    }
                }
            }
        }
        Command::Gaussfact { grid } => {
            let zs = grid.points()?;
            let values = zs.iter().map(|&z| factor_value(z)).collect::<chernoff::Result<Vec<_>>>()?;
            let g: Vec<f64> = values.iter().map(|v| v.g).collect();
            let r: Vec<f64> = values.iter().map(|v| v.residual).collect();
            write_columns(open_output(output)?, &["z", "g", "residual"], &[&zs, &g, &r])?;
        }
        Command::Figures { out, svg } => {
            let summary = emit_figures(&out, &FigureConfig { svg, ..FigureConfig::default() })?;
            write_json(open_output(output)?, &summary)?;
        }
        Command::Verify { only, seed, argmax_draws, argmax_step, gtilde_draws, figures_dir } => {
            if let Some(bad) = only.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
                return Err(usage(format!("no criterion {bad}; valid ids are 1..={}", CRITERIA.len())));
            }
            if !(argmax_step > 0.0 && argmax_draws > 0 && gtilde_draws > 0) {
                return Err(usage("draw counts and --argmax-step must be positive"));
            }
            let opts = VerifyOptions { seed, argmax_draws, argmax_step, gtilde_draws, figures_dir, ..VerifyOptions::default() };
            let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only };
            let mut out = open_output(output)?;
            let mut failed = 0;
            for id in ids {
                let r = run_criterion(id, &opts);
                writeln!(out, "{}", r.line())?;
                out.flush()?;
                if !r.passed && !r.soft {
                    failed += 1;
                }
            }
            if failed > 0 {
                writeln!(out, "{failed} criteria failed")?;
                out.flush()?;
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CHERNOFF_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| usage(format!("CHERNOFF_THREADS must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(usage("CHERNOFF_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `chernoff --help` for usage.");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
