use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use anderson_certify::analysis::{
    decay_series, fit_exponential, fit_power_law, off_axis_scan, power_law_test, DecaySeries, PowerLawOptions,
    PowerLawVariant,
};
use anderson_certify::config::Config;
use anderson_certify::criteria::{single_site_test, theorem1_lhs, theorem2_lhs, Criterion, Verdict};
use anderson_certify::lattice::{Region, RegionSpec, Site};
use anderson_certify::moments::{estimate_moment, MomentQuery};
use anderson_certify::observables::{
    dos_condition_probability, lifschitz_probe, sample_spectra, summarize_spectra, DosProbe,
};
use anderson_certify::resolvent::SpectralPoint;
use anderson_certify::scan::{run_scan, ScanOptions};

#[derive(Parser)]
#[command(name = "anderson-certify", version, about = "Fractional-moment localization checks for random Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate E|G(x, y; z)|^s.
    EstimateMoment(EstimateArgs),
    /// Evaluate a localization criterion and report a verdict.
    CheckCriterion(CheckArgs),
    /// Sweep a (λ, E, s, L) grid and write a phase table.
    Scan(ScanArgs),
    /// Level statistics and spectral input conditions.
    Spectra(SpectraArgs),
    /// Fit a decay law to moment data.
    FitDecay(FitArgs),
    /// Compare a shell supremum with the power-law threshold.
    TestPowerlaw(PowerlawArgs),
    /// Moments along E + iη for a grid of η.
    ScanEta(EtaArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = Config::load(self.config.as_deref())?;
        if let Some(n) = self.n_samples {
            cfg.moments.n_samples = n;
        }
        if let Some(seed) = self.seed {
            cfg.moments.seed = seed;
        }
        if let Some(s) = self.s {
            cfg.criteria.s = s;
        }
        Ok(cfg)
    }

    fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(1.0)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// e.g. "box:d=1,L=3" or "sites:0;1;2"
    #[arg(long)]
    region: Option<String>,
    /// Comma-separated coordinates; defaults to the origin.
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    energy: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// theorem1, theorem2 or single_site
    #[arg(long)]
    theorem: Option<String>,
    #[arg(long)]
    region: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    energy: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long = "Cs")]
    c_s: Option<f64>,
    #[arg(long = "Ctilde")]
    c_tilde_s: Option<f64>,
    /// Where C_s and C~_s come from; a certified verdict needs one.
    #[arg(long = "constants-source")]
    constants_source: Option<String>,
    /// auto, exhaustive or subboxes
    #[arg(long)]
    subsets: Option<String>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    config: PathBuf,
    /// Stop after this many newly evaluated cells.
    #[arg(long = "max-cells")]
    max_cells: Option<usize>,
}

#[derive(Args)]
struct SpectraArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long = "L")]
    l: u32,
    /// Energy window "a,b" for gap ratios; defaults to the central half of the spectrum.
    #[arg(long)]
    window: Option<String>,
    /// Probe the density-of-states condition at this energy.
    #[arg(long = "dos-energy")]
    dos_energy: Option<f64>,
    #[arg(long = "delta-L", default_value_t = 0.01)]
    delta_l: f64,
    #[arg(long = "P-L", default_value_t = 0.1)]
    p_l: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Probe Prob[inf σ ≤ E₀ + ΔE] with this ΔE.
    #[arg(long = "lifschitz-delta")]
    lifschitz_delta: Option<f64>,
    /// Write every eigenvalue as CSV rows realization,index,eigenvalue.
    #[arg(long = "eigenvalues-out")]
    eigenvalues_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with columns distance,moment,ci_low,ci_high. Without it the
    /// series is sampled along the first axis of Λ_L.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "L", default_value_t = 10)]
    l: u32,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 0.0)]
    energy: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// exponential or power_law
    #[arg(long, default_value = "exponential")]
    model: String,
    /// Drop points whose estimate falls below this value.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
}

#[derive(Args)]
struct PowerlawArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long = "L")]
    l: u32,
    #[arg(long, default_value_t = 0.0)]
    energy: f64,
    /// finite_volume or infinite_volume_proxy
    #[arg(long, default_value = "finite_volume")]
    variant: String,
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    #[arg(long = "L-o", default_value_t = 4)]
    l_o: u32,
}

#[derive(Args)]
struct EtaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    energy: f64,
    /// Comma-separated η values; must include 0.
    #[arg(long = "eta-grid", default_value = "0,0.1,1,10")]
    eta_grid: String,
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number '{t}'")))
        .collect()
}

fn parse_site(text: Option<&str>, dim: usize) -> Result<Site> {
    match text {
        None => Ok(Site::origin(dim)),
        Some(t) => {
            let coords = t
                .split(',')
                .map(|c| c.trim().parse::<i32>().with_context(|| format!("bad coordinate '{c}'")))
                .collect::<Result<Vec<_>>>()?;
            if coords.len() != dim {
                bail!("site {t} has {} coordinates, region has dimension {dim}", coords.len());
            }
            Ok(Site::new(coords))
        }
    }
}

fn region_from(flag: Option<&str>, cfg: &Config) -> Result<Arc<Region>> {
    let region = match flag {
        Some(spec) => spec.parse::<RegionSpec>()?.build()?,
        None => cfg.region()?,
    };
    Ok(Arc::new(region))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<ExitCode> {
    let cfg = args.common.load()?;
    let model = cfg.model(args.common.lambda())?;
    let region = region_from(args.region.as_deref(), &cfg)?;
    let q = MomentQuery {
        x: parse_site(args.x.as_deref(), region.dim())?,
        y: parse_site(args.y.as_deref(), region.dim())?,
        region,
        z: SpectralPoint::new(args.energy, args.eta),
        s: cfg.criteria.s,
        restrict_to: None,
    };
    print_json(&estimate_moment(&model, &q, &cfg.plan(), &cfg.eval_options())?)?;
    Ok(ExitCode::SUCCESS)
}

fn check(args: CheckArgs) -> Result<ExitCode> {
    let mut cfg = args.common.load()?;
    if let Some(t) = args.theorem {
        cfg.criteria.theorem = t;
    }
    if let Some(c) = args.c_s {
        cfg.criteria.c_s = c;
    }
    if let Some(c) = args.c_tilde_s {
        cfg.criteria.c_tilde_s = c;
    }
    if let Some(src) = args.constants_source {
        cfg.criteria.constants_source = Some(src);
    }
    if let Some(s) = args.subsets {
        cfg.criteria.subsets = s;
    }
    cfg.validate()?;
    let model = cfg.model(args.common.lambda())?;
    let region = region_from(args.region.as_deref(), &cfg)?;
    let constants = cfg.constants(cfg.criteria.s)?;
    let z = SpectralPoint::new(args.energy, args.eta);
    let (plan, opts) = (cfg.plan(), cfg.eval_options());
    let report = match cfg.criterion()? {
        Criterion::Bulk => theorem1_lhs(&model, &region, z, &constants, &plan, &opts)?,
        Criterion::AllSubsets => {
            let strategy = cfg.subset_strategy(&region)?;
            theorem2_lhs(&model, &region, z, &constants, &strategy, &plan, &opts)?
        }
        Criterion::SingleSite => single_site_test(&model, args.energy, region.dim(), &constants)?,
    };
    print_json(&report)?;
    Ok(match report.verdict {
        Verdict::Certified if constants.source.is_none() => {
            eprintln!(
                "note: lhs < 1 but C_s / C~_s have no --constants-source; certification withheld (exit 3)"
            );
            ExitCode::from(3)
        }
        Verdict::Certified => ExitCode::SUCCESS,
        Verdict::NotCertified => ExitCode::from(2),
        Verdict::Inconclusive => ExitCode::from(3),
    })
}

fn scan(args: ScanArgs) -> Result<ExitCode> {
    let cfg = Config::from_path(&args.config)?;
    let out = run_scan(
        &cfg,
        &ScanOptions {
            max_new_cells: args.max_cells,
        },
    )?;
    print_json(&out.summary.counts)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SpectraOutput {
    gap_statistics: anderson_certify::observables::SpectraSummary,
    dos: Option<anderson_certify::observables::DosReport>,
    lifschitz: Option<anderson_certify::observables::LifschitzReport>,
}

fn spectra(args: SpectraArgs) -> Result<ExitCode> {
    let cfg = args.common.load()?;
    let model = cfg.model(args.common.lambda())?;
    let plan = cfg.plan();
    let opts = cfg.eval_options();
    let region = Arc::new(Region::cube(args.dim, args.l)?);
    let spectra = sample_spectra(&model, &region, plan.n_samples, plan.seed, &opts)?;
    if let Some(path) = &args.eigenvalues_out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["realization", "index", "eigenvalue"])?;
        for (i, eig) in spectra.iter().enumerate() {
            for (k, e) in eig.iter().enumerate() {
                w.write_record([i.to_string(), k.to_string(), e.to_string()])?;
            }
        }
        w.flush()?;
    }
    let window = match &args.window {
        Some(w) => match parse_list(w)?.as_slice() {
            [a, b] => (*a, *b),
            _ => bail!("--window takes two numbers a,b"),
        },
        None => {
            let (lo, hi) = model.support();
            let shift = opts.convention.diagonal_shift(args.dim);
            let centre = shift + model.lambda * 0.5 * (lo + hi);
            let half = 0.5 * (model.lambda * (hi - lo) / 2.0 + 2.0 * args.dim as f64);
            (centre - half, centre + half)
        }
    };
    let gap_statistics = summarize_spectra(&spectra, window)?;
    let dos = match args.dos_energy {
        Some(energy) => Some(dos_condition_probability(
            &model,
            &DosProbe {
                energy,
                delta_l: args.delta_l,
                p_l: args.p_l,
                l: args.l,
                dim: args.dim,
                beta: args.beta,
                xi: args.xi,
            },
            &plan,
            &opts,
        )?),
        None => None,
    };
    let lifschitz = match args.lifschitz_delta {
        Some(d) => Some(lifschitz_probe(&model, args.dim, args.l, d, &plan, &opts)?),
        None => None,
    };
    print_json(&SpectraOutput {
        gap_statistics,
        dos,
        lifschitz,
    })?;
    Ok(ExitCode::SUCCESS)
}

fn fit_decay(args: FitArgs) -> Result<ExitCode> {
    let series = match &args.input {
        Some(path) => DecaySeries::from_csv(std::fs::File::open(path).with_context(|| format!("{}", path.display()))?)?,
        None => {
            let cfg = args.common.load()?;
            let model = cfg.model(args.common.lambda())?;
            let region = Arc::new(Region::cube(args.dim, args.l)?);
            let targets: Vec<Site> = (1..=args.l as i32)
                .map(|r| {
                    let mut c = vec![0; args.dim];
                    c[0] = r;
                    Site::new(c)
                })
                .collect();
            decay_series(
                &model,
                &region,
                &Site::origin(args.dim),
                &targets,
                SpectralPoint::new(args.energy, args.eta),
                cfg.criteria.s,
                &cfg.plan(),
                &cfg.eval_options(),
            )?
        }
    };
    let series = series.above(args.floor);
    let fit = match args.model.as_str() {
        "exponential" => fit_exponential(&series)?,
        "power_law" | "power-law" => fit_power_law(&series)?,
        other => bail!("unknown model '{other}'"),
    };
    print_json(&fit)?;
    Ok(ExitCode::SUCCESS)
}

fn test_powerlaw(args: PowerlawArgs) -> Result<ExitCode> {
    let cfg = args.common.load()?;
    let model = cfg.model(args.common.lambda())?;
    let variant: PowerLawVariant = args.variant.parse()?;
    let report = power_law_test(
        &model,
        args.dim,
        args.energy,
        args.l,
        cfg.criteria.s,
        variant,
        &PowerLawOptions { b: args.b, l_o: args.l_o },
        &cfg.plan(),
        &cfg.eval_options(),
    )?;
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn scan_eta(args: EtaArgs) -> Result<ExitCode> {
    let cfg = args.common.load()?;
    let model = cfg.model(args.common.lambda())?;
    let region = region_from(args.region.as_deref(), &cfg)?;
    let x = parse_site(args.x.as_deref(), region.dim())?;
    let y = parse_site(args.y.as_deref(), region.dim())?;
    let grid = parse_list(&args.eta_grid)?;
    let out = off_axis_scan(
        &model,
        &region,
        &x,
        &y,
        args.energy,
        &grid,
        cfg.criteria.s,
        &cfg.plan(),
        &cfg.eval_options(),
    )?;
    print_json(&out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::EstimateMoment(a) => estimate(a),
        Command::CheckCriterion(a) => check(a),
        Command::Scan(a) => scan(a),
        Command::Spectra(a) => spectra(a),
        Command::FitDecay(a) => fit_decay(a),
        Command::TestPowerlaw(a) => test_powerlaw(a),
        Command::ScanEta(a) => scan_eta(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
