//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Resolved, RunConfig};
use crate::csvio::{self, fmt_sig, ParameterRow, RadiusRow};
use crate::error::{Error, Result};
use crate::fringes::{fringe_count, intensity_profile};
use crate::inference::{
    charge_radius_from_bne, design_budget, extract_bne_single, fit_bne, fit_temperature_factor, joint_fit,
    monte_carlo_validate, reference_bne, synth_measurements, FitResult, Measurement, REFERENCE_BNE,
};
use crate::lattice::{b_from_b_meas_uncertain, q_over_4pi, Reflection};
use crate::planner::{enumerate_candidates, enumerate_pure};
use crate::quantity::Uncertain;

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "PENDELLOSUNG_OUT";

/// Minimum number of Monte-Carlo trials accepted by `mc`.
pub const MIN_TRIALS: usize = 1000;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pendellosung",
    version,
    about = "Pendellösung scattering-length planning and analysis"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for synthetic data and Monte-Carlo runs (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; without it CSVs go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List usable reflections with their wavelength and angle windows.
    Plan {
        /// Include reflections with order contamination.
        #[arg(long)]
        all: bool,
    },
    /// Pendellösung fringe profile of one reflection.
    Simulate {
        /// Miller indices, e.g. 711 or "12 4 4".
        hkl: String,
        /// Number of wavelength samples.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Synthetic measurements from the configured model.
    Synth {
        /// Comma-separated reflections (default: design set).
        #[arg(long, value_delimiter = ',')]
        reflections: Vec<String>,
    },
    /// Fit B and b_ne to a measurement CSV.
    Fit {
        /// CSV with columns h,k,l,b_meas_fm,sigma_fm.
        measurements: PathBuf,
    },
    /// Projected σ_B and σ_bne for a reflection set.
    Budget {
        #[arg(long, value_delimiter = ',')]
        reflections: Vec<String>,
        /// Leave out the forward b_nuclear datum.
        #[arg(long)]
        no_forward: bool,
    },
    /// Mean-square charge radius from b_ne, with reference values.
    Radius {
        /// b_ne in fm, or a reference label (theory, argonne, dubna).
        #[arg(allow_hyphen_values = true)]
        b_ne: Option<String>,
        /// σ of b_ne in fm.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Monte-Carlo check of the joint-fit covariance.
    Mc {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        reflections: Vec<String>,
    },
}

/// Where command output goes.
enum Sink {
    Stdout,
    Dir(PathBuf),
}

impl Sink {
    fn emit(&self, name: &str, bytes: &[u8]) -> Result<()> {
        match self {
            Sink::Stdout => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
            Sink::Dir(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(name), bytes)?;
            }
        }
        Ok(())
    }

    /// Human-readable notes: stdout when files are written, stderr otherwise.
    fn note(&self, text: &str) {
        match self {
            Sink::Stdout => eprint!("{text}"),
            Sink::Dir(_) => print!("{text}"),
        }
    }
}

struct Context {
    cfg: RunConfig,
    res: Resolved,
    seed: u64,
    sink: Sink,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let res = cfg.resolve()?;
        let seed = cli.seed.unwrap_or(cfg.seed);
        let dir = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| cfg.output.dir.clone());
        let sink = dir.map(Sink::Dir).unwrap_or(Sink::Stdout);
        Ok(Self { cfg, res, seed, sink })
    }

    /// Reflections from the command line, else the config, else the pure plan.
    fn design(&self, cli_list: &[String]) -> Result<Vec<Reflection>> {
        if !cli_list.is_empty() {
            return cli_list.iter().map(|s| s.parse()).collect();
        }
        if let Some(rs) = self.cfg.design_reflections()? {
            return Ok(rs);
        }
        let r = &self.res;
        Ok(enumerate_pure(&r.crystal, &r.model, &r.spectrum.window, &r.bounds)?
            .into_iter()
            .map(|p| p.reflection)
            .collect())
    }
}

/// Runs the CLI and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_DATA
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Plan { all } => cmd_plan(&ctx, *all || ctx.cfg.plan.all),
        Command::Simulate { hkl, points } => cmd_simulate(&ctx, hkl, points.unwrap_or(ctx.cfg.simulate.points)),
        Command::Synth { reflections } => cmd_synth(&ctx, reflections),
        Command::Fit { measurements } => cmd_fit(&ctx, measurements),
        Command::Budget {
            reflections,
            no_forward,
        } => cmd_budget(&ctx, reflections, *no_forward),
        Command::Radius { b_ne, sigma } => cmd_radius(&ctx, b_ne.as_deref(), *sigma),
        Command::Mc { trials, reflections } => cmd_mc(&ctx, trials.unwrap_or(ctx.cfg.mc.trials), reflections),
    }
}

fn cmd_plan(ctx: &Context, all: bool) -> Result<()> {
    let r = &ctx.res;
    let plans = if all {
        enumerate_candidates(&r.crystal, &r.model, &r.spectrum.window, &r.bounds)?
    } else {
        enumerate_pure(&r.crystal, &r.model, &r.spectrum.window, &r.bounds)?
    };
    let mut buf = Vec::new();
    csvio::write_plan(&mut buf, &plans)?;
    ctx.sink.emit("plan.csv", &buf)?;
    ctx.sink.note(&format!("{} reflections\n", plans.len()));
    Ok(())
}

fn cmd_simulate(ctx: &Context, hkl: &str, points: usize) -> Result<()> {
    let r = &ctx.res;
    let refl: Reflection = hkl.parse()?;
    let count = fringe_count(&r.crystal, &r.model, refl, &r.blade, &r.spectrum.window)?;
    let profile = intensity_profile(&r.spectrum, &r.crystal, &r.model, refl, &r.blade, points)?;
    let mut buf = Vec::new();
    csvio::write_profile(&mut buf, &profile, &count)?;
    ctx.sink
        .emit(&format!("simulate_{}.csv", refl.label().replace(' ', "_")), &buf)?;
    ctx.sink.note(&format!(
        "{refl}: {} periods of the argument, {} intensity maxima, {} zeros\n",
        count.periods, count.maxima, count.zeros
    ));
    Ok(())
}

fn cmd_synth(ctx: &Context, list: &[String]) -> Result<()> {
    let r = &ctx.res;
    let rs = ctx.design(list)?;
    let ms = synth_measurements(&r.crystal, &r.model, &rs, &ctx.cfg.noise(), ctx.seed)?;
    let mut buf = Vec::new();
    csvio::write_measurements(&mut buf, &ms)?;
    ctx.sink.emit("measurements.csv", &buf)?;
    ctx.sink
        .note(&format!("{} measurements, seed {}\n", ms.len(), ctx.seed));
    Ok(())
}

fn unc(u: Uncertain) -> String {
    format!("{} ± {}", fmt_sig(u.value), fmt_sig(u.sigma))
}

fn push_params(rows: &mut Vec<ParameterRow>, method: &str, params: &[(&str, Uncertain)]) {
    for (name, u) in params {
        rows.push(ParameterRow {
            method: method.into(),
            parameter: (*name).into(),
            value: u.value,
            sigma: u.sigma,
        });
    }
}

fn cmd_fit(ctx: &Context, path: &Path) -> Result<()> {
    let r = &ctx.res;
    let file = fs::File::open(path)?;
    let ms = csvio::read_measurements(file, ctx.cfg.fit.sigma)?;
    if ms.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} contains no measurements",
            path.display()
        )));
    }
    let crystal = &r.crystal;
    let table = &r.model.form_factor;
    let b_nuclear = crystal.b_nuclear;
    let intercept = ctx.cfg.intercept();
    let mut distinct: Vec<Reflection> = ms.iter().map(|m| m.reflection).collect();
    distinct.sort();
    distinct.dedup();

    let mut report = String::new();
    let mut params = Vec::new();
    let mut covariance = Vec::new();
    writeln!(
        report,
        "crystal {}: Z = {}, b_nuclear = {} fm",
        crystal.name,
        crystal.z,
        unc(b_nuclear)
    )
    .unwrap();
    writeln!(report, "{} measurements of {} reflections", ms.len(), distinct.len()).unwrap();

    let b_ne = if distinct.len() == 1 {
        if !ctx.cfg.fit.forward {
            return Err(Error::SingularDesign(
                "a single reflection needs the forward b_nuclear datum".into(),
            ));
        }
        let m = weighted_mean(&ms);
        let q = q_over_4pi(crystal, m.reflection);
        let b_q = b_from_b_meas_uncertain(
            Uncertain::new(m.b_meas, m.sigma),
            crystal.temperature_factor,
            q,
            ctx.cfg.fit.combination,
        );
        let f = table.f_at(q)?;
        let b_ne = extract_bne_single(b_q, b_nuclear, crystal.z, f)?;
        writeln!(
            report,
            "\nsingle reflection {} (f = {}, B = {} Å²):",
            m.reflection,
            fmt_sig(f),
            unc(crystal.temperature_factor)
        )
        .unwrap();
        writeln!(report, "  b(Q)  = {} fm", unc(b_q)).unwrap();
        writeln!(report, "  b_ne  = {} fm", unc(b_ne)).unwrap();
        push_params(&mut params, "single", &[("b_q", b_q), ("b_ne", b_ne)]);
        b_ne
    } else {
        let t = fit_temperature_factor(crystal, &ms, b_nuclear, intercept)?;
        let bf = fit_bne(crystal, table, &ms, b_nuclear, t.b_factor, &ctx.cfg.bne_options())?;
        writeln!(report, "\ntwo-stage fit:").unwrap();
        writeln!(
            report,
            "  B     = {} Å²   (chi2 = {}, dof = {})",
            unc(t.b_factor),
            fmt_sig(t.chi2),
            t.dof
        )
        .unwrap();
        writeln!(
            report,
            "  b_ne  = {} fm   (chi2 = {}, dof = {})",
            unc(bf.b_ne),
            fmt_sig(bf.chi2),
            bf.dof
        )
        .unwrap();
        push_params(
            &mut params,
            "two_stage",
            &[("B", t.b_factor), ("b_ne", bf.b_ne), ("b_nuclear", bf.b_nuclear)],
        );
        // the joint fit is unbiased; the two-stage line neglects b_ne in B
        match joint_fit(crystal, table, &ms, b_nuclear, &ctx.cfg.joint_options()) {
            Ok(fit) => {
                write_joint(&mut report, &fit);
                let named: Vec<(&str, Uncertain)> = fit
                    .names
                    .iter()
                    .map(|n| (n.as_str(), fit.parameter(n).unwrap()))
                    .collect();
                push_params(&mut params, "joint", &named);
                covariance = csvio::covariance_rows("joint", &fit);
                fit.parameter("b_ne").unwrap()
            }
            Err(Error::SingularDesign(msg)) => {
                writeln!(report, "\njoint fit: not determined ({msg})").unwrap();
                bf.b_ne
            }
            Err(e) => return Err(e),
        }
    };
    let r2 = charge_radius_from_bne(&ctx.cfg.constants, b_ne);
    writeln!(report, "\n<r²> = {} fm²", unc(r2)).unwrap();
    let method = params.last().map(|p| p.method.clone()).unwrap_or_default();
    push_params(&mut params, &method, &[("r2", r2)]);

    let mut pbuf = Vec::new();
    csvio::write_parameters(&mut pbuf, &params)?;
    let mut cbuf = Vec::new();
    csvio::write_covariance(&mut cbuf, &covariance)?;
    if let Sink::Dir(_) = ctx.sink {
        ctx.sink.emit("fit_report.txt", report.as_bytes())?;
        ctx.sink.emit("fit_covariance.csv", &cbuf)?;
    }
    ctx.sink.emit("fit_parameters.csv", &pbuf)?;
    ctx.sink.note(&report);
    Ok(())
}

fn write_joint(report: &mut String, fit: &FitResult) {
    writeln!(report, "\njoint fit ({} Gauss-Newton iterations):", fit.iterations).unwrap();
    for n in &fit.names {
        writeln!(report, "  {:<9} = {}", n, unc(fit.parameter(n).unwrap())).unwrap();
    }
    if let Some(c) = fit.correlation("B", "b_ne") {
        writeln!(report, "  corr(B, b_ne) = {}", fmt_sig(c)).unwrap();
    }
    writeln!(report, "  chi2 = {}, dof = {}", fmt_sig(fit.chi2), fit.dof).unwrap();
}

fn weighted_mean(ms: &[Measurement]) -> Measurement {
    let w: f64 = ms.iter().map(|m| 1.0 / (m.sigma * m.sigma)).sum();
    let v = ms.iter().map(|m| m.b_meas / (m.sigma * m.sigma)).sum::<f64>() / w;
    Measurement::new(ms[0].reflection, v, w.sqrt().recip())
}

fn cmd_budget(ctx: &Context, list: &[String], no_forward: bool) -> Result<()> {
    let r = &ctx.res;
    let rs = ctx.design(list)?;
    let mut opts = ctx.cfg.budget_options();
    if no_forward {
        opts.forward = false;
    }
    let b = design_budget(&r.crystal, &r.model, &rs, &opts)?;
    let mut buf = Vec::new();
    csvio::write_budget(&mut buf, &csvio::budget_rows(&b))?;
    ctx.sink.emit("budget.csv", &buf)?;
    let labels: Vec<String> = rs.iter().map(|r| r.label()).collect();
    ctx.sink.note(&format!("design: {}\n", labels.join(", ")));
    Ok(())
}

fn cmd_radius(ctx: &Context, arg: Option<&str>, sigma: Option<f64>) -> Result<()> {
    let input = match arg {
        None => Uncertain::exact(ctx.cfg.b_ne()?),
        Some(s) => match s.parse::<f64>() {
            Ok(v) => Uncertain::exact(v),
            Err(_) => reference_bne(s).ok_or_else(|| Error::InvalidInput(format!("unknown b_ne '{s}'")))?,
        },
    };
    let input = Uncertain::new(input.value, sigma.unwrap_or(input.sigma));
    let c = &ctx.cfg.constants;
    let row = |label: &str, b: Uncertain| {
        let r2 = charge_radius_from_bne(c, b);
        RadiusRow {
            label: label.into(),
            b_ne_fm: b.value,
            b_ne_sigma_fm: b.sigma,
            r2_fm2: r2.value,
            r2_sigma_fm2: r2.sigma,
        }
    };
    let mut rows = vec![row("input", input)];
    rows.extend(REFERENCE_BNE.iter().map(|r| row(r.label, r.b_ne)));
    let mut buf = Vec::new();
    csvio::write_radius(&mut buf, &rows)?;
    ctx.sink.emit("radius.csv", &buf)?;
    let theory = rows[1].b_ne_fm;
    ctx.sink.note(&format!(
        "input differs from theory by {}%\n",
        fmt_sig(100.0 * (input.value - theory) / theory.abs())
    ));
    Ok(())
}

fn cmd_mc(ctx: &Context, trials: usize, list: &[String]) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let r = &ctx.res;
    let rs = ctx.design(list)?;
    let rep = monte_carlo_validate(
        &r.crystal,
        &r.model,
        &rs,
        &ctx.cfg.noise(),
        r.crystal.b_nuclear.sigma,
        &ctx.cfg.joint_options(),
        trials,
        ctx.seed,
    )?;
    let mut buf = Vec::new();
    csvio::write_mc(&mut buf, &csvio::mc_rows(&rep))?;
    ctx.sink.emit("mc.csv", &buf)?;
    ctx.sink.note(&format!("{trials} trials, seed {}\n", ctx.seed));
    Ok(())
}
