use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqlab::analysis::{
    aggregate_jacobian, fd_jacobian, quadratic_form, quadratic_terms, random_distortion, rate_ratios,
    relative_sup_error,
};
use eqlab::diversification::diversification_report;
use eqlab::scenarios::{generate, verify_constraints, ScenarioFamily, ScenarioSpec};
use eqlab::stability::{equilibrium_stability, tatonnement_simulate, uniqueness_probe, TatonnementOptions};
use eqlab::sweep::{run_sweep, DistortionPolicy, SweepGrid, SweepOptions};
use eqlab::{solve_equilibrium, Economy, EquilibriumResult, LabError, Result, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "eqlab",
    version,
    about = "Numerical lab for truncated dated-commodity exchange economies"
)]
struct Cli {
    /// Seed for every random draw made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sup-norm tolerance on excess demand (default 1e-10 * I).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct EconomyArgs {
    /// Economy spec file (JSON).
    economy: PathBuf,
    /// Solver start points (first is the discount profile).
    #[arg(long, default_value_t = 1)]
    starts: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for an equilibrium.
    Solve(EconomyArgs),
    /// Aggregate excess-demand Jacobian at the equilibrium.
    Jacobian {
        #[command(flatten)]
        economy: EconomyArgs,
        /// Compare against central finite differences.
        #[arg(long)]
        fd_check: bool,
        #[arg(long, default_value_t = 1e-6)]
        fd_step: f64,
    },
    /// Quadratic-form decomposition for seeded perturbations.
    Decompose {
        #[command(flatten)]
        economy: EconomyArgs,
        #[arg(long, default_value_t = 10)]
        draws: usize,
    },
    /// Definiteness verdict and multi-start uniqueness probe.
    Stability {
        #[command(flatten)]
        economy: EconomyArgs,
        /// Starts for the uniqueness probe; 0 skips it.
        #[arg(long, default_value_t = 20)]
        probe_starts: usize,
    },
    /// Integrate the price-adjustment dynamics from a perturbed equilibrium.
    Tatonnement {
        #[command(flatten)]
        economy: EconomyArgs,
        /// Relative size of the uniform start perturbation.
        #[arg(long, default_value_t = 0.05)]
        perturb: f64,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        rtol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_samples: usize,
    },
    /// Marginal-share alignment and spectral statistics.
    Diversify(EconomyArgs),
    /// Scenario generators.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Run a parameter sweep over a scenario family.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write an economy spec file for a scenario family.
    Gen(GenArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// identical | sparse | dispersed | two_type | isoelastic
    #[arg(long)]
    family: Option<String>,
    /// Full family parameters as JSON, e.g. '{"family":"dispersed","delta":0.3}'.
    #[arg(long, conflicts_with = "family")]
    family_json: Option<String>,
}

impl ScenarioArgs {
    fn family(&self) -> Result<ScenarioFamily> {
        match (&self.family, &self.family_json) {
            (_, Some(text)) => Ok(serde_json::from_str(text)?),
            (Some(name), None) => ScenarioFamily::by_name(name),
            (None, None) => Err(LabError::validation("family", "pass --family or --family-json")),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    agents: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    Random,
    OddEven,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "20,40,80,160")]
    horizons: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.95")]
    betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "12")]
    agents: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = Policy::Random)]
    policy: Policy,
    /// Seeded distortions averaged per cell (random policy).
    #[arg(long, default_value_t = 1)]
    draws: usize,
    /// Multi-start uniqueness probe per cell; 0 skips it.
    #[arg(long, default_value_t = 0)]
    uniqueness_starts: usize,
}

struct Ctx {
    seed: u64,
    tol: Option<f64>,
    format: Format,
    out: Option<PathBuf>,
}

impl Ctx {
    fn solve_opts(&self, starts: usize) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            starts,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn emit_csv(&self, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.writer()?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn emit<T: Serialize>(&self, value: &T, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        match self.format {
            Format::Json => self.emit_json(value),
            Format::Csv => self.emit_csv(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>(), rows),
        }
    }
}

fn load(path: &Path) -> Result<Economy> {
    let text = std::fs::read_to_string(path)?;
    Economy::from_json(&text)
}

fn load_and_solve(ctx: &Ctx, args: &EconomyArgs) -> Result<(Economy, EquilibriumResult)> {
    let e = load(&args.economy)?;
    let eq = solve_equilibrium(&e, &ctx.solve_opts(args.starts))?;
    Ok((e, eq))
}

fn kv(key: &str, value: impl ToString) -> Vec<String> {
    vec![key.to_string(), value.to_string()]
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        tol: cli.tol,
        format: cli.format,
        out: cli.out,
    };
    match cli.command {
        Command::Solve(args) => {
            let (_, eq) = load_and_solve(&ctx, &args)?;
            let rows = eq
                .prices
                .iter()
                .zip(&eq.price_ratios)
                .enumerate()
                .map(|(m, (p, q))| vec![(m + 1).to_string(), p.to_string(), q.to_string()])
                .collect();
            ctx.emit(&eq, &["date", "price", "price_ratio"], rows)
        }
        Command::Jacobian {
            economy,
            fd_check,
            fd_step,
        } => {
            let (e, eq) = load_and_solve(&ctx, &economy)?;
            let jac = aggregate_jacobian(&e, &eq)?;
            let fd = if fd_check {
                let fd = fd_jacobian(&e, &eq.prices, fd_step)?;
                let err = relative_sup_error(&jac, &fd);
                Some(json!({ "rel_step": fd_step, "relative_sup_error": err, "pass": err <= 1e-4 }))
            } else {
                None
            };
            let rows: Vec<Vec<f64>> = jac.row_iter().map(|r| r.iter().copied().collect()).collect();
            match ctx.format {
                Format::Json => ctx.emit_json(&json!({
                    "convention": "entry [m][n] = dz_n / dp_m, dates 1..N",
                    "prices": eq.prices,
                    "jacobian": rows,
                    "fd_check": fd,
                })),
                Format::Csv => {
                    let header: Vec<String> = std::iter::once("dp".to_string())
                        .chain((1..=rows.len()).map(|n| format!("dz_{n}")))
                        .collect();
                    let body = rows.iter().enumerate().map(|(m, r)| {
                        std::iter::once(format!("p_{}", m + 1))
                            .chain(r.iter().map(f64::to_string))
                            .collect()
                    });
                    if let Some(fd) = &fd {
                        eprintln!("fd check: {fd}");
                    }
                    ctx.emit_csv(&header, body)
                }
            }
        }
        Command::Decompose { economy, draws } => {
            let (e, eq) = load_and_solve(&ctx, &economy)?;
            let jac = aggregate_jacobian(&e, &eq)?;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let mut out = Vec::with_capacity(draws);
            for _ in 0..draws {
                let q = random_distortion(&e, &eq, rng.random())?;
                // Mix in a share of the price direction so alpha is not trivially zero.
                let a: f64 = rng.random_range(-1.0..1.0);
                let q: Vec<f64> = q.iter().zip(&eq.prices).map(|(q, p)| q + a * p).collect();
                let t = quadratic_terms(&e, &eq, &q)?;
                let lhs = quadratic_form(&jac, &q);
                let rates = rate_ratios(&e, &eq, &t.u)?;
                out.push(json!({
                    "terms": t,
                    "quadratic_form": lhs,
                    "identity_residual": (lhs - t.recomposed()).abs() / (1.0 + lhs.abs()),
                    "rates": rates,
                }));
            }
            let rows = out
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let t = &v["terms"];
                    [
                        k.to_string(),
                        t["alpha"].to_string(),
                        t["A"].to_string(),
                        t["s_of_u"].to_string(),
                        t["r_of_u"].to_string(),
                        t["m_of_u"].to_string(),
                        v["quadratic_form"].to_string(),
                        v["identity_residual"].to_string(),
                        v["rates"]["s_ratio"].to_string(),
                        v["rates"]["m_ratio"].to_string(),
                    ]
                    .to_vec()
                })
                .collect();
            ctx.emit(
                &json!({ "prices": eq.prices, "draws": out }),
                &[
                    "draw",
                    "alpha",
                    "A",
                    "S",
                    "R",
                    "M",
                    "quadratic_form",
                    "identity_residual",
                    "s_ratio",
                    "m_ratio",
                ],
                rows,
            )
        }
        Command::Stability { economy, probe_starts } => {
            let (e, eq) = load_and_solve(&ctx, &economy)?;
            let report = equilibrium_stability(&e, &eq)?;
            let probe = if probe_starts >= 2 {
                Some(uniqueness_probe(&e, probe_starts, ctx.seed, &ctx.solve_opts(1))?)
            } else {
                None
            };
            let mut rows = vec![
                kv("max_sym_eig", report.max_sym_eig),
                kv("negative_definite", report.negative_definite),
                kv("index", report.index),
                kv("det_sign_margin", report.det_sign_margin),
                kv("condition_estimate", report.condition_estimate),
                kv("inconclusive", report.inconclusive),
            ];
            if let Some(p) = &probe {
                rows.push(kv("clusters", p.clusters.len()));
                rows.push(kv("failed_starts", p.failed_starts.len()));
            }
            ctx.emit(
                &json!({ "stability": report, "uniqueness": probe }),
                &["key", "value"],
                rows,
            )
        }
        Command::Tatonnement {
            economy,
            perturb,
            t_max,
            rtol,
            max_samples,
        } => {
            if !(0.0..1.0).contains(&perturb) {
                return Err(LabError::validation("perturb", "must lie in [0, 1)"));
            }
            let (e, eq) = load_and_solve(&ctx, &economy)?;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let p0: Vec<f64> = eq
                .prices
                .iter()
                .map(|p| p * (1.0 + perturb * rng.random_range(-1.0..=1.0)))
                .collect();
            let opts = TatonnementOptions {
                t_max,
                rtol,
                max_samples,
                ..Default::default()
            };
            let run = tatonnement_simulate(&e, &eq, &p0, &opts)?;
            match ctx.format {
                Format::Json => ctx.emit_json(&json!({ "equilibrium": eq.prices, "start": p0, "run": run })),
                Format::Csv => {
                    eprintln!(
                        "converged={} final_distance={:.3e} threshold={:.3e}",
                        run.converged, run.final_distance, run.threshold
                    );
                    let mut w = ctx.writer()?;
                    run.write_csv(&mut w)?;
                    w.flush()?;
                    Ok(())
                }
            }
        }
        Command::Diversify(args) => {
            let (e, eq) = load_and_solve(&ctx, &args)?;
            let r = diversification_report(&e, &eq)?;
            let mut rows = Vec::new();
            for (i, (shares, rho)) in r.shares.iter().zip(&r.rho).enumerate() {
                for (n, (m, d)) in shares.iter().zip(rho).enumerate() {
                    rows.push(vec![i.to_string(), (n + 1).to_string(), m.to_string(), d.to_string()]);
                }
            }
            match ctx.format {
                Format::Csv => eprintln!(
                    "a5={} a5_prime={} spectral_sum_sq={:?}",
                    r.a5, r.a5_prime, r.spectral_sum_sq
                ),
                Format::Json => {}
            }
            ctx.emit(&r, &["agent", "date", "marginal_share", "rho"], rows)
        }
        Command::Scenario(ScenarioCommand::Gen(args)) => {
            if ctx.format == Format::Csv {
                return Err(LabError::validation("format", "economy spec files are JSON only"));
            }
            let spec = ScenarioSpec::new(args.scenario.family()?, ctx.seed);
            let e = generate(&spec, args.horizon, args.beta, args.agents)?;
            let check = verify_constraints(&e, &spec);
            if !check.pass {
                return Err(LabError::ConstraintViolation {
                    condition: check.violations().join("; "),
                    magnitude: check.checks.iter().map(|c| c.residual.abs()).fold(0.0, f64::max),
                });
            }
            ctx.emit_json(&e.to_spec())
        }
        Command::Sweep(args) => {
            let spec = ScenarioSpec::new(args.scenario.family()?, ctx.seed);
            let grid = SweepGrid::product(spec, &args.horizons, &args.betas, &args.agents, &args.seeds);
            let policy = match args.policy {
                Policy::Random => DistortionPolicy::SeededRandom { draws: args.draws },
                Policy::OddEven => DistortionPolicy::OddEven,
            };
            let opts = SweepOptions {
                policy,
                solve: ctx.solve_opts(1),
                uniqueness_starts: args.uniqueness_starts,
            };
            let result = run_sweep(&grid, &opts)?;
            let mut w = ctx.writer()?;
            match ctx.format {
                Format::Csv => result.write_csv(&mut w)?,
                Format::Json => writeln!(w, "{}", result.to_json()?)?,
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream reader closed early (e.g. `| head`).
        Err(LabError::Io(err)) if err.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(LabError::Csv(err)) if matches!(err.kind(), csv::ErrorKind::Io(e) if e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_validation() { 2 } else { 3 })
        }
    }
}
