//! `rangesep` command-line driver. Reports go to stdout as JSON, plot data
//! to CSV files. Exit status: 0 success, 1 invalid input, 2 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rangesep::elliptic::{impulse_density, pbe_regularize_rhs, regularized_poisson, PbeConfig, PbeSplitParams};
use rangesep::operators::{build_delta, interior_mass, interior_support_radius, KroneckerLaplacian};
use rangesep::oracles::{erf_potential_gradient, green_eval, AnalyticKernel, KernelValue};
use rangesep::quadrature::log_spaced;
use rangesep::range_sep::{choose_split, criterion_value, default_split, project, short_support_radius, AssembleOptions, Projection};
use rangesep::{assemble_multiparticle, build_sinc_rule, convergence_sweep, Error, GridSpec, ParticleSystem, RadialKernel, RsSplit, SplitCriterion};

const SCHEMA_VERSION: u32 = 1;

const LAPLACIAN_CONVENTION: &str =
    "-A = (1/h^2) tridiag(-1, 2, -1) per axis (positive definite), homogeneous Dirichlet; delta = -A P";

#[derive(Parser)]
#[command(name = "rangesep", version, about = "Range-separated tensor kernels, grid deltas and regularized solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sinc quadrature of a radial kernel: pointwise table or convergence sweep.
    Quadrature(QuadratureArgs),
    /// Projects a kernel onto a grid as a canonical tensor.
    Project(ProjectArgs),
    /// Chooses the long/short split of a kernel tensor.
    Split(SplitArgs),
    /// Assembles the potential of a particle system in range-separated form.
    Assemble(AssembleArgs),
    /// Grid Dirac delta of the Newton kernel and its range-separated parts.
    Delta(DeltaArgs),
    /// Regularized Poisson solve or Poisson-Boltzmann right-hand side.
    Solve(SolveArgs),
    /// Closed-form kernel values.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KernelName {
    /// 1/r
    Newton,
    /// 1/(4 pi r)
    Coulomb,
    /// exp(-kappa r)/r
    Yukawa,
    /// r^-beta
    Invpow,
}

#[derive(Args, Debug, Serialize)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "newton")]
    kernel: KernelName,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

impl KernelArgs {
    fn kernel(&self) -> RadialKernel {
        match self.kernel {
            KernelName::Newton => RadialKernel::newton(),
            KernelName::Coulomb => RadialKernel::coulomb(),
            KernelName::Yukawa => RadialKernel::yukawa(self.kappa),
            KernelName::Invpow => RadialKernel::inverse_power(self.beta),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct RuleArgs {
    /// Quadrature indices run over -M..M.
    #[arg(long = "M", default_value_t = 24)]
    m: usize,
    #[arg(long = "C0", default_value_t = 3.0)]
    c0: f64,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    /// Cells per axis.
    #[arg(long, default_value_t = 129)]
    n: usize,
    /// Half-width of the box [-b, b]^3.
    #[arg(long, default_value_t = 4.0)]
    b: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<GridSpec, Error> {
        GridSpec::new(self.b, self.n)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CriterionName {
    Max,
    L1,
}

impl CriterionName {
    fn criterion(self) -> SplitCriterion {
        match self {
            CriterionName::Max => SplitCriterion::MaxNorm,
            CriterionName::L1 => SplitCriterion::L1Norm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ProjectionName {
    Integral,
    Average,
    Collocation,
}

impl ProjectionName {
    fn projection(self) -> Projection {
        match self {
            ProjectionName::Integral => Projection::Integral,
            ProjectionName::Average => Projection::Average,
            ProjectionName::Collocation => Projection::Collocation,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SplitParams {
    /// Short-range support radius.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, value_enum, default_value = "max")]
    criterion: CriterionName,
}

#[derive(Args, Debug, Serialize)]
struct QuadratureArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Errors for the squares M = 1, 4, 9, ... not above M instead of a
    /// pointwise table.
    #[arg(long)]
    sweep: bool,
    /// Smallest radius sampled.
    #[arg(long, default_value_t = 0.1)]
    rmin: f64,
    #[arg(long, default_value_t = 10.0)]
    rmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ProjectArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, value_enum, default_value = "integral")]
    projection: ProjectionName,
    /// Writes mode1.csv, mode2.csv, mode3.csv, coeffs.csv and meta.json here.
    #[arg(long)]
    dump_factors: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SplitArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    rule: RuleArgs,
    #[command(flatten)]
    split: SplitParams,
    /// Explicit split index; overrides the criterion.
    #[arg(long = "Rl")]
    r_l: Option<usize>,
    #[arg(long, value_enum, default_value = "average")]
    projection: ProjectionName,
}

#[derive(Args, Debug, Serialize)]
struct AssembleArgs {
    /// Text file with one `x y z q` line per particle.
    #[arg(long)]
    particles: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    rule: RuleArgs,
    #[command(flatten)]
    split: SplitParams,
    /// Relative Tucker truncation tolerance of the long-range part.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Seed of the canonical re-expansion.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct DeltaArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Split index; defaults to M/2.
    #[arg(long = "Rl")]
    r_l: Option<usize>,
    /// Compresses the long-range delta to this tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Grid sizes for the support-radius study; defaults to --n.
    #[arg(long, value_delimiter = ',')]
    grids: Vec<usize>,
    /// Cross-section CSV along the x axis through the box center.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SolveMode {
    Poisson,
    PbeRhs,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[arg(long)]
    particles: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    rule: RuleArgs,
    #[command(flatten)]
    split: SplitParams,
    /// Compression tolerance of the long-range density (pbe-rhs).
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, value_enum)]
    mode: SolveMode,
    /// Van der Waals radius of each charge; defaults to --sigma.
    #[arg(long)]
    vdw_radius: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    eps_m: f64,
    #[arg(long, default_value_t = 78.5)]
    eps_s: f64,
    /// Debye-Hückel screening constant.
    #[arg(long, default_value_t = 0.1)]
    kappa: f64,
    /// Cross-section CSV along the x axis through the box center.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OracleKernel {
    ErfPotential,
    ErfGradient,
    Gd,
    Newton,
    Yukawa,
    Biharmonic,
    Kelvin,
    Stokeslet,
    StokesPressure,
    Eta0,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[arg(long, value_enum)]
    kernel: OracleKernel,
    /// Evaluation point `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true, allow_negative_numbers = true)]
    at: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Space dimension of `gd`.
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Shear modulus of `kelvin`.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Viscosity of `stokeslet`.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Drift vector of `eta0`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,0,0")]
    drift: Vec<f64>,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::NotConverged { .. }) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type CliResult<T> = Result<T, Failure>;

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

fn read_particles(path: &Path) -> CliResult<ParticleSystem> {
    let text = fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))?;
    let sys = ParticleSystem::parse(&text)?;
    if sys.is_empty() {
        return Err(fail(format!("no particles in {}", path.display())));
    }
    Ok(sys)
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn report(command: &str, config: &impl Serialize, started: Instant, body: Value) -> Value {
    let mut v = json!({
        "schemaVersion": SCHEMA_VERSION,
        "command": command,
        "config": config,
    });
    let obj = v.as_object_mut().unwrap();
    if let Value::Object(fields) = body {
        obj.extend(fields);
    }
    obj.insert("elapsedSeconds".into(), json!(started.elapsed().as_secs_f64()));
    v
}

fn quadrature(a: &QuadratureArgs) -> CliResult<Option<Value>> {
    let kernel = a.kernel.kernel();
    let rs = log_spaced(a.rmin, a.rmax, a.points);
    let mut csv = String::new();
    if a.sweep {
        // Squares keep √M, and with it the step C0/√M, on an even ladder;
        // between squares the error oscillates.
        let ms: Vec<usize> = (1..).map(|k| k * k).take_while(|&m| m <= a.rule.m).collect();
        let rows = convergence_sweep(kernel, &ms, &rs, a.rmin, a.rule.c0)?;
        csv.push_str("M,maxRelError\n");
        for r in rows {
            writeln!(csv, "{},{:e}", r.m, r.max_rel_error).unwrap();
        }
    } else {
        let rule = build_sinc_rule(kernel, a.rule.m, a.rule.c0)?;
        csv.push_str("r,approx,exact,relError\n");
        for &r in &rs {
            let (p, e) = (rule.eval(r), kernel.exact(r));
            writeln!(csv, "{r:e},{p:e},{e:e},{:e}", ((p - e) / e).abs()).unwrap();
        }
    }
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => emit(&csv),
    }
    Ok(None)
}

fn project_cmd(a: &ProjectArgs) -> CliResult<Value> {
    let started = Instant::now();
    let g = a.grid.grid()?;
    let rule = build_sinc_rule(a.kernel.kernel(), a.rule.m, a.rule.c0)?;
    let t = project(&rule, &g, a.projection.projection());
    let meta = json!({
        "n": g.n, "b": g.b, "h": g.h(), "R": t.rank(),
        "kernel": rule.kernel, "M": rule.m, "C0": rule.c0,
    });
    if let Some(dir) = &a.dump_factors {
        fs::create_dir_all(dir).map_err(|e| fail(format!("cannot create {}: {e}", dir.display())))?;
        for (mode, f) in t.factors.iter().enumerate() {
            // Header row, then one line per column: column-major order.
            let mut s = format!("n,R,b\n{},{},{}\n", g.n, t.rank(), g.b);
            for c in f.column_iter() {
                let row: Vec<String> = c.iter().map(|v| format!("{v:e}")).collect();
                s.push_str(&row.join(","));
                s.push('\n');
            }
            write_file(&dir.join(format!("mode{}.csv", mode + 1)), &s)?;
        }
        let coeffs: Vec<String> = t.coeffs.iter().map(|v| format!("{v:e}")).collect();
        write_file(&dir.join("coeffs.csv"), &(coeffs.join("\n") + "\n"))?;
        write_file(&dir.join("meta.json"), &serde_json::to_string_pretty(&meta).unwrap())?;
    }
    Ok(report(
        "project",
        a,
        started,
        json!({ "metadata": meta, "frobeniusNorm": t.frobenius_norm(), "storage": t.storage() }),
    ))
}

fn split_cmd(a: &SplitArgs) -> CliResult<Value> {
    let started = Instant::now();
    let g = a.grid.grid()?;
    let rule = build_sinc_rule(a.kernel.kernel(), a.rule.m, a.rule.c0)?;
    let p = a.projection.projection();
    let crit = a.split.criterion.criterion();
    let (s, all_long) = match a.r_l {
        Some(r_l) => (RsSplit::at(&rule, &g, p, r_l, a.split.delta)?, false),
        None => {
            let choice = choose_split(&rule, a.split.sigma, a.split.delta, crit)?;
            (RsSplit::by_criterion(&rule, &g, p, a.split.sigma, a.split.delta, crit)?, choice.all_long)
        }
    };
    let terms: Vec<Value> = (0..rule.rank())
        .map(|i| {
            json!({
                "k": rule.ks[i],
                "t": rule.nodes[i],
                "p": rule.weights[i],
                "criterionValue": criterion_value(&rule, i, a.split.sigma, crit),
                "part": if i < s.long.rank() { "long" } else { "short" },
            })
        })
        .collect();
    Ok(report(
        "split",
        a,
        started,
        json!({
            "R_l": s.r_l,
            "R_s": s.r_s(),
            "allLong": all_long,
            "longRank": s.long.rank(),
            "sigma": s.sigma,
            "gamma": s.gamma(),
            "shortSupportRadius": short_support_radius(&rule, s.r_l, a.split.delta),
            "longNorm": s.long.frobenius_norm(),
            "shortNorm": s.short.frobenius_norm(),
            "terms": terms,
        }),
    ))
}

fn assemble_cmd(a: &AssembleArgs) -> CliResult<Value> {
    let started = Instant::now();
    let sys = read_particles(&a.particles)?;
    let g = a.grid.grid()?;
    sys.check_inside(&g)?;
    let rule = build_sinc_rule(RadialKernel::coulomb(), a.rule.m, a.rule.c0)?;
    let reference = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, a.split.sigma, a.split.delta, a.split.criterion.criterion())?;
    let mut opts = AssembleOptions::new(a.eps);
    opts.compression.seed = a.seed;
    let (_, tucker, rep) = assemble_multiparticle(&reference, &sys, &g, &opts)?;
    Ok(report(
        "assemble",
        a,
        started,
        json!({
            "N": rep.n_particles,
            "R_l": rep.r_l,
            "R_s": rep.r_s,
            "gamma": rep.gamma,
            "tuckerRanks": tucker.ranks(),
            "canonicalRankBefore": rep.uncompressed_long_rank,
            "canonicalRankAfter": rep.compression.canonical_rank,
            "storageBytes": 8 * rep.storage,
            "storageBoundBytes": 8 * rep.storage_bound,
            "maxSnapDisplacement": rep.max_snap_displacement,
            "compression": rep.compression,
        }),
    ))
}

fn delta_cmd(a: &DeltaArgs) -> CliResult<Value> {
    let started = Instant::now();
    let rule = build_sinc_rule(RadialKernel::coulomb(), a.rule.m, a.rule.c0)?;
    let r_l = a.r_l.unwrap_or_else(|| default_split(&rule));
    let grids = if a.grids.is_empty() { vec![a.grid.n] } else { a.grids.clone() };
    let mut csv = String::from("n,x,delta_full,delta_s,delta_l\n");
    let mut rows = Vec::new();
    for &n in &grids {
        let g = GridSpec::new(a.grid.b, n)?;
        let s = RsSplit::at(&rule, &g, Projection::Average, r_l, 1e-4)?;
        let d = build_delta(&s, &KroneckerLaplacian::dirichlet(g), a.eps)?;
        let c = g.center_index();
        for i in 0..n {
            let at = [i, c, c];
            writeln!(csv, "{n},{:e},{:e},{:e},{:e}", g.coord(i), d.full.entry(at)?, d.short.entry(at)?, d.long.entry(at)?).unwrap();
        }
        rows.push(json!({
            "n": n,
            "h": g.h(),
            "interiorMass": interior_mass(&d.full),
            "longSupportRadius": interior_support_radius(&d.long, [0.0; 3], 1e-3),
            "shortSupportRadius": interior_support_radius(&d.short, [0.0; 3], 1e-3),
            "ranks": { "full": d.full.rank(), "short": d.short.rank(), "long": d.long.rank() },
            "longCompression": d.long_compression,
        }));
    }
    if let Some(path) = &a.csv {
        write_file(path, &csv)?;
    }
    Ok(report(
        "delta",
        a,
        started,
        json!({
            "laplacian": LAPLACIAN_CONVENTION,
            "R_l": r_l,
            "supportThreshold": 1e-3,
            "grids": rows,
        }),
    ))
}

fn solve_cmd(a: &SolveArgs) -> CliResult<Value> {
    let started = Instant::now();
    let sys = read_particles(&a.particles)?;
    let g = a.grid.grid()?;
    sys.check_inside(&g)?;
    let rule = build_sinc_rule(RadialKernel::coulomb(), a.rule.m, a.rule.c0)?;
    let crit = a.split.criterion.criterion();
    let c = g.center_index();
    let mut csv = String::new();
    let body = match a.mode {
        SolveMode::Poisson => {
            let f = impulse_density(&g, &sys)?;
            let s = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, a.split.sigma, a.split.delta, crit)?;
            let sol = regularized_poisson(&f, &s)?;
            let (u, us, fb) = (sol.u.to_dense(), sol.u_short.to_dense(), sol.f_bar.to_dense());
            csv.push_str("x,u,u_s,f_bar\n");
            for i in 0..g.n {
                writeln!(csv, "{:e},{:e},{:e},{:e}", g.coord(i), u[[i, c, c]], us[[i, c, c]], fb[[i, c, c]]).unwrap();
            }
            let r = &sol.report;
            json!({
                "residual": r.solve.rel_residual,
                "supportDistances": { "f": r.support_distance, "fBar": r.modified_support_distance, "sigma": r.sigma },
                "interfaceMax": Value::Null,
                "ranks": { "R_l": s.r_l, "R_s": s.r_s() },
                "report": r,
            })
        }
        SolveMode::PbeRhs => {
            let cfg = PbeConfig::with_vdw_balls(sys, a.vdw_radius.unwrap_or(a.split.sigma), a.eps_m, a.eps_s, a.kappa);
            let p = PbeSplitParams { m: a.rule.m, c0: a.rule.c0, sigma: a.split.sigma, delta: a.split.delta, criterion: crit, eps: a.eps };
            let rhs = pbe_regularize_rhs(&cfg, &g, &rule, &p)?;
            let us = rhs.u_short.to_dense();
            csv.push_str("x,rho_long,u_short\n");
            for i in 0..g.n {
                writeln!(csv, "{:e},{:e},{:e}", g.coord(i), rhs.rho_long.entry([i, c, c])?, us[[i, c, c]]).unwrap();
            }
            let r = &rhs.report;
            json!({
                "residual": Value::Null,
                "supportDistances": { "rhoLongCellsOutside": r.rho_long_cells_outside, "rhoLongCellsInside": r.rho_long_cells_inside },
                "interfaceMax": r.interface_max,
                "ranks": { "R_l": r.r_l, "tucker": r.long_compression.tucker_ranks, "canonical": r.long_compression.canonical_rank },
                "report": r,
            })
        }
    };
    if let Some(path) = &a.csv {
        write_file(path, &csv)?;
    }
    Ok(report("solve", a, started, body))
}

fn oracle_cmd(a: &OracleArgs) -> CliResult<Value> {
    let started = Instant::now();
    let x: [f64; 3] = a.at.as_slice().try_into().map_err(|_| fail("--at needs three comma-separated coordinates"))?;
    let drift: [f64; 3] = a.drift.as_slice().try_into().map_err(|_| fail("--drift needs three comma-separated values"))?;
    let kernel = match a.kernel {
        OracleKernel::ErfGradient => {
            let g = erf_potential_gradient(a.lambda, x)?;
            return Ok(report("oracle", a, started, json!({ "value": g })));
        }
        OracleKernel::ErfPotential => AnalyticKernel::ErfPotential { lambda: a.lambda },
        OracleKernel::Gd => AnalyticKernel::GdRadial { d: a.d, lambda: a.lambda },
        OracleKernel::Newton => AnalyticKernel::Yukawa { kappa: 0.0 },
        OracleKernel::Yukawa => AnalyticKernel::Yukawa { kappa: a.kappa },
        OracleKernel::Biharmonic => AnalyticKernel::Biharmonic,
        OracleKernel::Kelvin => AnalyticKernel::KelvinSomigliana { lambda: a.lambda, mu: a.mu },
        OracleKernel::Stokeslet => AnalyticKernel::Stokeslet { nu: a.nu },
        OracleKernel::StokesPressure => AnalyticKernel::StokesPressure,
        OracleKernel::Eta0 => AnalyticKernel::Eta0 { b: drift },
    };
    let value = match green_eval(&kernel, x)? {
        KernelValue::Scalar(v) => json!(v),
        KernelValue::Vector(v) => json!(v),
        KernelValue::Matrix(m) => json!(m),
    };
    Ok(report("oracle", a, started, json!({ "value": value })))
}

fn run(cli: &Cli) -> CliResult<Option<Value>> {
    match &cli.command {
        Command::Quadrature(a) => quadrature(a),
        Command::Project(a) => project_cmd(a).map(Some),
        Command::Split(a) => split_cmd(a).map(Some),
        Command::Assemble(a) => assemble_cmd(a).map(Some),
        Command::Delta(a) => delta_cmd(a).map(Some),
        Command::Solve(a) => solve_cmd(a).map(Some),
        Command::Oracle(a) => oracle_cmd(a).map(Some),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("RS_KERNELS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| fail(format!("RS_KERNELS_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| fail(format!("cannot configure {n} threads: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(1);
        }
    };
    let result = configure_threads().and_then(|_| run(&cli));
    match result {
        Ok(Some(v)) => {
            emit(&(serde_json::to_string_pretty(&v).unwrap() + "\n"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
