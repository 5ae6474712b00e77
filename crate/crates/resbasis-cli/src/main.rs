//! `resbasis`: compute residual-stress basis modes on a spherical shell,
//! verify their invariants, fit candidate stress fields, and emit plot-ready
//! CSV/JSON.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
//! failure. Output files are byte-deterministic for identical flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use resbasis::basis::{
    basis_up_to, el_residual, eval_mu, mode_json_record, BasisError, BasisMode, FunctionalParams,
};
use resbasis::candidates::{
    load_sampled_field, shrinkfit_field, thermoelastic_field, CandidateError, ShrinkFitSpec,
    ThermoelasticSpec,
};
use resbasis::fields::{FieldError, RadialField, ShellGeometry};
use resbasis::fitting::{fit_report, partial_sum_field, FitError, DEFAULT_WINDOW};
use resbasis::quadrature::{energy, l2_inner, QuadratureError, QuadratureSpec, WeightMode};

#[derive(Parser)]
#[command(name = "resbasis", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve basis modes and write their constants (JSON) and profiles (CSV).
    Modes(ModesArgs),
    /// Run the invariant checks on a freshly solved basis.
    Verify(VerifyArgs),
    /// Expand a candidate stress field in the basis and report error curves.
    Fit(FitArgs),
    /// Sweep omega or mu over a grid of strip coordinates.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct StripArgs {
    /// Strip coordinate p = beta + gamma.
    #[arg(long, allow_negative_numbers = true)]
    p: f64,
    /// Strip coordinate k = 2 beta - gamma.
    #[arg(long, allow_negative_numbers = true)]
    k: f64,
    /// Enforce the open strip (0 < p < 5, k > 0) instead of the closed one.
    #[arg(long)]
    strict_strip: bool,
}

impl StripArgs {
    fn params(&self) -> Result<FunctionalParams, CliError> {
        let r = if self.strict_strip {
            FunctionalParams::new_strict(self.p, self.k)
        } else {
            FunctionalParams::new(self.p, self.k)
        };
        r.map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args, Clone)]
struct ShellArgs {
    /// Inner shell radius.
    #[arg(long, default_value_t = 0.5)]
    ri: f64,
    /// Outer shell radius.
    #[arg(long, default_value_t = 1.0)]
    ro: f64,
}

impl ShellArgs {
    fn geometry(&self) -> Result<ShellGeometry, CliError> {
        ShellGeometry::new(self.ri, self.ro).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args, Clone)]
struct QuadArgs {
    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    abs_tol: f64,
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
    /// Gauss-Legendre nodes per panel.
    #[arg(long, default_value_t = 16)]
    nodes_per_panel: usize,
    /// Norm weight: `r2` (volume measure) or `paper` (literal reduced form).
    #[arg(long, value_enum, default_value_t = WeightArg::R2)]
    norm_weight: WeightArg,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum WeightArg {
    R2,
    Paper,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        let spec = QuadratureSpec {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            nodes_per_panel: self.nodes_per_panel,
            weight: match self.norm_weight {
                WeightArg::R2 => WeightMode::R2,
                WeightArg::Paper => WeightMode::PaperLiteral,
            },
            ..QuadratureSpec::default()
        };
        spec.validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Args)]
struct ModesArgs {
    #[command(flatten)]
    strip: StripArgs,
    /// Number of modes to solve.
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    shell: ShellArgs,
    /// Radial samples per mode in the profile CSV.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[command(flatten)]
    quad: QuadArgs,
    /// Path of the mode-constants JSON.
    #[arg(long)]
    out_json: PathBuf,
    /// Optional path of the sampled-profile CSV (`n,r,s_par,s_perp,mu`).
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    strip: StripArgs,
    /// Number of modes to verify.
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    shell: ShellArgs,
    #[command(flatten)]
    quad: QuadArgs,
    /// Override every check tolerance with one value.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum FieldKind {
    Thermoelastic,
    Shrinkfit,
    Csv,
}

#[derive(Args)]
struct FitArgs {
    /// Candidate field to expand.
    #[arg(long, value_enum)]
    field: FieldKind,
    #[command(flatten)]
    strip: StripArgs,
    /// Truncation order of the expansion.
    #[arg(long)]
    n_max: usize,
    #[command(flatten)]
    shell: ShellArgs,
    /// Shrink-fit interface radius.
    #[arg(long, allow_negative_numbers = true)]
    rm: Option<f64>,
    /// Shrink-fit radial interference.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Dimensionless bulk modulus.
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Dimensionless shear modulus.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Thermal expansion coefficient (thermoelastic field).
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Temperature slope constant (thermoelastic field).
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Sampled-field CSV path (for `--field csv`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated interior radii where the sampled field is
    /// discontinuous.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    breakpoints: Vec<f64>,
    #[command(flatten)]
    quad: QuadArgs,
    /// Path of the fit-report JSON; reconstruction CSVs are written next to
    /// it as `<stem>_recon_n{3,10,100}.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum SweepKind {
    Omega,
    Mu,
}

#[derive(Args)]
struct SweepArgs {
    /// Quantity to sweep: `omega` or `mu`.
    #[arg(long, value_enum)]
    what: SweepKind,
    #[arg(long, allow_negative_numbers = true)]
    p_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    p_max: f64,
    /// Number of grid points in p (1 gives the degenerate single-column grid).
    #[arg(long)]
    p_steps: usize,
    /// Strip coordinate k (mu sweep only; omega does not depend on it).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    k: f64,
    /// Highest mode index (omega) or the single mode index (mu).
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Radial grid points for the mu sweep.
    #[arg(long, default_value_t = 101)]
    r_steps: usize,
    #[command(flatten)]
    shell: ShellArgs,
    #[command(flatten)]
    quad: QuadArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Verify,
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Verify => 1,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<BasisError> for CliError {
    fn from(e: BasisError) -> Self {
        match e {
            BasisError::OutsideStrip { .. }
            | BasisError::InvalidIndex
            | BasisError::BadContinuationTargets => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<CandidateError> for CliError {
    fn from(e: CandidateError) -> Self {
        match e {
            CandidateError::Field(inner) => CliError::Numerical(inner.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o failure: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let result = match cli.command {
        Command::Modes(args) => cmd_modes(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("usage error: {msg}"),
                CliError::Verify => eprintln!("verification failed"),
                CliError::Numerical(msg) => eprintln!("numerical failure: {msg}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

/// 12 significant digits, the plot-grade CSV format.
fn csv_f64(x: f64) -> String {
    format!("{x:.11e}")
}

fn solve_basis(
    params: &FunctionalParams,
    n: usize,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<Vec<BasisMode>, CliError> {
    if n == 0 {
        return Err(CliError::Usage("need at least one mode (--n >= 1)".into()));
    }
    Ok(basis_up_to(params, n, geometry, spec)?)
}

fn cmd_modes(args: ModesArgs) -> Result<(), CliError> {
    let params = args.strip.params()?;
    let geometry = args.shell.geometry()?;
    let spec = args.quad.spec()?;
    if args.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let modes = solve_basis(&params, args.n, geometry, &spec)?;

    let mut json = String::from("[\n");
    for (i, mode) in modes.iter().enumerate() {
        let e = energy(
            mode.field(),
            params.p(),
            &spec.for_mode(mode.constants().index_n()),
        )?;
        let _ = write!(json, "  {}", mode_json_record(mode, e, spec.weight));
        json.push_str(if i + 1 < modes.len() { ",\n" } else { "\n" });
    }
    json.push_str("]\n");
    fs::write(&args.out_json, json)?;

    if let Some(csv_path) = &args.out_csv {
        let mut csv = String::from("n,r,s_par,s_perp,mu\n");
        for mode in &modes {
            for i in 0..args.samples {
                let r =
                    geometry.r_inner() + geometry.width() * i as f64 / (args.samples - 1) as f64;
                let s_par = mode.field().s_par().value(r);
                let s_perp = mode.field().s_perp().value(r);
                let mu = eval_mu(mode.constants(), &params, geometry, r)?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    mode.constants().index_n(),
                    csv_f64(r),
                    csv_f64(s_par),
                    csv_f64(s_perp),
                    csv_f64(mu)
                );
            }
        }
        fs::write(csv_path, csv)?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let params = args.strip.params()?;
    let geometry = args.shell.geometry()?;
    let spec = args.quad.spec()?;
    if args.n == 0 {
        return Err(CliError::Usage(
            "nothing to verify (--n must be >= 1)".into(),
        ));
    }
    let modes = solve_basis(&params, args.n, geometry, &spec)?;
    let mode_spec = spec.for_mode(args.n);

    // Check 1: the Gram matrix in the L2 product is the identity.
    let mut gram_dev = 0.0f64;
    for i in 0..modes.len() {
        for j in i..modes.len() {
            let g = l2_inner(modes[i].field(), modes[j].field(), &mode_spec)?;
            let target = if i == j { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((g - target).abs());
        }
    }

    // Check 2: lambda = 2E, relative.
    let mut lambda_dev = 0.0f64;
    for mode in &modes {
        let e = energy(mode.field(), params.p(), &mode_spec)?;
        let lambda = mode.constants().lambda();
        lambda_dev = lambda_dev.max((2.0 * e - lambda).abs() / lambda);
    }

    // Check 3: Euler-Lagrange residuals over interior radii, relative to lambda.
    let mut el_dev = 0.0f64;
    for mode in &modes {
        let lambda = mode.constants().lambda();
        for i in 1..=25 {
            let r = geometry.r_inner() + geometry.width() * i as f64 / 26.0;
            let (radial, transverse) = el_residual(mode, r)?;
            el_dev = el_dev.max(radial.abs().max(transverse.abs()) / lambda);
        }
    }

    // Check 4: traction-free boundary values of S_par.
    let mut bc_dev = 0.0f64;
    for mode in &modes {
        for r in [geometry.r_inner(), geometry.r_outer()] {
            bc_dev = bc_dev.max(mode.field().s_par().value(r).abs());
        }
    }

    let checks = [
        ("gram-identity", gram_dev, args.tol.unwrap_or(1e-8)),
        ("lambda-2E", lambda_dev, args.tol.unwrap_or(1e-6)),
        ("el-residual", el_dev, args.tol.unwrap_or(1e-6)),
        ("boundary", bc_dev, args.tol.unwrap_or(1e-10)),
    ];
    let mut all_pass = true;
    println!("check         max-deviation  tolerance  verdict");
    for (name, value, tol) in checks {
        let pass = value < tol;
        all_pass &= pass;
        println!(
            "{name:<13} {:<14} {:<10} {}",
            format!("{value:.3e}"),
            format!("{tol:.1e}"),
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Verify)
    }
}

/// Accept either the ingestion schema `r,s_par,s_perp` or an emitted
/// reconstruction CSV (whose target columns carry the field).
fn read_target_csv(path: &Path) -> Result<String, CliError> {
    let raw = fs::read_to_string(path)?;
    let Some(first) = raw.lines().find(|l| !l.trim().is_empty()) else {
        return Err(CliError::Usage(format!("{}: empty CSV", path.display())));
    };
    let header: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if header == ["r", "s_par", "s_perp"] {
        return Ok(raw);
    }
    if header
        == [
            "r",
            "target_par",
            "target_perp",
            "approx_par",
            "approx_perp",
        ]
    {
        let mut out = String::from("r,s_par,s_perp\n");
        for line in raw.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(CliError::Usage(format!(
                    "{}: expected 5 columns, got {}",
                    path.display(),
                    cols.len()
                )));
            }
            let _ = writeln!(out, "{},{},{}", cols[0], cols[1], cols[2]);
        }
        return Ok(out);
    }
    Ok(raw) // let the library's schema check report the precise error
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let params = args.strip.params()?;
    let geometry = args.shell.geometry()?;
    let spec = args.quad.spec()?;
    if args.n_max == 0 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }

    let target: RadialField = match args.field {
        FieldKind::Thermoelastic => {
            let spec_t = ThermoelasticSpec::new(
                args.kappa.unwrap_or(2.8),
                args.mu.unwrap_or(1.0),
                args.alpha.unwrap_or(1.75e-2),
                args.c.unwrap_or(1.0 / 9.0),
                geometry,
            )?;
            thermoelastic_field(&spec_t)
        }
        FieldKind::Shrinkfit => {
            let spec_s = ShrinkFitSpec::new(
                args.kappa.unwrap_or(3.0),
                args.mu.unwrap_or(1.0),
                args.rm.unwrap_or(0.75),
                args.delta.unwrap_or(0.01),
                geometry,
            )?;
            shrinkfit_field(&spec_s)
        }
        FieldKind::Csv => {
            let Some(input) = &args.input else {
                return Err(CliError::Usage("--field csv requires --input PATH".into()));
            };
            let csv = read_target_csv(input)?;
            let loaded = load_sampled_field(&csv, geometry, &args.breakpoints)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            loaded.field
        }
    };

    let modes = solve_basis(&params, args.n_max, geometry, &spec)?;
    let report = fit_report(&target, &modes, &spec, DEFAULT_WINDOW)?;
    fs::write(&args.out, format!("{}\n", report.to_json()))?;

    // Reconstruction CSVs at n in {3, 10, 100} (clipped to n_max).
    let samples = 400usize;
    for n in [3usize, 10, 100] {
        if n > args.n_max {
            continue;
        }
        let approx = partial_sum_field(&modes, &report.coefficients, n)?;
        let mut csv = String::from("r,target_par,target_perp,approx_par,approx_perp\n");
        for i in 0..samples {
            let r = geometry.r_inner() + geometry.width() * i as f64 / (samples - 1) as f64;
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                csv_f64(r),
                csv_f64(target.s_par().value(r)),
                csv_f64(target.s_perp().value(r)),
                csv_f64(approx.s_par().value(r)),
                csv_f64(approx.s_perp().value(r))
            );
        }
        fs::write(recon_path(&args.out, n), csv)?;
    }
    Ok(())
}

/// `out.json -> out_recon_n{n}.csv` next to the report.
fn recon_path(out: &Path, n: usize) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_recon_n{n}.csv"))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let geometry = args.shell.geometry()?;
    let spec = args.quad.spec()?;
    if args.p_steps == 0 {
        return Err(CliError::Usage("--p-steps must be at least 1".into()));
    }
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if args.p_min > args.p_max || args.p_min.is_nan() || args.p_max.is_nan() {
        return Err(CliError::Usage(format!(
            "invalid p range: p-min {} must not exceed p-max {}",
            args.p_min, args.p_max
        )));
    }
    // Validate the range endpoints against the strip.
    for p in [args.p_min, args.p_max] {
        FunctionalParams::new(p, args.k).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let grid: Vec<f64> = if args.p_steps == 1 {
        vec![args.p_min]
    } else {
        (0..args.p_steps)
            .map(|i| args.p_min + (args.p_max - args.p_min) * i as f64 / (args.p_steps - 1) as f64)
            .collect()
    };

    // One continuation walk per mode hits every grid point in order.
    let constants_on_grid =
        |index: usize| -> Result<Vec<resbasis::basis::ModeConstants>, CliError> {
            let base = resbasis::basis::solve_p0(index, geometry, &spec)?;
            let mut targets = grid.clone();
            targets.dedup();
            let path = resbasis::basis::continue_through(&base, &targets, geometry, &spec)?;
            Ok(path)
        };

    match args.what {
        SweepKind::Omega => {
            let mut per_mode = Vec::with_capacity(args.n);
            for index in 1..=args.n {
                per_mode.push(constants_on_grid(index)?);
            }
            let mut csv = String::from("p,n,omega\n");
            for (gi, &p) in grid.iter().enumerate() {
                for (index, path) in per_mode.iter().enumerate() {
                    let _ = writeln!(
                        csv,
                        "{},{},{}",
                        csv_f64(p),
                        index + 1,
                        csv_f64(path[gi].omega())
                    );
                }
            }
            fs::write(&args.out, csv)?;
        }
        SweepKind::Mu => {
            if args.r_steps < 2 {
                return Err(CliError::Usage("--r-steps must be at least 2".into()));
            }
            let path = constants_on_grid(args.n)?;
            let mut csv = String::from("p,r,mu\n");
            for (gi, &p) in grid.iter().enumerate() {
                let params =
                    FunctionalParams::new(p, args.k).map_err(|e| CliError::Usage(e.to_string()))?;
                for i in 0..args.r_steps {
                    let r = geometry.r_inner()
                        + geometry.width() * i as f64 / (args.r_steps - 1) as f64;
                    let mu = eval_mu(&path[gi], &params, geometry, r)?;
                    let _ = writeln!(csv, "{},{},{}", csv_f64(p), csv_f64(r), csv_f64(mu));
                }
            }
            fs::write(&args.out, csv)?;
        }
    }
    Ok(())
}
