use std::fs::File;
use std::io::{BufRead, BufReader, Write};

use serde::Serialize;
use serde_json::json;

use normsol::branch::{
    existence_window, reconstruct_profile, solve_mass, trace_branch, BranchConfig, MassSolution, WindowConfig,
};
use normsol::identities::{identity_report, IdentityReport, Sample};
use normsol::io::{self, fmt_real};
use normsol::variational::{
    gn_constant, minimize_on_d, minimize_on_dm, GNEstimate, GnOptions, MinimizationReport, MinimizeOptions,
    VariationalError,
};

use crate::failure::Failure;
use crate::{Cli, Command, Format, MinimizeArgs, Regime};

pub fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Config(format!("--tol must be positive, got {t}")));
        }
    }
    match &cli.command {
        Command::Branch { lambda } => branch(cli, lambda),
        Command::SolveMass { rho, lambda } => solve(cli, *rho, lambda),
        Command::Profile { lambda, nodes, x_max } => profile(cli, *lambda, *nodes, *x_max),
        Command::Window => window(cli),
        Command::Minimize(args) => minimize(cli, args),
        Command::Gn { p, m, n, half_length } => gn(cli, *p, *m, *n, *half_length),
        Command::Verify { input, lambda, m } => verify(cli, input, *lambda, *m),
    }
}

/// Parses `lo:hi:n`.
pub fn parse_range(text: &str) -> Result<(f64, f64, usize), Failure> {
    let bad = || Failure::Config(format!("range must look like lo:hi:n, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 2) {
        return Err(Failure::Config(format!("range needs 0 < lo < hi and n >= 2, got {text:?}")));
    }
    Ok((lo, hi, n))
}

fn branch_config(cli: &Cli) -> BranchConfig {
    let mut cfg = BranchConfig::default();
    if let Some(t) = cli.tol {
        cfg.quad = cfg.quad.with_rel_tol(t);
    }
    cfg
}

fn sink(cli: &Cli) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cli.out {
        Some(p) => Box::new(
            File::create(p).map_err(|e| Failure::Config(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> Result<(), Failure> {
    let mut out = sink(cli)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit_rows(cli: &Cli, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut out = sink(cli)?;
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        writeln!(out, "{}", r.join(","))?;
    }
    Ok(())
}

fn branch(cli: &Cli, range: &str) -> Result<(), Failure> {
    let model = cli.require_model()?;
    let (lo, hi, n) = parse_range(range)?;
    let curve = trace_branch(&model, lo, hi, n, &branch_config(cli))?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => io::write_branch_csv(sink(cli)?, &curve)?,
        Format::Json => emit_json(cli, &curve)?,
    }
    if curve.degenerate.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = curve.degenerate.iter().map(|d| format!("{} (zero {})", d.lambda, d.zero)).collect();
    Err(Failure::Math(format!("degenerate zero of W_lambda at lambda = {}", list.join(", "))))
}

fn solve(cli: &Cli, rho: f64, range: &str) -> Result<(), Failure> {
    let model = cli.require_model()?;
    let (lo, hi, n) = parse_range(range)?;
    let solution = solve_mass(&model, rho, lo, hi, n, &branch_config(cli))?;
    match (solution, cli.format.unwrap_or(Format::Json)) {
        (MassSolution::Roots(roots), Format::Json) => emit_json(cli, &json!({ "solutions": roots })),
        (MassSolution::Roots(roots), Format::Csv) => {
            let rows: Vec<Vec<String>> =
                roots.iter().map(|r| vec![fmt_real(r.lambda), fmt_real(r.rho_lambda), fmt_real(r.residual)]).collect();
            emit_rows(cli, &["lambda", "rho_lambda", "residual"], &rows)
        }
        (MassSolution::FlatCurve { rho_min, rho_max }, Format::Json) => {
            emit_json(cli, &json!({ "solutions": [], "flat_curve": { "rho_min": rho_min, "rho_max": rho_max } }))
        }
        (MassSolution::FlatCurve { rho_min, rho_max }, Format::Csv) => {
            emit_rows(cli, &["rho_min", "rho_max"], &[vec![fmt_real(rho_min), fmt_real(rho_max)]])?;
            eprintln!("normsol: rho_lambda is constant on the sampled range; every lambda in range is a solution");
            Ok(())
        }
    }
}

fn profile(cli: &Cli, lambda: f64, nodes: usize, x_max: f64) -> Result<(), Failure> {
    let model = cli.require_model()?;
    let p = reconstruct_profile(&model, lambda, nodes, x_max, &branch_config(cli))?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => io::write_profile_csv(sink(cli)?, &p)?,
        Format::Json => emit_json(cli, &p)?,
    }
    Ok(())
}

fn window(cli: &Cli) -> Result<(), Failure> {
    let model = cli.require_model()?;
    let mut cfg = WindowConfig::default();
    if let Some(t) = cli.tol {
        cfg.quad = cfg.quad.with_rel_tol(t);
        cfg.limits.quad = cfg.limits.quad.with_rel_tol(t);
    }
    let w = existence_window(&model, &cfg)?;
    for warning in &w.warnings {
        eprintln!("normsol: warning: {warning}");
    }
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cli, &w),
        Format::Csv => {
            let rows: Vec<Vec<String>> = w
                .cases
                .iter()
                .zip(&w.windows)
                .map(|(c, i)| vec![format!("\"{}\"", c.label()), fmt_real(i.lo.value()), fmt_real(i.hi.value())])
                .collect();
            emit_rows(cli, &["case", "lo", "hi"], &rows)
        }
    }
}

#[derive(Serialize)]
struct MinimizeSummary<'a> {
    regime: &'static str,
    m: u32,
    n: usize,
    half_length: f64,
    energy: f64,
    lambda: f64,
    mass: f64,
    rho: f64,
    m_residual: f64,
    pohozaev_residual: f64,
    nehari_residual: f64,
    stationarity_residual: f64,
    iterations: usize,
    enlargements: usize,
    converged: bool,
    notes: &'a [String],
}

fn minimize(cli: &Cli, a: &MinimizeArgs) -> Result<(), Failure> {
    let model = cli.require_model()?;
    let mut opts = MinimizeOptions {
        n: a.n,
        half_length: a.half_length,
        max_iter: a.max_iter,
        gn_c: a.gn_c,
        check_conditions: !a.skip_checks,
        ..MinimizeOptions::default()
    };
    if let Some(t) = cli.tol {
        opts.residual_tol = t;
    }
    let outcome = match a.regime {
        Regime::Sub => minimize_on_d(&model, a.m, a.rho, &opts),
        Regime::Super => minimize_on_dm(&model, a.m, a.rho, &opts),
    };
    let (report, failure) = match outcome {
        Ok(r) => (r, None),
        Err(VariationalError::NotConverged(r)) => {
            let f = Failure::from(VariationalError::NotConverged(r.clone()));
            (*r, Some(f))
        }
        Err(e) => return Err(e.into()),
    };
    write_minimization(cli, a.regime, &report)?;
    failure.map_or(Ok(()), Err)
}

fn write_minimization(cli: &Cli, regime: Regime, r: &MinimizationReport) -> Result<(), Failure> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Csv => Ok(io::write_field_csv(sink(cli)?, &r.field)?),
        Format::Json => emit_json(
            cli,
            &MinimizeSummary {
                regime: match regime {
                    Regime::Sub => "sub",
                    Regime::Super => "super",
                },
                m: r.field.m,
                n: r.field.n(),
                half_length: r.field.half_length,
                energy: r.energy,
                lambda: r.lambda,
                mass: r.mass,
                rho: r.rho,
                m_residual: r.m_residual,
                pohozaev_residual: r.pohozaev_residual,
                nehari_residual: r.nehari_residual,
                stationarity_residual: r.stationarity_residual,
                iterations: r.iterations,
                enlargements: r.enlargements,
                converged: r.converged,
                notes: &r.notes,
            },
        ),
    }
}

fn gn(cli: &Cli, p: f64, m: u32, n: usize, half_length: f64) -> Result<(), Failure> {
    let mut opts = GnOptions { n, half_length, ..GnOptions::default() };
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    let (estimate, failure) = match gn_constant(p, m, &opts) {
        Ok(e) => (e, None),
        Err(VariationalError::GnNotConverged(e)) => {
            let msg = format!("ascent did not converge after {} iterations", e.iterations);
            (*e, Some(Failure::Math(msg)))
        }
        Err(e) => return Err(e.into()),
    };
    write_gn(cli, &estimate)?;
    failure.map_or(Ok(()), Err)
}

fn write_gn(cli: &Cli, e: &GNEstimate) -> Result<(), Failure> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Csv => Ok(io::write_field_csv(sink(cli)?, &e.maximizer)?),
        Format::Json => emit_json(
            cli,
            &json!({
                "p": e.p,
                "m": e.m,
                "delta_p": e.delta_p,
                "c_p_pth_power": e.c_p_pth_power,
                "seed_quotient": e.seed_quotient,
                "iterations": e.iterations,
                "converged": e.converged,
                "n": e.maximizer.n(),
                "half_length": e.maximizer.half_length,
            }),
        ),
    }
}

fn verify(cli: &Cli, input: &std::path::Path, lambda: f64, m: u32) -> Result<(), Failure> {
    let model = cli.require_model()?;
    if !(lambda.is_finite()) || m == 0 {
        return Err(Failure::Config("lambda must be finite and m positive".into()));
    }
    let open = || File::open(input).map_err(|e| Failure::Config(format!("cannot read {}: {e}", input.display())));
    let mut header = String::new();
    BufReader::new(open()?).read_line(&mut header)?;
    let columns: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let report = match columns.as_slice() {
        ["x", "u", "du_dx", ..] => {
            if m != 1 {
                return Err(Failure::Config("profiles come from the m = 1 branch; pass --m 1".into()));
            }
            let p = io::read_profile_csv(open()?, lambda)?;
            identity_report(Sample::Profile(&p), &model, lambda, m)?
        }
        ["x", "u"] => {
            let f = io::read_field_csv(open()?, m)?;
            identity_report(Sample::Field(&f), &model, lambda, m)?
        }
        _ => return Err(Failure::Config(format!("unrecognized CSV header {:?}", header.trim()))),
    };
    write_identity(cli, &report)?;
    let tol = cli.tol.unwrap_or(1e-6);
    let worst = report.nehari_rel.max(report.pohozaev_rel).max(report.equipartition_sup.unwrap_or(0.0));
    if worst > tol {
        return Err(Failure::Math(format!("largest residual {worst:e} exceeds {tol:e}")));
    }
    Ok(())
}

fn write_identity(cli: &Cli, r: &IdentityReport) -> Result<(), Failure> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cli, r),
        Format::Csv => {
            let eq = r.equipartition_sup.map(fmt_real).unwrap_or_default();
            emit_rows(
                cli,
                &["nehari_rel", "pohozaev_rel", "equipartition_sup", "mass_K", "lambda", "m"],
                &[vec![fmt_real(r.nehari_rel), fmt_real(r.pohozaev_rel), eq, fmt_real(r.mass_k), fmt_real(r.lambda), r.m.to_string()]],
            )
        }
    }
}
