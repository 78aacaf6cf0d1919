use std::io::Write;

use damopt_core::benchmarks::{
    case_mesh, control_error, gradcheck, optimize_case, solve_case, state_errors, TableKind,
};
use damopt_core::{
    residual_check, run_control_eoc, run_state_eoc, ConvergenceTable, DofKind, Level,
    ManufacturedCase, SpaceTimeField,
};
use log::{info, warn};

use crate::config::{CommandName, RunConfig};
use crate::{emit_csv, CliError};

/// Executes one configured run. Tables go to `--output` as CSV (or to
/// standard output), progress goes to the log.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    match cfg.command {
        CommandName::Solve => solve(cfg),
        CommandName::EocState => eoc_state(cfg),
        CommandName::Optimize => optimize(cfg),
        CommandName::EocControl => eoc_control(cfg),
        CommandName::Gradcheck => grad(cfg),
        CommandName::ResidualCheck => residuals(cfg),
    }
}

fn case_of(cfg: &RunConfig) -> Result<ManufacturedCase, CliError> {
    cfg.case
        .and_then(ManufacturedCase::by_number)
        .ok_or_else(|| CliError::Usage("missing required --case".into()))
}

fn single_level(cfg: &RunConfig) -> Result<Level, CliError> {
    match (cfg.m, cfg.n) {
        (Some(m), Some(n)) => Ok(Level::new(m, n)),
        _ => Err(CliError::Usage(format!("{} needs --M and --N", cfg.command_name()))),
    }
}

fn write_table(cfg: &RunConfig, table: &ConvergenceTable) -> Result<(), CliError> {
    match &cfg.output {
        Some(p) => {
            emit_csv(table, p)?;
            eprint!("{}", table.to_text());
            info!("wrote {}", p.display());
        }
        None => std::io::stdout().write_all(table.to_csv().as_bytes())?,
    }
    Ok(())
}

/// A sweep fails as a whole only when no level converged.
fn check_sweep(table: &ConvergenceTable) -> Result<(), CliError> {
    if table.rows.iter().all(|r| r.errors.is_none()) {
        return Err(CliError::Solver(damopt_core::Error::NonConvergence {
            slab: 0,
            iterations: 0,
            increment: f64::NAN,
            margin: f64::NAN,
        }));
    }
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let case = case_of(cfg)?;
    let level = single_level(cfg)?;
    let solver = cfg.solver_config()?;
    let (_, fwd) = solve_case(&case, level, &solver)?;
    let (ep, ed) = state_errors(&case, &fwd, &solver);
    info!(
        "{} M={} N={}: {} Picard iterations in total, tau*beta/delta = {:.4}",
        case.label,
        level.m,
        level.n,
        fwd.fp_iterations.iter().sum::<usize>(),
        fwd.contraction_margin
    );
    let table = ConvergenceTable::new(
        TableKind::State,
        format!("{} states", case.label),
        false,
        vec![(level.tau(), level.h(), Some(vec![ep, ed]))],
    );
    write_table(cfg, &table)
}

fn eoc_state(cfg: &RunConfig) -> Result<(), CliError> {
    let case = case_of(cfg)?;
    let (mode, pairs) = cfg.levels()?;
    let levels: Vec<Level> = pairs.into_iter().map(|(m, n)| Level::new(m, n)).collect();
    let table = run_state_eoc(&case, mode, &levels, &cfg.solver_config()?, cfg.width)?;
    write_table(cfg, &table)?;
    check_sweep(&table)
}

fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let case = case_of(cfg)?;
    let level = single_level(cfg)?;
    let solver = cfg.solver_config()?;
    let opt = cfg.optimizer_config();
    let init = SpaceTimeField::from_fn(case_mesh(&case, level)?, DofKind::Free, |_, _| cfg.l_init);
    let (data, res) = optimize_case(&case, level, &solver, &opt, Some(&init))?;
    let last = res.history.last().expect("history holds the initial iterate");
    info!(
        "{} M={} N={}: J={:.6e}, |grad|={:.3e} after {} iterations",
        case.label,
        level.m,
        level.n,
        last.objective,
        last.grad_norm,
        res.history.len() - 1
    );
    if !res.converged {
        warn!("gradient tolerance not reached within {} iterations", opt.maxit);
    }
    let e = control_error(&case, &res.l, &data.l_ref, cfg.error_reference(), &solver)?;
    let table = ConvergenceTable::new(
        TableKind::Control,
        format!("{} controls", case.label),
        false,
        vec![(level.tau(), level.h(), Some(vec![e]))],
    );
    write_table(cfg, &table)
}

fn eoc_control(cfg: &RunConfig) -> Result<(), CliError> {
    let case = case_of(cfg)?;
    let (mode, pairs) = cfg.levels()?;
    let levels: Vec<Level> = pairs.into_iter().map(|(m, n)| Level::new(m, n)).collect();
    let table = run_control_eoc(
        &case,
        mode,
        &levels,
        &cfg.solver_config()?,
        &cfg.optimizer_config(),
        cfg.error_reference(),
        cfg.width,
    )?;
    write_table(cfg, &table)?;
    check_sweep(&table)
}

fn grad(cfg: &RunConfig) -> Result<(), CliError> {
    let m = cfg.m.unwrap_or(4);
    let n = cfg.n.unwrap_or(8);
    let eps = cfg.eps.unwrap_or(1e-3);
    let tol = cfg.tol.unwrap_or(1e-5);
    let r = gradcheck(m, n, eps, cfg.fd_step, cfg.dofs, cfg.directions, cfg.seed)?;
    println!(
        "gradcheck M={m} N={n} eps={eps:e}: max relative error {:.3e} ({} dofs {:.3e}, {} directions {:.3e})",
        r.max_rel(),
        r.dofs,
        r.max_rel_dof,
        r.directions,
        r.max_rel_direction
    );
    if r.max_rel() > tol {
        return Err(CliError::CheckFailed(format!("max relative error {:.3e} > {tol:e}", r.max_rel())));
    }
    Ok(())
}

fn residuals(cfg: &RunConfig) -> Result<(), CliError> {
    let case = case_of(cfg)?;
    let tol = cfg.tol.unwrap_or(1e-9);
    let worst = residual_check(&case, cfg.samples);
    println!("residual-check {}: max residual {worst:.3e} over {} samples", case.label, cfg.samples);
    if worst.is_nan() || worst >= tol {
        return Err(CliError::CheckFailed(format!("residual {worst:.3e} >= {tol:e}")));
    }
    Ok(())
}
