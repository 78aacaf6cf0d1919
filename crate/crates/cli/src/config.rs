use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, CommandFactory, Parser, ValueEnum};
use damopt_core::{
    ControlErrorReference, LoadRule, MassMode, MaxVariant, OptimizerConfig, QuadratureConfig,
    RefineMode, SolverConfig, Stepper,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandName {
    Solve,
    EocState,
    Optimize,
    EocControl,
    Gradcheck,
    ResidualCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    RefineTime,
    RefineSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MassArg {
    Consistent,
    Lumped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Exact,
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepperArg {
    FixedPoint,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoadArg {
    Interpolated,
    SlabAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Analytic,
    Projected,
}

/// Command line. Every long flag `--a-b` doubles as the config-file key `a_b`.
#[derive(Debug, Parser)]
#[command(name = "damopt", version, about = "Solver, optimizer and convergence benchmarks for a viscous damage model", args_override_self = true)]
struct Args {
    /// What to run.
    #[arg(value_enum)]
    command: Option<CommandName>,

    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Manufactured case, 1 or 2.
    #[arg(long)]
    case: Option<u32>,
    /// Number of time slabs.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Number of spatial elements.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Time slab counts of a temporal study, comma separated.
    #[arg(long = "M-list", value_delimiter = ',', action = ArgAction::Set, num_args = 1)]
    m_list: Option<Vec<usize>>,
    /// Element counts of a spatial study, comma separated.
    #[arg(long = "N-list", value_delimiter = ',', action = ArgAction::Set, num_args = 1)]
    n_list: Option<Vec<usize>>,
    /// Refinement direction of an EOC study; inferred from the list given if omitted.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    #[arg(long)]
    fp_tol: Option<f64>,
    #[arg(long)]
    fp_maxit: Option<usize>,
    #[arg(long, value_enum)]
    mass_mode: Option<MassArg>,
    /// Exact max or its C² regularization of width `eps` in the state solver.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Regularization width; used by the optimizer and by `variant = regularized`.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    stepper: Option<StepperArg>,
    #[arg(long, value_enum)]
    load: Option<LoadArg>,
    /// Refuse time steps with τβ/δ >= 2 before iterating.
    #[arg(long)]
    contraction_guard: Option<bool>,
    #[arg(long)]
    q_time: Option<usize>,
    #[arg(long)]
    q_space: Option<usize>,

    #[arg(long)]
    alpha_l: Option<f64>,
    #[arg(long)]
    armijo_c: Option<f64>,
    #[arg(long)]
    backtrack: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    grad_tol_abs: Option<f64>,
    #[arg(long)]
    grad_tol_rel: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    /// Constant initial control of the descent.
    #[arg(long)]
    l_init: Option<f64>,
    /// Compare recovered controls with the analytic optimum or its projection.
    #[arg(long, value_enum)]
    reference: Option<ReferenceArg>,

    /// Sample count of residual-check.
    #[arg(long)]
    samples: Option<usize>,
    /// Single-coefficient derivatives checked by gradcheck.
    #[arg(long)]
    dofs: Option<usize>,
    /// Random directions checked by gradcheck.
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pass threshold of gradcheck and residual-check.
    #[arg(long)]
    tol: Option<f64>,

    /// CSV destination; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Levels solved concurrently.
    #[arg(long)]
    width: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandName,
    pub case: Option<u32>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub m_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub mode: Option<ModeArg>,

    pub fp_tol: f64,
    pub fp_maxit: usize,
    pub mass_mode: MassArg,
    pub variant: VariantArg,
    pub eps: Option<f64>,
    pub stepper: StepperArg,
    pub load: LoadArg,
    pub contraction_guard: bool,
    pub q_time: usize,
    pub q_space: usize,

    pub alpha_l: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub s0: f64,
    pub grad_tol_abs: f64,
    pub grad_tol_rel: f64,
    pub maxit: usize,
    pub l_init: f64,
    pub reference: ReferenceArg,

    pub samples: usize,
    pub dofs: usize,
    pub directions: usize,
    pub fd_step: f64,
    pub seed: u64,
    pub tol: Option<f64>,

    pub output: Option<PathBuf>,
    pub width: usize,
}

/// Config-file keys, in the order `to_config_text` writes them.
pub fn known_keys() -> Vec<String> {
    std::iter::once("command".to_string())
        .chain(
            Args::command()
                .get_arguments()
                .filter_map(|a| a.get_long())
                .filter(|l| !matches!(*l, "config" | "help" | "version"))
                .map(|l| l.replace('-', "_")),
        )
        .collect()
}

/// Splits flat `key = value` text into pairs. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let keys = known_keys();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !keys.iter().any(|known| known == k) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Parses argv (program name first). A `--config` file is read and its
/// entries applied underneath the flags.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Args::try_parse_from(&argv)?;
    let text = match &first.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?,
        ),
        None => None,
    };
    parse_with_text(&argv, text.as_deref())
}

/// Same as [`parse_config`] with the file contents passed in directly.
pub fn parse_with_text(argv: &[OsString], file: Option<&str>) -> Result<RunConfig, CliError> {
    let mut file_command = None;
    let mut spliced: Vec<OsString> = argv.iter().take(1).cloned().collect();
    if let Some(text) = file {
        for (k, v) in parse_config_text(text)? {
            if k == "command" {
                let c = CommandName::from_str(&v, false)
                    .map_err(|_| CliError::Usage(format!("config key `command`: unknown command `{v}`")))?;
                file_command = Some(c);
            } else {
                spliced.push(format!("--{}={v}", k.replace('_', "-")).into());
            }
        }
    }
    spliced.extend(argv.iter().skip(1).cloned());
    let args = Args::try_parse_from(&spliced)?;
    resolve(args, file_command)
}

fn resolve(a: Args, file_command: Option<CommandName>) -> Result<RunConfig, CliError> {
    let command = a
        .command
        .or(file_command)
        .ok_or_else(|| CliError::Usage("missing command (solve, eoc-state, optimize, eoc-control, gradcheck, residual-check)".into()))?;
    let solver = SolverConfig::default();
    let opt = OptimizerConfig::default();
    let width = a
        .width
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = RunConfig {
        command,
        case: a.case,
        m: a.m,
        n: a.n,
        m_list: a.m_list.unwrap_or_default(),
        n_list: a.n_list.unwrap_or_default(),
        mode: a.mode,
        fp_tol: a.fp_tol.unwrap_or(solver.fp_tol),
        fp_maxit: a.fp_maxit.unwrap_or(solver.fp_maxit),
        mass_mode: a.mass_mode.unwrap_or(MassArg::Consistent),
        variant: a.variant.unwrap_or(VariantArg::Exact),
        eps: a.eps,
        stepper: a.stepper.unwrap_or(StepperArg::FixedPoint),
        load: a.load.unwrap_or(LoadArg::Interpolated),
        contraction_guard: a.contraction_guard.unwrap_or(solver.contraction_guard),
        q_time: a.q_time.unwrap_or(solver.quad.q_time),
        q_space: a.q_space.unwrap_or(solver.quad.q_space),
        alpha_l: a.alpha_l.unwrap_or(opt.alpha_l),
        armijo_c: a.armijo_c.unwrap_or(opt.armijo_c),
        backtrack: a.backtrack.unwrap_or(opt.backtrack),
        s0: a.s0.unwrap_or(opt.s0),
        grad_tol_abs: a.grad_tol_abs.unwrap_or(opt.grad_tol_abs),
        grad_tol_rel: a.grad_tol_rel.unwrap_or(opt.grad_tol_rel),
        maxit: a.maxit.unwrap_or(opt.maxit),
        l_init: a.l_init.unwrap_or(0.0),
        reference: a.reference.unwrap_or(ReferenceArg::Analytic),
        samples: a.samples.unwrap_or(10_000),
        dofs: a.dofs.unwrap_or(20),
        directions: a.directions.unwrap_or(10),
        fd_step: a.fd_step.unwrap_or(1e-5),
        seed: a.seed.unwrap_or(2024),
        tol: a.tol,
        output: a.output,
        width,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks the configuration against the solver, optimizer and mesh rules.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        self.solver_config()?.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.optimizer_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.width == 0 {
            return usage("width must be >= 1".into());
        }
        if self.m_list.iter().chain(&self.n_list).chain(&self.m).chain(&self.n).any(|&k| k == 0) {
            return usage("mesh sizes must be >= 1".into());
        }
        if self.command != CommandName::Gradcheck {
            match self.case {
                None => return usage("missing required --case".into()),
                Some(1 | 2) => {}
                Some(c) => return usage(format!("--case must be 1 or 2, got {c}")),
            }
        }
        match self.command {
            CommandName::Solve | CommandName::Optimize => {
                if self.m.is_none() || self.n.is_none() {
                    return usage(format!("{} needs --M and --N", self.command_name()));
                }
            }
            CommandName::EocState | CommandName::EocControl => {
                self.levels()?;
            }
            CommandName::Gradcheck | CommandName::ResidualCheck => {}
        }
        Ok(())
    }

    pub fn command_name(&self) -> String {
        name_of(self.command)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let variant = match self.variant {
            VariantArg::Exact => MaxVariant::Exact,
            VariantArg::Regularized => MaxVariant::Regularized(self.eps.ok_or_else(|| {
                CliError::Usage("variant = regularized needs --eps".into())
            })?),
        };
        Ok(SolverConfig {
            fp_tol: self.fp_tol,
            fp_maxit: self.fp_maxit,
            mass_mode: match self.mass_mode {
                MassArg::Consistent => MassMode::Consistent,
                MassArg::Lumped => MassMode::Lumped,
            },
            variant,
            stepper: match self.stepper {
                StepperArg::FixedPoint => Stepper::FixedPoint,
                StepperArg::ClosedForm => Stepper::ClosedForm,
            },
            quad: QuadratureConfig {
                q_time: self.q_time,
                q_space: self.q_space,
            },
            load: match self.load {
                LoadArg::Interpolated => LoadRule::Interpolated,
                LoadArg::SlabAverage => LoadRule::SlabAverage,
            },
            contraction_guard: self.contraction_guard,
        })
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let d = OptimizerConfig::default();
        OptimizerConfig {
            alpha_l: self.alpha_l,
            epsilon: self.eps.unwrap_or(d.epsilon),
            armijo_c: self.armijo_c,
            backtrack: self.backtrack,
            s0: self.s0,
            grad_tol_abs: self.grad_tol_abs,
            grad_tol_rel: self.grad_tol_rel,
            maxit: self.maxit,
        }
    }

    pub fn error_reference(&self) -> ControlErrorReference {
        match self.reference {
            ReferenceArg::Analytic => ControlErrorReference::Analytic,
            ReferenceArg::Projected => ControlErrorReference::Projected,
        }
    }

    /// Refinement direction and (M, N) pairs of an EOC study.
    pub fn levels(&self) -> Result<(RefineMode, Vec<(usize, usize)>), CliError> {
        let mode = match (self.mode, self.m_list.is_empty(), self.n_list.is_empty()) {
            (Some(m), _, _) => m,
            (None, false, true) => ModeArg::RefineTime,
            (None, true, false) => ModeArg::RefineSpace,
            _ => return Err(CliError::Usage("give --mode, or exactly one of --M-list and --N-list".into())),
        };
        let pairs = match mode {
            ModeArg::RefineSpace => {
                let m = self.m.ok_or_else(|| CliError::Usage("refine-space needs --M".into()))?;
                if self.n_list.is_empty() {
                    return Err(CliError::Usage("refine-space needs --N-list".into()));
                }
                self.n_list.iter().map(|&n| (m, n)).collect()
            }
            ModeArg::RefineTime => {
                let n = self.n.ok_or_else(|| CliError::Usage("refine-time needs --N".into()))?;
                if self.m_list.is_empty() {
                    return Err(CliError::Usage("refine-time needs --M-list".into()));
                }
                self.m_list.iter().map(|&m| (m, n)).collect()
            }
        };
        let mode = match mode {
            ModeArg::RefineTime => RefineMode::Time,
            ModeArg::RefineSpace => RefineMode::Space,
        };
        Ok((mode, pairs))
    }

    /// Every set field as `key = value` lines; parsing the text back gives `self`.
    pub fn to_config_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        let mut kv: Vec<(&str, String)> = vec![("command", self.command_name())];
        let opt = |k: &'static str, v: Option<String>, kv: &mut Vec<(&str, String)>| {
            if let Some(v) = v {
                kv.push((k, v));
            }
        };
        opt("case", self.case.map(|c| c.to_string()), &mut kv);
        opt("M", self.m.map(|c| c.to_string()), &mut kv);
        opt("N", self.n.map(|c| c.to_string()), &mut kv);
        opt("M_list", (!self.m_list.is_empty()).then(|| join(&self.m_list)), &mut kv);
        opt("N_list", (!self.n_list.is_empty()).then(|| join(&self.n_list)), &mut kv);
        opt("mode", self.mode.map(name_of), &mut kv);
        kv.push(("fp_tol", format!("{:e}", self.fp_tol)));
        kv.push(("fp_maxit", self.fp_maxit.to_string()));
        kv.push(("mass_mode", name_of(self.mass_mode)));
        kv.push(("variant", name_of(self.variant)));
        opt("eps", self.eps.map(|e| format!("{e:e}")), &mut kv);
        kv.push(("stepper", name_of(self.stepper)));
        kv.push(("load", name_of(self.load)));
        kv.push(("contraction_guard", self.contraction_guard.to_string()));
        kv.push(("q_time", self.q_time.to_string()));
        kv.push(("q_space", self.q_space.to_string()));
        kv.push(("alpha_l", format!("{:e}", self.alpha_l)));
        kv.push(("armijo_c", format!("{:e}", self.armijo_c)));
        kv.push(("backtrack", format!("{:e}", self.backtrack)));
        kv.push(("s0", format!("{:e}", self.s0)));
        kv.push(("grad_tol_abs", format!("{:e}", self.grad_tol_abs)));
        kv.push(("grad_tol_rel", format!("{:e}", self.grad_tol_rel)));
        kv.push(("maxit", self.maxit.to_string()));
        kv.push(("l_init", format!("{:e}", self.l_init)));
        kv.push(("reference", name_of(self.reference)));
        kv.push(("samples", self.samples.to_string()));
        kv.push(("dofs", self.dofs.to_string()));
        kv.push(("directions", self.directions.to_string()));
        kv.push(("fd_step", format!("{:e}", self.fd_step)));
        kv.push(("seed", self.seed.to_string()));
        opt("tol", self.tol.map(|e| format!("{e:e}")), &mut kv);
        opt("output", self.output.as_deref().map(path_text), &mut kv);
        kv.push(("width", self.width.to_string()));
        kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn name_of<E: ValueEnum>(v: E) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn path_text(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
