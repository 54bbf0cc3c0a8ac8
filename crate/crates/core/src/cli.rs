//! Command surface of the `hypinterp` binary.
//!
//! Exit codes: 0 success, 1 mathematical failure (the report carries the
//! witness), 2 I/O, usage or schema error.

use crate::conditions::{analyze, pick_matrix_psd, PickVerdict, SplitOutcome};
use crate::config::RunConfig;
use crate::dump::{verify_dump, write_dump};
use crate::error::{Error, Result};
use crate::gen;
use crate::instance::InterpolationInstance;
use crate::pipeline::{construct, Construction, ExitChecks};
use crate::report::{write_atomic, Report};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "hypinterp", version, about = "Interpolation in the unit ball of bounded analytic functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for report.json and dumps.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub max_generation: Option<u32>,
    #[arg(long, global = true)]
    pub t_samples: Option<u32>,
    /// Replaces the instance's ε.
    #[arg(long, global = true)]
    pub epsilon_override: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// `{i·2⁻ᵏ}` for `k ≤ K`.
    Column,
    /// Evenly spread `⌈2^{αg}⌉` box centers per generation.
    Lattice,
    /// Three mutually close points.
    Cluster,
    /// Two-window family on one annulus of a disc host.
    Witness,
    /// Every box center of one generation.
    Grid,
    /// Random spread points with compatible values.
    Sparse,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated instance.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        /// Column length, or the generation of a full grid.
        #[arg(long, default_value_t = 10)]
        k: u32,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        depth: u32,
        /// Annulus index (witness) or point count (sparse).
        #[arg(long, default_value_t = 6)]
        n: u32,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Judge the separation and density conditions.
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build the interpolating function and audit it.
    Construct {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pick-matrix feasibility.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-audit a dump written by `construct`.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// Directory holding f.csv and f.json.
        #[arg(long)]
        dump: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Io(_) | Error::Schema(_) => 2,
        _ => 1,
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = c.max_generation {
        cfg.max_generation = d;
    }
    if let Some(t) = c.t_samples {
        cfg.t_samples = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_instance(path: &Path, c: &Common) -> Result<InterpolationInstance> {
    let mut inst = InterpolationInstance::load(path)?;
    if let Some(e) = c.epsilon_override {
        inst.epsilon = e;
        inst.validate().map_err(|e| Error::Schema(e.to_string()))?;
    }
    Ok(inst)
}

fn emit(report: &Report, out_dir: Option<&Path>) -> Result<()> {
    let text = report.to_json();
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("report.json"), text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn failure_report(command: &str, cfg: &RunConfig, e: &Error) -> Report {
    let mut r = Report::new(command, cfg);
    r.exit_code = exit_code(e);
    r.message = Some(e.to_string());
    r
}

pub fn check_report(inst: &InterpolationInstance, cfg: &RunConfig) -> Result<Report> {
    let a = analyze(inst, cfg)?;
    let mut r = Report::new("check", cfg);
    r.verdicts.condition_a = Some(a.condition_a);
    r.verdicts.condition_b = Some(a.condition_b);
    let band = &a.density[0];
    r.constant("delta", a.separation.delta)
        .constant("largest_bipartite_threshold", a.largest_bipartite_threshold)
        .constant("alpha", band.fitted_alpha)
        .constant("m", band.fitted_m)
        .constant("carleson_intensity", a.carleson_intensity)
        .constant("compatibility_ratio", a.compatibility_ratio);
    let mut witness = serde_json::Map::new();
    if let SplitOutcome::OddCycle { cycle, is_triangle } = &a.split {
        witness.insert("odd_cycle".into(), json!({ "cycle": cycle, "is_triangle": is_triangle }));
    }
    if !a.condition_b {
        witness.insert("density".into(), serde_json::to_value(&band.witness)?);
    }
    if !witness.is_empty() {
        r.witness = Some(witness.into());
    }
    r.exit_code = if a.condition_a && a.condition_b { 0 } else { 1 };
    Ok(r)
}

pub fn oracle_report(inst: &InterpolationInstance, cfg: &RunConfig) -> Result<Report> {
    let p = pick_matrix_psd(inst, cfg.tol_eig)?;
    let mut r = Report::new("oracle", cfg);
    r.verdicts.pick = Some(p.verdict);
    r.constant("min_eigenvalue", p.min_eigenvalue);
    r.exit_code = if p.verdict == PickVerdict::Infeasible { 1 } else { 0 };
    Ok(r)
}

fn set_checks(r: &mut Report, c: &ExitChecks) {
    r.verdicts.nodes = Some(c.nodes_ok);
    r.verdicts.boundary = Some(c.boundary_ok);
    r.verdicts.dbar = Some(c.dbar_ok);
    r.constant("node_residual", c.node_residual)
        .constant("boundary_sup", c.boundary_sup)
        .constant("boundary_margin", c.boundary_margin)
        .constant("dbar_max", c.dbar_max);
    if !c.success() {
        r.witness = Some(json!({ "dbar_at": c.dbar_at }));
    }
    r.exit_code = if c.success() { 0 } else { 1 };
}

pub fn construct_report(c: &Construction, cfg: &RunConfig) -> Report {
    let mut r = Report::new("construct", cfg);
    let a = &c.analysis;
    r.verdicts.condition_a = Some(a.condition_a);
    r.verdicts.condition_b = Some(a.condition_b);
    r.constant("delta", a.separation.delta)
        .constant("alpha", a.density[0].fitted_alpha)
        .constant("m", a.density[0].fitted_m)
        .constant("compatibility_ratio", a.compatibility_ratio)
        .constant("epsilon", c.epsilon)
        .constant("c_pack", c.smooth.max_c_pack)
        .constant("c_chain", c.smooth.max_c_chain)
        .constant("tree_lipschitz", c.smooth.max_tree_lipschitz)
        .constant("patch_radius", c.smooth.patch_radius)
        .constant("a_max", c.abc.a_max)
        .constant("b_const", c.abc.b_const)
        .constant("c_const", c.abc.c_const)
        .constant("d_const", c.abc.d_const)
        .constant("s_const", c.correction.s_const)
        .constant("j_const", c.correction.j_const)
        .constant("carleson_f", c.correction.carleson_f)
        .constant("bmo_log_h", c.correction.bmo_log_h);
    if let Some(t) = &c.two_sequence {
        r.constant("w_star_max", t.w_star_max);
    }
    set_checks(&mut r, &c.checks);
    r
}

pub fn verify_report(checks: &ExitChecks, cfg: &RunConfig) -> Report {
    let mut r = Report::new("verify", cfg);
    set_checks(&mut r, checks);
    r
}

#[allow(clippy::too_many_arguments)]
fn gen_instance(kind: GenKind, k: u32, alpha: f64, depth: u32, n: u32, gamma: f64, epsilon: f64, cfg: &RunConfig) -> Result<InterpolationInstance> {
    match kind {
        GenKind::Column => gen::column(k, epsilon),
        GenKind::Lattice => gen::lattice(alpha, depth, epsilon, cfg),
        GenKind::Cluster => gen::cluster(epsilon),
        GenKind::Witness => gen::witness(n, gamma, epsilon),
        GenKind::Grid => gen::full_grid(k, epsilon),
        GenKind::Sparse => gen::sparse(n as usize, epsilon, cfg.seed, cfg),
    }
}

/// Runs one command and returns its exit code; reports go to stdout.
pub fn run(cli: Cli) -> i32 {
    let (name, common) = match &cli.command {
        Command::Gen { common, .. } => ("gen", common),
        Command::Check { common, .. } => ("check", common),
        Command::Construct { common, .. } => ("construct", common),
        Command::Oracle { common, .. } => ("oracle", common),
        Command::Verify { common, .. } => ("verify", common),
    };
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    let out_dir = common.out_dir.as_deref();
    let result: Result<Option<Report>> = (|| match &cli.command {
        Command::Gen {
            kind,
            k,
            alpha,
            depth,
            n,
            gamma,
            epsilon,
            out,
            ..
        } => {
            let inst = gen_instance(*kind, *k, *alpha, *depth, *n, *gamma, *epsilon, &cfg)?;
            match out {
                Some(p) => inst.save(p)?,
                None => print!("{}", inst.to_json()),
            }
            Ok(None)
        }
        Command::Check { instance, .. } => Ok(Some(check_report(&load_instance(instance, common)?, &cfg)?)),
        Command::Oracle { instance, .. } => Ok(Some(oracle_report(&load_instance(instance, common)?, &cfg)?)),
        Command::Construct { instance, .. } => {
            let inst = load_instance(instance, common)?;
            let c = construct(&inst, &cfg)?;
            if let Some(dir) = out_dir {
                write_dump(dir, &c, &cfg)?;
            }
            Ok(Some(construct_report(&c, &cfg)))
        }
        Command::Verify { instance, dump, .. } => {
            let inst = load_instance(instance, common)?;
            Ok(Some(verify_report(&verify_dump(dump, &inst, &cfg)?, &cfg)))
        }
    })();
    let report = match result {
        Ok(None) => return 0,
        Ok(Some(r)) => r,
        Err(e) => {
            eprintln!("{e}");
            if exit_code(&e) == 2 {
                return 2;
            }
            failure_report(name, &cfg, &e)
        }
    };
    if let Err(e) = emit(&report, out_dir) {
        eprintln!("{e}");
        return exit_code(&e);
    }
    report.exit_code
}
