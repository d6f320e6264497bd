//! `willmore`: generate test surfaces, measure them, run the flow and verify
//! the stability inequalities over a family.
//!
//! Exit status: 0 on success or PASS, 2 when a verdict fails, 1 on error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use willmore_core::flow::{self, FlowConfig};
use willmore_core::harness::{
    self, deficit_experiment, dlm_experiment, ellipsoid_samples, ladder_samples, EmitFormat, ExperimentReport,
    FamilySpec,
};
use willmore_core::{
    fit_sphere, measure, perturbed_sphere, read_mesh, vertex_geometry, write_mesh, MeshFormat, PerturbationSpec,
    TriMesh,
};

#[derive(Parser)]
#[command(name = "willmore", version, about = "Discrete Willmore flow and stability diagnostics")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a perturbed sphere and a JSON sidecar with its spec and energy.
    Generate {
        #[arg(long)]
        lmax: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the functionals of a mesh.
    Measure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the flow.
    Flow {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON file with `FlowConfig` keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-step CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a sphere to the vertices.
    FitSphere {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run an experiment over a family and write its report.
    Verify {
        experiment: Experiment,
        /// JSON `FamilySpec`.
        #[arg(long)]
        family: PathBuf,
        /// Report path; CSV and SVG companions are written next to it.
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Stability,
    Limit,
    Dlm,
    Deficit,
}

fn format_of(path: &Path) -> MeshFormat {
    MeshFormat::from_path(path).unwrap_or(MeshFormat::Off)
}

fn load(path: &Path) -> Result<TriMesh> {
    read_mesh(path, format_of(path)).with_context(|| format!("reading {}", path.display()))
}

fn generate(spec: PerturbationSpec, out: &Path) -> Result<()> {
    let p = perturbed_sphere(&spec)?;
    write_mesh(&p.mesh, out, format_of(out)).with_context(|| format!("writing {}", out.display()))?;
    let sidecar = out.with_extension("json");
    let body = json!({
        "spec": spec,
        "tracefree_energy": p.tracefree_energy,
        "scale": p.scale,
        "vertices": p.mesh.num_vertices(),
        "faces": p.mesh.num_faces(),
    });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&body)? + "\n")
        .with_context(|| format!("writing {}", sidecar.display()))?;
    println!("wrote {} ({} vertices, E = {:.6e})", out.display(), p.mesh.num_vertices(), p.tracefree_energy);
    Ok(())
}

fn measure_cmd(input: &Path, as_json: bool) -> Result<()> {
    let mesh = load(input)?;
    let rec = measure(&mesh, &vertex_geometry(&mesh)?);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&rec)?);
        return Ok(());
    }
    let c = rec.barycenter;
    println!("vertices       {}", mesh.num_vertices());
    println!("area           {:.12}", rec.area);
    println!("barycenter     {:.12} {:.12} {:.12}", c[0], c[1], c[2]);
    println!("quad_moment    {:.12}", rec.quad_moment);
    println!("volume         {:.12}", rec.volume);
    println!("htot           {:.12}", rec.total_mean_curvature);
    println!("willmore       {:.12}", rec.willmore);
    println!("energy         {:.12e}", rec.tracefree_energy);
    println!("deficit        {:.12e}", rec.iso_deficit);
    match rec.dlm_ratio {
        Some(r) => println!("dlm_ratio      {r:.6}"),
        None => println!("dlm_ratio      undefined"),
    }
    println!("sup_tracefree  {:.6e}", rec.sup_tracefree);
    Ok(())
}

fn flow_cmd(input: &Path, config: Option<&Path>, trace: Option<&Path>, out: &Path) -> Result<()> {
    let mesh = load(input)?;
    let cfg: FlowConfig = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => FlowConfig::default(),
    };
    match flow::run(&mesh, &cfg) {
        Ok(outcome) => {
            if let Some(t) = trace {
                outcome.trace.save_csv(t)?;
            }
            write_mesh(&outcome.mesh, out, format_of(out))?;
            let last = outcome.trace.last().expect("initial state recorded");
            println!(
                "stopped ({:?}) after {} steps at t = {:.6e}: W = {:.10}, E = {:.6e}",
                outcome.stop, last.step, last.t, last.record.willmore, last.record.tracefree_energy
            );
            Ok(())
        }
        Err(failure) => {
            if let Some(t) = trace {
                failure.trace.save_csv(t)?;
            }
            Err(failure.into())
        }
    }
}

fn fit_cmd(input: &Path) -> Result<()> {
    let mesh = load(input)?;
    let fit = fit_sphere(&mesh, &vertex_geometry(&mesh)?)?;
    let c = fit.center;
    println!("center  {:.12} {:.12} {:.12}", c.x, c.y, c.z);
    println!("radius  {:.12}", fit.radius);
    println!("rms     {:.6e}", fit.rms);
    Ok(())
}

fn verify(experiment: Experiment, family: &Path, report_path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(family).with_context(|| format!("reading {}", family.display()))?;
    let fam: FamilySpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", family.display()))?;
    let report: ExperimentReport = match experiment {
        Experiment::Stability => harness::stability_experiment(&fam)?,
        Experiment::Limit => harness::limit_sphere_experiment(&fam)?,
        Experiment::Dlm => {
            let mut samples = ladder_samples(&fam, true)?;
            samples.extend(ellipsoid_samples(&fam.ellipsoid_deltas, fam.perturbation.level, true)?);
            let mut r = dlm_experiment(&samples, &fam.bounds)?;
            r.family = Some(fam.clone());
            r
        }
        Experiment::Deficit => {
            let mut r = deficit_experiment(&ladder_samples(&fam, false)?, &fam.bounds)?;
            r.family = Some(fam.clone());
            r
        }
    };
    let Some(stem) = report_path.file_stem().and_then(|s| s.to_str()) else {
        bail!("report path {} has no file name", report_path.display());
    };
    let dir = report_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let paths = harness::emit(&report, dir, stem, &[EmitFormat::Json, EmitFormat::Csv, EmitFormat::Svg])?;
    // `emit` names the JSON after the stem; honour a different extension if one was asked for.
    if paths[0] != report_path {
        std::fs::rename(&paths[0], report_path)?;
    }
    for v in &report.verdicts {
        println!("{} {}: {:.4e} (bound {})", if v.pass { "PASS" } else { "FAIL" }, v.name, v.value, v.bound);
    }
    info!("report written to {}", report_path.display());
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Generate { lmax, eps, seed, level, out } => {
            generate(PerturbationSpec { lmax, seed, amplitude: eps, coeffs: None, level }, &out).map(|_| true)
        }
        Command::Measure { input, json } => measure_cmd(&input, json).map(|_| true),
        Command::Flow { input, config, trace, out } => {
            flow_cmd(&input, config.as_deref(), trace.as_deref(), &out).map(|_| true)
        }
        Command::FitSphere { input } => fit_cmd(&input).map(|_| true),
        Command::Verify { experiment, family, report } => verify(experiment, &family, &report),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
