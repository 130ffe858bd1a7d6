//! Command-line interface. Exit status: 0 on success, 1 on I/O failure,
//! 2 on contract violations and usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use orbitfit_core::mesh::io::save_ply;
use orbitfit_core::mesh::{load_mesh, Transform};
use orbitfit_core::plate::ranking_json;
use orbitfit_core::registration::{reconstruct_orbit, ReconstructionMethod};
use orbitfit_core::{MirrorPlane, Point3, Polyline, Vector3};

use crate::case::{Case, MANIFEST_FILE, STATE_FILE};
use crate::config::Config;
use crate::error::{Result, SessionError};
use crate::events::{read_events, Action};
use crate::json::{read_json, to_exact_pretty, write_text};
use crate::service::{serve, ServiceOptions};

#[derive(Debug, Parser)]
#[command(name = "orbitfit", version, about = "Orbital plate registration, fit metrics and ranking")]
pub struct Cli {
    /// Seed for ICP sampling and CPD subsampling (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with [icp], [cpd], [fit] and [heatmap] parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (export root, or reconstruction output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Name recorded in the event log.
    #[arg(long, global = true, default_value = "cli")]
    pub actor: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the bundled synthetic case into a directory.
    Sample { dir: PathBuf },
    /// Mirror a skull across the midsagittal plane and register the reflection onto it.
    Reconstruct(ReconstructArgs),
    /// Landmark initialization followed by posterior-stop alignment, for each plate.
    Register {
        case: PathBuf,
        /// Restrict to these plates (default: all).
        #[arg(long = "plate")]
        plates: Vec<String>,
    },
    /// Compute fit reports for every plate and export the fit-metrics tree.
    Fit { case: PathBuf },
    /// Print the ranking document for the current placements.
    Rank { case: PathBuf },
    /// Run the HTTP service for a case.
    Serve(ServeArgs),
    /// Re-execute the event log from the initial case state.
    Replay(ReplayArgs),
    /// Apply one placement operation to a case.
    Place {
        case: PathBuf,
        plate: String,
        #[command(subcommand)]
        op: PlaceOp,
    },
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Skull mesh (STL or PLY).
    pub skull: PathBuf,
    #[arg(long, value_enum, default_value = "rigid")]
    pub method: MethodArg,
    /// Point on the mirror plane, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    pub plane_point: [f64; 3],
    /// Mirror plane normal, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, default_value = "1,0,0", allow_hyphen_values = true)]
    pub plane_normal: [f64; 3],
    /// Intact-region mask: one 0 or 1 per skull vertex, one per line.
    #[arg(long)]
    pub roi: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Rigid,
    Affine,
    Cpd,
}

impl From<MethodArg> for ReconstructionMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rigid => ReconstructionMethod::Rigid,
            MethodArg::Affine => ReconstructionMethod::Affine,
            MethodArg::Cpd => ReconstructionMethod::Cpd,
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub case: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Serve viewer assets from this directory instead of the bundled page.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Reject transforms that move the stop point of a pivoted plate by more than 1e-6 mm.
    #[arg(long)]
    pub pivot_lock: bool,
    /// Keep mutations in memory only.
    #[arg(long)]
    pub no_persist: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub case: PathBuf,
    /// Event log to replay (default: the case's own log).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Only verify that replay reproduces the saved placements.
    #[arg(long)]
    pub check: bool,
    /// Also export fit outputs of the replayed state under this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PlaceOp {
    LandmarkInit,
    StopAlign,
    /// Rotate about the pivot.
    Rotate {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        axis: [f64; 3],
        /// Radians.
        #[arg(long, allow_hyphen_values = true)]
        angle: f64,
    },
    /// Small translation.
    Nudge {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        delta: [f64; 3],
        #[arg(long)]
        move_pivot: bool,
    },
    Reset,
    /// Set the full transform: 16 row-major values, comma separated.
    Set {
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        matrix: [[f64; 4]; 4],
    },
    /// Replace an edge curve with the polyline in a JSON file.
    Curve { name: String, file: PathBuf },
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_matrix(s: &str) -> std::result::Result<[[f64; 4]; 4], String> {
    let v = parse_floats::<16>(s)?;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| v[4 * i + j])))
}

fn read_roi(path: &Path) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| SessionError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(SessionError::manifest(path, format!("line {}: expected 0 or 1, got '{other}'", i + 1))),
        })
        .collect()
}

fn stdout_line(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| SessionError::io("<stdout>", e))
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    c.apply_seed(cli.seed);
    Ok(c)
}

fn export_case(case: &Case, config: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let reports = case.fit_all(&config.fit)?;
    for r in &reports {
        println!("{}: overall edge mean {:.6} mm. {}", r.plate_id, r.overall_edge_mean, r.collision.message());
    }
    case.export(&reports, config.heatmap, out)
}

fn run_command(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Sample { dir } => {
            let path = crate::sample::write_sample_case(dir)?;
            println!("wrote {}", path.display());
        }
        Command::Reconstruct(a) => {
            let skull = load_mesh(&a.skull, None)?;
            let plane = MirrorPlane::new(Point3::from(a.plane_point), Vector3::from(a.plane_normal))?;
            let roi = a.roi.as_deref().map(read_roi).transpose()?;
            let method = ReconstructionMethod::from(a.method);
            let result = reconstruct_orbit(&skull, &plane, roi.as_deref(), method, &config.icp, &config.cpd)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let mut record = result.record("mirror_to_skull");
            if let Some(field) = &result.deformation {
                let name = "deformation_field.txt";
                write_text(&out.join(name), &field.to_text())?;
                record.deformation_file = Some(name.into());
            }
            save_ply(&result.reconstructed_orbit, out.join("orbit_reconstructed.ply"))?;
            record.save(out.join("transform.json"))?;
            println!(
                "{}: residual rms {:.6} mm after {} ICP iterations",
                method, result.residual_rms, result.icp_iterations
            );
        }
        Command::Register { case, plates } => {
            let mut c = Case::open(case)?;
            let ids: Vec<String> = if plates.is_empty() {
                c.plates().iter().map(|p| p.id().to_string()).collect()
            } else {
                plates.clone()
            };
            for id in &ids {
                c.execute(&cli.actor, Action::LandmarkInit { plate_id: id.clone() })?;
                c.execute(&cli.actor, Action::StopAlign { plate_id: id.clone() })?;
                let rows = c.transform_of(id)?.to_rows();
                println!("{id}: {}", serde_json::to_string(&rows).expect("matrix serializes"));
            }
            c.save()?;
        }
        Command::Fit { case } => {
            let c = Case::open(case)?;
            let out = cli.out.clone().unwrap_or_else(|| case.clone());
            let files = export_case(&c, &config, &out)?;
            println!("wrote {} files under {}", files.len(), out.join(orbitfit_core::plate::FIT_METRICS_DIR).display());
        }
        Command::Rank { case } => {
            let c = Case::open(case)?;
            let reports = c.fit_all(&config.fit)?;
            stdout_line(&ranking_json(c.case_id(), &c.rank(&reports)?))?;
        }
        Command::Serve(a) => {
            let addr: SocketAddr = format!("{}:{}", a.host, a.port)
                .parse()
                .map_err(|e| SessionError::Conflict(format!("bad listen address: {e}")))?;
            let mut opts = ServiceOptions::new(cli.out.clone().unwrap_or_else(|| a.case.clone()));
            opts.config = config;
            opts.actor = cli.actor.clone();
            opts.persist = !a.no_persist;
            opts.pivot_lock = a.pivot_lock;
            opts.static_dir = a.static_dir.clone();
            let rt = tokio::runtime::Runtime::new().map_err(|e| SessionError::io(&a.case, e))?;
            rt.block_on(serve(&a.case, addr, opts))?;
        }
        Command::Replay(a) => {
            let events_path = a.events.clone().unwrap_or_else(|| a.case.join(crate::case::EVENTS_FILE));
            let events = read_events(&events_path)?;
            let replayed = Case::replay(&a.case.join(MANIFEST_FILE), &events)?;
            if a.check {
                let saved = Case::open(&a.case)?;
                if saved.placements() != replayed.placements() {
                    let bad: Vec<&String> = saved
                        .placements()
                        .iter()
                        .filter(|(id, p)| replayed.placement(id) != Some(*p))
                        .map(|(id, _)| id)
                        .collect();
                    return Err(SessionError::Conflict(format!(
                        "replay of {} events differs from {} for {bad:?}",
                        events.len(),
                        STATE_FILE
                    )));
                }
                println!("replay of {} events matches saved placements", events.len());
            } else {
                replayed.save()?;
                println!("replayed {} events", events.len());
            }
            if let Some(out) = &a.export {
                export_case(&replayed, &config, out)?;
            }
        }
        Command::Place { case, plate, op } => {
            let mut c = Case::open(case)?;
            let plate_id = plate.clone();
            let action = match op {
                PlaceOp::LandmarkInit => Action::LandmarkInit { plate_id },
                PlaceOp::StopAlign => Action::StopAlign { plate_id },
                PlaceOp::Rotate { axis, angle } => Action::PivotRotate { plate_id, axis: *axis, angle: *angle },
                PlaceOp::Nudge { delta, move_pivot } => Action::Nudge { plate_id, delta: *delta, move_pivot: *move_pivot },
                PlaceOp::Reset => Action::Reset { plate_id },
                PlaceOp::Set { matrix } => Action::SetTransform { plate_id, matrix: *matrix },
                PlaceOp::Curve { name, file } => {
                    let p: Polyline = read_json(file)?;
                    Action::UpdateCurve {
                        plate_id,
                        curve: name.clone(),
                        points: p.points().iter().map(|q| [q.x, q.y, q.z]).collect(),
                    }
                }
            };
            let seq = c.execute(&cli.actor, action)?.seq;
            c.save()?;
            let live = c.live_summary(plate, &config.fit)?;
            println!("seq {seq}: {}", live.collision.message());
            for (name, mean) in &live.curve_means {
                println!("  {name}: {mean:.6} mm");
            }
            if let Some(p) = c.placement(plate) {
                stdout_line(&to_exact_pretty(p.transform()))?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
