//! Command-line front end: scenario assembly from flags, sweeps, magic
//! condition searches and figure recipes.

pub mod recipes;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polartrap::magic::{double_magic, find_magic_angle, find_magic_field, DoubleMagicGrids, FieldSearch};
use polartrap::molecule::{parse_molecule_config, stark_energy_scale, MoleculeParams};
use polartrap::pendular::{pendular_c20, pendular_spectrum};
use polartrap::scenario::{Scenario, E_ALONG_X, E_ALONG_Z};

use recipes::{Figure, RecipeOptions, DEFAULT_STATES};
use sweep::{emit_csv, fmt_num, run_sweep, scenario_provenance, write_csv, Axis, Grid, SweepRequest, TIMESTAMP_KEY};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "polartrap", version, about = "Hyperfine levels, polarizabilities and magic trapping conditions of polar molecules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energies of the lowest states versus electric-field strength.
    Levels {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        e_min: f64,
        #[arg(long)]
        e_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_STATES)]
        states: usize,
    },
    /// Polarizabilities at one point or along one sweep.
    Alpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with_all = ["e_sweep", "intensity_sweep"])]
        theta_sweep: Option<Grid>,
        #[arg(long, conflicts_with = "intensity_sweep")]
        e_sweep: Option<Grid>,
        #[arg(long)]
        intensity_sweep: Option<Grid>,
        #[arg(long, default_value_t = DEFAULT_STATES)]
        states: usize,
    },
    /// Generic one-axis sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Axis,
        #[arg(long)]
        grid: Grid,
        #[arg(long, default_value_t = DEFAULT_STATES)]
        states: usize,
    },
    /// Rigid-rotor pendular levels and alignment.
    Pendular {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        e_sweep: Option<Grid>,
        #[arg(long, default_value_t = 1)]
        lambda_max: u32,
    },
    /// Polarization angle where the m = 0 manifolds share one polarizability.
    MagicAngle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "40:70", value_parser = parse_bracket)]
        bracket: (f64, f64),
    },
    /// Field strength where the m = 0 manifolds cross for every angle.
    MagicField {
        #[command(flatten)]
        common: Common,
        /// Angle between polarization and electric field, degrees.
        #[arg(long, default_value_t = 90.0)]
        psi: f64,
        #[arg(long, default_value = "3:8", value_parser = parse_bracket)]
        bracket: (f64, f64),
        /// Skip the n_max + 1 convergence check.
        #[arg(long)]
        no_convergence: bool,
        /// Points of a sign-change pre-scan over the bracket.
        #[arg(long, default_value_t = 0)]
        prescan: usize,
    },
    /// Magic field and magic angle together, with grid checks.
    DoubleMagic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_convergence: bool,
    },
    /// Regenerate the datasets of one figure.
    Figure {
        name: Figure,
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the point count of every grid.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_STATES)]
        states: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Molecule file; built-in NaK constants when omitted.
    #[arg(long)]
    molecule: Option<PathBuf>,
    #[arg(long, default_value_t = 8.57)]
    bz_mt: f64,
    /// Electric-field strength, kV/cm.
    #[arg(long, default_value_t = 0.0)]
    e: f64,
    /// x, z or `polar,azimuth` in degrees.
    #[arg(long, default_value = "x", value_parser = parse_direction)]
    e_dir: [f64; 3],
    /// Lab polarization angle from the magnetic field, degrees.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Trap intensity, kW/cm².
    #[arg(long, default_value_t = 2.35)]
    intensity: f64,
    #[arg(long, default_value_t = 1064.0)]
    wavelength_nm: f64,
    #[arg(long, default_value_t = 5)]
    nmax: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Drop nuclear spins (no hyperfine, no Zeeman).
    #[arg(long)]
    pure_rotor: bool,
}

fn parse_direction(s: &str) -> Result<[f64; 3], String> {
    match s {
        "x" => Ok(E_ALONG_X),
        "z" => Ok(E_ALONG_Z),
        _ => {
            let (p, a) = s.split_once(',').ok_or_else(|| format!("direction `{s}` is not x, z or polar,azimuth"))?;
            let polar: f64 = p.trim().parse().map_err(|_| format!("bad polar angle `{p}`"))?;
            let azimuth: f64 = a.trim().parse().map_err(|_| format!("bad azimuth `{a}`"))?;
            let (t, f) = (polar.to_radians(), azimuth.to_radians());
            Ok([t.sin() * f.cos(), t.sin() * f.sin(), t.cos()])
        }
    }
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("bracket `{s}` is not lo:hi"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad bracket end `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad bracket end `{b}`"))?;
    if !(lo < hi) {
        return Err(format!("bracket `{s}` needs lo < hi"));
    }
    Ok((lo, hi))
}

impl Common {
    fn scenario(&self) -> polartrap::Result<Scenario> {
        let molecule = match &self.molecule {
            Some(path) => parse_molecule_config(&std::fs::read_to_string(path)?)?,
            None => MoleculeParams::nak(),
        };
        let s = Scenario::new(molecule)
            .with_b(self.bz_mt)
            .with_e(self.e)
            .with_theta(self.theta)
            .with_intensity(self.intensity)
            .with_wavelength(self.wavelength_nm)
            .with_n_max(self.nmax)
            .with_pure_rotor(self.pure_rotor)
            .with_e_direction(self.e_dir)?;
        s.geometry.validate()?;
        Ok(s)
    }
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    // identical numbers regardless of worker count
    polartrap::spectrum::use_sequential_kernels();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Levels { .. } => "levels",
        Command::Alpha { .. } => "alpha",
        Command::Sweep { .. } => "sweep",
        Command::Pendular { .. } => "pendular",
        Command::MagicAngle { .. } => "magic-angle",
        Command::MagicField { .. } => "magic-field",
        Command::DoubleMagic { .. } => "double-magic",
        Command::Figure { .. } => "figure",
    }
}

fn emit_sweep(request: &SweepRequest, out: Option<&Path>, command: &str) -> polartrap::Result<()> {
    let result = run_sweep(request)?;
    let extra = vec![("command".to_string(), command.to_string())];
    match out {
        Some(path) => emit_csv(&result, path, &extra),
        None => write_csv(&result, &mut std::io::stdout().lock(), &extra),
    }
}

/// Key–value CSV for scalar results.
fn emit_report(scenario: &Scenario, command: &str, header: &str, rows: &[Vec<String>], out: Option<&Path>) -> polartrap::Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# polartrap {}", env!("CARGO_PKG_VERSION"))?;
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(buf, "# {TIMESTAMP_KEY}: {stamp}")?;
    writeln!(buf, "# command: {command}")?;
    for (k, v) in scenario_provenance(scenario) {
        writeln!(buf, "# {k}: {v}")?;
    }
    writeln!(buf, "{header}")?;
    for r in rows {
        writeln!(buf, "{}", r.join(","))?;
    }
    match out {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn execute(command: Command) -> polartrap::Result<i32> {
    let cmdline = command_name(&command).to_string();
    match command {
        Command::Levels { common, e_min, e_max, points, states } => {
            let request = SweepRequest {
                scenario: common.scenario()?,
                axis: Axis::Field,
                grid: Grid::new(e_min, e_max, points).values(),
                states,
                jobs: common.jobs,
            };
            emit_sweep(&request, common.out.as_deref(), &cmdline)?;
        }
        Command::Alpha { common, theta_sweep, e_sweep, intensity_sweep, states } => {
            let scenario = common.scenario()?;
            let (axis, grid) = match (theta_sweep, e_sweep, intensity_sweep) {
                (Some(g), _, _) => (Axis::Theta, g.values()),
                (_, Some(g), _) => (Axis::Field, g.values()),
                (_, _, Some(g)) => (Axis::Intensity, g.values()),
                _ => (Axis::Theta, vec![common.theta]),
            };
            let request = SweepRequest { scenario, axis, grid, states, jobs: common.jobs };
            emit_sweep(&request, common.out.as_deref(), &cmdline)?;
        }
        Command::Sweep { common, axis, grid, states } => {
            let request = SweepRequest { scenario: common.scenario()?, axis, grid: grid.values(), states, jobs: common.jobs };
            emit_sweep(&request, common.out.as_deref(), &cmdline)?;
        }
        Command::Pendular { common, e_sweep, lambda_max } => {
            let scenario = common.scenario()?;
            let mol = &scenario.molecule;
            let fields = e_sweep.map(|g| g.values()).unwrap_or_else(|| vec![common.e]);
            let mut rows = Vec::new();
            for e in fields {
                let de = stark_energy_scale(mol.dipole, e);
                for p in pendular_spectrum(common.nmax, mol.b_rot, de)? {
                    if p.lambda <= lambda_max {
                        rows.push(vec![
                            fmt_num(e),
                            fmt_num(de / mol.b_rot),
                            p.lambda.to_string(),
                            p.m.to_string(),
                            fmt_num(p.energy),
                            fmt_num(p.reduced_energy(mol.b_rot)),
                            fmt_num(pendular_c20(&p)),
                        ]);
                    }
                }
            }
            emit_report(
                &scenario,
                &cmdline,
                "e_kv_cm,omega,lambda,m,energy_mhz,reduced_energy,c20",
                &rows,
                common.out.as_deref(),
            )?;
        }
        Command::MagicAngle { common, bracket } => {
            let scenario = common.scenario()?;
            let r = find_magic_angle(common.e, &scenario, bracket)?;
            let theta = r.theta_deg.unwrap_or(f64::NAN);
            eprintln!(
                "magic angle at E = {} kV/cm: psi_m = {:.4} deg (theta = {:.4} deg), residual {:.3e} a.u., {} iterations",
                common.e, r.root, theta, r.residual, r.iterations
            );
            let rows = vec![vec![fmt_num(common.e), fmt_num(r.root), fmt_num(theta), fmt_num(r.residual), r.iterations.to_string()]];
            emit_report(&scenario, &cmdline, "e_kv_cm,psi_m_deg,theta_deg,residual_au,iterations", &rows, common.out.as_deref())?;
        }
        Command::MagicField { common, psi, bracket, no_convergence, prescan } => {
            let scenario = common.scenario()?;
            let search = FieldSearch { check_convergence: !no_convergence, prescan_points: prescan, ..FieldSearch::default() };
            let r = find_magic_field(psi, &scenario, bracket, &search)?;
            eprintln!(
                "magic field at psi_m = {psi} deg: E = {:.4} kV/cm (n_max {}), residual {:.3e} a.u., {} iterations",
                r.root, r.n_max, r.residual, r.iterations
            );
            if let Some(c) = r.convergence {
                eprintln!(
                    "n_max {} root {:.4} kV/cm, relative shift {:.2e}{}",
                    c.n_max,
                    c.root,
                    c.relative_shift,
                    if c.warning { " -- not converged, reporting the larger basis" } else { "" }
                );
            }
            let mut rows = Vec::new();
            for &(p, d) in &r.validation {
                eprintln!("  psi_m = {p:5.1} deg: delta alpha = {d:+.4} a.u.");
                rows.push(vec![fmt_num(r.root), fmt_num(p), fmt_num(d)]);
            }
            emit_report(&scenario, &cmdline, "e_kv_cm,psi_m_deg,delta_alpha_au", &rows, common.out.as_deref())?;
            let limit = scenario.tolerances.validation_residual;
            if !r.validated(limit) {
                eprintln!("error: delta alpha depends on psi_m at the root; not a magic field");
                return Ok(EXIT_FAILURE);
            }
        }
        Command::DoubleMagic { common, no_convergence } => {
            let scenario = common.scenario()?;
            let search = FieldSearch { check_convergence: !no_convergence, ..FieldSearch::default() };
            let d = double_magic(&scenario, &search, &DoubleMagicGrids::default())?;
            eprintln!("double magic: E* = {:.4} kV/cm, psi* = {:.4} deg", d.e_star(), d.psi_star());
            let mut rows = Vec::new();
            for &(p, v) in &d.psi_check {
                rows.push(vec!["psi_m_deg".to_string(), fmt_num(d.e_star()), fmt_num(p), fmt_num(v)]);
            }
            for &(e, v) in &d.field_check {
                rows.push(vec!["e_kv_cm".to_string(), fmt_num(e), fmt_num(d.psi_star()), fmt_num(v)]);
            }
            emit_report(&scenario, &cmdline, "check,e_kv_cm,psi_m_deg,delta_alpha_au", &rows, common.out.as_deref())?;
            if !d.violations.is_empty() {
                for v in &d.violations {
                    eprintln!("violation: {v}");
                }
                return Ok(EXIT_FAILURE);
            }
        }
        Command::Figure { name, common, out_dir, points, states } => {
            let base = common.scenario()?;
            let options = RecipeOptions { points, states, jobs: common.jobs };
            std::fs::create_dir_all(&out_dir)?;
            for panel in recipes::panels(name, &base, &options)? {
                let path = out_dir.join(format!("{}.csv", panel.name));
                let result = run_sweep(&panel.request)?;
                let extra = vec![("command".to_string(), cmdline.clone()), ("panel".to_string(), panel.description.clone())];
                emit_csv(&result, &path, &extra)?;
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(EXIT_OK)
}
