//! One-parameter sweeps with adiabatic state following, and their CSV form.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use polartrap::scenario::Scenario;
use polartrap::spectrum::{track_subset, MLabel, Spectrum, StateLabel};
use polartrap::{Error, Result};

/// Swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Electric-field strength, kV/cm.
    Field,
    /// Lab polarization angle θ, degrees.
    Theta,
    /// Trap intensity, kW/cm².
    Intensity,
}

impl Axis {
    /// CSV column name, carrying the unit.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Field => "e_kv_cm",
            Axis::Theta => "theta_deg",
            Axis::Intensity => "intensity_kw_cm2",
        }
    }

    pub fn apply(self, scenario: &Scenario, value: f64) -> Scenario {
        let s = scenario.clone();
        match self {
            Axis::Field => s.with_e(value),
            Axis::Theta => s.with_theta(value),
            Axis::Intensity => s.with_intensity(value),
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        [Axis::Field, Axis::Theta, Axis::Intensity].into_iter().find(|a| a.column() == name)
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "e" | "field" => Ok(Axis::Field),
            "theta" => Ok(Axis::Theta),
            "intensity" => Ok(Axis::Intensity),
            other => Err(format!("unknown axis `{other}` (expected e, theta or intensity)")),
        }
    }
}

/// Inclusive uniform grid `start:stop:count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, count: usize) -> Self {
        Grid { start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| if k + 1 == n { self.stop } else { self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64 })
                .collect(),
        }
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("grid `{s}` is not start:stop:count"));
        };
        let start: f64 = a.trim().parse().map_err(|_| format!("bad grid start `{a}`"))?;
        let stop: f64 = b.trim().parse().map_err(|_| format!("bad grid stop `{b}`"))?;
        let count: usize = n.trim().parse().map_err(|_| format!("bad grid count `{n}`"))?;
        if !start.is_finite() || !stop.is_finite() {
            return Err(format!("grid `{s}` has non-finite endpoints"));
        }
        if count > 1 && start == stop {
            return Err(format!("grid `{s}` is not strictly monotone"));
        }
        Ok(Grid { start, stop, count })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRequest {
    pub scenario: Scenario,
    pub axis: Axis,
    pub grid: Vec<f64>,
    /// Number of lowest states (at the first grid point) followed.
    pub states: usize,
    /// Worker threads for point evaluation.
    pub jobs: usize,
}

/// One followed state at one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub axis: f64,
    /// Energy rank at the first grid point; constant along the sweep.
    pub state: usize,
    /// Energy rank at this grid point.
    pub rank: usize,
    pub energy_mhz: f64,
    pub lambda: u32,
    pub m: MLabel,
    pub fidelity: f64,
    pub confident: bool,
    pub alpha_au: f64,
    /// Squared overlap with the same state at the previous grid point.
    pub overlap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub states: usize,
    pub rows: Vec<Row>,
    /// `key: value` lines echoed into the CSV header.
    pub provenance: Vec<(String, String)>,
}

/// Lowest eigenstates kept from one grid point.
struct Point {
    spectrum: Spectrum,
    alpha_au: Vec<f64>,
    labels: Vec<StateLabel>,
}

fn evaluate_point(scenario: &Scenario, keep: usize) -> Result<Point> {
    let ev = scenario.evaluate()?;
    let spectrum = ev.spectrum.truncated(keep);
    let k = spectrum.len();
    Ok(Point {
        spectrum,
        alpha_au: ev.alpha_au[..k].to_vec(),
        labels: ev.labels[..k].to_vec(),
    })
}

/// Evaluates every grid point and follows the lowest `states` eigenstates
/// of the first point through the sweep.
///
/// Points are evaluated `jobs` at a time; following is an ordered pass over
/// the grid, so the result does not depend on `jobs`.
pub fn run_sweep(request: &SweepRequest) -> Result<SweepResult> {
    let grid = &request.grid;
    let ascending = grid.windows(2).all(|w| w[1] > w[0]);
    let descending = grid.windows(2).all(|w| w[1] < w[0]);
    if !(ascending || descending) {
        return Err(Error::OutOfRange("sweep grid must be strictly monotone".into()));
    }
    let dim = request.scenario.basis().len();
    let states = request.states.min(dim);
    // room for followed states to drift upwards in energy rank
    let keep = (2 * states).max(states + 36).min(dim);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(request.jobs.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;

    let mut rows = Vec::with_capacity(grid.len() * states);
    let mut current: Vec<usize> = (0..states).collect();
    let mut overlaps = vec![1.0; states];
    let mut previous: Option<Point> = None;
    for batch in grid.chunks(request.jobs.max(1)) {
        let points: Vec<Result<Point>> = pool.install(|| {
            use rayon::prelude::*;
            batch
                .par_iter()
                .map(|&v| evaluate_point(&request.axis.apply(&request.scenario, v), keep))
                .collect()
        });
        for (&value, point) in batch.iter().zip(points) {
            let point = point?;
            if let Some(prev) = &previous {
                let t = track_subset(&prev.spectrum, &point.spectrum, &current)?;
                current = t.mapping;
                overlaps = t.fidelity;
            }
            for (state, &rank) in current.iter().enumerate() {
                let label = point.labels[rank];
                rows.push(Row {
                    axis: value,
                    state,
                    rank,
                    energy_mhz: point.spectrum.eigenvalues[rank],
                    lambda: label.lambda,
                    m: label.m,
                    fidelity: label.fidelity,
                    confident: label.confident,
                    alpha_au: point.alpha_au[rank],
                    overlap: overlaps[state],
                });
            }
            previous = Some(point);
        }
    }
    Ok(SweepResult {
        axis: request.axis,
        grid: grid.clone(),
        states,
        rows,
        provenance: scenario_provenance(&request.scenario),
    })
}

/// Scenario echo for CSV headers.
pub fn scenario_provenance(s: &Scenario) -> Vec<(String, String)> {
    let g = &s.geometry;
    let mol = &s.molecule;
    let mut p = vec![
        ("molecule".into(), mol.name.clone()),
        ("b_rot_mhz".into(), format!("{}", mol.b_rot)),
        ("dipole_ea0".into(), format!("{}", mol.dipole)),
        ("spins".into(), format!("{} {}", mol.spin_a, mol.spin_b)),
        ("eqq_mhz".into(), format!("{} {}", mol.eqq_a, mol.eqq_b)),
        ("g_factors".into(), format!("{} {}", mol.g_a, mol.g_b)),
        ("b_mt".into(), format!("{}", g.b_mt)),
        ("b_direction".into(), format_vec(g.b_direction)),
        ("e_kv_cm".into(), format!("{}", g.e_kv_cm)),
        ("e_direction".into(), format_vec(g.e_direction)),
        ("theta_deg".into(), format!("{:.6}", s.theta_deg())),
        ("psi_m_deg".into(), format!("{:.6}", s.psi_m_deg())),
        ("polarization".into(), format_vec(g.polarization)),
        ("propagation".into(), format_vec(g.propagation)),
        ("intensity_kw_cm2".into(), format!("{}", g.intensity)),
        ("wavelength_nm".into(), format!("{}", g.wavelength_nm)),
        ("n_max".into(), format!("{}", s.n_max)),
        ("pure_rotor".into(), format!("{}", s.pure_rotor)),
        ("fidelity_threshold".into(), format!("{}", s.fidelity_threshold)),
    ];
    p.push((
        "units".into(),
        "energy h*MHz; alpha atomic units (e a0)^2/E_h; E kV/cm; B mT; intensity kW/cm^2; angles degrees".into(),
    ));
    p
}

fn format_vec(v: [f64; 3]) -> String {
    format!("{:.12} {:.12} {:.12}", v[0], v[1], v[2])
}

/// Twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

pub const TIMESTAMP_KEY: &str = "generated_unix";

pub const COLUMNS: [&str; 9] = ["state", "rank", "energy_mhz", "lambda", "m", "fidelity", "confident", "alpha_au", "track_overlap"];

/// Provenance comment block followed by the header and one line per row.
pub fn write_csv(result: &SweepResult, out: &mut impl Write, extra: &[(String, String)]) -> Result<()> {
    writeln!(out, "# polartrap {}", env!("CARGO_PKG_VERSION"))?;
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(out, "# {TIMESTAMP_KEY}: {stamp}")?;
    for (k, v) in extra.iter().chain(&result.provenance) {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "# axis: {}", result.axis.column())?;
    writeln!(out, "# grid_points: {}", result.grid.len())?;
    writeln!(out, "# followed_states: {}", result.states)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![result.axis.column()];
    header.extend(COLUMNS);
    w.write_record(&header).map_err(csv_error)?;
    for r in &result.rows {
        w.write_record([
            fmt_num(r.axis),
            r.state.to_string(),
            r.rank.to_string(),
            fmt_num(r.energy_mhz),
            r.lambda.to_string(),
            r.m.to_string(),
            fmt_num(r.fidelity),
            r.confident.to_string(),
            fmt_num(r.alpha_au),
            fmt_num(r.overlap),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path, extra: &[(String, String)]) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf, extra)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Validation(format!("csv: {other:?}")),
    }
}

fn parse_m(s: &str) -> Option<MLabel> {
    if s == "0" {
        return Some(MLabel::Zero);
    }
    s.strip_prefix("+-")?.parse().ok().map(MLabel::Pair)
}

/// Parses a sweep CSV back into its axis and rows.
pub fn read_csv(text: &str) -> Result<(Axis, Vec<Row>)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let axis = headers
        .get(0)
        .and_then(Axis::from_column)
        .ok_or_else(|| Error::Validation(format!("unknown axis column in header {headers:?}")))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let bad = |field: &str| Error::Validation(format!("row {}: bad `{field}`", line + 1));
        let num = |i: usize, field: &str| -> Result<f64> { record.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(field)) };
        let int = |i: usize, field: &str| -> Result<usize> { record.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(field)) };
        rows.push(Row {
            axis: num(0, "axis")?,
            state: int(1, "state")?,
            rank: int(2, "rank")?,
            energy_mhz: num(3, "energy_mhz")?,
            lambda: int(4, "lambda")? as u32,
            m: record.get(5).and_then(parse_m).ok_or_else(|| bad("m"))?,
            fidelity: num(6, "fidelity")?,
            confident: record.get(7).and_then(|s| s.parse().ok()).ok_or_else(|| bad("confident"))?,
            alpha_au: num(8, "alpha_au")?,
            overlap: num(9, "track_overlap")?,
        });
    }
    Ok((axis, rows))
}
