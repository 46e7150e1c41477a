//! Named sweeps producing the standard figure datasets.

use std::str::FromStr;

use polartrap::scenario::{Scenario, E_ALONG_X, E_ALONG_Z};
use polartrap::Result;

use crate::sweep::{Axis, Grid, SweepRequest};

/// Lowest N = 0 and N = 1 hyperfine states of NaK.
pub const DEFAULT_STATES: usize = 144;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// Energies versus E_x without trap light, two field ranges.
    Fig2,
    /// α versus θ at small fields along z and x.
    Fig3,
    /// α versus θ at three strong fields along x.
    Fig4,
    /// α versus E_x at eleven angles.
    Fig5,
    /// α versus intensity at four (E_x, θ) pairs.
    Fig6,
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            other => Err(format!("unknown figure `{other}` (expected fig2..fig6)")),
        }
    }
}

/// Overrides used to shrink recipes for quick runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RecipeOptions {
    /// Replace the point count of every grid.
    pub points: Option<usize>,
    pub states: usize,
    pub jobs: usize,
}

impl Default for RecipeOptions {
    fn default() -> Self {
        RecipeOptions { points: None, states: DEFAULT_STATES, jobs: 1 }
    }
}

/// One output file of a recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    /// File stem, e.g. `fig4b`.
    pub name: String,
    pub description: String,
    pub request: SweepRequest,
}

fn grid(start: f64, stop: f64, count: usize, options: &RecipeOptions) -> Vec<f64> {
    Grid::new(start, stop, options.points.unwrap_or(count)).values()
}

/// Panels of `figure`, built on `base` (molecule, B, wavelength, n_max).
pub fn panels(figure: Figure, base: &Scenario, options: &RecipeOptions) -> Result<Vec<Panel>> {
    let panel = |name: String, description: String, scenario: Scenario, axis: Axis, grid: Vec<f64>| Panel {
        name,
        description,
        request: SweepRequest { scenario, axis, grid, states: options.states, jobs: options.jobs },
    };
    let along_x = base.clone().with_e_direction(E_ALONG_X)?;
    let mut out = Vec::new();
    match figure {
        Figure::Fig2 => {
            let dark = along_x.with_intensity(0.0);
            for (tag, stop, count) in [("a", 1.2, 200), ("b", 0.2, 101)] {
                out.push(panel(
                    format!("fig2{tag}"),
                    format!("energies vs E_x in [0, {stop}] kV/cm, no trap light"),
                    dark.clone(),
                    Axis::Field,
                    grid(0.0, stop, count, options),
                ));
            }
        }
        Figure::Fig3 => {
            let tags = ["a", "b", "c", "d", "e", "f"];
            let mut k = 0;
            for (dir_name, dir) in [("z", E_ALONG_Z), ("x", E_ALONG_X)] {
                for e in [0.0, 0.06, 0.09] {
                    let s = base.clone().with_e_direction(dir)?.with_e(e);
                    out.push(panel(
                        format!("fig3{}", tags[k]),
                        format!("alpha vs theta, |E| = {e} kV/cm along {dir_name}"),
                        s,
                        Axis::Theta,
                        grid(0.0, 90.0, 91, options),
                    ));
                    k += 1;
                }
            }
        }
        Figure::Fig4 => {
            for (tag, e) in [("a", 2.0), ("b", 5.265), ("c", 8.0)] {
                out.push(panel(
                    format!("fig4{tag}"),
                    format!("alpha vs theta, E_x = {e} kV/cm"),
                    along_x.clone().with_e(e),
                    Axis::Theta,
                    grid(0.0, 90.0, 91, options),
                ));
            }
        }
        Figure::Fig5 => {
            let mut angles: Vec<f64> = (0..=9).map(|k| 10.0 * f64::from(k)).collect();
            angles.push(35.3);
            for theta in angles {
                out.push(panel(
                    format!("fig5_theta{theta}"),
                    format!("alpha vs E_x, theta = {theta} deg"),
                    along_x.clone().with_theta(theta),
                    Axis::Field,
                    grid(0.0, 10.0, 101, options),
                ));
            }
        }
        Figure::Fig6 => {
            for (tag, e, theta) in [("a", 0.0, 60.0), ("b", 0.09, 60.0), ("c", 2.0, 35.3), ("d", 5.265, 60.0)] {
                out.push(panel(
                    format!("fig6{tag}"),
                    format!("alpha vs intensity, E_x = {e} kV/cm, theta = {theta} deg"),
                    along_x.clone().with_e(e).with_theta(theta),
                    Axis::Intensity,
                    grid(0.0, 10.0, 101, options),
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_grids() {
        let base = Scenario::nak();
        let o = RecipeOptions::default();
        let count = |f| panels(f, &base, &o).unwrap().len();
        assert_eq!([count(Figure::Fig2), count(Figure::Fig3), count(Figure::Fig4), count(Figure::Fig5), count(Figure::Fig6)], [2, 6, 3, 11, 4]);

        let fig5 = panels(Figure::Fig5, &base, &o).unwrap();
        let mut thetas: Vec<f64> = fig5.iter().map(|p| p.request.scenario.theta_deg()).collect();
        thetas.sort_by(f64::total_cmp);
        let expected = [0.0, 10.0, 20.0, 30.0, 35.3, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0];
        for (t, e) in thetas.iter().zip(expected) {
            assert!((t - e).abs() < 1e-9);
        }

        let fig4 = panels(Figure::Fig4, &base, &o).unwrap();
        let fields: Vec<f64> = fig4.iter().map(|p| p.request.scenario.geometry.e_kv_cm).collect();
        assert_eq!(fields, vec![2.0, 5.265, 8.0]);

        let fig6 = panels(Figure::Fig6, &base, &o).unwrap();
        let pairs: Vec<(f64, f64)> = fig6
            .iter()
            .map(|p| (p.request.scenario.geometry.e_kv_cm, (p.request.scenario.theta_deg() * 10.0).round() / 10.0))
            .collect();
        assert_eq!(pairs, vec![(0.0, 60.0), (0.09, 60.0), (2.0, 35.3), (5.265, 60.0)]);
    }

    #[test]
    fn unknown_figure() {
        assert!("fig7".parse::<Figure>().is_err());
    }
}
