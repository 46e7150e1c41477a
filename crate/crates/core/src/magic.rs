//! Manifold polarizability statistics and root searches for magic trapping
//! conditions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scenario::{Evaluation, Scenario};
use crate::spectrum::{dynamic_polarizability, eigensolve, track_subset, MLabel};

/// ψ_m with P₂(cos ψ_m) = 0.
pub const MAGIC_ANGLE_DEG: f64 = 54.735_610_317_245_35;

/// Field at which the magic angle is searched when the double-magic point
/// is assembled: well inside the oriented regime, away from the magic field.
pub const REFERENCE_ANGLE_FIELD: f64 = 2.0;

/// Selects the hyperfine states of one pendular manifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldSelector {
    pub lambda: u32,
    pub m: MLabel,
    /// Minimum label fidelity of selected states.
    pub min_fidelity: f64,
}

impl ManifoldSelector {
    pub const fn new(lambda: u32, m: MLabel) -> Self {
        ManifoldSelector { lambda, m, min_fidelity: 0.5 }
    }

    /// |λ=0, m=0⟩.
    pub const GROUND: Self = Self::new(0, MLabel::Zero);
    /// |λ=1, m=0⟩.
    pub const EXCITED_M0: Self = Self::new(1, MLabel::Zero);
    /// |λ=1, m=±1⟩.
    pub const EXCITED_M1: Self = Self::new(1, MLabel::Pair(1));

    /// Indices of matching eigenstates, in energy order.
    pub fn select(&self, ev: &Evaluation) -> Result<Vec<usize>> {
        let picked: Vec<usize> = ev
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.lambda == self.lambda && l.m == self.m && l.fidelity >= self.min_fidelity)
            .map(|(i, _)| i)
            .collect();
        if picked.is_empty() {
            return Err(Error::EmptySelection(self.to_string()));
        }
        Ok(picked)
    }
}

impl std::fmt::Display for ManifoldSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "lambda={}, m={}", self.lambda, self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `(max - min) / |mean|`.
    pub spread: f64,
}

impl AlphaStats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut count, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        if count == 0 {
            return None;
        }
        let mean = sum / count as f64;
        Some(AlphaStats { count, mean, min, max, spread: (max - min) / mean.abs() })
    }
}

/// Polarizability statistics (a.u.) of one manifold in an evaluated scenario.
pub fn stats_in(ev: &Evaluation, selector: &ManifoldSelector) -> Result<AlphaStats> {
    let idx = selector.select(ev)?;
    Ok(AlphaStats::of(idx.iter().map(|&i| ev.alpha_au[i])).expect("selection is nonempty"))
}

pub fn manifold_alpha_stats(scenario: &Scenario, selector: &ManifoldSelector) -> Result<AlphaStats> {
    stats_in(&scenario.evaluate()?, selector)
}

/// Mean α of |λ=1,m=0⟩ minus mean α of |λ=0,m=0⟩, a.u.
pub fn delta_alpha_in(ev: &Evaluation) -> Result<f64> {
    Ok(stats_in(ev, &ManifoldSelector::EXCITED_M0)?.mean - stats_in(ev, &ManifoldSelector::GROUND)?.mean)
}

/// [`delta_alpha_in`] at field `e_kv_cm` and polarization angle `psi_m_deg`
/// from the field, other settings taken from `scenario`.
pub fn delta_alpha(e_kv_cm: f64, psi_m_deg: f64, scenario: &Scenario) -> Result<f64> {
    let s = scenario.clone().with_e(e_kv_cm).with_psi_m(psi_m_deg)?;
    delta_alpha_in(&s.evaluate()?)
}

/// Bisection outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bisection {
    pub root: f64,
    /// Function value at `root`.
    pub residual: f64,
    pub iterations: usize,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
}

/// Bisects `f` on `[lo, hi]` until the bracket shrinks below
/// `fraction · (hi - lo)` or `max_iterations` is reached. The root is the
/// bracket midpoint, with `f` evaluated there.
pub fn bisect(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    fraction: f64,
    max_iterations: usize,
) -> Result<Bisection> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(Bisection { root: a, residual: 0.0, iterations: 0, lo: a, hi: a });
    }
    if fb == 0.0 {
        return Ok(Bisection { root: b, residual: 0.0, iterations: 0, lo: b, hi: b });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Bracket { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    let target = fraction * (b - a);
    let mut fa = fa;
    let mut iterations = 0;
    while b - a > target && iterations < max_iterations {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        iterations += 1;
        if fm == 0.0 {
            return Ok(Bisection { root: mid, residual: 0.0, iterations, lo: mid, hi: mid });
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let root = 0.5 * (a + b);
    let residual = f(root)?;
    Ok(Bisection { root, residual, iterations, lo: a, hi: b })
}

/// Result of a magic-condition search.
#[derive(Clone, Debug, PartialEq)]
pub struct MagicResult {
    /// kV/cm for field roots, degrees (ψ_m) for angle roots.
    pub root: f64,
    /// Δα at the root, a.u.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Lab θ corresponding to an angle root.
    pub theta_deg: Option<f64>,
    /// (ψ_m, Δα) re-evaluated at a field root.
    pub validation: Vec<(f64, f64)>,
    pub n_max: u32,
    pub convergence: Option<Convergence>,
}

impl MagicResult {
    /// All validation entries below `limit` in magnitude.
    pub fn validated(&self, limit: f64) -> bool {
        self.validation.iter().all(|(_, d)| d.abs() < limit)
    }
}

/// Root recomputed with one more rotor level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    pub n_max: u32,
    pub root: f64,
    pub relative_shift: f64,
    /// The shift exceeded the scenario tolerance.
    pub warning: bool,
}

/// Magic angle ψ_m (degrees) at field `e_kv_cm` by bisection on Δα.
pub fn find_magic_angle(e_kv_cm: f64, scenario: &Scenario, bracket: (f64, f64)) -> Result<MagicResult> {
    let tol = scenario.tolerances;
    let b = bisect(|psi| delta_alpha(e_kv_cm, psi, scenario), bracket.0, bracket.1, tol.bisection_fraction, tol.max_iterations)?;
    if b.residual.abs() > tol.magic_angle_residual {
        return Err(Error::Validation(format!(
            "residual {:.3e} a.u. at psi_m = {:.4} deg exceeds {}",
            b.residual, b.root, tol.magic_angle_residual
        )));
    }
    let theta = scenario.clone().with_e(e_kv_cm).with_psi_m(b.root)?.theta_deg();
    Ok(MagicResult {
        root: b.root,
        residual: b.residual,
        bracket,
        iterations: b.iterations,
        theta_deg: Some(theta),
        validation: Vec::new(),
        n_max: scenario.n_max,
        convergence: None,
    })
}

/// Options for [`find_magic_field`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSearch {
    /// Angles (ψ_m, degrees) at which Δα is re-evaluated at the root.
    pub validation_angles: Vec<f64>,
    /// Repeat with `n_max + 1` around the root.
    pub check_convergence: bool,
    /// Points of a uniform pre-scan of the bracket that must show a single
    /// sign change; 0 skips the scan.
    pub prescan_points: usize,
}

impl Default for FieldSearch {
    fn default() -> Self {
        FieldSearch { validation_angles: vec![0.0, 30.0, 60.0, 90.0], check_convergence: true, prescan_points: 0 }
    }
}

impl FieldSearch {
    /// Root only.
    pub fn bare() -> Self {
        FieldSearch { validation_angles: Vec::new(), check_convergence: false, prescan_points: 0 }
    }
}

/// Δα on a uniform grid over `[lo, hi]` at fixed ψ_m, evaluated in parallel.
pub fn delta_alpha_scan(scenario: &Scenario, psi_m_deg: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let grid: Vec<f64> = match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    };
    grid.par_iter().map(|&e| Ok((e, delta_alpha(e, psi_m_deg, scenario)?))).collect()
}

/// Number of sign changes along a scan.
pub fn sign_changes(scan: &[(f64, f64)]) -> usize {
    scan.windows(2).filter(|w| w[0].1.signum() != w[1].1.signum()).count()
}

/// Magic electric field (kV/cm) at polarization angle `psi_m_deg`.
///
/// The root is validated at the configured angles; a validation failure
/// means the crossing depends on ψ_m and is not a magic field. When the
/// convergence check is on and the root moves by more than the tolerance
/// with one more rotor level, the larger-basis root is reported.
pub fn find_magic_field(
    psi_m_deg: f64,
    scenario: &Scenario,
    bracket: (f64, f64),
    search: &FieldSearch,
) -> Result<MagicResult> {
    let tol = scenario.tolerances;
    if search.prescan_points > 1 {
        let scan = delta_alpha_scan(scenario, psi_m_deg, bracket.0, bracket.1, search.prescan_points)?;
        let changes = sign_changes(&scan);
        if changes != 1 {
            return Err(Error::Validation(format!(
                "delta alpha changes sign {changes} times on the {}-point pre-scan of [{}, {}] kV/cm",
                search.prescan_points, bracket.0, bracket.1
            )));
        }
    }
    let field = |s: &Scenario, lo: f64, hi: f64| {
        bisect(|e| delta_alpha(e, psi_m_deg, s), lo, hi, tol.bisection_fraction, tol.max_iterations)
    };
    let b = field(scenario, bracket.0, bracket.1)?;
    let mut result = MagicResult {
        root: b.root,
        residual: b.residual,
        bracket,
        iterations: b.iterations,
        theta_deg: None,
        validation: Vec::new(),
        n_max: scenario.n_max,
        convergence: None,
    };

    if search.check_convergence {
        let larger = scenario.clone().with_n_max(scenario.n_max + 1);
        let half_width = (0.01 * b.root).max(10.0 * (b.hi - b.lo));
        let (lo, hi) = (b.root - half_width, b.root + half_width);
        let b6 = match field(&larger, lo, hi) {
            Ok(r) => r,
            Err(Error::Bracket { .. }) => field(&larger, bracket.0, bracket.1)?,
            Err(e) => return Err(e),
        };
        let shift = (b6.root - b.root).abs() / b.root.abs();
        let warning = shift > tol.convergence;
        result.convergence = Some(Convergence { n_max: larger.n_max, root: b6.root, relative_shift: shift, warning });
        if warning {
            result.root = b6.root;
            result.residual = b6.residual;
            result.n_max = larger.n_max;
        }
    }

    let validating = scenario.clone().with_n_max(result.n_max);
    result.validation = search
        .validation_angles
        .par_iter()
        .map(|&psi| Ok((psi, delta_alpha(result.root, psi, &validating)?)))
        .collect::<Result<_>>()?;
    Ok(result)
}

/// Grid checks accompanying [`double_magic`].
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleMagicGrids {
    /// ψ_m values checked at E*.
    pub psi_grid: Vec<f64>,
    /// Fields checked at ψ*.
    pub field_grid: Vec<f64>,
}

impl Default for DoubleMagicGrids {
    fn default() -> Self {
        DoubleMagicGrids {
            psi_grid: (0..=9).map(|k| 10.0 * f64::from(k)).collect(),
            field_grid: (0..20).map(|k| 0.5 + 0.5 * f64::from(k)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubleMagic {
    pub field: MagicResult,
    pub angle: MagicResult,
    /// (ψ_m, Δα) at E*.
    pub psi_check: Vec<(f64, f64)>,
    /// (E, Δα) at ψ*.
    pub field_check: Vec<(f64, f64)>,
    /// Grid points violating the validation tolerance, described.
    pub violations: Vec<String>,
}

impl DoubleMagic {
    pub fn e_star(&self) -> f64 {
        self.field.root
    }

    pub fn psi_star(&self) -> f64 {
        self.angle.root
    }
}

/// E* from the field search at ψ_m = 90°, ψ* from the angle search at
/// [`REFERENCE_ANGLE_FIELD`], and Δα grids through both.
pub fn double_magic(scenario: &Scenario, search: &FieldSearch, grids: &DoubleMagicGrids) -> Result<DoubleMagic> {
    let field = find_magic_field(90.0, scenario, (3.0, 8.0), search)?;
    let angle = find_magic_angle(REFERENCE_ANGLE_FIELD, scenario, (40.0, 70.0))?;
    let at_root = scenario.clone().with_n_max(field.n_max);
    let psi_check: Vec<(f64, f64)> = grids
        .psi_grid
        .par_iter()
        .map(|&psi| Ok((psi, delta_alpha(field.root, psi, &at_root)?)))
        .collect::<Result<_>>()?;
    let field_check: Vec<(f64, f64)> = grids
        .field_grid
        .par_iter()
        .map(|&e| Ok((e, delta_alpha(e, angle.root, scenario)?)))
        .collect::<Result<_>>()?;
    let limit = scenario.tolerances.validation_residual;
    let mut violations = Vec::new();
    for &(psi, d) in &psi_check {
        if d.abs() >= limit {
            violations.push(format!("E = {:.4} kV/cm, psi_m = {psi} deg: delta alpha {d:.4} a.u.", field.root));
        }
    }
    for &(e, d) in &field_check {
        if d.abs() >= limit {
            violations.push(format!("E = {e} kV/cm, psi_m = {:.4} deg: delta alpha {d:.4} a.u.", angle.root));
        }
    }
    Ok(DoubleMagic { field, angle, psi_check, field_check, violations })
}

/// Hyperpolarizability β = dα/dI (h·Hz per (kW/cm²)²) of the states picked
/// by `selector` at intensity `intensity`, by central difference over ±`di`
/// with the states followed adiabatically from the centre point.
///
/// Returns `(state index at the centre, β)` pairs.
pub fn hyperpolarizability(
    scenario: &Scenario,
    selector: &ManifoldSelector,
    intensity: f64,
    di: f64,
) -> Result<Vec<(usize, f64)>> {
    if !(di > 0.0) {
        return Err(Error::OutOfRange(format!("intensity step {di} must be positive")));
    }
    let centre = scenario.clone().with_intensity(intensity).evaluate()?;
    let states = selector.select(&centre)?;
    let mut sides = Vec::with_capacity(2);
    for i in [intensity + di, intensity - di] {
        let h = centre.terms.assemble(i)?;
        let spec = eigensolve(&h)?;
        let alpha = dynamic_polarizability(&spec, &centre.terms.pol);
        let t = track_subset(&centre.spectrum, &spec, &states)?;
        let worst = t.min_fidelity();
        if worst < 0.5 {
            return Err(Error::Tracking { overlap: worst });
        }
        sides.push(t.mapping.iter().map(|&j| alpha[j]).collect::<Vec<f64>>());
    }
    Ok(states
        .iter()
        .enumerate()
        .map(|(k, &i)| (i, (sides[0][k] - sides[1][k]) / (2.0 * di) * 1e6))
        .collect())
}

/// Mean of [`hyperpolarizability`] over a manifold.
pub fn manifold_hyperpolarizability(
    scenario: &Scenario,
    selector: &ManifoldSelector,
    intensity: f64,
    di: f64,
) -> Result<f64> {
    let beta = hyperpolarizability(scenario, selector, intensity, di)?;
    Ok(beta.iter().map(|(_, b)| b).sum::<f64>() / beta.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bisect_finds_cubic_root() {
        let b = bisect(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-10, 60).unwrap();
        assert_abs_diff_eq!(b.root, 2f64.cbrt(), epsilon = 1e-9);
        assert!(b.iterations <= 60);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(matches!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-6, 60), Err(Error::Bracket { .. })));
    }

    #[test]
    fn bisect_iteration_budget() {
        let b = bisect(|x| Ok(x - 0.3), 0.0, 1.0, 1e-4, 60).unwrap();
        assert!(b.hi - b.lo <= 1e-4);
        assert!(b.iterations <= 14);
    }

    #[test]
    fn stats_of_single_value() {
        let s = AlphaStats::of([5.0]).unwrap();
        assert_eq!((s.count, s.mean, s.spread), (1, 5.0, 0.0));
        assert!(AlphaStats::of(std::iter::empty()).is_none());
    }

    #[test]
    fn magic_angle_constant() {
        let c = MAGIC_ANGLE_DEG.to_radians().cos();
        assert_abs_diff_eq!(3.0 * c * c - 1.0, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_rotor_manifolds() {
        let s = Scenario::nak().with_pure_rotor(true).with_e(2.0);
        let ev = s.clone().with_psi_m(0.0).unwrap().evaluate().unwrap();
        assert_eq!(ManifoldSelector::GROUND.select(&ev).unwrap(), vec![0]);
        assert_eq!(ManifoldSelector::EXCITED_M1.select(&ev).unwrap().len(), 2);
        let d0 = delta_alpha(2.0, 0.0, &s).unwrap();
        let d90 = delta_alpha(2.0, 90.0, &s).unwrap();
        assert!(d0 * d90 < 0.0);
        // anisotropic part scales with P2(cos psi)
        assert_abs_diff_eq!(d90 / d0, -0.5, epsilon = 1e-4);
    }

    #[test]
    fn hyperpolarizability_vanishes_for_single_state() {
        let s = Scenario::nak().with_pure_rotor(true).with_n_max(0).with_e(1.0);
        let beta = hyperpolarizability(&s, &ManifoldSelector::GROUND, 2.35, 0.1).unwrap();
        assert_eq!(beta, vec![(0, 0.0)]);
    }
}
