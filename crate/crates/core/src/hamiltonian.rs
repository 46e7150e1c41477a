//! Uncoupled basis `|N, m, m_a, m_b>` quantized along the static electric
//! field, and the Hermitian matrices of the rotational, quadrupole, nuclear
//! Zeeman, DC Stark and optical-trap terms.

use std::collections::HashMap;

use faer::Mat;
use num_complex::Complex64;

use crate::angular::{
    build_frame, c_tensor_element, dot, normalize, polarization_tensor, spherical_components,
    spin_tensor_element, Frame, HalfInteger, PolarizationTensor, SphericalVector,
};
use crate::error::{Error, Result};
use crate::molecule::{alpha_in_mhz_per_kw_cm2, stark_energy_scale, UnitConstants};

/// One uncoupled basis ket. `n` and `m` are integer valued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub n: HalfInteger,
    pub m: HalfInteger,
    pub m_a: HalfInteger,
    pub m_b: HalfInteger,
}

impl BasisState {
    pub fn rotor_n(&self) -> i32 {
        self.n.twice() / 2
    }

    pub fn rotor_m(&self) -> i32 {
        self.m.twice() / 2
    }

    /// Total projection `m + m_a + m_b`.
    pub fn total_projection(&self) -> HalfInteger {
        self.m + self.m_a + self.m_b
    }
}

/// Complete uncoupled basis up to `n_max`, ordered lexicographically in
/// `(N, m, m_a, m_b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    states: Vec<BasisState>,
    n_max: u32,
    spins: (HalfInteger, HalfInteger),
}

impl Basis {
    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn spins(&self) -> (HalfInteger, HalfInteger) {
        self.spins
    }

    /// Number of nuclear-spin configurations `(2I_a+1)(2I_b+1)`.
    pub fn spin_multiplicity(&self) -> usize {
        self.spins.0.multiplicity() * self.spins.1.multiplicity()
    }

    /// Number of rotor states `(n_max+1)^2`.
    pub fn rotor_count(&self) -> usize {
        let n = self.n_max as usize + 1;
        n * n
    }

    /// Position of rotor state `|N, m>` in the rotor ordering.
    pub fn rotor_index(n: i32, m: i32) -> usize {
        (n * n + n + m) as usize
    }

    /// Position of nuclear configuration `(m_a, m_b)`.
    pub fn spin_index(&self, m_a: HalfInteger, m_b: HalfInteger) -> usize {
        let (ia, ib) = self.spins;
        let a = ((m_a.twice() + ia.twice()) / 2) as usize;
        let b = ((m_b.twice() + ib.twice()) / 2) as usize;
        a * ib.multiplicity() + b
    }

    /// Index of a ket, or `None` when it lies outside the basis.
    pub fn index_of(&self, n: i32, m: i32, m_a: HalfInteger, m_b: HalfInteger) -> Option<usize> {
        let (ia, ib) = self.spins;
        if n < 0 || n > self.n_max as i32 || m.abs() > n || !ia.admits(m_a) || !ib.admits(m_b) {
            return None;
        }
        Some(Self::rotor_index(n, m) * self.spin_multiplicity() + self.spin_index(m_a, m_b))
    }
}

pub fn build_basis(n_max: u32, spin_a: HalfInteger, spin_b: HalfInteger) -> Basis {
    let mut states = Vec::new();
    for n in 0..=n_max as i32 {
        for m in -n..=n {
            for m_a in spin_a.projections() {
                for m_b in spin_b.projections() {
                    states.push(BasisState {
                        n: HalfInteger::integer(n),
                        m: HalfInteger::integer(m),
                        m_a,
                        m_b,
                    });
                }
            }
        }
    }
    Basis { states, n_max, spins: (spin_a, spin_b) }
}

/// Static fields and trapping laser. Directions are lab-frame unit vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGeometry {
    /// Magnetic field, mT.
    pub b_mt: f64,
    pub b_direction: [f64; 3],
    /// Electric field, kV/cm.
    pub e_kv_cm: f64,
    pub e_direction: [f64; 3],
    pub wavelength_nm: f64,
    /// Trap intensity, kW/cm².
    pub intensity: f64,
    pub polarization: [f64; 3],
    pub propagation: [f64; 3],
}

impl FieldGeometry {
    /// Geometry with B along lab z, the laser propagating along lab y and
    /// polarized in the xz plane at `theta_deg` from z.
    pub fn lab(
        b_mt: f64,
        e_kv_cm: f64,
        e_direction: [f64; 3],
        theta_deg: f64,
        wavelength_nm: f64,
        intensity: f64,
    ) -> Result<Self> {
        let theta = theta_deg.to_radians();
        let geometry = FieldGeometry {
            b_mt,
            b_direction: [0.0, 0.0, 1.0],
            e_kv_cm,
            e_direction: normalize(e_direction)
                .ok_or_else(|| Error::InvalidGeometry("electric-field direction has zero length".into()))?,
            wavelength_nm,
            intensity,
            polarization: [theta.sin(), 0.0, theta.cos()],
            propagation: [0.0, 1.0, 0.0],
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("magnetic field", self.b_mt), ("electric field", self.e_kv_cm), ("intensity", self.intensity)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidGeometry(format!("{name} magnitude {v} must be finite and >= 0")));
            }
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(Error::InvalidGeometry(format!("wavelength {} nm must be positive", self.wavelength_nm)));
        }
        for (name, v) in [
            ("magnetic-field direction", self.b_direction),
            ("electric-field direction", self.e_direction),
            ("polarization", self.polarization),
            ("propagation", self.propagation),
        ] {
            if (dot(v, v).sqrt() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGeometry(format!("{name} {v:?} is not a unit vector")));
            }
        }
        if dot(self.polarization, self.propagation).abs() > 1e-12 {
            return Err(Error::InvalidGeometry("polarization must be perpendicular to propagation".into()));
        }
        Ok(())
    }

    /// Frame with its quantization axis along the electric-field direction.
    pub fn frame(&self) -> Result<Frame> {
        build_frame(self.e_direction)
    }

    /// Angle between polarization and electric field, folded into [0°, 90°].
    pub fn psi_m_deg(&self) -> f64 {
        folded_angle_deg(self.polarization, self.e_direction)
    }

    /// Angle between polarization and magnetic field, folded into [0°, 90°].
    pub fn theta_deg(&self) -> f64 {
        folded_angle_deg(self.polarization, self.b_direction)
    }

    /// Applies one proper rotation to every direction.
    pub fn rotated(&self, rotation: &[[f64; 3]; 3]) -> Self {
        let apply = |v: [f64; 3]| [dot(rotation[0], v), dot(rotation[1], v), dot(rotation[2], v)];
        FieldGeometry {
            b_direction: apply(self.b_direction),
            e_direction: apply(self.e_direction),
            polarization: apply(self.polarization),
            propagation: apply(self.propagation),
            ..self.clone()
        }
    }

    pub fn b_in_frame(&self) -> Result<SphericalVector> {
        let f = self.frame()?;
        spherical_components(renormalize(f.to_frame(self.b_direction)))
    }

    pub fn polarization_in_frame(&self) -> Result<PolarizationTensor> {
        let f = self.frame()?;
        Ok(polarization_tensor(&spherical_components(renormalize(f.to_frame(self.polarization)))?))
    }
}

fn renormalize(v: [f64; 3]) -> [f64; 3] {
    normalize(v).unwrap_or(v)
}

fn folded_angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    dot(a, b).abs().min(1.0).acos().to_degrees()
}

/// Hermitian operator over a [`Basis`], stored as sorted nonzero entries.
///
/// Individual terms are very sparse; the assembled Hamiltonian is expanded
/// to a dense matrix only inside the eigensolver.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    /// `(row, col, value)`, sorted by `(row, col)`, no duplicates, no zeros.
    entries: Vec<(usize, usize, Complex64)>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        OperatorMatrix { dim, entries: Vec::new() }
    }

    pub fn from_dense(data: &Mat<Complex64>) -> Self {
        assert_eq!(data.nrows(), data.ncols(), "operator matrices are square");
        let mut acc = Accumulator::new(data.nrows());
        for i in 0..data.nrows() {
            for j in 0..data.ncols() {
                acc.add(i, j, data[(i, j)]);
            }
        }
        acc.finish()
    }

    /// Real symmetric or Hermitian matrix from rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        Self::from_dense(&Mat::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self.entries.binary_search_by(|&(r, c, _)| (r, c).cmp(&(i, j))) {
            Ok(k) => self.entries[k].2,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Nonzero entries as `(row, col, value)`, sorted by row then column.
    pub fn nonzeros(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    /// True when every entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|(_, _, v)| v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)| / max |A_ij|` (zero for the zero matrix).
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let defect = self
            .entries
            .iter()
            .map(|&(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max);
        defect / scale
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.iter().filter(|(i, j, _)| i == j).map(|(_, _, v)| *v).sum()
    }

    /// `<u| A |v>` for column vectors `u`, `v`.
    pub fn matrix_element(&self, u: faer::ColRef<'_, Complex64>, v: faer::ColRef<'_, Complex64>) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for &(i, j, a) in &self.entries {
            sum += u[i].conj() * a * v[j];
        }
        sum
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &OperatorMatrix, factor: f64) -> Result<OperatorMatrix> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut acc = Accumulator::new(self.dim);
        for &(i, j, v) in &self.entries {
            acc.add(i, j, v);
        }
        for &(i, j, v) in &other.entries {
            acc.add(i, j, v * factor);
        }
        Ok(acc.finish())
    }
}

/// Collects matrix entries, summing repeated positions.
struct Accumulator {
    dim: usize,
    entries: HashMap<(usize, usize), Complex64>,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Accumulator { dim, entries: HashMap::new() }
    }

    fn add(&mut self, i: usize, j: usize, value: Complex64) {
        if value.re != 0.0 || value.im != 0.0 {
            *self.entries.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += value;
        }
    }

    fn finish(self) -> OperatorMatrix {
        let mut entries: Vec<_> = self
            .entries
            .into_iter()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|((i, j), v)| (i, j, v))
            .collect();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        OperatorMatrix { dim: self.dim, entries }
    }
}

/// `<N m | C_kq | N' m'>` for all rotor pairs up to `n_max` and `k = 1, 2`.
#[derive(Clone, Debug)]
struct RotorTable {
    elements: HashMap<(i32, i32, i32, i32, i32), f64>,
}

impl RotorTable {
    fn new(n_max: u32) -> Self {
        let n_max = n_max as i32;
        let mut elements = HashMap::new();
        for k in 1..=2 {
            for n in 0..=n_max {
                for m in -n..=n {
                    for n2 in (n - k).max(0)..=(n + k).min(n_max) {
                        for q in -k..=k {
                            let m2 = m - q;
                            if m2.abs() > n2 {
                                continue;
                            }
                            let v = c_tensor_element(
                                HalfInteger::integer(n),
                                HalfInteger::integer(m),
                                k,
                                q,
                                HalfInteger::integer(n2),
                                HalfInteger::integer(m2),
                            );
                            if v != 0.0 {
                                elements.insert((k, n, m, q, n2), v);
                            }
                        }
                    }
                }
            }
        }
        RotorTable { elements }
    }

    /// `<n m | C_kq | n2, m - q>`.
    fn get(&self, k: i32, n: i32, m: i32, q: i32, n2: i32) -> f64 {
        self.elements.get(&(k, n, m, q, n2)).copied().unwrap_or(0.0)
    }
}

/// `N(N+1) B` on the diagonal.
pub fn h_rot(basis: &Basis, b_rot: f64) -> OperatorMatrix {
    let mut h = Accumulator::new(basis.len());
    for (i, s) in basis.states().iter().enumerate() {
        let n = f64::from(s.rotor_n());
        h.add(i, i, Complex64::new(n * (n + 1.0) * b_rot, 0.0));
    }
    h.finish()
}

/// `-d E C_10` with `E` along the quantization axis; dipole in e·a0, field in kV/cm.
pub fn h_stark(basis: &Basis, dipole: f64, e_magnitude: f64) -> OperatorMatrix {
    let mut h = Accumulator::new(basis.len());
    let scale = stark_energy_scale(dipole, e_magnitude);
    if scale == 0.0 {
        return h.finish();
    }
    let table = RotorTable::new(basis.n_max());
    for (i, s) in basis.states().iter().enumerate() {
        let (n, m) = (s.rotor_n(), s.rotor_m());
        for n2 in [n - 1, n + 1] {
            if let Some(j) = basis.index_of(n2, m, s.m_a, s.m_b) {
                let c = table.get(1, n, m, 0, n2);
                if c != 0.0 {
                    h.add(i, j, Complex64::new(-scale * c, 0.0));
                }
            }
        }
    }
    h.finish()
}

/// Nuclear electric-quadrupole interaction of both nuclei (couplings in h·MHz).
///
/// `(eqQ/4) Σ_q (-1)^q <C_{2,-q}> <T_2q(I,I)> / <I I|T_20(I,I)|I I>`
pub fn h_quadrupole(
    basis: &Basis,
    eqq_a: f64,
    eqq_b: f64,
    spin_a: HalfInteger,
    spin_b: HalfInteger,
) -> OperatorMatrix {
    let mut h = Accumulator::new(basis.len());
    debug_assert_eq!(basis.spins(), (spin_a, spin_b));
    let table = RotorTable::new(basis.n_max());

    for (nucleus, eqq, spin) in [(0usize, eqq_a, spin_a), (1, eqq_b, spin_b)] {
        if eqq == 0.0 || spin.twice() < 2 {
            continue;
        }
        let stretched = spin_tensor_element(spin, spin, 0, spin);
        let prefactor = eqq / 4.0 / stretched;
        for (i, s) in basis.states().iter().enumerate() {
            let (n, m) = (s.rotor_n(), s.rotor_m());
            let m_i = if nucleus == 0 { s.m_a } else { s.m_b };
            for q in -2..=2 {
                // <m_i|T_2q|m_i'> needs m_i' = m_i - q; <m|C_{2,-q}|m'> needs m' = m + q
                let m_i2 = m_i - HalfInteger::integer(q);
                if !spin.admits(m_i2) {
                    continue;
                }
                let spin_part = spin_tensor_element(spin, m_i, q, m_i2);
                if spin_part == 0.0 {
                    continue;
                }
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                for n2 in [n - 2, n, n + 2] {
                    let (ma2, mb2) = if nucleus == 0 { (m_i2, s.m_b) } else { (s.m_a, m_i2) };
                    let Some(j) = basis.index_of(n2, m + q, ma2, mb2) else {
                        continue;
                    };
                    let rotor = table.get(2, n, m, -q, n2);
                    if rotor != 0.0 {
                        h.add(i, j, Complex64::new(prefactor * sign * rotor * spin_part, 0.0));
                    }
                }
            }
        }
    }
    h.finish()
}

/// `<m | I_q | m - q>` spherical spin component.
fn spin_vector_element(spin: HalfInteger, m: HalfInteger, q: i32) -> f64 {
    let i = spin.value();
    let mv = m.value();
    match q {
        0 => mv,
        1 => -((i - mv + 1.0) * (i + mv)).max(0.0).sqrt() * std::f64::consts::FRAC_1_SQRT_2,
        -1 => ((i + mv + 1.0) * (i - mv)).max(0.0).sqrt() * std::f64::consts::FRAC_1_SQRT_2,
        _ => 0.0,
    }
}

/// `-Σ_k g_k μ_N B Σ_q (-1)^q (I_k)_q b_{-q}` with `b` the field direction in
/// the quantization frame and `B` in mT.
pub fn h_zeeman(basis: &Basis, g_a: f64, g_b: f64, b_direction: &SphericalVector, b_magnitude: f64) -> OperatorMatrix {
    let mut h = Accumulator::new(basis.len());
    let (spin_a, spin_b) = basis.spins();
    for (nucleus, g, spin) in [(0usize, g_a, spin_a), (1, g_b, spin_b)] {
        let scale = -g * UnitConstants::NUCLEAR_MAGNETON_MHZ_PER_MT * b_magnitude;
        if scale == 0.0 || spin.twice() == 0 {
            continue;
        }
        for (i, s) in basis.states().iter().enumerate() {
            let m_i = if nucleus == 0 { s.m_a } else { s.m_b };
            for q in -1..=1 {
                let m_i2 = m_i - HalfInteger::integer(q);
                if !spin.admits(m_i2) {
                    continue;
                }
                let field = b_direction.get(-q);
                if field.re == 0.0 && field.im == 0.0 {
                    continue;
                }
                let (ma2, mb2) = if nucleus == 0 { (m_i2, s.m_b) } else { (s.m_a, m_i2) };
                let j = basis
                    .index_of(s.rotor_n(), s.rotor_m(), ma2, mb2)
                    .expect("spin projection inside multiplet");
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let value = field * (scale * sign * spin_vector_element(spin, m_i, q));
                if value.re != 0.0 || value.im != 0.0 {
                    h.add(i, j, value);
                }
            }
        }
    }
    h.finish()
}

/// Per-intensity trap operator `W` (h·MHz per kW/cm²), so that the trap
/// Hamiltonian is `I_trap · W`. Polarizabilities in atomic units.
pub fn h_pol_operator(basis: &Basis, alpha_par: f64, alpha_perp: f64, pol: &PolarizationTensor) -> OperatorMatrix {
    let mut w = Accumulator::new(basis.len());
    let isotropic = alpha_in_mhz_per_kw_cm2((alpha_par + 2.0 * alpha_perp) / 3.0);
    let anisotropic = alpha_in_mhz_per_kw_cm2(alpha_par - alpha_perp) * 6f64.sqrt() / 3.0;
    let table = RotorTable::new(basis.n_max());
    for (i, s) in basis.states().iter().enumerate() {
        w.add(i, i, Complex64::new(-isotropic, 0.0));
        let (n, m) = (s.rotor_n(), s.rotor_m());
        for q in -2..=2 {
            let t = pol.get(q);
            if t.re == 0.0 && t.im == 0.0 {
                continue;
            }
            let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            for n2 in [n - 2, n, n + 2] {
                let Some(j) = basis.index_of(n2, m + q, s.m_a, s.m_b) else {
                    continue;
                };
                let rotor = table.get(2, n, m, -q, n2);
                if rotor != 0.0 {
                    w.add(i, j, t * (-anisotropic * sign * rotor));
                }
            }
        }
    }
    w.finish()
}

/// All terms of the effective Hamiltonian on one basis; the trap term is
/// kept per unit intensity.
#[derive(Clone, Debug)]
pub struct HamiltonianTerms {
    pub rot: OperatorMatrix,
    pub hf: OperatorMatrix,
    pub zeeman: OperatorMatrix,
    pub stark: OperatorMatrix,
    pub pol: OperatorMatrix,
}

impl HamiltonianTerms {
    /// `H_rot + H_hf + H_Z + H_E + intensity · W`.
    pub fn assemble(&self, intensity: f64) -> Result<OperatorMatrix> {
        assemble(&[&self.rot, &self.hf, &self.zeeman, &self.stark], &self.pol, intensity)
    }
}

/// Sums `static_terms` and `intensity · w`.
pub fn assemble(static_terms: &[&OperatorMatrix], w: &OperatorMatrix, intensity: f64) -> Result<OperatorMatrix> {
    let n = w.dim();
    for t in static_terms {
        if t.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: t.dim() });
        }
    }
    let mut acc = Accumulator::new(n);
    for t in static_terms {
        for &(i, j, v) in t.nonzeros() {
            acc.add(i, j, v);
        }
    }
    if intensity != 0.0 {
        for &(i, j, v) in w.nonzeros() {
            acc.add(i, j, v * intensity);
        }
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecule::MoleculeParams;
    use approx::assert_abs_diff_eq;

    fn half(twice: i32) -> HalfInteger {
        HalfInteger::from_twice(twice)
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(build_basis(5, half(3), half(8)).len(), 1296);
        assert_eq!(build_basis(1, half(3), half(8)).len(), 144);
        assert_eq!(build_basis(0, half(0), half(0)).len(), 1);
        for n_max in 0..=6u32 {
            for ta in 0..=9 {
                for tb in 0..=9 {
                    let b = build_basis(n_max, half(ta), half(tb));
                    let expect = (n_max as usize + 1).pow(2) * (ta as usize + 1) * (tb as usize + 1);
                    assert_eq!(b.len(), expect);
                }
            }
        }
    }

    #[test]
    fn basis_ordering_and_index() {
        let b = build_basis(2, half(1), half(2));
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s.rotor_n(), s.rotor_m(), s.m_a, s.m_b), Some(i));
        }
        let keys: Vec<_> = b
            .states()
            .iter()
            .map(|s| (s.n.twice(), s.m.twice(), s.m_a.twice(), s.m_b.twice()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted);
        assert_eq!(b.index_of(3, 0, half(1), half(0)), None);
    }

    #[test]
    fn rotational_diagonal() {
        let nak = MoleculeParams::nak();
        let b = build_basis(2, half(0), half(0));
        let h = h_rot(&b, nak.b_rot);
        assert_eq!(h.get(0, 0).re, 0.0);
        let i1 = b.index_of(1, 0, half(0), half(0)).unwrap();
        assert_abs_diff_eq!(h.get(i1, i1).re, 5643.4594, epsilon = 1e-9);
        let i2 = b.index_of(2, -1, half(0), half(0)).unwrap();
        assert_abs_diff_eq!(h.get(i2, i2).re, 16930.3782, epsilon = 1e-9);
    }

    #[test]
    fn stark_elements() {
        let b = build_basis(3, half(3), half(0));
        assert_eq!(h_stark(&b, 1.07, 0.0).max_abs(), 0.0);
        let h = h_stark(&b, 1.07, 1.0);
        let i = b.index_of(0, 0, half(1), half(0)).unwrap();
        let j = b.index_of(1, 0, half(1), half(0)).unwrap();
        assert_abs_diff_eq!(h.get(i, j).re, -1369.1 / 3f64.sqrt(), epsilon = 1e-2);
        for &(r, c, _) in h.nonzeros() {
            let (s, t) = (b.states()[r], b.states()[c]);
            assert_eq!(s.m, t.m);
            assert_eq!(s.m_a, t.m_a);
            assert_eq!((s.rotor_n() - t.rotor_n()).abs(), 1);
        }
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn zeeman_along_axis() {
        let b = build_basis(0, half(3), half(0));
        let axis = spherical_components([0.0, 0.0, 1.0]).unwrap();
        let h = h_zeeman(&b, 1.477388, 0.0, &axis, 8.57);
        let i = b.index_of(0, 0, half(3), half(0)).unwrap();
        let expect = -1.477388 * 1.5 * 8.57 * 7.622593e-3;
        assert_abs_diff_eq!(h.get(i, i).re, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(expect, -0.14478, epsilon = 2e-5);
        assert_eq!(h_zeeman(&b, 0.0, 0.0, &axis, 8.57).max_abs(), 0.0);
    }

    #[test]
    fn zeeman_perpendicular_has_no_diagonal() {
        let b = build_basis(1, half(3), half(2));
        let perp = spherical_components([1.0, 0.0, 0.0]).unwrap();
        let h = h_zeeman(&b, 1.477388, -0.32406, &perp, 8.57);
        for i in 0..b.len() {
            assert_eq!(h.get(i, i).norm(), 0.0);
        }
        for &(r, c, _) in h.nonzeros() {
            let (s, t) = (b.states()[r], b.states()[c]);
            let da = (s.m_a.twice() - t.m_a.twice()).abs();
            let db = (s.m_b.twice() - t.m_b.twice()).abs();
            assert!((da == 2 && db == 0) || (da == 0 && db == 2));
        }
        assert!(h.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn zeeman_matches_cartesian_spin_matrices() {
        let b = build_basis(0, half(3), half(0));
        let dir = [0.36, -0.48, 0.8];
        let sph = spherical_components(dir).unwrap();
        let h = h_zeeman(&b, 1.0, 0.0, &sph, 1.0);
        let spin = half(3);
        let i = spin.value();
        let scale = -UnitConstants::NUCLEAR_MAGNETON_MHZ_PER_MT;
        for (r, mr) in spin.projections().enumerate() {
            for (c, mc) in spin.projections().enumerate() {
                let (a, bv) = (mr.value(), mc.value());
                let mut v = Complex64::new(0.0, 0.0);
                if a == bv {
                    v += dir[2] * a;
                }
                // I_+ (bx - i by)/2 + I_- (bx + i by)/2
                if (a - bv - 1.0).abs() < 1e-12 {
                    v += Complex64::new(dir[0], -dir[1]) * ((i - bv) * (i + bv + 1.0)).sqrt() / 2.0;
                }
                if (a - bv + 1.0).abs() < 1e-12 {
                    v += Complex64::new(dir[0], dir[1]) * ((i + bv) * (i - bv + 1.0)).sqrt() / 2.0;
                }
                assert_abs_diff_eq!((h.get(r, c) - v * scale).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn quadrupole_selection_rules() {
        let b = build_basis(2, half(3), half(8));
        assert_eq!(h_quadrupole(&b, 0.0, 0.0, half(3), half(8)).max_abs(), 0.0);
        let h = h_quadrupole(&b, -0.187, 0.899, half(3), half(8));
        assert!(h.hermiticity_defect() < 1e-14);
        for &(r, c, _) in h.nonzeros() {
            let (s, t) = (b.states()[r], b.states()[c]);
            assert!(!(s.rotor_n() == 0 && t.rotor_n() == 0));
            assert_eq!(s.total_projection(), t.total_projection());
        }
    }

    #[test]
    fn trap_operator_examples() {
        let b = build_basis(2, half(0), half(0));
        let (par, perp) = (1013.4, 361.46);
        let along = polarization_tensor(&spherical_components([0.0, 0.0, 1.0]).unwrap());
        let w = h_pol_operator(&b, par, perp, &along);
        let iso = (par + 2.0 * perp) / 3.0;
        assert_abs_diff_eq!(w.get(0, 0).re, -alpha_in_mhz_per_kw_cm2(iso), epsilon = 1e-15);
        assert_abs_diff_eq!(w.get(0, 0).re, -0.027124, epsilon = 2e-6);
        let i = b.index_of(1, 0, half(0), half(0)).unwrap();
        let expect = -alpha_in_mhz_per_kw_cm2(iso + 4.0 / 15.0 * (par - perp));
        assert_abs_diff_eq!(w.get(i, i).re, expect, epsilon = 1e-15);
        // conserves m when the polarization is along the quantization axis
        for &(r, c, _) in w.nonzeros() {
            assert_eq!(b.states()[r].m, b.states()[c].m);
        }

        let magic = (1.0f64 / 3.0).sqrt().acos();
        let tilted = polarization_tensor(&spherical_components([magic.sin(), 0.0, magic.cos()]).unwrap());
        let w = h_pol_operator(&b, par, perp, &tilted);
        let j = b.index_of(1, 0, half(0), half(0)).unwrap();
        assert_abs_diff_eq!(w.get(j, j).re, -alpha_in_mhz_per_kw_cm2(iso), epsilon = 1e-15);
    }

    #[test]
    fn assemble_checks_dimensions() {
        let a = OperatorMatrix::zeros(3);
        let w = OperatorMatrix::zeros(4);
        assert!(matches!(assemble(&[&a], &w, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn geometry_angles() {
        let g = FieldGeometry::lab(8.57, 2.0, [1.0, 0.0, 0.0], 35.26, 1064.0, 2.35).unwrap();
        assert_abs_diff_eq!(g.psi_m_deg(), 90.0 - 35.26, epsilon = 1e-12);
        assert_abs_diff_eq!(g.theta_deg(), 35.26, epsilon = 1e-12);
        let g = FieldGeometry::lab(8.57, 2.0, [0.0, 0.0, 1.0], 20.0, 1064.0, 2.35).unwrap();
        assert_abs_diff_eq!(g.psi_m_deg(), 20.0, epsilon = 1e-12);
        assert!(FieldGeometry::lab(8.57, -1.0, [1.0, 0.0, 0.0], 0.0, 1064.0, 2.35).is_err());
        assert!(FieldGeometry::lab(8.57, 1.0, [0.0, 0.0, 0.0], 0.0, 1064.0, 2.35).is_err());
    }
}
