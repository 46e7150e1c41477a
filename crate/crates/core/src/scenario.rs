//! A complete physical setup — molecule, fields, truncation — and its
//! evaluation into labelled eigenstates with polarizabilities.

use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_basis, h_pol_operator, h_quadrupole, h_rot, h_stark, h_zeeman, Basis, FieldGeometry, HamiltonianTerms,
    OperatorMatrix,
};
use crate::molecule::{alpha_in_au, stark_energy_scale, MoleculeParams};
use crate::spectrum::{classify, dynamic_polarizability, eigensolve, PendularReference, Spectrum, StateLabel};

pub const DEFAULT_B_MT: f64 = 8.57;
pub const DEFAULT_INTENSITY: f64 = 2.35;
pub const DEFAULT_WAVELENGTH_NM: f64 = 1064.0;
pub const DEFAULT_N_MAX: u32 = 5;
pub const DEFAULT_FIDELITY_THRESHOLD: f64 = 0.5;

/// Numerical tolerances shared by root finders and validations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Bisection stops when the bracket is narrower than this fraction of
    /// its initial width.
    pub bisection_fraction: f64,
    pub max_iterations: usize,
    /// |Δα| (a.u.) accepted at a magic angle.
    pub magic_angle_residual: f64,
    /// |Δα| (a.u.) accepted by validation grids around magic fields.
    pub validation_residual: f64,
    /// Relative root shift that triggers a convergence warning when the
    /// rotor basis is enlarged by one level.
    pub convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            bisection_fraction: 1e-4,
            max_iterations: 60,
            magic_angle_residual: 0.1,
            validation_residual: 0.5,
            convergence: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub molecule: MoleculeParams,
    pub geometry: FieldGeometry,
    pub n_max: u32,
    pub fidelity_threshold: f64,
    /// Drop nuclear spins: no hyperfine and no Zeeman terms.
    pub pure_rotor: bool,
    pub tolerances: Tolerances,
}

/// Lab direction of the static electric field.
pub const E_ALONG_X: [f64; 3] = [1.0, 0.0, 0.0];
pub const E_ALONG_Z: [f64; 3] = [0.0, 0.0, 1.0];

impl Scenario {
    /// NaK with default fields: B = 8.57 mT along z, 2.35 kW/cm² at 1064 nm
    /// polarized along z, no electric field (direction x).
    pub fn nak() -> Self {
        Self::new(MoleculeParams::nak())
    }

    pub fn new(molecule: MoleculeParams) -> Self {
        Scenario {
            molecule,
            geometry: FieldGeometry::lab(DEFAULT_B_MT, 0.0, E_ALONG_X, 0.0, DEFAULT_WAVELENGTH_NM, DEFAULT_INTENSITY)
                .expect("default geometry is valid"),
            n_max: DEFAULT_N_MAX,
            fidelity_threshold: DEFAULT_FIDELITY_THRESHOLD,
            pure_rotor: false,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_e(mut self, e_kv_cm: f64) -> Self {
        self.geometry.e_kv_cm = e_kv_cm;
        self
    }

    pub fn with_e_direction(mut self, direction: [f64; 3]) -> Result<Self> {
        let theta = self.theta_deg();
        self.geometry = FieldGeometry::lab(
            self.geometry.b_mt,
            self.geometry.e_kv_cm,
            direction,
            theta,
            self.geometry.wavelength_nm,
            self.geometry.intensity,
        )?;
        Ok(self)
    }

    /// Lab polarization angle from the magnetic field (z), polarization in
    /// the xz plane.
    pub fn with_theta(mut self, theta_deg: f64) -> Self {
        let t = theta_deg.to_radians();
        self.geometry.polarization = [t.sin(), 0.0, t.cos()];
        self
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.geometry.intensity = intensity;
        self
    }

    pub fn with_b(mut self, b_mt: f64) -> Self {
        self.geometry.b_mt = b_mt;
        self
    }

    pub fn with_wavelength(mut self, wavelength_nm: f64) -> Self {
        self.geometry.wavelength_nm = wavelength_nm;
        self
    }

    pub fn with_n_max(mut self, n_max: u32) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_pure_rotor(mut self, pure_rotor: bool) -> Self {
        self.pure_rotor = pure_rotor;
        self
    }

    /// Lab polarization angle θ in [0°, 180°) recovered from the
    /// polarization vector.
    pub fn theta_deg(&self) -> f64 {
        let p = self.geometry.polarization;
        p[0].atan2(p[2]).to_degrees().rem_euclid(180.0)
    }

    pub fn psi_m_deg(&self) -> f64 {
        self.geometry.psi_m_deg()
    }

    /// Chooses θ so that the polarization makes angle `psi_m_deg` with the
    /// electric field.
    pub fn with_psi_m(self, psi_m_deg: f64) -> Result<Self> {
        let theta = theta_for_psi_m(self.geometry.e_direction, psi_m_deg)?;
        Ok(self.with_theta(theta))
    }

    /// Molecule as used in the Hamiltonian (spins stripped for a pure rotor).
    pub fn effective_molecule(&self) -> MoleculeParams {
        if self.pure_rotor {
            self.molecule.without_spins()
        } else {
            self.molecule.clone()
        }
    }

    pub fn basis(&self) -> Basis {
        let mol = self.effective_molecule();
        build_basis(self.n_max, mol.spin_a, mol.spin_b)
    }

    /// Builds every term on `basis`. The Stark term is evaluated at the
    /// scenario's field strength.
    pub fn terms(&self, basis: &Basis) -> Result<HamiltonianTerms> {
        self.geometry.validate()?;
        let mol = self.effective_molecule();
        let (alpha_par, alpha_perp) = mol.alpha_at_wavelength(self.geometry.wavelength_nm)?;
        let dim = basis.len();
        let zeeman = if self.pure_rotor || self.geometry.b_mt == 0.0 {
            OperatorMatrix::zeros(dim)
        } else {
            h_zeeman(basis, mol.g_a, mol.g_b, &self.geometry.b_in_frame()?, self.geometry.b_mt)
        };
        let hf = if self.pure_rotor {
            OperatorMatrix::zeros(dim)
        } else {
            h_quadrupole(basis, mol.eqq_a, mol.eqq_b, mol.spin_a, mol.spin_b)
        };
        Ok(HamiltonianTerms {
            rot: h_rot(basis, mol.b_rot),
            hf,
            zeeman,
            stark: h_stark(basis, mol.dipole, self.geometry.e_kv_cm),
            pol: h_pol_operator(basis, alpha_par, alpha_perp, &self.geometry.polarization_in_frame()?),
        })
    }

    pub fn pendular_reference(&self) -> Result<PendularReference> {
        PendularReference::new(self.n_max, self.molecule.b_rot, stark_energy_scale(self.molecule.dipole, self.geometry.e_kv_cm))
    }

    /// Diagonalizes the full Hamiltonian and labels each eigenstate.
    pub fn evaluate(&self) -> Result<Evaluation> {
        let basis = self.basis();
        let terms = self.terms(&basis)?;
        let hamiltonian = terms.assemble(self.geometry.intensity)?;
        let spectrum = eigensolve(&hamiltonian)?;
        let alpha_au = dynamic_polarizability(&spectrum, &terms.pol).into_iter().map(alpha_in_au).collect();
        let labels = classify(&spectrum, &basis, &self.pendular_reference()?, self.fidelity_threshold);
        Ok(Evaluation { basis, terms, spectrum, alpha_au, labels })
    }

    /// Isotropic polarizability ᾱ (a.u.) at the scenario wavelength.
    pub fn alpha_bar(&self) -> Result<f64> {
        let (par, perp) = self.molecule.alpha_at_wavelength(self.geometry.wavelength_nm)?;
        Ok((par + 2.0 * perp) / 3.0)
    }
}

/// θ ∈ [0°, 180°) for which a polarization `(sin θ, 0, cos θ)` makes the
/// folded angle `psi_m_deg` with `e_direction`.
pub fn theta_for_psi_m(e_direction: [f64; 3], psi_m_deg: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&psi_m_deg) {
        return Err(Error::OutOfRange(format!("psi_m {psi_m_deg}° outside [0°, 90°]")));
    }
    let norm = e_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidGeometry("electric-field direction has zero length".into()));
    }
    let e = e_direction.map(|x| x / norm);
    // |cos ψ| = |e_x sin θ + e_z cos θ| = r |cos(θ - φ)| with φ the in-plane azimuth of ê
    let r = (e[0] * e[0] + e[2] * e[2]).sqrt();
    let target = psi_m_deg.to_radians().cos();
    if target > r + 1e-12 {
        return Err(Error::OutOfRange(format!(
            "psi_m {psi_m_deg}° unreachable with polarization in the xz plane for this field direction"
        )));
    }
    let phi = e[0].atan2(e[2]);
    let delta = (target / r).min(1.0).acos();
    let a = (phi + delta).to_degrees().rem_euclid(180.0);
    let b = (phi - delta).to_degrees().rem_euclid(180.0);
    Ok(a.min(b))
}

/// Eigenstates of one scenario with their polarizabilities (a.u.) and
/// pendular labels, all in ascending energy order.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub basis: Basis,
    pub terms: HamiltonianTerms,
    pub spectrum: Spectrum,
    pub alpha_au: Vec<f64>,
    pub labels: Vec<StateLabel>,
}
