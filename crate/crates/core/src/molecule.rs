//! Molecular constants, unit conversions and the dispersion of the
//! body-frame polarizabilities.
//!
//! Energies are carried in h·MHz, static fields in kV/cm and mT, laser
//! intensities in kW/cm², polarizabilities in atomic units `(e a0)^2 / E_h`.

use std::fmt::Write as _;

use crate::angular::HalfInteger;
use crate::error::{Error, Result};

/// Fixed conversion factors.
pub struct UnitConstants;

impl UnitConstants {
    /// Light shift per unit intensity of one atomic unit of polarizability,
    /// in MHz per (W/cm²).
    pub const AU_POL_TO_MHZ_PER_W_CM2: f64 = 4.68645e-8;
    /// Same, in MHz per (kW/cm²).
    pub const AU_POL_TO_MHZ_PER_KW_CM2: f64 = 4.68645e-5;
    /// `e a0 × 1 kV/cm / h` in MHz.
    pub const EA0_KVCM_TO_MHZ: f64 = 1279.53;
    /// Nuclear magneton over h, MHz per mT.
    pub const NUCLEAR_MAGNETON_MHZ_PER_MT: f64 = 7.622593e-3;
}

/// Default upper end of the validated frequency range, cm⁻¹.
pub const DEFAULT_TRUST_MAX_NU: f64 = 21000.0;

/// Vacuum wavelength in nm to wavenumber in cm⁻¹.
pub fn wavenumber_from_nm(wavelength_nm: f64) -> f64 {
    1.0e7 / wavelength_nm
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleTerm {
    /// Static contribution, atomic units.
    pub amplitude: f64,
    /// Pole position, cm⁻¹.
    pub pole: f64,
}

/// Pole expansion `α(ν) = Σ_j A_j / (1 - (ν/ν_j)²)` for both body-frame axes.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionFit {
    pub terms_parallel: Vec<PoleTerm>,
    pub terms_perpendicular: Vec<PoleTerm>,
    pub trust_max_nu: f64,
}

impl DispersionFit {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.terms_parallel.is_empty() || self.terms_perpendicular.is_empty() {
            return Err("both polarizability components need at least one term".into());
        }
        for t in self.terms_parallel.iter().chain(&self.terms_perpendicular) {
            if !(t.pole > 0.0) || !(t.amplitude > 0.0) {
                return Err(format!("term ({}, {}) must have positive amplitude and pole", t.amplitude, t.pole));
            }
        }
        if !(self.trust_max_nu > 0.0) {
            return Err("trust_max_nu must be positive".into());
        }
        Ok(())
    }
}

/// Parallel and perpendicular polarizabilities at wavenumber `nu` (cm⁻¹),
/// in atomic units.
pub fn alpha_dispersion(fit: &DispersionFit, nu: f64) -> Result<(f64, f64)> {
    if !(nu >= 0.0) || nu > fit.trust_max_nu {
        return Err(Error::OutOfRange(format!(
            "wavenumber {nu} cm^-1 outside the validated range [0, {}]",
            fit.trust_max_nu
        )));
    }
    let sum = |terms: &[PoleTerm]| -> Result<f64> {
        let mut total = 0.0;
        for t in terms {
            let ratio = nu / t.pole;
            if (1.0 - ratio).abs() < 0.01 {
                return Err(Error::OutOfRange(format!(
                    "wavenumber {nu} cm^-1 within 1% of the pole at {} cm^-1",
                    t.pole
                )));
            }
            total += t.amplitude / (1.0 - ratio * ratio);
        }
        Ok(total)
    };
    Ok((sum(&fit.terms_parallel)?, sum(&fit.terms_perpendicular)?))
}

/// Light-shift rate in h·MHz per (kW/cm²) of a polarizability in atomic units.
pub fn alpha_in_mhz_per_kw_cm2(alpha_au: f64) -> f64 {
    alpha_au * UnitConstants::AU_POL_TO_MHZ_PER_KW_CM2
}

/// Inverse of [`alpha_in_mhz_per_kw_cm2`].
pub fn alpha_in_au(alpha_mhz_per_kw_cm2: f64) -> f64 {
    alpha_mhz_per_kw_cm2 / UnitConstants::AU_POL_TO_MHZ_PER_KW_CM2
}

/// `d·E` in h·MHz for a dipole in e·a0 and a field in kV/cm.
pub fn stark_energy_scale(dipole_ea0: f64, field_kv_cm: f64) -> f64 {
    dipole_ea0 * field_kv_cm * UnitConstants::EA0_KVCM_TO_MHZ
}

/// Constants of one ¹Σ⁺ diatomic molecule.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeParams {
    pub name: String,
    /// Rotational constant, h·MHz.
    pub b_rot: f64,
    /// Permanent dipole, e·a0.
    pub dipole: f64,
    pub spin_a: HalfInteger,
    pub spin_b: HalfInteger,
    /// Quadrupole coupling constants, h·MHz.
    pub eqq_a: f64,
    pub eqq_b: f64,
    /// Nuclear g-factors (nuclear magneton units).
    pub g_a: f64,
    pub g_b: f64,
    pub dispersion: DispersionFit,
}

const NAK_CONFIG: &str = include_str!("../data/nak.cfg");

impl MoleculeParams {
    /// Built-in ²³Na⁴⁰K constants.
    pub fn nak() -> Self {
        parse_molecule_config(NAK_CONFIG).expect("bundled NaK config is valid")
    }

    /// The bundled NaK config text.
    pub fn nak_config_text() -> &'static str {
        NAK_CONFIG
    }

    /// Polarizabilities (a.u.) at a laser wavelength in nm.
    pub fn alpha_at_wavelength(&self, wavelength_nm: f64) -> Result<(f64, f64)> {
        if !(wavelength_nm > 0.0) {
            return Err(Error::OutOfRange(format!("wavelength {wavelength_nm} nm must be positive")));
        }
        alpha_dispersion(&self.dispersion, wavenumber_from_nm(wavelength_nm))
    }

    /// Same molecule with both nuclear spins removed.
    pub fn without_spins(&self) -> Self {
        MoleculeParams {
            spin_a: HalfInteger::ZERO,
            spin_b: HalfInteger::ZERO,
            eqq_a: 0.0,
            eqq_b: 0.0,
            g_a: 0.0,
            g_b: 0.0,
            ..self.clone()
        }
    }

    /// Serializes to the sectioned key–value format read by
    /// [`parse_molecule_config`].
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[molecule]");
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "b_rot_mhz = {}", self.b_rot);
        let _ = writeln!(out, "dipole_ea0 = {}", self.dipole);
        let _ = writeln!(out, "spin_a = {}", self.spin_a);
        let _ = writeln!(out, "spin_b = {}", self.spin_b);
        let _ = writeln!(out, "eqq_a_mhz = {}", self.eqq_a);
        let _ = writeln!(out, "eqq_b_mhz = {}", self.eqq_b);
        let _ = writeln!(out, "g_a = {}", self.g_a);
        let _ = writeln!(out, "g_b = {}", self.g_b);
        let _ = writeln!(out, "[alpha_parallel]");
        for t in &self.dispersion.terms_parallel {
            let _ = writeln!(out, "term = {}, {}", t.amplitude, t.pole);
        }
        let _ = writeln!(out, "[alpha_perpendicular]");
        for t in &self.dispersion.terms_perpendicular {
            let _ = writeln!(out, "term = {}, {}", t.amplitude, t.pole);
        }
        let _ = writeln!(out, "trust_max_nu = {}", self.dispersion.trust_max_nu);
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Molecule,
    Parallel,
    Perpendicular,
}

/// Parses the molecule config format:
///
/// ```text
/// [molecule]
/// name = 23Na40K
/// b_rot_mhz = 2821.7297
/// ...
/// [alpha_parallel]
/// term = 495.192, 13322.2
/// ```
///
/// `#` starts a comment. `trust_max_nu` may appear in either polarizability
/// section and defaults to 21000 cm⁻¹.
pub fn parse_molecule_config(text: &str) -> Result<MoleculeParams> {
    let parse_err = |line: usize, key: &str, message: String| Error::Parse {
        line,
        key: key.to_string(),
        message,
    };

    let mut section = Section::None;
    let mut name: Option<String> = None;
    let mut scalars: [(&str, Option<f64>); 7] = [
        ("b_rot_mhz", None),
        ("dipole_ea0", None),
        ("eqq_a_mhz", None),
        ("eqq_b_mhz", None),
        ("g_a", None),
        ("g_b", None),
        ("trust_max_nu", None),
    ];
    let mut spins: [(&str, Option<HalfInteger>); 2] = [("spin_a", None), ("spin_b", None)];
    let mut parallel = Vec::new();
    let mut perpendicular = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let header = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(lineno, line, "unterminated section header".into()))?
                .trim();
            section = match header {
                "molecule" => Section::Molecule,
                "alpha_parallel" => Section::Parallel,
                "alpha_perpendicular" => Section::Perpendicular,
                other => return Err(parse_err(lineno, other, "unknown section".into())),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, line, "expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());

        let number = |s: &str| -> Result<f64> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, key, format!("`{}` is not a number", s.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(lineno, key, format!("`{}` is not finite", s.trim())))
            }
        };

        match (section, key) {
            (Section::None, _) => {
                return Err(parse_err(lineno, key, "key outside of any section".into()));
            }
            (Section::Molecule, "name") => {
                if value.is_empty() {
                    return Err(parse_err(lineno, key, "name must be nonempty".into()));
                }
                name = Some(value.to_string());
            }
            (Section::Molecule, "spin_a" | "spin_b") => {
                let spin: HalfInteger = value
                    .parse()
                    .map_err(|_| parse_err(lineno, key, "spin must be half-integer".into()))?;
                if spin.twice() < 0 {
                    return Err(parse_err(lineno, key, "spin must be non-negative".into()));
                }
                let slot = spins.iter_mut().find(|(k, _)| *k == key).expect("known spin key");
                slot.1 = Some(spin);
            }
            (Section::Parallel | Section::Perpendicular, "term") => {
                let (a, p) = value
                    .split_once(',')
                    .ok_or_else(|| parse_err(lineno, key, "expected `amplitude, pole`".into()))?;
                let term = PoleTerm { amplitude: number(a)?, pole: number(p)? };
                if section == Section::Parallel {
                    parallel.push(term);
                } else {
                    perpendicular.push(term);
                }
            }
            (Section::Parallel | Section::Perpendicular, "trust_max_nu")
            | (
                Section::Molecule,
                "b_rot_mhz" | "dipole_ea0" | "eqq_a_mhz" | "eqq_b_mhz" | "g_a" | "g_b",
            ) => {
                let v = number(value)?;
                let slot = scalars.iter_mut().find(|(k, _)| *k == key).expect("known scalar key");
                slot.1 = Some(v);
            }
            (_, other) => return Err(parse_err(lineno, other, "unknown key".into())),
        }
    }

    let missing = |key: &str| parse_err(last_line, key, "missing required key".into());
    let scalar = |key: &str| -> Result<f64> {
        scalars
            .iter()
            .find(|(k, _)| *k == key)
            .and_then(|(_, v)| *v)
            .ok_or_else(|| missing(key))
    };
    let spin = |key: &str| -> Result<HalfInteger> {
        spins
            .iter()
            .find(|(k, _)| *k == key)
            .and_then(|(_, v)| *v)
            .ok_or_else(|| missing(key))
    };

    let params = MoleculeParams {
        name: name.ok_or_else(|| missing("name"))?,
        b_rot: scalar("b_rot_mhz")?,
        dipole: scalar("dipole_ea0")?,
        spin_a: spin("spin_a")?,
        spin_b: spin("spin_b")?,
        eqq_a: scalar("eqq_a_mhz")?,
        eqq_b: scalar("eqq_b_mhz")?,
        g_a: scalar("g_a")?,
        g_b: scalar("g_b")?,
        dispersion: DispersionFit {
            terms_parallel: parallel,
            terms_perpendicular: perpendicular,
            trust_max_nu: scalar("trust_max_nu").unwrap_or(DEFAULT_TRUST_MAX_NU),
        },
    };
    if !(params.b_rot > 0.0) {
        return Err(parse_err(last_line, "b_rot_mhz", "rotational constant must be positive".into()));
    }
    params
        .dispersion
        .validate()
        .map_err(|m| parse_err(last_line, "term", m))?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn nak_constants() {
        let nak = MoleculeParams::nak();
        assert_eq!(nak.b_rot, 2821.7297);
        assert_eq!(nak.spin_a, HalfInteger::from_twice(3));
        assert_eq!(nak.spin_b, HalfInteger::integer(4));
        assert_eq!(nak.dispersion.terms_parallel.len(), 2);
        assert_eq!(nak.dispersion.trust_max_nu, 21000.0);
    }

    #[test]
    fn rejects_fractional_spin() {
        let text = MoleculeParams::nak_config_text().replace("spin_a = 3/2", "spin_a = 1.4");
        let err = parse_molecule_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("spin must be half-integer"), "{msg}");
        assert!(msg.contains("spin_a"), "{msg}");
    }

    #[test]
    fn names_missing_key() {
        let text: String = MoleculeParams::nak_config_text()
            .lines()
            .filter(|l| !l.starts_with("g_b"))
            .map(|l| format!("{l}\n"))
            .collect();
        match parse_molecule_config(&text).unwrap_err() {
            Error::Parse { key, .. } => assert_eq!(key, "g_b"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn reports_line_of_bad_number() {
        let text = MoleculeParams::nak_config_text().replace("dipole_ea0 = 1.07", "dipole_ea0 = one");
        match parse_molecule_config(&text).unwrap_err() {
            Error::Parse { key, line, .. } => {
                assert_eq!(key, "dipole_ea0");
                assert_eq!(line, 5);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn decimal_spin_accepted() {
        let text = MoleculeParams::nak_config_text().replace("spin_a = 3/2", "spin_a = 1.5");
        assert_eq!(parse_molecule_config(&text).unwrap(), MoleculeParams::nak());
    }

    #[test]
    fn static_and_1064_polarizabilities() {
        let nak = MoleculeParams::nak();
        let (par, perp) = alpha_dispersion(&nak.dispersion, 0.0).unwrap();
        assert_relative_eq!(par, 516.5722, max_relative = 1e-12);
        assert_relative_eq!(perp, 263.3458, max_relative = 1e-12);
        let iso = (par + 2.0 * perp) / 3.0;
        assert!((iso - 348.0).abs() / 348.0 < 3e-3);

        let (par, perp) = nak.alpha_at_wavelength(1064.0).unwrap();
        assert!((par - 1013.4).abs() / 1013.4 < 1e-3, "{par}");
        assert!((perp - 361.46).abs() / 361.46 < 1e-3, "{perp}");
    }

    #[test]
    fn pole_and_range_errors() {
        let fit = MoleculeParams::nak().dispersion;
        assert!(alpha_dispersion(&fit, 13322.2).is_err());
        assert!(alpha_dispersion(&fit, 13322.2 * 1.005).is_err());
        assert!(alpha_dispersion(&fit, 22000.0).is_err());
        assert!(alpha_dispersion(&fit, -1.0).is_err());
    }

    #[test]
    fn unit_conversions() {
        assert_relative_eq!(alpha_in_mhz_per_kw_cm2(1013.4), 0.047493, max_relative = 1e-4);
        assert_eq!(alpha_in_mhz_per_kw_cm2(0.0), 0.0);
        let iso = (1013.4 + 2.0 * 361.46) / 3.0;
        assert_relative_eq!(alpha_in_mhz_per_kw_cm2(iso), 0.027124, max_relative = 1e-4);
        assert_relative_eq!(stark_energy_scale(1.07, 1.0), 1369.10, max_relative = 1e-5);
        assert_eq!(stark_energy_scale(3.0, 0.0), 0.0);
        let ratio = stark_energy_scale(1.07, 5.265) / 2821.7297;
        assert_relative_eq!(ratio, 2.5546, max_relative = 1e-4);
    }

    #[test]
    fn conversion_constants_follow_from_si() {
        // CODATA 2018
        let h = 6.626_070_15e-34;
        let e: f64 = 1.602_176_634e-19;
        let a0 = 5.291_772_109_03e-11;
        let hartree = 4.359_744_722_2071e-18;
        let eps0 = 8.854_187_8128e-12;
        let c = 299_792_458.0;
        let au_pol = (e * a0).powi(2) / hartree;
        // shift of 1 a.u. at 1 W/cm^2 = 1e4 W/m^2, field amplitude^2 / 4
        let light_shift = au_pol * 1.0e4 / (2.0 * eps0 * c) / h / 1.0e6;
        assert!((light_shift / UnitConstants::AU_POL_TO_MHZ_PER_W_CM2 - 1.0).abs() < 5e-4);
        let stark = e * a0 * 1.0e5 / h / 1.0e6;
        assert_relative_eq!(stark, UnitConstants::EA0_KVCM_TO_MHZ, max_relative = 2e-5);
        let mu_n = 5.050_783_7461e-27;
        assert_relative_eq!(mu_n * 1e-3 / h / 1e6, UnitConstants::NUCLEAR_MAGNETON_MHZ_PER_MT, max_relative = 1e-6);
    }

    proptest! {
        #[test]
        fn dispersion_even_in_nu(nu in 0.0f64..12000.0) {
            let fit = MoleculeParams::nak().dispersion;
            let plus = alpha_dispersion(&fit, nu).unwrap();
            let f = |terms: &[PoleTerm], v: f64| terms.iter().map(|t| t.amplitude / (1.0 - (v / t.pole).powi(2))).sum::<f64>();
            prop_assert!((f(&fit.terms_parallel, -nu) - plus.0).abs() <= 1e-12 * plus.0);
            prop_assert!((f(&fit.terms_perpendicular, -nu) - plus.1).abs() <= 1e-12 * plus.1);
        }

        #[test]
        fn dispersion_increases_below_first_pole(a in 0.0f64..11990.0, b in 0.0f64..11990.0) {
            let fit = MoleculeParams::nak().dispersion;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            let x = alpha_dispersion(&fit, lo).unwrap();
            let y = alpha_dispersion(&fit, hi).unwrap();
            prop_assert!(y.0 > x.0 && y.1 > x.1);
        }

        #[test]
        fn config_round_trip(b in 1.0f64..1.0e5, d in 0.0f64..10.0, twice_a in 0i32..10, twice_b in 0i32..10,
                             eqq in -5.0f64..5.0, g in -3.0f64..3.0) {
            let mut params = MoleculeParams::nak();
            params.b_rot = b;
            params.dipole = d;
            params.spin_a = HalfInteger::from_twice(twice_a);
            params.spin_b = HalfInteger::from_twice(twice_b);
            params.eqq_a = eqq;
            params.g_b = g;
            let back = parse_molecule_config(&params.to_config_text()).unwrap();
            prop_assert_eq!(back, params);
        }
    }
}
