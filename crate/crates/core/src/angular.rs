//! Angular-momentum algebra in the Condon–Shortley convention.
//!
//! Quantum numbers are stored doubled ([`HalfInteger`]) so that half-integer
//! nuclear spins are represented exactly. Wigner 3j symbols are evaluated with
//! the Racah sum in exact rational arithmetic and rounded once at the end.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A value in `{..., -1, -1/2, 0, 1/2, 1, ...}` stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct HalfInteger {
    twice: i32,
}

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger { twice: 0 };

    pub const fn from_twice(twice: i32) -> Self {
        HalfInteger { twice }
    }

    pub const fn integer(value: i32) -> Self {
        HalfInteger { twice: 2 * value }
    }

    /// Converts a float that must lie on the half-integer lattice.
    pub fn from_f64(value: f64) -> Option<Self> {
        let twice = 2.0 * value;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 {
            return None;
        }
        Some(HalfInteger::from_twice(twice.round() as i32))
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// `Some(n)` when the value is an integer.
    pub const fn as_integer(self) -> Option<i32> {
        if self.twice % 2 == 0 {
            Some(self.twice / 2)
        } else {
            None
        }
    }

    /// Number of projections `2j + 1`.
    pub const fn multiplicity(self) -> usize {
        (self.twice + 1) as usize
    }

    /// Projections `-j, -j+1, ..., j` in ascending order.
    pub fn projections(self) -> impl Iterator<Item = HalfInteger> + Clone {
        let j = self.twice;
        (0..=j).map(move |k| HalfInteger::from_twice(-j + 2 * k))
    }

    /// True when `m` is a valid projection of `self`.
    pub const fn admits(self, m: HalfInteger) -> bool {
        m.twice.abs() <= self.twice && (self.twice - m.twice) % 2 == 0
    }
}

impl Add for HalfInteger {
    type Output = HalfInteger;
    fn add(self, rhs: Self) -> Self {
        HalfInteger::from_twice(self.twice + rhs.twice)
    }
}

impl Sub for HalfInteger {
    type Output = HalfInteger;
    fn sub(self, rhs: Self) -> Self {
        HalfInteger::from_twice(self.twice - rhs.twice)
    }
}

impl Neg for HalfInteger {
    type Output = HalfInteger;
    fn neg(self) -> Self {
        HalfInteger::from_twice(-self.twice)
    }
}

impl From<i32> for HalfInteger {
    fn from(value: i32) -> Self {
        HalfInteger::integer(value)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for HalfInteger {
    type Err = String;

    /// Accepts `"3"`, `"3/2"`, `"1.5"`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|_| format!("invalid numerator in {s:?}"))?;
            match den.trim() {
                "1" => Ok(HalfInteger::integer(num)),
                "2" => Ok(HalfInteger::from_twice(num)),
                _ => Err(format!("{s:?} is not a half-integer")),
            }
        } else {
            let value: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
            HalfInteger::from_f64(value).ok_or_else(|| format!("{s:?} is not a half-integer"))
        }
    }
}

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    (2..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Returns exactly zero whenever a selection rule fails.
pub fn wigner3j(
    j1: HalfInteger,
    j2: HalfInteger,
    j3: HalfInteger,
    m1: HalfInteger,
    m2: HalfInteger,
    m3: HalfInteger,
) -> f64 {
    let (tj1, tj2, tj3) = (j1.twice(), j2.twice(), j3.twice());
    let (tm1, tm2, tm3) = (m1.twice(), m2.twice(), m3.twice());

    if tj1 < 0 || tj2 < 0 || tj3 < 0 {
        return 0.0;
    }
    if tm1 + tm2 + tm3 != 0 {
        return 0.0;
    }
    if !j1.admits(m1) || !j2.admits(m2) || !j3.admits(m3) {
        return 0.0;
    }
    if tj3 > tj1 + tj2 || tj3 < (tj1 - tj2).abs() || (tj1 + tj2 + tj3) % 2 != 0 {
        return 0.0;
    }

    // all halved arguments below are integers once the checks above pass
    let a = (tj1 + tj2 - tj3) / 2;
    let b = (tj1 - tj2 + tj3) / 2;
    let c = (-tj1 + tj2 + tj3) / 2;
    let total = (tj1 + tj2 + tj3) / 2;

    let triangle_num = factorial(a) * factorial(b) * factorial(c);
    let triangle_den = factorial(total + 1);
    let proj = factorial((tj1 + tm1) / 2)
        * factorial((tj1 - tm1) / 2)
        * factorial((tj2 + tm2) / 2)
        * factorial((tj2 - tm2) / 2)
        * factorial((tj3 + tm3) / 2)
        * factorial((tj3 - tm3) / 2);
    let prefactor_sq = BigRational::new(triangle_num * proj, triangle_den);

    let k_min = 0.max((tj2 - tj3 - tm1) / 2).max((tj1 - tj3 + tm2) / 2);
    let k_max = a.min((tj1 - tm1) / 2).min((tj2 + tm2) / 2);

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial((tj3 - tj2 + tm1) / 2 + k)
            * factorial((tj3 - tj1 - tm2) / 2 + k)
            * factorial(a - k)
            * factorial((tj1 - tm1) / 2 - k)
            * factorial((tj2 + tm2) / 2 - k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }

    let phase_exp = (tj1 - tj2 - tm3) / 2;
    let mut sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    if sum.is_negative() {
        sign = -sign;
    }
    let squared = prefactor_sq * &sum * &sum;
    sign * squared.to_f64().unwrap_or(f64::NAN).sqrt()
}

/// `<N m | C_kq | N' m'>` for integer rotor states.
pub fn c_tensor_element(n: HalfInteger, m: HalfInteger, k: i32, q: i32, n2: HalfInteger, m2: HalfInteger) -> f64 {
    if m.twice() != 2 * q + m2.twice() {
        return 0.0;
    }
    let kk = HalfInteger::integer(k);
    let reduced = wigner3j(n, kk, n2, HalfInteger::ZERO, HalfInteger::ZERO, HalfInteger::ZERO);
    if reduced == 0.0 {
        return 0.0;
    }
    let phase = if (m.twice() / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let dims = (f64::from(n.twice() + 1) * f64::from(n2.twice() + 1)).sqrt();
    phase * dims * reduced * wigner3j(n, kk, n2, -m, HalfInteger::integer(q), m2)
}

/// `<I m | T_2q(I, I) | I m2>` for the rank-2 tensor built from one spin.
pub fn spin_tensor_element(spin: HalfInteger, m: HalfInteger, q: i32, m2: HalfInteger) -> f64 {
    if !spin.admits(m) || !spin.admits(m2) || m.twice() != m2.twice() + 2 * q {
        return 0.0;
    }
    let i = spin.value();
    let mk = m2.value();
    // <mk + 1 | I_+ | mk>
    let raise = |mk: f64| ((i - mk) * (i + mk + 1.0)).max(0.0).sqrt();
    // <mk - 1 | I_- | mk>
    let lower = |mk: f64| ((i + mk) * (i - mk + 1.0)).max(0.0).sqrt();
    match q {
        0 => (3.0 * mk * mk - i * (i + 1.0)) / 6f64.sqrt(),
        1 => -((mk + 1.0) + mk) * raise(mk) / 2.0,
        -1 => ((mk - 1.0) + mk) * lower(mk) / 2.0,
        2 => raise(mk) * raise(mk + 1.0) / 2.0,
        -2 => lower(mk) * lower(mk - 1.0) / 2.0,
        _ => 0.0,
    }
}

/// Spherical components `(v_-1, v_0, v_+1)` of a direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalVector {
    pub q_minus1: Complex64,
    pub q_0: Complex64,
    pub q_plus1: Complex64,
}

impl SphericalVector {
    /// Component `v_q` for `q` in `-1..=1`.
    pub fn get(&self, q: i32) -> Complex64 {
        match q {
            -1 => self.q_minus1,
            0 => self.q_0,
            1 => self.q_plus1,
            _ => Complex64::zero(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.q_minus1.norm_sqr() + self.q_0.norm_sqr() + self.q_plus1.norm_sqr()
    }
}

/// Spherical decomposition of a real unit vector.
pub fn spherical_components(v: [f64; 3]) -> Result<SphericalVector> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidGeometry(format!(
            "direction {v:?} is not normalized (|v| = {norm})"
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(SphericalVector {
        q_minus1: Complex64::new(v[0], -v[1]) * s,
        q_0: Complex64::new(v[2], 0.0),
        q_plus1: -Complex64::new(v[0], v[1]) * s,
    })
}

/// Rank-2 part of `eps ⊗ eps`, components `t_q` for `q = -2..=2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarizationTensor {
    components: [Complex64; 5],
}

impl PolarizationTensor {
    pub fn get(&self, q: i32) -> Complex64 {
        if (-2..=2).contains(&q) {
            self.components[(q + 2) as usize]
        } else {
            Complex64::zero()
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Clebsch–Gordan `<1 q1 1 q2 | 2 q>`.
fn cg_11_2(q1: i32, q2: i32) -> f64 {
    let one = HalfInteger::integer(1);
    let two = HalfInteger::integer(2);
    let q = q1 + q2;
    // <j1 m1 j2 m2|J M> = (-1)^(j1-j2+M) sqrt(2J+1) 3j(j1 j2 J; m1 m2 -M)
    let phase = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase
        * 5f64.sqrt()
        * wigner3j(one, one, two, HalfInteger::integer(q1), HalfInteger::integer(q2), HalfInteger::integer(-q))
}

pub fn polarization_tensor(eps: &SphericalVector) -> PolarizationTensor {
    let mut components = [Complex64::zero(); 5];
    for (idx, slot) in components.iter_mut().enumerate() {
        let q = idx as i32 - 2;
        for q1 in -1..=1 {
            let q2 = q - q1;
            if !(-1..=1).contains(&q2) {
                continue;
            }
            *slot += eps.get(q1) * eps.get(q2) * cg_11_2(q1, q2);
        }
    }
    PolarizationTensor { components }
}

/// Proper rotation whose rows are the frame axes expressed in lab coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    rows: [[f64; 3]; 3],
}

impl Frame {
    pub const IDENTITY: Frame = Frame {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn axes(&self) -> &[[f64; 3]; 3] {
        &self.rows
    }

    /// Lab-frame vector expressed in frame coordinates.
    pub fn to_frame(&self, v: [f64; 3]) -> [f64; 3] {
        let r = &self.rows;
        [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn normalize(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot(v, v).sqrt();
    if n == 0.0 || !n.is_finite() {
        None
    } else {
        Some([v[0] / n, v[1] / n, v[2] / n])
    }
}

/// Frame with its third axis along `direction`.
///
/// The frame x axis lies in the plane spanned by `direction` and lab z; when
/// `direction` is parallel to lab z the frame coincides with the lab (up to
/// the sign of z).
pub fn build_frame(direction: [f64; 3]) -> Result<Frame> {
    let z = normalize(direction)
        .ok_or_else(|| Error::InvalidGeometry("quantization direction has zero length".into()))?;
    let lab_z = [0.0, 0.0, 1.0];
    let along = dot(lab_z, z);
    let perp = [lab_z[0] - along * z[0], lab_z[1] - along * z[1], lab_z[2] - along * z[2]];
    if dot(perp, perp).sqrt() < 1e-12 {
        if along > 0.0 {
            return Ok(Frame::IDENTITY);
        }
        // antiparallel: rotate by pi about lab x
        return Ok(Frame {
            rows: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
        });
    }
    let x = normalize(perp).expect("nonzero perpendicular component");
    let y = cross(z, x);
    Ok(Frame { rows: [x, y, z] })
}
