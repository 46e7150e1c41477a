//! Rigid rotor in a static electric field, `H0 = B N^2 - d·E`.
//!
//! With the quantization axis along the field `m` is conserved and `H0` is a
//! symmetric tridiagonal matrix in `N` for each `m`. Its eigenstates are the
//! pendular states `|λ, m>`.

use crate::angular::{c_tensor_element, HalfInteger};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PendularState {
    pub lambda: u32,
    pub m: i32,
    /// h·MHz
    pub energy: f64,
    /// Amplitudes on `|N, m>` for `N = |m| ..= n_max`.
    pub amplitudes: Vec<f64>,
}

impl PendularState {
    /// Energy in units of the rotational constant.
    pub fn reduced_energy(&self, b_rot: f64) -> f64 {
        self.energy / b_rot
    }

    /// Amplitude on `|N, m>`, zero outside the truncated range.
    pub fn amplitude(&self, n: i32) -> f64 {
        let offset = n - self.m.abs();
        if offset < 0 {
            return 0.0;
        }
        self.amplitudes.get(offset as usize).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> i32 {
        self.m.abs() + self.amplitudes.len() as i32 - 1
    }
}

/// Diagonal and off-diagonal of `H0` for one `m`; `d_times_e` in h·MHz.
pub fn pendular_h0(n_max: u32, m: i32, b_rot: f64, d_times_e: f64) -> (Vec<f64>, Vec<f64>) {
    let n_max = n_max as i32;
    assert!(m.abs() <= n_max, "|m| = {} exceeds n_max = {n_max}", m.abs());
    let m2 = f64::from(m * m);
    let diag = (m.abs()..=n_max).map(|n| f64::from(n * (n + 1)) * b_rot).collect();
    let off = (m.abs()..n_max)
        .map(|n| {
            let n = f64::from(n);
            -d_times_e * (((n + 1.0) * (n + 1.0) - m2) / ((2.0 * n + 1.0) * (2.0 * n + 3.0))).sqrt()
        })
        .collect();
    (diag, off)
}

/// Eigenvalues (ascending) and eigenvectors (`vectors[k]` belongs to
/// `values[k]`) of a real symmetric tridiagonal matrix, by implicit QL.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    let mut d = diag.to_vec();
    let mut e: Vec<f64> = off.iter().copied().chain(std::iter::once(0.0)).collect();
    e.truncate(n);
    // z[i][k]: component i of eigenvector k
    let mut z: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| if i == k { 1.0 } else { 0.0 }).collect()).collect();

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::Eigensolver("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = z.iter().map(|row| row[k]).collect();
            // largest component positive
            let (imax, _) = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 + 1e-14 { (i, x.abs()) } else { acc });
            if v.get(imax).copied().unwrap_or(0.0) < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Pendular states of one `m`, ordered by `λ`. `λ` starts at `|m|` so that
/// it reduces to `N` at zero field.
pub fn pendular_states_for_m(n_max: u32, m: i32, b_rot: f64, d_times_e: f64) -> Result<Vec<PendularState>> {
    let (diag, off) = pendular_h0(n_max, m, b_rot, d_times_e);
    let (values, vectors) = tridiagonal_eigen(&diag, &off)?;
    Ok(values
        .into_iter()
        .zip(vectors)
        .enumerate()
        .map(|(k, (energy, amplitudes))| PendularState { lambda: m.unsigned_abs() + k as u32, m, energy, amplitudes })
        .collect())
}

/// Pendular states for every `m` in `-n_max ..= n_max`.
pub fn pendular_spectrum(n_max: u32, b_rot: f64, d_times_e: f64) -> Result<Vec<PendularState>> {
    let mut out = Vec::new();
    for m in -(n_max as i32)..=n_max as i32 {
        out.extend(pendular_states_for_m(n_max, m, b_rot, d_times_e)?);
    }
    Ok(out)
}

/// `<λ, m| C_20 |λ, m>`.
pub fn pendular_c20(state: &PendularState) -> f64 {
    let m = state.m;
    let mh = HalfInteger::integer(m);
    let mut sum = 0.0;
    for n in m.abs()..=state.n_max() {
        let a = state.amplitude(n);
        if a == 0.0 {
            continue;
        }
        for n2 in [n - 2, n, n + 2] {
            if n2 < m.abs() || n2 > state.n_max() {
                continue;
            }
            let c = c_tensor_element(HalfInteger::integer(n), mh, 2, 0, HalfInteger::integer(n2), mh);
            sum += a * c * state.amplitude(n2);
        }
    }
    sum
}

/// `<C_20>` of `|λ=1,m=0>` minus that of `|λ=0,m=0>` at reduced field `omega = d·E/B`.
pub fn c20_gap(n_max: u32, omega: f64) -> Result<f64> {
    let states = pendular_states_for_m(n_max, 0, 1.0, omega)?;
    Ok(pendular_c20(&states[1]) - pendular_c20(&states[0]))
}

/// Reduced field where `|0,0>` and `|1,0>` share the same `<C_20>`, found by
/// bisection inside `[lo, hi]` until the bracket is narrower than `tol`.
pub fn c20_crossing_omega(n_max: u32, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if n_max < 1 {
        return Err(Error::OutOfRange("crossing needs n_max >= 1".into()));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = c20_gap(n_max, lo)?;
    let f_hi = c20_gap(n_max, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = c20_gap(n_max, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const B: f64 = 2821.7297;

    #[test]
    fn zero_field_is_rigid_rotor() {
        let (diag, off) = pendular_h0(4, 0, B, 0.0);
        assert!(off.iter().all(|&x| x == 0.0));
        assert_eq!(diag[2], 6.0 * B);
        for s in pendular_spectrum(4, B, 0.0).unwrap() {
            let l = f64::from(s.lambda);
            assert_abs_diff_eq!(s.energy, l * (l + 1.0) * B, epsilon = 1e-9);
        }
    }

    #[test]
    fn first_coupling() {
        let (_, off) = pendular_h0(3, 0, B, 100.0);
        assert_abs_diff_eq!(off[0], -100.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(pendular_h0(3, 1, B, 100.0), pendular_h0(3, -1, B, 100.0));
    }

    #[test]
    fn ql_matches_two_by_two_closed_form() {
        let c = 0.7;
        let (values, vectors) = tridiagonal_eigen(&[0.0, 2.0], &[c]).unwrap();
        assert_abs_diff_eq!(values[0], 1.0 - (1.0f64 + c * c).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(values[1], 1.0 + (1.0f64 + c * c).sqrt(), epsilon = 1e-14);
        let dot: f64 = vectors[0].iter().zip(&vectors[1]).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ql_residuals_are_small() {
        let diag: Vec<f64> = (0..9).map(|n| f64::from(n * (n + 1))).collect();
        let off: Vec<f64> = (0..8).map(|k| -3.0 / f64::from(k + 1)).collect();
        let (values, vectors) = tridiagonal_eigen(&diag, &off).unwrap();
        for (val, v) in values.iter().zip(&vectors) {
            for i in 0..diag.len() {
                let mut hv = diag[i] * v[i];
                if i > 0 {
                    hv += off[i - 1] * v[i - 1];
                }
                if i + 1 < diag.len() {
                    hv += off[i] * v[i + 1];
                }
                assert_abs_diff_eq!(hv, val * v[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn small_field_second_order() {
        let de = 0.01 * B;
        let s = pendular_states_for_m(6, 0, B, de).unwrap();
        let pt2 = -de * de / (6.0 * B);
        assert!((s[0].energy - pt2).abs() < 1e-3 * pt2.abs());
    }

    #[test]
    fn field_splits_m_levels() {
        let s = pendular_spectrum(5, B, 2.0 * B).unwrap();
        let find = |lambda, m| s.iter().find(|p| p.lambda == lambda && p.m == m).unwrap().energy;
        assert!((find(1, 0) - find(1, 1)).abs() > 0.1 * B);
        assert_eq!(find(1, 1), find(1, -1));
    }

    #[test]
    fn c20_values() {
        let s = pendular_states_for_m(5, 0, B, 0.0).unwrap();
        assert_abs_diff_eq!(pendular_c20(&s[0]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pendular_c20(&s[1]), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn c20_crossing_near_two_and_a_half() {
        let omega = c20_crossing_omega(8, 1.0, 4.0, 1e-10).unwrap();
        assert!((omega - 2.554).abs() < 5e-3, "{omega}");
        // NaK field: omega * B / (d * 1279.53)
        let field = omega * B / (1.07 * 1279.53);
        assert!((field - 5.265).abs() / 5.265 < 5e-3, "{field}");
    }

    #[test]
    fn ground_energy_variational_in_n_max() {
        for omega in [0.5, 1.0, 2.5, 4.0] {
            let e: Vec<f64> = (1..=8)
                .map(|n| pendular_states_for_m(n, 0, B, omega * B).unwrap()[0].energy)
                .collect();
            for w in e.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * B);
            }
            assert!((e[4] - e[7]).abs() < 1e-6 * B);
        }
    }

    #[test]
    fn orientation_saturates_monotonically() {
        let mut last = -1.0;
        for k in 0..40 {
            let omega = 0.5 * f64::from(k);
            let c = pendular_c20(&pendular_states_for_m(24, 0, 1.0, omega).unwrap()[0]);
            assert!(c > last - 1e-12, "omega {omega}: {c} < {last}");
            assert!(c <= 1.0);
            last = c;
        }
        assert!(last > 0.55 && last < 0.65);
    }
}
