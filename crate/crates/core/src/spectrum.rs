//! Eigensolution of the assembled Hamiltonian, Hellmann–Feynman dynamic
//! polarizabilities, pendular classification and adiabatic tracking.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{Basis, OperatorMatrix};
use crate::pendular::{pendular_spectrum, PendularState};

/// Eigenvalues closer than this (h·MHz) are treated as one degenerate cluster.
pub const DEGENERACY_GAP_MHZ: f64 = 1e-6;

/// Hermiticity tolerance accepted by [`eigensolve`].
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;

/// Ascending eigenvalues (h·MHz) and orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> faer::ColRef<'_, Complex64> {
        self.eigenvectors.col(i)
    }

    /// The lowest `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> Spectrum {
        let k = k.min(self.len());
        let n = self.eigenvectors.nrows();
        Spectrum {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: Mat::from_fn(n, k, |i, j| self.eigenvectors[(i, j)]),
        }
    }

    /// `max_i ||H v_i - E_i v_i||`.
    pub fn max_residual(&self, h: &OperatorMatrix) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for k in 0..n {
            let v = self.vector(k);
            let mut hv = vec![Complex64::new(0.0, 0.0); n];
            for &(i, j, a) in h.nonzeros() {
                hv[i] += a * v[j];
            }
            let r: f64 = hv
                .iter()
                .enumerate()
                .map(|(i, x)| (x - v[i] * self.eigenvalues[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }

    /// `max |<v_i|v_j> - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let u = &self.eigenvectors;
        let gram = u.adjoint() * u;
        let n = self.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Runs dense kernels single-threaded, so that results do not depend on the
/// number of cores; parallelism is then only across independent problems.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Real matrices take the real symmetric path. Each eigenvector is scaled so
/// that its largest-magnitude component is real and positive.
pub fn eigensolve(h: &OperatorMatrix) -> Result<Spectrum> {
    let defect = h.hermiticity_defect();
    if defect > HERMITICITY_TOLERANCE {
        return Err(Error::NotHermitian(defect));
    }
    let n = h.dim();
    let (eigenvalues, mut vectors) = if h.is_real() {
        let mut dense = Mat::<f64>::zeros(n, n);
        for &(i, j, v) in h.nonzeros() {
            dense[(i, j)] = v.re;
        }
        let evd = dense
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values: Vec<f64> = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        (values, Mat::from_fn(n, n, |i, j| Complex64::new(u[(i, j)], 0.0)))
    } else {
        let evd = h
            .to_dense()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values: Vec<f64> = (0..n).map(|k| evd.S()[k].re).collect();
        (values, evd.U().to_owned())
    };

    for k in 0..n {
        let mut best = 0usize;
        let mut best_norm = -1.0f64;
        for i in 0..n {
            let a = vectors[(i, k)].norm();
            if a > best_norm * (1.0 + 1e-12) {
                best = i;
                best_norm = a;
            }
        }
        if best_norm > 0.0 {
            let phase = vectors[(best, k)].conj() / best_norm;
            for i in 0..n {
                vectors[(i, k)] *= phase;
            }
            vectors[(best, k)] = Complex64::new(vectors[(best, k)].re, 0.0);
        }
    }
    Ok(Spectrum { eigenvalues, eigenvectors: vectors })
}

/// Groups of consecutive indices whose neighbouring eigenvalues differ by
/// less than `gap`.
pub fn degenerate_clusters(eigenvalues: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut clusters = Vec::new();
    let mut start = 0;
    for i in 1..=eigenvalues.len() {
        if i == eigenvalues.len() || eigenvalues[i] - eigenvalues[i - 1] >= gap {
            clusters.push(start..i);
            start = i;
        }
    }
    clusters
}

/// `α_i = -dE_i/dI` for every eigenstate, in the units of `w`
/// (h·MHz per kW/cm² for the trap operator).
///
/// Inside a degenerate cluster the projected `W` block is diagonalized and
/// its eigenvalues are assigned in descending `α` to ascending index, which
/// is the order the levels take once the intensity is increased.
pub fn dynamic_polarizability(spec: &Spectrum, w: &OperatorMatrix) -> Vec<f64> {
    let mut alpha = vec![0.0; spec.len()];
    for cluster in degenerate_clusters(&spec.eigenvalues, DEGENERACY_GAP_MHZ) {
        if cluster.len() == 1 {
            let i = cluster.start;
            alpha[i] = -w.matrix_element(spec.vector(i), spec.vector(i)).re;
            continue;
        }
        let k = cluster.len();
        let block = Mat::from_fn(k, k, |a, b| {
            w.matrix_element(spec.vector(cluster.start + a), spec.vector(cluster.start + b))
        });
        // symmetrize rounding noise before the small eigensolve
        let block = Mat::from_fn(k, k, |a, b| (block[(a, b)] + block[(b, a)].conj()) * 0.5);
        let mut values: Vec<f64> = match block.self_adjoint_eigenvalues(Side::Lower) {
            Ok(v) => v.into_iter().map(|x| -x).collect(),
            Err(_) => (0..k).map(|a| -block[(a, a)].re).collect(),
        };
        values.sort_by(|a, b| b.total_cmp(a));
        for (slot, v) in cluster.zip(values) {
            alpha[slot] = v;
        }
    }
    alpha
}

/// Magnetic-projection part of a pendular label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MLabel {
    /// `m = 0`.
    Zero,
    /// The degenerate pair `m = ±k`.
    Pair(u32),
}

impl MLabel {
    pub fn abs(self) -> u32 {
        match self {
            MLabel::Zero => 0,
            MLabel::Pair(k) => k,
        }
    }
}

impl std::fmt::Display for MLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MLabel::Zero => write!(f, "0"),
            MLabel::Pair(k) => write!(f, "+-{k}"),
        }
    }
}

/// Pendular assignment of one eigenstate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateLabel {
    pub lambda: u32,
    pub m: MLabel,
    /// Weight of the eigenstate inside the labelled `|λ, ±m>` subspace.
    pub fidelity: f64,
    /// Weight inside all `|λ, m>` with the labelled `λ`.
    pub lambda_fidelity: f64,
    /// `fidelity >= threshold`.
    pub confident: bool,
}

/// Pendular states used to label eigenstates of a full Hamiltonian.
#[derive(Clone, Debug)]
pub struct PendularReference {
    pub states: Vec<PendularState>,
}

/// Extra rotor levels used for the reference compared with the full model.
pub const REFERENCE_EXTRA_LEVELS: u32 = 3;

impl PendularReference {
    /// Reference at the same `B` and `d·E` (h·MHz) as a basis truncated at
    /// `n_max`; built with `n_max + 3` rotor levels.
    pub fn new(n_max: u32, b_rot: f64, d_times_e: f64) -> Result<Self> {
        Ok(PendularReference { states: pendular_spectrum(n_max + REFERENCE_EXTRA_LEVELS, b_rot, d_times_e)? })
    }
}

/// Labels every eigenstate by its largest rotor overlap with the pendular
/// reference, tracing over nuclear spins.
///
/// `λ` is chosen first from the total weight in each `λ`; `|m|` then picks
/// the `±m` pair with the largest weight inside that `λ`.
pub fn classify(spec: &Spectrum, basis: &Basis, reference: &PendularReference, threshold: f64) -> Vec<StateLabel> {
    let n_max = basis.n_max() as i32;
    let spin_count = basis.spin_multiplicity();
    let refs: Vec<&PendularState> = reference
        .states
        .iter()
        .filter(|p| p.m.abs() <= n_max && p.lambda as i32 <= n_max + REFERENCE_EXTRA_LEVELS as i32)
        .collect();
    let max_lambda = refs.iter().map(|p| p.lambda).max().unwrap_or(0) as usize;

    (0..spec.len())
        .map(|k| {
            let v = spec.vector(k);
            // weights[λ][|m|]
            let mut weights = vec![vec![0.0f64; n_max as usize + 1]; max_lambda + 1];
            for p in &refs {
                let mut w = 0.0;
                for s in 0..spin_count {
                    let mut amp = Complex64::new(0.0, 0.0);
                    for n in p.m.abs()..=n_max {
                        let c = p.amplitude(n);
                        if c != 0.0 {
                            let idx = Basis::rotor_index(n, p.m) * spin_count + s;
                            amp += v[idx] * c;
                        }
                    }
                    w += amp.norm_sqr();
                }
                weights[p.lambda as usize][p.m.unsigned_abs() as usize] += w;
            }
            let (lambda, lambda_fidelity) = weights
                .iter()
                .map(|row| row.iter().sum::<f64>())
                .enumerate()
                .fold((0usize, -1.0f64), |acc, (l, w)| if w > acc.1 { (l, w) } else { acc });
            let (m_abs, fidelity) = weights[lambda]
                .iter()
                .copied()
                .enumerate()
                .fold((0usize, -1.0f64), |acc, (m, w)| if w > acc.1 { (m, w) } else { acc });
            StateLabel {
                lambda: lambda as u32,
                m: if m_abs == 0 { MLabel::Zero } else { MLabel::Pair(m_abs as u32) },
                fidelity,
                lambda_fidelity,
                confident: fidelity >= threshold,
            }
        })
        .collect()
}

/// Assignment of states of one spectrum to states of the next.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracking {
    /// `mapping[i]` is the index in the next spectrum continuing state `i`.
    pub mapping: Vec<usize>,
    /// Squared overlap of each assigned pair.
    pub fidelity: Vec<f64>,
}

impl Tracking {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().copied().fold(1.0, f64::min)
    }
}

/// Greedy assignment of every state of `prev` to a distinct state of
/// `next`, taking pairs in descending squared overlap.
pub fn track(prev: &Spectrum, next: &Spectrum) -> Result<Tracking> {
    let all: Vec<usize> = (0..prev.len()).collect();
    track_subset(prev, next, &all)
}

/// [`track`] restricted to the listed states of `prev`.
pub fn track_subset(prev: &Spectrum, next: &Spectrum, states: &[usize]) -> Result<Tracking> {
    if prev.len() != next.len() {
        return Err(Error::DimensionMismatch { expected: prev.len(), found: next.len() });
    }
    let n = next.len();
    let k = states.len();
    let rows = prev.eigenvectors.nrows();
    let selected = Mat::from_fn(rows, k, |i, a| prev.eigenvectors[(i, states[a])]);
    let overlaps = selected.adjoint() * &next.eigenvectors;

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * n);
    for a in 0..k {
        for j in 0..n {
            let w = overlaps[(a, j)].norm_sqr();
            if w > 1e-8 {
                pairs.push((w, a, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut mapping = vec![usize::MAX; k];
    let mut fidelity = vec![0.0; k];
    let mut taken = vec![false; n];
    let mut assigned = 0;
    for (w, a, j) in pairs {
        if mapping[a] != usize::MAX || taken[j] {
            continue;
        }
        mapping[a] = j;
        fidelity[a] = w;
        taken[j] = true;
        assigned += 1;
        if assigned == k {
            break;
        }
    }
    // leftovers with negligible overlap everywhere: fill in energy order
    let mut free = (0..n).filter(|&j| !taken[j]);
    for a in 0..k {
        if mapping[a] == usize::MAX {
            let j = free.next().expect("as many next states as tracked states");
            mapping[a] = j;
            fidelity[a] = overlaps[(a, j)].norm_sqr();
        }
    }
    Ok(Tracking { mapping, fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::HalfInteger;
    use crate::hamiltonian::{build_basis, h_rot, h_stark};
    use crate::molecule::{stark_energy_scale, MoleculeParams};
    use crate::pendular::pendular_states_for_m;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_input() {
        let h = OperatorMatrix::from_rows(&[vec![c(3.0), c(0.0), c(0.0)], vec![c(0.0), c(-1.0), c(0.0)], vec![c(0.0), c(0.0), c(2.0)]]);
        let s = eigensolve(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 2.0, 3.0]);
        assert_eq!(s.eigenvectors[(1, 0)], c(1.0));
        assert_eq!(s.eigenvectors[(2, 1)], c(1.0));
        assert_eq!(s.eigenvectors[(0, 2)], c(1.0));
    }

    #[test]
    fn two_level_closed_form() {
        let (b, cpl) = (1.3, 0.4);
        let h = OperatorMatrix::from_rows(&[vec![c(0.0), c(cpl)], vec![c(cpl), c(2.0 * b)]]);
        let s = eigensolve(&h).unwrap();
        let r = (b * b + cpl * cpl).sqrt();
        assert_abs_diff_eq!(s.eigenvalues[0], b - r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], b + r, epsilon = 1e-14);
    }

    #[test]
    fn complex_hermitian_path() {
        let i = Complex64::new(0.0, 1.0);
        let h = OperatorMatrix::from_rows(&[vec![c(1.0), i * 0.5], vec![-i * 0.5, c(1.0)]]);
        let s = eigensolve(&h).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], 1.5, epsilon = 1e-14);
        assert!(s.max_residual(&h) < 1e-14);
        assert!(s.orthonormality_defect() < 1e-14);
        for k in 0..2 {
            let v = s.vector(k);
            let big = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
            assert!(big.im.abs() < 1e-15 && big.re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = OperatorMatrix::from_rows(&[vec![c(0.0), c(1.0)], vec![c(0.5), c(0.0)]]);
        assert!(matches!(eigensolve(&h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn stark_rotor_matches_pendular_ground_state() {
        let nak = MoleculeParams::nak();
        let basis = build_basis(5, HalfInteger::ZERO, HalfInteger::ZERO);
        let h = h_rot(&basis, nak.b_rot).add_scaled(&h_stark(&basis, nak.dipole, 1.0), 1.0).unwrap();
        let s = eigensolve(&h).unwrap();
        let p = pendular_states_for_m(5, 0, nak.b_rot, stark_energy_scale(nak.dipole, 1.0)).unwrap();
        assert!((s.eigenvalues[0] - p[0].energy).abs() <= 1e-10 * p[0].energy.abs());
        assert!(s.max_residual(&h) <= 1e-9 * h.max_abs() * 10.0);
        assert!(s.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn clusters() {
        let c = degenerate_clusters(&[0.0, 1e-9, 1.0, 2.0, 2.0], 1e-6);
        assert_eq!(c, vec![0..2, 2..3, 3..5]);
    }

    #[test]
    fn degenerate_cluster_polarizability_follows_w() {
        // H degenerate, W splits the pair: alphas are -eig(W) regardless of basis choice
        let h = OperatorMatrix::from_rows(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]]);
        let w = OperatorMatrix::from_rows(&[vec![c(0.0), c(0.3)], vec![c(0.3), c(0.0)]]);
        let s = eigensolve(&h).unwrap();
        let alpha = dynamic_polarizability(&s, &w);
        assert_abs_diff_eq!(alpha[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha[1], -0.3, epsilon = 1e-15);
    }

    #[test]
    fn tracking_identity_and_swap() {
        let h = OperatorMatrix::from_rows(&[vec![c(0.0), c(0.0)], vec![c(0.0), c(1.0)]]);
        let s = eigensolve(&h).unwrap();
        let t = track(&s, &s).unwrap();
        assert_eq!(t.mapping, vec![0, 1]);
        assert!(t.fidelity.iter().all(|&f| (f - 1.0).abs() < 1e-15));

        // the two uncoupled levels cross: energy order flips, states do not
        let after = OperatorMatrix::from_rows(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(0.0)]]);
        let s2 = eigensolve(&after).unwrap();
        let t = track(&s, &s2).unwrap();
        assert_eq!(t.mapping, vec![1, 0]);
    }
}
