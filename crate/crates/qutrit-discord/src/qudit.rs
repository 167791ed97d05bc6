//! Bipartite qudit states and the spectral operations everything else
//! builds on. The single numerical kernel is the Hermitian eigendecomposition;
//! entropy, trace norm, fidelity and positivity checks all reduce to it.

use crate::{tol, CMatrix, CVector, Error, Result, C64};

/// Which tensor factor of a bipartite state an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// A validated density matrix over a bipartite system of dimensions
/// `(dim_a, dim_b)`. Single-system states use a trivial second factor,
/// e.g. `(3, 1)`.
///
/// Construction checks squareness, finiteness, self-adjointness, unit trace
/// and positive semidefiniteness (up to the tolerances in [`crate::tol`]),
/// then stores the exactly symmetrized matrix `(m + m†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: (usize, usize),
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(dims: (usize, usize), mat: CMatrix) -> Result<Self> {
        let n = dims.0 * dims.1;
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() != n || dims.0 == 0 || dims.1 == 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} for dims {:?}", n, n, dims),
                got: format!("{}x{}", mat.nrows(), mat.ncols()),
            });
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut herm_dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                herm_dev = herm_dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if herm_dev > tol::HERMITICITY {
            return Err(Error::NotHermitian {
                deviation: herm_dev,
            });
        }
        let trace_dev = (mat.trace().re - 1.0).abs().max(mat.trace().im.abs());
        if trace_dev > tol::TRACE {
            return Err(Error::TraceNotOne {
                deviation: trace_dev,
            });
        }
        let sym = (&mat + mat.adjoint()) * C64::new(0.5, 0.0);
        let (eigs, _) = hermitian_eigensystem(&sym);
        let min_eig = eigs.first().copied().unwrap_or(0.0);
        if min_eig < tol::MIN_EIGENVALUE {
            return Err(Error::NotPositive {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self { dims, mat: sym })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn dim_total(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigensystem(&self.mat).0
    }
}

/// A validated pure state vector over a bipartite system.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: (usize, usize),
    vec: CVector,
}

impl PureState {
    pub fn new(dims: (usize, usize), vec: CVector) -> Result<Self> {
        let n = dims.0 * dims.1;
        if vec.len() != n || dims.0 == 0 || dims.1 == 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("length {} for dims {:?}", n, dims),
                got: format!("length {}", vec.len()),
            });
        }
        if vec.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = (vec.norm() - 1.0).abs();
        if dev > tol::UNIT_NORM {
            return Err(Error::NotNormalized { deviation: dev });
        }
        Ok(Self { dims, vec })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn vector(&self) -> &CVector {
        &self.vec
    }

    /// The rank-one projector |v><v| as a density matrix.
    pub fn density(&self) -> DensityMatrix {
        let m = &self.vec * self.vec.adjoint();
        DensityMatrix::new(self.dims, m).expect("outer product of a unit vector is a valid state")
    }
}

/// Kronecker product, row-major block convention (`a` indexes the slow axis).
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending, matching
/// eigenvector columns. The input is assumed self-adjoint; only its Hermitian
/// part influences the result.
pub fn hermitian_eigensystem(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues of a finite Hermitian matrix are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Entropy (base 2) of a Hermitian PSD matrix given as raw storage.
/// Eigenvalues below [`tol::EIGENVALUE_ZERO`] contribute nothing.
pub(crate) fn entropy_of_hermitian(m: &CMatrix) -> f64 {
    let (eigs, _) = hermitian_eigensystem(m);
    eigs.iter()
        .filter(|&&l| l >= tol::EIGENVALUE_ZERO)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_hermitian(&rho.mat)
}

/// Traces out the given subsystem, returning the reduced state of the other.
pub fn partial_trace(rho: &DensityMatrix, traced_out: Subsystem) -> DensityMatrix {
    let (da, db) = rho.dims;
    let m = &rho.mat;
    match traced_out {
        Subsystem::B => {
            let red = CMatrix::from_fn(da, da, |i, j| {
                (0..db).map(|b| m[(i * db + b, j * db + b)]).sum()
            });
            DensityMatrix::new((da, 1), red)
        }
        Subsystem::A => {
            let red = CMatrix::from_fn(db, db, |a, b| {
                (0..da).map(|i| m[(i * db + a, i * db + b)]).sum()
            });
            DensityMatrix::new((1, db), red)
        }
    }
    .expect("partial trace of a valid state is a valid state")
}

/// Transposes the chosen subsystem in place of the full matrix. The result is
/// Hermitian and unit-trace but in general not positive, so it is returned as
/// a raw matrix.
pub fn partial_transpose(rho: &DensityMatrix, transposed: Subsystem) -> CMatrix {
    let (da, db) = rho.dims;
    let m = &rho.mat;
    let n = da * db;
    CMatrix::from_fn(n, n, |r, c| {
        let (i, a) = (r / db, r % db);
        let (j, b) = (c / db, c % db);
        match transposed {
            Subsystem::B => m[(i * db + b, j * db + a)],
            Subsystem::A => m[(j * db + a, i * db + b)],
        }
    })
}

/// Trace norm (sum of singular values) of a square matrix. For a Hermitian
/// input this is the sum of absolute eigenvalues, which is how it is
/// evaluated; general inputs go through the Hermitian square A†A.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let mut herm_dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            herm_dev = herm_dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if herm_dev <= 1e-10 {
        let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let (eigs, _) = hermitian_eigensystem(&sym);
        Ok(eigs.iter().map(|l| l.abs()).sum())
    } else {
        let gram = m.adjoint() * m;
        let (eigs, _) = hermitian_eigensystem(&gram);
        Ok(eigs.iter().map(|l| l.max(0.0).sqrt()).sum())
    }
}

/// Hermitian square root of a PSD matrix, negative rounding clipped to zero.
fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (eigs, vecs) = hermitian_eigensystem(m);
    let n = m.nrows();
    let mut d = CMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = C64::new(eigs[i].max(0.0).sqrt(), 0.0);
    }
    &vecs * d * vecs.adjoint()
}

/// Uhlmann fidelity in the squared convention,
/// F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clamped into [0, 1] against
/// rounding. Equals 1 iff the states coincide and reduces to
/// (sum_i sqrt(p_i q_i))^2 for commuting states.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dims != sigma.dims {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", rho.dims),
            got: format!("{:?}", sigma.dims),
        });
    }
    let sr = psd_sqrt(&rho.mat);
    let inner = &sr * &sigma.mat * &sr;
    let herm = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let (eigs, _) = hermitian_eigensystem(&herm);
    let root_sum: f64 = eigs.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// The unitary exp(-i t H) of a Hermitian generator.
pub fn unitary_from_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (eigs, vecs) = hermitian_eigensystem(h);
    let n = h.nrows();
    let mut d = CMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = (C64::new(0.0, -t * eigs[i])).exp();
    }
    &vecs * d * vecs.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_density(dims: (usize, usize), seed: u64) -> DensityMatrix {
        let n = dims.0 * dims.1;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let g = &a * a.adjoint();
        let m = &g / g.trace();
        DensityMatrix::new(dims, m).unwrap()
    }

    fn entangled_qutrit_pair() -> PureState {
        let mut v = CVector::zeros(9);
        let amp = C64::new(1.0 / 3f64.sqrt(), 0.0);
        v[0] = amp;
        v[4] = amp;
        v[8] = amp;
        PureState::new((3, 3), v).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        let ok = CMatrix::identity(9, 9) / C64::new(9.0, 0.0);
        assert!(DensityMatrix::new((3, 3), ok.clone()).is_ok());
        assert!(matches!(
            DensityMatrix::new((3, 2), ok.clone()),
            Err(Error::DimensionMismatch { .. })
        ));

        let mut skew = ok.clone();
        skew[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::new((3, 3), skew),
            Err(Error::NotHermitian { .. })
        ));

        let double = ok.clone() * C64::new(2.0, 0.0);
        assert!(matches!(
            DensityMatrix::new((3, 3), double),
            Err(Error::TraceNotOne { .. })
        ));

        let mut indefinite = CMatrix::zeros(9, 9);
        indefinite[(0, 0)] = C64::new(1.5, 0.0);
        indefinite[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(
            DensityMatrix::new((3, 3), indefinite),
            Err(Error::NotPositive { .. })
        ));

        let mut nan = ok;
        nan[(0, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(
            DensityMatrix::new((3, 3), nan),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn partial_trace_of_entangled_pair_is_maximally_mixed() {
        let rho = entangled_qutrit_pair().density();
        for side in [Subsystem::A, Subsystem::B] {
            let red = partial_trace(&rho, side);
            let expect = CMatrix::identity(3, 3) / C64::new(3.0, 0.0);
            let dev = (red.matrix() - expect)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "deviation {dev}");
        }
    }

    #[test]
    fn partial_trace_of_product_recovers_factors() {
        let a = random_density((3, 1), 1);
        let b = random_density((3, 1), 2);
        let prod = DensityMatrix::new((3, 3), tensor(a.matrix(), b.matrix())).unwrap();
        let ra = partial_trace(&prod, Subsystem::B);
        let rb = partial_trace(&prod, Subsystem::A);
        let da = (ra.matrix() - a.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let db = (rb.matrix() - b.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(da < 1e-12 && db < 1e-12);
    }

    #[test]
    fn tensor_multiplies_traces() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = CMatrix::from_fn(3, 3, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let b = CMatrix::from_fn(3, 3, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let lhs = tensor(&a, &b).trace();
            let rhs = a.trace() * b.trace();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_is_an_involution_and_preserves_trace() {
        for seed in 0..5 {
            let rho = random_density((3, 3), 100 + seed);
            for side in [Subsystem::A, Subsystem::B] {
                let pt = partial_transpose(&rho, side);
                assert!((pt.trace() - rho.matrix().trace()).norm() < 1e-14);
                let back_raw = DensityMatrix::new((3, 3), pt).map(|d| partial_transpose(&d, side));
                if let Ok(back) = back_raw {
                    let dev = (&back - rho.matrix())
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max);
                    assert!(dev < 1e-13);
                }
            }
        }
    }

    #[test]
    fn transposed_entangled_projector_has_sign_split_spectrum() {
        let rho = entangled_qutrit_pair().density();
        let pt = partial_transpose(&rho, Subsystem::B);
        let (eigs, _) = hermitian_eigensystem(&pt);
        let third = 1.0 / 3.0;
        let negatives = eigs.iter().filter(|&&l| (l + third).abs() < 1e-12).count();
        let positives = eigs.iter().filter(|&&l| (l - third).abs() < 1e-12).count();
        assert_eq!((negatives, positives), (3, 6), "eigenvalues {eigs:?}");
    }

    #[test]
    fn entropy_limits() {
        let pure = entangled_qutrit_pair().density();
        assert!(von_neumann_entropy(&pure).abs() < 1e-10);

        let mixed =
            DensityMatrix::new((3, 3), CMatrix::identity(9, 9) / C64::new(9.0, 0.0)).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&mixed),
            2.0 * 3f64.log2(),
            epsilon = 1e-12
        );

        for seed in 0..5 {
            let rho = random_density((3, 3), 200 + seed);
            let s = von_neumann_entropy(&rho);
            assert!(s >= -1e-12 && s <= 2.0 * 3f64.log2() + 1e-12);
        }
    }

    #[test]
    fn trace_norm_matches_spectrum_for_hermitian_input() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(2.0, 0.0);
        m[(1, 1)] = C64::new(-3.0, 0.0);
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 5.0, epsilon = 1e-12);
        assert!(trace_norm(&CMatrix::zeros(2, 3)).is_err());

        // non-Hermitian branch: singular values of a Jordan-like block
        let mut j = CMatrix::zeros(2, 2);
        j[(0, 1)] = C64::new(2.0, 0.0);
        assert_abs_diff_eq!(trace_norm(&j).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_basic_cases() {
        let rho = random_density((3, 3), 7);
        assert!(fidelity(&rho, &rho).unwrap() >= 1.0 - 1e-10);

        let sigma = random_density((3, 3), 8);
        let f1 = fidelity(&rho, &sigma).unwrap();
        let f2 = fidelity(&sigma, &rho).unwrap();
        assert!((f1 - f2).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&f1));

        // orthogonal pure states
        let mut u = CVector::zeros(3);
        u[0] = C64::new(1.0, 0.0);
        let mut w = CVector::zeros(3);
        w[1] = C64::new(1.0, 0.0);
        let pu = PureState::new((3, 1), u).unwrap().density();
        let pw = PureState::new((3, 1), w).unwrap().density();
        assert!(fidelity(&pu, &pw).unwrap() < 1e-12);

        // pure-state overlap |<u|w>|^2
        let mut v = CVector::zeros(3);
        v[0] = C64::new(0.6, 0.0);
        v[1] = C64::new(0.8, 0.0);
        let pv = PureState::new((3, 1), v).unwrap().density();
        assert_abs_diff_eq!(fidelity(&pu, &pv).unwrap(), 0.36, epsilon = 1e-12);

        assert!(fidelity(&pu, &rho).is_err());
    }

    #[test]
    fn commuting_fidelity_is_bhattacharyya() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..10 {
            let mut p: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.01).collect();
            let mut q: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.01).collect();
            let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
            p.iter_mut().for_each(|x| *x /= sp);
            q.iter_mut().for_each(|x| *x /= sq);
            let dp = DensityMatrix::new(
                (4, 1),
                CMatrix::from_fn(4, 4, |i, j| {
                    if i == j {
                        C64::new(p[i], 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }),
            )
            .unwrap();
            let dq = DensityMatrix::new(
                (4, 1),
                CMatrix::from_fn(4, 4, |i, j| {
                    if i == j {
                        C64::new(q[i], 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }),
            )
            .unwrap();
            let expect: f64 = p
                .iter()
                .zip(&q)
                .map(|(&a, &b)| (a * b).sqrt())
                .sum::<f64>()
                .powi(2);
            assert_abs_diff_eq!(fidelity(&dp, &dq).unwrap(), expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn pure_state_validation() {
        let mut v = CVector::zeros(9);
        v[0] = C64::new(0.7, 0.0);
        assert!(matches!(
            PureState::new((3, 3), v),
            Err(Error::NotNormalized { .. })
        ));
        let mut u = CVector::zeros(4);
        u[0] = C64::new(1.0, 0.0);
        assert!(PureState::new((3, 3), u).is_err());
    }

    #[test]
    fn unitary_exponential_is_unitary_and_matches_diagonal_case() {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(2, 2)] = C64::new(-1.0, 0.0);
        let u = unitary_from_hermitian(&h, 0.7);
        let gram = u.adjoint() * &u;
        let dev = (&gram - CMatrix::identity(3, 3))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-13);
        assert!((u[(0, 0)] - C64::new(0.0, -0.7).exp()).norm() < 1e-13);
        assert!((u[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-13);
    }
}
