//! Correlation measures for bipartite qutrit states: mutual information,
//! classical correlation extracted by an optimized projective measurement on
//! the second subsystem, quantum discord as their difference, and negativity
//! from the partial transpose.

use serde::{Deserialize, Serialize};

use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::qudit::{
    entropy_of_hermitian, hermitian_eigensystem, partial_trace, partial_transpose, DensityMatrix,
    PureState, Subsystem,
};
use crate::{tol, CMatrix, CVector, Error, Result, C64};

use std::f64::consts::PI;

/// Six angles parameterizing a complete orthonormal qutrit measurement basis:
/// an internal triad shaped by `alpha`, `beta`, `gamma`, followed by a rigid
/// spin-1 rotation with Euler angles `psi`, `theta`, `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
}

impl BasisParams {
    fn from_array(x: [f64; 6]) -> Self {
        Self {
            alpha: x[0],
            beta: x[1],
            gamma: x[2],
            psi: x[3],
            theta: x[4],
            phi: x[5],
        }
    }
}

fn lex_less(a: &[f64; 6], b: &[f64; 6]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// An orthonormal qutrit basis stored as the columns of a 3x3 unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    mat: CMatrix,
}

impl MeasurementBasis {
    /// Validates that the columns form an orthonormal triple.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != 3 || mat.ncols() != 3 {
            return Err(Error::DimensionMismatch {
                expected: "3x3".into(),
                got: format!("{}x{}", mat.nrows(), mat.ncols()),
            });
        }
        let gram = mat.adjoint() * &mat;
        let dev = (&gram - CMatrix::identity(3, 3))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > tol::BASIS_GRAM {
            return Err(Error::NotOrthonormal { deviation: dev });
        }
        Ok(Self { mat })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector::from_iterator(3, self.mat.column(j).iter().copied())
    }
}

/// Spin-1 z generator diag(1, 0, -1) in the (+1, 0, -1) component ordering.
#[cfg(test)]
pub(crate) fn spin_z() -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(2, 2)] = C64::new(-1.0, 0.0);
    m
}

/// Spin-1 y generator in the (+1, 0, -1) component ordering.
#[cfg(test)]
pub(crate) fn spin_y() -> CMatrix {
    let s = 1.0 / 2f64.sqrt();
    let mut m = CMatrix::zeros(3, 3);
    m[(0, 1)] = C64::new(0.0, -s);
    m[(1, 0)] = C64::new(0.0, s);
    m[(1, 2)] = C64::new(0.0, -s);
    m[(2, 1)] = C64::new(0.0, s);
    m
}

/// exp(-i theta Sy) for spin 1, written in closed form (checked against the
/// spectral exponential in the tests).
fn rotation_y(theta: f64) -> CMatrix {
    let (c, s) = (theta.cos(), theta.sin());
    let r = 1.0 / 2f64.sqrt();
    CMatrix::from_row_slice(
        3,
        3,
        &[
            C64::new(0.5 * (1.0 + c), 0.0),
            C64::new(-s * r, 0.0),
            C64::new(0.5 * (1.0 - c), 0.0),
            C64::new(s * r, 0.0),
            C64::new(c, 0.0),
            C64::new(-s * r, 0.0),
            C64::new(0.5 * (1.0 - c), 0.0),
            C64::new(s * r, 0.0),
            C64::new(0.5 * (1.0 + c), 0.0),
        ],
    )
}

/// exp(-i angle Sz) for spin 1: diag(e^{-i angle}, 1, e^{i angle}).
fn rotation_z(angle: f64) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(0, 0)] = C64::new(0.0, -angle).exp();
    m[(1, 1)] = C64::new(1.0, 0.0);
    m[(2, 2)] = C64::new(0.0, angle).exp();
    m
}

/// Builds the orthonormal measurement basis for the given angles. The
/// construction is exactly unitary for every parameter value.
pub fn basis_from_params(params: &BasisParams) -> MeasurementBasis {
    let BasisParams {
        alpha,
        beta,
        gamma,
        psi,
        theta,
        phi,
    } = *params;
    let phi0 = (gamma.tan() * (PI / 4.0 - alpha).tan()).atan();
    let (ca, sa) = (alpha.cos(), alpha.sin());
    let (cb, sb) = (beta.cos(), beta.sin());
    let em = C64::new(0.0, -phi0).exp();
    let ep = C64::new(0.0, phi0).exp();
    let eg = C64::new(0.0, -gamma).exp();

    let mut triad = CMatrix::zeros(3, 3);
    // Column 0: outcome associated with the +1 component.
    triad[(0, 0)] = em * cb * ca;
    triad[(1, 0)] = -eg * sb;
    triad[(2, 0)] = ep * cb * sa;
    // Column 1: outcome associated with the 0 component.
    triad[(0, 1)] = em * sb * ca;
    triad[(1, 1)] = eg * cb;
    triad[(2, 1)] = ep * sb * sa;
    // Column 2: outcome associated with the -1 component.
    triad[(0, 2)] = -em * sa;
    triad[(2, 2)] = ep * ca;

    let rot = rotation_z(psi) * rotation_y(theta) * rotation_z(phi);
    MeasurementBasis { mat: rot * triad }
}

/// Maximally entangled two-qutrit state (equal amplitudes on the three
/// aligned-component levels).
pub fn max_entangled() -> PureState {
    let amp = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut v = CVector::zeros(9);
    v[0] = amp;
    v[4] = amp;
    v[8] = amp;
    PureState::new((3, 3), v).expect("fixed unit vector")
}

/// Isotropic two-qutrit state: (1-p)/9 of the identity plus p of the
/// maximally entangled projector. Valid for p in [0, 1].
pub fn make_isotropic(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("mixing weight must lie in [0, 1], got {p}"),
        });
    }
    let pure = max_entangled().density();
    let m =
        CMatrix::identity(9, 9) * C64::new((1.0 - p) / 9.0, 0.0) + pure.matrix() * C64::new(p, 0.0);
    DensityMatrix::new((3, 3), m)
}

/// Average entropy of the first subsystem conditioned on a projective
/// measurement of the second in the given basis:
/// sum_j q_j S(rho_A^j), with outcomes below [`tol::OUTCOME_PROBABILITY`]
/// contributing nothing.
pub fn conditional_entropy(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<f64> {
    let (da, db) = rho.dims();
    if db != 3 {
        return Err(Error::DimensionMismatch {
            expected: "second factor of dimension 3".into(),
            got: format!("{:?}", rho.dims()),
        });
    }
    let m = rho.matrix();
    let mut total = 0.0;
    for j in 0..3 {
        let b = basis.column(j);
        // Contract the measured factor: M[i, i'] = <i, b| rho |i', b>.
        let cond = CMatrix::from_fn(da, da, |i, ip| {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..3 {
                let ba = b[a].conj();
                for bp in 0..3 {
                    acc += ba * m[(i * 3 + a, ip * 3 + bp)] * b[bp];
                }
            }
            acc
        });
        let q = cond.trace().re;
        if q > tol::OUTCOME_PROBABILITY {
            let normalized = &cond / C64::new(q, 0.0);
            total += q * entropy_of_hermitian(&normalized);
        }
    }
    Ok(total)
}

/// Quantum mutual information S(A) + S(B) - S(AB) in bits.
pub fn mutual_information(rho: &DensityMatrix) -> f64 {
    let sa = entropy_of_hermitian(partial_trace(rho, Subsystem::B).matrix());
    let sb = entropy_of_hermitian(partial_trace(rho, Subsystem::A).matrix());
    let sab = entropy_of_hermitian(rho.matrix());
    sa + sb - sab
}

/// Negativity: (||rho^{T_B}||_1 - 1) / 2, evaluated as the magnitude sum of
/// the genuinely negative partial-transpose eigenvalues so that states at or
/// below the separability threshold report exactly zero instead of spectral
/// rounding dust. Positive values certify entanglement; the isotropic family
/// gives (4p - 1)/3 above its threshold p = 1/4.
pub fn negativity(rho: &DensityMatrix) -> f64 {
    let pt = partial_transpose(rho, Subsystem::B);
    let (eigenvalues, _) = hermitian_eigensystem(&pt);
    eigenvalues
        .iter()
        .filter(|lambda| **lambda < -tol::EIGENVALUE_ZERO)
        .fold(0.0, |acc, lambda| acc - lambda)
}

/// Controls for the measurement-basis search: an inclusive grid per axis
/// followed by simplex refinement from the best grid points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Grid resolution per angle (the full scan costs this to the 6th power).
    pub grid_points_per_axis: usize,
    /// Number of best grid points used as simplex starting points.
    pub refinement_restarts: usize,
    /// Convergence threshold on the simplex value spread.
    pub tolerance: f64,
    /// Iteration cap per simplex run.
    pub max_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_points_per_axis: 7,
            refinement_restarts: 10,
            tolerance: 1e-6,
            max_iterations: 2000,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_points_per_axis",
                message: "need at least 2 grid points per axis".into(),
            });
        }
        if self.refinement_restarts == 0 {
            return Err(Error::InvalidParameter {
                name: "refinement_restarts",
                message: "need at least one refinement restart".into(),
            });
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                message: "tolerance must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Search box per angle. The triad angles alpha, beta cover [0, pi]; gamma
/// covers (-pi/2, pi/2] (its tangent enters the internal phase); the Euler
/// angles cover [0, 2 pi].
const BOUNDS: [(f64, f64); 6] = [
    (0.0, PI),
    (0.0, PI),
    (-PI / 2.0, PI / 2.0),
    (0.0, 2.0 * PI),
    (0.0, 2.0 * PI),
    (0.0, 2.0 * PI),
];

fn grid_axis(axis: usize, n: usize) -> Vec<f64> {
    if axis == 2 {
        // Open at -pi/2 where the parameterization degenerates.
        (0..n)
            .map(|i| -PI / 2.0 + (i + 1) as f64 * PI / n as f64)
            .collect()
    } else {
        let (lo, hi) = BOUNDS[axis];
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Result of the classical-correlation search.
#[derive(Debug, Clone)]
pub struct ClassicalCorrelation {
    pub value: f64,
    pub optimal_basis: BasisParams,
    pub optimizer_evaluations: usize,
}

/// Classical correlation: S(A) minus the smallest conditional entropy over
/// all projective measurement bases of the second subsystem, located by a
/// full grid scan plus Nelder-Mead refinement. Deterministic: equal-value
/// candidates resolve to the lexicographically smallest angle tuple.
pub fn classical_correlation(
    rho: &DensityMatrix,
    config: &OptimizerConfig,
) -> Result<ClassicalCorrelation> {
    config.validate()?;
    if rho.dims() != (3, 3) {
        return Err(Error::DimensionMismatch {
            expected: "(3, 3)".into(),
            got: format!("{:?}", rho.dims()),
        });
    }

    let mut evaluations = 0usize;
    let mut objective = |x: &[f64]| -> f64 {
        evaluations += 1;
        let params = BasisParams::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]);
        let basis = basis_from_params(&params);
        conditional_entropy(rho, &basis).expect("dims checked above")
    };

    let n = config.grid_points_per_axis;
    let axes: Vec<Vec<f64>> = (0..6).map(|a| grid_axis(a, n)).collect();
    let mut scored: Vec<(f64, [f64; 6])> = Vec::with_capacity(n.pow(6));
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &g in &axes[2] {
                for &ps in &axes[3] {
                    for &th in &axes[4] {
                        for &ph in &axes[5] {
                            let x = [a, b, g, ps, th, ph];
                            scored.push((objective(&x), x));
                        }
                    }
                }
            }
        }
    }
    scored.sort_by(|u, v| {
        u.0.total_cmp(&v.0).then_with(|| {
            if lex_less(&u.1, &v.1) {
                std::cmp::Ordering::Less
            } else if lex_less(&v.1, &u.1) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        })
    });

    let opts = NelderMeadOptions {
        max_iterations: config.max_iterations,
        value_tolerance: config.tolerance,
    };
    let mut best: Option<(f64, [f64; 6])> = None;
    let mut any_converged = false;
    let mut total_iterations = 0usize;
    for start in scored.iter().take(config.refinement_restarts) {
        let res = nelder_mead(&mut objective, &start.1, &BOUNDS, opts);
        total_iterations += res.iterations;
        any_converged |= res.converged;
        let x = [res.x[0], res.x[1], res.x[2], res.x[3], res.x[4], res.x[5]];
        best = match best {
            None => Some((res.value, x)),
            Some((bv, bx)) => {
                if res.value < bv - tol::OPTIMIZER_TIE {
                    Some((res.value, x))
                } else if (res.value - bv).abs() <= tol::OPTIMIZER_TIE && lex_less(&x, &bx) {
                    Some((res.value.min(bv), x))
                } else {
                    Some((bv, bx))
                }
            }
        };
    }
    let (min_cond, xbest) = best.expect("at least one restart ran");
    if !any_converged {
        return Err(Error::OptimizerFailed {
            iterations: total_iterations as u64,
            best: min_cond,
        });
    }

    let sa = entropy_of_hermitian(partial_trace(rho, Subsystem::B).matrix());
    Ok(ClassicalCorrelation {
        value: sa - min_cond,
        optimal_basis: BasisParams::from_array(xbest),
        optimizer_evaluations: evaluations,
    })
}

/// Full correlation analysis of one state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub mutual_information: f64,
    pub classical_correlation: f64,
    pub quantum_discord: f64,
    pub negativity: f64,
    pub optimal_basis: BasisParams,
    pub optimizer_evaluations: usize,
}

/// Computes mutual information, classical correlation, their difference
/// (the quantum discord), and the negativity of one bipartite qutrit state.
pub fn quantum_discord(rho: &DensityMatrix, config: &OptimizerConfig) -> Result<CorrelationReport> {
    let classical = classical_correlation(rho, config)?;
    let mutual = mutual_information(rho);
    Ok(CorrelationReport {
        mutual_information: mutual,
        classical_correlation: classical.value,
        quantum_discord: mutual - classical.value,
        negativity: negativity(rho),
        optimal_basis: classical.optimal_basis,
        optimizer_evaluations: classical.optimizer_evaluations,
    })
}
