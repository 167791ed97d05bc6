//! Photoluminescence readout and state reconstruction: the rate model, the
//! normalization and state-measurement linear systems, maximum-likelihood
//! reconstruction with a 12-parameter factorization, Monte Carlo uncertainty,
//! nuclear-polarization extraction, and mixing-weight estimation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nv::{
    initial_state_for_readout, pulse_unitary, Channel, NvConfig, PhaseAxis, PulseSpec,
};
use crate::optimize::{golden_section_max, golden_section_min, nelder_mead, NelderMeadOptions};
use crate::qudit::{fidelity, DensityMatrix};
use crate::{tol, CMatrix, Error, Result, C64};

/// Per-level photoluminescence rates L_|1>..L_|9> (counts per second).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLModel {
    pub rates: [f64; 9],
}

impl PLModel {
    pub fn new(rates: [f64; 9]) -> Result<Self> {
        let model = Self { rates };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidParameter {
                name: "rates",
                message: format!("rates must be finite and non-negative: {:?}", self.rates),
            });
        }
        let (lo, hi) = self
            .rates
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| {
                (l.min(r), h.max(r))
            });
        if hi - lo <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "rates",
                message: "all rates equal: readout carries no information".into(),
            });
        }
        Ok(())
    }

    /// Synthetic default: a ramp within each electron manifold, with the
    /// bright m_S = 0 levels (|4>, |5>, |6>) on top.
    pub fn synthetic_default() -> Self {
        Self {
            rates: [
                104.0, 108.0, 112.0, 150.0, 154.0, 158.0, 116.0, 120.0, 124.0,
            ],
        }
    }

    /// A second non-degenerate rate table used to check that nothing in the
    /// pipeline depends on the particular default values.
    pub fn synthetic_alternate() -> Self {
        Self {
            rates: [90.0, 95.0, 100.0, 160.0, 140.0, 170.0, 105.0, 110.0, 115.0],
        }
    }
}

/// What a photoluminescence record contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    /// Ten readouts N_1..N_10 of pulsed initial states; solves for p_e and
    /// the nine rates.
    #[serde(rename = "normalization")]
    Normalization,
    /// Fifteen readouts E_1..E_15 of the prepared state; solves for its
    /// fifteen independent element components.
    #[serde(rename = "state-measurement")]
    StateMeasurement,
    /// Four readouts N_11..N_14 isolating the nuclear polarization.
    #[serde(rename = "nuclear-polarization")]
    NuclearPolarization,
}

impl RecordKind {
    pub fn expected_len(self) -> usize {
        match self {
            RecordKind::Normalization => 10,
            RecordKind::StateMeasurement => 15,
            RecordKind::NuclearPolarization => 4,
        }
    }
}

/// A set of measured photoluminescence rates with per-entry Gaussian
/// standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLRecord {
    pub kind: RecordKind,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl PLRecord {
    pub fn new(kind: RecordKind, values: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let rec = Self {
            kind,
            values,
            sigmas,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kind.expected_len();
        if self.values.len() != n {
            return Err(Error::InvalidRecord(format!(
                "kind {:?} needs {} values, got {}",
                self.kind,
                n,
                self.values.len()
            )));
        }
        if self.sigmas.len() != n {
            return Err(Error::InvalidRecord(format!(
                "kind {:?} needs {} sigmas, got {}",
                self.kind,
                n,
                self.sigmas.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord("non-finite value".into()));
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidRecord(
                "sigmas must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    fn expect_kind(&self, kind: RecordKind) -> Result<()> {
        self.validate()?;
        if self.kind != kind {
            return Err(Error::InvalidRecord(format!(
                "expected a {kind:?} record, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Additive Gaussian readout noise: one standard deviation for every entry,
/// drawn from a deterministic stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!(
                    "noise level must be positive and finite, got {}",
                    self.sigma
                ),
            });
        }
        Ok(())
    }
}

/// Fills sigmas and optionally perturbs values. Noiseless records carry the
/// tiny positive placeholder sigma from [`tol::NOISELESS_SIGMA`], so that the
/// "sigmas are positive" invariant and the zero-noise limit coexist.
fn finish_record(
    kind: RecordKind,
    mut values: Vec<f64>,
    noise: Option<&NoiseSpec>,
) -> Result<PLRecord> {
    let n = values.len();
    let sigmas = match noise {
        None => vec![tol::NOISELESS_SIGMA; n],
        Some(spec) => {
            spec.validate()?;
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            let dist = Normal::new(0.0, spec.sigma).expect("validated sigma");
            for v in values.iter_mut() {
                *v += dist.sample(&mut rng);
            }
            vec![spec.sigma; n]
        }
    };
    PLRecord::new(kind, values, sigmas)
}

/// Expected photoluminescence of a nine-level state: populations weighted by
/// the per-level rates.
pub fn expected_pl(rho: &DensityMatrix, model: &PLModel) -> Result<f64> {
    model.validate()?;
    if rho.dim_total() != 9 {
        return Err(Error::DimensionMismatch {
            expected: "nine-level state".into(),
            got: format!("{:?}", rho.dims()),
        });
    }
    Ok((0..9)
        .map(|i| rho.matrix()[(i, i)].re * model.rates[i])
        .sum())
}

/// The ten normalization pulse sequences: selective pi rotations listed in
/// order of application (empty sequence = direct readout).
pub const NORMALIZATION_SEQUENCES: [&[(usize, usize)]; 10] = [
    &[],
    &[(4, 5), (5, 6)],
    &[(1, 4)],
    &[(4, 5), (5, 6), (3, 6)],
    &[(4, 7)],
    &[(4, 5), (5, 6), (6, 9)],
    &[(4, 5)],
    &[(4, 5), (2, 5)],
    &[(4, 5), (5, 8)],
    &[(7, 8)],
];

fn channel_for(pair: (usize, usize)) -> Channel {
    // Same electron manifold (levels within one block of three) is a
    // nuclear move; anything else here is an electron move.
    if (pair.0 - 1) / 3 == (pair.1 - 1) / 3 {
        Channel::Rf
    } else {
        Channel::Mw
    }
}

fn pi_pulse(pair: (usize, usize)) -> Result<PulseSpec> {
    PulseSpec::new(pair, std::f64::consts::PI, PhaseAxis::X, channel_for(pair))
}

/// Where `level` ends up after a sequence of pi swaps.
fn destination(seq: &[(usize, usize)], level: usize) -> usize {
    seq.iter().fold(level, |l, &(m, n)| {
        if l == m {
            n
        } else if l == n {
            m
        } else {
            l
        }
    })
}

/// Simulates the ten normalization readouts: each sequence of selective pi
/// pulses is applied to the polarized starting state (electron polarization
/// p_e from the configuration; the nuclear spin is treated as fully
/// polarized here, matching the three-component structure of the solved
/// system) and the expected photoluminescence is recorded.
pub fn simulate_normalization(
    cfg: &NvConfig,
    model: &PLModel,
    noise: Option<&NoiseSpec>,
) -> Result<PLRecord> {
    cfg.validate()?;
    model.validate()?;
    let rho = initial_state_for_readout(cfg.p_e)?;
    let mut values = Vec::with_capacity(10);
    for seq in NORMALIZATION_SEQUENCES {
        let mut m = rho.matrix().clone();
        for &pair in seq {
            let u = pulse_unitary(&pi_pulse(pair)?)?;
            m = &u * m * u.adjoint();
        }
        let state = DensityMatrix::new((3, 3), m)?;
        values.push(expected_pl(&state, model)?);
    }
    finish_record(RecordKind::Normalization, values, noise)
}

/// Solution of the normalization system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSolution {
    pub p_e: f64,
    pub model: PLModel,
    /// Euclidean norm of the residual of the solved linear system.
    pub residual: f64,
}

/// Coefficient matrix of the normalization system for a candidate electron
/// polarization: row j places weight lambda on the destinations of levels
/// |1> and |7>, and weight p_e on the destination of |4>.
fn normalization_matrix(p_e: f64) -> DMatrix<f64> {
    let lambda = (1.0 - p_e) / 2.0;
    let mut a = DMatrix::zeros(10, 9);
    for (j, seq) in NORMALIZATION_SEQUENCES.iter().enumerate() {
        a[(j, destination(seq, 1) - 1)] += lambda;
        a[(j, destination(seq, 4) - 1)] += p_e;
        a[(j, destination(seq, 7) - 1)] += lambda;
    }
    a
}

fn normalization_fit(p_e: f64, n: &DVector<f64>) -> (DVector<f64>, f64) {
    let a = normalization_matrix(p_e);
    let svd = a.clone().svd(true, true);
    let l = svd
        .solve(n, 1e-14)
        .expect("SVD least squares always solves");
    let residual = (&a * &l - n).norm();
    (l, residual)
}

/// Solves the bilinear normalization system for the electron polarization
/// and the nine rates: the polarization is scanned over [0, 1] (the system
/// is linear in the rates at fixed polarization and solved by least
/// squares), then the best candidate is refined by golden-section search.
/// Unphysical solutions (negative rates) are reported as errors, never
/// silently clipped.
pub fn solve_normalization(rec: &PLRecord) -> Result<NormalizationSolution> {
    rec.expect_kind(RecordKind::Normalization)?;
    let n = DVector::from_row_slice(&rec.values);

    let steps = (1.0 / tol::POLARIZATION_SCAN_STEP).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let p = i as f64 / steps as f64;
        let (_, r) = normalization_fit(p, &n);
        if r < best.0 {
            best = (r, p);
        }
    }
    let lo = (best.1 - tol::POLARIZATION_SCAN_STEP).max(0.0);
    let hi = (best.1 + tol::POLARIZATION_SCAN_STEP).min(1.0);
    let (p_e, _) = golden_section_min(|p| normalization_fit(p, &n).1, lo, hi, 1e-12);
    let (l, residual) = normalization_fit(p_e, &n);

    let mut rates = [0.0; 9];
    for i in 0..9 {
        rates[i] = l[i];
    }
    if rates.iter().any(|r| *r < 0.0) {
        return Err(Error::UnphysicalSolution(format!(
            "normalization solve produced negative rates {rates:?} at p_e = {p_e}"
        )));
    }
    Ok(NormalizationSolution {
        p_e,
        model: PLModel::new(rates)?,
        residual,
    })
}

/// Index into the element vector of the three measured coherences, as
/// (row, column) of the 9x9 matrix (0-based).
const COHERENCE_SLOTS: [(usize, usize); 3] = [(0, 4), (4, 8), (0, 8)];

/// The fifteen independent components describing a state on the isotropic
/// support: nine populations, then (real, imaginary) pairs of the three
/// coherences between |1>-|5>, |5>-|9>, and |1>-|9>.
pub fn state_elements(rho: &DensityMatrix) -> [f64; 15] {
    let m = rho.matrix();
    let mut x = [0.0; 15];
    for i in 0..9 {
        x[i] = m[(i, i)].re;
    }
    for (k, &(r, c)) in COHERENCE_SLOTS.iter().enumerate() {
        x[9 + 2 * k] = m[(r, c)].re;
        x[9 + 2 * k + 1] = m[(r, c)].im;
    }
    x
}

/// Population-column rate index patterns of the fifteen readout sequences
/// (1-based rate labels; 11..14 are the composite rates below).
const MEASUREMENT_ROWS: [[usize; 9]; 15] = [
    [1, 2, 3, 4, 5, 6, 7, 8, 9],
    [1, 2, 3, 5, 6, 4, 7, 8, 9],
    [4, 2, 3, 1, 5, 6, 7, 8, 9],
    [1, 2, 4, 5, 6, 3, 7, 8, 9],
    [1, 2, 3, 7, 5, 6, 4, 8, 9],
    [1, 2, 3, 5, 6, 9, 7, 8, 4],
    [1, 2, 3, 5, 4, 6, 7, 8, 9],
    [1, 4, 3, 5, 2, 6, 7, 8, 9],
    [1, 2, 3, 5, 8, 6, 7, 4, 9],
    [11, 2, 3, 1, 11, 6, 7, 8, 9],
    [11, 2, 3, 1, 11, 6, 7, 8, 9],
    [1, 2, 3, 5, 11, 9, 7, 8, 12],
    [1, 2, 3, 5, 11, 9, 7, 8, 12],
    [11, 2, 3, 1, 6, 9, 7, 8, 11],
    [11, 2, 3, 1, 6, 9, 7, 8, 11],
];

/// Coherence-column coefficients: rows 10..15 read one coherence component
/// each, through the difference rates 13 (= L5 - L4) or 14 (= L4 - L6).
const COHERENCE_COEFFS: [(usize, usize); 6] =
    [(9, 13), (10, 13), (11, 14), (12, 14), (13, 13), (14, 13)];

fn composite_rate(model: &PLModel, label: usize) -> f64 {
    let l = &model.rates;
    match label {
        1..=9 => l[label - 1],
        11 => (l[3] + l[4]) / 2.0,
        12 => (l[3] + l[5]) / 2.0,
        13 => l[4] - l[3],
        14 => l[3] - l[5],
        other => unreachable!("rate label {other}"),
    }
}

/// The 15x15 coefficient matrix mapping the element vector of the prepared
/// state to the fifteen expected readouts.
pub fn measurement_matrix(model: &PLModel) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(15, 15);
    for (row, labels) in MEASUREMENT_ROWS.iter().enumerate() {
        for (col, &label) in labels.iter().enumerate() {
            m[(row, col)] = composite_rate(model, label);
        }
    }
    for (k, &(row, label)) in COHERENCE_COEFFS.iter().enumerate() {
        m[(row, 9 + k)] = composite_rate(model, label);
    }
    m
}

/// Simulates the fifteen state-measurement readouts as the coefficient
/// matrix applied to the element vector of the state. (The pulse-level
/// simulation of the sequences agrees with this product on the measured
/// element set; the matrix is the contract.)
pub fn simulate_measurement(
    rho: &DensityMatrix,
    model: &PLModel,
    noise: Option<&NoiseSpec>,
) -> Result<PLRecord> {
    model.validate()?;
    if rho.dims() != (3, 3) {
        return Err(Error::DimensionMismatch {
            expected: "(3, 3)".into(),
            got: format!("{:?}", rho.dims()),
        });
    }
    let m = measurement_matrix(model);
    let x = DVector::from_row_slice(&state_elements(rho));
    let e = m * x;
    finish_record(
        RecordKind::StateMeasurement,
        e.iter().copied().collect(),
        noise,
    )
}

/// Solved element vector before any physicality enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStateEstimate {
    pub populations: [f64; 9],
    /// Coherences between |1>-|5>, |5>-|9>, |1>-|9>.
    pub offdiag: [C64; 3],
    /// Per-component standard deviations in element-vector order
    /// (nine populations, then re/im pairs of the three coherences).
    pub sigmas: [f64; 15],
}

impl RawStateEstimate {
    pub fn from_elements(x: &[f64; 15], sigmas: [f64; 15]) -> Self {
        let mut populations = [0.0; 9];
        populations.copy_from_slice(&x[..9]);
        let offdiag = [
            C64::new(x[9], x[10]),
            C64::new(x[11], x[12]),
            C64::new(x[13], x[14]),
        ];
        Self {
            populations,
            offdiag,
            sigmas,
        }
    }

    pub fn elements(&self) -> [f64; 15] {
        let mut x = [0.0; 15];
        x[..9].copy_from_slice(&self.populations);
        for k in 0..3 {
            x[9 + 2 * k] = self.offdiag[k].re;
            x[9 + 2 * k + 1] = self.offdiag[k].im;
        }
        x
    }
}

/// Inverts the measurement system for the element vector and propagates the
/// record's per-entry sigmas through the inverse matrix rows.
pub fn solve_elements(rec: &PLRecord, model: &PLModel) -> Result<RawStateEstimate> {
    rec.expect_kind(RecordKind::StateMeasurement)?;
    model.validate()?;
    let m = measurement_matrix(model);
    let inv = m.clone().try_inverse().ok_or_else(|| {
        Error::SingularSystem("measurement matrix is singular for this rate model".into())
    })?;
    let e = DVector::from_row_slice(&rec.values);
    let x = &inv * e;
    let mut elements = [0.0; 15];
    let mut sigmas = [0.0; 15];
    for i in 0..15 {
        elements[i] = x[i];
        sigmas[i] = (0..15)
            .map(|j| (inv[(i, j)] * rec.sigmas[j]).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    Ok(RawStateEstimate::from_elements(&elements, sigmas))
}

/// The twelve real parameters of the reconstruction factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleParams {
    pub k: [f64; 12],
}

/// Denominator convention of the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MleWeighting {
    /// Divide each squared deviation by the magnitude of the estimated
    /// element (with a small floor), as the likelihood is printed.
    #[default]
    EstimatedElement,
    /// Divide by the propagated per-element variance instead.
    RecordVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleOptions {
    #[serde(default)]
    pub weighting: MleWeighting,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            weighting: MleWeighting::default(),
            max_iterations: 2000,
            tolerance: 1e-12,
        }
    }
}

/// Model element components produced by the factorization: the matrix
/// T(k) has diagonal k_1..k_9 and lower entries k_10 at (5,1), k_11 at
/// (9,1), k_12 at (9,5); sigma = T'T / tr(T'T) then has support exactly on
/// the nine populations and the three target coherences, all real.
fn factorized_elements(k: &[f64]) -> Option<[f64; 15]> {
    let norm: f64 = k.iter().map(|v| v * v).sum();
    if norm < 1e-100 {
        return None;
    }
    let mut x = [0.0; 15];
    for i in 0..9 {
        x[i] = k[i] * k[i];
    }
    x[0] += k[9] * k[9] + k[10] * k[10];
    x[4] += k[11] * k[11];
    x[9] = k[9] * k[4] + k[10] * k[11]; // re <1|sigma|5>
    x[11] = k[11] * k[8]; // re <5|sigma|9>
    x[13] = k[10] * k[8]; // re <1|sigma|9>
    for v in x.iter_mut() {
        *v /= norm;
    }
    Some(x)
}

fn factorized_state(k: &[f64]) -> Result<DensityMatrix> {
    let x = factorized_elements(k).ok_or_else(|| Error::InvalidParameter {
        name: "k",
        message: "factorization collapsed to zero".into(),
    })?;
    let mut m = CMatrix::zeros(9, 9);
    for i in 0..9 {
        m[(i, i)] = C64::new(x[i], 0.0);
    }
    for (slot, &(r, c)) in COHERENCE_SLOTS.iter().enumerate() {
        let z = C64::new(x[9 + 2 * slot], x[9 + 2 * slot + 1]);
        m[(r, c)] = z;
        m[(c, r)] = z.conj();
    }
    DensityMatrix::new((3, 3), m)
}

fn mle_objective(
    k: &[f64],
    target: &[f64; 15],
    sigmas: &[f64; 15],
    weighting: MleWeighting,
) -> f64 {
    match factorized_elements(k) {
        None => f64::INFINITY,
        Some(x) => {
            let mut total = 0.0;
            for i in 0..15 {
                let d = x[i] - target[i];
                let denom = match weighting {
                    MleWeighting::EstimatedElement => {
                        x[i].abs().max(tol::LIKELIHOOD_DENOMINATOR_FLOOR)
                    }
                    MleWeighting::RecordVariance => {
                        let s = sigmas[i].max(tol::SIGMA_FLOOR);
                        s * s
                    }
                };
                total += d * d / (2.0 * denom);
            }
            total
        }
    }
}

/// Seed parameters from the raw estimate: clipped populations feed the
/// diagonal, and the three real coherence parts are peeled off the sparse
/// square root one entry at a time, with guards against vanishing pivots.
fn seed_params(raw: &RawStateEstimate) -> [f64; 12] {
    let mut pops: Vec<f64> = raw.populations.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = pops.iter().sum();
    if total > 0.0 {
        for p in pops.iter_mut() {
            *p /= total;
        }
    } else {
        pops = vec![1.0 / 9.0; 9];
    }
    let mu1 = raw.offdiag[0].re;
    let mu2 = raw.offdiag[1].re;
    let mu3 = raw.offdiag[2].re;

    let mut k = [0.0; 12];
    for i in 1..9 {
        if i != 4 {
            k[i] = pops[i].sqrt();
        }
    }
    let k9 = pops[8].sqrt();
    k[8] = k9;
    let k12 = (mu2 / k9.max(1e-6)).clamp(-1.0, 1.0);
    let k11 = (mu3 / k9.max(1e-6)).clamp(-1.0, 1.0);
    k[11] = k12;
    k[10] = k11;
    let k5 = (pops[4] - k12 * k12).max(0.0).sqrt();
    k[4] = k5;
    let k10 = ((mu1 - k11 * k12) / k5.max(1e-6)).clamp(-1.0, 1.0);
    k[9] = k10;
    k[0] = (pops[0] - k10 * k10 - k11 * k11).max(0.0).sqrt();
    k
}

/// Result of the maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct MleResult {
    pub state: DensityMatrix,
    pub params: MleParams,
    pub likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits the 12-parameter factorized state to the raw estimate by minimizing
/// the likelihood over the parameters. The output is physical by
/// construction (Hermitian, positive semidefinite, unit trace) whatever the
/// input; non-convergence is reported in the flag alongside the best state
/// found, not as an error.
pub fn mle_reconstruct(raw: &RawStateEstimate, opts: &MleOptions) -> Result<MleResult> {
    let elements = raw.elements();
    if elements.iter().any(|v| !v.is_finite()) || raw.sigmas.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let target = elements;
    let sigmas = raw.sigmas;
    let objective = |k: &[f64]| mle_objective(k, &target, &sigmas, opts.weighting);

    let bounds = [(-1.5, 1.5); 12];
    let nm_opts = NelderMeadOptions {
        max_iterations: opts.max_iterations,
        value_tolerance: opts.tolerance,
    };
    let mut current = seed_params(raw).to_vec();
    let mut result = nelder_mead(objective, &current, &bounds, nm_opts);
    // One restart from the found minimum tightens the simplex around it.
    current = result.x.clone();
    let second = nelder_mead(objective, &current, &bounds, nm_opts);
    let iterations = result.iterations + second.iterations;
    if second.value <= result.value {
        result = second;
    }

    let state = factorized_state(&result.x)?;
    let mut k = [0.0; 12];
    k.copy_from_slice(&result.x);
    Ok(MleResult {
        state,
        params: MleParams { k },
        likelihood: result.value,
        iterations,
        converged: result.converged,
    })
}

/// Ensemble reconstruction summary: per-member states, their element-wise
/// mean, and element-wise standard deviations (error bars).
#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub members: Vec<MleResult>,
    pub mean: DensityMatrix,
    /// Element-wise standard deviation over members: for each matrix entry,
    /// sqrt of the mean squared distance from the mean entry (one degree of
    /// freedom removed; zero for a single member).
    pub std: DMatrix<f64>,
}

/// Derives the per-member noise stream seed. The splitting rule is fixed:
/// member i uses seed + i * 0x9E3779B97F4A7C15 (wrapping), giving
/// well-separated, order-independent streams.
pub fn member_seed(seed: u64, member: usize) -> u64 {
    seed.wrapping_add((member as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Monte Carlo uncertainty: draws `members` perturbed copies of the record
/// (Gaussian noise at the record's own sigmas), reconstructs each one, and
/// summarizes the ensemble. Member results are independent of execution
/// order and bit-reproducible for a given seed.
pub fn monte_carlo_reconstruct(
    rec: &PLRecord,
    model: &PLModel,
    members: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<MonteCarloSummary> {
    rec.expect_kind(RecordKind::StateMeasurement)?;
    model.validate()?;
    if members == 0 {
        return Err(Error::InvalidParameter {
            name: "members",
            message: "ensemble needs at least one member".into(),
        });
    }
    let mut results = Vec::with_capacity(members);
    for i in 0..members {
        let mut rng = ChaCha12Rng::seed_from_u64(member_seed(seed, i));
        let mut perturbed = rec.clone();
        for (v, s) in perturbed.values.iter_mut().zip(&rec.sigmas) {
            let dist = Normal::new(0.0, *s).expect("record sigmas validated positive");
            *v += dist.sample(&mut rng);
        }
        let raw = solve_elements(&perturbed, model)?;
        results.push(mle_reconstruct(&raw, opts)?);
    }

    let mut mean = CMatrix::zeros(9, 9);
    for r in &results {
        mean += r.state.matrix();
    }
    mean /= C64::new(members as f64, 0.0);

    let mut std = DMatrix::zeros(9, 9);
    if members > 1 {
        for r in &results {
            for i in 0..9 {
                for j in 0..9 {
                    std[(i, j)] += (r.state.matrix()[(i, j)] - mean[(i, j)]).norm_sqr();
                }
            }
        }
        std /= (members - 1) as f64;
        std = std.map(f64::sqrt);
    }

    Ok(MonteCarloSummary {
        members: results,
        mean: DensityMatrix::new((3, 3), mean)?,
        std,
    })
}

/// Finds the member of a one-parameter state family closest in fidelity to
/// `sigma` by golden-section search over [0, 1]. Returns the located
/// maximizer and the final bracket half-width.
pub fn estimate_p<F>(sigma: &DensityMatrix, mut family: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<DensityMatrix>,
{
    let mut failure: Option<Error> = None;
    let (p_hat, half_width) = golden_section_max(
        |p| match family(p) {
            Ok(state) => match fidelity(sigma, &state) {
                Ok(f) => f,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        0.0,
        1.0,
        tol::GOLDEN_SECTION,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok((p_hat, half_width)),
    }
}

/// Applies [`estimate_p`] to every ensemble member and returns the sample
/// mean and standard deviation (one degree of freedom removed, zero for a
/// single member) of the per-member estimates.
pub fn estimate_p_ensemble<F>(states: &[DensityMatrix], mut family: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<DensityMatrix>,
{
    if states.is_empty() {
        return Err(Error::InvalidParameter {
            name: "states",
            message: "ensemble is empty".into(),
        });
    }
    let mut estimates = Vec::with_capacity(states.len());
    for s in states {
        estimates.push(estimate_p(s, &mut family)?.0);
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let std = if estimates.len() > 1 {
        (estimates.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (estimates.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok((mean, std))
}

/// Simulates the four nuclear-polarization readouts from the polarizations
/// and the rates of levels |1>..|8>.
pub fn simulate_nuclear_polarization(
    cfg: &NvConfig,
    model: &PLModel,
    noise: Option<&NoiseSpec>,
) -> Result<PLRecord> {
    cfg.validate()?;
    model.validate()?;
    let l = &model.rates;
    let (pe, pn) = (cfg.p_e, cfg.p_n);
    let lam = (1.0 - pe) / 2.0;
    let common = lam * pn * l[0] + lam * (1.0 - pn) * l[1];
    let values = vec![
        common
            + pe * pn * l[3]
            + pe * (1.0 - pn) * l[4]
            + lam * pn * l[6]
            + lam * (1.0 - pn) * l[7],
        common
            + pe * pn * l[3]
            + lam * (1.0 - pn) * l[4]
            + lam * pn * l[6]
            + pe * (1.0 - pn) * l[7],
        common
            + lam * (1.0 - pn) * l[3]
            + pe * pn * l[4]
            + pe * (1.0 - pn) * l[6]
            + lam * pn * l[7],
        common
            + lam * (1.0 - pn) * l[3]
            + lam * pn * l[4]
            + pe * (1.0 - pn) * l[6]
            + pe * pn * l[7],
    ];
    finish_record(RecordKind::NuclearPolarization, values, noise)
}

/// Extracts the nuclear polarization from the four readouts:
/// (N13 - N14) / (N11 - N12 + N13 - N14), which inverts the forward model
/// exactly. The denominator vanishes only for p_e = 1/3 or equal rates on
/// levels |5> and |8>.
pub fn nuclear_polarization(rec: &PLRecord) -> Result<f64> {
    rec.expect_kind(RecordKind::NuclearPolarization)?;
    let (n11, n12, n13, n14) = (rec.values[0], rec.values[1], rec.values[2], rec.values[3]);
    let denominator = n11 - n12 + n13 - n14;
    let scale = rec.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if denominator.abs() < 1e-12 * scale {
        return Err(Error::SingularSystem(format!(
            "nuclear polarization denominator {denominator} vanishes (degenerate rates or p_e = 1/3)"
        )));
    }
    Ok((n13 - n14) / denominator)
}
