//! Nine-level model of a coupled electron-nuclear spin pair: diagonal
//! Hamiltonian and its ladder transition frequencies, selective two-level
//! pulses, pure-dephasing channel, polarized initial state, and the
//! three-step pulse sequence that prepares isotropic two-qutrit states.
//!
//! Levels are numbered 1..9 with both spins-1 ordered (+1, 0, -1):
//! level = 3 * (electron index) + (nuclear index) + 1, so |1> = |+1,+1>,
//! |5> = |0,0>, |9> = |-1,-1>. The electron is the first tensor factor.

use serde::{Deserialize, Serialize};

use crate::qudit::DensityMatrix;
use crate::{CMatrix, Error, Result, C64};

use std::f64::consts::PI;

/// Envelope applied to decaying coherences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayLaw {
    /// exp(-(t/T2*)^2), the free-induction default.
    #[default]
    Gaussian,
    /// exp(-t/T2*).
    Exponential,
}

/// Whether the preparation sequence starts from perfect polarization or from
/// the polarizations recorded in the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepMode {
    /// Start from p_e = p_n = 1 regardless of the configured values.
    #[default]
    Ideal,
    /// Start from the configured p_e and p_n including nuclear leakage.
    Realistic,
}

/// Physical parameters of the spin pair. Loadable from JSON with exactly
/// these key names; `T2n_star` may be omitted to mean "infinite".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvConfig {
    /// Zero-field splitting D of the electron spin, Hz.
    #[serde(rename = "D")]
    pub zero_field_splitting: f64,
    /// Quadrupolar constant Q of the nuclear spin, Hz.
    #[serde(rename = "Q")]
    pub quadrupole: f64,
    /// Hyperfine coupling A between the spins, Hz.
    #[serde(rename = "A")]
    pub hyperfine: f64,
    /// Electron Zeeman frequency, Hz.
    pub omega_e: f64,
    /// Nuclear Zeeman frequency, Hz.
    pub omega_n: f64,
    /// Microwave Rabi frequency, Hz (electron transitions).
    pub rabi_mw: f64,
    /// Radio-frequency Rabi frequency, Hz (nuclear transitions).
    pub rabi_rf: f64,
    /// Electron relaxation time, seconds. Recorded but not used by the
    /// preparation math, whose duration is far shorter.
    #[serde(rename = "T1e")]
    pub t1e: f64,
    /// Electron dephasing time, seconds.
    #[serde(rename = "T2e_star")]
    pub t2e_star: f64,
    /// Nuclear dephasing time, seconds; `None` means infinite (no nuclear
    /// dephasing). When finite it must not be shorter than `T2e_star`, or
    /// the dephasing mask would stop being a valid channel.
    #[serde(rename = "T2n_star", default, skip_serializing_if = "Option::is_none")]
    pub t2n_star: Option<f64>,
    /// Electron polarization in [0, 1].
    pub p_e: f64,
    /// Nuclear polarization in [0, 1].
    pub p_n: f64,
    /// Free-evolution time after preparation steps one and two, seconds.
    pub t_wait: f64,
    /// Coherence decay envelope.
    #[serde(default)]
    pub decay_law: DecayLaw,
    /// Preparation starting point (ideal or configured polarizations).
    #[serde(default)]
    pub prep_mode: PrepMode,
}

impl Default for NvConfig {
    /// Reference parameter set: 500 G along the defect axis (electron
    /// gyromagnetic ratio 2.8024 MHz/G, nuclear 0.3077 kHz/G).
    fn default() -> Self {
        Self {
            zero_field_splitting: 2.87e9,
            quadrupole: -4.95e6,
            hyperfine: -2.16e6,
            omega_e: 1.4012e9,
            omega_n: 1.5385e5,
            rabi_mw: 2.0e5,
            rabi_rf: 2.5e4,
            t1e: 4.0e-3,
            t2e_star: 18.0e-6,
            t2n_star: None,
            p_e: 1.0,
            p_n: 0.981,
            t_wait: 90.0e-6,
            decay_law: DecayLaw::Gaussian,
            prep_mode: PrepMode::Ideal,
        }
    }
}

impl NvConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("D", self.zero_field_splitting),
            ("Q", self.quadrupole),
            ("A", self.hyperfine),
            ("omega_e", self.omega_e),
            ("omega_n", self.omega_n),
            ("rabi_mw", self.rabi_mw),
            ("rabi_rf", self.rabi_rf),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "frequency",
                    message: format!("{name} must be finite, got {v}"),
                });
            }
        }
        if self.t1e.is_nan() || self.t1e <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "T1e",
                message: format!("must be positive, got {}", self.t1e),
            });
        }
        if !self.t2e_star.is_finite() || self.t2e_star <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "T2e_star",
                message: format!("must be positive and finite, got {}", self.t2e_star),
            });
        }
        if let Some(t2n) = self.t2n_star {
            if t2n.is_nan() || t2n <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "T2n_star",
                    message: format!("must be positive when given, got {t2n}"),
                });
            }
            if t2n < self.t2e_star {
                return Err(Error::InvalidParameter {
                    name: "T2n_star",
                    message: format!(
                        "nuclear dephasing time {} must not be shorter than T2e_star {}, \
                         or the dephasing mask is not positive semidefinite",
                        t2n, self.t2e_star
                    ),
                });
            }
        }
        // Zero wait is allowed: it disables dephasing, which the unitarity
        // audit of the preparation sequence relies on.
        if !self.t_wait.is_finite() || self.t_wait < 0.0 {
            return Err(Error::InvalidParameter {
                name: "t_wait",
                message: format!("must be finite and non-negative, got {}", self.t_wait),
            });
        }
        for (name, v) in [("p_e", self.p_e), ("p_n", self.p_n)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name: "polarization",
                    message: format!("{name} must lie in [0, 1], got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Spin projections (m_S, m_I) of a 1-based level index.
pub fn level_spin_projections(level: usize) -> (f64, f64) {
    assert!((1..=9).contains(&level), "level index 1..9");
    let ms_idx = (level - 1) / 3;
    let mi_idx = (level - 1) % 3;
    (1.0 - ms_idx as f64, 1.0 - mi_idx as f64)
}

/// Rotation axis of a selective pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseAxis {
    X,
    Y,
}

/// Drive channel: microwaves move the electron spin, radio frequency moves
/// the nuclear spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Channel {
    Mw,
    Rf,
}

/// A selective rotation on one ladder transition of the nine-level system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Ordered level pair (m, n), 1-based; |m> maps to the first basis
    /// vector of the driven two-level subspace.
    pub transition: (usize, usize),
    /// Rotation angle in radians.
    pub angle: f64,
    pub phase_axis: PhaseAxis,
    pub channel: Channel,
}

impl PulseSpec {
    pub fn new(
        transition: (usize, usize),
        angle: f64,
        phase_axis: PhaseAxis,
        channel: Channel,
    ) -> Result<Self> {
        let p = Self {
            transition,
            angle,
            phase_axis,
            channel,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the transition is a single ladder step on the channel's spin.
    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.transition;
        if !(1..=9).contains(&m) || !(1..=9).contains(&n) {
            return Err(Error::InvalidTransition {
                m,
                n,
                reason: "levels must lie in 1..9".into(),
            });
        }
        if m == n {
            return Err(Error::InvalidTransition {
                m,
                n,
                reason: "transition needs two distinct levels".into(),
            });
        }
        if !self.angle.is_finite() {
            return Err(Error::InvalidParameter {
                name: "angle",
                message: format!("must be finite, got {}", self.angle),
            });
        }
        let (ms_m, mi_m) = level_spin_projections(m);
        let (ms_n, mi_n) = level_spin_projections(n);
        let dms = (ms_m - ms_n).abs();
        let dmi = (mi_m - mi_n).abs();
        let single_electron_step = (dms - 1.0).abs() < 0.5 && dmi < 0.5;
        let single_nuclear_step = dms < 0.5 && (dmi - 1.0).abs() < 0.5;
        match self.channel {
            Channel::Mw if single_electron_step => Ok(()),
            Channel::Rf if single_nuclear_step => Ok(()),
            Channel::Mw => Err(Error::InvalidTransition {
                m,
                n,
                reason: "microwave pulses drive a single electron step at fixed nuclear projection"
                    .into(),
            }),
            Channel::Rf => Err(Error::InvalidTransition {
                m,
                n,
                reason: "radio-frequency pulses drive a single nuclear step at fixed electron projection"
                    .into(),
            }),
        }
    }
}

/// One stage of a pulse sequence: its pulses in order, then a free-evolution
/// wait (0 means none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepStep {
    pub pulses: Vec<PulseSpec>,
    pub wait_after: f64,
}

impl PrepStep {
    pub fn new(pulses: Vec<PulseSpec>, wait_after: f64) -> Result<Self> {
        if pulses.is_empty() && (wait_after.is_nan() || wait_after <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "prep_step",
                message: "a step needs pulses or a positive wait".into(),
            });
        }
        if !wait_after.is_finite() || wait_after < 0.0 {
            return Err(Error::InvalidParameter {
                name: "wait_after",
                message: format!("must be finite and non-negative, got {wait_after}"),
            });
        }
        for p in &pulses {
            p.validate()?;
        }
        Ok(Self { pulses, wait_after })
    }
}

/// Diagonal Hamiltonian 2 pi (D Sz^2 + omega_e Sz + Q Iz^2 + omega_n Iz
/// + A Sz Iz) in angular-frequency units (rad/s), level-ordered as |1>..|9>.
pub fn hamiltonian(cfg: &NvConfig) -> CMatrix {
    let mut h = CMatrix::zeros(9, 9);
    for level in 1..=9 {
        let (ms, mi) = level_spin_projections(level);
        let e = 2.0
            * PI
            * (cfg.zero_field_splitting * ms * ms
                + cfg.omega_e * ms
                + cfg.quadrupole * mi * mi
                + cfg.omega_n * mi
                + cfg.hyperfine * ms * mi);
        h[(level - 1, level - 1)] = C64::new(e, 0.0);
    }
    h
}

/// One labeled addressable transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionFrequency {
    /// "e1".."e6" for the electron transitions, "n1"/"n2" for the nuclear
    /// transitions inside the m_S = 0 manifold.
    pub label: String,
    pub levels: (usize, usize),
    pub channel: Channel,
    /// |energy difference| / 2 pi, in Hz.
    pub frequency: f64,
}

/// The transitions each labeled drive addresses, lower level first.
pub const LABELED_TRANSITIONS: [(&str, (usize, usize), Channel); 8] = [
    ("e1", (4, 7), Channel::Mw),
    ("e2", (1, 4), Channel::Mw),
    ("e3", (5, 8), Channel::Mw),
    ("e4", (2, 5), Channel::Mw),
    ("e5", (6, 9), Channel::Mw),
    ("e6", (3, 6), Channel::Mw),
    ("n1", (4, 5), Channel::Rf),
    ("n2", (5, 6), Channel::Rf),
];

/// The six electron transitions (one per nuclear projection, through
/// m_S = 0) and the two nuclear transitions inside m_S = 0.
pub fn transition_frequencies(cfg: &NvConfig) -> Vec<TransitionFrequency> {
    let h = hamiltonian(cfg);
    LABELED_TRANSITIONS
        .iter()
        .map(|&(label, (m, n), channel)| TransitionFrequency {
            label: label.to_string(),
            levels: (m, n),
            channel,
            frequency: (h[(m - 1, m - 1)].re - h[(n - 1, n - 1)].re).abs() / (2.0 * PI),
        })
        .collect()
}

/// Unitary of a selective pulse: identity outside the two driven levels;
/// inside, exp(-i (angle/2) (cos phi sigma_x + sin phi sigma_y)) with
/// phi = 0 for X and pi/2 for Y, |m> being the first basis vector.
pub fn pulse_unitary(p: &PulseSpec) -> Result<CMatrix> {
    p.validate()?;
    let (m, n) = p.transition;
    let (a, b) = (m - 1, n - 1);
    let c = C64::new((p.angle / 2.0).cos(), 0.0);
    let s = (p.angle / 2.0).sin();
    let mut u = CMatrix::identity(9, 9);
    u[(a, a)] = c;
    u[(b, b)] = c;
    match p.phase_axis {
        PhaseAxis::X => {
            u[(a, b)] = C64::new(0.0, -s);
            u[(b, a)] = C64::new(0.0, -s);
        }
        PhaseAxis::Y => {
            u[(a, b)] = C64::new(-s, 0.0);
            u[(b, a)] = C64::new(s, 0.0);
        }
    }
    Ok(u)
}

fn decay_factor(t: f64, t2: f64, law: DecayLaw) -> f64 {
    match law {
        DecayLaw::Gaussian => (-(t / t2) * (t / t2)).exp(),
        DecayLaw::Exponential => (-t / t2).exp(),
    }
}

/// Pure dephasing for a time `t`: coherences between levels with different
/// electron projection decay with T2e*; coherences between levels differing
/// only in nuclear projection decay with T2n* (untouched when it is
/// infinite); populations never change.
pub fn dephase(rho: &DensityMatrix, t: f64, cfg: &NvConfig) -> Result<DensityMatrix> {
    cfg.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("dephasing time must be finite and non-negative, got {t}"),
        });
    }
    if rho.dims() != (3, 3) {
        return Err(Error::DimensionMismatch {
            expected: "(3, 3)".into(),
            got: format!("{:?}", rho.dims()),
        });
    }
    let fe = decay_factor(t, cfg.t2e_star, cfg.decay_law);
    let fn_ = match cfg.t2n_star {
        Some(t2n) if t2n.is_finite() => decay_factor(t, t2n, cfg.decay_law),
        _ => 1.0,
    };
    let m = rho.matrix();
    let out = CMatrix::from_fn(9, 9, |r, c| {
        if r == c {
            m[(r, c)]
        } else {
            let (ms_r, _) = level_spin_projections(r + 1);
            let (ms_c, _) = level_spin_projections(c + 1);
            let f = if (ms_r - ms_c).abs() > 0.5 { fe } else { fn_ };
            m[(r, c)] * C64::new(f, 0.0)
        }
    });
    DensityMatrix::new((3, 3), out)
}

/// Optically pumped starting state: weight p_e on |0,+1> and the remainder
/// split evenly over |+1,+1> and |-1,+1>. Imperfect nuclear polarization
/// leaks each component into the neighboring nuclear-projection-0 level.
pub fn initial_state(cfg: &NvConfig) -> Result<DensityMatrix> {
    cfg.validate()?;
    initial_state_with(cfg.p_e, cfg.p_n)
}

/// Starting state of the readout normalization runs: electron polarization
/// as given, nuclear spin treated as fully polarized (the solved system has
/// the three-component structure lambda / p_e / lambda).
pub(crate) fn initial_state_for_readout(p_e: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p_e) || !p_e.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p_e",
            message: format!("polarization must lie in [0, 1], got {p_e}"),
        });
    }
    initial_state_with(p_e, 1.0)
}

fn initial_state_with(p_e: f64, p_n: f64) -> Result<DensityMatrix> {
    let lambda = (1.0 - p_e) / 2.0;
    let mut m = CMatrix::zeros(9, 9);
    // (polarized level, leak target one nuclear step down, weight)
    for (level, leak, w) in [(1, 2, lambda), (4, 5, p_e), (7, 8, lambda)] {
        m[(level - 1, level - 1)] += C64::new(w * p_n, 0.0);
        m[(leak - 1, leak - 1)] += C64::new(w * (1.0 - p_n), 0.0);
    }
    DensityMatrix::new((3, 3), m)
}

fn two_asin_sqrt(x: f64) -> f64 {
    2.0 * x.sqrt().asin()
}

/// The three preparation stages for target mixing weight `p`: nuclear and
/// electron X pulses shaping populations (stages one and two, each followed
/// by a free-evolution wait that erases electron coherence), then Y pulses
/// building the three coherences of the target state (no wait after).
pub fn preparation_steps(p: f64, cfg: &NvConfig) -> Result<Vec<PrepStep>> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("mixing weight must lie in [0, 1], got {p}"),
        });
    }
    cfg.validate()?;
    use Channel::{Mw, Rf};
    use PhaseAxis::{X, Y};
    let pulse = PulseSpec::new;

    let step_one = PrepStep::new(
        vec![
            pulse((4, 5), two_asin_sqrt((2.0 + p) / 3.0), X, Rf)?,
            pulse((5, 6), two_asin_sqrt((1.0 - p) / (2.0 + p)), X, Rf)?,
            pulse((1, 4), PI, X, Mw)?,
            pulse((6, 9), PI, X, Mw)?,
        ],
        cfg.t_wait,
    )?;

    let step_two = PrepStep::new(
        vec![
            pulse((1, 4), two_asin_sqrt(2.0 / 3.0), X, Mw)?,
            pulse((4, 7), PI / 2.0, X, Mw)?,
            pulse((2, 5), two_asin_sqrt((1.0 - p) / (3.0 + 6.0 * p)), X, Mw)?,
            pulse((5, 8), two_asin_sqrt((1.0 - p) / (2.0 + 7.0 * p)), X, Mw)?,
            pulse((6, 9), two_asin_sqrt(2.0 / 3.0), X, Mw)?,
            pulse((3, 6), PI / 2.0, X, Mw)?,
        ],
        cfg.t_wait,
    )?;

    let step_three = PrepStep::new(
        vec![
            pulse((4, 5), two_asin_sqrt(1.0 / 3.0), Y, Rf)?,
            pulse((5, 6), PI / 2.0, Y, Rf)?,
            pulse((1, 4), PI, Y, Mw)?,
            pulse((6, 9), PI, Y, Mw)?,
        ],
        0.0,
    )?;

    Ok(vec![step_one, step_two, step_three])
}

/// Snapshot of the preparation: the state after each of the three stages,
/// the last one being the output state.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub after_step_one: DensityMatrix,
    pub after_step_two: DensityMatrix,
    pub state: DensityMatrix,
}

fn apply_step(rho: &DensityMatrix, step: &PrepStep, cfg: &NvConfig) -> Result<DensityMatrix> {
    let mut m = rho.matrix().clone();
    for p in &step.pulses {
        let u = pulse_unitary(p)?;
        m = &u * m * u.adjoint();
    }
    let state = DensityMatrix::new(rho.dims(), m)?;
    if step.wait_after > 0.0 {
        dephase(&state, step.wait_after, cfg)
    } else {
        Ok(state)
    }
}

/// Runs the full preparation sequence for mixing weight `p`. In ideal mode
/// the start is perfectly polarized and, with the default wait erasing
/// electron coherence, the three stages land exactly on the two
/// intermediate population patterns and on the isotropic target state.
pub fn prepare_isotropic(p: f64, cfg: &NvConfig) -> Result<Preparation> {
    let steps = preparation_steps(p, cfg)?;
    let start = match cfg.prep_mode {
        PrepMode::Ideal => initial_state_with(1.0, 1.0)?,
        PrepMode::Realistic => initial_state(cfg)?,
    };
    let after_step_one = apply_step(&start, &steps[0], cfg)?;
    let after_step_two = apply_step(&after_step_one, &steps[1], cfg)?;
    let state = apply_step(&after_step_two, &steps[2], cfg)?;
    Ok(Preparation {
        after_step_one,
        after_step_two,
        state,
    })
}

/// Expected intermediate after stage one: populations (1-p)/3 on |1> and
/// |9> and (1+2p)/3 on |5>, no coherences.
pub fn stage_one_target(p: f64) -> CMatrix {
    let mut m = CMatrix::zeros(9, 9);
    m[(0, 0)] = C64::new((1.0 - p) / 3.0, 0.0);
    m[(4, 4)] = C64::new((1.0 + 2.0 * p) / 3.0, 0.0);
    m[(8, 8)] = C64::new((1.0 - p) / 3.0, 0.0);
    m
}

/// Expected intermediate after stage two: population (1+8p)/9 on |5> and
/// (1-p)/9 on every other level, no coherences.
pub fn stage_two_target(p: f64) -> CMatrix {
    let mut m = CMatrix::identity(9, 9) * C64::new((1.0 - p) / 9.0, 0.0);
    m[(4, 4)] = C64::new((1.0 + 8.0 * p) / 9.0, 0.0);
    m
}
