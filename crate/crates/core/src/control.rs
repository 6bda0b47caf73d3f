//! Tracking control by feedback linearization.
//!
//! A follower with well-defined relative degrees is driven so that its
//! outputs follow the leader's. The tracking coordinates stack, per output
//! channel, the gaps between the follower's drift derivatives of that
//! output and the leader's output derivatives; the control cancels the
//! drift term of order equal to the relative degree, injects the matching
//! leader derivative, and adds a pole-placed linear feedback on the gap.
//! Passing an estimated leader state instead of the true one turns each
//! law into its distributed certainty-equivalence version unchanged.

use num_complex::Complex64;

use crate::linalg::{self, Matrix};
use crate::models::{FollowerModel, LeaderModel};

pub type Result<T> = std::result::Result<T, ControlError>;

/// Below this magnitude the scalar decoupling term counts as lost.
const DECOUPLING_EPS: f64 = 1e-9;
/// Decoupling matrices at or above this condition estimate are rejected.
const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ControlError {
    #[error("pole count {got} does not match relative degree {expected}")]
    PoleCountMismatch { expected: usize, got: usize },
    #[error("requested pole {pole} is not in the open left half plane")]
    UnstablePole { pole: Complex64 },
    #[error("complex poles must come in conjugate pairs; {pole} is unmatched")]
    UnpairedComplexPole { pole: Complex64 },
    #[error("relative degree lost at state {state:?} (decoupling scalar {value:.3e})")]
    RelativeDegreeLost { state: Vec<f64>, value: f64 },
    #[error("decoupling matrix singular at state {state:?} (condition estimate {cond:.3e})")]
    SingularDecoupling { state: Vec<f64>, cond: f64 },
    #[error("gain shape error: {context}")]
    BadShape { context: String },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Tracking coordinates of one follower: `xi` stacks, channel by channel,
/// the output gap and its drift derivatives up to relative degree minus
/// one; `theta` holds the internal coordinates when the plant has any.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingState {
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Row gain for the integrator chain of length `r`: K such that the chain
/// closed with v = K xi has characteristic polynomial with the given
/// roots. K = -[c0, c1, ..., c_{r-1}] from the monic expansion.
pub fn pole_placement_companion(poles: &[Complex64], r: usize) -> Result<Vec<f64>> {
    if poles.len() != r {
        return Err(ControlError::PoleCountMismatch {
            expected: r,
            got: poles.len(),
        });
    }
    for &pole in poles {
        if !(pole.re < 0.0 && pole.re.is_finite() && pole.im.is_finite()) {
            return Err(ControlError::UnstablePole { pole });
        }
    }
    // Complex roots must pair with a conjugate for real coefficients.
    let mut unmatched: Vec<Complex64> = Vec::new();
    for &pole in poles {
        if pole.im == 0.0 {
            continue;
        }
        let tol = 1e-9 * (1.0 + pole.norm());
        if let Some(idx) = unmatched
            .iter()
            .position(|cand| (cand.conj() - pole).norm() <= tol)
        {
            unmatched.swap_remove(idx);
        } else {
            unmatched.push(pole);
        }
    }
    if let Some(&pole) = unmatched.first() {
        return Err(ControlError::UnpairedComplexPole { pole });
    }
    // Monic expansion of the product of (s - pole): coeffs[j] holds the
    // coefficient of s^j, updated in place one root at a time.
    let mut coeffs = vec![Complex64::new(0.0, 0.0); r + 1];
    coeffs[0] = Complex64::new(1.0, 0.0);
    for (deg, &pole) in poles.iter().enumerate() {
        let old = coeffs.clone();
        for (j, c) in coeffs.iter_mut().enumerate().take(deg + 2) {
            let lower = if j == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                old[j - 1]
            };
            *c = lower - pole * old[j];
        }
    }
    Ok((0..r).map(|j| -coeffs[j].re).collect())
}

/// Per-output pole-placement gains plus the pole sets that produced them.
#[derive(Debug, Clone)]
pub struct FeedbackGain {
    per_output: Vec<Vec<f64>>,
    poles: Vec<Vec<Complex64>>,
}

impl FeedbackGain {
    /// Builds one row gain per output channel from that channel's pole
    /// multiset. The chain length is the pole count.
    pub fn from_poles(per_output_poles: Vec<Vec<Complex64>>) -> Result<Self> {
        let mut per_output = Vec::with_capacity(per_output_poles.len());
        for poles in &per_output_poles {
            per_output.push(pole_placement_companion(poles, poles.len())?);
        }
        Ok(Self {
            per_output,
            poles: per_output_poles,
        })
    }

    /// Default design for a follower: every output channel gets the
    /// default pole set for its relative degree.
    pub fn for_follower(fm: &FollowerModel) -> Result<Self> {
        Self::from_poles(fm.rel_degrees().iter().map(|&r| default_poles(r)).collect())
    }

    pub fn per_output(&self) -> &[Vec<f64>] {
        &self.per_output
    }

    pub fn poles(&self) -> &[Vec<Complex64>] {
        &self.poles
    }
}

/// Default pole multiset for a chain of length r: a dominant pole at -2,
/// padded with poles at -6. For r = 2 this is the study's {-2, -6}.
pub fn default_poles(r: usize) -> Vec<Complex64> {
    (0..r)
        .map(|j| Complex64::new(if j == 0 { -2.0 } else { -6.0 }, 0.0))
        .collect()
}

/// Tracking coordinates of a follower against a leader state (true or
/// estimated): xi per channel k is [h_k - q_k, L_f h_k - L_p q_k, ...] up
/// to order r_k - 1, theta comes from the plant's internal map if present.
pub fn tracking_coords(
    fm: &FollowerModel,
    x: &[f64],
    w: &[f64],
    model: &LeaderModel,
) -> TrackingState {
    let mut xi = Vec::with_capacity(fm.rel_degrees().iter().sum());
    for (k, &rk) in fm.rel_degrees().iter().enumerate() {
        for j in 0..rk {
            xi.push(fm.lie_f(x, w, k, j) - model.output_deriv(w, k, j));
        }
    }
    let theta = fm.internal_coords(x).unwrap_or_default();
    TrackingState { xi, theta }
}

fn check_gain_shape(fm: &FollowerModel, gain: &FeedbackGain) -> Result<()> {
    if gain.per_output.len() != fm.output_dim() {
        return Err(ControlError::BadShape {
            context: format!(
                "{} gain rows for {} output channels",
                gain.per_output.len(),
                fm.output_dim()
            ),
        });
    }
    for (k, row) in gain.per_output.iter().enumerate() {
        if row.len() != fm.rel_degrees()[k] {
            return Err(ControlError::BadShape {
                context: format!(
                    "gain row {k} has length {} but the channel's relative degree is {}",
                    row.len(),
                    fm.rel_degrees()[k]
                ),
            });
        }
    }
    Ok(())
}

/// Single-input single-output tracking law: cancels the drift derivative
/// of order r, injects the leader's r-th output derivative, and feeds back
/// the tracking coordinates, all divided by the decoupling scalar. Pass
/// the true leader state for the nominal law or an estimate recovered from
/// the distributed observer for the certainty-equivalence version.
pub fn siso_decentralized(
    fm: &FollowerModel,
    x: &[f64],
    w_or_estimate: &[f64],
    model: &LeaderModel,
    gain: &FeedbackGain,
) -> Result<f64> {
    if fm.output_dim() != 1 || fm.input_dim() != 1 {
        return Err(ControlError::BadShape {
            context: format!(
                "siso law on a plant with {} inputs and {} outputs",
                fm.input_dim(),
                fm.output_dim()
            ),
        });
    }
    check_gain_shape(fm, gain)?;
    let w = w_or_estimate;
    let a = fm.lie_g(x, w, 0, 0);
    if a.abs() <= DECOUPLING_EPS {
        return Err(ControlError::RelativeDegreeLost {
            state: x.to_vec(),
            value: a,
        });
    }
    let r = fm.rel_degrees()[0];
    let ts = tracking_coords(fm, x, w, model);
    let v: f64 = gain.per_output[0]
        .iter()
        .zip(&ts.xi)
        .map(|(kj, xij)| kj * xij)
        .sum();
    Ok((-fm.lie_f(x, w, 0, r) + model.output_deriv(w, 0, r) + v) / a)
}

/// Multi-output tracking law u = A^{-1}(-beta + v): A is the decoupling
/// matrix of Lie derivatives along the input fields, beta stacks the
/// order-r_k drift-vs-leader gaps, and v applies the per-channel gains to
/// the tracking coordinates. Reduces to the scalar law when m = 1.
pub fn mimo_decentralized(
    fm: &FollowerModel,
    x: &[f64],
    w_or_estimate: &[f64],
    model: &LeaderModel,
    gain: &FeedbackGain,
) -> Result<Vec<f64>> {
    let m = fm.output_dim();
    if fm.input_dim() != m {
        return Err(ControlError::BadShape {
            context: format!(
                "decoupling needs as many inputs as outputs, got {} and {m}",
                fm.input_dim()
            ),
        });
    }
    check_gain_shape(fm, gain)?;
    let w = w_or_estimate;
    let a = Matrix::from_fn(m, m, |k, l| fm.lie_g(x, w, k, l));

    // Condition estimate through the singular values of A.
    let gram = a.transpose().matmul(&a);
    let (max_sq, min_sq) = linalg::spectral_bounds(&gram)?;
    let sigma_max = max_sq.max(0.0).sqrt();
    let sigma_min = min_sq.max(0.0).sqrt();
    let cond = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    if sigma_min <= DECOUPLING_EPS || cond >= CONDITION_LIMIT {
        return Err(ControlError::SingularDecoupling {
            state: x.to_vec(),
            cond,
        });
    }

    let ts = tracking_coords(fm, x, w, model);
    let mut rhs = Vec::with_capacity(m);
    let mut offset = 0;
    for (k, &rk) in fm.rel_degrees().iter().enumerate() {
        let beta = fm.lie_f(x, w, k, rk) - model.output_deriv(w, k, rk);
        let v: f64 = gain.per_output[k]
            .iter()
            .zip(&ts.xi[offset..offset + rk])
            .map(|(kj, xij)| kj * xij)
            .sum();
        rhs.push(-beta + v);
        offset += rk;
    }
    Ok(linalg::solve_linear(&a, &rhs)?)
}

/// Closed-loop matrix of the stacked tracking coordinates: one companion
/// block per output channel, integrator chain with the gain row at the
/// bottom. Hurwitz whenever the gains came from stable pole sets.
pub fn closed_loop_xi_matrix(gain: &FeedbackGain, degrees: &[usize]) -> Result<Matrix> {
    if gain.per_output.len() != degrees.len() {
        return Err(ControlError::BadShape {
            context: format!(
                "{} gain rows for {} channels",
                gain.per_output.len(),
                degrees.len()
            ),
        });
    }
    for (k, row) in gain.per_output.iter().enumerate() {
        if row.len() != degrees[k] {
            return Err(ControlError::BadShape {
                context: format!(
                    "gain row {k} has length {} but channel degree is {}",
                    row.len(),
                    degrees[k]
                ),
            });
        }
    }
    let total: usize = degrees.iter().sum();
    let mut out = Matrix::zeros(total, total);
    let mut offset = 0;
    for (row, &r) in gain.per_output.iter().zip(degrees) {
        for i in 0..r.saturating_sub(1) {
            out.set(offset + i, offset + i + 1, 1.0);
        }
        for (j, &kj) in row.iter().enumerate() {
            out.set(offset + r - 1, offset + j, kj);
        }
        offset += r;
    }
    Ok(out)
}
