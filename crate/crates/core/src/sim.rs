//! Deterministic fixed-step simulation of the coupled loop: leader flow,
//! distributed observer network, and optionally the controlled followers.
//!
//! One scenario integrates on a single time grid with classical RK4. The
//! leader always evolves in its original coordinates; observer estimates
//! live in canonical coordinates (or original ones for the baseline
//! comparison observer); follower inputs are recomputed inside every
//! integrator stage, so the closed loop is simulated without a hold.
//! Anything that goes numerically wrong mid-run (non-finite derivatives, a
//! state norm past the guard, a lost relative degree) truncates the
//! trajectory and flags it instead of erroring, so misconfigured scenarios
//! still produce inspectable output.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{self, ControlError, FeedbackGain};
use crate::graph::DirectedGraph;
use crate::linalg::Matrix;
use crate::models::{FollowerModel, LeaderModel};
use crate::observer::{self, ObserverError, ObserverGain};

pub type Result<T> = std::result::Result<T, SimError>;

/// Integration aborts once the state norm passes this guard.
const DIVERGENCE_GUARD: f64 = 1e9;
/// Decay fits ignore samples below this fraction of the series peak.
const FIT_FLOOR_RATIO: f64 = 1e-13;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario invalid: {context}")]
    BadScenario { context: String },
    #[error("derivative produced a non-finite value")]
    NonFiniteDerivative,
    #[error("decay fit needs at least two usable samples, found {found}")]
    DegenerateFit { found: usize },
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Leader plus observer network only.
    ObserverOnly,
    /// Full loop; followers are driven from observer estimates.
    DistributedControl,
    /// Full loop; followers read the true leader state, observers still run.
    OracleControl,
    /// Leader plus the original-coordinates comparison observer.
    BaselineObserver,
}

impl SimMode {
    pub fn has_followers(self) -> bool {
        matches!(self, SimMode::DistributedControl | SimMode::OracleControl)
    }

    fn is_canonical(self) -> bool {
        !matches!(self, SimMode::BaselineObserver)
    }
}

/// Initial condition for one vector: given outright, or drawn uniformly
/// per coordinate from [-radius, radius].
#[derive(Debug, Clone)]
pub enum VectorInit {
    Fixed(Vec<f64>),
    Random { radius: f64 },
}

/// Initial estimates for the observer network. `Exact` starts every copy
/// on the consensus manifold (the leader's state, mapped to canonical
/// coordinates for the canonical modes).
#[derive(Debug, Clone)]
pub enum ObserverInit {
    Exact,
    PerNode(Vec<Vec<f64>>),
    Random { radius: f64 },
}

/// Coupling gain choice: a multiplier of the graph's minimum admissible
/// value, or an explicit number.
#[derive(Debug, Clone, Copy)]
pub enum Coupling {
    Multiplier(f64),
    Explicit(f64),
}

/// Observer design weights for a scenario. Omitted Q and R fall back to
/// identity; mu is carried for certificate computations.
#[derive(Debug, Clone)]
pub struct GainSpec {
    pub q: Option<Matrix>,
    pub r: Option<Matrix>,
    pub coupling: Coupling,
    pub mu: f64,
}

impl Default for GainSpec {
    fn default() -> Self {
        Self {
            q: None,
            r: None,
            coupling: Coupling::Multiplier(1.0),
            mu: 1.0,
        }
    }
}

/// One follower slot: the plant, its initial state, and an optional pole
/// override for its tracking gain (single-output plants only; None takes
/// the default pole set for the relative degree).
#[derive(Clone)]
pub struct FollowerSetup {
    pub model: FollowerModel,
    pub init: VectorInit,
    pub poles: Option<Vec<Complex64>>,
}

/// Everything a run needs. Randomness is consumed in a fixed order
/// (leader, then estimates by node, then followers by slot), so a seed
/// pins the whole trajectory.
#[derive(Clone)]
pub struct Scenario {
    pub leader: LeaderModel,
    pub leader_init: VectorInit,
    pub graph: DirectedGraph,
    pub followers: Vec<FollowerSetup>,
    pub observer_init: ObserverInit,
    pub gain: GainSpec,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub mode: SimMode,
}

/// Why and when a run stopped early.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub t: f64,
    pub reason: String,
}

/// Recorded run. All series share the `times` grid; index order is
/// [time][node][coordinate]. Canonical estimates are empty in baseline
/// mode; follower blocks are empty outside the control modes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mode: SimMode,
    pub times: Vec<f64>,
    pub leader: Vec<Vec<f64>>,
    pub canonical_estimates: Vec<Vec<Vec<f64>>>,
    pub original_estimates: Vec<Vec<Vec<f64>>>,
    pub follower_states: Vec<Vec<Vec<f64>>>,
    pub controls: Vec<Vec<Vec<f64>>>,
    pub error_norms: Vec<Vec<f64>>,
    pub output_gaps: Vec<Vec<f64>>,
    pub theta: Vec<Vec<Vec<f64>>>,
    pub divergence: Option<Divergence>,
}

impl Trajectory {
    /// Stacked observer error: the norm of all per-node errors joined into
    /// one vector, per time sample.
    pub fn stacked_error_norm(&self) -> Vec<f64> {
        self.error_norms
            .iter()
            .map(|row| row.iter().map(|e| e * e).sum::<f64>().sqrt())
            .collect()
    }
}

/// One classical Runge-Kutta step of the autonomous field `deriv`.
pub fn rk4_step<F>(deriv: &mut F, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::BadScenario {
            context: format!("step size must be positive and finite, got {dt}"),
        });
    }
    let n = state.len();
    let check = |k: Vec<f64>| -> Result<Vec<f64>> {
        if k.len() != n {
            return Err(SimError::BadScenario {
                context: format!("derivative has dimension {}, state has {n}", k.len()),
            });
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteDerivative);
        }
        Ok(k)
    };
    let shifted = |base: &[f64], dir: &[f64], scale: f64| -> Vec<f64> {
        base.iter().zip(dir).map(|(b, d)| b + scale * d).collect()
    };
    let k1 = check(deriv(state)?)?;
    let k2 = check(deriv(&shifted(state, &k1, dt / 2.0))?)?;
    let k3 = check(deriv(&shifted(state, &k2, dt / 2.0))?)?;
    let k4 = check(deriv(&shifted(state, &k3, dt))?)?;
    Ok((0..n)
        .map(|j| state[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect())
}

fn draw_vector(init: &VectorInit, dim: usize, what: &str, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match init {
        VectorInit::Fixed(v) => {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(SimError::BadScenario {
                    context: format!("{what} initial state must be a finite vector of dim {dim}"),
                });
            }
            Ok(v.clone())
        }
        VectorInit::Random { radius } => {
            if !(radius.is_finite() && *radius >= 0.0) {
                return Err(SimError::BadScenario {
                    context: format!("{what} init radius must be finite and nonnegative"),
                });
            }
            Ok((0..dim).map(|_| rng.random_range(-radius..=*radius)).collect())
        }
    }
}

struct Layout {
    s_w: usize,
    n: usize,
    est_dim: usize,
    follower_offsets: Vec<usize>,
    follower_dims: Vec<usize>,
    total: usize,
}

impl Layout {
    fn estimates(&self, state: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let off = self.s_w + i * self.est_dim;
                state[off..off + self.est_dim].to_vec()
            })
            .collect()
    }

    fn follower<'a>(&self, state: &'a [f64], i: usize) -> &'a [f64] {
        let off = self.follower_offsets[i];
        &state[off..off + self.follower_dims[i]]
    }
}

fn control_input(
    fm: &FollowerModel,
    x: &[f64],
    w_est: &[f64],
    leader: &LeaderModel,
    gain: &FeedbackGain,
) -> control::Result<Vec<f64>> {
    if fm.output_dim() == 1 {
        control::siso_decentralized(fm, x, w_est, leader, gain).map(|u| vec![u])
    } else {
        control::mimo_decentralized(fm, x, w_est, leader, gain)
    }
}

fn euclidean(v: &[f64]) -> f64 {
    // Fold from +0.0: the std float Sum starts at -0.0, which would turn
    // the norm of an empty slice into -0.0 (sqrt keeps the sign of zero).
    v.iter().map(|x| x * x).fold(0.0, |a, b| a + b).sqrt()
}

fn gap(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Integrates a scenario and records every step. Setup problems return an
/// error; anything that fails during integration truncates the recorded
/// trajectory and sets its divergence flag instead.
pub fn simulate(s: &Scenario) -> Result<Trajectory> {
    let n = s.graph.n();
    let bad = |context: String| SimError::BadScenario { context };
    if !(s.dt > 0.0 && s.dt.is_finite()) {
        return Err(bad(format!("dt must be positive, got {}", s.dt)));
    }
    if !(s.horizon >= s.dt && s.horizon.is_finite()) {
        return Err(bad(format!(
            "horizon {} must be at least one step {}",
            s.horizon, s.dt
        )));
    }
    if s.mode.has_followers() {
        if s.followers.len() != n {
            return Err(bad(format!(
                "{} followers for a graph with {n} nodes",
                s.followers.len()
            )));
        }
    } else if !s.followers.is_empty() {
        return Err(bad(format!(
            "mode without follower dynamics but {} followers configured",
            s.followers.len()
        )));
    }
    if s.mode.is_canonical() && !s.leader.has_canonical_data() {
        return Err(bad(format!(
            "leader '{}' lacks canonical-form data required by this mode",
            s.leader.name()
        )));
    }

    let s_w = s.leader.state_dim();
    let q = s.gain.q.clone().unwrap_or_else(|| Matrix::identity(s_w));
    let r = s.gain.r.clone().unwrap_or_else(|| Matrix::identity(s_w));
    let gain: ObserverGain = match s.gain.coupling {
        Coupling::Multiplier(m) => observer::design_gain(&s.leader, &s.graph, &q, &r, m)?,
        Coupling::Explicit(c) => {
            observer::design_gain(&s.leader, &s.graph, &q, &r, 1.0)?.with_coupling(c)?
        }
    };

    let mut follower_gains: Vec<FeedbackGain> = Vec::with_capacity(s.followers.len());
    for setup in &s.followers {
        let fg = match &setup.poles {
            None => FeedbackGain::for_follower(&setup.model)?,
            Some(poles) => {
                if setup.model.output_dim() != 1 {
                    return Err(bad(format!(
                        "pole override on '{}': only single-output plants take one",
                        setup.model.name()
                    )));
                }
                FeedbackGain::from_poles(vec![poles.clone()])?
            }
        };
        follower_gains.push(fg);
    }

    // Randomness order: leader, estimates by node, followers by slot.
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let w0 = draw_vector(&s.leader_init, s_w, "leader", &mut rng)?;
    let est_dim = s_w;
    let estimates0: Vec<Vec<f64>> = match &s.observer_init {
        ObserverInit::Exact => {
            let base = if s.mode.is_canonical() {
                s.leader.phi(&w0).expect("canonical data checked above")
            } else {
                w0.clone()
            };
            vec![base; n]
        }
        ObserverInit::PerNode(list) => {
            if list.len() != n {
                return Err(bad(format!("{} estimate inits for {n} nodes", list.len())));
            }
            for (i, v) in list.iter().enumerate() {
                if v.len() != est_dim || v.iter().any(|x| !x.is_finite()) {
                    return Err(bad(format!(
                        "estimate init {i} must be a finite vector of dim {est_dim}"
                    )));
                }
            }
            list.clone()
        }
        ObserverInit::Random { radius } => {
            let spec = VectorInit::Random { radius: *radius };
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                out.push(draw_vector(&spec, est_dim, &format!("estimate {i}"), &mut rng)?);
            }
            out
        }
    };
    let mut follower_inits: Vec<Vec<f64>> = Vec::with_capacity(s.followers.len());
    for (i, setup) in s.followers.iter().enumerate() {
        follower_inits.push(draw_vector(
            &setup.init,
            setup.model.state_dim(),
            &format!("follower {i}"),
            &mut rng,
        )?);
    }

    let follower_dims: Vec<usize> = s.followers.iter().map(|f| f.model.state_dim()).collect();
    let mut follower_offsets = Vec::with_capacity(follower_dims.len());
    let mut off = s_w + n * est_dim;
    for d in &follower_dims {
        follower_offsets.push(off);
        off += d;
    }
    let layout = Layout {
        s_w,
        n,
        est_dim,
        follower_offsets,
        follower_dims,
        total: off,
    };

    let mut state = vec![0.0; layout.total];
    state[..s_w].copy_from_slice(&w0);
    for (i, est) in estimates0.iter().enumerate() {
        let o = s_w + i * est_dim;
        state[o..o + est_dim].copy_from_slice(est);
    }
    for (i, x0) in follower_inits.iter().enumerate() {
        let o = layout.follower_offsets[i];
        state[o..o + x0.len()].copy_from_slice(x0);
    }

    let mode = s.mode;
    let leader = &s.leader;
    let graph = &s.graph;
    let followers = &s.followers;
    let fgains = &follower_gains;
    let lay = &layout;
    let mut deriv = move |st: &[f64]| -> Result<Vec<f64>> {
        let w = &st[..lay.s_w];
        let mut out = vec![0.0; lay.total];
        out[..lay.s_w].copy_from_slice(&leader.p().eval(w));
        let estimates = lay.estimates(st);
        let est_rhs = if mode.is_canonical() {
            let eta0 = leader.phi(w).expect("canonical data checked at setup");
            observer::rhs_for_estimates(leader, graph, &gain, &estimates, &eta0)
        } else {
            observer::baseline_rhs(&estimates, w, leader, gain.c(), graph)
        };
        for (i, row) in est_rhs.iter().enumerate() {
            let o = lay.s_w + i * lay.est_dim;
            out[o..o + lay.est_dim].copy_from_slice(row);
        }
        if mode.has_followers() {
            for i in 0..lay.n {
                let x = lay.follower(st, i);
                let w_ctrl: Vec<f64> = match mode {
                    SimMode::OracleControl => w.to_vec(),
                    _ => leader
                        .phi_inv(&estimates[i])
                        .expect("canonical data checked at setup"),
                };
                let fm = &followers[i].model;
                let u = control_input(fm, x, &w_ctrl, leader, &fgains[i])?;
                let mut xdot = fm.f(x, w);
                let gmat = fm.input_matrix(x);
                for (j, xd) in xdot.iter_mut().enumerate() {
                    for (l, ul) in u.iter().enumerate() {
                        *xd += gmat.get(j, l) * ul;
                    }
                }
                let o = lay.follower_offsets[i];
                out[o..o + xdot.len()].copy_from_slice(&xdot);
            }
        }
        Ok(out)
    };

    let n_steps = (s.horizon / s.dt).round().max(1.0) as usize;
    let mut traj = Trajectory {
        mode,
        times: Vec::with_capacity(n_steps + 1),
        leader: Vec::with_capacity(n_steps + 1),
        canonical_estimates: Vec::new(),
        original_estimates: Vec::new(),
        follower_states: Vec::new(),
        controls: Vec::new(),
        error_norms: Vec::new(),
        output_gaps: Vec::new(),
        theta: Vec::new(),
        divergence: None,
    };

    // Builds one sample row; control evaluation can fail, in which case the
    // row is not recorded and the run is flagged.
    let record = |traj: &mut Trajectory, t: f64, st: &[f64]| -> std::result::Result<(), String> {
        let w = &st[..layout.s_w];
        let estimates = layout.estimates(st);
        let (canonical, original, e_norms): (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) =
            if mode.is_canonical() {
                let eta0 = s.leader.phi(w).expect("canonical data checked at setup");
                let original: Vec<Vec<f64>> = estimates
                    .iter()
                    .map(|e| s.leader.phi_inv(e).expect("canonical data checked at setup"))
                    .collect();
                let e_norms = estimates.iter().map(|e| euclidean(&gap(e, &eta0))).collect();
                (estimates, original, e_norms)
            } else {
                let e_norms = estimates.iter().map(|e| euclidean(&gap(e, w))).collect();
                (Vec::new(), estimates, e_norms)
            };
        let mut xs = Vec::new();
        let mut us = Vec::new();
        let mut gaps = Vec::new();
        let mut thetas = Vec::new();
        if mode.has_followers() {
            let y0 = s.leader.output(w);
            for i in 0..layout.n {
                let x = layout.follower(st, i);
                let fm = &s.followers[i].model;
                let w_ctrl: Vec<f64> = match mode {
                    SimMode::OracleControl => w.to_vec(),
                    _ => s
                        .leader
                        .phi_inv(&canonical[i])
                        .expect("canonical data checked at setup"),
                };
                let u = control_input(fm, x, &w_ctrl, &s.leader, &follower_gains[i])
                    .map_err(|e| e.to_string())?;
                let y = fm.output(x);
                let g = gap(&y, &y0[..y.len()]);
                gaps.push(if g.len() == 1 { g[0] } else { euclidean(&g) });
                thetas.push(fm.internal_coords(x).unwrap_or_default());
                xs.push(x.to_vec());
                us.push(u);
            }
        }
        traj.times.push(t);
        traj.leader.push(w.to_vec());
        if mode.is_canonical() {
            traj.canonical_estimates.push(canonical);
        }
        traj.original_estimates.push(original);
        traj.error_norms.push(e_norms);
        if mode.has_followers() {
            traj.follower_states.push(xs);
            traj.controls.push(us);
            traj.output_gaps.push(gaps);
            traj.theta.push(thetas);
        }
        Ok(())
    };

    for step in 0..=n_steps {
        let t = step as f64 * s.dt;
        if let Err(reason) = record(&mut traj, t, &state) {
            traj.divergence = Some(Divergence { t, reason });
            break;
        }
        if step == n_steps {
            break;
        }
        match rk4_step(&mut deriv, &state, s.dt) {
            Ok(next) => {
                let norm = euclidean(&next);
                if !norm.is_finite() || norm > DIVERGENCE_GUARD {
                    traj.divergence = Some(Divergence {
                        t: t + s.dt,
                        reason: format!("state norm {norm:.3e} exceeded the 1e9 guard"),
                    });
                    break;
                }
                state = next;
            }
            Err(e) => {
                traj.divergence = Some(Divergence {
                    t: t + s.dt,
                    reason: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(traj)
}

/// Exponential decay fit of a norm series: least-squares slope of the log
/// over [t_start, end], with samples at or below the numerical floor
/// (1e-13 of the series peak) excluded.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub rate: f64,
    pub residual: f64,
    pub samples: usize,
}

pub fn fit_decay_rate(times: &[f64], norms: &[f64], t_start: f64) -> Result<DecayFit> {
    if times.len() != norms.len() {
        return Err(SimError::BadScenario {
            context: format!(
                "decay fit got {} times and {} norms",
                times.len(),
                norms.len()
            ),
        });
    }
    let peak = norms.iter().fold(0.0_f64, |a, &b| a.max(b));
    let floor = FIT_FLOOR_RATIO * peak;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(t, n)| **t >= t_start && **n > floor && n.is_finite())
        .map(|(t, n)| (*t, n.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(SimError::DegenerateFit { found: pts.len() });
    }
    let m = pts.len() as f64;
    let mean_t = pts.iter().map(|(t, _)| t).sum::<f64>() / m;
    let mean_y = pts.iter().map(|(_, y)| y).sum::<f64>() / m;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (t, y) in &pts {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
    }
    if stt == 0.0 {
        return Err(SimError::DegenerateFit { found: pts.len() });
    }
    let rate = sty / stt;
    let intercept = mean_y - rate * mean_t;
    let ss: f64 = pts
        .iter()
        .map(|(t, y)| {
            let d = y - (rate * t + intercept);
            d * d
        })
        .sum();
    Ok(DecayFit {
        rate,
        residual: (ss / m).sqrt(),
        samples: pts.len(),
    })
}

/// Per-follower tracking summary over a control-mode trajectory.
#[derive(Debug, Clone, Copy)]
pub struct FollowerMetrics {
    /// sup of |output gap| over the last quarter of the horizon.
    pub sup_tail_gap: f64,
    /// |output gap| at the final recorded sample.
    pub final_gap: f64,
    /// Largest internal-state norm over the whole run (0 when none).
    pub max_theta_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrackingMetrics {
    pub per_follower: Vec<FollowerMetrics>,
    pub diverged: bool,
}

pub fn tracking_metrics(traj: &Trajectory) -> Result<TrackingMetrics> {
    if !traj.mode.has_followers() {
        return Err(SimError::BadScenario {
            context: "tracking metrics need a control-mode trajectory".into(),
        });
    }
    let t_end = *traj.times.last().expect("trajectory has at least one sample");
    let tail_start = 0.75 * t_end;
    let n = traj.output_gaps.first().map_or(0, Vec::len);
    let mut per_follower = Vec::with_capacity(n);
    for i in 0..n {
        let mut sup_tail = 0.0_f64;
        let mut max_theta = 0.0_f64;
        for (idx, t) in traj.times.iter().enumerate() {
            let g = traj.output_gaps[idx][i].abs();
            if *t >= tail_start {
                sup_tail = sup_tail.max(g);
            }
            max_theta = max_theta.max(euclidean(&traj.theta[idx][i]));
        }
        let final_gap = traj.output_gaps.last().map_or(0.0, |row| row[i].abs());
        per_follower.push(FollowerMetrics {
            sup_tail_gap: sup_tail,
            final_gap,
            max_theta_norm: max_theta,
        });
    }
    Ok(TrackingMetrics {
        per_follower,
        diverged: traj.divergence.is_some(),
    })
}

fn push_f64(out: &mut String, v: f64) {
    out.push(',');
    out.push_str(&format!("{v:.16e}"));
}

/// Renders a trajectory as CSV: a header row naming every column, then one
/// row per sample with floats at 17 significant digits. Column blocks
/// depend on the mode (estimate blocks always, follower blocks only for
/// control modes).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut header = String::from("t");
    let s_w = traj.leader.first().map_or(0, Vec::len);
    for k in 0..s_w {
        header.push_str(&format!(",w[{k}]"));
    }
    let n = traj.error_norms.first().map_or(0, Vec::len);
    if traj.mode.is_canonical() {
        let s = traj.canonical_estimates.first().map_or(0, |row| row[0].len());
        for i in 0..n {
            for k in 0..s {
                header.push_str(&format!(",etahat[{i}][{k}]"));
            }
        }
    }
    let s_o = traj.original_estimates.first().map_or(0, |row| row[0].len());
    for i in 0..n {
        for k in 0..s_o {
            header.push_str(&format!(",what[{i}][{k}]"));
        }
    }
    if traj.mode.has_followers() {
        let dims: Vec<usize> = traj.follower_states[0].iter().map(Vec::len).collect();
        for (i, d) in dims.iter().enumerate() {
            for k in 0..*d {
                header.push_str(&format!(",x[{i}][{k}]"));
            }
        }
        for (i, u) in traj.controls[0].iter().enumerate() {
            if u.len() == 1 {
                header.push_str(&format!(",u[{i}]"));
            } else {
                for l in 0..u.len() {
                    header.push_str(&format!(",u[{i}][{l}]"));
                }
            }
        }
    }
    for i in 0..n {
        header.push_str(&format!(",e_norm[{i}]"));
    }
    if traj.mode.has_followers() {
        for i in 0..traj.output_gaps[0].len() {
            header.push_str(&format!(",eps[{i}]"));
        }
    }

    let mut out = header;
    out.push('\n');
    for (idx, t) in traj.times.iter().enumerate() {
        let mut row = format!("{t:.16e}");
        for v in &traj.leader[idx] {
            push_f64(&mut row, *v);
        }
        if traj.mode.is_canonical() {
            for est in &traj.canonical_estimates[idx] {
                for v in est {
                    push_f64(&mut row, *v);
                }
            }
        }
        for est in &traj.original_estimates[idx] {
            for v in est {
                push_f64(&mut row, *v);
            }
        }
        if traj.mode.has_followers() {
            for x in &traj.follower_states[idx] {
                for v in x {
                    push_f64(&mut row, *v);
                }
            }
            for u in &traj.controls[idx] {
                for v in u {
                    push_f64(&mut row, *v);
                }
            }
        }
        for v in &traj.error_norms[idx] {
            push_f64(&mut row, *v);
        }
        if traj.mode.has_followers() {
            for v in &traj.output_gaps[idx] {
                push_f64(&mut row, *v);
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}
