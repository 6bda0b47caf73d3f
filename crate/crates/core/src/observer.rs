//! Distributed observer for a leader in canonical form.
//!
//! Each follower runs a local copy of the leader's canonical dynamics,
//! corrected by a gain acting on disagreement with its in-neighbors and,
//! for pinned followers, with the leader itself. The gain comes from a
//! Riccati design on the canonical drift; the network is stable whenever
//! every block shifted by an eigenvalue of the pinned coupling matrix is
//! Hurwitz, which a large enough coupling gain guarantees.
//!
//! Also here: the Taylor-condition baseline observer that couples raw
//! leader coordinates (for comparison runs), and the convergence
//! certificate that bounds the nonlinearity's output sensitivity on a box
//! and turns a network Lyapunov solution into a certified decay rate.

use num_complex::Complex64;

use crate::graph::{self, DirectedGraph};
use crate::linalg::{self, Matrix};
use crate::models::LeaderModel;

pub type Result<T> = std::result::Result<T, ObserverError>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ObserverError {
    #[error("coupling multiplier must be at least 1, got {given}")]
    BadMultiplier { given: f64 },
    #[error("coupling gain must be positive and finite, got {given}")]
    BadCoupling { given: f64 },
    #[error("mu must be positive and finite, got {given}")]
    BadMu { given: f64 },
    #[error("model '{name}' lacks canonical-form data (coordinate change and injection)")]
    MissingCanonicalData { name: String },
    #[error("observer network shape error: {context}")]
    BadDimensions { context: String },
    #[error("network matrix is not Hurwitz (max eigenvalue real part {max_real:.3e})")]
    UnstableNetwork { max_real: f64 },
    #[error("estimate for follower {follower} maps outside the model's domain box")]
    EstimateOutOfDomain { follower: usize },
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Observer gain package: the correction matrix F, the coupling gain c,
/// and the Riccati data (weights and solution) that produced F.
#[derive(Debug, Clone)]
pub struct ObserverGain {
    f: Matrix,
    c: f64,
    q: Matrix,
    r: Matrix,
    p1: Matrix,
}

impl ObserverGain {
    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// Riccati solution behind F.
    pub fn p1(&self) -> &Matrix {
        &self.p1
    }

    /// Same gain matrix with an explicitly chosen coupling gain, for
    /// scenarios that pin c instead of a multiplier of the graph bound.
    pub fn with_coupling(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ObserverError::BadCoupling { given: c });
        }
        self.c = c;
        Ok(self)
    }
}

/// Designs the observer gain for a leader model on a given graph: F is the
/// Riccati solution times the inverse input weight, and the coupling gain
/// is `c_multiplier` times the graph's minimum admissible value.
pub fn design_gain(
    model: &LeaderModel,
    graph: &DirectedGraph,
    q: &Matrix,
    r: &Matrix,
    c_multiplier: f64,
) -> Result<ObserverGain> {
    if !(c_multiplier >= 1.0 && c_multiplier.is_finite()) {
        return Err(ObserverError::BadMultiplier {
            given: c_multiplier,
        });
    }
    let bound = graph::coupling_bound(graph)?;
    linalg::require_spd(q, "Q")?;
    linalg::require_spd(r, "R")?;
    let s = model.state_dim();
    if q.rows() != s || r.rows() != s {
        return Err(ObserverError::BadDimensions {
            context: format!(
                "weights must be {s}x{s} to match the canonical state, got {}x{} and {}x{}",
                q.rows(),
                q.cols(),
                r.rows(),
                r.cols()
            ),
        });
    }
    let p1 = linalg::solve_care(model.a0(), q, r)?;
    let f = p1.matmul(&linalg::inverse(r)?);
    Ok(ObserverGain {
        f,
        c: c_multiplier * bound,
        q: q.clone(),
        r: r.clone(),
        p1,
    })
}

/// Network error matrix: identity-block copies of the canonical drift,
/// minus the coupling gain times the pinned graph matrix crossed with F.
pub fn assemble_m(a0: &Matrix, f: &Matrix, c: f64, pinned: &Matrix) -> Result<Matrix> {
    let s = a0.rows();
    if !a0.is_square() || !f.is_square() || !pinned.is_square() || f.rows() != s {
        return Err(ObserverError::BadDimensions {
            context: format!(
                "assemble_m wants square A0 and F of equal size and a square coupling matrix, \
                 got {}x{}, {}x{}, {}x{}",
                a0.rows(),
                a0.cols(),
                f.rows(),
                f.cols(),
                pinned.rows(),
                pinned.cols()
            ),
        });
    }
    let n = pinned.rows();
    let blocks = linalg::kron(&Matrix::identity(n), a0);
    let coupling = linalg::kron(pinned, f).scale(c);
    Ok(blocks.sub(&coupling))
}

/// Embeds the complex-shifted block A0 - c*lambda*F as a real matrix of
/// twice the size whose spectrum is the block's spectrum plus conjugates.
fn complex_block_embedding(a0: &Matrix, f: &Matrix, c: f64, lambda: Complex64) -> Matrix {
    let s = a0.rows();
    let real_block = a0.sub(&f.scale(c * lambda.re));
    let imag_block = f.scale(c * lambda.im);
    let mut out = Matrix::zeros(2 * s, 2 * s);
    out.set_block(0, 0, &real_block);
    out.set_block(s, s, &real_block);
    out.set_block(0, s, &imag_block);
    out.set_block(s, 0, &imag_block.scale(-1.0));
    out
}

/// Block stability criterion: the network matrix is Hurwitz exactly when
/// A0 - c*lambda*F is Hurwitz for every eigenvalue lambda of the pinned
/// coupling matrix. Complex eigenvalues are handled by a real embedding.
pub fn lemma2_check(a0: &Matrix, f: &Matrix, c: f64, pinned: &Matrix) -> Result<bool> {
    let spectrum = linalg::eigenvalues(pinned)?;
    for lambda in spectrum.eigenvalues() {
        let hurwitz = if lambda.im.abs() <= 1e-12 {
            let block = a0.sub(&f.scale(c * lambda.re));
            linalg::is_hurwitz(&block, 0.0)?
        } else {
            let embedded = complex_block_embedding(a0, f, c, *lambda);
            linalg::is_hurwitz(&embedded, 0.0)?
        };
        if !hurwitz {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The distributed observer: per-follower canonical estimates plus the
/// data needed to advance them.
pub struct ObserverNetwork {
    n: usize,
    estimates: Vec<Vec<f64>>,
    gain: ObserverGain,
    graph: DirectedGraph,
    model: LeaderModel,
}

impl ObserverNetwork {
    pub fn new(
        model: LeaderModel,
        graph: DirectedGraph,
        gain: ObserverGain,
        estimates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !model.has_canonical_data() {
            return Err(ObserverError::MissingCanonicalData {
                name: model.name().to_string(),
            });
        }
        let s = model.state_dim();
        if gain.f.rows() != s || !gain.f.is_square() {
            return Err(ObserverError::BadDimensions {
                context: format!(
                    "gain F is {}x{} but the canonical state has dimension {s}",
                    gain.f.rows(),
                    gain.f.cols()
                ),
            });
        }
        if estimates.len() != graph.n() {
            return Err(ObserverError::BadDimensions {
                context: format!(
                    "{} estimates for a graph with {} nodes",
                    estimates.len(),
                    graph.n()
                ),
            });
        }
        for (i, est) in estimates.iter().enumerate() {
            if est.len() != s || est.iter().any(|v| !v.is_finite()) {
                return Err(ObserverError::BadDimensions {
                    context: format!("estimate {i} must be a finite vector of dimension {s}"),
                });
            }
        }
        Ok(Self {
            n: graph.n(),
            estimates,
            gain,
            graph,
            model,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn estimates(&self) -> &[Vec<f64>] {
        &self.estimates
    }

    /// Replaces the estimate block; the simulation engine calls this
    /// between integrator steps.
    pub fn set_estimates(&mut self, estimates: Vec<Vec<f64>>) -> Result<()> {
        let s = self.model.state_dim();
        if estimates.len() != self.n || estimates.iter().any(|e| e.len() != s) {
            return Err(ObserverError::BadDimensions {
                context: format!("expected {} estimates of dimension {s}", self.n),
            });
        }
        self.estimates = estimates;
        Ok(())
    }

    pub fn gain(&self) -> &ObserverGain {
        &self.gain
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn model(&self) -> &LeaderModel {
        &self.model
    }
}

/// Time derivative of every estimate given the leader's current canonical
/// state: local canonical dynamics plus the gained disagreement signal,
/// where pinned followers compare against the leader directly.
pub fn observer_rhs(net: &ObserverNetwork, eta0: &[f64]) -> Vec<Vec<f64>> {
    rhs_for_estimates(&net.model, &net.graph, &net.gain, &net.estimates, eta0)
}

pub(crate) fn rhs_for_estimates(
    model: &LeaderModel,
    graph: &DirectedGraph,
    gain: &ObserverGain,
    estimates: &[Vec<f64>],
    eta0: &[f64],
) -> Vec<Vec<f64>> {
    let s = model.state_dim();
    debug_assert_eq!(eta0.len(), s);
    let injection = model.injection_map().expect("network requires canonical data");
    let n = estimates.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let eta_i = &estimates[i];
        let mut disagreement = vec![0.0; s];
        for j in graph.in_neighbors(i) {
            for (d, (ej, ei)) in disagreement.iter_mut().zip(estimates[j].iter().zip(eta_i)) {
                *d += ej - ei;
            }
        }
        let b_i = graph.pin(i);
        if b_i != 0.0 {
            for (d, (l, ei)) in disagreement.iter_mut().zip(eta0.iter().zip(eta_i)) {
                *d += b_i * (l - ei);
            }
        }
        let y = model.c.matvec(eta_i);
        let mut rhs = model.a0.matvec(eta_i);
        let inj = injection(&y);
        let corr = gain.f.matvec(&disagreement);
        for k in 0..s {
            rhs[k] += inj[k] + gain.c * corr[k];
        }
        out.push(rhs);
    }
    out
}

/// Baseline comparison observer in the leader's original coordinates:
/// each copy runs the raw leader field and couples states directly, with
/// the same pinning pattern as the canonical observer.
pub fn baseline_rhs(
    estimates: &[Vec<f64>],
    w: &[f64],
    model: &LeaderModel,
    c: f64,
    graph: &DirectedGraph,
) -> Vec<Vec<f64>> {
    let s = model.state_dim();
    let n = estimates.len();
    debug_assert_eq!(n, graph.n());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let w_i = &estimates[i];
        debug_assert_eq!(w_i.len(), s);
        let mut rhs = model.p.eval(w_i);
        for j in graph.in_neighbors(i) {
            for (r, (wj, wi)) in rhs.iter_mut().zip(estimates[j].iter().zip(w_i)) {
                *r += c * (wj - wi);
            }
        }
        let b_i = graph.pin(i);
        if b_i != 0.0 {
            for (r, (wl, wi)) in rhs.iter_mut().zip(w.iter().zip(w_i)) {
                *r += c * b_i * (wl - wi);
            }
        }
        out.push(rhs);
    }
    out
}

/// Maps every canonical estimate back to original leader coordinates.
/// Errors if a mapped estimate leaves the model's declared domain box.
pub fn estimates_in_original_coords(net: &ObserverNetwork) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(net.n);
    for (i, eta) in net.estimates.iter().enumerate() {
        let w = net
            .model
            .phi_inv(eta)
            .expect("network requires canonical data");
        let inside = w
            .iter()
            .zip(net.model.domain_box())
            .all(|(wi, (lo, hi))| wi.is_finite() && *wi >= *lo && *wi <= *hi);
        if !inside {
            return Err(ObserverError::EstimateOutOfDomain { follower: i });
        }
        out.push(w);
    }
    Ok(out)
}

/// Output of [`convergence_certificate`]: the gridded sensitivity bound on
/// the injection nonlinearity and the Lyapunov quantities derived from it.
/// `decay_rate_bound` is reported with its sign: negative certifies decay.
#[derive(Debug, Clone)]
pub struct ConvergenceCertificate {
    pub mu: f64,
    pub lipschitz_l: Matrix,
    pub alpha: f64,
    pub kappa_bound: f64,
    pub decay_rate_bound: f64,
    pub sufficient: bool,
}

/// Grid resolution per output dimension when bounding the injection's
/// partial derivatives over the output box.
const LIPSCHITZ_GRID: usize = 101;

/// Builds the convergence certificate for an observer design on a graph:
/// bounds every partial derivative of the injection over `output_box` on a
/// grid, forms the sensitivity constant alpha, solves the network Lyapunov
/// equation at level `mu`, and reports the certified decay-rate bound plus
/// whether the smallness condition (kappa below 4 mu) holds.
pub fn convergence_certificate(
    model: &LeaderModel,
    gain: &ObserverGain,
    graph: &DirectedGraph,
    mu: f64,
    output_box: &[(f64, f64)],
) -> Result<ConvergenceCertificate> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ObserverError::BadMu { given: mu });
    }
    let injection = model
        .injection_map()
        .ok_or_else(|| ObserverError::MissingCanonicalData {
            name: model.name().to_string(),
        })?;
    let s = model.state_dim();
    let r = model.output_dim();
    if output_box.len() != r {
        return Err(ObserverError::BadDimensions {
            context: format!(
                "output box has {} intervals but the model has {r} outputs",
                output_box.len()
            ),
        });
    }

    let pinned = graph::pinned_matrix(graph);
    let m = assemble_m(model.a0(), gain.f(), gain.c(), &pinned)?;
    let (max_real, _) = linalg::spectral_bounds(&m)?;
    if max_real >= 0.0 {
        return Err(ObserverError::UnstableNetwork { max_real });
    }

    // Grid sup of |da_j / dy_i| over the output box.
    let mut lipschitz = Matrix::zeros(s, r);
    let mut grid_point = vec![0.0; r];
    let total = LIPSCHITZ_GRID.pow(r as u32);
    for flat in 0..total {
        let mut rem = flat;
        for (gi, (lo, hi)) in grid_point.iter_mut().zip(output_box) {
            let idx = rem % LIPSCHITZ_GRID;
            rem /= LIPSCHITZ_GRID;
            *gi = lo + (hi - lo) * idx as f64 / (LIPSCHITZ_GRID - 1) as f64;
        }
        for i in 0..r {
            let h = 1e-6 * grid_point[i].abs().max(1.0);
            let mut yp = grid_point.clone();
            yp[i] += h;
            let plus = injection(&yp);
            yp[i] = grid_point[i] - h;
            let minus = injection(&yp);
            for j in 0..s {
                let slope = ((plus[j] - minus[j]) / (2.0 * h)).abs();
                if slope > lipschitz.get(j, i) {
                    lipschitz.set(j, i, slope);
                }
            }
        }
    }

    // alpha: largest singular value of L*C via the symmetric product.
    let lc = lipschitz.matmul(model.c());
    let gram = lc.transpose().matmul(&lc);
    let (alpha_sq, _) = linalg::spectral_bounds(&gram)?;
    let alpha = alpha_sq.max(0.0).sqrt();

    let p2 = linalg::solve_lyapunov(&m, mu)?;
    let (sigma_p2, _) = linalg::spectral_bounds(&p2)?;
    let kappa_bound = alpha * sigma_p2;
    let decay_rate_bound = -2.0 * mu / sigma_p2 + 0.5 * alpha;
    Ok(ConvergenceCertificate {
        mu,
        lipschitz_l: lipschitz,
        alpha,
        kappa_bound,
        decay_rate_bound,
        sufficient: kappa_bound < 4.0 * mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ScalarField, VectorField};
    use crate::models::{self, MapFn};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    /// Minimal canonical-form leader with a linear injection a(y) = gains*y,
    /// used to exercise the observer algebra without model baggage.
    fn linear_leader(degrees: &[usize], gains: Vec<f64>) -> LeaderModel {
        let (a0, c) = models::build_a0_c(degrees).unwrap();
        let s: usize = degrees.iter().sum();
        let r = degrees.len();
        assert_eq!(gains.len(), s);
        let a0c = a0.clone();
        let cc = c.clone();
        let inj_gains = gains.clone();
        let injection: MapFn = Arc::new(move |y: &[f64]| {
            // Spread outputs cyclically so every injection row is driven.
            inj_gains
                .iter()
                .enumerate()
                .map(|(j, g)| g * y[j % y.len().max(1)])
                .collect()
        });
        let p = {
            let a0 = a0.clone();
            let c = c.clone();
            let injection = Arc::clone(&injection);
            VectorField::new(s, move |eta| {
                let y = c.matvec(eta);
                let mut v = a0.matvec(eta);
                for (vi, ai) in v.iter_mut().zip(injection(&y)) {
                    *vi += ai;
                }
                v
            })
        };
        let outputs: Vec<ScalarField> = (0..r)
            .map(|k| {
                let row: Vec<f64> = (0..s).map(|j| cc.get(k, j)).collect();
                ScalarField::new(s, move |eta| {
                    row.iter().zip(eta).map(|(a, b)| a * b).sum()
                })
            })
            .collect();
        let ident: MapFn = Arc::new(|x: &[f64]| x.to_vec());
        LeaderModel {
            name: "linear-test".into(),
            state_dim: s,
            output_dim: r,
            degrees: degrees.to_vec(),
            p,
            outputs,
            a0: a0c,
            c,
            injection: Some(injection),
            phi: Some(Arc::clone(&ident)),
            phi_inv: Some(ident),
            domain_box: vec![(-1e6, 1e6); s],
            taus: vec![],
            output_derivs: Arc::new(|_, _, _| 0.0),
            max_output_deriv: 0,
        }
    }

    fn unit_weights(s: usize) -> (Matrix, Matrix) {
        (Matrix::identity(s), Matrix::identity(s))
    }

    #[test]
    fn scalar_design_recovers_care_gain() {
        // One-dimensional canonical drift is zero, Q=25, R=1: P1 = 5, F = 5.
        let model = linear_leader(&[1], vec![0.0]);
        let g = DirectedGraph::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let q = Matrix::from_rows(&[vec![25.0]]).unwrap();
        let r = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        assert_abs_diff_eq!(gain.f().get(0, 0), 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(gain.c(), 2.0 * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn oscillator_design_on_pinned_pair() {
        let model = models::vdp_leader();
        let g = DirectedGraph::new(vec![vec![0.0; 2]; 2], vec![1.0, 1.0]).unwrap();
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        assert_abs_diff_eq!(gain.c(), 1.0, epsilon = 1e-10);
        let pinned = graph::pinned_matrix(&g);
        let m = assemble_m(model.a0(), gain.f(), gain.c(), &pinned).unwrap();
        assert!(linalg::is_hurwitz(&m, 0.0).unwrap());
    }

    #[test]
    fn design_rejects_small_multiplier() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(3);
        let (q, r) = unit_weights(2);
        assert!(matches!(
            design_gain(&model, &g, &q, &r, 0.5),
            Err(ObserverError::BadMultiplier { .. })
        ));
    }

    #[test]
    fn network_matrix_structure() {
        let a0 = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let f = Matrix::identity(2);
        // c = 0 leaves block-diagonal drift copies: nilpotent, not Hurwitz.
        let pinned = Matrix::identity(3);
        let m0 = assemble_m(&a0, &f, 0.0, &pinned).unwrap();
        assert_eq!(m0.rows(), 6);
        assert!(!linalg::is_hurwitz(&m0, 0.0).unwrap());
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j + 1 && i % 2 == 1 { 1.0 } else { 0.0 };
                assert_eq!(m0.get(i, j), expect);
            }
        }
        // Single pinned follower reduces to A0 - cF.
        let single = Matrix::identity(1);
        let m1 = assemble_m(&a0, &f, 2.0, &single).unwrap();
        let direct = a0.sub(&f.scale(2.0));
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m1.get(i, j), direct.get(i, j), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn block_criterion_matches_full_matrix() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(4);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        let pinned = graph::pinned_matrix(&g);
        let m = assemble_m(model.a0(), gain.f(), gain.c(), &pinned).unwrap();
        assert!(lemma2_check(model.a0(), gain.f(), gain.c(), &pinned).unwrap());
        assert!(linalg::is_hurwitz(&m, 0.0).unwrap());
        // Zero coupling fails both ways.
        let m0 = assemble_m(model.a0(), gain.f(), 0.0, &pinned).unwrap();
        assert!(!lemma2_check(model.a0(), gain.f(), 0.0, &pinned).unwrap());
        assert!(!linalg::is_hurwitz(&m0, 0.0).unwrap());
    }

    fn small_network(c_multiplier: f64) -> ObserverNetwork {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(3);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, c_multiplier).unwrap();
        let estimates = vec![vec![0.1, -0.2], vec![0.3, 0.0], vec![-0.5, 0.4]];
        ObserverNetwork::new(model, g, gain, estimates).unwrap()
    }

    #[test]
    fn consensus_manifold_is_invariant() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(3);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        let eta0 = vec![0.7, -0.4];
        let estimates = vec![eta0.clone(); 3];
        let net = ObserverNetwork::new(model, g, gain, estimates).unwrap();
        let rhs = observer_rhs(&net, &eta0);
        // Every estimate flows with the leader's canonical dynamics.
        let y = net.model().c().matvec(&eta0);
        let mut expected = net.model().a0().matvec(&eta0);
        for (e, a) in expected.iter_mut().zip(net.model().injection(&y).unwrap()) {
            *e += a;
        }
        for row in rhs {
            for (got, want) in row.iter().zip(&expected) {
                assert_abs_diff_eq!(*got, *want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_coupling_decouples_copies() {
        let mut net = small_network(1.0);
        net.gain = net.gain.clone().with_coupling(1e-300).unwrap();
        // With c effectively zero each right-hand side is the local
        // canonical dynamics of the estimate alone.
        let eta0 = vec![1.0, 1.0];
        let rhs = observer_rhs(&net, &eta0);
        for (i, row) in rhs.iter().enumerate() {
            let eta = &net.estimates()[i];
            let y = net.model().c().matvec(eta);
            let mut expected = net.model().a0().matvec(eta);
            for (e, a) in expected.iter_mut().zip(net.model().injection(&y).unwrap()) {
                *e += a;
            }
            for (got, want) in row.iter().zip(&expected) {
                assert_abs_diff_eq!(*got, *want, epsilon = 1e-250);
            }
        }
    }

    #[test]
    fn single_pinned_observer_is_luenberger() {
        // N=1 with a pin: the error obeys e' = (A0 - cF) e + injection gap.
        let model = models::vdp_leader();
        let g = DirectedGraph::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 3.0).unwrap();
        let eta0 = vec![0.4, -0.9];
        let eta_hat = vec![1.0, 0.5];
        let net =
            ObserverNetwork::new(model, g, gain, vec![eta_hat.clone()]).unwrap();
        let rhs = observer_rhs(&net, &eta0);
        let gain = net.gain();
        let model = net.model();
        let e: Vec<f64> = eta_hat.iter().zip(&eta0).map(|(a, b)| a - b).collect();
        let closed = model.a0().sub(&gain.f().scale(gain.c()));
        let mut expected = closed.matvec(&e);
        let y_hat = model.c().matvec(&eta_hat);
        let y0 = model.c().matvec(&eta0);
        let inj_gap: Vec<f64> = model
            .injection(&y_hat)
            .unwrap()
            .iter()
            .zip(model.injection(&y0).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        for (ei, gi) in expected.iter_mut().zip(&inj_gap) {
            *ei += gi;
        }
        // rhs - leader dynamics = error derivative.
        let mut leader_rhs = model.a0().matvec(&eta0);
        for (l, a) in leader_rhs.iter_mut().zip(model.injection(&y0).unwrap()) {
            *l += a;
        }
        for k in 0..2 {
            assert_abs_diff_eq!(rhs[0][k] - leader_rhs[k], expected[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn stacked_error_dynamics_match_network_matrix() {
        // With a linear injection the stacked error derivative is exactly
        // (M + I kron K C) e for the network matrix M and injection gain K.
        let gains = vec![0.5, -1.5];
        let model = linear_leader(&[2], gains.clone());
        let g = DirectedGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0), (0, 2)], &[0]).unwrap();
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        let eta0 = vec![0.3, -0.7];
        let estimates = vec![vec![1.0, 0.2], vec![-0.4, 0.9], vec![0.0, -1.1]];
        let net = ObserverNetwork::new(model, g, gain, estimates.clone()).unwrap();
        let rhs = observer_rhs(&net, &eta0);

        let model = net.model();
        let pinned = graph::pinned_matrix(net.graph());
        let m = assemble_m(model.a0(), net.gain().f(), net.gain().c(), &pinned).unwrap();
        // K C as a 2x2: a(y) = [g0*y, g1*y], y = eta_2.
        let kc = Matrix::from_rows(&[vec![0.0, gains[0]], vec![0.0, gains[1]]]).unwrap();
        let a_term = linalg::kron(&Matrix::identity(3), &kc);
        let full = m.add(&a_term);

        let mut e_stacked = Vec::new();
        for est in &estimates {
            for (a, b) in est.iter().zip(&eta0) {
                e_stacked.push(a - b);
            }
        }
        let expected = full.matvec(&e_stacked);
        // Leader canonical dynamics to subtract.
        let y0 = model.c().matvec(&eta0);
        let mut leader_rhs = model.a0().matvec(&eta0);
        for (l, a) in leader_rhs.iter_mut().zip(model.injection(&y0).unwrap()) {
            *l += a;
        }
        for i in 0..3 {
            for k in 0..2 {
                let got = rhs[i][k] - leader_rhs[k];
                assert_abs_diff_eq!(got, expected[2 * i + k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn baseline_observer_consensus_and_decoupling() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(3);
        let w = vec![0.8, -0.3];
        let same = vec![w.clone(); 3];
        for row in baseline_rhs(&same, &w, &model, 10.0, &g) {
            let p = model.p().eval(&w);
            for (got, want) in row.iter().zip(&p) {
                assert_abs_diff_eq!(*got, *want, epsilon = 1e-14);
            }
        }
        let spread = vec![vec![0.1, 0.2], vec![-0.5, 0.6], vec![0.9, -0.9]];
        for (i, row) in baseline_rhs(&spread, &w, &model, 0.0, &g).iter().enumerate() {
            let p = model.p().eval(&spread[i]);
            for (got, want) in row.iter().zip(&p) {
                assert_abs_diff_eq!(*got, *want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn estimates_map_back_through_inverse() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(2);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        let w = vec![1.0, 2.0];
        let eta = model.phi(&w).unwrap();
        let net = ObserverNetwork::new(
            model,
            g,
            gain,
            vec![eta.clone(), vec![0.0, 1.0]],
        )
        .unwrap();
        let back = estimates_in_original_coords(&net).unwrap();
        assert_abs_diff_eq!(back[0][0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back[0][1], 2.0, epsilon = 1e-9);
        // [0, 1] maps to w = [1, 1 - 1/3] = [1, 2/3].
        assert_abs_diff_eq!(back[1][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1][1], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_estimate_maps_to_origin_for_builtin_leaders() {
        for model in [models::vdp_leader(), models::esslm_leader_default()] {
            let s = model.state_dim();
            let g = DirectedGraph::default_ring(2);
            let (q, r) = unit_weights(s);
            let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
            let net =
                ObserverNetwork::new(model, g, gain, vec![vec![0.0; s]; 2]).unwrap();
            let back = estimates_in_original_coords(&net).unwrap();
            for w in back {
                for v in w {
                    assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn out_of_domain_estimate_names_follower() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(2);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        // [10, 0] maps back to w = [0, 10], outside the [-3,3] box.
        let net = ObserverNetwork::new(
            model,
            g,
            gain,
            vec![vec![0.0, 0.0], vec![10.0, 0.0]],
        )
        .unwrap();
        match estimates_in_original_coords(&net) {
            Err(ObserverError::EstimateOutOfDomain { follower }) => assert_eq!(follower, 1),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn certificate_bounds_oscillator_nonlinearity() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(5);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0)
            .unwrap()
            .with_coupling(10.0)
            .unwrap();
        let cert =
            convergence_certificate(&model, &gain, &g, 1.0, &[(-2.0, 2.0)]).unwrap();
        // a(y) = [-y, y - y^3/3]: slopes 1 and |1 - y^2| with max 3 at +/-2.
        assert_abs_diff_eq!(cert.lipschitz_l.get(0, 0), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(cert.lipschitz_l.get(1, 0), 3.0, epsilon = 1e-6);
        let expected_alpha = 10.0_f64.sqrt();
        assert_abs_diff_eq!(cert.alpha, expected_alpha, epsilon = 1e-6);
        assert!(cert.kappa_bound > 0.0);
        assert_abs_diff_eq!(
            cert.decay_rate_bound,
            -2.0 / (cert.kappa_bound / cert.alpha) + 0.5 * cert.alpha,
            epsilon = 1e-12
        );
    }

    #[test]
    fn certificate_for_linear_injection_leader() {
        // Zero injection gains: L = 0, alpha = 0, certified decay negative.
        let model = linear_leader(&[2], vec![0.0, 0.0]);
        let g = DirectedGraph::default_ring(3);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0).unwrap();
        let cert =
            convergence_certificate(&model, &gain, &g, 1.0, &[(-5.0, 5.0)]).unwrap();
        assert_eq!(cert.lipschitz_l.max_abs_entry(), 0.0);
        assert_eq!(cert.alpha, 0.0);
        assert!(cert.decay_rate_bound < 0.0);
        assert!(cert.sufficient);
    }

    #[test]
    fn certificate_requires_stable_network() {
        let model = models::vdp_leader();
        let g = DirectedGraph::default_ring(3);
        let (q, r) = unit_weights(2);
        let gain = design_gain(&model, &g, &q, &r, 2.0)
            .unwrap()
            .with_coupling(1e-12)
            .unwrap();
        assert!(matches!(
            convergence_certificate(&model, &gain, &g, 1.0, &[(-2.0, 2.0)]),
            Err(ObserverError::UnstableNetwork { .. })
        ));
    }
}
