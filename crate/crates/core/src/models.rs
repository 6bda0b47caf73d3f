//! Leader and follower model definitions.
//!
//! A [`LeaderModel`] bundles an autonomous drift with outputs, the matching
//! canonical-form data (block drift matrix, output matrix, output-injection
//! nonlinearity), an optional explicit coordinate change into those
//! canonical coordinates, dual vector fields for the geometric checker, and
//! closed-form output derivatives for the tracking controllers.
//!
//! A [`FollowerModel`] bundles a control-affine plant with its outputs,
//! relative degrees, closed-form Lie-derivative maps for feedback
//! linearization, and (when the plant is not fully linearizable) the
//! internal coordinate and its dynamics.
//!
//! Constructors at the bottom build the bundled study models: a Van der Pol
//! oscillator leader, an elastic-shaft single-link manipulator leader and
//! follower, a four-state numerical leader used only for geometry checks,
//! a polynomial follower, and a follower with one-dimensional stable zero
//! dynamics.

use std::sync::Arc;

use crate::geometry::{ScalarField, VectorField};
use crate::linalg::{self, Matrix};

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite")]
    NonPositiveParameter { name: &'static str },
    #[error("output degrees must be positive, non-increasing, and non-empty")]
    BadDegrees,
    #[error("unknown model name '{name}'")]
    UnknownModel { name: String },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Shared closure type for coordinate maps and injections.
pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub(crate) type DerivFn = Arc<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>;
pub(crate) type FlowFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub(crate) type LieFn = Arc<dyn Fn(&[f64], &[f64], usize, usize) -> f64 + Send + Sync>;

/// Builds the canonical-form pair (A0, C) for the given output degrees:
/// one k x k block per output with ones on the subdiagonal, and one output
/// row per block selecting the block's last coordinate.
pub fn build_a0_c(degrees: &[usize]) -> Result<(Matrix, Matrix)> {
    if degrees.is_empty()
        || degrees.iter().any(|k| *k == 0)
        || degrees.windows(2).any(|w| w[0] < w[1])
    {
        return Err(ModelError::BadDegrees);
    }
    let s: usize = degrees.iter().sum();
    let r = degrees.len();
    let mut a0 = Matrix::zeros(s, s);
    let mut c = Matrix::zeros(r, s);
    let mut offset = 0;
    for (i, &k) in degrees.iter().enumerate() {
        for row in 1..k {
            a0.set(offset + row, offset + row - 1, 1.0);
        }
        c.set(i, offset + k - 1, 1.0);
        offset += k;
    }
    Ok((a0, c))
}

/// An autonomous system with outputs, packaged with everything the observer
/// designer, the geometric checker, and the tracking controllers need.
#[derive(Clone)]
pub struct LeaderModel {
    pub(crate) name: String,
    pub(crate) state_dim: usize,
    pub(crate) output_dim: usize,
    pub(crate) degrees: Vec<usize>,
    pub(crate) p: VectorField,
    pub(crate) outputs: Vec<ScalarField>,
    pub(crate) a0: Matrix,
    pub(crate) c: Matrix,
    pub(crate) injection: Option<MapFn>,
    pub(crate) phi: Option<MapFn>,
    pub(crate) phi_inv: Option<MapFn>,
    pub(crate) domain_box: Vec<(f64, f64)>,
    pub(crate) taus: Vec<VectorField>,
    pub(crate) output_derivs: DerivFn,
    pub(crate) max_output_deriv: usize,
}

impl LeaderModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Drift field of the leader dynamics.
    pub fn p(&self) -> &VectorField {
        &self.p
    }

    /// Output functions, one scalar field per output channel.
    pub fn outputs(&self) -> &[ScalarField] {
        &self.outputs
    }

    /// Canonical-form drift matrix.
    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    /// Canonical-form output matrix.
    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Output-injection nonlinearity a(y), None when the model ships
    /// without canonical-form data.
    pub fn injection(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.injection.as_ref().map(|f| f(y))
    }

    pub(crate) fn injection_map(&self) -> Option<&MapFn> {
        self.injection.as_ref()
    }

    /// Coordinate change into canonical coordinates.
    pub fn phi(&self, w: &[f64]) -> Option<Vec<f64>> {
        self.phi.as_ref().map(|f| f(w))
    }

    /// Inverse coordinate change, back to original coordinates.
    pub fn phi_inv(&self, eta: &[f64]) -> Option<Vec<f64>> {
        self.phi_inv.as_ref().map(|f| f(eta))
    }

    pub(crate) fn phi_map(&self) -> Option<&MapFn> {
        self.phi.as_ref()
    }

    pub(crate) fn phi_inv_map(&self) -> Option<&MapFn> {
        self.phi_inv.as_ref()
    }

    pub fn has_canonical_data(&self) -> bool {
        self.injection.is_some() && self.phi.is_some() && self.phi_inv.is_some()
    }

    /// Axis-aligned box on which the model data is declared valid.
    pub fn domain_box(&self) -> &[(f64, f64)] {
        &self.domain_box
    }

    /// Dual vector fields consumed by the canonical-form checker.
    pub fn taus(&self) -> &[VectorField] {
        &self.taus
    }

    /// Closed-form iterated output derivative: the `order`-fold derivative
    /// of output `k` along the drift, evaluated at `w`. Panics if `order`
    /// exceeds [`Self::max_output_deriv`].
    pub fn output_deriv(&self, w: &[f64], k: usize, order: usize) -> f64 {
        assert!(
            order <= self.max_output_deriv,
            "output derivative order {order} exceeds the provided maximum {}",
            self.max_output_deriv
        );
        assert!(k < self.output_dim);
        (self.output_derivs)(w, k, order)
    }

    /// Highest output-derivative order for which closed forms are bundled.
    pub fn max_output_deriv(&self) -> usize {
        self.max_output_deriv
    }

    /// Output vector y = q(w).
    pub fn output(&self, w: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|q| q.eval(w)).collect()
    }
}

/// A control-affine plant with outputs and the closed-form Lie data used by
/// the feedback-linearizing tracking controllers.
#[derive(Clone)]
pub struct FollowerModel {
    pub(crate) name: String,
    pub(crate) state_dim: usize,
    pub(crate) input_dim: usize,
    pub(crate) output_dim: usize,
    pub(crate) f: FlowFn,
    pub(crate) g: Vec<VectorField>,
    pub(crate) outputs: Vec<ScalarField>,
    pub(crate) rel_degrees: Vec<usize>,
    pub(crate) lie_f: LieFn,
    pub(crate) lie_g: LieFn,
    pub(crate) internal_dim: usize,
    pub(crate) internal_coords: Option<MapFn>,
    pub(crate) internal_rhs: Option<FlowFn>,
}

impl FollowerModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Uncontrolled drift f(x, w). The second argument allows plants whose
    /// drift reads exogenous leader state; the bundled models ignore it.
    pub fn f(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        (self.f)(x, w)
    }

    /// Input vector fields, one per input channel.
    pub fn g(&self) -> &[VectorField] {
        &self.g
    }

    /// Input matrix G(x) with the input fields as columns.
    pub fn input_matrix(&self, x: &[f64]) -> Matrix {
        let cols: Vec<Vec<f64>> = self.g.iter().map(|gl| gl.eval(x)).collect();
        Matrix::from_fn(self.state_dim, self.input_dim, |i, j| cols[j][i])
    }

    pub fn outputs(&self) -> &[ScalarField] {
        &self.outputs
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|h| h.eval(x)).collect()
    }

    /// Relative degree of each output channel.
    pub fn rel_degrees(&self) -> &[usize] {
        &self.rel_degrees
    }

    /// Closed-form iterated Lie derivative of output `k` along the drift,
    /// valid for `order` up to the channel's relative degree.
    pub fn lie_f(&self, x: &[f64], w: &[f64], k: usize, order: usize) -> f64 {
        assert!(k < self.output_dim);
        assert!(
            order <= self.rel_degrees[k],
            "Lie order {order} exceeds relative degree {}",
            self.rel_degrees[k]
        );
        (self.lie_f)(x, w, k, order)
    }

    /// Closed-form decoupling entry: the Lie derivative along input field
    /// `l` of the (r_k - 1)-fold drift derivative of output `k`.
    pub fn lie_g(&self, x: &[f64], w: &[f64], k: usize, l: usize) -> f64 {
        assert!(k < self.output_dim && l < self.input_dim);
        (self.lie_g)(x, w, k, l)
    }

    /// Dimension of the internal (unlinearized) dynamics.
    pub fn internal_dim(&self) -> usize {
        self.internal_dim
    }

    /// Internal coordinate map, when the plant has internal dynamics and a
    /// closed form is known.
    pub fn internal_coords(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.internal_coords.as_ref().map(|f| f(x))
    }

    /// Internal dynamics in quasi-normal coordinates: the derivative of the
    /// internal state given (theta, xi). Zero xi gives the zero dynamics.
    pub fn internal_rhs(&self, theta: &[f64], xi: &[f64]) -> Option<Vec<f64>> {
        self.internal_rhs.as_ref().map(|f| f(theta, xi))
    }
}

/// Van der Pol oscillator leader: two states, one output with degree 2,
/// explicit coordinate change into canonical form.
pub fn vdp_leader() -> LeaderModel {
    let degrees = vec![2usize];
    let (a0, c) = build_a0_c(&degrees).expect("static degrees are valid");
    let p = VectorField::new(2, |w| vec![w[1], -w[0] + (1.0 - w[0] * w[0]) * w[1]]);
    let outputs = vec![ScalarField::new(2, |w| w[0])];
    let injection: MapFn = Arc::new(|y: &[f64]| {
        let y0 = y[0];
        vec![-y0, y0 - y0 * y0 * y0 / 3.0]
    });
    let phi: MapFn = Arc::new(|w: &[f64]| vec![-w[0] + w[0].powi(3) / 3.0 + w[1], w[0]]);
    let phi_inv: MapFn = Arc::new(|e: &[f64]| vec![e[1], e[0] + e[1] - e[1].powi(3) / 3.0]);
    let taus = vec![VectorField::constant(vec![0.0, 1.0])];
    let output_derivs: DerivFn = Arc::new(|w: &[f64], _k: usize, order: usize| match order {
        0 => w[0],
        1 => w[1],
        2 => -w[0] + (1.0 - w[0] * w[0]) * w[1],
        _ => unreachable!("order capped by max_output_deriv"),
    });
    LeaderModel {
        name: "vdp".into(),
        state_dim: 2,
        output_dim: 1,
        degrees,
        p,
        outputs,
        a0,
        c,
        injection: Some(injection),
        phi: Some(phi),
        phi_inv: Some(phi_inv),
        domain_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
        taus,
        output_derivs,
        max_output_deriv: 2,
    }
}

/// Elastic-shaft single-link manipulator leader. States are motor angle,
/// link angle, and their rates; the single output is the link angle, with
/// degree 4. Parameters: shaft stiffness `kappa`, gear ratio `varpi`, link
/// mass `mass` and half-length `dist`, inertias `j1`/`j2`, viscous friction
/// `f1`/`f2`, gravity `g_acc`. All must be positive.
///
/// The canonical-form data is constructed, not hard-coded: the injection's
/// linear coefficients solve a four-step observability system for the
/// drift's linear part, and the coordinate change follows by peeling one
/// derivative per step. Defaults (see [`esslm_leader_default`]) reproduce
/// the coefficients used in the bundled studies.
#[allow(clippy::too_many_arguments)]
pub fn esslm_leader(
    kappa: f64,
    varpi: f64,
    mass: f64,
    dist: f64,
    j1: f64,
    j2: f64,
    f1: f64,
    f2: f64,
    g_acc: f64,
) -> Result<LeaderModel> {
    let params = [
        ("kappa", kappa),
        ("varpi", varpi),
        ("mass", mass),
        ("dist", dist),
        ("j1", j1),
        ("j2", j2),
        ("f1", f1),
        ("f2", f2),
        ("g_acc", g_acc),
    ];
    for (name, v) in params {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ModelError::NonPositiveParameter { name });
        }
    }
    let degrees = vec![4usize];
    let (a0, c) = build_a0_c(&degrees).expect("static degrees are valid");

    // Drift: p(w) = M w + n cos(w2), with gravity only in the last row.
    let beta = mass * g_acc * dist / j2;
    let m_mat = Matrix::from_rows(&[
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![-kappa / (j1 * varpi * varpi), kappa / (j1 * varpi), -f1 / j1, 0.0],
        vec![kappa / (j2 * varpi), -kappa / j2, 0.0, -f2 / j2],
    ])?;
    let n_vec = vec![0.0, 0.0, 0.0, -beta];

    // Observability rows of the output w2 under the linear part.
    let e2 = Matrix::from_rows(&[vec![0.0, 1.0, 0.0, 0.0]])?;
    let mut obs_rows: Vec<Matrix> = vec![e2.clone()];
    for l in 1..=4 {
        obs_rows.push(obs_rows[l - 1].matmul(&m_mat));
    }
    // Linear injection coefficients alpha solve
    //   e2 M^4 = alpha4 e2 M^3 + alpha3 e2 M^2 + alpha2 e2 M + alpha1 e2.
    let obs = Matrix::from_fn(4, 4, |i, j| obs_rows[i].get(0, j));
    let rhs: Vec<f64> = (0..4).map(|j| obs_rows[4].get(0, j)).collect();
    let alphas = linalg::solve_linear(&obs.transpose(), &rhs)?;

    // Coordinate rows, top down: T4 = e2, T_{j-1} = T_j M - alpha_j e2.
    let mut t_rows = vec![vec![0.0; 4]; 4];
    t_rows[3] = (0..4).map(|j| e2.get(0, j)).collect();
    for row in (0..3).rev() {
        let prev = Matrix::from_rows(&[t_rows[row + 1].clone()])?.matmul(&m_mat);
        t_rows[row] = (0..4)
            .map(|j| prev.get(0, j) - alphas[row + 1] * e2.get(0, j))
            .collect();
    }
    // Gravity injection coefficients: beta_j = T_j n.
    let betas: Vec<f64> = t_rows
        .iter()
        .map(|row| row.iter().zip(&n_vec).map(|(a, b)| a * b).sum())
        .collect();
    let t = Matrix::from_rows(&t_rows)?;
    let t_inv = linalg::inverse(&t)?;

    let p = {
        let m = m_mat.clone();
        let n = n_vec.clone();
        VectorField::new(4, move |w| {
            let mut out = m.matvec(w);
            let cw = w[1].cos();
            for (o, ni) in out.iter_mut().zip(&n) {
                *o += ni * cw;
            }
            out
        })
    };
    let outputs = vec![ScalarField::new(4, |w| w[1])];
    let injection: MapFn = {
        let alphas = alphas.clone();
        let betas = betas.clone();
        Arc::new(move |y: &[f64]| {
            let y0 = y[0];
            let cy = y0.cos();
            alphas
                .iter()
                .zip(&betas)
                .map(|(al, be)| al * y0 + be * cy)
                .collect()
        })
    };
    let phi: MapFn = {
        let t = t.clone();
        Arc::new(move |w: &[f64]| t.matvec(w))
    };
    let phi_inv: MapFn = Arc::new(move |eta: &[f64]| t_inv.matvec(eta));
    // Dual field: the observability chain pairs to one against (j2 w / k) e3.
    let taus = vec![VectorField::constant(vec![0.0, 0.0, j2 * varpi / kappa, 0.0])];

    // Closed-form output derivatives along the drift, orders 0..4.
    let output_derivs: DerivFn = {
        let c31 = kappa / (j2 * varpi);
        let c32 = kappa / j2;
        let c34 = f2 / j2;
        let d31 = kappa / (j1 * varpi * varpi);
        let d32 = kappa / (j1 * varpi);
        let d33 = f1 / j1;
        Arc::new(move |w: &[f64], _k: usize, order: usize| {
            let p4 = |w: &[f64]| c31 * w[0] - c32 * w[1] - beta * w[1].cos() - c34 * w[3];
            let slope = |w2: f64| -c32 + beta * w2.sin();
            match order {
                0 => w[1],
                1 => w[3],
                2 => p4(w),
                3 => c31 * w[2] + slope(w[1]) * w[3] - c34 * p4(w),
                4 => {
                    let p3 = -d31 * w[0] + d32 * w[1] - d33 * w[2];
                    let dl3_d1 = -c34 * c31;
                    let dl3_d2 = beta * w[1].cos() * w[3] - c34 * slope(w[1]);
                    let dl3_d4 = slope(w[1]) + c34 * c34;
                    dl3_d1 * w[2] + dl3_d2 * w[3] + c31 * p3 + dl3_d4 * p4(w)
                }
                _ => unreachable!("order capped by max_output_deriv"),
            }
        })
    };

    Ok(LeaderModel {
        name: "esslm".into(),
        state_dim: 4,
        output_dim: 1,
        degrees,
        p,
        outputs,
        a0,
        c,
        injection: Some(injection),
        phi: Some(phi),
        phi_inv: Some(phi_inv),
        domain_box: vec![(-5.0, 5.0); 4],
        taus,
        output_derivs,
        max_output_deriv: 4,
    })
}

/// Manipulator leader with the parameter set used in the bundled studies:
/// stiffness 10, gear ratio 1.5, unit mass, half-length 0.1, inertias 5
/// and 2, friction 0.5 and 0.55, gravity 10.
pub fn esslm_leader_default() -> LeaderModel {
    esslm_leader(10.0, 1.5, 1.0, 0.1, 5.0, 2.0, 0.5, 0.55, 10.0)
        .expect("default parameters are valid")
}

/// Four-state numerical leader with two outputs of degree 2, used to
/// exercise the geometric checker. No explicit coordinate change is known
/// for it, so canonical-form data is absent.
pub fn example1_leader() -> LeaderModel {
    let degrees = vec![2usize, 2];
    let (a0, c) = build_a0_c(&degrees).expect("static degrees are valid");
    let p = VectorField::new(4, |w| {
        vec![
            -w[0] * w[1] * w[1] + w[2],
            -w[0] - w[1] * w[3],
            -w[2] * w[3] * w[3] + w[1],
            -w[2],
        ]
    });
    let outputs = vec![ScalarField::new(4, |w| w[1]), ScalarField::new(4, |w| w[3])];
    let taus = vec![
        VectorField::constant(vec![-1.0, 0.0, 0.0, 0.0]),
        VectorField::constant(vec![0.0, 0.0, -1.0, 0.0]),
    ];
    let output_derivs: DerivFn = Arc::new(|w: &[f64], k: usize, order: usize| match (k, order) {
        (0, 0) => w[1],
        (0, 1) => -w[0] - w[1] * w[3],
        (0, 2) => {
            w[0] * w[1] * w[1] - w[2] + w[3] * (w[0] + w[1] * w[3]) + w[1] * w[2]
        }
        (1, 0) => w[3],
        (1, 1) => -w[2],
        (1, 2) => w[2] * w[3] * w[3] - w[1],
        _ => unreachable!("order capped by max_output_deriv"),
    });
    LeaderModel {
        name: "example1".into(),
        state_dim: 4,
        output_dim: 2,
        degrees,
        p,
        outputs,
        a0,
        c,
        injection: None,
        phi: None,
        phi_inv: None,
        domain_box: vec![(-2.0, 2.0); 4],
        taus,
        output_derivs,
        max_output_deriv: 2,
    }
}

/// Two-state fully linearizable follower with a polynomial nonlinearity
/// x1 * x2^exponent in the input channel. Relative degree 2, no internal
/// dynamics. The exponent should make x2^exponent well defined on the
/// region of interest (an integer value is safe everywhere).
pub fn poly_follower(exponent: f64) -> FollowerModel {
    debug_assert!(exponent.is_finite());
    let f: FlowFn = Arc::new(move |x: &[f64], _w: &[f64]| {
        vec![x[0] + x[1], x[0] * x[1].powf(exponent)]
    });
    let g = vec![VectorField::constant(vec![0.0, 1.0])];
    let outputs = vec![ScalarField::new(2, |x| x[0])];
    let lie_f: LieFn = Arc::new(move |x: &[f64], _w: &[f64], _k: usize, order: usize| {
        match order {
            0 => x[0],
            1 => x[0] + x[1],
            2 => x[0] + x[1] + x[0] * x[1].powf(exponent),
            _ => unreachable!("order capped by relative degree"),
        }
    });
    let lie_g: LieFn = Arc::new(|_x, _w, _k, _l| 1.0);
    FollowerModel {
        name: "poly".into(),
        state_dim: 2,
        input_dim: 1,
        output_dim: 1,
        f,
        g,
        outputs,
        rel_degrees: vec![2],
        lie_f,
        lie_g,
        internal_dim: 0,
        internal_coords: None,
        internal_rhs: None,
    }
}

/// Three-state minimum-phase follower: relative degree 2, one internal
/// coordinate theta = x1 + 1 - exp(2 x2) whose zero dynamics is
/// theta' = -theta. The internal dynamics closure is expressed in
/// quasi-normal coordinates (theta, xi) and is input-independent.
pub fn zero_dyn_follower() -> FollowerModel {
    let f: FlowFn = Arc::new(|x: &[f64], _w: &[f64]| {
        vec![-x[0], 2.0 * x[0] * x[1] + x[1].sin(), 2.0 * x[1]]
    });
    let g = vec![VectorField::new(3, |x| vec![(2.0 * x[1]).exp(), 0.5, 0.0])];
    let outputs = vec![ScalarField::new(3, |x| x[2])];
    let lie_f: LieFn = Arc::new(|x: &[f64], _w: &[f64], _k: usize, order: usize| match order {
        0 => x[2],
        1 => 2.0 * x[1],
        2 => 4.0 * x[0] * x[1] + 2.0 * x[1].sin(),
        _ => unreachable!("order capped by relative degree"),
    });
    let lie_g: LieFn = Arc::new(|_x, _w, _k, _l| 1.0);
    let internal_coords: MapFn = Arc::new(|x: &[f64]| vec![x[0] + 1.0 - (2.0 * x[1]).exp()]);
    let internal_rhs: FlowFn = Arc::new(|theta: &[f64], xi: &[f64]| {
        let th = theta[0];
        let x2d = xi[1];
        let ex = x2d.exp();
        vec![(1.0 - th - ex) * (1.0 + 2.0 * x2d * ex) - 2.0 * ex * (x2d / 2.0).sin()]
    });
    FollowerModel {
        name: "zero_dyn".into(),
        state_dim: 3,
        input_dim: 1,
        output_dim: 1,
        f,
        g,
        outputs,
        rel_degrees: vec![2],
        lie_f,
        lie_g,
        internal_dim: 1,
        internal_coords: Some(internal_coords),
        internal_rhs: Some(internal_rhs),
    }
}

/// Manipulator follower with the study coefficients, relative degree 4.
/// The chain from output to input runs through all four states: the input
/// enters the motor rate, which drives the link through the shaft, so the
/// first three input Lie derivatives vanish and the decoupling scalar is
/// (10/3) * (1/5) = 2/3.
pub fn esslm_follower() -> FollowerModel {
    const A31: f64 = 4.0 / 3.0;
    const A32: f64 = 8.0 / 9.0;
    const A33: f64 = 0.1;
    const B41: f64 = 10.0 / 3.0;
    const B42: f64 = 5.0;
    const B4C: f64 = 11.0 / 40.0;
    const B44: f64 = 11.0 / 40.0;
    const G3: f64 = 0.2;

    fn f4(x: &[f64]) -> f64 {
        B41 * x[0] - B42 * x[1] - B4C * x[1].cos() - B44 * x[3]
    }
    fn f3(x: &[f64]) -> f64 {
        A31 * x[0] - A32 * x[1] - A33 * x[2]
    }
    fn slope(x2: f64) -> f64 {
        -B42 + B4C * x2.sin()
    }

    let f: FlowFn = Arc::new(|x: &[f64], _w: &[f64]| vec![x[2], x[3], f3(x), f4(x)]);
    let g = vec![VectorField::constant(vec![0.0, 0.0, G3, 0.0])];
    let outputs = vec![ScalarField::new(4, |x| x[1])];
    let lie_f: LieFn = Arc::new(|x: &[f64], _w: &[f64], _k: usize, order: usize| match order {
        0 => x[1],
        1 => x[3],
        2 => f4(x),
        3 => B41 * x[2] + slope(x[1]) * x[3] - B44 * f4(x),
        4 => {
            let dl3_d1 = -B44 * B41;
            let dl3_d2 = B4C * x[1].cos() * x[3] - B44 * slope(x[1]);
            let dl3_d4 = slope(x[1]) + B44 * B44;
            dl3_d1 * x[2] + dl3_d2 * x[3] + B41 * f3(x) + dl3_d4 * f4(x)
        }
        _ => unreachable!("order capped by relative degree"),
    });
    let lie_g: LieFn = Arc::new(|_x, _w, _k, _l| B41 * G3);
    FollowerModel {
        name: "esslm_follower".into(),
        state_dim: 4,
        input_dim: 1,
        output_dim: 1,
        f,
        g,
        outputs,
        rel_degrees: vec![4],
        lie_f,
        lie_g,
        internal_dim: 0,
        internal_coords: None,
        internal_rhs: None,
    }
}

/// Looks up a bundled leader model by its name string.
pub fn leader_by_name(name: &str) -> Result<LeaderModel> {
    match name {
        "vdp" => Ok(vdp_leader()),
        "esslm" => Ok(esslm_leader_default()),
        "example1" => Ok(example1_leader()),
        other => Err(ModelError::UnknownModel { name: other.into() }),
    }
}

/// Looks up a bundled follower model by its name string. The exponent is
/// consumed only by the polynomial follower.
pub fn follower_by_name(name: &str, exponent: f64) -> Result<FollowerModel> {
    match name {
        "poly" => Ok(poly_follower(exponent)),
        "zero_dyn" => Ok(zero_dyn_follower()),
        "esslm_follower" => Ok(esslm_follower()),
        other => Err(ModelError::UnknownModel { name: other.into() }),
    }
}
