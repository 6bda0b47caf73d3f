//! Differential-geometric checks for output consensus models.
//!
//! The tools here decide whether a nonlinear autonomous system with outputs
//! admits an observable canonical form: closures wrapped as [`VectorField`]
//! and [`ScalarField`], finite-difference Jacobians and Lie derivatives,
//! iterated brackets, and the four-part condition report produced by
//! [`check_ocf_conditions`]. When a model ships with an explicit coordinate
//! change, [`verify_diffeomorphism`] measures how well that map conjugates
//! the dynamics to the canonical form.
//!
//! Derivatives are numerical throughout. Nested differentiation amplifies
//! evaluation noise, so every field carries a nesting depth and interior
//! derivatives use wide seventh-order stencils whose step grows with depth.
//! That keeps checks up to depth four (triple brackets, fourth-order Lie
//! chains) inside a 1e-5 tolerance on smooth fields.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{self, Matrix};
use crate::models::LeaderModel;

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Highest Lie-derivative order accepted by [`lie_derivative`].
pub const MAX_LIE_ORDER: usize = 4;

/// Highest iterated-bracket power accepted by [`ad_power`].
pub const MAX_AD_POWER: usize = 3;

/// Largest output degree the canonical-form checker supports. The limit is
/// set by the finite-difference nesting budget: degree k needs gradients of
/// (k-1)-fold Lie derivatives, i.e. differentiation depth k.
pub const MAX_DEGREE: usize = 4;

/// Relative singular-value cutoff used when ranking covector families.
const RANK_CUTOFF: f64 = 1e-7;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("step size must be positive and finite, got {h}")]
    InvalidStep { h: f64 },
    #[error("evaluation produced a non-finite value in {context}")]
    NonFiniteEvaluation { context: &'static str },
    #[error("degrees must be positive, non-increasing, and sum to the state dimension")]
    BadDegrees,
    #[error("no sample points supplied")]
    NoSamples,
    #[error("model '{model}' does not provide a coordinate change")]
    MissingDiffeomorphism { model: String },
    #[error("sample {sample} lies outside the model's declared domain box")]
    OutsideDomain { sample: usize },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ScalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A smooth map from points of an n-dimensional state space to n-vectors.
///
/// The `depth` records how many layers of numerical differentiation went
/// into building the closure; derivative routines consult it to widen their
/// steps and keep noise below tolerance.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    depth: u32,
    eval_fn: VecFn,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(dim={}, depth={})", self.dim, self.depth)
    }
}

impl VectorField {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            depth: 0,
            eval_fn: Arc::new(f),
        }
    }

    /// Constant field, e.g. a coordinate direction.
    pub fn constant(values: Vec<f64>) -> Self {
        let dim = values.len();
        Self::new(dim, move |_| values.clone())
    }

    fn with_depth(dim: usize, depth: u32, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            depth,
            eval_fn: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval_fn)(x)
    }
}

/// A smooth real-valued function on an n-dimensional state space.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    depth: u32,
    eval_fn: ScalFn,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField(dim={}, depth={})", self.dim, self.depth)
    }
}

impl ScalarField {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            depth: 0,
            eval_fn: Arc::new(f),
        }
    }

    fn with_depth(dim: usize, depth: u32, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            depth,
            eval_fn: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval_fn)(x)
    }
}

// Seventh-order central stencil: error h^6 f^(7)/140, noise ~1.8 eps(f)/h.
const WIDE_OFFSETS: [f64; 6] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
const WIDE_WEIGHTS: [f64; 6] = [-1.0, 9.0, -45.0, 45.0, -9.0, 1.0];
const WIDE_DENOM: f64 = 60.0;

/// Step for the wide stencil at nesting level `level` (1 = first derivative
/// of exact data). Each extra level multiplies the step by 2.5 so the noise
/// inherited from the level below is divided back down faster than the
/// truncation term grows.
fn wide_step(level: u32, x: &[f64]) -> f64 {
    let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    1e-2 * scale * 2.5_f64.powi(level as i32 - 1)
}

fn gradient_wide(field: &ScalarField, x: &[f64]) -> Vec<f64> {
    let h = wide_step(field.depth + 1, x);
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut xp = x.to_vec();
    for j in 0..n {
        let mut acc = 0.0;
        for (off, wgt) in WIDE_OFFSETS.iter().zip(WIDE_WEIGHTS.iter()) {
            xp[j] = x[j] + off * h;
            acc += wgt * field.eval(&xp);
        }
        xp[j] = x[j];
        grad[j] = acc / (WIDE_DENOM * h);
    }
    grad
}

fn jacobian_wide(field: &VectorField, x: &[f64]) -> Matrix {
    let h = wide_step(field.depth + 1, x);
    let n = field.dim;
    let mut jac = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let mut col = vec![0.0; n];
        for (off, wgt) in WIDE_OFFSETS.iter().zip(WIDE_WEIGHTS.iter()) {
            xp[j] = x[j] + off * h;
            let fv = field.eval(&xp);
            for (ci, fi) in col.iter_mut().zip(fv.iter()) {
                *ci += wgt * fi;
            }
        }
        xp[j] = x[j];
        for i in 0..n {
            jac.set(i, j, col[i] / (WIDE_DENOM * h));
        }
    }
    jac
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Jacobian of `f` at `x` by plain central differences with a caller-chosen
/// step. Meant for spot checks against closed-form Jacobians; the internal
/// machinery uses wider stencils with automatic steps.
pub fn jacobian_fd(f: &VectorField, x: &[f64], h: f64) -> Result<Matrix> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidStep { h });
    }
    if x.len() != f.dim {
        return Err(GeometryError::DimensionMismatch {
            context: "jacobian_fd point",
            expected: f.dim,
            got: x.len(),
        });
    }
    let n = f.dim;
    let mut jac = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let plus = f.eval(&xp);
        xp[j] = x[j] - h;
        let minus = f.eval(&xp);
        xp[j] = x[j];
        for i in 0..n {
            jac.set(i, j, (plus[i] - minus[i]) / (2.0 * h));
        }
    }
    if !jac.entries().iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NonFiniteEvaluation {
            context: "jacobian_fd",
        });
    }
    Ok(jac)
}

/// The `order`-fold Lie derivative of `h` along `f`, as a new scalar field.
/// Order zero returns `h` itself.
fn lie_chain(h: &ScalarField, f: &VectorField, order: usize) -> ScalarField {
    if order == 0 {
        return h.clone();
    }
    let prev = lie_chain(h, f, order - 1);
    let field = f.clone();
    let depth = (prev.depth + 1).max(f.depth);
    let dim = h.dim;
    ScalarField::with_depth(dim, depth, move |x| {
        let grad = gradient_wide(&prev, x);
        let fv = field.eval(x);
        dot(&grad, &fv)
    })
}

/// Evaluates the iterated Lie derivative `L_f^order h` at `x`.
pub fn lie_derivative(h: &ScalarField, f: &VectorField, x: &[f64], order: usize) -> Result<f64> {
    if order > MAX_LIE_ORDER {
        return Err(GeometryError::UnsupportedOrder {
            order,
            max: MAX_LIE_ORDER,
        });
    }
    if h.dim != f.dim {
        return Err(GeometryError::DimensionMismatch {
            context: "lie_derivative fields",
            expected: f.dim,
            got: h.dim,
        });
    }
    if x.len() != f.dim {
        return Err(GeometryError::DimensionMismatch {
            context: "lie_derivative point",
            expected: f.dim,
            got: x.len(),
        });
    }
    let value = lie_chain(h, f, order).eval(x);
    if !value.is_finite() {
        return Err(GeometryError::NonFiniteEvaluation {
            context: "lie_derivative",
        });
    }
    Ok(value)
}

fn bracket_raw(f: &VectorField, g: &VectorField, x: &[f64]) -> Vec<f64> {
    let jg = jacobian_wide(g, x);
    let jf = jacobian_wide(f, x);
    let fv = f.eval(x);
    let gv = g.eval(x);
    let a = jg.matvec(&fv);
    let b = jf.matvec(&gv);
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

/// Lie bracket [f, g] = (Dg) f - (Df) g evaluated at `x`.
pub fn lie_bracket(f: &VectorField, g: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    if f.dim != g.dim {
        return Err(GeometryError::DimensionMismatch {
            context: "lie_bracket fields",
            expected: f.dim,
            got: g.dim,
        });
    }
    if x.len() != f.dim {
        return Err(GeometryError::DimensionMismatch {
            context: "lie_bracket point",
            expected: f.dim,
            got: x.len(),
        });
    }
    let out = bracket_raw(f, g, x);
    if !all_finite(&out) {
        return Err(GeometryError::NonFiniteEvaluation {
            context: "lie_bracket",
        });
    }
    Ok(out)
}

/// Iterated bracket ad_f^k g as a field: ad^0 = g, ad^{k} = [f, ad^{k-1} g].
pub fn ad_power(f: &VectorField, g: &VectorField, k: usize) -> Result<VectorField> {
    if k > MAX_AD_POWER {
        return Err(GeometryError::UnsupportedOrder {
            order: k,
            max: MAX_AD_POWER,
        });
    }
    if f.dim != g.dim {
        return Err(GeometryError::DimensionMismatch {
            context: "ad_power fields",
            expected: f.dim,
            got: g.dim,
        });
    }
    if k == 0 {
        return Ok(g.clone());
    }
    let prev = ad_power(f, g, k - 1)?;
    let field = f.clone();
    let depth = field.depth.max(prev.depth) + 1;
    Ok(VectorField::with_depth(g.dim, depth, move |x| {
        bracket_raw(&field, &prev, x)
    }))
}

/// Outcome of one of the four canonical-form conditions, with the sample
/// index and value of the worst violation seen (worst_value stays
/// meaningful even when the check passes: it is the largest residual, or
/// for rank checks the largest dimension defect).
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub pass: bool,
    pub worst_sample: usize,
    pub worst_value: f64,
}

impl ConditionCheck {
    fn passing() -> Self {
        Self {
            pass: true,
            worst_sample: 0,
            worst_value: 0.0,
        }
    }

    fn record(&mut self, sample: usize, value: f64, ok: bool) {
        if value > self.worst_value {
            self.worst_value = value;
            self.worst_sample = sample;
        }
        if !ok {
            self.pass = false;
            self.worst_sample = sample;
            self.worst_value = self.worst_value.max(value);
        }
    }
}

/// Report from [`check_ocf_conditions`]: the observability rank condition,
/// the codistribution intersection dimensions, vanishing of the bracket
/// commutators, and the dual-basis normalization of the supplied fields.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub samples: usize,
    pub observability: ConditionCheck,
    pub intersections: ConditionCheck,
    pub commutators: ConditionCheck,
    pub normalization: ConditionCheck,
    pub pass: bool,
}

/// Numerical rank of a family of row vectors: singular values via the
/// eigenvalues of the small Gram matrix, cut off at 1e-7 of the largest.
fn rank_rows(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.is_empty() {
        return Ok(0);
    }
    let m = rows.len();
    let n = rows[0].len();
    let a = Matrix::from_fn(m, n, |i, j| rows[i][j]);
    let gram = a.matmul(&a.transpose());
    let spec = linalg::eigenvalues(&gram)?;
    let mut sigmas: Vec<f64> = spec
        .eigenvalues()
        .iter()
        .map(|ev| ev.re.max(0.0).sqrt())
        .collect();
    sigmas.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let smax = sigmas[0];
    if smax <= 0.0 {
        return Ok(0);
    }
    Ok(sigmas.iter().filter(|s| **s > RANK_CUTOFF * smax).count())
}

/// dim(span A ∩ span B) = rank A + rank B - rank [A; B].
fn intersection_dim(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<usize> {
    let ra = rank_rows(a)?;
    let rb = rank_rows(b)?;
    let mut stacked = a.to_vec();
    stacked.extend_from_slice(b);
    let rs = rank_rows(&stacked)?;
    Ok(ra + rb - rs)
}

/// Checks the geometric conditions under which an autonomous system with
/// outputs can be transformed into observable canonical form with output
/// degrees `degrees`, using the candidate dual fields `taus`.
///
/// Four families of checks run at every sample point:
///
/// 1. observability: the differentials of the Lie chains
///    d L_p^l q_j (0 <= l <= k_j - 1) span the whole cotangent space;
/// 2. intersection: for every output i, the deficient family (all chains
///    truncated at level k_i - 1, with the top element of chain i removed)
///    meets the full family in a subspace of the dimension demanded by the
///    canonical form;
/// 3. commutation: all brackets [ad_p^l tau_i, ad_p^m tau_j] vanish in the
///    required index range;
/// 4. normalization: <d L_p^{l-1} q_i, tau_j> equals 1 exactly when i = j
///    and l = k_i, and 0 otherwise, over the dual-basis index set.
///
/// `tol` bounds the commutator and normalization residuals; rank decisions
/// use a fixed relative singular-value cutoff.
pub fn check_ocf_conditions(
    p: &VectorField,
    outputs: &[ScalarField],
    degrees: &[usize],
    taus: &[VectorField],
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<ConditionReport> {
    let s = p.dim;
    let r = outputs.len();
    if degrees.len() != r || taus.len() != r {
        return Err(GeometryError::DimensionMismatch {
            context: "check_ocf_conditions families",
            expected: r,
            got: degrees.len().max(taus.len()),
        });
    }
    if r == 0
        || degrees.iter().any(|k| *k == 0)
        || degrees.windows(2).any(|wi| wi[0] < wi[1])
        || degrees.iter().sum::<usize>() != s
    {
        return Err(GeometryError::BadDegrees);
    }
    let kmax = degrees[0];
    if kmax > MAX_DEGREE {
        return Err(GeometryError::UnsupportedOrder {
            order: kmax,
            max: MAX_DEGREE,
        });
    }
    if samples.is_empty() {
        return Err(GeometryError::NoSamples);
    }
    for (idx, x) in samples.iter().enumerate() {
        if x.len() != s {
            return Err(GeometryError::DimensionMismatch {
                context: "check_ocf_conditions sample",
                expected: s,
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(GeometryError::NonFiniteEvaluation {
                context: "check_ocf_conditions sample",
            });
        }
        let _ = idx;
    }

    // Lie chains L_p^l q_j for l = 0 .. kmax-1, shared by all conditions.
    let mut chains: Vec<Vec<ScalarField>> = Vec::with_capacity(r);
    for q in outputs {
        if q.dim != s {
            return Err(GeometryError::DimensionMismatch {
                context: "check_ocf_conditions output",
                expected: s,
                got: q.dim,
            });
        }
        let chain: Vec<ScalarField> = (0..kmax).map(|l| lie_chain(q, p, l)).collect();
        chains.push(chain);
    }
    // Iterated brackets ad_p^l tau_i for l = 0 .. k_i - 1.
    let mut ads: Vec<Vec<VectorField>> = Vec::with_capacity(r);
    for (i, tau) in taus.iter().enumerate() {
        if tau.dim != s {
            return Err(GeometryError::DimensionMismatch {
                context: "check_ocf_conditions tau",
                expected: s,
                got: tau.dim,
            });
        }
        let fam: std::result::Result<Vec<_>, _> = (0..degrees[i]).map(|l| ad_power(p, tau, l)).collect();
        ads.push(fam?);
    }

    let mut observability = ConditionCheck::passing();
    let mut intersections = ConditionCheck::passing();
    let mut commutators = ConditionCheck::passing();
    let mut normalization = ConditionCheck::passing();

    for (idx, x) in samples.iter().enumerate() {
        // Gradients of every chain element at this sample.
        let grads: Vec<Vec<Vec<f64>>> = chains
            .iter()
            .map(|chain| chain.iter().map(|field| gradient_wide(field, x)).collect())
            .collect();
        for row in grads.iter().flatten() {
            if !all_finite(row) {
                return Err(GeometryError::NonFiniteEvaluation {
                    context: "check_ocf_conditions gradients",
                });
            }
        }

        // Condition 1: the full family spans the cotangent space.
        let mut full: Vec<Vec<f64>> = Vec::with_capacity(s);
        for (j, chain) in grads.iter().enumerate() {
            for l in 0..degrees[j] {
                full.push(chain[l].clone());
            }
        }
        let rank_full = rank_rows(&full)?;
        let defect = (s - rank_full) as f64;
        observability.record(idx, defect, rank_full == s);

        // Condition 2: for each output i, the deficient family and its
        // intersection with the full family both have dimension
        // i*k_i + k_{i+1} + ... + k_r - 1 (1-based i).
        for i in 0..r {
            let ki = degrees[i];
            let mut deficient: Vec<Vec<f64>> = Vec::new();
            for (j, chain) in grads.iter().enumerate() {
                for (l, row) in chain.iter().enumerate().take(ki) {
                    if j == i && l == ki - 1 {
                        continue;
                    }
                    deficient.push(row.clone());
                }
            }
            let tail: usize = degrees[i + 1..].iter().sum();
            let expected = (i + 1) * ki + tail - 1;
            let dim_b = rank_rows(&deficient)?;
            let dim_inter = intersection_dim(&full, &deficient)?;
            let miss = (dim_b.abs_diff(expected) + dim_inter.abs_diff(expected)) as f64;
            intersections.record(idx, miss, dim_b == expected && dim_inter == expected);
        }

        // Condition 3: brackets within the ad families vanish.
        for i in 0..r {
            for j in i..r {
                for l in 0..degrees[i] {
                    let m0 = if i == j { l + 1 } else { 0 };
                    for m in m0..degrees[j] {
                        let val = bracket_raw(&ads[i][l], &ads[j][m], x);
                        if !all_finite(&val) {
                            return Err(GeometryError::NonFiniteEvaluation {
                                context: "check_ocf_conditions commutators",
                            });
                        }
                        let norm = val.iter().fold(0.0_f64, |mx, v| mx.max(v.abs()));
                        commutators.record(idx, norm, norm <= tol);
                    }
                }
            }
        }

        // Normalization: tau_j is dual to the chain of output i, pairing to
        // 1 only at the top level l = k_i.
        let tau_vals: Vec<Vec<f64>> = taus.iter().map(|tau| tau.eval(x)).collect();
        for i in 0..r {
            for j in 0..r {
                let lmax = if i <= j { degrees[i] } else { degrees[j] };
                for l in 1..=lmax {
                    let pairing = dot(&grads[i][l - 1], &tau_vals[j]);
                    let target = if i == j && l == degrees[i] { 1.0 } else { 0.0 };
                    let resid = (pairing - target).abs();
                    normalization.record(idx, resid, resid <= tol);
                }
            }
        }
    }

    let pass =
        observability.pass && intersections.pass && commutators.pass && normalization.pass;
    Ok(ConditionReport {
        samples: samples.len(),
        observability,
        intersections,
        commutators,
        normalization,
        pass,
    })
}

/// Report from [`verify_diffeomorphism`].
#[derive(Debug, Clone)]
pub struct DiffeoReport {
    pub samples: usize,
    pub max_roundtrip_defect: f64,
    pub max_pushforward_defect: f64,
    pub worst_sample: usize,
    pub pass: bool,
}

/// Confirms that a model's coordinate change really conjugates its dynamics
/// to the canonical form: the inverse undoes the map at every sample, and
/// the pushforward of the drift matches the canonical drift plus output
/// injection. Both defects must stay within `tol`.
pub fn verify_diffeomorphism(
    model: &LeaderModel,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<DiffeoReport> {
    if samples.is_empty() {
        return Err(GeometryError::NoSamples);
    }
    let s = model.state_dim();
    let phi = model
        .phi_map()
        .ok_or_else(|| GeometryError::MissingDiffeomorphism {
            model: model.name().to_string(),
        })?;
    let phi_inv = model
        .phi_inv_map()
        .ok_or_else(|| GeometryError::MissingDiffeomorphism {
            model: model.name().to_string(),
        })?;
    let injection = model
        .injection_map()
        .ok_or_else(|| GeometryError::MissingDiffeomorphism {
            model: model.name().to_string(),
        })?;
    let phi_field = {
        let phi = Arc::clone(phi);
        VectorField::new(s, move |w| phi(w))
    };
    let box_ = model.domain_box();

    let mut max_rt = 0.0_f64;
    let mut max_pf = 0.0_f64;
    let mut worst = 0usize;
    for (idx, w) in samples.iter().enumerate() {
        if w.len() != s {
            return Err(GeometryError::DimensionMismatch {
                context: "verify_diffeomorphism sample",
                expected: s,
                got: w.len(),
            });
        }
        if w.iter()
            .zip(box_)
            .any(|(wi, (lo, hi))| !wi.is_finite() || wi < lo || wi > hi)
        {
            return Err(GeometryError::OutsideDomain { sample: idx });
        }
        let eta = phi(w);
        let back = phi_inv(&eta);
        if !all_finite(&eta) || !all_finite(&back) {
            return Err(GeometryError::NonFiniteEvaluation {
                context: "verify_diffeomorphism roundtrip",
            });
        }
        let rt = back
            .iter()
            .zip(w)
            .fold(0.0_f64, |mx, (b, wi)| mx.max((b - wi).abs()));

        let jac = jacobian_wide(&phi_field, w);
        let pw = model.p().eval(w);
        let lhs = jac.matvec(&pw);
        let y = model.c().matvec(&eta);
        let inj = injection(&y);
        let drift = model.a0().matvec(&eta);
        let pf = lhs
            .iter()
            .zip(drift.iter().zip(inj.iter()))
            .fold(0.0_f64, |mx, (l, (d, a))| mx.max((l - (d + a)).abs()));
        if !pf.is_finite() || !rt.is_finite() {
            return Err(GeometryError::NonFiniteEvaluation {
                context: "verify_diffeomorphism pushforward",
            });
        }
        if rt.max(pf) > max_rt.max(max_pf) {
            worst = idx;
        }
        max_rt = max_rt.max(rt);
        max_pf = max_pf.max(pf);
    }
    Ok(DiffeoReport {
        samples: samples.len(),
        max_roundtrip_defect: max_rt,
        max_pushforward_defect: max_pf,
        worst_sample: worst,
        pass: max_rt <= tol && max_pf <= tol,
    })
}

/// Draws `count` points uniformly from an axis-aligned box, one closed
/// interval per coordinate. The seed pins the whole sample set, so repeated
/// checks over the same box see identical points.
pub fn sample_box(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect()
        })
        .collect()
}
