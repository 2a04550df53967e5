//! Scalar penalty functions and theorem-level smooth min-entropy lower
//! bounds, with parameter search.
//!
//! Every evaluator returns a [`BoundReport`] whose value is the sum of its
//! named terms. All logarithms are base 2.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optimize::nelder_mead;

fn log2(x: f64) -> f64 {
    x.log2()
}

/// `-log(1 - sqrt(1 - x^2))` on `(0, 1]`.
pub fn g0(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(domain("x", x, "(0,1]"));
    }
    // 1 - sqrt(1 - x^2) = x^2 / (1 + sqrt(1 - x^2)), stable for small x.
    let s = (1.0 - x * x).max(0.0).sqrt();
    Ok(-log2(x * x / (1.0 + s)))
}

/// `g0(x) - log(1 - y^2)`.
pub fn g1(x: f64, y: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(domain("y", y, "[0,1)"));
    }
    Ok(g0(x)? - (-y * y).ln_1p() / std::f64::consts::LN_2)
}

/// `(x+1) log(x+1) - x log x` for `x >= 0`.
pub fn g2(x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(domain("x", x, "[0,inf)"));
    }
    let t = if x > 0.0 { x * log2(x) } else { 0.0 };
    Ok((x + 1.0) * log2(x + 1.0) - t)
}

/// Channel-divergence penalty of the mixed channels.
pub fn z_beta(eps: f64, delta: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(domain("eps", eps, "[0,1]"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(domain("beta", beta, "(1,inf)"));
    }
    Ok(z_beta_unchecked(eps, delta, beta))
}

fn z_beta_unchecked(eps: f64, delta: f64, beta: f64) -> f64 {
    let r = ((1.0 - delta) * eps).sqrt();
    let inner = (1.0 + r).powf(beta / (beta + 1.0)) + (r / delta.powf(beta)).powf(1.0 / (beta + 1.0));
    (beta + 1.0) / (beta - 1.0) * log2(inner)
}

/// Second-order coefficient of the testing bound, with
/// `v = 2 log|A| + Max(f) - Min_Sigma(f)`.
pub fn k_alpha(alpha: f64, dim_a: usize, max_f: f64, min_sigma_f: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(domain("alpha", alpha, "(1,2)"));
    }
    Ok(k_alpha_unchecked(alpha, dim_a, max_f, min_sigma_f))
}

fn k_alpha_unchecked(alpha: f64, dim_a: usize, max_f: f64, min_sigma_f: f64) -> f64 {
    let v = 2.0 * log2(dim_a as f64) + max_f - min_sigma_f;
    let e2 = std::f64::consts::E.powi(2);
    let ln3 = (v.exp2() + e2).ln().powi(3);
    ((alpha - 1.0) * v).exp2() * ln3 / (6.0 * (2.0 - alpha).powi(3) * std::f64::consts::LN_2)
}

/// Free parameters of a bound; unused ones are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    /// `(eps1, eps2, eps3)` smoothing splits; zero where unused.
    pub eps_splits: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: u64,
    pub dim_a: usize,
    pub dim_b: usize,
    pub eps: f64,
    /// Either one value per round or a single value shared by all rounds.
    pub per_round_entropies: Vec<f64>,
}

impl ScenarioSpec {
    pub fn identical(n: u64, dim_a: usize, dim_b: usize, eps: f64, h: f64) -> Self {
        Self {
            n,
            dim_a,
            dim_b,
            eps,
            per_round_entropies: vec![h],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("n", 0.0, "[1,inf)"));
        }
        if self.dim_a < 2 {
            return Err(domain("dim_a", self.dim_a as f64, "[2,inf)"));
        }
        if self.dim_b < 1 {
            return Err(domain("dim_b", self.dim_b as f64, "[1,inf)"));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(domain("eps", self.eps, "[0,1)"));
        }
        check_entropies(self, &self.per_round_entropies)?;
        Ok(())
    }

    fn la(&self) -> f64 {
        log2(1.0 + 2.0 * self.dim_a as f64)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

fn check_entropies(spec: &ScenarioSpec, h: &[f64]) -> Result<()> {
    if !(h.len() == 1 || h.len() as u64 == spec.n) {
        return Err(Error::DimensionMismatch {
            expected: spec.n as usize,
            got: h.len(),
        });
    }
    let cap = log2(spec.dim_a as f64) + 1e-12;
    for &x in h {
        if !(x.abs() <= cap) {
            return Err(domain("per-round entropy", x, "[-log|A|, log|A|]"));
        }
    }
    Ok(())
}

fn sum_rounds(spec: &ScenarioSpec, h: &[f64]) -> f64 {
    if h.len() == 1 {
        spec.nf() * h[0]
    } else {
        h.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Bits.
    pub value: f64,
    pub params_used: BoundParams,
    pub smoothing: f64,
    pub decomposition: Vec<Term>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    fn from_terms(terms: Vec<(&str, f64)>, params: BoundParams, smoothing: f64) -> Self {
        let decomposition: Vec<Term> = terms
            .into_iter()
            .map(|(n, v)| Term {
                name: n.to_string(),
                value: v,
            })
            .collect();
        Self {
            value: decomposition.iter().map(|t| t.value).sum(),
            params_used: params,
            smoothing,
            decomposition,
            note: None,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.decomposition.iter().find(|t| t.name == name).map(|t| t.value)
    }

    fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }
}

fn check_alpha_open(alpha: f64, hi: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < hi) {
        return Err(domain("alpha", alpha, "(1, 1 + 1/log(1+2|A|))"));
    }
    Ok(())
}

/// `H_up_alpha(eta) - (alpha/(alpha-1)) D_max^eps(rho||eta) - g1(delta, eps)/(alpha-1)`
/// at smoothing `eps + delta`.
pub fn triangle_hmin_bound(
    h_alpha_eta: f64,
    dmax_eps: f64,
    alpha: f64,
    eps: f64,
    delta: f64,
) -> Result<BoundReport> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(domain("alpha", alpha, "(1,2]"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(domain("eps", eps, "[0,1)"));
    }
    if !(delta > 0.0 && delta < 1.0 && eps + delta < 1.0) {
        return Err(domain("delta", delta, "(0, 1 - eps)"));
    }
    let a1 = alpha - 1.0;
    Ok(BoundReport::from_terms(
        vec![
            ("h_alpha_eta", h_alpha_eta),
            ("dmax", -alpha / a1 * dmax_eps),
            ("smoothing", -g1(delta, eps)? / a1),
        ],
        BoundParams {
            alpha,
            beta: None,
            delta: Some(delta),
            eps_splits: [eps, delta, 0.0],
        },
        eps + delta,
    ))
}

/// `H(A|B)_rho >= H_up_alpha(A|B)_eta - (alpha/(alpha-1)) D(rho||eta)`.
pub fn vn_triangle_bound(h_alpha_eta: f64, rel_ent: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(domain("alpha", alpha, "(1,2]"));
    }
    Ok(h_alpha_eta - alpha / (alpha - 1.0) * rel_ent)
}

/// Bound for registers with `I(A_k : A_1^{k-1} B) <= eps`, at the choice
/// `alpha = 1 + eps^{1/4}/log(1+2|A|)`. The substate term enters with the
/// sign that makes it a penalty, `-log(1 - sqrt(eps)) > 0`.
pub fn approx_indep_bound(spec: &ScenarioSpec) -> Result<BoundReport> {
    spec.validate()?;
    if spec.eps <= 0.0 {
        return Err(domain("eps", spec.eps, "(0,1)"));
    }
    Ok(approx_indep_terms(spec, spec.eps, &spec.per_round_entropies))
}

fn approx_indep_terms(spec: &ScenarioSpec, e: f64, h: &[f64]) -> BoundReport {
    let la = spec.la();
    let n = spec.nf();
    let q = e.powf(0.25);
    let g = g1(e, q).expect("eps in (0,1)");
    BoundReport::from_terms(
        vec![
            ("sum_h", sum_rounds(spec, h)),
            ("per_round", -3.0 * n * q * la),
            ("tail", -2.0 * la / e.powf(0.75)),
            ("substate_smoothing", -(2.0 * la / q) * (-log2(1.0 - e.sqrt()) + g)),
        ],
        BoundParams {
            alpha: 1.0 + q / la,
            beta: None,
            delta: None,
            eps_splits: [q, e, 0.0],
        },
        q + e,
    )
}

fn zero_eps_limit(spec: &ScenarioSpec, h: &[f64]) -> BoundReport {
    BoundReport::from_terms(
        vec![
            ("sum_h", sum_rounds(spec, h)),
            ("per_round", 0.0),
            ("tail", 0.0),
            ("substate_smoothing", 0.0),
        ],
        BoundParams {
            alpha: 1.0,
            beta: None,
            delta: Some(0.0),
            eps_splits: [0.0; 3],
        },
        0.0,
    )
    .with_note("eps = 0: the mutual-information level vanishes; reported as the limit with zero penalties")
}

fn from_trace(spec: &ScenarioSpec, log_dim: f64) -> Result<BoundReport> {
    spec.validate()?;
    if spec.eps == 0.0 {
        return Ok(zero_eps_limit(spec, &spec.per_round_entropies));
    }
    let delta = spec.eps * log_dim + g2(spec.eps / 2.0)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    let mut r = approx_indep_terms(spec, delta, &spec.per_round_entropies);
    r.params_used.delta = Some(delta);
    Ok(r)
}

/// Trace-distance version: `delta = eps log|A| + g2(eps/2)` replaces `eps`.
pub fn approx_indep_from_trace(spec: &ScenarioSpec) -> Result<BoundReport> {
    from_trace(spec, log2(spec.dim_a as f64))
}

/// Weak approximate AEP: per-round inputs are `H(A_k|B_k)` and
/// `delta = eps log(|A||B|) + g2(eps/2)`.
pub fn weak_aep_bound(spec: &ScenarioSpec) -> Result<BoundReport> {
    from_trace(spec, log2((spec.dim_a * spec.dim_b) as f64))
}

/// Terms of the approximate EAT without domain checks, for presets that sit
/// outside the theorem's range of `alpha`.
pub fn approx_eat_terms(spec: &ScenarioSpec, hk: &[f64], p: &BoundParams) -> BoundReport {
    let la = spec.la();
    let n = spec.nf();
    let a = p.alpha;
    let a1 = a - 1.0;
    let beta = p.beta.unwrap_or(2.0);
    let delta = p.delta.unwrap_or(0.0);
    let [e1, e2, _] = p.eps_splits;
    let lab = log2((spec.dim_a * spec.dim_b) as f64);
    let dimension = if delta > 0.0 {
        -a / a1 * n * log2(1.0 + delta * ((a1 / a * lab * 2.0).exp2() - 1.0))
    } else {
        0.0
    };
    let z = if spec.eps > 0.0 {
        -a / a1 * n * z_beta_unchecked(spec.eps, delta, beta)
    } else {
        0.0
    };
    let smooth = -(g1(e2, e1).unwrap_or(f64::INFINITY) + a * g0(e1).unwrap_or(f64::INFINITY) / (beta - 1.0)) / a1;
    BoundReport::from_terms(
        vec![
            ("sum_h", sum_rounds(spec, hk)),
            ("second_order", -n * a1 * la * la),
            ("dimension", dimension),
            ("z_beta", z),
            ("smoothing", smooth),
        ],
        *p,
        e1 + e2,
    )
}

fn check_eat_params(spec: &ScenarioSpec, p: &BoundParams) -> Result<()> {
    check_alpha_open(p.alpha, 1.0 + 1.0 / spec.la())?;
    let beta = p.beta.ok_or_else(|| Error::Precondition("beta required".into()))?;
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(domain("beta", beta, "(1,inf)"));
    }
    let delta = p.delta.ok_or_else(|| Error::Precondition("delta required".into()))?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    let [e1, e2, _] = p.eps_splits;
    if !(e1 > 0.0 && e2 > 0.0 && e1 + e2 < 1.0) {
        return Err(domain("eps1 + eps2", e1 + e2, "(0,1) with both positive"));
    }
    Ok(())
}

/// Approximate entropy accumulation with the mixed channels
/// `(1-delta) M' + delta M`.
pub fn approx_eat_bound(spec: &ScenarioSpec, hk: &[f64], p: &BoundParams) -> Result<BoundReport> {
    spec.validate()?;
    check_entropies(spec, hk)?;
    check_eat_params(spec, p)?;
    Ok(approx_eat_terms(spec, hk, p))
}

/// `beta = 2`, `delta = eps^{1/8}`, `alpha = 1 + sqrt(eps_r)` with
/// `eps_r = (|A||B|)^2 eps^{1/8} + 3 log((1+sqrt(eps))^{2/3} + eps^{1/12})`,
/// and the smoothing split evenly.
pub fn eat_preset(spec: &ScenarioSpec, smoothing: f64) -> BoundParams {
    let e = spec.eps;
    let ab = (spec.dim_a * spec.dim_b) as f64;
    let eps_r = ab * ab * e.powf(0.125) + 3.0 * log2((1.0 + e.sqrt()).powf(2.0 / 3.0) + e.powf(1.0 / 12.0));
    BoundParams {
        alpha: 1.0 + eps_r.sqrt(),
        beta: Some(2.0),
        delta: Some(e.powf(0.125)),
        eps_splits: [smoothing / 2.0, smoothing / 2.0, 0.0],
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Searches `(alpha, beta, delta, eps1)` at fixed `eps1 + eps2 = smoothing`.
/// The preset, with `alpha` clipped into the admissible interval, is always
/// among the candidates.
pub fn approx_eat_optimize(spec: &ScenarioSpec, hk: &[f64], smoothing: f64) -> Result<BoundReport> {
    spec.validate()?;
    check_entropies(spec, hk)?;
    if !(smoothing > 0.0 && smoothing < 1.0) {
        return Err(domain("smoothing", smoothing, "(0,1)"));
    }
    let span = 1.0 / spec.la();
    let zero_eps = spec.eps == 0.0;
    // u = (alpha, beta, delta, eps1) in unconstrained coordinates.
    let decode = |u: &[f64]| -> BoundParams {
        let alpha = 1.0 + span * logistic(u[0]).clamp(1e-15, 1.0 - 1e-12);
        let beta = 1.0 + u[1].exp().max(1e-12);
        let delta = if zero_eps { 0.0 } else { logistic(u[2]).clamp(1e-300, 1.0 - 1e-12) };
        let e1 = smoothing * logistic(u[3]).clamp(1e-12, 1.0 - 1e-12);
        BoundParams {
            alpha,
            beta: Some(beta),
            delta: Some(delta),
            eps_splits: [e1, smoothing - e1, 0.0],
        }
    };
    let score = |u: &[f64]| -> f64 {
        let v = approx_eat_terms(spec, hk, &decode(u)).value;
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let preset = eat_preset(spec, smoothing);
    let clip = |p: &BoundParams| -> Vec<f64> {
        let a = ((p.alpha - 1.0) / span).clamp(1e-6, 1.0 - 1e-6);
        let d = p.delta.unwrap_or(0.5).clamp(1e-12, 1.0 - 1e-12);
        vec![logit(a), (p.beta.unwrap_or(2.0) - 1.0).ln(), logit(d), 0.0]
    };
    let mut starts = vec![clip(&preset)];
    for &a in &[0.01, 0.1, 0.5] {
        for &d in &[1e-6, 1e-3, 0.1] {
            starts.push(vec![logit(a), 0.0, logit(d), 0.0]);
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        let v0 = score(s);
        if best.as_ref().map_or(true, |b| v0 < b.0) {
            best = Some((v0, s.clone()));
        }
        let m = nelder_mead(score, s, &[1.0, 0.5, 1.0, 1.0], 4000, 1e-13);
        let m = nelder_mead(score, &m.x, &[0.2, 0.1, 0.2, 0.2], 4000, 1e-15);
        if best.as_ref().map_or(true, |b| m.value < b.0) {
            best = Some((m.value, m.x));
        }
    }
    let (v, u) = best.expect("non-empty starts");
    if !v.is_finite() {
        return Err(Error::NonConvergence("no finite parameter point".into()));
    }
    let p = decode(&u);
    let mut r = approx_eat_terms(spec, hk, &p);
    if zero_eps {
        r.params_used.delta = Some(0.0);
        r = r.with_note("eps = 0: delta at its boundary 0, dimension and z_beta terms vanish");
    }
    Ok(r)
}

/// Affine min-tradeoff function `f(q) = sum_x q(x) f(delta_x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinTradeoffFunction {
    pub alphabet: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `Min_Sigma(f)` if known; `Min(f)` is the safe default.
    #[serde(default)]
    pub min_sigma: Option<f64>,
    /// `Var(f)` over achievable distributions if known; otherwise the
    /// maximum over the whole simplex, `(Max - Min)^2 / 4`.
    #[serde(default)]
    pub var: Option<f64>,
}

impl MinTradeoffFunction {
    pub fn new(alphabet: Vec<String>, coefficients: Vec<f64>) -> Result<Self> {
        if alphabet.len() != coefficients.len() || alphabet.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: alphabet.len(),
                got: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("non-finite coefficient".into()));
        }
        Ok(Self {
            alphabet,
            coefficients,
            min_sigma: None,
            var: None,
        })
    }

    /// Fits an affine function through sampled `(q, f(q))` pairs; rejects
    /// samples that no affine function reproduces to 1e-9.
    pub fn from_samples(alphabet: Vec<String>, samples: &[(Vec<f64>, f64)]) -> Result<Self> {
        let d = alphabet.len();
        let mut coef: Vec<Option<f64>> = vec![None; d];
        for (q, v) in samples {
            if q.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: q.len(),
                });
            }
            if let Some(x) = q.iter().position(|&w| (w - 1.0).abs() < 1e-15) {
                coef[x] = Some(*v);
            }
        }
        let coefficients: Vec<f64> = coef
            .into_iter()
            .map(|c| c.ok_or_else(|| Error::Precondition("samples must include every vertex".into())))
            .collect::<Result<_>>()?;
        let f = Self::new(alphabet, coefficients)?;
        for (q, v) in samples {
            if (f.eval(q) - v).abs() > 1e-9 {
                return Err(Error::Precondition("min-tradeoff function is not affine".into()));
            }
        }
        Ok(f)
    }

    pub fn eval(&self, q: &[f64]) -> f64 {
        q.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    pub fn max(&self) -> f64 {
        self.coefficients.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.coefficients.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_sigma(&self) -> f64 {
        self.min_sigma.unwrap_or_else(|| self.min())
    }

    pub fn var(&self) -> f64 {
        self.var.unwrap_or_else(|| (self.max() - self.min()).powi(2) / 4.0)
    }
}

/// Approximate EAT with testing, conditioned on the event `Omega`.
/// `eps2 = 2 sqrt(eps1 / p_omega)` is derived, never supplied; `eps_splits[1]`
/// of `p` is ignored and reported back filled in.
///
/// The second-order term is scaled by `n`, as in the entropy accumulation
/// theorem it comes from.
pub fn approx_eat_testing_bound(
    spec: &ScenarioSpec,
    f: &MinTradeoffFunction,
    h: f64,
    p_omega: f64,
    p: &BoundParams,
) -> Result<BoundReport> {
    spec.validate()?;
    let a = p.alpha;
    if !(a > 1.0 && a < 2.0) {
        return Err(domain("alpha", a, "(1,2)"));
    }
    let beta = p.beta.ok_or_else(|| Error::Precondition("beta required".into()))?;
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(domain("beta", beta, "(1,inf)"));
    }
    let delta = p.delta.ok_or_else(|| Error::Precondition("delta required".into()))?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    let [e1, _, e3] = p.eps_splits;
    if !(p_omega > 0.0 && p_omega <= 1.0) {
        return Err(domain("p_omega", p_omega, "(0,1]"));
    }
    if !(e1 > 0.0 && e1 < 1.0 && e1 < p_omega) {
        return Err(domain("eps1", e1, "(0, min(1, p_omega))"));
    }
    let e2 = 2.0 * (e1 / p_omega).sqrt();
    if !(e3 > 0.0 && e2 + e3 < 1.0) {
        return Err(domain("eps2 + eps3", e2 + e3, "(0,1)"));
    }
    let n = spec.nf();
    let a1 = a - 1.0;
    let da = spec.dim_a as f64;
    let lab = log2(da * spec.dim_b as f64);
    let spread = f.max() - f.min();
    let ln2 = std::f64::consts::LN_2;
    let v = log2(2.0 * da * da + 1.0) + (2.0 + f.var()).sqrt();
    let terms = vec![
        ("nh", n * h),
        ("second_order", -n * a1 * ln2 / 2.0 * v * v),
        (
            "k_alpha",
            -n * a1 * a1 * k_alpha(a, spec.dim_a, f.max(), f.min_sigma())?,
        ),
        (
            "dimension",
            -a / a1 * n * log2(1.0 + delta * ((2.0 * a1 / a * (lab + spread + 1.0)).exp2() - 1.0)),
        ),
        ("z_beta", -a / a1 * n * z_beta(spec.eps, delta, beta)?),
        ("conditioning", -a / a1 * log2(1.0 / (p_omega - e1))),
        ("smoothing", -(g1(e3, e2)? + a * g0(e1)? / (beta - 1.0)) / a1),
    ];
    Ok(BoundReport::from_terms(
        terms,
        BoundParams {
            eps_splits: [e1, e2, e3],
            ..*p
        },
        e2 + e3,
    ))
}

/// Classical approximate EAT.
pub fn classical_eat_bound(
    spec: &ScenarioSpec,
    hk: &[f64],
    alpha: f64,
    eps_prime: f64,
) -> Result<BoundReport> {
    spec.validate()?;
    check_entropies(spec, hk)?;
    check_alpha_open(alpha, 1.0 + 1.0 / spec.la())?;
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(domain("eps_prime", eps_prime, "(0,1)"));
    }
    Ok(classical_eat_terms(spec, hk, alpha, eps_prime))
}

fn classical_eat_terms(spec: &ScenarioSpec, hk: &[f64], alpha: f64, eps_prime: f64) -> BoundReport {
    let n = spec.nf();
    let a1 = alpha - 1.0;
    let l = spec.la();
    let ab = (spec.dim_a * spec.dim_b) as f64;
    BoundReport::from_terms(
        vec![
            ("sum_h", sum_rounds(spec, hk)),
            ("second_order", -n * a1 * l * l),
            ("approximation", -alpha / a1 * n * log2(1.0 + spec.eps * ab)),
            ("smoothing", -g0(eps_prime).unwrap_or(f64::INFINITY) / a1),
        ],
        BoundParams {
            alpha,
            beta: None,
            delta: None,
            eps_splits: [eps_prime, 0.0, 0.0],
        },
        eps_prime,
    )
}

/// Classical EAT at `alpha = 1 + sqrt(eps)`.
pub fn classical_eat_preset(spec: &ScenarioSpec, hk: &[f64], eps_prime: f64) -> Result<BoundReport> {
    classical_eat_bound(spec, hk, 1.0 + spec.eps.sqrt(), eps_prime)
}

/// Classical EAT with `alpha` chosen by a bracketed golden-section search;
/// the objective is concave in `1/(alpha - 1)` and `alpha - 1` separately.
pub fn classical_eat_optimize(spec: &ScenarioSpec, hk: &[f64], eps_prime: f64) -> Result<BoundReport> {
    spec.validate()?;
    check_entropies(spec, hk)?;
    let span = 1.0 / spec.la();
    let val = |t: f64| classical_eat_terms(spec, hk, 1.0 + span * t, eps_prime).value;
    // Search t = (alpha - 1)/span on a log grid, then refine.
    let grid: Vec<f64> = (0..=240).map(|i| 10f64.powf(-12.0 + 12.0 * i as f64 / 240.0) * (1.0 - 1e-9)).collect();
    let mut bi = 0;
    for (i, &t) in grid.iter().enumerate() {
        if val(t) > val(grid[bi]) {
            bi = i;
        }
    }
    let (mut lo, mut hi) = (grid[bi.saturating_sub(1)], grid[(bi + 1).min(grid.len() - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if val(m1) < val(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let t = 0.5 * (lo + hi);
    let t = if val(t) >= val(grid[bi]) { t } else { grid[bi] };
    classical_eat_bound(spec, hk, 1.0 + span * t, eps_prime)
}

/// Bound families reachable from a parameter scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    ApproxIndep,
    ApproxIndepTrace,
    WeakAep,
    ApproxEat,
    ClassicalEat,
}

impl std::str::FromStr for Theorem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "approx-indep" => Theorem::ApproxIndep,
            "approx-indep-trace" => Theorem::ApproxIndepTrace,
            "weak-aep" => Theorem::WeakAep,
            "approx-eat" => Theorem::ApproxEat,
            "classical-eat" => Theorem::ClassicalEat,
            other => return Err(Error::Precondition(format!("unknown theorem {other}"))),
        })
    }
}

/// Evaluates one theorem at a scenario with the given total smoothing,
/// optimizing free parameters where the theorem has them.
pub fn evaluate(theorem: Theorem, spec: &ScenarioSpec, smoothing: f64) -> Result<BoundReport> {
    let h = &spec.per_round_entropies;
    match theorem {
        Theorem::ApproxIndep => approx_indep_bound(spec),
        Theorem::ApproxIndepTrace => approx_indep_from_trace(spec),
        Theorem::WeakAep => weak_aep_bound(spec),
        Theorem::ApproxEat => approx_eat_optimize(spec, h, smoothing),
        Theorem::ClassicalEat => classical_eat_optimize(spec, h, smoothing),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: Vec<u64>,
    pub eps: Vec<f64>,
    pub smoothing: Vec<f64>,
    pub dim_a: usize,
    pub dim_b: usize,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ScanTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Precondition(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Precondition(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Precondition(e.to_string()))
    }
}

/// One row per `(n, eps, smoothing)` cell: the inputs, the value and each
/// decomposition term in bits.
pub fn param_scan(theorem: Theorem, grid: &GridSpec) -> Result<ScanTable> {
    let mut header: Vec<String> = ["n", "eps", "smoothing", "value"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for &n in &grid.n {
        for &eps in &grid.eps {
            for &s in &grid.smoothing {
                let spec = ScenarioSpec::identical(n, grid.dim_a, grid.dim_b, eps, grid.h);
                let r = evaluate(theorem, &spec, s)?;
                if header.len() == 4 {
                    header.extend(r.decomposition.iter().map(|t| t.name.clone()));
                }
                let mut row = vec![n as f64, eps, s, r.value];
                row.extend(r.decomposition.iter().map(|t| t.value));
                rows.push(row);
            }
        }
    }
    Ok(ScanTable { header, rows })
}
