//! Quantum relative entropies and Rényi divergences in bits, plus the
//! classical smoothing oracle and scalar bounds that accompany them.
//!
//! Support questions are decided with `SUPPORT_TOL`. A divergence that is
//! infinite is returned as `Bits::Infinite`, never as a float overflow.

use nalgebra::DVector;
use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::linalg::{
    eigh, hermitize, log2_support, mat_power, real_trace, scalar_power, support_projector,
    trace_distance, trace_product, ClassicalJoint, DensityOperator, Eigh, HermitianObservable,
    Mat, Operator, C64, SUPPORT_TOL,
};

/// A value in bits that may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bits {
    Finite(f64),
    Infinite,
}

impl Bits {
    pub fn value(self) -> f64 {
        match self {
            Bits::Finite(v) => v,
            Bits::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bits::Finite(_))
    }

    /// The finite value, or a support error naming `what`.
    pub fn finite(self, what: &str) -> Result<f64> {
        match self {
            Bits::Finite(v) => Ok(v),
            Bits::Infinite => Err(Error::Support(format!("{what} is infinite"))),
        }
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bits::Finite(v) => s.serialize_f64(*v),
            Bits::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Rényi order; `Infinity` is symbolic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order {
    Finite(f64),
    Infinity,
}

impl Order {
    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinity)
    }

    pub fn value(self) -> f64 {
        match self {
            Order::Finite(a) => a,
            Order::Infinity => f64::INFINITY,
        }
    }

    /// `(alpha - 1) / alpha`, equal to 1 at infinity.
    pub fn alpha_prime(self) -> f64 {
        match self {
            Order::Finite(a) => (a - 1.0) / a,
            Order::Infinity => 1.0,
        }
    }
}

impl From<f64> for Order {
    fn from(a: f64) -> Self {
        if a == f64::INFINITY {
            Order::Infinity
        } else {
            Order::Finite(a)
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(v) => s.serialize_f64(*v),
            Order::Infinity => s.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Relative,
    Max,
    Petz,
    Sandwiched,
    Geometric,
    SharpUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceResult {
    pub value: Bits,
    pub alpha: Order,
    pub family: Family,
}

fn same_space(p: &impl Operator, q: &impl Operator) -> Result<()> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Whether `supp(p) ⊆ supp(q)`: every kernel vector `v` of `q` has
/// `<v|p|v>` at or below the support tolerance.
pub fn supported_in(p: &Mat, q: &Mat) -> bool {
    let e = eigh(q);
    (0..e.values.len())
        .filter(|&j| e.values[j] <= SUPPORT_TOL)
        .all(|j| {
            let v = e.vectors.column(j);
            (v.adjoint() * p * v)[(0, 0)].re <= SUPPORT_TOL
        })
}

/// Whether the supports of `p` and `q` are orthogonal.
pub fn orthogonal(p: &Mat, q: &Mat) -> bool {
    trace_product(&support_projector(p), &support_projector(q)) <= SUPPORT_TOL
}

fn positive_trace(p: &Mat) -> Result<f64> {
    let t = real_trace(p);
    if !(t > 0.0) {
        return Err(Error::InvalidTrace(t));
    }
    Ok(t)
}

/// `(tr p log p - tr p log q) / tr p` on raw PSD matrices.
pub fn relative_entropy_mat(p: &Mat, q: &Mat) -> Result<Bits> {
    let tp = positive_trace(p)?;
    if !supported_in(p, q) {
        return Ok(Bits::Infinite);
    }
    let v = trace_product(p, &log2_support(p)) - trace_product(p, &log2_support(q));
    Ok(Bits::Finite(v / tp))
}

/// `q^{-1/2}` on the support of `q`.
fn inv_sqrt(q: &Mat) -> Mat {
    mat_power(q, -0.5)
}

pub fn max_relative_entropy_mat(p: &Mat, q: &Mat) -> Result<Bits> {
    positive_trace(p)?;
    if !supported_in(p, q) {
        return Ok(Bits::Infinite);
    }
    let s = inv_sqrt(q);
    let top = eigh(&hermitize(&(&s * p * &s)))
        .values
        .last()
        .copied()
        .unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::Support("p vanishes on the support of q".into()));
    }
    Ok(Bits::Finite(top.log2()))
}

fn check_petz_order(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0 && alpha != 1.0) {
        return Err(domain("alpha", alpha, "(0,1) ∪ (1,2)"));
    }
    Ok(())
}

fn check_sandwiched_order(alpha: Order) -> Result<()> {
    if let Order::Finite(a) = alpha {
        if !(a >= 0.5 && a != 1.0 && a.is_finite()) {
            return Err(domain("alpha", a, "[1/2,1) ∪ (1,inf]"));
        }
    }
    Ok(())
}

pub fn petz_renyi_mat(p: &Mat, q: &Mat, alpha: f64) -> Result<Bits> {
    check_petz_order(alpha)?;
    let tp = positive_trace(p)?;
    if alpha > 1.0 && !supported_in(p, q) {
        return Ok(Bits::Infinite);
    }
    if alpha < 1.0 && orthogonal(p, q) {
        return Ok(Bits::Infinite);
    }
    let s = trace_product(&mat_power(p, alpha), &mat_power(q, 1.0 - alpha));
    if !(s > 0.0) {
        return Ok(Bits::Infinite);
    }
    Ok(Bits::Finite((s / tp).log2() / (alpha - 1.0)))
}

/// `log2 sum_i mu_i^a` without overflow, for nonnegative `mu`.
fn log2_power_sum(mu: &[f64], a: f64) -> f64 {
    let top = mu.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let s: f64 = mu
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| (m / top).powf(a))
        .sum();
    a * top.log2() + s.log2()
}

pub fn sandwiched_renyi_mat(p: &Mat, q: &Mat, alpha: Order) -> Result<Bits> {
    check_sandwiched_order(alpha)?;
    let a = match alpha {
        Order::Infinity => return max_relative_entropy_mat(p, q),
        Order::Finite(a) => a,
    };
    let tp = positive_trace(p)?;
    if a > 1.0 && !supported_in(p, q) {
        return Ok(Bits::Infinite);
    }
    if a < 1.0 && orthogonal(p, q) {
        return Ok(Bits::Infinite);
    }
    let ap = (a - 1.0) / a;
    let w = mat_power(q, -ap / 2.0);
    let mu: Vec<f64> = eigh(&hermitize(&(&w * p * &w)))
        .values
        .iter()
        .map(|m| m.max(0.0))
        .collect();
    let l = log2_power_sum(&mu, a);
    if !l.is_finite() {
        return Ok(Bits::Infinite);
    }
    Ok(Bits::Finite((l - tp.log2()) / (a - 1.0)))
}

/// Largest eigenvalue gap below which `a` counts as rank one.
const RANK_ONE_TOL: f64 = 1e-12;

/// `<v|q^{-1}|v>` on `supp(q)`. A full-rank `q` goes through a Cholesky
/// solve on the original matrix, which stays accurate when `q` is badly
/// conditioned; otherwise the eigenbasis of the support is used.
fn inverse_quadratic_form(q: &Mat, eq: &Eigh, v: &DVector<C64>) -> Result<f64> {
    if eq.values.first().copied().unwrap_or(0.0) > SUPPORT_TOL {
        if let Some(chol) = hermitize(q).cholesky() {
            let x = chol.solve(v);
            return Ok((v.adjoint() * x)[(0, 0)].re);
        }
    }
    Ok((0..eq.values.len())
        .filter(|&j| eq.values[j] > SUPPORT_TOL)
        .map(|j| (eq.vectors.column(j).adjoint() * v)[(0, 0)].norm_sqr() / eq.values[j])
        .sum())
}

/// `(1/(alpha-1)) log tr(q (q^{-1/2} a q^{-1/2})^alpha)` on raw matrices.
pub fn geometric_renyi_mat(a: &Mat, q: &Mat, alpha: f64) -> Result<Bits> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(domain("alpha", alpha, "(1, inf)"));
    }
    let ea = eigh(a);
    let top = ea.values.last().copied().unwrap_or(0.0);
    if ea.values.first().copied().unwrap_or(0.0) < -1e-9 {
        return Err(Error::NotPsd(ea.values[0]));
    }
    if !(top > SUPPORT_TOL) {
        return Err(Error::Precondition("geometric divergence of the zero operator".into()));
    }
    if !supported_in(a, q) {
        return Ok(Bits::Infinite);
    }
    let eq = eigh(q);
    let n = ea.values.len();
    let second = if n >= 2 { ea.values[n - 2] } else { 0.0 };
    if second <= RANK_ONE_TOL * top.max(1.0) {
        // a = c |v><v|: the value is (alpha/(alpha-1)) log c + log <v|q^{-1}|v>.
        let v = ea.vectors.column(n - 1).into_owned();
        let w = inverse_quadratic_form(q, &eq, &v)?;
        return Ok(Bits::Finite(alpha / (alpha - 1.0) * top.log2() + w.log2()));
    }
    let s = eq.apply(|l| scalar_power(l, -0.5));
    let m = eigh(&hermitize(&(&s * a * &s)));
    let mut terms = Vec::with_capacity(n);
    for (j, &mu) in m.values.iter().enumerate() {
        if mu > 0.0 {
            let v = m.vectors.column(j);
            let weight = (v.adjoint() * q * v)[(0, 0)].re.max(0.0);
            terms.push((mu, weight));
        }
    }
    // log2 sum mu^alpha w, shifted by the largest mu.
    let top_mu = terms.iter().map(|t| t.0).fold(0.0, f64::max);
    let s: f64 = terms
        .iter()
        .map(|&(mu, w)| (mu / top_mu).powf(alpha) * w)
        .sum();
    if !(s > 0.0) {
        return Ok(Bits::Infinite);
    }
    Ok(Bits::Finite((alpha * top_mu.log2() + s.log2()) / (alpha - 1.0)))
}

pub fn relative_entropy(p: &impl Operator, q: &impl Operator) -> Result<DivergenceResult> {
    same_space(p, q)?;
    Ok(DivergenceResult {
        value: relative_entropy_mat(p.matrix(), q.matrix())?,
        alpha: Order::Finite(1.0),
        family: Family::Relative,
    })
}

pub fn max_relative_entropy(p: &impl Operator, q: &impl Operator) -> Result<DivergenceResult> {
    same_space(p, q)?;
    Ok(DivergenceResult {
        value: max_relative_entropy_mat(p.matrix(), q.matrix())?,
        alpha: Order::Infinity,
        family: Family::Max,
    })
}

pub fn petz_renyi(p: &impl Operator, q: &impl Operator, alpha: f64) -> Result<DivergenceResult> {
    same_space(p, q)?;
    Ok(DivergenceResult {
        value: petz_renyi_mat(p.matrix(), q.matrix(), alpha)?,
        alpha: Order::Finite(alpha),
        family: Family::Petz,
    })
}

/// Sandwiched divergence; `Order::Infinity` dispatches to `D_max`.
pub fn sandwiched_renyi(
    p: &impl Operator,
    q: &impl Operator,
    alpha: impl Into<Order>,
) -> Result<DivergenceResult> {
    same_space(p, q)?;
    let alpha = alpha.into();
    Ok(DivergenceResult {
        value: sandwiched_renyi_mat(p.matrix(), q.matrix(), alpha)?,
        alpha,
        family: Family::Sandwiched,
    })
}

pub fn geometric_renyi(
    a: &HermitianObservable,
    q: &impl Operator,
    alpha: f64,
) -> Result<DivergenceResult> {
    same_space(a, q)?;
    Ok(DivergenceResult {
        value: geometric_renyi_mat(a.matrix(), q.matrix(), alpha)?,
        alpha: Order::Finite(alpha),
        family: Family::Geometric,
    })
}

/// Output of the dominating-operator construction for the sharp divergence.
#[derive(Clone, Debug)]
pub struct SharpBound {
    /// Geometric divergence of the witness against `q`.
    pub result: DivergenceResult,
    /// The dominating operator `A_t` at `t = t_min`.
    pub witness: HermitianObservable,
    pub t_min: f64,
    pub eps: f64,
    pub d_max: f64,
    /// Analytic upper bound for the returned value.
    pub closed_form: f64,
    /// Smallest eigenvalue of `A_t - p`.
    pub dominance_slack: f64,
}

/// Closed-form upper bound on the sharp divergence for states at trace
/// distance `eps` with `D_max <= d`.
pub fn sharp_closed_form(eps: f64, d: f64, alpha: f64) -> f64 {
    let se = eps.sqrt();
    (alpha + 1.0) / (alpha - 1.0)
        * ((1.0 + se).powf(alpha / (alpha + 1.0))
            + (2f64.powf(alpha * d) * se).powf(1.0 / (alpha + 1.0)))
        .log2()
}

/// Builds `A_t >= p` from the pinching argument and evaluates the geometric
/// divergence of `A_t` against `q`. Works on `supp(q)`.
pub fn sharp_upper_bound(
    p: &DensityOperator,
    q: &DensityOperator,
    alpha: f64,
) -> Result<SharpBound> {
    same_space(p, q)?;
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(domain("alpha", alpha, "(1, inf)"));
    }
    let (pm, qm) = (p.matrix(), q.matrix());
    let d_max = max_relative_entropy_mat(pm, qm)?.finite("D_max(p||q)")?;
    let eps = trace_distance(p, q)?;

    let eq = eigh(qm);
    let v = eq.support_basis(SUPPORT_TOL);
    let pr = hermitize(&(v.adjoint() * pm * &v));
    let sigma = hermitize(&(v.adjoint() * qm * &v));
    let k = sigma.nrows();
    let es = eigh(&sigma);
    let s_half = es.apply(|l| l.max(0.0).sqrt());
    let s_inv_half = es.apply(|l| scalar_power(l, -0.5));

    let se = eps.sqrt();
    let t_min = (2f64.powf(alpha * d_max) * se / (1.0 + se).powf(alpha)).powf(1.0 / (alpha + 1.0));
    let positive = eigh(&(&pr - &sigma)).apply(|l| l.max(0.0));
    let m = eigh(&hermitize(&(&s_inv_half * positive * &s_inv_half)));
    let good: Vec<usize> = (0..k).filter(|&j| m.values[j] <= se).collect();
    let bad: Vec<usize> = (0..k).filter(|&j| m.values[j] > se).collect();
    let proj = |cols: &[usize]| {
        let b = m.vectors.select_columns(cols);
        &b * b.adjoint()
    };
    let mut a = Mat::zeros(k, k);
    if eps == 0.0 {
        a = sigma.clone();
    } else {
        if !good.is_empty() {
            a += (&s_half * proj(&good) * &s_half).scale((1.0 + t_min) * (1.0 + se));
        }
        if !bad.is_empty() {
            a += (&s_half * proj(&bad) * &s_half)
                .scale((1.0 + 1.0 / t_min) * 2f64.powf(d_max));
        }
    }
    let a = hermitize(&a);
    let dominance_slack = eigh(&(&a - &pr)).values[0];
    if dominance_slack < -1e-9 {
        return Err(Error::Certificate(format!(
            "A_t - p has eigenvalue {dominance_slack:e}"
        )));
    }
    let value = geometric_renyi_mat(&a, &sigma, alpha)?;
    let witness = hermitize(&(&v * &a * v.adjoint()));
    Ok(SharpBound {
        result: DivergenceResult {
            value,
            alpha: Order::Finite(alpha),
            family: Family::SharpUpper,
        },
        witness: HermitianObservable::new(p.space().clone(), witness)?,
        t_min,
        eps,
        d_max,
        closed_form: sharp_closed_form(eps, d_max, alpha),
        dominance_slack,
    })
}

/// Smallest `lambda` such that removing at most `eps` mass from `p` leaves
/// `p~ <= 2^lambda q`. Solved exactly over the sorted ratios `p/q`.
pub fn smooth_dmax_classical(p: &ClassicalJoint, q: &ClassicalJoint, eps: f64) -> Result<f64> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    smooth_dmax_slices(p.probs(), q.probs(), eps)
}

pub fn smooth_dmax_slices(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    let total: f64 = p.iter().sum();
    if !(eps >= 0.0) || eps >= total {
        return Err(domain("eps", eps, "[0, tr p)"));
    }
    let unsupported: f64 = p
        .iter()
        .zip(q)
        .filter(|&(_, &qi)| qi <= 0.0)
        .map(|(&pi, _)| pi)
        .sum();
    if unsupported > eps {
        return Ok(f64::INFINITY);
    }
    let budget = eps - unsupported;
    let mut ratios: Vec<(f64, f64, f64)> = p
        .iter()
        .zip(q)
        .filter(|&(&pi, &qi)| qi > 0.0 && pi > 0.0)
        .map(|(&pi, &qi)| (pi / qi, pi, qi))
        .collect();
    ratios.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut pk, mut qk) = (0.0, 0.0);
    for (i, &(_, pi, qi)) in ratios.iter().enumerate() {
        pk += pi;
        qk += qi;
        let next = ratios.get(i + 1).map_or(0.0, |r| r.0);
        let c = (pk - budget) / qk;
        if c >= next {
            return Ok(c.log2());
        }
    }
    Err(Error::NonConvergence("smoothing scan exhausted".into()))
}

/// `(d + 1)/eps + log(1/(1 - eps))`.
pub fn substate_bound(d_value: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("eps", eps, "(0, 1)"));
    }
    if !(d_value >= 0.0) {
        return Err(domain("d", d_value, "[0, inf)"));
    }
    Ok((d_value + 1.0) / eps - (1.0 - eps).log2())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenyiCloseBound {
    pub value: f64,
    /// The `alpha -> 1` form of the same bound.
    pub limit_alpha_one: f64,
}

/// Bound on the classical Rényi divergence of distributions at trace
/// distance `eps` with `D_max <= d`.
pub fn classical_renyi_close_bound(eps: f64, d: f64, alpha: f64) -> Result<RenyiCloseBound> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain("eps", eps, "(0, 1]"));
    }
    if !(alpha > 1.0) {
        return Err(domain("alpha", alpha, "(1, inf)"));
    }
    let se = eps.sqrt();
    if d < se {
        return Err(domain("d", d, "[sqrt(eps), inf)"));
    }
    let arg = (1.0 + se).powf(alpha - 1.0) * (1.0 - 2.0 * se)
        + 2f64.powf(d * (alpha - 1.0) + 1.0) * se;
    Ok(RenyiCloseBound {
        value: arg.log2() / (alpha - 1.0),
        limit_alpha_one: (1.0 - 2.0 * se) * (1.0 + se).log2() + 2.0 * se * d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_matrix, RegisterSpace};
    use crate::random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(d: usize) -> RegisterSpace {
        RegisterSpace::new(&[("A", d)]).unwrap()
    }

    fn diag(p: &[f64]) -> DensityOperator {
        DensityOperator::diagonal(space(p.len()), p).unwrap()
    }

    fn v(r: DivergenceResult) -> f64 {
        r.value.value()
    }

    #[test]
    fn self_divergences_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random::density(&mut rng, space(3), None).unwrap();
        assert!(v(relative_entropy(&r, &r).unwrap()).abs() < 1e-10);
        assert!(v(max_relative_entropy(&r, &r).unwrap()).abs() < 1e-10);
        assert!(v(petz_renyi(&r, &r, 0.5).unwrap()).abs() < 1e-10);
        assert!(v(sandwiched_renyi(&r, &r, 2.0).unwrap()).abs() < 1e-10);
        assert!(v(geometric_renyi(&r.as_observable(), &r, 2.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn pure_against_maximally_mixed() {
        let z = diag(&[1.0, 0.0]);
        let mm = diag(&[0.5, 0.5]);
        assert!((v(relative_entropy(&z, &mm).unwrap()) - 1.0).abs() < 1e-12);
        assert!((v(max_relative_entropy(&z, &mm).unwrap()) - 1.0).abs() < 1e-12);
        assert_eq!(relative_entropy(&mm, &z).unwrap().value, Bits::Infinite);
    }

    #[test]
    fn commuting_pairs_match_scalar_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = random::distribution(&mut rng, 4);
            let q = random::distribution(&mut rng, 4);
            let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).log2()).sum();
            assert!((v(relative_entropy(&diag(&p), &diag(&q)).unwrap()) - kl).abs() < 1e-10);
            let a = 0.7;
            let petz = p
                .iter()
                .zip(&q)
                .map(|(x, y)| x.powf(a) * y.powf(1.0 - a))
                .sum::<f64>()
                .log2()
                / (a - 1.0);
            assert!((v(petz_renyi(&diag(&p), &diag(&q), a).unwrap()) - petz).abs() < 1e-10);
            let s2 = p.iter().zip(&q).map(|(x, y)| x * x / y).sum::<f64>().log2();
            assert!((v(sandwiched_renyi(&diag(&p), &diag(&q), 2.0).unwrap()) - s2).abs() < 1e-10);
        }
    }

    #[test]
    fn dmax_matches_psd_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let p = random::density(&mut rng, space(3), None).unwrap();
            let q = random::density(&mut rng, space(3), None).unwrap();
            let (mut lo, mut hi) = (-10.0f64, 40.0f64);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let gap = q.matrix().scale(2f64.powf(mid)) - p.matrix();
                if eigh(&gap).values[0] >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let d = v(max_relative_entropy(&p, &q).unwrap());
            assert!((d - hi).abs() < 1e-8, "{d} vs {hi}");
        }
    }

    #[test]
    fn order_domains_are_enforced() {
        let r = diag(&[0.5, 0.5]);
        assert!(petz_renyi(&r, &r, 2.0).is_err());
        assert!(petz_renyi(&r, &r, 1.0).is_err());
        assert!(sandwiched_renyi(&r, &r, 0.4).is_err());
        assert!(geometric_renyi(&r.as_observable(), &r, 1.0).is_err());
        assert_eq!(
            sandwiched_renyi(&r, &r, Order::Infinity).unwrap().family,
            Family::Sandwiched
        );
    }

    #[test]
    fn support_conventions_below_one() {
        let z0 = diag(&[1.0, 0.0]);
        let z1 = diag(&[0.0, 1.0]);
        let mm = diag(&[0.5, 0.5]);
        assert_eq!(petz_renyi(&z0, &z1, 0.5).unwrap().value, Bits::Infinite);
        assert!(petz_renyi(&mm, &z0, 0.5).unwrap().value.is_finite());
        assert_eq!(petz_renyi(&mm, &z0, 1.5).unwrap().value, Bits::Infinite);
        assert_eq!(sandwiched_renyi(&z0, &z1, 0.7).unwrap().value, Bits::Infinite);
    }

    #[test]
    fn geometric_pure_state_example() {
        let z = diag(&[1.0, 0.0]).as_observable();
        let s = diag(&[2.0 / 3.0, 1.0 / 3.0]);
        for a in [1.5, 2.0, 7.0] {
            assert!((v(geometric_renyi(&z, &s, a).unwrap()) - 1.5f64.log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_general_path_matches_commuting_formula() {
        // Commuting a, q: sum_i a_i^alpha q_i^{1-alpha}.
        let a: [f64; 3] = [0.2, 0.5, 0.3];
        let q: [f64; 3] = [0.4, 0.4, 0.2];
        let want = a
            .iter()
            .zip(&q)
            .map(|(x, y)| x.powf(2.5) * y.powf(-1.5))
            .sum::<f64>()
            .log2()
            / 1.5;
        let got = geometric_renyi_mat(&diag_matrix(&a), &diag_matrix(&q), 2.5)
            .unwrap()
            .value();
        assert!((got - want).abs() < 1e-12);
        assert!(geometric_renyi_mat(&Mat::zeros(3, 3), &diag_matrix(&q), 2.0).is_err());
    }

    #[test]
    fn sharp_bound_sandwich_on_close_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = random::density(&mut rng, space(2), None).unwrap();
        let q = random::nearby(&mut rng, &p, 0.01).unwrap();
        let b = sharp_upper_bound(&p, &q, 2.0).unwrap();
        let lower = v(sandwiched_renyi(&p, &q, 2.0).unwrap());
        let mid = b.result.value.value();
        assert!(lower <= mid + 1e-9 && mid <= b.closed_form + 1e-9, "{lower} {mid} {}", b.closed_form);
        assert!(b.dominance_slack >= -1e-9);
    }

    #[test]
    fn sharp_bound_at_equality_returns_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = random::density(&mut rng, space(3), None).unwrap();
        let b = sharp_upper_bound(&p, &p, 2.0).unwrap();
        assert!(b.result.value.value() <= 1e-9);
        assert!((b.witness.matrix() - p.matrix()).norm() < 1e-12);
        assert!(b.closed_form.abs() < 1e-12);
    }

    #[test]
    fn sharp_bound_classical_floor() {
        let p = diag(&[0.5, 0.3, 0.2]);
        let q = diag(&[0.48, 0.3, 0.22]);
        let b = sharp_upper_bound(&p, &q, 1.5).unwrap();
        let floor = (p.matrix().diagonal().iter().zip(q.matrix().diagonal().iter()))
            .map(|(x, y)| x.re.powf(1.5) * y.re.powf(-0.5))
            .sum::<f64>()
            .log2()
            / 0.5;
        assert!(floor <= b.result.value.value() + 1e-12);
        assert!(b.result.value.value() <= b.closed_form + 1e-12);
    }

    fn binary_search_smooth_dmax(p: &[f64], q: &[f64], eps: f64) -> f64 {
        let (mut lo, mut hi) = (-60.0f64, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let c = 2f64.powf(mid);
            let cut: f64 = p.iter().zip(q).map(|(a, b)| (a - c * b).max(0.0)).sum();
            if cut <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn smooth_dmax_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let p = random::distribution(&mut rng, 5);
            let q = random::distribution(&mut rng, 5);
            let eps = rng.gen_range(0.0..0.5);
            let got = smooth_dmax_slices(&p, &q, eps).unwrap();
            let want = binary_search_smooth_dmax(&p, &q, eps);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn smooth_dmax_examples() {
        let p = [0.4, 0.3, 0.2, 0.1];
        let q = [0.25; 4];
        assert!((smooth_dmax_slices(&p, &q, 0.0).unwrap() - 1.6f64.log2()).abs() < 1e-12);
        // Spike of mass 0.3 on a point where q is tiny; budget covers it.
        let p = [0.3, 0.3, 0.2, 0.2];
        let q = [0.01, 0.33, 0.33, 0.33];
        let got = smooth_dmax_slices(&p, &q, 0.3).unwrap();
        // Enumerate which points are trimmed to zero; the rest keep p.
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let removed: f64 = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| p[i]).sum();
            if removed <= 0.3 + 1e-15 {
                let r = (0..4)
                    .filter(|i| mask >> i & 1 == 0)
                    .map(|i| p[i] / q[i])
                    .fold(0.0, f64::max);
                best = best.min(r.log2());
            }
        }
        assert!(got <= best + 1e-12);
        assert!(best <= (0.3f64 / 0.33).log2() + 1e-12);
        assert!((got - binary_search_smooth_dmax(&p, &q, 0.3)).abs() < 1e-9);
        assert!(smooth_dmax_slices(&p, &q, 1.0).is_err());
    }

    #[test]
    fn substate_values() {
        assert!((substate_bound(0.0, 0.5).unwrap() - 3.0).abs() < 1e-12);
        let (n, e) = (100.0, 0.01f64);
        let want = n * e.sqrt() + 1.0 / e.sqrt() - (1.0 - e.sqrt()).log2();
        assert!((substate_bound(n * e, e.sqrt()).unwrap() - want).abs() < 1e-10);
        assert!(substate_bound(1.0, 1.0).is_err());
    }

    #[test]
    fn renyi_close_bound_values() {
        let b = classical_renyi_close_bound(0.01, 1.0, 2.0).unwrap();
        assert!((b.limit_alpha_one - (0.8 * 1.1f64.log2() + 0.2)).abs() < 1e-12);
        let tiny = classical_renyi_close_bound(1e-14, 1.0, 2.0).unwrap();
        assert!(tiny.value.abs() < 1e-6);
        assert!(classical_renyi_close_bound(0.01, 0.05, 2.0).is_err());
    }
}
