//! Key-rate chain for sequential CHSH-based device-independent key
//! distribution: the single-round entropy curve `f(omega)`, the winning
//! probability it requires, and the smooth min-entropy rate obtained from
//! the approximately independent register bound.

use serde::{Deserialize, Serialize};

use crate::bounds::{approx_indep_bound, BoundReport, ScenarioSpec};
use crate::error::{domain, Error, Result};

/// Maximal quantum CHSH winning probability `(2 + sqrt 2) / 4`.
pub const TSIRELSON: f64 = 0.853_553_390_593_273_8;
/// Classical CHSH winning probability.
pub const CLASSICAL: f64 = 0.75;

/// Binary entropy in bits; exactly 0 at 0 and 1.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// `h(1/2 + (1/2) sqrt(16 w (w - 1) + 3))`, the entropy deficit `1 - f(w)`
/// on `[3/4, (2 + sqrt 2)/4]`.
fn deficit(omega: f64) -> f64 {
    let r = (16.0 * omega * (omega - 1.0) + 3.0).clamp(0.0, 1.0).sqrt();
    binary_entropy(0.5 + 0.5 * r)
}

/// Lower bound on `H(A | X Y E)` for winning probability `omega`.
pub fn chsh_rate_function(omega: f64) -> Result<f64> {
    if !(0.0..=TSIRELSON + 1e-15).contains(&omega) {
        return Err(domain("omega", omega, "[0, (2+sqrt 2)/4]"));
    }
    if omega < CLASSICAL {
        return Ok(0.0);
    }
    Ok((1.0 - deficit(omega)).clamp(0.0, 1.0))
}

/// Smallest `w` in `[3/4, (2 + sqrt 2)/4]` with `1 - f(w) <= target`, by
/// bisection (the deficit is decreasing on the interval).
pub fn min_winning_probability(target: f64) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(domain("target", target, "(0,1]"));
    }
    let (mut lo, mut hi) = (CLASSICAL, TSIRELSON);
    if deficit(lo) <= target {
        return Ok(lo);
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deficit(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `omega_exp = w + delta_w` where `w` meets `1 - f(w) <= eps^4`.
pub fn omega_required(eps: f64, delta_w: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("eps", eps, "(0,1)"));
    }
    if !(delta_w >= 0.0) {
        return Err(domain("delta_w", delta_w, "[0, inf)"));
    }
    let w = min_winning_probability(eps.powi(4))? + delta_w;
    if w > TSIRELSON {
        return Err(Error::Precondition(format!(
            "required winning probability {w} exceeds the quantum maximum"
        )));
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiqkdSpec {
    pub n: u64,
    pub omega_exp: f64,
    /// Slack `delta` between the expected and guaranteed average winning
    /// probability.
    pub delta_w: f64,
    pub eps_target: f64,
    /// Fraction of test rounds; recorded only.
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl DiqkdSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Precondition("n must be positive".into()));
        }
        if !(self.eps_target > 0.0 && self.eps_target < 1.0) {
            return Err(domain("eps_target", self.eps_target, "(0,1)"));
        }
        if !(self.delta_w >= 0.0) {
            return Err(domain("delta_w", self.delta_w, "[0, inf)"));
        }
        if !(self.omega_exp >= CLASSICAL + self.delta_w && self.omega_exp <= TSIRELSON + 1e-15) {
            return Err(domain("omega_exp", self.omega_exp, "[3/4 + delta_w, (2+sqrt 2)/4]"));
        }
        Ok(())
    }

    /// The scenario handed to the approximately independent register bound:
    /// `|A| = 2`, `H(A_k) = 1` and mutual-information level `eps^4`.
    pub fn scenario(&self) -> ScenarioSpec {
        ScenarioSpec::identical(self.n, 2, 1, self.eps_target.powi(4), 1.0)
    }
}

/// `H_min^{eps + eps^4}(A_1^n | X_1^n Y_1^n T_1^n E)` lower bound. Rejects
/// an `omega_exp` that does not push the deficit at `omega_exp - delta_w`
/// below `eps^4`.
pub fn diqkd_keyrate_bound(spec: &DiqkdSpec) -> Result<BoundReport> {
    spec.validate()?;
    let target = spec.eps_target.powi(4);
    let d = deficit(spec.omega_exp - spec.delta_w);
    if d > target {
        return Err(Error::Precondition(format!(
            "1 - f(omega_exp - delta_w) = {d:e} exceeds eps^4 = {target:e}"
        )));
    }
    approx_indep_bound(&spec.scenario())
}

/// `1 - 3 eps log 5`, the per-round rate as `n -> inf`.
pub fn asymptotic_rate(eps: f64) -> f64 {
    1.0 - 3.0 * eps * 5f64.log2()
}

/// Smallest `n` with a nonnegative bound, by bisection over integers;
/// `None` when the asymptotic rate is not positive.
pub fn n_star(eps: f64) -> Result<Option<u64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("eps", eps, "(0,1)"));
    }
    if asymptotic_rate(eps) <= 0.0 {
        return Ok(None);
    }
    let value = |n: u64| -> Result<f64> {
        Ok(approx_indep_bound(&ScenarioSpec::identical(n, 2, 1, eps.powi(4), 1.0))?.value)
    };
    let mut hi: u64 = 1;
    while value(hi)? < 0.0 {
        hi = hi.checked_mul(2).ok_or_else(|| Error::NonConvergence("n* overflows u64".into()))?;
    }
    let mut lo = hi / 2;
    if value(lo.max(1))? >= 0.0 {
        return Ok(Some(lo.max(1)));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if value(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Clone, Debug, Serialize)]
pub struct DiqkdSummary {
    pub eps: f64,
    pub n: u64,
    /// Bits.
    pub rate_total: f64,
    /// Bits per round.
    pub rate_per_round: f64,
    pub asymptotic_rate: f64,
    pub n_star: Option<u64>,
    pub omega_required: f64,
    /// `eps + eps^4`.
    pub smoothing: f64,
    /// The bound on `I(A_1 : ... : A_n : X Y T E)`, `n eps^4`.
    pub mutual_information_input: f64,
    pub report: BoundReport,
}

/// Runs the chain at the smallest admissible `omega_exp`.
pub fn diqkd_summary(eps: f64, n: u64, delta_w: f64) -> Result<DiqkdSummary> {
    let omega = omega_required(eps, delta_w)?;
    let spec = DiqkdSpec {
        n,
        omega_exp: omega,
        delta_w,
        eps_target: eps,
        gamma: None,
    };
    let report = diqkd_keyrate_bound(&spec)?;
    Ok(DiqkdSummary {
        eps,
        n,
        rate_total: report.value,
        rate_per_round: report.value / n as f64,
        asymptotic_rate: asymptotic_rate(eps),
        n_star: n_star(eps)?,
        omega_required: omega,
        smoothing: report.smoothing,
        mutual_information_input: n as f64 * eps.powi(4),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_of_the_rate_curve() {
        assert!(chsh_rate_function(0.75).unwrap().abs() < 1e-10);
        assert!((chsh_rate_function(TSIRELSON).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(chsh_rate_function(0.5).unwrap(), 0.0);
        assert!(chsh_rate_function(0.9).is_err());
        assert!((TSIRELSON - (2.0 + 2f64.sqrt()) / 4.0).abs() <= 2.0 * f64::EPSILON);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
    }

    #[test]
    fn convex_and_monotone_on_grid() {
        let pts: Vec<f64> = (0..=50).map(|i| TSIRELSON * i as f64 / 50.0).collect();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fm = chsh_rate_function(0.5 * (a + b)).unwrap();
            let avg = 0.5 * (chsh_rate_function(a).unwrap() + chsh_rate_function(b).unwrap());
            assert!(fm <= avg + 1e-12);
            assert!(chsh_rate_function(b).unwrap() >= chsh_rate_function(a).unwrap() - 1e-15);
        }
        // Wider midpoints too.
        for i in 0..50 {
            let a = TSIRELSON * i as f64 / 50.0;
            let b = TSIRELSON;
            let fm = chsh_rate_function(0.5 * (a + b)).unwrap();
            let avg = 0.5 * (chsh_rate_function(a).unwrap() + chsh_rate_function(b).unwrap());
            assert!(fm <= avg + 1e-12);
        }
    }

    #[test]
    fn required_winning_probability_by_bisection() {
        let w = omega_required(0.1, 0.0).unwrap();
        assert!((deficit(w) - 1e-4).abs() < 1e-9);
        assert!(deficit(w - 1e-10) > 1e-4);
        assert!(w < TSIRELSON && w > CLASSICAL);
        assert!(omega_required(0.1, 0.1).is_err());
    }

    #[test]
    fn keyrate_equals_approx_indep_report() {
        let eps = 0.1;
        let spec = DiqkdSpec {
            n: 100_000_000,
            omega_exp: omega_required(eps, 1e-6).unwrap(),
            delta_w: 1e-6,
            eps_target: eps,
            gamma: Some(0.01),
        };
        let a = diqkd_keyrate_bound(&spec).unwrap();
        let b = approx_indep_bound(&ScenarioSpec::identical(spec.n, 2, 1, 1e-4, 1.0)).unwrap();
        assert!((a.value - b.value).abs() <= 1e-12 * b.value.abs().max(1.0));
        let per_round = a.term("per_round").unwrap();
        assert!((per_round + 3.0 * spec.n as f64 * eps * 5f64.log2()).abs() < 1e-6);
        // n H(A_k) - n(1 - eps^4) = n eps^4.
        let n = spec.n as f64;
        assert!((n - n * (1.0 - eps.powi(4)) - n * eps.powi(4)).abs() < 1e-6);
    }

    #[test]
    fn rejects_insufficient_winning_probability() {
        let spec = DiqkdSpec {
            n: 1000,
            omega_exp: 0.8,
            delta_w: 0.0,
            eps_target: 0.1,
            gamma: None,
        };
        assert!(matches!(diqkd_keyrate_bound(&spec), Err(Error::Precondition(_))));
    }

    #[test]
    fn rate_tends_to_asymptote() {
        for eps in [0.1, 0.2] {
            let s = diqkd_summary(eps, 10_000_000_000, 0.0).unwrap();
            assert!((s.rate_per_round - asymptotic_rate(eps)).abs() < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn positivity_threshold() {
        let eps = 0.1;
        let n = n_star(eps).unwrap().unwrap();
        let v = |n: u64| {
            approx_indep_bound(&ScenarioSpec::identical(n, 2, 1, eps.powi(4), 1.0))
                .unwrap()
                .value
        };
        assert!(v(n) >= 0.0 && v(n - 1) < 0.0);
        assert_eq!(n_star(0.2).unwrap(), None);
    }
}
