//! Exact classical smooth min-entropy oracles and the bad-set truncation for
//! approximately independent registers.
//!
//! For a joint `p(a, b)` the smoothed conditional min-entropy is
//! `-log min sum_b max_a p~(a, b)`. Over reduction-only `p~ <= p` the optimum
//! caps each column `b` at a level `m_b`, and lowering a level costs mass at a
//! rate equal to the number of entries above it. The program is therefore a
//! convex separable knapsack solved exactly by spending the budget on the
//! cheapest level segments first.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::linalg::{disjoint, ClassicalJoint};

/// Which ball the smoothing ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingBall {
    /// Subnormalized `p~ <= p` with removed mass at most `eps`, which is the
    /// generalized trace distance of such a `p~`.
    Subnormalized,
    /// Normalized `p~` with `(1/2)||p - p~||_1 <= eps`; mass removed from the
    /// peaks is returned below the column levels.
    Normalized,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingCertificate {
    /// The reduction part of the optimizer, entrywise below the input.
    pub smoothed: ClassicalJoint,
    pub distance: f64,
    /// One flag per entry of `smoothed`; true where mass was removed.
    pub bad_set_flags: Vec<bool>,
    /// `Pr_p(B_k)` per round for the bad-set construction; empty otherwise.
    pub per_round_bad_probability: Vec<f64>,
}

/// A group of columns `p(., b)` sharing one multiset of values, stored as
/// `(value, count)` runs.
#[derive(Clone, Debug)]
pub struct ColumnClass {
    pub runs: Vec<(f64, f64)>,
    pub multiplicity: f64,
}

impl ColumnClass {
    pub fn from_values(values: Vec<f64>, multiplicity: f64) -> Self {
        Self {
            runs: values.into_iter().map(|v| (v, 1.0)).collect(),
            multiplicity,
        }
    }

    /// Number of entries in one column.
    pub fn width(&self) -> f64 {
        self.runs.iter().map(|r| r.1).sum()
    }

    /// Mass of one column.
    pub fn mass(&self) -> f64 {
        self.runs.iter().map(|r| r.0 * r.1).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Fill {
    /// `sum_b m_b` counted with multiplicity.
    pub objective: f64,
    pub levels: Vec<f64>,
    pub removed: f64,
}

/// Minimizes `sum_b m_b` subject to removing at most `budget` mass, stopping
/// early once the objective reaches `floor`.
pub fn water_fill(classes: &[ColumnClass], budget: f64, floor: f64) -> Fill {
    struct Segment {
        class: usize,
        slope: f64,
        top: f64,
        bottom: f64,
    }
    let sorted: Vec<Vec<(f64, f64)>> = classes
        .iter()
        .map(|c| {
            let mut v: Vec<(f64, f64)> = c.runs.iter().copied().filter(|r| r.1 > 0.0).collect();
            v.sort_by(|a, b| b.0.total_cmp(&a.0));
            v
        })
        .collect();
    let mut segments = Vec::new();
    for (c, v) in sorted.iter().enumerate() {
        let mut count = 0.0;
        for j in 0..v.len() {
            count += v[j].1;
            let top = v[j].0;
            let bottom = v.get(j + 1).map_or(0.0, |r| r.0);
            if top > bottom {
                segments.push(Segment {
                    class: c,
                    slope: count,
                    top,
                    bottom,
                });
            }
        }
    }
    segments.sort_by(|a, b| a.slope.total_cmp(&b.slope));

    let mut levels: Vec<f64> = sorted
        .iter()
        .map(|v| v.first().map_or(0.0, |r| r.0))
        .collect();
    let mut objective: f64 = levels
        .iter()
        .zip(classes)
        .map(|(l, c)| l * c.multiplicity)
        .sum();
    let mut left = budget.max(0.0);
    for s in &segments {
        let mult = classes[s.class].multiplicity;
        let full = s.top - s.bottom;
        let by_budget = left / (mult * s.slope);
        let by_floor = ((objective - floor) / mult).max(0.0);
        let take = full.min(by_budget).min(by_floor);
        levels[s.class] = s.top - take;
        objective -= mult * take;
        left -= mult * s.slope * take;
        if take < full {
            break;
        }
    }
    let removed = sorted
        .iter()
        .zip(classes)
        .zip(&levels)
        .map(|((v, c), &l)| {
            c.multiplicity * v.iter().map(|r| r.1 * (r.0 - l).max(0.0)).sum::<f64>()
        })
        .sum();
    Fill {
        objective,
        levels,
        removed,
    }
}

/// Smoothed min-entropy over column classes, for distributions too large to
/// tabulate. Every class must have width `|A|`.
pub fn smooth_hmin_columns(classes: &[ColumnClass], eps: f64, ball: SmoothingBall) -> Result<f64> {
    let total: f64 = classes.iter().map(|c| c.multiplicity * c.mass()).sum();
    check_eps(eps, total)?;
    let width = classes.first().map_or(1.0, |c| c.width());
    if classes.iter().any(|c| (c.width() - width).abs() > 0.5) {
        return Err(Error::Precondition("column classes of unequal width".into()));
    }
    let floor = match ball {
        SmoothingBall::Subnormalized => 0.0,
        SmoothingBall::Normalized => total / width,
    };
    Ok(-water_fill(classes, eps, floor).objective.log2())
}

fn check_eps(eps: f64, total: f64) -> Result<()> {
    if !(eps >= 0.0 && eps < total) {
        return Err(domain("eps", eps, "[0, tr p)"));
    }
    Ok(())
}

/// `-log sum_b max_a p(a, b)`.
pub fn hmin_classical(p: &ClassicalJoint, a: &[&str], b: &[&str]) -> Result<f64> {
    let t = p.blocks(a, b)?;
    let s: f64 = t.iter().map(|col| col.iter().copied().fold(0.0, f64::max)).sum();
    Ok(-s.log2())
}

/// Exact trace-ball smooth min-entropy in the subnormalized ball.
pub fn smooth_hmin_classical(
    p: &ClassicalJoint,
    a: &[&str],
    b: &[&str],
    eps: f64,
) -> Result<(f64, SmoothingCertificate)> {
    smooth_hmin_classical_in(p, a, b, eps, SmoothingBall::Subnormalized)
}

pub fn smooth_hmin_classical_in(
    p: &ClassicalJoint,
    a: &[&str],
    b: &[&str],
    eps: f64,
    ball: SmoothingBall,
) -> Result<(f64, SmoothingCertificate)> {
    disjoint(a, b)?;
    let keep: Vec<&str> = a.iter().chain(b).copied().collect();
    let joint = p.marginal(&keep)?;
    let total = joint.total();
    check_eps(eps, total)?;
    let space = joint.space().clone();
    let sa = space.subspace(a)?;
    let sb = space.subspace(b)?;
    let ia = space.project_indices(&sa)?;
    let ib = space.project_indices(&sb)?;
    let mut cols = vec![vec![0.0; sa.dim()]; sb.dim()];
    for (i, &v) in joint.probs().iter().enumerate() {
        cols[ib[i]][ia[i]] = v;
    }
    let classes: Vec<ColumnClass> = cols
        .into_iter()
        .map(|values| ColumnClass::from_values(values, 1.0))
        .collect();
    let floor = match ball {
        SmoothingBall::Subnormalized => 0.0,
        SmoothingBall::Normalized => total / sa.dim() as f64,
    };
    let fill = water_fill(&classes, eps, floor);
    let smoothed: Vec<f64> = joint
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &v)| v.min(fill.levels[ib[i]]))
        .collect();
    let flags = joint
        .probs()
        .iter()
        .zip(&smoothed)
        .map(|(v, s)| s < v)
        .collect();
    Ok((
        -fill.objective.log2(),
        SmoothingCertificate {
            smoothed: ClassicalJoint::new(space, smoothed)?,
            distance: fill.removed,
            bad_set_flags: flags,
            per_round_bad_probability: Vec::new(),
        },
    ))
}

/// Outcome of the bad-set truncation.
#[derive(Clone, Debug, Serialize)]
pub struct ApproxIndepSmoothing {
    /// `n (1 - eps^{1/4}) H_min(A_1) - n log(1 + sqrt(eps))`.
    pub bound: f64,
    /// Min-entropy of the truncated distribution; never below `bound`.
    pub smoothed_hmin: f64,
    pub purified_distance: f64,
    /// `sqrt(2) eps^{1/8}`.
    pub budget: f64,
    pub within_budget: bool,
    pub certificate: SmoothingCertificate,
}

/// Removes every `(a_1^n, b)` that lies in more than `n eps^{1/4}` of the sets
/// `B_k = {p(a_k | a_1^{k-1}, b) > (1 + sqrt(eps)) p(a_k)}` and certifies the
/// min-entropy of what remains.
pub fn classical_approx_indep_smoothing(
    p: &ClassicalJoint,
    a: &[&str],
    b: &[&str],
    eps: f64,
) -> Result<ApproxIndepSmoothing> {
    if !(0.0..1.0).contains(&eps) {
        return Err(domain("eps", eps, "[0,1)"));
    }
    disjoint(a, b)?;
    let n = a.len();
    if n == 0 {
        return Err(Error::Precondition("no A registers".into()));
    }
    let keep: Vec<&str> = a.iter().chain(b).copied().collect();
    let sa: Vec<(&str, usize)> = a
        .iter()
        .map(|l| Ok((*l, p.space().dim_of(l)?)))
        .collect::<Result<_>>()?;
    let target = crate::linalg::RegisterSpace::new(&sa)?.concat(&p.space().subspace(b)?)?;
    let joint = p.marginal(&keep)?.permuted(&target)?;
    let dims: Vec<usize> = sa.iter().map(|r| r.1).collect();
    let db = target.dim() / dims.iter().product::<usize>();

    // Identical single-register marginals.
    let marg: Vec<Vec<f64>> = a
        .iter()
        .map(|l| Ok(joint.marginal(&[l])?.probs().to_vec()))
        .collect::<Result<_>>()?;
    for (k, m) in marg.iter().enumerate().skip(1) {
        let gap = if m.len() == marg[0].len() {
            m.iter().zip(&marg[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        if gap > 1e-9 {
            return Err(Error::Precondition(format!(
                "marginal of {} differs from {} by {gap:e}",
                a[k], a[0]
            )));
        }
    }

    // prefix[k][(a_1^k, b)] = p(a_1^k, b), b fastest.
    let mut prefix = vec![Vec::new(); n + 1];
    prefix[n] = joint.probs().to_vec();
    for k in (0..n).rev() {
        let dk = dims[k];
        let mut out = vec![0.0; prefix[k + 1].len() / dk];
        for (i, &v) in prefix[k + 1].iter().enumerate() {
            let bi = i % db;
            let head = i / db / dk;
            out[head * db + bi] += v;
        }
        prefix[k] = out;
    }

    let slack = 1.0 + eps.sqrt();
    let cutoff = n as f64 * eps.powf(0.25);
    let mut per_round = vec![0.0; n];
    let mut flags = vec![false; joint.probs().len()];
    let mut smoothed = joint.probs().to_vec();
    for (idx, &v) in joint.probs().iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let bi = idx % db;
        let mut rest = idx / db;
        let mut digits = vec![0; n];
        for k in (0..n).rev() {
            digits[k] = rest % dims[k];
            rest /= dims[k];
        }
        let mut head = 0;
        let mut count = 0usize;
        for k in 0..n {
            let prev = prefix[k][head * db + bi];
            head = head * dims[k] + digits[k];
            let cur = prefix[k + 1][head * db + bi];
            let cond = cur / prev;
            if cond > slack * marg[k][digits[k]] * (1.0 + 1e-12) {
                count += 1;
                per_round[k] += v;
            }
        }
        if count as f64 > cutoff {
            flags[idx] = true;
            smoothed[idx] = 0.0;
        }
    }

    let total = joint.total();
    let kept: f64 = smoothed.iter().sum();
    let fid = kept + ((1.0 - total).max(0.0) * (1.0 - kept).max(0.0)).sqrt();
    let purified_distance = (1.0 - fid * fid).max(0.0).sqrt();
    let hmin_a1 = -marg[0].iter().copied().fold(0.0, f64::max).log2();
    let bound = n as f64 * (1.0 - eps.powf(0.25)) * hmin_a1 - n as f64 * slack.log2();
    let budget = std::f64::consts::SQRT_2 * eps.powf(0.125);

    let mut colmax = vec![0.0f64; db];
    for (i, &v) in smoothed.iter().enumerate() {
        colmax[i % db] = colmax[i % db].max(v);
    }
    let smoothed_hmin = -colmax.iter().sum::<f64>().log2();
    if smoothed_hmin < bound - 1e-9 {
        return Err(Error::Certificate(format!(
            "truncated min-entropy {smoothed_hmin} below bound {bound}"
        )));
    }
    Ok(ApproxIndepSmoothing {
        bound,
        smoothed_hmin,
        purified_distance,
        budget,
        within_budget: purified_distance <= budget + 1e-12,
        certificate: SmoothingCertificate {
            smoothed: ClassicalJoint::new(target, smoothed)?,
            distance: purified_distance,
            bad_set_flags: flags,
            per_round_bad_probability: per_round,
        },
    })
}
