//! Randomized property suites. Every group draws its cases from its own
//! seeded generator and reports the worst slack it saw, where slack is
//! `rhs - lhs` for an inequality `lhs <= rhs` and `-|gap|` for an identity.

use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    approx_eat_bound, approx_eat_optimize, approx_indep_bound, classical_eat_bound,
    classical_eat_optimize, eat_preset, weak_aep_bound, BoundReport, ScenarioSpec,
};
use crate::channel::{classical_diamond_distance, quantum_diamond_lower_bound, ClassicalChannel};
use crate::diqkd::{self, DiqkdSpec};
use crate::divergences::{
    geometric_renyi_mat, max_relative_entropy_mat, petz_renyi_mat, relative_entropy_mat,
    sandwiched_renyi_mat, sharp_upper_bound, Bits, Order,
};
use crate::entropies::{chain_rule_nu_state, h_min, h_up_alpha, petz_up_closed_form, EntropyFamily};
use crate::error::{Error, Result};
use crate::linalg::{
    asymmetric_pinching_witness, herm_power, purified_distance, support_projector, trace_distance,
    ClassicalJoint, DensityOperator, Mat, RegisterSpace, C64,
};
use crate::random;
use crate::simulate::{
    build_r_distribution, counterexample_side_info, counterexample_triangle, copy_chain_stats,
    quantum_eat_smoke, random_eat_process, round_entropies, run_sequential_classical, SmokeParams,
};
use crate::smoothing::{hmin_classical, smooth_hmin_classical};
use crate::divergences::smooth_dmax_slices;

/// Named suites reachable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Triangle,
    Divergences,
    Entropies,
    ChainRules,
    DimensionBounds,
    Pinching,
    Sharp,
    Counterexamples,
    EatSmoke,
    All,
}

impl Suite {
    pub const EACH: [Suite; 9] = [
        Suite::Triangle,
        Suite::Divergences,
        Suite::Entropies,
        Suite::ChainRules,
        Suite::DimensionBounds,
        Suite::Pinching,
        Suite::Sharp,
        Suite::Counterexamples,
        Suite::EatSmoke,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Triangle => "triangle",
            Suite::Divergences => "divergences",
            Suite::Entropies => "entropies",
            Suite::ChainRules => "chain-rules",
            Suite::DimensionBounds => "dimension-bounds",
            Suite::Pinching => "pinching",
            Suite::Sharp => "sharp",
            Suite::Counterexamples => "counterexamples",
            Suite::EatSmoke => "eat-smoke",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .chain(std::iter::once(&Suite::All))
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("unknown suite {s}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyGroup {
    pub name: String,
    pub cases: usize,
    /// Bits where the compared quantities are entropies or divergences.
    pub worst_slack: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// First few errors or violations, for diagnosis.
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub groups: Vec<PropertyGroup>,
}

const MAX_FAILURES: usize = 5;

/// Accumulates slacks for one property group.
pub struct Tally {
    name: String,
    tol: f64,
    cases: usize,
    worst: f64,
    failures: Vec<String>,
    errored: bool,
}

impl Tally {
    pub fn new(name: &str, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            tol,
            cases: 0,
            worst: f64::INFINITY,
            failures: Vec::new(),
            errored: false,
        }
    }

    pub fn slack(&mut self, s: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
        if s < self.worst {
            self.worst = s;
        }
        if s < -self.tol && self.failures.len() < MAX_FAILURES {
            self.failures.push(format!("{} (slack {s:e})", what()));
        }
    }

    /// Records `lhs <= rhs`.
    pub fn le(&mut self, lhs: f64, rhs: f64, what: &str) {
        let s = if lhs == rhs { 0.0 } else { rhs - lhs };
        self.slack(s, || format!("{what}: {lhs} > {rhs}"));
    }

    /// Records `a == b`.
    pub fn eq(&mut self, a: f64, b: f64, what: &str) {
        let s = if a == b { 0.0 } else { -(a - b).abs() };
        self.slack(s, || format!("{what}: {a} != {b}"));
    }

    /// Equality up to a relative error scaled by the tally tolerance.
    pub fn eq_rel(&mut self, a: f64, b: f64, what: &str) {
        let scale = a.abs().max(b.abs()).max(1.0);
        let s = if a == b { 0.0 } else { -(a - b).abs() / scale };
        self.slack(s, || format!("{what}: {a} != {b} (relative)"));
    }

    pub fn error(&mut self, e: impl std::fmt::Display) {
        self.cases += 1;
        self.errored = true;
        if self.failures.len() < MAX_FAILURES {
            self.failures.push(e.to_string());
        }
    }

    /// Runs one case, recording any error it returns.
    pub fn case(&mut self, f: impl FnOnce(&mut Tally) -> Result<()>) {
        if let Err(e) = f(self) {
            self.error(e);
        }
    }

    pub fn finish(self) -> PropertyGroup {
        let passed = !self.errored && self.cases > 0 && self.worst >= -self.tol;
        PropertyGroup {
            name: self.name,
            cases: self.cases,
            worst_slack: self.worst,
            tolerance: self.tol,
            passed,
            failures: self.failures,
        }
    }
}

fn rng_for(seed: u64, group: &str) -> ChaCha8Rng {
    let h = group
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn space(regs: &[(&str, usize)]) -> RegisterSpace {
    RegisterSpace::new(regs).expect("static register layout")
}

fn bits(b: Bits) -> f64 {
    b.value()
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteSummary {
    let groups = match suite {
        Suite::All => Suite::EACH.iter().flat_map(|&s| groups_of(s, seed)).collect(),
        s => groups_of(s, seed),
    };
    SuiteSummary {
        suite,
        seed,
        passed: groups.iter().all(|g| g.passed),
        groups,
    }
}

fn groups_of(suite: Suite, seed: u64) -> Vec<PropertyGroup> {
    match suite {
        Suite::Triangle => triangle(seed, 300),
        Suite::Divergences => vec![
            renyi_monotone(seed, 300),
            sandwiched_below_petz(seed, 300),
            data_processing(seed, 300),
            geometric_pure_identity(seed, 100),
            blow_up_family(),
            renyi_limits(seed, 100),
            partial_trace_preserves_trace(seed, 500),
            purified_dominates_trace(seed, 500),
            herm_power_additive(seed, 200),
            classical_diamond_match(seed, 10),
        ],
        Suite::Entropies => vec![
            h_up_monotone(seed, 60),
            h_min_matches_h_up_inf(seed, 30),
            smooth_hmin_monotone(seed, 200),
            smooth_renyi_relation(seed, 200),
        ],
        Suite::ChainRules => vec![chain_rule(seed, 100)],
        Suite::DimensionBounds => dimension_bounds(seed, 200),
        Suite::Pinching => vec![pinching(seed, 200)],
        Suite::Sharp => sharp(seed, 300),
        Suite::Counterexamples => counterexamples(),
        Suite::EatSmoke => vec![
            quantum_smoke(seed),
            classical_eat_oracle(seed, 20),
            bound_decomposition(seed, 200),
            bounds_monotone_in_hk(seed, 100),
            classical_above_approx_eat(),
            r_distribution_markov(seed, 20),
            diqkd_identity(),
            chsh_monotone(),
        ],
        Suite::All => unreachable!("expanded by run_suite"),
    }
}

// ---------------------------------------------------------------- triangle

fn random_dim<R: Rng>(rng: &mut R) -> usize {
    rng.gen_range(2..=4)
}

/// Triangle inequality for the sandwiched divergence in both branches, on
/// subnormalized `rho`, `eta` and a positive `Q`.
pub fn triangle(seed: u64, cases: usize) -> Vec<PropertyGroup> {
    let mut rng = rng_for(seed, "triangle");
    let mut above = Tally::new("triangle_alpha_gt_1", 1e-8);
    let mut below = Tally::new("triangle_alpha_lt_1", 1e-8);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        let sp = space(&[("X", d)]);
        let tr_rho = rng.gen_range(0.3..=1.0);
        let tr_eta = rng.gen_range(0.3..=1.0);
        let rank = rng.gen_range(1..=d);
        let rho = random::density(&mut rng, sp.clone(), Some(rank));
        let eta = random::density(&mut rng, sp.clone(), None);
        let q = random::psd(&mut rng, sp.clone(), d);
        let (rho, eta) = match (rho, eta) {
            (Ok(r), Ok(e)) => (r.into_matrix().scale(tr_rho), e.into_matrix().scale(tr_eta)),
            (Err(e), _) | (_, Err(e)) => {
                above.error(e);
                continue;
            }
        };
        let q = q.into_matrix();
        let dmax = match max_relative_entropy_mat(&rho, &eta) {
            Ok(v) => bits(v),
            Err(e) => {
                above.error(e);
                continue;
            }
        };
        let ratio = (tr_eta / tr_rho).log2();
        for alpha in [0.7, 1.2, 1.5, 2.0] {
            let pair = sandwiched_renyi_mat(&rho, &q, Order::Finite(alpha))
                .and_then(|l| Ok((bits(l), bits(sandwiched_renyi_mat(&eta, &q, Order::Finite(alpha))?))));
            let (lhs, d_eta) = match pair {
                Ok(v) => v,
                Err(e) => {
                    above.error(e);
                    continue;
                }
            };
            if alpha > 1.0 {
                let rhs = d_eta + alpha / (alpha - 1.0) * dmax + ratio / (alpha - 1.0);
                above.le(lhs, rhs, &format!("alpha={alpha}"));
            } else {
                let rhs = d_eta - alpha / (1.0 - alpha) * dmax - ratio / (1.0 - alpha);
                below.le(rhs, lhs, &format!("alpha={alpha}"));
            }
        }
    }
    vec![above.finish(), below.finish()]
}

// ------------------------------------------------------------- divergences

fn random_pair<R: Rng>(rng: &mut R, d: usize) -> Result<(DensityOperator, DensityOperator)> {
    let sp = space(&[("X", d)]);
    Ok((random::density(rng, sp.clone(), None)?, random::density(rng, sp, None)?))
}

pub fn renyi_monotone(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "renyi_monotone_in_alpha");
    let mut t = Tally::new("renyi_monotone_in_alpha", 1e-8);
    let orders = [
        Order::Finite(0.6),
        Order::Finite(1.5),
        Order::Finite(2.0),
        Order::Finite(5.0),
        Order::Infinity,
    ];
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        t.case(|t| {
            let (p, q) = random_pair(&mut rng, d)?;
            let mut vals = Vec::new();
            for (i, &a) in orders.iter().enumerate() {
                vals.push(bits(sandwiched_renyi_mat(p.matrix(), q.matrix(), a)?));
                if i == 0 {
                    vals.push(bits(relative_entropy_mat(p.matrix(), q.matrix())?));
                }
            }
            for w in vals.windows(2) {
                t.le(w[0], w[1], "consecutive orders");
            }
            Ok(())
        });
    }
    t.finish()
}

pub fn sandwiched_below_petz(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "sandwiched_below_petz");
    let mut t = Tally::new("sandwiched_below_petz", 1e-9);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        let alpha = rng.gen_range(1.05..1.95);
        t.case(|t| {
            let (p, q) = random_pair(&mut rng, d)?;
            let s = bits(sandwiched_renyi_mat(p.matrix(), q.matrix(), Order::Finite(alpha))?);
            let z = bits(petz_renyi_mat(p.matrix(), q.matrix(), alpha)?);
            t.le(s, z, &format!("alpha={alpha}"));
            Ok(())
        });
    }
    t.finish()
}

pub fn data_processing(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "data_processing");
    let mut t = Tally::new("data_processing", 1e-8);
    for _ in 0..cases {
        let sp = space(&[("A", 2), ("B", 2), ("C", rng.gen_range(2..=3))]);
        t.case(|t| {
            let rho = random::density(&mut rng, sp.clone(), None)?;
            let sig = random::density(&mut rng, sp.clone(), None)?;
            let r2 = rho.partial_trace(&["A", "B"])?;
            let s2 = sig.partial_trace(&["A", "B"])?;
            let (r, s, r2, s2) = (rho.matrix(), sig.matrix(), r2.matrix(), s2.matrix());
            t.le(bits(relative_entropy_mat(r2, s2)?), bits(relative_entropy_mat(r, s)?), "D");
            t.le(
                bits(max_relative_entropy_mat(r2, s2)?),
                bits(max_relative_entropy_mat(r, s)?),
                "D_max",
            );
            for a in [0.5, 0.75, 1.5, 2.0] {
                let o = Order::Finite(a);
                t.le(
                    bits(sandwiched_renyi_mat(r2, s2, o)?),
                    bits(sandwiched_renyi_mat(r, s, o)?),
                    &format!("sandwiched alpha={a}"),
                );
            }
            Ok(())
        });
    }
    t.finish()
}

/// `<v| sigma^{-1} |v>` by a dense inverse, independent of the library path.
fn inverse_form(sigma: &Mat, v: &DVector<C64>) -> Option<f64> {
    let inv = sigma.clone().try_inverse()?;
    Some((v.adjoint() * inv * v)[(0, 0)].re)
}

pub fn geometric_pure_identity(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "geometric_pure_identity");
    let mut t = Tally::new("geometric_pure_identity", 1e-8);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        t.case(|t| {
            let sp = space(&[("X", d)]);
            let v = random::pure_vector(&mut rng, d);
            let rho = DensityOperator::pure(sp.clone(), &v)?;
            let sigma = random::density(&mut rng, sp, None)?;
            let w = inverse_form(sigma.matrix(), &v)
                .ok_or_else(|| Error::Precondition("singular sigma".into()))?
                .log2();
            t.eq(bits(max_relative_entropy_mat(rho.matrix(), sigma.matrix())?), w, "D_max");
            for a in [1.5, 2.0, 3.0] {
                let g = bits(geometric_renyi_mat(rho.matrix(), sigma.matrix(), a)?);
                t.eq(g, w, &format!("geometric alpha={a}"));
            }
            Ok(())
        });
    }
    t.finish()
}

/// The pair `rho = |0><0|`, `sigma = (1 - delta)|v><v| + delta rho` with
/// `v = (sqrt(1-eps), sqrt(eps))`, whose geometric divergence is `log(1/delta)`
/// for every `eps`. Returns `(value, trace distance)`.
pub fn blow_up_pair(eps: f64, delta: f64, alpha: f64) -> Result<(f64, f64)> {
    let sp = space(&[("X", 2)]);
    let rho = DensityOperator::diagonal(sp.clone(), &[1.0, 0.0])?;
    let v = DVector::from_vec(vec![C64::new((1.0 - eps).sqrt(), 0.0), C64::new(eps.sqrt(), 0.0)]);
    let sp_mat = &v * v.adjoint();
    let sigma = DensityOperator::new(sp, sp_mat.scale(1.0 - delta) + rho.matrix().scale(delta))?;
    let g = bits(geometric_renyi_mat(rho.matrix(), sigma.matrix(), alpha)?);
    Ok((g, trace_distance(&rho, &sigma)?))
}

pub fn blow_up_family() -> PropertyGroup {
    let mut t = Tally::new("blow_up_family", 1e-9);
    let target = 10f64.log2();
    for eps in [1e-2, 1e-4, 1e-6] {
        for alpha in [1.5, 2.0, 3.0] {
            t.case(|t| {
                let (g, td) = blow_up_pair(eps, 0.1, alpha)?;
                t.eq(g, target, &format!("eps={eps} alpha={alpha}"));
                t.le(td, eps.sqrt(), "trace distance");
                Ok(())
            });
        }
    }
    t.finish()
}

pub fn renyi_limits(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "renyi_limits");
    let mut t = Tally::new("renyi_limits", 0.0);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        t.case(|t| {
            let (p, q) = random_pair(&mut rng, d)?;
            let (pm, qm) = (p.matrix(), q.matrix());
            let dv = bits(relative_entropy_mat(pm, qm)?);
            for a in [1.0 - 1e-4, 1.0 + 1e-4] {
                let s = bits(sandwiched_renyi_mat(pm, qm, Order::Finite(a))?);
                let z = bits(petz_renyi_mat(pm, qm, a)?);
                t.le((s - dv).abs(), 1e-3, "sandwiched near 1");
                t.le((z - dv).abs(), 1e-3, "Petz near 1");
            }
            let big = bits(sandwiched_renyi_mat(pm, qm, Order::Finite(1e6))?);
            let dm = bits(max_relative_entropy_mat(pm, qm)?);
            t.le((big - dm).abs(), 1e-4, "sandwiched at 1e6");
            Ok(())
        });
    }
    t.finish()
}

fn random_space<R: Rng>(rng: &mut R) -> RegisterSpace {
    let labels = ["A", "B", "C"];
    let k = rng.gen_range(2..=3);
    let regs: Vec<(&str, usize)> = labels[..k].iter().map(|&l| (l, rng.gen_range(2..=4))).collect();
    space(&regs)
}

pub fn partial_trace_preserves_trace(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "partial_trace_trace");
    let mut t = Tally::new("partial_trace_trace", 1e-10);
    for _ in 0..cases {
        let sp = random_space(&mut rng);
        t.case(|t| {
            let rho = random::density(&mut rng, sp.clone(), None)?;
            let labels = sp.labels();
            let keep: Vec<&str> = labels.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let r = rho.partial_trace(&keep)?;
            t.eq(r.trace(), rho.trace(), "trace");
            Ok(())
        });
    }
    t.finish()
}

pub fn purified_dominates_trace(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "purified_dominates_trace");
    let mut t = Tally::new("purified_dominates_trace", 1e-12);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        t.case(|t| {
            let sp = space(&[("X", d)]);
            let (ra, rb) = (rng.gen_range(1..=d), rng.gen_range(1..=d));
            let (ta, tb) = (rng.gen_range(0.2..=1.0), rng.gen_range(0.2..=1.0));
            let a = random::density(&mut rng, sp.clone(), Some(ra))?.scaled(ta)?;
            let b = random::density(&mut rng, sp, Some(rb))?.scaled(tb)?;
            t.le(trace_distance(&a, &b)?, purified_distance(&a, &b)?, "P >= TD");
            Ok(())
        });
    }
    t.finish()
}

pub fn herm_power_additive(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "herm_power_additive");
    let mut t = Tally::new("herm_power_additive", 1e-8);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        let sp = space(&[("X", d)]);
        let rank = rng.gen_range(1..=d);
        let x = random::psd(&mut rng, sp, rank);
        let a = rng.gen_range(-1.0..2.0);
        let b = rng.gen_range(-1.0..2.0);
        let p = support_projector(x.matrix());
        let lhs = &p * herm_power(&x, a).matrix() * herm_power(&x, b).matrix() * &p;
        let rhs = &p * herm_power(&x, a + b).matrix() * &p;
        t.le((lhs - rhs).norm(), 1e-8, &format!("a={a} b={b}"));
    }
    t.finish()
}

fn random_classical_channel<R: Rng>(rng: &mut R, din: usize, dout: usize) -> Result<ClassicalChannel> {
    let table: Vec<f64> = (0..din).flat_map(|_| random::distribution(rng, dout)).collect();
    ClassicalChannel::new(space(&[("X", din)]), space(&[("Y", dout)]), table)
}

pub fn classical_diamond_match(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "classical_diamond_match");
    let mut t = Tally::new("classical_diamond_match", 1e-6);
    for i in 0..cases {
        let (din, dout) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
        t.case(|t| {
            let n = random_classical_channel(&mut rng, din, dout)?;
            let m = random_classical_channel(&mut rng, din, dout)?;
            let exact = classical_diamond_distance(&n, &m)?;
            let lower = quantum_diamond_lower_bound(&n.to_kraus()?, &m.to_kraus()?, 50, seed ^ i as u64)?;
            t.eq(lower, exact, "see-saw vs exact");
            Ok(())
        });
    }
    t.finish()
}

// --------------------------------------------------------------- entropies

/// `H_up_alpha` in the sandwiched family, with `alpha = inf` by the
/// min-entropy solver.
pub fn h_up(rho: &DensityOperator, a: &[&str], b: &[&str], alpha: f64) -> Result<f64> {
    if alpha.is_infinite() {
        Ok(h_min(rho, a, b)?.value)
    } else {
        Ok(h_up_alpha(rho, a, b, alpha, EntropyFamily::Sandwiched)?.value)
    }
}

pub fn h_up_monotone(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "h_up_monotone_in_alpha");
    let mut t = Tally::new("h_up_monotone_in_alpha", 1e-7);
    for _ in 0..cases {
        let sp = space(&[("A", 2), ("B", rng.gen_range(2..=3))]);
        t.case(|t| {
            let rank = rng.gen_range(1..=4);
            let rho = random::density(&mut rng, sp, Some(rank))?;
            let vals: Vec<f64> = [1.2, 1.5, 2.0, f64::INFINITY]
                .iter()
                .map(|&a| h_up(&rho, &["A"], &["B"], a))
                .collect::<Result<_>>()?;
            for v in &vals {
                t.le(v.abs(), 1.0 + 1e-9, "range [-log|A|, log|A|]");
            }
            for w in vals.windows(2) {
                t.le(w[1], w[0], "consecutive orders");
            }
            Ok(())
        });
    }
    t.finish()
}

pub fn h_min_matches_h_up_inf(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "h_min_matches_h_up_inf");
    let mut t = Tally::new("h_min_matches_h_up_inf", 1e-5);
    for _ in 0..cases {
        let sp = space(&[("A", 2), ("B", 2)]);
        t.case(|t| {
            let rho = random::density(&mut rng, sp, None)?;
            let a = h_min(&rho, &["A"], &["B"])?.value;
            let b = h_up_alpha(&rho, &["A"], &["B"], Order::Infinity, EntropyFamily::Sandwiched)?.value;
            t.le(a, b + 1e-6, "h_min <= h_up(inf) + 1e-6");
            t.eq(a, b, "two solvers");
            Ok(())
        });
    }
    t.finish()
}

fn random_joint<R: Rng>(rng: &mut R) -> Result<ClassicalJoint> {
    let sp = space(&[("A", rng.gen_range(2..=4)), ("B", rng.gen_range(2..=4))]);
    random::joint(rng, sp)
}

pub fn smooth_hmin_monotone(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "smooth_hmin_monotone_in_eps");
    let mut t = Tally::new("smooth_hmin_monotone_in_eps", 1e-12);
    for _ in 0..cases {
        t.case(|t| {
            let p = random_joint(&mut rng)?;
            let vals: Vec<f64> = [0.0, 0.01, 0.05, 0.1, 0.2, 0.4]
                .iter()
                .map(|&e| Ok(smooth_hmin_classical(&p, &["A"], &["B"], e)?.0))
                .collect::<Result<_>>()?;
            t.eq(vals[0], hmin_classical(&p, &["A"], &["B"])?, "eps = 0");
            for w in vals.windows(2) {
                t.le(w[0], w[1], "consecutive eps");
            }
            Ok(())
        });
    }
    t.finish()
}

/// Classical check of the smooth Rényi relation: the witness
/// `rho~ = min(rho, 2^lambda eta)` removes at most `1 - sqrt(1 - eps^2)`
/// mass, so it lies in the purified ball, and its Rényi entropy must clear
/// the bound built from `eta` and `lambda`.
pub fn smooth_renyi_relation(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "smooth_renyi_relation");
    let mut t = Tally::new("smooth_renyi_relation", 1e-9);
    for _ in 0..cases {
        t.case(|t| {
            let rho = random_joint(&mut rng)?;
            let sp = rho.space().clone();
            let tau = random::distribution(&mut rng, sp.dim());
            let s = rng.gen_range(0.01..0.3);
            let eta: Vec<f64> = rho.probs().iter().zip(&tau).map(|(r, u)| (1.0 - s) * r + s * u).collect();
            let eta_op = DensityOperator::diagonal(sp.clone(), &eta)?;
            for eps in [0.05f64, 0.1, 0.2] {
                let m = 1.0 - (1.0 - eps * eps).sqrt();
                let lambda = smooth_dmax_slices(rho.probs(), &eta, m)?;
                let tilde: Vec<f64> = rho
                    .probs()
                    .iter()
                    .zip(&eta)
                    .map(|(r, e)| r.min(lambda.exp2() * e))
                    .collect();
                let removed = 1.0 - tilde.iter().sum::<f64>();
                t.le(removed, m + 1e-12, "removed mass");
                let tilde_op = DensityOperator::diagonal(sp.clone(), &tilde)?;
                t.le(purified_distance(&tilde_op, &DensityOperator::diagonal(sp.clone(), rho.probs())?)?, eps + 1e-12, "purified distance");
                for alpha in [1.5, 2.0] {
                    let lhs = petz_up_closed_form(&tilde_op, &["A"], &["B"], alpha)?;
                    let h_eta = petz_up_closed_form(&eta_op, &["A"], &["B"], alpha)?;
                    let rhs = h_eta
                        - alpha / (alpha - 1.0) * lambda
                        - (1.0 / (1.0 - eps * eps)).log2() / (alpha - 1.0);
                    t.le(rhs, lhs, &format!("eps={eps} alpha={alpha}"));
                }
            }
            Ok(())
        });
    }
    t.finish()
}

// ------------------------------------------------------------- chain rules

pub fn chain_rule(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "chain_rule_identity");
    let mut t = Tally::new("chain_rule_identity", 1e-7);
    for _ in 0..cases {
        let sp = space(&[("A1", 2), ("A2", 2), ("B", 2)]);
        t.case(|t| {
            let rho = random::density(&mut rng, sp, None)?;
            let sigma = random::density(&mut rng, space(&[("B", 2)]), None)?;
            for alpha in [1.3, 2.0] {
                let c = chain_rule_nu_state(&rho, &["A1"], &["A2"], &["B"], &sigma, alpha)?;
                t.eq(c.lhs, c.rhs, &format!("alpha={alpha}"));
            }
            Ok(())
        });
    }
    t.finish()
}

// -------------------------------------------------------- dimension bounds

pub fn dimension_bounds(seed: u64, cases: usize) -> Vec<PropertyGroup> {
    let mut rng = rng_for(seed, "dimension_bounds");
    let tol = 1e-7;
    let mut lower = Tally::new("dimension_bound_lower", tol);
    let mut upper = Tally::new("dimension_bound_upper", tol);
    let mut cond_q = Tally::new("conditioning_register_quantum", tol);
    let mut cond_c = Tally::new("conditioning_register_classical", tol);
    let alphas = [1.3, 2.0, f64::INFINITY];
    for _ in 0..cases {
        let d2 = rng.gen_range(2..=3);
        let sp = space(&[("A1", 2), ("A2", d2), ("B", 2)]);
        let la2 = (d2 as f64).log2();
        let rho = random::density(&mut rng, sp, None);
        let cq = random::cq_state(&mut rng, ("C", d2), space(&[("A", 2), ("B", 2)]));
        let (rho, cq) = match (rho, cq) {
            (Ok(r), Ok(c)) => (r, c),
            (Err(e), _) | (_, Err(e)) => {
                lower.error(e);
                continue;
            }
        };
        for &a in &alphas {
            let r = (|| -> Result<(f64, f64, f64)> {
                Ok((
                    h_up(&rho, &["A1"], &["B"], a)?,
                    h_up(&rho, &["A1", "A2"], &["B"], a)?,
                    h_up(&rho, &["A1"], &["B", "A2"], a)?,
                ))
            })();
            match r {
                Ok((h1, h12, h1c)) => {
                    lower.le(h1 - la2, h12, &format!("alpha={a}"));
                    upper.le(h12, h1 + la2, &format!("alpha={a}"));
                    cond_q.le(h1 - 2.0 * la2, h1c, &format!("alpha={a}"));
                }
                Err(e) => lower.error(e),
            }
            let r = (|| -> Result<(f64, f64)> {
                Ok((h_up(&cq, &["A"], &["B"], a)?, h_up(&cq, &["A"], &["B", "C"], a)?))
            })();
            match r {
                Ok((hb, hbc)) => cond_c.le(hb - la2, hbc, &format!("alpha={a}")),
                Err(e) => cond_c.error(e),
            }
        }
    }
    vec![lower.finish(), upper.finish(), cond_q.finish(), cond_c.finish()]
}

// ---------------------------------------------------------------- pinching

pub fn pinching(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "pinching_witness_psd");
    let mut t = Tally::new("pinching_witness_psd", 1e-9);
    for _ in 0..cases {
        let d = rng.gen_range(2..=6);
        let sp = space(&[("X", d)]);
        let (rx, rp) = (rng.gen_range(1..=d), rng.gen_range(0..=d));
        let x = random::psd(&mut rng, sp.clone(), rx);
        let pi = random::projector(&mut rng, sp, rp);
        let t_par = 10f64.powf(rng.gen_range(-3.0..=3.0));
        match asymmetric_pinching_witness(&x, &pi, t_par) {
            Ok(w) => t.le(0.0, w.min_eigenvalue(), &format!("t={t_par}")),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

// ------------------------------------------------------------------- sharp

pub fn sharp(seed: u64, cases: usize) -> Vec<PropertyGroup> {
    let mut rng = rng_for(seed, "sharp");
    let mut lower = Tally::new("sharp_lower", 1e-9);
    let mut upper = Tally::new("sharp_upper", 1e-9);
    let mut dom = Tally::new("sharp_dominance", 1e-9);
    for _ in 0..cases {
        let d = random_dim(&mut rng);
        let sp = space(&[("X", d)]);
        let mix = rng.gen_range(0.0..0.05);
        let pair = random::density(&mut rng, sp, None)
            .and_then(|q| Ok((random::nearby(&mut rng, &q, mix)?, q)));
        let (p, q) = match pair {
            Ok(v) => v,
            Err(e) => {
                lower.error(e);
                continue;
            }
        };
        for alpha in [1.5, 2.0, 3.0] {
            let r = sharp_upper_bound(&p, &q, alpha).and_then(|s| {
                Ok((s, bits(sandwiched_renyi_mat(p.matrix(), q.matrix(), Order::Finite(alpha))?)))
            });
            match r {
                Ok((s, dt)) => {
                    let v = bits(s.result.value);
                    if !(v.is_finite() && s.closed_form.is_finite() && dt.is_finite()) {
                        upper.error(format!("non-finite sharp sandwich at alpha={alpha}"));
                        continue;
                    }
                    lower.le(dt, v, &format!("alpha={alpha}"));
                    upper.le(v, s.closed_form, &format!("alpha={alpha}"));
                    dom.le(0.0, s.dominance_slack, &format!("alpha={alpha}"));
                }
                Err(e) => upper.error(e),
            }
        }
    }
    vec![lower.finish(), upper.finish(), dom.finish()]
}

// ---------------------------------------------------------- counterexamples

pub fn counterexamples() -> Vec<PropertyGroup> {
    let mut side = Tally::new("side_info_values", 1e-12);
    side.case(|t| {
        let r = counterexample_side_info(8, 0.5, 0.25)?;
        t.eq(r.primed_hmin, 8.0, "primed H_min = n");
        t.eq(r.l, 8.0, "l = (2/eps) log(1/eps')");
        t.eq(r.upper_bound, r.l + (8.0f64 / 3.0).log2(), "l + log(8/3)");
        t.le(r.real_smoothed_hmin, r.upper_bound, "real smoothed H_min");
        Ok(())
    });
    let mut gap = Tally::new("side_info_gap_widens", 0.0);
    gap.case(|t| {
        let ratios: Vec<f64> = [4, 6, 8, 10]
            .iter()
            .map(|&n| Ok(counterexample_side_info(n, 0.5, 0.25)?.real_smoothed_hmin / n as f64))
            .collect::<Result<_>>()?;
        for w in ratios.windows(2) {
            t.le(w[1], w[0], "realized rate per round");
        }
        Ok(())
    });
    let mut tri = Tally::new("triangle_counterexample_values", 1e-9);
    for n in [8, 12] {
        tri.case(|t| {
            let (eps, eps_p) = (0.1, 0.2);
            let r = counterexample_triangle(n, eps, eps_p)?;
            t.eq(r.hmin_smoothed, n as f64, "H_min^eps = n");
            t.eq(r.hmin_conditioned, (1.0 / (1.0 - eps_p)).log2(), "H_min^eps'(p|E)");
            t.eq(r.dmax_conditioned, (1.0 / eps).log2(), "D_max(p|E || p)");
            Ok(())
        });
    }
    let mut chain = Tally::new("copy_chain_trend", 1e-12);
    let eps = 0.1;
    let mut last = 0.0;
    for n in [4, 16, 64, 256] {
        let s = copy_chain_stats(n, eps);
        chain.eq(s.mean_i_chain, n as f64 * (1.0 + eps) / 2.0, "mean I, chain");
        chain.eq(s.mean_i_product, n as f64 / 2.0, "mean I, product");
        chain.le(last, s.l1_to_product, "L1 distance grows");
        last = s.l1_to_product;
    }
    chain.le(2.0 - 1e-6, last, "L1 distance tends to 2");
    vec![side.finish(), gap.finish(), tri.finish(), chain.finish()]
}

// --------------------------------------------------------------- eat smoke

pub fn quantum_smoke(seed: u64) -> PropertyGroup {
    let mut t = Tally::new("quantum_eat_smoke", 1e-9);
    t.case(|t| {
        let p = SmokeParams {
            seed,
            ..SmokeParams::default()
        };
        let r = quantum_eat_smoke(p)?;
        t.le(r.divergence, r.realized_sharp_sum, "divergence <= realized sharp sum");
        t.le(r.realized_sharp_sum, r.analytic_bound, "realized sum <= n z_beta");
        t.le(0.0, r.min_claim_slack, "per-round claims");
        for &d in &r.diamond_lower {
            t.le(d, r.diamond_upper, "diamond lower <= analytic upper");
        }
        Ok(())
    });
    t.finish()
}

/// One random instance of the classical accumulation process: the exact
/// smooth min-entropy oracle and the bound at `alpha = 1 + sqrt(eps)`.
pub fn classical_eat_instance<R: Rng>(rng: &mut R, eps: f64, eps_prime: f64) -> Result<(f64, BoundReport)> {
    let n = 4;
    let proc_ = random_eat_process(rng, n, 2, 2, 2, eps)?;
    let hk = round_entropies(&proc_)?;
    let p = run_sequential_classical(&proc_.initial, &proc_.p, &[])?;
    let a = proc_.a_labels();
    let b = proc_.b_labels();
    let ar: Vec<&str> = a.iter().map(String::as_str).collect();
    let br: Vec<&str> = b.iter().map(String::as_str).collect();
    let (oracle, _) = smooth_hmin_classical(&p, &ar, &br, eps_prime)?;
    let spec = ScenarioSpec::identical(n as u64, 2, 2, eps, 0.0);
    let bound = classical_eat_bound(&spec, &hk, 1.0 + eps.sqrt(), eps_prime)?;
    Ok((oracle, bound))
}

pub fn classical_eat_oracle(seed: u64, per_eps: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "classical_eat_oracle");
    let mut t = Tally::new("classical_eat_oracle", 0.0);
    for eps in [0.01, 0.05] {
        for _ in 0..per_eps {
            t.case(|t| {
                let (oracle, bound) = classical_eat_instance(&mut rng, eps, 0.1)?;
                t.le(bound.value, oracle, &format!("eps={eps}"));
                Ok(())
            });
        }
    }
    t.finish()
}

fn random_spec<R: Rng>(rng: &mut R) -> ScenarioSpec {
    let dim_a = rng.gen_range(2..=4);
    ScenarioSpec::identical(
        10u64.pow(rng.gen_range(2..=9)),
        dim_a,
        rng.gen_range(1..=4),
        10f64.powf(rng.gen_range(-12.0..-2.0)),
        rng.gen_range(0.0..=(dim_a as f64).log2()),
    )
}

fn decomposition_gap(r: &BoundReport) -> f64 {
    let s: f64 = r.decomposition.iter().map(|t| t.value).sum();
    (s - r.value).abs()
}

pub fn bound_decomposition(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "bound_decomposition");
    let mut t = Tally::new("bound_decomposition", 1e-10);
    for _ in 0..cases {
        let spec = random_spec(&mut rng);
        let h = spec.per_round_entropies.clone();
        t.case(|t| {
            let reports = [
                approx_indep_bound(&spec)?,
                weak_aep_bound(&spec)?,
                approx_eat_optimize(&spec, &h, 0.01)?,
                classical_eat_optimize(&spec, &h, 0.01)?,
            ];
            for r in &reports {
                t.le(decomposition_gap(r), 0.0, "sum of terms");
            }
            Ok(())
        });
    }
    t.finish()
}

pub fn bounds_monotone_in_hk(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "bounds_monotone_in_hk");
    let mut t = Tally::new("bounds_monotone_in_hk", 1e-9);
    for _ in 0..cases {
        let n = rng.gen_range(2..=6u64);
        let la = 1.0;
        let hk: Vec<f64> = (0..n).map(|_| rng.gen_range(-la..la * 0.9)).collect();
        let k = rng.gen_range(0..n as usize);
        let mut up = hk.clone();
        up[k] += rng.gen_range(0.0..(la - hk[k]));
        let eps = 10f64.powf(rng.gen_range(-10.0..-3.0));
        let mut spec = ScenarioSpec::identical(n, 2, 2, eps, 0.0);
        t.case(|t| {
            let alpha = 1.0 + 0.5 * (1.0 / 5f64.log2()) * rng.gen_range(0.01..0.99);
            t.le(
                classical_eat_bound(&spec, &hk, alpha, 0.1)?.value,
                classical_eat_bound(&spec, &up, alpha, 0.1)?.value,
                "classical EAT",
            );
            let p = eat_preset(&spec, 0.1);
            let p = crate::bounds::BoundParams {
                alpha: 1.0 + 0.01,
                ..p
            };
            if let (Ok(lo), Ok(hi)) = (approx_eat_bound(&spec, &hk, &p), approx_eat_bound(&spec, &up, &p)) {
                t.le(lo.value, hi.value, "approximate EAT");
            }
            spec.per_round_entropies = hk.clone();
            let lo = approx_indep_bound(&spec)?.value;
            spec.per_round_entropies = up.clone();
            t.le(lo, approx_indep_bound(&spec)?.value, "approximately independent");
            Ok(())
        });
    }
    t.finish()
}

pub fn classical_above_approx_eat() -> PropertyGroup {
    let mut t = Tally::new("classical_above_approx_eat", 1e-9);
    for n in [1_000u64, 1_000_000, 1_000_000_000] {
        for eps in [1e-12, 1e-9, 1e-6, 1e-3] {
            for (da, db) in [(2, 1), (2, 2), (4, 2)] {
                let spec = ScenarioSpec::identical(n, da, db, eps, 0.8);
                let h = spec.per_round_entropies.clone();
                t.case(|t| {
                    let c = classical_eat_optimize(&spec, &h, 0.01)?.value;
                    let a = approx_eat_optimize(&spec, &h, 0.01)?.value;
                    t.le(a, c, &format!("n={n} eps={eps} |A|={da} |B|={db}"));
                    Ok(())
                });
            }
        }
    }
    t.finish()
}

pub fn r_distribution_markov(seed: u64, cases: usize) -> PropertyGroup {
    let mut rng = rng_for(seed, "r_distribution_markov");
    let mut t = Tally::new("r_distribution_markov", 1e-10);
    for _ in 0..cases {
        let eps = rng.gen_range(0.0..0.1);
        t.case(|t| {
            let proc_ = random_eat_process(&mut rng, 3, 2, 2, 2, eps)?;
            let r = build_r_distribution(&proc_, eps)?;
            t.le(r.markov_gap, 0.0, "Markov gap");
            t.eq(r.p.total(), 1.0, "p sums to 1");
            t.eq(r.r.total(), 1.0, "r sums to 1");
            t.le(r.dmax, r.exponent, "p <= 2^exponent r");
            Ok(())
        });
    }
    t.finish()
}

pub fn diqkd_identity() -> PropertyGroup {
    let mut t = Tally::new("diqkd_identity", 1e-12);
    for eps in [0.02, 0.05, 0.1] {
        for n in [1_000_000u64, 100_000_000, 10_000_000_000] {
            t.case(|t| {
                let omega = diqkd::omega_required(eps, 0.0)?;
                let spec = DiqkdSpec {
                    n,
                    omega_exp: omega,
                    delta_w: 0.0,
                    eps_target: eps,
                    gamma: None,
                };
                let a = diqkd::diqkd_keyrate_bound(&spec)?;
                let b = approx_indep_bound(&ScenarioSpec::identical(n, 2, 1, eps.powi(4), 1.0))?;
                t.eq(a.value, b.value, "same report as approx_indep");
                let s = diqkd::diqkd_summary(eps, n, 0.0)?;
                let nf = n as f64;
                let mi = s.mutual_information_input;
                t.eq_rel(mi, nf * eps.powi(4), "n eps^4");
                // The chain form `n - n(1 - eps^4)` agrees up to its own rounding.
                let chain = nf - nf * (1.0 - eps.powi(4));
                t.le((chain - mi).abs(), 4.0 * nf * f64::EPSILON, "n - n(1 - eps^4)");
                Ok(())
            });
        }
    }
    t.finish()
}

pub fn chsh_monotone() -> PropertyGroup {
    let mut t = Tally::new("chsh_monotone", 1e-10);
    t.case(|t| {
        let k = 2000;
        let mut last = diqkd::chsh_rate_function(0.75)?;
        t.eq(last, 0.0, "f(3/4)");
        for i in 1..=k {
            let w = 0.75 + (diqkd::TSIRELSON - 0.75) * i as f64 / k as f64;
            let f = diqkd::chsh_rate_function(w.min(diqkd::TSIRELSON))?;
            t.le(last, f, "grid step");
            last = f;
        }
        t.eq(last, 1.0, "f at Tsirelson");
        Ok(())
    });
    t.finish()
}
