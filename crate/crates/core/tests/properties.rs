//! Property tests over randomly drawn states, channels and scenarios. Each
//! case draws a `u64` seed and builds its instance from a ChaCha stream, so a
//! shrunk failure is reproducible from the printed seed.

use nalgebra::DVector;
use oneshot::bounds::{
    approx_eat_terms, approx_indep_bound, classical_eat_bound, eat_preset, weak_aep_bound,
    BoundReport, ScenarioSpec,
};
use oneshot::channel::{ClassicalChannel, KrausChannel};
use oneshot::diqkd::{self, DiqkdSpec};
use oneshot::divergences::{
    max_relative_entropy_mat, petz_renyi_mat, relative_entropy_mat, sandwiched_renyi_mat,
    sharp_upper_bound, Order,
};
use oneshot::entropies::{chain_rule_nu_state, h_min, h_up_alpha, EntropyFamily};
use oneshot::linalg::{
    asymmetric_pinching_witness, herm_power, partial_trace, purified_distance, support_projector,
    tensor_product, trace_distance, DensityOperator, Mat, RegisterSpace, C64,
};
use oneshot::random;
use oneshot::simulate::{build_r_distribution, freq, random_eat_process, run_sequential_classical};
use oneshot::smoothing::{hmin_classical, smooth_hmin_classical};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn space(regs: &[(&str, usize)]) -> RegisterSpace {
    RegisterSpace::new(regs).unwrap()
}

fn state(r: &mut ChaCha8Rng, d: usize) -> DensityOperator {
    random::density(r, space(&[("X", d)]), None).unwrap()
}

/// Classical Rényi divergence of two full-support distributions, in bits.
fn classical_renyi(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha)).sum();
    s.log2() / (alpha - 1.0)
}

fn decomposition_gap(r: &BoundReport) -> f64 {
    (r.decomposition.iter().map(|t| t.value).sum::<f64>() - r.value).abs()
}

// ------------------------------------------------------------------ linalg

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_keeps_trace(seed: u64, d1 in 2usize..=4, d2 in 2usize..=4, d3 in 2usize..=4) {
        let mut r = rng(seed);
        let rho = random::density(&mut r, space(&[("A", d1), ("B", d2), ("C", d3)]), None).unwrap();
        for keep in [&["A"][..], &["B"], &["C"], &["A", "C"], &[]] {
            let t = partial_trace(&rho, keep).unwrap().trace();
            prop_assert!((t - rho.trace()).abs() < 1e-10, "keep {keep:?}: {t}");
        }
    }

    #[test]
    fn partial_trace_inverts_tensor_product(seed: u64, da in 2usize..=4, db in 2usize..=4) {
        let mut r = rng(seed);
        let a = random::density(&mut r, space(&[("A", da)]), None).unwrap();
        let b = random::density(&mut r, space(&[("B", db)]), None).unwrap();
        let ab = tensor_product(&a, &b).unwrap();
        prop_assert!((partial_trace(&ab, &["A"]).unwrap().matrix() - a.matrix()).norm() < 1e-12);
        prop_assert!((partial_trace(&ab, &["B"]).unwrap().matrix() - b.matrix()).norm() < 1e-12);
    }

    #[test]
    fn purified_distance_dominates_trace_distance(
        seed: u64, d in 2usize..=4, ta in 0.2f64..=1.0, tb in 0.2f64..=1.0,
    ) {
        let mut r = rng(seed);
        let ra = r.gen_range(1..=d);
        let rb = r.gen_range(1..=d);
        let a = random::density(&mut r, space(&[("X", d)]), Some(ra)).unwrap().scaled(ta).unwrap();
        let b = random::density(&mut r, space(&[("X", d)]), Some(rb)).unwrap().scaled(tb).unwrap();
        let (td, pd) = (trace_distance(&a, &b).unwrap(), purified_distance(&a, &b).unwrap());
        prop_assert!(td <= pd + 1e-12, "{td} > {pd}");
    }

    #[test]
    fn herm_power_adds_exponents_on_support(
        seed: u64, d in 2usize..=5, a in -1.0f64..2.0, b in -1.0f64..2.0,
    ) {
        let mut r = rng(seed);
        let rank = r.gen_range(1..=d);
        let x = random::psd(&mut r, space(&[("X", d)]), rank);
        let p = support_projector(x.matrix());
        let lhs = &p * herm_power(&x, a).matrix() * herm_power(&x, b).matrix() * &p;
        let rhs = &p * herm_power(&x, a + b).matrix() * &p;
        prop_assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn pinching_witness_is_psd(seed: u64, d in 2usize..=6, log_t in -3.0f64..=3.0) {
        let mut r = rng(seed);
        let (rx, rp) = (r.gen_range(1..=d), r.gen_range(0..=d));
        let x = random::psd(&mut r, space(&[("X", d)]), rx);
        let pi = random::projector(&mut r, space(&[("X", d)]), rp);
        let w = asymmetric_pinching_witness(&x, &pi, 10f64.powf(log_t)).unwrap();
        prop_assert!(w.min_eigenvalue() >= -1e-9);
    }

    #[test]
    fn state_json_round_trip(seed: u64, d1 in 1usize..=3, d2 in 1usize..=3) {
        let mut r = rng(seed);
        let rho = random::density(&mut r, space(&[("A", d1), ("B", d2)]), None).unwrap();
        let back = DensityOperator::from_json(&rho.to_json().to_string()).unwrap();
        prop_assert_eq!(back.space().labels(), rho.space().labels());
        prop_assert!((back.matrix() - rho.matrix()).norm() <= 1e-15);
    }
}

// ------------------------------------------------------------- divergences

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sandwiched_nondecreasing_in_alpha(seed: u64, d in 2usize..=4) {
        let mut r = rng(seed);
        let (p, q) = (state(&mut r, d), state(&mut r, d));
        let mut last = f64::NEG_INFINITY;
        for a in [Order::Finite(0.6), Order::Finite(1.5), Order::Finite(2.0), Order::Finite(5.0), Order::Infinity] {
            let v = sandwiched_renyi_mat(p.matrix(), q.matrix(), a).unwrap().value();
            prop_assert!(last <= v + 1e-8, "{last} > {v} at {a:?}");
            last = v;
        }
    }

    #[test]
    fn sandwiched_below_petz(seed: u64, d in 2usize..=4, alpha in 1.05f64..1.95) {
        let mut r = rng(seed);
        let (p, q) = (state(&mut r, d), state(&mut r, d));
        let s = sandwiched_renyi_mat(p.matrix(), q.matrix(), Order::Finite(alpha)).unwrap().value();
        let z = petz_renyi_mat(p.matrix(), q.matrix(), alpha).unwrap().value();
        prop_assert!(s <= z + 1e-9);
    }

    #[test]
    fn commuting_states_match_classical_formulas(seed: u64, d in 2usize..=6, alpha in 0.55f64..4.0) {
        prop_assume!((alpha - 1.0).abs() > 1e-3);
        let mut r = rng(seed);
        let p = random::distribution(&mut r, d);
        let q = random::distribution(&mut r, d);
        let (pm, qm) = (Mat::from_diagonal(&DVector::from_iterator(d, p.iter().map(|&x| C64::new(x, 0.0)))),
                        Mat::from_diagonal(&DVector::from_iterator(d, q.iter().map(|&x| C64::new(x, 0.0)))));
        let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).log2()).sum();
        let dmax = p.iter().zip(&q).map(|(a, b)| (a / b).log2()).fold(f64::NEG_INFINITY, f64::max);
        let ren = classical_renyi(&p, &q, alpha);
        prop_assert!((relative_entropy_mat(&pm, &qm).unwrap().value() - kl).abs() < 1e-10);
        prop_assert!((max_relative_entropy_mat(&pm, &qm).unwrap().value() - dmax).abs() < 1e-9);
        prop_assert!((sandwiched_renyi_mat(&pm, &qm, Order::Finite(alpha)).unwrap().value() - ren).abs() < 1e-9);
        if alpha < 2.0 {
            prop_assert!((petz_renyi_mat(&pm, &qm, alpha).unwrap().value() - ren).abs() < 1e-9);
        }
    }

    #[test]
    fn infinite_exactly_when_support_fails(seed: u64, d in 2usize..=4) {
        let mut r = rng(seed);
        let sp = space(&[("X", d)]);
        let q = random::density(&mut r, sp.clone(), Some(d - 1)).unwrap();
        let full = random::density(&mut r, sp.clone(), None).unwrap();
        let inside = random::density(&mut r, sp, Some(1)).unwrap();
        // Project a random state into the support of q so it is dominated.
        let pi = support_projector(q.matrix());
        let inside = DensityOperator::normalized(q.space().clone(), &pi * inside.matrix() * &pi).unwrap();
        for a in [Order::Finite(1.5), Order::Infinity] {
            prop_assert!(!sandwiched_renyi_mat(full.matrix(), q.matrix(), a).unwrap().is_finite());
            prop_assert!(sandwiched_renyi_mat(inside.matrix(), q.matrix(), a).unwrap().is_finite());
        }
        prop_assert!(!relative_entropy_mat(full.matrix(), q.matrix()).unwrap().is_finite());
        prop_assert!(relative_entropy_mat(inside.matrix(), q.matrix()).unwrap().is_finite());
        // Below one, only orthogonality makes the divergence infinite.
        prop_assert!(sandwiched_renyi_mat(full.matrix(), q.matrix(), Order::Finite(0.7)).unwrap().is_finite());
    }

    #[test]
    fn partial_trace_never_increases_divergences(seed: u64, dc in 2usize..=3) {
        let mut r = rng(seed);
        let sp = space(&[("A", 2), ("B", 2), ("C", dc)]);
        let rho = random::density(&mut r, sp.clone(), None).unwrap();
        let sig = random::density(&mut r, sp, None).unwrap();
        let (r2, s2) = (rho.partial_trace(&["A", "B"]).unwrap(), sig.partial_trace(&["A", "B"]).unwrap());
        let full = [rho.matrix(), sig.matrix()];
        let part = [r2.matrix(), s2.matrix()];
        let d = |m: [&Mat; 2]| relative_entropy_mat(m[0], m[1]).unwrap().value();
        prop_assert!(d(part) <= d(full) + 1e-8);
        let dm = |m: [&Mat; 2]| max_relative_entropy_mat(m[0], m[1]).unwrap().value();
        prop_assert!(dm(part) <= dm(full) + 1e-8);
        for a in [0.5, 0.8, 1.5, 3.0] {
            let ds = |m: [&Mat; 2]| sandwiched_renyi_mat(m[0], m[1], Order::Finite(a)).unwrap().value();
            prop_assert!(ds(part) <= ds(full) + 1e-8, "alpha={a}");
        }
    }

    #[test]
    fn triangle_inequality_both_branches(
        seed: u64, d in 2usize..=4, tr_rho in 0.3f64..=1.0, tr_eta in 0.3f64..=1.0,
    ) {
        let mut r = rng(seed);
        let sp = space(&[("X", d)]);
        let rank = r.gen_range(1..=d);
        let rho = random::density(&mut r, sp.clone(), Some(rank)).unwrap().into_matrix().scale(tr_rho);
        let eta = random::density(&mut r, sp.clone(), None).unwrap().into_matrix().scale(tr_eta);
        let q = random::psd(&mut r, sp, d).into_matrix();
        let dmax = max_relative_entropy_mat(&rho, &eta).unwrap().value();
        let ratio = (tr_eta / tr_rho).log2();
        for alpha in [0.7, 1.2, 1.5, 2.0] {
            let lhs = sandwiched_renyi_mat(&rho, &q, Order::Finite(alpha)).unwrap().value();
            let de = sandwiched_renyi_mat(&eta, &q, Order::Finite(alpha)).unwrap().value();
            if alpha > 1.0 {
                prop_assert!(lhs <= de + alpha / (alpha - 1.0) * dmax + ratio / (alpha - 1.0) + 1e-8);
            } else {
                prop_assert!(de - alpha / (1.0 - alpha) * dmax - ratio / (1.0 - alpha) <= lhs + 1e-8);
            }
        }
    }

    #[test]
    fn sharp_bound_sandwich(seed: u64, d in 2usize..=4, mix in 0.0f64..0.05, alpha in 1.2f64..3.5) {
        let mut r = rng(seed);
        let q = state(&mut r, d);
        let p = random::nearby(&mut r, &q, mix).unwrap();
        let s = sharp_upper_bound(&p, &q, alpha).unwrap();
        let dt = sandwiched_renyi_mat(p.matrix(), q.matrix(), Order::Finite(alpha)).unwrap().value();
        let v = s.result.value.value();
        prop_assert!(v.is_finite() && s.closed_form.is_finite());
        prop_assert!(dt <= v + 1e-9, "{dt} > {v}");
        prop_assert!(v <= s.closed_form + 1e-9, "{v} > {}", s.closed_form);
        prop_assert!(s.dominance_slack >= -1e-9);
    }
}

// --------------------------------------------------------------- entropies

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn h_up_in_range_and_nonincreasing(seed: u64, db in 2usize..=3, rank in 1usize..=4) {
        let mut r = rng(seed);
        let rho = random::density(&mut r, space(&[("A", 2), ("B", db)]), Some(rank)).unwrap();
        let mut vals: Vec<f64> = [1.2, 1.5, 2.0]
            .iter()
            .map(|&a| h_up_alpha(&rho, &["A"], &["B"], a, EntropyFamily::Sandwiched).unwrap().value)
            .collect();
        vals.push(h_min(&rho, &["A"], &["B"]).unwrap().value);
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-7, "{vals:?}");
        }
        for v in &vals {
            prop_assert!(v.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn h_min_agrees_with_h_up_at_infinity(seed: u64) {
        let mut r = rng(seed);
        let rho = random::density(&mut r, space(&[("A", 2), ("B", 2)]), None).unwrap();
        let a = h_min(&rho, &["A"], &["B"]).unwrap().value;
        let b = h_up_alpha(&rho, &["A"], &["B"], Order::Infinity, EntropyFamily::Sandwiched).unwrap().value;
        prop_assert!(a <= b + 1e-6);
        prop_assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
    }

    #[test]
    fn dimension_bounds_hold(seed: u64) {
        let mut r = rng(seed);
        let rho = random::density(&mut r, space(&[("A1", 2), ("A2", 2), ("B", 2)]), None).unwrap();
        let h = |a: &[&str], b: &[&str]| h_up_alpha(&rho, a, b, 2.0, EntropyFamily::Sandwiched).unwrap().value;
        let (h1, h12, h1c) = (h(&["A1"], &["B"]), h(&["A1", "A2"], &["B"]), h(&["A1"], &["B", "A2"]));
        prop_assert!(h1 - 1.0 <= h12 + 1e-7);
        prop_assert!(h12 <= h1 + 1.0 + 1e-7);
        prop_assert!(h1 - 2.0 <= h1c + 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smooth_hmin_nondecreasing_in_eps(seed: u64, da in 2usize..=4, db in 2usize..=4) {
        let mut r = rng(seed);
        let p = random::joint(&mut r, space(&[("A", da), ("B", db)])).unwrap();
        let mut last = hmin_classical(&p, &["A"], &["B"]).unwrap();
        let zero = smooth_hmin_classical(&p, &["A"], &["B"], 0.0).unwrap().0;
        prop_assert!((zero - last).abs() < 1e-12);
        for eps in [0.01, 0.05, 0.1, 0.2, 0.4] {
            let v = smooth_hmin_classical(&p, &["A"], &["B"], eps).unwrap().0;
            prop_assert!(last <= v + 1e-12, "eps={eps}");
            last = v;
        }
    }

    #[test]
    fn chain_rule_identity(seed: u64, alpha in 1.1f64..2.5) {
        let mut r = rng(seed);
        let rho = random::density(&mut r, space(&[("A1", 2), ("A2", 2), ("B", 2)]), None).unwrap();
        let sigma = random::density(&mut r, space(&[("B", 2)]), None).unwrap();
        let c = chain_rule_nu_state(&rho, &["A1"], &["A2"], &["B"], &sigma, alpha).unwrap();
        prop_assert!((c.lhs - c.rhs).abs() <= 1e-7, "{} vs {}", c.lhs, c.rhs);
        prop_assert!((c.nu.trace() - 1.0).abs() < 1e-9);
    }
}

// ------------------------------------------------------------------ bounds

fn spec_strategy() -> impl Strategy<Value = ScenarioSpec> {
    (2u32..=9, 2usize..=4, 1usize..=4, -12.0f64..-2.0, 0.0f64..=1.0).prop_map(|(e, da, db, le, hf)| {
        ScenarioSpec::identical(10u64.pow(e), da, db, 10f64.powf(le), hf * (da as f64).log2())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn reports_sum_their_terms(spec in spec_strategy()) {
        let h = spec.per_round_entropies.clone();
        let reports = [
            approx_indep_bound(&spec).unwrap(),
            weak_aep_bound(&spec).unwrap(),
            approx_eat_terms(&spec, &h, &eat_preset(&spec, 0.01)),
        ];
        for r in &reports {
            prop_assert!(decomposition_gap(r) <= 1e-10, "{r:?}");
        }
    }

    #[test]
    fn bounds_nondecreasing_in_round_entropies(
        n in 2usize..=6, seed: u64, le in -10.0f64..-3.0, alpha_frac in 0.01f64..0.99,
    ) {
        let mut r = rng(seed);
        let hk: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..0.9)).collect();
        let k = r.gen_range(0..n);
        let mut up = hk.clone();
        up[k] += r.gen_range(0.0..(1.0 - hk[k]));
        let mut spec = ScenarioSpec::identical(n as u64, 2, 2, 10f64.powf(le), 0.0);
        let alpha = 1.0 + 0.5 * alpha_frac / 5f64.log2();
        let lo = classical_eat_bound(&spec, &hk, alpha, 0.1).unwrap().value;
        let hi = classical_eat_bound(&spec, &up, alpha, 0.1).unwrap().value;
        prop_assert!(lo <= hi + 1e-9);
        let p = eat_preset(&spec, 0.1);
        prop_assert!(approx_eat_terms(&spec, &hk, &p).value <= approx_eat_terms(&spec, &up, &p).value + 1e-9);
        spec.per_round_entropies = hk;
        let lo = approx_indep_bound(&spec).unwrap().value;
        spec.per_round_entropies = up;
        prop_assert!(lo <= approx_indep_bound(&spec).unwrap().value + 1e-9);
    }
}

// ---------------------------------------------------------------- simulate

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn r_distribution_is_markov(seed: u64, eps in 0.0f64..0.1) {
        let mut r = rng(seed);
        let proc_ = random_eat_process(&mut r, 3, 2, 2, 2, eps).unwrap();
        let rd = build_r_distribution(&proc_, eps).unwrap();
        prop_assert!(rd.markov_gap <= 1e-10);
        prop_assert!((rd.p.total() - 1.0).abs() <= 1e-10);
        prop_assert!((rd.r.total() - 1.0).abs() <= 1e-10);
        prop_assert!(rd.dmax <= rd.exponent + 1e-10);
        prop_assert!(rd.p.probs().iter().chain(rd.r.probs()).all(|&x| x >= 0.0));
    }

    #[test]
    fn sequential_tables_sum_to_one(seed: u64, n in 1usize..=4, eps in 0.0f64..0.2) {
        let mut r = rng(seed);
        let proc_ = random_eat_process(&mut r, n, 2, 2, 2, eps).unwrap();
        let p = run_sequential_classical(&proc_.initial, &proc_.p, &[]).unwrap();
        prop_assert!((p.total() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn channel_mixtures_stay_channels(seed: u64, din in 2usize..=4, dout in 2usize..=4, delta in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let mut table = || (0..din).flat_map(|_| random::distribution(&mut r, dout)).collect::<Vec<_>>();
        let n = ClassicalChannel::new(space(&[("X", din)]), space(&[("Y", dout)]), table()).unwrap();
        let m = ClassicalChannel::new(space(&[("X", din)]), space(&[("Y", dout)]), table()).unwrap();
        let mix = n.mix(&m, delta).unwrap();
        for x in 0..din {
            prop_assert!((mix.row(x).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let k = mix.to_kraus().unwrap();
        let sum = k.kraus().iter().fold(Mat::zeros(din, din), |acc, a| acc + a.adjoint() * a);
        prop_assert!((sum - Mat::identity(din, din)).norm() <= 1e-9);
        let dep = KrausChannel::depolarizing(space(&[("X", din)]), delta).unwrap();
        let both = dep.mix(&KrausChannel::identity(space(&[("X", din)])), 0.5).unwrap();
        let sum = both.kraus().iter().fold(Mat::zeros(din, din), |acc, a| acc + a.adjoint() * a);
        prop_assert!((sum - Mat::identity(din, din)).norm() <= 1e-9);
    }

    #[test]
    fn frequencies_sum_to_one(xs in proptest::collection::vec(0usize..5, 1..50)) {
        let f = freq(&xs, 5).unwrap();
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

// ------------------------------------------------------------------- diqkd

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chsh_rate_nondecreasing(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let span = diqkd::TSIRELSON - 0.75;
        let (lo, hi) = (0.75 + span * a.min(b), 0.75 + span * a.max(b));
        let (fl, fh) = (diqkd::chsh_rate_function(lo).unwrap(), diqkd::chsh_rate_function(hi).unwrap());
        prop_assert!(fl <= fh + 1e-12, "f({lo}) = {fl} > f({hi}) = {fh}");
        prop_assert!((0.0..=1.0).contains(&fl));
    }

    #[test]
    fn keyrate_matches_approx_indep(le in -2.0f64..-0.7, e in 4u32..=11) {
        let eps = 10f64.powf(le);
        let n = 10u64.pow(e);
        let spec = DiqkdSpec {
            n,
            omega_exp: diqkd::omega_required(eps, 0.0).unwrap(),
            delta_w: 0.0,
            eps_target: eps,
            gamma: None,
        };
        let a = diqkd::diqkd_keyrate_bound(&spec).unwrap().value;
        let b = approx_indep_bound(&ScenarioSpec::identical(n, 2, 1, eps.powi(4), 1.0)).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}
