//! Sequential processes by exact table contraction, the mixed-channel
//! construction, the `r` distribution of the classical accumulation argument,
//! the side-information and triangle counterexamples, and a tiny quantum
//! accumulation run.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{z_beta, MinTradeoffFunction};
use crate::channel::{classical_diamond_distance, quantum_diamond_lower_bound, ClassicalChannel, KrausChannel};
use crate::divergences::{sandwiched_renyi_mat, sharp_upper_bound, Order};
use crate::entropies::{h_down_alpha, h_up_alpha, EntropyFamily};
use crate::error::{domain, Error, Result};
use crate::linalg::{
    hermitize, kron, permute_registers, ClassicalJoint, DensityOperator, Mat, RegisterSpace, C64,
};
use crate::random;
use crate::smoothing::{smooth_hmin_classical_in, smooth_hmin_columns, ColumnClass, SmoothingBall};

/// Largest table built by contraction.
pub const MAX_TABLE: usize = 1 << 24;

/// `(1 - delta) m_prime + delta m`, the mixture whose output dominates
/// `delta` times the output of `m`.
pub fn mix_channel(
    m_prime: &ClassicalChannel,
    m: &ClassicalChannel,
    delta: f64,
) -> Result<ClassicalChannel> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    m_prime.mix(m, delta)
}

pub fn mix_kraus(m_prime: &KrausChannel, m: &KrausChannel, delta: f64) -> Result<KrausChannel> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    m_prime.mix(m, delta)
}

/// Frequency vector of a sequence over an alphabet of size `k`.
pub fn freq(xs: &[usize], k: usize) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::Precondition("empty sequence".into()));
    }
    let mut f = vec![0.0; k];
    for &x in xs {
        if x >= k {
            return Err(Error::Precondition(format!("letter {x} outside alphabet of {k}")));
        }
        f[x] += 1.0;
    }
    let n = xs.len() as f64;
    Ok(f.into_iter().map(|c| c / n).collect())
}

/// The event `f(freq(x_1^n)) >= h`.
#[derive(Clone, Debug, Serialize)]
pub struct TestEvent {
    pub f: MinTradeoffFunction,
    pub threshold: f64,
}

impl TestEvent {
    pub fn holds(&self, freq: &[f64]) -> bool {
        self.f.eval(freq) >= self.threshold
    }

    /// Probability of the event under an iid letter distribution `q`,
    /// by exact enumeration of frequency types.
    pub fn iid_probability(&self, q: &[f64], n: usize) -> Result<f64> {
        let k = q.len();
        if k != self.f.alphabet.len() {
            return Err(Error::DimensionMismatch {
                expected: self.f.alphabet.len(),
                got: k,
            });
        }
        let mut total = 0.0;
        let mut counts = vec![0usize; k];
        types(n, 0, &mut counts, &mut |c| {
            let fr: Vec<f64> = c.iter().map(|&x| x as f64 / n as f64).collect();
            if self.holds(&fr) {
                let mut lp = ln_factorial(n);
                for (&ci, &qi) in c.iter().zip(q) {
                    lp -= ln_factorial(ci);
                    if ci > 0 {
                        lp += ci as f64 * qi.ln();
                    }
                }
                total += lp.exp();
            }
        });
        Ok(total)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

fn types(left: usize, i: usize, counts: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if i + 1 == counts.len() {
        counts[i] = left;
        visit(counts);
        return;
    }
    for c in 0..=left {
        counts[i] = c;
        types(left - c, i + 1, counts, visit);
    }
}

/// Applies the channels in order. Each channel reads its input registers
/// from the current joint and appends its outputs. A register listed in
/// `trace_out` is summed out right after the last channel that reads it.
pub fn run_sequential_classical(
    initial: &ClassicalJoint,
    channels: &[ClassicalChannel],
    trace_out: &[&str],
) -> Result<ClassicalJoint> {
    let mut state = initial.clone();
    let drop_now = |state: &ClassicalJoint, later: &[ClassicalChannel]| -> Result<ClassicalJoint> {
        let keep: Vec<&str> = state
            .space()
            .labels()
            .into_iter()
            .filter(|l| !trace_out.contains(l) || later.iter().any(|c| c.input().contains(l)))
            .collect();
        if keep.len() == state.space().len() {
            Ok(state.clone())
        } else {
            state.marginal(&keep)
        }
    };
    state = drop_now(&state, channels)?;
    for (k, ch) in channels.iter().enumerate() {
        let space = state.space().clone();
        for l in ch.output().labels() {
            if space.contains(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
        }
        let idx = space.project_indices(ch.input())?;
        let dout = ch.output().dim();
        let size = space.dim().checked_mul(dout).filter(|&s| s <= MAX_TABLE);
        let Some(size) = size else {
            return Err(Error::TooLarge(format!(
                "joint table of {} x {dout} entries",
                space.dim()
            )));
        };
        let mut probs = vec![0.0; size];
        for (i, &p) in state.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = ch.row(idx[i]);
            let out = &mut probs[i * dout..(i + 1) * dout];
            for (o, &w) in out.iter_mut().zip(row) {
                *o = p * w;
            }
        }
        state = ClassicalJoint::new(space.concat(ch.output())?, probs)?;
        state = drop_now(&state, &channels[k + 1..])?;
    }
    Ok(state)
}

/// A classical accumulation process: `p_E`, the real rounds `p^{(k)}` and
/// Markov reference rounds `q^{(k)}`. Round `k` reads
/// `[E, A1, B1, ..., A(k-1), B(k-1)]` and writes `[Ak, Bk]`.
#[derive(Clone, Debug, Serialize)]
pub struct ClassicalProcess {
    pub initial: ClassicalJoint,
    pub p: Vec<ClassicalChannel>,
    pub q: Vec<ClassicalChannel>,
}

impl ClassicalProcess {
    pub fn a_labels(&self) -> Vec<String> {
        (1..=self.p.len()).map(|k| format!("A{k}")).collect()
    }

    pub fn b_labels(&self) -> Vec<String> {
        let mut b: Vec<String> = (1..=self.p.len()).map(|k| format!("B{k}")).collect();
        b.extend(self.initial.space().labels().into_iter().map(String::from));
        b
    }
}

fn history_space(k: usize, e: &RegisterSpace, da: usize, db: usize) -> Result<RegisterSpace> {
    let mut regs: Vec<(String, usize)> = e
        .registers()
        .iter()
        .map(|r| (r.label.clone(), r.dim))
        .collect();
    for j in 1..k {
        regs.push((format!("A{j}"), da));
        regs.push((format!("B{j}"), db));
    }
    let refs: Vec<(&str, usize)> = regs.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    RegisterSpace::new(&refs)
}

/// Random process with Markov `q^{(k)}(a_k b_k | h) = q(b_k | b_<k e) q(a_k | h b_k)`
/// and `p^{(k)} = (1 - eps) q^{(k)} + eps s^{(k)}`, so that
/// `||p^{(k)}(.|h) - q^{(k)}(.|h)||_inf <= eps` at every history.
pub fn random_eat_process<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dim_a: usize,
    dim_b: usize,
    dim_e: usize,
    eps: f64,
) -> Result<ClassicalProcess> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(domain("eps", eps, "[0,1]"));
    }
    let e = RegisterSpace::new(&[("E", dim_e)])?;
    let initial = random::joint(rng, e.clone())?;
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for k in 1..=n {
        let hist = history_space(k, &e, dim_a, dim_b)?;
        let out = RegisterSpace::new(&[(&format!("A{k}"), dim_a), (&format!("B{k}"), dim_b)])?;
        let b_prev: Vec<&str> = std::iter::once("E")
            .chain(hist.labels().into_iter().filter(|l| l.starts_with('B')))
            .collect();
        let sb = hist.subspace(&b_prev)?;
        let ib = hist.project_indices(&sb)?;
        let qb: Vec<Vec<f64>> = (0..sb.dim()).map(|_| random::distribution(rng, dim_b)).collect();
        let d = dim_a * dim_b;
        let mut qt = vec![0.0; hist.dim() * d];
        let mut pt = vec![0.0; hist.dim() * d];
        for h in 0..hist.dim() {
            for b in 0..dim_b {
                let qa = random::distribution(rng, dim_a);
                for a in 0..dim_a {
                    qt[h * d + a * dim_b + b] = qb[ib[h]][b] * qa[a];
                }
            }
            let s = random::distribution(rng, d);
            for y in 0..d {
                pt[h * d + y] = (1.0 - eps) * qt[h * d + y] + eps * s[y];
            }
        }
        q.push(ClassicalChannel::new(hist.clone(), out.clone(), renormalize(qt, d))?);
        p.push(ClassicalChannel::new(hist, out, renormalize(pt, d))?);
    }
    Ok(ClassicalProcess { initial, p, q })
}

fn renormalize(mut t: Vec<f64>, d: usize) -> Vec<f64> {
    for row in t.chunks_mut(d) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    t
}

/// `inf_q H(A_k | B_k A_<k B_<k E)` for each reference round. The entropy is
/// linear in the history distribution, so the infimum sits at a point mass.
pub fn round_entropies(process: &ClassicalProcess) -> Result<Vec<f64>> {
    process
        .q
        .iter()
        .map(|ch| {
            let out = ch.output();
            let da = out.registers()[0].dim;
            let db = out.registers()[1].dim;
            Ok((0..ch.input().dim())
                .map(|h| {
                    let row = ch.row(h);
                    let mut ent = 0.0;
                    for b in 0..db {
                        let pb: f64 = (0..da).map(|a| row[a * db + b]).sum();
                        for a in 0..da {
                            let v = row[a * db + b];
                            if v > 0.0 {
                                ent -= v * (v / pb).log2();
                            }
                        }
                    }
                    ent
                })
                .fold(f64::INFINITY, f64::min))
        })
        .collect()
}

/// Output of [`build_r_distribution`].
#[derive(Clone, Debug, Serialize)]
pub struct RDistribution {
    pub p: ClassicalJoint,
    pub r: ClassicalJoint,
    /// `sum_k log(1 + eps |A_k||B_k|)`.
    pub exponent: f64,
    /// `max log p/r` over the table, which is `D_max(p || r)`.
    pub dmax: f64,
    /// Largest `|r(b_k | a_<k b_<k e) - r(b_k | b_<k e)|`.
    pub markov_gap: f64,
}

/// Mixes every `q^{(k)}` with the uniform distribution at weight
/// `eps|A||B| / (1 + eps|A||B|)`, contracts both processes and certifies
/// `p <= 2^exponent r` entrywise and the Markov chain of `r`.
pub fn build_r_distribution(process: &ClassicalProcess, eps: f64) -> Result<RDistribution> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(domain("eps", eps, "[0,1]"));
    }
    if process.p.len() != process.q.len() || process.p.is_empty() {
        return Err(Error::Precondition("p and q rounds must pair up".into()));
    }
    let mut r_channels = Vec::new();
    let mut exponent = 0.0;
    for (k, (pk, qk)) in process.p.iter().zip(&process.q).enumerate() {
        if pk.input() != qk.input() || pk.output() != qk.output() || pk.output().len() != 2 {
            return Err(Error::SpaceMismatch);
        }
        let gap = pk
            .table()
            .iter()
            .zip(qk.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > eps + 1e-12 {
            return Err(Error::Precondition(format!(
                "round {}: ||p - q||_inf = {gap:e} exceeds eps = {eps:e}",
                k + 1
            )));
        }
        let d = pk.output().dim() as f64;
        let w = 1.0 + d * eps;
        exponent += w.log2();
        let table = qk.table().iter().map(|&x| (x + eps) / w).collect();
        r_channels.push(ClassicalChannel::new(qk.input().clone(), qk.output().clone(), table)?);
    }
    let p = run_sequential_classical(&process.initial, &process.p, &[])?;
    let r = run_sequential_classical(&process.initial, &r_channels, &[])?;
    let mut dmax = f64::NEG_INFINITY;
    for (&x, &y) in p.probs().iter().zip(r.probs()) {
        if x > 0.0 {
            if y <= 0.0 {
                return Err(Error::Certificate("p not dominated by r".into()));
            }
            dmax = dmax.max((x / y).log2());
        }
    }
    if dmax > exponent + 1e-9 {
        return Err(Error::Certificate(format!(
            "max log p/r = {dmax} exceeds {exponent}"
        )));
    }
    let markov_gap = markov_gap(&r, process)?;
    if markov_gap > 1e-9 {
        return Err(Error::Certificate(format!(
            "r violates A_<k - B_<k E - B_k by {markov_gap:e}"
        )));
    }
    Ok(RDistribution {
        p,
        r,
        exponent,
        dmax,
        markov_gap,
    })
}

/// Largest deviation of `r(b_k | a_<k b_<k e)` from `r(b_k | b_<k e)`.
pub fn markov_gap(r: &ClassicalJoint, process: &ClassicalProcess) -> Result<f64> {
    let e_labels: Vec<String> = process.initial.space().labels().into_iter().map(String::from).collect();
    let mut worst: f64 = 0.0;
    for k in 2..=process.p.len() {
        let a_prev: Vec<String> = (1..k).map(|j| format!("A{j}")).collect();
        let b_prev: Vec<String> = (1..k).map(|j| format!("B{j}")).chain(e_labels.iter().cloned()).collect();
        let bk = format!("B{k}");
        let all: Vec<&str> = a_prev
            .iter()
            .chain(&b_prev)
            .map(String::as_str)
            .chain(std::iter::once(bk.as_str()))
            .collect();
        let joint = r.marginal(&all)?;
        let sp = joint.space().clone();
        let hist: Vec<&str> = a_prev.iter().chain(&b_prev).map(String::as_str).collect();
        let side: Vec<&str> = b_prev.iter().map(String::as_str).collect();
        let with_bk: Vec<&str> = side.iter().copied().chain(std::iter::once(bk.as_str())).collect();
        let full_h = joint.marginal(&hist)?;
        let side_m = joint.marginal(&side)?;
        let side_bk = joint.marginal(&with_bk)?;
        let ih = sp.project_indices(full_h.space())?;
        let is = sp.project_indices(side_m.space())?;
        let isb = sp.project_indices(side_bk.space())?;
        for (i, &v) in joint.probs().iter().enumerate() {
            let h = full_h.probs()[ih[i]];
            let s = side_m.probs()[is[i]];
            if h <= 1e-300 || s <= 1e-300 {
                continue;
            }
            worst = worst.max((v / h - side_bk.probs()[isb[i]] / s).abs());
        }
    }
    Ok(worst)
}

/// Report of the side-information counterexample.
#[derive(Clone, Debug, Serialize)]
pub struct SideInfoReport {
    pub n: usize,
    pub eps: f64,
    pub eps_prime: f64,
    /// `(2/eps) log(1/eps')`.
    pub l: f64,
    /// `l + log(8/3)`.
    pub upper_bound: f64,
    /// `H_min(A|BC)` of the primed process.
    pub primed_hmin: f64,
    /// Trace-ball smoothed `H_min^{eps'}(A|BC)` of the real process.
    pub real_smoothed_hmin: f64,
    pub real_hmin: f64,
    /// `P(C_k = 0)`.
    pub leak_probability: f64,
    /// Diamond distance of `M_k` and `M'_k` per round.
    pub channel_distance: Vec<f64>,
    /// True when `channel_distance` came from the explicit tables.
    pub channel_distance_exact: bool,
    /// Per-round `H(A_k | B_k C_k)` of the primed process.
    pub primed_round_entropy: f64,
}

/// Column classes of `p(a_1^n | b_1^n c_1^n)` for the leaking process (or the
/// primed one). For a flag string `c` with last leaking round `K`, a column
/// holds `2^{n-K}` equal entries.
pub fn side_info_classes(n: usize, eps: f64, primed: bool) -> Result<Vec<ColumnClass>> {
    check_side_info(n, eps)?;
    let leak = eps / 2.0;
    let nf = n as f64;
    let mut out = Vec::with_capacity(1 << n);
    for c in 0u32..(1 << n) {
        // Bit k-1 of `c` is c_k.
        let mut log_v = -nf;
        let mut log_mult = 0.0;
        let mut p_c = 1.0;
        let mut last_zero = 0usize;
        for k in 1..=n {
            let ck = (c >> (k - 1)) & 1;
            if ck == 1 {
                p_c *= 1.0 - leak;
            } else {
                p_c *= leak;
            }
            if ck == 1 || primed {
                log_v -= nf;
                log_mult += nf;
            } else {
                log_v -= nf - k as f64;
                log_mult += nf - k as f64;
                last_zero = k;
            }
        }
        if p_c == 0.0 {
            continue;
        }
        let free = n - last_zero;
        log_mult += last_zero as f64;
        let v = p_c * log_v.exp2();
        out.push(ColumnClass {
            runs: vec![(v, (free as f64).exp2()), (0.0, nf.exp2() - (free as f64).exp2())],
            multiplicity: log_mult.exp2(),
        });
    }
    Ok(out)
}

fn check_side_info(n: usize, eps: f64) -> Result<()> {
    if n == 0 || n > 12 {
        return Err(Error::TooLarge(format!("n = {n} outside 1..=12")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain("eps", eps, "(0,1]"));
    }
    Ok(())
}

/// Explicit `M_k, M'_k : A_1^{k-1} -> A_k B_k C_k` with `|B_k| = 2^n`.
pub fn side_info_channels(
    n: usize,
    eps: f64,
) -> Result<(Vec<ClassicalChannel>, Vec<ClassicalChannel>)> {
    check_side_info(n, eps)?;
    if n > 10 {
        return Err(Error::TooLarge(format!("explicit channels need n <= 10, got {n}")));
    }
    let leak = eps / 2.0;
    let nb = 1usize << n;
    let (mut real, mut primed) = (Vec::new(), Vec::new());
    for k in 1..=n {
        let prev: Vec<(String, usize)> = (1..k).map(|j| (format!("A{j}"), 2)).collect();
        let refs: Vec<(&str, usize)> = prev.iter().map(|(l, d)| (l.as_str(), *d)).collect();
        let input = RegisterSpace::new(&refs)?;
        let output = RegisterSpace::new(&[
            (&format!("A{k}"), 2),
            (&format!("B{k}"), nb),
            (&format!("C{k}"), 2),
        ])?;
        let shift = n - k;
        let fresh = 0.5 * (1.0 - leak) / nb as f64;
        let primed_zero = 0.5 * leak / nb as f64;
        let revealed = 0.5 * leak / (1usize << shift) as f64;
        real.push(ClassicalChannel::from_fn(input.clone(), output.clone(), |x, y| {
            let c = y % 2;
            let b = (y / 2) % nb;
            let a = y / 2 / nb;
            if c == 1 {
                fresh
            } else if b >> shift == x * 2 + a {
                revealed
            } else {
                0.0
            }
        })?);
        primed.push(ClassicalChannel::from_fn(input, output, |_, y| {
            if y % 2 == 1 {
                fresh
            } else {
                primed_zero
            }
        })?);
    }
    Ok((real, primed))
}

/// Full joint over `A_1^n B_1^n C_1^n` by contraction; `n <= 3`.
pub fn side_info_joint(n: usize, eps: f64, primed: bool) -> Result<ClassicalJoint> {
    if n > 3 {
        return Err(Error::TooLarge(format!("explicit joint needs n <= 3, got {n}")));
    }
    let (real, pr) = side_info_channels(n, eps)?;
    let start = ClassicalJoint::new(RegisterSpace::empty(), vec![1.0])?;
    run_sequential_classical(&start, if primed { &pr } else { &real }, &[])
}

pub fn counterexample_side_info(n: usize, eps: f64, eps_prime: f64) -> Result<SideInfoReport> {
    check_side_info(n, eps)?;
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(domain("eps_prime", eps_prime, "(0,1)"));
    }
    let l = 2.0 / eps * (1.0 / eps_prime).log2();
    let real = side_info_classes(n, eps, false)?;
    let primed = side_info_classes(n, eps, true)?;
    let primed_hmin = smooth_hmin_columns(&primed, 0.0, SmoothingBall::Subnormalized)?;
    let real_hmin = smooth_hmin_columns(&real, 0.0, SmoothingBall::Subnormalized)?;
    let real_smoothed_hmin = smooth_hmin_columns(&real, eps_prime, SmoothingBall::Subnormalized)?;
    let (channel_distance, exact) = if n <= 8 {
        let (m, mp) = side_info_channels(n, eps)?;
        let d = m
            .iter()
            .zip(&mp)
            .map(|(a, b)| classical_diamond_distance(a, b))
            .collect::<Result<Vec<_>>>()?;
        (d, true)
    } else {
        let d = (1..=n)
            .map(|k| eps / 2.0 * (1.0 - (-(k as f64)).exp2()))
            .collect();
        (d, false)
    };
    Ok(SideInfoReport {
        n,
        eps,
        eps_prime,
        l,
        upper_bound: l + (8.0f64 / 3.0).log2(),
        primed_hmin,
        real_smoothed_hmin,
        real_hmin,
        leak_probability: eps / 2.0,
        channel_distance,
        channel_distance_exact: exact,
        primed_round_entropy: 1.0,
    })
}

/// Report of the triangle counterexample.
#[derive(Clone, Debug, Serialize)]
pub struct TriangleReport {
    pub n: usize,
    pub eps: f64,
    pub eps_prime: f64,
    /// `D_max(p_{|E} || p)` for `E = {B = 0}`.
    pub dmax_conditioned: f64,
    /// `H_min^eps(A|B)_p` in the normalized ball.
    pub hmin_smoothed: f64,
    /// `H_min^{eps'}(A|B)_{p|E}` in the normalized ball.
    pub hmin_conditioned: f64,
    pub chain: CopyChainStats,
}

/// Statistics of the copy chain over `2n` bit pairs.
#[derive(Clone, Debug, Serialize)]
pub struct CopyChainStats {
    pub pairs: usize,
    /// `E_Q[I]` for `I = #{i : A_{2i-1} = A_{2i}}`.
    pub mean_i_chain: f64,
    /// `E[I]` under the product of marginals.
    pub mean_i_product: f64,
    /// `||Q - (⊗ Q_{A_i}) ⊗ Q_B||_1`.
    pub l1_to_product: f64,
}

/// `p_{AB}` with `B = 0` w.p. `eps` and then `A = 0^n`, else `A` uniform.
pub fn triangle_joint(n: usize, eps: f64) -> Result<ClassicalJoint> {
    if n == 0 || n > 16 {
        return Err(Error::TooLarge(format!("n = {n} outside 1..=16")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("eps", eps, "(0,1)"));
    }
    let da = 1usize << n;
    let space = RegisterSpace::new(&[("A", da), ("B", 2)])?;
    let mut probs = vec![0.0; 2 * da];
    probs[0] = eps;
    for a in 0..da {
        probs[a * 2 + 1] = (1.0 - eps) / da as f64;
    }
    ClassicalJoint::new(space, probs)
}

/// The copy chain on `2n` rounds: `A_1` fresh, and for `i > 1` the bit `B_i`
/// is 0 w.p. `eps`, in which case `A_i = A_{i-1}`; otherwise `A_i` is fresh.
/// Explicit table for `n <= 3`.
pub fn copy_chain_joint(n: usize, eps: f64) -> Result<ClassicalJoint> {
    if n == 0 || n > 3 {
        return Err(Error::TooLarge(format!("explicit chain needs 1 <= n <= 3, got {n}")));
    }
    let mut channels = Vec::new();
    for i in 1..=2 * n {
        let input = if i == 1 {
            RegisterSpace::empty()
        } else {
            RegisterSpace::new(&[(&format!("A{}", i - 1), 2)])?
        };
        let output = RegisterSpace::new(&[(&format!("B{i}"), 2), (&format!("A{i}"), 2)])?;
        let first = i == 1;
        channels.push(ClassicalChannel::from_fn(input, output, move |x, y| {
            let (b, a) = (y / 2, y % 2);
            let pb = if b == 0 { eps } else { 1.0 - eps };
            if b == 0 && !first {
                if a == x {
                    pb
                } else {
                    0.0
                }
            } else {
                pb * 0.5
            }
        })?);
    }
    let start = ClassicalJoint::new(RegisterSpace::empty(), vec![1.0])?;
    run_sequential_classical(&start, &channels, &[])
}

pub fn copy_chain_stats(n: usize, eps: f64) -> CopyChainStats {
    // Every A_i is uniform, and A_{2i} copies A_{2i-1} with probability eps.
    let equal = eps + (1.0 - eps) / 2.0;
    // Given B, Q(.|b) is uniform on 2^f strings with f = 2n - Z, where Z
    // counts the copying rounds i >= 2; E[2^{-Z}] = (1 - eps/2)^{2n-1}.
    let l1 = 2.0 - 2.0 * (1.0 - eps / 2.0).powi(2 * n as i32 - 1);
    CopyChainStats {
        pairs: n,
        mean_i_chain: n as f64 * equal,
        mean_i_product: n as f64 / 2.0,
        l1_to_product: l1,
    }
}

/// Exact chain statistics from the explicit table, for cross-checks.
pub fn copy_chain_stats_from_table(q: &ClassicalJoint, n: usize) -> Result<CopyChainStats> {
    let mut mean = 0.0;
    for i in 1..=n {
        let t = q.blocks(&[&format!("A{}", 2 * i - 1)], &[&format!("A{}", 2 * i)])?;
        mean += t[0][0] + t[1][1];
    }
    let a: Vec<String> = (1..=2 * n).map(|i| format!("A{i}")).collect();
    let b: Vec<String> = (1..=2 * n).map(|i| format!("B{i}")).collect();
    let qb = q.marginal(&b.iter().map(String::as_str).collect::<Vec<_>>())?;
    let ib = q.space().project_indices(qb.space())?;
    let mut l1 = 0.0;
    for (i, &v) in q.probs().iter().enumerate() {
        let mut prod = qb.probs()[ib[i]];
        for l in &a {
            let m = q.marginal(&[l])?;
            let d = q.space().digits(i)[q.space().position(l)?];
            prod *= m.probs()[d];
        }
        l1 += (v - prod).abs();
    }
    Ok(CopyChainStats {
        pairs: n,
        mean_i_chain: mean,
        mean_i_product: n as f64 / 2.0,
        l1_to_product: l1,
    })
}

pub fn counterexample_triangle(n: usize, eps: f64, eps_prime: f64) -> Result<TriangleReport> {
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(domain("eps_prime", eps_prime, "(0,1)"));
    }
    let p = triangle_joint(n, eps)?;
    // p conditioned on B = 0 is a point mass at (0^n, 0).
    let mut cond = vec![0.0; p.probs().len()];
    cond[0] = 1.0;
    let p_e = ClassicalJoint::new(p.space().clone(), cond)?;
    let dmax_conditioned = p_e
        .probs()
        .iter()
        .zip(p.probs())
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| (x / y).log2())
        .fold(f64::NEG_INFINITY, f64::max);
    let (hmin_smoothed, _) = smooth_hmin_classical_in(&p, &["A"], &["B"], eps, SmoothingBall::Normalized)?;
    let (hmin_conditioned, _) =
        smooth_hmin_classical_in(&p_e, &["A"], &["B"], eps_prime, SmoothingBall::Normalized)?;
    Ok(TriangleReport {
        n,
        eps,
        eps_prime,
        dmax_conditioned,
        hmin_smoothed,
        hmin_conditioned,
        chain: copy_chain_stats(n, eps),
    })
}

/// One step of the entropy claim along a flag string.
#[derive(Clone, Debug, Serialize)]
pub struct ClaimCheck {
    /// Flags `c_1 .. c_k`, `1` for the good map.
    pub flags: String,
    pub lhs: f64,
    pub previous: f64,
    pub increment: f64,
    /// `lhs - previous - increment`.
    pub slack: f64,
}

/// Report of the small quantum accumulation run.
#[derive(Clone, Debug, Serialize)]
pub struct QuantumSmokeReport {
    pub n: usize,
    pub dim_b: usize,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `D~_beta(rho || sigma)` of the final states on `A_1^n B_1^n E`.
    pub divergence: f64,
    /// Sharp-bound values of `M_k(omega) || M^delta_k(omega)` on the
    /// realized inputs.
    pub per_round_sharp: Vec<f64>,
    pub realized_sharp_sum: f64,
    /// `n z_beta(eps, delta)`.
    pub analytic_bound: f64,
    /// Heuristic infima `h_k`, by restarted minimization over pure inputs.
    pub h_k: Vec<f64>,
    /// `log(|A||B|^2)`.
    pub s: f64,
    pub claims: Vec<ClaimCheck>,
    pub min_claim_slack: f64,
    /// See-saw lower bound on the diamond distance of `M_k` and `M'_k`.
    pub diamond_lower: Vec<f64>,
    /// The construction's analytic upper bound `eps`.
    pub diamond_upper: f64,
}

/// Parameters of [`quantum_eat_smoke`].
#[derive(Clone, Copy, Debug)]
pub struct SmokeParams {
    pub n: usize,
    pub dim_b: usize,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for SmokeParams {
    fn default() -> Self {
        Self {
            n: 2,
            dim_b: 2,
            eps: 0.05,
            delta: 0.3,
            alpha: 1.2,
            beta: 2.0,
            seed: 7,
        }
    }
}

fn r_label(k: usize) -> String {
    format!("R{k}")
}

/// `M'_k`: an isometry `R_{k-1} -> R_k A_k` with `B_k` prepared in a fixed
/// state, so `B_k` carries nothing about the past.
fn good_round(rng: &mut ChaCha8Rng, k: usize, db: usize) -> Result<KrausChannel> {
    let input = RegisterSpace::new(&[(&r_label(k - 1), 2)])?;
    let output = RegisterSpace::new(&[(&r_label(k), 2), (&format!("A{k}"), 2), (&format!("B{k}"), db)])?;
    let u = random::unitary(rng, 4);
    let v = u.columns(0, 2).into_owned();
    let beta = random::density(rng, RegisterSpace::new(&[("b", db)])?, None)?;
    let eb = crate::linalg::eigh(beta.matrix());
    let mut ops = Vec::new();
    for j in 0..db {
        let lam = eb.values[j].max(0.0);
        if lam > 0.0 {
            let col = eb.vectors.column(j).into_owned();
            let ket = Mat::from_fn(db, 1, |i, _| col[i] * C64::new(lam.sqrt(), 0.0));
            ops.push(kron(&v, &ket));
        }
    }
    KrausChannel::new(input, output, ops)
}

/// Leaking round: measures `R_{k-1}`, keeps the outcome in `R_k`, copies it
/// into `B_k` and sets `A_k = 0`.
fn leaking_round(k: usize, db: usize) -> Result<KrausChannel> {
    let input = RegisterSpace::new(&[(&r_label(k - 1), 2)])?;
    let output = RegisterSpace::new(&[(&r_label(k), 2), (&format!("A{k}"), 2), (&format!("B{k}"), db)])?;
    let d = 4 * db;
    let ops = (0..2)
        .map(|r| {
            let mut m = Mat::zeros(d, 2);
            let y = (r * 2) * db + r % db;
            m[(y, r)] = C64::new(1.0, 0.0);
            m
        })
        .collect();
    KrausChannel::new(input, output, ops)
}

/// Applies `ch` to its input registers inside `rho`; outputs come first.
fn apply_on(ch: &KrausChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    let labels = ch.input().labels();
    let rest = rho.space().complement(&labels)?;
    let to = ch.input().concat(&rest)?;
    let m = permute_registers(rho.matrix(), rho.space(), &to)?;
    let id = Mat::identity(rest.dim(), rest.dim());
    let d = ch.output().dim() * rest.dim();
    let out = ch.kraus().iter().fold(Mat::zeros(d, d), |acc, k| {
        let kk = kron(k, &id);
        acc + &kk * &m * kk.adjoint()
    });
    DensityOperator::new(ch.output().concat(&rest)?, hermitize(&out))
}

fn labels_upto(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

/// `inf_omega H~down_alpha(A_k | B_k R~)_{M'_k(omega)}` over pure inputs on
/// `R_{k-1} R~`, by seeded restarts of Nelder-Mead. Heuristic.
fn round_infimum(ch: &KrausChannel, k: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let rin = r_label(k - 1);
    let space = RegisterSpace::new(&[(rin.as_str(), 2), ("Rt", 2)])?;
    let a = format!("A{k}");
    let b = format!("B{k}");
    let eval = |x: &[f64]| -> f64 {
        let psi = nalgebra::DVector::from_fn(4, |i, _| C64::new(x[2 * i], x[2 * i + 1]));
        let norm = psi.norm();
        if norm < 1e-9 {
            return f64::INFINITY;
        }
        let st = match DensityOperator::pure(space.clone(), &(psi / C64::new(norm, 0.0))) {
            Ok(s) => s,
            Err(_) => return f64::INFINITY,
        };
        let out = match apply_on(ch, &st) {
            Ok(o) => o,
            Err(_) => return f64::INFINITY,
        };
        h_down_alpha(&out, &[a.as_str()], &[b.as_str(), "Rt"], alpha, EntropyFamily::Sandwiched)
            .map(|r| r.value)
            .unwrap_or(f64::INFINITY)
    };
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let x0: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = crate::optimize::nelder_mead(eval, &x0, &[0.3; 8], 3000, 1e-12);
        best = best.min(m.value);
    }
    Ok(best)
}

/// Runs `n` rounds of `M_k = (1 - eps) M'_k + eps L_k` and of the flagged
/// mixture `M^delta_k = (1 - delta) M'_k + delta M_k`, evaluates the
/// divergence chain and checks the per-flag-string entropy claim.
pub fn quantum_eat_smoke(p: SmokeParams) -> Result<QuantumSmokeReport> {
    let SmokeParams {
        n,
        dim_b: db,
        eps,
        delta,
        alpha,
        beta,
        seed,
    } = p;
    if n == 0 || n > 3 || db == 0 || db > 2 {
        return Err(Error::TooLarge(format!("n = {n}, |B| = {db}")));
    }
    let total = (1usize << n) * db.pow(n as u32) * 2 * 2;
    if total > crate::linalg::MAX_DIM {
        return Err(Error::TooLarge(format!("total dimension {total}")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(domain("eps", eps, "[0,1)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "(0,1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space0 = RegisterSpace::new(&[("R0", 2), ("E", 2)])?;
    let rho0 = random::pure(&mut rng, space0)?;
    let mut good = Vec::new();
    let mut real = Vec::new();
    let mut mixed = Vec::new();
    for k in 1..=n {
        let g = good_round(&mut rng, k, db)?;
        let m = g.mix(&leaking_round(k, db)?, eps)?;
        mixed.push(mix_kraus(&g, &m, delta)?);
        real.push(m);
        good.push(g);
    }

    // Divergence chain.
    let mut rho = rho0.clone();
    let mut sigma = rho0.clone();
    let mut per_round_sharp = Vec::new();
    for k in 0..n {
        let out_real = apply_on(&real[k], &rho)?;
        let out_mixed = apply_on(&mixed[k], &rho)?;
        per_round_sharp.push(sharp_upper_bound(&out_real, &out_mixed, beta)?.result.value.value());
        rho = out_real;
        sigma = apply_on(&mixed[k], &sigma)?;
    }
    let a_all = labels_upto("A", n);
    let mut keep: Vec<String> = a_all.clone();
    keep.extend(labels_upto("B", n));
    keep.push("E".into());
    let keep_refs: Vec<&str> = keep.iter().map(String::as_str).collect();
    let rho_f = rho.partial_trace(&keep_refs)?;
    let sigma_f = sigma.partial_trace(&keep_refs)?.permuted(rho_f.space())?;
    let divergence = sandwiched_renyi_mat(rho_f.matrix(), sigma_f.matrix(), Order::Finite(beta))?
        .finite("D~_beta(rho || sigma)")?;
    let analytic_bound = n as f64 * z_beta(eps, delta, beta)?;

    // Entropy claim along every flag string.
    let h_k = good
        .iter()
        .enumerate()
        .map(|(i, g)| round_infimum(g, i + 1, alpha, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let s = ((2 * db * db) as f64).log2();
    let mut states: BTreeMap<String, (DensityOperator, f64)> = BTreeMap::new();
    states.insert(String::new(), (rho0, 0.0));
    let mut claims = Vec::new();
    for k in 1..=n {
        let mut next = BTreeMap::new();
        for (flags, (st, prev)) in &states {
            for c in ['0', '1'] {
                let ch = if c == '1' { &good[k - 1] } else { &real[k - 1] };
                let out = apply_on(ch, st)?;
                let a: Vec<String> = labels_upto("A", k);
                let mut b: Vec<String> = labels_upto("B", k);
                b.push("E".into());
                let ar: Vec<&str> = a.iter().map(String::as_str).collect();
                let br: Vec<&str> = b.iter().map(String::as_str).collect();
                let both: Vec<&str> = ar.iter().chain(&br).copied().collect();
                let marg = out.partial_trace(&both)?;
                let lhs = h_up_alpha(&marg, &ar, &br, alpha, EntropyFamily::Sandwiched)?.value;
                let increment = if c == '1' { h_k[k - 1] } else { -s };
                let f = format!("{flags}{c}");
                claims.push(ClaimCheck {
                    flags: f.clone(),
                    lhs,
                    previous: *prev,
                    increment,
                    slack: lhs - prev - increment,
                });
                next.insert(f, (out, lhs));
            }
        }
        states = next;
    }
    let min_claim_slack = claims.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    let diamond_lower = real
        .iter()
        .zip(&good)
        .enumerate()
        .map(|(i, (m, g))| quantum_diamond_lower_bound(m, g, 4, seed ^ i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantumSmokeReport {
        n,
        dim_b: db,
        eps,
        delta,
        alpha,
        beta,
        divergence,
        realized_sharp_sum: per_round_sharp.iter().sum(),
        per_round_sharp,
        analytic_bound,
        h_k,
        s,
        claims,
        min_claim_slack,
        diamond_lower,
        diamond_upper: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{classical_eat_bound, ScenarioSpec};
    use crate::smoothing::smooth_hmin_classical;

    fn bit(label: &str) -> RegisterSpace {
        RegisterSpace::new(&[(label, 2)]).unwrap()
    }

    #[test]
    fn identity_channels_pad_with_deterministic_outputs() {
        let x = ClassicalJoint::new(bit("X"), vec![0.3, 0.7]).unwrap();
        let copy = ClassicalChannel::from_fn(bit("X"), bit("Y"), |a, b| (a == b) as u8 as f64).unwrap();
        let out = run_sequential_classical(&x, &[copy], &[]).unwrap();
        assert_eq!(out.probs(), &[0.3, 0.0, 0.0, 0.7]);
    }

    #[test]
    fn two_round_chain_matches_hand_convolution() {
        // R0 -> R1 A1, R1 -> R2 A2 with the memory consumed.
        let r0 = ClassicalJoint::new(bit("R0"), vec![0.25, 0.75]).unwrap();
        let flip = 0.1;
        let mk = |k: usize| {
            let out = RegisterSpace::new(&[(&format!("R{k}"), 2), (&format!("A{k}"), 2)]).unwrap();
            ClassicalChannel::from_fn(bit(&format!("R{}", k - 1)), out, move |x, y| {
                let (r, a) = (y / 2, y % 2);
                let pr = if r == x { 1.0 - flip } else { flip };
                pr * if a == r { 1.0 } else { 0.0 }
            })
            .unwrap()
        };
        let out = run_sequential_classical(&r0, &[mk(1), mk(2)], &["R0", "R1", "R2"]).unwrap();
        assert_eq!(out.space().labels(), vec!["A1", "A2"]);
        let mut manual = [0.0; 4];
        for (x, px) in [0.25, 0.75].iter().enumerate() {
            for a1 in 0..2 {
                for a2 in 0..2 {
                    let t1 = if a1 == x { 1.0 - flip } else { flip };
                    let t2 = if a2 == a1 { 1.0 - flip } else { flip };
                    manual[a1 * 2 + a2] += px * t1 * t2;
                }
            }
        }
        for (a, b) in out.probs().iter().zip(manual) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_distances_scale_linearly() {
        let m = ClassicalChannel::from_fn(bit("X"), bit("Y"), |x, y| if x == y { 1.0 } else { 0.0 }).unwrap();
        let e = 0.2;
        let mp = ClassicalChannel::from_fn(bit("X"), bit("Y"), |x, y| if x == y { 1.0 - e } else { e }).unwrap();
        let mix = mix_channel(&mp, &m, 0.5).unwrap();
        assert!((classical_diamond_distance(&mix, &m).unwrap() - 0.5 * e).abs() < 1e-15);
        assert!((classical_diamond_distance(&mix, &mp).unwrap() - 0.5 * e).abs() < 1e-15);
        assert!(mix_channel(&mp, &m, 1.0).is_err());
        let near = mix_channel(&mp, &m, 1.0 - 1e-9).unwrap();
        assert!(classical_diamond_distance(&near, &m).unwrap() < 1e-9);
        // Row-wise D_max of m against the mixture is at most log(1/delta).
        for delta in [0.1, 0.5, 0.9] {
            let mix = mix_channel(&mp, &m, delta).unwrap();
            let worst = m
                .table()
                .iter()
                .zip(mix.table())
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| (a / b).log2())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(worst <= (1.0 / delta as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn sharp_bound_on_mixture_outputs_stays_below_z_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (eps, delta, beta) = (0.05, 0.2, 2.0);
        let g = good_round(&mut rng, 1, 2).unwrap();
        let m = g.mix(&leaking_round(1, 2).unwrap(), eps).unwrap();
        let mix = mix_kraus(&g, &m, delta).unwrap();
        let z = z_beta(eps, delta, beta).unwrap();
        let sp = RegisterSpace::new(&[("R0", 2), ("W", 2)]).unwrap();
        for _ in 0..100 {
            let w = random::density(&mut rng, sp.clone(), None).unwrap();
            let v = sharp_upper_bound(&apply_on(&m, &w).unwrap(), &apply_on(&mix, &w).unwrap(), beta)
                .unwrap()
                .result
                .value
                .value();
            assert!(v <= z + 1e-9, "{v} > {z}");
        }
    }

    #[test]
    fn r_distribution_dominates_and_is_markov() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for eps in [0.0, 0.02, 0.1] {
            let proc_ = random_eat_process(&mut rng, 3, 2, 2, 2, eps).unwrap();
            let r = build_r_distribution(&proc_, eps).unwrap();
            assert!((r.exponent - 3.0 * (1.0 + 4.0 * eps as f64).log2()).abs() < 1e-12);
            // Exhaustive table ratio.
            let worst = r
                .p
                .probs()
                .iter()
                .zip(r.r.probs())
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| (a / b).log2())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((worst - r.dmax).abs() < 1e-12 && worst <= r.exponent + 1e-12);
            assert!(r.markov_gap < 1e-12);
            assert!((r.r.total() - 1.0).abs() < 1e-10 && (r.p.total() - 1.0).abs() < 1e-10);
            if eps == 0.0 {
                let q = run_sequential_classical(&proc_.initial, &proc_.q, &[]).unwrap();
                assert_eq!(r.exponent, 0.0);
                for (a, b) in q.probs().iter().zip(r.r.probs()) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn r_distribution_rejects_far_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let proc_ = random_eat_process(&mut rng, 2, 2, 2, 2, 0.2).unwrap();
        assert!(matches!(build_r_distribution(&proc_, 0.001), Err(Error::Precondition(_))));
    }

    #[test]
    fn classical_eat_bound_below_oracle_on_small_process() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 0.01;
        let proc_ = random_eat_process(&mut rng, 4, 2, 2, 2, eps).unwrap();
        let hk = round_entropies(&proc_).unwrap();
        let p = run_sequential_classical(&proc_.initial, &proc_.p, &[]).unwrap();
        let a = proc_.a_labels();
        let b = proc_.b_labels();
        let ar: Vec<&str> = a.iter().map(String::as_str).collect();
        let br: Vec<&str> = b.iter().map(String::as_str).collect();
        let epsp = 0.1;
        let (oracle, _) = smooth_hmin_classical(&p, &ar, &br, epsp).unwrap();
        let spec = ScenarioSpec::identical(4, 2, 2, eps, 0.0);
        let bound = classical_eat_bound(&spec, &hk, 1.0 + eps.sqrt(), epsp).unwrap();
        assert!(bound.value <= oracle, "{} > {oracle}", bound.value);
    }

    #[test]
    fn side_info_classes_agree_with_explicit_tables() {
        for primed in [false, true] {
            for n in 1..=3 {
                let joint = side_info_joint(n, 0.5, primed).unwrap();
                assert!((joint.total() - 1.0).abs() < 1e-12);
                let a = labels_upto("A", n);
                let mut b = labels_upto("B", n);
                b.extend(labels_upto("C", n));
                let ar: Vec<&str> = a.iter().map(String::as_str).collect();
                let br: Vec<&str> = b.iter().map(String::as_str).collect();
                let classes = side_info_classes(n, 0.5, primed).unwrap();
                for eps in [0.0, 0.1, 0.25] {
                    let (t, _) = smooth_hmin_classical(&joint, &ar, &br, eps).unwrap();
                    let c = smooth_hmin_columns(&classes, eps, SmoothingBall::Subnormalized).unwrap();
                    assert!((t - c).abs() < 1e-9, "n={n} primed={primed} eps={eps}: {t} vs {c}");
                }
                // C_k = 0 with probability eps/2.
                for k in 1..=n {
                    let m = joint.marginal(&[&format!("C{k}")]).unwrap();
                    assert!((m.probs()[0] - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn side_info_report_at_n8() {
        let r = counterexample_side_info(8, 0.5, 0.25).unwrap();
        assert!((r.l - 8.0).abs() < 1e-12);
        assert!((r.primed_hmin - 8.0).abs() < 1e-12);
        assert!(r.real_smoothed_hmin <= r.upper_bound);
        assert!(r.channel_distance_exact);
        for (k, d) in r.channel_distance.iter().enumerate() {
            let expect = 0.25 * (1.0 - (-(k as f64 + 1.0)).exp2());
            assert!((d - expect).abs() < 1e-12 && *d <= 0.5);
        }
    }

    #[test]
    fn side_info_gap_widens() {
        let ratios: Vec<f64> = [4, 6, 8, 10]
            .iter()
            .map(|&n| counterexample_side_info(n, 0.5, 0.25).unwrap().real_smoothed_hmin / n as f64)
            .collect();
        for w in ratios.windows(2) {
            assert!(w[1] < w[0], "{ratios:?}");
        }
    }

    #[test]
    fn deterministic_function_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = RegisterSpace::new(&[("A", 3), ("B", 5)]).unwrap();
        for _ in 0..50 {
            let f: Vec<usize> = (0..5).map(|_| rng.gen_range(0..3)).collect();
            let w = random::distribution(&mut rng, 5);
            let scale = rng.gen_range(0.5..1.0);
            let mut probs = vec![0.0; 15];
            for b in 0..5 {
                probs[f[b] * 5 + b] = scale * w[b];
            }
            let p = ClassicalJoint::new(space.clone(), probs).unwrap();
            for eps in [0.01, 0.05] {
                let (v, _) = smooth_hmin_classical(&p, &["A"], &["B"], eps).unwrap();
                let bound = (1.0 / (p.total() - (2.0 * eps as f64).sqrt())).log2();
                assert!(v <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn triangle_values() {
        for n in [8, 12] {
            let r = counterexample_triangle(n, 0.1, 0.2).unwrap();
            assert!((r.dmax_conditioned - (10.0f64).log2()).abs() < 1e-12);
            assert!((r.hmin_smoothed - n as f64).abs() < 1e-9);
            assert!((r.hmin_conditioned - (1.0 / 0.8f64).log2()).abs() < 1e-9);
        }
        let r = counterexample_triangle(8, 0.1, 0.2).unwrap();
        assert!((r.chain.mean_i_chain - 8.0 * 1.1 / 2.0).abs() < 1e-12);
        assert!(copy_chain_stats(60, 0.1).l1_to_product > 1.99);
    }

    #[test]
    fn copy_chain_closed_forms_match_tables() {
        for n in 1..=3 {
            for eps in [0.1, 0.4] {
                let q = copy_chain_joint(n, eps).unwrap();
                let t = copy_chain_stats_from_table(&q, n).unwrap();
                let c = copy_chain_stats(n, eps);
                assert!((t.mean_i_chain - c.mean_i_chain).abs() < 1e-12);
                assert!((t.l1_to_product - c.l1_to_product).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn test_event_probability_sums_to_one() {
        let f = MinTradeoffFunction::new(vec!["0".into(), "1".into()], vec![0.0, 1.0]).unwrap();
        let all = TestEvent { f: f.clone(), threshold: f64::NEG_INFINITY };
        assert!((all.iid_probability(&[0.3, 0.7], 10).unwrap() - 1.0).abs() < 1e-12);
        let half = TestEvent { f, threshold: 0.5 };
        assert!(half.holds(&freq(&[1, 1, 0], 2).unwrap()));
        assert!(!half.holds(&freq(&[1, 0, 0], 2).unwrap()));
    }

    #[test]
    fn quantum_smoke_identical_maps_give_zero_divergence() {
        let r = quantum_eat_smoke(SmokeParams {
            n: 1,
            eps: 0.0,
            ..SmokeParams::default()
        })
        .unwrap();
        assert!(r.divergence.abs() < 1e-9);
    }

    #[test]
    fn quantum_smoke_two_rounds() {
        let r = quantum_eat_smoke(SmokeParams::default()).unwrap();
        assert!(r.divergence <= r.realized_sharp_sum, "{r:?}");
        assert!(r.realized_sharp_sum <= r.analytic_bound, "{r:?}");
        assert!(r.min_claim_slack >= -1e-6, "{:?}", r.claims);
        for d in &r.diamond_lower {
            assert!(*d <= r.diamond_upper + 1e-9);
        }
        eprintln!("{}", serde_json::to_string(&r).unwrap());
    }
}
