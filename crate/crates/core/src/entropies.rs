//! Conditional entropies: von Neumann, the Rényi families with either
//! arrow, the min-entropy by a barrier method, multipartite mutual
//! information and the chain-rule state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::divergences::{
    max_relative_entropy_mat, petz_renyi_mat, relative_entropy_mat, sandwiched_renyi_mat, Order,
};
use crate::error::{domain, Error, Result};
use crate::linalg::{
    disjoint, eigh, embed, entropy_of, hermitize, kron, mat_power, real_trace, scalar_power,
    tensor_product, DensityOperator, Eigh, Mat, RegisterSpace, C64, SUPPORT_TOL,
};
use crate::optimize::bfgs;
use crate::random;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrow {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyFamily {
    Petz,
    Sandwiched,
    Vn,
    Min,
}

#[derive(Clone, Debug)]
pub struct ConditionalEntropyResult {
    /// Bits.
    pub value: f64,
    pub alpha: Order,
    pub arrow: Arrow,
    pub family: EntropyFamily,
    /// Optimal `sigma_B` for the up-arrow and min-entropy variants.
    pub optimizer_sigma: Option<DensityOperator>,
    /// False when the optimizer hit its iteration budget; the value is
    /// still the best found.
    pub converged: bool,
}

/// `rho_AB` with the `A` registers first, each block in parent order.
pub(crate) struct Bipartite {
    pub rho: Mat,
    pub b: RegisterSpace,
    pub da: usize,
    pub db: usize,
}

pub(crate) fn bipartite(rho: &DensityOperator, a: &[&str], b: &[&str]) -> Result<Bipartite> {
    disjoint(a, b)?;
    if a.is_empty() {
        return Err(Error::Precondition("no registers to condition".into()));
    }
    let sa = rho.space().subspace(a)?;
    let sb = rho.space().subspace(b)?;
    let keep: Vec<&str> = a.iter().chain(b.iter()).copied().collect();
    let reduced = rho.partial_trace(&keep)?;
    let target = sa.concat(&sb)?;
    let r = reduced.permuted(&target)?;
    Ok(Bipartite {
        rho: r.into_matrix(),
        da: sa.dim(),
        db: sb.dim(),
        b: sb,
    })
}

/// `tr_A` of an operator on `A ⊗ B` with `A` first.
pub(crate) fn ptrace_first(m: &Mat, da: usize, db: usize) -> Mat {
    let mut out = Mat::zeros(db, db);
    for a in 0..da {
        out += m.view((a * db, a * db), (db, db));
    }
    out
}

pub(crate) fn id_kron(da: usize, x: &Mat) -> Mat {
    kron(&Mat::identity(da, da), x)
}

pub fn vn_conditional(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
) -> Result<ConditionalEntropyResult> {
    let bp = bipartite(rho, a, b)?;
    let rb = ptrace_first(&bp.rho, bp.da, bp.db);
    Ok(ConditionalEntropyResult {
        value: entropy_of(&bp.rho) - entropy_of(&rb),
        alpha: Order::Finite(1.0),
        arrow: Arrow::Down,
        family: EntropyFamily::Vn,
        optimizer_sigma: None,
        converged: true,
    })
}

fn renyi_divergence(p: &Mat, q: &Mat, alpha: Order, family: EntropyFamily) -> Result<f64> {
    let v = match family {
        EntropyFamily::Sandwiched => sandwiched_renyi_mat(p, q, alpha)?,
        EntropyFamily::Petz => match alpha {
            Order::Finite(a) => petz_renyi_mat(p, q, a)?,
            Order::Infinity => return Err(domain("alpha", f64::INFINITY, "(0,1) ∪ (1,2)")),
        },
        _ => {
            return Err(Error::Precondition(
                "Rényi conditional entropy needs the Petz or sandwiched family".into(),
            ))
        }
    };
    v.finite("conditional divergence")
}

/// `-D_alpha(rho_AB || I_A ⊗ rho_B)`.
pub fn h_down_alpha(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    alpha: impl Into<Order>,
    family: EntropyFamily,
) -> Result<ConditionalEntropyResult> {
    let alpha = alpha.into();
    let bp = bipartite(rho, a, b)?;
    let rb = ptrace_first(&bp.rho, bp.da, bp.db);
    let d = renyi_divergence(&bp.rho, &id_kron(bp.da, &rb), alpha, family)?;
    Ok(ConditionalEntropyResult {
        value: -d,
        alpha,
        arrow: Arrow::Down,
        family,
        optimizer_sigma: None,
        converged: true,
    })
}

/// Real coordinates of a Hermitian matrix: the diagonal, then
/// `sqrt(2) Re` and `sqrt(2) Im` of each upper off-diagonal entry. The map is
/// an isometry for the Hilbert–Schmidt inner product.
pub(crate) fn herm_to_coords(m: &Mat) -> Vec<f64> {
    let d = m.nrows();
    let mut x = Vec::with_capacity(d * d);
    for i in 0..d {
        x.push(m[(i, i)].re);
    }
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            x.push(r2 * m[(i, j)].re);
            x.push(r2 * m[(i, j)].im);
        }
    }
    x
}

pub(crate) fn coords_to_herm(x: &[f64], d: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(x[i], 0.0);
    }
    let r2 = std::f64::consts::SQRT_2;
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = C64::new(x[k], x[k + 1]) / r2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Fréchet derivative of the spectral function `g` at `U diag(l) U^dagger`
/// applied to `t`, by divided differences.
fn daleckii_krein(
    e: &Eigh,
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    t: &Mat,
) -> Mat {
    let u = &e.vectors;
    let mut m = u.adjoint() * t * u;
    let l = &e.values;
    let n = l.len();
    for i in 0..n {
        for j in 0..n {
            let gap = l[i] - l[j];
            let gamma = if gap.abs() > 1e-9 * l[i].abs().max(l[j].abs()).max(1e-300) {
                (g(l[i]) - g(l[j])) / gap
            } else {
                dg(0.5 * (l[i] + l[j]))
            };
            m[(i, j)] *= gamma;
        }
    }
    u * m * u.adjoint()
}

/// Objective for the up-arrow optimization, minimized over `sigma`.
enum UpObjective {
    /// `(1/(alpha-1)) ln tr[(rho^{1/2} (I ⊗ sigma)^{-s} rho^{1/2})^a]` scaled
    /// by `coef`.
    Sandwiched {
        sqrt_rho: Mat,
        s: f64,
        a: f64,
        coef: f64,
    },
    /// `(1/(alpha-1)) ln tr(R sigma^{1-alpha})` with `R = tr_A rho^alpha`.
    Petz { r: Mat, alpha: f64 },
}

impl UpObjective {
    /// Value and Hermitian gradient with respect to `sigma`.
    fn eval(&self, sig: &Eigh, da: usize, db: usize) -> (f64, Mat) {
        match self {
            UpObjective::Sandwiched {
                sqrt_rho,
                s,
                a,
                coef,
            } => {
                let (s, a) = (*s, *a);
                let gs = sig.apply(|l| l.powf(-s));
                let x = hermitize(&(sqrt_rho * id_kron(da, &gs) * sqrt_rho));
                let ex = eigh(&x);
                let top = ex.values.last().copied().unwrap_or(0.0);
                if !(top > 0.0) {
                    return (f64::INFINITY, Mat::zeros(db, db));
                }
                let thr = 1e-14 * top;
                let sum: f64 = ex
                    .values
                    .iter()
                    .filter(|&&m| m > thr)
                    .map(|&m| (m / top).powf(a))
                    .sum();
                let ln_f = a * top.ln() + sum.ln();
                let xt = ex.apply(|m| {
                    if m > thr {
                        (m / top).powf(a - 1.0) / (top * sum)
                    } else {
                        0.0
                    }
                });
                let t = ptrace_first(&hermitize(&(sqrt_rho * xt * sqrt_rho)), da, db);
                let grad = daleckii_krein(sig, |l| l.powf(-s), |l| -s * l.powf(-s - 1.0), &t);
                (coef * ln_f, grad.scale(coef * a))
            }
            UpObjective::Petz { r, alpha } => {
                let e = 1.0 - alpha;
                let gs = sig.apply(|l| l.powf(e));
                let f = crate::linalg::trace_product(r, &gs);
                if !(f > 0.0) {
                    return (f64::INFINITY, Mat::zeros(db, db));
                }
                let grad = daleckii_krein(sig, |l| l.powf(e), |l| e * l.powf(e - 1.0), r);
                let coef = 1.0 / (alpha - 1.0);
                (coef * f.ln(), grad.scale(coef / f))
            }
        }
    }

    /// Value and coordinate gradient as a function of `H`, where
    /// `sigma = exp(H) / tr exp(H)`.
    fn eval_coords(&self, x: &[f64], da: usize, db: usize) -> (f64, Vec<f64>) {
        let h = coords_to_herm(x, db);
        let eh = eigh(&h);
        let top = eh.values.last().copied().unwrap_or(0.0);
        let w: Vec<f64> = eh.values.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        let sig = Eigh {
            values: w.iter().map(|v| v / z).collect(),
            vectors: eh.vectors.clone(),
        };
        if sig.values.iter().any(|&v| !(v > 0.0)) {
            return (f64::INFINITY, vec![0.0; x.len()]);
        }
        let (val, g) = self.eval(&sig, da, db);
        if !val.is_finite() {
            return (f64::INFINITY, vec![0.0; x.len()]);
        }
        // Chain rule through the normalized exponential.
        let sigma = sig.apply(|v| v);
        let tr_gs = crate::linalg::trace_product(&g, &sigma);
        let u = &eh.vectors;
        let mut m = u.adjoint() * &g * u;
        for i in 0..db {
            for j in 0..db {
                let gap = eh.values[i] - eh.values[j];
                let gamma = if gap.abs() > 1e-9 {
                    (w[i] - w[j]) / gap / z
                } else {
                    0.5 * (w[i] + w[j]) / z
                };
                m[(i, j)] *= gamma;
            }
        }
        let gh = hermitize(&(u * m * u.adjoint() - sigma.scale(tr_gs)));
        (val, herm_to_coords(&gh))
    }
}

/// Restricts `rho_AB` to `A ⊗ supp(rho_B)`. The optimal `sigma_B` of every
/// up-arrow entropy may be taken inside `supp(rho_B)`.
fn restrict_to_b_support(bp: &Bipartite) -> (Mat, Mat) {
    let rb = ptrace_first(&bp.rho, bp.da, bp.db);
    let v = eigh(&rb).support_basis(SUPPORT_TOL);
    let iv = id_kron(bp.da, &v);
    (hermitize(&(iv.adjoint() * &bp.rho * &iv)), v)
}

fn sigma_from_coords(x: &[f64], d: usize) -> Mat {
    let e = eigh(&coords_to_herm(x, d));
    let top = e.values.last().copied().unwrap_or(0.0);
    let w: Vec<f64> = e.values.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut m = e.vectors.clone();
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] *= w[j] / z;
        }
    }
    hermitize(&(m * e.vectors.adjoint()))
}

fn coords_from_sigma(sigma: &Mat) -> Vec<f64> {
    herm_to_coords(&eigh(sigma).apply(|l| l.max(1e-300).ln()))
}

/// Options for the up-arrow optimizer.
#[derive(Clone, Copy, Debug)]
pub struct UpOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for UpOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 0x5eed,
        }
    }
}

struct Run {
    x: Vec<f64>,
    value: f64,
    converged: bool,
}

fn optimize_up(
    obj: &UpObjective,
    starts: &[Vec<f64>],
    da: usize,
    k: usize,
    short_iters: usize,
    polish_iters: usize,
) -> Run {
    let f = |x: &[f64]| obj.eval_coords(x, da, k);
    let mut best: Option<Run> = None;
    let mut agreeing = 0;
    for x0 in starts {
        let m = bfgs(f, x0, short_iters, 1e-12);
        let tol = 1e-10 * m.value.abs().max(1.0);
        match &best {
            Some(b) if (m.value - b.value).abs() <= tol => agreeing += 1,
            Some(b) if m.value > b.value => {}
            _ => agreeing = 1,
        }
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(Run {
                x: m.x,
                value: m.value,
                converged: m.converged,
            });
        }
        // The objective is quasi-convex in sigma, so restarts only guard
        // against stalls; three converged starts at one value settle it.
        if agreeing >= 3 {
            break;
        }
    }
    let b = best.expect("at least one start");
    let m = bfgs(f, &b.x, polish_iters, 1e-12);
    if m.value <= b.value {
        Run {
            x: m.x,
            value: m.value,
            converged: m.converged,
        }
    } else {
        b
    }
}

/// `sup_sigma -D_alpha(rho_AB || I_A ⊗ sigma_B)` by quasi-Newton ascent over
/// full-rank `sigma_B = exp(H)/tr exp(H)` from `rho_B` and random starts.
/// The sandwiched family at `alpha = inf` follows a `p`-norm continuation
/// and reports `-D_max` at the final `sigma_B`.
pub fn h_up_alpha(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    alpha: impl Into<Order>,
    family: EntropyFamily,
) -> Result<ConditionalEntropyResult> {
    h_up_alpha_with(rho, a, b, alpha, family, UpOptions::default())
}

pub fn h_up_alpha_with(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    alpha: impl Into<Order>,
    family: EntropyFamily,
    opts: UpOptions,
) -> Result<ConditionalEntropyResult> {
    let alpha = alpha.into();
    match (family, alpha) {
        (EntropyFamily::Sandwiched, Order::Finite(x)) if !(x >= 0.5 && x != 1.0) => {
            return Err(domain("alpha", x, "[1/2,1) ∪ (1,inf]"))
        }
        (EntropyFamily::Petz, Order::Finite(x)) if !(x > 0.0 && x < 2.0 && x != 1.0) => {
            return Err(domain("alpha", x, "(0,1) ∪ (1,2)"))
        }
        (EntropyFamily::Petz, Order::Infinity) => {
            return Err(domain("alpha", f64::INFINITY, "(0,1) ∪ (1,2)"))
        }
        (EntropyFamily::Vn | EntropyFamily::Min, _) => {
            return Err(Error::Precondition(
                "up-arrow entropy needs the Petz or sandwiched family".into(),
            ))
        }
        _ => {}
    }
    let bp = bipartite(rho, a, b)?;
    let (r, v) = restrict_to_b_support(&bp);
    let da = bp.da;
    let k = v.ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rb = ptrace_first(&r, da, k);
    let rb_norm = rb.unscale(real_trace(&rb));
    let mut starts = vec![coords_from_sigma(&rb_norm)];
    let space_k = RegisterSpace::new(&[("B", k)])?;
    for _ in 1..opts.restarts.max(1) {
        let s = random::density(&mut rng, space_k.clone(), None)?;
        starts.push(coords_from_sigma(s.matrix()));
    }

    let (sigma_k, converged) = if k == 1 {
        (Mat::identity(1, 1), true)
    } else {
        match (family, alpha) {
            (EntropyFamily::Sandwiched, Order::Finite(x)) => {
                let obj = UpObjective::Sandwiched {
                    sqrt_rho: mat_power(&r, 0.5),
                    s: (x - 1.0) / x,
                    a: x,
                    coef: 1.0 / (x - 1.0),
                };
                let run = optimize_up(&obj, &starts, da, k, 40, 400);
                (sigma_from_coords(&run.x, k), run.converged)
            }
            (EntropyFamily::Petz, Order::Finite(x)) => {
                let r_b = ptrace_first(&mat_power(&r, x), da, k);
                let obj = UpObjective::Petz {
                    r: hermitize(&r_b),
                    alpha: x,
                };
                let run = optimize_up(&obj, &starts, da, k, 40, 400);
                (sigma_from_coords(&run.x, k), run.converged)
            }
            _ => {
                let sqrt_rho = mat_power(&r, 0.5);
                let dmax_at = |s: &Mat| -> f64 {
                    max_relative_entropy_mat(&r, &hermitize(&kron(&Mat::identity(da, da), s)))
                        .map(|b| b.value())
                        .unwrap_or(f64::INFINITY)
                };
                let mut p = 2.0;
                let mut x = starts[0].clone();
                let mut best = (f64::INFINITY, sigma_from_coords(&x, k));
                let mut converged = true;
                let mut first = true;
                while p <= (1u64 << 20) as f64 {
                    let obj = UpObjective::Sandwiched {
                        sqrt_rho: sqrt_rho.clone(),
                        s: 1.0,
                        a: p,
                        coef: 1.0 / p,
                    };
                    let run = if first {
                        optimize_up(&obj, &starts, da, k, 40, 300)
                    } else {
                        optimize_up(&obj, &[x.clone()], da, k, 0, 300)
                    };
                    first = false;
                    x = run.x;
                    converged = run.converged;
                    let s = sigma_from_coords(&x, k);
                    let d = dmax_at(&s);
                    if d < best.0 {
                        best = (d, s);
                    }
                    p *= 2.0;
                }
                (best.1, converged)
            }
        }
    };

    let sigma_full = hermitize(&(&v * &sigma_k * v.adjoint()));
    let q = id_kron(da, &sigma_full);
    let value = match alpha {
        Order::Infinity => -max_relative_entropy_mat(&bp.rho, &q)?.finite("D_max")?,
        _ => -renyi_divergence(&bp.rho, &q, alpha, family)?,
    };
    // rho_B is feasible, so never report less than the down-arrow value.
    let down = match alpha {
        Order::Infinity => None,
        _ => {
            let rbf = ptrace_first(&bp.rho, da, bp.db);
            let rbf = rbf.unscale(real_trace(&rbf));
            Some(-renyi_divergence(&bp.rho, &id_kron(da, &rbf), alpha, family)?)
        }
    };
    let (value, sigma_full) = match down {
        Some(d) if d > value => {
            let rbf = ptrace_first(&bp.rho, da, bp.db);
            (d, rbf.unscale(real_trace(&rbf)))
        }
        _ => (value, sigma_full),
    };
    Ok(ConditionalEntropyResult {
        value,
        alpha,
        arrow: Arrow::Up,
        family,
        optimizer_sigma: Some(DensityOperator::new(bp.b.clone(), sigma_full)?),
        converged,
    })
}

/// Primal and dual certificates of the min-entropy program
/// `min tr sigma_B s.t. I_A ⊗ sigma_B >= rho_AB`.
#[derive(Clone, Debug)]
pub struct HminCertificate {
    /// `tr sigma_B` of a strictly feasible point; `-log` of it lower-bounds
    /// the min-entropy.
    pub primal: f64,
    /// `tr(rho X)` for a dual-feasible `X`; `-log` of it upper-bounds the
    /// min-entropy.
    pub dual: f64,
    pub sigma: Mat,
    /// Smallest eigenvalue of `I ⊗ sigma - rho`.
    pub feasibility: f64,
    pub outer_iterations: usize,
}

fn cholesky_inverse_logdet(s: &Mat) -> Option<(Mat, f64)> {
    let c = hermitize(s).cholesky()?;
    let l = c.l();
    let logdet: f64 = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    Some((c.inverse(), logdet))
}

/// Log-det barrier Newton method for the min-entropy program on `A ⊗ B`
/// with `A` first.
pub(crate) fn hmin_barrier(rho: &Mat, da: usize, db: usize) -> Result<HminCertificate> {
    let m = (da * db) as f64;
    let kdim = db * db;
    let basis: Vec<Mat> = (0..kdim)
        .map(|k| {
            let mut e = vec![0.0; kdim];
            e[k] = 1.0;
            coords_to_herm(&e, db)
        })
        .collect();
    let lifted: Vec<Mat> = basis.iter().map(|e| id_kron(da, e)).collect();
    let tr_e = herm_to_coords(&Mat::identity(db, db));

    let top = eigh(rho).values.last().copied().unwrap_or(0.0).max(0.0);
    let mut y = herm_to_coords(&Mat::identity(db, db).scale(1.1 * top + 1e-9));
    let slack = |y: &[f64]| hermitize(&(id_kron(da, &coords_to_herm(y, db)) - rho));
    let phi = |t: f64, y: &[f64]| -> Option<f64> {
        let (_, logdet) = cholesky_inverse_logdet(&slack(y))?;
        Some(t * y.iter().zip(&tr_e).map(|(a, b)| a * b).sum::<f64>() - logdet)
    };
    let mut t = 1.0;
    let mut outer = 0;
    loop {
        outer += 1;
        for _ in 0..200 {
            let (sinv, _) = cholesky_inverse_logdet(&slack(&y))
                .ok_or_else(|| Error::NonConvergence("iterate left the feasible cone".into()))?;
            let tb = hermitize(&ptrace_first(&sinv, da, db));
            let tbc = herm_to_coords(&tb);
            let grad: Vec<f64> = (0..kdim).map(|k| t * tr_e[k] - tbc[k]).collect();
            let ms: Vec<Mat> = lifted.iter().map(|e| &sinv * e).collect();
            let mut hess = nalgebra::DMatrix::<f64>::zeros(kdim, kdim);
            for i in 0..kdim {
                for j in i..kdim {
                    let mut s = 0.0;
                    let (a, b) = (&ms[i], &ms[j]);
                    for p in 0..a.nrows() {
                        for q in 0..a.ncols() {
                            s += (a[(p, q)] * b[(q, p)]).re;
                        }
                    }
                    hess[(i, j)] = s;
                    hess[(j, i)] = s;
                }
            }
            let g = nalgebra::DVector::from_vec(grad);
            let step = match hess.clone().cholesky() {
                Some(c) => -c.solve(&g),
                None => -&g,
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 < 1e-13 {
                break;
            }
            let f0 = phi(t, &y).unwrap_or(f64::INFINITY);
            let mut s = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let yn: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + s * b).collect();
                if let Some(fn_) = phi(t, &yn) {
                    if fn_ <= f0 - 0.25 * s * decrement {
                        y = yn;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if m / t < 1e-9 * m {
            break;
        }
        t *= 5.0;
        if outer > 60 {
            return Err(Error::NonConvergence("barrier schedule exhausted".into()));
        }
    }
    let sigma = hermitize(&coords_to_herm(&y, db));
    let s = slack(&y);
    let feasibility = eigh(&s).values[0];
    let (sinv, _) = cholesky_inverse_logdet(&s)
        .ok_or_else(|| Error::NonConvergence("final iterate infeasible".into()))?;
    let x = sinv.unscale(t);
    let tb = hermitize(&ptrace_first(&x, da, db));
    let n = id_kron(da, &mat_power(&tb, -0.5));
    let xd = hermitize(&(&n * x * &n));
    let dual = crate::linalg::trace_product(rho, &xd);
    Ok(HminCertificate {
        primal: real_trace(&sigma),
        dual,
        sigma,
        feasibility,
        outer_iterations: outer,
    })
}

/// Min-entropy with its primal/dual certificate.
pub fn h_min_certified(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
) -> Result<(ConditionalEntropyResult, HminCertificate)> {
    let bp = bipartite(rho, a, b)?;
    let cert = hmin_barrier(&bp.rho, bp.da, bp.db)?;
    if cert.feasibility < -1e-8 {
        return Err(Error::Certificate(format!(
            "I ⊗ sigma - rho has eigenvalue {:e}",
            cert.feasibility
        )));
    }
    let sigma = DensityOperator::new(bp.b.clone(), cert.sigma.unscale(cert.primal))?;
    Ok((
        ConditionalEntropyResult {
            value: -cert.primal.log2(),
            alpha: Order::Infinity,
            arrow: Arrow::Up,
            family: EntropyFamily::Min,
            optimizer_sigma: Some(sigma),
            converged: true,
        },
        cert,
    ))
}

pub fn h_min(rho: &DensityOperator, a: &[&str], b: &[&str]) -> Result<ConditionalEntropyResult> {
    Ok(h_min_certified(rho, a, b)?.0)
}

/// `D(rho || ⊗_k rho_{X_k})` over the union of the partition.
pub fn multipartite_mi(rho: &DensityOperator, partition: &[&[&str]]) -> Result<f64> {
    let all: Vec<&str> = partition.iter().flat_map(|p| p.iter().copied()).collect();
    let space = rho.space().subspace(&all)?;
    if space.len() != all.len() {
        return Err(Error::DuplicateLabel("partition blocks overlap".into()));
    }
    let reduced = rho.partial_trace(&all)?;
    let mut product: Option<DensityOperator> = None;
    for block in partition {
        let m = rho.partial_trace(block)?;
        product = Some(match product {
            None => m,
            Some(p) => tensor_product(&p, &m)?,
        });
    }
    let product = product
        .ok_or_else(|| Error::Precondition("empty partition".into()))?
        .permuted(reduced.space())?;
    relative_entropy_mat(reduced.matrix(), product.matrix())?.finite("mutual information")
}

/// The state `nu` of the chain rule together with both sides of the
/// identity it certifies.
#[derive(Clone, Debug)]
pub struct ChainRuleState {
    pub nu: DensityOperator,
    /// `D(rho_{A1B} || I ⊗ sigma_B) - D(rho_{A1A2B} || I ⊗ sigma_B)`.
    pub lhs: f64,
    /// `H_down(A2 | A1 B)_nu`.
    pub rhs: f64,
}

/// Builds `nu_{A1B} = (rho^{1/2} sigma^{-alpha'} rho^{1/2})^alpha / tr(...)`
/// and `nu = nu_{A1B}^{1/2} rho_{A2|A1B} nu_{A1B}^{1/2}`, restricted to the
/// support of `rho_{A1B}`, and checks the chain-rule identity to 1e-7.
pub fn chain_rule_nu_state(
    rho: &DensityOperator,
    a1: &[&str],
    a2: &[&str],
    b: &[&str],
    sigma_b: &DensityOperator,
    alpha: f64,
) -> Result<ChainRuleState> {
    if !(alpha >= 0.5 && alpha != 1.0 && alpha.is_finite()) {
        return Err(domain("alpha", alpha, "[1/2,1) ∪ (1,inf)"));
    }
    disjoint(a1, a2)?;
    disjoint(a1, b)?;
    disjoint(a2, b)?;
    let s1 = rho.space().subspace(a1)?;
    let s2 = rho.space().subspace(a2)?;
    let sb = rho.space().subspace(b)?;
    if sigma_b.space() != &sb {
        return Err(Error::SpaceMismatch);
    }
    let keep: Vec<&str> = a1.iter().chain(a2).chain(b).copied().collect();
    let full = s1.concat(&s2)?.concat(&sb)?;
    let r = rho.partial_trace(&keep)?.permuted(&full)?;
    let a1b_labels: Vec<&str> = a1.iter().chain(b).copied().collect();
    let r1b = r.partial_trace(&a1b_labels)?;
    let s1b = r1b.space().clone();
    let ap = (alpha - 1.0) / alpha;

    let sig_full_1b = embed(sigma_b.matrix(), &sb, &s1b)?;
    let sig_full = embed(sigma_b.matrix(), &sb, &full)?;
    let lhs = sandwiched_renyi_mat(r1b.matrix(), &sig_full_1b, Order::Finite(alpha))?
        .finite("D(rho_A1B || I ⊗ sigma)")?
        - sandwiched_renyi_mat(r.matrix(), &sig_full, Order::Finite(alpha))?
            .finite("D(rho || I ⊗ sigma)")?;

    let sqrt_r1b = mat_power(r1b.matrix(), 0.5);
    let k = hermitize(&(&sqrt_r1b * mat_power(&sig_full_1b, -ap) * &sqrt_r1b));
    let ka = mat_power(&k, alpha);
    let nu1b = hermitize(&ka.unscale(real_trace(&ka)));

    let inv_half = embed(&mat_power(r1b.matrix(), -0.5), &s1b, &full)?;
    let cond = hermitize(&(&inv_half * r.matrix() * &inv_half));
    let nu_half = embed(&mat_power(&nu1b, 0.5), &s1b, &full)?;
    let nu = hermitize(&(&nu_half * cond * &nu_half));
    let nu = DensityOperator::new(full.clone(), nu)?;

    let nu1b_full = embed(&nu1b, &s1b, &full)?;
    let rhs = -sandwiched_renyi_mat(nu.matrix(), &nu1b_full, Order::Finite(alpha))?
        .finite("D(nu || I ⊗ nu_A1B)")?;
    if (lhs - rhs).abs() > 1e-7 {
        return Err(Error::Certificate(format!(
            "chain-rule identity off by {:e}",
            lhs - rhs
        )));
    }
    Ok(ChainRuleState { nu, lhs, rhs })
}

/// Closed-form Petz up-arrow entropy
/// `(alpha/(1-alpha)) log tr[(tr_A rho^alpha)^{1/alpha}]`, used as an oracle.
pub fn petz_up_closed_form(rho: &DensityOperator, a: &[&str], b: &[&str], alpha: f64) -> Result<f64> {
    let bp = bipartite(rho, a, b)?;
    let rb = ptrace_first(&mat_power(&bp.rho, alpha), bp.da, bp.db);
    let s: f64 = eigh(&rb)
        .values
        .iter()
        .map(|&l| scalar_power(l.max(0.0), 1.0 / alpha))
        .sum();
    Ok(alpha / (1.0 - alpha) * s.log2() - real_trace(&bp.rho).log2() / (alpha - 1.0))
}
