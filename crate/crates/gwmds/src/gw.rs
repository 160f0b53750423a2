//! Gromov-Wasserstein discrepancy and GW-based multidimensional scaling.
//!
//! The squared-loss GW objective between relational matrices DX (n x n) and
//! DY (m x m) over a coupling pi is evaluated through its factored
//! contraction: with r, c the marginals of pi,
//!
//! ```text
//! F(pi) = <DX.^2 r, r> + <DY.^2 c, c> - 2 <DX pi DY, pi>
//! ```
//!
//! which is O(n^2 m + n m^2) instead of the O(n^2 m^2) quadruple sum.
//! [`gw_distance`] minimizes F by conditional gradient: each step solves the
//! linear transport problem for the current linearized cost and takes the
//! closed-form quadratic line-search step. [`gwmds_embed`] alternates one
//! such coupling pass with gradient descent on the embedding coordinates.

use ndarray::{Array1, Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingMeta};
use crate::error::{Error, Result};
use crate::geometry::classical_mds;
use crate::ot::{self, uniform_weights, Coupling};
use crate::par;
use crate::relational::RelationalMatrix;

/// Loss applied to distance discrepancies. Only the squared loss is
/// implemented; the enum leaves room for other convex losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GwLoss {
    #[default]
    Squared,
}

/// Inner linear-OT solver used by the conditional gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerOt {
    /// Exact for n*m <= 10^4, entropic beyond that.
    #[default]
    Auto,
    Exact,
    Entropic,
}

/// Problem size up to which [`InnerOt::Auto`] picks the exact solver.
pub const EXACT_SIZE_LIMIT: usize = 10_000;

/// Hyperparameters of the conditional-gradient GW solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GwConfig {
    pub loss: GwLoss,
    pub inner_ot: InnerOt,
    /// Entropic regularization; `None` resolves to 5e-3 x median of the
    /// first linearized cost.
    pub epsilon: Option<f64>,
    pub outer_max_iter: usize,
    /// Relative objective-change tolerance of the conditional gradient.
    pub outer_tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for GwConfig {
    fn default() -> Self {
        Self {
            loss: GwLoss::Squared,
            inner_ot: InnerOt::Auto,
            epsilon: None,
            outer_max_iter: 200,
            outer_tol: 1e-8,
            n_restarts: 3,
            seed: 0,
        }
    }
}

impl GwConfig {
    fn validate(&self) -> Result<()> {
        if self.outer_tol <= 0.0 {
            return Err(Error::InvalidConfig("outer_tol must be positive".into()));
        }
        if self.n_restarts == 0 {
            return Err(Error::InvalidConfig("n_restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a GW discrepancy computation.
#[derive(Debug, Clone)]
pub struct GwResult {
    pub coupling: Coupling,
    /// Squared GW value, clamped to zero from below.
    pub gw_sq: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Embedding initialization strategy.
#[derive(Debug, Clone, Default)]
pub enum MdsInit {
    /// Deterministic classical-MDS start (strong basin for metric data).
    #[default]
    ClassicalMds,
    /// Seeded Gaussian coordinates with scale mean(DX)/sqrt(q).
    RandomGaussian,
    /// Caller-supplied n x q coordinates.
    Provided(Array2<f64>),
}

/// Hyperparameters of the embedding optimization.
#[derive(Debug, Clone)]
pub struct MdsConfig {
    pub embed_dim: usize,
    /// Step size; `None` resolves to 1e-2 x mean(DX). The step is applied to
    /// the sample-normalized gradient n * dF/dY so its scale does not depend
    /// on the sample count.
    pub learning_rate: Option<f64>,
    pub max_epochs: usize,
    /// Relative objective-change tolerance between accepted epochs.
    pub epoch_tol: f64,
    /// Gradient-descent steps on Y per epoch (one coupling pass per epoch).
    pub grad_steps_per_epoch: usize,
    pub init: MdsInit,
    pub seed: u64,
}

impl MdsConfig {
    pub fn new(embed_dim: usize) -> Self {
        Self {
            embed_dim,
            learning_rate: None,
            max_epochs: 200,
            epoch_tol: 1e-6,
            grad_steps_per_epoch: 10,
            init: MdsInit::ClassicalMds,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::InvalidConfig("embed_dim must be >= 1".into()));
        }
        if let Some(lr) = self.learning_rate {
            if lr <= 0.0 {
                return Err(Error::InvalidConfig(
                    "learning_rate must be positive".into(),
                ));
            }
        }
        if self.epoch_tol <= 0.0 {
            return Err(Error::InvalidConfig("epoch_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Evaluate the squared-loss GW objective of a fixed coupling.
///
/// Pure evaluation through the factored contraction; marginals are taken
/// from the coupling itself. Tiny negative rounding residue is clamped.
pub fn gw_objective(dx: &RelationalMatrix, dy: &RelationalMatrix, pi: &Coupling) -> Result<f64> {
    if pi.n() != dx.n() || pi.m() != dy.n() {
        return Err(Error::ShapeMismatch {
            context: "gw_objective".into(),
            expected: format!("{} x {}", dx.n(), dy.n()),
            got: format!("{} x {}", pi.n(), pi.m()),
        });
    }
    let plan = pi.plan();
    let r: Array1<f64> = plan.sum_axis(ndarray::Axis(1));
    let c: Array1<f64> = plan.sum_axis(ndarray::Axis(0));
    let f1 = squared_dot(dx.values(), &r);
    let f2 = squared_dot(dy.values(), &c);
    let dxpidy = dx.values().dot(&plan.to_owned()).dot(&dy.values());
    let cross: f64 = dxpidy.iter().zip(plan.iter()).map(|(x, p)| x * p).sum();
    let obj = f1.dot(&r) + f2.dot(&c) - 2.0 * cross;
    Ok(if obj < 0.0 && obj > -1e-9 { 0.0 } else { obj })
}

/// (D .^2) w -- the constant blocks of the linearized cost.
fn squared_dot(d: ArrayView2<'_, f64>, w: &Array1<f64>) -> Array1<f64> {
    let n = d.nrows();
    Array1::from_shape_fn(n, |i| {
        d.row(i)
            .iter()
            .zip(w.iter())
            .map(|(x, wi)| x * x * wi)
            .sum()
    })
}

fn frob(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Closed-form step of the quadratic line search on [0, 1]:
/// minimizes a t^2 + b t.
fn line_search_step(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a + b < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Inner linear-OT solver with per-instance warm state.
enum InnerSolver {
    Exact,
    Entropic {
        epsilon: Option<f64>,
        f: Array1<f64>,
        g: Array1<f64>,
        cold: bool,
    },
}

/// Scaling iterations per entropic inner solve once the duals are warm.
/// Conditional gradient tolerates an inexact linear oracle, so the plan is
/// rounded back onto the polytope instead of iterating to high precision;
/// the duals keep converging across outer iterations.
const WARM_SINKHORN_BUDGET: usize = 300;
const COLD_SINKHORN_BUDGET: usize = 2000;

impl InnerSolver {
    fn resolve(choice: InnerOt, epsilon: Option<f64>, n: usize, m: usize) -> Self {
        let exact = match choice {
            InnerOt::Exact => true,
            InnerOt::Entropic => false,
            InnerOt::Auto => n * m <= EXACT_SIZE_LIMIT,
        };
        if exact {
            InnerSolver::Exact
        } else {
            InnerSolver::Entropic {
                epsilon,
                f: Array1::zeros(n),
                g: Array1::zeros(m),
                cold: true,
            }
        }
    }

    fn solve(
        &mut self,
        cost: &Array2<f64>,
        a: &Array1<f64>,
        b: &Array1<f64>,
    ) -> Result<Array2<f64>> {
        match self {
            InnerSolver::Exact => ot::solve_exact_raw(cost.view(), a, b),
            InnerSolver::Entropic {
                epsilon,
                f,
                g,
                cold,
            } => {
                let eps = *epsilon.get_or_insert_with(|| linearized_epsilon(cost));
                let budget = if *cold {
                    COLD_SINKHORN_BUDGET
                } else {
                    WARM_SINKHORN_BUDGET
                };
                let state = ot::sinkhorn(cost.view(), a, b, eps, budget, 1e-9, f, g);
                *f = state.f;
                *g = state.g;
                *cold = false;
                let plan = if state.converged {
                    state.plan
                } else {
                    ot::round_to_marginals(state.plan, a, b)
                };
                Ok(plan)
            }
        }
    }
}

/// Default regularization for a linearized GW cost: 2e-2 x median of the
/// cost shifted to be nonnegative (the shift does not change the plan).
/// Sharper values slow the scaling iterations several-fold for little gain
/// in the outer conditional-gradient step.
fn linearized_epsilon(cost: &Array2<f64>) -> f64 {
    let min = cost.iter().copied().fold(f64::INFINITY, f64::min);
    let mut shifted: Vec<f64> = cost.iter().map(|&v| v - min).collect();
    shifted.sort_by(f64::total_cmp);
    let median = shifted[shifted.len() / 2];
    let range = shifted.last().copied().unwrap_or(0.0);
    (2e-2 * median).max(1e-9 * range).max(1e-12)
}

fn restart_seed(base: u64, restart: usize) -> u64 {
    base.wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Initial coupling for restart `r`: the independent product, then the
/// identity (square case), then seeded random permutations.
fn initial_plan(r: usize, n: usize, m: usize, seed: u64) -> Array2<f64> {
    let a = uniform_weights(n);
    let b = uniform_weights(m);
    if r == 0 {
        return Coupling::product(&a, &b).plan().to_owned();
    }
    if n != m {
        // Non-square restarts: random positive matrix fitted to the marginals.
        let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, r));
        let mut plan = Array2::from_shape_fn((n, m), |_| rng.random_range(0.5..1.5));
        for _ in 0..500 {
            for i in 0..n {
                let s: f64 = plan.row(i).sum();
                for j in 0..m {
                    plan[[i, j]] *= a[i] / s;
                }
            }
            for j in 0..m {
                let s: f64 = plan.column(j).sum();
                for i in 0..n {
                    plan[[i, j]] *= b[j] / s;
                }
            }
        }
        for i in 0..n {
            let s: f64 = plan.row(i).sum();
            for j in 0..m {
                plan[[i, j]] *= a[i] / s;
            }
        }
        return plan;
    }
    if r == 1 {
        return Coupling::identity(n).plan().to_owned();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, r));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut plan = Array2::zeros((n, n));
    for (i, &j) in perm.iter().enumerate() {
        plan[[i, j]] = 1.0 / n as f64;
    }
    plan
}

struct CgOutcome {
    plan: Array2<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

/// Conditional-gradient minimization of the GW objective at fixed DX, DY.
fn conditional_gradient(
    dx: ArrayView2<'_, f64>,
    dy: ArrayView2<'_, f64>,
    mut plan: Array2<f64>,
    cfg: &GwConfig,
) -> Result<CgOutcome> {
    let n = dx.nrows();
    let m = dy.nrows();
    let a = uniform_weights(n);
    let b = uniform_weights(m);
    let f1 = squared_dot(dx, &a);
    let f2 = squared_dot(dy, &b);
    let constant = f1.dot(&a) + f2.dot(&b);
    let scale = constant.abs().max(1e-300);
    let mut inner = InnerSolver::resolve(cfg.inner_ot, cfg.epsilon, n, m);

    let mut dxpidy = dx.dot(&plan).dot(&dy);
    let mut objective = constant - 2.0 * frob(&dxpidy, &plan);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.outer_max_iter {
        iterations = it + 1;
        if objective <= 1e-15 * scale {
            objective = objective.max(0.0);
            converged = true;
            break;
        }
        let mut t_cost = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                t_cost[[i, j]] = f1[i] + f2[j] - 2.0 * dxpidy[[i, j]];
            }
        }
        let s = inner.solve(&t_cost, &a, &b)?;
        let delta = &s - &plan;
        let b_lin = 2.0 * frob(&t_cost, &delta);
        let dxsdy = dx.dot(&s).dot(&dy);
        let a_quad = -2.0 * (frob(&dxsdy, &delta) - frob(&dxpidy, &delta));
        let step = line_search_step(a_quad, b_lin);
        if step == 0.0 {
            converged = true;
            break;
        }
        plan.scaled_add(step, &delta);
        let cache_delta = &dxsdy - &dxpidy;
        dxpidy.scaled_add(step, &cache_delta);
        let new_objective = constant - 2.0 * frob(&dxpidy, &plan);
        let change = (objective - new_objective).abs();
        objective = new_objective;
        if change <= cfg.outer_tol * objective.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    Ok(CgOutcome {
        plan,
        objective,
        iterations,
        converged,
    })
}

/// Exhaustive scan over the n! permutation couplings; the global optimum of
/// small symmetric instances sits at such a vertex, so seeding the solver
/// with the best one makes tiny problems reproducibly exact.
fn best_permutation_plan(dx: ArrayView2<'_, f64>, dy: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = dx.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let mut best_cost = f64::INFINITY;
    fn visit(
        perm: &mut Vec<usize>,
        k: usize,
        dx: &ArrayView2<'_, f64>,
        dy: &ArrayView2<'_, f64>,
        best_cost: &mut f64,
        best_perm: &mut Vec<usize>,
    ) {
        let n = perm.len();
        if k == n {
            let mut cost = 0.0;
            for i in 0..n {
                for l in 0..n {
                    let diff = dx[[i, l]] - dy[[perm[i], perm[l]]];
                    cost += diff * diff;
                }
            }
            if cost < *best_cost {
                *best_cost = cost;
                best_perm.clone_from(perm);
            }
            return;
        }
        for i in k..n {
            perm.swap(k, i);
            visit(perm, k + 1, dx, dy, best_cost, best_perm);
            perm.swap(k, i);
        }
    }
    visit(&mut perm, 0, &dx, &dy, &mut best_cost, &mut best_perm);
    let mut plan = Array2::zeros((n, n));
    for (i, &j) in best_perm.iter().enumerate() {
        plan[[i, j]] = 1.0 / n as f64;
    }
    plan
}

/// Squared Gromov-Wasserstein discrepancy between two relational matrices
/// under uniform marginals, minimized over `cfg.n_restarts` starting plans.
/// The restart with the lowest objective wins; ties go to the lowest index.
pub fn gw_distance(
    dx: &RelationalMatrix,
    dy: &RelationalMatrix,
    cfg: &GwConfig,
) -> Result<GwResult> {
    cfg.validate()?;
    let n = dx.n();
    let m = dy.n();
    let mut plans: Vec<Array2<f64>> = (0..cfg.n_restarts)
        .map(|r| initial_plan(r, n, m, cfg.seed))
        .collect();
    if n == m && n <= 7 {
        plans.push(best_permutation_plan(dx.values(), dy.values()));
    }
    let outcomes: Vec<Result<CgOutcome>> = par::map_indices(plans.len(), |r| {
        conditional_gradient(dx.values(), dy.values(), plans[r].clone(), cfg)
    });
    let mut best: Option<CgOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        let replace = match &best {
            None => true,
            Some(b) => outcome.objective < b.objective,
        };
        if replace {
            best = Some(outcome);
        }
    }
    let best = best.expect("n_restarts >= 1");
    let coupling = Coupling::new(best.plan, uniform_weights(n), uniform_weights(m))?;
    Ok(GwResult {
        coupling,
        gw_sq: best.objective.max(0.0),
        converged: best.converged,
        iterations: best.iterations,
    })
}

/// Pairwise Euclidean distances of embedding rows as a plain array.
pub(crate) fn coords_distances(y: &Array2<f64>) -> Array2<f64> {
    let n = y.nrows();
    let q = y.ncols();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for d in 0..q {
                let diff = y[[i, d]] - y[[j, d]];
                acc += diff * diff;
            }
            let dist = acc.sqrt();
            out[[i, j]] = dist;
            out[[j, i]] = dist;
        }
    }
    out
}

/// Objective and gradient with respect to Y of the weighted multi-view GW
/// objective at fixed couplings:
/// sum_v lambda_v sum (DX_v[i,k] - DY[j,l])^2 pi_v[i,j] pi_v[k,l].
///
/// Returns the raw gradient dF/dY (no sample normalization applied).
pub fn embedding_objective_grad(
    views: &[RelationalMatrix],
    weights: &[f64],
    couplings: &[Coupling],
    y: &Array2<f64>,
) -> Result<(f64, Array2<f64>)> {
    if views.len() != weights.len() || views.len() != couplings.len() {
        return Err(Error::ShapeMismatch {
            context: "embedding_objective_grad".into(),
            expected: format!("{} views", views.len()),
            got: format!("{} weights, {} couplings", weights.len(), couplings.len()),
        });
    }
    let n = y.nrows();
    let dy = coords_distances(y);
    let mut objective = 0.0;
    let mut wqq = Array2::zeros((n, n));
    let mut msum = Array2::zeros((n, n));
    for ((dx, &w), pi) in views.iter().zip(weights).zip(couplings) {
        if pi.m() != n || dx.n() != pi.n() {
            return Err(Error::ShapeMismatch {
                context: "embedding_objective_grad coupling".into(),
                expected: format!("{} x {n}", dx.n()),
                got: format!("{} x {}", pi.n(), pi.m()),
            });
        }
        let plan = pi.plan().to_owned();
        let r: Array1<f64> = plan.sum_axis(ndarray::Axis(1));
        let c: Array1<f64> = plan.sum_axis(ndarray::Axis(0));
        let f1 = squared_dot(dx.values(), &r);
        let f2 = squared_dot(dy.view(), &c);
        let dxpi = dx.values().dot(&plan);
        let dxpidy = dxpi.dot(&dy);
        let cross: f64 = dxpidy.iter().zip(plan.iter()).map(|(x, p)| x * p).sum();
        objective += w * (f1.dot(&r) + f2.dot(&c) - 2.0 * cross);
        let m_v = plan.t().dot(&dxpi);
        for j in 0..n {
            for k in 0..n {
                wqq[[j, k]] += w * c[j] * c[k];
                msum[[j, k]] += w * m_v[[j, k]];
            }
        }
    }
    let grad = chain_gradient(&dy, &wqq, &msum, y);
    Ok((objective, grad))
}

/// Chain dF/dDY through DY_jk = ||y_j - y_k|| to the coordinates:
/// grad_j = 2 sum_k G_jk (y_j - y_k) / DY_jk with
/// G_jk = 2 (DY_jk wqq_jk - msum_jk).
fn chain_gradient(
    dy: &Array2<f64>,
    wqq: &Array2<f64>,
    msum: &Array2<f64>,
    y: &Array2<f64>,
) -> Array2<f64> {
    let n = y.nrows();
    let q = y.ncols();
    let mut grad = Array2::zeros((n, q));
    for j in 0..n {
        for k in 0..n {
            if k == j {
                continue;
            }
            let d = dy[[j, k]];
            if d <= 1e-15 {
                // Coincident points: the direction is undefined, skip.
                continue;
            }
            let g = 2.0 * (d * wqq[[j, k]] - msum[[j, k]]);
            let coef = 2.0 * g / d;
            for dim in 0..q {
                grad[[j, dim]] += coef * (y[[j, dim]] - y[[k, dim]]);
            }
        }
    }
    grad
}

/// Joint optimum of the shared-embedding problem.
pub(crate) struct SharedOptimum {
    pub y: Array2<f64>,
    pub couplings: Vec<Coupling>,
    /// Weighted GW objective at the returned iterate.
    pub objective: f64,
    /// Objective at initialization and after each accepted epoch
    /// (non-increasing).
    pub trace: Vec<f64>,
    pub converged: bool,
    pub epochs: usize,
}

/// Per-view working state of one restart.
struct ViewState {
    plan: Array2<f64>,
    /// DX_v . plan, maintained incrementally.
    dxpi: Array2<f64>,
    /// DX_v . plan . DY for the current coordinates.
    dxpidy: Array2<f64>,
    f1: Array1<f64>,
    /// <f1_v, a>: the DX-side constant of the factored objective.
    f1_dot: f64,
    inner: InnerSolver,
}

/// Block-coordinate minimization of the weighted multi-view GW objective:
/// per epoch, one conditional-gradient pass over every coupling (Jacobi
/// order, views independent) followed by gradient-descent steps on the
/// shared embedding.
pub(crate) fn optimize_shared_embedding(
    views: &[&RelationalMatrix],
    weights: &[f64],
    mds: &MdsConfig,
    gw: &GwConfig,
) -> Result<SharedOptimum> {
    mds.validate()?;
    gw.validate()?;
    let n = views[0].n();
    let q = mds.embed_dim;
    if q >= n {
        return Err(Error::DimensionTooLarge { q, n });
    }
    for (v, dx) in views.iter().enumerate() {
        if dx.n() != n {
            return Err(Error::ShapeMismatch {
                context: "optimize_shared_embedding".into(),
                expected: format!("{n}x{n}"),
                got: format!("{0}x{0}", dx.n()),
            }
            .in_view(v));
        }
    }

    let dbar = crate::relational::weighted_mean_relational(
        &views.iter().map(|d| (*d).clone()).collect::<Vec<_>>(),
        weights,
    )?;
    // Degenerate case: nothing to fit, the zero embedding is exact.
    if dbar.values().iter().all(|&v| v == 0.0) {
        return Ok(SharedOptimum {
            y: Array2::zeros((n, q)),
            couplings: views.iter().map(|_| Coupling::identity(n)).collect(),
            objective: 0.0,
            trace: Vec::new(),
            converged: true,
            epochs: 0,
        });
    }
    let base_rate = mds.learning_rate.unwrap_or(1e-2 * dbar.mean());
    let scale_mean = dbar.mean();

    let results: Vec<Result<SharedOptimum>> = par::map_indices(gw.n_restarts, |r| {
        let y0 = match (&mds.init, r) {
            (MdsInit::Provided(y), 0) => y.clone(),
            (MdsInit::ClassicalMds, 0) => classical_mds(&dbar, q)?.into_coords(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(mds.seed, r));
                let sigma = (scale_mean / (q as f64).sqrt()).max(1e-6);
                let normal = Normal::new(0.0, sigma).expect("positive scale");
                Array2::from_shape_fn((n, q), |_| normal.sample(&mut rng))
            }
        };
        let started = std::time::Instant::now();
        let out = run_restart(views, weights, y0, base_rate, mds, gw);
        if std::env::var_os("GWMDS_TRACE").is_some() {
            if let Ok(o) = &out {
                eprintln!(
                    "restart {r}: epochs={} converged={} objective={:.6e} [{:.1}s]",
                    o.epochs,
                    o.converged,
                    o.objective,
                    started.elapsed().as_secs_f64()
                );
            }
        }
        out
    });

    let mut best: Option<SharedOptimum> = None;
    for res in results {
        let res = res?;
        let replace = match &best {
            None => true,
            Some(b) => res.objective < b.objective,
        };
        if replace {
            best = Some(res);
        }
    }
    Ok(best.expect("n_restarts >= 1"))
}

fn run_restart(
    views: &[&RelationalMatrix],
    weights: &[f64],
    mut y: Array2<f64>,
    base_rate: f64,
    mds: &MdsConfig,
    gw: &GwConfig,
) -> Result<SharedOptimum> {
    let n = views[0].n();
    let a = uniform_weights(n);

    // Coupling updates preserve marginals, so the weighted outer-product
    // part of dF/dDY is the same constant matrix throughout.
    let wqq = Array2::from_elem((n, n), weights.iter().sum::<f64>() / (n * n) as f64);

    let mut dy = coords_distances(&y);
    let mut states: Vec<ViewState> = views
        .iter()
        .map(|dx| {
            let plan = Coupling::identity(n).plan().to_owned();
            let dxpi = dx.values().dot(&plan);
            let dxpidy = dxpi.dot(&dy);
            let f1 = squared_dot(dx.values(), &a);
            let f1_dot = f1.dot(&a);
            ViewState {
                plan,
                dxpi,
                dxpidy,
                f1,
                f1_dot,
                inner: InnerSolver::resolve(gw.inner_ot, gw.epsilon, n, n),
            }
        })
        .collect();

    let objective_at = |dy: &Array2<f64>, states: &[ViewState]| -> f64 {
        let f2 = squared_dot(dy.view(), &a);
        let f2_dot = f2.dot(&a);
        states
            .iter()
            .zip(weights)
            .map(|(st, &w)| {
                let cross = frob(&st.dxpidy, &st.plan);
                w * (st.f1_dot + f2_dot - 2.0 * cross)
            })
            .sum()
    };

    // Magnitude of the objective's constant part; cushions the accept and
    // stationarity checks against rounding noise near zero.
    let scale: f64 = states
        .iter()
        .zip(weights)
        .map(|(st, &w)| w * st.f1_dot)
        .sum::<f64>()
        .max(1e-300);

    let mut objective = objective_at(&dy, &states);
    let mut trace = vec![objective];
    let mut best_snapshot = (y.clone(), snapshot_plans(&states), objective);
    let mut rate = base_rate;
    let mut increase_streak = 0usize;
    let mut halvings = 0usize;
    let mut converged = objective <= 1e-15 * scale;
    let mut epochs = 0usize;

    for epoch in 0..mds.max_epochs {
        if converged {
            break;
        }
        epochs = epoch + 1;

        // Coupling phase: one conditional-gradient pass per view (Jacobi).
        let f2 = squared_dot(dy.view(), &a);
        let indexed: Vec<(usize, ViewState)> = states.into_iter().enumerate().collect();
        let updated = par_map_states(indexed, |v, mut st| {
            let dx = views[v].values();
            let nn = dx.nrows();
            let mut t_cost = Array2::zeros((nn, nn));
            for i in 0..nn {
                for j in 0..nn {
                    t_cost[[i, j]] = st.f1[i] + f2[j] - 2.0 * st.dxpidy[[i, j]];
                }
            }
            let s = st.inner.solve(&t_cost, &a, &a).map_err(|e| e.in_view(v))?;
            let delta = &s - &st.plan;
            let b_lin = 2.0 * frob(&t_cost, &delta);
            let dxs = dx.dot(&s);
            let dxsdy = dxs.dot(&dy);
            let a_quad = -2.0 * (frob(&dxsdy, &delta) - frob(&st.dxpidy, &delta));
            let step = line_search_step(a_quad, b_lin);
            if step > 0.0 {
                st.plan.scaled_add(step, &delta);
                let dxpi_delta = &dxs - &st.dxpi;
                st.dxpi.scaled_add(step, &dxpi_delta);
                let cache_delta = &dxsdy - &st.dxpidy;
                st.dxpidy.scaled_add(step, &cache_delta);
            }
            Ok(st)
        });
        let mut next_states = Vec::with_capacity(views.len());
        for st in updated {
            next_states.push(st?);
        }
        states = next_states;

        // Embedding phase: gradient descent at fixed couplings.
        let msum = {
            let mut acc: Array2<f64> = Array2::zeros((n, n));
            for (st, &w) in states.iter().zip(weights) {
                let m_v = st.plan.t().dot(&st.dxpi);
                acc.scaled_add(w, &m_v);
            }
            acc
        };
        for _ in 0..mds.grad_steps_per_epoch {
            let dy_step = coords_distances(&y);
            let grad = chain_gradient(&dy_step, &wqq, &msum, &y);
            y.scaled_add(-rate * n as f64, &grad);
        }

        // Refresh the DY-dependent caches and evaluate the epoch.
        dy = coords_distances(&y);
        for st in states.iter_mut() {
            st.dxpidy = st.dxpi.dot(&dy);
        }
        // Incremental caches accumulate rounding drift; refresh periodically.
        if epochs % 25 == 0 {
            for (st, dx) in states.iter_mut().zip(views) {
                st.dxpi = dx.values().dot(&st.plan);
                st.dxpidy = st.dxpi.dot(&dy);
            }
        }
        let new_objective = objective_at(&dy, &states);

        // A true GW objective is finite and nonnegative; anything else is a
        // numerically poisoned epoch (diverged coordinates) and is rejected.
        let plausible = new_objective.is_finite() && new_objective >= -1e-9 * scale;
        let denom = objective.abs().max(1e-12 * scale);
        if plausible && new_objective <= objective {
            let change = objective - new_objective;
            objective = new_objective;
            trace.push(objective);
            increase_streak = 0;
            if objective < best_snapshot.2 {
                best_snapshot = (y.clone(), snapshot_plans(&states), objective);
            }
            if change <= mds.epoch_tol * denom || objective <= 1e-15 * scale {
                converged = true;
                break;
            }
        } else if plausible && new_objective - objective <= mds.epoch_tol * denom {
            // Stationary within noise (typical when the start is already
            // optimal): stop without recording the non-improvement.
            converged = true;
            break;
        } else {
            increase_streak += 1;
            if increase_streak >= 10 {
                halvings += 1;
                if halvings > 5 {
                    return Err(Error::NotConverged {
                        context: "gwmds diverged: learning-rate budget exhausted".into(),
                        iterations: epochs,
                    });
                }
                rate *= 0.5;
                increase_streak = 0;
                // Restart the epoch from the best accepted state.
                y = best_snapshot.0.clone();
                restore_plans(&mut states, &best_snapshot.1, views);
                dy = coords_distances(&y);
                for st in states.iter_mut() {
                    st.dxpidy = st.dxpi.dot(&dy);
                }
                objective = best_snapshot.2;
            }
        }
    }

    let (best_y, best_plans, _) = best_snapshot;
    // Recompute the objective of the returned iterate from scratch so the
    // reported value is free of incremental-cache drift.
    let dy_final = coords_distances(&best_y);
    let f2_final = squared_dot(dy_final.view(), &a);
    let f2_dot = f2_final.dot(&a);
    let final_objective: f64 = best_plans
        .iter()
        .zip(views)
        .zip(weights)
        .map(|((plan, dx), &w)| {
            let f1_dot = squared_dot(dx.values(), &a).dot(&a);
            let dxpidy = dx.values().dot(plan).dot(&dy_final);
            w * (f1_dot + f2_dot - 2.0 * frob(&dxpidy, plan))
        })
        .sum();
    let couplings = best_plans
        .into_iter()
        .map(|plan| Coupling::new(plan, a.clone(), a.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SharedOptimum {
        y: best_y,
        couplings,
        objective: final_objective,
        trace,
        converged,
        epochs,
    })
}

// The coupling phase is data-parallel across views; results keep view order.
fn par_map_states<F>(slots: Vec<(usize, ViewState)>, f: F) -> Vec<Result<ViewState>>
where
    F: Fn(usize, ViewState) -> Result<ViewState> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        slots.into_par_iter().map(|(v, st)| f(v, st)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        slots.into_iter().map(|(v, st)| f(v, st)).collect()
    }
}

fn snapshot_plans(states: &[ViewState]) -> Vec<Array2<f64>> {
    states.iter().map(|st| st.plan.clone()).collect()
}

fn restore_plans(states: &mut [ViewState], plans: &[Array2<f64>], views: &[&RelationalMatrix]) {
    for ((st, plan), dx) in states.iter_mut().zip(plans).zip(views) {
        st.plan = plan.clone();
        st.dxpi = dx.values().dot(plan);
    }
}

/// GW-based multidimensional scaling: fit an embedding whose distance
/// matrix is GW-consistent with `dx`, then align rows to samples through
/// the barycentric map of the final coupling.
pub fn gwmds_embed(dx: &RelationalMatrix, mds: &MdsConfig, gw: &GwConfig) -> Result<Embedding> {
    let optimum = optimize_shared_embedding(&[dx], &[1.0], mds, gw)?;
    let aligned = optimum.couplings[0].barycentric_map(optimum.y.view())?;
    let ids = (0..dx.n()).map(|i| i.to_string()).collect();
    Embedding::new(
        aligned,
        ids,
        EmbeddingMeta {
            method: "gwmds".into(),
            seed: mds.seed,
            gw_sq: Some(optimum.objective.max(0.0)),
            iterations: optimum.epochs,
            converged: optimum.converged,
            ..Default::default()
        },
    )
}

/// Objective trace of a GW-MDS run (accepted epochs only).
pub fn gwmds_trace(dx: &RelationalMatrix, mds: &MdsConfig, gw: &GwConfig) -> Result<Vec<f64>> {
    Ok(optimize_shared_embedding(&[dx], &[1.0], mds, gw)?.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::{
        distance_correlation, pairwise_euclidean, MetricTag, SampleMatrix,
    };
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn random_relational(n: usize, rng: &mut ChaCha8Rng) -> RelationalMatrix {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = rng.random_range(0.1..4.0);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        RelationalMatrix::new(m, MetricTag::Precomputed).unwrap()
    }

    /// O(n^2 m^2) reference evaluation of the GW objective.
    fn quadruple_loop_objective(
        dx: &RelationalMatrix,
        dy: &RelationalMatrix,
        pi: &Coupling,
    ) -> f64 {
        let n = dx.n();
        let m = dy.n();
        let mut acc = 0.0;
        for i in 0..n {
            for l in 0..n {
                for j in 0..m {
                    for k in 0..m {
                        let diff = dx.values()[[i, l]] - dy.values()[[j, k]];
                        acc += diff * diff * pi.plan()[[i, j]] * pi.plan()[[l, k]];
                    }
                }
            }
        }
        acc
    }

    fn random_coupling(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Coupling {
        let a = uniform_weights(n);
        let b = uniform_weights(m);
        let mut plan = Array2::from_shape_fn((n, m), |_| rng.random_range(0.2..1.0));
        for _ in 0..400 {
            for i in 0..n {
                let s: f64 = plan.row(i).sum();
                for j in 0..m {
                    plan[[i, j]] *= a[i] / s;
                }
            }
            for j in 0..m {
                let s: f64 = plan.column(j).sum();
                for i in 0..n {
                    plan[[i, j]] *= b[j] / s;
                }
            }
        }
        Coupling::new(plan, a, b).unwrap()
    }

    #[test]
    fn objective_zero_for_identical_matrices_under_identity() {
        let dx = random_relational(5, &mut ChaCha8Rng::seed_from_u64(1));
        let pi = Coupling::identity(5);
        assert_abs_diff_eq!(gw_objective(&dx, &dx, &pi).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_hand_expanded_two_by_two() {
        let dx = RelationalMatrix::new(array![[0.0, 1.0], [1.0, 0.0]], MetricTag::Precomputed)
            .unwrap();
        let dy = RelationalMatrix::new(array![[0.0, 3.0], [3.0, 0.0]], MetricTag::Precomputed)
            .unwrap();
        let pi = Coupling::identity(2);
        // Sixteen-term sum collapses to 2 * (1-3)^2 * (1/2 * 1/2) = 2.
        assert_abs_diff_eq!(gw_objective(&dx, &dy, &pi).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_matches_quadruple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let n = rng.random_range(2..7);
            let m = rng.random_range(2..7);
            let dx = random_relational(n, &mut rng);
            let dy = random_relational(m, &mut rng);
            let pi = random_coupling(n, m, &mut rng);
            let fast = gw_objective(&dx, &dy, &pi).unwrap();
            let slow = quadruple_loop_objective(&dx, &dy, &pi);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-10);
        }
    }

    #[test]
    fn objective_nonnegative_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(2..6);
            let dx = random_relational(n, &mut rng);
            let dy = random_relational(n, &mut rng);
            let pi = random_coupling(n, n, &mut rng);
            assert!(gw_objective(&dx, &dy, &pi).unwrap() >= 0.0);
        }
    }

    #[test]
    fn gw_self_distance_is_zero() {
        let dx = random_relational(8, &mut ChaCha8Rng::seed_from_u64(4));
        let res = gw_distance(&dx, &dx, &GwConfig::default()).unwrap();
        assert!(res.gw_sq <= 1e-6, "self distance {}", res.gw_sq);
        assert!(res.converged);
    }

    #[test]
    fn gw_rotation_isometry_is_zero() {
        let m =
            crate::geometry::generate_manifold(crate::geometry::ManifoldKind::SCurve, 40, 0.0, 5)
                .unwrap();
        let views = crate::geometry::make_views(&m);
        let crate::relational::View::Samples(v1) = &views.views()[0] else {
            panic!("samples expected")
        };
        let dx = pairwise_euclidean(&m.points);
        let dy = pairwise_euclidean(v1);
        let res = gw_distance(&dx, &dy, &GwConfig::default()).unwrap();
        assert!(res.gw_sq <= 1e-6, "rotation gw {}", res.gw_sq);
    }

    #[test]
    fn gw_bounded_by_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let dx = random_relational(4, &mut rng);
            let dy = random_relational(4, &mut rng);
            let cfg = GwConfig {
                n_restarts: 6,
                ..GwConfig::default()
            };
            let res = gw_distance(&dx, &dy, &cfg).unwrap();

            let mut best = f64::INFINITY;
            let mut perm = [0usize, 1, 2, 3];
            heap_permutations(&mut perm, 4, &mut |p| {
                let mut plan = Array2::zeros((4, 4));
                for (i, &j) in p.iter().enumerate() {
                    plan[[i, j]] = 0.25;
                }
                let pi = Coupling::new(plan, uniform_weights(4), uniform_weights(4)).unwrap();
                let obj = gw_objective(&dx, &dy, &pi).unwrap();
                best = best.min(obj);
            });
            assert!(
                res.gw_sq <= best + 1e-9,
                "solver {} vs permutation minimum {best} (gap {})",
                res.gw_sq,
                res.gw_sq - best
            );
        }
    }

    fn heap_permutations(xs: &mut [usize; 4], k: usize, visit: &mut impl FnMut(&[usize; 4])) {
        if k == 1 {
            visit(xs);
            return;
        }
        for i in 0..k {
            heap_permutations(xs, k - 1, visit);
            if k % 2 == 0 {
                xs.swap(i, k - 1);
            } else {
                xs.swap(0, k - 1);
            }
        }
    }

    #[test]
    fn gw_symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dx = random_relational(5, &mut rng);
        let dy = random_relational(5, &mut rng);
        let cfg = GwConfig {
            n_restarts: 5,
            ..GwConfig::default()
        };
        let ab = gw_distance(&dx, &dy, &cfg).unwrap().gw_sq;
        let ba = gw_distance(&dy, &dx, &cfg).unwrap().gw_sq;
        assert!((ab - ba).abs() < 1e-6, "asymmetry {ab} vs {ba}");
    }

    #[test]
    fn gw_invariant_under_joint_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dx = random_relational(5, &mut rng);
        let dy = random_relational(5, &mut rng);
        let cfg = GwConfig {
            n_restarts: 5,
            ..GwConfig::default()
        };
        let base = gw_distance(&dx, &dy, &cfg).unwrap().gw_sq;

        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut rng);
        let mut permuted = Array2::zeros((5, 5));
        for i in 0..5 {
            for j in 0..5 {
                permuted[[i, j]] = dx.values()[[perm[i], perm[j]]];
            }
        }
        let dxp = RelationalMatrix::new(permuted, MetricTag::Precomputed).unwrap();
        let got = gw_distance(&dxp, &dy, &cfg).unwrap().gw_sq;
        assert!((got - base).abs() < 1e-6, "permutation changed gw: {got} vs {base}");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let dx = random_relational(10, &mut rng);
            let pi = random_coupling(10, 10, &mut rng);
            let mut y = Array2::from_shape_fn((10, 2), |_| rng.random_range(-1.0..1.0));
            let views = vec![dx];
            let weights = vec![1.0];
            let pis = vec![pi];
            let (_, grad) = embedding_objective_grad(&views, &weights, &pis, &y).unwrap();

            let h = 1e-5;
            for _ in 0..5 {
                let i = rng.random_range(0..10);
                let d = rng.random_range(0..2);
                let orig = y[[i, d]];
                y[[i, d]] = orig + h;
                let (fp, _) = embedding_objective_grad(&views, &weights, &pis, &y).unwrap();
                y[[i, d]] = orig - h;
                let (fm, _) = embedding_objective_grad(&views, &weights, &pis, &y).unwrap();
                y[[i, d]] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let analytic = grad[[i, d]];
                let rel = (fd - analytic).abs() / analytic.abs().max(fd.abs()).max(1e-10);
                assert!(
                    rel < 1e-4,
                    "gradient mismatch at ({i},{d}): fd {fd} vs analytic {analytic} (rel {rel})"
                );
            }
        }
    }

    #[test]
    fn gwmds_flat_grid_high_correlation() {
        // 50 points on a 10 x 5 planar grid embed exactly in 2-D.
        let mut pts = Array2::zeros((50, 2));
        for i in 0..50 {
            pts[[i, 0]] = (i % 10) as f64;
            pts[[i, 1]] = (i / 10) as f64;
        }
        let x = SampleMatrix::with_default_ids(pts).unwrap();
        let dx = pairwise_euclidean(&x);
        let emb = gwmds_embed(&dx, &MdsConfig::new(2), &GwConfig::default()).unwrap();
        let demb = emb.distances();
        let corr = distance_correlation(&dx, &demb).unwrap();
        assert!(corr >= 0.99, "grid correlation {corr}");
    }

    #[test]
    fn gwmds_regular_simplex_embeds_exactly() {
        // All-equal off-diagonal distances: a regular simplex fits in n-1 dims.
        let n = 5;
        let mut m = Array2::from_elem((n, n), 1.0);
        for i in 0..n {
            m[[i, i]] = 0.0;
        }
        let dx = RelationalMatrix::new(m, MetricTag::Precomputed).unwrap();
        let emb = gwmds_embed(&dx, &MdsConfig::new(n - 1), &GwConfig::default()).unwrap();
        assert!(
            emb.meta.gw_sq.unwrap() <= 1e-4,
            "simplex gw {}",
            emb.meta.gw_sq.unwrap()
        );
    }

    #[test]
    fn gwmds_zero_matrix_returns_zero_embedding() {
        let dx =
            RelationalMatrix::new(Array2::zeros((6, 6)), MetricTag::Precomputed).unwrap();
        let emb = gwmds_embed(&dx, &MdsConfig::new(2), &GwConfig::default()).unwrap();
        assert!(emb.coords().iter().all(|&v| v == 0.0));
        assert_eq!(emb.meta.gw_sq, Some(0.0));
        assert_eq!(emb.meta.iterations, 0);
    }

    #[test]
    fn gwmds_rejects_too_large_dimension() {
        let dx = random_relational(4, &mut ChaCha8Rng::seed_from_u64(10));
        assert!(matches!(
            gwmds_embed(&dx, &MdsConfig::new(4), &GwConfig::default()),
            Err(Error::DimensionTooLarge { q: 4, n: 4 })
        ));
    }

    #[test]
    fn gwmds_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals = Array2::from_shape_fn((20, 3), |_| rng.random_range(-1.0..1.0));
        let x = SampleMatrix::with_default_ids(vals).unwrap();
        let dx = pairwise_euclidean(&x);
        let trace = gwmds_trace(&dx, &MdsConfig::new(2), &GwConfig::default()).unwrap();
        assert!(trace.len() > 1);
        for pair in trace.windows(2) {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-300,
                "trace increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn gwmds_deterministic_under_seed() {
        let dx = random_relational(12, &mut ChaCha8Rng::seed_from_u64(12));
        let mds = MdsConfig {
            seed: 3,
            ..MdsConfig::new(2)
        };
        let a = gwmds_embed(&dx, &mds, &GwConfig::default()).unwrap();
        let b = gwmds_embed(&dx, &mds, &GwConfig::default()).unwrap();
        assert_eq!(a.coords(), b.coords());
    }
}
