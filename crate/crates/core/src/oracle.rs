//! Brute-force estimates of the optimal utility g for small alphabets.
//!
//! Every method returns a feasible, verified mechanism, so its utility is a
//! certified lower bound on the supremum. The search space is kernels
//! `P_U|Y` with `|U| = |Y|`, which suffices for the supremum.
//!
//! * [`OracleMethod::Grid`] scans every kernel whose columns lie on a
//!   simplex grid.
//! * [`OracleMethod::RandomRestartAscent`] runs projected coordinate ascent
//!   from seeded random starts.
//! * [`OracleMethod::VertexEnumeration`] enumerates the vertices of the
//!   feasible posterior polytope and picks the entropy-minimizing
//!   decomposition of P_Y among basic vertex subsets. Since conditional
//!   entropy is concave in the posteriors this is exact up to round-off.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bound_report, BoundName};
use crate::error::{Error, Result};
use crate::info::{Criterion, JointDistribution, Mechanism, MechanismKind};
use crate::linalg::{orthonormal_basis, Lu, Matrix};
use crate::mechanisms::verify_mechanism;
use crate::scalar::Real;
use crate::simplex::{solve, LinearProgram, LpStatus};

/// Slack of the oracle's own feasibility filter, tighter than verification.
const SCAN_TOL: f64 = 1e-12;
/// Above this many basic subsets the vertex method falls back to simplex.
const MAX_BASIS_SUBSETS: usize = 2_000_000;
/// Above this many kernels the grid scan refuses to run.
const MAX_GRID_KERNELS: u128 = 2_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Grid,
    RandomRestartAscent,
    VertexEnumeration,
    /// Vertex enumeration plus the grid when `|Y| ≤ 3`, best result kept;
    /// ascent where enumeration is too large.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleBudget {
    pub method: OracleMethod,
    pub grid_step: f64,
    pub restarts: usize,
    /// Ascent stops once its step falls below this.
    pub min_step: f64,
    pub seed: u64,
    /// Cap on kernel evaluations for ascent, summed over restarts.
    pub max_evaluations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            method: OracleMethod::Auto,
            grid_step: 0.05,
            restarts: 200,
            min_step: 1e-6,
            seed: 0,
            max_evaluations: u64::MAX,
        }
    }
}

impl OracleBudget {
    pub fn with_method(method: OracleMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult<T> {
    /// I(U;Y) of `best_mechanism`, in the joint's base.
    pub best_utility: T,
    #[serde(skip)]
    pub best_mechanism: Mechanism<T>,
    pub method: OracleMethod,
    pub evaluations: u64,
    pub budget_exhausted: bool,
}

/// f64 view of the instance shared by the search routines.
struct Instance {
    nx: usize,
    ny: usize,
    pxy: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl Instance {
    fn new<T: Real>(joint: &JointDistribution<T>) -> Self {
        let (nx, ny) = (joint.x_size(), joint.y_size());
        let mut pxy: Vec<f64> = joint.p_xy().as_slice().iter().map(|v| v.as_f64()).collect();
        let total: f64 = pxy.iter().sum();
        pxy.iter_mut().for_each(|v| *v /= total);
        let px = (0..nx)
            .map(|x| (0..ny).map(|y| pxy[x * ny + y]).sum())
            .collect();
        let py = (0..ny)
            .map(|y| (0..nx).map(|x| pxy[x * ny + y]).sum())
            .collect();
        Self {
            nx,
            ny,
            pxy,
            px,
            py,
        }
    }

    /// P_X|Y as a row-major `|X| × |Y|` array.
    fn k(&self) -> Vec<f64> {
        let mut k = self.pxy.clone();
        for x in 0..self.nx {
            for y in 0..self.ny {
                k[x * self.ny + y] /= self.py[y];
            }
        }
        k
    }

    /// Mutual information in nats and the largest per-letter leakage of a
    /// row-major `|U| × |Y|` kernel.
    fn stats(&self, kernel: &[f64], nu: usize, criterion: Criterion) -> (f64, f64) {
        let (nx, ny) = (self.nx, self.ny);
        let mut info = 0.0;
        let mut leak: f64 = 0.0;
        for u in 0..nu {
            let row = &kernel[u * ny..(u + 1) * ny];
            let pu: f64 = row.iter().zip(&self.py).map(|(k, p)| k * p).sum();
            if pu <= 0.0 {
                continue;
            }
            for y in 0..ny {
                if row[y] > 0.0 {
                    info += self.py[y] * row[y] * (row[y] / pu).ln();
                }
            }
            let mut d = 0.0;
            for x in 0..nx {
                let pxu: f64 = (0..ny).map(|y| self.pxy[x * ny + y] * row[y]).sum();
                d += (pxu - self.px[x] * pu).abs();
            }
            leak = leak.max(match criterion {
                Criterion::One => d,
                Criterion::Two => d / pu,
            });
        }
        (info.max(0.0), leak)
    }

    /// Mixes every column toward P_U until the leakage is at most `eps`.
    /// P_U is unchanged and every letter's deviation shrinks by the same
    /// factor under both criteria.
    fn project(&self, kernel: &mut [f64], nu: usize, leak: f64, eps: f64) {
        if leak <= eps {
            return;
        }
        let t = 1.0 - (eps / leak) * (1.0 - 1e-12);
        let ny = self.ny;
        for u in 0..nu {
            let pu: f64 = (0..ny).map(|y| kernel[u * ny + y] * self.py[y]).sum();
            for y in 0..ny {
                kernel[u * ny + y] = (1.0 - t) * kernel[u * ny + y] + t * pu;
            }
        }
    }
}

fn entropy_nats(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

fn to_mechanism<T: Real>(kernel: &[f64], nu: usize, ny: usize) -> Result<Mechanism<T>> {
    let mut m = Matrix::from_fn(nu, ny, |u, y| T::c(kernel[u * ny + y].max(0.0)));
    for y in 0..ny {
        let s: T = (0..nu).map(|u| m[(u, y)]).sum();
        for u in 0..nu {
            m[(u, y)] /= s;
        }
    }
    Mechanism::new(MechanismKind::Markov, m)
}

/// Verifies the kernel and wraps it; the utility is recomputed exactly in
/// the joint's base.
fn certify<T: Real>(
    joint: &JointDistribution<T>,
    kernel: &[f64],
    nu: usize,
    criterion: Criterion,
    eps: f64,
    method: OracleMethod,
    evaluations: u64,
    budget_exhausted: bool,
) -> Result<OracleResult<T>> {
    let mechanism = to_mechanism::<T>(kernel, nu, joint.y_size())?;
    let report = verify_mechanism(&mechanism, joint, criterion, T::c(eps))?;
    if !report.pass {
        return Err(Error::NoFeasiblePoint);
    }
    Ok(OracleResult {
        best_utility: report.mutual_information_uy,
        best_mechanism: mechanism,
        method,
        evaluations,
        budget_exhausted,
    })
}

/// Row-major `|Y| × |Y|` f64 kernel with zero rows appended.
fn padded_kernel<T: Real>(mechanism: &Mechanism<T>, ny: usize) -> Option<Vec<f64>> {
    let k = mechanism.kernel();
    if k.rows() > ny {
        return None;
    }
    let mut out = vec![0.0; ny * ny];
    for u in 0..k.rows() {
        for y in 0..ny {
            out[u * ny + y] = k[(u, y)].as_f64();
        }
    }
    Some(out)
}

fn constant_kernel(ny: usize) -> Vec<f64> {
    let mut k = vec![0.0; ny * ny];
    k[..ny].iter_mut().for_each(|v| *v = 1.0);
    k
}

fn check_eps(eps: f64) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be finite and nonnegative, got {eps}"
        )));
    }
    Ok(())
}

/// Lower estimate of g at a single ε.
pub fn oracle_g<T: Real>(
    joint: &JointDistribution<T>,
    eps: T,
    criterion: Criterion,
    budget: &OracleBudget,
) -> Result<OracleResult<T>> {
    let mut out = oracle_sweep(joint, &[eps], criterion, budget)?;
    Ok(out.remove(0))
}

/// [`oracle_g`] over a grid of ε values; the grid scan is shared.
pub fn oracle_sweep<T: Real>(
    joint: &JointDistribution<T>,
    eps_grid: &[T],
    criterion: Criterion,
    budget: &OracleBudget,
) -> Result<Vec<OracleResult<T>>> {
    let grid: Vec<f64> = eps_grid.iter().map(|e| e.as_f64()).collect();
    for &e in &grid {
        check_eps(e)?;
    }
    let inst = Instance::new(joint);
    match budget.method {
        OracleMethod::Grid => grid_method(joint, &inst, &grid, criterion, budget.grid_step),
        OracleMethod::RandomRestartAscent => grid
            .par_iter()
            .map(|&e| ascent_method(joint, &inst, e, criterion, budget, &[]))
            .collect(),
        OracleMethod::VertexEnumeration => grid
            .par_iter()
            .map(|&e| {
                vertex_method(joint, &inst, e, criterion)?.ok_or_else(|| {
                    Error::InvalidArgument("instance too large for vertex enumeration".into())
                })
            })
            .collect(),
        OracleMethod::Auto => {
            let exact: Vec<Option<OracleResult<T>>> = grid
                .par_iter()
                .map(|&e| vertex_method(joint, &inst, e, criterion))
                .collect::<Result<_>>()?;
            if inst.ny <= 3 {
                let search = grid_method(joint, &inst, &grid, criterion, budget.grid_step)?;
                return Ok(exact
                    .into_iter()
                    .zip(search)
                    .map(|(a, b)| match a {
                        None => b,
                        Some(a) => {
                            let evaluations = a.evaluations + b.evaluations;
                            let mut best = if b.best_utility > a.best_utility {
                                b
                            } else {
                                a
                            };
                            best.evaluations = evaluations;
                            best
                        }
                    })
                    .collect());
            }
            // Beyond the grid's reach ascent only runs where enumeration did
            // not; a criterion-2 feasible kernel seeds it, being criterion-1
            // feasible too.
            grid.par_iter()
                .zip(exact)
                .map(|(&e, ex)| match ex {
                    Some(r) => Ok(r),
                    None => {
                        let seed = match criterion {
                            Criterion::One => vertex_method(joint, &inst, e, Criterion::Two)?,
                            Criterion::Two => None,
                        };
                        let seeds: Vec<Vec<f64>> = seed
                            .iter()
                            .filter_map(|r| padded_kernel(&r.best_mechanism, inst.ny))
                            .collect();
                        ascent_method(joint, &inst, e, criterion, budget, &seeds)
                    }
                })
                .collect()
        }
    }
}

fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(parts - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

struct GridTables {
    nu: usize,
    columns: Vec<Vec<f64>>,
    /// `[y][c]` → P_XY(x,y)·c(u), laid out `x·|U| + u`.
    xu: Vec<Vec<Vec<f64>>>,
    /// `[y][c]` → P_Y(y)·c(u).
    u: Vec<Vec<Vec<f64>>>,
    /// `[y][c]` → P_Y(y)·H(c).
    h: Vec<Vec<f64>>,
}

/// Best utility (nats) and column choice per (criterion, ε).
type GridBest = Vec<Vec<Option<(f64, Vec<usize>)>>>;

fn grid_scan(
    inst: &Instance,
    t: &GridTables,
    criteria: &[Criterion],
    eps_sorted: &[f64],
    first: usize,
) -> GridBest {
    let (nx, ny, nu) = (inst.nx, inst.ny, t.nu);
    let width = nx * nu + nu + 1;
    let mut acc = vec![0.0; (ny + 1) * width];
    let mut digits = vec![0usize; ny];
    let mut best: GridBest = vec![vec![None; eps_sorted.len()]; criteria.len()];
    let n = t.columns.len();

    fn push(
        acc: &mut [f64],
        width: usize,
        level: usize,
        t: &GridTables,
        y: usize,
        c: usize,
        nxu: usize,
        nu: usize,
    ) {
        let (lo, hi) = acc.split_at_mut((level + 1) * width);
        let prev = &lo[level * width..];
        let next = &mut hi[..width];
        for i in 0..nxu {
            next[i] = prev[i] + t.xu[y][c][i];
        }
        for i in 0..nu {
            next[nxu + i] = prev[nxu + i] + t.u[y][c][i];
        }
        next[width - 1] = prev[width - 1] + t.h[y][c];
    }

    let nxu = nx * nu;
    digits[0] = first;
    push(&mut acc, width, 0, t, 0, first, nxu, nu);
    let mut level = 1;
    loop {
        if level == ny {
            let a = &acc[ny * width..(ny + 1) * width];
            let pu = &a[nxu..nxu + nu];
            let hu = entropy_nats(pu);
            let info = hu - a[width - 1];
            let mut d1: f64 = 0.0;
            let mut d2: f64 = 0.0;
            for u in 0..nu {
                if pu[u] <= 0.0 {
                    continue;
                }
                let mut d = 0.0;
                for x in 0..nx {
                    d += (a[x * nu + u] - inst.px[x] * pu[u]).abs();
                }
                d1 = d1.max(d);
                d2 = d2.max(d / pu[u]);
            }
            for (ci, c) in criteria.iter().enumerate() {
                let leak = if *c == Criterion::One { d1 } else { d2 };
                let row = &mut best[ci];
                // Feasible sets grow with ε, so row values are nondecreasing.
                if matches!(&row[0], Some((b0, _)) if info <= *b0) {
                    continue;
                }
                for k in 0..eps_sorted.len() {
                    if leak > eps_sorted[k] + SCAN_TOL {
                        continue;
                    }
                    match &row[k] {
                        Some((b, _)) if info <= *b => break,
                        _ => row[k] = Some((info, digits.clone())),
                    }
                }
            }
            level -= 1;
            if level == 0 {
                break;
            }
            digits[level] += 1;
            continue;
        }
        if digits[level] >= n {
            digits[level] = 0;
            level -= 1;
            if level == 0 {
                break;
            }
            digits[level] += 1;
            continue;
        }
        push(&mut acc, width, level, t, level, digits[level], nxu, nu);
        level += 1;
        if level < ny {
            digits[level] = 0;
        }
    }
    best
}

fn grid_method<T: Real>(
    joint: &JointDistribution<T>,
    inst: &Instance,
    grid: &[f64],
    criterion: Criterion,
    step: f64,
) -> Result<Vec<OracleResult<T>>> {
    let results = grid_search(inst, grid, &[criterion], step)?;
    let evaluations = results.1;
    results.0[0]
        .iter()
        .zip(grid)
        .map(|(kernel, &e)| {
            certify(
                joint,
                kernel,
                inst.ny,
                criterion,
                e,
                OracleMethod::Grid,
                evaluations,
                false,
            )
        })
        .collect()
}

/// Shared exhaustive scan. Returns, per criterion and per ε in input order,
/// the best kernel found (row-major `|U| × |Y|`), and the kernel count.
fn grid_search(
    inst: &Instance,
    grid: &[f64],
    criteria: &[Criterion],
    step: f64,
) -> Result<(Vec<Vec<Vec<f64>>>, u64)> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let divisions = (1.0 / step).round() as usize;
    if (divisions as f64 * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} does not divide 1"
        )));
    }
    let (nx, ny) = (inst.nx, inst.ny);
    let nu = ny;
    let columns: Vec<Vec<f64>> = compositions(nu, divisions)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / divisions as f64).collect())
        .collect();
    let n = columns.len();
    let kernels = (n as u128).pow(ny as u32);
    if kernels > MAX_GRID_KERNELS {
        return Err(Error::InvalidArgument(format!(
            "grid with step {step} has {kernels} kernels for |Y| = {ny}; use ascent"
        )));
    }
    let mut xu = vec![vec![vec![0.0; nx * nu]; n]; ny];
    let mut uu = vec![vec![vec![0.0; nu]; n]; ny];
    let mut h = vec![vec![0.0; n]; ny];
    for y in 0..ny {
        for (c, col) in columns.iter().enumerate() {
            for u in 0..nu {
                for x in 0..nx {
                    xu[y][c][x * nu + u] = inst.pxy[x * ny + y] * col[u];
                }
                uu[y][c][u] = inst.py[y] * col[u];
            }
            h[y][c] = inst.py[y] * entropy_nats(col);
        }
    }
    let tables = GridTables {
        nu,
        columns,
        xu,
        u: uu,
        h,
    };
    let order: Vec<usize> = (0..grid.len())
        .sorted_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .collect();
    let eps_sorted: Vec<f64> = order.iter().map(|&i| grid[i]).collect();

    // Relabeling U changes neither utility nor leakage, so the first column
    // can be taken nonincreasing.
    let firsts: Vec<usize> = (0..n)
        .filter(|&c| tables.columns[c].windows(2).all(|w| w[0] >= w[1]))
        .collect();
    let scanned = firsts.len() as u64 * (n as u64).pow(ny as u32 - 1);
    let shards: Vec<GridBest> = firsts
        .into_par_iter()
        .map(|first| grid_scan(inst, &tables, criteria, &eps_sorted, first))
        .collect();
    let mut best: GridBest = vec![vec![None; grid.len()]; criteria.len()];
    for shard in shards {
        for (ci, row) in shard.into_iter().enumerate() {
            for (k, cand) in row.into_iter().enumerate() {
                if let Some((v, d)) = cand {
                    match &best[ci][k] {
                        Some((b, _)) if v <= *b => {}
                        _ => best[ci][k] = Some((v, d)),
                    }
                }
            }
        }
    }
    let kernels_out = best
        .into_iter()
        .map(|row| {
            let mut by_input = vec![Vec::new(); grid.len()];
            for (k, cand) in row.into_iter().enumerate() {
                by_input[order[k]] = match cand {
                    Some((_, digits)) => {
                        let mut kernel = vec![0.0; nu * ny];
                        for (y, &c) in digits.iter().enumerate() {
                            for u in 0..nu {
                                kernel[u * ny + y] = tables.columns[c][u];
                            }
                        }
                        kernel
                    }
                    None => constant_kernel(ny),
                };
            }
            by_input
        })
        .collect();
    Ok((kernels_out, scanned))
}

/// `seeds` are extra feasible row-major `|Y| × |Y|` starting kernels.
fn ascent_method<T: Real>(
    joint: &JointDistribution<T>,
    inst: &Instance,
    eps: f64,
    criterion: Criterion,
    budget: &OracleBudget,
    seeds: &[Vec<f64>],
) -> Result<OracleResult<T>> {
    let restarts = budget.restarts.max(1);
    let per_restart = (budget.max_evaluations / (restarts + seeds.len()) as u64).max(1);
    let mut runs: Vec<(f64, Vec<f64>, u64, bool)> = seeds
        .iter()
        .map(|k| ascend(inst, eps, criterion, budget, k.clone(), per_restart))
        .collect();
    runs.extend(
        (0..restarts)
            .into_par_iter()
            .map(|r| {
                let start = random_start(inst, eps, criterion, budget.seed, r as u64);
                ascend(inst, eps, criterion, budget, start, per_restart)
            })
            .collect::<Vec<_>>(),
    );
    let evaluations = runs.iter().map(|r| r.2).sum();
    let exhausted = runs.iter().any(|r| r.3);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (info, kernel, _, _) in runs {
        if best.as_ref().is_none_or(|(b, _)| info > *b) {
            best = Some((info, kernel));
        }
    }
    let (_, kernel) = best.ok_or(Error::NoFeasiblePoint)?;
    certify(
        joint,
        &kernel,
        inst.ny,
        criterion,
        eps,
        OracleMethod::RandomRestartAscent,
        evaluations,
        exhausted,
    )
}

/// Random kernel mixed toward P_U until feasible.
fn random_start(
    inst: &Instance,
    eps: f64,
    criterion: Criterion,
    seed: u64,
    restart: u64,
) -> Vec<f64> {
    let ny = inst.ny;
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    let mut kernel = vec![0.0; ny * ny];
    for y in 0..ny {
        let col: Vec<f64> = (0..ny).map(|_| -rng.gen::<f64>().ln()).collect();
        let s: f64 = col.iter().sum();
        for u in 0..ny {
            kernel[u * ny + y] = col[u] / s;
        }
    }
    let (_, leak) = inst.stats(&kernel, ny, criterion);
    inst.project(&mut kernel, ny, leak, eps);
    kernel
}

/// Coordinate ascent over mass transfers within a column. The feasible set
/// is convex, so an infeasible move is shortened by bisection toward the
/// current point.
fn ascend(
    inst: &Instance,
    eps: f64,
    criterion: Criterion,
    budget: &OracleBudget,
    mut kernel: Vec<f64>,
    cap: u64,
) -> (f64, Vec<f64>, u64, bool) {
    let (ny, nu) = (inst.ny, inst.ny);
    let (mut info, _) = inst.stats(&kernel, nu, criterion);
    let mut evals = 1u64;
    let mut step = 0.5;
    let mut cand = kernel.clone();
    while step >= budget.min_step {
        let mut improved = false;
        for y in 0..ny {
            for u in 0..nu {
                for v in 0..nu {
                    if u == v || kernel[u * ny + y] <= 0.0 {
                        continue;
                    }
                    if evals >= cap {
                        return (info, kernel, evals, true);
                    }
                    let full = step.min(kernel[u * ny + y]);
                    let mut eval = |amount: f64, evals: &mut u64| {
                        cand.copy_from_slice(&kernel);
                        cand[u * ny + y] -= amount;
                        cand[v * ny + y] += amount;
                        *evals += 1;
                        inst.stats(&cand, nu, criterion)
                    };
                    let (ci, leak) = eval(full, &mut evals);
                    let accepted = if leak <= eps + SCAN_TOL {
                        Some((full, ci))
                    } else {
                        let (mut lo, mut hi, mut best) = (0.0, full, None);
                        for _ in 0..12 {
                            if evals >= cap {
                                break;
                            }
                            let mid = 0.5 * (lo + hi);
                            let (c, l) = eval(mid, &mut evals);
                            if l <= eps + SCAN_TOL {
                                lo = mid;
                                best = Some((mid, c));
                            } else {
                                hi = mid;
                            }
                        }
                        best
                    };
                    if let Some((amount, ci)) = accepted {
                        if ci > info + 1e-15 {
                            kernel[u * ny + y] -= amount;
                            kernel[v * ny + y] += amount;
                            info = ci;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (info, kernel, evals, false)
}

/// Per-letter leakage rows `sᵀ(P_X|Y − P_X 1ᵀ) z ≤ ε`, one per sign pattern
/// s, over `R^|Y|`. Under criterion 2 `z` is the posterior `q`; under
/// criterion 1 it is the letter mass `η = P_U(u)·q`. Identically zero rows
/// are dropped.
fn leakage_rows(inst: &Instance, eps: f64) -> Vec<(Vec<f64>, f64)> {
    let (nx, ny) = (inst.nx, inst.ny);
    let k = inst.k();
    let mut rows = Vec::new();
    for mask in 0..(1usize << nx) {
        let s: Vec<f64> = (0..nx)
            .map(|x| if mask >> x & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let sp: f64 = (0..nx).map(|x| s[x] * inst.px[x]).sum();
        let a: Vec<f64> = (0..ny)
            .map(|y| (0..nx).map(|x| s[x] * k[x * ny + y]).sum::<f64>() - sp)
            .collect();
        if a.iter().all(|v| v.abs() < 1e-15) {
            continue;
        }
        rows.push((a, eps));
    }
    rows
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (1..=k).fold(1usize, |acc, i| acc.saturating_mul(n + 1 - i) / i)
}

/// Basic feasible solutions of `{z ∈ R^dim : eq rows hold, ineq rows hold}`,
/// found by making every choice of `dim − |eq|` inequalities active.
fn basic_solutions<'a>(
    dim: usize,
    eq: &'a [(Vec<f64>, f64)],
    ineq: &'a [(Vec<f64>, f64)],
) -> impl ParallelIterator<Item = Vec<f64>> + 'a {
    (0..ineq.len())
        .combinations(dim - eq.len())
        .par_bridge()
        .filter_map(move |active| {
            let mut m = Matrix::zeros(dim, dim);
            let mut rhs = vec![0.0; dim];
            for (r, (a, b)) in eq
                .iter()
                .chain(active.iter().map(|&i| &ineq[i]))
                .enumerate()
            {
                for j in 0..dim {
                    m[(r, j)] = a[j];
                }
                rhs[r] = *b;
            }
            let z = Lu::new(&m).ok()?.solve(&rhs);
            if !z.iter().all(|v| v.is_finite()) {
                return None;
            }
            let ok = ineq.iter().all(|(a, b)| {
                let lhs: f64 = a.iter().zip(&z).map(|(p, q)| p * q).sum();
                lhs <= b + 1e-11
            });
            ok.then(|| z.into_iter().map(|v| v.max(0.0)).collect())
        })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Vertices of the criterion-2 posterior polytope.
fn posterior_vertices(inst: &Instance, eps: f64) -> Vec<Vec<f64>> {
    let ny = inst.ny;
    let eq = vec![(vec![1.0; ny], 1.0)];
    let mut ineq: Vec<(Vec<f64>, f64)> = (0..ny)
        .map(|i| {
            let mut a = vec![0.0; ny];
            a[i] = -1.0;
            (a, 0.0)
        })
        .collect();
    ineq.extend(leakage_rows(inst, eps));
    let mut found: Vec<Vec<f64>> = basic_solutions(ny, &eq, &ineq).collect();
    found.sort_by(|a, b| lex_cmp(a, b));
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for v in found {
        if !unique
            .iter()
            .any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-10))
        {
            unique.push(v);
        }
    }
    unique
}

/// Cheapest convex combination `Σ λ_k v_k = P_Y` of posterior vertices,
/// minimizing `Σ λ_k H(v_k)`.
fn cheapest_decomposition(verts: &[Vec<f64>], py: &[f64]) -> Option<Vec<f64>> {
    let ny = py.len();
    let costs: Vec<f64> = verts.iter().map(|v| entropy_nats(v)).collect();
    let basis = orthonormal_basis(verts, 1e-9);
    let r = basis.len();
    let n = verts.len();
    if r == 0 || n < r {
        return None;
    }
    let project = |v: &[f64]| -> Vec<f64> {
        basis
            .iter()
            .map(|b| b.iter().zip(v).map(|(p, q)| p * q).sum())
            .collect()
    };
    let reduced: Vec<Vec<f64>> = verts.iter().map(|v| project(v)).collect();
    let target = project(py);
    if binomial(n, r) > MAX_BASIS_SUBSETS {
        let names = (0..n).map(|i| format!("l{i}")).collect();
        let mut lp = LinearProgram::new(names);
        lp.objective = costs;
        for y in 0..ny {
            lp.add_equality(format!("m{y}"), verts.iter().map(|v| v[y]).collect(), py[y]);
        }
        let sol = solve(&lp).ok()?;
        return (sol.status == LpStatus::Optimal).then_some(sol.x);
    }
    let best = (0..n)
        .combinations(r)
        .par_bridge()
        .filter_map(|cols| {
            let m = Matrix::from_fn(r, r, |i, j| reduced[cols[j]][i]);
            let lambda = Lu::new(&m).ok()?.solve(&target);
            if lambda.iter().any(|&l| l < -1e-12 || !l.is_finite()) {
                return None;
            }
            let residual = (0..ny)
                .map(|y| {
                    (cols
                        .iter()
                        .zip(&lambda)
                        .map(|(&c, &l)| l * verts[c][y])
                        .sum::<f64>()
                        - py[y])
                        .abs()
                })
                .fold(0.0, f64::max);
            if residual > 1e-10 {
                return None;
            }
            let cost: f64 = cols
                .iter()
                .zip(&lambda)
                .map(|(&c, &l)| l.max(0.0) * costs[c])
                .sum();
            Some((cost, cols, lambda))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))?;
    let mut out = vec![0.0; n];
    for (&c, &l) in best.1.iter().zip(&best.2) {
        out[c] = l.max(0.0);
    }
    Some(out)
}

/// Criterion 1 with `|U| = |Y|` letters: the letter masses `η_1 … η_|Y|`
/// range over a polytope on which `Σ_u φ(η_u)` (φ the perspective of the
/// entropy) is concave, so the minimum sits at one of its vertices.
fn letter_mass_vertex(inst: &Instance, eps: f64) -> Option<(Vec<f64>, u64)> {
    let ny = inst.ny;
    let dim = ny * ny;
    let rows = leakage_rows(inst, eps);
    let eq: Vec<(Vec<f64>, f64)> = (0..ny)
        .map(|y| {
            let mut a = vec![0.0; dim];
            (0..ny).for_each(|u| a[u * ny + y] = 1.0);
            (a, inst.py[y])
        })
        .collect();
    let mut ineq = Vec::new();
    for u in 0..ny {
        for y in 0..ny {
            let mut a = vec![0.0; dim];
            a[u * ny + y] = -1.0;
            ineq.push((a, 0.0));
        }
        for (r, b) in &rows {
            let mut a = vec![0.0; dim];
            a[u * ny..(u + 1) * ny].copy_from_slice(r);
            ineq.push((a, *b));
        }
    }
    let count = binomial(ineq.len(), dim - eq.len());
    if count > MAX_BASIS_SUBSETS {
        return None;
    }
    let cost = |z: &[f64]| -> f64 {
        (0..ny)
            .map(|u| {
                let eta = &z[u * ny..(u + 1) * ny];
                let s: f64 = eta.iter().sum();
                if s <= 0.0 {
                    return 0.0;
                }
                let q: Vec<f64> = eta.iter().map(|v| v / s).collect();
                s * entropy_nats(&q)
            })
            .sum()
    };
    let best = basic_solutions(dim, &eq, &ineq)
        .map(|z| (cost(&z), z))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)))?;
    Some((best.1, count as u64))
}

/// `None` when the instance is too large to enumerate.
fn vertex_method<T: Real>(
    joint: &JointDistribution<T>,
    inst: &Instance,
    eps: f64,
    criterion: Criterion,
) -> Result<Option<OracleResult<T>>> {
    let ny = inst.ny;
    let method = OracleMethod::VertexEnumeration;
    let (kernel, nu, evaluations) = match criterion {
        Criterion::Two => {
            let verts = posterior_vertices(inst, eps);
            let evaluations = verts.len() as u64;
            let Some(lambda) = cheapest_decomposition(&verts, &inst.py) else {
                return Ok(None);
            };
            let letters: Vec<(f64, &Vec<f64>)> = lambda
                .iter()
                .zip(&verts)
                .filter(|(&l, _)| l > 1e-15)
                .map(|(&l, v)| (l, v))
                .collect();
            let nu = letters.len();
            let mut kernel = vec![0.0; nu * ny];
            for (u, (mass, q)) in letters.iter().enumerate() {
                for y in 0..ny {
                    kernel[u * ny + y] = mass * q[y] / inst.py[y];
                }
            }
            (kernel, nu, evaluations)
        }
        Criterion::One => {
            let Some((z, evaluations)) = letter_mass_vertex(inst, eps) else {
                return Ok(None);
            };
            let kernel: Vec<f64> = (0..ny * ny).map(|i| z[i] / inst.py[i % ny]).collect();
            (kernel, ny, evaluations)
        }
    };
    certify(
        joint,
        &kernel,
        nu,
        criterion,
        eps,
        method,
        evaluations,
        false,
    )
    .map(Some)
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow<T> {
    pub eps: T,
    pub oracle: T,
    pub method: OracleMethod,
    /// Valid lower bounds on g for the criterion.
    pub lower: Vec<(BoundName, T)>,
    /// Valid upper bounds on g for the criterion.
    pub upper: Vec<(BoundName, T)>,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Oracle minus the best valid lower bound.
    pub gap: Option<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport<T> {
    pub criterion: Criterion,
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub rows: Vec<SandwichRow<T>>,
    pub pass: bool,
}

impl<T: Real> SandwichReport<T> {
    /// One line per ε.
    pub fn to_table(&self) -> String {
        let mut out = format!("criterion {}\n", self.criterion.number());
        for r in &self.rows {
            let fmt = |v: &[(BoundName, T)]| {
                v.iter()
                    .map(|(n, x)| format!("{}={:.6}", n.label(), x))
                    .join(" ")
            };
            out.push_str(&format!(
                "{} eps={:.6} oracle={:.6} [{}] lower: {} upper: {}\n",
                if r.lower_ok && r.upper_ok {
                    "PASS"
                } else {
                    "FAIL"
                },
                r.eps,
                r.oracle,
                serde_json::to_string(&r.method)
                    .unwrap_or_default()
                    .trim_matches('"'),
                fmt(&r.lower),
                fmt(&r.upper),
            ));
        }
        out
    }
}

/// Slack granted to lower bounds for the finite search resolution.
pub const GRID_SLACK: f64 = 0.02;
/// Slack granted to upper bounds.
pub const UPPER_SLACK: f64 = 1e-6;

/// Checks `lower ≤ oracle + GRID_SLACK` and `oracle ≤ upper + UPPER_SLACK`
/// for every valid bound at every ε.
pub fn sandwich_check<T: Real>(
    joint: &JointDistribution<T>,
    eps_grid: &[T],
    criterion: Criterion,
    budget: &OracleBudget,
) -> Result<SandwichReport<T>> {
    let mut order: Vec<T> = eps_grid.to_vec();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let reports = bound_report(joint, &order)?;
    let oracle = oracle_sweep(joint, &order, criterion, budget)?;
    let (lower_names, upper_names): (&[BoundName], &[BoundName]) = match criterion {
        Criterion::One => (
            &[BoundName::LH1One, BoundName::LH1Two, BoundName::LG1],
            &[BoundName::UG1, BoundName::UG1Cap],
        ),
        Criterion::Two => (
            &[BoundName::LG2],
            &[BoundName::UH2, BoundName::UG2One, BoundName::UG2Two],
        ),
    };
    let rows: Vec<SandwichRow<T>> = reports
        .iter()
        .zip(&oracle)
        .map(|(rep, o)| {
            let pick = |names: &[BoundName]| -> Vec<(BoundName, T)> {
                names
                    .iter()
                    .filter(|&&n| {
                        criterion == Criterion::Two
                            || rep.special_case_deterministic_x
                            || !matches!(n, BoundName::LH1One | BoundName::LH1Two)
                    })
                    .filter_map(|&n| Some((n, rep.get(n).valid_value()?)))
                    .filter(|(_, v)| v.is_finite())
                    .collect()
            };
            let lower = pick(lower_names);
            let upper = pick(upper_names);
            let v = o.best_utility;
            let lower_ok = lower.iter().all(|&(_, l)| l <= v + T::c(GRID_SLACK));
            let upper_ok = upper.iter().all(|&(_, u)| v <= u + T::c(UPPER_SLACK));
            let gap = lower.iter().map(|&(_, l)| l).reduce(T::max).map(|l| v - l);
            SandwichRow {
                eps: rep.eps,
                oracle: v,
                method: o.method,
                lower,
                upper,
                lower_ok,
                upper_ok,
                gap,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.lower_ok && r.upper_ok);
    Ok(SandwichReport {
        criterion,
        lower_slack: GRID_SLACK,
        upper_slack: UPPER_SLACK,
        rows,
        pass,
    })
}
