//! Brute-force value iteration for the one-factor local-utility control
//! problem with proportional costs.
//!
//! State is `(z, θ)` on a tensor grid. Each step the controller moves to
//! `θ′` paying `ε·|θ′ − θ|`, collects `(θ′·μ(z) − θ′²σ²/(2G))·dt` with
//! `μ(z) = β·σ_X·z`, and the factor moves by the exact OU transition
//! integrated over grid cells. The solved policy has a hold interval for each
//! `z`; its half-width at `z = 0` is compared with the cube-root law.

use rayon::prelude::*;

use crate::buffer::BufferParams;
use crate::error::{Error, Result};
use crate::normal;
use crate::synth::{rms_target, theoretical_gamma0_sq, OneFactorParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub z_nodes: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    /// Time step in days.
    pub dt: f64,
    /// Discount rate `r` per day.
    pub discount_rate: f64,
}

pub const DEFAULT_DT: f64 = 0.25;
pub const DEFAULT_DISCOUNT: f64 = 1e-4;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl GridSpec {
    pub fn uniform(
        nz: usize,
        z_max: f64,
        ntheta: usize,
        theta_max: f64,
        dt: f64,
        discount_rate: f64,
    ) -> Result<Self> {
        if nz < 3 || ntheta < 3 {
            return Err(Error::domain("grids need at least three nodes"));
        }
        let g = Self {
            z_nodes: linspace(-z_max, z_max, nz),
            theta_nodes: linspace(-theta_max, theta_max, ntheta),
            dt,
            discount_rate,
        };
        g.validate()?;
        Ok(g)
    }

    /// 101 factor nodes on `[−4, 4]`, 201 position nodes over twice the
    /// frictionless rms target, quarter-day steps.
    pub fn default_for(model: &OneFactorParams, gearing: f64) -> Result<Self> {
        Self::uniform(
            101,
            4.0,
            201,
            2.0 * rms_target(model, gearing),
            DEFAULT_DT,
            DEFAULT_DISCOUNT,
        )
    }

    /// Same ranges with each cell halved.
    pub fn refined(&self) -> Self {
        let refine = |v: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(2 * v.len() - 1);
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(*v.last().unwrap());
            out
        };
        Self {
            z_nodes: refine(&self.z_nodes),
            theta_nodes: refine(&self.theta_nodes),
            dt: self.dt,
            discount_rate: self.discount_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| {
            v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
        };
        if !increasing(&self.z_nodes) {
            return Err(Error::domain(
                "z grid must be strictly increasing with >= 2 nodes",
            ));
        }
        if !increasing(&self.theta_nodes) {
            return Err(Error::domain(
                "theta grid must be strictly increasing with >= 2 nodes",
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::domain(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.discount_rate.is_finite() && self.discount_rate > 0.0) {
            return Err(Error::domain(format!(
                "discount rate must be > 0, got {}",
                self.discount_rate
            )));
        }
        Ok(())
    }

    pub fn nz(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta_nodes.len()
    }

    fn nearest(nodes: &[f64], x: f64) -> usize {
        let i = nodes.partition_point(|&v| v < x);
        if i == 0 {
            0
        } else if i == nodes.len() {
            nodes.len() - 1
        } else if x - nodes[i - 1] <= nodes[i] - x {
            i - 1
        } else {
            i
        }
    }

    pub fn nearest_theta(&self, theta: f64) -> usize {
        Self::nearest(&self.theta_nodes, theta)
    }

    pub fn nearest_z(&self, z: f64) -> usize {
        Self::nearest(&self.z_nodes, z)
    }
}

/// Sparse row of the factor transition matrix: probabilities for nodes
/// `start..start + probs.len()`.
#[derive(Debug, Clone, PartialEq)]
struct TransitionRow {
    start: usize,
    probs: Vec<f64>,
}

const TRANSITION_CUTOFF: f64 = 1e-14;

/// Exact OU conditional law integrated over cells bounded by node midpoints;
/// mass beyond the outer midpoints goes to the edge nodes.
fn transition_rows(model: &OneFactorParams, grid: &GridSpec) -> Vec<TransitionRow> {
    let z = &grid.z_nodes;
    let decay = (-model.kappa * grid.dt).exp();
    let sd = (1.0 - decay * decay).sqrt();
    let bounds: Vec<f64> = z.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    z.iter()
        .map(|&zi| {
            let mean = zi * decay;
            let cdf = |b: f64| normal::cdf((b - mean) / sd);
            let mut probs = Vec::with_capacity(z.len());
            let mut lower = 0.0;
            for upper in bounds.iter().map(|&b| cdf(b)).chain(std::iter::once(1.0)) {
                probs.push((upper - lower).max(0.0));
                lower = upper;
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let start = probs
                .iter()
                .position(|&p| p > TRANSITION_CUTOFF)
                .unwrap_or(0);
            let end = probs
                .iter()
                .rposition(|&p| p > TRANSITION_CUTOFF)
                .map_or(z.len(), |e| e + 1);
            let mut kept = probs[start..end].to_vec();
            let kept_total: f64 = kept.iter().sum();
            kept.iter_mut().for_each(|p| *p /= kept_total);
            TransitionRow { start, probs: kept }
        })
        .collect()
}

/// Greedy action for every node, stored row-major by `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub nz: usize,
    pub ntheta: usize,
    /// Index of the post-trade position node for state `(z_i, θ_k)` at `i·ntheta + k`.
    pub action: Vec<u32>,
}

impl Policy {
    pub fn action_at(&self, iz: usize, itheta: usize) -> usize {
        self.action[iz * self.ntheta + itheta] as usize
    }

    /// Contiguous hold interval `(lo, hi)` of node indices for factor node `iz`.
    pub fn hold_interval(&self, iz: usize) -> Result<(usize, usize)> {
        let row = &self.action[iz * self.ntheta..(iz + 1) * self.ntheta];
        let holds: Vec<usize> = (0..self.ntheta).filter(|&k| row[k] as usize == k).collect();
        let (lo, hi) = match (holds.first(), holds.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(Error::Structural(format!("no hold region at z node {iz}"))),
        };
        if hi - lo + 1 != holds.len() {
            return Err(Error::Structural(format!(
                "hold region at z node {iz} is not contiguous; refine the grids"
            )));
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    /// Value table, row-major by `z`.
    pub value: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    /// Bound on the sup-norm distance to the fixed point at exit.
    pub residual: f64,
}

impl DpSolution {
    pub fn value_at(&self, iz: usize, itheta: usize) -> f64 {
        self.value[iz * self.policy.ntheta + itheta]
    }
}

struct Problem<'a> {
    grid: &'a GridSpec,
    rows: Vec<TransitionRow>,
    /// Per-step reward for holding `θ′` at factor node `z`.
    reward: Vec<f64>,
    epsilon: f64,
    discount: f64,
}

impl Problem<'_> {
    /// One Bellman sweep: `out = T(v)`, greedy actions in `action`.
    fn sweep(&self, v: &[f64], out: &mut [f64], action: &mut [u32]) {
        let nt = self.grid.ntheta();
        let theta = &self.grid.theta_nodes;
        let eps = self.epsilon;
        out.par_chunks_mut(nt)
            .zip(action.par_chunks_mut(nt))
            .enumerate()
            .for_each(|(iz, (out_row, act_row))| {
                let row = &self.rows[iz];
                let mut h = vec![0.0; nt];
                for (dj, &p) in row.probs.iter().enumerate() {
                    let src = &v[(row.start + dj) * nt..(row.start + dj + 1) * nt];
                    for (hk, &vk) in h.iter_mut().zip(src) {
                        *hk += p * vk;
                    }
                }
                let reward = &self.reward[iz * nt..(iz + 1) * nt];
                for k in 0..nt {
                    h[k] = reward[k] + self.discount * h[k];
                }
                let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                // ties within rounding go to the candidate nearest the current node
                let tol = 1e-13 * (1.0 + scale);

                // best move from below: max_{k<=i} h_k + ε·θ_k, minus ε·θ_i
                let mut left = vec![(0.0, 0usize); nt];
                let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
                for k in 0..nt {
                    let c = h[k] + eps * theta[k];
                    if c >= best - tol {
                        arg = k;
                    }
                    best = best.max(c);
                    left[k] = (best - eps * theta[k], arg);
                }
                let (mut best, mut arg) = (f64::NEG_INFINITY, nt - 1);
                for k in (0..nt).rev() {
                    let c = h[k] - eps * theta[k];
                    if c >= best - tol {
                        arg = k;
                    }
                    best = best.max(c);
                    let rv = best + eps * theta[k];
                    let (lv, la) = left[k];
                    out_row[k] = lv.max(rv);
                    act_row[k] = if lv > rv + tol {
                        la
                    } else if rv > lv + tol {
                        arg
                    } else if la == k || arg == k {
                        k
                    } else {
                        la
                    } as u32;
                }
            });
    }
}

/// Solve the Bellman equation on `grid`.
///
/// Each sweep applies the Bellman operator and then shifts the table by the
/// midpoint of the MacQueen bounds; iteration stops once the bound on the
/// distance to the fixed point falls below `tol·(1 + sup|V|)`.
pub fn value_iteration(
    model: &OneFactorParams,
    gearing: f64,
    epsilon: f64,
    grid: &GridSpec,
    tol: f64,
    max_iters: usize,
) -> Result<DpSolution> {
    model.validate()?;
    grid.validate()?;
    BufferParams::new(epsilon, gearing, 0.0)?;
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be > 0"));
    }
    let (nz, nt) = (grid.nz(), grid.ntheta());
    let mu_scale = model.beta * model.sigma_x;
    let risk = model.sigma_x * model.sigma_x / (2.0 * gearing);
    let mut reward = Vec::with_capacity(nz * nt);
    for &z in &grid.z_nodes {
        for &th in &grid.theta_nodes {
            reward.push((th * mu_scale * z - th * th * risk) * grid.dt);
        }
    }
    let discount = (-grid.discount_rate * grid.dt).exp();
    let problem = Problem {
        grid,
        rows: transition_rows(model, grid),
        reward,
        epsilon,
        discount,
    };
    let amplification = discount / (1.0 - discount);

    let mut v = vec![0.0; nz * nt];
    let mut next = vec![0.0; nz * nt];
    let mut action = vec![0u32; nz * nt];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        problem.sweep(&v, &mut next, &mut action);
        let (lo, hi) =
            next.iter()
                .zip(&v)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    let d = a - b;
                    (lo.min(d), hi.max(d))
                });
        let shift = amplification * 0.5 * (lo + hi);
        residual = amplification * 0.5 * (hi - lo);
        for (dst, src) in v.iter_mut().zip(&next) {
            *dst = src + shift;
        }
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if residual <= tol * (1.0 + sup) {
            return Ok(DpSolution {
                value: v,
                policy: Policy {
                    nz,
                    ntheta: nt,
                    action,
                },
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

/// Hold-interval half-widths across the factor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandProfile {
    /// Half-width at each factor node.
    pub half_widths: Vec<f64>,
    /// Hold interval `(θ_lo, θ_hi)` at each factor node.
    pub intervals: Vec<(f64, f64)>,
    /// Half-width at the node nearest `z = 0`.
    pub at_zero: f64,
    /// Mean half-width over factor nodes whose interval does not touch the
    /// edge of the position grid.
    pub interior_mean: f64,
}

pub fn extract_band(policy: &Policy, grid: &GridSpec) -> Result<BandProfile> {
    if policy.nz != grid.nz() || policy.ntheta != grid.ntheta() {
        return Err(Error::domain("policy and grid dimensions differ"));
    }
    let th = &grid.theta_nodes;
    let mut half_widths = Vec::with_capacity(policy.nz);
    let mut intervals = Vec::with_capacity(policy.nz);
    let (mut sum, mut count) = (0.0, 0usize);
    for iz in 0..policy.nz {
        let (lo, hi) = policy.hold_interval(iz)?;
        let w = 0.5 * (th[hi] - th[lo]);
        if lo > 0 && hi + 1 < policy.ntheta {
            sum += w;
            count += 1;
        }
        half_widths.push(w);
        intervals.push((th[lo], th[hi]));
    }
    let at_zero = half_widths[grid.nearest_z(0.0)];
    Ok(BandProfile {
        half_widths,
        intervals,
        at_zero,
        interior_mean: if count > 0 {
            sum / count as f64
        } else {
            f64::NAN
        },
    })
}

/// Least-squares slope of `ln(width)` against `ln(ε)`.
pub fn scaling_exponent(epsilons: &[f64], widths: &[f64]) -> Result<f64> {
    if epsilons.len() != widths.len() {
        return Err(Error::domain("epsilon and width lists differ in length"));
    }
    if epsilons.len() < 3 {
        return Err(Error::domain(
            "need at least three points to fit an exponent",
        ));
    }
    if epsilons
        .iter()
        .chain(widths)
        .any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::domain("epsilons and widths must be positive"));
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("epsilon values must be distinct"));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = widths.iter().map(|w| w.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// One line of the oracle validation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub epsilon: f64,
    /// DP hold-interval half-width at `z = 0`.
    pub oracle_half_width: f64,
    /// Cube-root-law half-width with the closed-form `Γ̂₀²`.
    pub formula_half_width: f64,
    pub iterations: usize,
}

impl OracleRow {
    pub fn ratio(&self) -> f64 {
        self.oracle_half_width / self.formula_half_width
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 200_000;

/// Solve the DP at each `ε` and compare the `z = 0` band with the formula.
pub fn oracle_table(
    model: &OneFactorParams,
    gearing: f64,
    epsilons: &[f64],
    grid: &GridSpec,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<OracleRow>> {
    let gamma = theoretical_gamma0_sq(model, gearing);
    epsilons
        .iter()
        .map(|&epsilon| {
            let sol = value_iteration(model, gearing, epsilon, grid, tol, max_iters)?;
            let band = extract_band(&sol.policy, grid)?;
            Ok(OracleRow {
                epsilon,
                oracle_half_width: band.at_zero,
                formula_half_width: BufferParams::new(epsilon, gearing, gamma)?.half_width(),
                iterations: sol.iterations,
            })
        })
        .collect()
}
