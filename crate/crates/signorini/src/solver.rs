//! Implicit-Euler time stepping with thin-plane complementarity.
//!
//! Each step solves the slice system `(I - dt * Delta_h) u_k = u_{k-1} - dt f_k`
//! with Dirichlet data on the outer faces and, at thin nodes, the linear
//! complementarity conditions
//!
//! ```text
//! u >= 0,    w = (A u - b) >= 0,    u * w = 0,
//! ```
//!
//! where the thin row uses the mirror stencil, so `w` is the implicit-Euler
//! discretization of `-(dt/hx) * 2 d^+_{x_n} u`. The matrix is an M-matrix
//! (symmetrizable to SPD by halving the thin rows), hence the LCP has a
//! unique solution and projected SOR converges for omega in (0,2).
//!
//! Three mutually checking methods are provided: projected SOR (the
//! workhorse), exhaustive active-set enumeration on instances with few thin
//! nodes, and penalization `beta_eps(u) = min(u,0)/eps` solved by damped
//! semismooth Newton, which approaches the LCP solution from below.

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, NodeClass, ScalarField};
use crate::problem::{data_scale, ReducedProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Psor,
    ActiveSet,
    Penalty,
}

/// Solver configuration. Tolerances are relative to the data scale
/// `max(sup|data|, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub method: Method,
    /// PSOR relaxation factor, in (0, 2).
    pub omega: f64,
    /// Sup tolerance for the linear residual / natural LCP residual.
    pub tol_residual: f64,
    /// Complementarity tolerance for masks and reported gaps.
    pub tol_comp: f64,
    pub max_iters: usize,
    /// Strictly decreasing penalty parameters.
    pub penalty_eps: Vec<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            method: Method::Psor,
            omega: 1.5,
            tol_residual: 1e-12,
            tol_comp: 1e-10,
            max_iters: 50_000,
            penalty_eps: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

impl SolverSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::Grid(format!("omega must be in (0,2), got {}", self.omega)));
        }
        if !(self.tol_residual > 0.0 && self.tol_comp > 0.0) {
            return Err(Error::Grid("tolerances must be positive".into()));
        }
        for w in self.penalty_eps.windows(2) {
            if !(w[1] < w[0] && w[1] > 0.0) {
                return Err(Error::Grid("penalty_eps must be strictly decreasing positive".into()));
            }
        }
        if self.penalty_eps.is_empty() || self.penalty_eps[0] <= 0.0 {
            return Err(Error::Grid("penalty_eps must be nonempty positive".into()));
        }
        Ok(())
    }
}

/// Result of one implicit-Euler step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Full slice, boundary nodes included.
    pub u: Vec<f64>,
    /// Contact mask per thin node (grid order).
    pub contact: Vec<bool>,
    /// Discrete flux per thin node, `-(hx/dt)(Au-b) ~ 2 d^+_{x_n} u`;
    /// admissible values are <= tol_comp.
    pub flux: Vec<f64>,
    pub iterations: usize,
    /// Final natural residual sup (linear residual off contact, `min(u,w)`
    /// on the thin plane).
    pub residual: f64,
    /// `max |u * flux|` over thin nodes.
    pub comp_gap: f64,
    pub converged: bool,
}

/// One solved run: the reduced solution, contact history and per-slice stats.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub u: ScalarField,
    /// Contact mask per slice and thin node (slice 0 from the initial data).
    pub masks: Vec<Vec<bool>>,
    pub stats: Vec<SliceStats>,
    pub scale: f64,
    pub nonconverged_slices: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SliceStats {
    pub iterations: usize,
    pub residual: f64,
    pub comp_gap: f64,
    pub converged: bool,
}

impl SolveOutput {
    /// Add the obstacle back: `v = u + phi(x', t)`.
    pub fn v_field(&self, grid: &Grid, rp: &ReducedProblem) -> ScalarField {
        let n = rp.problem.n;
        let mut v = self.u.clone();
        let nodes = grid.nodes();
        for k in 0..v.slices() {
            let t = v.spec.time(k);
            for flat in 0..nodes {
                let x = grid.coords(flat);
                v.data[k * nodes + flat] += rp.problem.obstacle.phi(&x[..n - 1], t);
            }
        }
        v
    }
}

/// The per-slice linear system `A u = b` held as stencil data.
struct SliceSystem<'g> {
    grid: &'g Grid,
    strides: [usize; 3],
    /// dt / hx^2
    coeff: f64,
    diag: f64,
    /// Full slice buffer holding boundary values at outer nodes.
    u: Vec<f64>,
    /// Right-hand side at every node (meaningful at unknowns).
    b: Vec<f64>,
}

impl<'g> SliceSystem<'g> {
    fn new(grid: &'g Grid, rp: &ReducedProblem, prev: &[f64], k: usize) -> Self {
        let spec = grid.spec();
        let coeff = spec.dt / (spec.hx() * spec.hx());
        let diag = 1.0 + 2.0 * spec.n as f64 * coeff;
        let t = spec.time(k);
        let nodes = grid.nodes();
        let mut u = prev.to_vec();
        let mut b = vec![0.0; nodes];
        for flat in 0..nodes {
            match grid.class(flat) {
                NodeClass::Outer => u[flat] = rp.boundary_u(&grid.coords(flat), t),
                _ => b[flat] = prev[flat] - spec.dt * rp.f.at(k, flat),
            }
        }
        let mut strides = [0usize; 3];
        strides[..spec.n].copy_from_slice(grid.strides());
        SliceSystem { grid, strides, coeff, diag, u, b }
    }

    #[inline]
    fn neighbor_sum(&self, flat: usize, thin: bool) -> f64 {
        let n = self.grid.spec().n;
        let mut acc = 0.0;
        for a in 0..n {
            let s = self.strides[a];
            if a == n - 1 && thin {
                acc += 2.0 * self.u[flat + s];
            } else {
                acc += self.u[flat + s] + self.u[flat - s];
            }
        }
        acc
    }

    /// Row residual `(A u - b)` at an unknown.
    #[inline]
    fn row_residual(&self, flat: usize, thin: bool) -> f64 {
        self.diag * self.u[flat] - self.coeff * self.neighbor_sum(flat, thin) - self.b[flat]
    }

    /// Natural LCP residual sup over unknowns.
    fn natural_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for &flat in self.grid.unknowns() {
            let thin = self.grid.class(flat) == NodeClass::Thin;
            let r = self.row_residual(flat, thin);
            let v = if thin { self.u[flat].min(r).abs() } else { r.abs() };
            worst = worst.max(v);
        }
        worst
    }

    fn psor_sweep(&mut self, omega: f64, project: bool) {
        for &flat in self.grid.unknowns() {
            let thin = self.grid.class(flat) == NodeClass::Thin;
            let gs = (self.b[flat] + self.coeff * self.neighbor_sum(flat, thin)) / self.diag;
            let mut val = self.u[flat] + omega * (gs - self.u[flat]);
            if project && thin && val < 0.0 {
                val = 0.0;
            }
            self.u[flat] = val;
        }
    }

    fn finish(self, spec: &SolverSpec, scale: f64, iterations: usize, converged: bool) -> StepResult {
        let hx_over_dt = self.grid.hx() / self.grid.spec().dt;
        let mut contact = Vec::with_capacity(self.grid.thin_nodes().len());
        let mut flux = Vec::with_capacity(self.grid.thin_nodes().len());
        let mut comp_gap = 0.0f64;
        for &flat in self.grid.thin_nodes() {
            let w = self.row_residual(flat, true);
            let q = -hx_over_dt * w;
            contact.push(self.u[flat] <= spec.tol_comp * scale);
            comp_gap = comp_gap.max((self.u[flat] * q).abs());
            flux.push(q);
        }
        let residual = self.natural_residual();
        StepResult { u: self.u, contact, flux, iterations, residual, comp_gap, converged }
    }
}

/// Advance one implicit-Euler step from `prev` (slice `k-1`) to slice `k`.
pub fn step(
    rp: &ReducedProblem,
    grid: &Grid,
    prev: &[f64],
    k: usize,
    spec: &SolverSpec,
    scale: f64,
) -> Result<StepResult> {
    spec.validate()?;
    if prev.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalAbort { slice: k.saturating_sub(1) });
    }
    let result = match spec.method {
        Method::Psor => step_psor(rp, grid, prev, k, spec, scale),
        Method::ActiveSet => step_active_set(rp, grid, prev, k, spec, scale),
        Method::Penalty => {
            let eps = *spec.penalty_eps.last().unwrap();
            step_penalty(rp, grid, prev, k, spec, scale, eps)
        }
    }?;
    if result.u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalAbort { slice: k });
    }
    Ok(result)
}

fn step_psor(
    rp: &ReducedProblem,
    grid: &Grid,
    prev: &[f64],
    k: usize,
    spec: &SolverSpec,
    scale: f64,
) -> Result<StepResult> {
    let mut sys = SliceSystem::new(grid, rp, prev, k);
    // clamp the warm start at thin nodes
    for &t in grid.thin_nodes() {
        if sys.u[t] < 0.0 {
            sys.u[t] = 0.0;
        }
    }
    let tol = spec.tol_residual * scale;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < spec.max_iters {
        sys.psor_sweep(spec.omega, true);
        iterations += 1;
        if sys.natural_residual() <= tol {
            converged = true;
            break;
        }
    }
    Ok(sys.finish(spec, scale, iterations, converged))
}

/// Dense assembly of the slice system over the unknowns, used by the
/// enumeration and penalty paths.
struct DenseSystem {
    nd: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    /// positions of thin nodes within the unknown ordering
    thin_pos: Vec<usize>,
}

fn assemble_dense(grid: &Grid, sys: &SliceSystem) -> DenseSystem {
    let unknowns = grid.unknowns();
    let nd = unknowns.len();
    let mut index = vec![usize::MAX; grid.nodes()];
    for (j, &flat) in unknowns.iter().enumerate() {
        index[flat] = j;
    }
    let n = grid.spec().n;
    let strides = grid.strides();
    let mut a = vec![0.0; nd * nd];
    let mut b = vec![0.0; nd];
    let mut thin_pos = Vec::new();
    for (i, &flat) in unknowns.iter().enumerate() {
        let thin = grid.class(flat) == NodeClass::Thin;
        if thin {
            thin_pos.push(i);
        }
        a[i * nd + i] = sys.diag;
        b[i] = sys.b[flat];
        for ax in 0..n {
            let s = strides[ax];
            let mut add = |nbr: usize, w: f64| {
                let j = index[nbr];
                if j == usize::MAX {
                    b[i] += w * sys.u[nbr]; // boundary contribution
                } else {
                    a[i * nd + j] -= w;
                }
            };
            if ax == n - 1 && thin {
                add(flat + s, 2.0 * sys.coeff);
            } else {
                add(flat + s, sys.coeff);
                add(flat - s, sys.coeff);
            }
        }
    }
    DenseSystem { nd, a, b, thin_pos }
}

/// In-place LU solve with partial pivoting.
fn lu_solve(a: &mut [f64], nd: usize, b: &mut [f64]) -> Result<()> {
    for col in 0..nd {
        let mut piv = col;
        let mut best = a[col * nd + col].abs();
        for r in col + 1..nd {
            let v = a[r * nd + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Grid("singular slice system".into()));
        }
        if piv != col {
            for c in 0..nd {
                a.swap(col * nd + c, piv * nd + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * nd + col];
        for r in col + 1..nd {
            let factor = a[r * nd + col] / d;
            if factor == 0.0 {
                continue;
            }
            a[r * nd + col] = 0.0;
            for c in col + 1..nd {
                a[r * nd + c] -= factor * a[col * nd + c];
            }
            b[r] -= factor * b[col];
        }
    }
    for r in (0..nd).rev() {
        let mut acc = b[r];
        for c in r + 1..nd {
            acc -= a[r * nd + c] * b[c];
        }
        b[r] = acc / a[r * nd + r];
    }
    Ok(())
}

/// Maximum number of thin nodes for exhaustive active-set enumeration.
pub const ACTIVE_SET_LIMIT: usize = 12;

fn step_active_set(
    rp: &ReducedProblem,
    grid: &Grid,
    prev: &[f64],
    k: usize,
    spec: &SolverSpec,
    scale: f64,
) -> Result<StepResult> {
    let mut sys = SliceSystem::new(grid, rp, prev, k);
    let dense = assemble_dense(grid, &sys);
    let t = dense.thin_pos.len();
    if t > ACTIVE_SET_LIMIT {
        return Err(Error::Grid(format!(
            "active_set enumeration limited to {} thin nodes, instance has {}",
            ACTIVE_SET_LIMIT, t
        )));
    }
    let tol = spec.tol_residual.max(1e-12) * scale * 10.0;
    let nd = dense.nd;
    for mask in 0u64..(1u64 << t) {
        // impose u = 0 on the candidate contact set
        let mut a = dense.a.clone();
        let mut b = dense.b.clone();
        for (bit, &pos) in dense.thin_pos.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                for c in 0..nd {
                    a[pos * nd + c] = 0.0;
                }
                a[pos * nd + pos] = 1.0;
                b[pos] = 0.0;
            }
        }
        if lu_solve(&mut a, nd, &mut b).is_err() {
            continue;
        }
        // feasibility against the original rows
        let mut ok = true;
        for (bit, &pos) in dense.thin_pos.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                let mut w = -dense.b[pos];
                for c in 0..nd {
                    w += dense.a[pos * nd + c] * b[c];
                }
                if w < -tol {
                    ok = false;
                    break;
                }
            } else if b[pos] < -tol {
                ok = false;
                break;
            }
        }
        if ok {
            for (j, &flat) in grid.unknowns().iter().enumerate() {
                sys.u[flat] = b[j];
            }
            return Ok(sys.finish(spec, scale, mask as usize + 1, true));
        }
    }
    Err(Error::NonConverged { slice: k, residual: f64::NAN })
}

fn step_penalty(
    rp: &ReducedProblem,
    grid: &Grid,
    prev: &[f64],
    k: usize,
    spec: &SolverSpec,
    scale: f64,
    eps: f64,
) -> Result<StepResult> {
    let mut sys = SliceSystem::new(grid, rp, prev, k);
    let u = penalty_slice(grid, &mut sys, spec, scale, eps)?;
    for (j, &flat) in grid.unknowns().iter().enumerate() {
        sys.u[flat] = u[j];
    }
    // The penalized solution dips below zero by O(eps); report masks with the
    // complementarity tolerance against the penalized values.
    Ok(sys.finish(spec, scale, 0, true))
}

/// Damped semismooth Newton for the penalized slice system
/// `A u + (1/eps) min(u, 0) |thin = b`.
///
/// Each Newton step solves the linearization on the current active set by
/// SOR; activity changes are the semismooth updates. Returns the unknown
/// vector in `grid.unknowns()` order.
fn penalty_slice(
    grid: &Grid,
    sys: &mut SliceSystem,
    spec: &SolverSpec,
    scale: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    let unknowns = grid.unknowns();
    let tol = spec.tol_residual * scale;
    let thin_flags: Vec<bool> = unknowns.iter().map(|&f| grid.class(f) == NodeClass::Thin).collect();

    let penalty_residual = |sys: &SliceSystem| -> f64 {
        let mut worst = 0.0f64;
        for (j, &flat) in unknowns.iter().enumerate() {
            let thin = thin_flags[j];
            let mut r = sys.row_residual(flat, thin);
            if thin && sys.u[flat] < 0.0 {
                r += sys.u[flat] / eps;
            }
            worst = worst.max(r.abs());
        }
        worst
    };

    let mut best = penalty_residual(sys);
    for _newton in 0..200 {
        if best <= tol {
            break;
        }
        let snapshot: Vec<f64> = unknowns.iter().map(|&f| sys.u[f]).collect();
        let active: Vec<bool> = unknowns
            .iter()
            .zip(&thin_flags)
            .map(|(&f, &thin)| thin && sys.u[f] < 0.0)
            .collect();
        // inner SOR sweeps on the active-set linearization
        for _sweep in 0..spec.max_iters {
            let mut worst = 0.0f64;
            for (j, &flat) in unknowns.iter().enumerate() {
                let thin = thin_flags[j];
                let d = if active[j] { sys.diag + 1.0 / eps } else { sys.diag };
                let gs = (sys.b[flat] + sys.coeff * sys.neighbor_sum(flat, thin)) / d;
                let newv = sys.u[flat] + spec.omega.min(1.0) * (gs - sys.u[flat]);
                worst = worst.max((newv - sys.u[flat]).abs() * d);
                sys.u[flat] = newv;
            }
            if worst <= 0.05 * tol {
                break;
            }
        }
        // damping: if the semismooth residual grew, halve the update
        let mut cur = penalty_residual(sys);
        let mut halvings = 0;
        while cur > best && halvings < 30 {
            for (j, &flat) in unknowns.iter().enumerate() {
                sys.u[flat] = 0.5 * (sys.u[flat] + snapshot[j]);
            }
            cur = penalty_residual(sys);
            halvings += 1;
        }
        if cur >= best && halvings >= 30 {
            return Err(Error::NonConverged { slice: 0, residual: cur });
        }
        best = cur;
    }
    if best > tol {
        return Err(Error::NonConverged { slice: 0, residual: best });
    }
    Ok(unknowns.iter().map(|&f| sys.u[f]).collect())
}

/// March the reduced problem from the initial slice to `t1`.
pub fn solve(rp: &ReducedProblem, grid: &Grid, spec: &SolverSpec) -> Result<SolveOutput> {
    spec.validate()?;
    let scale = data_scale(rp, grid);
    let slices = grid.spec().slices();
    let nodes = grid.nodes();

    let mut u = ScalarField::zeros(grid);
    u.slice_mut(0).copy_from_slice(&rp.initial_u);

    let mut masks = Vec::with_capacity(slices);
    masks.push(
        grid.thin_nodes()
            .iter()
            .map(|&t| rp.initial_u[t] <= spec.tol_comp * scale)
            .collect::<Vec<bool>>(),
    );

    let mut stats = Vec::with_capacity(slices.saturating_sub(1));
    let mut nonconverged = 0usize;
    for k in 1..slices {
        let prev: Vec<f64> = u.slice(k - 1).to_vec();
        let res = step(rp, grid, &prev, k, spec, scale).map_err(|e| match e {
            Error::NumericalAbort { .. } => Error::NumericalAbort { slice: k },
            other => other,
        })?;
        if !res.converged {
            nonconverged += 1;
        }
        u.data[k * nodes..(k + 1) * nodes].copy_from_slice(&res.u);
        masks.push(res.contact.clone());
        stats.push(SliceStats {
            iterations: res.iterations,
            residual: res.residual,
            comp_gap: res.comp_gap,
            converged: res.converged,
        });
    }
    Ok(SolveOutput { u, masks, stats, scale, nonconverged_slices: nonconverged })
}

/// Penalized march at a fixed `eps`; converges to the LCP solution from
/// below as `eps` decreases.
pub fn penalty_solve(rp: &ReducedProblem, grid: &Grid, eps: f64, spec: &SolverSpec) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(Error::Grid(format!("penalty eps must be positive, got {}", eps)));
    }
    let scale = data_scale(rp, grid);
    let slices = grid.spec().slices();
    let nodes = grid.nodes();
    let mut u = ScalarField::zeros(grid);
    u.slice_mut(0).copy_from_slice(&rp.initial_u);
    for k in 1..slices {
        let prev: Vec<f64> = u.slice(k - 1).to_vec();
        let mut sys = SliceSystem::new(grid, rp, &prev, k);
        let vals = penalty_slice(grid, &mut sys, spec, scale, eps)
            .map_err(|e| match e {
                Error::NonConverged { residual, .. } => Error::NonConverged { slice: k, residual },
                other => other,
            })?;
        for (j, &flat) in grid.unknowns().iter().enumerate() {
            sys.u[flat] = vals[j];
        }
        u.data[k * nodes..(k + 1) * nodes].copy_from_slice(&sys.u);
    }
    if !u.all_finite() {
        return Err(Error::NumericalAbort { slice: slices - 1 });
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::problem::{reduce, OracleField, Poly, PresetKind, SignoriniProblem};

    fn setup(preset: &str, params: serde_json::Value, n: usize, m: usize, dt: f64, t0: f64) -> (Grid, ReducedProblem) {
        let grid = Grid::new(GridSpec::new(n, m, dt, t0, 0.0).unwrap()).unwrap();
        let p = SignoriniProblem::preset(preset, &params, n).unwrap();
        let rp = reduce(&p, &grid).unwrap();
        (grid, rp)
    }

    #[test]
    fn no_contact_step_is_exact_to_tolerance() {
        let (grid, rp) = setup("no_contact", serde_json::json!({"c": 3.0}), 2, 33, 1e-3, -0.05);
        let out = solve(&rp, &grid, &SolverSpec::default()).unwrap();
        let p = &rp.problem;
        let mut worst = 0.0f64;
        let last = grid.spec().slices() - 1;
        for flat in 0..grid.nodes() {
            let exact = p
                .oracle_eval(OracleField::V, &grid.coords(flat), grid.spec().time(last))
                .unwrap();
            worst = worst.max((out.u.at(last, flat) - exact).abs());
        }
        // the quadratic caloric oracle is reproduced exactly up to solver tol
        assert!(worst < 1e-9, "sup error {}", worst);
        assert!(out.masks.iter().all(|m| m.iter().all(|c| !c)));
    }

    #[test]
    fn full_contact_pins_the_thin_plane() {
        let (grid, rp) = setup("full_contact", serde_json::json!({}), 2, 17, 1e-3, -0.02);
        let out = solve(&rp, &grid, &SolverSpec::default()).unwrap();
        for k in 0..grid.spec().slices() {
            for (j, &t) in grid.thin_nodes().iter().enumerate() {
                assert_eq!(out.u.at(k, t), 0.0, "slice {} thin {}", k, j);
                assert!(out.masks[k][j]);
            }
        }
        // step invariants: flux <= tol, |u*flux| ~ 0
        let prev: Vec<f64> = out.u.slice(3).to_vec();
        let res = step(&rp, &grid, &prev, 4, &SolverSpec::default(), out.scale).unwrap();
        for (j, &q) in res.flux.iter().enumerate() {
            assert!(q <= 1e-10, "flux {} at thin {}", q, j);
            assert!((q + 2.0).abs() < 1e-6, "flux should be ~ 2*d_n u = -2, got {}", q);
        }
        assert!(res.comp_gap <= 1e-10);
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = SignoriniProblem::from_preset(
            PresetKind::Custom { phi: Poly::zero(2), vdata: Poly::zero(3) },
            2,
        );
        let grid = Grid::new(GridSpec::new(2, 9, 1e-2, -0.1, 0.0).unwrap()).unwrap();
        let rp = reduce(&p, &grid).unwrap();
        let out = solve(&rp, &grid, &SolverSpec::default()).unwrap();
        assert!(out.u.data.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn psor_matches_active_set_enumeration() {
        // m = 9 keeps 7 thin nodes: exhaustive enumeration is the oracle.
        let (grid, rp) = setup("halfspace32", serde_json::json!({}), 2, 9, 2e-3, -0.02);
        let spec_psor = SolverSpec::default();
        let spec_enum = SolverSpec { method: Method::ActiveSet, ..SolverSpec::default() };
        let out_p = solve(&rp, &grid, &spec_psor).unwrap();
        let out_e = solve(&rp, &grid, &spec_enum).unwrap();
        let diff = out_p
            .u
            .data
            .iter()
            .zip(&out_e.u.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-10, "PSOR vs enumeration diff {}", diff);
        assert_eq!(out_p.masks, out_e.masks);
    }

    #[test]
    fn penalty_converges_from_below() {
        let (grid, rp) = setup("full_contact", serde_json::json!({}), 2, 9, 2e-3, -0.02);
        let out = solve(&rp, &grid, &SolverSpec::default()).unwrap();
        let spec = SolverSpec::default();
        let mut gaps = Vec::new();
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let up = penalty_solve(&rp, &grid, eps, &spec).unwrap();
            let mut gap = 0.0f64;
            for (a, b) in up.data.iter().zip(&out.u.data) {
                assert!(*a <= b + 1e-11, "penalty above LCP: {} vs {}", a, b);
                gap = gap.max(b - a);
            }
            gaps.push(gap);
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gaps not decreasing: {:?}", gaps);
        assert!(gaps[2] / gaps[0] < 1.0 / 25.0, "gap decay too slow: {:?}", gaps);
    }

    #[test]
    fn penalty_is_inactive_without_contact() {
        let (grid, rp) = setup("no_contact", serde_json::json!({"c": 3.0}), 2, 9, 2e-3, -0.02);
        let out = solve(&rp, &grid, &SolverSpec::default()).unwrap();
        let up = penalty_solve(&rp, &grid, 1e-3, &SolverSpec::default()).unwrap();
        let gap = up
            .data
            .iter()
            .zip(&out.u.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap <= 1e-12, "gap {}", gap);
    }

    /// Custom problem with polynomial data that develops contact over time:
    /// vdata = x1^2 + x2 - 5 (t - t0) is nonnegative on the thin plane at
    /// t0 but dips negative in the middle as t increases.
    fn contact_poly_problem(scale: f64, t0: f64) -> SignoriniProblem {
        let vdata = Poly::from_terms(
            3,
            vec![
                (vec![2, 0, 0], scale),
                (vec![0, 1, 0], scale),
                (vec![0, 0, 1], -5.0 * scale),
                (vec![0, 0, 0], 5.0 * t0 * scale),
            ],
        );
        SignoriniProblem::from_preset(PresetKind::Custom { phi: Poly::zero(2), vdata }, 2)
    }

    #[test]
    fn scaling_equivariance_is_exact_for_powers_of_two() {
        let grid = Grid::new(GridSpec::new(2, 9, 2e-3, -0.02, 0.0).unwrap()).unwrap();
        let rp1 = reduce(&contact_poly_problem(1.0, -0.02), &grid).unwrap();
        let rp4 = reduce(&contact_poly_problem(4.0, -0.02), &grid).unwrap();
        let out1 = solve(&rp1, &grid, &SolverSpec::default()).unwrap();
        let out4 = solve(&rp4, &grid, &SolverSpec::default()).unwrap();
        // the run develops genuine contact
        assert!(out1.masks.last().unwrap().iter().any(|c| *c));
        for (a, b) in out1.u.data.iter().zip(&out4.u.data) {
            assert_eq!((4.0 * a).to_bits(), b.to_bits(), "{} vs {}", a, b);
        }
        assert_eq!(out1.masks, out4.masks);
    }

    #[test]
    fn comparison_principle_on_ordered_data() {
        // vdata_a = 3 + t + |x|^2/4, vdata_b = vdata_a - 1/2: ordered data
        // give ordered solutions (M-matrix LCP monotonicity).
        let grid = Grid::new(GridSpec::new(2, 9, 2e-3, -0.05, 0.0).unwrap()).unwrap();
        let mk = |shift: f64| {
            let vdata = Poly::from_terms(
                3,
                vec![
                    (vec![0, 0, 0], 3.0 - shift),
                    (vec![0, 0, 1], 1.0),
                    (vec![2, 0, 0], 0.25),
                    (vec![0, 2, 0], 0.25),
                ],
            );
            let p = SignoriniProblem::from_preset(
                PresetKind::Custom { phi: Poly::zero(2), vdata },
                2,
            );
            reduce(&p, &grid).unwrap()
        };
        let ua = solve(&mk(0.0), &grid, &SolverSpec::default()).unwrap();
        let ub = solve(&mk(0.5), &grid, &SolverSpec::default()).unwrap();
        for (a, b) in ua.u.data.iter().zip(&ub.u.data) {
            assert!(a + 1e-10 >= *b, "comparison violated: {} < {}", a, b);
        }
    }

    #[test]
    fn reflection_symmetry() {
        // full_contact data is symmetric under x1 -> -x1.
        let (grid, rp) = setup("full_contact", serde_json::json!({}), 2, 9, 2e-3, -0.02);
        let out = solve(&rp, &grid, &SolverSpec::default()).unwrap();
        let m = grid.shape()[0];
        let half = grid.shape()[1];
        for k in 0..grid.spec().slices() {
            let s = out.u.slice(k);
            for i in 0..m {
                for j in 0..half {
                    let a = s[i * half + j];
                    let b = s[(m - 1 - i) * half + j];
                    assert!((a - b).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn nan_input_aborts_with_slice_index() {
        let (grid, rp) = setup("full_contact", serde_json::json!({}), 2, 9, 2e-3, -0.02);
        let mut prev = rp.initial_u.clone();
        prev[10] = f64::NAN;
        match step(&rp, &grid, &prev, 1, &SolverSpec::default(), 1.0) {
            Err(Error::NumericalAbort { .. }) => {}
            other => panic!("expected abort, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = SolverSpec::default();
        s.omega = 2.5;
        assert!(s.validate().is_err());
        let mut s2 = SolverSpec::default();
        s2.penalty_eps = vec![1e-3, 1e-2];
        assert!(s2.validate().is_err());
    }
}
