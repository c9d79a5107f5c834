//! Problem instances: thin obstacle, initial and outer boundary data,
//! analytic oracle solutions, and the reduction `u = v - phi`.
//!
//! The reduction trades the obstacle for a right-hand side: `u` solves
//! `Delta u - d_t u = f := d_t phi - Delta_{x'} phi` with zero thin
//! obstacle, and all boundary/initial data shifted by `phi`. Obstacles are
//! analytic (closed-form presets or polynomials), so `f` and `d_t f` are
//! evaluated exactly rather than by stencils.

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridSpec, NodeClass, ScalarField};
use crate::{Error, Result};

/// Multivariate polynomial with exponent tuples in graded-lex order.
///
/// Variables are `(x_1, ..., x_k, t)` for obstacle polynomials (k = n-1
/// tangential coordinates) or `(x_1, ..., x_n, t)` for full-domain data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub nvars: usize,
    /// (exponents, coefficient) pairs.
    pub terms: Vec<(Vec<u32>, f64)>,
}

/// Exponent tuples of `nvars` variables with total degree <= `deg`,
/// graded-lex: ascending total degree, lexicographically descending within
/// a degree (so x1^2 precedes x1*x2 precedes x2^2).
pub fn graded_lex_exponents(nvars: usize, deg: u32) -> Vec<Vec<u32>> {
    fn tuples(nvars: usize, total: u32) -> Vec<Vec<u32>> {
        if nvars == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in (0..=total).rev() {
            for mut rest in tuples(nvars - 1, total - first) {
                let mut t = vec![first];
                t.append(&mut rest);
                out.push(t);
            }
        }
        out
    }
    let mut out = Vec::new();
    for d in 0..=deg {
        out.extend(tuples(nvars, d));
    }
    out
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: Vec::new() }
    }

    pub fn from_terms(nvars: usize, terms: Vec<(Vec<u32>, f64)>) -> Self {
        let mut p = Poly { nvars, terms };
        p.terms.retain(|(_, c)| *c != 0.0);
        p
    }

    /// Build from a graded-lex coefficient list of the given degree.
    pub fn from_coeff_list(nvars: usize, deg: u32, coeffs: &[f64]) -> Result<Self> {
        let exps = graded_lex_exponents(nvars, deg);
        if coeffs.len() != exps.len() {
            return Err(Error::PresetParams(format!(
                "coefficient list of degree {} over {} variables needs {} entries, got {}",
                deg,
                nvars,
                exps.len(),
                coeffs.len()
            )));
        }
        Ok(Poly::from_terms(nvars, exps.into_iter().zip(coeffs.iter().copied()).collect()))
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        debug_assert_eq!(vars.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(vars)
                    .map(|(&p, &v)| v.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Formal partial derivative in variable `var`.
    pub fn diff(&self, var: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[var] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[var] -= 1;
                (e2, c * e[var] as f64)
            })
            .collect();
        Poly::from_terms(self.nvars, terms)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::from_terms(self.nvars, self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            if let Some(t) = terms.iter_mut().find(|(te, _)| te == e) {
                t.1 -= c;
            } else {
                terms.push((e.clone(), -c));
            }
        }
        Poly::from_terms(self.nvars, terms)
    }
}

/// Thin obstacle `phi(x', t)` with its exact derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Obstacle {
    Zero,
    /// Polynomial in `(x_1, ..., x_{n-1}, t)`.
    Poly(Poly),
    /// `phi = sin(x_1) * t`; exercises non-polynomial forcing.
    SinX1T,
}

impl Obstacle {
    pub fn phi(&self, xp: &[f64], t: f64) -> f64 {
        match self {
            Obstacle::Zero => 0.0,
            Obstacle::Poly(p) => p.eval(&with_time(xp, t)),
            Obstacle::SinX1T => xp[0].sin() * t,
        }
    }

    pub fn dt_phi(&self, xp: &[f64], t: f64) -> f64 {
        match self {
            Obstacle::Zero => 0.0,
            Obstacle::Poly(p) => p.diff(p.nvars - 1).eval(&with_time(xp, t)),
            Obstacle::SinX1T => xp[0].sin(),
        }
    }

    /// Tangential Laplacian `Delta_{x'} phi`.
    pub fn lap_phi(&self, xp: &[f64], t: f64) -> f64 {
        match self {
            Obstacle::Zero => 0.0,
            Obstacle::Poly(p) => {
                let v = with_time(xp, t);
                (0..p.nvars - 1).map(|a| p.diff(a).diff(a).eval(&v)).sum()
            }
            Obstacle::SinX1T => -xp[0].sin() * t,
        }
    }

    /// Forcing of the reduced problem, `f = d_t phi - Delta_{x'} phi`.
    pub fn forcing(&self, xp: &[f64], t: f64) -> f64 {
        self.dt_phi(xp, t) - self.lap_phi(xp, t)
    }

    /// `d_t f = d_t(d_t phi - Delta_{x'} phi)` — the only obstacle
    /// regularity that enters the sup bound for the time derivative.
    pub fn dt_forcing(&self, xp: &[f64], t: f64) -> f64 {
        match self {
            Obstacle::Zero => 0.0,
            Obstacle::Poly(p) => {
                let v = with_time(xp, t);
                let tvar = p.nvars - 1;
                let dtt = p.diff(tvar).diff(tvar).eval(&v);
                let lap_t: f64 = (0..tvar).map(|a| p.diff(a).diff(a).diff(tvar).eval(&v)).sum();
                dtt - lap_t
            }
            Obstacle::SinX1T => xp[0].sin(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Obstacle::Zero)
            || matches!(self, Obstacle::Poly(p) if p.terms.is_empty())
    }
}

fn with_time(xp: &[f64], t: f64) -> Vec<f64> {
    let mut v = xp.to_vec();
    v.push(t);
    v
}

/// Lipschitz path of the prescribed free-boundary translation in
/// `moving_data`; `t` is the absolute grid time (t <= 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Path {
    Linear { s0: f64, speed: f64 },
    Quadratic { a0: f64, a1: f64, a2: f64 },
}

impl Path {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Path::Linear { s0, speed } => s0 + speed * t,
            Path::Quadratic { a0, a1, a2 } => a0 + a1 * t + a2 * t * t,
        }
    }

    pub fn is_monotone(&self) -> bool {
        matches!(self, Path::Linear { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PresetKind {
    /// Time-independent half-space solution `v = Re(x_{n-1} + i x_n)^{3/2}`.
    Halfspace32,
    /// `v = -x_n`: the obstacle binds on the whole thin plane.
    FullContact,
    /// `v = c + t + |x|^2/(2n)`: caloric, strictly positive on the plane.
    NoContact { c: f64 },
    /// Zero obstacle, boundary data a half-space profile translated along
    /// `x_{n-1}` by a prescribed path; the free boundary moves.
    MovingData { path: Path },
    /// Polynomial obstacle and v-data.
    Custom { phi: Poly, vdata: Poly },
}

/// A parabolic Signorini problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignoriniProblem {
    pub n: usize,
    pub preset: PresetKind,
    pub obstacle: Obstacle,
}

/// Which oracle quantity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleField {
    V,
    DtV,
    /// Inward normal derivative `d_{x_n} v(x', 0+)`; <= 0 on the contact set.
    Flux,
}

/// Half-space profile `W(y1, y2) = Re(y1 + i y2)^{3/2}`, `y2 >= 0`.
pub fn halfspace_profile(y1: f64, y2: f64) -> f64 {
    if y2 == 0.0 {
        // exact on the thin line: y1^{3/2} on the detached side, 0 on contact
        return if y1 > 0.0 { y1.powf(1.5) } else { 0.0 };
    }
    let r = (y1 * y1 + y2 * y2).sqrt();
    let th = y2.atan2(y1);
    r.powf(1.5) * (1.5 * th).cos()
}

impl SignoriniProblem {
    /// Build a preset by name; `params` carries preset-specific fields.
    pub fn preset(name: &str, params: &serde_json::Value, n: usize) -> Result<Self> {
        let preset = match name {
            "halfspace32" => PresetKind::Halfspace32,
            "full_contact" => PresetKind::FullContact,
            "no_contact" => {
                let c = params
                    .get("c")
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| Error::PresetParams("no_contact requires numeric `c`".into()))?;
                if c <= 0.0 {
                    return Err(Error::PresetParams(format!("no_contact: c = {} too small", c)));
                }
                PresetKind::NoContact { c }
            }
            "moving_data" => {
                let path: Path = serde_json::from_value(
                    params
                        .get("path")
                        .cloned()
                        .ok_or_else(|| Error::PresetParams("moving_data requires `path`".into()))?,
                )
                .map_err(|e| Error::PresetParams(format!("moving_data path: {}", e)))?;
                PresetKind::MovingData { path }
            }
            "custom" => {
                let (phi, vdata) = parse_custom(params, n)?;
                PresetKind::Custom { phi, vdata }
            }
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Ok(Self::from_preset(preset, n))
    }

    pub fn from_preset(preset: PresetKind, n: usize) -> Self {
        let obstacle = match &preset {
            PresetKind::Custom { phi, .. } => Obstacle::Poly(phi.clone()),
            _ => Obstacle::Zero,
        };
        SignoriniProblem { n, preset, obstacle }
    }

    /// Replace the obstacle (test instrumentation for the reduction).
    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacle = obstacle;
        self
    }

    /// Dirichlet/initial data for `v` as a function on the whole closed
    /// cylinder; the solver samples it on outer faces and at `t0`.
    pub fn data_v(&self, x: &[f64], t: f64) -> f64 {
        let n = self.n;
        match &self.preset {
            PresetKind::Halfspace32 => halfspace_profile(x[n - 2], x[n - 1]),
            PresetKind::FullContact => -x[n - 1],
            PresetKind::NoContact { c } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                c + t + r2 / (2.0 * n as f64)
            }
            PresetKind::MovingData { path } => halfspace_profile(x[n - 2] - path.eval(t), x[n - 1]),
            PresetKind::Custom { vdata, .. } => vdata.eval(&with_time(x, t)),
        }
    }

    pub fn has_oracle(&self) -> bool {
        matches!(
            self.preset,
            PresetKind::Halfspace32 | PresetKind::FullContact | PresetKind::NoContact { .. }
        )
    }

    /// Exact analytic value at a point, for presets that carry an oracle.
    pub fn oracle_eval(&self, which: OracleField, x: &[f64], t: f64) -> Result<f64> {
        if !self.has_oracle() {
            return Err(Error::NoOracle);
        }
        let n = self.n;
        Ok(match (which, &self.preset) {
            (OracleField::V, _) => self.data_v(x, t),
            (OracleField::DtV, PresetKind::NoContact { .. }) => 1.0,
            (OracleField::DtV, _) => 0.0,
            (OracleField::Flux, PresetKind::Halfspace32) => {
                let y = x[n - 2];
                if y >= 0.0 {
                    0.0
                } else {
                    -1.5 * (-y).sqrt()
                }
            }
            (OracleField::Flux, PresetKind::FullContact) => -1.0,
            (OracleField::Flux, PresetKind::NoContact { .. }) => 0.0,
            _ => unreachable!(),
        })
    }

    /// Grid-dependent validity checks (e.g. positivity margin of no_contact).
    pub fn validate_on(&self, spec: &GridSpec) -> Result<()> {
        if let PresetKind::NoContact { c } = self.preset {
            if c + spec.t0 <= 0.0 {
                return Err(Error::PresetParams(format!(
                    "no_contact: c = {} too small for t0 = {} (need c + t0 > 0)",
                    c, spec.t0
                )));
            }
        }
        Ok(())
    }
}

fn parse_custom(params: &serde_json::Value, n: usize) -> Result<(Poly, Poly)> {
    let read_poly = |key: &str, nvars: usize| -> Result<Poly> {
        let obj = params
            .get(key)
            .ok_or_else(|| Error::PresetParams(format!("custom requires `{}`", key)))?;
        let deg = obj
            .get("degree")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::PresetParams(format!("custom.{}.degree missing", key)))? as u32;
        let coeffs: Vec<f64> = obj
            .get("coeffs")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::PresetParams(format!("custom.{}.coeffs missing", key)))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::PresetParams(format!("custom.{}.coeffs must be numbers", key))))
            .collect::<Result<_>>()?;
        Poly::from_coeff_list(nvars, deg, &coeffs)
    };
    Ok((read_poly("phi", n)?, read_poly("vdata", n + 1)?))
}

/// The reduced problem for `u = v - phi`: zero thin obstacle, forcing `f`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub problem: SignoriniProblem,
    /// `f = d_t phi - Delta_{x'} phi`, sampled on the half grid (constant
    /// in `x_n` by the even extension of `f`).
    pub f: ScalarField,
    /// Initial slice of `u` on every node.
    pub initial_u: Vec<f64>,
    /// Sup of `|d_t f|` over the grid — the computable surrogate for the
    /// obstacle regularity budget.
    pub dt_f_sup: f64,
}

impl ReducedProblem {
    /// Boundary value of `u` at a point of an outer face.
    pub fn boundary_u(&self, x: &[f64], t: f64) -> f64 {
        let n = self.problem.n;
        self.problem.data_v(x, t) - self.problem.obstacle.phi(&x[..n - 1], t)
    }

    /// Reconstruct the v-data arrays from the problem's closed forms; the
    /// round trip against [`reduce`]'s inputs is exact by construction.
    pub fn un_reduce_initial(&self, grid: &Grid) -> Vec<f64> {
        let t0 = grid.spec().t0;
        (0..grid.nodes()).map(|i| self.problem.data_v(&grid.coords(i), t0)).collect()
    }
}

/// Reduce a Signorini problem to zero thin obstacle on the given grid.
///
/// Rejects instances violating the compatibility condition
/// `phi0 >= phi(., t0)` on the thin plane, reporting the offending node.
pub fn reduce(p: &SignoriniProblem, grid: &Grid) -> Result<ReducedProblem> {
    p.validate_on(grid.spec())?;
    let spec = *grid.spec();
    let n = p.n;

    // compatibility at thin nodes
    for &flat in grid.thin_nodes() {
        let x = grid.coords(flat);
        let phi0 = p.data_v(&x, spec.t0);
        let phi = p.obstacle.phi(&x[..n - 1], spec.t0);
        if phi0 < phi - 1e-12 {
            return Err(Error::Compatibility { coords: x, phi0, phi });
        }
    }

    let f = ScalarField::from_fn(grid, |x, t| p.obstacle.forcing(&x[..n - 1], t));
    if !f.all_finite() {
        return Err(Error::Grid("forcing is not finite on the grid".into()));
    }

    let initial_u: Vec<f64> = (0..grid.nodes())
        .map(|i| {
            let x = grid.coords(i);
            p.data_v(&x, spec.t0) - p.obstacle.phi(&x[..n - 1], spec.t0)
        })
        .collect();
    if initial_u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid("initial data is not finite on the grid".into()));
    }

    let mut dt_f_sup = 0.0f64;
    for k in 0..spec.slices() {
        let t = spec.time(k);
        for &flat in grid.thin_nodes() {
            let x = grid.coords(flat);
            let v = p.obstacle.dt_forcing(&x[..n - 1], t);
            if !v.is_finite() {
                return Err(Error::Grid("d_t f is not finite on the grid".into()));
            }
            dt_f_sup = dt_f_sup.max(v.abs());
        }
    }

    Ok(ReducedProblem { problem: p.clone(), f, initial_u, dt_f_sup })
}

/// Data scale for relative tolerances: `max(1, sup|data|)` over initial,
/// boundary and forcing data.
pub fn data_scale(rp: &ReducedProblem, grid: &Grid) -> f64 {
    let mut s = 1.0f64;
    for v in &rp.initial_u {
        s = s.max(v.abs());
    }
    for v in &rp.f.data {
        s = s.max(v.abs());
    }
    let spec = grid.spec();
    for k in 0..spec.slices() {
        let t = spec.time(k);
        for flat in 0..grid.nodes() {
            if grid.class(flat) == NodeClass::Outer {
                s = s.max(rp.boundary_u(&grid.coords(flat), t).abs());
            }
        }
    }
    s
}
