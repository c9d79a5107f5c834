//! Space-time tensor grids on the half-box and finite-difference stencils.
//!
//! The computational domain is `[-1,1]^{n-1} x [0,1]` (a box stand-in for
//! the half-ball; the verified statements are interior/thin-boundary local)
//! times the interval `(t0, t1]`. The thin plane `{x_n = 0}` is a node
//! plane, and fields are understood as evenly extended across it:
//! `u(x', -x_n, t) = u(x', x_n, t)`. Stencils at thin nodes use the mirror
//! ghost value, so the five/seven-point Laplacian there reads
//! `2 (u(x',hx,t) - u(x',0,t)) / hx^2` plus the tangential part — which is
//! exactly how the distributional flux term `2 d^+_{x_n} u` of the extended
//! equation shows up on the grid.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Specification of a space-time tensor grid.
///
/// `m` is the node count per extended spatial axis (odd, so that the thin
/// plane is a node plane); the `x_n` half-axis has `(m+1)/2` nodes with the
/// same spacing `hx = 2/(m-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
}

impl GridSpec {
    pub fn new(n: usize, m: usize, dt: f64, t0: f64, t1: f64) -> Result<Self> {
        let spec = GridSpec { n, m, dt, t0, t1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > MAX_DIM {
            return Err(Error::Grid(format!("n must be 2 or 3, got {}", self.n)));
        }
        if self.m % 2 == 0 {
            return Err(Error::Grid(format!("m must be odd, got {}", self.m)));
        }
        if self.m < 9 {
            return Err(Error::Grid(format!("m must be >= 9, got {}", self.m)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Grid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t0 < self.t1) {
            return Err(Error::Grid(format!("need t0 < t1, got t0 = {}, t1 = {}", self.t0, self.t1)));
        }
        if self.t1 > 0.0 {
            return Err(Error::Grid(format!("need t1 <= 0, got {}", self.t1)));
        }
        Ok(())
    }

    /// Spatial spacing, identical on all axes.
    pub fn hx(&self) -> f64 {
        2.0 / (self.m - 1) as f64
    }

    /// Node count on the x_n half-axis.
    pub fn half_len(&self) -> usize {
        (self.m + 1) / 2
    }

    /// Number of time slices, `round((t1-t0)/dt) + 1`.
    pub fn slices(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).round() as usize + 1
    }

    /// Time of slice `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Shape of the stored (half) spatial grid, x_n axis last.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.m; self.n - 1];
        s.push(self.half_len());
        s
    }
}

/// Classification of a spatial node of the half grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Strictly inside the half-box, `x_n > 0`.
    Interior,
    /// On the thin plane `x_n = 0`, away from the outer faces.
    Thin,
    /// On an outer face of the box (Dirichlet data lives here).
    Outer,
}

/// A realized grid: index maps, node classes, node coordinates.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    shape: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    /// Interior and thin nodes — the unknowns of one time slice, in
    /// lexicographic order.
    unknowns: Vec<usize>,
    /// Thin nodes only, lexicographic in the tangential index.
    thin: Vec<usize>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let shape = spec.shape();
        let n = spec.n;
        let mut strides = vec![1usize; n];
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let nodes: usize = shape.iter().product();

        let mut class = Vec::with_capacity(nodes);
        let mut unknowns = Vec::new();
        let mut thin = Vec::new();
        let mut idx = vec![0usize; n];
        for flat in 0..nodes {
            let mut outer = idx[n - 1] == shape[n - 1] - 1;
            for a in 0..n - 1 {
                outer |= idx[a] == 0 || idx[a] == shape[a] - 1;
            }
            let c = if outer {
                NodeClass::Outer
            } else if idx[n - 1] == 0 {
                NodeClass::Thin
            } else {
                NodeClass::Interior
            };
            class.push(c);
            match c {
                NodeClass::Outer => {}
                NodeClass::Thin => {
                    unknowns.push(flat);
                    thin.push(flat);
                }
                NodeClass::Interior => unknowns.push(flat),
            }
            // advance multi-index
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }

        Ok(Grid { spec, shape, strides, class, unknowns, thin })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn nodes(&self) -> usize {
        self.class.len()
    }

    pub fn hx(&self) -> f64 {
        self.spec.hx()
    }

    pub fn class(&self, flat: usize) -> NodeClass {
        self.class[flat]
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Flat-index strides per axis (x_n axis has stride 1).
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn thin_nodes(&self) -> &[usize] {
        &self.thin
    }

    pub fn multi(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        self.strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinate of node index `i` on axis `a`.
    pub fn coord(&self, a: usize, i: usize) -> f64 {
        if a + 1 == self.spec.n {
            i as f64 * self.spec.hx()
        } else {
            -1.0 + i as f64 * self.spec.hx()
        }
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    /// Nearest node index on axis `a` for coordinate `x` (clamped).
    pub fn nearest_index(&self, a: usize, x: f64) -> usize {
        let hx = self.spec.hx();
        let off = if a + 1 == self.spec.n { 0.0 } else { -1.0 };
        let i = ((x - off) / hx).round();
        (i.max(0.0) as usize).min(self.shape[a] - 1)
    }

    /// Nearest time slice for `t` (clamped).
    pub fn nearest_slice(&self, t: f64) -> usize {
        let k = ((t - self.spec.t0) / self.spec.dt).round();
        (k.max(0.0) as usize).min(self.spec.slices() - 1)
    }
}

/// Values of a scalar quantity on every node of every time slice.
///
/// Layout is row-major with time slowest and the x_n axis fastest. A field
/// is either stored on the half grid (default) or materialized on the
/// evenly extended grid (`extended == true`, x_n axis covering `[-1,1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub shape: Vec<usize>,
    pub extended: bool,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        let spec = *grid.spec();
        let shape = spec.shape();
        let len = spec.slices() * grid.nodes();
        ScalarField { spec, shape, extended: false, data: vec![0.0; len] }
    }

    /// Sample `f(x, t)` at every node of every slice.
    pub fn from_fn<F: FnMut(&[f64], f64) -> f64>(grid: &Grid, mut f: F) -> Self {
        let mut field = Self::zeros(grid);
        let nodes = grid.nodes();
        for k in 0..field.spec.slices() {
            let t = field.spec.time(k);
            for flat in 0..nodes {
                let x = grid.coords(flat);
                field.data[k * nodes + flat] = f(&x, t);
            }
        }
        field
    }

    pub fn slices(&self) -> usize {
        self.spec.slices()
    }

    pub fn nodes_per_slice(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.nodes_per_slice();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.nodes_per_slice();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn at(&self, k: usize, flat: usize) -> f64 {
        self.data[k * self.nodes_per_slice() + flat]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Materialize the even extension across `{x_n = 0}`.
    ///
    /// Extending an already extended field returns an identical copy, so the
    /// operation is idempotent bit for bit.
    pub fn even_extension(&self) -> ScalarField {
        if self.extended {
            return self.clone();
        }
        let n = self.spec.n;
        let half = self.shape[n - 1];
        let full = 2 * half - 1;
        let mut shape = self.shape.clone();
        shape[n - 1] = full;

        let tang: usize = self.shape[..n - 1].iter().product();
        let slices = self.slices();
        let mut data = Vec::with_capacity(slices * tang * full);
        for k in 0..slices {
            let src = self.slice(k);
            for row in 0..tang {
                let base = row * half;
                for e in 0..full {
                    let i = (e as isize - (half as isize - 1)).unsigned_abs();
                    data.push(src[base + i]);
                }
            }
        }
        ScalarField { spec: self.spec, shape, extended: true, data }
    }

    /// Restrict an extended field back to the half grid.
    pub fn restrict(&self) -> ScalarField {
        if !self.extended {
            return self.clone();
        }
        let n = self.spec.n;
        let full = self.shape[n - 1];
        let half = (full + 1) / 2;
        let mut shape = self.shape.clone();
        shape[n - 1] = half;

        let tang: usize = self.shape[..n - 1].iter().product();
        let slices = self.slices();
        let mut data = Vec::with_capacity(slices * tang * half);
        for k in 0..slices {
            let src = self.slice(k);
            for row in 0..tang {
                let base = row * full;
                for i in 0..half {
                    data.push(src[base + (half - 1) + i]);
                }
            }
        }
        ScalarField { spec: self.spec, shape, extended: false, data }
    }
}

/// Discrete Laplacian of one time slice of a half-grid field.
///
/// Second-order central differences with the even-extension mirror at the
/// thin plane. Values are produced at interior and thin nodes; outer nodes
/// are left at zero.
pub fn laplacian(grid: &Grid, field: &ScalarField, k: usize) -> Vec<f64> {
    assert!(!field.extended, "laplacian operates on half-grid fields");
    let u = field.slice(k);
    laplacian_values(grid, u)
}

/// Same as [`laplacian`] but on a raw slice buffer.
pub fn laplacian_values(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let n = grid.spec().n;
    let hx2 = grid.hx() * grid.hx();
    let mut out = vec![0.0; grid.nodes()];
    for &flat in grid.unknowns() {
        let idx = grid.multi(flat);
        let mut acc = 0.0;
        for a in 0..n {
            let s = grid.strides[a];
            let center = u[flat];
            if a == n - 1 && idx[a] == 0 {
                // mirror ghost: u(x', -hx) = u(x', hx)
                acc += 2.0 * (u[flat + s] - center);
            } else {
                acc += u[flat + s] - 2.0 * center + u[flat - s];
            }
        }
        out[flat] = acc / hx2;
    }
    out
}

/// Backward time difference `(u(.,t_k) - u(.,t_{k-1})) / dt` of slice `k`.
pub fn backward_dt(field: &ScalarField, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Grid("slice 0 has no predecessor".into()));
    }
    let dt = field.spec.dt;
    let prev = field.slice(k - 1);
    Ok(field
        .slice(k)
        .iter()
        .zip(prev)
        .map(|(a, b)| (a - b) / dt)
        .collect())
}

/// Sub-box of the computational cylinder with the proportions of `Q_rho`:
/// `|x_j| <= rho`, `x_n <= rho`, and the trailing `rho^2` fraction of the
/// time window.
#[derive(Debug, Clone, Copy)]
pub struct SubCylinder {
    pub rho: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl SubCylinder {
    pub fn new(spec: &GridSpec, rho: f64) -> Self {
        let len = spec.t1 - spec.t0;
        SubCylinder { rho, t_lo: spec.t1 - rho * rho * len, t_hi: spec.t1 }
    }

    pub fn contains_node(&self, grid: &Grid, flat: usize) -> bool {
        grid.coords(flat).iter().all(|&c| c.abs() <= self.rho + 1e-12)
    }

    pub fn contains_slice(&self, spec: &GridSpec, k: usize) -> bool {
        let t = spec.time(k);
        t >= self.t_lo - 1e-12 && t <= self.t_hi + 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, m: usize, dt: f64, t0: f64, t1: f64) -> Grid {
        Grid::new(GridSpec::new(n, m, dt, t0, t1).unwrap()).unwrap()
    }

    #[test]
    fn slice_and_shape_arithmetic() {
        let g = grid(2, 9, 0.01, -1.0, 0.0);
        assert_eq!(g.spec().slices(), 101);
        assert_eq!(g.shape(), &[9, 5]);
        assert_eq!(g.nodes(), 45);

        let g3 = grid(3, 17, 0.02, -0.5, 0.0);
        assert_eq!(g3.spec().slices(), 26);
        assert_eq!(g3.shape(), &[17, 17, 9]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            GridSpec::new(2, 8, 0.01, -1.0, 0.0),
            Err(Error::Grid(msg)) if msg.contains("odd")
        ));
        assert!(GridSpec::new(2, 9, 0.0, -1.0, 0.0).is_err());
        assert!(GridSpec::new(2, 9, 0.01, 0.0, -1.0).is_err());
        assert!(GridSpec::new(2, 9, 0.01, -1.0, 0.5).is_err());
        assert!(GridSpec::new(4, 9, 0.01, -1.0, 0.0).is_err());
        assert!(GridSpec::new(2, 7, 0.01, -1.0, 0.0).is_err());
    }

    #[test]
    fn node_classes() {
        let g = grid(2, 9, 0.01, -1.0, 0.0);
        // thin nodes: x2 = 0, x1 strictly inside
        assert_eq!(g.thin_nodes().len(), 7);
        for &t in g.thin_nodes() {
            let c = g.coords(t);
            assert_eq!(c[1], 0.0);
            assert!(c[0].abs() < 1.0);
        }
        // corners and faces are outer
        assert_eq!(g.class(g.flat(&[0, 0])), NodeClass::Outer);
        assert_eq!(g.class(g.flat(&[4, 4])), NodeClass::Outer);
        assert_eq!(g.class(g.flat(&[4, 1])), NodeClass::Interior);
        // unknowns = interior + thin
        assert_eq!(g.unknowns().len(), 7 * 3 + 7);
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = grid(2, 17, 0.01, -1.0, 0.0);
        let f = ScalarField::from_fn(&g, |x, _| x[0] * x[0]);
        let lap = laplacian(&g, &f, 0);
        for &flat in g.unknowns() {
            assert!((lap[flat] - 2.0).abs() < 1e-11, "lap = {}", lap[flat]);
        }
        // degree <= 2 in each variable: x1^2 * x2^2 has Laplacian 2 x2^2 + 2 x1^2
        let f2 = ScalarField::from_fn(&g, |x, _| x[0] * x[0] * x[1] * x[1]);
        let lap2 = laplacian(&g, &f2, 0);
        for &flat in g.unknowns() {
            if g.class(flat) == NodeClass::Interior {
                let c = g.coords(flat);
                let exact = 2.0 * c[1] * c[1] + 2.0 * c[0] * c[0];
                assert!((lap2[flat] - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mirror_stencil_encodes_flux() {
        // u = x_n: the mirror ghost turns the thin-plane stencil into
        // 2*(hx - 0)/hx^2 = 2/hx, the discrete version of 2 d^+_{x_n} u.
        let g = grid(2, 9, 0.01, -1.0, 0.0);
        let f = ScalarField::from_fn(&g, |x, _| x[1]);
        let lap = laplacian(&g, &f, 0);
        let hx = g.hx();
        for &t in g.thin_nodes() {
            assert!((lap[t] - 2.0 / hx).abs() < 1e-11);
        }
    }

    #[test]
    fn laplacian_decays_on_halfspace_profile() {
        // u = Re(x1 + i x2)^{3/2} is harmonic off {x1 <= 0, x2 = 0}; the
        // discrete residual away from that set decays under refinement and
        // sits below hx^{1/2}.
        let mut maxima = Vec::new();
        for &m in &[17usize, 33, 65] {
            let g = grid(2, m, 0.01, -1.0, 0.0);
            let f = ScalarField::from_fn(&g, |x, _| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let th = x[1].atan2(x[0]);
                r.powf(1.5) * (1.5 * th).cos()
            });
            let lap = laplacian(&g, &f, 0);
            let mut worst = 0.0f64;
            for &flat in g.unknowns() {
                let c = g.coords(flat);
                // stay a fixed distance from the singular ray {x1 <= 0, x2 = 0}
                let d_ray = if c[0] <= 0.0 { c[1] } else { (c[0] * c[0] + c[1] * c[1]).sqrt() };
                if d_ray >= 0.25 {
                    worst = worst.max(lap[flat].abs());
                }
            }
            maxima.push((g.hx(), worst));
        }
        for w in maxima.windows(2) {
            assert!(w[1].1 < w[0].1, "no decay: {:?}", maxima);
        }
        for &(hx, worst) in &maxima {
            assert!(worst <= hx.sqrt(), "residual {} above sqrt(hx) {}", worst, hx.sqrt());
        }
    }

    #[test]
    fn backward_dt_basics() {
        let g = grid(2, 9, 0.01, -1.0, 0.0);
        let f = ScalarField::from_fn(&g, |_, t| t);
        let d = backward_dt(&f, 5).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-9));

        let f2 = ScalarField::from_fn(&g, |_, t| t * t);
        let k = 7;
        let d2 = backward_dt(&f2, k).unwrap();
        let expect = f2.spec.time(k) + f2.spec.time(k - 1);
        assert!(d2.iter().all(|v| (v - expect).abs() < 1e-9));

        let c = ScalarField::from_fn(&g, |_, _| 4.2);
        assert!(backward_dt(&c, 3).unwrap().iter().all(|v| *v == 0.0));

        assert!(backward_dt(&f, 0).is_err());
    }

    #[test]
    fn even_extension_is_idempotent_and_symmetric() {
        let g = grid(2, 9, 0.05, -0.2, 0.0);
        let f = ScalarField::from_fn(&g, |x, t| x[0] + x[1] * x[1] + t);
        let e = f.even_extension();
        assert!(e.extended);
        assert_eq!(e.shape, vec![9, 9]);
        // extending twice returns identical bits
        assert_eq!(e.even_extension().data, e.data);
        // mirror symmetry is exact
        let half = 5usize;
        for k in 0..e.slices() {
            let s = e.slice(k);
            for row in 0..9 {
                for j in 0..9usize {
                    let mirrored = 2 * (half - 1) - j;
                    assert_eq!(s[row * 9 + j].to_bits(), s[row * 9 + mirrored].to_bits());
                }
            }
        }
        // restriction inverts extension bit for bit
        assert_eq!(e.restrict().data, f.data);
    }

    #[test]
    fn laplacian_commutes_with_reflection() {
        // On an even-extended field the stencil value at (x', xn) equals the
        // one at (x', -xn); with shared half storage that is automatic, so
        // check it through the extension.
        let g = grid(2, 17, 0.01, -1.0, 0.0);
        let f = ScalarField::from_fn(&g, |x, _| (x[0] * 1.3).sin() * (1.0 + x[1] * x[1]));
        let lap = laplacian(&g, &f, 0);
        // reflected copy: same half field, so identical by construction --
        // verify the mirror stencil at the plane matches a centered stencil
        // on the materialized extension.
        let e = f.even_extension();
        let hx2 = g.hx() * g.hx();
        let full = 2 * g.spec().half_len() - 1;
        let mid = g.spec().half_len() - 1;
        for &t in g.thin_nodes() {
            let idx = g.multi(t);
            let row = idx[0];
            let s = e.slice(0);
            let at = |i: usize, j: usize| s[i * full + j];
            let centered = (at(row + 1, mid) - 2.0 * at(row, mid) + at(row - 1, mid)
                + at(row, mid + 1) - 2.0 * at(row, mid) + at(row, mid - 1))
                / hx2;
            assert!((lap[t] - centered).abs() < 1e-12);
        }
    }
}
