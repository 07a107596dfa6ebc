//! Structured rectangular grid carrying a bilinear (Q1) scalar space and a
//! C¹ Bogner–Fox–Schmit bicubic Hermite space for the deformation.
//!
//! Node `n = j (nx+1) + i` sits at `(i dx, j dy)`. Cell `c = j nx + i` has
//! corners ordered `a + 2b` with `(a, b) ∈ {0,1}²`. The deformation carries
//! eight dofs per node, `node·8 + comp·4 + k`, with `k` = value, ∂x, ∂y, ∂xy.

use crate::error::{Error, Result};
use crate::tensor::Mat;
use serde::{Deserialize, Serialize};

pub const Y_DOFS_PER_NODE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let raw: &[(f64, f64)] = match n {
        1 => &[(0.0, 2.0)],
        2 => &[(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)],
        3 => &[
            (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
            (0.0, 0.888_888_888_888_888_9),
            (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
        ],
        4 => &[
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
        ],
        _ => &[
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ],
    };
    raw.iter().map(|&(x, w)| (0.5 * (1.0 + x), 0.5 * w)).collect()
}

/// 1D cubic Hermite shape functions on [0, 1] for an interval of length `h`,
/// ordered (node 0 value, node 0 slope, node 1 value, node 1 slope).
/// Returns values and first and second physical derivatives.
pub fn hermite_1d(s: f64, h: f64) -> [[f64; 3]; 4] {
    let (s2, s3) = (s * s, s * s * s);
    [
        [1.0 - 3.0 * s2 + 2.0 * s3, (-6.0 * s + 6.0 * s2) / h, (-6.0 + 12.0 * s) / (h * h)],
        [h * (s - 2.0 * s2 + s3), 1.0 - 4.0 * s + 3.0 * s2, (-4.0 + 6.0 * s) / h],
        [3.0 * s2 - 2.0 * s3, (6.0 * s - 6.0 * s2) / h, (6.0 - 12.0 * s) / (h * h)],
        [h * (-s2 + s3), -2.0 * s + 3.0 * s2, (-2.0 + 6.0 * s) / h],
    ]
}

/// BFS shape function data at a cell-reference point: per local function
/// `L = corner·4 + k`, the value, gradient and Hessian `(xx, xy, yy)`.
#[derive(Clone, Copy, Debug)]
pub struct HermiteEval {
    pub val: [f64; 16],
    pub grad: [[f64; 2]; 16],
    pub hess: [[f64; 3]; 16],
}

pub fn hermite_2d(xi: f64, eta: f64, dx: f64, dy: f64) -> HermiteEval {
    let hx = hermite_1d(xi, dx);
    let hy = hermite_1d(eta, dy);
    let mut e = HermiteEval { val: [0.0; 16], grad: [[0.0; 2]; 16], hess: [[0.0; 3]; 16] };
    for b in 0..2 {
        for a in 0..2 {
            let corner = a + 2 * b;
            for k in 0..4 {
                let (kx, ky) = (k & 1, k >> 1);
                let fx = hx[2 * a + kx];
                let fy = hy[2 * b + ky];
                let l = corner * 4 + k;
                e.val[l] = fx[0] * fy[0];
                e.grad[l] = [fx[1] * fy[0], fx[0] * fy[1]];
                e.hess[l] = [fx[2] * fy[0], fx[1] * fy[1], fx[0] * fy[2]];
            }
        }
    }
    e
}

/// Q1 shape functions at a cell-reference point: values and physical gradients.
pub fn q1_2d(xi: f64, eta: f64, dx: f64, dy: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let lx = [1.0 - xi, xi];
    let ly = [1.0 - eta, eta];
    let gx = [-1.0 / dx, 1.0 / dx];
    let gy = [-1.0 / dy, 1.0 / dy];
    let mut v = [0.0; 4];
    let mut g = [[0.0; 2]; 4];
    for b in 0..2 {
        for a in 0..2 {
            v[a + 2 * b] = lx[a] * ly[b];
            g[a + 2 * b] = [gx[a] * ly[b], lx[a] * gy[b]];
        }
    }
    (v, g)
}

/// Quadrature tables shared by every cell of the uniform grid.
#[derive(Clone, Debug)]
pub struct CellTables {
    pub points: Vec<[f64; 2]>,
    /// Physical weights (reference weight times cell area).
    pub weights: Vec<f64>,
    pub q1_val: Vec<[f64; 4]>,
    pub q1_grad: Vec<[[f64; 2]; 4]>,
    pub herm: Vec<HermiteEval>,
}

/// Quadrature along one side of a cell.
#[derive(Clone, Debug)]
pub struct EdgeTables {
    pub points: Vec<[f64; 2]>,
    /// Physical weights (reference weight times edge length).
    pub weights: Vec<f64>,
    pub q1_val: Vec<[f64; 4]>,
    pub herm_val: Vec<[f64; 16]>,
}

#[derive(Clone, Debug)]
pub struct GalerkinSpace {
    pub grid: Grid,
    pub gauss_points: usize,
    pub dirichlet_sides: Vec<Side>,
    pub cell: CellTables,
    pub edge: [EdgeTables; 4],
    /// Boundary facets as (cell, side of that cell).
    pub boundary_facets: Vec<(usize, Side)>,
    /// Nodes carrying the plastic Dirichlet condition P = 𝕀.
    pub dirichlet_nodes: Vec<bool>,
    pub scalar_pattern: Vec<Vec<usize>>,
    pub y_pattern: Vec<Vec<usize>>,
}

/// Builds the space on `[0, lx] × [0, ly]` with `nx × ny` cells.
pub fn build_space(nx: usize, ny: usize, lx: f64, ly: f64, dirichlet: &[Side]) -> Result<GalerkinSpace> {
    build_space_with_quadrature(nx, ny, lx, ly, dirichlet, 4)
}

pub fn build_space_with_quadrature(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dirichlet: &[Side],
    gauss_points: usize,
) -> Result<GalerkinSpace> {
    if nx < 1 || ny < 1 {
        return Err(Error::InvalidGrid(format!("need nx, ny ≥ 1, got {nx} × {ny}")));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::InvalidGrid(format!("domain lengths must be positive and finite, got {lx} × {ly}")));
    }
    if dirichlet.is_empty() {
        return Err(Error::InvalidGrid("the plastic Dirichlet boundary must contain at least one side".into()));
    }
    if !(1..=5).contains(&gauss_points) {
        return Err(Error::InvalidGrid(format!("gauss_points must be in 1..=5, got {gauss_points}")));
    }
    let grid = Grid { nx, ny, lx, ly, dx: lx / nx as f64, dy: ly / ny as f64 };
    let gl = gauss_legendre_unit(gauss_points);

    let mut cell = CellTables { points: vec![], weights: vec![], q1_val: vec![], q1_grad: vec![], herm: vec![] };
    for &(eta, wy) in &gl {
        for &(xi, wx) in &gl {
            cell.points.push([xi, eta]);
            cell.weights.push(wx * wy * grid.dx * grid.dy);
            let (v, g) = q1_2d(xi, eta, grid.dx, grid.dy);
            cell.q1_val.push(v);
            cell.q1_grad.push(g);
            cell.herm.push(hermite_2d(xi, eta, grid.dx, grid.dy));
        }
    }

    let edge = Side::ALL.map(|side| {
        let mut t = EdgeTables { points: vec![], weights: vec![], q1_val: vec![], herm_val: vec![] };
        for &(s, w) in &gl {
            let (pt, len) = match side {
                Side::Bottom => ([s, 0.0], grid.dx),
                Side::Top => ([s, 1.0], grid.dx),
                Side::Left => ([0.0, s], grid.dy),
                Side::Right => ([1.0, s], grid.dy),
            };
            t.points.push(pt);
            t.weights.push(w * len);
            t.q1_val.push(q1_2d(pt[0], pt[1], grid.dx, grid.dy).0);
            t.herm_val.push(hermite_2d(pt[0], pt[1], grid.dx, grid.dy).val);
        }
        t
    });

    let mut boundary_facets = Vec::new();
    for i in 0..nx {
        boundary_facets.push((i, Side::Bottom));
    }
    for j in 0..ny {
        boundary_facets.push((j * nx + nx - 1, Side::Right));
    }
    for i in (0..nx).rev() {
        boundary_facets.push(((ny - 1) * nx + i, Side::Top));
    }
    for j in (0..ny).rev() {
        boundary_facets.push((j * nx, Side::Left));
    }

    let nn = (nx + 1) * (ny + 1);
    let mut dirichlet_nodes = vec![false; nn];
    for j in 0..=ny {
        for i in 0..=nx {
            let on = dirichlet.iter().any(|s| match s {
                Side::Bottom => j == 0,
                Side::Top => j == ny,
                Side::Left => i == 0,
                Side::Right => i == nx,
            });
            dirichlet_nodes[j * (nx + 1) + i] = on;
        }
    }

    let mut scalar_pattern = Vec::with_capacity(nn);
    for j in 0..=ny {
        for i in 0..=nx {
            let mut row = Vec::with_capacity(9);
            for jj in j.saturating_sub(1)..=(j + 1).min(ny) {
                for ii in i.saturating_sub(1)..=(i + 1).min(nx) {
                    row.push(jj * (nx + 1) + ii);
                }
            }
            scalar_pattern.push(row);
        }
    }
    let mut y_pattern = Vec::with_capacity(nn * Y_DOFS_PER_NODE);
    for row in &scalar_pattern {
        let cols: Vec<usize> =
            row.iter().flat_map(|&nb| (0..Y_DOFS_PER_NODE).map(move |s| nb * Y_DOFS_PER_NODE + s)).collect();
        for _ in 0..Y_DOFS_PER_NODE {
            y_pattern.push(cols.clone());
        }
    }

    let mut sides: Vec<Side> = dirichlet.to_vec();
    sides.sort_by_key(|s| s.index());
    sides.dedup();

    Ok(GalerkinSpace {
        grid,
        gauss_points,
        dirichlet_sides: sides,
        cell,
        edge,
        boundary_facets,
        dirichlet_nodes,
        scalar_pattern,
        y_pattern,
    })
}

impl GalerkinSpace {
    pub fn n_nodes(&self) -> usize {
        (self.grid.nx + 1) * (self.grid.ny + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.grid.nx * self.grid.ny
    }

    pub fn n_y_dofs(&self) -> usize {
        self.n_nodes() * Y_DOFS_PER_NODE
    }

    pub fn n_quad(&self) -> usize {
        self.cell.weights.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.grid.nx + 1) + i
    }

    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let i = n % (self.grid.nx + 1);
        let j = n / (self.grid.nx + 1);
        [i as f64 * self.grid.dx, j as f64 * self.grid.dy]
    }

    pub fn cell_origin(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c % self.grid.nx, c / self.grid.nx);
        [i as f64 * self.grid.dx, j as f64 * self.grid.dy]
    }

    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = (c % self.grid.nx, c / self.grid.nx);
        [self.node(i, j), self.node(i + 1, j), self.node(i, j + 1), self.node(i + 1, j + 1)]
    }

    /// Global dofs of one deformation component on a cell, in local order.
    pub fn cell_y_dofs(&self, c: usize, comp: usize) -> [usize; 16] {
        let nodes = self.cell_nodes(c);
        let mut out = [0; 16];
        for (corner, &n) in nodes.iter().enumerate() {
            for k in 0..4 {
                out[corner * 4 + k] = n * Y_DOFS_PER_NODE + comp * 4 + k;
            }
        }
        out
    }

    pub fn quad_point_coords(&self, c: usize, q: usize) -> [f64; 2] {
        let o = self.cell_origin(c);
        let p = self.cell.points[q];
        [o[0] + p[0] * self.grid.dx, o[1] + p[1] * self.grid.dy]
    }

    pub fn edge_point_coords(&self, c: usize, side: Side, q: usize) -> [f64; 2] {
        let o = self.cell_origin(c);
        let p = self.edge[side.index()].points[q];
        [o[0] + p[0] * self.grid.dx, o[1] + p[1] * self.grid.dy]
    }

    pub fn boundary_nodes(&self) -> Vec<bool> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (0..self.n_nodes())
            .map(|n| {
                let (i, j) = (n % (nx + 1), n / (nx + 1));
                i == 0 || j == 0 || i == nx || j == ny
            })
            .collect()
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate_scalar(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|n| {
                let [x, y] = self.node_coords(n);
                f(x, y)
            })
            .collect()
    }

    /// Hermite interpolant from nodal `(value, ∂x, ∂y, ∂xy)` of each component.
    pub fn interpolate_y(&self, f: impl Fn(f64, f64) -> [[f64; 4]; 2]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_y_dofs()];
        for n in 0..self.n_nodes() {
            let [px, py] = self.node_coords(n);
            let data = f(px, py);
            for comp in 0..2 {
                for k in 0..4 {
                    y[n * Y_DOFS_PER_NODE + comp * 4 + k] = data[comp][k];
                }
            }
        }
        y
    }

    /// Identity deformation `y(x) = x`.
    pub fn identity_y(&self) -> Vec<f64> {
        self.interpolate_y(|x, y| [[x, 1.0, 0.0, 0.0], [y, 0.0, 1.0, 0.0]])
    }

    fn locate(&self, x: f64, y: f64) -> (usize, f64, f64) {
        let g = &self.grid;
        let fi = (x / g.dx).floor().clamp(0.0, (g.nx - 1) as f64);
        let fj = (y / g.dy).floor().clamp(0.0, (g.ny - 1) as f64);
        let (i, j) = (fi as usize, fj as usize);
        (j * g.nx + i, x / g.dx - fi, y / g.dy - fj)
    }

    pub fn eval_scalar(&self, v: &[f64], x: f64, y: f64) -> f64 {
        let (c, xi, eta) = self.locate(x, y);
        let (phi, _) = q1_2d(xi, eta, self.grid.dx, self.grid.dy);
        self.cell_nodes(c).iter().zip(phi).map(|(&n, p)| v[n] * p).sum()
    }

    /// Value, ∂x, ∂y, ∂xy of one deformation component at a point.
    pub fn eval_y_component(&self, yv: &[f64], comp: usize, x: f64, y: f64) -> [f64; 4] {
        let (c, xi, eta) = self.locate(x, y);
        let hx = hermite_1d(xi, self.grid.dx);
        let hy = hermite_1d(eta, self.grid.dy);
        let dofs = self.cell_y_dofs(c, comp);
        let mut out = [0.0; 4];
        for b in 0..2 {
            for a in 0..2 {
                for k in 0..4 {
                    let (kx, ky) = (k & 1, k >> 1);
                    let fx = hx[2 * a + kx];
                    let fy = hy[2 * b + ky];
                    let coef = yv[dofs[(a + 2 * b) * 4 + k]];
                    out[0] += coef * fx[0] * fy[0];
                    out[1] += coef * fx[1] * fy[0];
                    out[2] += coef * fx[0] * fy[1];
                    out[3] += coef * fx[1] * fy[1];
                }
            }
        }
        out
    }

    /// Deformation value and gradient at a point.
    pub fn eval_y(&self, yv: &[f64], x: f64, y: f64) -> ([f64; 2], Mat) {
        let a = self.eval_y_component(yv, 0, x, y);
        let b = self.eval_y_component(yv, 1, x, y);
        ([a[0], b[0]], Mat::new2(a[1], a[2], b[1], b[2]))
    }

    fn check_refinement(&self, fine: &GalerkinSpace) -> Result<()> {
        let (c, f) = (&self.grid, &fine.grid);
        let ok = f.nx % c.nx == 0
            && f.ny % c.ny == 0
            && (f.lx - c.lx).abs() <= 1e-12 * c.lx
            && (f.ly - c.ly).abs() <= 1e-12 * c.ly;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "{}×{} is not a uniform refinement of {}×{} on the same domain",
                f.nx, f.ny, c.nx, c.ny
            )))
        }
    }

    /// Exact embedding of a Q1 coefficient vector into a refined space.
    pub fn prolong_scalar(&self, fine: &GalerkinSpace, v: &[f64]) -> Result<Vec<f64>> {
        self.check_refinement(fine)?;
        Ok(fine.interpolate_scalar(|x, y| self.eval_scalar(v, x, y)))
    }

    /// Exact embedding of a BFS coefficient vector into a refined space.
    pub fn prolong_y(&self, fine: &GalerkinSpace, yv: &[f64]) -> Result<Vec<f64>> {
        self.check_refinement(fine)?;
        Ok(fine.interpolate_y(|x, y| [self.eval_y_component(yv, 0, x, y), self.eval_y_component(yv, 1, x, y)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts() {
        let sp = build_space(1, 1, 1.0, 1.0, &Side::ALL).unwrap();
        assert_eq!(sp.n_nodes(), 4);
        assert_eq!(sp.cell_y_dofs(0, 0).len(), 16);
        assert_eq!(sp.n_y_dofs(), 32);
        assert_eq!(sp.boundary_facets.len(), 4);
    }

    #[test]
    fn invalid_grids() {
        assert!(matches!(build_space(0, 2, 1.0, 1.0, &Side::ALL), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_space(2, 2, -1.0, 1.0, &Side::ALL), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_space(2, 2, 1.0, 1.0, &[]), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn constant_prolongs_to_constant() {
        let c = build_space(1, 1, 1.0, 1.0, &Side::ALL).unwrap();
        let f = build_space(2, 2, 1.0, 1.0, &Side::ALL).unwrap();
        let v = c.prolong_scalar(&f, &[3.5; 4]).unwrap();
        assert!(v.iter().all(|&x| (x - 3.5).abs() < 1e-15));
    }

    #[test]
    fn hermite_reproduces_bicubic() {
        let sp = build_space(3, 2, 1.5, 1.0, &Side::ALL).unwrap();
        let f = |x: f64, y: f64| x * x * x * y - 2.0 * x * y * y * y + x * y + 0.5;
        let fx = |x: f64, y: f64| 3.0 * x * x * y - 2.0 * y * y * y + y;
        let fy = |x: f64, y: f64| x * x * x - 6.0 * x * y * y + x;
        let fxy = |x: f64, y: f64| 3.0 * x * x - 6.0 * y * y + 1.0;
        let yv = sp.interpolate_y(|x, y| [[f(x, y), fx(x, y), fy(x, y), fxy(x, y)], [0.0; 4]]);
        for &(x, y) in &[(0.13, 0.77), (1.21, 0.4), (0.5, 0.5)] {
            let e = sp.eval_y_component(&yv, 0, x, y);
            assert!((e[0] - f(x, y)).abs() < 1e-12);
            assert!((e[1] - fx(x, y)).abs() < 1e-12);
            assert!((e[2] - fy(x, y)).abs() < 1e-12);
            assert!((e[3] - fxy(x, y)).abs() < 1e-12);
        }
    }
}
