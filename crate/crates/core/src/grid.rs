//! Uniform grid on (-1, 1), finite-difference operators with boundary
//! closures, banded LU and trapezoid quadrature.
//!
//! Every boundary scheme used here pins `u(-1) = u(1) = 0`, so operators act
//! on the interior unknowns `u_1 .. u_{N-1}` only. Stencil entries that fall
//! on the boundary nodes drop out, entries beyond them are eliminated through
//! ghost values or replaced by one-sided rows.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 8;

/// Uniform mesh `x_i = -1 + i h`, `h = 2 / n_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    /// Number of interior unknowns.
    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    pub fn h(&self) -> f64 {
        2.0 / self.n_cells as f64
    }

    /// Node coordinate. Computed as `(2i - N) / N`, which is exact at both
    /// endpoints and mirror-symmetric about 0.
    pub fn x(&self, i: usize) -> f64 {
        (2.0 * i as f64 - self.n_cells as f64) / self.n_cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.x(i)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..=self.n_cells).map(|i| f(self.x(i))).collect()
    }
}

pub fn make_grid(n_cells: usize) -> Result<Grid> {
    if n_cells < MIN_CELLS {
        return Err(Error::Resolution(n_cells));
    }
    Ok(Grid { n_cells })
}

/// Nodal values of a solution at one instant, boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch { expected: grid.n_nodes(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n_nodes()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.sample(f))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Boundary conditions attached to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcScheme {
    /// `u(±1) = 0`.
    DirichletPair,
    /// `u(±1) = 0` and `u_xx(±1) = 0`.
    SimplySupported,
    /// `u(-1) = u(1) = 0` and `u_x(1) = 0`.
    KdVMixed,
}

impl BcScheme {
    pub fn name(self) -> &'static str {
        match self {
            BcScheme::DirichletPair => "dirichlet",
            BcScheme::SimplySupported => "simply-supported",
            BcScheme::KdVMixed => "kdv-mixed",
        }
    }

    /// Number of scalar boundary conditions the scheme imposes.
    pub fn condition_count(self) -> usize {
        match self {
            BcScheme::DirichletPair => 2,
            BcScheme::SimplySupported => 4,
            BcScheme::KdVMixed => 3,
        }
    }

    /// Ghost value `u_{-k}` expressed through interior nodes, if the scheme
    /// determines it.
    fn left_ghost(self, k: usize) -> Option<(usize, f64)> {
        match self {
            BcScheme::SimplySupported => Some((k, -1.0)),
            _ => None,
        }
    }

    /// Ghost value `u_{N+k}` as `(node, coefficient)`.
    fn right_ghost(self, n_cells: usize, k: usize) -> Option<(usize, f64)> {
        match self {
            BcScheme::SimplySupported => Some((n_cells - k, -1.0)),
            BcScheme::KdVMixed if k == 1 => Some((n_cells - 1, 1.0)),
            _ => None,
        }
    }
}

/// Central stencils, offsets `-2..=2`, before the `h^order` scaling.
fn central_stencil(order: usize) -> [f64; 5] {
    match order {
        1 => [0.0, -0.5, 0.0, 0.5, 0.0],
        2 => [0.0, 1.0, -2.0, 1.0, 0.0],
        3 => [-0.5, 1.0, 0.0, -1.0, 0.5],
        4 => [1.0, -4.0, 6.0, -4.0, 1.0],
        _ => unreachable!("order checked by caller"),
    }
}

/// One-sided replacement row at node 1 (left) for stencils reaching past the
/// boundary. Returned as `(node, weight)` pairs before scaling. Only the
/// third derivative ever needs one: the 4-point difference, first-order
/// accurate at node 1.
fn left_closure(order: usize) -> Vec<(usize, f64)> {
    match order {
        3 => vec![(0, -1.0), (1, 3.0), (2, -3.0), (3, 1.0)],
        4 => vec![(0, 1.0), (1, -4.0), (2, 6.0), (3, -4.0), (4, 1.0)],
        _ => unreachable!("orders 1 and 2 never leave the grid"),
    }
}

fn right_closure(order: usize, n_cells: usize) -> Vec<(usize, f64)> {
    let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
    left_closure(order).into_iter().map(|(j, w)| (n_cells - j, sign * w)).collect()
}

/// Square banded matrix acting on the interior unknowns.
///
/// Row `r` (node `r + 1`) stores columns `r - lower ..= r + upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOperator {
    grid: Grid,
    order: usize,
    bc: BcScheme,
    lower: usize,
    upper: usize,
    coeffs: Vec<f64>,
}

impl BandedOperator {
    fn from_rows(grid: Grid, order: usize, bc: BcScheme, rows: &[BTreeMap<usize, f64>]) -> Self {
        let mut lower = 0;
        let mut upper = 0;
        for (r, row) in rows.iter().enumerate() {
            for &c in row.keys() {
                lower = lower.max(r.saturating_sub(c));
                upper = upper.max(c.saturating_sub(r));
            }
        }
        let width = lower + upper + 1;
        let mut coeffs = vec![0.0; rows.len() * width];
        for (r, row) in rows.iter().enumerate() {
            for (&c, &w) in row {
                coeffs[r * width + c + lower - r] = w;
            }
        }
        Self { grid, order, bc, lower, upper, coeffs }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bc(&self) -> BcScheme {
        self.bc
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.lower
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.upper
    }

    pub fn dim(&self) -> usize {
        self.grid.n_interior()
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    /// Matrix entry `(row, col)` over interior unknowns.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.lower < row || col > row + self.upper {
            return 0.0;
        }
        self.coeffs[row * self.width() + col + self.lower - row]
    }

    /// `self * c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + other`, bandwidths merged. Both operators must live on the
    /// same grid; the result keeps the higher order and `self`'s boundary
    /// scheme.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch { expected: self.grid.n_nodes(), got: other.grid.n_nodes() });
        }
        let lower = self.lower.max(other.lower);
        let upper = self.upper.max(other.upper);
        let width = lower + upper + 1;
        let n = self.dim();
        let mut coeffs = vec![0.0; n * width];
        for r in 0..n {
            let lo = r.saturating_sub(lower);
            let hi = (r + upper).min(n - 1);
            for c in lo..=hi {
                coeffs[r * width + c + lower - r] = self.get(r, c) + other.get(r, c);
            }
        }
        Ok(Self { grid: self.grid, order: self.order.max(other.order), bc: self.bc, lower, upper, coeffs })
    }

    /// `y = A x` over interior vectors.
    pub fn mul_interior(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let width = self.width();
        for r in 0..n {
            let lo = r.saturating_sub(self.lower);
            let hi = (r + self.upper).min(n - 1);
            let row = &self.coeffs[r * width..(r + 1) * width];
            let mut acc = 0.0;
            for c in lo..=hi {
                acc += row[c + self.lower - r] * x[c];
            }
            y[r] = acc;
        }
    }

    /// Applies the operator to full nodal vectors; boundary entries of `out`
    /// are set to zero.
    pub fn apply_nodal(&self, u: &[f64], out: &mut [f64]) {
        let n = self.dim();
        self.mul_interior(&u[1..=n], &mut out[1..=n]);
        out[0] = 0.0;
        out[n + 1] = 0.0;
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.get(r, c)).collect()).collect()
    }
}

fn build_operator(grid: Grid, order: usize, bc: BcScheme, allow_one_sided: bool) -> Result<BandedOperator> {
    if !(1..=4).contains(&order) {
        return Err(Error::Order(order));
    }
    if !allow_one_sided {
        let ok = match order {
            1 | 2 => true,
            3 => matches!(bc, BcScheme::KdVMixed | BcScheme::SimplySupported),
            _ => bc == BcScheme::SimplySupported,
        };
        if !ok {
            return Err(Error::IncompatibleBc { order, bc: bc.name() });
        }
    }
    let n_cells = grid.n_cells();
    let scale = grid.h().powi(order as i32).recip();
    let stencil = central_stencil(order);
    let mut rows = Vec::with_capacity(grid.n_interior());
    for i in 1..n_cells {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        let add = |node: usize, w: f64, row: &mut BTreeMap<usize, f64>| {
            if node >= 1 && node < n_cells && w != 0.0 {
                *row.entry(node - 1).or_insert(0.0) += w * scale;
            }
        };
        let mut needs_left = false;
        let mut needs_right = false;
        let mut entries = Vec::new();
        for (k, &w) in stencil.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let j = i as isize + k as isize - 2;
            if j < 0 {
                match bc.left_ghost((-j) as usize) {
                    Some((node, c)) => entries.push((node, c * w)),
                    None => needs_left = true,
                }
            } else if j as usize > n_cells {
                match bc.right_ghost(n_cells, j as usize - n_cells) {
                    Some((node, c)) => entries.push((node, c * w)),
                    None => needs_right = true,
                }
            } else {
                entries.push((j as usize, w));
            }
        }
        if needs_left {
            entries = left_closure(order);
        } else if needs_right {
            entries = right_closure(order, n_cells);
        }
        for (node, w) in entries {
            add(node, w, &mut row);
        }
        rows.push(row);
    }
    Ok(BandedOperator::from_rows(grid, order, bc, &rows))
}

/// Second-order discrete `d^order/dx^order` with the closures implied by `bc`.
pub fn diff_operator(grid: Grid, order: usize, bc: BcScheme) -> Result<BandedOperator> {
    build_operator(grid, order, bc, false)
}

/// Like [`diff_operator`] but falls back to one-sided rows wherever `bc`
/// provides no ghost value. Used by diagnostics that need a derivative the
/// boundary scheme does not constrain.
pub fn diff_operator_any(grid: Grid, order: usize, bc: BcScheme) -> Result<BandedOperator> {
    build_operator(grid, order, bc, true)
}

pub fn apply_operator(op: &BandedOperator, u: &Field) -> Result<Field> {
    if op.grid != u.grid {
        return Err(Error::GridMismatch { expected: op.grid.n_nodes(), got: u.grid.n_nodes() });
    }
    let mut out = vec![0.0; u.values.len()];
    op.apply_nodal(&u.values, &mut out);
    Field::new(u.grid, out)
}

/// One-sided second-order derivative at a boundary node.
fn boundary_derivative(u: &[f64], h: f64, order: usize, left: bool) -> f64 {
    let w: &[f64] = match order {
        1 => &[-1.5, 2.0, -0.5],
        2 => &[2.0, -5.0, 4.0, -1.0],
        3 => &[-2.5, 9.0, -12.0, 7.0, -1.5],
        _ => unreachable!(),
    };
    let n = u.len() - 1;
    let sum: f64 = if left {
        w.iter().enumerate().map(|(k, c)| c * u[k]).sum()
    } else {
        let s: f64 = w.iter().enumerate().map(|(k, c)| c * u[n - k]).sum();
        if order % 2 == 1 {
            -s
        } else {
            s
        }
    };
    sum / h.powi(order as i32)
}

/// Nodal samples of the `order`-th derivative at every node, boundary nodes
/// included (one-sided second-order differences there).
pub fn derivative_samples(u: &Field, order: usize, bc: BcScheme) -> Result<Vec<f64>> {
    if !(1..=3).contains(&order) {
        return Err(Error::Order(order));
    }
    let op = diff_operator_any(u.grid, order, bc)?;
    let mut out = vec![0.0; u.values.len()];
    op.apply_nodal(&u.values, &mut out);
    let h = u.grid.h();
    let n = out.len() - 1;
    out[0] = boundary_derivative(&u.values, h, order, true);
    out[n] = boundary_derivative(&u.values, h, order, false);
    Ok(out)
}

/// Banded LU factorization with partial pivoting inside the band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    /// Upper bandwidth of U after fill-in (`lower + upper`).
    upper: usize,
    /// Row `r` stores columns `r - lower ..= r + upper`.
    data: Vec<f64>,
    pivots: Vec<usize>,
}

/// Pivots below this fraction of the largest matrix entry are treated as
/// singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

impl BandedLu {
    /// Factorizes `I - shift * op`.
    pub fn shifted(op: &BandedOperator, shift: f64) -> Result<Self> {
        let n = op.dim();
        let lower = op.lower;
        let upper = op.lower + op.upper;
        let width = lower + upper + 1;
        let mut data = vec![0.0; n * width];
        for r in 0..n {
            let lo = r.saturating_sub(op.lower);
            let hi = (r + op.upper).min(n - 1);
            for c in lo..=hi {
                data[r * width + c + lower - r] = -shift * op.get(r, c);
            }
            data[r * width + lower] += 1.0;
        }
        let mut lu = Self { n, lower, upper, data, pivots: vec![0; n] };
        lu.factorize()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * (self.lower + self.upper + 1) + c + self.lower - r
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= PIVOT_TOLERANCE * scale {
                return Err(Error::SingularSystem { row: k, pivot: best });
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let a = self.idx(k, c);
                    let b = self.idx(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let m = self.data[ik] / pivot;
                self.data[ik] = m;
                if m == 0.0 {
                    continue;
                }
                for c in k + 1..=last_col {
                    let kc = self.idx(k, c);
                    let ic = self.idx(i, c);
                    self.data[ic] -= m * self.data[kc];
                }
            }
        }
        Ok(())
    }

    /// Solves in place over interior unknowns.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.lower).min(n - 1) {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + self.upper).min(n - 1) {
                acc -= self.data[self.idx(k, c)] * b[c];
            }
            b[k] = acc / self.data[self.idx(k, k)];
        }
    }
}

/// Solves `(I - dt * op) u = rhs` on interior nodes; boundary entries of the
/// result are zero.
pub fn solve_banded(op: &BandedOperator, dt: f64, rhs: &Field) -> Result<Field> {
    if op.grid != rhs.grid {
        return Err(Error::GridMismatch { expected: op.grid.n_nodes(), got: rhs.grid.n_nodes() });
    }
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be finite and non-negative, got {dt}")));
    }
    let lu = BandedLu::shifted(op, dt)?;
    let n = op.dim();
    let mut values = vec![0.0; n + 2];
    values[1..=n].copy_from_slice(&rhs.values[1..=n]);
    lu.solve_in_place(&mut values[1..=n]);
    Field::new(rhs.grid, values)
}

/// Composite trapezoid rule over the grid.
pub fn quad_trapz(grid: Grid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.n_nodes() {
        return Err(Error::GridMismatch { expected: grid.n_nodes(), got: values.len() });
    }
    Ok(trapz(grid.h(), values))
}

#[inline]
pub(crate) fn trapz(h: f64, values: &[f64]) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n]))
}
