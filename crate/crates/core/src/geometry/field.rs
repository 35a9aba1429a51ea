use std::io::{Read, Write};

use super::{Bundle, Chart};
use crate::symexpr::{parse_with, Expr, Sym, VarRef};
use crate::{Error, Result};

/// Rectangular uniform grid over the parameter space `ℝᵏ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub sizes: Vec<usize>,
    pub spacings: Vec<f64>,
    pub origin: Vec<f64>,
}

impl Grid {
    pub fn new(sizes: Vec<usize>, spacings: Vec<f64>, origin: Vec<f64>) -> Result<Grid> {
        if sizes.is_empty() || sizes.len() != spacings.len() || sizes.len() != origin.len() {
            return Err(Error::InvalidChart("grid axes disagree in length".into()));
        }
        if let Some(n) = sizes.iter().find(|&&n| n < 3) {
            return Err(Error::GridTooSmall(format!("axis with {n} nodes; need at least 3")));
        }
        if spacings.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidChart("grid spacings must be positive".into()));
        }
        Ok(Grid { sizes, spacings, origin })
    }

    /// Grid with `n` nodes per axis covering the unit cube.
    pub fn unit(k: usize, n: usize) -> Result<Grid> {
        let h = 1.0 / (n.max(2) - 1) as f64;
        Grid::new(vec![n; k], vec![h; k], vec![0.0; k])
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major multi-index of a node: the last axis varies fastest.
    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for a in (0..self.dims()).rev() {
            idx[a] = node % self.sizes[a];
            node /= self.sizes[a];
        }
        idx
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.sizes).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.sizes[axis + 1..].iter().product()
    }

    pub fn position(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacings[a])
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.multi_index(node)
            .iter()
            .zip(&self.sizes)
            .any(|(&i, &n)| i == 0 || i == n - 1)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&n| !self.is_boundary(n))
    }

    /// First derivative along `axis` of a nodal scalar: centered inside; on
    /// the boundary the quadratic extrapolation of the centered values, whose
    /// error matches the centered one so composed derivatives stay second order
    /// next to the boundary (3-point one-sided on axes with fewer than 5 nodes).
    pub fn derivative(&self, data: impl Fn(usize) -> f64, node: usize, axis: usize) -> f64 {
        let i = self.multi_index(node)[axis];
        let n = self.sizes[axis];
        let s = self.stride(axis);
        let h = self.spacings[axis];
        let f = |k: isize| data((node as isize + k * s as isize) as usize);
        if i == 0 && n >= 5 {
            (-3.0 * f(0) + 3.0 * f(1) + 2.0 * f(2) - 3.0 * f(3) + f(4)) / (2.0 * h)
        } else if i == n - 1 && n >= 5 {
            (3.0 * f(0) - 3.0 * f(-1) - 2.0 * f(-2) + 3.0 * f(-3) - f(-4)) / (2.0 * h)
        } else if i == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * f(0) - 4.0 * f(-1) + f(-2)) / (2.0 * h)
        } else {
            (f(1) - f(-1)) / (2.0 * h)
        }
    }

    /// Centered second derivative `∂²/∂x^a∂x^b` at an interior node.
    pub fn second_derivative(&self, data: impl Fn(usize) -> f64, node: usize, a: usize, b: usize) -> f64 {
        let (sa, sb) = (self.stride(a), self.stride(b));
        let (ha, hb) = (self.spacings[a], self.spacings[b]);
        if a == b {
            (data(node + sa) - 2.0 * data(node) + data(node - sa)) / (ha * ha)
        } else {
            (data(node + sa + sb) - data(node + sa - sb) - data(node - sa + sb) + data(node - sa - sb))
                / (4.0 * ha * hb)
        }
    }
}

/// Finite-difference realization of the first prolongation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Centered differences inside, one-sided closures on the boundary.
    #[default]
    Centered,
}

/// Samples of a map from a grid into the coordinates of a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    pub chart: Chart,
    pub grid: Grid,
    /// Node-major values: `values[node * chart.dim() + coordinate]`.
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(chart: Chart, grid: Grid, values: Vec<f64>) -> Result<DiscreteField> {
        if grid.dims() != chart.k {
            return Err(Error::ChartMismatch(format!(
                "grid has {} axes but chart has k={}",
                grid.dims(),
                chart.k
            )));
        }
        if values.len() != grid.len() * chart.dim() {
            return Err(Error::ChartMismatch("value array has the wrong length".into()));
        }
        Ok(DiscreteField { chart, grid, values })
    }

    pub fn zeros(chart: Chart, grid: Grid) -> Result<DiscreteField> {
        let len = grid.len() * chart.dim();
        DiscreteField::new(chart, grid, vec![0.0; len])
    }

    /// Samples `f(x)`, which returns all coordinates in chart order.
    pub fn from_fn(chart: Chart, grid: Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<DiscreteField> {
        let dim = chart.dim();
        let mut values = Vec::with_capacity(grid.len() * dim);
        for node in 0..grid.len() {
            let row = f(&grid.position(node));
            if row.len() != dim {
                return Err(Error::ChartMismatch("sample has the wrong number of coordinates".into()));
            }
            values.extend(row);
        }
        DiscreteField::new(chart, grid, values)
    }

    /// Samples coordinate expressions in `x[a]` and parameters.
    pub fn from_exprs(
        chart: Chart,
        grid: Grid,
        exprs: &[(VarRef, Expr)],
        params: &crate::symexpr::Assignment,
    ) -> Result<DiscreteField> {
        let mut field = DiscreteField::zeros(chart, grid)?;
        for (v, e) in exprs {
            let slot = field.slot(v)?;
            for node in 0..field.grid.len() {
                let mut a = params.clone();
                for (axis, x) in field.grid.position(node).iter().enumerate() {
                    a.set_var(VarRef::X(axis + 1), *x);
                }
                let val = crate::symexpr::evaluate(e, &a)?;
                field.values[node * chart.dim() + slot] = val;
            }
        }
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn slot(&self, v: &VarRef) -> Result<usize> {
        self.chart
            .index_of(v)
            .ok_or_else(|| Error::ChartMismatch(format!("`{v}` is not a coordinate of {}", self.chart)))
    }

    pub fn get(&self, node: usize, v: &VarRef) -> Result<f64> {
        Ok(self.values[node * self.dim() + self.slot(v)?])
    }

    pub fn set(&mut self, node: usize, v: &VarRef, value: f64) -> Result<()> {
        let s = self.slot(v)?;
        let d = self.dim();
        self.values[node * d + s] = value;
        Ok(())
    }

    pub fn node_values(&self, node: usize) -> &[f64] {
        let d = self.dim();
        &self.values[node * d..(node + 1) * d]
    }

    /// Scalar component at every node.
    pub fn component(&self, v: &VarRef) -> Result<Vec<f64>> {
        let s = self.slot(v)?;
        let d = self.dim();
        Ok((0..self.grid.len()).map(|n| self.values[n * d + s]).collect())
    }

    /// Assignment of all coordinates (and base coordinates `x`) at a node.
    pub fn assignment(&self, node: usize) -> crate::symexpr::Assignment {
        let mut a = crate::symexpr::Assignment::new();
        for (v, val) in self.chart.coords().iter().zip(self.node_values(node)) {
            a.set_var(*v, *val);
        }
        for (axis, x) in self.grid.position(node).iter().enumerate() {
            a.set_var(VarRef::X(axis + 1), *x);
        }
        a
    }

    /// Restricts to the coordinates of another chart with the same `n`, `k`.
    pub fn project(&self, target: Chart) -> Result<DiscreteField> {
        let slots = target
            .coords()
            .iter()
            .map(|v| self.slot(v))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.grid.len() * slots.len());
        for node in 0..self.grid.len() {
            let row = self.node_values(node);
            values.extend(slots.iter().map(|&s| row[s]));
        }
        DiscreteField::new(target, self.grid.clone(), values)
    }

    /// Discrete first prolongation onto the prolonged chart.
    pub fn prolong(&self, _stencil: Stencil) -> Result<DiscreteField> {
        let target = self.chart.prolonged()?;
        let mut out = DiscreteField::zeros(target, self.grid.clone())?;
        let dim_src = self.dim();
        let dim_dst = target.dim();
        let src_coords = self.chart.coords();
        for (s, y) in src_coords.iter().enumerate() {
            let dst = target.index_of(y).expect("base coordinates persist");
            for node in 0..self.grid.len() {
                out.values[node * dim_dst + dst] = self.values[node * dim_src + s];
            }
            for a in 1..=self.chart.k {
                let vel = self.chart.velocity_of(*y, a)?;
                let dst = target.index_of(&vel).expect("velocity coordinate exists");
                for node in 0..self.grid.len() {
                    let d = self
                        .grid
                        .derivative(|m| self.values[m * dim_src + s], node, a - 1);
                    out.values[node * dim_dst + dst] = d;
                }
            }
        }
        Ok(out)
    }

    /// Writes the field as CSV: `x[1..k]` columns then coordinates in chart order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.chart.k).map(|a| format!("x[{a}]")).collect();
        header.extend(self.chart.coords().iter().map(|v| v.to_string()));
        let rows = (0..self.grid.len()).map(|node| {
            let mut row = self.grid.position(node);
            row.extend_from_slice(self.node_values(node));
            row
        });
        write_table(w, &header, rows)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<DiscreteField> {
        let table = read_table(r)?;
        let coords = table
            .columns
            .iter()
            .map(|c| match c {
                Sym::Var(v) => Ok(*v),
                other => Err(Error::ChartMismatch(format!("`{other}` is not a chart coordinate"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let chart = Chart::from_coords(&coords, table.grid.dims())?;
        DiscreteField::new(chart, table.grid, table.values)
    }
}

pub(crate) fn write_table<W: Write>(
    w: W,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header)?;
    for row in rows {
        wr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// Parsed CSV with base columns turned into a grid.
pub(crate) struct Table {
    pub grid: Grid,
    pub columns: Vec<Sym>,
    pub values: Vec<f64>,
}

pub(crate) fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let k = header.iter().take_while(|h| h.starts_with("x[")).count();
    if k == 0 {
        return Err(Error::ChartMismatch("missing x[...] columns".into()));
    }
    for (a, h) in header[..k].iter().enumerate() {
        if *h != format!("x[{}]", a + 1) {
            return Err(Error::ChartMismatch(format!("unexpected base column `{h}`")));
        }
    }
    let columns = header[k..]
        .iter()
        .map(|h| match parse_with(h, usize::MAX, k)? {
            Expr::Sym(s) => Ok(s),
            _ => Err(Error::ChartMismatch(format!("bad column name `{h}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Io("ragged csv row".into()));
        }
        let nums = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Io(format!("bad number `{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        xs.push(nums[..k].to_vec());
        values.extend_from_slice(&nums[k..]);
    }
    let mut sizes = Vec::with_capacity(k);
    let mut origin = Vec::with_capacity(k);
    let mut spacings = Vec::with_capacity(k);
    for a in 0..k {
        let mut axis: Vec<f64> = xs.iter().map(|x| x[a]).collect();
        axis.sort_by(|p, q| p.partial_cmp(q).unwrap());
        axis.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * (1.0 + q.abs()));
        let n = axis.len();
        if n < 2 {
            return Err(Error::GridTooSmall("a grid axis has fewer than 2 nodes".into()));
        }
        sizes.push(n);
        origin.push(axis[0]);
        spacings.push((axis[n - 1] - axis[0]) / (n - 1) as f64);
    }
    let grid = Grid::new(sizes, spacings, origin)?;
    if xs.len() != grid.len() {
        return Err(Error::Io("rows do not form a full rectangular grid".into()));
    }
    for (node, x) in xs.iter().enumerate() {
        let want = grid.position(node);
        let tol = 1e-9 * grid.spacings.iter().cloned().fold(0.0, f64::max);
        if want.iter().zip(x).any(|(p, q)| (p - q).abs() > tol) {
            return Err(Error::Io(format!("row {node} is out of row-major grid order")));
        }
    }
    Ok(Table { grid, columns, values })
}

impl Chart {
    pub fn is_base(&self) -> bool {
        self.bundle == Bundle::Base
    }
}
