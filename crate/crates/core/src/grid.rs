//! Tensor-grid functions on at most three truncated coordinates.
//!
//! Values are stored row-major with the last axis fastest; each node holds
//! `codim` components. Off-grid evaluation is multilinear, and points outside
//! the extent are clamped to it (constant extension).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::Field;
use crate::rng::map_ordered;

pub const MAX_DIMS: usize = 3;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs 1 to {MAX_DIMS} axes, got {0}")]
    Dims(usize),
    #[error("axis {index}: {reason}")]
    Axis { index: usize, reason: String },
    #[error("codomain dimension must be positive")]
    Codim,
    #[error("grids do not match: {0}")]
    Mismatch(String),
    #[error("malformed grid dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform axis `lower = x_0 < ... < x_{points-1} = upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self, GridError> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(GridError::Axis { index: 0, reason: format!("bad range [{lower}, {upper}]") });
        }
        if points < 3 {
            return Err(GridError::Axis { index: 0, reason: format!("need at least 3 points, got {points}") });
        }
        Ok(Self { lower, upper, points })
    }

    pub fn symmetric(half_width: f64, points: usize) -> Result<Self, GridError> {
        Self::new(-half_width, half_width, points)
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.upper
        } else {
            self.lower + i as f64 * self.spacing()
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Cell index and fractional offset of `x` after clamping; the flag is
    /// set when clamping moved the point.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64, bool) {
        let outside = !self.contains(x);
        let xc = x.clamp(self.lower, self.upper);
        let s = (xc - self.lower) / self.spacing();
        let i = (s.floor() as usize).min(self.points - 2);
        (i, s - i as f64, outside)
    }

    /// Same axis with `2(points-1)+1` points.
    pub fn refined(&self) -> Self {
        Self { points: 2 * (self.points - 1) + 1, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    axes: Vec<Axis>,
    codim: usize,
    values: Vec<f64>,
}

fn check_axes(axes: &[Axis]) -> Result<(), GridError> {
    if axes.is_empty() || axes.len() > MAX_DIMS {
        return Err(GridError::Dims(axes.len()));
    }
    for (index, a) in axes.iter().enumerate() {
        Axis::new(a.lower, a.upper, a.points).map_err(|e| match e {
            GridError::Axis { reason, .. } => GridError::Axis { index, reason },
            other => other,
        })?;
    }
    Ok(())
}

impl GridFunction {
    pub fn zeros(axes: Vec<Axis>, codim: usize) -> Result<Self, GridError> {
        check_axes(&axes)?;
        if codim == 0 {
            return Err(GridError::Codim);
        }
        let n: usize = axes.iter().map(|a| a.points).product();
        Ok(Self { axes, codim, values: vec![0.0; n * codim] })
    }

    pub fn from_values(axes: Vec<Axis>, codim: usize, values: Vec<f64>) -> Result<Self, GridError> {
        let mut g = Self::zeros(axes, codim)?;
        if values.len() != g.values.len() {
            return Err(GridError::Mismatch(format!("expected {} values, got {}", g.values.len(), values.len())));
        }
        g.values = values;
        Ok(g)
    }

    /// Sample `f` at every node.
    pub fn from_fn<F>(axes: Vec<Axis>, codim: usize, f: F) -> Result<Self, GridError>
    where
        F: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let mut g = Self::zeros(axes, codim)?;
        let idx: Vec<usize> = (0..g.len()).collect();
        let rows = map_ordered(&idx, |&i| {
            let x = g.node_coords(i);
            let mut out = vec![0.0; codim];
            f(&x, &mut out);
            out
        });
        g.values = rows.into_iter().flatten().collect();
        Ok(g)
    }

    pub fn from_field<F: Field + ?Sized>(axes: Vec<Axis>, field: &F) -> Result<Self, GridError> {
        if field.dim() != axes.len() {
            return Err(GridError::Mismatch(format!("field dim {} vs {} axes", field.dim(), axes.len())));
        }
        Self::from_fn(axes, field.codim(), |x, out| field.eval_into(x, out))
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len() / self.codim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_value(&self, i: usize) -> &[f64] {
        &self.values[i * self.codim..(i + 1) * self.codim]
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIMS] {
        let mut idx = [0; MAX_DIMS];
        for d in (0..self.dims()).rev() {
            idx[d] = flat % self.axes[d].points;
            flat /= self.axes[d].points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.points + i)
    }

    pub fn node_coords(&self, flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        self.axes.iter().enumerate().map(|(d, a)| a.node(idx[d])).collect()
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.axes == other.axes
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.axes).all(|(v, a)| a.contains(*v))
    }

    /// Smallest distance from `x` to the boundary of the extent (negative outside).
    pub fn edge_distance(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.axes).map(|(v, a)| (v - a.lower).min(a.upper - v)).fold(f64::INFINITY, f64::min)
    }

    /// Multilinear interpolation with constant extension; returns whether `x`
    /// was outside the extent.
    pub fn eval_flagged(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dims();
        let mut base = [0usize; MAX_DIMS];
        let mut frac = [0.0; MAX_DIMS];
        let mut outside = false;
        for k in 0..d {
            let (i, f, o) = self.axes[k].locate(x[k]);
            base[k] = i;
            frac[k] = f;
            outside |= o;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let bit = (corner >> (d - 1 - k)) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.axes[k].points + base[k] + bit;
            }
            if w == 0.0 {
                continue;
            }
            let v = &self.values[flat * self.codim..(flat + 1) * self.codim];
            for (o, vi) in out.iter_mut().zip(v) {
                *o += w * vi;
            }
        }
        outside
    }

    /// Nodal Jacobian by central differences, one-sided second-order stencils
    /// at the boundary. Component `c * dims + j` holds `∂_j u_c`.
    pub fn nodal_jacobian(&self) -> GridFunction {
        let d = self.dims();
        let cd = self.codim;
        let mut out = vec![0.0; self.len() * cd * d];
        for flat in 0..self.len() {
            let idx = self.multi_index(flat);
            for j in 0..d {
                let a = self.axes[j];
                let h = a.spacing();
                let i = idx[j];
                let at = |shift: isize| {
                    let mut m = idx;
                    m[j] = (i as isize + shift) as usize;
                    self.flat_index(&m[..d])
                };
                for c in 0..cd {
                    let v = |f: usize| self.values[f * cd + c];
                    let g = if i == 0 {
                        (-3.0 * v(at(0)) + 4.0 * v(at(1)) - v(at(2))) / (2.0 * h)
                    } else if i + 1 == a.points {
                        (3.0 * v(at(0)) - 4.0 * v(at(-1)) + v(at(-2))) / (2.0 * h)
                    } else {
                        (v(at(1)) - v(at(-1))) / (2.0 * h)
                    };
                    out[flat * cd * d + c * d + j] = g;
                }
            }
        }
        GridFunction { axes: self.axes.clone(), codim: cd * d, values: out }
    }

    /// Largest Euclidean norm of a node value.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.codim)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest node-wise Euclidean distance to `other` on the same grid.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64, GridError> {
        if !self.same_grid(other) || self.codim != other.codim {
            return Err(GridError::Mismatch("sup distance between different grids".into()));
        }
        Ok(self
            .values
            .chunks(self.codim)
            .zip(other.values.chunks(self.codim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max))
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        GridFunction { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// Self-describing text dump: header lines starting with `#`, then one
    /// row per node with coordinates followed by values.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        writeln!(w, "# levy-spde grid-function")?;
        writeln!(w, "# dims={} codim={}", self.dims(), self.codim)?;
        for (k, a) in self.axes.iter().enumerate() {
            writeln!(w, "# axis={k} lower={:e} upper={:e} points={}", a.lower, a.upper, a.points)?;
        }
        writeln!(w, "# layout=row-major last-axis-fastest; columns: {} coordinates then {} values", self.dims(), self.codim)?;
        for flat in 0..self.len() {
            let mut row: Vec<String> = self.node_coords(flat).iter().map(|v| format!("{v:e}")).collect();
            row.extend(self.node_value(flat).iter().map(|v| format!("{v:e}")));
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, GridError> {
        let bad = |m: &str| GridError::Format(m.to_string());
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| bad("empty input"))??;
        if first.trim() != "# levy-spde grid-function" {
            return Err(bad("missing magic line"));
        }
        let (mut dims, mut codim) = (None, None);
        let mut axes = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('#') {
                let fields: Vec<(&str, &str)> = head.split_whitespace().filter_map(|t| t.split_once('=')).collect();
                let get = |k: &str| fields.iter().find(|(a, _)| *a == k).map(|(_, b)| *b);
                if let (Some(d), Some(c)) = (get("dims"), get("codim")) {
                    dims = Some(d.parse::<usize>().map_err(|_| bad("dims"))?);
                    codim = Some(c.parse::<usize>().map_err(|_| bad("codim"))?);
                } else if get("axis").is_some() {
                    let num = |k: &str| get(k).ok_or_else(|| bad(k))?.parse::<f64>().map_err(|_| bad(k));
                    let points = get("points").ok_or_else(|| bad("points"))?.parse::<usize>().map_err(|_| bad("points"))?;
                    axes.push(Axis::new(num("lower")?, num("upper")?, points)?);
                }
                continue;
            }
            let d = dims.ok_or_else(|| bad("row before header"))?;
            let c = codim.ok_or_else(|| bad("row before header"))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad("number")))
                .collect::<Result<_, _>>()?;
            if nums.len() != d + c {
                return Err(bad("row width"));
            }
            values.extend_from_slice(&nums[d..]);
        }
        let (d, c) = (dims.ok_or_else(|| bad("dims"))?, codim.ok_or_else(|| bad("codim"))?);
        if axes.len() != d {
            return Err(bad("axis count"));
        }
        Self::from_values(axes, c, values)
    }
}

impl Field for GridFunction {
    fn dim(&self) -> usize {
        self.dims()
    }

    fn codim(&self) -> usize {
        self.codim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.eval_flagged(x, out);
    }

    fn eval_scalar(&self, x: &[f64]) -> f64 {
        if self.codim == 1 && self.dims() == 1 {
            let a = self.axes[0];
            let (i, f, _) = a.locate(x[0]);
            return (1.0 - f) * self.values[i] + f * self.values[i + 1];
        }
        let mut out = [0.0; 16];
        if self.codim <= 16 {
            self.eval_flagged(x, &mut out[..self.codim]);
            return out[0];
        }
        self.eval(x)[0]
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.sup_norm())
    }
}

/// Induced 2-norm of a `rows × cols` row-major matrix.
pub fn operator_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 1 || cols == 1 {
        return m.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    // power iteration on MᵀM
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut sigma2 = 0.0;
    for _ in 0..200 {
        let mv: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| m[i * cols + j] * v[j]).sum()).collect();
        let mut w: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| m[i * cols + j] * mv[i]).sum()).collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|x| *x /= n);
        let done = (n - sigma2).abs() <= 1e-14 * n;
        sigma2 = n;
        v = w;
        if done {
            break;
        }
    }
    sigma2.sqrt()
}

/// Empirical surrogate of a Hölder norm on a grid, a lower bound of the
/// norm over the whole space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNorm {
    pub index: f64,
    pub sup: f64,
    /// Largest operator norm of the nodal Jacobian (index > 1 only).
    pub gradient_sup: f64,
    /// Largest Hölder quotient of the values (index ≤ 1) or of the
    /// Jacobian with exponent `index - 1` (index > 1).
    pub quotient: f64,
}

impl EmpiricalNorm {
    pub fn total(&self) -> f64 {
        self.sup + self.gradient_sup + self.quotient
    }
}

/// Hölder norm of index `index ∈ (0, 2)` from node pairs along each axis at
/// dyadic strides.
pub fn empirical_norm(u: &GridFunction, index: f64) -> EmpiricalNorm {
    let sup = u.sup_norm();
    let d = u.dims();
    let (field, exponent, rows, cols, gradient_sup) = if index > 1.0 {
        let j = u.nodal_jacobian();
        let gs = j.values.chunks(j.codim).map(|m| operator_norm(m, u.codim, d)).fold(0.0, f64::max);
        (j, index - 1.0, u.codim, d, gs)
    } else {
        (u.clone(), index, u.codim, 1, 0.0)
    };
    let width = rows * cols;
    let mut quotient: f64 = 0.0;
    let mut diff = vec![0.0; width];
    for flat in 0..u.len() {
        let idx = u.multi_index(flat);
        for axis in 0..d {
            let a = u.axes[axis];
            let mut stride = 1;
            while idx[axis] + stride < a.points {
                let mut m = idx;
                m[axis] += stride;
                let other = u.flat_index(&m[..d]);
                let (p, q) = (&field.values[flat * width..(flat + 1) * width], &field.values[other * width..(other + 1) * width]);
                for k in 0..width {
                    diff[k] = p[k] - q[k];
                }
                let dist = stride as f64 * a.spacing();
                quotient = quotient.max(operator_norm(&diff, rows, cols) / dist.powf(exponent));
                stride *= 2;
            }
        }
    }
    EmpiricalNorm { index, sup, gradient_sup, quotient }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes2() -> Vec<Axis> {
        vec![Axis::new(-1.0, 2.0, 13).unwrap(), Axis::symmetric(1.5, 7).unwrap()]
    }

    #[test]
    fn multilinear_reproduces_bilinear_functions() {
        let g = GridFunction::from_fn(axes2(), 1, |x, o| o[0] = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]).unwrap();
        let mut o = [0.0];
        for &(a, b) in &[(0.13, -0.71), (1.99, 1.2), (-1.0, -1.5)] {
            assert!(!g.eval_flagged(&[a, b], &mut o));
            assert!((o[0] - (1.0 + 2.0 * a - b + 0.5 * a * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_extension_sets_flag() {
        let g = GridFunction::from_fn(axes2(), 1, |x, o| o[0] = x[0]).unwrap();
        let mut o = [0.0];
        assert!(g.eval_flagged(&[5.0, 0.0], &mut o));
        assert!((o[0] - 2.0).abs() < 1e-12);
        assert!(g.eval_flagged(&[0.0, -9.0], &mut o));
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let g = GridFunction::from_fn(axes2(), 2, |x, o| {
            o[0] = 3.0 * x[0] - 2.0 * x[1];
            o[1] = -0.25 * x[0] + 7.0 * x[1] + 1.0;
        })
        .unwrap();
        let j = g.nodal_jacobian();
        for m in j.values().chunks(4) {
            for (a, b) in m.iter().zip([3.0, -2.0, -0.25, 7.0]) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let g = GridFunction::from_fn(axes2(), 2, |x, o| {
            o[0] = x[0].sin();
            o[1] = x[1].exp();
        })
        .unwrap();
        let back = GridFunction::read_from(std::io::Cursor::new(g.to_text())).unwrap();
        assert_eq!(g, back);
        assert!(GridFunction::read_from(std::io::Cursor::new("nonsense\n")).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        assert!((operator_norm(&[3.0, 0.0, 0.0, -4.0], 2, 2) - 4.0).abs() < 1e-10);
        let rot = [0.6, -0.8, 0.8, 0.6];
        assert!((operator_norm(&rot, 2, 2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn empirical_norm_of_sine() {
        // sin on [-3, 3]: sup < 1, gradient sup 1, Lipschitz quotient of cos ≤ 1
        let g = GridFunction::from_fn(vec![Axis::symmetric(3.0, 601).unwrap()], 1, |x, o| o[0] = x[0].sin()).unwrap();
        let n = empirical_norm(&g, 2.0 - 1e-9);
        assert!(n.sup <= 1.0 && n.sup > 0.99);
        assert!((n.gradient_sup - 1.0).abs() < 1e-3);
        assert!(n.quotient <= 1.0 + 1e-3 && n.quotient > 0.9);
        let v = empirical_norm(&g, 1.0);
        assert!((v.quotient - 1.0).abs() < 1e-3);
        assert_eq!(v.gradient_sup, 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridFunction::zeros(vec![], 1).is_err());
        assert!(GridFunction::zeros(vec![Axis::symmetric(1.0, 5).unwrap(); 4], 1).is_err());
        assert!(Axis::new(1.0, 0.0, 5).is_err());
        assert!(Axis::new(0.0, 1.0, 2).is_err());
    }
}
