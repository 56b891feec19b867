//! Uniform tensor grid on `[0, lx] x [0, ly]` and nodal plate fields.
//!
//! Nodes are stored row-major with the `x2` index fastest: node `(i, j)` lives
//! at `i * ny + j`, where `i` indexes `x1` and `j` indexes `x2`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
}

impl GridSpec {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 5 || ny < 5 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "lengths must be positive and finite, got lx = {lx}, ly = {ly}"
            )));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    /// Unit square with `n x n` nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, n, n)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.lx
        } else {
            i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.ly
        } else {
            j as f64 * self.hy()
        }
    }

    pub fn node(&self, i: usize, j: usize) -> Point2 {
        [self.x(i), self.y(j)]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= 0.0 && p[0] <= self.lx && p[1] >= 0.0 && p[1] <= self.ly
    }

    /// Number of interior (non-boundary) nodes.
    pub fn n_interior(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    /// Trapezoid weight of node `i` in the `x1` direction.
    #[inline]
    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.hx()
        } else {
            self.hx()
        }
    }

    #[inline]
    pub fn wy(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.hy()
        } else {
            self.hy()
        }
    }

    /// Centre of the plate, used for the `u_center` trace.
    pub fn center(&self) -> Point2 {
        [0.5 * self.lx, 0.5 * self.ly]
    }

    pub(crate) fn check(&self, f: &PlateField) -> Result<()> {
        if f.nx != self.nx || f.ny != self.ny {
            return Err(Error::GridMismatch {
                nx: self.nx,
                ny: self.ny,
                got_nx: f.nx,
                got_ny: f.ny,
            });
        }
        Ok(())
    }
}

/// Nodal scalar field on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlateField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl PlateField {
    pub fn zeros(g: &GridSpec) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            values: vec![0.0; g.len()],
        }
    }

    pub fn constant(g: &GridSpec, c: f64) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            values: vec![c; g.len()],
        }
    }

    pub fn from_fn(g: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(g.len());
        for i in 0..g.nx {
            let x = g.x(i);
            for j in 0..g.ny {
                values.push(f(x, g.y(j)));
            }
        }
        Self {
            nx: g.nx,
            ny: g.ny,
            values,
        }
    }

    /// Like [`PlateField::from_fn`] but with the boundary ring forced to zero.
    pub fn clamped_from_fn(g: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::from_fn(g, f);
        out.zero_boundary();
        out
    }

    pub fn from_values(g: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                g.len(),
                values.len()
            )));
        }
        Ok(Self {
            nx: g.nx,
            ny: g.ny,
            values,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.ny + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// True when every boundary node is exactly zero.
    pub fn is_clamped(&self) -> bool {
        let (nx, ny) = (self.nx, self.ny);
        (0..ny).all(|j| self.get(0, j) == 0.0 && self.get(nx - 1, j) == 0.0)
            && (0..nx).all(|i| self.get(i, 0) == 0.0 && self.get(i, ny - 1) == 0.0)
    }

    pub fn zero_boundary(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            self.set(0, j, 0.0);
            self.set(nx - 1, j, 0.0);
        }
        for i in 0..nx {
            self.set(i, 0, 0.0);
            self.set(i, ny - 1, 0.0);
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &PlateField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|x| *x *= a);
    }

    pub fn scaled(&self, a: f64) -> PlateField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `a * x + b * y`, elementwise.
    pub fn lincomb(a: f64, x: &PlateField, b: f64, y: &PlateField) -> PlateField {
        debug_assert_eq!(x.values.len(), y.values.len());
        PlateField {
            nx: x.nx,
            ny: x.ny,
            values: x
                .values
                .iter()
                .zip(&y.values)
                .map(|(p, q)| a * p + b * q)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &PlateField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Plain euclidean dot product of nodal vectors (no quadrature weights).
    pub fn dot_raw(&self, other: &PlateField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

impl Add for &PlateField {
    type Output = PlateField;
    fn add(self, rhs: &PlateField) -> PlateField {
        PlateField::lincomb(1.0, self, 1.0, rhs)
    }
}

impl Sub for &PlateField {
    type Output = PlateField;
    fn sub(self, rhs: &PlateField) -> PlateField {
        PlateField::lincomb(1.0, self, -1.0, rhs)
    }
}

impl Mul<&PlateField> for f64 {
    type Output = PlateField;
    fn mul(self, rhs: &PlateField) -> PlateField {
        rhs.scaled(self)
    }
}

impl Neg for &PlateField {
    type Output = PlateField;
    fn neg(self) -> PlateField {
        PlateField {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Phase point `(t, u, u_t)` of the plate.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateState {
    pub t: f64,
    pub u: PlateField,
    pub v: PlateField,
}

impl PlateState {
    pub fn new(t: f64, u: PlateField, v: PlateField) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument("state time must be finite".into()));
        }
        if !u.is_clamped() {
            return Err(Error::NotClamped("displacement u"));
        }
        if !v.is_clamped() {
            return Err(Error::NotClamped("velocity u_t"));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("plate state"));
        }
        Ok(Self { t, u, v })
    }

    pub fn zero(g: &GridSpec) -> Self {
        Self {
            t: 0.0,
            u: PlateField::zeros(g),
            v: PlateField::zeros(g),
        }
    }
}

/// Trapezoid-weighted `L2(Omega)` inner product.
pub fn inner_l2(f: &PlateField, h: &PlateField, g: &GridSpec) -> Result<f64> {
    g.check(f)?;
    g.check(h)?;
    Ok(inner_unchecked(f, h, g))
}

pub(crate) fn inner_unchecked(f: &PlateField, h: &PlateField, g: &GridSpec) -> f64 {
    let mut acc = 0.0;
    for i in 0..g.nx {
        let wx = g.wx(i);
        let mut row = 0.0;
        for j in 0..g.ny {
            let k = g.idx(i, j);
            row += g.wy(j) * f.values[k] * h.values[k];
        }
        acc += wx * row;
    }
    acc
}

pub fn norm_l2(f: &PlateField, g: &GridSpec) -> Result<f64> {
    Ok(inner_l2(f, f, g)?.sqrt())
}

/// Edge-based `||grad f||^2`. For fields vanishing on the boundary this equals
/// `<-Delta_h f, f>` exactly (summation by parts).
pub fn grad_sq(f: &PlateField, g: &GridSpec) -> Result<f64> {
    grad_inner(f, f, g)
}

/// Edge-based `<grad f, grad h>`.
pub fn grad_inner(f: &PlateField, h: &PlateField, g: &GridSpec) -> Result<f64> {
    g.check(f)?;
    g.check(h)?;
    let (hx, hy) = (g.hx(), g.hy());
    let mut acc = 0.0;
    for i in 0..g.nx - 1 {
        for j in 0..g.ny {
            let a = f.get(i + 1, j) - f.get(i, j);
            let b = h.get(i + 1, j) - h.get(i, j);
            acc += g.wy(j) * a * b / hx;
        }
    }
    for i in 0..g.nx {
        for j in 0..g.ny - 1 {
            let a = f.get(i, j + 1) - f.get(i, j);
            let b = h.get(i, j + 1) - h.get(i, j);
            acc += g.wx(i) * a * b / hy;
        }
    }
    Ok(acc)
}

/// `<f, h>_{L2_alpha} = <f, h> + alpha <grad f, grad h>`.
pub fn inner_l2alpha(f: &PlateField, h: &PlateField, alpha: f64, g: &GridSpec) -> Result<f64> {
    Ok(inner_l2(f, h, g)? + alpha * grad_inner(f, h, g)?)
}

/// `||f||^2_{L2_alpha} = ||f||^2 + alpha ||grad f||^2`.
pub fn norm_l2alpha_sq(f: &PlateField, alpha: f64, g: &GridSpec) -> Result<f64> {
    Ok(inner_l2(f, f, g)? + alpha * grad_sq(f, g)?)
}

pub fn norm_l2alpha(f: &PlateField, alpha: f64, g: &GridSpec) -> Result<f64> {
    Ok(norm_l2alpha_sq(f, alpha, g)?.sqrt())
}

/// `H1` norm squared, `||f||^2 + ||grad f||^2`.
pub fn norm_h1_sq(f: &PlateField, g: &GridSpec) -> Result<f64> {
    norm_l2alpha_sq(f, 1.0, g)
}

/// `||Delta_h f||` with the 5-point Laplacian.
pub fn seminorm_h2(f: &PlateField, g: &GridSpec) -> Result<f64> {
    let lap = crate::ops::laplacian(f, g)?;
    norm_l2(&lap, g)
}

/// `H2` norm `(||f||^2 + ||grad f||^2 + ||Delta_h f||^2)^(1/2)`. For clamped
/// fields `||Delta f||` controls every second derivative (`int u11^2 + 2 u12^2 + u22^2 = int (Delta u)^2`),
/// so this is the full `H2` norm.
pub fn norm_h2(f: &PlateField, g: &GridSpec) -> Result<f64> {
    Ok((norm_h1_sq(f, g)? + seminorm_h2(f, g)?.powi(2)).sqrt())
}

fn snap_to_node(s: f64) -> f64 {
    let r = s.round();
    if (s - r).abs() < 1e-10 {
        r
    } else {
        s
    }
}

/// Bilinear interpolation inside the closed rectangle, zero outside it.
pub fn sample_bilinear(f: &PlateField, g: &GridSpec, p: Point2) -> f64 {
    if !g.contains(p) {
        return 0.0;
    }
    let (hx, hy) = (g.hx(), g.hy());
    let sx = snap_to_node(p[0] / hx);
    let sy = snap_to_node(p[1] / hy);
    let mut i = sx.floor() as usize;
    let mut j = sy.floor() as usize;
    if i >= g.nx - 1 {
        i = g.nx - 2;
    }
    if j >= g.ny - 1 {
        j = g.ny - 2;
    }
    let fx = (sx - i as f64).clamp(0.0, 1.0);
    let fy = (sy - j as f64).clamp(0.0, 1.0);
    (1.0 - fx) * (1.0 - fy) * f.get(i, j)
        + fx * (1.0 - fy) * f.get(i + 1, j)
        + (1.0 - fx) * fy * f.get(i, j + 1)
        + fx * fy * f.get(i + 1, j + 1)
}
