//! Finite-difference operators on the plate grid.
//!
//! Clamped fields (`u = d_nu u = 0`) are differentiated with the mirror ghost
//! rule `u(-1, j) = u(1, j)`; any other field uses second-order one-sided
//! stencils on the boundary ring. Linear solves work on the vector of interior
//! nodes, numbered `(i - 1) * (ny - 2) + (j - 1)`.

use crate::banded::{BandedCholesky, BandedSpd};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PlateField};

/// Gather/scatter between full nodal fields and interior unknown vectors.
#[derive(Clone, Copy, Debug)]
pub struct InteriorMap {
    nx: usize,
    ny: usize,
}

impl InteriorMap {
    pub fn new(g: &GridSpec) -> Self {
        Self {
            nx: g.nx(),
            ny: g.ny(),
        }
    }

    pub fn len(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Half-bandwidth of a stencil reaching `reach` rows in `x1`.
    pub fn bandwidth(&self, reach: usize) -> usize {
        reach * (self.ny - 2)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.ny - 2) + (j - 1)
    }

    pub fn gather(&self, f: &PlateField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 1..self.nx - 1 {
            for j in 1..self.ny - 1 {
                out.push(f.get(i, j));
            }
        }
        out
    }

    /// Builds a clamped field from interior values.
    pub fn scatter(&self, g: &GridSpec, x: &[f64]) -> PlateField {
        let mut f = PlateField::zeros(g);
        self.scatter_into(x, &mut f);
        f
    }

    pub fn scatter_into(&self, x: &[f64], f: &mut PlateField) {
        let ny = self.ny;
        let vals = f.values_mut();
        for i in 1..self.nx - 1 {
            let src = &x[(i - 1) * (ny - 2)..i * (ny - 2)];
            vals[i * ny + 1..i * ny + ny - 1].copy_from_slice(src);
        }
    }
}

fn check_input(f: &PlateField, g: &GridSpec, what: &'static str) -> Result<()> {
    g.check(f)?;
    if !f.is_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// 5-point Laplacian on interior nodes; boundary ring of the output is zero.
pub fn laplacian(f: &PlateField, g: &GridSpec) -> Result<PlateField> {
    check_input(f, g, "laplacian input")?;
    let mut out = PlateField::zeros(g);
    laplacian_into(f, g, &mut out);
    Ok(out)
}

pub(crate) fn laplacian_into(f: &PlateField, g: &GridSpec, out: &mut PlateField) {
    let (nx, ny) = (g.nx(), g.ny());
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let v = f.values();
    let o = out.values_mut();
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let k = i * ny + j;
            o[k] = cx * (v[k + ny] - 2.0 * v[k] + v[k - ny]) + cy * (v[k + 1] - 2.0 * v[k] + v[k - 1]);
        }
    }
}

/// Clamped biharmonic `Delta_h^2` with the mirror ghost rule.
///
/// The Laplacian is first extended to the boundary ring through the ghosts
/// (`Delta_h u(0, j) = 2 u(1, j) / hx^2` and so on) and then the 5-point
/// Laplacian is applied again on the interior, giving the 13-point stencil.
pub fn biharmonic_clamped(f: &PlateField, g: &GridSpec) -> Result<PlateField> {
    check_input(f, g, "biharmonic input")?;
    if !f.is_clamped() {
        return Err(Error::NotClamped("biharmonic input"));
    }
    let lap = ghost_laplacian(f, g);
    let mut out = PlateField::zeros(g);
    laplacian_into(&lap, g, &mut out);
    Ok(out)
}

/// Laplacian of a clamped field on every node, boundary ring included.
pub(crate) fn ghost_laplacian(f: &PlateField, g: &GridSpec) -> PlateField {
    let (nx, ny) = (g.nx(), g.ny());
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut lap = PlateField::zeros(g);
    laplacian_into(f, g, &mut lap);
    for j in 1..ny - 1 {
        lap.set(0, j, 2.0 * cx * f.get(1, j));
        lap.set(nx - 1, j, 2.0 * cx * f.get(nx - 2, j));
    }
    for i in 1..nx - 1 {
        lap.set(i, 0, 2.0 * cy * f.get(i, 1));
        lap.set(i, ny - 1, 2.0 * cy * f.get(i, ny - 2));
    }
    lap
}

/// Boundary treatment used by the derivative fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Mirror ghosts; valid for fields with `u = d_nu u = 0`.
    Clamped,
    /// Second-order one-sided differences on the boundary ring.
    OneSided,
}

impl Boundary {
    pub fn detect(f: &PlateField) -> Self {
        if f.is_clamped() {
            Boundary::Clamped
        } else {
            Boundary::OneSided
        }
    }
}

#[inline]
fn second_diff(v: &[f64], k: usize, stride: usize, idx: usize, n: usize, clamped: bool) -> f64 {
    if idx == 0 {
        if clamped {
            2.0 * (v[k + stride] - v[k])
        } else {
            2.0 * v[k] - 5.0 * v[k + stride] + 4.0 * v[k + 2 * stride] - v[k + 3 * stride]
        }
    } else if idx == n - 1 {
        if clamped {
            2.0 * (v[k - stride] - v[k])
        } else {
            2.0 * v[k] - 5.0 * v[k - stride] + 4.0 * v[k - 2 * stride] - v[k - 3 * stride]
        }
    } else {
        v[k + stride] - 2.0 * v[k] + v[k - stride]
    }
}

/// Twice the first difference (so dividing by `2h` gives the derivative).
#[inline]
fn first_diff2(v: &[f64], k: usize, stride: usize, idx: usize, n: usize, clamped: bool) -> f64 {
    if idx == 0 {
        if clamped {
            0.0
        } else {
            -3.0 * v[k] + 4.0 * v[k + stride] - v[k + 2 * stride]
        }
    } else if idx == n - 1 {
        if clamped {
            0.0
        } else {
            3.0 * v[k] - 4.0 * v[k - stride] + v[k - 2 * stride]
        }
    } else {
        v[k + stride] - v[k - stride]
    }
}

/// `d^2 f / dx1^2` on every node.
pub fn d11(f: &PlateField, g: &GridSpec, bc: Boundary) -> PlateField {
    let (nx, ny) = (g.nx(), g.ny());
    let c = 1.0 / (g.hx() * g.hx());
    let clamped = bc == Boundary::Clamped;
    let v = f.values();
    let mut out = PlateField::zeros(g);
    let o = out.values_mut();
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            o[k] = c * second_diff(v, k, ny, i, nx, clamped);
        }
    }
    out
}

/// `d^2 f / dx2^2` on every node.
pub fn d22(f: &PlateField, g: &GridSpec, bc: Boundary) -> PlateField {
    let (nx, ny) = (g.nx(), g.ny());
    let c = 1.0 / (g.hy() * g.hy());
    let clamped = bc == Boundary::Clamped;
    let v = f.values();
    let mut out = PlateField::zeros(g);
    let o = out.values_mut();
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            o[k] = c * second_diff(v, k, 1, j, ny, clamped);
        }
    }
    out
}

/// `df / dx1` on every node.
pub fn d1(f: &PlateField, g: &GridSpec, bc: Boundary) -> PlateField {
    let (nx, ny) = (g.nx(), g.ny());
    let c = 0.5 / g.hx();
    let clamped = bc == Boundary::Clamped;
    let v = f.values();
    let mut out = PlateField::zeros(g);
    let o = out.values_mut();
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            o[k] = if clamped && (j == 0 || j == ny - 1) {
                0.0
            } else {
                c * first_diff2(v, k, ny, i, nx, clamped)
            };
        }
    }
    out
}

/// `df / dx2` on every node.
pub fn d2(f: &PlateField, g: &GridSpec, bc: Boundary) -> PlateField {
    let (nx, ny) = (g.nx(), g.ny());
    let c = 0.5 / g.hy();
    let clamped = bc == Boundary::Clamped;
    let v = f.values();
    let mut out = PlateField::zeros(g);
    let o = out.values_mut();
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            o[k] = if clamped && (i == 0 || i == nx - 1) {
                0.0
            } else {
                c * first_diff2(v, k, 1, j, ny, clamped)
            };
        }
    }
    out
}

/// Mixed derivative `d^2 f / dx1 dx2`: the 4-point cross stencil inside, and
/// the ghost rule (which gives exactly zero) or one-sided differences on the ring.
pub fn d12(f: &PlateField, g: &GridSpec, bc: Boundary) -> PlateField {
    let (nx, ny) = (g.nx(), g.ny());
    let mut out = PlateField::zeros(g);
    match bc {
        Boundary::Clamped => {
            let c = 0.25 / (g.hx() * g.hy());
            let v = f.values();
            let o = out.values_mut();
            for i in 1..nx - 1 {
                for j in 1..ny - 1 {
                    let k = i * ny + j;
                    o[k] = c * (v[k + ny + 1] - v[k + ny - 1] - v[k - ny + 1] + v[k - ny - 1]);
                }
            }
        }
        Boundary::OneSided => {
            let fx = d1(f, g, Boundary::OneSided);
            let c = 0.5 / g.hy();
            let v = fx.values();
            let o = out.values_mut();
            for i in 0..nx {
                for j in 0..ny {
                    let k = i * ny + j;
                    o[k] = c * first_diff2(v, k, 1, j, ny, false);
                }
            }
        }
    }
    out
}

/// The three second derivatives `(f_11, f_12, f_22)` with automatic boundary
/// treatment.
pub fn hessian(f: &PlateField, g: &GridSpec) -> [PlateField; 3] {
    let bc = Boundary::detect(f);
    [d11(f, g, bc), d12(f, g, bc), d22(f, g, bc)]
}

/// Interior-only centred operators reading the boundary ring as zero. For
/// clamped fields they agree with [`d11`], [`d22`], [`d12`], [`d1`] on the interior;
/// as matrices on interior vectors `dxx0`, `dyy0`, `dxy0` are symmetric and
/// `dx0` is skew.
pub(crate) mod interior {
    use crate::grid::{GridSpec, PlateField};

    fn apply(
        f: &PlateField,
        g: &GridSpec,
        out: &mut PlateField,
        stencil: impl Fn(&[f64], usize, usize) -> f64,
    ) {
        let (nx, ny) = (g.nx(), g.ny());
        let v = f.values();
        let o = out.values_mut();
        let at = |k: usize, i: usize, j: usize| -> f64 {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                0.0
            } else {
                v[k]
            }
        };
        // Copy with a zero ring so stencils may read boundary entries freely.
        let mut z = vec![0.0; v.len()];
        for i in 0..nx {
            for j in 0..ny {
                let k = i * ny + j;
                z[k] = at(k, i, j);
            }
        }
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let k = i * ny + j;
                o[k] = stencil(&z, k, ny);
            }
        }
    }

    pub fn dxx0(f: &PlateField, g: &GridSpec) -> PlateField {
        let c = 1.0 / (g.hx() * g.hx());
        let mut out = PlateField::zeros(g);
        apply(f, g, &mut out, |z, k, ny| c * (z[k + ny] - 2.0 * z[k] + z[k - ny]));
        out
    }

    pub fn dyy0(f: &PlateField, g: &GridSpec) -> PlateField {
        let c = 1.0 / (g.hy() * g.hy());
        let mut out = PlateField::zeros(g);
        apply(f, g, &mut out, |z, k, _| c * (z[k + 1] - 2.0 * z[k] + z[k - 1]));
        out
    }

    pub fn dxy0(f: &PlateField, g: &GridSpec) -> PlateField {
        let c = 0.25 / (g.hx() * g.hy());
        let mut out = PlateField::zeros(g);
        apply(f, g, &mut out, |z, k, ny| {
            c * (z[k + ny + 1] - z[k + ny - 1] - z[k - ny + 1] + z[k - ny - 1])
        });
        out
    }

    pub fn dx0(f: &PlateField, g: &GridSpec) -> PlateField {
        let c = 0.5 / g.hx();
        let mut out = PlateField::zeros(g);
        apply(f, g, &mut out, |z, k, ny| c * (z[k + ny] - z[k - ny]));
        out
    }

    pub fn dy0(f: &PlateField, g: &GridSpec) -> PlateField {
        let c = 0.5 / g.hy();
        let mut out = PlateField::zeros(g);
        apply(f, g, &mut out, |z, k, _| c * (z[k + 1] - z[k - 1]));
        out
    }
}

/// `-Delta_h` with homogeneous Dirichlet data, as a banded SPD matrix on the
/// interior unknowns.
pub fn assemble_neg_laplacian(g: &GridSpec) -> BandedSpd {
    let map = InteriorMap::new(g);
    let (nx, ny) = (g.nx(), g.ny());
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut a = BandedSpd::zeros(map.len(), map.bandwidth(1));
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let r = map.index(i, j);
            a.add_lower(r, r, 2.0 * cx + 2.0 * cy);
            if j > 1 {
                a.add_lower(r, map.index(i, j - 1), -cy);
            }
            if i > 1 {
                a.add_lower(r, map.index(i - 1, j), -cx);
            }
        }
    }
    a
}

/// Clamped `Delta_h^2` as a banded SPD matrix on the interior unknowns.
///
/// In Kronecker form it is `Bx (x) I + 2 Dxx (x) Dyy + I (x) By`, where `Dxx`
/// is the Dirichlet second difference and `Bx` the clamped 1-D fourth
/// difference (diagonal 6, or 7 next to the wall).
pub fn assemble_biharmonic(g: &GridSpec) -> BandedSpd {
    let map = InteriorMap::new(g);
    let (nx, ny) = (g.nx(), g.ny());
    let (mx, my) = (nx - 2, ny - 2);
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let quartic = |m: usize, a: usize, b: usize| -> f64 {
        // entry (a, b), a >= b, of the 1-D clamped fourth difference (unscaled)
        match a - b {
            0 => {
                if a == 0 || a == m - 1 {
                    7.0
                } else {
                    6.0
                }
            }
            1 => -4.0,
            2 => 1.0,
            _ => 0.0,
        }
    };
    let second = |a: usize, b: usize| -> f64 {
        match a.abs_diff(b) {
            0 => -2.0,
            1 => 1.0,
            _ => 0.0,
        }
    };
    let mut m = BandedSpd::zeros(map.len(), map.bandwidth(2));
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let r = map.index(i, j);
            let (a, b) = (i - 1, j - 1);
            for ii in a.saturating_sub(2)..=a {
                for jj in b.saturating_sub(2)..(b + 3).min(my) {
                    let c = map.index(ii + 1, jj + 1);
                    if c > r {
                        continue;
                    }
                    let mut v = 0.0;
                    if jj == b {
                        v += cx * cx * quartic(mx, a, ii);
                    }
                    if ii == a {
                        let (p, q) = if b >= jj { (b, jj) } else { (jj, b) };
                        v += cy * cy * quartic(my, p, q);
                    }
                    v += 2.0 * cx * cy * second(a, ii) * second(b, jj);
                    if v != 0.0 {
                        m.add_lower(r, c, v);
                    }
                }
            }
        }
    }
    m
}

/// Factorized clamped biharmonic operator, reused by the Airy solver, the
/// equilibrium preconditioner and the manufactured-solution checks.
#[derive(Clone, Debug)]
pub struct Biharmonic {
    grid: GridSpec,
    map: InteriorMap,
    chol: BandedCholesky,
}

impl Biharmonic {
    pub fn new(g: &GridSpec) -> Result<Self> {
        Ok(Self {
            grid: *g,
            map: InteriorMap::new(g),
            chol: assemble_biharmonic(g).factor()?,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn matrix(&self) -> &BandedSpd {
        self.chol.matrix()
    }

    /// Solves `Delta_h^2 w = rhs` with clamped `w`; boundary values of `rhs`
    /// are ignored. Returns the solution and the backward error.
    pub fn solve(&self, rhs: &PlateField) -> Result<(PlateField, f64)> {
        self.grid.check(rhs)?;
        let mut x = self.map.gather(rhs);
        let eta = self.chol.solve_in_place(&mut x);
        Ok((self.map.scatter(&self.grid, &x), eta))
    }

    /// `Delta_h^2 u` for clamped `u` through the assembled matrix.
    pub fn apply(&self, u: &PlateField) -> PlateField {
        let x = self.map.gather(u);
        let mut y = vec![0.0; x.len()];
        self.chol.matrix().matvec(&x, &mut y);
        self.map.scatter(&self.grid, &y)
    }

    /// `<Delta_h^2 u, u>` in the trapezoid inner product: the discrete `||Delta u||^2`
    /// consistent with the biharmonic stencil.
    pub fn energy(&self, u: &PlateField) -> f64 {
        let x = self.map.gather(u);
        let mut y = vec![0.0; x.len()];
        self.chol.matrix().matvec(&x, &mut y);
        self.grid.hx() * self.grid.hy() * x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn solve_vec(&self, x: &mut [f64]) -> f64 {
        self.chol.solve_in_place(x)
    }
}

/// Factorized `M_alpha = 1 - alpha Delta_h` with homogeneous Dirichlet data.
#[derive(Clone, Debug)]
pub struct Helmholtz {
    grid: GridSpec,
    alpha: f64,
    map: InteriorMap,
    chol: BandedCholesky,
}

impl Helmholtz {
    pub fn new(g: &GridSpec, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        let lap = assemble_neg_laplacian(g);
        let mut m = BandedSpd::zeros(lap.n(), lap.bandwidth());
        m.shift_diagonal(1.0);
        m.add_scaled(alpha, &lap);
        Ok(Self {
            grid: *g,
            alpha,
            map: InteriorMap::new(g),
            chol: m.factor()?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn solve(&self, rhs: &PlateField) -> Result<PlateField> {
        self.grid.check(rhs)?;
        let mut x = self.map.gather(rhs);
        let eta = self.chol.solve_in_place(&mut x);
        if eta > 1e-12 {
            return Err(Error::Solver {
                what: "M_alpha solve",
                residual: eta,
            });
        }
        Ok(self.map.scatter(&self.grid, &x))
    }

    /// `(1 - alpha Delta_h) w` on the interior.
    pub fn apply(&self, w: &PlateField) -> PlateField {
        let x = self.map.gather(w);
        let mut y = vec![0.0; x.len()];
        self.chol.matrix().matvec(&x, &mut y);
        self.map.scatter(&self.grid, &y)
    }
}

/// Solves `(1 - alpha Delta_h) w = rhs` with `w = 0` on the boundary.
pub fn helmholtz_malpha_solve(rhs: &PlateField, alpha: f64, g: &GridSpec) -> Result<PlateField> {
    check_input(rhs, g, "M_alpha right-hand side")?;
    Helmholtz::new(g, alpha)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner_l2;
    use std::f64::consts::PI;

    fn sine(g: &GridSpec) -> PlateField {
        let (lx, ly) = (g.lx(), g.ly());
        PlateField::from_fn(g, |x, y| (PI * x / lx).sin() * (PI * y / ly).sin())
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = GridSpec::unit_square(9).unwrap();
        let z = PlateField::zeros(&g);
        assert_eq!(laplacian(&z, &g).unwrap().max_abs(), 0.0);
        assert_eq!(biharmonic_clamped(&z, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = GridSpec::new(2.0, 1.0, 13, 9).unwrap();
        let f = PlateField::from_fn(&g, |x, _| x * (2.0 - x));
        let l = laplacian(&f, &g).unwrap();
        for i in 1..12 {
            for j in 1..8 {
                assert!((l.get(i, j) + 2.0).abs() < 1e-10);
            }
        }
        assert_eq!(l.get(0, 3), 0.0);
    }

    #[test]
    fn laplacian_second_order_on_sine() {
        let mut errs = vec![];
        for n in [17, 33, 65] {
            let g = GridSpec::new(1.0, 1.5, n, n).unwrap();
            let f = sine(&g);
            let l = laplacian(&f, &g).unwrap();
            let k = -PI * PI * (1.0 + 1.0 / 2.25);
            let mut e: f64 = 0.0;
            for i in 1..n - 1 {
                for j in 1..n - 1 {
                    e = e.max((l.get(i, j) - k * f.get(i, j)).abs());
                }
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] >= 3.5 && errs[1] / errs[2] >= 3.5, "{errs:?}");
    }

    #[test]
    fn biharmonic_rejects_unclamped() {
        let g = GridSpec::unit_square(9).unwrap();
        let one = PlateField::constant(&g, 1.0);
        assert!(matches!(
            biharmonic_clamped(&one, &g),
            Err(Error::NotClamped(_))
        ));
    }

    #[test]
    fn stencil_and_assembled_matrix_agree() {
        let g = GridSpec::new(1.0, 0.8, 11, 9).unwrap();
        let f = PlateField::clamped_from_fn(&g, |x, y| (5.0 * x).sin() * (3.0 * y + 0.2).cos() + x * y);
        let a = biharmonic_clamped(&f, &g).unwrap();
        let b = Biharmonic::new(&g).unwrap().apply(&f);
        assert!(a.max_abs_diff(&b) < 1e-9 * a.max_abs());
    }

    #[test]
    fn biharmonic_energy_matches_ghost_laplacian_norm() {
        let g = GridSpec::new(1.0, 1.2, 13, 11).unwrap();
        let f = PlateField::clamped_from_fn(&g, |x, y| (7.0 * x).sin() * (2.0 * y).sin() + x * x);
        let lap = ghost_laplacian(&f, &g);
        let n2 = inner_l2(&lap, &lap, &g).unwrap();
        let e = Biharmonic::new(&g).unwrap().energy(&f);
        assert!((n2 - e).abs() < 1e-10 * e);
    }

    #[test]
    fn helmholtz_identity_limit() {
        let g = GridSpec::unit_square(17).unwrap();
        let rhs = PlateField::clamped_from_fn(&g, |x, y| (PI * x).sin() * (2.0 * PI * y).sin());
        let w = helmholtz_malpha_solve(&rhs, 1e-8, &g).unwrap();
        assert!(w.max_abs_diff(&rhs) < 1e-6);
    }

    #[test]
    fn helmholtz_round_trip() {
        let g = GridSpec::new(1.0, 2.0, 17, 21).unwrap();
        let h = Helmholtz::new(&g, 0.3).unwrap();
        let w = PlateField::clamped_from_fn(&g, |x, y| (x - 0.3).powi(3) * (y * 4.0).cos());
        let back = h.solve(&h.apply(&w)).unwrap();
        assert!(back.max_abs_diff(&w) < 1e-10);
        assert!(helmholtz_malpha_solve(&w, 0.0, &g).is_err());
    }

    #[test]
    fn clamped_derivatives_vanish_where_expected() {
        let g = GridSpec::unit_square(11).unwrap();
        let f = PlateField::clamped_from_fn(&g, |x, y| (x * (1.0 - x) * y * (1.0 - y)).powi(2) * 50.0);
        let f12 = d12(&f, &g, Boundary::Clamped);
        let f1 = d1(&f, &g, Boundary::Clamped);
        for k in 0..11 {
            assert_eq!(f12.get(0, k), 0.0);
            assert_eq!(f12.get(k, 10), 0.0);
            assert_eq!(f1.get(k, 0), 0.0);
            assert_eq!(f1.get(10, k), 0.0);
        }
        let f22 = d22(&f, &g, Boundary::Clamped);
        assert!(f22.get(5, 0) > 0.0);
    }

    #[test]
    fn one_sided_derivatives_exact_on_quadratics() {
        let g = GridSpec::new(1.3, 0.7, 9, 8).unwrap();
        let f = PlateField::from_fn(&g, |x, y| 0.5 * x * x - 2.0 * x * y + 3.0 * y * y + x);
        let bc = Boundary::detect(&f);
        assert_eq!(bc, Boundary::OneSided);
        let (a, b, c) = (d11(&f, &g, bc), d12(&f, &g, bc), d22(&f, &g, bc));
        let fx = d1(&f, &g, bc);
        for i in 0..9 {
            for j in 0..8 {
                assert!((a.get(i, j) - 1.0).abs() < 1e-9);
                assert!((b.get(i, j) + 2.0).abs() < 1e-9);
                assert!((c.get(i, j) - 6.0).abs() < 1e-9);
                let (x, y) = (g.x(i), g.y(j));
                assert!((fx.get(i, j) - (x - 2.0 * y + 1.0)).abs() < 1e-9);
            }
        }
    }
}
