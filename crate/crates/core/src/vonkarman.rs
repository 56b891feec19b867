//! Von Karman bracket, Airy stress function and the nonlinear plate force.
//!
//! The force `f_v(u) = -[u, v(u)] - [u, F0]` is evaluated in two conservative
//! pieces. The Airy part uses `-(D22 (u11 v) + D11 (u22 v) - 2 D12 (u12 v))`, the
//! exact adjoint of the interior bracket `h -> [u, h]`. The pre-stress part uses
//! the divergence form `[u, F0] = div(cof(D^2 F0) grad u)` with face-averaged
//! coefficients, a symmetric operator that reduces to `F0_11 Delta_h u` when
//! `D^2 F0` is a constant multiple of the identity. Together they make the
//! discrete force the exact gradient of
//! `Pi_d(u) = 1/4 <Delta^2 v, v> - 1/2 <L u, u> - <p0, u>`, and pointwise they
//! agree with `-[u, v + F0]` to second order in the mesh width.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PlateField};
use crate::ops::{d11, d12, d22, interior, Biharmonic, Boundary};

/// Static loads: transverse pressure `p0` and in-plane stress function `F0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadSet {
    pub p0: PlateField,
    pub f0: PlateField,
}

impl LoadSet {
    pub fn new(g: &GridSpec, p0: PlateField, f0: PlateField) -> Result<Self> {
        g.check(&p0)?;
        g.check(&f0)?;
        if !p0.is_finite() {
            return Err(Error::NonFinite("pressure p0"));
        }
        if !f0.is_finite() {
            return Err(Error::NonFinite("in-plane stress F0"));
        }
        Ok(Self { p0, f0 })
    }

    pub fn zero(g: &GridSpec) -> Self {
        Self {
            p0: PlateField::zeros(g),
            f0: PlateField::zeros(g),
        }
    }

    /// Largest discrete second derivative of `F0`.
    pub fn f0_curvature(&self, g: &GridSpec) -> f64 {
        let bc = Boundary::detect(&self.f0);
        [d11(&self.f0, g, bc), d12(&self.f0, g, bc), d22(&self.f0, g, bc)]
            .iter()
            .map(|f| f.max_abs())
            .fold(0.0, f64::max)
    }
}

/// Compressive pre-stress `F0 = -beta |x - c|^2` about the plate centre `c`.
pub fn radial_prestress(g: &GridSpec, beta: f64) -> PlateField {
    let [cx, cy] = g.center();
    PlateField::from_fn(g, |x, y| -beta * ((x - cx).powi(2) + (y - cy).powi(2)))
}

/// Pointwise von Karman bracket
/// `[u, w] = u11 w22 + u22 w11 - 2 u12 w12` on every node, with the ghost rule
/// for clamped inputs and one-sided differences otherwise.
pub fn vk_bracket(u: &PlateField, w: &PlateField, g: &GridSpec) -> Result<PlateField> {
    g.check(u)?;
    g.check(w)?;
    let (bu, bw) = (Boundary::detect(u), Boundary::detect(w));
    let hu = [d11(u, g, bu), d12(u, g, bu), d22(u, g, bu)];
    let hw = [d11(w, g, bw), d12(w, g, bw), d22(w, g, bw)];
    let mut out = PlateField::zeros(g);
    let o = out.values_mut();
    for (k, o) in o.iter_mut().enumerate() {
        *o = hu[0].values()[k] * hw[2].values()[k] + hu[2].values()[k] * hw[0].values()[k]
            - 2.0 * hu[1].values()[k] * hw[1].values()[k];
    }
    Ok(out)
}

/// Interior second derivatives `(u11, u12, u22)` reading the ring as zero.
#[derive(Clone, Debug)]
struct Hess0 {
    f11: PlateField,
    f12: PlateField,
    f22: PlateField,
}

impl Hess0 {
    fn new(u: &PlateField, g: &GridSpec) -> Self {
        Self {
            f11: interior::dxx0(u, g),
            f12: interior::dxy0(u, g),
            f22: interior::dyy0(u, g),
        }
    }
}

/// `[u, h]` on interior nodes (boundary ring zero).
fn bracket_form(a: &Hess0, b: &Hess0, g: &GridSpec) -> PlateField {
    let mut out = PlateField::zeros(g);
    let o = out.values_mut();
    let (a11, a12, a22) = (a.f11.values(), a.f12.values(), a.f22.values());
    let (b11, b12, b22) = (b.f11.values(), b.f12.values(), b.f22.values());
    for k in 0..o.len() {
        o[k] = a11[k] * b22[k] + a22[k] * b11[k] - 2.0 * a12[k] * b12[k];
    }
    out
}

/// Adjoint of `h -> [u, h]` applied to `w`: `D22(u11 w) + D11(u22 w) - 2 D12(u12 w)`.
fn bracket_adjoint(a: &Hess0, w: &PlateField, g: &GridSpec) -> PlateField {
    let prod = |f: &PlateField| {
        let mut p = f.clone();
        for (x, y) in p.values_mut().iter_mut().zip(w.values()) {
            *x *= y;
        }
        p
    };
    let t1 = interior::dyy0(&prod(&a.f11), g);
    let t2 = interior::dxx0(&prod(&a.f22), g);
    let t3 = interior::dxy0(&prod(&a.f12), g);
    let mut out = t1;
    out.axpy(1.0, &t2);
    out.axpy(-2.0, &t3);
    out
}

/// Solution of the clamped Airy problem `Delta^2 v = -[u, u]`.
#[derive(Clone, Debug)]
pub struct AirySolution {
    pub v: PlateField,
    /// Normwise backward error of the linear solve.
    pub residual_norm: f64,
}

/// Tolerance on the Airy solve backward error.
pub const AIRY_TOL: f64 = 1e-10;

/// Von Karman nonlinearity bound to a grid, a factorized biharmonic and loads.
#[derive(Clone, Debug)]
pub struct VonKarman {
    grid: GridSpec,
    bih: Arc<Biharmonic>,
    loads: LoadSet,
    prestress: Prestress,
}

/// Symmetric discretization of `u -> [u, F0]` on clamped fields.
#[derive(Clone, Debug)]
struct Prestress {
    /// `F0_22` on x-faces `(i + 1/2, j)`, indexed `i * ny + j` for `i < nx - 1`.
    ax: Vec<f64>,
    /// `F0_11` on y-faces `(i, j + 1/2)`, indexed `i * ny + j` for `j < ny - 1`.
    ay: Vec<f64>,
    /// `F0_12` at nodes.
    c: PlateField,
    zero: bool,
}

impl Prestress {
    fn new(f0: &PlateField, g: &GridSpec) -> Self {
        let bc = Boundary::detect(f0);
        let (f11, f12, f22) = (d11(f0, g, bc), d12(f0, g, bc), d22(f0, g, bc));
        let (nx, ny) = (g.nx(), g.ny());
        let mut ax = vec![0.0; nx * ny];
        let mut ay = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                if i + 1 < nx {
                    ax[i * ny + j] = 0.5 * (f22.get(i, j) + f22.get(i + 1, j));
                }
                if j + 1 < ny {
                    ay[i * ny + j] = 0.5 * (f11.get(i, j) + f11.get(i, j + 1));
                }
            }
        }
        let zero = f0.max_abs() == 0.0;
        Self { ax, ay, c: f12, zero }
    }

    /// `L u` on interior nodes, boundary ring zero.
    fn apply(&self, u: &PlateField, g: &GridSpec) -> PlateField {
        let mut out = PlateField::zeros(g);
        if self.zero {
            return out;
        }
        let (nx, ny) = (g.nx(), g.ny());
        let (hx2, hy2) = (g.hx() * g.hx(), g.hy() * g.hy());
        let mut a1 = interior::dx0(u, g);
        let mut a2 = interior::dy0(u, g);
        for (k, (p, q)) in a1.values_mut().iter_mut().zip(a2.values_mut()).enumerate() {
            *p *= self.c.values()[k];
            *q *= self.c.values()[k];
        }
        let cross = &interior::dy0(&a1, g) + &interior::dx0(&a2, g);
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let k = i * ny + j;
                let uc = u.get(i, j);
                let fx = (self.ax[k] * (u.get(i + 1, j) - uc)
                    - self.ax[k - ny] * (uc - u.get(i - 1, j)))
                    / hx2;
                let fy = (self.ay[k] * (u.get(i, j + 1) - uc)
                    - self.ay[k - 1] * (uc - u.get(i, j - 1)))
                    / hy2;
                out.set(i, j, fx + fy - cross.get(i, j));
            }
        }
        out
    }
}

/// State-dependent pieces reused by the Jacobian action.
#[derive(Clone, Debug)]
pub struct Linearization {
    hu: Hess0,
    pub v: PlateField,
}

impl VonKarman {
    pub fn new(g: &GridSpec, loads: LoadSet) -> Result<Self> {
        Ok(Self::with_biharmonic(Arc::new(Biharmonic::new(g)?), loads))
    }

    pub fn with_biharmonic(bih: Arc<Biharmonic>, loads: LoadSet) -> Self {
        let grid = *bih.grid();
        Self {
            prestress: Prestress::new(&loads.f0, &grid),
            grid,
            bih,
            loads,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn loads(&self) -> &LoadSet {
        &self.loads
    }

    pub fn biharmonic(&self) -> &Arc<Biharmonic> {
        &self.bih
    }

    fn check_clamped(&self, u: &PlateField, what: &'static str) -> Result<()> {
        self.grid.check(u)?;
        if !u.is_clamped() {
            return Err(Error::NotClamped(what));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    fn solve_airy_rhs(&self, rhs: &PlateField) -> Result<AirySolution> {
        let (v, eta) = self.bih.solve(rhs)?;
        if eta > AIRY_TOL {
            return Err(Error::Solver {
                what: "Airy solve",
                residual: eta,
            });
        }
        Ok(AirySolution {
            v,
            residual_norm: eta,
        })
    }

    /// Clamped solution of `Delta_h^2 v = -[u, u]`.
    pub fn airy_solve(&self, u: &PlateField) -> Result<AirySolution> {
        self.check_clamped(u, "Airy input u")?;
        let hu = Hess0::new(u, &self.grid);
        let rhs = -&bracket_form(&hu, &hu, &self.grid);
        self.solve_airy_rhs(&rhs)
    }

    pub fn linearize(&self, u: &PlateField) -> Result<Linearization> {
        self.check_clamped(u, "plate displacement")?;
        let hu = Hess0::new(u, &self.grid);
        let rhs = -&bracket_form(&hu, &hu, &self.grid);
        let v = self.solve_airy_rhs(&rhs)?.v;
        Ok(Linearization { hu, v })
    }

    /// `f_v(u) = -[u, v(u) + F0]` in conservative form; boundary ring zero.
    pub fn fv(&self, u: &PlateField) -> Result<PlateField> {
        Ok(self.fv_and_airy(u)?.0)
    }

    /// Force together with the Airy function it was built from.
    pub fn fv_and_airy(&self, u: &PlateField) -> Result<(PlateField, PlateField)> {
        let lin = self.linearize(u)?;
        let mut f = bracket_adjoint(&lin.hu, &lin.v, &self.grid);
        f.axpy(1.0, &self.prestress.apply(u, &self.grid));
        f.scale(-1.0);
        Ok((f, lin.v))
    }

    /// Jacobian action `-[h, v(u) + F0] - [u, dv]` with `Delta^2 dv = -2 [u, h]`.
    pub fn fv_jacobian_apply(&self, u: &PlateField, h: &PlateField) -> Result<PlateField> {
        let lin = self.linearize(u)?;
        self.jacobian_apply_lin(&lin, h)
    }

    pub fn jacobian_apply_lin(&self, lin: &Linearization, h: &PlateField) -> Result<PlateField> {
        self.check_clamped(h, "Jacobian direction")?;
        let g = &self.grid;
        let hh = Hess0::new(h, g);
        let rhs = -2.0 * &bracket_form(&lin.hu, &hh, g);
        let dv = self.solve_airy_rhs(&rhs)?.v;
        let mut out = bracket_adjoint(&hh, &lin.v, g);
        out.axpy(1.0, &bracket_adjoint(&lin.hu, &dv, g));
        out.axpy(1.0, &self.prestress.apply(h, g));
        out.scale(-1.0);
        Ok(out)
    }

    /// `<Delta_h^2 u, u>`, the discrete `||Delta u||^2` of a clamped field.
    pub fn h2_energy(&self, u: &PlateField) -> f64 {
        self.bih.energy(u)
    }

    /// Discrete potential `Pi_d(u) = 1/4 ||Delta v||^2 - 1/2 <[u, F0], u> - <p0, u>`,
    /// whose gradient is `f_v(u) - p0`.
    pub fn potential_energy(&self, u: &PlateField) -> Result<f64> {
        let v = self.airy_solve(u)?.v;
        Ok(self.potential_with_airy(u, &v))
    }

    /// [`VonKarman::potential_energy`] with a precomputed Airy function.
    pub fn potential_with_airy(&self, u: &PlateField, v: &PlateField) -> f64 {
        let g = &self.grid;
        let lu = self.prestress.apply(u, g);
        0.25 * self.bih.energy(v) - 0.5 * interior_inner(&lu, u, g)
            - interior_inner(&self.loads.p0, u, g)
    }

    /// `Pi_*(u) = 1/2 [ ||Delta u||^2 + 1/2 ||Delta v(u)||^2 ]`.
    pub fn pi_star(&self, u: &PlateField) -> Result<f64> {
        let v = self.airy_solve(u)?.v;
        Ok(self.pi_star_with_airy(u, &v))
    }

    pub fn pi_star_with_airy(&self, u: &PlateField, v: &PlateField) -> f64 {
        0.5 * (self.bih.energy(u) + 0.5 * self.bih.energy(v))
    }
}

/// Trapezoid inner product restricted to interior nodes (the ring of `u`
/// vanishes anyway for clamped fields, so this only drops boundary values of `p`).
pub(crate) fn interior_inner(p: &PlateField, u: &PlateField, g: &GridSpec) -> f64 {
    let (nx, ny) = (g.nx(), g.ny());
    let mut acc = 0.0;
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            acc += p.get(i, j) * u.get(i, j);
        }
    }
    acc * g.hx() * g.hy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_l2, norm_l2};
    use crate::ops::laplacian;

    fn bump(g: &GridSpec, a: f64, p: f64) -> PlateField {
        PlateField::clamped_from_fn(g, |x, y| {
            a * (x * (1.0 - x) * y * (1.0 - y)).powi(2) * 16.0 * (1.0 + p * (3.0 * x + y).sin())
        })
    }

    #[test]
    fn bracket_polynomial_identities() {
        let g = GridSpec::new(1.0, 1.3, 9, 11).unwrap();
        let u = PlateField::from_fn(&g, |x, _| 0.5 * x * x);
        let w = PlateField::from_fn(&g, |_, y| 0.5 * y * y);
        let b = vk_bracket(&u, &w, &g).unwrap();
        assert!(b.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
        let xy = PlateField::from_fn(&g, |x, y| x * y);
        let b = vk_bracket(&xy, &xy, &g).unwrap();
        assert!(b.values().iter().all(|v| (v + 2.0).abs() < 1e-9));
        let z = PlateField::zeros(&g);
        assert_eq!(vk_bracket(&z, &w, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bracket_is_exactly_symmetric() {
        let g = GridSpec::unit_square(13).unwrap();
        let u = bump(&g, 1.0, 0.4);
        let w = PlateField::from_fn(&g, |x, y| (4.0 * x * y).cos() + x);
        assert_eq!(vk_bracket(&u, &w, &g).unwrap(), vk_bracket(&w, &u, &g).unwrap());
    }

    #[test]
    fn airy_zero_and_scaling() {
        let g = GridSpec::unit_square(17).unwrap();
        let vk = VonKarman::new(&g, LoadSet::zero(&g)).unwrap();
        assert_eq!(vk.airy_solve(&PlateField::zeros(&g)).unwrap().v.max_abs(), 0.0);
        let u = bump(&g, 0.3, 0.5);
        let v1 = vk.airy_solve(&u).unwrap().v;
        let v3 = vk.airy_solve(&u.scaled(3.0)).unwrap().v;
        assert!(v3.max_abs_diff(&v1.scaled(9.0)) < 1e-10 * v3.max_abs());
        assert!(vk.airy_solve(&PlateField::constant(&g, 1.0)).is_err());
    }

    #[test]
    fn pure_von_karman_force_is_cubic() {
        let g = GridSpec::unit_square(17).unwrap();
        let vk = VonKarman::new(&g, LoadSet::zero(&g)).unwrap();
        let u = bump(&g, 1.0, 0.3);
        let f1 = vk.fv(&u).unwrap();
        let f2 = vk.fv(&u.scaled(2.0)).unwrap();
        assert!(f2.max_abs_diff(&f1.scaled(8.0)) < 1e-9 * f2.max_abs());
        let mut prev: Option<f64> = None;
        for eps in [1e-1, 1e-2, 1e-3] {
            let n = norm_l2(&vk.fv(&u.scaled(eps)).unwrap(), &g).unwrap();
            if let Some(p) = prev {
                let slope: f64 = (p / n).log10();
                assert!((slope - 3.0).abs() < 1e-6, "slope {slope}");
            }
            prev = Some(n);
        }
    }

    #[test]
    fn linear_part_matches_twice_beta_laplacian() {
        let g = GridSpec::unit_square(33).unwrap();
        let beta = 2.5;
        let loads = LoadSet::new(&g, PlateField::zeros(&g), radial_prestress(&g, beta)).unwrap();
        let vk = VonKarman::new(&g, loads).unwrap();
        let h = bump(&g, 1.0, 0.2);
        let lap = laplacian(&h, &g).unwrap().scaled(2.0 * beta);
        let lin = vk.fv_jacobian_apply(&PlateField::zeros(&g), &h).unwrap();
        assert!(lin.max_abs_diff(&lap) < 1e-10 * lap.max_abs());
        let mut errs = vec![];
        for eps in [1e-1, 1e-2, 1e-3] {
            let f = vk.fv(&h.scaled(eps)).unwrap();
            errs.push(norm_l2(&(&f - &lap.scaled(eps)), &g).unwrap());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log10() > 2.9, "{errs:?}");
        }
    }

    #[test]
    fn jacobian_matches_central_difference() {
        let g = GridSpec::unit_square(17).unwrap();
        let loads = LoadSet::new(&g, PlateField::zeros(&g), radial_prestress(&g, 3.0)).unwrap();
        let vk = VonKarman::new(&g, loads).unwrap();
        let u = bump(&g, 0.7, 0.5);
        let h = PlateField::clamped_from_fn(&g, |x, y| (x * (1.0 - x) * y * (1.0 - y)) * (5.0 * y).cos());
        let j = vk.fv_jacobian_apply(&u, &h).unwrap();
        let mut errs = vec![];
        for eps in [1e-2, 5e-3] {
            let fp = vk.fv(&(&u + &h.scaled(eps))).unwrap();
            let fm = vk.fv(&(&u - &h.scaled(eps))).unwrap();
            let fd = (&fp - &fm).scaled(0.5 / eps);
            errs.push(norm_l2(&(&fd - &j), &g).unwrap());
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn jacobian_is_symmetric() {
        let g = GridSpec::unit_square(9).unwrap();
        let loads = LoadSet::new(&g, PlateField::zeros(&g), radial_prestress(&g, 1.0)).unwrap();
        let vk = VonKarman::new(&g, loads).unwrap();
        let u = bump(&g, 2.0, 0.5);
        let lin = vk.linearize(&u).unwrap();
        let n = 7 * 7;
        let map = crate::ops::InteriorMap::new(&g);
        let mut dense = vec![vec![0.0; n]; n];
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            let col = map.gather(&vk.jacobian_apply_lin(&lin, &map.scatter(&g, &e)).unwrap());
            for r in 0..n {
                dense[r][c] = col[r];
            }
        }
        let scale = dense.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        for r in 0..n {
            for c in 0..n {
                assert!((dense[r][c] - dense[c][r]).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn potential_gradient_consistency() {
        let g = GridSpec::unit_square(17).unwrap();
        let p0 = PlateField::from_fn(&g, |x, y| 10.0 * x - y);
        let loads = LoadSet::new(&g, p0.clone(), radial_prestress(&g, 5.0)).unwrap();
        let vk = VonKarman::new(&g, loads).unwrap();
        let u = bump(&g, 0.8, 0.4);
        let h = bump(&g, 0.5, -0.7);
        let mut grad = vk.fv(&u).unwrap();
        for i in 1..16 {
            for j in 1..16 {
                grad.set(i, j, grad.get(i, j) - p0.get(i, j));
            }
        }
        let exact = inner_l2(&grad, &h, &g).unwrap();
        let mut errs = vec![];
        for eps in [1e-2, 5e-3] {
            let pp = vk.potential_energy(&(&u + &h.scaled(eps))).unwrap();
            let pm = vk.potential_energy(&(&u - &h.scaled(eps))).unwrap();
            errs.push(((pp - pm) / (2.0 * eps) - exact).abs());
        }
        assert!(errs[1] < 1e-6 * exact.abs().max(1.0), "{errs:?}");
        assert!(vk.potential_energy(&PlateField::zeros(&g)).unwrap() == 0.0);
        assert!(vk.pi_star(&u).unwrap() > 0.0);
    }

    fn trilinear_defect(n: usize) -> f64 {
        let g = GridSpec::unit_square(n).unwrap();
        let b = |x: f64, y: f64| (x * (1.0 - x) * y * (1.0 - y)).powi(2) * 16.0;
        let u = PlateField::clamped_from_fn(&g, |x, y| b(x, y) * (1.0 + x - 0.5 * y));
        let w = PlateField::clamped_from_fn(&g, |x, y| b(x, y) * (2.0 * x + 3.0 * y).cos());
        let psi = PlateField::clamped_from_fn(&g, |x, y| b(x, y) * (1.0 + (4.0 * x * y).sin()));
        let a = inner_l2(&vk_bracket(&u, &w, &g).unwrap(), &psi, &g).unwrap();
        let c = inner_l2(&vk_bracket(&u, &psi, &g).unwrap(), &w, &g).unwrap();
        (a - c).abs()
    }

    #[test]
    fn trilinear_form_is_symmetric_to_second_order() {
        let d: Vec<f64> = [17, 33, 65].iter().map(|&n| trilinear_defect(n)).collect();
        for w in d.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{d:?}");
        }
    }

    #[test]
    fn conservative_force_agrees_with_pointwise_bracket_inside() {
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let g = GridSpec::unit_square(n).unwrap();
                let f0 = PlateField::from_fn(&g, |x, y| (x + 0.3 * y).sin() * 2.0 - x * y * y);
                let loads = LoadSet::new(&g, PlateField::zeros(&g), f0.clone()).unwrap();
                let vk = VonKarman::new(&g, loads).unwrap();
                let u = bump(&g, 1.0, 0.3);
                let (f, v) = vk.fv_and_airy(&u).unwrap();
                let pw = -&vk_bracket(&u, &(&v + &f0), &g).unwrap();
                let (i0, i1) = ((n - 1) / 4, 3 * (n - 1) / 4);
                let mut e = 0.0_f64;
                for i in i0..=i1 {
                    for j in i0..=i1 {
                        e = e.max((f.get(i, j) - pw.get(i, j)).abs());
                    }
                }
                e
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.0, "{errs:?}");
        }
    }

    #[test]
    fn airy_recovers_manufactured_solution() {
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let g = GridSpec::unit_square(n).unwrap();
                let vstar = PlateField::clamped_from_fn(&g, |x, y| (x * (1.0 - x) * y * (1.0 - y)).powi(2));
                // Delta^2 of (x(1-x))^2 (y(1-y))^2 in closed form
                let p = |t: f64| (t * (1.0 - t)).powi(2);
                let p2 = |t: f64| 2.0 - 12.0 * t + 12.0 * t * t;
                let rhs = PlateField::from_fn(&g, |x, y| 24.0 * p(y) + 2.0 * p2(x) * p2(y) + 24.0 * p(x));
                let bih = Biharmonic::new(&g).unwrap();
                let (v, eta) = bih.solve(&rhs).unwrap();
                assert!(eta < AIRY_TOL);
                v.max_abs_diff(&vstar)
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{errs:?}");
        }
    }
}
