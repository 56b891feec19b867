//! Energy functionals, the Lyapunov function and the per-step energy report.
//!
//! The plate energy is taken in the form whose time derivative matches the
//! discrete equation exactly:
//! `E_pl = 1/2 ||u_t||^2_{L2_alpha} + 1/2 ||Delta u||^2 + Pi_d(u)` with
//! `Pi_d(u) = 1/4 ||Delta v(u)||^2 - 1/2 <[u, F0], u> - <p0, u>`, so that along
//! solutions `d/dt E_pl = -k ||u_t||^2_{L2_alpha} - ||u_t||^2 - U <d1 u, u_t> - <q, u_t>`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inner_l2alpha, norm_l2alpha_sq, GridSpec, PlateField, PlateState};
use crate::vonkarman::VonKarman;

/// Weights of the cross and memory terms in the Lyapunov function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovWeights {
    pub nu: f64,
    pub mu: f64,
}

impl LyapunovWeights {
    pub fn new(nu: f64, mu: f64) -> Result<Self> {
        if !(nu > 0.0 && mu > 0.0 && nu.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lyapunov weights must be positive, got nu = {nu}, mu = {mu}"
            )));
        }
        Ok(Self { nu, mu })
    }
}

impl Default for LyapunovWeights {
    fn default() -> Self {
        Self { nu: 0.01, mu: 0.01 }
    }
}

/// Energy quantities at one output time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e_pl: f64,
    pub e_star: f64,
    pub pi_star: f64,
    /// `1/2 ||u_t||^2_{L2_alpha}`
    pub ke: f64,
    pub ut_l2alpha: f64,
    /// Lyapunov function; `None` while the history is shorter than `t*`.
    pub v: Option<f64>,
    pub diss_accum: f64,
    /// Accumulated absolute defect of the discrete power balance.
    pub power_residual: f64,
    pub u_center: f64,
}

/// Energy pieces of a plate configuration that do not involve the velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticEnergy {
    /// `||Delta u||^2`
    pub lap_u_sq: f64,
    /// `||Delta v(u)||^2`
    pub lap_v_sq: f64,
    /// `Pi_d(u)`
    pub pi_d: f64,
}

impl StaticEnergy {
    pub fn new(vk: &VonKarman, u: &PlateField, v: &PlateField) -> Self {
        Self {
            lap_u_sq: vk.h2_energy(u),
            lap_v_sq: vk.h2_energy(v),
            pi_d: vk.potential_with_airy(u, v),
        }
    }

    pub fn pi_star(&self) -> f64 {
        0.5 * (self.lap_u_sq + 0.5 * self.lap_v_sq)
    }

    /// `1/2 ||Delta u||^2 + Pi_d(u)`
    pub fn potential(&self) -> f64 {
        0.5 * self.lap_u_sq + self.pi_d
    }
}

/// `E_pl` from the velocity norm and the static pieces.
pub fn plate_energy(ke: f64, s: &StaticEnergy) -> f64 {
    ke + s.potential()
}

/// Samples `(tau, Pi_*(u(tau)))` on the history grid.
#[derive(Clone, Debug, Default)]
pub struct PiSeries {
    samples: VecDeque<(f64, f64)>,
}

impl PiSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, pi: f64) {
        self.samples.push_back((t, pi));
    }

    /// Drops samples strictly older than `t_min`.
    pub fn evict_before(&mut self, t_min: f64) {
        while self.samples.len() > 1 && self.samples[0].0 < t_min {
            self.samples.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.iter()
    }

    /// `int_0^{t*} int_{t-s}^t Pi_*(tau) dtau ds = int_{t-t*}^t (tau - t + t*) Pi_*(tau) dtau`,
    /// by the trapezoid rule on the sample grid with the partial first cell
    /// interpolated linearly. `None` when the samples do not reach back to `t - t*`.
    pub fn memory_integral(&self, t: f64, t_star: f64) -> Option<f64> {
        let a = t - t_star;
        let first = self.samples.front()?;
        if first.0 > a + 1e-9 * t_star {
            return None;
        }
        let weight = |tau: f64, pi: f64| (tau - a) * pi;
        let mut acc = 0.0;
        for w in self.samples.iter().collect::<Vec<_>>().windows(2) {
            let (&(t0, p0), &(t1, p1)) = (w[0], w[1]);
            if t1 <= a || t0 >= t + 1e-12 {
                continue;
            }
            let (s0, q0) = if t0 < a {
                let th = (a - t0) / (t1 - t0);
                (a, p0 + th * (p1 - p0))
            } else {
                (t0, p0)
            };
            acc += 0.5 * (t1 - s0) * (weight(s0, q0) + weight(t1, p1));
        }
        Some(acc)
    }
}

/// Assembles the energy report at a state.
#[allow(clippy::too_many_arguments)]
pub fn energy_report(
    vk: &VonKarman,
    alpha: f64,
    k: f64,
    state: &PlateState,
    airy: &PlateField,
    pis: &PiSeries,
    t_star: f64,
    weights: &LyapunovWeights,
    diss_accum: f64,
    power_residual: f64,
) -> Result<EnergyReport> {
    let g = vk.grid();
    let ut2 = norm_l2alpha_sq(&state.v, alpha, g)?;
    let ke = 0.5 * ut2;
    let s = StaticEnergy::new(vk, &state.u, airy);
    let e_pl = plate_energy(ke, &s);
    let pi_star = s.pi_star();
    let v = pis.memory_integral(state.t, t_star).map(|mem| {
        let cross = inner_l2alpha(&state.v, &state.u, alpha, g).unwrap_or(0.0)
            + k * norm_l2alpha_sq(&state.u, alpha, g).unwrap_or(0.0);
        e_pl + weights.nu * cross + weights.mu * mem
    });
    Ok(EnergyReport {
        t: state.t,
        e_pl,
        e_star: ke + pi_star,
        pi_star,
        ke,
        ut_l2alpha: ut2.sqrt(),
        v,
        diss_accum,
        power_residual,
        u_center: center_value(&state.u, g),
    })
}

/// Displacement at the plate centre (bilinear between nodes for even counts).
pub fn center_value(u: &PlateField, g: &GridSpec) -> f64 {
    crate::grid::sample_bilinear(u, g, g.center())
}
