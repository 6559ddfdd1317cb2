//! Explicit super- and sub-solutions of the pressure equation and their
//! numerical validation.
//!
//! `Z = alpha (R(t) - phi)_+` is built on the radial potential
//! `phi(r, t) = (1/d) int_0^r s / m(s, t) ds`, which satisfies
//! `div(m grad phi) = 1`. `Pi = gamma^2 - r^2 e^{2Lt} |x - X(t)|^2` is
//! centered on a streamline.

use serde::{Deserialize, Serialize};

use crate::coefficients::{congestion_margin, FrameProvider, Profile};
use crate::error::{Error, Result};
use crate::grid::{self, erode, Geometry, Grid, ScalarField};
use crate::pressure::w_field;
use crate::solver::Trajectory;
use crate::streamlines::{integrate_streamline, Streamline, DT_ODE};

/// Safety factor on the sampled Lipschitz constant of `b`.
pub const LIPSCHITZ_INFLATION: f64 = 1.1;

/// Cells removed from the positivity set before residual evaluation.
pub const RESIDUAL_EROSION: usize = 3;

/// 5-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL5.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPhi {
    pub t: f64,
    pub dim: usize,
    pub m: Profile,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_t: Vec<f64>,
    /// `max |phi'|^2 / phi` over sampled `r > 0`.
    pub k_phi: f64,
    /// `max |phi_t| / phi` over sampled `r > 0`.
    pub m_phi: f64,
}

/// Composite trapezoid quadrature of `phi` and `phi_t` on `n` uniform nodes of `[0, r_max]`.
pub fn build_radial_phi(m: &Profile, dim: usize, t: f64, r_max: f64, n: usize) -> Result<RadialPhi> {
    if !(dim == 1 || dim == 2) || n < 2 || !(r_max > 0.0) {
        return Err(Error::InvalidConfig("radial potential needs dim 1 or 2, n >= 2 and r_max > 0".into()));
    }
    let d = dim as f64;
    let dr = r_max / (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|j| j as f64 * dr).collect();
    let g: Vec<f64> = r.iter().map(|&s| s / m.value(s, t)).collect();
    let gt: Vec<f64> = r
        .iter()
        .map(|&s| {
            let (j, _) = m.jet(s, t, 1e-4);
            -s * j.dt / (j.value * j.value)
        })
        .collect();
    let (mut phi, mut phi_t) = (vec![0.0; n], vec![0.0; n]);
    for j in 1..n {
        phi[j] = phi[j - 1] + 0.5 * dr * (g[j - 1] + g[j]) / d;
        phi_t[j] = phi_t[j - 1] + 0.5 * dr * (gt[j - 1] + gt[j]) / d;
    }
    let (mut k_phi, mut m_phi): (f64, f64) = (0.0, 0.0);
    for j in 1..n {
        let dphi = g[j] / d;
        k_phi = k_phi.max(dphi * dphi / phi[j]);
        m_phi = m_phi.max(phi_t[j].abs() / phi[j]);
    }
    Ok(RadialPhi { t, dim, m: m.clone(), r, phi, phi_t, k_phi, m_phi })
}

impl RadialPhi {
    /// `phi(r)` at this potential's time; node value plus a Gauss-Legendre
    /// integral to `r`.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        let dr = self.r[1];
        let j = ((r / dr).floor() as usize).min(self.r.len() - 1);
        let g = |s: f64| s / self.m.value(s, self.t);
        self.phi[j] + gauss(&g, self.r[j], r) / self.dim as f64
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("nodes")
    }

    /// Radius where `phi = level` (bisection; `r_max` if never reached).
    pub fn invert(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        if self.value(self.r_max()) <= level {
            return self.r_max();
        }
        let (mut a, mut b) = (0.0, self.r_max());
        for _ in 0..100 {
            let c = 0.5 * (a + b);
            if self.value(c) < level {
                a = c;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// Super-solution: dominates the pressure.
    Upper,
    /// Sub-solution: dominated by the pressure.
    Lower,
}

pub trait Barrier {
    fn value(&self, x: f64, t: f64) -> f64;
    fn sense(&self) -> Sense;

    fn sample(&self, grid: &Grid, t: f64) -> ScalarField {
        ScalarField::from_fn(*grid, t, |x| self.value(x, t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperBarrierZ {
    pub alpha: f64,
    pub gamma: f64,
    /// `|b|_inf^2 / 2`
    pub big_m: f64,
    /// Growth rate `3/2 alpha^2 K_phi + M_phi` of `R`.
    pub rate: f64,
    pub phi: RadialPhi,
}

/// Checks that `m` is even in `x` on the line.
fn check_even(m: &Profile, r_max: f64) -> Result<()> {
    for j in 0..=50 {
        let x = r_max * j as f64 / 50.0;
        for t in [0.0, 1.0] {
            let (a, b) = (m.value(x, t), m.value(-x, t));
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(Error::InvalidConfig("the radial potential needs m symmetric about the origin".into()));
            }
        }
    }
    Ok(())
}

/// Builds `phi` at `t = 0` covering the provider's grid.
pub fn phi_for(provider: &FrameProvider) -> Result<RadialPhi> {
    let g = provider.grid();
    let spec = provider.spec();
    let r_max = g.lo().abs().max(g.hi().abs());
    if g.geometry() == Geometry::Line {
        check_even(&spec.m, r_max)?;
    }
    build_radial_phi(&spec.m, g.dim(), 0.0, r_max, 20_001)
}

pub fn build_super_z(phi: &RadialPhi, alpha: f64, gamma: f64, b_sup: f64) -> Result<SuperBarrierZ> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidConfig(format!("Z needs gamma > 1, got {gamma}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("Z needs alpha > 0, got {alpha}")));
    }
    Ok(SuperBarrierZ {
        alpha,
        gamma,
        big_m: 0.5 * b_sup * b_sup,
        rate: 1.5 * alpha * alpha * phi.k_phi + phi.m_phi,
        phi: phi.clone(),
    })
}

impl SuperBarrierZ {
    pub fn big_r(&self, t: f64) -> f64 {
        (self.gamma + self.big_m) * (self.rate * t).exp() - self.big_m
    }

    /// `phi(r, t)` from the `t0` potential, using `m(r, t) = m(r, t0) s(t)/s(t0)`.
    pub fn phi_at(&self, x: f64, t: f64) -> f64 {
        let (s0, _) = self.phi.m.time_factor(self.phi.t);
        let (s, _) = self.phi.m.time_factor(t);
        self.phi.value(x) * s0 / s
    }

    /// Radius of `{Z > 0}` at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        let (s0, _) = self.phi.m.time_factor(self.phi.t);
        let (s, _) = self.phi.m.time_factor(t);
        self.phi.invert(self.big_r(t) * s / s0)
    }
}

impl Barrier for SuperBarrierZ {
    fn value(&self, x: f64, t: f64) -> f64 {
        self.alpha * (self.big_r(t) - self.phi_at(x, t)).max(0.0)
    }

    fn sense(&self) -> Sense {
        Sense::Upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubBarrierPi {
    pub gamma: f64,
    pub r_pi: f64,
    pub lipschitz: f64,
    pub x0: f64,
    pub path: Streamline,
}

/// Largest difference quotient of `b` between neighbouring cell centers
/// over the sampled times.
pub fn estimate_lipschitz(provider: &FrameProvider, times: &[f64]) -> Result<f64> {
    let g = provider.grid();
    let mut l: f64 = 0.0;
    for &t in times {
        let fr = provider.frame(t)?;
        for i in 1..g.n_cells() {
            l = l.max((fr.b.values[i] - fr.b.values[i - 1]).abs() / g.h());
        }
    }
    Ok(l)
}

/// `Pi` centered on the streamline from `x0`, with `L` sampled from `b` on
/// `[0, t_end]` and inflated by [`LIPSCHITZ_INFLATION`].
pub fn build_sub_pi(provider: &FrameProvider, gamma: f64, r_pi: f64, x0: f64, t_end: f64) -> Result<SubBarrierPi> {
    if !(gamma > 0.0 && gamma <= r_pi / 10.0) {
        return Err(Error::InvalidConfig(format!("Pi needs 0 < gamma <= r/10, got gamma = {gamma}, r = {r_pi}")));
    }
    let frame = provider.frame(0.0)?;
    let eps = congestion_margin(&frame, &vec![true; frame.m.values.len()]);
    if !(eps > 0.0) {
        return Err(Error::NotCongested { margin: eps });
    }
    let samples: Vec<f64> = (0..=10).map(|i| t_end * i as f64 / 10.0).collect();
    let lipschitz = LIPSCHITZ_INFLATION * estimate_lipschitz(provider, &samples)?;
    let spec = provider.spec();
    let b = |x: f64, t: f64| spec.b(x, t);
    let path = integrate_streamline(&b, spec.extent, x0, 0.0, t_end.max(0.0), DT_ODE)?;
    Ok(SubBarrierPi { gamma, r_pi, lipschitz, x0, path })
}

impl SubBarrierPi {
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn center(&self, t: f64) -> f64 {
        self.path.at(t).unwrap_or_else(|| self.path.end())
    }

    /// Radius of `{Pi > 0}`: `(gamma / r) e^{-Lt}`.
    pub fn radius(&self, t: f64) -> f64 {
        self.gamma / self.r_pi * (-self.lipschitz * t).exp()
    }
}

impl Barrier for SubBarrierPi {
    fn value(&self, x: f64, t: f64) -> f64 {
        let y = x - self.center(t);
        self.gamma * self.gamma - self.r_pi * self.r_pi * (2.0 * self.lipschitz * t).exp() * y * y
    }

    fn sense(&self) -> Sense {
        Sense::Lower
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub sense: Sense,
    pub k: f64,
    pub times: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Largest per-cell tolerance `10 h^2 scale_i + 1e-8`, where `scale_i`
    /// is the largest term of the residual in that cell.
    pub tol: f64,
    /// Smallest per-cell slack (`res + tol_i` for upper barriers,
    /// `tol_i - res` for lower ones); the check passes when nonnegative.
    pub margin: f64,
    pub cells: usize,
    pub pass: bool,
}

/// Signed residual `d_t B - |grad B|^2 - grad B . b - (k-1) B (w_B + F)`
/// on the eroded positivity set of `B` (or on `region` when given, which
/// must lie inside it). Derivatives are grid stencils; the time derivative
/// is a central difference.
pub fn barrier_residual(barrier: &dyn Barrier, provider: &FrameProvider, k: f64, times: &[f64], region: Option<&[bool]>) -> Result<ResidualStats> {
    let g = *provider.grid();
    let h = g.h();
    let mut st = ResidualStats {
        sense: barrier.sense(),
        k,
        times: times.to_vec(),
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        tol: 0.0,
        margin: f64::INFINITY,
        cells: 0,
        pass: true,
    };
    for &t in times {
        let frame = provider.frame(t)?;
        let b_now = barrier.sample(&g, t);
        let pos: Vec<bool> = b_now.values.iter().map(|&v| v > 0.0).collect();
        let interior = erode(&g, &pos, RESIDUAL_EROSION);
        let mask: Vec<bool> = match region {
            Some(r) => {
                if r.iter().zip(&interior).any(|(&r, &i)| r && !i) {
                    return Err(Error::RegionOutsidePositivity);
                }
                r.to_vec()
            }
            None => interior,
        };
        if !mask.iter().any(|&b| b) {
            return Err(Error::RegionOutsidePositivity);
        }
        let dt = 1e-4 * (1.0 + t);
        let t_lo = (t - dt).max(0.0);
        let t_hi = t + dt;
        let b_lo = barrier.sample(&g, t_lo);
        let b_hi = barrier.sample(&g, t_hi);
        let grad = grid::grad(&b_now);
        let w = w_field(&b_now, &frame.m);
        for i in (0..g.n_cells()).filter(|&i| mask[i]) {
            let bt = (b_hi.values[i] - b_lo.values[i]) / (t_hi - t_lo);
            let gb = grad.values[i];
            let reaction = (k - 1.0) * b_now.values[i] * (w.values[i] + frame.big_f.values[i]);
            let res = bt - gb * gb - gb * frame.b.values[i] - reaction;
            let scale = bt.abs().max(gb * gb).max((gb * frame.b.values[i]).abs()).max(reaction.abs());
            let tol = 10.0 * h * h * scale + 1e-8;
            let slack = match st.sense {
                Sense::Upper => res + tol,
                Sense::Lower => tol - res,
            };
            st.tol = st.tol.max(tol);
            st.margin = st.margin.min(slack);
            st.min = st.min.min(res);
            st.max = st.max.max(res);
            st.cells += 1;
        }
    }
    st.pass = st.margin >= 0.0;
    Ok(st)
}

/// Smallest `alpha = 2^j`, `j = 0..=30`, for which `build(alpha)` passes the
/// residual test at every `k` in `ks`.
pub fn fit_alpha(build: &dyn Fn(f64) -> Result<SuperBarrierZ>, provider: &FrameProvider, ks: &[f64], times: &[f64]) -> Result<f64> {
    for j in 0..=30 {
        let alpha = 2f64.powi(j);
        let z = build(alpha)?;
        let mut ok = true;
        for &k in ks {
            if !barrier_residual(&z, provider, k, times, None)?.pass {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(alpha);
        }
    }
    Err(Error::Validation("no alpha up to 2^30 makes Z a super-solution".into()))
}

/// `max (p - B)` (upper) or `max (B_+ - p)` (lower) over snapshots and cells.
/// The ordering must already hold at the first snapshot.
pub fn comparison_vs_solver(barrier: &dyn Barrier, traj: &Trajectory, tol: f64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (n, s) in traj.snapshots.iter().enumerate() {
        let g = s.grid();
        let mut v = f64::NEG_INFINITY;
        for i in 0..g.n_cells() {
            let b = barrier.value(g.center(i), s.t);
            let d = match barrier.sense() {
                Sense::Upper => s.p.values[i] - b,
                Sense::Lower => b.max(0.0) - s.p.values[i],
            };
            v = v.max(d);
        }
        if n == 0 && v > tol {
            return Err(Error::InitialOrderingFails { violation: v });
        }
        worst = worst.max(v);
    }
    Ok(worst.max(0.0))
}

/// Barrier profile CSV with columns `x,value,t`.
pub fn barrier_csv(barrier: &dyn Barrier, grid: &Grid, times: &[f64]) -> String {
    let mut s = String::from("x,value,t\n");
    for &t in times {
        for x in grid.centers() {
            s.push_str(&format!("{},{},{}\n", grid::fmt_f64(x), grid::fmt_f64(barrier.value(x, t)), grid::fmt_f64(t)));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSpec;

    fn provider(m: Profile, b: Profile, f: Profile, grid: &Grid) -> FrameProvider {
        FrameProvider::new(&CoefficientSpec::new(m, b, f, 1e-3, grid).unwrap(), grid).unwrap()
    }

    #[test]
    fn phi_closed_forms() {
        let one = Profile::constant(1.0);
        let p = build_radial_phi(&one, 1, 0.0, 2.0, 201).unwrap();
        for (r, v) in p.r.iter().zip(&p.phi) {
            assert!((v - r * r / 2.0).abs() < 1e-13);
        }
        assert!((p.k_phi - 2.0).abs() < 1e-12);
        assert_eq!(p.m_phi, 0.0);
        let p = build_radial_phi(&one, 2, 0.0, 2.0, 201).unwrap();
        assert!((p.value(1.3) - 1.3 * 1.3 / 4.0).abs() < 1e-13);
        let gauss = Profile::GaussDecay { amp: 1.0, ax: 0.1, at: 0.0, center: 0.0 };
        let p = build_radial_phi(&gauss, 1, 0.0, 1.0, 2001).unwrap();
        let exact = 5.0 * (0.1f64.exp() - 1.0);
        assert!((p.phi.last().unwrap() - exact).abs() < 1e-7);
        assert!((p.value(1.0) - exact).abs() < 1e-7);
    }

    #[test]
    fn phi_quadrature_is_second_order() {
        let gauss = Profile::GaussDecay { amp: 1.0, ax: 0.5, at: 0.0, center: 0.0 };
        let exact = (0.5f64 * 4.0).exp_m1() / (2.0 * 0.5);
        let err = |n| (build_radial_phi(&gauss, 1, 0.0, 2.0, n).unwrap().phi.last().unwrap() - exact).abs();
        assert!(err(101) / err(201) >= 3.5);
    }

    #[test]
    fn z_examples() {
        let g = Grid::line(-4.0, 4.0, 400).unwrap();
        let pr = provider(Profile::constant(1.0), Profile::constant(0.0), Profile::constant(0.0), &g);
        let phi = phi_for(&pr).unwrap();
        let z = build_super_z(&phi, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(z.big_r(0.0), 2.0);
        assert!((z.support_radius(0.0) - 2.0).abs() < 1e-9);
        assert!(z.value(1.99, 0.0) > 0.0 && z.value(2.01, 0.0) == 0.0);
        assert!(z.value(1.0, 0.0) >= 1.0 - 1e-12);
        for t in [0.1, 0.3] {
            assert!((z.support_radius(t) - (2.0 * z.big_r(t)).sqrt()).abs() < 1e-8);
        }
        let st = barrier_residual(&z, &pr, 40.0, &[0.05, 0.2], None).unwrap();
        assert!(st.pass, "{st:?}");
        assert!(build_super_z(&phi, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn pi_examples() {
        let g = Grid::line(-2.0, 2.0, 400).unwrap();
        let pr = provider(Profile::constant(1.0), Profile::constant(0.0), Profile::constant(1.0), &g);
        let pi = build_sub_pi(&pr, 0.1, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(pi.lipschitz, 0.0);
        for t in [0.0, 0.5, 1.0] {
            assert!((pi.value(0.0, t) - 0.01).abs() < 1e-15);
            assert!((pi.value(0.3, t) - (0.01 - 0.09)).abs() < 1e-15);
        }
        assert!((pi.radius(0.0) - 0.1).abs() < 1e-15);

        let lin = provider(Profile::constant(1.0), Profile::Linear { offset: 0.0, slope: 1.0 }, Profile::constant(0.0), &g);
        let pi = build_sub_pi(&lin, 0.1, 1.0, 0.5, 1.0).unwrap();
        assert!((pi.lipschitz - 1.1).abs() < 1e-12);
        let pi = pi.with_lipschitz(1.0);
        assert!((pi.radius(1.0) - 0.1 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((pi.center(1.0) - 0.5 * (-1.0f64).exp()).abs() < 1e-9);

        let flat = provider(Profile::constant(1.0), Profile::constant(0.0), Profile::constant(0.0), &g);
        assert!(matches!(build_sub_pi(&flat, 0.1, 1.0, 0.0, 1.0), Err(Error::NotCongested { .. })));
        assert!(build_sub_pi(&pr, 0.2, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn residual_guards() {
        let g = Grid::line(-2.0, 2.0, 200).unwrap();
        let pr = provider(Profile::constant(1.0), Profile::constant(0.0), Profile::constant(1.0), &g);
        let pi = build_sub_pi(&pr, 0.05, 0.5, 0.0, 1.0).unwrap();
        let far: Vec<bool> = (0..200).map(|i| i == 10).collect();
        assert!(matches!(barrier_residual(&pi, &pr, 10.0, &[0.1], Some(&far)), Err(Error::RegionOutsidePositivity)));
    }
}
