//! The odd Jacobi theta function and the two derived kernels used everywhere
//! else: `rho(u) = theta1'(u)/theta1(u)` and the elliptic Cauchy kernel
//! `s(u; lambda) = theta1(u - lambda) theta1'(0) / (theta1(u) theta1(-lambda))`.
//!
//! All evaluations lattice-reduce the argument into the fundamental cell
//! before summing the q-series and restore the exact quasi-periodicity
//! multipliers afterwards, so the series only ever runs at a reduced argument.

use crate::error::{Error, Result};
use crate::{pi_i, two_pi_i, Cx};

/// Default series tolerance: the double-precision floor.
pub const DEFAULT_TOL: f64 = 1e-14;

/// Below this distance to the singular set, `rho` and `s` lose more than half
/// the significant digits in double precision.
pub const SINGULAR_DIST: f64 = 1e-8;

/// Hard cap on q-series terms; hitting it signals pathological `tau`.
const MAX_TERMS: usize = 200;

/// The modular parameter `tau` of the torus, constrained to the upper half
/// plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularParam {
    tau: Cx,
}

impl ModularParam {
    pub fn new(tau: Cx) -> Result<Self> {
        if tau.im > 0.0 {
            Ok(Self { tau })
        } else {
            Err(Error::InvalidTau { im: tau.im })
        }
    }

    pub fn tau(&self) -> Cx {
        self.tau
    }
}

/// Decomposition `u = u0 + l + m*tau` with the real coefficients `(x, y)` of
/// `u0 = x + y*tau` lying in `[0, 1)^2`.
#[derive(Debug, Clone, Copy)]
pub struct LatticeReduction {
    pub u0: Cx,
    pub l: i64,
    pub m: i64,
}

pub fn lattice_reduce(u: Cx, tau: &ModularParam) -> LatticeReduction {
    let t = tau.tau();
    // Solve u = x + y*tau for real x, y.
    let y = u.im / t.im;
    let x = u.re - y * t.re;
    let m = y.floor() as i64;
    let l = x.floor() as i64;
    let u0 = Cx::new(x - l as f64, 0.0) + (y - m as f64) * t;
    LatticeReduction { u0, l, m }
}

/// Euclidean distance from `u` to the lattice `Z + Z*tau`.
pub fn dist_to_lattice(u: Cx, tau: &ModularParam) -> f64 {
    let t = tau.tau();
    let r = lattice_reduce(u, tau);
    let corners = [Cx::new(0.0, 0.0), Cx::new(1.0, 0.0), t, t + 1.0];
    corners
        .iter()
        .map(|c| (r.u0 - c).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Sums the reduced series
/// `theta1(u) = 2 sum_{m>=0} (-1)^m q^{(m+1/2)^2} sin((2m+1) pi u)`,
/// `q = e^{pi i tau}`, together with its term-wise u-derivative.
///
/// Stops when two consecutive terms fall below `tol * max(1, |partial|)`.
fn theta1_series(u0: Cx, tau: &ModularParam, tol: f64) -> Result<(Cx, Cx)> {
    debug_assert!(tol > 0.0);
    let t = tau.tau();
    let pi = std::f64::consts::PI;
    let mut sum = Cx::new(0.0, 0.0);
    let mut dsum = Cx::new(0.0, 0.0);
    let mut small_run = 0usize;
    for m in 0..MAX_TERMS {
        let mf = m as f64;
        let half = mf + 0.5;
        // q^{(m+1/2)^2} = exp(pi i tau (m+1/2)^2)
        let qpow = (pi_i() * t * (half * half)).exp();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let arg = (2.0 * mf + 1.0) * pi * u0;
        let term = 2.0 * sign * qpow * arg.sin();
        let dterm = 2.0 * sign * qpow * (2.0 * mf + 1.0) * pi * arg.cos();
        sum += term;
        dsum += dterm;
        let scale = sum.norm().max(1.0);
        if term.norm().max(dterm.norm() / ((2.0 * mf + 3.0) * pi)) < tol * scale {
            small_run += 1;
            if small_run >= 2 && m >= 2 {
                return Ok((sum, dsum));
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence {
        max_terms: MAX_TERMS,
    })
}

/// Quasi-periodicity multiplier:
/// `theta1(u0 + l + m*tau) = (-1)^{l+m} e^{-pi i (m^2 tau + 2 m u0)} theta1(u0)`.
fn lattice_multiplier(r: &LatticeReduction, tau: &ModularParam) -> Cx {
    let t = tau.tau();
    let m = r.m as f64;
    let sign = if (r.l + r.m).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    sign * (-pi_i() * (m * m * t + 2.0 * m * r.u0)).exp()
}

/// `theta1(u, tau)`, truncated so the first omitted term has magnitude below
/// `tol * max(1, |partial sum|)`.
pub fn theta1(u: Cx, tau: &ModularParam, tol: f64) -> Result<Cx> {
    let r = lattice_reduce(u, tau);
    let (v, _) = theta1_series(r.u0, tau, tol)?;
    Ok(lattice_multiplier(&r, tau) * v)
}

/// `theta1'(u)`, by term-wise differentiation of the series (never a finite
/// difference).
pub fn theta1_d1(u: Cx, tau: &ModularParam, tol: f64) -> Result<Cx> {
    let r = lattice_reduce(u, tau);
    let (v, dv) = theta1_series(r.u0, tau, tol)?;
    // d/du [ f(u) theta1(u0(u)) ] with f the multiplier and u0 = u - l - m*tau:
    // f' = -2 pi i m f.
    let f = lattice_multiplier(&r, tau);
    Ok(f * (dv - two_pi_i() * (r.m as f64) * v))
}

/// `theta1'(0)`.
pub fn theta1_d1_zero(tau: &ModularParam, tol: f64) -> Result<Cx> {
    let (_, dv) = theta1_series(Cx::new(0.0, 0.0), tau, tol)?;
    Ok(dv)
}

fn require_off_lattice(u: Cx, tau: &ModularParam, what: &str) -> Result<()> {
    let d = dist_to_lattice(u, tau);
    if d <= SINGULAR_DIST {
        Err(Error::NearSingular {
            what: what.to_string(),
            dist: d,
        })
    } else {
        Ok(())
    }
}

/// `rho(u) = theta1'(u)/theta1(u)`; period 1 in `u`, drops by `2 pi i` under
/// `u -> u + tau`.
pub fn rho(u: Cx, tau: &ModularParam, tol: f64) -> Result<Cx> {
    require_off_lattice(u, tau, "rho: u")?;
    let r = lattice_reduce(u, tau);
    let (v, dv) = theta1_series(r.u0, tau, tol)?;
    Ok(dv / v - two_pi_i() * (r.m as f64))
}

/// The elliptic Cauchy kernel
/// `s(u; lambda) = theta1(u - lambda) theta1'(0) / (theta1(u) theta1(-lambda))`.
///
/// Simple pole of residue 1 at `u = 0`; `s(u+1) = s(u)` and
/// `s(u+tau) = e^{2 pi i lambda} s(u)`.
pub fn s_func(u: Cx, lambda: Cx, tau: &ModularParam, tol: f64) -> Result<Cx> {
    require_off_lattice(u, tau, "s: u")?;
    require_off_lattice(lambda, tau, "s: lambda")?;
    // Reduce u first and apply the exact multiplier e^{2 pi i m lambda}, so
    // the theta arguments below never carry large lattice shifts.
    let r = lattice_reduce(u, tau);
    let mult = (two_pi_i() * (r.m as f64) * lambda).exp();
    let c = s_const(lambda, tau, tol)?;
    Ok(mult * c * theta1(r.u0 - lambda, tau, tol)? / theta1(r.u0, tau, tol)?)
}

/// The `u`-independent factor `theta1'(0) / theta1(-lambda)` of `s`, cached
/// per `(lambda, tau, tol)` because integration sweeps `u` at fixed `lambda`.
fn s_const(lambda: Cx, tau: &ModularParam, tol: f64) -> Result<Cx> {
    thread_local! {
        static CACHE: std::cell::RefCell<Vec<([u64; 5], Cx)>> =
            const { std::cell::RefCell::new(Vec::new()) };
    }
    let t = tau.tau();
    let key = [
        lambda.re.to_bits(),
        lambda.im.to_bits(),
        t.re.to_bits(),
        t.im.to_bits(),
        tol.to_bits(),
    ];
    if let Some(v) = CACHE.with(|c| {
        c.borrow().iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }) {
        return Ok(v);
    }
    let v = theta1_d1_zero(tau, tol)? / theta1(-lambda, tau, tol)?;
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= 64 {
            c.clear();
        }
        c.push((key, v));
    });
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau_i() -> ModularParam {
        ModularParam::new(Cx::new(0.0, 1.0)).unwrap()
    }

    /// Independent oracle: the bilateral series of the definition,
    /// `theta1(u) = -sum_{m=-30}^{30} exp(pi i (m+1/2)^2 tau + 2 pi i (m+1/2)(u+1/2))`,
    /// summed directly without lattice reduction.
    fn theta1_oracle(u: Cx, tau: Cx) -> Cx {
        let mut sum = Cx::new(0.0, 0.0);
        for m in -30i64..=30 {
            let half = m as f64 + 0.5;
            sum += (pi_i() * half * half * tau + two_pi_i() * half * (u + 0.5)).exp();
        }
        -sum
    }

    #[test]
    fn modular_param_rejects_lower_half_plane() {
        assert!(ModularParam::new(Cx::new(0.3, -0.2)).is_err());
        assert!(ModularParam::new(Cx::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn lattice_reduce_examples() {
        let tau = tau_i();
        let r = lattice_reduce(Cx::new(0.0, 0.0), &tau);
        assert_eq!((r.l, r.m), (0, 0));
        assert!(r.u0.norm() < 1e-14);

        let r = lattice_reduce(Cx::new(2.0, 3.0), &tau);
        assert_eq!((r.l, r.m), (2, 3));
        assert!(r.u0.norm() < 1e-14);

        let r = lattice_reduce(Cx::new(0.3, 1.7), &tau);
        assert_eq!((r.l, r.m), (0, 1));
        assert!((r.u0 - Cx::new(0.3, 0.7)).norm() < 1e-14);
    }

    #[test]
    fn lattice_reduce_reproduces_input() {
        let tau = ModularParam::new(Cx::new(0.3, 1.2)).unwrap();
        for &u in &[
            Cx::new(-3.7, 2.9),
            Cx::new(17.2, -11.3),
            Cx::new(0.001, 0.002),
        ] {
            let r = lattice_reduce(u, &tau);
            let back = r.u0 + r.l as f64 + (r.m as f64) * tau.tau();
            assert!((back - u).norm() <= 1e-14 * u.norm().max(1.0));
        }
    }

    #[test]
    fn theta1_zero_and_odd() {
        let tau = tau_i();
        assert!(theta1(Cx::new(0.0, 0.0), &tau, DEFAULT_TOL).unwrap().norm() < 1e-14);
        let u = Cx::new(0.23, 0.11);
        let a = theta1(u, &tau, DEFAULT_TOL).unwrap();
        let b = theta1(-u, &tau, DEFAULT_TOL).unwrap();
        assert!((a + b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn theta1_matches_direct_summation_oracle() {
        let tau = tau_i();
        // Frozen from the 30-term oracle below.
        let v = theta1(Cx::new(0.5, 0.0), &tau, DEFAULT_TOL).unwrap();
        let o = theta1_oracle(Cx::new(0.5, 0.0), tau.tau());
        assert!((v - o).norm() < 1e-13 * o.norm());

        for &u in &[Cx::new(0.13, 0.41), Cx::new(-1.7, 2.3), Cx::new(0.9, 0.95)] {
            let v = theta1(u, &tau, DEFAULT_TOL).unwrap();
            let o = theta1_oracle(u, tau.tau());
            assert!(
                (v - o).norm() < 1e-11 * o.norm(),
                "u = {u}, v = {v}, oracle = {o}"
            );
        }
    }

    #[test]
    fn theta1_d1_even_and_nonzero_at_origin() {
        let tau = tau_i();
        let d0 = theta1_d1(Cx::new(0.0, 0.0), &tau, DEFAULT_TOL).unwrap();
        assert!(d0.norm() > 1.0);
        let u = Cx::new(0.31, 0.22);
        let a = theta1_d1(u, &tau, DEFAULT_TOL).unwrap();
        let b = theta1_d1(-u, &tau, DEFAULT_TOL).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn theta1_d1_matches_finite_difference() {
        let tau = ModularParam::new(Cx::new(0.3, 1.2)).unwrap();
        let h = 1e-6;
        for &u in &[Cx::new(0.21, 0.37), Cx::new(1.4, -0.8)] {
            let d = theta1_d1(u, &tau, DEFAULT_TOL).unwrap();
            let fd = (theta1(u + h, &tau, DEFAULT_TOL).unwrap()
                - theta1(u - h, &tau, DEFAULT_TOL).unwrap())
                / (2.0 * h);
            assert!((d - fd).norm() < 1e-8 * d.norm().max(1.0));
        }
    }

    #[test]
    fn rho_special_values() {
        let tau = tau_i();
        let t = tau.tau();
        // rho(1/2) = 0
        assert!(rho(Cx::new(0.5, 0.0), &tau, DEFAULT_TOL).unwrap().norm() < 1e-12);
        // rho(tau/2) = rho((tau+1)/2) = -pi i
        let want = -pi_i();
        let a = rho(t / 2.0, &tau, DEFAULT_TOL).unwrap();
        let b = rho((t + 1.0) / 2.0, &tau, DEFAULT_TOL).unwrap();
        assert!((a - want).norm() < 1e-12);
        assert!((b - want).norm() < 1e-12);
    }

    #[test]
    fn rho_is_odd() {
        let tau = tau_i();
        let u = Cx::new(0.37, 0.18);
        let a = rho(u, &tau, DEFAULT_TOL).unwrap();
        let b = rho(-u, &tau, DEFAULT_TOL).unwrap();
        assert!((a + b).norm() < 1e-11 * a.norm().max(1.0));
    }

    #[test]
    fn rho_near_lattice_errors() {
        let tau = tau_i();
        let e = rho(Cx::new(1.0, 1e-10), &tau, DEFAULT_TOL);
        assert!(matches!(e, Err(Error::NearSingular { .. })));
    }

    #[test]
    fn s_residue_one_at_origin() {
        let tau = tau_i();
        let lam = Cx::new(0.31, 0.17);
        let u = Cx::new(1e-5, 0.0);
        let v = u * s_func(u, lam, &tau, DEFAULT_TOL).unwrap();
        assert!((v - 1.0).norm() < 1e-3);
    }

    #[test]
    fn s_quasi_periodicity() {
        let tau = tau_i();
        let lam = Cx::new(0.31, 0.17);
        let u = Cx::new(0.27, 0.41);
        let s0 = s_func(u, lam, &tau, DEFAULT_TOL).unwrap();
        let s1 = s_func(u + 1.0, lam, &tau, DEFAULT_TOL).unwrap();
        assert!((s1 - s0).norm() < 1e-11 * s0.norm());
        let st = s_func(u + tau.tau(), lam, &tau, DEFAULT_TOL).unwrap();
        let want = (two_pi_i() * lam).exp() * s0;
        assert!((st - want).norm() < 1e-11 * want.norm());
    }

    #[test]
    fn s_near_singular_tags_argument() {
        let tau = tau_i();
        let lam = Cx::new(0.31, 0.17);
        match s_func(Cx::new(1e-10, 0.0), lam, &tau, DEFAULT_TOL) {
            Err(Error::NearSingular { what, .. }) => assert!(what.contains("u")),
            other => panic!("expected NearSingular, got {other:?}"),
        }
        match s_func(Cx::new(0.3, 0.2), Cx::new(2.0, 1e-12), &tau, DEFAULT_TOL) {
            Err(Error::NearSingular { what, .. }) => assert!(what.contains("lambda")),
            other => panic!("expected NearSingular, got {other:?}"),
        }
    }
}
