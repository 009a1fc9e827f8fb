//! Executable residual checks for the function identities behind the
//! connection matrices, plus the period multipliers of `T`.
//!
//! Every check evaluates both sides of one identity at concrete points and
//! reports `|LHS - RHS| / max(1, |LHS|)`. Samplers draw from the fundamental
//! cell and reject points within [`SAMPLE_MARGIN`] of the singular loci, so a
//! passing run never hits a near-singular evaluation.

use crate::config::{half_period, ProblemConfig, Sign};
use crate::elliptic::{dist_to_lattice, rho, s_func, ModularParam, DEFAULT_TOL};
use crate::error::Result;
use crate::forms::{g_col_pm, g_corner, g_point, g_row_pm, residue_matrix_from_ell};
use crate::integrator::{t_factors, BranchState};
use crate::{pi_i, two_pi_i, Cx};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// A passing check stays below this relative residual.
pub const REL_TOL: f64 = 1e-9;

/// Rejection-sampling distance from every singular locus.
pub const SAMPLE_MARGIN: f64 = 1e-3;

/// Wider clearance for finite-difference checks, where the truncation error
/// grows like a high inverse power of the pole distance.
pub const DERIV_MARGIN: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct IdentityResult {
    pub id: String,
    pub samples: usize,
    pub max_residual: f64,
}

impl IdentityResult {
    pub fn pass(&self) -> bool {
        self.max_residual < REL_TOL
    }
}

fn rel(lhs: Cx, rhs: Cx) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(1.0)
}

/// `s(w-t_k)(rho(w-t_j)+rho(t_j-t_k)-rho(w-t_k-lambda)-rho(lambda))
///  = s(w-t_j) s(t_j-t_k)`, all at twist `lambda`.
pub fn check_mano_38(w: Cx, tj: Cx, tk: Cx, lambda: Cx, tau: &ModularParam) -> Result<f64> {
    let s = |u: Cx| s_func(u, lambda, tau, DEFAULT_TOL);
    let r = |u: Cx| rho(u, tau, DEFAULT_TOL);
    let lhs = s(w - tk)? * (r(w - tj)? + r(tj - tk)? - r(w - tk - lambda)? - r(lambda)?);
    let rhs = s(w - tj)? * s(tj - tk)?;
    Ok(rel(lhs, rhs))
}

/// The `n`-point partial-fraction identity; requires `sum c = 0`.
pub fn check_mano_39(
    w: Cx,
    ts: &[Cx],
    cs: &[Cx],
    j: usize,
    lambda: Cx,
    tau: &ModularParam,
) -> Result<f64> {
    assert_eq!(ts.len(), cs.len());
    let total: Cx = cs.iter().sum();
    assert!(total.norm() < 1e-12, "exponents must sum to zero");
    let s = |u: Cx| s_func(u, lambda, tau, DEFAULT_TOL);
    let r = |u: Cx| rho(u, tau, DEFAULT_TOL);
    let mut inner = cs[j] * (r(w - ts[j] - lambda)? + r(lambda)?);
    let mut rhs = Cx::new(0.0, 0.0);
    for k in 0..ts.len() {
        if k == j {
            continue;
        }
        inner += cs[k] * (r(w - ts[k])? + r(ts[k] - ts[j])?);
        rhs += cs[k] * s(ts[k] - ts[j])? * s(w - ts[k])?;
    }
    let lhs = s(w - ts[j])? * inner;
    Ok(rel(lhs, rhs))
}

/// `rho(w_m + t) + rho(w_m - t) = 2 varpi_m` for the nonzero half periods.
pub fn check_rho_mirror(m: usize, t: Cx, tau: &ModularParam) -> Result<f64> {
    assert!((2..=4).contains(&m), "m must be in 2..=4, got {m}");
    let w = half_period(tau, m);
    let varpi = if m == 2 {
        Cx::new(0.0, 0.0)
    } else {
        -pi_i()
    };
    let lhs = rho(w + t, tau, DEFAULT_TOL)? + rho(w - t, tau, DEFAULT_TOL)?;
    Ok(rel(lhs, 2.0 * varpi))
}

/// `rho(u+1) = rho(u)` and `rho(u+tau) = rho(u) - 2 pi i`.
pub fn check_rho_period(u: Cx, tau: &ModularParam) -> Result<f64> {
    let r0 = rho(u, tau, DEFAULT_TOL)?;
    let a = rel(rho(u + 1.0, tau, DEFAULT_TOL)?, r0);
    let b = rel(rho(u + tau.tau(), tau, DEFAULT_TOL)?, r0 - two_pi_i());
    Ok(a.max(b))
}

/// `rho(1/2) = 0`, `rho(tau/2) = rho((tau+1)/2) = -pi i`.
pub fn check_rho_half_periods(tau: &ModularParam) -> Result<f64> {
    let mut worst = 0.0f64;
    for m in 2..=4 {
        let varpi = if m == 2 { Cx::new(0.0, 0.0) } else { -pi_i() };
        worst = worst.max(rel(rho(half_period(tau, m), tau, DEFAULT_TOL)?, varpi));
    }
    Ok(worst)
}

/// `s(-u; lambda) = -s(u; -lambda)`.
pub fn check_s_reflection(u: Cx, lambda: Cx, tau: &ModularParam) -> Result<f64> {
    let lhs = s_func(-u, lambda, tau, DEFAULT_TOL)?;
    let rhs = -s_func(u, -lambda, tau, DEFAULT_TOL)?;
    Ok(rel(lhs, rhs))
}

/// `d/du s = (rho(u-lambda) - rho(u)) s` and
/// `d/dlambda s = -(rho(u-lambda) + rho(lambda)) s`, both against a
/// five-point stencil.
///
/// The stencil is only accurate to 1e-9 when `u`, `u - lambda` and `lambda`
/// keep a distance of order [`DERIV_MARGIN`] from the poles, so callers must
/// sample with that wider clearance.
pub fn check_s_derivatives(u: Cx, lambda: Cx, tau: &ModularParam) -> Result<f64> {
    let h = 1e-4;
    let stencil = |f: &dyn Fn(f64) -> Result<Cx>| -> Result<Cx> {
        Ok((f(-2.0 * h)? - 8.0 * f(-h)? + 8.0 * f(h)? - f(2.0 * h)?) / (12.0 * h))
    };
    let s0 = s_func(u, lambda, tau, DEFAULT_TOL)?;
    let du = stencil(&|d| s_func(u + d, lambda, tau, DEFAULT_TOL))?;
    let dl = stencil(&|d| s_func(u, lambda + d, tau, DEFAULT_TOL))?;
    let ru = rho(u, tau, DEFAULT_TOL)?;
    let rul = rho(u - lambda, tau, DEFAULT_TOL)?;
    let rl = rho(lambda, tau, DEFAULT_TOL)?;
    let a = rel(du, (rul - ru) * s0);
    let b = rel(dl, -(rul + rl) * s0);
    Ok(a.max(b))
}

/// The three-term `s`-product relation.
pub fn check_frv(u: Cx, s_: Cx, t: Cx, l1: Cx, l2: Cx, tau: &ModularParam) -> Result<f64> {
    let sf = |a: Cx, l: Cx| s_func(a, l, tau, DEFAULT_TOL);
    let lhs = sf(t - u, l1 + l2)? * sf(s_ - t, l2)? - sf(s_ - u, l2)? * sf(t - u, l1)?;
    let rhs = -sf(t - s_, l1)? * sf(s_ - u, l1 + l2)?;
    Ok(rel(lhs, rhs))
}

/// Three-term rearrangement used to reduce the `psi_{+-j}` couplings.
pub fn check_psi_pmj(
    sign: Sign,
    u1: Cx,
    u2: Cx,
    t1p: Cx,
    t2j: Cx,
    l1: Cx,
    l2: Cx,
    tau: &ModularParam,
) -> Result<f64> {
    let sg = sign.factor();
    let sf = |a: Cx, l: Cx| s_func(a, l, tau, DEFAULT_TOL);
    let l2m1 = l2 - sg * l1;
    let lhs = sf(-sg * t1p - t2j, l2m1)? * sf(u2 + sg * t1p, l2m1)? * sf(u1 + sg * u2, l1)?
        - sf(u1 - t1p, l1)? * sf(u2 + sg * t1p, sg * l1)? * sf(u2 - t2j, l2m1)?;
    let rhs = -sf(t2j + sg * t1p, sg * l1)? * sf(u1 - t1p, l1)? * sf(u2 - t2j, l2)?
        - sg * sf(-sg * t1p - t2j, l2m1)?
            * sf(u1 - t1p, l1 - sg * l2)?
            * sf(u1 + sg * u2, sg * l2)?;
    Ok(rel(lhs, rhs))
}

/// The corner reduction `G_m` against its displayed `g`-combination,
/// including the `e^{-2 pi i u1}` and `e^{-2 pi i t1p}` prefactors for
/// `m = 3, 4`.
pub fn check_g_display(cfg: &ProblemConfig, m: usize, p: usize, u1: Cx, u2: Cx) -> Result<f64> {
    assert!((1..=4).contains(&m), "m must be in 1..=4, got {m}");
    let tau = &cfg.tau;
    let (l1, l2) = cfg.lambda();
    let t = cfg.t(1, p);
    let w = cfg.half_period(m);
    let varpi = cfg.varpi(m);
    let sf = |a: Cx, l: Cx| s_func(a, l, tau, DEFAULT_TOL);
    let rv = |a: Cx| rho(a, tau, DEFAULT_TOL);
    let hp = 0.5 * (l1 + l2) + w;
    let hm = 0.5 * (l1 - l2) + w;
    let g = -sf(u1 - w, hp)? * sf(w + u2, hp)? * sf(u1 - u2, hm)?
        - sf(u1 - w, hm)? * sf(w - u2, hm)? * sf(u1 + u2, hp)?
        + 2.0 * (rv(u1 - w)? + varpi - rv(u1 - t)?) * sf(u1 + u2, hp)? * sf(u1 - u2, hm)?;
    let lhs = if m <= 2 {
        g
    } else {
        (-two_pi_i() * u1).exp() * g
    };
    let pref = if m <= 2 {
        Cx::new(1.0, 0.0)
    } else {
        (-two_pi_i() * t).exp()
    };
    let shift = w - half_period(tau, 1);
    let ell = (pi_i() * (l1 + l2)).exp();
    // Signs of the ell-coefficients on the four corner forms per row m.
    let (s2, s3, s4) = match m {
        1 => (-1.0, -1.0, -1.0),
        2 => (-1.0, 1.0, 1.0),
        3 => (1.0, -1.0, 1.0),
        4 => (1.0, 1.0, -1.0),
        _ => unreachable!(),
    };
    let half = Cx::new(0.5, 0.0);
    let htau = 0.5 * tau.tau();
    let rhs = -2.0 * pref * sf(2.0 * t, 0.5 * (l1 - l2) + shift)? * g_row_pm(cfg, p, Sign::Plus, u1, u2)?
        + 2.0 * pref * sf(2.0 * t, 0.5 * (l1 + l2) + shift)? * g_row_pm(cfg, p, Sign::Minus, u1, u2)?
        - rv(t)? * g_corner(cfg, 1, u1, u2)?
        + s2 * rv(t - half)? * g_corner(cfg, 2, u1, u2)?
        + s3 * ell * (rv(t - htau)? - pi_i()) * g_corner(cfg, 3, u1, u2)?
        + s4 * ell * (rv(t - half - htau)? - pi_i()) * g_corner(cfg, 4, u1, u2)?;
    Ok(rel(lhs, rhs))
}

/// The reduction behind the `psi_{pj}` rows.
pub fn check_psi_pj(cfg: &ProblemConfig, p: usize, j: usize, u1: Cx, u2: Cx) -> Result<f64> {
    let tau = &cfg.tau;
    let (l1, l2) = cfg.lambda();
    let tp = cfg.t(1, p);
    let tj = cfg.t(2, j);
    let sf = |a: Cx, l: Cx| s_func(a, l, tau, DEFAULT_TOL);
    let rv = |a: Cx| rho(a, tau, DEFAULT_TOL);
    let lhs = (sf(u2 - tp, l1)? * sf(u1 - u2, l1)? + sf(-u2 - tp, l1)? * sf(u1 + u2, l1)?
        - (rv(u2 - tp)? + rv(-u2 - tp)?) * sf(u1 - tp, l1)?)
        * sf(u2 - tj, l2)?;
    let rhs = (rv(tp - tj)? + rv(tp + tj)?) * sf(u1 - tp, l1)? * sf(u2 - tj, l2)?
        + sf(-tj - tp, l1)? * sf(u1 + u2, l1)? * sf(u2 - tj, l2 - l1)?
        + sf(tj - tp, l1)? * sf(u1 - u2, l1)? * sf(u2 - tj, l2 + l1)?
        + sf(-tp - tj, l2)? * sf(u1 - tp, l1 - l2)? * sf(u1 + u2, l2)?
        + sf(tp - tj, l2)? * sf(u1 - tp, l1 + l2)? * sf(u1 - u2, -l2)?;
    Ok(rel(lhs, rhs))
}

/// The reduction behind the `psi_{p,+-}` rows, with the `a_{+-}` twists on
/// the third and fourth corner couplings.
pub fn check_psi_ppm(cfg: &ProblemConfig, sign: Sign, p: usize, u1: Cx, u2: Cx) -> Result<f64> {
    let tau = &cfg.tau;
    let (l1, l2) = cfg.lambda();
    let sg = sign.factor();
    let tp = cfg.t(1, p);
    let lmp = cfg.lambda1_mp2(sign);
    let sf = |a: Cx, l: Cx| s_func(a, l, tau, DEFAULT_TOL);
    let rv = |a: Cx| rho(a, tau, DEFAULT_TOL);
    let c = cfg.c;
    let a_pm = match sign {
        Sign::Plus => (two_pi_i() * l2).exp(),
        Sign::Minus => (two_pi_i() * (l1 + l2)).exp(),
    };
    let mut inner = Cx::new(0.0, 0.0);
    for j in 1..=cfg.n2() {
        inner -= cfg.c_exp(2, j) * rv(u2 - cfg.t(2, j))?;
    }
    inner -= sg * 2.0 * c * rv(sg * u2 - tp)?;
    let lhs = (inner * sf(u1 - tp, lmp)?
        + sg * 2.0 * c * sf(u1 - sg * u2, lmp)? * sf(sg * u2 - tp, lmp)?)
        * sf(u1 + sg * u2, sg * l2)?;
    let mut rhs = Cx::new(0.0, 0.0);
    let mut diag = 2.0 * c * rv(2.0 * tp)?;
    for j in 1..=cfg.n2() {
        let c2j = cfg.c_exp(2, j);
        let tj = cfg.t(2, j);
        rhs -= c2j * sf(tp + sg * tj, sg * l2)? * g_point(cfg, p, j, u1, u2)?;
        rhs -= c2j * sf(-sg * tj - tp, lmp)? * g_col_pm(cfg, sign, j, u1, u2)?;
        diag += c2j * rv(tp + sg * tj)?;
    }
    rhs += diag * g_row_pm(cfg, p, sign, u1, u2)?;
    rhs -= 2.0 * c * sf(2.0 * tp, sg * l2)? * g_row_pm(cfg, p, sign.flip(), u1, u2)?;
    for m in 1..=4 {
        let wm = cfg.half_period(m);
        let twist = if m <= 2 { Cx::new(1.0, 0.0) } else { a_pm };
        rhs -= sg * twist * c * sf(sg * wm - tp, lmp)? * g_corner(cfg, m, u1, u2)?;
    }
    Ok(rel(lhs, rhs))
}

/// Quarter-period expansion: the doubled-argument row vector times `M^{-1}`
/// with `ell = e^{pi i lambda}` reproduces the four half-period translates
/// of `s(t; lambda)`.
pub fn check_lv_quarter(t: Cx, lambda: Cx, tau: &ModularParam) -> Result<f64> {
    let sf = |a: Cx, l: Cx| s_func(a, l, tau, DEFAULT_TOL);
    let ell = (pi_i() * lambda).exp();
    let inv = residue_matrix_from_ell(ell).inverse;
    let pref = (-two_pi_i() * t).exp();
    let half = Cx::new(0.5, 0.0);
    let htau = 0.5 * tau.tau();
    let row = [
        2.0 * sf(2.0 * t, 0.5 * lambda)?,
        2.0 * sf(2.0 * t, 0.5 * (lambda + 1.0))?,
        2.0 * pref * sf(2.0 * t, 0.5 * (lambda + tau.tau()))?,
        2.0 * pref * sf(2.0 * t, 0.5 * (lambda + 1.0 + tau.tau()))?,
    ];
    let want = [
        sf(t, lambda)?,
        sf(t - half, lambda)?,
        sf(t - htau, lambda)?,
        sf(t - half - htau, lambda)?,
    ];
    let mut worst: f64 = 0.0;
    for m in 0..4 {
        let mut got = Cx::new(0.0, 0.0);
        for k in 0..4 {
            got += row[k] * inv[k][m];
        }
        worst = worst.max(rel(want[m], got));
    }
    Ok(worst)
}

/// Period multipliers of `T` under the four fundamental shifts.
///
/// Transport is factor-wise, so the raw multiplier carries one branch factor
/// `e^{pi i c_f m_f}` per theta factor, with `m_f` an odd integer read off
/// from the transported logarithm against the closed-form quasi-periodicity
/// of `theta1`. After dividing the branch factors out, the multiplier is
/// `e^{2 pi i c_k0}` for the shifts by `1` and
/// `e^{-2 pi i c_k_inf} e^{-2 pi i lambda_k}` for the shifts by `tau`; the
/// extra `e^{-2 pi i lambda_k}` is the twist separating the bare product
/// `T` from the section whose multipliers the connection normalizes.
/// Each residual also includes the distance of every `m_f` from the nearest
/// odd integer.
pub fn check_t_periods(cfg: &ProblemConfig, u1: Cx, u2: Cx) -> Result<[f64; 4]> {
    let tau = cfg.tau.tau();
    let (l1, l2) = cfg.lambda();
    let one = Cx::new(1.0, 0.0);
    let zero = Cx::new(0.0, 0.0);
    let shifts = [
        (one, zero),
        (tau, zero),
        (zero, one),
        (zero, tau),
    ];
    let expected = [
        (two_pi_i() * cfg.c10).exp(),
        (-two_pi_i() * (cfg.c1_inf + l1)).exp(),
        (two_pi_i() * cfg.c20).exp(),
        (-two_pi_i() * (cfg.c2_inf + l2)).exp(),
    ];
    let factors = t_factors(cfg);
    let mut out = [0.0f64; 4];
    for (n, (&(d1, d2), &want)) in shifts.iter().zip(&expected).enumerate() {
        let mut state = BranchState::new(cfg, u1, u2)?;
        let start = state.log_t(cfg);
        let before: Vec<Cx> = state.factor_logs().to_vec();
        let v0: Vec<Cx> = factors.iter().map(|f| f.arg(u1, u2)).collect();
        state.advance(cfg, u1 + d1, u2 + d2)?;
        let mut worst: f64 = 0.0;
        let mut branch = Cx::new(0.0, 0.0);
        for (i, f) in factors.iter().enumerate() {
            let dv = f.a1 * d1 + f.a2 * d2;
            let delta = state.factor_logs()[i] - before[i];
            if dv.norm() < 1e-12 {
                worst = worst.max(delta.norm());
                continue;
            }
            // Closed-form part of log theta1(v + dv) - log theta1(v); the
            // remainder must be an odd multiple of pi i.
            let analytic = if (dv - one).norm() < 1e-12 || (dv + one).norm() < 1e-12 {
                Cx::new(0.0, 0.0)
            } else if (dv - tau).norm() < 1e-12 {
                -pi_i() * tau - two_pi_i() * v0[i]
            } else {
                -pi_i() * tau + two_pi_i() * v0[i]
            };
            let m = (delta - analytic) / pi_i();
            let m_int = m.re.round();
            worst = worst.max((m - Cx::new(m_int, 0.0)).norm());
            worst = worst.max(if m_int.rem_euclid(2.0) == 1.0 { 0.0 } else { 1.0 });
            branch += f.coeff * pi_i() * m_int;
        }
        let mu_norm = (state.log_t(cfg) - start - branch).exp();
        worst = worst.max(rel(want, mu_norm));
        out[n] = worst;
    }
    Ok(out)
}

/// Runs the whole suite at `samples` points per check, seeded.
pub fn run_suite(cfg: &ProblemConfig, seed: u64, samples: usize) -> Result<Vec<IdentityResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = cfg.tau.clone();
    let (l1, l2) = cfg.lambda();
    let mut results: Vec<IdentityResult> = Vec::new();
    let mut push = |id: &str, max_residual: f64| {
        results.push(IdentityResult {
            id: id.into(),
            samples,
            max_residual,
        });
    };

    let cell = |rng: &mut ChaCha8Rng| -> Cx {
        Cx::new(rng.gen_range(0.0..1.0), 0.0) + rng.gen_range(0.0..1.0) * tau.tau()
    };
    let clear = |args: &[Cx]| args.iter().all(|&a| dist_to_lattice(a, &tau) > SAMPLE_MARGIN);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let (w, tj, tk) = (cell(&mut rng), cell(&mut rng), cell(&mut rng));
            let ok = clear(&[
                w - tk,
                w - tj,
                tj - tk,
                w - tk - l1,
                w - tj - l1,
                tj - tk - l1,
                l1,
            ]);
            if ok {
                worst = worst.max(check_mano_38(w, tj, tk, l1, &tau)?);
                break;
            }
        }
    }
    push("mano_38", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let n = 4;
            let ts: Vec<Cx> = (0..n).map(|_| cell(&mut rng)).collect();
            let mut cs: Vec<Cx> = (0..n)
                .map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let total: Cx = cs.iter().sum();
            cs[n - 1] -= total;
            let w = cell(&mut rng);
            let mut args = vec![l2];
            for k in 0..n {
                args.push(w - ts[k]);
                args.push(w - ts[k] - l2);
                for l in 0..n {
                    if k != l {
                        args.push(ts[k] - ts[l]);
                        args.push(ts[k] - ts[l] - l2);
                    }
                }
            }
            if clear(&args) {
                worst = worst.max(check_mano_39(w, &ts, &cs, 0, l2, &tau)?);
                break;
            }
        }
    }
    push("mano_39", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        let m = rng.gen_range(2..=4);
        loop {
            let t = cell(&mut rng);
            let w = half_period(&tau, m);
            if clear(&[w + t, w - t]) {
                worst = worst.max(check_rho_mirror(m, t, &tau)?);
                break;
            }
        }
    }
    push("rho_mirror", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let u = cell(&mut rng);
            if clear(&[u]) {
                worst = worst.max(check_rho_period(u, &tau)?);
                break;
            }
        }
    }
    push("rho_period", worst);

    push("rho_half_periods", check_rho_half_periods(&tau)?);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let (u, l) = (cell(&mut rng), cell(&mut rng));
            if clear(&[u, l, u - l, u + l]) {
                worst = worst.max(check_s_reflection(u, l, &tau)?);
                break;
            }
        }
    }
    push("s_reflection", worst);

    let mut worst = 0.0f64;
    let clear_wide =
        |args: &[Cx]| args.iter().all(|&a| dist_to_lattice(a, &tau) > DERIV_MARGIN);
    for _ in 0..samples {
        loop {
            let (u, l) = (cell(&mut rng), cell(&mut rng));
            if clear_wide(&[u, l, u - l]) {
                worst = worst.max(check_s_derivatives(u, l, &tau)?);
                break;
            }
        }
    }
    push("s_derivatives", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let (u, s_, t) = (cell(&mut rng), cell(&mut rng), cell(&mut rng));
            let ok = clear(&[
                t - u,
                s_ - t,
                s_ - u,
                t - s_,
                t - u - l1,
                t - u - l1 - l2,
                s_ - t - l2,
                s_ - u - l2,
                t - s_ - l1,
                s_ - u - l1 - l2,
            ]);
            if ok {
                worst = worst.max(check_frv(u, s_, t, l1, l2, &tau)?);
                break;
            }
        }
    }
    push("rel_s_frv", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        for sign in Sign::BOTH {
            let sg = sign.factor();
            loop {
                let (u1, u2, t1p, t2j) = (cell(&mut rng), cell(&mut rng), cell(&mut rng), cell(&mut rng));
                let l2m1 = l2 - sg * l1;
                let ok = clear(&[
                    -sg * t1p - t2j,
                    u2 + sg * t1p,
                    u1 + sg * u2,
                    u1 - t1p,
                    u2 - t2j,
                    t2j + sg * t1p,
                    -sg * t1p - t2j - l2m1,
                    u2 + sg * t1p - l2m1,
                    u2 + sg * t1p - sg * l1,
                    u1 + sg * u2 - l1,
                    u1 - t1p - l1,
                    u2 - t2j - l2m1,
                    t2j + sg * t1p - sg * l1,
                    u2 - t2j - l2,
                    u1 - t1p - l1 + sg * l2,
                    u1 + sg * u2 - sg * l2,
                ]);
                if ok {
                    worst = worst.max(check_psi_pmj(sign, u1, u2, t1p, t2j, l1, l2, &tau)?);
                    break;
                }
            }
        }
    }
    push("for_psi_pmj", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        let m = rng.gen_range(1..=4);
        let p = rng.gen_range(1..=cfg.n1());
        worst = worst.max(retry_pointwise(&mut rng, cfg, |cfg, u1, u2| {
            check_g_display(cfg, m, p, u1, u2)
        })?);
    }
    push("for_psi_corner", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        let p = rng.gen_range(1..=cfg.n1());
        let j = rng.gen_range(1..=cfg.n2());
        worst = worst.max(retry_pointwise(&mut rng, cfg, |cfg, u1, u2| {
            check_psi_pj(cfg, p, j, u1, u2)
        })?);
    }
    push("for_psi_pj", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        let p = rng.gen_range(1..=cfg.n1());
        for sign in Sign::BOTH {
            worst = worst.max(retry_pointwise(&mut rng, cfg, |cfg, u1, u2| {
                check_psi_ppm(cfg, sign, p, u1, u2)
            })?);
        }
    }
    push("for_psi_ppm", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let t = cell(&mut rng);
            let lam = l1 + Cx::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            let htau = 0.5 * tau.tau();
            let half = Cx::new(0.5, 0.0);
            let ok = clear(&[
                2.0 * t,
                2.0 * t - 0.5 * lam,
                2.0 * t - 0.5 * (lam + 1.0),
                2.0 * t - 0.5 * (lam + tau.tau()),
                2.0 * t - 0.5 * (lam + 1.0 + tau.tau()),
                t,
                t - half,
                t - htau,
                t - half - htau,
                t - lam,
                t - half - lam,
                t - htau - lam,
                t - half - htau - lam,
            ]);
            if ok {
                worst = worst.max(check_lv_quarter(t, lam, &tau)?);
                break;
            }
        }
    }
    push("lv_quarter", worst);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        loop {
            let u1 = cell(&mut rng);
            let u2 = cell(&mut rng);
            let mut args = Vec::new();
            for f in t_factors(cfg) {
                let v = f.arg(u1, u2);
                args.push(v);
                args.push(v + f.a1 + f.a2);
                args.push(v + (f.a1 + f.a2) * tau.tau());
            }
            if clear(&args) {
                match check_t_periods(cfg, u1, u2) {
                    Ok(r) => {
                        worst = worst.max(r.into_iter().fold(0.0, f64::max));
                        break;
                    }
                    Err(crate::error::Error::NearSingular { .. })
                    | Err(crate::error::Error::BranchJump) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    push("t_periods", worst);

    results.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(results)
}

/// Resamples `(u1, u2)` until every evaluation in `f` stays clear of the
/// singular loci, then returns the residual.
fn retry_pointwise<F>(rng: &mut ChaCha8Rng, cfg: &ProblemConfig, f: F) -> Result<f64>
where
    F: Fn(&ProblemConfig, Cx, Cx) -> Result<f64>,
{
    let tau = cfg.tau.tau();
    loop {
        let u1 = Cx::new(rng.gen_range(0.0..1.0), 0.0) + rng.gen_range(0.0..1.0) * tau;
        let u2 = Cx::new(rng.gen_range(0.0..1.0), 0.0) + rng.gen_range(0.0..1.0) * tau;
        if !pointwise_clear(cfg, u1, u2) {
            continue;
        }
        match f(cfg, u1, u2) {
            Ok(r) => return Ok(r),
            Err(crate::error::Error::NearSingular { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Margin test for the loci every basis form can touch: the marked points,
/// the diagonals, and their `lambda`-translates.
fn pointwise_clear(cfg: &ProblemConfig, u1: Cx, u2: Cx) -> bool {
    let tau = &cfg.tau;
    let (l1, l2) = cfg.lambda();
    let mut args = vec![u1 - u2, u1 + u2];
    for l in [
        Cx::new(0.0, 0.0),
        l1,
        l2,
        l1 + l2,
        l1 - l2,
        0.5 * (l1 + l2),
        0.5 * (l1 - l2),
    ] {
        args.push(u1 - u2 - l);
        args.push(u1 + u2 - l);
        for i in 1..=cfg.n1() {
            args.push(u1 - cfg.t(1, i) - l);
        }
        for j in 1..=cfg.n2() {
            args.push(u2 - cfg.t(2, j) - l);
        }
        for m in 1..=4 {
            let w = cfg.half_period(m);
            args.push(u1 - w - l);
            args.push(u2 - w - l);
            args.push(u2 + w - l);
        }
    }
    args.iter()
        .all(|&a| dist_to_lattice(a, tau) > SAMPLE_MARGIN)
}
