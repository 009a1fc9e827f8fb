//! Gauss-Manin connection matrices `A_{kp}(t)` of the differential system
//! `d F / d t_{kp} = A_{kp} F`, where `F` is the column vector of pairings of
//! the basis 2-forms with a fixed twisted cycle.
//!
//! Row `r` of `A_{kp}` collects the coefficients of `nabla_{kp}(psi_r)`
//! expressed back in the basis. The `A_{2q}` block is assembled directly and
//! cross-checked against the `A_{1q}` block of the variable-swapped problem
//! through [`star_conjugate`].

use crate::config::{BasisIndex, ProblemConfig, Sign};
use crate::elliptic::{rho, s_func, DEFAULT_TOL};
use crate::error::Result;
use crate::forms::g_basis;
use crate::{two_pi_i, Cx};
use nalgebra::DMatrix;
use std::collections::HashMap;

struct Ctx<'a> {
    cfg: &'a ProblemConfig,
    pos: HashMap<BasisIndex, usize>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ProblemConfig) -> Self {
        let pos = cfg
            .index_set()
            .into_iter()
            .enumerate()
            .map(|(a, idx)| (idx, a))
            .collect();
        Ctx { cfg, pos }
    }

    fn rho(&self, u: Cx) -> Result<Cx> {
        rho(u, &self.cfg.tau, DEFAULT_TOL)
    }

    fn s(&self, u: Cx, lambda: Cx) -> Result<Cx> {
        s_func(u, lambda, &self.cfg.tau, DEFAULT_TOL)
    }

    fn at(&self, idx: BasisIndex) -> usize {
        *self
            .pos
            .get(&idx)
            .unwrap_or_else(|| panic!("index {idx:?} outside the basis"))
    }
}

/// `a_+ = e^{2 pi i lambda_2}`, `a_- = e^{2 pi i (lambda_1 + lambda_2)}`.
fn a_pm(cfg: &ProblemConfig, sign: Sign) -> Cx {
    let (l1, l2) = cfg.lambda();
    match sign {
        Sign::Plus => (two_pi_i() * l2).exp(),
        Sign::Minus => (two_pi_i() * (l1 + l2)).exp(),
    }
}

/// `b_+ = e^{2 pi i lambda_1}`, `b_- = e^{2 pi i (lambda_1 + lambda_2)}`.
fn b_pm(cfg: &ProblemConfig, sign: Sign) -> Cx {
    let (l1, l2) = cfg.lambda();
    match sign {
        Sign::Plus => (two_pi_i() * l1).exp(),
        Sign::Minus => (two_pi_i() * (l1 + l2)).exp(),
    }
}

/// Connection matrix for the direction `t_{kp}` (`k` in {1,2}, `p` 1-based).
pub fn connection_matrix(cfg: &ProblemConfig, k: usize, p: usize) -> Result<DMatrix<Cx>> {
    match k {
        1 => a_1p(cfg, p),
        2 => a_2q(cfg, p),
        _ => panic!("k must be 1 or 2, got {k}"),
    }
}

fn a_1p(cfg: &ProblemConfig, p: usize) -> Result<DMatrix<Cx>> {
    assert!((1..=cfg.n1()).contains(&p), "p out of range");
    let ctx = Ctx::new(cfg);
    let n = cfg.dim();
    let mut a = DMatrix::from_element(n, n, Cx::new(0.0, 0.0));
    let (l1, l2) = cfg.lambda();
    let tp = cfg.t(1, p);
    let c1p = cfg.c_exp(1, p);
    let c = cfg.c;

    for (r, row) in cfg.index_set().into_iter().enumerate() {
        match row {
            BasisIndex::Point { i, j } if i != p => {
                a[(r, ctx.at(row))] += c1p * ctx.rho(tp - cfg.t(1, i))?;
                a[(r, ctx.at(BasisIndex::Point { i: p, j }))] -=
                    c1p * ctx.s(tp - cfg.t(1, i), l1)?;
            }
            BasisIndex::RowPM { i, sign } if i != p => {
                a[(r, ctx.at(row))] += c1p * ctx.rho(tp - cfg.t(1, i))?;
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign }))] -=
                    c1p * ctx.s(tp - cfg.t(1, i), cfg.lambda1_mp2(sign))?;
            }
            BasisIndex::ColPM { sign, j } => {
                let s = sign.factor();
                let tq = cfg.t(2, j);
                a[(r, ctx.at(row))] += c1p * ctx.rho(tp + sign.apply(tq))?;
                a[(r, ctx.at(BasisIndex::Point { i: p, j }))] -=
                    s * c1p * ctx.s(tq + sign.apply(tp), sign.apply(l1))?;
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign }))] -=
                    s * c1p * ctx.s(-sign.apply(tp) - tq, cfg.lambda2_mp1(sign))?;
            }
            BasisIndex::Corner { m } => {
                // For m = 3, 4 the plus coupling carries e^{-2 pi i lambda_2}
                // (the u1+u2 kernel shifts by tau under the half-period map
                // that generates these rows from m = 1), and the lambda
                // dependence of ell in M^{-1} adds pi i c_{1p} on the
                // diagonal, cancelling varpi_m.
                let w = cfg.half_period(m);
                let twist = if m <= 2 {
                    Cx::new(1.0, 0.0)
                } else {
                    (-two_pi_i() * l2).exp()
                };
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign: Sign::Plus }))] +=
                    twist * c1p * ctx.s(tp - w, l1 - l2)?;
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign: Sign::Minus }))] -=
                    c1p * ctx.s(tp - w, l1 + l2)?;
                a[(r, ctx.at(row))] += c1p * ctx.rho(tp - w)?;
            }
            BasisIndex::Point { j, .. } => {
                // row psi_{pj}
                let tq = cfg.t(2, j);
                let mut diag = two_pi_i() * cfg.c10
                    + c * (ctx.rho(tp - tq)? + ctx.rho(tp + tq)?);
                for i in (1..=cfg.n1()).filter(|&i| i != p) {
                    let ti = cfg.t(1, i);
                    diag += cfg.c_exp(1, i) * ctx.rho(tp - ti)?;
                    a[(r, ctx.at(BasisIndex::Point { i, j }))] +=
                        cfg.c_exp(1, i) * ctx.s(ti - tp, l1)?;
                }
                a[(r, ctx.at(row))] += diag;
                a[(r, ctx.at(BasisIndex::ColPM { sign: Sign::Plus, j }))] +=
                    c * ctx.s(-tq - tp, l1)?;
                a[(r, ctx.at(BasisIndex::ColPM { sign: Sign::Minus, j }))] +=
                    c * ctx.s(tq - tp, l1)?;
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign: Sign::Plus }))] +=
                    c * ctx.s(-tp - tq, l2)?;
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign: Sign::Minus }))] -=
                    c * ctx.s(tp - tq, l2)?;
            }
            BasisIndex::RowPM { sign, .. } => {
                // row psi_{p +-}
                let s = sign.factor();
                let lmp = cfg.lambda1_mp2(sign);
                let mut diag = two_pi_i() * (cfg.c10 - sign.apply(cfg.c20))
                    + 2.0 * c * ctx.rho(2.0 * tp)?;
                for i in (1..=cfg.n1()).filter(|&i| i != p) {
                    let ti = cfg.t(1, i);
                    diag -= cfg.c_exp(1, i) * ctx.rho(ti - tp)?;
                    a[(r, ctx.at(BasisIndex::RowPM { i, sign }))] +=
                        cfg.c_exp(1, i) * ctx.s(ti - tp, lmp)?;
                }
                for j in 1..=cfg.n2() {
                    let tq = cfg.t(2, j);
                    let c2j = cfg.c_exp(2, j);
                    diag += c2j * ctx.rho(tp + sign.apply(tq))?;
                    a[(r, ctx.at(BasisIndex::Point { i: p, j }))] -=
                        c2j * ctx.s(tp + sign.apply(tq), sign.apply(l2))?;
                    a[(r, ctx.at(BasisIndex::ColPM { sign, j }))] -=
                        c2j * ctx.s(-sign.apply(tq) - tp, lmp)?;
                }
                a[(r, ctx.at(row))] += diag;
                a[(r, ctx.at(BasisIndex::RowPM { i: p, sign: sign.flip() }))] -=
                    2.0 * c * ctx.s(2.0 * tp, sign.apply(l2))?;
                let apm = a_pm(cfg, sign);
                for m in 1..=4usize {
                    let alpha = if m <= 2 { Cx::new(1.0, 0.0) } else { apm };
                    let w = cfg.half_period(m);
                    a[(r, ctx.at(BasisIndex::Corner { m }))] -=
                        s * alpha * c * ctx.s(sign.apply(w) - tp, lmp)?;
                }
            }
        }
    }
    Ok(a)
}

fn a_2q(cfg: &ProblemConfig, q: usize) -> Result<DMatrix<Cx>> {
    assert!((1..=cfg.n2()).contains(&q), "q out of range");
    let ctx = Ctx::new(cfg);
    let n = cfg.dim();
    let mut a = DMatrix::from_element(n, n, Cx::new(0.0, 0.0));
    let (l1, l2) = cfg.lambda();
    let tq = cfg.t(2, q);
    let c2q = cfg.c_exp(2, q);
    let c = cfg.c;

    for (r, row) in cfg.index_set().into_iter().enumerate() {
        match row {
            BasisIndex::Point { i, j } if j != q => {
                a[(r, ctx.at(row))] += c2q * ctx.rho(tq - cfg.t(2, j))?;
                a[(r, ctx.at(BasisIndex::Point { i, j: q }))] -=
                    c2q * ctx.s(tq - cfg.t(2, j), l2)?;
            }
            BasisIndex::ColPM { sign, j } if j != q => {
                a[(r, ctx.at(row))] += c2q * ctx.rho(tq - cfg.t(2, j))?;
                a[(r, ctx.at(BasisIndex::ColPM { sign, j: q }))] -=
                    c2q * ctx.s(tq - cfg.t(2, j), cfg.lambda2_mp1(sign))?;
            }
            BasisIndex::RowPM { i, sign } => {
                let s = sign.factor();
                let ti = cfg.t(1, i);
                a[(r, ctx.at(row))] += c2q * ctx.rho(tq + sign.apply(ti))?;
                a[(r, ctx.at(BasisIndex::Point { i, j: q }))] -=
                    s * c2q * ctx.s(ti + sign.apply(tq), sign.apply(l2))?;
                a[(r, ctx.at(BasisIndex::ColPM { sign, j: q }))] -=
                    s * c2q * ctx.s(-sign.apply(tq) - ti, cfg.lambda1_mp2(sign))?;
            }
            BasisIndex::Corner { m } => {
                // mirror of the A_{1p} corner rows under the variable swap
                let w = cfg.half_period(m);
                let twist = if m <= 2 {
                    Cx::new(1.0, 0.0)
                } else {
                    (-two_pi_i() * l1).exp()
                };
                a[(r, ctx.at(BasisIndex::ColPM { sign: Sign::Plus, j: q }))] -=
                    twist * c2q * ctx.s(tq - w, l2 - l1)?;
                a[(r, ctx.at(BasisIndex::ColPM { sign: Sign::Minus, j: q }))] +=
                    c2q * ctx.s(tq - w, l2 + l1)?;
                a[(r, ctx.at(row))] += c2q * ctx.rho(tq - w)?;
            }
            BasisIndex::Point { i, .. } => {
                // row psi_{iq}
                let ti = cfg.t(1, i);
                let mut diag = two_pi_i() * cfg.c20
                    + c * (ctx.rho(tq - ti)? + ctx.rho(tq + ti)?);
                for j in (1..=cfg.n2()).filter(|&j| j != q) {
                    let tj = cfg.t(2, j);
                    diag += cfg.c_exp(2, j) * ctx.rho(tq - tj)?;
                    a[(r, ctx.at(BasisIndex::Point { i, j }))] +=
                        cfg.c_exp(2, j) * ctx.s(tj - tq, l2)?;
                }
                a[(r, ctx.at(row))] += diag;
                a[(r, ctx.at(BasisIndex::RowPM { i, sign: Sign::Plus }))] +=
                    c * ctx.s(-ti - tq, l2)?;
                a[(r, ctx.at(BasisIndex::RowPM { i, sign: Sign::Minus }))] +=
                    c * ctx.s(ti - tq, l2)?;
                a[(r, ctx.at(BasisIndex::ColPM { sign: Sign::Plus, j: q }))] +=
                    c * ctx.s(-tq - ti, l1)?;
                a[(r, ctx.at(BasisIndex::ColPM { sign: Sign::Minus, j: q }))] -=
                    c * ctx.s(tq - ti, l1)?;
            }
            BasisIndex::ColPM { sign, .. } => {
                // row psi_{+- q}
                let s = sign.factor();
                let lmp = cfg.lambda2_mp1(sign);
                let mut diag = two_pi_i() * (cfg.c20 - sign.apply(cfg.c10))
                    + 2.0 * c * ctx.rho(2.0 * tq)?;
                for j in (1..=cfg.n2()).filter(|&j| j != q) {
                    let tj = cfg.t(2, j);
                    diag -= cfg.c_exp(2, j) * ctx.rho(tj - tq)?;
                    a[(r, ctx.at(BasisIndex::ColPM { sign, j }))] +=
                        cfg.c_exp(2, j) * ctx.s(tj - tq, lmp)?;
                }
                for i in 1..=cfg.n1() {
                    let ti = cfg.t(1, i);
                    let c1i = cfg.c_exp(1, i);
                    diag += c1i * ctx.rho(tq + sign.apply(ti))?;
                    a[(r, ctx.at(BasisIndex::Point { i, j: q }))] -=
                        c1i * ctx.s(tq + sign.apply(ti), sign.apply(l1))?;
                    a[(r, ctx.at(BasisIndex::RowPM { i, sign }))] -=
                        c1i * ctx.s(-sign.apply(ti) - tq, lmp)?;
                }
                a[(r, ctx.at(row))] += diag;
                a[(r, ctx.at(BasisIndex::ColPM { sign: sign.flip(), j: q }))] -=
                    2.0 * c * ctx.s(2.0 * tq, sign.apply(l1))?;
                let bpm = b_pm(cfg, sign);
                for m in 1..=4usize {
                    let beta = if m <= 2 { Cx::new(1.0, 0.0) } else { bpm };
                    let w = cfg.half_period(m);
                    a[(r, ctx.at(BasisIndex::Corner { m }))] +=
                        s * beta * c * ctx.s(sign.apply(w) - tq, lmp)?;
                }
            }
        }
    }
    Ok(a)
}

/// The variable-swapped configuration: `u_1 <-> u_2` exchanges the roles of
/// the two factors, so all first-variable data trade places with the
/// second-variable data.
pub fn star_config(cfg: &ProblemConfig) -> ProblemConfig {
    let mut out = cfg.clone();
    std::mem::swap(&mut out.t1, &mut out.t2);
    std::mem::swap(&mut out.c1, &mut out.c2);
    std::mem::swap(&mut out.c10, &mut out.c20);
    std::mem::swap(&mut out.c1_inf, &mut out.c2_inf);
    out
}

/// Image of a basis index under the variable swap, together with the sign
/// picked up by the orientation flip `du2 /\ du1 = -du1 /\ du2`.
pub fn star_index(idx: BasisIndex) -> (BasisIndex, f64) {
    match idx {
        BasisIndex::Point { i, j } => (BasisIndex::Point { i: j, j: i }, -1.0),
        BasisIndex::RowPM { i, sign } => (BasisIndex::ColPM { sign, j: i }, -1.0),
        BasisIndex::ColPM { sign, j } => (BasisIndex::RowPM { i: j, sign }, -1.0),
        BasisIndex::Corner { m } => (BasisIndex::Corner { m }, 1.0),
    }
}

/// `A_{2q}` obtained by conjugating the `A_{1q}` matrix of the swapped
/// problem with the index relabeling of [`star_index`].
pub fn star_conjugate(cfg: &ProblemConfig, q: usize) -> Result<DMatrix<Cx>> {
    let swapped = star_config(cfg);
    let a1 = a_1p(&swapped, q)?;
    let ctx_sw = Ctx::new(&swapped);
    let n = cfg.dim();
    let mut out = DMatrix::from_element(n, n, Cx::new(0.0, 0.0));
    for (r, row) in cfg.index_set().into_iter().enumerate() {
        let (sr, fr) = star_index(row);
        for (cidx, col) in cfg.index_set().into_iter().enumerate() {
            let (sc, fc) = star_index(col);
            out[(r, cidx)] = fr * fc * a1[(ctx_sw.at(sr), ctx_sw.at(sc))];
        }
    }
    Ok(out)
}

/// `nabla_{kp}(psi)` at a point, computed without the theorem: a central
/// difference of the coefficient function in `t_{kp}` (with `lambda`
/// co-varying through the fixed `c_{k infinity}`) minus
/// `c_{kp} rho(u_k - t_{kp})` times the coefficient.
pub fn nabla_numeric(
    cfg: &ProblemConfig,
    k: usize,
    p: usize,
    idx: BasisIndex,
    u1: Cx,
    u2: Cx,
    h: f64,
) -> Result<Cx> {
    let t0 = cfg.t(k, p);
    let plus = g_basis(&cfg.with_t(k, p, t0 + h), idx, u1, u2)?;
    let minus = g_basis(&cfg.with_t(k, p, t0 - h), idx, u1, u2)?;
    let dt = (plus - minus) / (2.0 * h);
    let uk = if k == 1 { u1 } else { u2 };
    let r = rho(uk - t0, &cfg.tau, DEFAULT_TOL)?;
    Ok(dt - cfg.c_exp(k, p) * r * g_basis(cfg, idx, u1, u2)?)
}

fn d_matrix(
    cfg: &ProblemConfig,
    k: usize,
    p: usize,
    dk: usize,
    dp: usize,
    h: f64,
) -> Result<DMatrix<Cx>> {
    let t0 = cfg.t(dk, dp);
    let plus = connection_matrix(&cfg.with_t(dk, dp, t0 + h), k, p)?;
    let minus = connection_matrix(&cfg.with_t(dk, dp, t0 - h), k, p)?;
    Ok((plus - minus) / Cx::new(2.0 * h, 0.0))
}

/// Largest entry of the flatness defect
/// `d_b A_a - d_a A_b + A_a A_b - A_b A_a` for the directions
/// `a = t_{k1 p1}`, `b = t_{k2 p2}`, with the derivatives taken as central
/// differences of step `h`.
pub fn flatness_residual(
    cfg: &ProblemConfig,
    (k1, p1): (usize, usize),
    (k2, p2): (usize, usize),
    h: f64,
) -> Result<f64> {
    let aa = connection_matrix(cfg, k1, p1)?;
    let ab = connection_matrix(cfg, k2, p2)?;
    let da = d_matrix(cfg, k1, p1, k2, p2, h)?;
    let db = d_matrix(cfg, k2, p2, k1, p1, h)?;
    let defect = da - db + &aa * &ab - &ab * &aa;
    Ok(defect.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::random_config;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(n1: usize, n2: usize, seed: u64) -> ProblemConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_config(n1, n2, Cx::new(0.0, 1.0), &mut rng)
    }

    #[test]
    fn point_row_matches_hand_formula() {
        // n1 = 2: the psi_{1j} row of A_{11} has exactly two nonzero entries.
        let cfg = sample(2, 1, 1);
        let a = connection_matrix(&cfg, 1, 2).unwrap();
        let ctx = Ctx::new(&cfg);
        let r = ctx.at(BasisIndex::Point { i: 1, j: 1 });
        let c1p = cfg.c_exp(1, 2);
        let d = cfg.t(1, 2) - cfg.t(1, 1);
        let (l1, _) = cfg.lambda();
        let want_diag = c1p * rho(d, &cfg.tau, DEFAULT_TOL).unwrap();
        let want_off = -c1p * s_func(d, l1, &cfg.tau, DEFAULT_TOL).unwrap();
        assert!((a[(r, r)] - want_diag).norm() < 1e-13 * want_diag.norm());
        let c = ctx.at(BasisIndex::Point { i: 2, j: 1 });
        assert!((a[(r, c)] - want_off).norm() < 1e-13 * want_off.norm());
        let nonzero = (0..cfg.dim()).filter(|&j| a[(r, j)].norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn corner_row_sparsity_and_values() {
        let cfg = sample(1, 1, 2);
        let a = connection_matrix(&cfg, 1, 1).unwrap();
        let ctx = Ctx::new(&cfg);
        let (l1, l2) = cfg.lambda();
        let tp = cfg.t(1, 1);
        let c1p = cfg.c_exp(1, 1);
        for m in 1..=4usize {
            let r = ctx.at(BasisIndex::Corner { m });
            let w = cfg.half_period(m);
            let plus = ctx.at(BasisIndex::RowPM { i: 1, sign: Sign::Plus });
            let minus = ctx.at(BasisIndex::RowPM { i: 1, sign: Sign::Minus });
            let twist = if m <= 2 {
                Cx::new(1.0, 0.0)
            } else {
                (-two_pi_i() * l2).exp()
            };
            let want_p = twist * c1p * s_func(tp - w, l1 - l2, &cfg.tau, DEFAULT_TOL).unwrap();
            let want_m = -c1p * s_func(tp - w, l1 + l2, &cfg.tau, DEFAULT_TOL).unwrap();
            let want_d = c1p * rho(tp - w, &cfg.tau, DEFAULT_TOL).unwrap();
            assert!((a[(r, plus)] - want_p).norm() < 1e-13 * want_p.norm());
            assert!((a[(r, minus)] - want_m).norm() < 1e-13 * want_m.norm());
            assert!((a[(r, r)] - want_d).norm() < 1e-13 * want_d.norm().max(1.0));
            let nonzero = (0..cfg.dim()).filter(|&j| a[(r, j)].norm() > 0.0).count();
            assert_eq!(nonzero, 3);
        }
    }

    #[test]
    fn row_pm_row_independent_transcription() {
        // Re-derive the psi_{p+} row of A_{11} for n1 = n2 = 1 term by term.
        let cfg = sample(1, 1, 3);
        let a = connection_matrix(&cfg, 1, 1).unwrap();
        let ctx = Ctx::new(&cfg);
        let (l1, l2) = cfg.lambda();
        let tau = cfg.tau.tau();
        let tp = cfg.t(1, 1);
        let t2 = cfg.t(2, 1);
        let c2j = cfg.c_exp(2, 1);
        let c = cfg.c;
        let sv = |u: Cx, l: Cx| s_func(u, l, &cfg.tau, DEFAULT_TOL).unwrap();
        let rv = |u: Cx| rho(u, &cfg.tau, DEFAULT_TOL).unwrap();
        let r = ctx.at(BasisIndex::RowPM { i: 1, sign: Sign::Plus });
        let diag = two_pi_i() * (cfg.c10 - cfg.c20)
            + c2j * rv(tp + t2)
            + 2.0 * c * rv(2.0 * tp);
        assert!((a[(r, r)] - diag).norm() < 1e-12 * diag.norm());
        let c_pm = ctx.at(BasisIndex::RowPM { i: 1, sign: Sign::Minus });
        let want = -2.0 * c * sv(2.0 * tp, l2);
        assert!((a[(r, c_pm)] - want).norm() < 1e-12 * want.norm());
        let c_pj = ctx.at(BasisIndex::Point { i: 1, j: 1 });
        let want = -c2j * sv(tp + t2, l2);
        assert!((a[(r, c_pj)] - want).norm() < 1e-12 * want.norm());
        let c_cj = ctx.at(BasisIndex::ColPM { sign: Sign::Plus, j: 1 });
        let want = -c2j * sv(-t2 - tp, l1 - l2);
        assert!((a[(r, c_cj)] - want).norm() < 1e-12 * want.norm());
        let apl = (two_pi_i() * l2).exp();
        let corner_want = [
            -c * sv(-tp, l1 - l2),
            -c * sv(Cx::new(0.5, 0.0) - tp, l1 - l2),
            -apl * c * sv(tau / 2.0 - tp, l1 - l2),
            -apl * c * sv((1.0 + tau) / 2.0 - tp, l1 - l2),
        ];
        for m in 1..=4usize {
            let cc = ctx.at(BasisIndex::Corner { m });
            let want = corner_want[m - 1];
            assert!(
                (a[(r, cc)] - want).norm() < 1e-12 * want.norm(),
                "corner {m}: {} vs {want}",
                a[(r, cc)]
            );
        }
    }

    #[test]
    fn star_conjugation_reproduces_a2q() {
        for (n1, n2, seed) in [(1, 1, 4), (2, 1, 5), (1, 2, 6), (2, 2, 7)] {
            let cfg = sample(n1, n2, seed);
            for q in 1..=n2 {
                let direct = connection_matrix(&cfg, 2, q).unwrap();
                let conj = star_conjugate(&cfg, q).unwrap();
                let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let diff = (&direct - &conj)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(
                    diff < 1e-11 * scale,
                    "n1={n1} n2={n2} q={q}: max deviation {diff:.3e}"
                );
            }
        }
    }

    #[test]
    fn pointwise_rows_match_numeric_nabla() {
        // Rows whose covariant derivative is an exact pointwise identity
        // (no integration by parts): psi_{ij}, psi_{i+-} for i != p,
        // psi_{+- j}, and the corners.
        let cfg = sample(2, 1, 8);
        let (u1, u2) = (Cx::new(0.131, 0.562), Cx::new(0.644, 0.273));
        let h = 1e-6;
        for (k, p) in [(1usize, 2usize), (2, 1)] {
            let a = connection_matrix(&cfg, k, p).unwrap();
            let basis = cfg.index_set();
            let vals: Vec<Cx> = basis
                .iter()
                .map(|&idx| g_basis(&cfg, idx, u1, u2).unwrap())
                .collect();
            for (r, &row) in basis.iter().enumerate() {
                let exact = match row {
                    BasisIndex::Point { i, j } => {
                        (k == 1 && i != p) || (k == 2 && j != p)
                    }
                    BasisIndex::RowPM { i, .. } => k == 2 || i != p,
                    BasisIndex::ColPM { j, .. } => k == 1 || j != p,
                    BasisIndex::Corner { .. } => true,
                };
                if !exact {
                    continue;
                }
                let lhs = nabla_numeric(&cfg, k, p, row, u1, u2, h).unwrap();
                let rhs: Cx = (0..basis.len()).map(|c| a[(r, c)] * vals[c]).sum();
                assert!(
                    (lhs - rhs).norm() < 1e-6 * rhs.norm().max(1.0),
                    "k={k} p={p} row {row}: nabla {lhs} vs A.g {rhs}"
                );
            }
        }
    }

    #[test]
    fn flatness_defect_vanishes() {
        let cfg = sample(2, 1, 9);
        for (a, b) in [((1, 1), (1, 2)), ((1, 1), (2, 1)), ((1, 2), (2, 1))] {
            let res = flatness_residual(&cfg, a, b, 1e-5).unwrap();
            assert!(res < 1e-5, "directions {a:?}, {b:?}: residual {res:.3e}");
        }
    }

    #[test]
    fn flatness_defect_decays_quadratically() {
        let cfg = sample(1, 1, 10);
        let coarse = flatness_residual(&cfg, (1, 1), (2, 1), 1e-3).unwrap();
        let fine = flatness_residual(&cfg, (1, 1), (2, 1), 5e-4).unwrap();
        assert!(
            fine < 0.3 * coarse,
            "expected ~4x decay: h=1e-3 gives {coarse:.3e}, h=5e-4 gives {fine:.3e}"
        );
    }
}
