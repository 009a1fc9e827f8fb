//! Coefficient functions `g_*(u1, u2)` of the basis 2-forms
//! `psi_* = g_* du1 /\ du2`, the 4x4 residue matrix `M` tying the raw corner
//! forms to the Kronecker-normalized ones, duals (`lambda -> -lambda`), and
//! the diagonal cohomology intersection matrix.

use crate::config::{BasisIndex, ProblemConfig, Sign};
use crate::elliptic::{s_func, DEFAULT_TOL};
use crate::error::Result;
use crate::{two_pi_i, Cx};
use nalgebra::{DMatrix, DVector};

fn s(cfg: &ProblemConfig, u: Cx, lambda: Cx) -> Result<Cx> {
    s_func(u, lambda, &cfg.tau, DEFAULT_TOL)
}

/// `g_{ij} = s(u1 - t_{1i}; lambda_1) s(u2 - t_{2j}; lambda_2)`.
pub fn g_point(cfg: &ProblemConfig, i: usize, j: usize, u1: Cx, u2: Cx) -> Result<Cx> {
    let (l1, l2) = cfg.lambda();
    Ok(s(cfg, u1 - cfg.t(1, i), l1)? * s(cfg, u2 - cfg.t(2, j), l2)?)
}

/// `g_{i,+-} = +- s(u1 - t_{1i}; lambda_1 -+ lambda_2) s(u1 +- u2; +- lambda_2)`.
pub fn g_row_pm(cfg: &ProblemConfig, i: usize, sign: Sign, u1: Cx, u2: Cx) -> Result<Cx> {
    let (_, l2) = cfg.lambda();
    let a = s(cfg, u1 - cfg.t(1, i), cfg.lambda1_mp2(sign))?;
    let b = s(cfg, u1 + sign.apply(u2), sign.apply(l2))?;
    Ok(sign.factor() * a * b)
}

/// `g_{+-,j} = s(u1 +- u2; lambda_1) s(u2 - t_{2j}; lambda_2 -+ lambda_1)`.
pub fn g_col_pm(cfg: &ProblemConfig, sign: Sign, j: usize, u1: Cx, u2: Cx) -> Result<Cx> {
    let (l1, _) = cfg.lambda();
    let a = s(cfg, u1 + sign.apply(u2), l1)?;
    let b = s(cfg, u2 - cfg.t(2, j), cfg.lambda2_mp1(sign))?;
    Ok(a * b)
}

/// The raw corner form `psi'_{+-,m}` coefficient:
/// `-2 pref_m(u1) s(u1+u2; (lambda_1+lambda_2+2 w_m)/2) s(u1-u2; (lambda_1-lambda_2+2 w_m)/2)`
/// with `pref_m = e^{-2 pi i u1}` for m = 3, 4 and 1 otherwise.
pub fn g_corner_raw(cfg: &ProblemConfig, m: usize, u1: Cx, u2: Cx) -> Result<Cx> {
    let (l1, l2) = cfg.lambda();
    let shift = 2.0 * cfg.half_period(m);
    let a = s(cfg, u1 + u2, (l1 + l2 + shift) / 2.0)?;
    let b = s(cfg, u1 - u2, (l1 - l2 + shift) / 2.0)?;
    let pref = match m {
        1 | 2 => Cx::new(1.0, 0.0),
        3 | 4 => (-two_pi_i() * u1).exp(),
        _ => panic!("m must be in 1..=4, got {m}"),
    };
    Ok(-2.0 * pref * a * b)
}

/// The residue matrix `M` (rows indexed by the corner points `P_i`, columns
/// by the raw forms `psi'_{+-,j}`) and its exact inverse, both in terms of
/// `ell = e^{pi i (lambda_1 + lambda_2)}`.
#[derive(Debug, Clone)]
pub struct ResidueMatrix {
    pub entries: [[Cx; 4]; 4],
    pub inverse: [[Cx; 4]; 4],
    pub ell: Cx,
}

pub fn residue_matrix(cfg: &ProblemConfig) -> ResidueMatrix {
    let (l1, l2) = cfg.lambda();
    let ell = (crate::pi_i() * (l1 + l2)).exp();
    residue_matrix_from_ell(ell)
}

pub fn residue_matrix_from_ell(ell: Cx) -> ResidueMatrix {
    let one = Cx::new(1.0, 0.0);
    let li = 1.0 / ell;
    let entries = [
        [one, one, one, one],
        [one, one, -one, -one],
        [ell, -ell, ell, -ell],
        [ell, -ell, -ell, ell],
    ];
    let inverse = [
        [0.25 * one, 0.25 * one, 0.25 * li, 0.25 * li],
        [0.25 * one, 0.25 * one, -0.25 * li, -0.25 * li],
        [0.25 * one, -0.25 * one, 0.25 * li, -0.25 * li],
        [0.25 * one, -0.25 * one, -0.25 * li, 0.25 * li],
    ];
    ResidueMatrix {
        entries,
        inverse,
        ell,
    }
}

/// Kronecker-normalized corner form:
/// `(psi_{+-,1..4}) = (psi'_{+-,1..4}) . M^{-1}`, evaluated through the raw
/// forms rather than a re-derived closed form.
pub fn g_corner(cfg: &ProblemConfig, m: usize, u1: Cx, u2: Cx) -> Result<Cx> {
    assert!((1..=4).contains(&m), "m must be in 1..=4, got {m}");
    let inv = residue_matrix(cfg).inverse;
    let mut acc = Cx::new(0.0, 0.0);
    for k in 1..=4 {
        acc += g_corner_raw(cfg, k, u1, u2)? * inv[k - 1][m - 1];
    }
    Ok(acc)
}

/// Dispatch over the basis index set.
pub fn g_basis(cfg: &ProblemConfig, idx: BasisIndex, u1: Cx, u2: Cx) -> Result<Cx> {
    match idx {
        BasisIndex::Point { i, j } => g_point(cfg, i, j, u1, u2),
        BasisIndex::RowPM { i, sign } => g_row_pm(cfg, i, sign, u1, u2),
        BasisIndex::ColPM { sign, j } => g_col_pm(cfg, sign, j, u1, u2),
        BasisIndex::Corner { m } => g_corner(cfg, m, u1, u2),
    }
}

/// All basis coefficients at once, in `index_set` order. Shares the four raw
/// corner forms across the four corner components instead of recomputing them
/// per component, which matters inside quadrature loops.
pub fn g_basis_all(cfg: &ProblemConfig, u1: Cx, u2: Cx) -> Result<DVector<Cx>> {
    let inv = residue_matrix(cfg).inverse;
    let mut raw = [Cx::new(0.0, 0.0); 4];
    for k in 1..=4 {
        raw[k - 1] = g_corner_raw(cfg, k, u1, u2)?;
    }
    let idx = cfg.index_set();
    let mut out = DVector::from_element(idx.len(), Cx::new(0.0, 0.0));
    for (a, id) in idx.into_iter().enumerate() {
        out[a] = match id {
            BasisIndex::Corner { m } => {
                (0..4).map(|k| raw[k] * inv[k][m - 1]).sum()
            }
            other => g_basis(cfg, other, u1, u2)?,
        };
    }
    Ok(out)
}

/// Config copy whose derived `(lambda_1, lambda_2)` are the negatives of the
/// input's, obtained by adjusting `c_{k infinity}` only. All forms evaluated
/// on the result are the duals `psi_*^vee` (the `lambda -> -lambda`
/// substitution).
pub fn dual_config(cfg: &ProblemConfig) -> ProblemConfig {
    let tau = cfg.tau.tau();
    let mut out = cfg.clone();
    let x1: Cx = cfg.c10 * tau + cfg.c1.iter().zip(&cfg.t1).map(|(c, t)| c * t).sum::<Cx>();
    let x2: Cx = cfg.c20 * tau + cfg.c2.iter().zip(&cfg.t2).map(|(c, t)| c * t).sum::<Cx>();
    out.c1_inf = -cfg.c1_inf - 2.0 * x1;
    out.c2_inf = -cfg.c2_inf - 2.0 * x2;
    out
}

/// Diagonal cohomology intersection matrix in `psi_index_set` order:
/// `(2 pi i)^2 / (c_{1i} c_{2j})`, `(2 pi i)^2 / (c_{1i} c)`,
/// `(2 pi i)^2 / (c_{2j} c)`, `(2 pi i)^2 / c^2`.
pub fn intersection_matrix(cfg: &ProblemConfig) -> DMatrix<Cx> {
    let n = cfg.dim();
    let tp = two_pi_i() * two_pi_i();
    let mut out = DMatrix::from_element(n, n, Cx::new(0.0, 0.0));
    for (a, idx) in cfg.index_set().into_iter().enumerate() {
        out[(a, a)] = match idx {
            BasisIndex::Point { i, j } => tp / (cfg.c_exp(1, i) * cfg.c_exp(2, j)),
            BasisIndex::RowPM { i, .. } => tp / (cfg.c_exp(1, i) * cfg.c),
            BasisIndex::ColPM { j, .. } => tp / (cfg.c_exp(2, j) * cfg.c),
            BasisIndex::Corner { .. } => tp / (cfg.c * cfg.c),
        };
    }
    out
}

fn richardson(h1: f64, v1: Cx, h2: f64, v2: Cx) -> Cx {
    (h1 * v2 - h2 * v1) / (h1 - h2)
}

/// Neville polynomial extrapolation of the samples `(h_i, v_i)` to `h = 0`.
fn extrapolate_to_zero(h: &[f64], v: &[Cx]) -> Cx {
    let mut p = v.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..(n - level) {
            p[i] = (h[i] * p[i + 1] - h[i + level] * p[i]) / (h[i] - h[i + level]);
        }
    }
    p[0]
}

/// Numeric iterated residue: first a one-sided limit in `u1` at relative
/// offsets 1e-4 and 1e-5 (Richardson-extrapolated), then the same limit in
/// `u2` at the offsets `outer`.
///
/// `u1_of(u2, eps)` places `u1` at distance `eps` from the inner pole for the
/// given `u2`; `u2_center` is the outer pole location. `sep(delta)` is the
/// distance from the inner pole to its nearest neighbor when `u2` sits at
/// offset `delta`; the inner offsets are scaled by it so they always probe
/// the linear regime (for the corner points the `H_+` and `H_-` poles are
/// only `2 delta` apart, so fixed offsets would straddle the second pole).
pub fn numeric_iterated_residue<F>(
    g: F,
    u1_of: impl Fn(Cx, f64) -> Cx,
    u2_center: Cx,
    sep: impl Fn(f64) -> f64,
    outer: &[f64],
) -> Result<Cx>
where
    F: Fn(Cx, Cx) -> Result<Cx>,
{
    let inner = |u2: Cx, scale: f64| -> Result<Cx> {
        let (e1, e2) = (1e-4 * scale, 1e-5 * scale);
        let v1 = Cx::new(e1, 0.0) * g(u1_of(u2, e1), u2)?;
        let v2 = Cx::new(e2, 0.0) * g(u1_of(u2, e2), u2)?;
        Ok(richardson(e1, v1, e2, v2))
    };
    let mut vals = Vec::with_capacity(outer.len());
    for &d in outer {
        vals.push(Cx::new(d, 0.0) * inner(u2_center + d, sep(d).min(1.0))?);
    }
    Ok(extrapolate_to_zero(outer, &vals))
}

/// Outer offsets for separable poles.
pub const OUTER_OFFSETS: &[f64] = &[1e-4, 1e-5];
/// Outer offsets for the corner points, where the inner pole separation
/// shrinks with the outer offset and the near-singularity guard caps how
/// small the inner offsets may get; a third point buys back the accuracy the
/// larger offsets cost.
pub const OUTER_OFFSETS_CORNER: &[f64] = &[1e-2, 5e-3, 2.5e-3];

/// Iterated residue of the basis form `g_form` at the intersection point
/// designated by `at`, in the displayed order (residue along the first
/// variable's hyperplane first). Corner points use the representative
/// `(w_i, w_i)` reached through the residue along `u1 + u2 = 2 w_i`.
pub fn designated_residue(cfg: &ProblemConfig, form: BasisIndex, at: BasisIndex) -> Result<Cx> {
    let g = |u1: Cx, u2: Cx| g_basis(cfg, form, u1, u2);
    match at {
        BasisIndex::Point { i, j } => {
            let (a, b) = (cfg.t(1, i), cfg.t(2, j));
            numeric_iterated_residue(g, move |_, eps| a + eps, b, |_| 1.0, OUTER_OFFSETS)
        }
        BasisIndex::RowPM { i, sign } => {
            // both factors depend on u1: at outer offset d the H_+- pole sits
            // a distance d from the H_{1i} pole
            let a = cfg.t(1, i);
            numeric_iterated_residue(
                g,
                move |_, eps| a + eps,
                -sign.apply(a),
                |d| d,
                OUTER_OFFSETS_CORNER,
            )
        }
        BasisIndex::ColPM { sign, j } => {
            let b = cfg.t(2, j);
            numeric_iterated_residue(g, move |u2, eps| -sign.apply(u2) + eps, b, |_| 1.0, OUTER_OFFSETS)
        }
        BasisIndex::Corner { m } => {
            let w = cfg.half_period(m);
            numeric_iterated_residue(g, move |u2, eps| 2.0 * w - u2 + eps, w, |d| 2.0 * d, OUTER_OFFSETS_CORNER)
        }
    }
}

/// The appendix-table residues at the representative `(-w_m, w_m)`:
/// `Res_{u2=w_m}(Res_{u1=-u2} g)` when `diag` is `Plus` is the residue along
/// `u1 = -u2`; `Minus` selects `Res_{u2=w_m}(Res_{u1=u2} g)`.
pub fn corner_table_residue(
    cfg: &ProblemConfig,
    form: BasisIndex,
    m: usize,
    diag: Sign,
) -> Result<Cx> {
    let g = |u1: Cx, u2: Cx| g_basis(cfg, form, u1, u2);
    let w = cfg.half_period(m);
    match diag {
        Sign::Plus => numeric_iterated_residue(g, move |u2, eps| -u2 + eps, w, |d| 2.0 * d, OUTER_OFFSETS_CORNER),
        Sign::Minus => numeric_iterated_residue(g, move |u2, eps| u2 + eps, w, |d| 2.0 * d, OUTER_OFFSETS_CORNER),
    }
}
