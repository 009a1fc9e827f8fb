//! Contour integration of `T(u) g(u)` over product cycles.
//!
//! `T` is multivalued, so every quadrature threads a [`BranchState`] that
//! carries one continuous logarithm per theta factor. Cycles are products of
//! one-variable contours; Pochhammer double commutators stand in for plain
//! paths so that no endpoint regularization is needed.

use crate::config::ProblemConfig;
use crate::connection::connection_matrix;
use crate::elliptic::{dist_to_lattice, theta1, DEFAULT_TOL, SINGULAR_DIST};
use crate::error::{Error, Result};
use crate::forms::g_basis_all;
use crate::{two_pi_i, Cx};
use nalgebra::DVector;

/// One theta factor of `T`: `theta1(a1 u1 + a2 u2 + shift)^coeff`.
#[derive(Debug, Clone)]
pub struct TFactor {
    pub coeff: Cx,
    pub a1: f64,
    pub a2: f64,
    pub shift: Cx,
}

impl TFactor {
    pub fn arg(&self, u1: Cx, u2: Cx) -> Cx {
        self.a1 * u1 + self.a2 * u2 + self.shift
    }
}

/// The theta factors of `T` for a given configuration, in a fixed order:
/// the two diagonal factors, then the `u1` points, then the `u2` points.
pub fn t_factors(cfg: &ProblemConfig) -> Vec<TFactor> {
    let mut f = vec![
        TFactor {
            coeff: cfg.c,
            a1: 1.0,
            a2: -1.0,
            shift: Cx::new(0.0, 0.0),
        },
        TFactor {
            coeff: cfg.c,
            a1: 1.0,
            a2: 1.0,
            shift: Cx::new(0.0, 0.0),
        },
    ];
    for i in 1..=cfg.n1() {
        f.push(TFactor {
            coeff: cfg.c_exp(1, i),
            a1: 1.0,
            a2: 0.0,
            shift: -cfg.t(1, i),
        });
    }
    for j in 1..=cfg.n2() {
        f.push(TFactor {
            coeff: cfg.c_exp(2, j),
            a1: 0.0,
            a2: 1.0,
            shift: -cfg.t(2, j),
        });
    }
    f
}

const MAX_BISECT: usize = 48;

/// A determination of `log T` at a point, transported continuously.
///
/// One continuous logarithm is stored per theta factor; transport requires
/// every factor's argument to rotate by less than `pi/2` per step and bisects
/// the step otherwise. A path that runs into a theta zero exhausts the
/// bisection budget and reports [`Error::BranchJump`].
#[derive(Debug, Clone)]
pub struct BranchState {
    pub u1: Cx,
    pub u2: Cx,
    factors: Vec<TFactor>,
    logs: Vec<Cx>,
}

impl BranchState {
    /// Principal branch of every factor logarithm at the base point.
    pub fn new(cfg: &ProblemConfig, u1: Cx, u2: Cx) -> Result<Self> {
        let factors = t_factors(cfg);
        let mut logs = Vec::new();
        for f in &factors {
            let v = f.arg(u1, u2);
            guard(v, &cfg.tau)?;
            let th = theta1(v, &cfg.tau, DEFAULT_TOL)?;
            logs.push(Cx::new(th.norm().ln(), th.arg()));
        }
        Ok(BranchState {
            u1,
            u2,
            factors,
            logs,
        })
    }

    /// Transport along the straight segment to `(u1, u2)`.
    pub fn advance(&mut self, cfg: &ProblemConfig, u1: Cx, u2: Cx) -> Result<()> {
        self.advance_inner(cfg, u1, u2, 0)
    }

    fn advance_inner(&mut self, cfg: &ProblemConfig, u1: Cx, u2: Cx, depth: usize) -> Result<()> {
        let mut steps: Vec<Cx> = Vec::with_capacity(self.factors.len());
        for (f, log) in self.factors.iter().zip(&self.logs) {
            let v = f.arg(u1, u2);
            guard(v, &cfg.tau)?;
            let th = theta1(v, &cfg.tau, DEFAULT_TOL)?;
            let ratio = th * (-log).exp();
            if ratio.arg().abs() >= std::f64::consts::FRAC_PI_2 {
                if depth >= MAX_BISECT {
                    return Err(Error::BranchJump);
                }
                let m1 = 0.5 * (self.u1 + u1);
                let m2 = 0.5 * (self.u2 + u2);
                self.advance_inner(cfg, m1, m2, depth + 1)?;
                return self.advance_inner(cfg, u1, u2, depth + 1);
            }
            steps.push(Cx::new(ratio.norm().ln(), ratio.arg()));
        }
        for (log, step) in self.logs.iter_mut().zip(steps) {
            *log += step;
        }
        self.u1 = u1;
        self.u2 = u2;
        Ok(())
    }

    /// Continuous logarithm of `T` at the current point.
    pub fn log_t(&self, cfg: &ProblemConfig) -> Cx {
        let mut acc = two_pi_i() * (cfg.c10 * self.u1 + cfg.c20 * self.u2);
        for (f, log) in self.factors.iter().zip(&self.logs) {
            acc += f.coeff * log;
        }
        acc
    }

    /// `T` at the current point on this branch.
    pub fn eval_t(&self, cfg: &ProblemConfig) -> Cx {
        self.log_t(cfg).exp()
    }

    /// Continuous logarithms of the theta factors, in [`t_factors`] order.
    pub fn factor_logs(&self) -> &[Cx] {
        &self.logs
    }
}

fn guard(v: Cx, tau: &crate::elliptic::ModularParam) -> Result<()> {
    let d = dist_to_lattice(v, tau);
    if d < SINGULAR_DIST {
        return Err(Error::NearSingular {
            what: "theta factor argument".into(),
            dist: d,
        });
    }
    Ok(())
}

/// A smooth parametrized piece of a contour, traversed for `s` in `[0, 1]`.
#[derive(Debug, Clone)]
pub enum Segment {
    Line {
        start: Cx,
        end: Cx,
    },
    /// Circular arc `center + radius e^{i theta}`, `theta` linear in `s`.
    /// `end_angle < start_angle` traverses clockwise.
    Arc {
        center: Cx,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

impl Segment {
    pub fn point(&self, s: f64) -> Cx {
        match *self {
            Segment::Line { start, end } => start + s * (end - start),
            Segment::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let th = start_angle + s * (end_angle - start_angle);
                center + radius * Cx::new(th.cos(), th.sin())
            }
        }
    }

    /// Derivative of `point` with respect to `s`.
    pub fn velocity(&self, s: f64) -> Cx {
        match *self {
            Segment::Line { start, end } => end - start,
            Segment::Arc {
                center: _,
                radius,
                start_angle,
                end_angle,
            } => {
                let th = start_angle + s * (end_angle - start_angle);
                let dth = end_angle - start_angle;
                radius * dth * Cx::new(-th.sin(), th.cos())
            }
        }
    }
}

/// A piecewise-smooth path in one variable.
#[derive(Debug, Clone)]
pub struct Contour {
    pub segments: Vec<Segment>,
}

impl Contour {
    /// Checks that consecutive segments (and, for a cycle, last to first)
    /// share endpoints.
    pub fn validate(&self, closed: bool) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Geometry("contour has no segments".into()));
        }
        for w in self.segments.windows(2) {
            if (w[0].point(1.0) - w[1].point(0.0)).norm() > 1e-12 {
                return Err(Error::Geometry("consecutive segments do not meet".into()));
            }
        }
        if closed {
            let first = self.segments[0].point(0.0);
            let last = self.segments.last().unwrap().point(1.0);
            if (first - last).norm() > 1e-12 {
                return Err(Error::Geometry("cycle does not close".into()));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> Cx {
        self.segments[0].point(0.0)
    }
}

/// Double-commutator loop around `a` and `b`: positively around `a`, then
/// `b`, then negatively around each, joined along the chord. Total winding
/// about each point is zero, so the loop closes in the local system without
/// endpoint regularization.
pub fn pochhammer(a: Cx, b: Cx, radius: f64) -> Result<Contour> {
    if radius <= 1e-3 {
        return Err(Error::Geometry(format!("radius {radius} too small")));
    }
    if (a - b).norm() <= 4.0 * radius {
        return Err(Error::Geometry(
            "pochhammer anchors closer than four radii".into(),
        ));
    }
    let dir = (b - a) / (b - a).norm();
    let pa = a + radius * dir; // circle exit toward b
    let pb = b - radius * dir; // circle exit toward a
    let ta = dir.arg();
    let tb = (-dir).arg();
    let quarter = std::f64::consts::FRAC_PI_2;
    // Full circles as quarter arcs: adaptive quadrature converges much
    // faster on short arcs.
    let circ = |center: Cx, t0: f64, ccw: bool| {
        let step = if ccw { quarter } else { -quarter };
        (0..4).map(move |n| Segment::Arc {
            center,
            radius,
            start_angle: t0 + n as f64 * step,
            end_angle: t0 + (n + 1) as f64 * step,
        })
    };
    let chord_ab = Segment::Line { start: pa, end: pb };
    let chord_ba = Segment::Line { start: pb, end: pa };
    let mut segments: Vec<Segment> = Vec::new();
    segments.extend(circ(a, ta, true));
    segments.push(chord_ab.clone());
    segments.extend(circ(b, tb, true));
    segments.push(chord_ba.clone());
    segments.extend(circ(a, ta, false));
    segments.push(chord_ab);
    segments.extend(circ(b, tb, false));
    segments.push(chord_ba);
    let contour = Contour { segments };
    contour.validate(true)?;
    Ok(contour)
}

/// Product of one-variable contours; the factors must keep `u1 +- u2` away
/// from the diagonals, which the caller arranges by cell placement.
#[derive(Debug, Clone)]
pub struct ProductCycle {
    pub gamma1: Contour,
    pub gamma2: Contour,
}

impl ProductCycle {
    pub fn validate(&self) -> Result<()> {
        self.gamma1.validate(true)?;
        self.gamma2.validate(true)
    }
}

// Gauss 7 / Kronrod 15 nodes on [-1, 1] (nonnegative half; symmetric).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

const MAX_QUAD_DEPTH: usize = 12;

/// Vector integrand sampled along one segment; the branch state is advanced
/// monotonically, so calls must come in increasing `s`.
type SegFn<'a> = dyn FnMut(&mut BranchState, Cx, Cx) -> Result<DVector<Cx>> + 'a;

/// Adaptive G7-K15 on one segment over `s in [a, b]`.
///
/// `state` enters at parameter `a` and leaves at `b`. The error estimate is
/// `|K15 - G7|` in the max norm, compared against `tol * max(1, |K15|)`.
fn quad_segment(
    cfg: &ProblemConfig,
    seg: &Segment,
    a: f64,
    b: f64,
    state: &mut BranchState,
    to_u: &dyn Fn(Cx) -> (Cx, Cx),
    f: &mut SegFn,
    dim: usize,
    tol: f64,
    depth: usize,
) -> Result<DVector<Cx>> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let entry = state.clone();
    // Kronrod nodes in ascending s order.
    let mut nodes: Vec<(f64, usize)> = Vec::with_capacity(15);
    for (i, x) in XGK.iter().enumerate() {
        nodes.push((mid - half * x, i));
        if *x != 0.0 {
            nodes.push((mid + half * x, i));
        }
    }
    nodes.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut k15 = DVector::from_element(dim, Cx::new(0.0, 0.0));
    let mut g7 = DVector::from_element(dim, Cx::new(0.0, 0.0));
    let mut ok = true;
    for &(s, i) in &nodes {
        let z = seg.point(s);
        let (u1, u2) = to_u(z);
        if let Err(e) = state.advance(cfg, u1, u2) {
            match e {
                Error::BranchJump | Error::NearSingular { .. } if depth < MAX_QUAD_DEPTH => {
                    ok = false;
                    break;
                }
                e => return Err(e),
            }
        }
        let val = f(state, z, seg.velocity(s))?;
        k15 += &val * Cx::new(WGK[i], 0.0);
        // Gauss nodes are the odd-index Kronrod nodes.
        if i % 2 == 1 {
            g7 += &val * Cx::new(WG[i / 2], 0.0);
        }
    }
    if ok {
        k15 *= Cx::new(half, 0.0);
        g7 *= Cx::new(half, 0.0);
        let err = (&k15 - &g7).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = k15.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if err <= tol * scale || depth >= MAX_QUAD_DEPTH {
            if err > tol * scale {
                return Err(Error::QuadratureFailure {
                    tol: tol * scale,
                    err,
                });
            }
            // Leave the state at the segment end.
            let (u1, u2) = to_u(seg.point(b));
            state.advance(cfg, u1, u2)?;
            return Ok(k15);
        }
    }
    *state = entry;
    let left = quad_segment(cfg, seg, a, mid, state, to_u, f, dim, tol, depth + 1)?;
    let right = quad_segment(cfg, seg, mid, b, state, to_u, f, dim, tol, depth + 1)?;
    Ok(left + right)
}

fn seg_same(a: &Segment, b: &Segment) -> bool {
    match (a, b) {
        (Segment::Line { start: s1, end: e1 }, Segment::Line { start: s2, end: e2 }) => {
            (s1 - s2).norm() < 1e-13 && (e1 - e2).norm() < 1e-13
        }
        (
            Segment::Arc {
                center: c1,
                radius: r1,
                start_angle: a1,
                end_angle: b1,
            },
            Segment::Arc {
                center: c2,
                radius: r2,
                start_angle: a2,
                end_angle: b2,
            },
        ) => {
            (c1 - c2).norm() < 1e-13
                && (r1 - r2).abs() < 1e-13
                && (a1 - a2).abs() < 1e-13
                && (b1 - b2).abs() < 1e-13
        }
        _ => false,
    }
}

/// Integrate a vector integrand along a full contour, threading `state`
/// from the contour start to its end.
///
/// The local system has rank one, so when a contour retraces a segment it
/// has already integrated (as every commutator loop does), the new
/// contribution is the recorded one scaled by the ratio of `T` at the
/// segment entry; only the branch transport is repeated.
fn quad_contour(
    cfg: &ProblemConfig,
    contour: &Contour,
    state: &mut BranchState,
    to_u: &dyn Fn(Cx) -> (Cx, Cx),
    f: &mut SegFn,
    dim: usize,
    tol: f64,
) -> Result<DVector<Cx>> {
    let n = contour.segments.len();
    let mut first = vec![0usize; n];
    for i in 0..n {
        first[i] = (0..i)
            .find(|&j| seg_same(&contour.segments[j], &contour.segments[i]))
            .unwrap_or(i);
    }
    let mut memo: Vec<Option<(Cx, DVector<Cx>)>> = vec![None; n];
    let mut acc = DVector::from_element(dim, Cx::new(0.0, 0.0));
    for (i, seg) in contour.segments.iter().enumerate() {
        let (u1, u2) = to_u(seg.point(0.0));
        state.advance(cfg, u1, u2)?;
        if let Some((entry_log, val)) = &memo[first[i]] {
            let ratio = (state.log_t(cfg) - entry_log).exp();
            acc += val * ratio;
            // Transport the branch across the segment without integrating.
            let steps = match seg {
                Segment::Line { .. } => 4,
                Segment::Arc { .. } => 12,
            };
            for k in 1..=steps {
                let (u1, u2) = to_u(seg.point(k as f64 / steps as f64));
                state.advance(cfg, u1, u2)?;
            }
        } else {
            let entry_log = state.log_t(cfg);
            let val = quad_segment(cfg, seg, 0.0, 1.0, state, to_u, f, dim, tol, 0)?;
            acc += &val;
            memo[i] = Some((entry_log, val));
        }
    }
    Ok(acc)
}

pub const QUAD_TOL: f64 = 1e-8;

/// All components `F_* = \iint T(u) g_*(u) du1 du2` over a product cycle,
/// in basis order. The branch is seeded with the principal determination at
/// `(gamma1.start, gamma2.start)`.
pub fn rw_integral(cfg: &ProblemConfig, cycle: &ProductCycle) -> Result<DVector<Cx>> {
    cycle.validate()?;
    let basis = cfg.index_set();
    let dim = basis.len();
    let base1 = cycle.gamma1.start();
    let base2 = cycle.gamma2.start();
    let mut outer_state = BranchState::new(cfg, base1, base2)?;
    let gamma1 = &cycle.gamma1;
    let mut outer = |state: &mut BranchState, z2: Cx, v2: Cx| -> Result<DVector<Cx>> {
        let mut inner_state = state.clone();
        let to_u1 = |z: Cx| (z, z2);
        let mut inner = |s: &mut BranchState, z1: Cx, v1: Cx| -> Result<DVector<Cx>> {
            let t = s.eval_t(cfg);
            Ok(g_basis_all(cfg, z1, z2)? * (t * v1))
        };
        let inner_val = quad_contour(cfg, gamma1, &mut inner_state, &to_u1, &mut inner, dim, QUAD_TOL)?;
        Ok(inner_val * v2)
    };
    let to_u2 = |z: Cx| (base1, z);
    quad_contour(
        cfg,
        &cycle.gamma2,
        &mut outer_state,
        &to_u2,
        &mut outer,
        dim,
        QUAD_TOL,
    )
}

/// Relative residual of `dF/dt_{kp} = A_{kp} F` by central differences.
///
/// The cycle is rebuilt for each perturbed configuration so anchors may
/// follow the moving point; `lambda` co-varies through the fixed `c_inf`.
pub fn verify_ode(
    cfg: &ProblemConfig,
    k: usize,
    p: usize,
    build: &dyn Fn(&ProblemConfig) -> Result<ProductCycle>,
    h: f64,
) -> Result<f64> {
    let f0 = rw_integral(cfg, &build(cfg)?)?;
    let t0 = cfg.t(k, p);
    let cfg_p = cfg.with_t(k, p, t0 + h);
    let cfg_m = cfg.with_t(k, p, t0 - h);
    let fp = rw_integral(&cfg_p, &build(&cfg_p)?)?;
    let fm = rw_integral(&cfg_m, &build(&cfg_m)?)?;
    let df = (fp - fm) / Cx::new(2.0 * h, 0.0);
    let a = connection_matrix(cfg, k, p)?;
    let resid = df - a * &f0;
    let num = resid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let den = f0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(num / den)
}

/// Period-shift multiplier of `T`: transport from `(u1, u2)` along the
/// straight segment to `(u1, u2) + (d1, d2)` and return `T_end / T_start`
/// on the transported branch.
pub fn period_multiplier(
    cfg: &ProblemConfig,
    u1: Cx,
    u2: Cx,
    d1: Cx,
    d2: Cx,
) -> Result<Cx> {
    let mut state = BranchState::new(cfg, u1, u2)?;
    let start = state.log_t(cfg);
    state.advance(cfg, u1 + d1, u2 + d2)?;
    Ok((state.log_t(cfg) - start).exp())
}
