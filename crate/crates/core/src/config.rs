//! Problem data: the modular parameter, the marked points `t_{kj}`, the
//! exponents, and the constants `c_{k infinity}` from which the local-system
//! parameters `lambda_1, lambda_2` are derived.
//!
//! `lambda` is never stored. Holding `c_{k infinity}` constant makes
//! `lambda_k` an affine function of the marked points, and every t-derivative
//! downstream must see that co-variation; deriving `lambda` on demand keeps
//! this automatic.

use crate::elliptic::{dist_to_lattice, ModularParam, SINGULAR_DIST};
use crate::Cx;
use rand::Rng;

/// Sign label used for the `H_+` / `H_-` hyperplanes and the `psi_{i +-}`,
/// `psi_{+- j}` basis forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    /// +1.0 or -1.0.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// `+z` or `-z`.
    pub fn apply(self, z: Cx) -> Cx {
        self.factor() * z
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

/// Element of the basis index set Psi. Indices `i`, `j` are 1-based, matching
/// the marked points `t_{1i}`, `t_{2j}`; `m` runs over the four half-period
/// intersection points of `H_+` and `H_-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisIndex {
    /// `psi_{ij}`, attached to `H_{1i} \cap H_{2j}`.
    Point { i: usize, j: usize },
    /// `psi_{i +-}`, attached to `H_{1i} \cap H_{+-}`.
    RowPM { i: usize, sign: Sign },
    /// `psi_{+- j}`, attached to `H_{+-} \cap H_{2j}`.
    ColPM { sign: Sign, j: usize },
    /// `psi_{+-,m}`, attached to `P_m \in H_+ \cap H_-`.
    Corner { m: usize },
}

impl std::fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisIndex::Point { i, j } => write!(f, "psi_{{{i},{j}}}"),
            BasisIndex::RowPM { i, sign } => write!(f, "psi_{{{i},{sign}}}"),
            BasisIndex::ColPM { sign, j } => write!(f, "psi_{{{sign},{j}}}"),
            BasisIndex::Corner { m } => write!(f, "psi_{{+-,{m}}}"),
        }
    }
}

/// Deterministic ordering of Psi: all `Point(i,j)` lexicographic in `(i,j)`,
/// then `RowPM(i,+), RowPM(i,-)` by `i`, then `ColPM(+,j), ColPM(-,j)` by
/// `j`, then `Corner(1..4)`.
pub fn psi_index_set(n1: usize, n2: usize) -> Vec<BasisIndex> {
    let mut out = Vec::with_capacity((n1 + 2) * (n2 + 2));
    for i in 1..=n1 {
        for j in 1..=n2 {
            out.push(BasisIndex::Point { i, j });
        }
    }
    for i in 1..=n1 {
        for sign in Sign::BOTH {
            out.push(BasisIndex::RowPM { i, sign });
        }
    }
    for j in 1..=n2 {
        for sign in Sign::BOTH {
            out.push(BasisIndex::ColPM { sign, j });
        }
    }
    for m in 1..=4 {
        out.push(BasisIndex::Corner { m });
    }
    out
}

/// `chi(M) = n1 n2 + 2 n1 + 2 n2 + 4 = (n1+2)(n2+2)`.
pub fn euler_characteristic(n1: usize, n2: usize) -> usize {
    n1 * n2 + 2 * n1 + 2 * n2 + 4
}

/// A named validation failure; violations are data, not errors.
#[derive(Debug, Clone)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

/// The full problem data; the single source of truth for all formulas.
/// Immutable after validation.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub tau: ModularParam,
    /// Marked points `t_{11}, ..., t_{1 n1}` (first variable).
    pub t1: Vec<Cx>,
    /// Marked points `t_{21}, ..., t_{2 n2}` (second variable).
    pub t2: Vec<Cx>,
    /// Common exponent of the `theta1(u1 -+ u2)` factors.
    pub c: Cx,
    pub c10: Cx,
    pub c20: Cx,
    /// Exponents `c_{1j}`.
    pub c1: Vec<Cx>,
    /// Exponents `c_{2j}`.
    pub c2: Vec<Cx>,
    /// The constants `c_{1 infinity}`, `c_{2 infinity}`.
    pub c1_inf: Cx,
    pub c2_inf: Cx,
}

impl ProblemConfig {
    pub fn n1(&self) -> usize {
        self.t1.len()
    }

    pub fn n2(&self) -> usize {
        self.t2.len()
    }

    /// Basis dimension `(n1+2)(n2+2)`.
    pub fn dim(&self) -> usize {
        euler_characteristic(self.n1(), self.n2())
    }

    /// Marked point `t_{kp}` (`k` in {1,2}, `p` 1-based).
    pub fn t(&self, k: usize, p: usize) -> Cx {
        match k {
            1 => self.t1[p - 1],
            2 => self.t2[p - 1],
            _ => panic!("k must be 1 or 2, got {k}"),
        }
    }

    /// Exponent `c_{kp}`.
    pub fn c_exp(&self, k: usize, p: usize) -> Cx {
        match k {
            1 => self.c1[p - 1],
            2 => self.c2[p - 1],
            _ => panic!("k must be 1 or 2, got {k}"),
        }
    }

    /// A copy with `t_{kp}` replaced. `c_{k infinity}` is untouched, so the
    /// derived `lambda_k` co-varies, exactly as the operator `nabla_{kp}`
    /// requires.
    pub fn with_t(&self, k: usize, p: usize, val: Cx) -> Self {
        let mut out = self.clone();
        match k {
            1 => out.t1[p - 1] = val,
            2 => out.t2[p - 1] = val,
            _ => panic!("k must be 1 or 2, got {k}"),
        }
        out
    }

    /// `lambda_k = -c_{k infinity} - c_{k0} tau - sum_j c_{kj} t_{kj}`.
    pub fn lambda(&self) -> (Cx, Cx) {
        let tau = self.tau.tau();
        let s1: Cx = self.c1.iter().zip(&self.t1).map(|(c, t)| c * t).sum();
        let s2: Cx = self.c2.iter().zip(&self.t2).map(|(c, t)| c * t).sum();
        (
            -self.c1_inf - self.c10 * tau - s1,
            -self.c2_inf - self.c20 * tau - s2,
        )
    }

    /// Half periods `w_1 = 0`, `w_2 = 1/2`, `w_3 = tau/2`, `w_4 = (1+tau)/2`.
    pub fn half_period(&self, m: usize) -> Cx {
        half_period(&self.tau, m)
    }

    /// `varpi_m`: 0 for m = 1, 2 and `-pi i` for m = 3, 4.
    pub fn varpi(&self, m: usize) -> Cx {
        match m {
            1 | 2 => Cx::new(0.0, 0.0),
            3 | 4 => -crate::pi_i(),
            _ => panic!("m must be in 1..=4, got {m}"),
        }
    }

    /// `lambda_1 -+ lambda_2` (`Plus` selects the minus combination, matching
    /// the `psi_{i +-}` displays).
    pub fn lambda1_mp2(&self, sign: Sign) -> Cx {
        let (l1, l2) = self.lambda();
        l1 - sign.apply(l2)
    }

    /// `lambda_2 -+ lambda_1`.
    pub fn lambda2_mp1(&self, sign: Sign) -> Cx {
        let (l1, l2) = self.lambda();
        l2 - sign.apply(l1)
    }

    pub fn index_set(&self) -> Vec<BasisIndex> {
        psi_index_set(self.n1(), self.n2())
    }

    /// Checks every structural invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let tau = &self.tau;
        if self.c1.len() != self.t1.len() || self.c2.len() != self.t2.len() {
            out.push(Violation {
                rule: "shape",
                detail: format!(
                    "exponent/point count mismatch: |c1|={} |t1|={} |c2|={} |t2|={}",
                    self.c1.len(),
                    self.t1.len(),
                    self.c2.len(),
                    self.t2.len()
                ),
            });
            return out;
        }
        if self.n1() < 1 || self.n2() < 1 {
            out.push(Violation {
                rule: "shape",
                detail: "need n1 >= 1 and n2 >= 1".to_string(),
            });
            return out;
        }

        // All marked points pairwise distinct on E.
        let all: Vec<(String, Cx)> = self
            .t1
            .iter()
            .enumerate()
            .map(|(i, &t)| (format!("t_{{1,{}}}", i + 1), t))
            .chain(
                self.t2
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| (format!("t_{{2,{}}}", j + 1), t)),
            )
            .collect();
        for a in 0..all.len() {
            for b in (a + 1)..all.len() {
                let d = dist_to_lattice(all[a].1 - all[b].1, tau);
                if d <= SINGULAR_DIST {
                    out.push(Violation {
                        rule: "distinct points",
                        detail: format!("{} - {} is within {d:.3e} of the lattice", all[a].0, all[b].0),
                    });
                }
            }
        }
        // t_{1i} + t_{2j} off the lattice.
        for (i, &a) in self.t1.iter().enumerate() {
            for (j, &b) in self.t2.iter().enumerate() {
                let d = dist_to_lattice(a + b, tau);
                if d <= SINGULAR_DIST {
                    out.push(Violation {
                        rule: "t1i + t2j off lattice",
                        detail: format!(
                            "t_{{1,{}}} + t_{{2,{}}} is within {d:.3e} of the lattice",
                            i + 1,
                            j + 1
                        ),
                    });
                }
            }
        }
        // Sum conditions 2c + sum_j c_{kj} = 0.
        for (k, cs) in [(1usize, &self.c1), (2usize, &self.c2)] {
            let s: Cx = 2.0 * self.c + cs.iter().sum::<Cx>();
            if s.norm() > 1e-12 {
                out.push(Violation {
                    rule: "sum condition",
                    detail: format!("2c + sum_j c_{{{k}j}} = {s} (|.| > 1e-12)"),
                });
            }
        }
        // Exponents off the integers.
        let mut check_exponent = |name: String, e: Cx| {
            let d = (e.re - e.re.round()).hypot(e.im);
            if d <= SINGULAR_DIST {
                out.push(Violation {
                    rule: "exponent in Z",
                    detail: format!("{name} = {e} is within {d:.3e} of an integer"),
                });
            }
        };
        check_exponent("c".to_string(), self.c);
        for (j, &e) in self.c1.iter().enumerate() {
            check_exponent(format!("c_{{1,{}}}", j + 1), e);
        }
        for (j, &e) in self.c2.iter().enumerate() {
            check_exponent(format!("c_{{2,{}}}", j + 1), e);
        }
        // lambda_1, lambda_2, lambda_1 +- lambda_2 off the lattice.
        let (l1, l2) = self.lambda();
        for (name, v) in [
            ("lambda_1", l1),
            ("lambda_2", l2),
            ("lambda_1 + lambda_2", l1 + l2),
            ("lambda_1 - lambda_2", l1 - l2),
        ] {
            let d = dist_to_lattice(v, tau);
            if d <= SINGULAR_DIST {
                out.push(Violation {
                    rule: "lambda off lattice",
                    detail: format!("{name} = {v} is within {d:.3e} of the lattice"),
                });
            }
        }
        out
    }
}

pub fn half_period(tau: &ModularParam, m: usize) -> Cx {
    let t = tau.tau();
    match m {
        1 => Cx::new(0.0, 0.0),
        2 => Cx::new(0.5, 0.0),
        3 => t / 2.0,
        4 => (t + 1.0) / 2.0,
        _ => panic!("m must be in 1..=4, got {m}"),
    }
}

/// Builds a random valid configuration. The `t_1` points land in the cell
/// region `E_00` and the `t_2` points in `E_11` (coordinates `x + y tau` with
/// `x, y` in `(0, 1/4)` resp. `(1/4, 1/2)`), the placement that keeps product
/// cycles away from `u_1 = +- u_2`. Exponents satisfy the sum conditions by
/// construction; the target `lambda` values are sampled and converted into
/// `c_{k infinity}`.
pub fn random_config<R: Rng>(n1: usize, n2: usize, tau: Cx, rng: &mut R) -> ProblemConfig {
    let tau = ModularParam::new(tau).expect("random_config: tau must be in the upper half plane");
    let t = tau.tau();
    loop {
        let cell = |rng: &mut R, lo: f64, hi: f64| -> Cx {
            let x = rng.gen_range(lo..hi);
            let y = rng.gen_range(lo..hi);
            Cx::new(x, 0.0) + y * t
        };
        let t1: Vec<Cx> = (0..n1).map(|_| cell(rng, 0.03, 0.22)).collect();
        let t2: Vec<Cx> = (0..n2).map(|_| cell(rng, 0.28, 0.47)).collect();
        let rand_cx = |rng: &mut R, scale: f64| -> Cx {
            Cx::new(
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
            )
        };
        let c = Cx::new(rng.gen_range(0.15..0.45), rng.gen_range(-0.2..0.2));
        let mut c1: Vec<Cx> = (0..n1).map(|_| rand_cx(rng, 0.4)).collect();
        let mut c2: Vec<Cx> = (0..n2).map(|_| rand_cx(rng, 0.4)).collect();
        let s1: Cx = c1.iter().take(n1 - 1).sum();
        c1[n1 - 1] = -2.0 * c - s1;
        let s2: Cx = c2.iter().take(n2 - 1).sum();
        c2[n2 - 1] = -2.0 * c - s2;
        let c10 = rand_cx(rng, 0.5);
        let c20 = rand_cx(rng, 0.5);
        // Sample target lambdas, then encode them through c_{k infinity}.
        let l1 = Cx::new(rng.gen_range(0.1..0.4), rng.gen_range(0.05..0.3) * t.im);
        let l2 = Cx::new(-rng.gen_range(0.1..0.4), -rng.gen_range(0.28..0.44) * t.im);
        let sum1: Cx = c1.iter().zip(&t1).map(|(c, t)| c * t).sum();
        let sum2: Cx = c2.iter().zip(&t2).map(|(c, t)| c * t).sum();
        let cfg = ProblemConfig {
            tau,
            t1,
            t2,
            c,
            c10,
            c20,
            c1,
            c2,
            c1_inf: -l1 - c10 * t - sum1,
            c2_inf: -l2 - c20 * t - sum2,
        };
        if cfg.validate().is_empty() {
            return cfg;
        }
    }
}
