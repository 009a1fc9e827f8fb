//! Acceptance suite: one test per criterion, each printing a pass/fail line.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rw_core::config::{psi_index_set, random_config, euler_characteristic, BasisIndex, ProblemConfig, Sign};
use rw_core::connection::{
    connection_matrix, flatness_residual, nabla_numeric, star_conjugate,
};
use rw_core::elliptic::{
    dist_to_lattice, rho, s_func, theta1, ModularParam, DEFAULT_TOL,
};
use rw_core::forms::{
    corner_table_residue, designated_residue, g_basis, residue_matrix,
};
use rw_core::identities::{run_suite, REL_TOL};
use rw_core::integrator::{pochhammer, verify_ode, ProductCycle};
use rw_core::{pi_i, two_pi_i, Cx};

fn report(criterion: &str, pass: bool) {
    println!(
        "acceptance: {criterion}: {}",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed");
}

fn sample(n1: usize, n2: usize, seed: u64) -> ProblemConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_config(n1, n2, Cx::new(0.0, 1.0), &mut rng)
}

fn rel(lhs: Cx, rhs: Cx) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(1.0)
}

#[test]
fn criterion_1_kernel_quasi_periodicity() {
    let mut worst = 0.0f64;
    for t in [Cx::new(0.0, 1.0), Cx::new(0.3, 1.2)] {
        let tau = ModularParam::new(t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cell = || -> Cx {
            Cx::new(rng.gen_range(0.0..1.0), 0.0) + rng.gen_range(0.0..1.0) * t
        };
        let mut n = 0;
        while n < 1000 {
            let (u, l) = (cell(), cell());
            let margin = 2e-3;
            let clear = [u, l, u - l, u + l]
                .iter()
                .all(|&a| dist_to_lattice(a, &tau) > margin);
            if !clear {
                continue;
            }
            n += 1;
            let th = |v: Cx| theta1(v, &tau, DEFAULT_TOL).unwrap();
            let rh = |v: Cx| rho(v, &tau, DEFAULT_TOL).unwrap();
            let sf = |v: Cx, l: Cx| s_func(v, l, &tau, DEFAULT_TOL).unwrap();
            for r in [
                rel(th(u + 1.0), -th(u)),
                rel(th(u + t), -(-pi_i() * (t + 2.0 * u)).exp() * th(u)),
                rel(th(-u), -th(u)),
                rel(rh(u + 1.0), rh(u)),
                rel(rh(u + t), rh(u) - two_pi_i()),
                rel(rh(-u), -rh(u)),
                rel(sf(u + 1.0, l), sf(u, l)),
                rel(sf(u + t, l), (two_pi_i() * l).exp() * sf(u, l)),
                rel(sf(-u, l), -sf(u, -l)),
            ] {
                worst = worst.max(r);
            }
        }
    }
    println!("  worst residual {worst:.3e}");
    report("1 kernel quasi-periodicity (2000 points, rel 1e-11)", worst < 1e-11);
}

#[test]
fn criterion_2_identity_suite() {
    let mut worst = 0.0f64;
    let mut worst_id = String::new();
    for (n1, n2, seed) in [(1, 1, 21), (2, 1, 22), (2, 3, 23)] {
        let cfg = sample(n1, n2, seed);
        for r in run_suite(&cfg, seed, 100).unwrap() {
            if r.max_residual > worst {
                worst = r.max_residual;
                worst_id = r.id.clone();
            }
        }
    }
    println!("  worst residual {worst:.3e} ({worst_id})");
    report("2 identity suite (100 samples x 3 configs, rel 1e-9)", worst < REL_TOL);
}

#[test]
fn criterion_3_residue_structure() {
    let cfg = sample(1, 1, 31);
    let rm = residue_matrix(&cfg);
    let mut worst_mm = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Cx::new(0.0, 0.0);
            for k in 0..4 {
                acc += rm.entries[i][k] * rm.inverse[k][j];
            }
            let want = if i == j { 1.0 } else { 0.0 };
            worst_mm = worst_mm.max((acc - want).norm());
        }
    }

    let basis = cfg.index_set();
    let mut worst_kron = 0.0f64;
    for &form in &basis {
        for &at in &basis {
            let r = designated_residue(&cfg, form, at).unwrap();
            let want = if form == at { 1.0 } else { 0.0 };
            worst_kron = worst_kron.max((r - want).norm());
        }
    }

    let (l1, _) = cfg.lambda();
    let special = (-two_pi_i() * l1).exp();
    let mut worst_table = 0.0f64;
    for m in 1..=4usize {
        let form = BasisIndex::Corner { m };
        let plus = corner_table_residue(&cfg, form, m, Sign::Plus).unwrap();
        let want = if m <= 2 { Cx::new(1.0, 0.0) } else { special };
        worst_table = worst_table.max((plus - want).norm() / want.norm());
        let minus = corner_table_residue(&cfg, form, m, Sign::Minus).unwrap();
        worst_table = worst_table.max((minus + 1.0).norm());
    }
    println!(
        "  M.M^-1 {worst_mm:.3e}, Kronecker {worst_kron:.3e}, table {worst_table:.3e}"
    );
    report(
        "3 residue structure (M.M^-1 1e-13, residues 1e-3)",
        worst_mm < 1e-13 && worst_kron < 1e-3 && worst_table < 1e-3,
    );
}

#[test]
fn criterion_4_pointwise_theorem_rows() {
    let cfg = sample(2, 1, 41);
    let tau = cfg.tau.clone();
    let t = tau.tau();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (u1, u2) = loop {
            let u1 = Cx::new(rng.gen_range(0.0..1.0), 0.0) + rng.gen_range(0.0..1.0) * t;
            let u2 = Cx::new(rng.gen_range(0.0..1.0), 0.0) + rng.gen_range(0.0..1.0) * t;
            let mut args = vec![u1 - u2, u1 + u2];
            for i in 1..=cfg.n1() {
                args.push(u1 - cfg.t(1, i));
            }
            for j in 1..=cfg.n2() {
                args.push(u2 - cfg.t(2, j));
            }
            if args.iter().all(|&a| dist_to_lattice(a, &tau) > 1e-2) {
                break (u1, u2);
            }
        };
        let basis = cfg.index_set();
        let vals: Vec<Cx> = basis
            .iter()
            .map(|&idx| g_basis(&cfg, idx, u1, u2).unwrap())
            .collect();
        for (k, p) in [(1usize, 1usize), (1, 2), (2, 1)] {
            // The mirror directions go through the star conjugation.
            let a = if k == 1 {
                connection_matrix(&cfg, k, p).unwrap()
            } else {
                star_conjugate(&cfg, p).unwrap()
            };
            for (r, &row) in basis.iter().enumerate() {
                let exact = match row {
                    BasisIndex::Point { i, j } => (k == 1 && i != p) || (k == 2 && j != p),
                    BasisIndex::RowPM { i, .. } => k == 2 || i != p,
                    BasisIndex::ColPM { j, .. } => k == 1 || j != p,
                    BasisIndex::Corner { .. } => true,
                };
                if !exact {
                    continue;
                }
                let lhs = nabla_numeric(&cfg, k, p, row, u1, u2, h).unwrap();
                let rhs: Cx = (0..basis.len()).map(|c| a[(r, c)] * vals[c]).sum();
                worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1.0));
            }
        }
    }
    println!("  worst residual {worst:.3e}");
    report("4 pointwise theorem rows (50 samples, 1e-6)", worst < 1e-6);
}

#[test]
fn criterion_5_flatness() {
    let mut worst = 0.0f64;
    for seed in 51..61u64 {
        let cfg = sample(2, 2, seed);
        let dirs = [(1usize, 1usize), (1, 2), (2, 1), (2, 2)];
        for a in 0..dirs.len() {
            for b in (a + 1)..dirs.len() {
                let r = flatness_residual(&cfg, dirs[a], dirs[b], 1e-5).unwrap();
                worst = worst.max(r);
            }
        }
    }
    // O(h^2) decay of the finite-difference defect on one representative pair.
    let cfg = sample(2, 2, 51);
    let coarse = flatness_residual(&cfg, (1, 1), (2, 2), 2e-3).unwrap();
    let fine = flatness_residual(&cfg, (1, 1), (2, 2), 1e-3).unwrap();
    let ratio = coarse / fine;
    println!("  worst residual {worst:.3e}, decay ratio {ratio:.2}");
    report(
        "5 flatness (10 configs at n1=n2=2, 1e-5, O(h^2) decay)",
        worst < 1e-5 && (3.0..5.0).contains(&ratio),
    );
}

#[test]
fn criterion_6_star_symmetry() {
    let mut worst = 0.0f64;
    for seed in 61..71u64 {
        let cfg = sample(2, 2, seed);
        for q in 1..=cfg.n2() {
            let direct = connection_matrix(&cfg, 2, q).unwrap();
            let conj = star_conjugate(&cfg, q).unwrap();
            let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = (&direct - &conj)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
    }
    println!("  worst entrywise deviation {worst:.3e}");
    report("6 star symmetry (10 configs, 1e-11)", worst < 1e-11);
}

#[test]
fn criterion_7_end_to_end_ode() {
    let cfg = sample(1, 1, 2);
    let build = |c: &ProblemConfig| {
        Ok(ProductCycle {
            gamma1: pochhammer(c.t(1, 1), c.t(1, 1) + Cx::new(1.0, 0.0), 0.08)?,
            gamma2: pochhammer(c.t(2, 1), c.t(2, 1) + Cx::new(1.0, 0.0), 0.08)?,
        })
    };
    let r1 = verify_ode(&cfg, 1, 1, &build, 1e-3).unwrap();
    let r2 = verify_ode(&cfg, 2, 1, &build, 1e-3).unwrap();
    let r2_coarse = verify_ode(&cfg, 2, 1, &build, 2e-3).unwrap();
    let ratio = r2_coarse / r2;
    println!("  residuals {r1:.3e} {r2:.3e}, decay ratio {ratio:.2}");
    report(
        "7 end-to-end ODE (two directions, 1e-3, O(h^2) decay)",
        r1 < 1e-3 && r2 < 1e-3 && (3.0..5.0).contains(&ratio),
    );
}

#[test]
fn criterion_8_dimension_bookkeeping() {
    let mut ok = true;
    for n1 in 1..=5usize {
        for n2 in 1..=5usize {
            let want = (n1 + 2) * (n2 + 2);
            ok &= psi_index_set(n1, n2).len() == want;
            ok &= euler_characteristic(n1, n2) == want;
        }
    }
    report("8 dimension bookkeeping (1..5 x 1..5)", ok);
}
