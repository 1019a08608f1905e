use std::sync::Arc;

use qbd_potential::family::{delta_n, deltas, weight_at};
use qbd_potential::golden::{golden_blocks, golden_model, golden_norms, golden_pi_block};
use qbd_potential::invariant::{
    invariant_vector, normalize_truncated, potential_identity_residuals, stationarity_residual,
};
use qbd_potential::mop::{moments, monic_recurrence, orthogonality_check, MomentScalar};
use qbd_potential::potential::symmetrizer;
use qbd_potential::{
    check_symmetry_conditions, normalize, potential_coefficients, ratio, reconstruct, BlockTridiagonal, FamilyParams,
    Kind, Level, LevelGenerator, Mat, Rational, Scalar,
};

fn golden_params() -> FamilyParams<Rational> {
    FamilyParams::golden()
}

/// Monic `P̂_n` coefficients `c_0..c_n` from the block Hankel system
/// `Σ_j c_j S_{i+j} = 0`, `i < n`, with `c_n = I`.
fn hankel_monic(s: &[Mat<Rational>], n: usize) -> Vec<Mat<Rational>> {
    let k = s[0].rows();
    if n == 0 {
        return vec![Mat::identity(k)];
    }
    let size = n * k;
    let h = Mat::from_fn(size, size, |r, c| s[r / k + c / k].get(r % k, c % k).clone());
    let rhs = Mat::from_fn(k, size, |r, c| -s[n + c / k].get(r, c % k).clone());
    let x = &rhs * &h.inverse().unwrap();
    let mut out: Vec<Mat<Rational>> = (0..n)
        .map(|j| Mat::from_fn(k, k, |r, c| x.get(r, j * k + c).clone()))
        .collect();
    out.push(Mat::identity(k));
    out
}

#[test]
fn monic_recurrence_matches_hankel_oracle() {
    let w = golden_params().weight_spec();
    let s = moments(&w, 11).unwrap();
    let fam = monic_recurrence(&s, 4).unwrap();
    let polys: Vec<_> = (0..=5).map(|n| hankel_monic(&s, n)).collect();
    let norm = |n: usize| {
        polys[n]
            .iter()
            .enumerate()
            .fold(Mat::zeros(2, 2), |acc, (j, c)| &acc + &(c * &s[j + n]))
    };
    for n in 0..=4 {
        assert_eq!(fam.norms[n], norm(n), "h_{n}");
        let lower = if n == 0 {
            Mat::zeros(2, 2)
        } else {
            polys[n][n - 1].clone()
        };
        assert_eq!(fam.beta[n], &lower - &polys[n + 1][n], "β_{n}");
        if n > 0 {
            assert_eq!(fam.gamma[n], &norm(n) * &norm(n - 1).inverse().unwrap(), "γ_{n}");
        }
    }
}

#[test]
fn golden_moment_zero() {
    let s = moments(&golden_params().weight_spec(), 0).unwrap();
    assert_eq!(
        s[0],
        qbd_potential::matrix::mat_from_ratios(&[&[(2, 3), (1, 4)], &[(1, 4), (1, 6)]])
    );
}

#[test]
fn float_and_exact_moments_agree() {
    let exact = moments(&golden_params().weight_spec(), 10).unwrap();
    let float = moments(&FamilyParams::<f64>::golden().weight_spec(), 10).unwrap();
    for (e, f) in exact.iter().zip(&float) {
        assert!(e.map(|v| v.to_f64()).max_abs_diff(f) < 1e-14);
    }
}

#[test]
fn float_pipeline_agrees_with_closed_forms() {
    let rec = reconstruct(&FamilyParams::<f64>::golden(), 8).unwrap();
    for n in 0..=8 {
        let g = golden_blocks::<f64>(n);
        assert!(rec.normalized.a[n].max_abs_diff(&g.a) < 1e-12, "A_{n}");
        assert!(rec.normalized.b[n].max_abs_diff(&g.b) < 1e-12, "B_{n}");
        if let Some(c) = g.c {
            assert!(rec.normalized.c[n].max_abs_diff(&c) < 1e-12, "C_{n}");
        }
        assert!(
            rec.normalized.norms[n].max_abs_diff(&golden_norms(n)) < 1e-12,
            "norm {n}"
        );
    }
}

#[test]
fn potentials_equal_inverse_norms() {
    let rec = reconstruct(&golden_params(), 10).unwrap();
    let w = golden_params().weight_spec();
    let s0 = &moments(&w, 0).unwrap()[0];
    let l0 = &rec.normalized.lambda0;
    assert_eq!(rec.pi0, (&(l0 * s0) * &l0.transpose()).inverse().unwrap());
    let ps = potential_coefficients(&rec.model, &rec.pi0, 10).unwrap();
    for n in 0..=10 {
        assert_eq!(ps.get(n), &rec.normalized.norms[n].inverse().unwrap(), "n={n}");
    }
    assert!(check_symmetry_conditions(&rec.model, &ps).passed());
}

#[test]
fn potential_spot_value_at_level_one() {
    let model = golden_model::<Rational>(2).unwrap();
    let pi0 = golden_norms::<Rational>(0).inverse().unwrap();
    let ps = potential_coefficients(&model, &pi0, 1).unwrap();
    let e = [ratio(1, 1), ratio(1, 1)];
    assert_eq!(ps.get(1).mul_vec(&e), vec![ratio(165240, 55097), ratio(112560, 55097)]);
}

#[test]
fn potential_identities_hold_exactly() {
    let model = golden_model::<Rational>(12).unwrap();
    let ps = potential_coefficients(&model, &golden_norms::<Rational>(0).inverse().unwrap(), 11).unwrap();
    assert!(potential_identity_residuals(&model, &ps)
        .iter()
        .all(|r| *r == ratio(0, 1)));
    let pi = invariant_vector(&ps).unwrap();
    let res = stationarity_residual(&model, pi.as_level_vector(), 10).unwrap();
    assert!(res.iter().all(|r| *r == ratio(0, 1)));
}

#[test]
fn continuous_time_variant_has_zero_residual() {
    let gen: LevelGenerator<Rational> = Arc::new(|n| {
        let g = golden_blocks::<Rational>(n);
        Level::new(&g.b - &Mat::identity(2), Some(g.a), g.c)
    });
    let model = BlockTridiagonal::generated(2, Kind::Continuous, 15, gen).unwrap();
    let ps = potential_coefficients(&model, &golden_norms::<Rational>(0).inverse().unwrap(), 14).unwrap();
    assert!(check_symmetry_conditions(&model, &ps).passed());
    let pi = invariant_vector(&ps).unwrap();
    let res = stationarity_residual(&model, pi.as_level_vector(), 14).unwrap();
    assert!(res.iter().all(|r| *r == ratio(0, 1)));
    assert!(potential_identity_residuals(&model, &ps)
        .iter()
        .all(|r| *r == ratio(0, 1)));
}

#[test]
fn perturbed_diagonal_block_breaks_first_condition_at_level_one() {
    let eps = ratio(1, 1000);
    let gen: LevelGenerator<Rational> = Arc::new(move |n| {
        let g = golden_blocks::<Rational>(n);
        let mut b = g.b;
        if n == 1 {
            let (b00, b01) = (b.get(0, 0).clone(), b.get(0, 1).clone());
            b.set(0, 0, b00 + eps.clone());
            b.set(0, 1, b01 - eps.clone());
        }
        Level::new(b, Some(g.a), g.c)
    });
    let model = BlockTridiagonal::generated(2, Kind::Discrete, 6, gen).unwrap();
    let ps = potential_coefficients(&model, &golden_norms::<Rational>(0).inverse().unwrap(), 5).unwrap();
    let report = check_symmetry_conditions(&model, &ps);
    assert_eq!(report.first_failure(), Some(1));
    assert!(!report.levels[1].diagonal_ok);
    assert!(report.levels.iter().all(|l| l.off_diagonal_ok));
    let pi = invariant_vector(&ps).unwrap();
    let res = stationarity_residual(&model, pi.as_level_vector(), 5).unwrap();
    assert!(res[1] != ratio(0, 1));
}

#[test]
fn wrong_seed_is_rejected() {
    let model = golden_model::<Rational>(4).unwrap();
    let err = potential_coefficients(&model, &Mat::identity(2), 3).unwrap_err();
    assert!(matches!(
        err,
        qbd_potential::PotentialError::Asymmetric { level: 1, .. }
    ));
}

#[test]
fn golden_truncation_is_stochastic() {
    let model = golden_model::<Rational>(4).unwrap();
    let p = model.truncate_lumped(3).unwrap();
    assert_eq!(p.shape(), (8, 8));
    assert!(p.row_sums().iter().all(|s| *s == ratio(1, 1)));
}

#[test]
fn golden_level_zero_normalized() {
    let model = golden_model::<Rational>(1).unwrap();
    let ps = potential_coefficients(&model, &golden_norms::<Rational>(0).inverse().unwrap(), 0).unwrap();
    let pi = invariant_vector(&ps).unwrap();
    assert_eq!(
        normalize_truncated(pi.as_level_vector(), 0).unwrap(),
        vec![ratio(27, 31), ratio(4, 31)]
    );
}

#[test]
fn golden_symmetrizer_reconstructs() {
    let pi0 = golden_norms::<f64>(0).inverse().unwrap();
    let r = symmetrizer(&pi0).unwrap();
    assert!((&r.transpose() * &r).max_abs_diff(&pi0) < 1e-12);
}

#[test]
fn golden_blocks_positive_through_fifty() {
    for n in 0..=50 {
        let g = golden_blocks::<Rational>(n);
        assert!(
            g.a.entries().iter().chain(g.b.entries()).all(|v| *v > ratio(0, 1)),
            "n={n}"
        );
        if let Some(c) = g.c {
            assert!(c.entries().iter().all(|v| *v > ratio(0, 1)), "n={n}");
        }
    }
}

#[test]
fn golden_invariant_vector_matches_closed_form() {
    let model = golden_model::<Rational>(11).unwrap();
    let ps = potential_coefficients(&model, &golden_norms::<Rational>(0).inverse().unwrap(), 10).unwrap();
    let pi = invariant_vector(&ps).unwrap();
    for n in 0..=10 {
        assert_eq!(pi.block(n), &golden_pi_block::<Rational>(n)[..]);
    }
}

#[test]
fn orthogonality_small_degrees() {
    let n = normalize(&FamilyParams::<f64>::golden(), 1).unwrap();
    let t = orthogonality_check(&n.normalized, &n.weight, 1).unwrap();
    assert!(t.residuals[0][0] < 1e-13);
    assert!(t.residuals[0][1] < 1e-12);
}

#[test]
fn negative_exponents_run_on_float_backend() {
    let p = FamilyParams::new(-0.5, -0.5, 0.25).unwrap();
    let n = normalize(&p, 6).unwrap();
    let t = orthogonality_check(&n.normalized, &n.weight, 6).unwrap();
    assert!(t.max() < 1e-10, "{}", t.max());
    assert!(Rational::monic_family(
        &FamilyParams::new(ratio(-1, 2), ratio(0, 1), ratio(1, 4))
            .unwrap()
            .weight_spec(),
        1
    )
    .is_err());
}

#[test]
fn delta_matrices_normalize_at_one() {
    let p = FamilyParams::new(ratio(1, 1), ratio(3, 1), ratio(5, 2)).unwrap();
    let n = normalize(&p, 4).unwrap();
    let q = qbd_potential::mop::evaluate_q(&n.normalized, &ratio(1, 1), 4).unwrap();
    let e = [ratio(1, 1), ratio(1, 1)];
    for qn in q {
        assert_eq!(qn.mul_vec(&e), e.to_vec());
    }
    assert_eq!(deltas(&p, 3).unwrap()[2], delta_n(&p, 2).unwrap());
    assert!(weight_at(&p, &ratio(1, 3)).unwrap().is_positive_definite());
}
