//! Acceptance suite: one line per criterion, non-zero exit when any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use qbd_potential::golden::{golden_blocks, golden_model, golden_norms, golden_pi_block};
use qbd_potential::invariant::{brute_force_invariant, compare_with_oracle, invariant_vector, stationarity_residual};
use qbd_potential::mop::{evaluate_q, orthogonality_check};
use qbd_potential::{
    check_symmetry_conditions, normalize, potential_coefficients, ratio, reconstruct, BlockTridiagonal, FamilyParams,
    Kind, Level, LevelGenerator, Mat, Rational, Reconstruction,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))?;
    Ok(t)
}

fn golden_pipeline(n_max: usize) -> Result<Reconstruction<Rational>, String> {
    reconstruct(&FamilyParams::<Rational>::golden(), n_max).map_err(|e| e.to_string())
}

fn golden_potentials(
    levels: usize,
) -> Result<(BlockTridiagonal<Rational>, qbd_potential::PotentialSequence<Rational>), String> {
    let model = golden_model::<Rational>(levels).map_err(|e| e.to_string())?;
    let pi0 = golden_norms::<Rational>(0).inverse().map_err(|e| e.to_string())?;
    let ps = potential_coefficients(&model, &pi0, levels - 1).map_err(|e| e.to_string())?;
    Ok((model, ps))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rec = golden_pipeline(10)?;
    for n in 0..=10 {
        let g = golden_blocks::<Rational>(n);
        let fam = &rec.normalized;
        ensure(fam.a[n] == g.a, || format!("A_{n} differs"))?;
        ensure(fam.b[n] == g.b, || format!("B_{n} differs"))?;
        if let Some(c) = &g.c {
            ensure(&fam.c[n] == c, || format!("C_{n} differs"))?;
        }
        ensure(fam.norms[n] == golden_norms(n), || format!("‖Q_{n}‖² differs"))?;
    }
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("A_n, B_n, C_n, ‖Q_n‖² exact for n = 0..10 in {t:.2?}"))
}

fn criterion_2() -> Outcome {
    let e = [ratio(1, 1), ratio(1, 1)];
    let (_, ps) = golden_potentials(21)?;
    for n in 0..=20 {
        let from_norms = golden_norms::<Rational>(n)
            .inverse()
            .map_err(|e| e.to_string())?
            .mul_vec(&e);
        let expected = golden_pi_block::<Rational>(n).to_vec();
        ensure(from_norms == expected, || format!("(‖Q_{n}‖²)⁻¹e differs"))?;
        ensure(ps.get(n).mul_vec(&e) == expected, || {
            format!("Π_{n} e from the recursion differs")
        })?;
    }
    let rec = golden_pipeline(1)?;
    let spot = |n: usize| {
        rec.normalized.norms[n]
            .inverse()
            .map(|m| m.mul_vec(&e))
            .map_err(|e| e.to_string())
    };
    ensure(spot(0)? == vec![ratio(648, 217), ratio(96, 217)], || {
        "n = 0 spot value".into()
    })?;
    ensure(spot(1)? == vec![ratio(165240, 55097), ratio(112560, 55097)], || {
        "n = 1 spot value".into()
    })?;
    Ok("(‖Q_n‖²)⁻¹e exact for n = 0..20; spot values at n = 0, 1".into())
}

fn criterion_3() -> Outcome {
    let (model, ps) = golden_potentials(50)?;
    let pi = invariant_vector(&ps).map_err(|e| e.to_string())?;
    let res = stationarity_residual(&model, pi.as_level_vector(), 49).map_err(|e| e.to_string())?;
    ensure(res.iter().all(|r| *r == ratio(0, 1)), || {
        "non-zero exact residual".into()
    })?;

    let fmodel = golden_model::<f64>(50).map_err(|e| e.to_string())?;
    let fpi0 = golden_norms::<f64>(0).inverse().map_err(|e| e.to_string())?;
    let fps = potential_coefficients(&fmodel, &fpi0, 49).map_err(|e| e.to_string())?;
    let fpi = invariant_vector(&fps).map_err(|e| e.to_string())?;
    let fres = stationarity_residual(&fmodel, fpi.as_level_vector(), 49).map_err(|e| e.to_string())?;
    let worst = fres.iter().cloned().fold(0.0, f64::max);
    ensure(worst < 1e-10, || format!("float residual {worst:e}"))?;
    Ok(format!("exact residual 0 on levels 0..48; float residual {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let model = golden_model::<Rational>(51).map_err(|e| e.to_string())?;
    for n in 0..=50 {
        let mut sums = (model.b(n) + model.a(n)).row_sums();
        if n > 0 {
            sums = sums.iter().zip(model.c(n).row_sums()).map(|(s, c)| s + c).collect();
        }
        ensure(sums.iter().all(|s| *s == ratio(1, 1)), || {
            format!("row sums at level {n}")
        })?;
    }
    let rec = golden_pipeline(20)?;
    let qs = evaluate_q(&rec.normalized, &ratio(1, 1), 20).map_err(|e| e.to_string())?;
    let e = [ratio(1, 1), ratio(1, 1)];
    for (n, q) in qs.iter().enumerate() {
        ensure(q.mul_vec(&e) == e.to_vec(), || format!("Q_{n}(1)e ≠ e"))?;
    }
    Ok("row sums 1 for n ≤ 50; Q_n(1)e = e for n ≤ 20".into())
}

fn criterion_5() -> Outcome {
    let (model, ps) = golden_potentials(22)?;
    let truncated = qbd_potential::PotentialSequence {
        pi0: ps.pi0.clone(),
        items: ps.items[..21].to_vec(),
    };
    let report = check_symmetry_conditions(&model, &truncated);
    ensure(report.passed(), || {
        format!("fails at level {:?}", report.first_failure())
    })?;
    ensure(report.max_residual() == ratio(0, 1), || "non-zero residual".into())?;
    ensure(report.levels.len() == 22, || "coverage".into())?;
    for n in 0..=20 {
        let (h, h1) = (golden_norms::<Rational>(n), golden_norms::<Rational>(n + 1));
        let g = golden_blocks::<Rational>(n);
        let c1 = golden_blocks::<Rational>(n + 1).c.expect("n + 1 > 0");
        ensure(&g.b * &h == &h * &g.b.transpose(), || format!("B_{n}‖Q_{n}‖² identity"))?;
        ensure(&h * &c1.transpose() == &g.a * &h1, || {
            format!("‖Q_{n}‖²C_{}ᵀ identity", n + 1)
        })?;
    }
    Ok("both symmetry conditions and both norm identities exact for n ≤ 20".into())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let model = golden_model::<f64>(401).map_err(|e| e.to_string())?;
    let pi0 = golden_norms::<f64>(0).inverse().map_err(|e| e.to_string())?;
    let ps = potential_coefficients(&model, &pi0, 5).map_err(|e| e.to_string())?;
    let pi = invariant_vector(&ps).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for l in [100, 200, 400] {
        let oracle = brute_force_invariant(&model, l).map_err(|e| e.to_string())?;
        let cmp = compare_with_oracle(pi.as_level_vector(), &oracle, 6).map_err(|e| e.to_string())?;
        errors.push(cmp.max_relative_error);
    }
    ensure(errors.windows(2).all(|w| w[1] < w[0]), || {
        format!("not decreasing: {errors:?}")
    })?;
    ensure(errors[2] < 5e-2, || format!("error at L = 400 is {:e}", errors[2]))?;
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "max relative error {:.2e} / {:.2e} / {:.2e} at L = 100/200/400 in {t:.2?}",
        errors[0], errors[1], errors[2]
    ))
}

fn criterion_7() -> Outcome {
    let mut worst = Vec::new();
    for (a, b, k) in [(0.0, 0.0, 0.5), (1.0, 2.0, 0.5), (0.5, 1.5, 1.0)] {
        let p = FamilyParams::new(a, b, k).map_err(|e| e.to_string())?;
        let rec = normalize(&p, 8).map_err(|e| e.to_string())?;
        let table = orthogonality_check(&rec.normalized, &rec.weight, 8).map_err(|e| e.to_string())?;
        let m = table.max();
        ensure(m < 1e-10, || format!("({a}, {b}, {k}): residual {m:e}"))?;
        worst.push(m);
    }
    Ok(format!(
        "max residual {:.1e} / {:.1e} / {:.1e} for n, m ≤ 8",
        worst[0], worst[1], worst[2]
    ))
}

fn criterion_8() -> Outcome {
    let n = 10_000usize;
    let [p1, p2] = golden_pi_block::<f64>(n);
    let (r1, r2) = (p1 / n as f64, p2 / n as f64);
    ensure((r1 - 1.0).abs() < 0.05 && (r2 - 1.0).abs() < 0.05, || {
        format!("ratios {r1}, {r2}")
    })?;
    let [e1, e2] = golden_pi_block::<Rational>(n);
    let exact1 = qbd_potential::Scalar::to_f64(&e1) / n as f64;
    let exact2 = qbd_potential::Scalar::to_f64(&e2) / n as f64;
    ensure((exact1 - r1).abs() < 1e-12 && (exact2 - r2).abs() < 1e-12, || {
        "float and exact disagree".into()
    })?;
    Ok(format!("π₁ⁿ/n = {r1:.6}, π₂ⁿ/n = {r2:.6} at n = 10⁴"))
}

fn walk(levels: usize, p: Rational, q: Rational) -> BlockTridiagonal<Rational> {
    let gen: LevelGenerator<Rational> = Arc::new(move |n| {
        let one = |v: Rational| Mat::from_vec(1, 1, vec![v]);
        let down = if n == 0 { ratio(0, 1) } else { q.clone() };
        Level::new(
            one(ratio(1, 1) - p.clone() - down),
            Some(one(p.clone())),
            (n > 0).then(|| one(q.clone())),
        )
    });
    BlockTridiagonal::generated(1, Kind::Discrete, levels, gen).expect("valid walk")
}

fn criterion_9() -> Outcome {
    let (p, q) = (ratio(2, 7), ratio(3, 7));
    let bd = walk(12, p.clone(), q.clone());
    let ps = potential_coefficients(&bd, &Mat::identity(1), 11).map_err(|e| e.to_string())?;
    let mut classical = ratio(1, 1);
    for n in 0..=11 {
        ensure(ps.get(n).get(0, 0) == &classical, || {
            format!("birth-death coefficient at {n}")
        })?;
        classical = classical * p.clone() / q.clone();
    }
    let half = ratio(1, 2);
    let sym = walk(12, half.clone(), half);
    let ps = potential_coefficients(&sym, &Mat::identity(1), 11).map_err(|e| e.to_string())?;
    let pi = invariant_vector(&ps).map_err(|e| e.to_string())?;
    ensure(pi.blocks().iter().all(|b| b[0] == ratio(1, 1)), || {
        "measure not constant".into()
    })?;
    for l in [2usize, 5, 10] {
        let x = brute_force_invariant(&sym, l).map_err(|e| e.to_string())?;
        ensure(x.iter().all(|v| *v == ratio(1, l as i64 + 1)), || {
            format!("brute force at L = {l}")
        })?;
    }
    Ok("birth-death coefficients, constant measure, brute force 1/(L+1) exact".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("golden reconstruction", criterion_1),
        ("invariant formula", criterion_2),
        ("stationarity", criterion_3),
        ("stochasticity and normalization", criterion_4),
        ("symmetry conditions", criterion_5),
        ("oracle convergence", criterion_6),
        ("float orthogonality", criterion_7),
        ("asymptotics", criterion_8),
        ("scalar degeneration", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
