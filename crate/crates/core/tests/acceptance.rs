//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::{Duration, Instant};

use privacy_bounds::bounds::{
    bound_report, epsilon2, lower_h1, relaxation_limit, thresholds, upper_g1, upper_h2, BoundName,
    Regime,
};
use privacy_bounds::info::{
    conditional_entropy, joint_product_tv, leakage_measures, mutual_information_of, validate_joint,
    Direction,
};
use privacy_bounds::linalg::Matrix;
use privacy_bounds::lp::lower_bound_g;
use privacy_bounds::mechanisms::{efrl_construct, verify_mechanism};
use privacy_bounds::oracle::{oracle_g, sandwich_check, OracleBudget, GRID_SLACK};
use privacy_bounds::{Criterion, Joint, LogBase, Mechanism, MechanismKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn example_one() -> Joint {
    validate_joint(&[
        vec![0.693, 0.027, 0.108, 0.072],
        vec![0.006, 0.085, 0.004, 0.005],
    ])
    .unwrap()
}

fn example_two() -> Joint {
    validate_joint(&[
        vec![0.350, 0.025, 0.085, 0.040],
        vec![0.025, 0.425, 0.035, 0.015],
    ])
    .unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..nx)
        .map(|_| (0..ny).map(|_| rng.gen_range(0.02..1.0)).collect())
        .collect();
    let total: f64 = rows.iter().flatten().sum();
    rows.iter()
        .map(|r| r.iter().map(|v| v / total).collect())
        .collect()
}

/// Random full-rank instances with a nonempty set of valid index sets.
fn random_instances(seed: u64, count: usize, shapes: &[(usize, usize)]) -> Vec<Joint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let (nx, ny) = shapes[out.len() % shapes.len()];
        let Ok(j) = validate_joint(&random_rows(&mut rng, nx, ny)) else {
            continue;
        };
        if epsilon2(&j).is_ok() {
            out.push(j);
        }
    }
    out
}

fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect()
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (j, expected) in [(example_one(), 0.0341), (example_two(), 0.1994)] {
        let t = Instant::now();
        let e2 = epsilon2(&j).unwrap().epsilon2;
        let elapsed = t.elapsed();
        pass &= (e2 - expected).abs() <= 5e-4 && elapsed < Duration::from_secs(1);
        notes.push(format!("eps2={e2:.6} (want {expected}) in {elapsed:?}"));
    }
    Outcome::new(pass, notes.join("; "))
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (j, half, root) in [
        (example_one(), 0.0171, 0.0121),
        (example_two(), 0.0997, 0.0705),
    ] {
        let t = thresholds(&j);
        let h = t.half_epsilon2.unwrap_or(f64::NAN);
        let r = t.half_epsilon2_over_sqrt_x.unwrap_or(f64::NAN);
        pass &= (h - half).abs() <= 5e-4 && (r - root).abs() <= 5e-4;
        notes.push(format!("{h:.5}/{r:.5} (want {half}/{root})"));
    }
    Outcome::new(pass, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();

    let j = example_one();
    let e2 = epsilon2(&j).unwrap().epsilon2;
    let grid = linspace(0.0, 1.2 * e2, 121);
    let mut compared = 0;
    for r in bound_report(&j, &grid).unwrap() {
        let uh2 = r.get(BoundName::UH2).value;
        for name in [BoundName::UG2One, BoundName::UG2Two] {
            if let Some(v) = r.get(name).valid_value() {
                compared += 1;
                if uh2 > v + 1e-12 {
                    pass = false;
                    notes.push(format!(
                        "example 1: U_h2 > {} at eps={:.4}",
                        name.label(),
                        r.eps
                    ));
                }
            }
        }
    }
    notes.push(format!(
        "example 1: U_h2 smallest in {compared} comparisons"
    ));

    let j = example_two();
    let e2 = epsilon2(&j).unwrap().epsilon2;
    let boundary = 0.0705;
    let grid = linspace(0.0, 1.2 * e2, 481);
    let mut crossover = None;
    for r in bound_report(&j, &grid).unwrap() {
        let valid: Vec<(BoundName, f64)> = [BoundName::UH2, BoundName::UG2One, BoundName::UG2Two]
            .into_iter()
            .filter_map(|n| Some((n, r.get(n).valid_value()?)))
            .collect();
        let smallest = valid.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        if smallest == BoundName::UH2 && crossover.is_none() && r.eps > 0.0 {
            crossover = Some(r.eps);
        }
        let expected = if r.eps < boundary {
            BoundName::UG2Two
        } else {
            BoundName::UH2
        };
        if (r.eps - boundary).abs() > 5e-4 && r.eps > 0.0 && smallest != expected {
            pass = false;
            notes.push(format!(
                "example 2: {} smallest at eps={:.4}",
                smallest.label(),
                r.eps
            ));
        }
    }
    match crossover {
        Some(c) if (c - boundary).abs() <= 0.005 => {
            notes.push(format!("example 2 crossover at {c:.4}"))
        }
        other => {
            pass = false;
            notes.push(format!("example 2 crossover {other:?}"));
        }
    }
    Outcome::new(pass, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let instances = random_instances(4, 50, &[(2, 3)]);
    let budget = OracleBudget::default();
    let mut failures = Vec::new();
    let mut worst_lower: f64 = f64::NEG_INFINITY;
    let mut worst_upper: f64 = f64::NEG_INFINITY;
    for (i, j) in instances.iter().enumerate() {
        let half = epsilon2(j).unwrap().epsilon2 / 2.0;
        let grid = linspace(0.0, 0.95 * half, 10);
        for c in [Criterion::One, Criterion::Two] {
            match sandwich_check(j, &grid, c, &budget) {
                Ok(rep) => {
                    for row in &rep.rows {
                        for &(_, l) in &row.lower {
                            worst_lower = worst_lower.max(l - row.oracle);
                        }
                        for &(_, u) in &row.upper {
                            worst_upper = worst_upper.max(row.oracle - u);
                        }
                    }
                    if !rep.pass {
                        failures.push(format!(
                            "instance {i} criterion {}:\n{}",
                            c.number(),
                            rep.to_table()
                        ));
                    }
                }
                Err(e) => failures.push(format!("instance {i} criterion {}: {e}", c.number())),
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(300);
    let mut detail = format!(
        "50 instances x 10 eps x 2 criteria in {elapsed:.1?}; max(L - oracle) = {worst_lower:.3e}, max(oracle - U) = {worst_upper:.3e}"
    );
    for f in failures.iter().take(3) {
        detail.push('\n');
        detail.push_str(f);
    }
    Outcome::new(pass, detail)
}

fn criterion_5() -> Outcome {
    let cases: [Vec<Vec<f64>>; 3] = [
        vec![vec![0.3, 0.2, 0.0], vec![0.0, 0.0, 0.5]],
        vec![vec![0.25, 0.15, 0.0, 0.0], vec![0.0, 0.0, 0.35, 0.25]],
        vec![
            vec![0.2, 0.0, 0.0, 0.1],
            vec![0.0, 0.3, 0.0, 0.0],
            vec![0.0, 0.0, 0.4, 0.0],
        ],
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for rows in cases {
        let j: Joint = validate_joint(&rows).unwrap();
        let target = conditional_entropy(&j, Direction::YGivenX);
        let mut values = vec![
            ("L_g1", lower_bound_g(&j, 0.0, Criterion::One).map(|r| r.0)),
            ("L_g2", lower_bound_g(&j, 0.0, Criterion::Two).map(|r| r.0)),
            ("L_h1_1", lower_h1(&j, 0.0).map(|r| r.0)),
        ];
        values.push(("U_g1", Ok(upper_g1(&j, 0.0).0)));
        values.push(("U_h2", Ok(upper_h2(&j, 0.0))));
        for (name, v) in values {
            match v {
                Ok(v) if (v - target).abs() <= 1e-6 => {}
                other => {
                    pass = false;
                    notes.push(format!(
                        "{}x{} {name} = {other:?}, H(Y|X) = {target}",
                        j.x_size(),
                        j.y_size()
                    ));
                }
            }
        }
        for c in [Criterion::One, Criterion::Two] {
            match oracle_g(&j, 0.0, c, &OracleBudget::default()) {
                Ok(r) if (r.best_utility - target).abs() <= GRID_SLACK => {}
                other => {
                    pass = false;
                    notes.push(format!(
                        "{}x{} oracle criterion {} = {:?}",
                        j.x_size(),
                        j.y_size(),
                        c.number(),
                        other.map(|r| r.best_utility)
                    ));
                }
            }
        }
    }
    if pass {
        notes.push("3 deterministic instances".into());
    }
    Outcome::new(pass, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let instances = random_instances(6, 20, &[(2, 3), (2, 4), (3, 4), (3, 5)]);
    let mut pass = true;
    let mut notes = Vec::new();
    let mut checked = 0;
    for (i, j) in instances.iter().enumerate() {
        let limit = relaxation_limit(j);
        for frac in [0.05, 0.1, 0.2] {
            let eps = frac * limit;
            for c in [Criterion::One, Criterion::Two] {
                match lower_bound_g(j, eps, c) {
                    Ok((_, d)) => {
                        checked += 1;
                        let r = verify_mechanism(&d.mechanism, j, c, eps).unwrap();
                        if !r.pass {
                            pass = false;
                            notes.push(format!(
                                "instance {i} LP criterion {} eps={eps:.4}: max {}",
                                c.number(),
                                r.check(c).max
                            ));
                        }
                    }
                    Err(e) => {
                        pass = false;
                        notes.push(format!(
                            "instance {i} LP criterion {} eps={eps:.4}: {e}",
                            c.number()
                        ));
                    }
                }
            }
            match efrl_construct(j, eps) {
                Ok((m, d)) => {
                    checked += 1;
                    let r = verify_mechanism(&m, j, Criterion::One, eps).unwrap();
                    let l1 = lower_h1(j, eps).unwrap().0;
                    let ok = r.pass
                        && d.conditional_entropy_y_given_xu < 1e-9
                        && (d.achieved_leakage_nats - eps * eps / 2.0).abs() <= 1e-6
                        && d.mutual_information_uy >= l1 - 1e-6;
                    if !ok {
                        pass = false;
                        notes.push(format!(
                            "instance {i} EFRL eps={eps:.4}: pass={} H={:.2e} I_ux={:.6e} I_uy={:.6} L={:.6}",
                            r.pass, d.conditional_entropy_y_given_xu, d.achieved_leakage_nats, d.mutual_information_uy, l1
                        ));
                    }
                }
                Err(e) => {
                    pass = false;
                    notes.push(format!("instance {i} EFRL eps={eps:.4}: {e}"));
                }
            }
        }
    }
    notes.insert(0, format!("{checked} mechanisms verified"));
    Outcome::new(
        pass,
        notes.into_iter().take(6).collect::<Vec<_>>().join("; "),
    )
}

fn criterion_7() -> Outcome {
    let mut instances = vec![example_one(), example_two()];
    instances.extend(random_instances(7, 20, &[(2, 3), (2, 4), (3, 4)]));
    let mut pass = true;
    let mut notes = Vec::new();
    let (mut worst_wide, mut worst_narrow): (f64, f64) = (0.0, 0.0);
    for (i, j) in instances.iter().enumerate() {
        let e2 = epsilon2(j).unwrap();
        let half = e2.threshold(Regime::HalfEps2, j.x_size());
        let narrow = e2.threshold(Regime::HalfEps2OverSqrtX, j.x_size());
        let wide_bound = privacy_bounds::bounds::error_bound::<f64>(j.x_size(), Regime::HalfEps2);
        let narrow_bound =
            privacy_bounds::bounds::error_bound::<f64>(j.x_size(), Regime::HalfEps2OverSqrtX);
        for eps in linspace(0.0, half, 12).into_iter().skip(1).take(10) {
            let d = match lower_bound_g(j, eps, Criterion::Two) {
                Ok((_, d)) => d,
                Err(e) => {
                    pass = false;
                    notes.push(format!("instance {i} eps={eps:.4}: {e}"));
                    continue;
                }
            };
            let err = d.approximation_error();
            worst_wide = worst_wide.max(err);
            if err >= wide_bound {
                pass = false;
                notes.push(format!(
                    "instance {i} eps={eps:.4}: error {err:.4} >= {wide_bound}"
                ));
            }
            if eps < narrow {
                worst_narrow = worst_narrow.max(err);
                if err >= narrow_bound {
                    pass = false;
                    notes.push(format!(
                        "instance {i} eps={eps:.4}: error {err:.4} >= {narrow_bound:.4}"
                    ));
                }
            }
        }
    }
    notes.insert(0, format!("max error {worst_wide:.3e} (eps < eps2/2), {worst_narrow:.3e} (eps < eps2/(2 sqrt|X|))"));
    Outcome::new(
        pass,
        notes.into_iter().take(6).collect::<Vec<_>>().join("; "),
    )
}

fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let mut m = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..1.0));
    for c in 0..cols {
        let s: f64 = (0..rows).map(|r| m[(r, c)]).sum();
        for r in 0..rows {
            m[(r, c)] /= s;
        }
    }
    m
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let slack = 1e-12;
    let mut violations = [0usize; 4];
    let mut samples = 0;
    while samples < 1000 {
        let (nx, ny, nu) = (
            rng.gen_range(2..=4),
            rng.gen_range(2..=5),
            rng.gen_range(2..=5),
        );
        let Ok(j) = validate_joint(&random_rows(&mut rng, nx, ny)) else {
            continue;
        };
        samples += 1;
        let m = Mechanism::new(MechanismKind::Markov, random_kernel(&mut rng, nu, ny)).unwrap();
        let t = m.induce(&j).unwrap();
        let (xu, yu) = (t.p_xu(), t.p_yu());
        let rep = leakage_measures(&xu, Some(&yu)).unwrap();
        let y = rep.y.as_ref().unwrap();

        let linkage = (0..nu).all(|u| {
            let cond = match (rep.x.conditional[u], y.conditional[u]) {
                (Some(a), Some(b)) => a <= b + slack,
                _ => true,
            };
            cond && rep.x.joint_weighted[u] <= y.joint_weighted[u] + slack
        });
        violations[0] += usize::from(!linkage);

        let post = rep.x.conditional_average <= y.conditional_average + slack
            && rep.x.joint_weighted_total <= y.joint_weighted_total + slack;
        violations[1] += usize::from(!post);

        let tv = joint_product_tv(&xu);
        let half_avg = 0.5 * rep.x.conditional_average;
        let budget = rep
            .x
            .conditional
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max);
        violations[2] += usize::from((tv - half_avg).abs() > slack || tv > budget / 2.0 + slack);

        let i_nats = mutual_information_of(&xu, LogBase::Nats);
        let radius = (2.0 * i_nats).sqrt();
        violations[3] += usize::from(rep.x.joint_weighted.iter().any(|&d| d > radius + slack));
    }
    let pass = violations.iter().all(|&v| v == 0);
    Outcome::new(
        pass,
        format!(
            "{samples} samples; violations linkage={} post-processing={} tv-identity={} pinsker={}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 epsilon2 reproduction", criterion_1),
        ("2 regime thresholds", criterion_2),
        ("3 qualitative figure orderings", criterion_3),
        ("4 sandwich property", criterion_4),
        ("5 perfect-privacy degeneration", criterion_5),
        ("6 mechanism feasibility", criterion_6),
        ("7 approximation error", criterion_7),
        ("8 property suites", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {name} [{:.2?}]: {}",
            start.elapsed(),
            outcome.detail
        );
        failed += usize::from(!outcome.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
