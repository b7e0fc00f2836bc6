//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stdout (bypassing the test harness capture) and then asserts its verdict.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kirchhoff_core::asymptotics::{
    asymptotic_tail, blowup_report, boundary_rate_report, boundary_tau, boundary_trial_energy, f_r_analysis, fit_power_law,
    inner_trial_energy, moment_hessian, moment_hessian_with_step, multiplier_series, HESSIAN_STEP,
};
use kirchhoff_core::domain_potential::{
    build_grid, classify_wells, evaluate_potential, DomainShape, DomainSpec, Grid, GridFunction, PotentialSpec, Regime,
    WellClassification,
};
use kirchhoff_core::energy::{gn_ratio, EnergyBreakdown, KirchhoffParams, Problem};
use kirchhoff_core::minimizer::{
    continuation_sweep, geometric_sequence, init_trial, normalized_gradient_flow, optimize_trial, random_inits,
    uniqueness_probe, FlowConfig, MinimizerResult, SweepOptions,
};
use kirchhoff_core::{solve_ground_state, Error, RadialProfile, ShootingConfig};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("\n{} criterion {id:>2} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn profile(n: usize) -> &'static RadialProfile {
    static P: [OnceLock<RadialProfile>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    P[n - 1].get_or_init(|| solve_ground_state(n, &ShootingConfig::default()).unwrap())
}

fn closed_form(x: f64) -> f64 {
    15f64.powf(0.125) * (2.0 * 6f64.sqrt() * x).cosh().powf(-0.25)
}

/// Composite Simpson on `[0, r]` with an even number of panels.
fn simpson(f: impl Fn(f64) -> f64, r: f64, panels: usize) -> f64 {
    let h = r / panels as f64;
    let inner: f64 = (1..panels).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h)).sum();
    (f(0.0) + inner + f(r)) * h / 3.0
}

/// `(p ∫x^p Q² / (2∫Q²))^{1/(p+2)}` for `V = |x|^p` in one dimension, from the closed form.
fn lambda_1d(p: f64) -> f64 {
    let m = simpson(|x| x.powf(p) * closed_form(x).powi(2), 40.0, 400_000);
    let q = simpson(|x| closed_form(x).powi(2), 40.0, 400_000);
    (p * m / (2.0 * q)).powf(1.0 / (p + 2.0))
}

struct Case {
    profile: &'static RadialProfile,
    grid: Arc<Grid>,
    classification: WellClassification,
    problem: Problem,
}

fn case(spec: DomainSpec, well: f64, a: f64) -> Case {
    let n = spec.dimension;
    let profile = profile(n);
    let mut location = vec![0.0; n];
    location[0] = well;
    let potential = PotentialSpec::single(location, 2.0);
    let classification = classify_wells(&potential, &spec, profile).unwrap();
    let grid = Arc::new(build_grid(&spec).unwrap());
    let v = evaluate_potential(&potential, &grid).unwrap();
    let problem = Problem::new(grid.clone(), v, KirchhoffParams::critical(a, 1.0, profile)).unwrap();
    Case {
        profile,
        grid,
        classification,
        problem,
    }
}

struct InnerSweep {
    case: Case,
    results: Vec<MinimizerResult>,
    elapsed: Duration,
}

fn inner_sweep(spec: DomainSpec, values: Vec<f64>) -> InnerSweep {
    let radial = matches!(spec.shape, DomainShape::Ball { .. });
    let c = case(spec, 0.0, values[0]);
    let start = Instant::now();
    let well = c.classification.dominant();
    let tau = well.lambda.unwrap() * values[0].powf(-0.25);
    let init = init_trial(c.profile, tau, &well.location, &c.grid).unwrap().state;
    let options = SweepOptions {
        predictor: true,
        anchor: (!radial).then_some(0.0),
        initial_exponent: Some(0.25),
    };
    let results = continuation_sweep(&c.problem, &values, &init, &FlowConfig::default(), &options).unwrap();
    InnerSweep {
        case: c,
        results,
        elapsed: start.elapsed(),
    }
}

/// N = 1, (−1, 1), V = x², 4096 nodes, 12 geometric points from 1e−2 to 1e−6.
fn line_sweep() -> &'static InnerSweep {
    static S: OnceLock<InnerSweep> = OnceLock::new();
    S.get_or_init(|| inner_sweep(DomainSpec::interval(-1.0, 1.0, 4096, 12), geometric_sequence(1e-2, 1e-6, 12)))
}

/// Unit ball in three dimensions, V = |x|².
fn ball_sweep() -> &'static InnerSweep {
    static S: OnceLock<InnerSweep> = OnceLock::new();
    S.get_or_init(|| inner_sweep(DomainSpec::ball(3, 1.0, 4097, 12), geometric_sequence(1e-2, 1e-7, 11)))
}

struct BoundarySweep {
    case: Case,
    results: Vec<MinimizerResult>,
}

/// N = 1, (0, 1), V = x², 11 geometric points from 1e−3 to 1e−8.
fn boundary_sweep() -> &'static BoundarySweep {
    static S: OnceLock<BoundarySweep> = OnceLock::new();
    S.get_or_init(|| {
        let values = geometric_sequence(1e-3, 1e-8, 11);
        let c = case(DomainSpec::interval(0.0, 1.0, 32768, 12), 0.0, values[0]);
        let a = values[0];
        // Scale from the boundary law, centre just inside the cut-off ball.
        let tau = boundary_tau(2.0, 1.0, a);
        let g = (3.0 * tau.ln()).max(1.0);
        let center = (1.0 + g.powf(-0.5)) * g / tau;
        let init = optimize_trial(&c.problem, c.profile, tau, &[center]).unwrap().state;
        let options = SweepOptions {
            predictor: true,
            anchor: Some(0.0),
            initial_exponent: Some(0.25),
        };
        let results = continuation_sweep(&c.problem, &values, &init, &FlowConfig::default(), &options).unwrap();
        BoundarySweep { case: c, results }
    })
}

fn rel(x: f64, y: f64) -> f64 {
    (x / y - 1.0).abs()
}

#[test]
fn criterion_01_ground_state_matches_closed_form() {
    let start = Instant::now();
    let p = solve_ground_state(1, &ShootingConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let err = p
        .radii()
        .zip(&p.values)
        .map(|(r, q)| (q - closed_form(r)).abs())
        .fold(0.0_f64, f64::max);
    let pass = err < 1e-8 && elapsed < Duration::from_secs(1);
    verdict(1, "ground state", pass, &format!("max error {err:.2e} (< 1e-8), {elapsed:.2?} (< 1 s)"));
}

#[test]
fn criterion_02_pohozaev_and_gn_equality() {
    let q = profile(3);
    let sc = q.sharp_constants();
    let [r1, r2] = sc.pohozaev_residuals;
    // Gagliardo–Nirenberg quotient of Q sampled on a large ball, against
    // the closed form (N+4)/(N |Q|₂^{8/N}) of the best constant.
    let grid = Arc::new(build_grid(&DomainSpec::ball(3, 40.0, 40001, 12)).unwrap());
    let u = GridFunction::new(grid.clone(), grid.coords.iter().map(|&r| q.value(r)).collect()).unwrap();
    let mass_sq = 4.0 * PI * simpson(|r| r * r * q.value(r).powi(2), 40.0, 400_000);
    let best = 7.0 / (3.0 * mass_sq.powf(4.0 / 3.0));
    let sampled = rel(gn_ratio(&u).unwrap(), best);
    let tabulated = rel(q.gn_best, best);
    let pass = r1.abs() < 1e-6 && r2.abs() < 1e-6 && sampled < 1e-6 && tabulated < 1e-6;
    verdict(
        2,
        "Pohozaev / GN equality",
        pass,
        &format!(
            "residuals {:.1e}, {:.1e}; GN quotient at Q off by {sampled:.1e}, tabulated constant by {tabulated:.1e} (< 1e-6)",
            r1.abs(),
            r2.abs()
        ),
    );
}

#[test]
fn criterion_03_strict_gn_inequality_on_bounded_domains() {
    let q = profile(1);
    let grid = Arc::new(build_grid(&DomainSpec::interval(-1.0, 1.0, 801, 8)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    let mut violations = 0;
    for k in 0..1000 {
        // Alternate sine series and rescaled ground-state bumps. A bump that
        // close to optimal and only about ten spacings wide is not resolved:
        // central stencils underestimate its gradient and the discrete quotient
        // can exceed the continuum constant. Keep the bumps at twenty or more.
        let values: Vec<f64> = if k % 2 == 0 {
            let c: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            grid.coords
                .iter()
                .map(|&x| {
                    let t = PI * (x + 1.0) / 2.0;
                    c.iter().enumerate().map(|(j, cj)| cj * ((j + 1) as f64 * t).sin()).sum()
                })
                .collect()
        } else {
            let (c, w) = (rng.random_range(-0.9..0.9), rng.random_range(20.0 * grid.h..0.3));
            grid.coords
                .iter()
                .map(|&x| (1.0 - x * x) * closed_form((x - c) / w))
                .collect()
        };
        let u = GridFunction::new(grid.clone(), values).unwrap();
        let ratio = gn_ratio(&u).unwrap() / q.gn_best;
        worst = worst.max(ratio);
        if ratio >= 1.0 {
            violations += 1;
        }
    }
    verdict(
        3,
        "strict GN inequality",
        violations == 0,
        &format!("{violations} violations in 1000 functions, largest ratio to the best constant {worst:.6}"),
    );
}

#[test]
fn criterion_04_inner_energy_law() {
    let s = line_sweep();
    let lambda = lambda_1d(2.0);
    let series: Vec<(f64, f64)> = s.results.iter().filter(|r| r.converged).map(|r| (r.a, r.energy.total)).collect();
    let tail = asymptotic_tail(&series, 2.0);
    let fit = fit_power_law(&tail, false).unwrap();
    let full = fit_power_law(&series, false).unwrap();
    let c0 = 2.0 * lambda * lambda;
    let (d_exp, d_pre) = (rel(fit.exponent, 0.5), rel(fit.prefactor, c0));
    let pass = series.len() == 12 && d_exp < 0.05 && d_pre < 0.1 && s.elapsed < Duration::from_secs(600);
    verdict(
        4,
        "inner energy law",
        pass,
        &format!(
            "fit on a in [{:.1e}, {:.1e}]: exponent {:.4} (off {:.2}%, < 5%), prefactor/2λ² {:.4} (< 10%); \
             all 12 points: exponent {:.4}, prefactor/2λ² {:.3}; sweep {:.1?} (< 10 min)",
            tail.last().unwrap().0,
            tail[0].0,
            fit.exponent,
            100.0 * d_exp,
            fit.prefactor / c0,
            full.exponent,
            full.prefactor / c0,
            s.elapsed
        ),
    );
}

#[test]
fn criterion_05_inner_blowup_profile() {
    let s = line_sweep();
    let lambda = lambda_1d(2.0);
    let report = blowup_report(&s.results, Regime::Inner, s.case.profile).unwrap();
    let last = report.last().unwrap();
    let eps_ratio = last.epsilon * lambda / last.a.powf(0.25);
    let offset = last.z[0].abs() / last.a.powf(0.25);
    let pass = report.skipped.is_empty()
        && report.l2_decreasing()
        && last.l2_distance < 0.05
        && (eps_ratio - 1.0).abs() < 0.1
        && offset < 0.1;
    verdict(
        5,
        "inner blow-up profile",
        pass,
        &format!(
            "L² distance decreasing: {}, final {:.2e} (< 0.05); ελ/a^(1/4) {eps_ratio:.4}; |z|/a^(1/4) {offset:.2e} (< 0.1)",
            report.l2_decreasing(),
            last.l2_distance
        ),
    );
}

#[test]
fn criterion_06_multiplier_limit() {
    let line = multiplier_series(&line_sweep().results);
    let ball = multiplier_series(&ball_sweep().results);
    let (l1, l3) = (line.last().unwrap().1, ball.last().unwrap().1);
    // b(N−4)/(2N) with b = 1.
    let (t1, t3) = (-3.0 / 2.0, -1.0 / 6.0);
    let converged = ball_sweep().results.iter().all(|r| r.converged);
    let pass = converged && rel(l1, t1) < 0.1 && rel(l3, t3) < 0.1;
    verdict(
        6,
        "multiplier limit",
        pass,
        &format!("ε⁴μ: N=1 {l1:.5} vs {t1}, N=3 ball {l3:.5} vs {t3:.5} (within 10%)"),
    );
}

#[test]
fn criterion_07_boundary_laws() {
    let s = boundary_sweep();
    let well = s.case.classification.dominant();
    let rates = boundary_rate_report(&s.results, well).unwrap();
    let offset = rates.offset.last_third_mean;
    let eps = rates.epsilon.last_third_mean;
    let a = 1e-7;
    let trial = boundary_trial_energy(&s.case.problem.with_a(a), well, s.case.profile, 0.5).unwrap();
    // κ = 1, p = 2: (6/8)·(1 + 1)·a^{1/2}·ln(1/a).
    let law = 1.5 * a.sqrt() * (1.0 / a).ln();
    let trial_ratio = trial.breakdown.total / law;
    let converged = s.results.iter().all(|r| r.converged);
    let pass = converged
        && rel(offset, 3.0) < 0.15
        && (0.7..=1.3).contains(&eps)
        && rates.epsilon.approaches(1.0)
        && (0.8..=1.2).contains(&trial_ratio);
    verdict(
        7,
        "boundary laws",
        pass,
        &format!(
            "offset ratio last third {offset:.4} vs 3 (15%); ε ratio first/last third {:.4} -> {eps:.4} \
             (in [0.7, 1.3], toward 1); trial ratio at 1e-7 {trial_ratio:.4} (in [0.8, 1.2])",
            rates.epsilon.first_third_mean
        ),
    );
}

#[test]
fn criterion_08_auxiliary_minimisation() {
    // Argmin ratios numeric/asymptotic over a = 1e-6, 1e-8, 1e-10.
    let ratios = |r: f64| -> Vec<f64> {
        let p = 2.0;
        [1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&a| {
                let fr = f_r_analysis(a, r, p).unwrap();
                // Independent scan of f_r on a fine logarithmic grid.
                let f = |s: f64| a / (s * s) + r * s.powf(p) * (1.0 / s).ln().powf(p);
                let scan = (0..200_000)
                    .map(|k| (-30.0 + 28.5 * k as f64 / 200_000.0).exp())
                    .min_by(|x, y| f(*x).total_cmp(&f(*y)))
                    .unwrap();
                assert!(rel(fr.numeric_argmin, scan) < 1e-3, "{} vs scan {scan}", fr.numeric_argmin);
                // (2/(pr))^{1/4} a^{1/4} 4^{1/2} (ln 1/a)^{-1/2}
                let asym = (2.0 / (p * r)).powf(0.25) * a.powf(0.25) * 2.0 / (1.0 / a).ln().sqrt();
                fr.numeric_argmin / asym
            })
            .collect()
    };
    let unit = ratios(1.0);
    let toward = unit.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs());
    let last = *unit.last().unwrap();
    let pass = toward && (last - 1.0).abs() < 0.1;
    verdict(
        8,
        "f_r argmin",
        pass,
        &format!(
            "p = 2, r = 1: ratios {unit:.4?} (monotone toward 1 {toward}, final within 10%); \
             for reference r = 9 gives {:.4?}",
            ratios(9.0)
        ),
    );
}

#[test]
fn criterion_09_collapse_without_a() {
    let mut lines = Vec::new();
    let mut pass = true;
    for nodes in [1001, 2001, 4001] {
        let c = case(DomainSpec::interval(-1.0, 1.0, nodes, 12), 0.0, 0.0);
        let init = random_inits(&c.grid, 1, 7).remove(0);
        match normalized_gradient_flow(&c.problem, &init, &FlowConfig::default()) {
            Err(Error::Collapse { energy, epsilon, h, .. }) => {
                pass &= energy < 1e-2;
                lines.push(format!("{nodes} nodes: ε {:.1}h, energy {energy:.3e}", epsilon / h));
            }
            other => {
                pass = false;
                lines.push(format!("{nodes} nodes: no collapse ({:?})", other.map(|r| r.energy.total)));
            }
        }
    }
    verdict(9, "collapse at a = 0", pass, &lines.join("; "));
}

#[test]
fn criterion_10_moment_hessian() {
    let mut lines = Vec::new();
    let mut pass = true;
    for n in 1..=3 {
        let q = profile(n);
        let area = [2.0, 2.0 * PI, 4.0 * PI][n - 1];
        let mass_sq = area * simpson(|r| r.powi(n as i32 - 1) * q.value(r).powi(2), 40.0, 400_000);
        let h = moment_hessian(q, 2.0).unwrap();
        let want = 2.0 * mass_sq;
        let err = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (h.matrix[i][j] - if i == j { want } else { 0.0 }).abs())
            .fold(0.0_f64, f64::max);
        let cubic = moment_hessian(q, 3.0).unwrap();
        let halved = moment_hessian_with_step(q, 3.0, 0.5 * HESSIAN_STEP).unwrap();
        let drift = rel(halved.determinant, cubic.determinant);
        pass &= err < 1e-6 && cubic.determinant > 0.0 && drift < 1e-4;
        lines.push(format!("N={n}: |H−2|Q|²I| {err:.1e}, p=3 det {:.4e} drift {drift:.1e}", cubic.determinant));
    }
    verdict(10, "moment Hessian", pass, &lines.join("; "));
}

#[test]
fn criterion_11_uniqueness() {
    let c = case(DomainSpec::interval(-1.0, 1.0, 4096, 12), 0.0, 1e-5);
    let inits = random_inits(&c.grid, 5, 11);
    let probe = uniqueness_probe(&c.problem, &inits, &FlowConfig::default(), 1e-6).unwrap();
    let pass = probe.all_converged && probe.max_distance <= 1e-6;
    verdict(
        11,
        "uniqueness",
        pass,
        &format!(
            "5 starts at a = 1e-5, all converged {}, largest pairwise L² distance {:.2e} (<= 1e-6)",
            probe.all_converged, probe.max_distance
        ),
    );
}

#[test]
fn criterion_12_property_suite() {
    let line = line_sweep();
    let boundary = boundary_sweep();
    let all: Vec<&MinimizerResult> = line.results.iter().chain(&boundary.results).collect();

    let mass = all.iter().map(|r| (r.state.mass() - 1.0).abs()).fold(0.0_f64, f64::max);
    // The total is a sum of terms up to 1e10 that nearly cancel, so it is
    // resolved only to a few ulps of their size. Rises are allowed 1e-12 or
    // that floor, whichever is larger, and measured in units of it.
    let floor = |e: &EnergyBreakdown| 4.0 * f64::EPSILON * e.magnitude();
    let rises: Vec<(f64, f64)> = all
        .iter()
        .flat_map(|r| r.energy_trace.windows(2).map(move |w| (w[1] - w[0], floor(&r.energy))))
        .collect();
    let uphill = rises.iter().filter(|(d, f)| *d > f.max(1e-12)).count();
    let above_abs = rises.iter().filter(|(d, _)| *d > 1e-12).count();
    let worst_rise = rises.iter().map(|(d, f)| d / f).fold(f64::NEG_INFINITY, f64::max);
    let monotone = [&line.results, &boundary.results]
        .iter()
        .all(|rs| rs.windows(2).all(|w| w[1].energy.total < w[0].energy.total));

    let (mut below, mut compared) = (0, 0);
    let inner_well = line.case.classification.dominant();
    for r in &line.results {
        let t = inner_trial_energy(&line.case.problem.with_a(r.a), inner_well, line.case.profile, None).unwrap();
        below += usize::from(t.breakdown.total < r.energy.total - floor(&t.breakdown).max(floor(&r.energy)));
        compared += 1;
    }
    let boundary_well = boundary.case.classification.dominant();
    for r in &boundary.results {
        // At the largest a the cut-off ball does not fit in the domain.
        match boundary_trial_energy(&boundary.case.problem.with_a(r.a), boundary_well, boundary.case.profile, 0.5) {
            Ok(t) => {
                below += usize::from(t.breakdown.total < r.energy.total - floor(&t.breakdown).max(floor(&r.energy)));
                compared += 1;
            }
            Err(Error::Domain(_)) => {}
            Err(e) => panic!("boundary trial at a = {}: {e}", r.a),
        }
    }

    // Same end point reached through 5 and through 9 warm starts.
    let c = case(DomainSpec::interval(-1.0, 1.0, 1601, 8), 0.0, 1e-2);
    let init = init_trial(c.profile, 3.0, &[0.0], &c.grid).unwrap().state;
    let end = |points| {
        let values = geometric_sequence(1e-2, 1e-4, points);
        let rs = continuation_sweep(&c.problem, &values, &init, &FlowConfig::default(), &SweepOptions::default())
            .unwrap();
        rs.last().unwrap().energy.total
    };
    let granularity = (end(5) - end(9)).abs();

    let pass = mass < 1e-12 && uphill == 0 && monotone && below == 0 && compared >= 20 && granularity < 1e-8;
    verdict(
        12,
        "property suite",
        pass,
        &format!(
            "mass drift {mass:.1e} (< 1e-12); {uphill} of {} steps rise above max(1e-12, rounding floor), \
             {above_abs} above 1e-12, largest rise {worst_rise:.2} floors; e(a) monotone {monotone}; \
             trial below minimum {below} of {compared} times; warm-start granularity {granularity:.1e} (< 1e-8)",
            rises.len()
        ),
    );
}
