//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so that every line is printed even when
//! all criteria pass.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dcpf::harness::{
    generate_network, oracle_multistart, oracle_single_pbus, McConfig, Topology, TwoBusCase,
};
use dcpf::numerics::{fd_gradient, fd_jacobian, inf_distance};
use dcpf::solve::{energy_gradient, energy_value, hessian, monotone_map, zbus_map};
use dcpf::{
    check_local_convexity, conditions::monotone_current_coefficient, contraction_analysis,
    evaluate, solve_energy, solve_monotone, solve_zbus, BusKind, DerivedModel, Network, NormOrder,
    SolveOptions, SolveResult, VoltageBand,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Result<String, String>,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "two-bus condition and outcome table", limit: secs(1), run: two_bus_table },
        Criterion { id: 2, name: "closed-form agreement", limit: secs(1), run: closed_form_agreement },
        Criterion { id: 3, name: "monotone current coefficient", limit: secs(1), run: coefficient },
        Criterion { id: 4, name: "linear-case exactness", limit: secs(1), run: linear_case },
        Criterion { id: 5, name: "contraction rate", limit: secs(10), run: contraction_rate },
        Criterion { id: 6, name: "monotone dominance", limit: secs(10), run: monotone_dominance },
        Criterion { id: 7, name: "gradient and Hessian oracle", limit: secs(5), run: derivative_oracle },
        Criterion { id: 8, name: "local convexity certificate", limit: secs(10), run: local_convexity },
        Criterion { id: 9, name: "Z-bus speed-up at 200 buses", limit: secs(30), run: zbus_speedup },
        Criterion { id: 10, name: "oracle superset", limit: secs(10), run: oracle_superset },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} [{}] {}: {} ({:.3} s, limit {} s)",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn band() -> VoltageBand {
    VoltageBand::default()
}

/// Runs the three solvers with their default options and starts.
fn run_all(model: &DerivedModel, band: &VoltageBand, q: NormOrder) -> [SolveResult; 3] {
    let opts = SolveOptions::default();
    let (zbus, _) = solve_zbus(model, band, q, &opts, None).unwrap();
    [
        zbus,
        solve_monotone(model, band, &opts),
        solve_energy(model, &SolveOptions::energy(), None).unwrap(),
    ]
}

fn two_bus_table() -> Result<String, String> {
    // (contraction condition, monotone conditions, Z-bus, monotone, energy)
    let expected = [
        (TwoBusCase::A, [true, true, true, true, true]),
        (TwoBusCase::B, [false, true, true, true, true]),
        (TwoBusCase::C, [false, false, true, false, true]),
        (TwoBusCase::D, [false, false, false, false, true]),
    ];
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for (case, want) in expected {
        let model = case.model();
        let report = evaluate(&model, &band(), NormOrder::Two);
        let [zbus, mono, energy] = run_all(&model, &band(), NormOrder::Two);
        let got = [
            report.contraction.feasible,
            report.monotone_ok(),
            zbus.converged(),
            mono.converged(),
            energy.converged(),
        ];
        let mark = |b: bool| if b { 'Y' } else { 'N' };
        rows.push(format!("{}={}", case.label(), got.iter().map(|b| mark(*b)).collect::<String>()));
        if got != want {
            mismatches.push(format!(
                "case {} expected {} got {} (zbus {}, monotone {})",
                case.label(),
                want.iter().map(|b| mark(*b)).collect::<String>(),
                got.iter().map(|b| mark(*b)).collect::<String>(),
                zbus.status.as_str(),
                mono.status.as_str(),
            ));
        }
    }
    let summary = rows.join(" ");
    ensure(mismatches.is_empty(), || format!("{summary}; {}", mismatches.join("; ")))?;
    Ok(summary)
}

fn closed_form_agreement() -> Result<String, String> {
    let closed = [
        (TwoBusCase::A, (9.0 + 125f64.sqrt()) / 22.0),
        (TwoBusCase::B, 1.0),
        (TwoBusCase::C, (2.0f64 / 11.0).sqrt()),
        (TwoBusCase::D, (320f64.sqrt() - 10.0) / 22.0),
    ];
    let mut checked = 0;
    let mut worst = 0.0_f64;
    for (case, root) in closed {
        let model = case.model();
        let roots = oracle_single_pbus(&model).map_err(|e| e.to_string())?;
        ensure((roots[0] - root).abs() < 1e-12, || {
            format!("oracle root {} for case {} differs from {root}", roots[0], case.label())
        })?;
        for r in run_all(&model, &band(), NormOrder::Two).iter().filter(|r| r.converged()) {
            let err = roots.iter().map(|x| (x - r.v[0]).abs()).fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
            checked += 1;
        }
    }
    ensure(worst <= 1e-6, || format!("worst error {worst:.2e} over {checked} solutions"))?;
    Ok(format!("{checked} converged solutions, worst error {worst:.2e}"))
}

fn coefficient() -> Result<String, String> {
    let coef = monotone_current_coefficient(&band());
    ensure((coef - 0.64).abs() <= 0.005, || format!("coefficient {coef}"))?;
    Ok(format!("coefficient {coef:.4}"))
}

fn without_power(net: &Network) -> Network {
    let mut net = net.clone();
    for bus in &mut net.buses {
        if let BusKind::Zip(z) = &mut bus.kind {
            z.p0 = 0.0;
        }
    }
    net
}

fn linear_case() -> Result<String, String> {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (topology, n) in [(Topology::Radial, 100), (Topology::Meshed, 100), (Topology::Radial, 20), (Topology::Meshed, 7)] {
        for seed in 0..3 {
            let net = without_power(&generate_network(topology, n, seed));
            let model = net.derive().map_err(|e| e.to_string())?;
            let (r, _) = solve_zbus(&model, &net.band, NormOrder::Two, &SolveOptions::default(), None)
                .map_err(|e| e.to_string())?;
            let d: Vec<f64> = model.d().iter().copied().collect();
            ensure(r.converged() && r.iterations == 1 && r.v == d, || {
                format!("{topology:?} n={n} seed={seed}: {} after {} iterations", r.status.as_str(), r.iterations)
            })?;
            worst = worst.max(r.residual_inf);
            count += 1;
        }
    }
    ensure(worst < 1e-10, || format!("worst residual {worst:.2e}"))?;
    Ok(format!("{count} networks returned d after one step, worst residual {worst:.2e}"))
}

struct Seeded {
    net: Network,
    model: DerivedModel,
}

/// The first `count` 10-bus networks (alternating radial and meshed by seed)
/// accepted by `keep`.
fn seeded_networks(count: usize, keep: impl Fn(&Network, &DerivedModel) -> bool) -> Vec<Seeded> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        let topology = if seed % 2 == 0 { Topology::Radial } else { Topology::Meshed };
        let net = generate_network(topology, 10, seed);
        seed += 1;
        let model = net.derive().expect("generated networks are valid");
        if keep(&net, &model) {
            out.push(Seeded { net, model });
        }
    }
    out
}

fn contraction_networks() -> Vec<Seeded> {
    seeded_networks(50, |net, model| contraction_analysis(model, &net.band, net.norm_q).guarantees_zbus())
}

fn monotone_networks() -> Vec<Seeded> {
    seeded_networks(50, |net, model| evaluate(model, &net.band, net.norm_q).monotone_ok())
}

fn q_distance(q: NormOrder, a: &[f64], b: &[f64]) -> f64 {
    q.vector_norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Least-squares slope and coefficient of determination of `ys` against
/// their index.
fn linear_fit(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
        syy += (y - y_mean) * (y - y_mean);
    }
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

fn contraction_rate() -> Result<String, String> {
    let mut worst_margin = f64::INFINITY;
    let mut worst_r2 = 1.0_f64;
    let mut ratios = 0;
    for (i, s) in contraction_networks().iter().enumerate() {
        let q = s.net.norm_q;
        let ball = contraction_analysis(&s.model, &s.net.band, q);
        let r = ball.r_under.unwrap();
        let alpha = ball.alpha_at(r).unwrap();
        let d: Vec<f64> = s.model.d().iter().copied().collect();

        let mut v = d.clone();
        let mut log_steps = Vec::new();
        let mut prev_step: Option<f64> = None;
        for _ in 0..500 {
            let next = zbus_map(&s.model, &v).map_err(|e| e.to_string())?;
            let step = q_distance(q, &next, &v);
            let inside = q_distance(q, &v, &d) <= r && q_distance(q, &next, &d) <= r;
            if let (Some(prev), true) = (prev_step, inside) {
                ensure(step <= (alpha + 1e-9) * prev, || {
                    format!("network {i}: ratio {} exceeds alpha {alpha}", step / prev)
                })?;
                worst_margin = worst_margin.min(alpha - step / prev);
                ratios += 1;
            }
            v = next;
            if step <= 1e-12 {
                break;
            }
            log_steps.push(step.ln());
            prev_step = Some(step);
        }
        let window = &log_steps[log_steps.len().saturating_sub(10)..];
        ensure(window.len() >= 5, || format!("network {i}: only {} steps", window.len()))?;
        let (slope, r2) = linear_fit(window);
        ensure(slope < 0.0 && r2 >= 0.99, || format!("network {i}: slope {slope}, r2 {r2}"))?;
        ensure(window.windows(2).all(|w| w[1] < w[0]), || format!("network {i}: error not decreasing"))?;
        worst_r2 = worst_r2.min(r2);

        let (res, diag) = solve_zbus(&s.model, &s.net.band, q, &SolveOptions::default(), None)
            .map_err(|e| e.to_string())?;
        ensure(res.converged() && diag.stayed_in_ball, || format!("network {i}: {}", res.status.as_str()))?;
    }
    Ok(format!("{ratios} step ratios within alpha (min slack {worst_margin:.3}), worst log-linear r2 {worst_r2:.4}"))
}

fn monotone_dominance() -> Result<String, String> {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut compared = 0;
    for (i, s) in monotone_networks().iter().enumerate() {
        let band = s.net.band;
        let opts = SolveOptions::default();
        let mono = solve_monotone(&s.model, &band, &opts);

        // Without a solution the iterates descend until they leave the domain.
        let mut u = vec![band.u_hi; s.model.len()];
        for _ in 0..mono.iterations.max(1) {
            let Ok(next) = monotone_map(&s.model, &u) else { break };
            let rise = next.iter().zip(&u).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
            ensure(rise <= 1e-12, || format!("network {i}: iterate rose by {rise:e}"))?;
            worst_rise = worst_rise.max(rise);
            u = next;
        }

        let (zbus, _) = solve_zbus(&s.model, &band, s.net.norm_q, &opts, None).map_err(|e| e.to_string())?;
        if !zbus.converged() {
            continue;
        }
        ensure(mono.converged(), || {
            format!("network {i}: Z-bus converged but monotone {}", mono.status.as_str())
        })?;
        let gap = zbus.v.iter().zip(&mono.v).map(|(z, m)| z - m).fold(f64::NEG_INFINITY, f64::max);
        ensure(gap <= 1e-6, || format!("network {i}: Z-bus exceeds monotone by {gap:e}"))?;
        worst_gap = worst_gap.max(gap);
        compared += 1;
    }
    Ok(format!(
        "50 networks descend (largest step {worst_rise:.2e}); {compared} with a Z-bus solution, largest excess {worst_gap:.2e}"
    ))
}

fn derivative_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut g_err, mut h_err, mut d_err) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..20 {
        let topology = if i % 2 == 0 { Topology::Radial } else { Topology::Meshed };
        let n = rng.gen_range(2..=10);
        let base = generate_network(topology, n, 100 + i).derive().map_err(|e| e.to_string())?;
        let p: Vec<f64> = base.p().iter().map(|p| p * rng.gen_range(-10.0..10.0)).collect();
        let model = base.with_power(&p).map_err(|e| e.to_string())?;
        let rho: Vec<f64> = (0..model.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();

        let grad = energy_gradient(&model, &rho).map_err(|e| e.to_string())?;
        let fd = fd_gradient(|x| energy_value(&model, x).unwrap(), &rho, 1e-6);
        let scale = grad.iter().fold(1.0_f64, |a, g| a.max(g.abs()));
        g_err = g_err.max(inf_distance(&grad, &fd) / scale);

        let bundle = hessian(&model, &rho).map_err(|e| e.to_string())?;
        let jac = fd_jacobian(|x| energy_gradient(&model, x).unwrap(), &rho, 1e-6);
        h_err = h_err.max((&bundle.h - &jac).amax() / bundle.h.amax().max(1.0));

        let decomposed = model.g_matrix() + nalgebra::DMatrix::from_diagonal(&bundle.k_diag);
        d_err = d_err.max((&bundle.h_tilde - decomposed).amax());
    }
    let detail = format!("gradient {g_err:.1e}, Hessian {h_err:.1e}, decomposition {d_err:.1e}");
    ensure(g_err <= 1e-5 && h_err <= 1e-4 && d_err <= 1e-10, || detail.clone())?;
    Ok(detail)
}

fn local_convexity() -> Result<String, String> {
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    let opts = SolveOptions::default();
    for s in contraction_networks().into_iter().chain(monotone_networks()) {
        let band = s.net.band;
        if !check_local_convexity(&s.model, &band).ok {
            continue;
        }
        let (zbus, _) = solve_zbus(&s.model, &band, s.net.norm_q, &opts, None).map_err(|e| e.to_string())?;
        let mono = solve_monotone(&s.model, &band, &opts);
        for r in [zbus, mono].iter().filter(|r| r.converged()) {
            let rho: Vec<f64> = r.v.iter().map(|v| 2.0 * v.ln()).collect();
            let lam = hessian(&s.model, &rho).map_err(|e| e.to_string())?.lambda_min_tilde;
            ensure(lam >= -1e-9, || format!("smallest eigenvalue {lam}"))?;
            worst = worst.min(lam);
            checked += 1;
        }
    }
    ensure(checked > 0, || "no instance satisfied the condition".into())?;
    Ok(format!("{checked} solutions, smallest eigenvalue {worst:.3}"))
}

fn median_time(mut f: impl FnMut(), reps: usize) -> Duration {
    let mut times: Vec<Duration> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed()
        })
        .collect();
    times.sort();
    times[reps / 2]
}

fn zbus_speedup() -> Result<String, String> {
    let net = generate_network(Topology::Meshed, 200, 3);
    let model = net.derive().map_err(|e| e.to_string())?;
    let opts = SolveOptions::default();
    let (zbus, _) = solve_zbus(&model, &net.band, net.norm_q, &opts, None).map_err(|e| e.to_string())?;
    let mono = solve_monotone(&model, &net.band, &opts);
    ensure(zbus.converged() && mono.converged(), || {
        format!("zbus {}, monotone {}", zbus.status.as_str(), mono.status.as_str())
    })?;
    let tz = median_time(|| drop(solve_zbus(&model, &net.band, net.norm_q, &opts, None)), 21);
    let tm = median_time(|| drop(solve_monotone(&model, &net.band, &opts)), 21);
    let ratio = tm.as_secs_f64() / tz.as_secs_f64();
    let detail = format!(
        "Z-bus {:?} ({} iterations) vs monotone {:?} ({} iterations), ratio {ratio:.1}",
        tz, zbus.iterations, tm, mono.iterations
    );
    ensure(ratio >= 5.0, || detail.clone())?;
    Ok(detail)
}

fn oracle_superset() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut worst = 0.0_f64;
    // Same stopping tolerance the Monte-Carlo study uses for agreement.
    let fixed_point = SolveOptions::default().with_tol(McConfig::default().solver_tol);
    for seed in 0..20 {
        let topology = if seed % 2 == 0 { Topology::Radial } else { Topology::Meshed };
        let net = generate_network(topology, 3, seed);
        let base = net.derive().map_err(|e| e.to_string())?;
        let p: Vec<f64> = base.p().iter().map(|p| p * rng.gen_range(-10.0..10.0)).collect();
        let model = base.with_power(&p).map_err(|e| e.to_string())?;
        let roots = oracle_multistart(&model, 100, seed);
        let (zbus, _) = solve_zbus(&model, &net.band, net.norm_q, &fixed_point, None).map_err(|e| e.to_string())?;
        let mono = solve_monotone(&model, &net.band, &fixed_point);
        let energy = solve_energy(&model, &SolveOptions::energy(), None).map_err(|e| e.to_string())?;
        for r in [zbus, mono, energy].iter().filter(|r| r.converged()) {
            let dist = roots.iter().map(|x| inf_distance(x, &r.v)).fold(f64::INFINITY, f64::min);
            ensure(dist <= 1e-5, || format!("network {seed}: {:?} is {dist:e} from the oracle roots", r.v))?;
            worst = worst.max(dist);
            checked += 1;
        }
    }
    Ok(format!("{checked} solutions on 20 networks, worst distance {worst:.1e}"))
}
