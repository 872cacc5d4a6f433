//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Set `MLZ_ACCEPTANCE_ONLY=1,7` to run a subset.

use std::f64::consts::SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use mlz_core::catalog::*;
use mlz_core::fock::do_probabilities;
use mlz_core::*;

const TOL: f64 = 2e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn numeric(model: &DiabaticModel) -> ProbabilityMatrix {
    transition_matrix_numeric(model, &IntegrationConfig::default()).expect("integration")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn four_state_interference() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for k in 0..10 {
        let b = -1.5 + 3.0 * (k as f64 + 0.5) / 10.0;
        let p = Params::new().with("b", b).with("e", 0.3).with("e2", 0.1).with("b1", 1.5).with("b2", 0.4).with("g", 0.25).with("gamma", 0.1875);
        let model = make_model("four-state", &p).unwrap();
        let d = numeric(&model).max_abs_diff(&analytic_probabilities("four-state", &p).unwrap());
        if d > worst {
            worst = d;
            at = b;
        }
    }
    outcome(worst <= TOL, format!("four-state interference phase, 10-point b grid: max dev {worst:.2e} at b = {at}"))
}

fn four_state_plain() -> Outcome {
    let grid = [-1.2, -0.6, -0.35, -0.1, 0.395, 0.405, 0.9, 1.3];
    let mut worst: f64 = 0.0;
    let mut jump: f64 = 0.0;
    for e in [1.55, -1.55] {
        let mut near = Vec::new();
        for b in grid {
            let p = Params::new().with("b", b).with("e", e).with("e2", 0.0).with_label("phase", "plain");
            let model = make_model("four-state", &p).unwrap();
            let num = numeric(&model);
            worst = worst.max(num.max_abs_diff(&analytic_probabilities("four-state", &p).unwrap()));
            if (b - 0.4f64).abs() < 0.01 {
                near.push(num);
            }
        }
        jump = jump.max(near[0].max_abs_diff(&near[1]));
    }
    outcome(
        worst <= TOL && jump <= TOL,
        format!("four-state plain phase, e = ±1.55: max dev {worst:.2e}, numeric change across b = b2 ± 0.005: {jump:.2e}"),
    )
}

fn bosonic6() -> Outcome {
    let p = Params::new().with("e1", -1.0).with("e2", 1.0).with("g1", 0.67).with("g2", 0.469);
    let model = make_model("bosonic6", &p).unwrap();
    let d = numeric(&model).max_abs_diff(&analytic_probabilities("bosonic6", &p).unwrap());
    outcome(d <= TOL, format!("bosonic six-state product formula: max dev {d:.2e}"))
}

fn distorted() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mats = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        let p = Params::new().with("e1", -eps).with("e2", 1.3 * eps).with("g", 0.38).with("gamma", 0.779);
        let num = numeric(&make_model("distorted-bosonic6", &p).unwrap());
        worst = worst.max(num.max_abs_diff(&analytic_probabilities("distorted-bosonic6", &p).unwrap()));
        mats.push(num);
    }
    let spread = mats[1..].iter().map(|m| m.max_abs_diff(&mats[0])).fold(0.0, f64::max);
    outcome(
        worst <= TOL && spread <= TOL,
        format!("distorted bosonic six-state, eps in {{0.5, 1, 2}}: max dev {worst:.2e}, spread over eps {spread:.2e}"),
    )
}

fn interference6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = Vec::new();
    for gamma in [0.2, 0.5, 0.8, 1.1, 1.4] {
        points.push(Params::new().with("e", 0.5).with("g", 0.4).with("gamma", gamma));
    }
    for e in [0.25, 0.75, 1.5, 2.5] {
        points.push(Params::new().with("e", e).with("g", 0.5).with("gamma", 0.35));
    }
    for p in &points {
        let num = numeric(&make_model("interference6", p).unwrap());
        worst = worst.max(num.max_abs_diff(&analytic_probabilities("interference6", p).unwrap()));
    }
    outcome(worst <= TOL, format!("interference six-state, gamma and e sweeps ({} points): max dev {worst:.2e}", points.len()))
}

fn fermionic_six() -> Outcome {
    let g = [0.35, 0.45, 0.5];
    let base = Params::new().with("e1", 0.45).with("e2", 0.0).with("e3", -0.35).with("g1", g[0]).with("g2", g[1]).with("g3", g[2]).with("beta", 0.5);
    let pk = do_probabilities(0.5, &g);
    let pk = [pk[0], pk[1], pk[2]];
    // this band decreases; the closed forms assume an increasing band, and
    // reversing it transposes them
    let below = ProbabilityMatrix(six_state_below(pk).0.transpose());
    let above = ProbabilityMatrix(six_state_above(pk).0.transpose());
    let mut worst: f64 = 0.0;
    let mut worst_col1: f64 = 0.0;
    for x in [-0.5, 0.0, 0.9, 1.1, 2.0, 2.5] {
        let p = base.clone().with("x", x);
        // slope gaps of order beta |1 - x| converge slowly, so widen the window
        let cfg = if (x - 1.0f64).abs() < 0.5 { IntegrationConfig { t_half: 8000.0, ..Default::default() } } else { IntegrationConfig::default() };
        let num = transition_matrix_numeric(&make_model("fermionic", &p).unwrap(), &cfg).unwrap();
        let formula = if x < 1.0 { &below } else { &above };
        worst = worst.max(num.max_abs_diff(formula));
        worst_col1 = worst_col1.max(max_diff(&num.column(0), &formula.column(0)));
    }
    outcome(
        worst <= TOL,
        format!("fermionic six-state, x in {{-0.5, 0, 0.9}} and {{1.1, 2, 2.5}}: max dev {worst:.2e} (from level 1: {worst_col1:.2e})"),
    )
}

fn ten_state(x: f64) -> Params {
    Params::new()
        .with("N", 5.0)
        .with("NF", 2.0)
        .with("beta", 1.0)
        .with("x", x)
        .with("g1", 0.4)
        .with("g2", 0.35)
        .with("g3", 0.45)
        .with("g4", 0.3)
        .with("e1", -0.75)
        .with("e2", -0.25)
        .with("e3", 0.4)
        .with("e4", 1.0)
}

fn fermionic_ten() -> Outcome {
    let pk = do_probabilities(1.0, &[0.4, 0.35, 0.45, 0.3]);
    let pk = [pk[0], pk[1], pk[2], pk[3]];
    let mut worst: f64 = 0.0;
    for x in [-0.5, 0.5, 2.0, 2.5] {
        let model = make_model("fermionic", &ten_state(x)).unwrap();
        let cols = transition_columns(&model, &IntegrationConfig::ten_state(), &[1, 2]).unwrap();
        let want = if x < 1.0 { ten_state_below_columns(pk) } else { ten_state_above_columns(pk) };
        worst = worst.max(max_diff(&cols[0], &want[0])).max(max_diff(&cols[1], &want[1]));
    }
    let p0 = ten_state(0.0);
    let det = analytic_probabilities("fermionic", &p0).unwrap();
    let ans = ansatz_probabilities(&make_model("fermionic", &p0).unwrap()).unwrap();
    let agree = det.max_abs_diff(&ans);
    outcome(
        worst <= TOL && agree <= 1e-12,
        format!("ten-state sector, levels 2 and 3 at x in {{-0.5, 0.5, 2, 2.5}}, dt = 5e-5: max dev {worst:.2e}; determinant vs ansatz at x = 0: {agree:.1e}"),
    )
}

fn exact_crossings() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let ten_a = |nf: f64| {
        Params::new()
            .with("N", 5.0)
            .with("NF", nf)
            .with("x", 2.5)
            .with("beta", 1.0)
            .with("g1", 0.44)
            .with("g2", 0.36)
            .with("g3", 0.28)
            .with("g4", 0.34)
            .with("e1", 2.5)
            .with("e2", 1.3)
            .with("e3", -0.6)
            .with("e4", -2.7)
    };
    let cases: Vec<(&str, &str, Params, usize, bool)> = vec![
        ("bosonic6", "bosonic6", Params::new().with("e1", -1.0).with("e2", 1.0).with("g1", 0.67).with("g2", 0.469), 3, false),
        ("distorted", "distorted-bosonic6", Params::new().with("gamma", 1.123).with("g", 1.5).with("e1", 1.0).with("e2", -2.0), 3, false),
        ("interference6", "interference6", Params::new().with("e", 1.0).with("gamma", 1.0).with("g", 0.65), 3, true),
        ("ten-state", "fermionic", ten_a(2.0), 12, false),
    ];
    for (label, name, p, want, at_zero) in cases {
        let r = check_ic2(&make_model(name, &p).unwrap(), &[1.0, 0.5]).unwrap();
        let gaps_ok = r.verdicts.iter().filter(|v| v.classified_exact).all(|v| v.per_scale.iter().all(|s| s.gap < s.tolerance));
        let zero_ok = !at_zero || r.verdicts.iter().filter(|v| v.classified_exact).all(|v| v.min_gap_time.abs() < 1e-6);
        pass &= r.exact == want && r.holds && gaps_ok && zero_ok;
        lines.push(format!("{label} {}/{want}", r.exact));
    }
    // the three-particle sector also has ten states
    let r3 = check_ic2(&make_model("fermionic", &ten_a(3.0)).unwrap(), &[1.0, 0.5]).unwrap();
    lines.push(format!("(three-fermion sector {})", r3.exact));
    outcome(pass, format!("exact crossings at coupling scales {{1, 0.5}}: {}", lines.join(", ")))
}

fn falsification() -> Outcome {
    let model = make_model("four-state-ic1-broken", &Params::new()).unwrap();
    let ic1 = check_ic1(&model);
    let d = numeric(&model).max_abs_diff(&ansatz_probabilities(&model).unwrap());
    outcome(
        d > 5e-3,
        format!("detuned four-state model: max |numeric - ansatz| = {d:.2e} (needs > 5e-3); zero-area check holds = {}", ic1.holds),
    )
}

fn invariants() -> Outcome {
    let mut unit: f64 = 0.0;
    let mut stoch: f64 = 0.0;
    let mut gauge: f64 = 0.0;
    for name in NAMES {
        let model = make_model(name, &Params::new()).unwrap();
        let cfg = IntegrationConfig::default();
        let s = scattering_matrix_numeric(&model, &cfg).unwrap();
        unit = unit.max(s.unitarity_defect());
        let p = s.probabilities();
        stoch = stoch.max(p.stochasticity_defect());
        let n = model.n_levels();
        let perm: Vec<usize> = (0..n).rev().collect();
        for g in [GaugeSpec::TimeShift(2.5), GaugeSpec::CommonSlope(0.3), GaugeSpec::Relabel(perm.clone())] {
            let other = transition_matrix_numeric(&model.apply_gauge(&g).unwrap(), &cfg).unwrap();
            let want = if matches!(g, GaugeSpec::Relabel(_)) { p.permuted(&perm) } else { p.clone() };
            gauge = gauge.max(other.max_abs_diff(&want));
        }
    }

    let mut paths: f64 = 0.0;
    for x in [0.0, 2.0] {
        let model = make_model("fermionic", &ten_state(x)).unwrap();
        let s = ansatz_scattering(&model).unwrap();
        for a in 0..model.n_levels() {
            for b in 0..model.n_levels() {
                let sum: num_complex::Complex64 = enumerate_paths(&model, a, b).unwrap().iter().map(|p| p.amplitude()).sum();
                paths = paths.max((sum - s.get(b, a)).norm());
            }
        }
    }

    let (e1, e2, e3, g1, g2, g3, x, beta) = (-1.0, 0.0, 1.5, 0.55, 0.4125, 0.4675, 2.5, 1.0);
    let fermion = build_sector_model(&SecondQuantizedSpec::fermion(beta, vec![e1, e2, e3], vec![g1, g2, g3], x), 2).unwrap()
        == DiabaticModel::new(
            vec![beta, beta, beta, 0.0, 0.0, 0.0],
            vec![e1 * (1.0 - x), e2 * (1.0 - x), e3 * (1.0 - x), e1 + e2, e1 + e3, e2 + e3],
            vec![(0, 3, -g2), (0, 4, -g3), (1, 3, g1), (1, 5, -g3), (2, 4, g1), (2, 5, g2)],
        )
        .unwrap();
    let (e1, e2, g1, g2) = (-1.0, 1.0, 0.67, 0.469);
    let boson = build_sector_model(&SecondQuantizedSpec::boson(vec![e1, e2], vec![g1, g2]), 2).unwrap()
        == DiabaticModel::new(
            vec![-1.0, -1.0, -1.0, 0.0, 0.0, 1.0],
            vec![2.0 * e2, e1 + e2, 2.0 * e1, e2, e1, 0.0],
            vec![(0, 3, SQRT_2 * g2), (1, 3, g1), (1, 4, g2), (2, 4, SQRT_2 * g1), (3, 5, SQRT_2 * g2), (4, 5, SQRT_2 * g1)],
        )
        .unwrap();

    let pass = unit <= 1e-4 && stoch <= 1e-4 && gauge <= TOL && paths <= 1e-12 && fermion && boson;
    outcome(
        pass,
        format!(
            "invariants: unitarity {unit:.1e}, stochasticity {stoch:.1e}, gauge {gauge:.1e}, path sum {paths:.1e}, builders exact {}",
            fermion && boson
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, four_state_interference),
        (2, four_state_plain),
        (3, bosonic6),
        (4, distorted),
        (5, interference6),
        (6, fermionic_six),
        (7, fermionic_ten),
        (8, exact_crossings),
        (9, falsification),
        (10, invariants),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("MLZ_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let start = Instant::now();
    let mut failed = 0;
    for (k, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {k:>2}: {} {} [{:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} failed, {:.0} s total", failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
