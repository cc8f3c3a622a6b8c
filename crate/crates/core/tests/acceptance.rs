//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use coopt::continuous::{
    build_potential, delta_trap_demo, euler_step, kernel_step, overlap, solve_ground, ContinuousProblem,
    DeltaTrapConfig, Grid1D, GridField, GroundConfig, Integrator, Kernel, KernelShape,
};
use coopt::discrete::{
    alpha_update, offset_update, pairwise_update, solve_discrete, solve_discrete_from, step, BoundProfile, CoopConfig,
    Variant, Weights,
};
use coopt::energy::EnergyModel;
use coopt::gen::{seeded_model, InstanceSpec};
use coopt::oracle::{bound_excess, energy_table, enumerate, ground_eig};
use coopt::par;
use coopt::problem::DiscreteProblemFile;
use coopt::soft::{maxproduct_update, sumproduct_update, SoftAssignment};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const INSTANCES: u64 = 100;

fn instances(count: u64) -> Vec<EnergyModel> {
    let spec = InstanceSpec::default();
    (0..count).map(|k| seeded_model(&spec, SEED, k)).collect()
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bound_validity() -> Outcome {
    let models = instances(INSTANCES);
    let config = CoopConfig::default();
    // (worst bound excess, worst decrease, sweeps checked) per instance
    let per: Vec<(f64, f64, usize)> = par::map_slice(&models, |m| {
        let energies = energy_table(m).unwrap();
        let subs = m.decompose();
        let mut p = BoundProfile::zeros(m, Variant::Pairwise);
        let mut excess = bound_excess(&energies, &p.tables, m.shift());
        let mut drop: f64 = 0.0;
        for _ in 0..100 {
            let next = step(&p, m, &subs, &config).unwrap();
            for (a, b) in next.tables.iter().zip(&p.tables) {
                for (x, y) in a.iter().zip(b) {
                    drop = drop.max(y - x);
                }
            }
            p = next;
            excess = excess.max(bound_excess(&energies, &p.tables, m.shift()));
        }
        (excess, drop, 101)
    });
    let excess = per.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let drop = per.iter().map(|r| r.1).fold(0.0, f64::max);
    let checked: usize = per.iter().map(|r| r.2).sum();
    let bad_bound = per.iter().filter(|r| r.0 > 1e-9).count();
    let bad_mono = per.iter().filter(|r| r.1 > 1e-9).count();
    outcome(
        bad_bound == 0 && bad_mono == 0,
        format!(
            "{INSTANCES} instances, {checked} bound checks; max excess {excess:.2e}, max decrease {drop:.2e}; \
             violations: bound {bad_bound}, monotone {bad_mono}"
        ),
    )
}

fn certificate_soundness() -> Outcome {
    let models = instances(INSTANCES);
    let rows: Vec<(bool, bool, f64)> = par::map_slice(&models, |m| {
        let r = solve_discrete(m, &CoopConfig::default()).unwrap();
        let best = enumerate(m).unwrap();
        let lb_ok = r.certificate.lower_bound <= best.energy + 1e-9;
        (r.certificate.certified, lb_ok, r.energy - best.energy)
    });
    let certified = rows.iter().filter(|r| r.0).count();
    let wrong = rows.iter().filter(|r| r.0 && r.2.abs() > 1e-9).count();
    let bad_lb = rows.iter().filter(|r| !r.1).count();
    outcome(
        wrong == 0 && bad_lb == 0,
        format!(
            "certified {certified}/{INSTANCES} ({:.0}%), certified but not optimal {wrong}, lower bound above optimum {bad_lb}",
            100.0 * certified as f64 / INSTANCES as f64
        ),
    )
}

fn variant_equivalence() -> Outcome {
    let models = instances(20);
    let rows: Vec<(f64, f64)> = par::map_slice(&models, |m| {
        let n = m.n();
        let lambda = 0.6;
        let a = 0.7 / (n - 1) as f64;
        let config = CoopConfig {
            lambda,
            weights: Some(Weights::constant(n, 0.0, a)),
            ..CoopConfig::default()
        };
        let mut pw = BoundProfile::zeros(m, Variant::Pairwise);
        let mut al = BoundProfile::zeros(m, Variant::Alpha);
        let mut chain: f64 = 0.0;
        for _ in 0..50 {
            pw = pairwise_update(&pw, m, &config).unwrap();
            al = alpha_update(&al, m, lambda * a).unwrap();
            for (x, y) in pw.tables.iter().zip(&al.tables) {
                for (u, v) in x.iter().zip(y) {
                    chain = chain.max((u - (1.0 - lambda) * v).abs());
                }
            }
        }
        let hbar = 1.0;
        let alpha = 0.5 / (n - 1) as f64;
        let mut off = BoundProfile::zeros(m, Variant::Offset);
        let mut soft = SoftAssignment::ones(m, hbar).unwrap();
        let mut dual: f64 = 0.0;
        for _ in 0..50 {
            off = offset_update(&off, m, alpha).unwrap();
            soft = maxproduct_update(&soft, m, alpha).unwrap();
            for (x, y) in off.tables.iter().zip(soft.to_bounds()) {
                for (u, v) in x.iter().zip(y) {
                    dual = dual.max((u - v).abs());
                }
            }
        }
        (chain, dual)
    });
    let chain = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let dual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        chain <= 1e-12 && dual <= 1e-9,
        format!("20 instances x 50 sweeps; pairwise vs (1-λ)·alpha max diff {chain:.2e}, offset vs -ħ ln maxprod max diff {dual:.2e}"),
    )
}

fn initial_condition_robustness() -> Outcome {
    let models = instances(20);
    let config = CoopConfig {
        variant: Variant::Offset,
        max_iters: 5000,
        ..CoopConfig::default()
    };
    let rows: Vec<(bool, f64)> = par::map_range(models.len(), |k| {
        let m = &models[k];
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ k as u64);
        let runs: Vec<_> = (0..10)
            .map(|_| {
                let init = BoundProfile::random(m, Variant::Offset, 10.0, &mut rng);
                solve_discrete_from(m, &config, init).unwrap()
            })
            .collect();
        let all = runs.iter().all(|r| r.converged);
        let spread = runs
            .iter()
            .map(|r| r.profile.sup_distance(&runs[0].profile))
            .fold(0.0, f64::max);
        (all, spread)
    });
    let flagged = rows.iter().filter(|r| !r.0).count();
    let disagree = rows.iter().filter(|r| r.0 && r.1 > 1e-6).count();
    let spread = rows.iter().filter(|r| r.0).map(|r| r.1).fold(0.0, f64::max);
    outcome(
        disagree == 0,
        format!(
            "20 instances x 10 starts; flagged non-convergent {flagged}/20 ({:.0}%), converged but disagreeing {disagree}, max spread {spread:.2e}",
            100.0 * flagged as f64 / 20.0
        ),
    )
}

fn harmonic(mass: f64) -> ContinuousProblem {
    ContinuousProblem::new(1.0)
        .unwrap()
        .with_particle(mass, |x| 0.5 * x * x)
        .unwrap()
}

fn coupled() -> ContinuousProblem {
    ContinuousProblem::new(1.0)
        .unwrap()
        .with_particle(1.0, |x| 0.5 * x * x)
        .unwrap()
        .with_particle(1.0, |x| 0.5 * x * x)
        .unwrap()
        .with_pair(0, 1, |x, y| 0.5 * (x - y) * (x - y))
        .unwrap()
        .with_pair(1, 0, |x, y| 0.5 * (x - y) * (x - y))
        .unwrap()
}

fn normalization() -> Outcome {
    let models = instances(20);
    let soft_err = par::map_slice(&models, |m| {
        let mut worst: f64 = 0.0;
        for hbar in [1.0, 0.05] {
            let mut s = SoftAssignment::uniform(m, hbar).unwrap();
            for _ in 0..50 {
                s = sumproduct_update(&s, m).unwrap();
                for t in &s.tables {
                    worst = worst.max((t.iter().map(|v| v * v).sum::<f64>() - 1.0).abs());
                }
            }
        }
        worst
    })
    .into_iter()
    .fold(0.0, f64::max);

    let grid = Grid1D::new(-8.0, 8.0, 201).unwrap();
    let mut grid_err: f64 = 0.0;
    for problem in [harmonic(1.0), coupled()] {
        let gp = problem.discretize(&grid).unwrap();
        let kernel = Kernel::new(&gp, &gp.default_sigma2(), 1e-3, KernelShape::Discrete).unwrap();
        let start = GridField::from_fn(&grid, gp.particles(), |i, x| (-(x - 1.0 - i as f64).powi(2)).exp()).unwrap();
        let mut a = start.clone();
        let mut b = start;
        for _ in 0..300 {
            a = kernel_step(&a, &gp, &kernel).unwrap();
            let v = build_potential(&b, &gp).unwrap();
            b = euler_step(&b, &v, &gp, &kernel).unwrap();
            grid_err = grid_err
                .max(a.normalization_error(&grid))
                .max(b.normalization_error(&grid));
        }
    }
    outcome(
        soft_err <= 1e-12 && grid_err <= 1e-9,
        format!("sum-product max |Σψ²-1| {soft_err:.2e} (1000 sweeps); grid max |hΣψ²-1| {grid_err:.2e} (1200 steps)"),
    )
}

fn schrodinger_fixed_point() -> Outcome {
    let grid = Grid1D::new(-8.0, 8.0, 401).unwrap();
    let problem = harmonic(1.0);
    let v: Vec<f64> = grid.points().map(|x| 0.5 * x * x).collect();
    let eig = ground_eig(&v, &grid, 1.0, 1.0).unwrap();
    let mut lines = Vec::new();
    let mut any = false;
    for (integrator, dt) in [(Integrator::Euler, 2e-4), (Integrator::Kernel, 1e-3)] {
        let config = GroundConfig {
            dt,
            tol: 1e-8,
            max_iters: 1_000_000,
            integrator,
            ..GroundConfig::default()
        };
        let r = solve_ground(&problem, &grid, &config).unwrap();
        let de = (r.result.energies[0] - eig.eigenvalue).abs();
        let ov = overlap(&r.field.psi[0], &eig.eigenvector, &grid);
        let res = r.result.residuals[0];
        let ok = r.result.converged && de <= 1e-2 && ov >= 0.999 && res <= 1e-4;
        any |= ok;
        lines.push(format!(
            "{}: {} E={:.6} |ΔE|={de:.2e} overlap={ov:.6} r={res:.2e} steps={}",
            integrator.name(),
            if ok { "ok" } else { "miss" },
            r.result.energies[0],
            r.result.iterations
        ));
    }
    outcome(any, format!("λ0={:.6}; {}", eig.eigenvalue, lines.join("; ")))
}

fn box_benchmark() -> Outcome {
    let grid = Grid1D::new(0.0, 1.0, 201).unwrap();
    let problem = ContinuousProblem::new(1.0)
        .unwrap()
        .with_particle(1.0, |_| 0.0)
        .unwrap();
    let eig = ground_eig(&vec![0.0; grid.len()], &grid, 1.0, 1.0).unwrap();
    let config = GroundConfig {
        dt: 5e-6,
        tol: 1e-8,
        max_iters: 2_000_000,
        ..GroundConfig::default()
    };
    let r = solve_ground(&problem, &grid, &config).unwrap();
    let rel = (r.result.energies[0] - eig.eigenvalue).abs() / eig.eigenvalue;
    let exact = std::f64::consts::PI.powi(2) / 2.0;
    outcome(
        r.result.converged && rel <= 0.02,
        format!(
            "E={:.6} λ0={:.6} (π²/2={exact:.6}) relative diff {rel:.2e}, overlap {:.6}",
            r.result.energies[0],
            eig.eigenvalue,
            overlap(&r.field.psi[0], &eig.eigenvector, &grid)
        ),
    )
}

fn coupled_self_consistency() -> Outcome {
    let grid = Grid1D::new(-8.0, 8.0, 201).unwrap();
    let config = GroundConfig {
        dt: 1e-3,
        tol: 1e-8,
        max_iters: 1_000_000,
        ..GroundConfig::default()
    };
    let r = solve_ground(&coupled(), &grid, &config).unwrap();
    let mut worst_de: f64 = 0.0;
    for i in 0..2 {
        let eig = ground_eig(&r.potential.v[i], &grid, 1.0, 1.0).unwrap();
        worst_de = worst_de.max((eig.eigenvalue - r.result.energies[i]).abs());
    }
    let worst_r = r.result.residuals.iter().copied().fold(0.0, f64::max);
    outcome(
        r.result.converged && worst_r <= 1e-4 && worst_de <= 1e-3,
        format!(
            "E={:?} max r={worst_r:.2e} max |E-λ0(V)|={worst_de:.2e} steps={}",
            r.result.energies.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>(),
            r.result.iterations
        ),
    )
}

fn delta_trap() -> Outcome {
    let grid = Grid1D::new(-8.0, 8.0, 201).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for x0 in [3.0, 0.0] {
        let r = delta_trap_demo(
            &harmonic(1.0),
            &grid,
            &DeltaTrapConfig {
                positions: vec![x0],
                ..DeltaTrapConfig::default()
            },
        )
        .unwrap();
        pass &= r.trapped && r.escaped;
        lines.push(format!(
            "start {x0}: unsmoothed max change {:.1e} over 100 steps, smoothed overlap {:.6}",
            r.trap_max_change, r.escape_overlaps[0]
        ));
    }
    outcome(pass, lines.join("; "))
}

fn integrator_order() -> Outcome {
    let grid = Grid1D::new(-8.0, 8.0, 401).unwrap();
    let gp = harmonic(1.0).discretize(&grid).unwrap();
    let horizon = 0.5;
    let start = GridField::from_fn(&grid, 1, |_, x| (-(x - 1.5).powi(2)).exp()).unwrap();
    let gaps: Vec<f64> = par::map_slice(&[4e-4, 2e-4, 1e-4, 5e-5], |&dt| {
        let kernel = Kernel::new(&gp, &[1.0], dt, KernelShape::Discrete).unwrap();
        let steps = (horizon / dt).round() as usize;
        let mut a = start.clone();
        let mut b = start.clone();
        for _ in 0..steps {
            a = kernel_step(&a, &gp, &kernel).unwrap();
            let v = build_potential(&b, &gp).unwrap();
            b = euler_step(&b, &v, &gp, &kernel).unwrap();
        }
        a.sup_distance(&b)
    });
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    outcome(
        ratios.iter().all(|r| (r - 0.5).abs() <= 0.15),
        format!(
            "T={horizon}; discrepancy {:?}; ratios {:?}",
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn without_wall_time(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    let model = seeded_model(&InstanceSpec::default(), SEED, 3);
    std::fs::write(
        &problem,
        serde_json::to_string(&DiscreteProblemFile::from_model(&model)).unwrap(),
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_coopt");
    let runs: [(&str, &[&str]); 2] = [
        (
            "solve-discrete",
            &["--variant", "offset", "--init", "random", "--seed", "42"],
        ),
        ("solve-soft", &["--mode", "sumprod", "--hbar", "0.5"]),
    ];
    let mut identical = true;
    let mut count = 0;
    for (cmd, flags) in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "4"] {
            let out = dir.path().join(format!("{cmd}-{count}"));
            count += 1;
            let status = Command::new(bin)
                .env("COOPT_THREADS", threads)
                .arg(cmd)
                .args(flags)
                .arg("--out")
                .arg(&out)
                .arg(&problem)
                .output()
                .unwrap();
            assert!(status.status.code().is_some_and(|c| c <= 1), "{cmd} failed");
            outputs.push(without_wall_time(&out.join("result.json")));
        }
        identical &= outputs.iter().all(|o| *o == outputs[0]);
    }
    outcome(
        identical,
        format!("{count} CLI runs (1 and 4 threads, repeated) of solve-discrete and solve-soft; result.json identical: {identical}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("bound validity and monotone tightening", bound_validity),
        ("certificate soundness", certificate_soundness),
        ("variant equivalence chain", variant_equivalence),
        ("initial-condition robustness", initial_condition_robustness),
        ("normalization", normalization),
        ("harmonic fixed point", schrodinger_fixed_point),
        ("box benchmark", box_benchmark),
        ("coupled mean-field self-consistency", coupled_self_consistency),
        ("delta trap", delta_trap),
        ("integrator order", integrator_order),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {} {name} [{:.1}s]: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
