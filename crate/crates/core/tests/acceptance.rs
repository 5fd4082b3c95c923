//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use miskrige::experiments::{run_study, StudyResult};
use miskrige::geometry::{make_design, DesignKind, DesignSet, Point, Region};
use miskrige::kernels::fem::fem_eigendecompose;
use miskrige::kernels::matern::{matern_general, matern_half_integer};
use miskrige::kernels::wavelet::WaveletTable;
use miskrige::kernels::{Kernel, KernelSpec};
use miskrige::kriging::{self, KrigingError};
use miskrige::linalg::norm2;

use common::{config, jittered, min_singular_value};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(cond: bool, fails: &mut Vec<String>, msg: impl FnOnce() -> String) {
    if !cond {
        fails.push(msg());
    }
}

fn outcome(fails: Vec<String>, summary: String) -> Outcome {
    if fails.is_empty() {
        Outcome { pass: true, detail: summary }
    } else {
        let shown: Vec<_> = fails.iter().take(3).cloned().collect();
        Outcome {
            pass: false,
            detail: format!("{summary}; {} failure(s): {}", fails.len(), shown.join(" | ")),
        }
    }
}

fn within(v: f64, band: [f64; 2]) -> bool {
    v >= band[0] && v <= band[1]
}

fn criterion_1() -> Outcome {
    let mut fails = Vec::new();
    let mut worst_matern: f64 = 0.0;
    for m in 0..4u32 {
        let nu = m as f64 + 0.5;
        for i in 0..=400 {
            let r = 10f64.powf(-3.0 + 4.0 * i as f64 / 400.0);
            let closed = matern_half_integer(1.0, m, r);
            let general = matern_general(1.0, nu, r);
            let rel = ((general - closed) / closed).abs();
            worst_matern = worst_matern.max(rel);
            check(rel <= 1e-8, &mut fails, || format!("matern nu={nu} r={r:e} rel={rel:e}"));
        }
    }

    let mut worst_kl: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(s, n) in &[(1u32, 1usize), (1, 10), (2, 25), (3, 64)] {
        let k = Kernel::new(KernelSpec::KlTrig { s, truncation: n }).unwrap();
        let kl = k.as_kl_trig().unwrap();
        for _ in 0..200 {
            let (x, y): (f64, f64) = (rng.gen(), rng.gen());
            let d = (kl.eval(x, y) - kl.eval_series(x, y)).abs();
            worst_kl = worst_kl.max(d);
            check(d <= 1e-12, &mut fails, || format!("kl-trig s={s} N={n} x={x} y={y} diff={d:e}"));
        }
    }

    let mut worst_wavelet: f64 = 0.0;
    for p in 1..=2usize {
        let table = WaveletTable::build(p, 12).unwrap();
        for level in 0..=5usize {
            let s = if p == 1 { 0.75 } else { 1.5 };
            let k = Kernel::wavelet_with_table(s, level, table.clone()).unwrap();
            let w = k.as_wavelet().unwrap();
            for _ in 0..60 {
                let x: f64 = rng.gen_range(0.0..4.0);
                let y: f64 = if rng.gen_bool(0.3) { x } else { rng.gen_range(0.0..4.0) };
                let mut brute = 0.0;
                for kk in -10i64..=10 {
                    brute += table.phi(x - kk as f64) * table.phi(y - kk as f64);
                }
                for j in 0..=level {
                    let sc = (j as f64).exp2();
                    let weight = 2f64.powf(j as f64 * (1.0 - 2.0 * s));
                    let mut t = 0.0;
                    for kk in -10i64..=(4 * (1i64 << j) + 10) {
                        t += table.psi(sc * x - kk as f64) * table.psi(sc * y - kk as f64);
                    }
                    brute += weight * t;
                }
                let d = (w.eval(x, y) - brute).abs();
                worst_wavelet = worst_wavelet.max(d);
                check(d <= 1e-8, &mut fails, || format!("wavelet p={p} N={level} x={x} y={y} diff={d:e}"));
            }
        }
    }

    let mut worst_fem: f64 = 0.0;
    for &(mesh, degree) in &[(1usize, 1usize), (4, 1), (16, 2), (64, 1), (64, 2)] {
        let k = Kernel::new(KernelSpec::Fem { mesh, degree }).unwrap();
        let asm = k.as_fem().unwrap();
        let pairs = fem_eigendecompose(asm, asm.dim()).unwrap();
        for _ in 0..40 {
            let (x, y): (f64, f64) = (rng.gen(), rng.gen());
            let spectral: f64 = pairs
                .iter()
                .map(|(lam, v)| asm.basis_dot(x, v) * asm.basis_dot(y, v) / (1.0 + lam))
                .sum();
            let d = (asm.eval(x, y) - spectral).abs();
            worst_fem = worst_fem.max(d);
            check(d <= 1e-9, &mut fails, || format!("fem N={mesh} p={degree} x={x} y={y} diff={d:e}"));
        }
    }
    outcome(
        fails,
        format!(
            "max deviations: matern rel {worst_matern:.1e}, kl-trig {worst_kl:.1e}, wavelet {worst_wavelet:.1e}, fem {worst_fem:.1e}"
        ),
    )
}

fn random_kernel(rng: &mut ChaCha8Rng) -> (Kernel, Region) {
    match rng.gen_range(0..4) {
        0 => {
            let nu = [0.5, 1.5, 2.5, 0.8][rng.gen_range(0..4)];
            let kappa = rng.gen_range(1.0..10.0);
            (Kernel::new(KernelSpec::Matern { sigma: 1.0, nu, kappa, d: 1 }).unwrap(), Region::unit(1).unwrap())
        }
        1 => {
            let s = rng.gen_range(1..=3);
            let truncation = rng.gen_range(2..=12);
            (Kernel::new(KernelSpec::KlTrig { s, truncation }).unwrap(), Region::unit(1).unwrap())
        }
        2 => {
            let order = rng.gen_range(1..=2);
            let s = if order == 1 { 0.75 } else { 1.5 };
            let level = rng.gen_range(2..=6);
            let spec = KernelSpec::Wavelet { s, level, order, resolution: 12 };
            (Kernel::new(spec).unwrap(), Region::interval(0.0, 4.0).unwrap())
        }
        _ => {
            let mesh = rng.gen_range(8..=64);
            let degree = rng.gen_range(1..=2);
            (Kernel::new(KernelSpec::Fem { mesh, degree }).unwrap(), Region::unit(1).unwrap())
        }
    }
}

fn criterion_2() -> Outcome {
    let mut fails = Vec::new();
    let lambdas = [1e-6, 1e-3, 1e-1];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tightest_native: f64 = f64::INFINITY;
    for inst in 0..50 {
        let s = rng.gen_range(1..=3u32);
        let truncation = rng.gen_range(2..=10usize);
        let kernel = Kernel::new(KernelSpec::KlTrig { s, truncation }).unwrap();
        let kl = kernel.as_kl_trig().unwrap();
        let a0: f64 = rng.gen_range(-1.0..1.0);
        let a: Vec<f64> = (0..truncation).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..truncation).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm_sq = kl.rkhs_norm_sq(a0, &a, &b);
        let n = rng.gen_range(3..=40);
        let design = jittered(n, 0.0, 1.0, inst);
        let f = |x: f64| {
            a0 + (1..=truncation)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 * x;
                    a[k - 1] * t.cos() + b[k - 1] * t.sin()
                })
                .sum::<f64>()
        };
        let y: Vec<f64> = design.scalars().iter().map(|&x| f(x)).collect();
        let lambda = lambdas[inst as usize % 3];
        let model = kriging::fit(&kernel, &design, &y, lambda).unwrap();
        let residual = norm2(&model.residual_on_design());
        let bound = lambda.sqrt() * norm_sq.sqrt();
        tightest_native = tightest_native.min(bound - residual);
        check(residual <= bound + 1e-8, &mut fails, || {
            format!("native-norm target: residual {residual:e} > {bound:e} (instance {inst})")
        });
        let native = model.rkhs_norm_sq();
        check(native <= norm_sq + 1e-8, &mut fails, || {
            format!("native-norm target: norm {native:e} > {norm_sq:e} (instance {inst})")
        });
    }

    let mut per_family = [0usize; 4];
    for inst in 0..50u64 {
        let (kernel, region) = random_kernel(&mut rng);
        let family = match kernel.spec() {
            KernelSpec::Matern { .. } => 0,
            KernelSpec::KlTrig { .. } => 1,
            KernelSpec::Wavelet { .. } => 2,
            KernelSpec::Fem { .. } => 3,
        };
        per_family[family] += 1;
        let n = rng.gen_range(4..=60);
        let kind = [DesignKind::MidpointGrid, DesignKind::JitteredGrid, DesignKind::IidUniform][rng.gen_range(0..3)];
        let design = make_design(kind, n, &region, inst).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lambda = lambdas[rng.gen_range(0..3)];
        let model = kriging::fit(&kernel, &design, &y, lambda).unwrap();
        let sigma = model.sigma_min().unwrap().max(0.0);
        let ny = norm2(&y);
        let residual = norm2(&model.residual_on_design());
        let bound = lambda / (sigma + lambda) * ny;
        check(residual <= bound + 1e-8, &mut fails, || {
            format!("data-only bound: residual {residual:e} > {bound:e} ({:?}, n={n})", kernel.spec())
        });
        let native = model.rkhs_norm_sq();
        let growth = ny * ny / (sigma + lambda);
        check(native <= growth * (1.0 + 1e-12) + 1e-8, &mut fails, || {
            format!("data-only bound: norm {native:e} > {growth:e} ({:?}, n={n})", kernel.spec())
        });
    }
    outcome(
        fails,
        format!(
            "50 native-norm instances (smallest margin {tightest_native:.1e}), 50 data-only instances \
             (matern/kl/wavelet/fem = {:?})",
            per_family
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut fails = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sing, mut nonsing) = (0, 0);
    for inst in 0..30u64 {
        let truncation = rng.gen_range(1..=6usize);
        let s = rng.gen_range(1..=2u32);
        let n = rng.gen_range(1..=2 * truncation + 4);
        let kernel = Kernel::new(KernelSpec::KlTrig { s, truncation }).unwrap();
        let design = jittered(n, 0.0, 1.0, 100 + inst);
        let sv = min_singular_value(&kernel.gram(design.points()));
        if n <= 2 * truncation + 1 {
            nonsing += 1;
            check(sv > 1e-10, &mut fails, || format!("kl-trig n={n} N={truncation} s={s}: sigma_min {sv:e}"));
        } else {
            sing += 1;
            check(sv <= 1e-10, &mut fails, || format!("kl-trig n={n} > 2N+1 N={truncation}: sigma_min {sv:e}"));
        }
    }

    let tables = [WaveletTable::build(1, 12).unwrap(), WaveletTable::build(2, 12).unwrap()];
    let mut worst_wavelet = f64::INFINITY;
    for inst in 0..30u64 {
        let p = 1 + (inst % 2) as usize;
        let n = rng.gen_range(2..=64);
        let design = jittered(n, 0.0, 4.0, 200 + inst);
        let q = design.separation_radius();
        let reach = (2 * p - 1) as f64;
        let mut level = 0;
        while (-(level as f64)).exp2() * reach >= q {
            level += 1;
        }
        level += rng.gen_range(0..=2);
        let s = if p == 1 { 0.75 } else { 1.5 };
        let kernel = Kernel::wavelet_with_table(s, level, tables[p - 1].clone()).unwrap();
        let gram = kernel.gram(design.points());
        let sv = min_singular_value(&gram);
        worst_wavelet = worst_wavelet.min(sv);
        check(sv > 1e-10, &mut fails, || format!("wavelet p={p} n={n} N={level} q={q:e}: sigma_min {sv:e}"));
        if p == 1 {
            let finest = (level as f64).exp2();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let (x, y) = (design.points()[i].coords[0], design.points()[j].coords[0]);
                    let term = kernel.as_wavelet().unwrap().level_term(level, x, y);
                    check(term == 0.0, &mut fails, || {
                        format!("haar finest level couples points {x} and {y} at N={level} (scale {finest})")
                    });
                }
            }
        }
    }

    let mut worst_fem = f64::INFINITY;
    for inst in 0..30u64 {
        let n = rng.gen_range(2..=48);
        let design = jittered(n, 0.0, 1.0, 300 + inst);
        let q = design.separation_radius();
        let mesh = (1.0 / q).floor() as usize + 1 + rng.gen_range(0..=3);
        let degree = rng.gen_range(1..=2);
        let kernel = Kernel::new(KernelSpec::Fem { mesh, degree }).unwrap();
        let sv = min_singular_value(&kernel.gram(design.points()));
        worst_fem = worst_fem.min(sv);
        check(sv > 1e-10, &mut fails, || format!("fem n={n} N={mesh} q={q:e}: sigma_min {sv:e}"));
    }
    outcome(
        fails,
        format!(
            "kl-trig {nonsing} invertible / {sing} singular instances; min sigma_min wavelet {worst_wavelet:.1e}, fem {worst_fem:.1e}"
        ),
    )
}

fn study(name: &str) -> StudyResult {
    run_study(&config(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn criterion_4() -> Outcome {
    let mut fails = Vec::new();
    let well = study("matern-well-specified");
    let under = study("matern-under-smoothed");
    let (ws, wr) = (well.l2_fit.slope, well.l2_fit.r_squared);
    let (us, ur) = (under.l2_fit.slope, under.l2_fit.r_squared);
    check(within(ws, [-2.3, -1.7]), &mut fails, || format!("well-specified L2 slope {ws:.3} outside [-2.3, -1.7]"));
    check(within(us, [-1.3, -0.75]), &mut fails, || format!("under-smoothed L2 slope {us:.3} outside [-1.3, -0.75]"));
    check(wr >= 0.98, &mut fails, || format!("well-specified r2 {wr:.4}"));
    check(ur >= 0.98, &mut fails, || format!("under-smoothed r2 {ur:.4}"));
    outcome(
        fails,
        format!("nu=3/2 sine: L2 slope {ws:.3} (r2 {wr:.4}); nu=1/2 vs s0=2: L2 slope {us:.3} (r2 {ur:.4})"),
    )
}

fn criterion_5() -> Outcome {
    let mut fails = Vec::new();
    let r = study("kl-trig");
    let (l2, linf) = (r.l2_fit.slope, r.linf_fit.slope);
    check(within(l2, [-2.3, -1.6]), &mut fails, || format!("L2 slope {l2:.3} outside [-2.3, -1.6]"));
    check(within(linf, [-1.8, -1.1]), &mut fails, || format!("Linf slope {linf:.3} outside [-1.8, -1.1]"));
    check(r.rows.iter().all(|row| row.level == Some((row.n - 1) / 2)), &mut fails, || "2N+1 != n".into());
    outcome(fails, format!("L2 slope {l2:.3}, Linf slope {linf:.3}"))
}

fn criterion_6() -> Outcome {
    let mut fails = Vec::new();
    let r = study("wavelet");
    let l2 = r.l2_fit.slope;
    check(within(l2, [-1.8, -1.2]), &mut fails, || format!("L2 slope {l2:.3} outside [-1.8, -1.2]"));
    for row in &r.rows {
        let want = (6.0 * (row.n as f64).log2()).ceil() as usize;
        check(row.level == Some(want), &mut fails, || format!("n={} level {:?} != {want}", row.n, row.level));
        if row.n >= 64 {
            check(row.nnz_fraction < 1.0, &mut fails, || format!("n={} Gram fully dense", row.n));
        }
    }
    let fractions: Vec<String> = r.rows.iter().map(|row| format!("{:.3}", row.nnz_fraction)).collect();
    outcome(fails, format!("L2 slope {l2:.3}, nonzero fractions [{}]", fractions.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut fails = Vec::new();
    let r = study("fem");
    let (l2, linf) = (r.l2_fit.slope, r.linf_fit.slope);
    check(within(l2, [-1.3, -0.75]), &mut fails, || format!("L2 slope {l2:.3} outside [-1.3, -0.75]"));
    check(within(linf, [-0.8, -0.3]), &mut fails, || format!("Linf slope {linf:.3} outside [-0.8, -0.3]"));
    for row in &r.rows {
        check(row.level == Some(4 * row.n), &mut fails, || format!("n={} mesh {:?}", row.n, row.level));
        let bw = row.precision_bandwidth.unwrap_or(usize::MAX);
        check(bw <= 3, &mut fails, || format!("n={} precision bandwidth {bw}", row.n));
    }
    outcome(fails, format!("L2 slope {l2:.3}, Linf slope {linf:.3}, precision bandwidth <= 3 on all rows"))
}

fn criterion_8() -> Outcome {
    let mut fails = Vec::new();
    let unit = Region::unit(1).unwrap();
    let wide = Region::interval(0.0, 4.0).unwrap();
    let cases: Vec<(KernelSpec, DesignSet)> = vec![
        (KernelSpec::Matern { sigma: 1.0, nu: 0.5, kappa: 1.0, d: 1 }, make_design(DesignKind::MidpointGrid, 20, &unit, 0).unwrap()),
        (KernelSpec::Matern { sigma: 1.0, nu: 1.5, kappa: 5.0, d: 1 }, make_design(DesignKind::JitteredGrid, 25, &unit, 1).unwrap()),
        (KernelSpec::Matern { sigma: 2.0, nu: 1.2, kappa: 8.0, d: 1 }, make_design(DesignKind::JitteredGrid, 15, &unit, 2).unwrap()),
        (KernelSpec::Matern { sigma: 1.0, nu: 1.5, kappa: 6.0, d: 2 }, make_design(DesignKind::MidpointGrid, 36, &Region::unit(2).unwrap(), 0).unwrap()),
        (KernelSpec::KlTrig { s: 1, truncation: 10 }, make_design(DesignKind::JitteredGrid, 15, &unit, 3).unwrap()),
        (KernelSpec::KlTrig { s: 2, truncation: 8 }, make_design(DesignKind::MidpointGrid, 17, &unit, 0).unwrap()),
        (KernelSpec::Wavelet { s: 0.75, level: 5, order: 1, resolution: 12 }, make_design(DesignKind::MidpointGrid, 16, &wide, 0).unwrap()),
        (KernelSpec::Wavelet { s: 1.5, level: 6, order: 2, resolution: 12 }, make_design(DesignKind::JitteredGrid, 16, &wide, 4).unwrap()),
        (KernelSpec::Fem { mesh: 64, degree: 1 }, make_design(DesignKind::MidpointGrid, 16, &unit, 0).unwrap()),
        (KernelSpec::Fem { mesh: 48, degree: 2 }, make_design(DesignKind::JitteredGrid, 12, &unit, 5).unwrap()),
    ];
    let mut worst_residual: f64 = 0.0;
    let mut worst_nodal_var: f64 = 0.0;
    let mut probes = 0usize;
    for (spec, design) in &cases {
        let kernel = Kernel::new(spec.clone()).unwrap();
        let y: Vec<f64> = design
            .points()
            .iter()
            .map(|p| p.coords.iter().enumerate().map(|(i, c)| ((i + 2) as f64 * c).sin()).sum::<f64>() + 0.3)
            .collect();
        let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let model = kriging::fit(&kernel, design, &y, 0.0).unwrap();
        for (p, yi) in design.points().iter().zip(&y) {
            let r = (model.predict_mean(&p.coords) - yi).abs() / ymax;
            worst_residual = worst_residual.max(r);
            check(r <= 1e-6, &mut fails, || format!("{spec:?}: nodal residual {r:e} at {:?}", p.coords));
            match model.predict_variance(&p.coords) {
                Ok(v) => {
                    worst_nodal_var = worst_nodal_var.max(v);
                    check(v <= 1e-8, &mut fails, || format!("{spec:?}: nodal variance {v:e}"));
                }
                Err(e) => fails.push(format!("{spec:?}: {e}")),
            }
        }
        let region = design.region();
        let grid: Vec<Point> = if design.dim() == 1 {
            (0..=1000)
                .map(|i| Point::scalar(region.lower[0] + (region.upper[0] - region.lower[0]) * i as f64 / 1000.0))
                .collect()
        } else {
            (0..=40)
                .flat_map(|i| (0..=40).map(move |j| Point::new(vec![i as f64 / 40.0, j as f64 / 40.0])))
                .collect()
        };
        for lambda in [0.0, 1e-6] {
            let m = kriging::fit(&kernel, design, &y, lambda).unwrap();
            for x in &grid {
                probes += 1;
                if let Err(KrigingError::NumericalBreakdown { variance, .. }) = m.predict_variance(&x.coords) {
                    let prior = kernel.eval(&x.coords, &x.coords);
                    fails.push(format!("{spec:?}: variance {variance:e} below -1e-8 * {prior:e} at {:?}", x.coords));
                }
            }
        }
    }
    outcome(
        fails,
        format!(
            "{} instances: max nodal residual {worst_residual:.1e}*|Y|inf, max nodal variance {worst_nodal_var:.1e}, {probes} variance probes",
            cases.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut fails = Vec::new();
    let names = ["matern-well-specified", "matern-under-smoothed", "kl-trig", "wavelet", "fem"];
    for name in names {
        let a = study(name).rows_csv();
        let b = study(name).rows_csv();
        check(a.as_bytes() == b.as_bytes(), &mut fails, || format!("{name}: CSV differs between runs"));
    }
    outcome(fails, format!("{} study configs rerun byte-identically", names.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 9] = [
        (1, "kernel correctness", criterion_1, Duration::from_secs(60)),
        (2, "kriging inequalities", criterion_2, Duration::from_secs(60)),
        (3, "invertibility", criterion_3, Duration::from_secs(120)),
        (4, "matern epistemic study", criterion_4, Duration::from_secs(300)),
        (5, "kl-trig study", criterion_5, Duration::from_secs(300)),
        (6, "wavelet study", criterion_6, Duration::from_secs(600)),
        (7, "fem study", criterion_7, Duration::from_secs(300)),
        (8, "interpolation and variance", criterion_8, Duration::from_secs(60)),
        (9, "determinism", criterion_9, Duration::from_secs(1500)),
    ];
    let mut failed = Vec::new();
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        if elapsed > budget {
            o.pass = false;
            o.detail = format!("{}; runtime {:.1}s over {}s budget", o.detail, elapsed.as_secs_f64(), budget.as_secs());
        }
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{status}] {name} ({:.1}s): {}", elapsed.as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
}

