//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;

use sincint::chf::{self, Horizon};
use sincint::distributions::{DistributionSpec, MarkerDensity, MarkerFamily};
use sincint::exec;
use sincint::levy::{self, ImproperScheme, KFunctionSet, LevyModel};
use sincint::pointprocess::{self, ArrivalStream};
use sincint::quad;
use sincint::rng::StreamKey;
use sincint::series::{self, SeriesFunction};
use sincint::special;
use sincint::trigsums;
use sincint::util;

fn announce(number: u32, name: &str) {
    println!("ACCEPTANCE {number} ({name}): PASS");
}

fn exp_spec() -> DistributionSpec {
    DistributionSpec::exponential(1.0).unwrap()
}

#[test]
fn criterion_01_abel_identity() {
    let started = Instant::now();
    let n = 100_000;
    let spec = exp_spec();
    let worst = exec::map_replicates(100, |rep| {
        let mut s = ArrivalStream::new(spec, StreamKey::new(1001, 0xab31, rep as u64));
        s.extend(n);
        let direct = series::partial_sum(&SeriesFunction::CisOverX, s.arrivals(), n).unwrap();
        let abel = series::abel_evaluate(s.arrivals(), n, &SeriesFunction::CisOverX).unwrap();
        (abel.final_value - direct).norm() / direct.norm().max(1e-30)
    })
    .into_iter()
    .fold(0.0, f64::max);
    assert!(worst < 1e-9, "worst relative discrepancy {worst}");

    // adversarial path with S_1 = 1e-9
    let mut s = ArrivalStream::new(spec, StreamKey::new(1002, 0xab31, 0));
    s.extend(n - 1);
    let mut arrivals = vec![1e-9];
    arrivals.extend(s.arrivals().iter().map(|&x| x + 1e-9));
    let direct = series::partial_sum(&SeriesFunction::CisOverX, &arrivals, n).unwrap();
    let abel = series::abel_evaluate(&arrivals, n, &SeriesFunction::CisOverX).unwrap();
    let rel = (abel.final_value - direct).norm() / direct.norm();
    assert!(rel < 1e-9, "adversarial relative discrepancy {rel}");

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion must finish within 10 s, took {elapsed:.1}");
    announce(1, "Abel identity, 100 paths at N=1e5 plus adversarial S1=1e-9");
}

#[test]
fn criterion_02_trig_sum_norms() {
    let started = Instant::now();
    let spec = exp_spec();
    let z = spec.char_value().unwrap();

    // (a) Doob and convolution identities pathwise at N = 1e3
    for rep in 0..10 {
        let mut s = ArrivalStream::new(spec, StreamKey::new(2001, 0x7219, rep));
        s.extend(1000);
        let path = trigsums::build_trig_path(&s, 1000, z).unwrap();
        for k in 1..=1000 {
            let doob = (path.sums[k] - (path.martingale[k] + z * path.sums[k - 1])).norm();
            assert!(doob < 1e-8, "Doob identity at k={k}: {doob}");
        }
        let conv = (path.convolution_reconstruct() - *path.sums.last().unwrap()).norm();
        assert!(conv < 1e-8, "convolution identity: {conv}");
    }

    // (b, c) Monte Carlo norms: E|Z_n|^2 / n at n = 2^14 and log-log slopes
    let grid: Vec<usize> = (7..=14).map(|j| 1usize << j).collect();
    let r2 =
        trigsums::estimate_norm_growth(&spec, 2.0, &grid, 10_000, StreamKey::new(2002, 0x6e02, 0))
            .unwrap();
    let last = r2.entries.last().unwrap();
    let scaled = last.norm_est.powi(2) / last.n as f64;
    assert!((0.9..=1.1).contains(&scaled), "E|Z|^2/n at n=2^14: {scaled}");
    assert!((r2.cz_ref - 1.0).abs() < 1e-12, "c_z reference {}", r2.cz_ref);
    assert!((0.45..=0.55).contains(&r2.slope), "p=2 slope {}", r2.slope);

    let r4 =
        trigsums::estimate_norm_growth(&spec, 4.0, &grid, 10_000, StreamKey::new(2003, 0x6e02, 0))
            .unwrap();
    assert!((0.45..=0.55).contains(&r4.slope), "p=4 slope {}", r4.slope);

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "criterion must finish within 5 min, took {elapsed:.1}");
    announce(2, "Doob/convolution identities and ||Z_n||_p growth");
}

#[test]
fn criterion_03_reciprocal_moment() {
    let spec = exp_spec();
    let rows = pointprocess::reciprocal_moment_scaled(
        &spec,
        1.0,
        &[10_000],
        10_000,
        StreamKey::new(3001, 0xa221, 0),
    )
    .unwrap();
    let (n, value) = rows[0];
    assert_eq!(n, 10_000);
    assert!((0.9..=1.1).contains(&value), "n E[R_n] = {value}");
    announce(3, "n*E[R_n] within [0.9, 1.1] at n = 1e4");
}

#[test]
fn criterion_04_improper_engine() {
    let scheme = ImproperScheme { tol: 1e-9, max_windows: 200, ..Default::default() };
    let report = levy::improper_integral(&SeriesFunction::Sinc, &scheme).unwrap();
    assert!(report.converged && report.accelerated);
    assert!(report.windows_used <= 200);
    let value = report.value.unwrap().re;
    assert!((value - PI / 2.0).abs() < 1e-8, "sinc integral {value}");

    // 1/x: contributions neither alternate nor decay
    let harmonic = quad::improper(&|x: f64| 1.0 / x, 1.0, &ImproperScheme::default()).unwrap();
    assert!(!harmonic.converged, "1/x must be non-convergent");
    assert!(harmonic.value.is_none(), "value must be withheld");
    announce(4, "improper engine: sinc -> pi/2 at 1e-8, 1/x non-convergent");
}

#[test]
fn criterion_05_characteristic_function() {
    let spec = exp_spec();
    let f = SeriesFunction::IndicatorWindow { lo: 0.0, hi: 1.0 };
    let t_grid = [0.5, 1.0, 2.0];
    let samples =
        chf::sample_nf(&spec, &f, Horizon::Past(1.0), StreamKey::new(5001, 0xc4f0, 0), 10_000)
            .unwrap();
    let emp = chf::empirical_chf(&samples, &t_grid).unwrap();
    // closed-form oracle exp(e^{it} - 1), independently of the library's
    // analytic path
    let oracle: Vec<Complex64> =
        t_grid.iter().map(|&t| (Complex64::new(0.0, t).exp() - 1.0).exp()).collect();
    let cmp = chf::compare(&emp, &oracle, 4.0).unwrap();
    assert!(
        cmp.pass,
        "zscores {:?}",
        cmp.points.iter().map(|p| p.zscore).collect::<Vec<_>>()
    );
    // the library's analytic formula agrees with the oracle
    let ana = chf::analytic_chf_nf(&f, &t_grid).unwrap();
    for (a, o) in ana.iter().zip(&oracle) {
        assert!((a - o).norm() < 1e-9);
    }
    // negative control: shift by 10 standard errors and demand failure
    let shifted: Vec<Complex64> = oracle
        .iter()
        .zip(&emp.points)
        .map(|(o, p)| o + Complex64::new(10.0 * p.se_re, 0.0))
        .collect();
    let bad = chf::compare(&emp, &shifted, 4.0).unwrap();
    assert!(!bad.pass, "negative control must fail");
    announce(5, "empirical ch.f. of the unit-window count vs exp(e^it - 1)");
}

#[test]
fn criterion_06_stabilization_evidence() {
    let spec = exp_spec();
    // tail oscillation of partial sums over windows [N, 2N], N = 2^10..2^16
    let windows: Vec<(usize, usize)> =
        (10..=16).map(|j| (1usize << j, 1usize << (j + 1))).collect();
    let n_max = 1 << 17;
    let paths = 16;
    let oscillations: Vec<Vec<f64>> = exec::map_replicates(paths, |rep| {
        let mut s = ArrivalStream::new(spec, StreamKey::new(6001, 0xacc6, rep as u64));
        s.extend(n_max);
        let eval = series::evaluate_direct(&SeriesFunction::CisOverX, s.arrivals(), n_max).unwrap();
        series::tail_diagnostics(&eval, &windows).unwrap().rows.iter().map(|r| r.2).collect()
    });
    let mean_osc: Vec<f64> = (0..windows.len())
        .map(|j| util::mean(&oscillations.iter().map(|o| o[j]).collect::<Vec<_>>()))
        .collect();
    let xs: Vec<f64> = windows.iter().map(|w| (w.0 as f64).ln()).collect();
    let ys: Vec<f64> = mean_osc.iter().map(|o| o.ln()).collect();
    let (slope, _, _) = util::ols_fit(&xs, &ys);
    let exponent = -slope;
    assert!((0.3..=0.7).contains(&exponent), "oscillation decay exponent {exponent}");

    // permuted finite sums reproduce the direct total
    let n = 100_000;
    let mut s = ArrivalStream::new(spec, StreamKey::new(6002, 0x9e12, 0));
    s.extend(n);
    let arrivals = s.arrivals().to_vec();
    let direct = series::partial_sum(&SeriesFunction::CisOverX, &arrivals, n).unwrap();
    let tol = 1e-9 * direct.norm().max(1.0);
    let worst = exec::map_replicates(200, |j| {
        let perm =
            series::permuted_sum(&SeriesFunction::CisOverX, &arrivals, n, 6100 + j as u64)
                .unwrap();
        (perm.final_value - direct).norm()
    })
    .into_iter()
    .fold(0.0, f64::max);
    assert!(worst <= tol, "permutation total spread {worst}");
    announce(6, "tail oscillation decay in [0.3, 0.7] and permutation-stable totals");
}

#[test]
fn criterion_07_k_function_asymptotics() {
    // Pareto markers r = 2, 3: envelope slope within 5% of -(1 + 1/r)
    for r in [2.0f64, 3.0] {
        let marker = MarkerDensity::new(MarkerFamily::ParetoTail { r, x0: 1.0 })
            .unwrap()
            .unnormalized()
            .unwrap();
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
        let anchors = [1e2, 1e3, 1e4, 1e5, 1e6];
        let (slope, _) = levy::k2_envelope_slope(&set, &anchors, 32).unwrap();
        let target = -(1.0 + 1.0 / r);
        assert!(
            (slope - target).abs() <= 0.05 * target.abs(),
            "r={r}: slope {slope} vs {target}"
        );
    }

    // exponential marker: K matches an independent quadrature oracle at 10
    // log-spaced points to 1e-8
    let marker = MarkerDensity::new(MarkerFamily::ExponentialUnit).unwrap();
    let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
    for j in 0..10 {
        let s = 10f64.powf(2.0 + 0.4 * j as f64);
        let a = s.ln();
        let k2 = levy::k2_value(&set, s).unwrap();
        // truncated proper integral; the neglected tail is below e^{-60}
        let oracle = quad::adaptive_complex(
            &|v: f64| Complex64::new((v.sin() / v) * (-v).exp(), 0.0),
            a,
            a + 60.0,
            1e-14,
        )
        .unwrap()
        .value;
        assert!((k2 - oracle).norm() < 1e-8, "s={s}: {k2} vs {oracle}");
    }

    // amplitude tracking: the half-period mean of |K| s ln s against the
    // half-period mean of |sin(ln s)| stays within a factor of 2
    for s0 in [1e3f64, 1e4, 1e5, 1e6] {
        let a0 = s0.ln();
        let m = 64;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..m {
            let a = a0 + PI * (j as f64 + 0.5) / m as f64;
            let s = a.exp();
            num += levy::k2_value(&set, s).unwrap().norm() * s * a;
            den += a.sin().abs();
        }
        let ratio = num / den;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "s0={s0}: amplitude ratio {ratio} outside [1/2, 2]"
        );
    }
    announce(7, "K envelope slopes for r=2,3 and exponential-marker amplitude");
}

#[test]
fn criterion_08_levy_analytics() {
    // exponent symmetry and stable scaling at 1e-12 on grids
    for model in
        [LevyModel::PoissonUnit, LevyModel::Stable { alpha: 0.5 }, LevyModel::GammaUnit]
    {
        for j in 1..=100 {
            let theta = -7.9 + 0.158 * j as f64;
            let (r_pos, i_pos) = model.psi(theta);
            let (r_neg, i_neg) = model.psi(-theta);
            assert!((r_pos - r_neg).abs() <= 1e-12);
            assert!((i_pos + i_neg).abs() <= 1e-12);
        }
    }
    let stable = LevyModel::Stable { alpha: 0.5 };
    for &c in &[0.25, 2.0, 9.0] {
        for &theta in &[0.5, 1.0, 3.0] {
            let (r1, _) = stable.psi(c * theta);
            let (r0, _) = stable.psi(theta);
            assert!((r1 - c.sqrt() * r0).abs() <= 1e-12 * r1.max(1.0));
        }
    }

    // E1 against a quadrature oracle at 20 log-spaced points, 1e-12 relative
    for j in 0..20 {
        let x = 10f64.powf(-2.0 + 0.15 * j as f64);
        let oracle = quad::adaptive(&|u: f64| (-u).exp() / u, x, x + 60.0, 1e-14).unwrap().value;
        let e1 = special::exp_integral_e1(x).unwrap();
        assert!((e1 - oracle).abs() <= 1e-12 * oracle, "x={x}");
    }

    // G(H(u)) = u at 1e-10 on log grids for the stable and Gamma tails
    for model in [LevyModel::Stable { alpha: 0.5 }, LevyModel::GammaUnit] {
        for j in 0..50 {
            let u = 10f64.powf(-6.0 + 0.16 * j as f64);
            let x = model.tail_inverse(u).unwrap();
            let back = model.tail(x).unwrap();
            assert!((back - u).abs() <= 1e-10 * u, "{model}: u={u} back={back}");
        }
    }
    announce(8, "psi symmetry/scaling, E1 accuracy, tail inversion");
}

#[test]
fn criterion_09_block_summation() {
    let spec = exp_spec();
    let endpoints = series::half_period_partition(200);
    let horizon = *endpoints.last().unwrap();

    // blocked and direct partial sums coincide exactly at block boundaries
    let mut s = ArrivalStream::new(spec, StreamKey::new(9001, 0xb10c, 0));
    s.extend_past(horizon);
    let eval = series::block_sum(&SeriesFunction::Sinc, s.arrivals(), &endpoints).unwrap();
    for (k, &end) in endpoints.iter().enumerate() {
        let covered = s.arrivals().partition_point(|&x| x < end);
        let direct = series::partial_sum(&SeriesFunction::Sinc, s.arrivals(), covered).unwrap();
        assert_eq!(eval.running[k], direct, "boundary {k}");
    }

    // Monte Carlo variance of the block total vs the quadrature of f^2
    let finals: Vec<f64> = exec::map_replicates(10_000, |rep| {
        let mut s = ArrivalStream::new(spec, StreamKey::new(9002, 0xb10c, rep as u64));
        s.extend_past(horizon);
        series::block_sum(&SeriesFunction::Sinc, s.arrivals(), &endpoints)
            .unwrap()
            .final_value()
            .re
    });
    let mc_var = util::sample_variance(&finals);
    let lambda_f2 = quad::adaptive(
        &|x| {
            let v = SeriesFunction::Sinc.eval(x).re;
            v * v
        },
        0.0,
        horizon,
        1e-11,
    )
    .unwrap()
    .value;
    let ratio = mc_var / lambda_f2;
    assert!((ratio - 1.0).abs() < 0.1, "variance ratio {ratio}");
    announce(9, "block/direct boundary equality and Campbell variance within 10%");
}

#[test]
fn criterion_10_determinism() {
    use std::fs;
    use std::process::Command;

    let bin = env!("CARGO_BIN_EXE_sincint");
    let base = std::env::temp_dir().join(format!("sincint_acceptance_{}", std::process::id()));
    fs::create_dir_all(&base).unwrap();

    let write_config = |name: &str, body: &str| {
        let path = base.join(name);
        fs::write(&path, body).unwrap();
        path
    };
    let run = |config: &std::path::Path, out: &std::path::Path, workers: Option<usize>| {
        let mut cmd = Command::new(bin);
        cmd.arg("run").arg("--config").arg(config).arg("--out").arg(out);
        if let Some(w) = workers {
            cmd.arg("--workers").arg(w.to_string());
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "run failed for {}", config.display());
    };
    let snapshot = |dir: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        assert!(!files.is_empty(), "no output files in {}", dir.display());
        files
    };

    let configs = [
        write_config(
            "norm_growth.cfg",
            "[experiment]\nkind = norm-growth\nseed = 91\nreplicates = 500\n[params]\nngrid = 128,256,512,1024\n",
        ),
        write_config(
            "series.cfg",
            "[experiment]\nkind = series\nseed = 92\nreplicates = 512\n[params]\nf = sinc\nn = 4096\n",
        ),
        write_config(
            "improper.cfg",
            "[experiment]\nkind = improper\nseed = 93\nreplicates = 1\n[params]\nf = sinc\n",
        ),
    ];

    for config in &configs {
        let stem = config.file_stem().unwrap().to_string_lossy().into_owned();
        let dir_a = base.join(format!("{stem}_a"));
        let dir_b = base.join(format!("{stem}_b"));
        let dir_w1 = base.join(format!("{stem}_w1"));
        let dir_w8 = base.join(format!("{stem}_w8"));
        run(config, &dir_a, None);
        run(config, &dir_b, None);
        assert_eq!(snapshot(&dir_a), snapshot(&dir_b), "{stem}: rerun not byte-identical");
        run(config, &dir_w1, Some(1));
        run(config, &dir_w8, Some(8));
        assert_eq!(
            snapshot(&dir_w1),
            snapshot(&dir_w8),
            "{stem}: 1 vs 8 workers not identical"
        );
    }
    fs::remove_dir_all(&base).ok();
    announce(10, "byte-identical CSVs across reruns and worker counts");
}
