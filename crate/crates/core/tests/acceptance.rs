//! Acceptance criteria, one line each. Runs as a plain binary so the report
//! is printed whether or not the criteria pass.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use saddlekit::chew::PlanarChew;
use saddlekit::delaunay::{delaunay_l1, DEFAULT_MAX_FLIPS};
use saddlekit::exactplane::{euler_phi, int, primitive_points_in_disc, rat, ExactMatrix, ExactVector, LinearAction};
use saddlekit::geodesic::{enumerate, shortest, DEFAULT_BUDGET};
use saddlekit::mc::{borel_cantelli_table, estimate_l2_and_variance, estimate_mean_transform, sample_stratum_local, sample_torus_haar, tail_histogram};
use saddlekit::oracle::{det_histogram, det_phi_ratio, siegel_constant_torus};
use saddlekit::surface::models::{lattice_torus, matrix_torus, octagon, slit_torus, square_torus};
use saddlekit::surface::{apply_surface, TranslationSurface};
use saddlekit::sv::{pair_transform, sector_sandwich, transform, TestFunction};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn torus_oracle() -> Verdict {
    let start = Instant::now();
    let s = square_torus();
    let mut bad = Vec::new();
    for r in [1, 2, 3, 5, 10] {
        let got: BTreeSet<ExactVector> = enumerate(&s, &int(r), DEFAULT_BUDGET).unwrap().holonomies().into_iter().collect();
        let want: BTreeSet<ExactVector> =
            primitive_points_in_disc(&int(r)).into_iter().map(|(x, y)| ExactVector::from_ints(x, y)).collect();
        if got != want {
            bad.push(r);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(bad.is_empty() && secs < 10.0, format!("set mismatches at R={bad:?}, {secs:.2}s"))
}

fn siegel_mean() -> Verdict {
    let start = Instant::now();
    let (r, y_max) = (20.0, 50.0);
    let f = TestFunction::disc(int(20));
    let corpus = sample_torus_haar(10_000, 2024, y_max).unwrap();
    let rep = estimate_mean_transform(&corpus, &f, DEFAULT_BUDGET).unwrap().with_cusp_correction(&f, y_max);
    let area = PI * r * r;
    let c = siegel_constant_torus();
    let corrected = rep.corrected_mean.unwrap() / area;
    let ci = rep.ci_radius / area;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        (corrected - c).abs() <= 3.0 * ci && secs < 300.0,
        format!(
            "cusp-corrected N/(πR²)={corrected:.6} vs 6/π²={c:.6}, ci={ci:.2e}, |Δ|/ci={:.2} (truncated mean {:.6}), {secs:.2}s",
            (corrected - c).abs() / ci,
            rep.mean / area
        ),
    )
}

fn l2_trend() -> Verdict {
    let c = siegel_constant_torus();
    let corpus = sample_torus_haar(10_000, 2025, 50.0).unwrap();
    let rows: Vec<_> = [5.0, 10.0, 20.0].iter().map(|&r| estimate_l2_and_variance(&corpus, r, c, DEFAULT_BUDGET).unwrap()).collect();
    let last = rows[2].normalized;
    let within = (last - c).abs() <= 0.05 * c;
    let monotone = rows.windows(2).all(|w| w[1].deviation <= w[0].deviation);
    let desc: Vec<String> = rows.iter().map(|e| format!("R={}: √L/(πR²)={:.5}, dev={:.5}", e.r, e.normalized, e.deviation)).collect();
    verdict(within && monotone, desc.join("; "))
}

fn random_point_set(rng: &mut ChaCha20Rng) -> Vec<ExactVector> {
    let n = rng.gen_range(2..=50);
    let mut seen = BTreeSet::new();
    while seen.len() < n {
        seen.insert((rng.gen_range(0..=400i64), rng.gen_range(0..=400i64)));
    }
    seen.into_iter().map(|(x, y)| ExactVector::new(rat(x, 4), rat(y, 4))).collect()
}

fn chew_bound() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut paths, mut violations, mut errors) = (0usize, 0usize, Vec::new());
    let mut worst: f64 = 1.0;
    for set in 0..500 {
        let pts = random_point_set(&mut rng);
        let chew = match PlanarChew::new(&pts, DEFAULT_MAX_FLIPS) {
            Ok(c) => c,
            Err(e) => {
                errors.push(format!("set {set}: {e}"));
                continue;
            }
        };
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                match chew.path(a, b).and_then(|p| p.within_sqrt10().map(|ok| (ok, p.ratio_upper_bound))) {
                    Ok((ok, ratio)) => {
                        paths += 1;
                        violations += usize::from(!ok);
                        worst = worst.max(ratio);
                    }
                    Err(e) => errors.push(format!("set {set} pair ({a},{b}): {e}")),
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        violations == 0 && errors.is_empty() && secs < 120.0,
        format!("{paths} paths, {violations} violations, {} errors {:?}, max ratio ≤ {worst:.4}, {secs:.2}s", errors.len(), errors.first()),
    )
}

fn random_sl2(rng: &mut ChaCha20Rng) -> ExactMatrix {
    // product of a diagonal, a shear and a lower shear, all rational
    let d = rat(rng.gen_range(1..=6), rng.gen_range(1..=6));
    let u = rat(rng.gen_range(-9..=9), rng.gen_range(1..=5));
    let l = rat(rng.gen_range(-9..=9), rng.gen_range(1..=5));
    let diag = ExactMatrix::diag(d.clone(), rat(1, 1) / d);
    diag.mul(&ExactMatrix::shear(u)).mul(&ExactMatrix::new(int(1), int(0), l, int(1)))
}

fn random_surface(rng: &mut ChaCha20Rng, k: usize) -> TranslationSurface {
    let g = random_sl2(rng);
    match k % 3 {
        0 => matrix_torus(&g).unwrap(),
        1 => {
            let v = ExactVector::new(rat(rng.gen_range(1..=19), 20), rat(rng.gen_range(1..=19), 20));
            slit_torus(&g, &g.apply(&v)).unwrap()
        }
        _ => apply_surface(&g, &octagon()).unwrap(),
    }
}

fn shortest_is_edge() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut hits = 0;
    let mut misses = Vec::new();
    for k in 0..100 {
        let s = random_surface(&mut rng, k);
        let gamma = shortest(&s, DEFAULT_BUDGET).unwrap();
        let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
        let found = t.surface.triangles().iter().flat_map(|tr| tr.edges.iter()).any(|e| {
            *e == gamma.holonomy || (e + &gamma.holonomy).is_zero()
        });
        if found {
            hits += 1;
        } else {
            misses.push(k);
        }
    }
    verdict(hits == 100, format!("{hits}/100 (misses {misses:?})"))
}

fn pair_identity() -> Verdict {
    let corpus = [square_torus(),
        lattice_torus(&ExactVector::new(rat(3, 2), rat(1, 3)), &ExactVector::new(rat(-1, 4), rat(2, 3))).unwrap(),
        slit_torus(&ExactMatrix::from_ints(1, 1, 0, 1), &ExactVector::new(rat(2, 5), rat(1, 7))).unwrap(),
        octagon()];
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 256, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let strategy = (0usize..4, 0i64..13, 1i64..5, any::<bool>(), 0.0f64..6.3, 0.05f64..3.0);
    let cases = std::cell::Cell::new(0usize);
    let result = runner.run(&strategy, |(k, n, d, sector, theta, half)| {
        let s = &corpus[k];
        let f = if sector { TestFunction::Sector { r: rat(n, d), theta, half_angle: half } } else { TestFunction::disc(rat(n, d)) };
        let t = transform(s, &f, DEFAULT_BUDGET).unwrap();
        let p = pair_transform(s, &f, &f, DEFAULT_BUDGET).unwrap();
        cases.set(cases.get() + 1);
        prop_assert_eq!(p.count, t.count * t.count);
        Ok(())
    });
    let cases = cases.get();
    verdict(result.is_ok() && cases >= 200, format!("{cases} cases, {}", result.err().map_or("no counterexample".into(), |e| e.to_string())))
}

fn sandwich() -> Verdict {
    let s = square_torus();
    let mut ok = true;
    let mut desc = Vec::new();
    for r in [5, 10] {
        for (name, theta) in [("π/16", PI / 16.0), ("π/32", PI / 32.0)] {
            let w = sector_sandwich(&s, &int(r), theta, DEFAULT_BUDGET).unwrap();
            let ordered = w.lower <= w.scaled_count + w.margin && w.scaled_count <= w.upper + w.margin;
            let amb = w.ambiguous as f64 / w.count.max(1) as f64;
            ok &= ordered && amb < 0.01;
            desc.push(format!("R={r} θ={name}: {:.4} ≤ {:.4} ≤ {:.4} amb={amb}", w.lower, w.scaled_count, w.upper));
        }
    }
    verdict(ok, desc.join("; "))
}

fn nu_shadow() -> Verdict {
    let h = det_histogram(30);
    let f = |n: i64| *h.get(&n).unwrap_or(&0) as f64;
    let r2 = det_phi_ratio(&h, 2);
    let r3 = det_phi_ratio(&h, 3);
    let close = |x: f64, n: u64| (x - euler_phi(n) as f64).abs() <= 0.1 * euler_phi(n) as f64;
    let pts = primitive_points_in_disc(&int(30));
    let mut exceptions = 0;
    for &(a, b) in &pts {
        for &(c, d) in &pts {
            if a * d - b * c == 0 && !((a, b) == (c, d) || (a, b) == (-c, -d)) {
                exceptions += 1;
            }
        }
    }
    verdict(
        close(r2, 2) && close(r3, 3) && exceptions == 0,
        format!(
            "level-normalised n·freq(n)/freq(1): n=2 → {r2:.4} (φ=1), n=3 → {r3:.4} (φ=2); raw freq ratios {:.4}, {:.4} (= φ(n)/n); collinear exceptions {exceptions}",
            f(2) / f(1),
            f(3) / f(1)
        ),
    )
}

fn tails() -> Verdict {
    let corpus = sample_stratum_local(&octagon(), 0.3, 10_000, 9).unwrap();
    let f = TestFunction::disc(rat(4, 5));
    let h = tail_histogram(&corpus, &f, 400, DEFAULT_BUDGET).unwrap();
    let monotone = h.fractions.windows(2).all(|w| w[0] >= w[1]);
    let (q, err) = (h.q_hat.unwrap_or(f64::NAN), h.fit_error.unwrap_or(f64::NAN));
    verdict(
        monotone && !h.degenerate && q >= 2.0 - err,
        format!("nonincreasing={monotone}, q̂={q:.3} ± {err:.3}, degenerate={}", h.degenerate),
    )
}

fn borel_cantelli() -> Verdict {
    let corpus = sample_torus_haar(10_000, 2026, 50.0).unwrap();
    let radii: Vec<f64> = (1..=5).map(|k| 2f64.powi(k)).collect();
    let errs: Vec<f64> = radii.iter().map(|r| r.powf(1.9)).collect();
    let rows = borel_cantelli_table(&corpus, &radii, &errs, siegel_constant_torus(), DEFAULT_BUDGET).unwrap();
    let violations = rows.iter().filter(|r| r.violation).count();
    let desc: Vec<String> =
        rows.iter().map(|r| format!("R={}: exc={:.4} ≤ {:.4}+3·{:.4}", r.r, r.exceedance, r.ratio, r.binomial_ci)).collect();
    verdict(violations == 0, format!("{violations} violations; partial sum {:.4}; {}", rows.last().unwrap().partial_sum, desc.join("; ")))
}

fn determinism() -> Verdict {
    let octagon_path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/octagon.json");
    let commands: Vec<Vec<&str>> = vec![
        vec!["mc-torus", "--samples", "3000", "--radius", "10", "--seed", "7"],
        vec!["mc-torus", "--samples", "2000", "--fn", r#"{"variant":"sector","r":"6","theta":0.4,"half_angle":0.3}"#, "--seed", "8"],
        vec!["mc-stratum", "--surface", octagon_path, "--spread", "0.1", "--samples", "100", "--radius", "1/2", "--seed", "9"],
        vec!["variance", "--samples", "2000", "--radii", "5,10", "--seed", "10"],
        vec!["tails", "--samples", "2000", "--fn", r#"{"variant":"disc","r":"3"}"#, "--seed", "11"],
        vec!["bc-table", "--samples", "2000", "--radii", "2,4,8", "--errors", "4,16,64", "--seed", "12", "--format", "csv"],
    ];
    let mut mismatches = Vec::new();
    for cmd in &commands {
        let outputs: Vec<Vec<u8>> = ["1", "4", "1"]
            .iter()
            .map(|t| {
                let mut out = Vec::new();
                let mut err = Vec::new();
                let args = std::iter::once("saddlekit").chain(cmd.iter().copied()).chain(["--threads", t]);
                assert_eq!(saddlekit::cli::run_with(args, &mut out, &mut err), 0, "{}", String::from_utf8_lossy(&err));
                out
            })
            .collect();
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(cmd[0]);
        }
    }
    verdict(mismatches.is_empty(), format!("{} commands × threads {{1,4,1}}, mismatches {mismatches:?}", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("torus counting oracle", torus_oracle),
        ("Siegel mean at R=20", siegel_mean),
        ("L2 trend", l2_trend),
        ("Chew sqrt(10) bound", chew_bound),
        ("shortest connection is a Delaunay edge", shortest_is_edge),
        ("pair-transform identity", pair_identity),
        ("sector sandwich", sandwich),
        ("determinant spectrum", nu_shadow),
        ("tail consistency", tails),
        ("Borel-Cantelli table", borel_cantelli),
        ("determinism across threads", determinism),
    ];
    // numeric arguments select criteria; none selects all
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {:<40} {} ({:.1}s) {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of {ran} criteria pass", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
