use taut_core::extrema::{crossing_skeleton, decompose, free_knot_interpolant, level_tolerance};
use taut_core::pathkit::{energy, generate_brownian, PenaltySpec};
use taut_core::renewal::block_minimizer;
use taut_core::stats::summarize;

#[test]
fn t_bar_gap_bounded_by_second_group() {
    let mut realized = 0;
    for seed in 0..200 {
        let w = generate_brownian(20.0, 1e-3, seed).unwrap();
        let d = decompose(&w, 1.0).unwrap();
        let s = crossing_skeleton(&w, 1.0).unwrap();
        let Some(end) = s.group_end(2) else { continue };
        if d.t_bar.len() < 3 {
            continue;
        }
        realized += 1;
        assert!(d.t_bar[2] - d.t_bar[1] <= end + 1e-12, "seed {seed}");
    }
    assert!(realized > 150);
}

#[test]
fn group_labels_match_extrema_stretches() {
    for seed in 0..50 {
        let w = generate_brownian(40.0, 1e-3, 1000 + seed).unwrap();
        let d = decompose(&w, 1.0).unwrap();
        let s = crossing_skeleton(&w, 1.0).unwrap();
        for (k, n) in s.n_k.iter().enumerate() {
            let at = s.sigma[4 * n];
            let sign = if k % 2 == 0 { 1 } else { -1 };
            // Stretch [t_bar_i, t_bar_{i+1}) containing sigma_{4 n_k}.
            let Some(i) = d.t_bar.windows(2).position(|b| b[0] <= at && at < b[1]) else {
                continue;
            };
            // Odd stretches run from a minimum up to a maximum.
            let rising_stretch = i % 2 == 1;
            if sign < 0 {
                assert!(!rising_stretch, "seed {seed}: fall group inside rise {i}");
            } else {
                assert!(rising_stretch, "seed {seed}: rise group inside fall {i}");
            }
        }
    }
}

#[test]
fn crossing_gaps_have_exit_time_mean() {
    // The exit time of (-h/4, h/4) has mean (h/4)^2. Linear interpolation
    // delays crossings by O(sqrt(dt)), so two resolutions with a 4:1 step
    // ratio are combined to cancel the leading bias.
    let mut runs = Vec::new();
    for (dt, base) in [(1e-3, 300), (2.5e-4, 400)] {
        let mut gaps = Vec::new();
        for seed in 0..40 {
            let w = generate_brownian(100.0, dt, base + seed).unwrap();
            let s = crossing_skeleton(&w, 1.0).unwrap();
            gaps.extend(s.sigma.windows(2).map(|p| p[1] - p[0]));
        }
        let st = summarize(&gaps).unwrap();
        runs.push((st.mean, st.standard_error().unwrap()));
    }
    let (coarse, fine) = (runs[0], runs[1]);
    assert!(coarse.0 > fine.0, "{runs:?}");
    let extrapolated = 2.0 * fine.0 - coarse.0;
    let se = (4.0 * fine.1 * fine.1 + coarse.1 * coarse.1).sqrt();
    assert!((extrapolated - 0.0625).abs() <= 3.0 * se, "{extrapolated} {se} {runs:?}");
}

#[test]
fn free_knot_interpolant_dominates_blocks() {
    let penalties = [PenaltySpec::Quadratic, PenaltySpec::Power(4.0), PenaltySpec::Sqrt1p];
    let mut blocks = 0;
    for seed in 0..20 {
        let w = generate_brownian(30.0, 1e-3, 500 + seed).unwrap();
        let d = decompose(&w, 1.0).unwrap();
        let f = free_knot_interpolant(&w, &crossing_skeleton(&w, 1.0).unwrap()).unwrap();
        let tol = level_tolerance(&w);
        for i in 1..d.count {
            let (a, b) = d.block(i).unwrap();
            let psi = block_minimizer(&w, &d, i).unwrap();
            let piece = f.slice(a, b).unwrap();
            for c in &penalties {
                let (ep, ef) = (energy(&psi.string, c), energy(&piece, c));
                assert!(ep <= ef + tol * (1.0 + ef), "seed {seed} block {i} {c}: {ep} > {ef}");
            }
            blocks += 1;
        }
    }
    assert!(blocks > 300);
}
