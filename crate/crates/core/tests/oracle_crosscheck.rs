use taut_core::oracle::{self, oracle_check, qp_oracle, random_instance, tolerance_for};
use taut_core::pathkit::{energy, generate_brownian, replicate_rng, sup_distance, PenaltySpec};
use taut_core::tautstring::{solve, verify_penalty_invariance, BoundaryCondition, TubeProblem, DEFAULT_PENALTIES};

fn penalties() -> [PenaltySpec; 4] {
    [
        PenaltySpec::Quadratic,
        PenaltySpec::Power(3.0),
        PenaltySpec::Power(4.0),
        PenaltySpec::Sqrt1p,
    ]
}

#[test]
fn brownian_64_points_fixed_ends() {
    let w = generate_brownian(1.0, 1.0 / 63.0, 8).unwrap();
    assert_eq!(w.len(), 64);
    let problem = TubeProblem::pinned(w, 1.0).unwrap();
    let s = solve(&problem);
    let o = qp_oracle(&problem, &PenaltySpec::Quadratic, 1e-12).unwrap();
    assert!(sup_distance(&s.string, &o.string).unwrap() <= 1e-6);
}

#[test]
fn brownian_32_points_invariance() {
    let w = generate_brownian(1.0, 1.0 / 31.0, 21).unwrap();
    let problem = TubeProblem::pinned(w, 1.0).unwrap();
    let r = verify_penalty_invariance(&problem, &DEFAULT_PENALTIES, 1e-6).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn random_16_points_energy() {
    let mut rng = replicate_rng(99, 0);
    for _ in 0..20 {
        let p = random_instance(&mut rng, 16).unwrap();
        let s = solve(&p);
        let o = qp_oracle(&p, &PenaltySpec::Quadratic, 1e-10).unwrap();
        assert!((s.quadratic_energy() - o.quadratic_energy()).abs() <= 1e-8);
    }
}

#[test]
fn randomized_equivalence() {
    let r = oracle_check(100, 64, 5, 1e-6, 1e-8).unwrap();
    assert!(r.pass, "max sup {} max gap {}", r.max_sup_distance, r.max_energy_gap);
    assert_eq!(r.instances.len(), 100);
}

#[test]
fn simultaneous_minimality() {
    for k in 0..40 {
        let p = random_instance(&mut replicate_rng(17, k), 48).unwrap();
        let s = solve(&p);
        for c in penalties() {
            let o = qp_oracle(&p, &c, tolerance_for(&c, 1e-6)).unwrap();
            let (es, eo) = (energy(&s.string, &c), energy(&o.string, &c));
            assert!(es <= eo + 1e-8, "instance {k} {c}: {es} > {eo}");
        }
    }
}

#[test]
fn oracle_satisfies_kkt_and_descends() {
    for k in 0..30 {
        let p = random_instance(&mut replicate_rng(23, k), 40).unwrap();
        for c in DEFAULT_PENALTIES {
            let run = oracle::run(&p, &c, tolerance_for(&c, 1e-6), true).unwrap();
            let x = run.result.string.values();
            let scale = 1e-9 * (1.0 + run.gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs())));
            for i in 0..x.len() {
                let (lo, hi, g) = (run.lower[i], run.upper[i], run.gradient[i]);
                if lo == hi {
                    continue;
                }
                if x[i] > lo && x[i] < hi {
                    assert!(g.abs() <= scale, "interior gradient {g} at {i}");
                } else if x[i] <= lo {
                    assert!(g >= -scale, "lower-bound gradient {g} at {i}");
                } else {
                    assert!(g <= scale, "upper-bound gradient {g} at {i}");
                }
            }
            for pair in run.objectives.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-15 * (1.0 + pair[0].abs()));
            }
        }
    }
}

#[test]
fn one_free_end_agrees() {
    let w = generate_brownian(2.0, 2.0 / 50.0, 4).unwrap();
    let v = w.values()[0];
    let p = TubeProblem::new(w, 0.6, BoundaryCondition { left: taut_core::Endpoint::Fixed(v), right: taut_core::Endpoint::Free }).unwrap();
    let s = solve(&p);
    for c in DEFAULT_PENALTIES {
        let o = qp_oracle(&p, &c, tolerance_for(&c, 1e-6)).unwrap();
        assert!(sup_distance(&s.string, &o.string).unwrap() <= 1e-6, "{c}");
    }
}
