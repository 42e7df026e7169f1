mod common;

use common::*;
use rand::Rng;
use rangesep::quadrature::{build_sinc_rule, RadialKernel};
use rangesep::range_sep::*;
use rangesep::*;
use rangesep::quadrature::QuadratureRule;

fn brute_force_min_k(rule: &QuadratureRule, sigma: f64, delta: f64) -> usize {
    let z = rule.zero_index();
    (z..rule.rank())
        .find(|&i| rule.weights[i] * (-rule.nodes[i] * rule.nodes[i] * sigma * sigma).exp() <= delta)
        .map(|i| rule.ks[i] as usize)
        .unwrap_or(rule.m)
}

#[test]
fn max_norm_criterion_matches_exhaustive_scan() {
    let rule = build_sinc_rule(RadialKernel::newton(), 24, 3.0).unwrap();
    let mut r = rng(31);
    for _ in 0..50 {
        let sigma = r.random_range(0.05..3.0);
        let delta = 10f64.powf(r.random_range(-8.0..-0.5));
        let c = choose_split(&rule, sigma, delta, SplitCriterion::MaxNorm).unwrap();
        assert_eq!(c.r_l, brute_force_min_k(&rule, sigma, delta), "sigma {sigma} delta {delta}");
    }
}

#[test]
fn ball_integral_matches_radial_quadrature() {
    for (t, sigma) in [(0.3, 0.9), (2.0, 0.9), (7.5, 1.3), (0.02, 2.0)] {
        let num = 4.0 * std::f64::consts::PI * integrate(&|r: f64| r * r * (-t * t * r * r).exp(), 0.0, sigma, 1e-14);
        let closed = rangesep::special::gaussian_ball_integral(t, sigma);
        assert!((num - closed).abs() < 1e-12 * num, "t {t}: {num} vs {closed}");
    }
}

#[test]
fn l1_criterion_uses_ball_integral() {
    let rule = build_sinc_rule(RadialKernel::newton(), 24, 3.0).unwrap();
    let c = choose_split(&rule, 0.9, 1e-4, SplitCriterion::L1Norm).unwrap();
    let first_short = rule.zero_index() + c.r_l;
    for i in first_short..rule.rank() {
        let t = rule.nodes[i];
        let v = rule.weights[i] * rangesep::special::gaussian_ball_integral(t, 0.9);
        assert!(v <= 1e-4);
    }
    assert!(c.r_l == 0 || criterion_value(&rule, first_short - 1, 0.9, SplitCriterion::L1Norm) > 1e-4);
}

#[test]
fn criterion_is_monotone_in_delta_and_sigma() {
    let rule = build_sinc_rule(RadialKernel::newton(), 32, 3.0).unwrap();
    for crit in [SplitCriterion::MaxNorm, SplitCriterion::L1Norm] {
        let mut last = usize::MAX;
        for e in 1..10 {
            let r_l = choose_split(&rule, 0.7, 10f64.powi(-e) * 10.0, crit).unwrap().r_l;
            assert!(last == usize::MAX || r_l >= last);
            last = r_l;
        }
        // Larger sigma: every Gaussian is smaller at the larger radius under
        // the max norm, so fewer terms stay long-range.
        let a = choose_split(&rule, 0.5, 1e-4, SplitCriterion::MaxNorm).unwrap().r_l;
        let b = choose_split(&rule, 2.0, 1e-4, SplitCriterion::MaxNorm).unwrap().r_l;
        assert!(b <= a);
    }
}

#[test]
fn split_parts_recombine_bitwise() {
    let rule = build_sinc_rule(RadialKernel::newton(), 10, 3.0).unwrap();
    let g = GridSpec::new(1.0, 8).unwrap();
    let t = project_kernel(&rule, &g);
    for r_l in 0..=10 {
        let s = split_tensor(&t, &rule, r_l, 1e-4).unwrap();
        assert_eq!(s.long.rank() + s.short.rank(), t.rank());
        assert_eq!(s.full(), t);
    }
    let all = split_tensor(&t, &rule, 10, 1e-4).unwrap();
    assert_eq!(all.short.rank(), 0);
}

#[test]
fn short_reference_profiles_match_the_short_tensor() {
    let rule = build_sinc_rule(RadialKernel::coulomb(), 16, 3.0).unwrap();
    let g = GridSpec::new(2.0, 16).unwrap();
    let s = RsSplit::at(&rule, &g.doubled(), Projection::Average, 4, 1e-4).unwrap();
    let a = ShortReference::from_centered(&s.short, 5).unwrap();
    let b = ShortReference::from_rule(&s.short_rule(), g.h(), 5, Projection::Average);
    assert!((&a.profiles - &b.profiles).amax() < 1e-12 * a.profiles.amax());
    let c = [16, 16, 16];
    for d in [[0, 0, 0], [1, 2, 3], [5, 0, 5]] {
        let want = s.short.entry([c[0] + d[0], c[1] + d[1], c[2] + d[2]]).unwrap();
        assert!((a.value(d) - want).abs() < 1e-12 * want.abs().max(1e-12));
    }
}

fn three_particles() -> ParticleSystem {
    ParticleSystem::new(vec![
        Particle { center: [-0.55, 0.3, 0.1], charge: 1.0 },
        Particle { center: [0.4, -0.2, 0.6], charge: -2.0 },
        Particle { center: [0.05, 0.7, -0.45], charge: 0.5 },
    ])
}

#[test]
fn rs_entries_match_dense_shifted_sum() {
    let g = GridSpec::new(1.0, 32).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 16, 3.0).unwrap();
    let s = RsSplit::at(&rule, &g.doubled(), Projection::Average, 6, 1e-6).unwrap();
    let sys = three_particles();
    let mut o = AssembleOptions::new(1e-10);
    o.gamma = Some(32);
    let (rs, _, rep) = assemble_multiparticle(&s, &sys, &g, &o).unwrap();
    let (centers, _) = sys.snap(&g).unwrap();
    let full = s.full();
    let mut want = ndarray::Array3::zeros((32, 32, 32));
    for (c, p) in centers.iter().zip(&sys.particles) {
        want = want + full.shift_window(*c, &g).unwrap().to_dense() * p.charge;
    }
    let scale = max_abs(&want);
    let mut worst: f64 = 0.0;
    for ((i, j, k), v) in want.indexed_iter() {
        if (i + j + k) % 7 == 0 {
            worst = worst.max((rs.entry([i, j, k]).unwrap() - v).abs());
        }
    }
    assert!(worst < 1e-8 * scale, "{worst} vs {scale}");
    assert!(rep.max_snap_displacement <= g.h() * 3f64.sqrt() / 2.0);
    assert!(rep.storage <= rep.storage_bound);
}

#[test]
fn far_from_particles_only_long_range_contributes() {
    let g = GridSpec::new(1.0, 32).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 16, 3.0).unwrap();
    let s = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, 0.2, 1e-4, SplitCriterion::MaxNorm).unwrap();
    let (rs, _, _) = assemble_multiparticle(&s, &three_particles(), &g, &AssembleOptions::new(1e-6)).unwrap();
    let i = [31, 0, 31];
    assert!(rs.local_replicas(i).is_empty());
    assert_eq!(rs.entry(i).unwrap(), rs.long_entry(i).unwrap());
}

#[test]
fn local_replicas_match_brute_force() {
    let g = GridSpec::new(1.0, 32).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 16, 3.0).unwrap();
    let s = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, 0.3, 1e-4, SplitCriterion::MaxNorm).unwrap();
    let mut r = rng(3);
    let sys = ParticleSystem::new(
        (0..40).map(|_| Particle { center: std::array::from_fn(|_| r.random_range(-1.0..1.0)), charge: 1.0 }).collect(),
    );
    let (rs, _, _) = assemble_multiparticle(&s, &sys, &g, &AssembleOptions::new(1e-4)).unwrap();
    let gamma = rs.gamma();
    for _ in 0..200 {
        let i: [usize; 3] = [r.random_range(0..32), r.random_range(0..32), r.random_range(0..32)];
        let want: Vec<usize> = (0..rs.replicas.len())
            .filter(|&nu| (0..3).all(|l| i[l].abs_diff(rs.replicas[nu].center[l]) <= gamma))
            .collect();
        assert_eq!(rs.local_replicas(i), want);
    }
}

#[test]
fn single_particle_at_origin_reproduces_reference() {
    let g = GridSpec::new(1.0, 17).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 16, 3.0).unwrap();
    let s = RsSplit::at(&rule, &g.doubled(), Projection::Average, 8, 1e-6).unwrap();
    let sys = ParticleSystem::new(vec![Particle { center: [0.0; 3], charge: 1.0 }]);
    let mut o = AssembleOptions::new(1e-12);
    o.gamma = Some(17);
    let (rs, _, _) = assemble_multiparticle(&s, &sys, &g, &o).unwrap();
    let want = s.full().shift_window([8, 8, 8], &g).unwrap().to_dense();
    let scale = max_abs(&want);
    for ((i, j, k), v) in want.indexed_iter() {
        assert!((rs.entry([i, j, k]).unwrap() - v).abs() < 1e-10 * scale);
    }
}

#[test]
fn scaling_charges_scales_entries() {
    let g = GridSpec::new(1.0, 16).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 12, 3.0).unwrap();
    let s = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, 0.3, 1e-4, SplitCriterion::MaxNorm).unwrap();
    let (rs, _, _) = assemble_multiparticle(&s, &three_particles(), &g, &AssembleOptions::new(1e-6)).unwrap();
    for c in [2.0, -0.5, 0.37] {
        let sc = rs.scale_charges(c);
        for i in [[0, 0, 0], [3, 8, 12], [7, 10, 9]] {
            let (a, b) = (sc.entry(i).unwrap(), c * rs.entry(i).unwrap());
            if c == 2.0 || c == -0.5 {
                assert_eq!(a, b);
            } else {
                // Rounding is relative to the sum of the absolute rank-one
                // terms, not to the entry: the long coefficients change sign.
                let l = &rs.long;
                let terms: f64 = (0..l.rank())
                    .map(|k| (l.coeffs[k] * l.factors[0][(i[0], k)] * l.factors[1][(i[1], k)] * l.factors[2][(i[2], k)]).abs())
                    .sum();
                let scale = c.abs() * (terms + rs.short_entry(i).unwrap().abs());
                assert!((a - b).abs() <= 8.0 * f64::EPSILON * scale, "{i:?}: {a:e} vs {b:e}");
            }
        }
    }
}

#[test]
fn reassembling_scaled_system_scales_the_potential() {
    let g = GridSpec::new(1.0, 16).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 12, 3.0).unwrap();
    let s = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, 0.3, 1e-4, SplitCriterion::MaxNorm).unwrap();
    let o = AssembleOptions::new(1e-8);
    let (a, _, _) = assemble_multiparticle(&s, &three_particles(), &g, &o).unwrap();
    let (b, _, _) = assemble_multiparticle(&s, &three_particles().scaled(3.0), &g, &o).unwrap();
    for i in [[1, 2, 3], [8, 8, 8], [15, 0, 7]] {
        let (x, y) = (a.entry(i).unwrap(), b.entry(i).unwrap());
        assert!((y - 3.0 * x).abs() < 1e-7 * x.abs().max(1.0));
    }
}

#[test]
fn neutral_random_system_has_small_tucker_rank() {
    let g = GridSpec::new(8.0, 129).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 24, 3.0).unwrap();
    let s = RsSplit::by_criterion(&rule, &g.doubled(), Projection::Average, 2.5, 1e-4, SplitCriterion::MaxNorm).unwrap();
    let mut r = rng(500);
    let sys = ParticleSystem::new(
        (0..500)
            .map(|i| Particle { center: std::array::from_fn(|_| r.random_range(-6.4..6.4)), charge: if i % 2 == 0 { 1.0 } else { -1.0 } })
            .collect(),
    );
    let (_, tk, rep) = assemble_multiparticle(&s, &sys, &g, &AssembleOptions::new(1e-4)).unwrap();
    assert!(tk.ranks().iter().all(|&r| r <= 40), "{:?} (R_l = {})", tk.ranks(), rep.r_l);
}

#[test]
fn particle_outside_box_is_rejected() {
    let g = GridSpec::new(1.0, 8).unwrap();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 8, 3.0).unwrap();
    let s = RsSplit::at(&rule, &g.doubled(), Projection::Average, 4, 1e-4).unwrap();
    let sys = ParticleSystem::new(vec![Particle { center: [1.5, 0.0, 0.0], charge: 1.0 }]);
    assert!(assemble_multiparticle(&s, &sys, &g, &AssembleOptions::new(1e-4)).is_err());
    assert!(assemble_multiparticle(&s, &three_particles(), &g, &AssembleOptions::new(1.5)).is_err());
}
