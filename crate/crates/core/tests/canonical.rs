mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rangesep::quadrature::{build_sinc_rule, QuadratureRule, RadialKernel};
use rangesep::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(1.0, n).unwrap()
}

#[test]
fn entries_match_dense_materialization() {
    let t = random_canonical(grid(8), 3, 1);
    let d = dense_by_definition(&t);
    let fast = t.to_dense();
    for ((i, j, k), v) in d.indexed_iter() {
        assert!((t.entry([i, j, k]).unwrap() - v).abs() < 1e-12);
        assert!((fast[[i, j, k]] - v).abs() < 1e-12);
    }
}

#[test]
fn add_concatenates_ranks_and_sums_entries() {
    let a = random_canonical(grid(8), 2, 2);
    let b = random_canonical(grid(8), 3, 3);
    let s = a.add(&b).unwrap();
    assert_eq!(s.rank(), 5);
    let want = dense_by_definition(&a) + dense_by_definition(&b);
    assert!(max_abs_diff(&dense_by_definition(&s), &want) < 1e-12);
}

#[test]
fn add_zero_rank_is_identity() {
    let a = random_canonical(grid(6), 2, 4);
    let s = a.add(&CanonicalTensor3::zeros(a.grid)).unwrap();
    assert_eq!(s, a);
}

#[test]
fn adding_negation_cancels() {
    let a = random_canonical(grid(6), 3, 5);
    let z = a.add(&a.scale(-1.0)).unwrap();
    let mut r = rng(9);
    for _ in 0..50 {
        let i = [r.random_range(0..6), r.random_range(0..6), r.random_range(0..6)];
        assert!(z.entry(i).unwrap().abs() < 1e-14);
    }
}

#[test]
fn frobenius_norm_matches_dense() {
    let t = random_canonical(grid(9), 7, 6);
    let d = frob(&dense_by_definition(&t));
    assert!((t.frobenius_norm() - d).abs() < 1e-12 * d);
}

#[test]
fn frobenius_norm_blocks_agree_for_large_rank() {
    let t = random_canonical(grid(5), 600, 7);
    let d = frob(&dense_by_definition(&t));
    assert!((t.frobenius_norm() - d).abs() < 1e-10 * d);
}

#[test]
fn shift_window_at_midpoint_is_central_slice() {
    let g = grid(16);
    let r = random_canonical(g.doubled(), 2, 8);
    let w = r.shift_window([8, 8, 8], &g).unwrap();
    for l in 0..3 {
        assert_eq!(w.factors[l], r.factors[l].rows(8, 16).into_owned());
    }
}

#[test]
fn shift_by_one_moves_one_window() {
    let g = grid(16);
    let r = random_canonical(g.doubled(), 2, 10);
    let a = r.shift_window([8, 8, 8], &g).unwrap();
    let b = r.shift_window([9, 8, 8], &g).unwrap();
    assert_eq!(b.factors[0], r.factors[0].rows(7, 16).into_owned());
    assert_eq!(a.factors[1], b.factors[1]);
    assert_eq!(a.factors[2], b.factors[2]);
}

#[test]
fn shift_window_matches_dense_crop() {
    let g = grid(16);
    let r = random_canonical(g.doubled(), 3, 11);
    let big = dense_by_definition(&r);
    let c = [3, 12, 7];
    let w = r.shift_window(c, &g).unwrap();
    assert_eq!(w.rank(), 3);
    let d = w.to_dense();
    for ((i, j, k), v) in d.indexed_iter() {
        let src = [16 + i - c[0], 16 + j - c[1], 16 + k - c[2]];
        assert!((v - big[src]).abs() < 1e-12);
    }
}

#[test]
fn shift_window_rejects_bad_input() {
    let g = grid(8);
    let r = random_canonical(g.doubled(), 1, 12);
    assert!(r.shift_window([8, 0, 0], &g).is_err());
    assert!(r.shift_window([0, 0, 0], &grid(9)).is_err());
}

#[test]
fn degenerate_gaussian_projects_to_constant() {
    let rule = QuadratureRule {
        m: 1,
        c0: 1.0,
        kernel: RadialKernel::newton(),
        ks: vec![0],
        nodes: vec![1e-12],
        weights: vec![1.0],
    };
    let g = GridSpec::new(2.0, 10).unwrap();
    let t = project_kernel(&rule, &g);
    let h = g.h();
    assert!(t.factors[0].iter().all(|&v| v == h));
    assert!((t.entry([3, 4, 5]).unwrap() - h * h * h).abs() < 1e-15);
}

#[test]
fn projected_kernel_is_symmetric_and_even() {
    let rule = build_sinc_rule(RadialKernel::newton(), 12, 3.0).unwrap();
    let g = GridSpec::new(1.0, 20).unwrap();
    let t = project_kernel(&rule, &g);
    assert_eq!(t.factors[0], t.factors[1]);
    assert_eq!(t.factors[1], t.factors[2]);
    for k in 0..t.rank() {
        for i in 0..10 {
            let (a, b) = (t.factors[0][(i, k)], t.factors[0][(19 - i, k)]);
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        }
    }
}

/// Galerkin cell integrals divided by `h³`, against tensor Gauss–Legendre
/// averages of `1/(4π|x|)` over each cell.
#[test]
fn projection_matches_cell_averaged_kernel() {
    let g = GridSpec::new(1.0, 32).unwrap();
    let h = g.h();
    let rule = build_sinc_rule(RadialKernel::coulomb(), 24, 2.0).unwrap();
    let t = project_kernel(&rule, &g);
    let kernel = |x: [f64; 3]| 1.0 / (4.0 * std::f64::consts::PI * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
    let mut r = rng(21);
    let mut worst: f64 = 0.0;
    let mut cells: Vec<[usize; 3]> = (0..300).map(|_| [r.random_range(0..32), r.random_range(0..32), r.random_range(0..32)]).collect();
    cells.extend([[16, 16, 17], [17, 16, 16], [14, 15, 16], [18, 18, 18], [16, 18, 15]]);
    for c in cells {
        if c.iter().all(|&i| i == 15 || i == 16) {
            continue;
        }
        let lo = c.map(|i| g.coord(i) - 0.5 * h);
        let hi = c.map(|i| g.coord(i) + 0.5 * h);
        let near = c.iter().all(|&i| (i as i64 - 15).abs() <= 3 || (i as i64 - 16).abs() <= 3);
        let avg = box_average(&kernel, lo, hi, 8, if near { 6 } else { 1 });
        let got = t.entry(c).unwrap() / (h * h * h);
        worst = worst.max(((got - avg) / avg).abs());
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn averaged_projection_divides_by_cell_volume() {
    let rule = build_sinc_rule(RadialKernel::newton(), 8, 3.0).unwrap();
    let g = GridSpec::new(1.5, 7).unwrap();
    let a = project_kernel(&rule, &g);
    let b = project_kernel_averaged(&rule, &g);
    let h3 = g.h().powi(3);
    let e = a.entry([1, 2, 3]).unwrap() / h3;
    assert!((b.entry([1, 2, 3]).unwrap() - e).abs() < 1e-12 * e);
}

#[test]
fn coefficients_and_factor_scaling_are_equivalent() {
    let t = random_canonical(grid(5), 2, 13);
    let mut factors = t.factors.clone();
    for k in 0..2 {
        factors[0].column_mut(k).scale_mut(t.coeffs[k]);
    }
    let u = CanonicalTensor3::new(t.grid, factors, DVector::from_element(2, 1.0)).unwrap();
    assert!(max_abs_diff(&t.to_dense(), &u.to_dense()) < 1e-13);
    let _ = DMatrix::<f64>::zeros(1, 1);
}
