mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rangesep::tucker::*;
use rangesep::*;

fn rel_err(a: &CanonicalTensor3, b: &ndarray::Array3<f64>) -> f64 {
    frob(&(&a.to_dense() - b)) / frob(b)
}

fn orthonormal(v: &DMatrix<f64>) -> bool {
    (v.tr_mul(v) - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-12
}

#[test]
fn rank_one_input_compresses_exactly() {
    let g = GridSpec::new(1.0, 10).unwrap();
    let t = random_canonical(g, 1, 1);
    let (tk, c, rep) = compress_can_tuck_can(&t, &CompressionOptions::new(1e-8)).unwrap();
    assert_eq!(tk.ranks(), [1, 1, 1]);
    assert_eq!(c.rank(), 1);
    assert_eq!(rep.canonical_rank, 1);
    assert!(rel_err(&c, &t.to_dense()) < 1e-14);
}

#[test]
fn random_rank_ten_within_three_eps() {
    let g = GridSpec::new(1.0, 16).unwrap();
    let t = random_canonical(g, 10, 2);
    let dense = t.to_dense();
    for method in [ReexpansionMethod::Auto, ReexpansionMethod::SliceSvd] {
        let mut o = CompressionOptions::new(1e-6);
        o.method = method;
        let (tk, c, _) = compress_can_tuck_can(&t, &o).unwrap();
        assert!(rel_err(&c, &dense) <= 3e-6, "{method:?}");
        assert!(frob(&(&tk.to_dense() - &dense)) / frob(&dense) <= 3e-6);
        assert!(tk.factors.iter().all(orthonormal));
    }
}

#[test]
fn low_rank_sum_is_reduced() {
    // Ten copies of the same three terms with different weights.
    let g = GridSpec::new(1.0, 12).unwrap();
    let base = random_canonical(g, 3, 3);
    let parts: Vec<CanonicalTensor3> = (0..10).map(|i| base.scale(1.0 + i as f64)).collect();
    let t = CanonicalTensor3::sum(g, &parts).unwrap();
    assert_eq!(t.rank(), 30);
    let (tk, c, _) = compress_can_tuck_can(&t, &CompressionOptions::new(1e-10)).unwrap();
    assert_eq!(tk.ranks(), [3, 3, 3]);
    assert!(c.rank() <= 9);
    assert!(rel_err(&c, &t.to_dense()) < 3e-10);
}

#[test]
fn explicit_als_finds_exact_rank() {
    let g = GridSpec::new(1.0, 10).unwrap();
    let t = random_canonical(g, 2, 4);
    let mut o = CompressionOptions::new(1e-6);
    o.method = ReexpansionMethod::Als;
    let (_, c, rep) = compress_can_tuck_can(&t, &o).unwrap();
    assert_eq!(rep.method, ReexpansionMethod::Als);
    assert!(c.rank() <= 2, "rank {} err {}", c.rank(), rel_err(&c, &t.to_dense()));
    assert!(rel_err(&c, &t.to_dense()) <= 3e-6);
}

#[test]
fn als_without_iterations_reports_best_residual() {
    let g = GridSpec::new(1.0, 8).unwrap();
    let t = random_canonical(g, 6, 5);
    let mut o = CompressionOptions::new(1e-12);
    o.method = ReexpansionMethod::Als;
    o.max_iter = 1;
    match compress_can_tuck_can(&t, &o) {
        Err(Error::NotConverged { best_residual, .. }) => assert!(best_residual > 1e-12),
        Ok((_, c, _)) => assert!(rel_err(&c, &t.to_dense()) <= 3e-12),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn tucker_entry_matches_dense() {
    let g = GridSpec::new(1.0, 7).unwrap();
    let t = random_canonical(g, 4, 6);
    let (tk, _, _) = compress_can_tuck_can(&t, &CompressionOptions::new(1e-12)).unwrap();
    let d = tk.to_dense();
    assert!((tk.entry([1, 5, 3]).unwrap() - d[[1, 5, 3]]).abs() < 1e-13);
}

#[test]
fn compression_is_seed_deterministic() {
    let g = GridSpec::new(1.0, 8).unwrap();
    let t = random_canonical(g, 3, 7);
    let o = CompressionOptions::new(1e-5);
    let (_, a, _) = compress_can_tuck_can(&t, &o).unwrap();
    let (_, b, _) = compress_can_tuck_can(&t, &o).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_tensor_compresses_to_rank_zero() {
    let g = GridSpec::new(1.0, 6).unwrap();
    let f = DMatrix::zeros(6, 2);
    let t = CanonicalTensor3::new(g, [f.clone(), f.clone(), f], DVector::from_element(2, 1.0)).unwrap();
    let (_, c, _) = compress_can_tuck_can(&t, &CompressionOptions::new(1e-4)).unwrap();
    assert_eq!(c.rank(), 0);
}
