use afflab_core::attractor::{render_cloud, TranslationFamily};
use afflab_core::ifs::AffineIfs;
use afflab_core::linalg::SquareMatrix;
use afflab_core::measures::BernoulliMeasureK;
use afflab_core::pressure::{certify_qm, log_partition_sum, pressure_bracket, solve_dimension, DimensionOptions};
use afflab_core::spectrum::{spectrum_curve, SpectrumOptions};
use afflab_core::symbolic::{LevelKPotential, DEFAULT_WORD_BUDGET};

fn moran() -> AffineIfs {
    AffineIfs::finite(vec![SquareMatrix::diag(&[1.0 / 3.0]); 2]).unwrap()
}

fn twisted_pair() -> AffineIfs {
    AffineIfs::finite(vec![
        SquareMatrix::diag(&[1.0 / 3.0, 1.0 / 30.0]),
        SquareMatrix::from_rows(&[[0.0, -1.0 / 30.0], [10.0 / 30.0, 11.0 / 30.0]]),
    ])
    .unwrap()
}

#[test]
fn dimension_bracket_agrees_with_pressure_signs() {
    let ifs = twisted_pair();
    let alph = ifs.full_alphabet().unwrap();
    let opts = DimensionOptions { depth: 8, ..Default::default() };
    let dim = solve_dimension(&ifs, &alph, &opts).unwrap();
    assert!(dim.s_lo <= dim.s_hi);

    let n = opts.depth;
    let at_hi = certify_qm(&ifs, &alph, dim.s_hi, 2, 3, DEFAULT_WORD_BUDGET).unwrap();
    let hi = pressure_bracket(&ifs, &alph, dim.s_hi, n, &at_hi, DEFAULT_WORD_BUDGET).unwrap();
    assert!(hi.upper <= 1e-9);
    let lo = pressure_bracket(&ifs, &alph, dim.s_lo, n, &dim.certificate, DEFAULT_WORD_BUDGET).unwrap();
    assert!(lo.lower >= -1e-9);

    // A deeper partition sum can only tighten the upper root.
    let deeper = log_partition_sum(&ifs, &alph, dim.s_hi, 10, DEFAULT_WORD_BUDGET).unwrap() / 10.0;
    assert!(deeper <= hi.upper + 1e-12);
}

#[test]
fn moran_cloud_lies_in_the_middle_third_set() {
    let ifs = moran();
    let alph = ifs.full_alphabet().unwrap();
    let s = 2f64.ln() / 3f64.ln();
    let mu = BernoulliMeasureK::from_svf(&ifs, alph, s, 1, DEFAULT_WORD_BUDGET).unwrap();
    let a = TranslationFamily::explicit(1, vec![vec![0.0], vec![2.0 / 3.0]]).unwrap();
    let cloud = render_cloud(&ifs, &mu, &a, 500, 20, 42).unwrap();
    for p in &cloud {
        let mut x = p[0];
        for _ in 0..6 {
            x *= 3.0;
            let digit = x.floor();
            assert!(digit != 1.0 || (x - 1.0).abs() < 1e-6 || (x - 2.0).abs() < 1e-6, "{}", p[0]);
            x -= digit;
        }
    }
}

#[test]
fn moran_spectrum_is_symmetric() {
    let ifs = moran();
    let alph = ifs.full_alphabet().unwrap();
    let phi = LevelKPotential::digit_indicator(2, 1);
    let grid: Vec<Vec<f64>> = (1..10).map(|j| vec![j as f64 / 10.0]).collect();
    let opts = SpectrumOptions { level: 2, ..Default::default() };
    let dims: Vec<f64> = spectrum_curve(&ifs, &alph, &phi, &grid, &opts)
        .into_iter()
        .map(|p| p.unwrap().dim)
        .collect();
    for j in 0..dims.len() {
        assert!((dims[j] - dims[dims.len() - 1 - j]).abs() < 1e-8);
    }
    assert!((dims[4] - 2f64.ln() / 3f64.ln()).abs() < 1e-8);
}
