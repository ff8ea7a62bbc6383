//! Examples checked against values computed independently in the test.

use ndarray::{array, Array1, Array2};

use sympcast::panel::{generate_synthetic, SYNTHETIC_TARGET};
use sympcast::rankcorr::{f_regression, f_statistics, pearson, pearson_p_value};
use sympcast::shapecluster::dtw;
use sympcast::SyntheticSpec;

/// Least squares by modified Gram-Schmidt; returns the residual vector.
fn mgs_residual(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let mut r = y.clone();
    let mut basis: Vec<Array1<f64>> = Vec::new();
    for col in x.columns() {
        let mut q = col.to_owned();
        for b in &basis {
            let c = b.dot(&q);
            q.scaled_add(-c, b);
        }
        let n = q.dot(&q).sqrt();
        if n < 1e-12 * col.dot(&col).sqrt().max(1.0) {
            continue;
        }
        q /= n;
        let c = q.dot(&r);
        r.scaled_add(-c, &q);
        basis.push(q);
    }
    r
}

fn naive_f(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    r2 / (1.0 - r2) * (n - 2.0)
}

#[test]
fn noiseless_synthetic_target_is_affine() {
    for seed in [0, 5, 9] {
        let spec = SyntheticSpec { noise_sigma: 0.0, seed, ..SyntheticSpec::default() };
        let ds = generate_synthetic(&spec).unwrap();
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let cols: Vec<usize> = (0..spec.n_signals).collect();
        let sig = ds.matrix(&rows, &cols);
        let mut x = Array2::<f64>::ones((rows.len(), cols.len() + 1));
        x.slice_mut(ndarray::s![.., 1..]).assign(&sig);
        let y = ds.column(SYNTHETIC_TARGET).unwrap().to_owned();
        let resid = mgs_residual(&x, &y);
        let max = resid.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        assert!(max < 1e-12, "seed {seed}: max residual {max:e}");
    }
}

#[test]
fn planted_three_signal_order() {
    let spec = SyntheticSpec { n_signals: 3, ..SyntheticSpec::default() };
    let ds = generate_synthetic(&spec).unwrap();
    let y = ds.column(SYNTHETIC_TARGET).unwrap().to_vec();
    let mut oracle: Vec<(f64, String)> = ds
        .feature_names()
        .into_iter()
        .map(|f| (naive_f(&ds.column(&f).unwrap().to_vec(), &y), f))
        .collect();
    oracle.sort_by(|a, b| b.0.total_cmp(&a.0));
    let r = f_regression(&ds, &ds.feature_names(), SYNTHETIC_TARGET).unwrap();
    let got: Vec<&str> = r.entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(got, ["signal_00_weighted", "signal_01_weighted", "signal_02_weighted"]);
    assert_eq!(got, oracle.iter().map(|o| o.1.as_str()).collect::<Vec<_>>());
    for (e, o) in r.entries.iter().zip(&oracle) {
        assert!((e.f_stat - o.0).abs() <= 1e-9 * o.0);
    }
}

#[test]
fn small_hand_examples() {
    let x = array![1.0, 2.0, 3.0];
    let y = array![1.0, 2.0, 2.0];
    assert!((pearson(x.view(), y.view()).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-12);
    let (f, _) = f_statistics(x.view().insert_axis(ndarray::Axis(1)), y.view()).unwrap();
    assert!((f[0] - 3.0).abs() < 1e-9);
    assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap().distance, 0.0);
}

#[test]
fn p_value_matches_integrated_t_density() {
    // df = 1: t density is Cauchy; integrate |t| > t0 by Simpson on the
    // substitution t = tan(θ), which maps the tail to a finite interval.
    let r: f64 = 0.866025;
    let t0 = r * (1.0 / (1.0 - r * r)).sqrt();
    let (a, b) = (t0.atan(), std::f64::consts::FRAC_PI_2);
    let n = 2000;
    let h = (b - a) / n as f64;
    let dens = |theta: f64| {
        let t = theta.tan();
        let sec2 = 1.0 + t * t;
        sec2 / (std::f64::consts::PI * (1.0 + t * t))
    };
    let mut s = dens(a) + dens(b);
    for i in 1..n {
        s += dens(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let oracle = 2.0 * s * h / 3.0;
    let p = pearson_p_value(r, 3).unwrap();
    assert!((p - oracle).abs() < 1e-6, "{p} vs {oracle}");
    assert!((p - 1.0 / 3.0).abs() < 1e-4);
}
