//! Compensated summation for the long reductions behind every norm.

use num_complex::Complex64;

/// Neumaier's variant of Kahan summation.
pub(crate) fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub(crate) fn sum_complex<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    let (re, im): (Vec<f64>, Vec<f64>) = values.into_iter().map(|z| (z.re, z.im)).unzip();
    Complex64::new(sum(re), sum(im))
}
