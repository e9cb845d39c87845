//! Composite Simpson rule on uniform meshes.

use num_complex::Complex64;

/// Simpson weights for `n` intervals (n even), spacing `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even interval count");
    let mut w = vec![0.0; n + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    w
}

pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    simpson_weights(n, h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

pub fn simpson_c(values: &[Complex64], h: f64) -> Complex64 {
    let n = values.len() - 1;
    simpson_weights(n, h)
        .iter()
        .zip(values)
        .map(|(w, v)| v * *w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_cubics_exactly() {
        let n = 8;
        let h = 2.0 / n as f64;
        let v: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn sine_square() {
        let n = 512;
        let h = std::f64::consts::PI / n as f64;
        let v: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin().powi(2)).collect();
        assert!((simpson(&v, h) - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
