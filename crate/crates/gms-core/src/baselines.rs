//! Classical Pick-Freeze Sobol estimators, for head-to-head comparison with
//! the U-statistic pipeline. Scalar outputs only.

use crate::error::{GmsError, Result};
use crate::kahan::KahanSum;
use crate::sampling::PairedSample;
use crate::ustat::psi;

fn moments(z: &[f64], w: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = z.len() as f64;
    let mut m11 = KahanSum::new();
    let mut m1 = KahanSum::new();
    let mut m2 = KahanSum::new();
    let mut m20 = KahanSum::new();
    let mut m02 = KahanSum::new();
    for (&a, &b) in z.iter().zip(w.iter()) {
        m11.add(a * b);
        m1.add(a);
        m2.add(b);
        m20.add(a * a);
        m02.add(b * b);
    }
    (m11.value() / n, m1.value() / n, m2.value() / n, m20.value() / n, m02.value() / n)
}

fn scalar_columns(sample: &PairedSample) -> Result<(Vec<f64>, Vec<f64>)> {
    if sample.n() < 2 {
        return Err(GmsError::InvalidArgument("baselines need N >= 2".into()));
    }
    sample.scalar_columns()
}

/// The classical Pick-Freeze estimator with diagonal-inclusive products:
/// Psi(U1, (1-1/N^2) Ut2, U3, (1-1/N^2) Ut4) with
/// Ut2 = sum(Z) sum(Z^u) / (N(N-1)) and Ut4 = (sum Z)^2 / (N(N-1)).
pub fn sobol_pf(sample: &PairedSample) -> Result<f64> {
    let (z, w) = scalar_columns(sample)?;
    let n = z.len() as f64;
    let (m11, m1, m2, m20, _) = moments(&z, &w);
    let u1 = m11;
    let u3 = m20;
    let ut2 = n * m1 * m2 / (n - 1.0);
    let ut4 = n * m1 * m1 / (n - 1.0);
    let c = 1.0 - 1.0 / (n * n);
    psi(u1, c * ut2, u3, c * ut4)
}

/// The asymptotically efficient symmetrized estimator T^u, pooling both
/// columns in the mean and second-moment terms.
pub fn sobol_pf_efficient(sample: &PairedSample) -> Result<f64> {
    let (z, w) = scalar_columns(sample)?;
    let (m11, m1, m2, m20, m02) = moments(&z, &w);
    let s = 0.5 * (m1 + m2);
    let q = 0.5 * (m20 + m02);
    psi(m11, s * s, q, s * s)
}

/// Delta-method asymptotic sigma for `sobol_pf`, from the gradient of its
/// limit functional (m11 - m1 m2) / (m20 - m1^2) in the five sample moments
/// (Z Z^u, Z, Z^u, Z^2, (Z^u)^2).
pub fn sobol_pf_with_sigma(sample: &PairedSample) -> Result<(f64, f64)> {
    let value = sobol_pf(sample)?;
    let (z, w) = scalar_columns(sample)?;
    let (m11, m1, m2, m20, _) = moments(&z, &w);
    let num = m11 - m1 * m2;
    let den = m20 - m1 * m1;
    let grad = [
        1.0 / den,
        (-m2 * den + 2.0 * m1 * num) / (den * den),
        -m1 / den,
        -num / (den * den),
        0.0,
    ];
    Ok((value, moment_delta_sigma(&z, &w, &grad)))
}

/// Delta-method asymptotic sigma for `sobol_pf_efficient`.
pub fn sobol_pf_efficient_with_sigma(sample: &PairedSample) -> Result<(f64, f64)> {
    let value = sobol_pf_efficient(sample)?;
    let (z, w) = scalar_columns(sample)?;
    let (m11, m1, m2, m20, m02) = moments(&z, &w);
    let s = 0.5 * (m1 + m2);
    let num = m11 - s * s;
    let den = 0.5 * (m20 + m02) - s * s;
    let gs = s * (num - den) / (den * den);
    let grad = [
        1.0 / den,
        gs,
        gs,
        -num / (2.0 * den * den),
        -num / (2.0 * den * den),
    ];
    Ok((value, moment_delta_sigma(&z, &w, &grad)))
}

fn moment_delta_sigma(z: &[f64], w: &[f64], grad: &[f64; 5]) -> f64 {
    let n = z.len() as f64;
    let obs = |i: usize| -> [f64; 5] {
        [z[i] * w[i], z[i], w[i], z[i] * z[i], w[i] * w[i]]
    };
    let mut means = [0.0; 5];
    for (k, mean) in means.iter_mut().enumerate() {
        let mut s = KahanSum::new();
        for i in 0..z.len() {
            s.add(obs(i)[k]);
        }
        *mean = s.value() / n;
    }
    // sigma^2 = grad' Cov grad = Var of the projected observation
    let mut s = KahanSum::new();
    for i in 0..z.len() {
        let o = obs(i);
        let mut proj = 0.0;
        for k in 0..5 {
            proj += grad[k] * (o[k] - means[k]);
        }
        s.add(proj * proj);
    }
    (s.value() / (n - 1.0)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::PairedSample;

    fn sample_from(pairs: &[(f64, f64)]) -> PairedSample {
        PairedSample::from_scalar_pairs(pairs, 0)
    }

    #[test]
    fn frozen_rows_give_exactly_one() {
        // rows (z_i, z_i): numerator and denominator coincide in both baselines
        let pairs: Vec<(f64, f64)> = (0..25)
            .map(|i| {
                let v = (i as f64 * 0.61).sin() + 2.0;
                (v, v)
            })
            .collect();
        let s = sample_from(&pairs);
        assert!((sobol_pf(&s).unwrap() - 1.0).abs() < 1e-12);
        assert!((sobol_pf_efficient(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_give_exactly_one() {
        // with the diagonal-inclusive products both sides reduce to -z^2/N
        let s = sample_from(&vec![(3.0, 3.0); 10]);
        assert!((sobol_pf(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn efficient_estimator_column_swap_invariant() {
        let pairs: Vec<(f64, f64)> = (0..40)
            .map(|i| ((i as f64 * 0.8).sin() + 2.0, (i as f64 * 1.9).cos() + 2.0))
            .collect();
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let v1 = sobol_pf_efficient(&sample_from(&pairs)).unwrap();
        let v2 = sobol_pf_efficient(&sample_from(&swapped)).unwrap();
        assert!((v1 - v2).abs() < 1e-14);
    }

    #[test]
    fn non_scalar_outputs_rejected() {
        use crate::metric::Point;
        use crate::sampling::{DesignMeta, SubsetU};
        let s = PairedSample {
            rows: vec![(Point::Vector(vec![1.0, 2.0]), Point::Vector(vec![1.0, 2.0])); 4],
            design: DesignMeta {
                model: "v".into(),
                subset: SubsetU::new(&[1], 1).unwrap(),
                seed: 0,
                calls: 0,
            },
        };
        assert!(sobol_pf(&s).is_err());
    }
}
