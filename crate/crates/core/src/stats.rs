//! Binned time series with jackknife errors and autocorrelation estimates.

/// Jackknife mean and one-sigma error of a sample of bin averages.
pub fn jackknife(bin_means: &[f64]) -> (f64, f64) {
    let n = bin_means.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let total: f64 = bin_means.iter().sum();
    let mean = total / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let nf = n as f64;
    let leave_one_out = bin_means.iter().map(|b| (total - b) / (nf - 1.0));
    let var = leave_one_out.map(|t| (t - mean).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    (mean, var.sqrt())
}

/// Inverse-variance weighted combination of independent estimates.
///
/// Falls back to the plain average when any error is zero or non-finite.
pub fn inverse_variance_merge(means: &[f64], errors: &[f64]) -> (f64, f64) {
    debug_assert_eq!(means.len(), errors.len());
    let n = means.len() as f64;
    if errors.iter().all(|e| e.is_finite() && *e > 0.0) {
        let weights: Vec<f64> = errors.iter().map(|e| 1.0 / (e * e)).collect();
        let wsum: f64 = weights.iter().sum();
        let mean = means.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>() / wsum;
        (mean, (1.0 / wsum).sqrt())
    } else {
        let mean = means.iter().sum::<f64>() / n;
        let err = errors.iter().map(|e| e * e).sum::<f64>().sqrt() / n;
        (mean, err)
    }
}

/// Multi-dimensional time series binned into between `min_bins` and
/// `2 * min_bins` equal-length bins. When the bin buffer fills up, adjacent
/// bins are merged and the bin length doubles, so memory stays bounded for
/// arbitrarily long runs.
#[derive(Debug, Clone)]
pub struct BinnedSeries {
    dim: usize,
    min_bins: usize,
    bin_len: usize,
    /// Completed bin sums, `dim` values per bin.
    bins: Vec<f64>,
    partial: Vec<f64>,
    partial_count: usize,
    raw_sum: Vec<f64>,
    raw_sumsq: Vec<f64>,
    samples: u64,
}

impl BinnedSeries {
    pub fn new(dim: usize, min_bins: usize) -> Self {
        assert!(min_bins >= 2, "need at least two bins");
        BinnedSeries {
            dim,
            min_bins,
            bin_len: 1,
            bins: Vec::with_capacity(2 * min_bins * dim),
            partial: vec![0.0; dim],
            partial_count: 0,
            raw_sum: vec![0.0; dim],
            raw_sumsq: vec![0.0; dim],
            samples: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn bin_len(&self) -> usize {
        self.bin_len
    }

    pub fn complete_bins(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.bins.len() / self.dim
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, &v) in x.iter().enumerate() {
            self.partial[i] += v;
            self.raw_sum[i] += v;
            self.raw_sumsq[i] += v * v;
        }
        self.samples += 1;
        self.partial_count += 1;
        if self.partial_count == self.bin_len {
            self.bins.extend_from_slice(&self.partial);
            self.partial.iter_mut().for_each(|p| *p = 0.0);
            self.partial_count = 0;
            if self.complete_bins() == 2 * self.min_bins {
                self.coarsen();
            }
        }
    }

    fn coarsen(&mut self) {
        let d = self.dim;
        let nb = self.complete_bins();
        let mut merged = Vec::with_capacity(nb / 2 * d);
        for b in 0..nb / 2 {
            for i in 0..d {
                merged.push(self.bins[2 * b * d + i] + self.bins[(2 * b + 1) * d + i]);
            }
        }
        self.bins = merged;
        self.bin_len *= 2;
    }

    fn bin_means(&self, component: usize) -> Vec<f64> {
        let len = self.bin_len as f64;
        self.bins
            .chunks_exact(self.dim)
            .map(|b| b[component] / len)
            .collect()
    }

    /// Jackknife means and errors over the completed bins.
    pub fn mean_and_error(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.dim).map(|c| jackknife(&self.bin_means(c))).unzip()
    }

    /// Integrated autocorrelation time per component, estimated from the
    /// ratio of the bin-mean variance to the single-sample variance.
    pub fn autocorrelation_times(&self) -> Vec<f64> {
        let n = self.samples as f64;
        (0..self.dim)
            .map(|c| {
                let mean = self.raw_sum[c] / n;
                let raw_var = (self.raw_sumsq[c] / n - mean * mean).max(0.0);
                let bins = self.bin_means(c);
                if bins.len() < 2 || raw_var <= 1e-300 {
                    return 0.0;
                }
                let bm = bins.iter().sum::<f64>() / bins.len() as f64;
                let bin_var =
                    bins.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (bins.len() - 1) as f64;
                (0.5 * self.bin_len as f64 * bin_var / raw_var).max(0.5)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jackknife_of_means_matches_standard_error() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let (m, e) = jackknife(&xs);
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m - mean).abs() < 1e-14);
        assert!((e - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn merge_weights_by_inverse_variance() {
        let (m, e) = inverse_variance_merge(&[1.0, 3.0], &[1.0, 1.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((e - 0.5f64.sqrt()).abs() < 1e-15);
        let (m, _) = inverse_variance_merge(&[1.0, 3.0], &[1.0, 0.0]);
        assert_eq!(m, 2.0);
    }

    #[test]
    fn bin_count_stays_bounded() {
        let mut s = BinnedSeries::new(2, 32);
        for i in 0..100_000 {
            s.push(&[i as f64, 1.0]);
            assert!(s.complete_bins() < 64);
        }
        assert!(s.complete_bins() >= 32);
        let (m, _) = s.mean_and_error();
        assert!((m[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_error_and_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = BinnedSeries::new(1, 32);
        let n = 200_000;
        for _ in 0..n {
            s.push(&[rng.random::<f64>()]);
        }
        let (m, e) = s.mean_and_error();
        let expected = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!((m[0] - 0.5).abs() < 4.0 * expected);
        assert!(
            e[0] > 0.6 * expected && e[0] < 1.5 * expected,
            "{} vs {}",
            e[0],
            expected
        );
        let tau = s.autocorrelation_times()[0];
        assert!(tau < 1.0, "tau {tau}");
    }

    #[test]
    fn correlated_series_has_larger_tau() {
        // AR(1) with phi = 0.9: tau_int = (1 + phi) / (2 (1 - phi)) = 9.5
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = BinnedSeries::new(1, 32);
        let mut x = 0.0;
        for _ in 0..400_000 {
            x = 0.9 * x + (rng.random::<f64>() - 0.5);
            s.push(&[x]);
        }
        let tau = s.autocorrelation_times()[0];
        assert!(tau > 6.0 && tau < 13.0, "tau {tau}");
    }
}
