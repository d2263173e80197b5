// SPDX-License-Identifier: Apache-2.0

use super::HeavyTailSpec;
use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

/// Monte-Carlo check of the moment bounds of a [`HeavyTailSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    /// Largest estimate of E|⟨u, X − μ⟩|^p over the tested directions.
    pub directional_max: f64,
    /// Standard error of `directional_max`.
    pub directional_se: f64,
    /// M^p.
    pub directional_bound: f64,
    /// Every direction satisfies estimate ≤ M^p + 3·SE.
    pub directional_pass: bool,
    /// Estimate of E‖X − μ‖^p.
    pub norm_moment: f64,
    pub norm_se: f64,
    /// d^{p/2} M^p.
    pub norm_bound: f64,
    pub norm_pass: bool,
    /// Hill estimate of the tail index of ‖X − μ‖ from the largest order
    /// statistics.
    pub tail_index: f64,
    /// The estimated tail index exceeds p.
    pub tail_pass: bool,
}

impl MomentReport {
    pub fn pass(&self) -> bool {
        self.directional_pass && self.norm_pass && self.tail_pass
    }

    /// (M^p + 3·SE − estimate) for the worst direction; negative on failure.
    pub fn directional_margin(&self) -> f64 {
        self.directional_bound + 3.0 * self.directional_se - self.directional_max
    }

    pub fn norm_margin(&self) -> f64 {
        self.norm_bound + 3.0 * self.norm_se - self.norm_moment
    }
}

/// Mean and standard error of a running sum and sum of squares.
fn mean_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    (mean, (var / nf).sqrt())
}

/// Hill estimator on the `k` largest of `values` (which it reorders).
fn hill_tail_index(values: &mut [f64], k: usize) -> f64 {
    let n = values.len();
    let k = k.min(n - 1).max(1);
    values.select_nth_unstable_by(n - k - 1, f64::total_cmp);
    let threshold = values[n - k - 1];
    if threshold <= 0.0 {
        return f64::INFINITY;
    }
    let mean_log: f64 = values[n - k..].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if mean_log > 0.0 {
        1.0 / mean_log
    } else {
        f64::INFINITY
    }
}

/// Estimate the directional p-th moments over `n_dirs` random unit directions
/// and the p-th moment of the norm from `n_mc` draws, comparing them to M^p
/// and d^{p/2} M^p with a 3-standard-error allowance, and estimate the tail
/// index of the norm.
///
/// The tail check catches distributions whose p-th moment is infinite, where
/// the sample moments and their standard errors grow together and the
/// moment checks alone can pass.
pub fn verify_moment_bound<R: Rng + ?Sized>(
    spec: &HeavyTailSpec,
    n_mc: usize,
    n_dirs: usize,
    rng: &mut R,
) -> MomentReport {
    let n_mc = n_mc.max(2);
    let n_dirs = n_dirs.max(1);
    let d = spec.dimension();
    let p = spec.moment_order();

    let mut dirs = Array2::<f64>::zeros((d, n_dirs));
    for mut col in dirs.axis_iter_mut(Axis(1)) {
        loop {
            col.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            let norm = col.dot(&col).sqrt();
            if norm > 1e-12 {
                col /= norm;
                break;
            }
        }
    }

    const CHUNK: usize = 8192;
    let mut dir_sum = Array1::<f64>::zeros(n_dirs);
    let mut dir_sq = Array1::<f64>::zeros(n_dirs);
    let (mut norm_sum, mut norm_sq) = (0.0, 0.0);
    let mut norms = Vec::with_capacity(n_mc);
    let mut done = 0;
    while done < n_mc {
        let m = CHUNK.min(n_mc - done);
        let mut x = spec.sample(m, rng);
        x -= spec.mean();
        let proj = x.dot(&dirs);
        for row in proj.axis_iter(Axis(0)) {
            for ((v, s), q) in row.iter().zip(dir_sum.iter_mut()).zip(dir_sq.iter_mut()) {
                let a = v.abs().powf(p);
                *s += a;
                *q += a * a;
            }
        }
        for row in x.slice(s![.., ..]).axis_iter(Axis(0)) {
            let r = row.dot(&row).sqrt();
            norms.push(r);
            let a = r.powf(p);
            norm_sum += a;
            norm_sq += a * a;
        }
        done += m;
    }

    let directional_bound = spec.moment_bound().powf(p);
    let mut directional_pass = true;
    let (mut directional_max, mut directional_se) = (f64::NEG_INFINITY, 0.0);
    for j in 0..n_dirs {
        let (mean, se) = mean_se(dir_sum[j], dir_sq[j], n_mc);
        directional_pass &= mean.is_finite() && mean <= directional_bound + 3.0 * se;
        if mean > directional_max {
            directional_max = mean;
            directional_se = se;
        }
    }

    let norm_bound = (d as f64).powf(p / 2.0) * directional_bound;
    let (norm_moment, norm_se) = mean_se(norm_sum, norm_sq, n_mc);
    let norm_pass = norm_moment.is_finite() && norm_moment <= norm_bound + 3.0 * norm_se;

    let k_tail = (n_mc / 1000).clamp(10, 1000);
    let tail_index = hill_tail_index(&mut norms, k_tail);

    MomentReport {
        directional_max,
        directional_se,
        directional_bound,
        directional_pass,
        norm_moment,
        norm_se,
        norm_bound,
        norm_pass,
        tail_index,
        tail_pass: tail_index > p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::synthetic::Family;

    #[test]
    fn gaussian_norm_moment_is_dimension() {
        let spec = HeavyTailSpec::centered(4, 2.0, 1.0, Family::Gaussian).unwrap();
        let report = verify_moment_bound(&spec, 200_000, 50, &mut stream(1));
        assert!(report.pass(), "{report:?}");
        assert!((report.norm_moment - 4.0).abs() < 5.0 * report.norm_se);
        assert!((report.directional_max - 1.0).abs() < 0.03);
    }

    #[test]
    fn doubling_m_scales_report_by_two_to_the_p() {
        let p = 3.0;
        let a = HeavyTailSpec::centered(3, p, 1.0, Family::student_like(p)).unwrap();
        let b = HeavyTailSpec::centered(3, p, 2.0, Family::student_like(p)).unwrap();
        let ra = verify_moment_bound(&a, 20_000, 10, &mut stream(2));
        let rb = verify_moment_bound(&b, 20_000, 10, &mut stream(2));
        let f = 2f64.powf(p);
        assert!((rb.directional_max - f * ra.directional_max).abs() < 1e-9 * rb.directional_max);
        assert!((rb.norm_moment - f * ra.norm_moment).abs() < 1e-9 * rb.norm_moment);
        assert!((rb.tail_index - ra.tail_index).abs() < 1e-9 * ra.tail_index);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = stream(3);
        let mut v: Vec<f64> = (0..200_000)
            .map(|_| {
                let u: f64 = rng.random();
                (1.0 - u).powf(-1.0 / 2.5)
            })
            .collect();
        let a = hill_tail_index(&mut v, 1000);
        assert!((a - 2.5).abs() < 0.25, "{a}");
    }
}
