use serde::{Deserialize, Serialize};

/// Gaussian naive Bayes with per-class priors, means and variances.
///
/// Variances are the maximum-likelihood estimates plus a smoothing term of
/// `1e-9 ×` the largest per-feature variance of the whole training set, so
/// constant features never produce a zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class label (0, 1).
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub const VAR_SMOOTHING: f64 = 1e-9;

fn column_stats(rows: &[&Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in rows {
        var.iter_mut()
            .zip(r.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

impl GaussianNb {
    pub(super) fn fit(rows: &[Vec<f64>], labels: &[u8]) -> Self {
        let d = rows[0].len();
        let all: Vec<&Vec<f64>> = rows.iter().collect();
        let (_, total_var) = column_stats(&all, d);
        let max_var = total_var.iter().copied().fold(0.0, f64::max);
        let epsilon = if max_var > 0.0 {
            VAR_SMOOTHING * max_var
        } else {
            VAR_SMOOTHING
        };

        let stats = [0u8, 1].map(|class| {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == class)
                .map(|(r, _)| r)
                .collect();
            let (mean, mut var) = column_stats(&members, d);
            var.iter_mut().for_each(|v| *v += epsilon);
            (members.len() as f64 / rows.len() as f64, mean, var)
        });
        let [(p0, m0, v0), (p1, m1, v1)] = stats;
        GaussianNb {
            priors: [p0, p1],
            means: [m0, m1],
            variances: [v0, v1],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.means[0].len()
    }

    fn joint_log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        let mut ll = self.priors[class].ln();
        for ((v, m), s) in x.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            ll -= 0.5 * (2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / (2.0 * s);
        }
        ll
    }

    /// `[P(0 | x), P(1 | x)]`.
    pub fn posteriors(&self, x: &[f64]) -> [f64; 2] {
        let l0 = self.joint_log_likelihood(0, x);
        let l1 = self.joint_log_likelihood(1, x);
        let top = l0.max(l1);
        let (e0, e1) = ((l0 - top).exp(), (l1 - top).exp());
        let z = e0 + e1;
        [e0 / z, e1 / z]
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        self.posteriors(x)[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: Gaussian densities written out directly.
    fn oracle(xs: &[f64], labels: &[u8], probe: f64) -> f64 {
        let n = xs.len() as f64;
        let mean_all = xs.iter().sum::<f64>() / n;
        let var_all = xs.iter().map(|x| (x - mean_all).powi(2)).sum::<f64>() / n;
        let eps = if var_all > 0.0 { 1e-9 * var_all } else { 1e-9 };
        let density = |c: u8| {
            let members: Vec<f64> = xs
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| *x)
                .collect();
            let k = members.len() as f64;
            let mu = members.iter().sum::<f64>() / k;
            let var = members.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / k + eps;
            let prior = k / n;
            prior * (-(probe - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let (d0, d1) = (density(0), density(1));
        if d0 + d1 == 0.0 {
            return f64::NAN;
        }
        d1 / (d0 + d1)
    }

    #[test]
    fn unit_pair_prefers_class_one_at_one() {
        let nb = GaussianNb::fit(&[vec![0.0], vec![1.0]], &[0, 1]);
        assert!(nb.proba(&[1.0]) > 0.5);
        assert!(nb.proba(&[0.0]) < 0.5);
    }

    #[test]
    fn symmetric_midpoint_is_one_half() {
        let rows = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let nb = GaussianNb::fit(&rows, &[0, 0, 1, 1]);
        assert!((nb.proba(&[0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_closed_form_on_all_small_1d_datasets() {
        let grid = [0.0, 0.4, 1.0, 1.7, 2.5, 3.1];
        for n in 2..=6 {
            let xs = &grid[..n];
            for mask in 1u32..(1 << n) - 1 {
                let labels: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
                let nb = GaussianNb::fit(&rows, &labels);
                for probe in [0.2, 1.3, 2.0] {
                    let want = oracle(xs, &labels, probe);
                    if want.is_nan() {
                        continue;
                    }
                    let got = nb.proba(&[probe]);
                    assert!(
                        (got - want).abs() < 1e-9,
                        "n={n} mask={mask:b} probe={probe}: {got} vs {want}"
                    );
                }
            }
        }
    }
}
