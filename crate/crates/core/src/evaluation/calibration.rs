use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{self, DEFAULT_SEED};

use super::platt::PlattScaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Equal-count bins by rank; tied probabilities share a bin.
    Quantile,
    /// Equal-width bins over [0, 1].
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub observed: f64,
    pub count: usize,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bins: Vec<CalibrationBin>,
    pub n_bootstrap: usize,
    pub binning: Binning,
    pub recalibration: Option<PlattScaling>,
}

impl CalibrationReport {
    /// `series, bin, mean_predicted, observed, count, ci_low, ci_high`.
    pub fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>, series: &str) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (b, bin) in self.bins.iter().enumerate() {
            w.write_record([
                series.to_string(),
                b.to_string(),
                bin.mean_predicted.to_string(),
                bin.observed.to_string(),
                bin.count.to_string(),
                opt(bin.ci_low),
                opt(bin.ci_high),
            ])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    pub n_bins: usize,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub binning: Binning,
    pub exec: Execution,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            n_bins: 10,
            n_bootstrap: 10_000,
            seed: DEFAULT_SEED,
            binning: Binning::Quantile,
            exec: Execution::default(),
        }
    }
}

/// Bin index per row, renumbered so that empty bins are dropped.
fn assign_bins(probs: &[f64], n_bins: usize, binning: Binning) -> (Vec<usize>, usize) {
    let n = probs.len();
    let mut raw = vec![0usize; n];
    match binning {
        Binning::Quantile => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(a.cmp(&b)));
            let mut rank = 0;
            while rank < n {
                // a run of tied probabilities goes to the bin of its first rank
                let bin = rank * n_bins / n;
                let v = probs[order[rank]];
                while rank < n && probs[order[rank]] == v {
                    raw[order[rank]] = bin;
                    rank += 1;
                }
            }
        }
        Binning::Uniform => {
            for (r, &p) in raw.iter_mut().zip(probs) {
                *r = ((p * n_bins as f64) as usize).min(n_bins - 1);
            }
        }
    }
    let mut used = vec![false; n_bins];
    raw.iter().for_each(|&b| used[b] = true);
    let mut remap = vec![0; n_bins];
    let mut k = 0;
    for b in 0..n_bins {
        if used[b] {
            remap[b] = k;
            k += 1;
        }
    }
    (raw.into_iter().map(|b| remap[b]).collect(), k)
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Reliability curve with percentile bootstrap intervals on the observed
/// rate of every bin. Bin membership is fixed; each resample draws rows
/// with replacement from its own substream.
pub fn calibration_curve(y: &[u8], probs: &[f64], opts: &CalibrationOptions) -> Result<CalibrationReport> {
    let n = y.len();
    if probs.len() != n || n == 0 {
        return Err(Error::Shape(
            "labels and probabilities must be nonempty and equal length".into(),
        ));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
    }
    if opts.n_bins == 0 || opts.n_bins > n {
        return Err(Error::Binning(format!("{} bins for {} rows", opts.n_bins, n)));
    }
    let (bin_of, k) = assign_bins(probs, opts.n_bins, opts.binning);

    let mut count = vec![0usize; k];
    let mut events = vec![0usize; k];
    let mut psum = vec![0.0; k];
    for i in 0..n {
        count[bin_of[i]] += 1;
        events[bin_of[i]] += usize::from(y[i] == 1);
        psum[bin_of[i]] += probs[i];
    }
    let observed: Vec<f64> = (0..k).map(|b| events[b] as f64 / count[b] as f64).collect();

    let mut bins: Vec<CalibrationBin> = (0..k)
        .map(|b| CalibrationBin {
            mean_predicted: psum[b] / count[b] as f64,
            observed: observed[b],
            count: count[b],
            ci_low: None,
            ci_high: None,
        })
        .collect();

    if opts.n_bootstrap > 0 {
        let rates: Vec<Vec<Option<f64>>> = opts.exec.map(opts.n_bootstrap, |r| {
            let mut rng = rng::task_stream(opts.seed, "calibration_bootstrap", r as u64);
            let mut c = vec![0u32; k];
            let mut e = vec![0u32; k];
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                c[bin_of[i]] += 1;
                e[bin_of[i]] += u32::from(y[i] == 1);
            }
            (0..k)
                .map(|b| (c[b] > 0).then(|| f64::from(e[b]) / f64::from(c[b])))
                .collect()
        });
        for (b, bin) in bins.iter_mut().enumerate() {
            let mut draws: Vec<f64> = rates.iter().filter_map(|r| r[b]).collect();
            if draws.is_empty() {
                continue;
            }
            draws.sort_by(f64::total_cmp);
            // the percentile band can miss the point estimate for very
            // skewed bins; widen it so the band always contains it
            bin.ci_low = Some(percentile(&draws, 0.025).min(bin.observed));
            bin.ci_high = Some(percentile(&draws, 0.975).max(bin.observed));
        }
    }
    Ok(CalibrationReport {
        bins,
        n_bootstrap: opts.n_bootstrap,
        binning: opts.binning,
        recalibration: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_extremes_give_two_corner_bins() {
        let y = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0];
        let p: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let opts = CalibrationOptions {
            n_bootstrap: 0,
            ..CalibrationOptions::default()
        };
        let r = calibration_curve(&y, &p, &opts).unwrap();
        assert_eq!(r.bins.len(), 2);
        assert_eq!((r.bins[0].mean_predicted, r.bins[0].observed), (0.0, 0.0));
        assert_eq!((r.bins[1].mean_predicted, r.bins[1].observed), (1.0, 1.0));
        assert!(r.bins.iter().all(|b| b.ci_low.is_none()));
        assert_eq!(r.bins.iter().map(|b| b.count).sum::<usize>(), 12);
    }

    #[test]
    fn bootstrap_is_reproducible_and_brackets_observed() {
        let y: Vec<u8> = (0..200).map(|i| u8::from(i % 3 == 0)).collect();
        let p: Vec<f64> = (0..200).map(|i| (i % 17) as f64 / 17.0).collect();
        let opts = CalibrationOptions {
            n_bootstrap: 300,
            exec: Execution::Sequential,
            ..CalibrationOptions::default()
        };
        let a = calibration_curve(&y, &p, &opts).unwrap();
        let b = calibration_curve(
            &y,
            &p,
            &CalibrationOptions {
                exec: Execution::Parallel,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(a, b);
        for bin in &a.bins {
            assert!(bin.ci_low.unwrap() <= bin.observed && bin.observed <= bin.ci_high.unwrap());
        }
    }

    #[test]
    fn too_many_bins() {
        assert!(matches!(
            calibration_curve(&[0, 1], &[0.1, 0.2], &CalibrationOptions::default()),
            Err(Error::Binning(_))
        ));
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 1.0, 2.0, 3.0], 0.5), 1.5);
    }
}
