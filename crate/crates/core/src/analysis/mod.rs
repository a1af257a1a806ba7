//! Statistics over spike records: rates, rate histograms, ISI
//! irregularity, synchrony and firing-regime labels.

mod sweep;

use serde::{Deserialize, Serialize};

use crate::sim::{readout_subset, SpikeRecord};
use crate::{Error, Result};

pub use sweep::{
    phase_sweep, run_brunel_cell, write_sweep_csv, CellRun, SweepCell, SweepConfig, SweepGrid,
    DEFAULT_ETA_VALUES, DEFAULT_G_VALUES,
};

/// Analysis interval in ms, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    /// The whole record.
    pub fn full(record: &SpikeRecord) -> Self {
        Self::new(0.0, record.duration)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    fn check(&self, record: &SpikeRecord) -> Result<()> {
        if !(self.start >= 0.0 && self.end > self.start && self.end <= record.duration + 1e-9) {
            return Err(Error::InvalidWindow(format!(
                "[{}, {}) ms on a {} ms record",
                self.start, self.end, record.duration
            )));
        }
        Ok(())
    }

    fn slice<'a>(&self, spikes: &'a [f64]) -> &'a [f64] {
        let a = spikes.partition_point(|&t| t < self.start);
        let b = spikes.partition_point(|&t| t < self.end);
        &spikes[a..b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRate {
    pub population: String,
    /// Mean over recorded members (Hz).
    pub mean: f64,
    pub recorded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub window: Window,
    pub populations: Vec<PopulationRate>,
    /// Rate (Hz) of every recorded neuron, aligned with `neurons`.
    pub rates: Vec<f64>,
    pub neurons: Vec<u32>,
}

impl RateSummary {
    /// Mean over all recorded neurons.
    pub fn overall_mean(&self) -> f64 {
        if self.rates.is_empty() {
            0.0
        } else {
            self.rates.iter().sum::<f64>() / self.rates.len() as f64
        }
    }

    pub fn population(&self, id: &str) -> Option<&PopulationRate> {
        self.populations.iter().find(|p| p.population == id)
    }
}

pub fn mean_rates(record: &SpikeRecord, window: Window) -> Result<RateSummary> {
    window.check(record)?;
    let secs = window.length() / 1000.0;
    let rates: Vec<f64> = record
        .spikes
        .iter()
        .map(|s| window.slice(s).len() as f64 / secs)
        .collect();
    let mut populations = Vec::with_capacity(record.populations.len());
    for p in &record.populations {
        let m = record.members(&p.id)?;
        let n = m.len();
        let sum: f64 = rates[m].iter().sum();
        populations.push(PopulationRate {
            population: p.id.clone(),
            mean: if n == 0 { 0.0 } else { sum / n as f64 },
            recorded: n,
        });
    }
    Ok(RateSummary {
        window,
        populations,
        rates,
        neurons: record.neurons.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub population: String,
    /// `bins + 1` bin edges (Hz).
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// 25th, 50th and 75th percentile of the rates.
    pub quartiles: [f64; 3],
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Histogram of per-neuron rates of one population. When every rate is
/// equal the range is widened to one Hz so all neurons share the first bin.
pub fn rate_distribution(
    record: &SpikeRecord,
    population: &str,
    window: Window,
    bins: usize,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    let summary = mean_rates(record, window)?;
    let m = record.members(population)?;
    let mut rates = summary.rates[m].to_vec();
    rates.sort_by(f64::total_cmp);
    let (min, max) = match (rates.first(), rates.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    let hi = if max > min { max } else { min + 1.0 };
    let width = (hi - min) / bins as f64;
    let edges = (0..=bins).map(|i| min + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &r in &rates {
        let b = (((r - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram {
        population: population.to_string(),
        edges,
        counts,
        quartiles: [
            quantile(&rates, 0.25),
            quantile(&rates, 0.5),
            quantile(&rates, 0.75),
        ],
        min,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    /// CV per recorded neuron; `None` for neurons with fewer than three
    /// spikes in the window.
    pub cv: Vec<Option<f64>>,
    pub excluded: usize,
}

impl CvSummary {
    /// Mean over neurons with a defined CV.
    pub fn mean(&self) -> Option<f64> {
        let v: Vec<f64> = self.cv.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean over a subset of record indices.
    pub fn mean_of(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let v: Vec<f64> = self.cv[range].iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Coefficient of variation of the inter-spike intervals, `sd/mean`, per
/// neuron.
pub fn cv_isi(record: &SpikeRecord, window: Window) -> Result<CvSummary> {
    window.check(record)?;
    let cv: Vec<Option<f64>> = record
        .spikes
        .iter()
        .map(|s| {
            let s = window.slice(s);
            if s.len() < 3 {
                return None;
            }
            let n = (s.len() - 1) as f64;
            let mean = (s[s.len() - 1] - s[0]) / n;
            let var = s.windows(2).map(|w| (w[1] - w[0] - mean).powi(2)).sum::<f64>() / n;
            Some(if mean > 0.0 { var.sqrt() / mean } else { 0.0 })
        })
        .collect();
    let excluded = cv.iter().filter(|c| c.is_none()).count();
    Ok(CvSummary { cv, excluded })
}

/// Variance of the summed binned spike count divided by the sum of the
/// single-neuron count variances. Independent neurons give about 1,
/// neurons firing in lockstep give the number of neurons.
pub fn synchrony(record: &SpikeRecord, window: Window, bin: f64) -> Result<f64> {
    window.check(record)?;
    if record.neurons.len() < 2 {
        return Err(Error::TooFewNeurons);
    }
    if !(bin > 0.0) || window.length() < 10.0 * bin {
        return Err(Error::InvalidWindow(format!(
            "{} ms window holds fewer than 10 bins of {bin} ms",
            window.length()
        )));
    }
    let bins = (window.length() / bin).floor() as usize;
    let end = window.start + bins as f64 * bin;
    let mut total = vec![0u32; bins];
    let mut sum_var = 0.0;
    for s in &record.spikes {
        let s = window.slice(s);
        let mut count = 0u64;
        let mut sq = 0u64;
        let mut run = (usize::MAX, 0u64);
        for &t in s.iter().take_while(|&&t| t < end) {
            let b = (((t - window.start) / bin) as usize).min(bins - 1);
            total[b] += 1;
            count += 1;
            if b == run.0 {
                run.1 += 1;
            } else {
                sq += run.1 * run.1;
                run = (b, 1);
            }
        }
        sq += run.1 * run.1;
        let mean = count as f64 / bins as f64;
        sum_var += sq as f64 / bins as f64 - mean * mean;
    }
    if sum_var <= 0.0 {
        return Ok(0.0);
    }
    let mean = total.iter().map(|&c| c as f64).sum::<f64>() / bins as f64;
    let var = total.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / bins as f64;
    Ok(var / sum_var)
}

/// Firing regime of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// Synchronous regular.
    #[serde(rename = "SR")]
    SynchronousRegular,
    /// Asynchronous irregular.
    #[serde(rename = "AI")]
    AsynchronousIrregular,
    /// Synchronous irregular, fast oscillation.
    #[serde(rename = "SI-fast")]
    SynchronousIrregularFast,
    /// Synchronous irregular, slow oscillation.
    #[serde(rename = "SI-slow")]
    SynchronousIrregularSlow,
    /// Mean rate above what the readout can carry.
    #[serde(rename = "Saturated")]
    Saturated,
    /// Too few spikes for an ISI statistic.
    #[serde(rename = "Quiescent")]
    Quiescent,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::SynchronousRegular => "SR",
            Regime::AsynchronousIrregular => "AI",
            Regime::SynchronousIrregularFast => "SI-fast",
            Regime::SynchronousIrregularSlow => "SI-slow",
            Regime::Saturated => "Saturated",
            Regime::Quiescent => "Quiescent",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Thresholds of [`classify_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeThresholds {
    /// Below this mean CV firing counts as regular.
    pub cv: f64,
    /// At or above this synchrony the network counts as synchronous.
    pub synchrony: f64,
    /// Mean rate (Hz) separating fast from slow synchronous-irregular states.
    pub fast_rate: f64,
    /// Mean rate (Hz) above which the network is saturated.
    pub saturation_rate: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            cv: 0.5,
            synchrony: 2.0,
            fast_rate: 20.0,
            saturation_rate: 250.0,
        }
    }
}

/// Labels a network state from its mean rate (Hz), mean CV and synchrony.
///
/// Regular firing (low CV) is labelled SR whatever the synchrony value,
/// since regular spiking at a common rate is what the synchronous-regular
/// state looks like in a finite recording.
pub fn classify_regime(
    mean_rate: f64,
    mean_cv: Option<f64>,
    synchrony: f64,
    t: &RegimeThresholds,
) -> Regime {
    if mean_rate > t.saturation_rate {
        return Regime::Saturated;
    }
    let Some(cv) = mean_cv else {
        return Regime::Quiescent;
    };
    if cv < t.cv {
        Regime::SynchronousRegular
    } else if synchrony < t.synchrony {
        Regime::AsynchronousIrregular
    } else if mean_rate >= t.fast_rate {
        Regime::SynchronousIrregularFast
    } else {
        Regime::SynchronousIrregularSlow
    }
}

/// Analysis settings shared by the pipeline and the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Start of the analysis window (ms); earlier spikes are onset transient.
    pub warmup: f64,
    /// Bin width of the synchrony measure (ms).
    pub synchrony_bin: f64,
    /// Number of neurons the synchrony measure is computed on. The measure
    /// grows with the neuron count for any fixed pairwise correlation, so a
    /// fixed sample keeps its threshold meaningful across network sizes.
    /// `None` uses every recorded neuron.
    pub synchrony_neurons: Option<usize>,
    /// Seed of the neuron sample.
    pub seed: u64,
    pub histogram_bins: usize,
    pub thresholds: RegimeThresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            warmup: 200.0,
            synchrony_bin: 1.0,
            synchrony_neurons: Some(50),
            seed: 0,
            histogram_bins: 20,
            thresholds: RegimeThresholds::default(),
        }
    }
}

/// Everything the pipeline reports about one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnalysis {
    pub rates: RateSummary,
    pub histograms: Vec<Histogram>,
    pub mean_cv: Option<f64>,
    pub cv_excluded: usize,
    pub synchrony: Option<f64>,
    pub regime: Regime,
}

pub fn analyze_record(record: &SpikeRecord, config: &AnalysisConfig) -> Result<RecordAnalysis> {
    let window = Window::new(config.warmup.min(record.duration), record.duration);
    let window = if window.length() > 0.0 {
        window
    } else {
        Window::full(record)
    };
    let rates = mean_rates(record, window)?;
    let histograms = record
        .populations
        .iter()
        .map(|p| rate_distribution(record, &p.id, window, config.histogram_bins))
        .collect::<Result<Vec<_>>>()?;
    let cv = cv_isi(record, window)?;
    let sample;
    let sync_record = match config.synchrony_neurons {
        Some(m) if m < record.neurons.len() => {
            sample = readout_subset(record, m, config.seed, None)?;
            &sample
        }
        _ => record,
    };
    let sync = match synchrony(sync_record, window, config.synchrony_bin) {
        Ok(s) => Some(s),
        Err(Error::TooFewNeurons | Error::InvalidWindow(_)) => None,
        Err(e) => return Err(e),
    };
    let regime = classify_regime(
        rates.overall_mean(),
        cv.mean(),
        sync.unwrap_or(0.0),
        &config.thresholds,
    );
    Ok(RecordAnalysis {
        mean_cv: cv.mean(),
        cv_excluded: cv.excluded,
        rates,
        histograms,
        synchrony: sync,
        regime,
    })
}

/// Per-neuron rates as CSV: `neuron,population,rate_hz`.
pub fn rates_csv(record: &SpikeRecord, summary: &RateSummary) -> String {
    let mut out = String::from("neuron,population,rate_hz\n");
    for (&n, r) in summary.neurons.iter().zip(&summary.rates) {
        let pop = record.population_of(n).map_or("", |p| p.id.as_str());
        out.push_str(&format!("{n},{pop},{r}\n"));
    }
    out
}

/// Histograms as CSV: `population,bin_low,bin_high,count`.
pub fn histograms_csv(histograms: &[Histogram]) -> String {
    let mut out = String::from("population,bin_low,bin_high,count\n");
    for h in histograms {
        for (i, c) in h.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", h.population, h.edges[i], h.edges[i + 1], c));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PopulationRange;

    pub(crate) fn record(spikes: Vec<Vec<f64>>, duration: f64) -> SpikeRecord {
        let n = spikes.len() as u32;
        SpikeRecord {
            populations: vec![PopulationRange {
                id: "p".into(),
                start: 0,
                end: n,
            }],
            neurons: (0..n).collect(),
            spikes,
            duration,
            dt: 0.1,
            internal_deliveries: 0,
            external_deliveries: 0,
            deliveries: 0,
            wall_time: 0.0,
            config_hash: String::new(),
            traces: Vec::new(),
        }
    }

    #[test]
    fn empty_record_rates_are_zero() {
        let r = record(vec![vec![]; 3], 1000.0);
        let s = mean_rates(&r, Window::full(&r)).unwrap();
        assert!(s.rates.iter().all(|&x| x == 0.0));
        assert_eq!(s.populations[0].mean, 0.0);
    }

    #[test]
    fn ten_spikes_in_one_second() {
        let r = record(vec![(0..10).map(|i| i as f64 * 100.0 + 5.0).collect()], 1000.0);
        let s = mean_rates(&r, Window::full(&r)).unwrap();
        assert_eq!(s.rates[0], 10.0);
    }

    #[test]
    fn invalid_windows() {
        let r = record(vec![vec![]], 1000.0);
        assert!(mean_rates(&r, Window::new(500.0, 500.0)).is_err());
        assert!(mean_rates(&r, Window::new(0.0, 2000.0)).is_err());
    }

    #[test]
    fn identical_rates_single_bin() {
        let r = record(vec![vec![1.0, 2.0]; 5], 1000.0);
        let h = rate_distribution(&r, "p", Window::full(&r), 10).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
        assert!(rate_distribution(&r, "p", Window::full(&r), 0).is_err());
    }

    #[test]
    fn periodic_cv_is_zero() {
        let r = record(
            vec![(0..50).map(|i| i as f64 * 10.0).collect(), vec![1.0, 2.0]],
            1000.0,
        );
        let cv = cv_isi(&r, Window::full(&r)).unwrap();
        assert!(cv.cv[0].unwrap().abs() < 1e-12);
        assert_eq!(cv.cv[1], None);
        assert_eq!(cv.excluded, 1);
    }

    #[test]
    fn lockstep_synchrony_equals_n() {
        let train: Vec<f64> = (0..100).map(|i| i as f64 * 10.0 + 0.5).collect();
        let r = record(vec![train; 20], 1000.0);
        let s = synchrony(&r, Window::full(&r), 1.0).unwrap();
        assert!((s - 20.0).abs() < 1e-9, "{s}");
        let one = record(vec![vec![1.0]], 1000.0);
        assert!(matches!(
            synchrony(&one, Window::full(&one), 1.0),
            Err(Error::TooFewNeurons)
        ));
        assert!(synchrony(&r, Window::new(0.0, 5.0), 1.0).is_err());
    }

    #[test]
    fn regimes() {
        let t = RegimeThresholds::default();
        assert_eq!(classify_regime(10.0, Some(0.1), 15.0, &t), Regime::SynchronousRegular);
        assert_eq!(classify_regime(10.0, Some(1.0), 1.1, &t), Regime::AsynchronousIrregular);
        assert_eq!(classify_regime(50.0, Some(1.0), 5.0, &t), Regime::SynchronousIrregularFast);
        assert_eq!(classify_regime(5.0, Some(1.0), 5.0, &t), Regime::SynchronousIrregularSlow);
        assert_eq!(classify_regime(300.0, Some(0.1), 1.0, &t), Regime::Saturated);
        assert_eq!(classify_regime(0.0, None, 0.0, &t), Regime::Quiescent);
        assert_eq!(
            serde_json::to_string(&Regime::SynchronousIrregularFast).unwrap(),
            "\"SI-fast\""
        );
    }
}
