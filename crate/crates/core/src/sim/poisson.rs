use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::stream;
use crate::{Error, Result};

/// Spike probability per step above which Bernoulli thinning is reported
/// as inaccurate.
pub const THINNING_WARN: f64 = 0.1;

/// Per-step spike probability of a `rate` Hz source, checked for
/// validity.
pub fn step_probability(rate: f64, dt: f64) -> Result<f64> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("rate {rate} Hz")));
    }
    let p = rate * dt / 1000.0;
    if p > 1.0 {
        return Err(Error::RateTooHigh { rate, prob: p });
    }
    if p > THINNING_WARN {
        log::warn!("rate {rate} Hz gives spike probability {p:.3} per step; thinning is inaccurate");
    }
    Ok(p)
}

/// Number of steps until the next spike of a per-step Bernoulli process
/// (at least one). Equivalent to drawing every step, but skips the misses.
pub(crate) fn geometric_gap<R: Rng>(p: f64, rng: &mut R) -> u64 {
    if p <= 0.0 {
        return u64::MAX;
    }
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let k = (u.ln() / (-p).ln_1p()).floor();
    if k >= (u64::MAX / 2) as f64 {
        u64::MAX
    } else {
        k as u64 + 1
    }
}

/// Poisson spike train (ms) over `[0, duration)` with exponential gaps.
pub fn poisson_source(rate: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("rate {rate} Hz")));
    }
    if rate == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = stream(seed, "poisson_source", 0);
    let gaps = Exp::new(rate / 1000.0).expect("positive rate");
    let mut out = Vec::with_capacity((rate * duration / 1000.0 * 1.1) as usize + 16);
    let mut t = gaps.sample(&mut rng);
    while t < duration {
        out.push(t);
        t += gaps.sample(&mut rng);
    }
    Ok(out)
}

/// Poisson spike train on the step grid: each step of length `dt` holds a
/// spike with probability `rate·dt`. Spike times are step starts.
pub fn poisson_source_thinned(rate: f64, duration: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}")));
    }
    let p = step_probability(rate, dt)?;
    let steps = (duration / dt).round() as u64;
    let mut rng = stream(seed, "poisson_source_thinned", 0);
    let mut out = Vec::new();
    let mut n = geometric_gap(p, &mut rng) - 1;
    while n < steps {
        out.push(n as f64 * dt);
        n = n.saturating_add(geometric_gap(p, &mut rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        assert!(poisson_source(0.0, 1000.0, 1).unwrap().is_empty());
        assert!(poisson_source_thinned(0.0, 1000.0, 0.1, 1).unwrap().is_empty());
    }

    #[test]
    fn rate_limits() {
        assert!(matches!(
            poisson_source_thinned(20_000.0, 10.0, 0.1, 0),
            Err(Error::RateTooHigh { .. })
        ));
        assert!(poisson_source(-1.0, 10.0, 0).is_err());
        // p = 0.2: allowed with a warning
        assert!(poisson_source_thinned(2000.0, 10.0, 0.1, 0).is_ok());
    }

    #[test]
    fn thinned_count() {
        // 50 Hz for 100 s: 5000 expected, σ = √5000
        let n = poisson_source_thinned(50.0, 100_000.0, 0.1, 3).unwrap().len() as f64;
        assert!((n - 5000.0).abs() < 3.0 * 5000f64.sqrt(), "{n}");
    }

    #[test]
    fn certain_spike_every_step() {
        let t = poisson_source_thinned(10_000.0, 1.0, 0.1, 0).unwrap();
        assert_eq!(t.len(), 10);
    }
}
