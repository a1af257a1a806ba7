//! Hardware adaptation as a chain of pure transformations.
//!
//! Each step takes a [`NetworkSpec`], returns the transformed copy and a
//! [`StepRecord`] describing what changed. [`adapt_pipeline`] applies them in
//! a fixed order:
//!
//! 1. [`downscale`] neuron counts and in-degrees,
//! 2. [`scale_weights_linear`] to compensate the lost input,
//! 3. [`substitute_poisson_pool`] or [`replace_input_with_leak_shift`],
//! 4. [`convert_current_to_conductance`],
//! 5. [`clamp_time_constants`],
//! 6. [`apply_parameter_variation`].
//!
//! Weight compensation precedes conductance conversion so that PSP matching
//! targets the compensated weights.

mod steps;

pub use steps::{
    apply_parameter_variation, clamp_time_constants, convert_current_to_conductance,
    default_mean_v, downscale, replace_input_with_leak_shift, scale_weights_linear,
    substitute_poisson_pool, Adapted,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::NetworkSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightCompensation {
    Linear,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSubstitution {
    None,
    PoissonPool {
        pool_size: u32,
        samples_per_target: u32,
    },
    LeakShift,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConductanceConversion {
    pub enabled: bool,
    /// Assumed mean membrane potential per population (mV); populations
    /// without an entry use [`default_mean_v`].
    #[serde(default)]
    pub assumed_mean_v: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub neuron_scale: f64,
    pub indegree_scale: f64,
    pub weight_compensation: WeightCompensation,
    pub input_substitution: InputSubstitution,
    pub conductance_conversion: ConductanceConversion,
    /// Smallest synaptic time constant the substrate supports (ms).
    pub min_tau_syn: f64,
    /// Coefficient of variation per neuron parameter name.
    #[serde(default)]
    pub variation: BTreeMap<String, f64>,
    pub seed: u64,
}

impl AdaptationConfig {
    /// A configuration under which every step is a no-op.
    pub fn identity(seed: u64) -> Self {
        Self {
            neuron_scale: 1.0,
            indegree_scale: 1.0,
            weight_compensation: WeightCompensation::Linear,
            input_substitution: InputSubstitution::None,
            conductance_conversion: ConductanceConversion::default(),
            min_tau_syn: 1e-6,
            variation: BTreeMap::new(),
            seed,
        }
    }

    /// Balanced random network: 12,500 → 2,083 neurons, a shared pool of
    /// 2,083 Poisson sources with 200 samples per neuron.
    pub fn brunel_hardware(seed: u64) -> Self {
        Self {
            neuron_scale: 2083.0 / 12_500.0,
            indegree_scale: BRUNEL_INDEGREE_SCALE,
            weight_compensation: WeightCompensation::Linear,
            input_substitution: InputSubstitution::PoissonPool {
                pool_size: 2083,
                samples_per_target: 200,
            },
            conductance_conversion: ConductanceConversion {
                enabled: true,
                assumed_mean_v: BTreeMap::new(),
            },
            min_tau_syn: 1.0,
            variation: default_variation(),
            seed,
        }
    }

    /// Cortical microcircuit: 77,169 → 7,712 neurons, background input as
    /// an elevated leak potential.
    pub fn microcircuit_hardware(seed: u64) -> Self {
        Self {
            neuron_scale: 7712.0 / 77_169.0,
            indegree_scale: MICROCIRCUIT_INDEGREE_SCALE,
            weight_compensation: WeightCompensation::Linear,
            input_substitution: InputSubstitution::LeakShift,
            conductance_conversion: ConductanceConversion {
                enabled: true,
                assumed_mean_v: BTreeMap::new(),
            },
            min_tau_syn: 1.0,
            variation: default_variation(),
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, s) in [
            ("neuron_scale", self.neuron_scale),
            ("indegree_scale", self.indegree_scale),
        ] {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {s} outside (0, 1]")));
            }
        }
        if !(self.min_tau_syn > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_tau_syn = {} must be positive",
                self.min_tau_syn
            )));
        }
        if let Some((k, v)) = self.variation.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("cv of {k} = {v} is negative")));
        }
        Ok(())
    }
}

/// In-degree factor of the balanced network preset; chosen so the scaled
/// network carries close to 690k internal synapses.
pub const BRUNEL_INDEGREE_SCALE: f64 = 0.2688;

/// In-degree factor of the microcircuit preset; chosen so that about 2.37M
/// internal synapses remain after mapping loss on the default wafer.
pub const MICROCIRCUIT_INDEGREE_SCALE: f64 = 0.086;

fn default_variation() -> BTreeMap<String, f64> {
    [("tau_m", 0.05), ("v_thresh", 0.01), ("tau_syn_exc", 0.05), ("tau_syn_inh", 0.05)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// What one step did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: String,
    pub applied: bool,
    pub neurons_before: usize,
    pub neurons_after: usize,
    pub synapses_before: usize,
    pub synapses_after: usize,
    pub stimulus_edges_before: usize,
    pub stimulus_edges_after: usize,
    /// Weight multipliers keyed by projection or stimulus id.
    #[serde(default)]
    pub weight_factors: BTreeMap<String, f64>,
    /// Populations or parameters that were clamped or substituted.
    #[serde(default)]
    pub clamped: Vec<String>,
    /// Step-specific quantities (resampled probabilities, leak shifts, pool rates).
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

impl StepRecord {
    pub(crate) fn new(step: &str, before: &NetworkSpec) -> Self {
        Self {
            step: step.to_string(),
            applied: true,
            neurons_before: before.total_neurons(),
            neurons_after: before.total_neurons(),
            synapses_before: before.total_synapses(),
            synapses_after: before.total_synapses(),
            stimulus_edges_before: before.stimulus_edges(),
            stimulus_edges_after: before.stimulus_edges(),
            weight_factors: BTreeMap::new(),
            clamped: Vec::new(),
            values: BTreeMap::new(),
            seed: None,
        }
    }

    pub(crate) fn finish(mut self, after: &NetworkSpec) -> Self {
        self.neurons_after = after.total_neurons();
        self.synapses_after = after.total_synapses();
        self.stimulus_edges_after = after.stimulus_edges();
        self
    }

    pub(crate) fn skipped(step: &str, spec: &NetworkSpec) -> Self {
        let mut r = Self::new(step, spec);
        r.applied = false;
        r
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub steps: Vec<StepRecord>,
}

impl AdaptationReport {
    /// True when the after-counts of every step equal the before-counts of the next.
    pub fn counts_chain(&self) -> bool {
        self.steps.windows(2).all(|w| {
            w[0].neurons_after == w[1].neurons_before
                && w[0].synapses_after == w[1].synapses_before
                && w[0].stimulus_edges_after == w[1].stimulus_edges_before
        })
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!(
                "{:<34} {:>3}  neurons {:>7} -> {:<7} synapses {:>9} -> {:<9} stimulus edges {:>8} -> {}\n",
                s.step,
                if s.applied { "on" } else { "off" },
                s.neurons_before,
                s.neurons_after,
                s.synapses_before,
                s.synapses_after,
                s.stimulus_edges_before,
                s.stimulus_edges_after,
            ));
            for (k, v) in &s.values {
                out.push_str(&format!("    {k} = {v:.6}\n"));
            }
            if !s.clamped.is_empty() {
                out.push_str(&format!("    clamped: {}\n", s.clamped.join(", ")));
            }
        }
        out
    }
}

/// Runs all adaptation steps in their fixed order.
pub fn adapt_pipeline(
    spec: &NetworkSpec,
    config: &AdaptationConfig,
) -> Result<(NetworkSpec, AdaptationReport)> {
    config.check()?;
    let mut report = AdaptationReport::default();
    let push = |a: Adapted, report: &mut AdaptationReport| {
        report.steps.push(a.record);
        a.spec
    };

    let mut cur = push(
        downscale(spec, config.neuron_scale, config.indegree_scale, config.seed)?,
        &mut report,
    );

    cur = match config.weight_compensation {
        WeightCompensation::Linear => {
            push(scale_weights_linear(&cur, config.indegree_scale)?, &mut report)
        }
        WeightCompensation::None => {
            report.steps.push(StepRecord::skipped("scale_weights_linear", &cur));
            cur
        }
    };

    cur = match config.input_substitution {
        InputSubstitution::None => {
            report.steps.push(StepRecord::skipped("substitute_inputs", &cur));
            cur
        }
        InputSubstitution::PoissonPool {
            pool_size,
            samples_per_target,
        } => push(
            substitute_poisson_pool(&cur, pool_size, samples_per_target, config.seed)?,
            &mut report,
        ),
        InputSubstitution::LeakShift => push(replace_input_with_leak_shift(&cur)?, &mut report),
    };

    cur = if config.conductance_conversion.enabled {
        push(
            convert_current_to_conductance(&cur, &config.conductance_conversion.assumed_mean_v)?,
            &mut report,
        )
    } else {
        report
            .steps
            .push(StepRecord::skipped("convert_current_to_conductance", &cur));
        cur
    };

    cur = push(clamp_time_constants(&cur, config.min_tau_syn)?, &mut report);
    cur = push(
        apply_parameter_variation(&cur, &config.variation, config.seed)?,
        &mut report,
    );
    Ok((cur, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_brunel, BrunelParams};

    fn small_brunel() -> NetworkSpec {
        let mut s = build_brunel(
            &BrunelParams {
                n_total: 500,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        s.sample().unwrap();
        s
    }

    #[test]
    fn identity_config_is_a_no_op() {
        let spec = small_brunel();
        let (out, report) = adapt_pipeline(&spec, &AdaptationConfig::identity(1)).unwrap();
        assert_eq!(out.content_hash(), spec.content_hash());
        assert_eq!(report.steps.len(), 6);
        assert!(report.counts_chain());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let spec = small_brunel();
        let mut cfg = AdaptationConfig::brunel_hardware(3);
        cfg.neuron_scale = 0.5;
        cfg.indegree_scale = 0.5;
        cfg.input_substitution = InputSubstitution::PoissonPool {
            pool_size: 250,
            samples_per_target: 40,
        };
        let (a, ra) = adapt_pipeline(&spec, &cfg).unwrap();
        let (b, rb) = adapt_pipeline(&spec, &cfg).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(ra, rb);
        assert!(ra.counts_chain());
        assert!(a.is_hardware_ready());
        assert_eq!(a.total_neurons(), 250);
        assert!(crate::network::validate_network(&a).is_empty());
    }

    #[test]
    fn config_checks() {
        let mut cfg = AdaptationConfig::identity(0);
        cfg.neuron_scale = 0.0;
        assert!(cfg.check().is_err());
        let mut cfg = AdaptationConfig::identity(0);
        cfg.min_tau_syn = 0.0;
        assert!(cfg.check().is_err());
        let mut cfg = AdaptationConfig::identity(0);
        cfg.variation.insert("tau_m".into(), -0.1);
        assert!(cfg.check().is_err());
    }

    #[test]
    fn report_text_mentions_every_step() {
        let spec = small_brunel();
        let (_, report) = adapt_pipeline(&spec, &AdaptationConfig::identity(1)).unwrap();
        let text = report.to_text();
        for s in &report.steps {
            assert!(text.contains(&s.step));
        }
    }
}
