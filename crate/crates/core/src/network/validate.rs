use serde::{Deserialize, Serialize};

use super::{NetworkSpec, Sign, StimulusKind, SynapseKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DanglingId { item: String, missing: String },
    SignViolation { projection: String, detail: String },
    NonPositiveDelay { item: String, delay: f64 },
    InvalidParameter { item: String, detail: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks every type invariant of a network description. Problems are
/// reported, never raised.
pub fn validate_network(spec: &NetworkSpec) -> ValidationReport {
    let mut findings = Vec::new();
    let mut invalid = |item: &str, detail: String| {
        findings.push(Finding::InvalidParameter {
            item: item.to_string(),
            detail,
        })
    };

    let conductance_targets: Vec<bool> = spec
        .populations
        .iter()
        .map(|pop| {
            spec.projections
                .iter()
                .any(|p| p.target == pop.id && p.synapse == SynapseKind::ConductanceExp)
                || spec
                    .stimuli
                    .iter()
                    .any(|s| s.target == pop.id && s.synapse == SynapseKind::ConductanceExp)
        })
        .collect();

    for (pop, &cond) in spec.populations.iter().zip(&conductance_targets) {
        if pop.size == 0 {
            invalid(&pop.id, "population is empty".into());
        }
        if let Some(v) = &pop.params_per_neuron {
            if v.len() != pop.size {
                invalid(
                    &pop.id,
                    format!("{} per-neuron overrides for {} neurons", v.len(), pop.size),
                );
            }
            for (i, p) in v.iter().enumerate() {
                for d in p.violations(cond) {
                    invalid(&format!("{}[{i}]", pop.id), d);
                }
            }
        }
        for d in pop.params.violations(cond) {
            invalid(&pop.id, d);
        }
    }

    for proj in &spec.projections {
        let source = spec.populations.iter().find(|p| p.id == proj.source);
        let target = spec.populations.iter().find(|p| p.id == proj.target);
        for (id, found) in [(&proj.source, source.is_some()), (&proj.target, target.is_some())] {
            if !found {
                findings.push(Finding::DanglingId {
                    item: proj.id.clone(),
                    missing: id.clone(),
                });
            }
        }
        if let super::Connector::FixedProbability { p } = proj.connector {
            if !(0.0..=1.0).contains(&p) {
                findings.push(Finding::InvalidParameter {
                    item: proj.id.clone(),
                    detail: format!("probability {p} outside [0, 1]"),
                });
            }
        }

        let mut delays = vec![proj.delay.mean()];
        let mut weights = vec![proj.weight.mean()];
        if let Some(edges) = &proj.edges {
            delays.extend(edges.iter().map(|e| e.delay as f64));
            weights.extend(edges.iter().map(|e| e.weight as f64));
            if let (Some(s), Some(t)) = (source, target) {
                if edges
                    .iter()
                    .any(|e| e.src as usize >= s.size || e.tgt as usize >= t.size)
                {
                    findings.push(Finding::InvalidParameter {
                        item: proj.id.clone(),
                        detail: "edge index out of range".into(),
                    });
                }
            }
        }
        if let Some(&d) = delays.iter().find(|&&d| !(d > 0.0)) {
            findings.push(Finding::NonPositiveDelay {
                item: proj.id.clone(),
                delay: d,
            });
        }

        if let Some(src) = source {
            // inhibition: negative currents, or non-negative conductances
            // paired with the inhibitory reversal potential
            let bad = match (src.sign, proj.synapse) {
                (Sign::Inhibitory, SynapseKind::CurrentExp) => weights.iter().find(|&&w| w > 0.0),
                _ => weights.iter().find(|&&w| w < 0.0),
            };
            if let Some(&w) = bad {
                findings.push(Finding::SignViolation {
                    projection: proj.id.clone(),
                    detail: format!(
                        "{:?} source with {:?} weight {w}",
                        src.sign, proj.synapse
                    ),
                });
            }
        }
    }

    for stim in &spec.stimuli {
        if !spec.populations.iter().any(|p| p.id == stim.target) {
            findings.push(Finding::DanglingId {
                item: stim.id.clone(),
                missing: stim.target.clone(),
            });
        }
        match stim.kind {
            StimulusKind::PoissonPerNeuron { rate, weight, .. } => {
                if !(rate >= 0.0) || weight < 0.0 {
                    findings.push(Finding::InvalidParameter {
                        item: stim.id.clone(),
                        detail: format!("rate {rate} and weight {weight} must be non-negative"),
                    });
                }
            }
            StimulusKind::PoissonPool {
                pool: _,
                pool_size,
                samples_per_target,
                rate,
                weight,
                delay,
            } => {
                if !(rate >= 0.0) || samples_per_target > pool_size || weight < 0.0 {
                    findings.push(Finding::InvalidParameter {
                        item: stim.id.clone(),
                        detail: format!(
                            "rate {rate}, {samples_per_target} samples from a pool of {pool_size}"
                        ),
                    });
                }
                if !(delay > 0.0) {
                    findings.push(Finding::NonPositiveDelay {
                        item: stim.id.clone(),
                        delay,
                    });
                }
            }
            StimulusKind::LeakShift { .. } => {}
        }
    }

    ValidationReport { findings }
}
