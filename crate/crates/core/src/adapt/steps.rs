use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use super::StepRecord;
use crate::models::scale_count;
use crate::network::{
    sample_pool_edges, Connector, NetworkSpec, NeuronParameters, Sign, StimulusKind,
    SynapseKind, MIN_DELAY, PARAMETER_NAMES,
};
use crate::psp::current_psp_peak;
use crate::rng::StreamFamily;
use crate::{Error, Result};

/// Output of one adaptation step.
#[derive(Debug, Clone)]
pub struct Adapted {
    pub spec: NetworkSpec,
    pub record: StepRecord,
}

/// Default assumed mean membrane potential: halfway between threshold and
/// the lower of rest and reset. Taking the lower value keeps the estimate
/// subthreshold for populations whose leak potential was raised above
/// threshold by a leak-shift drive.
pub fn default_mean_v(p: &NeuronParameters) -> f64 {
    0.5 * (p.v_rest.min(p.v_reset) + p.v_thresh)
}

/// Shrinks every population by `neuron_scale` and resamples probabilistic
/// projections so that in-degrees shrink by `indegree_scale`.
///
/// Fixed-probability connectors get `p·indegree_scale/neuron_scale`; fixed
/// in-degrees and per-neuron Poisson in-degrees are multiplied by
/// `indegree_scale`. Scales of exactly one leave the network untouched.
pub fn downscale(
    spec: &NetworkSpec,
    neuron_scale: f64,
    indegree_scale: f64,
    seed: u64,
) -> Result<Adapted> {
    let mut record = StepRecord::new("downscale", spec);
    for s in [neuron_scale, indegree_scale] {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidParameter(format!("scale {s} outside (0, 1]")));
        }
    }
    if neuron_scale == 1.0 && indegree_scale == 1.0 {
        record.applied = false;
        return Ok(Adapted {
            spec: spec.clone(),
            record,
        });
    }
    let mut out = spec.clone();
    for pop in &mut out.populations {
        let size = scale_count(pop.size, neuron_scale);
        if size == 0 {
            return Err(Error::DegenerateScale(pop.id.clone()));
        }
        pop.size = size;
        if let Some(v) = &mut pop.params_per_neuron {
            v.truncate(size);
        }
    }
    let sizes: BTreeMap<String, usize> = out
        .populations
        .iter()
        .map(|p| (p.id.clone(), p.size))
        .collect();
    for proj in &mut out.projections {
        match &mut proj.connector {
            Connector::FixedProbability { p } => {
                let scaled = *p * indegree_scale / neuron_scale;
                if scaled > 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "projection `{}` needs connection probability {scaled} > 1",
                        proj.id
                    )));
                }
                *p = scaled;
                record.values.insert(format!("p[{}]", proj.id), scaled);
                proj.edges = None;
            }
            Connector::FixedInDegree { k } => {
                *k = scale_count(*k, indegree_scale);
                record.values.insert(format!("k[{}]", proj.id), *k as f64);
                proj.edges = None;
            }
            Connector::ExplicitList => {
                let (ns, nt) = (sizes[&proj.source] as u32, sizes[&proj.target] as u32);
                if let Some(edges) = &mut proj.edges {
                    edges.retain(|e| e.src < ns && e.tgt < nt);
                }
            }
        }
    }
    for stim in &mut out.stimuli {
        if let StimulusKind::PoissonPerNeuron { in_degree, .. } = &mut stim.kind {
            *in_degree = scale_count(*in_degree as usize, indegree_scale) as u32;
            record
                .values
                .insert(format!("k_ext[{}]", stim.id), *in_degree as f64);
        }
        stim.edges = None;
    }
    out.seed = seed;
    out.sample()?;
    record.seed = Some(seed);
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

/// Multiplies internal weights, and the weights of per-neuron Poisson
/// inputs whose in-degree was scaled, by `1/indegree_scale`.
pub fn scale_weights_linear(spec: &NetworkSpec, indegree_scale: f64) -> Result<Adapted> {
    if !(indegree_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "indegree_scale {indegree_scale} must be positive"
        )));
    }
    let mut record = StepRecord::new("scale_weights_linear", spec);
    let factor = 1.0 / indegree_scale;
    let mut out = spec.clone();
    if factor == 1.0 {
        record.applied = false;
        return Ok(Adapted { spec: out, record });
    }
    for proj in &mut out.projections {
        scale_projection(proj, factor);
        record.weight_factors.insert(proj.id.clone(), factor);
    }
    for stim in &mut out.stimuli {
        if let StimulusKind::PoissonPerNeuron { weight, .. } = &mut stim.kind {
            *weight *= factor;
            record.weight_factors.insert(stim.id.clone(), factor);
        }
    }
    record.values.insert("factor".into(), factor);
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

/// Replaces independent per-neuron Poisson inputs by one shared pool of
/// `pool_size` sources. Every target neuron connects to
/// `samples_per_target` distinct pool sources; the source rate is chosen so
/// the mean external input per neuron is unchanged.
pub fn substitute_poisson_pool(
    spec: &NetworkSpec,
    pool_size: u32,
    samples_per_target: u32,
    seed: u64,
) -> Result<Adapted> {
    if samples_per_target > pool_size {
        return Err(Error::PoolTooSmall {
            samples: samples_per_target,
            pool: pool_size,
        });
    }
    let mut record = StepRecord::new("substitute_poisson_pool", spec);
    let mut out = spec.clone();
    let pool = out
        .stimuli
        .iter()
        .filter_map(|s| match s.kind {
            StimulusKind::PoissonPool { pool, .. } => Some(pool + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    // the first stimulus fixes the source rate; later ones adapt their weight
    let mut pool_rate: Option<f64> = None;
    for k in 0..out.stimuli.len() {
        let StimulusKind::PoissonPerNeuron {
            rate,
            in_degree,
            weight,
        } = out.stimuli[k].kind
        else {
            continue;
        };
        let flux = rate * in_degree as f64;
        let source_rate = *pool_rate.get_or_insert(if samples_per_target == 0 {
            0.0
        } else {
            flux / samples_per_target as f64
        });
        let pool_weight = if source_rate > 0.0 && samples_per_target > 0 {
            weight * flux / (samples_per_target as f64 * source_rate)
        } else {
            weight
        };
        let stim = &mut out.stimuli[k];
        stim.kind = StimulusKind::PoissonPool {
            pool,
            pool_size,
            samples_per_target,
            rate: source_rate,
            weight: pool_weight,
            delay: MIN_DELAY,
        };
        let nt = spec.population(&stim.target)?.size;
        stim.edges = Some(sample_pool_edges(stim, nt, seed)?);
        record.clamped.push(stim.id.clone());
        record
            .values
            .insert(format!("flux_per_neuron[{}]", stim.id), flux);
        record
            .weight_factors
            .insert(stim.id.clone(), if weight == 0.0 { 1.0 } else { pool_weight / weight });
    }
    match pool_rate {
        Some(r) => {
            record.values.insert("pool_rate".into(), r);
            record.values.insert("pool_size".into(), pool_size as f64);
            record
                .values
                .insert("samples_per_target".into(), samples_per_target as f64);
            record.seed = Some(seed);
        }
        None => record.applied = false,
    }
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

/// Removes current-based per-neuron Poisson inputs and raises the leak
/// potential of their targets by the mean shift they caused:
/// `ΔV = K·ν·w·τs·R`.
pub fn replace_input_with_leak_shift(spec: &NetworkSpec) -> Result<Adapted> {
    let mut record = StepRecord::new("replace_input_with_leak_shift", spec);
    let mut out = spec.clone();
    let mut shifts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut keep = Vec::with_capacity(out.stimuli.len());
    for stim in std::mem::take(&mut out.stimuli) {
        let StimulusKind::PoissonPerNeuron {
            rate,
            in_degree,
            weight,
        } = stim.kind
        else {
            keep.push(stim);
            continue;
        };
        if stim.synapse != SynapseKind::CurrentExp {
            return Err(Error::Unsupported(format!(
                "leak-shift substitution of conductance-based stimulus `{}`; substitute inputs before conversion",
                stim.id
            )));
        }
        let pi = spec.population_index(&stim.target)?;
        let pop = &mut out.populations[pi];
        let shift_of = |p: &NeuronParameters| {
            in_degree as f64 * rate / 1000.0 * weight * p.tau_syn_exc * p.r_m()
        };
        let nominal = shift_of(&pop.params);
        pop.map_params(|p| p.v_rest += shift_of(p));
        *shifts.entry(pi).or_default() += nominal;
        record.clamped.push(stim.id.clone());
    }
    out.stimuli = keep;
    for (pi, dv) in shifts {
        record
            .values
            .insert(format!("delta_v[{}]", spec.populations[pi].id), dv);
    }
    record.applied = !record.clamped.is_empty();
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

/// Converts current weights to conductances, `w_g = w_I / (E_rev − V̄)`,
/// so that PSPs starting at the assumed mean potential `V̄` keep their
/// amplitude. Inhibitory currents are negative and so is their driving
/// force, hence all conductances come out non-negative.
pub fn convert_current_to_conductance(
    spec: &NetworkSpec,
    assumed_mean_v: &BTreeMap<String, f64>,
) -> Result<Adapted> {
    let mut record = StepRecord::new("convert_current_to_conductance", spec);
    if let Some(p) = spec
        .projections
        .iter()
        .find(|p| p.synapse != SynapseKind::CurrentExp)
    {
        return Err(Error::Unsupported(format!(
            "projection `{}` is already conductance based",
            p.id
        )));
    }
    if let Some(s) = spec.stimuli.iter().find(|s| {
        s.synapse != SynapseKind::CurrentExp && !matches!(s.kind, StimulusKind::LeakShift { .. })
    }) {
        return Err(Error::Unsupported(format!(
            "stimulus `{}` is already conductance based",
            s.id
        )));
    }
    let mean_v = |id: &str| -> Result<(f64, NeuronParameters)> {
        let pop = spec.population(id)?;
        let v = assumed_mean_v
            .get(id)
            .copied()
            .unwrap_or_else(|| default_mean_v(&pop.params));
        Ok((v, pop.params))
    };
    for (id, pop) in spec.populations.iter().map(|p| (&p.id, p)) {
        let (v, _) = mean_v(id)?;
        record.values.insert(format!("assumed_mean_v[{}]", pop.id), v);
    }

    let mut out = spec.clone();
    for proj in &mut out.projections {
        let sign = spec.population(&proj.source)?.sign;
        let (v, params) = mean_v(&proj.target)?;
        let drive = params.e_rev(sign) - v;
        if drive.abs() < 1e-9 {
            return Err(Error::SingularDrivingForce(proj.id.clone()));
        }
        scale_projection(proj, 1.0 / drive);
        proj.synapse = SynapseKind::ConductanceExp;
        record.weight_factors.insert(proj.id.clone(), 1.0 / drive);
    }
    for stim in &mut out.stimuli {
        let (v, params) = mean_v(&stim.target)?;
        let drive = params.e_rev_exc - v;
        match &mut stim.kind {
            StimulusKind::LeakShift { .. } => {}
            StimulusKind::PoissonPerNeuron { weight, .. }
            | StimulusKind::PoissonPool { weight, .. } => {
                if drive.abs() < 1e-9 {
                    return Err(Error::SingularDrivingForce(stim.id.clone()));
                }
                *weight /= drive;
                if let Some(edges) = &mut stim.edges {
                    for e in edges {
                        e.weight = (e.weight as f64 / drive) as f32;
                    }
                }
                record.weight_factors.insert(stim.id.clone(), 1.0 / drive);
            }
        }
        stim.synapse = SynapseKind::ConductanceExp;
    }
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

/// Raises synaptic time constants below `min_tau_syn` to that bound and
/// rescales the affected weights so the PSP peak stays the same.
pub fn clamp_time_constants(spec: &NetworkSpec, min_tau_syn: f64) -> Result<Adapted> {
    if !(min_tau_syn > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "min_tau_syn = {min_tau_syn} must be positive"
        )));
    }
    let mut record = StepRecord::new("clamp_time_constants", spec);
    let mut out = spec.clone();
    // (population, receptor) -> weight factor
    let mut factors: BTreeMap<(String, Sign), f64> = BTreeMap::new();
    for pop in &mut out.populations {
        let nominal = pop.params;
        for sign in [Sign::Excitatory, Sign::Inhibitory] {
            let tau = nominal.tau_syn(sign);
            if tau < min_tau_syn {
                let f = current_psp_peak(1.0, nominal.tau_m, tau, nominal.c_m)
                    / current_psp_peak(1.0, nominal.tau_m, min_tau_syn, nominal.c_m);
                factors.insert((pop.id.clone(), sign), f);
                record.clamped.push(format!("{}.{}", pop.id, receptor_name(sign)));
                record
                    .values
                    .insert(format!("factor[{}.{}]", pop.id, receptor_name(sign)), f);
            }
        }
        pop.map_params(|p| {
            p.tau_syn_exc = p.tau_syn_exc.max(min_tau_syn);
            p.tau_syn_inh = p.tau_syn_inh.max(min_tau_syn);
        });
    }
    if factors.is_empty() {
        record.applied = false;
        return Ok(Adapted { spec: out, record });
    }
    for proj in &mut out.projections {
        let sign = spec.population(&proj.source)?.sign;
        if let Some(&f) = factors.get(&(proj.target.clone(), sign)) {
            scale_projection(proj, f);
            record.weight_factors.insert(proj.id.clone(), f);
        }
    }
    for stim in &mut out.stimuli {
        let Some(&f) = factors.get(&(stim.target.clone(), Sign::Excitatory)) else {
            continue;
        };
        match &mut stim.kind {
            StimulusKind::LeakShift { .. } => continue,
            StimulusKind::PoissonPerNeuron { weight, .. }
            | StimulusKind::PoissonPool { weight, .. } => *weight *= f,
        }
        if let Some(edges) = &mut stim.edges {
            for e in edges {
                e.weight = (e.weight as f64 * f) as f32;
            }
        }
        record.weight_factors.insert(stim.id.clone(), f);
    }
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

/// Draws per-neuron parameters from `Normal(nominal, cv·|nominal|)`.
/// Draws that violate a parameter invariant are redrawn (up to 100 times).
pub fn apply_parameter_variation(
    spec: &NetworkSpec,
    cv_map: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<Adapted> {
    let mut record = StepRecord::new("apply_parameter_variation", spec);
    for (name, &cv) in cv_map {
        if !PARAMETER_NAMES.contains(&name.as_str()) {
            return Err(Error::InvalidParameter(format!("unknown neuron parameter `{name}`")));
        }
        if !(cv >= 0.0) {
            return Err(Error::InvalidParameter(format!("cv of {name} = {cv} is negative")));
        }
    }
    let mut out = spec.clone();
    if cv_map.is_empty() {
        record.applied = false;
        return Ok(Adapted { spec: out, record });
    }
    for pop in &mut out.populations {
        let conductance = spec.projections.iter().any(|p| {
            p.target == pop.id && p.synapse == SynapseKind::ConductanceExp
        }) || spec
            .stimuli
            .iter()
            .any(|s| s.target == pop.id && s.synapse == SynapseKind::ConductanceExp);
        let family = StreamFamily::new(seed, &format!("variation/{}", pop.id));
        let mut varied = Vec::with_capacity(pop.size);
        for i in 0..pop.size {
            let nominal = *pop.neuron_params(i);
            let mut rng = family.stream(i as u64);
            let mut accepted = None;
            for _ in 0..100 {
                let mut p = nominal;
                for (name, &cv) in cv_map {
                    let mean = nominal.get(name).expect("checked name");
                    let sd = cv * mean.abs();
                    if sd > 0.0 {
                        let v = Normal::new(mean, sd)
                            .expect("finite sd")
                            .sample(&mut rng);
                        p.set(name, v);
                    }
                }
                if p.violations(conductance).is_empty() {
                    accepted = Some(p);
                    break;
                }
            }
            varied.push(accepted.ok_or_else(|| Error::VariationExhausted(pop.id.clone()))?);
        }
        pop.params_per_neuron = Some(varied);
    }
    for (name, cv) in cv_map {
        record.values.insert(format!("cv[{name}]"), *cv);
    }
    record.seed = Some(seed);
    let record = record.finish(&out);
    Ok(Adapted { spec: out, record })
}

fn scale_projection(proj: &mut crate::network::Projection, factor: f64) {
    proj.weight = proj.weight.scaled(factor);
    if let Some(edges) = &mut proj.edges {
        for e in edges {
            e.weight = (e.weight as f64 * factor) as f32;
        }
    }
}

fn receptor_name(sign: Sign) -> &'static str {
    match sign {
        Sign::Excitatory => "exc",
        Sign::Inhibitory => "inh",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_brunel, BrunelParams};
    use crate::network::in_degree_stats;

    fn brunel(n: usize) -> NetworkSpec {
        let mut s = build_brunel(
            &BrunelParams {
                n_total: n,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        s.sample().unwrap();
        s
    }

    #[test]
    fn downscale_identity() {
        let spec = brunel(400);
        let a = downscale(&spec, 1.0, 1.0, 9).unwrap();
        assert_eq!(a.spec, spec);
        assert!(!a.record.applied);
    }

    #[test]
    fn downscale_expected_in_degree() {
        // oracle: original in-degree 0.1·1000 = 100 halves to 50; each of the
        // 500 remaining targets draws from 500 sources with p' = 0.1
        let mut spec = NetworkSpec::new(0);
        spec.populations.push(crate::network::Population::new(
            "a",
            1000,
            Sign::Excitatory,
            crate::models::brunel_neuron(),
        ));
        spec.projections.push(crate::network::Projection {
            id: "a->b".into(),
            source: "a".into(),
            target: "b".into(),
            connector: Connector::FixedProbability { p: 0.1 },
            weight: crate::network::Value::constant(0.1),
            delay: crate::network::Value::constant(1.0),
            synapse: SynapseKind::CurrentExp,
            edges: None,
        });
        spec.populations.push(crate::network::Population::new(
            "b",
            1000,
            Sign::Excitatory,
            crate::models::brunel_neuron(),
        ));
        let mut means = Vec::new();
        for seed in 0..10 {
            let a = downscale(&spec, 0.5, 0.5, seed).unwrap();
            let stats = in_degree_stats(&a.spec).unwrap();
            means.push(stats[1].mean);
            assert_eq!(a.record.values["p[a->b]"], 0.1);
        }
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        // binomial sd of the mean in-degree over 500 targets and 10 seeds
        let sd = (500.0f64 * 0.1 * 0.9 / 5000.0).sqrt();
        assert!((avg - 50.0).abs() < 3.0 * sd, "{avg}");
    }

    #[test]
    fn downscale_degenerate() {
        let spec = brunel(10);
        assert!(matches!(
            downscale(&spec, 0.01, 0.5, 0),
            Err(Error::DegenerateScale(_))
        ));
    }

    #[test]
    fn linear_weights() {
        let spec = brunel(200);
        let a = scale_weights_linear(&spec, 1.0).unwrap();
        assert_eq!(a.spec, spec);
        let mut spec = spec;
        for e in spec.projections[0].edges.as_mut().unwrap() {
            e.weight = 0.1;
        }
        let a = scale_weights_linear(&spec, 0.25).unwrap();
        for e in a.spec.projections[0].edges.as_ref().unwrap() {
            assert!((e.weight - 0.4).abs() < 1e-6);
        }
        assert!(scale_weights_linear(&spec, 0.0).is_err());
    }

    #[test]
    fn pool_substitution_counts_and_rate() {
        let spec = brunel(500);
        let a = substitute_poisson_pool(&spec, 500, 40, 3).unwrap();
        assert_eq!(a.spec.stimulus_edges(), 500 * 40);
        let StimulusKind::PoissonPool { rate, .. } = a.spec.stimuli[0].kind else { panic!() };
        let StimulusKind::PoissonPerNeuron { rate: r0, in_degree, .. } = spec.stimuli[0].kind
        else {
            panic!()
        };
        assert!((rate * 40.0 - r0 * in_degree as f64).abs() < 1e-9);
        assert!(matches!(
            substitute_poisson_pool(&spec, 10, 11, 3),
            Err(Error::PoolTooSmall { .. })
        ));
        let none = substitute_poisson_pool(&spec, 500, 0, 3).unwrap();
        assert_eq!(none.spec.stimulus_edges(), 0);
    }

    #[test]
    fn leak_shift_zero_in_degree() {
        let mut spec = brunel(100);
        for s in &mut spec.stimuli {
            if let StimulusKind::PoissonPerNeuron { in_degree, .. } = &mut s.kind {
                *in_degree = 0;
            }
        }
        let a = replace_input_with_leak_shift(&spec).unwrap();
        assert!(a.spec.stimuli.is_empty());
        assert_eq!(a.spec.populations, spec.populations);
        assert_eq!(a.record.values["delta_v[E]"], 0.0);
    }

    #[test]
    fn leak_shift_rejects_conductance_stimuli() {
        let mut spec = brunel(100);
        spec.stimuli[0].synapse = SynapseKind::ConductanceExp;
        assert!(matches!(
            replace_input_with_leak_shift(&spec),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn conductance_singular_drive() {
        let spec = brunel(100);
        let mut mean = BTreeMap::new();
        mean.insert("E".to_string(), 0.0);
        assert!(matches!(
            convert_current_to_conductance(&spec, &mean),
            Err(Error::SingularDrivingForce(_))
        ));
    }

    #[test]
    fn conductance_weights_are_non_negative() {
        let spec = brunel(200);
        let a = convert_current_to_conductance(&spec, &BTreeMap::new()).unwrap();
        assert!(a.spec.is_hardware_ready());
        for p in &a.spec.projections {
            assert!(p.edges.as_ref().unwrap().iter().all(|e| e.weight >= 0.0));
        }
        assert!(crate::network::validate_network(&a.spec).is_empty());
        // converting twice is rejected
        assert!(convert_current_to_conductance(&a.spec, &BTreeMap::new()).is_err());
    }

    #[test]
    fn clamp_boundaries() {
        let spec = brunel(100);
        let a = clamp_time_constants(&spec, 0.5).unwrap();
        assert!(!a.record.applied);
        assert_eq!(a.spec, spec);
        let a = clamp_time_constants(&spec, 0.2).unwrap();
        assert_eq!(a.spec, spec);
        let a = clamp_time_constants(&spec, 1.0).unwrap();
        assert!(a.record.applied);
        assert_eq!(a.spec.populations[0].params.tau_syn_exc, 1.0);
        assert_eq!(a.record.clamped.len(), 4);
    }

    #[test]
    fn variation_empty_and_negative() {
        let spec = brunel(100);
        let a = apply_parameter_variation(&spec, &BTreeMap::new(), 1).unwrap();
        assert!(a.spec.populations.iter().all(|p| p.params_per_neuron.is_none()));
        let mut cv = BTreeMap::new();
        cv.insert("tau_m".to_string(), -0.1);
        assert!(apply_parameter_variation(&spec, &cv, 1).is_err());
        let mut cv = BTreeMap::new();
        cv.insert("bogus".to_string(), 0.1);
        assert!(apply_parameter_variation(&spec, &cv, 1).is_err());
    }

    #[test]
    fn variation_statistics() {
        // oracle: sample mean of 10,000 normal draws is within 3σ/√n of the
        // nominal value; sample CV close to the requested one
        let mut spec = NetworkSpec::new(0);
        spec.populations.push(crate::network::Population::new(
            "a",
            10_000,
            Sign::Excitatory,
            crate::models::brunel_neuron(),
        ));
        let mut cv = BTreeMap::new();
        cv.insert("tau_m".to_string(), 0.1);
        let a = apply_parameter_variation(&spec, &cv, 42).unwrap();
        let v: Vec<f64> = a.spec.populations[0]
            .params_per_neuron
            .as_ref()
            .unwrap()
            .iter()
            .map(|p| p.tau_m)
            .collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sigma = 0.1 * 20.0;
        assert!((mean - 20.0).abs() < 3.0 * sigma / n.sqrt(), "{mean}");
        assert!((sd / mean - 0.1).abs() < 0.01, "{}", sd / mean);
        let b = apply_parameter_variation(&spec, &cv, 42).unwrap();
        assert_eq!(a.spec, b.spec);
    }

    #[test]
    fn variation_redraws_invalid() {
        // threshold and reset so close that many raw draws invert them
        let mut spec = NetworkSpec::new(0);
        let mut p = crate::models::brunel_neuron();
        p.v_reset = -50.5;
        spec.populations
            .push(crate::network::Population::new("a", 2000, Sign::Excitatory, p));
        let mut cv = BTreeMap::new();
        cv.insert("v_thresh".to_string(), 0.02);
        cv.insert("v_reset".to_string(), 0.02);
        let a = apply_parameter_variation(&spec, &cv, 1).unwrap();
        for p in a.spec.populations[0].params_per_neuron.as_ref().unwrap() {
            assert!(p.v_reset < p.v_thresh);
        }
    }
}
