//! Closed-form post-synaptic potentials of a passive membrane.
//!
//! A current `w·exp(-t/τs)` injected into a membrane with capacitance `C`
//! and time constant `τm` deflects the potential by
//! `w/C · τm·τs/(τm-τs) · (exp(-t/τm) - exp(-t/τs))`, peaking at
//! `t* = τm·τs/(τm-τs) · ln(τm/τs)`.

/// Time of the PSP peak (ms).
pub fn peak_time(tau_m: f64, tau_s: f64) -> f64 {
    if (tau_m - tau_s).abs() < 1e-9 * tau_m {
        return tau_m;
    }
    tau_m * tau_s / (tau_m - tau_s) * (tau_m / tau_s).ln()
}

/// Peak deflection (mV) for a current amplitude `w` (nA).
pub fn current_psp_peak(w: f64, tau_m: f64, tau_s: f64, c_m: f64) -> f64 {
    w * unit_peak(tau_m, tau_s, c_m)
}

/// Current amplitude (nA) whose PSP peaks at `psp` (mV).
pub fn weight_for_psp(psp: f64, tau_m: f64, tau_s: f64, c_m: f64) -> f64 {
    psp / unit_peak(tau_m, tau_s, c_m)
}

fn unit_peak(tau_m: f64, tau_s: f64, c_m: f64) -> f64 {
    if (tau_m - tau_s).abs() < 1e-9 * tau_m {
        return tau_m / (c_m * std::f64::consts::E);
    }
    let t = peak_time(tau_m, tau_s);
    tau_m * tau_s / (c_m * (tau_m - tau_s)) * ((-t / tau_m).exp() - (-t / tau_s).exp())
}
