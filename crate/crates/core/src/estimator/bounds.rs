use serde::Serialize;

use super::noise::NoiseModel;
use crate::circuit::{backward_lightcone, ActivationMeta, Observable, ParamCircuit, GADGET_LAYER_END};
use crate::error::{Error, Result};
use crate::mpqc::OpModel;

/// Activation data needed by the activated-parameter bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ActivatedInputs {
    Single { target_param: usize },
    Zone { target_params: Vec<usize>, s: usize, k_act: usize, f_act: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    pub tau: f64,
    pub k: usize,
    pub f_g: usize,
    /// Per free parameter after the gadget layer, its feedforward count.
    pub f_param: Vec<Option<usize>>,
    pub hs_norm_sq: f64,
    pub min_norm_sq: f64,
    pub gamma: f64,
    pub activation: Option<ActivatedInputs>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivatedBound {
    pub params: Vec<usize>,
    pub lower: f64,
    pub noisy_lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    /// `(τ/4)^K ‖O‖²_HS`.
    pub variance_lower: f64,
    pub noisy_variance_lower: f64,
    /// `(1 − 2γ)^{2(f_G + 4)}`.
    pub noisy_factor: f64,
    /// `(1/2)^{f_j} (τ/4)^K ‖O‖²_min` for parameters after the gadget layer.
    /// Valid for parameters whose gradient variance in the original circuit is nonzero.
    pub grad_after: Vec<(usize, f64)>,
    /// Noisy counterpart of `grad_after`, scaled by `(1 − 2γ)^{f_G + 4}`.
    pub noisy_grad_after: Vec<(usize, f64)>,
    /// `(1/4)^K (‖O‖_min / ‖O‖_HS)²`, to be multiplied by the original circuit's
    /// gradient variance for parameters before the gadget layer.
    pub before_factor: f64,
    /// Present for activated circuits. The activation gadgets change the cone,
    /// so only this bound is guaranteed there; the fields above assume a plain MPQC.
    pub activated: Option<ActivatedBound>,
}

/// Evaluates every applicable bound for a circuit carrying a gadget layer.
pub fn bounds(c: &ParamCircuit, obs: &Observable, op: OpModel, noise: Option<&NoiseModel>) -> Result<BoundReport> {
    let pos = c.mark(GADGET_LAYER_END).ok_or(Error::MissingGadgetLayer)?;
    let cone = backward_lightcone(c, obs, pos)?;
    let gamma = noise.map_or(0.0, NoiseModel::max_gamma);
    let min = obs.min_abs_coeff();
    let activation = c.activation.as_ref().map(|a| match a {
        ActivationMeta::Single { target_param, .. } => ActivatedInputs::Single { target_param: *target_param },
        ActivationMeta::Zone { frontier, target_params, k_act, f_act } => {
            ActivatedInputs::Zone { target_params: target_params.clone(), s: frontier.len(), k_act: *k_act, f_act: *f_act }
        }
    });
    bounds_from_inputs(BoundInputs {
        tau: op.tau(),
        k: cone.k,
        f_g: cone.f_g,
        f_param: cone.f_param,
        hs_norm_sq: obs.hs_norm_sq(),
        min_norm_sq: min * min,
        gamma,
        activation,
    })
}

pub fn bounds_from_inputs(inputs: BoundInputs) -> Result<BoundReport> {
    let g = inputs.gamma;
    if !(0.0..0.5).contains(&g) {
        return Err(Error::Noise(format!("noise strength {g} must lie in [0, 1/2)")));
    }
    let q = inputs.tau / 4.0;
    let base = q.powi(inputs.k as i32);
    let decay = 1.0 - 2.0 * g;
    let f_g = inputs.f_g as i32;
    let noisy_factor = decay.powi(2 * (f_g + 4));
    let grad_noise = decay.powi(f_g + 4);
    let variance_lower = base * inputs.hs_norm_sq;
    let grad_after: Vec<(usize, f64)> = inputs
        .f_param
        .iter()
        .enumerate()
        .filter_map(|(j, f)| f.map(|f| (j, 0.5f64.powi(f as i32) * base * inputs.min_norm_sq)))
        .collect();
    let noisy_grad_after = grad_after.iter().map(|&(j, b)| (j, b * grad_noise)).collect();
    let before_factor = 0.25f64.powi(inputs.k as i32) * inputs.min_norm_sq / inputs.hs_norm_sq;
    let activated = inputs.activation.as_ref().map(|a| match a {
        ActivatedInputs::Single { target_param } => {
            let lower = 0.5f64.powi(f_g + 8) * q.powi(inputs.k as i32 + 1) * inputs.min_norm_sq;
            ActivatedBound { params: vec![*target_param], lower, noisy_lower: lower * decay.powi(f_g + 12) }
        }
        ActivatedInputs::Zone { target_params, s, k_act, f_act } => {
            let lower = 0.5f64.powi(f_g + *f_act as i32 + 8 * *s as i32) * q.powi((inputs.k + k_act) as i32) * inputs.min_norm_sq;
            // Same attenuation budget as a single activation, counted once per enlarged gadget.
            let noisy = lower * decay.powi(f_g + *f_act as i32 + 12 * *s as i32);
            ActivatedBound { params: target_params.clone(), lower, noisy_lower: noisy }
        }
    });
    Ok(BoundReport {
        variance_lower,
        noisy_variance_lower: variance_lower * noisy_factor,
        noisy_factor,
        grad_after,
        noisy_grad_after,
        before_factor,
        activated,
        inputs,
    })
}
