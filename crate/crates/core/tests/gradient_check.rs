// SPDX-License-Identifier: MIT OR Apache-2.0

//! Analytic gradients against central finite differences on a tiny model.

use txray_core::encoder::{
    classifier_loss, classifier_loss_and_grad, lm_loss, lm_loss_and_grad, ClassifierHead, Dims,
    EncoderParams, PruneMask,
};

const TOLERANCE: f64 = 1e-3;
const EPS: f32 = 1e-3;

fn tiny() -> EncoderParams {
    EncoderParams::init(11, Dims { vocab: 2, embed: 3, hidden: 4 }).unwrap()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-9 {
        return (analytic - numeric).abs();
    }
    (analytic - numeric).abs() / scale
}

/// Central difference with respect to parameter `i`. The perturbation is
/// applied to the stored f32 value; the actual step is measured after
/// rounding so the quotient stays exact.
fn numeric<F: Fn(&EncoderParams) -> f64>(params: &EncoderParams, i: usize, loss: F) -> f64 {
    let mut plus = params.values().to_vec();
    let mut minus = params.values().to_vec();
    plus[i] += EPS;
    minus[i] -= EPS;
    let step = plus[i] as f64 - minus[i] as f64;
    let p = EncoderParams::from_values(params.dims, params.seed, plus).unwrap();
    let m = EncoderParams::from_values(params.dims, params.seed, minus).unwrap();
    (loss(&p) - loss(&m)) / step
}

#[test]
fn lm_gradient_matches_finite_differences() {
    let params = tiny();
    let seq = [0u32, 1, 1, 0, 1, 0, 0, 1];
    let (_, grads) = lm_loss_and_grad::<f64>(&params, &seq, None).unwrap();
    let mut worst = 0.0f64;
    for i in 0..params.values().len() {
        let n = numeric(&params, i, |p| lm_loss::<f64>(p, &seq, None).unwrap());
        worst = worst.max(rel_err(grads[i], n));
    }
    println!("LM gradient check: worst relative error {worst:.3e}");
    assert!(worst < TOLERANCE, "worst relative error {worst}");
}

#[test]
fn masked_lm_gradient_matches_finite_differences() {
    let params = tiny();
    let mask = PruneMask::without(4, &[1, 2]).unwrap();
    let seq = [1u32, 0, 1, 1, 0];
    let (_, grads) = lm_loss_and_grad::<f64>(&params, &seq, Some(&mask)).unwrap();
    for i in 0..params.values().len() {
        let n = numeric(&params, i, |p| lm_loss::<f64>(p, &seq, Some(&mask)).unwrap());
        assert!(rel_err(grads[i], n) < TOLERANCE, "param {i}: {} vs {n}", grads[i]);
    }
}

#[test]
fn classifier_gradient_matches_finite_differences() {
    let params = tiny();
    let head = ClassifierHead::init(5, 4);
    let seq = [1u32, 0, 0, 1, 1, 0];
    for label in [0u8, 1] {
        let (_, grads, head_grads) =
            classifier_loss_and_grad::<f64>(&params, &head, &seq, label, None).unwrap();
        let mut worst = 0.0f64;
        for i in 0..params.values().len() {
            let n = numeric(&params, i, |p| classifier_loss::<f64>(p, &head, &seq, label, None).unwrap());
            worst = worst.max(rel_err(grads[i], n));
        }
        for j in 0..=4 {
            let perturbed = |delta: f32| {
                let mut h = head.clone();
                if j < 4 {
                    h.weight[j] += delta;
                } else {
                    h.bias += delta;
                }
                h
            };
            let (hp, hm) = (perturbed(EPS), perturbed(-EPS));
            let step = if j < 4 {
                hp.weight[j] as f64 - hm.weight[j] as f64
            } else {
                hp.bias as f64 - hm.bias as f64
            };
            let n = (classifier_loss::<f64>(&params, &hp, &seq, label, None).unwrap()
                - classifier_loss::<f64>(&params, &hm, &seq, label, None).unwrap())
                / step;
            worst = worst.max(rel_err(head_grads[j], n));
        }
        println!("classifier gradient check (label {label}): worst relative error {worst:.3e}");
        assert!(worst < TOLERANCE, "worst relative error {worst}");
    }
}

#[test]
fn f32_and_f64_paths_agree() {
    let params = tiny();
    let seq = [0u32, 1, 1, 0, 1];
    let a = lm_loss::<f32>(&params, &seq, None).unwrap() as f64;
    let b = lm_loss::<f64>(&params, &seq, None).unwrap();
    assert!((a - b).abs() < 1e-5);
}
