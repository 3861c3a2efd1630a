//! Model-to-model deltas.

mod common;

use common::{gaussian_weights, random_model, rng};
use mtc::codec::{compress_model, PipelineConfig};
use mtc::container::model_to_bytes;
use mtc::delta::{apply_delta, build_delta, diff_lossy, DeltaConfig, DeltaDescriptor, LayerDelta};
use mtc::model::LayerRecord;
use mtc::transforms::LossyParams;
use mtc::Error;
use rand::Rng;

fn total_bytes(layers: &[LayerRecord]) -> u64 {
    layers.iter().map(|l| l.byte_len()).sum()
}

fn weights_model(r: &mut impl Rng, layers: usize, n: usize) -> Vec<LayerRecord> {
    (0..layers)
        .map(|i| {
            LayerRecord::from_f32(
                format!("l{i}"),
                vec![n as u64],
                &gaussian_weights(r, n, 0.05),
            )
            .unwrap()
        })
        .collect()
}

/// Moves every value down by less than 2^-24.
fn perturb_down(r: &mut impl Rng, layer: &LayerRecord) -> LayerRecord {
    let values: Vec<f32> = layer
        .f32_values()
        .unwrap()
        .into_iter()
        .map(|v| {
            let t = (v as f64 - r.gen_range(0.0..2f64.powi(-24))) as f32;
            if (v as f64 - t as f64) < 2f64.powi(-24) {
                t
            } else {
                v
            }
        })
        .collect();
    LayerRecord::from_f32(layer.name.clone(), layer.shape.clone(), &values).unwrap()
}

#[test]
fn chained_deltas_compose() {
    let mut r = rng(1);
    let v0 = weights_model(&mut r, 3, 500);
    let v1 = weights_model(&mut r, 3, 500);
    let v2 = weights_model(&mut r, 3, 500);
    let d01 = build_delta(&v0, &v1, &DeltaConfig::xor()).unwrap();
    let d12 = build_delta(&v1, &v2, &DeltaConfig::xor()).unwrap();
    let d01 = DeltaDescriptor::from_bytes(&d01.to_bytes().unwrap()).unwrap();
    let d12 = DeltaDescriptor::from_bytes(&d12.to_bytes().unwrap()).unwrap();
    let step = apply_delta(&v0, &d01).unwrap();
    assert_eq!(step, v1);
    assert_eq!(apply_delta(&step, &d12).unwrap(), v2);
    // Deltas are bound to their own base.
    assert!(matches!(
        apply_delta(&v0, &d12),
        Err(Error::BaseHashMismatch)
    ));
}

#[test]
fn xor_roundtrip_on_random_pairs() {
    let mut r = rng(2);
    for _ in 0..50 {
        let base = random_model(&mut r, 5, 300, false);
        let mut target = base.clone();
        for layer in &mut target {
            let n = layer.data.len();
            r.fill(&mut layer.data[..n / 2]);
        }
        let d = build_delta(&base, &target, &DeltaConfig::xor()).unwrap();
        let d = DeltaDescriptor::from_bytes(&d.to_bytes().unwrap()).unwrap();
        assert_eq!(apply_delta(&base, &d).unwrap(), target);
    }
}

#[test]
fn small_perturbations_give_tiny_residuals() {
    let mut r = rng(3);
    let p = LossyParams::new(23).unwrap();
    let base = weights_model(&mut r, 1, 20_000);
    let target = perturb_down(&mut r, &base[0]);
    let LayerDelta::Residual(res) = diff_lossy(&base[0], &target, p).unwrap() else {
        panic!("expected residuals");
    };
    assert!(res.iter().all(|x| *x == -1 || *x == 0));
    assert!(res.contains(&-1) && res.contains(&0));
}

#[test]
fn lossy_delta_beats_standalone_lossy() {
    let mut r = rng(4);
    let p = LossyParams::new(23).unwrap();
    let base = weights_model(&mut r, 4, 50_000);
    let target: Vec<_> = base.iter().map(|l| perturb_down(&mut r, l)).collect();
    let original = total_bytes(&target) as f64;

    let delta = build_delta(&base, &target, &DeltaConfig::lossy(p))
        .unwrap()
        .to_bytes()
        .unwrap();
    let config = PipelineConfig::lossy(p);
    let standalone = model_to_bytes(&compress_model(&target, &config).unwrap(), &config).unwrap();
    let delta_ratio = delta.len() as f64 / original;
    let standalone_ratio = standalone.len() as f64 / original;
    assert!(
        delta_ratio < standalone_ratio,
        "delta {delta_ratio:.4} vs standalone {standalone_ratio:.4}"
    );

    let out = apply_delta(&base, &DeltaDescriptor::from_bytes(&delta).unwrap()).unwrap();
    for (o, t) in out.iter().zip(&target) {
        for (x, y) in o.f32_values().unwrap().iter().zip(t.f32_values().unwrap()) {
            assert!((x - y).abs() < 2f32.powi(-23));
        }
    }
}

#[test]
fn self_delta_is_nearly_free() {
    let mut r = rng(5);
    let base = weights_model(&mut r, 4, 100_000);
    let d = build_delta(&base, &base, &DeltaConfig::xor())
        .unwrap()
        .to_bytes()
        .unwrap();
    assert!((d.len() as f64) < 0.01 * total_bytes(&base) as f64);
}

#[test]
fn lossy_delta_falls_back_per_layer() {
    let p = LossyParams::new(23).unwrap();
    let base = vec![
        LayerRecord::from_f32("small", vec![2], &[0.1, 0.2]).unwrap(),
        LayerRecord::from_f32("big", vec![2], &[0.1, 500.0]).unwrap(),
    ];
    let target = vec![
        LayerRecord::from_f32("small", vec![2], &[0.1, 0.25]).unwrap(),
        LayerRecord::from_f32("big", vec![2], &[0.1, 501.0]).unwrap(),
    ];
    let d = build_delta(&base, &target, &DeltaConfig::lossy(p)).unwrap();
    assert!(d.layers[0].transforms.lossy.is_some());
    assert!(d.layers[1].transforms.lossy.is_none());
    let out = apply_delta(&base, &d).unwrap();
    assert_eq!(out[1], target[1]);
}
