use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use keydyn_core::encoding::{CanvasConfig, EncodedImage, EncoderKind, ImageEncoder};
use keydyn_core::features::FeatureLayout;
use keydyn_core::neural::io::{read_svdd, write_svdd};
use keydyn_core::neural::svdd::{init_center, snap_center, svdd_loss_and_grad, svdd_objective, CENTER_EPS};
use keydyn_core::neural::{AeOptions, AutoencoderModel, SvddArch, SvddModel, TrainOptions, Verdict};

/// Marker images of vectors drawn around `mean` with spread `sd`.
fn marker_images(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<EncodedImage> {
    let layout = FeatureLayout::new(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..layout.dim()).map(|_| mean + sd * rng.random_range(-1.0..1.0)).collect())
        .collect();
    let enc = ImageEncoder::fit(EncoderKind::OursXy, layout, CanvasConfig::default(), &vs).unwrap();
    vs.iter().map(|v| enc.encode(v).unwrap()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn zero_image_embeds_to_zero() {
    let model = SvddModel::new(SvddArch::default(), 1e-6, 3);
    let y = model.network.forward(&vec![0.0; SvddArch::default().input_len()]).unwrap();
    assert_eq!(y.len(), 64);
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn center_is_the_snapped_mean_embedding() {
    let model = SvddModel::new(SvddArch::default(), 1e-6, 4);
    let images = marker_images(100, 0.0, 2.0, 1);
    let prepared = model.prepare_all(&images).unwrap();
    let c = init_center(&model.network, &prepared).unwrap();
    let mut mean = vec![0.0; 64];
    for img in &images {
        for (m, y) in mean.iter_mut().zip(model.network.embed(img).unwrap()) {
            *m += y / images.len() as f64;
        }
    }
    for (ci, mi) in c.iter().zip(&mean) {
        assert!((ci - snap_center(*mi)).abs() < 1e-12);
        assert!(ci.abs() >= CENTER_EPS);
    }

    let one = init_center(&model.network, &prepared[..1]).unwrap();
    let e = model.network.embed(&images[0]).unwrap();
    for (ci, ei) in one.iter().zip(&e) {
        assert_eq!(*ci, snap_center(*ei));
    }
    assert!(init_center(&model.network, &[]).is_err());
}

#[test]
fn objective_matches_independent_evaluation() {
    let lambda = 1e-2;
    let mut model = SvddModel::new(SvddArch::default(), lambda, 5);
    let images = marker_images(12, 0.5, 1.0, 2);
    let prepared = model.prepare_all(&images).unwrap();
    model.center = init_center(&model.network, &prepared).unwrap();

    let mut dist = 0.0;
    for img in &images {
        let y = model.network.embed(img).unwrap();
        dist += y.iter().zip(&model.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let frob: f64 = model.network.params().iter().flat_map(|t| t.data()).map(|w| w * w).sum();
    let oracle = dist / images.len() as f64 + lambda * frob;

    let batch: Vec<_> = prepared.iter().collect();
    let (loss, _) = svdd_loss_and_grad(&model.network, &model.center, lambda, &batch);
    assert!((loss - oracle).abs() <= 1e-10 * oracle.max(1.0), "{loss} vs {oracle}");
    let objective = svdd_objective(&model.network, &model.center, lambda, &prepared);
    assert!((objective - oracle).abs() <= 1e-10 * oracle.max(1.0));

    // the trainer's final loss is the same objective after training
    let report = model
        .train_prepared(&prepared, &TrainOptions { epochs: 2, seed: 1, ..Default::default() })
        .unwrap();
    let after = svdd_objective(&model.network, &model.center, lambda, &prepared);
    assert!((report.final_loss - after).abs() <= 1e-10 * after.max(1.0));
}

#[test]
fn repeated_image_loss_settles_and_center_is_fixed() {
    let mut model = SvddModel::new(SvddArch::default(), 1e-6, 6);
    let img = marker_images(1, 0.0, 1.0, 3).remove(0);
    let images = vec![img; 32];
    let prepared = model.prepare_all(&images).unwrap();
    model.center = init_center(&model.network, &prepared).unwrap();
    let center = model.center.clone();
    let report = model
        .train_prepared(&prepared, &TrainOptions { epochs: 40, batch_size: 8, seed: 2, ..Default::default() })
        .unwrap();
    assert_eq!(model.center, center);
    let losses = &report.epoch_losses;
    for w in losses[5..].windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{losses:?}");
    }
    assert!(losses[losses.len() - 1] < losses[0]);
}

#[test]
fn heavy_weight_decay_drives_embeddings_to_zero() {
    let mut model = SvddModel::new(SvddArch::default(), 1e3, 7);
    let images = marker_images(16, 0.0, 2.0, 4);
    let prepared = model.prepare_all(&images).unwrap();
    model.center = init_center(&model.network, &prepared).unwrap();
    let c2: f64 = model.center.iter().map(|c| c * c).sum();
    let before = model.network.frobenius_sq();
    let report = model
        .train_prepared(&prepared, &TrainOptions { epochs: 300, lr: 1e-2, batch_size: 16, seed: 3 })
        .unwrap();
    assert!(model.network.frobenius_sq() < 1e-3 * before);
    let y = model.network.embed(&images[0]).unwrap();
    assert!(norm(&y) < 1e-2 * norm(&model.center), "{}", norm(&y));
    assert!((report.final_loss - c2).abs() < 0.05 * c2, "{} vs {c2}", report.final_loss);
}

#[test]
fn score_is_distance_to_center() {
    let mut model = SvddModel::new(SvddArch::default(), 1e-6, 8);
    let images = marker_images(4, 0.0, 1.0, 5);
    model.center = (0..64).map(|i| 0.01 * i as f64).collect();
    for img in &images {
        let y = model.network.embed(img).unwrap();
        let manual = y.iter().zip(&model.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert_eq!(model.score(img).unwrap(), manual);
    }
    for t in model.network.params_mut() {
        t.fill(0.0);
    }
    assert!((model.score(&images[0]).unwrap() - norm(&model.center)).abs() < 1e-15);

    model.threshold = Some(0.0);
    assert_eq!(model.decide(&images[0]).unwrap().verdict, Verdict::Reject);
    model.threshold = None;
    assert!(model.decide(&images[0]).is_err());
}

#[test]
fn trained_svdd_separates_out_of_distribution() {
    let mut model = SvddModel::new(SvddArch::default(), 1e-6, 9);
    let train = marker_images(64, -1.5, 0.4, 6);
    model
        .fit(&train, &TrainOptions { epochs: 30, seed: 4, ..Default::default() })
        .unwrap();
    let inside = marker_images(1, -1.5, 0.4, 60).remove(0);
    let outside = marker_images(1, 1.5, 0.4, 61).remove(0);
    assert!(model.score(&outside).unwrap() > model.score(&inside).unwrap());
}

#[test]
fn reserialized_model_embeds_identically() {
    let mut model = SvddModel::new(SvddArch::default(), 1e-6, 10);
    let images = marker_images(8, 0.0, 1.0, 7);
    model
        .fit(&images, &TrainOptions { epochs: 2, seed: 5, ..Default::default() })
        .unwrap();
    model.threshold = Some(0.5);
    let mut bytes = Vec::new();
    write_svdd(&model, &mut bytes).unwrap();
    let loaded = read_svdd(bytes.as_slice()).unwrap();
    for img in &images {
        let a = model.network.embed(img).unwrap();
        let b = loaded.network.embed(img).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    assert_eq!(loaded.center, model.center);
    assert_eq!(loaded.threshold, Some(0.5));
}

#[test]
fn autoencoder_scores_far_vectors_higher() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let basis: Vec<Vec<f64>> = (0..3).map(|_| (0..76).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let data: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            (0..76).map(|j| (0..3).map(|k| c[k] * basis[k][j]).sum()).collect()
        })
        .collect();
    let mut ae = AutoencoderModel::new(76, &[128, 30, 128], 3);
    ae.fit(&data, &AeOptions { epochs: 60, seed: 1, ..Default::default() }).unwrap();
    let far: Vec<f64> = (0..76).map(|_| rng.random_range(-3.0..3.0)).collect();
    let typical = ae.score(&data[0]).unwrap();
    assert!(ae.score(&far).unwrap() > typical);
    assert!(ae.reconstruct(&far).unwrap().len() == 76);
    assert!(ae.score(&[0.0; 5]).is_err());
}
