use azsr_core::specnet::{backward, loss, Dense, LossKind, MlpModel, SampleRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_CH: usize = 4;
const L: usize = 16;
const HIDDEN: [usize; 3] = [12, 10, 8];

/// Plain nested-loop evaluation, independent of the GEMM path.
fn hand_forward(layers: &[Dense<f64>], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let mut next = vec![0.0; layer.fan_out];
        for (j, out) in next.iter_mut().enumerate() {
            let mut acc = layer.bias[j];
            for (k, xk) in cur.iter().enumerate() {
                acc += xk * layer.weight[k * layer.fan_out + j];
            }
            *out = if i + 1 < layers.len() { acc.max(0.0) } else { acc };
        }
        cur = next;
    }
    cur
}

fn hand_loss(layers: &[Dense<f64>], records: &[SampleRecord], kind: LossKind) -> f64 {
    records
        .iter()
        .map(|r| loss(&hand_forward(layers, &r.input), &r.label, r.alpha, kind))
        .sum::<f64>()
        / records.len() as f64
}

fn records(n: usize, seed: u64) -> Vec<SampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| SampleRecord {
            input: (0..2 * N_CH).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: (0..L).map(|_| rng.random_range(0.0..1.0)).collect(),
            alpha: rng.random_range(0.1..20.0),
        })
        .collect()
}

fn model() -> MlpModel<f64> {
    let mut m = MlpModel::<f64>::with_hidden(N_CH, L, HIDDEN, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for layer in m.layers_mut() {
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
    }
    m
}

#[test]
fn forward_matches_hand_evaluation() {
    let m = model();
    let recs = records(20, 5);
    let inputs: Vec<f64> = recs.iter().flat_map(|r| r.input.clone()).collect();
    let batch = m.forward_batch(&inputs, recs.len()).unwrap();
    for (r, row) in recs.iter().zip(batch.chunks_exact(L)) {
        let hand = hand_forward(m.layers(), &r.input);
        let single = m.forward(&r.input).unwrap();
        for ((h, b), s) in hand.iter().zip(row).zip(&single) {
            assert!((h - b).abs() <= 1e-12 * (1.0 + h.abs()));
            assert!((h - s).abs() <= 1e-12 * (1.0 + h.abs()));
        }
    }
}

fn check_gradients(kind: LossKind) {
    let m = model();
    let recs = records(8, 9);
    let (l, grads) = backward(&m, &recs, kind).unwrap();
    assert!((l - hand_loss(m.layers(), &recs, kind)).abs() < 1e-12 * (1.0 + l));
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for li in 0..4 {
        let n_w = m.layers()[li].weight.len();
        let n_b = m.layers()[li].bias.len();
        for _ in 0..50 {
            let idx = rng.random_range(0..n_w + n_b);
            let perturbed = |delta: f64| {
                let mut layers = m.layers().to_vec();
                if idx < n_w {
                    layers[li].weight[idx] += delta;
                } else {
                    layers[li].bias[idx - n_w] += delta;
                }
                hand_loss(&layers, &recs, kind)
            };
            let fd = (perturbed(h) - perturbed(-h)) / (2.0 * h);
            let g = &grads[li];
            let analytic = if idx < n_w { g.weight[idx] } else { g.bias[idx - n_w] };
            let scale = analytic.abs().max(fd.abs());
            if scale == 0.0 {
                continue;
            }
            let rel = (analytic - fd).abs() / scale;
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "layer {li} param {idx}: analytic {analytic:e} vs fd {fd:e} (rel {rel:e})"
            );
        }
    }
    eprintln!("{kind:?}: worst relative gradient error {worst:e}");
}

#[test]
fn gradients_match_finite_differences_mse() {
    check_gradients(LossKind::Mse);
}

#[test]
fn gradients_match_finite_differences_snr_weighted() {
    check_gradients(LossKind::SnrWeighted);
}
