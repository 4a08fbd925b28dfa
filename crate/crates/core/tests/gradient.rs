use fedsim_core::model::mean_loss;
use fedsim_core::{grad, l2_regularized_grad, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

fn random_instance(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> (ModelParams, Vec<Vec<f64>>, Vec<u8>) {
    let params = ModelParams {
        weights: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        bias: rng.gen_range(-1.0..1.0),
    };
    let xs = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let ys = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    (params, xs, ys)
}

fn objective(p: &ModelParams, xs: &[Vec<f64>], ys: &[u8], lambda: f64) -> f64 {
    let data = xs.iter().map(Vec::as_slice).zip(ys.iter().copied());
    mean_loss(p, data) + 0.5 * lambda * p.weights.iter().map(|w| w * w).sum::<f64>()
}

fn numeric_grad(p: &ModelParams, xs: &[Vec<f64>], ys: &[u8], lambda: f64) -> Vec<f64> {
    let flat = p.to_flat();
    (0..flat.len())
        .map(|i| {
            let bump = |delta: f64| {
                let mut q = p.clone();
                if i < q.weights.len() {
                    q.weights[i] += delta;
                } else {
                    q.bias += delta;
                }
                objective(&q, xs, ys, lambda)
            };
            (bump(H) - bump(-H)) / (2.0 * H)
        })
        .collect()
}

fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (p, xs, ys) = random_instance(&mut rng, 13, 16);
        let g = grad(&p, xs.iter().map(Vec::as_slice).zip(ys.iter().copied()));
        let mut analytic = g.d_weights.clone();
        analytic.push(g.d_bias);
        let err = max_rel_err(&analytic, &numeric_grad(&p, &xs, &ys, 0.0));
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn regularized_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (p, xs, ys) = random_instance(&mut rng, 5, 8);
        let g = l2_regularized_grad(&p, xs.iter().map(Vec::as_slice).zip(ys.iter().copied()), 0.3);
        let mut analytic = g.d_weights.clone();
        analytic.push(g.d_bias);
        let err = max_rel_err(&analytic, &numeric_grad(&p, &xs, &ys, 0.3));
        assert!(err < 1e-5, "relative error {err}");
    }
}
