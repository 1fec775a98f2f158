//! Quick throughput probe: forward+backward sequences per second at the
//! reduced desk-scale dims, plus inference-only throughput.

use std::time::Instant;

use npsd::dataset::TrainingSequence;
use npsd::net::{backward, forward, mse_loss, predict, NetworkDims, NetworkParams};
use rand::Rng;
use rand::SeedableRng;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let dims = NetworkDims::new(3, 32, 16);
    let params = NetworkParams::<f32>::init(dims, 2).unwrap();
    let seqs: Vec<TrainingSequence> = (0..64)
        .map(|_| TrainingSequence {
            k: 0,
            l_end: 127,
            mu: 1.0,
            input: (0..128 * 3).map(|_| rng.random_range(0.0..2.0)).collect(),
            target: (0..128).map(|_| rng.random_range(-4.0..1.0)).collect(),
        })
        .collect();

    let start = Instant::now();
    let mut sink = 0.0f32;
    let reps = 8;
    for _ in 0..reps {
        for s in &seqs {
            let (preds, cache) = forward(&params, &s.input);
            sink += mse_loss(&preds, &s.target);
            let grads = backward(&params, &cache, &s.target);
            sink += grads.data()[0];
        }
    }
    let n = (reps * seqs.len()) as f64;
    let dt = start.elapsed().as_secs_f64();
    println!("train step: {:.3} ms/seq ({:.0} seq/s)", 1e3 * dt / n, n / dt);

    let start = Instant::now();
    for _ in 0..reps * 3 {
        for s in &seqs {
            let preds = predict(&params, &s.input);
            sink += preds[127];
        }
    }
    let n = (3 * reps * seqs.len()) as f64;
    let dt = start.elapsed().as_secs_f64();
    println!("inference: {:.3} ms/seq ({:.0} seq/s)", 1e3 * dt / n, n / dt);
    eprintln!("(sink {sink})");
}
