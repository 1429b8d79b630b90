//! Train one Gaussian-mixture HMM per activity on labeled observation
//! sequences, flatten them into a single composite model, and decode an
//! unsegmented test sequence back into activities.

use egoindex::sequence::{
    baum_welch, flatten, viterbi, ActivityModel, ActivityTransitions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-dimensional observations drawn around an activity-specific center.
fn draw_sequence(rng: &mut ChaCha8Rng, center: [f64; 2], len: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| vec![center[0] + 0.4 * rng.gen::<f64>(), center[1] + 0.4 * rng.gen::<f64>()])
        .collect()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = [[0.0, 0.0], [4.0, 1.0], [-2.0, 5.0]];
    let names = ["walking", "reading", "typing"];

    let mut activities = Vec::new();
    for (name, center) in names.iter().zip(centers) {
        let sequences: Vec<Vec<Vec<f64>>> =
            (0..4).map(|_| draw_sequence(&mut rng, center, 12)).collect();
        let outcome = baum_welch(&sequences, 2, 1, 0.9, 7).unwrap();
        println!(
            "{:<8} trained in {} iterations, final log-likelihood {:.3}",
            name,
            outcome.loglik_trace.len(),
            outcome.loglik_trace.last().unwrap()
        );
        activities.push(ActivityModel { label: name.to_string(), hmm: outcome.hmm });
    }

    let composite = flatten(&activities, &ActivityTransitions::uniform(3), 0.95).unwrap();
    println!("composite model: {} states", composite.state_count());

    // A test day: walking, then typing, then reading.
    let mut observations = draw_sequence(&mut rng, centers[0], 10);
    observations.extend(draw_sequence(&mut rng, centers[2], 10));
    observations.extend(draw_sequence(&mut rng, centers[1], 10));

    let decoded = viterbi(&composite, &observations).unwrap();
    println!();
    println!("decoded timeline (log probability {:.3}):", decoded.log_probability);
    let mut start = 0;
    for t in 1..=decoded.labels.len() {
        if t == decoded.labels.len() || decoded.labels[t] != decoded.labels[start] {
            println!("  steps {:>2}..{:<2} {}", start, t - 1, decoded.labels[start]);
            start = t;
        }
    }
}
