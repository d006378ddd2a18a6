//! Sampled campaigns built from the core pieces alone, checked against the
//! closed-form predictor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teleport_core::bsm::{classify, Outcome};
use teleport_core::photonics::{sample_click_pair, sample_freq_offset, Envelope, TemporalPhoton};
use teleport_core::protocol::{
    herald_receiver, joint_state, photon_pair_state, predict_fidelity, target_state, FidelityClass, InputState,
    NoiseModel,
};
use teleport_core::qubit::{fidelity, PureState};
use teleport_core::stats::count_ratio;

struct Herald {
    input: InputState,
    outcome: Outcome,
    fidelity: Option<f64>,
}

fn run(noise: &NoiseModel, trials: usize, seed: u64) -> Vec<Herald> {
    let env = Envelope::default_vstirap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prepared: Vec<_> = InputState::ALL
        .iter()
        .map(|&i| {
            let joint = joint_state(i, noise).unwrap();
            let pair = photon_pair_state(&joint).unwrap();
            (i, joint, pair)
        })
        .collect();
    (0..trials)
        .map(|n| {
            let (input, joint, pair) = &prepared[n % prepared.len()];
            let dw = sample_freq_offset(noise.sigma_omega, &mut rng);
            let pa = TemporalPhoton { polarization: PureState::horizontal(), envelope: &env, freq_offset: 0.0 };
            let pc = TemporalPhoton { polarization: PureState::horizontal(), envelope: &env, freq_offset: dw };
            let d = sample_click_pair(&pa, &pc, pair, &mut rng).detection().clone();
            let outcome = classify((d.first, d.second));
            let fidelity =
                target_state(outcome, *input).ok().map(|t| fidelity(&herald_receiver(joint, &d.operator).unwrap(), &t));
            Herald { input: *input, outcome, fidelity }
        })
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn noiseless_pairs_split_evenly_and_teleport_perfectly() {
    let hs = run(&NoiseModel::noiseless(), 12_000, 3);
    assert!(hs.iter().all(|h| h.outcome != Outcome::NoInterference));
    let minus = hs.iter().filter(|h| h.outcome == Outcome::PsiMinus).count() as f64;
    let plus = hs.iter().filter(|h| h.outcome == Outcome::PsiPlus).count() as f64;
    let frac = minus / (minus + plus);
    let se = (0.25 / (minus + plus)).sqrt();
    assert!((frac - 0.5).abs() < 4.0 * se, "Ψ⁻ share {frac}");
    for h in &hs {
        if let Some(f) = h.fidelity {
            assert!((f - 1.0).abs() < 1e-9, "{:?} {:?} {f}", h.input, h.outcome);
        }
    }
}

#[test]
fn sampled_fidelities_follow_the_predictor() {
    let noise = NoiseModel::new(0.9, 0.8533333333333334, 7.1622e6).unwrap();
    let hs = run(&noise, 120_000, 5);
    let n_minus = hs.iter().filter(|h| h.outcome == Outcome::PsiMinus).count() as f64;
    let n_ni = hs.iter().filter(|h| h.outcome == Outcome::NoInterference).count() as f64;
    let (ratio, c_se) = count_ratio(n_ni as u64, n_minus as u64);
    let c = 1.0 - ratio;

    let per_label: Vec<(InputState, f64, f64)> = InputState::ALL
        .iter()
        .map(|&i| {
            let fs: Vec<f64> = hs
                .iter()
                .filter(|h| h.input == i && h.outcome == Outcome::PsiMinus)
                .filter_map(|h| h.fidelity)
                .collect();
            let (m, se) = mean_se(&fs);
            (i, m, se)
        })
        .collect();

    let avg = per_label.iter().map(|x| x.1).sum::<f64>() / 6.0;
    let avg_se = per_label.iter().map(|x| x.2 * x.2).sum::<f64>().sqrt() / 6.0;
    // The measured contrast itself carries noise; fold its slope in.
    let (f_ent, f_a) = (noise.f_ent(), noise.f_a());
    let slope = (predict_fidelity(1.0, f_ent, f_a, FidelityClass::Average).unwrap()
        - predict_fidelity(0.0, f_ent, f_a, FidelityClass::Average).unwrap())
    .abs();
    let model = predict_fidelity(c.clamp(0.0, 1.0), f_ent, f_a, FidelityClass::Average).unwrap();
    let tol = 3.0 * (avg_se.powi(2) + (slope * c_se).powi(2)).sqrt();
    assert!((avg - model).abs() < tol, "F_avg {avg} vs {model} at C = {c} (tol {tol})");

    let parallel = predict_fidelity(c, f_ent, f_a, FidelityClass::Parallel).unwrap();
    for (i, m, se) in per_label {
        if i.class() == FidelityClass::Parallel {
            assert!((m - parallel).abs() < 3.0 * se + 1e-12, "{i:?}: {m} vs {parallel}");
        }
    }
}
