use distillery::channels::{apply_channel, depolarizing_local};
use distillery::densop::{bell_fidelity, bell_state};
use distillery::estimation::{
    direct_fidelity_exact, direct_fidelity_noisy, estimate_sampled, outcome_probabilities, read_counts_csv,
    sample_counts, write_counts_csv, PairBasis,
};

#[test]
fn direct_estimator_equals_overlap() {
    for lambda in [0.0, 0.1, 0.45, 0.9] {
        let rho = apply_channel(&bell_state(1).unwrap(), &depolarizing_local(lambda).unwrap().on(&[0]).unwrap()).unwrap();
        let f = direct_fidelity_exact(&rho, (0, 1)).unwrap();
        assert!((f - bell_fidelity(&rho, (0, 1)).unwrap()).abs() < 1e-12);
        assert!((f - (1.0 - lambda)).abs() < 1e-12);
    }
}

#[test]
fn sample_mean_is_unbiased() {
    let rho = apply_channel(&bell_state(1).unwrap(), &depolarizing_local(0.2).unwrap().on(&[1]).unwrap()).unwrap();
    for m in [0.0, 0.03] {
        let expect = direct_fidelity_noisy(&rho, (0, 1), m, m).unwrap();
        let n = 200;
        let mut mean = 0.0;
        let mut se = 0.0;
        for t in 0..n {
            let est = estimate_sampled(&rho, (0, 1), 4000, m, 7 + 3 * t).unwrap();
            mean += est.f_hat / n as f64;
            se += est.std_error / n as f64;
        }
        let tol = 4.0 * se / (n as f64).sqrt();
        assert!((mean - expect).abs() < tol, "m={m}: mean {mean} vs {expect} (tol {tol})");
    }
}

#[test]
fn counts_follow_outcome_distribution() {
    let rho = apply_channel(&bell_state(1).unwrap(), &depolarizing_local(0.5).unwrap().on(&[0]).unwrap()).unwrap();
    let shots = 200_000;
    for basis in PairBasis::ALL {
        let probs = outcome_probabilities(&rho, (0, 1), basis, 0.02).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let t = sample_counts(&rho, (0, 1), basis, shots, 0.02, 11).unwrap();
        assert_eq!(t.counts.iter().sum::<u64>(), shots);
        for (c, p) in t.counts.iter().zip(probs) {
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            assert!((*c as f64 / shots as f64 - p).abs() < 5.0 * sigma + 1e-9);
        }
    }
}

#[test]
fn counts_csv_round_trip() {
    let rho = bell_state(1).unwrap();
    let tables: Vec<_> = PairBasis::ALL
        .iter()
        .map(|&b| sample_counts(&rho, (0, 1), b, 500, 0.1, 3).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_counts_csv(&mut buf, &tables).unwrap();
    assert_eq!(read_counts_csv(buf.as_slice()).unwrap(), tables);
}
