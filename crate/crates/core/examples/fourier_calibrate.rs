//! Calibration probe for the Fourier rejection threshold: renders jittered
//! valid configurations and reports the SSR distribution, rejection rate,
//! and kink-count agreement with the geometric classifier.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use kzmsim_core::*;

fn main() {
    let n = 16usize;
    let trap = TrapParameters::experiment_default();
    let omega_final = trap.axial_calibration; // V = 1
    let species = IonSpecies::ca40();
    let geometry = ImageGeometry::experiment_default();
    let library = build_reference_templates(n, species, &trap, omega_final, &geometry).unwrap();
    let amps = zigzag_reference_amplitudes(n, species, &trap, omega_final).unwrap();
    let eq = equilibrium_positions(n, species, &trap, omega_final).unwrap();
    let z: Vec<f64> = eq.positions_si().iter().map(|p| p[2]).collect();
    let thresholds = ClassifierThresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let jitter = 4.0e-8; // ~ thermal RMS at the Doppler limit

    let trials = 1000;
    let mut ssrs = Vec::new();
    let mut rejected = 0;
    let mut agree = 0;
    let mut disagree_pairs = Vec::new();
    let mut fail_gaps: Vec<(Vec<usize>, i8)> = Vec::new();
    for trial in 0..trials {
        // random valid configuration: 0, 1 or 2 alternation breaks at
        // interior gaps
        let n_kinks = rng.random_range(0..=2);
        let mut gaps: Vec<usize> = Vec::new();
        while gaps.len() < n_kinks {
            let g = rng.random_range(3..n - 4);
            if gaps.iter().all(|&o| (o as i64 - g as i64).abs() >= 3) {
                gaps.push(g);
            }
        }
        let start: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
        let mut sign = start;
        let mut positions = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 && !gaps.contains(&(i - 1)) {
                sign = -sign;
            }
            let jx: f64 = rng.sample(StandardNormal);
            let jy: f64 = rng.sample(StandardNormal);
            let jz: f64 = rng.sample(StandardNormal);
            positions.push([
                sign as f64 * amps[i] + jitter * jx,
                jitter * jy,
                z[i] + jitter * jz,
            ]);
        }
        let state = SimState {
            time: 0.0,
            positions,
            velocities: vec![[0.0; 3]; n],
            species,
        };
        let geo = classify_configuration(&state, &amps, &thresholds).unwrap();
        let img = render_synthetic_image(&state, &geometry, None).unwrap();
        match fourier_template_classify(&img, &library).unwrap() {
            FourierOutcome::Class { kink_count, ssr, .. } => {
                ssrs.push(ssr);
                if geo.class != CrystalClass::Ambiguous && kink_count == geo.kink_count {
                    agree += 1;
                } else {
                    disagree_pairs.push((trial, geo.kink_count, kink_count, ssr));
                    fail_gaps.push((gaps.clone(), start));
                }
            }
            FourierOutcome::Rejected => rejected += 1,
        }
    }
    ssrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| ssrs[((ssrs.len() - 1) as f64 * p) as usize];
    println!(
        "trials {trials}: rejected {rejected}, agreement {agree}/{}",
        trials - rejected
    );
    println!(
        "ssr quantiles: p50 {:.3e} p90 {:.3e} p99 {:.3e} max {:.3e}",
        q(0.5),
        q(0.9),
        q(0.99),
        ssrs.last().unwrap()
    );
    for (d, fg) in disagree_pairs.iter().zip(&fail_gaps).take(40) {
        println!("disagree trial {} geo {} fourier {} ssr {:.3e} gaps {:?} start {}", d.0, d.1, d.2, d.3, fg.0, fg.1);
    }
    // SSR of a pure-noise image for threshold context
    let noise_state = SimState {
        time: 0.0,
        positions: (0..n)
            .map(|_| {
                [
                    30e-6 * rng.random_range(-1.0..1.0),
                    10e-6 * rng.random_range(-1.0..1.0),
                    120e-6 * rng.random_range(-1.0..1.0),
                ]
            })
            .collect(),
        velocities: vec![[0.0; 3]; n],
        species,
    };
    let img = render_synthetic_image(&noise_state, &geometry, None).unwrap();
    match fourier_template_classify(&img, &library).unwrap() {
        FourierOutcome::Class { ssr, .. } => println!("random-gas image best ssr {ssr:.3e}"),
        FourierOutcome::Rejected => println!("random-gas image rejected"),
    }
}
