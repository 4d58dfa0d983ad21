use qfsc_core::adapted::{AdaptedSpace, TimeGrid, WeylProcess};
use qfsc_core::linalg::c;
use qfsc_core::phase_space::{build_sigma_gauge, s_omega, scalar_t, PhaseSpaceModel, SigmaMap, Strictness};
use qfsc_core::qf_martingale::{constant_noise, exponential_martingale, represent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gauge(bins: usize) -> SigmaMap {
    build_sigma_gauge(PhaseSpaceModel::new(1, bins), &vec![scalar_t(1, 1.0); bins], Strictness::Strict).unwrap()
}

fn residual(bins: usize, cutoff: usize) -> f64 {
    let sp = AdaptedSpace::new(TimeGrid::new(1, bins, 1.0 / bins as f64), cutoff);
    let sigma = gauge(bins);
    let f = constant_noise(&sigma, c(1.0, 0.0), 0.25);
    let em = exponential_martingale(&sp, &f, &sigma);
    represent(&sp, &em.x, &sigma).unwrap().final_residual()
}

#[test]
fn exponential_residual_halves_order() {
    let ms = [2usize, 4, 8];
    let rs: Vec<f64> = ms.iter().map(|&m| residual(m, 6)).collect();
    println!("{rs:?}");
    assert!(rs.windows(2).all(|w| w[1] < w[0]));
    let xs: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let slope = -least_squares_slope(&xs, &ys);
    println!("slope {slope}");
    assert!((0.3..=0.7).contains(&slope));
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn modular_commutation_converges_in_cutoff() {
    let sigma = gauge(2);
    let s = s_omega(&sigma).unwrap();
    let mut comm = Vec::new();
    let mut xb = Vec::new();
    for n in [8usize, 10, 12] {
        let sp = AdaptedSpace::new(TimeGrid::new(1, 2, 0.5), n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = WeylProcess::random(&sp, &sigma, 0.5, 0.5, &mut rng);
        let big_s = sp.fock.modular_s(&s);
        comm.push(sp.modular_ito_commutation(&sigma, &s, &big_s, &input, false).unwrap());
        xb.push(sp.theorem_x_b(&sigma, &big_s, &input, false).unwrap());
        assert!(sp.modular_ito_commutation(&sigma, &s, &big_s, &input, true).unwrap() < 1e-12);
        assert!(sp.theorem_x_b(&sigma, &big_s, &input, true).unwrap() < 1e-12);
    }
    println!("{comm:?} {xb:?}");
    assert!(comm.windows(2).all(|w| w[1] < w[0]) && xb.windows(2).all(|w| w[1] < w[0]));
    assert!(comm[2] <= 1e-6 && xb[2] <= 1e-6);
}
