use nehari_core::thresholds::{e_coefficient, gap_radii, q_star, rho, rho_min, threshold_c};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Draw {
    alpha: f64,
    beta: f64,
    q: f64,
    s: f64,
    b_sup: f64,
}

fn draws(n: usize) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..n)
        .map(|_| Draw {
            alpha: rng.gen_range(1.05..2.5),
            beta: rng.gen_range(1.05..2.5),
            q: rng.gen_range(0.05..0.95),
            s: rng.gen_range(0.1..10.0),
            b_sup: rng.gen_range(0.1..5.0),
        })
        .collect()
}

#[test]
fn e_vanishes_at_threshold() {
    for d in draws(100) {
        let c = threshold_c(d.alpha, d.beta, d.q, d.s, d.b_sup).unwrap();
        let e = e_coefficient(d.alpha, d.beta, d.q, d.s, d.b_sup, c).unwrap();
        let scale = d.b_sup * d.s.powf(-0.5 * (d.alpha + d.beta));
        assert!(e.abs() <= 1e-9 * scale, "E(C) = {e}, scale {scale}");
    }
}

#[test]
fn radii_meet_at_threshold() {
    for d in draws(100) {
        let c = threshold_c(d.alpha, d.beta, d.q, d.s, d.b_sup).unwrap();
        let (a0, a_lm) = gap_radii(d.alpha, d.beta, d.q, d.s, d.b_sup, c).unwrap();
        assert!((a0 - a_lm).abs() <= 1e-9 * a0, "{a0} vs {a_lm}");
    }
}

#[test]
fn sign_of_e_follows_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in draws(100) {
        let c = threshold_c(d.alpha, d.beta, d.q, d.s, d.b_sup).unwrap();
        let lam = c * rng.gen_range(-3.0f64..3.0).exp();
        if (lam / c).ln().abs() < 1e-6 {
            continue;
        }
        let e = e_coefficient(d.alpha, d.beta, d.q, d.s, d.b_sup, lam).unwrap();
        assert_eq!(e > 0.0, lam < c, "Lambda = {lam}, C = {c}, E = {e}");
        let (a0, a_lm) = gap_radii(d.alpha, d.beta, d.q, d.s, d.b_sup, lam).unwrap();
        assert_eq!(a_lm < a0, lam < c);
    }
}

#[test]
fn threshold_monotone_in_s_and_b() {
    for d in draws(100) {
        let c = threshold_c(d.alpha, d.beta, d.q, d.s, d.b_sup).unwrap();
        assert!(threshold_c(d.alpha, d.beta, d.q, 1.1 * d.s, d.b_sup).unwrap() > c);
        assert!(threshold_c(d.alpha, d.beta, d.q, d.s, 1.1 * d.b_sup).unwrap() < c);
        assert!(q_star(d.alpha, d.beta, d.q) > 1.0);
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-13 * b.max(1.0) {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn rho_minimizer_matches_golden_section() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (c, d, q) = (
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.05..0.95),
        );
        let (t, v) = rho_min(c, d, q);
        let tg = golden_min(|t| rho(c, d, q, t), 1e-9, 10.0 * t + 10.0);
        assert!((t - tg).abs() <= 1e-6 * t, "{t} vs {tg}");
        assert!((v - rho(c, d, q, tg)).abs() <= 1e-10 * v.abs());
        assert!(v < 0.0);
    }
}
