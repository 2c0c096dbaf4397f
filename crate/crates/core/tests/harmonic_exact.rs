use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use oodeval::outlier_models::{average_path_length, harmonic};

fn exact_harmonic(n: usize) -> BigRational {
    let mut h = BigRational::zero();
    for i in 1..=n {
        h += BigRational::new(BigInt::one(), BigInt::from(i));
    }
    h
}

#[test]
fn harmonic_numbers_match_rationals() {
    for n in (1..=60).chain([100, 257, 1000]) {
        let exact = exact_harmonic(n).to_f64().unwrap();
        let got: f64 = harmonic(n);
        assert!((got - exact).abs() <= 4.0 * f64::EPSILON * exact, "H({n}) = {got}, exact {exact}");
    }
}

#[test]
fn average_path_length_closed_form() {
    for n in [2usize, 3, 10, 256, 1000] {
        let h = exact_harmonic(n - 1);
        let c = BigRational::from_integer(2.into()) * h
            - BigRational::new(BigInt::from(2 * (n - 1)), BigInt::from(n));
        let exact = c.to_f64().unwrap();
        let got: f64 = average_path_length(n);
        assert!((got - exact).abs() <= 1e-12 * exact.max(1.0), "c({n}) = {got}, exact {exact}");
    }
    assert_eq!(average_path_length::<f64>(1), 0.0);
}

#[test]
fn asymptotic_branch_is_continuous() {
    let n = 1_000_000;
    let below: f64 = harmonic(n);
    let above: f64 = harmonic(n + 1);
    assert!((above - below - 1.0 / (n + 1) as f64).abs() < 1e-12);
}
