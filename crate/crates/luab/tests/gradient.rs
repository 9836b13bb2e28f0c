use abkit_luab::gradcheck::random_instance;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let inst = random_instance(seed);
        let r = inst.check(STEP, FLOOR).unwrap();
        assert!(
            r.max_relative_error < 1e-4,
            "instance {seed}: relative error {} at parameter {} of {}",
            r.max_relative_error,
            r.worst_param,
            r.params
        );
        worst = worst.max(r.max_relative_error);
    }
    eprintln!("worst relative error over 50 instances: {worst:.3e}");
}
