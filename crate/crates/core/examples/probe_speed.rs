use codimlab_core::geometry::{make_flat, make_lipschitz_graph, ProfileSpec};
use codimlab_core::numeric::adaptive_integral;
use codimlab_core::smooth_distance::{d_exponent, EvalPath};
use std::time::Instant;

fn main() {
    let sine =
        make_lipschitz_graph(3, ProfileSpec::Sine { amplitude: 0.1, frequency: 1.0 }, 0.1, 10.0, 0.01)
            .unwrap();
    // Accuracy against a brute-force reference with analytic flat tails.
    let x = [0.5, 0.9, 0.4];
    let p = 2.0f64;
    let brute = {
        let lam = 0.1f64;
        let big = 2.0e5;
        let mut f = |t: f64| {
            let phi = lam * t.sin();
            let dphi = lam * t.cos();
            let r2 = (x[0] - t).powi(2) + (x[1] - phi).powi(2) + x[2] * x[2];
            (1.0 + dphi * dphi).sqrt() * r2.powf(-0.5 * p)
        };
        let body = adaptive_integral(&mut f, -big, big, 1e-13).unwrap();
        let mean_speed = ProfileSpec::Sine { amplitude: 0.1, frequency: 1.0 }.mean_speed();
        body + 2.0 * mean_speed * big.powf(1.0 - p) / (p - 1.0)
    };
    let d_ref = brute.powf(-1.0);
    let v = d_exponent(&sine, 1.0, &x, EvalPath::Parametric).unwrap();
    println!("sine D: panel={:.12e} ref={:.12e} rel={:.2e}", v.value, d_ref, (v.value - d_ref).abs() / d_ref);

    // Zero profile against the flat fast path.
    let zero = make_lipschitz_graph(3, ProfileSpec::Zero, 0.0, 10.0, 0.01).unwrap();
    let flat = make_flat(1, 3, 10.0, 0.01).unwrap();
    let a = d_exponent(&zero, 1.0, &x, EvalPath::Parametric).unwrap().value;
    let b = d_exponent(&flat, 1.0, &x, EvalPath::Parametric).unwrap().value;
    println!("zero-profile vs flat: rel={:.2e}", (a - b).abs() / b);

    // Throughput.
    let t0 = Instant::now();
    let mut acc = 0.0;
    for i in 0..20000 {
        let q = [i as f64 * 1e-4, 0.7, 0.3];
        acc += d_exponent(&sine, 1.0, &q, EvalPath::Parametric).unwrap().value;
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("sine eval: {:.1} us/point (acc {acc:.3})", dt / 20000.0 * 1e6);
}
