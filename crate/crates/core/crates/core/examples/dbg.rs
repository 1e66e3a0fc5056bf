use smpr::kernels::*;
fn main() {
    let n = 200;
    let mut s = 0.0;
    for i in 0..n {
        let th = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
        let x = th.cos();
        let a = x.acos(); let b = 0.2f64.acos();
        s += 0.5 * (theta_log_nome(0.3, 0.5*(a-b)) + theta_log_nome(0.3, 0.5*(a+b)));
    }
    println!("{}", s / n as f64);
    for al in [0.0, 0.5, 1.0, 1.5, 3.0] {
        let q: f64 = (-0.3f64).exp();
        let d: f64 = 1.0 + 2.0 * (1..60).map(|j| q.powi(j*j) * (2.0*j as f64*al).cos()).sum::<f64>();
        println!("{al} {} {}", theta_log_nome(0.3, al), d);
    }
}
