//! Generates a Doppler-faded tap set and prints the empirical tap powers and
//! the autocorrelation of the first tap against `J0(2π·fd·τ)`.

use num_complex::Complex64;
use stfs_sim::channel::{gen_taps, Doppler, PowerDelayProfile};
use stfs_sim::rng::substream;

fn main() -> stfs_sim::Result<()> {
    let pdp = PowerDelayProfile::exponential(4, 3.0)?;
    let doppler = Doppler { fd_norm: 0.01, oscillators: 16 };
    let lags = [0usize, 10, 25, 50, 100];
    let draws = 4000;
    let mut power = vec![0.0; pdp.len()];
    let mut corr = vec![Complex64::new(0.0, 0.0); lags.len()];
    for i in 0..draws {
        let taps = gen_taps(&pdp, doppler, &mut substream(11, &[i]))?;
        let h0 = taps.current();
        for (p, h) in power.iter_mut().zip(&h0) {
            *p += h.norm_sqr() / draws as f64;
        }
        for (c, &lag) in corr.iter_mut().zip(&lags) {
            *c += taps.at(lag as f64)[0] * h0[0].conj() / draws as f64;
        }
    }
    println!("tap  target    measured");
    for (k, (w, p)) in pdp.weights().iter().zip(&power).enumerate() {
        println!("{k:>3}  {w:.4}    {p:.4}");
    }
    println!("\nlag  J0-model  measured");
    for (&lag, c) in lags.iter().zip(&corr) {
        let model = pdp.weights()[0] * bessel_j0(2.0 * std::f64::consts::PI * doppler.fd_norm * lag as f64);
        println!("{lag:>3}  {model:+.4}   {:+.4}", c.re);
    }
    Ok(())
}

/// Power series for `J0`, adequate for the small arguments printed here.
fn bessel_j0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= -(x * x / 4.0) / (k * k) as f64;
        sum += term;
    }
    sum
}
