// temporary tuning probe
use casimir::fit::lorentzian::fit_lorentzian;
use casimir::sim::noise::NoiseConfig;
use casimir::sim::spectrum::synthesize_spectrum;

fn main() {
    for floor in [0.85e-7, 0.9e-7, 0.95e-7, 1.0e-7] {
        let mut centers = Vec::new();
        let mut sig_rep = Vec::new();
        for seed in 0..1000u64 {
            let noise = NoiseConfig { rng_seed: seed, spectrum_noise_floor: floor, ..NoiseConfig::default() };
            let spec = synthesize_spectrum(138.275, 0.138275, &noise, 0.0).unwrap();
            let fit = fit_lorentzian(&spec, 7e-3).unwrap();
            centers.push(fit.params.center);
            sig_rep.push(fit.fit.sigma(0));
        }
        let n = centers.len() as f64;
        let mean = centers.iter().sum::<f64>() / n;
        let sd = (centers.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        sig_rep.sort_by(f64::total_cmp);
        println!("floor {:.1e}: scatter = {:.2} mHz, bias = {:.3} mHz, median raw sigma = {:.2} mHz",
            floor, sd * 1e3, (mean - 138.275) * 1e3, sig_rep[500] * 1e3);
    }
}
