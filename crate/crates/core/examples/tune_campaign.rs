// temporary tuning probe: full-pipeline ensemble statistics
use casimir::pipeline::stages::*;
use casimir::pipeline::CampaignConfig;

fn stats(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    (m, sd)
}
fn median(v: &mut Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() {
    let nseeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let cfg = CampaignConfig::default();
    let app = cfg.apparatus.clone();
    let truth_ccas = app.c_cas_true();
    let truth_kc = app.casimir_kc_true;

    let mut nsel = std::collections::BTreeMap::new();
    let mut prob9 = Vec::new();
    let mut ccas = Vec::new();
    let mut ccas_sig = Vec::new();
    let mut kc = Vec::new();
    let mut kc_rel_sig = Vec::new();
    let mut expn = Vec::new();
    let mut expn_sig = Vec::new();
    let mut wedge_dev = Vec::new();
    let mut wedge_sig = Vec::new();
    let mut drift_kc = Vec::new();
    let mut drift_kc_sig = Vec::new();
    let mut cal_inband = 0usize;
    let mut cal_ok = 0usize;
    let mut failures = 0usize;

    for seed in 0..nseeds {
        let runs = match simulate_calibration_runs(&cfg, seed) { Ok(r) => r, Err(_) => { failures += 1; continue } };
        let cal = match stage_calibrate(&cfg, -58e-3, &runs) { Ok((c, _)) => c, Err(_) => { failures += 1; continue } };
        cal_ok += 1;
        let inband = (cal.delta_nu2_offset - 6.0).abs() < 1.0
            && (cal.d0 + 3.30e-7).abs() < 0.32e-7
            && (cal.c_el - 4.24e-13).abs() < 0.11e-13
            && (cal.v0 + 60.2e-3).abs() < 1.7e-3;
        if inband { cal_inband += 1; }
        let ext = match simulate_extraction_run(&cfg, seed) { Ok(r) => r, Err(_) => { failures += 1; continue } };
        let out = match stage_extract_casimir(&cfg, &cal, &runs, &ext) { Ok(o) => o, Err(_) => { failures += 1; continue } };
        *nsel.entry(out.selected_n).or_insert(0usize) += 1;
        for (n, p) in &out.selection_trace {
            if *n == 9 { prob9.push(*p); }
        }
        ccas.push(out.casimir.c_cas);
        ccas_sig.push(out.casimir.sigma_c_cas);
        kc.push(out.casimir.kc);
        kc_rel_sig.push(out.casimir.sigma_kc / out.casimir.kc);
        expn.push(out.exponent.exponent);
        expn_sig.push(out.exponent.sigma_exponent);
        wedge_dev.push(out.wedge.deviation);
        wedge_sig.push(out.wedge.sigma_deviation);
        drift_kc.push(out.drift.casimir.kc);
        drift_kc_sig.push(out.drift.casimir.sigma_kc);
    }

    println!("failures: {failures}/{nseeds}; calibration in published band: {cal_inband}/{cal_ok}");
    println!("selected-n histogram: {:?}", nsel);
    println!("median prob(n=9): {:.3}", median(&mut prob9));
    let (m, sd) = stats(&ccas);
    println!("c_cas: mean {:.4e} (truth {:.4e}, pub 2.34e-28) sd {:.2e}; |mean-pub| = {:.2e}", m, truth_ccas, sd, (m - 2.34e-28).abs());
    println!("c_cas reported sigma median: {:.2e} (pub 0.34e-28)", median(&mut ccas_sig));
    let (m, sd) = stats(&kc);
    println!("kc: mean {:.4e} (truth {:.4e}) sd {:.2e} rel-scatter {:.1}%", m, truth_kc, sd, sd / truth_kc * 100.0);
    println!("kc reported rel sigma median: {:.1}%", median(&mut kc_rel_sig) * 100.0);
    let (m, sd) = stats(&expn);
    println!("exponent: mean {:.3} sd {:.3}; reported sigma median {:.3}", m, sd, median(&mut expn_sig));
    let (m, sd) = stats(&wedge_dev);
    println!("wedge: mean {:.1} nm sd {:.1} nm; reported sigma median {:.1} nm", m * 1e9, sd * 1e9, median(&mut wedge_sig) * 1e9);
    let (m, sd) = stats(&drift_kc);
    println!("drift-fit kc: mean {:.4e} sd {:.2e}; reported sigma median {:.2e} (pub band 0.10e-27)", m, sd, median(&mut drift_kc_sig));
}
