use casimir::pipeline::stages::*;
use casimir::pipeline::CampaignConfig;
fn main() {
    let cfg = CampaignConfig::default();
    let runs = simulate_calibration_runs(&cfg, 3).unwrap();
    let (cal, _) = stage_calibrate(&cfg, -58e-3, &runs).unwrap();
    let ext = match simulate_extraction_run(&cfg, 3) { Ok(r) => r, Err(e) => { println!("sim: {e}"); return } };
    println!("extraction run: {} points, first d_s {:.2e}", ext.points.len(), ext.points[0].d_s);
    match stage_extract_casimir(&cfg, &cal, &runs, &ext) {
        Ok(o) => println!("ok n={}", o.selected_n),
        Err(e) => println!("extract: {e}"),
    }
}
