// Scratch calibration scan over the LRD innovation scale. DELETE BEFORE RELEASE.
use fraccurve_core::cointegration::{
    lrd_srd_split, ratio_estimate_qd, sequential_rank_test, vr_statistics, KRule, Statistic,
};
use fraccurve_core::covariance::{eigen, sample_cov, Projection};
use fraccurve_core::dgp::{gen_dgp, DGPParams};
use fraccurve_core::limitsim::build_cv_table;
use fraccurve_core::memest::{estimate_d, estimate_d_minus_b, DMethod};
use fraccurve_core::rng::substream;
use fraccurve_core::spectra::power_bandwidth;
use rayon::prelude::*;

#[test]
fn sigma_scan() {
    let reps = 300usize;
    let d_grid: Vec<f64> = (14..=24).map(|i| i as f64 * 0.05).collect();
    let cv = build_cv_table(&[1, 2, 3, 4], 0.5, &d_grid, &[0.05], 1000, 4000, 424242).unwrap();
    let cv3 = cv.lookup(3, 0.5, 0.95, 0.05).unwrap().crit_max;
    let cv4 = cv.lookup(4, 0.5, 0.95, 0.05).unwrap().crit_max;
    eprintln!("cv built: q3={cv3:.3} q4={cv4:.3}");

    for (sig_idx, &sigma) in [1.0f64, 1.25, 1.5, 2.0, 3.0].iter().enumerate() {
        let params = DGPParams { lrd_scale: sigma, ..DGPParams::default() };

        // T = 200 battery
        let rows200: Vec<[f64; 8]> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(777, &[sig_idx as u64, 0, rep as u64]);
                let (series, _) = gen_dgp(&params, 200, &mut rng).unwrap();
                let m = power_bandwidth(200, 0.65);
                let d_hat =
                    estimate_d(&series, 20, 5, m, &mut rng, DMethod::Differenced).unwrap().value;
                let seq_true = sequential_rank_test(
                    &series, 4, KRule::Offset(2), 0.5, 0.05, 0.95, &cv, Statistic::Max,
                ).unwrap().q_bar;
                let seq_plug = sequential_rank_test(
                    &series, 4, KRule::Offset(2), 0.5, 0.05, d_hat, &cv, Statistic::Max,
                ).unwrap().q_bar;
                let eigs = eigen(&sample_cov(&series, true)).unwrap();
                let (q_lrs, _) = ratio_estimate_qd(&eigs, 6).unwrap();
                let size = vr_statistics(&series, 3, 4, 0.5).unwrap().stat_max > cv3;
                let power = vr_statistics(&series, 4, 4, 0.5).unwrap().stat_max > cv4;
                let db =
                    estimate_d_minus_b(&series, 3, 20, 2, m, &mut rng).unwrap().value;
                let p_bar = Projection::from_frame(eigs.leading(3)).unwrap();
                let split = lrd_srd_split(&series, &p_bar, power_bandwidth(200, 0.4), 4).unwrap();
                [
                    d_hat,
                    seq_true as f64,
                    seq_plug as f64,
                    q_lrs as f64,
                    size as u8 as f64,
                    power as u8 as f64,
                    db,
                    (split.q_db == 2) as u8 as f64,
                ]
            })
            .collect();

        // T = 500 battery
        let rows500: Vec<[f64; 4]> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(777, &[sig_idx as u64, 1, rep as u64]);
                let (series, _) = gen_dgp(&params, 500, &mut rng).unwrap();
                let m = power_bandwidth(500, 0.65);
                let d_hat =
                    estimate_d(&series, 20, 5, m, &mut rng, DMethod::Differenced).unwrap().value;
                let seq_true = sequential_rank_test(
                    &series, 4, KRule::Offset(2), 0.5, 0.05, 0.95, &cv, Statistic::Max,
                ).unwrap().q_bar;
                let seq_plug = sequential_rank_test(
                    &series, 4, KRule::Offset(2), 0.5, 0.05, d_hat, &cv, Statistic::Max,
                ).unwrap().q_bar;
                let eigs = eigen(&sample_cov(&series, true)).unwrap();
                let (q_lrs, _) = ratio_estimate_qd(&eigs, 6).unwrap();
                [d_hat, seq_true as f64, seq_plug as f64, q_lrs as f64]
            })
            .collect();

        // T = 1000 battery
        let rows1000: Vec<[f64; 5]> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(777, &[sig_idx as u64, 2, rep as u64]);
                let (series, _) = gen_dgp(&params, 1000, &mut rng).unwrap();
                let m = power_bandwidth(1000, 0.65);
                let size = vr_statistics(&series, 3, 4, 0.5).unwrap().stat_max > cv3;
                let power = vr_statistics(&series, 4, 4, 0.5).unwrap().stat_max > cv4;
                let db =
                    estimate_d_minus_b(&series, 3, 20, 2, m, &mut rng).unwrap().value;
                let eigs = eigen(&sample_cov(&series, true)).unwrap();
                let p_bar = Projection::from_frame(eigs.leading(3)).unwrap();
                let split =
                    lrd_srd_split(&series, &p_bar, power_bandwidth(1000, 0.4), 4).unwrap();
                [
                    size as u8 as f64,
                    power as u8 as f64,
                    db,
                    (split.q_db == 2) as u8 as f64,
                    0.0,
                ]
            })
            .collect();

        let n = reps as f64;
        let mean = |it: Box<dyn Iterator<Item = f64>>| it.sum::<f64>() / n;
        let freq = |it: Box<dyn Iterator<Item = bool>>| it.filter(|&b| b).count() as f64 / n;

        let t3_200 = mean(Box::new(rows200.iter().map(|r| r[0]))) - 0.95;
        let t1t_200 = freq(Box::new(rows200.iter().map(|r| r[1] == 3.0)));
        let t1p_200 = freq(Box::new(rows200.iter().map(|r| r[2] == 3.0)));
        let lrs_200 = freq(Box::new(rows200.iter().map(|r| r[3] == 3.0)));
        let size_200 = mean(Box::new(rows200.iter().map(|r| r[4])));
        let pow_200 = mean(Box::new(rows200.iter().map(|r| r[5])));
        let t4_200 = mean(Box::new(rows200.iter().map(|r| r[6]))) - 0.3;
        let t2_200 = mean(Box::new(rows200.iter().map(|r| r[7])));

        let t3_500 = mean(Box::new(rows500.iter().map(|r| r[0]))) - 0.95;
        let t1t_500 = freq(Box::new(rows500.iter().map(|r| r[1] == 3.0)));
        let t1p_500 = freq(Box::new(rows500.iter().map(|r| r[2] == 3.0)));
        let lrs_500 = freq(Box::new(rows500.iter().map(|r| r[3] == 3.0)));

        let size_1000 = mean(Box::new(rows1000.iter().map(|r| r[0])));
        let pow_1000 = mean(Box::new(rows1000.iter().map(|r| r[1])));
        let t4_1000 = mean(Box::new(rows1000.iter().map(|r| r[2]))) - 0.3;
        let t2_1000 = mean(Box::new(rows1000.iter().map(|r| r[3])));

        println!("=== sigma_L = {sigma} ===");
        println!("T1@200  true {t1t_200:.3} plug {t1p_200:.3}   [0.684±0.06]");
        println!("T1@500  true {t1t_500:.3} plug {t1p_500:.3}   [0.909±0.06]");
        println!("LRS@200 {lrs_200:.3}  [0.182±0.06]   LRS@500 {lrs_500:.3}  [0.777±0.06]");
        println!("SP@200  size {size_200:.3} [0.003]  power {pow_200:.3} [0.627]");
        println!("SP@1000 size {size_1000:.3} [0.050±0.03]  power {pow_1000:.3} [>=0.946]");
        println!("T3 bias @200 {t3_200:+.4} [-0.0329±0.012]  @500 {t3_500:+.4} [-0.0117±0.008]");
        println!("T4 bias @200 {t4_200:+.4} [-0.0754±0.02]  @1000 {t4_1000:+.4} [-0.0190±0.012]");
        println!("T2@200  {t2_200:.3} [0.364±0.07]   T2@1000 {t2_1000:.3} [0.767±0.07]");
    }
}
