use thermaug::dataio::{split_by_phase, SplitMode};
use thermaug::labeling::{label_values, smooth_ma, LabelConfig, TrendClass};
use thermaug::sim::{generate_dataset, SimConfig};
use thermaug::synth::{QuantizeMode, Synthesizer, SynthKind, SynthModel, VqConfig};

fn min_smoothed_diff(raw: &[f64]) -> f64 {
    let seg = &raw[..180];
    let sm = smooth_ma(seg, 5).unwrap();
    sm.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn main() {
    let sim = SimConfig { seed: 42, ..SimConfig::default() };
    let records = generate_dataset(&sim).unwrap();
    let lcfg = LabelConfig::default();
    let split = split_by_phase(&records, 0.2, 7, SplitMode::Shuffled).unwrap();
    println!("scaler std = {:.3}", split.scaler.std);
    let series: Vec<Vec<f64>> = split.train.iter().map(|r| split.scaler.apply_series(&r.values)).collect();
    let labels: Vec<TrendClass> = split.train.iter().map(|r| label_values(&r.values, &lcfg).unwrap()).collect();

    let cfg = VqConfig { stage1_epochs: 120, stage2_epochs: 400, learning_rate: 3e-3, batch_size: 4, ..VqConfig::default() };
    let mut model = SynthModel::new(SynthKind::Vq, &cfg, 1).unwrap();
    let report = model.fit(&series, &labels, 1).unwrap();
    println!("recon {:.2e} ce {:.3}", report.reconstruction_mse.unwrap(), report.prior_cross_entropy.unwrap());

    if let SynthModel::Vq(m) = &model {
        // do reconstructions of real class-0 series keep their label?
        let mut keep = 0;
        let mut total = 0;
        let mut worst: Vec<f64> = Vec::new();
        for (s, l) in series.iter().zip(&labels) {
            if *l != TrendClass::MonotonicPositive { continue; }
            total += 1;
            let rec = m.reconstruct(s, QuantizeMode::Codebook);
            let raw = split.scaler.invert_series(&rec);
            worst.push(min_smoothed_diff(&raw));
            if label_values(&raw, &lcfg).unwrap() == TrendClass::MonotonicPositive { keep += 1; }
        }
        worst.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("class0 recon keeps label: {keep}/{total}; min smoothed diffs (degC/min): {:?}",
            &worst[..worst.len().min(6)]);
        // and raw originals for scale
        let mut orig: Vec<f64> = series.iter().zip(&labels)
            .filter(|(_, l)| **l == TrendClass::MonotonicPositive)
            .map(|(s, _)| min_smoothed_diff(&split.scaler.invert_series(s)))
            .collect();
        orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("original class0 min smoothed diffs: {:?}", &orig[..orig.len().min(6)]);
    }

    for class in [TrendClass::MonotonicPositive, TrendClass::MonotonicNegative] {
        let samples = model.sample(50, Some(class), 99).unwrap();
        let mut matches = 0;
        let mut diffs = Vec::new();
        for s in &samples {
            let raw = split.scaler.invert_series(s);
            if label_values(&raw, &lcfg).unwrap() == class { matches += 1; }
            if class == TrendClass::MonotonicPositive { diffs.push(min_smoothed_diff(&raw)); }
        }
        diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("{class:?}: {matches}/50; sample min-diffs head {:?}", &diffs[..diffs.len().min(5)]);
    }
}
