use groupdecode::dataio::{read_dataset, write_dataset, ChannelLayout, EpochedDataset, Trial};
use groupdecode::nn::{read_checkpoint, write_checkpoint, Activation, ModelConfig, WavenetClassifier};
use groupdecode::seeding;
use groupdecode::stats::{wilcoxon_signed_rank, Sided};
use rand::Rng;

use crate::Verdict;

/// Exact p by enumerating every sign assignment of the midranks.
fn enumerate_p(d: &[f64], sided: Sided) -> f64 {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|v| {
            let less = d.iter().filter(|w| w.abs() < v.abs()).count() as f64;
            let ties = d.iter().filter(|w| w.abs() == v.abs()).count() as f64;
            less + (ties + 1.0) / 2.0
        })
        .collect();
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let centre = ranks.iter().sum::<f64>() / 2.0;
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let hit = match sided {
            Sided::Greater => s >= w - 1e-9,
            Sided::Less => s <= w + 1e-9,
            Sided::Two => (s - centre).abs() >= (w - centre).abs() - 1e-9,
        };
        hits += hit as u64;
    }
    hits as f64 / (1u64 << n) as f64
}

pub fn wilcoxon() -> Verdict {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=10usize {
        for rep in 0..40u64 {
            let mut rng = seeding::stream(rep, &[0xC1, n as u64]);
            // small integer differences force ties
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            let zeros = vec![0.0; n];
            for sided in [Sided::Greater, Sided::Less, Sided::Two] {
                let got = wilcoxon_signed_rank(&d, &zeros, sided).unwrap().p;
                worst = worst.max((got - enumerate_p(&d, sided)).abs());
                cases += 1;
            }
        }
    }
    let p123 = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0; 3], Sided::Two).unwrap().p;
    Verdict::new(
        worst < 1e-12 && (p123 - 0.25).abs() < 1e-12,
        format!("{cases} cases n <= 10, max |p - enumeration| {worst:.1e}; diffs [1,2,3] two-sided p = {p123}"),
    )
}

fn random_dataset(rng: &mut impl Rng) -> EpochedDataset {
    let (s, k, n) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
    let (c, t) = (rng.random_range(1..=6), rng.random_range(1..=24));
    let trials = (0..s)
        .map(|_| {
            (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            // raw bit patterns cover subnormals and extremes
                            let data = (0..c * t)
                                .map(|_| loop {
                                    let v = f32::from_bits(rng.random());
                                    if v.is_finite() {
                                        break v;
                                    }
                                })
                                .collect();
                            Trial::new(c, t, data).unwrap()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let subjects = (0..s).map(|i| format!("sub{i}")).collect();
    EpochedDataset::new(subjects, k, rng.random_range(50.0..1000.0), rng.random_range(-0.5..0.5), ChannelLayout::rings(c), trials)
        .unwrap()
}

pub fn round_trip() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut ok_ds = 0;
    let mut ok_ck = 0;
    let n = 25;
    for case in 0..n {
        let mut rng = seeding::stream(case, &[0xE1]);
        let ds = random_dataset(&mut rng);
        let path = dir.path().join(format!("ds{case}"));
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        let bitwise = ds.subjects == back.subjects
            && (0..ds.n_subjects()).all(|s| {
                (0..ds.n_classes).all(|c| {
                    ds.trials(s, c).iter().zip(back.trials(s, c)).all(|(a, b)| {
                        a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
                    })
                })
            });
        ok_ds += (back == ds && bitwise) as usize;

        let e = rng.random_range(0..=4);
        let cfg = ModelConfig {
            n_input_channels: rng.random_range(1..=5),
            n_classes: rng.random_range(2..=6),
            n_timesteps: 32,
            n_conv_layers: rng.random_range(1..=5),
            hidden_channels: rng.random_range(1..=6),
            fc_hidden: rng.random_range(1..=8),
            dropout: rng.random_range(0.0..0.9),
            embedding_size: e,
            n_subjects: rng.random_range(1..=4),
            activation: if rng.random() { Activation::Asinh } else { Activation::Identity },
            bias: rng.random(),
            ..ModelConfig::default()
        };
        let model = WavenetClassifier::<f32>::new(cfg, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        let bitwise = model
            .params()
            .iter()
            .flatten()
            .zip(back.params().iter().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ok_ck += (back == model && bitwise) as usize;
    }
    Verdict::new(
        ok_ds == n as usize && ok_ck == n as usize,
        format!("{ok_ds}/{n} datasets and {ok_ck}/{n} checkpoints bit-identical after write and read"),
    )
}
