use exact_tsa::data::{average_series, expand_series, net_demand, synth_series, CasePreset, SeriesFrame};
use exact_tsa::tsa::{disaggregate, Partition};
use proptest::prelude::*;

fn frame(demand: Vec<f64>, cf: Vec<f64>) -> SeriesFrame {
    SeriesFrame::new(demand, vec!["solar".into()], vec![cf]).unwrap()
}

fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..800.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn averaging_is_idempotent((d, cf, flags) in series()) {
        let f = frame(d, cf);
        let p = disaggregate(&flags);
        let reps = average_series(&f, &p).unwrap();
        let again = average_series(&expand_series(&reps, &p, &f), &p).unwrap();
        prop_assert_eq!(&reps.weights, &again.weights);
        for (a, b) in reps.avg_demand.iter().zip(&again.avg_demand) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn averages_stay_in_their_window((d, cf, _) in series(), size in 1usize..8) {
        let f = frame(d.clone(), cf);
        let n = d.len();
        let sizes: Vec<usize> = (0..n.div_ceil(size)).map(|i| size.min(n - i * size)).collect();
        let p = Partition::single_linked(n, &sizes);
        let reps = average_series(&f, &p).unwrap();
        prop_assert_eq!(reps.weights.iter().sum::<usize>(), n);
        let mut start = 0;
        for (k, &w) in reps.weights.iter().enumerate() {
            let window = &d[start..start + w];
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(reps.avg_demand[k] >= lo - 1e-9 && reps.avg_demand[k] <= hi + 1e-9);
            start += w;
        }
    }

    #[test]
    fn net_demand_is_bounded((d, cf, _) in series()) {
        let f = frame(d.clone(), cf);
        let nd = net_demand(&f, &CasePreset::BessSolar.config());
        for (n, d) in nd.iter().zip(&d) {
            prop_assert!(*n >= 0.0 && n <= d);
        }
    }
}

#[test]
fn identity_partition_round_trips() {
    let f = synth_series(3, 1, CasePreset::PhsWind.profile()).unwrap().window(0..500);
    let p = Partition::identity(500);
    let reps = average_series(&f, &p).unwrap();
    assert_eq!(expand_series(&reps, &p, &f), f);
    assert!(reps.weights.iter().all(|&w| w == 1));
}
