use proptest::prelude::*;
use specenc::encode::{self, encode_binned, encode_graph, encode_set, preprocess, Encoded, Representation};
use specenc::{BinAggregation, BinConfig, Peak, Spectrum};

/// Raw peaks in arbitrary order, with an optional exact duplicate m/z.
fn raw_spectrum() -> impl Strategy<Value = Spectrum> {
    (
        50.0f64..4_000.0,
        prop::collection::vec((10.0f64..4_000.0, 0.0f64..1e4), 1..60),
        any::<bool>(),
    )
        .prop_map(|(pm, peaks, dup)| {
            let mut peaks: Vec<Peak> = peaks.into_iter().map(|(m, i)| Peak::new(m, i)).collect();
            peaks[0].intensity += 1.0;
            if dup {
                peaks.push(Peak::new(peaks[0].mz, 0.5 * peaks[0].intensity));
            }
            Spectrum { id: "p".into(), precursor_mz: pm, peaks, label: None }
        })
}

fn with_order(s: &Spectrum, peaks: Vec<Peak>) -> Spectrum {
    Spectrum { peaks, ..s.clone() }
}

const BINS: BinConfig = BinConfig {
    min_mz: 0.0,
    max_mz: 5_000.0,
    bin_width: 1.0,
    aggregation: BinAggregation::Sum,
};

proptest! {
    #[test]
    fn encodings_ignore_peak_order(
        (s, shuffled) in raw_spectrum().prop_flat_map(|s| {
            let peaks = s.peaks.clone();
            (Just(s), Just(peaks).prop_shuffle())
        })
    ) {
        let t = with_order(&s, shuffled);
        for repr in [Representation::Binned, Representation::Set, Representation::Graph] {
            let a = encode::encode(&s, repr, &BINS).unwrap().0;
            let b = encode::encode(&t, repr, &BINS).unwrap().0;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn binned_sum_conserves_intensity(s in raw_spectrum(), width in 0.05f64..50.0) {
        let cfg = BinConfig { bin_width: width, ..BINS };
        let pre = preprocess(&s).unwrap();
        let (v, w) = encode_binned(&pre, &cfg).unwrap();
        prop_assert_eq!(w.dropped_peaks, 0);
        prop_assert_eq!(v.values.len(), cfg.n_bins());
        let total: f64 = pre.peaks.iter().map(|p| p.intensity).sum();
        let binned: f64 = v.values.iter().map(|&x| x as f64).sum();
        prop_assert!((binned - total).abs() <= 1e-6 * total, "{} vs {}", binned, total);
    }

    #[test]
    fn binned_max_never_exceeds_precursor(s in raw_spectrum()) {
        let cfg = BinConfig { aggregation: BinAggregation::Max, ..BINS };
        let (v, _) = encode_binned(&preprocess(&s).unwrap(), &cfg).unwrap();
        prop_assert!(v.values.iter().all(|&x| (0.0..=2.0).contains(&x)));
    }

    #[test]
    fn out_of_range_peaks_are_counted(s in raw_spectrum(), cut in 100.0f64..3_000.0) {
        let cfg = BinConfig { max_mz: cut, ..BINS };
        let pre = preprocess(&s).unwrap();
        let (_, w) = encode_binned(&pre, &cfg).unwrap();
        prop_assert_eq!(w.dropped_peaks, pre.peaks.iter().filter(|p| p.mz >= cut).count());
    }

    #[test]
    fn set_keeps_every_peak(s in raw_spectrum()) {
        let pre = preprocess(&s).unwrap();
        let set = encode_set(&pre);
        prop_assert_eq!(set.len(), s.peaks.len() + 1);
        prop_assert_eq!(set.intensity.iter().filter(|&&i| i == 1.0).count() >= 1, true);
        prop_assert_eq!(set.intensity.iter().filter(|&&i| i == 2.0).count(), 1);
    }

    #[test]
    fn graph_is_a_chain(s in raw_spectrum()) {
        let pre = preprocess(&s).unwrap();
        let g = encode_graph(&pre);
        g.validate().unwrap();
        let v = g.num_vertices();
        prop_assert_eq!(v, s.peaks.len() + 2);
        prop_assert_eq!(g.num_arcs(), 2 * (v - 1));
        prop_assert_eq!(g.vertex_attr[0], 0.0);

        let mut out_deg = vec![0usize; v];
        let mut in_deg = vec![0usize; v];
        for &(a, b) in &g.edge_index {
            prop_assert_eq!(a.abs_diff(b), 1);
            out_deg[a] += 1;
            in_deg[b] += 1;
        }
        prop_assert_eq!(&out_deg, &in_deg);
        prop_assert_eq!(out_deg[0], 1);
        prop_assert_eq!(out_deg[v - 1], 1);
        prop_assert!(out_deg[1..v - 1].iter().all(|&d| d == 2));

        // Forward arcs telescope from the sentinel at 0 to the largest m/z.
        let forward: f64 = g
            .edge_index
            .iter()
            .zip(&g.edge_attr)
            .filter(|((a, b), _)| b > a)
            .map(|(_, d)| d)
            .sum();
        let top = pre.peaks.last().unwrap().mz;
        prop_assert!((forward - top).abs() <= 1e-9 * top, "{} vs {}", forward, top);
        prop_assert!(g.edge_attr.iter().all(|&d| d >= 0.0));
    }
}

#[test]
fn export_shapes() {
    let s = Spectrum::new("x", 500.0, vec![Peak::new(100.0, 4.0), Peak::new(200.0, 2.0)]);
    let shapes = |repr| -> Vec<Vec<usize>> {
        encode::encode(&s, repr, &BINS)
            .unwrap()
            .0
            .to_tensors()
            .iter()
            .map(|t| t.shape().to_vec())
            .collect()
    };
    assert_eq!(shapes(Representation::Binned), vec![vec![5_000]]);
    assert_eq!(shapes(Representation::Set), vec![vec![3, 2]]);
    assert_eq!(shapes(Representation::Graph), vec![vec![4], vec![2, 6], vec![6]]);
}

#[test]
fn empty_and_silent_spectra_are_rejected() {
    let empty = Spectrum::new("e", 100.0, vec![]);
    let silent = Spectrum::new("z", 100.0, vec![Peak::new(50.0, 0.0)]);
    for s in [empty, silent] {
        assert!(encode::encode(&s, Representation::Set, &BINS).is_err());
    }
}

#[test]
fn encoded_reports_its_representation() {
    let s = Spectrum::new("x", 500.0, vec![Peak::new(100.0, 1.0)]);
    for repr in [Representation::Binned, Representation::Set, Representation::Graph] {
        let (e, _): (Encoded, _) = encode::encode(&s, repr, &BINS).unwrap();
        assert_eq!(e.representation(), repr);
    }
}
