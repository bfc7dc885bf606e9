//! Channel generation through sounding, shortlisting and search.

use std::f64::consts::PI;

use mmbeam_core::beamsel::shortlist;
use mmbeam_core::channel::{draw_realization, ChannelRealization, ClusterConfig, Ray};
use mmbeam_core::codebook::{default_bb_codebook, uniform_codebook, Codebooks};
use mmbeam_core::geometry::{PlanarArray, SubarrayLayout};
use mmbeam_core::search::{exhaustive_search, restricted_search, DEFAULT_COMBINATION_CAP};
use mmbeam_core::sounding::{add_noise, measure_ray_expansion, MeasurementTensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, sigma2: f64) -> (MeasurementTensor, Codebooks) {
    let tx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(4, 0.5).unwrap(), 2).unwrap();
    let rx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(2, 0.5).unwrap(), 2).unwrap();
    let cb = Codebooks::new(
        uniform_codebook(-PI / 3.0, PI / 3.0, 5, PI / 2.0).unwrap(),
        uniform_codebook(-PI / 2.0, PI / 2.0, 4, PI / 2.0).unwrap(),
        default_bb_codebook(2, 2).unwrap(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = draw_realization(&ClusterConfig::default(), &tx, &rx, &mut rng).unwrap();
    let clean = measure_ray_expansion(&ch, &cb);
    let t = if sigma2 > 0.0 {
        add_noise(&clean, sigma2, &mut rng).unwrap()
    } else {
        clean
    };
    (t, cb)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shortlist_search_never_beats_exhaustive(seed in any::<u64>(), snr_db in -10.0f64..20.0) {
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let (t, cb) = setup(seed, sigma2);
        let full = exhaustive_search(&t, &cb.bb, sigma2, DEFAULT_COMBINATION_CAP).unwrap();
        let mut prev = full.mutual_info;
        for p in (1..=4).rev() {
            let (rx, tx) = shortlist(&t, p, p).unwrap();
            let r = restricted_search(&t, &cb.bb, sigma2, &rx, &tx, DEFAULT_COMBINATION_CAP).unwrap();
            prop_assert!(r.mutual_info <= prev + 1e-12);
            prev = r.mutual_info;
        }
    }

    #[test]
    fn full_candidate_lists_reproduce_exhaustive(seed in any::<u64>()) {
        let (t, cb) = setup(seed, 0.1);
        let full = exhaustive_search(&t, &cb.bb, 0.1, DEFAULT_COMBINATION_CAP).unwrap();
        let rx: Vec<usize> = (0..cb.rx_rf.len()).rev().collect();
        let tx: Vec<usize> = (0..cb.tx_rf.len()).collect();
        let r = restricted_search(&t, &cb.bb, 0.1, &rx, &tx, DEFAULT_COMBINATION_CAP).unwrap();
        prop_assert_eq!(r, full);
    }

    #[test]
    fn single_ray_picks_its_own_beams(rx_beam in 0usize..4, tx_beam in 0usize..5, phase in 0.0f64..(2.0 * PI)) {
        let tx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(8, 0.5).unwrap(), 2).unwrap();
        let rx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(8, 0.5).unwrap(), 2).unwrap();
        let cb = Codebooks::new(
            uniform_codebook(-PI / 3.0, PI / 3.0, 5, PI / 2.0).unwrap(),
            uniform_codebook(-PI / 3.0, PI / 3.0, 4, PI / 2.0).unwrap(),
            default_bb_codebook(2, 2).unwrap(),
        );
        let ray = Ray {
            gain_magnitude: 1.0,
            initial_phase: phase,
            delay: 0.0,
            doppler: 0.0,
            aoa: cb.rx_rf.beams()[rx_beam],
            aod: cb.tx_rf.beams()[tx_beam],
        };
        let t = measure_ray_expansion(&ChannelRealization::new(vec![ray], tx, rx), &cb);
        let (rx_list, tx_list) = shortlist(&t, 1, 1).unwrap();
        prop_assert_eq!(rx_list, vec![rx_beam]);
        prop_assert_eq!(tx_list, vec![tx_beam]);
        let r = exhaustive_search(&t, &cb.bb, 1.0, DEFAULT_COMBINATION_CAP).unwrap();
        prop_assert!(r.selection.rx_assignment.indices().contains(&rx_beam));
        prop_assert!(r.selection.tx_assignment.indices().contains(&tx_beam));
    }
}
