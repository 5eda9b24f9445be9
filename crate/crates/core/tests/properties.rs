use blindfl::channel::{self, ChannelProfile};
use blindfl::ofdm::{self, Modem};
use blindfl::par::{self, Exec};
use blindfl::quantizer::{self, design_gaussian_quantizer};
use blindfl::receiver::{self, FreqResponses, Instrumentation};
use blindfl::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #[test]
    fn pack_then_unpack_is_identity(g in vec(-1e3..1e3f64, 1..600)) {
        let packed = ofdm::pack_gradient(&g).unwrap();
        prop_assert_eq!(packed.len(), g.len().div_ceil(2));
        prop_assert_eq!(ofdm::unpack_gradient(&packed, g.len()).unwrap(), g);
    }

    #[test]
    fn segments_cover_the_symbols(s in vec(complex(), 1..300), n in 1usize..64) {
        let segs = ofdm::segment(&s, n).unwrap();
        prop_assert_eq!(segs.len(), s.len().div_ceil(n));
        let joined: Vec<Complex64> = segs.iter().flat_map(|x| x.values[..x.populated].to_vec()).collect();
        prop_assert_eq!(joined, s);
        prop_assert!(segs.iter().all(|x| x.values[x.populated..].iter().all(|v| *v == Complex64::new(0.0, 0.0))));
    }

    #[test]
    fn modulate_then_demodulate_recovers_symbols(log_n in 0u32..9, cp_frac in 0.0..1.0f64, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let n_cp = (cp_frac * n as f64) as usize;
        let modem = Modem::new(n, n_cp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rand::Rng::random(&mut rng), rand::Rng::random(&mut rng))).collect();
        let word = modem.modulate(&x).unwrap();
        prop_assert!(word.has_cyclic_prefix());
        let back = modem.demodulate(modem.remove_cp(&word.samples).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn quantized_samples_lie_in_the_level_set(bits in 1u32..=6, block in vec(complex(), 1..200)) {
        let spec = design_gaussian_quantizer(bits).unwrap();
        let mut q = block.clone();
        let scale = quantizer::quantize_block(&spec, &mut q);
        let Some(scale) = scale else {
            prop_assert!(block.iter().all(|v| v.norm() == 0.0));
            return Ok(());
        };
        let on_level = |v: f64| spec.levels().iter().any(|l| (l * scale - v).abs() <= 1e-12 * scale.max(1.0));
        prop_assert!(q.iter().all(|v| on_level(v.re) && on_level(v.im)));
    }

    #[test]
    fn quantizer_is_monotone(bits in 1u32..=8, a in -6.0..6.0f64, b in -6.0..6.0f64) {
        let spec = design_gaussian_quantizer(bits).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(spec.quantize_unit(lo) <= spec.quantize_unit(hi));
        prop_assert_eq!(spec.quantize_unit(-a), -spec.quantize_unit(a));
    }

    #[test]
    fn joint_combiner_degenerates_to_the_single_sided_ones(
        m in 1usize..4,
        k in 1usize..5,
        n in 1usize..9,
        seed in any::<u64>(),
        eta in 0.0..0.5f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = FreqResponses::from_realization(
            &channel::draw_realization(&ChannelProfile::flat(0.0), m, k, &mut rng),
            &blindfl::fft::Dft::new(n),
            Exec::Sequential,
        );
        let r: Vec<Vec<Complex64>> = (0..k)
            .map(|_| (0..n).map(|_| Complex64::new(rand::Rng::random(&mut rng), rand::Rng::random(&mut rng))).collect())
            .collect();
        let eta_k: Vec<f64> = (0..k).map(|i| eta * (i as f64 + 1.0) / (k as f64 + 1.0)).collect();
        prop_assert_eq!(
            receiver::combine_joint(&r, &h, 0.0, &eta_k).unwrap().y,
            receiver::combine_adc(&r, &h, &eta_k).unwrap().y
        );
        prop_assert_eq!(
            receiver::combine_joint(&r, &h, eta, &vec![0.0; k]).unwrap().y,
            receiver::combine_dac(&r, &h, eta).unwrap().y
        );
    }

    #[test]
    fn five_terms_sum_to_the_combined_output(
        (m, k, n) in (1usize..4, 1usize..5, 1usize..9),
        seed in any::<u64>(),
        eta in 0.0..0.5f64,
        eta_adc in 0.0..0.5f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = FreqResponses::from_realization(
            &channel::draw_realization(&ChannelProfile::flat(0.0), m, k, &mut rng),
            &blindfl::fft::Dft::new(n),
            Exec::Sequential,
        );
        let mut block = |count: usize| -> Vec<Vec<Complex64>> {
            (0..count)
                .map(|_| (0..n).map(|_| Complex64::new(rand::Rng::random(&mut rng), rand::Rng::random(&mut rng))).collect())
                .collect()
        };
        let inst = Instrumentation { symbols: block(m), dac_distortion: Some(block(m)), received: block(k) };
        let eta_k = vec![eta_adc; k];
        let terms = receiver::decompose_terms(Some(&inst), &h, eta, &eta_k).unwrap();
        let y = receiver::combine_joint(&inst.received, &h, eta, &eta_k).unwrap().y;
        for (a, b) in terms.total().iter().zip(&y) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn parallel_and_sequential_execution_agree(seed in any::<u64>(), m in 1usize..5, k in 1usize..6) {
        let profile = ChannelProfile { delays: vec![0, 2, 5], ..ChannelProfile::uniform_three_tap() };
        let modem = Modem::new(16, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<_> = (0..m)
            .map(|_| {
                let x: Vec<Complex64> =
                    (0..16).map(|_| Complex64::new(rand::Rng::random(&mut rng), rand::Rng::random(&mut rng))).collect();
                modem.modulate(&x).unwrap()
            })
            .collect();
        let real = channel::draw_realization(&profile, m, k, &mut rng);
        let run = |exec| {
            channel::transmit(&words, &real, 0.01, exec, |kk| ChaCha8Rng::seed_from_u64(seed ^ kk as u64)).unwrap()
        };
        prop_assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
        let f = |i: usize| (i as f64).sqrt().sin();
        prop_assert_eq!(par::map_range(Exec::Sequential, 100, f), par::map_range(Exec::Parallel, 100, f));
        let h_seq = FreqResponses::from_realization(&real, modem.dft(), Exec::Sequential);
        let h_par = FreqResponses::from_realization(&real, modem.dft(), Exec::Parallel);
        for kk in 0..k {
            prop_assert_eq!(h_seq.summed(kk), h_par.summed(kk));
        }
    }

    #[test]
    fn transmission_is_linear_without_noise(seed in any::<u64>()) {
        let profile = ChannelProfile::flat(0.0);
        let modem = Modem::new(32, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut word = || {
            let x: Vec<Complex64> =
                (0..32).map(|_| Complex64::new(rand::Rng::random(&mut rng), rand::Rng::random(&mut rng))).collect();
            modem.modulate(&x).unwrap()
        };
        let (a, b) = (word(), word());
        let real = channel::draw_realization(&profile, 2, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let zero = |_| ChaCha8Rng::seed_from_u64(0);
        let both = channel::transmit(&[a.clone(), b.clone()], &real, 0.0, Exec::Sequential, zero).unwrap();
        let mut silent_b = b.clone();
        silent_b.samples.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let mut silent_a = a.clone();
        silent_a.samples.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let only_a = channel::transmit(&[a, silent_b], &real, 0.0, Exec::Sequential, zero).unwrap();
        let only_b = channel::transmit(&[silent_a, b], &real, 0.0, Exec::Sequential, zero).unwrap();
        for kk in 0..3 {
            for i in 0..both[kk].len() {
                prop_assert!((both[kk][i] - only_a[kk][i] - only_b[kk][i]).norm() < 1e-12);
            }
        }
    }
}
