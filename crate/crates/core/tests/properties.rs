use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sonarwreck_core::anomaly::{anomaly_map, cosine_distance, pool, Pooling};
use sonarwreck_core::bvh::{nearest_brute_force, Bvh};
use sonarwreck_core::compositor::{composite, tile_offsets, CompositeOptions};
use sonarwreck_core::deformation::{
    apply_field, decode_onehot, encode_onehot, generate_quadrant_field, DeformParams, DeformationField, Fractured,
};
use sonarwreck_core::eval::{confusion, metrics};
use sonarwreck_core::geometry::{Ray, Triangle, Vec3};
use sonarwreck_core::grid::ChannelGrid;
use sonarwreck_core::losses::{binary_cross_entropy, cross_entropy_onehot, total_loss};
use sonarwreck_core::sonar::{db_to_pixel, sonar_intensity, target_strength, DbWindow, TS_FLOOR_DB};
use sonarwreck_core::{Grid, LabelMask};

fn mask_strategy(max: usize) -> impl Strategy<Value = LabelMask> {
    (1..max, 1..max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..=1, w * h).prop_map(move |d| Grid::from_vec(w, h, d).unwrap())
    })
}

fn blob_mask(w: usize, h: usize, seed: u64) -> LabelMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (rng.random_range(0..w) as f64, rng.random_range(0..h) as f64);
    let (rx, ry) = (rng.random_range(2.0..w as f64 / 3.0), rng.random_range(2.0..h as f64 / 3.0));
    Grid::from_fn(w, h, |u, v| {
        let (dx, dy) = ((u as f64 - cx) / rx, (v as f64 - cy) / ry);
        (dx * dx + dy * dy <= 1.0) as u8
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn target_strength_is_floored_and_monotone(c1 in 0.0f64..=1.0, c2 in 0.0f64..=1.0, rho in 0.0f64..=1.0) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let a = target_strength(lo, rho).unwrap();
        let b = target_strength(hi, rho).unwrap();
        prop_assert!(a >= TS_FLOOR_DB && b >= TS_FLOOR_DB);
        prop_assert!(a <= b);
        prop_assert!(b <= 0.0);
    }

    #[test]
    fn intensity_falls_with_range(sl in 150.0f64..250.0, d in 0.5f64..100.0, k in 1.01f64..4.0, ts in -80.0f64..0.0) {
        prop_assert!(sonar_intensity(sl, d * k, ts).unwrap() < sonar_intensity(sl, d, ts).unwrap());
    }

    #[test]
    fn pixel_mapping_is_monotone(a in -50.0f64..250.0, b in -50.0f64..250.0) {
        let w = DbWindow { lo: 110.0, hi: 180.0 };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(db_to_pixel(lo, w) <= db_to_pixel(hi, w));
    }

    #[test]
    fn bvh_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = || Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let tris: Vec<Triangle> = (0..40).map(|_| Triangle::new(p(), p(), p())).collect();
        let bvh = Bvh::build(&tris);
        for _ in 0..50 {
            let ray = Ray::new(p() * 3.0, p());
            let a = bvh.nearest(&tris, &ray, 1e9);
            let b = nearest_brute_force(&tris, &ray, 1e9);
            prop_assert_eq!(a.map(|h| h.triangle), b.map(|h| h.triangle));
        }
    }

    #[test]
    fn onehot_round_trip_and_channel_sum(seed in any::<u64>(), n_r in 1usize..16, n_t in 1usize..32) {
        let params = DeformParams { n_r, n_theta: n_t, r_max: 5.0 };
        let mask = blob_mask(24, 20, seed);
        prop_assume!(mask.count_eq(1) > 0);
        let field = generate_quadrant_field(&mask, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let onehot = encode_onehot(&field);
        for px in onehot.tensor.pixels() {
            prop_assert_eq!(px.iter().sum::<f32>(), 2.0);
        }
        prop_assert_eq!(decode_onehot(&onehot).unwrap(), field);
    }

    #[test]
    fn field_is_deterministic_and_piecewise_constant(seed in any::<u64>()) {
        let params = DeformParams::for_image(32, 32);
        let mask = blob_mask(32, 32, seed);
        prop_assume!(mask.count_eq(1) > 0);
        let a = generate_quadrant_field(&mask, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = generate_quadrant_field(&mask, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        let mut per_quadrant: [Option<[u8; 2]>; 4] = [None; 4];
        for (u, v, &bin) in a.bins.iter_indexed() {
            if *mask.get(u, v) == 1 {
                let q = a.quadrant(u, v);
                prop_assert!(per_quadrant[q].is_none_or(|b| b == bin));
                per_quadrant[q] = Some(bin);
            } else {
                prop_assert_eq!(bin, [0, 0]);
            }
        }
    }

    #[test]
    fn warp_conserves_and_stays_consistent(seed in any::<u64>()) {
        let params = DeformParams::for_image(40, 40);
        let mask = blob_mask(40, 40, seed);
        prop_assume!(mask.count_eq(1) > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let image = Grid::from_fn(40, 40, |_, _| rng.random_range(1..=255u8));
        let shadow = Grid::new(40, 40);
        let field = generate_quadrant_field(&mask, &params, &mut rng).unwrap();
        let f = apply_field(&image, &mask, &shadow, &field).unwrap();
        prop_assert!(f.mask.count_eq(1) <= mask.count_eq(1));
        for (i, &p) in f.image.as_slice().iter().enumerate() {
            if p != 0 {
                prop_assert_eq!(f.mask.as_slice()[i], 1);
            }
        }
    }

    #[test]
    fn single_quadrant_warp_is_a_translation(seed in any::<u64>(), q in 0usize..4) {
        let params = DeformParams { n_r: 4, n_theta: 8, r_max: 6.0 };
        let (w, h) = (48, 48);
        let mask = blob_mask(w, h, seed);
        prop_assume!(mask.count_eq(1) > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image = Grid::from_fn(w, h, |_, _| rng.random_range(1..=255u8));
        let mut field = generate_quadrant_field(&mask, &params, &mut rng).unwrap();
        // Keep only quadrant q moving.
        let bins = field.bins.clone();
        for (u, v, b) in bins.iter_indexed() {
            if field.quadrant(u, v) != q {
                field.bins.set(u, v, [0, 0]);
            } else {
                field.bins.set(u, v, *b);
            }
        }
        let f = apply_field(&image, &mask, &Grid::new(w, h), &field).unwrap();
        let [r, t] = field.quadrant_bins()[q];
        let (dx, dy) = sonarwreck_core::deformation::bin_offset(r, t, &params).unwrap();
        for (u, v, &m) in mask.iter_indexed() {
            if m == 1 && field.quadrant(u, v) == q {
                let (tu, tv) = (u as i64 + dx, v as i64 + dy);
                if tu >= 0 && tv >= 0 && (tu as usize) < w && (tv as usize) < h {
                    prop_assert_eq!(*f.mask.get(tu as usize, tv as usize), 1);
                    prop_assert!(*f.image.get(tu as usize, tv as usize) >= *image.get(u, v));
                }
            }
        }
    }

    #[test]
    fn composite_keeps_background_bits(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (20, 16);
        let terrain = Grid::from_fn(w, h, |_, _| rng.random::<u8>());
        let mask = blob_mask(w, h, seed);
        let shadow = Grid::from_fn(w, h, |_, _| rng.random_bool(0.2));
        let f = Fractured { image: Grid::from_fn(w, h, |_, _| rng.random::<u8>()), mask: mask.clone(), shadow: shadow.clone() };
        let s = composite(&f, &terrain, &CompositeOptions::default()).unwrap();
        for (u, v, &p) in s.iter_indexed() {
            if *mask.get(u, v) == 0 && !*shadow.get(u, v) {
                prop_assert_eq!(p, *terrain.get(u, v));
            }
        }
        let empty = Fractured { image: f.image.clone(), mask: Grid::new(w, h), shadow: Grid::new(w, h) };
        let once = composite(&empty, &terrain, &CompositeOptions::default()).unwrap();
        prop_assert_eq!(&once, &terrain);
        prop_assert_eq!(composite(&empty, &once, &CompositeOptions::default()).unwrap(), once);
    }

    #[test]
    fn tiles_overlap_by_stride(extra in 0usize..2000) {
        let offs: Vec<usize> = tile_offsets(1728 + extra, 1728, 100).collect();
        prop_assert_eq!(offs.len(), extra / 100 + 1);
        for (i, o) in offs.iter().enumerate() {
            prop_assert_eq!(*o, 100 * i);
        }
    }

    #[test]
    fn cosine_bounds_and_scale_invariance(
        a in proptest::collection::vec(-10.0f64..10.0, 7),
        b in proptest::collection::vec(-10.0f64..10.0, 7),
        lambda in 1e-3f64..1e3,
    ) {
        let d = cosine_distance(&a, &b);
        prop_assert!((0.0..=2.0).contains(&d));
        let scaled: Vec<f64> = b.iter().map(|x| x * lambda).collect();
        prop_assert!((cosine_distance(&a, &scaled) - d).abs() < 1e-9);
    }

    #[test]
    fn mean_prototype_ignores_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h, c) = (9, 7, 5);
        let data: Vec<f64> = (0..w * h * c).map(|_| rng.random_range(0.0..1.0)).collect();
        let grid = ChannelGrid::from_vec(w, h, c, data.clone()).unwrap();
        let mut order: Vec<usize> = (0..w * h).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<f64> = order.iter().flat_map(|&p| data[p * c..(p + 1) * c].iter().copied()).collect();
        let g2 = ChannelGrid::from_vec(w, h, c, shuffled).unwrap();
        let (a, b) = (pool(&grid, Pooling::Mean).unwrap(), pool(&g2, Pooling::Mean).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let map = anomaly_map(&a, &grid).unwrap();
        prop_assert!(map.as_slice().iter().all(|x| (0.0..=2.0).contains(x)));
    }

    #[test]
    fn losses_are_non_negative(seed in any::<u64>(), k in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (6, 5);
        let mut pred = ChannelGrid::new(w, h, k);
        let mut target = ChannelGrid::new(w, h, k);
        for i in 0..w * h {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = raw.iter().sum();
            for (c, r) in raw.iter().enumerate() {
                pred.pixel_mut(i % w, i / w)[c] = r / s;
            }
            target.pixel_mut(i % w, i / w)[rng.random_range(0..k)] = 1.0;
        }
        let ce = cross_entropy_onehot(&pred, &target, None).unwrap();
        prop_assert!(ce >= 0.0);
        let all = Grid::filled(w, h, true);
        prop_assert_eq!(cross_entropy_onehot(&pred, &target, Some(&all)).unwrap(), ce);
        let p = Grid::from_fn(w, h, |_, _| rng.random_range(0.0..=1.0));
        let y = Grid::from_fn(w, h, |_, _| rng.random_range(0..=1u8));
        let bce = binary_cross_entropy(&p, &y).unwrap();
        prop_assert!(bce >= 0.0);
        let t = total_loss(ce, ce, bce, bce).unwrap();
        prop_assert_eq!(t.l_total, ce + ce + bce + bce);
    }

    #[test]
    fn confusion_matches_naive_count(pair in mask_strategy(12).prop_flat_map(|m| {
        let (w, h) = m.dims();
        (Just(m), proptest::collection::vec(0u8..=1, w * h).prop_map(move |d| Grid::from_vec(w, h, d).unwrap()))
    })) {
        let (pred, gt) = pair;
        let c = confusion(&pred, &gt).unwrap();
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for v in 0..pred.height() {
            for u in 0..pred.width() {
                match (*pred.get(u, v), *gt.get(u, v)) {
                    (1, 1) => tp += 1,
                    (1, 0) => fp += 1,
                    (0, 1) => fn_ += 1,
                    _ => tn += 1,
                }
            }
        }
        prop_assert_eq!((c.tp, c.fp, c.fn_, c.tn), (tp, fp, fn_, tn));
        prop_assert_eq!(c.total(), (pred.width() * pred.height()) as u64);
        let s = confusion(&gt, &pred).unwrap();
        prop_assert_eq!(s, c.swapped());
        prop_assert_eq!(metrics(&s).iou_ship, metrics(&c).iou_ship);
        prop_assert_eq!(metrics(&s).f1, metrics(&c).f1);
        let m = metrics(&c);
        prop_assert_eq!(m.miou, (m.iou_ship + m.iou_terr) / 2.0);
        for x in [m.iou_ship, m.iou_terr, m.miou, m.f1] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn adding_a_correct_pixel_never_lowers_iou(pred in mask_strategy(10), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = pred.dims();
        let gt = Grid::from_fn(w, h, |_, _| rng.random_range(0..=1u8));
        let before = metrics(&confusion(&pred, &gt).unwrap()).iou_ship;
        let missing: Vec<usize> = (0..w * h).filter(|&i| gt.as_slice()[i] == 1 && pred.as_slice()[i] == 0).collect();
        prop_assume!(!missing.is_empty());
        let mut better = pred.clone();
        better.as_mut_slice()[missing[rng.random_range(0..missing.len())]] = 1;
        prop_assert!(metrics(&confusion(&better, &gt).unwrap()).iou_ship >= before);
    }
}

#[test]
fn identity_field_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let img = Grid::from_fn(30, 20, |_, _| rng.random::<u8>());
    let mask = blob_mask(30, 20, 5);
    let img = Grid::from_fn(30, 20, |u, v| if *mask.get(u, v) == 1 { *img.get(u, v) } else { 0 });
    let shadow = Grid::from_fn(30, 20, |u, v| (u + v) % 7 == 0 && *mask.get(u, v) == 0);
    let f = apply_field(&img, &mask, &shadow, &DeformationField::identity(30, 20, &DeformParams::for_image(30, 20))).unwrap();
    assert_eq!(f.image, img);
    assert_eq!(f.mask, mask);
    assert_eq!(f.shadow, shadow);
}
