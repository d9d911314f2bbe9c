use neurotopo_core::cubical::{build_complex, euler_characteristic};
use neurotopo_core::dvf::{apply_field, build_greedy_dvf, reduced_betti, validate_field};
use neurotopo_core::fixtures;
use neurotopo_core::homology::{betti_mod2, homology_integral};
use neurotopo_core::image::{label_components, median_filter, BinaryImage, Connectivity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> BinaryImage {
    BinaryImage::from_fn(w, h, |_, _| rng.gen_bool(p))
}

#[test]
fn homology_routes_agree_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..240 {
        let p = [0.3, 0.5, 0.7][i % 3];
        let m = random_mask(&mut rng, 16, 16, p);
        let cx = build_complex(&m);
        let (b0, b1) = betti_mod2(&cx);
        let z = homology_integral(&cx).unwrap();
        assert!(z.is_torsion_free());
        assert_eq!((z.betti0, z.betti1), (b0, b1));
        assert_eq!(reduced_betti(&m), (b0, b1));
        assert_eq!(label_components(&m, Connectivity::Eight).count() as usize, b0);
        assert_eq!(b0 as i64 - b1 as i64, euler_characteristic(&cx));
    }
}

#[test]
fn greedy_fields_are_valid_and_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let m = random_mask(&mut rng, 64, 48, 0.6);
        let cx = build_complex(&m);
        let field = build_greedy_dvf(&cx);
        validate_field(&cx, &field).unwrap();
        let crit = apply_field(&cx, &field).unwrap();
        let (b0, b1) = betti_mod2(&cx);
        assert_eq!(crit.betti_mod2(), (b0, b1));
        assert!(crit.count(0) >= b0 && crit.count(1) >= b1);
        assert_eq!(
            field.len() * 2 + crit.count(0) + crit.count(1) + crit.count(2),
            cx.len()
        );
    }
}

#[test]
fn median_is_idempotent_on_blob_fixtures() {
    let f = fixtures::nucleus_fixture();
    for img in [&f.nuclei, &f.neurons] {
        let once = median_filter(img, 1).unwrap();
        assert_eq!(&once, img);
        assert_eq!(median_filter(&once, 1).unwrap(), once);
    }
}
