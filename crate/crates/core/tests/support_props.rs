//! Support detection, kernel geometry and the self-supporting constraint,
//! checked against a brute-force detector written here and by properties.

mod common;

use common::{brute_force, frame, kernel_oracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfsupport::grid::{DensityField, Direction, GridDims, RHO_MIN};
use selfsupport::optimizer::select_direction;
use selfsupport::support::{
    build_kernel, constraint_sensitivity, constraint_value, detect_supported, enumerate_supported,
    unsupported_set, DetectionParams, OverhangKernel,
};

fn sorted(k: &OverhangKernel) -> Vec<[isize; 3]> {
    let mut v = k.offsets().to_vec();
    v.sort();
    v
}

#[test]
fn kernels_follow_center_below_line_rule() {
    for dim in [2, 3] {
        for layers in 1..=4 {
            for theta in [10.0, 20.0, 26.0, 30.0, 35.0, 45.0, 50.0, 60.0, 70.0, 80.0, 89.0] {
                let k = build_kernel(theta, layers, dim).unwrap();
                assert_eq!(sorted(&k), kernel_oracle(theta, layers, dim), "theta {theta} layers {layers} dim {dim}");
                assert!(k.offsets().iter().all(|o| o[1] <= -1));
            }
        }
    }
}

#[test]
fn kernel_examples() {
    assert_eq!(sorted(&build_kernel(45.0, 1, 2).unwrap()), vec![[-1, -1, 0], [0, -1, 0], [1, -1, 0]]);
    assert_eq!(
        sorted(&build_kernel(45.0, 1, 3).unwrap()),
        vec![[-1, -1, 0], [0, -1, -1], [0, -1, 0], [0, -1, 1], [1, -1, 0]]
    );
    // a one-layer kernel reaches (2, -1) only below about 26.57 degrees
    assert!(build_kernel(26.0, 1, 2).unwrap().offsets().contains(&[2, -1, 0]));
    assert!(!build_kernel(30.0, 1, 2).unwrap().offsets().contains(&[2, -1, 0]));
    assert!(build_kernel(30.0, 2, 2).unwrap().offsets().contains(&[3, -2, 0]));
}

/// Build axis and the two in-layer axes of `dir`.
fn random_field(d: GridDims, rng: &mut ChaCha8Rng, passive_rate: f64) -> DensityField {
    let vals: Vec<f64> = (0..d.len()).map(|_| rng.random_range(RHO_MIN..=1.0)).collect();
    let passive: Vec<bool> = (0..d.len()).map(|_| rng.random_bool(passive_rate)).collect();
    DensityField::from_parts(d, vals, passive).unwrap()
}

#[test]
fn detection_matches_brute_force_in_every_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for d in [GridDims::new_2d(12, 9).unwrap(), GridDims::new_2d(7, 13).unwrap(), GridDims::new(6, 5, 4).unwrap()] {
        for theta in [30.0, 45.0, 60.0] {
            for layers in [1, 2] {
                let k = build_kernel(theta, layers, d.dim()).unwrap();
                for dir in Direction::candidates(d) {
                    for tau in [0.05, 0.1, 0.5] {
                        let f = random_field(d, &mut rng, 0.1);
                        let p = DetectionParams::new(tau, dir);
                        let want = brute_force(&f, &k, tau, dir);
                        assert_eq!(detect_supported(&f, &k, p).as_slice(), &want[..], "{d} {dir} {theta} {tau}");
                        assert_eq!(enumerate_supported(&f, &k, p).as_slice(), &want[..]);
                    }
                }
            }
        }
    }
}

#[test]
fn detection_examples() {
    let d = GridDims::new_2d(5, 7).unwrap();
    let k = build_kernel(45.0, 1, 2).unwrap();
    let p = DetectionParams::new(0.5, Direction::POS_Y);
    let solid = DensityField::uniform(d, 1.0);
    assert_eq!(detect_supported(&solid, &k, p).supported_count(), d.len());

    let mut lone = DensityField::uniform(d, RHO_MIN);
    let e = d.idx(2, 4, 0);
    lone.set(e, 1.0);
    let mask = detect_supported(&lone, &k, p);
    assert_eq!(unsupported_set(&mask, &lone, 0.5), vec![e]);
}

fn arb_case() -> impl Strategy<Value = (GridDims, Vec<f64>, Vec<f64>, f64, f64, usize)> {
    (1usize..9, 1usize..9, prop_oneof![Just(1usize), 2usize..5]).prop_flat_map(|(nx, ny, nz)| {
        let n = nx * ny * nz;
        (
            Just(GridDims::new(nx, ny, nz).unwrap()),
            prop::collection::vec(RHO_MIN..=1.0, n),
            prop::collection::vec(0.0..=1.0f64, n),
            prop_oneof![Just(0.05), Just(0.1), Just(0.5), 0.01..0.99f64],
            prop_oneof![Just(45.0), Just(30.0), Just(60.0), 5.0..85.0f64],
            0usize..6,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn adding_material_never_unsupports((d, base, bump, tau, theta, di) in arb_case()) {
        let dirs = Direction::candidates(d);
        let dir = dirs[di % dirs.len()];
        let k = build_kernel(theta, 2, d.dim()).unwrap();
        let lo = DensityField::from_values(d, base.clone()).unwrap();
        let more: Vec<f64> = base.iter().zip(&bump).map(|(b, u)| (b + u).min(1.0)).collect();
        let hi = DensityField::from_values(d, more).unwrap();
        let p = DetectionParams::new(tau, dir);
        let (m0, m1) = (detect_supported(&lo, &k, p), detect_supported(&hi, &k, p));
        for e in 0..d.len() {
            prop_assert!(!m0.is_supported(e) || m1.is_supported(e), "element {}", e);
        }
    }

    #[test]
    fn bottom_layer_always_supported((d, vals, _b, tau, theta, di) in arb_case()) {
        let dirs = Direction::candidates(d);
        let dir = dirs[di % dirs.len()];
        let k = build_kernel(theta, 1, d.dim()).unwrap();
        let f = DensityField::from_values(d, vals).unwrap();
        let mask = detect_supported(&f, &k, DetectionParams::new(tau, dir));
        let n = [d.nx, d.ny, d.nz];
        let (a, _) = frame(dir);
        for e in 0..d.len() {
            let (i, j, l) = d.coords(e);
            let c = [i, j, l][a];
            let layer = if dir.positive { c } else { n[a] - 1 - c };
            if layer == 0 {
                prop_assert!(mask.is_supported(e));
            }
        }
    }

    #[test]
    fn batched_equals_enumeration((d, vals, _b, tau, theta, di) in arb_case(), layers in 1usize..4) {
        let dirs = Direction::candidates(d);
        let dir = dirs[di % dirs.len()];
        let k = build_kernel(theta, layers, d.dim()).unwrap();
        let f = DensityField::from_values(d, vals).unwrap();
        let p = DetectionParams::new(tau, dir);
        prop_assert_eq!(detect_supported(&f, &k, p), enumerate_supported(&f, &k, p));
    }

    #[test]
    fn steeper_angles_nest(t1 in 1.0..89.0f64, t2 in 1.0..89.0f64, dim in 2usize..4) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let wide = build_kernel(lo, 1, dim).unwrap();
        let narrow = build_kernel(hi, 1, dim).unwrap();
        for o in narrow.offsets() {
            prop_assert!(wide.offsets().contains(o));
        }
    }

    #[test]
    fn unsupported_list_is_sorted_and_solid((d, vals, _b, tau, theta, di) in arb_case()) {
        let dirs = Direction::candidates(d);
        let dir = dirs[di % dirs.len()];
        let k = build_kernel(theta, 1, d.dim()).unwrap();
        let f = DensityField::from_values(d, vals).unwrap();
        let mask = detect_supported(&f, &k, DetectionParams::new(tau, dir));
        let list = unsupported_set(&mask, &f, tau);
        prop_assert!(list.windows(2).all(|w| w[0] < w[1]));
        for &e in &list {
            prop_assert!(!mask.is_supported(e) && f.get(e) >= tau && !f.passive()[e]);
        }
        let count = (0..d.len()).filter(|&e| !mask.is_supported(e) && f.get(e) >= tau).count();
        prop_assert_eq!(count, list.len());
    }

    #[test]
    fn constraint_sensitivity_is_local(vals in prop::collection::vec(RHO_MIN..=1.0, 20), pick in prop::collection::btree_set(0usize..20, 0..8), j in 0usize..20, h in 0.001..0.5f64) {
        let list: Vec<usize> = pick.into_iter().collect();
        let g0 = constraint_sensitivity(&vals, &list);
        let mut moved = vals.clone();
        moved[j] = (moved[j] + h).min(1.0);
        let g1 = constraint_sensitivity(&moved, &list);
        for e in 0..20 {
            if e != j {
                prop_assert_eq!(g0[e], g1[e]);
            }
        }
        let brute: f64 = list.iter().map(|&e| vals[e] * vals[e]).sum();
        prop_assert!((constraint_value(&vals, &list) - brute).abs() <= 1e-15 * brute.max(1.0));
    }
}

#[test]
fn constraint_examples_and_finite_differences() {
    assert_eq!(constraint_value(&[1.0, 0.5, 1.0], &[]), 0.0);
    assert_eq!(constraint_value(&[1.0, 0.5, 1.0], &[0, 2]), 2.0);
    assert_eq!(constraint_sensitivity(&[0.4, 0.9], &[0]), vec![0.8, 0.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vals: Vec<f64> = (0..24).map(|_| rng.random_range(0.1..1.0)).collect();
    let list = vec![1, 4, 5, 11, 20];
    let g = constraint_sensitivity(&vals, &list);
    let h = 1e-6;
    for e in 0..vals.len() {
        let mut v = vals.clone();
        v[e] += h;
        let up = constraint_value(&v, &list);
        v[e] -= 2.0 * h;
        let down = constraint_value(&v, &list);
        let fd = (up - down) / (2.0 * h);
        assert!((g[e] - fd).abs() <= 1e-8 * fd.abs().max(1.0), "element {e}: {} vs {fd}", g[e]);
    }
}

#[test]
fn selected_direction_has_fewest_unsupported() {
    let d = GridDims::new_2d(20, 20).unwrap();
    let k = build_kernel(45.0, 1, 2).unwrap();
    let dirs = Direction::candidates(d);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        // sparse fields give distinct counts per direction
        let vals: Vec<f64> = (0..d.len()).map(|_| if rng.random_bool(0.3) { 1.0 } else { RHO_MIN }).collect();
        let f = DensityField::from_values(d, vals).unwrap();
        let chosen = select_direction(&f, &dirs, &k, 0.5).unwrap();
        let count = |dir| brute_force(&f, &k, 0.5, dir).iter().zip(f.values()).filter(|(s, v)| !**s && **v >= 0.5).count();
        let best = count(chosen);
        for &other in &dirs {
            assert!(best <= count(other));
        }
        let first_min = dirs.iter().copied().min_by_key(|&o| count(o)).unwrap();
        assert_eq!(chosen, first_min);
    }
}
