use sboxlab::analysis;
use sboxlab::fixtures;
use sboxlab::gf2::random_invertible;
use sboxlab::normalize::*;
use sboxlab::rng;
use sboxlab::{SBox, Side};

use rand::Rng;

fn random_image(s: &SBox, seed: u64) -> SBox {
    let n = s.n() as usize;
    let mut r = rng::seeded(seed);
    let a = random_invertible(n, &mut r);
    let b = random_invertible(n, &mut r);
    let mask = s.len() - 1;
    let (cx, cy) = (r.gen::<usize>() & mask, r.gen::<usize>() & mask);
    s.apply_affine(Some(&a), Some(&b), cy, cx).unwrap()
}

/// Runs the pipeline up to the point where 0, 1, 2, 4 are fixed.
fn ladder_start(s: &SBox) -> SBox {
    let s = fix_zero(s, ZeroFix::OutputXor).unwrap().result;
    let s = fix_units(&s, Side::Output).unwrap().result;
    let s = set_s3(&s).unwrap().result;
    fix_power_point(&s, 1).unwrap().result
}

fn sorted_abs_lat(s: &SBox) -> Vec<i32> {
    let mut v: Vec<i32> = analysis::lat(s).data().iter().map(|e| e.abs()).collect();
    v.sort_unstable();
    v
}

#[test]
fn du4_fixed_three_detour() {
    let inv = fixtures::power_map(4, -1).unwrap();
    let mut hit = 0;
    for seed in 0..400 {
        let s = random_image(&inv, seed);
        let s = fix_zero(&s, ZeroFix::OutputXor).unwrap().result;
        let s = fix_units(&s, Side::Output).unwrap().result;
        if s.get(3) != 3 {
            continue;
        }
        hit += 1;
        let before = analysis::differential_profile(&s);
        let st = set_s3(&s).unwrap();
        assert_eq!(&st.result.table()[..4], &[0, 1, 2, 5]);
        let after = analysis::differential_profile(&st.result);
        assert_eq!((before.du, before.df), (after.du, after.df));
        assert!(st.certificate.verify());
    }
    assert!(hit > 0, "no sample with S(3) = 3");
}

#[test]
fn general_box_may_keep_three() {
    let s = SBox::identity(5);
    let rep = normalize(&s).unwrap();
    assert_eq!(rep.result, s);
    assert!(rep.stage_log.is_empty());
    assert!(rep.checklist.all());
}

#[test]
fn column_counts_and_preimage_fix() {
    let mut exercised = 0;
    for seed in 0..300 {
        let s = ladder_start(&SBox::random_bijection(5, seed).unwrap());
        let s = bound_power_plus_one(&s, 2).unwrap().result;
        assert!(s.get(5) <= 11);
        if s.get(5) > 8 {
            assert!(s.preimage(8).unwrap() >= 8);
        }
        // force a low preimage of 8 by a raw swap outside the fixed set
        let low = (5..8).find(|&x| s.get(x) < 8 || s.get(x) > 11).unwrap_or(6);
        let mut t = s.clone();
        let p8 = t.preimage(8).unwrap();
        if p8 >= 8 {
            t.swap_in_place(p8, low).unwrap();
        }
        if t.preimage(8).unwrap() >= 8 || [0, 1, 2, 4].iter().any(|&x| t.get(x) != x) {
            continue;
        }
        if ![3, 5].contains(&t.get(3)) {
            continue;
        }
        exercised += 1;
        let cols = preimage_high_columns(&t, 2).unwrap();
        assert!(cols.len() >= 5, "seed {seed}: {} columns", cols.len());
        // brute-force recount of the admissible columns
        let images: Vec<usize> = (0..8).map(|x| t.get(x)).collect();
        let brute: Vec<u32> = (9..16u32).filter(|c| !images.contains(&(*c as usize))).collect();
        assert_eq!(cols, brute);
        let st = ensure_preimage_high(&t, 2).unwrap();
        assert!(st.result.preimage(8).unwrap() >= 8);
        for x in 0..8 {
            if t.get(x) < 8 {
                assert_eq!(st.result.get(x), t.get(x));
            }
        }
        let fixed = fix_power_point(&st.result, 2).unwrap();
        assert_eq!(fixed.result.get(8), 8);
        for x in 0..8 {
            assert_eq!(fixed.result.get(x), st.result.get(x));
        }
        assert!(fixed.certificate.in_map.matrix().is_invertible());
        assert!(fixed.certificate.verify());
    }
    assert!(exercised > 20);
}

#[test]
fn bound_at_h3_for_n6() {
    for seed in 0..100 {
        let rep = normalize(&SBox::random_bijection(6, seed).unwrap()).unwrap();
        assert!(rep.result.get(9) <= 25);
        assert!(rep.result.get(17) <= 57);
    }
}

#[test]
fn apn_refinement_paths() {
    let maps = [fixtures::power_map(5, 3).unwrap(), fixtures::power_map(5, -1).unwrap()];
    let (mut seven, mut nine, mut eleven, mut detour) = (0, 0, 0, 0);
    for seed in 0..2000 {
        let s = ladder_start(&random_image(&maps[seed as usize % 2], seed));
        assert_eq!(s.get(3), 5);
        let before = s.get(5);
        let st = refine_apn_s5(&s).unwrap();
        let v = st.result.get(5);
        assert!(v == 6 || v == 10, "seed {seed}: S(5) = {v}");
        assert_eq!(&st.result.table()[..5], &[0, 1, 2, 5, 4]);
        assert!(st.certificate.verify());
        if before == 7 {
            seven += 1;
            let swaps = st.stages.iter().filter(|s| s.op == Op::BitSwap).count();
            assert_eq!(swaps, 2, "two-sided bit swap expected");
        }
        let cxors: Vec<_> = st.stages.iter().filter_map(|s| match &s.op {
            Op::Cxor { i: 4, bits } if s.procedure == Procedure::RefineFive => Some(bits.clone()),
            _ => None,
        }).collect();
        if cxors.iter().any(|b| b == &vec![0, 1, 1] || b == &vec![0, 1, 0]) {
            nine += 1;
        }
        if cxors.iter().any(|b| b == &vec![0, 0, 1]) {
            eleven += 1;
        }
        if st.stages.iter().any(|s| matches!(s.op, Op::Translate { .. })) {
            detour += 1;
        }
    }
    assert!(
        seven > 0 && nine > 0 && eleven > 0 && detour > 0,
        "paths seen: {seven} {nine} {eleven} {detour}"
    );
}

#[test]
fn refine_rejects_weak_boxes() {
    let s = ladder_start(&SBox::random_bijection(5, 1).unwrap());
    if analysis::differential_profile(&s).du > 4 {
        assert!(refine_apn_s5(&s).is_err());
    }
    assert!(refine_apn_s5(&SBox::identity(4)).is_err());
}

#[test]
fn invariants_across_sizes() {
    for n in 4..=6u32 {
        for seed in 0..20 {
            let s = SBox::random_bijection(n, 77 + seed).unwrap();
            let rep = normalize(&s).unwrap();
            assert!(rep.checklist.all());
            assert!(rep.certificate.verify());
            assert_eq!(analysis::metrics(&s), analysis::metrics(&rep.result));
            assert_eq!(analysis::ddt(&s).multiset(), analysis::ddt(&rep.result).multiset());
            assert_eq!(sorted_abs_lat(&s), sorted_abs_lat(&rep.result));
        }
    }
}

#[test]
fn apn_normal_forms_vary() {
    let cube = fixtures::power_map(5, 3).unwrap();
    let forms = sample_normal_forms(&cube, 50, 9).unwrap();
    eprintln!("distinct normal forms over 50 trials: {}", forms.len());
    for t in &forms {
        let s = SBox::from_table(t.clone()).unwrap();
        assert!(checklist(&s).all());
        for x in 0..32usize {
            if (2..=3).contains(&x.count_ones()) {
                assert_ne!(s.get(x), x);
            }
        }
    }
}

#[test]
fn report_json_shape() {
    let rep = normalize(&fixtures::ctc()).unwrap();
    let j = rep.to_json();
    assert_eq!(j["all_satisfied"], true);
    assert!(j["stages"].as_array().unwrap().len() == rep.stage_log.len());
    assert_eq!(j["certificate"]["out_map"]["rows"].as_array().unwrap().len(), 3);
}
